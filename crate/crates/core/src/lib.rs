//! Estimate the out-of-distribution accuracy of a set of classifiers from
//! their ID-validation predictions and unlabeled-OOD predictions.
//!
//! The central observation this library operationalizes: across a set of
//! classifiers, probit-scaled pairwise agreement measured on an ID split and
//! on a shifted split tends to lie on a line, and that line tends to share
//! its slope and bias with the probit-scaled ID-vs-OOD accuracy line. Since
//! agreement needs no labels, the agreement line can be fit from unlabeled
//! shifted data and used to predict each model's OOD accuracy.
//!
//! Module map:
//!
//! - [`data`] — prediction/logit/label tables, the dataset manifest, and
//!   ingestion with full cross-file validation.
//! - [`metrics`] — sample accuracies, pairwise agreements, the probit
//!   transform, and the accuracy-agreement gap diagnostic.
//! - [`linefit`] — OLS on probit-scaled scatters, fit diagnostics, and the
//!   bootstrap slope-difference test.
//! - [`estimators`] — ALine-S, ALine-D, and the confidence baselines
//!   (ATC, AC, DOC-Feat, naive agreement) plus temperature scaling.
//! - [`synth`] — an exact-line table constructor and a stochastic model-zoo
//!   generator for desk-scale experiments.

pub mod data;
pub mod estimators;
pub mod linefit;
pub mod metrics;
pub mod synth;

mod normal;
