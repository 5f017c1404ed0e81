//! OOD-accuracy prediction: ALine-S, ALine-D, the confidence baselines
//! (ATC, AC, DOC-Feat, naive agreement), and temperature scaling.

mod baselines;
mod calibration;
mod pairsys;

pub use baselines::{
    ac_report, atc, atc_report, average_confidence, doc_feat, doc_feat_report, naive_agreement,
    AtcEstimate, DocFeatEstimate,
};
pub use calibration::{calibrate_models, temperature_scale, CalibrationResult};
pub use pairsys::PairSystem;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::data::Split;
use crate::linefit::{self, FitError, LineFit};
use crate::metrics::{self, MetricError, MetricTable};
use crate::normal;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("model '{model_id}' carries no logits on the {split} split")]
    MissingLogits { model_id: String, split: Split },
    #[error("need at least {needed} models, got {got}")]
    NotEnoughModels { needed: usize, got: usize },
    #[error("pair system right-hand side has {got} entries, expected {expected}")]
    BadRhsLength { expected: usize, got: usize },
    #[error("pair system is rank deficient")]
    RankDeficient,
    #[error("unknown model id '{id}' in pairing")]
    UnknownModel { id: String },
    #[error("model '{id}' appears in no pair, so it has no aggregate estimate")]
    UnpairedModel { id: String },
    #[error("negative log-likelihood is non-finite at every probed temperature")]
    NonFiniteNll,
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    #[serde(rename = "ALINE_S")]
    AlineS,
    #[serde(rename = "ALINE_D")]
    AlineD,
    #[serde(rename = "ATC")]
    Atc,
    #[serde(rename = "AC")]
    Ac,
    #[serde(rename = "DOC_FEAT")]
    DocFeat,
    #[serde(rename = "AGREEMENT")]
    Agreement,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::AlineS,
        Method::AlineD,
        Method::Atc,
        Method::Ac,
        Method::DocFeat,
        Method::Agreement,
    ];

    /// True for methods that need raw logits rather than hard predictions.
    pub fn needs_logits(self) -> bool {
        matches!(self, Method::Atc | Method::Ac | Method::DocFeat)
    }

    pub fn cli_name(self) -> &'static str {
        match self {
            Method::AlineS => "aline-s",
            Method::AlineD => "aline-d",
            Method::Atc => "atc",
            Method::Ac => "ac",
            Method::DocFeat => "doc-feat",
            Method::Agreement => "agreement",
        }
    }

    /// Tag used in serialized reports.
    pub fn tag(self) -> &'static str {
        match self {
            Method::AlineS => "ALINE_S",
            Method::AlineD => "ALINE_D",
            Method::Atc => "ATC",
            Method::Ac => "AC",
            Method::DocFeat => "DOC_FEAT",
            Method::Agreement => "AGREEMENT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.cli_name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.cli_name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// One model's estimated OOD accuracy.
#[derive(Debug, Clone, Serialize)]
pub struct ModelEstimate {
    pub id: String,
    pub estimate: f64,
}

/// Method-specific diagnostics carried alongside the estimates.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostics {
    Aline {
        slope: f64,
        bias: f64,
        r2: f64,
    },
    Atc {
        calibrated: bool,
        per_model: Vec<AtcDiag>,
    },
    Ac {
        calibrated: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        temperatures: Option<Vec<f64>>,
    },
    DocFeat {
        calibrated: bool,
        per_model: Vec<DocFeatDiag>,
    },
    Agreement {
        pairs: Vec<PairEstimate>,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct AtcDiag {
    pub id: String,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DocFeatDiag {
    pub id: String,
    /// Raw value before clipping into [0, 1].
    pub raw: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEstimate {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// Per-model OOD accuracy estimates produced by one method.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub estimates: Vec<ModelEstimate>,
    pub diagnostics: Diagnostics,
}

impl EstimateReport {
    pub fn estimate_for(&self, id: &str) -> Option<f64> {
        self.estimates
            .iter()
            .find(|e| e.id == id)
            .map(|e| e.estimate)
    }
}

fn phi(w: f64) -> f64 {
    normal::norm_cdf(w)
}

fn probit_accuracies(table: &MetricTable) -> Result<Vec<f64>, EstimateError> {
    let acc = table.accuracies().ok_or(MetricError::MissingAccuracies {
        split: table.split(),
    })?;
    let m = table.sample_count();
    Ok(acc
        .iter()
        .map(|&p| metrics::probit(p, m))
        .collect::<Result<_, _>>()?)
}

/// ALine-S: fit the agreement line, then push each model's probit ID
/// accuracy through it. Estimates are `Phi(a * probit(acc_ID) + b)`.
pub fn aline_s(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<EstimateReport, EstimateError> {
    let fit = agreement_fit(id_metrics, ood_metrics)?;
    let pa = probit_accuracies(id_metrics)?;
    let estimates = id_metrics
        .model_ids()
        .iter()
        .zip(&pa)
        .map(|(id, &x)| ModelEstimate {
            id: id.clone(),
            estimate: phi(fit.slope * x + fit.bias),
        })
        .collect();
    Ok(EstimateReport {
        method: Method::AlineS,
        estimates,
        diagnostics: Diagnostics::Aline {
            slope: fit.slope,
            bias: fit.bias,
            r2: fit.r_squared,
        },
    })
}

/// ALine-D: build the pair-averaging least-squares system and solve for
/// all probit OOD accuracies jointly.
///
/// For each unordered pair (j, k) the right-hand side is
/// `probit(Agr_OOD) + a * (mean probit ID accuracy of the pair - probit(Agr_ID))`
/// with `a` from the agreement-line fit; the bias cancels in the
/// substitution and is not used.
pub fn aline_d(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<EstimateReport, EstimateError> {
    let n = id_metrics.n_models();
    if n < 3 {
        return Err(EstimateError::NotEnoughModels { needed: 3, got: n });
    }
    let fit = agreement_fit(id_metrics, ood_metrics)?;
    let pa = probit_accuracies(id_metrics)?;
    let m_id = id_metrics.sample_count();
    let m_ood = ood_metrics.sample_count();
    let mut rhs = Vec::with_capacity(metrics::pair_count(n));
    for (i, j) in metrics::pairs(n) {
        let g_id = metrics::probit(id_metrics.agreement_between(i, j), m_id)?;
        let g_ood = metrics::probit(ood_metrics.agreement_between(i, j), m_ood)?;
        rhs.push(g_ood + fit.slope * (0.5 * (pa[i] + pa[j]) - g_id));
    }
    let system = PairSystem::new(n, rhs)?;
    let w = system.solve()?;
    let estimates = id_metrics
        .model_ids()
        .iter()
        .zip(&w)
        .map(|(id, &wi)| ModelEstimate {
            id: id.clone(),
            estimate: phi(wi),
        })
        .collect();
    Ok(EstimateReport {
        method: Method::AlineD,
        estimates,
        diagnostics: Diagnostics::Aline {
            slope: fit.slope,
            bias: fit.bias,
            r2: fit.r_squared,
        },
    })
}

fn agreement_fit(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<LineFit, EstimateError> {
    Ok(linefit::agreement_line(id_metrics, ood_metrics)?)
}
