//! Sample accuracies, pairwise agreements, probit transforms, and the
//! accuracy-agreement gap diagnostic.
//!
//! All proportions computed here are exact counts divided by the sample
//! count `m`. Before probit scaling, proportions are clamped into
//! `[1/(2m), 1 - 1/(2m)]` — half a count of continuity correction — so the
//! transform stays finite even when a column saturates.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{ModelSet, Split};
use crate::normal;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prediction columns differ in length: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input: at least one example is required")]
    Empty,
    #[error("proportion {value} outside [0, 1]")]
    ProportionOutOfRange { value: f64 },
    #[error("probit argument must be finite, got {value}")]
    NonFinite { value: f64 },
    #[error("accuracies missing on the {split} split")]
    MissingAccuracies { split: Split },
    #[error("metric tables cover different model sets")]
    ModelSetMismatch,
    #[error("metric table: {reason}")]
    BadTable { reason: String },
}

/// Fraction of rows where prediction equals label.
pub fn accuracy(predictions: &[u32], labels: &[u32]) -> Result<f64, MetricError> {
    if predictions.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = predictions
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Fraction of rows where the two prediction columns coincide.
pub fn agreement(a: &[u32], b: &[u32]) -> Result<f64, MetricError> {
    accuracy(a, b)
}

/// Probit transform of a sample proportion: `Phi^-1` after clamping into
/// `[1/(2m), 1 - 1/(2m)]`. Always finite for valid inputs.
pub fn probit(p: f64, m: u64) -> Result<f64, MetricError> {
    if !p.is_finite() {
        return Err(MetricError::NonFinite { value: p });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(MetricError::ProportionOutOfRange { value: p });
    }
    let m = m.max(1) as f64;
    let lo = 1.0 / (2.0 * m);
    Ok(normal::norm_quantile(p.clamp(lo, 1.0 - lo)))
}

/// Standard normal CDF `Phi`, the inverse of the probit transform.
pub fn inverse_probit(z: f64) -> Result<f64, MetricError> {
    if !z.is_finite() {
        return Err(MetricError::NonFinite { value: z });
    }
    Ok(normal::norm_cdf(z))
}

/// Index of the unordered pair (i, j), i < j, in canonical row order:
/// (0,1), (0,2), ..., (0,n-1), (1,2), ...
pub fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Number of unordered pairs among `n` models.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Iterator over unordered pairs in canonical row order.
pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Per-model accuracies and per-pair agreements for one split.
///
/// Tables built by [`metric_table`] hold exact multiples of `1/m`; tables
/// built synthetically (see `synth::exact_line_tables`) bypass the counting
/// layer and are flagged via [`MetricTable::is_synthetic`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "MetricTableDto", try_from = "MetricTableDto")]
pub struct MetricTable {
    split: Split,
    sample_count: u64,
    model_ids: Vec<String>,
    accuracies: Option<Vec<f64>>,
    /// Upper triangle in canonical pair order.
    agreements: Vec<f64>,
    synthetic: bool,
}

impl MetricTable {
    /// Assemble a table from parts, validating shapes and ranges.
    pub fn from_parts(
        split: Split,
        sample_count: u64,
        model_ids: Vec<String>,
        accuracies: Option<Vec<f64>>,
        agreements: Vec<f64>,
        synthetic: bool,
    ) -> Result<Self, MetricError> {
        let n = model_ids.len();
        if n == 0 {
            return Err(MetricError::BadTable {
                reason: "no models".into(),
            });
        }
        let unique: std::collections::BTreeSet<&String> = model_ids.iter().collect();
        if unique.len() != n {
            return Err(MetricError::BadTable {
                reason: "duplicate model ids".into(),
            });
        }
        if sample_count == 0 {
            return Err(MetricError::Empty);
        }
        if agreements.len() != pair_count(n) {
            return Err(MetricError::BadTable {
                reason: format!(
                    "expected {} pair entries for {} models, found {}",
                    pair_count(n),
                    n,
                    agreements.len()
                ),
            });
        }
        for &v in agreements.iter().chain(accuracies.iter().flatten()) {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricError::ProportionOutOfRange { value: v });
            }
        }
        if let Some(acc) = &accuracies {
            if acc.len() != n {
                return Err(MetricError::BadTable {
                    reason: format!("{} accuracies for {} models", acc.len(), n),
                });
            }
        }
        Ok(Self {
            split,
            sample_count,
            model_ids,
            accuracies,
            agreements,
            synthetic,
        })
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn sample_count(&self) -> u64 {
        self.sample_count
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn accuracies(&self) -> Option<&[f64]> {
        self.accuracies.as_deref()
    }

    pub fn is_synthetic(&self) -> bool {
        self.synthetic
    }

    /// Agreement between models `i` and `j`; symmetric, and 1 on the
    /// diagonal by definition.
    pub fn agreement_between(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.agreements[pair_index(i, j, self.n_models())]
    }

    /// Pair values in canonical row order.
    pub fn pair_values(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        pairs(self.n_models()).zip(self.agreements.iter().copied())
    }

    /// Restriction of the table to the given model indices, in the order
    /// given. Indices must be distinct and in range.
    pub fn subset(&self, indices: &[usize]) -> MetricTable {
        let k = indices.len();
        let model_ids = indices.iter().map(|&i| self.model_ids[i].clone()).collect();
        let accuracies = self
            .accuracies
            .as_ref()
            .map(|acc| indices.iter().map(|&i| acc[i]).collect());
        let mut agreements = vec![0.0; pair_count(k)];
        for (a, b) in pairs(k) {
            agreements[pair_index(a, b, k)] = self.agreement_between(indices[a], indices[b]);
        }
        MetricTable {
            split: self.split,
            sample_count: self.sample_count,
            model_ids,
            accuracies,
            agreements,
            synthetic: self.synthetic,
        }
    }

    /// The same table with models permuted into lexicographic id order.
    pub fn canonicalized(&self) -> MetricTable {
        let n = self.n_models();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.model_ids[a].cmp(&self.model_ids[b]));
        let model_ids: Vec<String> = order.iter().map(|&i| self.model_ids[i].clone()).collect();
        let accuracies = self
            .accuracies
            .as_ref()
            .map(|acc| order.iter().map(|&i| acc[i]).collect());
        let mut agreements = vec![0.0; pair_count(n)];
        for (i, j) in pairs(n) {
            agreements[pair_index(i, j, n)] = self.agreement_between(order[i], order[j]);
        }
        MetricTable {
            split: self.split,
            sample_count: self.sample_count,
            model_ids,
            accuracies,
            agreements,
            synthetic: self.synthetic,
        }
    }
}

/// Computes per-model accuracies (when labels are given) and all
/// `n(n-1)/2` pairwise agreements on one split. Pairs are evaluated in
/// parallel; output is deterministic.
pub fn metric_table(
    set: &ModelSet,
    labels: Option<&[u32]>,
    split: Split,
) -> Result<MetricTable, MetricError> {
    let n = set.len();
    let sample_count = match split {
        Split::IdVal => set.m_val(),
        Split::Ood => set.m_ood(),
    } as u64;
    let accuracies = labels
        .map(|labels| {
            set.models()
                .iter()
                .map(|m| accuracy(m.predictions(split), labels))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let pair_list: Vec<(usize, usize)> = pairs(n).collect();
    let agreements: Vec<f64> = pair_list
        .par_iter()
        .map(|&(i, j)| {
            agreement(
                set.model(i).predictions(split),
                set.model(j).predictions(split),
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    MetricTable::from_parts(
        split,
        sample_count,
        set.ids(),
        accuracies,
        agreements,
        false,
    )
}

/// Per-pair probit-scale gap between mean accuracy and agreement, on each
/// split: `(mean probit accuracy of the pair) - (probit agreement)`.
#[derive(Debug, Clone, Serialize)]
pub struct PairGap {
    pub a: String,
    pub b: String,
    pub id_gap: f64,
    pub ood_gap: f64,
}

/// Accuracy-agreement gap diagnostic over all unordered pairs. Requires
/// accuracies on both splits, so it is a labeled (benchmarking) diagnostic.
pub fn gap_table(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<Vec<PairGap>, MetricError> {
    if id_metrics.model_ids != ood_metrics.model_ids {
        return Err(MetricError::ModelSetMismatch);
    }
    let id_acc = id_metrics
        .accuracies()
        .ok_or(MetricError::MissingAccuracies {
            split: Split::IdVal,
        })?;
    let ood_acc = ood_metrics
        .accuracies()
        .ok_or(MetricError::MissingAccuracies { split: Split::Ood })?;
    let m_id = id_metrics.sample_count();
    let m_ood = ood_metrics.sample_count();
    let pa_id: Vec<f64> = id_acc
        .iter()
        .map(|&p| probit(p, m_id))
        .collect::<Result<_, _>>()?;
    let pa_ood: Vec<f64> = ood_acc
        .iter()
        .map(|&p| probit(p, m_ood))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(pair_count(id_metrics.n_models()));
    for (i, j) in pairs(id_metrics.n_models()) {
        let id_gap =
            0.5 * (pa_id[i] + pa_id[j]) - probit(id_metrics.agreement_between(i, j), m_id)?;
        let ood_gap =
            0.5 * (pa_ood[i] + pa_ood[j]) - probit(ood_metrics.agreement_between(i, j), m_ood)?;
        out.push(PairGap {
            a: id_metrics.model_ids[i].clone(),
            b: id_metrics.model_ids[j].clone(),
            id_gap,
            ood_gap,
        });
    }
    Ok(out)
}

// --- JSON schema -----------------------------------------------------------
//
// {split, m, accuracies: {id: value}, agreements: [{a, b, value}], synthetic?}

#[derive(Serialize, Deserialize)]
struct PairDto {
    a: String,
    b: String,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct MetricTableDto {
    split: Split,
    m: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    accuracies: Option<BTreeMap<String, f64>>,
    agreements: Vec<PairDto>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    synthetic: bool,
}

impl From<MetricTable> for MetricTableDto {
    fn from(t: MetricTable) -> Self {
        let accuracies = t.accuracies.as_ref().map(|acc| {
            t.model_ids
                .iter()
                .cloned()
                .zip(acc.iter().copied())
                .collect()
        });
        let agreements = pairs(t.n_models())
            .zip(t.agreements.iter())
            .map(|((i, j), &value)| PairDto {
                a: t.model_ids[i].clone(),
                b: t.model_ids[j].clone(),
                value,
            })
            .collect();
        MetricTableDto {
            split: t.split,
            m: t.sample_count,
            accuracies,
            agreements,
            synthetic: t.synthetic,
        }
    }
}

impl TryFrom<MetricTableDto> for MetricTable {
    type Error = MetricError;

    fn try_from(dto: MetricTableDto) -> Result<Self, MetricError> {
        let mut ids = BTreeSetLike::default();
        for p in &dto.agreements {
            ids.insert(&p.a);
            ids.insert(&p.b);
        }
        if let Some(acc) = &dto.accuracies {
            for id in acc.keys() {
                ids.insert(id);
            }
        }
        let model_ids: Vec<String> = ids.into_sorted();
        let n = model_ids.len();
        let index: BTreeMap<&str, usize> = model_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut agreements = vec![f64::NAN; pair_count(n)];
        for p in &dto.agreements {
            let (Some(&i), Some(&j)) = (index.get(p.a.as_str()), index.get(p.b.as_str())) else {
                unreachable!("ids were collected from the same list");
            };
            if i == j {
                return Err(MetricError::BadTable {
                    reason: format!("self-pair entry for '{}'", p.a),
                });
            }
            let (i, j) = if i < j { (i, j) } else { (j, i) };
            let slot = &mut agreements[pair_index(i, j, n)];
            if !slot.is_nan() {
                return Err(MetricError::BadTable {
                    reason: format!("duplicate pair entry ({}, {})", p.a, p.b),
                });
            }
            *slot = p.value;
        }
        if agreements.iter().any(|v| v.is_nan()) {
            return Err(MetricError::BadTable {
                reason: "missing pair entries".into(),
            });
        }
        let accuracies = match dto.accuracies {
            Some(map) => {
                if map.len() != n {
                    return Err(MetricError::BadTable {
                        reason: format!("{} accuracies for {} models", map.len(), n),
                    });
                }
                Some(model_ids.iter().map(|id| map[id]).collect())
            }
            None => None,
        };
        MetricTable::from_parts(
            dto.split,
            dto.m,
            model_ids,
            accuracies,
            agreements,
            dto.synthetic,
        )
    }
}

/// Tiny ordered string set used during deserialization.
#[derive(Default)]
struct BTreeSetLike(std::collections::BTreeSet<String>);

impl BTreeSetLike {
    fn insert(&mut self, s: &str) {
        if !self.0.contains(s) {
            self.0.insert(s.to_string());
        }
    }
    fn into_sorted(self) -> Vec<String> {
        self.0.into_iter().collect()
    }
}
