//! Confidence-based baselines: ATC, AC, DOC-Feat, and the naive agreement
//! predictor. The three softmax baselines come in an uncalibrated (T = 1)
//! and a temperature-scaled variant; which one gets reported is the
//! benchmark harness's call, since picking needs OOD labels.

use rayon::prelude::*;

use crate::data::{LogitBlock, ModelSet, Split};
use crate::metrics::{self, MetricTable};

use super::{
    AtcDiag, Diagnostics, DocFeatDiag, EstimateError, EstimateReport, Method, ModelEstimate,
    PairEstimate,
};

/// Softmax probabilities of one logit row at temperature `t`, with max
/// subtraction.
fn softmax_row(row: &[f64], t: f64, out: &mut Vec<f64>) {
    out.clear();
    let mut max = f64::NEG_INFINITY;
    for &z in row {
        let z = z / t;
        if z > max {
            max = z;
        }
    }
    let mut sum = 0.0;
    for &z in row {
        let e = (z / t - max).exp();
        out.push(e);
        sum += e;
    }
    for p in out.iter_mut() {
        *p /= sum;
    }
}

/// Negative entropy `sum_j p_j log p_j`; `0 log 0` counts as 0.
fn negative_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum()
}

fn confidence_scores(block: &LogitBlock, t: f64) -> Vec<f64> {
    let mut buf = Vec::with_capacity(block.classes());
    block
        .iter_rows()
        .map(|row| {
            softmax_row(row, t, &mut buf);
            negative_entropy(&buf)
        })
        .collect()
}

fn max_confidences(block: &LogitBlock, t: f64) -> Vec<f64> {
    let mut buf = Vec::with_capacity(block.classes());
    block
        .iter_rows()
        .map(|row| {
            softmax_row(row, t, &mut buf);
            buf.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// ATC estimate for one model, with the fitted score threshold.
#[derive(Debug, Clone, Copy)]
pub struct AtcEstimate {
    pub estimate: f64,
    pub threshold: f64,
}

/// Average Threshold Confidence. The score is negative entropy of the
/// softmax at temperature `t`. The threshold is the k-th smallest ID score
/// with `k = round((1 - acc_ID) * m_val)`; both comparisons are strict, so
/// the estimate is the fraction of OOD scores strictly above the threshold.
/// With k = 0 the threshold sits below every score and the estimate is 1.
pub fn atc(
    id_logits: &LogitBlock,
    ood_logits: &LogitBlock,
    id_accuracy: f64,
    temperature: f64,
) -> AtcEstimate {
    let mut id_scores = confidence_scores(id_logits, temperature);
    let m_val = id_scores.len();
    let k = ((1.0 - id_accuracy) * m_val as f64).round() as usize;
    let k = k.min(m_val);
    if k == 0 {
        return AtcEstimate {
            estimate: 1.0,
            threshold: f64::NEG_INFINITY,
        };
    }
    id_scores.sort_by(f64::total_cmp);
    let threshold = id_scores[k - 1];
    let ood_scores = confidence_scores(ood_logits, temperature);
    let above = ood_scores.iter().filter(|&&s| s > threshold).count();
    AtcEstimate {
        estimate: above as f64 / ood_scores.len() as f64,
        threshold,
    }
}

/// Average Confidence: mean OOD max-softmax probability.
pub fn average_confidence(ood_logits: &LogitBlock, temperature: f64) -> f64 {
    let conf = max_confidences(ood_logits, temperature);
    conf.iter().sum::<f64>() / conf.len() as f64
}

/// DOC-Feat estimate for one model.
#[derive(Debug, Clone, Copy)]
pub struct DocFeatEstimate {
    /// Clipped into [0, 1] for reporting.
    pub estimate: f64,
    /// Raw value of the formula, which can leave [0, 1].
    pub raw: f64,
    pub clipped: bool,
}

/// DOC-Feat: ID accuracy adjusted by the drop in mean max-confidence from
/// ID to OOD. The confidence difference is formed first so that identical
/// blocks cancel exactly.
pub fn doc_feat(
    id_logits: &LogitBlock,
    ood_logits: &LogitBlock,
    id_accuracy: f64,
    temperature: f64,
) -> DocFeatEstimate {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let drop = mean(max_confidences(id_logits, temperature))
        - mean(max_confidences(ood_logits, temperature));
    let raw = id_accuracy - drop;
    let estimate = raw.clamp(0.0, 1.0);
    DocFeatEstimate {
        estimate,
        raw,
        clipped: estimate != raw,
    }
}

fn require_logits(set: &ModelSet, split: Split) -> Result<Vec<&LogitBlock>, EstimateError> {
    set.models()
        .iter()
        .map(|m| {
            m.logits(split).ok_or_else(|| EstimateError::MissingLogits {
                model_id: m.id.clone(),
                split,
            })
        })
        .collect()
}

fn id_accuracies(set: &ModelSet, id_labels: &[u32]) -> Result<Vec<f64>, EstimateError> {
    set.models()
        .iter()
        .map(|m| Ok(metrics::accuracy(&m.id_val_predictions, id_labels)?))
        .collect()
}

fn temp_of(temperatures: Option<&[f64]>, idx: usize) -> f64 {
    temperatures.map_or(1.0, |t| t[idx])
}

/// ATC over a whole model set. `temperatures` holds per-model fitted
/// temperatures for the calibrated variant; `None` evaluates at T = 1.
pub fn atc_report(
    set: &ModelSet,
    id_labels: &[u32],
    temperatures: Option<&[f64]>,
) -> Result<EstimateReport, EstimateError> {
    let id_logits = require_logits(set, Split::IdVal)?;
    let ood_logits = require_logits(set, Split::Ood)?;
    let accs = id_accuracies(set, id_labels)?;
    let results: Vec<AtcEstimate> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            atc(
                id_logits[i],
                ood_logits[i],
                accs[i],
                temp_of(temperatures, i),
            )
        })
        .collect();
    let estimates = set
        .models()
        .iter()
        .zip(&results)
        .map(|(m, r)| ModelEstimate {
            id: m.id.clone(),
            estimate: r.estimate,
        })
        .collect();
    let per_model = set
        .models()
        .iter()
        .enumerate()
        .map(|(i, m)| AtcDiag {
            id: m.id.clone(),
            threshold: results[i].threshold,
            temperature: temperatures.map(|t| t[i]),
        })
        .collect();
    Ok(EstimateReport {
        method: Method::Atc,
        estimates,
        diagnostics: Diagnostics::Atc {
            calibrated: temperatures.is_some(),
            per_model,
        },
    })
}

/// AC over a whole model set.
pub fn ac_report(
    set: &ModelSet,
    temperatures: Option<&[f64]>,
) -> Result<EstimateReport, EstimateError> {
    let ood_logits = require_logits(set, Split::Ood)?;
    let values: Vec<f64> = (0..set.len())
        .into_par_iter()
        .map(|i| average_confidence(ood_logits[i], temp_of(temperatures, i)))
        .collect();
    let estimates = set
        .models()
        .iter()
        .zip(&values)
        .map(|(m, &estimate)| ModelEstimate {
            id: m.id.clone(),
            estimate,
        })
        .collect();
    Ok(EstimateReport {
        method: Method::Ac,
        estimates,
        diagnostics: Diagnostics::Ac {
            calibrated: temperatures.is_some(),
            temperatures: temperatures.map(|t| t.to_vec()),
        },
    })
}

/// DOC-Feat over a whole model set.
pub fn doc_feat_report(
    set: &ModelSet,
    id_labels: &[u32],
    temperatures: Option<&[f64]>,
) -> Result<EstimateReport, EstimateError> {
    let id_logits = require_logits(set, Split::IdVal)?;
    let ood_logits = require_logits(set, Split::Ood)?;
    let accs = id_accuracies(set, id_labels)?;
    let results: Vec<DocFeatEstimate> = (0..set.len())
        .into_par_iter()
        .map(|i| {
            doc_feat(
                id_logits[i],
                ood_logits[i],
                accs[i],
                temp_of(temperatures, i),
            )
        })
        .collect();
    let estimates = set
        .models()
        .iter()
        .zip(&results)
        .map(|(m, r)| ModelEstimate {
            id: m.id.clone(),
            estimate: r.estimate,
        })
        .collect();
    let per_model = set
        .models()
        .iter()
        .zip(&results)
        .map(|(m, r)| DocFeatDiag {
            id: m.id.clone(),
            raw: r.raw,
            clipped: r.clipped,
        })
        .collect();
    Ok(EstimateReport {
        method: Method::DocFeat,
        estimates,
        diagnostics: Diagnostics::DocFeat {
            calibrated: temperatures.is_some(),
            per_model,
        },
    })
}

/// Naive agreement baseline: each pair's OOD agreement predicts the pair's
/// average OOD accuracy. The per-model estimate aggregates the mean over
/// all pairs containing the model. `pairing` defaults to all unordered
/// pairs; with an explicit pairing every model must appear at least once.
pub fn naive_agreement(
    ood_metrics: &MetricTable,
    pairing: Option<&[(String, String)]>,
) -> Result<EstimateReport, EstimateError> {
    let ids = ood_metrics.model_ids();
    let n = ids.len();
    let index_of = |id: &str| -> Result<usize, EstimateError> {
        ids.iter()
            .position(|x| x == id)
            .ok_or_else(|| EstimateError::UnknownModel { id: id.to_string() })
    };
    let pair_list: Vec<(usize, usize)> = match pairing {
        Some(list) => list
            .iter()
            .map(|(a, b)| Ok((index_of(a)?, index_of(b)?)))
            .collect::<Result<_, EstimateError>>()?,
        None => metrics::pairs(n).collect(),
    };
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    let mut pairs_out = Vec::with_capacity(pair_list.len());
    for &(i, j) in &pair_list {
        let value = ood_metrics.agreement_between(i, j);
        sums[i] += value;
        counts[i] += 1;
        sums[j] += value;
        counts[j] += 1;
        pairs_out.push(PairEstimate {
            a: ids[i].clone(),
            b: ids[j].clone(),
            value,
        });
    }
    let estimates = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            if counts[i] == 0 {
                return Err(EstimateError::UnpairedModel { id: id.clone() });
            }
            Ok(ModelEstimate {
                id: id.clone(),
                estimate: sums[i] / counts[i] as f64,
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(EstimateReport {
        method: Method::Agreement,
        estimates,
        diagnostics: Diagnostics::Agreement { pairs: pairs_out },
    })
}
