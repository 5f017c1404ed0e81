//! Temperature scaling: a single positive scalar dividing the logits,
//! chosen to minimize ID-validation negative log-likelihood.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{LogitBlock, ModelSet, Split};

use super::EstimateError;

/// Search bounds for the temperature, in plain units.
const T_MIN: f64 = 1e-2;
const T_MAX: f64 = 1e2;
/// Width tolerance of the golden-section bracket, in log-temperature.
const LOG_TOL: f64 = 1e-6;
const COARSE_POINTS: usize = 129;

/// Fitted temperature plus the NLL before (T = 1) and after.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationResult {
    pub temperature: f64,
    pub id_nll_before: f64,
    pub id_nll_after: f64,
}

/// Mean negative log-likelihood of `softmax(logits / t)` against `labels`.
pub(crate) fn mean_nll(logits: &LogitBlock, labels: &[u32], t: f64) -> f64 {
    let mut total = 0.0;
    for (row, &label) in logits.iter_rows().zip(labels) {
        // logsumexp with max subtraction
        let mut max = f64::NEG_INFINITY;
        for &z in row {
            let z = z / t;
            if z > max {
                max = z;
            }
        }
        let sum: f64 = row.iter().map(|&z| (z / t - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[label as usize] / t;
    }
    total / logits.rows() as f64
}

/// Minimizes ID NLL over `T in [1e-2, 1e2]`, scanning a coarse log-grid and
/// refining the best bracket by golden section. The NLL of softmax
/// temperature is unimodal in 1/T, so the local refinement is global.
/// Never returns a temperature worse than T = 1.
pub fn temperature_scale(
    id_logits: &LogitBlock,
    id_labels: &[u32],
) -> Result<CalibrationResult, EstimateError> {
    if id_logits.rows() != id_labels.len() {
        return Err(crate::metrics::MetricError::LengthMismatch {
            left: id_logits.rows(),
            right: id_labels.len(),
        }
        .into());
    }
    let (lo, hi) = (T_MIN.ln(), T_MAX.ln());
    let nll_at = |u: f64| mean_nll(id_logits, id_labels, u.exp());

    let step = (hi - lo) / (COARSE_POINTS - 1) as f64;
    let mut best_idx = 0usize;
    let mut best_val = f64::INFINITY;
    let mut any_finite = false;
    for i in 0..COARSE_POINTS {
        let v = nll_at(lo + step * i as f64);
        if v.is_finite() {
            any_finite = true;
            if v < best_val {
                best_val = v;
                best_idx = i;
            }
        }
    }
    if !any_finite {
        return Err(EstimateError::NonFiniteNll);
    }

    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = lo + step * (best_idx + 1).min(COARSE_POINTS - 1) as f64;
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - (b - a) * INV_PHI;
    let mut d = a + (b - a) * INV_PHI;
    let mut fc = nll_at(c);
    let mut fd = nll_at(d);
    while (b - a).abs() > LOG_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * INV_PHI;
            fc = nll_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * INV_PHI;
            fd = nll_at(d);
        }
    }
    let refined = 0.5 * (a + b);
    let id_nll_before = mean_nll(id_logits, id_labels, 1.0);

    // candidate set keeps the invariant NLL(T*) <= NLL(1) exact
    let mut temperature = 1.0;
    let mut id_nll_after = id_nll_before;
    let coarse_best = (lo + step * best_idx as f64).exp();
    for t in [refined.exp(), coarse_best] {
        let v = mean_nll(id_logits, id_labels, t);
        if v.is_finite() && v < id_nll_after {
            id_nll_after = v;
            temperature = t;
        }
    }
    Ok(CalibrationResult {
        temperature,
        id_nll_before,
        id_nll_after,
    })
}

/// Fits one temperature per model from its ID logits. Models run in
/// parallel; order follows the set.
pub fn calibrate_models(
    set: &ModelSet,
    id_labels: &[u32],
) -> Result<Vec<CalibrationResult>, EstimateError> {
    set.models()
        .par_iter()
        .map(|m| {
            let logits = m
                .id_val_logits
                .as_ref()
                .ok_or_else(|| EstimateError::MissingLogits {
                    model_id: m.id.clone(),
                    split: Split::IdVal,
                })?;
            temperature_scale(logits, id_labels)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(classes: usize, rows: Vec<Vec<f64>>) -> LogitBlock {
        LogitBlock::new(classes, rows.concat()).unwrap()
    }

    #[test]
    fn matched_binary_frequencies_give_unit_temperature() {
        // logits (0, ln 3) everywhere; labels hit class 1 with frequency
        // 3/4 = sigmoid(ln 3), so T = 1 already minimizes the NLL
        let c = 3.0f64.ln();
        let m = 1000;
        let rows = vec![vec![0.0, c]; m];
        let labels: Vec<u32> = (0..m).map(|i| if i % 4 == 0 { 0 } else { 1 }).collect();
        let block = block(2, rows);
        let cal = temperature_scale(&block, &labels).unwrap();
        assert!((cal.temperature - 1.0).abs() < 1e-2, "{}", cal.temperature);
        // grid-search oracle: no grid point beats the returned optimum
        let mut best = f64::INFINITY;
        for i in 0..1000 {
            let t = (T_MIN.ln() + (T_MAX / T_MIN).ln() * i as f64 / 999.0).exp();
            best = best.min(mean_nll(&block, &labels, t));
        }
        assert!(cal.id_nll_after <= best + 1e-8);
    }

    #[test]
    fn never_worse_than_unit_temperature() {
        let rows = vec![
            vec![2.0, 0.1, -1.0],
            vec![0.3, 0.2, 0.1],
            vec![-1.0, 4.0, 0.0],
            vec![0.0, 0.0, 5.0],
        ];
        let labels = vec![0, 2, 1, 2];
        let cal = temperature_scale(&block(3, rows), &labels).unwrap();
        assert!(cal.id_nll_after <= cal.id_nll_before + 1e-12);
        assert!(cal.temperature > 0.0);
    }

    #[test]
    fn scaling_logits_scales_the_temperature() {
        // one-hot logits of height 4, labels right 70% of the time:
        // the optimum sits at T = 4 / ln 7, well inside the bounds
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200u32 {
            let c = i % 4;
            let mut row = vec![0.0; 4];
            row[c as usize] = 4.0;
            rows.push(row);
            labels.push(if i % 10 < 7 { c } else { (c + 1) % 4 });
        }
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v * 2.0).collect())
            .collect();
        let t1 = temperature_scale(&block(4, rows), &labels)
            .unwrap()
            .temperature;
        let t2 = temperature_scale(&block(4, scaled), &labels)
            .unwrap()
            .temperature;
        assert!((t1 - 4.0 / 7.0f64.ln()).abs() < 1e-2, "t1={t1}");
        assert!(
            (t2 - 2.0 * t1).abs() <= 1e-4 * (2.0 * t1),
            "t1={t1} t2={t2}"
        );
    }
}
