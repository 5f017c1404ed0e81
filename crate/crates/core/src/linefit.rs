//! Ordinary least squares on probit-scaled scatters, fit-quality
//! statistics, and the bootstrap slope-difference hypothesis test.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{LabeledSplit, ModelSet, Split};
use crate::metrics::{self, MetricError, MetricTable};

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate scatter: all x values identical")]
    DegenerateX,
    #[error("input lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("zero rank variance: ranks of one argument are all tied")]
    ZeroRankVariance,
    #[error("need at least {needed} models, got {got}")]
    NotEnoughModels { needed: usize, got: usize },
    #[error("subset size {subset_size} invalid for {n_models} models (need 3 <= size <= n)")]
    BadSubsetSize { subset_size: usize, n_models: usize },
    #[error("{discarded} of {total} resamples were degenerate (limit 10%)")]
    TooManyDiscards { discarded: usize, total: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Slope, bias, and coefficient of determination of a least-squares line.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub bias: f64,
    #[serde(rename = "r2")]
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares line with intercept through `points`. R-squared is
/// `1 - SS_res / SS_tot`, defined as 1 when both sums vanish.
pub fn ols_fit(points: &[(f64, f64)]) -> Result<LineFit, FitError> {
    if points.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: points.len(),
        });
    }
    let (x0, _) = points[0];
    if points.iter().all(|&(x, _)| x == x0) {
        return Err(FitError::DegenerateX);
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(FitError::DegenerateX);
    }
    let slope = sxy / sxx;
    let bias = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - slope * x - bias;
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LineFit {
        slope,
        bias,
        r_squared,
        n_points: points.len(),
    })
}

/// Spearman rank correlation: Pearson correlation of average ranks, ties
/// receiving the mean of their rank range.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> Result<f64, FitError> {
    if xs.len() != ys.len() {
        return Err(FitError::LengthMismatch {
            left: xs.len(),
            right: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(FitError::ZeroRankVariance);
    }
    Ok(sxy / (sxx * syy).sqrt())
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

fn require_same_models(id: &MetricTable, ood: &MetricTable) -> Result<(), FitError> {
    if id.model_ids() != ood.model_ids() {
        return Err(MetricError::ModelSetMismatch.into());
    }
    Ok(())
}

/// Probit-scaled scatter of pairwise agreements: x from the ID table,
/// y from the OOD table, one point per unordered pair.
pub fn agreement_points(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<Vec<(f64, f64)>, FitError> {
    require_same_models(id_metrics, ood_metrics)?;
    let m_id = id_metrics.sample_count();
    let m_ood = ood_metrics.sample_count();
    id_metrics
        .pair_values()
        .zip(ood_metrics.pair_values())
        .map(|(((_, _), v_id), ((_, _), v_ood))| {
            Ok((metrics::probit(v_id, m_id)?, metrics::probit(v_ood, m_ood)?))
        })
        .collect()
}

/// Probit-scaled scatter of model accuracies, one point per model.
/// Requires accuracies on both tables, hence OOD labels.
pub fn accuracy_points(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<Vec<(f64, f64)>, FitError> {
    require_same_models(id_metrics, ood_metrics)?;
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
    id_acc
        .iter()
        .zip(ood_acc)
        .map(|(&a, &b)| Ok((metrics::probit(a, m_id)?, metrics::probit(b, m_ood)?)))
        .collect()
}

/// OLS fit of probit OOD agreement against probit ID agreement over all
/// unordered pairs. Needs at least 3 models (3 pairs).
pub fn agreement_line(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<LineFit, FitError> {
    if id_metrics.n_models() < 3 {
        return Err(FitError::NotEnoughModels {
            needed: 3,
            got: id_metrics.n_models(),
        });
    }
    ols_fit(&agreement_points(id_metrics, ood_metrics)?)
}

/// OLS fit of probit OOD accuracy against probit ID accuracy over models.
/// Benchmarking only: requires OOD labels.
pub fn accuracy_line(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
) -> Result<LineFit, FitError> {
    if id_metrics.n_models() < 2 {
        return Err(FitError::NotEnoughModels {
            needed: 2,
            got: id_metrics.n_models(),
        });
    }
    ols_fit(&accuracy_points(id_metrics, ood_metrics)?)
}

/// Verdict on how strongly the agreement scatter supports a linear fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Diagnosis {
    #[serde(rename = "STRONG")]
    Strong,
    #[serde(rename = "WEAK")]
    Weak,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

/// R-squared cutoffs discretizing correlation strength.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosisThresholds {
    pub strong: f64,
    pub weak: f64,
}

impl Default for DiagnosisThresholds {
    fn default() -> Self {
        Self {
            strong: 0.95,
            weak: 0.75,
        }
    }
}

/// STRONG when R-squared is at least the strong cutoff, WEAK when at most
/// the weak cutoff, INCONCLUSIVE between.
pub fn diagnose(fit: &LineFit) -> Diagnosis {
    diagnose_with(fit, DiagnosisThresholds::default())
}

pub fn diagnose_with(fit: &LineFit, thresholds: DiagnosisThresholds) -> Diagnosis {
    if fit.r_squared >= thresholds.strong {
        Diagnosis::Strong
    } else if fit.r_squared <= thresholds.weak {
        Diagnosis::Weak
    } else {
        Diagnosis::Inconclusive
    }
}

/// Configuration of the bootstrap slope-difference test.
#[derive(Debug, Clone, Copy)]
pub struct SlopeDiffConfig {
    pub subset_size: usize,
    pub n_resamples: usize,
    pub seed: u64,
}

impl Default for SlopeDiffConfig {
    fn default() -> Self {
        Self {
            subset_size: 10,
            n_resamples: 1000,
            seed: 0,
        }
    }
}

/// Empirical 95% confidence interval of the difference between the
/// accuracy-line slope and the agreement-line slope over random model
/// subsets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeDiffCi {
    pub lower: f64,
    pub upper: f64,
    pub n_resamples: usize,
    pub subset_size: usize,
    pub seed: u64,
    pub discarded: usize,
}

/// Runs the subset bootstrap on a model set with labels on both splits.
pub fn slope_diff_ci(
    set: &ModelSet,
    id_labels: &LabeledSplit,
    ood_labels: &LabeledSplit,
    cfg: SlopeDiffConfig,
) -> Result<SlopeDiffCi, FitError> {
    let id = metrics::metric_table(set, Some(&id_labels.labels), Split::IdVal)?;
    let ood = metrics::metric_table(set, Some(&ood_labels.labels), Split::Ood)?;
    slope_diff_ci_from_tables(&id, &ood, cfg)
}

/// Subset bootstrap over precomputed metric tables with accuracies on both
/// splits.
///
/// Each resample draws `subset_size` models without replacement from the
/// canonical (lexicographic id) order, fits the accuracy and agreement
/// lines on the subset, and records the slope difference. Resamples whose
/// fits are degenerate are discarded with accounting; more than 10%
/// discards fail the test. Each resample derives its own random stream
/// from `(seed, resample_index)`, so the result does not depend on
/// scheduling or thread count.
pub fn slope_diff_ci_from_tables(
    id_metrics: &MetricTable,
    ood_metrics: &MetricTable,
    cfg: SlopeDiffConfig,
) -> Result<SlopeDiffCi, FitError> {
    require_same_models(id_metrics, ood_metrics)?;
    let id_t = id_metrics.canonicalized();
    let ood_t = ood_metrics.canonicalized();
    let n = id_t.n_models();
    if cfg.subset_size < 3 || cfg.subset_size > n {
        return Err(FitError::BadSubsetSize {
            subset_size: cfg.subset_size,
            n_models: n,
        });
    }
    let acc = accuracy_points(&id_t, &ood_t)?;
    let agr = agreement_points(&id_t, &ood_t)?;

    let diffs: Vec<Option<f64>> = (0..cfg.n_resamples)
        .into_par_iter()
        .map(|resample| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(resample as u64);
            let subset = sample_without_replacement(&mut rng, n, cfg.subset_size);
            let acc_pts: Vec<(f64, f64)> = subset.iter().map(|&i| acc[i]).collect();
            let agr_pts: Vec<(f64, f64)> = metrics::pairs(cfg.subset_size)
                .map(|(a, b)| agr[metrics::pair_index(subset[a], subset[b], n)])
                .collect();
            let acc_fit = ols_fit(&acc_pts).ok()?;
            let agr_fit = ols_fit(&agr_pts).ok()?;
            Some(acc_fit.slope - agr_fit.slope)
        })
        .collect();

    let discarded = diffs.iter().filter(|d| d.is_none()).count();
    if discarded * 10 > cfg.n_resamples {
        return Err(FitError::TooManyDiscards {
            discarded,
            total: cfg.n_resamples,
        });
    }
    let mut kept: Vec<f64> = diffs.into_iter().flatten().collect();
    if kept.len() < 2 {
        return Err(FitError::TooFewPoints {
            needed: 2,
            got: kept.len(),
        });
    }
    kept.sort_by(f64::total_cmp);
    Ok(SlopeDiffCi {
        lower: quantile_linear(&kept, 0.025),
        upper: quantile_linear(&kept, 0.975),
        n_resamples: cfg.n_resamples,
        subset_size: cfg.subset_size,
        seed: cfg.seed,
        discarded,
    })
}

/// Draws `k` distinct indices from `0..n`, sorted ascending so the subset
/// is a canonical combination.
fn sample_without_replacement(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut subset = idx[..k].to_vec();
    subset.sort_unstable();
    subset
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile_linear(sorted: &[f64], q: f64) -> f64 {
    let h = q * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let points: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let fit = ols_fit(&points).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.bias - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_x_is_rejected() {
        let points = vec![(1.0, 0.0), (1.0, 1.0), (1.0, 2.0)];
        assert!(matches!(ols_fit(&points), Err(FitError::DegenerateX)));
        assert!(matches!(
            ols_fit(&[(0.0, 0.0)]),
            Err(FitError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn matches_cramer_rule_normal_equations() {
        // independent oracle: solve [n, Sx; Sx, Sxx] [b; a] = [Sy; Sxy]
        let mut state = 1234u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let points: Vec<(f64, f64)> = (0..50)
            .map(|_| {
                let x = next() * 4.0 - 2.0;
                (x, 0.7 * x - 0.3 + (next() - 0.5) * 0.2)
            })
            .collect();
        let n = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let det = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / det;
        let bias = (sy * sxx - sx * sxy) / det;
        let fit = ols_fit(&points).unwrap();
        assert!(
            (fit.slope - slope).abs() <= 1e-10,
            "{} {}",
            fit.slope,
            slope
        );
        assert!((fit.bias - bias).abs() <= 1e-10);
    }

    #[test]
    fn residuals_are_orthogonal_and_centered() {
        let points: Vec<(f64, f64)> = (0..40)
            .map(|i| {
                let x = (i as f64) * 0.1;
                (x, 1.5 * x + 0.2 + ((i * 7919) % 13) as f64 * 0.01)
            })
            .collect();
        let fit = ols_fit(&points).unwrap();
        let scale: f64 = points.iter().map(|p| p.1.abs()).sum::<f64>();
        let sum_r: f64 = points
            .iter()
            .map(|&(x, y)| y - fit.slope * x - fit.bias)
            .sum();
        let dot_rx: f64 = points
            .iter()
            .map(|&(x, y)| (y - fit.slope * x - fit.bias) * x)
            .sum();
        assert!(sum_r.abs() <= 1e-9 * scale.max(1.0));
        assert!(dot_rx.abs() <= 1e-9 * scale.max(1.0));
    }

    #[test]
    fn spearman_monotone_cases() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let up: Vec<f64> = xs.iter().map(|x| x * 3.0 + 1.0).collect();
        let down: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((spearman_rho(&xs, &up).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&xs, &down).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_ties_match_explicit_rank_oracle() {
        let xs = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0, 4.0];
        let ys = [2.0, 1.0, 4.0, 4.0, 2.0, 5.0, 5.0];
        let rho = spearman_rho(&xs, &ys).unwrap();
        let rx = aol_testkit::average_ranks(&xs);
        let ry = aol_testkit::average_ranks(&ys);
        let n = rx.len() as f64;
        let mx = rx.iter().sum::<f64>() / n;
        let my = ry.iter().sum::<f64>() / n;
        let sxy: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
        let expect = sxy / (sxx * syy).sqrt();
        assert!((rho - expect).abs() <= 1e-12);
    }

    #[test]
    fn spearman_rejects_constant_input() {
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(FitError::ZeroRankVariance)
        ));
        assert!(matches!(
            spearman_rho(&[1.0], &[1.0, 2.0]),
            Err(FitError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn diagnosis_thresholds() {
        let fit = |r_squared| LineFit {
            slope: 1.0,
            bias: 0.0,
            r_squared,
            n_points: 10,
        };
        assert_eq!(diagnose(&fit(0.996)), Diagnosis::Strong);
        assert_eq!(diagnose(&fit(0.424)), Diagnosis::Weak);
        assert_eq!(diagnose(&fit(0.85)), Diagnosis::Inconclusive);
        assert_eq!(diagnose(&fit(0.95)), Diagnosis::Strong);
        assert_eq!(diagnose(&fit(0.75)), Diagnosis::Weak);
    }

    #[test]
    fn accuracy_line_rejects_constant_accuracies() {
        let ids: Vec<String> = (0..3).map(|i| format!("m{i}")).collect();
        let make = |split, acc: f64| {
            crate::metrics::MetricTable::from_parts(
                split,
                1000,
                ids.clone(),
                Some(vec![acc; 3]),
                vec![0.5, 0.6, 0.7],
                true,
            )
            .unwrap()
        };
        let id = make(Split::IdVal, 0.8);
        let ood = make(Split::Ood, 0.7);
        assert!(matches!(
            accuracy_line(&id, &ood),
            Err(FitError::DegenerateX)
        ));
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(quantile_linear(&v, 0.0), 0.0);
        assert_eq!(quantile_linear(&v, 1.0), 3.0);
        assert!((quantile_linear(&v, 0.5) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn subset_sampler_is_deterministic_and_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(3);
        let a = sample_without_replacement(&mut rng, 20, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        rng.set_stream(3);
        let b = sample_without_replacement(&mut rng, 20, 10);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let mut sorted = a.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }
}
