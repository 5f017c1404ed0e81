//! Desk-scale data generation.
//!
//! Two generators live here:
//!
//! - [`exact_line_tables`] plants metric tables whose probit-scaled
//!   accuracies and agreements satisfy one line exactly. These tables
//!   bypass the counting layer (values are not multiples of 1/m) and are
//!   flagged synthetic; they are the correctness oracle for the ALine
//!   estimators.
//! - [`generate_zoo`] samples a whole model set from a latent
//!   skill/difficulty model with a shared-noise coupling knob. With the
//!   default spec it empirically exhibits the agreement-on-the-line
//!   structure; the property is seed-pinned and re-verified by the test
//!   suites on any generator change.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{DataError, LabeledSplit, LogitBlock, ModelRecord, ModelSet, Split};
use crate::metrics::{self, MetricError, MetricTable};
use crate::normal;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid zoo spec: {reason}")]
    InvalidSpec { reason: String },
    #[error("{what} {value} falls outside the clamp range ({lo}, {hi}) for m = {m}")]
    OutsideClampRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
        m: u64,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Planted line plus the ID-side proportions it maps through.
#[derive(Debug, Clone, Serialize)]
pub struct ExactLineSpec {
    pub slope: f64,
    pub bias: f64,
    pub id_accuracies: Vec<f64>,
    /// Upper triangle in canonical pair order.
    pub id_agreements: Vec<f64>,
    pub sample_count: u64,
}

impl ExactLineSpec {
    /// A ready-made spec with accuracies and agreements spread over
    /// comfortable ranges, for `n` models.
    pub fn spread(n: usize, slope: f64, bias: f64, sample_count: u64) -> Self {
        let id_accuracies = (0..n)
            .map(|i| 0.62 + 0.30 * i as f64 / (n.max(2) - 1) as f64)
            .collect();
        let denom = (2 * n).saturating_sub(3).max(1) as f64;
        let id_agreements = metrics::pairs(n)
            .map(|(i, j)| 0.55 + 0.38 * (i + j) as f64 / denom)
            .collect();
        ExactLineSpec {
            slope,
            bias,
            id_accuracies,
            id_agreements,
            sample_count,
        }
    }
}

/// Maps every ID proportion through `Phi(a * Phi^-1(p) + b)` to produce an
/// (ID, OOD) table pair lying exactly on the planted line. Both input and
/// derived proportions must sit strictly inside the clamp range for the
/// spec's sample count.
pub fn exact_line_tables(spec: &ExactLineSpec) -> Result<(MetricTable, MetricTable), SynthError> {
    let n = spec.id_accuracies.len();
    if spec.id_agreements.len() != metrics::pair_count(n) {
        return Err(SynthError::InvalidSpec {
            reason: format!(
                "{} agreements for {} models (need {})",
                spec.id_agreements.len(),
                n,
                metrics::pair_count(n)
            ),
        });
    }
    let m = spec.sample_count.max(1);
    let lo = 1.0 / (2.0 * m as f64);
    let hi = 1.0 - lo;
    let check = |value: f64, what: &'static str| -> Result<(), SynthError> {
        if value <= lo || value >= hi {
            return Err(SynthError::OutsideClampRange {
                what,
                value,
                lo,
                hi,
                m,
            });
        }
        Ok(())
    };
    let map = |p: f64, what: &'static str| -> Result<f64, SynthError> {
        check(p, what)?;
        let derived = normal::norm_cdf(spec.slope * metrics::probit(p, m)? + spec.bias);
        check(derived, "derived OOD proportion")?;
        Ok(derived)
    };
    let ood_accuracies: Vec<f64> = spec
        .id_accuracies
        .iter()
        .map(|&p| map(p, "ID accuracy"))
        .collect::<Result<_, _>>()?;
    let ood_agreements: Vec<f64> = spec
        .id_agreements
        .iter()
        .map(|&p| map(p, "ID agreement"))
        .collect::<Result<_, _>>()?;
    let ids: Vec<String> = (0..n).map(|i| format!("m{i:03}")).collect();
    let id_table = MetricTable::from_parts(
        Split::IdVal,
        m,
        ids.clone(),
        Some(spec.id_accuracies.clone()),
        spec.id_agreements.clone(),
        true,
    )?;
    let ood_table = MetricTable::from_parts(
        Split::Ood,
        m,
        ids,
        Some(ood_accuracies),
        ood_agreements,
        true,
    )?;
    Ok((id_table, ood_table))
}

/// Zoo generator parameters. Examples carry a latent difficulty; model `h`
/// with skill `s_h` answers correctly when `s_h - d + eps > 0` where
/// `eps = sqrt(coupling) * eta + sqrt(1 - coupling) * xi` mixes a shared
/// per-example noise `eta` into each model's private noise `xi`. Wrong
/// answers are uniform over the other K - 1 classes.
#[derive(Debug, Clone, Serialize)]
pub struct ZooSpec {
    pub n_models: usize,
    pub m_id: usize,
    pub m_ood: usize,
    pub class_count: u32,
    pub skill_lo: f64,
    pub skill_hi: f64,
    /// Mean shift of the OOD difficulty distribution.
    pub difficulty_shift: f64,
    /// Scale of the OOD difficulty distribution.
    pub difficulty_scale: f64,
    /// Shared-noise weight, in [0, 1].
    pub coupling: f64,
    pub seed: u64,
    /// Per-model OOD label-noise rate range. Each model draws a rate
    /// uniformly from this range and replaces that fraction of its OOD
    /// predictions with uniform classes; this is what breaks the line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ood_label_noise: Option<(f64, f64)>,
}

impl Default for ZooSpec {
    fn default() -> Self {
        ZooSpec {
            n_models: 50,
            m_id: 20_000,
            m_ood: 20_000,
            class_count: 10,
            skill_lo: 0.5,
            skill_hi: 3.0,
            difficulty_shift: 0.25,
            difficulty_scale: 1.0,
            coupling: 0.95,
            seed: 7,
            ood_label_noise: None,
        }
    }
}

impl ZooSpec {
    /// Preset tuned to break agreement-on-the-line: no shared noise plus
    /// severe independent per-model label noise on the OOD split.
    pub fn break_line(seed: u64) -> Self {
        ZooSpec {
            coupling: 0.0,
            ood_label_noise: Some((0.2, 0.8)),
            seed,
            ..ZooSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |reason: &str| {
            Err(SynthError::InvalidSpec {
                reason: reason.to_string(),
            })
        };
        if self.n_models < 3 {
            return fail("need at least 3 models");
        }
        if self.m_id == 0 || self.m_ood == 0 {
            return fail("sample counts must be positive");
        }
        if self.class_count < 2 {
            return fail("need at least 2 classes");
        }
        if !self.difficulty_scale.is_finite() || self.difficulty_scale <= 0.0 {
            return fail("difficulty_scale must be positive");
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return fail("coupling must lie in [0, 1]");
        }
        if !self.skill_lo.is_finite() || !self.skill_hi.is_finite() || self.skill_lo > self.skill_hi
        {
            return fail("skill range must be finite with lo <= hi");
        }
        if let Some((lo, hi)) = self.ood_label_noise {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return fail("ood_label_noise range must satisfy 0 <= lo <= hi <= 1");
            }
        }
        Ok(())
    }
}

/// A generated dataset: the model set plus labels on both splits.
#[derive(Debug, Clone)]
pub struct ZooData {
    pub set: ModelSet,
    pub id_labels: LabeledSplit,
    pub ood_labels: LabeledSplit,
}

// Stream layout for the seeded generator. Shared per-example latents live
// on fixed streams; each model's per-example draws live on streams derived
// from its index so generation parallelizes without changing output.
const STREAM_SHARED_ID: u64 = 0;
const STREAM_SHARED_OOD: u64 = 1;
const STREAM_NOISE_RATES: u64 = 2;
const STREAM_MODEL_BASE: u64 = 16;

/// Height multiplier for synthetic logits relative to the latent margin.
const LOGIT_GAIN: f64 = 3.0;

struct SharedLatents {
    difficulty: Vec<f64>,
    common_noise: Vec<f64>,
    labels: Vec<u32>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shared_latents(
    seed: u64,
    stream: u64,
    m: usize,
    shift: f64,
    scale: f64,
    k: u32,
) -> SharedLatents {
    let mut rng = stream_rng(seed, stream);
    let mut difficulty = Vec::with_capacity(m);
    let mut common_noise = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let d: f64 = StandardNormal.sample(&mut rng);
        difficulty.push(scale * d + shift);
        common_noise.push(StandardNormal.sample(&mut rng));
        labels.push(rng.random_range(0..k));
    }
    SharedLatents {
        difficulty,
        common_noise,
        labels,
    }
}

/// Per-model predictions on one split, plus the latent margins that drove
/// them (used for synthetic logits).
fn predict_split(
    rng: &mut ChaCha8Rng,
    shared: &SharedLatents,
    skill: f64,
    coupling: f64,
    k: u32,
) -> (Vec<u32>, Vec<f64>) {
    let w_shared = coupling.sqrt();
    let w_private = (1.0 - coupling).sqrt();
    let m = shared.labels.len();
    let mut preds = Vec::with_capacity(m);
    let mut margins = Vec::with_capacity(m);
    for x in 0..m {
        let xi: f64 = StandardNormal.sample(rng);
        let eps = w_shared * shared.common_noise[x] + w_private * xi;
        let margin = skill - shared.difficulty[x] + eps;
        let y = shared.labels[x];
        let pred = if margin > 0.0 {
            y
        } else {
            let r = rng.random_range(0..k - 1);
            if r >= y {
                r + 1
            } else {
                r
            }
        };
        preds.push(pred);
        margins.push(margin);
    }
    (preds, margins)
}

fn logits_from(preds: &[u32], margins: &[f64], k: u32) -> LogitBlock {
    let k = k as usize;
    let mut data = vec![0.0; preds.len() * k];
    for (row, (&pred, &margin)) in preds.iter().zip(margins).enumerate() {
        data[row * k + pred as usize] = (LOGIT_GAIN * margin.abs()).max(1e-6);
    }
    LogitBlock::new(k, data).expect("shape is consistent by construction")
}

/// Samples a full model zoo. Deterministic given the spec's seed, and
/// schedule-independent: each model draws from its own derived stream.
pub fn generate_zoo(spec: &ZooSpec, emit_logits: bool) -> Result<ZooData, SynthError> {
    spec.validate()?;
    let k = spec.class_count;
    let shared_id = shared_latents(spec.seed, STREAM_SHARED_ID, spec.m_id, 0.0, 1.0, k);
    let shared_ood = shared_latents(
        spec.seed,
        STREAM_SHARED_OOD,
        spec.m_ood,
        spec.difficulty_shift,
        spec.difficulty_scale,
        k,
    );
    let noise_rates: Option<Vec<f64>> = spec.ood_label_noise.map(|(lo, hi)| {
        let mut rng = stream_rng(spec.seed, STREAM_NOISE_RATES);
        (0..spec.n_models)
            .map(|_| rng.random_range(lo..=hi))
            .collect()
    });
    let n = spec.n_models;
    let skills: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                spec.skill_lo
            } else {
                spec.skill_lo + (spec.skill_hi - spec.skill_lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect();

    let models: Vec<ModelRecord> = (0..n)
        .into_par_iter()
        .map(|i| {
            let base = STREAM_MODEL_BASE + 3 * i as u64;
            let mut rng = stream_rng(spec.seed, base);
            let (id_preds, id_margins) =
                predict_split(&mut rng, &shared_id, skills[i], spec.coupling, k);
            let mut rng = stream_rng(spec.seed, base + 1);
            let (mut ood_preds, ood_margins) =
                predict_split(&mut rng, &shared_ood, skills[i], spec.coupling, k);
            if let Some(rates) = &noise_rates {
                let mut rng = stream_rng(spec.seed, base + 2);
                for pred in ood_preds.iter_mut() {
                    if rng.random::<f64>() < rates[i] {
                        *pred = rng.random_range(0..k);
                    }
                }
            }
            ModelRecord {
                id: format!("m{i:03}"),
                id_val_logits: emit_logits.then(|| logits_from(&id_preds, &id_margins, k)),
                ood_logits: emit_logits.then(|| logits_from(&ood_preds, &ood_margins, k)),
                id_val_predictions: id_preds,
                ood_predictions: ood_preds,
            }
        })
        .collect();

    Ok(ZooData {
        set: ModelSet::new(models, k)?,
        id_labels: LabeledSplit {
            labels: shared_id.labels,
            split: Split::IdVal,
        },
        ood_labels: LabeledSplit {
            labels: shared_ood.labels,
            split: Split::Ood,
        },
    })
}
