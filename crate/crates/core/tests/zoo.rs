//! Seed-pinned properties of the default synthetic zoo. These run on the
//! generator's default spec and must be re-verified whenever the generator
//! changes.

use std::collections::BTreeMap;

use aol_core::data::{self, Split};
use aol_core::estimators::{aline_d, naive_agreement, EstimateReport};
use aol_core::linefit::{self, Diagnosis, SlopeDiffConfig};
use aol_core::metrics::{self, MetricTable};
use aol_core::synth::{generate_zoo, ZooData, ZooSpec};

fn tables(zoo: &ZooData) -> (MetricTable, MetricTable) {
    let id = metrics::metric_table(&zoo.set, Some(&zoo.id_labels.labels), Split::IdVal).unwrap();
    let ood = metrics::metric_table(&zoo.set, Some(&zoo.ood_labels.labels), Split::Ood).unwrap();
    (id, ood)
}

fn mae_percent(rep: &EstimateReport, truth: &[f64]) -> f64 {
    rep.estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e.estimate - t).abs())
        .sum::<f64>()
        / truth.len() as f64
        * 100.0
}

#[test]
fn default_zoo_exhibits_agreement_on_the_line() {
    let zoo = generate_zoo(&ZooSpec::default(), false).unwrap();
    let (id, ood) = tables(&zoo);
    let acc = linefit::accuracy_line(&id, &ood).unwrap();
    let agr = linefit::agreement_line(&id, &ood).unwrap();
    assert!(agr.r_squared >= 0.95, "agreement R2 {}", agr.r_squared);
    assert!(
        (acc.slope - agr.slope).abs() <= 0.05,
        "slopes {} vs {}",
        acc.slope,
        agr.slope
    );
    assert_eq!(linefit::diagnose(&agr), Diagnosis::Strong);

    let ci = linefit::slope_diff_ci_from_tables(
        &id,
        &ood,
        SlopeDiffConfig {
            seed: ZooSpec::default().seed,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(
        ci.lower <= 0.0 && 0.0 <= ci.upper,
        "CI ({}, {}) excludes 0",
        ci.lower,
        ci.upper
    );
}

#[test]
fn default_zoo_aline_d_beats_naive_agreement() {
    let zoo = generate_zoo(&ZooSpec::default(), false).unwrap();
    let (id, ood) = tables(&zoo);
    let truth = ood.accuracies().unwrap();
    let rep_d = aline_d(&id, &ood).unwrap();
    for e in &rep_d.estimates {
        assert!(e.estimate > 0.0 && e.estimate < 1.0, "estimate {e:?}");
    }
    let mae_d = mae_percent(&rep_d, truth);
    let mae_n = mae_percent(&naive_agreement(&ood, None).unwrap(), truth);
    assert!(mae_d <= 2.0, "ALine-D MAE {mae_d}%");
    assert!(mae_d <= mae_n, "ALine-D {mae_d}% vs naive {mae_n}%");
}

#[test]
fn break_line_preset_breaks_the_line() {
    let zoo = generate_zoo(&ZooSpec::break_line(ZooSpec::default().seed), false).unwrap();
    let (id, ood) = tables(&zoo);
    let agr = linefit::agreement_line(&id, &ood).unwrap();
    assert!(agr.r_squared <= 0.75, "agreement R2 {}", agr.r_squared);
    assert_eq!(linefit::diagnose(&agr), Diagnosis::Weak);
}

#[test]
fn zoo_roundtrips_through_manifest_files_bit_exactly() {
    let spec = ZooSpec {
        n_models: 6,
        m_id: 400,
        m_ood: 300,
        ..ZooSpec::default()
    };
    let zoo = generate_zoo(&spec, true).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = data::write_dataset(
        dir.path(),
        &zoo.set,
        &zoo.id_labels,
        Some(&zoo.ood_labels),
        &BTreeMap::new(),
    )
    .unwrap();
    let loaded = data::load_manifest(&manifest).unwrap();
    assert_eq!(loaded.id_labels.labels, zoo.id_labels.labels);
    assert_eq!(
        loaded.ood_labels.as_ref().unwrap().labels,
        zoo.ood_labels.labels
    );
    for (a, b) in loaded.set.models().iter().zip(zoo.set.models()) {
        assert_eq!(a.id, b.id);
        assert_eq!(a.id_val_predictions, b.id_val_predictions);
        assert_eq!(a.ood_predictions, b.ood_predictions);
        // logits rendered shortest-roundtrip, so bit equality must hold
        assert_eq!(a.id_val_logits, b.id_val_logits);
        assert_eq!(a.ood_logits, b.ood_logits);
    }
}

#[test]
fn bootstrap_ci_is_bit_stable_across_thread_counts() {
    let spec = ZooSpec {
        n_models: 16,
        m_id: 2000,
        m_ood: 2000,
        ..ZooSpec::default()
    };
    let zoo = generate_zoo(&spec, false).unwrap();
    let (id, ood) = tables(&zoo);
    let cfg = SlopeDiffConfig {
        subset_size: 8,
        n_resamples: 300,
        seed: 11,
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| linefit::slope_diff_ci_from_tables(&id, &ood, cfg).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.lower.to_bits(), four.lower.to_bits());
    assert_eq!(one.upper.to_bits(), four.upper.to_bits());
    assert_eq!(one.discarded, four.discarded);
}

#[test]
fn slope_diff_ci_is_reorder_invariant() {
    let spec = ZooSpec {
        n_models: 12,
        m_id: 1500,
        m_ood: 1500,
        ..ZooSpec::default()
    };
    let zoo = generate_zoo(&spec, false).unwrap();
    let cfg = SlopeDiffConfig {
        subset_size: 6,
        n_resamples: 100,
        seed: 5,
    };
    let a = linefit::slope_diff_ci(&zoo.set, &zoo.id_labels, &zoo.ood_labels, cfg).unwrap();
    // rebuild the set with models listed in reverse order
    let mut models = zoo.set.models().to_vec();
    models.reverse();
    let reversed = aol_core::data::ModelSet::new(models, zoo.set.class_count()).unwrap();
    let b = linefit::slope_diff_ci(&reversed, &zoo.id_labels, &zoo.ood_labels, cfg).unwrap();
    assert_eq!(a.lower.to_bits(), b.lower.to_bits());
    assert_eq!(a.upper.to_bits(), b.upper.to_bits());
}
