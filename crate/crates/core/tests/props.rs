//! Property tests for the library's structural invariants.

use aol_core::data::{ModelRecord, ModelSet, Split};
use aol_core::estimators::aline_d;
use aol_core::linefit::{ols_fit, spearman_rho};
use aol_core::metrics::{self, MetricTable};
use proptest::prelude::*;

fn columns(n: usize, m: usize, k: u32) -> impl Strategy<Value = Vec<Vec<u32>>> {
    prop::collection::vec(prop::collection::vec(0..k, m), n)
}

fn set_from(cols: Vec<Vec<u32>>, ood: Vec<Vec<u32>>, k: u32) -> ModelSet {
    let models = cols
        .into_iter()
        .zip(ood)
        .enumerate()
        .map(|(i, (id_val, ood))| ModelRecord {
            id: format!("m{i:03}"),
            id_val_predictions: id_val,
            ood_predictions: ood,
            id_val_logits: None,
            ood_logits: None,
        })
        .collect();
    ModelSet::new(models, k).unwrap()
}

proptest! {
    #[test]
    fn agreement_is_symmetric_and_reflexive(
        a in prop::collection::vec(0u32..5, 1..200),
        b in prop::collection::vec(0u32..5, 1..200),
    ) {
        prop_assert_eq!(metrics::agreement(&a, &a).unwrap(), 1.0);
        let n = a.len().min(b.len());
        let (a, b) = (&a[..n], &b[..n]);
        prop_assert_eq!(
            metrics::agreement(a, b).unwrap(),
            metrics::agreement(b, a).unwrap()
        );
    }

    #[test]
    fn accuracy_equals_agreement_with_labels(
        preds in prop::collection::vec(0u32..4, 1..100),
        labels in prop::collection::vec(0u32..4, 1..100),
    ) {
        let n = preds.len().min(labels.len());
        prop_assert_eq!(
            metrics::accuracy(&preds[..n], &labels[..n]).unwrap(),
            metrics::agreement(&preds[..n], &labels[..n]).unwrap()
        );
    }

    #[test]
    fn probit_is_strictly_increasing_and_invertible(
        p in 0.0f64..1.0,
        q in 0.0f64..1.0,
        m in 10u64..1_000_000,
    ) {
        let lo = 1.0 / (2.0 * m as f64);
        let (p, q) = (p.clamp(lo, 1.0 - lo), q.clamp(lo, 1.0 - lo));
        let (zp, zq) = (metrics::probit(p, m).unwrap(), metrics::probit(q, m).unwrap());
        prop_assert!(zp.is_finite() && zq.is_finite());
        if p < q {
            prop_assert!(zp < zq);
        }
        let back = metrics::inverse_probit(zp).unwrap();
        prop_assert!((back - p).abs() <= 1e-8);
    }

    #[test]
    fn ols_is_affine_equivariant(
        xs in prop::collection::vec(-3.0f64..3.0, 5..40),
        noise in prop::collection::vec(-0.5f64..0.5, 5..40),
        c in prop_oneof![(-4.0f64..-0.1), (0.1f64..4.0)],
        d in -2.0f64..2.0,
    ) {
        let n = xs.len().min(noise.len());
        let points: Vec<(f64, f64)> = (0..n)
            .map(|i| (xs[i], 0.8 * xs[i] + noise[i]))
            .collect();
        prop_assume!(points.iter().any(|p| p.0 != points[0].0));
        let base = ols_fit(&points).unwrap();
        let mapped: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, c * y + d)).collect();
        let fit = ols_fit(&mapped).unwrap();
        let tol = 1e-9 * (1.0 + base.slope.abs() + base.bias.abs()) * (1.0 + c.abs() + d.abs());
        prop_assert!((fit.slope - c * base.slope).abs() <= tol);
        prop_assert!((fit.bias - (c * base.bias + d)).abs() <= tol);
        prop_assert!((fit.r_squared - base.r_squared).abs() <= 1e-6);
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        xs in prop::collection::vec(-10.0f64..10.0, 3..30),
        ys in prop::collection::vec(-10.0f64..10.0, 3..30),
    ) {
        let n = xs.len().min(ys.len());
        let (xs, ys) = (&xs[..n], &ys[..n]);
        let rho = spearman_rho(xs, ys);
        prop_assume!(rho.is_ok());
        let rho = rho.unwrap();
        prop_assert!((-1.0..=1.0).contains(&rho));
        // exp is strictly increasing; cube preserves order of the other side
        let ex: Vec<f64> = xs.iter().map(|v| (v * 0.3).exp()).collect();
        let cy: Vec<f64> = ys.iter().map(|v| v * v * v).collect();
        let rho2 = spearman_rho(&ex, &cy).unwrap();
        prop_assert!((rho - rho2).abs() <= 1e-12);
    }

    #[test]
    fn metric_table_is_order_independent(
        cols in columns(4, 60, 3),
        ood in columns(4, 50, 3),
        labels in prop::collection::vec(0u32..3, 60),
    ) {
        let set = set_from(cols.clone(), ood.clone(), 3);
        let table = metrics::metric_table(&set, Some(&labels), Split::IdVal).unwrap();
        // reverse the model order and recompute
        let rev_set = set_from(
            cols.into_iter().rev().collect(),
            ood.into_iter().rev().collect(),
            3,
        );
        let rev = metrics::metric_table(&rev_set, Some(&labels), Split::IdVal).unwrap();
        let n = 4;
        for i in 0..n {
            prop_assert_eq!(
                table.accuracies().unwrap()[i],
                rev.accuracies().unwrap()[n - 1 - i]
            );
            for j in 0..n {
                prop_assert_eq!(
                    table.agreement_between(i, j),
                    rev.agreement_between(n - 1 - i, n - 1 - j)
                );
            }
        }
    }

    #[test]
    fn aline_d_is_permutation_equivariant(
        accs in prop::collection::vec(0.55f64..0.95, 5),
        agrs in prop::collection::vec(0.5f64..0.9, 10),
    ) {
        let n = 5;
        let ids: Vec<String> = (0..n).map(|i| format!("m{i}")).collect();
        let make = |ids: Vec<String>, accs: Vec<f64>, agrs: Vec<f64>| {
            let id = MetricTable::from_parts(
                Split::IdVal, 10_000, ids.clone(), Some(accs), agrs.clone(), true,
            ).unwrap();
            // OOD agreements shifted down a little to give a non-trivial line
            let ood_agr: Vec<f64> = agrs.iter().map(|v| (v - 0.05).max(0.01)).collect();
            let ood = MetricTable::from_parts(
                Split::Ood, 10_000, ids, None, ood_agr, true,
            ).unwrap();
            (id, ood)
        };
        let (id, ood) = make(ids.clone(), accs.clone(), agrs.clone());
        let base = aline_d(&id, &ood);
        prop_assume!(base.is_ok());
        let base = base.unwrap();

        // reverse the model order; pair values must follow the permutation
        let rev_ids: Vec<String> = ids.iter().rev().cloned().collect();
        let rev_accs: Vec<f64> = accs.iter().rev().copied().collect();
        let mut rev_agrs = vec![0.0; agrs.len()];
        for (i, j) in metrics::pairs(n) {
            let (ri, rj) = (n - 1 - j, n - 1 - i);
            rev_agrs[metrics::pair_index(ri, rj, n)] = agrs[metrics::pair_index(i, j, n)];
        }
        let (rid, rood) = make(rev_ids, rev_accs, rev_agrs);
        let rev = aline_d(&rid, &rood).unwrap();
        for i in 0..n {
            let a = base.estimates[i].estimate;
            let b = rev.estimates[n - 1 - i].estimate;
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn aline_estimates_stay_inside_unit_interval(
        accs in prop::collection::vec(0.3f64..0.99, 6),
        agrs in prop::collection::vec(0.3f64..0.99, 15),
        ood_agrs in prop::collection::vec(0.3f64..0.99, 15),
    ) {
        let ids: Vec<String> = (0..6).map(|i| format!("m{i}")).collect();
        let id = MetricTable::from_parts(
            Split::IdVal, 5_000, ids.clone(), Some(accs), agrs, true,
        ).unwrap();
        let ood = MetricTable::from_parts(Split::Ood, 5_000, ids, None, ood_agrs, true).unwrap();
        for report in [
            aol_core::estimators::aline_s(&id, &ood),
            aline_d(&id, &ood),
        ] {
            prop_assume!(report.is_ok());
            for e in &report.unwrap().estimates {
                prop_assert!(e.estimate > 0.0 && e.estimate < 1.0, "{:?}", e);
            }
        }
    }

    #[test]
    fn metric_table_json_roundtrip_is_exact(
        cols in columns(3, 37, 4),
        ood in columns(3, 29, 4),
        labels in prop::collection::vec(0u32..4, 37),
    ) {
        let set = set_from(cols, ood, 4);
        let table = metrics::metric_table(&set, Some(&labels), Split::IdVal).unwrap();
        let json = serde_json::to_string(&table).unwrap();
        let back: MetricTable = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back.sample_count(), table.sample_count());
        for (i, id) in back.model_ids().iter().enumerate() {
            let orig = table.model_ids().iter().position(|x| x == id).unwrap();
            prop_assert_eq!(back.accuracies().unwrap()[i], table.accuracies().unwrap()[orig]);
        }
    }
}
