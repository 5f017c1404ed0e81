//! Implementations of the six subcommands.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use aol_core::data;
use aol_core::estimators::{
    ac_report, aline_d, aline_s, atc_report, calibrate_models, doc_feat_report, naive_agreement,
    EstimateReport, Method,
};
use aol_core::linefit::{
    self, accuracy_line, agreement_line, diagnose, Diagnosis, LineFit, SlopeDiffCi, SlopeDiffConfig,
};
use aol_core::metrics::MetricTable;
use aol_core::synth::{self, ExactLineSpec, ZooSpec};

use crate::args::*;
use crate::input::{InputKind, Inputs};
use crate::report::{digest_file, write_json_report, write_scatter_csv, Provenance, Report};
use crate::CliError;

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Metrics(args) => cmd_metrics(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn provenance(inputs: &Inputs, seed: Option<u64>, args: BTreeMap<String, String>) -> Provenance {
    Provenance {
        inputs: inputs.digests.clone(),
        seed,
        args,
    }
}

// --- metrics ----------------------------------------------------------------

fn cmd_metrics(args: MetricsArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(&InputArgs {
        manifest: Some(args.manifest.clone()),
        tables: None,
    })?;
    let (id, ood) = inputs.tables()?;
    ensure_dir(&args.out)?;

    let prov = || provenance(&inputs, None, BTreeMap::new());
    write_json_report(
        &args.out.join("id_metrics.json"),
        &Report::new("metrics", prov(), &id),
    )?;
    write_json_report(
        &args.out.join("ood_metrics.json"),
        &Report::new("metrics", prov(), &ood),
    )?;

    write_scatter_csv(
        &args.out.join("agreement_scatter.csv"),
        &linefit::agreement_points(&id, &ood)?,
    )?;
    if ood.accuracies().is_some() {
        write_scatter_csv(
            &args.out.join("accuracy_scatter.csv"),
            &linefit::accuracy_points(&id, &ood)?,
        )?;
    }
    Ok(())
}

// --- diagnose ---------------------------------------------------------------

#[derive(Serialize)]
struct DiagnosePayload {
    agreement_fit: LineFit,
    /// Endpoints of the fitted line over the scatter's x-range, for
    /// data-only plotting.
    agreement_line_endpoints: [[f64; 2]; 2],
    verdict: Diagnosis,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_fit: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_line_endpoints: Option<[[f64; 2]; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    slope_diff: Option<SlopeDiffCi>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

/// Two points on the fitted line spanning the scatter's x-range.
fn line_endpoints(fit: &LineFit, points: &[(f64, f64)]) -> [[f64; 2]; 2] {
    let x_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    [
        [x_min, fit.slope * x_min + fit.bias],
        [x_max, fit.slope * x_max + fit.bias],
    ]
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(&args.input)?;
    let (id, ood) = inputs.tables()?;
    let fit = agreement_line(&id, &ood)?;
    let verdict = diagnose(&fit);
    let agreement_line_endpoints = line_endpoints(&fit, &linefit::agreement_points(&id, &ood)?);

    let mut notes = Vec::new();
    let labeled = id.accuracies().is_some() && ood.accuracies().is_some();
    let accuracy_fit = if labeled {
        Some(accuracy_line(&id, &ood)?)
    } else {
        notes.push(
            "OOD accuracies unavailable: accuracy line and slope-difference CI skipped".into(),
        );
        None
    };
    let slope_diff = if labeled {
        if args.subset_size <= id.n_models() {
            Some(linefit::slope_diff_ci_from_tables(
                &id,
                &ood,
                SlopeDiffConfig {
                    subset_size: args.subset_size,
                    n_resamples: args.resamples,
                    seed: args.seed,
                },
            )?)
        } else {
            notes.push(format!(
                "slope-difference CI skipped: subset size {} exceeds the {} models available",
                args.subset_size,
                id.n_models()
            ));
            None
        }
    } else {
        None
    };

    let accuracy_line_endpoints = match &accuracy_fit {
        Some(acc_fit) => Some(line_endpoints(
            acc_fit,
            &linefit::accuracy_points(&id, &ood)?,
        )),
        None => None,
    };
    let mut flag_args = BTreeMap::new();
    flag_args.insert("subset_size".into(), args.subset_size.to_string());
    flag_args.insert("resamples".into(), args.resamples.to_string());
    let report = Report::new(
        "diagnose",
        provenance(&inputs, Some(args.seed), flag_args),
        DiagnosePayload {
            agreement_fit: fit,
            agreement_line_endpoints,
            verdict,
            accuracy_fit,
            accuracy_line_endpoints,
            slope_diff,
            notes,
        },
    );
    write_json_report(&args.out, &report)
}

// --- predict ----------------------------------------------------------------

#[derive(Serialize)]
struct DiagnosisInfo {
    verdict: Diagnosis,
    r2: f64,
}

#[derive(Serialize)]
struct PredictPayload {
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnosis: Option<DiagnosisInfo>,
    reports: Vec<EstimateReport>,
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(&args.input)?;
    let (id, ood) = inputs.tables()?;

    let mut diagnosis = None;
    let reports = match args.method {
        Method::AlineS | Method::AlineD => {
            let fit = agreement_line(&id, &ood)?;
            let verdict = diagnose(&fit);
            if verdict == Diagnosis::Weak && !args.force {
                return Err(CliError::Refused(format!(
                    "agreement line diagnosis is WEAK (R2 = {:.3}); ALine estimates would be unreliable. Pass --force to run anyway",
                    fit.r_squared
                )));
            }
            diagnosis = Some(DiagnosisInfo {
                verdict,
                r2: fit.r_squared,
            });
            let report = match args.method {
                Method::AlineS => aline_s(&id, &ood)?,
                _ => aline_d(&id, &ood)?,
            };
            vec![report]
        }
        Method::Agreement => vec![naive_agreement(&ood, None)?],
        method => confidence_reports(&inputs, method, args.no_calibration)?,
    };

    let mut flag_args = BTreeMap::new();
    flag_args.insert("method".into(), args.method.to_string());
    flag_args.insert("force".into(), args.force.to_string());
    flag_args.insert("no_calibration".into(), args.no_calibration.to_string());
    let report = Report::new(
        "predict",
        provenance(&inputs, None, flag_args),
        PredictPayload { diagnosis, reports },
    );
    write_json_report(&args.out, &report)
}

/// Uncalibrated and (unless suppressed) temperature-scaled variants of one
/// confidence baseline. Only manifests carry logits, so this rejects
/// table-driven input.
fn confidence_reports(
    inputs: &Inputs,
    method: Method,
    no_calibration: bool,
) -> Result<Vec<EstimateReport>, CliError> {
    let loaded = inputs.manifest().ok_or_else(|| {
        CliError::Usage(format!(
            "method '{method}' needs model logits; run it on a --manifest rather than --tables"
        ))
    })?;
    let set = &loaded.set;
    let id_labels = &loaded.id_labels.labels;
    let run = |temps: Option<&[f64]>| -> Result<EstimateReport, CliError> {
        Ok(match method {
            Method::Atc => atc_report(set, id_labels, temps)?,
            Method::Ac => ac_report(set, temps)?,
            Method::DocFeat => doc_feat_report(set, id_labels, temps)?,
            _ => unreachable!("only confidence baselines reach here"),
        })
    };
    let mut reports = vec![run(None)?];
    if !no_calibration {
        let temps: Vec<f64> = calibrate_models(set, id_labels)?
            .iter()
            .map(|c| c.temperature)
            .collect();
        reports.push(run(Some(&temps))?);
    }
    Ok(reports)
}

// --- bench ------------------------------------------------------------------

#[derive(Serialize)]
struct BenchEstimate {
    id: String,
    estimate: f64,
    truth: f64,
}

#[derive(Serialize)]
struct MethodBench {
    method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selection_note: Option<String>,
    mae_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_squared: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spearman_rho: Option<f64>,
    estimates: Vec<BenchEstimate>,
}

#[derive(Serialize)]
struct SkippedMethod {
    method: Method,
    reason: String,
}

#[derive(Serialize)]
struct BenchPayload {
    truth_source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnosis: Option<DiagnosisInfo>,
    methods: Vec<MethodBench>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    skipped: Vec<SkippedMethod>,
}

/// Mean absolute error in percent against per-id truths.
fn mae_percent(report: &EstimateReport, truth: &BTreeMap<String, f64>) -> f64 {
    let total: f64 = report
        .estimates
        .iter()
        .map(|e| (e.estimate - truth[&e.id]).abs())
        .sum();
    total / report.estimates.len() as f64 * 100.0
}

fn correlations(
    report: &EstimateReport,
    truth: &BTreeMap<String, f64>,
) -> (Option<f64>, Option<f64>) {
    let points: Vec<(f64, f64)> = report
        .estimates
        .iter()
        .map(|e| (truth[&e.id], e.estimate))
        .collect();
    let r2 = linefit::ols_fit(&points).ok().map(|f| f.r_squared);
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let rho = linefit::spearman_rho(&ys, &xs).ok();
    (r2, rho)
}

fn cmd_bench(args: BenchArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(&args.input)?;
    let (id, ood) = inputs.tables()?;
    let truth_values = ood.accuracies().ok_or_else(|| {
        CliError::Usage(
            "bench needs OOD truth: supply OOD labels in the manifest or an OOD table with accuracies"
                .into(),
        )
    })?;
    let truth: BTreeMap<String, f64> = ood
        .model_ids()
        .iter()
        .cloned()
        .zip(truth_values.iter().copied())
        .collect();
    let truth_source = match inputs.kind {
        InputKind::Manifest(_) => "ood_labels",
        InputKind::Tables { .. } => "ood_table_accuracies",
    };

    let logits_available = inputs.manifest().is_some_and(|m| {
        m.set
            .models()
            .iter()
            .all(|r| r.id_val_logits.is_some() && r.ood_logits.is_some())
    });
    let explicit = !args.methods.is_empty();
    let requested: Vec<Method> = if explicit {
        args.methods.clone()
    } else {
        Method::ALL.to_vec()
    };

    let diagnosis = agreement_line(&id, &ood).ok().map(|fit| DiagnosisInfo {
        verdict: diagnose(&fit),
        r2: fit.r_squared,
    });

    let mut methods = Vec::new();
    let mut skipped = Vec::new();
    for method in requested {
        if method.needs_logits() && !logits_available {
            let reason = String::from(
                "needs per-model logits on both splits, which this input does not carry",
            );
            if explicit {
                return Err(CliError::Usage(format!("method '{method}': {reason}")));
            }
            skipped.push(SkippedMethod { method, reason });
            continue;
        }
        let entry = match method {
            Method::AlineS => plain_entry(method, aline_s(&id, &ood)?, &truth),
            Method::AlineD => plain_entry(method, aline_d(&id, &ood)?, &truth),
            Method::Agreement => plain_entry(method, naive_agreement(&ood, None)?, &truth),
            baseline => {
                let variants = confidence_reports(&inputs, baseline, args.no_calibration)?;
                best_variant_entry(baseline, variants, &truth)
            }
        };
        methods.push(entry);
    }

    ensure_dir(&args.out)?;
    let mut scatter = String::from("method,model_id,truth,estimate\n");
    for entry in &methods {
        for e in &entry.estimates {
            scatter.push_str(&format!(
                "{},{},{},{}\n",
                entry.method.tag(),
                e.id,
                e.truth,
                e.estimate
            ));
        }
    }
    crate::report::write_atomic(&args.out.join("bench_scatter.csv"), scatter.as_bytes())?;

    let mut flag_args = BTreeMap::new();
    flag_args.insert(
        "methods".into(),
        args.methods
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    flag_args.insert("no_calibration".into(), args.no_calibration.to_string());
    let report = Report::new(
        "bench",
        provenance(&inputs, None, flag_args),
        BenchPayload {
            truth_source,
            diagnosis,
            methods,
            skipped,
        },
    );
    write_json_report(&args.out.join("bench.json"), &report)
}

fn bench_estimates(report: &EstimateReport, truth: &BTreeMap<String, f64>) -> Vec<BenchEstimate> {
    report
        .estimates
        .iter()
        .map(|e| BenchEstimate {
            id: e.id.clone(),
            estimate: e.estimate,
            truth: truth[&e.id],
        })
        .collect()
}

fn plain_entry(
    method: Method,
    report: EstimateReport,
    truth: &BTreeMap<String, f64>,
) -> MethodBench {
    let (r_squared, spearman_rho) = correlations(&report, truth);
    MethodBench {
        method,
        variant: None,
        selection_note: None,
        mae_percent: mae_percent(&report, truth),
        r_squared,
        spearman_rho,
        estimates: bench_estimates(&report, truth),
    }
}

/// Of the uncalibrated and calibrated runs, report whichever achieves the
/// lower MAE, recording the choice.
fn best_variant_entry(
    method: Method,
    variants: Vec<EstimateReport>,
    truth: &BTreeMap<String, f64>,
) -> MethodBench {
    let scored: Vec<(f64, EstimateReport)> = variants
        .into_iter()
        .map(|r| (mae_percent(&r, truth), r))
        .collect();
    let names: [&'static str; 2] = ["uncalibrated", "calibrated"];
    let best = (0..scored.len())
        .min_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0))
        .expect("at least one variant");
    let selection_note = if scored.len() == 2 {
        Some(format!(
            "{} variant selected: MAE {:.4}% vs {:.4}%",
            names[best],
            scored[best].0,
            scored[1 - best].0
        ))
    } else {
        None
    };
    let (mae, report) = &scored[best];
    let (r_squared, spearman_rho) = correlations(report, truth);
    MethodBench {
        method,
        variant: Some(names[best]),
        selection_note,
        mae_percent: *mae,
        r_squared,
        spearman_rho,
        estimates: bench_estimates(report, truth),
    }
}

// --- ablate -----------------------------------------------------------------

#[derive(Serialize)]
struct AblateSizeEntry {
    size: usize,
    mean_mae_percent: f64,
    per_repeat_mae_percent: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    homogeneous: Option<AblateHomoEntry>,
}

#[derive(Serialize)]
struct AblateHomoEntry {
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_mae_percent: Option<f64>,
    per_repeat_mae_percent: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

#[derive(Serialize)]
struct AblatePayload {
    truth_source: &'static str,
    repeats: usize,
    sizes: Vec<AblateSizeEntry>,
}

fn subset_mae(
    id: &MetricTable,
    ood: &MetricTable,
    truth: &[f64],
    subset: &[usize],
) -> Result<f64, CliError> {
    let sub_id = id.subset(subset);
    let sub_ood = ood.subset(subset);
    let report = aline_d(&sub_id, &sub_ood)?;
    let total: f64 = report
        .estimates
        .iter()
        .zip(subset)
        .map(|(e, &i)| (e.estimate - truth[i]).abs())
        .sum();
    Ok(total / subset.len() as f64 * 100.0)
}

fn sample_subset(rng: &mut ChaCha8Rng, pool: &[usize], k: usize) -> Vec<usize> {
    let mut idx = pool.to_vec();
    for i in 0..k {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut subset = idx[..k].to_vec();
    subset.sort_unstable();
    subset
}

fn ablate_stream(size: usize, repeat: usize, homogeneous: bool) -> u64 {
    ((size as u64) << 24) | ((repeat as u64) << 1) | homogeneous as u64
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let inputs = Inputs::load(&args.input)?;
    let (id_raw, ood_raw) = inputs.tables()?;
    let id = id_raw.canonicalized();
    let ood = ood_raw.canonicalized();
    let n = id.n_models();
    let truth = ood
        .accuracies()
        .ok_or_else(|| {
            CliError::Usage(
                "ablate needs OOD truth: supply OOD labels in the manifest or an OOD table with accuracies"
                    .into(),
            )
        })?
        .to_vec();
    if args.repeats == 0 || args.repeats > 100_000 {
        return Err(CliError::Usage("repeats must lie in 1..=100000".into()));
    }
    for &size in &args.sizes {
        if size < 3 {
            return Err(CliError::Usage(format!(
                "subset size {size} rejected: ALine-D needs at least 3 models"
            )));
        }
        if size > n {
            return Err(CliError::Usage(format!(
                "subset size {size} exceeds the {n} models available"
            )));
        }
    }

    // canonical-order index pools per architecture, when requested
    let arch_pools: Option<Vec<(String, Vec<usize>)>> = if args.group_by_architecture {
        let archs = inputs.architectures().ok_or_else(|| {
            CliError::Usage(
                "--group-by-architecture needs a manifest with architecture tags".into(),
            )
        })?;
        if archs.is_empty() {
            return Err(CliError::Usage(
                "--group-by-architecture: no model in the manifest carries an architecture tag"
                    .into(),
            ));
        }
        let mut pools: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, model_id) in id.model_ids().iter().enumerate() {
            if let Some(arch) = archs.get(model_id) {
                pools.entry(arch.clone()).or_default().push(i);
            }
        }
        Some(pools.into_iter().collect())
    } else {
        None
    };

    let all: Vec<usize> = (0..n).collect();
    let mut sizes = Vec::with_capacity(args.sizes.len());
    for &size in &args.sizes {
        let mut per_repeat = Vec::with_capacity(args.repeats);
        for repeat in 0..args.repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            rng.set_stream(ablate_stream(size, repeat, false));
            let subset = sample_subset(&mut rng, &all, size);
            per_repeat.push(subset_mae(&id, &ood, &truth, &subset)?);
        }
        let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;

        let homogeneous = arch_pools.as_ref().map(|pools| {
            let eligible: Vec<&(String, Vec<usize>)> =
                pools.iter().filter(|(_, p)| p.len() >= size).collect();
            if eligible.is_empty() {
                return Ok::<_, CliError>(AblateHomoEntry {
                    mean_mae_percent: None,
                    per_repeat_mae_percent: Vec::new(),
                    note: Some(format!("no architecture group holds {size} models")),
                });
            }
            let mut per_repeat = Vec::with_capacity(args.repeats);
            for repeat in 0..args.repeats {
                let (_, pool) = eligible[repeat % eligible.len()];
                let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
                rng.set_stream(ablate_stream(size, repeat, true));
                let subset = sample_subset(&mut rng, pool, size);
                per_repeat.push(subset_mae(&id, &ood, &truth, &subset)?);
            }
            let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
            Ok(AblateHomoEntry {
                mean_mae_percent: Some(mean),
                per_repeat_mae_percent: per_repeat,
                note: None,
            })
        });
        let homogeneous = homogeneous.transpose()?;

        sizes.push(AblateSizeEntry {
            size,
            mean_mae_percent: mean,
            per_repeat_mae_percent: per_repeat,
            homogeneous,
        });
    }

    let truth_source = match inputs.kind {
        InputKind::Manifest(_) => "ood_labels",
        InputKind::Tables { .. } => "ood_table_accuracies",
    };
    let mut flag_args = BTreeMap::new();
    flag_args.insert(
        "sizes".into(),
        args.sizes
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    flag_args.insert("repeats".into(), args.repeats.to_string());
    flag_args.insert(
        "group_by_architecture".into(),
        args.group_by_architecture.to_string(),
    );
    let report = Report::new(
        "ablate",
        provenance(&inputs, Some(args.seed), flag_args),
        AblatePayload {
            truth_source,
            repeats: args.repeats,
            sizes,
        },
    );
    write_json_report(&args.out, &report)
}

// --- synth ------------------------------------------------------------------

#[derive(Serialize)]
struct ExactLineSummary {
    slope: f64,
    bias: f64,
    n_models: usize,
    sample_count: u64,
}

#[derive(Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum SynthPayload {
    Zoo {
        spec: ZooSpec,
        emit_logits: bool,
        outputs: Vec<crate::report::InputDigest>,
    },
    ExactLine {
        spec: ExactLineSummary,
        outputs: Vec<crate::report::InputDigest>,
    },
}

fn synth_args_map(args: &SynthArgs) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        map.insert(k.to_string(), v);
    };
    put("exact_line", args.exact_line.to_string());
    put("slope", args.slope.to_string());
    put("bias", args.bias.to_string());
    put("m", args.m.to_string());
    put("models", args.models.to_string());
    put("m_id", args.m_id.to_string());
    put("m_ood", args.m_ood.to_string());
    put("classes", args.classes.to_string());
    put("skill_lo", args.skill_lo.to_string());
    put("skill_hi", args.skill_hi.to_string());
    put("shift", args.shift.to_string());
    put("scale", args.scale.to_string());
    put("coupling", args.coupling.to_string());
    put("emit_logits", args.emit_logits.to_string());
    put("break_line", args.break_line.to_string());
    map
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    ensure_dir(&args.out_dir)?;
    let payload = if args.exact_line {
        let spec = ExactLineSpec::spread(args.models, args.slope, args.bias, args.m);
        let (id, ood) = synth::exact_line_tables(&spec)?;
        let prov = Provenance {
            inputs: Vec::new(),
            seed: Some(args.seed),
            args: synth_args_map(&args),
        };
        let id_path = args.out_dir.join("id_metrics.json");
        let ood_path = args.out_dir.join("ood_metrics.json");
        write_json_report(&id_path, &Report::new("synth", prov.clone(), &id))?;
        write_json_report(&ood_path, &Report::new("synth", prov, &ood))?;
        SynthPayload::ExactLine {
            spec: ExactLineSummary {
                slope: args.slope,
                bias: args.bias,
                n_models: args.models,
                sample_count: args.m,
            },
            outputs: vec![digest_file(&id_path)?, digest_file(&ood_path)?],
        }
    } else {
        let mut spec = ZooSpec {
            n_models: args.models,
            m_id: args.m_id,
            m_ood: args.m_ood,
            class_count: args.classes,
            skill_lo: args.skill_lo,
            skill_hi: args.skill_hi,
            difficulty_shift: args.shift,
            difficulty_scale: args.scale,
            coupling: args.coupling,
            seed: args.seed,
            ood_label_noise: None,
        };
        if args.break_line {
            let preset = ZooSpec::break_line(args.seed);
            spec.coupling = preset.coupling;
            spec.ood_label_noise = preset.ood_label_noise;
        }
        let zoo = synth::generate_zoo(&spec, args.emit_logits)?;
        let manifest_path = data::write_dataset(
            &args.out_dir,
            &zoo.set,
            &zoo.id_labels,
            Some(&zoo.ood_labels),
            &BTreeMap::new(),
        )?;
        SynthPayload::Zoo {
            spec,
            emit_logits: args.emit_logits,
            outputs: vec![digest_file(&manifest_path)?],
        }
    };
    let report = Report::new(
        "synth",
        Provenance {
            inputs: Vec::new(),
            seed: Some(args.seed),
            args: synth_args_map(&args),
        },
        payload,
    );
    write_json_report(&args.out_dir.join("synth.json"), &report)
}
