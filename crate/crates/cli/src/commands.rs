//! Command implementations. Each artifact-producing command writes its
//! files through an [`OutputDir`] and finishes with one manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use nocturne::balance::{balance_design_matrix, flatten_for_balance, pca2, AdasynConfig};
use nocturne::eval::report::{
    cells_csv, parse_summary_csv, summary_csv, text_table, to_json, SummaryRow, TableMetric,
};
use nocturne::eval::{
    fit_model, run_experiment, run_transfer, source_matrix, ExperimentResult, TransferResult,
};
use nocturne::features::{
    DesignMatrix, FeatureOptions, FeatureSetName, FeatureSetSpec, PreparedNights, Standardizer,
};
use nocturne::ingest::{
    bundle_to_strings, load_ohio_dir, parse_inhouse_bundle, parse_ohio_xml, write_ohio_xml,
    ParseReport, RawCohort,
};
use nocturne::labeling::{label_cohort, LabelRun};
use nocturne::models::ModelKind;
use nocturne::preprocess::{Imputation, RangeTable};
use nocturne::synthgen::{generate_cohort, CohortProfile};
use nocturne::Real;

use crate::config::{Config, DataSection, Precision, SourceKind, Stage};
use crate::manifest::OutputDir;
use crate::plot::{self, Group, ScatterPoint};
use crate::{stage, CliError, Command, Context, InputArgs, PlotKind};

pub fn dispatch(cmd: &Command, ctx: &Context) -> Result<(), CliError> {
    match cmd {
        Command::Generate {
            profile,
            signal,
            ohio_xml,
        } => generate(ctx, profile.as_deref(), *signal, *ohio_xml),
        Command::Ingest { input } => ingest(ctx, input),
        Command::Label { input } => label(ctx, input),
        Command::Features {
            input,
            sets,
            dump_spec,
        } => features(ctx, input, sets, *dump_spec),
        Command::Balance {
            input,
            set,
            ratio,
            k,
        } => balance(ctx, input, *set, *ratio, *k),
        Command::Train { input, set, model } => train(ctx, input, *set, *model),
        Command::Evaluate {
            input,
            sets,
            models,
            group_by_patient,
            leaky_balance,
        } => {
            let mut cfg = ctx.cfg.clone();
            if !sets.is_empty() {
                cfg.features.sets = sets.clone();
            }
            if !models.is_empty() {
                cfg.evaluate.models = models.clone();
            }
            cfg.experiment.group_by_patient |= group_by_patient;
            cfg.experiment.leaky_balance |= leaky_balance;
            let ctx = Context {
                cfg,
                out: ctx.out.clone(),
                command_line: ctx.command_line.clone(),
            };
            evaluate_cmd(&ctx, input)
        }
        Command::Transfer {
            input,
            source_bundle,
            source_ohio,
            source_profile,
        } => {
            let source = InputArgs {
                bundle: source_bundle.clone(),
                ohio: source_ohio.clone(),
                profile: source_profile.clone(),
                signal: None,
            };
            transfer_cmd(ctx, input, &source)
        }
        Command::Plot { kind, input } => plot_cmd(ctx, *kind, input),
        Command::Pipeline { .. } => pipeline(ctx),
    }
}

/// A cohort ready for labeling, plus where it came from.
pub struct LoadedData {
    pub cohort: RawCohort,
    pub report: Option<ParseReport>,
    /// Nights of predefined Ohio test files, if the source had them.
    pub holdout_nights: Option<BTreeSet<(String, NaiveDate)>>,
    pub seed: Option<u64>,
}

fn data_section(input: &InputArgs, base: &DataSection) -> DataSection {
    let mut d = base.clone();
    if let Some(p) = &input.bundle {
        d.source = SourceKind::Bundle;
        d.path = Some(p.clone());
    } else if let Some(p) = &input.ohio {
        d.source = SourceKind::Ohio;
        d.path = Some(p.clone());
    } else if let Some(p) = &input.profile {
        d.source = SourceKind::Synthetic;
        d.profile = p.clone();
    }
    if input.signal.is_some() {
        d.signal_strength = input.signal;
    }
    d
}

pub fn synthetic_profile(d: &DataSection, seed: u64) -> Result<CohortProfile, CliError> {
    let mut p = CohortProfile::by_name(&d.profile, seed).ok_or_else(|| CliError::Schema {
        path: "data.profile".into(),
        message: format!("unknown profile `{}`", d.profile),
    })?;
    if let Some(s) = d.signal_strength {
        p.nh_signal_strength = s;
    }
    if let Some(n) = d.n_patients {
        p.n_patients = n;
    }
    if let Some(n) = d.nights_per_patient {
        p.nights_per_patient = n;
    }
    Ok(p)
}

pub fn load_data(
    d: &DataSection,
    run_seed: u64,
    label_cfg: &nocturne::labeling::LabelConfig,
) -> Result<LoadedData, CliError> {
    let path = || d.path.clone().expect("validated: path present");
    match d.source {
        SourceKind::Synthetic => {
            let seed = d.seed.unwrap_or(run_seed);
            let profile = synthetic_profile(d, seed)?;
            let cohort = generate_cohort(&profile, &d.process).map_err(stage("generate"))?;
            Ok(LoadedData {
                cohort,
                report: None,
                holdout_nights: None,
                seed: Some(seed),
            })
        }
        SourceKind::Bundle => {
            let (cohort, report) = parse_inhouse_bundle(&path()).map_err(stage("ingest"))?;
            Ok(LoadedData {
                cohort,
                report: Some(report),
                holdout_nights: None,
                seed: None,
            })
        }
        SourceKind::Ohio => {
            let p = path();
            if p.is_dir() {
                let split = load_ohio_dir(&p).map_err(stage("ingest"))?;
                let test_labels = label_cohort(&split.test, label_cfg).map_err(stage("label"))?;
                let holdout = test_labels
                    .labels
                    .iter()
                    .map(|l| (l.patient_id.clone(), l.date))
                    .collect();
                let mut cohort = split.train;
                cohort.merge(split.test);
                cohort.canonicalize();
                Ok(LoadedData {
                    cohort,
                    report: Some(split.report),
                    holdout_nights: Some(holdout),
                    seed: None,
                })
            } else {
                let (mut cohort, report) = parse_ohio_xml(&p).map_err(stage("ingest"))?;
                cohort.fill_missing_meta();
                Ok(LoadedData {
                    cohort,
                    report: Some(report),
                    holdout_nights: None,
                    seed: None,
                })
            }
        }
    }
}

fn ranges(cfg: &Config) -> Result<RangeTable, CliError> {
    match &cfg.preprocess.ranges {
        None => Ok(RangeTable::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            RangeTable::default()
                .with_overrides(&text)
                .map_err(|e| CliError::Schema {
                    path: "preprocess.ranges".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn imputation(cfg: &Config) -> Imputation {
    Imputation::parse(&cfg.preprocess.imputation).expect("validated imputation")
}

fn labels(cfg: &Config, cohort: &RawCohort) -> Result<LabelRun, CliError> {
    label_cohort(cohort, &cfg.label).map_err(stage("label"))
}

fn prepare(cfg: &Config, cohort: &RawCohort, run: &LabelRun) -> Result<PreparedNights, CliError> {
    nocturne::features::prepare_nights(cohort, &run.usable(), &ranges(cfg)?, imputation(cfg))
        .map_err(stage("preprocess"))
}

fn feature_options(cfg: &Config) -> FeatureOptions {
    FeatureOptions {
        personalization: cfg.features.personalization,
    }
}

fn build<T: Real>(
    cfg: &Config,
    nights: &PreparedNights,
    set: FeatureSetName,
) -> Result<DesignMatrix<T>, CliError> {
    nights
        .build::<T>(&FeatureSetSpec::get(set), &feature_options(cfg))
        .map(|(dm, _)| dm)
        .map_err(|e| CliError::Stage {
            stage: "features",
            message: format!("{set}: {e}"),
        })
}

fn seeds_map(data_seed: Option<u64>, experiment: Option<&[u64]>) -> BTreeMap<String, Vec<u64>> {
    let mut m = BTreeMap::new();
    if let Some(s) = data_seed {
        m.insert("data".to_string(), vec![s]);
    }
    if let Some(e) = experiment {
        m.insert("experiment".to_string(), e.to_vec());
    }
    m
}

fn write_bundle_files(
    out: &mut OutputDir,
    prefix: &str,
    cohort: &RawCohort,
) -> Result<(), CliError> {
    let s = bundle_to_strings(cohort);
    for (name, text) in [
        ("glucose.csv", &s.glucose),
        ("vitals.csv", &s.vitals),
        ("logbook.csv", &s.logbook),
        ("metadata.csv", &s.metadata),
    ] {
        out.write(&format!("{prefix}{name}"), text)?;
    }
    Ok(())
}

fn generate(
    ctx: &Context,
    profile: Option<&str>,
    signal: Option<f64>,
    ohio_xml: bool,
) -> Result<(), CliError> {
    let input = InputArgs {
        profile: Some(profile.unwrap_or(&ctx.cfg.data.profile).to_string()),
        signal,
        ..Default::default()
    };
    let d = data_section(&input, &ctx.cfg.data);
    let mut data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    data.cohort.canonicalize();
    let mut out = OutputDir::new(&ctx.out);
    write_bundle_files(&mut out, "", &data.cohort)?;
    if ohio_xml {
        for id in data.cohort.patient_ids() {
            out.write(
                &format!("ohio/{id}-ws-training.xml"),
                write_ohio_xml(&data.cohort, &id),
            )?;
        }
    }
    println!(
        "generated {} patients, {} glucose samples into {}",
        data.cohort.meta.len(),
        data.cohort.glucose.len(),
        ctx.out.display()
    );
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, None),
    )?;
    Ok(())
}

fn ingest(ctx: &Context, input: &InputArgs) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let mut data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    data.cohort.canonicalize();
    let mut out = OutputDir::new(&ctx.out);
    write_bundle_files(&mut out, "bundle/", &data.cohort)?;
    let report = data.report.unwrap_or_default();
    out.write(
        "parse_report.json",
        serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
    )?;
    println!(
        "read {} rows, rejected {}",
        report.rows_read,
        report.rows_rejected()
    );
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, None),
    )?;
    Ok(())
}

fn label(ctx: &Context, input: &InputArgs) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let mut out = OutputDir::new(&ctx.out);
    out.write("labels.csv", run.to_csv())?;
    out.write(
        "label_warnings.json",
        serde_json::to_string_pretty(&run.warnings).expect("warnings serialize") + "\n",
    )?;
    let usable = run.usable();
    println!(
        "{} usable nights, {} hypoglycemic, {} warnings",
        usable.len(),
        usable.iter().filter(|l| l.label).count(),
        run.warnings.len()
    );
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, None),
    )?;
    Ok(())
}

fn key_cells<T>(dm: &DesignMatrix<T>, r: usize) -> [String; 3] {
    let (p, d) = &dm.night_keys[r];
    [p.clone(), d.to_string(), (dm.y[r] as u8).to_string()]
}

fn features(
    ctx: &Context,
    input: &InputArgs,
    sets: &[FeatureSetName],
    dump_spec: bool,
) -> Result<(), CliError> {
    let sets: Vec<FeatureSetName> = if sets.is_empty() {
        ctx.cfg.features.sets.clone()
    } else {
        sets.to_vec()
    };
    if dump_spec {
        for set in &sets {
            print!("{}", FeatureSetSpec::get(*set).dump());
        }
        return Ok(());
    }
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let nights = prepare(&ctx.cfg, &data.cohort, &run)?;
    let mut out = OutputDir::new(&ctx.out);
    for set in &sets {
        let (dm, report) = nights
            .build::<f64>(&FeatureSetSpec::get(*set), &feature_options(&ctx.cfg))
            .map_err(stage("features"))?;
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["patient_id".to_string(), "date".into(), "label".into()];
        head.extend(dm.static_names.iter().cloned());
        w.write_record(&head).map_err(stage("features"))?;
        for r in 0..dm.n_rows() {
            let mut rec: Vec<String> = key_cells(&dm, r).to_vec();
            for j in 0..dm.n_static() {
                rec.push(if dm.static_defined[[r, j]] {
                    dm.x_static[[r, j]].to_string()
                } else {
                    String::new()
                });
            }
            w.write_record(&rec).map_err(stage("features"))?;
        }
        out.write(
            &format!("features/{set}_static.csv"),
            w.into_inner().expect("in-memory csv"),
        )?;

        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec![
            "patient_id".to_string(),
            "date".into(),
            "label".into(),
            "step".into(),
        ];
        head.extend(dm.temporal_names.iter().cloned());
        w.write_record(&head).map_err(stage("features"))?;
        for r in 0..dm.n_rows() {
            for k in 0..dm.x_temporal.shape()[1] {
                let mut rec: Vec<String> = key_cells(&dm, r).to_vec();
                rec.push(k.to_string());
                rec.extend((0..dm.n_temporal()).map(|c| dm.x_temporal[[r, k, c]].to_string()));
                w.write_record(&rec).map_err(stage("features"))?;
            }
        }
        out.write(
            &format!("features/{set}_temporal.csv"),
            w.into_inner().expect("in-memory csv"),
        )?;
        out.write(
            &format!("features/{set}_report.json"),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        )?;
        println!(
            "{set}: {} nights x ({} temporal, {} static)",
            dm.n_rows(),
            dm.n_temporal(),
            dm.n_static()
        );
    }
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, None),
    )?;
    Ok(())
}

fn balance(
    ctx: &Context,
    input: &InputArgs,
    set: FeatureSetName,
    ratio: Option<f64>,
    k: Option<usize>,
) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let nights = prepare(&ctx.cfg, &data.cohort, &run)?;
    let dm = build::<f64>(&ctx.cfg, &nights, set)?;
    let all: Vec<usize> = (0..dm.n_rows()).collect();
    let z = Standardizer::fit(&dm, &all).apply(&dm);
    let cfg = AdasynConfig {
        ratio: ratio.unwrap_or(ctx.cfg.experiment.adasyn.ratio),
        k_neighbors: k.unwrap_or(ctx.cfg.experiment.adasyn.k_neighbors),
        seed: ctx.cfg.run.seed,
    };
    let b = balance_design_matrix(&z, &cfg).map_err(stage("balance"))?;
    let (flat, layout) = flatten_for_balance(&b.dm);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec![
        "patient_id".to_string(),
        "date".into(),
        "label".into(),
        "synthetic".into(),
    ];
    head.extend((0..layout.width()).map(|j| layout.column_name(j).expect("column in range")));
    w.write_record(&head).map_err(stage("balance"))?;
    for r in 0..flat.nrows() {
        let mut rec: Vec<String> = key_cells(&b.dm, r).to_vec();
        rec.push((b.synthetic[r] as u8).to_string());
        rec.extend(flat.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(stage("balance"))?;
    }
    let mut out = OutputDir::new(&ctx.out);
    out.write("balanced.csv", w.into_inner().expect("in-memory csv"))?;
    let n_syn = b.synthetic.iter().filter(|&&s| s).count();
    let summary = serde_json::json!({
        "feature_set": set.as_str(),
        "n_original": dm.n_rows(),
        "n_synthetic": n_syn,
        "positives_before": dm.positives(),
        "positives_after": b.dm.positives(),
        "adasyn": cfg,
    });
    out.write(
        "balance.json",
        serde_json::to_string_pretty(&summary).expect("json") + "\n",
    )?;
    println!(
        "{set}: {} rows ({} positive) -> {} rows ({} positive, {} synthetic)",
        dm.n_rows(),
        dm.positives(),
        b.dm.n_rows(),
        b.dm.positives(),
        n_syn
    );
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed.or(Some(ctx.cfg.run.seed)), None),
    )?;
    Ok(())
}

fn train_with<T: Real>(
    ctx: &Context,
    nights: &PreparedNights,
    set: FeatureSetName,
    kind: ModelKind,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let dm = build::<T>(&ctx.cfg, nights, set)?;
    let all: Vec<usize> = (0..dm.n_rows()).collect();
    let st = Standardizer::fit(&dm, &all);
    let fitted = fit_model(kind, &st.apply(&dm), &ctx.cfg.experiment, ctx.cfg.run.seed)
        .map_err(stage("train"))?;
    out.write("model.txt", fitted.model.save())?;
    out.write(
        "standardizer.json",
        serde_json::to_string_pretty(&st).expect("json") + "\n",
    )?;
    let meta = serde_json::json!({
        "model": kind.as_str(),
        "feature_set": set.as_str(),
        "temporal_names": dm.temporal_names,
        "static_names": dm.static_names,
        "n_rows": dm.n_rows(),
        "n_synthetic": fitted.n_synthetic,
        "best_epoch": fitted.best_epoch,
    });
    out.write(
        "model.json",
        serde_json::to_string_pretty(&meta).expect("json") + "\n",
    )?;
    println!("trained {} on {set}: {} nights", kind.label(), dm.n_rows());
    Ok(())
}

fn train(
    ctx: &Context,
    input: &InputArgs,
    set: FeatureSetName,
    kind: ModelKind,
) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let nights = prepare(&ctx.cfg, &data.cohort, &run)?;
    let mut out = OutputDir::new(&ctx.out);
    match ctx.cfg.run.precision {
        Precision::F64 => train_with::<f64>(ctx, &nights, set, kind, &mut out)?,
        Precision::F32 => train_with::<f32>(ctx, &nights, set, kind, &mut out)?,
    }
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, Some(&[ctx.cfg.run.seed])),
    )?;
    Ok(())
}

/// Runs every configured (feature set, model) pair.
pub fn evaluate_nights<T: Real>(
    cfg: &Config,
    nights: &PreparedNights,
) -> Result<Vec<ExperimentResult>, CliError> {
    let mut results = Vec::new();
    for &set in &cfg.features.sets {
        let dm = build::<T>(cfg, nights, set)?;
        for &scorer in &cfg.evaluate.models {
            let r = run_experiment(&dm, set.as_str(), scorer, &cfg.experiment).map_err(|e| {
                CliError::Stage {
                    stage: "evaluate",
                    message: format!("{scorer} on {set}: {e}"),
                }
            })?;
            results.push(r);
        }
    }
    Ok(results)
}

fn write_results(
    out: &mut OutputDir,
    prefix: &str,
    results: &[ExperimentResult],
) -> Result<Vec<SummaryRow>, CliError> {
    let summary = summary_csv(results);
    let rows = parse_summary_csv(&summary).map_err(stage("report"))?;
    out.write(&format!("{prefix}cells.csv"), cells_csv(results))?;
    out.write(&format!("{prefix}summary.csv"), &summary)?;
    out.write(
        &format!("{prefix}table_auroc.txt"),
        text_table(&rows, TableMetric::Auroc),
    )?;
    out.write(
        &format!("{prefix}table_f1.txt"),
        text_table(&rows, TableMetric::F1),
    )?;
    out.write(&format!("{prefix}results.json"), to_json(results) + "\n")?;
    Ok(rows)
}

fn run_evaluate(
    ctx: &Context,
    nights: &PreparedNights,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let results = match ctx.cfg.run.precision {
        Precision::F64 => evaluate_nights::<f64>(&ctx.cfg, nights)?,
        Precision::F32 => evaluate_nights::<f32>(&ctx.cfg, nights)?,
    };
    let rows = write_results(out, "results/", &results)?;
    print!("{}", text_table(&rows, TableMetric::Auroc));
    Ok(())
}

fn evaluate_cmd(ctx: &Context, input: &InputArgs) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let nights = prepare(&ctx.cfg, &data.cohort, &run)?;
    let mut out = OutputDir::new(&ctx.out);
    run_evaluate(ctx, &nights, &mut out)?;
    out.finish(
        &ctx.command_line,
        &ctx.cfg.canonical(),
        seeds_map(data.seed, Some(&ctx.cfg.experiment.seeds)),
    )?;
    Ok(())
}

/// Target nights, source data and the source's predefined split, if any.
pub fn transfer_nights<T: Real>(
    cfg: &Config,
    target: &PreparedNights,
    source: &LoadedData,
) -> Result<TransferResult, CliError> {
    let src_run = labels(cfg, &source.cohort)?;
    let src_nights = prepare(cfg, &source.cohort, &src_run)?;
    let src = source_matrix::<T>(&src_nights).map_err(stage("transfer"))?;
    let split = source.holdout_nights.as_ref().map(|hold| {
        let (mut tr, mut va) = (Vec::new(), Vec::new());
        for (i, key) in src.night_keys.iter().enumerate() {
            if hold.contains(key) {
                va.push(i);
            } else {
                tr.push(i);
            }
        }
        (tr, va)
    });
    let set = cfg.features.transfer_set;
    let dm = build::<T>(cfg, target, set)?;
    run_transfer(
        &src,
        split,
        &dm,
        set.as_str(),
        &cfg.transfer,
        &cfg.experiment,
    )
    .map_err(stage("transfer"))
}

fn run_transfer_stage(
    ctx: &Context,
    target: &PreparedNights,
    source: &LoadedData,
    out: &mut OutputDir,
) -> Result<(), CliError> {
    let r = match ctx.cfg.run.precision {
        Precision::F64 => transfer_nights::<f64>(&ctx.cfg, target, source)?,
        Precision::F32 => transfer_nights::<f32>(&ctx.cfg, target, source)?,
    };
    let mut results = vec![r.transfer.clone()];
    results.extend(r.scratch.clone());
    write_results(out, "transfer/", &results)?;
    let mut frozen = String::from("seed,fold,before,after,intact\n");
    for c in &r.frozen {
        frozen.push_str(&format!(
            "{},{},{},{},{}\n",
            c.seed,
            c.fold,
            c.before,
            c.after,
            (c.before == c.after) as u8
        ));
    }
    out.write("transfer/frozen.csv", frozen)?;
    out.write(
        "transfer/pretrain.json",
        serde_json::to_string_pretty(&r.pretrain).expect("json") + "\n",
    )?;
    let mut line = format!(
        "transfer: {:.3} ± {:.3} AUROC over {} cells; frozen backbone intact: {}\n",
        r.transfer.mean_auroc,
        r.transfer.std_auroc,
        r.transfer.cells.len(),
        r.frozen_intact()
    );
    if let Some(s) = &r.scratch {
        line.push_str(&format!(
            "from-scratch LSTM: {:.3} ± {:.3}; transfer std {} scratch std\n",
            s.mean_auroc,
            s.std_auroc,
            if r.transfer.std_auroc <= s.std_auroc {
                "<="
            } else {
                ">"
            }
        ));
    }
    out.write("transfer/comparison.txt", &line)?;
    print!("{line}");
    if !r.frozen_intact() {
        return Err(CliError::Stage {
            stage: "transfer",
            message: "frozen backbone parameters changed during fine-tuning".into(),
        });
    }
    Ok(())
}

fn transfer_cmd(ctx: &Context, input: &InputArgs, source: &InputArgs) -> Result<(), CliError> {
    let d = data_section(input, &ctx.cfg.data);
    let data = load_data(&d, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let run = labels(&ctx.cfg, &data.cohort)?;
    let nights = prepare(&ctx.cfg, &data.cohort, &run)?;
    let sd = data_section(source, &ctx.cfg.transfer_source);
    let src = load_data(&sd, ctx.cfg.run.seed, &ctx.cfg.label)?;
    let mut out = OutputDir::new(&ctx.out);
    run_transfer_stage(ctx, &nights, &src, &mut out)?;
    let mut seeds = seeds_map(data.seed, Some(&ctx.cfg.experiment.seeds));
    if let Some(s) = src.seed {
        seeds.insert("transfer_source".into(), vec![s]);
    }
    out.finish(&ctx.command_line, &ctx.cfg.canonical(), seeds)?;
    Ok(())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn plot_cmd(ctx: &Context, kind: PlotKind, input: &Path) -> Result<(), CliError> {
    let text = read_input(input)?;
    let mut out = OutputDir::new(&ctx.out);
    match kind {
        PlotKind::PcaScatter => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut meta = Vec::new();
            for rec in rdr.records() {
                let rec = rec.map_err(stage("plot"))?;
                let num = |i: usize| rec.get(i).unwrap_or("").parse::<f64>();
                let label = num(2).map_err(stage("plot"))? != 0.0;
                let synthetic = num(3).map_err(stage("plot"))? != 0.0;
                let values = (4..rec.len())
                    .map(num)
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(stage("plot"))?;
                meta.push((label, synthetic));
                rows.push(values);
            }
            if rows.is_empty() {
                return Err(CliError::Stage {
                    stage: "plot",
                    message: "no rows to plot".into(),
                });
            }
            let width = rows[0].len();
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            let x = Array2::from_shape_vec((meta.len(), width), flat).map_err(stage("plot"))?;
            let (proj, pts) = pca2(&x).map_err(stage("plot"))?;
            let points: Vec<ScatterPoint> = meta
                .iter()
                .enumerate()
                .map(|(i, &(label, synthetic))| ScatterPoint {
                    pc1: pts[[i, 0]],
                    pc2: pts[[i, 1]],
                    label,
                    synthetic,
                })
                .collect();
            out.write(
                "pca_scatter.svg",
                plot::pca_scatter_svg(&points, proj.explained_variance),
            )?;
            out.write("pca_scatter.csv", plot::pca_scatter_csv(&points))?;
            println!("plotted {} points", points.len());
        }
        PlotKind::AurocDistribution => {
            let rows = parse_summary_csv(&text).map_err(stage("plot"))?;
            if rows.is_empty() {
                return Err(CliError::Stage {
                    stage: "plot",
                    message: "no results to plot".into(),
                });
            }
            let mut groups: Vec<Group> = Vec::new();
            for r in rows {
                match groups.iter_mut().find(|g| g.model == r.model) {
                    Some(g) => g.values.push((r.feature_set, r.mean_auroc)),
                    None => groups.push(Group {
                        model: r.model,
                        values: vec![(r.feature_set, r.mean_auroc)],
                    }),
                }
            }
            out.write(
                "auroc_distribution.svg",
                plot::auroc_distribution_svg(&groups),
            )?;
            out.write("auroc_distribution.csv", plot::auroc_points_csv(&groups))?;
            out.write(
                "auroc_distribution_groups.csv",
                plot::auroc_groups_csv(&groups),
            )?;
            println!("plotted {} model groups", groups.len());
        }
    }
    out.finish(&ctx.command_line, &ctx.cfg.canonical(), BTreeMap::new())?;
    Ok(())
}

fn pipeline(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let data = load_data(&cfg.data, cfg.run.seed, &cfg.label)?;
    let run = labels(cfg, &data.cohort)?;
    let nights = prepare(cfg, &data.cohort, &run)?;
    let mut out = OutputDir::new(&ctx.out);
    out.write("labels.csv", run.to_csv())?;
    let mut seeds = seeds_map(data.seed, Some(&cfg.experiment.seeds));
    if cfg.run.stages.contains(&Stage::Evaluate) {
        run_evaluate(ctx, &nights, &mut out)?;
    }
    if cfg.run.stages.contains(&Stage::Transfer) {
        let src = load_data(&cfg.transfer_source, cfg.run.seed, &cfg.label)?;
        if let Some(s) = src.seed {
            seeds.insert("transfer_source".into(), vec![s]);
        }
        run_transfer_stage(ctx, &nights, &src, &mut out)?;
    }
    out.finish(&ctx.command_line, &cfg.canonical(), seeds)?;
    Ok(())
}
