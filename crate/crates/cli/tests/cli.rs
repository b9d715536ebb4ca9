use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use nocturne_cli::run;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nocturne"))
}

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn unknown_model_is_a_schema_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[evaluate]\nmodels = [\"rfc\", \"xgboost\"]\n").unwrap();
    let out = bin()
        .args(["--out", &s(&dir.path().join("o")), "pipeline", &s(&cfg)])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("evaluate.models[1]"), "{err}");
    assert!(err.contains("xgboost"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(["nocturne", "evaluate", "--model", "gbm"]), 2);
    assert_eq!(run(["nocturne", "frobnicate"]), 2);
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(["nocturne", "--out", &s(dir.path()), "pipeline"]), 2);
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(["nocturne", "pipeline", &s(&missing)]), 2);
}

#[test]
fn config_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let status = bin()
        .env("NOCTURNE_CONFIG", repo_config("quick.toml"))
        .args(["--out", &s(&out), "pipeline"])
        .output()
        .unwrap();
    assert_eq!(
        status.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let summary = std::fs::read_to_string(out.join("results/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
}

#[test]
fn pipeline_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = [
        "nocturne",
        "--out",
        &s(&out),
        "pipeline",
        &s(&repo_config("quick.toml")),
    ];
    assert_eq!(run(args), 0);
    let first = snapshot(&out);
    assert_eq!(run(args), 0);
    assert_eq!(snapshot(&out), first);

    // A different worker count changes nothing but the recorded command.
    let other = dir.path().join("other");
    let args2 = [
        "nocturne",
        "--workers",
        "3",
        "--out",
        &s(&other),
        "pipeline",
        &s(&repo_config("quick.toml")),
    ];
    assert_eq!(run(args2), 0);
    let second = snapshot(&other);
    for (k, v) in &first {
        if k != "manifest.json" {
            assert_eq!(second.get(k), Some(v), "{k}");
        }
    }

    let manifest: serde_json::Value = serde_json::from_slice(&first["manifest.json"]).unwrap();
    let outputs = manifest["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), first.len() - 1);
    for o in outputs {
        let path = o["path"].as_str().unwrap();
        let expected = nocturne_cli::manifest::sha256_hex(&first[path]);
        assert_eq!(o["sha256"].as_str().unwrap(), expected, "{path}");
    }
    assert_eq!(manifest["seeds"]["experiment"], serde_json::json!([1]));
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
}

#[test]
fn seed_flag_changes_the_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&a),
            "label",
            "--profile",
            "inhouse-like"
        ]),
        0
    );
    assert_eq!(
        run([
            "nocturne",
            "--seed",
            "8",
            "--out",
            &s(&b),
            "label",
            "--profile",
            "inhouse-like"
        ]),
        0
    );
    assert_ne!(
        std::fs::read(a.join("labels.csv")).unwrap(),
        std::fs::read(b.join("labels.csv")).unwrap()
    );
}

#[test]
fn plot_on_empty_input_fails_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.csv");
    std::fs::write(&input, "").unwrap();
    let out = dir.path().join("plots");
    for kind in ["pca-scatter", "auroc-distribution"] {
        let code = run([
            "nocturne",
            "--out",
            &s(&out),
            "plot",
            "--kind",
            kind,
            "--input",
            &s(&input),
        ]);
        assert_eq!(code, 1, "{kind}");
    }
    let header_only = dir.path().join("header.csv");
    std::fs::write(&header_only, "patient_id,date,label,synthetic,a,b\n").unwrap();
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&out),
            "plot",
            "--kind",
            "pca-scatter",
            "--input",
            &s(&header_only)
        ]),
        1
    );
    assert!(!out.exists() || std::fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn scatter_plots_every_original_and_synthetic_row() {
    let dir = tempfile::tempdir().unwrap();
    let bal = dir.path().join("bal");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&bal),
            "balance",
            "--profile",
            "inhouse-like",
            "--set",
            "REDUCED"
        ]),
        0
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bal.join("balance.json")).unwrap()).unwrap();
    let n_orig = summary["n_original"].as_u64().unwrap() as usize;
    let n_syn = summary["n_synthetic"].as_u64().unwrap() as usize;
    assert!(n_syn > 0);
    assert_eq!(
        summary["positives_after"],
        summary["n_original"].as_u64().unwrap() - summary["positives_before"].as_u64().unwrap()
    );

    let plots = dir.path().join("plots");
    let input = bal.join("balanced.csv");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&plots),
            "plot",
            "--kind",
            "pca-scatter",
            "--input",
            &s(&input)
        ]),
        0
    );
    let svg = std::fs::read_to_string(plots.join("pca_scatter.svg")).unwrap();
    assert_eq!(svg.matches("class=\"point original\"").count(), n_orig);
    assert_eq!(svg.matches("class=\"point synthetic\"").count(), n_syn);
    let csv = std::fs::read_to_string(plots.join("pca_scatter.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + n_orig + n_syn);
}

#[test]
fn auroc_distribution_has_one_group_per_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[features]\nsets = [\"REDUCED\", \"GLUCOSE_NORMAL\"]\n\
         [experiment]\nseeds = [3]\nk_folds = 3\n\
         [experiment.forest]\nn_trees = 10\n\
         [experiment.net]\nhidden = 2\ndense = 2\nconv_filters = 2\n\
         [experiment.train]\nmax_epochs = 1\npatience = 1\n",
    )
    .unwrap();
    let res = dir.path().join("res");
    assert_eq!(
        run(["nocturne", "--out", &s(&res), "pipeline", &s(&cfg)]),
        0
    );
    let summary = std::fs::read_to_string(res.join("results/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 5);

    let plots = dir.path().join("plots");
    let input = res.join("results/summary.csv");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&plots),
            "plot",
            "--kind",
            "auroc-distribution",
            "--input",
            &s(&input)
        ]),
        0
    );
    let svg = std::fs::read_to_string(plots.join("auroc_distribution.svg")).unwrap();
    assert_eq!(svg.matches("class=\"group\"").count(), 5);
    for m in ["rfc", "lstm", "cnn", "daily-lstm", "daily-cnn"] {
        assert!(svg.contains(&format!("data-model=\"{m}\"")), "{m}");
    }
    let groups = std::fs::read_to_string(plots.join("auroc_distribution_groups.csv")).unwrap();
    assert_eq!(groups.lines().count(), 1 + 5);
}

#[test]
fn generate_ingest_label_and_features_chain() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&gen),
            "generate",
            "--profile",
            "ohio-like",
            "--ohio-xml"
        ]),
        0
    );
    assert!(gen.join("ohio").read_dir().unwrap().count() > 0);

    let ing = dir.path().join("ing");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&ing),
            "ingest",
            "--bundle",
            &s(&gen)
        ]),
        0
    );
    for f in ["glucose.csv", "vitals.csv", "logbook.csv", "metadata.csv"] {
        assert_eq!(
            std::fs::read(gen.join(f)).unwrap(),
            std::fs::read(ing.join("bundle").join(f)).unwrap(),
            "{f}"
        );
    }

    let lab = dir.path().join("lab");
    assert_eq!(
        run(["nocturne", "--out", &s(&lab), "label", "--bundle", &s(&gen)]),
        0
    );
    let labels = std::fs::read_to_string(lab.join("labels.csv")).unwrap();
    assert!(labels.lines().count() > 1);

    let feat = dir.path().join("feat");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&feat),
            "features",
            "--profile",
            "inhouse-like",
            "--set",
            "GLUCOSE_NORMAL"
        ]),
        0
    );
    assert!(feat.join("features/GLUCOSE_NORMAL_static.csv").is_file());
    // The Ohio-like cohort has no wearable vitals, so wearable sets fail.
    let none = dir.path().join("none");
    assert_eq!(
        run([
            "nocturne",
            "--out",
            &s(&none),
            "features",
            "--bundle",
            &s(&gen),
            "--set",
            "ALL"
        ]),
        1
    );
    assert!(!none.exists());
}

#[test]
fn train_writes_a_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[experiment.forest]\nn_trees = 5\n").unwrap();
    assert_eq!(
        run([
            "nocturne",
            "--config",
            &s(&cfg),
            "--out",
            &s(&out),
            "train",
            "--profile",
            "inhouse-like",
            "--model",
            "rfc"
        ]),
        0
    );
    let text = std::fs::read_to_string(out.join("model.txt")).unwrap();
    assert!(nocturne::models::TrainedModel::<f64>::load(&text).is_ok());
}

#[test]
fn dump_spec_lists_the_set() {
    let out = bin()
        .args(["features", "--dump-spec", "--set", "MARX2023"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("MARX2023"), "{text}");
}
