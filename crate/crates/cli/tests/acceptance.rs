//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its wall time; the test fails if any criterion fails.

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use ndarray::Array2;
use nocturne::balance::{adasyn, AdasynConfig};
use nocturne::eval::auroc;
use nocturne::features::{daily_aggregates, personalize_glucose, EVENING};
use nocturne::ingest::{
    bundle_to_strings, parse_inhouse_bundle, parse_inhouse_sources, parse_ohio_str, write_ohio_xml,
    BundleSources, GlucoseSample, GlucoseSource, PatientMeta, Provenance, RawCohort,
};
use nocturne::labeling::{label_night, LabelConfig, Trigger};
use nocturne::models::{
    batch_loss_grad, focal_loss, FocalLossParams, Forest, ForestConfig, Init, NetConfig, NetKind,
    NetModel, Network, Rows,
};
use nocturne::preprocess::N_STEPS;
use nocturne::synthgen::{generate_cohort, CohortProfile, GlucoseProcessParams};
use nocturne_cli::run;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

type Criterion<'a> = (u32, &'static str, Duration, Box<dyn Fn() -> Outcome + 'a>);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) + 1e-12
}

// ---------------------------------------------------------------- 1

struct BruteAggregates {
    cv: f64,
    liability_index: f64,
    sd_first_diff: f64,
    daily_min: f64,
    evening_peak: f64,
    evening_low: f64,
    slope: f64,
}

/// Pairwise forms throughout: variance as the mean squared pair difference,
/// slope as the ratio of pairwise cross and time products.
fn pairwise_var(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            acc += (x[i] - x[j]).powi(2);
        }
    }
    acc / (n * (n - 1.0))
}

fn brute_aggregates(v: &[f64], m: &[bool]) -> BruteAggregates {
    let pts: Vec<(f64, f64)> = (0..v.len())
        .filter(|&i| m[i])
        .map(|i| (i as f64, v[i]))
        .collect();
    let g: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let eve: Vec<f64> = (0..v.len())
        .filter(|&i| m[i] && EVENING.contains(&i))
        .map(|i| v[i])
        .collect();
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let diffs: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            num += (pts[j].0 - pts[i].0) * (pts[j].1 - pts[i].1);
            den += (pts[j].0 - pts[i].0).powi(2);
        }
    }
    BruteAggregates {
        cv: pairwise_var(&g).sqrt() / mean,
        liability_index: diffs.iter().map(|d| d * d).sum::<f64>() / 5.0,
        sd_first_diff: if diffs.len() > 1 {
            pairwise_var(&diffs).sqrt()
        } else {
            0.0
        },
        daily_min: g.iter().copied().fold(f64::INFINITY, f64::min),
        evening_peak: eve.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        evening_low: eve.iter().copied().fold(f64::INFINITY, f64::min),
        slope: num / den,
    }
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..1000 {
        let density = rng.gen_range(0.1..1.0);
        let v: Vec<f64> = (0..N_STEPS).map(|_| rng.gen_range(1.0..25.0)).collect();
        let mut m: Vec<bool> = (0..N_STEPS).map(|_| rng.gen_bool(density)).collect();
        m[rng.gen_range(0..EVENING.start)] = true;
        m[rng.gen_range(EVENING)] = true;
        let a = daily_aggregates(&v, &m, EVENING);
        let b = brute_aggregates(&v, &m);
        let pairs = [
            ("cv", a.cv, b.cv),
            ("liability_index", a.liability_index, b.liability_index),
            ("sd_first_diff", a.sd_first_diff, b.sd_first_diff),
            ("daily_min", a.daily_min, b.daily_min),
            ("evening_peak", a.evening_peak, b.evening_peak),
            ("evening_low", a.evening_low, b.evening_low),
            ("linreg_slope", a.linreg_slope, b.slope),
        ];
        for (name, got, want) in pairs {
            check(close(got, want, 1e-9), || {
                format!("case {case}: {name} {got} vs {want}")
            })?;
        }

        let meta = PatientMeta {
            age: Some(rng.gen_range(5.0..70.0)),
            height: Some(rng.gen_range(100.0..200.0)),
            weight: Some(rng.gen_range(20.0..120.0)),
            bmi: Some(rng.gen_range(14.0..35.0)),
            ..PatientMeta::placeholder("p")
        };
        let g = v[0];
        let want = g
            * (1.0
                + meta.age.unwrap()
                + meta.height.unwrap()
                + meta.weight.unwrap()
                + meta.bmi.unwrap());
        let got = personalize_glucose(g, &meta).unwrap();
        check(close(got, want, 1e-9), || {
            format!("case {case}: personalized {got} vs {want}")
        })?;
    }

    let c = daily_aggregates(&[6.3; N_STEPS], &[true; N_STEPS], EVENING);
    check(c.cv == 0.0, || format!("constant cv {}", c.cv))?;
    let h = daily_aggregates(&[4.0f64, 6.0, 5.0], &[true; 3], 0..3);
    check(h.liability_index == 1.0, || {
        format!("liability_index {}", h.liability_index)
    })?;
    let sd4: f64 = (h.sd_first_diff * 1e4).round() / 1e4;
    check(sd4 == 2.1213, || {
        format!("sd_first_diff {}", h.sd_first_diff)
    })?;
    Ok("1000 series, 8 quantities each, plus hand cases".into())
}

// ---------------------------------------------------------------- 2

const NIGHT_START: i64 = 22 * 3600;
const NIGHT_END: i64 = 31 * 3600;

fn draw_reading(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..40) {
        0..=3 => 3.9,
        4 => 3.8999999999,
        5 => rng.gen_range(2.5..3.9),
        _ => rng.gen_range(3.9..9.0),
    }
}

/// Exhaustive run enumeration: every start index, extended while readings
/// stay below threshold and no gap exceeds 1.5 intervals.
fn night_oracle(
    cgm: &[(i64, f64)],
    smbg: &[(i64, f64)],
    interval: i64,
    cfg: &LabelConfig,
) -> Option<(i64, Trigger)> {
    let mut run: Option<i64> = None;
    for i in 0..cgm.len() {
        for j in i..cgm.len() {
            if cgm[j].1 >= cfg.threshold_mmol
                || (j > i && 2 * (cgm[j].0 - cgm[j - 1].0) > 3 * interval)
            {
                break;
            }
            if ((j - i + 1) as i64 * interval) as f64 >= cfg.run_minutes * 60.0 {
                run = Some(run.map_or(cgm[i].0, |r: i64| r.min(cgm[i].0)));
            }
        }
    }
    let point = smbg
        .iter()
        .filter(|s| s.1 < cfg.threshold_mmol)
        .map(|s| s.0)
        .min();
    match (run, point) {
        (Some(r), Some(p)) if p < r => Some((p, Trigger::SmbgPoint)),
        (Some(r), _) => Some((r, Trigger::CgmRun)),
        (None, Some(p)) => Some((p, Trigger::SmbgPoint)),
        (None, None) => None,
    }
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = LabelConfig::default();
    let date = NaiveDate::from_ymd_opt(2022, 5, 10).unwrap();
    let day0 = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp();
    let mut positives = 0;
    for case in 0..10_000 {
        let interval: i64 = if case % 2 == 0 { 300 } else { 900 };
        // Grid from 20:00 to 09:00 so samples fall on both sides of the window.
        let grid: Vec<i64> = (0..)
            .map(|k| 20 * 3600 + k * interval)
            .take_while(|&t| t < 33 * 3600)
            .collect();
        let mut keep = vec![true; grid.len()];
        for _ in 0..rng.gen_range(0..=grid.len() / 5) {
            keep[rng.gen_range(0..grid.len())] = false;
        }
        let mut cgm = Vec::new();
        let mut level = draw_reading(&mut rng);
        for (k, &t) in grid.iter().enumerate() {
            if rng.gen_bool(0.1) {
                level = draw_reading(&mut rng);
            }
            if keep[k] {
                cgm.push((day0 + t, level));
            }
        }
        let mut smbg: Vec<(i64, f64)> = (0..rng.gen_range(0..3))
            .map(|_| {
                (
                    day0 + rng.gen_range(20 * 3600..33 * 3600),
                    draw_reading(&mut rng),
                )
            })
            .collect();
        smbg.sort_by_key(|p| p.0);

        let mut cohort = RawCohort::empty(Provenance::Synthetic);
        cohort
            .meta
            .insert("p".into(), PatientMeta::placeholder("p"));
        for (list, source) in [(&cgm, GlucoseSource::Cgm), (&smbg, GlucoseSource::Smbg)] {
            for &(t, v) in list.iter() {
                cohort.glucose.push(GlucoseSample {
                    patient_id: "p".into(),
                    t_utc: t,
                    tz_offset_min: 0,
                    source,
                    value_mmol_l: v,
                });
            }
        }
        let (label, _) = label_night(&cohort, "p", date, &cfg).map_err(|e| e.to_string())?;

        let inside = |p: &&(i64, f64)| p.0 - day0 >= NIGHT_START && p.0 - day0 < NIGHT_END;
        let cgm_in: Vec<(i64, f64)> = cgm.iter().filter(inside).copied().collect();
        let smbg_in: Vec<(i64, f64)> = smbg.iter().filter(inside).copied().collect();
        let want = night_oracle(&cgm_in, &smbg_in, interval, &cfg);
        let got = label.evidence_t.map(|t| (t, label.trigger));
        check(label.label == want.is_some() && got == want, || {
            format!("night {case} (interval {interval}s): got {got:?}, oracle {want:?}")
        })?;
        positives += label.label as usize;
    }
    Ok(format!("10000 nights agree, {positives} positive"))
}

// ---------------------------------------------------------------- 3

fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut done = 0;
    while done < 1000 {
        let n = rng.gen_range(2..=100);
        let levels = rng.gen_range(1..=8);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0..levels) as f64 / levels as f64)
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.3)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let a = auroc(&scores, &labels).map_err(|e| e.to_string())?;
        let b = brute_auroc(&scores, &labels);
        check((a - b).abs() <= 1e-12, || {
            format!("instance {done}: {a} vs {b}")
        })?;
        let transforms: [fn(f64) -> f64; 3] = [
            |s| (4.0 * s).exp(),
            |s| s.powi(3) * 10.0 - 2.0,
            |s| s / (1.0 + s),
        ];
        for f in transforms {
            let t: Vec<f64> = scores.iter().map(|&s| f(s)).collect();
            let at = auroc(&t, &labels).map_err(|e| e.to_string())?;
            check(at == a, || {
                format!("instance {done}: transformed {at} vs {a}")
            })?;
        }
        done += 1;
    }
    Ok("1000 instances, 3 monotone transforms each".into())
}

// ---------------------------------------------------------------- 4

const H: f64 = 1e-5;

/// Largest relative error over every parameter entry, plus the count of
/// entries sitting on a ReLU kink. A kink shows as one-sided differences
/// that disagree by far more than curvature explains; the analytic value
/// there is a subgradient, so those entries are counted and skipped.
fn max_gradient_error(
    net: &mut Network<f64>,
    rows: &Rows<f64>,
    focal: &FocalLossParams,
) -> (f64, usize, usize) {
    let idx: Vec<usize> = (0..rows.len()).collect();
    let (base, grads) = batch_loss_grad(net, rows, &idx, focal);
    let (mut worst, mut kinks, mut total) = (0.0f64, 0, 0);
    for k in 0..net.params().params.len() {
        for i in 0..net.params().params[k].data.len() {
            let orig = net.params().params[k].data[i];
            net.params_mut().params[k].data[i] = orig + H;
            let up = batch_loss_grad(net, rows, &idx, focal).0;
            net.params_mut().params[k].data[i] = orig - H;
            let down = batch_loss_grad(net, rows, &idx, focal).0;
            net.params_mut().params[k].data[i] = orig;
            total += 1;
            let (fwd, bwd) = ((up - base) / H, (base - down) / H);
            if (fwd - bwd).abs() > 1e-4 && (fwd - bwd).abs() > 0.1 * fwd.abs().max(bwd.abs()) {
                kinks += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * H);
            let a = grads[k][i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7));
        }
    }
    (worst, kinks, total)
}

fn criterion_4() -> Outcome {
    let mut detail = Vec::new();
    for kind in NetKind::ALL {
        let (mut worst, mut kinks, mut total) = (0.0f64, 0, 0);
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(4000 + seed * 7 + kind as u64);
            let (ct, cs) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            let cfg = NetConfig {
                kind,
                hidden: rng.gen_range(2..=3),
                conv_filters: rng.gen_range(2..=3),
                conv_kernel: 3,
                dense: rng.gen_range(2..=3),
                l2_lambda: 1e-2,
                learning_rate: 1e-3,
                batch_size: 4,
            };
            let mut net =
                Network::<f64>::new(cfg, ct, cs, Init::Glorot, seed).map_err(|e| e.to_string())?;
            let rows = Rows {
                temporal: (0..4)
                    .map(|_| {
                        (0..N_STEPS * ct)
                            .map(|_| rng.gen_range(-1.5..1.5))
                            .collect()
                    })
                    .collect(),
                statics: (0..4)
                    .map(|_| (0..cs).map(|_| rng.gen_range(-1.5..1.5)).collect())
                    .collect(),
                y: vec![true, false, false, true],
            };
            for gamma in [0.0, 2.0] {
                let focal = FocalLossParams {
                    alpha_pos: 0.25,
                    gamma,
                };
                let (w, k, t) = max_gradient_error(&mut net, &rows, &focal);
                worst = worst.max(w);
                kinks += k;
                total += t;
            }
        }
        check(worst <= 1e-4, || {
            format!("{kind}: max relative error {worst:.2e}")
        })?;
        check(kinks * 100 <= total, || {
            format!("{kind}: {kinks} of {total} entries on kinks")
        })?;
        detail.push(format!("{kind} {worst:.1e} ({kinks}/{total} on kinks)"));
    }
    Ok(format!(
        "20 configs per kind, max rel error: {}",
        detail.join(", ")
    ))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let p: f64 = rng.gen_range(1e-6..1.0 - 1e-6);
        let label = rng.gen_bool(0.5);
        // alpha_t is alpha_pos for positives and 1 - alpha_pos for negatives.
        let params = FocalLossParams {
            alpha_pos: if label { 1.0 } else { 0.0 },
            gamma: 0.0,
        };
        let bce = if label { -p.ln() } else { -(1.0 - p).ln() };
        worst = worst.max((focal_loss(p, label, &params) - bce).abs());
    }
    check(worst <= 1e-12, || format!("max abs difference {worst:e}"))?;
    Ok(format!("10000 pairs, max abs difference {worst:.1e}"))
}

// ---------------------------------------------------------------- 6

fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(a, b)| b - a).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(a, p)| p - a).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 == 0.0 {
        0.0
    } else {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    };
    ap.iter()
        .zip(&ab)
        .map(|(v, u)| (v - t * u).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (n, d, n_pos) = (500, 200, 77);
    let y: Vec<bool> = (0..n).map(|i| i % 6 == 0 && i / 6 < n_pos).collect();
    let x = Array2::from_shape_fn((n, d), |(i, _)| {
        rng.gen_range(-1.0..1.0) + if y[i] { 0.5 } else { 0.0 }
    });
    let cfg = AdasynConfig {
        k_neighbors: 5,
        ratio: 1.0,
        seed: 66,
    };
    let t0 = Instant::now();
    let b = adasyn(&x, &y, &cfg).map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(5), || {
        format!("adasyn took {elapsed:?}")
    })?;

    let pos = b.y.iter().filter(|&&v| v).count();
    let gap = pos.abs_diff(b.y.len() - pos);
    check(gap <= 1, || format!("class gap {gap}"))?;
    let minority: Vec<Vec<f64>> = (0..n)
        .filter(|&i| y[i])
        .map(|i| x.row(i).to_vec())
        .collect();
    let mut worst = 0.0f64;
    for r in n..b.y.len() {
        let p = b.x.row(r).to_vec();
        let mut best = f64::INFINITY;
        for i in 0..minority.len() {
            for j in i..minority.len() {
                best = best.min(segment_distance(&p, &minority[i], &minority[j]));
            }
        }
        worst = worst.max(best);
    }
    check(worst <= 1e-9, || {
        format!("synthetic row {worst:e} from every minority segment")
    })?;
    let again = adasyn(&x, &y, &cfg).map_err(|e| e.to_string())?;
    check(again == b, || "rerun with the same seed differs".into())?;
    Ok(format!(
        "{} synthetic rows, gap {gap}, max segment distance {worst:.1e}, {elapsed:.2?}",
        b.y.len() - n
    ))
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let y: Vec<bool> = (0..200).map(|i| i % 2 == 0).collect();
    let x = Array2::from_shape_fn((200, 4), |(i, j)| match j {
        0 => (if y[i] { 1.0 } else { -1.0 }) + rng.gen_range(-0.4..0.4),
        _ => rng.gen_range(-1.0..1.0),
    });
    let cfg = ForestConfig {
        n_trees: 100,
        seed: 17,
        ..Default::default()
    };
    let fit = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| Forest::fit(&x, &y, &cfg))
    };
    let forest = fit(4).map_err(|e| e.to_string())?;
    let p = forest.predict_proba(&x).map_err(|e| e.to_string())?;
    let correct = p.iter().zip(&y).filter(|(&p, &y)| (p >= 0.5) == y).count();
    check(correct == 200, || {
        format!("training accuracy {correct}/200")
    })?;
    let bits = |f: &Forest| -> Vec<u64> {
        f.predict_proba(&x)
            .unwrap()
            .iter()
            .map(|v| v.to_bits())
            .collect()
    };
    let reference = bits(&forest);
    for threads in [4, 2, 1] {
        let again = fit(threads).map_err(|e| e.to_string())?;
        check(bits(&again) == reference, || {
            format!("predictions differ with {threads} threads")
        })?;
    }
    Ok("200/200 correct; identical bits across 3 reruns with 4, 2, 1 threads".into())
}

// ---------------------------------------------------------------- 8

/// Data seeds pinned for the end-to-end gate; the first is the seed in
/// `configs/experiment.toml`.
const PINNED_SEEDS: [u64; 5] = [7, 19, 31, 53, 97];

fn summary_rows(path: &Path) -> Result<Vec<Vec<String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn mean_auroc(rows: &[Vec<String>], model: &str, set: &str) -> Result<f64, String> {
    rows.iter()
        .find(|r| r[0] == model && r[1] == set)
        .map(|r| r[2].parse::<f64>().unwrap())
        .ok_or_else(|| format!("no {model}/{set} row"))
}

fn criterion_8(tmp: &Path) -> Outcome {
    let full = tmp.join("full");
    let code = run([
        "nocturne",
        "--out",
        &s(&full),
        "pipeline",
        &s(&repo_config("experiment.toml")),
    ]);
    check(code == 0, || format!("pipeline exited {code}"))?;
    let rows = summary_rows(&full.join("results/summary.csv"))?;
    check(rows.len() == 35, || format!("{} summary rows", rows.len()))?;
    let sets: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    let models: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    check(sets.len() == 7 && models.len() == 5, || {
        format!("{} sets x {} models", sets.len(), models.len())
    })?;
    check(rows.iter().all(|r| r[6] == "15"), || {
        "a cell count other than 15".into()
    })?;

    let labels = std::fs::read_to_string(full.join("labels.csv")).map_err(|e| e.to_string())?;
    let nights: Vec<&str> = labels.lines().skip(1).collect();
    let patients: std::collections::BTreeSet<&str> = nights
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    let positives = nights
        .iter()
        .filter(|l| l.split(',').nth(2) == Some("1"))
        .count();
    check(patients.len() == 11 && nights.len() == 66, || {
        format!("{} patients, {} nights", patients.len(), nights.len())
    })?;

    let mut passes = 0;
    let mut scores = Vec::new();
    for &seed in &PINNED_SEEDS {
        let gated = if seed == PINNED_SEEDS[0] {
            rows.clone()
        } else {
            // Cells are seeded per (model, set, seed, fold), so a reduced run
            // reproduces the full table's row for this cell.
            let cfg = tmp.join(format!("seed{seed}.toml"));
            std::fs::write(
                &cfg,
                format!(
                    "[run]\nseed = {seed}\nstages = [\"evaluate\"]\n\
                     [data]\nsource = \"synthetic\"\nprofile = \"inhouse-like\"\nsignal_strength = 3.0\n\
                     [features]\nsets = [\"GLUCOSE_PERSONALIZED\"]\n\
                     [evaluate]\nmodels = [\"rfc\", \"constant\"]\n\
                     [experiment]\nseeds = [1311, 4242, 90210]\nk_folds = 5\n\
                     [experiment.forest]\nn_trees = 200\n"
                ),
            )
            .map_err(|e| e.to_string())?;
            let out = tmp.join(format!("seed{seed}"));
            let code = run(["nocturne", "--out", &s(&out), "pipeline", &s(&cfg)]);
            check(code == 0, || format!("seed {seed}: pipeline exited {code}"))?;
            summary_rows(&out.join("results/summary.csv"))?
        };
        let rfc = mean_auroc(&gated, "rfc", "GLUCOSE_PERSONALIZED")?;
        let baseline = if seed == PINNED_SEEDS[0] {
            0.5
        } else {
            mean_auroc(&gated, "constant", "GLUCOSE_PERSONALIZED")?
        };
        if rfc >= 0.70 && rfc >= baseline + 0.15 {
            passes += 1;
        }
        scores.push(format!("{seed}:{rfc:.3}"));
    }
    check(passes >= 4, || {
        format!("{passes}/5 seeds pass ({})", scores.join(" "))
    })?;
    Ok(format!(
        "35-row table, {positives}/66 positive nights; RFC+GLUCOSE_PERSONALIZED passes {passes}/5 seeds ({})",
        scores.join(" ")
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9(tmp: &Path) -> Outcome {
    let out = tmp.join("transfer");
    let code = run([
        "nocturne",
        "--out",
        &s(&out),
        "pipeline",
        &s(&repo_config("transfer.toml")),
    ]);
    check(code == 0, || format!("pipeline exited {code}"))?;
    let frozen =
        std::fs::read_to_string(out.join("transfer/frozen.csv")).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<&str>> = frozen
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    check(rows.len() == 15, || format!("{} frozen checks", rows.len()))?;
    check(rows.iter().all(|r| r[2] == r[3] && r[4] == "1"), || {
        "a frozen parameter changed".into()
    })?;
    let cells =
        std::fs::read_to_string(out.join("transfer/cells.csv")).map_err(|e| e.to_string())?;
    let n = cells
        .lines()
        .filter(|l| l.starts_with("transfer-lstm,"))
        .count();
    check(n == 15, || format!("{n} transfer cells"))?;
    let comparison =
        std::fs::read_to_string(out.join("transfer/comparison.txt")).map_err(|e| e.to_string())?;
    Ok(format!(
        "15 cells, backbone bit-identical; {}",
        comparison.trim().replace('\n', "; ")
    ))
}

// ---------------------------------------------------------------- 10

fn mutate(rng: &mut ChaCha8Rng, data: &[u8]) -> Vec<u8> {
    let mut v = data.to_vec();
    for _ in 0..rng.gen_range(1..8) {
        if v.is_empty() {
            v.push(rng.gen());
            continue;
        }
        let i = rng.gen_range(0..v.len());
        match rng.gen_range(0..6) {
            0 => v[i] = rng.gen(),
            1 => {
                v.remove(i);
            }
            2 => v.insert(
                i,
                *b"<>\",\n=/-.0123456789e"
                    .get(rng.gen_range(0..21))
                    .unwrap_or(&b'x'),
            ),
            3 => v.truncate(i),
            4 => {
                let end = (i + rng.gen_range(1..64)).min(v.len());
                let chunk = v[i..end].to_vec();
                v.splice(i..i, chunk);
            }
            _ => {
                let j = rng.gen_range(0..v.len());
                v.swap(i, j);
            }
        }
    }
    v
}

fn criterion_10() -> Outcome {
    let (bundle, _) =
        parse_inhouse_bundle(&fixtures().join("bundle")).map_err(|e| e.to_string())?;
    let xml = std::fs::read_to_string(fixtures().join("ohio/559-ws-training.xml"))
        .map_err(|e| e.to_string())?;

    // Round trips on the hand fixtures and on generated cohorts.
    let mut valid = vec![bundle.clone()];
    for profile in ["inhouse-like", "ohio-like"] {
        let mut p = CohortProfile::by_name(profile, 10).unwrap();
        p.n_patients = 2;
        p.nights_per_patient = 2;
        let mut c =
            generate_cohort(&p, &GlucoseProcessParams::default()).map_err(|e| e.to_string())?;
        c.canonicalize();
        valid.push(c);
    }
    for c in &mut valid {
        // Provenance records where a cohort came from, not what the files say.
        c.provenance = Provenance::InhouseCsv;
        let text = bundle_to_strings(c);
        let (again, _) = parse_inhouse_sources(&text).map_err(|e| e.to_string())?;
        check(again == *c, || {
            "bundle round trip changed the cohort".into()
        })?;
    }
    let (mut ohio, _) = parse_ohio_str(&xml).map_err(|e| e.to_string())?;
    ohio.canonicalize();
    let written = write_ohio_xml(&ohio, "559");
    let (mut back, _) = parse_ohio_str(&written).map_err(|e| e.to_string())?;
    back.canonicalize();
    check(
        write_ohio_xml(&back, "559") == written && back.vitals == ohio.vitals,
        || "ohio round trip differs".into(),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let src = bundle_to_strings(&bundle);
    let files = [&src.glucose, &src.vitals, &src.logbook, &src.metadata];
    let mut accepted = [0usize; 2];
    for i in 0..10_000 {
        let which = i % 4;
        let mut parts: Vec<Vec<u8>> = files.iter().map(|f| f.as_bytes().to_vec()).collect();
        parts[which] = mutate(&mut rng, &parts[which]);
        let sources = BundleSources {
            glucose: parts[0].clone(),
            vitals: parts[1].clone(),
            logbook: parts[2].clone(),
            metadata: parts[3].clone(),
        };
        let r = catch_unwind(AssertUnwindSafe(|| parse_inhouse_sources(&sources).is_ok()));
        check(r.is_ok(), || {
            format!("bundle parser panicked on mutation {i}")
        })?;
        accepted[0] += r.unwrap() as usize;

        let bytes = mutate(&mut rng, xml.as_bytes());
        let text = String::from_utf8_lossy(&bytes);
        let r = catch_unwind(AssertUnwindSafe(|| parse_ohio_str(&text).is_ok()));
        check(r.is_ok(), || {
            format!("ohio parser panicked on mutation {i}")
        })?;
        accepted[1] += r.unwrap() as usize;
    }
    Ok(format!(
        "{} valid round trips; 10000 mutations per parser, no panics ({} / {} parsed)",
        valid.len() + 1,
        accepted[0],
        accepted[1]
    ))
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let criteria: Vec<Criterion> = vec![
        (
            1,
            "feature oracle",
            Duration::from_secs(5),
            Box::new(criterion_1),
        ),
        (
            2,
            "labeling oracle",
            Duration::from_secs(10),
            Box::new(criterion_2),
        ),
        (
            3,
            "auroc oracle",
            Duration::from_secs(10),
            Box::new(criterion_3),
        ),
        (
            4,
            "gradient checks",
            Duration::from_secs(120),
            Box::new(criterion_4),
        ),
        (
            5,
            "focal reduces to cross-entropy",
            Duration::MAX,
            Box::new(criterion_5),
        ),
        (6, "adasyn contracts", Duration::MAX, Box::new(criterion_6)),
        (7, "forest sanity", Duration::MAX, Box::new(criterion_7)),
        (
            8,
            "synthetic end-to-end",
            Duration::from_secs(600),
            Box::new(|| criterion_8(tmp.path())),
        ),
        (
            9,
            "transfer contracts",
            Duration::from_secs(600),
            Box::new(|| criterion_9(tmp.path())),
        ),
        (
            10,
            "parser robustness",
            Duration::MAX,
            Box::new(criterion_10),
        ),
    ];
    let mut failed = Vec::new();
    for (id, name, budget, f) in &criteria {
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = t0.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > *budget => Err(format!("over the {budget:?} budget")),
            o => o,
        };
        // Written to the handle directly so the lines show even when the
        // harness captures output of passing tests.
        let mut stdout = std::io::stdout().lock();
        match &outcome {
            Ok(detail) => {
                writeln!(stdout, "PASS {id:>2} {name} [{elapsed:.2?}]: {detail}").unwrap()
            }
            Err(why) => {
                writeln!(stdout, "FAIL {id:>2} {name} [{elapsed:.2?}]: {why}").unwrap();
                failed.push(*id);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
