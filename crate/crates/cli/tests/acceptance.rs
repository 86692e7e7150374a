//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any fails.
//!
//! `DRAWPASS_ACCEPTANCE=name1,name2` runs a subset. `DRAWPASS_DATA_DIR`
//! enables the optional e-BioDigit track (expects `<dir>/ebiodigit`).

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use drawpass_core::align::{dtw, sw_dtw, DtwConfig};
use drawpass_core::data::{
    export_dataset, generate_synthetic, import_dataset, make_split, Dataset, FormatSpec, SplitSpec,
    SynthConfig,
};
use drawpass_core::evalproto::{compute_eer, run_protocol, ProtocolConfig, Scorer, ScorerKind};
use drawpass_core::pairs::{
    build_training_pairs, pair_inputs, prepare_dataset, PairPlan, Pairing, PreparedSample,
};
use drawpass_core::rnn::{
    loss_and_gradients, loss_with_params, train_from, SiameseArch, SiameseModel, SiameseParams,
    TrainConfig, TrainState,
};
use drawpass_core::TimeFunctionSet;
use drawpass_oracles::{
    brute_force_dtw, brute_force_eer, enumerate_paths, min_over_paths, squared_cost, windowed_cost,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn all_sequences(max_len: usize) -> Vec<Vec<f64>> {
    let mut out = vec![];
    for len in 1..=max_len {
        for code in 0..3usize.pow(len as u32) {
            let mut c = code;
            out.push(
                (0..len)
                    .map(|_| {
                        let v = (c % 3) as f64;
                        c /= 3;
                        v
                    })
                    .collect(),
            );
        }
    }
    out
}

fn dtw_oracle_equivalence() -> Outcome {
    let plain = DtwConfig::plain();
    let sw = DtwConfig::default();
    let wts = sw.neighbor_weights.clone();
    // The triangular weights are multiples of 1/9. Scaled to integers the
    // oracle's sums are exact, so its ties are true ties.
    let int_wts: Vec<f64> = wts.iter().map(|w| (w * 9.0).round()).collect();
    ensure(
        int_wts
            .iter()
            .zip(&wts)
            .all(|(k, w)| (k / 9.0 - w).abs() < 1e-15),
        || format!("unexpected default window weights {wts:?}"),
    )?;

    // The branch-and-bound search is first tied to the flat path list, then
    // used for the full range where listing every path per pair is too slow.
    let short = all_sequences(3);
    for a in &short {
        for b in &short {
            let base = squared_cost(&[a.clone()], &[b.clone()]);
            let paths = enumerate_paths(a.len(), b.len());
            for cost in [base.clone(), windowed_cost(&base, &wts)] {
                let (acc, w) = min_over_paths(&paths, &cost, [1.0; 3]);
                let bb = brute_force_dtw(&cost, [1.0; 3]);
                // sums run in opposite directions, so compare up to rounding
                ensure((acc / w - bb.normalized()).abs() <= 1e-12, || {
                    format!("oracles disagree on {a:?} vs {b:?}")
                })?;
            }
        }
    }

    let seqs = all_sequences(6);
    let mut pairs = 0usize;
    for a in &seqs {
        for b in &seqs {
            let base = squared_cost(&[a.clone()], &[b.clone()]);
            let want = brute_force_dtw(&base, [1.0; 3]).normalized();
            let got = dtw(a, b, &plain)
                .map_err(|e| e.to_string())?
                .normalized_distance;
            ensure((got - want).abs() <= 1e-12, || {
                format!("dtw {a:?} vs {b:?}: {got} != {want}")
            })?;

            let want =
                brute_force_dtw(&windowed_cost(&base, &int_wts), [1.0; 3]).normalized() / 9.0;
            let got = sw_dtw(a, b, &sw)
                .map_err(|e| e.to_string())?
                .normalized_distance;
            ensure((got - want).abs() <= 1e-12, || {
                format!("sw-dtw {a:?} vs {b:?}: {got} != {want}")
            })?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} sequence pairs, DTW and SW-DTW (L = 2)"))
}

fn dtw_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfgs = [
        DtwConfig::plain(),
        DtwConfig::default(),
        DtwConfig::with_window(1),
    ];
    let n = 1500;
    for k in 0..n {
        let la = rng.random_range(1..40);
        let lb = rng.random_range(1..40);
        let a: Vec<f64> = (0..la).map(|_| rng.random_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..lb).map(|_| rng.random_range(-5.0..5.0)).collect();
        for cfg in &cfgs {
            let run = |x: &[f64], y: &[f64]| -> Result<f64, String> {
                let p = if cfg.window_halfwidth == 0 {
                    dtw(x, y, cfg)
                } else {
                    sw_dtw(x, y, cfg)
                };
                p.map(|p| p.normalized_distance).map_err(|e| e.to_string())
            };
            let self_d = run(&a, &a)?;
            ensure(self_d == 0.0, || format!("case {k}: D(A,A) = {self_d}"))?;
            let (ab, ba) = (run(&a, &b)?, run(&b, &a)?);
            ensure((ab - ba).abs() <= 1e-12 * (1.0 + ab.abs()), || {
                format!("case {k}: D(A,B) = {ab}, D(B,A) = {ba}")
            })?;
        }
    }
    Ok(format!(
        "{n} random sequence pairs x {} configurations",
        cfgs.len()
    ))
}

fn random_tf(rng: &mut ChaCha8Rng, k: usize) -> TimeFunctionSet {
    TimeFunctionSet::from_channels(
        (0..21)
            .map(|_| (0..k).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect(),
    )
    .unwrap()
}

fn gradient_check() -> Outcome {
    let model = SiameseModel::new(SiameseArch::reduced(21, 4, 8, 16), 21, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch: Vec<_> = (0..3)
        .map(|i| {
            let k = 4 + i;
            drawpass_core::rnn::PairExample::new(
                random_tf(&mut rng, k),
                random_tf(&mut rng, k),
                i % 2 == 0,
            )
            .unwrap()
        })
        .collect();
    let (_, grad) = loss_and_gradients(&model, &batch).map_err(|e| e.to_string())?;
    let h = 1e-5;
    let names = SiameseParams::tensor_names();
    let analytic = grad.tensors();
    let mut worst = 0.0f64;
    for (t, g) in analytic.iter().enumerate() {
        let (mut diff2, mut na, mut nn) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let mut up = model.params.clone();
            up.tensors_mut()[t][i] += h;
            let mut down = model.params.clone();
            down.tensors_mut()[t][i] -= h;
            let num = (loss_with_params(&up, &batch).unwrap()
                - loss_with_params(&down, &batch).unwrap())
                / (2.0 * h);
            diff2 += (num - g[i]).powi(2);
            na += g[i] * g[i];
            nn += num * num;
        }
        let rel = diff2.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-300);
        ensure(na > 0.0, || format!("{}: zero gradient", names[t]))?;
        ensure(rel < 1e-4, || {
            format!("{}: relative error {rel:e}", names[t])
        })?;
        worst = worst.max(rel);
    }
    Ok(format!(
        "{} tensors, worst relative error {worst:.1e}",
        analytic.len()
    ))
}

/// Development split shared by the synthetic benchmarks.
fn bench_split() -> SplitSpec {
    SplitSpec::Fraction {
        dev_fraction: 0.6,
        required_sessions: vec![1, 2],
        train_fraction: 0.8,
    }
}

struct Prepared {
    train: Vec<PreparedSample>,
    val: Vec<PreparedSample>,
    eval: Vec<PreparedSample>,
}

fn prepare_split(ds: &Dataset, seed: u64) -> Result<Prepared, String> {
    let split = make_split(ds, &bench_split(), seed).map_err(|e| e.to_string())?;
    let p = |u: &[String]| prepare_dataset(ds, Some(u), 100.0).map_err(|e| e.to_string());
    Ok(Prepared {
        train: p(&split.train)?,
        val: p(&split.val)?,
        eval: p(&split.eval)?,
    })
}

fn train_model(
    prep: &Prepared,
    pairing: &Pairing,
    arch: SiameseArch,
    plan: &PairPlan,
    cfg: &TrainConfig,
) -> Result<(SiameseModel, drawpass_core::rnn::TrainingLog), String> {
    let tp = build_training_pairs(&prep.train, pairing, plan).map_err(|e| e.to_string())?;
    let vp = build_training_pairs(&prep.val, pairing, plan).map_err(|e| e.to_string())?;
    let out = train_from(
        TrainState::fresh(SiameseModel::new(arch, 11, cfg.init_std)),
        &tp,
        &vp,
        cfg,
    )
    .map_err(|e| e.to_string())?;
    Ok((out.best.model, out.log))
}

/// The easy synthetic benchmark used by the training smoke test.
pub fn smoke_config() -> SynthConfig {
    SynthConfig::easy(7)
}

fn training_smoke_benchmark() -> Outcome {
    let t0 = Instant::now();
    let ds = generate_synthetic(&smoke_config()).map_err(|e| e.to_string())?;
    let prep = prepare_split(&ds, 1)?;
    let cfg = TrainConfig {
        epochs: 30,
        target_val_eer: Some(0.05),
        ..TrainConfig::default()
    };
    let plan = PairPlan {
        max_genuine_per_cell: Some(2),
        impostors_per_genuine: 1,
        seed: 3,
    };
    let (model, log) = train_model(
        &prep,
        &Pairing::aligned(),
        SiameseArch::standard(),
        &plan,
        &cfg,
    )?;
    let elapsed = t0.elapsed();
    let best = log
        .records
        .iter()
        .filter_map(|r| r.val_eer.map(|e| (r.epoch, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("no validation EER recorded")?;
    ensure(best.1 < 0.05, || {
        format!(
            "best validation EER {:.2}% at epoch {}",
            100.0 * best.1,
            best.0
        )
    })?;
    ensure(elapsed < Duration::from_secs(15 * 60), || {
        format!("took {:.0} s", elapsed.as_secs_f64())
    })?;

    // Held-out users: a sample matches itself better than another user's
    // sample of the same character.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut wins, trials) = (0usize, 200usize);
    for _ in 0..trials {
        let a = &prep.eval[rng.random_range(0..prep.eval.len())];
        let others: Vec<&PreparedSample> = prep
            .eval
            .iter()
            .filter(|s| s.key.label == a.key.label && s.key.user_id != a.key.user_id)
            .collect();
        let b = others[rng.random_range(0..others.len())];
        let score = |x: &TimeFunctionSet, y: &TimeFunctionSet| -> Result<f64, String> {
            let (p, q) = pair_inputs(x, y, &Pairing::aligned()).map_err(|e| e.to_string())?;
            model.score(&p, &q).map_err(|e| e.to_string())
        };
        wins += usize::from(score(&a.tf, &a.tf)? > score(&a.tf, &b.tf)?);
    }
    ensure(wins * 100 >= 95 * trials, || {
        format!("self-match won only {wins}/{trials} triplets")
    })?;
    Ok(format!(
        "validation EER {:.2}% at epoch {} in {:.0} s; self-match wins {wins}/{trials}",
        100.0 * best.1,
        best.0,
        elapsed.as_secs_f64()
    ))
}

/// The moderately hard synthetic benchmark used for the method ordering.
pub fn moderate_config() -> SynthConfig {
    SynthConfig::moderate(7)
}

fn method_ordering() -> Outcome {
    let ds = generate_synthetic(&moderate_config()).map_err(|e| e.to_string())?;
    let prep = prepare_split(&ds, 1)?;
    let mut proto = ProtocolConfig::basic(ScorerKind::Dtw);
    proto.split = bench_split();
    proto.seed = 1;
    let eer_of = |kind: ScorerKind, scorer: Scorer| -> Result<f64, String> {
        let cfg = ProtocolConfig {
            scorer: kind,
            ..proto.clone()
        };
        run_protocol(&ds, &scorer, &cfg)
            .map(|r| r.average_eer)
            .map_err(|e| e.to_string())
    };
    let d = eer_of(
        ScorerKind::Dtw,
        Scorer::build(ScorerKind::Dtw, None).unwrap(),
    )?;
    let s = eer_of(
        ScorerKind::SwDtw,
        Scorer::build(ScorerKind::SwDtw, None).unwrap(),
    )?;
    let plan = PairPlan {
        max_genuine_per_cell: None,
        impostors_per_genuine: 1,
        seed: 3,
    };
    let cfg = TrainConfig {
        epochs: 30,
        early_stop_patience: 5,
        ..TrainConfig::default()
    };
    let arch = SiameseArch::reduced(21, 8, 16, 32);
    let (rnn, _) = train_model(&prep, &Pairing::Linear, arch, &plan, &cfg)?;
    let r = eer_of(ScorerKind::Rnn, Scorer::Rnn(Arc::new(rnn)))?;
    let (ta, _) = train_model(&prep, &Pairing::aligned(), arch, &plan, &cfg)?;
    let t = eer_of(
        ScorerKind::TaRnn,
        Scorer::TaRnn {
            model: Arc::new(ta),
            dtw: DtwConfig::default(),
        },
    )?;
    let summary = format!(
        "TA-RNN {:.2}%, RNN {:.2}%, SW-DTW {:.2}%, DTW {:.2}%",
        100.0 * t,
        100.0 * r,
        100.0 * s,
        100.0 * d
    );
    // RNN has to match at least one of the two alignment baselines
    ensure(t <= r && r <= d.max(s) && d - t >= 0.02, || summary.clone())?;
    Ok(summary)
}

fn fusion_behavior() -> Outcome {
    let seeds = 20;
    let mut violations = vec![];
    for seed in 0..seeds {
        let ds = generate_synthetic(&SynthConfig {
            n_users: 30,
            ..SynthConfig::moderate(seed)
        })
        .map_err(|e| e.to_string())?;
        let mut cfg = ProtocolConfig::basic(ScorerKind::Dtw);
        cfg.seed = seed;
        let report = run_protocol(&ds, &Scorer::build(ScorerKind::Dtw, None).unwrap(), &cfg)
            .map_err(|e| e.to_string())?;
        let eers: Vec<f64> = (1..=4).map(|l| report.fused_eer(l).unwrap()).collect();
        for l in 1..4 {
            if eers[l] > eers[l - 1] {
                violations.push(format!(
                    "seed {seed}: {} -> {} characters ({:.3} -> {:.3})",
                    l,
                    l + 1,
                    eers[l - 1],
                    eers[l]
                ));
            }
        }
    }
    let detail = format!(
        "{} increase(s) over {seeds} seeds x 3 steps (DTW scorer)",
        violations.len()
    );
    ensure(violations.len() <= 2, || {
        format!("{detail}: {}", violations.join("; "))
    })?;
    Ok(detail)
}

fn eer_estimator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cases = 2000;
    for k in 0..cases {
        let ng = rng.random_range(1..40);
        let ni = rng.random_range(1..40);
        let coarse = k % 2 == 0;
        let mut draw = |shift: f64| -> f64 {
            if coarse {
                rng.random_range(0..8) as f64 + shift.round()
            } else {
                rng.random_range(-2.0..2.0) + shift
            }
        };
        let g: Vec<f64> = (0..ng).map(|_| draw(1.0)).collect();
        let i: Vec<f64> = (0..ni).map(|_| draw(0.0)).collect();
        let got = compute_eer(&g, &i).map_err(|e| e.to_string())?;
        let (eer, thr) = brute_force_eer(&g, &i);
        ensure(got.eer == eer && got.threshold == thr, || {
            format!(
                "case {k}: ({}, {}) vs brute force ({eer}, {thr})",
                got.eer, got.threshold
            )
        })?;
    }
    Ok(format!("{cases} random score lists, exact"))
}

fn protocol_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ds_path = dir.path().join("bench.jsonl");
    let ds = generate_synthetic(&SynthConfig {
        n_users: 12,
        ..SynthConfig::moderate(3)
    })
    .map_err(|e| e.to_string())?;
    export_dataset(&ds, &ds_path).map_err(|e| e.to_string())?;
    let run = |name: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let cli = drawpass_cli::Cli::try_parse_from([
            "drawpass",
            "eval",
            "--dataset",
            ds_path.to_str().unwrap(),
            "--scorer",
            "sw-dtw",
            "--password-lengths",
            "1..4",
            "--report-out",
            out.to_str().unwrap(),
        ])
        .map_err(|e| e.to_string())?;
        ensure(drawpass_cli::run(cli) == 0, || "eval failed".into())?;
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let (a, b) = (run("a.json")?, run("b.json")?);
    ensure(a == b, || "reports differ".into())?;
    Ok(format!("two runs, {} identical bytes", a.len()))
}

/// Optional: DTW on e-BioDigit with its published user split, when the
/// data is present. Returns `None` to skip.
fn ebiodigit_track() -> Option<Outcome> {
    let base = std::env::var_os("DRAWPASS_DATA_DIR")?;
    let dir = Path::new(&base).join("ebiodigit");
    if !dir.exists() {
        return None;
    }
    Some((|| {
        let report = import_dataset(&dir, &FormatSpec::ebiodigit()).map_err(|e| e.to_string())?;
        let mut cfg = ProtocolConfig::basic(ScorerKind::Dtw);
        cfg.split = SplitSpec::ebiodigit();
        let r = run_protocol(
            &report.dataset,
            &Scorer::build(ScorerKind::Dtw, None).unwrap(),
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        Ok(format!(
            "{} samples, DTW average EER {:.2}%, 4-character fused {:.2}%",
            report.dataset.len(),
            100.0 * r.average_eer,
            100.0 * r.fused_eer(4).unwrap_or(f64::NAN)
        ))
    })())
}

fn main() {
    let only: Option<Vec<String>> = std::env::var("DRAWPASS_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("dtw_oracle_equivalence", dtw_oracle_equivalence),
        ("dtw_identities", dtw_identities),
        ("gradient_check", gradient_check),
        ("training_smoke_benchmark", training_smoke_benchmark),
        ("method_ordering", method_ordering),
        ("fusion_behavior", fusion_behavior),
        ("eer_estimator", eer_estimator),
        ("protocol_determinism", protocol_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.iter().any(|x| x == name)) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if only
        .as_ref()
        .is_none_or(|o| o.iter().any(|x| x == "ebiodigit"))
    {
        match ebiodigit_track() {
            None => println!("SKIP ebiodigit: no data under $DRAWPASS_DATA_DIR/ebiodigit"),
            Some(Ok(d)) => println!("INFO ebiodigit: {d}"),
            Some(Err(d)) => println!("INFO ebiodigit: could not run ({d})"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criterion/criteria failed");
        std::process::exit(1);
    }
}
