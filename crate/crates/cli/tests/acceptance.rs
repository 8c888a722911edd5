//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! cargo test --release -p fairsvdd-cli --test acceptance

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fairsvdd::fair::{adversarial_gradients, Discriminator};
use fairsvdd::metrics::{auc, evaluate, p_rule, spearman, wasserstein1, Cut};
use fairsvdd::probe::{probe_accuracy, ProbeConfig};
use fairsvdd::rng::{stream_rng, Stream};
use fairsvdd::{
    score, standardize, synth_biased, train_fair_svdd, train_svdd, Dataset, DenseNet, Matrix,
    SynthSpec, TrainConfig,
};
use fairsvdd_oracles::{auc_pairwise, central_differences, relative_error, wasserstein_coupling};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

// 1. Gradients of L_SVDD, L_D and L_Adv against central differences.

fn random_stack(rng: &mut impl Rng, index: usize) -> (DenseNet, Discriminator, Matrix, Vec<u8>, Vec<f64>) {
    loop {
        let d = rng.random_range(2..=5);
        let enc: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=6)).collect();
        let disc: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(2..=6)).collect();
        let encoder = DenseNet::new(d, &enc, false, rng).unwrap();
        let e = *enc.last().unwrap();
        let discriminator = Discriminator::new(e, &disc, index % 2 == 0, rng.random()).unwrap();
        if encoder.num_params() + discriminator.net.num_params() > 200 {
            continue;
        }
        let m = rng.random_range(6..=12);
        let x = Matrix::from_vec(m, d, (0..m * d).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let mut z: Vec<u8> = (0..m).map(|i| (i % 2) as u8).collect();
        z.rotate_left(rng.random_range(0..m));
        let center = (0..e).map(|_| rng.random_range(-0.5..0.5)).collect();
        return (encoder, discriminator, x, z, center);
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(1, Stream::Probe, 100);
    let (h, floor) = (1e-5, 1e-6);
    let mut worst: f64 = 0.0;
    let mut max_params = 0;
    for i in 0..20 {
        let (mut encoder, mut disc, x, z, center) = random_stack(&mut rng, i);
        max_params = max_params.max(encoder.num_params() + disc.net.num_params());
        let (alpha, lambda) = (rng.random_range(0.0..0.1), rng.random_range(0.1..2.0));
        let g = adversarial_gradients(&encoder, &center, &disc, &x, &z, alpha, lambda).unwrap();
        let p = encoder.params();
        for (which, analytic) in [g.encoder_svdd.flatten(), g.encoder_disc.flatten(), g.encoder_adv.flatten()]
            .into_iter()
            .enumerate()
        {
            let numeric = central_differences(&p, h, |q| {
                encoder.set_params(q).unwrap();
                let b = adversarial_gradients(&encoder, &center, &disc, &x, &z, alpha, lambda).unwrap();
                [b.l_svdd, b.l_d, b.l_adv][which]
            });
            encoder.set_params(&p).unwrap();
            for (a, n) in analytic.iter().zip(&numeric) {
                worst = worst.max(relative_error(*a, *n, floor));
            }
        }
        let p = disc.net.params();
        let analytic = g.discriminator.flatten();
        let numeric = central_differences(&p, h, |q| {
            disc.net.set_params(q).unwrap();
            adversarial_gradients(&encoder, &center, &disc, &x, &z, alpha, lambda).unwrap().l_d
        });
        disc.net.set_params(&p).unwrap();
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n, floor));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst < 1e-4 && within(elapsed, 10.0),
        format!(
            "max relative error {worst:.2e} (< 1e-4) over 20 stacks of at most {max_params} parameters, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// 2. Metric oracles.

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = stream_rng(2, Stream::Probe, 100);
    let mut w_err: f64 = 0.0;
    for _ in 0..200 {
        let p: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let q: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(-5.0..5.0)).collect();
        w_err = w_err.max((wasserstein1(&p, &q).unwrap() - wasserstein_coupling(&p, &q)).abs());
    }
    let mut auc_err: f64 = 0.0;
    for _ in 0..200 {
        let mut labels: Vec<u8> = (0..30).map(|_| u8::from(rng.random_bool(0.3))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let scores: Vec<f64> = (0..30).map(|_| f64::from(rng.random_range(0..12)) / 4.0).collect();
        auc_err = auc_err.max((auc(&scores, &labels).unwrap() - auc_pairwise(&scores, &labels)).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        w_err <= 1e-9 && auc_err <= 1e-12 && within(elapsed, 5.0),
        format!(
            "wasserstein1 max error {w_err:.1e} (<= 1e-9), auc max error {auc_err:.1e} (<= 1e-12), {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// 3. 27 + 27 toy with positive rates 6/27 and 2/27 at t = 8.

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut scores = Vec::new();
    let mut z = Vec::new();
    for (g, above) in [(0u8, 6), (1u8, 2)] {
        for i in 0..27 {
            scores.push(if i < above { 9.0 + i as f64 } else { i as f64 * 0.25 });
            z.push(g);
        }
    }
    let p = p_rule(&scores, &z, 8.0).unwrap();
    let elapsed = start.elapsed();
    outcome(
        (p - 1.0 / 3.0).abs() <= 1e-9 && within(elapsed, 1.0),
        format!("p_rule {p:.12} (1/3 ± 1e-9), {:.3}s", elapsed.as_secs_f64()),
    )
}

// 4. λ = 0 reduces to plain Deep SVDD with the K + T budget.

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let spec = SynthSpec {
        n_per_group: 1000,
        train_minority_ratio: 1.0,
        n_dims: 10,
        ..SynthSpec::default()
    };
    let (train, _) = synth_biased(&spec).unwrap();
    let (train, _, _) = standardize(&train, &[]).unwrap();
    let cfg = TrainConfig {
        lambda: 0.0,
        ..TrainConfig::default()
    };
    let fair = train_fair_svdd(&train, &cfg).unwrap();
    let plain = train_svdd(&train, &cfg.matched_baseline()).unwrap();
    let identical = fair.svdd.encoder.params().iter().map(|v| v.to_bits()).eq(plain
        .encoder
        .params()
        .iter()
        .map(|v| v.to_bits()))
        && fair.svdd.center == plain.center;
    let elapsed = start.elapsed();
    outcome(
        identical && within(elapsed, 60.0),
        format!(
            "n={} d=10, encoders {}, {:.1}s",
            train.len(),
            if identical { "bitwise identical" } else { "differ" },
            elapsed.as_secs_f64()
        ),
    )
}

// 5, 6, 7. Debiasing on the synthetic biased generator, 5 training seeds.

const SEEDS: u64 = 5;

struct Metrics {
    p_rule: f64,
    wasserstein: f64,
    auc: f64,
    probe: f64,
}

struct Synthetic {
    train: Dataset,
    test: Dataset,
}

fn synthetic() -> Synthetic {
    let spec = SynthSpec {
        bias_strength: 0.8,
        n_per_group: 1000,
        seed: 0,
        ..SynthSpec::default()
    };
    let (train, test) = synth_biased(&spec).unwrap();
    let (train, others, _) = standardize(&train, &[test]).unwrap();
    Synthetic {
        train,
        test: others.into_iter().next().unwrap(),
    }
}

fn measure(model: &fairsvdd::SvddModel, test: &Dataset, seed: u64) -> Metrics {
    let scores = score(model, test).unwrap();
    let r = evaluate(&scores, &test.psv, test.labels.as_deref(), Cut::LabelCount).unwrap();
    let emb = model.embed(&test.features).unwrap();
    let probe = probe_accuracy(&emb, &test.psv, &ProbeConfig { seed, ..ProbeConfig::default() }).unwrap();
    Metrics {
        p_rule: r.p_rule,
        wasserstein: r.wasserstein,
        auc: r.auc.unwrap(),
        probe,
    }
}

fn mean(runs: &[Metrics]) -> Metrics {
    let n = runs.len() as f64;
    let sum = |f: fn(&Metrics) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Metrics {
        p_rule: sum(|m| m.p_rule),
        wasserstein: sum(|m| m.wasserstein),
        auc: sum(|m| m.auc),
        probe: sum(|m| m.probe),
    }
}

fn fair_config(lambda: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        lambda,
        seed,
        ..TrainConfig::default()
    }
}

fn fair_runs(data: &Synthetic, lambda: f64) -> Vec<Metrics> {
    (0..SEEDS)
        .map(|seed| {
            let model = train_fair_svdd(&data.train, &fair_config(lambda, seed)).unwrap();
            measure(&model.svdd, &data.test, seed)
        })
        .collect()
}

fn plain_runs(data: &Synthetic) -> Vec<Metrics> {
    (0..SEEDS)
        .map(|seed| {
            let model = train_svdd(&data.train, &fair_config(1.0, seed).matched_baseline()).unwrap();
            measure(&model, &data.test, seed)
        })
        .collect()
}

fn criterion_5(plain: &Metrics, fair: &Metrics, elapsed: Duration) -> Outcome {
    let w_reduction = 1.0 - fair.wasserstein / plain.wasserstein;
    let auc_drop = plain.auc - fair.auc;
    let pass = plain.p_rule < 0.8
        && fair.p_rule >= plain.p_rule + 0.10
        && w_reduction >= 0.30
        && auc_drop <= 0.10
        && within(elapsed, 600.0);
    outcome(
        pass,
        format!(
            "plain p_rule {:.3} (< 0.8); fair p_rule {:.3} (>= {:.3}); wasserstein {:.4} -> {:.4}, \
             reduction {:.1}% (>= 30%); auc {:.3} -> {:.3}, drop {auc_drop:.3} (<= 0.10); {:.0}s",
            plain.p_rule,
            fair.p_rule,
            plain.p_rule + 0.10,
            plain.wasserstein,
            fair.wasserstein,
            100.0 * w_reduction,
            plain.auc,
            fair.auc,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_6(data: &Synthetic, at_one: &Metrics) -> Outcome {
    let start = Instant::now();
    let lambdas = [0.01, 0.1, 1.0, 10.0, 100.0];
    let mut p_rules = Vec::new();
    for &lambda in &lambdas {
        let p = if lambda == 1.0 {
            at_one.p_rule
        } else {
            mean(&fair_runs(data, lambda)).p_rule
        };
        p_rules.push(p);
    }
    let logs: Vec<f64> = lambdas.iter().map(|l: &f64| l.ln()).collect();
    let rho = spearman(&logs, &p_rules).unwrap();
    let elapsed = start.elapsed();
    let table: Vec<String> = lambdas.iter().zip(&p_rules).map(|(l, p)| format!("{l}:{p:.3}")).collect();
    outcome(
        rho >= 0.8 && within(elapsed, 1800.0),
        format!(
            "Spearman(log λ, p_rule) {rho:.2} (>= 0.8); p_rule by λ [{}]; {:.0}s",
            table.join(" "),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_7(plain: &Metrics, fair: &Metrics) -> Outcome {
    outcome(
        fair.probe <= 0.60 && plain.probe >= 0.75,
        format!(
            "held-out probe accuracy fair {:.3} (<= 0.60), plain {:.3} (>= 0.75)",
            fair.probe, plain.probe
        ),
    )
}

// 8. Byte-identical CLI artifacts across repeated runs.

fn fairsvdd(dir: &Path, args: &[&str]) -> bool {
    let status = Command::new(env!("CARGO_BIN_EXE_fairsvdd"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .arg("--config")
        .arg(dir.join("run.toml"))
        .output()
        .unwrap();
    status.status.success()
}

fn cli_session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(
        dir.join("run.toml"),
        "[synth]\nn_per_group = 300\n[train]\npretrain_epochs = 6\nadversarial_epochs = 6\n",
    )
    .unwrap();
    let plain = dir.join("plain.json");
    let fair = dir.join("fair.json");
    let (plain, fair) = (plain.to_str().unwrap(), fair.to_str().unwrap());
    let steps: [&[&str]; 7] = [
        &["synth", "--seed", "3"],
        &["train", "--seed", "3", "--fair=false"],
        &["evaluate"],
        &["train", "--seed", "3", "--fair", "--lambda", "2"],
        &["evaluate", "--k-anomalies", "40"],
        &["sweep", "--seed", "3", "--lambdas", "0.5,5"],
        &["overlap", "--model-a", plain, "--model-b", fair],
    ];
    for (i, step) in steps.iter().enumerate() {
        assert!(fairsvdd(dir, step), "step {i} failed: {step:?}");
        if i == 1 {
            std::fs::copy(dir.join("model.json"), plain).unwrap();
        }
        if i == 3 {
            std::fs::copy(dir.join("model.json"), fair).unwrap();
        }
    }
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let root = tempfile::tempdir().unwrap();
    let a = cli_session(&root.path().join("a"));
    let b = cli_session(&root.path().join("b"));
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let pass = a.len() == b.len() && differing.is_empty() && a.len() >= 8;
    outcome(
        pass,
        format!(
            "{} artifacts compared [{}], {} differ, {:.1}s",
            a.len(),
            names.join(" "),
            differing.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

// 9. Metric properties on 1000 random cases each.

fn samples() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0..100.0f64, 1..40)
}

fn graded() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (4usize..60).prop_flat_map(|n| {
        (
            prop::collection::vec((0i32..24).prop_map(|k| f64::from(k) / 2.0), n),
            prop::collection::vec(0u8..2, n),
        )
    })
}

fn transforms() -> [fn(f64) -> f64; 3] {
    [|s| 2.0 * s + 1.0, |s| (s / 4.0).exp(), |s| s * s * s]
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let config = Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut failures = Vec::new();

    let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
    let w = runner.run(&(samples(), samples(), samples(), -50.0..50.0f64), |(p, q, r, c)| {
        let pq = wasserstein1(&p, &q).unwrap();
        let tol = 1e-9 * (1.0 + pq);
        prop_assert!((pq - wasserstein1(&q, &p).unwrap()).abs() <= tol);
        let shift = |v: &[f64]| v.iter().map(|x| x + c).collect::<Vec<_>>();
        prop_assert!((pq - wasserstein1(&shift(&p), &shift(&q)).unwrap()).abs() <= 1e-9 * (1.0 + pq + c.abs()));
        let pr = wasserstein1(&p, &r).unwrap();
        let qr = wasserstein1(&q, &r).unwrap();
        prop_assert!(pr <= pq + qr + 1e-9 * (1.0 + pq + qr));
        prop_assert!(wasserstein1(&p, &p).unwrap() == 0.0);
        Ok(())
    });
    if let Err(e) = w {
        failures.push(format!("wasserstein1: {e}"));
    }

    let mut runner = TestRunner::new_with_rng(config.clone(), proptest::test_runner::TestRng::deterministic_rng(config.rng_algorithm));
    let a = runner.run(&(graded(), 0i32..24), |((scores, z), t)| {
        let t = f64::from(t) / 2.0 + 0.25;
        let labels = z.clone();
        let both = labels.contains(&0) && labels.contains(&1);
        for g in transforms() {
            let moved: Vec<f64> = scores.iter().map(|&s| g(s)).collect();
            if both {
                prop_assert_eq!(auc(&scores, &labels).unwrap(), auc(&moved, &labels).unwrap());
            }
            if z.contains(&0) && z.contains(&1) {
                prop_assert_eq!(p_rule(&scores, &z, t).unwrap(), p_rule(&moved, &z, g(t)).unwrap());
            }
        }
        Ok(())
    });
    if let Err(e) = a {
        failures.push(format!("auc/p_rule: {e}"));
    }

    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && within(elapsed, 10.0),
        if failures.is_empty() {
            format!(
                "wasserstein1 symmetry, translation and triangle; auc and p_rule invariance; 1000 cases each, {:.2}s",
                elapsed.as_secs_f64()
            )
        } else {
            failures.join("; ")
        },
    )
}

fn report(n: usize, o: &Outcome) -> bool {
    println!("criterion {n}: {}  {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut all = true;
    all &= report(1, &criterion_1());
    all &= report(2, &criterion_2());
    all &= report(3, &criterion_3());
    all &= report(4, &criterion_4());

    let start = Instant::now();
    let data = synthetic();
    let plain = mean(&plain_runs(&data));
    let fair = mean(&fair_runs(&data, 1.0));
    all &= report(5, &criterion_5(&plain, &fair, start.elapsed()));
    all &= report(6, &criterion_6(&data, &fair));
    all &= report(7, &criterion_7(&plain, &fair));

    all &= report(8, &criterion_8());
    all &= report(9, &criterion_9());
    if !all {
        std::process::exit(1);
    }
}
