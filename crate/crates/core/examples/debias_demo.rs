//! Plain vs fair Deep SVDD on the synthetic biased generator.
//!
//! cargo run --release -p fairsvdd --example debias_demo -- [bias] [lambda] [seeds] [K] [T]

use std::time::Instant;

use fairsvdd::metrics::{evaluate, Cut};
use fairsvdd::probe::{probe_accuracy, ProbeConfig};
use fairsvdd::{standardize, synth_biased, train_fair_svdd, train_svdd, SynthSpec, TrainConfig};

fn main() -> fairsvdd::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let bias = arg(0, 0.8);
    let lambda = arg(1, 1.0);
    let seeds = arg(2, 5.0) as u64;
    let k = arg(3, 50.0) as usize;
    let t = arg(4, 100.0) as usize;
    let disc: Vec<usize> = std::env::var("DISC")
        .map(|s| s.split(',').map(|v| v.parse().unwrap()).collect())
        .unwrap_or_else(|_| vec![32, 64, 32]);
    let spec = SynthSpec { bias_strength: bias, ..SynthSpec::default() };
    let (train, test) = synth_biased(&spec)?;
    let (train, others, _) = standardize(&train, &[test])?;
    let test = &others[0];
    println!("seed  model  p_rule  wasserstein  auc     probe");
    let mut sums = [[0.0; 4]; 2];
    for seed in 0..seeds {
        let cfg = TrainConfig {
            lambda,
            seed,
            pretrain_epochs: k,
            adversarial_epochs: t,
            discriminator_widths: disc.clone(),
            ..TrainConfig::default()
        };
        let start = Instant::now();
        let plain = train_svdd(&train, &cfg.matched_baseline())?;
        let fair = train_fair_svdd(&train, &cfg)?;
        let elapsed = start.elapsed();
        for (m, (name, model)) in [("plain", &plain), ("fair", &fair.svdd)].into_iter().enumerate() {
            let scores = fairsvdd::score(model, test)?;
            let r = evaluate(&scores, &test.psv, test.labels.as_deref(), Cut::LabelCount)?;
            let emb = model.embed(&test.features)?;
            let acc = probe_accuracy(&emb, &test.psv, &ProbeConfig { seed, ..ProbeConfig::default() })?;
            let row = [r.p_rule, r.wasserstein, r.auc.unwrap_or(f64::NAN), acc];
            for (s, v) in sums[m].iter_mut().zip(row) {
                *s += v;
            }
            println!(
                "{seed:>4}  {name:<5}  {:.3}   {:.4}       {:.3}   {:.3}",
                row[0], row[1], row[2], row[3]
            );
        }
        println!("      ({:.1}s)", elapsed.as_secs_f64());
    }
    for (name, s) in ["plain", "fair"].iter().zip(sums) {
        let n = seeds as f64;
        println!(
            "mean  {name:<5}  {:.3}   {:.4}       {:.3}   {:.3}",
            s[0] / n, s[1] / n, s[2] / n, s[3] / n
        );
    }
    Ok(())
}
