use fairsvdd::fair::Phase;
use fairsvdd::metrics::{evaluate, Cut};
use fairsvdd::svdd::{export_embeddings, train_svdd_traced, ScoreTable};
use fairsvdd::{
    score, standardize, synth_biased, train_fair_svdd, Checkpoint, Dataset, SynthSpec, TrainConfig,
};

fn data(n_per_group: usize) -> (Dataset, Dataset) {
    let spec = SynthSpec {
        n_per_group,
        train_minority_ratio: 1.0,
        ..SynthSpec::default()
    };
    let (train, test) = synth_biased(&spec).unwrap();
    let (train, others, _) = standardize(&train, &[test]).unwrap();
    (train, others.into_iter().next().unwrap())
}

fn small(k: usize, t: usize) -> TrainConfig {
    TrainConfig {
        pretrain_epochs: k,
        adversarial_epochs: t,
        ..TrainConfig::default()
    }
}

#[test]
fn svdd_loss_decreases() {
    let (train, _) = data(500);
    let (_, losses) = train_svdd_traced(&train, &small(20, 0)).unwrap();
    assert_eq!(losses.len(), 20);
    let head: f64 = losses[..5].iter().sum();
    let tail: f64 = losses[15..].iter().sum();
    assert!(tail < 0.5 * head, "{losses:?}");
    assert!(losses.windows(2).filter(|w| w[1] > w[0]).count() <= 3, "{losses:?}");
}

#[test]
fn encoder_fights_back_in_the_adversarial_phase() {
    let (train, _) = data(300);
    let model = train_fair_svdd(&train, &small(10, 10)).unwrap();
    let l_d = |p: Phase| model.trace.iter().filter(|t| t.phase == p).map(|t| t.l_d).collect::<Vec<_>>();
    let warmup_min = l_d(Phase::DiscInit).into_iter().fold(f64::INFINITY, f64::min);
    let adversarial = l_d(Phase::Adversarial);
    let mean = adversarial.iter().sum::<f64>() / adversarial.len() as f64;
    assert!(mean > warmup_min + 0.05, "warm-up minimum {warmup_min}, adversarial mean {mean}");
    assert!(model.trace.iter().all(|t| t.l_svdd.is_finite() && t.l_d.is_finite() && t.l_adv.is_finite()));
}

#[test]
fn exported_embeddings_reproduce_scores() {
    let (train, test) = data(100);
    let model = fairsvdd::train_svdd(&train, &small(3, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    export_embeddings(&model, &test, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header, ["e_0", "e_1", "e_2", "e_3", "e_4", "e_5", "e_6", "e_7", "e_8", "e_9", "e_10", "e_11", "e_12", "e_13", "e_14", "e_15", "psv", "label"]);
    let expected = score(&model, &test).unwrap();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let e: Vec<f64> = fields[..16].iter().map(|v| v.parse().unwrap()).collect();
        let s: f64 = e.iter().zip(&model.center).map(|(a, c)| (a - c) * (a - c)).sum();
        assert!((s - expected[i]).abs() <= 1e-10 * (1.0 + expected[i]));
        assert_eq!(fields[16], test.psv[i].to_string());
    }
}

#[test]
fn report_recomputes_from_score_csv() {
    let (train, test) = data(100);
    let model = fairsvdd::train_svdd(&train, &small(3, 0)).unwrap();
    let table = ScoreTable::from_model(&model, &test).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.csv");
    table.write_csv(&path).unwrap();
    let back = ScoreTable::read_csv(&path).unwrap();
    assert_eq!(back, table);
    let report = |t: &ScoreTable| evaluate(&t.scores, &t.psv, t.labels.as_deref(), Cut::LabelCount).unwrap();
    assert_eq!(report(&back), report(&table));
}

#[test]
fn checkpoint_round_trip_preserves_scores() {
    let (train, test) = data(100);
    let model = train_fair_svdd(&train, &small(2, 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let ckpt = Checkpoint::from_fair(&model, None);
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    let restored = back.svdd_model().unwrap();
    assert_eq!(score(&restored, &test).unwrap(), model.score(&test).unwrap());
    assert_eq!(back.discriminator().unwrap().unwrap(), model.discriminator);
}
