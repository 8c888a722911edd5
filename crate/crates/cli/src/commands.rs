//! Subcommand implementations. Each returns the paths it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fairsvdd::checkpoint::Checkpoint;
use fairsvdd::fair::write_trace_csv;
use fairsvdd::metrics::{self, OverlapReport};
use fairsvdd::svdd::{train_svdd_traced, write_loss_trace_csv, ScoreTable};
use fairsvdd::{
    balance_by_psv, evaluate, load_csv, synth_biased, train_fair_svdd, Cut, Dataset, Error,
    FairnessReport, Scaler,
};

use crate::config::RunConfig;
use crate::error::CliError;

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Loads a CSV, reading the label column only if the file has one.
pub fn load_data(path: &Path, cfg: &RunConfig) -> Result<Dataset, CliError> {
    match load_csv(path, &cfg.psv_col, Some(&cfg.label_col)) {
        Err(Error::MissingColumn(c)) if c == cfg.label_col => Ok(load_csv(path, &cfg.psv_col, None)?),
        other => Ok(other?),
    }
}

fn cut(cfg: &RunConfig) -> Cut {
    match (cfg.threshold, cfg.k_anomalies) {
        (Some(t), _) => Cut::Threshold(t),
        (None, Some(k)) => Cut::Count(k),
        (None, None) => Cut::LabelCount,
    }
}

pub struct SynthOutput {
    pub train: PathBuf,
    pub test: PathBuf,
    pub train_counts: [usize; 2],
    pub test_counts: [usize; 2],
}

pub fn synth(cfg: &RunConfig) -> Result<SynthOutput, CliError> {
    let (mut train, test) = synth_biased(&cfg.synth)?;
    if cfg.balanced {
        train = balance_by_psv(&train, cfg.synth.seed)?;
    }
    ensure_dir(&cfg.out_dir)?;
    let out = SynthOutput {
        train: cfg.out_dir.join("train.csv"),
        test: cfg.out_dir.join("test.csv"),
        train_counts: train.group_counts(),
        test_counts: test.group_counts(),
    };
    train.write_csv(&out.train)?;
    test.write_csv(&out.test)?;
    Ok(out)
}

/// A trained model with the training losses worth printing.
pub struct Fitted {
    pub checkpoint: Checkpoint,
    pub trace: Trace,
}

pub enum Trace {
    Plain(Vec<f64>),
    Fair(Vec<fairsvdd::fair::TraceEntry>),
}

/// Balances if asked, standardizes on the training data and trains.
pub fn fit(train: &Dataset, cfg: &RunConfig) -> Result<Fitted, CliError> {
    let train = if cfg.balanced {
        balance_by_psv(train, cfg.train.seed)?
    } else {
        train.clone()
    };
    let scaler = Scaler::fit(&train.features);
    let train = scaler.apply(&train)?;
    if cfg.fair {
        let model = train_fair_svdd(&train, &cfg.train)?;
        Ok(Fitted {
            checkpoint: Checkpoint::from_fair(&model, Some(scaler)),
            trace: Trace::Fair(model.trace),
        })
    } else {
        let (model, losses) = train_svdd_traced(&train, &cfg.train)?;
        Ok(Fitted {
            checkpoint: Checkpoint::from_svdd(&model, Some(scaler)),
            trace: Trace::Plain(losses),
        })
    }
}

pub struct TrainOutput {
    pub model: PathBuf,
    pub trace: PathBuf,
    pub fitted: Fitted,
}

pub fn train(cfg: &RunConfig) -> Result<TrainOutput, CliError> {
    let data = load_data(&cfg.train_path(), cfg)?;
    let fitted = fit(&data, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let model = cfg.model_path();
    if let Some(parent) = model.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fitted.checkpoint.save(&model)?;
    let trace = cfg.out_dir.join("trace.csv");
    match &fitted.trace {
        Trace::Plain(losses) => write_loss_trace_csv(losses, &trace)?,
        Trace::Fair(entries) => write_trace_csv(entries, &trace)?,
    }
    Ok(TrainOutput {
        model,
        trace,
        fitted,
    })
}

/// Scores `data` with a checkpoint, applying its stored scaler.
pub fn score_table(checkpoint: &Checkpoint, data: &Dataset) -> Result<ScoreTable, CliError> {
    let data = match &checkpoint.scaler {
        Some(s) => s.apply(data)?,
        None => data.clone(),
    };
    Ok(ScoreTable::from_model(&checkpoint.svdd_model()?, &data)?)
}

pub fn assess(checkpoint: &Checkpoint, test: &Dataset, cfg: &RunConfig) -> Result<(ScoreTable, FairnessReport), CliError> {
    let table = score_table(checkpoint, test)?;
    let report = evaluate(&table.scores, &table.psv, table.labels.as_deref(), cut(cfg))?;
    Ok((table, report))
}

pub struct EvaluateOutput {
    pub scores: PathBuf,
    pub report_path: PathBuf,
    pub report: FairnessReport,
}

pub fn evaluate_cmd(cfg: &RunConfig) -> Result<EvaluateOutput, CliError> {
    let checkpoint = Checkpoint::load(cfg.model_path())?;
    let test = load_data(&cfg.test_path(), cfg)?;
    let (table, report) = assess(&checkpoint, &test, cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let scores = cfg.out_dir.join("scores.csv");
    let report_path = cfg.out_dir.join("report.json");
    table.write_csv(&scores)?;
    report.write_json(&report_path)?;
    Ok(EvaluateOutput {
        scores,
        report_path,
        report,
    })
}

pub fn format_report(report: &FairnessReport) -> String {
    let c = &report.counts;
    let mut s = String::new();
    let _ = writeln!(s, "p_rule       {:.4}", report.p_rule);
    let _ = writeln!(s, "wasserstein  {:.6}", report.wasserstein);
    match report.auc {
        Some(a) => {
            let _ = writeln!(s, "auc          {a:.4}");
        }
        None => {
            let _ = writeln!(s, "auc          n/a");
        }
    }
    let _ = writeln!(s, "threshold    {}", report.threshold);
    let _ = writeln!(s, "flagged      psv0 {}/{}  psv1 {}/{}",
        c.psv0_abnormal, c.psv0_normal + c.psv0_abnormal,
        c.psv1_abnormal, c.psv1_normal + c.psv1_abnormal);
    let _ = writeln!(
        s,
        "80% rule     {}",
        if report.satisfies_eighty_percent_rule() { "satisfied" } else { "violated" }
    );
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub report: FairnessReport,
}

pub struct SweepOutput {
    pub table: PathBuf,
    pub rows: Vec<SweepRow>,
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("lambda,p_rule,wasserstein,auc\n");
    for r in rows {
        let auc = r.report.auc.map_or_else(String::new, |a| a.to_string());
        let _ = writeln!(s, "{},{},{},{auc}", r.lambda, r.report.p_rule, r.report.wasserstein);
    }
    s
}

/// Trains and evaluates one fair model per λ from the same base seed. If a run
/// fails, the finished rows go to `sweep.incomplete.csv` and the error is returned.
pub fn sweep(cfg: &RunConfig) -> Result<SweepOutput, CliError> {
    let train = load_data(&cfg.train_path(), cfg)?;
    let test = load_data(&cfg.test_path(), cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let complete = cfg.out_dir.join("sweep.csv");
    let partial = cfg.out_dir.join("sweep.incomplete.csv");
    let mut rows = Vec::with_capacity(cfg.lambdas.len());
    for &lambda in &cfg.lambdas {
        let mut run = cfg.clone();
        run.fair = true;
        run.train.lambda = lambda;
        let result = fit(&train, &run).and_then(|f| assess(&f.checkpoint, &test, &run));
        match result {
            Ok((_, report)) => rows.push(SweepRow { lambda, report }),
            Err(e) => {
                write_text(&partial, &sweep_csv(&rows))?;
                return Err(e);
            }
        }
    }
    write_text(&complete, &sweep_csv(&rows))?;
    if partial.exists() {
        let _ = std::fs::remove_file(&partial);
    }
    Ok(SweepOutput {
        table: complete,
        rows,
    })
}

pub struct OverlapOutput {
    pub path: PathBuf,
    pub report: OverlapReport,
}

pub fn overlap(cfg: &RunConfig, model_a: &Path, model_b: &Path) -> Result<OverlapOutput, CliError> {
    let a = Checkpoint::load(model_a)?;
    let b = Checkpoint::load(model_b)?;
    let test = load_data(&cfg.test_path(), cfg)?;
    let sa = score_table(&a, &test)?;
    let sb = score_table(&b, &test)?;
    let k = match cfg.k_anomalies {
        Some(k) => k,
        None => {
            let labels = test.labels.as_ref().ok_or_else(|| {
                CliError::Config("overlap needs --k-anomalies when the data has no labels".into())
            })?;
            labels.iter().filter(|&&y| y == 1).count()
        }
    };
    let report = metrics::overlap(&sa.scores, &sb.scores, &test.psv, k)?;
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("overlap.json");
    let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    write_text(&path, &(json + "\n"))?;
    Ok(OverlapOutput { path, report })
}

/// Anomaly counts per group for both models, then the overlap ratio.
pub fn format_overlap(report: &OverlapReport, name_a: &str, name_b: &str) -> String {
    let width = name_a.len().max(name_b.len()).max("overlap ratio".len());
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  anomalies (Z0:Z1)", "model");
    for (name, c) in [(name_a, report.counts_a), (name_b, report.counts_b)] {
        let _ = writeln!(s, "{name:<width$}  {}:{}", c[0], c[1]);
    }
    let _ = writeln!(
        s,
        "{:<width$}  {:.4} ({}/{})",
        "overlap ratio", report.ratio, report.overlap, report.k
    );
    s
}
