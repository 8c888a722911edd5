//! The `fairsvdd` command-line tool.
//!
//! ```text
//! fairsvdd synth    [--config F] [--seed N] [--balanced] [--out-dir D]
//! fairsvdd train    [--fair[=BOOL]] [--lambda L] [--train F] ...
//! fairsvdd evaluate [--model F] [--test F] [--k-anomalies K | --threshold T]
//! fairsvdd sweep    [--lambdas 0.01,0.1,1] ...
//! fairsvdd overlap  --model-a F --model-b F [--test F] [--k-anomalies K]
//! ```

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{exit, CliError};

#[derive(Debug, Parser)]
#[command(name = "fairsvdd", version, about = "Deep SVDD and Deep Fair SVDD anomaly detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic biased train/test CSVs.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train a plain or fair model and write a checkpoint and a loss trace.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Score a test CSV and write scores and a fairness report.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        cut: CutArgs,
        /// Checkpoint to evaluate.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and evaluate one fair model per λ.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        cut: CutArgs,
        /// Comma-separated λ values.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Compare the top-k anomaly sets of two checkpoints.
    Overlap {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        model_a: PathBuf,
        #[arg(long)]
        model_b: PathBuf,
        /// Number of instances each model flags; defaults to the abnormal-label count.
        #[arg(long)]
        k_anomalies: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for data generation and training.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub psv_col: Option<String>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Training CSV.
    #[arg(long = "train")]
    pub train_data: Option<PathBuf>,
    /// Evaluation CSV.
    #[arg(long = "test")]
    pub test_data: Option<PathBuf>,
    /// Downsample the larger PSV group of the training data.
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub balanced: Option<bool>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Train Deep Fair SVDD (`--fair`, `--fair=true`) or plain Deep SVDD (`--fair=false`).
    #[arg(long, num_args = 0..=1, require_equals = true, default_missing_value = "true")]
    pub fair: Option<bool>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub adv_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CutArgs {
    /// Flag this many top-scoring instances.
    #[arg(long, conflicts_with = "threshold")]
    pub k_anomalies: Option<usize>,
    /// Flag scores strictly above this value.
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.synth.seed = seed;
            cfg.train.seed = seed;
        }
        set(&mut cfg.out_dir, self.out_dir.clone());
        set(&mut cfg.psv_col, self.psv_col.clone());
        set(&mut cfg.label_col, self.label_col.clone());
        set(&mut cfg.balanced, self.balanced);
        if self.train_data.is_some() {
            cfg.train_data = self.train_data.clone();
        }
        if self.test_data.is_some() {
            cfg.test_data = self.test_data.clone();
        }
        Ok(cfg)
    }
}

impl TrainArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.fair, self.fair);
        set(&mut cfg.train.lambda, self.lambda);
        set(&mut cfg.train.pretrain_epochs, self.pretrain_epochs);
        set(&mut cfg.train.adversarial_epochs, self.adv_epochs);
        set(&mut cfg.train.batch_size, self.batch_size);
        set(&mut cfg.train.learning_rate, self.lr);
        set(&mut cfg.train.weight_decay, self.weight_decay);
    }
}

impl CutArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.threshold.is_some() {
            cfg.threshold = self.threshold;
            cfg.k_anomalies = None;
        } else if self.k_anomalies.is_some() {
            cfg.k_anomalies = self.k_anomalies;
            cfg.threshold = None;
        }
    }
}

fn counts(c: [usize; 2]) -> String {
    format!("psv0 {}  psv1 {}", c[0], c[1])
}

/// Runs one parsed command, printing its summary to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth { common } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let out = commands::synth(&cfg)?;
            println!("train {}  ({})", out.train.display(), counts(out.train_counts));
            println!("test  {}  ({})", out.test.display(), counts(out.test_counts));
        }
        Command::Train { common, train } => {
            let mut cfg = common.resolve()?;
            train.apply(&mut cfg);
            cfg.validate()?;
            let out = commands::train(&cfg)?;
            match &out.fitted.trace {
                commands::Trace::Plain(losses) => {
                    if let Some(l) = losses.last() {
                        println!("final L_SVDD {l:.6}");
                    }
                }
                commands::Trace::Fair(entries) => {
                    if let Some(t) = entries.last() {
                        println!(
                            "final L_SVDD {:.6}  L_D {:.6}  L_Adv {:.6}",
                            t.l_svdd, t.l_d, t.l_adv
                        );
                    }
                }
            }
            println!("model {}", out.model.display());
            println!("trace {}", out.trace.display());
        }
        Command::Evaluate { common, cut, model } => {
            let mut cfg = common.resolve()?;
            cut.apply(&mut cfg);
            if model.is_some() {
                cfg.model = model;
            }
            cfg.validate()?;
            let out = commands::evaluate_cmd(&cfg)?;
            print!("{}", commands::format_report(&out.report));
            println!("report {}", out.report_path.display());
            println!("scores {}", out.scores.display());
        }
        Command::Sweep {
            common,
            train,
            cut,
            lambdas,
        } => {
            let mut cfg = common.resolve()?;
            train.apply(&mut cfg);
            cut.apply(&mut cfg);
            set(&mut cfg.lambdas, lambdas);
            cfg.validate()?;
            let out = commands::sweep(&cfg)?;
            println!("{:>10}  {:>8}  {:>12}  {:>8}", "lambda", "p_rule", "wasserstein", "auc");
            for r in &out.rows {
                let auc = r.report.auc.map_or_else(|| "n/a".into(), |a| format!("{a:.4}"));
                println!(
                    "{:>10}  {:>8.4}  {:>12.6}  {auc:>8}",
                    r.lambda, r.report.p_rule, r.report.wasserstein
                );
            }
            println!("table {}", out.table.display());
        }
        Command::Overlap {
            common,
            model_a,
            model_b,
            k_anomalies,
        } => {
            let mut cfg = common.resolve()?;
            if k_anomalies.is_some() {
                cfg.k_anomalies = k_anomalies;
            }
            cfg.validate()?;
            let out = commands::overlap(&cfg, &model_a, &model_b)?;
            print!(
                "{}",
                commands::format_overlap(
                    &out.report,
                    &model_a.display().to_string(),
                    &model_b.display().to_string()
                )
            );
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::CONFIG } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
