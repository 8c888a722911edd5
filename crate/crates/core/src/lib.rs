//! Deep SVDD and Deep Fair SVDD for tabular one-class anomaly detection.
//!
//! * [`data`]: datasets with a binary protected-status variable (PSV), CSV
//!   I/O, standardization, group balancing and a synthetic biased generator.
//! * [`nn`]: dense networks with exact gradients and Adam.
//! * [`svdd`]: plain Deep SVDD training and scoring.
//! * [`fair`]: the adversarially debiased variant and its training schedule.
//! * [`metrics`]: p%-rule, Wasserstein-1, AUC, thresholds and overlap.
//! * [`probe`]: post-hoc PSV recovery audit on embeddings.
//! * [`checkpoint`]: the on-disk model format.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fair;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod probe;
pub mod rng;
pub mod svdd;

pub use checkpoint::Checkpoint;
pub use data::{balance_by_psv, load_csv, standardize, synth_biased, Dataset, Scaler, SynthSpec};
pub use error::{Error, Result};
pub use fair::{train_fair_svdd, Discriminator, FairSvddModel};
pub use matrix::Matrix;
pub use metrics::{evaluate, Cut, FairnessReport};
pub use nn::{AdamState, DenseNet};
pub use svdd::{score, train_svdd, SvddModel, TrainConfig};
