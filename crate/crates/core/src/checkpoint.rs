//! Versioned JSON checkpoints.
//!
//! A checkpoint holds the encoder, the frozen center, the training config
//! (which includes the seed), the optional discriminator, and the optional
//! input scaler fitted on the training data. See `docs/checkpoint.md`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::fair::{Discriminator, FairSvddModel};
use crate::nn::DenseNet;
use crate::svdd::{SvddModel, TrainConfig};

pub const FORMAT: &str = "fairsvdd-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svdd,
    FairSvdd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub seed: u64,
    pub config: TrainConfig,
    pub encoder: DenseNet,
    pub center: Vec<f64>,
    pub discriminator: Option<DenseNet>,
    pub scaler: Option<Scaler>,
}

impl Checkpoint {
    pub fn from_svdd(model: &SvddModel, scaler: Option<Scaler>) -> Self {
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            kind: ModelKind::Svdd,
            seed: model.config.seed,
            config: model.config.clone(),
            encoder: model.encoder.clone(),
            center: model.center.clone(),
            discriminator: None,
            scaler,
        }
    }

    pub fn from_fair(model: &FairSvddModel, scaler: Option<Scaler>) -> Self {
        Checkpoint {
            kind: ModelKind::FairSvdd,
            discriminator: Some(model.discriminator.net.clone()),
            ..Self::from_svdd(&model.svdd, scaler)
        }
    }

    pub fn svdd_model(&self) -> Result<SvddModel> {
        SvddModel::new(self.encoder.clone(), self.center.clone(), self.config.clone())
    }

    pub fn discriminator(&self) -> Result<Option<Discriminator>> {
        self.discriminator
            .clone()
            .map(|net| Discriminator::from_net(net, self.config.discriminator_batch_norm))
            .transpose()
    }

    fn validate(&self) -> Result<()> {
        if self.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {VERSION})",
                self.version
            )));
        }
        if self.seed != self.config.seed {
            return Err(Error::Checkpoint("seed disagrees with config.seed".into()));
        }
        if self.encoder.use_bias() {
            return Err(Error::Checkpoint("encoder must be bias-free".into()));
        }
        self.svdd_model()?;
        match (self.kind, &self.discriminator) {
            (ModelKind::Svdd, None) => {}
            (ModelKind::FairSvdd, Some(d)) => {
                if d.input_dim() != self.center.len() {
                    return Err(Error::Checkpoint(
                        "discriminator input does not match embedding size".into(),
                    ));
                }
                Discriminator::from_net(d.clone(), self.config.discriminator_batch_norm)?;
            }
            _ => return Err(Error::Checkpoint("kind disagrees with discriminator presence".into())),
        }
        if let Some(s) = &self.scaler {
            if s.mean.len() != self.encoder.input_dim() || s.std.len() != s.mean.len() {
                return Err(Error::Checkpoint("scaler does not match encoder input".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
