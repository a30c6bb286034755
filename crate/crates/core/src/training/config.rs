use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of one cross-validated training run.
///
/// Config files are flat TOML with one key per field; missing keys keep
/// their defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub lr_model: f64,
    pub lr_subgraph: f64,
    /// Order of the matrix-based Rényi entropy.
    pub alpha: f64,
    /// Weight of the mutual-information term.
    pub lambda_mi: f64,
    pub epochs: usize,
    pub lr_decay_gamma: f64,
    /// Epochs between learning-rate decays.
    pub lr_decay_every: usize,
    pub dropout: f64,
    pub folds: usize,
    pub seed: u64,
    pub early_stop_patience: usize,
    /// Fraction of each training fold held out to drive early stopping.
    pub validation_fraction: f64,
    pub encoder_hidden: usize,
    pub generator_hidden: usize,
    pub generator_mlp_hidden: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr_model: 5e-4,
            lr_subgraph: 2e-4,
            alpha: 1.01,
            lambda_mi: 0.1,
            epochs: 100,
            lr_decay_gamma: 0.9,
            lr_decay_every: 5,
            dropout: 0.5,
            folds: 10,
            seed: 0,
            early_stop_patience: 20,
            validation_fraction: 0.1,
            encoder_hidden: 32,
            generator_hidden: 32,
            generator_mlp_hidden: 16,
        }
    }
}

impl TrainingConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrainingConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Sets one field from its textual value, as given on a command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self)
            .map_err(|e| Error::Config(format!("cannot serialize config: {e}")))?;
        let current = table
            .get(key)
            .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?;
        let parsed = match current {
            toml::Value::Integer(_) => value.parse::<i64>().ok().map(toml::Value::Integer),
            toml::Value::Float(_) => value.parse::<f64>().ok().map(toml::Value::Float),
            _ => None,
        }
        .ok_or_else(|| Error::Config(format!("invalid value `{value}` for `{key}`")))?;
        table.insert(key.to_owned(), parsed);
        let updated: TrainingConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_owned()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_model", self.lr_model),
            ("lr_subgraph", self.lr_subgraph),
            ("alpha", self.alpha),
            ("lr_decay_gamma", self.lr_decay_gamma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("`seed` must be at most {}", i64::MAX)));
        }
        if self.alpha == 1.0 {
            return Err(Error::Config("`alpha` must differ from 1".into()));
        }
        if !(self.lambda_mi >= 0.0 && self.lambda_mi.is_finite()) {
            return Err(Error::Config(format!(
                "`lambda_mi` must be non-negative, got {}",
                self.lambda_mi
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "`dropout` must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(0.0..0.5).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "`validation_fraction` must lie in [0, 0.5), got {}",
                self.validation_fraction
            )));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("`folds` must be at least 2, got {}", self.folds)));
        }
        if self.batch_size < 2 {
            return Err(Error::Config(format!(
                "`batch_size` must be at least 2 for the mutual-information term, got {}",
                self.batch_size
            )));
        }
        let counts = [
            ("epochs", self.epochs),
            ("lr_decay_every", self.lr_decay_every),
            ("encoder_hidden", self.encoder_hidden),
            ("generator_hidden", self.generator_hidden),
            ("generator_mlp_hidden", self.generator_mlp_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        Ok(())
    }

    /// Learning rates in effect during `epoch` (0-based).
    pub fn learning_rates(&self, epoch: usize) -> (f64, f64) {
        let decay = self.lr_decay_gamma.powi((epoch / self.lr_decay_every) as i32);
        (self.lr_model * decay, self.lr_subgraph * decay)
    }
}
