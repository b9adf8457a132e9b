//! Training and generation settings, read from `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{GeometryProvider, ProviderKind};
use crate::model::{AdamConfig, ModelConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key {0}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value}")]
    Value { key: String, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Linear decay of the learning rate to a tenth of its value over this
    /// many optimizer steps, constant afterwards (0 keeps it constant).
    pub lr_decay_steps: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Stop after this many optimizer steps, mid-epoch if needed (0 = no limit).
    pub max_steps: u64,
    pub batch_size: usize,
    pub dropout: f64,
    pub top_k: usize,
    pub provider: ProviderKind,
    pub geometry_init: f64,
    pub freeze_geometry: bool,
    pub seed: u64,
    pub train_fraction: f64,
    pub test_fraction: f64,
    pub validation_count: usize,
    pub frag_dim: usize,
    pub attach_dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub hidden: usize,
    pub init_hidden: usize,
    pub init_steps: usize,
    pub init_learning_rate: f64,
    /// Generation stops docking once this many fragments are placed.
    pub max_fragments: usize,
    /// Evaluate accuracy every this many epochs (0 disables it).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-4,
            lr_decay_steps: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.9,
            max_steps: 0,
            batch_size: 32,
            dropout: 0.3,
            top_k: 3,
            provider: ProviderKind::Topological,
            geometry_init: 1.0,
            freeze_geometry: false,
            seed: 0,
            train_fraction: 0.7,
            test_fraction: 0.3,
            validation_count: 100,
            frag_dim: 256,
            attach_dim: 64,
            heads: 8,
            layers: 3,
            hidden: 512,
            init_hidden: 64,
            init_steps: 2000,
            init_learning_rate: 1e-3,
            max_fragments: 40,
            eval_every: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "lr_decay_steps" => self.lr_decay_steps = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "max_steps" => self.max_steps = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "provider" => {
                self.provider = value.parse().map_err(|_| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                })?
            }
            "geometry_init" => self.geometry_init = parse(key, value)?,
            "freeze_geometry" => self.freeze_geometry = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "train_fraction" => self.train_fraction = parse(key, value)?,
            "test_fraction" => self.test_fraction = parse(key, value)?,
            "validation_count" => self.validation_count = parse(key, value)?,
            "frag_dim" => self.frag_dim = parse(key, value)?,
            "attach_dim" => self.attach_dim = parse(key, value)?,
            "heads" => self.heads = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "hidden" => self.hidden = parse(key, value)?,
            "init_hidden" => self.init_hidden = parse(key, value)?,
            "init_steps" => self.init_steps = parse(key, value)?,
            "init_learning_rate" => self.init_learning_rate = parse(key, value)?,
            "max_fragments" => self.max_fragments = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<TrainConfig, ConfigError> {
        let mut c = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        kv("epochs", self.epochs.to_string());
        kv("learning_rate", self.learning_rate.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("dropout", self.dropout.to_string());
        kv("top_k", self.top_k.to_string());
        kv("lr_decay_steps", self.lr_decay_steps.to_string());
        kv("adam_beta1", self.adam_beta1.to_string());
        kv("adam_beta2", self.adam_beta2.to_string());
        kv("max_steps", self.max_steps.to_string());
        kv("provider", self.provider.name().to_string());
        kv("geometry_init", self.geometry_init.to_string());
        kv("freeze_geometry", self.freeze_geometry.to_string());
        kv("seed", self.seed.to_string());
        kv("train_fraction", self.train_fraction.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("validation_count", self.validation_count.to_string());
        kv("frag_dim", self.frag_dim.to_string());
        kv("attach_dim", self.attach_dim.to_string());
        kv("heads", self.heads.to_string());
        kv("layers", self.layers.to_string());
        kv("hidden", self.hidden.to_string());
        kv("init_hidden", self.init_hidden.to_string());
        kv("init_steps", self.init_steps.to_string());
        kv("init_learning_rate", self.init_learning_rate.to_string());
        kv("max_fragments", self.max_fragments.to_string());
        kv("eval_every", self.eval_every.to_string());
        s
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.train_fraction < 0.0 || self.test_fraction < 0.0 || self.train_fraction + self.test_fraction > 1.0 + 1e-12 {
            return bad("split fractions must be non-negative and sum to at most 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must be in [0, 1)");
        }
        if self.top_k < 1 {
            return bad("top_k must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.heads == 0 || self.frag_dim % self.heads != 0 {
            return bad("heads must divide frag_dim");
        }
        if self.layers == 0 {
            return bad("layers must be at least 1");
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            frag_dim: self.frag_dim,
            attach_dim: self.attach_dim,
            heads: self.heads,
            layers: self.layers,
            hidden: self.hidden,
            dropout: self.dropout,
            geometry_init: self.geometry_init,
            freeze_geometry: self.freeze_geometry,
            geometry: true,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            ..AdamConfig::default()
        }
    }

    /// Learning rate for the optimizer step after `steps` completed ones.
    pub fn learning_rate_at(&self, steps: u64) -> f64 {
        if self.lr_decay_steps == 0 {
            return self.learning_rate;
        }
        let t = (steps as f64 / self.lr_decay_steps as f64).min(1.0);
        self.learning_rate * (1.0 - 0.9 * t)
    }

    pub fn geometry(&self) -> GeometryProvider {
        GeometryProvider::new(self.provider)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = TrainConfig::default();
        c.provider = ProviderKind::None;
        c.learning_rate = 3e-3;
        c.top_k = 5;
        assert_eq!(TrainConfig::from_text(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            TrainConfig::from_text("nope = 1"),
            Err(ConfigError::UnknownKey("nope".into()))
        );
        assert!(TrainConfig::from_text("top_k = 0").is_err());
        assert!(TrainConfig::from_text("train_fraction = 0.8\ntest_fraction = 0.3").is_err());
        assert!(TrainConfig::from_text("epochs").is_err());
        let c = TrainConfig::from_text("# comment\n\nepochs = 5\n").unwrap();
        assert_eq!(c.epochs, 5);
    }
}
