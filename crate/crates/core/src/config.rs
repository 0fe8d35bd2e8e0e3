//! Flat key-value configuration files.
//!
//! The format is one `key = value` pair per line, `#` comments, no
//! sections. Every knob of the benchmark pipeline lives here; missing
//! keys take the documented defaults and unknown keys are an error so
//! typos cannot silently fall back.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

use crate::data::GeneratorConfig;
use crate::models::{ModelConfig, ModelKind};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("key '{key}': {reason}")]
    Value { key: String, reason: String },
    #[error("unknown keys: {0}")]
    UnknownKeys(String),
}

/// Parsed key-value pairs.
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    map: BTreeMap<String, String>,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Parse {
                    line,
                    reason: format!("expected 'key = value', got '{trimmed}'"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(ConfigError::Parse {
                    line,
                    reason: "empty key".into(),
                });
            }
            if map.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Parse {
                    line,
                    reason: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self { map })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// CLI-style override; replaces any file value.
    pub fn set(&mut self, key: &str, value: &str) {
        self.map.insert(key.trim().to_string(), value.trim().to_string());
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Tracks consumption so leftover keys can be reported.
struct Reader {
    map: BTreeMap<String, String>,
}

impl Reader {
    fn take<T, F>(&mut self, key: &str, default: T, parse: F) -> Result<T, ConfigError>
    where
        F: FnOnce(&str) -> Option<T>,
    {
        match self.map.remove(key) {
            None => Ok(default),
            Some(raw) => parse(&raw).ok_or_else(|| ConfigError::Value {
                key: key.into(),
                reason: format!("cannot parse '{raw}'"),
            }),
        }
    }

    fn f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        self.take(key, default, |s| s.parse().ok())
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        self.take(key, default, |s| s.parse().ok())
    }

    fn u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        self.take(key, default, |s| s.parse().ok())
    }

    fn date(&mut self, key: &str, default: NaiveDate) -> Result<NaiveDate, ConfigError> {
        self.take(key, default, |s| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()
        })
    }

    fn list_f64(&mut self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, ConfigError> {
        self.take(key, default, |s| {
            s.split(',').map(|p| p.trim().parse().ok()).collect()
        })
    }

    fn list_usize(&mut self, key: &str, default: Vec<usize>) -> Result<Vec<usize>, ConfigError> {
        self.take(key, default, |s| {
            s.split(',').map(|p| p.trim().parse().ok()).collect()
        })
    }

    fn finish(self) -> Result<(), ConfigError> {
        if self.map.is_empty() {
            Ok(())
        } else {
            let keys: Vec<String> = self.map.into_keys().collect();
            Err(ConfigError::UnknownKeys(keys.join(", ")))
        }
    }
}

/// Full benchmark configuration: data generation, split boundary,
/// architectures, and per-family training schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub gen: GeneratorConfig,
    pub cutoff: NaiveDate,
    pub model: ModelConfig,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs for the KAN-family models.
    pub kan_epochs: usize,
    /// Epochs for the LSTM-family models.
    pub lstm_epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            gen: GeneratorConfig::default(),
            cutoff: NaiveDate::from_ymd_opt(2020, 8, 31).unwrap(),
            model: ModelConfig::default(),
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            kan_epochs: 50,
            lstm_epochs: 200,
            adam_beta1: train.adam_beta1,
            adam_beta2: train.adam_beta2,
            adam_eps: train.adam_eps,
            seed: 42,
        }
    }
}

impl BenchConfig {
    /// Applies a flat file over the defaults. Every key is optional;
    /// unknown keys are an error.
    pub fn from_flat(flat: &FlatConfig) -> Result<Self, ConfigError> {
        let defaults = Self::default();
        let mut r = Reader {
            map: flat.map.clone(),
        };
        let gen = GeneratorConfig {
            start_date: r.date("gen.start_date", defaults.gen.start_date)?,
            end_date: r.date("gen.end_date", defaults.gen.end_date)?,
            contracts: r.usize("gen.contracts", defaults.gen.contracts)?,
            contract_days: r.usize("gen.contract_days", defaults.gen.contract_days)?,
            moneyness_grid: r.list_f64(
                "gen.moneyness_grid",
                defaults.gen.moneyness_grid.clone(),
            )?,
            spot0: r.f64("gen.spot0", defaults.gen.spot0)?,
            drift: r.f64("gen.drift", defaults.gen.drift)?,
            volatility: r.f64("gen.volatility", defaults.gen.volatility)?,
            rate0: r.f64("gen.rate0", defaults.gen.rate0)?,
            rate_amplitude: r.f64("gen.rate_amplitude", defaults.gen.rate_amplitude)?,
            dividend0: r.f64("gen.dividend0", defaults.gen.dividend0)?,
            dividend_amplitude: r.f64(
                "gen.dividend_amplitude",
                defaults.gen.dividend_amplitude,
            )?,
            noise_level: r.f64("gen.noise_level", defaults.gen.noise_level)?,
            trading_days_per_year: r.usize(
                "gen.trading_days_per_year",
                defaults.gen.trading_days_per_year,
            )?,
            dividend_monthly_factor: r.f64(
                "gen.dividend_monthly_factor",
                defaults.gen.dividend_monthly_factor,
            )?,
        };
        let model = ModelConfig {
            window: r.usize("model.window", defaults.model.window)?,
            kan_hidden: r.list_usize("model.kan_hidden", defaults.model.kan_hidden.clone())?,
            kan_grid: r.usize("model.kan_grid", defaults.model.kan_grid)?,
            kan_degree: r.usize("model.kan_degree", defaults.model.kan_degree)?,
            kan_range_lo: r.f64("model.kan_range_lo", defaults.model.kan_range_lo)?,
            kan_range_hi: r.f64("model.kan_range_hi", defaults.model.kan_range_hi)?,
            conv_kan_filters: r.usize(
                "model.conv_kan_filters",
                defaults.model.conv_kan_filters,
            )?,
            conv_kan_kernel_width: r.usize(
                "model.conv_kan_kernel_width",
                defaults.model.conv_kan_kernel_width,
            )?,
            conv_kan_stride: r.usize("model.conv_kan_stride", defaults.model.conv_kan_stride)?,
            conv_kan_head: r.list_usize(
                "model.conv_kan_head",
                defaults.model.conv_kan_head.clone(),
            )?,
            lstm_hidden: r.usize("model.lstm_hidden", defaults.model.lstm_hidden)?,
            conv_lstm_channels: r.usize(
                "model.conv_lstm_channels",
                defaults.model.conv_lstm_channels,
            )?,
            conv_lstm_kernel_width: r.usize(
                "model.conv_lstm_kernel_width",
                defaults.model.conv_lstm_kernel_width,
            )?,
        };
        let cfg = Self {
            gen,
            cutoff: r.date("split.cutoff_date", defaults.cutoff)?,
            model,
            batch_size: r.usize("train.batch_size", defaults.batch_size)?,
            learning_rate: r.f64("train.learning_rate", defaults.learning_rate)?,
            kan_epochs: r.usize("train.kan_epochs", defaults.kan_epochs)?,
            lstm_epochs: r.usize("train.lstm_epochs", defaults.lstm_epochs)?,
            adam_beta1: r.f64("train.adam_beta1", defaults.adam_beta1)?,
            adam_beta2: r.f64("train.adam_beta2", defaults.adam_beta2)?,
            adam_eps: r.f64("train.adam_eps", defaults.adam_eps)?,
            seed: r.u64("seed", defaults.seed)?,
        };
        r.finish()?;
        Ok(cfg)
    }

    /// Deterministic per-model seed derivation.
    pub fn model_seed(&self, kind: ModelKind) -> u64 {
        let offset = match kind {
            ModelKind::Bs => 0,
            ModelKind::Bsm => 0,
            ModelKind::Kan => 1,
            ModelKind::ConvKan => 2,
            ModelKind::Lstm => 3,
            ModelKind::ConvLstm => 4,
        };
        self.seed.wrapping_add(offset)
    }

    /// Training schedule for one model family.
    pub fn train_config_for(&self, kind: ModelKind) -> TrainConfig {
        let epochs = match kind {
            ModelKind::Kan | ModelKind::ConvKan => self.kan_epochs,
            _ => self.lstm_epochs,
        };
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            seed: self.model_seed(kind),
        }
    }

    /// Every effective setting, for report headers and the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = self.model.echo();
        let g = &self.gen;
        map.insert("gen.start_date".into(), g.start_date.to_string());
        map.insert("gen.end_date".into(), g.end_date.to_string());
        map.insert("gen.contracts".into(), g.contracts.to_string());
        map.insert("gen.contract_days".into(), g.contract_days.to_string());
        map.insert("gen.moneyness_grid".into(), format!("{:?}", g.moneyness_grid));
        map.insert("gen.spot0".into(), g.spot0.to_string());
        map.insert("gen.drift".into(), g.drift.to_string());
        map.insert("gen.volatility".into(), g.volatility.to_string());
        map.insert("gen.rate0".into(), g.rate0.to_string());
        map.insert("gen.rate_amplitude".into(), g.rate_amplitude.to_string());
        map.insert("gen.dividend0".into(), g.dividend0.to_string());
        map.insert(
            "gen.dividend_amplitude".into(),
            g.dividend_amplitude.to_string(),
        );
        map.insert("gen.noise_level".into(), g.noise_level.to_string());
        map.insert(
            "gen.trading_days_per_year".into(),
            g.trading_days_per_year.to_string(),
        );
        map.insert(
            "gen.dividend_monthly_factor".into(),
            g.dividend_monthly_factor.to_string(),
        );
        map.insert("split.cutoff_date".into(), self.cutoff.to_string());
        map.insert("train.batch_size".into(), self.batch_size.to_string());
        map.insert("train.learning_rate".into(), self.learning_rate.to_string());
        map.insert("train.kan_epochs".into(), self.kan_epochs.to_string());
        map.insert("train.lstm_epochs".into(), self.lstm_epochs.to_string());
        map.insert("train.adam_beta1".into(), self.adam_beta1.to_string());
        map.insert("train.adam_beta2".into(), self.adam_beta2.to_string());
        map.insert("train.adam_eps".into(), self.adam_eps.to_string());
        map.insert("seed".into(), self.seed.to_string());
        map.insert("garch.order".into(), "(1,1)".into());
        map.insert("garch.annualization".into(), "sqrt(252)".into());
        map
    }
}
