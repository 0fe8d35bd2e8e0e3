//! Dataset schema and the chronological data protocol.
//!
//! An [`OptionQuote`] is one dated observation of one contract with
//! the nine model features plus the observed target price. The
//! protocol: partition observations purely by date at a cutoff (a
//! contract alive across the boundary contributes to both sides), fit
//! z-score statistics on the training side only, and slide fixed-size
//! windows per contract within each side.

mod csv_io;
mod synthetic;

pub use csv_io::{
    load_csv, load_returns_csv, save_csv, save_vol_series_csv, CsvLoad, RowIssue,
};
pub use synthetic::{generate_synthetic, GeneratorConfig};

use chrono::NaiveDate;
use thiserror::Error;

use crate::pricing::OptionKind;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv error: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error("feature '{0}' has zero variance on the training side")]
    DegenerateFeature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("window length must be >= 1")]
    WindowLength,
}

/// Number of model features per observation.
pub const FEATURE_COUNT: usize = 9;

/// Feature order of the vector produced by [`OptionQuote::features`].
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "ttm_years",
    "opt_type",
    "delta",
    "strike",
    "spot",
    "theo_price",
    "div_rate",
    "rf_rate",
    "garch_vol",
];

/// One dated observation of one option contract.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub contract_id: String,
    pub date: NaiveDate,
    /// Time to maturity in years (trading-day count / days-per-year).
    pub ttm_years: f64,
    pub kind: OptionKind,
    pub delta: f64,
    pub strike: f64,
    pub spot: f64,
    /// Closed-form dividend-adjusted price computed from the other
    /// features.
    pub theo_price: f64,
    /// Monthly dividend rate as stored in the source data; multiply by
    /// the configured factor to obtain the annual yield.
    pub div_rate: f64,
    pub rf_rate: f64,
    /// Annualized conditional volatility.
    pub garch_vol: f64,
    /// Observed market price (the regression label).
    pub target_price: f64,
}

impl OptionQuote {
    /// The feature vector in [`FEATURE_NAMES`] order.
    pub fn features(&self) -> [f64; FEATURE_COUNT] {
        [
            self.ttm_years,
            self.kind.encoded(),
            self.delta,
            self.strike,
            self.spot,
            self.theo_price,
            self.div_rate,
            self.rf_rate,
            self.garch_vol,
        ]
    }

    /// Schema invariants; returns the violated constraint.
    pub fn check(&self) -> Result<(), String> {
        if self.contract_id.is_empty() {
            return Err("empty contract_id".into());
        }
        let finite = self
            .features()
            .iter()
            .chain([&self.target_price])
            .all(|v| v.is_finite());
        if !finite {
            return Err("non-finite field".into());
        }
        if self.ttm_years < 0.0 {
            return Err(format!("ttm_years {} < 0", self.ttm_years));
        }
        if self.strike <= 0.0 {
            return Err(format!("strike {} <= 0", self.strike));
        }
        if self.spot <= 0.0 {
            return Err(format!("spot {} <= 0", self.spot));
        }
        if self.garch_vol <= 0.0 {
            return Err(format!("garch_vol {} <= 0", self.garch_vol));
        }
        Ok(())
    }
}

/// Chronological partition at a cutoff date.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<OptionQuote>,
    pub test: Vec<OptionQuote>,
    pub cutoff: NaiveDate,
}

/// Partitions purely by observation date: quotes dated on or before
/// the cutoff train, later quotes test. A contract alive across the
/// boundary contributes to both sides; one issued on the cutoff leaves
/// a single training observation. Each side is ordered
/// chronologically (ties broken by contract id).
pub fn split_by_cutoff(quotes: &[OptionQuote], cutoff: NaiveDate) -> DatasetSplit {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for q in quotes {
        if q.date <= cutoff {
            train.push(q.clone());
        } else {
            test.push(q.clone());
        }
    }
    let order = |a: &OptionQuote, b: &OptionQuote| {
        a.date.cmp(&b.date).then_with(|| a.contract_id.cmp(&b.contract_id))
    };
    train.sort_by(order);
    test.sort_by(order);
    DatasetSplit {
        train,
        test,
        cutoff,
    }
}

/// Per-feature z-score statistics (population variance), plus the
/// target's own statistics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NormStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    pub target_mean: f64,
    pub target_std: f64,
}

/// Fits normalization statistics. Must be called on the training side
/// only; a constant column is an error naming the feature.
pub fn fit_norm(train: &[OptionQuote]) -> Result<NormStats, DataError> {
    if train.is_empty() {
        return Err(DataError::Empty("cannot fit statistics on no quotes".into()));
    }
    let n = train.len() as f64;
    let mut mean = [0.0; FEATURE_COUNT];
    let mut std = [0.0; FEATURE_COUNT];
    for q in train {
        for (m, v) in mean.iter_mut().zip(q.features()) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    for q in train {
        for ((s, m), v) in std.iter_mut().zip(&mean).zip(q.features()) {
            *s += (v - m) * (v - m);
        }
    }
    // A spread at rounding scale is as unusable for z-scoring as an
    // exactly constant column.
    let degenerate = |s: f64, m: f64| s <= 1e-12 * (1.0 + m.abs());
    for (i, s) in std.iter_mut().enumerate() {
        *s = (*s / n).sqrt();
        if degenerate(*s, mean[i]) {
            return Err(DataError::DegenerateFeature(FEATURE_NAMES[i].into()));
        }
    }
    let target_mean = train.iter().map(|q| q.target_price).sum::<f64>() / n;
    let target_std = (train
        .iter()
        .map(|q| (q.target_price - target_mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if degenerate(target_std, target_mean) {
        return Err(DataError::DegenerateFeature("target_price".into()));
    }
    Ok(NormStats {
        mean,
        std,
        target_mean,
        target_std,
    })
}

impl NormStats {
    pub fn normalize_features(&self, q: &OptionQuote) -> [f64; FEATURE_COUNT] {
        let mut f = q.features();
        for ((v, m), s) in f.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - m) / s;
        }
        f
    }

    pub fn normalize_target(&self, price: f64) -> f64 {
        (price - self.target_mean) / self.target_std
    }

    pub fn denormalize_target(&self, z: f64) -> f64 {
        z * self.target_std + self.target_mean
    }

    pub fn denormalize_feature(&self, idx: usize, z: f64) -> f64 {
        z * self.std[idx] + self.mean[idx]
    }
}

/// One training sample: a window of consecutive normalized
/// observations of a single contract, labeled with the normalized
/// target of the window's final observation.
#[derive(Debug, Clone)]
pub struct WindowedSample {
    /// Row-major [C=1, N, D] feature block.
    pub features: Vec<f64>,
    /// Normalized target of the final observation.
    pub label: f64,
    pub contract_id: String,
    /// Date of the final observation.
    pub date: NaiveDate,
    /// Final observation of the window, unnormalized; carries the raw
    /// target and the inputs for the analytic reference models.
    pub final_quote: OptionQuote,
}

/// Windowing statistics for reporting.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowReport {
    pub samples: usize,
    pub contracts: usize,
    pub contracts_too_short: usize,
}

/// Slides length-`n` windows per contract over one side of a split.
/// Contracts shorter than the window yield nothing (counted in the
/// report); windows never span two contracts.
pub fn window(
    side: &[OptionQuote],
    stats: &NormStats,
    n: usize,
) -> Result<(Vec<WindowedSample>, WindowReport), DataError> {
    if n == 0 {
        return Err(DataError::WindowLength);
    }
    // Group per contract, preserving the side's chronological order.
    let mut by_contract: std::collections::BTreeMap<&str, Vec<&OptionQuote>> =
        std::collections::BTreeMap::new();
    for q in side {
        by_contract.entry(q.contract_id.as_str()).or_default().push(q);
    }
    let mut report = WindowReport {
        contracts: by_contract.len(),
        ..Default::default()
    };
    let mut samples = Vec::new();
    for quotes in by_contract.values() {
        if quotes.len() < n {
            report.contracts_too_short += 1;
            continue;
        }
        for win in quotes.windows(n) {
            let mut features = Vec::with_capacity(n * FEATURE_COUNT);
            for q in win {
                features.extend(stats.normalize_features(q));
            }
            let last = win[n - 1];
            samples.push(WindowedSample {
                features,
                label: stats.normalize_target(last.target_price),
                contract_id: last.contract_id.clone(),
                date: last.date,
                final_quote: last.clone(),
            });
        }
    }
    samples.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.contract_id.cmp(&b.contract_id))
    });
    report.samples = samples.len();
    Ok((samples, report))
}
