//! Synthetic option-chain generation.
//!
//! One underlying follows geometric Brownian motion over the weekday
//! calendar of the configured date range. Contracts are issued on a
//! staggered schedule with strikes from a moneyness grid, alternating
//! calls and puts. Each observation carries the nine features: the
//! volatility feature comes from a GARCH(1,1) fit on the underlying's
//! log returns, the theoretical price is the dividend-adjusted closed
//! form on those features, and the target is the theoretical price
//! perturbed by multiplicative Gaussian noise. Everything is a pure
//! function of (config, seed).

use chrono::{Datelike, NaiveDate, Weekday};

use super::{DataError, OptionQuote};
use crate::garch;
use crate::pricing::{self, MarketParams, OptionKind};
use crate::rng::Rng;

/// Generator parameters. Defaults produce roughly 7,500 observations
/// over the 2020 calendar year with a late-August split point.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub contracts: usize,
    /// Contract lifetime in trading days.
    pub contract_days: usize,
    /// Strike grid as strike/spot ratios at issue.
    pub moneyness_grid: Vec<f64>,
    pub spot0: f64,
    pub drift: f64,
    pub volatility: f64,
    /// Base risk-free rate and seasonal amplitude.
    pub rate0: f64,
    pub rate_amplitude: f64,
    /// Base annual dividend yield and seasonal amplitude.
    pub dividend0: f64,
    pub dividend_amplitude: f64,
    /// Std of the multiplicative price noise.
    pub noise_level: f64,
    pub trading_days_per_year: usize,
    /// Factor converting the stored monthly dividend feature to the
    /// annual yield used in pricing.
    pub dividend_monthly_factor: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2020, 12, 31).unwrap(),
            contracts: 80,
            contract_days: 130,
            moneyness_grid: vec![0.9, 0.95, 1.0, 1.05, 1.1],
            spot0: 100.0,
            drift: 0.05,
            volatility: 0.2,
            rate0: 0.03,
            rate_amplitude: 0.005,
            dividend0: 0.02,
            dividend_amplitude: 0.005,
            noise_level: 0.02,
            trading_days_per_year: 252,
            dividend_monthly_factor: 12.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.start_date >= self.end_date {
            return Err(DataError::Config("start_date must precede end_date".into()));
        }
        if self.contracts == 0 {
            return Err(DataError::Config("need at least one contract".into()));
        }
        if self.contract_days < 2 {
            return Err(DataError::Config("contract_days must be >= 2".into()));
        }
        if self.moneyness_grid.is_empty()
            || self.moneyness_grid.iter().any(|&m| !m.is_finite() || m <= 0.0)
        {
            return Err(DataError::Config("moneyness grid must be positive".into()));
        }
        if !(self.spot0 > 0.0 && self.volatility > 0.0) {
            return Err(DataError::Config("spot0 and volatility must be > 0".into()));
        }
        if self.noise_level < 0.0 {
            return Err(DataError::Config("noise_level must be >= 0".into()));
        }
        if self.trading_days_per_year == 0 {
            return Err(DataError::Config("trading_days_per_year must be > 0".into()));
        }
        if self.dividend_monthly_factor <= 0.0 {
            return Err(DataError::Config(
                "dividend_monthly_factor must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Weekdays between start and end, inclusive.
pub fn trading_days(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut day = start;
    while day <= end {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day.succ_opt().expect("date range within calendar bounds");
    }
    out
}

/// Deterministic synthetic chain. See the module docs for the
/// construction; observations are sorted by (date, contract id).
pub fn generate_synthetic(
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<Vec<OptionQuote>, DataError> {
    cfg.validate()?;
    let days = trading_days(cfg.start_date, cfg.end_date);
    // The GARCH fit needs at least 100 returns.
    if days.len() < 102 {
        return Err(DataError::Config(format!(
            "date range yields {} trading days; need at least 102",
            days.len()
        )));
    }
    let n_days = days.len();
    let dt = 1.0 / cfg.trading_days_per_year as f64;

    // Underlying path (stream 0) and observation noise (stream 1).
    let mut path_rng = Rng::with_stream(seed, 0);
    let mut noise_rng = Rng::with_stream(seed, 1);

    let drift_term = (cfg.drift - 0.5 * cfg.volatility * cfg.volatility) * dt;
    let diff_term = cfg.volatility * dt.sqrt();
    let mut spots = Vec::with_capacity(n_days);
    spots.push(cfg.spot0);
    for _ in 1..n_days {
        let z = path_rng.normal();
        let prev = *spots.last().unwrap();
        spots.push(prev * (drift_term + diff_term * z).exp());
    }

    let returns: Vec<f64> = spots.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let garch_params = garch::garch_fit(&returns)
        .map_err(|e| DataError::Config(format!("volatility fit failed: {e}")))?;
    let variance = garch::garch_filter(&garch_params, &returns)
        .map_err(|e| DataError::Config(format!("volatility filter failed: {e}")))?;
    // One-step-ahead forecast covers the final date, which has no
    // subsequent return.
    let mut vol_annual: Vec<f64> = variance
        .iter()
        .map(|v| garch::annualize(v.sqrt(), cfg.trading_days_per_year))
        .collect();
    let last_var = garch_params.omega
        + garch_params.alpha * returns[n_days - 2] * returns[n_days - 2]
        + garch_params.beta * variance[n_days - 2];
    vol_annual.push(garch::annualize(
        last_var.sqrt(),
        cfg.trading_days_per_year,
    ));
    debug_assert_eq!(vol_annual.len(), n_days);

    let angle = |d: usize| 2.0 * std::f64::consts::PI * d as f64 / n_days as f64;
    let rate_at = |d: usize| cfg.rate0 + cfg.rate_amplitude * angle(d).sin();
    let dividend_at = |d: usize| cfg.dividend0 + cfg.dividend_amplitude * (angle(d) + 1.0).sin();

    // Issue schedule: evenly spaced from before the observation window
    // (contracts already alive on the first day, as in a real chain,
    // keeping date coverage flat) up to shortly before it ends.
    // Pre-window issues are clipped to day zero.
    let issue_lo = -(cfg.contract_days.saturating_sub(10) as i64);
    let issue_hi = n_days.saturating_sub(20).max(1) as i64;
    let issue_span = issue_hi - issue_lo;
    let mut quotes = Vec::new();
    for j in 0..cfg.contracts {
        let issue = issue_lo + (j as i64) * issue_span / cfg.contracts as i64;
        let expiry = issue + cfg.contract_days as i64;
        let first_day = issue.max(0) as usize;
        let kind = if j % 2 == 0 {
            OptionKind::Call
        } else {
            OptionKind::Put
        };
        let moneyness = cfg.moneyness_grid[j % cfg.moneyness_grid.len()];
        let strike = (spots[first_day] * moneyness * 100.0).round() / 100.0;
        let id = format!(
            "{}{j:04}",
            match kind {
                OptionKind::Call => "C",
                OptionKind::Put => "P",
            }
        );

        let expiry = expiry as usize;
        let last_day = expiry.min(n_days - 1);
        for d in first_day..=last_day {
            let ttm_years = (expiry - d) as f64 / cfg.trading_days_per_year as f64;
            let q_annual = dividend_at(d);
            let params = MarketParams {
                spot: spots[d],
                strike,
                rate: rate_at(d),
                dividend_yield: q_annual,
                volatility: vol_annual[d],
                maturity: ttm_years,
            };
            let theo = pricing::price_bsm(&params, kind)
                .map_err(|e| DataError::Config(format!("pricing failed: {e}")))?;
            let delta = pricing::delta_bsm(&params, kind)
                .map_err(|e| DataError::Config(format!("delta failed: {e}")))?;
            let noise = cfg.noise_level * noise_rng.normal();
            let target_price = (theo * (1.0 + noise)).max(0.0);
            quotes.push(OptionQuote {
                contract_id: id.clone(),
                date: days[d],
                ttm_years,
                kind,
                delta,
                strike,
                spot: spots[d],
                theo_price: theo,
                div_rate: q_annual / cfg.dividend_monthly_factor,
                rf_rate: rate_at(d),
                garch_vol: vol_annual[d],
                target_price,
            });
        }
    }
    quotes.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.contract_id.cmp(&b.contract_id))
    });
    Ok(quotes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_seed_deterministic() {
        let cfg = GeneratorConfig {
            contracts: 6,
            ..Default::default()
        };
        let a = generate_synthetic(&cfg, 9).unwrap();
        let b = generate_synthetic(&cfg, 9).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&cfg, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_noise_makes_target_equal_theoretical() {
        let cfg = GeneratorConfig {
            contracts: 4,
            noise_level: 0.0,
            ..Default::default()
        };
        let quotes = generate_synthetic(&cfg, 3).unwrap();
        assert!(quotes.iter().all(|q| q.target_price == q.theo_price));
    }

    #[test]
    fn deltas_lie_in_their_analytic_ranges() {
        let cfg = GeneratorConfig {
            contracts: 10,
            ..Default::default()
        };
        let quotes = generate_synthetic(&cfg, 4).unwrap();
        for q in &quotes {
            match q.kind {
                OptionKind::Call => {
                    assert!(q.delta >= 0.0 && q.delta <= 1.0, "call delta {}", q.delta)
                }
                OptionKind::Put => {
                    assert!(q.delta >= -1.0 && q.delta <= 0.0, "put delta {}", q.delta)
                }
            }
        }
        assert!(quotes.iter().any(|q| q.kind == OptionKind::Call));
        assert!(quotes.iter().any(|q| q.kind == OptionKind::Put));
    }

    #[test]
    fn every_quote_satisfies_the_schema() {
        let cfg = GeneratorConfig {
            contracts: 8,
            ..Default::default()
        };
        let quotes = generate_synthetic(&cfg, 5).unwrap();
        for q in &quotes {
            q.check().unwrap();
        }
        // Expiring contracts leave a zero-time observation.
        assert!(quotes.iter().any(|q| q.ttm_years == 0.0));
    }

    #[test]
    fn rejects_degenerate_configs() {
        let mut cfg = GeneratorConfig {
            contracts: 0,
            ..Default::default()
        };
        assert!(generate_synthetic(&cfg, 1).is_err());
        cfg.contracts = 3;
        cfg.end_date = cfg.start_date;
        assert!(generate_synthetic(&cfg, 1).is_err());
        let short = GeneratorConfig {
            end_date: NaiveDate::from_ymd_opt(2020, 2, 1).unwrap(),
            ..Default::default()
        };
        assert!(generate_synthetic(&short, 1).is_err());
    }

    #[test]
    fn weekend_days_are_excluded() {
        let days = trading_days(
            NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(2020, 1, 12).unwrap(),
        );
        // Jan 2020: 1st is a Wednesday; 4th/5th and 11th/12th are
        // weekend days.
        assert_eq!(days.len(), 8);
        assert!(days
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
    }
}
