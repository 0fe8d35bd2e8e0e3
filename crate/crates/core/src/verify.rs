//! Independent verification of the analytic pricers.
//!
//! Two routes that share nothing with the closed forms beyond the
//! parameter struct: terminal-value Monte-Carlo under geometric
//! Brownian motion (risk-neutral drift, antithetic pairs), and a
//! finite-difference residual of the pricing PDE evaluated on the
//! analytic surface. The payoff surface serves as a negative control
//! for the latter.

use thiserror::Error;

use crate::pricing::{self, MarketParams, OptionKind};
use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum VerifyError {
    #[error("invalid GBM specification: {0}")]
    Spec(&'static str),
    #[error("invalid Monte-Carlo request: {0}")]
    Mc(&'static str),
    #[error("invalid finite-difference step: {0}")]
    Step(&'static str),
}

/// Geometric Brownian motion: dS = mu S dt + sigma S dz.
#[derive(Debug, Clone, Copy)]
pub struct GbmSpec {
    pub initial: f64,
    pub drift: f64,
    pub volatility: f64,
    pub horizon: f64,
    /// Retained for path-dependent extensions; the terminal simulation
    /// uses the exact lognormal solution and never discretizes.
    pub steps: usize,
}

impl GbmSpec {
    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.initial.is_finite()
            && self.drift.is_finite()
            && self.volatility.is_finite()
            && self.horizon.is_finite())
        {
            return Err(VerifyError::Spec("non-finite field"));
        }
        if self.initial <= 0.0 {
            return Err(VerifyError::Spec("initial must be > 0"));
        }
        if self.volatility < 0.0 {
            return Err(VerifyError::Spec("volatility must be >= 0"));
        }
        if self.horizon <= 0.0 {
            return Err(VerifyError::Spec("horizon must be > 0"));
        }
        if self.steps == 0 {
            return Err(VerifyError::Spec("steps must be >= 1"));
        }
        Ok(())
    }
}

/// A Monte-Carlo price with its sampling error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
}

/// Paths are drawn in fixed-size blocks, each from its own ChaCha
/// stream derived from the master seed, so any parallel schedule that
/// preserves block order reproduces the sequential result bit for bit.
const PATH_BLOCK: usize = 1 << 16;

fn block_rng(seed: u64, block: usize) -> Rng {
    Rng::with_stream(seed, block as u64)
}

/// Draws terminal prices S_T = S0 exp((mu - sigma^2/2) T + sigma sqrt(T) Z).
pub fn simulate_gbm_terminal(
    spec: &GbmSpec,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>, VerifyError> {
    spec.validate()?;
    if n_paths == 0 {
        return Err(VerifyError::Spec("n_paths must be >= 1"));
    }
    let drift_term = (spec.drift - 0.5 * spec.volatility * spec.volatility) * spec.horizon;
    let diff_term = spec.volatility * spec.horizon.sqrt();
    let mut out = Vec::with_capacity(n_paths);
    let mut block = 0;
    while out.len() < n_paths {
        let mut rng = block_rng(seed, block);
        let take = PATH_BLOCK.min(n_paths - out.len());
        for _ in 0..take {
            let z = rng.normal();
            out.push(spec.initial * (drift_term + diff_term * z).exp());
        }
        block += 1;
    }
    Ok(out)
}

fn payoff_stats(payoffs: impl Iterator<Item = f64>, n: usize) -> (f64, f64) {
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for p in payoffs {
        sum += p;
        sum_sq += p * p;
    }
    let n_f = n as f64;
    let mean = sum / n_f;
    let var = (sum_sq / n_f - mean * mean).max(0.0);
    (mean, (var / n_f).sqrt())
}

fn validate_mc(p: &MarketParams, n_paths: usize) -> Result<(), VerifyError> {
    if n_paths < 2 {
        return Err(VerifyError::Mc("need at least 2 paths"));
    }
    if p.spot <= 0.0 {
        return Err(VerifyError::Mc("spot must be > 0"));
    }
    if p.strike < 0.0 {
        return Err(VerifyError::Mc("strike must be >= 0"));
    }
    if p.volatility < 0.0 {
        return Err(VerifyError::Mc("volatility must be >= 0"));
    }
    if p.maturity <= 0.0 {
        return Err(VerifyError::Mc("maturity must be > 0"));
    }
    Ok(())
}

/// Risk-neutral Monte-Carlo price with antithetic pairs: pair p of
/// draws (Z, -Z) contributes the pair-averaged discounted payoff, and
/// the standard error comes from the pair-mean sample.
pub fn mc_price(
    p: &MarketParams,
    kind: OptionKind,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, VerifyError> {
    validate_mc(p, n_paths)?;
    let pairs = n_paths / 2;
    let drift_term =
        (p.rate - p.dividend_yield - 0.5 * p.volatility * p.volatility) * p.maturity;
    let diff_term = p.volatility * p.maturity.sqrt();
    let discount = (-p.rate * p.maturity).exp();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut done = 0;
    let mut block = 0;
    while done < pairs {
        let mut rng = block_rng(seed, block);
        let take = PATH_BLOCK.min(pairs - done);
        for _ in 0..take {
            let z = rng.normal();
            let up = p.spot * (drift_term + diff_term * z).exp();
            let dn = p.spot * (drift_term - diff_term * z).exp();
            let pair_mean = 0.5
                * (pricing::payoff(up, p.strike, kind) + pricing::payoff(dn, p.strike, kind));
            let v = discount * pair_mean;
            sum += v;
            sum_sq += v * v;
        }
        done += take;
        block += 1;
    }
    let n_f = pairs as f64;
    let mean = sum / n_f;
    let var = (sum_sq / n_f - mean * mean).max(0.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n_f).sqrt(),
        paths: pairs * 2,
    })
}

/// Plain (non-antithetic) estimator over the same path budget; used to
/// measure the variance reduction of the paired estimator.
pub fn mc_price_plain(
    p: &MarketParams,
    kind: OptionKind,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate, VerifyError> {
    validate_mc(p, n_paths)?;
    let spec = GbmSpec {
        initial: p.spot,
        drift: p.rate - p.dividend_yield,
        volatility: p.volatility,
        horizon: p.maturity,
        steps: 1,
    };
    let terminals = simulate_gbm_terminal(&spec, n_paths, seed).map_err(|_| {
        VerifyError::Mc("invalid parameters for terminal simulation")
    })?;
    let discount = (-p.rate * p.maturity).exp();
    let (mean, se) = payoff_stats(
        terminals
            .iter()
            .map(|&s| discount * pricing::payoff(s, p.strike, kind)),
        n_paths,
    );
    Ok(McEstimate {
        mean,
        std_error: se,
        paths: n_paths,
    })
}

/// Finite-difference residual of
/// df/dt + (r - q) S df/dS + sigma^2 S^2 / 2 d2f/dS2 - r f
/// evaluated on the analytic surface. Central differences: 3-point in
/// S, 2-point in calendar time. Should vanish up to truncation error.
///
/// With a dividend yield the drift term uses (r - q), the standard
/// dividend-adjusted form consistent with the pricing formula.
pub fn pde_residual(
    p: &MarketParams,
    kind: OptionKind,
    ds: f64,
    dt: f64,
) -> Result<f64, VerifyError> {
    residual_with(p, kind, ds, dt, |mp, k| {
        pricing::price_bsm(mp, k).expect("analytic price inside verified domain")
    })
}

/// Same stencil applied to the raw exercise payoff, which does not
/// satisfy the PDE away from expiry; negative control for
/// [`pde_residual`].
pub fn pde_residual_payoff(
    p: &MarketParams,
    kind: OptionKind,
    ds: f64,
    dt: f64,
) -> Result<f64, VerifyError> {
    residual_with(p, kind, ds, dt, |mp, k| pricing::payoff(mp.spot, mp.strike, k))
}

fn residual_with(
    p: &MarketParams,
    kind: OptionKind,
    ds: f64,
    dt: f64,
    f: impl Fn(&MarketParams, OptionKind) -> f64,
) -> Result<f64, VerifyError> {
    if !(ds > 0.0 && ds < p.spot) {
        return Err(VerifyError::Step("need 0 < dS < S0"));
    }
    if !(dt > 0.0 && dt < p.maturity) {
        return Err(VerifyError::Step("need 0 < dt < maturity"));
    }
    if p.maturity - dt <= 0.0 {
        return Err(VerifyError::Step("time step crosses the expiry boundary"));
    }
    let at = |spot: f64, maturity: f64| {
        f(
            &MarketParams {
                spot,
                maturity,
                ..*p
            },
            kind,
        )
    };
    let f0 = at(p.spot, p.maturity);
    // Calendar time runs opposite to time-to-maturity.
    let df_dt = (at(p.spot, p.maturity - dt) - at(p.spot, p.maturity + dt)) / (2.0 * dt);
    let df_ds = (at(p.spot + ds, p.maturity) - at(p.spot - ds, p.maturity)) / (2.0 * ds);
    let d2f_ds2 = (at(p.spot + ds, p.maturity) - 2.0 * f0 + at(p.spot - ds, p.maturity))
        / (ds * ds);
    let s = p.spot;
    let sig = p.volatility;
    Ok(df_dt + (p.rate - p.dividend_yield) * s * df_ds + 0.5 * sig * sig * s * s * d2f_ds2
        - p.rate * f0)
}

// ---------------------------------------------------------------------------
// Verification suites (consumed by the CLI `verify` subcommand and the
// acceptance tests).
// ---------------------------------------------------------------------------

/// One parity-grid row.
#[derive(Debug, Clone)]
pub struct ParityRow {
    pub params: MarketParams,
    pub call: f64,
    pub put: f64,
    pub parity_residual: f64,
    pub bs_vs_bsm_q0: f64,
}

/// Random-grid check of put-call parity and of the zero-dividend
/// reduction. Returns rows plus the worst absolute residuals.
pub fn parity_suite(points: usize, seed: u64) -> (Vec<ParityRow>, f64, f64) {
    let mut rng = Rng::new(seed);
    let mut rows = Vec::with_capacity(points);
    let mut worst_parity = 0.0f64;
    let mut worst_reduction = 0.0f64;
    for _ in 0..points {
        let p = MarketParams {
            spot: rng.uniform_in(20.0, 300.0),
            strike: rng.uniform_in(20.0, 300.0),
            rate: rng.uniform_in(0.0, 0.12),
            dividend_yield: rng.uniform_in(0.0, 0.06),
            volatility: rng.uniform_in(0.05, 0.8),
            maturity: rng.uniform_in(0.01, 3.0),
        };
        let call = pricing::price_bsm(&p, OptionKind::Call).unwrap();
        let put = pricing::price_bsm(&p, OptionKind::Put).unwrap();
        let forward = p.spot * (-p.dividend_yield * p.maturity).exp()
            - p.strike * (-p.rate * p.maturity).exp();
        let parity_residual = call - put - forward;

        let q0 = MarketParams {
            dividend_yield: 0.0,
            ..p
        };
        let reduction = pricing::price_bs(&q0, OptionKind::Call).unwrap()
            - pricing::price_bsm(&q0, OptionKind::Call).unwrap();

        worst_parity = worst_parity.max(parity_residual.abs());
        worst_reduction = worst_reduction.max(reduction.abs());
        rows.push(ParityRow {
            params: p,
            call,
            put,
            parity_residual,
            bs_vs_bsm_q0: reduction,
        });
    }
    (rows, worst_parity, worst_reduction)
}

/// One analytic-vs-Monte-Carlo comparison row.
#[derive(Debug, Clone)]
pub struct McRow {
    pub params: MarketParams,
    pub kind: OptionKind,
    pub analytic: f64,
    pub mc_mean: f64,
    pub mc_std_error: f64,
    /// |analytic - mc| in standard-error units.
    pub z_score: f64,
}

/// Fixed 10-point grid comparison at `n_paths` antithetic paths.
pub fn mc_suite(n_paths: usize, seed: u64) -> Vec<McRow> {
    let grid = [
        (100.0, 100.0, 0.05, 0.00, 0.20, 1.00, OptionKind::Call),
        (100.0, 100.0, 0.05, 0.00, 0.20, 1.00, OptionKind::Put),
        (100.0, 110.0, 0.03, 0.01, 0.25, 0.50, OptionKind::Call),
        (100.0, 90.0, 0.03, 0.01, 0.25, 0.50, OptionKind::Put),
        (120.0, 100.0, 0.07, 0.02, 0.15, 2.00, OptionKind::Call),
        (80.0, 100.0, 0.07, 0.02, 0.15, 2.00, OptionKind::Put),
        (100.0, 100.0, 0.00, 0.00, 0.40, 0.25, OptionKind::Call),
        (100.0, 100.0, 0.10, 0.05, 0.40, 0.25, OptionKind::Put),
        (250.0, 200.0, 0.04, 0.03, 0.30, 1.50, OptionKind::Call),
        (50.0, 60.0, 0.04, 0.03, 0.30, 1.50, OptionKind::Put),
    ];
    grid.iter()
        .enumerate()
        .map(|(i, &(spot, strike, rate, q, vol, t, kind))| {
            let p = MarketParams {
                spot,
                strike,
                rate,
                dividend_yield: q,
                volatility: vol,
                maturity: t,
            };
            let analytic = pricing::price_bsm(&p, kind).unwrap();
            let est = mc_price(&p, kind, n_paths, seed.wrapping_add(i as u64)).unwrap();
            McRow {
                params: p,
                kind,
                analytic,
                mc_mean: est.mean,
                mc_std_error: est.std_error,
                z_score: (analytic - est.mean).abs() / est.std_error,
            }
        })
        .collect()
}

/// One PDE-residual row: analytic surface vs payoff negative control.
#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub spot: f64,
    pub maturity: f64,
    pub analytic_residual: f64,
    pub payoff_residual: f64,
}

/// 25 interior grid points at and above the strike, where the payoff
/// control is bounded away from zero.
pub fn residual_suite(p: &MarketParams, kind: OptionKind) -> Vec<ResidualRow> {
    let moneyness = [1.0, 1.05, 1.15, 1.25, 1.35];
    let maturities = [0.2, 0.4, 0.6, 0.8, 1.0];
    let mut rows = Vec::with_capacity(25);
    for &m in &moneyness {
        for &t in &maturities {
            let point = MarketParams {
                spot: m * p.strike,
                maturity: t,
                ..*p
            };
            let ds = 1e-3 * point.spot;
            let dt = 1e-5;
            rows.push(ResidualRow {
                spot: point.spot,
                maturity: t,
                analytic_residual: pde_residual(&point, kind, ds, dt).unwrap(),
                payoff_residual: pde_residual_payoff(&point, kind, ds, dt).unwrap(),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn atm() -> MarketParams {
        MarketParams {
            spot: 100.0,
            strike: 100.0,
            rate: 0.05,
            dividend_yield: 0.0,
            volatility: 0.2,
            maturity: 1.0,
        }
    }

    #[test]
    fn zero_volatility_paths_are_deterministic() {
        let spec = GbmSpec {
            initial: 50.0,
            drift: 0.07,
            volatility: 0.0,
            horizon: 2.0,
            steps: 1,
        };
        let paths = simulate_gbm_terminal(&spec, 100, 3).unwrap();
        let want = 50.0 * (0.07f64 * 2.0).exp();
        assert!(paths.iter().all(|&s| s == want));
    }

    #[test]
    fn driftless_exponential_is_a_martingale() {
        let spec = GbmSpec {
            initial: 1.0,
            drift: 0.0,
            volatility: 0.2,
            horizon: 1.0,
            steps: 1,
        };
        let n = 1_000_000;
        let paths = simulate_gbm_terminal(&spec, n, 11).unwrap();
        let (mean, se) = super::payoff_stats(paths.iter().copied(), n);
        assert!(
            (mean - 1.0).abs() < 3.0 * se,
            "mean {mean} se {se}: martingale drifted"
        );
    }

    #[test]
    fn terminal_simulation_is_bitwise_deterministic() {
        let spec = GbmSpec {
            initial: 100.0,
            drift: 0.05,
            volatility: 0.3,
            horizon: 0.5,
            steps: 4,
        };
        let a = simulate_gbm_terminal(&spec, 70_000, 9).unwrap();
        let b = simulate_gbm_terminal(&spec, 70_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|&s| s > 0.0));
        // block layout: a shorter run is a prefix of a longer one
        let c = simulate_gbm_terminal(&spec, 1_000, 9).unwrap();
        assert_eq!(&a[..1_000], &c[..]);
    }

    #[test]
    fn zero_strike_call_prices_the_forward() {
        let p = MarketParams {
            strike: 0.0,
            dividend_yield: 0.02,
            ..atm()
        };
        let est = mc_price(&p, OptionKind::Call, 200_000, 5).unwrap();
        let forward = p.spot * (-p.dividend_yield * p.maturity).exp();
        assert!(
            (est.mean - forward).abs() < 3.0 * est.std_error,
            "mean {} forward {forward} se {}",
            est.mean,
            est.std_error
        );
    }

    #[test]
    fn zero_volatility_collapses_to_discounted_intrinsic() {
        let p = MarketParams {
            volatility: 0.0,
            dividend_yield: 0.01,
            ..atm()
        };
        let est = mc_price(&p, OptionKind::Call, 1_000, 5).unwrap();
        let fwd = p.spot * ((p.rate - p.dividend_yield) * p.maturity).exp();
        let want = (fwd - p.strike).max(0.0) * (-p.rate * p.maturity).exp();
        // identical paths; only summation rounding remains
        assert_abs_diff_eq!(est.mean, want, epsilon = 1e-12);
        assert!(est.std_error < 1e-6);
    }

    #[test]
    fn mc_rejects_degenerate_requests() {
        assert!(mc_price(&atm(), OptionKind::Call, 1, 0).is_err());
        let bad = MarketParams {
            maturity: 0.0,
            ..atm()
        };
        assert!(mc_price(&bad, OptionKind::Call, 100, 0).is_err());
    }

    #[test]
    fn antithetic_beats_plain_on_convex_payoffs() {
        let p = atm();
        let paired = mc_price(&p, OptionKind::Call, 100_000, 17).unwrap();
        let plain = mc_price_plain(&p, OptionKind::Call, 100_000, 17).unwrap();
        assert!(
            paired.std_error <= plain.std_error,
            "antithetic {} vs plain {}",
            paired.std_error,
            plain.std_error
        );
        assert_eq!(paired.paths, plain.paths);
    }

    #[test]
    fn mc_agrees_with_analytic_on_grid() {
        for row in mc_suite(200_000, 42) {
            assert!(
                row.z_score < 3.0,
                "{:?} {:?}: z {}",
                row.params,
                row.kind,
                row.z_score
            );
        }
    }

    #[test]
    fn analytic_residual_is_small_and_payoff_control_is_not() {
        // At these steps the at-the-money truncation error measures
        // 1.7e-5 in units of r*f (spatial term, second order); the
        // bound freezes that with headroom.
        let p = atm();
        let ds = 1e-3 * p.spot;
        let dt = 1e-5;
        let r = pde_residual(&p, OptionKind::Call, ds, dt).unwrap();
        let rf_scale = p.rate * pricing::price_bsm(&p, OptionKind::Call).unwrap();
        assert!(
            r.abs() < 2e-5 * rf_scale,
            "residual {r} vs scale {rf_scale}"
        );
        let control = pde_residual_payoff(&p, OptionKind::Call, ds, dt).unwrap();
        assert!(control.abs() > 100.0 * r.abs());
    }

    #[test]
    fn residual_shrinks_at_second_order() {
        // Evaluate off-money so the surface is smooth, then halve steps.
        let p = MarketParams {
            spot: 115.0,
            ..atm()
        };
        let r1 = pde_residual(&p, OptionKind::Call, 0.8, 4e-3).unwrap();
        let r2 = pde_residual(&p, OptionKind::Call, 0.4, 2e-3).unwrap();
        let ratio = r1 / r2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "expected ~4x per halving, got {ratio} ({r1} -> {r2})"
        );
    }

    #[test]
    fn residual_rejects_boundary_crossing() {
        let p = MarketParams {
            maturity: 1e-6,
            ..atm()
        };
        assert!(pde_residual(&p, OptionKind::Call, 0.1, 1e-5).is_err());
    }

    #[test]
    fn residual_suite_controls_are_pointwise_separated() {
        for row in residual_suite(&atm(), OptionKind::Call) {
            assert!(
                row.payoff_residual.abs() >= 100.0 * row.analytic_residual.abs(),
                "S {} T {}: analytic {} payoff {}",
                row.spot,
                row.maturity,
                row.analytic_residual,
                row.payoff_residual
            );
        }
    }

    #[test]
    fn parity_suite_matches_direct_identity() {
        let (rows, worst_parity, worst_reduction) = parity_suite(64, 1);
        assert_eq!(rows.len(), 64);
        assert!(worst_parity < 1e-10);
        assert!(worst_reduction < 1e-12);
        let r = &rows[0];
        assert_abs_diff_eq!(
            r.call - r.put,
            r.params.spot * (-r.params.dividend_yield * r.params.maturity).exp()
                - r.params.strike * (-r.params.rate * r.params.maturity).exp(),
            epsilon = 1e-10
        );
    }
}
