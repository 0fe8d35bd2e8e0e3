//! GARCH(1,1) conditional volatility.
//!
//! The filter recursion is sigma2[t] = omega + alpha * r[t-1]^2 +
//! beta * sigma2[t-1], seeded with the sample variance of the return
//! series. Returns are treated as zero-mean innovations. Fitting
//! maximizes the Gaussian log-likelihood with a Nelder-Mead simplex
//! started from a fixed grid, so identical inputs always produce
//! identical parameters.

use chrono::NaiveDate;
use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum GarchError {
    #[error("invalid parameters: {0}")]
    Params(&'static str),
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("need at least {need} observations, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("optimizer failed to converge; best-so-far omega={omega} alpha={alpha} beta={beta}")]
    NonConvergence { omega: f64, alpha: f64, beta: f64 },
}

/// Stationary GARCH(1,1) coefficients.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GarchParams {
    pub fn validate(&self) -> Result<(), GarchError> {
        if !(self.omega.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(GarchError::Params("non-finite coefficient"));
        }
        if self.omega <= 0.0 {
            return Err(GarchError::Params("omega must be > 0"));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(GarchError::Params("alpha and beta must be >= 0"));
        }
        if self.alpha + self.beta >= 1.0 {
            return Err(GarchError::Params("alpha + beta must be < 1"));
        }
        Ok(())
    }

    /// omega / (1 - alpha - beta).
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.alpha - self.beta)
    }
}

/// Annualized conditional volatility per trading date.
#[derive(Debug, Clone)]
pub struct VolSeries {
    pub dates: Vec<NaiveDate>,
    pub sigma: Vec<f64>,
}

impl VolSeries {
    pub fn validate(&self) -> Result<(), GarchError> {
        if self.dates.len() != self.sigma.len() {
            return Err(GarchError::Degenerate("dates and sigma lengths differ"));
        }
        if self.dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GarchError::Degenerate("dates must be strictly increasing"));
        }
        if self.sigma.iter().any(|&s| !s.is_finite() || s <= 0.0) {
            return Err(GarchError::Degenerate("sigma must be > 0"));
        }
        Ok(())
    }
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    // Spread at rounding scale counts as constant.
    if var.sqrt() <= 1e-12 * (1.0 + mean.abs()) {
        0.0
    } else {
        var
    }
}

/// Conditional variance series, one entry per return, with
/// sigma2[0] = sample variance.
pub fn garch_filter(p: &GarchParams, returns: &[f64]) -> Result<Vec<f64>, GarchError> {
    p.validate()?;
    if returns.len() < 2 {
        return Err(GarchError::TooShort {
            need: 2,
            got: returns.len(),
        });
    }
    let seed_var = population_variance(returns);
    if seed_var <= 0.0 {
        return Err(GarchError::Degenerate("constant returns"));
    }
    let mut out = Vec::with_capacity(returns.len());
    out.push(seed_var);
    for t in 1..returns.len() {
        let eps = returns[t - 1];
        out.push(p.omega + p.alpha * eps * eps + p.beta * out[t - 1]);
    }
    Ok(out)
}

/// Gaussian log-likelihood (up to the constant term):
/// -1/2 sum_{t>=1} [ln sigma2_t + r_t^2 / sigma2_t].
pub fn garch_loglik(p: &GarchParams, returns: &[f64]) -> Result<f64, GarchError> {
    let sigma2 = garch_filter(p, returns)?;
    let mut acc = 0.0;
    for t in 1..returns.len() {
        let v = sigma2[t];
        acc += v.ln() + returns[t] * returns[t] / v;
    }
    Ok(-0.5 * acc)
}

const MIN_FIT_LEN: usize = 100;
/// Keep fitted parameters strictly inside the stationarity region.
const STATIONARY_CAP: f64 = 0.9999;

/// Multi-start grid for the fitter: every (alpha, beta) pairing with
/// alpha+beta < 1, omega from variance targeting. Public so callers
/// can verify that a fit dominates every start point.
pub fn fit_start_grid(sample_var: f64) -> Vec<GarchParams> {
    let alphas = [0.02, 0.05, 0.10, 0.20];
    let betas = [0.50, 0.70, 0.85, 0.94];
    let mut starts = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            if alpha + beta < STATIONARY_CAP {
                starts.push(GarchParams {
                    omega: sample_var * (1.0 - alpha - beta),
                    alpha,
                    beta,
                });
            }
        }
    }
    starts
}

fn neg_loglik(point: &[f64; 3], returns: &[f64], scale: f64) -> f64 {
    let p = GarchParams {
        omega: point[0] * scale,
        alpha: point[1],
        beta: point[2],
    };
    if p.omega <= 0.0
        || p.alpha < 0.0
        || p.beta < 0.0
        || p.alpha + p.beta >= STATIONARY_CAP
    {
        return f64::INFINITY;
    }
    match garch_loglik(&p, returns) {
        Ok(ll) if ll.is_finite() => -ll,
        _ => f64::INFINITY,
    }
}

struct SimplexOutcome {
    point: [f64; 3],
    value: f64,
    converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) on the penalized negative log-likelihood.
fn nelder_mead(
    start: [f64; 3],
    returns: &[f64],
    scale: f64,
    max_iter: usize,
    tol: f64,
) -> SimplexOutcome {
    let f = |x: &[f64; 3]| neg_loglik(x, returns, scale);
    let steps = [0.5 * start[0].max(1e-4), 0.05, 0.05];
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(&start)));
    for i in 0..3 {
        let mut v = start;
        v[i] += steps[i];
        simplex.push((v, f(&v)));
    }

    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let best = simplex[0].1;
        let worst = simplex[3].1;
        if worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 3];
        for (v, _) in &simplex[..3] {
            for i in 0..3 {
                centroid[i] += v[i] / 3.0;
            }
        }
        let reflect = |c: &[f64; 3], w: &[f64; 3], coef: f64| {
            let mut out = [0.0; 3];
            for i in 0..3 {
                out[i] = c[i] + coef * (c[i] - w[i]);
            }
            out
        };
        let worst_point = simplex[3].0;
        let xr = reflect(&centroid, &worst_point, 1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = reflect(&centroid, &worst_point, 2.0);
            let fe = f(&xe);
            simplex[3] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (xr, fr);
        } else {
            let xc = reflect(&centroid, &worst_point, -0.5);
            let fc = f(&xc);
            if fc < simplex[3].1 {
                simplex[3] = (xc, fc);
            } else {
                let best_point = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    for (v, b) in entry.0.iter_mut().zip(&best_point) {
                        *v = b + 0.5 * (*v - b);
                    }
                    entry.1 = f(&entry.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    SimplexOutcome {
        point: simplex[0].0,
        value: simplex[0].1,
        converged,
    }
}

/// Maximum-likelihood fit. Deterministic: fixed multi-start grid,
/// fixed iteration caps, best converged run wins.
pub fn garch_fit(returns: &[f64]) -> Result<GarchParams, GarchError> {
    if returns.len() < MIN_FIT_LEN {
        return Err(GarchError::TooShort {
            need: MIN_FIT_LEN,
            got: returns.len(),
        });
    }
    let sample_var = population_variance(returns);
    if sample_var <= 0.0 {
        return Err(GarchError::Degenerate("constant returns"));
    }

    // Optimize omega in units of the sample variance so all three
    // coordinates share a scale.
    let scale = sample_var;
    let mut best: Option<SimplexOutcome> = None;
    for start in fit_start_grid(sample_var) {
        let outcome = nelder_mead(
            [start.omega / scale, start.alpha, start.beta],
            returns,
            scale,
            400,
            1e-12,
        );
        best = Some(match best {
            Some(cur) if cur.value <= outcome.value => cur,
            _ => outcome,
        });
    }
    let best = best.expect("grid is nonempty");
    let params = GarchParams {
        omega: best.point[0] * scale,
        alpha: best.point[1].max(0.0),
        beta: best.point[2].max(0.0),
    };
    if !best.value.is_finite() || params.validate().is_err() {
        return Err(GarchError::NonConvergence {
            omega: params.omega,
            alpha: params.alpha,
            beta: params.beta,
        });
    }
    if !best.converged {
        return Err(GarchError::NonConvergence {
            omega: params.omega,
            alpha: params.alpha,
            beta: params.beta,
        });
    }
    Ok(params)
}

/// daily_sigma * sqrt(trading_days).
pub fn annualize(daily_sigma: f64, trading_days: usize) -> f64 {
    debug_assert!(daily_sigma >= 0.0);
    daily_sigma * (trading_days as f64).sqrt()
}

/// Simulates a zero-mean GARCH(1,1) return series under the given
/// parameters (consistency harness for the fitter).
pub fn simulate_garch(p: &GarchParams, n: usize, seed: u64) -> Result<Vec<f64>, GarchError> {
    p.validate()?;
    let mut rng = Rng::new(seed);
    let mut sigma2 = p.unconditional_variance();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let r = sigma2.sqrt() * rng.normal();
        out.push(r);
        sigma2 = p.omega + p.alpha * r * r + p.beta * sigma2;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn stationarity_identity() {
        let p = GarchParams {
            omega: 0.1,
            alpha: 0.2,
            beta: 0.7,
        };
        assert_abs_diff_eq!(p.unconditional_variance(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_nonstationary_params() {
        let p = GarchParams {
            omega: 0.1,
            alpha: 0.5,
            beta: 0.5,
        };
        assert!(p.validate().is_err());
        assert!(GarchParams {
            omega: 0.0,
            alpha: 0.1,
            beta: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn constant_filter_when_alpha_beta_zero() {
        let p = GarchParams {
            omega: 0.04,
            alpha: 0.0,
            beta: 0.0,
        };
        let returns = [0.01, -0.02, 0.005, 0.015, -0.01];
        let sigma2 = garch_filter(&p, &returns).unwrap();
        assert!(sigma2[1..].iter().all(|&v| v == 0.04));
    }

    #[test]
    fn filter_is_floored_by_omega() {
        let p = GarchParams {
            omega: 3e-6,
            alpha: 0.05,
            beta: 0.9,
        };
        let mut rng = Rng::new(1);
        let returns: Vec<f64> = (0..500).map(|_| 0.01 * rng.normal()).collect();
        let sigma2 = garch_filter(&p, &returns).unwrap();
        assert!(sigma2[1..].iter().all(|&v| v >= p.omega));
        assert!(sigma2.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn long_filter_run_matches_unconditional_variance() {
        let p = GarchParams {
            omega: 2e-6,
            alpha: 0.1,
            beta: 0.85,
        };
        let returns = simulate_garch(&p, 100_000, 99).unwrap();
        let sigma2 = garch_filter(&p, &returns).unwrap();
        let mean_var = sigma2.iter().sum::<f64>() / sigma2.len() as f64;
        assert_relative_eq!(
            mean_var,
            p.unconditional_variance(),
            max_relative = 0.05
        );
    }

    #[test]
    fn fit_recovers_simulated_parameters() {
        let truth = GarchParams {
            omega: 2e-6,
            alpha: 0.1,
            beta: 0.85,
        };
        let returns = simulate_garch(&truth, 10_000, 1234).unwrap();
        let fitted = garch_fit(&returns).unwrap();
        assert!(
            (fitted.alpha - truth.alpha).abs() < 0.05,
            "alpha {} vs {}",
            fitted.alpha,
            truth.alpha
        );
        assert!(
            ((fitted.alpha + fitted.beta) - (truth.alpha + truth.beta)).abs() < 0.05,
            "persistence {} vs {}",
            fitted.alpha + fitted.beta,
            truth.alpha + truth.beta
        );
    }

    #[test]
    fn fit_on_iid_noise_finds_small_alpha() {
        let mut rng = Rng::new(55);
        let returns: Vec<f64> = (0..10_000).map(|_| 0.012 * rng.normal()).collect();
        let fitted = garch_fit(&returns).unwrap();
        assert!(fitted.alpha < 0.05, "alpha {}", fitted.alpha);
    }

    #[test]
    fn fit_beats_every_grid_start() {
        let truth = GarchParams {
            omega: 5e-6,
            alpha: 0.08,
            beta: 0.88,
        };
        let returns = simulate_garch(&truth, 4_000, 7).unwrap();
        let fitted = garch_fit(&returns).unwrap();
        let fitted_ll = garch_loglik(&fitted, &returns).unwrap();
        let var = super::population_variance(&returns);
        for start in super::fit_start_grid(var) {
            let ll = garch_loglik(&start, &returns).unwrap();
            assert!(
                fitted_ll >= ll,
                "fit ll {fitted_ll} below start {start:?} ll {ll}"
            );
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let truth = GarchParams {
            omega: 2e-6,
            alpha: 0.12,
            beta: 0.8,
        };
        let returns = simulate_garch(&truth, 2_000, 3).unwrap();
        assert_eq!(garch_fit(&returns).unwrap(), garch_fit(&returns).unwrap());
    }

    #[test]
    fn fit_rejects_short_or_constant_input() {
        assert!(matches!(
            garch_fit(&[0.01; 50]),
            Err(GarchError::TooShort { .. })
        ));
        assert!(matches!(
            garch_fit(&[0.01; 200]),
            Err(GarchError::Degenerate(_))
        ));
    }

    #[test]
    fn annualization_arithmetic() {
        assert_eq!(annualize(0.0, 252), 0.0);
        assert_abs_diff_eq!(annualize(0.01, 252), 0.15875, epsilon = 1e-5);
        assert_eq!(annualize(0.37, 1), 0.37);
    }

    #[test]
    fn vol_series_validation() {
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let good = VolSeries {
            dates: vec![d("2020-01-02"), d("2020-01-03")],
            sigma: vec![0.2, 0.21],
        };
        assert!(good.validate().is_ok());
        let bad = VolSeries {
            dates: vec![d("2020-01-03"), d("2020-01-02")],
            sigma: vec![0.2, 0.21],
        };
        assert!(bad.validate().is_err());
    }
}
