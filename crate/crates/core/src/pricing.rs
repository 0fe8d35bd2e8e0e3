//! Closed-form European option pricing.
//!
//! Implements the classic no-dividend pricer ([`price_bs`]) and the
//! dividend-yield variant ([`price_bsm`]), together with the standard
//! normal CDF and the d1/d2 helpers they are built on. Everything here
//! is a pure function of value inputs and is safe to call concurrently.

use thiserror::Error;

/// Errors from the closed-form pricing routines.
#[derive(Debug, Error, PartialEq)]
pub enum PricingError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid market parameters: {0}")]
    Domain(&'static str),
    #[error("maturity is zero: d1/d2 undefined at the exercise boundary")]
    AtExpiry,
}

/// Call/put flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    /// The +1/-1 feature encoding used by the dataset schema.
    pub fn encoded(self) -> f64 {
        match self {
            OptionKind::Call => 1.0,
            OptionKind::Put => -1.0,
        }
    }

    pub fn from_encoded(v: f64) -> Option<Self> {
        if v == 1.0 {
            Some(OptionKind::Call)
        } else if v == -1.0 {
            Some(OptionKind::Put)
        } else {
            None
        }
    }
}

impl std::fmt::Display for OptionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OptionKind::Call => write!(f, "call"),
            OptionKind::Put => write!(f, "put"),
        }
    }
}

/// Market inputs for one European option.
///
/// `rate` and `dividend_yield` are continuously compounded per-year
/// rates; `volatility` is annualized; `maturity` is in years. Fields
/// are plain data: each operation validates the subset of constraints
/// it needs, so relaxed parameter sets (zero strike or zero volatility)
/// remain usable by the Monte-Carlo cross-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub dividend_yield: f64,
    pub volatility: f64,
    pub maturity: f64,
}

impl MarketParams {
    /// Validates the closed-form pricing domain: positive spot and
    /// strike, nonnegative maturity, positive volatility whenever the
    /// option has time value left.
    pub fn validate(&self) -> Result<(), PricingError> {
        let fields = [
            self.spot,
            self.strike,
            self.rate,
            self.dividend_yield,
            self.volatility,
            self.maturity,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(PricingError::NonFinite("market parameter"));
        }
        if self.spot <= 0.0 {
            return Err(PricingError::Domain("spot must be > 0"));
        }
        if self.strike <= 0.0 {
            return Err(PricingError::Domain("strike must be > 0"));
        }
        if self.maturity < 0.0 {
            return Err(PricingError::Domain("maturity must be >= 0"));
        }
        if self.maturity > 0.0 && self.volatility <= 0.0 {
            return Err(PricingError::Domain(
                "volatility must be > 0 when maturity > 0",
            ));
        }
        Ok(())
    }
}

// Rational approximations for erf/erfc (Cody, Math. Comp. 23, 1969;
// the classic double-precision coefficients). Absolute error is below
// 1e-16 over the whole line, which dominates every tolerance used
// downstream.
#[allow(clippy::excessive_precision)]
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
#[allow(clippy::excessive_precision)]
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
#[allow(clippy::excessive_precision)]
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
#[allow(clippy::excessive_precision)]
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
#[allow(clippy::excessive_precision)]
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
#[allow(clippy::excessive_precision)]
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.641_895_835_477_563e-1;

/// erf(x) for |x| <= 0.46875.
fn erf_small(x: f64) -> f64 {
    let z = x * x;
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// erfc(y) for y in (0.46875, 4].
fn erfc_mid(y: f64) -> f64 {
    let mut num = ERF_C[8] * y;
    let mut den = y;
    for i in 0..7 {
        num = (num + ERF_C[i]) * y;
        den = (den + ERF_D[i]) * y;
    }
    let r = (num + ERF_C[7]) / (den + ERF_D[7]);
    scaled_exp(y) * r
}

/// erfc(y) for y > 4.
fn erfc_tail(y: f64) -> f64 {
    let z = 1.0 / (y * y);
    let mut num = ERF_P[5] * z;
    let mut den = z;
    for i in 0..4 {
        num = (num + ERF_P[i]) * z;
        den = (den + ERF_Q[i]) * z;
    }
    let r = z * (num + ERF_P[4]) / (den + ERF_Q[4]);
    scaled_exp(y) * (INV_SQRT_PI - r) / y
}

/// exp(-y^2) split so the squared argument loses no low-order bits.
fn scaled_exp(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

/// Complementary error function on the whole real line.
fn erfc(x: f64) -> f64 {
    let y = x.abs();
    let pos = if y <= 0.46875 {
        1.0 - erf_small(x.abs())
    } else if y <= 4.0 {
        erfc_mid(y)
    } else if y < 26.6 {
        erfc_tail(y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - pos
    } else {
        pos
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal cumulative distribution function.
pub fn std_normal_cdf(x: f64) -> Result<f64, PricingError> {
    if !x.is_finite() {
        return Err(PricingError::NonFinite("std_normal_cdf argument"));
    }
    let u = x * FRAC_1_SQRT_2;
    if u.abs() <= 0.46875 {
        // Phi(x) = (1 + erf(u)) / 2; the odd-symmetric erf keeps
        // Phi(x) + Phi(-x) = 1 to rounding.
        Ok(0.5 + 0.5 * erf_small(u))
    } else {
        Ok(0.5 * erfc(-u))
    }
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// The d1/d2 pair, with the dividend yield in the drift:
/// d1 = [ln(S0/K) + (r - q + sigma^2/2) T] / (sigma sqrt(T)), d2 = d1 - sigma sqrt(T).
pub fn d1_d2(p: &MarketParams) -> Result<(f64, f64), PricingError> {
    p.validate()?;
    if p.maturity == 0.0 {
        return Err(PricingError::AtExpiry);
    }
    let sig_sqrt_t = p.volatility * p.maturity.sqrt();
    let d1 = ((p.spot / p.strike).ln()
        + (p.rate - p.dividend_yield + 0.5 * p.volatility * p.volatility) * p.maturity)
        / sig_sqrt_t;
    let d2 = d1 - sig_sqrt_t;
    Ok((d1, d2))
}

/// Exercise payoff at expiry.
pub fn payoff(spot: f64, strike: f64, kind: OptionKind) -> f64 {
    match kind {
        OptionKind::Call => (spot - strike).max(0.0),
        OptionKind::Put => (strike - spot).max(0.0),
    }
}

/// European price with a continuous dividend yield:
/// call = S0 e^{-qT} N(d1) - K e^{-rT} N(d2), put by symmetry.
/// At `maturity == 0` the exercise payoff is returned directly.
pub fn price_bsm(p: &MarketParams, kind: OptionKind) -> Result<f64, PricingError> {
    p.validate()?;
    if p.maturity == 0.0 {
        return Ok(payoff(p.spot, p.strike, kind));
    }
    let (d1, d2) = d1_d2(p)?;
    let disc_spot = p.spot * (-p.dividend_yield * p.maturity).exp();
    let disc_strike = p.strike * (-p.rate * p.maturity).exp();
    let price = match kind {
        OptionKind::Call => {
            disc_spot * std_normal_cdf(d1)? - disc_strike * std_normal_cdf(d2)?
        }
        OptionKind::Put => {
            disc_strike * std_normal_cdf(-d2)? - disc_spot * std_normal_cdf(-d1)?
        }
    };
    Ok(price.max(0.0))
}

/// European price without dividends; identical to [`price_bsm`] with
/// the dividend yield forced to zero.
pub fn price_bs(p: &MarketParams, kind: OptionKind) -> Result<f64, PricingError> {
    let no_div = MarketParams {
        dividend_yield: 0.0,
        ..*p
    };
    price_bsm(&no_div, kind)
}

/// Dividend-adjusted Delta: e^{-qT} N(d1) for calls,
/// e^{-qT} (N(d1) - 1) for puts. At expiry the indicator limit is used.
pub fn delta_bsm(p: &MarketParams, kind: OptionKind) -> Result<f64, PricingError> {
    p.validate()?;
    if p.maturity == 0.0 {
        let ind = if p.spot > p.strike {
            1.0
        } else if p.spot == p.strike {
            0.5
        } else {
            0.0
        };
        return Ok(match kind {
            OptionKind::Call => ind,
            OptionKind::Put => ind - 1.0,
        });
    }
    let (d1, _) = d1_d2(p)?;
    let disc = (-p.dividend_yield * p.maturity).exp();
    Ok(match kind {
        OptionKind::Call => disc * std_normal_cdf(d1)?,
        OptionKind::Put => disc * (std_normal_cdf(d1)? - 1.0),
    })
}
