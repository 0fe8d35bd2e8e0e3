//! European option pricing lab.
//!
//! The crate bundles everything needed to run a self-contained option
//! pricing experiment end to end:
//!
//! - [`pricing`]: closed-form European pricers with and without a
//!   continuous dividend yield, plus the normal-CDF and d1/d2 machinery.
//! - [`verify`]: independent stochastic (geometric Brownian motion /
//!   Monte-Carlo) and PDE-residual checks of the analytic pricers.
//! - [`tensor`]: a minimal N-dimensional array with reverse-mode
//!   automatic differentiation; the substrate for all neural models.
//! - [`kan`], [`conv_kan`]: Kolmogorov-Arnold layers (trainable
//!   spline + SiLU edge functions) and their 1D convolutional variant.
//! - [`lstm`]: a dense LSTM baseline and a 1D convolutional LSTM cell
//!   with peephole connections.
//! - [`garch`]: GARCH(1,1) conditional volatility estimation.
//! - [`data`]: dataset schema, CSV ingestion, synthetic option-chain
//!   generation, the chronological cross-boundary split, and z-score
//!   normalization.
//! - [`train`]: MSE loss, Adam, the training loop, and the
//!   MSE/RMSE/MAE/MAPE metric suite.
//! - [`experiment`]: the deterministic six-model benchmark pipeline and
//!   its report artifacts (CSV tables, SVG charts, run manifest).

pub mod config;
pub mod conv_kan;
pub mod data;
pub mod dense;
pub mod experiment;
pub mod garch;
pub mod gradcheck;
pub mod kan;
pub mod lstm;
pub mod manifest;
pub mod models;
pub mod pricing;
pub mod rng;
pub mod svg;
pub mod tensor;
pub mod train;
pub mod verify;

pub use pricing::{MarketParams, OptionKind};
pub use tensor::Tensor;
