//! Central finite-difference gradient checking.
//!
//! The oracle perturbs each parameter element by ±h, re-runs the
//! forward pass, and compares (f(x+h) - f(x-h)) / 2h against the
//! gradient produced by [`Tensor::backward`]. It exercises only the
//! forward path, so it stays independent of the reverse-mode code it
//! verifies.

use crate::tensor::Tensor;

/// Default step for double-precision central differences.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Worst observed deviation between analytic and numerical gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradReport {
    pub max_relative_error: f64,
    pub checked: usize,
}

/// Relative error with an absolute floor so near-zero gradient pairs
/// compare on an absolute scale.
fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs() * 1e2
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Checks d loss / d param for every element of every tensor in
/// `params`. `forward` must rebuild the graph from the current
/// parameter values and return the scalar loss tensor.
pub fn check_loss_fn(
    forward: impl Fn() -> Tensor,
    params: &[Tensor],
    step: f64,
) -> GradReport {
    for p in params {
        p.zero_grad();
    }
    forward().backward().expect("loss must be scalar");
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();

    let eval = || forward().item();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (p, grads) in params.iter().zip(&analytic) {
        for i in 0..p.len() {
            let original = p.data()[i];
            p.update_data(|d| d[i] = original + step);
            let up = eval();
            p.update_data(|d| d[i] = original - step);
            let down = eval();
            p.update_data(|d| d[i] = original);
            let numeric = (up - down) / (2.0 * step);
            worst = worst.max(relative_error(grads[i], numeric));
            checked += 1;
        }
    }
    for p in params {
        p.zero_grad();
    }
    GradReport {
        max_relative_error: worst,
        checked,
    }
}
