//! Kolmogorov-Arnold layers.
//!
//! Every edge of a layer carries a trainable univariate function
//! phi(x) = w1 * spline(x) + w2 * silu(x); a layer is a dense
//! (out x in) grid of such edges whose outputs sum at each node, and a
//! network composes layers of compatible widths.

pub mod spline;

use std::rc::Rc;

use thiserror::Error;

pub use spline::{spline_eval, SplineBasis, SplineError};

use crate::rng::Rng;
use crate::tensor::{ops, BackwardCtx, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum KanError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("network widths {0:?} are not composable")]
    Widths(Vec<usize>),
}

/// Spline coefficient init scale. The spline weight starts at 1 and
/// the SiLU weight at 1/sqrt(fan_in), so a fresh node (which sums
/// fan_in edges) starts as an order-one noisy SiLU instead of an
/// amplifier.
const COEFF_INIT_STD: f64 = 0.1;

/// Differentiable spline evaluation: applies the coefficient-weighted
/// basis elementwise to `x` (clamped onto the grid range). Gradients
/// flow to both the coefficients and, inside the range, to `x`.
pub fn spline_apply(
    basis: &Rc<SplineBasis>,
    coeffs: &Tensor,
    x: &Tensor,
) -> Result<Tensor, KanError> {
    if coeffs.shape() != [basis.coeff_count()] {
        return Err(SplineError::CoeffCount {
            got: coeffs.len(),
            want: basis.coeff_count(),
        }
        .into());
    }
    let k = basis.degree();
    let mut values = [0.0f64; spline::MAX_DEGREE + 1];
    let out: Vec<f64> = {
        let cv = coeffs.data();
        x.data()
            .iter()
            .map(|&xi| {
                let first = basis.eval_active(xi, &mut values);
                (0..=k).map(|j| cv[first + j] * values[j]).sum()
            })
            .collect()
    };
    let basis = Rc::clone(basis);
    let tensor = Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![coeffs.clone(), x.clone()],
        Box::new(move |ctx: &BackwardCtx<'_>| {
            let cv = ctx.parents[0].data();
            let xv = ctx.parents[1].data();
            let k = basis.degree();
            let mut d_coeffs = vec![0.0; cv.len()];
            let mut d_x = vec![0.0; xv.len()];
            let mut values = [0.0f64; spline::MAX_DEGREE + 1];
            let mut derivs = [0.0f64; spline::MAX_DEGREE + 1];
            for (e, (&xi, &g)) in xv.iter().zip(ctx.out_grad.iter()).enumerate() {
                let first = basis.eval_active_with_deriv(xi, &mut values, &mut derivs);
                let mut slope = 0.0;
                for j in 0..=k {
                    d_coeffs[first + j] += g * values[j];
                    slope += cv[first + j] * derivs[j];
                }
                d_x[e] = g * slope;
            }
            vec![d_coeffs, d_x]
        }),
    )?;
    Ok(tensor)
}

/// One trainable edge function.
pub struct KanEdge {
    pub spline_coeffs: Tensor,
    pub w_spline: Tensor,
    pub w_silu: Tensor,
}

impl KanEdge {
    /// `fan_in` is the number of edges summed into the receiving node.
    pub fn init(basis: &SplineBasis, fan_in: usize, rng: &mut Rng) -> Self {
        let coeffs: Vec<f64> = (0..basis.coeff_count())
            .map(|_| rng.normal_scaled(0.0, COEFF_INIT_STD))
            .collect();
        let silu_weight = 1.0 / (fan_in.max(1) as f64).sqrt();
        Self {
            spline_coeffs: Tensor::param(&[basis.coeff_count()], coeffs).unwrap(),
            w_spline: Tensor::param(&[1], vec![1.0]).unwrap(),
            w_silu: Tensor::param(&[1], vec![silu_weight]).unwrap(),
        }
    }

    /// phi(x) = w1 * spline(x) + w2 * silu(x), elementwise over any
    /// shape.
    pub fn forward(&self, basis: &Rc<SplineBasis>, x: &Tensor) -> Result<Tensor, KanError> {
        let spline_term = ops::mul(&self.w_spline, &spline_apply(basis, &self.spline_coeffs, x)?)?;
        let silu_term = ops::mul(&self.w_silu, &ops::silu(x))?;
        Ok(ops::add(&spline_term, &silu_term)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![
            self.spline_coeffs.clone(),
            self.w_spline.clone(),
            self.w_silu.clone(),
        ]
    }
}

/// Dense grid of edges: one phi per (output, input) pair.
pub struct KanLayer {
    basis: Rc<SplineBasis>,
    /// Row-major: edges[i * n_in + p] maps input p to output i.
    edges: Vec<KanEdge>,
    n_in: usize,
    n_out: usize,
}

impl KanLayer {
    pub fn init(
        n_in: usize,
        n_out: usize,
        basis: Rc<SplineBasis>,
        rng: &mut Rng,
    ) -> Self {
        let edges = (0..n_in * n_out)
            .map(|_| KanEdge::init(&basis, n_in, rng))
            .collect();
        Self {
            basis,
            edges,
            n_in,
            n_out,
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn basis(&self) -> &Rc<SplineBasis> {
        &self.basis
    }

    pub fn edge(&self, out_idx: usize, in_idx: usize) -> &KanEdge {
        &self.edges[out_idx * self.n_in + in_idx]
    }

    /// output_i = sum_p phi_{i,p}(x_p). Accepts [n_in] or a batched
    /// [B, n_in]; batches map rowwise.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, KanError> {
        let (batched, rows) = match x.shape() {
            [n] if *n == self.n_in => (false, 1),
            [b, n] if *n == self.n_in => (true, *b),
            other => {
                return Err(TensorError::Shape(format!(
                    "kan layer expects width {}, got {other:?}",
                    self.n_in
                ))
                .into())
            }
        };
        let x2 = if batched {
            x.clone()
        } else {
            ops::reshape(x, &[1, self.n_in])?
        };
        // Evaluate per input column, then accumulate into each output.
        let cols: Vec<Tensor> = (0..self.n_in)
            .map(|p| ops::col(&x2, p))
            .collect::<Result<_, _>>()?;
        let mut outputs = Vec::with_capacity(self.n_out);
        for i in 0..self.n_out {
            let mut acc: Option<Tensor> = None;
            for (p, col) in cols.iter().enumerate() {
                let term = self.edge(i, p).forward(&self.basis, col)?;
                acc = Some(match acc {
                    Some(a) => ops::add(&a, &term)?,
                    None => term,
                });
            }
            outputs.push(acc.expect("n_in >= 1"));
        }
        let stacked = ops::stack_cols(&outputs)?;
        debug_assert_eq!(stacked.len(), rows * self.n_out);
        if batched {
            Ok(stacked)
        } else {
            Ok(ops::reshape(&stacked, &[self.n_out])?)
        }
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.edges.iter().flat_map(|e| e.params()).collect()
    }
}

/// Composition of layers with matching widths.
pub struct KanNetwork {
    layers: Vec<KanLayer>,
    widths: Vec<usize>,
}

impl KanNetwork {
    /// Builds a network with the given widths [n_0, ..., n_L] over a
    /// shared basis.
    pub fn init(
        widths: &[usize],
        basis: SplineBasis,
        rng: &mut Rng,
    ) -> Result<Self, KanError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(KanError::Widths(widths.to_vec()));
        }
        let basis = Rc::new(basis);
        let layers = widths
            .windows(2)
            .map(|w| KanLayer::init(w[0], w[1], Rc::clone(&basis), rng))
            .collect();
        Ok(Self {
            layers,
            widths: widths.to_vec(),
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn layers(&self) -> &[KanLayer] {
        &self.layers
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, KanError> {
        let mut cur = x.clone();
        for layer in &self.layers {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use crate::tensor::ops::sigmoid_scalar;
    use approx::assert_abs_diff_eq;

    fn default_basis() -> SplineBasis {
        SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap()
    }

    fn silu_scalar(x: f64) -> f64 {
        x * sigmoid_scalar(x)
    }

    #[test]
    fn edge_with_zero_weights_vanishes() {
        let basis = Rc::new(default_basis());
        let mut rng = Rng::new(1);
        let edge = KanEdge::init(&basis, 1, &mut rng);
        edge.w_spline.update_data(|d| d[0] = 0.0);
        edge.w_silu.update_data(|d| d[0] = 1.0);
        let x = Tensor::new(&[1], vec![0.0]).unwrap();
        assert_eq!(edge.forward(&basis, &x).unwrap().item(), 0.0);

        edge.w_spline.update_data(|d| d[0] = 1.0);
        edge.w_silu.update_data(|d| d[0] = 0.0);
        edge.spline_coeffs.update_data(|d| d.fill(0.0));
        let x = Tensor::new(&[1], vec![0.7]).unwrap();
        assert_eq!(edge.forward(&basis, &x).unwrap().item(), 0.0);
    }

    #[test]
    fn edge_gradients_match_finite_differences() {
        let basis = Rc::new(default_basis());
        let mut rng = Rng::new(2);
        let edge = KanEdge::init(&basis, 1, &mut rng);
        let x = Tensor::param(&[6], (0..6).map(|i| -1.2 + 0.45 * i as f64).collect()).unwrap();
        let mut params = edge.params();
        params.push(x.clone());
        let report = gradcheck::check_loss_fn(
            || {
                let y = edge.forward(&basis, &x).unwrap();
                ops::mean(&ops::mul(&y, &y).unwrap())
            },
            &params,
            gradcheck::DEFAULT_STEP,
        );
        assert!(report.max_relative_error < 1e-6, "{report:?}");
    }

    #[test]
    fn zeroed_layer_outputs_zero() {
        let mut rng = Rng::new(3);
        let layer = KanLayer::init(3, 2, Rc::new(default_basis()), &mut rng);
        for e in &layer.edges {
            e.spline_coeffs.update_data(|d| d.fill(0.0));
            e.w_silu.update_data(|d| d[0] = 0.0);
        }
        let x = Tensor::new(&[3], vec![0.4, -0.2, 1.0]).unwrap();
        assert_eq!(layer.forward(&x).unwrap().to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_input_layer_is_a_bank_of_univariate_functions() {
        let basis = Rc::new(default_basis());
        let mut rng = Rng::new(4);
        let layer = KanLayer::init(1, 3, Rc::clone(&basis), &mut rng);
        let x = Tensor::new(&[1], vec![0.33]).unwrap();
        let y = layer.forward(&x).unwrap();
        for i in 0..3 {
            let alone = layer.edge(i, 0).forward(&basis, &x).unwrap().item();
            assert_abs_diff_eq!(y.to_vec()[i], alone, epsilon = 1e-15);
        }
    }

    /// Brute-force double loop over the layer grid, scalar arithmetic
    /// only; independent of the tensor-op path.
    fn brute_force_layer(layer: &KanLayer, x: &[f64]) -> Vec<f64> {
        let basis = layer.basis();
        (0..layer.n_out())
            .map(|i| {
                (0..layer.n_in())
                    .map(|p| {
                        let e = layer.edge(i, p);
                        let w1 = e.w_spline.item();
                        let w2 = e.w_silu.item();
                        let c = e.spline_coeffs.to_vec();
                        w1 * spline_eval(basis, &c, x[p]).unwrap() + w2 * silu_scalar(x[p])
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn layer_matches_brute_force_double_loop() {
        let mut rng = Rng::new(5);
        let layer = KanLayer::init(2, 3, Rc::new(default_basis()), &mut rng);
        for trial in 0..10 {
            let x: Vec<f64> = (0..2)
                .map(|i| -1.4 + 0.3 * (trial + i) as f64 % 2.8)
                .collect();
            let got = layer
                .forward(&Tensor::new(&[2], x.clone()).unwrap())
                .unwrap()
                .to_vec();
            let want = brute_force_layer(&layer, &x);
            for (g, w) in got.iter().zip(&want) {
                assert_abs_diff_eq!(g, w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn batched_rows_match_single_rows() {
        let mut rng = Rng::new(6);
        let layer = KanLayer::init(3, 2, Rc::new(default_basis()), &mut rng);
        let rows = [
            vec![0.1, -0.5, 0.9],
            vec![-1.2, 0.0, 0.4],
            vec![1.4, 1.4, -1.4],
        ];
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let batched = layer
            .forward(&Tensor::new(&[3, 3], flat).unwrap())
            .unwrap()
            .to_vec();
        for (r, row) in rows.iter().enumerate() {
            let single = layer
                .forward(&Tensor::new(&[3], row.clone()).unwrap())
                .unwrap()
                .to_vec();
            assert_eq!(&batched[r * 2..(r + 1) * 2], &single[..]);
        }
    }

    #[test]
    fn layer_rejects_width_mismatch() {
        let mut rng = Rng::new(7);
        let layer = KanLayer::init(3, 2, Rc::new(default_basis()), &mut rng);
        let x = Tensor::new(&[4], vec![0.0; 4]).unwrap();
        assert!(layer.forward(&x).is_err());
    }

    #[test]
    fn single_layer_network_equals_layer() {
        let mut rng = Rng::new(8);
        let net = KanNetwork::init(&[2, 3], default_basis(), &mut rng).unwrap();
        let x = Tensor::new(&[2], vec![0.3, -0.8]).unwrap();
        let via_net = net.forward(&x).unwrap().to_vec();
        let via_layer = net.layers()[0].forward(&x).unwrap().to_vec();
        assert_eq!(via_net, via_layer);
    }

    #[test]
    fn depth_two_widths_realize_the_classic_shape() {
        // For n inputs the classic representation uses one hidden layer
        // of width 2n+1; the constructor admits exactly that shape.
        let n = 4;
        let mut rng = Rng::new(9);
        let net = KanNetwork::init(&[n, 2 * n + 1, 1], default_basis(), &mut rng).unwrap();
        assert_eq!(net.widths(), &[4, 9, 1]);
        assert_eq!(net.layers().len(), 2);
    }

    #[test]
    fn network_gradients_match_finite_differences() {
        let mut rng = Rng::new(10);
        let net = KanNetwork::init(&[2, 5, 1], default_basis(), &mut rng).unwrap();
        let x = Tensor::new(&[4, 2], vec![0.3, -0.4, 0.9, 1.1, -1.0, 0.2, 0.0, -0.7]).unwrap();
        let params = net.params();
        let report = gradcheck::check_loss_fn(
            || {
                let y = net.forward(&x).unwrap();
                ops::mean(&ops::mul(&y, &y).unwrap())
            },
            &params,
            gradcheck::DEFAULT_STEP,
        );
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn rejects_degenerate_widths() {
        let mut rng = Rng::new(11);
        assert!(KanNetwork::init(&[3], default_basis(), &mut rng).is_err());
        assert!(KanNetwork::init(&[3, 0, 1], default_basis(), &mut rng).is_err());
    }
}
