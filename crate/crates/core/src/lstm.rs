//! LSTM baseline and the 1D convolutional LSTM cell.
//!
//! The convolutional cell follows the peephole formulation: gate
//! preactivations are convolutions of the input and hidden state
//! (same-padded so state shapes are time-invariant), and the cell
//! state enters the input/forget/output gates through elementwise
//! peephole products. The dense baseline uses matrix products and no
//! peepholes.

use thiserror::Error;

use crate::dense::Dense;
use crate::rng::Rng;
use crate::tensor::{ops, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum LstmError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid cell geometry: {0}")]
    Geometry(String),
}

/// Weight init range for everything except the forget bias.
const INIT_RANGE: f64 = 0.08;
/// Forget-gate bias starts open so early training can retain state.
const FORGET_BIAS: f64 = 1.0;

/// Hidden/cell pair. The two tensors always share a shape.
pub struct LstmState {
    pub hidden: Tensor,
    pub cell: Tensor,
}

impl LstmState {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            hidden: Tensor::zeros(shape),
            cell: Tensor::zeros(shape),
        }
    }
}

/// Gate activations of one step, exposed for inspection in tests and
/// diagnostics.
pub struct StepGates {
    pub input: Tensor,
    pub forget: Tensor,
    pub output: Tensor,
}

fn uniform_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform_in(-INIT_RANGE, INIT_RANGE)).collect();
    Tensor::param(shape, data).unwrap()
}

// ---------------------------------------------------------------------------
// Dense cell
// ---------------------------------------------------------------------------

/// Gate weights for the dense LSTM: W_x* are [in, H], W_h* are [H, H],
/// biases are [H].
pub struct LstmCellParams {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub w_xf: Tensor,
    pub w_hf: Tensor,
    pub w_xc: Tensor,
    pub w_hc: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
}

impl LstmCellParams {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        let mut forget_bias = vec![0.0; hidden];
        forget_bias.fill(FORGET_BIAS);
        Self {
            w_xi: uniform_tensor(&[in_dim, hidden], rng),
            w_hi: uniform_tensor(&[hidden, hidden], rng),
            w_xf: uniform_tensor(&[in_dim, hidden], rng),
            w_hf: uniform_tensor(&[hidden, hidden], rng),
            w_xc: uniform_tensor(&[in_dim, hidden], rng),
            w_hc: uniform_tensor(&[hidden, hidden], rng),
            w_xo: uniform_tensor(&[in_dim, hidden], rng),
            w_ho: uniform_tensor(&[hidden, hidden], rng),
            b_i: Tensor::param(&[hidden], vec![0.0; hidden]).unwrap(),
            b_f: Tensor::param(&[hidden], forget_bias).unwrap(),
            b_c: Tensor::param(&[hidden], vec![0.0; hidden]).unwrap(),
            b_o: Tensor::param(&[hidden], vec![0.0; hidden]).unwrap(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hi.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.w_xi.shape()[0]
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![
            self.w_xi.clone(),
            self.w_hi.clone(),
            self.w_xf.clone(),
            self.w_hf.clone(),
            self.w_xc.clone(),
            self.w_hc.clone(),
            self.w_xo.clone(),
            self.w_ho.clone(),
            self.b_i.clone(),
            self.b_f.clone(),
            self.b_c.clone(),
            self.b_o.clone(),
        ]
    }
}

fn dense_gate(
    x: &Tensor,
    h: &Tensor,
    w_x: &Tensor,
    w_h: &Tensor,
    b: &Tensor,
) -> Result<Tensor, TensorError> {
    ops::add_rowvec(
        &ops::add(&ops::matmul(x, w_x)?, &ops::matmul(h, w_h)?)?,
        b,
    )
}

/// One dense LSTM step over a [B, in] input and [B, H] state.
pub fn lstm_step(
    p: &LstmCellParams,
    x: &Tensor,
    s: &LstmState,
) -> Result<LstmState, LstmError> {
    let i = ops::sigmoid(&dense_gate(x, &s.hidden, &p.w_xi, &p.w_hi, &p.b_i)?);
    let f = ops::sigmoid(&dense_gate(x, &s.hidden, &p.w_xf, &p.w_hf, &p.b_f)?);
    let g = ops::tanh(&dense_gate(x, &s.hidden, &p.w_xc, &p.w_hc, &p.b_c)?);
    let cell = ops::add(&ops::hadamard(&f, &s.cell)?, &ops::hadamard(&i, &g)?)?;
    let o = ops::sigmoid(&dense_gate(x, &s.hidden, &p.w_xo, &p.w_ho, &p.b_o)?);
    let hidden = ops::hadamard(&o, &ops::tanh(&cell))?;
    Ok(LstmState { hidden, cell })
}

// ---------------------------------------------------------------------------
// Convolutional cell
// ---------------------------------------------------------------------------

/// Gate kernels for the convolutional cell: W_x* are [Ch, Cin, W],
/// W_h* are [Ch, Ch, W], peepholes W_c* are elementwise [Ch, D]
/// tensors, biases are per-channel [Ch].
pub struct ConvLstmCellParams {
    pub w_xi: Tensor,
    pub w_hi: Tensor,
    pub w_xf: Tensor,
    pub w_hf: Tensor,
    pub w_xc: Tensor,
    pub w_hc: Tensor,
    pub w_xo: Tensor,
    pub w_ho: Tensor,
    pub w_ci: Tensor,
    pub w_cf: Tensor,
    pub w_co: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_c: Tensor,
    pub b_o: Tensor,
    kernel_width: usize,
}

impl ConvLstmCellParams {
    /// `kernel_width` must be odd so that same-padding preserves the
    /// feature length `d`.
    pub fn init(
        in_channels: usize,
        channels: usize,
        d: usize,
        kernel_width: usize,
        rng: &mut Rng,
    ) -> Result<Self, LstmError> {
        if kernel_width == 0 || kernel_width.is_multiple_of(2) {
            return Err(LstmError::Geometry(format!(
                "kernel width must be odd for same-padding, got {kernel_width}"
            )));
        }
        if d == 0 {
            return Err(LstmError::Geometry("feature length must be >= 1".into()));
        }
        let x_shape = [channels, in_channels, kernel_width];
        let h_shape = [channels, channels, kernel_width];
        let peep_shape = [channels, d];
        let mut forget_bias = vec![0.0; channels];
        forget_bias.fill(FORGET_BIAS);
        Ok(Self {
            w_xi: uniform_tensor(&x_shape, rng),
            w_hi: uniform_tensor(&h_shape, rng),
            w_xf: uniform_tensor(&x_shape, rng),
            w_hf: uniform_tensor(&h_shape, rng),
            w_xc: uniform_tensor(&x_shape, rng),
            w_hc: uniform_tensor(&h_shape, rng),
            w_xo: uniform_tensor(&x_shape, rng),
            w_ho: uniform_tensor(&h_shape, rng),
            w_ci: uniform_tensor(&peep_shape, rng),
            w_cf: uniform_tensor(&peep_shape, rng),
            w_co: uniform_tensor(&peep_shape, rng),
            b_i: Tensor::param(&[channels], vec![0.0; channels]).unwrap(),
            b_f: Tensor::param(&[channels], forget_bias).unwrap(),
            b_c: Tensor::param(&[channels], vec![0.0; channels]).unwrap(),
            b_o: Tensor::param(&[channels], vec![0.0; channels]).unwrap(),
            kernel_width,
        })
    }

    pub fn channels(&self) -> usize {
        self.w_hi.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.w_xi.shape()[1]
    }

    pub fn kernel_width(&self) -> usize {
        self.kernel_width
    }

    pub fn params(&self) -> Vec<Tensor> {
        vec![
            self.w_xi.clone(),
            self.w_hi.clone(),
            self.w_xf.clone(),
            self.w_hf.clone(),
            self.w_xc.clone(),
            self.w_hc.clone(),
            self.w_xo.clone(),
            self.w_ho.clone(),
            self.w_ci.clone(),
            self.w_cf.clone(),
            self.w_co.clone(),
            self.b_i.clone(),
            self.b_f.clone(),
            self.b_c.clone(),
            self.b_o.clone(),
        ]
    }

    fn same_conv(&self, x: &Tensor, w: &Tensor) -> Result<Tensor, TensorError> {
        let pad = (self.kernel_width - 1) / 2;
        ops::conv1d(&ops::pad1d(x, pad, pad)?, w, 1)
    }
}

/// One convolutional step: the five gate equations in order, with the
/// previous cell state entering i and f through peepholes and the new
/// cell state entering o.
pub fn conv_lstm_step_with_gates(
    p: &ConvLstmCellParams,
    x: &Tensor,
    s: &LstmState,
) -> Result<(LstmState, StepGates), LstmError> {
    let conv = |input: &Tensor, w: &Tensor| p.same_conv(input, w);

    let i = ops::sigmoid(&ops::add(
        &ops::add_channel_bias(
            &ops::add(&conv(x, &p.w_xi)?, &conv(&s.hidden, &p.w_hi)?)?,
            &p.b_i,
        )?,
        &ops::mul_bcast_batch(&s.cell, &p.w_ci)?,
    )?);
    let f = ops::sigmoid(&ops::add(
        &ops::add_channel_bias(
            &ops::add(&conv(x, &p.w_xf)?, &conv(&s.hidden, &p.w_hf)?)?,
            &p.b_f,
        )?,
        &ops::mul_bcast_batch(&s.cell, &p.w_cf)?,
    )?);
    let g = ops::tanh(&ops::add_channel_bias(
        &ops::add(&conv(x, &p.w_xc)?, &conv(&s.hidden, &p.w_hc)?)?,
        &p.b_c,
    )?);
    let cell = ops::add(&ops::hadamard(&f, &s.cell)?, &ops::hadamard(&i, &g)?)?;
    let o = ops::sigmoid(&ops::add(
        &ops::add_channel_bias(
            &ops::add(&conv(x, &p.w_xo)?, &conv(&s.hidden, &p.w_ho)?)?,
            &p.b_o,
        )?,
        &ops::mul_bcast_batch(&cell, &p.w_co)?,
    )?);
    let hidden = ops::hadamard(&o, &ops::tanh(&cell))?;
    Ok((
        LstmState { hidden, cell },
        StepGates {
            input: i,
            forget: f,
            output: o,
        },
    ))
}

/// See [`conv_lstm_step_with_gates`]; discards the gate activations.
pub fn conv_lstm_step(
    p: &ConvLstmCellParams,
    x: &Tensor,
    s: &LstmState,
) -> Result<LstmState, LstmError> {
    conv_lstm_step_with_gates(p, x, s).map(|(state, _)| state)
}

// ---------------------------------------------------------------------------
// Sequence regressors
// ---------------------------------------------------------------------------

fn batch_dims(batch: &Tensor) -> Result<(usize, usize, usize, usize), LstmError> {
    match batch.shape() {
        [b, t, c, d] => Ok((*b, *t, *c, *d)),
        other => Err(LstmError::Geometry(format!(
            "expected [B, T, C, D], got {other:?}"
        ))),
    }
}

/// Extracts time step `t` as [B, C*D] (flattened) via one gather.
fn time_slice(batch: &Tensor, t: usize) -> Result<Tensor, LstmError> {
    let (b, t_len, c, d) = batch_dims(batch)?;
    let per = c * d;
    let mut indices = Vec::with_capacity(b * per);
    for bi in 0..b {
        let base = (bi * t_len + t) * per;
        indices.extend(base..base + per);
    }
    Ok(ops::gather(batch, std::rc::Rc::new(indices), &[b, per])?)
}

/// Dense LSTM over windows: unrolls from a zero state and reads the
/// final hidden state through an affine layer.
pub struct LstmRegressor {
    pub cell: LstmCellParams,
    pub readout: Dense,
}

impl LstmRegressor {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            cell: LstmCellParams::init(in_dim, hidden, rng),
            readout: Dense::init(hidden, 1, rng),
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "lstm in_dim={} hidden={}",
            self.cell.in_dim(),
            self.cell.hidden()
        )
    }

    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, LstmError> {
        let (b, t_len, c, d) = batch_dims(batch)?;
        if c * d != self.cell.in_dim() {
            return Err(LstmError::Geometry(format!(
                "input width {} does not match cell in_dim {}",
                c * d,
                self.cell.in_dim()
            )));
        }
        if t_len == 0 {
            return Err(LstmError::Geometry("window length must be >= 1".into()));
        }
        let mut state = LstmState::zeros(&[b, self.cell.hidden()]);
        for t in 0..t_len {
            let x = time_slice(batch, t)?;
            state = lstm_step(&self.cell, &x, &state)?;
        }
        Ok(self.readout.forward(&state.hidden)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.cell.params();
        p.extend(self.readout.params());
        p
    }
}

/// Convolutional LSTM over windows; the final hidden state is
/// flattened into the affine readout.
pub struct ConvLstmRegressor {
    pub cell: ConvLstmCellParams,
    pub readout: Dense,
    features: usize,
}

impl ConvLstmRegressor {
    pub fn init(
        in_channels: usize,
        channels: usize,
        d: usize,
        kernel_width: usize,
        rng: &mut Rng,
    ) -> Result<Self, LstmError> {
        let cell = ConvLstmCellParams::init(in_channels, channels, d, kernel_width, rng)?;
        Ok(Self {
            cell,
            readout: Dense::init(channels * d, 1, rng),
            features: d,
        })
    }

    pub fn describe(&self) -> String {
        format!(
            "conv-lstm in_channels={} channels={} kernel_width={}",
            self.cell.in_channels(),
            self.cell.channels(),
            self.cell.kernel_width()
        )
    }

    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, LstmError> {
        let (b, t_len, c, d) = batch_dims(batch)?;
        if c != self.cell.in_channels() || d != self.features {
            return Err(LstmError::Geometry(format!(
                "batch [C={c}, D={d}] does not match cell (C={}, D={})",
                self.cell.in_channels(),
                self.features
            )));
        }
        if t_len == 0 {
            return Err(LstmError::Geometry("window length must be >= 1".into()));
        }
        let ch = self.cell.channels();
        let mut state = LstmState::zeros(&[b, ch, d]);
        for t in 0..t_len {
            let x = ops::reshape(&time_slice(batch, t)?, &[b, c, d])?;
            state = conv_lstm_step(&self.cell, &x, &state)?;
        }
        let flat = ops::reshape(&state.hidden, &[b, ch * d])?;
        Ok(self.readout.forward(&flat)?)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut p = self.cell.params();
        p.extend(self.readout.params());
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use crate::tensor::ops::sigmoid_scalar;
    use approx::assert_abs_diff_eq;

    fn zero_conv_cell(d: usize) -> ConvLstmCellParams {
        let mut rng = Rng::new(0);
        let p = ConvLstmCellParams::init(1, 1, d, 1, &mut rng).unwrap();
        for t in p.params() {
            t.update_data(|v| v.fill(0.0));
        }
        p
    }

    #[test]
    fn zero_parameters_give_half_gates_and_zero_state() {
        let p = zero_conv_cell(4);
        let x = Tensor::new(&[1, 1, 4], vec![0.3; 4]).unwrap();
        let s = LstmState::zeros(&[1, 1, 4]);
        let (next, gates) = conv_lstm_step_with_gates(&p, &x, &s).unwrap();
        assert!(gates.input.to_vec().iter().all(|&v| v == 0.5));
        assert!(gates.forget.to_vec().iter().all(|&v| v == 0.5));
        assert!(gates.output.to_vec().iter().all(|&v| v == 0.5));
        assert_eq!(next.cell.to_vec(), vec![0.0; 4]);
        assert_eq!(next.hidden.to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell_state() {
        let p = zero_conv_cell(3);
        p.b_f.update_data(|v| v.fill(60.0));
        let x = Tensor::new(&[1, 1, 3], vec![0.0; 3]).unwrap();
        let s = LstmState {
            hidden: Tensor::zeros(&[1, 1, 3]),
            cell: Tensor::new(&[1, 1, 3], vec![0.7, -0.2, 1.5]).unwrap(),
        };
        let next = conv_lstm_step(&p, &x, &s).unwrap();
        // f saturates at 1 and i*tanh(...) = 0.5*0, so C_t = C_{t-1}.
        for (a, b) in next.cell.to_vec().iter().zip(s.cell.to_vec()) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-12);
        }
    }

    /// Scalar transcription of the five gate equations with peepholes;
    /// the oracle for the width-1 kernel equivalence.
    #[allow(clippy::too_many_arguments)]
    fn scalar_peephole_step(
        wxi: f64, whi: f64, wci: f64, bi: f64,
        wxf: f64, whf: f64, wcf: f64, bf: f64,
        wxc: f64, whc: f64, bc: f64,
        wxo: f64, who: f64, wco: f64, bo: f64,
        x: f64, h: f64, c: f64,
    ) -> (f64, f64) {
        let i = sigmoid_scalar(wxi * x + whi * h + wci * c + bi);
        let f = sigmoid_scalar(wxf * x + whf * h + wcf * c + bf);
        let c_new = f * c + i * (wxc * x + whc * h + bc).tanh();
        let o = sigmoid_scalar(wxo * x + who * h + wco * c_new + bo);
        let h_new = o * c_new.tanh();
        (h_new, c_new)
    }

    #[test]
    fn width_one_kernel_matches_scalar_transcription() {
        let mut rng = Rng::new(42);
        let d = 3;
        let p = ConvLstmCellParams::init(1, 1, d, 1, &mut rng).unwrap();
        let xs = [0.4, -0.9, 0.1];
        let hs = [0.2, 0.0, -0.3];
        let cs = [-0.5, 0.8, 0.05];
        let x = Tensor::new(&[1, 1, d], xs.to_vec()).unwrap();
        let s = LstmState {
            hidden: Tensor::new(&[1, 1, d], hs.to_vec()).unwrap(),
            cell: Tensor::new(&[1, 1, d], cs.to_vec()).unwrap(),
        };
        let next = conv_lstm_step(&p, &x, &s).unwrap();

        let scalar = |t: &Tensor| t.data()[0];
        for pos in 0..d {
            let (h_new, c_new) = scalar_peephole_step(
                scalar(&p.w_xi), scalar(&p.w_hi), p.w_ci.data()[pos], scalar(&p.b_i),
                scalar(&p.w_xf), scalar(&p.w_hf), p.w_cf.data()[pos], scalar(&p.b_f),
                scalar(&p.w_xc), scalar(&p.w_hc), scalar(&p.b_c),
                scalar(&p.w_xo), scalar(&p.w_ho), p.w_co.data()[pos], scalar(&p.b_o),
                xs[pos], hs[pos], cs[pos],
            );
            assert_abs_diff_eq!(next.hidden.to_vec()[pos], h_new, epsilon = 1e-12);
            assert_abs_diff_eq!(next.cell.to_vec()[pos], c_new, epsilon = 1e-12);
        }
    }

    #[test]
    fn dense_zero_parameters_give_zero_hidden() {
        let mut rng = Rng::new(1);
        let p = LstmCellParams::init(2, 3, &mut rng);
        for t in p.params() {
            t.update_data(|v| v.fill(0.0));
        }
        let x = Tensor::new(&[1, 2], vec![0.5, -0.5]).unwrap();
        let s = LstmState::zeros(&[1, 3]);
        let next = lstm_step(&p, &x, &s).unwrap();
        assert_eq!(next.hidden.to_vec(), vec![0.0; 3]);
    }

    #[test]
    fn dense_hidden_size_one_matches_scalar_transcription() {
        let mut rng = Rng::new(2);
        let p = LstmCellParams::init(1, 1, &mut rng);
        let (x, h, c) = (0.7, -0.2, 0.4);
        let next = lstm_step(
            &p,
            &Tensor::new(&[1, 1], vec![x]).unwrap(),
            &LstmState {
                hidden: Tensor::new(&[1, 1], vec![h]).unwrap(),
                cell: Tensor::new(&[1, 1], vec![c]).unwrap(),
            },
        )
        .unwrap();
        let g = |t: &Tensor| t.data()[0];
        // Same equations, no peepholes.
        let i = sigmoid_scalar(g(&p.w_xi) * x + g(&p.w_hi) * h + g(&p.b_i));
        let f = sigmoid_scalar(g(&p.w_xf) * x + g(&p.w_hf) * h + g(&p.b_f));
        let c_new = f * c + i * (g(&p.w_xc) * x + g(&p.w_hc) * h + g(&p.b_c)).tanh();
        let o = sigmoid_scalar(g(&p.w_xo) * x + g(&p.w_ho) * h + g(&p.b_o));
        assert_abs_diff_eq!(next.cell.item(), c_new, epsilon = 1e-12);
        assert_abs_diff_eq!(next.hidden.item(), o * c_new.tanh(), epsilon = 1e-12);
    }

    #[test]
    fn repeated_input_converges_to_a_fixed_point() {
        let mut rng = Rng::new(3);
        let p = LstmCellParams::init(2, 4, &mut rng);
        let x = Tensor::new(&[1, 2], vec![0.5, -0.8]).unwrap();
        let mut state = LstmState::zeros(&[1, 4]);
        let mut diffs = Vec::new();
        let mut prev = state.hidden.to_vec();
        for _ in 0..40 {
            state = lstm_step(&p, &x, &state).unwrap();
            let cur = state.hidden.to_vec();
            let diff: f64 = cur
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            diffs.push(diff);
            prev = cur;
        }
        // After burn-in the update distance shrinks monotonically.
        for t in 10..diffs.len() {
            assert!(
                diffs[t] <= diffs[t - 1] + 1e-12,
                "diff grew at step {t}: {} -> {}",
                diffs[t - 1],
                diffs[t]
            );
        }
        assert!(diffs[39] < diffs[10]);
    }

    #[test]
    fn hidden_state_is_bounded_by_one() {
        let mut rng = Rng::new(4);
        for trial in 0..5 {
            let p = ConvLstmCellParams::init(2, 3, 5, 3, &mut rng).unwrap();
            for t in p.params() {
                t.update_data(|v| {
                    for e in v.iter_mut() {
                        *e *= 40.0 * (trial + 1) as f64;
                    }
                });
            }
            let x_data: Vec<f64> = (0..2 * 5).map(|i| (i as f64 - 5.0) * 2.0).collect();
            let x = Tensor::new(&[1, 2, 5], x_data).unwrap();
            let mut state = LstmState::zeros(&[1, 3, 5]);
            for _ in 0..8 {
                state = conv_lstm_step(&p, &x, &state).unwrap();
                assert!(state.hidden.to_vec().iter().all(|h| h.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn window_length_one_is_single_step_plus_readout() {
        let mut rng = Rng::new(5);
        let model = LstmRegressor::init(6, 3, &mut rng);
        let data: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let batch = Tensor::new(&[1, 1, 2, 3], data.clone()).unwrap();
        let via_model = model.forward(&batch).unwrap().item();

        let x = Tensor::new(&[1, 6], data).unwrap();
        let state = lstm_step(&model.cell, &x, &LstmState::zeros(&[1, 3])).unwrap();
        let via_steps = model.readout.forward(&state.hidden).unwrap().item();
        assert_eq!(via_model, via_steps);
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = Rng::new(6);
        let model = ConvLstmRegressor::init(1, 2, 4, 3, &mut rng).unwrap();
        let sample: Vec<f64> = (0..3 * 4).map(|i| 0.05 * i as f64 - 0.3).collect();
        let single = model
            .forward(&Tensor::new(&[1, 3, 1, 4], sample.clone()).unwrap())
            .unwrap()
            .item();
        let doubled: Vec<f64> = sample.iter().chain(sample.iter()).copied().collect();
        let both = model
            .forward(&Tensor::new(&[2, 3, 1, 4], doubled).unwrap())
            .unwrap()
            .to_vec();
        assert_eq!(both, vec![single, single]);
    }

    #[test]
    fn bptt_gradients_match_finite_differences_dense() {
        let mut rng = Rng::new(7);
        let model = LstmRegressor::init(3, 4, &mut rng);
        let data: Vec<f64> = (0..2 * 3 * 3).map(|i| 0.13 * i as f64 - 1.0).collect();
        let batch = Tensor::new(&[2, 3, 1, 3], data).unwrap();
        let params = model.params();
        let report = gradcheck::check_loss_fn(
            || {
                let y = model.forward(&batch).unwrap();
                ops::mean(&ops::mul(&y, &y).unwrap())
            },
            &params,
            gradcheck::DEFAULT_STEP,
        );
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn bptt_gradients_match_finite_differences_conv() {
        let mut rng = Rng::new(8);
        let model = ConvLstmRegressor::init(1, 1, 5, 3, &mut rng).unwrap();
        let data: Vec<f64> = (0..3 * 5).map(|i| 0.11 * i as f64 - 0.8).collect();
        let batch = Tensor::new(&[1, 3, 1, 5], data).unwrap();
        let params = model.params();
        let report = gradcheck::check_loss_fn(
            || {
                let y = model.forward(&batch).unwrap();
                ops::mean(&ops::mul(&y, &y).unwrap())
            },
            &params,
            gradcheck::DEFAULT_STEP,
        );
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn rejects_even_kernel_width() {
        let mut rng = Rng::new(9);
        assert!(ConvLstmCellParams::init(1, 1, 5, 2, &mut rng).is_err());
    }
}
