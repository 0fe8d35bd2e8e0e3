//! Loss, optimizer, training loop, and evaluation metrics.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::data::{WindowedSample, FEATURE_COUNT};
use crate::models::NeuralModel;
use crate::rng::Rng;
use crate::tensor::{ops, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("model error: {0}")]
    Model(String),
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("metric inputs have different lengths ({preds} vs {targets})")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("every target lies below the percentage-error guard")]
    AllGuarded,
}

/// Optimizer and loop hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-5,
            epochs: 50,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::Config("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(TrainError::Config("betas must lie in [0, 1)"));
        }
        if !self.adam_eps.is_finite() || self.adam_eps <= 0.0 {
            return Err(TrainError::Config("adam_eps must be > 0"));
        }
        Ok(())
    }
}

/// Mean squared error as a differentiable scalar.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<Tensor, TensorError> {
    if pred.shape() != target.shape() {
        return Err(TensorError::Shape(format!(
            "mse_loss: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let diff = ops::sub(pred, target)?;
    Ok(ops::mean(&ops::mul(&diff, &diff)?))
}

/// Bias-corrected Adam over a fixed parameter list.
pub struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(params: &[Tensor]) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
        }
    }

    /// One update from the gradients currently stored on the
    /// parameters; missing gradients count as zero.
    pub fn step(&mut self, params: &[Tensor], cfg: &TrainConfig) {
        assert_eq!(params.len(), self.m.len(), "optimizer/parameter mismatch");
        self.t += 1;
        let t = self.t as f64;
        let bias1 = 1.0 - cfg.adam_beta1.powf(t);
        let bias2 = 1.0 - cfg.adam_beta2.powf(t);
        for (idx, p) in params.iter().enumerate() {
            let grad = p.grad();
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            p.update_data(|data| {
                for i in 0..data.len() {
                    let g = grad.as_ref().map_or(0.0, |g| g[i]);
                    m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g;
                    v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g * g;
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    data[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
                }
            });
        }
    }
}

/// Packs samples into a [B, 1, N, D] batch tensor plus a [B, 1] label
/// tensor.
pub fn batch_tensors(
    samples: &[&WindowedSample],
    window: usize,
) -> Result<(Tensor, Tensor), TensorError> {
    let b = samples.len();
    let mut features = Vec::with_capacity(b * window * FEATURE_COUNT);
    let mut labels = Vec::with_capacity(b);
    for s in samples {
        features.extend_from_slice(&s.features);
        labels.push(s.label);
    }
    Ok((
        Tensor::new(&[b, 1, window, FEATURE_COUNT], features)?,
        Tensor::new(&[b, 1], labels)?,
    ))
}

/// Per-epoch mean training loss.
#[derive(Debug, Clone)]
pub struct LossCurve {
    pub per_epoch: Vec<f64>,
}

/// Seeded mini-batch training with Adam. Shuffling, batching, and the
/// update order are fixed by the seed, so runs are bit-reproducible.
pub fn train(
    model: &NeuralModel,
    samples: &[WindowedSample],
    cfg: &TrainConfig,
) -> Result<LossCurve, TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let window = model.window();
    let params = model.params();
    let mut adam = Adam::new(&params);
    let mut shuffle_rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&WindowedSample> = chunk.iter().map(|&i| &samples[i]).collect();
            let (x, y) = batch_tensors(&batch, window)?;
            let pred = model
                .forward(&x)
                .map_err(|e| TrainError::Model(e.to_string()))?;
            let loss = mse_loss(&pred, &y)?;
            let loss_value = loss.item();
            if !loss_value.is_finite() {
                return Err(TrainError::Diverged {
                    epoch,
                    batch: batch_idx,
                });
            }
            for p in &params {
                p.zero_grad();
            }
            loss.backward()?;
            adam.step(&params, cfg);
            epoch_loss += loss_value;
            batches += 1;
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok(LossCurve { per_epoch: curve })
}

/// Magnitude below which a target is excluded from MAPE.
pub const MAPE_GUARD: f64 = 1e-8;

/// The four evaluation metrics plus bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalMetrics {
    pub mse: f64,
    pub rmse: f64,
    pub mae: f64,
    pub mape: f64,
    /// Rows excluded from MAPE by the guard.
    pub mape_guarded: usize,
    pub n: usize,
}

/// Computes MSE, RMSE, MAE, and guarded MAPE over prediction/target
/// pairs (both in denormalized price units).
pub fn evaluate(preds: &[f64], targets: &[f64]) -> Result<EvalMetrics, TrainError> {
    if preds.len() != targets.len() {
        return Err(TrainError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let n = preds.len() as f64;
    let mut sq = 0.0;
    let mut abs = 0.0;
    let mut pct = 0.0;
    let mut guarded = 0usize;
    for (&p, &y) in preds.iter().zip(targets) {
        let e = y - p;
        sq += e * e;
        abs += e.abs();
        if y.abs() >= MAPE_GUARD {
            pct += (e / y).abs();
        } else {
            guarded += 1;
        }
    }
    let mape_n = preds.len() - guarded;
    if mape_n == 0 {
        return Err(TrainError::AllGuarded);
    }
    let mse = sq / n;
    Ok(EvalMetrics {
        mse,
        rmse: mse.sqrt(),
        mae: abs / n,
        mape: pct / mape_n as f64,
        mape_guarded: guarded,
        n: preds.len(),
    })
}

/// One labeled row of the comparison table.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub model: String,
    pub metrics: EvalMetrics,
}

/// The comparison table: one row per model, four metric columns, and
/// an echo of every configuration default that shaped the run.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub config_echo: BTreeMap<String, String>,
}

impl MetricsReport {
    /// CSV rendering: `# key=value` comment lines, then the header and
    /// one row per model.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config_echo {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str("model,mse,rmse,mae,mape,mape_guarded,n\n");
        for row in &self.rows {
            let m = &row.metrics;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                row.model, m.mse, m.rmse, m.mae, m.mape, m.mape_guarded, m.n
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mse_of_equal_inputs_is_zero() {
        let a = Tensor::new(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(mse_loss(&a, &a).unwrap().item(), 0.0);
    }

    #[test]
    fn mse_hand_arithmetic() {
        let y = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let p = Tensor::new(&[2], vec![2.0, 4.0]).unwrap();
        assert_eq!(mse_loss(&p, &y).unwrap().item(), 2.5);
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let p = Tensor::param(&[4], vec![0.4, -0.3, 1.2, 0.0]).unwrap();
        let y = Tensor::new(&[4], vec![0.1, 0.1, 0.9, -0.2]).unwrap();
        let report = gradcheck::check_loss_fn(
            || mse_loss(&p, &y).unwrap(),
            std::slice::from_ref(&p),
            1e-6,
        );
        assert!(report.max_relative_error < 1e-8, "{report:?}");
        // gradient is 2 (pred - target) / N
        p.zero_grad();
        mse_loss(&p, &y).unwrap().backward().unwrap();
        let g = p.grad().unwrap();
        for (gi, (pi, yi)) in g.iter().zip(p.data().iter().zip(y.data().iter())) {
            assert_abs_diff_eq!(gi, &(2.0 * (pi - yi) / 4.0), epsilon = 1e-12);
        }
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let p = Tensor::param(&[3], vec![1.0, 1.0, 1.0]).unwrap();
        // force gradient of exactly one everywhere: loss = sum(p)
        ops::sum(&p).backward().unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.01,
            ..Default::default()
        };
        let mut adam = Adam::new(std::slice::from_ref(&p));
        adam.step(std::slice::from_ref(&p), &cfg);
        for v in p.to_vec() {
            assert_abs_diff_eq!(v, 1.0 - 0.01 / (1.0 + cfg.adam_eps), epsilon = 1e-12);
        }
    }

    #[test]
    fn adam_no_gradient_no_movement() {
        let p = Tensor::param(&[2], vec![0.5, -0.5]).unwrap();
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(std::slice::from_ref(&p));
        adam.step(std::slice::from_ref(&p), &cfg);
        assert_eq!(p.to_vec(), vec![0.5, -0.5]);
    }

    #[test]
    fn evaluate_matches_brute_force_loops() {
        let preds = vec![2.0, 4.0, 1.5, -0.5];
        let targets = vec![1.0, 2.0, 1.5, 0.5];
        let m = evaluate(&preds, &targets).unwrap();

        // independent loop implementation
        let n = preds.len() as f64;
        let mse: f64 = preds
            .iter()
            .zip(&targets)
            .map(|(p, y)| (y - p) * (y - p))
            .sum::<f64>()
            / n;
        let mae: f64 = preds
            .iter()
            .zip(&targets)
            .map(|(p, y)| (y - p).abs())
            .sum::<f64>()
            / n;
        let mape: f64 = preds
            .iter()
            .zip(&targets)
            .map(|(p, y)| ((y - p) / y).abs())
            .sum::<f64>()
            / n;
        assert_abs_diff_eq!(m.mse, mse, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rmse * m.rmse, mse, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mae, mae, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mape, mape, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_known_small_case() {
        let m = evaluate(&[2.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(m.mse, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rmse, 2.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.mae, 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mape, 1.0, epsilon = 1e-12);
        assert_eq!(m.mape_guarded, 0);
    }

    #[test]
    fn perfect_predictions_zero_all_metrics() {
        let m = evaluate(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((m.mse, m.rmse, m.mae, m.mape), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn mape_guard_counts_near_zero_targets() {
        let m = evaluate(&[1.0, 1.0], &[0.0, 2.0]).unwrap();
        assert_eq!(m.mape_guarded, 1);
        assert_abs_diff_eq!(m.mape, 0.5, epsilon = 1e-12);
        assert!(matches!(
            evaluate(&[1.0], &[0.0]),
            Err(TrainError::AllGuarded)
        ));
    }

    #[test]
    fn mape_doubles_when_targets_halve() {
        // Same absolute errors on half-sized targets double the
        // percentage error; percentage metrics punish small prices.
        let preds = vec![11.0, 21.0, 31.0];
        let targets = vec![10.0, 20.0, 30.0];
        let half_preds = vec![6.0, 11.0, 16.0];
        let half_targets = vec![5.0, 10.0, 15.0];
        let base = evaluate(&preds, &targets).unwrap();
        let half = evaluate(&half_preds, &half_targets).unwrap();
        assert_abs_diff_eq!(half.mape, 2.0 * base.mape, epsilon = 1e-12);
    }

    #[test]
    fn evaluate_rejects_mismatched_lengths() {
        assert!(matches!(
            evaluate(&[1.0], &[1.0, 2.0]),
            Err(TrainError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn report_csv_shape() {
        let mut report = MetricsReport::default();
        report.config_echo.insert("window".into(), "5".into());
        report.rows.push(MetricsRow {
            model: "B-S".into(),
            metrics: evaluate(&[2.0, 4.0], &[1.0, 2.0]).unwrap(),
        });
        let csv = report.to_csv();
        assert!(csv.starts_with("# window=5\n"));
        assert!(csv.contains("model,mse,rmse,mae,mape"));
        assert!(csv.contains("B-S,2.5,"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig {
            adam_beta1: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
