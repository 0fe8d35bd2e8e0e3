//! Uniform interface over the four trainable regressors plus the
//! shared checkpoint format.
//!
//! Every model consumes the windowed batch layout [B, C=1, N, D] and
//! produces one normalized price per sample.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::conv_kan::{ConvKanError, ConvKanModel};
use crate::data::FEATURE_COUNT;
use crate::kan::{KanError, KanNetwork, SplineBasis};
use crate::lstm::{ConvLstmRegressor, LstmError, LstmRegressor};
use crate::rng::Rng;
use crate::tensor::{ops, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Kan(#[from] KanError),
    #[error(transparent)]
    ConvKan(#[from] ConvKanError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The six benchmark entrants: two analytic references and four
/// trainable models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Bs,
    Bsm,
    Lstm,
    ConvLstm,
    Kan,
    ConvKan,
}

impl ModelKind {
    /// Table row order of the comparison report.
    pub const REPORT_ORDER: [ModelKind; 6] = [
        ModelKind::Bs,
        ModelKind::Bsm,
        ModelKind::Lstm,
        ModelKind::ConvLstm,
        ModelKind::Kan,
        ModelKind::ConvKan,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Bs => "B-S",
            ModelKind::Bsm => "B-S-M",
            ModelKind::Lstm => "LSTM",
            ModelKind::ConvLstm => "Conv-LSTM",
            ModelKind::Kan => "KANs",
            ModelKind::ConvKan => "Conv-KANs",
        }
    }

    /// File-name slug.
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Bs => "bs",
            ModelKind::Bsm => "bsm",
            ModelKind::Lstm => "lstm",
            ModelKind::ConvLstm => "conv_lstm",
            ModelKind::Kan => "kan",
            ModelKind::ConvKan => "conv_kan",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        match s {
            "bs" => Some(ModelKind::Bs),
            "bsm" => Some(ModelKind::Bsm),
            "lstm" => Some(ModelKind::Lstm),
            "conv_lstm" | "conv-lstm" => Some(ModelKind::ConvLstm),
            "kan" => Some(ModelKind::Kan),
            "conv_kan" | "conv-kan" => Some(ModelKind::ConvKan),
            _ => None,
        }
    }

    pub fn is_trainable(self) -> bool {
        !matches!(self, ModelKind::Bs | ModelKind::Bsm)
    }
}

/// Architecture hyperparameters. None of these are dictated by the
/// reference experiment, so every report echoes them.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Window length N (observations per sample).
    pub window: usize,
    /// Hidden widths of the KAN; input N*D and output 1 are implied.
    pub kan_hidden: Vec<usize>,
    /// Spline grid intervals per edge.
    pub kan_grid: usize,
    pub kan_degree: usize,
    pub kan_range_lo: f64,
    pub kan_range_hi: f64,
    pub conv_kan_filters: usize,
    pub conv_kan_kernel_width: usize,
    pub conv_kan_stride: usize,
    /// Hidden widths of the fully-connected head.
    pub conv_kan_head: Vec<usize>,
    pub lstm_hidden: usize,
    pub conv_lstm_channels: usize,
    pub conv_lstm_kernel_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            window: 5,
            kan_hidden: vec![8],
            kan_grid: 5,
            kan_degree: 3,
            kan_range_lo: -1.5,
            kan_range_hi: 1.5,
            conv_kan_filters: 2,
            conv_kan_kernel_width: 3,
            conv_kan_stride: 1,
            conv_kan_head: vec![16],
            lstm_hidden: 8,
            conv_lstm_channels: 4,
            conv_lstm_kernel_width: 3,
        }
    }
}

impl ModelConfig {
    pub fn basis(&self) -> Result<SplineBasis, ModelError> {
        SplineBasis::uniform(
            self.kan_grid,
            self.kan_degree,
            self.kan_range_lo,
            self.kan_range_hi,
        )
        .map_err(|e| ModelError::Config(e.to_string()))
    }

    /// Flat key/value echo for report headers.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("model.window".into(), self.window.to_string());
        map.insert("model.kan_hidden".into(), format!("{:?}", self.kan_hidden));
        map.insert("model.kan_grid".into(), self.kan_grid.to_string());
        map.insert("model.kan_degree".into(), self.kan_degree.to_string());
        map.insert(
            "model.kan_range".into(),
            format!("[{}, {}]", self.kan_range_lo, self.kan_range_hi),
        );
        map.insert(
            "model.conv_kan_filters".into(),
            self.conv_kan_filters.to_string(),
        );
        map.insert(
            "model.conv_kan_kernel_width".into(),
            self.conv_kan_kernel_width.to_string(),
        );
        map.insert(
            "model.conv_kan_stride".into(),
            self.conv_kan_stride.to_string(),
        );
        map.insert(
            "model.conv_kan_head".into(),
            format!("{:?}", self.conv_kan_head),
        );
        map.insert("model.lstm_hidden".into(), self.lstm_hidden.to_string());
        map.insert(
            "model.conv_lstm_channels".into(),
            self.conv_lstm_channels.to_string(),
        );
        map.insert(
            "model.conv_lstm_kernel_width".into(),
            self.conv_lstm_kernel_width.to_string(),
        );
        map
    }
}

/// A trainable regressor over windowed batches.
pub enum NeuralModel {
    Kan { net: KanNetwork, window: usize },
    ConvKan { model: ConvKanModel, window: usize },
    Lstm { model: LstmRegressor, window: usize },
    ConvLstm { model: ConvLstmRegressor, window: usize },
}

impl NeuralModel {
    /// Builds a freshly initialized model of the given kind.
    pub fn build(kind: ModelKind, cfg: &ModelConfig, seed: u64) -> Result<Self, ModelError> {
        let mut rng = Rng::new(seed);
        let window = cfg.window;
        let d = FEATURE_COUNT;
        match kind {
            ModelKind::Bs | ModelKind::Bsm => Err(ModelError::Config(format!(
                "{} is analytic, not trainable",
                kind.label()
            ))),
            ModelKind::Kan => {
                let mut widths = vec![window * d];
                widths.extend(&cfg.kan_hidden);
                widths.push(1);
                let net = KanNetwork::init(&widths, cfg.basis()?, &mut rng)?;
                Ok(NeuralModel::Kan { net, window })
            }
            ModelKind::ConvKan => {
                let model = ConvKanModel::init(
                    cfg.conv_kan_filters,
                    cfg.conv_kan_kernel_width,
                    cfg.conv_kan_stride,
                    &cfg.conv_kan_head,
                    1,
                    window,
                    d,
                    cfg.basis()?,
                    &mut rng,
                )?;
                Ok(NeuralModel::ConvKan { model, window })
            }
            ModelKind::Lstm => Ok(NeuralModel::Lstm {
                model: LstmRegressor::init(d, cfg.lstm_hidden, &mut rng),
                window,
            }),
            ModelKind::ConvLstm => Ok(NeuralModel::ConvLstm {
                model: ConvLstmRegressor::init(
                    1,
                    cfg.conv_lstm_channels,
                    d,
                    cfg.conv_lstm_kernel_width,
                    &mut rng,
                )?,
                window,
            }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            NeuralModel::Kan { .. } => ModelKind::Kan,
            NeuralModel::ConvKan { .. } => ModelKind::ConvKan,
            NeuralModel::Lstm { .. } => ModelKind::Lstm,
            NeuralModel::ConvLstm { .. } => ModelKind::ConvLstm,
        }
    }

    pub fn window(&self) -> usize {
        match self {
            NeuralModel::Kan { window, .. }
            | NeuralModel::ConvKan { window, .. }
            | NeuralModel::Lstm { window, .. }
            | NeuralModel::ConvLstm { window, .. } => *window,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            NeuralModel::Kan { net, .. } => format!("kan widths={:?}", net.widths()),
            NeuralModel::ConvKan { model, .. } => model.describe(),
            NeuralModel::Lstm { model, .. } => model.describe(),
            NeuralModel::ConvLstm { model, .. } => model.describe(),
        }
    }

    /// Forward over a [B, 1, N, D] batch, producing [B, 1].
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, ModelError> {
        let (b, c, n, d) = match batch.shape() {
            [b, c, n, d] => (*b, *c, *n, *d),
            other => {
                return Err(ModelError::Config(format!(
                    "expected [B, C, N, D] batch, got {other:?}"
                )))
            }
        };
        if c != 1 || n != self.window() || d != FEATURE_COUNT {
            return Err(ModelError::Config(format!(
                "batch [B={b}, C={c}, N={n}, D={d}] does not match model window {}",
                self.window()
            )));
        }
        match self {
            NeuralModel::Kan { net, .. } => {
                let flat = ops::reshape(batch, &[b, c * n * d])?;
                Ok(net.forward(&flat)?)
            }
            NeuralModel::ConvKan { model, .. } => Ok(model.forward(batch)?),
            // With a single channel [B, C=1, N, D] and [B, T=N, C=1, D]
            // share a flat layout, so the reshape is free.
            NeuralModel::Lstm { model, .. } => {
                let seq = ops::reshape(batch, &[b, n, c, d])?;
                Ok(model.forward(&seq)?)
            }
            NeuralModel::ConvLstm { model, .. } => {
                let seq = ops::reshape(batch, &[b, n, c, d])?;
                Ok(model.forward(&seq)?)
            }
        }
    }

    /// Predictions as plain values, batched internally.
    pub fn predict(&self, samples: &[&crate::data::WindowedSample]) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(256) {
            let (x, _) = crate::train::batch_tensors(chunk, self.window())?;
            out.extend(self.forward(&x)?.to_vec());
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.named_params().into_iter().map(|(_, t)| t).collect()
    }

    /// Stable (name, tensor) pairs; the checkpoint schema.
    pub fn named_params(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        match self {
            NeuralModel::Kan { net, .. } => {
                for (l, layer) in net.layers().iter().enumerate() {
                    for i in 0..layer.n_out() {
                        for p in 0..layer.n_in() {
                            let e = layer.edge(i, p);
                            let base = format!("layer{l}.edge{i}_{p}");
                            out.push((format!("{base}.coeffs"), e.spline_coeffs.clone()));
                            out.push((format!("{base}.w_spline"), e.w_spline.clone()));
                            out.push((format!("{base}.w_silu"), e.w_silu.clone()));
                        }
                    }
                }
            }
            NeuralModel::ConvKan { model, .. } => {
                for (f, bank) in model.banks().iter().enumerate() {
                    for (c, kernel) in bank.kernels.iter().enumerate() {
                        for (k, e) in kernel.edges.iter().enumerate() {
                            let base = format!("bank{f}.ch{c}.edge{k}");
                            out.push((format!("{base}.coeffs"), e.spline_coeffs.clone()));
                            out.push((format!("{base}.w_spline"), e.w_spline.clone()));
                            out.push((format!("{base}.w_silu"), e.w_silu.clone()));
                        }
                    }
                }
                for (h, layer) in model.head().iter().enumerate() {
                    out.push((format!("head{h}.weight"), layer.weight.clone()));
                    out.push((format!("head{h}.bias"), layer.bias.clone()));
                }
            }
            NeuralModel::Lstm { model, .. } => {
                let c = &model.cell;
                for (name, t) in [
                    ("w_xi", &c.w_xi),
                    ("w_hi", &c.w_hi),
                    ("w_xf", &c.w_xf),
                    ("w_hf", &c.w_hf),
                    ("w_xc", &c.w_xc),
                    ("w_hc", &c.w_hc),
                    ("w_xo", &c.w_xo),
                    ("w_ho", &c.w_ho),
                    ("b_i", &c.b_i),
                    ("b_f", &c.b_f),
                    ("b_c", &c.b_c),
                    ("b_o", &c.b_o),
                ] {
                    out.push((format!("cell.{name}"), t.clone()));
                }
                out.push(("readout.weight".into(), model.readout.weight.clone()));
                out.push(("readout.bias".into(), model.readout.bias.clone()));
            }
            NeuralModel::ConvLstm { model, .. } => {
                let c = &model.cell;
                for (name, t) in [
                    ("w_xi", &c.w_xi),
                    ("w_hi", &c.w_hi),
                    ("w_xf", &c.w_xf),
                    ("w_hf", &c.w_hf),
                    ("w_xc", &c.w_xc),
                    ("w_hc", &c.w_hc),
                    ("w_xo", &c.w_xo),
                    ("w_ho", &c.w_ho),
                    ("w_ci", &c.w_ci),
                    ("w_cf", &c.w_cf),
                    ("w_co", &c.w_co),
                    ("b_i", &c.b_i),
                    ("b_f", &c.b_f),
                    ("b_c", &c.b_c),
                    ("b_o", &c.b_o),
                ] {
                    out.push((format!("cell.{name}"), t.clone()));
                }
                out.push(("readout.weight".into(), model.readout.weight.clone()));
                out.push(("readout.bias".into(), model.readout.bias.clone()));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------

pub const CHECKPOINT_FORMAT: &str = "optikan-checkpoint-v1";

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// JSON checkpoint: format tag, model slug, free-form metadata, and
/// named parameter blocks with explicit shapes. JSON numbers use the
/// shortest round-trip encoding, so reload is exact.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub model: String,
    pub meta: BTreeMap<String, String>,
    pub params: Vec<ParamBlock>,
}

impl Checkpoint {
    pub fn capture(model: &NeuralModel, meta: BTreeMap<String, String>) -> Self {
        let params = model
            .named_params()
            .into_iter()
            .map(|(name, t)| ParamBlock {
                name,
                shape: t.shape().to_vec(),
                data: t.to_vec(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            model: model.kind().slug().into(),
            meta,
            params,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let json = serde_json::to_string(self)
            .map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        let ckpt: Checkpoint =
            serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!(
                "unsupported format '{}'",
                ckpt.format
            )));
        }
        Ok(ckpt)
    }

    /// Writes the stored values into a compatible model instance.
    pub fn restore(&self, model: &NeuralModel) -> Result<(), ModelError> {
        if self.model != model.kind().slug() {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint is for '{}', model is '{}'",
                self.model,
                model.kind().slug()
            )));
        }
        let named = model.named_params();
        if named.len() != self.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "parameter count mismatch: checkpoint {}, model {}",
                self.params.len(),
                named.len()
            )));
        }
        for ((name, tensor), block) in named.iter().zip(&self.params) {
            if name != &block.name || tensor.shape() != block.shape {
                return Err(ModelError::Checkpoint(format!(
                    "parameter mismatch at '{}' (checkpoint '{}')",
                    name, block.name
                )));
            }
            tensor.update_data(|d| d.copy_from_slice(&block.data));
        }
        Ok(())
    }
}
