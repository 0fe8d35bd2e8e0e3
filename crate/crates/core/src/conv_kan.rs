//! KAN convolution specialized to 1D feature rows, plus the model that
//! pairs it with a conventional fully-connected head.
//!
//! A kernel is a window of trainable edge functions: sliding it over
//! the input applies phi_k to the k-th entry of each window and sums,
//! instead of multiplying by a scalar weight. Channel mixing follows
//! standard convolution: each (filter, input-channel) pair owns an
//! independent kernel and the channel contributions add.

use std::rc::Rc;

use thiserror::Error;

use crate::dense::Dense;
use crate::kan::{KanEdge, KanError, SplineBasis};
use crate::rng::Rng;
use crate::tensor::{ops, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ConvKanError {
    #[error(transparent)]
    Kan(#[from] KanError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid convolution geometry: {0}")]
    Geometry(String),
}

/// Window of W edge functions slid along the last axis.
pub struct KanConvKernel1d {
    basis: Rc<SplineBasis>,
    pub edges: Vec<KanEdge>,
    pub stride: usize,
}

impl KanConvKernel1d {
    /// `fan_in` is the number of edge evaluations summed into one
    /// output position (kernel width times mixed input channels).
    pub fn init(
        width: usize,
        stride: usize,
        fan_in: usize,
        basis: Rc<SplineBasis>,
        rng: &mut Rng,
    ) -> Result<Self, ConvKanError> {
        if width == 0 || stride == 0 {
            return Err(ConvKanError::Geometry(
                "kernel width and stride must be >= 1".into(),
            ));
        }
        let edges = (0..width)
            .map(|_| KanEdge::init(&basis, fan_in, rng))
            .collect();
        Ok(Self {
            basis,
            edges,
            stride,
        })
    }

    pub fn width(&self) -> usize {
        self.edges.len()
    }

    pub fn basis(&self) -> &Rc<SplineBasis> {
        &self.basis
    }

    pub fn params(&self) -> Vec<Tensor> {
        self.edges.iter().flat_map(|e| e.params()).collect()
    }
}

fn out_len(length: usize, width: usize, stride: usize) -> Result<usize, ConvKanError> {
    if width > length {
        return Err(ConvKanError::Geometry(format!(
            "kernel width {width} exceeds input length {length}"
        )));
    }
    Ok((length - width) / stride + 1)
}

/// out_j = sum_c sum_k phi_k(a[c, j*stride + k]): the kernel's edges
/// applied along every channel of a [C, L] input, summed over window
/// positions and channels. Fully differentiable through every edge.
pub fn kan_conv1d(input: &Tensor, kernel: &KanConvKernel1d) -> Result<Tensor, ConvKanError> {
    let (channels, length) = match input.shape() {
        [c, l] => (*c, *l),
        other => {
            return Err(ConvKanError::Geometry(format!(
                "kan_conv1d expects [C, L], got {other:?}"
            )))
        }
    };
    let width = kernel.width();
    let stride = kernel.stride;
    let l_out = out_len(length, width, stride)?;

    let mut acc: Option<Tensor> = None;
    for (k, edge) in kernel.edges.iter().enumerate() {
        // Entry k of every window, across all channels.
        let mut indices = Vec::with_capacity(channels * l_out);
        for c in 0..channels {
            for j in 0..l_out {
                indices.push(c * length + j * stride + k);
            }
        }
        let taken = ops::gather(input, Rc::new(indices), &[channels, l_out])?;
        let phi = edge.forward(&kernel.basis, &taken)?;
        let summed = ops::sum_axis0(&phi)?;
        acc = Some(match acc {
            Some(a) => ops::add(&a, &summed)?,
            None => summed,
        });
    }
    Ok(acc.expect("width >= 1"))
}

/// One output channel: an independent kernel per input channel,
/// contributions summed.
pub struct ConvKanBank {
    pub kernels: Vec<KanConvKernel1d>,
}

impl ConvKanBank {
    pub fn params(&self) -> Vec<Tensor> {
        self.kernels.iter().flat_map(|k| k.params()).collect()
    }
}

/// Convolutional feature extractor plus a conventional affine + SiLU
/// head producing one price per sample.
pub struct ConvKanModel {
    banks: Vec<ConvKanBank>,
    head: Vec<Dense>,
    channels: usize,
    window: usize,
    features: usize,
    conv_out: usize,
}

impl ConvKanModel {
    /// `head_widths` are the hidden widths; a final affine layer maps
    /// to one output.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        filters: usize,
        kernel_width: usize,
        stride: usize,
        head_widths: &[usize],
        channels: usize,
        window: usize,
        features: usize,
        basis: SplineBasis,
        rng: &mut Rng,
    ) -> Result<Self, ConvKanError> {
        if filters == 0 {
            return Err(ConvKanError::Geometry("need at least one filter".into()));
        }
        let l_out = out_len(features, kernel_width, stride)?;
        let conv_out = filters * window * l_out;
        let basis = Rc::new(basis);
        let fan_in = kernel_width * channels.max(1);
        let banks = (0..filters)
            .map(|_| {
                let kernels = (0..channels)
                    .map(|_| {
                        KanConvKernel1d::init(
                            kernel_width,
                            stride,
                            fan_in,
                            Rc::clone(&basis),
                            rng,
                        )
                    })
                    .collect::<Result<_, _>>()?;
                Ok(ConvKanBank { kernels })
            })
            .collect::<Result<Vec<_>, ConvKanError>>()?;

        let mut head = Vec::with_capacity(head_widths.len() + 1);
        let mut in_dim = conv_out;
        for &w in head_widths {
            head.push(Dense::init(in_dim, w, rng));
            in_dim = w;
        }
        head.push(Dense::init(in_dim, 1, rng));
        Ok(Self {
            banks,
            head,
            channels,
            window,
            features,
            conv_out,
        })
    }

    pub fn banks(&self) -> &[ConvKanBank] {
        &self.banks
    }

    pub fn head(&self) -> &[Dense] {
        &self.head
    }

    pub fn describe(&self) -> String {
        let f = self.banks.len();
        let w = self.banks[0].kernels[0].width();
        let head: Vec<usize> = self.head.iter().map(Dense::out_dim).collect();
        format!(
            "conv-kan filters={f} kernel_width={w} conv_out={} head={head:?}",
            self.conv_out
        )
    }

    /// Forward over a [B, C, N, D] batch to one prediction per sample.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor, ConvKanError> {
        let (b, c, n, d) = match batch.shape() {
            [b, c, n, d] => (*b, *c, *n, *d),
            other => {
                return Err(ConvKanError::Geometry(format!(
                    "expected [B, C, N, D], got {other:?}"
                )))
            }
        };
        if c != self.channels || n != self.window || d != self.features {
            return Err(ConvKanError::Geometry(format!(
                "batch [B={b}, C={c}, N={n}, D={d}] does not match model (C={}, N={}, D={})",
                self.channels, self.window, self.features
            )));
        }
        // Convolve along D for every observation row; one gather per
        // (filter, channel, window offset) covers the whole batch.
        let mut filter_outputs = Vec::with_capacity(self.banks.len());
        for bank in &self.banks {
            let mut acc: Option<Tensor> = None;
            for (ch, kernel) in bank.kernels.iter().enumerate() {
                let stride = kernel.stride;
                let l_out = out_len(d, kernel.width(), stride)?;
                for (k, edge) in kernel.edges.iter().enumerate() {
                    let mut indices = Vec::with_capacity(b * n * l_out);
                    for bi in 0..b {
                        for ni in 0..n {
                            let base = ((bi * c + ch) * n + ni) * d;
                            for j in 0..l_out {
                                indices.push(base + j * stride + k);
                            }
                        }
                    }
                    let taken = ops::gather(batch, Rc::new(indices), &[b * n * l_out])?;
                    let phi = edge.forward(kernel.basis(), &taken)?;
                    acc = Some(match acc {
                        Some(a) => ops::add(&a, &phi)?,
                        None => phi,
                    });
                }
            }
            let flat = acc.expect("at least one channel");
            let per_sample = flat.len() / b;
            filter_outputs.push(ops::reshape(&flat, &[b, per_sample])?);
        }
        let mut cur = ops::concat_cols(&filter_outputs)?;
        debug_assert_eq!(cur.shape(), &[b, self.conv_out]);
        let last = self.head.len() - 1;
        for (i, layer) in self.head.iter().enumerate() {
            cur = layer.forward(&cur)?;
            if i < last {
                cur = ops::silu(&cur);
            }
        }
        Ok(cur)
    }

    pub fn params(&self) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = self.banks.iter().flat_map(|b| b.params()).collect();
        out.extend(self.head.iter().flat_map(Dense::params));
        out
    }
}
