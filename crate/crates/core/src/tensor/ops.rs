//! Differentiable tensor operations.
//!
//! Binary elementwise ops require equal shapes; the only broadcast is
//! tensor-scalar (one operand of length 1). Convolution uses
//! cross-correlation semantics (no kernel flip).

use std::rc::Rc;

use super::{Tensor, TensorError};

fn same_shape(a: &Tensor, b: &Tensor) -> bool {
    a.shape() == b.shape()
}

fn shape_err(op: &str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape(format!(
        "{op}: incompatible shapes {:?} and {:?}",
        a.shape(),
        b.shape()
    ))
}

/// Elementwise sum; one side may be a scalar.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if same_shape(a, b) {
        let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x + y).collect();
        Tensor::from_op(
            a.shape().to_vec(),
            data,
            vec![a.clone(), b.clone()],
            Box::new(|ctx| vec![ctx.out_grad.to_vec(), ctx.out_grad.to_vec()]),
        )
    } else if a.len() == 1 || b.len() == 1 {
        let (scalar, tensor, scalar_first) = if a.len() == 1 {
            (a, b, true)
        } else {
            (b, a, false)
        };
        let s = scalar.item();
        let data: Vec<f64> = tensor.data().iter().map(|x| x + s).collect();
        Tensor::from_op(
            tensor.shape().to_vec(),
            data,
            vec![a.clone(), b.clone()],
            Box::new(move |ctx| {
                let total: f64 = ctx.out_grad.iter().sum();
                let dense = ctx.out_grad.to_vec();
                if scalar_first {
                    vec![vec![total], dense]
                } else {
                    vec![dense, vec![total]]
                }
            }),
        )
    } else {
        Err(shape_err("add", a, b))
    }
}

/// Elementwise difference; one side may be a scalar.
pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if same_shape(a, b) {
        let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x - y).collect();
        Tensor::from_op(
            a.shape().to_vec(),
            data,
            vec![a.clone(), b.clone()],
            Box::new(|ctx| {
                vec![
                    ctx.out_grad.to_vec(),
                    ctx.out_grad.iter().map(|g| -g).collect(),
                ]
            }),
        )
    } else if a.len() == 1 || b.len() == 1 {
        let scalar_first = a.len() == 1;
        let (shape, data): (Vec<usize>, Vec<f64>) = if scalar_first {
            let s = a.item();
            (b.shape().to_vec(), b.data().iter().map(|y| s - y).collect())
        } else {
            let s = b.item();
            (a.shape().to_vec(), a.data().iter().map(|x| x - s).collect())
        };
        Tensor::from_op(
            shape,
            data,
            vec![a.clone(), b.clone()],
            Box::new(move |ctx| {
                let total: f64 = ctx.out_grad.iter().sum();
                if scalar_first {
                    vec![vec![total], ctx.out_grad.iter().map(|g| -g).collect()]
                } else {
                    vec![ctx.out_grad.to_vec(), vec![-total]]
                }
            }),
        )
    } else {
        Err(shape_err("sub", a, b))
    }
}

/// Elementwise (Hadamard) product; one side may be a scalar.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    if same_shape(a, b) {
        let data: Vec<f64> = a.data().iter().zip(b.data().iter()).map(|(x, y)| x * y).collect();
        Tensor::from_op(
            a.shape().to_vec(),
            data,
            vec![a.clone(), b.clone()],
            Box::new(|ctx| {
                let av = ctx.parents[0].data();
                let bv = ctx.parents[1].data();
                vec![
                    ctx.out_grad.iter().zip(bv.iter()).map(|(g, y)| g * y).collect(),
                    ctx.out_grad.iter().zip(av.iter()).map(|(g, x)| g * x).collect(),
                ]
            }),
        )
    } else if a.len() == 1 || b.len() == 1 {
        let scalar_first = a.len() == 1;
        let (scalar, tensor) = if scalar_first { (a, b) } else { (b, a) };
        let s = scalar.item();
        let data: Vec<f64> = tensor.data().iter().map(|x| x * s).collect();
        Tensor::from_op(
            tensor.shape().to_vec(),
            data,
            vec![a.clone(), b.clone()],
            Box::new(move |ctx| {
                let (scalar_p, tensor_p) = if scalar_first {
                    (&ctx.parents[0], &ctx.parents[1])
                } else {
                    (&ctx.parents[1], &ctx.parents[0])
                };
                let s = scalar_p.data()[0];
                let d_scalar: f64 = ctx
                    .out_grad
                    .iter()
                    .zip(tensor_p.data().iter())
                    .map(|(g, x)| g * x)
                    .sum();
                let d_tensor: Vec<f64> = ctx.out_grad.iter().map(|g| g * s).collect();
                if scalar_first {
                    vec![vec![d_scalar], d_tensor]
                } else {
                    vec![d_tensor, vec![d_scalar]]
                }
            }),
        )
    } else {
        Err(shape_err("mul", a, b))
    }
}

/// Alias for the elementwise product in gate equations.
pub fn hadamard(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    mul(a, b)
}

/// x + c for a plain constant.
pub fn add_scalar(x: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = x.data().iter().map(|v| v + c).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(|ctx| vec![ctx.out_grad.to_vec()]),
    )
    .expect("shape preserved")
}

/// c * x for a plain constant.
pub fn mul_scalar(x: &Tensor, c: f64) -> Tensor {
    let data: Vec<f64> = x.data().iter().map(|v| v * c).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |ctx| vec![ctx.out_grad.iter().map(|g| g * c).collect()]),
    )
    .expect("shape preserved")
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn unary(
    x: &Tensor,
    forward: impl Fn(f64) -> f64,
    // (input, output) -> d output / d input
    derivative: impl Fn(f64, f64) -> f64 + 'static,
) -> Tensor {
    let data: Vec<f64> = x.data().iter().map(|&v| forward(v)).collect();
    Tensor::from_op(
        x.shape().to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |ctx| {
            let xv = ctx.parents[0].data();
            vec![ctx
                .out_grad
                .iter()
                .zip(xv.iter().zip(ctx.out_data.iter()))
                .map(|(g, (&xi, &yi))| g * derivative(xi, yi))
                .collect()]
        }),
    )
    .expect("shape preserved")
}

/// x * sigmoid(x).
pub fn silu(x: &Tensor) -> Tensor {
    unary(
        x,
        |v| v * sigmoid_scalar(v),
        |v, _| {
            let s = sigmoid_scalar(v);
            s * (1.0 + v * (1.0 - s))
        },
    )
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    unary(x, sigmoid_scalar, |_, y| y * (1.0 - y))
}

pub fn tanh(x: &Tensor) -> Tensor {
    unary(x, f64::tanh, |_, y| 1.0 - y * y)
}

/// Matrix product of [m, k] and [k, n].
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (ash, bsh) = (a.shape(), b.shape());
    if ash.len() != 2 || bsh.len() != 2 || ash[1] != bsh[0] {
        return Err(shape_err("matmul", a, b));
    }
    let (m, k, n) = (ash[0], ash[1], bsh[1]);
    let av = a.data();
    let bv = b.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = av[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let row = &bv[p * n..(p + 1) * n];
            let dst = &mut out[i * n..(i + 1) * n];
            for j in 0..n {
                dst[j] += aip * row[j];
            }
        }
    }
    drop(av);
    drop(bv);
    Tensor::from_op(
        vec![m, n],
        out,
        vec![a.clone(), b.clone()],
        Box::new(move |ctx| {
            let av = ctx.parents[0].data();
            let bv = ctx.parents[1].data();
            let g = ctx.out_grad;
            // dA = G B^T
            let mut da = vec![0.0; m * k];
            for i in 0..m {
                for p in 0..k {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += g[i * n + j] * bv[p * n + j];
                    }
                    da[i * k + p] = acc;
                }
            }
            // dB = A^T G
            let mut db = vec![0.0; k * n];
            for p in 0..k {
                for i in 0..m {
                    let aip = av[i * k + p];
                    if aip == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        db[p * n + j] += aip * g[i * n + j];
                    }
                }
            }
            vec![da, db]
        }),
    )
}

fn conv_dims(input: &Tensor) -> Result<(usize, usize, usize), TensorError> {
    match input.shape() {
        [c, l] => Ok((1, *c, *l)),
        [b, c, l] => Ok((*b, *c, *l)),
        other => Err(TensorError::Shape(format!(
            "conv1d input must be [C,L] or [B,C,L], got {other:?}"
        ))),
    }
}

/// Valid 1D cross-correlation of input [C, L] (or batched [B, C, L])
/// with weight [F, C, W] at the given stride. Output length is
/// floor((L - W) / stride) + 1.
pub fn conv1d(input: &Tensor, weight: &Tensor, stride: usize) -> Result<Tensor, TensorError> {
    let (batch, channels, length) = conv_dims(input)?;
    let wsh = weight.shape();
    if wsh.len() != 3 || wsh[1] != channels {
        return Err(shape_err("conv1d weight", input, weight));
    }
    if stride == 0 {
        return Err(TensorError::Shape("conv1d: stride must be >= 1".into()));
    }
    let (filters, width) = (wsh[0], wsh[2]);
    if width > length {
        return Err(TensorError::Shape(format!(
            "conv1d: kernel width {width} exceeds input length {length}"
        )));
    }
    let out_len = (length - width) / stride + 1;
    let batched = input.shape().len() == 3;

    let iv = input.data();
    let wv = weight.data();
    let mut out = vec![0.0; batch * filters * out_len];
    for b in 0..batch {
        for f in 0..filters {
            for j in 0..out_len {
                let mut acc = 0.0;
                for c in 0..channels {
                    let in_base = (b * channels + c) * length + j * stride;
                    let w_base = (f * channels + c) * width;
                    for k in 0..width {
                        acc += iv[in_base + k] * wv[w_base + k];
                    }
                }
                out[(b * filters + f) * out_len + j] = acc;
            }
        }
    }
    drop(iv);
    drop(wv);

    let out_shape = if batched {
        vec![batch, filters, out_len]
    } else {
        vec![filters, out_len]
    };
    Tensor::from_op(
        out_shape,
        out,
        vec![input.clone(), weight.clone()],
        Box::new(move |ctx| {
            let iv = ctx.parents[0].data();
            let wv = ctx.parents[1].data();
            let g = ctx.out_grad;
            let mut d_in = vec![0.0; iv.len()];
            let mut d_w = vec![0.0; wv.len()];
            for b in 0..batch {
                for f in 0..filters {
                    for j in 0..out_len {
                        let go = g[(b * filters + f) * out_len + j];
                        if go == 0.0 {
                            continue;
                        }
                        for c in 0..channels {
                            let in_base = (b * channels + c) * length + j * stride;
                            let w_base = (f * channels + c) * width;
                            for k in 0..width {
                                d_in[in_base + k] += go * wv[w_base + k];
                                d_w[w_base + k] += go * iv[in_base + k];
                            }
                        }
                    }
                }
            }
            vec![d_in, d_w]
        }),
    )
}

/// Zero-pads the last axis.
pub fn pad1d(x: &Tensor, left: usize, right: usize) -> Result<Tensor, TensorError> {
    let sh = x.shape();
    if sh.is_empty() {
        return Err(TensorError::Shape("pad1d: rank-0 input".into()));
    }
    let length = *sh.last().unwrap();
    let rows = x.len() / length;
    let new_len = length + left + right;
    let xv = x.data();
    let mut out = vec![0.0; rows * new_len];
    for r in 0..rows {
        out[r * new_len + left..r * new_len + left + length]
            .copy_from_slice(&xv[r * length..(r + 1) * length]);
    }
    drop(xv);
    let mut new_shape = sh.to_vec();
    *new_shape.last_mut().unwrap() = new_len;
    Tensor::from_op(
        new_shape,
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut dx = vec![0.0; rows * length];
            for r in 0..rows {
                dx[r * length..(r + 1) * length].copy_from_slice(
                    &ctx.out_grad[r * new_len + left..r * new_len + left + length],
                );
            }
            vec![dx]
        }),
    )
}

/// Flat-index gather: out[i] = x[indices[i]].
pub fn gather(
    x: &Tensor,
    indices: Rc<Vec<usize>>,
    out_shape: &[usize],
) -> Result<Tensor, TensorError> {
    let expect: usize = out_shape.iter().product();
    if expect != indices.len() {
        return Err(TensorError::Shape(format!(
            "gather: {} indices vs output shape {out_shape:?}",
            indices.len()
        )));
    }
    let xv = x.data();
    if let Some(&bad) = indices.iter().find(|&&i| i >= xv.len()) {
        return Err(TensorError::Shape(format!(
            "gather: index {bad} out of bounds for length {}",
            xv.len()
        )));
    }
    let data: Vec<f64> = indices.iter().map(|&i| xv[i]).collect();
    drop(xv);
    let src_len = x.len();
    let idx = Rc::clone(&indices);
    Tensor::from_op(
        out_shape.to_vec(),
        data,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut dx = vec![0.0; src_len];
            for (g, &i) in ctx.out_grad.iter().zip(idx.iter()) {
                dx[i] += g;
            }
            vec![dx]
        }),
    )
}

/// Column `p` of a [rows, cols] matrix, as a rank-1 tensor.
pub fn col(x: &Tensor, p: usize) -> Result<Tensor, TensorError> {
    let sh = x.shape();
    if sh.len() != 2 || p >= sh[1] {
        return Err(TensorError::Shape(format!(
            "col: index {p} invalid for shape {sh:?}"
        )));
    }
    let (rows, cols) = (sh[0], sh[1]);
    let indices: Vec<usize> = (0..rows).map(|r| r * cols + p).collect();
    gather(x, Rc::new(indices), &[rows])
}

/// Concatenates parts along the column axis. Rank-1 parts of length B
/// count as [B, 1]; all parts must share the row count.
pub fn concat_cols(parts: &[Tensor]) -> Result<Tensor, TensorError> {
    if parts.is_empty() {
        return Err(TensorError::Shape("concat_cols: no parts".into()));
    }
    let row_count = |t: &Tensor| -> Result<(usize, usize), TensorError> {
        match t.shape() {
            [b] => Ok((*b, 1)),
            [b, w] => Ok((*b, *w)),
            other => Err(TensorError::Shape(format!(
                "concat_cols: part must be rank 1 or 2, got {other:?}"
            ))),
        }
    };
    let (rows, _) = row_count(&parts[0])?;
    let mut widths = Vec::with_capacity(parts.len());
    let mut total = 0;
    for p in parts {
        let (b, w) = row_count(p)?;
        if b != rows {
            return Err(TensorError::Shape(format!(
                "concat_cols: row mismatch {b} vs {rows}"
            )));
        }
        widths.push(w);
        total += w;
    }
    let mut out = vec![0.0; rows * total];
    let mut offset = 0;
    for (p, &w) in parts.iter().zip(&widths) {
        let pv = p.data();
        for r in 0..rows {
            out[r * total + offset..r * total + offset + w]
                .copy_from_slice(&pv[r * w..(r + 1) * w]);
        }
        offset += w;
    }
    Tensor::from_op(
        vec![rows, total],
        out,
        parts.to_vec(),
        Box::new(move |ctx| {
            let mut grads = Vec::with_capacity(widths.len());
            let mut offset = 0;
            for &w in &widths {
                let mut dp = vec![0.0; rows * w];
                for r in 0..rows {
                    dp[r * w..(r + 1) * w].copy_from_slice(
                        &ctx.out_grad[r * total + offset..r * total + offset + w],
                    );
                }
                grads.push(dp);
                offset += w;
            }
            grads
        }),
    )
}

/// Stacks rank-1 parts of length B into [B, K] columns.
pub fn stack_cols(parts: &[Tensor]) -> Result<Tensor, TensorError> {
    for p in parts {
        if p.shape().len() != 1 {
            return Err(TensorError::Shape(format!(
                "stack_cols: want rank-1 parts, got {:?}",
                p.shape()
            )));
        }
    }
    concat_cols(parts)
}

/// Same data, new shape (element count must match).
pub fn reshape(x: &Tensor, shape: &[usize]) -> Result<Tensor, TensorError> {
    let expect: usize = shape.iter().product();
    if expect != x.len() {
        return Err(TensorError::Shape(format!(
            "reshape: {:?} -> {shape:?} changes element count",
            x.shape()
        )));
    }
    Tensor::from_op(
        shape.to_vec(),
        x.to_vec(),
        vec![x.clone()],
        Box::new(|ctx| vec![ctx.out_grad.to_vec()]),
    )
}

/// Sum of all elements, as a scalar tensor.
pub fn sum(x: &Tensor) -> Tensor {
    let total: f64 = x.data().iter().sum();
    let n = x.len();
    Tensor::from_op(
        vec![1],
        vec![total],
        vec![x.clone()],
        Box::new(move |ctx| vec![vec![ctx.out_grad[0]; n]]),
    )
    .expect("scalar output")
}

/// Mean of all elements, as a scalar tensor.
pub fn mean(x: &Tensor) -> Tensor {
    let n = x.len();
    let total: f64 = x.data().iter().sum();
    Tensor::from_op(
        vec![1],
        vec![total / n as f64],
        vec![x.clone()],
        Box::new(move |ctx| vec![vec![ctx.out_grad[0] / n as f64; n]]),
    )
    .expect("scalar output")
}

/// Sums a [R, C] matrix over rows, producing [C].
pub fn sum_axis0(x: &Tensor) -> Result<Tensor, TensorError> {
    let sh = x.shape();
    if sh.len() != 2 {
        return Err(TensorError::Shape(format!(
            "sum_axis0: want rank 2, got {sh:?}"
        )));
    }
    let (rows, cols) = (sh[0], sh[1]);
    let xv = x.data();
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c] += xv[r * cols + c];
        }
    }
    drop(xv);
    Tensor::from_op(
        vec![cols],
        out,
        vec![x.clone()],
        Box::new(move |ctx| {
            let mut dx = vec![0.0; rows * cols];
            for r in 0..rows {
                dx[r * cols..(r + 1) * cols].copy_from_slice(ctx.out_grad);
            }
            vec![dx]
        }),
    )
}

/// Adds a [C]-vector to every row of a [R, C] matrix.
pub fn add_rowvec(x: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let sh = x.shape();
    if sh.len() != 2 || b.shape() != [sh[1]] {
        return Err(shape_err("add_rowvec", x, b));
    }
    let (rows, cols) = (sh[0], sh[1]);
    let xv = x.data();
    let bv = b.data();
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            out.push(xv[r * cols + c] + bv[c]);
        }
    }
    drop(xv);
    drop(bv);
    Tensor::from_op(
        vec![rows, cols],
        out,
        vec![x.clone(), b.clone()],
        Box::new(move |ctx| {
            let mut db = vec![0.0; cols];
            for r in 0..rows {
                for (acc, g) in db.iter_mut().zip(&ctx.out_grad[r * cols..(r + 1) * cols]) {
                    *acc += g;
                }
            }
            vec![ctx.out_grad.to_vec(), db]
        }),
    )
}

/// Adds a per-channel bias [C] to a [C, L] or [B, C, L] tensor.
pub fn add_channel_bias(x: &Tensor, b: &Tensor) -> Result<Tensor, TensorError> {
    let (batch, channels, length) = conv_dims(x)?;
    if b.shape() != [channels] {
        return Err(shape_err("add_channel_bias", x, b));
    }
    let xv = x.data();
    let bv = b.data();
    let mut out = Vec::with_capacity(xv.len());
    for bi in 0..batch {
        for c in 0..channels {
            let base = (bi * channels + c) * length;
            for l in 0..length {
                out.push(xv[base + l] + bv[c]);
            }
        }
    }
    drop(xv);
    drop(bv);
    Tensor::from_op(
        x.shape().to_vec(),
        out,
        vec![x.clone(), b.clone()],
        Box::new(move |ctx| {
            let mut db = vec![0.0; channels];
            for bi in 0..batch {
                for (c, acc) in db.iter_mut().enumerate() {
                    let base = (bi * channels + c) * length;
                    *acc += ctx.out_grad[base..base + length].iter().sum::<f64>();
                }
            }
            vec![ctx.out_grad.to_vec(), db]
        }),
    )
}

/// Hadamard product of a batched [B, C, L] tensor with a shared [C, L]
/// factor (peephole-style broadcast over the batch axis).
pub fn mul_bcast_batch(x: &Tensor, w: &Tensor) -> Result<Tensor, TensorError> {
    let xsh = x.shape();
    if xsh.len() == 2 {
        return mul(x, w);
    }
    if xsh.len() != 3 || w.shape() != &xsh[1..] {
        return Err(shape_err("mul_bcast_batch", x, w));
    }
    let (batch, per) = (xsh[0], xsh[1] * xsh[2]);
    let xv = x.data();
    let wv = w.data();
    let mut out = Vec::with_capacity(xv.len());
    for b in 0..batch {
        for i in 0..per {
            out.push(xv[b * per + i] * wv[i]);
        }
    }
    drop(xv);
    drop(wv);
    Tensor::from_op(
        xsh.to_vec(),
        out,
        vec![x.clone(), w.clone()],
        Box::new(move |ctx| {
            let xv = ctx.parents[0].data();
            let wv = ctx.parents[1].data();
            let mut dx = vec![0.0; batch * per];
            let mut dw = vec![0.0; per];
            for b in 0..batch {
                for i in 0..per {
                    let g = ctx.out_grad[b * per + i];
                    dx[b * per + i] = g * wv[i];
                    dw[i] += g * xv[b * per + i];
                }
            }
            vec![dx, dw]
        }),
    )
}
