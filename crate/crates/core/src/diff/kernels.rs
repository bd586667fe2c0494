//! Forward and backward rules for every differentiable operation.
//!
//! Each forward kernel is a pure function of its inputs. Backward kernels take
//! the forward inputs plus the upstream gradient and return one gradient per
//! differentiable input. Only forward kernels report multiply-accumulates to
//! the counter.

use super::counter;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// `c[m×n] += a[m×k] · b[k×n]` on raw slices.
fn gemm_acc(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (cv, bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[j * rows + i] = a[i * cols + j];
        }
    }
    out
}

fn dims2(t: &Tensor, what: &str) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::shape(format!(
            "{what} expects a 2-D tensor, got {:?}",
            t.shape()
        ))),
    }
}

fn dims3(t: &Tensor, what: &str) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::shape(format!(
            "{what} expects a 3-D tensor, got {:?}",
            t.shape()
        ))),
    }
}

fn last_dim(t: &Tensor) -> usize {
    *t.shape().last().expect("tensor has at least one axis")
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = dims2(a, "matmul")?;
    let (k2, n) = dims2(b, "matmul")?;
    if k != k2 {
        return Err(Error::shape(format!(
            "matmul inner dimensions disagree: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut out = vec![0.0; m * n];
    gemm_acc(a.data(), b.data(), &mut out, m, k, n);
    counter::record((m * k * n) as u64);
    Tensor::new(&[m, n], out)
}

pub fn matmul_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let bt = transpose_raw(b.data(), k, n);
    let mut da = vec![0.0; m * k];
    gemm_acc(grad.data(), &bt, &mut da, m, n, k);
    let at = transpose_raw(a.data(), m, k);
    let mut db = vec![0.0; k * n];
    gemm_acc(&at, grad.data(), &mut db, k, m, n);
    (
        Tensor::new(&[m, k], da).expect("shape"),
        Tensor::new(&[k, n], db).expect("shape"),
    )
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (r, c) = dims2(a, "transpose")?;
    Tensor::new(&[c, r], transpose_raw(a.data(), r, c))
}

pub fn reshape(a: &Tensor, shape: &[usize]) -> Result<Tensor> {
    a.clone().reshaped(shape)
}

/// Elementwise sum. Either operand may carry a leading axis of extent 1 that
/// broadcasts against the other's leading axis.
pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        return Tensor::new(a.shape(), data);
    }
    let (small, big) = broadcast_pair(a, b)?;
    let inner = small.len();
    let data = big
        .data()
        .chunks(inner)
        .flat_map(|chunk| chunk.iter().zip(small.data()).map(|(x, y)| x + y))
        .collect();
    Tensor::new(big.shape(), data)
}

fn broadcast_pair<'t>(a: &'t Tensor, b: &'t Tensor) -> Result<(&'t Tensor, &'t Tensor)> {
    let compatible = |s: &Tensor, l: &Tensor| {
        s.ndim() == l.ndim() && s.ndim() > 0 && s.shape()[0] == 1 && s.shape()[1..] == l.shape()[1..]
    };
    if compatible(a, b) {
        Ok((a, b))
    } else if compatible(b, a) {
        Ok((b, a))
    } else {
        Err(Error::shape(format!(
            "add cannot broadcast {:?} with {:?}",
            a.shape(),
            b.shape()
        )))
    }
}

pub fn add_backward(a: &Tensor, b: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let reduce = |target: &Tensor| {
        if target.shape() == grad.shape() {
            return grad.clone();
        }
        let inner = target.len();
        let mut out = vec![0.0; inner];
        for chunk in grad.data().chunks(inner) {
            for (o, g) in out.iter_mut().zip(chunk) {
                *o += g;
            }
        }
        Tensor::new(target.shape(), out).expect("shape")
    };
    (reduce(a), reduce(b))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(x.shape(), data).expect("shape")
}

/// Output length of a centred ("same") convolution with the given stride.
pub fn strided_len(t: usize, stride: usize) -> usize {
    t.div_ceil(stride)
}

pub fn check_temporal_kernel(kernel: usize, stride: usize) -> Result<()> {
    if kernel % 2 == 0 {
        return Err(Error::config(format!(
            "temporal kernel size must be odd, got {kernel}"
        )));
    }
    if !(1..=2).contains(&stride) {
        return Err(Error::config(format!(
            "temporal stride must be 1 or 2, got {stride}"
        )));
    }
    Ok(())
}

/// Convolution along the frame axis of `x[J×T×C_in]` with kernel
/// `w[k×C_in×C_out]`, zero padding `(k-1)/2` on both sides.
pub fn conv1d_temporal(x: &Tensor, w: &Tensor, stride: usize) -> Result<Tensor> {
    let (joints, frames, c_in) = dims3(x, "conv1d_temporal input")?;
    let (k, w_in, c_out) = dims3(w, "conv1d_temporal kernel")?;
    check_temporal_kernel(k, stride)?;
    if w_in != c_in {
        return Err(Error::shape(format!(
            "conv1d_temporal kernel {:?} does not match input channels of {:?}",
            w.shape(),
            x.shape()
        )));
    }
    let pad = (k - 1) / 2;
    let t_out = strided_len(frames, stride);
    let mut out = vec![0.0; joints * t_out * c_out];
    let xd = x.data();
    let wd = w.data();
    for j in 0..joints {
        for to in 0..t_out {
            let o_row = &mut out[(j * t_out + to) * c_out..(j * t_out + to + 1) * c_out];
            for q in 0..k {
                let src = (to * stride + q) as isize - pad as isize;
                if src < 0 || src >= frames as isize {
                    continue;
                }
                let x_row = &xd[(j * frames + src as usize) * c_in..][..c_in];
                let w_tap = &wd[q * c_in * c_out..(q + 1) * c_in * c_out];
                gemm_acc(x_row, w_tap, o_row, 1, c_in, c_out);
            }
        }
    }
    counter::record((joints * t_out * k * c_in * c_out) as u64);
    Tensor::new(&[joints, t_out, c_out], out)
}

pub fn conv1d_temporal_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    grad: &Tensor,
) -> (Tensor, Tensor) {
    let (joints, frames, c_in) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (k, c_out) = (w.shape()[0], w.shape()[2]);
    let pad = (k - 1) / 2;
    let t_out = grad.shape()[1];
    let mut dx = vec![0.0; x.len()];
    let mut dw = vec![0.0; w.len()];
    let (xd, wd, gd) = (x.data(), w.data(), grad.data());
    for j in 0..joints {
        for to in 0..t_out {
            let g_row = &gd[(j * t_out + to) * c_out..][..c_out];
            for q in 0..k {
                let src = (to * stride + q) as isize - pad as isize;
                if src < 0 || src >= frames as isize {
                    continue;
                }
                let base = (j * frames + src as usize) * c_in;
                for c in 0..c_in {
                    let w_row = &wd[(q * c_in + c) * c_out..][..c_out];
                    let mut acc = 0.0;
                    for (wv, gv) in w_row.iter().zip(g_row) {
                        acc += wv * gv;
                    }
                    dx[base + c] += acc;
                    let xv = xd[base + c];
                    if xv != 0.0 {
                        let dw_row = &mut dw[(q * c_in + c) * c_out..][..c_out];
                        for (d, gv) in dw_row.iter_mut().zip(g_row) {
                            *d += xv * gv;
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::new(x.shape(), dx).expect("shape"),
        Tensor::new(w.shape(), dw).expect("shape"),
    )
}

/// `out[j, ...] = d[j] · x[j, ...]`.
pub fn scale_joints(d: &Tensor, x: &Tensor) -> Result<Tensor> {
    if d.ndim() != 1 || x.ndim() < 1 || d.shape()[0] != x.shape()[0] {
        return Err(Error::shape(format!(
            "joint weights {:?} do not match joint axis of {:?}",
            d.shape(),
            x.shape()
        )));
    }
    let inner = x.len() / d.len();
    let data = x
        .data()
        .chunks(inner)
        .zip(d.data())
        .flat_map(|(chunk, &s)| chunk.iter().map(move |v| s * v))
        .collect();
    counter::record(x.len() as u64);
    Tensor::new(x.shape(), data)
}

pub fn scale_joints_backward(d: &Tensor, x: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let inner = x.len() / d.len();
    let mut dd = vec![0.0; d.len()];
    let mut dx = vec![0.0; x.len()];
    for (j, &s) in d.data().iter().enumerate() {
        let range = j * inner..(j + 1) * inner;
        let xs = &x.data()[range.clone()];
        let gs = &grad.data()[range.clone()];
        dd[j] = xs.iter().zip(gs).map(|(a, b)| a * b).sum();
        for (o, g) in dx[range].iter_mut().zip(gs) {
            *o = s * g;
        }
    }
    (
        Tensor::new(d.shape(), dd).expect("shape"),
        Tensor::new(x.shape(), dx).expect("shape"),
    )
}

fn check_channel_vec(x: &Tensor, v: &Tensor, what: &str) -> Result<()> {
    if v.ndim() != 1 || v.shape()[0] != last_dim(x) {
        return Err(Error::shape(format!(
            "{what} {:?} does not match channel axis of {:?}",
            v.shape(),
            x.shape()
        )));
    }
    Ok(())
}

/// Per-channel `scale · x + bias` over the last axis.
pub fn channel_affine(x: &Tensor, scale: &Tensor, bias: &Tensor) -> Result<Tensor> {
    check_channel_vec(x, scale, "channel scale")?;
    check_channel_vec(x, bias, "channel bias")?;
    let c = last_dim(x);
    let data = x
        .data()
        .chunks(c)
        .flat_map(|row| {
            row.iter()
                .zip(scale.data().iter().zip(bias.data()))
                .map(|(v, (s, b))| s * v + b)
        })
        .collect();
    Tensor::new(x.shape(), data)
}

pub fn channel_affine_backward(
    x: &Tensor,
    scale: &Tensor,
    grad: &Tensor,
) -> (Tensor, Tensor, Tensor) {
    let c = last_dim(x);
    let mut dx = vec![0.0; x.len()];
    let mut ds = vec![0.0; c];
    let mut db = vec![0.0; c];
    for ((xr, gr), dr) in x
        .data()
        .chunks(c)
        .zip(grad.data().chunks(c))
        .zip(dx.chunks_mut(c))
    {
        for i in 0..c {
            dr[i] = scale.data()[i] * gr[i];
            ds[i] += xr[i] * gr[i];
            db[i] += gr[i];
        }
    }
    (
        Tensor::new(x.shape(), dx).expect("shape"),
        Tensor::new(&[c], ds).expect("shape"),
        Tensor::new(&[c], db).expect("shape"),
    )
}

pub fn bias_add(x: &Tensor, bias: &Tensor) -> Result<Tensor> {
    check_channel_vec(x, bias, "bias")?;
    let c = last_dim(x);
    let data = x
        .data()
        .chunks(c)
        .flat_map(|row| row.iter().zip(bias.data()).map(|(v, b)| v + b))
        .collect();
    Tensor::new(x.shape(), data)
}

pub fn bias_add_backward(x: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let c = last_dim(x);
    let mut db = vec![0.0; c];
    for row in grad.data().chunks(c) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    (grad.clone(), Tensor::new(&[c], db).expect("shape"))
}

/// Adds a per-joint row `enc[J, C]` to `x[.., J, T, C]`, broadcast over the
/// leading axes and frames.
pub fn add_joint_encoding(x: &Tensor, enc: &Tensor) -> Result<Tensor> {
    let (j, c) = check_joint_encoding(x, enc)?;
    let t = x.shape()[x.ndim() - 2];
    let mut y = x.clone();
    for (n, row) in y.data_mut().chunks_mut(c).enumerate() {
        let joint = (n / t) % j;
        for (v, e) in row.iter_mut().zip(&enc.data()[joint * c..(joint + 1) * c]) {
            *v += e;
        }
    }
    Ok(y)
}

fn check_joint_encoding(x: &Tensor, enc: &Tensor) -> Result<(usize, usize)> {
    let ok = x.ndim() >= 3
        && enc.ndim() == 2
        && enc.shape()[0] == x.shape()[x.ndim() - 3]
        && enc.shape()[1] == last_dim(x);
    if !ok {
        return Err(Error::shape(format!(
            "joint encoding {:?} does not match input {:?}",
            enc.shape(),
            x.shape()
        )));
    }
    Ok((enc.shape()[0], enc.shape()[1]))
}

pub fn add_joint_encoding_backward(x: &Tensor, enc: &Tensor, grad: &Tensor) -> (Tensor, Tensor) {
    let (j, c) = (enc.shape()[0], enc.shape()[1]);
    let t = x.shape()[x.ndim() - 2];
    let mut de = vec![0.0; j * c];
    for (n, row) in grad.data().chunks(c).enumerate() {
        let joint = (n / t) % j;
        for (d, g) in de[joint * c..(joint + 1) * c].iter_mut().zip(row) {
            *d += g;
        }
    }
    (grad.clone(), Tensor::new(enc.shape(), de).expect("shape"))
}

/// Moves the leading instance axis into channels: `[I, .., C]` to
/// `[.., I·C]`, instance-major within each row.
pub fn instances_to_channels(x: &Tensor) -> Result<Tensor> {
    if x.ndim() < 2 {
        return Err(Error::shape(format!(
            "instance stacking needs a leading axis, got {:?}",
            x.shape()
        )));
    }
    let i_n = x.shape()[0];
    let c = last_dim(x);
    let rows = x.len() / (i_n * c);
    let mut out = vec![0.0; x.len()];
    for i in 0..i_n {
        for r in 0..rows {
            let src = (i * rows + r) * c;
            let dst = r * i_n * c + i * c;
            out[dst..dst + c].copy_from_slice(&x.data()[src..src + c]);
        }
    }
    let mut shape = x.shape()[1..].to_vec();
    *shape.last_mut().expect("non-empty") = i_n * c;
    Tensor::new(&shape, out)
}

pub fn instances_to_channels_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let i_n = x.shape()[0];
    let c = last_dim(x);
    let rows = x.len() / (i_n * c);
    let mut dx = vec![0.0; x.len()];
    for i in 0..i_n {
        for r in 0..rows {
            let dst = (i * rows + r) * c;
            let src = r * i_n * c + i * c;
            dx[dst..dst + c].copy_from_slice(&grad.data()[src..src + c]);
        }
    }
    Tensor::new(x.shape(), dx).expect("shape")
}

/// Channels `[start, end)` of the last axis.
pub fn slice_last(x: &Tensor, start: usize, end: usize) -> Result<Tensor> {
    let c = last_dim(x);
    if start >= end || end > c {
        return Err(Error::shape(format!(
            "channel slice {start}..{end} invalid for {:?}",
            x.shape()
        )));
    }
    let data = x
        .data()
        .chunks(c)
        .flat_map(|row| row[start..end].iter().copied())
        .collect();
    let mut shape = x.shape().to_vec();
    *shape.last_mut().expect("non-empty") = end - start;
    Tensor::new(&shape, data)
}

pub fn slice_last_backward(x: &Tensor, start: usize, end: usize, grad: &Tensor) -> Tensor {
    let c = last_dim(x);
    let w = end - start;
    let mut dx = vec![0.0; x.len()];
    for (dr, gr) in dx.chunks_mut(c).zip(grad.data().chunks(w)) {
        dr[start..end].copy_from_slice(gr);
    }
    Tensor::new(x.shape(), dx).expect("shape")
}

/// Concatenation along the last axis.
pub fn concat_last(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts
        .first()
        .ok_or_else(|| Error::shape("concat of zero tensors"))?;
    let lead = &first.shape()[..first.ndim() - 1];
    for p in parts {
        if p.ndim() != first.ndim() || &p.shape()[..p.ndim() - 1] != lead {
            return Err(Error::shape(format!(
                "concat shapes disagree: {:?} vs {:?}",
                first.shape(),
                p.shape()
            )));
        }
    }
    let widths: Vec<usize> = parts.iter().map(|p| last_dim(p)).collect();
    let total: usize = widths.iter().sum();
    let rows = first.len() / widths[0];
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (p, &w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    Tensor::new(&shape, data)
}

pub fn concat_last_backward(parts: &[&Tensor], grad: &Tensor) -> Vec<Tensor> {
    let widths: Vec<usize> = parts.iter().map(|p| last_dim(p)).collect();
    let total: usize = widths.iter().sum();
    let mut outs: Vec<Vec<f64>> = parts.iter().map(|p| Vec::with_capacity(p.len())).collect();
    for row in grad.data().chunks(total) {
        let mut off = 0;
        for (o, &w) in outs.iter_mut().zip(&widths) {
            o.extend_from_slice(&row[off..off + w]);
            off += w;
        }
    }
    outs.into_iter()
        .zip(parts)
        .map(|(d, p)| Tensor::new(p.shape(), d).expect("shape"))
        .collect()
}

/// Keeps frames `0, s, 2s, …` of `x[J×T×C]`.
pub fn subsample_frames(x: &Tensor, stride: usize) -> Result<Tensor> {
    let (joints, frames, c) = dims3(x, "subsample_frames")?;
    if stride == 0 {
        return Err(Error::config("frame stride must be positive"));
    }
    let t_out = strided_len(frames, stride);
    let mut data = Vec::with_capacity(joints * t_out * c);
    for j in 0..joints {
        for to in 0..t_out {
            let src = (j * frames + to * stride) * c;
            data.extend_from_slice(&x.data()[src..src + c]);
        }
    }
    Tensor::new(&[joints, t_out, c], data)
}

pub fn subsample_frames_backward(x: &Tensor, stride: usize, grad: &Tensor) -> Tensor {
    let (joints, frames, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let t_out = grad.shape()[1];
    let mut dx = vec![0.0; x.len()];
    for j in 0..joints {
        for to in 0..t_out {
            let dst = (j * frames + to * stride) * c;
            let src = (j * t_out + to) * c;
            dx[dst..dst + c].copy_from_slice(&grad.data()[src..src + c]);
        }
    }
    Tensor::new(x.shape(), dx).expect("shape")
}

/// Average over every axis but the last: `[…×C] → [C]`.
pub fn mean_pool(x: &Tensor) -> Tensor {
    let c = last_dim(x);
    let rows = x.len() / c;
    let mut out = vec![0.0; c];
    for row in x.data().chunks(c) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    for o in &mut out {
        *o /= rows as f64;
    }
    Tensor::new(&[c], out).expect("shape")
}

pub fn mean_pool_backward(x: &Tensor, grad: &Tensor) -> Tensor {
    let c = last_dim(x);
    let rows = (x.len() / c) as f64;
    let data = (0..x.len()).map(|i| grad.data()[i % c] / rows).collect();
    Tensor::new(x.shape(), data).expect("shape")
}

/// Elementwise maximum over the leading axis: `[I×…] → […]`.
pub fn max_leading(z: &Tensor) -> Result<Tensor> {
    if z.ndim() < 2 {
        return Err(Error::shape(format!(
            "max over instances needs rank >= 2, got {:?}",
            z.shape()
        )));
    }
    let inner = z.len() / z.shape()[0];
    let mut out = z.data()[..inner].to_vec();
    for chunk in z.data().chunks(inner).skip(1) {
        for (o, &v) in out.iter_mut().zip(chunk) {
            if v > *o {
                *o = v;
            }
        }
    }
    Tensor::new(&z.shape()[1..], out)
}

/// Gradient flows to the first instance that attains the maximum.
pub fn max_leading_backward(z: &Tensor, grad: &Tensor) -> Tensor {
    let inner = z.len() / z.shape()[0];
    let mut winner = vec![0usize; inner];
    let mut best = z.data()[..inner].to_vec();
    for (i, chunk) in z.data().chunks(inner).enumerate().skip(1) {
        for (e, &v) in chunk.iter().enumerate() {
            if v > best[e] {
                best[e] = v;
                winner[e] = i;
            }
        }
    }
    let mut dz = vec![0.0; z.len()];
    for (e, &i) in winner.iter().enumerate() {
        dz[i * inner + e] = grad.data()[e];
    }
    Tensor::new(z.shape(), dz).expect("shape")
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Negative log-likelihood of `label` under `softmax(logits)`.
pub fn softmax_cross_entropy(logits: &Tensor, label: usize) -> Result<Tensor> {
    if label >= logits.len() {
        return Err(Error::Index(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + logits
            .data()
            .iter()
            .map(|v| (v - max).exp())
            .sum::<f64>()
            .ln();
    Ok(Tensor::scalar(lse - logits.data()[label]))
}

pub fn softmax_cross_entropy_backward(logits: &Tensor, label: usize, grad: &Tensor) -> Tensor {
    let g = grad.data()[0];
    let mut p = softmax(logits.data());
    p[label] -= 1.0;
    Tensor::new(logits.shape(), p.into_iter().map(|v| v * g).collect()).expect("shape")
}

/// `Σ weights ⊙ x` as a one-element tensor.
pub fn weighted_sum(x: &Tensor, weights: &Tensor) -> Result<Tensor> {
    if x.shape() != weights.shape() {
        return Err(Error::shape(format!(
            "weighted_sum weights {:?} do not match {:?}",
            weights.shape(),
            x.shape()
        )));
    }
    Ok(Tensor::scalar(
        x.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_encoding_broadcasts_over_persons_and_frames() {
        let x = Tensor::zeros(&[2, 3, 2, 1]);
        let enc = Tensor::new(&[3, 1], vec![1.0, 2.0, 3.0]).unwrap();
        let y = add_joint_encoding(&x, &enc).unwrap();
        assert_eq!(y.data(), &[1., 1., 2., 2., 3., 3., 1., 1., 2., 2., 3., 3.]);
        let (_, de) = add_joint_encoding_backward(&x, &enc, &Tensor::full(&[2, 3, 2, 1], 1.0));
        assert_eq!(de.data(), &[4.0, 4.0, 4.0]);
        assert!(add_joint_encoding(&x, &Tensor::zeros(&[2, 1])).is_err());
    }

    #[test]
    fn instance_stacking_layout() {
        // two instances, two rows, two channels
        let x = Tensor::new(&[2, 2, 2], vec![1., 2., 3., 4., 5., 6., 7., 8.]).unwrap();
        let y = instances_to_channels(&x).unwrap();
        assert_eq!(y.shape(), &[2, 4]);
        assert_eq!(y.data(), &[1., 2., 5., 6., 3., 4., 7., 8.]);
        assert_eq!(instances_to_channels_backward(&x, &y), x);
    }

    #[test]
    fn matmul_hand_example() {
        let a = Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Tensor::from_rows(&[vec![0.0], vec![1.0]]);
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 1]);
        assert_eq!(c.data(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_identity_is_exact() {
        let b = Tensor::new(&[3, 2], vec![0.1, -2.5, 3.3, 1e-9, 7.0, -0.0]).unwrap();
        let c = matmul(&Tensor::eye(3), &b).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn matmul_mismatch_names_both_shapes() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3] x [2, 3]"), "{msg}");
    }

    #[test]
    fn identity_kernel_leaves_input_unchanged() {
        let x = Tensor::new(&[2, 3, 2], (0..12).map(|v| v as f64 * 0.5 - 1.0).collect()).unwrap();
        let mut w = Tensor::zeros(&[1, 2, 2]);
        w.set(&[0, 0, 0], 1.0);
        w.set(&[0, 1, 1], 1.0);
        assert_eq!(conv1d_temporal(&x, &w, 1).unwrap(), x);
    }

    #[test]
    fn averaging_kernel_on_constant_halves_length() {
        let x = Tensor::full(&[2, 8, 1], 3.0);
        // k=1 average over a single tap; k=3 averaging would see padding at the edges
        let w = Tensor::full(&[1, 1, 1], 1.0);
        let y = conv1d_temporal(&x, &w, 2).unwrap();
        assert_eq!(y.shape(), &[2, 4, 1]);
        assert!(y.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn same_padding_output_length() {
        let x = Tensor::zeros(&[1, 7, 1]);
        let w = Tensor::zeros(&[5, 1, 1]);
        assert_eq!(conv1d_temporal(&x, &w, 2).unwrap().shape(), &[1, 4, 1]);
        assert_eq!(conv1d_temporal(&x, &w, 1).unwrap().shape(), &[1, 7, 1]);
    }

    #[test]
    fn even_kernel_is_config_error() {
        let err = conv1d_temporal(&Tensor::zeros(&[1, 4, 1]), &Tensor::zeros(&[4, 1, 1]), 1)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn relu_definition() {
        let y = relu(&Tensor::new(&[2], vec![-1.0, 2.0]).unwrap());
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn uniform_logits_cross_entropy_is_ln4() {
        let logits = Tensor::full(&[4], 0.7);
        for label in 0..4 {
            let l = softmax_cross_entropy(&logits, label).unwrap();
            assert!((l.data()[0] - 4f64.ln()).abs() < 1e-15);
        }
        assert!(matches!(
            softmax_cross_entropy(&logits, 4),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn broadcast_add_over_leading_axis() {
        let a = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(&[3, 2], vec![0.0, 0.0, 10.0, 10.0, 20.0, 20.0]).unwrap();
        let y = add(&a, &b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 11.0, 12.0, 21.0, 22.0]);
        assert_eq!(add(&b, &a).unwrap(), y);
        let (da, db) = add_backward(&a, &b, &Tensor::full(&[3, 2], 1.0));
        assert_eq!(da.data(), &[3.0, 3.0]);
        assert_eq!(db.data(), &[1.0; 6]);
        assert!(add(&Tensor::zeros(&[2, 2]), &b).is_err());
    }

    #[test]
    fn max_leading_picks_dominant_instance() {
        let z = Tensor::new(&[2, 3], vec![1.0, 5.0, -1.0, 2.0, 0.0, -3.0]).unwrap();
        assert_eq!(max_leading(&z).unwrap().data(), &[2.0, 5.0, -1.0]);
    }

    #[test]
    fn counter_tallies_forward_macs_only() {
        let a = Tensor::full(&[2, 3], 1.0);
        let b = Tensor::full(&[3, 4], 1.0);
        let (c, macs) = counter::count_macs(|| matmul(&a, &b).unwrap());
        assert_eq!(macs, 24);
        let (_, back) = counter::count_macs(|| matmul_backward(&a, &b, &c));
        assert_eq!(back, 0);
    }
}
