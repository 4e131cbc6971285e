use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Whether batch normalization uses batch statistics (and updates its running
/// averages) or the frozen running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

fn he_uniform(fan_in: usize, len: usize, rng: &mut Rng) -> Vec<f64> {
    let limit = (6.0 / fan_in as f64).sqrt();
    (0..len).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Removes the entries at `sorted` (ascending, unique) from `v`, where each
/// logical entry spans `group` consecutive scalars.
pub(crate) fn remove_groups<T: Copy>(v: &mut Vec<T>, sorted: &[usize], group: usize) {
    let mut out = Vec::with_capacity(v.len());
    let mut skip = sorted.iter().peekable();
    for (g, chunk) in v.chunks(group).enumerate() {
        if skip.peek() == Some(&&g) {
            skip.next();
            continue;
        }
        out.extend_from_slice(chunk);
    }
    *v = out;
}

/// Fully connected layer, `weights` stored `out_units × in_units` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub(crate) in_units: usize,
    pub(crate) out_units: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Dense {
    pub fn new(in_units: usize, out_units: usize, rng: &mut Rng) -> Self {
        Self {
            in_units,
            out_units,
            weights: he_uniform(in_units, in_units * out_units, rng),
            bias: vec![0.0; out_units],
        }
    }

    pub fn from_parts(
        in_units: usize,
        out_units: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if in_units == 0 || out_units == 0 {
            return Err(Error::InvalidConfig("dense layer needs ≥1 unit".into()));
        }
        if weights.len() != in_units * out_units || bias.len() != out_units {
            return Err(Error::ShapeMismatch {
                expected: vec![out_units, in_units],
                got: vec![weights.len(), bias.len()],
            });
        }
        Ok(Self {
            in_units,
            out_units,
            weights,
            bias,
        })
    }

    pub fn in_units(&self) -> usize {
        self.in_units
    }

    pub fn out_units(&self) -> usize {
        self.out_units
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Tensor {
        let n = x.batch();
        let mut out = vec![0.0; n * self.out_units];
        for (xs, ys) in x.data().chunks(self.in_units).zip(out.chunks_mut(self.out_units)) {
            for (o, y) in ys.iter_mut().enumerate() {
                let row = &self.weights[o * self.in_units..(o + 1) * self.in_units];
                *y = self.bias[o] + row.iter().zip(xs).map(|(w, v)| w * v).sum::<f64>();
            }
        }
        Tensor::from_parts(vec![n, self.out_units], out)
    }

    pub(crate) fn backward(&self, x: &Tensor, grad: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.out_units];
        let mut gx = vec![0.0; x.len()];
        for ((xs, gs), gxs) in x
            .data()
            .chunks(self.in_units)
            .zip(grad.data().chunks(self.out_units))
            .zip(gx.chunks_mut(self.in_units))
        {
            for (o, &g) in gs.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                gb[o] += g;
                let row = o * self.in_units;
                for i in 0..self.in_units {
                    gw[row + i] += g * xs[i];
                    gxs[i] += g * self.weights[row + i];
                }
            }
        }
        (Tensor::from_parts(x.shape().to_vec(), gx), vec![gw, gb])
    }

    pub(crate) fn remove_outputs(&mut self, sorted: &[usize]) {
        remove_groups(&mut self.weights, sorted, self.in_units);
        remove_groups(&mut self.bias, sorted, 1);
        self.out_units -= sorted.len();
    }

    pub(crate) fn remove_inputs(&mut self, sorted: &[usize]) {
        let mut w = Vec::with_capacity(self.out_units * (self.in_units - sorted.len()));
        for row in self.weights.chunks(self.in_units) {
            let mut row = row.to_vec();
            remove_groups(&mut row, sorted, 1);
            w.extend(row);
        }
        self.weights = w;
        self.in_units -= sorted.len();
    }

    pub(crate) fn zero_output(&mut self, unit: usize) {
        self.weights[unit * self.in_units..(unit + 1) * self.in_units].fill(0.0);
        self.bias[unit] = 0.0;
    }
}

/// 2-D convolution over `[batch, channels, height, width]` tensors. Filters
/// are stored `n_filters × in_channels × k × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub(crate) in_channels: usize,
    pub(crate) n_filters: usize,
    pub(crate) kernel: usize,
    pub(crate) stride: usize,
    pub(crate) padding: usize,
    pub(crate) filters: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        n_filters: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut Rng,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        Self {
            in_channels,
            n_filters,
            kernel,
            stride,
            padding,
            filters: he_uniform(fan_in, n_filters * fan_in, rng),
            bias: vec![0.0; n_filters],
        }
    }

    pub fn n_filters(&self) -> usize {
        self.n_filters
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (hp, wp) = (h + 2 * self.padding, w + 2 * self.padding);
        if hp < self.kernel || wp < self.kernel {
            return None;
        }
        Some((
            (hp - self.kernel) / self.stride + 1,
            (wp - self.kernel) / self.stride + 1,
        ))
    }

    fn filter_len(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Valid output range along one axis for kernel offset `k`: output
    /// positions `o` such that `o * stride + k - padding` is inside `0..len`.
    fn valid_range(&self, k: usize, len: usize, out_len: usize) -> (usize, usize) {
        let lo = self.padding.saturating_sub(k).div_ceil(self.stride);
        let hi_excl = if len + self.padding > k {
            ((len + self.padding - k - 1) / self.stride + 1).min(out_len)
        } else {
            0
        };
        (lo, hi_excl.max(lo))
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Tensor {
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        debug_assert_eq!(c, self.in_channels);
        let (ho, wo) = self.output_hw(h, w).expect("spatial size checked at build");
        let k = self.kernel;
        let mut out = vec![0.0; n * self.n_filters * ho * wo];
        let xd = x.data();
        for b in 0..n {
            for f in 0..self.n_filters {
                let plane = &mut out[(b * self.n_filters + f) * ho * wo..][..ho * wo];
                plane.fill(self.bias[f]);
                for ch in 0..c {
                    let src = &xd[(b * c + ch) * h * w..][..h * w];
                    for ki in 0..k {
                        let (oy0, oy1) = self.valid_range(ki, h, ho);
                        for kj in 0..k {
                            let wt = self.filters[((f * c + ch) * k + ki) * k + kj];
                            if wt == 0.0 {
                                continue;
                            }
                            let (ox0, ox1) = self.valid_range(kj, w, wo);
                            for oy in oy0..oy1 {
                                let iy = oy * self.stride + ki - self.padding;
                                let row = &src[iy * w..];
                                let dst = &mut plane[oy * wo..];
                                for ox in ox0..ox1 {
                                    dst[ox] += wt * row[ox * self.stride + kj - self.padding];
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::from_parts(vec![n, self.n_filters, ho, wo], out)
    }

    pub(crate) fn backward(&self, x: &Tensor, grad: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
        let (ho, wo) = (grad.shape()[2], grad.shape()[3]);
        let k = self.kernel;
        let mut gw = vec![0.0; self.filters.len()];
        let mut gb = vec![0.0; self.n_filters];
        let mut gx = vec![0.0; x.len()];
        let xd = x.data();
        for b in 0..n {
            for f in 0..self.n_filters {
                let gplane = &grad.data()[(b * self.n_filters + f) * ho * wo..][..ho * wo];
                gb[f] += gplane.iter().sum::<f64>();
                for ch in 0..c {
                    let src = &xd[(b * c + ch) * h * w..][..h * w];
                    let gsrc = &mut gx[(b * c + ch) * h * w..][..h * w];
                    for ki in 0..k {
                        let (oy0, oy1) = self.valid_range(ki, h, ho);
                        for kj in 0..k {
                            let widx = ((f * c + ch) * k + ki) * k + kj;
                            let wt = self.filters[widx];
                            let (ox0, ox1) = self.valid_range(kj, w, wo);
                            let mut acc = 0.0;
                            for oy in oy0..oy1 {
                                let iy = oy * self.stride + ki - self.padding;
                                for ox in ox0..ox1 {
                                    let ix = ox * self.stride + kj - self.padding;
                                    let g = gplane[oy * wo + ox];
                                    acc += g * src[iy * w + ix];
                                    gsrc[iy * w + ix] += g * wt;
                                }
                            }
                            gw[widx] += acc;
                        }
                    }
                }
            }
        }
        (Tensor::from_parts(x.shape().to_vec(), gx), vec![gw, gb])
    }

    pub(crate) fn remove_filters(&mut self, sorted: &[usize]) {
        let len = self.filter_len();
        remove_groups(&mut self.filters, sorted, len);
        remove_groups(&mut self.bias, sorted, 1);
        self.n_filters -= sorted.len();
    }

    pub(crate) fn remove_input_channels(&mut self, sorted: &[usize]) {
        let kk = self.kernel * self.kernel;
        let mut out = Vec::new();
        for filter in self.filters.chunks(self.filter_len()) {
            let mut filter = filter.to_vec();
            remove_groups(&mut filter, sorted, kk);
            out.extend(filter);
        }
        self.filters = out;
        self.in_channels -= sorted.len();
    }

    pub(crate) fn zero_filter(&mut self, f: usize) {
        let len = self.filter_len();
        self.filters[f * len..(f + 1) * len].fill(0.0);
        self.bias[f] = 0.0;
    }
}

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over axis 1 of any `[batch, channels, ...]`
/// tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub(crate) gamma: Vec<f64>,
    pub(crate) beta: Vec<f64>,
    pub(crate) running_mean: Vec<f64>,
    pub(crate) running_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn dims(&self, x: &Tensor) -> (usize, usize, usize) {
        (x.shape()[0], self.channels(), x.shape()[2..].iter().product())
    }

    pub(crate) fn forward_eval(&self, x: &Tensor) -> Tensor {
        let (n, c, sp) = self.dims(x);
        let mut out = x.data().to_vec();
        for b in 0..n {
            for ch in 0..c {
                let scale = self.gamma[ch] / (self.running_var[ch] + BN_EPS).sqrt();
                let shift = self.beta[ch] - scale * self.running_mean[ch];
                for v in &mut out[(b * c + ch) * sp..][..sp] {
                    *v = scale * *v + shift;
                }
            }
        }
        Tensor::from_parts(x.shape().to_vec(), out)
    }

    pub(crate) fn forward_train(&mut self, x: &Tensor) -> (Tensor, BnCache) {
        let (n, c, sp) = self.dims(x);
        let m = (n * sp) as f64;
        let xd = x.data();
        let mut out = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c];
        for ch in 0..c {
            let mut sum = 0.0;
            for b in 0..n {
                sum += xd[(b * c + ch) * sp..][..sp].iter().sum::<f64>();
            }
            let mean = sum / m;
            let mut sq = 0.0;
            for b in 0..n {
                sq += xd[(b * c + ch) * sp..][..sp]
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .sum::<f64>();
            }
            let var = sq / m;
            let istd = 1.0 / (var + BN_EPS).sqrt();
            inv_std[ch] = istd;
            for b in 0..n {
                let base = (b * c + ch) * sp;
                for i in base..base + sp {
                    let h = (xd[i] - mean) * istd;
                    xhat[i] = h;
                    out[i] = self.gamma[ch] * h + self.beta[ch];
                }
            }
            let unbiased = if m > 1.0 { var * m / (m - 1.0) } else { var };
            self.running_mean[ch] = (1.0 - BN_MOMENTUM) * self.running_mean[ch] + BN_MOMENTUM * mean;
            self.running_var[ch] = (1.0 - BN_MOMENTUM) * self.running_var[ch] + BN_MOMENTUM * unbiased;
        }
        (
            Tensor::from_parts(x.shape().to_vec(), out),
            BnCache { xhat, inv_std },
        )
    }

    pub(crate) fn backward(&self, cache: &BnCache, grad: &Tensor) -> (Tensor, Vec<Vec<f64>>) {
        let (n, c, sp) = self.dims(grad);
        let m = (n * sp) as f64;
        let gd = grad.data();
        let mut gx = vec![0.0; grad.len()];
        let mut ggamma = vec![0.0; c];
        let mut gbeta = vec![0.0; c];
        for ch in 0..c {
            let (mut sum_g, mut sum_gx) = (0.0, 0.0);
            for b in 0..n {
                let base = (b * c + ch) * sp;
                for i in base..base + sp {
                    sum_g += gd[i];
                    sum_gx += gd[i] * cache.xhat[i];
                }
            }
            ggamma[ch] = sum_gx;
            gbeta[ch] = sum_g;
            let k = self.gamma[ch] * cache.inv_std[ch] / m;
            for b in 0..n {
                let base = (b * c + ch) * sp;
                for i in base..base + sp {
                    gx[i] = k * (m * gd[i] - sum_g - cache.xhat[i] * sum_gx);
                }
            }
        }
        (Tensor::from_parts(grad.shape().to_vec(), gx), vec![ggamma, gbeta])
    }

    pub(crate) fn remove_channels(&mut self, sorted: &[usize]) {
        for v in [
            &mut self.gamma,
            &mut self.beta,
            &mut self.running_mean,
            &mut self.running_var,
        ] {
            remove_groups(v, sorted, 1);
        }
    }
}

/// Multiplicative 0/1 gate over axis 1 (channels or units).
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub(crate) keep: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize) -> Self {
        Self {
            keep: vec![true; width],
        }
    }

    pub fn width(&self) -> usize {
        self.keep.len()
    }

    pub fn entries(&self) -> &[bool] {
        &self.keep
    }

    pub fn is_identity(&self) -> bool {
        self.keep.iter().all(|&k| k)
    }

    pub(crate) fn set(&mut self, keep: &[bool]) -> Result<()> {
        if keep.len() != self.keep.len() {
            return Err(Error::MaskLength {
                expected: self.keep.len(),
                got: keep.len(),
            });
        }
        self.keep.copy_from_slice(keep);
        Ok(())
    }

    pub(crate) fn clear(&mut self) {
        self.keep.fill(true);
    }

    /// Zeroes gated channels in place. Used for both activations and their
    /// gradients.
    pub(crate) fn apply(&self, t: &mut Tensor) {
        if self.is_identity() {
            return;
        }
        let c = self.keep.len();
        let sp: usize = t.shape()[2..].iter().product();
        for (i, chunk) in t.data_mut().chunks_mut(sp).enumerate() {
            if !self.keep[i % c] {
                chunk.fill(0.0);
            }
        }
    }

    pub(crate) fn remove(&mut self, sorted: &[usize]) {
        remove_groups(&mut self.keep, sorted, 1);
    }
}

pub(crate) fn relu(x: &Tensor) -> Tensor {
    Tensor::from_parts(
        x.shape().to_vec(),
        x.data().iter().map(|&v| v.max(0.0)).collect(),
    )
}

/// Gradient of ReLU given its output.
pub(crate) fn relu_backward(out: &Tensor, grad: &Tensor) -> Tensor {
    Tensor::from_parts(
        grad.shape().to_vec(),
        out.data()
            .iter()
            .zip(grad.data())
            .map(|(&y, &g)| if y > 0.0 { g } else { 0.0 })
            .collect(),
    )
}

pub(crate) fn global_avg_pool(x: &Tensor) -> Tensor {
    let (n, c) = (x.shape()[0], x.shape()[1]);
    let sp: usize = x.shape()[2..].iter().product();
    let data = x
        .data()
        .chunks(sp)
        .map(|p| p.iter().sum::<f64>() / sp as f64)
        .collect();
    Tensor::from_parts(vec![n, c], data)
}

pub(crate) fn global_avg_pool_backward(in_shape: &[usize], grad: &Tensor) -> Tensor {
    let sp: usize = in_shape[2..].iter().product();
    let mut data = Vec::with_capacity(grad.len() * sp);
    for &g in grad.data() {
        data.extend(std::iter::repeat_n(g / sp as f64, sp));
    }
    Tensor::from_parts(in_shape.to_vec(), data)
}
