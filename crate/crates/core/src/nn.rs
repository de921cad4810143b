//! Neural-network primitives with explicit forward caches and hand-written
//! backward passes. Everything is deterministic: initialization and dropout
//! draw from caller-provided seeded streams, and all reductions run in fixed
//! index order.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::num::Real;
use crate::tensor::{axpy, dot, Mat, Tensor4};

/// Forward-pass mode. Dropout is active only in `Train`; batch norm uses
/// batch statistics in `Train` and running statistics in `Eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Draw i.i.d. normal values scaled by `std`. Samples are taken in f64 so
/// f32 and f64 instantiations see the same stream.
pub fn fill_normal<F: Real>(rng: &mut ChaCha8Rng, std: f64, out: &mut [F]) {
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = F::of(z * std);
    }
}

pub fn he_std(fan_in: usize) -> f64 {
    num_traits::Float::sqrt(2.0 / fan_in as f64)
}

// ---------------------------------------------------------------------------
// Dense affine layer
// ---------------------------------------------------------------------------

/// Fully connected layer, weights `[out][in]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<F> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct LinearGrads<F> {
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Real> Linear<F> {
    pub fn identity(dim: usize) -> Self {
        let mut w = vec![F::zero(); dim * dim];
        for i in 0..dim {
            w[i * dim + i] = F::one();
        }
        Linear { in_dim: dim, out_dim: dim, w, b: vec![F::zero(); dim] }
    }

    /// Identity plus small Gaussian noise: starts the encoder close to the
    /// base descriptor so utility training converges quickly.
    pub fn near_identity(dim: usize, noise_std: f64, rng: &mut ChaCha8Rng) -> Self {
        let mut layer = Self::identity(dim);
        let mut noise = vec![F::zero(); dim * dim];
        fill_normal(rng, noise_std, &mut noise);
        for (w, n) in layer.w.iter_mut().zip(&noise) {
            *w += *n;
        }
        layer
    }

    pub fn zero_grads(&self) -> LinearGrads<F> {
        LinearGrads { w: vec![F::zero(); self.w.len()], b: vec![F::zero(); self.b.len()] }
    }

    /// `y[r] = W x[r] + b` for every row of the batch.
    pub fn forward(&self, x: &Mat<F>) -> Mat<F> {
        debug_assert_eq!(x.cols, self.in_dim);
        let mut y = Mat::zeros(x.rows, self.out_dim);
        for r in 0..x.rows {
            let xr = x.row(r);
            let yr = y.row_mut(r);
            for (o, yo) in yr.iter_mut().enumerate() {
                *yo = self.b[o] + dot(&self.w[o * self.in_dim..(o + 1) * self.in_dim], xr);
            }
        }
        y
    }

    /// Accumulates into `grads`, returns gradient w.r.t. the input batch.
    pub fn backward(&self, x: &Mat<F>, dy: &Mat<F>, grads: &mut LinearGrads<F>) -> Mat<F> {
        debug_assert_eq!(dy.cols, self.out_dim);
        let mut dx = Mat::zeros(x.rows, self.in_dim);
        for r in 0..x.rows {
            let xr = x.row(r);
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (o, &g) in dyr.iter().enumerate() {
                grads.b[o] += g;
                let wrow = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
                let gwrow = &mut grads.w[o * self.in_dim..(o + 1) * self.in_dim];
                axpy(gwrow, xr, g);
                axpy(dxr, wrow, g);
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

pub fn relu<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect()
}

/// Gradient uses the activation output: passes where the unit was active.
pub fn relu_backward<F: Real>(y: &[F], dy: &[F], dx: &mut [F]) {
    for ((&yo, &g), d) in y.iter().zip(dy).zip(dx.iter_mut()) {
        *d = if yo > F::zero() { g } else { F::zero() };
    }
}

pub fn sigmoid<F: Real>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| F::one() / (F::one() + (-v).exp())).collect()
}

pub fn sigmoid_backward<F: Real>(y: &[F], dy: &[F], dx: &mut [F]) {
    for ((&yo, &g), d) in y.iter().zip(dy).zip(dx.iter_mut()) {
        *d = g * yo * (F::one() - yo);
    }
}

/// Inverted-dropout multipliers: `0` with probability `rate`, else
/// `1/(1-rate)`, so evaluation needs no rescaling.
pub fn dropout_mask<F: Real>(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<F> {
    let keep = F::of(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| {
            let u: f64 = rng.gen();
            if u < rate {
                F::zero()
            } else {
                keep
            }
        })
        .collect()
}

pub fn apply_mask<F: Real>(x: &[F], mask: &[F]) -> Vec<F> {
    x.iter().zip(mask).map(|(&v, &m)| v * m).collect()
}

// ---------------------------------------------------------------------------
// Row-wise L2 normalization
// ---------------------------------------------------------------------------

/// Normalize each row to unit length. Rows with near-zero energy become the
/// uniform unit vector (with zero gradient).
pub fn l2norm_rows<F: Real>(x: &Mat<F>) -> (Mat<F>, Vec<F>) {
    let mut y = Mat::zeros(x.rows, x.cols);
    let mut norms = Vec::with_capacity(x.rows);
    let tiny = F::of(1e-8);
    let uniform = F::one() / F::of(x.cols as f64).sqrt();
    for r in 0..x.rows {
        let xr = x.row(r);
        let norm = crate::tensor::l2_norm(xr);
        norms.push(norm);
        let yr = y.row_mut(r);
        if norm < tiny {
            yr.iter_mut().for_each(|v| *v = uniform);
        } else {
            for (o, &v) in yr.iter_mut().zip(xr) {
                *o = v / norm;
            }
        }
    }
    (y, norms)
}

/// Backward of row normalization: `dx = (dy - y (y . dy)) / ||x||`.
pub fn l2norm_rows_backward<F: Real>(y: &Mat<F>, norms: &[F], dy: &Mat<F>) -> Mat<F> {
    let tiny = F::of(1e-8);
    let mut dx = Mat::zeros(y.rows, y.cols);
    for r in 0..y.rows {
        if norms[r] < tiny {
            continue; // flat fallback region
        }
        let yr = y.row(r);
        let dyr = dy.row(r);
        let proj = dot(yr, dyr);
        let dxr = dx.row_mut(r);
        for ((&yv, &gv), d) in yr.iter().zip(dyr).zip(dxr.iter_mut()) {
            *d = (gv - yv * proj) / norms[r];
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// 2-D convolution, weights `[out_ch][in_ch][k][k]`, zero padding `k/2`.
/// Supports the shapes used by the nets: k in {1,3}, stride in {1,2}.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<F> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub ksize: usize,
    pub stride: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<F> {
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Real> Conv2d<F> {
    pub fn new(in_ch: usize, out_ch: usize, ksize: usize, stride: usize, rng: &mut ChaCha8Rng) -> Self {
        debug_assert!(matches!(ksize, 1 | 3));
        debug_assert!(matches!(stride, 1 | 2));
        let mut w = vec![F::zero(); out_ch * in_ch * ksize * ksize];
        fill_normal(rng, he_std(in_ch * ksize * ksize), &mut w);
        Conv2d { in_ch, out_ch, ksize, stride, w, b: vec![F::zero(); out_ch] }
    }

    pub fn zero_grads(&self) -> ConvGrads<F> {
        ConvGrads { w: vec![F::zero(); self.w.len()], b: vec![F::zero(); self.b.len()] }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        match self.stride {
            1 => (h, w),
            _ => (h.div_ceil(2), w.div_ceil(2)),
        }
    }

    #[inline]
    fn wk(&self, co: usize, ci: usize, ky: usize, kx: usize) -> F {
        self.w[((co * self.in_ch + ci) * self.ksize + ky) * self.ksize + kx]
    }

    pub fn forward(&self, x: &Tensor4<F>) -> Tensor4<F> {
        debug_assert_eq!(x.c, self.in_ch);
        let (oh, ow) = self.out_hw(x.h, x.w);
        let mut y = Tensor4::zeros(x.n, self.out_ch, oh, ow);
        for n in 0..x.n {
            for co in 0..self.out_ch {
                let bias = self.b[co];
                y.plane_mut(n, co).iter_mut().for_each(|v| *v = bias);
            }
            match (self.ksize, self.stride) {
                (3, 1) => self.fwd_k3s1(x, &mut y, n),
                (1, 1) => self.fwd_k1s1(x, &mut y, n),
                _ => self.fwd_general(x, &mut y, n),
            }
        }
        y
    }

    fn fwd_k3s1(&self, x: &Tensor4<F>, y: &mut Tensor4<F>, n: usize) {
        let (h, w) = (x.h, x.w);
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                let yp = y.plane_mut(n, co);
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let wv = self.wk(co, ci, ky, kx);
                        if wv == F::zero() {
                            continue;
                        }
                        // output row oy reads input row iy = oy + ky - 1
                        let (oy0, oy1) = row_range(h, ky);
                        let (ox0, ox1) = row_range(w, kx);
                        for oy in oy0..oy1 {
                            let iy = oy + ky - 1;
                            let dst = &mut yp[oy * w + ox0..oy * w + ox1];
                            let src0 = iy * w + ox0 + kx - 1;
                            axpy(dst, &xp[src0..src0 + (ox1 - ox0)], wv);
                        }
                    }
                }
            }
        }
    }

    fn fwd_k1s1(&self, x: &Tensor4<F>, y: &mut Tensor4<F>, n: usize) {
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                let wv = self.wk(co, ci, 0, 0);
                let xp = x.plane(n, ci);
                let yp = y.plane_mut(n, co);
                axpy(yp, xp, wv);
            }
        }
    }

    fn fwd_general(&self, x: &Tensor4<F>, y: &mut Tensor4<F>, n: usize) {
        let pad = self.ksize / 2;
        let (oh, ow) = self.out_hw(x.h, x.w);
        for co in 0..self.out_ch {
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                let yp = y.plane_mut(n, co);
                for ky in 0..self.ksize {
                    for kx in 0..self.ksize {
                        let wv = self.wk(co, ci, ky, kx);
                        if wv == F::zero() {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * self.stride + ky) as i64 - pad as i64;
                            if iy < 0 || iy >= x.h as i64 {
                                continue;
                            }
                            let ybase = oy * ow;
                            let xbase = iy as usize * x.w;
                            for ox in 0..ow {
                                let ix = (ox * self.stride + kx) as i64 - pad as i64;
                                if ix < 0 || ix >= x.w as i64 {
                                    continue;
                                }
                                yp[ybase + ox] += wv * xp[xbase + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Backward pass: accumulates weight/bias gradients, returns `dx`.
    pub fn backward(&self, x: &Tensor4<F>, dy: &Tensor4<F>, grads: &mut ConvGrads<F>) -> Tensor4<F> {
        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        for n in 0..x.n {
            for co in 0..self.out_ch {
                let dyp = dy.plane(n, co);
                let mut acc = F::zero();
                for &g in dyp {
                    acc += g;
                }
                grads.b[co] += acc;
            }
            match (self.ksize, self.stride) {
                (3, 1) => self.bwd_k3s1(x, dy, &mut dx, grads, n),
                (1, 1) => self.bwd_k1s1(x, dy, &mut dx, grads, n),
                _ => self.bwd_general(x, dy, &mut dx, grads, n),
            }
        }
        dx
    }

    fn bwd_k3s1(
        &self,
        x: &Tensor4<F>,
        dy: &Tensor4<F>,
        dx: &mut Tensor4<F>,
        grads: &mut ConvGrads<F>,
        n: usize,
    ) {
        let (h, w) = (x.h, x.w);
        for co in 0..self.out_ch {
            let dyp = dy.plane(n, co);
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                let dxp = dx.plane_mut(n, ci);
                for ky in 0..3usize {
                    for kx in 0..3usize {
                        let (oy0, oy1) = row_range(h, ky);
                        let (ox0, ox1) = row_range(w, kx);
                        let wv = self.wk(co, ci, ky, kx);
                        let mut gw = F::zero();
                        for oy in oy0..oy1 {
                            let iy = oy + ky - 1;
                            let dyrow = &dyp[oy * w + ox0..oy * w + ox1];
                            let src0 = iy * w + ox0 + kx - 1;
                            gw += dot(dyrow, &xp[src0..src0 + (ox1 - ox0)]);
                            let dst = &mut dxp[src0..src0 + (ox1 - ox0)];
                            axpy(dst, dyrow, wv);
                        }
                        grads.w[((co * self.in_ch + ci) * 3 + ky) * 3 + kx] += gw;
                    }
                }
            }
        }
    }

    fn bwd_k1s1(
        &self,
        x: &Tensor4<F>,
        dy: &Tensor4<F>,
        dx: &mut Tensor4<F>,
        grads: &mut ConvGrads<F>,
        n: usize,
    ) {
        for co in 0..self.out_ch {
            let dyp = dy.plane(n, co);
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                grads.w[co * self.in_ch + ci] += dot(dyp, xp);
                let wv = self.wk(co, ci, 0, 0);
                axpy(dx.plane_mut(n, ci), dyp, wv);
            }
        }
    }

    fn bwd_general(
        &self,
        x: &Tensor4<F>,
        dy: &Tensor4<F>,
        dx: &mut Tensor4<F>,
        grads: &mut ConvGrads<F>,
        n: usize,
    ) {
        let pad = self.ksize / 2;
        let (oh, ow) = self.out_hw(x.h, x.w);
        for co in 0..self.out_ch {
            let dyp = dy.plane(n, co);
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                let dxp = dx.plane_mut(n, ci);
                for ky in 0..self.ksize {
                    for kx in 0..self.ksize {
                        let wv = self.wk(co, ci, ky, kx);
                        let mut gw = F::zero();
                        for oy in 0..oh {
                            let iy = (oy * self.stride + ky) as i64 - pad as i64;
                            if iy < 0 || iy >= x.h as i64 {
                                continue;
                            }
                            let ybase = oy * ow;
                            let xbase = iy as usize * x.w;
                            for ox in 0..ow {
                                let ix = (ox * self.stride + kx) as i64 - pad as i64;
                                if ix < 0 || ix >= x.w as i64 {
                                    continue;
                                }
                                let g = dyp[ybase + ox];
                                gw += g * xp[xbase + ix as usize];
                                dxp[xbase + ix as usize] += wv * g;
                            }
                        }
                        grads.w[((co * self.in_ch + ci) * self.ksize + ky) * self.ksize + kx] += gw;
                    }
                }
            }
        }
    }
}

/// Valid output range such that `input row = output row + k_off - pad` stays
/// in bounds, for k=3 and pad=1.
#[inline]
fn row_range(extent: usize, k_off: usize) -> (usize, usize) {
    match k_off {
        0 => (1, extent),
        1 => (0, extent),
        _ => (0, extent - 1),
    }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d<F> {
    pub ch: usize,
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
    pub running_mean: Vec<F>,
    pub running_var: Vec<F>,
    pub momentum: F,
    pub eps: F,
}

#[derive(Debug, Clone)]
pub struct BnGrads<F> {
    pub gamma: Vec<F>,
    pub beta: Vec<F>,
}

#[derive(Debug, Clone)]
pub struct BnCache<F> {
    pub xhat: Tensor4<F>,
    pub inv_std: Vec<F>,
}

impl<F: Real> BatchNorm2d<F> {
    pub fn new(ch: usize) -> Self {
        BatchNorm2d {
            ch,
            gamma: vec![F::one(); ch],
            beta: vec![F::zero(); ch],
            running_mean: vec![F::zero(); ch],
            running_var: vec![F::one(); ch],
            momentum: F::of(0.1),
            eps: F::of(1e-5),
        }
    }

    pub fn zero_grads(&self) -> BnGrads<F> {
        BnGrads { gamma: vec![F::zero(); self.ch], beta: vec![F::zero(); self.ch] }
    }

    /// Training forward: normalize by batch statistics (biased variance) and
    /// update running statistics in place.
    pub fn forward_train(&mut self, x: &Tensor4<F>) -> (Tensor4<F>, BnCache<F>) {
        debug_assert_eq!(x.c, self.ch);
        let count = F::of((x.n * x.h * x.w) as f64);
        let mut y = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let mut xhat = Tensor4::zeros(x.n, x.c, x.h, x.w);
        let mut inv_std = vec![F::zero(); self.ch];
        for c in 0..self.ch {
            let mut mean = F::zero();
            for n in 0..x.n {
                for &v in x.plane(n, c) {
                    mean += v;
                }
            }
            mean /= count;
            let mut var = F::zero();
            for n in 0..x.n {
                for &v in x.plane(n, c) {
                    let d = v - mean;
                    var += d * d;
                }
            }
            var /= count;
            let istd = F::one() / (var + self.eps).sqrt();
            inv_std[c] = istd;
            let (g, b) = (self.gamma[c], self.beta[c]);
            for n in 0..x.n {
                let xp = x.plane(n, c);
                let hp = xhat.plane_mut(n, c);
                for (h, &v) in hp.iter_mut().zip(xp) {
                    *h = (v - mean) * istd;
                }
            }
            let sz = x.h * x.w;
            for n in 0..x.n {
                let off = (n * x.c + c) * sz;
                for i in off..off + sz {
                    y.data[i] = g * xhat.data[i] + b;
                }
            }
            let m = self.momentum;
            self.running_mean[c] = (F::one() - m) * self.running_mean[c] + m * mean;
            self.running_var[c] = (F::one() - m) * self.running_var[c] + m * var;
        }
        (y, BnCache { xhat, inv_std })
    }

    pub fn forward_eval(&self, x: &Tensor4<F>) -> Tensor4<F> {
        let mut y = Tensor4::zeros(x.n, x.c, x.h, x.w);
        for c in 0..self.ch {
            let istd = F::one() / (self.running_var[c] + self.eps).sqrt();
            let (g, b, mean) = (self.gamma[c], self.beta[c], self.running_mean[c]);
            for n in 0..x.n {
                let xp = x.plane(n, c);
                let yp = y.plane_mut(n, c);
                for (o, &v) in yp.iter_mut().zip(xp) {
                    *o = g * (v - mean) * istd + b;
                }
            }
        }
        y
    }

    pub fn backward(&self, cache: &BnCache<F>, dy: &Tensor4<F>, grads: &mut BnGrads<F>) -> Tensor4<F> {
        let count = F::of((dy.n * dy.h * dy.w) as f64);
        let mut dx = Tensor4::zeros(dy.n, dy.c, dy.h, dy.w);
        for c in 0..self.ch {
            let mut sum_dy = F::zero();
            let mut sum_dy_xhat = F::zero();
            for n in 0..dy.n {
                let dyp = dy.plane(n, c);
                let hp = cache.xhat.plane(n, c);
                for (&g, &h) in dyp.iter().zip(hp) {
                    sum_dy += g;
                    sum_dy_xhat += g * h;
                }
            }
            grads.beta[c] += sum_dy;
            grads.gamma[c] += sum_dy_xhat;
            let scale = self.gamma[c] * cache.inv_std[c];
            let mean_dy = sum_dy / count;
            let mean_dy_xhat = sum_dy_xhat / count;
            let sz = dy.h * dy.w;
            for n in 0..dy.n {
                let off = (n * dy.c + c) * sz;
                for i in off..off + sz {
                    let h = cache.xhat.data[i];
                    dx.data[i] = scale * (dy.data[i] - mean_dy - h * mean_dy_xhat);
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// 2x2 max pooling
// ---------------------------------------------------------------------------

pub struct PoolCache {
    pub argmax: Vec<u32>,
    pub in_h: usize,
    pub in_w: usize,
}

pub fn maxpool2<F: Real>(x: &Tensor4<F>) -> (Tensor4<F>, PoolCache) {
    debug_assert!(x.h % 2 == 0 && x.w % 2 == 0);
    let (oh, ow) = (x.h / 2, x.w / 2);
    let mut y = Tensor4::zeros(x.n, x.c, oh, ow);
    let mut argmax = vec![0u32; x.n * x.c * oh * ow];
    let mut oi = 0usize;
    for n in 0..x.n {
        for c in 0..x.c {
            let xp = x.plane(n, c);
            let yp = y.plane_mut(n, c);
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = (2 * oy) * x.w + 2 * ox;
                    let cands = [base, base + 1, base + x.w, base + x.w + 1];
                    let mut best = cands[0];
                    let mut bv = xp[best];
                    for &i in &cands[1..] {
                        if xp[i] > bv {
                            bv = xp[i];
                            best = i;
                        }
                    }
                    yp[oy * ow + ox] = bv;
                    argmax[oi] = best as u32;
                    oi += 1;
                }
            }
        }
    }
    (y, PoolCache { argmax, in_h: x.h, in_w: x.w })
}

pub fn maxpool2_backward<F: Real>(cache: &PoolCache, dy: &Tensor4<F>) -> Tensor4<F> {
    let mut dx = Tensor4::zeros(dy.n, dy.c, cache.in_h, cache.in_w);
    let mut oi = 0usize;
    for n in 0..dy.n {
        for c in 0..dy.c {
            let dyp = dy.plane(n, c);
            let dxp = dx.plane_mut(n, c);
            for &g in dyp {
                dxp[cache.argmax[oi] as usize] += g;
                oi += 1;
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// 2x2 stride-2 transposed convolution
// ---------------------------------------------------------------------------

/// Transposed convolution doubling resolution, weights `[in_ch][out_ch][2][2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTranspose2x2<F> {
    pub in_ch: usize,
    pub out_ch: usize,
    pub w: Vec<F>,
    pub b: Vec<F>,
}

impl<F: Real> ConvTranspose2x2<F> {
    pub fn new(in_ch: usize, out_ch: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut w = vec![F::zero(); in_ch * out_ch * 4];
        fill_normal(rng, he_std(in_ch), &mut w);
        ConvTranspose2x2 { in_ch, out_ch, w, b: vec![F::zero(); out_ch] }
    }

    pub fn zero_grads(&self) -> ConvGrads<F> {
        ConvGrads { w: vec![F::zero(); self.w.len()], b: vec![F::zero(); self.b.len()] }
    }

    #[inline]
    fn wk(&self, ci: usize, co: usize, ky: usize, kx: usize) -> F {
        self.w[((ci * self.out_ch + co) * 2 + ky) * 2 + kx]
    }

    pub fn forward(&self, x: &Tensor4<F>) -> Tensor4<F> {
        let (oh, ow) = (x.h * 2, x.w * 2);
        let mut y = Tensor4::zeros(x.n, self.out_ch, oh, ow);
        for n in 0..x.n {
            for co in 0..self.out_ch {
                let bias = self.b[co];
                y.plane_mut(n, co).iter_mut().for_each(|v| *v = bias);
            }
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                for co in 0..self.out_ch {
                    let yp = y.plane_mut(n, co);
                    for ky in 0..2usize {
                        for kx in 0..2usize {
                            let wv = self.wk(ci, co, ky, kx);
                            for iy in 0..x.h {
                                let orow = (2 * iy + ky) * ow + kx;
                                let xrow = iy * x.w;
                                for ix in 0..x.w {
                                    yp[orow + 2 * ix] += wv * xp[xrow + ix];
                                }
                            }
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&self, x: &Tensor4<F>, dy: &Tensor4<F>, grads: &mut ConvGrads<F>) -> Tensor4<F> {
        let ow = dy.w;
        let mut dx = Tensor4::zeros(x.n, x.c, x.h, x.w);
        for n in 0..x.n {
            for co in 0..self.out_ch {
                let dyp = dy.plane(n, co);
                let mut acc = F::zero();
                for &g in dyp {
                    acc += g;
                }
                grads.b[co] += acc;
            }
            for ci in 0..self.in_ch {
                let xp = x.plane(n, ci);
                let dxp = dx.plane_mut(n, ci);
                for co in 0..self.out_ch {
                    let dyp = dy.plane(n, co);
                    for ky in 0..2usize {
                        for kx in 0..2usize {
                            let wv = self.wk(ci, co, ky, kx);
                            let mut gw = F::zero();
                            for iy in 0..x.h {
                                let orow = (2 * iy + ky) * ow + kx;
                                let xrow = iy * x.w;
                                for ix in 0..x.w {
                                    let g = dyp[orow + 2 * ix];
                                    gw += g * xp[xrow + ix];
                                    dxp[xrow + ix] += wv * g;
                                }
                            }
                            grads.w[((ci * self.out_ch + co) * 2 + ky) * 2 + kx] += gw;
                        }
                    }
                }
            }
        }
        dx
    }
}

// ---------------------------------------------------------------------------
// Factor-2 bilinear upsampling (fixed, parameter-free)
// ---------------------------------------------------------------------------

/// Per-output-index source pair and weights for one axis.
fn bilinear_axis(out_len: usize) -> Vec<(usize, usize, f64, f64)> {
    let in_len = out_len / 2;
    (0..out_len)
        .map(|i| {
            let src = (i as f64 + 0.5) / 2.0 - 0.5;
            let clamped = src.clamp(0.0, in_len as f64 - 1.0);
            let i0 = num_traits::Float::floor(clamped) as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            let f = clamped - i0 as f64;
            (i0, i1, 1.0 - f, f)
        })
        .collect()
}

pub fn bilinear_up2<F: Real>(x: &Tensor4<F>) -> Tensor4<F> {
    let (oh, ow) = (x.h * 2, x.w * 2);
    let ys = bilinear_axis(oh);
    let xs = bilinear_axis(ow);
    let mut y = Tensor4::zeros(x.n, x.c, oh, ow);
    for n in 0..x.n {
        for c in 0..x.c {
            let xp = x.plane(n, c);
            let yp = y.plane_mut(n, c);
            for (oy, &(y0, y1, wy0, wy1)) in ys.iter().enumerate() {
                let r0 = y0 * x.w;
                let r1 = y1 * x.w;
                for (ox, &(x0, x1, wx0, wx1)) in xs.iter().enumerate() {
                    let v = F::of(wy0 * wx0) * xp[r0 + x0]
                        + F::of(wy0 * wx1) * xp[r0 + x1]
                        + F::of(wy1 * wx0) * xp[r1 + x0]
                        + F::of(wy1 * wx1) * xp[r1 + x1];
                    yp[oy * ow + ox] = v;
                }
            }
        }
    }
    y
}

pub fn bilinear_up2_backward<F: Real>(dy: &Tensor4<F>, in_h: usize, in_w: usize) -> Tensor4<F> {
    let ys = bilinear_axis(dy.h);
    let xs = bilinear_axis(dy.w);
    let mut dx = Tensor4::zeros(dy.n, dy.c, in_h, in_w);
    for n in 0..dy.n {
        for c in 0..dy.c {
            let dyp = dy.plane(n, c);
            let dxp = dx.plane_mut(n, c);
            for (oy, &(y0, y1, wy0, wy1)) in ys.iter().enumerate() {
                for (ox, &(x0, x1, wx0, wx1)) in xs.iter().enumerate() {
                    let g = dyp[oy * dy.w + ox];
                    dxp[y0 * in_w + x0] += F::of(wy0 * wx0) * g;
                    dxp[y0 * in_w + x1] += F::of(wy0 * wx1) * g;
                    dxp[y1 * in_w + x0] += F::of(wy1 * wx0) * g;
                    dxp[y1 * in_w + x1] += F::of(wy1 * wx1) * g;
                }
            }
        }
    }
    dx
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_diff, max_rel_error};
    use crate::rng::seed_rng;

    fn rng(label: u64) -> ChaCha8Rng {
        seed_rng(42).derive(&[label])
    }

    fn rand_tensor(n: usize, c: usize, h: usize, w: usize, label: u64) -> Tensor4<f64> {
        let mut t = Tensor4::zeros(n, c, h, w);
        fill_normal(&mut rng(label), 1.0, &mut t.data);
        t
    }

    /// Probe loss: weighted sum of the output, fixed random coefficients.
    fn probe(y: &[f64], coeffs: &[f64]) -> f64 {
        dot(y, coeffs)
    }

    #[test]
    fn linear_identity_is_identity() {
        let layer = Linear::<f64>::identity(4);
        let x = Mat::from_rows(&[&[0.1, -0.2, 0.3, 0.4]]);
        assert_eq!(layer.forward(&x).data, x.data);
    }

    #[test]
    fn linear_gradients_match_fd() {
        let mut layer = Linear::<f64>::near_identity(5, 0.2, &mut rng(1));
        let x = {
            let mut m = Mat::zeros(3, 5);
            fill_normal(&mut rng(2), 1.0, &mut m.data);
            m
        };
        let mut coeffs = vec![0.0; 3 * 5];
        fill_normal(&mut rng(3), 1.0, &mut coeffs);

        let y = layer.forward(&x);
        assert_eq!(y.data.len(), coeffs.len());
        let mut grads = layer.zero_grads();
        let dy = Mat { rows: 3, cols: 5, data: coeffs.clone() };
        let dx = layer.backward(&x, &dy, &mut grads);

        let mut w = layer.w.clone();
        let fd_w = central_diff(
            &mut |wv: &[f64]| {
                let mut l2 = layer.clone();
                l2.w.copy_from_slice(wv);
                probe(&l2.forward(&x).data, &coeffs)
            },
            &mut w,
            1e-6,
        );
        assert!(max_rel_error(&grads.w, &fd_w, 1e-6) < 1e-6);

        let mut xv = x.data.clone();
        let fd_x = central_diff(
            &mut |vals: &[f64]| {
                let xm = Mat { rows: 3, cols: 5, data: vals.to_vec() };
                probe(&layer.forward(&xm).data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd_x, 1e-6) < 1e-6);
    }

    #[test]
    fn conv_k3s1_gradients_match_fd() {
        let conv = Conv2d::<f64>::new(2, 3, 3, 1, &mut rng(4));
        let x = rand_tensor(2, 2, 5, 6, 5);
        let y = conv.forward(&x);
        let mut coeffs = vec![0.0; y.data.len()];
        fill_normal(&mut rng(6), 1.0, &mut coeffs);

        let mut grads = conv.zero_grads();
        let dy = Tensor4 { n: y.n, c: y.c, h: y.h, w: y.w, data: coeffs.clone() };
        let dx = conv.backward(&x, &dy, &mut grads);

        let mut w = conv.w.clone();
        let fd_w = central_diff(
            &mut |wv: &[f64]| {
                let mut c2 = conv.clone();
                c2.w.copy_from_slice(wv);
                probe(&c2.forward(&x).data, &coeffs)
            },
            &mut w,
            1e-6,
        );
        assert!(max_rel_error(&grads.w, &fd_w, 1e-6) < 1e-6);

        let mut xv = x.data.clone();
        let fd_x = central_diff(
            &mut |vals: &[f64]| {
                let xt = Tensor4 { n: x.n, c: x.c, h: x.h, w: x.w, data: vals.to_vec() };
                probe(&conv.forward(&xt).data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd_x, 1e-6) < 1e-6);
    }

    #[test]
    fn conv_strided_and_1x1_gradients_match_fd() {
        for (k, s) in [(3usize, 2usize), (1, 1), (1, 2)] {
            let conv = Conv2d::<f64>::new(3, 2, k, s, &mut rng(7));
            let x = rand_tensor(1, 3, 6, 6, 8);
            let y = conv.forward(&x);
            let mut coeffs = vec![0.0; y.data.len()];
            fill_normal(&mut rng(9), 1.0, &mut coeffs);
            let mut grads = conv.zero_grads();
            let dy = Tensor4 { n: y.n, c: y.c, h: y.h, w: y.w, data: coeffs.clone() };
            let dx = conv.backward(&x, &dy, &mut grads);

            let mut w = conv.w.clone();
            let fd_w = central_diff(
                &mut |wv: &[f64]| {
                    let mut c2 = conv.clone();
                    c2.w.copy_from_slice(wv);
                    probe(&c2.forward(&x).data, &coeffs)
                },
                &mut w,
                1e-6,
            );
            assert!(max_rel_error(&grads.w, &fd_w, 1e-6) < 1e-6, "k={k} s={s}");

            let mut xv = x.data.clone();
            let fd_x = central_diff(
                &mut |vals: &[f64]| {
                    let xt = Tensor4 { n: x.n, c: x.c, h: x.h, w: x.w, data: vals.to_vec() };
                    probe(&conv.forward(&xt).data, &coeffs)
                },
                &mut xv,
                1e-6,
            );
            assert!(max_rel_error(&dx.data, &fd_x, 1e-6) < 1e-6, "k={k} s={s}");
        }
    }

    #[test]
    fn batchnorm_gradients_match_fd() {
        let mut bn = BatchNorm2d::<f64>::new(3);
        fill_normal(&mut rng(10), 0.3, &mut bn.gamma);
        bn.gamma.iter_mut().for_each(|g| *g += 1.0);
        fill_normal(&mut rng(11), 0.3, &mut bn.beta);
        let x = rand_tensor(2, 3, 4, 4, 12);
        let mut coeffs = vec![0.0; x.data.len()];
        fill_normal(&mut rng(13), 1.0, &mut coeffs);

        let (_, cache) = bn.clone().forward_train(&x);
        let dy = Tensor4 { n: 2, c: 3, h: 4, w: 4, data: coeffs.clone() };
        let mut grads = bn.zero_grads();
        let dx = bn.backward(&cache, &dy, &mut grads);

        let mut xv = x.data.clone();
        let fd_x = central_diff(
            &mut |vals: &[f64]| {
                let xt = Tensor4 { n: 2, c: 3, h: 4, w: 4, data: vals.to_vec() };
                let mut bn2 = bn.clone();
                probe(&bn2.forward_train(&xt).0.data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd_x, 1e-6) < 1e-5);

        let mut gv = bn.gamma.clone();
        let fd_g = central_diff(
            &mut |vals: &[f64]| {
                let mut bn2 = bn.clone();
                bn2.gamma.copy_from_slice(vals);
                probe(&bn2.forward_train(&x).0.data, &coeffs)
            },
            &mut gv,
            1e-6,
        );
        assert!(max_rel_error(&grads.gamma, &fd_g, 1e-6) < 1e-5);
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let x = rand_tensor(1, 2, 4, 4, 14);
        let (y, cache) = maxpool2(&x);
        let mut coeffs = vec![0.0; y.data.len()];
        fill_normal(&mut rng(15), 1.0, &mut coeffs);
        let dy = Tensor4 { n: 1, c: 2, h: 2, w: 2, data: coeffs.clone() };
        let dx = maxpool2_backward(&cache, &dy);

        let mut xv = x.data.clone();
        let fd = central_diff(
            &mut |vals: &[f64]| {
                let xt = Tensor4 { n: 1, c: 2, h: 4, w: 4, data: vals.to_vec() };
                probe(&maxpool2(&xt).0.data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd, 1e-6) < 1e-6);
    }

    #[test]
    fn conv_transpose_gradients_match_fd() {
        let up = ConvTranspose2x2::<f64>::new(3, 2, &mut rng(16));
        let x = rand_tensor(2, 3, 3, 4, 17);
        let y = up.forward(&x);
        assert_eq!((y.h, y.w), (6, 8));
        let mut coeffs = vec![0.0; y.data.len()];
        fill_normal(&mut rng(18), 1.0, &mut coeffs);
        let dy = Tensor4 { n: y.n, c: y.c, h: y.h, w: y.w, data: coeffs.clone() };
        let mut grads = up.zero_grads();
        let dx = up.backward(&x, &dy, &mut grads);

        let mut w = up.w.clone();
        let fd_w = central_diff(
            &mut |wv: &[f64]| {
                let mut u2 = up.clone();
                u2.w.copy_from_slice(wv);
                probe(&u2.forward(&x).data, &coeffs)
            },
            &mut w,
            1e-6,
        );
        assert!(max_rel_error(&grads.w, &fd_w, 1e-6) < 1e-6);

        let mut xv = x.data.clone();
        let fd_x = central_diff(
            &mut |vals: &[f64]| {
                let xt = Tensor4 { n: x.n, c: x.c, h: x.h, w: x.w, data: vals.to_vec() };
                probe(&up.forward(&xt).data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd_x, 1e-6) < 1e-6);
    }

    #[test]
    fn bilinear_up_gradient_is_transpose() {
        let x = rand_tensor(1, 2, 3, 5, 19);
        let y = bilinear_up2(&x);
        assert_eq!((y.h, y.w), (6, 10));
        let mut coeffs = vec![0.0; y.data.len()];
        fill_normal(&mut rng(20), 1.0, &mut coeffs);
        let dy = Tensor4 { n: 1, c: 2, h: 6, w: 10, data: coeffs.clone() };
        let dx = bilinear_up2_backward(&dy, 3, 5);

        let mut xv = x.data.clone();
        let fd = central_diff(
            &mut |vals: &[f64]| {
                let xt = Tensor4 { n: 1, c: 2, h: 3, w: 5, data: vals.to_vec() };
                probe(&bilinear_up2(&xt).data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd, 1e-6) < 1e-6);
    }

    #[test]
    fn l2norm_rows_gradient_matches_fd() {
        let mut x = Mat::zeros(3, 6);
        fill_normal(&mut rng(21), 1.0, &mut x.data);
        let mut coeffs = vec![0.0; x.data.len()];
        fill_normal(&mut rng(22), 1.0, &mut coeffs);
        let (y, norms) = l2norm_rows(&x);
        let dy = Mat { rows: 3, cols: 6, data: coeffs.clone() };
        let dx = l2norm_rows_backward(&y, &norms, &dy);

        let mut xv = x.data.clone();
        let fd = central_diff(
            &mut |vals: &[f64]| {
                let xm = Mat { rows: 3, cols: 6, data: vals.to_vec() };
                probe(&l2norm_rows(&xm).0.data, &coeffs)
            },
            &mut xv,
            1e-6,
        );
        assert!(max_rel_error(&dx.data, &fd, 1e-6) < 1e-6);
    }

    #[test]
    fn dropout_mask_is_seeded_and_scaled() {
        let m1: Vec<f64> = dropout_mask(&mut rng(23), 1000, 0.1);
        let m2: Vec<f64> = dropout_mask(&mut rng(23), 1000, 0.1);
        assert_eq!(m1, m2);
        let zeros = m1.iter().filter(|&&v| v == 0.0).count();
        assert!(zeros > 50 && zeros < 200, "unexpected drop count {zeros}");
        let keep = 1.0 / 0.9;
        assert!(m1.iter().all(|&v| v == 0.0 || (v - keep).abs() < 1e-12));
    }
}
