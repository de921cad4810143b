//! Image-plane primitives: grayscale conversion, Harris corner detection,
//! patch extraction, and synthetic homography pairs.
//!
//! Homography pairs substitute for large-scale correspondence supervision at
//! desk scale: every generated pair carries its exact ground-truth 3x3
//! matrix, which the matching metrics reuse for correctness decisions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::types::{ImageSample, Keypoint, Patch};

/// Single-channel image in `[0,1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        GrayImage { width, height, data }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn at_clamped(&self, y: i64, x: i64) -> f32 {
        let yy = y.clamp(0, self.height as i64 - 1) as usize;
        let xx = x.clamp(0, self.width as i64 - 1) as usize;
        self.at(yy, xx)
    }
}

/// ITU-R 601 luma conversion.
pub fn rgb_to_gray(image: &ImageSample) -> GrayImage {
    let mut data = Vec::with_capacity(image.width * image.height);
    for px in image.rgb.chunks_exact(3) {
        data.push(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]);
    }
    GrayImage::new(image.width, image.height, data)
}

/// Harris corner detection: Sobel gradients, Gaussian-windowed structure
/// tensor, response `R = det(M) - k * trace(M)^2`, greedy non-maximum
/// suppression within `nms_radius` (Chebyshev), strongest `max_count` kept,
/// sorted by descending response.
pub fn harris_corners(
    image: &GrayImage,
    max_count: usize,
    k: f64,
    sigma: f64,
    nms_radius: usize,
) -> Vec<Keypoint> {
    let (w, h) = (image.width, image.height);
    let radius = gaussian_radius(sigma);
    // Too small for one full gradient-plus-window neighborhood: no corners.
    if max_count == 0 || w < 2 * radius + 3 || h < 2 * radius + 3 {
        return Vec::new();
    }

    let mut ixx = vec![0.0f64; w * h];
    let mut iyy = vec![0.0f64; w * h];
    let mut ixy = vec![0.0f64; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let (gx, gy) = sobel_at(image, y, x);
            let i = y * w + x;
            ixx[i] = gx * gx;
            iyy[i] = gy * gy;
            ixy[i] = gx * gy;
        }
    }

    let kernel = gaussian_kernel(sigma, radius);
    let sxx = blur_separable(&ixx, w, h, &kernel);
    let syy = blur_separable(&iyy, w, h, &kernel);
    let sxy = blur_separable(&ixy, w, h, &kernel);

    let mut candidates: Vec<(f64, u32, u32)> = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let det = sxx[i] * syy[i] - sxy[i] * sxy[i];
            let trace = sxx[i] + syy[i];
            let r = det - k * trace * trace;
            if r > 0.0 {
                candidates.push((r, y as u32, x as u32));
            }
        }
    }
    candidates.sort_unstable_by(|a, b| {
        b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let rad = nms_radius as i64;
    let mut kept: Vec<Keypoint> = Vec::new();
    for (r, y, x) in candidates {
        let suppressed = kept.iter().any(|kp| {
            (kp.x as i64 - x as i64).abs() <= rad && (kp.y as i64 - y as i64).abs() <= rad
        });
        if !suppressed {
            kept.push(Keypoint { x, y, score: r as f32 });
            if kept.len() == max_count {
                break;
            }
        }
    }
    kept
}

fn sobel_at(image: &GrayImage, y: usize, x: usize) -> (f64, f64) {
    let p = |dy: i64, dx: i64| image.at((y as i64 + dy) as usize, (x as i64 + dx) as usize) as f64;
    let gx = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
    let gy = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    (gx, gy)
}

fn gaussian_radius(sigma: f64) -> usize {
    libm_ceil(3.0 * sigma).max(1.0) as usize
}

fn libm_ceil(v: f64) -> f64 {
    num_traits::Float::ceil(v)
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in -(radius as i64)..=(radius as i64) {
        kernel.push(num_traits::Float::exp(-(i * i) as f64 / denom));
    }
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|v| *v /= sum);
    kernel
}

/// Separable zero-padded blur over an f64 grid.
fn blur_separable(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let radius = kernel.len() / 2;
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sx = x as i64 + ki as i64 - radius as i64;
                if sx >= 0 && (sx as usize) < w {
                    acc += kv * src[y * w + sx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, kv) in kernel.iter().enumerate() {
                let sy = y as i64 + ki as i64 - radius as i64;
                if sy >= 0 && (sy as usize) < h {
                    acc += kv * tmp[sy as usize * w + x];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Axis-aligned crop of `size` x `size` centered at the keypoint, with
/// edge replication where the window leaves the image.
pub fn extract_patch(image: &GrayImage, keypoint: Keypoint, size: usize) -> Patch {
    let half = (size / 2) as i64;
    let y0 = keypoint.y as i64 - half;
    let x0 = keypoint.x as i64 - half;
    let mut data = Vec::with_capacity(size * size);
    for dy in 0..size as i64 {
        for dx in 0..size as i64 {
            data.push(image.at_clamped(y0 + dy, x0 + dx));
        }
    }
    Patch::new(size, data)
}

/// Row-major 3x3 homography with `h[2][2] == 1`.
pub type Homography = [[f64; 3]; 3];

pub const IDENTITY_H: Homography = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn project(h: &Homography, x: f64, y: f64) -> (f64, f64) {
    let xw = h[0][0] * x + h[0][1] * y + h[0][2];
    let yw = h[1][0] * x + h[1][1] * y + h[1][2];
    let d = h[2][0] * x + h[2][1] * y + h[2][2];
    (xw / d, yw / d)
}

pub fn det3(h: &Homography) -> f64 {
    h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1])
        - h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0])
        + h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0])
}

pub fn invert3(h: &Homography) -> Option<Homography> {
    let det = det3(h);
    if det.abs() < 1e-12 {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = match r {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c1, c2) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = h[r1][c1] * h[r2][c2] - h[r1][c2] * h[r2][c1];
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            out[c][r] = sign * minor * inv_det; // adjugate transpose
        }
    }
    Some(out)
}

/// Similarity transform about the image center: rotate by `rot_deg`, scale
/// by `scale`, then translate by `(tx, ty)` pixels.
pub fn homography_from_params(
    width: usize,
    height: usize,
    rot_deg: f64,
    scale: f64,
    tx: f64,
    ty: f64,
) -> Homography {
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let theta = rot_deg * core::f64::consts::PI / 180.0;
    let (sin, cos) = num_traits::Float::sin_cos(theta);
    let a = scale * cos;
    let b = scale * sin;
    // T(cx+tx, cy+ty) * R(theta) * S(scale) * T(-cx, -cy)
    [
        [a, -b, -a * cx + b * cy + cx + tx],
        [b, a, -b * cx - a * cy + cy + ty],
        [0.0, 0.0, 1.0],
    ]
}

/// Inverse-map bilinear warp of an RGB image. Samples outside the source
/// are clamped to the border.
pub fn warp_bilinear(image: &ImageSample, h: &Homography) -> Result<ImageSample, Error> {
    let inv = invert3(h).ok_or(Error::InvalidValue {
        key: String::from("homography"),
        reason: String::from("not invertible"),
    })?;
    let (w, ht) = (image.width, image.height);
    let mut rgb = vec![0.0f32; w * ht * 3];
    for y in 0..ht {
        for x in 0..w {
            let (sx, sy) = project(&inv, x as f64, y as f64);
            let px = sample_bilinear(image, sx, sy);
            let o = (y * w + x) * 3;
            rgb[o..o + 3].copy_from_slice(&px);
        }
    }
    Ok(ImageSample::new(image.id.clone(), w, ht, rgb, Vec::new()))
}

fn sample_bilinear(image: &ImageSample, x: f64, y: f64) -> [f32; 3] {
    let xc = x.clamp(0.0, image.width as f64 - 1.0);
    let yc = y.clamp(0.0, image.height as f64 - 1.0);
    let x0 = num_traits::Float::floor(xc) as usize;
    let y0 = num_traits::Float::floor(yc) as usize;
    let x1 = (x0 + 1).min(image.width - 1);
    let y1 = (y0 + 1).min(image.height - 1);
    let fx = (xc - x0 as f64) as f32;
    let fy = (yc - y0 as f64) as f32;
    let p00 = image.pixel(y0, x0);
    let p01 = image.pixel(y0, x1);
    let p10 = image.pixel(y1, x0);
    let p11 = image.pixel(y1, x1);
    let mut out = [0.0f32; 3];
    for c in 0..3 {
        let top = p00[c] * (1.0 - fx) + p01[c] * fx;
        let bot = p10[c] * (1.0 - fx) + p11[c] * fx;
        out[c] = top * (1.0 - fy) + bot * fy;
    }
    out
}

/// Bounds for synthetic pair generation.
#[derive(Debug, Clone, Copy)]
pub struct WarpBounds {
    pub max_rotation_deg: f64,
    /// Scale drawn uniformly in `[1/max_scale, max_scale]`; must be >= 1.
    pub max_scale: f64,
    pub max_translation_px: f64,
}

impl Default for WarpBounds {
    fn default() -> Self {
        WarpBounds { max_rotation_deg: 15.0, max_scale: 1.15, max_translation_px: 5.0 }
    }
}

/// Draw warp parameters, apply the warp, and return it with its exact
/// ground-truth homography. Degenerate draws are rejected and redrawn.
pub fn synth_pair(
    image: &ImageSample,
    rng: &mut ChaCha8Rng,
    bounds: WarpBounds,
) -> Result<(ImageSample, Homography), Error> {
    debug_assert!(bounds.max_scale >= 1.0);
    loop {
        let rot = draw_uniform(rng, -bounds.max_rotation_deg, bounds.max_rotation_deg);
        let scale = draw_uniform(rng, 1.0 / bounds.max_scale, bounds.max_scale);
        let tx = draw_uniform(rng, -bounds.max_translation_px, bounds.max_translation_px);
        let ty = draw_uniform(rng, -bounds.max_translation_px, bounds.max_translation_px);
        let h = homography_from_params(image.width, image.height, rot, scale, tx, ty);
        if det3(&h).abs() < 1e-8 {
            continue;
        }
        let warped = warp_bilinear(image, &h)?;
        return Ok((warped, h));
    }
}

fn draw_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        return lo;
    }
    rng.gen_range(lo..hi)
}

/// Largest centered crop whose sides are multiples of `unit`.
pub fn center_crop_to_multiple(image: &ImageSample, unit: usize) -> Result<ImageSample, Error> {
    let new_w = (image.width / unit) * unit;
    let new_h = (image.height / unit) * unit;
    if new_w == 0 || new_h == 0 {
        return Err(Error::ShapeMismatch(alloc::format!(
            "image {}x{} smaller than crop unit {unit}",
            image.width,
            image.height
        )));
    }
    let x0 = (image.width - new_w) / 2;
    let y0 = (image.height - new_h) / 2;
    let mut rgb = Vec::with_capacity(new_w * new_h * 3);
    for y in 0..new_h {
        let src = ((y + y0) * image.width + x0) * 3;
        rgb.extend_from_slice(&image.rgb[src..src + new_w * 3]);
    }
    Ok(ImageSample::new(image.id.clone(), new_w, new_h, rgb, Vec::new()))
}
