//! Central finite differences, the independent oracle every analytic
//! gradient in this crate is verified against.

use alloc::vec::Vec;

use crate::num::Real;

/// Central-difference gradient of `f` at `x`. `x` is restored afterwards.
pub fn central_diff<F: Real>(f: &mut dyn FnMut(&[F]) -> F, x: &mut [F], step: f64) -> Vec<F> {
    let h = F::of(step);
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(x);
        x[i] = orig - h;
        let down = f(x);
        x[i] = orig;
        grad.push((up - down) / two_h);
    }
    grad
}

/// Central-difference directional derivative of `f` at `x` along `dir`.
pub fn directional_diff<F: Real>(
    f: &mut dyn FnMut(&[F]) -> F,
    x: &mut [F],
    dir: &[F],
    step: f64,
) -> F {
    debug_assert_eq!(x.len(), dir.len());
    let h = F::of(step);
    let saved: Vec<F> = x.to_vec();
    for (v, &d) in x.iter_mut().zip(dir) {
        *v += h * d;
    }
    let up = f(x);
    for (v, (&s, &d)) in x.iter_mut().zip(saved.iter().zip(dir)) {
        *v = s - h * d;
    }
    let down = f(x);
    x.copy_from_slice(&saved);
    (up - down) / (h + h)
}

/// Worst relative disagreement: `|a - n| / max(|a|, |n|, floor)`.
pub fn max_rel_error<F: Real>(analytic: &[F], numeric: &[F], floor: f64) -> f64 {
    debug_assert_eq!(analytic.len(), numeric.len());
    let floor = F::of(floor);
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(floor);
        let rel = ((a - n).abs() / denom).to_f64();
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        // f(x) = sum x_i^2, grad = 2x
        let mut x = alloc::vec![1.0f64, -2.0, 0.5];
        let grad = central_diff(&mut |v: &[f64]| v.iter().map(|a| a * a).sum(), &mut x, 1e-6);
        assert!(max_rel_error(&[2.0, -4.0, 1.0], &grad, 1e-9) < 1e-8);
        assert_eq!(x, alloc::vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn directional_matches_full_gradient() {
        let mut x = alloc::vec![0.3f64, 0.7];
        let dir = [2.0f64, -1.0];
        let d = directional_diff(
            &mut |v: &[f64]| v[0] * v[0] + 3.0 * v[1],
            &mut x,
            &dir,
            1e-6,
        );
        // grad = (0.6, 3), dot dir = 1.2 - 3 = -1.8
        assert!((d + 1.8).abs() < 1e-8);
    }
}
