//! One-dimensional adaptive quadrature.

use num_traits::Float;

use crate::scalar::Real;

/// Adaptive Simpson rule on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson<T: Real>(f: impl Fn(T) -> T, a: T, b: T, tol: T, max_depth: u32) -> T {
    if a == b {
        return T::zero();
    }
    let six = T::lit(6.0);
    let half = T::lit(0.5);
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) * half;
    let fm = f(m);
    let whole = (b - a) / six * (fa + T::lit(4.0) * fm + fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
) -> T {
    let half = T::lit(0.5);
    let four = T::lit(4.0);
    let six = T::lit(6.0);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / six * (fa + four * flm + fm);
    let right = (b - m) / six * (fm + four * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || Float::abs(delta) <= T::lit(15.0) * tol {
        return left + right + delta / T::lit(15.0);
    }
    recurse(f, a, m, fa, flm, fm, left, tol * half, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol * half, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_smooth_functions() {
        let v = adaptive_simpson(|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 40);
        assert!((v - 2.0).abs() < 1e-12);
        let v = adaptive_simpson(|x: f64| (-x * x).exp(), -6.0, 6.0, 1e-13, 40);
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let v = adaptive_simpson(|x: f64| x * x, 1.0, 0.0, 1e-14, 30);
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
    }
}
