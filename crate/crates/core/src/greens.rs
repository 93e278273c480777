//! Lattice Green's functions: the infinite chain, the reflecting interval, and the
//! interval with absorbing (frictional) end sites.
//!
//! All tables are indexed by array position `i = x + N`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_complex::Complex;
use num_traits::{Float, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::chain::{neumann_laplacian, ChainConfig};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::scalar::{cx, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("zeta = {re} + {im}i lies on the branch cut [-1, 1]")]
    BranchCut { re: f64, im: f64 },
    #[error("-lambda = {re} + {im}i lies in the phonon band [{lo}, {hi}]")]
    InBand { re: f64, im: f64, lo: f64, hi: f64 },
    #[error("lambda hits the Neumann eigenvalue of mode j = {mode}")]
    Pole { mode: usize },
    #[error("boundary system is degenerate (|Q_N| = {modulus:e})")]
    DegenerateBoundary { modulus: f64 },
    #[error("harmonic m = {m} is resonant: {m} * omega = {frequency} lies in the band [{lo}, {hi}]")]
    Resonance {
        m: usize,
        frequency: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Tolerance for deciding that `zeta` sits on the cut.
const CUT_TOL: f64 = 1e-14;

/// Exterior inverse of the Joukowski map `J(z) = (z + 1/z) / 2`: the root of
/// `z^2 - 2 zeta z + 1 = 0` with `|z| > 1`.
pub fn joukowski_inverse<T: Real>(zeta: Complex<T>) -> Result<Complex<T>, GreensError> {
    let tol = T::lit(CUT_TOL);
    if Float::abs(zeta.im) <= tol && Float::abs(zeta.re) <= T::one() + tol {
        return Err(GreensError::BranchCut {
            re: zeta.re.as_f64(),
            im: zeta.im.as_f64(),
        });
    }
    let one = Complex::new(T::one(), T::zero());
    // the product of principal roots is a valid (zeta^2 - 1)^(1/2) with no cancellation
    let s = (zeta - one).sqrt() * (zeta + one).sqrt();
    let a = zeta + s;
    let b = zeta - s;
    Ok(if a.norm_sqr() >= b.norm_sqr() { a } else { b })
}

/// `chi(lambda) = (2 + omega0^2 + lambda) / 2`.
pub fn chi<T: Real>(lambda: Complex<T>, omega0: T) -> Complex<T> {
    let two = T::lit(2.0);
    (lambda + Complex::new(two + omega0 * omega0, T::zero())) / two
}

fn band_error<T: Real>(lambda: Complex<T>, omega0: T) -> GreensError {
    GreensError::InBand {
        re: -lambda.re.as_f64(),
        im: -lambda.im.as_f64(),
        lo: (omega0 * omega0).as_f64(),
        hi: (omega0 * omega0 + T::lit(4.0)).as_f64(),
    }
}

/// `Phi_+(chi(lambda))`, mapping the band condition onto the cut condition.
pub fn decay_base<T: Real>(lambda: Complex<T>, omega0: T) -> Result<Complex<T>, GreensError> {
    joukowski_inverse(chi(lambda, omega0)).map_err(|_| band_error(lambda, omega0))
}

/// Infinite-lattice resolvent `(lambda + omega0^2 - Delta)^{-1}(x, 0)`.
///
/// With `zeta = chi(lambda)` and `Phi = Phi_+(zeta)`, the square root
/// `{(lambda + omega0^2)(lambda + omega_u^2)}^{1/2}` equals `2 (Phi - zeta)`.
pub fn infinite_greens<T: Real>(lambda: Complex<T>, omega0: T, x: i64) -> Result<Complex<T>, GreensError> {
    let zeta = chi(lambda, omega0);
    let phi = decay_base(lambda, omega0)?;
    let denom = (phi - zeta) * T::lit(2.0);
    Ok(phi.powi(-(x.unsigned_abs() as i32)) / denom)
}

/// Real-frequency form of [`infinite_greens`] at `lambda = -Omega^2`.
pub fn real_frequency_kernel<T: Real>(big_omega: T, x: i64, omega0: T) -> Result<T, GreensError> {
    let w = Float::abs(big_omega);
    let w2 = w * w;
    let lo = omega0 * omega0;
    let hi = lo + T::lit(4.0);
    if w2 >= lo && w2 <= hi {
        return Err(band_error(cx(-w2, T::zero()), omega0));
    }
    let d = ((lo - w2) * (hi - w2)).sqrt();
    let half = T::lit(0.5);
    let k = x.unsigned_abs() as i32;
    if w2 < lo {
        let xi = T::one() + half * (lo - w2 + d);
        Ok(xi.powi(-k) / d)
    } else {
        let xi = T::one() + half * (lo - w2 - d);
        Ok(-xi.powi(-k) / d)
    }
}

/// `xi_+(Omega)` for `Omega < omega0` and `xi_-(Omega)` for `Omega > omega_u`.
pub fn real_frequency_base<T: Real>(big_omega: T, omega0: T) -> Result<T, GreensError> {
    let w2 = big_omega * big_omega;
    let lo = omega0 * omega0;
    let hi = lo + T::lit(4.0);
    if w2 >= lo && w2 <= hi {
        return Err(band_error(cx(-w2, T::zero()), omega0));
    }
    let d = ((lo - w2) * (hi - w2)).sqrt();
    let half = T::lit(0.5);
    Ok(if w2 < lo {
        T::one() + half * (lo - w2 + d)
    } else {
        T::one() + half * (lo - w2 - d)
    })
}

/// Eigenvalue of `omega0^2 - Delta` (reflecting ends) for mode `j` on `n = 2N+1` sites.
pub fn neumann_eigenvalue<T: Real>(omega0: T, half_width: usize, j: usize) -> T {
    let n = T::from_usize_lossy(2 * half_width + 1);
    let s = (T::PI() * T::from_usize_lossy(j) / (T::lit(2.0) * n)).sin();
    omega0 * omega0 + T::lit(4.0) * s * s
}

/// Normalised eigenvector `psi_j` of the reflecting Laplacian at array index `i`.
pub fn neumann_mode<T: Real>(half_width: usize, j: usize, i: usize) -> T {
    let n = 2 * half_width + 1;
    let nf = T::from_usize_lossy(n);
    if j == 0 {
        return (T::one() / nf).sqrt();
    }
    let arg = T::PI() * T::from_usize_lossy(j) * (T::from_usize_lossy(i) + T::lit(0.5)) / nf;
    (T::lit(2.0) / nf).sqrt() * arg.cos()
}

/// Image sums cease to be efficient once `|Phi|^{2n}` is this close to 1.
const IMAGE_RATE_FLOOR: f64 = 0.02;

/// Reflecting-interval Green's function by the method of images. Returns `None`
/// when the decay per image period is too slow for a short sum.
fn neumann_images_table<T: Real>(
    lambda: Complex<T>,
    omega0: T,
    half_width: usize,
) -> Result<Option<DenseMatrix<Complex<T>>>, GreensError> {
    let zeta = chi(lambda, omega0);
    let phi = decay_base(lambda, omega0)?;
    let n = 2 * half_width + 1;
    let rate = phi.norm().ln() * T::from_usize_lossy(2 * n);
    if rate < T::lit(IMAGE_RATE_FLOOR) {
        return Ok(None);
    }
    let inv = phi.inv();
    let inv_period = inv.powi(2 * n as i32);
    let scale = ((phi - zeta) * T::lit(2.0)).inv();
    let cut = T::lit(1e-16);
    let nn = half_width as i64;
    let ni = n as i64;
    let entry = |x: i64, y: i64| -> Complex<T> {
        // direct images x - y + 2ln and reflected images x + y + (2l+1)n
        let direct = x - y;
        let mirror = x + y + ni;
        let mut sum = inv.powi(direct.unsigned_abs() as i32) + inv.powi(mirror.unsigned_abs() as i32);
        let mut terms = [
            inv.powi((direct + 2 * ni).unsigned_abs() as i32),
            inv.powi((direct - 2 * ni).unsigned_abs() as i32),
            inv.powi((mirror + 2 * ni).unsigned_abs() as i32),
            inv.powi((mirror - 2 * ni).unsigned_abs() as i32),
        ];
        loop {
            let step: Complex<T> = terms.iter().copied().fold(Complex::zero(), |a, b| a + b);
            sum += step;
            let biggest = terms.iter().map(|t| t.norm()).fold(T::zero(), T::max);
            if biggest < cut * sum.norm() || biggest == T::zero() {
                break;
            }
            // every offset moves one more image period away from the interval
            for t in terms.iter_mut() {
                *t *= inv_period;
            }
        }
        sum * scale
    };
    let table = DenseMatrix::from_fn(n, n, |i, j| entry(i as i64 - nn, j as i64 - nn));
    Ok(Some(table))
}

/// Method of images with a dense fallback near the band edge.
pub fn neumann_greens_images<T: Real>(
    lambda: Complex<T>,
    omega0: T,
    half_width: usize,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    match neumann_images_table(lambda, omega0, half_width)? {
        Some(t) => Ok(t),
        None => neumann_greens_dense(lambda, omega0, half_width),
    }
}

/// Spectral sum over the `2N+1` cosine modes.
pub fn neumann_greens_eigen<T: Real>(
    lambda: Complex<T>,
    omega0: T,
    half_width: usize,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    let n = 2 * half_width + 1;
    let scale = T::one() + lambda.norm() + omega0 * omega0 + T::lit(4.0);
    let mut inv_den = Vec::with_capacity(n);
    for j in 0..n {
        let d = lambda + neumann_eigenvalue(omega0, half_width, j);
        if d.norm() <= T::eps() * scale * T::lit(16.0) {
            return Err(GreensError::Pole { mode: j });
        }
        inv_den.push(d.inv());
    }
    let modes: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| neumann_mode(half_width, j, i)).collect())
        .collect();
    Ok(DenseMatrix::from_fn(n, n, |x, y| {
        let mut acc = Complex::zero();
        for j in 0..n {
            acc += inv_den[j] * (modes[j][x] * modes[j][y]);
        }
        acc
    }))
}

/// Matrix of `lambda + omega0^2 - Delta + i sigma (delta_{-N} + delta_N)`.
pub fn chain_operator<T: Real>(lambda: Complex<T>, sigma: T, omega0: T, half_width: usize) -> DenseMatrix<Complex<T>> {
    let n = 2 * half_width + 1;
    let mut a = DenseMatrix::from_fn(n, n, |i, j| {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        Complex::new(-neumann_laplacian(&e)[i], T::zero())
    });
    for i in 0..n {
        a[(i, i)] = a[(i, i)] + lambda + omega0 * omega0;
    }
    a[(0, 0)] += cx(T::zero(), sigma);
    a[(n - 1, n - 1)] += cx(T::zero(), sigma);
    a
}

/// Dense inverse of `lambda + omega0^2 - Delta`.
pub fn neumann_greens_dense<T: Real>(
    lambda: Complex<T>,
    omega0: T,
    half_width: usize,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    Ok(chain_operator(lambda, T::zero(), omega0, half_width).inverse()?)
}

/// Which independent construction of the reflecting-interval kernel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeumannMethod {
    Images,
    Eigen,
    Dense,
}

/// Single entry `G^{(N)}_lambda(x, y)` for sites `x, y` in `-N..=N`.
pub fn neumann_greens<T: Real>(
    lambda: Complex<T>,
    omega0: T,
    half_width: usize,
    x: i64,
    y: i64,
    method: NeumannMethod,
) -> Result<Complex<T>, GreensError> {
    let table = match method {
        NeumannMethod::Images => neumann_greens_images(lambda, omega0, half_width)?,
        NeumannMethod::Eigen => neumann_greens_eigen(lambda, omega0, half_width)?,
        NeumannMethod::Dense => neumann_greens_dense(lambda, omega0, half_width)?,
    };
    let nn = half_width as i64;
    Ok(table[((x + nn) as usize, (y + nn) as usize)])
}

/// Kernel `H = (lambda + omega0^2 - Delta + i sigma (delta_{-N} + delta_N))^{-1}`
/// obtained from the reflecting kernel by solving the 2x2 boundary system.
pub fn dissipative_greens<T: Real>(
    lambda: Complex<T>,
    sigma: T,
    omega0: T,
    half_width: usize,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    let g = match neumann_greens_images(lambda, omega0, half_width) {
        Ok(g) => g,
        // a finite interval has no continuous band; only the image sum needs one
        Err(GreensError::InBand { .. }) => neumann_greens_dense(lambda, omega0, half_width)?,
        Err(e) => return Err(e),
    };
    dissipative_from_neumann(&g, sigma)
}

/// Boundary correction applied to a given reflecting-interval table.
pub fn dissipative_from_neumann<T: Real>(
    g: &DenseMatrix<Complex<T>>,
    sigma: T,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    if sigma == T::zero() {
        return Ok(g.clone());
    }
    let n = g.rows();
    let (lo, hi) = (0, n - 1);
    let is = cx(T::zero(), sigma);
    let one = Complex::new(T::one(), T::zero());
    let a = one + is * g[(hi, hi)];
    let c = g[(lo, hi)];
    let q_n = a * a + c * c * (sigma * sigma);
    let size = a.norm_sqr().max(c.norm_sqr() * sigma * sigma).max(T::one());
    if q_n.norm() < T::lit(1e-13) * size {
        return Err(GreensError::DegenerateBoundary {
            modulus: q_n.norm().as_f64(),
        });
    }
    let inv_q = q_n.inv();
    // H(-N, y) and H(N, y)
    let h_lo: Vec<Complex<T>> = (0..n).map(|y| (a * g[(lo, y)] - is * c * g[(hi, y)]) * inv_q).collect();
    let h_hi: Vec<Complex<T>> = (0..n).map(|y| (a * g[(hi, y)] - is * c * g[(lo, y)]) * inv_q).collect();
    Ok(DenseMatrix::from_fn(n, n, |x, y| {
        g[(x, y)] - is * (g[(x, lo)] * h_lo[y] + g[(x, hi)] * h_hi[y])
    }))
}

/// Dense complex solve of the same operator, used as an oracle.
pub fn dissipative_greens_dense<T: Real>(
    lambda: Complex<T>,
    sigma: T,
    omega0: T,
    half_width: usize,
) -> Result<DenseMatrix<Complex<T>>, GreensError> {
    Ok(chain_operator(lambda, sigma, omega0, half_width).inverse()?)
}

/// Per-harmonic kernels `H_m` for `m = 0..=M`; `H_{-m}` is the complex conjugate.
#[derive(Debug, Clone)]
pub struct GreensKernelSet<T> {
    half_width: usize,
    max_harmonic: usize,
    fingerprint: u64,
    tables: Vec<DenseMatrix<Complex<T>>>,
}

impl<T: Real> GreensKernelSet<T> {
    pub fn half_width(&self) -> usize {
        self.half_width
    }
    pub fn max_harmonic(&self) -> usize {
        self.max_harmonic
    }
    /// Hash of the parameters the kernels depend on.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
    /// Table for harmonic `m >= 0`.
    pub fn table(&self, m: usize) -> &DenseMatrix<Complex<T>> {
        &self.tables[m]
    }
    /// Entry `H_m(x, y)` for any integer `m` with `|m| <= M`, by array index.
    pub fn entry(&self, m: i64, i: usize, j: usize) -> Complex<T> {
        let h = self.tables[m.unsigned_abs() as usize][(i, j)];
        if m >= 0 {
            h
        } else {
            h.conj()
        }
    }
    /// `sum_y H_m(x, y) v_y` for `m >= 0`.
    pub fn apply(&self, m: usize, v: &[Complex<T>]) -> Vec<Complex<T>> {
        self.tables[m].mul_vec(v)
    }

    pub fn matches(&self, cfg: &ChainConfig<T>) -> bool {
        self.fingerprint == kernel_fingerprint(cfg) && self.half_width == cfg.half_width()
    }
}

fn kernel_fingerprint<T: Real>(cfg: &ChainConfig<T>) -> u64 {
    let mut h = DefaultHasher::new();
    cfg.half_width().hash(&mut h);
    cfg.omega0().as_f64().to_bits().hash(&mut h);
    cfg.gamma().as_f64().to_bits().hash(&mut h);
    cfg.theta().as_f64().to_bits().hash(&mut h);
    h.finish()
}

/// Checks that `(m omega)^2` stays off the squared band for `m = 0..=max_harmonic`.
pub fn check_resonance<T: Real>(cfg: &ChainConfig<T>, max_harmonic: usize) -> Result<(), GreensError> {
    let lo = cfg.omega0();
    let hi = cfg.omega_u();
    for m in 0..=max_harmonic {
        let f = T::from_usize_lossy(m) * cfg.omega();
        if f >= lo && f <= hi {
            return Err(GreensError::Resonance {
                m,
                frequency: f.as_f64(),
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
    }
    Ok(())
}

/// Builds `H_m = (-(m omega)^2 + omega0^2 - Delta + i gamma m omega (delta_{-N} + delta_N))^{-1}`.
pub fn build_kernel_set<T: Real>(cfg: &ChainConfig<T>, max_harmonic: usize) -> Result<GreensKernelSet<T>, GreensError> {
    check_resonance(cfg, max_harmonic)?;
    let omega = cfg.omega();
    let tables = (0..=max_harmonic)
        .into_par_iter()
        .map(|m| {
            let f = T::from_usize_lossy(m) * omega;
            dissipative_greens(cx(-f * f, T::zero()), cfg.gamma() * f, cfg.omega0(), cfg.half_width())
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GreensKernelSet {
        half_width: cfg.half_width(),
        max_harmonic,
        fingerprint: kernel_fingerprint(cfg),
        tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ForcingSpectrum;
    use crate::quad::adaptive_simpson;
    use proptest::prelude::*;

    type C = Complex<f64>;

    fn quadrature_greens(lambda: C, omega0: f64, x: i64) -> C {
        let f = |u: f64, part: bool| {
            let d = lambda + 4.0 * (std::f64::consts::PI * u).sin().powi(2) + omega0 * omega0;
            let v = (2.0 * std::f64::consts::PI * u * x as f64).cos() / d;
            if part {
                v.re
            } else {
                v.im
            }
        };
        C::new(
            adaptive_simpson(|u| f(u, true), 0.0, 1.0, 1e-14, 50),
            adaptive_simpson(|u| f(u, false), 0.0, 1.0, 1e-14, 50),
        )
    }

    fn rel_close(a: &DenseMatrix<C>, b: &DenseMatrix<C>, tol: f64) -> bool {
        let scale = b.max_abs();
        a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| (x - y).norm() <= tol * scale)
    }

    #[test]
    fn joukowski_examples() {
        let p = joukowski_inverse(C::new(2.0, 0.0)).unwrap();
        assert!((p.re - (2.0 + 3f64.sqrt())).abs() < 1e-14 && p.im == 0.0);
        let p = joukowski_inverse(C::new(-2.0, 0.0)).unwrap();
        assert!((p.re + 2.0 + 3f64.sqrt()).abs() < 1e-14);
        let z = C::new(0.0, 1.5);
        let p = joukowski_inverse(z).unwrap();
        assert!(p.norm() > 1.0);
        assert!(((p + p.inv()) / 2.0 - z).norm() < 1e-14);
        assert!((p - C::new(0.0, 1.5 + 3.25f64.sqrt())).norm() < 1e-14);
        assert!(joukowski_inverse(C::new(0.3, 0.0)).is_err());
        assert!(joukowski_inverse(C::new(1.0, 1e-15)).is_err());
    }

    #[test]
    fn infinite_greens_examples() {
        let g0 = infinite_greens(C::new(0.0, 0.0), 1.0, 0).unwrap();
        assert!((g0.re - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        let g1 = infinite_greens(C::new(0.0, 0.0), 1.0, 1).unwrap();
        assert!((g1.re - 0.1708203932499369).abs() < 1e-15);
        assert!((g0 - quadrature_greens(C::new(0.0, 0.0), 1.0, 0)).norm() < 1e-12);
        assert!(infinite_greens(C::new(-2.0, 0.0), 1.0, 0).is_err());
    }

    #[test]
    fn real_frequency_matches_complex_form() {
        let d = 32f64.sqrt();
        let g = real_frequency_kernel(3.0, 0, 1.0).unwrap();
        assert!((g + 1.0 / d).abs() < 1e-15);
        assert!((real_frequency_base(3.0, 1.0).unwrap() - (-3.0 - 2.0 * 2f64.sqrt())).abs() < 1e-14);
        for &w in &[0.0, 0.3, 0.99, 2.3, 3.0, 7.5] {
            for x in -4..=4 {
                let a = real_frequency_kernel(w, x, 1.0).unwrap();
                let b = infinite_greens(C::new(-w * w, 0.0), 1.0, x).unwrap();
                assert!((a - b.re).abs() < 1e-13 && b.im.abs() < 1e-13, "w={w} x={x}");
            }
        }
        assert!(real_frequency_kernel(1.5, 0, 1.0).is_err());
        for k in 0..1000 {
            let w = k as f64 * 0.001;
            assert!(real_frequency_base(w, 1.0).unwrap() > 1.0);
            let w = 5f64.sqrt() + 1e-6 + k as f64 * 0.01;
            assert!(real_frequency_base(w, 1.0).unwrap() < -1.0);
        }
    }

    #[test]
    fn neumann_three_ways() {
        let lambda = C::new(0.3, 0.0);
        let a = neumann_greens_images(lambda, 1.0, 2).unwrap();
        let b = neumann_greens_eigen(lambda, 1.0, 2).unwrap();
        let c = neumann_greens_dense(lambda, 1.0, 2).unwrap();
        assert!(rel_close(&a, &c, 1e-12));
        assert!(rel_close(&b, &c, 1e-12));
        let g = neumann_greens(C::new(0.7, 0.2), 1.3, 0, 0, 0, NeumannMethod::Images).unwrap();
        assert!((g - C::new(0.7 + 1.69, 0.2).inv()).norm() < 1e-15);
        assert!(matches!(
            neumann_greens_eigen(C::new(-neumann_eigenvalue(1.0, 3, 2), 0.0), 1.0, 3),
            Err(GreensError::Pole { mode: 2 })
        ));
    }

    #[test]
    fn neumann_modes_diagonalise_laplacian() {
        let n = 3;
        for j in 0..7 {
            let psi: Vec<f64> = (0..7).map(|i| neumann_mode(n, j, i)).collect();
            let lap = neumann_laplacian(&psi);
            let mu = neumann_eigenvalue(1.0, n, j);
            for i in 0..7 {
                assert!((psi[i] - lap[i] - mu * psi[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dissipative_examples() {
        let h = dissipative_greens(C::new(-0.25, 0.0), 0.5, 1.0, 1).unwrap();
        let d = dissipative_greens_dense(C::new(-0.25, 0.0), 0.5, 1.0, 1).unwrap();
        assert!(rel_close(&h, &d, 1e-12));
        let g = neumann_greens_images(C::new(-0.25, 0.0), 1.0, 1).unwrap();
        assert!(rel_close(&dissipative_greens(C::new(-0.25, 0.0), 0.0, 1.0, 1).unwrap(), &g, 0.0));
        let h0 = dissipative_greens(C::new(-4.0, 0.0), 0.7, 1.0, 0).unwrap();
        assert!((h0[(0, 0)] - C::new(-3.0, 1.4).inv()).norm() < 1e-15);
    }

    #[test]
    fn near_band_edge_falls_back_to_dense() {
        let lambda = C::new(-1.0 + 1e-7, 0.0);
        let a = neumann_greens_images(lambda, 1.0, 5).unwrap();
        let c = neumann_greens_dense(lambda, 1.0, 5).unwrap();
        assert!(rel_close(&a, &c, 1e-9));
    }

    fn cfg(omega: f64, n: usize) -> ChainConfig<f64> {
        ChainConfig::builder()
            .half_width(n)
            .pinning_frequency(1.0)
            .damping(0.5)
            .frequency(omega)
            .forcing(ForcingSpectrum::cosine(1.0).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn kernel_set_symmetries() {
        let set = build_kernel_set(&cfg(3.0, 4), 8).unwrap();
        let n = 9;
        for m in 0..=8 {
            let t = set.table(m);
            for i in 0..n {
                for j in 0..n {
                    assert!(t[(i, j)].re.is_finite() && t[(i, j)].im.is_finite());
                    assert!((t[(i, j)] - t[(j, i)]).norm() <= 1e-14 * t.max_abs());
                    assert!((t[(i, j)] - t[(n - 1 - i, n - 1 - j)]).norm() <= 1e-14 * t.max_abs());
                    assert_eq!(set.entry(-(m as i64), i, j), t[(i, j)].conj());
                }
            }
        }
        assert!(set.matches(&cfg(3.0, 4)));
        assert!(!set.matches(&cfg(3.1, 4)));
    }

    #[test]
    fn resonant_harmonic_is_named() {
        match build_kernel_set(&cfg(1.8, 2), 4) {
            Err(GreensError::Resonance { m, .. }) => assert_eq!(m, 1),
            other => panic!("expected resonance, got {other:?}"),
        }
    }

    #[test]
    fn generic_over_f32() {
        let g = infinite_greens(Complex::<f32>::new(0.0, 0.0), 1.0, 0).unwrap();
        assert!((g.re - 1.0 / 5f32.sqrt()).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn branch_is_exterior(re in -5.0f64..5.0, im in -5.0f64..5.0) {
            prop_assume!(im.abs() > 1e-12 || re.abs() > 1.0 + 1e-12);
            let z = C::new(re, im);
            let p = joukowski_inverse(z).unwrap();
            prop_assert!(p.norm() > 1.0);
            prop_assert!(((p + p.inv()) / 2.0 - z).norm() <= 1e-14 * (1.0 + z.norm()));
        }

        #[test]
        fn conjugate_symmetry(re in -6.0f64..3.0, im in -2.0f64..2.0, x in -6i64..6) {
            let lambda = C::new(re, im);
            prop_assume!(joukowski_inverse(chi(lambda, 1.0)).is_ok());
            let a = infinite_greens(lambda.conj(), 1.0, x).unwrap();
            let b = infinite_greens(lambda, 1.0, x).unwrap().conj();
            prop_assert!((a - b).norm() <= 1e-14 * (1.0 + a.norm()));
        }
    }
}
