//! Time-harmonic solvers for the periodic steady state.
//!
//! A periodic orbit is represented by its Fourier coefficients `q_x(m)`, `0 <= m <= M`,
//! with `q_x(-m) = conj(q_x(m))`. Each harmonic satisfies
//!
//! ```text
//! (omega0^2 - Delta - (m omega)^2 + i gamma m omega (delta_{-N} + delta_N)) q(m) = F_m delta_0 + nu v(m)
//! ```
//!
//! where `v(m)` are the harmonics of `-W(q(t))`, evaluated by collocation on a
//! uniform grid of `T` samples per period.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex;
use num_traits::{Float, Zero};
use rand::Rng;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{force_field_into, ChainConfig, ChainState};
use crate::greens::{build_kernel_set, check_resonance, GreensError, GreensKernelSet};
use crate::scalar::{cx, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("collocation grid {grid} is below the anti-aliasing minimum {required}")]
    Grid { grid: usize, required: usize },
    #[error("field shapes differ")]
    Shape,
    #[error(transparent)]
    Greens(#[from] GreensError),
    #[error("kernel set was built for different parameters or too few harmonics")]
    KernelMismatch,
    #[error("|nu| = {nu} is outside both convergence radii (nu0 = {nu0}, odd-mode nu0 = {nu0_odd})")]
    OutsideRadius { nu: f64, nu0: f64, nu0_odd: f64 },
    #[error("{method} did not converge in {iterations} steps (last increment {residual:e})")]
    NonConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("fixed-point iteration diverged after {iterations} steps (increment grew to {increment:e})")]
    Divergence { iterations: usize, increment: f64 },
    #[error("harmonic truncation did not settle below M = {max_harmonic} (top-octave energy fraction {fraction:e})")]
    Truncation { max_harmonic: usize, fraction: f64 },
}

/// Smallest collocation grid admitted for `M` harmonics.
pub fn min_grid(max_harmonic: usize) -> usize {
    8 * (2 * max_harmonic + 1)
}

/// Default collocation grid: next power of two above [`min_grid`].
pub fn default_grid(max_harmonic: usize) -> usize {
    min_grid(max_harmonic).next_power_of_two()
}

/// Fourier coefficients `q_x(m)` for `0 <= m <= M` on `2N+1` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField<T> {
    half_width: usize,
    max_harmonic: usize,
    grid: usize,
    omega: T,
    // data[m * sites + i]
    data: Vec<Complex<T>>,
}

impl<T: Real> HarmonicField<T> {
    pub fn zeros(half_width: usize, max_harmonic: usize, grid: usize, omega: T) -> Result<Self, SpectralError> {
        let required = min_grid(max_harmonic);
        if grid < required {
            return Err(SpectralError::Grid { grid, required });
        }
        let n = 2 * half_width + 1;
        Ok(Self {
            half_width,
            max_harmonic,
            grid,
            omega,
            data: vec![Complex::zero(); n * (max_harmonic + 1)],
        })
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }
    pub fn sites(&self) -> usize {
        2 * self.half_width + 1
    }
    pub fn max_harmonic(&self) -> usize {
        self.max_harmonic
    }
    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn omega(&self) -> T {
        self.omega
    }

    /// `q_i(m)` for any `|m| <= M`, by array index `i`.
    pub fn get(&self, i: usize, m: i64) -> Complex<T> {
        let k = m.unsigned_abs() as usize;
        if k > self.max_harmonic {
            return Complex::zero();
        }
        let v = self.data[k * self.sites() + i];
        if m >= 0 {
            v
        } else {
            v.conj()
        }
    }

    /// Sets `q_i(m)` for `m >= 0`; the zeroth harmonic keeps only its real part.
    pub fn set(&mut self, i: usize, m: usize, v: Complex<T>) {
        let n = self.sites();
        self.data[m * n + i] = if m == 0 { cx(v.re, T::zero()) } else { v };
    }

    /// All sites of harmonic `m >= 0`.
    pub fn harmonic(&self, m: usize) -> &[Complex<T>] {
        let n = self.sites();
        &self.data[m * n..(m + 1) * n]
    }

    fn harmonic_mut(&mut self, m: usize) -> &mut [Complex<T>] {
        let n = self.sites();
        &mut self.data[m * n..(m + 1) * n]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.half_width == other.half_width && self.max_harmonic == other.max_harmonic
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: T, other: &Self) -> Result<Self, SpectralError> {
        if !self.same_shape(other) {
            return Err(SpectralError::Shape);
        }
        let mut out = self.clone();
        for (o, b) in out.data.iter_mut().zip(&other.data) {
            *o += *b * a;
        }
        Ok(out)
    }

    pub fn scaled(&self, a: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// Copy with `M'` harmonics and grid `T'` (zero padded or truncated).
    pub fn resized(&self, max_harmonic: usize, grid: usize) -> Result<Self, SpectralError> {
        let mut out = Self::zeros(self.half_width, max_harmonic, grid, self.omega)?;
        for m in 0..=max_harmonic.min(self.max_harmonic) {
            out.harmonic_mut(m).copy_from_slice(self.harmonic(m));
        }
        Ok(out)
    }

    fn weighted_norm_sqr(&self, weight: impl Fn(usize) -> T) -> T {
        // ascending |m|, then ascending site
        let mut acc = T::zero();
        for m in 0..=self.max_harmonic {
            let s: T = self.harmonic(m).iter().map(|v| v.norm_sqr()).sum();
            let mult = if m == 0 { T::one() } else { T::lit(2.0) };
            acc += mult * weight(m) * s;
        }
        acc
    }

    /// `(sum_{m, x} |q_x(m)|^2)^(1/2)` over all `|m| <= M`; by Parseval this is the
    /// period-mean norm of the synthesized field.
    pub fn l2_norm(&self) -> T {
        self.weighted_norm_sqr(|_| T::one()).sqrt()
    }

    /// Period-mean norm including the first `k` time derivatives.
    pub fn sobolev_norm(&self, k: usize) -> T {
        let omega = self.omega;
        self.weighted_norm_sqr(|m| {
            let w2 = (T::from_usize_lossy(m) * omega).powi(2);
            (0..=k).fold((T::zero(), T::one()), |(s, p), _| (s + p, p * w2)).0
        })
        .sqrt()
    }

    /// Share of the energy carried by harmonics `M/2 < |m| <= M`.
    pub fn top_octave_fraction(&self) -> T {
        let total = self.weighted_norm_sqr(|_| T::one());
        if total == T::zero() {
            return T::zero();
        }
        let half = self.max_harmonic / 2;
        let top = self.weighted_norm_sqr(|m| if m > half { T::one() } else { T::zero() });
        top / total
    }

    /// Zeros every even harmonic, including the mean.
    pub fn project_odd(&mut self) {
        for m in (0..=self.max_harmonic).step_by(2) {
            self.harmonic_mut(m).iter_mut().for_each(|v| *v = Complex::zero());
        }
    }

    /// Position and momentum at time `t` by direct summation.
    pub fn evaluate(&self, t: T) -> (Vec<T>, Vec<T>) {
        let n = self.sites();
        let two = T::lit(2.0);
        let mut q: Vec<T> = self.harmonic(0).iter().map(|v| v.re).collect();
        let mut p = vec![T::zero(); n];
        for m in 1..=self.max_harmonic {
            let mw = T::from_usize_lossy(m) * self.omega;
            let e = Complex::from_polar(T::one(), mw * t);
            for (i, &c) in self.harmonic(m).iter().enumerate() {
                let z = c * e;
                q[i] += two * z.re;
                p[i] -= two * mw * z.im;
            }
        }
        (q, p)
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.data
    }
}

/// Samples on arbitrary times: `(q(t_k), p(t_k))` with `p` by exact spectral differentiation.
pub fn synthesize<T: Real>(field: &HarmonicField<T>, times: &[T]) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    times.iter().map(|&t| field.evaluate(t)).unzip()
}

/// FFT transforms between harmonics and a uniform time grid `t_k = k theta / T`.
#[derive(Clone)]
pub struct Collocation<T: Real> {
    grid: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Collocation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Collocation").field("grid", &self.grid).finish()
    }
}

impl<T: Real> Collocation<T> {
    pub fn new(grid: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
        }
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    fn check(&self, field: &HarmonicField<T>) -> Result<(), SpectralError> {
        let required = min_grid(field.max_harmonic);
        if self.grid < required {
            return Err(SpectralError::Grid {
                grid: self.grid,
                required,
            });
        }
        Ok(())
    }

    /// Per-site time series of `sum_m c_i(m) e^{i m omega t_k}` with `c(-m) = conj c(m)`.
    fn synth_sites(&self, field: &HarmonicField<T>, weight: impl Fn(usize) -> Complex<T> + Sync) -> Vec<Vec<T>> {
        let t = self.grid;
        (0..field.sites())
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![Complex::zero(); t];
                for m in 0..=field.max_harmonic {
                    let c = field.harmonic(m)[i] * weight(m);
                    if m == 0 {
                        buf[0] = c;
                    } else {
                        buf[m] = c;
                        buf[t - m] = c.conj();
                    }
                }
                self.inverse.process(&mut buf);
                buf.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }

    fn transpose(per_site: Vec<Vec<T>>, grid: usize) -> Vec<Vec<T>> {
        (0..grid).map(|k| per_site.iter().map(|s| s[k]).collect()).collect()
    }

    /// Positions on the grid, `samples[k][i]`.
    pub fn synthesize(&self, field: &HarmonicField<T>) -> Result<Vec<Vec<T>>, SpectralError> {
        self.check(field)?;
        let one = Complex::new(T::one(), T::zero());
        Ok(Self::transpose(self.synth_sites(field, |_| one), self.grid))
    }

    /// Momenta on the grid.
    pub fn synthesize_momentum(&self, field: &HarmonicField<T>) -> Result<Vec<Vec<T>>, SpectralError> {
        self.check(field)?;
        let omega = field.omega;
        Ok(Self::transpose(
            self.synth_sites(field, |m| cx(T::zero(), T::from_usize_lossy(m) * omega)),
            self.grid,
        ))
    }

    /// Harmonics `0..=M` of grid samples `samples[k][i]`.
    pub fn analyze(
        &self,
        samples: &[Vec<T>],
        half_width: usize,
        max_harmonic: usize,
        omega: T,
    ) -> Result<HarmonicField<T>, SpectralError> {
        let n = 2 * half_width + 1;
        if samples.len() != self.grid || samples.iter().any(|s| s.len() != n) {
            return Err(SpectralError::Shape);
        }
        let per_site: Vec<Vec<T>> = (0..n).map(|i| samples.iter().map(|s| s[i]).collect()).collect();
        self.analyze_sites(&per_site, half_width, max_harmonic, omega)
    }

    fn analyze_sites(
        &self,
        per_site: &[Vec<T>],
        half_width: usize,
        max_harmonic: usize,
        omega: T,
    ) -> Result<HarmonicField<T>, SpectralError> {
        let mut out = HarmonicField::zeros(half_width, max_harmonic, self.grid, omega)?;
        let inv_t = T::one() / T::from_usize_lossy(self.grid);
        let spectra: Vec<Vec<Complex<T>>> = per_site
            .par_iter()
            .map(|series| {
                let mut buf: Vec<Complex<T>> = series.iter().map(|&v| cx(v, T::zero())).collect();
                self.forward.process(&mut buf);
                buf.truncate(max_harmonic + 1);
                buf.iter_mut().for_each(|z| *z *= inv_t);
                buf
            })
            .collect();
        for (i, s) in spectra.iter().enumerate() {
            for (m, &c) in s.iter().enumerate() {
                out.set(i, m, c);
            }
        }
        Ok(out)
    }

    /// Per-site grid values of `-W(Q(t_k))`.
    fn minus_force_sites(&self, field: &HarmonicField<T>, cfg: &ChainConfig<T>) -> Vec<Vec<T>> {
        let one = Complex::new(T::one(), T::zero());
        let per_site = self.synth_sites(field, |_| one);
        let n = per_site.len();
        let mut out = vec![vec![T::zero(); self.grid]; n];
        let mut q = vec![T::zero(); n];
        let mut w = vec![T::zero(); n];
        for k in 0..self.grid {
            for i in 0..n {
                q[i] = per_site[i][k];
            }
            force_field_into(&q, cfg, &mut w);
            for i in 0..n {
                out[i][k] = -w[i];
            }
        }
        out
    }
}

/// Harmonics of `-W(Q(t))`.
pub fn nonlinearity_harmonics<T: Real>(
    field: &HarmonicField<T>,
    cfg: &ChainConfig<T>,
    colloc: &Collocation<T>,
) -> Result<HarmonicField<T>, SpectralError> {
    colloc.check(field)?;
    let v = colloc.minus_force_sites(field, cfg);
    colloc.analyze_sites(&v, field.half_width, field.max_harmonic, field.omega)
}

/// Harmonics of `-(W(A(t)) - W(B(t))) / scale`, differenced on the grid.
pub fn nonlinearity_increment<T: Real>(
    a: &HarmonicField<T>,
    b: &HarmonicField<T>,
    scale: T,
    cfg: &ChainConfig<T>,
    colloc: &Collocation<T>,
) -> Result<HarmonicField<T>, SpectralError> {
    if !a.same_shape(b) {
        return Err(SpectralError::Shape);
    }
    colloc.check(a)?;
    let va = colloc.minus_force_sites(a, cfg);
    let vb = colloc.minus_force_sites(b, cfg);
    let inv = T::one() / scale;
    let diff: Vec<Vec<T>> = va
        .iter()
        .zip(&vb)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (*p - *q) * inv).collect())
        .collect();
    colloc.analyze_sites(&diff, a.half_width, a.max_harmonic, a.omega)
}

/// `sum_y H_m(x, y) v_y(m)` for every stored harmonic.
pub fn apply_kernels<T: Real>(kernels: &GreensKernelSet<T>, v: &HarmonicField<T>) -> Result<HarmonicField<T>, SpectralError> {
    if kernels.max_harmonic() < v.max_harmonic || kernels.half_width() != v.half_width {
        return Err(SpectralError::KernelMismatch);
    }
    let parts: Vec<Vec<Complex<T>>> = (0..=v.max_harmonic)
        .into_par_iter()
        .map(|m| kernels.apply(m, v.harmonic(m)))
        .collect();
    let mut out = v.clone();
    for (m, p) in parts.into_iter().enumerate() {
        for (i, c) in p.into_iter().enumerate() {
            out.set(i, m, c);
        }
    }
    Ok(out)
}

/// Distance of `(m omega)^2` to the squared band `[omega0^2, omega_u^2]`.
fn band_distance<T: Real>(cfg: &ChainConfig<T>, m: usize) -> T {
    let f2 = (T::from_usize_lossy(m) * cfg.omega()).powi(2);
    let lo = cfg.omega0() * cfg.omega0();
    let hi = lo + T::lit(4.0);
    if f2 < lo {
        lo - f2
    } else if f2 > hi {
        f2 - hi
    } else {
        T::zero()
    }
}

fn scan_limit<T: Real>(cfg: &ChainConfig<T>) -> usize {
    (cfg.omega_u() / cfg.omega()).ceil().to_usize().unwrap_or(0) + 1
}

/// `inf_m dist((m omega)^2, [omega0^2, omega_u^2])`; zero when some harmonic is resonant.
pub fn resonance_gap<T: Real>(cfg: &ChainConfig<T>) -> T {
    (0..=scan_limit(cfg)).map(|m| band_distance(cfg, m)).fold(T::infinity(), T::min)
}

/// The same infimum restricted to odd multiples of `omega`.
pub fn odd_resonance_gap<T: Real>(cfg: &ChainConfig<T>) -> T {
    (1..=scan_limit(cfg) + 1)
        .step_by(2)
        .map(|m| band_distance(cfg, m))
        .fold(T::infinity(), T::min)
}

/// Convergence radii `nu0 = delta_* / V` and `nu0_odd = delta_odd / V` with
/// `V = ||V''|| + 3 ||U''||`; both infinite when the anharmonicity vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingRadius {
    pub gap: f64,
    pub odd_gap: f64,
    pub anharmonicity: f64,
    pub nu0: f64,
    pub nu0_odd: f64,
}

pub fn coupling_radius<T: Real>(cfg: &ChainConfig<T>) -> CouplingRadius {
    let gap = resonance_gap(cfg).as_f64();
    let odd_gap = odd_resonance_gap(cfg).as_f64();
    let a = cfg.anharmonicity().as_f64();
    let (nu0, nu0_odd) = if a == 0.0 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        (gap / a, odd_gap / a)
    };
    CouplingRadius {
        gap,
        odd_gap,
        anharmonicity: a,
        nu0,
        nu0_odd,
    }
}

/// `q_x(m) = F_m H_m(x, 0)`: the exact periodic orbit of the linear chain.
pub fn harmonic_base_solution<T: Real>(
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    grid: usize,
) -> Result<HarmonicField<T>, SpectralError> {
    if !kernels.matches(cfg) || kernels.max_harmonic() < cfg.forcing().max_mode() {
        return Err(SpectralError::KernelMismatch);
    }
    let mut out = HarmonicField::zeros(cfg.half_width(), kernels.max_harmonic(), grid, cfg.omega())?;
    let centre = cfg.half_width();
    for m in 1..=cfg.forcing().max_mode() {
        let f = cfg.forcing().coefficient(m as i64);
        if f.norm_sqr() == T::zero() {
            continue;
        }
        let h = kernels.table(m);
        for i in 0..cfg.sites() {
            out.set(i, m, f * h[(i, centre)]);
        }
    }
    Ok(out)
}

/// Harmonic-domain residual of the steady-state equations, relative to the forcing norm.
pub fn defect<T: Real>(
    field: &HarmonicField<T>,
    cfg: &ChainConfig<T>,
    colloc: &Collocation<T>,
) -> Result<T, SpectralError> {
    let v = if cfg.nu() != T::zero() {
        Some(nonlinearity_harmonics(field, cfg, colloc)?)
    } else {
        None
    };
    let n = field.sites();
    let w02 = cfg.omega0() * cfg.omega0();
    let centre = cfg.half_width();
    let mut acc = T::zero();
    for m in 0..=field.max_harmonic {
        let mw = T::from_usize_lossy(m) * cfg.omega();
        let q = field.harmonic(m);
        let mut s = T::zero();
        for i in 0..n {
            let left = if i == 0 { q[0] } else { q[i - 1] };
            let right = if i + 1 == n { q[n - 1] } else { q[i + 1] };
            let mut r = q[i] * (w02 - mw * mw) - ((right - q[i]) - (q[i] - left));
            if i == 0 {
                r += q[i] * cx(T::zero(), cfg.gamma() * mw);
            }
            if i + 1 == n {
                r += q[i] * cx(T::zero(), cfg.gamma() * mw);
            }
            if i == centre {
                r -= cfg.forcing().coefficient(m as i64);
            }
            if let Some(v) = &v {
                r -= v.harmonic(m)[i] * cfg.nu();
            }
            s += r.norm_sqr();
        }
        acc += if m == 0 { s } else { T::lit(2.0) * s };
    }
    let scale = cfg.forcing().norm_sqr();
    let scale = if scale > T::zero() { scale.sqrt() } else { T::one() };
    Ok(acc.sqrt() / scale)
}

/// `max_{x, even m != 0} |q_x(m)|` relative to the field norm.
pub fn even_harmonic_residual<T: Real>(field: &HarmonicField<T>) -> T {
    let norm = field.l2_norm();
    if norm == T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    for m in (2..=field.max_harmonic).step_by(2) {
        for v in field.harmonic(m) {
            worst = worst.max(v.norm());
        }
    }
    worst / norm
}

/// Whether even harmonics are removed after every step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OddProjection {
    /// On only when the symmetry holds and `|nu|` is at or beyond `nu0`, where
    /// rounding noise in the even subspace is no longer damped.
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T> {
    /// Stopping tolerance, relative to the norm of the linear response.
    pub tol: T,
    pub max_order: usize,
    pub max_iter: usize,
    /// Fixed harmonic truncation; adaptive doubling when `None`.
    pub harmonics: Option<usize>,
    /// Fixed collocation grid; next power of two above `8(2M+1)` when `None`.
    pub grid: Option<usize>,
    pub max_harmonics: usize,
    pub truncation_tol: T,
    pub odd_projection: OddProjection,
}

impl<T: Real> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-12),
            max_order: 400,
            max_iter: 2000,
            harmonics: None,
            grid: None,
            max_harmonics: 1024,
            truncation_tol: T::lit(1e-12),
            odd_projection: OddProjection::Auto,
        }
    }
}

fn projection_active<T: Real>(cfg: &ChainConfig<T>, opts: &SolverOptions<T>, radius: &CouplingRadius) -> bool {
    match opts.odd_projection {
        OddProjection::On => true,
        OddProjection::Off => false,
        OddProjection::Auto => cfg.odd_symmetric() && Float::abs(cfg.nu()).as_f64() >= radius.nu0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Series,
    FixedPoint,
}

impl SolveMethod {
    pub fn name(self) -> &'static str {
        match self {
            SolveMethod::Series => "series",
            SolveMethod::FixedPoint => "fixed-point",
        }
    }
}

/// Iteration history of a spectral solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub method: SolveMethod,
    pub iterations: usize,
    pub max_harmonic: usize,
    pub grid: usize,
    /// Series: `|||q^(l)|||` per order. Fixed point: `|||f_k|||` per iterate.
    pub norms: Vec<f64>,
    /// Series: `|||q^(l)|||_{N,1}` per order. Fixed point: `|||f_k|||_{N,1}`.
    pub sobolev_norms: Vec<f64>,
    /// Series: `|nu|^l |||q^(l)|||`. Fixed point: `|||f_{k+1} - f_k|||`.
    pub increments: Vec<f64>,
    /// Consecutive ratios of `norms` (series) or `increments` (fixed point).
    pub ratios: Vec<f64>,
    /// Analytic bound on the remaining tail after each order (series only).
    pub tail_bounds: Vec<f64>,
    pub tail_bound: f64,
    /// Relative harmonic-domain defect of the returned field.
    pub residual: f64,
    pub radius: CouplingRadius,
    pub odd_projection: bool,
    pub warnings: Vec<String>,
    /// Excluded from serialized reports so outputs stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

/// Converged steady state: the harmonic field plus the parameters needed to sample it.
#[derive(Debug, Clone)]
pub struct PeriodicSolution<T> {
    pub field: HarmonicField<T>,
    pub theta: T,
    pub nu: T,
}

impl<T: Real> PeriodicSolution<T> {
    pub fn new(field: HarmonicField<T>, cfg: &ChainConfig<T>) -> Self {
        Self {
            field,
            theta: cfg.theta(),
            nu: cfg.nu(),
        }
    }

    pub fn half_width(&self) -> usize {
        self.field.half_width()
    }

    pub fn omega(&self) -> T {
        self.field.omega()
    }

    /// Phase point on the orbit at time `t`.
    pub fn state_at(&self, t: T) -> ChainState<T> {
        let (q, p) = self.field.evaluate(t);
        ChainState { q, p, t }
    }

    /// Period-mean norm `|||q|||`.
    pub fn norm(&self) -> T {
        self.field.l2_norm()
    }

    /// Distance in `|||.|||` to another solution with possibly different truncation.
    pub fn distance(&self, other: &Self) -> Result<T, SpectralError> {
        let m = self.field.max_harmonic().max(other.field.max_harmonic());
        let g = default_grid(m);
        let a = self.field.resized(m, g)?;
        let b = other.field.resized(m, g)?;
        Ok(a.axpy(-T::one(), &b)?.l2_norm())
    }
}

/// Order fields and partial sums of the perturbative series at the configured `nu`.
#[derive(Debug, Clone)]
pub struct SeriesState<T> {
    pub orders: Vec<HarmonicField<T>>,
    pub partial_sum: HarmonicField<T>,
    pub nu: T,
    pub radius: CouplingRadius,
}

impl<T: Real> SeriesState<T> {
    pub fn order(&self) -> usize {
        self.orders.len() - 1
    }

    pub fn order_norms(&self) -> Vec<T> {
        self.orders.iter().map(|f| f.l2_norm()).collect()
    }

    /// `|||sum_{l > L} nu^l q^(l)|||` for each `L`, relative to the final partial sum.
    pub fn measured_tails(&self) -> Result<Vec<T>, SpectralError> {
        let n = self.orders.len();
        let mut tails = vec![T::zero(); n];
        let mut acc = self.orders[0].scaled(T::zero());
        for l in (1..n).rev() {
            acc = acc.axpy(self.nu.powi(l as i32), &self.orders[l])?;
            tails[l - 1] = acc.l2_norm();
        }
        Ok(tails)
    }
}

/// `q^(L)` from the previous partial sums. `prev2` is `None` for `L = 1`.
pub fn perturbative_step<T: Real>(
    prev: &HarmonicField<T>,
    prev2: Option<&HarmonicField<T>>,
    order: usize,
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    colloc: &Collocation<T>,
) -> Result<HarmonicField<T>, SpectralError> {
    let v = match prev2 {
        None => nonlinearity_harmonics(prev, cfg, colloc)?,
        Some(b) => nonlinearity_increment(prev, b, cfg.nu().powi(order as i32 - 1), cfg, colloc)?,
    };
    apply_kernels(kernels, &v)
}

fn radius_gate<T: Real>(cfg: &ChainConfig<T>, radius: &CouplingRadius, warnings: &mut Vec<String>) -> Result<(), SpectralError> {
    let nu = Float::abs(cfg.nu()).as_f64();
    if nu < radius.nu0 {
        return Ok(());
    }
    if cfg.odd_symmetric() && nu < radius.nu0_odd {
        warnings.push(format!(
            "|nu| = {nu} exceeds nu0 = {} but lies below the odd-mode radius {}",
            radius.nu0, radius.nu0_odd
        ));
        return Ok(());
    }
    Err(SpectralError::OutsideRadius {
        nu,
        nu0: radius.nu0,
        nu0_odd: radius.nu0_odd,
    })
}

/// Runs the series on a fixed kernel set and grid.
pub fn series_expand<T: Real>(
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    grid: usize,
    opts: &SolverOptions<T>,
) -> Result<(SeriesState<T>, ConvergenceReport), SpectralError> {
    let start = Instant::now();
    let radius = coupling_radius(cfg);
    let mut warnings = Vec::new();
    radius_gate(cfg, &radius, &mut warnings)?;
    let project = projection_active(cfg, opts, &radius);
    let colloc = Collocation::new(grid);
    let mut base = harmonic_base_solution(cfg, kernels, grid)?;
    if project {
        base.project_odd();
    }
    let nu = cfg.nu();
    let anu = Float::abs(nu);
    let ratio = if radius.nu0.is_infinite() {
        0.0
    } else {
        anu.as_f64() / radius.nu0
    };
    let n0 = base.l2_norm();
    let scale = if n0 > T::zero() { n0 } else { T::one() };
    let tail_at = |l: usize| -> f64 {
        if ratio < 1.0 {
            ratio.powi(l as i32) * n0.as_f64() / (1.0 - ratio)
        } else {
            f64::INFINITY
        }
    };

    let mut orders = vec![base.clone()];
    let mut sums = vec![base];
    let mut norms = vec![n0.as_f64()];
    let mut sobolev = vec![orders[0].sobolev_norm(1).as_f64()];
    let mut increments = vec![n0.as_f64()];
    let mut tails = vec![tail_at(0)];
    let mut converged = nu == T::zero() || n0 == T::zero();
    let tol = opts.tol.as_f64() * scale.as_f64();
    let mut order = 0;
    while !converged {
        order += 1;
        if order > opts.max_order {
            return Err(SpectralError::NonConvergence {
                method: "series",
                iterations: opts.max_order,
                residual: *increments.last().unwrap() / scale.as_f64(),
            });
        }
        let prev2 = if order >= 2 { Some(&sums[order - 2]) } else { None };
        let mut q = perturbative_step(&sums[order - 1], prev2, order, cfg, kernels, &colloc)?;
        if project {
            q.project_odd();
        }
        let weight = nu.powi(order as i32);
        let next = sums[order - 1].axpy(weight, &q)?;
        let qn = q.l2_norm();
        norms.push(qn.as_f64());
        sobolev.push(q.sobolev_norm(1).as_f64());
        let inc = (Float::abs(weight) * qn).as_f64();
        increments.push(inc);
        tails.push(tail_at(order));
        orders.push(q);
        sums.push(next);
        if !inc.is_finite() {
            return Err(SpectralError::Divergence {
                iterations: order,
                increment: inc,
            });
        }
        converged = tail_at(order) < tol || inc < tol;
        // keep only the last two partial sums alive
        if order >= 2 {
            sums[order - 2] = sums[order - 1].scaled(T::zero());
        }
    }
    let partial_sum = sums.pop().unwrap();
    let residual = defect(&partial_sum, cfg, &colloc)?.as_f64();
    let ratios = norms.windows(2).map(|w| w[1] / w[0]).collect();
    let report = ConvergenceReport {
        method: SolveMethod::Series,
        iterations: order,
        max_harmonic: partial_sum.max_harmonic(),
        grid,
        norms,
        sobolev_norms: sobolev,
        increments,
        ratios,
        tail_bound: *tails.last().unwrap(),
        tail_bounds: tails,
        residual,
        radius,
        odd_projection: project,
        warnings,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((
        SeriesState {
            orders,
            partial_sum,
            nu,
            radius,
        },
        report,
    ))
}

/// `T(f) = H (F delta_0 + nu v(f))`.
pub fn contraction_map<T: Real>(
    f: &HarmonicField<T>,
    base: &HarmonicField<T>,
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    colloc: &Collocation<T>,
) -> Result<HarmonicField<T>, SpectralError> {
    if cfg.nu() == T::zero() {
        return Ok(base.clone());
    }
    let v = nonlinearity_harmonics(f, cfg, colloc)?;
    let hv = apply_kernels(kernels, &v)?;
    base.axpy(cfg.nu(), &hv)
}

/// Banach iteration of [`contraction_map`] from the linear response on a fixed kernel set.
pub fn fixed_point_iterate<T: Real>(
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    grid: usize,
    opts: &SolverOptions<T>,
) -> Result<(HarmonicField<T>, ConvergenceReport), SpectralError> {
    let start = Instant::now();
    let radius = coupling_radius(cfg);
    let mut warnings = Vec::new();
    if Float::abs(cfg.nu()).as_f64() >= radius.nu0 {
        warnings.push(format!(
            "|nu| = {} is not below nu0 = {}; contraction is not guaranteed",
            Float::abs(cfg.nu()),
            radius.nu0
        ));
    }
    let project = projection_active(cfg, opts, &radius);
    let colloc = Collocation::new(grid);
    let mut base = harmonic_base_solution(cfg, kernels, grid)?;
    if project {
        base.project_odd();
    }
    let n0 = base.l2_norm();
    let scale = if n0 > T::zero() { n0 } else { T::one() };
    let tol = opts.tol.as_f64() * scale.as_f64();
    let mut f = base.clone();
    let mut norms = vec![n0.as_f64()];
    let mut sobolev = vec![base.sobolev_norm(1).as_f64()];
    let mut increments: Vec<f64> = Vec::new();
    let mut growth = 0usize;
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut next = contraction_map(&f, &base, cfg, kernels, &colloc)?;
        if project {
            next.project_odd();
        }
        let inc = next.axpy(-T::one(), &f)?.l2_norm().as_f64();
        if let Some(&last) = increments.last() {
            growth = if inc > last { growth + 1 } else { 0 };
        }
        increments.push(inc);
        norms.push(next.l2_norm().as_f64());
        sobolev.push(next.sobolev_norm(1).as_f64());
        f = next;
        if !inc.is_finite() || growth >= 5 {
            return Err(SpectralError::Divergence {
                iterations,
                increment: inc,
            });
        }
        if inc < tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(SpectralError::NonConvergence {
                method: "fixed-point",
                iterations,
                residual: inc / scale.as_f64(),
            });
        }
    }
    let residual = defect(&f, cfg, &colloc)?.as_f64();
    let ratios = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let report = ConvergenceReport {
        method: SolveMethod::FixedPoint,
        iterations,
        max_harmonic: f.max_harmonic(),
        grid,
        norms,
        sobolev_norms: sobolev,
        increments,
        ratios,
        tail_bounds: Vec::new(),
        tail_bound: f64::NAN,
        residual,
        radius,
        odd_projection: project,
        warnings,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((f, report))
}

/// Largest observed `|||T g - T f||| / |||g - f|||` over random pairs near the linear response.
pub fn contraction_probe<T: Real, R: Rng>(
    cfg: &ChainConfig<T>,
    kernels: &GreensKernelSet<T>,
    grid: usize,
    pairs: usize,
    rng: &mut R,
) -> Result<T, SpectralError> {
    let colloc = Collocation::new(grid);
    let base = harmonic_base_solution(cfg, kernels, grid)?;
    let amp = base.l2_norm().max(T::lit(1e-3));
    let n = base.sites();
    let m_top = base.max_harmonic().min(4 * cfg.forcing().max_mode().max(1));
    let random = |rng: &mut R| -> Result<HarmonicField<T>, SpectralError> {
        let mut f = base.clone();
        for m in 0..=m_top {
            for i in 0..n {
                let re = T::lit(rng.gen_range(-1.0..1.0));
                let im = T::lit(rng.gen_range(-1.0..1.0));
                f.set(i, m, f.get(i, m as i64) + cx(re, im) * amp);
            }
        }
        Ok(f)
    };
    let mut worst = T::zero();
    for _ in 0..pairs {
        let a = random(rng)?;
        let b = random(rng)?;
        let ta = contraction_map(&a, &base, cfg, kernels, &colloc)?;
        let tb = contraction_map(&b, &base, cfg, kernels, &colloc)?;
        let num = ta.axpy(-T::one(), &tb)?.l2_norm();
        let den = a.axpy(-T::one(), &b)?.l2_norm();
        worst = worst.max(num / den);
    }
    Ok(worst)
}

fn initial_harmonics<T: Real>(cfg: &ChainConfig<T>, opts: &SolverOptions<T>) -> usize {
    opts.harmonics
        .unwrap_or_else(|| (4 * cfg.forcing().max_mode()).max(16))
}

/// Doubles `M` until the top-octave energy of the returned field is negligible.
fn adaptive<T: Real, R>(
    cfg: &ChainConfig<T>,
    opts: &SolverOptions<T>,
    mut run: impl FnMut(&GreensKernelSet<T>, usize) -> Result<(HarmonicField<T>, ConvergenceReport, R), SpectralError>,
) -> Result<(PeriodicSolution<T>, ConvergenceReport, R), SpectralError> {
    check_resonance(cfg, scan_limit(cfg))?;
    let mut m = initial_harmonics(cfg, opts);
    loop {
        let kernels = build_kernel_set(cfg, m)?;
        let grid = opts.grid.unwrap_or_else(|| default_grid(m));
        let (field, report, extra) = run(&kernels, grid)?;
        let fraction = field.top_octave_fraction();
        if opts.harmonics.is_some() || fraction < opts.truncation_tol {
            return Ok((PeriodicSolution::new(field, cfg), report, extra));
        }
        if 2 * m > opts.max_harmonics {
            return Err(SpectralError::Truncation {
                max_harmonic: m,
                fraction: fraction.as_f64(),
            });
        }
        m *= 2;
    }
}

/// Sums the perturbative series in `nu` with adaptive harmonic truncation.
pub fn series_solve<T: Real>(
    cfg: &ChainConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<(PeriodicSolution<T>, ConvergenceReport), SpectralError> {
    series_solve_with_state(cfg, opts).map(|(s, r, _)| (s, r))
}

/// As [`series_solve`], also returning the individual orders.
pub fn series_solve_with_state<T: Real>(
    cfg: &ChainConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<(PeriodicSolution<T>, ConvergenceReport, SeriesState<T>), SpectralError> {
    adaptive(cfg, opts, |k, g| {
        let (state, report) = series_expand(cfg, k, g, opts)?;
        Ok((state.partial_sum.clone(), report, state))
    })
}

/// Iterates the contraction map with adaptive harmonic truncation.
pub fn fixed_point_solve<T: Real>(
    cfg: &ChainConfig<T>,
    opts: &SolverOptions<T>,
) -> Result<(PeriodicSolution<T>, ConvergenceReport), SpectralError> {
    adaptive(cfg, opts, |k, g| {
        let (f, r) = fixed_point_iterate(cfg, k, g, opts)?;
        Ok((f, r, ()))
    })
    .map(|(s, r, _)| (s, r))
}
