//! The physical model: configuration, discrete operators, equations of motion and energy.
//!
//! Sites are labelled `x = -N..=N` and stored at array index `x + N`.

use std::ops::{Add, Sub};

use num_complex::Complex;
use num_traits::Float;
use thiserror::Error;

use crate::potential::Potential;
use crate::scalar::{Entry, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("state arrays have lengths {q} and {p}, expected {expected}")]
    StateShape { q: usize, p: usize, expected: usize },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

/// Fourier coefficients `F_m`, `m = 1..=M_F`, of the real periodic drive
/// `F(t) = sum_m F_m e^{i m omega t}`. `F_0 = 0` and `F_{-m} = conj(F_m)` are implied.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingSpectrum<T> {
    coefficients: Vec<Complex<T>>,
}

impl<T: Real> ForcingSpectrum<T> {
    /// `coefficients[k]` is `F_{k+1}`. Trailing zeros are dropped.
    pub fn new(mut coefficients: Vec<Complex<T>>) -> Result<Self, ConfigError> {
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("forcing", "coefficients must be finite"));
        }
        while coefficients.last().is_some_and(|c| c.norm_sqr() == T::zero()) {
            coefficients.pop();
        }
        if coefficients.is_empty() {
            return Err(invalid("forcing", "at least one nonzero mode is required"));
        }
        Ok(Self { coefficients })
    }

    /// Builds the spectrum from `(m, F_m)` pairs with `m >= 1`, rejecting duplicates.
    pub fn from_modes(modes: &[(i64, Complex<T>)]) -> Result<Self, ConfigError> {
        let mut top = 0usize;
        for &(m, _) in modes {
            if m == 0 {
                return Err(invalid("forcing", "mode m = 0 is not allowed (F_0 = 0 required)"));
            }
            if m < 0 {
                return Err(invalid(
                    "forcing",
                    format!("mode m = {m} is negative; negative modes follow by conjugation"),
                ));
            }
            top = top.max(m as usize);
        }
        let mut coefficients = vec![Complex::new(T::zero(), T::zero()); top];
        let mut seen = vec![false; top];
        for &(m, c) in modes {
            let k = m as usize - 1;
            if seen[k] {
                return Err(invalid("forcing", format!("mode m = {m} listed twice")));
            }
            seen[k] = true;
            coefficients[k] = c;
        }
        Self::new(coefficients)
    }

    /// The undriven case. Solvers accept it, but [`ForcingSpectrum::new`] rejects
    /// all-zero input so that configured drives are never silently empty.
    pub fn zero() -> Self {
        Self {
            coefficients: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Drive `F(t) = amplitude * cos(omega t)`.
    pub fn cosine(amplitude: T) -> Result<Self, ConfigError> {
        Self::new(vec![Complex::new(amplitude / T::lit(2.0), T::zero())])
    }

    pub fn max_mode(&self) -> usize {
        self.coefficients.len()
    }

    /// `F_m` for any integer `m`.
    pub fn coefficient(&self, m: i64) -> Complex<T> {
        let k = m.unsigned_abs() as usize;
        if m == 0 || k > self.coefficients.len() {
            return Complex::new(T::zero(), T::zero());
        }
        let c = self.coefficients[k - 1];
        if m > 0 {
            c
        } else {
            c.conj()
        }
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coefficients
    }

    /// Value of the drive at time `t` for base frequency `omega`.
    pub fn value(&self, t: T, omega: T) -> T {
        let two = T::lit(2.0);
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let phase = T::from_usize_lossy(k + 1) * omega * t;
                let (s, co) = phase.sin_cos();
                two * (c.re * co - c.im * s)
            })
            .sum()
    }

    /// `sum_{m != 0} (m |F_m|)^2`.
    pub fn weighted_norm_sqr(&self) -> T {
        let two = T::lit(2.0);
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let m = T::from_usize_lossy(k + 1);
                two * m * m * c.norm_sqr()
            })
            .sum()
    }

    /// `sum_{m != 0} |F_m|^2`.
    pub fn norm_sqr(&self) -> T {
        self.coefficients
            .iter()
            .map(|c| T::lit(2.0) * c.norm_sqr())
            .sum()
    }

    /// True when only odd modes are driven.
    pub fn is_odd(&self) -> bool {
        self.coefficients
            .iter()
            .enumerate()
            .all(|(k, c)| (k + 1) % 2 == 1 || c.norm_sqr() == T::zero())
    }
}

/// All physical parameters of the forced chain. The period is stored; the base
/// frequency is derived from it.
#[derive(Debug, Clone)]
pub struct ChainConfig<T> {
    half_width: usize,
    omega0: T,
    gamma: T,
    nu: T,
    theta: T,
    pinning: Potential<T>,
    interaction: Potential<T>,
    forcing: ForcingSpectrum<T>,
}

#[derive(Debug, Clone)]
pub struct ChainConfigBuilder<T> {
    half_width: usize,
    omega0: T,
    gamma: T,
    nu: T,
    theta: Option<T>,
    pinning: Potential<T>,
    interaction: Potential<T>,
    forcing: Option<ForcingSpectrum<T>>,
}

impl<T: Real> ChainConfigBuilder<T> {
    pub fn half_width(mut self, n: usize) -> Self {
        self.half_width = n;
        self
    }
    pub fn pinning_frequency(mut self, omega0: T) -> Self {
        self.omega0 = omega0;
        self
    }
    pub fn damping(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }
    pub fn coupling(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }
    pub fn period(mut self, theta: T) -> Self {
        self.theta = Some(theta);
        self
    }
    /// Sets the period to `2 pi / omega`.
    pub fn frequency(mut self, omega: T) -> Self {
        self.theta = Some(T::TAU() / omega);
        self
    }
    pub fn pinning(mut self, v: Potential<T>) -> Self {
        self.pinning = v;
        self
    }
    pub fn interaction(mut self, u: Potential<T>) -> Self {
        self.interaction = u;
        self
    }
    pub fn forcing(mut self, f: ForcingSpectrum<T>) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn build(self) -> Result<ChainConfig<T>, ConfigError> {
        if !(self.omega0 > T::zero() && self.omega0.is_finite()) {
            return Err(invalid("omega0", "must be positive and finite"));
        }
        if !(self.gamma >= T::zero() && self.gamma.is_finite()) {
            return Err(invalid("gamma", "must be nonnegative and finite"));
        }
        if !self.nu.is_finite() {
            return Err(invalid("nu", "must be finite"));
        }
        let theta = self.theta.ok_or_else(|| invalid("theta", "period is required"))?;
        if !(theta > T::zero() && theta.is_finite()) {
            return Err(invalid("theta", "must be positive and finite"));
        }
        let forcing = self
            .forcing
            .ok_or_else(|| invalid("forcing", "a forcing spectrum is required"))?;
        Ok(ChainConfig {
            half_width: self.half_width,
            omega0: self.omega0,
            gamma: self.gamma,
            nu: self.nu,
            theta,
            pinning: self.pinning,
            interaction: self.interaction,
            forcing,
        })
    }
}

impl<T: Real> ChainConfig<T> {
    pub fn builder() -> ChainConfigBuilder<T> {
        ChainConfigBuilder {
            half_width: 0,
            omega0: T::one(),
            gamma: T::zero(),
            nu: T::zero(),
            theta: None,
            pinning: Potential::zero(),
            interaction: Potential::zero(),
            forcing: None,
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }
    /// Number of sites `2N + 1`.
    pub fn sites(&self) -> usize {
        2 * self.half_width + 1
    }
    pub fn omega0(&self) -> T {
        self.omega0
    }
    /// Upper band edge `sqrt(omega0^2 + 4)`.
    pub fn omega_u(&self) -> T {
        (self.omega0 * self.omega0 + T::lit(4.0)).sqrt()
    }
    pub fn gamma(&self) -> T {
        self.gamma
    }
    pub fn nu(&self) -> T {
        self.nu
    }
    pub fn theta(&self) -> T {
        self.theta
    }
    pub fn omega(&self) -> T {
        T::TAU() / self.theta
    }
    pub fn pinning(&self) -> &Potential<T> {
        &self.pinning
    }
    pub fn interaction(&self) -> &Potential<T> {
        &self.interaction
    }
    pub fn forcing(&self) -> &ForcingSpectrum<T> {
        &self.forcing
    }

    /// `||V''|| + 3 ||U''||`.
    pub fn anharmonicity(&self) -> T {
        self.pinning.second_derivative_bound()
            + T::lit(3.0) * self.interaction.second_derivative_bound()
    }

    /// Whether both potentials are even and only odd modes are driven.
    pub fn odd_symmetric(&self) -> bool {
        self.pinning.is_even() && self.interaction.is_even() && self.forcing.is_odd()
    }

    pub fn with_coupling(&self, nu: T) -> Self {
        Self {
            nu,
            ..self.clone()
        }
    }

    pub fn with_half_width(&self, n: usize) -> Self {
        Self {
            half_width: n,
            ..self.clone()
        }
    }

    pub fn with_damping(&self, gamma: T) -> Result<Self, ConfigError> {
        if !(gamma >= T::zero() && gamma.is_finite()) {
            return Err(invalid("gamma", "must be nonnegative and finite"));
        }
        Ok(Self {
            gamma,
            ..self.clone()
        })
    }

    pub fn with_forcing(&self, forcing: ForcingSpectrum<T>) -> Self {
        Self {
            forcing,
            ..self.clone()
        }
    }

    /// Index of site `x` in site arrays.
    pub fn index(&self, x: i64) -> usize {
        (x + self.half_width as i64) as usize
    }
}

/// Phase-space point of the chain at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState<T> {
    pub q: Vec<T>,
    pub p: Vec<T>,
    pub t: T,
}

impl<T: Real> ChainState<T> {
    pub fn new(q: Vec<T>, p: Vec<T>, t: T) -> Result<Self, ConfigError> {
        if q.len() != p.len() || q.len().is_multiple_of(2) {
            let expected = if q.len() % 2 == 1 { q.len() } else { q.len() + 1 };
            return Err(ConfigError::StateShape {
                q: q.len(),
                p: p.len(),
                expected,
            });
        }
        Ok(Self { q, p, t })
    }

    pub fn at_rest(half_width: usize, t: T) -> Self {
        let n = 2 * half_width + 1;
        Self {
            q: vec![T::zero(); n],
            p: vec![T::zero(); n],
            t,
        }
    }

    pub fn half_width(&self) -> usize {
        self.q.len() / 2
    }

    /// Concatenated `(q, p)` vector.
    pub fn to_vector(&self) -> Vec<T> {
        self.q.iter().chain(self.p.iter()).copied().collect()
    }

    pub fn from_vector(z: &[T], t: T) -> Result<Self, ConfigError> {
        let n = z.len() / 2;
        Self::new(z[..n].to_vec(), z[n..].to_vec(), t)
    }
}

/// Second difference with reflecting ends `f_{N+1} = f_N`, `f_{-N-1} = f_{-N}`.
pub fn neumann_laplacian<S>(f: &[S]) -> Vec<S>
where
    S: Copy + Add<Output = S> + Sub<Output = S>,
{
    let n = f.len();
    (0..n)
        .map(|i| {
            let left = if i == 0 { f[0] } else { f[i - 1] };
            let right = if i + 1 == n { f[n - 1] } else { f[i + 1] };
            (right - f[i]) - (f[i] - left)
        })
        .collect()
}

/// Writes `W_x(f) = V'(f_x) - [U'(f_{x+1} - f_x) - U'(f_x - f_{x-1})]` into `out`.
pub fn force_field_into<T: Real>(f: &[T], cfg: &ChainConfig<T>, out: &mut [T]) {
    let n = f.len();
    let v = cfg.pinning();
    let u = cfg.interaction();
    let bond = |k: usize| -> T {
        // derivative of U on the bond (k-1, k); k = 0 and k = n are the reflected bonds
        if k == 0 || k == n {
            u.first_derivative(T::zero())
        } else {
            u.first_derivative(f[k] - f[k - 1])
        }
    };
    if u.is_zero() {
        for (o, &fx) in out.iter_mut().zip(f) {
            *o = v.first_derivative(fx);
        }
        return;
    }
    let mut left = bond(0);
    for i in 0..n {
        let right = bond(i + 1);
        out[i] = v.first_derivative(f[i]) - (right - left);
        left = right;
    }
}

pub fn force_field<T: Real>(f: &[T], cfg: &ChainConfig<T>) -> Vec<T> {
    let mut out = vec![T::zero(); f.len()];
    force_field_into(f, cfg, &mut out);
    out
}

/// Directional derivative `DW(q) h`, built from `V''` and `U''`.
pub fn force_jacobian_apply<T: Real>(q: &[T], h: &[T], cfg: &ChainConfig<T>, out: &mut [T]) {
    let n = q.len();
    let v = cfg.pinning();
    let u = cfg.interaction();
    let bond = |k: usize| -> T {
        if k == 0 || k == n {
            T::zero()
        } else {
            u.second_derivative(q[k] - q[k - 1]) * (h[k] - h[k - 1])
        }
    };
    let mut left = bond(0);
    for i in 0..n {
        let right = bond(i + 1);
        out[i] = v.second_derivative(q[i]) * h[i] - (right - left);
        left = right;
    }
}

/// Accelerations at `(q, p, t)`, written into `out`.
pub fn eom_rhs_into<T: Real>(q: &[T], p: &[T], t: T, cfg: &ChainConfig<T>, out: &mut [T]) {
    let n = q.len();
    let w2 = cfg.omega0() * cfg.omega0();
    let nu = cfg.nu();
    if nu != T::zero() {
        force_field_into(q, cfg, out);
    } else {
        out.iter_mut().for_each(|o| *o = T::zero());
    }
    for i in 0..n {
        let left = if i == 0 { q[0] } else { q[i - 1] };
        let right = if i + 1 == n { q[n - 1] } else { q[i + 1] };
        let lap = (right - q[i]) - (q[i] - left);
        out[i] = lap - w2 * q[i] - nu * out[i];
    }
    // friction on both ends; for a single site both terms land on it
    out[0] -= cfg.gamma() * p[0];
    out[n - 1] -= cfg.gamma() * p[n - 1];
    let mid = n / 2;
    out[mid] += cfg.forcing().value(t, cfg.omega());
}

pub fn eom_rhs<T: Real>(state: &ChainState<T>, cfg: &ChainConfig<T>) -> Vec<T> {
    let mut out = vec![T::zero(); state.q.len()];
    eom_rhs_into(&state.q, &state.p, state.t, cfg, &mut out);
    out
}

/// Total energy including the anharmonic terms; the reflected bond at `x = -N`
/// has zero elongation.
pub fn hamiltonian<T: Real>(state: &ChainState<T>, cfg: &ChainConfig<T>) -> T {
    let q = &state.q;
    let half = T::lit(0.5);
    let w2 = cfg.omega0() * cfg.omega0();
    let nu = cfg.nu();
    let mut total = T::zero();
    for i in 0..q.len() {
        let r = if i == 0 { T::zero() } else { q[i] - q[i - 1] };
        let mut e = half * state.p[i] * state.p[i] + half * r * r + half * w2 * q[i] * q[i];
        if nu != T::zero() {
            e += nu * (cfg.pinning().value(q[i]) + cfg.interaction().value(r));
        }
        total += e;
    }
    total
}

/// Norms used throughout the convergence checks.
pub mod norms {
    use super::*;

    #[derive(Debug, Error, Clone, PartialEq)]
    pub enum NormError {
        #[error("norm of an empty input")]
        Empty,
        #[error("time samples have inconsistent site counts")]
        Ragged,
    }

    /// `(sum_x |f_x|^2)^(1/2)`.
    pub fn site_norm<S: Entry>(f: &[S]) -> Result<S::Real, NormError> {
        if f.is_empty() {
            return Err(NormError::Empty);
        }
        let s: S::Real = f.iter().map(|v| v.modulus() * v.modulus()).sum();
        Ok(s.sqrt())
    }

    /// Period mean `((1/T) sum_k ||F(t_k)||^2)^(1/2)` over a uniform grid of `T` samples.
    pub fn period_mean_norm<T: Real>(samples: &[Vec<T>]) -> Result<T, NormError> {
        if samples.is_empty() || samples[0].is_empty() {
            return Err(NormError::Empty);
        }
        let width = samples[0].len();
        let mut acc = T::zero();
        for s in samples {
            if s.len() != width {
                return Err(NormError::Ragged);
            }
            acc += s.iter().map(|&v| v * v).sum::<T>();
        }
        Ok((acc / T::from_usize_lossy(samples.len())).sqrt())
    }

    /// Sobolev period norm from samples of `F, F', ..., F^(k)` on a common grid.
    pub fn period_mean_sobolev_norm<T: Real>(derivatives: &[Vec<Vec<T>>]) -> Result<T, NormError> {
        if derivatives.is_empty() {
            return Err(NormError::Empty);
        }
        let mut acc = T::zero();
        for d in derivatives {
            let n = period_mean_norm(d)?;
            acc += n * n;
        }
        Ok(acc.sqrt())
    }
}
