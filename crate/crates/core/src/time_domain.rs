//! Direct time integration, period maps and the linear theory of the damped chain.

use nalgebra::DMatrix;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{eom_rhs_into, force_jacobian_apply, hamiltonian, ChainConfig, ChainState};
use crate::linalg::{DenseMatrix, LinalgError};
use crate::scalar::{cx, Real};
use crate::spectral::{PeriodicSolution, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeDomainError {
    #[error("{0}")]
    Usage(String),
    #[error("integration produced a non-finite state after t = {time}")]
    BlowUp { time: f64 },
    #[error("I - monodromy is singular")]
    Singular,
    #[error("Newton iteration stalled after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Fixed-step RK4 settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    /// Steps per period; a power of two of at least 256.
    pub steps_per_period: usize,
    /// Number of periods to integrate.
    pub periods: usize,
    /// Keep every `dense_stride`-th step in [`Trajectory::dense`]; 0 disables.
    pub dense_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 1024,
            periods: 100,
            dense_stride: 0,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), TimeDomainError> {
        if self.steps_per_period < 256 || !self.steps_per_period.is_power_of_two() {
            return Err(TimeDomainError::Usage(format!(
                "steps_per_period = {} must be a power of two >= 256",
                self.steps_per_period
            )));
        }
        Ok(())
    }
}

/// Integrator output: states at strobe times `t0 + k theta` plus energy accounting.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub strobes: Vec<ChainState<T>>,
    /// `int_0^t p_0 F` at each strobe.
    pub work: Vec<T>,
    /// `gamma int p_{-N}^2` at each strobe.
    pub dissipation_left: Vec<T>,
    /// `gamma int p_N^2` at each strobe.
    pub dissipation_right: Vec<T>,
    /// Hamiltonian at each strobe.
    pub energy: Vec<T>,
    pub dense: Vec<ChainState<T>>,
    pub step: T,
}

/// Scratch buffers for one RK4 step of the augmented system.
struct Stepper<T> {
    n: usize,
    k: [Vec<T>; 4],
    tmp: Vec<T>,
    acc: Vec<T>,
}

impl<T: Real> Stepper<T> {
    fn new(n: usize) -> Self {
        let len = 2 * n + 3;
        Self {
            n,
            k: [vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len], vec![T::zero(); len]],
            tmp: vec![T::zero(); len],
            acc: vec![T::zero(); n],
        }
    }

    /// Derivative of `(q, p, work, left, right)`.
    fn rhs(cfg: &ChainConfig<T>, n: usize, t: T, y: &[T], dy: &mut [T], acc: &mut [T]) {
        let (q, rest) = y.split_at(n);
        let p = &rest[..n];
        eom_rhs_into(q, p, t, cfg, acc);
        dy[..n].copy_from_slice(p);
        dy[n..2 * n].copy_from_slice(acc);
        dy[2 * n] = p[n / 2] * cfg.forcing().value(t, cfg.omega());
        dy[2 * n + 1] = cfg.gamma() * p[0] * p[0];
        dy[2 * n + 2] = cfg.gamma() * p[n - 1] * p[n - 1];
    }

    fn step(&mut self, cfg: &ChainConfig<T>, t: T, h: T, y: &mut [T]) {
        let n = self.n;
        let half = T::lit(0.5);
        let len = y.len();
        Self::rhs(cfg, n, t, y, &mut self.k[0], &mut self.acc);
        for i in 0..len {
            self.tmp[i] = y[i] + half * h * self.k[0][i];
        }
        Self::rhs(cfg, n, t + half * h, &self.tmp, &mut self.k[1], &mut self.acc);
        for i in 0..len {
            self.tmp[i] = y[i] + half * h * self.k[1][i];
        }
        Self::rhs(cfg, n, t + half * h, &self.tmp, &mut self.k[2], &mut self.acc);
        for i in 0..len {
            self.tmp[i] = y[i] + h * self.k[2][i];
        }
        Self::rhs(cfg, n, t + h, &self.tmp, &mut self.k[3], &mut self.acc);
        let sixth = h / T::lit(6.0);
        for i in 0..len {
            y[i] += sixth * (self.k[0][i] + T::lit(2.0) * (self.k[1][i] + self.k[2][i]) + self.k[3][i]);
        }
    }
}

fn check_state<T: Real>(cfg: &ChainConfig<T>, s: &ChainState<T>) -> Result<(), TimeDomainError> {
    if s.q.len() != cfg.sites() || s.p.len() != cfg.sites() {
        return Err(TimeDomainError::Usage(format!(
            "state has {} sites, configuration has {}",
            s.q.len(),
            cfg.sites()
        )));
    }
    Ok(())
}

/// Integrates `icfg.periods` periods of the equations of motion from `initial`.
pub fn integrate<T: Real>(
    cfg: &ChainConfig<T>,
    initial: &ChainState<T>,
    icfg: &IntegratorConfig,
) -> Result<Trajectory<T>, TimeDomainError> {
    icfg.validate()?;
    check_state(cfg, initial)?;
    let n = cfg.sites();
    let h = cfg.theta() / T::from_usize_lossy(icfg.steps_per_period);
    let mut y: Vec<T> = initial.to_vector();
    y.extend([T::zero(); 3]);
    let mut stepper = Stepper::new(n);
    let state_of = |y: &[T], t: T| ChainState {
        q: y[..n].to_vec(),
        p: y[n..2 * n].to_vec(),
        t,
    };
    let mut traj = Trajectory {
        strobes: vec![initial.clone()],
        work: vec![T::zero()],
        dissipation_left: vec![T::zero()],
        dissipation_right: vec![T::zero()],
        energy: vec![hamiltonian(initial, cfg)],
        dense: Vec::new(),
        step: h,
    };
    if icfg.dense_stride > 0 {
        traj.dense.push(initial.clone());
    }
    let t0 = initial.t;
    let mut count = 0usize;
    for k in 1..=icfg.periods {
        for s in 0..icfg.steps_per_period {
            let t = t0 + T::from_usize_lossy((k - 1) * icfg.steps_per_period + s) * h;
            stepper.step(cfg, t, h, &mut y);
            count += 1;
            if icfg.dense_stride > 0 && count.is_multiple_of(icfg.dense_stride) {
                traj.dense.push(state_of(&y, t + h));
            }
        }
        let t = t0 + T::from_usize_lossy(k) * cfg.theta();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(TimeDomainError::BlowUp {
                time: (t - cfg.theta()).as_f64(),
            });
        }
        let s = state_of(&y, t);
        traj.energy.push(hamiltonian(&s, cfg));
        traj.strobes.push(s);
        traj.work.push(y[2 * n]);
        traj.dissipation_left.push(y[2 * n + 1]);
        traj.dissipation_right.push(y[2 * n + 2]);
    }
    Ok(traj)
}

fn sinhc<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(1e-3) {
        let z2 = z * z;
        // 1 + z^2/6 + z^4/120 + z^6/5040
        Complex::new(T::one(), T::zero())
            + z2 * (Complex::new(T::one() / T::lit(6.0), T::zero())
                + z2 * (Complex::new(T::one() / T::lit(120.0), T::zero()) + z2 / T::lit(5040.0)))
    } else {
        z.sinh() / z
    }
}

/// Exact solution of `q'' + 2 gamma q' + omega0^2 q = F(t)` with `q(0) = q0`, `p(0) = p0`.
///
/// The homogeneous part is written as `e^{-gamma t} [a cosh(s t) + (b + gamma a) t sinhc(s t)]`
/// with `s = (gamma^2 - omega0^2)^{1/2}` taken complex, which covers the under-, over- and
/// critically damped cases without branching. A forced mode with `m omega = omega0` and
/// `gamma = 0` uses the secular particular solution.
pub fn single_oscillator_exact<T: Real>(cfg: &ChainConfig<T>, q0: T, p0: T, t: T) -> Result<(T, T), TimeDomainError> {
    if cfg.half_width() != 0 || cfg.nu() != T::zero() {
        return Err(TimeDomainError::Usage(
            "the closed form needs a single site (N = 0) and nu = 0".into(),
        ));
    }
    let g = cfg.gamma();
    let w02 = cfg.omega0() * cfg.omega0();
    let two = T::lit(2.0);
    let i = cx(T::zero(), T::one());
    // particular solution: value and derivative at 0 and at t
    let mut qp0 = T::zero();
    let mut pp0 = T::zero();
    let mut qpt = T::zero();
    let mut ppt = T::zero();
    for (k, &f) in cfg.forcing().coefficients().iter().enumerate() {
        let mw = T::from_usize_lossy(k + 1) * cfg.omega();
        let den = cx(w02 - mw * mw, two * g * mw);
        let e = Complex::from_polar(T::one(), mw * t);
        if den.norm() == T::zero() {
            let a = f / (i * (two * mw));
            qpt += two * (a * t * e).re;
            ppt += two * (a * e * (Complex::new(T::one(), T::zero()) + i * (mw * t))).re;
            pp0 += two * a.re;
        } else {
            let a = f / den;
            qp0 += two * a.re;
            pp0 += two * (a * i * mw).re;
            qpt += two * (a * e).re;
            ppt += two * (a * e * i * mw).re;
        }
    }
    let a = q0 - qp0;
    let b = p0 - pp0;
    let s = Complex::new(g * g - w02, T::zero()).sqrt();
    let st = s * t;
    let decay = (-g * t).exp();
    let c = st.cosh();
    let sc = sinhc(st);
    let hq = (c * a + sc * ((b + g * a) * t)) * decay;
    let hp = -hq * g + (sc * (s * s * t * a) + c * (b + g * a)) * decay;
    Ok((qpt + hq.re, ppt + hp.re))
}

/// Resonance gaps of the damped single oscillator:
/// `phi(m) = ((omega0^2 - (m omega)^2)^2 + 4 gamma^2 (m omega)^2)^(1/2)`, minimised over
/// all `m >= 0` and over odd `m` respectively.
pub fn single_oscillator_gap<T: Real>(cfg: &ChainConfig<T>) -> Result<(T, T), TimeDomainError> {
    if cfg.half_width() != 0 {
        return Err(TimeDomainError::Usage("single-oscillator gaps need N = 0".into()));
    }
    let w0 = cfg.omega0();
    let g = cfg.gamma();
    let w = cfg.omega();
    let w02 = w0 * w0;
    let two = T::lit(2.0);
    let phi = |m: usize| -> T {
        let mw2 = (T::from_usize_lossy(m) * w).powi(2);
        ((w02 - mw2).powi(2) + T::lit(4.0) * g * g * mw2).sqrt()
    };
    let crit2 = w02 - two * g * g;
    // continuous minimiser of phi over m
    let m_c = if crit2 > T::zero() { crit2.sqrt() / w } else { T::zero() };
    let gap = if w0 > two.sqrt() * g {
        let m_star = m_c.floor().to_usize().unwrap_or(0);
        phi(m_star).min(phi(m_star + 1))
    } else {
        w02
    };
    let odd_gap = if m_c <= T::one() {
        phi(1)
    } else {
        let below = m_c.floor().to_usize().unwrap_or(1);
        let below = if below % 2 == 1 { below } else { below - 1 };
        phi(below).min(phi(below + 2))
    };
    Ok((gap, odd_gap))
}

/// Block matrix `[[0, I], [Delta - omega0^2, -gamma (delta_{-N} + delta_N)]]`.
pub fn drift_matrix<T: Real>(cfg: &ChainConfig<T>) -> DenseMatrix<T> {
    let n = cfg.sites();
    let w02 = cfg.omega0() * cfg.omega0();
    let mut a = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = T::one();
        a[(n + i, i)] = -w02 - T::lit(2.0);
        if i > 0 {
            a[(n + i, i - 1)] = T::one();
        } else {
            a[(n + i, i)] += T::one();
        }
        if i + 1 < n {
            a[(n + i, i + 1)] = T::one();
        } else {
            a[(n + i, i)] += T::one();
        }
    }
    a[(n, n)] -= cfg.gamma();
    a[(2 * n - 1, 2 * n - 1)] -= cfg.gamma();
    a
}

/// Eigenvalues of a real dense matrix (computed in double precision).
pub fn eigenvalues<T: Real>(a: &DenseMatrix<T>) -> Vec<Complex<f64>> {
    let m = DMatrix::from_row_slice(a.rows(), a.cols(), &a.as_slice().iter().map(|v| v.as_f64()).collect::<Vec<_>>());
    m.complex_eigenvalues().iter().copied().collect()
}

/// `lambda_N = -max Re(spec A)`.
pub fn decay_rate<T: Real>(a: &DenseMatrix<T>) -> f64 {
    -eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Nodes and weights of the 8-point Gauss-Legendre rule on `[0, 1]`.
fn gauss_legendre_8() -> [(f64, f64); 8] {
    let x = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    let w = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut out = [(0.0, 0.0); 8];
    for k in 0..4 {
        out[2 * k] = (0.5 * (1.0 - x[k]), 0.5 * w[k]);
        out[2 * k + 1] = (0.5 * (1.0 + x[k]), 0.5 * w[k]);
    }
    out
}

/// Periodic orbit of the linear (`nu = 0`) chain from the monodromy representation.
#[derive(Debug, Clone)]
pub struct MonodromySolution<T> {
    /// `z* = (I - e^{A theta})^{-1} int_0^theta e^{A(theta - s)} F(s) ds` at `t = 0`.
    pub strobe: ChainState<T>,
    /// Harmonics of one period integrated from `z*`.
    pub solution: PeriodicSolution<T>,
    pub monodromy: DenseMatrix<T>,
}

/// Number of quadrature panels per period for the forcing integral.
const MONODROMY_PANELS: usize = 64;

pub fn linear_periodic_via_monodromy<T: Real>(
    cfg: &ChainConfig<T>,
    icfg: &IntegratorConfig,
) -> Result<MonodromySolution<T>, TimeDomainError> {
    if cfg.nu() != T::zero() {
        return Err(TimeDomainError::Usage("the monodromy solve is linear: set nu = 0".into()));
    }
    if cfg.gamma() <= T::zero() {
        return Err(TimeDomainError::Singular);
    }
    let n = cfg.sites();
    let dim = 2 * n;
    let a = drift_matrix(cfg);
    let theta = cfg.theta();
    let monodromy = a.scale(theta).expm()?;
    let panels = MONODROMY_PANELS;
    let h = theta / T::from_usize_lossy(panels);
    let step = a.scale(h).expm()?;
    let rule = gauss_legendre_8();
    // column of e^{A h (1 - tau)} hit by the forcing (momentum of the driven site)
    let driven = n + n / 2;
    let cols: Vec<Vec<T>> = rule
        .iter()
        .map(|&(tau, _)| a.scale(h * (T::one() - T::lit(tau))).expm().map(|e| e.column(driven)))
        .collect::<Result<_, _>>()?;
    let mut acc = vec![T::zero(); dim];
    for j in 0..panels {
        let mut g = vec![T::zero(); dim];
        for (r, &(tau, w)) in rule.iter().enumerate() {
            let s = (T::from_usize_lossy(j) + T::lit(tau)) * h;
            let f = cfg.forcing().value(s, cfg.omega()) * T::lit(w) * h;
            for i in 0..dim {
                g[i] += cols[r][i] * f;
            }
        }
        let mut next = step.mul_vec(&acc);
        for i in 0..dim {
            next[i] += g[i];
        }
        acc = next;
    }
    let lhs = DenseMatrix::identity(dim).sub(&monodromy);
    let z = lhs.solve(&acc).map_err(|_| TimeDomainError::Singular)?;
    let strobe = ChainState {
        q: z[..n].to_vec(),
        p: z[n..].to_vec(),
        t: T::zero(),
    };
    let one = IntegratorConfig {
        periods: 1,
        dense_stride: 1,
        ..*icfg
    };
    let traj = integrate(cfg, &strobe, &one)?;
    let grid = icfg.steps_per_period;
    let max_harmonic = (grid / 16 - 1).min((4 * cfg.forcing().max_mode()).max(16));
    let samples: Vec<Vec<T>> = traj.dense[..grid].iter().map(|s| s.q.clone()).collect();
    let colloc = crate::spectral::Collocation::new(grid);
    let field = colloc.analyze(&samples, cfg.half_width(), max_harmonic, cfg.omega())?;
    Ok(MonodromySolution {
        strobe,
        solution: PeriodicSolution::new(field, cfg),
        monodromy,
    })
}

/// `d_k = ||q(t_k) - q_p(t_k)|| + ||p(t_k) - p_p(t_k)||` at every strobe.
pub fn stroboscopic_distance<T: Real>(traj: &Trajectory<T>, sol: &PeriodicSolution<T>) -> Vec<T> {
    traj.strobes
        .iter()
        .map(|s| {
            let p = sol.state_at(s.t);
            let dq: T = s.q.iter().zip(&p.q).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            let dp: T = s.p.iter().zip(&p.p).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
            dq.sqrt() + dp.sqrt()
        })
        .collect()
}

/// Least-squares exponential rate of `d_k ~ C e^{-rate k theta}` over strobes
/// `skip..` whose distance exceeds `floor`.
pub fn fit_decay_rate<T: Real>(distances: &[T], theta: T, skip: usize, floor: T) -> Option<f64> {
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, d)| **d > floor)
        .map(|(k, d)| (k as f64 * theta.as_f64(), d.as_f64().ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let (slope, _, _) = linear_fit(&pts);
    Some(-slope)
}

/// Ordinary least squares `y = slope x + intercept`; returns `(slope, intercept, r^2)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Period map `z -> Phi_theta(z)` and its Jacobian, integrated with the same RK4 steps.
pub fn period_map_with_jacobian<T: Real>(
    cfg: &ChainConfig<T>,
    start: &ChainState<T>,
    steps: usize,
) -> Result<(ChainState<T>, DenseMatrix<T>), TimeDomainError> {
    let n = cfg.sites();
    let dim = 2 * n;
    let h = cfg.theta() / T::from_usize_lossy(steps);
    // y = [z, X column-major]
    let len = dim + dim * dim;
    let mut y = vec![T::zero(); len];
    y[..dim].copy_from_slice(&start.to_vector());
    for c in 0..dim {
        y[dim + c * dim + c] = T::one();
    }
    let mut acc = vec![T::zero(); n];
    let mut jh = vec![T::zero(); n];
    let w02 = cfg.omega0() * cfg.omega0();
    let nu = cfg.nu();
    let mut rhs = |t: T, y: &[T], dy: &mut [T]| {
        let (q, p) = y[..dim].split_at(n);
        eom_rhs_into(q, p, t, cfg, &mut acc);
        dy[..n].copy_from_slice(p);
        dy[n..dim].copy_from_slice(&acc);
        for c in 0..dim {
            let col = &y[dim + c * dim..dim + (c + 1) * dim];
            let (xq, xp) = col.split_at(n);
            let out = &mut dy[dim + c * dim..dim + (c + 1) * dim];
            out[..n].copy_from_slice(xp);
            if nu != T::zero() {
                force_jacobian_apply(q, xq, cfg, &mut jh);
            }
            for i in 0..n {
                let left = if i == 0 { xq[0] } else { xq[i - 1] };
                let right = if i + 1 == n { xq[n - 1] } else { xq[i + 1] };
                let mut v = (right - xq[i]) - (xq[i] - left) - w02 * xq[i];
                if nu != T::zero() {
                    v -= nu * jh[i];
                }
                out[n + i] = v;
            }
            out[n] -= cfg.gamma() * xp[0];
            out[dim - 1] -= cfg.gamma() * xp[n - 1];
        }
    };
    let mut k1 = vec![T::zero(); len];
    let mut k2 = vec![T::zero(); len];
    let mut k3 = vec![T::zero(); len];
    let mut k4 = vec![T::zero(); len];
    let mut tmp = vec![T::zero(); len];
    let half = T::lit(0.5);
    for s in 0..steps {
        let t = start.t + T::from_usize_lossy(s) * h;
        rhs(t, &y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + half * h * k1[i];
        }
        rhs(t + half * h, &tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + half * h * k2[i];
        }
        rhs(t + half * h, &tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..len {
            y[i] += h / T::lit(6.0) * (k1[i] + T::lit(2.0) * (k2[i] + k3[i]) + k4[i]);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(TimeDomainError::BlowUp {
            time: start.t.as_f64(),
        });
    }
    let end = ChainState::from_vector(&y[..dim], start.t + cfg.theta()).map_err(|e| TimeDomainError::Usage(e.to_string()))?;
    let jac = DenseMatrix::from_fn(dim, dim, |r, c| y[dim + c * dim + r]);
    Ok((end, jac))
}

/// Outcome of a Newton solve on the period map.
#[derive(Debug, Clone)]
pub struct NewtonResult<T> {
    pub state: ChainState<T>,
    pub iterations: usize,
    pub residual: T,
    pub monodromy: DenseMatrix<T>,
}

/// Newton iteration on `G(z) = Phi_theta(z) - z` with backtracking on `||G||`.
pub fn newton_periodic<T: Real>(
    cfg: &ChainConfig<T>,
    guess: &ChainState<T>,
    tol: T,
    max_iter: usize,
    steps_per_period: usize,
) -> Result<NewtonResult<T>, TimeDomainError> {
    check_state(cfg, guess)?;
    let dim = 2 * cfg.sites();
    let mut z = guess.clone();
    let residual_of = |z: &ChainState<T>, end: &ChainState<T>| -> (Vec<T>, T) {
        let a = end.to_vector();
        let b = z.to_vector();
        let g: Vec<T> = a.iter().zip(&b).map(|(x, y)| *x - *y).collect();
        let norm = g.iter().map(|v| *v * *v).sum::<T>().sqrt();
        (g, norm)
    };
    let (mut end, mut jac) = period_map_with_jacobian(cfg, &z, steps_per_period)?;
    let (mut g, mut norm) = residual_of(&z, &end);
    for iteration in 0..=max_iter {
        if norm < tol {
            return Ok(NewtonResult {
                state: z,
                iterations: iteration,
                residual: norm,
                monodromy: jac,
            });
        }
        if iteration == max_iter {
            break;
        }
        let lhs = jac.sub(&DenseMatrix::identity(dim));
        let rhs: Vec<T> = g.iter().map(|v| -*v).collect();
        let delta = lhs.solve(&rhs).map_err(|_| TimeDomainError::Singular)?;
        let mut step = T::one();
        let base = z.to_vector();
        loop {
            let trial: Vec<T> = base.iter().zip(&delta).map(|(a, d)| *a + step * *d).collect();
            let tz = ChainState::from_vector(&trial, z.t).map_err(|e| TimeDomainError::Usage(e.to_string()))?;
            let attempt = period_map_with_jacobian(cfg, &tz, steps_per_period);
            if let Ok((e, j)) = attempt {
                let (tg, tn) = residual_of(&tz, &e);
                if tn < norm || step < T::lit(1e-3) {
                    z = tz;
                    end = e;
                    jac = j;
                    g = tg;
                    norm = tn;
                    break;
                }
            }
            step *= T::lit(0.5);
            if step < T::lit(1e-4) {
                return Err(TimeDomainError::NonConvergence {
                    iterations: iteration,
                    residual: norm.as_f64(),
                });
            }
        }
    }
    let _ = end;
    Err(TimeDomainError::NonConvergence {
        iterations: max_iter,
        residual: norm.as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{eom_rhs, ForcingSpectrum};
    use crate::potential::Potential;
    use crate::spectral::{default_grid, harmonic_base_solution, series_solve, SolverOptions};

    fn single(gamma: f64, omega: f64, amp: f64) -> ChainConfig<f64> {
        ChainConfig::builder()
            .pinning_frequency(1.0)
            .damping(gamma)
            .frequency(omega)
            .forcing(ForcingSpectrum::cosine(amp).unwrap())
            .build()
            .unwrap()
    }

    /// Direct transcription of the two-exponential closed form with coefficients alpha_0, alpha_1.
    fn two_exponential(gamma: f64, w0: f64, w: f64, f: f64, q0: f64, p0: f64, t: f64) -> f64 {
        let c = |x: f64| Complex::new(x, 0.0);
        let root = c(gamma * gamma - w0 * w0).sqrt();
        let lp = c(gamma) + root;
        let lm = c(gamma) - root;
        let den = (w0 * w0 - w * w).powi(2) + 4.0 * gamma * gamma * w * w;
        let rest = q0 - f * (w0 * w0 - w * w) / den;
        let push = 2.0 * gamma * f * w * w / den - p0;
        let a0 = c(push) / (root * 2.0) - lm / (root * 2.0) * rest;
        let a1 = lp / (root * 2.0) * rest - c(push) / (root * 2.0);
        let hom = a0 * (-lp * t).exp() + a1 * (-lm * t).exp();
        hom.re + f / den * ((w0 * w0 - w * w) * (w * t).cos() + 2.0 * gamma * w * (w * t).sin())
    }

    #[test]
    fn closed_form_matches_two_exponential_formula() {
        for &(g, w) in &[(0.5, 2.0), (1.7, 0.6), (0.05, 3.0)] {
            let cfg = single(g, w, 1.0);
            for &t in &[0.0, 0.3, 2.0, 7.5] {
                let (q, _) = single_oscillator_exact(&cfg, 0.4, -0.3, t).unwrap();
                let r = two_exponential(g, 1.0, w, 1.0, 0.4, -0.3, t);
                assert!((q - r).abs() < 1e-12, "g={g} w={w} t={t}: {q} vs {r}");
            }
        }
    }

    #[test]
    fn closed_form_limits() {
        // critical damping is the limit of nearby damping values
        let (qc, pc) = single_oscillator_exact(&single(1.0, 2.0, 1.0), 0.3, 0.2, 1.7).unwrap();
        let (qn, pn) = single_oscillator_exact(&single(1.0 + 1e-7, 2.0, 1.0), 0.3, 0.2, 1.7).unwrap();
        assert!((qc - qn).abs() < 1e-6 && (pc - pn).abs() < 1e-6);
        // undamped off resonance
        let cfg = single(0.0, 2.0, 1.0);
        let t = 1.3;
        let (q, _) = single_oscillator_exact(&cfg, 0.5, 0.25, t).unwrap();
        let expect = 0.5 * t.cos() + 0.25 * t.sin() + ((2.0 * t).cos() - t.cos()) / (1.0 - 4.0);
        assert!((q - expect).abs() < 1e-14);
        // undamped resonance is the limit omega -> omega0
        let (qr, _) = single_oscillator_exact(&single(0.0, 1.0, 1.0), 0.1, 0.0, 2.0).unwrap();
        let eps = 1e-6;
        let limit = 0.1 * 2f64.cos() + ((1.0f64 + eps) * 2.0).cos().mul_add(1.0, -(2f64.cos())) / (1.0 - (1.0 + eps) * (1.0 + eps));
        assert!((qr - limit).abs() < 1e-5, "{qr} vs {limit}");
        // periodic start for gamma = 0
        let (q, p) = single_oscillator_exact(&cfg, 1.0 / (1.0 - 4.0), 0.0, cfg.theta()).unwrap();
        assert!((q + 1.0 / 3.0).abs() < 1e-14 && p.abs() < 1e-14);
        assert!(single_oscillator_exact(&cfg.with_coupling(0.1), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn steady_amplitude() {
        let cfg = single(0.5, 2.0, 1.0);
        let big = 60.0;
        let samples: Vec<f64> = (0..2000)
            .map(|k| single_oscillator_exact(&cfg, 0.0, 0.0, big + k as f64 * 0.002).unwrap().0.abs())
            .collect();
        let amp = samples.iter().cloned().fold(0.0, f64::max);
        assert!((amp - 1.0 / 13f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn integrator_matches_closed_form_with_order_four() {
        let cfg = single(0.5, 2.0, 1.0);
        let init = ChainState::new(vec![0.2], vec![-0.1], 0.0).unwrap();
        let (qe, pe) = single_oscillator_exact(&cfg, 0.2, -0.1, 10.0 * cfg.theta()).unwrap();
        let mut errs = Vec::new();
        for &steps in &[256usize, 512, 1024] {
            let icfg = IntegratorConfig {
                steps_per_period: steps,
                periods: 10,
                dense_stride: 0,
            };
            let tr = integrate(&cfg, &init, &icfg).unwrap();
            let s = tr.strobes.last().unwrap();
            errs.push(((s.q[0] - qe).powi(2) + (s.p[0] - pe).powi(2)).sqrt());
        }
        assert!(errs[2] < 1e-8, "{errs:?}");
        let r = errs[0] / errs[1];
        assert!((14.0..=18.0).contains(&r), "ratio {r}");
    }

    #[test]
    fn free_damped_energy_decreases() {
        let cfg = ChainConfig::builder()
            .half_width(3)
            .damping(0.3)
            .period(2.0)
            .forcing(ForcingSpectrum::zero())
            .build()
            .unwrap();
        let init = ChainState::new(vec![0.1, -0.2, 0.3, 0.0, 0.2, -0.1, 0.05], vec![0.0; 7], 0.0).unwrap();
        let icfg = IntegratorConfig {
            periods: 40,
            ..IntegratorConfig::default()
        };
        let tr = integrate(&cfg, &init, &icfg).unwrap();
        for w in tr.energy.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn eom_agrees_with_single_site_form() {
        let cfg = ChainConfig::builder()
            .pinning_frequency(1.2)
            .damping(0.4)
            .coupling(0.3)
            .period(2.5)
            .pinning(Potential::sin_power(1, 1.0).unwrap())
            .forcing(ForcingSpectrum::cosine(0.7).unwrap())
            .build()
            .unwrap();
        for k in 0..20 {
            let q = -1.0 + 0.1 * k as f64;
            let p = 0.5 - 0.05 * k as f64;
            let t = 0.13 * k as f64;
            let s = ChainState::new(vec![q], vec![p], t).unwrap();
            let expect = -1.44 * q - 0.8 * p - 0.3 * (2.0 * q).sin() + 0.7 * (cfg.omega() * t).cos();
            assert!((eom_rhs(&s, &cfg)[0] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn single_gap_examples() {
        let c = ChainConfig::builder()
            .pinning_frequency(1.0)
            .damping(1.0)
            .frequency(0.7)
            .forcing(ForcingSpectrum::cosine(1.0).unwrap())
            .build()
            .unwrap();
        assert_eq!(single_oscillator_gap(&c).unwrap().0, 1.0);
        let c = ChainConfig::builder()
            .pinning_frequency(2.0)
            .damping(0.1)
            .frequency(3.0)
            .forcing(ForcingSpectrum::cosine(1.0).unwrap())
            .build()
            .unwrap();
        assert!((single_oscillator_gap(&c).unwrap().0 - 4.0f64).abs() < 1e-14);
        let c = single(0.5, 2.0, 1.0);
        assert!((single_oscillator_gap(&c).unwrap().1 - 13f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn single_gap_matches_brute_scan() {
        let cases = [
            (1.0, 0.5, 2.0),
            (3.0, 0.2, 0.37),
            (5.0, 0.1, 0.9),
            (2.0, 1.5, 0.3),
            (4.0, 0.01, 0.45),
            (1.0, 0.0, 0.3),
        ];
        for &(w0, g, w) in &cases {
            let c = ChainConfig::builder()
                .pinning_frequency(w0)
                .damping(g)
                .frequency(w)
                .forcing(ForcingSpectrum::cosine(1.0).unwrap())
                .build()
                .unwrap();
            let w = c.omega();
            let phi = |m: usize| {
                let u = (m as f64 * w).powi(2);
                ((w0 * w0 - u).powi(2) + 4.0 * g * g * u).sqrt()
            };
            let all = (0..=1_000_000).map(phi).fold(f64::INFINITY, f64::min);
            let odd = (1..=1_000_000).step_by(2).map(phi).fold(f64::INFINITY, f64::min);
            let (a, b) = single_oscillator_gap(&c).unwrap();
            assert!((a - all).abs() <= 1e-12 * all.max(1.0), "{w0} {g} {w}: {a} vs {all}");
            assert!((b - odd).abs() <= 1e-12 * odd.max(1.0), "{w0} {g} {w}: {b} vs {odd}");
        }
    }

    #[test]
    fn drift_matrix_structure_and_rate() {
        let cfg = single(0.5, 3.0, 1.0);
        let a = drift_matrix(&cfg);
        assert_eq!(a.as_slice(), &[0.0, 1.0, -1.0, -1.0]);
        assert!((decay_rate(&a) - 0.5).abs() < 1e-12);
        let ev = eigenvalues(&a);
        assert!(ev.iter().all(|z| (z.im.abs() - 0.75f64.sqrt()).abs() < 1e-12));
        let free = cfg.with_half_width(3).with_damping(0.0).unwrap();
        assert!(decay_rate(&drift_matrix(&free)).abs() < 1e-10);
        let mut last = f64::INFINITY;
        for n in [2, 4, 8, 16] {
            let r = decay_rate(&drift_matrix(&cfg.with_half_width(n)));
            assert!(r > 0.0 && r < last);
            last = r;
        }
    }

    #[test]
    fn monodromy_orbit_matches_harmonic_solution() {
        let cfg = ChainConfig::builder()
            .half_width(2)
            .pinning_frequency(1.3)
            .damping(0.4)
            .frequency(2.9)
            .forcing(ForcingSpectrum::from_modes(&[(1, cx(0.3, -0.1)), (2, cx(0.05, 0.02))]).unwrap())
            .build()
            .unwrap();
        let icfg = IntegratorConfig::default();
        let mono = linear_periodic_via_monodromy(&cfg, &icfg).unwrap();
        let tr = integrate(&cfg, &mono.strobe, &IntegratorConfig { periods: 1, ..icfg }).unwrap();
        let end = &tr.strobes[1];
        let d: f64 = end
            .to_vector()
            .iter()
            .zip(mono.strobe.to_vector())
            .map(|(a, b): (&f64, f64)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
        let k = crate::greens::build_kernel_set(&cfg, 16).unwrap();
        let base = harmonic_base_solution(&cfg, &k, default_grid(16)).unwrap();
        let spectral = PeriodicSolution::new(base, &cfg);
        assert!(spectral.distance(&mono.solution).unwrap() < 1e-8);
        let zero = linear_periodic_via_monodromy(&cfg.with_forcing(ForcingSpectrum::zero()), &icfg).unwrap();
        assert!(zero.strobe.to_vector().iter().all(|v| *v == 0.0));
        assert!(linear_periodic_via_monodromy(&cfg.with_damping(0.0).unwrap(), &icfg).is_err());
    }

    #[test]
    fn newton_recovers_spectral_orbit() {
        let cfg = ChainConfig::builder()
            .half_width(2)
            .damping(0.5)
            .coupling(0.2)
            .frequency(3.0)
            .pinning(Potential::sin_power(1, 1.0).unwrap())
            .forcing(ForcingSpectrum::cosine(0.5).unwrap())
            .build()
            .unwrap();
        let (sol, _) = series_solve(&cfg, &SolverOptions::default()).unwrap();
        let guess = ChainState::at_rest(2, 0.0);
        let res = newton_periodic(&cfg, &guess, 1e-11, 30, 1024).unwrap();
        let p = sol.state_at(0.0);
        let d: f64 = res
            .state
            .to_vector()
            .iter()
            .zip(p.to_vector())
            .map(|(a, b): (&f64, f64)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(d < 1e-8, "{d}");
        let lin = cfg.with_coupling(0.0);
        let r = newton_periodic(&lin, &guess, 1e-11, 5, 1024).unwrap();
        assert!(r.iterations <= 2);
    }

    #[test]
    fn gauss_rule_is_exact_for_polynomials() {
        let r = gauss_legendre_8();
        for k in 0..16 {
            let s: f64 = r.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }
}
