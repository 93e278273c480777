//! Work, dissipation, energy balance and localization checks on computed orbits.
//!
//! Period integrals over a [`PeriodicSolution`] are evaluated as sums over harmonics,
//! never by time quadrature.

use std::fmt::Write as _;

use num_traits::Float;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{hamiltonian, ChainConfig, ChainState};
use crate::scalar::Real;
use crate::spectral::{
    coupling_radius, even_harmonic_residual, series_solve, Collocation, CouplingRadius, HarmonicField,
    PeriodicSolution, SolverOptions, SpectralError,
};
use crate::time_domain::{linear_fit, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("decay fit needs N >= 4, got N = {half_width}")]
    TooNarrow { half_width: usize },
    #[error("site profile underflows; fewer than two sites above 1e-300")]
    Underflow,
    #[error("solution has {got} sites, configuration has {expected}")]
    Shape { expected: usize, got: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn check_shape<T: Real>(sol: &PeriodicSolution<T>, cfg: &ChainConfig<T>) -> Result<(), DiagnosticsError> {
    if sol.field.sites() != cfg.sites() {
        return Err(DiagnosticsError::Shape {
            expected: cfg.sites(),
            got: sol.field.sites(),
        });
    }
    Ok(())
}

/// Period-mean power `(1/theta) int F p_0 dt = sum_{m >= 1} 2 Re(conj(F_m) i m omega q_0(m))`.
pub fn work_per_period<T: Real>(sol: &PeriodicSolution<T>, cfg: &ChainConfig<T>) -> T {
    let f = &sol.field;
    let centre = cfg.half_width();
    let two = T::lit(2.0);
    let top = cfg.forcing().max_mode().min(f.max_harmonic());
    (1..=top)
        .map(|m| {
            let mw = T::from_usize_lossy(m) * f.omega();
            let p = f.get(centre, m as i64) * num_complex::Complex::new(T::zero(), mw);
            two * (cfg.forcing().coefficient(m as i64).conj() * p).re
        })
        .sum()
}

/// `(1/theta) int p_i^2 dt = 2 sum_{m >= 1} (m omega)^2 |q_i(m)|^2`.
fn mean_square_momentum<T: Real>(f: &HarmonicField<T>, i: usize) -> T {
    let two = T::lit(2.0);
    (1..=f.max_harmonic())
        .map(|m| {
            let mw = T::from_usize_lossy(m) * f.omega();
            two * mw * mw * f.get(i, m as i64).norm_sqr()
        })
        .sum()
}

/// `(gamma int_0^theta p_{-N}^2, gamma int_0^theta p_N^2)`.
pub fn boundary_dissipation<T: Real>(sol: &PeriodicSolution<T>, cfg: &ChainConfig<T>) -> (T, T) {
    let f = &sol.field;
    let scale = cfg.gamma() * sol.theta;
    (
        scale * mean_square_momentum(f, 0),
        scale * mean_square_momentum(f, f.sites() - 1),
    )
}

/// `|gamma int (p_{-N}^2 + p_N^2) - theta W_N|` over one period.
pub fn energy_balance_residual<T: Real>(sol: &PeriodicSolution<T>, cfg: &ChainConfig<T>) -> T {
    let (l, r) = boundary_dissipation(sol, cfg);
    Float::abs(l + r - sol.theta * work_per_period(sol, cfg))
}

/// Worst `|H(t_k) - H(0) + gamma int (p_{-N}^2 + p_N^2) - int p_0 F|` over the strobes.
pub fn trajectory_energy_residual<T: Real>(traj: &Trajectory<T>) -> T {
    let e0 = traj.energy[0];
    (0..traj.energy.len())
        .map(|k| {
            Float::abs(traj.energy[k] - e0 + traj.dissipation_left[k] + traj.dissipation_right[k] - traj.work[k])
        })
        .fold(T::zero(), T::max)
}

/// Per-site localization data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub x: i64,
    /// `max_t |q_x(t)|` on the collocation grid.
    pub peak: f64,
    /// `(1/theta) int p_x^2 dt`.
    pub kinetic: f64,
}

/// Fit of `max_t |q_x| ~ A e^{-rho |x|}` over `2 <= |x| <= N - 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub rate: f64,
    pub r_squared: f64,
    /// Half the fitted slope of `log (1/theta) int p_x^2`, so it is comparable to `rate`.
    pub kinetic_rate: f64,
    pub kinetic_r_squared: f64,
    pub profile: Vec<SiteProfile>,
}

const UNDERFLOW: f64 = 1e-300;

pub fn decay_fit<T: Real>(sol: &PeriodicSolution<T>) -> Result<DecayFit, DiagnosticsError> {
    let f = &sol.field;
    let n = f.half_width();
    if n < 4 {
        return Err(DiagnosticsError::TooNarrow { half_width: n });
    }
    let colloc = Collocation::new(f.grid());
    let samples = colloc.synthesize(f)?;
    let profile: Vec<SiteProfile> = (0..f.sites())
        .map(|i| SiteProfile {
            x: i as i64 - n as i64,
            peak: samples.iter().map(|s| s[i].as_f64().abs()).fold(0.0, f64::max),
            kinetic: mean_square_momentum(f, i).as_f64(),
        })
        .collect();
    let window = |p: &&SiteProfile| (2..=n as i64 - 2).contains(&p.x.abs());
    let peaks: Vec<(f64, f64)> = profile
        .iter()
        .filter(window)
        .filter(|p| p.peak > UNDERFLOW)
        .map(|p| (p.x.abs() as f64, p.peak.ln()))
        .collect();
    let kinetic: Vec<(f64, f64)> = profile
        .iter()
        .filter(window)
        .filter(|p| p.kinetic > UNDERFLOW)
        .map(|p| (p.x.abs() as f64, p.kinetic.ln()))
        .collect();
    let distinct = |pts: &[(f64, f64)]| {
        let first = pts.first().map(|p| p.0);
        pts.iter().any(|p| Some(p.0) != first)
    };
    if !distinct(&peaks) || !distinct(&kinetic) {
        return Err(DiagnosticsError::Underflow);
    }
    let (slope, intercept, r2) = linear_fit(&peaks);
    let (kslope, _, kr2) = linear_fit(&kinetic);
    Ok(DecayFit {
        amplitude: intercept.exp(),
        rate: -slope,
        r_squared: r2,
        kinetic_rate: -0.5 * kslope,
        kinetic_r_squared: kr2,
        profile,
    })
}

/// Period-mean Hamiltonian, averaged over the collocation grid (exact for band-limited
/// integrands up to the grid's aliasing limit).
pub fn mean_energy<T: Real>(sol: &PeriodicSolution<T>, cfg: &ChainConfig<T>) -> Result<T, DiagnosticsError> {
    check_shape(sol, cfg)?;
    let colloc = Collocation::new(sol.field.grid());
    let q = colloc.synthesize(&sol.field)?;
    let p = colloc.synthesize_momentum(&sol.field)?;
    let total: T = q
        .into_iter()
        .zip(p)
        .map(|(q, p)| hamiltonian(&ChainState { q, p, t: T::zero() }, cfg))
        .sum();
    Ok(total / T::from_usize_lossy(sol.field.grid()))
}

/// One row of a scan over the half-width `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub half_width: usize,
    pub work: f64,
    pub dissipation_left: f64,
    pub dissipation_right: f64,
    pub mean_energy: f64,
    pub decay_rate: Option<f64>,
    pub iterations: usize,
}

fn scan_row<T: Real>(cfg: &ChainConfig<T>, opts: &SolverOptions<T>) -> Result<ScanRow, DiagnosticsError> {
    let (sol, report) = series_solve(cfg, opts)?;
    let (l, r) = boundary_dissipation(&sol, cfg);
    Ok(ScanRow {
        half_width: cfg.half_width(),
        work: work_per_period(&sol, cfg).as_f64(),
        dissipation_left: l.as_f64(),
        dissipation_right: r.as_f64(),
        mean_energy: mean_energy(&sol, cfg)?.as_f64(),
        decay_rate: decay_fit(&sol).ok().map(|d| d.rate),
        iterations: report.iterations,
    })
}

/// Solves `template` at every half-width in `ns` (in parallel; rows keep the order of `ns`).
pub fn half_width_scan<T: Real>(
    template: &ChainConfig<T>,
    ns: &[usize],
    opts: &SolverOptions<T>,
) -> Result<Vec<ScanRow>, DiagnosticsError> {
    ns.par_iter().map(|&n| scan_row(&template.with_half_width(n), opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDecay {
    pub rows: Vec<ScanRow>,
    /// `W` at the largest `N` over `W` at the smallest.
    pub ratio: f64,
    pub monotone: bool,
}

pub fn work_decay_scan<T: Real>(
    template: &ChainConfig<T>,
    ns: &[usize],
    opts: &SolverOptions<T>,
) -> Result<WorkDecay, DiagnosticsError> {
    let rows = half_width_scan(template, ns, opts)?;
    Ok(work_decay_summary(rows))
}

fn by_half_width(mut rows: Vec<ScanRow>) -> Vec<ScanRow> {
    rows.sort_by_key(|r| r.half_width);
    rows
}

fn work_decay_summary(rows: Vec<ScanRow>) -> WorkDecay {
    let rows = by_half_width(rows);
    let ratio = match (rows.first(), rows.last()) {
        (Some(a), Some(b)) => b.work / a.work,
        _ => f64::NAN,
    };
    let monotone = rows.windows(2).all(|w| w[1].work <= w[0].work);
    WorkDecay { rows, ratio, monotone }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub rows: Vec<ScanRow>,
    /// `max_N <H>` over `<H>` at the largest `N`.
    pub ratio: f64,
    pub saturated: bool,
}

/// Saturation threshold for the period-mean energy across `N`.
pub const SATURATION: f64 = 1.05;

pub fn uniformity_scan<T: Real>(
    template: &ChainConfig<T>,
    ns: &[usize],
    opts: &SolverOptions<T>,
) -> Result<Uniformity, DiagnosticsError> {
    let rows = half_width_scan(template, ns, opts)?;
    Ok(uniformity_summary(rows))
}

fn uniformity_summary(rows: Vec<ScanRow>) -> Uniformity {
    let rows = by_half_width(rows);
    let last = rows.last().map(|r| r.mean_energy).unwrap_or(f64::NAN);
    let max = rows.iter().map(|r| r.mean_energy).fold(f64::NEG_INFINITY, f64::max);
    let ratio = max / last;
    Uniformity {
        rows,
        ratio,
        saturated: ratio <= SATURATION,
    }
}

/// Everything the `diagnose` command reports about one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub half_width: usize,
    pub nu: f64,
    pub work: f64,
    pub dissipation_left: f64,
    pub dissipation_right: f64,
    pub energy_residual: f64,
    /// `energy_residual / max(1, theta W)`.
    pub energy_residual_relative: f64,
    pub mean_energy: f64,
    pub decay: Option<DecayFit>,
    pub even_harmonic_residual: f64,
    pub radius: CouplingRadius,
    pub scan: Vec<ScanRow>,
}

impl DiagnosticsReport {
    /// Assembles the report; `scan` lists extra half-widths to re-solve (may be empty).
    pub fn build<T: Real>(
        sol: &PeriodicSolution<T>,
        cfg: &ChainConfig<T>,
        scan: &[usize],
        opts: &SolverOptions<T>,
    ) -> Result<Self, DiagnosticsError> {
        check_shape(sol, cfg)?;
        let work = work_per_period(sol, cfg);
        let (l, r) = boundary_dissipation(sol, cfg);
        let residual = energy_balance_residual(sol, cfg).as_f64();
        let theta_w = (sol.theta * work).as_f64();
        let decay = match decay_fit(sol) {
            Ok(d) => Some(d),
            Err(DiagnosticsError::TooNarrow { .. }) | Err(DiagnosticsError::Underflow) => None,
            Err(e) => return Err(e),
        };
        let rows = if scan.is_empty() {
            Vec::new()
        } else {
            half_width_scan(cfg, scan, opts)?
        };
        Ok(Self {
            half_width: cfg.half_width(),
            nu: cfg.nu().as_f64(),
            work: work.as_f64(),
            dissipation_left: l.as_f64(),
            dissipation_right: r.as_f64(),
            energy_residual: residual,
            energy_residual_relative: residual / theta_w.max(1.0),
            mean_energy: mean_energy(sol, cfg)?.as_f64(),
            decay,
            even_harmonic_residual: even_harmonic_residual(&sol.field).as_f64(),
            radius: coupling_radius(cfg),
            scan: rows,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: f64| {
            let _ = writeln!(s, "{k:<26}{v:>24.16e}");
        };
        line("half_width", self.half_width as f64);
        line("nu", self.nu);
        line("work", self.work);
        line("dissipation_left", self.dissipation_left);
        line("dissipation_right", self.dissipation_right);
        line("energy_residual", self.energy_residual);
        line("energy_residual_relative", self.energy_residual_relative);
        line("mean_energy", self.mean_energy);
        line("even_harmonic_residual", self.even_harmonic_residual);
        line("gap", self.radius.gap);
        line("odd_gap", self.radius.odd_gap);
        line("nu0", self.radius.nu0);
        line("nu0_odd", self.radius.nu0_odd);
        if let Some(d) = &self.decay {
            line("decay_amplitude", d.amplitude);
            line("decay_rate", d.rate);
            line("decay_r_squared", d.r_squared);
            line("kinetic_decay_rate", d.kinetic_rate);
        }
        if !self.scan.is_empty() {
            let _ = writeln!(
                s,
                "\n{:>6} {:>24} {:>24} {:>24} {:>24}",
                "N", "work", "dissipation", "mean_energy", "decay_rate"
            );
            for r in &self.scan {
                let rate = r.decay_rate.map(|v| format!("{v:.16e}")).unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "{:>6} {:>24.16e} {:>24.16e} {:>24.16e} {:>24}",
                    r.half_width,
                    r.work,
                    r.dissipation_left + r.dissipation_right,
                    r.mean_energy,
                    rate
                );
            }
        }
        s
    }
}
