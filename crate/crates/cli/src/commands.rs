//! One function per subcommand. Each writes its files under `spec.output.dir` and
//! returns the text to print.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use forced_chain::diagnostics::{trajectory_energy_residual, DiagnosticsReport};
use forced_chain::greens::{build_kernel_set, check_resonance};
use forced_chain::spectral::{
    coupling_radius, fixed_point_solve, series_solve, ConvergenceReport, CouplingRadius, PeriodicSolution,
};
use forced_chain::time_domain::{
    decay_rate, drift_matrix, fit_decay_rate, integrate as run_integrator, single_oscillator_gap,
    stroboscopic_distance,
};
use forced_chain::{ChainConfig, ChainState};
use serde::Serialize;

use crate::error::CliError;
use crate::output::{distances_csv, harmonics_csv, json, num, read_harmonics_csv, states_csv, write_file};
use crate::spec::{Method, RunSpec, Start};

fn out_dir(spec: &RunSpec) -> PathBuf {
    PathBuf::from(&spec.output.dir)
}

fn kv(s: &mut String, key: &str, v: f64) {
    let _ = writeln!(s, "{key:<18}{}", num(v));
}

#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    #[serde(flatten)]
    pub radius: CouplingRadius,
    /// Closed-form single-oscillator values, present when `N = 0`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_site: Option<SingleSiteGap>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SingleSiteGap {
    pub gap: f64,
    pub odd_gap: f64,
    pub nu0: f64,
    pub nu0_odd: f64,
}

pub fn gap(spec: &RunSpec) -> Result<String, CliError> {
    let cfg = spec.chain_config()?;
    let radius = coupling_radius(&cfg);
    let single_site = if cfg.half_width() == 0 {
        let (g, o) = single_oscillator_gap(&cfg)?;
        let a = radius.anharmonicity;
        let div = |v: f64| if a == 0.0 { f64::INFINITY } else { v / a };
        Some(SingleSiteGap {
            gap: g,
            odd_gap: o,
            nu0: div(g),
            nu0_odd: div(o),
        })
    } else {
        None
    };
    let mut s = String::new();
    kv(&mut s, "delta_star", radius.gap);
    kv(&mut s, "delta_star_odd", radius.odd_gap);
    kv(&mut s, "nu0", radius.nu0);
    kv(&mut s, "nu0_odd", radius.nu0_odd);
    if let Some(g) = &single_site {
        kv(&mut s, "delta_star_n0", g.gap);
        kv(&mut s, "delta_star_odd_n0", g.odd_gap);
        kv(&mut s, "nu0_n0", g.nu0);
        kv(&mut s, "nu0_odd_n0", g.nu0_odd);
    }
    write_file(&out_dir(spec).join("gap.json"), &json(&GapReport { radius, single_site }))?;
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<ConvergenceReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<ConvergenceReport>,
    /// `|||series - fixed point|||` when both ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<f64>,
}

/// Runs the configured solver(s); the returned solution is the series one when available.
pub fn solve_spec(spec: &RunSpec) -> Result<(PeriodicSolution<f64>, SolveReport), CliError> {
    let cfg = spec.chain_config()?;
    let opts = spec.solver_options();
    let series = match spec.solver.method {
        Method::Series | Method::Both => Some(series_solve(&cfg, &opts)?),
        Method::Fixed => None,
    };
    let fixed = match spec.solver.method {
        Method::Fixed | Method::Both => Some(fixed_point_solve(&cfg, &opts)?),
        Method::Series => None,
    };
    let agreement = match (&series, &fixed) {
        (Some(a), Some(b)) => Some(a.0.distance(&b.0)?),
        _ => None,
    };
    let report = SolveReport {
        series: series.as_ref().map(|s| s.1.clone()),
        fixed_point: fixed.as_ref().map(|s| s.1.clone()),
        agreement,
    };
    let sol = match (series, fixed) {
        (Some(s), _) => s.0,
        (None, Some(f)) => f.0,
        (None, None) => unreachable!("at least one method runs"),
    };
    Ok((sol, report))
}

fn describe(s: &mut String, r: &ConvergenceReport) {
    let _ = writeln!(
        s,
        "{:<12} iterations {:>5}  M {:>5}  grid {:>6}  residual {}",
        r.method.name(),
        r.iterations,
        r.max_harmonic,
        r.grid,
        num(r.residual)
    );
    for w in &r.warnings {
        let _ = writeln!(s, "  warning: {w}");
    }
}

pub fn solve(spec: &RunSpec) -> Result<String, CliError> {
    let (sol, report) = solve_spec(spec)?;
    let dir = out_dir(spec);
    write_file(&dir.join("solution.csv"), &harmonics_csv(&sol.field))?;
    write_file(&dir.join("report.json"), &json(&report))?;
    let mut s = String::new();
    if let Some(r) = &report.series {
        describe(&mut s, r);
    }
    if let Some(r) = &report.fixed_point {
        describe(&mut s, r);
    }
    if let Some(d) = report.agreement {
        kv(&mut s, "agreement", d);
    }
    kv(&mut s, "norm", sol.norm());
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryReport {
    pub steps_per_period: usize,
    pub periods: usize,
    pub step: f64,
    /// `solved` or a path to the harmonics table used for strobe distances.
    pub solution_source: String,
    pub energy_residual: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub min_distance: f64,
    /// Exponential rate fitted to the strobe distances above `1e-12`.
    pub fitted_rate: Option<f64>,
    /// Spectral decay rate of the linear drift matrix.
    pub drift_rate: f64,
}

fn load_solution(spec: &RunSpec, cfg: &ChainConfig<f64>, path: Option<&Path>) -> Result<(PeriodicSolution<f64>, String), CliError> {
    let default = out_dir(spec).join("solution.csv");
    let chosen = match path {
        Some(p) => Some(p.to_path_buf()),
        None if default.exists() => Some(default),
        None => None,
    };
    match chosen {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            Ok((read_harmonics_csv(&text, cfg)?, p.display().to_string()))
        }
        None => Ok((solve_spec(spec)?.0, "solved".into())),
    }
}

pub fn integrate(spec: &RunSpec, solution: Option<&Path>) -> Result<String, CliError> {
    let cfg = spec.chain_config()?;
    let icfg = spec.integrator.config();
    let (sol, source) = load_solution(spec, &cfg, solution)?;
    let start = match spec.integrator.start {
        Start::Rest => ChainState::at_rest(cfg.half_width(), 0.0),
        Start::Solution => sol.state_at(0.0),
    };
    let traj = run_integrator(&cfg, &start, &icfg)?;
    let d = stroboscopic_distance(&traj, &sol);
    let dir = out_dir(spec);
    write_file(&dir.join("trajectory.csv"), &states_csv(&traj.strobes))?;
    if !traj.dense.is_empty() {
        write_file(&dir.join("dense.csv"), &states_csv(&traj.dense))?;
    }
    write_file(&dir.join("distances.csv"), &distances_csv(&traj.strobes, &d))?;
    let report = TrajectoryReport {
        steps_per_period: icfg.steps_per_period,
        periods: icfg.periods,
        step: traj.step,
        solution_source: source,
        energy_residual: trajectory_energy_residual(&traj),
        initial_distance: d[0],
        final_distance: *d.last().unwrap_or(&f64::NAN),
        min_distance: d.iter().cloned().fold(f64::INFINITY, f64::min),
        fitted_rate: fit_decay_rate(&d, cfg.theta(), d.len() / 10, 1e-12),
        drift_rate: decay_rate(&drift_matrix(&cfg)),
    };
    write_file(&dir.join("trajectory.json"), &json(&report))?;
    let mut s = String::new();
    kv(&mut s, "periods", report.periods as f64);
    kv(&mut s, "final_distance", report.final_distance);
    kv(&mut s, "energy_residual", report.energy_residual);
    kv(&mut s, "drift_rate", report.drift_rate);
    if let Some(r) = report.fitted_rate {
        kv(&mut s, "fitted_rate", r);
    }
    Ok(s)
}

pub fn diagnose(spec: &RunSpec) -> Result<String, CliError> {
    let cfg = spec.chain_config()?;
    let mut single = spec.clone();
    if single.solver.method == Method::Both {
        single.solver.method = Method::Series;
    }
    let (sol, _) = solve_spec(&single)?;
    let report = DiagnosticsReport::build(&sol, &cfg, &spec.diagnostics.scan, &spec.solver_options())?;
    let dir = out_dir(spec);
    let text = report.to_text();
    write_file(&dir.join("diagnostics.json"), &report.to_json())?;
    write_file(&dir.join("diagnostics.txt"), &text)?;
    Ok(text)
}

/// `m,x,y,re,im` for the kernels `H_m`, `m = 0..=M`.
pub fn greens_dump(spec: &RunSpec, harmonics: Option<usize>) -> Result<String, CliError> {
    let cfg = spec.chain_config()?;
    let m_max = harmonics
        .or(spec.solver.harmonics)
        .unwrap_or_else(|| (4 * cfg.forcing().max_mode()).max(16));
    check_resonance(&cfg, m_max)?;
    let k = build_kernel_set(&cfg, m_max)?;
    let n = cfg.half_width() as i64;
    let mut s = String::from("m,x,y,re,im\n");
    for m in 0..=m_max {
        let t = k.table(m);
        for i in 0..cfg.sites() {
            for j in 0..cfg.sites() {
                let v = t[(i, j)];
                let _ = writeln!(s, "{},{},{},{},{}", m, i as i64 - n, j as i64 - n, num(v.re), num(v.im));
            }
        }
    }
    write_file(&out_dir(spec).join("greens.csv"), &s)?;
    Ok(format!("wrote {} kernels on {} sites\n", m_max + 1, cfg.sites()))
}
