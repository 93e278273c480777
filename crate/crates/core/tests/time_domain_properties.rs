use forced_chain::diagnostics::trajectory_energy_residual;
use forced_chain::spectral::{series_solve, SolverOptions};
use forced_chain::time_domain::{
    drift_matrix, eigenvalues, integrate, linear_periodic_via_monodromy, newton_periodic, stroboscopic_distance,
    IntegratorConfig,
};
use forced_chain::ChainState;
use proptest::prelude::*;

mod common;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn monodromy_is_contracting_for_damped_chains(d in common::draws(&[0, 1, 2, 4])) {
        let Some(cfg) = common::build(&d) else { return Ok(()) };
        let lin = cfg.with_coupling(0.0);
        let mono = linear_periodic_via_monodromy(&lin, &IntegratorConfig::default()).unwrap();
        for z in eigenvalues(&mono.monodromy) {
            prop_assert!(z.norm() < 1.0);
        }
        for z in eigenvalues(&drift_matrix(&lin)) {
            prop_assert!(z.re < 0.0);
        }
    }

    #[test]
    fn energy_balance_holds_along_trajectories(d in common::draws(&[1, 2, 4])) {
        let Some(cfg) = common::build(&d) else { return Ok(()) };
        let n = cfg.sites();
        let init = ChainState::new((0..n).map(|i| 0.1 * (i as f64).sin()).collect(), vec![0.05; n], 0.0).unwrap();
        let icfg = IntegratorConfig { periods: 8, ..IntegratorConfig::default() };
        let tr = integrate(&cfg, &init, &icfg).unwrap();
        let scale = tr.energy.iter().chain(&tr.work).fold(1.0f64, |a, b| a.max(b.abs()));
        prop_assert!(trajectory_energy_residual(&tr) < 1e-9 * scale);
    }

    #[test]
    fn linear_newton_is_one_step(d in common::draws(&[1, 2])) {
        let Some(cfg) = common::build(&d) else { return Ok(()) };
        let lin = cfg.with_coupling(0.0);
        let guess = ChainState::new(vec![0.3; lin.sites()], vec![-0.2; lin.sites()], 0.0).unwrap();
        let res = newton_periodic(&lin, &guess, 1e-10, 5, 1024).unwrap();
        prop_assert!(res.iterations <= 2);
        let mono = linear_periodic_via_monodromy(&lin, &IntegratorConfig::default()).unwrap();
        let gap: f64 = res.state.to_vector().iter().zip(mono.strobe.to_vector()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-9);
    }
}

#[test]
fn energy_residual_is_at_least_fourth_order() {
    let cfg = common::reference(2, 0.3);
    let init = ChainState::new(vec![0.3, -0.1, 0.2, 0.0, 0.1], vec![0.0; 5], 0.0).unwrap();
    let r: Vec<f64> = [256usize, 512]
        .iter()
        .map(|&s| {
            let ic = IntegratorConfig { steps_per_period: s, periods: 4, dense_stride: 0 };
            trajectory_energy_residual(&integrate(&cfg, &init, &ic).unwrap())
        })
        .collect();
    assert!(r[0] / r[1] >= 14.0, "{r:?}");
}

#[test]
fn orbit_start_stays_on_orbit() {
    let cfg = common::reference(4, 0.2);
    let (sol, _) = series_solve(&cfg, &SolverOptions::default()).unwrap();
    let icfg = IntegratorConfig { periods: 50, ..IntegratorConfig::default() };
    let tr = integrate(&cfg, &sol.state_at(0.0), &icfg).unwrap();
    let d = stroboscopic_distance(&tr, &sol);
    assert!(d.iter().all(|v| *v < 1e-9), "{:?}", d.last());
}

#[test]
fn dense_output_samples_every_stride() {
    let cfg = common::reference(1, 0.0);
    let icfg = IntegratorConfig { periods: 2, steps_per_period: 256, dense_stride: 16 };
    let tr = integrate(&cfg, &ChainState::at_rest(1, 0.0), &icfg).unwrap();
    assert_eq!(tr.dense.len(), 1 + 2 * 256 / 16);
    assert!((tr.dense[16].t - cfg.theta()).abs() < 1e-12);
    assert!(integrate(&cfg, &ChainState::at_rest(1, 0.0), &IntegratorConfig { steps_per_period: 300, ..icfg }).is_err());
}

// V = -q^2 / (1 + q^2) at nu = 1 turns q^2/2 + nu V into a double well with
// minima at q^2 = sqrt(2) - 1. Between nu0 = 0.5 and the odd radius 2 the series
// still converges, but a second periodic orbit sits in the side well.
#[test]
fn double_well_has_a_second_orbit() {
    use forced_chain::spectral::coupling_radius;
    use forced_chain::{ChainConfig, ForcingSpectrum, Potential};
    let cfg = ChainConfig::builder()
        .half_width(2)
        .damping(0.5)
        .coupling(1.0)
        .frequency(3.0)
        .pinning(Potential::rational_well(1, 1.0, -1.0).unwrap())
        .forcing(ForcingSpectrum::cosine(0.01).unwrap())
        .build()
        .unwrap();
    let r = coupling_radius(&cfg);
    assert!(r.nu0 < 1.0 && 1.0 < r.nu0_odd, "{r:?}");
    let (sol, _) = series_solve(&cfg, &SolverOptions::default()).unwrap();
    let origin = newton_periodic(&cfg, &ChainState::at_rest(2, 0.0), 1e-10, 30, 1024).unwrap();
    let bar = (2f64.sqrt() - 1.0).sqrt();
    let side = newton_periodic(&cfg, &ChainState::new(vec![bar; 5], vec![0.0; 5], 0.0).unwrap(), 1e-10, 30, 1024).unwrap();
    let dist = |a: &ChainState<f64>, b: &ChainState<f64>| {
        a.to_vector().iter().zip(b.to_vector()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    };
    let orbit = sol.state_at(0.0);
    assert!(dist(&origin.state, &orbit) < 1e-8, "{}", dist(&origin.state, &orbit));
    assert!(dist(&side.state, &orbit) > 0.1, "{}", dist(&side.state, &orbit));
    assert!(side.state.q.iter().all(|q| (q - bar).abs() < 0.05), "{:?}", side.state.q);
}
