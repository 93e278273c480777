use forced_chain::diagnostics::{
    boundary_dissipation, decay_fit, energy_balance_residual, uniformity_scan, work_decay_scan, work_per_period,
};
use forced_chain::greens::decay_base;
use forced_chain::spectral::{coupling_radius, series_solve, SolverOptions};
use forced_chain::Cx;
use proptest::prelude::*;

mod common;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn work_equals_boundary_dissipation(d in common::draws(&[2, 4, 8, 16])) {
        let Some(cfg) = common::build(&d) else { return Ok(()) };
        let (sol, _) = series_solve(&cfg, &SolverOptions::default()).unwrap();
        let w = work_per_period(&sol, &cfg);
        prop_assert!(energy_balance_residual(&sol, &cfg) < 1e-9 * (cfg.theta() * w).max(1.0));
        let (l, r) = boundary_dissipation(&sol, &cfg);
        prop_assert!(l >= 0.0 && r >= 0.0);
    }

    #[test]
    fn decay_rate_is_positive(d in common::draws(&[8, 16])) {
        let Some(cfg) = common::build(&d) else { return Ok(()) };
        let half = cfg.with_coupling(cfg.nu().min(0.5 * coupling_radius(&cfg).nu0));
        let (sol, _) = series_solve(&half, &SolverOptions::default()).unwrap();
        let fit = decay_fit(&sol).unwrap();
        prop_assert!(fit.rate > 0.0, "{}", fit.rate);
    }
}

#[test]
fn work_is_positive_when_resolvable() {
    for n in [0, 1, 2, 4] {
        let cfg = common::reference(n, 0.2);
        let (sol, _) = series_solve(&cfg, &SolverOptions::default()).unwrap();
        assert!(work_per_period(&sol, &cfg) > 0.0, "N = {n}");
    }
}

#[test]
fn linear_work_decays_geometrically() {
    let scan = work_decay_scan(&common::reference(4, 0.0), &[4, 8, 16, 32, 64], &SolverOptions::default()).unwrap();
    assert!(scan.monotone && scan.ratio < 0.1);
    let phi: f64 = decay_base(Cx::new(-9.0, 0.0), 1.0).unwrap().norm();
    // W_N is dominated by |H(N, 0)|^2 ~ phi^{-2N}
    let w = |i: usize| scan.rows[i].work;
    let per_site = (w(1) / w(2)).ln() / 8.0;
    assert!((per_site - 2.0 * phi.ln()).abs() < 0.05 * 2.0 * phi.ln(), "{per_site}");
}

#[test]
fn decay_rate_slows_towards_the_band_edge() {
    let rho = |omega: f64| {
        let cfg = forced_chain::ChainConfig::builder()
            .half_width(16)
            .damping(0.5)
            .frequency(omega)
            .forcing(forced_chain::ForcingSpectrum::cosine(1.0).unwrap())
            .build()
            .unwrap();
        decay_fit(&series_solve(&cfg, &SolverOptions::default()).unwrap().0).unwrap().rate
    };
    let rates: Vec<f64> = [4.0, 3.0, 2.6, 2.4].iter().map(|&w| rho(w)).collect();
    for w in rates.windows(2) {
        assert!(w[1] < w[0], "{rates:?}");
    }
}

#[test]
fn period_mean_energy_saturates() {
    let opts = SolverOptions::default();
    let u = uniformity_scan(&common::reference(4, 0.0), &[2, 4, 8, 16, 32], &opts).unwrap();
    assert!(u.saturated, "{}", u.ratio);
    let nu = 0.5 * coupling_radius(&common::reference(4, 0.0)).nu0;
    let u = uniformity_scan(&common::reference(4, nu), &[2, 4, 8, 16, 32], &opts).unwrap();
    assert!(u.saturated, "{}", u.ratio);
}
