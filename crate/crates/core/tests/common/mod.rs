#![allow(dead_code)]

use forced_chain::spectral::coupling_radius;
use forced_chain::{ChainConfig, Cx, ForcingSpectrum, Potential};
use proptest::prelude::*;

/// Parameters of an admissible chain. `nu_frac` is `nu / nu0`.
#[derive(Debug, Clone)]
pub struct Draw {
    pub half_width: usize,
    pub omega0: f64,
    pub gamma: f64,
    pub omega: f64,
    pub pinning: u8,
    pub coupled: bool,
    pub f1: (f64, f64),
    pub nu_frac: f64,
}

pub fn draws(widths: &'static [usize]) -> impl Strategy<Value = Draw> {
    (
        prop::sample::select(widths),
        0.5f64..2.0,
        0.1f64..1.0,
        0.2f64..6.0,
        0u8..3,
        any::<bool>(),
        (0.05f64..0.5, -0.5f64..0.5),
        0.0f64..0.8,
    )
        .prop_map(|(half_width, omega0, gamma, omega, pinning, coupled, f1, nu_frac)| Draw {
            half_width,
            omega0,
            gamma,
            omega,
            pinning,
            coupled,
            f1,
            nu_frac,
        })
}

/// Builds the chain, or `None` when the resonance gap is at most 0.2.
pub fn build(d: &Draw) -> Option<ChainConfig<f64>> {
    let pinning = match d.pinning {
        0 => Potential::sin_power(1, 1.0).unwrap(),
        1 => Potential::rational_well(1, 1.0, 0.5).unwrap(),
        _ => Potential::skew_sine(0.5),
    };
    let interaction = if d.coupled {
        Potential::sin_power(1, 0.25).unwrap()
    } else {
        Potential::zero()
    };
    let cfg = ChainConfig::builder()
        .half_width(d.half_width)
        .pinning_frequency(d.omega0)
        .damping(d.gamma)
        .frequency(d.omega)
        .pinning(pinning)
        .interaction(interaction)
        .forcing(ForcingSpectrum::from_modes(&[(1, Cx::new(d.f1.0, d.f1.1))]).unwrap())
        .build()
        .unwrap();
    let r = coupling_radius(&cfg);
    (r.gap > 0.2).then(|| cfg.with_coupling(d.nu_frac * r.nu0))
}

/// The reference chain: `omega0 = 1`, `omega = 3`, `gamma = 0.5`, `V = sin^2`.
pub fn reference(n: usize, nu: f64) -> ChainConfig<f64> {
    ChainConfig::builder()
        .half_width(n)
        .damping(0.5)
        .coupling(nu)
        .frequency(3.0)
        .pinning(Potential::sin_power(1, 1.0).unwrap())
        .forcing(ForcingSpectrum::cosine(1.0).unwrap())
        .build()
        .unwrap()
}
