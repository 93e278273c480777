//! Embedded oracle suites run by `forced-chain selftest`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use forced_chain::greens::{
    dissipative_greens, dissipative_greens_dense, infinite_greens, neumann_greens_dense, neumann_greens_eigen,
    neumann_greens_images,
};
use forced_chain::linalg::DenseMatrix;
use forced_chain::time_domain::{integrate, single_oscillator_exact, single_oscillator_gap, IntegratorConfig};
use forced_chain::{ChainConfig, ChainState, Cx, ForcingSpectrum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
}

fn rel_diff(a: &DenseMatrix<Cx<f64>>, b: &DenseMatrix<Cx<f64>>) -> f64 {
    a.sub(b).max_abs() / b.max_abs().max(f64::MIN_POSITIVE)
}

/// An off-band spectral parameter: real part away from `[-omega0^2 - 4, -omega0^2]`
/// or a nonzero imaginary part.
fn random_lambda(rng: &mut impl Rng, omega0: f64) -> Cx<f64> {
    let w2 = omega0 * omega0;
    match rng.gen_range(0..3) {
        0 => Cx::new(-w2 + rng.gen_range(0.05..5.0), 0.0),
        1 => Cx::new(-w2 - 4.0 - rng.gen_range(0.05..20.0), 0.0),
        _ => Cx::new(rng.gen_range(-10.0..3.0), rng.gen_range(0.1..3.0) * if rng.gen() { 1.0 } else { -1.0 }),
    }
}

pub fn greens_dense_oracle(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let omega0 = rng.gen_range(0.3..2.0);
        let lambda = random_lambda(&mut rng, omega0);
        let sigma = rng.gen_range(0.0..2.0);
        let n = rng.gen_range(0..=6);
        let err = match (
            dissipative_greens(lambda, sigma, omega0, n),
            dissipative_greens_dense(lambda, sigma, omega0, n),
        ) {
            (Ok(a), Ok(b)) => rel_diff(&a, &b),
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    Check {
        name: "dissipative kernel vs dense solve",
        passed: worst < 1e-12,
        worst,
        tolerance: 1e-12,
    }
}

pub fn neumann_triple(seed: u64, cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let omega0 = rng.gen_range(0.3..2.0);
        let lambda = random_lambda(&mut rng, omega0);
        let n = rng.gen_range(0..=6);
        let err = match (
            neumann_greens_images(lambda, omega0, n),
            neumann_greens_eigen(lambda, omega0, n),
            neumann_greens_dense(lambda, omega0, n),
        ) {
            (Ok(a), Ok(b), Ok(c)) => rel_diff(&a, &c).max(rel_diff(&b, &c)),
            _ => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    Check {
        name: "reflecting kernel: images vs eigen vs dense",
        passed: worst < 1e-12,
        worst,
        tolerance: 1e-12,
    }
}

/// Trapezoidal rule for the periodic integrand below, doubled until it settles.
/// Converges geometrically because the integrand is analytic and periodic.
fn periodic_trapezoid(lambda: Cx<f64>, omega0: f64, x: i64) -> Cx<f64> {
    let f = |u: f64| Cx::new((2.0 * PI * u * x as f64).cos(), 0.0) / (lambda + Cx::new(4.0 * (PI * u).sin().powi(2) + omega0 * omega0, 0.0));
    let mut k = 64usize;
    let mut prev = (0..k).map(|j| f(j as f64 / k as f64)).sum::<Cx<f64>>() / k as f64;
    loop {
        // add the midpoints of the previous rule
        let mid = (0..k).map(|j| f((j as f64 + 0.5) / k as f64)).sum::<Cx<f64>>() / k as f64;
        let next = (prev + mid) * 0.5;
        k *= 2;
        if (next - prev).norm() <= 1e-15 || k > 1 << 22 {
            return next;
        }
        prev = next;
    }
}

/// Absolute error against
/// `G(x) = int_0^1 cos(2 pi u x) / (lambda + 4 sin^2(pi u) + omega0^2) du` for off-band `lambda`.
pub fn greens_quadrature(seed: u64, points: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x51ed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let omega0 = rng.gen_range(0.5..2.0);
        let lambda = random_lambda(&mut rng, omega0);
        let x: i64 = rng.gen_range(-6..=6);
        let integral = periodic_trapezoid(lambda, omega0, x);
        let err = match infinite_greens(lambda, omega0, x) {
            Ok(g) => (g - integral).norm(),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(err);
    }
    Check {
        name: "lattice kernel vs Fourier quadrature",
        passed: worst < 1e-10,
        worst,
        tolerance: 1e-10,
    }
}

fn single_site(gamma: f64, omega: f64) -> ChainConfig<f64> {
    ChainConfig::builder()
        .pinning_frequency(1.0)
        .damping(gamma)
        .frequency(omega)
        .forcing(ForcingSpectrum::cosine(1.0).expect("nonzero amplitude"))
        .build()
        .expect("valid single-site config")
}

fn rk4_error(cfg: &ChainConfig<f64>, steps: usize, periods: usize) -> f64 {
    let init = ChainState::new(vec![0.2], vec![-0.1], 0.0).expect("one site");
    let icfg = IntegratorConfig {
        steps_per_period: steps,
        periods,
        dense_stride: 0,
    };
    let tr = integrate(cfg, &init, &icfg).expect("integrates");
    let s = tr.strobes.last().expect("strobes");
    let (q, p) = single_oscillator_exact(cfg, 0.2, -0.1, s.t).expect("N = 0");
    ((s.q[0] - q).powi(2) + (s.p[0] - p).powi(2)).sqrt()
}

pub fn rk4_order() -> Check {
    let cfg = single_site(0.5, 2.0);
    let ratio = rk4_error(&cfg, 256, 10) / rk4_error(&cfg, 512, 10);
    Check {
        name: "RK4 error ratio under step halving",
        passed: (14.0..=18.0).contains(&ratio),
        worst: ratio,
        tolerance: 16.0,
    }
}

pub fn single_site_closed_form() -> Check {
    let mut worst: f64 = 0.0;
    for &(g, w) in &[(0.5, 3.0), (1.5, 0.7), (1.0, 2.0)] {
        worst = worst.max(rk4_error(&single_site(g, w), 1024, 20));
    }
    // brute-force gaps
    for &(g, w) in &[(0.5, 2.0), (0.1, 0.37), (1.2, 0.3)] {
        let cfg = single_site(g, w);
        let (gap, odd) = single_oscillator_gap(&cfg).expect("N = 0");
        let phi = |m: usize| {
            let u = (m as f64 * w).powi(2);
            ((1.0 - u).powi(2) + 4.0 * g * g * u).sqrt()
        };
        let all = (0..100_000).map(phi).fold(f64::INFINITY, f64::min);
        let odd_scan = (1..100_000).step_by(2).map(phi).fold(f64::INFINITY, f64::min);
        worst = worst.max((gap - all).abs()).max((odd - odd_scan).abs());
    }
    Check {
        name: "single oscillator closed forms",
        passed: worst < 1e-8,
        worst,
        tolerance: 1e-8,
    }
}

pub fn run_all(seed: u64) -> Vec<Check> {
    vec![
        greens_dense_oracle(seed, 200),
        neumann_triple(seed, 200),
        greens_quadrature(seed, 50),
        rk4_order(),
        single_site_closed_form(),
    ]
}

pub fn render(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let _ = writeln!(
            s,
            "{} {:<46} worst {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance
        );
    }
    s
}
