//! Scalar potentials with bounded second derivative.
//!
//! A [`Potential`] is described by its first and second derivatives plus a
//! certified bound on `sup |V''|`. The built-in families carry closed-form values
//! and exact bounds; [`Potential::custom`] accepts arbitrary callables and
//! recovers `V` by quadrature of `V'` with `V(0) = 0` when no value is supplied.

use std::fmt;
use std::sync::Arc;

use num_traits::Float;
use thiserror::Error;

use crate::quad::adaptive_simpson;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential parameter `{name}` is invalid: {reason}")]
    Parameter { name: &'static str, reason: String },
}

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Clone)]
pub struct CustomPotential<T> {
    value: Option<ScalarFn<T>>,
    first: ScalarFn<T>,
    second: ScalarFn<T>,
    bound: T,
    even: bool,
}

/// The built-in potential families plus the user-supplied variant.
#[derive(Debug, Clone)]
pub enum PotentialKind<T> {
    Zero,
    /// `k q^2 / 2`.
    Quadratic { stiffness: T },
    /// `scale * q^(2n) / (1 + alpha q^(2n))`.
    RationalWell { n: u32, alpha: T, scale: T },
    /// `scale * sin(q)^(2n)`.
    SinPower { n: u32, scale: T },
    /// `scale * (1 + alpha q^2)^(delta/2)`, `0 < delta <= 2`.
    SoftPower { alpha: T, delta: T, scale: T },
    /// `scale * cos(r)`.
    Cosine { scale: T },
    /// `scale * (q - sin q)`: bounded curvature without reflection symmetry.
    SkewSine { scale: T },
    /// `beta q^4 / 4`; unbounded second derivative.
    Quartic { beta: T },
    Custom(CustomPotential<T>),
}

#[derive(Debug, Clone)]
pub struct Potential<T> {
    kind: PotentialKind<T>,
    bound: T,
}

impl<T: fmt::Debug> fmt::Debug for CustomPotential<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("bound", &self.bound)
            .field("even", &self.even)
            .field("closed_form_value", &self.value.is_some())
            .finish()
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> PotentialError {
    PotentialError::Parameter {
        name,
        reason: reason.into(),
    }
}

impl<T: Real> Potential<T> {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            bound: T::zero(),
        }
    }

    pub fn quadratic(stiffness: T) -> Self {
        Self {
            kind: PotentialKind::Quadratic { stiffness },
            bound: Float::abs(stiffness),
        }
    }

    pub fn rational_well(n: u32, alpha: T, scale: T) -> Result<Self, PotentialError> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(alpha > T::zero()) {
            return Err(invalid("alpha", "must be positive"));
        }
        let bound = Float::abs(scale) * rational_well_curvature_peak(n, alpha);
        Ok(Self {
            kind: PotentialKind::RationalWell { n, alpha, scale },
            bound,
        })
    }

    pub fn sin_power(n: u32, scale: T) -> Result<Self, PotentialError> {
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        // With c = cos^2 q, V''/scale = 2n (1-c)^(n-1) (2nc - 1); its extrema on
        // [0, 1] sit at c = 0 and c = (3n-1)/(2n^2).
        let nf = T::lit(n as f64);
        let two = T::lit(2.0);
        let at_zero = two * nf;
        let c_star = (T::lit(3.0) * nf - T::one()) / (two * nf * nf);
        let interior = two * (two * nf - T::one()) * (T::one() - c_star).powi(n as i32 - 1);
        Ok(Self {
            kind: PotentialKind::SinPower { n, scale },
            bound: Float::abs(scale) * at_zero.max(interior),
        })
    }

    pub fn soft_power(alpha: T, delta: T, scale: T) -> Result<Self, PotentialError> {
        if !(alpha > T::zero()) {
            return Err(invalid("alpha", "must be positive"));
        }
        if !(delta > T::zero() && delta <= T::lit(2.0)) {
            return Err(invalid("delta", "must lie in (0, 2]"));
        }
        // V'' = scale delta alpha (1+w)^(delta/2-2) (1+(delta-1)w), w = alpha q^2.
        // The profile equals 1 at w = 0; for delta < 1 it has a negative extremum
        // at w = 3/(1-delta) of value -2 ((4-delta)/(1-delta))^(delta/2-2).
        let mut peak = T::one();
        if delta < T::one() {
            let ratio = (T::lit(4.0) - delta) / (T::one() - delta);
            let inner = T::lit(2.0) * ratio.powf(delta / T::lit(2.0) - T::lit(2.0));
            peak = peak.max(inner);
        }
        Ok(Self {
            kind: PotentialKind::SoftPower { alpha, delta, scale },
            bound: Float::abs(scale * delta * alpha) * peak,
        })
    }

    pub fn cosine(scale: T) -> Self {
        Self {
            kind: PotentialKind::Cosine { scale },
            bound: Float::abs(scale),
        }
    }

    pub fn skew_sine(scale: T) -> Self {
        Self {
            kind: PotentialKind::SkewSine { scale },
            bound: Float::abs(scale),
        }
    }

    pub fn quartic(beta: T) -> Self {
        Self {
            kind: PotentialKind::Quartic { beta },
            bound: if beta == T::zero() {
                T::zero()
            } else {
                T::infinity()
            },
        }
    }

    /// User-supplied potential. `bound` must dominate `|second(q)|` for all `q`.
    pub fn custom(
        first: impl Fn(T) -> T + Send + Sync + 'static,
        second: impl Fn(T) -> T + Send + Sync + 'static,
        bound: T,
        even: bool,
    ) -> Result<Self, PotentialError> {
        if !(bound >= T::zero()) {
            return Err(invalid("bound", "must be nonnegative"));
        }
        Ok(Self {
            kind: PotentialKind::Custom(CustomPotential {
                value: None,
                first: Arc::new(first),
                second: Arc::new(second),
                bound,
                even,
            }),
            bound,
        })
    }

    /// Attaches a closed-form value to a custom potential.
    pub fn with_value(mut self, value: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        if let PotentialKind::Custom(c) = &mut self.kind {
            c.value = Some(Arc::new(value));
        }
        self
    }

    pub fn kind(&self) -> &PotentialKind<T> {
        &self.kind
    }

    pub fn second_derivative_bound(&self) -> T {
        self.bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, PotentialKind::Zero)
    }

    /// Whether `V(-q) = V(q)` holds.
    pub fn is_even(&self) -> bool {
        match &self.kind {
            PotentialKind::SkewSine { scale } => *scale == T::zero(),
            PotentialKind::Custom(c) => c.even,
            _ => true,
        }
    }

    pub fn first_derivative(&self, q: T) -> T {
        let two = T::lit(2.0);
        match &self.kind {
            PotentialKind::Zero => T::zero(),
            PotentialKind::Quadratic { stiffness } => *stiffness * q,
            PotentialKind::RationalWell { n, alpha, scale } => {
                let x = q.powi(2 * *n as i32);
                let denom = T::one() + *alpha * x;
                *scale * two * T::lit(*n as f64) * q.powi(2 * *n as i32 - 1) / (denom * denom)
            }
            PotentialKind::SinPower { n, scale } => {
                let (s, c) = q.sin_cos();
                *scale * two * T::lit(*n as f64) * s.powi(2 * *n as i32 - 1) * c
            }
            PotentialKind::SoftPower { alpha, delta, scale } => {
                let base = T::one() + *alpha * q * q;
                *scale * *delta * *alpha * q * base.powf(*delta / two - T::one())
            }
            PotentialKind::Cosine { scale } => -*scale * q.sin(),
            PotentialKind::SkewSine { scale } => *scale * (T::one() - q.cos()),
            PotentialKind::Quartic { beta } => *beta * q * q * q,
            PotentialKind::Custom(c) => (c.first)(q),
        }
    }

    pub fn second_derivative(&self, q: T) -> T {
        let two = T::lit(2.0);
        match &self.kind {
            PotentialKind::Zero => T::zero(),
            PotentialKind::Quadratic { stiffness } => *stiffness,
            PotentialKind::RationalWell { n, alpha, scale } => {
                let nn = *n as i32;
                let nf = T::lit(*n as f64);
                let x = q.powi(2 * nn);
                let denom = T::one() + *alpha * x;
                let dx = two * nf * q.powi(2 * nn - 1);
                let ddx = two * nf * (two * nf - T::one()) * q.powi(2 * nn - 2);
                let g1 = T::one() / (denom * denom);
                let g2 = -two * *alpha / (denom * denom * denom);
                *scale * (g2 * dx * dx + g1 * ddx)
            }
            PotentialKind::SinPower { n, scale } => {
                let nn = *n as i32;
                let nf = T::lit(*n as f64);
                let (s, c) = q.sin_cos();
                let lead = (two * nf - T::one()) * s.powi(2 * nn - 2) * c * c;
                *scale * two * nf * (lead - s.powi(2 * nn))
            }
            PotentialKind::SoftPower { alpha, delta, scale } => {
                let w = *alpha * q * q;
                let base = T::one() + w;
                *scale
                    * *delta
                    * *alpha
                    * base.powf(*delta / two - two)
                    * (T::one() + (*delta - T::one()) * w)
            }
            PotentialKind::Cosine { scale } => -*scale * q.cos(),
            PotentialKind::SkewSine { scale } => *scale * q.sin(),
            PotentialKind::Quartic { beta } => T::lit(3.0) * *beta * q * q,
            PotentialKind::Custom(c) => (c.second)(q),
        }
    }

    /// The potential itself. Custom potentials without a closed form integrate `V'` from 0.
    pub fn value(&self, q: T) -> T {
        match &self.kind {
            PotentialKind::Zero => T::zero(),
            PotentialKind::Quadratic { stiffness } => *stiffness * q * q / T::lit(2.0),
            PotentialKind::RationalWell { n, alpha, scale } => {
                let x = q.powi(2 * *n as i32);
                *scale * x / (T::one() + *alpha * x)
            }
            PotentialKind::SinPower { n, scale } => *scale * q.sin().powi(2 * *n as i32),
            PotentialKind::SoftPower { alpha, delta, scale } => {
                *scale * (T::one() + *alpha * q * q).powf(*delta / T::lit(2.0))
            }
            PotentialKind::Cosine { scale } => *scale * q.cos(),
            PotentialKind::SkewSine { scale } => *scale * (q - q.sin()),
            PotentialKind::Quartic { beta } => *beta * q * q * q * q / T::lit(4.0),
            PotentialKind::Custom(c) => match &c.value {
                Some(v) => v(q),
                None => {
                    let f = c.first.clone();
                    adaptive_simpson(|s| f(s), T::zero(), q, T::lit(1e-13), 40)
                }
            },
        }
    }
}

/// `sup_u |u^(1-1/n) ((2n-1) - (2n+1) u) / (1+u)^3|` times `2n alpha^(1/n-1)`.
///
/// Stationary points of the profile solve
/// `(2n+1)(2-a) u^2 - (2a + 8n - 2) u + a(2n-1) = 0` with `a = 1 - 1/n`.
fn rational_well_curvature_peak<T: Real>(n: u32, alpha: T) -> T {
    let nf = T::lit(n as f64);
    let one = T::one();
    let two = T::lit(2.0);
    let a = one - one / nf;
    let profile = |u: T| -> T {
        let p = (two * nf - one) - (two * nf + one) * u;
        let lead = if a == T::zero() { one } else { u.powf(a) };
        Float::abs(lead * p / (one + u).powi(3))
    };
    let qa = (two * nf + one) * (two - a);
    let qb = -(two * a + T::lit(8.0) * nf - two);
    let qc = a * (two * nf - one);
    let disc = (qb * qb - T::lit(4.0) * qa * qc).max(T::zero()).sqrt();
    let mut peak = profile(T::zero());
    for root in [(-qb - disc) / (two * qa), (-qb + disc) / (two * qa)] {
        if root >= T::zero() {
            peak = peak.max(profile(root));
        }
    }
    two * nf * alpha.powf(one / nf - one) * peak
}
