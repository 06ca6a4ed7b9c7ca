//! Closed-form quantities: penalties, ball volumes and loads, Bessel zeros,
//! the symmetrization constant and the volume thresholds derived from them.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{support_of, Field};
use crate::scalar::Real;
use crate::spectral::{rayleigh_quotient, Objective};

/// Value of a quotient that may be `+∞` (zero denominator).
///
/// Ordered above every finite value; adding a finite penalty keeps it infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> ExtReal<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<T> {
        match self {
            ExtReal::Finite(x) => Some(x),
            ExtReal::Infinite => None,
        }
    }

    /// IEEE view: `Infinite` maps to `+inf`.
    pub fn to_float(self) -> T {
        self.finite().unwrap_or_else(T::infinity)
    }

    pub fn add(self, x: T) -> Self {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v + x),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }
}

impl<T: Real> PartialOrd for ExtReal<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<T: Real> fmt::Display for ExtReal<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    /// Zero below the target volume, slope `1/eps` above it.
    #[default]
    NonRewarding,
    /// Slope `eps` below the target volume (negative values), `1/eps` above.
    Rewarding,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PenaltyParams<T> {
    pub kind: PenaltyKind,
    pub eps: T,
    pub omega0: T,
}

impl<T: Real> PenaltyParams<T> {
    pub fn new(kind: PenaltyKind, eps: T, omega0: T) -> Result<Self> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "eps must be positive, got {eps}"
            )));
        }
        if !(omega0 > T::zero() && omega0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "target volume must be positive, got {omega0}"
            )));
        }
        Ok(PenaltyParams { kind, eps, omega0 })
    }
}

/// Piecewise-linear volume penalty.
pub fn penalty<T: Real>(params: &PenaltyParams<T>, volume: T) -> T {
    let d = volume - params.omega0;
    if d >= T::zero() {
        d / params.eps
    } else {
        match params.kind {
            PenaltyKind::NonRewarding => T::zero(),
            PenaltyKind::Rewarding => params.eps * d,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenalizedValue<T> {
    pub value: ExtReal<T>,
    pub quotient: ExtReal<T>,
    pub volume: T,
}

/// `R(v) + p(|{|v| > δ}|)`.
pub fn penalized_value<T: Real>(
    field: &Field<T>,
    params: &PenaltyParams<T>,
    objective: Objective,
    threshold: T,
) -> PenalizedValue<T> {
    let volume = support_of(field, threshold).volume();
    let quotient = rayleigh_quotient(field, objective);
    PenalizedValue {
        value: quotient.add(penalty(params, volume)),
        quotient,
        volume,
    }
}

/// Volume of the unit ball in `n` dimensions.
pub fn unit_ball_volume<T: Real>(n: usize) -> T {
    let pi = T::PI();
    if n % 2 == 0 {
        // π^{n/2} / (n/2)!
        let k = n / 2;
        let fact = (1..=k).fold(T::one(), |acc, i| acc * T::from_count(i));
        pi.powi(k as i32) / fact
    } else {
        // 2^{(n+1)/2} π^{(n-1)/2} / n!!
        let k = (n - 1) / 2;
        let double_fact = (1..=n)
            .step_by(2)
            .fold(T::one(), |acc, i| acc * T::from_count(i));
        T::lit(2.0).powi(k as i32 + 1) * pi.powi(k as i32) / double_fact
    }
}

/// `J_ν(x) Γ(ν+1) (2/x)^ν`, which shares its positive zeros with `J_ν`.
fn bessel_j_scaled<T: Real>(nu: T, x: T) -> T {
    let q = -(x * x) / T::lit(4.0);
    let mut term = T::one();
    let mut sum = T::one();
    let mut k = T::zero();
    for _ in 0..500 {
        k += T::one();
        term = term * q / (k * (k + nu));
        sum += term;
        if term.abs() <= T::epsilon() * sum.abs().max(T::epsilon()) && k * k > q.abs() {
            break;
        }
    }
    sum
}

/// First positive zero `j_{ν,1}` of the Bessel function `J_ν`.
///
/// Sign scan on `(0, 20]` followed by bisection down to [`Real::root_tol`].
pub fn bessel_first_zero<T: Real>(nu: T) -> Result<T> {
    if !(nu >= T::zero()) || !nu.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Bessel order must be >= 0, got {nu}"
        )));
    }
    let step = T::lit(0.05);
    let upper = T::lit(20.0);
    let mut a = step;
    let mut fa = bessel_j_scaled(nu, a);
    if !(fa > T::zero()) {
        return Err(Error::NonBracketing {
            order: nu.as_f64(),
            reason: "series is not positive near the origin".into(),
        });
    }
    loop {
        let b = a + step;
        if b > upper {
            return Err(Error::NonBracketing {
                order: nu.as_f64(),
                reason: "no sign change on (0, 20]".into(),
            });
        }
        let fb = bessel_j_scaled(nu, b);
        if fb <= T::zero() {
            if fb == T::zero() {
                return Ok(b);
            }
            let (mut lo, mut hi) = (a, b);
            for _ in 0..200 {
                if hi - lo <= T::root_tol() {
                    break;
                }
                let mid = (lo + hi) / T::lit(2.0);
                let fm = bessel_j_scaled(nu, mid);
                if fm > T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok((lo + hi) / T::lit(2.0));
        }
        a = b;
        fa = fb;
        debug_assert!(fa > T::zero());
    }
}

/// `Λ(B_1) = j_{n/2,1}^2`, the buckling load of the unit ball.
pub fn unit_ball_buckling_load<T: Real>(n: usize) -> Result<T> {
    let j = bessel_first_zero(T::from_count(n) / T::lit(2.0))?;
    Ok(j * j)
}

/// Buckling load of a ball of the given volume: `(ω_n / V)^{2/n} Λ(B_1)`.
pub fn ball_buckling_load<T: Real>(n: usize, volume: T) -> Result<T> {
    if !(volume > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "volume must be positive, got {volume}"
        )));
    }
    let exponent = T::lit(2.0) / T::from_count(n);
    Ok((unit_ball_volume::<T>(n) / volume).powf(exponent) * unit_ball_buckling_load(n)?)
}

/// Lower constant in `Λ(Ω) > c_n Λ(Ω^#)`, from `Λ ≥ λ_2` and the Krahn–Szegő
/// bound `λ_2(Ω) ≥ 2^{2/n} λ_1(Ω^#)`: `c_n = 2^{2/n} j_{n/2-1,1}^2 / j_{n/2,1}^2`.
pub fn al_constant<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension {n} < 2")));
    }
    let half = T::from_count(n) / T::lit(2.0);
    let lower = bessel_first_zero(half - T::one())?;
    let upper = bessel_first_zero(half)?;
    let c = T::lit(2.0).powf(T::lit(2.0) / T::from_count(n)) * (lower / upper).powi(2);
    if !(c > T::zero() && c < T::one()) {
        return Err(Error::Invariant(format!("c_{n} = {c} outside (0, 1)")));
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Thresholds<T> {
    pub dim: usize,
    pub omega0: T,
    pub eps: T,
    /// Largest eps for which the non-rewarding optimum has volume exactly ω₀.
    pub eps1: T,
    /// Largest eps for which the rewarding optimum obeys the volume dichotomy.
    pub eps0: T,
    /// Lower volume fraction for the rewarding optimum.
    pub alpha0: T,
    pub c_n: T,
    pub lambda_ball_unit: T,
    pub omega_n: T,
}

impl<T: Real> Thresholds<T> {
    /// Buckling load of the ball of volume ω₀.
    pub fn ball_load(&self) -> T {
        (self.omega_n / self.omega0).powf(T::lit(2.0) / T::from_count(self.dim))
            * self.lambda_ball_unit
    }

    /// Whether `alpha0 >= 1/2`, which holds exactly when `eps * eps1 <= 4 c_n - 2`.
    pub fn alpha0_at_least_half(&self) -> bool {
        self.alpha0 >= T::lit(0.5)
    }
}

pub fn thresholds<T: Real>(n: usize, omega0: T, eps: T) -> Result<Thresholds<T>> {
    thresholds_with_constant(n, omega0, eps, None)
}

/// As [`thresholds`], optionally replacing the computed `c_n`.
pub fn thresholds_with_constant<T: Real>(
    n: usize,
    omega0: T,
    eps: T,
    c_override: Option<T>,
) -> Result<Thresholds<T>> {
    if !(omega0 > T::zero()) || !(eps > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "omega0 and eps must be positive, got {omega0}, {eps}"
        )));
    }
    let c_n = match c_override {
        Some(c) if c > T::zero() && c < T::one() => c,
        Some(c) => {
            return Err(Error::InvalidArgument(format!(
                "c_n override {c} outside (0, 1)"
            )))
        }
        None => al_constant(n)?,
    };
    let omega_n = unit_ball_volume::<T>(n);
    let lambda_ball_unit = unit_ball_buckling_load::<T>(n)?;
    let two = T::lit(2.0);
    let nn = T::from_count(n);
    let eps1 = (omega0 / omega_n).powf(two / nn) * omega0 / lambda_ball_unit;
    let eps0 = eps1.min(c_n * (two / nn) / eps1);

    let x = eps * eps1;
    let disc = (T::one() + x) * (T::one() + x) - T::lit(4.0) * c_n * x;
    if disc < T::zero() {
        return Err(Error::Invariant(format!("negative discriminant {disc}")));
    }
    // (1 + x - sqrt(disc)) / (2x), rationalized to avoid cancellation as x -> 0
    let alpha0 = two * c_n / (T::one() + x + disc.sqrt());
    Ok(Thresholds {
        dim: n,
        omega0,
        eps,
        eps1,
        eps0,
        alpha0,
        c_n,
        lambda_ball_unit,
        omega_n,
    })
}
