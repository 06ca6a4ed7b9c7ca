//! Reference values computed independently of the library: Bessel zeros from
//! the integral representation and the spherical closed forms, ball volumes
//! from the two-step recurrence, and α₀ by bisection on its defining equation.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `J_k(x) = (1/2π) ∫₀^{2π} cos(kτ − x sin τ) dτ`, trapezoid rule (spectrally
/// accurate for this periodic integrand).
pub fn bessel_j_integer(k: u32, x: f64) -> f64 {
    let m = 256;
    let step = 2.0 * PI / m as f64;
    (0..m)
        .map(|i| {
            let t = i as f64 * step;
            (k as f64 * t - x * t.sin()).cos()
        })
        .sum::<f64>()
        / m as f64
}

pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    assert!(
        flo * f(hi) < 0.0,
        "bracket [{lo}, {hi}] does not change sign"
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First positive zero of `J_ν` for `ν ∈ {0, 1/2, 1, 3/2, 2, 5/2, 3}`.
pub fn bessel_zero(nu2: u32) -> f64 {
    match nu2 {
        0 => bisect(|x| bessel_j_integer(0, x), 2.0, 3.0),
        1 => PI,
        2 => bisect(|x| bessel_j_integer(1, x), 3.5, 4.0),
        // j_1(x) ∝ sin x − x cos x
        3 => bisect(|x| x.sin() - x * x.cos(), 4.0, 5.0),
        4 => bisect(|x| bessel_j_integer(2, x), 5.0, 5.5),
        // j_2(x) ∝ (3 − x²) sin x − 3x cos x
        5 => bisect(|x| (3.0 - x * x) * x.sin() - 3.0 * x * x.cos(), 5.5, 6.0),
        6 => bisect(|x| bessel_j_integer(3, x), 6.0, 6.5),
        _ => panic!("no oracle for order {nu2}/2"),
    }
}

/// ω_n from ω₀ = 1, ω₁ = 2, ω_n = 2π/n · ω_{n−2}.
pub fn ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * ball_volume(n - 2),
    }
}

pub fn unit_ball_load(n: usize) -> f64 {
    bessel_zero(n as u32).powi(2)
}

pub fn ball_load(n: usize, volume: f64) -> f64 {
    (ball_volume(n) / volume).powf(2.0 / n as f64) * unit_ball_load(n)
}

pub fn c_n(n: usize) -> f64 {
    let lower = bessel_zero(n as u32 - 2);
    let upper = bessel_zero(n as u32);
    2f64.powf(2.0 / n as f64) * (lower / upper).powi(2)
}

pub fn eps1(n: usize, omega0: f64) -> f64 {
    (omega0 / ball_volume(n)).powf(2.0 / n as f64) * omega0 / unit_ball_load(n)
}

pub fn eps0(n: usize, omega0: f64) -> f64 {
    let e1 = eps1(n, omega0);
    e1.min(c_n(n) * 2.0 / n as f64 / e1)
}

/// Smaller root of `c/α − 1 = εε₁ (1 − α)` in `(0, 1)`.
pub fn alpha0(n: usize, omega0: f64, eps: f64) -> f64 {
    let x = eps * eps1(n, omega0);
    let c = c_n(n);
    bisect(|a| c - a - x * a * (1.0 - a), 1e-3, 1.0 - 1e-12)
}

pub fn penalty_non_rewarding(s: f64, omega0: f64, eps: f64) -> f64 {
    if s >= omega0 {
        (s - omega0) / eps
    } else {
        0.0
    }
}

pub fn penalty_rewarding(s: f64, omega0: f64, eps: f64) -> f64 {
    if s >= omega0 {
        (s - omega0) / eps
    } else {
        eps * (s - omega0)
    }
}
