//! Minimization of the penalized functional over discrete supports.
//!
//! The threshold sweep alternates between solving the eigenproblem on the
//! current support and trying a family of candidate supports derived from the
//! eigenfunction (super-level sets, a boundary trim, a boundary growth). The
//! best candidate is accepted only if it lowers the functional, so the
//! recorded history is non-increasing.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    make_shape, one_sided_gradient_magnitude, transform_support, Grid, Shape, Support,
};
use crate::scalar::{dot, Real};
use crate::spectral::{
    min_eigenpair, min_eigenpair_from, EigenOptions, EigenResult, Objective, Pencil,
};
use crate::theory::{penalty, unit_ball_volume, PenaltyKind, PenaltyParams, Thresholds};

/// Minimum decrease of the functional for a candidate to be accepted.
pub const ACCEPT_THRESHOLD: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    ThresholdSweep,
    RelaxedDescent,
}

#[derive(Clone, Debug)]
pub enum InitialSupport<T> {
    /// Ball centered in the container with volume `volume_factor * ω₀`.
    Ball {
        volume_factor: T,
    },
    FullContainer,
    Explicit(Support<T>),
}

#[derive(Clone, Debug)]
pub struct OptimizeConfig<T> {
    pub grid: Arc<Grid<T>>,
    pub penalty: PenaltyParams<T>,
    pub objective: Objective,
    pub strategy: Strategy,
    pub init: InitialSupport<T>,
    /// Number of super-level thresholds tried per sweep.
    pub sweep_size: usize,
    pub eigen: EigenOptions<T>,
    pub max_outer: usize,
    /// Consecutive accepted steps with negligible progress before giving up.
    pub stall_limit: usize,
    /// Fraction of the support size moved by the grow and trim candidates.
    pub boundary_fraction: T,
    /// Gradient steps of the relaxed strategy before the sweep takes over.
    pub descent_steps: usize,
    pub seed: u64,
}

impl<T: Real> OptimizeConfig<T> {
    pub fn new(grid: Arc<Grid<T>>, penalty: PenaltyParams<T>) -> Self {
        OptimizeConfig {
            grid,
            penalty,
            objective: Objective::Buckling,
            strategy: Strategy::ThresholdSweep,
            init: InitialSupport::Ball {
                volume_factor: T::lit(1.5),
            },
            sweep_size: 12,
            eigen: EigenOptions::default(),
            max_outer: 200,
            stall_limit: 5,
            boundary_fraction: T::lit(0.01),
            descent_steps: 60,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_size < 4 {
            return Err(Error::Config(format!("sweep_size {} < 4", self.sweep_size)));
        }
        if self.max_outer < 1 {
            return Err(Error::Config("max_outer must be at least 1".into()));
        }
        let measure = self.grid.container_measure();
        if !(self.penalty.omega0 < T::lit(0.9) * measure) {
            return Err(Error::Config(format!(
                "target volume {} must be below 0.9 x container measure {}",
                self.penalty.omega0, measure
            )));
        }
        if !(self.boundary_fraction > T::zero() && self.boundary_fraction <= T::one()) {
            return Err(Error::Config("boundary_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Threshold ladder `{0} ∪ {0.5 · 2^-j : j = 0..sweep_size-2}`.
    pub fn ladder(&self) -> Vec<T> {
        let mut taus = vec![T::zero()];
        let half = T::lit(0.5);
        taus.extend((0..self.sweep_size - 1).map(|j| half * half.powi(j as i32)));
        taus
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HistoryRow<T> {
    pub iteration: usize,
    pub value: T,
    pub lambda: T,
    pub volume: T,
    pub moved_cells: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No candidate lowered the functional.
    Unchanged,
    Stalled,
    MaxOuter,
}

#[derive(Clone, Debug)]
pub struct OptimizeResult<T> {
    pub support: Support<T>,
    pub eig: EigenResult<T>,
    pub i_eps: T,
    pub volume: T,
    pub history: Vec<HistoryRow<T>>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// The support rescaled to volume ω₀ about its barycenter and recentered
    /// in the container does not fit.
    pub clipping_flag: bool,
    pub penalty: PenaltyParams<T>,
    pub objective: Objective,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CandidateKind {
    Level(usize),
    Trim,
    Grow,
}

struct Evaluated<T> {
    support: Support<T>,
    eig: EigenResult<T>,
    value: T,
}

fn evaluate<T: Real>(
    support: Support<T>,
    cfg: &OptimizeConfig<T>,
    warm: Option<&EigenResult<T>>,
) -> Result<Evaluated<T>> {
    let eig = match warm {
        Some(w) => min_eigenpair_from(&support, cfg.objective, &cfg.eigen, &w.field)?,
        None => min_eigenpair(&support, cfg.objective, &cfg.eigen)?,
    };
    let value = eig.lambda + penalty(&cfg.penalty, support.volume());
    Ok(Evaluated {
        support,
        eig,
        value,
    })
}

fn initial_support<T: Real>(cfg: &OptimizeConfig<T>) -> Result<Support<T>> {
    let grid = &cfg.grid;
    match &cfg.init {
        InitialSupport::FullContainer => Ok(Support::full(grid.clone())),
        InitialSupport::Explicit(s) => {
            if !Arc::ptr_eq(s.grid(), grid) && s.grid().node_count() != grid.node_count() {
                return Err(Error::Config(
                    "initial support lives on a different grid".into(),
                ));
            }
            Support::from_active(grid.clone(), s.active().to_vec())
        }
        InitialSupport::Ball { volume_factor } => {
            let n = grid.dim();
            let volume = *volume_factor * cfg.penalty.omega0;
            let radius = (volume / unit_ball_volume::<T>(n)).powf(T::from_count(n).recip());
            make_shape(
                grid,
                &Shape::Ball {
                    center: grid.center(),
                    radius,
                },
            )
        }
    }
}

fn candidates<T: Real>(
    cfg: &OptimizeConfig<T>,
    current: &Evaluated<T>,
) -> Vec<(CandidateKind, Support<T>)> {
    let grid = &cfg.grid;
    let u = current.eig.field.values();
    let umax = current.eig.field.max_abs();
    let s = &current.support;
    let mut out = Vec::new();
    for (j, tau) in cfg.ladder().into_iter().enumerate() {
        let cut = tau * umax;
        let active = u.iter().map(|&v| v.abs() > cut).collect();
        out.push((
            CandidateKind::Level(j),
            Support::from_active_unchecked(grid.clone(), active),
        ));
    }
    let k = (cfg.boundary_fraction * T::from_count(s.len()))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);

    // besides the fixed fraction, try moving exactly the cells that separate
    // the current volume from the target
    let gap = ((s.volume() - cfg.penalty.omega0) / grid.cell_volume()).round();
    let to_target = gap.abs().to_usize().unwrap_or(0);
    let mut counts = vec![k];
    if to_target > 0 && to_target < k {
        counts.push(to_target);
    }

    let mut inner = s.inner_boundary();
    inner.sort_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap().then(a.cmp(&b)));
    for &c in &counts {
        let mut trimmed = s.active().to_vec();
        for &i in inner.iter().take(c.min(s.len().saturating_sub(1))) {
            trimmed[i] = false;
        }
        out.push((
            CandidateKind::Trim,
            Support::from_active_unchecked(grid.clone(), trimmed),
        ));
    }

    let mut outer: Vec<(usize, T)> = s
        .outer_boundary()
        .into_iter()
        .filter(|&i| grid.in_container(i))
        .map(|i| (i, one_sided_gradient_magnitude(grid, u, i)))
        .collect();
    outer.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    for &c in &counts {
        let mut grown = s.active().to_vec();
        for &(i, _) in outer.iter().take(c) {
            grown[i] = true;
        }
        out.push((
            CandidateKind::Grow,
            Support::from_active_unchecked(grid.clone(), grown),
        ));
    }
    out
}

/// Whether the support rescaled to volume ω₀ about its barycenter, then
/// moved so the barycenter sits at the container center, leaves the container.
pub fn rescaled_support_clips<T: Real>(support: &Support<T>, omega0: T) -> Result<bool> {
    let grid = support.grid();
    let b = support.barycenter().ok_or(Error::EmptySupport)?;
    let t = (omega0 / support.volume()).powf(T::from_count(grid.dim()).recip());
    let c = grid.center();
    let translation: Vec<T> = c.iter().zip(&b).map(|(&ci, &bi)| ci - t * bi).collect();
    Ok(transform_support(support, t, &translation)?.clipped)
}

pub fn minimize_penalized<T: Real>(cfg: &OptimizeConfig<T>) -> Result<OptimizeResult<T>> {
    cfg.validate()?;
    let start = match cfg.strategy {
        Strategy::ThresholdSweep => initial_support(cfg)?,
        Strategy::RelaxedDescent => relaxed_descent(cfg, &initial_support(cfg)?)?,
    };
    threshold_sweep(cfg, start)
}

fn threshold_sweep<T: Real>(
    cfg: &OptimizeConfig<T>,
    start: Support<T>,
) -> Result<OptimizeResult<T>> {
    if start.is_empty() {
        return Err(Error::EmptySupport);
    }
    let mut current = evaluate(start, cfg, None)?;
    let mut history = vec![HistoryRow {
        iteration: 0,
        value: current.value,
        lambda: current.eig.lambda,
        volume: current.support.volume(),
        moved_cells: 0,
    }];
    let accept = T::lit(ACCEPT_THRESHOLD);
    let mut stalls = 0;
    let mut stop = StopReason::MaxOuter;
    for iteration in 1..=cfg.max_outer {
        let mut cands = candidates(cfg, &current);
        if cands.iter().all(|(_, s)| s.is_empty()) {
            return Err(Error::EmptySupportCollapse);
        }
        cands.retain(|(_, s)| !s.is_empty() && *s != current.support);
        // identical candidates are evaluated once, first occurrence wins
        let mut unique: Vec<(CandidateKind, Support<T>)> = Vec::with_capacity(cands.len());
        for c in cands {
            if !unique.iter().any(|(_, s)| *s == c.1) {
                unique.push(c);
            }
        }
        let evaluated: Vec<Option<Evaluated<T>>> = unique
            .into_par_iter()
            .map(|(_, s)| evaluate(s, cfg, Some(&current.eig)).ok())
            .collect();
        let mut best: Option<Evaluated<T>> = None;
        for e in evaluated.into_iter().flatten() {
            let better = match &best {
                None => true,
                Some(b) => {
                    e.value < b.value || (e.value == b.value && e.support.len() < b.support.len())
                }
            };
            if better {
                best = Some(e);
            }
        }
        match best {
            Some(b) if b.value < current.value - accept => {
                let gain = current.value - b.value;
                let moved = b.support.symmetric_difference_len(&current.support);
                if gain < T::lit(1e-8) * current.value.abs() {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                current = b;
                history.push(HistoryRow {
                    iteration,
                    value: current.value,
                    lambda: current.eig.lambda,
                    volume: current.support.volume(),
                    moved_cells: moved,
                });
                if stalls >= cfg.stall_limit {
                    stop = StopReason::Stalled;
                    break;
                }
            }
            _ => {
                stop = StopReason::Unchanged;
                break;
            }
        }
    }
    let clipping_flag = rescaled_support_clips(&current.support, cfg.penalty.omega0)?;
    let volume = current.support.volume();
    Ok(OptimizeResult {
        i_eps: current.value,
        volume,
        converged: stop == StopReason::Unchanged,
        stop_reason: stop,
        history,
        clipping_flag,
        support: current.support,
        eig: current.eig,
        penalty: cfg.penalty,
        objective: cfg.objective,
    })
}

/// Smooth relaxation over node values on the whole container:
/// `R(v) + p(h^n Σ v_i² / (v_i² + δ²))` with `δ = h · max|v_0|`, minimized by
/// preconditioned gradient descent on the sphere `{v : K-energy = 1}`.
/// Returns the extracted support `{|v| ≥ δ}`.
fn relaxed_descent<T: Real>(cfg: &OptimizeConfig<T>, init: &Support<T>) -> Result<Support<T>> {
    let grid = &cfg.grid;
    let full = Support::full(grid.clone());
    let pencil = Pencil::assemble(&full, cfg.objective)?;
    let m = full.len();
    let cell = grid.cell_volume();

    // start from the eigenfunction of the initial support, slightly perturbed
    let e0 = min_eigenpair(init, cfg.objective, &cfg.eigen)?;
    let mut v: Vec<T> = full
        .indices()
        .iter()
        .map(|&i| e0.field.values()[i])
        .collect();
    let peak = v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let mut state = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    for (k, x) in v.iter_mut().enumerate() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        let noise = T::lit((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5);
        if init.contains(full.indices()[k]) {
            *x += T::lit(1e-3) * peak * noise;
        }
    }
    let delta = grid.spacing() * peak;
    let d2 = delta * delta;

    let mut ka = vec![T::zero(); m];
    let mut aa = vec![T::zero(); m];
    let normalize = |v: &mut Vec<T>, kv: &mut Vec<T>| {
        pencil.apply_k(v, kv);
        let e = dot(v, kv).sqrt();
        v.iter_mut().for_each(|x| *x /= e);
        kv.iter_mut().for_each(|x| *x /= e);
    };
    let objective = |v: &[T], kv: &[T], av: &mut Vec<T>| {
        pencil.apply_a(v, av);
        let r = dot(v, av) / dot(v, kv);
        let vol: T = v.iter().map(|&x| x * x / (x * x + d2)).sum::<T>() * cell;
        (r, vol)
    };
    let scale = match cfg.objective {
        Objective::Buckling => (grid.spacing() * grid.spacing()).recip(),
        Objective::FundamentalTone => grid.spacing().powi(4).recip(),
    };
    normalize(&mut v, &mut ka);
    let (mut r, mut vol) = objective(&v, &ka, &mut aa);
    let mut f = r * scale + penalty(&cfg.penalty, vol);
    let slope_at = |vol: T| {
        if vol >= cfg.penalty.omega0 {
            cfg.penalty.eps.recip()
        } else {
            match cfg.penalty.kind {
                PenaltyKind::NonRewarding => T::zero(),
                PenaltyKind::Rewarding => cfg.penalty.eps,
            }
        }
    };
    for _ in 0..cfg.descent_steps {
        // gradient of R (unit spacing, K̂-normalized v) plus penalty term
        let dp = slope_at(vol);
        let mut g: Vec<T> = (0..m)
            .map(|i| {
                let x = v[i];
                let ds = T::lit(2.0) * x * d2 / ((x * x + d2) * (x * x + d2));
                T::lit(2.0) * (aa[i] - r * ka[i]) * scale + dp * cell * ds
            })
            .collect();
        let gnorm2 = dot(&g, &g);
        pencil.solve_a(&mut g);
        let slope = -dot(&g, &g).sqrt();
        if gnorm2 == T::zero() {
            break;
        }
        let mut alpha = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let mut w: Vec<T> = v.iter().zip(&g).map(|(&x, &d)| x - alpha * d).collect();
            let mut kw = vec![T::zero(); m];
            normalize(&mut w, &mut kw);
            let mut aw = vec![T::zero(); m];
            let (rw, volw) = objective(&w, &kw, &mut aw);
            let fw = rw * scale + penalty(&cfg.penalty, volw);
            if fw < f + T::lit(1e-4) * alpha * slope * T::lit(1e-3) {
                v = w;
                ka = kw;
                aa = aw;
                r = rw;
                vol = volw;
                let rel = (f - fw) / f.abs();
                f = fw;
                accepted = rel > T::lit(1e-10);
                break;
            }
            alpha /= T::lit(2.0);
        }
        if !accepted {
            break;
        }
    }
    let active: Vec<bool> = {
        let mut a = vec![false; grid.node_count()];
        for (k, &i) in full.indices().iter().enumerate() {
            a[i] = v[k].abs() >= delta;
        }
        a
    };
    let s = Support::from_active_unchecked(grid.clone(), active);
    if s.is_empty() {
        return Err(Error::EmptySupportCollapse);
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate<T> {
    /// Which conclusion the run instantiates.
    pub statement: String,
    pub verdict: Verdict,
    pub details: Vec<String>,
    pub volume: T,
    pub omega0: T,
    pub lower_bound: Option<T>,
    pub upper_bound: Option<T>,
    pub clipping_flag: bool,
}

/// Relative volume tolerance used by [`certify_result`].
pub const CERTIFICATE_VOLUME_TOL: f64 = 0.02;

/// Checks the run against the volume conclusions that apply to its penalty
/// kind and eps regime.
pub fn certify_result<T: Real>(
    result: &OptimizeResult<T>,
    thresholds: &Thresholds<T>,
    params: &PenaltyParams<T>,
) -> Result<Certificate<T>> {
    certify_result_with_tol(result, thresholds, params, T::lit(CERTIFICATE_VOLUME_TOL))
}

pub fn certify_result_with_tol<T: Real>(
    result: &OptimizeResult<T>,
    thresholds: &Thresholds<T>,
    params: &PenaltyParams<T>,
    rel_tol: T,
) -> Result<Certificate<T>> {
    if result.penalty != *params {
        return Err(Error::ParamMismatch(format!(
            "result was computed with {:?}, certificate requested for {:?}",
            result.penalty, params
        )));
    }
    let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-12) * b.abs();
    if !close(thresholds.omega0, params.omega0) || !close(thresholds.eps, params.eps) {
        return Err(Error::ParamMismatch(format!(
            "thresholds were computed for omega0 {}, eps {}; params have {}, {}",
            thresholds.omega0, thresholds.eps, params.omega0, params.eps
        )));
    }
    let v = result.volume;
    let w = params.omega0;
    let mut cert = Certificate {
        statement: String::new(),
        verdict: Verdict::NotApplicable,
        details: Vec::new(),
        volume: v,
        omega0: w,
        lower_bound: None,
        upper_bound: None,
        clipping_flag: result.clipping_flag,
    };
    let one = T::one();
    match params.kind {
        PenaltyKind::NonRewarding if params.eps <= thresholds.eps1 => {
            cert.statement =
                "non-rewarding penalty with eps <= eps1: optimal volume equals omega0".into();
            let (lo, hi) = (w * (one - rel_tol), w * (one + rel_tol));
            cert.lower_bound = Some(lo);
            cert.upper_bound = Some(hi);
            let ok = v >= lo && v <= hi;
            cert.details.push(format!(
                "volume {v} vs omega0 {w} (relative tolerance {rel_tol})"
            ));
            cert.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        }
        PenaltyKind::Rewarding if params.eps <= thresholds.eps1 => {
            let lo = thresholds.alpha0 * w * (one - rel_tol);
            let hi = w * (one + rel_tol);
            cert.lower_bound = Some(lo);
            cert.upper_bound = Some(hi);
            let in_range = v >= lo && v <= hi;
            cert.details.push(format!(
                "volume {v} in [alpha0 omega0, omega0] = [{}, {w}] (relative tolerance {rel_tol})",
                thresholds.alpha0 * w
            ));
            if params.eps <= thresholds.eps0 {
                cert.statement = "rewarding penalty with eps <= eps0: alpha0 omega0 <= volume <= omega0, \
                                  and either volume = omega0 or the omega0-rescaled domain does not fit"
                    .into();
                let short = v < w * (one - rel_tol);
                let dichotomy_ok = !short || result.clipping_flag;
                if short {
                    cert.details.push(format!(
                        "volume below omega0: rescaled support clips = {}{}",
                        result.clipping_flag,
                        if result.clipping_flag {
                            ""
                        } else {
                            " (dichotomy violated)"
                        }
                    ));
                }
                cert.verdict = if in_range && dichotomy_ok {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
            } else {
                cert.statement =
                    "rewarding penalty with eps0 < eps <= eps1: alpha0 omega0 <= volume <= omega0"
                        .into();
                cert.verdict = if in_range {
                    Verdict::Pass
                } else {
                    Verdict::Fail
                };
            }
        }
        _ => {
            cert.statement = "eps exceeds the thresholds: no volume guarantee applies".into();
            cert.details.push(format!(
                "eps {} > eps1 {} (eps0 {})",
                params.eps, thresholds.eps1, thresholds.eps0
            ));
        }
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Container;
    use crate::theory::{thresholds, unit_ball_volume};
    use std::f64::consts::PI;

    fn config(n_cells: usize, kind: PenaltyKind, eps: f64) -> OptimizeConfig<f64> {
        let grid = Grid::build(2, n_cells, Container::Box { side: 3.0 }).unwrap();
        OptimizeConfig::new(grid, PenaltyParams::new(kind, eps, PI).unwrap())
    }

    fn eps1() -> f64 {
        thresholds(2, PI, 1.0).unwrap().eps1
    }

    #[test]
    fn ladder_matches_default_geometry() {
        let cfg = config(16, PenaltyKind::NonRewarding, 0.1);
        let l = cfg.ladder();
        assert_eq!(l.len(), 12);
        assert_eq!(l[0], 0.0);
        assert_eq!(l[1], 0.5);
        assert_eq!(l[2], 0.25);
        assert_eq!(l[11], 0.5f64.powi(11));
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = config(16, PenaltyKind::NonRewarding, 0.1);
        cfg.sweep_size = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = config(16, PenaltyKind::NonRewarding, 0.1);
        cfg.max_outer = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let grid = Grid::build(2, 16, Container::Box { side: 1.0 }).unwrap();
        let cfg = OptimizeConfig::new(
            grid,
            PenaltyParams::new(PenaltyKind::NonRewarding, 0.1, PI).unwrap(),
        );
        assert!(matches!(minimize_penalized(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn history_is_monotone_and_value_consistent() {
        let cfg = config(32, PenaltyKind::NonRewarding, 0.9 * eps1());
        let r = minimize_penalized(&cfg).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].value <= w[0].value);
            assert!(w[1].iteration > w[0].iteration);
        }
        let pen = penalty(&cfg.penalty, r.volume);
        assert!((r.i_eps - (r.eig.lambda + pen)).abs() <= 1e-10);
        assert_eq!(r.history.last().unwrap().value, r.i_eps);
        assert_eq!(r.volume, r.support.volume());
    }

    #[test]
    fn exact_ball_start_has_no_penalty() {
        let mut cfg = config(32, PenaltyKind::NonRewarding, 0.9 * eps1());
        let radius = (PI / unit_ball_volume::<f64>(2)).sqrt();
        let ball = make_shape(
            &cfg.grid,
            &Shape::Ball {
                center: cfg.grid.center(),
                radius,
            },
        )
        .unwrap();
        let lam = min_eigenpair(&ball, Objective::Buckling, &cfg.eigen)
            .unwrap()
            .lambda;
        assert!(ball.volume() <= PI);
        cfg.init = InitialSupport::Explicit(ball);
        let r = minimize_penalized(&cfg).unwrap();
        assert_eq!(r.history[0].value, lam);
        assert!(r.i_eps <= lam);
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = config(24, PenaltyKind::Rewarding, 0.5 * eps1());
        let a = minimize_penalized(&cfg).unwrap();
        let b = minimize_penalized(&cfg).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.support, b.support);
    }

    #[test]
    fn relaxed_strategy_reaches_comparable_value() {
        let mut cfg = config(32, PenaltyKind::NonRewarding, 0.9 * eps1());
        let sweep = minimize_penalized(&cfg).unwrap();
        cfg.strategy = Strategy::RelaxedDescent;
        let relaxed = minimize_penalized(&cfg).unwrap();
        assert!((relaxed.i_eps - sweep.i_eps).abs() / sweep.i_eps < 0.02);
    }

    #[test]
    fn clipping_detects_oversized_rescale() {
        let grid = Grid::<f64>::build(2, 32, Container::Box { side: 3.0 }).unwrap();
        let small = make_shape(
            &grid,
            &Shape::Ball {
                center: vec![1.5, 1.5],
                radius: 0.5,
            },
        )
        .unwrap();
        assert!(!rescaled_support_clips(&small, PI).unwrap());
        assert!(rescaled_support_clips(&small, 8.0).unwrap());
    }

    fn fake_result(
        kind: PenaltyKind,
        eps: f64,
        volume_factor: f64,
        clip: bool,
    ) -> OptimizeResult<f64> {
        let cfg = config(16, kind, eps);
        let s = Support::full(cfg.grid.clone());
        let eig = min_eigenpair(&s, Objective::Buckling, &cfg.eigen).unwrap();
        OptimizeResult {
            i_eps: eig.lambda,
            volume: volume_factor * PI,
            history: Vec::new(),
            converged: true,
            stop_reason: StopReason::Unchanged,
            clipping_flag: clip,
            support: s,
            eig,
            penalty: cfg.penalty,
            objective: Objective::Buckling,
        }
    }

    #[test]
    fn certificate_regimes() {
        let e1 = eps1();
        let th = thresholds(2, PI, 0.9 * e1).unwrap();
        let params = PenaltyParams::new(PenaltyKind::NonRewarding, 0.9 * e1, PI).unwrap();
        let c = certify_result(
            &fake_result(PenaltyKind::NonRewarding, 0.9 * e1, 1.0, false),
            &th,
            &params,
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::Pass);

        let th0 = thresholds(2, PI, 1.0).unwrap();
        let eps = 0.9 * th0.eps0;
        let th = thresholds(2, PI, eps).unwrap();
        let params = PenaltyParams::new(PenaltyKind::Rewarding, eps, PI).unwrap();
        let c = certify_result_with_tol(
            &fake_result(PenaltyKind::Rewarding, eps, 0.995, false),
            &th,
            &params,
            1e-3,
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::Fail);
        assert!(c.details.iter().any(|d| d.contains("dichotomy violated")));
        let c = certify_result_with_tol(
            &fake_result(PenaltyKind::Rewarding, eps, 0.995, true),
            &th,
            &params,
            1e-3,
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::Pass);

        let eps = 2.0 * th0.eps1;
        let th = thresholds(2, PI, eps).unwrap();
        let params = PenaltyParams::new(PenaltyKind::Rewarding, eps, PI).unwrap();
        let c = certify_result(
            &fake_result(PenaltyKind::Rewarding, eps, 0.5, false),
            &th,
            &params,
        )
        .unwrap();
        assert_eq!(c.verdict, Verdict::NotApplicable);
        assert!(c.statement.contains("no volume guarantee"));
    }

    #[test]
    fn certificate_rejects_mismatched_params() {
        let e1 = eps1();
        let th = thresholds(2, PI, 0.9 * e1).unwrap();
        let params = PenaltyParams::new(PenaltyKind::Rewarding, 0.9 * e1, PI).unwrap();
        let r = fake_result(PenaltyKind::NonRewarding, 0.9 * e1, 1.0, false);
        assert!(matches!(
            certify_result(&r, &th, &params),
            Err(Error::ParamMismatch(_))
        ));
        let th = thresholds(2, PI, 0.5 * e1).unwrap();
        let params = r.penalty;
        assert!(matches!(
            certify_result(&r, &th, &params),
            Err(Error::ParamMismatch(_))
        ));
    }
}
