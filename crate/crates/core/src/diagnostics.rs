//! Measurements of the structural properties a minimizer is expected to
//! have: boundary classification, scaling and translation laws, monotonicity,
//! the symmetrization inequality, and the doubling, nondegeneracy and density
//! profiles along the free boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    connected_components, gradient_magnitude_central, laplacian_of_values,
    one_sided_gradient_magnitude, transform_support, Support,
};
use crate::optimizer::Certificate;
use crate::scalar::Real;
use crate::spectral::{
    min_eigenpair, pde_residual, EigenOptions, EigenResult, Objective, PdeResidual,
};
use crate::theory::{ball_buckling_load, unit_ball_volume};

/// Relative slack granted to the symmetrization inequality.
pub const AL_SLACK: f64 = 0.02;
/// Pass bar for translations by whole lattice vectors.
pub const LATTICE_TRANSLATION_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryClassification<T> {
    /// Boundary cells with gradient at most `gamma_tol` (free boundary).
    pub gamma: Vec<usize>,
    /// Boundary cells with larger gradient (nodal part).
    pub sigma: Vec<usize>,
    pub gamma_tol: T,
}

/// `h · max|Δ_h u|`, the gradient noise floor expected at a clamped edge.
pub fn default_gamma_tol<T: Real>(eig: &EigenResult<T>) -> T {
    let grid = eig.field.grid();
    let lap = laplacian_of_values(grid, eig.field.values());
    let h = grid.spacing();
    let max = lap.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
    h * max
}

pub fn classify_boundary<T: Real>(
    eig: &EigenResult<T>,
    support: &Support<T>,
    gamma_tol: T,
) -> BoundaryClassification<T> {
    let grid = support.grid();
    let u = eig.field.values();
    let (mut gamma, mut sigma) = (Vec::new(), Vec::new());
    for i in support.outer_boundary() {
        if one_sided_gradient_magnitude(grid, u, i) <= gamma_tol {
            gamma.push(i);
        } else {
            sigma.push(i);
        }
    }
    BoundaryClassification {
        gamma,
        sigma,
        gamma_tol,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingCheck<T> {
    pub t: T,
    pub lambda: T,
    pub lambda_scaled: T,
    /// `|t² Λ(tS) / Λ(S) − 1|`.
    pub ratio_error: T,
    pub tol: T,
    pub pass: bool,
}

/// Compares `Λ(S)` with `Λ(tS)` where `tS` is scaled about the barycenter.
pub fn check_scaling<T: Real>(
    support: &Support<T>,
    t: T,
    objective: Objective,
    opts: &EigenOptions<T>,
    tol: T,
) -> Result<ScalingCheck<T>> {
    if !(t > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "scale factor {t} must be positive"
        )));
    }
    let b = support.barycenter().ok_or(Error::EmptySupport)?;
    let lambda = min_eigenpair(support, objective, opts)?.lambda;
    let lambda_scaled = if t == T::one() {
        lambda
    } else {
        let shift: Vec<T> = b.iter().map(|&x| x - t * x).collect();
        let moved = transform_support(support, t, &shift)?;
        if moved.clipped {
            return Err(Error::Clipping);
        }
        min_eigenpair(&moved.support, objective, opts)?.lambda
    };
    let power = match objective {
        Objective::Buckling => 2,
        Objective::FundamentalTone => 4,
    };
    let ratio_error = (t.powi(power) * lambda_scaled / lambda - T::one()).abs();
    Ok(ScalingCheck {
        t,
        lambda,
        lambda_scaled,
        ratio_error,
        tol,
        pass: ratio_error <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TranslationCheck<T> {
    pub shift: Vec<T>,
    pub lambda: T,
    pub lambda_shifted: T,
    /// `|Λ(S) / Λ(S + shift) − 1|`.
    pub relative_error: T,
    pub tol: T,
    pub pass: bool,
}

pub fn check_translation<T: Real>(
    support: &Support<T>,
    shift: &[T],
    objective: Objective,
    opts: &EigenOptions<T>,
    tol: T,
) -> Result<TranslationCheck<T>> {
    let moved = transform_support(support, T::one(), shift)?;
    if moved.clipped {
        return Err(Error::Clipping);
    }
    let lambda = min_eigenpair(support, objective, opts)?.lambda;
    let lambda_shifted = if shift.iter().all(|&s| s == T::zero()) {
        lambda
    } else {
        min_eigenpair(&moved.support, objective, opts)?.lambda
    };
    let relative_error = (lambda / lambda_shifted - T::one()).abs();
    Ok(TranslationCheck {
        shift: shift.to_vec(),
        lambda,
        lambda_shifted,
        relative_error,
        tol,
        pass: relative_error <= tol,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MonotonicityOutcome<T> {
    pub inner_size: usize,
    pub outer_size: usize,
    pub lambda_inner: T,
    pub lambda_outer: T,
    pub pass: bool,
}

/// Random nested pairs `S₁ ⊂ S₂ ⊆ support`, each the intersection of the
/// support with a ball around a random active node (the outer ball contains
/// the inner one).
pub fn nested_pairs<T: Real>(
    support: &Support<T>,
    count: usize,
    seed: u64,
) -> Vec<(Support<T>, Support<T>)> {
    if support.is_empty() {
        return Vec::new();
    }
    let grid = support.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = support.extent();
    let h = grid.spacing();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = grid.position(support.indices()[rng.gen_range(0..support.len())]);
        let r1 = h * T::lit(2.0) + reach * T::lit(rng.gen_range(0.1..0.4));
        let r2 = r1 + reach * T::lit(rng.gen_range(0.05..0.6));
        let cut = |r: T| {
            let mut active = vec![false; grid.node_count()];
            let mut p = vec![T::zero(); grid.dim()];
            for &i in support.indices() {
                grid.position_into(i, &mut p);
                let d2: T = p.iter().zip(&c).map(|(&a, &b)| (a - b) * (a - b)).sum();
                active[i] = d2 <= r * r;
            }
            Support::from_active_unchecked(grid.clone(), active)
        };
        let inner = cut(r1);
        if inner.is_empty() {
            continue;
        }
        out.push((inner, cut(r2)));
    }
    out
}

/// Checks `Λ(S₁) + 2·tol·Λ(S₁) ≥ Λ(S₂)` for each nested pair.
pub fn check_monotonicity<T: Real>(
    pairs: &[(Support<T>, Support<T>)],
    objective: Objective,
    opts: &EigenOptions<T>,
) -> Result<Vec<MonotonicityOutcome<T>>> {
    pairs
        .par_iter()
        .map(|(inner, outer)| {
            if !inner.is_subset_of(outer) {
                return Err(Error::InvalidArgument(
                    "monotonicity pair is not nested".into(),
                ));
            }
            let li = min_eigenpair(inner, objective, opts)?.lambda;
            let lo = min_eigenpair(outer, objective, opts)?.lambda;
            let slack = T::lit(2.0) * opts.tol * li;
            Ok(MonotonicityOutcome {
                inner_size: inner.len(),
                outer_size: outer.len(),
                lambda_inner: li,
                lambda_outer: lo,
                pass: li + slack >= lo,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlCheck<T> {
    pub lambda: T,
    /// `c_n · Λ(Ω^#)` for the ball of the same volume.
    pub bound: T,
    pub ratio: T,
    pub c_n: T,
    pub pass: bool,
}

pub fn check_al<T: Real>(support: &Support<T>, eig: &EigenResult<T>, c_n: T) -> Result<AlCheck<T>> {
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let ball = ball_buckling_load(support.grid().dim(), support.volume())?;
    let bound = c_n * ball;
    Ok(AlCheck {
        lambda: eig.lambda,
        bound,
        ratio: eig.lambda / ball,
        c_n,
        pass: eig.lambda >= bound * (T::one() - T::lit(AL_SLACK)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfilePoint<T> {
    pub radius: T,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Profile<T> {
    pub points: Vec<ProfilePoint<T>>,
    /// Max over radii for doubling, min for nondegeneracy.
    pub summary: T,
    pub centers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile<T> {
    /// Minimum of `|Ω ∩ B_R| / |B_R|` over the centers, per radius.
    pub points: Vec<ProfilePoint<T>>,
    pub alpha: T,
    /// Largest `c₂` with `c₂ |B_R|^((1−α)/α) ≤ quotient` at every radius.
    pub c2: T,
    pub centers: usize,
}

/// Default profile radius: `8h`, capped at a quarter of the support extent
/// but never below `2h`.
pub fn default_profile_radius<T: Real>(support: &Support<T>) -> T {
    let h = support.grid().spacing();
    (T::lit(8.0) * h)
        .min(support.extent() / T::lit(4.0))
        .max(T::lit(2.0) * h)
}

fn radii<T: Real>(h: T, r0: T) -> Result<Vec<T>> {
    let two_h = T::lit(2.0) * h;
    if !(r0 >= two_h * (T::one() - T::lit(1e-9))) {
        return Err(Error::InvalidArgument(format!(
            "profile radius {r0} is below 2h = {two_h}"
        )));
    }
    let mut out = Vec::new();
    let mut r = two_h;
    while r <= r0 * (T::one() + T::lit(1e-9)) {
        out.push(r);
        r *= T::lit(2.0);
    }
    Ok(out)
}

/// Integer offsets whose cell centers lie within distance `r`.
fn ball_offsets<T: Real>(dim: usize, h: T, r: T) -> Vec<Vec<isize>> {
    let k = (r / h + T::lit(1e-9)).floor().to_isize().unwrap_or(0);
    let limit = (r / h).powi(2) + T::lit(1e-9);
    let mut out = Vec::new();
    let mut o = vec![-k; dim];
    loop {
        let d2: isize = o.iter().map(|x| x * x).sum();
        if T::from_count(d2 as usize) <= limit {
            out.push(o.clone());
        }
        let mut a = 0;
        loop {
            if a == dim {
                return out;
            }
            o[a] += 1;
            if o[a] <= k {
                break;
            }
            o[a] = -k;
            a += 1;
        }
    }
}

fn ball_nodes<'a, T: Real>(
    support: &Support<T>,
    center: usize,
    offsets: &'a [Vec<isize>],
) -> impl Iterator<Item = usize> + 'a {
    let grid = support.grid().clone();
    let base: Vec<isize> = grid
        .multi_index(center)
        .into_iter()
        .map(|x| x as isize)
        .collect();
    offsets.iter().filter_map(move |o| {
        let m: Vec<isize> = base.iter().zip(o).map(|(&b, &d)| b + d).collect();
        grid.linear_index(&m)
    })
}

fn count_active<T: Real>(support: &Support<T>, center: usize, offsets: &[Vec<isize>]) -> usize {
    ball_nodes(support, center, offsets)
        .filter(|&i| support.contains(i))
        .count()
}

/// Empirical doubling constant `|B_2R ∩ Ω| / |B_R ∩ Ω|` at the given centers.
pub fn doubling_profile<T: Real>(
    support: &Support<T>,
    centers: &[usize],
    r0: T,
) -> Result<Profile<T>> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument(
            "no boundary cells to center the profile on".into(),
        ));
    }
    let grid = support.grid();
    let h = grid.spacing();
    let mut points = Vec::new();
    for r in radii(h, r0)? {
        let small = ball_offsets(grid.dim(), h, r);
        let big = ball_offsets(grid.dim(), h, T::lit(2.0) * r);
        let worst = centers
            .par_iter()
            .filter_map(|&c| {
                let inner = count_active(support, c, &small);
                (inner > 0)
                    .then(|| T::from_count(count_active(support, c, &big)) / T::from_count(inner))
            })
            .reduce(T::zero, T::max);
        if worst > T::zero() {
            points.push(ProfilePoint {
                radius: r,
                value: worst,
            });
        }
    }
    let summary = points.iter().fold(T::zero(), |m, p| m.max(p.value));
    Ok(Profile {
        points,
        summary,
        centers: centers.len(),
    })
}

/// `min over Γ of (max over B_R of |∇u|) / R` per radius, central differences.
pub fn nondegeneracy_profile<T: Real>(
    eig: &EigenResult<T>,
    support: &Support<T>,
    classification: &BoundaryClassification<T>,
    r0: T,
) -> Result<Profile<T>> {
    let centers = &classification.gamma;
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no free-boundary cells".into()));
    }
    let grid = support.grid();
    let h = grid.spacing();
    let u = eig.field.values();
    let grad: Vec<T> = (0..grid.node_count())
        .into_par_iter()
        .map(|i| gradient_magnitude_central(grid, u, i))
        .collect();
    let mut points = Vec::new();
    for r in radii(h, r0)? {
        let offsets = ball_offsets(grid.dim(), h, r);
        let worst = centers
            .par_iter()
            .map(|&c| {
                ball_nodes(support, c, &offsets)
                    .map(|i| grad[i])
                    .fold(T::zero(), T::max)
            })
            .reduce(T::infinity, T::min);
        points.push(ProfilePoint {
            radius: r,
            value: worst / r,
        });
    }
    let summary = points.iter().fold(T::infinity(), |m, p| m.min(p.value));
    Ok(Profile {
        points,
        summary,
        centers: centers.len(),
    })
}

pub fn density_profile<T: Real>(
    support: &Support<T>,
    classification: &BoundaryClassification<T>,
    r0: T,
    alpha: T,
) -> Result<DensityProfile<T>> {
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "density exponent {alpha} must lie in (0, 1)"
        )));
    }
    let centers = &classification.gamma;
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no free-boundary cells".into()));
    }
    let grid = support.grid();
    let h = grid.spacing();
    let cell = grid.cell_volume();
    let exponent = (T::one() - alpha) / alpha;
    let mut points = Vec::new();
    let mut c2 = T::infinity();
    for r in radii(h, r0)? {
        let offsets = ball_offsets(grid.dim(), h, r);
        let total = T::from_count(offsets.len());
        let worst = centers
            .par_iter()
            .map(|&c| T::from_count(count_active(support, c, &offsets)) / total)
            .reduce(T::infinity, T::min);
        let ball_volume = total * cell;
        c2 = c2.min(worst / ball_volume.powf(exponent));
        points.push(ProfilePoint {
            radius: r,
            value: worst,
        });
    }
    Ok(DensityProfile {
        points,
        alpha,
        c2,
        centers: centers.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Connectedness {
    pub components: usize,
    pub pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassificationSummary<T> {
    pub gamma_cells: usize,
    pub sigma_cells: usize,
    pub gamma_tol: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport<T> {
    pub connectedness: Option<Connectedness>,
    pub classification: Option<ClassificationSummary<T>>,
    pub scaling_check: Option<ScalingCheck<T>>,
    pub translation_check: Option<TranslationCheck<T>>,
    pub monotonicity_check: Vec<MonotonicityOutcome<T>>,
    pub al_check: Option<AlCheck<T>>,
    pub doubling_profile: Option<Profile<T>>,
    pub nondegeneracy_profile: Option<Profile<T>>,
    pub density_profile: Option<DensityProfile<T>>,
    pub pde_residuals: Option<PdeResidual<T>>,
    pub certificate: Option<Certificate<T>>,
    /// Sections that could not be computed, with the reason.
    pub not_applicable: Vec<String>,
}

/// Inputs of [`assemble_report`]; `None` fields fall back to defaults.
#[derive(Clone, Debug)]
pub struct ReportInputs<'a, T> {
    pub support: &'a Support<T>,
    pub eig: Option<&'a EigenResult<T>>,
    pub objective: Objective,
    pub eigen: EigenOptions<T>,
    pub c_n: T,
    pub scale_factor: T,
    pub scale_tol: T,
    /// Defaults to one lattice step along the first axis.
    pub shift: Option<Vec<T>>,
    pub gamma_tol: Option<T>,
    pub profile_radius: Option<T>,
    pub density_alpha: T,
    pub monotonicity_pairs: usize,
    pub seed: u64,
    pub certificate: Option<Certificate<T>>,
}

impl<'a, T: Real> ReportInputs<'a, T> {
    pub fn new(support: &'a Support<T>, eig: Option<&'a EigenResult<T>>, c_n: T) -> Self {
        ReportInputs {
            support,
            eig,
            objective: eig.map(|e| e.objective).unwrap_or_default(),
            eigen: EigenOptions::default(),
            c_n,
            scale_factor: T::lit(0.5),
            scale_tol: T::lit(0.05),
            shift: None,
            gamma_tol: None,
            profile_radius: None,
            density_alpha: T::lit(0.5),
            monotonicity_pairs: 4,
            seed: 0,
            certificate: None,
        }
    }
}

pub fn assemble_report<T: Real>(inputs: &ReportInputs<'_, T>) -> DiagnosticsReport<T> {
    let mut na = Vec::new();
    let mut note = |section: &str, e: &dyn std::fmt::Display| na.push(format!("{section}: {e}"));
    let support = inputs.support;
    let mut report = DiagnosticsReport {
        connectedness: None,
        classification: None,
        scaling_check: None,
        translation_check: None,
        monotonicity_check: Vec::new(),
        al_check: None,
        doubling_profile: None,
        nondegeneracy_profile: None,
        density_profile: None,
        pde_residuals: None,
        certificate: inputs.certificate.clone(),
        not_applicable: Vec::new(),
    };
    if support.is_empty() {
        note("all sections", &Error::EmptySupport);
        report.not_applicable = na;
        return report;
    }
    let components = connected_components(support).len();
    report.connectedness = Some(Connectedness {
        components,
        pass: components == 1,
    });

    let solved;
    let eig = match inputs.eig {
        Some(e) => Some(e),
        None => match min_eigenpair(support, inputs.objective, &inputs.eigen) {
            Ok(e) => {
                solved = e;
                Some(&solved)
            }
            Err(e) => {
                note("eigenpair", &e);
                None
            }
        },
    };

    match check_scaling(
        support,
        inputs.scale_factor,
        inputs.objective,
        &inputs.eigen,
        inputs.scale_tol,
    ) {
        Ok(c) => report.scaling_check = Some(c),
        Err(e) => note("scaling_check", &e),
    }
    let h = support.grid().spacing();
    let dim = support.grid().dim();
    let shifts: Vec<Vec<T>> = match &inputs.shift {
        Some(s) => vec![s.clone()],
        None => [T::one(), -T::one()]
            .iter()
            .map(|&d| {
                (0..dim)
                    .map(|a| if a == 0 { d * h } else { T::zero() })
                    .collect()
            })
            .collect(),
    };
    let mut last_err = None;
    for s in &shifts {
        match check_translation(
            support,
            s,
            inputs.objective,
            &inputs.eigen,
            T::lit(LATTICE_TRANSLATION_TOL),
        ) {
            Ok(c) => {
                report.translation_check = Some(c);
                last_err = None;
                break;
            }
            Err(e) => last_err = Some(e),
        }
    }
    if let Some(e) = last_err {
        note("translation_check", &e);
    }
    let pairs = nested_pairs(support, inputs.monotonicity_pairs, inputs.seed);
    match check_monotonicity(&pairs, inputs.objective, &inputs.eigen) {
        Ok(m) => report.monotonicity_check = m,
        Err(e) => note("monotonicity_check", &e),
    }

    let r0 = inputs
        .profile_radius
        .unwrap_or_else(|| default_profile_radius(support));
    if let Some(eig) = eig {
        match check_al(support, eig, inputs.c_n) {
            Ok(c) => report.al_check = Some(c),
            Err(e) => note("al_check", &e),
        }
        report.pde_residuals = Some(pde_residual(eig, support));
        let tol = inputs.gamma_tol.unwrap_or_else(|| default_gamma_tol(eig));
        let cls = classify_boundary(eig, support, tol);
        report.classification = Some(ClassificationSummary {
            gamma_cells: cls.gamma.len(),
            sigma_cells: cls.sigma.len(),
            gamma_tol: tol,
        });
        match doubling_profile(support, &cls.gamma, r0) {
            Ok(p) => report.doubling_profile = Some(p),
            Err(e) => note("doubling_profile", &e),
        }
        match nondegeneracy_profile(eig, support, &cls, r0) {
            Ok(p) => report.nondegeneracy_profile = Some(p),
            Err(e) => note("nondegeneracy_profile", &e),
        }
        match density_profile(support, &cls, r0, inputs.density_alpha) {
            Ok(p) => report.density_profile = Some(p),
            Err(e) => note("density_profile", &e),
        }
    } else {
        note("profiles", &"no eigenpair");
    }
    report.not_applicable = na;
    report
}

/// Volume of the cell-counted ball of radius `r`, next to the exact value.
pub fn cell_ball_volume<T: Real>(dim: usize, h: T, r: T) -> (T, T) {
    let counted = T::from_count(ball_offsets(dim, h, r).len()) * h.powi(dim as i32);
    (counted, unit_ball_volume::<T>(dim) * r.powi(dim as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_shape, support_of, Container, Grid, Shape};
    use crate::theory::al_constant;
    use std::sync::Arc;

    fn box_grid(n: usize, side: f64) -> Arc<Grid<f64>> {
        Grid::build(2, n, Container::Box { side }).unwrap()
    }

    fn disk(g: &Arc<Grid<f64>>, c: [f64; 2], r: f64) -> Support<f64> {
        make_shape(
            g,
            &Shape::Ball {
                center: c.to_vec(),
                radius: r,
            },
        )
        .unwrap()
    }

    fn opts() -> EigenOptions<f64> {
        EigenOptions::default()
    }

    #[test]
    fn disk_boundary_is_free() {
        let g = box_grid(64, 3.0);
        let s = disk(&g, [1.5, 1.5], 1.0);
        let e = min_eigenpair(&s, Objective::Buckling, &opts()).unwrap();
        let cls = classify_boundary(&e, &s, default_gamma_tol(&e));
        let total = cls.gamma.len() + cls.sigma.len();
        assert_eq!(total, s.outer_boundary().len());
        assert!(
            cls.sigma.len() * 100 <= total,
            "{} of {total}",
            cls.sigma.len()
        );

        let cut = support_of(&e.field, 0.3 * e.field.max_abs());
        let ec = min_eigenpair(&cut, Objective::Buckling, &opts()).unwrap();
        // classify the cut support against the original eigenfunction
        let cls = classify_boundary(&e, &cut, default_gamma_tol(&ec));
        assert!(!cls.sigma.is_empty());
        let cls = classify_boundary(&e, &cut, f64::INFINITY);
        assert!(cls.sigma.is_empty());
    }

    #[test]
    fn scaling_law() {
        let g = box_grid(128, 3.0);
        let s = disk(&g, [1.5, 1.5], 0.6);
        assert_eq!(
            check_scaling(&s, 1.0, Objective::Buckling, &opts(), 0.0)
                .unwrap()
                .ratio_error,
            0.0
        );
        let c = check_scaling(&s, 2.0, Objective::Buckling, &opts(), 0.05).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(check_scaling(&s, 0.0, Objective::Buckling, &opts(), 0.05).is_err());
        assert!(matches!(
            check_scaling(&s, 5.0, Objective::Buckling, &opts(), 0.05),
            Err(Error::Clipping)
        ));
        let c = check_scaling(&s, 0.5, Objective::Buckling, &opts(), 0.05).unwrap();
        assert!(c.pass, "{c:?}");
    }

    #[test]
    fn translation_law() {
        let g = box_grid(64, 3.0);
        let h = g.spacing();
        let s = disk(&g, [1.2, 1.3], 0.6);
        let tol = LATTICE_TRANSLATION_TOL;
        let c = check_translation(&s, &[0.0, 0.0], Objective::Buckling, &opts(), tol).unwrap();
        assert_eq!(c.relative_error, 0.0);
        let c =
            check_translation(&s, &[5.0 * h, 3.0 * h], Objective::Buckling, &opts(), tol).unwrap();
        assert!(c.pass, "{c:?}");
        let c =
            check_translation(&s, &[0.37 * h, 0.21], Objective::Buckling, &opts(), 0.05).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(check_translation(&s, &[2.0, 0.0], Objective::Buckling, &opts(), tol).is_err());
    }

    #[test]
    fn monotone_pairs() {
        let g = box_grid(40, 3.0);
        let s = disk(&g, [1.5, 1.5], 1.2);
        let pairs = nested_pairs(&s, 5, 7);
        assert_eq!(pairs.len(), 5);
        let out = check_monotonicity(&pairs, Objective::Buckling, &opts()).unwrap();
        assert!(out.iter().all(|o| o.pass));
        assert_eq!(nested_pairs(&s, 5, 7)[3].0, pairs[3].0);
    }

    #[test]
    fn symmetrization_inequality() {
        let g = box_grid(96, 5.0);
        let c_n = al_constant::<f64>(2).unwrap();
        let s = disk(&g, [2.5, 2.5], 1.0);
        let e = min_eigenpair(&s, Objective::Buckling, &opts()).unwrap();
        let c = check_al(&s, &e, c_n).unwrap();
        assert!(c.pass && c.ratio > 0.9 && c.ratio < 1.05, "{c:?}");
        assert!(check_al(&s, &e, 0.0).unwrap().pass);

        let a = std::f64::consts::PI.sqrt();
        let rect = make_shape(
            &g,
            &Shape::Rectangle {
                center: vec![2.5, 2.5],
                half_widths: vec![a, 0.25 * a],
            },
        )
        .unwrap();
        let e = min_eigenpair(&rect, Objective::Buckling, &opts()).unwrap();
        let c = check_al(&rect, &e, c_n).unwrap();
        assert!(c.pass && c.ratio > 1.0, "{c:?}");
    }

    fn half_plane(n: usize) -> (Support<f64>, BoundaryClassification<f64>) {
        let g = box_grid(n, 1.0);
        let m = n / 2;
        let active: Vec<bool> = (0..g.node_count())
            .map(|i| g.in_container(i) && g.axis_index(i, 1) < m)
            .collect();
        let s = Support::from_active(g.clone(), active).unwrap();
        // centers on the flat edge, away from the walls
        let gamma: Vec<usize> = s
            .outer_boundary()
            .into_iter()
            .filter(|&i| {
                g.axis_index(i, 1) == m && (n / 4..=3 * n / 4).contains(&g.axis_index(i, 0))
            })
            .collect();
        (
            s,
            BoundaryClassification {
                gamma,
                sigma: Vec::new(),
                gamma_tol: 0.0,
            },
        )
    }

    #[test]
    fn flat_boundary_profiles() {
        let (s, cls) = half_plane(256);
        let h = s.grid().spacing();
        let d = doubling_profile(&s, &cls.gamma, 16.0 * h).unwrap();
        let last = d.points.last().unwrap();
        assert!((last.value / 4.0 - 1.0).abs() < 0.15, "{d:?}");
        assert!(d.summary.is_finite());
        let p = density_profile(&s, &cls, 16.0 * h, 0.5).unwrap();
        assert!(
            (p.points.last().unwrap().value / 0.5 - 1.0).abs() < 0.1,
            "{p:?}"
        );
        let p = density_profile(&s, &cls, 16.0 * h, 1.0 - 1e-12).unwrap();
        let min = p.points.iter().fold(f64::INFINITY, |m, q| m.min(q.value));
        assert!((p.c2 - min).abs() < 1e-9);
        assert!(density_profile(&s, &cls, 16.0 * h, 1.0).is_err());
        assert!(doubling_profile(&s, &cls.gamma, h).is_err());
    }

    #[test]
    fn corner_density_is_a_quarter() {
        let g = box_grid(128, 1.0);
        let active: Vec<bool> = (0..g.node_count())
            .map(|i| g.in_container(i) && g.axis_index(i, 0) < 64 && g.axis_index(i, 1) < 64)
            .collect();
        let s = Support::from_active(g.clone(), active).unwrap();
        let corner = g.linear_index(&[64, 64]).unwrap();
        let cls = BoundaryClassification {
            gamma: vec![corner],
            sigma: vec![],
            gamma_tol: 0.0,
        };
        let p = density_profile(&s, &cls, 16.0 * g.spacing(), 0.5).unwrap();
        assert!(
            (p.points.last().unwrap().value / 0.25 - 1.0).abs() < 0.15,
            "{p:?}"
        );
    }

    #[test]
    fn nondegeneracy_is_homogeneous() {
        let g = box_grid(48, 3.0);
        let s = disk(&g, [1.5, 1.5], 1.0);
        let e = min_eigenpair(&s, Objective::Buckling, &opts()).unwrap();
        let cls = classify_boundary(&e, &s, f64::INFINITY);
        let r0 = 4.0 * g.spacing();
        let p1 = nondegeneracy_profile(&e, &s, &cls, r0).unwrap();
        assert!(p1.summary > 0.0);
        let mut e2 = e.clone();
        e2.field = e.field.scaled(2.0);
        let p2 = nondegeneracy_profile(&e2, &s, &cls, r0).unwrap();
        for (a, b) in p1.points.iter().zip(&p2.points) {
            assert!((b.value - 2.0 * a.value).abs() <= 1e-12 * b.value);
        }
        assert!(nondegeneracy_profile(&e, &s, &cls, g.spacing()).is_err());
    }

    #[test]
    fn single_node_profiles() {
        let g = box_grid(8, 1.0);
        let s = Support::from_indices(g.clone(), &[g.linear_index(&[4, 4]).unwrap()]).unwrap();
        let d = doubling_profile(&s, &s.outer_boundary(), 4.0 * g.spacing()).unwrap();
        assert!(d.points.iter().all(|p| p.value.is_finite()));
    }

    #[test]
    fn cell_balls_approach_true_volume() {
        let (counted, exact) = cell_ball_volume(2, 0.01_f64, 0.5);
        assert!((counted / exact - 1.0).abs() < 0.01);
    }

    #[test]
    fn report_sections() {
        let g = box_grid(48, 3.0);
        let c_n = al_constant::<f64>(2).unwrap();
        let two = make_shape(
            &g,
            &Shape::Union(vec![
                Shape::Ball {
                    center: vec![0.9, 1.5],
                    radius: 0.5,
                },
                Shape::Ball {
                    center: vec![2.1, 1.5],
                    radius: 0.5,
                },
            ]),
        )
        .unwrap();
        let r = assemble_report(&ReportInputs::new(&two, None, c_n));
        assert_eq!(
            r.connectedness.unwrap(),
            Connectedness {
                components: 2,
                pass: false
            }
        );
        assert!(r.scaling_check.is_some() && r.translation_check.is_some() && r.al_check.is_some());
        assert!(r.doubling_profile.is_some() && r.density_profile.is_some());
        assert_eq!(r.monotonicity_check.len(), 4);

        let empty = Support::empty(g.clone());
        let r = assemble_report(&ReportInputs::new(&empty, None, c_n));
        assert!(r.connectedness.is_none() && !r.not_applicable.is_empty());
    }
}
