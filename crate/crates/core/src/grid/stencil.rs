//! Second-order difference stencils on zero-extended fields.

use super::{Field, Grid};
use crate::scalar::Real;

/// The three quadratic forms every objective is built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energies<T> {
    /// Forward differences over every grid edge, `sum ((v_a - v_b)/h)^2 h^n`.
    pub dirichlet: T,
    /// `sum (Δ_h v)^2 h^n` over all nodes.
    pub laplacian: T,
    /// `sum v^2 h^n`.
    pub l2: T,
}

/// `(2n+1)`-point Laplacian of raw node values; nodes outside the array read 0.
///
/// Evaluated at every node of the array, including unmasked ones next to the
/// container mask, so no contribution of a zero-extended field is lost.
pub fn laplacian_of_values<T: Real>(grid: &Grid<T>, values: &[T]) -> Vec<T> {
    let inv_h2 = (grid.spacing() * grid.spacing()).recip();
    let center = T::from_count(2 * grid.dim());
    (0..grid.node_count())
        .map(|idx| {
            let mut s = T::zero();
            grid.for_each_neighbor(idx, |j| s += values[j]);
            (s - center * values[idx]) * inv_h2
        })
        .collect()
}

/// Discrete Laplacian `Δ_h v` at every grid node.
pub fn laplacian_apply<T: Real>(field: &Field<T>) -> Vec<T> {
    laplacian_of_values(field.grid(), field.values())
}

pub fn discrete_norms<T: Real>(field: &Field<T>) -> Energies<T> {
    let grid = field.grid();
    let v = field.values();
    let w = grid.cell_volume();
    let inv_h2 = (grid.spacing() * grid.spacing()).recip();

    let mut dirichlet = T::zero();
    for idx in 0..grid.node_count() {
        for axis in 0..grid.dim() {
            if let Some(j) = grid.neighbor(idx, axis, true) {
                let d = v[j] - v[idx];
                dirichlet += d * d;
            }
        }
    }
    let laplacian: T = laplacian_apply(field).iter().map(|&l| l * l).sum();
    let l2: T = v.iter().map(|&x| x * x).sum();
    Energies {
        dirichlet: dirichlet * inv_h2 * w,
        laplacian: laplacian * w,
        l2: l2 * w,
    }
}

/// Per axis, the larger in magnitude of the forward and backward difference;
/// returns the Euclidean norm of those components.
pub fn one_sided_gradient_magnitude<T: Real>(grid: &Grid<T>, values: &[T], idx: usize) -> T {
    let h = grid.spacing();
    let mut g2 = T::zero();
    for axis in 0..grid.dim() {
        let here = values[idx];
        let fwd = grid
            .neighbor(idx, axis, true)
            .map_or(T::zero(), |j| values[j])
            - here;
        let bwd = here
            - grid
                .neighbor(idx, axis, false)
                .map_or(T::zero(), |j| values[j]);
        let g = fwd.abs().max(bwd.abs()) / h;
        g2 += g * g;
    }
    g2.sqrt()
}

/// Central-difference gradient magnitude.
pub fn gradient_magnitude_central<T: Real>(grid: &Grid<T>, values: &[T], idx: usize) -> T {
    let two_h = grid.spacing() + grid.spacing();
    let mut g2 = T::zero();
    for axis in 0..grid.dim() {
        let f = grid
            .neighbor(idx, axis, true)
            .map_or(T::zero(), |j| values[j]);
        let b = grid
            .neighbor(idx, axis, false)
            .map_or(T::zero(), |j| values[j]);
        let g = (f - b) / two_h;
        g2 += g * g;
    }
    g2.sqrt()
}
