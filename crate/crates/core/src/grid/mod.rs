//! Uniform Cartesian discretization of the container, plus the fields and
//! supports that live on it.
//!
//! Nodes are indexed lexicographically with axis 0 varying fastest. The node
//! with multi-index `(i_0, .., i_{n-1})` sits at `(i_0 h, .., i_{n-1} h)`, so the
//! container's bounding box is `[0, side]^n` and the array holds
//! `(cells_per_side + 1)^n` nodes. Only nodes strictly inside the container are
//! masked; every field is zero elsewhere, which realizes the clamped space by
//! zero extension.

mod shape;
mod stencil;
mod support;

use std::sync::Arc;

pub use shape::{make_shape, Shape};
pub use stencil::{
    discrete_norms, gradient_magnitude_central, laplacian_apply, laplacian_of_values,
    one_sided_gradient_magnitude, Energies,
};
pub use support::{
    connected_components, support_of, transform_support, Support, TransformedSupport,
};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::theory::unit_ball_volume;

/// Dimension above which [`Grid::build`] refuses to allocate.
pub const DEFAULT_MAX_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Container<T> {
    /// Axis-aligned cube `[0, side]^n`.
    Box { side: T },
    /// Ball of the given radius centered in its bounding cube `[0, 2 radius]^n`.
    Ball { radius: T },
}

impl<T: Real> Container<T> {
    /// Side length of the bounding cube.
    pub fn bounding_side(&self) -> T {
        match *self {
            Container::Box { side } => side,
            Container::Ball { radius } => radius + radius,
        }
    }

    /// Lebesgue measure of the container in `dim` dimensions.
    pub fn measure(&self, dim: usize) -> T {
        match *self {
            Container::Box { side } => side.powi(dim as i32),
            Container::Ball { radius } => unit_ball_volume::<T>(dim) * radius.powi(dim as i32),
        }
    }

    /// Strict interior test for a point in physical coordinates.
    pub fn contains_point(&self, p: &[T]) -> bool {
        match *self {
            Container::Box { side } => p.iter().all(|&x| x > T::zero() && x < side),
            Container::Ball { radius } => {
                let r2: T = p.iter().map(|&x| (x - radius) * (x - radius)).sum();
                r2 < radius * radius
            }
        }
    }
}

/// Uniform grid over the container's bounding cube.
#[derive(Clone)]
pub struct Grid<T> {
    dim: usize,
    cells_per_side: usize,
    spacing: T,
    container: Container<T>,
    nodes_per_side: usize,
    strides: Vec<usize>,
    mask: Vec<bool>,
    mask_count: usize,
}

impl<T: std::fmt::Debug> std::fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim)
            .field("cells_per_side", &self.cells_per_side)
            .field("spacing", &self.spacing)
            .field("container", &self.container)
            .field("mask_count", &self.mask_count)
            .finish()
    }
}

impl<T: Real> Grid<T> {
    /// Builds a grid with the default dimension guard ([`DEFAULT_MAX_DIM`]).
    pub fn build(dim: usize, cells_per_side: usize, container: Container<T>) -> Result<Arc<Self>> {
        Self::build_with_limit(dim, cells_per_side, container, DEFAULT_MAX_DIM)
    }

    pub fn build_with_limit(
        dim: usize,
        cells_per_side: usize,
        container: Container<T>,
        max_dim: usize,
    ) -> Result<Arc<Self>> {
        if dim < 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} < 2")));
        }
        if dim > max_dim {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} exceeds the memory guard {max_dim}"
            )));
        }
        if cells_per_side < 8 {
            return Err(Error::InvalidGrid(format!(
                "cells_per_side {cells_per_side} < 8"
            )));
        }
        let side = container.bounding_side();
        if !(side.is_finite() && side > T::zero()) {
            return Err(Error::InvalidGrid("container has zero measure".into()));
        }
        let nodes_per_side = cells_per_side + 1;
        let node_count = nodes_per_side
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::InvalidGrid("node count overflows".into()))?;
        let mut strides = Vec::with_capacity(dim);
        let mut s = 1;
        for _ in 0..dim {
            strides.push(s);
            s *= nodes_per_side;
        }
        let spacing = side / T::from_count(cells_per_side);
        let mut grid = Grid {
            dim,
            cells_per_side,
            spacing,
            container,
            nodes_per_side,
            strides,
            mask: Vec::new(),
            mask_count: 0,
        };
        let mut p = vec![T::zero(); dim];
        let mask: Vec<bool> = (0..node_count)
            .map(|idx| {
                grid.position_into(idx, &mut p);
                container.contains_point(&p)
            })
            .collect();
        grid.mask_count = mask.iter().filter(|&&m| m).count();
        grid.mask = mask;
        if grid.mask_count == 0 {
            return Err(Error::InvalidGrid("container mask is empty".into()));
        }
        Ok(Arc::new(grid))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_side(&self) -> usize {
        self.cells_per_side
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn container(&self) -> Container<T> {
        self.container
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn node_count(&self) -> usize {
        self.mask.len()
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn mask_count(&self) -> usize {
        self.mask_count
    }

    #[inline]
    pub fn in_container(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// `h^n`, the volume carried by one node.
    pub fn cell_volume(&self) -> T {
        self.spacing.powi(self.dim as i32)
    }

    pub fn container_measure(&self) -> T {
        self.container.measure(self.dim)
    }

    /// Center of the bounding cube (and of a ball container).
    pub fn center(&self) -> Vec<T> {
        vec![self.container.bounding_side() / T::lit(2.0); self.dim]
    }

    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.strides[axis]) % self.nodes_per_side
    }

    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.axis_index(idx, a)).collect()
    }

    /// Linear index of a multi-index, `None` if any component is out of range.
    pub fn linear_index(&self, multi: &[isize]) -> Option<usize> {
        debug_assert_eq!(multi.len(), self.dim);
        let mut idx = 0usize;
        for (a, &m) in multi.iter().enumerate() {
            if m < 0 || m as usize >= self.nodes_per_side {
                return None;
            }
            idx += m as usize * self.strides[a];
        }
        Some(idx)
    }

    #[inline]
    pub fn position_into(&self, idx: usize, out: &mut [T]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = T::from_count(self.axis_index(idx, a)) * self.spacing;
        }
    }

    pub fn position(&self, idx: usize) -> Vec<T> {
        let mut p = vec![T::zero(); self.dim];
        self.position_into(idx, &mut p);
        p
    }

    /// Face neighbor of `idx` along `axis` in direction `forward`, if it is
    /// inside the node array.
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, forward: bool) -> Option<usize> {
        let i = self.axis_index(idx, axis);
        if forward {
            (i + 1 < self.nodes_per_side).then(|| idx + self.strides[axis])
        } else {
            (i > 0).then(|| idx - self.strides[axis])
        }
    }

    /// Calls `f` for every face neighbor of `idx` inside the node array.
    #[inline]
    pub fn for_each_neighbor(&self, idx: usize, mut f: impl FnMut(usize)) {
        for axis in 0..self.dim {
            if let Some(j) = self.neighbor(idx, axis, false) {
                f(j);
            }
            if let Some(j) = self.neighbor(idx, axis, true) {
                f(j);
            }
        }
    }

    /// Nearest node to a physical point, `None` outside the node array.
    pub fn nearest_node(&self, p: &[T]) -> Option<usize> {
        let mut idx = 0usize;
        for (a, &x) in p.iter().enumerate() {
            let r = (x / self.spacing).round();
            if !r.is_finite() || r < T::zero() {
                return None;
            }
            let i = r.to_usize()?;
            if i >= self.nodes_per_side {
                return None;
            }
            idx += i * self.strides[a];
        }
        Some(idx)
    }
}

/// Scalar values on grid nodes, zero outside the container mask.
#[derive(Clone, Debug)]
pub struct Field<T> {
    grid: Arc<Grid<T>>,
    values: Vec<T>,
}

impl<T: Real> Field<T> {
    pub fn zeros(grid: Arc<Grid<T>>) -> Self {
        let values = vec![T::zero(); grid.node_count()];
        Field { grid, values }
    }

    /// Validates length, finiteness and zero extension outside the mask.
    pub fn new(grid: Arc<Grid<T>>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value at node {idx}"
                )));
            }
            if v != T::zero() && !grid.in_container(idx) {
                return Err(Error::InvalidArgument(format!(
                    "nonzero value at node {idx} outside the container"
                )));
            }
        }
        Ok(Field { grid, values })
    }

    /// Samples `f` at masked nodes, zero elsewhere.
    pub fn from_fn(grid: Arc<Grid<T>>, mut f: impl FnMut(&[T]) -> T) -> Self {
        let mut p = vec![T::zero(); grid.dim()];
        let values = (0..grid.node_count())
            .map(|idx| {
                if grid.in_container(idx) {
                    grid.position_into(idx, &mut p);
                    f(&p)
                } else {
                    T::zero()
                }
            })
            .collect();
        Field { grid, values }
    }

    /// Scatters support-local values back into a full field.
    pub(crate) fn from_local(support: &Support<T>, local: &[T]) -> Self {
        let grid = support.grid().clone();
        let mut values = vec![T::zero(); grid.node_count()];
        for (&idx, &v) in support.indices().iter().zip(local) {
            values[idx] = v;
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn scaled(&self, c: T) -> Self {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    /// Restriction to a support: values outside it are set to zero.
    pub fn restricted(&self, support: &Support<T>) -> Self {
        let values = self
            .values
            .iter()
            .zip(support.active())
            .map(|(&v, &a)| if a { v } else { T::zero() })
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_spacing_and_mask() {
        let g = Grid::build(2, 8, Container::Box { side: 1.0 }).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.node_count(), 81);
        assert_eq!(g.mask_count(), 49);
        // boundary nodes are unmasked, node (3, 5) sits at (0.375, 0.625)
        let idx = g.linear_index(&[3, 5]).unwrap();
        assert_eq!(g.position(idx), vec![0.375, 0.625]);
        assert!(g.in_container(idx));
        assert!(!g.in_container(g.linear_index(&[0, 4]).unwrap()));
        assert!(!g.in_container(g.linear_index(&[8, 4]).unwrap()));
    }

    #[test]
    fn ball_mask_is_strict() {
        let g = Grid::build(2, 8, Container::Ball { radius: 0.5 }).unwrap();
        let c = g.center();
        for idx in 0..g.node_count() {
            let p = g.position(idx);
            let d2: f64 = p.iter().zip(&c).map(|(x, y)| (x - y) * (x - y)).sum();
            assert_eq!(g.in_container(idx), d2 < 0.25, "node {idx}");
        }
        // (4,0) lies exactly on the circle and must be excluded
        assert!(!g.in_container(g.linear_index(&[4, 0]).unwrap()));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::build(1, 8, Container::Box { side: 1.0 }).is_err());
        assert!(Grid::build(2, 7, Container::Box { side: 1.0 }).is_err());
        assert!(Grid::build(2, 8, Container::Box { side: 0.0 }).is_err());
        assert!(Grid::build(5, 8, Container::Box { side: 1.0 }).is_err());
        assert!(Grid::build_with_limit(5, 8, Container::Box { side: 1.0_f32 }, 5).is_ok());
    }

    #[test]
    fn field_rejects_values_outside_mask() {
        let g = Grid::build(2, 8, Container::Box { side: 1.0 }).unwrap();
        let mut v = vec![0.0; g.node_count()];
        v[0] = 1.0;
        assert!(Field::new(g.clone(), v).is_err());
        let mut v = vec![0.0; g.node_count()];
        v[g.linear_index(&[2, 2]).unwrap()] = f64::NAN;
        assert!(Field::new(g, v).is_err());
    }

    #[test]
    fn container_measure() {
        let b = Container::Ball { radius: 2.0 };
        assert!((b.measure(2) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(Container::Box { side: 3.0 }.measure(3), 27.0);
    }
}
