use std::collections::VecDeque;
use std::sync::Arc;

use super::{Field, Grid};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Set of active grid nodes: the discrete counterpart of `{v != 0}`.
#[derive(Clone)]
pub struct Support<T> {
    grid: Arc<Grid<T>>,
    active: Vec<bool>,
    indices: Vec<usize>,
}

impl<T> std::fmt::Debug for Support<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Support")
            .field("dim", &self.grid.dim)
            .field("cells_per_side", &self.grid.cells_per_side)
            .field("len", &self.indices.len())
            .finish()
    }
}

impl<T: Real> PartialEq for Support<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) && self.indices == other.indices
    }
}

impl<T: Real> Support<T> {
    pub fn empty(grid: Arc<Grid<T>>) -> Self {
        let active = vec![false; grid.node_count()];
        Support {
            grid,
            active,
            indices: Vec::new(),
        }
    }

    /// Every node of the container mask.
    pub fn full(grid: Arc<Grid<T>>) -> Self {
        let active = grid.mask().to_vec();
        Self::from_active_unchecked(grid, active)
    }

    pub fn from_active(grid: Arc<Grid<T>>, active: Vec<bool>) -> Result<Self> {
        if active.len() != grid.node_count() {
            return Err(Error::InvalidArgument(
                "active flags do not match the grid".into(),
            ));
        }
        if let Some(idx) = (0..active.len()).find(|&i| active[i] && !grid.in_container(i)) {
            return Err(Error::InvalidArgument(format!(
                "node {idx} is active but outside the container"
            )));
        }
        Ok(Self::from_active_unchecked(grid, active))
    }

    pub fn from_indices(grid: Arc<Grid<T>>, indices: &[usize]) -> Result<Self> {
        let mut active = vec![false; grid.node_count()];
        for &i in indices {
            if i >= active.len() {
                return Err(Error::InvalidArgument(format!(
                    "node index {i} out of range"
                )));
            }
            active[i] = true;
        }
        Self::from_active(grid, active)
    }

    pub(crate) fn from_active_unchecked(grid: Arc<Grid<T>>, active: Vec<bool>) -> Self {
        let indices = active
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
            .collect();
        Support {
            grid,
            active,
            indices,
        }
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }

    pub fn active(&self) -> &[bool] {
        &self.active
    }

    /// Active node indices in increasing order.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    #[inline]
    pub fn contains(&self, idx: usize) -> bool {
        self.active[idx]
    }

    /// `count * h^n`.
    pub fn volume(&self) -> T {
        T::from_count(self.indices.len()) * self.grid.cell_volume()
    }

    pub fn is_subset_of(&self, other: &Support<T>) -> bool {
        self.indices.iter().all(|&i| other.active[i])
    }

    /// Number of nodes active in exactly one of the two supports.
    pub fn symmetric_difference_len(&self, other: &Support<T>) -> usize {
        self.active
            .iter()
            .zip(&other.active)
            .filter(|(a, b)| a != b)
            .count()
    }

    pub fn barycenter(&self) -> Option<Vec<T>> {
        if self.is_empty() {
            return None;
        }
        let dim = self.grid.dim();
        let mut acc = vec![T::zero(); dim];
        let mut p = vec![T::zero(); dim];
        for &i in &self.indices {
            self.grid.position_into(i, &mut p);
            for (a, x) in acc.iter_mut().zip(&p) {
                *a += *x;
            }
        }
        let n = T::from_count(self.len());
        Some(acc.into_iter().map(|a| a / n).collect())
    }

    /// Largest axis-aligned extent, counting each node as a cell of width h.
    pub fn extent(&self) -> T {
        let dim = self.grid.dim();
        let mut lo = vec![usize::MAX; dim];
        let mut hi = vec![0usize; dim];
        for &i in &self.indices {
            for a in 0..dim {
                let k = self.grid.axis_index(i, a);
                lo[a] = lo[a].min(k);
                hi[a] = hi[a].max(k);
            }
        }
        (0..dim)
            .filter(|&a| lo[a] <= hi[a])
            .map(|a| T::from_count(hi[a] - lo[a] + 1) * self.grid.spacing())
            .fold(T::zero(), T::max)
    }

    /// Inactive nodes of the array that share a face with an active node.
    pub fn outer_boundary(&self) -> Vec<usize> {
        let mut mark = vec![false; self.active.len()];
        for &i in &self.indices {
            self.grid.for_each_neighbor(i, |j| {
                if !self.active[j] {
                    mark[j] = true;
                }
            });
        }
        mark.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Active nodes that share a face with an inactive node.
    pub fn inner_boundary(&self) -> Vec<usize> {
        self.indices
            .iter()
            .copied()
            .filter(|&i| {
                let mut edge = false;
                self.grid.for_each_neighbor(i, |j| edge |= !self.active[j]);
                edge
            })
            .collect()
    }
}

/// Nodes with `|v| > threshold`.
pub fn support_of<T: Real>(field: &Field<T>, threshold: T) -> Support<T> {
    let active = field
        .values()
        .iter()
        .map(|&v| v.abs() > threshold)
        .collect();
    Support::from_active_unchecked(field.grid().clone(), active)
}

/// Face-adjacent components, largest first (ties broken by lowest node index).
pub fn connected_components<T: Real>(support: &Support<T>) -> Vec<Support<T>> {
    let grid = support.grid();
    let mut label = vec![usize::MAX; grid.node_count()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    for &seed in support.indices() {
        if label[seed] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = Vec::new();
        label[seed] = id;
        queue.push_back(seed);
        while let Some(i) = queue.pop_front() {
            members.push(i);
            grid.for_each_neighbor(i, |j| {
                if support.contains(j) && label[j] == usize::MAX {
                    label[j] = id;
                    queue.push_back(j);
                }
            });
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
        .into_iter()
        .map(|m| {
            let mut active = vec![false; grid.node_count()];
            for &i in &m {
                active[i] = true;
            }
            Support {
                grid: grid.clone(),
                active,
                indices: m,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TransformedSupport<T> {
    pub support: Support<T>,
    /// Some transformed cell fell outside the container and was dropped.
    pub clipped: bool,
}

/// Rasterizes `t * S + translation` by nearest-cell pull-back.
///
/// Node `p` is active iff the nearest node to `(p - translation) / t` is
/// active in `support`.
pub fn transform_support<T: Real>(
    support: &Support<T>,
    t: T,
    translation: &[T],
) -> Result<TransformedSupport<T>> {
    if !(t > T::zero()) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "scale factor {t} must be positive"
        )));
    }
    let grid = support.grid();
    let dim = grid.dim();
    if translation.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "translation has {} components, grid dimension is {dim}",
            translation.len()
        )));
    }
    let mut active = vec![false; grid.node_count()];
    let mut clipped = false;
    let mut p = vec![T::zero(); dim];
    let mut q = vec![T::zero(); dim];
    for idx in 0..grid.node_count() {
        grid.position_into(idx, &mut p);
        for a in 0..dim {
            q[a] = (p[a] - translation[a]) / t;
        }
        if let Some(src) = grid.nearest_node(&q) {
            if support.contains(src) {
                if grid.in_container(idx) {
                    active[idx] = true;
                } else {
                    clipped = true;
                }
            }
        }
    }
    // forward images that leave the node array entirely
    if !clipped {
        let c = grid.container();
        for &i in support.indices() {
            grid.position_into(i, &mut q);
            for a in 0..dim {
                p[a] = t * q[a] + translation[a];
            }
            if !c.contains_point(&p) {
                clipped = true;
                break;
            }
        }
    }
    Ok(TransformedSupport {
        support: Support::from_active_unchecked(grid.clone(), active),
        clipped,
    })
}
