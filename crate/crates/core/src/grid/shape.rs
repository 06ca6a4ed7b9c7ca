//! Test-geometry generators rasterized onto the grid.

use super::{Grid, Support};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape<T> {
    Ball {
        center: Vec<T>,
        radius: T,
    },
    Ellipse {
        center: Vec<T>,
        semiaxes: Vec<T>,
    },
    /// Axis-aligned box given by its center and half side lengths.
    Rectangle {
        center: Vec<T>,
        half_widths: Vec<T>,
    },
    Annulus {
        center: Vec<T>,
        inner: T,
        outer: T,
    },
    Union(Vec<Shape<T>>),
}

impl<T: Real> Shape<T> {
    pub fn contains(&self, p: &[T]) -> bool {
        match self {
            Shape::Ball { center, radius } => dist2(p, center) < *radius * *radius,
            Shape::Ellipse { center, semiaxes } => {
                let s: T = p
                    .iter()
                    .zip(center)
                    .zip(semiaxes)
                    .map(|((&x, &c), &a)| ((x - c) / a).powi(2))
                    .sum();
                s < T::one()
            }
            Shape::Rectangle {
                center,
                half_widths,
            } => p
                .iter()
                .zip(center)
                .zip(half_widths)
                .all(|((&x, &c), &w)| (x - c).abs() < w),
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                let d2 = dist2(p, center);
                d2 >= *inner * *inner && d2 < *outer * *outer
            }
            Shape::Union(parts) => parts.iter().any(|s| s.contains(p)),
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let around = |c: &[T], r: &dyn Fn(usize) -> T| {
            let lo = c.iter().enumerate().map(|(a, &x)| x - r(a)).collect();
            let hi = c.iter().enumerate().map(|(a, &x)| x + r(a)).collect();
            (lo, hi)
        };
        match self {
            Shape::Ball { center, radius } => around(center, &|_| *radius),
            Shape::Ellipse { center, semiaxes } => around(center, &|a| semiaxes[a]),
            Shape::Rectangle {
                center,
                half_widths,
            } => around(center, &|a| half_widths[a]),
            Shape::Annulus { center, outer, .. } => around(center, &|_| *outer),
            Shape::Union(parts) => {
                let mut it = parts.iter().map(|s| s.bounds());
                let (mut lo, mut hi) = it.next().unwrap_or_default();
                for (l, h) in it {
                    for a in 0..lo.len() {
                        lo[a] = lo[a].min(l[a]);
                        hi[a] = hi[a].max(h[a]);
                    }
                }
                (lo, hi)
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let check_len = |v: &[T], what: &str| {
            if v.len() != dim {
                Err(Error::InvalidArgument(format!(
                    "{what} has {} components, expected {dim}",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        let positive = |x: T, what: &str| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{what} must be positive, got {x}"
                )))
            }
        };
        match self {
            Shape::Ball { center, radius } => {
                check_len(center, "center")?;
                positive(*radius, "radius")
            }
            Shape::Ellipse { center, semiaxes } => {
                check_len(center, "center")?;
                check_len(semiaxes, "semiaxes")?;
                semiaxes.iter().try_for_each(|&a| positive(a, "semiaxis"))
            }
            Shape::Rectangle {
                center,
                half_widths,
            } => {
                check_len(center, "center")?;
                check_len(half_widths, "half_widths")?;
                half_widths
                    .iter()
                    .try_for_each(|&a| positive(a, "half width"))
            }
            Shape::Annulus {
                center,
                inner,
                outer,
            } => {
                check_len(center, "center")?;
                positive(*outer, "outer radius")?;
                if !(*inner >= T::zero() && inner < outer) {
                    return Err(Error::InvalidArgument(format!(
                        "annulus needs 0 <= inner < outer, got inner {inner}, outer {outer}"
                    )));
                }
                Ok(())
            }
            Shape::Union(parts) => {
                if parts.is_empty() {
                    return Err(Error::InvalidArgument("empty union".into()));
                }
                parts.iter().try_for_each(|s| s.validate(dim))
            }
        }
    }
}

fn dist2<T: Real>(p: &[T], c: &[T]) -> T {
    p.iter().zip(c).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Rasterizes `shape`: a node is active iff it lies in the shape.
///
/// Fails when the shape is not contained in the container.
pub fn make_shape<T: Real>(grid: &std::sync::Arc<Grid<T>>, shape: &Shape<T>) -> Result<Support<T>> {
    shape.validate(grid.dim())?;
    let (lo, hi) = shape.bounds();
    let side = grid.container().bounding_side();
    if lo.iter().any(|&x| x < T::zero()) || hi.iter().any(|&x| x > side) {
        return Err(Error::ShapeOutsideContainer(format!(
            "bounding box {lo:?}..{hi:?} exceeds [0, {side}]"
        )));
    }
    let mut active = vec![false; grid.node_count()];
    let mut p = vec![T::zero(); grid.dim()];
    for (idx, a) in active.iter_mut().enumerate() {
        grid.position_into(idx, &mut p);
        if shape.contains(&p) {
            if !grid.in_container(idx) {
                return Err(Error::ShapeOutsideContainer(format!(
                    "node {:?} lies in the shape but not in the container",
                    grid.multi_index(idx)
                )));
            }
            *a = true;
        }
    }
    Ok(Support::from_active_unchecked(grid.clone(), active))
}
