//! Rayleigh quotients and the smallest eigenpair of the discrete pencil
//! `A u = Λ K u` on a support.
//!
//! `A` is the Gram matrix of the zero-extended Laplacian stencil, so
//! `u^T A u` is exactly the discrete Laplacian energy. All matrices are kept
//! in units where the stencil coefficients are integers (`h = 1`); eigenvalues
//! are rescaled on the way out, which makes the assembled problem invariant
//! under lattice translations down to the last bit.

use crate::error::{Error, Result};
use crate::grid::{
    discrete_norms, laplacian_of_values, one_sided_gradient_magnitude, Field, Support,
};
use crate::linalg::{symmetric_eigen, EnvelopeCholesky, EnvelopeMatrix};
use crate::scalar::{dot, norm, Real};
use crate::theory::ExtReal;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// `∫|Δv|² / ∫|∇v|²`.
    #[default]
    Buckling,
    /// `∫|Δv|² / ∫v²`.
    FundamentalTone,
}

/// `∫|Δv|² / denominator`, infinite when the denominator vanishes.
pub fn rayleigh_quotient<T: Real>(field: &Field<T>, objective: Objective) -> ExtReal<T> {
    let e = discrete_norms(field);
    let den = match objective {
        Objective::Buckling => e.dirichlet,
        Objective::FundamentalTone => e.l2,
    };
    if den == T::zero() {
        ExtReal::Infinite
    } else {
        ExtReal::Finite(e.laplacian / den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenOptions<T> {
    /// Target for `‖Au − ΛKu‖ / (Λ ‖Ku‖)`.
    pub tol: T,
    pub max_iter: usize,
    /// Subspace size for the block iteration.
    pub block: usize,
}

impl<T: Real> Default for EigenOptions<T> {
    fn default() -> Self {
        EigenOptions {
            tol: T::default_eigen_tol(),
            max_iter: 10_000,
            block: 4,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult<T> {
    pub lambda: T,
    /// Eigenfunction, normalized so the denominator energy is one.
    pub field: Field<T>,
    pub residual: T,
    pub iterations: usize,
    /// Achieved denominator energy of `field`.
    pub normalization: T,
    pub objective: Objective,
}

/// Assembled discrete pencil on one support.
pub struct Pencil<T> {
    support: Support<T>,
    objective: Objective,
    /// Compressed rows of the Laplacian stencil restricted to the support's
    /// columns; one row per node of the support and of its outer boundary.
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    coefs: Vec<T>,
    /// Face neighbors inside the support, local numbering.
    adj_ptr: Vec<usize>,
    adj: Vec<u32>,
    factor: EnvelopeCholesky<T>,
}

impl<T: Real> Pencil<T> {
    pub fn assemble(support: &Support<T>, objective: Objective) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        let grid = support.grid();
        let m = support.len();
        let mut local = vec![u32::MAX; grid.node_count()];
        for (k, &i) in support.indices().iter().enumerate() {
            local[i] = k as u32;
        }
        let center = -T::from_count(2 * grid.dim());

        let mut ring: Vec<usize> = support.indices().to_vec();
        ring.extend(support.outer_boundary());
        ring.sort_unstable();

        let mut row_ptr = Vec::with_capacity(ring.len() + 1);
        let mut cols = Vec::new();
        let mut coefs = Vec::new();
        row_ptr.push(0);
        for &r in &ring {
            if local[r] != u32::MAX {
                cols.push(local[r]);
                coefs.push(center);
            }
            grid.for_each_neighbor(r, |j| {
                if local[j] != u32::MAX {
                    cols.push(local[j]);
                    coefs.push(T::one());
                }
            });
            row_ptr.push(cols.len());
        }

        let mut adj_ptr = Vec::with_capacity(m + 1);
        let mut adj = Vec::new();
        adj_ptr.push(0);
        for &i in support.indices() {
            grid.for_each_neighbor(i, |j| {
                if local[j] != u32::MAX {
                    adj.push(local[j]);
                }
            });
            adj_ptr.push(adj.len());
        }

        let mut start: Vec<usize> = (0..m).collect();
        for w in row_ptr.windows(2) {
            let row = &cols[w[0]..w[1]];
            if let Some(&lo) = row.iter().min() {
                for &c in row {
                    let c = c as usize;
                    start[c] = start[c].min(lo as usize);
                }
            }
        }
        let mut a = EnvelopeMatrix::zeros(start);
        for w in row_ptr.windows(2) {
            let (rc, rv) = (&cols[w[0]..w[1]], &coefs[w[0]..w[1]]);
            for (x, (&ci, &vi)) in rc.iter().zip(rv).enumerate() {
                for (&cj, &vj) in rc[..=x].iter().zip(&rv[..=x]) {
                    let (p, q) = if ci >= cj { (ci, cj) } else { (cj, ci) };
                    // diagonal products appear once per row, off-diagonal pairs once per ordered pair
                    a.add(p as usize, q as usize, vi * vj);
                }
            }
        }
        let factor = a.cholesky()?;
        Ok(Pencil {
            support: support.clone(),
            objective,
            row_ptr,
            cols,
            coefs,
            adj_ptr,
            adj,
            factor,
        })
    }

    pub fn support(&self) -> &Support<T> {
        &self.support
    }

    pub fn size(&self) -> usize {
        self.support.len()
    }

    /// `Â x = Lᵀ L x` in unit-spacing units.
    pub fn apply_a(&self, x: &[T], y: &mut [T]) {
        y.iter_mut().for_each(|v| *v = T::zero());
        for w in self.row_ptr.windows(2) {
            let (rc, rv) = (&self.cols[w[0]..w[1]], &self.coefs[w[0]..w[1]]);
            let lx: T = rc.iter().zip(rv).map(|(&c, &v)| v * x[c as usize]).sum();
            for (&c, &v) in rc.iter().zip(rv) {
                y[c as usize] += v * lx;
            }
        }
    }

    /// `K̂ x`: graph Laplacian with Dirichlet closure, or the identity.
    pub fn apply_k(&self, x: &[T], y: &mut [T]) {
        match self.objective {
            Objective::FundamentalTone => y.copy_from_slice(x),
            Objective::Buckling => {
                let d = T::from_count(2 * self.support.grid().dim());
                for (k, yk) in y.iter_mut().enumerate() {
                    let s: T = self.adj[self.adj_ptr[k]..self.adj_ptr[k + 1]]
                        .iter()
                        .map(|&j| x[j as usize])
                        .sum();
                    *yk = d * x[k] - s;
                }
            }
        }
    }

    /// `Â x` as an unevaluated sum `hi + lo` (double-word arithmetic).
    ///
    /// The stencil sums cancel down to `O(h^4)` of their terms; plain
    /// summation would put a resolution-dependent floor under every residual.
    fn apply_a_compensated(&self, x: &[T]) -> (Vec<T>, Vec<T>) {
        let m = x.len();
        let mut y_hi = vec![T::zero(); m];
        let mut y_lo = vec![T::zero(); m];
        for w in self.row_ptr.windows(2) {
            let (rc, rv) = (&self.cols[w[0]..w[1]], &self.coefs[w[0]..w[1]]);
            let (mut s, mut c) = (T::zero(), T::zero());
            for (&col, &v) in rc.iter().zip(rv) {
                let (p, pe) = two_prod(v, x[col as usize]);
                let (t, te) = two_sum(s, p);
                s = t;
                c += te + pe;
            }
            for (&col, &v) in rc.iter().zip(rv) {
                let k = col as usize;
                let (p, pe) = two_prod(v, s);
                let (t, te) = two_sum(y_hi[k], p);
                y_hi[k] = t;
                y_lo[k] += te + pe + v * c;
            }
        }
        (y_hi, y_lo)
    }

    fn apply_k_compensated(&self, x: &[T], k: usize) -> (T, T) {
        match self.objective {
            Objective::FundamentalTone => (x[k], T::zero()),
            Objective::Buckling => {
                let d = T::from_count(2 * self.support.grid().dim());
                let (mut s, mut c) = two_prod(d, x[k]);
                for &j in &self.adj[self.adj_ptr[k]..self.adj_ptr[k + 1]] {
                    let (t, te) = two_sum(s, -x[j as usize]);
                    s = t;
                    c += te;
                }
                (s, c)
            }
        }
    }

    /// Relative residual `‖Âu − λ̂K̂u‖ / (λ̂‖K̂u‖)`, compensated.
    pub fn relative_residual(&self, u: &[T], lam_hat: T) -> T {
        let (y_hi, y_lo) = self.apply_a_compensated(u);
        let mut r2 = T::zero();
        let mut k2 = T::zero();
        for k in 0..u.len() {
            let (ku_hi, ku_lo) = self.apply_k_compensated(u, k);
            let (p, pe) = two_prod(lam_hat, ku_hi);
            let r = (y_hi[k] - p) + (y_lo[k] - lam_hat * ku_lo - pe);
            r2 += r * r;
            let kk = ku_hi + ku_lo;
            k2 += kk * kk;
        }
        r2.sqrt() / (lam_hat.abs() * k2.sqrt())
    }

    /// Solves `Â z = b` with one step of iterative refinement against a
    /// compensated residual.
    pub fn solve_a_refined(&self, b: &[T]) -> Vec<T> {
        let mut z = b.to_vec();
        self.solve_a(&mut z);
        let (hi, lo) = self.apply_a_compensated(&z);
        let mut r: Vec<T> = b
            .iter()
            .zip(hi.iter().zip(&lo))
            .map(|(&bi, (&h, &l))| (bi - h) - l)
            .collect();
        self.solve_a(&mut r);
        z.iter_mut().zip(&r).for_each(|(zi, &d)| *zi += d);
        z
    }

    pub fn solve_a(&self, b: &mut [T]) {
        self.factor.solve_in_place(b);
    }

    /// Factor converting eigenvalues of the unit-spacing pencil to physical ones.
    fn lambda_scale(&self) -> T {
        let h = self.support.grid().spacing();
        match self.objective {
            Objective::Buckling => (h * h).recip(),
            Objective::FundamentalTone => (h * h * h * h).recip(),
        }
    }

    /// Physical denominator energy of a local vector normalized in `K̂`.
    fn energy_scale(&self) -> T {
        let g = self.support.grid();
        let h = g.spacing();
        match self.objective {
            Objective::Buckling => g.cell_volume() / (h * h),
            Objective::FundamentalTone => g.cell_volume(),
        }
    }
}

/// Smallest eigenpair with the default bounding-box initial guess.
pub fn min_eigenpair<T: Real>(
    support: &Support<T>,
    objective: Objective,
    opts: &EigenOptions<T>,
) -> Result<EigenResult<T>> {
    let pencil = Pencil::assemble(support, objective)?;
    solve_pencil(&pencil, opts, None)
}

/// Smallest eigenpair started from `guess` restricted to the support.
pub fn min_eigenpair_from<T: Real>(
    support: &Support<T>,
    objective: Objective,
    opts: &EigenOptions<T>,
    guess: &Field<T>,
) -> Result<EigenResult<T>> {
    let pencil = Pencil::assemble(support, objective)?;
    let local: Vec<T> = support
        .indices()
        .iter()
        .map(|&i| guess.values()[i])
        .collect();
    solve_pencil(&pencil, opts, Some(&local))
}

/// Product of distances to the faces of the support's bounding box (padded by
/// one cell), positive everywhere on the support.
fn bounding_box_guess<T: Real>(support: &Support<T>) -> Vec<T> {
    let grid = support.grid();
    let dim = grid.dim();
    let mut lo = vec![usize::MAX; dim];
    let mut hi = vec![0usize; dim];
    for &i in support.indices() {
        for a in 0..dim {
            let k = grid.axis_index(i, a);
            lo[a] = lo[a].min(k);
            hi[a] = hi[a].max(k);
        }
    }
    support
        .indices()
        .iter()
        .map(|&i| {
            (0..dim).fold(T::one(), |acc, a| {
                let k = grid.axis_index(i, a);
                acc * T::from_count(k + 1 - lo[a]) * T::from_count(hi[a] + 1 - k)
            })
        })
        .collect()
}

/// Deterministic values in `[-1, 1)`.
fn scramble<T: Real>(seed: u64, len: usize) -> Vec<T> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..len)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            T::lit((s >> 11) as f64 / (1u64 << 52) as f64 - 1.0)
        })
        .collect()
}

pub fn solve_pencil<T: Real>(
    pencil: &Pencil<T>,
    opts: &EigenOptions<T>,
    guess: Option<&[T]>,
) -> Result<EigenResult<T>> {
    let m = pencil.size();
    let p = opts.block.max(1).min(m);
    let base = bounding_box_guess(&pencil.support);
    let first = match guess {
        Some(g) if g.iter().any(|&v| v != T::zero()) => g.to_vec(),
        _ => base.clone(),
    };
    let mut x: Vec<Vec<T>> = vec![first];
    for k in 1..p {
        let r = scramble::<T>(k as u64, m);
        x.push(base.iter().zip(r).map(|(&b, r)| b * r).collect());
    }

    let mut y = vec![T::zero(); m];
    let mut best: Option<(T, Vec<T>, T)> = None;
    // progress is measured against the last residual that beat its
    // predecessor by 10%
    let mut reference = T::infinity();
    let mut since_improved = 0usize;
    let mut flat = 0usize;
    let mut refine = false;
    for iter in 1..=opts.max_iter {
        // z = A^{-1} K x, keeping y = K x = A z alongside for the projection
        let mut zs = Vec::with_capacity(x.len());
        let mut ys = Vec::with_capacity(x.len());
        for xk in &x {
            pencil.apply_k(xk, &mut y);
            let z = if refine {
                pencil.solve_a_refined(&y)
            } else {
                let mut z = y.clone();
                pencil.solve_a(&mut z);
                z
            };
            zs.push(z);
            ys.push(y.clone());
        }
        let mut ws: Vec<Vec<T>> = zs
            .iter()
            .map(|z| {
                let mut w = vec![T::zero(); m];
                pencil.apply_k(z, &mut w);
                w
            })
            .collect();

        // K-orthonormalize (modified Gram–Schmidt), dropping dependent columns
        let mut keep: Vec<usize> = Vec::new();
        for k in 0..zs.len() {
            let before = dot(&zs[k], &ws[k]).sqrt();
            for &j in &keep {
                let c = dot(&zs[j], &ws[k]);
                for i in 0..m {
                    let (zj, wj, yj) = (zs[j][i], ws[j][i], ys[j][i]);
                    zs[k][i] -= c * zj;
                    ws[k][i] -= c * wj;
                    ys[k][i] -= c * yj;
                }
            }
            let nrm = dot(&zs[k], &ws[k]);
            if !(nrm > T::zero()) || nrm.sqrt() <= T::lit(1e-10) * before {
                continue;
            }
            let inv = nrm.sqrt().recip();
            for i in 0..m {
                zs[k][i] *= inv;
                ws[k][i] *= inv;
                ys[k][i] *= inv;
            }
            keep.push(k);
        }
        if keep.is_empty() {
            return Err(Error::Invariant("eigensolver subspace collapsed".into()));
        }
        let q = keep.len();
        let mut h = vec![T::zero(); q * q];
        for (a, &ka) in keep.iter().enumerate() {
            for (b, &kb) in keep.iter().enumerate().take(a + 1) {
                let v = (dot(&zs[ka], &ys[kb]) + dot(&zs[kb], &ys[ka])) / T::lit(2.0);
                h[a * q + b] = v;
                h[b * q + a] = v;
            }
        }
        let (mu, c) = symmetric_eigen(&h, q);
        let combine = |src: &Vec<Vec<T>>, col: usize| {
            let mut out = vec![T::zero(); m];
            for (a, &ka) in keep.iter().enumerate() {
                let coef = c[a * q + col];
                for i in 0..m {
                    out[i] += coef * src[ka][i];
                }
            }
            out
        };
        x = (0..q).map(|col| combine(&zs, col)).collect();
        let ku = combine(&ws, 0);
        let lam = mu[0];

        let res = if norm(&ku) > T::zero() {
            pencil.relative_residual(&x[0], lam)
        } else {
            T::infinity()
        };

        // plain back-substitution has hit its accuracy floor
        if best.as_ref().is_some_and(|b| res >= b.2) {
            flat += 1;
            if flat >= 3 {
                refine = true;
            }
        } else {
            flat = 0;
        }
        if res < reference * T::lit(0.9) {
            reference = res;
            since_improved = 0;
        } else {
            since_improved += 1;
        }
        if best.as_ref().is_none_or(|b| res < b.2) {
            best = Some((lam, x[0].clone(), res));
        }
        if res <= opts.tol {
            return Ok(finish(pencil, lam, x.swap_remove(0), res, iter));
        }
        if since_improved >= 200 {
            let (_, _, r) = best.unwrap();
            return Err(Error::NonConvergence {
                iterations: iter,
                residual: r.as_f64(),
            });
        }
    }
    let r = best.map_or(f64::INFINITY, |b| b.2.as_f64());
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        residual: r,
    })
}

#[inline]
fn two_sum<T: Real>(a: T, b: T) -> (T, T) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod<T: Real>(a: T, b: T) -> (T, T) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

fn finish<T: Real>(
    pencil: &Pencil<T>,
    lam_hat: T,
    mut u: Vec<T>,
    residual: T,
    iterations: usize,
) -> EigenResult<T> {
    // K̂-normalized in unit spacing; rescale so the physical energy is one
    let mut ku = vec![T::zero(); u.len()];
    pencil.apply_k(&u, &mut ku);
    let unit = dot(&u, &ku);
    let scale = (unit * pencil.energy_scale()).sqrt().recip();
    let mut imax = 0;
    for i in 0..u.len() {
        if u[i].abs() > u[imax].abs() {
            imax = i;
        }
    }
    let sign = if u[imax] < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    u.iter_mut().for_each(|v| *v *= scale * sign);
    pencil.apply_k(&u, &mut ku);
    let normalization = dot(&u, &ku) * pencil.energy_scale();
    EigenResult {
        lambda: lam_hat * pencil.lambda_scale(),
        field: Field::from_local(&pencil.support, &u),
        residual,
        iterations,
        normalization,
        objective: pencil.objective,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct PdeResidual<T> {
    /// RMS of `Δ_h² u + Λ Δ_h u` (or `Δ_h² u − Λ u`) over nodes whose full
    /// biharmonic stencil is active; `None` when no such node exists.
    pub interior_residual_rms: Option<T>,
    /// The same RMS divided by `Λ · rms(Δ_h u)` on those nodes.
    pub interior_residual_relative: Option<T>,
    pub interior_nodes: usize,
    /// Largest one-sided gradient magnitude on the outer boundary.
    pub boundary_gradient_max: T,
}

pub fn pde_residual<T: Real>(eig: &EigenResult<T>, support: &Support<T>) -> PdeResidual<T> {
    let grid = support.grid();
    let u = eig.field.values();
    let lap = laplacian_of_values(grid, u);
    let bilap = laplacian_of_values(grid, &lap);
    let full_stencil = |i: usize| {
        let mut ok = true;
        grid.for_each_neighbor(i, |j| {
            if !support.contains(j) {
                ok = false;
            } else {
                grid.for_each_neighbor(j, |k| ok &= support.contains(k));
            }
        });
        // a node on the array edge lacks neighbors and therefore a full stencil
        let mut count = 0;
        grid.for_each_neighbor(i, |_| count += 1);
        ok && count == 2 * grid.dim()
    };
    let mut sum_r = T::zero();
    let mut sum_l = T::zero();
    let mut n = 0usize;
    for &i in support.indices() {
        if !full_stencil(i) {
            continue;
        }
        let r = match eig.objective {
            Objective::Buckling => bilap[i] + eig.lambda * lap[i],
            Objective::FundamentalTone => bilap[i] - eig.lambda * u[i],
        };
        let l = match eig.objective {
            Objective::Buckling => lap[i],
            Objective::FundamentalTone => u[i],
        };
        sum_r += r * r;
        sum_l += l * l;
        n += 1;
    }
    let boundary_gradient_max = support
        .outer_boundary()
        .into_iter()
        .map(|i| one_sided_gradient_magnitude(grid, u, i))
        .fold(T::zero(), T::max);
    let (rms, rel) = if n == 0 {
        (None, None)
    } else {
        let nn = T::from_count(n);
        let rms = (sum_r / nn).sqrt();
        let lrms = (sum_l / nn).sqrt();
        (Some(rms), Some(rms / (eig.lambda * lrms)))
    };
    PdeResidual {
        interior_residual_rms: rms,
        interior_residual_relative: rel,
        interior_nodes: n,
        boundary_gradient_max,
    }
}
