//! Dirichlet solver for `∇·(D∇u) − σu = 0` on the unit square.
//!
//! The flux-form five-point scheme is assembled in cell-area-scaled form
//! (each interior row multiplied by `hx·hy`): face coupling `D_face·hy/hx`
//! horizontally and `D_face·hx/hy` vertically, with `D_face` the arithmetic
//! mean of the two adjacent nodes, plus `σ·hx·hy` on the diagonal. This gives
//! an O(1)-scaled symmetric positive definite system for `−∇·D∇ + σ`, which
//! is solved by conjugate gradients preconditioned with modified incomplete
//! Cholesky. The residual contract is the max norm of this scaled residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{same_grid, Grid2D, Point, ScalarField};

pub const DEFAULT_TOL: f64 = 1e-10;

pub fn default_max_iter(grid: &Grid2D) -> usize {
    50 * grid.len()
}

/// Dirichlet values on the boundary nodes, ordered as [`Grid2D::boundary_nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: Grid2D,
    values: Vec<f64>,
}

impl BoundaryData {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        let n = 2 * (grid.nx() - 1) + 2 * (grid.ny() - 1);
        if values.len() != n {
            return Err(Error::validation(format!(
                "boundary data needs {n} values, got {}",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "boundary data has a non-finite value at position {k}"
            )));
        }
        Ok(BoundaryData { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = grid
            .boundary_nodes()
            .into_iter()
            .map(|(i, j)| f(grid.x(i), grid.y(j)))
            .collect();
        Self::new(grid, values)
    }

    /// Boundary trace of a field.
    pub fn from_field(f: &ScalarField) -> Self {
        let g = *f.grid();
        let values = g.boundary_nodes().into_iter().map(|(i, j)| f.at(i, j)).collect();
        BoundaryData { grid: g, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn require_positive(&self, what: &str) -> Result<()> {
        let m = self.min();
        if m > 0.0 {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "{what} must be strictly positive on the boundary (min {m})"
            )))
        }
    }

    fn position(&self, i: usize, j: usize) -> usize {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let n = self.values.len();
        let k = if j == 0 {
            i
        } else if i == nx - 1 {
            (nx - 1) + j
        } else if j == ny - 1 {
            (nx - 1) + (ny - 1) + (nx - 1 - i)
        } else {
            debug_assert_eq!(i, 0);
            2 * (nx - 1) + (ny - 1) + (ny - 1 - j)
        };
        k % n
    }

    /// Value at boundary node `(i, j)`.
    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.grid.is_boundary(i, j));
        self.values[self.position(i, j)]
    }

    /// Linear interpolation along the edge containing `p`.
    pub fn value_at(&self, p: Point) -> Result<f64> {
        const TOL: f64 = 1e-9;
        if !p.in_unit_square() {
            return Err(Error::OutOfDomain(p));
        }
        let p = p.clamp_to_square();
        let g = &self.grid;
        let along = |t: f64, h: f64, n: usize, node: &dyn Fn(usize) -> f64| {
            let s = t / h;
            let c = (s.floor().max(0.0) as usize).min(n - 2);
            let w = (s - c as f64).clamp(0.0, 1.0);
            (1.0 - w) * node(c) + w * node(c + 1)
        };
        if p.y <= TOL {
            Ok(along(p.x, g.hx(), g.nx(), &|i| self.node_value(i, 0)))
        } else if p.y >= 1.0 - TOL {
            Ok(along(p.x, g.hx(), g.nx(), &|i| self.node_value(i, g.ny() - 1)))
        } else if p.x <= TOL {
            Ok(along(p.y, g.hy(), g.ny(), &|j| self.node_value(0, j)))
        } else if p.x >= 1.0 - TOL {
            Ok(along(p.y, g.hy(), g.ny(), &|j| self.node_value(g.nx() - 1, j)))
        } else {
            Err(Error::validation(format!(
                "point ({}, {}) is not on the boundary",
                p.x, p.y
            )))
        }
    }
}

/// Ground-truth diffusion and absorption coefficients.
#[derive(Debug, Clone)]
pub struct CoefficientPair {
    pub d: ScalarField,
    pub sigma: ScalarField,
}

impl CoefficientPair {
    pub fn new(d: ScalarField, sigma: ScalarField) -> Result<Self> {
        same_grid(d.grid(), sigma.grid())?;
        if d.min() <= 0.0 {
            return Err(Error::validation(format!(
                "D must be uniformly positive (min {})",
                d.min()
            )));
        }
        if sigma.min() < 0.0 {
            return Err(Error::validation(format!(
                "sigma must be nonnegative (min {})",
                sigma.min()
            )));
        }
        Ok(CoefficientPair { d, sigma })
    }

    pub fn grid(&self) -> &Grid2D {
        self.d.grid()
    }
}

/// Assembled scaled operator for `−∇·D∇ + σ` on interior nodes.
///
/// Vectors are full-grid sized; entries at boundary nodes are ignored on input
/// and zero on output.
#[derive(Debug, Clone)]
pub struct DirichletOperator {
    grid: Grid2D,
    diag: Vec<f64>,
    /// coupling between node k and k+1
    kx: Vec<f64>,
    /// coupling between node k and k+nx
    ky: Vec<f64>,
}

impl DirichletOperator {
    pub fn new(coeffs: &CoefficientPair) -> Self {
        let g = *coeffs.grid();
        let (nx, ny) = (g.nx(), g.ny());
        let d = coeffs.d.values();
        let s = coeffs.sigma.values();
        let (rx, ry, area) = (g.hy() / g.hx(), g.hx() / g.hy(), g.hx() * g.hy());
        let mut kx = vec![0.0; g.len()];
        let mut ky = vec![0.0; g.len()];
        for j in 0..ny {
            for i in 0..nx {
                let k = g.idx(i, j);
                if i + 1 < nx {
                    kx[k] = 0.5 * (d[k] + d[k + 1]) * rx;
                }
                if j + 1 < ny {
                    ky[k] = 0.5 * (d[k] + d[k + nx]) * ry;
                }
            }
        }
        let mut diag = vec![0.0; g.len()];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                diag[k] = kx[k] + kx[k - 1] + ky[k] + ky[k - nx] + s[k] * area;
            }
        }
        DirichletOperator { grid: g, diag, kx, ky }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Interior node indices in storage order.
    pub fn interior(&self) -> Vec<usize> {
        let g = &self.grid;
        (1..g.ny() - 1)
            .flat_map(|j| (1..g.nx() - 1).map(move |i| g.idx(i, j)))
            .collect()
    }

    /// `A p` treating boundary entries of `p` as zero.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; p.len()];
        self.apply_into(p, &mut out, false);
        out
    }

    /// Scaled residual `b − A u` at interior nodes, with `u`'s boundary
    /// entries acting as the Dirichlet data.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out, true);
        out.iter_mut().for_each(|v| *v = -*v);
        out
    }

    fn apply_into(&self, p: &[f64], out: &mut [f64], with_boundary: bool) {
        let g = &self.grid;
        let nx = g.nx();
        let masked = |i: usize, j: usize, k: usize| {
            if with_boundary || g.is_interior(i, j) {
                p[k]
            } else {
                0.0
            }
        };
        for j in 1..g.ny() - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                out[k] = self.diag[k] * p[k]
                    - self.kx[k] * masked(i + 1, j, k + 1)
                    - self.kx[k - 1] * masked(i - 1, j, k - 1)
                    - self.ky[k] * masked(i, j + 1, k + nx)
                    - self.ky[k - nx] * masked(i, j - 1, k - nx);
            }
        }
    }
}

/// Modified incomplete Cholesky, level zero, for the five-point operator.
struct MicPreconditioner {
    grid: Grid2D,
    precon: Vec<f64>,
    ax: Vec<f64>,
    ay: Vec<f64>,
}

impl MicPreconditioner {
    const TAU: f64 = 0.97;
    const SAFETY: f64 = 0.25;

    fn new(op: &DirichletOperator) -> Self {
        let g = op.grid;
        let (nx, ny) = (g.nx(), g.ny());
        // off-diagonal matrix entries between interior unknowns only
        let mut ax = vec![0.0; g.len()];
        let mut ay = vec![0.0; g.len()];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                if i + 1 < nx - 1 {
                    ax[k] = -op.kx[k];
                }
                if j + 1 < ny - 1 {
                    ay[k] = -op.ky[k];
                }
            }
        }
        let mut precon = vec![0.0; g.len()];
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                let (pl, pb) = (precon[k - 1], precon[k - nx]);
                let mut e = op.diag[k]
                    - (ax[k - 1] * pl).powi(2)
                    - (ay[k - nx] * pb).powi(2)
                    - Self::TAU
                        * (ax[k - 1] * ay[k - 1] * pl * pl + ay[k - nx] * ax[k - nx] * pb * pb);
                if e < Self::SAFETY * op.diag[k] {
                    e = op.diag[k];
                }
                precon[k] = 1.0 / e.sqrt();
            }
        }
        MicPreconditioner { grid: g, precon, ax, ay }
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let (pc, ax, ay) = (&self.precon, &self.ax, &self.ay);
        z.iter_mut().for_each(|v| *v = 0.0);
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = g.idx(i, j);
                let t = r[k] - ax[k - 1] * pc[k - 1] * z[k - 1] - ay[k - nx] * pc[k - nx] * z[k - nx];
                z[k] = t * pc[k];
            }
        }
        for j in (1..ny - 1).rev() {
            for i in (1..nx - 1).rev() {
                let k = g.idx(i, j);
                let t = z[k] - pc[k] * (ax[k] * z[k + 1] + ay[k] * z[k + nx]);
                z[k] = t * pc[k];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve_dirichlet(
    coeffs: &CoefficientPair,
    f: &BoundaryData,
    tol: f64,
    max_iter: usize,
) -> Result<ScalarField> {
    solve_dirichlet_with_stats(coeffs, f, tol, max_iter).map(|(u, _)| u)
}

pub fn solve_dirichlet_with_stats(
    coeffs: &CoefficientPair,
    f: &BoundaryData,
    tol: f64,
    max_iter: usize,
) -> Result<(ScalarField, SolveStats)> {
    let g = *coeffs.grid();
    same_grid(&g, f.grid())?;
    if !(tol > 0.0) {
        return Err(Error::validation(format!("tol must be positive, got {tol}")));
    }
    // re-run the invariant checks: fields may have been mutated through pub fields
    let coeffs = CoefficientPair::new(coeffs.d.clone(), coeffs.sigma.clone())?;

    let op = DirichletOperator::new(&coeffs);
    let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
    let mut u = vec![mean; g.len()];
    for ((i, j), v) in g.boundary_nodes().into_iter().zip(f.values()) {
        u[g.idx(i, j)] = *v;
    }

    let mut r = op.residual(&u);
    let mut res = max_abs(&r);
    let mut iterations = 0;
    if res > tol {
        let pc = MicPreconditioner::new(&op);
        let mut z = vec![0.0; g.len()];
        pc.apply(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut q = vec![0.0; g.len()];
        while res > tol {
            if iterations >= max_iter {
                return Err(Error::SolverFailure {
                    iterations,
                    residual: max_abs(&op.residual(&u)),
                });
            }
            iterations += 1;
            op.apply_into(&p, &mut q, false);
            let alpha = rz / dot(&p, &q);
            for k in 0..u.len() {
                u[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            res = max_abs(&r);
            if res <= tol {
                // confirm against the true residual before accepting
                r = op.residual(&u);
                res = max_abs(&r);
                if res <= tol {
                    break;
                }
                pc.apply(&r, &mut z);
                p.copy_from_slice(&z);
                rz = dot(&r, &z);
                continue;
            }
            pc.apply(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..p.len() {
                p[k] = z[k] + beta * p[k];
            }
        }
    }
    let u = ScalarField::new(g, u)?;
    Ok((u, SolveStats { iterations, residual: res }))
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    pub min_value: f64,
    pub min_i: usize,
    pub min_j: usize,
    pub min_x: f64,
    pub min_y: f64,
}

/// Maximum-principle post-check: positive boundary data must give a positive solution.
pub fn check_positivity(u: &ScalarField, f: &BoundaryData) -> Result<PositivityReport> {
    same_grid(u.grid(), f.grid())?;
    f.require_positive("boundary data")?;
    let g = u.grid();
    let (k, &min_value) = u
        .values()
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");
    let (i, j) = g.coords(k);
    Ok(PositivityReport {
        pass: min_value > 0.0,
        min_value,
        min_i: i,
        min_j: j,
        min_x: g.x(i),
        min_y: g.y(j),
    })
}
