//! Uniform node-centred grid on the unit square, field containers, finite
//! difference operators and bilinear interpolation.
//!
//! Node `(i, j)` sits at `(i·hx, j·hy)` and is stored at `j·nx + i`, so row 0
//! is the bottom edge `y = 0`.

use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Points within this distance outside the closed square are clamped onto it.
pub const CLAMP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// True when the point lies in the closed unit square up to [`CLAMP_TOL`].
    pub fn in_unit_square(self) -> bool {
        let ok = |v: f64| (-CLAMP_TOL..=1.0 + CLAMP_TOL).contains(&v);
        ok(self.x) && ok(self.y)
    }

    /// Nearest point of the closed unit square.
    pub fn clamp_to_square(self) -> Point {
        Point::new(self.x.clamp(0.0, 1.0), self.y.clamp(0.0, 1.0))
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::validation(format!(
                "grid needs at least 3 nodes per direction, got {nx}x{ny}"
            )));
        }
        Ok(Grid2D {
            nx,
            ny,
            hx: 1.0 / (nx - 1) as f64,
            hy: 1.0 / (ny - 1) as f64,
        })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn hx(&self) -> f64 {
        self.hx
    }

    pub fn hy(&self) -> f64 {
        self.hy
    }

    pub fn h_min(&self) -> f64 {
        self.hx.min(self.hy)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(self.x(i), self.y(j))
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        !self.is_boundary(i, j)
    }

    /// Boundary nodes counterclockwise from the origin: bottom edge, right
    /// edge, top edge (right to left), left edge (top to bottom).
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = Vec::with_capacity(2 * (nx - 1) + 2 * (ny - 1));
        out.extend((0..nx - 1).map(|i| (i, 0)));
        out.extend((0..ny - 1).map(|j| (nx - 1, j)));
        out.extend((1..nx).rev().map(|i| (i, ny - 1)));
        out.extend((1..ny).rev().map(|j| (0, j)));
        out
    }

    /// Cell `(ci, cj)` containing `p` (upper cells take their lower/left faces)
    /// and the local coordinates in `[0, 1]²`.
    pub fn locate(&self, p: Point) -> Result<(usize, usize, f64, f64)> {
        if !p.is_finite() || !p.in_unit_square() {
            return Err(Error::OutOfDomain(p));
        }
        let p = p.clamp_to_square();
        let (ci, s) = split(p.x / self.hx, self.nx - 1);
        let (cj, t) = split(p.y / self.hy, self.ny - 1);
        Ok((ci, cj, s, t))
    }

    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        cj * (self.nx - 1) + ci
    }

    /// Grid obtained by subdividing every cell `factor` times in each direction.
    pub fn refined(&self, factor: usize) -> Result<Grid2D> {
        if factor == 0 {
            return Err(Error::validation("refinement factor must be >= 1"));
        }
        Grid2D::new((self.nx - 1) * factor + 1, (self.ny - 1) * factor + 1)
    }
}

fn split(v: f64, cells: usize) -> (usize, f64) {
    let c = (v.floor().max(0.0) as usize).min(cells - 1);
    (c, (v - c as f64).clamp(0.0, 1.0))
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::validation(format!(
            "{what} has a non-finite value at flat index {k}"
        ))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::validation(format!(
                "scalar field needs {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        check_finite(&values, "scalar field")?;
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid2D, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node.
    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        ScalarField { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid2D, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        ScalarField::new(self.grid, values)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScalarField::new(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Injection onto a coarser grid whose nodes are every `factor`-th node of this one.
    pub fn restrict_to(&self, coarse: &Grid2D, factor: usize) -> Result<Self> {
        if factor == 0 || (coarse.nx() - 1) * factor + 1 != self.grid.nx()
            || (coarse.ny() - 1) * factor + 1 != self.grid.ny()
        {
            return Err(Error::validation(format!(
                "cannot restrict a {}x{} field by {factor} onto {}x{}",
                self.grid.nx(),
                self.grid.ny(),
                coarse.nx(),
                coarse.ny()
            )));
        }
        let mut values = Vec::with_capacity(coarse.len());
        for j in 0..coarse.ny() {
            for i in 0..coarse.nx() {
                values.push(self.at(i * factor, j * factor));
            }
        }
        Ok(ScalarField::from_raw(*coarse, values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid2D, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        if vx.len() != grid.len() || vy.len() != grid.len() {
            return Err(Error::validation(format!(
                "vector field needs {} values per component",
                grid.len()
            )));
        }
        check_finite(&vx, "vector field x-component")?;
        check_finite(&vy, "vector field y-component")?;
        Ok(VectorField { grid, vx, vy })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut vx = Vec::with_capacity(grid.len());
        let mut vy = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (a, b) = f(grid.x(i), grid.y(j));
                vx.push(a);
                vy.push(b);
            }
        }
        VectorField { grid, vx, vy }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    pub fn at(&self, i: usize, j: usize) -> Point {
        let k = self.grid.idx(i, j);
        Point::new(self.vx[k], self.vy[k])
    }

    pub fn max_norm(&self) -> f64 {
        self.vx
            .iter()
            .zip(&self.vy)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Componentwise product `s·v`.
    pub fn scaled_by(&self, s: &ScalarField) -> Result<Self> {
        same_grid(&self.grid, s.grid())?;
        let vx = self.vx.iter().zip(s.values()).map(|(a, b)| a * b).collect();
        let vy = self.vy.iter().zip(s.values()).map(|(a, b)| a * b).collect();
        VectorField::new(self.grid, vx, vy)
    }
}

pub(crate) fn same_grid(a: &Grid2D, b: &Grid2D) -> Result<()> {
    if a.nx() != b.nx() || a.ny() != b.ny() {
        return Err(Error::validation(format!(
            "grid mismatch: {}x{} vs {}x{}",
            a.nx(),
            a.ny(),
            b.nx(),
            b.ny()
        )));
    }
    Ok(())
}

/// Derivative along one line of `n` samples at `stride`: central inside,
/// second-order one-sided at the two ends. With four or more nodes the end
/// stencil is chosen so its leading error `h²f‴/6` matches the central one;
/// a central difference of the result taken next to the boundary then stays
/// second order instead of dropping to first.
fn diff_line(f: &[f64], out: &mut [f64], start: usize, stride: usize, n: usize, h: f64) {
    let at = |m: usize| f[start + m * stride];
    for m in 1..n - 1 {
        out[start + m * stride] = (at(m + 1) - at(m - 1)) / (2.0 * h);
    }
    let (first, last) = if n >= 4 {
        (
            (-4.0 * at(0) + 7.0 * at(1) - 4.0 * at(2) + at(3)) / (2.0 * h),
            (4.0 * at(n - 1) - 7.0 * at(n - 2) + 4.0 * at(n - 3) - at(n - 4)) / (2.0 * h),
        )
    } else {
        (
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h),
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h),
        )
    };
    out[start] = first;
    out[start + (n - 1) * stride] = last;
}

fn d_dx(grid: &Grid2D, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; f.len()];
    for j in 0..ny {
        diff_line(f, &mut out, j * nx, 1, nx, grid.hx());
    }
    out
}

fn d_dy(grid: &Grid2D, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = vec![0.0; f.len()];
    for i in 0..nx {
        diff_line(f, &mut out, i, nx, ny, grid.hy());
    }
    out
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let g = *f.grid();
    VectorField {
        grid: g,
        vx: d_dx(&g, f.values()),
        vy: d_dy(&g, f.values()),
    }
}

/// Five-point Laplacian. Boundary nodes copy the value of the nearest interior
/// node and should not be trusted beyond that.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let (ihx2, ihy2) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
    let v = f.values();
    let mut out = vec![0.0; v.len()];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let k = g.idx(i, j);
            out[k] = (v[k - 1] - 2.0 * v[k] + v[k + 1]) * ihx2
                + (v[k - nx] - 2.0 * v[k] + v[k + nx]) * ihy2;
        }
    }
    for (i, j) in g.boundary_nodes() {
        let src = g.idx(i.clamp(1, nx - 2), j.clamp(1, ny - 2));
        out[g.idx(i, j)] = out[src];
    }
    ScalarField::from_raw(g, out)
}

/// Central-difference divergence; boundary nodes use the one-sided stencils
/// and are unreliable.
pub fn divergence(v: &VectorField) -> ScalarField {
    let g = *v.grid();
    let dx = d_dx(&g, v.vx());
    let dy = d_dy(&g, v.vy());
    ScalarField::from_raw(g, dx.iter().zip(&dy).map(|(a, b)| a + b).collect())
}

fn bilinear(grid: &Grid2D, data: &[f64], ci: usize, cj: usize, s: f64, t: f64) -> f64 {
    let k = grid.idx(ci, cj);
    let nx = grid.nx();
    let (f00, f10, f01, f11) = (data[k], data[k + 1], data[k + nx], data[k + nx + 1]);
    (1.0 - t) * ((1.0 - s) * f00 + s * f10) + t * ((1.0 - s) * f01 + s * f11)
}

pub fn interp_scalar(f: &ScalarField, p: Point) -> Result<f64> {
    let (ci, cj, s, t) = f.grid().locate(p)?;
    Ok(bilinear(f.grid(), f.values(), ci, cj, s, t))
}

pub fn interp_vector(v: &VectorField, p: Point) -> Result<Point> {
    let (ci, cj, s, t) = v.grid().locate(p)?;
    Ok(Point::new(
        bilinear(v.grid(), v.vx(), ci, cj, s, t),
        bilinear(v.grid(), v.vy(), ci, cj, s, t),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn interior(g: &Grid2D) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..g.ny() - 1).flat_map(move |j| (1..g.nx() - 1).map(move |i| (i, j)))
    }

    #[test]
    fn grid_rejects_tiny() {
        assert!(Grid2D::new(2, 5).is_err());
        assert!(Grid2D::new(5, 2).is_err());
        let g = Grid2D::new(3, 7).unwrap();
        assert!((g.hx() * 2.0 - 1.0).abs() < 1e-14);
        assert!((g.hy() * 6.0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_order_is_counterclockwise() {
        let g = Grid2D::new(4, 3).unwrap();
        let b = g.boundary_nodes();
        assert_eq!(b.len(), 2 * 3 + 2 * 2);
        assert_eq!(b[0], (0, 0));
        assert_eq!(b[3], (3, 0));
        assert_eq!(b[5], (3, 2));
        assert_eq!(b[8], (0, 2));
        assert_eq!(*b.last().unwrap(), (0, 1));
    }

    #[test]
    fn gradient_of_affine_and_constant() {
        let g = Grid2D::square(5).unwrap();
        let grad = gradient(&ScalarField::from_fn(g, |x, _| x));
        assert!(grad.vx().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(grad.vy().iter().all(|v| v.abs() < 1e-12));
        let grad = gradient(&ScalarField::constant(g, 7.0));
        assert_eq!(grad.max_norm(), 0.0);
    }

    #[test]
    fn gradient_exact_on_quadratic_including_boundary() {
        let g = Grid2D::square(9).unwrap();
        let grad = gradient(&ScalarField::from_fn(g, |x, _| x * x));
        for j in 0..9 {
            for i in 0..9 {
                assert!((grad.at(i, j).x - 2.0 * g.x(i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stencils_exact_on_quadratics() {
        let g = Grid2D::new(9, 7).unwrap();
        let (a, b, c, d, e, f) = (0.3, -1.2, 0.7, 2.0, -0.5, 1.1);
        let q = ScalarField::from_fn(g, |x, y| {
            a + b * x + c * y + d * x * x + e * x * y + f * y * y
        });
        let grad = gradient(&q);
        let lap = laplacian(&q);
        for (i, j) in interior(&g) {
            let (x, y) = (g.x(i), g.y(j));
            assert!((grad.at(i, j).x - (b + 2.0 * d * x + e * y)).abs() < 1e-12);
            assert!((grad.at(i, j).y - (c + e * x + 2.0 * f * y)).abs() < 1e-12);
            assert!((lap.at(i, j) - 2.0 * (d + f)).abs() < 1e-10);
        }
        let v = VectorField::from_fn(g, |x, y| (x * x + x * y, y * y - 3.0 * x));
        let div = divergence(&v);
        for (i, j) in interior(&g) {
            let (x, y) = (g.x(i), g.y(j));
            assert!((div.at(i, j) - (2.0 * x + y + 2.0 * y)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_examples() {
        let g = Grid2D::square(11).unwrap();
        let lap = laplacian(&ScalarField::from_fn(g, |x, y| x * x + y * y));
        for (i, j) in interior(&g) {
            assert!((lap.at(i, j) - 4.0).abs() < 1e-10);
        }
        let lap = laplacian(&ScalarField::from_fn(g, |x, _| x));
        for (i, j) in interior(&g) {
            assert!(lap.at(i, j).abs() < 1e-10);
        }
        // boundary copies nearest interior node
        assert_eq!(lap.at(0, 0), lap.at(1, 1));
        assert_eq!(lap.at(0, 5), lap.at(1, 5));
    }

    fn sine_lap_error(n: usize) -> f64 {
        let g = Grid2D::square(n).unwrap();
        let f = ScalarField::from_fn(g, |x, y| (PI * x).sin() * (PI * y).sin());
        let lap = laplacian(&f);
        interior(&g)
            .map(|(i, j)| (lap.at(i, j) + 2.0 * PI * PI * f.at(i, j)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_second_order_on_sine() {
        let e65 = sine_lap_error(65);
        assert!(e65 <= 0.01 * 2.0 * PI * PI, "{e65}");
        let ratio = sine_lap_error(33) / e65;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
        let ratio = e65 / sine_lap_error(129);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn edge_stencil_error_matches_central_on_cubics() {
        // central error on x³ is exactly h²; the end stencils must agree
        let g = Grid2D::square(9).unwrap();
        let h2 = g.hx() * g.hx();
        let grad = gradient(&ScalarField::from_fn(g, |x, _| x * x * x));
        for i in 0..9 {
            let exact = 3.0 * g.x(i) * g.x(i);
            assert!((grad.at(i, 4).x - exact - h2).abs() < 1e-12, "i = {i}");
        }
    }

    fn nested_error(n: usize) -> f64 {
        let g = Grid2D::square(n).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x.exp() * (2.0 * y).sin() + x * x * x * y);
        let lap = divergence(&gradient(&f));
        interior(&g)
            .map(|(i, j)| {
                let (x, y) = (g.x(i), g.y(j));
                let exact = -3.0 * x.exp() * (2.0 * y).sin() + 6.0 * x * y;
                (lap.at(i, j) - exact).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn divergence_of_gradient_second_order_up_to_the_edge() {
        let ratio = nested_error(33) / nested_error(65);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
        let ratio = nested_error(65) / nested_error(129);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn divergence_examples() {
        let g = Grid2D::square(9).unwrap();
        let div = divergence(&VectorField::from_fn(g, |x, y| (x, -y)));
        for (i, j) in interior(&g) {
            assert!(div.at(i, j).abs() < 1e-12);
        }
        let div = divergence(&VectorField::from_fn(g, |_, _| (1.0, 0.0)));
        assert!(div.values().iter().all(|v| v.abs() < 1e-12));
        let div = divergence(&VectorField::from_fn(g, |x, _| (x * x, 0.0)));
        for (i, j) in interior(&g) {
            assert!((div.at(i, j) - 2.0 * g.x(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn interpolation_examples() {
        let g = Grid2D::new(7, 5).unwrap();
        let fx = ScalarField::from_fn(g, |x, _| x);
        assert!((interp_scalar(&fx, Point::new(0.3, 0.77)).unwrap() - 0.3).abs() < 1e-14);
        for n in [3, 4, 8, 17] {
            let g = Grid2D::square(n).unwrap();
            let fxy = ScalarField::from_fn(g, |x, y| x * y);
            let v = interp_scalar(&fxy, Point::new(0.25, 0.25)).unwrap();
            assert!((v - 0.0625).abs() < 1e-14);
        }
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() + y.exp());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let v = interp_scalar(&f, g.node(i, j)).unwrap();
                assert!((v - f.at(i, j)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interpolation_clamps_and_rejects() {
        let g = Grid2D::square(5).unwrap();
        let f = ScalarField::from_fn(g, |x, y| x + 2.0 * y);
        let v = interp_scalar(&f, Point::new(1.0 + 5e-13, -5e-13)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(matches!(
            interp_scalar(&f, Point::new(1.0 + 1e-9, 0.5)),
            Err(Error::OutOfDomain(_))
        ));
        let v = VectorField::from_fn(g, |x, y| (x, y));
        assert!(interp_vector(&v, Point::new(0.5, -0.1)).is_err());
        let w = interp_vector(&v, Point::new(0.3, 0.6)).unwrap();
        assert!((w.x - 0.3).abs() < 1e-14 && (w.y - 0.6).abs() < 1e-14);
    }

    #[test]
    fn restriction_picks_coarse_nodes() {
        let coarse = Grid2D::square(5).unwrap();
        let fine = coarse.refined(4).unwrap();
        assert_eq!(fine.nx(), 17);
        let f = ScalarField::from_fn(fine, |x, y| x * 10.0 + y);
        let r = f.restrict_to(&coarse, 4).unwrap();
        for j in 0..5 {
            for i in 0..5 {
                assert!((r.at(i, j) - (coarse.x(i) * 10.0 + coarse.y(j))).abs() < 1e-12);
            }
        }
        assert!(f.restrict_to(&coarse, 3).is_err());
    }

    #[test]
    fn field_constructors_validate() {
        let g = Grid2D::square(3).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 8]).is_err());
        let mut v = vec![0.0; 9];
        v[4] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
        assert!(VectorField::new(g, vec![0.0; 9], vec![f64::INFINITY; 9]).is_err());
    }
}
