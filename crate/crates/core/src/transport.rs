//! The transport field `X = u₂∇u₁ − u₁∇u₂`, the coefficient
//! `c = u₂Δu₁ − u₁Δu₂` and the ratio `u = u₁/u₂`, all built with the grid
//! operators.
//!
//! For solutions of the forward problem, `D` satisfies `D·c + ∇D·X = 0`.

use crate::error::{Error, Result};
use crate::grid::{divergence, gradient, laplacian, same_grid, ScalarField, VectorField};

#[derive(Debug, Clone)]
pub struct TransportData {
    x: VectorField,
    c: ScalarField,
    ratio: ScalarField,
    u1: ScalarField,
    u2: ScalarField,
}

impl TransportData {
    pub fn x(&self) -> &VectorField {
        &self.x
    }

    pub fn c(&self) -> &ScalarField {
        &self.c
    }

    pub fn ratio(&self) -> &ScalarField {
        &self.ratio
    }

    pub fn u1(&self) -> &ScalarField {
        &self.u1
    }

    pub fn u2(&self) -> &ScalarField {
        &self.u2
    }

    /// Replaces the vector field, keeping everything else. Used to drive the
    /// tracer with an analytic control field on the same grid.
    pub fn with_field(&self, x: VectorField) -> Result<Self> {
        same_grid(self.x.grid(), x.grid())?;
        Ok(TransportData { x, ..self.clone() })
    }
}

pub fn build_transport_data(u1: &ScalarField, u2: &ScalarField) -> Result<TransportData> {
    same_grid(u1.grid(), u2.grid())?;
    let g = *u1.grid();
    if let Some((k, &v)) = u2
        .values()
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > 0.0))
    {
        let (i, j) = g.coords(k);
        return Err(Error::PositivityViolation { i, j, value: v });
    }

    let (g1, g2) = (gradient(u1), gradient(u2));
    let (l1, l2) = (laplacian(u1), laplacian(u2));
    let (a, b) = (u1.values(), u2.values());

    let n = g.len();
    let mut vx = Vec::with_capacity(n);
    let mut vy = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    let mut ratio = Vec::with_capacity(n);
    for k in 0..n {
        vx.push(b[k] * g1.vx()[k] - a[k] * g2.vx()[k]);
        vy.push(b[k] * g1.vy()[k] - a[k] * g2.vy()[k]);
        c.push(b[k] * l1.values()[k] - a[k] * l2.values()[k]);
        ratio.push(a[k] / b[k]);
    }
    Ok(TransportData {
        x: VectorField::new(g, vx, vy)?,
        c: ScalarField::new(g, c)?,
        ratio: ScalarField::new(g, ratio)?,
        u1: u1.clone(),
        u2: u2.clone(),
    })
}

/// `|X − u₂²∇(u₁/u₂)|` at interior nodes, zero on the boundary.
pub fn identity_residual(td: &TransportData) -> ScalarField {
    let g = *td.ratio.grid();
    let gr = gradient(&td.ratio);
    let u2 = td.u2.values();
    let mut out = vec![0.0; g.len()];
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            let k = g.idx(i, j);
            let s = u2[k] * u2[k];
            let dx = td.x.vx()[k] - s * gr.vx()[k];
            let dy = td.x.vy()[k] - s * gr.vy()[k];
            out[k] = dx.hypot(dy);
        }
    }
    ScalarField::from_raw(g, out)
}

/// Interior max of `|∇·(D X)|`.
pub fn divergence_residual(d: &ScalarField, td: &TransportData) -> Result<f64> {
    let dx = td.x.scaled_by(d)?;
    let div = divergence(&dx);
    let g = div.grid();
    let mut m: f64 = 0.0;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            m = m.max(div.at(i, j).abs());
        }
    }
    Ok(m)
}

pub fn max_interior(f: &ScalarField) -> f64 {
    let g = f.grid();
    let mut m: f64 = 0.0;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            m = m.max(f.at(i, j).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn affine_pair() {
        let g = Grid2D::square(9).unwrap();
        let u1 = ScalarField::from_fn(g, |x, _| x);
        let u2 = ScalarField::constant(g, 1.0);
        let td = build_transport_data(&u1, &u2).unwrap();
        for k in 0..g.len() {
            assert!((td.x().vx()[k] - 1.0).abs() < 1e-12);
            assert!(td.x().vy()[k].abs() < 1e-12);
            assert_eq!(td.ratio().values()[k], u1.values()[k]);
        }
        assert!(max_interior(td.c()) < 1e-10);
        assert!(identity_residual(&td).max() < 1e-14);
        let d = ScalarField::constant(g, 1.0);
        assert!(divergence_residual(&d, &td).unwrap() < 1e-10);
    }

    #[test]
    fn identical_fields_give_zero() {
        let g = Grid2D::square(9).unwrap();
        let u = ScalarField::from_fn(g, |x, y| 1.0 + x * x + (2.0 * y).sin());
        let td = build_transport_data(&u, &u).unwrap();
        assert_eq!(td.x().max_norm(), 0.0);
        assert!(td.c().values().iter().all(|&v| v == 0.0));
        assert!(td.ratio().values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bilinear_product_identity_exact() {
        let g = Grid2D::square(9).unwrap();
        let u1 = ScalarField::from_fn(g, |x, y| x * y);
        let td = build_transport_data(&u1, &ScalarField::constant(g, 1.0)).unwrap();
        assert!(identity_residual(&td).max() == 0.0);
    }

    #[test]
    fn raw_fields_are_not_divergence_free() {
        // X = (y² + 2, −2xy), ∇·X = −2x
        let g = Grid2D::square(17).unwrap();
        let u1 = ScalarField::from_fn(g, |x, _| x);
        let u2 = ScalarField::from_fn(g, |_, y| y * y + 2.0);
        let td = build_transport_data(&u1, &u2).unwrap();
        let d = ScalarField::constant(g, 1.0);
        let r = divergence_residual(&d, &td).unwrap();
        // interior max sits at x = 15/16
        assert!((r - 2.0 * 15.0 / 16.0).abs() < 1e-10, "{r}");
    }

    #[test]
    fn rejects_nonpositive_u2() {
        let g = Grid2D::square(5).unwrap();
        let u1 = ScalarField::constant(g, 1.0);
        let mut v = vec![1.0; g.len()];
        v[g.idx(2, 2)] = 0.0;
        let u2 = ScalarField::new(g, v).unwrap();
        assert!(matches!(
            build_transport_data(&u1, &u2),
            Err(Error::PositivityViolation { i: 2, j: 2, .. })
        ));
    }

    #[test]
    fn antisymmetry_and_scaling() {
        let g = Grid2D::new(11, 9).unwrap();
        let u1 = ScalarField::from_fn(g, |x, y| 1.0 + x * y + (3.0 * x).cos());
        let u2 = ScalarField::from_fn(g, |x, y| 2.0 + y * y - 0.3 * x);
        let a = build_transport_data(&u1, &u2).unwrap();
        let b = build_transport_data(&u2, &u1).unwrap();
        for k in 0..g.len() {
            assert_eq!(a.x().vx()[k], -b.x().vx()[k]);
            assert_eq!(a.x().vy()[k], -b.x().vy()[k]);
        }
        let s = build_transport_data(&u1.map(|v| 2.0 * v).unwrap(), &u2).unwrap();
        for k in 0..g.len() {
            assert_eq!(s.x().vx()[k], 2.0 * a.x().vx()[k]);
            assert_eq!(s.c().values()[k], 2.0 * a.c().values()[k]);
        }
    }
}
