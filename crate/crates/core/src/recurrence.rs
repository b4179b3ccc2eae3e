//! Time-one maps, Poincaré returns and the monotonicity bound.
//!
//! A volume-preserving field such as a rigid rotation brings orbits back near
//! their start again and again. The field `D·X` cannot: `u = u₁/u₂` grows along
//! it at rate `D u₂² |∇u|²`, so an orbit never comes back to a level it left.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{gradient, interp_scalar, same_grid, Grid2D, Point, ScalarField, VectorField};
use crate::streamline::Integrator;
use crate::transport::TransportData;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSamples {
    pub x0: Point,
    /// `γ(k)` for `k = 0, 1, ...` up to `K` or the escape.
    pub samples: Vec<Point>,
    /// First `k` whose sample lies outside the square.
    pub escaped_at: Option<usize>,
    #[serde(skip)]
    field_id: u64,
    #[serde(skip)]
    visited_cells: Vec<usize>,
}

impl OrbitSamples {
    /// Cells touched by the integrator, in increasing index order.
    pub fn visited_cells(&self) -> &[usize] {
        &self.visited_cells
    }
}

/// Identifies a field by its grid and exact values.
fn fingerprint(v: &VectorField) -> u64 {
    let mut h = DefaultHasher::new();
    (v.grid().nx(), v.grid().ny()).hash(&mut h);
    for (a, b) in v.vx().iter().zip(v.vy()) {
        a.to_bits().hash(&mut h);
        b.to_bits().hash(&mut h);
    }
    h.finish()
}

/// `(−(y − ½), x − ½)`: rigid rotation about the centre, period `2π`.
pub fn rotational_field(grid: Grid2D) -> VectorField {
    VectorField::from_fn(grid, |x, y| (-(y - 0.5), x - 0.5))
}

/// Samples `γ̇ = v` at integer times `0..=k_max` with the streamline RK4.
/// Steps are shortened to land exactly on each integer time.
///
/// `x0` may lie on the boundary, so an orbit can start where the data live.
pub fn time_one_map(v: &VectorField, x0: Point, k_max: usize) -> Result<OrbitSamples> {
    if k_max == 0 {
        return Err(Error::validation("time_one_map needs K >= 1"));
    }
    if !x0.is_finite() || !x0.in_unit_square() {
        return Err(Error::OutOfDomain(x0));
    }
    let grid = *v.grid();
    let integ = Integrator::new(v, 1.0);
    let eps = f64::MIN_POSITIVE;

    let mut p = x0.clamp_to_square();
    let mut visited = BTreeSet::new();
    visited.insert(cell_of(&grid, p)?);
    let mut samples = vec![p];
    let mut escaped_at = None;
    'outer: for k in 1..=k_max {
        let mut t = 0.0;
        while t < 1.0 {
            let remaining = 1.0 - t;
            let speed = integ.velocity(p).norm();
            let (dt, q) = integ.capped_step(p, integ.nominal_dt(speed, eps).min(remaining));
            if !q.in_unit_square() {
                escaped_at = Some(k);
                break 'outer;
            }
            p = q.clamp_to_square();
            visited.insert(cell_of(&grid, p)?);
            t = if dt == remaining { 1.0 } else { t + dt };
        }
        samples.push(p);
    }
    Ok(OrbitSamples {
        x0,
        samples,
        escaped_at,
        field_id: fingerprint(v),
        visited_cells: visited.into_iter().collect(),
    })
}

fn cell_of(grid: &Grid2D, p: Point) -> Result<usize> {
    let (ci, cj, _, _) = grid.locate(p)?;
    Ok(grid.cell_index(ci, cj))
}

/// Number of `k ≥ 1` with `|x_k − x_0| < radius`.
pub fn count_returns(orbit: &OrbitSamples, radius: f64) -> Result<usize> {
    if !(radius > 0.0) {
        return Err(Error::validation(format!("radius must be positive, got {radius}")));
    }
    Ok(orbit
        .samples
        .iter()
        .skip(1)
        .filter(|p| p.dist(orbit.x0) < radius)
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    /// `u(x_{k+1}) − u(x_k)`.
    pub increments: Vec<f64>,
    pub min_increment: f64,
    /// `min D u₂² · (min |∇u| over visited cells)²`.
    pub bound: f64,
    pub violations: usize,
    pub slack: f64,
}

/// Checks the increments of `u` along an orbit of `D·X` against the lower
/// bound a unit of time spent in the visited cells must produce.
///
/// The orbit must come from [`time_one_map`] on exactly `D·X`.
pub fn monotonicity_report(
    td: &TransportData,
    d: &ScalarField,
    orbit: &OrbitSamples,
) -> Result<MonotonicityReport> {
    same_grid(d.grid(), td.ratio().grid())?;
    let dx = td.x().scaled_by(d)?;
    if fingerprint(&dx) != orbit.field_id {
        return Err(Error::validation(
            "orbit was not produced by the field D·X of this transport data",
        ));
    }
    let u = td.ratio();
    let g = *u.grid();
    let slack = 1e-6 * (u.max() - u.min());

    let values = orbit
        .samples
        .iter()
        .map(|&p| interp_scalar(u, p))
        .collect::<Result<Vec<_>>>()?;
    let increments: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();

    let du2 = d
        .values()
        .iter()
        .zip(td.u2().values())
        .map(|(d, u2)| d * u2 * u2)
        .fold(f64::INFINITY, f64::min);
    let grad = gradient(u);
    let mut min_grad = f64::INFINITY;
    for &cell in &orbit.visited_cells {
        let (ci, cj) = (cell % (g.nx() - 1), cell / (g.nx() - 1));
        for (i, j) in [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)] {
            min_grad = min_grad.min(grad.at(i, j).norm());
        }
    }
    let bound = du2 * min_grad * min_grad;
    let violations = increments.iter().filter(|&&inc| inc < bound - slack).count();
    Ok(MonotonicityReport {
        min_increment: increments.iter().copied().fold(f64::INFINITY, f64::min),
        increments,
        bound,
        violations,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::build_transport_data;

    fn quad_area(p: &[Point; 4]) -> f64 {
        let mut a = 0.0;
        for k in 0..4 {
            let (q, r) = (p[k], p[(k + 1) % 4]);
            a += q.x * r.y - r.x * q.y;
        }
        0.5 * a.abs()
    }

    #[test]
    fn translation_escapes_after_first_step() {
        let g = Grid2D::square(17).unwrap();
        let v = VectorField::from_fn(g, |_, _| (1.0, 0.0));
        let o = time_one_map(&v, Point::new(0.1, 0.5), 5).unwrap();
        assert_eq!(o.samples, vec![Point::new(0.1, 0.5)]);
        assert_eq!(o.escaped_at, Some(1));
        assert_eq!(count_returns(&o, 0.05).unwrap(), 0);
    }

    #[test]
    fn zero_field_stays_put() {
        let g = Grid2D::square(9).unwrap();
        let v = VectorField::from_fn(g, |_, _| (0.0, 0.0));
        let x0 = Point::new(0.3, 0.7);
        let o = time_one_map(&v, x0, 12).unwrap();
        assert_eq!(o.samples.len(), 13);
        assert!(o.samples.iter().all(|&p| p == x0));
        assert_eq!(o.escaped_at, None);
        assert_eq!(count_returns(&o, 1e-3).unwrap(), 12);
    }

    #[test]
    fn rotation_follows_the_analytic_chord() {
        // |x_k − x_0| = 2r |sin(k/2)| for a rotation by k radians
        let g = Grid2D::square(65).unwrap();
        let v = rotational_field(g);
        let x0 = Point::new(0.5, 0.3);
        let o = time_one_map(&v, x0, 100).unwrap();
        assert_eq!(o.samples.len(), 101);
        for (k, p) in o.samples.iter().enumerate() {
            let chord = 0.4 * (0.5 * k as f64).sin().abs();
            assert!((p.dist(x0) - chord).abs() < 1e-4, "k = {k}");
        }
    }

    #[test]
    fn rotation_near_centre_returns_often() {
        let g = Grid2D::square(65).unwrap();
        let o = time_one_map(&rotational_field(g), Point::new(0.5, 0.45), 100).unwrap();
        assert!(count_returns(&o, 0.05).unwrap() >= 15);
    }

    #[test]
    fn rotation_preserves_area() {
        let g = Grid2D::square(65).unwrap();
        let v = rotational_field(g);
        let mut quad = [
            Point::new(0.6, 0.4),
            Point::new(0.65, 0.4),
            Point::new(0.65, 0.45),
            Point::new(0.6, 0.45),
        ];
        let a0 = quad_area(&quad);
        for _ in 0..10 {
            for p in quad.iter_mut() {
                *p = time_one_map(&v, *p, 1).unwrap().samples[1];
            }
            assert!((quad_area(&quad) / a0 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn k_zero_and_bad_radius_rejected() {
        let g = Grid2D::square(9).unwrap();
        let v = rotational_field(g);
        assert!(time_one_map(&v, Point::new(0.5, 0.5), 0).is_err());
        assert!(time_one_map(&v, Point::new(1.5, 0.5), 3).is_err());
        let o = time_one_map(&v, Point::new(0.5, 0.5), 3).unwrap();
        assert!(count_returns(&o, 0.0).is_err());
    }

    #[test]
    fn affine_increments_are_one() {
        let g = Grid2D::square(33).unwrap();
        let td = build_transport_data(&ScalarField::from_fn(g, |x, _| x), &ScalarField::constant(g, 1.0))
            .unwrap();
        let d = ScalarField::constant(g, 1.0);
        let o = time_one_map(&td.x().scaled_by(&d).unwrap(), Point::new(0.0, 0.5), 4).unwrap();
        assert_eq!(o.samples.len(), 2);
        assert_eq!(o.escaped_at, Some(2));
        let r = monotonicity_report(&td, &d, &o).unwrap();
        assert_eq!(r.increments.len(), 1);
        assert!((r.increments[0] - 1.0).abs() < 1e-12);
        assert!((r.bound - 1.0).abs() < 1e-12);
        assert_eq!(r.violations, 0);
    }

    #[test]
    fn log_case_respects_bound() {
        // D = 1 + x, u = ln(1+x)/ln 2: DX = (1/ln 2, 0), |∇u| ≥ 1/(2 ln 2)
        let g = Grid2D::square(65).unwrap();
        let td = build_transport_data(
            &ScalarField::from_fn(g, |x, _| 0.25 * (1.0 + x).ln() / std::f64::consts::LN_2),
            &ScalarField::constant(g, 1.0),
        )
        .unwrap();
        let d = ScalarField::from_fn(g, |x, _| 1.0 + x);
        let o = time_one_map(&td.x().scaled_by(&d).unwrap(), Point::new(0.0, 0.3), 10).unwrap();
        assert!(o.samples.len() >= 3);
        let r = monotonicity_report(&td, &d, &o).unwrap();
        assert!(r.bound > 0.0);
        assert_eq!(r.violations, 0);
        assert!(r.min_increment >= r.bound - r.slack);
        assert_eq!(count_returns(&o, 0.05).unwrap(), 0);
    }

    #[test]
    fn foreign_orbit_rejected() {
        let g = Grid2D::square(17).unwrap();
        let td = build_transport_data(&ScalarField::from_fn(g, |x, _| x), &ScalarField::constant(g, 1.0))
            .unwrap();
        let d = ScalarField::constant(g, 1.0);
        let o = time_one_map(&rotational_field(g), Point::new(0.5, 0.3), 5).unwrap();
        assert!(matches!(monotonicity_report(&td, &d, &o), Err(Error::Validation(_))));
    }
}
