//! Integral curves of the transport field, seeded on the boundary.
//!
//! Tracing uses classical RK4 with a step chosen so that each step moves at
//! most half a cell. RK4 stages that fall outside the square sample the field
//! at the nearest boundary point; accepted points never leave the closed
//! square. A step that would leave it is shortened by bisection so that the
//! final point lands on the boundary to within 1e-10.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{interp_scalar, interp_vector, Point, ScalarField, VectorField};
use crate::transport::TransportData;

pub const DEFAULT_STAGNATION_EPS_REL: f64 = 1e-8;
pub const DEFAULT_STALL_COUNT: usize = 10;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;
const EXIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Termination {
    ExitedBoundary,
    Stagnation,
    MaxSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamPoint {
    pub pos: Point,
    pub t: f64,
    pub u: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub points: Vec<StreamPoint>,
    pub direction: Direction,
    pub termination: Termination,
    pub seed_index: usize,
    /// Recovered diffusion coefficient per point, once attached.
    pub d_values: Option<Vec<f64>>,
}

impl Streamline {
    pub fn duration(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.t) - self.points.first().map_or(0.0, |p| p.t)
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| w[0].pos.dist(w[1].pos)).sum()
    }

    pub fn start(&self) -> Point {
        self.points[0].pos
    }

    pub fn end(&self) -> Point {
        self.points[self.points.len() - 1].pos
    }

    /// Smallest increment of `u` along the trace, oriented so that it should be
    /// nonnegative for both directions.
    pub fn min_oriented_increment(&self) -> f64 {
        let s = self.direction.sign();
        self.points
            .windows(2)
            .map(|w| s * (w[1].u - w[0].u))
            .fold(f64::INFINITY, f64::min)
    }

    /// First pair `(earlier, later)` of points closer than `radius` while being
    /// more than `min_arc` apart along the curve.
    pub fn self_return(&self, radius: f64, min_arc: f64) -> Option<(usize, usize)> {
        let mut arc = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        for (k, p) in self.points.iter().enumerate() {
            if k > 0 {
                acc += self.points[k - 1].pos.dist(p.pos);
            }
            arc.push(acc);
        }
        for i in 0..self.points.len() {
            for j in 0..i {
                if arc[i] - arc[j] <= min_arc {
                    break;
                }
                if self.points[i].pos.dist(self.points[j].pos) < radius {
                    return Some((j, i));
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceParams {
    /// Absolute speed below which a point counts as stalled.
    pub stagnation_eps: f64,
    pub stall_count: usize,
    pub max_steps: usize,
}

impl TraceParams {
    /// Stagnation threshold `rel·max|X|`, floored at the smallest normal double
    /// so that an identically zero field still stalls.
    pub fn for_field(x: &VectorField, rel: f64, max_steps: usize) -> Self {
        TraceParams {
            stagnation_eps: (rel * x.max_norm()).max(f64::MIN_POSITIVE),
            stall_count: DEFAULT_STALL_COUNT,
            max_steps,
        }
    }

    pub fn defaults(x: &VectorField) -> Self {
        Self::for_field(x, DEFAULT_STAGNATION_EPS_REL, DEFAULT_MAX_STEPS)
    }
}

/// RK4 over a bilinearly interpolated field, shared with the recurrence tools.
#[derive(Clone, Copy)]
pub(crate) struct Integrator<'a> {
    field: &'a VectorField,
    sign: f64,
    max_move: f64,
}

impl<'a> Integrator<'a> {
    pub(crate) fn new(field: &'a VectorField, sign: f64) -> Self {
        Integrator {
            field,
            sign,
            max_move: 0.5 * field.grid().h_min(),
        }
    }

    pub(crate) fn velocity(&self, p: Point) -> Point {
        interp_vector(self.field, p.clamp_to_square()).expect("clamped point is in the square")
            * self.sign
    }

    pub(crate) fn rk4(&self, p: Point, dt: f64) -> Point {
        let k1 = self.velocity(p);
        let k2 = self.velocity(p + k1 * (0.5 * dt));
        let k3 = self.velocity(p + k2 * (0.5 * dt));
        let k4 = self.velocity(p + k3 * dt);
        p + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0)
    }

    /// Step size aiming at a half-cell move for the local speed.
    pub(crate) fn nominal_dt(&self, speed: f64, eps: f64) -> f64 {
        self.max_move / speed.max(eps)
    }

    /// Halves `dt` until the step moves at most half a cell.
    pub(crate) fn capped_step(&self, p: Point, mut dt: f64) -> (f64, Point) {
        loop {
            let q = self.rk4(p, dt);
            if q.dist(p) <= self.max_move || dt < 1e-300 {
                return (dt, q);
            }
            dt *= 0.5;
        }
    }

    /// For a step from inside `p` to outside, returns the step fraction and the
    /// point where the RK4 step meets the boundary.
    pub(crate) fn exit_point(&self, p: Point, dt: f64, outside: Point) -> (f64, Point) {
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut plo, mut phi) = (p, outside);
        for _ in 0..200 {
            if plo.dist(phi) <= EXIT_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            let pm = self.rk4(p, mid * dt);
            if pm.in_unit_square() {
                lo = mid;
                plo = pm;
            } else {
                hi = mid;
                phi = pm;
            }
        }
        let snap = |inside: f64, out: f64| {
            if out < 0.0 {
                0.0
            } else if out > 1.0 {
                1.0
            } else {
                inside
            }
        };
        let exit = Point::new(snap(plo.x, phi.x), snap(plo.y, phi.y)).clamp_to_square();
        (lo, exit)
    }
}

/// Traces `γ̇ = dir·X(γ)` from `seed`, recording `u = u₁/u₂` at every point.
pub fn trace(td: &TransportData, seed: Point, dir: Direction, params: &TraceParams) -> Result<Streamline> {
    trace_field(td.x(), td.ratio(), seed, dir, params)
}

/// Same as [`trace`] for an arbitrary field, with `u` sampled from `values`.
pub fn trace_field(
    field: &VectorField,
    values: &ScalarField,
    seed: Point,
    dir: Direction,
    params: &TraceParams,
) -> Result<Streamline> {
    if !seed.is_finite() || !seed.in_unit_square() {
        return Err(Error::OutOfDomain(seed));
    }
    let integ = Integrator::new(field, dir.sign());
    let sample = |p: Point| -> Result<f64> { interp_scalar(values, p) };

    let mut p = seed.clamp_to_square();
    let mut t = 0.0;
    let mut points = vec![StreamPoint { pos: p, t, u: sample(p)? }];
    let mut stall = 0;
    let mut steps = 0;
    let termination = loop {
        if steps >= params.max_steps {
            break Termination::MaxSteps;
        }
        let speed = integ.velocity(p).norm();
        if speed < params.stagnation_eps {
            stall += 1;
            if stall >= params.stall_count {
                break Termination::Stagnation;
            }
        } else {
            stall = 0;
        }
        let (dt, q) = integ.capped_step(p, integ.nominal_dt(speed, params.stagnation_eps));
        steps += 1;
        if !q.in_unit_square() {
            let (frac, exit) = integ.exit_point(p, dt, q);
            if frac > 0.0 && t + frac * dt > t {
                t += frac * dt;
                points.push(StreamPoint { pos: exit, t, u: sample(exit)? });
            }
            break Termination::ExitedBoundary;
        }
        p = q.clamp_to_square();
        t += dt;
        points.push(StreamPoint { pos: p, t, u: sample(p)? });
    };
    Ok(Streamline {
        points,
        direction: dir,
        termination,
        seed_index: 0,
        d_values: None,
    })
}

/// Retimes a trace from `γ̇ = X` to `γ̇ = D·X`: `dt' = dt / D(γ)`, integrated
/// with Simpson's rule on each segment. Positions are left untouched.
pub fn reparametrize(s: &Streamline, d: &ScalarField) -> Result<Streamline> {
    if !(d.min() > 0.0) {
        return Err(Error::validation(format!(
            "D must be positive to reparametrize (min {})",
            d.min()
        )));
    }
    let mut out = s.clone();
    let inv = |p: Point| interp_scalar(d, p).map(|v| 1.0 / v);
    let mut t_new = s.points.first().map_or(0.0, |p| p.t);
    for k in 1..s.points.len() {
        let (a, b) = (s.points[k - 1], s.points[k]);
        let mid = (a.pos + b.pos) * 0.5;
        let avg = (inv(a.pos)? + 4.0 * inv(mid)? + inv(b.pos)?) / 6.0;
        t_new += (b.t - a.t) * avg;
        out.points[k].t = t_new;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeedDirections {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seed {
    pub position: Point,
    pub inward_normal: Point,
    pub directions: SeedDirections,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedSet {
    pub seeds: Vec<Seed>,
}

impl SeedSet {
    /// `(seed index, position, direction)` for every trace to run.
    pub fn tasks(&self) -> Vec<(usize, Point, Direction)> {
        let mut out = Vec::new();
        for (k, s) in self.seeds.iter().enumerate() {
            match s.directions {
                SeedDirections::Forward => out.push((k, s.position, Direction::Forward)),
                SeedDirections::Backward => out.push((k, s.position, Direction::Backward)),
                SeedDirections::Both => {
                    out.push((k, s.position, Direction::Forward));
                    out.push((k, s.position, Direction::Backward));
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// Point at arc length `s ∈ [0, 4)` along the boundary, counterclockwise from
/// the origin, with its inward normal (diagonal at corners).
pub fn boundary_point(s: f64) -> (Point, Point) {
    const CORNER_TOL: f64 = 1e-12;
    let s = s.rem_euclid(4.0);
    let edge = (s.floor() as usize).min(3);
    let r = s - edge as f64;
    let (p, n) = match edge {
        0 => (Point::new(r, 0.0), Point::new(0.0, 1.0)),
        1 => (Point::new(1.0, r), Point::new(-1.0, 0.0)),
        2 => (Point::new(1.0 - r, 1.0), Point::new(0.0, -1.0)),
        _ => (Point::new(0.0, 1.0 - r), Point::new(1.0, 0.0)),
    };
    if r < CORNER_TOL || r > 1.0 - CORNER_TOL {
        // corner: average with the neighbouring edge normal
        let other = if r < CORNER_TOL { (edge + 3) % 4 } else { (edge + 1) % 4 };
        let m = match other {
            0 => Point::new(0.0, 1.0),
            1 => Point::new(-1.0, 0.0),
            2 => Point::new(0.0, -1.0),
            _ => Point::new(1.0, 0.0),
        };
        let d = n + m;
        let corner = Point::new(p.x.round(), p.y.round());
        return (corner, d * (1.0 / d.norm()));
    }
    (p, n)
}

/// `ceil(4/spacing)` equally spaced seeds along the boundary.
pub fn seed_boundary(td: &TransportData, spacing: f64, stagnation_eps: f64) -> Result<SeedSet> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::validation(format!("seed spacing must be positive, got {spacing}")));
    }
    let count = ((4.0 / spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    seed_boundary_count(td, count, stagnation_eps)
}

/// `count` seeds at arc lengths `k·4/count`. Doubling `count` keeps every
/// earlier seed position bit-for-bit.
pub fn seed_boundary_count(td: &TransportData, count: usize, stagnation_eps: f64) -> Result<SeedSet> {
    if count == 0 {
        return Err(Error::validation("seed count must be positive"));
    }
    let step = 4.0 / count as f64;
    let mut seeds = Vec::with_capacity(count);
    for k in 0..count {
        let (position, inward_normal) = boundary_point(k as f64 * step);
        let xn = interp_vector(td.x(), position)?.dot(inward_normal);
        let directions = if xn > stagnation_eps {
            SeedDirections::Forward
        } else if xn < -stagnation_eps {
            SeedDirections::Backward
        } else {
            SeedDirections::Both
        };
        seeds.push(Seed { position, inward_normal, directions });
    }
    Ok(SeedSet { seeds })
}

/// Traces every seed task in parallel; output order follows [`SeedSet::tasks`].
pub fn trace_seeds(td: &TransportData, seeds: &SeedSet, params: &TraceParams) -> Result<Vec<Streamline>> {
    seeds
        .tasks()
        .into_par_iter()
        .map(|(k, p, dir)| {
            trace(td, p, dir, params).map(|mut s| {
                s.seed_index = k;
                s
            })
        })
        .collect()
}
