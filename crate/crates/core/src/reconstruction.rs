//! Recovery of `D` along boundary-seeded streamlines, deposition onto the
//! grid, recovery of `σ`, and the coverage metric.
//!
//! Along `γ̇ = dir·X` the transport equation reads `d/dt log D = −dir·c`, so
//! `D = D_boundary·exp(−dir·∫c dt)`. The integral is accumulated segment by
//! segment over the stored polyline with Simpson's rule (RK4 for a right-hand
//! side that depends on position only).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{BoundaryData, CoefficientPair};
use crate::grid::{gradient, interp_scalar, laplacian, same_grid, Grid2D, Point, ScalarField};
use crate::streamline::{
    seed_boundary_count, trace_seeds, Streamline, Termination, TraceParams,
};
use crate::transport::TransportData;

pub const WEIGHT_FLOOR: f64 = 1e-6;
const ON_BOUNDARY_TOL: f64 = 1e-9;
/// Ratios varying by less than this, relative to their size, count as constant.
pub const CONSTANT_RATIO_TOL: f64 = 1e-8;
/// Face tolerance for coverage, in cell widths.
pub const FACE_TOL: f64 = 1e-6;

/// Per-cell streamline point counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    grid: Grid2D,
    visits: Vec<u32>,
}

impl CoverageMap {
    pub fn empty(grid: Grid2D) -> Self {
        CoverageMap {
            grid,
            visits: vec![0; grid.n_cells()],
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Row-major over cells, `(nx−1)` cells per row.
    pub fn visits(&self) -> &[u32] {
        &self.visits
    }

    /// Cells are closed: a point within `FACE_TOL` cell widths of a shared
    /// face counts for the cells on both sides, so a streamline running along
    /// a grid line covers both neighbours however rounding tips it.
    pub fn visit(&mut self, p: Point) -> Result<()> {
        let (ci, cj, s, t) = self.grid.locate(p)?;
        let near = |c: usize, r: f64, cells: usize| {
            let lo = if r < FACE_TOL && c > 0 { c - 1 } else { c };
            let hi = if r > 1.0 - FACE_TOL && c + 1 < cells { c + 1 } else { c };
            lo..=hi
        };
        let (cx, cy) = (self.grid.nx() - 1, self.grid.ny() - 1);
        for j in near(cj, t, cy) {
            for i in near(ci, s, cx) {
                let k = self.grid.cell_index(i, j);
                self.visits[k] = self.visits[k].saturating_add(1);
            }
        }
        Ok(())
    }
}

pub fn coverage_fraction(cm: &CoverageMap) -> f64 {
    if cm.visits.is_empty() {
        return 0.0;
    }
    cm.visits.iter().filter(|&&v| v > 0).count() as f64 / cm.visits.len() as f64
}

/// Attaches `D` to every point of `s`, starting from the measured boundary value.
pub fn recover_d_along(s: &Streamline, td: &TransportData, d_boundary: f64) -> Result<Streamline> {
    if !(d_boundary > 0.0) || !d_boundary.is_finite() {
        return Err(Error::validation(format!(
            "boundary value of D must be positive, got {d_boundary}"
        )));
    }
    let start = s
        .points
        .first()
        .ok_or_else(|| Error::validation("empty streamline"))?
        .pos;
    let dist_to_edge = start.x.min(start.y).min(1.0 - start.x).min(1.0 - start.y);
    if dist_to_edge > ON_BOUNDARY_TOL {
        return Err(Error::validation(format!(
            "streamline must start on the boundary, starts at ({}, {})",
            start.x, start.y
        )));
    }

    let c_at = |p: Point| -> Result<f64> {
        let v = interp_scalar(td.c(), p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Propagation(p))
        }
    };
    let sign = s.direction.sign();
    let mut log_d = d_boundary.ln();
    let mut d_values = Vec::with_capacity(s.points.len());
    d_values.push(d_boundary);
    let mut c_prev = c_at(start)?;
    for w in s.points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let c_mid = c_at((a.pos + b.pos) * 0.5)?;
        let c_next = c_at(b.pos)?;
        log_d -= sign * (b.t - a.t) * (c_prev + 4.0 * c_mid + c_next) / 6.0;
        let d = log_d.exp();
        // a long crawl past a critical point can drive log D out of range
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Propagation(b.pos));
        }
        d_values.push(d);
        c_prev = c_next;
    }
    let mut out = s.clone();
    out.d_values = Some(d_values);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Deposit {
    /// Weighted mean of deposited values; 0 at uncovered nodes.
    pub d: ScalarField,
    pub coverage: CoverageMap,
    pub covered: Vec<bool>,
}

/// Spreads every streamline point's `D` onto the four surrounding nodes with
/// bilinear weights. Accumulation runs in streamline order, so the result does
/// not depend on how the streamlines were produced.
pub fn deposit(streamlines: &[Streamline], grid: &Grid2D) -> Result<Deposit> {
    let g = *grid;
    let mut weight = vec![0.0; g.len()];
    let mut acc = vec![0.0; g.len()];
    let mut coverage = CoverageMap::empty(g);
    for s in streamlines {
        let d_values = s
            .d_values
            .as_ref()
            .ok_or_else(|| Error::validation("streamline has no recovered D attached"))?;
        for (p, &d) in s.points.iter().zip(d_values) {
            let (ci, cj, sx, sy) = g.locate(p.pos)?;
            coverage.visit(p.pos)?;
            let k = g.idx(ci, cj);
            for (node, w) in [
                (k, (1.0 - sx) * (1.0 - sy)),
                (k + 1, sx * (1.0 - sy)),
                (k + g.nx(), (1.0 - sx) * sy),
                (k + g.nx() + 1, sx * sy),
            ] {
                weight[node] += w;
                acc[node] += w * d;
            }
        }
    }
    let covered: Vec<bool> = weight.iter().map(|&w| w >= WEIGHT_FLOOR).collect();
    let values = acc
        .iter()
        .zip(&weight)
        .zip(&covered)
        .map(|((&a, &w), &c)| if c { a / w } else { 0.0 })
        .collect();
    Ok(Deposit {
        d: ScalarField::new(g, values)?,
        coverage,
        covered,
    })
}

/// Recovers `σ` from `D∆uᵢ + ∇D·∇uᵢ − σuᵢ = 0` for both solutions and
/// combines them with weights `uᵢ²`.
///
/// A node gets a value only if it is interior, covered, and its four
/// neighbours are covered (the central difference of `D` needs them). The
/// returned mask marks those nodes; the field holds 0 elsewhere.
pub fn recover_sigma(
    d_rec: &ScalarField,
    u1: &ScalarField,
    u2: &ScalarField,
    covered: &[bool],
) -> Result<(ScalarField, Vec<bool>)> {
    same_grid(d_rec.grid(), u1.grid())?;
    same_grid(d_rec.grid(), u2.grid())?;
    let g = *d_rec.grid();
    if covered.len() != g.len() {
        return Err(Error::validation("coverage mask does not match the grid"));
    }
    if u2.min() <= 0.0 {
        return Err(Error::validation("u2 must be strictly positive"));
    }
    let gd = gradient(d_rec);
    let (g1, g2) = (gradient(u1), gradient(u2));
    let (l1, l2) = (laplacian(u1), laplacian(u2));

    let mut sigma = vec![0.0; g.len()];
    let mut mask = vec![false; g.len()];
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            let k = g.idx(i, j);
            let stencil = [k, k - 1, k + 1, k - g.nx(), k + g.nx()];
            if !stencil.iter().all(|&m| covered[m]) {
                continue;
            }
            let d = d_rec.values()[k];
            if !(d > 0.0) {
                return Err(Error::validation(format!(
                    "recovered D must be positive at covered node ({i}, {j})"
                )));
            }
            let (a, b) = (u1.values()[k], u2.values()[k]);
            for v in [a, b] {
                if v.abs() < 1e-12 {
                    return Err(Error::Degeneracy { i, j, value: v });
                }
            }
            let flux = |grad: &crate::grid::VectorField, lap: &ScalarField| {
                d * lap.values()[k] + gd.vx()[k] * grad.vx()[k] + gd.vy()[k] * grad.vy()[k]
            };
            let s1 = flux(&g1, &l1) / a;
            let s2 = flux(&g2, &l2) / b;
            sigma[k] = (a * a * s1 + b * b * s2) / (a * a + b * b);
            mask[k] = true;
        }
    }
    Ok((ScalarField::new(g, sigma)?, mask))
}

#[derive(Debug, Clone, Copy)]
pub struct ReconOptions {
    pub seed_count: usize,
    pub trace: TraceParams,
}

impl ReconOptions {
    /// `ceil(4/spacing)` seeds.
    pub fn with_spacing(spacing: f64, trace: TraceParams) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::validation(format!("seed spacing must be positive, got {spacing}")));
        }
        Ok(ReconOptions {
            seed_count: ((4.0 / spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize,
            trace,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, PartialEq, Eq)]
pub struct TerminationCounts {
    pub exited_boundary: usize,
    pub stagnation: usize,
    pub max_steps: usize,
}

impl TerminationCounts {
    pub fn tally(streamlines: &[Streamline]) -> Self {
        let mut out = TerminationCounts::default();
        for s in streamlines {
            match s.termination {
                Termination::ExitedBoundary => out.exited_boundary += 1,
                Termination::Stagnation => out.stagnation += 1,
                Termination::MaxSteps => out.max_steps += 1,
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub d_rec: ScalarField,
    pub sigma_rec: ScalarField,
    pub coverage: CoverageMap,
    pub covered_mask: Vec<bool>,
    pub sigma_mask: Vec<bool>,
    pub streamlines: Vec<Streamline>,
    pub terminations: TerminationCounts,
}

impl ReconstructionResult {
    pub fn coverage_fraction(&self) -> f64 {
        coverage_fraction(&self.coverage)
    }
}

/// Seeds, traces, recovers `D` along every streamline, deposits, and recovers `σ`.
pub fn reconstruct(
    td: &TransportData,
    d_boundary: &BoundaryData,
    opts: &ReconOptions,
) -> Result<ReconstructionResult> {
    let g = *td.ratio().grid();
    same_grid(&g, d_boundary.grid())?;
    d_boundary.require_positive("boundary trace of D")?;
    let u = td.ratio();
    let scale = u.max().abs().max(u.min().abs());
    if u.max() - u.min() <= CONSTANT_RATIO_TOL * scale {
        return Err(Error::validation(
            "u1/u2 is constant, so the transport field has no direction to follow",
        ));
    }
    let seeds = seed_boundary_count(td, opts.seed_count, opts.trace.stagnation_eps)?;
    let traced = trace_seeds(td, &seeds, &opts.trace)?;
    let streamlines = traced
        .iter()
        .map(|s| recover_d_along(s, td, d_boundary.value_at(s.start())?))
        .collect::<Result<Vec<_>>>()?;
    let mut dep = deposit(&streamlines, &g)?;
    // D is measured on the boundary; a one-sided average there is only first order
    let mut d = dep.d.into_values();
    for (i, j) in g.boundary_nodes() {
        let k = g.idx(i, j);
        d[k] = d_boundary.node_value(i, j);
        dep.covered[k] = true;
    }
    dep.d = ScalarField::new(g, d)?;
    let (sigma_rec, sigma_mask) = recover_sigma(&dep.d, td.u1(), td.u2(), &dep.covered)?;
    let terminations = TerminationCounts::tally(&streamlines);
    Ok(ReconstructionResult {
        d_rec: dep.d,
        sigma_rec,
        coverage: dep.coverage,
        covered_mask: dep.covered,
        sigma_mask,
        streamlines,
        terminations,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldError {
    /// `None` when the reference vanishes on the mask.
    pub rel_l2: Option<f64>,
    pub rel_linf: Option<f64>,
    pub max_abs: Option<f64>,
    pub nodes: usize,
}

impl FieldError {
    pub fn compute(rec: &ScalarField, truth: &ScalarField, mask: &[bool]) -> Self {
        let (mut num, mut den, mut max_abs, mut max_ref, mut nodes) = (0.0, 0.0, 0.0f64, 0.0f64, 0);
        for ((&r, &t), &m) in rec.values().iter().zip(truth.values()).zip(mask) {
            if m {
                num += (r - t) * (r - t);
                den += t * t;
                max_abs = max_abs.max((r - t).abs());
                max_ref = max_ref.max(t.abs());
                nodes += 1;
            }
        }
        let ratio = |a: f64, b: f64| if b > 0.0 { Some(a / b) } else { None };
        FieldError {
            rel_l2: ratio(num.sqrt(), den.sqrt()),
            rel_linf: ratio(max_abs, max_ref),
            max_abs: (nodes > 0).then_some(max_abs),
            nodes,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionMetrics {
    pub d_error: FieldError,
    pub sigma_error: FieldError,
    pub coverage_fraction: f64,
    pub streamline_count: usize,
    pub terminations: TerminationCounts,
}

impl ReconstructionMetrics {
    pub fn compute(r: &ReconstructionResult, truth: &CoefficientPair) -> Self {
        ReconstructionMetrics {
            d_error: FieldError::compute(&r.d_rec, &truth.d, &r.covered_mask),
            sigma_error: FieldError::compute(&r.sigma_rec, &truth.sigma, &r.sigma_mask),
            coverage_fraction: r.coverage_fraction(),
            streamline_count: r.streamlines.len(),
            terminations: r.terminations.clone(),
        }
    }
}
