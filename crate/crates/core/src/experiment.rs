//! Config-driven runs that write their artifacts to the output directory.
//!
//! Every run is deterministic: the same config gives byte-identical files.
//! Nothing time- or thread-dependent is written.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Control, ExperimentConfig, Format, Resolved};
use crate::error::Error;
use crate::forward::{BoundaryData, PositivityReport, SolveStats};
use crate::grid::{Grid2D, Point, ScalarField, VectorField};
use crate::io;
use crate::reconstruction::{
    reconstruct, FieldError, ReconOptions, ReconstructionResult, TerminationCounts,
};
use crate::recurrence::{count_returns, monotonicity_report, rotational_field, time_one_map, OrbitSamples};
use crate::scenario::{generate_data, SyntheticData};
use crate::streamline::{Streamline, TraceParams};
use crate::transport::{build_transport_data, divergence_residual, identity_residual, TransportData};

/// Refinement ratios for the identity and divergence residuals must land here.
pub const RATIO_WINDOW: [f64; 2] = [3.0, 5.0];
pub const D_REL_L2_THRESHOLD: f64 = 0.05;
pub const SIGMA_REL_L2_THRESHOLD: f64 = 0.15;
pub const COVERAGE_THRESHOLD: f64 = 0.95;
/// Oriented `u` increments below `−MONO_TOL_REL·(max u − min u)` are violations.
pub const MONO_TOL_REL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Forward,
    Transport,
    Reconstruction,
    Recurrence,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Forward => "forward",
            Stage::Transport => "transport",
            Stage::Reconstruction => "reconstruction",
            Stage::Recurrence => "recurrence",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage: {source}")]
pub struct RunError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl RunError {
    /// 1 for configuration problems, 2 for forward-solve failures, 3 for
    /// anything later in the pipeline.
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Config => 1,
            Stage::Forward => 2,
            _ => 3,
        }
    }
}

trait StageExt<T> {
    fn at(self, stage: Stage) -> Result<T, RunError>;
}

impl<T> StageExt<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, RunError> {
        self.map_err(|source| RunError { stage, source })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridInfo {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl From<&Grid2D> for GridInfo {
    fn from(g: &Grid2D) -> Self {
        GridInfo { nx: g.nx(), ny: g.ny(), hx: g.hx(), hy: g.hy() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PresetInfo {
    #[serde(rename = "D")]
    pub d: String,
    pub sigma: String,
    pub f1: String,
    pub f2: String,
}

impl From<&Resolved> for PresetInfo {
    fn from(r: &Resolved) -> Self {
        let s = &r.scenario;
        PresetInfo {
            d: s.d.to_string(),
            sigma: s.sigma.to_string(),
            f1: s.f1.to_string(),
            f2: s.f2.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveInfo {
    pub u1: SolveStats,
    pub u2: SolveStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct PositivityInfo {
    /// `null` when `f₁` is not positive, so no sign is implied.
    pub u1: Option<PositivityReport>,
    pub u2: PositivityReport,
}

/// `summary.json` of `forward`.
#[derive(Debug, Clone, Serialize)]
pub struct ForwardSummary {
    pub command: &'static str,
    pub presets: PresetInfo,
    pub grid: GridInfo,
    pub data_grid: GridInfo,
    pub solver: SolveInfo,
    pub positivity: PositivityInfo,
    /// Max nodal error against the closed form; `null` if there is none.
    pub u1_exact_error: Option<f64>,
    pub u2_exact_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedInfo {
    pub spacing: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorMetrics {
    pub d_rel_l2: Option<f64>,
    pub d_rel_linf: Option<f64>,
    pub sigma_rel_l2: Option<f64>,
    pub sigma_rel_linf: Option<f64>,
    pub covered_nodes: usize,
    pub sigma_nodes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub identity_max: f64,
    /// Needs the true `D`; `null` for raw input.
    pub divergence_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicitySummary {
    /// Smallest oriented step increment of `u` divided by `max u − min u`.
    pub min_increment_rel: Option<f64>,
    pub tolerance_rel: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageMonotonicity {
    pub seed_count: usize,
    pub coverage_fraction: f64,
    pub doubled_seed_count: usize,
    pub doubled_coverage_fraction: f64,
    pub nondecreasing: bool,
}

/// `summary.json` of `reconstruct`.
#[derive(Debug, Clone, Serialize)]
pub struct ReconstructSummary {
    pub command: &'static str,
    pub presets: PresetInfo,
    pub grid: GridInfo,
    /// `null` for raw input.
    pub data_grid: Option<GridInfo>,
    pub input: Option<InputInfo>,
    pub solver: Option<SolveInfo>,
    pub seeds: SeedInfo,
    /// Entries are `null` for raw input, where no ground truth exists.
    pub metrics: ErrorMetrics,
    pub coverage_fraction: f64,
    pub streamline_count: usize,
    pub terminations: TerminationCounts,
    pub residuals: Residuals,
    pub monotonicity: MonotonicitySummary,
    pub coverage_monotonicity: CoverageMonotonicity,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    pub u1_csv: PathBuf,
    pub u2_csv: PathBuf,
}

fn trace_params(x: &VectorField, r: &Resolved) -> TraceParams {
    TraceParams::for_field(x, r.stagnation_eps_rel, r.max_steps)
}

fn recon_options(td: &TransportData, r: &Resolved) -> crate::Result<ReconOptions> {
    ReconOptions::with_spacing(r.seed_spacing, trace_params(td.x(), r))
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.outputs.directory.join(name)
}

fn max_exact_error(u: &ScalarField, exact: Option<crate::presets::Preset>) -> Option<f64> {
    let p = exact?;
    let g = u.grid();
    let mut m: f64 = 0.0;
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            m = m.max((u.at(i, j) - p.eval(g.x(i), g.y(j))).abs());
        }
    }
    Some(m)
}

fn generate(r: &Resolved) -> Result<SyntheticData, RunError> {
    generate_data(&r.scenario, r.grid, r.refinement, r.solver).at(Stage::Forward)
}

/// Solves for `u₁`, `u₂` and writes `u1.csv`, `u2.csv`, `summary.json`.
pub fn run_forward(cfg: &ExperimentConfig) -> Result<ForwardSummary, RunError> {
    let r = cfg.resolve().at(Stage::Config)?;
    if cfg.input.is_some() {
        return Err(Error::Config("input: raw u1/u2 files are only used by reconstruct".into()))
            .at(Stage::Config);
    }
    let data = generate(&r)?;
    let diag = &data.diagnostics;
    let summary = ForwardSummary {
        command: "forward",
        presets: PresetInfo::from(&r),
        grid: GridInfo::from(&r.grid),
        data_grid: GridInfo::from(&diag.data_grid),
        solver: SolveInfo { u1: diag.u1_solve, u2: diag.u2_solve },
        positivity: PositivityInfo {
            u1: diag.u1_positivity.clone(),
            u2: diag.u2_positivity.clone(),
        },
        u1_exact_error: max_exact_error(&data.u1, r.scenario.exact_solution(r.scenario.f1)),
        u2_exact_error: max_exact_error(&data.u2, r.scenario.exact_solution(r.scenario.f2)),
    };
    if cfg.outputs.wants(Format::Csv) {
        io::write_grid_csv(&out_path(cfg, "u1.csv"), &data.u1, None).at(Stage::Output)?;
        io::write_grid_csv(&out_path(cfg, "u2.csv"), &data.u2, None).at(Stage::Output)?;
    }
    if cfg.outputs.wants(Format::Json) {
        io::write_json(&out_path(cfg, "summary.json"), &summary).at(Stage::Output)?;
    }
    Ok(summary)
}

pub fn streamline_monotonicity(streamlines: &[Streamline], u: &ScalarField) -> MonotonicitySummary {
    let range = u.max() - u.min();
    let tol = MONO_TOL_REL * range;
    let mut min_inc = f64::INFINITY;
    let mut violations = 0;
    for s in streamlines {
        let sign = s.direction.sign();
        for w in s.points.windows(2) {
            let inc = sign * (w[1].u - w[0].u);
            min_inc = min_inc.min(inc);
            if inc < -tol {
                violations += 1;
            }
        }
    }
    MonotonicitySummary {
        min_increment_rel: (min_inc.is_finite() && range > 0.0).then(|| min_inc / range),
        tolerance_rel: MONO_TOL_REL,
        violations,
    }
}

struct Pipeline {
    td: TransportData,
    recon: ReconstructionResult,
    opts: ReconOptions,
    data: Option<SyntheticData>,
}

fn load_input(cfg: &ExperimentConfig, r: &Resolved) -> crate::Result<Option<(ScalarField, ScalarField)>> {
    let Some(input) = &cfg.input else { return Ok(None) };
    let u1 = io::read_grid_csv(&input.u1_csv)?;
    let u2 = io::read_grid_csv(&input.u2_csv)?;
    for (name, u) in [("input.u1_csv", &u1), ("input.u2_csv", &u2)] {
        if *u.grid() != r.grid {
            return Err(Error::Config(format!(
                "{name} holds a {}x{} grid but grid is {}x{}",
                u.grid().nx(),
                u.grid().ny(),
                r.grid.nx(),
                r.grid.ny()
            )));
        }
    }
    Ok(Some((u1, u2)))
}

fn pipeline(cfg: &ExperimentConfig, r: &Resolved) -> Result<Pipeline, RunError> {
    let (u1, u2, data) = match load_input(cfg, r).at(Stage::Config)? {
        Some((u1, u2)) => (u1, u2, None),
        None => {
            let data = generate(r)?;
            (data.u1.clone(), data.u2.clone(), Some(data))
        }
    };
    let td = build_transport_data(&u1, &u2).at(Stage::Transport)?;
    let d = r.scenario.d;
    let d_boundary = BoundaryData::from_fn(r.grid, |x, y| d.eval(x, y)).at(Stage::Config)?;
    let opts = recon_options(&td, r).at(Stage::Config)?;
    let recon = reconstruct(&td, &d_boundary, &opts).at(Stage::Reconstruction)?;
    Ok(Pipeline { td, recon, opts, data })
}

fn error_metrics(p: &Pipeline) -> ErrorMetrics {
    let rec = &p.recon;
    let (de, se) = match &p.data {
        Some(data) => (
            Some(FieldError::compute(&rec.d_rec, &data.truth.d, &rec.covered_mask)),
            Some(FieldError::compute(&rec.sigma_rec, &data.truth.sigma, &rec.sigma_mask)),
        ),
        None => (None, None),
    };
    ErrorMetrics {
        d_rel_l2: de.as_ref().and_then(|e| e.rel_l2),
        d_rel_linf: de.as_ref().and_then(|e| e.rel_linf),
        sigma_rel_l2: se.as_ref().and_then(|e| e.rel_l2),
        sigma_rel_linf: se.as_ref().and_then(|e| e.rel_linf),
        covered_nodes: rec.covered_mask.iter().filter(|&&c| c).count(),
        sigma_nodes: rec.sigma_mask.iter().filter(|&&c| c).count(),
    }
}

/// Full pipeline; writes `D_rec.csv`, `sigma_rec.csv`, `coverage.pgm` and
/// `summary.json`. Uncovered nodes are `nan` in the CSVs.
pub fn run_reconstruct(cfg: &ExperimentConfig) -> Result<ReconstructSummary, RunError> {
    let r = cfg.resolve().at(Stage::Config)?;
    let p = pipeline(cfg, &r)?;
    let rec = &p.recon;

    let doubled_opts = ReconOptions { seed_count: 2 * p.opts.seed_count, ..p.opts };
    let d = r.scenario.d;
    let d_boundary = BoundaryData::from_fn(r.grid, |x, y| d.eval(x, y)).at(Stage::Config)?;
    let doubled = reconstruct(&p.td, &d_boundary, &doubled_opts).at(Stage::Reconstruction)?;
    let (c1, c2) = (rec.coverage_fraction(), doubled.coverage_fraction());

    let divergence_max = match &p.data {
        Some(data) => Some(divergence_residual(&data.truth.d, &p.td).at(Stage::Transport)?),
        None => None,
    };
    let summary = ReconstructSummary {
        command: "reconstruct",
        presets: PresetInfo::from(&r),
        grid: GridInfo::from(&r.grid),
        data_grid: p.data.as_ref().map(|d| GridInfo::from(&d.diagnostics.data_grid)),
        input: cfg.input.as_ref().map(|i| InputInfo { u1_csv: i.u1_csv.clone(), u2_csv: i.u2_csv.clone() }),
        solver: p
            .data
            .as_ref()
            .map(|d| SolveInfo { u1: d.diagnostics.u1_solve, u2: d.diagnostics.u2_solve }),
        seeds: SeedInfo { spacing: r.seed_spacing, count: p.opts.seed_count },
        metrics: error_metrics(&p),
        coverage_fraction: c1,
        streamline_count: rec.streamlines.len(),
        terminations: rec.terminations.clone(),
        residuals: Residuals { identity_max: identity_residual(&p.td).max(), divergence_max },
        monotonicity: streamline_monotonicity(&rec.streamlines, p.td.ratio()),
        coverage_monotonicity: CoverageMonotonicity {
            seed_count: p.opts.seed_count,
            coverage_fraction: c1,
            doubled_seed_count: doubled_opts.seed_count,
            doubled_coverage_fraction: c2,
            nondecreasing: c2 >= c1,
        },
    };
    if cfg.outputs.wants(Format::Csv) {
        io::write_grid_csv(&out_path(cfg, "D_rec.csv"), &rec.d_rec, Some(&rec.covered_mask))
            .at(Stage::Output)?;
        io::write_grid_csv(&out_path(cfg, "sigma_rec.csv"), &rec.sigma_rec, Some(&rec.sigma_mask))
            .at(Stage::Output)?;
    }
    if cfg.outputs.wants(Format::Pgm) {
        io::write_coverage_pgm(&out_path(cfg, "coverage.pgm"), &rec.coverage).at(Stage::Output)?;
    }
    if cfg.outputs.wants(Format::Json) {
        io::write_json(&out_path(cfg, "summary.json"), &summary).at(Stage::Output)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementCheck {
    pub coarse: f64,
    pub fine: f64,
    /// `coarse / fine`; `null` when the fine value is zero.
    pub ratio: Option<f64>,
    /// `null` when there is no ratio.
    pub within_window: Option<bool>,
}

impl RefinementCheck {
    fn new(coarse: f64, fine: f64) -> Self {
        let ratio = (fine > 0.0).then(|| coarse / fine);
        RefinementCheck {
            coarse,
            fine,
            ratio,
            within_window: ratio.map(|q| (RATIO_WINDOW[0]..=RATIO_WINDOW[1]).contains(&q)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitSuite {
    pub k: usize,
    pub radius: f64,
    pub orbits: usize,
    pub orbits_with_returns: usize,
    pub max_returns: usize,
    /// Increments below `bound − slack`, summed over orbits.
    pub bound_violations: usize,
    /// Smallest increment over all orbits, relative to `max u − min u`.
    pub min_increment_rel: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionCheck {
    pub d_rel_l2: Option<f64>,
    pub sigma_rel_l2: Option<f64>,
    pub coverage_fraction: f64,
    pub d_threshold: f64,
    pub sigma_threshold: f64,
    pub coverage_threshold: f64,
    /// `null` when the true coefficient vanishes and no relative error exists.
    pub d_pass: Option<bool>,
    pub sigma_pass: Option<bool>,
    pub sigma_max_abs: Option<f64>,
    pub coverage_pass: bool,
}

/// `verify.json`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub command: &'static str,
    pub presets: PresetInfo,
    pub resolutions: [GridInfo; 2],
    pub ratio_window: [f64; 2],
    pub identity: RefinementCheck,
    pub divergence: RefinementCheck,
    /// Streamline monotonicity at each resolution, coarse first.
    pub monotonicity: [MonotonicitySummary; 2],
    pub terminations: [TerminationCounts; 2],
    pub no_return: OrbitSuite,
    /// Fine-grid reconstruction against the recorded thresholds.
    pub reconstruction: ReconstructionCheck,
}

/// Starting points `(i/n, j/n)` with `0 < i, j < n`.
pub fn interior_lattice(n: usize) -> Vec<Point> {
    let mut pts = Vec::with_capacity((n - 1) * (n - 1));
    for j in 1..n {
        for i in 1..n {
            pts.push(Point::new(i as f64 / n as f64, j as f64 / n as f64));
        }
    }
    pts
}

struct TransportOrbit {
    orbit: OrbitSamples,
    returns: usize,
    report: crate::recurrence::MonotonicityReport,
}

fn transport_orbits(
    td: &TransportData,
    d: &ScalarField,
    r: &Resolved,
) -> crate::Result<Vec<TransportOrbit>> {
    let dx = td.x().scaled_by(d)?;
    interior_lattice(r.recurrence.transport_lattice)
        .into_iter()
        .map(|x0| {
            let orbit = time_one_map(&dx, x0, r.recurrence.k)?;
            let returns = count_returns(&orbit, r.recurrence.radius)?;
            let report = monotonicity_report(td, d, &orbit)?;
            Ok(TransportOrbit { orbit, returns, report })
        })
        .collect()
}

fn orbit_suite(orbits: &[TransportOrbit], u: &ScalarField, r: &Resolved) -> OrbitSuite {
    let range = u.max() - u.min();
    let min_inc = orbits
        .iter()
        .map(|o| o.report.min_increment)
        .fold(f64::INFINITY, f64::min);
    OrbitSuite {
        k: r.recurrence.k,
        radius: r.recurrence.radius,
        orbits: orbits.len(),
        orbits_with_returns: orbits.iter().filter(|o| o.returns > 0).count(),
        max_returns: orbits.iter().map(|o| o.returns).max().unwrap_or(0),
        bound_violations: orbits.iter().map(|o| o.report.violations).sum(),
        min_increment_rel: (min_inc.is_finite() && range > 0.0).then(|| min_inc / range),
    }
}

/// Identity, divergence, monotonicity and no-return suites on the configured
/// grid and on the grid with half the resolution; writes `verify.json`.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<VerifySummary, RunError> {
    let fine = cfg.resolve().at(Stage::Config)?;
    if cfg.input.is_some() {
        return Err(Error::Config("input: raw u1/u2 files are only used by reconstruct".into()))
            .at(Stage::Config);
    }
    let (nx, ny) = (fine.grid.nx(), fine.grid.ny());
    if nx % 2 == 0 || ny % 2 == 0 || nx < 5 || ny < 5 {
        return Err(Error::Config(format!(
            "grid: verify halves the resolution, so nx and ny must be odd and at least 5 (got {nx}x{ny})"
        )))
        .at(Stage::Config);
    }
    let coarse = Resolved {
        grid: Grid2D::new((nx - 1) / 2 + 1, (ny - 1) / 2 + 1).at(Stage::Config)?,
        seed_spacing: fine.seed_spacing * 2.0,
        ..fine.clone()
    };

    let mut identity = [0.0; 2];
    let mut divergence = [0.0; 2];
    let mut mono = Vec::new();
    let mut terms = Vec::new();
    let mut last = None;
    for (slot, r) in [&coarse, &fine].into_iter().enumerate() {
        let data = generate(r)?;
        let td = build_transport_data(&data.u1, &data.u2).at(Stage::Transport)?;
        identity[slot] = identity_residual(&td).max();
        divergence[slot] = divergence_residual(&data.truth.d, &td).at(Stage::Transport)?;
        let d = r.scenario.d;
        let d_boundary = BoundaryData::from_fn(r.grid, |x, y| d.eval(x, y)).at(Stage::Config)?;
        let opts = recon_options(&td, r).at(Stage::Config)?;
        let recon = reconstruct(&td, &d_boundary, &opts).at(Stage::Reconstruction)?;
        mono.push(streamline_monotonicity(&recon.streamlines, td.ratio()));
        terms.push(recon.terminations.clone());
        last = Some((data, td, recon));
    }
    let (data, td, recon) = last.expect("two resolutions ran");
    let orbits = transport_orbits(&td, &data.truth.d, &fine).at(Stage::Recurrence)?;
    let de = FieldError::compute(&recon.d_rec, &data.truth.d, &recon.covered_mask);
    let se = FieldError::compute(&recon.sigma_rec, &data.truth.sigma, &recon.sigma_mask);
    let cov = recon.coverage_fraction();
    let pass = |e: Option<f64>, t: f64| e.map(|e| e <= t);

    let mut mono = mono.into_iter();
    let mut terms = terms.into_iter();
    let summary = VerifySummary {
        command: "verify",
        presets: PresetInfo::from(&fine),
        resolutions: [GridInfo::from(&coarse.grid), GridInfo::from(&fine.grid)],
        ratio_window: RATIO_WINDOW,
        identity: RefinementCheck::new(identity[0], identity[1]),
        divergence: RefinementCheck::new(divergence[0], divergence[1]),
        monotonicity: [mono.next().unwrap(), mono.next().unwrap()],
        terminations: [terms.next().unwrap(), terms.next().unwrap()],
        no_return: orbit_suite(&orbits, td.ratio(), &fine),
        reconstruction: ReconstructionCheck {
            d_rel_l2: de.rel_l2,
            sigma_rel_l2: se.rel_l2,
            coverage_fraction: cov,
            d_threshold: D_REL_L2_THRESHOLD,
            sigma_threshold: SIGMA_REL_L2_THRESHOLD,
            coverage_threshold: COVERAGE_THRESHOLD,
            d_pass: pass(de.rel_l2, D_REL_L2_THRESHOLD),
            sigma_pass: pass(se.rel_l2, SIGMA_REL_L2_THRESHOLD),
            sigma_max_abs: se.max_abs,
            coverage_pass: cov >= COVERAGE_THRESHOLD,
        },
    };
    if cfg.outputs.wants(Format::Json) {
        io::write_json(&out_path(cfg, "verify.json"), &summary).at(Stage::Output)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct OrbitRecord {
    pub x0: Point,
    pub samples: Vec<Point>,
    pub escaped_at: Option<usize>,
    pub returns: usize,
}

impl OrbitRecord {
    fn new(o: &OrbitSamples, returns: usize) -> Self {
        OrbitRecord { x0: o.x0, samples: o.samples.clone(), escaped_at: o.escaped_at, returns }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportOrbitRecord {
    #[serde(flatten)]
    pub orbit: OrbitRecord,
    pub min_increment: Option<f64>,
    pub bound: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlRecord {
    pub field: Control,
    #[serde(flatten)]
    pub orbit: OrbitRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub control_recurs: bool,
    pub transport_recurs: bool,
    pub dichotomy: bool,
}

/// `recurrence.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RecurSummary {
    pub command: &'static str,
    pub presets: PresetInfo,
    pub grid: GridInfo,
    pub k: usize,
    pub radius: f64,
    pub control: ControlRecord,
    pub transport: Vec<TransportOrbitRecord>,
    pub suite: OrbitSuite,
    pub verdict: Verdict,
}

fn orbits_csv(control: &OrbitRecord, transport: &[TransportOrbitRecord]) -> String {
    let mut out = String::from("orbit,k,x,y\n");
    let mut push = |id: &str, o: &OrbitRecord| {
        for (k, p) in o.samples.iter().enumerate() {
            out.push_str(&format!("{id},{k},{},{}\n", p.x, p.y));
        }
    };
    push("control", control);
    for (n, t) in transport.iter().enumerate() {
        push(&n.to_string(), &t.orbit);
    }
    out
}

/// Time-one orbits of the control field and of `D·X` from an interior
/// lattice; writes `recurrence.json` (and `orbits.csv`).
pub fn run_recur_demo(cfg: &ExperimentConfig) -> Result<RecurSummary, RunError> {
    let r = cfg.resolve().at(Stage::Config)?;
    if cfg.input.is_some() {
        return Err(Error::Config("input: raw u1/u2 files are only used by reconstruct".into()))
            .at(Stage::Config);
    }
    let rc = &r.recurrence;
    let field = match rc.control {
        Control::Rotation => rotational_field(r.grid),
        Control::Zero => VectorField::from_fn(r.grid, |_, _| (0.0, 0.0)),
    };
    let x0 = Point::new(rc.control_x0[0], rc.control_x0[1]);
    let control = time_one_map(&field, x0, rc.k).at(Stage::Recurrence)?;
    let control_returns = count_returns(&control, rc.radius).at(Stage::Recurrence)?;

    let data = generate(&r)?;
    let td = build_transport_data(&data.u1, &data.u2).at(Stage::Transport)?;
    let orbits = transport_orbits(&td, &data.truth.d, &r).at(Stage::Recurrence)?;
    let suite = orbit_suite(&orbits, td.ratio(), &r);
    let transport: Vec<TransportOrbitRecord> = orbits
        .iter()
        .map(|o| TransportOrbitRecord {
            orbit: OrbitRecord::new(&o.orbit, o.returns),
            min_increment: o.report.min_increment.is_finite().then_some(o.report.min_increment),
            bound: o.report.bound,
            violations: o.report.violations,
        })
        .collect();
    let control = ControlRecord { field: rc.control, orbit: OrbitRecord::new(&control, control_returns) };
    let control_recurs = control_returns > 0;
    let transport_recurs = suite.orbits_with_returns > 0;
    let summary = RecurSummary {
        command: "recur-demo",
        presets: PresetInfo::from(&r),
        grid: GridInfo::from(&r.grid),
        k: rc.k,
        radius: rc.radius,
        control,
        transport,
        suite,
        verdict: Verdict {
            control_recurs,
            transport_recurs,
            dichotomy: control_recurs && !transport_recurs,
        },
    };
    if cfg.outputs.wants(Format::Csv) {
        io::write_text(&out_path(cfg, "orbits.csv"), &orbits_csv(&summary.control.orbit, &summary.transport))
            .at(Stage::Output)?;
    }
    if cfg.outputs.wants(Format::Json) {
        io::write_json(&out_path(cfg, "recurrence.json"), &summary).at(Stage::Output)?;
    }
    Ok(summary)
}

/// Loads a config, applies an output-directory override, and resolves it.
pub fn load_config(path: &Path, out: Option<&Path>) -> Result<ExperimentConfig, RunError> {
    let mut cfg = ExperimentConfig::load(path).at(Stage::Config)?;
    if let Some(dir) = out {
        cfg.outputs.directory = dir.to_path_buf();
    }
    Ok(cfg)
}
