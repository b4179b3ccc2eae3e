//! Experiment configuration, read from TOML.
//!
//! ```toml
//! data_grid_refinement = 4
//!
//! [grid]
//! nx = 129
//! ny = 129
//!
//! [coefficients]
//! D_preset = "sin_bump(base=1, amplitude=0.5)"
//! sigma_preset = "const(value=0.5)"
//!
//! [boundary]
//! f1_preset = "gaussian_bump(cx=0.5, cy=0, width=0.3, width_y=0.225)"
//! f2_preset = "const(value=1)"
//!
//! [solver]            # optional
//! tol = 1e-10
//! max_iter = 200000   # default 50 × data-grid nodes
//!
//! [tracing]           # optional
//! seed_spacing = 0.0078125   # default: smallest grid spacing
//! stagnation_eps_rel = 1e-8
//! max_steps = 1000000
//!
//! [outputs]           # optional
//! directory = "out"
//! formats = ["csv", "pgm", "json"]
//!
//! [recurrence]        # optional, used by recur-demo and verify
//! K = 100
//! radius = 0.05
//! control = "rotation"       # or "zero"
//! control_x0 = [0.5, 0.45]
//! transport_lattice = 8      # D·X orbits start at (i/8, j/8), 0 < i, j < 8
//!
//! [input]             # optional, reconstruct only: raw u₁/u₂ instead of a solve
//! u1_csv = "u1.csv"
//! u2_csv = "u2.csv"
//! ```
//!
//! Unknown keys are rejected. Relative paths are taken from the working
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{BoundaryData, DEFAULT_TOL};
use crate::grid::{Grid2D, Point};
use crate::presets::Preset;
use crate::scenario::{Scenario, SolverSettings};
use crate::streamline::{DEFAULT_MAX_STEPS, DEFAULT_STAGNATION_EPS_REL};

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_refinement")]
    pub data_grid_refinement: usize,
    pub grid: GridSection,
    pub coefficients: CoefficientSection,
    pub boundary: BoundarySection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub tracing: TracingSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default)]
    pub recurrence: RecurrenceSection,
    #[serde(default)]
    pub input: Option<InputSection>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSection {
    #[serde(rename = "D_preset")]
    pub d_preset: String,
    pub sigma_preset: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub f1_preset: String,
    pub f2_preset: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TracingSection {
    #[serde(default)]
    pub seed_spacing: Option<f64>,
    #[serde(default = "default_eps_rel")]
    pub stagnation_eps_rel: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Pgm,
    Json,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Control {
    /// `(−(y − ½), x − ½)`
    Rotation,
    /// `v ≡ 0`
    Zero,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceSection {
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_control")]
    pub control: Control,
    #[serde(default = "default_control_x0")]
    pub control_x0: [f64; 2],
    #[serde(default = "default_lattice")]
    pub transport_lattice: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub u1_csv: PathBuf,
    pub u2_csv: PathBuf,
}

fn default_refinement() -> usize {
    4
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}
fn default_eps_rel() -> f64 {
    DEFAULT_STAGNATION_EPS_REL
}
fn default_max_steps() -> usize {
    DEFAULT_MAX_STEPS
}
fn default_directory() -> PathBuf {
    PathBuf::from("out")
}
fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Pgm, Format::Json]
}
fn default_k() -> usize {
    100
}
fn default_radius() -> f64 {
    0.05
}
fn default_control() -> Control {
    Control::Rotation
}
fn default_control_x0() -> [f64; 2] {
    [0.5, 0.45]
}
fn default_lattice() -> usize {
    8
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { tol: default_tol(), max_iter: None }
    }
}

impl Default for TracingSection {
    fn default() -> Self {
        TracingSection {
            seed_spacing: None,
            stagnation_eps_rel: default_eps_rel(),
            max_steps: default_max_steps(),
        }
    }
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: default_directory(), formats: default_formats() }
    }
}

impl Default for RecurrenceSection {
    fn default() -> Self {
        RecurrenceSection {
            k: default_k(),
            radius: default_radius(),
            control: default_control(),
            control_x0: default_control_x0(),
            transport_lattice: default_lattice(),
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// A validated configuration with presets parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: Scenario,
    pub grid: Grid2D,
    pub refinement: usize,
    pub solver: SolverSettings,
    pub seed_spacing: f64,
    pub stagnation_eps_rel: f64,
    pub max_steps: usize,
    pub recurrence: RecurrenceSection,
}

fn preset(field: &str, src: &str) -> Result<Preset> {
    Preset::parse(src).map_err(|e| Error::Config(format!("{field}: {e}")))
}

fn invalid(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field} {msg}"))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Checks every field and parses the presets.
    pub fn resolve(&self) -> Result<Resolved> {
        for (name, n) in [("grid.nx", self.grid.nx), ("grid.ny", self.grid.ny)] {
            if n < 3 {
                return Err(invalid(name, format!("must be at least 3, got {n}")));
            }
        }
        let grid = Grid2D::new(self.grid.nx, self.grid.ny)?;
        if self.data_grid_refinement < 1 {
            return Err(invalid("data_grid_refinement", "must be at least 1"));
        }
        let scenario = Scenario {
            d: preset("coefficients.D_preset", &self.coefficients.d_preset)?,
            sigma: preset("coefficients.sigma_preset", &self.coefficients.sigma_preset)?,
            f1: preset("boundary.f1_preset", &self.boundary.f1_preset)?,
            f2: preset("boundary.f2_preset", &self.boundary.f2_preset)?,
        };
        let fine = grid.refined(self.data_grid_refinement)?;
        let f2 = scenario.f2;
        let trace = BoundaryData::from_fn(fine, |x, y| f2.eval(x, y))
            .map_err(|e| invalid("boundary.f2_preset", format!("cannot be evaluated: {e}")))?;
        if !(trace.min() > 0.0) {
            return Err(invalid(
                "boundary.f2_preset",
                format!("must be positive on the boundary, min is {}", trace.min()),
            ));
        }
        let d = scenario.d;
        let d_min = crate::grid::ScalarField::from_fn(fine, |x, y| d.eval(x, y)).min();
        if !(d_min > 0.0) {
            return Err(invalid("coefficients.D_preset", format!("must be positive, min is {d_min}")));
        }

        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol.is_finite()) {
            return Err(invalid("solver.tol", format!("must be positive, got {}", s.tol)));
        }
        if s.max_iter == Some(0) {
            return Err(invalid("solver.max_iter", "must be at least 1"));
        }
        let t = &self.tracing;
        let seed_spacing = t.seed_spacing.unwrap_or_else(|| grid.h_min());
        if !(seed_spacing > 0.0 && seed_spacing.is_finite()) {
            return Err(invalid("tracing.seed_spacing", format!("must be positive, got {seed_spacing}")));
        }
        if !(t.stagnation_eps_rel >= 0.0 && t.stagnation_eps_rel.is_finite()) {
            return Err(invalid(
                "tracing.stagnation_eps_rel",
                format!("must be nonnegative, got {}", t.stagnation_eps_rel),
            ));
        }
        if t.max_steps == 0 {
            return Err(invalid("tracing.max_steps", "must be at least 1"));
        }
        if self.outputs.formats.is_empty() {
            return Err(invalid("outputs.formats", "must name at least one of csv, pgm, json"));
        }
        let r = &self.recurrence;
        if r.k == 0 {
            return Err(invalid("recurrence.K", "must be at least 1"));
        }
        if !(r.radius > 0.0 && r.radius.is_finite()) {
            return Err(invalid("recurrence.radius", format!("must be positive, got {}", r.radius)));
        }
        let x0 = Point::new(r.control_x0[0], r.control_x0[1]);
        if !x0.is_finite() || !x0.in_unit_square() {
            return Err(invalid("recurrence.control_x0", "must lie in the unit square"));
        }
        if r.transport_lattice < 2 {
            return Err(invalid("recurrence.transport_lattice", "must be at least 2"));
        }

        Ok(Resolved {
            scenario,
            grid,
            refinement: self.data_grid_refinement,
            solver: SolverSettings { tol: s.tol, max_iter: s.max_iter },
            seed_spacing,
            stagnation_eps_rel: t.stagnation_eps_rel,
            max_steps: t.max_steps,
            recurrence: r.clone(),
        })
    }

    /// Configuration for one of the named scenarios.
    pub fn for_scenario(name: &str, n: usize) -> Result<Self> {
        let sc = Scenario::named(name)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{name}'")))?;
        Ok(ExperimentConfig {
            data_grid_refinement: default_refinement(),
            grid: GridSection { nx: n, ny: n },
            coefficients: CoefficientSection {
                d_preset: sc.d.to_string(),
                sigma_preset: sc.sigma.to_string(),
            },
            boundary: BoundarySection {
                f1_preset: sc.f1.to_string(),
                f2_preset: sc.f2.to_string(),
            },
            solver: SolverSection::default(),
            tracing: TracingSection::default(),
            outputs: OutputSection {
                directory: PathBuf::from("out").join(name),
                formats: default_formats(),
            },
            recurrence: RecurrenceSection::default(),
            input: None,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}
