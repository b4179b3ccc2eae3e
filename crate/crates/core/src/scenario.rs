//! Named coefficient/boundary-data bundles and synthetic data generation.
//!
//! Data are produced on a grid refined `refinement` times in each direction
//! and injected onto the working grid, so the reconstruction never sees the
//! discretization that generated its input.

use serde::Serialize;

use crate::error::Result;
use crate::forward::{
    check_positivity, solve_dirichlet_with_stats, BoundaryData, CoefficientPair,
    PositivityReport, SolveStats,
};
use crate::grid::{Grid2D, ScalarField};
use crate::presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub d: Preset,
    pub sigma: Preset,
    pub f1: Preset,
    pub f2: Preset,
}

impl Scenario {
    /// `D ≡ 1, σ ≡ 0, f₁ = x, f₂ ≡ 1`: every stencil is exact.
    pub fn affine() -> Self {
        Scenario {
            d: Preset::Const { value: 1.0 },
            sigma: Preset::Const { value: 0.0 },
            f1: Preset::LinearX { base: 0.0, slope: 1.0 },
            f2: Preset::Const { value: 1.0 },
        }
    }

    /// `D = 1 + x, σ ≡ 0, f₁ = ln(1 + x)/ln 2, f₂ ≡ 1`, solved by `u₁ = f₁`.
    pub fn log() -> Self {
        Scenario {
            d: Preset::LinearX { base: 1.0, slope: 1.0 },
            sigma: Preset::Const { value: 0.0 },
            f1: Preset::LogX { scale: 1.0 },
            f2: Preset::Const { value: 1.0 },
        }
    }

    /// `D = 1 + ½ sin(πx) sin(πy), σ ≡ ½`, a Gaussian bump for `f₁`, `f₂ ≡ 1`.
    ///
    /// The bump sits on the middle of the bottom edge. Its widths make the two
    /// edge curvatures of `f₁` cancel at the bottom corners, and it has decayed
    /// to nothing at the top ones. Where that sum is nonzero, `u₁/u₂` picks up
    /// an `r² log r` corner singularity and `∇·(DX)` stops converging near it.
    pub fn smooth_bump() -> Self {
        Scenario {
            d: Preset::SinBump { base: 1.0, amplitude: 0.5 },
            sigma: Preset::Const { value: 0.5 },
            f1: Preset::GaussianBump {
                base: 1.0,
                amplitude: 1.0,
                cx: 0.5,
                cy: 0.0,
                width: 0.3,
                width_y: 0.225,
            },
            f2: Preset::Const { value: 1.0 },
        }
    }

    /// `σ ≡ 0` and `f₂ ≡ 1`, so `u₂ ≡ 1` and `X = ∇u₁`.
    pub fn corollary() -> Self {
        Scenario {
            sigma: Preset::Const { value: 0.0 },
            ..Self::smooth_bump()
        }
    }

    pub fn named(name: &str) -> Option<Self> {
        match name {
            "affine" => Some(Self::affine()),
            "log" => Some(Self::log()),
            "smooth_bump" => Some(Self::smooth_bump()),
            "corollary" => Some(Self::corollary()),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 4] = ["affine", "log", "smooth_bump", "corollary"];

    pub fn coefficients(&self, grid: Grid2D) -> Result<CoefficientPair> {
        let (d, s) = (self.d, self.sigma);
        CoefficientPair::new(
            ScalarField::from_fn(grid, |x, y| d.eval(x, y)),
            ScalarField::from_fn(grid, |x, y| s.eval(x, y)),
        )
    }

    pub fn boundary(&self, grid: Grid2D) -> Result<(BoundaryData, BoundaryData)> {
        let (f1, f2) = (self.f1, self.f2);
        Ok((
            BoundaryData::from_fn(grid, |x, y| f1.eval(x, y))?,
            BoundaryData::from_fn(grid, |x, y| f2.eval(x, y))?,
        ))
    }

    /// The exact solution for boundary data `f`, when the preset extension of
    /// `f` is one: constants and affine data with `D` constant and `σ ≡ 0`,
    /// and `ln(1+x)` data with `D ∝ 1 + x` and `σ ≡ 0`.
    pub fn exact_solution(&self, f: Preset) -> Option<Preset> {
        if self.sigma != (Preset::Const { value: 0.0 }) {
            return None;
        }
        match (self.d, f) {
            (_, Preset::Const { .. }) => Some(f),
            (Preset::Const { .. }, Preset::Linear { .. } | Preset::LinearX { .. }) => Some(f),
            (Preset::LinearX { base, slope }, Preset::LogX { .. }) if base > 0.0 && base == slope => {
                Some(f)
            }
            _ => None,
        }
    }

    /// Measured boundary trace of `D`.
    pub fn d_boundary(&self, grid: Grid2D) -> Result<BoundaryData> {
        let d = self.d;
        BoundaryData::from_fn(grid, |x, y| d.eval(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    /// `None` uses 50 × (node count of the grid being solved).
    pub max_iter: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: crate::forward::DEFAULT_TOL,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DataDiagnostics {
    pub data_grid: Grid2D,
    pub u1_solve: SolveStats,
    pub u2_solve: SolveStats,
    /// Present when `f₁` is positive.
    pub u1_positivity: Option<PositivityReport>,
    pub u2_positivity: PositivityReport,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub u1: ScalarField,
    pub u2: ScalarField,
    pub truth: CoefficientPair,
    pub d_boundary: BoundaryData,
    pub diagnostics: DataDiagnostics,
}

pub fn generate_data(
    scenario: &Scenario,
    grid: Grid2D,
    refinement: usize,
    solver: SolverSettings,
) -> Result<SyntheticData> {
    let fine = grid.refined(refinement)?;
    let coeffs = scenario.coefficients(fine)?;
    let (f1, f2) = scenario.boundary(fine)?;
    f2.require_positive("f2")?;
    let max_iter = solver.max_iter.unwrap_or_else(|| crate::forward::default_max_iter(&fine));
    let (u1, s1) = solve_dirichlet_with_stats(&coeffs, &f1, solver.tol, max_iter)?;
    let (u2, s2) = solve_dirichlet_with_stats(&coeffs, &f2, solver.tol, max_iter)?;
    let u1_positivity = if f1.min() > 0.0 {
        Some(check_positivity(&u1, &f1)?)
    } else {
        None
    };
    let u2_positivity = check_positivity(&u2, &f2)?;
    Ok(SyntheticData {
        u1: u1.restrict_to(&grid, refinement)?,
        u2: u2.restrict_to(&grid, refinement)?,
        truth: scenario.coefficients(grid)?,
        d_boundary: scenario.d_boundary(grid)?,
        diagnostics: DataDiagnostics {
            data_grid: fine,
            u1_solve: s1,
            u2_solve: s2,
            u1_positivity,
            u2_positivity,
        },
    })
}
