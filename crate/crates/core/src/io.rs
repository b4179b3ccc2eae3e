//! Artifact formats.
//!
//! Grid CSV: the first line is `nx,ny,hx,hy`, then `ny` lines of `nx` values,
//! line 0 holding `y = 0`. Nodes without a value are written as `nan`.
//! Coverage images are plain PGM (`P2`) with one pixel per cell, top row at
//! the largest `y`, visit counts clipped to 255.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::reconstruction::CoverageMap;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.display().to_string(), source }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Renders a field; nodes with `mask[k] == false` become `nan`.
pub fn grid_csv(field: &ScalarField, mask: Option<&[bool]>) -> String {
    let g = field.grid();
    let mut out = format!("{},{},{},{}\n", g.nx(), g.ny(), g.hx(), g.hy());
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            if i > 0 {
                out.push(',');
            }
            let k = g.idx(i, j);
            if mask.map_or(true, |m| m[k]) {
                let _ = write!(out, "{}", field.values()[k]);
            } else {
                out.push_str("nan");
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_grid_csv(path: &Path, field: &ScalarField, mask: Option<&[bool]>) -> Result<()> {
    write_text(path, &grid_csv(field, mask))
}

/// Parses the grid CSV format. Every value must be finite.
pub fn parse_grid_csv(text: &str) -> Result<ScalarField> {
    let bad = |msg: String| Error::validation(format!("grid csv: {msg}"));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let parts: Vec<&str> = header.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(bad(format!("header must be nx,ny,hx,hy, got '{header}'")));
    }
    let nx: usize = parts[0].parse().map_err(|_| bad(format!("bad nx '{}'", parts[0])))?;
    let ny: usize = parts[1].parse().map_err(|_| bad(format!("bad ny '{}'", parts[1])))?;
    let grid = Grid2D::new(nx, ny)?;
    for (name, s, h) in [("hx", parts[2], grid.hx()), ("hy", parts[3], grid.hy())] {
        let v: f64 = s.parse().map_err(|_| bad(format!("bad {name} '{s}'")))?;
        if (v - h).abs() > 1e-9 * h {
            return Err(bad(format!("{name} = {v} does not match the unit square ({h})")));
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for (j, line) in lines.enumerate() {
        if j >= ny {
            return Err(bad(format!("more than ny = {ny} rows")));
        }
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != nx {
            return Err(bad(format!("row {j} has {} values, expected {nx}", row.len())));
        }
        for (i, s) in row.iter().enumerate() {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad value '{s}' at ({i}, {j})")))?;
            values.push(v);
        }
    }
    if values.len() != grid.len() {
        return Err(bad(format!("expected {ny} rows, got {}", values.len() / nx)));
    }
    ScalarField::new(grid, values)
}

pub fn read_grid_csv(path: &Path) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_grid_csv(&text)
}

pub fn coverage_pgm(cm: &CoverageMap) -> String {
    let g = cm.grid();
    let (w, h) = (g.nx() - 1, g.ny() - 1);
    let mut out = format!("P2\n{w} {h}\n255\n");
    for cj in (0..h).rev() {
        let row: Vec<String> = (0..w)
            .map(|ci| cm.visits()[g.cell_index(ci, cj)].min(255).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_coverage_pgm(path: &Path, cm: &CoverageMap) -> Result<()> {
    write_text(path, &coverage_pgm(cm))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("json encoding failed: {e}")))?;
    text.push('\n');
    write_text(path, &text)
}
