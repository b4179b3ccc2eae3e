//! Named analytic families used for coefficients and boundary data.
//!
//! Presets are written as `name` or `name(key=value, ...)`, e.g.
//! `sin_bump(base=1, amplitude=0.5)`. Unspecified parameters take defaults.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// `value`
    Const { value: f64 },
    /// `a + bx·x + by·y`
    Linear { a: f64, bx: f64, by: f64 },
    /// `base + slope·x`
    LinearX { base: f64, slope: f64 },
    /// `scale·ln(1 + x)/ln 2`
    LogX { scale: f64 },
    /// `base + amplitude·sin(πx)·sin(πy)`
    SinBump { base: f64, amplitude: f64 },
    /// `base + amplitude·exp(−(x − cx)²/(2·width²) − (y − cy)²/(2·width_y²))`;
    /// `width_y` defaults to `width`.
    GaussianBump { base: f64, amplitude: f64, cx: f64, cy: f64, width: f64, width_y: f64 },
}

pub const PRESET_NAMES: &[&str] = &["const", "linear", "linear_x", "log_x", "sin_bump", "gaussian_bump"];

impl Preset {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Preset::Const { value } => value,
            Preset::Linear { a, bx, by } => a + bx * x + by * y,
            Preset::LinearX { base, slope } => base + slope * x,
            Preset::LogX { scale } => scale * (1.0 + x).ln() / LN_2,
            Preset::SinBump { base, amplitude } => {
                base + amplitude * (PI * x).sin() * (PI * y).sin()
            }
            Preset::GaussianBump { base, amplitude, cx, cy, width, width_y } => {
                let e = (x - cx).powi(2) / (2.0 * width * width)
                    + (y - cy).powi(2) / (2.0 * width_y * width_y);
                base + amplitude * (-e).exp()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Const { .. } => "const",
            Preset::Linear { .. } => "linear",
            Preset::LinearX { .. } => "linear_x",
            Preset::LogX { .. } => "log_x",
            Preset::SinBump { .. } => "sin_bump",
            Preset::GaussianBump { .. } => "gaussian_bump",
        }
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Preset::Const { value } => vec![("value", value)],
            Preset::Linear { a, bx, by } => vec![("a", a), ("bx", bx), ("by", by)],
            Preset::LinearX { base, slope } => vec![("base", base), ("slope", slope)],
            Preset::LogX { scale } => vec![("scale", scale)],
            Preset::SinBump { base, amplitude } => vec![("base", base), ("amplitude", amplitude)],
            Preset::GaussianBump { base, amplitude, cx, cy, width, width_y } => vec![
                ("base", base),
                ("amplitude", amplitude),
                ("cx", cx),
                ("cy", cy),
                ("width", width),
                ("width_y", width_y),
            ],
        }
    }

    /// Parses `name(key=value, ...)`.
    pub fn parse(src: &str) -> Result<Self> {
        let src = src.trim();
        let (name, args) = match src.find('(') {
            Some(open) => {
                let inner = src[open + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unterminated preset '{src}'")))?;
                (src[..open].trim(), inner)
            }
            None => (src, ""),
        };
        let mut preset = match name {
            "const" => Preset::Const { value: 1.0 },
            "linear" => Preset::Linear { a: 0.0, bx: 1.0, by: 0.0 },
            "linear_x" => Preset::LinearX { base: 0.0, slope: 1.0 },
            "log_x" => Preset::LogX { scale: 1.0 },
            "sin_bump" => Preset::SinBump { base: 1.0, amplitude: 0.5 },
            "gaussian_bump" => Preset::GaussianBump {
                base: 1.0,
                amplitude: 1.0,
                cx: 0.0,
                cy: 0.0,
                width: 0.5,
                width_y: f64::NAN,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown preset '{other}' (expected one of {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (k, v) = arg
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in '{arg}'")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad number in '{arg}'")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("non-finite parameter in '{arg}'")));
            }
            preset.set(k.trim(), v)?;
        }
        if let Preset::GaussianBump { width, ref mut width_y, .. } = preset {
            // NaN marks "not given"; parameters are checked finite above
            if width_y.is_nan() {
                *width_y = width;
            }
            if width <= 0.0 || *width_y <= 0.0 {
                return Err(Error::Config("gaussian_bump widths must be positive".into()));
            }
        }
        Ok(preset)
    }

    fn set(&mut self, key: &str, v: f64) -> Result<()> {
        let slot = match (self, key) {
            (Preset::Const { value }, "value") => value,
            (Preset::Linear { a, .. }, "a") => a,
            (Preset::Linear { bx, .. }, "bx") => bx,
            (Preset::Linear { by, .. }, "by") => by,
            (Preset::LinearX { base, .. }, "base") => base,
            (Preset::LinearX { slope, .. }, "slope") => slope,
            (Preset::LogX { scale }, "scale") => scale,
            (Preset::SinBump { base, .. }, "base") => base,
            (Preset::SinBump { amplitude, .. }, "amplitude") => amplitude,
            (Preset::GaussianBump { base, .. }, "base") => base,
            (Preset::GaussianBump { amplitude, .. }, "amplitude") => amplitude,
            (Preset::GaussianBump { cx, .. }, "cx") => cx,
            (Preset::GaussianBump { cy, .. }, "cy") => cy,
            (Preset::GaussianBump { width, .. }, "width") => width,
            (Preset::GaussianBump { width_y, .. }, "width_y") => width_y,
            (p, k) => {
                return Err(Error::Config(format!(
                    "preset '{}' has no parameter '{k}'",
                    p.name()
                )))
            }
        };
        *slot = v;
        Ok(())
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}({})", self.name(), params.join(", "))
    }
}
