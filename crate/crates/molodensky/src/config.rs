//! `key=value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use molodensky_core::assembly::AuxMode;
use molodensky_core::driver::{DriverConfig, GravityUpdate, SmoothingSurface};
use molodensky_core::mesh::{MAX_CUBE_LEVEL, MAX_ICOSPHERE_LEVEL};
use molodensky_core::smoother::VectorSmoothing;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: cannot parse {value:?} for {key}")]
    Value { line: usize, key: String, value: String },
    #[error("line {line}: {key}: {reason}")]
    Invalid { line: usize, key: String, reason: String },
    #[error("config: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Shape {
    #[default]
    Icosphere,
    Cube,
}

impl Shape {
    pub fn max_level(self) -> usize {
        match self {
            Shape::Icosphere => MAX_ICOSPHERE_LEVEL,
            Shape::Cube => MAX_CUBE_LEVEL,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Shape::Icosphere => "icosphere",
            Shape::Cube => "cube",
        }
    }
}

impl FromStr for Shape {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "icosphere" => Ok(Shape::Icosphere),
            "cube" => Ok(Shape::Cube),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub shape: Shape,
    pub level: usize,
    pub driver: DriverConfig,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { shape: Shape::Icosphere, level: 2, driver: DriverConfig::default(), output: None }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Some(true),
        "off" | "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Parses `text`; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.to_string() });
        };
        cfg.set(line, key.trim(), value.trim())?;
    }
    if cfg.level > cfg.shape.max_level() {
        return Err(ConfigError::Inconsistent(format!("level {} exceeds the {} guard {}", cfg.level, cfg.shape.name(), cfg.shape.max_level())));
    }
    cfg.driver.validate().map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
    Ok(cfg)
}

impl RunConfig {
    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::Value { line, key: key.to_string(), value: value.to_string() };
        let invalid = |reason: &str| ConfigError::Invalid { line, key: key.to_string(), reason: reason.to_string() };
        fn num<T: FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        let d = &mut self.driver;
        match key {
            "shape" => self.shape = value.parse().map_err(|_| bad())?,
            "level" => self.level = num(value).ok_or_else(bad)?,
            "theta0" => {
                d.theta0 = num(value).ok_or_else(bad)?;
                if !(d.theta0 > 1.0) {
                    return Err(invalid("theta0 > 1 required"));
                }
            }
            "kappa" => {
                d.kappa = num(value).ok_or_else(bad)?;
                if !(d.kappa > 1.0) {
                    return Err(invalid("kappa > 1 required"));
                }
            }
            "max_iter" => d.max_iter = num(value).ok_or_else(bad)?,
            "tol" => {
                d.tol = num(value).ok_or_else(bad)?;
                if !(d.tol > 0.0) {
                    return Err(invalid("tol > 0 required"));
                }
            }
            "smoother" => d.smoother.enabled = parse_bool(value).ok_or_else(bad)?,
            "modes" => {
                let m: usize = num(value).ok_or_else(bad)?;
                d.smoother.modes = (m > 0).then_some(m);
            }
            "smoothing_exponent" => {
                d.smoother.exponent = num(value).ok_or_else(bad)?;
                if !(d.smoother.exponent >= 1.0) {
                    return Err(invalid("exponent >= 1 required"));
                }
            }
            "vector_smoothing" => {
                d.smoother.vector_mode = match value {
                    "normal-tangential" => VectorSmoothing::NormalTangential,
                    "componentwise" => VectorSmoothing::Componentwise,
                    _ => return Err(bad()),
                }
            }
            "smoothing_surface" => {
                d.smoother.surface = match value {
                    "current" => SmoothingSurface::Current,
                    "reference" => SmoothingSurface::Reference,
                    _ => return Err(bad()),
                }
            }
            "restart_every" => {
                let k: usize = num(value).ok_or_else(bad)?;
                d.restart_every = (k > 0).then_some(k);
            }
            "delta_normal" | "delta_tangential" | "lift_factor" => {
                let x: f64 = num(value).ok_or_else(bad)?;
                if !(x > 0.0 && x.is_finite()) {
                    return Err(invalid("positive value required"));
                }
                match key {
                    "delta_normal" => d.fd.delta_normal = x,
                    "delta_tangential" => d.fd.delta_tangential = x,
                    _ => d.fd.lift_factor = x,
                }
            }
            "quad_order" => {
                d.quadrature.order = num(value).ok_or_else(bad)?;
                if d.quadrature.order == 0 {
                    return Err(invalid("order >= 1 required"));
                }
            }
            "grading_ratio" => {
                let r: f64 = num(value).ok_or_else(bad)?;
                if !(r > 0.0 && r < 1.0) {
                    return Err(invalid("0 < ratio < 1 required"));
                }
                d.quadrature.grading.ratio = r;
            }
            "grading_levels" => {
                d.quadrature.grading.levels = num(value).ok_or_else(bad)?;
                if d.quadrature.grading.levels == 0 {
                    return Err(invalid("at least one level required"));
                }
            }
            "separation_tol" => {
                let t: f64 = num(value).ok_or_else(bad)?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(invalid("0 < tol < 1 required"));
                }
                d.quadrature.separation_tol = t;
            }
            "aux_mode" => {
                d.aux_mode = match value {
                    "density" => AuxMode::Density,
                    "data" => AuxMode::Data,
                    _ => return Err(bad()),
                }
            }
            "gravity_update" => {
                d.gravity_update = match value {
                    "transported" => GravityUpdate::Transported,
                    "literal" => GravityUpdate::Literal,
                    _ => return Err(bad()),
                }
            }
            "transport" => d.transport = parse_bool(value).ok_or_else(bad)?,
            "target_radius" => {
                d.target_radius = num(value).ok_or_else(bad)?;
                if !(d.target_radius > 0.0) {
                    return Err(invalid("positive radius required"));
                }
            }
            "output" => self.output = Some(PathBuf::from(value)),
            _ => return Err(ConfigError::UnknownKey { line, key: key.to_string() }),
        }
        Ok(())
    }

    /// Effective configuration as `key=value` lines, in a form `parse_config` accepts.
    pub fn echo(&self) -> Vec<String> {
        let d = &self.driver;
        let mut out = Vec::new();
        let mut push = |k: &str, v: String| out.push(format!("{k}={v}"));
        push("shape", self.shape.name().into());
        push("level", self.level.to_string());
        push("theta0", d.theta0.to_string());
        push("kappa", d.kappa.to_string());
        push("max_iter", d.max_iter.to_string());
        push("tol", d.tol.to_string());
        push("smoother", on_off(d.smoother.enabled).into());
        push("modes", d.smoother.modes.unwrap_or(0).to_string());
        push("smoothing_exponent", d.smoother.exponent.to_string());
        push(
            "vector_smoothing",
            match d.smoother.vector_mode {
                VectorSmoothing::NormalTangential => "normal-tangential",
                VectorSmoothing::Componentwise => "componentwise",
            }
            .into(),
        );
        push(
            "smoothing_surface",
            match d.smoother.surface {
                SmoothingSurface::Current => "current",
                SmoothingSurface::Reference => "reference",
            }
            .into(),
        );
        push("restart_every", d.restart_every.unwrap_or(0).to_string());
        push("delta_normal", d.fd.delta_normal.to_string());
        push("delta_tangential", d.fd.delta_tangential.to_string());
        push("lift_factor", d.fd.lift_factor.to_string());
        push("quad_order", d.quadrature.order.to_string());
        push("grading_ratio", d.quadrature.grading.ratio.to_string());
        push("grading_levels", d.quadrature.grading.levels.to_string());
        push("separation_tol", d.quadrature.separation_tol.to_string());
        push(
            "aux_mode",
            match d.aux_mode {
                AuxMode::Density => "density",
                AuxMode::Data => "data",
            }
            .into(),
        );
        push(
            "gravity_update",
            match d.gravity_update {
                GravityUpdate::Transported => "transported",
                GravityUpdate::Literal => "literal",
            }
            .into(),
        );
        push("transport", on_off(d.transport).into());
        push("target_radius", d.target_radius.to_string());
        if let Some(p) = &self.output {
            push("output", p.display().to_string());
        }
        out
    }

    /// The echo as a `#` comment block.
    pub fn comment_block(&self) -> String {
        let mut s = String::new();
        for line in self.echo() {
            let _ = writeln!(s, "# {line}");
        }
        s
    }
}
