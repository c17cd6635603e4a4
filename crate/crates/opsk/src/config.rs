//! Line-oriented `key=value` scenario files with sweep-axis specifications.
//!
//! Grammar: one `key = value` pair per line; `#` starts a comment; blank
//! lines are ignored. Unknown and duplicate keys are rejected, and every
//! parse error names its line.
//!
//! Scenario keys (defaults in parentheses): `allocation` (`1,1,1`),
//! `distance`, `edge_ratio`, `flow_ratio`, `fnr` (`none`), `pn` (`0`),
//! `quality` (`1`), `mass` (`2.4e-9`), `diffusion` (`0.14e-4`), `m_ratio`
//! (`2`), `n_symbols` (`10000`), `seed` (`0`). `distance`, `edge_ratio` and
//! `flow_ratio` have no default: set them or sweep them.
//!
//! Sweep axes: `sweep.<field> = lin|log <min> <max> <points>` for `distance`,
//! `edge_ratio`, `flow_ratio`, `fnr`, `pn`, `quality`. The grid is the
//! cartesian product of the axes in file order, first axis outermost.
//!
//! Adaptive-study keys: `window` (`100`), `min_extension` (`0`, symbols; a
//! trailing `%` reads as percent of the symbols sent so far), `silence_len`
//! (`2`), `repeat` (`3`), `bank_mass` (`1000 * mass`), and `dist.<k> =
//! uniform | w0,w1,...` distributions (four are generated when none are
//! given: uniform plus three random ones drawn from the seed).

use std::collections::BTreeMap;
use std::path::Path;

use crate::adaptive::ExtensionThreshold;
use crate::channel::{DiffusionModel, Fnr};
use crate::perceptual::BitAllocation;
use crate::sim::ScenarioConfig;
use crate::{Error, Result};

/// Scenario fields a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisField {
    Distance,
    EdgeRatio,
    FlowRatio,
    Fnr,
    Pn,
    Quality,
}

impl AxisField {
    pub fn name(&self) -> &'static str {
        match self {
            AxisField::Distance => "distance",
            AxisField::EdgeRatio => "edge_ratio",
            AxisField::FlowRatio => "flow_ratio",
            AxisField::Fnr => "fnr",
            AxisField::Pn => "pn",
            AxisField::Quality => "quality",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "distance" => AxisField::Distance,
            "edge_ratio" => AxisField::EdgeRatio,
            "flow_ratio" => AxisField::FlowRatio,
            "fnr" => AxisField::Fnr,
            "pn" => AxisField::Pn,
            "quality" => AxisField::Quality,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

/// One sweep axis: `points` values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepAxis {
    pub field: AxisField,
    pub spacing: Spacing,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl SweepAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        (0..self.points)
            .map(|k| {
                let frac = k as f64 / (self.points - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * frac,
                    Spacing::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * frac).exp(),
                }
            })
            .collect()
    }
}

/// A symbol-frequency distribution for the adaptive study.
#[derive(Debug, Clone, PartialEq)]
pub enum DistSpec {
    Uniform,
    Weights(Vec<f64>),
}

/// Keys consumed by the `adaptive` subcommand.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptiveSection {
    pub window: Option<usize>,
    pub min_extension: Option<ExtensionThreshold>,
    pub silence_len: Option<usize>,
    pub repeat: Option<usize>,
    pub bank_mass: Option<f64>,
    /// `(index, spec)` pairs sorted by index.
    pub distributions: Vec<(usize, DistSpec)>,
}

/// A parsed scenario file: every key optional, sweep axes in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub allocation: Option<BitAllocation>,
    pub distance: Option<f64>,
    pub edge_ratio: Option<f64>,
    pub flow_ratio: Option<f64>,
    pub fnr: Option<[Fnr; 3]>,
    pub pn: Option<f64>,
    pub quality: Option<f64>,
    pub mass: Option<f64>,
    pub diffusion: Option<DiffusionModel>,
    pub m_ratio: Option<f64>,
    pub n_symbols: Option<u64>,
    pub seed: Option<u64>,
    pub axes: Vec<SweepAxis>,
    pub adaptive: AdaptiveSection,
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| cfg_err(line, format!("key `{key}`: `{value}` is not a number")))
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| cfg_err(line, format!("key `{key}`: `{value}` is not an integer")))
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64> {
    value.parse::<u64>().map_err(|_| {
        cfg_err(
            line,
            format!("key `{key}`: `{value}` is not an unsigned integer"),
        )
    })
}

fn parse_allocation(line: usize, value: &str) -> Result<BitAllocation> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(cfg_err(
            line,
            format!("key `allocation`: expected `n_p,n_i,n_e`, got `{value}`"),
        ));
    }
    let mut n = [0u32; 3];
    for (slot, part) in n.iter_mut().zip(&parts) {
        *slot = part.parse::<u32>().map_err(|_| {
            cfg_err(
                line,
                format!("key `allocation`: `{part}` is not an integer"),
            )
        })?;
    }
    BitAllocation::new(n[0], n[1], n[2])
        .map_err(|e| cfg_err(line, format!("key `allocation`: {e}")))
}

fn parse_fnr_value(line: usize, part: &str) -> Result<Fnr> {
    if part.eq_ignore_ascii_case("none") {
        return Ok(Fnr::NoiseFree);
    }
    let v = parse_f64(line, "fnr", part)?;
    if v <= 0.0 {
        return Err(cfg_err(line, format!("key `fnr`: {v} must be positive")));
    }
    Ok(Fnr::Finite(v))
}

fn parse_fnr(line: usize, value: &str) -> Result<[Fnr; 3]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.len() {
        1 => {
            let f = parse_fnr_value(line, parts[0])?;
            Ok([f; 3])
        }
        3 => {
            let mut out = [Fnr::NoiseFree; 3];
            for (slot, part) in out.iter_mut().zip(&parts) {
                *slot = parse_fnr_value(line, part)?;
            }
            Ok(out)
        }
        _ => Err(cfg_err(
            line,
            format!("key `fnr`: expected one value or three, got `{value}`"),
        )),
    }
}

fn parse_diffusion(line: usize, value: &str) -> Result<DiffusionModel> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    let model = match parts.len() {
        1 => DiffusionModel::isotropic(parse_f64(line, "diffusion", parts[0])?),
        3 => DiffusionModel::new(
            parse_f64(line, "diffusion", parts[0])?,
            parse_f64(line, "diffusion", parts[1])?,
            parse_f64(line, "diffusion", parts[2])?,
        ),
        _ => {
            return Err(cfg_err(
                line,
                format!("key `diffusion`: expected one value or three, got `{value}`"),
            ))
        }
    };
    model.map_err(|e| cfg_err(line, format!("key `diffusion`: {e}")))
}

fn parse_extension(line: usize, value: &str) -> Result<ExtensionThreshold> {
    if let Some(pct) = value.strip_suffix('%') {
        let pct = parse_f64(line, "min_extension", pct.trim())?;
        if pct < 0.0 {
            return Err(cfg_err(line, "key `min_extension`: percent must be >= 0"));
        }
        Ok(ExtensionThreshold::PercentOfRuntime(pct))
    } else {
        let sym = parse_f64(line, "min_extension", value)?;
        if sym < 0.0 {
            return Err(cfg_err(line, "key `min_extension`: symbols must be >= 0"));
        }
        Ok(ExtensionThreshold::Symbols(sym))
    }
}

fn parse_axis(line: usize, field: AxisField, value: &str) -> Result<SweepAxis> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 4 {
        return Err(cfg_err(
            line,
            format!(
                "sweep.{}: expected `lin|log <min> <max> <points>`, got `{value}`",
                field.name()
            ),
        ));
    }
    let spacing = match parts[0] {
        "lin" | "linear" => Spacing::Linear,
        "log" => Spacing::Log,
        other => {
            return Err(cfg_err(
                line,
                format!(
                    "sweep.{}: spacing `{other}` is neither lin nor log",
                    field.name()
                ),
            ))
        }
    };
    let min = parse_f64(line, field.name(), parts[1])?;
    let max = parse_f64(line, field.name(), parts[2])?;
    let points = parse_usize(line, field.name(), parts[3])?;
    if points == 0 {
        return Err(cfg_err(
            line,
            format!("sweep.{}: points must be >= 1", field.name()),
        ));
    }
    if min > max {
        return Err(cfg_err(
            line,
            format!("sweep.{}: min {min} exceeds max {max}", field.name()),
        ));
    }
    if spacing == Spacing::Log && min <= 0.0 {
        return Err(cfg_err(
            line,
            format!("sweep.{}: log spacing needs min > 0", field.name()),
        ));
    }
    Ok(SweepAxis {
        field,
        spacing,
        min,
        max,
        points,
    })
}

fn parse_dist(line: usize, value: &str) -> Result<DistSpec> {
    if value.eq_ignore_ascii_case("uniform") {
        return Ok(DistSpec::Uniform);
    }
    let weights: Result<Vec<f64>> = value
        .split(',')
        .map(|p| parse_f64(line, "dist", p.trim()))
        .collect();
    let weights = weights?;
    if weights.iter().any(|&w| w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
        return Err(cfg_err(
            line,
            "dist: weights must be non-negative with a positive sum",
        ));
    }
    Ok(DistSpec::Weights(weights))
}

impl ConfigFile {
    pub fn parse_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut dists: BTreeMap<usize, DistSpec> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(cfg_err(line, format!("key `{key}` has no value")));
            }
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(cfg_err(
                    line,
                    format!("duplicate key `{key}` (first set on line {first})"),
                ));
            }

            match key {
                "allocation" => cfg.allocation = Some(parse_allocation(line, value)?),
                "distance" => cfg.distance = Some(parse_f64(line, key, value)?),
                "edge_ratio" => cfg.edge_ratio = Some(parse_f64(line, key, value)?),
                "flow_ratio" => cfg.flow_ratio = Some(parse_f64(line, key, value)?),
                "fnr" => cfg.fnr = Some(parse_fnr(line, value)?),
                "pn" => cfg.pn = Some(parse_f64(line, key, value)?),
                "quality" => cfg.quality = Some(parse_f64(line, key, value)?),
                "mass" => cfg.mass = Some(parse_f64(line, key, value)?),
                "diffusion" => cfg.diffusion = Some(parse_diffusion(line, value)?),
                "m_ratio" => cfg.m_ratio = Some(parse_f64(line, key, value)?),
                "n_symbols" => cfg.n_symbols = Some(parse_u64(line, key, value)?),
                "seed" => cfg.seed = Some(parse_u64(line, key, value)?),
                "window" => cfg.adaptive.window = Some(parse_usize(line, key, value)?),
                "min_extension" => cfg.adaptive.min_extension = Some(parse_extension(line, value)?),
                "silence_len" => cfg.adaptive.silence_len = Some(parse_usize(line, key, value)?),
                "repeat" => cfg.adaptive.repeat = Some(parse_usize(line, key, value)?),
                "bank_mass" => cfg.adaptive.bank_mass = Some(parse_f64(line, key, value)?),
                _ => {
                    if let Some(field_name) = key.strip_prefix("sweep.") {
                        let field = AxisField::from_name(field_name).ok_or_else(|| {
                            cfg_err(line, format!("`{field_name}` is not a sweepable field"))
                        })?;
                        cfg.axes.push(parse_axis(line, field, value)?);
                    } else if let Some(dist_idx) = key.strip_prefix("dist.") {
                        let n = parse_usize(line, key, dist_idx)?;
                        dists.insert(n, parse_dist(line, value)?);
                    } else {
                        return Err(cfg_err(line, format!("unknown key `{key}`")));
                    }
                }
            }
        }

        // An axis and a scalar for the same field contradict each other.
        for axis in &cfg.axes {
            let scalar_set = match axis.field {
                AxisField::Distance => cfg.distance.is_some(),
                AxisField::EdgeRatio => cfg.edge_ratio.is_some(),
                AxisField::FlowRatio => cfg.flow_ratio.is_some(),
                AxisField::Fnr => cfg.fnr.is_some(),
                AxisField::Pn => cfg.pn.is_some(),
                AxisField::Quality => cfg.quality.is_some(),
            };
            if scalar_set {
                return Err(Error::InvalidInput(format!(
                    "key `{}` is both set and swept",
                    axis.field.name()
                )));
            }
        }

        cfg.adaptive.distributions = dists.into_iter().collect();
        Ok(cfg)
    }

    /// The scenario with defaults applied; errors name any required key that
    /// is neither set nor swept.
    pub fn base_scenario(&self, seed_override: Option<u64>) -> Result<ScenarioConfig> {
        let swept = |field: AxisField| self.axes.iter().any(|a| a.field == field);
        let require = |value: Option<f64>, field: AxisField| -> Result<f64> {
            match value {
                Some(v) => Ok(v),
                // Swept fields get a placeholder the axis overwrites.
                None if swept(field) => Ok(1.0),
                None => Err(Error::InvalidInput(format!(
                    "missing key `{}` (set it or add sweep.{})",
                    field.name(),
                    field.name()
                ))),
            }
        };
        let defaults = ScenarioConfig::default();
        let cfg = ScenarioConfig {
            allocation: self.allocation.unwrap_or(defaults.allocation),
            distance: require(self.distance, AxisField::Distance)?,
            edge_ratio: require(self.edge_ratio, AxisField::EdgeRatio)?,
            flow_ratio: require(self.flow_ratio, AxisField::FlowRatio)?,
            fnr: self.fnr.unwrap_or(defaults.fnr),
            pn: self.pn.unwrap_or(defaults.pn),
            quality: self.quality.unwrap_or(defaults.quality),
            mass: self.mass.unwrap_or(defaults.mass),
            diffusion: self.diffusion.unwrap_or(defaults.diffusion),
            m_ratio: self.m_ratio.unwrap_or(defaults.m_ratio),
            n_symbols: self.n_symbols.unwrap_or(defaults.n_symbols),
            seed: seed_override.or(self.seed).unwrap_or(defaults.seed),
        };
        Ok(cfg)
    }

    /// Expands the sweep axes into the scenario grid (cartesian product,
    /// first axis outermost). With no axes the grid is the base scenario.
    pub fn scenario_grid(&self, seed_override: Option<u64>) -> Result<Vec<ScenarioConfig>> {
        let base = self.base_scenario(seed_override)?;
        let mut grid = vec![base];
        for axis in &self.axes {
            let values = axis.values();
            let mut next = Vec::with_capacity(grid.len() * values.len());
            for cfg in &grid {
                for &v in &values {
                    let mut point = *cfg;
                    match axis.field {
                        AxisField::Distance => point.distance = v,
                        AxisField::EdgeRatio => point.edge_ratio = v,
                        AxisField::FlowRatio => point.flow_ratio = v,
                        AxisField::Fnr => point.fnr = [Fnr::Finite(v); 3],
                        AxisField::Pn => point.pn = v,
                        AxisField::Quality => point.quality = v,
                    }
                    next.push(point);
                }
            }
            grid = next;
        }
        for cfg in &grid {
            cfg.validate()?;
        }
        Ok(grid)
    }
}
