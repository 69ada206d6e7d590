//! Run configuration: flat `key = value` files overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sg_sampling::{Fractal, Normalization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(format!("unknown output format {other:?}")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Svg => "svg",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub fractal: Fractal,
    pub level: usize,
    /// Quadrature level M; `level + 8` when unset.
    pub quad: Option<usize>,
    pub norm: Normalization,
    pub eigen_tol: f64,
    pub spectrum_tol: f64,
    pub gap_tol: f64,
    pub format: Option<Format>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            fractal: Fractal::Sg,
            level: 2,
            quad: None,
            norm: Normalization::B,
            eigen_tol: 1e-10,
            spectrum_tol: 1e-9,
            gap_tol: 1e-4,
            format: None,
            output: None,
            seed: 7,
            jobs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn positive(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = parse(key, value)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{key} must be positive"))
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "fractal" => {
                self.fractal = match value {
                    "sg" => Fractal::Sg,
                    "sg3" => Fractal::Sg3,
                    _ => return Err(format!("unknown fractal {value:?}")),
                }
            }
            "level" => self.level = parse(key, value)?,
            "quad" => self.quad = Some(parse(key, value)?),
            "norm" => self.norm = value.parse().map_err(|e| format!("{e}"))?,
            "eigen_tol" => self.eigen_tol = positive(key, value)?,
            "spectrum_tol" => self.spectrum_tol = positive(key, value)?,
            "gap_tol" => self.gap_tol = positive(key, value)?,
            "format" | "out" => self.format = Some(value.parse()?),
            "output" => self.output = Some(PathBuf::from(value)),
            "seed" => self.seed = parse(key, value)?,
            "jobs" => self.jobs = Some(parse(key, value)?),
            _ => return Err(format!("unknown configuration key {key:?}")),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), String> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {e}", n + 1))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut config = Self::default();
        config.apply_text(&text)?;
        Ok(config)
    }

    pub fn quad_level(&self, m: usize) -> Result<usize, String> {
        let quad = self.quad.unwrap_or(m + 8);
        if quad < m {
            return Err(format!(
                "quadrature level {quad} is below the sampling level {m}"
            ));
        }
        Ok(quad)
    }
}
