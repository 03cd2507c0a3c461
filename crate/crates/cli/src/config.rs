//! Experiment configuration: a TOML file, overridden field by field from
//! the command line.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SEED_ENV: &str = "BPHI_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Conjugate,
    Norm,
    Tailbound,
    Sumbound,
    Characterize,
    Equivalence,
    VerifySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Conjugate => "conjugate",
            Self::Norm => "norm",
            Self::Tailbound => "tailbound",
            Self::Sumbound => "sumbound",
            Self::Characterize => "characterize",
            Self::Equivalence => "equivalence",
            Self::VerifySuite => "verify-suite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Bphi,
    Gls,
    Orlicz,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MgfSource {
    /// Closed-form natural function where the law has one.
    Analytic,
    Empirical,
}

/// Threshold points: `"start:stop:step"` radii along 1⃗, or explicit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Points {
    Grid(String),
    Vectors(Vec<Vec<f64>>),
}

impl Points {
    pub fn resolve(&self, d: usize, key: &str) -> Result<Vec<Vec<f64>>, CliError> {
        match self {
            Points::Vectors(v) => {
                if let Some(bad) = v.iter().find(|p| p.len() != d) {
                    return Err(CliError::config(key, format!("point {bad:?} does not have dimension {d}")));
                }
                Ok(v.clone())
            }
            Points::Grid(s) => Ok(grid(s, key)?.into_iter().map(|r| vec![r; d]).collect()),
        }
    }
}

/// Inclusive `start:stop:step` grid, with values snapped to k·step to keep
/// them exact decimals.
pub fn grid(s: &str, key: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let nums: Option<Vec<f64>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
    let bad = || CliError::config(key, format!("expected start:stop:step, got '{s}'"));
    let nums = nums.ok_or_else(bad)?;
    let [start, stop, step] = nums[..] else { return Err(bad()) };
    if !(step > 0.0) || !(stop >= start) {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub dists: Vec<String>,
    pub phis: Vec<String>,
    #[serde(default)]
    pub x: Option<Points>,
    #[serde(default)]
    pub reps: Option<usize>,
    /// Multiplies every bound before comparison; values below 1 make a
    /// deliberately invalid bound for negative controls.
    #[serde(default)]
    pub bound_multiplier: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub phi: Option<String>,
    pub dist: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub tol: Option<f64>,
    pub space: Option<Space>,
    pub mgf: Option<MgfSource>,
    /// Use this component norm instead of estimating one.
    pub norm: Option<f64>,
    pub x: Option<Points>,
    pub n_set: Option<Vec<u64>>,
    pub function: Option<String>,
    pub eps: Option<String>,
    pub kmax: Option<usize>,
    #[serde(rename = "box")]
    pub box_range: Option<String>,
    pub suite: Option<Suite>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| CliError::config(&path.display().to_string(), e.to_string().trim().to_string()))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(self, over: Config) -> Config {
        macro_rules! pick {
            ($($f:ident),*) => { Config { $($f: over.$f.or(self.$f)),* } };
        }
        pick!(experiment, seed, out, format, phi, dist, n, reps, tol, space, mgf, norm, x, n_set, function, eps, kmax, box_range, suite)
    }

    /// Seed from the config, else the environment, else 0.
    pub fn resolved_seed(&self) -> Result<u64, CliError> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| CliError::config(SEED_ENV, format!("not an unsigned integer: '{v}'"))),
            Err(_) => Ok(0),
        }
    }

    pub fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, CliError> {
        value.as_ref().ok_or_else(|| CliError::config(key, "missing required key".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(grid("0.5:4:0.5", "x").unwrap().len(), 8);
        assert_eq!(grid("1:1:1", "x").unwrap(), vec![1.0]);
        assert!(grid("1:0:1", "x").is_err());
        assert!(grid("a:b", "x").is_err());
    }

    #[test]
    fn parses_and_merges() {
        let c: Config = toml::from_str(
            r#"
            experiment = "tailbound"
            seed = 3
            phi = "quadratic{d=1}"
            x = "0.5:1:0.5"
            "#,
        )
        .unwrap();
        assert_eq!(c.experiment, Some(Experiment::Tailbound));
        let m = c.merge(Config {
            seed: Some(9),
            ..Config::default()
        });
        assert_eq!(m.seed, Some(9));
        assert_eq!(m.phi.as_deref(), Some("quadratic{d=1}"));
        assert_eq!(m.x.unwrap().resolve(2, "x").unwrap(), vec![vec![0.5, 0.5], vec![1.0, 1.0]]);
        assert!(toml::from_str::<Config>("bogus = 1").is_err());
    }
}
