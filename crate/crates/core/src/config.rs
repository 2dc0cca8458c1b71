//! Flat `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mixture::MixMode;

/// Built-in geometries, used when no mesh file is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Dogbone,
    NotchedPlate,
    PlateWithHoles,
}

impl FromStr for Fixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dogbone" => Ok(Fixture::Dogbone),
            "notched-plate" => Ok(Fixture::NotchedPlate),
            "plate-with-holes" => Ok(Fixture::PlateWithHoles),
            _ => Err(Error::Config(format!("unknown fixture `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    /// Mesh file (linear or quadratic); overrides `fixture`.
    pub mesh: Option<PathBuf>,
    pub fixture: Fixture,
    /// Trained surrogate file; not needed in `full` mode.
    pub model: Option<PathBuf>,
    pub mode: MixMode,
    pub b: f64,
    pub eps: f64,
    pub omega: f64,
    pub tau: f64,
    pub k_max: usize,
    pub tol_u: f64,
    pub du0: f64,
    pub u_target: f64,
    pub seed: u64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: "run".into(),
            mesh: None,
            fixture: Fixture::Dogbone,
            model: None,
            mode: MixMode::PhaseField,
            b: 1.0,
            eps: 0.01,
            omega: 0.001,
            tau: 0.01,
            k_max: 3,
            tol_u: 1e-6,
            du0: 0.001,
            u_target: 0.02,
            seed: 0,
            output: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses the text form. Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut c = RunConfig::default();
        let resolve = |v: &str| {
            let p = PathBuf::from(v);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("`{key}` needs a number, found `{v}`")));
            let int = |v: &str| v.parse::<u64>().map_err(|_| err(format!("`{key}` needs an integer, found `{v}`")));
            match key {
                "experiment" | "name" => c.experiment = value.to_string(),
                "mesh" => c.mesh = Some(resolve(value)),
                "fixture" => c.fixture = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "model" => c.model = Some(resolve(value)),
                "mode" => c.mode = value.parse().map_err(|e: Error| err(e.to_string()))?,
                "b" => c.b = num(value)?,
                "eps" => c.eps = num(value)?,
                "omega" => c.omega = num(value)?,
                "tau" => c.tau = num(value)?,
                "k_max" => c.k_max = int(value)? as usize,
                "tol_u" => c.tol_u = num(value)?,
                "du0" => c.du0 = num(value)?,
                "u_target" => c.u_target = num(value)?,
                "seed" => c.seed = int(value)?,
                "output" => c.output = resolve(value),
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if c.model.is_none() && !matches!(c.mode, MixMode::Full) {
            return Err(Error::Config(format!("mode `{}` needs a `model` file", c.mode.name())));
        }
        Ok(c)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent())
    }
}
