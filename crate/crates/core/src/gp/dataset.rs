use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fem::Voigt;
use crate::material::{HfMaterial, PlasticState};

pub const STEPS_PER_CURVE: usize = 20;
pub const MAX_STRAIN_NORM: f64 = 0.10;
const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub curve: usize,
    /// 1-based load step along the curve.
    pub step: usize,
    pub strain: Voigt,
    pub stress: Voigt,
}

/// Strain-stress pairs along monotone, radial HF loading paths.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDataset {
    pub samples: Vec<Sample>,
    pub seed: u64,
}

/// `n_curves` radial paths with directions drawn uniformly on the unit
/// sphere of `(εxx, εyy, γxy)`. Each path has 20 steps of equal strain-norm
/// increment up to 0.10, evaluated with committed HF states.
pub fn generate_training_data(material: &HfMaterial, n_curves: usize, seed: u64) -> Result<TrainingDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(n_curves * STEPS_PER_CURVE);
    for curve in 0..n_curves {
        let mut attempt = 0;
        loop {
            let dir = random_direction(&mut rng);
            match trace_curve(material, curve, &dir) {
                Ok(s) => {
                    samples.extend(s);
                    break;
                }
                Err(e) if attempt < MAX_REDRAWS => {
                    log::warn!("training curve {curve} failed ({e}); redrawing its direction");
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(TrainingDataset { samples, seed })
}

fn random_direction(rng: &mut ChaCha8Rng) -> Voigt {
    loop {
        let v = Voigt::from_fn(|_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn trace_curve(material: &HfMaterial, curve: usize, dir: &Voigt) -> Result<Vec<Sample>> {
    let mut state = PlasticState::default();
    let mut out = Vec::with_capacity(STEPS_PER_CURVE);
    for step in 1..=STEPS_PER_CURVE {
        let strain = dir * (MAX_STRAIN_NORM * step as f64 / STEPS_PER_CURVE as f64);
        let (resp, next) = material.update_stress(&strain, &state)?;
        state = next;
        out.push(Sample {
            curve,
            step,
            strain,
            stress: resp.stress,
        });
    }
    Ok(out)
}

pub const DATASET_HEADER: &str = "curve,step,exx,eyy,gxy,sxx,syy,sxy";

impl TrainingDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_curves(&self) -> usize {
        let mut c: Vec<usize> = self.samples.iter().map(|s| s.curve).collect();
        c.dedup();
        c.len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(DATASET_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.curve, s.step, s.strain[0], s.strain[1], s.strain[2], s.stress[0], s.stress[1], s.stress[2]
            );
        }
        let _ = writeln!(out, "# seed = {}", self.seed);
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == DATASET_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{DATASET_HEADER}`"),
                })
            }
        }
        let mut samples = Vec::new();
        let mut seed = 0;
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            if let Some(c) = line.strip_prefix('#') {
                if let Some(v) = c.trim().strip_prefix("seed =") {
                    seed = v.trim().parse().map_err(|_| err(format!("bad seed `{v}`")))?;
                }
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(err(format!("expected 8 fields, found {}", f.len())));
            }
            let int = |s: &str| s.trim().parse::<usize>().map_err(|_| err(format!("bad integer `{s}`")));
            let num = |s: &str| s.trim().parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
            samples.push(Sample {
                curve: int(f[0])?,
                step: int(f[1])?,
                strain: Voigt::new(num(f[2])?, num(f[3])?, num(f[4])?),
                stress: Voigt::new(num(f[5])?, num(f[6])?, num(f[7])?),
            });
        }
        Ok(TrainingDataset { samples, seed })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}
