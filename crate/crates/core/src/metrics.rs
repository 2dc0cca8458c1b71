//! Per-step run metrics, their CSV form, and force-displacement errors.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub use crate::mixture::phase_populations;

pub const METRICS_HEADER: &str =
    "step,u,F,du,accepted,stagger_iters,nr_iters_cum,hf_evals_cum,n_ips_gp,n_ips_mixed,n_ips_hf,failure_kind";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    None,
    Mechanical,
    PhaseField,
}

impl FailureKind {
    pub fn name(self) -> &'static str {
        match self {
            FailureKind::None => "none",
            FailureKind::Mechanical => "mechanical",
            FailureKind::PhaseField => "phasefield",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(FailureKind::None),
            "mechanical" => Some(FailureKind::Mechanical),
            "phasefield" => Some(FailureKind::PhaseField),
            _ => None,
        }
    }
}

/// One attempted load step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// 1-based attempt index.
    pub step: usize,
    /// Prescribed displacement of the attempt.
    pub u: f64,
    /// Reaction force; NaN for rejected attempts.
    pub force: f64,
    pub du: f64,
    pub accepted: bool,
    pub stagger_iters: usize,
    pub nr_iters_cum: u64,
    pub hf_evals_cum: u64,
    pub n_gp: usize,
    pub n_mixed: usize,
    pub n_hf: usize,
    pub failure: FailureKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub rows: Vec<StepRecord>,
    pub solved: bool,
}

impl Default for RunMetrics {
    fn default() -> Self {
        RunMetrics {
            rows: Vec::new(),
            solved: true,
        }
    }
}

/// Force-displacement samples in ascending displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct FuCurve {
    pub samples: Vec<(f64, f64)>,
}

impl FuCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidInput("F-u displacements must be strictly increasing".into()));
        }
        Ok(FuCurve { samples })
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.0, self.samples.last()?.0))
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn interpolate(&self, u: f64) -> Option<f64> {
        let s = &self.samples;
        let (lo, hi) = self.support()?;
        let tol = 1e-12 * hi.abs().max(1.0);
        if u < lo - tol || u > hi + tol {
            return None;
        }
        let i = s.partition_point(|p| p.0 < u);
        if i == 0 {
            return Some(s[0].1);
        }
        if i == s.len() {
            return Some(s[s.len() - 1].1);
        }
        let (a, b) = (s[i - 1], s[i]);
        Some(a.1 + (u - a.0) / (b.0 - a.0) * (b.1 - a.1))
    }
}

/// Result of [`fu_error`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuError {
    pub error: f64,
    pub points_used: usize,
    /// Grid points dropped because one curve does not reach them.
    pub points_dropped: usize,
}

/// Sum over grid points of `|F(u) − F_ref(u)|`, with the grid truncated to
/// the common support of both curves.
pub fn fu_error(curve: &FuCurve, reference: &FuCurve, grid: &[f64]) -> Result<FuError> {
    let mut error = 0.0;
    let mut used = 0;
    for &u in grid {
        if let (Some(a), Some(b)) = (curve.interpolate(u), reference.interpolate(u)) {
            error += (a - b).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::InvalidInput("F-u curves share no grid point".into()));
    }
    if used < grid.len() {
        log::info!("F-u error grid truncated from {} to {} points", grid.len(), used);
    }
    Ok(FuError {
        error,
        points_used: used,
        points_dropped: grid.len() - used,
    })
}

/// Multiples of `du0` up to `u_target`.
pub fn reference_grid(du0: f64, u_target: f64) -> Vec<f64> {
    let n = (u_target / du0 * (1.0 + 1e-9)).floor() as usize;
    (1..=n).map(|k| k as f64 * du0).collect()
}

fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:e}")
    }
}

impl RunMetrics {
    pub fn fu_curve(&self) -> FuCurve {
        FuCurve {
            samples: self.rows.iter().filter(|r| r.accepted).map(|r| (r.u, r.force)).collect(),
        }
    }

    pub fn hf_evals(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.hf_evals_cum)
    }

    pub fn nr_iters(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.nr_iters_cum)
    }

    pub fn accepted(&self) -> impl Iterator<Item = &StepRecord> {
        self.rows.iter().filter(|r| r.accepted)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.step,
                fmt_f64(r.u),
                fmt_f64(r.force),
                fmt_f64(r.du),
                u8::from(r.accepted),
                r.stagger_iters,
                r.nr_iters_cum,
                r.hf_evals_cum,
                r.n_gp,
                r.n_mixed,
                r.n_hf,
                r.failure.name()
            );
        }
        if !self.solved {
            out.push_str("# status: unsolved\n");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == METRICS_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `{METRICS_HEADER}`"),
                })
            }
        }
        let mut m = RunMetrics::default();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if c.trim() == "status: unsolved" {
                    m.solved = false;
                }
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 12 {
                return Err(err(format!("expected 12 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|_| err(format!("bad integer `{s}`")));
            let num = |s: &str| s.parse::<f64>().map_err(|_| err(format!("bad number `{s}`")));
            let accepted = match f[4] {
                "1" => true,
                "0" => false,
                s => return Err(err(format!("bad flag `{s}`"))),
            };
            m.rows.push(StepRecord {
                step: int(f[0])? as usize,
                u: num(f[1])?,
                force: num(f[2])?,
                du: num(f[3])?,
                accepted,
                stagger_iters: int(f[5])? as usize,
                nr_iters_cum: int(f[6])?,
                hf_evals_cum: int(f[7])?,
                n_gp: int(f[8])? as usize,
                n_mixed: int(f[9])? as usize,
                n_hf: int(f[10])? as usize,
                failure: FailureKind::parse(f[11]).ok_or_else(|| err(format!("bad failure kind `{}`", f[11])))?,
            });
        }
        Ok(m)
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
