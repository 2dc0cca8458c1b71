use std::fmt::Write as _;
use std::path::Path;

use super::{optimize_hyperparameters, GpModel, Input, Kernel, OptimizationReport, OptimizeOptions, TrainingDataset};
use crate::error::{Error, Result};
use crate::fem::{ConstitutiveResponse, Tangent, Voigt};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    pub optimize: OptimizeOptions,
    /// Skip optimization and use these kernels for `(xx, yy, xy)`.
    pub kernels: Option<[Kernel; 3]>,
}

/// Linear elasticity plus one GP correction per stress component.
#[derive(Debug, Clone)]
pub struct SurrogateSet {
    d_e: Tangent,
    gps: [GpModel; 3],
}

const FORMAT_LINE: &str = "phasemix-surrogate 1";

fn input(e: &Voigt) -> Input {
    [e[0], e[1], e[2]]
}

impl SurrogateSet {
    /// Fits corrections `σ − D_e·ε` for each component; hyperparameters are
    /// optimized per component unless given.
    pub fn train(dataset: &TrainingDataset, d_e: Tangent, options: &TrainOptions) -> Result<(Self, Vec<OptimizationReport>)> {
        if dataset.is_empty() {
            return Err(Error::InvalidInput("empty training dataset".into()));
        }
        let x: Vec<Input> = dataset.samples.iter().map(|s| input(&s.strain)).collect();
        let targets: Vec<Vec<f64>> = (0..3)
            .map(|c| {
                dataset
                    .samples
                    .iter()
                    .map(|s| s.stress[c] - (d_e * s.strain)[c])
                    .collect()
            })
            .collect();
        let mut reports = Vec::new();
        let kernels = match options.kernels {
            Some(k) => k,
            None => {
                let mut k = [Kernel::new(1.0, 1.0, 1.0)?; 3];
                for (c, y) in targets.iter().enumerate() {
                    let opts = OptimizeOptions {
                        seed: options.optimize.seed.wrapping_add(c as u64),
                        ..options.optimize
                    };
                    let rep = optimize_hyperparameters(&x, y, &opts)?;
                    log::info!(
                        "component {c}: sigma_f {:.4e}, length {:.4e}, sigma_n {:.4e}, lml {:.6e}",
                        rep.kernel.sigma_f,
                        rep.kernel.length,
                        rep.kernel.sigma_n,
                        rep.lml
                    );
                    k[c] = rep.kernel;
                    reports.push(rep);
                }
                k
            }
        };
        let set = Self::from_parts(d_e, x, targets, kernels)?;
        Ok((set, reports))
    }

    fn from_parts(d_e: Tangent, x: Vec<Input>, targets: Vec<Vec<f64>>, kernels: [Kernel; 3]) -> Result<Self> {
        let mut t = targets.into_iter();
        let mut fit = |k: Kernel| GpModel::fit(x.clone(), t.next().expect("three components"), k);
        let gps = [fit(kernels[0])?, fit(kernels[1])?, fit(kernels[2])?];
        Ok(SurrogateSet { d_e, gps })
    }

    pub fn elastic_matrix(&self) -> &Tangent {
        &self.d_e
    }

    pub fn gp(&self, component: usize) -> &GpModel {
        &self.gps[component]
    }

    pub fn kernels(&self) -> [Kernel; 3] {
        [*self.gps[0].kernel(), *self.gps[1].kernel(), *self.gps[2].kernel()]
    }

    pub fn n_points(&self) -> usize {
        self.gps[0].len()
    }

    /// Stress `D_e·ε + μ(ε)` with tangent `D_e + ∂μ/∂ε`.
    pub fn response(&self, eps: &Voigt) -> ConstitutiveResponse {
        let x = input(eps);
        let mut stress = self.d_e * eps;
        let mut tangent = self.d_e;
        for (c, gp) in self.gps.iter().enumerate() {
            let (m, g) = gp.mean_and_gradient(&x);
            stress[c] += m;
            for j in 0..3 {
                tangent[(c, j)] += g[j];
            }
        }
        ConstitutiveResponse { stress, tangent }
    }

    /// `U = max_c sqrt(var_c)`.
    pub fn uncertainty(&self, eps: &Voigt) -> f64 {
        let x = input(eps);
        self.gps
            .iter()
            .map(|gp| gp.predict(&x).1.sqrt())
            .fold(0.0, f64::max)
    }

    pub fn response_with_uncertainty(&self, eps: &Voigt) -> (ConstitutiveResponse, f64) {
        (self.response(eps), self.uncertainty(eps))
    }

    /// Batched [`Self::uncertainty`].
    pub fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64> {
        let x: Vec<Input> = strains.iter().map(input).collect();
        let mut u = vec![0.0f64; x.len()];
        for gp in &self.gps {
            for (ui, v) in u.iter_mut().zip(gp.variances(&x)) {
                *ui = ui.max(v.sqrt());
            }
        }
        u
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_LINE}\nelastic");
        for i in 0..3 {
            for j in 0..3 {
                let _ = write!(out, " {}", self.d_e[(i, j)]);
            }
        }
        out.push('\n');
        for (c, gp) in self.gps.iter().enumerate() {
            let k = gp.kernel();
            let _ = writeln!(out, "kernel {c} {} {} {}", k.sigma_f, k.length, k.sigma_n);
        }
        let _ = writeln!(out, "points {}", self.n_points());
        for (i, x) in self.gps[0].inputs().iter().enumerate() {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                x[0],
                x[1],
                x[2],
                self.gps[0].targets()[i],
                self.gps[1].targets()[i],
                self.gps[2].targets()[i]
            );
        }
        out
    }

    /// Parses a model file and refits the three GPs.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let (n, l) = next("format line")?;
        if l != FORMAT_LINE {
            return Err(Error::Parse {
                line: n,
                message: format!("expected `{FORMAT_LINE}`"),
            });
        }
        let nums = |n: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<f64>().map_err(|_| Error::Parse {
                        line: n,
                        message: format!("bad number `{t}`"),
                    })
                })
                .collect()
        };
        let (n, l) = next("elastic line")?;
        let d = l
            .strip_prefix("elastic")
            .map(|r| nums(n, r))
            .transpose()?
            .filter(|v| v.len() == 9)
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `elastic` with 9 entries".into(),
            })?;
        let d_e = Tangent::from_row_slice(&d);
        let mut kernels = Vec::new();
        for c in 0..3 {
            let (n, l) = next("kernel line")?;
            let v = l
                .strip_prefix(&format!("kernel {c}"))
                .map(|r| nums(n, r))
                .transpose()?
                .filter(|v| v.len() == 3)
                .ok_or_else(|| Error::Parse {
                    line: n,
                    message: format!("expected `kernel {c} sigma_f length sigma_n`"),
                })?;
            kernels.push(Kernel::new(v[0], v[1], v[2]).map_err(|e| Error::Parse {
                line: n,
                message: e.to_string(),
            })?);
        }
        let (n, l) = next("points line")?;
        let count: usize = l
            .strip_prefix("points")
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                line: n,
                message: "expected `points N`".into(),
            })?;
        let mut x = Vec::with_capacity(count);
        let mut y = vec![Vec::with_capacity(count); 3];
        for _ in 0..count {
            let (n, l) = next("training row")?;
            let v = nums(n, l)?;
            if v.len() != 6 {
                return Err(Error::Parse {
                    line: n,
                    message: format!("expected 6 values, found {}", v.len()),
                });
            }
            x.push([v[0], v[1], v[2]]);
            for c in 0..3 {
                y[c].push(v[3 + c]);
            }
        }
        if let Some((n, _)) = lines.next() {
            return Err(Error::Parse {
                line: n,
                message: "trailing content after training rows".into(),
            });
        }
        Self::from_parts(d_e, x, y, [kernels[0], kernels[1], kernels[2]])
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}
