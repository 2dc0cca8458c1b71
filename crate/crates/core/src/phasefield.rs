//! Bound-constrained phase field on linear triangles.
//!
//! Stationarity of
//! `E(φ) = ½ε²∫|∇φ|² + ω∫W(φ) − ∫(U − b)φ`, with `W(φ) = ½φ²(1 − φ)²`,
//! subject to `0 ≤ φ ≤ 1`. The gradient term uses exact integration; the
//! double well and the driving terms use the element centroid.

use crate::error::{Error, Result};
use crate::fem::{barycentric_gradients, reverse_cuthill_mckee, CsrMatrix, ProfileLu, IPS_PER_ELEMENT};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFieldParams {
    pub eps: f64,
    pub omega: f64,
    pub b: f64,
}

impl PhaseFieldParams {
    pub fn new(eps: f64, omega: f64, b: f64) -> Result<Self> {
        if !(eps > 0.0 && omega >= 0.0 && b >= 0.0) || !(eps.is_finite() && omega.is_finite() && b.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "phase-field parameters need eps > 0, omega >= 0, b >= 0 (got {eps}, {omega}, {b})"
            )));
        }
        Ok(PhaseFieldParams { eps, omega, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFieldOptions {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for PhaseFieldOptions {
    fn default() -> Self {
        PhaseFieldOptions {
            tol: 1e-8,
            max_iterations: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseFieldSolution {
    pub phi: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Infinity norm of the projected residual.
    pub residual: f64,
}

/// Per-element driving force: the largest value over the element's
/// mechanical integration points.
pub fn project_uncertainty(ip_values: &[f64]) -> Vec<f64> {
    ip_values
        .chunks(IPS_PER_ELEMENT)
        .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

fn double_well_slope(p: f64) -> f64 {
    p * (1.0 - p) * (1.0 - 2.0 * p)
}

fn double_well_curvature(p: f64) -> f64 {
    1.0 - 6.0 * p + 6.0 * p * p
}

fn double_well(p: f64) -> f64 {
    0.5 * p * p * (1.0 - p) * (1.0 - p)
}

/// Assembled geometry of the phase-field problem on the vertex set of a mesh.
#[derive(Debug, Clone)]
pub struct PhaseFieldProblem {
    t3: Vec<[usize; 3]>,
    areas: Vec<f64>,
    stiffness: Vec<[[f64; 3]; 3]>,
    mass: Vec<f64>,
    pattern: CsrMatrix,
    positions: Vec<[[usize; 3]; 3]>,
    order: Vec<usize>,
}

impl PhaseFieldProblem {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.n_vertices();
        let t3 = mesh.t3_elements().to_vec();
        let mut areas = Vec::with_capacity(t3.len());
        let mut stiffness = Vec::with_capacity(t3.len());
        let mut mass = vec![0.0; n];
        for t in &t3 {
            let v = [mesh.nodes()[t[0]], mesh.nodes()[t[1]], mesh.nodes()[t[2]]];
            let (g, area) = barycentric_gradients(v);
            let mut ke = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    ke[a][b] = area * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                }
                mass[t[a]] += area / 3.0;
            }
            areas.push(area);
            stiffness.push(ke);
        }
        let pattern = CsrMatrix::from_groups(n, t3.iter().map(|t| &t[..]));
        let positions = t3
            .iter()
            .map(|t| {
                let mut p = [[0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        p[a][b] = pattern.position(t[a], t[b]).expect("element in pattern");
                    }
                }
                p
            })
            .collect();
        let order = reverse_cuthill_mckee(&pattern.adjacency());
        PhaseFieldProblem {
            t3,
            areas,
            stiffness,
            mass,
            pattern,
            positions,
            order,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.mass.len()
    }

    pub fn n_elements(&self) -> usize {
        self.t3.len()
    }

    pub fn lumped_mass(&self) -> &[f64] {
        &self.mass
    }

    fn centroid_value(&self, phi: &[f64], e: usize) -> f64 {
        let t = &self.t3[e];
        (phi[t[0]] + phi[t[1]] + phi[t[2]]) / 3.0
    }

    fn check(&self, phi: &[f64], drive: &[f64]) -> Result<()> {
        if phi.len() != self.n_nodes() || drive.len() != self.n_elements() {
            return Err(Error::InvalidInput(format!(
                "phase field expects {} nodal and {} element values, got {} and {}",
                self.n_nodes(),
                self.n_elements(),
                phi.len(),
                drive.len()
            )));
        }
        Ok(())
    }

    /// Weak-form residual for every nodal hat function.
    pub fn residual_vector(&self, phi: &[f64], drive: &[f64], p: &PhaseFieldParams) -> Result<Vec<f64>> {
        self.check(phi, drive)?;
        let eps2 = p.eps * p.eps;
        let mut r = vec![0.0; self.n_nodes()];
        for (e, t) in self.t3.iter().enumerate() {
            let a3 = self.areas[e] / 3.0;
            let local = (p.b - drive[e] + p.omega * double_well_slope(self.centroid_value(phi, e))) * a3;
            let ke = &self.stiffness[e];
            for a in 0..3 {
                let grad = ke[a][0] * phi[t[0]] + ke[a][1] * phi[t[1]] + ke[a][2] * phi[t[2]];
                r[t[a]] += local + eps2 * grad;
            }
        }
        Ok(r)
    }

    /// Residual functional against an arbitrary nodal test direction `v`.
    pub fn residual(&self, phi: &[f64], drive: &[f64], p: &PhaseFieldParams, v: &[f64]) -> Result<f64> {
        let r = self.residual_vector(phi, drive, p)?;
        if v.len() != r.len() {
            return Err(Error::InvalidInput("test direction has the wrong length".into()));
        }
        Ok(r.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    pub fn energy(&self, phi: &[f64], drive: &[f64], p: &PhaseFieldParams) -> Result<f64> {
        self.check(phi, drive)?;
        let eps2 = p.eps * p.eps;
        let mut en = 0.0;
        for (e, t) in self.t3.iter().enumerate() {
            let ke = &self.stiffness[e];
            let pl = [phi[t[0]], phi[t[1]], phi[t[2]]];
            let mut quad = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    quad += pl[a] * ke[a][b] * pl[b];
                }
            }
            let c = (pl[0] + pl[1] + pl[2]) / 3.0;
            en += 0.5 * eps2 * quad + self.areas[e] * (p.omega * double_well(c) - (drive[e] - p.b) * c);
        }
        Ok(en)
    }

    /// Jacobian of [`Self::residual_vector`]. With `convexify` the negative
    /// part of the double-well curvature is dropped.
    pub fn jacobian(&self, phi: &[f64], p: &PhaseFieldParams, convexify: bool) -> CsrMatrix {
        let eps2 = p.eps * p.eps;
        let mut k = self.pattern.clone();
        k.clear();
        let vals = k.values_mut();
        for (e, pos) in self.positions.iter().enumerate() {
            let mut curv = double_well_curvature(self.centroid_value(phi, e));
            if convexify {
                curv = curv.max(0.0);
            }
            let w = p.omega * curv * self.areas[e] / 9.0;
            for a in 0..3 {
                for b in 0..3 {
                    vals[pos[a][b]] += eps2 * self.stiffness[e][a][b] + w;
                }
            }
        }
        k
    }

    /// Residual scale used for the stopping test.
    fn scale(&self, drive: &[f64], p: &PhaseFieldParams) -> f64 {
        let umax = drive.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let mmax = self.mass.iter().copied().fold(0.0, f64::max);
        mmax * (1.0 + umax + p.b + p.omega)
    }

    /// Projected Newton with an active set and an energy line search.
    pub fn solve(
        &self,
        initial: &[f64],
        drive: &[f64],
        p: &PhaseFieldParams,
        options: &PhaseFieldOptions,
    ) -> Result<PhaseFieldSolution> {
        self.check(initial, drive)?;
        if drive.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidInput("non-finite driving force".into()));
        }
        let n = self.n_nodes();
        let scale = self.scale(drive, p);
        let tol = options.tol * scale;
        let slack = 1e-14 * scale * self.mass.iter().sum::<f64>() / self.mass.iter().copied().fold(0.0, f64::max);
        let mut phi: Vec<f64> = initial.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        let mut energy = self.energy(&phi, drive, p)?;
        let mut iterations = 0;
        loop {
            let r = self.residual_vector(&phi, drive, p)?;
            let active: Vec<bool> = (0..n)
                .map(|i| (phi[i] <= 0.0 && r[i] > 0.0) || (phi[i] >= 1.0 && r[i] < 0.0))
                .collect();
            let pg = (0..n)
                .filter(|&i| !active[i])
                .map(|i| r[i].abs())
                .fold(0.0, f64::max);
            if pg <= tol {
                return Ok(PhaseFieldSolution {
                    phi,
                    converged: true,
                    iterations,
                    residual: pg,
                });
            }
            if iterations >= options.max_iterations {
                return Ok(PhaseFieldSolution {
                    phi,
                    converged: false,
                    iterations,
                    residual: pg,
                });
            }
            iterations += 1;
            let free: Vec<usize> = self.order.iter().copied().filter(|&i| !active[i]).collect();
            let mut step = None;
            for convexify in [false, true] {
                let j = self.jacobian(&phi, p, convexify);
                let j = if convexify { self.regularize(j, p) } else { j };
                if let Ok(lu) = ProfileLu::factor(&j, &free) {
                    if lu.positive_pivots() {
                        let mut rhs: Vec<f64> = free.iter().map(|&i| -r[i]).collect();
                        lu.solve_in_place(&mut rhs);
                        let mut d = vec![0.0; n];
                        for (&i, v) in free.iter().zip(rhs) {
                            d[i] = v;
                        }
                        step = Some(d);
                        break;
                    }
                }
            }
            let newton = step.unwrap_or_else(|| {
                (0..n)
                    .map(|i| if active[i] { 0.0 } else { -r[i] / self.mass[i] })
                    .collect()
            });
            let gradient: Vec<f64> = (0..n)
                .map(|i| if active[i] { 0.0 } else { -r[i] / self.mass[i] })
                .collect();
            let mut accepted = false;
            for d in [&newton, &gradient] {
                if let Some((trial, e)) = self.line_search(&phi, d, &r, energy, drive, p, slack)? {
                    phi = trial;
                    energy = e;
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                return Ok(PhaseFieldSolution {
                    phi,
                    converged: false,
                    iterations,
                    residual: pg,
                });
            }
        }
    }

    fn regularize(&self, mut j: CsrMatrix, p: &PhaseFieldParams) -> CsrMatrix {
        // a small mass shift removes the constant null mode of the gradient term
        let delta = 1e-8 * (p.omega + p.eps * p.eps + 1.0);
        for (i, m) in self.mass.iter().enumerate() {
            let pos = j.position(i, i).expect("diagonal in pattern");
            j.values_mut()[pos] += delta * m;
        }
        j
    }

    #[allow(clippy::too_many_arguments)]
    fn line_search(
        &self,
        phi: &[f64],
        d: &[f64],
        r: &[f64],
        energy: f64,
        drive: &[f64],
        p: &PhaseFieldParams,
        slack: f64,
    ) -> Result<Option<(Vec<f64>, f64)>> {
        let mut t = 1.0;
        for _ in 0..40 {
            let trial: Vec<f64> = phi.iter().zip(d).map(|(a, b)| (a + t * b).clamp(0.0, 1.0)).collect();
            let decrease: f64 = trial.iter().zip(phi).zip(r).map(|((a, b), g)| g * (a - b)).sum();
            let e = self.energy(&trial, drive, p)?;
            if decrease < 0.0 && e <= energy + 1e-4 * decrease + slack {
                return Ok(Some((trial, e)));
            }
            t *= 0.5;
        }
        Ok(None)
    }

    /// Linear interpolation of nodal `phi` at barycentric point `bary` of
    /// `element`, clamped to `[0, 1]`.
    pub fn phi_at(&self, phi: &[f64], element: usize, bary: [f64; 3]) -> f64 {
        let t = &self.t3[element];
        (bary[0] * phi[t[0]] + bary[1] * phi[t[1]] + bary[2] * phi[t[2]]).clamp(0.0, 1.0)
    }
}
