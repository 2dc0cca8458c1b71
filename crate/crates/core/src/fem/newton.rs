use super::{ConstitutiveResponse, MechanicalModel, ProfileLu, Voigt};
use crate::error::{Error, Result};

/// Prescribed displacement values on a set of dofs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirichletBc {
    pub dofs: Vec<usize>,
    pub values: Vec<f64>,
}

impl DirichletBc {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds (or overrides) prescribed values.
    pub fn prescribe(&mut self, dofs: &[usize], value: f64) {
        for &d in dofs {
            match self.dofs.iter().position(|&x| x == d) {
                Some(i) => self.values[i] = value,
                None => {
                    self.dofs.push(d);
                    self.values.push(value);
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn apply(&self, u: &mut [f64]) {
        for (&d, &v) in self.dofs.iter().zip(&self.values) {
            u[d] = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            rtol: 1e-8,
            atol: 1e-10,
            max_iterations: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub converged: bool,
    /// Number of linear solves performed.
    pub iterations: usize,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub u: Vec<f64>,
    pub report: NewtonReport,
    /// Internal forces at the returned iterate; the entries on prescribed dofs
    /// are the support reactions.
    pub internal_force: Vec<f64>,
    /// Free-dof residual norm before each linear solve and at the end.
    pub history: Vec<f64>,
}

/// Newton-Raphson for `f_int(u) = 0` on the free dofs with prescribed values
/// eliminated. Converged when the free residual drops below
/// `max(atol, rtol·r_ref)`, where `r_ref` is the larger of the first residual
/// and the current reaction norm. A non-finite residual is reported as
/// non-convergence; a singular tangent is an error.
pub fn solve_newton(
    model: &MechanicalModel,
    bc: &DirichletBc,
    u0: &[f64],
    constitutive: &mut dyn FnMut(usize, &Voigt) -> Result<ConstitutiveResponse>,
    options: &NewtonOptions,
) -> Result<NewtonSolution> {
    if bc.is_empty() {
        return Err(Error::InvalidInput("Newton solve needs at least one prescribed dof".into()));
    }
    let n = model.n_dofs();
    if u0.len() != n {
        return Err(Error::InvalidInput(format!("initial guess has {} entries, expected {n}", u0.len())));
    }
    let mut fixed = vec![false; n];
    for &d in &bc.dofs {
        fixed[d] = true;
    }
    let free: Vec<usize> = model.dof_order().iter().copied().filter(|&d| !fixed[d]).collect();
    let mut u = u0.to_vec();
    let mut k = model.empty_matrix();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut r0 = None;
    // Predictor: the prescribed increment enters through the tangent at `u0`
    // instead of moving only the boundary nodes.
    let mut jump = vec![0.0; n];
    for (&d, &v) in bc.dofs.iter().zip(&bc.values) {
        jump[d] = v - u0[d];
    }
    if options.max_iterations > 0 && jump.iter().any(|&x| x != 0.0) {
        let f = model.assemble(&u, constitutive, Some(&mut k))?;
        let kj = k.mul_vec(&jump);
        let mut rhs: Vec<f64> = free.iter().map(|&d| -(f[d] + kj[d])).collect();
        let norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm.is_finite() {
            history.push(norm);
            r0 = Some(norm);
            let lu = ProfileLu::factor(&k, &free)?;
            lu.solve_in_place(&mut rhs);
            for (&d, du) in free.iter().zip(&rhs) {
                u[d] += du;
            }
            iterations += 1;
        }
    }
    bc.apply(&mut u);
    loop {
        let with_tangent = iterations < options.max_iterations;
        let f = model.assemble(&u, constitutive, if with_tangent { Some(&mut k) } else { None })?;
        let norm = free.iter().map(|&d| f[d] * f[d]).sum::<f64>().sqrt();
        history.push(norm);
        let reaction = bc.dofs.iter().map(|&d| f[d] * f[d]).sum::<f64>().sqrt();
        let r0 = *r0.get_or_insert(norm);
        let report = |converged| NewtonReport {
            converged,
            iterations,
            residual_norm: norm,
        };
        if !norm.is_finite() {
            return Ok(NewtonSolution { u, report: report(false), internal_force: f, history });
        }
        if norm <= options.atol.max(options.rtol * r0.max(reaction)) {
            return Ok(NewtonSolution { u, report: report(true), internal_force: f, history });
        }
        if !with_tangent {
            return Ok(NewtonSolution { u, report: report(false), internal_force: f, history });
        }
        let lu = ProfileLu::factor(&k, &free)?;
        let mut rhs: Vec<f64> = free.iter().map(|&d| -f[d]).collect();
        lu.solve_in_place(&mut rhs);
        for (&d, du) in free.iter().zip(&rhs) {
            u[d] += du;
        }
        iterations += 1;
    }
}
