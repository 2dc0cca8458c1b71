//! Per-integration-point blending of the surrogate and the HF material.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::fem::{ConstitutiveResponse, Tangent, Voigt};
use crate::gp::SurrogateSet;
use crate::material::{HfMaterial, PlasticState};

/// A constitutive model that can also report its own uncertainty.
pub trait Surrogate: Send + Sync {
    /// Stress and tangent at integration point `ip`.
    fn response(&self, ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse>;

    /// Driving force `U` for every entry of `strains` (index = IP).
    fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64>;

    /// Called with the converged strains of every IP when a step is accepted.
    fn commit(&mut self, _strains: &[Voigt]) -> Result<()> {
        Ok(())
    }
}

impl Surrogate for SurrogateSet {
    fn response(&self, _ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse> {
        Ok(SurrogateSet::response(self, eps))
    }

    fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64> {
        SurrogateSet::uncertainties(self, strains)
    }
}

/// Wraps the HF material as a "perfect" surrogate with `U ≡ 0`. It keeps its
/// own committed plastic states and its own evaluation counter.
#[derive(Debug, Clone)]
pub struct HfSurrogate {
    material: HfMaterial,
    states: Vec<PlasticState>,
}

impl HfSurrogate {
    pub fn new(material: &HfMaterial, n_ips: usize) -> Self {
        HfSurrogate {
            material: material.clone(),
            states: vec![PlasticState::default(); n_ips],
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.material.evaluations()
    }
}

impl Surrogate for HfSurrogate {
    fn response(&self, ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse> {
        Ok(self.material.update_stress(eps, &self.states[ip])?.0)
    }

    fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64> {
        vec![0.0; strains.len()]
    }

    fn commit(&mut self, strains: &[Voigt]) -> Result<()> {
        for (s, eps) in self.states.iter_mut().zip(strains) {
            *s = self.material.update_stress(eps, s)?.1;
        }
        Ok(())
    }
}

/// Linear elasticity with zero uncertainty.
#[derive(Debug, Clone, Copy)]
pub struct ElasticSurrogate {
    pub d: Tangent,
}

impl Surrogate for ElasticSurrogate {
    fn response(&self, _ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse> {
        Ok(ConstitutiveResponse {
            stress: self.d * eps,
            tangent: self.d,
        })
    }

    fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64> {
        vec![0.0; strains.len()]
    }
}

/// Adversarial surrogate: half the elastic stiffness without Poisson
/// coupling (so the displacement field differs from the HF one), and an uncertainty
/// that alternates between `high` and `low` on every batch request.
#[derive(Debug)]
pub struct TogglingSurrogate {
    pub d: Tangent,
    pub high: f64,
    pub low: f64,
    calls: AtomicUsize,
}

impl TogglingSurrogate {
    pub fn new(d_e: Tangent, high: f64, low: f64) -> Self {
        let mut d = d_e * 0.5;
        d[(0, 1)] = 0.0;
        d[(1, 0)] = 0.0;
        TogglingSurrogate {
            d,
            high,
            low,
            calls: AtomicUsize::new(0),
        }
    }
}

impl Surrogate for TogglingSurrogate {
    fn response(&self, _ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse> {
        Ok(ConstitutiveResponse {
            stress: self.d * eps,
            tangent: self.d,
        })
    }

    fn uncertainties(&self, strains: &[Voigt]) -> Vec<f64> {
        let k = self.calls.fetch_add(1, Ordering::Relaxed);
        vec![if k % 2 == 0 { self.high } else { self.low }; strains.len()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixMode {
    PhaseField,
    LocalLinear,
    LocalStep,
    /// HF everywhere (`φ ≡ 1`).
    Full,
    /// Surrogate everywhere (`φ ≡ 0`).
    Surrogate,
}

impl MixMode {
    pub fn name(self) -> &'static str {
        match self {
            MixMode::PhaseField => "phase-field",
            MixMode::LocalLinear => "local-linear",
            MixMode::LocalStep => "local-step",
            MixMode::Full => "full",
            MixMode::Surrogate => "surrogate",
        }
    }
}

impl std::str::FromStr for MixMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "phase-field" | "phasefield" | "hybrid" => MixMode::PhaseField,
            "local-linear" | "linear" => MixMode::LocalLinear,
            "local-step" | "step" => MixMode::LocalStep,
            "full" | "hf" => MixMode::Full,
            "surrogate" | "gp" => MixMode::Surrogate,
            other => return Err(Error::Config(format!("unknown mode `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureConfig {
    pub tau: f64,
    pub mode: MixMode,
    pub b: f64,
}

impl MixtureConfig {
    pub fn new(tau: f64, mode: MixMode, b: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 0.5) {
            return Err(Error::Config(format!("tau must lie in (0, 0.5), got {tau}")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("b must be finite and non-negative, got {b}")));
        }
        Ok(MixtureConfig { tau, mode, b })
    }
}

impl Default for MixtureConfig {
    fn default() -> Self {
        MixtureConfig {
            tau: 0.01,
            mode: MixMode::PhaseField,
            b: 1.0,
        }
    }
}

/// PDE-free mixing weight. Only the two local modes are meaningful here;
/// `Full` and `Surrogate` return their constant weights.
pub fn local_phi(u: f64, b: f64, mode: MixMode) -> f64 {
    match mode {
        MixMode::LocalStep => {
            if u >= b {
                1.0
            } else {
                0.0
            }
        }
        MixMode::Full => 1.0,
        MixMode::Surrogate => 0.0,
        MixMode::LocalLinear | MixMode::PhaseField => (u - b).clamp(0.0, 1.0),
    }
}

/// Counts `(surrogate only, mixed, HF only)`; `φ = τ` and `φ = 1 − τ` are mixed.
pub fn phase_populations(phi: &[f64], tau: f64) -> (usize, usize, usize) {
    phi.iter().fold((0, 0, 0), |(g, m, h), &p| {
        if p < tau {
            (g + 1, m, h)
        } else if p > 1.0 - tau {
            (g, m, h + 1)
        } else {
            (g, m + 1, h)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpRecord {
    pub phi: f64,
    pub uncertainty: f64,
    /// Valid for the first `traced_through` committed strains.
    pub plastic: PlasticState,
    pub traced_through: usize,
    pub strain_history: Vec<Voigt>,
}

impl Default for IpRecord {
    fn default() -> Self {
        IpRecord {
            phi: 0.0,
            uncertainty: 0.0,
            plastic: PlasticState::default(),
            traced_through: 0,
            strain_history: Vec::new(),
        }
    }
}

/// The mixed constitutive model over all integration points.
pub struct Mixture {
    hf: HfMaterial,
    surrogate: Box<dyn Surrogate>,
    config: MixtureConfig,
    records: Vec<IpRecord>,
    tentative: Vec<Option<(Voigt, PlasticState)>>,
    last_stress: Vec<Voigt>,
    committed_stress: Vec<Voigt>,
    steps: usize,
    hf_calls: u64,
}

impl std::fmt::Debug for Mixture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mixture")
            .field("config", &self.config)
            .field("n_ips", &self.records.len())
            .field("steps", &self.steps)
            .field("hf_calls", &self.hf_calls)
            .finish()
    }
}

impl Mixture {
    pub fn new(hf: HfMaterial, surrogate: Box<dyn Surrogate>, config: MixtureConfig, n_ips: usize) -> Self {
        Mixture {
            hf,
            surrogate,
            config,
            records: vec![IpRecord::default(); n_ips],
            tentative: vec![None; n_ips],
            last_stress: vec![Voigt::zeros(); n_ips],
            committed_stress: vec![Voigt::zeros(); n_ips],
            steps: 0,
            hf_calls: 0,
        }
    }

    pub fn config(&self) -> &MixtureConfig {
        &self.config
    }

    pub fn hf(&self) -> &HfMaterial {
        &self.hf
    }

    pub fn surrogate(&self) -> &dyn Surrogate {
        self.surrogate.as_ref()
    }

    pub fn records(&self) -> &[IpRecord] {
        &self.records
    }

    pub fn n_ips(&self) -> usize {
        self.records.len()
    }

    /// Number of committed steps.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// HF stress updates requested by this mixture, retracing included.
    pub fn hf_calls(&self) -> u64 {
        self.hf_calls
    }

    /// Stresses at the last committed step.
    pub fn committed_stress(&self) -> &[Voigt] {
        &self.committed_stress
    }

    pub fn phi(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }

    pub fn set_phi(&mut self, phi: &[f64]) -> Result<()> {
        if phi.len() != self.records.len() {
            return Err(Error::InvalidInput(format!("expected {} weights, got {}", self.records.len(), phi.len())));
        }
        for (r, &p) in self.records.iter_mut().zip(phi) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("mixing weight {p} outside [0, 1]")));
            }
            r.phi = p;
        }
        Ok(())
    }

    /// Recomputes `U` at every IP in one batch.
    pub fn update_uncertainties(&mut self, strains: &[Voigt]) -> Vec<f64> {
        let u = self.surrogate.uncertainties(strains);
        for (r, &v) in self.records.iter_mut().zip(&u) {
            r.uncertainty = v;
        }
        u
    }

    fn hf_update(&mut self, eps: &Voigt, state: &PlasticState) -> Result<(ConstitutiveResponse, PlasticState)> {
        self.hf_calls += 1;
        self.hf.update_stress(eps, state)
    }

    /// Brings the plastic state of `ip` up to the last committed step.
    fn retrace(&mut self, ip: usize) -> Result<()> {
        let rec = &self.records[ip];
        let (from, to) = (rec.traced_through, rec.strain_history.len());
        let mut state = rec.plastic;
        for s in from..to {
            let eps = self.records[ip].strain_history[s];
            state = self
                .hf_update(&eps, &state)
                .map_err(|e| Error::Retrace {
                    step: s + 1,
                    source: Box::new(e),
                })?
                .1;
        }
        let rec = &mut self.records[ip];
        rec.plastic = state;
        rec.traced_through = to;
        Ok(())
    }

    /// Mixed response at `ip` for the current step with `φ` frozen.
    pub fn evaluate(&mut self, ip: usize, eps: &Voigt) -> Result<ConstitutiveResponse> {
        let phi = self.records[ip].phi;
        let tau = self.config.tau;
        let resp = if phi < tau {
            self.surrogate.response(ip, eps)?
        } else {
            self.retrace(ip)?;
            let base = self.records[ip].plastic;
            let (hf, state) = self.hf_update(eps, &base)?;
            self.tentative[ip] = Some((*eps, state));
            if phi > 1.0 - tau {
                hf
            } else {
                let gp = self.surrogate.response(ip, eps)?;
                ConstitutiveResponse::blend(phi, &hf, &gp)
            }
        };
        self.last_stress[ip] = resp.stress;
        Ok(resp)
    }

    /// Drops tentative plastic states after a rejected attempt.
    pub fn rollback(&mut self) {
        self.tentative.iter_mut().for_each(|t| *t = None);
    }

    /// Rollback that also resets the weights and uncertainties.
    pub fn restore(&mut self, phi: &[f64], uncertainty: &[f64]) {
        self.rollback();
        for ((r, &p), &u) in self.records.iter_mut().zip(phi).zip(uncertainty) {
            r.phi = p;
            r.uncertainty = u;
        }
    }

    /// Accepts step `step` (1-based) with converged strains.
    pub fn commit(&mut self, strains: &[Voigt], step: usize) -> Result<()> {
        if step != self.steps + 1 {
            return Err(Error::Commit(format!(
                "step {step} committed after step {}; each step commits exactly once",
                self.steps
            )));
        }
        if strains.len() != self.records.len() {
            return Err(Error::Commit(format!("expected {} strains, got {}", self.records.len(), strains.len())));
        }
        let tau = self.config.tau;
        let mut next = Vec::with_capacity(strains.len());
        for (ip, eps) in strains.iter().enumerate() {
            let rec = &self.records[ip];
            if rec.phi < tau {
                next.push(None);
                continue;
            }
            let state = match self.tentative[ip] {
                Some((e, s)) if e == *eps && rec.traced_through == rec.strain_history.len() => s,
                _ => {
                    self.retrace(ip)?;
                    let base = self.records[ip].plastic;
                    self.hf_update(eps, &base)?.1
                }
            };
            next.push(Some(state));
        }
        self.surrogate.commit(strains)?;
        for ((rec, eps), state) in self.records.iter_mut().zip(strains).zip(next) {
            rec.strain_history.push(*eps);
            if let Some(s) = state {
                rec.plastic = s;
                rec.traced_through = rec.strain_history.len();
            }
        }
        self.committed_stress.copy_from_slice(&self.last_stress);
        self.steps = step;
        self.rollback();
        Ok(())
    }
}
