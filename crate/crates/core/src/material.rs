//! Plane-stress von Mises elasto-plasticity with exponential isotropic
//! hardening.
//!
//! The plastic update is a 3D radial return nested inside a scalar Newton on
//! the out-of-plane strain `εzz`, which drives `σzz` to zero. Internally the
//! 3D quantities use Mandel 4-vectors `(xx, yy, zz, √2·xy)`.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{Matrix3, Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::fem::{ConstitutiveResponse, Tangent, Voigt};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticParams {
    pub e: f64,
    pub nu: f64,
}

impl ElasticParams {
    pub fn new(e: f64, nu: f64) -> Result<Self> {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidInput(format!("Young's modulus must be positive, got {e}")));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(Error::InvalidInput(format!("Poisson ratio must lie in [0, 0.5), got {nu}")));
        }
        Ok(ElasticParams { e, nu })
    }

    pub fn shear_modulus(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    pub fn bulk_modulus(&self) -> f64 {
        self.e / (3.0 * (1.0 - 2.0 * self.nu))
    }

    pub fn plane_stress_matrix(&self) -> Tangent {
        let d11 = self.e / (1.0 - self.nu * self.nu);
        Matrix3::new(
            d11,
            self.nu * d11,
            0.0,
            self.nu * d11,
            d11,
            0.0,
            0.0,
            0.0,
            self.shear_modulus(),
        )
    }
}

/// `σ_y(κ) = σ∞ − Δσ·exp(−κ/κ_ref)`, stored through the initial yield
/// stress `σ_0 = σ∞ − Δσ` so that `σ_y(0)` is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardeningLaw {
    pub sigma_0: f64,
    pub delta_sigma: f64,
    pub eps_ref: f64,
}

impl Default for HardeningLaw {
    fn default() -> Self {
        HardeningLaw {
            sigma_0: 31.20,
            delta_sigma: 33.60,
            eps_ref: 0.003407,
        }
    }
}

impl HardeningLaw {
    pub fn new(sigma_inf: f64, delta_sigma: f64, eps_ref: f64) -> Result<Self> {
        if !(eps_ref > 0.0 && delta_sigma >= 0.0 && sigma_inf - delta_sigma > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hardening law needs eps_ref > 0, delta_sigma >= 0 and positive initial yield \
                 (got {sigma_inf}, {delta_sigma}, {eps_ref})"
            )));
        }
        Ok(HardeningLaw {
            sigma_0: sigma_inf - delta_sigma,
            delta_sigma,
            eps_ref,
        })
    }

    /// Saturation stress `σ∞`.
    pub fn sigma_inf(&self) -> f64 {
        self.sigma_0 + self.delta_sigma
    }

    pub fn yield_stress(&self, eps_p_eq: f64) -> Result<f64> {
        if !(eps_p_eq >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "equivalent plastic strain must be non-negative, got {eps_p_eq}"
            )));
        }
        Ok(self.sigma_y(eps_p_eq))
    }

    fn sigma_y(&self, k: f64) -> f64 {
        self.sigma_0 + self.delta_sigma * -(-k / self.eps_ref).exp_m1()
    }

    /// `dσ_y/dκ`.
    pub fn modulus(&self, k: f64) -> f64 {
        self.delta_sigma / self.eps_ref * (-k / self.eps_ref).exp()
    }
}

/// Internal variables of one material point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlasticState {
    /// `(εp_xx, εp_yy, γp_xy, εp_zz)` with engineering plastic shear.
    pub eps_p: [f64; 4],
    pub eps_p_eq: f64,
}

impl PlasticState {
    pub fn plastic_trace(&self) -> f64 {
        self.eps_p[0] + self.eps_p[1] + self.eps_p[3]
    }

    fn mandel(&self) -> Vector4<f64> {
        Vector4::new(
            self.eps_p[0],
            self.eps_p[1],
            self.eps_p[3],
            self.eps_p[2] / std::f64::consts::SQRT_2,
        )
    }
}

/// Von Mises equivalent of a plane stress state.
pub fn von_mises(s: &Voigt) -> f64 {
    (s[0] * s[0] - s[0] * s[1] + s[1] * s[1] + 3.0 * s[2] * s[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TangentMode {
    /// Exact linearization of the return map.
    #[default]
    Consistent,
    /// Central finite differences of the stress update.
    FiniteDifference,
}

/// Full result of a stress update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HfUpdate {
    pub response: ConstitutiveResponse,
    pub state: PlasticState,
    /// Residual out-of-plane stress of the converged update.
    pub sigma_zz: f64,
    pub plastic: bool,
}

/// The high-fidelity material. Every stress update increments an internal
/// counter that callers can read back.
#[derive(Debug)]
pub struct HfMaterial {
    pub elastic: ElasticParams,
    pub hardening: HardeningLaw,
    pub tangent_mode: TangentMode,
    d_e: Tangent,
    evaluations: AtomicU64,
}

impl Clone for HfMaterial {
    /// Clones the parameters; the copy starts with a fresh counter.
    fn clone(&self) -> Self {
        HfMaterial::new(self.elastic, self.hardening)
            .with_tangent_mode(self.tangent_mode)
    }
}

const INNER_MAX_ITERS: usize = 50;
const OUTER_MAX_ITERS: usize = 50;

impl HfMaterial {
    pub fn new(elastic: ElasticParams, hardening: HardeningLaw) -> Self {
        HfMaterial {
            elastic,
            hardening,
            tangent_mode: TangentMode::Consistent,
            d_e: elastic.plane_stress_matrix(),
            evaluations: AtomicU64::new(0),
        }
    }

    /// Paper-scale polymer parameters: `E = 3130`, `ν = 0.37` and the default
    /// hardening law.
    pub fn reference() -> Self {
        HfMaterial::new(ElasticParams { e: 3130.0, nu: 0.37 }, HardeningLaw::default())
    }

    pub fn with_tangent_mode(mut self, mode: TangentMode) -> Self {
        self.tangent_mode = mode;
        self
    }

    pub fn elastic_matrix(&self) -> &Tangent {
        &self.d_e
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    pub fn update_stress(&self, eps: &Voigt, state: &PlasticState) -> Result<(ConstitutiveResponse, PlasticState)> {
        let u = self.update(eps, state)?;
        Ok((u.response, u.state))
    }

    /// Counted stress update with diagnostics.
    pub fn update(&self, eps: &Voigt, state: &PlasticState) -> Result<HfUpdate> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let mut out = self.return_map(eps, state)?;
        if self.tangent_mode == TangentMode::FiniteDifference {
            out.response.tangent = self.fd_tangent(eps, state, 1e-7)?;
        }
        Ok(out)
    }

    /// Central-difference tangent of the (uncounted) stress update.
    pub fn fd_tangent(&self, eps: &Voigt, state: &PlasticState, h: f64) -> Result<Tangent> {
        let mut d = Tangent::zeros();
        for j in 0..3 {
            let mut ep = *eps;
            let mut em = *eps;
            ep[j] += h;
            em[j] -= h;
            let sp = self.return_map(&ep, state)?.response.stress;
            let sm = self.return_map(&em, state)?.response.stress;
            d.set_column(j, &((sp - sm) / (2.0 * h)));
        }
        Ok(d)
    }

    /// Yield function of the plane-stress elastic trial.
    pub fn trial_yield_function(&self, eps: &Voigt, state: &PlasticState) -> f64 {
        let s = self.d_e * (eps - plane_part(state));
        von_mises(&s) - self.hardening.sigma_y(state.eps_p_eq)
    }

    fn return_map(&self, eps: &Voigt, state: &PlasticState) -> Result<HfUpdate> {
        if !(eps[0].is_finite() && eps[1].is_finite() && eps[2].is_finite()) {
            return Err(Error::InvalidInput("non-finite strain".into()));
        }
        let trial = self.d_e * (eps - plane_part(state));
        let sy0 = self.hardening.sigma_y(state.eps_p_eq);
        let q_plane = von_mises(&trial);
        if q_plane - sy0 <= 0.0 {
            return Ok(HfUpdate {
                response: ConstitutiveResponse {
                    stress: trial,
                    tangent: self.d_e,
                },
                state: *state,
                sigma_zz: 0.0,
                plastic: false,
            });
        }

        let nu = self.elastic.nu;
        let ep = state.mandel();
        // elastic plane-stress guess for the out-of-plane strain
        let mut ezz = ep[2] - nu / (1.0 - nu) * ((eps[0] - ep[0]) + (eps[1] - ep[1]));
        let mut last = f64::NAN;
        for _ in 0..OUTER_MAX_ITERS {
            let total = Vector4::new(eps[0], eps[1], ezz, eps[2] / std::f64::consts::SQRT_2);
            let scale = (total - ep).amax().max(1.0);
            let tol = 1e-12 * self.elastic.e * scale;
            let r = self.radial_return(&(total - ep), state.eps_p_eq, q_plane)?;
            last = r.stress[2];
            if last.abs() <= tol {
                return Ok(self.finish(state, &ep, r));
            }
            ezz -= last / r.tangent[(2, 2)];
        }
        Err(Error::ReturnMapping {
            trial_mises: q_plane,
            residual: last,
        })
    }

    fn finish(&self, state: &PlasticState, ep: &Vector4<f64>, r: Radial) -> HfUpdate {
        let c = &r.tangent;
        let idx = [0, 1, 3];
        let scale = [1.0, 1.0, std::f64::consts::FRAC_1_SQRT_2];
        let mut d = Tangent::zeros();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let cond = c[(i, j)] - c[(i, 2)] * c[(2, j)] / c[(2, 2)];
                d[(a, b)] = scale[a] * cond * scale[b];
            }
        }
        let new_ep = ep + r.delta_ep;
        let new_state = PlasticState {
            eps_p: [
                new_ep[0],
                new_ep[1],
                new_ep[3] * std::f64::consts::SQRT_2,
                new_ep[2],
            ],
            eps_p_eq: state.eps_p_eq + r.delta_gamma,
        };
        HfUpdate {
            response: ConstitutiveResponse {
                stress: Voigt::new(r.stress[0], r.stress[1], r.stress[3] * std::f64::consts::FRAC_1_SQRT_2),
                tangent: d,
            },
            state: new_state,
            sigma_zz: r.stress[2],
            plastic: r.delta_gamma > 0.0,
        }
    }

    /// 3D radial return for the elastic strain trial `ee` (Mandel).
    fn radial_return(&self, ee: &Vector4<f64>, kappa: f64, trial_mises: f64) -> Result<Radial> {
        let g = self.elastic.shear_modulus();
        let k = self.elastic.bulk_modulus();
        let one = Vector4::new(1.0, 1.0, 1.0, 0.0);
        let tr = ee[0] + ee[1] + ee[2];
        let dev = ee - one * (tr / 3.0);
        let s_tr = dev * (2.0 * g);
        let s_norm = s_tr.norm();
        let q_tr = 1.5f64.sqrt() * s_norm;
        let i_dev = Matrix4::identity() - one * one.transpose() / 3.0;
        let vol = one * one.transpose() * k;
        let sy = self.hardening.sigma_y(kappa);
        if q_tr - sy <= 0.0 {
            return Ok(Radial {
                stress: s_tr + one * (k * tr),
                tangent: vol + i_dev * (2.0 * g),
                delta_ep: Vector4::zeros(),
                delta_gamma: 0.0,
            });
        }
        let mut dg = 0.0;
        let mut converged = false;
        let mut res = f64::NAN;
        // the roundoff floor matters only for far-out Newton iterates
        let floor = 8.0 * f64::EPSILON * q_tr;
        for _ in 0..INNER_MAX_ITERS {
            res = q_tr - 3.0 * g * dg - self.hardening.sigma_y(kappa + dg);
            if res.abs() <= (1e-12 * self.hardening.sigma_y(kappa + dg)).max(floor) {
                converged = true;
                break;
            }
            dg += res / (3.0 * g + self.hardening.modulus(kappa + dg));
        }
        if !converged {
            return Err(Error::ReturnMapping {
                trial_mises,
                residual: res,
            });
        }
        let n = s_tr / s_norm;
        let h = self.hardening.modulus(kappa + dg);
        let theta = 1.0 - 3.0 * g * dg / q_tr;
        let stress = s_tr * theta + one * (k * tr);
        let tangent = vol + i_dev * (2.0 * g * theta)
            + n * n.transpose() * (6.0 * g * g * (dg / q_tr - 1.0 / (3.0 * g + h)));
        Ok(Radial {
            stress,
            tangent,
            delta_ep: n * (1.5f64.sqrt() * dg),
            delta_gamma: dg,
        })
    }
}

struct Radial {
    stress: Vector4<f64>,
    tangent: Matrix4<f64>,
    delta_ep: Vector4<f64>,
    delta_gamma: f64,
}

fn plane_part(state: &PlasticState) -> Voigt {
    Voigt::new(state.eps_p[0], state.eps_p[1], state.eps_p[2])
}
