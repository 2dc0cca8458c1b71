//! Uniaxial and shear loading of the plane-stress von Mises material with
//! exponential hardening.

use phasemix::fem::Voigt;
use phasemix::material::{von_mises, HfMaterial, PlasticState};

fn main() -> phasemix::Result<()> {
    let hf = HfMaterial::reference();
    println!("E = {}, nu = {}, initial yield = {} MPa", hf.elastic.e, hf.elastic.nu, hf.hardening.yield_stress(0.0)?);

    // strain-driven uniaxial stress: solve for the lateral strain that keeps
    // syy = 0 at every step
    println!("\n{:>8} {:>10} {:>10} {:>10}", "exx", "sxx", "eps_p_eq", "D11");
    let mut state = PlasticState::default();
    let mut eyy = 0.0;
    for step in 1..=20 {
        let exx = 0.002 * step as f64;
        let mut resp = None;
        for _ in 0..30 {
            let (r, s) = hf.update_stress(&Voigt::new(exx, eyy, 0.0), &state)?;
            if r.stress[1].abs() < 1e-10 {
                resp = Some((r, s));
                break;
            }
            eyy -= r.stress[1] / r.tangent[(1, 1)];
        }
        let (r, s) = resp.expect("lateral equilibrium");
        state = s;
        println!("{exx:>8.3} {:>10.4} {:>10.6} {:>10.1}", r.stress[0], s.eps_p_eq, r.tangent[(0, 0)]);
    }

    // pure shear from the virgin state
    let (r, s) = hf.update_stress(&Voigt::new(0.0, 0.0, 0.05), &PlasticState::default())?;
    let sy = hf.hardening.yield_stress(s.eps_p_eq)?;
    println!("\nshear 0.05: sxy = {:.4}, von Mises {:.6} = yield {:.6}", r.stress[2], von_mises(&r.stress), sy);
    println!("stress updates performed: {}", hf.evaluations());
    Ok(())
}
