//! Surrogate stress and uncertainty along a path that leaves the training
//! range; compares against the high-fidelity material.

use phasemix::fem::Voigt;
use phasemix::gp::{generate_training_data, OptimizeOptions, SurrogateSet, TrainOptions};
use phasemix::material::{HfMaterial, PlasticState};

fn main() -> phasemix::Result<()> {
    let hf = HfMaterial::reference();
    let data = generate_training_data(&hf, 10, 1)?;
    let options = TrainOptions {
        optimize: OptimizeOptions { restarts: 5, ..Default::default() },
        kernels: None,
    };
    let (set, _) = SurrogateSet::train(&data, *hf.elastic_matrix(), &options)?;

    let dir = Voigt::new(1.0, -0.3, 0.4).normalize();
    println!("{:>6} {:>10} {:>10} {:>10}", "|eps|", "sxx GP", "sxx HF", "U");
    let mut state = PlasticState::default();
    for k in 1..=15 {
        let eps = dir * (0.01 * k as f64);
        let (gp, u) = set.response_with_uncertainty(&eps);
        let (h, s) = hf.update_stress(&eps, &state)?;
        state = s;
        println!("{:>6.2} {:>10.3} {:>10.3} {:>10.4}", eps.norm(), gp.stress[0], h.stress[0], u);
    }
    println!("uncertainty grows once the path leaves the sampled strain ball of radius 0.10");
    Ok(())
}
