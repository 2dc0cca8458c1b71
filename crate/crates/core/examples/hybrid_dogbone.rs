//! Tensile dogbone: all-HF reference, surrogate-only and hybrid runs with
//! the phase-field mixture. Prints F-u errors and HF evaluation counts and
//! writes the metrics CSVs.

use phasemix::config::{Fixture, RunConfig};
use phasemix::cli::run_experiment;
use phasemix::gp::{generate_training_data, SurrogateSet, TrainOptions};
use phasemix::material::HfMaterial;
use phasemix::metrics::{fu_error, reference_grid};
use phasemix::mixture::MixMode;

fn main() -> phasemix::Result<()> {
    let out = std::env::temp_dir().join("phasemix-examples");
    std::fs::create_dir_all(&out).expect("output directory");
    let hf = HfMaterial::reference();
    let model = out.join("dogbone-gp10.model");
    let (set, _) = SurrogateSet::train(&generate_training_data(&hf, 10, 1)?, *hf.elastic_matrix(), &TrainOptions::default())?;
    set.write(&model)?;

    let base = RunConfig {
        fixture: Fixture::Dogbone,
        model: Some(model),
        output: out.clone(),
        ..Default::default()
    };
    let run = |name: &str, mode: MixMode, k_max: usize| {
        run_experiment(&RunConfig {
            experiment: name.into(),
            mode,
            k_max,
            ..base.clone()
        })
    };
    let full = run("dogbone-full", MixMode::Full, 1)?;
    let grid = reference_grid(base.du0, base.u_target);
    let reference = full.metrics.fu_curve();
    println!("{:<20} {:>9} {:>10} {:>8}", "run", "HF evals", "F-u error", "solved");
    println!("{:<20} {:>9} {:>10} {:>8}", "all HF", full.metrics.hf_evals(), 0.0, full.metrics.solved);
    for (name, mode, k) in [
        ("dogbone-surrogate", MixMode::Surrogate, 1),
        ("dogbone-hybrid-k1", MixMode::PhaseField, 1),
        ("dogbone-hybrid-k3", MixMode::PhaseField, 3),
    ] {
        let o = run(name, mode, k)?;
        let e = fu_error(&o.metrics.fu_curve(), &reference, &grid)?;
        println!("{name:<20} {:>9} {:>10.4} {:>8}", o.metrics.hf_evals(), e.error, o.metrics.solved);
    }
    println!("metrics and VTK files in {}", out.display());
    Ok(())
}
