//! Notched plate at b = 1: phase-field mixing against the two PDE-free local
//! rules. Local rules switch fewer points because they have no diffuse
//! interface.

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
    let model = out.join("notched-gp30.model");
    let (set, _) = SurrogateSet::train(&generate_training_data(&hf, 30, 1)?, *hf.elastic_matrix(), &TrainOptions::default())?;
    set.write(&model)?;

    let base = RunConfig {
        fixture: Fixture::NotchedPlate,
        model: Some(model),
        output: out.clone(),
        ..Default::default()
    };
    let full = run_experiment(&RunConfig { experiment: "notched-full".into(), mode: MixMode::Full, ..base.clone() })?;
    let grid = reference_grid(base.du0, base.u_target);
    println!("{:<12} {:>9} {:>10} {:>14}", "mode", "HF evals", "F-u error", "mean n(phi>tau)");
    for mode in [MixMode::PhaseField, MixMode::LocalStep, MixMode::LocalLinear] {
        let o = run_experiment(&RunConfig {
            experiment: format!("notched-{}", mode.name()),
            mode,
            ..base.clone()
        })?;
        let e = fu_error(&o.metrics.fu_curve(), &full.metrics.fu_curve(), &grid)?;
        let rows: Vec<_> = o.metrics.accepted().collect();
        let active = rows.iter().map(|r| (r.n_mixed + r.n_hf) as f64).sum::<f64>() / rows.len() as f64;
        println!("{:<12} {:>9} {:>10.4} {:>14.1}", mode.name(), o.metrics.hf_evals(), e.error, active);
    }
    Ok(())
}
