//! Drives a simulation from the `key = value` configuration format, the way
//! `phasemix run --config` does.

use phasemix::cli::run_experiment;
use phasemix::config::RunConfig;

const CONFIG: &str = "\
# plate with holes, all high-fidelity
experiment = holes-full
fixture = plate-with-holes
mode = full
du0 = 0.002
u_target = 0.02
output = runs
";

fn main() -> phasemix::Result<()> {
    let base = std::env::temp_dir().join("phasemix-examples");
    std::fs::create_dir_all(&base).expect("output directory");
    let cfg = RunConfig::parse(CONFIG, Some(&base))?;
    println!("{cfg:#?}");
    let outcome = run_experiment(&cfg)?;
    println!(
        "{} accepted steps, {} HF evaluations; wrote {} and {}",
        outcome.metrics.accepted().count(),
        outcome.metrics.hf_evals(),
        outcome.metrics_path.display(),
        outcome.vtk_path.display()
    );
    Ok(())
}
