//! Generates strain-driven training curves, writes them as CSV and fits a
//! GP surrogate to them (the `gen-data` and `train` subcommands).

use phasemix::gp::{generate_training_data, OptimizeOptions, SurrogateSet, TrainOptions, TrainingDataset};
use phasemix::material::HfMaterial;

fn main() -> phasemix::Result<()> {
    let out = std::env::temp_dir().join("phasemix-examples");
    std::fs::create_dir_all(&out).expect("output directory");
    let hf = HfMaterial::reference();
    let data = generate_training_data(&hf, 10, 42)?;
    let csv = out.join("gp10.csv");
    data.write(&csv)?;
    println!("{} samples from {} curves -> {}", data.len(), data.n_curves(), csv.display());

    let data = TrainingDataset::read(&csv)?;
    let options = TrainOptions {
        optimize: OptimizeOptions { restarts: 5, ..Default::default() },
        kernels: None,
    };
    let (set, reports) = SurrogateSet::train(&data, *hf.elastic_matrix(), &options)?;
    for (name, r) in ["xx", "yy", "xy"].iter().zip(&reports) {
        println!(
            "{name}: sigma_f {:.3}, length {:.4}, sigma_n {:.4}, log likelihood {:.2}",
            r.kernel.sigma_f, r.kernel.length, r.kernel.sigma_n, r.lml
        );
    }
    let model = out.join("gp10.model");
    set.write(&model)?;
    println!("model -> {}", model.display());
    Ok(())
}
