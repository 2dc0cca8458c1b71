//! Command-line front end. `run(args)` returns the process exit status:
//! 0 success, 1 usage or input error, 2 unsolved simulation, 3 I/O error.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Fixture, RunConfig};
use crate::driver::{Simulation, StaggerConfig, StepperConfig};
use crate::error::{Error, Result};
use crate::fixtures::{dogbone, notched_plate, plate_with_holes, DogboneConfig, NotchedPlateConfig, PlateWithHolesConfig};
use crate::gp::{generate_training_data, OptimizeOptions, SurrogateSet, TrainOptions, TrainingDataset};
use crate::material::HfMaterial;
use crate::mesh::{generate_rectangle, Mesh};
use crate::metrics::{fu_error, reference_grid, RunMetrics};
use crate::mixture::{ElasticSurrogate, MixMode, Mixture, MixtureConfig, Surrogate};
use crate::phasefield::PhaseFieldParams;
use crate::vtk::{write_vtk, VtkFields};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNSOLVED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "phasemix", version, about = "Hybrid HF/GP finite-element simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate HF training curves as CSV.
    GenData {
        #[arg(long, default_value_t = 10)]
        curves: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Fit the GP surrogate to a dataset and write the model file.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        restarts: usize,
        #[arg(long, default_value_t = 300)]
        max_points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a configured simulation.
    Run {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// F-u error of result CSVs against a reference CSV.
    Compare {
        #[arg(long)]
        reference: PathBuf,
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Grid spacing; defaults to the first increment of the reference.
        #[arg(long)]
        du0: Option<f64>,
    },
    /// Generate a mesh file.
    Mesh {
        #[arg(long, value_parser = parse_fixture, conflicts_with = "rect")]
        fixture: Option<Fixture>,
        /// `nx,ny,width,height`
        #[arg(long, value_parser = parse_rect)]
        rect: Option<(usize, usize, f64, f64)>,
        /// Remove elements whose centroid lies inside the circle `cx,cy,r`.
        #[arg(long = "hole", value_parser = parse_hole)]
        holes: Vec<(f64, f64, f64)>,
        /// Write quadratic (T6) connectivity.
        #[arg(long)]
        promote: bool,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn parse_fixture(s: &str) -> std::result::Result<Fixture, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn numbers(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: std::result::Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == n => Ok(v),
        _ => Err(format!("expected {n} comma-separated numbers, got `{s}`")),
    }
}

fn parse_rect(s: &str) -> std::result::Result<(usize, usize, f64, f64), String> {
    let v = numbers(s, 4)?;
    if v[0] < 1.0 || v[1] < 1.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
        return Err("cell counts must be positive integers".into());
    }
    Ok((v[0] as usize, v[1] as usize, v[2], v[3]))
}

fn parse_hole(s: &str) -> std::result::Result<(f64, f64, f64), String> {
    let v = numbers(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

/// Entry point used by the binary; `args` includes the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::GenData { curves, seed, out } => {
            let data = generate_training_data(&HfMaterial::reference(), curves, seed)?;
            data.write(&out)?;
            println!("wrote {} samples to {}", data.len(), out.display());
            Ok(EXIT_OK)
        }
        Command::Train {
            data,
            out,
            restarts,
            max_points,
            seed,
        } => {
            let data = TrainingDataset::read(&data)?;
            let options = TrainOptions {
                optimize: OptimizeOptions {
                    restarts,
                    max_points,
                    seed,
                    ..Default::default()
                },
                kernels: None,
            };
            let (set, reports) = SurrogateSet::train(&data, *HfMaterial::reference().elastic_matrix(), &options)?;
            for (c, r) in reports.iter().enumerate() {
                println!(
                    "component {c}: sigma_f = {:.4e}, length = {:.4e}, sigma_n = {:.4e}, lml = {:.6e}",
                    r.kernel.sigma_f, r.kernel.length, r.kernel.sigma_n, r.lml
                );
                if r.warning {
                    println!("  warning: no restart finished with a successful line search");
                }
            }
            set.write(&out)?;
            Ok(EXIT_OK)
        }
        Command::Run { config } => {
            let cfg = RunConfig::read(&config)?;
            let outcome = run_experiment(&cfg)?;
            println!(
                "{}: {} attempted steps, {} HF evaluations, {} Newton iterations, {}",
                cfg.experiment,
                outcome.metrics.rows.len(),
                outcome.metrics.hf_evals(),
                outcome.metrics.nr_iters(),
                if outcome.metrics.solved { "solved" } else { "unsolved" }
            );
            Ok(if outcome.metrics.solved { EXIT_OK } else { EXIT_UNSOLVED })
        }
        Command::Compare { reference, results, du0 } => {
            let reference_metrics = RunMetrics::read(&reference)?;
            let reference_curve = reference_metrics.fu_curve();
            let du0 = du0
                .or_else(|| reference_metrics.accepted().next().map(|r| r.du))
                .ok_or_else(|| Error::InvalidInput("reference has no accepted step".into()))?;
            let u_end = reference_curve.support().map_or(0.0, |s| s.1);
            let grid = reference_grid(du0, u_end);
            for path in results {
                let curve = RunMetrics::read(&path)?.fu_curve();
                let e = fu_error(&curve, &reference_curve, &grid)?;
                println!(
                    "{}: fu_error = {:.12e} over {} points ({} dropped)",
                    path.display(),
                    e.error,
                    e.points_used,
                    e.points_dropped
                );
            }
            Ok(EXIT_OK)
        }
        Command::Mesh {
            fixture,
            rect,
            holes,
            promote,
            out,
        } => {
            let mut mesh = match (fixture, rect) {
                (Some(f), _) => fixture_mesh(f)?,
                (None, Some((nx, ny, w, h))) => generate_rectangle(nx, ny, w, h)?,
                (None, None) => return Err(Error::InvalidInput("give --fixture or --rect".into())),
            };
            if !holes.is_empty() {
                mesh = mesh.carve(|p| holes.iter().all(|&(cx, cy, r)| (p[0] - cx).hypot(p[1] - cy) > r))?;
            }
            if promote {
                mesh = mesh.promote_to_t6()?;
            }
            mesh.write(&out)?;
            println!("wrote {} elements, {} nodes to {}", mesh.n_elements(), mesh.n_nodes(), out.display());
            Ok(EXIT_OK)
        }
    }
}

/// Linear mesh of a built-in fixture at its default resolution.
pub fn fixture_mesh(f: Fixture) -> Result<Mesh> {
    match f {
        Fixture::Dogbone => dogbone(&DogboneConfig::default()),
        Fixture::NotchedPlate => notched_plate(&NotchedPlateConfig::default()),
        Fixture::PlateWithHoles => plate_with_holes(&PlateWithHolesConfig::default()),
    }
}

/// Result of [`run_experiment`].
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub metrics: RunMetrics,
    pub metrics_path: PathBuf,
    pub vtk_path: PathBuf,
}

/// Builds a ready-to-run simulation from a configuration.
pub fn build_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let mesh = match &cfg.mesh {
        Some(p) => Mesh::read(p)?,
        None => fixture_mesh(cfg.fixture)?,
    };
    let mesh = if mesh.is_quadratic() { mesh } else { mesh.promote_to_t6()? };
    let hf = HfMaterial::reference();
    let surrogate: Box<dyn Surrogate> = match (&cfg.model, cfg.mode) {
        (Some(p), _) => Box::new(SurrogateSet::read(p)?),
        (None, MixMode::Full) => Box::new(ElasticSurrogate { d: *hf.elastic_matrix() }),
        (None, m) => return Err(Error::Config(format!("mode `{}` needs a `model` file", m.name()))),
    };
    let n_ips = 3 * mesh.n_elements();
    let mixture = Mixture::new(hf, surrogate, MixtureConfig::new(cfg.tau, cfg.mode, cfg.b)?, n_ips);
    Simulation::new(
        &mesh,
        mixture,
        PhaseFieldParams::new(cfg.eps, cfg.omega, cfg.b)?,
        StaggerConfig {
            k_max: cfg.k_max,
            tol_u: cfg.tol_u,
        },
    )
}

/// Runs a configured experiment and writes `<experiment>_metrics.csv` and
/// `<experiment>.vtk` into the output directory, also when unsolved.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutcome> {
    let mut sim = build_simulation(cfg)?;
    let stepper = StepperConfig::new(cfg.du0, cfg.u_target)?;
    let metrics = sim.run(&stepper)?;
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    let metrics_path = cfg.output.join(format!("{}_metrics.csv", cfg.experiment));
    metrics.write(&metrics_path)?;
    let vtk_path = cfg.output.join(format!("{}.vtk", cfg.experiment));
    write_snapshot(&sim, &vtk_path, &cfg.experiment)?;
    Ok(ExperimentOutcome {
        metrics,
        metrics_path,
        vtk_path,
    })
}

/// Writes the committed fields of a simulation as VTK.
pub fn write_snapshot(sim: &Simulation, path: &Path, title: &str) -> Result<()> {
    let eps_p: Vec<f64> = sim.mixture().records().iter().map(|r| r.plastic.eps_p_eq).collect();
    let phi = sim.phi_output();
    let fields = VtkFields {
        phi: &phi,
        displacement: sim.displacement(),
        stress: sim.mixture().committed_stress(),
        eps_p_eq: &eps_p,
        uncertainty: sim.uncertainty(),
    };
    write_vtk(path, sim.model().mesh(), &fields, title)
}
