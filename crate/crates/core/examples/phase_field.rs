//! Solves the bounded phase-field problem for a localized driving force and
//! shows how the opposing force `b` limits the region that switches to the
//! high-fidelity model.

use phasemix::mesh::generate_rectangle;
use phasemix::phasefield::{PhaseFieldOptions, PhaseFieldParams, PhaseFieldProblem};

fn main() -> phasemix::Result<()> {
    let mesh = generate_rectangle(60, 30, 2.0, 1.0)?;
    let pf = PhaseFieldProblem::new(&mesh);
    // a hot spot of uncertainty around (0.6, 0.5)
    let drive: Vec<f64> = (0..mesh.n_elements())
        .map(|e| {
            let c = mesh.centroid(e);
            3.0 * (-((c[0] - 0.6).powi(2) + (c[1] - 0.5).powi(2)) / 0.05).exp()
        })
        .collect();
    let zero = vec![0.0; pf.n_nodes()];
    for b in [0.5, 1.0, 2.0, 4.0] {
        let p = PhaseFieldParams::new(0.02, 1e-3, b)?;
        let s = pf.solve(&zero, &drive, &p, &PhaseFieldOptions::default())?;
        let switched = s.phi.iter().filter(|&&v| v > 0.01).count();
        let full = s.phi.iter().filter(|&&v| v > 0.99).count();
        println!(
            "b = {b:<4} converged {} in {:>2} iterations: {switched:>4} nodes above 0.01, {full:>4} above 0.99",
            s.converged, s.iterations
        );
    }
    Ok(())
}
