//! Metrics CSV round trip and the F-u error between two runs whose adaptive
//! steppers took different increments.

use phasemix::metrics::{fu_error, reference_grid, FailureKind, RunMetrics, StepRecord};

fn record(step: usize, u: f64, du: f64, force: f64, accepted: bool) -> StepRecord {
    StepRecord {
        step,
        u,
        force: if accepted { force } else { f64::NAN },
        du,
        accepted,
        stagger_iters: 1,
        nr_iters_cum: 2 * step as u64,
        hf_evals_cum: 100 * step as u64,
        n_gp: 10,
        n_mixed: 0,
        n_hf: 0,
        failure: if accepted { FailureKind::None } else { FailureKind::Mechanical },
    }
}

fn main() -> phasemix::Result<()> {
    let reference = RunMetrics {
        rows: (1..=10).map(|k| record(k, 0.1 * k as f64, 0.1, (0.1 * k as f64).sqrt(), true)).collect(),
        solved: true,
    };
    // a run that failed once and halved its increment
    let mut rows = vec![record(1, 0.1, 0.1, 0.31, true), record(2, 0.2, 0.1, 0.0, false)];
    let mut u = 0.1;
    for k in 3..=20 {
        u += 0.05;
        if u > 1.0 + 1e-12 {
            break;
        }
        rows.push(record(k, u, 0.05, 1.02 * u.sqrt(), true));
    }
    let run = RunMetrics { rows, solved: true };

    let text = run.to_csv();
    println!("{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    let back = RunMetrics::from_csv(&text)?;
    assert_eq!(back.rows.len(), run.rows.len());

    let grid = reference_grid(0.1, 1.0);
    let e = fu_error(&back.fu_curve(), &reference.fu_curve(), &grid)?;
    println!("...\nF-u error {:.5} over {} grid points ({} dropped)", e.error, e.points_used, e.points_dropped);
    Ok(())
}
