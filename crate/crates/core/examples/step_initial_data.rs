//! Multi-point probabilities for step initial data, with the window
//! doubling history of each determinant.

use tasep_core::fredholm::{f_t, Problem, WindowPlan};
use tasep_core::{ObservationSpec, ParticleConfig};

fn main() -> tasep_core::Result<()> {
    let x0 = ParticleConfig::packed(-1, 6);
    let plan = WindowPlan::default();
    let events = [
        ObservationSpec::single(6, -6)?,
        ObservationSpec::new(vec![1, 6], vec![0, -6])?,
        ObservationSpec::new(vec![2, 4, 6], vec![-1, -3, -5])?,
    ];
    for spec in events {
        let problem = Problem::tasep(x0.clone(), spec.clone())?;
        for t in [0.5, 1.0, 3.0] {
            let p = f_t(t, &problem, &plan)?;
            println!(
                "n={:?} a={:?} t={t}: F = {:.12} (depth {}, converged {}, history {:?})",
                spec.indices(),
                spec.levels(),
                p.value,
                p.depth,
                p.converged,
                p.history
            );
        }
    }
    Ok(())
}
