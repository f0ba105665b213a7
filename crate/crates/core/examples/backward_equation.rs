//! `dF/dt` against `L F` for both models, by finite differences and by the
//! resolvent trace.

use tasep_core::fredholm::{Problem, WindowPlan};
use tasep_core::verify::kolmogorov_residual;
use tasep_core::{ObservationSpec, ParticleConfig, RateParams};

fn main() -> tasep_core::Result<()> {
    let plan = WindowPlan::default();
    let x0 = ParticleConfig::new(vec![-1, -2, -3])?;
    let right = ObservationSpec::new(vec![1, 3], vec![0, -3])?;
    // with pure pushes particles only move left
    let left = ObservationSpec::new(vec![1, 3], vec![-3, -5])?;
    let problems = [
        ("tasep", Problem::tasep(x0.clone(), right.clone())?),
        ("push (0,1)", Problem::push(x0.clone(), left, RateParams::new(0.0, 1.0)?)?),
        ("push (1,1)", Problem::push(x0, right, RateParams::new(1.0, 1.0)?)?),
    ];
    for (name, problem) in &problems {
        for t in [0.3, 1.0, 2.0] {
            let k = kolmogorov_residual(t, problem, &plan)?;
            println!(
                "{name:>10} t={t}: F={:.10} LF={:+.10} fd resid {:.1e} (richardson {:.2}) trace resid {}",
                k.f,
                k.lf,
                k.fd_residual(),
                k.richardson_ratio,
                k.trace_residual().map_or("skipped".into(), |r| format!("{r:.1e}"))
            );
        }
    }
    Ok(())
}
