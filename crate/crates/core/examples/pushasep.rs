//! PushASEP probabilities from the determinant, checked against the
//! master equation and a Monte Carlo estimate.

use tasep_core::fredholm::{f_t, Problem, WindowPlan};
use tasep_core::master::{master_equation_oracle, OracleConfig};
use tasep_core::mc::{mc_estimate, McConfig};
use tasep_core::{ObservationSpec, ParticleConfig, RateParams};

fn main() -> tasep_core::Result<()> {
    let x0 = ParticleConfig::new(vec![0, -1, -3])?;
    let spec = ObservationSpec::new(vec![1, 3], vec![-1, -5])?;
    for (r, l) in [(0.0, 1.0), (1.0, 1.0), (0.5, 2.0)] {
        let rates = RateParams::new(r, l)?;
        let problem = Problem::push(x0.clone(), spec.clone(), rates)?;
        let t = 0.8;
        let det = f_t(t, &problem, &WindowPlan::default())?;
        let oracle = master_equation_oracle(&x0, &spec, rates, t, &OracleConfig::default())?;
        let mc = mc_estimate(&x0, &spec, rates, &McConfig::new(200_000, 1, t)?)?;
        println!(
            "r={r} l={l}: det {:.12} (±{:.1e})  master {:.12} (±{:.1e})  mc {:.4} ± {:.4}",
            det.value, det.error_estimate, oracle.p, oracle.bound, mc.p_hat, mc.stderr
        );
    }
    Ok(())
}
