//! One particle started at 0: `P(X_t(1) > 0)` is the probability that a
//! rate-one Poisson clock has rung by time `t`.

use tasep_core::fredholm::{f_t, Problem, WindowPlan};
use tasep_core::{ObservationSpec, ParticleConfig};

fn main() -> tasep_core::Result<()> {
    let problem = Problem::tasep(ParticleConfig::new(vec![0])?, ObservationSpec::single(1, 0)?)?;
    let plan = WindowPlan::default();
    println!("{:>5} {:>20} {:>20} {:>10}", "t", "F_det", "1 - exp(-t)", "diff");
    for t in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
        let p = f_t(t, &problem, &plan)?;
        let exact = 1.0 - (-t).exp();
        println!("{t:>5} {:>20.16} {exact:>20.16} {:>10.2e}", p.value, (p.value - exact).abs());
    }
    Ok(())
}
