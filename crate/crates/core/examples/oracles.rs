//! The three independent routes to a TASEP probability: uniformized master
//! equation, summed Schütz determinants and simulation.

use tasep_core::master::{master_equation_oracle, OracleConfig};
use tasep_core::mc::{mc_estimate, McConfig};
use tasep_core::schutz::{schutz_f, schutz_joint_prob};
use tasep_core::{ObservationSpec, ParticleConfig, RateParams};

fn main() -> tasep_core::Result<()> {
    let x0 = ParticleConfig::new(vec![0, -2, -3])?;
    let target = ParticleConfig::new(vec![2, 0, -2])?;
    println!("P(X_1 = {:?}) = {:.12}", target.positions(), schutz_joint_prob(&x0, &target, 1.0)?);

    let spec = ObservationSpec::new(vec![2, 3], vec![-1, -3])?;
    for t in [0.5, 1.5] {
        let m = master_equation_oracle(&x0, &spec, RateParams::TASEP, t, &OracleConfig::default())?;
        let s = schutz_f(&x0, &spec, t, None)?;
        let mc = mc_estimate(&x0, &spec, RateParams::TASEP, &McConfig::new(400_000, 9, t)?)?;
        println!(
            "t={t}: master {:.12} ({} states, bound {:.1e})  schutz {:.12} (tail {:.1e})  mc {:.4} ± {:.4}",
            m.p, m.states, m.bound, s.value, s.tail, mc.p_hat, mc.stderr
        );
    }
    Ok(())
}
