//! Exact law of the first time the geometric down-walk enters the strict
//! epigraph of the initial data.

use tasep_core::walk::{hit_distribution, EpigraphCurve};
use tasep_core::ParticleConfig;

fn main() -> tasep_core::Result<()> {
    let x0 = ParticleConfig::new(vec![0, -1, -4, -5, -9])?;
    let curve = EpigraphCurve::from_config(&x0, 5)?;
    for start in [-1, 1, 3] {
        let d = hit_distribution(start, &curve)?;
        println!("start {start}: hit {} survive {} dead {}", d.hit_mass().to_f64(), d.survival_mass().to_f64(), d.dead.to_f64());
        for h in &d.hits {
            println!("    tau={} site={} p={}", h.time, h.site, d.mass(h.time, h.site).to_rational());
        }
        assert!(d.total_mass().is_one());
    }
    Ok(())
}
