//! Trapezoidal contour quadrature on small circles: a single residue and
//! the double integral that produces the packed-prefix indicator.

use num_complex::Complex64;
use tasep_core::contour::{contour_quadrature, ContourConfig};
use tasep_core::verify::init1_integral;
use tasep_core::ParticleConfig;

fn main() -> tasep_core::Result<()> {
    let cfg = ContourConfig::origin_circle(0.5)?.with_nodes(64);
    // coefficient of w^3 in exp(2w)
    let c = contour_quadrature(|w: Complex64| (2.0 * w).exp() / w.powi(4), &cfg);
    println!("[w^3] exp(2w) = {:.15} (exact {:.15})", c.re, 8.0 / 6.0);
    for x0 in [vec![0, -1, -2], vec![0, -1, -3], vec![3, 1, 0, -1]] {
        let n = x0.len();
        let v = init1_integral(&ParticleConfig::new(x0.clone())?, n)?;
        println!("{x0:?}: {v:+.3e}");
    }
    Ok(())
}
