//! Trapezoidal quadrature of `(1/2πi) ∮ f(w) dw` on circles.
//!
//! On a circle the trapezoidal rule converges geometrically for integrands
//! analytic in an annulus around the contour, so node doubling is a cheap
//! and reliable convergence test.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MIN_NODES: usize = 16;
pub const DEFAULT_NODES: usize = 64;
pub const MAX_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
}

impl ContourConfig {
    pub fn new(center: Complex64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::domain(format!("contour radius must be positive, got {radius}")));
        }
        if nodes < MIN_NODES {
            return Err(Error::domain(format!(
                "contour needs at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        Ok(Self {
            center,
            radius,
            nodes,
        })
    }

    /// Γ₀: circle of radius ½ around the origin, enclosing 0 but not 1.
    pub fn around_origin() -> Self {
        Self {
            center: Complex64::new(0.0, 0.0),
            radius: 0.5,
            nodes: DEFAULT_NODES,
        }
    }

    /// Γ₀ with a custom radius (must stay below 1 when the integrand has a
    /// singularity at `w = 1`).
    pub fn origin_circle(radius: f64) -> Result<Self> {
        Self::new(Complex64::new(0.0, 0.0), radius, DEFAULT_NODES)
    }

    /// Γ_{0,1}: circle of radius 1.2 centred at ½, enclosing 0 and 1.
    pub fn around_zero_and_one() -> Self {
        Self {
            center: Complex64::new(0.5, 0.0),
            radius: 1.2,
            nodes: DEFAULT_NODES,
        }
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes.max(MIN_NODES);
        self
    }

    pub fn encloses(&self, p: Complex64) -> bool {
        (p - self.center).norm() < self.radius
    }

    fn node(&self, k: usize, n: usize) -> Complex64 {
        let theta = 2.0 * PI * (k as f64) / (n as f64);
        self.center + Complex64::from_polar(self.radius, theta)
    }
}

/// Result of an adaptive contour integration.
#[derive(Debug, Clone, Copy)]
pub struct ContourIntegral {
    pub value: Complex64,
    pub nodes: usize,
    /// `|I_{2N} - I_N|` at the final doubling.
    pub increment: f64,
    /// Largest `|f(w) (w - c)|` seen on the contour (roundoff scale).
    pub scale: f64,
}

impl ContourIntegral {
    /// Real part, failing when the imaginary residual is above `threshold`
    /// (or above the roundoff floor of the integrand, whichever is larger).
    pub fn real(&self, threshold: f64) -> Result<f64> {
        let floor = 64.0 * f64::EPSILON * self.scale;
        let allowed = threshold.max(floor);
        if self.value.im.abs() > allowed {
            log::warn!(
                "contour integral imaginary residual {:e} above {:e}",
                self.value.im,
                allowed
            );
            return Err(Error::ImaginaryResidual {
                residual: self.value.im.abs(),
                threshold: allowed,
            });
        }
        Ok(self.value.re)
    }
}

/// Fixed-node trapezoidal rule: `(1/N) Σ f(w_k) (w_k - c)`.
pub fn contour_quadrature<F>(f: F, cfg: &ContourConfig) -> Complex64
where
    F: Fn(Complex64) -> Complex64,
{
    sum_nodes(&f, cfg, cfg.nodes).0
}

fn sum_nodes<F>(f: &F, cfg: &ContourConfig, n: usize) -> (Complex64, f64)
where
    F: Fn(Complex64) -> Complex64,
{
    let mut acc = Complex64::new(0.0, 0.0);
    let mut scale: f64 = 0.0;
    for k in 0..n {
        let w = cfg.node(k, n);
        let term = f(w) * (w - cfg.center);
        scale = scale.max(term.norm());
        acc += term;
    }
    (acc / n as f64, scale)
}

/// Doubles the node count from `cfg.nodes` until successive values agree to
/// `rel_tol` (relative, with a roundoff floor), up to `max_nodes`.
pub fn adaptive_contour_quadrature<F>(
    f: F,
    cfg: &ContourConfig,
    max_nodes: usize,
    rel_tol: f64,
) -> Result<ContourIntegral>
where
    F: Fn(Complex64) -> Complex64,
{
    let mut n = cfg.nodes.max(MIN_NODES);
    let (mut prev, mut scale) = sum_nodes(&f, cfg, n);
    loop {
        if n * 2 > max_nodes {
            return Err(Error::numeric(
                "contour quadrature",
                format!("no convergence within {max_nodes} nodes"),
            ));
        }
        n *= 2;
        let (cur, s) = sum_nodes(&f, cfg, n);
        scale = scale.max(s);
        let inc = (cur - prev).norm();
        let floor = 64.0 * f64::EPSILON * scale;
        if inc <= rel_tol * cur.norm() || inc <= floor {
            return Ok(ContourIntegral {
                value: cur,
                nodes: n,
                increment: inc,
                scale,
            });
        }
        prev = cur;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn residue_of_one_over_w() {
        let v = contour_quadrature(|w| 1.0 / w, &ContourConfig::around_origin().with_nodes(16));
        assert!((v - c(1.0)).norm() < 1e-14);
        let unit = ContourConfig::origin_circle(1.0).unwrap();
        assert!((contour_quadrature(|w| 1.0 / w, &unit) - c(1.0)).norm() < 1e-14);
    }

    #[test]
    fn analytic_integrand_gives_zero() {
        let cfg = ContourConfig::new(Complex64::new(0.3, -0.2), 2.0, 32).unwrap();
        assert!(contour_quadrature(|_| c(1.0), &cfg).norm() < 1e-14);
    }

    #[test]
    fn exp_over_w_squared() {
        let unit = ContourConfig::origin_circle(1.0).unwrap();
        let r = adaptive_contour_quadrature(|w| w.exp() / (w * w), &unit, MAX_NODES, 1e-14).unwrap();
        assert!((r.real(1e-12).unwrap() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn config_validation() {
        assert!(ContourConfig::new(c(0.0), 0.0, 64).is_err());
        assert!(ContourConfig::new(c(0.0), 1.0, 8).is_err());
        let g = ContourConfig::around_zero_and_one();
        assert!(g.encloses(c(0.0)) && g.encloses(c(1.0)));
        assert!(!ContourConfig::around_origin().encloses(c(1.0)));
    }

    #[test]
    fn imaginary_residual_is_reported() {
        let r = ContourIntegral {
            value: Complex64::new(1.0, 1e-6),
            nodes: 64,
            increment: 0.0,
            scale: 1.0,
        };
        assert!(matches!(r.real(1e-12), Err(Error::ImaginaryResidual { .. })));
    }
}
