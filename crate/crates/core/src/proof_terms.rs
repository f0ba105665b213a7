//! The factors `f_k`, `g_k` of the rank-one kernel updates and their hatted
//! counterparts in the kernel time derivative.
//!
//! Moving particle `k` (TASEP) or the block at `k` (PushASEP) changes the
//! epigraph kernel only on paths that sit at one particular site at time
//! `k - 1`. The change factors into the probability `f_k(b)` of reaching
//! that site from `b` and the restarted expectation `g_k(z)`.
//!
//! Values are returned in conjugated form with an explicit base `T`:
//! `f_k(b) = count_b 2^{T_f - b}` and `g_k(z) = 2^{z - T_g} g_conj(z)`.

use num_rational::BigRational;

use crate::config::ParticleConfig;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::generator::{push_move, right_move};
use crate::lattice::{qbar_conj_exact, sbar_conj, Clock, KernelFamily, KernelValue, RateParams};
use crate::walk::{epi_conj, epi_conj_exact, hit_distribution, hit_distribution_from, EpigraphCurve, WalkHitDistribution, WalkStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Tasep,
    Push,
}

/// The configuration after the move behind `Δ^{(k)}`; `None` when blocked.
pub fn perturbed(x0: &ParticleConfig, k: usize, variant: Variant) -> Result<Option<ParticleConfig>> {
    match variant {
        Variant::Tasep => right_move(x0, k),
        Variant::Push => push_move(x0, k).map(Some),
    }
}

fn check_k(x0: &ParticleConfig, k: usize) -> Result<()> {
    if k == 0 || k > x0.len() {
        return Err(Error::domain(format!("k = {k} out of range 1..={}", x0.len())));
    }
    Ok(())
}

/// `b -> P_b(τ = k-1, B_{k-1} = target)` as path counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftFactor {
    pub target: i64,
    /// `(b, count)` with `f(b) = count 2^{target - b}`; zero counts omitted.
    pub counts: Vec<(i64, u128)>,
}

impl LeftFactor {
    fn build(curve: &EpigraphCurve, k: usize, target: i64) -> Result<Self> {
        let top = if k == 1 { target } else { curve.values()[0].max(target) };
        let mut counts = Vec::new();
        for b in target..=top {
            let c = hit_distribution(b, curve)?.count(k - 1, target);
            if c > 0 {
                counts.push((b, c));
            }
        }
        Ok(Self { target, counts })
    }

    pub fn value(&self, b: i64) -> Dyadic {
        self.counts
            .iter()
            .find(|&&(bb, _)| bb == b)
            .map_or_else(Dyadic::zero, |&(_, c)| Dyadic::from_pow2(c, self.target - b))
    }

    pub fn is_zero(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Left factor of `Δ^{(k)}`: TASEP uses the `X0` curve and the site
/// `X0(k) + 1`; PushASEP uses the shifted-block curve and the site `X0(k)`.
pub fn f_k_factor(k: usize, x0: &ParticleConfig, variant: Variant) -> Result<LeftFactor> {
    check_k(x0, k)?;
    match variant {
        Variant::Tasep => LeftFactor::build(&EpigraphCurve::from_config(x0, k)?, k, x0.get(k) + 1),
        Variant::Push => {
            let moved = push_move(x0, k)?;
            LeftFactor::build(&EpigraphCurve::from_config(&moved, k)?, k, x0.get(k))
        }
    }
}

/// Left factor of the time derivative. For TASEP it is `f_k` itself; for
/// PushASEP the curve is the whole configuration shifted down by one.
pub fn f_hat_k_factor(k: usize, x0: &ParticleConfig, variant: Variant) -> Result<LeftFactor> {
    check_k(x0, k)?;
    match variant {
        Variant::Tasep => f_k_factor(k, x0, variant),
        Variant::Push => {
            let curve = EpigraphCurve::from_config(&x0.shifted(-1), k)?;
            LeftFactor::build(&curve, k, x0.get(k))
        }
    }
}

pub fn f_k(k: usize, z: i64, x0: &ParticleConfig, variant: Variant) -> Result<Dyadic> {
    Ok(f_k_factor(k, x0, variant)?.value(z))
}

pub fn f_hat_k(k: usize, z: i64, x0: &ParticleConfig, variant: Variant) -> Result<Dyadic> {
    Ok(f_hat_k_factor(k, x0, variant)?.value(z))
}

/// `z -> g^{(n)}_k(z)` or `ĝ^{(n)}_k(z)`, sharing one restarted hitting law.
#[derive(Debug, Clone)]
pub struct RightFactor {
    n: usize,
    k: usize,
    variant: Variant,
    hat: bool,
    dist: WalkHitDistribution,
    base: i64,
}

impl RightFactor {
    /// `None` when `k > n` (the factor vanishes).
    pub fn new(n: usize, k: usize, x0: &ParticleConfig, variant: Variant, hat: bool) -> Result<Option<Self>> {
        check_k(x0, k)?;
        if n > x0.len() {
            return Err(Error::domain(format!("n = {n} exceeds {} particles", x0.len())));
        }
        if k > n {
            return Ok(None);
        }
        let curve = EpigraphCurve::from_config(x0, n)?;
        let xk = x0.get(k);
        let start = match (variant, hat) {
            (Variant::Tasep, false) => xk + 1,
            _ => xk,
        };
        let base = match (variant, hat) {
            (Variant::Tasep, false) | (Variant::Push, true) => xk + 1,
            _ => xk,
        };
        let dist = hit_distribution_from(WalkStart::restarted(start, k - 1), &curve)?;
        Ok(Some(Self {
            n,
            k,
            variant,
            hat,
            dist,
            base,
        }))
    }

    /// `T` in `value(z) = 2^{z - T} conj(z)`.
    pub fn base(&self) -> i64 {
        self.base
    }

    fn shift(&self) -> i64 {
        if self.variant == Variant::Push && self.hat {
            1
        } else {
            0
        }
    }

    pub fn conj(&self, clock: Clock, family: KernelFamily, z: i64) -> Result<f64> {
        let level = (self.n - self.k + 1) as u32;
        let e = epi_conj(&self.dist, clock, family, self.n, z, self.shift())?;
        let s = sbar_conj(clock, family, level, z - self.base)?;
        Ok(match self.variant {
            Variant::Tasep => e - s,
            Variant::Push => s - e,
        })
    }

    /// Exact conjugated value at `t = 0`.
    pub fn conj_exact(&self, z: i64) -> BigRational {
        let level = (self.n - self.k + 1) as u32;
        let e = epi_conj_exact(&self.dist, self.n, z, self.shift());
        let s = qbar_conj_exact(level, self.base - z);
        match self.variant {
            Variant::Tasep => e - s,
            Variant::Push => s - e,
        }
    }

    pub fn value(&self, clock: Clock, family: KernelFamily, z: i64) -> Result<KernelValue> {
        Ok(KernelValue::new(self.conj(clock, family, z)?, z - self.base))
    }

    pub fn value_exact(&self, z: i64) -> BigRational {
        self.conj_exact(z) * crate::special::pow2_rational(z - self.base)
    }
}

fn right_value(
    hat: bool,
    n: usize,
    k: usize,
    z: i64,
    t: f64,
    x0: &ParticleConfig,
    rates: RateParams,
    variant: Variant,
) -> Result<KernelValue> {
    match RightFactor::new(n, k, x0, variant, hat)? {
        None => Ok(KernelValue::zero()),
        Some(r) => r.value(Clock::at(t, rates)?, KernelFamily::for_rates(rates), z),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn g_k(n: usize, k: usize, z: i64, t: f64, x0: &ParticleConfig, rates: RateParams, variant: Variant) -> Result<KernelValue> {
    right_value(false, n, k, z, t, x0, rates, variant)
}

#[allow(clippy::too_many_arguments)]
pub fn g_hat_k(n: usize, k: usize, z: i64, t: f64, x0: &ParticleConfig, rates: RateParams, variant: Variant) -> Result<KernelValue> {
    right_value(true, n, k, z, t, x0, rates, variant)
}

/// Exact `g^{(n)}_k(z)` at `t = 0`.
pub fn g_k_exact(n: usize, k: usize, z: i64, x0: &ParticleConfig, variant: Variant) -> Result<BigRational> {
    Ok(RightFactor::new(n, k, x0, variant, false)?
        .map_or_else(num_traits::Zero::zero, |r| r.value_exact(z)))
}

/// Exact `ĝ^{(n)}_k(z)` at `t = 0`.
pub fn g_hat_k_exact(n: usize, k: usize, z: i64, x0: &ParticleConfig, variant: Variant) -> Result<BigRational> {
    Ok(RightFactor::new(n, k, x0, variant, true)?
        .map_or_else(num_traits::Zero::zero, |r| r.value_exact(z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{constrained_propagator, sbar_epi};

    fn cfg(v: &[i64]) -> ParticleConfig {
        ParticleConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn f_examples() {
        let x0 = cfg(&[0, -1, -3, -4]);
        // blocked particle 2
        assert!(f_k_factor(2, &x0, Variant::Tasep).unwrap().is_zero());
        assert!(f_k(1, 1, &x0, Variant::Tasep).unwrap().is_one());
        // k = 3, site X0(3)+1 = -2 at time 2, from b: b <= 0, B_1 in (-2, b) and <= -1
        let f = f_k(3, 0, &x0, Variant::Tasep).unwrap();
        // paths 0 -> -1 -> -2: step probs 1/2 * 1/2
        assert_eq!(f, Dyadic::from_pow2(1, -2));
    }

    #[test]
    fn g_vanishes_beyond_n() {
        let x0 = cfg(&[0, -2, -3]);
        let v = g_k(2, 3, -4, 0.5, &x0, RateParams::TASEP, Variant::Tasep).unwrap();
        assert_eq!(v.to_f64(), 0.0);
        assert!(g_k_exact(1, 2, 0, &x0, Variant::Tasep).unwrap() == BigRational::from_integer(0.into()));
    }

    #[test]
    fn g_hat_is_twice_g_for_tasep() {
        for v in [[0i64, -2, -3, -6], [2, 1, -1, -2], [0, -1, -2, -3]] {
            let x0 = cfg(&v);
            for n in 1..=4 {
                for k in 1..=n {
                    for z in -10..3 {
                        let g = g_k_exact(n, k, z, &x0, Variant::Tasep).unwrap();
                        let gh = g_hat_k_exact(n, k, z, &x0, Variant::Tasep).unwrap();
                        assert_eq!(gh, g.clone() * BigRational::from_integer(2.into()), "{v:?} n={n} k={k} z={z}");
                        let gf = g_k(n, k, z, 0.9, &x0, RateParams::TASEP, Variant::Tasep).unwrap().to_f64();
                        let ghf = g_hat_k(n, k, z, 0.9, &x0, RateParams::TASEP, Variant::Tasep).unwrap().to_f64();
                        assert!((ghf - 2.0 * gf).abs() <= 1e-12 * ghf.abs().max(1e-3));
                    }
                }
            }
        }
    }

    #[test]
    fn single_site_perturbation_is_rank_one() {
        let x0 = cfg(&[1, -1, -2, -5]);
        let rates = RateParams::TASEP;
        let t = 0.6;
        for n in 1..=4 {
            for k in 1..=4 {
                let Some(moved) = perturbed(&x0, k, Variant::Tasep).unwrap() else { continue };
                for z1 in -6..4 {
                    for z2 in -8..2 {
                        let d = sbar_epi(t, n, &moved, z1, z2, rates).unwrap().to_f64()
                            - sbar_epi(t, n, &x0, z1, z2, rates).unwrap().to_f64();
                        let f = f_k(k, z1, &x0, Variant::Tasep).unwrap().to_f64();
                        let g = g_k(n, k, z2, t, &x0, rates, Variant::Tasep).unwrap().to_f64();
                        assert!((d - f * g).abs() < 1e-12 * d.abs().max(1.0), "n={n} k={k} {z1} {z2}: {d} vs {}", f * g);
                    }
                }
            }
        }
    }

    #[test]
    fn push_block_perturbation_is_rank_one() {
        let x0 = cfg(&[1, 0, -2, -3]);
        let rates = RateParams::new(0.5, 1.0).unwrap();
        let t = 0.4;
        for n in 1..=4 {
            for k in 1..=4 {
                let moved = perturbed(&x0, k, Variant::Push).unwrap().unwrap();
                for z1 in -6..4 {
                    for z2 in -8..2 {
                        let d = sbar_epi(t, n, &moved, z1, z2, rates).unwrap().to_f64()
                            - sbar_epi(t, n, &x0, z1, z2, rates).unwrap().to_f64();
                        let f = f_k(k, z1, &x0, Variant::Push).unwrap().to_f64();
                        let g = g_k(n, k, z2, t, &x0, rates, Variant::Push).unwrap().to_f64();
                        assert!((d - f * g).abs() < 1e-12 * d.abs().max(1.0), "n={n} k={k} {z1} {z2}: {d} vs {}", f * g);
                    }
                }
            }
        }
    }

    #[test]
    fn walk_doubling() {
        for v in [[0i64, -2, -3, -6, -7, -9], [3, 2, 0, -1, -4, -5]] {
            let x0 = cfg(&v);
            for n in 1..=6 {
                let curve = EpigraphCurve::from_config(&x0, n).unwrap();
                for k in 1..=n {
                    for z in x0.get(n) - 8..x0.get(n) {
                        let a = constrained_propagator(WalkStart::restarted(x0.get(k), k - 1), &curve, n, z).unwrap();
                        let b = constrained_propagator(WalkStart::restarted(x0.get(k) + 1, k - 1), &curve, n, z).unwrap();
                        assert_eq!(a, b.double());
                    }
                }
            }
        }
    }

    #[test]
    fn push_hat_relations() {
        // ĝ_k(z) = g_k(z - 1) exactly; f̂_k <= f_k pointwise
        let x0 = cfg(&[0, -1, -3, -4]);
        for n in 1..=4 {
            for k in 1..=n {
                for z in -10..2 {
                    let gh = g_hat_k_exact(n, k, z, &x0, Variant::Push).unwrap();
                    let g = g_k_exact(n, k, z - 1, &x0, Variant::Push).unwrap();
                    assert_eq!(gh, g);
                }
            }
        }
        for k in 1..=4 {
            for b in -6..4 {
                assert!(f_hat_k(k, b, &x0, Variant::Push).unwrap() <= f_k(k, b, &x0, Variant::Push).unwrap());
            }
        }
    }
}
