//! Event-driven Monte Carlo for the first `n_m` particles.
//!
//! Each particle carries its own exponential clock of rate `r + ℓ` and its
//! own random stream, keyed by `(seed, sample, label)`. Simulating extra
//! particles below therefore leaves the trajectories of the first ones
//! untouched, which is how the autonomy of the leading particles is tested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ObservationSpec, ParticleConfig};
use crate::error::{Error, Result};
use crate::lattice::RateParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub t: f64,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64, t: f64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Config("at least one sample is required".into()));
        }
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
        }
        Ok(Self { samples, seed, t })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

fn particle_rng(seed: u64, sample: u64, label: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng.set_word_pos((label as u128) << 48);
    rng
}

/// One trajectory of the whole configuration `x0` up to time `t`.
pub fn simulate(x0: &ParticleConfig, rates: RateParams, t: f64, seed: u64, sample: u64) -> Result<Vec<i64>> {
    let mut pos = x0.positions().to_vec();
    let total = rates.total();
    if t == 0.0 || total == 0.0 {
        return Ok(pos);
    }
    let clock = Exp::new(total).map_err(|e| Error::numeric("exponential clock", e.to_string()))?;
    let p_right = rates.r / total;
    let mut rngs: Vec<ChaCha8Rng> = (0..pos.len()).map(|k| particle_rng(seed, sample, k)).collect();
    let mut next: Vec<f64> = rngs.iter_mut().map(|g| clock.sample(g)).collect();
    loop {
        let (k, &time) = next
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty configuration");
        if time > t {
            return Ok(pos);
        }
        let rng = &mut rngs[k];
        if rng.random::<f64>() < p_right {
            if k == 0 || pos[k - 1] - pos[k] > 1 {
                pos[k] += 1;
            }
        } else {
            let mut b = 1;
            while k + b < pos.len() && pos[k + b] == pos[k] - b as i64 {
                b += 1;
            }
            for p in &mut pos[k..k + b] {
                *p -= 1;
            }
        }
        next[k] = time + clock.sample(rng);
    }
}

/// Sample mean of the event indicator and its binomial standard error.
pub fn mc_estimate(x0: &ParticleConfig, spec: &ObservationSpec, rates: RateParams, cfg: &McConfig) -> Result<McEstimate> {
    spec.check_against(x0)?;
    let sub = x0.prefix(spec.n_max())?;
    let hits = (0..cfg.samples)
        .into_par_iter()
        .map(|s| simulate(&sub, rates, cfg.t, cfg.seed, s).map(|x| spec.holds(&x) as u64))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let n = cfg.samples as f64;
    let p_hat = hits as f64 / n;
    Ok(McEstimate {
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / n).sqrt(),
        hits,
        samples: cfg.samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[i64]) -> ParticleConfig {
        ParticleConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn time_zero_is_indicator() {
        let x0 = cfg(&[0, -1, -3]);
        let spec = ObservationSpec::new(vec![1, 3], vec![-1, -4]).unwrap();
        let e = mc_estimate(&x0, &spec, RateParams::TASEP, &McConfig::new(100, 1, 0.0).unwrap()).unwrap();
        assert_eq!((e.p_hat, e.stderr), (1.0, 0.0));
        let spec = ObservationSpec::new(vec![1, 3], vec![-1, -3]).unwrap();
        let e = mc_estimate(&x0, &spec, RateParams::TASEP, &McConfig::new(100, 1, 0.0).unwrap()).unwrap();
        assert_eq!((e.p_hat, e.stderr), (0.0, 0.0));
    }

    #[test]
    fn poisson_counter() {
        let spec = ObservationSpec::single(1, 0).unwrap();
        let e = mc_estimate(&cfg(&[0]), &spec, RateParams::TASEP, &McConfig::new(200_000, 7, 1.0).unwrap()).unwrap();
        let exact = 1.0 - (-1f64).exp();
        assert!((e.p_hat - exact).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn left_jumps_only() {
        // X_t(1) = X0(1) - Poisson(t): P(X_t(1) > -2) = P(Poisson(1.5) <= 1)
        let spec = ObservationSpec::single(1, -2).unwrap();
        let rates = RateParams::new(0.0, 1.0).unwrap();
        let e = mc_estimate(&cfg(&[0]), &spec, rates, &McConfig::new(200_000, 3, 1.5).unwrap()).unwrap();
        let exact = (-1.5f64).exp() * 2.5;
        assert!((e.p_hat - exact).abs() < 4.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn deterministic_under_seed() {
        let x0 = cfg(&[0, -1, -2]);
        let spec = ObservationSpec::single(3, -2).unwrap();
        let rates = RateParams::new(1.0, 1.0).unwrap();
        let c = McConfig::new(5000, 11, 1.0).unwrap();
        assert_eq!(mc_estimate(&x0, &spec, rates, &c).unwrap(), mc_estimate(&x0, &spec, rates, &c).unwrap());
    }

    #[test]
    fn leading_particles_are_autonomous() {
        let short = cfg(&[2, 0, -1]);
        let long = cfg(&[2, 0, -1, -2, -4]);
        for rates in [RateParams::TASEP, RateParams::new(0.7, 1.1).unwrap()] {
            for s in 0..200 {
                let a = simulate(&short, rates, 2.0, 5, s).unwrap();
                let b = simulate(&long, rates, 2.0, 5, s).unwrap();
                assert_eq!(a[..], b[..3]);
            }
        }
    }
}
