//! Transient distribution of the first `n_m` particles by uniformization.
//!
//! Each particle is confined to a box `[X0(k) - cap_left, X0(k) + cap_right]`.
//! Moves leaving the boxes go to an absorbing sink, and the sink mass at
//! time `t` bounds the truncation error on any event probability.

use serde::{Deserialize, Serialize};

use crate::config::{ObservationSpec, ParticleConfig};
use crate::error::{Error, Result};
use crate::lattice::RateParams;
use crate::special::ln_factorial;

pub const DEFAULT_EPSILON: f64 = 1e-10;
pub const STATE_BUDGET: usize = 2_000_000;
const CAP_TAIL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    /// Box half-width; chosen from Poisson quantiles when absent.
    pub cap: Option<usize>,
    pub epsilon: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cap: None,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub p: f64,
    /// Poisson truncation `ε` plus the mass that escaped the boxes.
    pub bound: f64,
    pub escaped: f64,
    pub states: usize,
    pub steps: usize,
}

const SINK: usize = usize::MAX;

/// States of the first `N` particles inside their boxes, with the
/// off-diagonal rates in sparse form.
#[derive(Debug, Clone)]
pub struct TruncatedStateSpace {
    pub states: Vec<Vec<i64>>,
    /// `(target, rate)`; target [`SINK`] for moves leaving the boxes.
    pub transitions: Vec<Vec<(usize, f64)>>,
    pub cap_left: i64,
    pub cap_right: i64,
}

/// Smallest `c` with `P(Poisson(λ) > c) <= tail`.
pub fn poisson_quantile(lambda: f64, tail: f64) -> usize {
    if lambda <= 0.0 {
        return 0;
    }
    let mut c = 0usize;
    let mut cdf = 0.0;
    loop {
        cdf += (-lambda + c as f64 * lambda.ln() - ln_factorial(c as u64)).exp();
        if 1.0 - cdf <= tail || c > 100_000 {
            return c;
        }
        c += 1;
    }
}

impl TruncatedStateSpace {
    pub fn build(x0: &ParticleConfig, rates: RateParams, cap_left: i64, cap_right: i64, budget: usize) -> Result<Self> {
        let n = x0.len();
        let width = (cap_left + cap_right + 1) as usize;
        let dense = width.checked_pow(n as u32).filter(|&d| d <= budget.saturating_mul(8));
        if dense.is_none() {
            return Err(Error::StateBudget {
                states: usize::MAX,
                budget,
            });
        }
        let lo: Vec<i64> = (1..=n).map(|k| x0.get(k) - cap_left).collect();
        let hi: Vec<i64> = (1..=n).map(|k| x0.get(k) + cap_right).collect();
        let mut states = Vec::new();
        let mut cur = Vec::with_capacity(n);
        enumerate(&lo, &hi, &mut cur, &mut states, budget)?;
        let index = |s: &[i64]| -> usize {
            s.iter()
                .enumerate()
                .fold(0usize, |acc, (k, &x)| acc * width + (x - lo[k]) as usize)
        };
        let mut lookup = vec![u32::MAX; dense.expect("checked")];
        for (i, s) in states.iter().enumerate() {
            lookup[index(s)] = i as u32;
        }
        let inside = |s: &[i64]| s.iter().enumerate().all(|(k, &x)| x >= lo[k] && x <= hi[k]);
        let target = |s: &[i64]| if inside(s) { lookup[index(s)] as usize } else { SINK };
        let transitions = states
            .iter()
            .map(|s| {
                let mut out = Vec::new();
                for k in 0..n {
                    if rates.r > 0.0 && (k == 0 || s[k - 1] - s[k] > 1) {
                        let mut m = s.clone();
                        m[k] += 1;
                        out.push((target(&m), rates.r));
                    }
                    if rates.l > 0.0 {
                        let mut m = s.clone();
                        let mut b = 1;
                        while k + b < n && s[k + b] == s[k] - b as i64 {
                            b += 1;
                        }
                        for p in &mut m[k..k + b] {
                            *p -= 1;
                        }
                        out.push((target(&m), rates.l));
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            states,
            transitions,
            cap_left,
            cap_right,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &[i64]) -> Option<usize> {
        self.states.iter().position(|x| x == s)
    }
}

fn enumerate(lo: &[i64], hi: &[i64], cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>, budget: usize) -> Result<()> {
    let k = cur.len();
    if k == lo.len() {
        if out.len() >= budget {
            return Err(Error::StateBudget {
                states: out.len() + 1,
                budget,
            });
        }
        out.push(cur.clone());
        return Ok(());
    }
    let top = if k == 0 { hi[0] } else { hi[k].min(cur[k - 1] - 1) };
    for x in lo[k]..=top {
        cur.push(x);
        enumerate(lo, hi, cur, out, budget)?;
        cur.pop();
    }
    Ok(())
}

/// `P(X_t(n_j) > a_j ∀j)` for the chain restricted to the first `n_m` particles.
pub fn master_equation_oracle(
    x0: &ParticleConfig,
    spec: &ObservationSpec,
    rates: RateParams,
    t: f64,
    cfg: &OracleConfig,
) -> Result<OracleResult> {
    spec.check_against(x0)?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if !(cfg.epsilon > 0.0) {
        return Err(Error::Config("oracle epsilon must be positive".into()));
    }
    let sub = x0.prefix(spec.n_max())?;
    let n = sub.len();
    if t == 0.0 {
        return Ok(OracleResult {
            p: spec.holds(sub.positions()) as u8 as f64,
            bound: 0.0,
            escaped: 0.0,
            states: 1,
            steps: 0,
        });
    }
    let (cap_left, cap_right) = match cfg.cap {
        Some(c) => (
            if rates.l > 0.0 { c as i64 } else { 0 },
            if rates.r > 0.0 { c as i64 } else { 0 },
        ),
        None => (
            poisson_quantile(n as f64 * rates.l * t, CAP_TAIL) as i64,
            poisson_quantile(rates.r * t, CAP_TAIL) as i64,
        ),
    };
    let space = TruncatedStateSpace::build(&sub, rates, cap_left, cap_right, STATE_BUDGET)?;
    let lambda = n as f64 * rates.total();
    let lt = lambda * t;
    let steps = poisson_quantile(lt, cfg.epsilon);
    let event: Vec<bool> = space.states.iter().map(|s| spec.holds(s)).collect();
    let start = space.index_of(sub.positions()).expect("start lies in its box");
    let mut p = vec![0.0; space.len()];
    p[start] = 1.0;
    let mut sink = 0.0;
    let mut prob = 0.0;
    let mut escaped = 0.0;
    let mut next = vec![0.0; space.len()];
    for k in 0..=steps {
        let w = (-lt + k as f64 * lt.ln() - ln_factorial(k as u64)).exp();
        prob += w * p.iter().zip(&event).filter(|(_, &e)| e).map(|(v, _)| v).sum::<f64>();
        escaped += w * sink;
        if k == steps {
            break;
        }
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let mut stay = mass;
            for &(j, rate) in &space.transitions[i] {
                let flow = mass * rate / lambda;
                stay -= flow;
                if j == SINK {
                    sink += flow;
                } else {
                    next[j] += flow;
                }
            }
            next[i] += stay;
        }
        std::mem::swap(&mut p, &mut next);
    }
    Ok(OracleResult {
        p: prob,
        bound: cfg.epsilon + escaped,
        escaped,
        states: space.len(),
        steps,
    })
}
