//! TASEP transition probabilities from Schütz's determinant formula.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{ObservationSpec, ParticleConfig};
use crate::error::{Error, Result};
use crate::lattice::g_schutz;
use crate::master::poisson_quantile;
use crate::special::ln_factorial;

pub const MAX_PARTICLES: usize = 6;
pub const MAX_TAIL: f64 = 1e-8;

/// Memoized `G_n(t, x)` at a fixed `t`.
struct GTable {
    t: f64,
    cache: HashMap<(i64, i64), f64>,
}

impl GTable {
    fn new(t: f64) -> Self {
        Self {
            t,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, n: i64, x: i64) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(n, x)) {
            return Ok(v);
        }
        let v = g_schutz(n, self.t, x)?.to_f64();
        self.cache.insert((n, x), v);
        Ok(v)
    }

    fn joint(&mut self, x0: &[i64], x: &[i64]) -> Result<f64> {
        let n = x0.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 1..=n {
            for j in 1..=n {
                m[(i - 1, j - 1)] = self.get(i as i64 - j as i64, x[n - i] - x0[n - j])?;
            }
        }
        Ok(m.determinant())
    }
}

fn check(x0: &ParticleConfig, targets: &ParticleConfig, t: f64) -> Result<()> {
    if x0.len() != targets.len() {
        return Err(Error::domain("targets and initial data differ in length"));
    }
    if x0.len() > MAX_PARTICLES {
        return Err(Error::domain(format!("at most {MAX_PARTICLES} particles")));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// `P(X_t = targets | X_0 = x0)` for TASEP.
pub fn schutz_joint_prob(x0: &ParticleConfig, targets: &ParticleConfig, t: f64) -> Result<f64> {
    check(x0, targets, t)?;
    GTable::new(t).joint(x0.positions(), targets.positions())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchutzResult {
    pub value: f64,
    /// `P(Poisson(t) > cap)`, the mass beyond `X_t(1) <= X0(1) + cap`.
    pub tail: f64,
    pub cap: usize,
    pub configurations: usize,
    /// Set when the tail exceeds [`MAX_TAIL`].
    pub flagged: bool,
}

/// Sum of Schütz probabilities over the event, with `X_t(1) <= X0(1) + cap`.
pub fn schutz_f(x0: &ParticleConfig, spec: &ObservationSpec, t: f64, cap: Option<usize>) -> Result<SchutzResult> {
    spec.check_against(x0)?;
    let sub = x0.prefix(spec.n_max())?;
    if sub.len() > 4 {
        return Err(Error::domain("the Schütz route is limited to n_m <= 4"));
    }
    check(&sub, &sub, t)?;
    let cap = cap.unwrap_or_else(|| poisson_quantile(t, 1e-12).max(1));
    let tail = 1.0 - (0..=cap as u64)
        .map(|k| if t == 0.0 { (k == 0) as u8 as f64 } else { (-t + k as f64 * t.ln() - ln_factorial(k)).exp() })
        .sum::<f64>();
    let tail = tail.max(0.0);
    let mut table = GTable::new(t);
    let x0v = sub.positions().to_vec();
    let mut acc = 0.0;
    let mut count = 0;
    let mut cur = Vec::with_capacity(x0v.len());
    walk_targets(&x0v, x0v[0] + cap as i64, spec, &mut cur, &mut |x| {
        count += 1;
        acc += table.joint(&x0v, x)?;
        Ok(())
    })?;
    Ok(SchutzResult {
        value: acc,
        tail,
        cap,
        configurations: count,
        flagged: tail > MAX_TAIL,
    })
}

/// Visits `x_1 > ... > x_N` with `X0(k) <= x_k`, `x_1 <= top`, inside the event.
fn walk_targets<F>(x0: &[i64], top: i64, spec: &ObservationSpec, cur: &mut Vec<i64>, visit: &mut F) -> Result<()>
where
    F: FnMut(&[i64]) -> Result<()>,
{
    let k = cur.len();
    if k == x0.len() {
        return visit(cur);
    }
    let hi = if k == 0 { top } else { cur[k - 1] - 1 };
    let mut lo = x0[k];
    if let Some(j) = spec.indices().iter().position(|&n| n == k + 1) {
        lo = lo.max(spec.levels()[j] + 1);
    }
    for x in lo..=hi {
        cur.push(x);
        walk_targets(x0, top, spec, cur, visit)?;
        cur.pop();
    }
    Ok(())
}
