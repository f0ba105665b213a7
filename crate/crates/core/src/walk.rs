//! The geometric down-walk `B` and its strict-epigraph hitting law.
//!
//! `B` jumps from `x` to `y < x` with probability `2^{y-x}`, so every path
//! from `p` to `y` has probability `2^{y-p}` regardless of its length and
//! the dynamic program only has to count paths. Counts are kept in `u128`.
//!
//! A walker at or below the minimum of the remaining curve can never hit,
//! so all such mass is lumped into a single dead state. The state space is
//! then the finite strip between the curve minimum and the start.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;

use crate::config::ParticleConfig;
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::lattice::{qbar_conj_exact, sbar_conj, Clock, KernelFamily, KernelValue, RateParams};

pub const MAX_WALK_WIDTH: i64 = 512;

/// The curve `k -> values[k]`, `k = 0..n-1`, whose strict epigraph is hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpigraphCurve {
    values: Vec<i64>,
}

impl EpigraphCurve {
    pub fn new(values: Vec<i64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("the epigraph curve must be nonempty"));
        }
        if values.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::domain("the epigraph curve must be strictly decreasing"));
        }
        Ok(Self { values })
    }

    /// `X0(1), ..., X0(n)`.
    pub fn from_config(x0: &ParticleConfig, n: usize) -> Result<Self> {
        Self::new(x0.prefix(n)?.positions().to_vec())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn min(&self) -> i64 {
        *self.values.last().expect("nonempty")
    }

    /// Minimum over times `>= s` (the curve is decreasing).
    fn floor_from(&self, s: usize) -> Option<i64> {
        (s < self.values.len()).then(|| self.min())
    }
}

/// Where and when the walk starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkStart {
    pub position: i64,
    pub time: usize,
    /// Whether a hit can be registered at the start time itself.
    pub check_at_start: bool,
}

impl WalkStart {
    pub fn at(position: i64) -> Self {
        Self {
            position,
            time: 0,
            check_at_start: true,
        }
    }

    /// Started at `time`, with hits only counted strictly later.
    pub fn restarted(position: i64, time: usize) -> Self {
        Self {
            position,
            time,
            check_at_start: false,
        }
    }
}

/// `P(τ = time, B_τ = site) = count * 2^{site - start}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HitEntry {
    pub time: usize,
    pub site: i64,
    pub count: u128,
}

/// Exact joint law of `(τ, B_τ)` on `{τ < n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkHitDistribution {
    pub start: WalkStart,
    pub horizon: usize,
    pub hits: Vec<HitEntry>,
    /// Walkers alive after the last check at time `n - 1`, still above the curve floor.
    pub survivors: Vec<(i64, u128)>,
    pub dead: Dyadic,
}

impl WalkHitDistribution {
    pub fn mass(&self, time: usize, site: i64) -> Dyadic {
        self.hits
            .iter()
            .filter(|h| h.time == time && h.site == site)
            .map(|h| self.dyadic(h.count, h.site))
            .sum()
    }

    fn dyadic(&self, count: u128, site: i64) -> Dyadic {
        Dyadic::from_pow2(count, site - self.start.position)
    }

    pub fn hit_mass(&self) -> Dyadic {
        self.hits.iter().map(|h| self.dyadic(h.count, h.site)).sum()
    }

    pub fn survival_mass(&self) -> Dyadic {
        self.survivors.iter().map(|&(y, c)| self.dyadic(c, y)).sum()
    }

    /// Hit + survival + dead; exactly one.
    pub fn total_mass(&self) -> Dyadic {
        &(&self.hit_mass() + &self.survival_mass()) + &self.dead
    }

    /// `P(τ = time, B_τ = site)` as an integer count (zero when absent).
    pub fn count(&self, time: usize, site: i64) -> u128 {
        self.hits
            .iter()
            .filter(|h| h.time == time && h.site == site)
            .map(|h| h.count)
            .sum()
    }
}

fn overflow() -> Error {
    Error::numeric("walk path counts", "u128 overflow")
}

pub fn hit_distribution(start: i64, curve: &EpigraphCurve) -> Result<WalkHitDistribution> {
    hit_distribution_from(WalkStart::at(start), curve)
}

/// Forward dynamic program over the strip above the curve floor.
pub fn hit_distribution_from(start: WalkStart, curve: &EpigraphCurve) -> Result<WalkHitDistribution> {
    let n = curve.len();
    let p = start.position;
    if p - curve.min() > MAX_WALK_WIDTH {
        return Err(Error::domain(format!(
            "walk strip {} exceeds the width cap {MAX_WALK_WIDTH}",
            p - curve.min()
        )));
    }
    let mut hits = Vec::new();
    let mut dead = Dyadic::zero();
    let mut alive: BTreeMap<i64, u128> = BTreeMap::new();
    let hopeless = start.check_at_start && curve.floor_from(start.time).is_some_and(|f| p <= f);
    if hopeless {
        dead = Dyadic::one();
    } else {
        alive.insert(p, 1);
    }
    let mut s = start.time;
    while s < n {
        if s > start.time || start.check_at_start {
            let level = curve.values[s];
            let hit: Vec<i64> = alive.range(level + 1..).map(|(&y, _)| y).collect();
            for y in hit {
                let c = alive.remove(&y).expect("present");
                hits.push(HitEntry {
                    time: s,
                    site: y,
                    count: c,
                });
            }
        }
        if s + 1 >= n {
            break;
        }
        let floor = curve.floor_from(s + 1).expect("s + 1 < n");
        // walkers jump into (floor, x); the rest of their mass dies
        let mut next: BTreeMap<i64, u128> = BTreeMap::new();
        let mut running: u128 = 0;
        let top = alive.keys().next_back().copied();
        if let Some(top) = top {
            let mut y = top - 1;
            while y > floor {
                if let Some(&c) = alive.get(&(y + 1)) {
                    running = running.checked_add(c).ok_or_else(overflow)?;
                }
                if running > 0 {
                    next.insert(y, running);
                }
                y -= 1;
            }
        }
        for (&x, &c) in &alive {
            let last = floor.min(x - 1);
            dead = &dead + &Dyadic::from_pow2(c, last + 1 - p);
        }
        alive = next;
        s += 1;
    }
    let survivors = alive.into_iter().rev().collect();
    Ok(WalkHitDistribution {
        start,
        horizon: n,
        hits,
        survivors,
        dead,
    })
}

/// `P(B_n = z, no hit at the checked times before n)`.
pub fn constrained_propagator(
    start: WalkStart,
    curve: &EpigraphCurve,
    n: usize,
    z: i64,
) -> Result<Dyadic> {
    let p = start.position;
    if n < start.time {
        return Err(Error::domain("target time precedes the start time"));
    }
    if p - z > MAX_WALK_WIDTH {
        return Err(Error::domain("walk strip exceeds the width cap"));
    }
    if z > p || (z == p && n > start.time) {
        return Ok(Dyadic::zero());
    }
    // counts[y - z] for y in [z, p]
    let width = (p - z) as usize + 1;
    let mut counts = vec![0u128; width];
    counts[width - 1] = 1;
    for s in start.time..n {
        let checked = s > start.time || start.check_at_start;
        if checked && s < curve.len() {
            let level = curve.values[s];
            for (i, c) in counts.iter_mut().enumerate() {
                if z + i as i64 > level {
                    *c = 0;
                }
            }
        }
        let mut next = vec![0u128; width];
        let mut running: u128 = 0;
        for i in (0..width - 1).rev() {
            running = running.checked_add(counts[i + 1]).ok_or_else(overflow)?;
            next[i] = running;
        }
        counts = next;
    }
    Ok(Dyadic::from_pow2(counts[0], z - p))
}

/// Conjugated `E[S̄_{n-τ}(B_τ + shift, z); τ < n]`; the full value is
/// `2^{z - start - shift}` times the return value.
pub fn epi_conj(
    dist: &WalkHitDistribution,
    clock: Clock,
    family: KernelFamily,
    n: usize,
    z: i64,
    shift: i64,
) -> Result<f64> {
    let mut acc = 0.0;
    for h in &dist.hits {
        if h.time < n {
            let v = sbar_conj(clock, family, (n - h.time) as u32, z - h.site - shift)?;
            acc += h.count as f64 * v;
        }
    }
    Ok(acc)
}

/// Exact `t = 0` counterpart of [`epi_conj`].
pub fn epi_conj_exact(dist: &WalkHitDistribution, n: usize, z: i64, shift: i64) -> BigRational {
    let mut acc = BigRational::zero();
    for h in &dist.hits {
        if h.time < n {
            let q = qbar_conj_exact((n - h.time) as u32, h.site + shift - z);
            acc += q * BigRational::from_integer(h.count.into());
        }
    }
    acc
}

/// `S̄^{epi(X0)}_{-t,n}(z1, z2)`.
pub fn sbar_epi(
    t: f64,
    n: usize,
    x0: &ParticleConfig,
    z1: i64,
    z2: i64,
    rates: RateParams,
) -> Result<KernelValue> {
    let curve = EpigraphCurve::from_config(x0, n)?;
    let dist = hit_distribution(z1, &curve)?;
    let clock = Clock::at(t, rates)?;
    let v = epi_conj(&dist, clock, KernelFamily::for_rates(rates), n, z2, 0)?;
    Ok(KernelValue::new(v, z2 - z1))
}
