//! The extended kernel on `{n_1, ..., n_m} × ℤ`, its Fredholm determinant,
//! and the rank-one machinery for generator and time-derivative checks.
//!
//! All matrices are stored conjugated: entry `(x, y)` holds
//! `2^{x-y} K(x, y)`. With this choice every power of two cancels (walk
//! path probabilities are `count · 2^{end - start}`), so the stored entries
//! are sums of path counts times kernel coefficients. Determinants and
//! traces are invariant under the conjugation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ObservationSpec, ParticleConfig};
use crate::error::{Error, Result};
use crate::lattice::{s_conj, sbar_conj, Clock, KernelFamily, RateParams};
use crate::proof_terms::{f_hat_k_factor, f_k_factor, perturbed, LeftFactor, RightFactor, Variant};
use crate::special::{binomial, ldexp};
use crate::walk::{hit_distribution, EpigraphCurve};

const TAIL_REL: f64 = 1e-17;
const TAIL_RUN: usize = 5;
const TAIL_MAX: i64 = 4000;
/// Below this `|det|` the resolvent is treated as unusable.
pub const SINGULAR_DET: f64 = 1e-8;

/// Per-level windows `[a_j - depth, a_j]` and the doubling schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowPlan {
    pub depth: usize,
    pub growth: usize,
    pub tol: f64,
    pub max_depth: usize,
}

impl Default for WindowPlan {
    fn default() -> Self {
        Self {
            depth: 32,
            growth: 2,
            tol: 1e-10,
            max_depth: 512,
        }
    }
}

impl WindowPlan {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.growth < 2 || self.max_depth < self.depth || !(self.tol > 0.0) {
            return Err(Error::Config(format!("invalid window plan {self:?}")));
        }
        Ok(())
    }

    pub fn ranges(spec: &ObservationSpec, depth: usize) -> Vec<(i64, i64)> {
        spec.levels().iter().map(|&a| (a - depth as i64, a)).collect()
    }
}

/// A determinant problem: initial data, event, rates and kernel formulas.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub x0: ParticleConfig,
    pub spec: ObservationSpec,
    pub rates: RateParams,
    pub family: KernelFamily,
}

impl Problem {
    pub fn new(x0: ParticleConfig, spec: ObservationSpec, rates: RateParams, family: KernelFamily) -> Result<Self> {
        spec.check_against(&x0)?;
        if family == KernelFamily::Tasep && rates.l != 0.0 {
            return Err(Error::domain("closed-form kernels cannot carry a push rate"));
        }
        Ok(Self {
            x0,
            spec,
            rates,
            family,
        })
    }

    pub fn tasep(x0: ParticleConfig, spec: ObservationSpec) -> Result<Self> {
        Self::new(x0, spec, RateParams::TASEP, KernelFamily::Tasep)
    }

    /// PushASEP kernels (always the general series, even when `ℓ = 0`).
    pub fn push(x0: ParticleConfig, spec: ObservationSpec, rates: RateParams) -> Result<Self> {
        Self::new(x0, spec, rates, KernelFamily::General)
    }

    pub fn with_x0(&self, x0: ParticleConfig) -> Self {
        Self { x0, ..self.clone() }
    }

    pub fn clock(&self, t: f64) -> Result<Clock> {
        Clock::at(t, self.rates)
    }
}

/// Dense realization of `χ̄_a K χ̄_a` on the windows.
#[derive(Debug, Clone)]
pub struct ExtendedKernelMatrix {
    pub ranges: Vec<(i64, i64)>,
    pub offsets: Vec<usize>,
    pub matrix: DMatrix<f64>,
    pub conjugated: bool,
}

impl ExtendedKernelMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn index(&self, block: usize, x: i64) -> Option<usize> {
        let (lo, hi) = self.ranges[block];
        (lo..=hi).contains(&x).then(|| self.offsets[block] + (x - lo) as usize)
    }

    pub fn entry(&self, i: usize, x: i64, j: usize, y: i64) -> Option<f64> {
        Some(self.matrix[(self.index(i, x)?, self.index(j, y)?)])
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (r0, c0) = (self.offsets[i], self.offsets[j]);
        let rows = (self.ranges[i].1 - self.ranges[i].0 + 1) as usize;
        let cols = (self.ranges[j].1 - self.ranges[j].0 + 1) as usize;
        self.matrix.view((r0, c0), (rows, cols)).into_owned()
    }

    /// `det(I - M)`.
    pub fn fredholm_det(&self) -> f64 {
        let n = self.dim();
        (DMatrix::identity(n, n) - &self.matrix).determinant()
    }

    /// Site of every row/column, for converting between conjugations.
    pub fn sites(&self) -> Vec<(usize, i64)> {
        self.ranges
            .iter()
            .enumerate()
            .flat_map(|(b, &(lo, hi))| (lo..=hi).map(move |x| (b, x)))
            .collect()
    }
}

fn layout(ranges: &[(i64, i64)]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(ranges.len());
    let mut acc = 0;
    for &(lo, hi) in ranges {
        offsets.push(acc);
        acc += (hi - lo + 1) as usize;
    }
    (offsets, acc)
}

/// `s_conj(n, m)` for `m` in `[m_lo, m_hi]`.
struct SRow {
    m_lo: i64,
    values: Vec<f64>,
}

impl SRow {
    fn new(clock: Clock, family: KernelFamily, n: u32, m_lo: i64, m_hi: i64) -> Result<Self> {
        let values = (m_lo..=m_hi)
            .into_par_iter()
            .map(|m| s_conj(clock, family, n, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m_lo, values })
    }

    fn get(&self, m: i64) -> f64 {
        if m < self.m_lo {
            return 0.0;
        }
        self.values.get((m - self.m_lo) as usize).copied().unwrap_or(0.0)
    }
}

/// How far below `m = 0` the `S` coefficients still matter. The factor
/// `(1 + |m| + span)^growth` allows for the polynomial growth of the
/// `S̄` side as the contraction index moves up.
fn s_tail_cut(clock: Clock, family: KernelFamily, n: u32, span: i64, growth: u32) -> Result<i64> {
    if family == KernelFamily::Tasep || clock.beta == 0.0 {
        return Ok(0);
    }
    let mut peak: f64 = 0.0;
    for m in 0..=n as i64 + span {
        peak = peak.max(s_conj(clock, family, n, m)?.abs());
    }
    let mut run = 0;
    for p in 1..TAIL_MAX {
        let v = s_conj(clock, family, n, -p)?.abs();
        peak = peak.max(v);
        let weight = ((1 + p + span) as f64).powi(growth as i32);
        if v * weight <= TAIL_REL * peak {
            run += 1;
            if run >= TAIL_RUN {
                return Ok(p);
            }
        } else {
            run = 0;
        }
    }
    Err(Error::numeric("kernel contraction tail", format!("no cut within {TAIL_MAX} terms (n = {n})")))
}

/// Contraction range `[b_lo, b_hi]` for every block and the shared `S` rows.
struct Contraction {
    b_lo: Vec<i64>,
    b_hi: Vec<i64>,
    s_rows: Vec<SRow>,
}

fn contraction(problem: &Problem, clock: Clock, ranges: &[(i64, i64)]) -> Result<Contraction> {
    let ns = problem.spec.indices();
    let m = ns.len();
    let b_lo: Vec<i64> = ns.iter().map(|&n| problem.x0.get(n) + 1).collect();
    let lo_min = ranges.iter().map(|r| r.0).min().expect("m >= 1");
    let top = ranges.iter().map(|r| r.1).max().expect("m >= 1");
    let n_top = *ns.last().expect("m >= 1");
    let mut b_hi = vec![i64::MIN; m];
    let mut cuts = Vec::with_capacity(m);
    for i in 0..m {
        let span = top + n_top as i64 - lo_min;
        let cut = s_tail_cut(clock, problem.family, ns[i] as u32, span, n_top as u32)?;
        cuts.push(cut);
        let hi_i = ranges[i].1 + ns[i] as i64 + cut;
        for hj in b_hi.iter_mut() {
            *hj = (*hj).max(hi_i);
        }
    }
    let b_top = *b_hi.iter().max().expect("m >= 1");
    let b_bottom = *b_lo.iter().min().expect("m >= 1");
    let mut s_rows = Vec::with_capacity(m);
    for i in 0..m {
        let n = ns[i] as i64;
        let m_lo = n + ranges[i].0 - b_top;
        let m_hi = n + ranges[i].1 - b_bottom;
        s_rows.push(SRow::new(clock, problem.family, ns[i] as u32, m_lo.min(m_hi), m_hi)?);
    }
    Ok(Contraction { b_lo, b_hi, s_rows })
}

/// `E_j(b, y)`: conjugated `S̄^{epi}` rows for `b` in `[b_lo, b_hi]`.
fn epi_block(
    problem: &Problem,
    clock: Clock,
    level: usize,
    b_lo: i64,
    b_hi: i64,
    range: (i64, i64),
) -> Result<DMatrix<f64>> {
    let curve = EpigraphCurve::from_config(&problem.x0, level)?;
    let (lo, hi) = range;
    let cols = (hi - lo + 1) as usize;
    if b_hi < b_lo {
        return Ok(DMatrix::zeros(0, cols));
    }
    // S̄ coefficients indexed by (level', y - site)
    let d_lo = lo - b_hi;
    let d_hi = hi - b_lo;
    let mut table = Vec::with_capacity(level);
    for nn in 1..=level {
        let row = (d_lo..=d_hi)
            .into_par_iter()
            .map(|d| sbar_conj(clock, problem.family, nn as u32, d))
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    let rows: Vec<Vec<f64>> = (b_lo..=b_hi)
        .into_par_iter()
        .map(|b| -> Result<Vec<f64>> {
            let dist = hit_distribution(b, &curve)?;
            let mut row = vec![0.0; cols];
            for h in &dist.hits {
                let coeffs = &table[level - h.time - 1];
                let c = h.count as f64;
                for (col, y) in (lo..=hi).enumerate() {
                    row[col] += c * coeffs[(y - h.site - d_lo) as usize];
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

/// Conjugated (or plain) extended kernel on the given windows.
pub fn assemble_kernel(
    problem: &Problem,
    clock: Clock,
    ranges: &[(i64, i64)],
    conjugated: bool,
) -> Result<ExtendedKernelMatrix> {
    let ns = problem.spec.indices();
    let m = ns.len();
    if ranges.len() != m {
        return Err(Error::domain("one window per observation level is required"));
    }
    let (offsets, dim) = layout(ranges);
    let con = contraction(problem, clock, ranges)?;
    let mut matrix = DMatrix::zeros(dim, dim);
    for j in 0..m {
        let (ylo, yhi) = ranges[j];
        let epi = epi_block(problem, clock, ns[j], con.b_lo[j], con.b_hi[j], ranges[j])?;
        for i in 0..m {
            let (xlo, xhi) = ranges[i];
            let ni = ns[i] as i64;
            let rows = (xhi - xlo + 1) as usize;
            let b_count = epi.nrows();
            let s = DMatrix::from_fn(rows, b_count, |r, c| {
                let x = xlo + r as i64;
                let b = con.b_lo[j] + c as i64;
                con.s_rows[i].get(ni + x - b)
            });
            let mut block = s * &epi;
            if ns[i] < ns[j] {
                let d = (ns[j] - ns[i]) as u64;
                for (r, x) in (xlo..=xhi).enumerate() {
                    for (c, y) in (ylo..=yhi).enumerate() {
                        if x - y >= d as i64 {
                            block[(r, c)] -= binomial((x - y - 1) as u64, d - 1);
                        }
                    }
                }
            }
            matrix
                .view_mut((offsets[i], offsets[j]), (rows, (yhi - ylo + 1) as usize))
                .copy_from(&block);
        }
    }
    if !matrix.iter().all(|v| v.is_finite()) {
        return Err(Error::numeric("kernel assembly", "non-finite kernel entry"));
    }
    let mut out = ExtendedKernelMatrix {
        ranges: ranges.to_vec(),
        offsets,
        matrix,
        conjugated: true,
    };
    if !conjugated {
        out = unconjugate(out);
    }
    Ok(out)
}

/// Entry `(x, y)` multiplied by `2^{y-x}`, giving plain kernel values.
pub fn unconjugate(mut k: ExtendedKernelMatrix) -> ExtendedKernelMatrix {
    if !k.conjugated {
        return k;
    }
    let sites = k.sites();
    for (r, &(_, x)) in sites.iter().enumerate() {
        for (c, &(_, y)) in sites.iter().enumerate() {
            k.matrix[(r, c)] = ldexp(k.matrix[(r, c)], y - x);
        }
    }
    k.conjugated = false;
    k
}

/// Outcome of the window-doubling loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetResult {
    pub value: f64,
    pub converged: bool,
    /// `|det_d - det_{d/growth}|` at the last doubling.
    pub error_estimate: f64,
    pub depth: usize,
    pub history: Vec<(usize, f64)>,
}

/// Deepens the window until successive determinants agree to `plan.tol`.
pub fn fredholm_det<F>(plan: &WindowPlan, mut builder: F) -> Result<DetResult>
where
    F: FnMut(usize) -> Result<DMatrix<f64>>,
{
    plan.validate()?;
    let det_of = |m: DMatrix<f64>| {
        let n = m.nrows();
        (DMatrix::identity(n, n) - m).determinant()
    };
    let mut depth = plan.depth;
    let mut prev = det_of(builder(depth)?);
    let mut history = vec![(depth, prev)];
    loop {
        let next_depth = depth * plan.growth;
        if next_depth > plan.max_depth {
            log::warn!("determinant not converged at depth {depth}");
            let err = history
                .len()
                .checked_sub(2)
                .map_or(f64::INFINITY, |i| (history[i + 1].1 - history[i].1).abs());
            return Ok(DetResult {
                value: prev,
                converged: false,
                error_estimate: err,
                depth,
                history,
            });
        }
        let cur = det_of(builder(next_depth)?);
        history.push((next_depth, cur));
        let inc = (cur - prev).abs();
        depth = next_depth;
        if inc < plan.tol {
            return Ok(DetResult {
                value: cur,
                converged: true,
                error_estimate: inc,
                depth,
                history,
            });
        }
        prev = cur;
    }
}

/// `F_t` with its convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    /// Clamped to `[0, 1]`.
    pub value: f64,
    pub raw: f64,
    pub converged: bool,
    pub error_estimate: f64,
    pub depth: usize,
    /// Whether `raw` lies in `[-ε, 1 + ε]`, `ε = 10 · error + roundoff`.
    pub in_bounds: bool,
    pub history: Vec<(usize, f64)>,
}

/// Determinant at a given clock (the general entry point).
pub fn f_at_clock(problem: &Problem, clock: Clock, plan: &WindowPlan) -> Result<Probability> {
    let det = fredholm_det(plan, |depth| {
        let ranges = WindowPlan::ranges(&problem.spec, depth);
        Ok(assemble_kernel(problem, clock, &ranges, true)?.matrix)
    })?;
    let eps = 10.0 * det.error_estimate + 1e-12;
    Ok(Probability {
        value: det.value.clamp(0.0, 1.0),
        raw: det.value,
        converged: det.converged,
        error_estimate: det.error_estimate,
        depth: det.depth,
        in_bounds: det.value >= -eps && det.value <= 1.0 + eps,
        history: det.history,
    })
}

/// `F_t(X0; a, n) = P(X_t(n_j) > a_j, j = 1..m)`.
pub fn f_t(t: f64, problem: &Problem, plan: &WindowPlan) -> Result<Probability> {
    f_at_clock(problem, problem.clock(t)?, plan)
}

// ---------------------------------------------------------------------------
// Rank-one updates

/// `U(p, q) = left[p] · right[q]` over the extended index, conjugated like
/// the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneUpdate {
    pub left: DVector<f64>,
    pub right: DVector<f64>,
}

impl RankOneUpdate {
    pub fn zero(dim: usize) -> Self {
        Self {
            left: DVector::zeros(dim),
            right: DVector::zeros(dim),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }

    pub fn is_zero(&self) -> bool {
        self.left.iter().all(|&v| v == 0.0) || self.right.iter().all(|&v| v == 0.0)
    }
}

pub fn materialize(updates: &[RankOneUpdate], dim: usize) -> DMatrix<f64> {
    updates
        .iter()
        .fold(DMatrix::zeros(dim, dim), |acc, u| acc + u.to_dense())
}

/// Row vector `x -> Σ_b s_conj(n_i, n_i + x - b) count_b` over all blocks.
fn left_vector(problem: &Problem, clock: Clock, ranges: &[(i64, i64)], f: &LeftFactor) -> Result<DVector<f64>> {
    let (offsets, dim) = layout(ranges);
    let mut v = DVector::zeros(dim);
    if f.is_zero() {
        return Ok(v);
    }
    for (i, &n) in problem.spec.indices().iter().enumerate() {
        let (lo, hi) = ranges[i];
        for (r, x) in (lo..=hi).enumerate() {
            let mut acc = 0.0;
            for &(b, c) in &f.counts {
                acc += s_conj(clock, problem.family, n as u32, n as i64 + x - b)? * c as f64;
            }
            v[offsets[i] + r] = acc;
        }
    }
    Ok(v)
}

/// Column vector of `g^{(n_j)}_k` (or `ĝ`) in each block, rescaled so that
/// the outer product with [`left_vector`] is conjugated like the kernel.
fn right_vector(
    problem: &Problem,
    clock: Clock,
    ranges: &[(i64, i64)],
    k: usize,
    variant: Variant,
    hat: bool,
    target: i64,
    weight: f64,
) -> Result<DVector<f64>> {
    let (offsets, dim) = layout(ranges);
    let mut v = DVector::zeros(dim);
    for (j, &n) in problem.spec.indices().iter().enumerate() {
        let Some(g) = RightFactor::new(n, k, &problem.x0, variant, hat)? else {
            continue;
        };
        let scale = weight * ldexp(1.0, target - g.base());
        let (lo, hi) = ranges[j];
        for (c, z) in (lo..=hi).enumerate() {
            v[offsets[j] + c] = scale * g.conj(clock, problem.family, z)?;
        }
    }
    Ok(v)
}

/// `Δ^{(k)} = K(X̃0) - K(X0)` as an outer product, for the move of `variant`.
pub fn delta_k(problem: &Problem, clock: Clock, ranges: &[(i64, i64)], k: usize, variant: Variant) -> Result<RankOneUpdate> {
    let (_, dim) = layout(ranges);
    if k > problem.spec.n_max() {
        return Ok(RankOneUpdate::zero(dim));
    }
    let f = f_k_factor(k, &problem.x0, variant)?;
    let left = left_vector(problem, clock, ranges, &f)?;
    let right = right_vector(problem, clock, ranges, k, variant, false, f.target, 1.0)?;
    Ok(RankOneUpdate { left, right })
}

/// `Σ_k Δ^{(k)}` weighted by the rates: `r Σ Δ^{right} + ℓ Σ Δ^{push}`,
/// returned per part.
pub fn delta_sum_parts(problem: &Problem, clock: Clock, ranges: &[(i64, i64)]) -> Result<(Vec<RankOneUpdate>, Vec<RankOneUpdate>)> {
    let n_max = problem.spec.n_max();
    let mut right = Vec::new();
    let mut push = Vec::new();
    for k in 1..=n_max {
        if problem.rates.r > 0.0 {
            right.push(delta_k(problem, clock, ranges, k, Variant::Tasep)?);
        }
        if problem.rates.l > 0.0 {
            push.push(delta_k(problem, clock, ranges, k, Variant::Push)?);
        }
    }
    Ok((right, push))
}

/// `∂K/∂α` and `∂K/∂β` as sums of rank-one terms:
/// `½ Σ_k S* f_k ⊗ ĝ_k` (right jumps) and `2 Σ_k S* f̂_k ⊗ ĝ_k` (pushes).
pub fn dk_parts(problem: &Problem, clock: Clock, ranges: &[(i64, i64)]) -> Result<(Vec<RankOneUpdate>, Vec<RankOneUpdate>)> {
    let n_max = problem.spec.n_max();
    let mut alpha = Vec::new();
    let mut beta = Vec::new();
    for k in 1..=n_max {
        if problem.rates.r > 0.0 {
            let f = f_k_factor(k, &problem.x0, Variant::Tasep)?;
            let left = left_vector(problem, clock, ranges, &f)?;
            let right = right_vector(problem, clock, ranges, k, Variant::Tasep, true, f.target, 0.5)?;
            alpha.push(RankOneUpdate { left, right });
        }
        if problem.rates.l > 0.0 {
            let f = f_hat_k_factor(k, &problem.x0, Variant::Push)?;
            let left = left_vector(problem, clock, ranges, &f)?;
            let right = right_vector(problem, clock, ranges, k, Variant::Push, true, f.target, 2.0)?;
            beta.push(RankOneUpdate { left, right });
        }
    }
    Ok((alpha, beta))
}

fn scaled(updates: Vec<RankOneUpdate>, w: f64) -> impl Iterator<Item = RankOneUpdate> {
    updates.into_iter().map(move |mut u| {
        u.right *= w;
        u
    })
}

/// `dK/dt = r ∂K/∂α + ℓ ∂K/∂β`.
pub fn dk_dt(problem: &Problem, clock: Clock, ranges: &[(i64, i64)]) -> Result<Vec<RankOneUpdate>> {
    let (a, b) = dk_parts(problem, clock, ranges)?;
    Ok(scaled(a, problem.rates.r).chain(scaled(b, problem.rates.l)).collect())
}

/// `r Σ Δ^{right} + ℓ Σ Δ^{push}`.
pub fn delta_sum(problem: &Problem, clock: Clock, ranges: &[(i64, i64)]) -> Result<Vec<RankOneUpdate>> {
    let (a, b) = delta_sum_parts(problem, clock, ranges)?;
    Ok(scaled(a, problem.rates.r).chain(scaled(b, problem.rates.l)).collect())
}

/// LU of `I - M`, reused for several traces.
pub struct Resolvent {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub det: f64,
}

impl Resolvent {
    pub fn new(projected: &DMatrix<f64>) -> Result<Self> {
        let n = projected.nrows();
        let lu = (DMatrix::identity(n, n) - projected).lu();
        let det = lu.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(Error::Singular(format!("det(I - K) = {det}")));
        }
        Ok(Self { lu, det })
    }

    /// `tr[(I - M)^{-1} u ⊗ v] = v · (I - M)^{-1} u`.
    pub fn trace_rank_one(&self, u: &RankOneUpdate) -> Result<f64> {
        let x = self
            .lu
            .solve(&u.left)
            .ok_or_else(|| Error::Singular("resolvent solve failed".into()))?;
        Ok(u.right.dot(&x))
    }

    pub fn trace(&self, updates: &[RankOneUpdate]) -> Result<f64> {
        updates.iter().map(|u| self.trace_rank_one(u)).sum()
    }

    pub fn trace_dense(&self, dense: &DMatrix<f64>) -> Result<f64> {
        let x = self
            .lu
            .solve(dense)
            .ok_or_else(|| Error::Singular("resolvent solve failed".into()))?;
        Ok(x.trace())
    }
}

/// `tr[(I - M)^{-1} U]` for a sum of rank-one terms.
pub fn resolvent_trace(projected: &DMatrix<f64>, updates: &[RankOneUpdate]) -> Result<f64> {
    Resolvent::new(projected)?.trace(updates)
}

/// `tr[(I - M)^{-1} U]` for a dense `U`.
pub fn resolvent_trace_dense(projected: &DMatrix<f64>, update: &DMatrix<f64>) -> Result<f64> {
    Resolvent::new(projected)?.trace_dense(update)
}

/// The derivative and generator values obtained through traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRoutes {
    pub det: f64,
    /// `-det · tr[(I-K)^{-1} dK/dt]`
    pub df_dt: f64,
    /// `-det · tr[(I-K)^{-1} Σ rate Δ^{(k)}]`
    pub generator: f64,
    pub depth: usize,
}

/// Evaluates both trace formulas on the window of depth `depth`.
pub fn trace_routes(problem: &Problem, clock: Clock, depth: usize) -> Result<TraceRoutes> {
    let ranges = WindowPlan::ranges(&problem.spec, depth);
    let k = assemble_kernel(problem, clock, &ranges, true)?;
    let res = Resolvent::new(&k.matrix)?;
    if res.det.abs() < SINGULAR_DET {
        return Err(Error::Singular(format!("|det| = {:e} below {SINGULAR_DET:e}", res.det.abs())));
    }
    let dk = dk_dt(problem, clock, &ranges)?;
    let deltas = delta_sum(problem, clock, &ranges)?;
    Ok(TraceRoutes {
        det: res.det,
        df_dt: -res.det * res.trace(&dk)?,
        generator: -res.det * res.trace(&deltas)?,
        depth,
    })
}

/// `F` for the perturbed configuration `X̃0` (used by direct checks).
pub fn perturbed_problem(problem: &Problem, k: usize, variant: Variant) -> Result<Option<Problem>> {
    Ok(perturbed(&problem.x0, k, variant)?.map(|x| problem.with_x0(x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: &[i64]) -> ParticleConfig {
        ParticleConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn anchor_single_particle() {
        let p = Problem::tasep(cfg(&[0]), ObservationSpec::single(1, 0).unwrap()).unwrap();
        let f = f_t(1.0, &p, &WindowPlan::default()).unwrap();
        assert!((f.value - (1.0 - (-1f64).exp())).abs() < 1e-12, "{f:?}");
        assert!(f.converged && f.in_bounds);
    }

    #[test]
    fn initial_values() {
        let x0 = cfg(&[0, -1, -3]);
        let plan = WindowPlan::default();
        let below = Problem::tasep(x0.clone(), ObservationSpec::new(vec![1, 3], vec![-1, -4]).unwrap()).unwrap();
        assert!((f_t(0.0, &below, &plan).unwrap().value - 1.0).abs() < 1e-12);
        let above = Problem::tasep(x0, ObservationSpec::new(vec![1, 3], vec![-1, -3]).unwrap()).unwrap();
        assert!(f_t(0.0, &above, &plan).unwrap().value.abs() < 1e-12);
    }

    #[test]
    fn conjugation_invariance() {
        let p = Problem::push(cfg(&[0, -1, -3]), ObservationSpec::new(vec![1, 3], vec![0, -4]).unwrap(), RateParams::new(1.0, 0.5).unwrap()).unwrap();
        let clock = p.clock(0.7).unwrap();
        let ranges = WindowPlan::ranges(&p.spec, 12);
        let a = assemble_kernel(&p, clock, &ranges, true).unwrap();
        let b = assemble_kernel(&p, clock, &ranges, false).unwrap();
        assert!((a.fredholm_det() - b.fredholm_det()).abs() < 1e-12);
    }

    #[test]
    fn rank_one_trace_routes_agree() {
        let p = Problem::tasep(cfg(&[-1, -2, -3]), ObservationSpec::new(vec![1, 3], vec![-1, -3]).unwrap()).unwrap();
        let clock = p.clock(1.0).unwrap();
        let ranges = WindowPlan::ranges(&p.spec, 16);
        let k = assemble_kernel(&p, clock, &ranges, true).unwrap();
        let res = Resolvent::new(&k.matrix).unwrap();
        for kk in 1..=3 {
            let u = delta_k(&p, clock, &ranges, kk, Variant::Tasep).unwrap();
            let a = res.trace_rank_one(&u).unwrap();
            let b = res.trace_dense(&u.to_dense()).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
        }
        let zero = RankOneUpdate::zero(k.dim());
        assert_eq!(res.trace_rank_one(&zero).unwrap(), 0.0);
        let m0 = DMatrix::zeros(k.dim(), k.dim());
        let u = delta_k(&p, clock, &ranges, 3, Variant::Tasep).unwrap();
        let t = resolvent_trace_dense(&m0, &u.to_dense()).unwrap();
        assert!((t - u.to_dense().trace()).abs() < 1e-14);
    }

    #[test]
    fn delta_is_kernel_difference() {
        for (x0, rates, variant, family) in [
            (cfg(&[0, -2, -3, -5]), RateParams::TASEP, Variant::Tasep, KernelFamily::Tasep),
            (cfg(&[0, -1, -3, -4]), RateParams::new(0.0, 1.0).unwrap(), Variant::Push, KernelFamily::General),
        ] {
            let p = Problem::new(x0, ObservationSpec::new(vec![2, 4], vec![-2, -4]).unwrap(), rates, family).unwrap();
            let clock = Clock::new(0.8, 0.6).unwrap();
            let clock = if family == KernelFamily::Tasep { Clock::new(0.8, 0.0).unwrap() } else { clock };
            let ranges = WindowPlan::ranges(&p.spec, 12);
            let k = assemble_kernel(&p, clock, &ranges, true).unwrap();
            for kk in 1..=5 {
                let u = delta_k(&p, clock, &ranges, kk, variant).unwrap();
                match perturbed_problem(&p, kk.min(4), variant).unwrap() {
                    Some(q) if kk <= 4 => {
                        let kq = assemble_kernel(&q, clock, &ranges, true).unwrap();
                        let diff = (&kq.matrix - &k.matrix - u.to_dense()).amax();
                        assert!(diff < 1e-10, "k={kk}: {diff}");
                    }
                    _ => assert!(u.is_zero()),
                }
            }
        }
    }

    #[test]
    fn blocked_particle_has_zero_update() {
        let p = Problem::tasep(cfg(&[0, -1, -3]), ObservationSpec::single(3, -3).unwrap()).unwrap();
        let ranges = WindowPlan::ranges(&p.spec, 8);
        let u = delta_k(&p, p.clock(0.5).unwrap(), &ranges, 2, Variant::Tasep).unwrap();
        assert!(u.left.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kolmogorov_chain_agrees() {
        use crate::generator::apply_generator;
        let plan = WindowPlan::default();
        for (x0, rates, family, t) in [
            (cfg(&[-1, -2, -3]), RateParams::TASEP, KernelFamily::Tasep, 1.0),
            (cfg(&[0, -1, -3]), RateParams::new(1.0, 0.5).unwrap(), KernelFamily::General, 0.6),
        ] {
            let p = Problem::new(x0, ObservationSpec::new(vec![1, 3], vec![-1, -3]).unwrap(), rates, family).unwrap();
            let f = |t: f64| f_t(t, &p, &plan).unwrap().raw;
            let h = 1e-3;
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            let base = f_t(t, &p, &plan).unwrap();
            let tr = trace_routes(&p, p.clock(t).unwrap(), base.depth).unwrap();
            let gen = apply_generator(|x| Ok(f_t(t, &p.with_x0(x.clone()), &plan)?.raw), &p.x0, rates, 3).unwrap();
            assert!((tr.det - base.raw).abs() < 1e-10);
            assert!((fd - tr.df_dt).abs() < 1e-6, "{fd} {}", tr.df_dt);
            assert!((gen - tr.generator).abs() < 1e-9, "{gen} {}", tr.generator);
            assert!((gen - tr.df_dt).abs() < 1e-9, "{gen} {}", tr.df_dt);
        }
    }
}
