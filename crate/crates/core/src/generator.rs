//! Generators of TASEP and PushASEP acting on functions of the configuration.

use crate::config::ParticleConfig;
use crate::error::{Error, Result};
use crate::lattice::RateParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    /// Jump one step right, suppressed when the target is occupied.
    Right,
    /// Jump one step left, pushing the packed block below.
    Push,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTerm {
    pub mover: usize,
    pub kind: MoveKind,
    pub moved: ParticleConfig,
    pub rate: f64,
}

/// Length of the packed block `X(k), X(k) - 1, ...` starting at label `k`.
pub fn block_length(x0: &ParticleConfig, k: usize) -> Result<usize> {
    if k == 0 || k > x0.len() {
        return Err(Error::domain(format!("label {k} out of range 1..={}", x0.len())));
    }
    let mut b = 1;
    while k + b <= x0.len() && x0.get(k + b) == x0.get(k) - b as i64 {
        b += 1;
    }
    Ok(b)
}

/// `X + e_k`, or `None` when particle `k` is blocked.
pub fn right_move(x0: &ParticleConfig, k: usize) -> Result<Option<ParticleConfig>> {
    if k == 0 || k > x0.len() {
        return Err(Error::domain(format!("label {k} out of range 1..={}", x0.len())));
    }
    if k > 1 && x0.get(k - 1) - x0.get(k) == 1 {
        return Ok(None);
    }
    let mut p = x0.positions().to_vec();
    p[k - 1] += 1;
    ParticleConfig::new(p).map(Some)
}

/// Particle `k` steps left and pushes its block.
pub fn push_move(x0: &ParticleConfig, k: usize) -> Result<ParticleConfig> {
    let b = block_length(x0, k)?;
    let mut p = x0.positions().to_vec();
    for v in &mut p[k - 1..k - 1 + b] {
        *v -= 1;
    }
    ParticleConfig::new(p)
}

/// All moves of labels `1..=n_max` with nonzero rate.
pub fn generator_terms(
    x0: &ParticleConfig,
    rates: RateParams,
    n_max: usize,
) -> Result<Vec<GeneratorTerm>> {
    if n_max > x0.len() {
        return Err(Error::domain(format!(
            "generator over {n_max} labels needs that many particles, have {}",
            x0.len()
        )));
    }
    let mut out = Vec::new();
    for k in 1..=n_max {
        if rates.r > 0.0 {
            if let Some(moved) = right_move(x0, k)? {
                out.push(GeneratorTerm {
                    mover: k,
                    kind: MoveKind::Right,
                    moved,
                    rate: rates.r,
                });
            }
        }
        if rates.l > 0.0 {
            out.push(GeneratorTerm {
                mover: k,
                kind: MoveKind::Push,
                moved: push_move(x0, k)?,
                rate: rates.l,
            });
        }
    }
    Ok(out)
}

/// `(L F)(X0)`, summing over labels `1..=n_max`.
pub fn apply_generator<F>(f: F, x0: &ParticleConfig, rates: RateParams, n_max: usize) -> Result<f64>
where
    F: Fn(&ParticleConfig) -> Result<f64>,
{
    let (right, push) = apply_generator_parts(f, x0, rates, n_max)?;
    Ok(right + push)
}

/// The right-jump and push parts of `(L F)(X0)`, each already multiplied by its rate.
pub fn apply_generator_parts<F>(
    f: F,
    x0: &ParticleConfig,
    rates: RateParams,
    n_max: usize,
) -> Result<(f64, f64)>
where
    F: Fn(&ParticleConfig) -> Result<f64>,
{
    let base = f(x0)?;
    let mut right = 0.0;
    let mut push = 0.0;
    for term in generator_terms(x0, rates, n_max)? {
        let d = term.rate * (f(&term.moved)? - base);
        match term.kind {
            MoveKind::Right => right += d,
            MoveKind::Push => push += d,
        }
    }
    Ok((right, push))
}
