//! Particle configurations and observation events.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Positions `X(1) > X(2) > ... > X(N)`, indexed from 1 in the accessors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i64>", into = "Vec<i64>")]
pub struct ParticleConfig {
    positions: Vec<i64>,
}

impl ParticleConfig {
    pub fn new(positions: Vec<i64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::domain("a configuration needs at least one particle"));
        }
        if let Some(w) = positions.windows(2).find(|w| w[0] <= w[1]) {
            return Err(Error::domain(format!(
                "positions must be strictly decreasing, found {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Self { positions })
    }

    /// Packed configuration `X(k) = top - (k - 1)`.
    pub fn packed(top: i64, n: usize) -> Self {
        Self {
            positions: (0..n as i64).map(|k| top - k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `X(k)`, 1-based.
    pub fn get(&self, k: usize) -> i64 {
        self.positions[k - 1]
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// The first `n` particles.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::domain(format!(
                "prefix length {n} out of range 1..={}",
                self.len()
            )));
        }
        Ok(Self {
            positions: self.positions[..n].to_vec(),
        })
    }

    /// Every position shifted by `s`.
    pub fn shifted(&self, s: i64) -> Self {
        Self {
            positions: self.positions.iter().map(|x| x + s).collect(),
        }
    }
}

impl TryFrom<Vec<i64>> for ParticleConfig {
    type Error = Error;
    fn try_from(v: Vec<i64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ParticleConfig> for Vec<i64> {
    fn from(c: ParticleConfig) -> Self {
        c.positions
    }
}

/// The event `{X_t(n_j) > a_j, j = 1..m}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationSpec {
    indices: Vec<usize>,
    levels: Vec<i64>,
}

impl ObservationSpec {
    pub fn new(indices: Vec<usize>, levels: Vec<i64>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::domain("an observation needs at least one index"));
        }
        if indices.len() != levels.len() {
            return Err(Error::domain(format!(
                "{} indices but {} levels",
                indices.len(),
                levels.len()
            )));
        }
        if indices[0] == 0 || indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "indices must be positive and strictly increasing",
            ));
        }
        Ok(Self { indices, levels })
    }

    pub fn single(n: usize, a: i64) -> Result<Self> {
        Self::new(vec![n], vec![a])
    }

    pub fn m(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn levels(&self) -> &[i64] {
        &self.levels
    }

    pub fn n_max(&self) -> usize {
        *self.indices.last().expect("nonempty")
    }

    /// Checks that the configuration has at least `n_m` particles.
    pub fn check_against(&self, x0: &ParticleConfig) -> Result<()> {
        if self.n_max() > x0.len() {
            return Err(Error::domain(format!(
                "observation index {} exceeds the {} particles of the configuration",
                self.n_max(),
                x0.len()
            )));
        }
        Ok(())
    }

    /// Whether `x` lies in the event.
    pub fn holds(&self, x: &[i64]) -> bool {
        self.indices
            .iter()
            .zip(&self.levels)
            .all(|(&n, &a)| x[n - 1] > a)
    }
}
