//! Real-space form of the strong-limit solution.
//!
//! In the strong limit every pair of "blocks" merges at rate `2 lambda`, so
//! the level-k density at time t is a mixture over set partitions `pi` of the
//! k slots: angles in one block coincide, and the block angles follow the
//! initial `f_{|pi|}`. The weight of `pi` factors into the probability of
//! having `|pi|` blocks left (a pure-death chain with rates `lambda j (j-1)`)
//! and the probability of `pi` given its size under uniform pair merges.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{ExpPolySum, HierarchySolution, InitialCoefficients, Regime};
use crate::error::{Error, Result};

/// Largest level handled; the number of set partitions grows like Bell(k).
pub const MAX_MIXTURE_LEVEL: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct BlockComponent {
    /// Partition of the slots `0..k`, blocks and their members sorted.
    pub blocks: Vec<Vec<usize>>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrongLimitMixture {
    pub k: usize,
    pub t: f64,
    pub lambda: f64,
    /// `level_weights[j - 1]` is the probability of `j` blocks.
    pub level_weights: Vec<f64>,
    pub components: Vec<BlockComponent>,
}

impl StrongLimitMixture {
    pub fn total_mass(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Weight left on the initial density `f_k` itself.
    pub fn initial_weight(&self) -> f64 {
        self.level_weights[self.k - 1]
    }

    /// Weight of the component with all k angles equal.
    pub fn diagonal_weight(&self) -> f64 {
        self.level_weights[0]
    }

    /// Fourier coefficient of the mixture at `tuple`, using `initial` for the
    /// block densities.
    pub fn fourier_coeff(&self, tuple: &[i64], initial: &dyn InitialCoefficients) -> Result<Complex64> {
        if tuple.len() != self.k {
            return Err(Error::domain(format!("tuple has length {}, expected {}", tuple.len(), self.k)));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for c in &self.components {
            let merged: Vec<i64> = c.blocks.iter().map(|b| b.iter().map(|&i| tuple[i]).sum()).collect();
            let v = initial
                .initial(&merged)
                .ok_or_else(|| Error::domain(format!("initial coefficient at {merged:?} unavailable")))?;
            total += v * c.weight;
        }
        Ok(total)
    }
}

/// Block-count weights `w_{k, j}(t)` for `j = 1..=k`.
fn level_weights(lambda: f64, k: usize) -> Vec<ExpPolySum> {
    let one = Complex64::new(1.0, 0.0);
    // w[j-1] for the current level m
    let mut w = vec![ExpPolySum::constant(one)];
    for m in 2..=k {
        let rate = -lambda * (m * (m - 1)) as f64;
        let feed = Complex64::new(lambda * (m * (m - 1)) as f64, 0.0);
        let mut next: Vec<ExpPolySum> = w.iter().map(|p| p.convolve_exp(rate).scale(feed)).collect();
        next.push(ExpPolySum::exp(one, rate));
        w = next;
    }
    w
}

fn canonical(mut blocks: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort();
    blocks
}

/// Distribution over partitions with a given number of blocks, reached from
/// singletons by uniform pair merges. Index `j - 1` holds partitions with `j`
/// blocks.
pub(crate) fn partition_laws(k: usize) -> Vec<BTreeMap<Vec<Vec<usize>>, f64>> {
    let mut laws = vec![BTreeMap::new(); k];
    let start: Vec<Vec<usize>> = (0..k).map(|i| vec![i]).collect();
    laws[k - 1].insert(start, 1.0);
    for j in (2..=k).rev() {
        let pairs = (j * (j - 1) / 2) as f64;
        let current = std::mem::take(&mut laws[j - 1]);
        for (blocks, p) in &current {
            for a in 0..j {
                for b in (a + 1)..j {
                    let mut next: Vec<Vec<usize>> = Vec::with_capacity(j - 1);
                    for (i, block) in blocks.iter().enumerate() {
                        if i != a && i != b {
                            next.push(block.clone());
                        }
                    }
                    let mut joined = blocks[a].clone();
                    joined.extend(&blocks[b]);
                    next.push(joined);
                    *laws[j - 2].entry(canonical(next)).or_insert(0.0) += p / pairs;
                }
            }
        }
        laws[j - 1] = current;
    }
    laws
}

/// Mixture decomposition of the level-`k` strong-limit density at time `t`.
pub fn limit_density_k(solution: &HierarchySolution, k: usize, t: f64) -> Result<StrongLimitMixture> {
    let Regime::StrongLimit { lambda } = *solution.regime() else {
        return Err(Error::domain(format!("mixture form needs the strong limit, not {}", solution.regime().name())));
    };
    if k == 0 || k > MAX_MIXTURE_LEVEL {
        return Err(Error::domain(format!("k must be in 1..={MAX_MIXTURE_LEVEL}")));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain(format!("time must be >= 0, got {t}")));
    }
    let level_weights: Vec<f64> = level_weights(lambda, k).iter().map(|w| w.eval(t).re).collect();
    let components = partition_laws(k)
        .into_iter()
        .enumerate()
        .flat_map(|(idx, law)| {
            let w = level_weights[idx];
            law.into_iter().map(move |(blocks, p)| BlockComponent { blocks, weight: w * p })
        })
        .collect();
    Ok(StrongLimitMixture { k, t, lambda, level_weights, components })
}
