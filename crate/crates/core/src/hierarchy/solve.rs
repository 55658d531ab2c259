use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{ExpPolySum, Regime};
use crate::error::{Error, Result};
use crate::marginals::{lattice, sorted, CoeffEntry, CoeffTable};
use crate::simulator::InitialCondition;

/// Source of `F_k(n, 0)` for `k = n.len()`.
pub trait InitialCoefficients: Sync {
    /// `None` when the coefficient is not known (outside a stored lattice).
    fn initial(&self, tuple: &[i64]) -> Option<Complex64>;
}

impl InitialCoefficients for InitialCondition {
    fn initial(&self, tuple: &[i64]) -> Option<Complex64> {
        Some(self.coeff(tuple))
    }
}

/// Explicit initial tables, one per level starting at k = 1.
#[derive(Clone, Debug)]
pub struct InitialTables {
    tables: Vec<CoeffTable>,
}

impl InitialTables {
    pub fn new(tables: Vec<CoeffTable>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::domain("need at least the first-level table"));
        }
        for (i, table) in tables.iter().enumerate() {
            if table.k != i + 1 {
                return Err(Error::domain(format!("table {i} has level {}, expected {}", table.k, i + 1)));
            }
            table.check_invariants(1e-12)?;
            if i > 0 {
                let gap = table.marginal_gap(&tables[i - 1])?;
                if gap > 1e-10 {
                    return Err(Error::domain(format!(
                        "level {} does not reduce to level {i} (gap {gap:e})",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { tables })
    }

    pub fn k_max(&self) -> usize {
        self.tables.len()
    }
}

impl InitialCoefficients for InitialTables {
    fn initial(&self, tuple: &[i64]) -> Option<Complex64> {
        self.tables.get(tuple.len().checked_sub(1)?)?.value(tuple)
    }
}

/// Exact coefficients of every level `k <= k_max` on `|n_i| <= n_max`, plus
/// whatever out-of-lattice parents they needed. Keys are sorted tuples.
#[derive(Clone, Debug)]
pub struct HierarchySolution {
    regime: Regime,
    k_max: usize,
    n_max: i64,
    levels: Vec<BTreeMap<Vec<i64>, Option<ExpPolySum>>>,
}

/// Sorted parents of a sorted tuple with their summed source weights.
fn parents(regime: &Regime, tuple: &[i64]) -> Vec<(Vec<i64>, f64)> {
    let mut out: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let k = tuple.len();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut merged: Vec<i64> = Vec::with_capacity(k - 1);
            merged.extend(tuple.iter().enumerate().filter(|&(l, _)| l != i && l != j).map(|(_, &n)| n));
            merged.push(tuple[i] + tuple[j]);
            merged.sort_unstable();
            *out.entry(merged).or_insert(0.0) += regime.pair_weight(tuple[i], tuple[j]);
        }
    }
    out.into_iter().collect()
}

fn sorted_lattice(k: usize, n_max: i64) -> BTreeSet<Vec<i64>> {
    lattice(k, n_max).map(|t| sorted(&t)).collect()
}

/// Solves levels `1..=k_max` exactly.
///
/// Level k is `exp(rate_k t) F_k(n, 0)` plus, for each merged parent `p` with
/// weight `w`, `w * int_0^t exp(rate_k (t - s)) F_{k-1}(p, s) ds`. A tuple
/// whose initial value or any parent is unavailable is itself unavailable.
pub fn solve_hierarchy(
    regime: &Regime,
    initial: &dyn InitialCoefficients,
    k_max: usize,
    n_max: i64,
) -> Result<HierarchySolution> {
    regime.validate()?;
    if k_max == 0 || n_max < 0 {
        return Err(Error::domain("need k_max >= 1 and n_max >= 0"));
    }
    if k_max > regime.max_level() {
        return Err(Error::domain(format!("k_max = {k_max} exceeds the number of particles")));
    }
    let has_source = !matches!(regime, Regime::Unscaled { .. });

    // tuples needed per level, top-down
    let mut needed: Vec<BTreeSet<Vec<i64>>> = (1..=k_max).map(|k| sorted_lattice(k, n_max)).collect();
    if has_source {
        for k in (2..=k_max).rev() {
            let extra: Vec<Vec<i64>> =
                needed[k - 1].iter().flat_map(|t| parents(regime, t).into_iter().map(|(p, _)| p)).collect();
            needed[k - 2].extend(extra);
        }
    }

    let one = Complex64::new(1.0, 0.0);
    let mut levels: Vec<BTreeMap<Vec<i64>, Option<ExpPolySum>>> = Vec::with_capacity(k_max);
    for (idx, tuples) in needed.iter().enumerate() {
        let lower = idx.checked_sub(1).map(|i| &levels[i]);
        let tuples: Vec<&Vec<i64>> = tuples.iter().collect();
        let solved: Vec<(Vec<i64>, Option<ExpPolySum>)> = tuples
            .par_iter()
            .map(|&tuple| {
                if tuple.iter().all(|&n| n == 0) {
                    return (tuple.clone(), Some(ExpPolySum::constant(one)));
                }
                let rate = regime.level_rate(tuple);
                let solved = (|| {
                    let f0 = initial.initial(tuple)?;
                    let mut parts = vec![ExpPolySum::exp(f0, rate)];
                    if let (true, Some(lower)) = (has_source, lower) {
                        for (parent, weight) in parents(regime, tuple) {
                            let p = lower.get(&parent)?.as_ref()?;
                            parts.push(p.convolve_exp(rate).scale(Complex64::new(weight, 0.0)));
                        }
                    }
                    Some(ExpPolySum::sum(&parts))
                })();
                (tuple.clone(), solved)
            })
            .collect();
        levels.push(solved.into_iter().collect());
    }
    Ok(HierarchySolution { regime: regime.clone(), k_max, n_max, levels })
}

impl HierarchySolution {
    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    pub fn coeff(&self, tuple: &[i64]) -> Option<&ExpPolySum> {
        let level = self.levels.get(tuple.len().checked_sub(1)?)?;
        level.get(&sorted(tuple))?.as_ref()
    }

    pub fn eval(&self, tuple: &[i64], t: f64) -> Option<Complex64> {
        self.coeff(tuple).map(|c| c.eval(t))
    }

    /// Lattice tuples at level `k` that could not be solved.
    pub fn unavailable(&self, k: usize) -> Vec<Vec<i64>> {
        lattice(k, self.n_max).filter(|t| self.coeff(t).is_none()).collect()
    }

    /// Exact table at level `k` and time `t`; unavailable tuples are left out.
    pub fn table(&self, k: usize, t: f64) -> Result<CoeffTable> {
        if k == 0 || k > self.k_max {
            return Err(Error::domain(format!("level {k} outside 1..={}", self.k_max)));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::domain(format!("time must be >= 0, got {t}")));
        }
        let mut cache: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        let mut entries = BTreeMap::new();
        for tuple in lattice(k, self.n_max) {
            let key = sorted(&tuple);
            let value = match cache.get(&key) {
                Some(&v) => Some(v),
                None => {
                    let v = self.levels[k - 1].get(&key).and_then(|c| c.as_ref()).map(|c| c.eval(t));
                    if let Some(v) = v {
                        cache.insert(key, v);
                    }
                    v
                }
            };
            if let Some(value) = value {
                entries.insert(tuple, CoeffEntry::exact(value));
            }
        }
        Ok(CoeffTable { k, n_max: self.n_max, t, runs: 0, entries })
    }
}
