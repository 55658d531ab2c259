//! Fourier coefficients of k-particle marginals.
//!
//! A [`CoeffTable`] holds `F_k(n_1, ..., n_k)` on the lattice `|n_i| <= n_max`,
//! either exactly (analytic tables, no standard errors) or as Monte Carlo
//! estimates over an ensemble of runs.
//!
//! The empirical estimator is the U-statistic over ordered k-tuples of
//! distinct particles. With power sums `A(m) = sum_i exp(-i m theta_i)` it is
//! computed without enumerating tuples, by inclusion-exclusion over set
//! partitions of the k slots:
//!
//! ```text
//! sum_{distinct i_1..i_k} prod_j exp(-i n_j theta_{i_j})
//!     = sum_{pi} mu(pi) prod_{B in pi} A(sum_{j in B} n_j),
//! mu(pi) = prod_B (-1)^{|B|-1} (|B|-1)!
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::rng_for_run;
use crate::summation::{ComplexSum, NeumaierSum};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffEntry {
    pub value: Complex64,
    /// Standard error across runs; `None` for exact values.
    pub stderr: Option<f64>,
}

impl CoeffEntry {
    pub fn exact(value: Complex64) -> Self {
        Self { value, stderr: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffTable {
    pub k: usize,
    pub n_max: i64,
    pub t: f64,
    /// Number of runs behind an empirical table, 0 for analytic tables.
    pub runs: usize,
    pub entries: BTreeMap<Vec<i64>, CoeffEntry>,
}

/// All tuples of length `k` with entries in `[-n_max, n_max]`, in
/// lexicographic order.
pub fn lattice(k: usize, n_max: i64) -> impl Iterator<Item = Vec<i64>> {
    let side = (2 * n_max + 1) as usize;
    let count = side.checked_pow(k as u32).unwrap_or(usize::MAX);
    (0..count).map(move |mut idx| {
        let mut tuple = vec![0i64; k];
        for slot in tuple.iter_mut().rev() {
            *slot = (idx % side) as i64 - n_max;
            idx /= side;
        }
        tuple
    })
}

/// Canonical representative of a tuple under permutations.
pub fn sorted(tuple: &[i64]) -> Vec<i64> {
    let mut s = tuple.to_vec();
    s.sort_unstable();
    s
}

fn negated(tuple: &[i64]) -> Vec<i64> {
    tuple.iter().map(|n| -n).collect()
}

impl CoeffTable {
    /// Exact table from a coefficient function, evaluated once per
    /// permutation/conjugation class.
    pub fn from_fn<F>(k: usize, n_max: i64, t: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&[i64]) -> Result<Complex64>,
    {
        check_shape(k, n_max)?;
        let classes = representatives(k, n_max);
        let mut values = BTreeMap::new();
        for rep in classes {
            let v = if rep.iter().all(|&n| n == 0) { ONE } else { f(&rep)? };
            values.insert(rep, v);
        }
        Ok(Self::expand(k, n_max, t, 0, &values, CoeffEntry::exact))
    }

    fn expand<V: Copy>(
        k: usize,
        n_max: i64,
        t: f64,
        runs: usize,
        values: &BTreeMap<Vec<i64>, V>,
        make: impl Fn(V) -> CoeffEntry,
    ) -> Self {
        let entries = lattice(k, n_max)
            .map(|tuple| {
                let s = sorted(&tuple);
                let entry = match values.get(&s) {
                    Some(&v) => make(v),
                    None => {
                        let mut e = make(values[&sorted(&negated(&s))]);
                        e.value = e.value.conj();
                        e
                    }
                };
                (tuple, entry)
            })
            .collect();
        Self { k, n_max, t, runs, entries }
    }

    pub fn is_empirical(&self) -> bool {
        self.entries.values().any(|e| e.stderr.is_some())
    }

    pub fn get(&self, tuple: &[i64]) -> Option<&CoeffEntry> {
        self.entries.get(tuple)
    }

    pub fn value(&self, tuple: &[i64]) -> Option<Complex64> {
        self.entries.get(tuple).map(|e| e.value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_stderr(&self) -> f64 {
        self.entries.values().filter_map(|e| e.stderr).fold(0.0, f64::max)
    }

    /// Checks normalization, conjugate symmetry and permutation symmetry to
    /// absolute tolerance `tol`. Empirical tables must have the zero entry
    /// exactly 1 as well, since the estimator fixes it.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let zero = vec![0i64; self.k];
        match self.value(&zero) {
            Some(v) if (v - ONE).norm() <= tol => {}
            Some(v) => return Err(Error::domain(format!("mass entry is {v}, expected 1"))),
            None => return Err(Error::domain("table has no mass entry")),
        }
        for (tuple, entry) in &self.entries {
            if !(entry.value.re.is_finite() && entry.value.im.is_finite()) {
                return Err(Error::domain(format!("non-finite entry at {tuple:?}")));
            }
            if let Some(mirror) = self.value(&negated(tuple)) {
                if (mirror - entry.value.conj()).norm() > tol {
                    return Err(Error::domain(format!("conjugate symmetry fails at {tuple:?}")));
                }
            }
            if let Some(canon) = self.value(&sorted(tuple)) {
                if (canon - entry.value).norm() > tol {
                    return Err(Error::domain(format!("permutation symmetry fails at {tuple:?}")));
                }
            }
            if let Some(se) = entry.stderr {
                if !(se >= 0.0 && se.is_finite()) {
                    return Err(Error::domain(format!("bad standard error {se} at {tuple:?}")));
                }
            }
        }
        Ok(())
    }

    /// Largest deviation between this table with a trailing zero index and
    /// `lower` at the truncated tuple.
    pub fn marginal_gap(&self, lower: &CoeffTable) -> Result<f64> {
        if lower.k + 1 != self.k {
            return Err(Error::domain(format!("levels {} and {} are not adjacent", lower.k, self.k)));
        }
        let n = self.n_max.min(lower.n_max);
        let mut worst = 0.0f64;
        for tuple in lattice(lower.k, n) {
            let mut ext = tuple.clone();
            ext.push(0);
            let (Some(a), Some(b)) = (self.value(&ext), lower.value(&tuple)) else { continue };
            worst = worst.max((a - b).norm());
        }
        Ok(worst)
    }

    /// Pools tables of the same `(k, n_max, t)` weighted by their run counts.
    /// Standard errors combine as `sqrt(sum r_i^2 se_i^2) / sum r_i`.
    pub fn merge(tables: &[CoeffTable]) -> Result<CoeffTable> {
        let first = tables.first().ok_or_else(|| Error::domain("nothing to merge"))?;
        for t in tables {
            if t.k != first.k || t.n_max != first.n_max || t.t.to_bits() != first.t.to_bits() {
                return Err(Error::domain("cannot merge tables with different k, n_max or t"));
            }
            if t.runs == 0 || !t.is_empirical() {
                return Err(Error::domain("only empirical tables with a run count can be merged"));
            }
            if t.entries.len() != first.entries.len() {
                return Err(Error::domain("tables cover different tuples"));
            }
        }
        let total: usize = tables.iter().map(|t| t.runs).sum();
        let total_f = total as f64;
        let mut entries = BTreeMap::new();
        for tuple in first.entries.keys() {
            let mut mean = ComplexSum::new();
            let mut var = NeumaierSum::new();
            for t in tables {
                let e = t.get(tuple).ok_or_else(|| Error::domain(format!("tuple {tuple:?} missing")))?;
                let w = t.runs as f64;
                mean.add(e.value * w);
                var.add((w * e.stderr.unwrap_or(0.0)).powi(2));
            }
            let entry = CoeffEntry { value: mean.value() / total_f, stderr: Some(var.value().sqrt() / total_f) };
            entries.insert(tuple.clone(), entry);
        }
        let zero = vec![0i64; first.k];
        entries.insert(zero, CoeffEntry { value: ONE, stderr: Some(0.0) });
        Ok(CoeffTable { k: first.k, n_max: first.n_max, t: first.t, runs: total, entries })
    }

    /// Writes `n1..nk,re,im,stderr,t`; analytic tables leave `stderr` empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.k).map(|i| format!("n{i}")).collect();
        header.extend(["re", "im", "stderr", "t"].map(String::from));
        w.write_record(&header)?;
        for (tuple, e) in &self.entries {
            let mut row: Vec<String> = tuple.iter().map(|n| n.to_string()).collect();
            row.push(format!("{:e}", e.value.re));
            row.push(format!("{:e}", e.value.im));
            row.push(e.stderr.map(|s| format!("{s:e}")).unwrap_or_default());
            row.push(self.t.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`CoeffTable::write_csv`]. The run count is
    /// not stored in the file and comes back as 0.
    pub fn read_csv<R: Read>(reader: R) -> Result<CoeffTable> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let k = header.iter().take_while(|h| h.starts_with('n')).count();
        let expected: Vec<String> = (1..=k)
            .map(|i| format!("n{i}"))
            .chain(["re", "im", "stderr", "t"].map(String::from))
            .collect();
        if k == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::domain(format!("unexpected coefficient header {header:?}")));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::domain(format!("bad {what} `{s}`: {e}")))
        };
        let mut entries = BTreeMap::new();
        let mut t = None;
        let mut n_max = 0;
        for record in r.records() {
            let record = record?;
            let tuple = record
                .iter()
                .take(k)
                .map(|s| s.trim().parse::<i64>().map_err(|e| Error::domain(format!("bad index `{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            n_max = tuple.iter().fold(n_max, |m, n| m.max(n.abs()));
            let value = Complex64::new(parse(&record[k], "re")?, parse(&record[k + 1], "im")?);
            let stderr = match record[k + 2].trim() {
                "" => None,
                s => Some(parse(s, "stderr")?),
            };
            let row_t = parse(&record[k + 3], "t")?;
            if t.is_some_and(|t: f64| t != row_t) {
                return Err(Error::domain("coefficient file mixes several times"));
            }
            t = Some(row_t);
            entries.insert(tuple, CoeffEntry { value, stderr });
        }
        let t = t.ok_or_else(|| Error::domain("empty coefficient file"))?;
        Ok(CoeffTable { k, n_max, t, runs: 0, entries })
    }
}

fn check_shape(k: usize, n_max: i64) -> Result<()> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if n_max < 0 {
        return Err(Error::domain("n_max must be nonnegative"));
    }
    Ok(())
}

/// Sorted tuples that are lexicographically no larger than their sorted
/// negation: one per permutation/conjugation class.
fn representatives(k: usize, n_max: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(k: usize, lo: i64, hi: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            if *cur <= sorted(&negated(cur)) {
                out.push(cur.clone());
            }
            return;
        }
        for n in lo..=hi {
            cur.push(n);
            rec(k, n, hi, cur, out);
            cur.pop();
        }
    }
    rec(k, -n_max, n_max, &mut cur, &mut out);
    out
}

/// How the estimator visits particle tuples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TupleSampling {
    /// Every ordered tuple of distinct particles (exact U-statistic).
    Exhaustive,
    /// A fixed number of random distinct tuples per configuration.
    Random { per_config: usize },
}

#[derive(Clone, Debug)]
struct Partition {
    weight: f64,
    blocks: Vec<Vec<usize>>,
}

fn set_partitions(k: usize) -> Vec<Partition> {
    fn rec(i: usize, k: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Partition>) {
        if i == k {
            let weight = blocks
                .iter()
                .map(|b| {
                    let f: f64 = (1..b.len()).map(|x| x as f64).product();
                    if b.len() % 2 == 0 { -f } else { f }
                })
                .product();
            out.push(Partition { weight, blocks: blocks.clone() });
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, k, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, k, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, k, &mut Vec::new(), &mut out);
    out
}

/// Monte Carlo estimator of k-marginal coefficients from an ensemble of
/// configurations (one configuration per run).
#[derive(Clone, Debug)]
pub struct Estimator {
    k: usize,
    n_max: i64,
    sampling: TupleSampling,
    partitions: Vec<Partition>,
    classes: Vec<Vec<i64>>,
}

impl Estimator {
    pub fn new(k: usize, n_max: i64, sampling: TupleSampling) -> Result<Self> {
        check_shape(k, n_max)?;
        if let TupleSampling::Random { per_config: 0 } = sampling {
            return Err(Error::domain("tuples per configuration must be at least 1"));
        }
        Ok(Self { k, n_max, sampling, partitions: set_partitions(k), classes: representatives(k, n_max) })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_max(&self) -> i64 {
        self.n_max
    }

    /// Per-class estimates for one configuration, in `self.classes` order.
    /// `rng_seed` only matters for random tuple sampling.
    pub fn single(&self, angles: &[f64], rng_seed: (u64, u64)) -> Result<Vec<Complex64>> {
        let n = angles.len();
        if self.k > n {
            return Err(Error::domain(format!("k = {} exceeds N = {n}", self.k)));
        }
        match self.sampling {
            TupleSampling::Exhaustive => Ok(self.exhaustive(angles)),
            TupleSampling::Random { per_config } => {
                let mut rng = rng_for_run(rng_seed.0, rng_seed.1);
                Ok(self.random(angles, per_config, &mut rng))
            }
        }
    }

    fn exhaustive(&self, angles: &[f64]) -> Vec<Complex64> {
        let m_max = self.k as i64 * self.n_max;
        let width = (2 * m_max + 1) as usize;
        let mut power = vec![Complex64::new(0.0, 0.0); width];
        for (slot, m) in power.iter_mut().zip(-m_max..=m_max) {
            let sum: ComplexSum = angles.iter().map(|&th| Complex64::from_polar(1.0, -(m as f64) * th)).collect();
            *slot = sum.value();
        }
        let a = |m: i64| power[(m + m_max) as usize];
        let falling: f64 = (0..self.k).map(|j| (angles.len() - j) as f64).product();
        self.classes
            .iter()
            .map(|tuple| {
                if tuple.iter().all(|&x| x == 0) {
                    return ONE;
                }
                let total: ComplexSum = self
                    .partitions
                    .iter()
                    .map(|p| {
                        let prod: Complex64 =
                            p.blocks.iter().map(|b| a(b.iter().map(|&j| tuple[j]).sum())).product();
                        prod * p.weight
                    })
                    .collect();
                total.value() / falling
            })
            .collect()
    }

    fn random<R: Rng + ?Sized>(&self, angles: &[f64], per_config: usize, rng: &mut R) -> Vec<Complex64> {
        let n = angles.len();
        let picks: Vec<Vec<f64>> = (0..per_config)
            .map(|_| rand::seq::index::sample(rng, n, self.k).into_iter().map(|i| angles[i]).collect())
            .collect();
        self.classes
            .iter()
            .map(|tuple| {
                if tuple.iter().all(|&x| x == 0) {
                    return ONE;
                }
                let sum: ComplexSum = picks
                    .iter()
                    .map(|th| {
                        let phase: f64 = tuple.iter().zip(th).map(|(&nj, &t)| nj as f64 * t).sum();
                        Complex64::from_polar(1.0, -phase)
                    })
                    .collect();
                let v = sum.value() / per_config as f64;
                // self-conjugate classes are real; average with the mirrored estimate
                if *tuple == sorted(&negated(tuple)) { Complex64::new(v.re, 0.0) } else { v }
            })
            .collect()
    }

    /// Estimates the table from one configuration per run. Random tuple
    /// sampling draws from stream `r` of `seed` for run `r`.
    pub fn estimate<C: AsRef<[f64]> + Sync>(&self, configs: &[C], t: f64, seed: u64) -> Result<CoeffTable> {
        if configs.is_empty() {
            return Err(Error::domain("no configurations to estimate from"));
        }
        let per_run: Vec<Vec<Complex64>> = configs
            .par_iter()
            .enumerate()
            .map(|(r, c)| self.single(c.as_ref(), (seed, r as u64)))
            .collect::<Result<_>>()?;
        Ok(self.from_runs(&per_run, t))
    }

    /// Aggregates per-run class estimates (as produced by [`Estimator::single`])
    /// in run order.
    pub fn from_runs(&self, per_run: &[Vec<Complex64>], t: f64) -> CoeffTable {
        let runs = per_run.len();
        let r = runs as f64;
        let mut stats = BTreeMap::new();
        for (c, class) in self.classes.iter().enumerate() {
            let mean: ComplexSum = per_run.iter().map(|v| v[c]).collect();
            let mean = mean.value() / r;
            let se = if runs > 1 {
                let ss: NeumaierSum = per_run.iter().map(|v| (v[c] - mean).norm_sqr()).collect();
                (ss.value() / (r - 1.0) / r).sqrt()
            } else {
                0.0
            };
            stats.insert(class.clone(), (mean, se));
        }
        CoeffTable::expand(self.k, self.n_max, t, runs, &stats, |(value, se)| CoeffEntry {
            value,
            stderr: Some(se),
        })
    }
}
