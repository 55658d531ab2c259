use serde::Serialize;

use crate::error::{Error, Result};
use crate::marginals::CoeffTable;
use crate::metrics::NOISE_Z;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntryZ {
    pub tuple: Vec<i64>,
    pub gap: f64,
    pub stderr: f64,
    /// `gap / stderr`; infinite for a nonzero gap with zero standard error.
    pub z: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub entries: Vec<EntryZ>,
}

impl Comparison {
    /// Fraction of entries with `z <= 4`.
    pub fn fraction_within(&self) -> f64 {
        if self.entries.is_empty() {
            return 1.0;
        }
        self.entries.iter().filter(|e| e.z <= NOISE_Z).count() as f64 / self.entries.len() as f64
    }

    pub fn median_z(&self) -> f64 {
        let mut z: Vec<f64> = self.entries.iter().map(|e| e.z).collect();
        if z.is_empty() {
            return 0.0;
        }
        z.sort_by(f64::total_cmp);
        let m = z.len() / 2;
        if z.len() % 2 == 1 { z[m] } else { 0.5 * (z[m - 1] + z[m]) }
    }

    pub fn flagged(&self) -> impl Iterator<Item = &EntryZ> {
        self.entries.iter().filter(|e| e.flagged)
    }
}

/// Per-entry z-scores of an empirical table against an exact one. The mass
/// entry is skipped since both sides fix it to 1.
pub fn compare_mc_analytic(empirical: &CoeffTable, analytic: &CoeffTable) -> Result<Comparison> {
    if empirical.k != analytic.k || empirical.n_max != analytic.n_max {
        return Err(Error::domain("tables differ in k or n_max"));
    }
    if (empirical.t - analytic.t).abs() > 1e-12 * empirical.t.abs().max(1.0) {
        return Err(Error::domain(format!("tables are at t = {} and t = {}", empirical.t, analytic.t)));
    }
    let mut entries = Vec::new();
    for (tuple, e) in &empirical.entries {
        if tuple.iter().all(|&n| n == 0) {
            continue;
        }
        let Some(a) = analytic.value(tuple) else { continue };
        let se = e.stderr.unwrap_or(0.0);
        let gap = (e.value - a).norm();
        let (z, flagged) = if se > 0.0 {
            (gap / se, false)
        } else if gap == 0.0 {
            (0.0, false)
        } else {
            (f64::INFINITY, true)
        };
        entries.push(EntryZ { tuple: tuple.clone(), gap, stderr: se, z, flagged });
    }
    Ok(Comparison { entries })
}
