//! Order, chaos and partial-order residuals of coefficient tables.
//!
//! All residuals are sup norms over the tuples present in the tables. For
//! empirical tables the largest standard error involved is carried along so
//! that a residual below `4 * SE` can be reported as not resolved from noise.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::marginals::CoeffTable;
use crate::profile::OrderProfile;

/// Multiple of the standard error under which a residual is noise.
pub const NOISE_Z: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    /// Largest standard error among the entries compared, `None` for exact tables.
    pub max_stderr: Option<f64>,
}

impl Residual {
    pub fn exact(value: f64) -> Self {
        Self { value, max_stderr: None }
    }

    /// True when the residual is smaller than the noise level of the inputs.
    pub fn within_noise(&self) -> bool {
        self.max_stderr.is_some_and(|se| self.value < NOISE_Z * se)
    }
}

struct Sup {
    value: f64,
    se: Option<f64>,
}

impl Sup {
    fn new() -> Self {
        Self { value: 0.0, se: None }
    }

    fn push(&mut self, gap: f64, se: Option<f64>) {
        self.value = self.value.max(gap);
        if let Some(s) = se {
            self.se = Some(self.se.unwrap_or(0.0).max(s));
        }
    }

    fn finish(self) -> Residual {
        Residual { value: self.value, max_stderr: self.se }
    }
}

fn require_level(table: &CoeffTable, k: usize) -> Result<()> {
    if table.k != k {
        return Err(Error::domain(format!("expected a level-{k} table, got level {}", table.k)));
    }
    Ok(())
}

/// `max |F_k(n) - f(n_1 + ... + n_k)|`; zero exactly when the table is the
/// `f`-ordered state.
pub fn order_residual(table: &CoeffTable, profile: &OrderProfile) -> Residual {
    let mut sup = Sup::new();
    for (tuple, e) in &table.entries {
        let target = profile.coeff(tuple.iter().sum());
        sup.push((e.value - target).norm(), e.stderr);
    }
    sup.finish()
}

/// Order residual against the first marginal of the same state:
/// `max |F_k(n) - F_1(n_1 + ... + n_k)|` over tuples whose total lies in the
/// range of `first`.
pub fn order_residual_against(table: &CoeffTable, first: &CoeffTable) -> Result<Residual> {
    require_level(first, 1)?;
    let mut sup = Sup::new();
    for (tuple, e) in &table.entries {
        let Some(f) = first.get(&[tuple.iter().sum()]) else { continue };
        let se = match (e.stderr, f.stderr) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0).max(b.unwrap_or(0.0))),
        };
        sup.push((e.value - f.value).norm(), se);
    }
    Ok(sup.finish())
}

/// `1 - Re F_2(n, -n)` for `n = 1..=n_max`.
pub fn diag_gap(table: &CoeffTable) -> Result<Vec<(i64, f64)>> {
    require_level(table, 2)?;
    (1..=table.n_max)
        .map(|n| {
            table
                .value(&[n, -n])
                .map(|v| (n, 1.0 - v.re))
                .ok_or_else(|| Error::domain(format!("table lacks ({n}, {})", -n)))
        })
        .collect()
}

/// `max |F_2(n1, n2) - F_1(n1) F_1(n2)|`.
pub fn chaos_residual(table2: &CoeffTable, table1: &CoeffTable) -> Result<Residual> {
    require_level(table2, 2)?;
    require_level(table1, 1)?;
    if table2.t != table1.t {
        return Err(Error::domain("tables are at different times"));
    }
    let mut sup = Sup::new();
    for (tuple, e) in &table2.entries {
        let (Some(a), Some(b)) = (table1.get(&tuple[..1]), table1.get(&tuple[1..])) else {
            continue;
        };
        let se = match (e.stderr, a.stderr, b.stderr) {
            (None, None, None) => None,
            (x, y, z) => Some(x.unwrap_or(0.0).max(y.unwrap_or(0.0)).max(z.unwrap_or(0.0))),
        };
        sup.push((e.value - a.value * b.value).norm(), se);
    }
    Ok(sup.finish())
}

/// Distance of a pair table to the balanced-regime profile: `F_2(n, -n)`
/// against `2 / (m2 n^2 + 2)` plus the largest `|F_2(n1, n2)|` off the
/// anti-diagonal.
pub fn partial_order_residual(table2: &CoeffTable, m2: f64) -> Result<Residual> {
    require_level(table2, 2)?;
    if !(m2.is_finite() && m2 > 0.0) {
        return Err(Error::domain(format!("m2 must be positive, got {m2}")));
    }
    let mut diag = Sup::new();
    let mut off = Sup::new();
    for (tuple, e) in &table2.entries {
        let (n1, n2) = (tuple[0], tuple[1]);
        if n1 + n2 == 0 {
            if n1 == 0 {
                continue;
            }
            let target = 2.0 / (m2 * (n1 * n1) as f64 + 2.0);
            diag.push((e.value - Complex64::new(target, 0.0)).norm(), e.stderr);
        } else {
            off.push(e.value.norm(), e.stderr);
        }
    }
    let (d, o) = (diag.finish(), off.finish());
    let se = match (d.max_stderr, o.max_stderr) {
        (None, None) => None,
        (a, b) => Some(a.unwrap_or(0.0).max(b.unwrap_or(0.0))),
    };
    Ok(Residual { value: d.value + o.value, max_stderr: se })
}

/// Constants `c_k` in `|f_k(n, t) - f_1(sum n)| <= c_k exp(-2 lambda t)` for
/// the strong limit: `c_2 = 2`, `c_k = 2 + c_{k-1} k(k-1) / (k(k-1) - 2)`.
pub fn order_decay_constant(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::domain("c_k is defined for k >= 2"));
    }
    let mut c = 2.0;
    for j in 3..=k {
        let p = (j * (j - 1)) as f64;
        c = 2.0 + c * p / (p - 2.0);
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub t: f64,
    pub n_max: i64,
    pub order_residual: Residual,
    pub chaos_residual: Residual,
    pub partial_order_residual: Residual,
    pub diag_gap: Vec<(i64, f64)>,
}

impl DiagnosticsReport {
    /// Computes every metric from matching level-1 and level-2 tables.
    pub fn new(table1: &CoeffTable, table2: &CoeffTable, profile: &OrderProfile, m2: f64) -> Result<Self> {
        require_level(table1, 1)?;
        Ok(Self {
            t: table2.t,
            n_max: table2.n_max,
            order_residual: order_residual(table2, profile),
            chaos_residual: chaos_residual(table2, table1)?,
            partial_order_residual: partial_order_residual(table2, m2)?,
            diag_gap: diag_gap(table2)?,
        })
    }

    /// True when any residual is below the noise level of its inputs.
    pub fn se_flag(&self) -> bool {
        [self.order_residual, self.chaos_residual, self.partial_order_residual]
            .iter()
            .any(Residual::within_noise)
    }

    pub fn diag_gap_at(&self, n: i64) -> Option<f64> {
        self.diag_gap.iter().find(|(m, _)| *m == n).map(|(_, g)| *g)
    }
}
