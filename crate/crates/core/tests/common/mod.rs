//! Brute-force reference for the Fourier hierarchy: classical RK4 on the
//! full (unsorted) tuple system, written straight from the pairwise form
//!
//! ```text
//! d/dt F_k(n) = 2c sum_{i<j} [ (g(n_i) + g(n_j))/2 F_{k-1}(n_i -> n_i + n_j, drop n_j) - F_k(n) ]
//!             + c (N - k) F_k(n) sum_l (g(n_l) - 1)
//! ```
//!
//! and its N -> infinity forms. Shares nothing with the exponential-sum solver.

#![allow(dead_code)]

use std::collections::HashMap;

use cl_order::{Complex64, NoiseKernel};

pub enum OdeModel {
    FiniteN { n: usize, kernel: NoiseKernel, lambda: f64 },
    Strong { lambda: f64 },
    Balanced { lambda: f64, m2: f64 },
}

struct Unknown {
    diag: f64,
    parents: Vec<(usize, f64)>,
}

pub struct OdeOracle {
    index: HashMap<Vec<i64>, usize>,
    unknowns: Vec<Unknown>,
    state: Vec<Complex64>,
    t: f64,
}

fn merge(tuple: &[i64], i: usize, j: usize) -> Vec<i64> {
    let mut m = Vec::with_capacity(tuple.len() - 1);
    for (l, &n) in tuple.iter().enumerate() {
        if l == i {
            m.push(tuple[i] + tuple[j]);
        } else if l != j {
            m.push(n);
        }
    }
    m
}

fn all_tuples(k: usize, n_max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|t| {
                (-n_max..=n_max).map(move |n| {
                    let mut u = t.clone();
                    u.push(n);
                    u
                })
            })
            .collect();
    }
    out
}

impl OdeOracle {
    /// Builds the closed system containing every tuple with `|n_i| <= n_max`
    /// at levels `1..=k_max` and all tuples reachable from them by merging.
    pub fn new(model: OdeModel, k_max: usize, n_max: i64, initial: impl Fn(&[i64]) -> Complex64) -> Self {
        let mut tuples: Vec<Vec<i64>> = Vec::new();
        let mut index = HashMap::new();
        let mut frontier: Vec<Vec<i64>> = (1..=k_max).flat_map(|k| all_tuples(k, n_max)).collect();
        while let Some(t) = frontier.pop() {
            if index.contains_key(&t) {
                continue;
            }
            index.insert(t.clone(), tuples.len());
            for i in 0..t.len() {
                for j in (i + 1)..t.len() {
                    frontier.push(merge(&t, i, j));
                }
            }
            tuples.push(t);
        }
        let unknowns = tuples
            .iter()
            .map(|t| {
                let k = t.len();
                let pairs = (k * (k - 1) / 2) as f64;
                let (diag, weight): (f64, Box<dyn Fn(i64, i64) -> f64>) = match &model {
                    OdeModel::FiniteN { n, kernel, lambda } => {
                        let nf = *n as f64;
                        let c = lambda * nf / (nf - 1.0);
                        let drift: f64 = t.iter().map(|&m| kernel.fourier_coeff(m) - 1.0).sum();
                        let kern = kernel.clone();
                        (
                            -2.0 * c * pairs + c * (nf - k as f64) * drift,
                            Box::new(move |a, b| c * (kern.fourier_coeff(a) + kern.fourier_coeff(b))),
                        )
                    }
                    OdeModel::Strong { lambda } => {
                        let l = *lambda;
                        (-2.0 * l * pairs, Box::new(move |_, _| 2.0 * l))
                    }
                    OdeModel::Balanced { lambda, m2 } => {
                        let l = *lambda;
                        let sq: f64 = t.iter().map(|&m| (m * m) as f64).sum();
                        (-2.0 * l * pairs - l * m2 / 2.0 * sq, Box::new(move |_, _| 2.0 * l))
                    }
                };
                let mut parents = Vec::new();
                for i in 0..k {
                    for j in (i + 1)..k {
                        parents.push((index[&merge(t, i, j)], weight(t[i], t[j])));
                    }
                }
                Unknown { diag, parents }
            })
            .collect();
        let state = tuples.iter().map(|t| initial(t)).collect();
        Self { index, unknowns, state, t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }

    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) {
        for (o, u) in out.iter_mut().zip(&self.unknowns) {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(p, w) in &u.parents {
                acc += y[p] * w;
            }
            *o = acc;
        }
        for (i, u) in self.unknowns.iter().enumerate() {
            out[i] += y[i] * u.diag;
        }
    }

    /// Integrates to `t_target` with steps of at most `h`.
    pub fn advance(&mut self, t_target: f64, h: f64) {
        let span = t_target - self.t;
        if span <= 0.0 {
            return;
        }
        let steps = (span / h).ceil() as usize;
        let dt = span / steps as f64;
        let n = self.state.len();
        let zero = Complex64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        for _ in 0..steps {
            let y = &self.state;
            self.rhs(y, &mut k1);
            for i in 0..n {
                tmp[i] = y[i] + k1[i] * (dt / 2.0);
            }
            self.rhs(&tmp, &mut k2);
            for i in 0..n {
                tmp[i] = y[i] + k2[i] * (dt / 2.0);
            }
            self.rhs(&tmp, &mut k3);
            for i in 0..n {
                tmp[i] = y[i] + k3[i] * dt;
            }
            self.rhs(&tmp, &mut k4);
            let y = &mut self.state;
            for i in 0..n {
                y[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
            }
        }
        self.t = t_target;
    }

    pub fn value(&self, tuple: &[i64]) -> Option<Complex64> {
        self.index.get(tuple).map(|&i| self.state[i])
    }

    pub fn lattice(k: usize, n_max: i64) -> Vec<Vec<i64>> {
        all_tuples(k, n_max)
    }
}
