// SPDX-License-Identifier: Apache-2.0

//! Replica averages of `(1/N) log Z` and of the constrained free energy.
//!
//! Replica `r` uses disorder stream `r` of the master seed. Replicas run on a
//! rayon pool sized by `DEPIN_THREADS` (default: all cores) and are reduced in
//! index order, so results do not depend on the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{sample_replica, DisorderLaw};
use crate::engine::{log_partition, log_partition_constrained, ModelKind, ModelSpec};
use crate::error::{invalid, Error, Result};
use crate::numeric::{mean_stderr, sample_variance};

/// Worker count from `DEPIN_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("DEPIN_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `task(r)` for `r = 0..replicas` on `threads` workers; results come
/// back in replica order.
pub fn run_replicas<T, F>(replicas: usize, threads: usize, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    if threads <= 1 {
        return (0..replicas).map(task).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (0..replicas).into_par_iter().map(&task).collect())
}

/// Per-replica `(1/N) log Z` at several `N` from one recursion per replica.
/// For the copolymer the values are `F_N = (1/N) log Z^Δ_N + β Σ_{n≤N} ω_n/(2N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaTable {
    pub n_list: Vec<usize>,
    /// `values[r][k]` belongs to replica `r` and `n_list[k]`.
    pub values: Vec<Vec<f64>>,
    /// Copolymer only: `β Σ_{n≤N} ω_n / N` per replica and `N`.
    pub disorder_means: Option<Vec<Vec<f64>>>,
}

impl ReplicaTable {
    pub fn replicas(&self) -> usize {
        self.values.len()
    }

    /// Values of all replicas at `n_list[k]`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

fn check_n_list(model: &ModelSpec, n_list: &[usize]) -> Result<usize> {
    let s = model.kernel.period();
    if n_list.is_empty() {
        return Err(invalid("N", "need at least one length"));
    }
    for w in n_list.windows(2) {
        if w[1] <= w[0] {
            return Err(invalid("N", "lengths must be strictly ascending"));
        }
    }
    for &n in n_list {
        if n == 0 || n % s != 0 {
            return Err(Error::NotMultipleOfPeriod { n, period: s });
        }
    }
    Ok(*n_list.last().unwrap())
}

/// Free energies of `replicas` disorder samples at every `N` in `n_list`.
pub fn replica_free_energies(
    model: &ModelSpec,
    law: DisorderLaw,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<ReplicaTable> {
    replica_free_energies_with_threads(model, law, n_list, replicas, seed, thread_count())
}

pub fn replica_free_energies_with_threads(
    model: &ModelSpec,
    law: DisorderLaw,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
    threads: usize,
) -> Result<ReplicaTable> {
    let n_max = check_n_list(model, n_list)?;
    if replicas == 0 {
        return Err(invalid("replicas", "need at least one replica"));
    }
    let copolymer = model.kind == ModelKind::Copolymer;
    let one = |r: usize| -> Result<(Vec<f64>, Vec<f64>)> {
        let omega = sample_replica(law, n_max, seed, r as u64).values;
        let table = log_partition(model, &omega, n_max)?;
        let mut values = Vec::with_capacity(n_list.len());
        let mut means = Vec::new();
        let mut acc = 0.0;
        let mut upto = 0;
        for &n in n_list {
            let mut f = table.log_z(n) / n as f64;
            if copolymer {
                acc += omega[upto..n].iter().sum::<f64>();
                upto = n;
                let m = model.beta * acc / n as f64;
                f += 0.5 * m;
                means.push(m);
            }
            values.push(f);
        }
        Ok((values, means))
    };
    let rows = if model.beta == 0.0 {
        // No disorder: every replica equals the first.
        let first = one(0)?;
        vec![first; replicas]
    } else {
        run_replicas(replicas, threads, one)?
    };
    let (values, means): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(ReplicaTable {
        n_list: n_list.to_vec(),
        values,
        disorder_means: copolymer.then_some(means),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    /// Replica mean of `(1/N) log Z` (pinning) or of `F_N = f_N − h/2` (copolymer).
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub beta: f64,
    pub h: f64,
    /// Copolymer only: mean and stderr of `f_N` in the sign convention.
    pub copolymer_f: Option<(f64, f64)>,
}

fn summarize(model: &ModelSpec, table: &ReplicaTable, seed: u64) -> Vec<FreeEnergyEstimate> {
    (0..table.n_list.len())
        .map(|k| {
            let col = table.column(k);
            let (mean, stderr) = mean_stderr(&col);
            let copolymer_f = table.disorder_means.as_ref().map(|_| {
                let f: Vec<f64> = col.iter().map(|v| v + 0.5 * model.h).collect();
                mean_stderr(&f)
            });
            FreeEnergyEstimate {
                mean,
                stderr: if model.beta == 0.0 { 0.0 } else { stderr },
                n: table.n_list[k],
                replicas: table.replicas(),
                seed,
                beta: model.beta,
                h: model.h,
                copolymer_f,
            }
        })
        .collect()
}

/// Mean and standard error of the finite-`N` free energy over replicas.
pub fn estimate_free_energy(
    model: &ModelSpec,
    law: DisorderLaw,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<FreeEnergyEstimate> {
    Ok(estimate_free_energy_many(model, law, &[n], replicas, seed)?.remove(0))
}

/// As [`estimate_free_energy`] at every `N` in an ascending list, sharing one
/// recursion per replica.
pub fn estimate_free_energy_many(
    model: &ModelSpec,
    law: DisorderLaw,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<Vec<FreeEnergyEstimate>> {
    // Without disorder one run is exact, so a single replica is allowed.
    if replicas == 0 || (replicas < 2 && model.beta != 0.0) {
        return Err(invalid("replicas", "need at least two replicas for an error bar"));
    }
    let table = replica_free_energies(model, law, n_list, replicas, seed)?;
    Ok(summarize(model, &table, seed))
}

/// Default window half-width `max(1/√N, 2s/N)`.
pub fn default_epsilon(n: usize, period: usize) -> f64 {
    let nf = n as f64;
    (1.0 / nf.sqrt()).max(2.0 * period as f64 / nf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiPoint {
    pub m: f64,
    /// `−∞` when the window holds no admissible contact count.
    pub value: f64,
    pub stderr: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiCurve {
    pub points: Vec<PhiPoint>,
    pub epsilon: f64,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    /// `samples[r][i]`: replica `r` at `points[i].m`.
    pub samples: Vec<Vec<f64>>,
}

/// Replica average of `(1/N) log Ẑ_N(m, ε)` over a grid of contact fractions.
#[allow(clippy::too_many_arguments)]
pub fn estimate_phi(
    model: &ModelSpec,
    law: DisorderLaw,
    m_grid: &[f64],
    epsilon: Option<f64>,
    n: usize,
    replicas: usize,
    seed: u64,
) -> Result<PhiCurve> {
    if m_grid.is_empty() {
        return Err(invalid("m_grid", "empty grid"));
    }
    if let Some(m) = m_grid.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(invalid("m_grid", format!("fraction {m} outside [0, 1]")));
    }
    let s = model.kernel.period();
    let epsilon = epsilon.unwrap_or_else(|| default_epsilon(n, s));
    if !(epsilon > 0.0) || epsilon * (n as f64) < 1.0 {
        return Err(invalid("epsilon", format!("need N·ε ≥ 1, got ε = {epsilon} at N = {n}")));
    }
    if replicas == 0 {
        return Err(invalid("replicas", "need at least one replica"));
    }
    if n == 0 || !n.is_multiple_of(s) {
        return Err(Error::NotMultipleOfPeriod { n, period: s });
    }
    let one = |r: usize| -> Result<Vec<f64>> {
        let omega = sample_replica(law, n, seed, r as u64).values;
        let table = log_partition_constrained(model, &omega, n)?;
        Ok(m_grid.iter().map(|&m| table.window(n, m, epsilon) / n as f64).collect())
    };
    let samples = if model.beta == 0.0 {
        vec![one(0)?; replicas]
    } else {
        run_replicas(replicas, thread_count(), one)?
    };
    let points = m_grid
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let col: Vec<f64> = samples.iter().map(|row| row[i]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                PhiPoint {
                    m,
                    value: f64::NEG_INFINITY,
                    stderr: 0.0,
                    feasible: false,
                }
            } else {
                let (value, stderr) = mean_stderr(&col);
                PhiPoint {
                    m,
                    value,
                    stderr: if model.beta == 0.0 { 0.0 } else { stderr },
                    feasible: true,
                }
            }
        })
        .collect();
    Ok(PhiCurve {
        points,
        epsilon,
        n,
        replicas,
        seed,
        samples,
    })
}

/// Result of a midpoint-concavity test on a grid triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcavityCheck {
    pub m: f64,
    /// Replica mean of `φ(m−δ) + φ(m+δ) − 2φ(m)`, normalized by `δ²`.
    pub second_difference: f64,
    pub stderr: f64,
    /// Set unless the mean second difference exceeds `3·stderr` above zero.
    pub concave: bool,
}

/// Midpoint concavity over consecutive feasible triples of an evenly spaced grid.
pub fn check_concavity(curve: &PhiCurve) -> Vec<ConcavityCheck> {
    let pts = &curve.points;
    let mut out = Vec::new();
    for i in 1..pts.len().saturating_sub(1) {
        let (a, b, c) = (pts[i - 1], pts[i], pts[i + 1]);
        if !(a.feasible && b.feasible && c.feasible) {
            continue;
        }
        let delta = 0.5 * (c.m - a.m);
        if ((b.m - a.m) - delta).abs() > 1e-9 {
            continue;
        }
        let seconds: Vec<f64> = curve
            .samples
            .iter()
            .map(|row| (row[i - 1] + row[i + 1] - 2.0 * row[i]) / (delta * delta))
            .collect();
        let (mean, stderr) = mean_stderr(&seconds);
        out.push(ConcavityCheck {
            m: b.m,
            second_difference: mean,
            stderr,
            concave: mean <= 3.0 * stderr,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfAveraging {
    /// `(N, replica variance of (1/N) log Z)`.
    pub rows: Vec<(usize, f64)>,
    /// Variance at the largest `N` is below that at the smallest.
    pub decreasing: bool,
    /// Variance decreases at every step of the list.
    pub monotone: bool,
}

/// Replica variance of `(1/N) log Z` across `N`.
pub fn self_averaging_diagnostic(
    model: &ModelSpec,
    law: DisorderLaw,
    n_list: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<SelfAveraging> {
    if replicas < 2 {
        return Err(invalid("replicas", "need at least two replicas"));
    }
    let table = replica_free_energies(model, law, n_list, replicas, seed)?;
    let rows: Vec<(usize, f64)> = (0..n_list.len())
        .map(|k| {
            let v = if model.beta == 0.0 { 0.0 } else { sample_variance(&table.column(k)) };
            (n_list[k], v)
        })
        .collect();
    let first = rows.first().map_or(0.0, |r| r.1);
    let last = rows.last().map_or(0.0, |r| r.1);
    Ok(SelfAveraging {
        decreasing: last < first,
        monotone: rows.windows(2).all(|w| w[1].1 < w[0].1),
        rows,
    })
}
