// SPDX-License-Identifier: Apache-2.0

//! Brute-force partition functions by explicit enumeration, for checking the
//! recursions. Exponential time; each entry point has a size guard.

use std::collections::BTreeMap;

use crate::error::{invalid, Error, Result};
use crate::kernel::{IdealLaw, ReturnKernel};
use crate::numeric::CompensatedSum;

pub const PINNING_GUARD: usize = 24;
pub const COPOLYMER_GUARD: usize = 14;
pub const CONSTRAINED_GUARD: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    /// Partition function in the linear domain.
    pub value: f64,
    /// Number of admissible configurations enumerated.
    pub configuration_count: u64,
}

fn guard(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        Err(Error::OracleGuard { n, guard: limit })
    } else {
        Ok(())
    }
}

fn check(kernel: &ReturnKernel, omega: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    if !n.is_multiple_of(kernel.period()) {
        return Err(Error::NotMultipleOfPeriod {
            n,
            period: kernel.period(),
        });
    }
    if omega.len() < n {
        return Err(Error::DisorderTooShort {
            have: omega.len(),
            need: n,
        });
    }
    Ok(())
}

/// Calls `visit` with the return times `τ_1 < … < τ_j = N` of every
/// composition of `N` into parts from the kernel's support.
fn for_each_composition(kernel: &ReturnKernel, n: usize, visit: &mut impl FnMut(&[usize])) {
    fn walk(kernel: &ReturnKernel, n: usize, path: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        let at = path.last().copied().unwrap_or(0);
        if at == n {
            visit(path);
            return;
        }
        let s = kernel.period();
        let mut len = s;
        while at + len <= n {
            if kernel.density(len) > 0.0 {
                path.push(at + len);
                walk(kernel, n, path, visit);
                path.pop();
            }
            len += s;
        }
    }
    walk(kernel, n, &mut Vec::new(), visit);
}

/// `Σ_{compositions} Π_i K(ℓ_i) e^{βω_{τ_i} − h}`.
pub fn brute_force_pinning(kernel: &ReturnKernel, omega: &[f64], beta: f64, h: f64, n: usize) -> Result<OracleResult> {
    guard(n, PINNING_GUARD)?;
    check(kernel, omega, n)?;
    let mut total = CompensatedSum::new();
    let mut count = 0u64;
    for_each_composition(kernel, n, &mut |taus| {
        let mut weight = 1.0;
        let mut prev = 0;
        for &t in taus {
            weight *= kernel.density(t - prev) * (beta * omega[t - 1] - h).exp();
            prev = t;
        }
        total.add(weight);
        count += 1;
    });
    Ok(OracleResult {
        value: total.value(),
        configuration_count: count,
    })
}

fn require_srw(kernel: &ReturnKernel, n: usize) -> Result<()> {
    if kernel.ideal() != IdealLaw::SimpleRandomWalk {
        return Err(Error::Unsupported(
            "path enumeration needs the simple random walk kernel".to_string(),
        ));
    }
    if kernel.support() <= n {
        return Err(Error::Unsupported(format!(
            "the SRW kernel is folded at {}; path enumeration to N = {n} needs a longer table",
            kernel.support()
        )));
    }
    Ok(())
}

/// Enumerates all ±1 bridges of length `N` (`n ≤ 30`), calling `visit` with
/// the sign pattern as the bits of a mask (bit `i` set ⇔ step `i+1` is up).
fn for_each_bridge(n: usize, visit: &mut impl FnMut(&[i64])) {
    let mut heights = vec![0i64; n + 1];
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize * 2 != n {
            continue;
        }
        for i in 0..n {
            heights[i + 1] = heights[i] + if mask >> i & 1 == 1 { 1 } else { -1 };
        }
        visit(&heights);
    }
}

/// Copolymer by enumeration of all ±1 bridges with the sign-form
/// Hamiltonian `½ Σ (βω_n + h) sign(S_n)`, `sign(0) = +1`, converted to the
/// Δ-form normalization by dividing by `e^{½ Σ (βω_n + h)}`.
pub fn brute_force_copolymer(kernel: &ReturnKernel, omega: &[f64], beta: f64, h: f64, n: usize) -> Result<OracleResult> {
    guard(n, COPOLYMER_GUARD)?;
    check(kernel, omega, n)?;
    require_srw(kernel, n)?;
    let mut total = CompensatedSum::new();
    let mut count = 0u64;
    let path_prob = 0.5f64.powi(n as i32);
    for_each_bridge(n, &mut |heights| {
        let mut energy = 0.0;
        for i in 1..=n {
            let sign = if heights[i] >= 0 { 1.0 } else { -1.0 };
            energy += 0.5 * (beta * omega[i - 1] + h) * sign;
        }
        total.add(path_prob * energy.exp());
        count += 1;
    });
    let offset: f64 = omega[..n].iter().map(|w| 0.5 * (beta * w + h)).sum();
    Ok(OracleResult {
        value: total.value() / offset.exp(),
        configuration_count: count,
    })
}

/// Copolymer in the Δ-form for any kernel: every composition, with each
/// excursion that has interior sites placed above or below with probability
/// 1/2 each. Excursions without interior (length 1) keep their full weight.
pub fn brute_force_copolymer_excursions(
    kernel: &ReturnKernel,
    omega: &[f64],
    beta: f64,
    h: f64,
    n: usize,
) -> Result<OracleResult> {
    guard(n, COPOLYMER_GUARD)?;
    check(kernel, omega, n)?;
    let mut total = CompensatedSum::new();
    let mut count = 0u64;
    for_each_copolymer_configuration(kernel, n, &mut |factor, below| {
        let charge: f64 = below.iter().map(|&i| beta * omega[i - 1] + h).sum();
        total.add(factor * (-charge).exp());
        count += 1;
    });
    Ok(OracleResult {
        value: total.value(),
        configuration_count: count,
    })
}

/// Calls `visit(weight, sites_below)` for every excursion decomposition and
/// orientation, where `weight = Π K(ℓ)·(1/2 per oriented excursion)`.
fn for_each_copolymer_configuration(kernel: &ReturnKernel, n: usize, visit: &mut impl FnMut(f64, &[usize])) {
    for_each_composition(kernel, n, &mut |taus| {
        let mut prev = 0;
        let mut lengths = Vec::with_capacity(taus.len());
        for &t in taus {
            lengths.push((prev, t));
            prev = t;
        }
        let oriented: Vec<usize> = lengths
            .iter()
            .enumerate()
            .filter(|(_, (a, b))| b - a > 1)
            .map(|(i, _)| i)
            .collect();
        let base: f64 = lengths.iter().map(|(a, b)| kernel.density(b - a)).product();
        for mask in 0u64..(1u64 << oriented.len()) {
            let mut below = Vec::new();
            for (bit, &e) in oriented.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    let (a, b) = lengths[e];
                    below.extend(a + 1..b);
                }
            }
            let weight = base * 0.5f64.powi(oriented.len() as i32);
            visit(weight, &below);
        }
    });
}

/// Which model the constrained oracle groups by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstrainedModel {
    /// Group compositions by the number of returns.
    Pinning,
    /// Group ±1 bridges by the number of sites below the line (SRW kernel).
    CopolymerPaths,
    /// Group oriented excursion decompositions by the number of sites below.
    CopolymerExcursions,
}

/// `j ↦ Ẑ_N(j)` without the field: pinning weighs returns by `e^{βω}`, the
/// copolymer weighs sites below the line by `e^{−βω}`.
pub fn brute_force_constrained(
    kernel: &ReturnKernel,
    omega: &[f64],
    beta: f64,
    n: usize,
    model: ConstrainedModel,
) -> Result<BTreeMap<usize, f64>> {
    guard(n, CONSTRAINED_GUARD)?;
    check(kernel, omega, n)?;
    let mut buckets: BTreeMap<usize, CompensatedSum> = BTreeMap::new();
    match model {
        ConstrainedModel::Pinning => for_each_composition(kernel, n, &mut |taus| {
            let mut weight = 1.0;
            let mut prev = 0;
            for &t in taus {
                weight *= kernel.density(t - prev) * (beta * omega[t - 1]).exp();
                prev = t;
            }
            buckets.entry(taus.len()).or_default().add(weight);
        }),
        ConstrainedModel::CopolymerPaths => {
            require_srw(kernel, n)?;
            let path_prob = 0.5f64.powi(n as i32);
            for_each_bridge(n, &mut |heights| {
                let mut below = 0;
                let mut charge = 0.0;
                for i in 1..=n {
                    if heights[i] < 0 {
                        below += 1;
                        charge += beta * omega[i - 1];
                    }
                }
                buckets.entry(below).or_default().add(path_prob * (-charge).exp());
            })
        }
        ConstrainedModel::CopolymerExcursions => {
            for_each_copolymer_configuration(kernel, n, &mut |factor, below| {
                let charge: f64 = below.iter().map(|&i| beta * omega[i - 1]).sum();
                buckets.entry(below.len()).or_default().add(factor * (-charge).exp());
            })
        }
    }
    Ok(buckets.into_iter().map(|(j, v)| (j, v.value())).collect())
}

/// Largest relative disagreement `|Z_engine/Z_oracle − 1|` in one comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub draw: usize,
    pub what: &'static str,
    pub kernel: String,
    pub beta: f64,
    pub h: f64,
    pub n: usize,
    pub worst: f64,
}

fn relative_gap(log_engine: f64, oracle: f64) -> f64 {
    if oracle == 0.0 {
        return if log_engine == f64::NEG_INFINITY { 0.0 } else { f64::INFINITY };
    }
    (log_engine - oracle.ln()).exp_m1().abs()
}

/// Compares the recursions with enumeration on `draws` random instances:
/// pinned pinning and its contact-resolved table at length `n_pinning`, the
/// copolymer and its table at `n_copolymer`. Kernels, laws, `β` and `h` are
/// drawn from `seed`.
pub fn cross_check(n_pinning: usize, n_copolymer: usize, draws: usize, seed: u64) -> Result<Vec<CrossCheck>> {
    use crate::disorder::{sample_replica, DisorderLaw};
    use crate::engine::{log_partition_constrained, log_partition_copolymer, log_partition_pinning, ModelSpec};
    use crate::kernel::{geometric_kernel_with, power_kernel, srw_kernel};
    use rand_chacha::ChaCha8Rng;
    use rand_core::{RngCore, SeedableRng};

    guard(n_pinning, PINNING_GUARD.min(CONSTRAINED_GUARD))?;
    guard(n_copolymer, COPOLYMER_GUARD)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    let mut out = Vec::new();
    for draw in 0..draws {
        let n_all = n_pinning.max(n_copolymer);
        let (name, kernel) = match draw % 4 {
            0 => {
                let p = 0.1 + 0.8 * unit();
                (format!("geometric:p={p}"), geometric_kernel_with(p, 0.0, None)?)
            }
            1 => {
                let p = 0.1 + 0.8 * unit();
                let k_inf = 0.6 * unit();
                (format!("geometric:p={p},k_inf={k_inf}"), geometric_kernel_with(p, k_inf, None)?)
            }
            2 => {
                let alpha = 1.1 + 2.0 * unit();
                let s = 1 + (draw / 4) % 2;
                (format!("power:alpha={alpha},s={s}"), power_kernel(alpha, s, 4 * n_all, 0.0)?)
            }
            _ => ("srw".to_string(), srw_kernel(4 * n_all)?),
        };
        let law = DisorderLaw::ALL[draw % 3];
        let beta = 2.0 * unit();
        let h = 3.0 * unit() - 1.5;
        let omega = sample_replica(law, n_all, seed ^ 0x5eed, draw as u64).values;
        let s = kernel.period();
        let np = n_pinning - n_pinning % s;
        let nc = n_copolymer - n_copolymer % s;
        let record = |what, n, worst| CrossCheck {
            draw,
            what,
            kernel: name.clone(),
            beta,
            h,
            n,
            worst,
        };

        if np > 0 {
            let model = ModelSpec::pinning(&kernel, beta, h);
            let table = log_partition_pinning(&model, &omega, np)?;
            let mut worst: f64 = 0.0;
            for m in (s..=np).step_by(s) {
                let z = brute_force_pinning(&kernel, &omega, beta, h, m)?.value;
                worst = worst.max(relative_gap(table.log_z(m), z));
            }
            out.push(record("pinning", np, worst));

            let constrained = log_partition_constrained(&model, &omega, np)?;
            let buckets = brute_force_constrained(&kernel, &omega, beta, np, ConstrainedModel::Pinning)?;
            let mut worst: f64 = 0.0;
            for j in 0..constrained.counts(np) {
                let z = buckets.get(&j).copied().unwrap_or(0.0);
                worst = worst.max(relative_gap(constrained.log_z(np, j), z));
            }
            out.push(record("constrained pinning", np, worst));
        }

        if nc > 0 {
            let hc = h.abs();
            let model = ModelSpec::copolymer(&kernel, beta, hc);
            let table = log_partition_copolymer(&model, &omega, nc)?;
            let mut worst: f64 = 0.0;
            for m in (s..=nc).step_by(s) {
                let z = brute_force_copolymer_excursions(&kernel, &omega, beta, hc, m)?.value;
                worst = worst.max(relative_gap(table.log_z(m), z));
                if matches!(kernel.ideal(), IdealLaw::SimpleRandomWalk) {
                    let z = brute_force_copolymer(&kernel, &omega, beta, hc, m)?.value;
                    worst = worst.max(relative_gap(table.log_z(m), z));
                }
            }
            out.push(CrossCheck { h: hc, ..record("copolymer", nc, worst) });

            let constrained = log_partition_constrained(&model, &omega, nc)?;
            let buckets = brute_force_constrained(&kernel, &omega, beta, nc, ConstrainedModel::CopolymerExcursions)?;
            let mut worst: f64 = 0.0;
            for j in 0..constrained.counts(nc) {
                let z = buckets.get(&j).copied().unwrap_or(0.0);
                worst = worst.max(relative_gap(constrained.log_z(nc, j), z));
            }
            out.push(CrossCheck { h: hc, ..record("constrained copolymer", nc, worst) });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{geometric_kernel, power_kernel, srw_kernel};
    use approx::assert_relative_eq;

    #[test]
    fn hand_enumerations() {
        let k = geometric_kernel(0.5).unwrap();
        let zero = [0.0; 8];
        let r = brute_force_pinning(&k, &zero, 0.0, 0.0, 3).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-15);
        assert_eq!(r.configuration_count, 4);
        let omega = [0.4, -0.2, 1.1];
        let r = brute_force_pinning(&k, &omega, 0.9, 0.3, 1).unwrap();
        assert_relative_eq!(r.value, 0.5 * (0.9f64 * 0.4 - 0.3).exp(), max_relative = 1e-15);
    }

    #[test]
    fn composition_count() {
        let k = power_kernel(2.0, 1, 100, 0.0).unwrap();
        for n in 1..=12 {
            let r = brute_force_pinning(&k, &[0.0; 12], 0.0, 0.0, n).unwrap();
            assert_eq!(r.configuration_count, 1 << (n - 1));
        }
        let srw = srw_kernel(100).unwrap();
        let r = brute_force_pinning(&srw, &[0.0; 12], 0.0, 0.0, 12).unwrap();
        assert_eq!(r.configuration_count, 1 << 5);
    }

    #[test]
    fn copolymer_bridges() {
        let k = srw_kernel(20).unwrap();
        let zero = [0.0; 14];
        let r = brute_force_copolymer(&k, &zero, 0.0, 0.0, 2).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-15);
        let r = brute_force_copolymer(&k, &zero, 0.0, 0.0, 4).unwrap();
        assert_relative_eq!(r.value, 0.375, max_relative = 1e-15);
        assert_eq!(r.configuration_count, 6);
        assert!(brute_force_copolymer(&k, &zero, 0.0, 0.0, 16).is_err());
        assert!(brute_force_copolymer(&srw_kernel(3).unwrap(), &zero, 0.0, 0.0, 8).is_err());
    }

    #[test]
    fn excursion_and_path_enumerations_agree() {
        let k = srw_kernel(20).unwrap();
        let omega = [0.3, -1.0, 0.5, 2.0, -0.7, 0.1, 0.9, -0.4, 1.3, -2.1];
        for n in (2..=10).step_by(2) {
            let a = brute_force_copolymer(&k, &omega, 0.8, 0.3, n).unwrap().value;
            let b = brute_force_copolymer_excursions(&k, &omega, 0.8, 0.3, n).unwrap().value;
            assert_relative_eq!(a, b, max_relative = 1e-13);
            let pa = brute_force_constrained(&k, &omega, 0.8, n, ConstrainedModel::CopolymerPaths).unwrap();
            let pb = brute_force_constrained(&k, &omega, 0.8, n, ConstrainedModel::CopolymerExcursions).unwrap();
            assert_eq!(pa.len(), pb.len());
            for (j, v) in &pa {
                assert_relative_eq!(*v, pb[j], max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn regrouping_identity() {
        let k = power_kernel(1.7, 1, 30, 0.2).unwrap();
        let omega: Vec<f64> = (0..14).map(|i| (i as f64 * 0.9).sin() * 1.5).collect();
        let (beta, h) = (1.1, 0.4);
        let full = brute_force_pinning(&k, &omega, beta, h, 14).unwrap().value;
        let grouped = brute_force_constrained(&k, &omega, beta, 14, ConstrainedModel::Pinning).unwrap();
        let regrouped: f64 = grouped.iter().map(|(j, v)| v * (-h * *j as f64).exp()).sum();
        assert_relative_eq!(full, regrouped, max_relative = 1e-14);
        let all_steps = k.density(1).powi(14) * (beta * omega.iter().sum::<f64>()).exp();
        assert_relative_eq!(grouped[&14], all_steps, max_relative = 1e-13);
    }

    #[test]
    fn guards() {
        let k = power_kernel(2.0, 1, 100, 0.0).unwrap();
        let omega = [0.0; 40];
        assert!(matches!(
            brute_force_pinning(&k, &omega, 0.0, 0.0, 25),
            Err(Error::OracleGuard { n: 25, guard: 24 })
        ));
        assert!(brute_force_constrained(&k, &omega, 0.0, 21, ConstrainedModel::Pinning).is_err());
    }

    #[test]
    fn cross_check_small() {
        let checks = cross_check(10, 8, 12, 3).unwrap();
        assert_eq!(checks.len(), 48);
        for c in &checks {
            assert!(c.worst < 1e-12, "{c:?}");
        }
    }
}
