// SPDX-License-Identifier: Apache-2.0

use depin_core::disorder::{sample_replica, DisorderLaw};
use depin_core::engine::ModelSpec;
use depin_core::estimator::{
    estimate_free_energy, estimate_free_energy_many, replica_free_energies_with_threads, self_averaging_diagnostic,
};
use depin_core::pure_solver::solve_free_energy_pure;
use depin_core::{geometric_kernel, power_kernel};

#[test]
fn results_do_not_depend_on_worker_count() {
    let k = power_kernel(2.5, 1, 2000, 0.0).unwrap();
    let model = ModelSpec::pinning(&k, 1.0, 0.2);
    let a = replica_free_energies_with_threads(&model, DisorderLaw::Gaussian, &[256, 512], 12, 5, 1).unwrap();
    let b = replica_free_energies_with_threads(&model, DisorderLaw::Gaussian, &[256, 512], 12, 5, 3).unwrap();
    let bits = |t: &depin_core::estimator::ReplicaTable| -> Vec<u64> {
        t.values.iter().flatten().map(|v| v.to_bits()).collect()
    };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn single_excursion_bound_on_average() {
    let k = power_kernel(2.0, 1, 4000, 0.0).unwrap();
    let (n, replicas, seed) = (1024, 16, 9);
    for h in [-0.5, 0.3, 1.5] {
        let model = ModelSpec::pinning(&k, 0.8, h);
        let e = estimate_free_energy(&model, DisorderLaw::Rademacher, n, replicas, seed).unwrap();
        let bound: f64 = (0..replicas)
            .map(|r| {
                let w = sample_replica(DisorderLaw::Rademacher, n, seed, r as u64).values[n - 1];
                (0.8 * w - h + k.density(n).ln()) / n as f64
            })
            .sum::<f64>()
            / replicas as f64;
        assert!(e.mean >= bound - 1e-12, "h = {h}: {} < {bound}", e.mean);
    }
}

#[test]
fn pure_limit_is_approached_monotonically() {
    let k = geometric_kernel(0.5).unwrap();
    let b = solve_free_energy_pure(&k, -1.0).b;
    let model = ModelSpec::pinning(&k, 0.0, -1.0);
    let n_list = [256, 512, 1024, 2048, 4096, 8192];
    let est = estimate_free_energy_many(&model, DisorderLaw::Gaussian, &n_list, 1, 0).unwrap();
    let gaps: Vec<f64> = est.iter().map(|e| (e.mean - b).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[gaps.len() - 1] < 0.01);
}

#[test]
fn copolymer_free_energy_is_nonnegative_within_error() {
    let k = depin_core::srw_kernel(10_000).unwrap();
    for h in [0.0, 0.3, 0.8, 2.0] {
        let model = ModelSpec::copolymer(&k, 1.0, h);
        let e = estimate_free_energy(&model, DisorderLaw::Gaussian, 2048, 16, 4).unwrap();
        assert!(e.mean >= -3.0 * e.stderr, "h = {h}: {e:?}");
        let (f, _) = e.copolymer_f.unwrap();
        assert!((f - e.mean - h / 2.0).abs() < 1e-12);
    }
}

#[test]
fn self_averaging_and_clt_scaling() {
    let k = power_kernel(2.0, 1, 10_000, 0.0).unwrap();
    let model = ModelSpec::pinning(&k, 1.0, 0.0);
    let sa = self_averaging_diagnostic(&model, DisorderLaw::Gaussian, &[512, 2048, 8192], 24, 2).unwrap();
    assert!(sa.decreasing, "{sa:?}");
    let small = estimate_free_energy(&model, DisorderLaw::Gaussian, 512, 100, 3).unwrap();
    let large = estimate_free_energy(&model, DisorderLaw::Gaussian, 512, 200, 3).unwrap();
    let ratio = (large.stderr / small.stderr).powi(2);
    assert!((ratio - 0.5).abs() <= 0.15, "{ratio}");
}
