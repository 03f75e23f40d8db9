// SPDX-License-Identifier: Apache-2.0

//! The non-disordered model. Its free energy `b = F(0, h)` is the root of
//! `Σ K(n) e^{−bn} = e^h`, which exists exactly when `h < log(1 − K(∞))`.

use crate::error::{Error, Result};
use crate::kernel::{IdealLaw, ReturnKernel};
use crate::numeric::brent_root;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureSolution {
    pub b: f64,
    pub h: f64,
    /// `|Σ K(n)e^{−bn} − e^h|` when `b > 0`, else 0.
    pub residual: f64,
    pub localized: bool,
}

/// Free energy of the tabulated (truncated) law, the one the transfer
/// recursion sees.
pub fn solve_free_energy_pure(kernel: &ReturnKernel, h: f64) -> PureSolution {
    solve_with(kernel, h, |b| kernel.deficit(b))
}

/// Free energy of the untruncated law when a closed form is known, otherwise
/// identical to [`solve_free_energy_pure`].
pub fn solve_free_energy_ideal(kernel: &ReturnKernel, h: f64) -> PureSolution {
    solve_with(kernel, h, |b| kernel.ideal_deficit(b))
}

/// Root of `deficit(b) = (1 − K(∞)) − e^h`, the target written as
/// `−q·expm1(h − log q)` so it keeps full relative precision near `h_c`.
fn solve_with<D: Fn(f64) -> f64>(kernel: &ReturnKernel, h: f64, deficit: D) -> PureSolution {
    let hc = hc_pure(kernel);
    let q = 1.0 - kernel.defect_mass();
    let target = -q * (h - hc).exp_m1();
    let delocalized = PureSolution {
        b: 0.0,
        h,
        residual: 0.0,
        localized: false,
    };
    if !(target > 0.0) {
        return delocalized;
    }
    let mut hi = 1.0;
    while deficit(hi) < target {
        hi *= 2.0;
        if hi > 1e6 {
            break;
        }
    }
    let b = brent_root(|b| deficit(b) - target, 0.0, hi, 0.0);
    if !(b > 0.0) {
        return delocalized;
    }
    PureSolution {
        b,
        h,
        residual: (deficit(b) - target).abs(),
        localized: true,
    }
}

/// `h_c(0) = log(1 − K(∞))`.
pub fn hc_pure(kernel: &ReturnKernel) -> f64 {
    // `+ 0.0` turns `ln_1p(-0.0) = -0.0` into `0.0`.
    (-kernel.defect_mass()).ln_1p() + 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionOrder {
    First,
    Second,
    Higher,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureAsymptotics {
    pub hc: f64,
    /// `Σ n K(n)` of the ideal law, `+∞` when it diverges.
    pub mean_return_time: f64,
    pub order: TransitionOrder,
    /// `F(0, h) ≈ slope·(h_c − h)` for first-order transitions.
    pub slope: Option<f64>,
    /// `F(0, h) ≈ (h_c − h)^exponent`; 1 for first order.
    pub exponent: f64,
    /// Set at `α = 2`, where slowly varying corrections are expected.
    pub log_corrections: bool,
}

/// Classifies the pure transition from the ideal law's mean return time and
/// the declared tail exponent.
pub fn pure_asymptotics(kernel: &ReturnKernel) -> Result<PureAsymptotics> {
    let hc = hc_pure(kernel);
    let sigma = kernel.ideal_mean_return_time().ok_or_else(|| {
        Error::Unsupported(
            "tabulated kernel without a declared alpha: cannot decide whether the mean return time is finite"
                .to_string(),
        )
    })?;
    if sigma.is_finite() {
        return Ok(PureAsymptotics {
            hc,
            mean_return_time: sigma,
            order: TransitionOrder::First,
            slope: Some(hc.exp() / sigma),
            exponent: 1.0,
            log_corrections: false,
        });
    }
    let alpha = match (kernel.ideal(), kernel.alpha()) {
        (IdealLaw::SimpleRandomWalk, _) => 1.5,
        (_, Some(a)) => a,
        _ => return Err(Error::Unsupported("infinite mean return time without a tail exponent".to_string())),
    };
    let exponent = 1.0 / (alpha - 1.0);
    let order = if alpha >= 1.5 {
        TransitionOrder::Second
    } else {
        TransitionOrder::Higher
    };
    Ok(PureAsymptotics {
        hc,
        mean_return_time: sigma,
        order,
        slope: None,
        exponent,
        log_corrections: alpha == 2.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{geometric_kernel, geometric_kernel_with, power_kernel, srw_kernel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geometric_closed_form(p: f64, h: f64) -> f64 {
        (1.0 - p + p * h.exp()).ln() - h
    }

    #[test]
    fn geometric_matches_closed_form() {
        for &p in &[0.3, 0.5, 0.8] {
            let k = geometric_kernel(p).unwrap();
            for i in 1..=300 {
                let h = -3.0 * i as f64 / 300.0;
                let sol = solve_free_energy_pure(&k, h);
                assert!(sol.localized);
                assert!((sol.b - geometric_closed_form(p, h)).abs() < 1e-10, "p={p} h={h}");
                assert!(sol.residual <= 1e-12);
            }
        }
        let sol = solve_free_energy_pure(&geometric_kernel(0.5).unwrap(), -1.0);
        assert!((sol.b - 0.620_114_5).abs() < 1e-7);
    }

    #[test]
    fn single_atom_kernel() {
        let k = ReturnKernel::tabulated(1, 0.0, None, vec![1.0]).unwrap();
        let sol = solve_free_energy_pure(&k, -0.3);
        assert_relative_eq!(sol.b, 0.3, max_relative = 1e-14);
    }

    #[test]
    fn delocalized_above_log_mass() {
        let k = geometric_kernel_with(0.5, 0.5, None).unwrap();
        for &h in &[-0.69314718, -0.5, 0.0, 2.0] {
            let sol = solve_free_energy_pure(&k, h);
            assert_eq!(sol.b, 0.0);
            assert!(!sol.localized);
        }
        assert!(solve_free_energy_pure(&k, -0.7).localized);
    }

    #[test]
    fn critical_point_formula() {
        assert_eq!(hc_pure(&geometric_kernel(0.5).unwrap()), 0.0);
        let k = geometric_kernel_with(0.5, 0.5, None).unwrap();
        assert_relative_eq!(hc_pure(&k), -std::f64::consts::LN_2, max_relative = 1e-15);
        // The switch to b = 0 happens at h_c.
        let eps = 1e-9;
        assert!(solve_free_energy_pure(&k, hc_pure(&k) - eps).b > 0.0);
        assert_eq!(solve_free_energy_pure(&k, hc_pure(&k) + eps).b, 0.0);
    }

    #[test]
    fn first_order_classification() {
        let k = power_kernel(3.0, 1, 1_000_000, 0.0).unwrap();
        let a = pure_asymptotics(&k).unwrap();
        assert_eq!(a.order, TransitionOrder::First);
        // Partial zeta sums as the oracle for Σ = ζ(2)/ζ(3).
        let z2: f64 = (1..=2_000_000u64).rev().map(|n| (n as f64).powi(-2)).sum::<f64>() + 1.0 / 2e6;
        let z3: f64 = (1..=2_000_000u64).rev().map(|n| (n as f64).powi(-3)).sum();
        assert_relative_eq!(a.mean_return_time, z2 / z3, max_relative = 1e-9);
        assert_relative_eq!(a.slope.unwrap(), z3 / z2, max_relative = 1e-9);
        assert!((a.slope.unwrap() - 0.7309).abs() < 5e-4);

        let geo = pure_asymptotics(&geometric_kernel(0.5).unwrap()).unwrap();
        assert_eq!(geo.order, TransitionOrder::First);
        assert_relative_eq!(geo.slope.unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn exponent_classification() {
        let srw = pure_asymptotics(&srw_kernel(100).unwrap()).unwrap();
        assert_eq!(srw.order, TransitionOrder::Second);
        assert_eq!(srw.exponent, 2.0);
        let k = pure_asymptotics(&power_kernel(1.25, 1, 100, 0.0).unwrap()).unwrap();
        assert_eq!(k.order, TransitionOrder::Higher);
        assert_relative_eq!(k.exponent, 4.0);
        let two = pure_asymptotics(&power_kernel(2.0, 1, 100, 0.0).unwrap()).unwrap();
        assert_eq!(two.exponent, 1.0);
        assert!(two.log_corrections);
        let tab = ReturnKernel::tabulated(1, 0.0, None, vec![0.5, 0.5]).unwrap();
        assert!(pure_asymptotics(&tab).is_err());
    }

    #[test]
    fn slope_near_criticality() {
        let k = power_kernel(3.0, 1, 1_000_000, 0.0).unwrap();
        let slope = pure_asymptotics(&k).unwrap().slope.unwrap();
        let b = |dh: f64| solve_free_energy_ideal(&k, -dh).b;
        for &dh in &[1e-4, 1e-3] {
            let fd = (b(dh) - b(dh / 2.0)) / (dh / 2.0);
            assert!((fd / slope - 1.0).abs() < 0.01, "dh={dh} fd={fd}");
        }
    }

    proptest! {
        #[test]
        fn b_is_monotone_and_verified(p in 0.05f64..0.95, h1 in -4.0f64..0.5, h2 in -4.0f64..0.5) {
            let k = geometric_kernel(p).unwrap();
            let (lo, hi) = if h1 < h2 { (h1, h2) } else { (h2, h1) };
            let a = solve_free_energy_pure(&k, lo);
            let b = solve_free_energy_pure(&k, hi);
            prop_assert!(a.b >= b.b);
            if a.b > 0.0 && lo < hi {
                prop_assert!(a.b > b.b);
            }
            prop_assert!(a.residual <= 1e-12 && b.residual <= 1e-12);
            prop_assert_eq!(a.localized, a.b > 0.0);
        }

        #[test]
        fn power_kernel_roots_verified(alpha in 1.1f64..4.0, h in -3.0f64..-1e-6) {
            let k = power_kernel(alpha, 1, 2000, 0.0).unwrap();
            let sol = solve_free_energy_pure(&k, h);
            prop_assert!(sol.localized);
            let direct: f64 = (1..=2000).map(|n| k.density(n) * (-sol.b * n as f64).exp()).sum();
            prop_assert!((direct - h.exp()).abs() <= 1e-12);
        }
    }
}
