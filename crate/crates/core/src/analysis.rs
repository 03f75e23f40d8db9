// SPDX-License-Identifier: Apache-2.0

//! Legendre reconstruction, finite-size extrapolation, critical-point location,
//! exponent fits and the smoothing-envelope check.

use serde::Serialize;

use crate::disorder::{smoothing_constant, DisorderLaw, SmoothingConstant};
use crate::engine::{ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::estimator::{replica_free_energies, PhiCurve, ReplicaTable};
use crate::kernel::ReturnKernel;
use crate::numeric::{jackknife, line_fit, mean_stderr};
use crate::pure_solver::{hc_pure, pure_asymptotics, solve_free_energy_ideal, TransitionOrder};

/// `max_m (φ(m) − h m)` over the feasible grid points, with the maximizing `m`.
/// Ties go to the smaller `m`.
pub fn legendre_sup(phi: &PhiCurve, h: f64) -> Result<(f64, f64)> {
    let points: Vec<(f64, f64)> = phi
        .points
        .iter()
        .filter(|p| p.feasible)
        .map(|p| (p.m, p.value))
        .collect();
    legendre_sup_points(&points, h)
}

/// [`legendre_sup`] on bare `(m, φ(m))` pairs; non-finite values are skipped.
pub fn legendre_sup_points(points: &[(f64, f64)], h: f64) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for &(m, phi) in points {
        if !phi.is_finite() {
            continue;
        }
        let v = phi - h * m;
        best = match best {
            Some((bv, bm)) if bv > v || (bv == v && bm <= m) => Some((bv, bm)),
            _ => Some((v, m)),
        };
    }
    best.ok_or(Error::Infeasible)
}

/// Per-replica fit of `F_N = F_∞ + a log N / N` over the lengths in the table.
/// With a single length, `F_∞ = F_N`.
pub fn extrapolate_replicas(table: &ReplicaTable) -> Vec<f64> {
    let xs: Vec<f64> = table.n_list.iter().map(|&n| (n as f64).ln() / n as f64).collect();
    table
        .values
        .iter()
        .map(|row| {
            if xs.len() < 2 {
                row[0]
            } else {
                line_fit(&xs, row, None).map_or(row[row.len() - 1], |fit| fit.intercept)
            }
        })
        .collect()
}

/// One field value of a free-energy scan.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEvaluation {
    pub h: f64,
    /// Replica mean of the extrapolated free energy.
    pub f: f64,
    pub stderr: f64,
    /// Standard error of `F_N` at the largest `N`.
    pub stderr_largest_n: f64,
    /// Extrapolated value per replica.
    pub samples: Vec<f64>,
}

/// Everything that stays fixed while `h` varies.
#[derive(Debug, Clone, Copy)]
pub struct ScanSetup<'a> {
    pub kind: ModelKind,
    pub beta: f64,
    pub kernel: &'a ReturnKernel,
    pub law: DisorderLaw,
    pub n_list: &'a [usize],
    pub replicas: usize,
    pub seed: u64,
}

impl ScanSetup<'_> {
    fn model(&self, h: f64) -> ModelSpec<'_> {
        ModelSpec {
            kind: self.kind,
            beta: self.beta,
            h,
            kernel: self.kernel,
        }
    }

    /// Extrapolated free energy at `h`. Every `h` sees the same disorder.
    pub fn evaluate(&self, h: f64) -> Result<FieldEvaluation> {
        let table = replica_free_energies(&self.model(h), self.law, self.n_list, self.replicas, self.seed)?;
        let samples = extrapolate_replicas(&table);
        let (f, mut stderr) = mean_stderr(&samples);
        let (_, mut last) = mean_stderr(&table.column(self.n_list.len() - 1));
        if self.beta == 0.0 {
            stderr = 0.0;
            last = 0.0;
        }
        Ok(FieldEvaluation {
            h,
            f,
            stderr,
            stderr_largest_n: last,
            samples,
        })
    }

    /// Default search bracket: the pure critical point below, the annealed one
    /// (plus margin) above.
    pub fn default_bracket(&self) -> (f64, f64) {
        let log_m = self.law.log_mgf(self.beta);
        match self.kind {
            ModelKind::Pinning => {
                let hc0 = hc_pure(self.kernel);
                (hc0 - 1.0, hc0 + log_m + 0.5)
            }
            ModelKind::Copolymer => (0.0, log_m + 0.5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub hc: f64,
    /// Width of the final bisection bracket.
    pub uncertainty: f64,
    pub lo: f64,
    pub hi: f64,
    pub evaluations: usize,
}

/// Bisection on `h` of "extrapolated F exceeds 3× the largest-N standard
/// error", starting from `bracket` (or [`ScanSetup::default_bracket`]).
pub fn locate_hc(setup: &ScanSetup, tol: f64, bracket: Option<(f64, f64)>) -> Result<CriticalPoint> {
    if !(tol > 0.0) {
        return Err(crate::error::invalid("tol", "must be positive"));
    }
    let (mut lo, mut hi) = bracket.unwrap_or_else(|| setup.default_bracket());
    let localized = |h: f64| -> Result<bool> {
        let e = setup.evaluate(h)?;
        Ok(e.f > 3.0 * e.stderr_largest_n)
    };
    let mut evaluations = 2;
    if !localized(lo)? {
        return Err(Error::BracketNotFound {
            lo,
            hi,
            reason: format!("free energy is not positive at the lower end h = {lo}"),
        });
    }
    if localized(hi)? {
        return Err(Error::BracketNotFound {
            lo,
            hi,
            reason: format!("free energy is still positive at the upper end h = {hi}"),
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        evaluations += 1;
        if localized(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalPoint {
        hc: 0.5 * (lo + hi),
        uncertainty: hi - lo,
        lo,
        hi,
        evaluations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitPoint {
    pub h: f64,
    pub f: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalFit {
    pub hc: f64,
    pub hc_err: f64,
    pub exponent: f64,
    pub exponent_err: f64,
    /// `(h_lo, h_hi)` of the points used.
    pub fit_window: (f64, f64),
    /// `F/(h_c − h)²` at the fitted point closest to `h_c`.
    pub envelope_constant: f64,
    pub points: Vec<FitPoint>,
}

/// Indices of the points usable for a fit: below `h_c`, resolved
/// (`F > 3·stderr`) and at least `10·hc_err` away from `h_c`.
fn fit_selection(points: &[FitPoint], hc: f64, hc_err: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i];
            let dh = hc - p.h;
            dh > 0.0 && dh >= 10.0 * hc_err && p.f > 0.0 && p.f > 3.0 * p.stderr
        })
        .collect()
}

fn fit_selected(points: &[FitPoint], hc: f64, idx: &[usize]) -> Option<crate::numeric::LineFit> {
    let xs: Vec<f64> = idx.iter().map(|&i| (hc - points[i].h).ln()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| points[i].f.ln()).collect();
    let weighted = idx.iter().all(|&i| points[i].stderr > 0.0);
    let ws: Vec<f64> = idx
        .iter()
        .map(|&i| {
            let rel = points[i].stderr / points[i].f;
            1.0 / (rel * rel)
        })
        .collect();
    line_fit(&xs, &ys, weighted.then_some(ws.as_slice()))
}

/// Weighted least squares of `log F` on `log(h_c − h)`; the slope is the
/// critical exponent.
pub fn fit_exponent(points: &[FitPoint], hc: f64, hc_err: f64) -> Result<CriticalFit> {
    let idx = fit_selection(points, hc, hc_err);
    if idx.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "{} usable points (need 4 with F > 3·stderr and h_c − h ≥ 10·{hc_err})",
            idx.len()
        )));
    }
    let fit = fit_selected(points, hc, &idx)
        .ok_or_else(|| Error::DegenerateFit("all points share one h".to_string()))?;
    let used: Vec<FitPoint> = idx.iter().map(|&i| points[i]).collect();
    let closest = used
        .iter()
        .min_by(|a, b| (hc - a.h).partial_cmp(&(hc - b.h)).unwrap())
        .unwrap();
    let lo = used.iter().map(|p| p.h).fold(f64::INFINITY, f64::min);
    let hi = used.iter().map(|p| p.h).fold(f64::NEG_INFINITY, f64::max);
    Ok(CriticalFit {
        hc,
        hc_err,
        exponent: fit.slope,
        exponent_err: fit.slope_err,
        fit_window: (lo, hi),
        envelope_constant: closest.f / (hc - closest.h).powi(2),
        points: used,
    })
}

/// Exponent fit with a delete-one-replica jackknife error; `samples[i][r]` is
/// replica `r` at `hs[i]`. The point selection is frozen at the full sample.
pub fn fit_exponent_jackknife(hs: &[f64], samples: &[Vec<f64>], hc: f64, hc_err: f64) -> Result<CriticalFit> {
    let points: Vec<FitPoint> = hs
        .iter()
        .zip(samples)
        .map(|(&h, s)| {
            let (f, stderr) = mean_stderr(s);
            FitPoint { h, f, stderr }
        })
        .collect();
    let mut fit = fit_exponent(&points, hc, hc_err)?;
    let idx = fit_selection(&points, hc, hc_err);
    let replicas = samples.first().map_or(0, |s| s.len());
    let (_, se) = jackknife(replicas, |drop| {
        let pts: Vec<FitPoint> = hs
            .iter()
            .zip(samples)
            .map(|(&h, s)| {
                let kept: Vec<f64> = s
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| Some(*r) != drop)
                    .map(|(_, v)| *v)
                    .collect();
                let (f, stderr) = mean_stderr(&kept);
                FitPoint { h, f, stderr }
            })
            .collect();
        if idx.iter().any(|&i| !(pts[i].f > 0.0)) {
            return f64::NAN;
        }
        fit_selected(&pts, hc, &idx).map_or(f64::NAN, |f| f.slope)
    });
    if se.is_finite() {
        fit.exponent_err = se;
    }
    Ok(fit)
}

/// Chord slope `b/(h_c − h)` of the pure free energy, the finite difference
/// from the critical point where `b = 0`.
pub fn pure_chord_slopes(kernel: &ReturnKernel, delta_h: &[f64]) -> Vec<(f64, f64)> {
    let hc = hc_pure(kernel);
    delta_h
        .iter()
        .map(|&dh| (dh, solve_free_energy_ideal(kernel, hc - dh).b / dh))
        .collect()
}

/// `n` points spaced evenly in `log` between `lo` and `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// The β = 0 model on the same kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PureContrast {
    pub hc: f64,
    pub first_order: bool,
    pub predicted_slope: Option<f64>,
    pub predicted_exponent: f64,
    /// `(h_c − h, b/(h_c − h))` over the probed window.
    pub chord_slopes: Vec<(f64, f64)>,
    /// Largest relative deviation of the chord slope from the prediction.
    pub max_slope_deviation: Option<f64>,
    pub fitted_exponent: f64,
}

fn pure_contrast(kernel: &ReturnKernel) -> Result<PureContrast> {
    let asym = pure_asymptotics(kernel)?;
    let grid = log_grid(1e-4, 1e-2, 12);
    let chords = pure_chord_slopes(kernel, &grid);
    let max_dev = asym.slope.map(|s| {
        chords
            .iter()
            .map(|&(_, c)| (c / s - 1.0).abs())
            .fold(0.0, f64::max)
    });
    let points: Vec<FitPoint> = chords
        .iter()
        .map(|&(dh, c)| FitPoint {
            h: asym.hc - dh,
            f: c * dh,
            stderr: 0.0,
        })
        .collect();
    let fitted = fit_exponent(&points, asym.hc, 0.0)?.exponent;
    Ok(PureContrast {
        hc: asym.hc,
        first_order: asym.order == TransitionOrder::First && max_dev.is_some_and(|d| d < 0.01),
        predicted_slope: asym.slope,
        predicted_exponent: asym.exponent,
        chord_slopes: chords,
        max_slope_deviation: max_dev,
        fitted_exponent: fitted,
    })
}

#[derive(Debug, Clone)]
pub struct SmoothingConfig<'a> {
    pub kind: ModelKind,
    pub kernel: &'a ReturnKernel,
    pub law: DisorderLaw,
    pub beta: f64,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub seed: u64,
    /// Bisection tolerance for `h_c`.
    pub tol: f64,
    /// Scan range of `h_c − h` below the critical point.
    pub dh_range: (f64, f64),
    pub points: usize,
    /// Extra points above `h_c`, for contrast.
    pub points_above: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanPoint {
    pub h: f64,
    pub dh: f64,
    pub f: f64,
    pub stderr: f64,
    /// `α c(β) (h_c − h)²`.
    pub envelope: f64,
    pub below_envelope: bool,
    /// `F/(h_c − h)` and its standard error.
    pub ratio: f64,
    pub ratio_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub beta: f64,
    pub alpha: f64,
    pub critical: CriticalPoint,
    pub constant: SmoothingConstantReport,
    pub exponent: f64,
    pub exponent_err: f64,
    /// `exponent − 2·exponent_err`.
    pub exponent_lower_bound: f64,
    /// One-sided verdict: the lower 2σ bound is at least 1.5.
    pub exponent_at_least_three_halves: bool,
    pub envelope_ok: bool,
    pub ratio_decreasing: bool,
    /// Scan points below `h_c`, by increasing `h`.
    pub points: Vec<ScanPoint>,
    /// Scan points above `h_c` (informational).
    pub points_above: Vec<ScanPoint>,
    pub fit_window: (f64, f64),
    pub pure: PureContrast,
    pub resolution: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingConstantReport {
    pub big_c: f64,
    pub c: f64,
    pub proof_grade: bool,
    pub vacuous: bool,
}

impl From<SmoothingConstant> for SmoothingConstantReport {
    fn from(c: SmoothingConstant) -> Self {
        Self {
            big_c: c.big_c,
            c: c.c,
            proof_grade: c.proof_grade,
            vacuous: c.vacuous,
        }
    }
}

/// Locates `h_c(β)`, scans the free energy below it, fits the exponent and
/// compares it with the smoothing envelope and with the pure model.
pub fn smoothing_check(cfg: &SmoothingConfig) -> Result<SmoothingReport> {
    if !(cfg.beta > 0.0) {
        return Err(crate::error::invalid("beta", "the smoothing check needs beta > 0"));
    }
    let alpha = cfg
        .kernel
        .alpha()
        .ok_or_else(|| Error::Unsupported("the envelope needs a declared alpha".to_string()))?;
    let constant = smoothing_constant(cfg.beta, alpha, cfg.law)?;
    let setup = ScanSetup {
        kind: cfg.kind,
        beta: cfg.beta,
        kernel: cfg.kernel,
        law: cfg.law,
        n_list: &cfg.n_list,
        replicas: cfg.replicas,
        seed: cfg.seed,
    };
    let critical = locate_hc(&setup, cfg.tol, None)?;
    let hc = critical.hc;

    let mut dhs = log_grid(cfg.dh_range.0, cfg.dh_range.1, cfg.points);
    dhs.reverse(); // increasing h
    let evals: Vec<FieldEvaluation> = dhs
        .iter()
        .map(|&dh| setup.evaluate(hc - dh))
        .collect::<Result<_>>()?;
    let scan_point = |e: &FieldEvaluation| {
        let dh = hc - e.h;
        let envelope = constant.envelope(alpha, dh);
        ScanPoint {
            h: e.h,
            dh,
            f: e.f,
            stderr: e.stderr,
            envelope,
            below_envelope: e.f <= envelope + 3.0 * e.stderr,
            ratio: e.f / dh,
            ratio_err: e.stderr / dh.abs(),
        }
    };
    let points: Vec<ScanPoint> = evals.iter().map(scan_point).collect();
    let above_dh = log_grid(cfg.dh_range.0, cfg.dh_range.1, cfg.points_above.max(1));
    let points_above: Vec<ScanPoint> = if cfg.points_above == 0 {
        Vec::new()
    } else {
        above_dh
            .iter()
            .map(|&dh| setup.evaluate(hc + dh).map(|e| scan_point(&e)))
            .collect::<Result<_>>()?
    };

    let hs: Vec<f64> = evals.iter().map(|e| e.h).collect();
    let samples: Vec<Vec<f64>> = evals.iter().map(|e| e.samples.clone()).collect();
    let fit = fit_exponent_jackknife(&hs, &samples, hc, critical.uncertainty)?;

    // Paired per-replica differences of consecutive ratios, by increasing h.
    let mut ratio_decreasing = true;
    for w in evals.windows(2) {
        let (d0, d1) = (hc - w[0].h, hc - w[1].h);
        if d1 < 10.0 * critical.uncertainty {
            continue;
        }
        let diffs: Vec<f64> = w[0]
            .samples
            .iter()
            .zip(&w[1].samples)
            .map(|(a, b)| b / d1 - a / d0)
            .collect();
        let (mean, se) = mean_stderr(&diffs);
        if mean > 3.0 * se {
            ratio_decreasing = false;
        }
    }

    let lower = fit.exponent - 2.0 * fit.exponent_err;
    Ok(SmoothingReport {
        beta: cfg.beta,
        alpha,
        critical,
        constant: constant.into(),
        exponent: fit.exponent,
        exponent_err: fit.exponent_err,
        exponent_lower_bound: lower,
        exponent_at_least_three_halves: lower >= 1.5,
        envelope_ok: points.iter().all(|p| p.below_envelope),
        ratio_decreasing,
        fit_window: fit.fit_window,
        points,
        points_above,
        pure: pure_contrast(cfg.kernel)?,
        resolution: format!(
            "N up to {}, {} replicas: free energies below ~{:.1e} are not resolved",
            cfg.n_list.last().copied().unwrap_or(0),
            cfg.replicas,
            evals.first().map_or(0.0, |e| 3.0 * e.stderr_largest_n),
        ),
    })
}
