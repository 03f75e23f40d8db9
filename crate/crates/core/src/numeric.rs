// SPDX-License-Identifier: Apache-2.0

//! Small numerical toolbox: stable log-sums, compensated summation,
//! power-law series, bracketed root finding and weighted straight-line fits.

/// `log(Σ exp(x_i))` with max-shift; `-inf` for empty or all `-inf` input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Neumaier's compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Dot product with four independent accumulators (vectorizes, fixed order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 4];
    let chunks = n / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..n {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

const EM_CUTOFF: usize = 1000;

/// Riemann zeta for real `s > 1` (direct sum plus Euler–Maclaurin tail).
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta requires s > 1, got {s}");
    let m = EM_CUTOFF as f64;
    let mut head = 0.0;
    for n in (1..EM_CUTOFF).rev() {
        head += (n as f64).powf(-s);
    }
    let tail = m.powf(1.0 - s) / (s - 1.0) + 0.5 * m.powf(-s) + s * m.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * m.powf(-s - 3.0) / 720.0;
    head + tail
}

// 8-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a || panels == 0 {
        return 0.0;
    }
    let width = (b - a) / panels as f64;
    let mut total = CompensatedSum::new();
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total.add(s * half);
    }
    total.value()
}

/// `Σ_{n≥1} n^{-α} (1 − e^{−xn})` for `α > 1`, `x ≥ 0`, without cancellation.
///
/// This is `ζ(α) − Li_α(e^{−x})`; the tail beyond a fixed cutoff is handled
/// by Euler–Maclaurin with the integral evaluated in logarithmic variables.
pub fn power_deficit(alpha: f64, x: f64) -> f64 {
    assert!(alpha > 1.0);
    if x <= 0.0 {
        return 0.0;
    }
    let m = EM_CUTOFF as f64;
    let mut head = 0.0;
    for n in (1..EM_CUTOFF).rev() {
        let nf = n as f64;
        head += nf.powf(-alpha) * -(-x * nf).exp_m1();
    }
    // Integral ∫_M^∞ t^{-α}(1 − e^{−xt}) dt with t = M e^u.
    let scale = m.powf(1.0 - alpha);
    let y0 = x * m;
    let u_star = if y0 >= 40.0 { 0.0 } else { (40.0 / y0).ln() };
    let body = integrate(
        |u| scale * ((1.0 - alpha) * u).exp() * -(-(y0 * u.exp())).exp_m1(),
        0.0,
        u_star,
        (u_star * 4.0).ceil() as usize,
    );
    let rest = scale * ((1.0 - alpha) * u_star).exp() / (alpha - 1.0);
    // Euler–Maclaurin boundary terms: f(M)/2 − f'(M)/12 + f'''(M)/720.
    let e = (-x * m).exp();
    let g0 = -(-x * m).exp_m1();
    let (g1, g2, g3) = (x * e, -x * x * e, x * x * x * e);
    let p0 = m.powf(-alpha);
    let p1 = -alpha * m.powf(-alpha - 1.0);
    let p2 = alpha * (alpha + 1.0) * m.powf(-alpha - 2.0);
    let p3 = -alpha * (alpha + 1.0) * (alpha + 2.0) * m.powf(-alpha - 3.0);
    let f0 = p0 * g0;
    let f1 = p1 * g0 + p0 * g1;
    let f3 = p3 * g0 + 3.0 * p2 * g1 + 3.0 * p1 * g2 + p0 * g3;
    head + body + rest + 0.5 * f0 - f1 / 12.0 + f3 / 720.0
}

/// Root of a continuous function on `[lo, hi]` with `f(lo)` and `f(hi)` of
/// opposite sign (Brent's method). Keeps the bracket at every step and stops
/// once the bracket is below `2ε|x| + abs_tol`.
pub fn brent_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, abs_tol: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    debug_assert!(fa * fb < 0.0, "root not bracketed");
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..500 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * abs_tol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    b
}

/// Result of a weighted straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Standard error of the intercept.
    pub intercept_err: f64,
    /// Standard error of the slope.
    pub slope_err: f64,
    /// Weighted residual sum of squares.
    pub chi2: f64,
}

/// Weighted least squares. With `weights = None` all points count equally and
/// the errors are scaled by the residual variance; with explicit weights
/// (`1/σ²`) the errors come from the weights alone.
pub fn line_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sw += w(i);
        sx += w(i) * xs[i];
        sy += w(i) * ys[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dx = xs[i] - mx;
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * (ys[i] - my);
    }
    if sxx <= 0.0 || !sxx.is_finite() {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = (0..n)
        .map(|i| {
            let r = ys[i] - intercept - slope * xs[i];
            w(i) * r * r
        })
        .sum();
    let sigma2 = match weights {
        Some(_) => 1.0,
        None if n > 2 => chi2 / (n - 2) as f64,
        None => 0.0,
    };
    let slope_var = sigma2 / sxx;
    let intercept_var = sigma2 * (1.0 / sw + mx * mx / sxx);
    Some(LineFit {
        intercept,
        slope,
        intercept_err: intercept_var.sqrt(),
        slope_err: slope_var.sqrt(),
        chi2,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Delete-one jackknife: `estimate(keep)` is evaluated with each sample index
/// left out in turn; returns (full estimate, jackknife standard error).
pub fn jackknife<F: FnMut(Option<usize>) -> f64>(samples: usize, mut estimate: F) -> (f64, f64) {
    let full = estimate(None);
    if samples < 2 {
        return (full, 0.0);
    }
    let loo: Vec<f64> = (0..samples).map(|i| estimate(Some(i))).collect();
    let mean = loo.iter().sum::<f64>() / samples as f64;
    let var = loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (samples - 1) as f64
        / samples as f64;
    (full, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_relative_eq!(log_add(-1.0, -2.0), log_sum_exp(&[-1.0, -2.0]));
    }

    #[test]
    fn zeta_known_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(zeta(2.0), pi * pi / 6.0, max_relative = 1e-14);
        assert_relative_eq!(zeta(4.0), pi.powi(4) / 90.0, max_relative = 1e-14);
        assert_relative_eq!(zeta(3.0), 1.202_056_903_159_594_2, max_relative = 1e-14);
        assert_relative_eq!(zeta(1.5), 2.612_375_348_685_488, max_relative = 1e-13);
    }

    #[test]
    fn power_deficit_matches_direct_sum_for_large_x() {
        // For x large enough the series converges long before the cutoff.
        for &alpha in &[1.25, 1.5, 3.0] {
            let x = 0.05;
            let direct: f64 = (1..200_000)
                .map(|n| (n as f64).powf(-alpha) * -(-(x * n as f64)).exp_m1())
                .sum::<f64>()
                + (zeta(alpha) - (1..200_000).map(|n| (n as f64).powf(-alpha)).sum::<f64>());
            assert_relative_eq!(power_deficit(alpha, x), direct, max_relative = 1e-10);
        }
    }

    #[test]
    fn power_deficit_small_x_asymptotics() {
        // α = 3: D(x) = ζ(2) x + O(x² log x).
        let x = 1e-9;
        assert_relative_eq!(power_deficit(3.0, x) / x, zeta(2.0), max_relative = 1e-6);
        // α = 1.5: D(x) ≈ Γ(−1/2)(−1) x^{1/2} = 2√π x^{1/2}.
        let x: f64 = 1e-12;
        let lead = 2.0 * std::f64::consts::PI.sqrt() * x.sqrt();
        assert_relative_eq!(power_deficit(1.5, x), lead, max_relative = 1e-4);
    }

    #[test]
    fn brent_finds_tiny_roots() {
        let root = brent_root(|b| b - 3e-13, 0.0, 1.0, 0.0);
        assert_relative_eq!(root, 3e-13, max_relative = 1e-12);
        let root = brent_root(|b| b.powi(3) - 2.0, 0.0, 4.0, 0.0);
        assert_relative_eq!(root, 2f64.powf(1.0 / 3.0), max_relative = 1e-14);
    }

    #[test]
    fn line_fit_exact_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x).collect();
        let fit = line_fit(&xs, &ys, None).unwrap();
        assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 1.5, epsilon = 1e-14);
        assert!(fit.slope_err < 1e-12);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let data = [1.0, 2.0, 4.0, 7.0, 11.0];
        let (_, se) = mean_stderr(&data);
        let (full, jk) = jackknife(data.len(), |skip| {
            let kept: Vec<f64> = data
                .iter()
                .enumerate()
                .filter(|(i, _)| Some(*i) != skip)
                .map(|(_, v)| *v)
                .collect();
            kept.iter().sum::<f64>() / kept.len() as f64
        });
        assert_relative_eq!(full, 5.0);
        assert_relative_eq!(jk, se, max_relative = 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let s: CompensatedSum = [1.0, 1e100, 1.0, -1e100].into_iter().collect();
        assert_eq!(s.value(), 2.0);
    }
}
