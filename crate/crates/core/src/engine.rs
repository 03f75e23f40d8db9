// SPDX-License-Identifier: Apache-2.0

//! Transfer recursions for the quenched partition functions.
//!
//! Scalar recursions run in the linear domain against a moving log-scale:
//! the buffer holds `Z_a e^{−S}` where `S` tracks the maximum of `log Z` over
//! the kernel window, so every stored value sits within `e^{±300}` of the
//! window maximum and the inner loop is a plain dot product with the kernel.
//! `log Z` itself is recorded exactly as `ln(acc) + log w + S`.
//!
//! Contact-resolved tables store each row in block floating point: `B`
//! consecutive `j` share a binary exponent, so rows spanning thousands of
//! orders of magnitude in `j` cost one multiply-add per entry.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::kernel::ReturnKernel;
use crate::numeric::{dot, log_add, log_sum_exp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Pinning,
    Copolymer,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Pinning => "pinning",
            ModelKind::Copolymer => "copolymer",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pinning" => Ok(ModelKind::Pinning),
            "copolymer" => Ok(ModelKind::Copolymer),
            other => Err(invalid("model", format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModelSpec<'a> {
    pub kind: ModelKind,
    pub beta: f64,
    pub h: f64,
    pub kernel: &'a ReturnKernel,
}

impl<'a> ModelSpec<'a> {
    pub fn pinning(kernel: &'a ReturnKernel, beta: f64, h: f64) -> Self {
        Self {
            kind: ModelKind::Pinning,
            beta,
            h,
            kernel,
        }
    }

    pub fn copolymer(kernel: &'a ReturnKernel, beta: f64, h: f64) -> Self {
        Self {
            kind: ModelKind::Copolymer,
            beta,
            h,
            kernel,
        }
    }

    pub fn with_h(self, h: f64) -> Self {
        Self { h, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.h.is_finite() {
            return Err(invalid("beta/h", "must be finite"));
        }
        if self.kind == ModelKind::Copolymer && (self.beta < 0.0 || self.h < 0.0) {
            return Err(invalid("beta/h", "copolymer is parametrized by beta, h >= 0"));
        }
        Ok(())
    }
}

fn check_length(kernel: &ReturnKernel, omega: &[f64], n: usize) -> Result<usize> {
    let s = kernel.period();
    if n == 0 {
        return Err(invalid("N", "must be positive"));
    }
    if !n.is_multiple_of(s) {
        return Err(Error::NotMultipleOfPeriod { n, period: s });
    }
    if omega.len() < n {
        return Err(Error::DisorderTooShort {
            have: omega.len(),
            need: n,
        });
    }
    Ok(n / s)
}

/// `log Z_n` at every `n = 0, s, 2s, …, N`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPartitionTable {
    pub kind: ModelKind,
    period: usize,
    logz: Vec<f64>,
}

impl LogPartitionTable {
    pub fn period(&self) -> usize {
        self.period
    }

    /// Largest length in the table.
    pub fn len(&self) -> usize {
        (self.logz.len() - 1) * self.period
    }

    pub fn is_empty(&self) -> bool {
        self.logz.len() <= 1
    }

    /// `log Z_n`; `n` must be a multiple of the period within the table.
    pub fn log_z(&self, n: usize) -> f64 {
        assert_eq!(n % self.period, 0, "length {n} is not a multiple of {}", self.period);
        self.logz[n / self.period]
    }

    /// Entries indexed by `n/s`.
    pub fn values(&self) -> &[f64] {
        &self.logz
    }
}

/// Monotone deque giving the maximum of `log Z` over a sliding window.
struct WindowMax {
    items: VecDeque<(usize, f64)>,
}

impl WindowMax {
    fn new() -> Self {
        Self {
            items: VecDeque::new(),
        }
    }

    fn push(&mut self, pos: usize, value: f64) {
        while self.items.back().is_some_and(|&(_, v)| v <= value) {
            self.items.pop_back();
        }
        self.items.push_back((pos, value));
    }

    /// Drops positions below `first`.
    fn evict(&mut self, first: usize) {
        while self.items.front().is_some_and(|&(p, _)| p < first) {
            self.items.pop_front();
        }
    }

    fn max(&self) -> f64 {
        self.items.front().map_or(f64::NEG_INFINITY, |&(_, v)| v)
    }
}

const RESCALE_GAP: f64 = 300.0;

/// Scaled linear buffer of `X_a = e^{ℓ_a}` for the dot product
/// `Σ_k K_k X_{i−k}`, stored in reverse so the window is contiguous.
struct ScaledWindow {
    buf: Vec<f64>,
    logs: Vec<f64>,
    scale: f64,
    peak: WindowMax,
    top: usize,
    width: usize,
}

impl ScaledWindow {
    fn new(positions: usize, width: usize) -> Self {
        Self {
            buf: vec![0.0; positions + 1],
            logs: vec![f64::NEG_INFINITY; positions + 1],
            scale: 0.0,
            peak: WindowMax::new(),
            top: positions,
            width,
        }
    }

    /// `log Σ_{k=1}^{min(i, W)} atoms[k−1] X_{i−k}`.
    fn log_dot(&self, atoms: &[f64], i: usize) -> f64 {
        let w = i.min(self.width);
        let start = self.top - i + 1;
        let acc = dot(&atoms[..w], &self.buf[start..start + w]);
        if acc.is_normal() && acc > 1e-290 {
            acc.ln() + self.scale
        } else {
            // Everything in the window underflowed against the scale; redo in logs.
            let terms: Vec<f64> = (1..=w)
                .filter(|&k| atoms[k - 1] > 0.0)
                .map(|k| atoms[k - 1].ln() + self.logs[i - k])
                .collect();
            log_sum_exp(&terms)
        }
    }

    /// Records `ℓ_i` and slides the window so it serves position `i + 1`.
    fn push(&mut self, i: usize, log_value: f64) {
        self.logs[i] = log_value;
        self.peak.push(i, log_value);
        let first = (i + 1).saturating_sub(self.width);
        self.peak.evict(first);
        let peak = self.peak.max();
        if peak.is_finite() && (peak - self.scale).abs() > RESCALE_GAP {
            let factor = (self.scale - peak).exp();
            for a in first..i {
                self.buf[self.top - a] *= factor;
            }
            self.scale = peak;
        }
        self.buf[self.top - i] = (log_value - self.scale).exp();
    }
}

/// `log Z_n` for the pinned-endpoint pinning model at every `n ≤ N`:
/// `Z_n = e^{βω_n − h} Σ_k K(k) Z_{n−k}`.
pub fn log_partition_pinning(model: &ModelSpec, omega: &[f64], n: usize) -> Result<LogPartitionTable> {
    model.validate()?;
    let kernel = model.kernel;
    let positions = check_length(kernel, omega, n)?;
    let s = kernel.period();
    let atoms = kernel.atoms();
    let mut window = ScaledWindow::new(positions, atoms.len());
    let mut logz = vec![f64::NEG_INFINITY; positions + 1];
    logz[0] = 0.0;
    window.push(0, 0.0);
    for i in 1..=positions {
        let charge = model.beta * omega[s * i - 1] - model.h;
        logz[i] = window.log_dot(atoms, i) + charge;
        window.push(i, logz[i]);
    }
    Ok(LogPartitionTable {
        kind: ModelKind::Pinning,
        period: s,
        logz,
    })
}

/// `log Z^f_N = log Σ_{n ≤ N} Z_n (K̄(N − n) + K(∞))` from a pinned table.
pub fn free_endpoint_from_table(table: &LogPartitionTable, kernel: &ReturnKernel, n: usize) -> f64 {
    let s = table.period();
    let terms: Vec<f64> = (0..=n / s)
        .filter_map(|i| {
            let unfinished = kernel.tail_mass(n - s * i) + kernel.defect_mass();
            (unfinished > 0.0).then(|| table.values()[i] + unfinished.ln())
        })
        .collect();
    log_sum_exp(&terms)
}

/// Free-endpoint partition function, the last excursion left unfinished.
pub fn log_partition_free_endpoint(model: &ModelSpec, omega: &[f64], n: usize) -> Result<f64> {
    let table = log_partition_pinning(model, omega, n)?;
    Ok(free_endpoint_from_table(&table, model.kernel, n))
}

/// Prefix sums `P_n = Σ_{j ≤ n} (βω_j + h)`, `P_0 = 0`.
fn charge_prefix(omega: &[f64], beta: f64, h: f64, n: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for w in &omega[..n] {
        acc += beta * w + h;
        p.push(acc);
    }
    p
}

/// Copolymer partition function in the Δ-form
/// `E[exp(−Σ (βω_n + h) 1{S_n < 0}); S_N = 0]`, at every `n ≤ N`.
///
/// An excursion over `a+1..a+n` weighs `(K(n)/2)(1 + e^{−Σ_{interior}(βω + h)})`.
/// When `n` has no interior (`n = 1`, only for `s = 1` kernels) this is `K(1)`.
/// With prefix sums the interior sum is `P_{n'−1} − P_a`, which splits the
/// recursion into two dot products, over `Z_a` and over `Z_a e^{P_a}`.
pub fn log_partition_copolymer(model: &ModelSpec, omega: &[f64], n: usize) -> Result<LogPartitionTable> {
    model.validate()?;
    let kernel = model.kernel;
    let positions = check_length(kernel, omega, n)?;
    let s = kernel.period();
    let atoms = kernel.atoms();
    let prefix = charge_prefix(omega, model.beta, model.h, n);
    let mut above = ScaledWindow::new(positions, atoms.len());
    let mut below = ScaledWindow::new(positions, atoms.len());
    let mut logz = vec![f64::NEG_INFINITY; positions + 1];
    logz[0] = 0.0;
    above.push(0, 0.0);
    below.push(0, 0.0);
    let ln_half = -std::f64::consts::LN_2;
    for i in 1..=positions {
        let up = above.log_dot(atoms, i);
        let down = below.log_dot(atoms, i) - prefix[s * i - 1];
        logz[i] = ln_half + log_add(up, down);
        above.push(i, logz[i]);
        below.push(i, logz[i] + prefix[s * i]);
    }
    Ok(LogPartitionTable {
        kind: ModelKind::Copolymer,
        period: s,
        logz,
    })
}

/// Dispatches on the model kind.
pub fn log_partition(model: &ModelSpec, omega: &[f64], n: usize) -> Result<LogPartitionTable> {
    match model.kind {
        ModelKind::Pinning => log_partition_pinning(model, omega, n),
        ModelKind::Copolymer => log_partition_copolymer(model, omega, n),
    }
}

// ---------------------------------------------------------------------------
// Contact-resolved tables

/// Entries per shared exponent.
const BLOCK: usize = 16;
/// Exponent of an all-zero block.
const EMPTY: i32 = i32::MIN / 4;

#[inline]
fn pow2(e: i32) -> f64 {
    if e < -1022 {
        0.0
    } else {
        debug_assert!(e <= 1023);
        f64::from_bits(((e + 1023) as u64) << 52)
    }
}

/// Splits a positive finite `x = m·2^e` with `m ∈ [0.5, 1)`.
#[inline]
fn frexp(x: f64) -> (f64, i32) {
    let bits = x.to_bits();
    let raw = ((bits >> 52) & 0x7ff) as i32;
    if raw == 0 {
        let (m, e) = frexp(x * pow2(64));
        return (m, e - 64);
    }
    let e = raw - 1022;
    (f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52)), e)
}

/// One row of a contact-resolved table: entry `j` is `mant[j]·2^{exp[j/B]}`.
#[derive(Debug, Clone, PartialEq)]
struct BlockRow {
    mant: Vec<f64>,
    exp: Vec<i32>,
    len: usize,
}

impl BlockRow {
    fn unit() -> Self {
        let mut mant = vec![0.0; BLOCK];
        mant[0] = 1.0;
        Self {
            mant,
            exp: vec![0],
            len: 1,
        }
    }

    fn blocks(&self) -> usize {
        self.exp.len()
    }

    fn log_value(&self, j: usize) -> f64 {
        if j >= self.len {
            return f64::NEG_INFINITY;
        }
        let m = self.mant[j];
        if m > 0.0 {
            m.ln() + self.exp[j / BLOCK] as f64 * std::f64::consts::LN_2
        } else {
            f64::NEG_INFINITY
        }
    }

    /// Largest exponent over source entries `lo..lo+B` (may straddle two blocks).
    #[inline]
    fn span_exp(&self, lo: isize) -> i32 {
        let hi = lo + BLOCK as isize - 1;
        if hi < 0 {
            return EMPTY;
        }
        let first = lo.max(0) as usize / BLOCK;
        let last = (hi as usize / BLOCK).min(self.blocks() - 1);
        (first..=last).map(|q| self.exp[q]).max().unwrap_or(EMPTY)
    }
}

/// Contribution `coef · 2^{coef_exp} · src[j − shift]` to a target row.
struct Term<'r> {
    coef: f64,
    coef_exp: i32,
    src: &'r BlockRow,
    shift: usize,
}

impl Term<'_> {
    fn from_log(log_coef: f64, src: &BlockRow, shift: usize) -> Option<Term<'_>> {
        if !log_coef.is_finite() {
            return None;
        }
        let e = (log_coef / std::f64::consts::LN_2).floor();
        let coef_exp = e as i32;
        Some(Term {
            coef: (log_coef - e * std::f64::consts::LN_2).exp(),
            coef_exp,
            src,
            shift,
        })
    }
}

/// Builds `Σ_terms coef·src[j − shift]` for `j < len`.
///
/// Pass one picks each target block's exponent as the largest incoming one,
/// so every product in pass two is at most `2·coef` and smaller ones are
/// scaled by exact powers of two.
fn accumulate(len: usize, terms: &[Term]) -> BlockRow {
    let blocks = len.div_ceil(BLOCK);
    let mut exp = vec![EMPTY; blocks];
    for t in terms {
        let reach = t.src.len + t.shift;
        for (b, slot) in exp.iter_mut().enumerate() {
            let lo = (b * BLOCK) as isize - t.shift as isize;
            if lo + BLOCK as isize <= 0 {
                continue;
            }
            if b * BLOCK >= reach {
                break;
            }
            let e = t.src.span_exp(lo);
            if e > EMPTY {
                *slot = (*slot).max(e + t.coef_exp);
            }
        }
    }

    let mut mant = vec![0.0; blocks * BLOCK];
    for t in terms {
        let reach = (t.src.len + t.shift).min(len);
        let mut j = t.shift;
        while j < reach {
            // Target segment [j, end) reads one source block.
            let src_j = j - t.shift;
            let q = src_j / BLOCK;
            let b = j / BLOCK;
            let end = reach.min((b + 1) * BLOCK).min(t.shift + (q + 1) * BLOCK);
            let se = t.src.exp[q];
            if se > EMPTY {
                let factor = t.coef * pow2(se + t.coef_exp - exp[b]);
                if factor > 0.0 {
                    let dst = &mut mant[j..end];
                    let src = &t.src.mant[src_j..src_j + (end - j)];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += factor * s;
                    }
                }
            }
            j = end;
        }
    }

    for b in 0..blocks {
        let chunk = &mut mant[b * BLOCK..(b + 1) * BLOCK];
        let top = chunk.iter().copied().fold(0.0, f64::max);
        if top > 0.0 {
            let (_, e) = frexp(top);
            let scale = pow2(-e);
            for v in chunk.iter_mut() {
                *v *= scale;
            }
            exp[b] += e;
        } else {
            exp[b] = EMPTY;
        }
    }
    BlockRow { mant, exp, len }
}

/// Default cap on `N/s` for contact-resolved tables (memory grows as `(N/s)²`).
pub const DEFAULT_CONSTRAINED_LIMIT: usize = 8192;

/// `log Ẑ_n(j)` for every `n ∈ sℕ, n ≤ N` and every contact count `j`.
///
/// Pinning: `j` is the number of returns, weights `e^{βω}` at returns and no
/// `h`. Copolymer: `j` is the number of sites with `S_n < 0`, weights
/// `e^{−βω}` on those sites and no `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedTable {
    pub kind: ModelKind,
    period: usize,
    rows: Vec<BlockRow>,
}

impl ConstrainedTable {
    pub fn period(&self) -> usize {
        self.period
    }

    /// Largest length in the table.
    pub fn len(&self) -> usize {
        (self.rows.len() - 1) * self.period
    }

    pub fn is_empty(&self) -> bool {
        self.rows.len() <= 1
    }

    /// Number of stored `j` at length `n` (`j = 0..count`).
    pub fn counts(&self, n: usize) -> usize {
        self.row(n).len
    }

    fn row(&self, n: usize) -> &BlockRow {
        assert_eq!(n % self.period, 0, "length {n} is not a multiple of {}", self.period);
        &self.rows[n / self.period]
    }

    /// `log Ẑ_n(j)`, `−∞` where no configuration has `j` contacts.
    pub fn log_z(&self, n: usize, j: usize) -> f64 {
        self.row(n).log_value(j)
    }

    /// All `log Ẑ_n(j)` for `j = 0..counts(n)`.
    pub fn row_logs(&self, n: usize) -> Vec<f64> {
        let row = self.row(n);
        (0..row.len).map(|j| row.log_value(j)).collect()
    }

    /// `log Σ_{j/n ∈ [m−ε, m+ε]} Ẑ_n(j)`.
    pub fn window(&self, n: usize, m: f64, eps: f64) -> f64 {
        let row = self.row(n);
        let nf = n as f64;
        let slack = 1e-9;
        let lo = ((m - eps) * nf - slack).ceil().max(0.0);
        let hi = ((m + eps) * nf + slack).floor();
        if hi < lo || lo >= row.len as f64 {
            return f64::NEG_INFINITY;
        }
        let (lo, hi) = (lo as usize, (hi as usize).min(row.len - 1));
        let terms: Vec<f64> = (lo..=hi).map(|j| row.log_value(j)).collect();
        log_sum_exp(&terms)
    }

    /// `log Σ_j Ẑ_n(j) e^{−hj}`, which is `log Z_n` at field `h`.
    pub fn legendre(&self, n: usize, h: f64) -> f64 {
        let terms: Vec<f64> = self
            .row_logs(n)
            .into_iter()
            .enumerate()
            .map(|(j, l)| l - h * j as f64)
            .collect();
        log_sum_exp(&terms)
    }

    /// `max_j (log Ẑ_n(j) − hj)`.
    pub fn legendre_max(&self, n: usize, h: f64) -> f64 {
        self.row_logs(n)
            .into_iter()
            .enumerate()
            .map(|(j, l)| l - h * j as f64)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Contact-resolved table up to `N`, refusing `N/s` above
/// [`DEFAULT_CONSTRAINED_LIMIT`].
pub fn log_partition_constrained(model: &ModelSpec, omega: &[f64], n: usize) -> Result<ConstrainedTable> {
    log_partition_constrained_with_limit(model, omega, n, DEFAULT_CONSTRAINED_LIMIT)
}

pub fn log_partition_constrained_with_limit(
    model: &ModelSpec,
    omega: &[f64],
    n: usize,
    limit: usize,
) -> Result<ConstrainedTable> {
    model.validate()?;
    let kernel = model.kernel;
    let positions = check_length(kernel, omega, n)?;
    if positions > limit {
        return Err(invalid(
            "N",
            format!("contact-resolved table with N/s = {positions} exceeds the limit {limit}"),
        ));
    }
    let s = kernel.period();
    let log_atoms: Vec<f64> = kernel
        .atoms()
        .iter()
        .map(|&k| if k > 0.0 { k.ln() } else { f64::NEG_INFINITY })
        .collect();
    let width = log_atoms.len();
    let mut rows = Vec::with_capacity(positions + 1);
    rows.push(BlockRow::unit());
    match model.kind {
        ModelKind::Pinning => {
            for i in 1..=positions {
                let charge = model.beta * omega[s * i - 1];
                let terms: Vec<Term> = (1..=i.min(width))
                    .filter_map(|k| Term::from_log(log_atoms[k - 1] + charge, &rows[i - k], 1))
                    .collect();
                let row = accumulate(i + 1, &terms);
                rows.push(row);
            }
        }
        ModelKind::Copolymer => {
            let q = charge_prefix(omega, model.beta, 0.0, n);
            let ln_half = -std::f64::consts::LN_2;
            for i in 1..=positions {
                let mut terms = Vec::with_capacity(2 * i.min(width));
                for k in 1..=i.min(width) {
                    let src = &rows[i - k];
                    let base = log_atoms[k - 1] + ln_half;
                    terms.extend(Term::from_log(base, src, 0));
                    let interior = q[s * i - 1] - q[s * (i - k)];
                    terms.extend(Term::from_log(base - interior, src, s * k - 1));
                }
                let row = accumulate(s * i, &terms);
                rows.push(row);
            }
        }
    }
    Ok(ConstrainedTable {
        kind: model.kind,
        period: s,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{geometric_kernel, power_kernel, srw_kernel};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn frexp_and_pow2() {
        for &x in &[1.0, 0.75, 3.0e-300, 1.7e300, 5e-320, 123.456] {
            let (m, e) = frexp(x);
            assert!((0.5..1.0).contains(&m), "{x}: {m}");
            if e >= -1022 {
                assert_eq!(m * pow2(e), x);
            }
        }
        assert_eq!(pow2(0), 1.0);
        assert_eq!(pow2(-1), 0.5);
        assert_eq!(pow2(-2000), 0.0);
    }

    #[test]
    fn single_excursion_and_small_cases() {
        let k = geometric_kernel(0.5).unwrap();
        let omega = [0.3, -1.2, 0.7];
        let m = ModelSpec::pinning(&k, 0.8, 0.1);
        let t = log_partition_pinning(&m, &omega, 1).unwrap();
        assert_relative_eq!(t.log_z(1), 0.8 * 0.3 - 0.1 + 0.5f64.ln(), max_relative = 1e-15);
        let zero = [0.0; 3];
        let t = log_partition_pinning(&ModelSpec::pinning(&k, 0.0, 0.0), &zero, 2).unwrap();
        assert_relative_eq!(t.log_z(2).exp(), 0.5, max_relative = 1e-15);
        let t = log_partition_pinning(&ModelSpec::pinning(&k, 0.0, 0.0), &zero, 3).unwrap();
        assert_relative_eq!(t.log_z(3).exp(), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn errors() {
        let k = srw_kernel(10).unwrap();
        let m = ModelSpec::pinning(&k, 1.0, 0.0);
        assert!(matches!(
            log_partition_pinning(&m, &[0.0; 10], 3),
            Err(Error::NotMultipleOfPeriod { n: 3, period: 2 })
        ));
        assert!(matches!(
            log_partition_pinning(&m, &[0.0; 3], 4),
            Err(Error::DisorderTooShort { have: 3, need: 4 })
        ));
        let c = ModelSpec::copolymer(&k, 1.0, -0.5);
        assert!(log_partition_copolymer(&c, &[0.0; 4], 4).is_err());
        assert!(log_partition_constrained_with_limit(&m, &[0.0; 40], 40, 10).is_err());
    }

    #[test]
    fn free_endpoint_two_cases() {
        let k = power_kernel(2.0, 2, 30, 0.2).unwrap();
        let omega = [0.4, -0.9];
        let m = ModelSpec::pinning(&k, 1.3, 0.2);
        let zf = log_partition_free_endpoint(&m, &omega, 2).unwrap().exp();
        let q = k.tail_mass(2) + k.defect_mass();
        let expected = q + k.density(2) * (1.3f64 * -0.9 - 0.2).exp();
        assert_relative_eq!(zf, expected, max_relative = 1e-14);
    }

    #[test]
    fn copolymer_at_zero_coupling_is_pinning() {
        let k = srw_kernel(100).unwrap();
        let omega: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = log_partition_copolymer(&ModelSpec::copolymer(&k, 0.0, 0.0), &omega, 40).unwrap();
        let p = log_partition_pinning(&ModelSpec::pinning(&k, 0.0, 0.0), &omega, 40).unwrap();
        for n in (2..=40).step_by(2) {
            assert!((c.log_z(n) - p.log_z(n)).abs() < 1e-13);
        }
        // P(S_4 = 0) for the simple random walk.
        assert_relative_eq!(c.log_z(4).exp(), 0.375, max_relative = 1e-14);
    }

    #[test]
    fn rescaling_over_long_runs() {
        // Strong attraction makes log Z grow by ~ N·5; the scale must follow.
        let k = power_kernel(3.0, 1, 50, 0.0).unwrap();
        let omega = vec![0.0; 2000];
        let t = log_partition_pinning(&ModelSpec::pinning(&k, 0.0, -5.0), &omega, 2000).unwrap();
        // With h = −5, the all-one-step path dominates: log Z ≥ N(5 + log K(1)).
        let bound = 2000.0 * (5.0 + k.density(1).ln());
        assert!(t.log_z(2000) >= bound && t.log_z(2000).is_finite());
        // And strong repulsion drives it down without losing the single excursion.
        let t = log_partition_pinning(&ModelSpec::pinning(&k, 0.0, 5.0), &omega, 2000).unwrap();
        assert!(t.values().iter().all(|v| v.is_finite()));
        let bound = 2000.0 * (-5.0 + k.density(1).ln());
        assert!(t.log_z(2000) >= bound);
    }

    #[test]
    fn constrained_single_excursion_and_all_steps() {
        let k = power_kernel(2.5, 1, 100, 0.0).unwrap();
        let omega: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).cos()).collect();
        let beta = 0.7;
        let t = log_partition_constrained(&ModelSpec::pinning(&k, beta, 0.0), &omega, 12).unwrap();
        assert_relative_eq!(t.log_z(12, 1), beta * omega[11] + k.density(12).ln(), max_relative = 1e-14);
        let all: f64 = 12.0 * k.density(1).ln() + beta * omega.iter().sum::<f64>();
        assert_relative_eq!(t.log_z(12, 12), all, max_relative = 1e-14);
        assert_eq!(t.log_z(12, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn block_rows_survive_wide_dynamic_range() {
        // SRW rows span e^{±1000} across j at N = 2048.
        let k = srw_kernel(5000).unwrap();
        let omega: Vec<f64> = (0..2048).map(|i| ((i * 7919) % 13) as f64 / 6.0 - 1.0).collect();
        let m = ModelSpec::pinning(&k, 1.0, 0.0);
        let t = log_partition_constrained(&m, &omega, 2048).unwrap();
        let z = log_partition_pinning(&m, &omega, 2048).unwrap();
        for &h in &[-1.0, 0.0, 0.5, 3.0] {
            let direct = log_partition_pinning(&m.with_h(h), &omega, 2048).unwrap().log_z(2048);
            assert!((t.legendre(2048, h) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }
        assert!((t.legendre(2048, 0.0) - z.log_z(2048)).abs() < 1e-9);
        let row = t.row_logs(2048);
        let finite = row.iter().filter(|v| v.is_finite()).count();
        assert_eq!(finite, 1024);
    }

    proptest! {
        #[test]
        fn legendre_identity(seed in 0u64..1000, beta in 0.0f64..2.0, h in -2.0f64..2.0, n in 1usize..160) {
            let k = power_kernel(2.2, 1, 64, 0.1).unwrap();
            let omega = crate::disorder::sample_replica(crate::disorder::DisorderLaw::Gaussian, n, seed, 0).values;
            let m = ModelSpec::pinning(&k, beta, h);
            let t = log_partition_constrained(&m, &omega, n).unwrap();
            let z = log_partition_pinning(&m, &omega, n).unwrap();
            for len in 1..=n {
                let lhs = t.legendre(len, h);
                prop_assert!((lhs - z.log_z(len)).abs() <= 1e-12 * z.log_z(len).abs().max(1.0));
            }
        }

        #[test]
        fn copolymer_legendre_identity(seed in 0u64..1000, beta in 0.0f64..2.0, h in 0.0f64..1.0,
                                       half in 1usize..60) {
            let k = srw_kernel(40).unwrap();
            let n = 2 * half;
            let omega = crate::disorder::sample_replica(crate::disorder::DisorderLaw::Uniform, n, seed, 1).values;
            let m = ModelSpec::copolymer(&k, beta, h);
            let t = log_partition_constrained(&m, &omega, n).unwrap();
            let z = log_partition_copolymer(&m, &omega, n).unwrap();
            for len in (2..=n).step_by(2) {
                let lhs = t.legendre(len, h);
                prop_assert!((lhs - z.log_z(len)).abs() <= 1e-12 * z.log_z(len).abs().max(1.0));
            }
        }

        #[test]
        fn monotone_and_convex_in_h(seed in 0u64..1000, beta in 0.0f64..2.0) {
            let k = srw_kernel(100).unwrap();
            let omega = crate::disorder::sample_replica(crate::disorder::DisorderLaw::Gaussian, 64, seed, 0).values;
            let hs = [-1.0, -0.5, 0.0, 0.5, 1.0];
            let vals: Vec<f64> = hs.iter().map(|&h| {
                log_partition_pinning(&ModelSpec::pinning(&k, beta, h), &omega, 64).unwrap().log_z(64)
            }).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for w in vals.windows(3) {
                prop_assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
            }
        }
    }
}
