// SPDX-License-Identifier: Apache-2.0

//! Return-time laws `K(·)` of the underlying renewal process.
//!
//! A [`ReturnKernel`] stores the atoms `K(s), K(2s), …, K(s·n_max)` of a
//! (possibly defective) law on `sℕ ∪ {∞}`. When a constructor truncates an
//! infinite law, the mass beyond the horizon is folded into the last atom so
//! the truncated law stays exactly normalized. Constructors that have a closed
//! form also remember the untruncated ("ideal") law, which the pure-model
//! asymptotics use.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Tolerance on `Σ K + K(∞) = 1` for every constructed kernel.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Tolerance accepted on tabulated input before it is rejected.
pub const INPUT_NORMALIZATION_TOL: f64 = 1e-9;

/// Closed form of the untruncated law, when one is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IdealLaw {
    /// First return of the ±1 simple random walk: `Σ K(n) e^{−bn} = 1 − √(1 − e^{−2b})`.
    SimpleRandomWalk,
    /// `K(sn) = scale · n^{−α}` for all `n ≥ 1`.
    Power { alpha: f64, scale: f64 },
    /// `K(n) = (1 − K(∞))(1 − p) p^{n−1}`.
    Geometric { p: f64 },
    /// Only the tabulated atoms are known.
    Tabulated,
}

#[derive(Debug, Clone)]
pub struct ReturnKernel {
    /// `atoms[i] = K(s·(i+1))`.
    atoms: Vec<f64>,
    /// `tail[i] = Σ_{k > i} K(s·k)`, `i = 0..=n_max`.
    tail: Vec<f64>,
    defect_mass: f64,
    period: usize,
    alpha: Option<f64>,
    alpha_onset: Option<usize>,
    ideal: IdealLaw,
}

impl ReturnKernel {
    /// Builds a kernel from tabulated atoms `K(s), K(2s), …`, checking the
    /// normalization to [`INPUT_NORMALIZATION_TOL`] and absorbing any residual
    /// up to that size into the last atom.
    pub fn tabulated(
        period: usize,
        defect_mass: f64,
        alpha: Option<f64>,
        atoms: Vec<f64>,
    ) -> Result<Self> {
        if period == 0 {
            return Err(invalid("s", "period must be positive"));
        }
        if atoms.is_empty() {
            return Err(invalid("atoms", "kernel needs at least one atom"));
        }
        if let Some(a) = alpha {
            if !(a >= 1.0) || !a.is_finite() {
                return Err(invalid("alpha", format!("need alpha >= 1, got {a}")));
            }
        }
        if !(0.0..1.0).contains(&defect_mass) {
            return Err(invalid("k_inf", format!("need 0 <= K(inf) < 1, got {defect_mass}")));
        }
        if let Some((i, v)) = atoms.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(invalid(
                "atoms",
                format!("K({}) = {v} is not a probability", period * (i + 1)),
            ));
        }
        let total = atoms.iter().copied().collect::<CompensatedSum>().value() + defect_mass;
        if (total - 1.0).abs() > INPUT_NORMALIZATION_TOL {
            return Err(Error::Normalization {
                total,
                tolerance: INPUT_NORMALIZATION_TOL,
            });
        }
        Ok(Self::assemble(period, defect_mass, alpha, atoms, IdealLaw::Tabulated))
    }

    /// Final assembly: exact renormalization into the last atom, tail sums and
    /// the declared-exponent onset.
    fn assemble(
        period: usize,
        defect_mass: f64,
        alpha: Option<f64>,
        mut atoms: Vec<f64>,
        ideal: IdealLaw,
    ) -> Self {
        let mass = atoms.iter().copied().collect::<CompensatedSum>().value();
        let last = atoms.len() - 1;
        atoms[last] = (atoms[last] + (1.0 - defect_mass - mass)).max(0.0);

        let mut tail = vec![0.0; atoms.len() + 1];
        let mut acc = CompensatedSum::new();
        for i in (0..atoms.len()).rev() {
            acc.add(atoms[i]);
            tail[i] = acc.value();
        }
        let alpha_onset = alpha.map(|a| exponent_onset(&atoms, a));
        Self {
            atoms,
            tail,
            defect_mass,
            period,
            alpha,
            alpha_onset,
            ideal,
        }
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Truncation horizon in units of the period.
    pub fn n_max(&self) -> usize {
        self.atoms.len()
    }

    /// Largest return time with positive probability, `s·n_max`.
    pub fn support(&self) -> usize {
        self.period * self.atoms.len()
    }

    pub fn defect_mass(&self) -> f64 {
        self.defect_mass
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    /// Smallest `n₀` such that `log K(sn)/log n ≥ −α − 0.1` for all
    /// `n₀ ≤ n ≤ n_max`; `n_max + 1` when the inequality never settles.
    pub fn alpha_onset(&self) -> Option<usize> {
        self.alpha_onset
    }

    pub fn ideal(&self) -> IdealLaw {
        self.ideal
    }

    /// `K(s·i)` for `i ≥ 1` (zero beyond the horizon).
    #[inline]
    pub fn atom(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.atoms.get(i - 1).copied().unwrap_or(0.0)
        }
    }

    /// All atoms, `K(s), K(2s), …, K(s·n_max)`.
    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    /// `K(n)` for a return time in steps.
    pub fn density(&self, n: usize) -> f64 {
        if !n.is_multiple_of(self.period) {
            0.0
        } else {
            self.atom(n / self.period)
        }
    }

    /// `K̄(n) = Σ_{j > n} K(j)`, not counting `K(∞)`.
    pub fn tail_mass(&self, n: usize) -> f64 {
        let i = n / self.period;
        self.tail.get(i).copied().unwrap_or(0.0)
    }

    /// `Σ_n K(n)` of the tabulated law.
    pub fn mass(&self) -> f64 {
        self.tail[0]
    }

    /// `Σ_n n K(n)` of the tabulated law.
    pub fn mean_return_time(&self) -> f64 {
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, k)| (self.period * (i + 1)) as f64 * k)
            .collect::<CompensatedSum>()
            .value()
    }

    /// `Σ_n K(n) e^{−bn}` of the tabulated law.
    pub fn laplace(&self, b: f64) -> f64 {
        self.mass() - self.deficit(b)
    }

    /// `Σ_n K(n) (1 − e^{−bn})` of the tabulated law, accurate for tiny `b`.
    pub fn deficit(&self, b: f64) -> f64 {
        if b == 0.0 {
            return 0.0;
        }
        let s = self.period as f64;
        let mut acc = CompensatedSum::new();
        for (i, k) in self.atoms.iter().enumerate() {
            if *k > 0.0 {
                acc.add(k * -(-b * s * (i + 1) as f64).exp_m1());
            }
        }
        acc.value()
    }

    /// `Σ_n K(n)(1 − e^{−bn})` of the ideal law (falls back to the table).
    pub fn ideal_deficit(&self, b: f64) -> f64 {
        let q = 1.0 - self.defect_mass;
        match self.ideal {
            IdealLaw::SimpleRandomWalk => (-(-2.0 * b).exp_m1()).sqrt(),
            IdealLaw::Power { alpha, scale } => scale * numeric::power_deficit(alpha, self.period as f64 * b),
            IdealLaw::Geometric { p } => q * -(-b).exp_m1() / (1.0 - p * (-b).exp()),
            IdealLaw::Tabulated => self.deficit(b),
        }
    }

    /// `Σ_n n K(n)` of the ideal law; `+∞` when it diverges.
    pub fn ideal_mean_return_time(&self) -> Option<f64> {
        let q = 1.0 - self.defect_mass;
        match self.ideal {
            IdealLaw::SimpleRandomWalk => Some(f64::INFINITY),
            IdealLaw::Geometric { p } => Some(q / (1.0 - p)),
            IdealLaw::Power { alpha, scale } => Some(if alpha > 2.0 {
                scale * self.period as f64 * numeric::zeta(alpha - 1.0)
            } else {
                f64::INFINITY
            }),
            IdealLaw::Tabulated => match self.alpha {
                Some(a) if a > 2.0 => Some(self.mean_return_time()),
                Some(_) => Some(f64::INFINITY),
                None => None,
            },
        }
    }

    /// `min_{n ∈ sℕ, n ≤ N} K(n)` (zero if some atom in range vanishes).
    pub fn min_density_up_to(&self, n: usize) -> f64 {
        let top = n / self.period;
        if top > self.atoms.len() {
            return 0.0;
        }
        self.atoms[..top].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn exponent_onset(atoms: &[f64], alpha: f64) -> usize {
    let mut onset = 2;
    for (i, k) in atoms.iter().enumerate().skip(1) {
        let n = (i + 1) as f64;
        let ok = *k > 0.0 && k.ln() / n.ln() >= -alpha - 0.1;
        if !ok {
            onset = i + 2;
        }
    }
    onset
}

/// First-return law of the ±1 simple random walk (`s = 2`, `α = 3/2`).
pub fn srw_kernel(n_max: usize) -> Result<ReturnKernel> {
    if n_max == 0 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    let mut atoms = Vec::with_capacity(n_max);
    // K(2) = 1/2, K(2(n+1)) = K(2n)(2n − 1)/(2n + 2).
    let mut f = 0.5;
    for n in 1..=n_max {
        atoms.push(f);
        let nf = n as f64;
        f *= (2.0 * nf - 1.0) / (2.0 * nf + 2.0);
    }
    Ok(ReturnKernel::assemble(2, 0.0, Some(1.5), atoms, IdealLaw::SimpleRandomWalk))
}

/// `K(sn) = c/n^α` for `n = 1..n_max`, normalized to `1 − K(∞)`.
pub fn power_kernel(alpha: f64, s: usize, n_max: usize, defect_mass: f64) -> Result<ReturnKernel> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(invalid("alpha", format!("need alpha >= 1, got {alpha}")));
    }
    if s == 0 {
        return Err(invalid("s", "period must be positive"));
    }
    if n_max == 0 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&defect_mass) {
        return Err(invalid("k_inf", format!("need 0 <= K(inf) < 1, got {defect_mass}")));
    }
    let weights: Vec<f64> = (1..=n_max).map(|n| (n as f64).powf(-alpha)).collect();
    let norm = weights.iter().rev().copied().collect::<CompensatedSum>().value();
    let c = (1.0 - defect_mass) / norm;
    let atoms = weights.into_iter().map(|w| c * w).collect();
    let ideal = if alpha > 1.0 {
        IdealLaw::Power {
            alpha,
            scale: (1.0 - defect_mass) / numeric::zeta(alpha),
        }
    } else {
        IdealLaw::Tabulated
    };
    let mut kernel = ReturnKernel::assemble(s, defect_mass, Some(alpha), atoms, ideal);
    // The normalizing constant already accounts for the whole mass; undo the
    // rounding-level correction assemble() may have put on the last atom so
    // consecutive ratios stay exactly (n/(n+1))^α.
    if let Some(last) = kernel.atoms.last_mut() {
        *last = c * (n_max as f64).powf(-alpha);
    }
    Ok(kernel)
}

/// Geometric law `K(n) = (1 − p)p^{n−1}` on `ℕ`, truncated once `p^n < 1e−18`.
pub fn geometric_kernel(p: f64) -> Result<ReturnKernel> {
    geometric_kernel_with(p, 0.0, None)
}

/// Geometric law with an optional defect mass and explicit horizon.
pub fn geometric_kernel_with(p: f64, defect_mass: f64, n_max: Option<usize>) -> Result<ReturnKernel> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid("p", format!("need 0 < p < 1, got {p}")));
    }
    if !(0.0..1.0).contains(&defect_mass) {
        return Err(invalid("k_inf", format!("need 0 <= K(inf) < 1, got {defect_mass}")));
    }
    let n_max = match n_max {
        Some(0) => return Err(invalid("n_max", "must be at least 1")),
        Some(n) => n,
        None => ((1e-18f64.ln() / p.ln()).ceil() as usize).clamp(1, 10_000_000),
    };
    let q = 1.0 - defect_mass;
    let mut atoms = Vec::with_capacity(n_max);
    let mut w = q * (1.0 - p);
    for _ in 0..n_max {
        atoms.push(w);
        w *= p;
    }
    Ok(ReturnKernel::assemble(1, defect_mass, None, atoms, IdealLaw::Geometric { p }))
}

/// Loads a kernel from the CSV format
///
/// ```text
/// s=<int>,k_inf=<float>,alpha=<float>
/// n,K(n)
/// …
/// ```
///
/// with `n` ascending multiples of `s`. `alpha` may be omitted.
pub fn kernel_from_file(path: impl AsRef<Path>) -> Result<ReturnKernel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::KernelFile {
        path: path.display().to_string(),
        line: 0,
        reason: e.to_string(),
    })?;
    parse_kernel_csv(&text).map_err(|(line, reason)| Error::KernelFile {
        path: path.display().to_string(),
        line,
        reason,
    })?
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

fn parse_kernel_csv(text: &str) -> ParseResult<Result<ReturnKernel>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or((1, "empty file".to_string()))?;
    let (mut s, mut k_inf, mut alpha) = (None, None, None);
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or((1, format!("header field `{field}` is not key=value")))?;
        let value = value.trim();
        match key.trim() {
            "s" => s = Some(value.parse::<usize>().map_err(|e| (1, format!("s: {e}")))?),
            "k_inf" => k_inf = Some(value.parse::<f64>().map_err(|e| (1, format!("k_inf: {e}")))?),
            "alpha" if value.eq_ignore_ascii_case("none") || value.is_empty() => {}
            "alpha" => alpha = Some(value.parse::<f64>().map_err(|e| (1, format!("alpha: {e}")))?),
            other => return Err((1, format!("unknown header key `{other}`"))),
        }
    }
    let s = s.ok_or((1, "header is missing s".to_string()))?;
    let k_inf = k_inf.ok_or((1, "header is missing k_inf".to_string()))?;
    if s == 0 {
        return Err((1, "s must be positive".to_string()));
    }

    let mut atoms: Vec<f64> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let (n, k) = line
            .split_once(',')
            .ok_or((lineno, format!("expected `n,K(n)`, got `{line}`")))?;
        let n: usize = n.trim().parse().map_err(|e| (lineno, format!("n: {e}")))?;
        let k: f64 = k.trim().parse().map_err(|e| (lineno, format!("K(n): {e}")))?;
        if n == 0 || !n.is_multiple_of(s) {
            return Err((lineno, format!("n = {n} is not a positive multiple of s = {s}")));
        }
        let i = n / s;
        if i <= atoms.len() {
            return Err((lineno, format!("n = {n} is not ascending")));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err((lineno, format!("K({n}) = {k} is negative or not finite")));
        }
        atoms.resize(i - 1, 0.0);
        atoms.push(k);
    }
    if atoms.is_empty() {
        return Err((1, "no kernel entries".to_string()));
    }
    Ok(ReturnKernel::tabulated(s, k_inf, alpha, atoms))
}

/// Textual kernel description used by the command line and config files:
/// `srw:n_max=…`, `power:alpha=…,s=…,n_max=…,k_inf=…`,
/// `geometric:p=…[,k_inf=…][,n_max=…]` or `file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Srw { n_max: usize },
    Power { alpha: f64, s: usize, n_max: usize, k_inf: f64 },
    Geometric { p: f64, k_inf: f64, n_max: Option<usize> },
    File(String),
}

impl KernelSpec {
    pub fn build(&self) -> Result<ReturnKernel> {
        match self {
            KernelSpec::Srw { n_max } => srw_kernel(*n_max),
            KernelSpec::Power { alpha, s, n_max, k_inf } => power_kernel(*alpha, *s, *n_max, *k_inf),
            KernelSpec::Geometric { p, k_inf, n_max } => geometric_kernel_with(*p, *k_inf, *n_max),
            KernelSpec::File(path) => kernel_from_file(path),
        }
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        if name == "file" {
            if rest.is_empty() {
                return Err(invalid("kernel", "file: needs a path"));
            }
            return Ok(KernelSpec::File(rest.to_string()));
        }
        let mut params = std::collections::BTreeMap::new();
        for field in rest.split(',').filter(|f| !f.is_empty()) {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| invalid("kernel", format!("parameter `{field}` is not key=value")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| invalid("kernel", format!("parameter `{field}` is not numeric")))?;
            params.insert(k.trim().to_string(), v);
        }
        let take = |params: &mut std::collections::BTreeMap<String, f64>, key: &str| params.remove(key);
        let as_count = |v: f64, key: &'static str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(invalid(key, format!("expected a positive integer, got {v}")))
            }
        };
        let spec = match name {
            "srw" => KernelSpec::Srw {
                n_max: as_count(take(&mut params, "n_max").unwrap_or(100_000.0), "n_max")?,
            },
            "power" => KernelSpec::Power {
                alpha: take(&mut params, "alpha").ok_or_else(|| invalid("kernel", "power needs alpha"))?,
                s: as_count(take(&mut params, "s").unwrap_or(1.0), "s")?,
                n_max: as_count(take(&mut params, "n_max").unwrap_or(100_000.0), "n_max")?,
                k_inf: take(&mut params, "k_inf").unwrap_or(0.0),
            },
            "geometric" => KernelSpec::Geometric {
                p: take(&mut params, "p").ok_or_else(|| invalid("kernel", "geometric needs p"))?,
                k_inf: take(&mut params, "k_inf").unwrap_or(0.0),
                n_max: take(&mut params, "n_max").map(|v| as_count(v, "n_max")).transpose()?,
            },
            other => return Err(invalid("kernel", format!("unknown kernel `{other}`"))),
        };
        if let Some(extra) = params.keys().next() {
            return Err(invalid("kernel", format!("unknown parameter `{extra}` for `{name}`")));
        }
        Ok(spec)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Srw { n_max } => write!(f, "srw:n_max={n_max}"),
            KernelSpec::Power { alpha, s, n_max, k_inf } => {
                write!(f, "power:alpha={alpha},s={s},n_max={n_max},k_inf={k_inf}")
            }
            KernelSpec::Geometric { p, k_inf, n_max } => {
                write!(f, "geometric:p={p},k_inf={k_inf}")?;
                if let Some(n) = n_max {
                    write!(f, ",n_max={n}")?;
                }
                Ok(())
            }
            KernelSpec::File(path) => write!(f, "file:{path}"),
        }
    }
}
