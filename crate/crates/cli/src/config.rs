// SPDX-License-Identifier: Apache-2.0

//! Run configuration: flat `key = value` files merged with command-line flags.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Keys are the long flag names without the dashes (`kernel`, `beta`, `N`,
//! `m-grid`, ...). Blank lines and lines starting with `#` are ignored.
//! Flags override file entries; `h` and `h-range` replace each other.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use depin_core::disorder::DisorderLaw;
use depin_core::engine::ModelKind;
use depin_core::KernelSpec;

use crate::CliError;

/// Every key the tool understands.
pub const KEYS: &[&str] = &[
    "kernel",
    "law",
    "model",
    "beta",
    "h",
    "h-range",
    "N",
    "replicas",
    "seed",
    "epsilon",
    "m-grid",
    "tol",
    "dh-range",
    "points",
    "points-above",
    "draws",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Pure,
    Fe,
    Phi,
    Hc,
    Smooth,
    Verify,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Pure => "pure",
            Subcommand::Fe => "fe",
            Subcommand::Phi => "phi",
            Subcommand::Hc => "hc",
            Subcommand::Smooth => "smooth",
            Subcommand::Verify => "verify",
        }
    }

    /// Keys the subcommand reads.
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Subcommand::Pure => &["kernel", "h", "h-range", "out"],
            Subcommand::Fe => &["kernel", "law", "model", "beta", "h", "h-range", "N", "replicas", "seed", "out"],
            Subcommand::Phi => &["kernel", "law", "model", "beta", "N", "replicas", "seed", "epsilon", "m-grid", "out"],
            Subcommand::Hc => &["kernel", "law", "model", "beta", "h-range", "N", "replicas", "seed", "tol", "out"],
            Subcommand::Smooth => &[
                "kernel",
                "law",
                "model",
                "beta",
                "N",
                "replicas",
                "seed",
                "tol",
                "dh-range",
                "points",
                "points-above",
                "out",
            ],
            Subcommand::Verify => &["N", "draws", "seed"],
        }
    }

    fn default(self, key: &str) -> Option<&'static str> {
        use Subcommand::*;
        Some(match (self, key) {
            (_, "kernel") => "power:alpha=3,n_max=8192",
            (_, "law") => "gaussian",
            (_, "model") => "pinning",
            (_, "beta") => "1",
            (Pure | Fe, "h") => "0",
            (Fe, "N") => "1024",
            (Phi, "N") => "2048",
            (Hc | Smooth, "N") => "1024,2048,4096,8192",
            (Verify, "N") => "12",
            (Fe, "replicas") => "16",
            (Phi, "replicas") => "64",
            (Hc | Smooth, "replicas") => "128",
            (_, "seed") => "2024",
            (_, "epsilon") => "auto",
            (_, "m-grid") => "0:1:21",
            (_, "tol") => "1e-3",
            (_, "dh-range") => "0.02:0.2",
            (_, "points") => "10",
            (_, "points-above") => "2",
            (_, "draws") => "50",
            _ => return None,
        })
    }
}

/// Resolved configuration of one run, echoed into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub entries: BTreeMap<String, String>,
}

/// Parses a config file into raw entries.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`", i + 1)))?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(CliError::Usage(format!("{origin}:{}: unknown key `{key}`", i + 1)));
        }
        out.insert(key.to_string(), value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    parse_config_text(&text, &path.display().to_string())
}

impl RunConfig {
    /// File entries, then flags on top, then defaults for what is still unset.
    pub fn resolve(
        subcommand: Subcommand,
        file: BTreeMap<String, String>,
        flags: Vec<(&'static str, String)>,
    ) -> Result<Self, CliError> {
        let keys = subcommand.keys();
        for (key, _) in &flags {
            if !keys.contains(key) {
                return Err(CliError::Usage(format!("--{key} does not apply to `{}`", subcommand.name())));
            }
        }
        let flagged = |k: &str| flags.iter().any(|(f, _)| *f == k);
        if subcommand != Subcommand::Hc && flagged("h") && flagged("h-range") {
            return Err(CliError::Usage("--h and --h-range are mutually exclusive".to_string()));
        }
        let mut entries: BTreeMap<String, String> =
            file.into_iter().filter(|(k, _)| keys.contains(&k.as_str())).collect();
        if subcommand != Subcommand::Hc && entries.contains_key("h") && entries.contains_key("h-range") {
            return Err(CliError::Usage("config sets both `h` and `h-range`".to_string()));
        }
        for (key, value) in flags {
            match key {
                "h" => {
                    entries.remove("h-range");
                }
                "h-range" => {
                    entries.remove("h");
                }
                _ => {}
            }
            entries.insert(key.to_string(), value);
        }
        for key in keys {
            let replaced = (*key == "h" && entries.contains_key("h-range")) || (*key == "h-range" && entries.contains_key("h"));
            if !entries.contains_key(*key) && !replaced {
                if let Some(d) = subcommand.default(key) {
                    entries.insert(key.to_string(), d.to_string());
                }
            }
        }
        Ok(RunConfig { subcommand, entries })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| CliError::Usage(format!("`{}` needs --{key}", self.subcommand.name())))
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.required(key)?;
        v.parse()
            .map_err(|_| CliError::Usage(format!("--{key}: cannot parse `{v}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.parse(key)
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str) -> Result<u64, CliError> {
        self.parse(key)
    }

    /// `auto` maps to `None`.
    pub fn optional_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            None | Some("auto") => Ok(None),
            Some(_) => self.f64(key).map(Some),
        }
    }

    /// Comma-separated list of lengths.
    pub fn lengths(&self, key: &str) -> Result<Vec<usize>, CliError> {
        let v = self.required(key)?;
        v.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("--{key}: `{t}` is not a length")))
            })
            .collect()
    }

    /// `lo:hi:n` (inclusive, evenly spaced) or a comma-separated list.
    pub fn grid(&self, key: &str) -> Result<Vec<f64>, CliError> {
        parse_grid(self.required(key)?).map_err(|e| CliError::Usage(format!("--{key}: {e}")))
    }

    /// `lo:hi`.
    pub fn range(&self, key: &str) -> Result<(f64, f64), CliError> {
        let v = self.required(key)?;
        let bad = || CliError::Usage(format!("--{key}: expected `lo:hi`, got `{v}`"));
        let (a, b) = v.split_once(':').ok_or_else(bad)?;
        let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if !(a < b) {
            return Err(bad());
        }
        Ok((a, b))
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let v = self.required("kernel")?;
        v.parse().map_err(|e| CliError::Usage(format!("--kernel: {e}")))
    }

    pub fn law(&self) -> Result<DisorderLaw, CliError> {
        let v = self.required("law")?;
        v.parse().map_err(|e| CliError::Usage(format!("--law: {e}")))
    }

    pub fn model(&self) -> Result<ModelKind, CliError> {
        let v = self.required("model")?;
        v.parse().map_err(|e| CliError::Usage(format!("--model: {e}")))
    }

    /// Field values: the `h-range` grid if set, else the single `h`.
    pub fn fields(&self) -> Result<Vec<f64>, CliError> {
        if self.raw("h-range").is_some() {
            self.grid("h-range")
        } else {
            Ok(vec![self.f64("h")?])
        }
    }

    /// Entries that determine the results; the output location is left out.
    pub fn echo(&self) -> BTreeMap<&str, &str> {
        self.entries
            .iter()
            .filter(|(k, _)| k.as_str() != "out")
            .map(|(k, v)| (k.as_str(), v.as_str()))
            .collect()
    }

    /// `# key: value` header lines.
    pub fn header(&self) -> String {
        let mut out = format!("# depin {}\n# command: {}\n", env!("CARGO_PKG_VERSION"), self.subcommand.name());
        if let Some(seed) = self.raw("seed") {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        for (k, v) in self.echo() {
            out.push_str(&format!("# config: {k} = {v}\n"));
        }
        out
    }
}

pub fn parse_grid(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number"));
    match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().map_err(|_| format!("`{n}` is not a count"))?;
            match n {
                0 => Err("empty grid".to_string()),
                1 => Ok(vec![lo]),
                _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
            }
        }
        [single] => single.split(',').map(num).collect(),
        _ => Err(format!("expected `lo:hi:n` or a list, got `{text}`")),
    }
}
