// SPDX-License-Identifier: Apache-2.0

//! CSV tables with metadata headers, gnuplot scripts and output placement.

use std::fmt::Display;
use std::path::Path;

use crate::config::RunConfig;
use crate::CliError;

pub struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Metadata comment lines, the column header, then the rows.
    pub fn render(&self, cfg: &RunConfig) -> String {
        let mut out = cfg.header();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal, so equal values print identically.
pub fn num(x: impl Display) -> String {
    x.to_string()
}

/// Gnuplot script reading `csv` (comment lines skipped, first row as titles).
pub fn gnuplot(csv: &str, title: &str, xlabel: &str, ylabel: &str, logscale: bool, plots: &[String]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set title '{title}'\nset xlabel '{xlabel}'\nset ylabel '{ylabel}'\n"));
    if logscale {
        s.push_str("set logscale xy\n");
    }
    s.push_str(&format!("set terminal pngcairo size 900,600\nset output '{}.png'\n", csv.trim_end_matches(".csv")));
    let body: Vec<String> = plots.iter().map(|p| format!("'{csv}' {p}")).collect();
    s.push_str(&format!("plot {}\n", body.join(", \\\n     ")));
    s
}

/// Writes `files` into the output directory when one is configured, else
/// prints the first of them to stdout.
pub fn emit(cfg: &RunConfig, files: &[(&str, String)]) -> Result<(), CliError> {
    match cfg.raw("out") {
        Some(dir) => {
            let dir = Path::new(dir);
            std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
            for (name, body) in files {
                let path = dir.join(name);
                std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                println!("wrote {}", path.display());
            }
        }
        None => {
            if let Some((_, body)) = files.first() {
                print!("{body}");
            }
        }
    }
    Ok(())
}
