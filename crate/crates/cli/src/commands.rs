// SPDX-License-Identifier: Apache-2.0

//! Subcommand pipelines.

use serde_json::{json, Value};

use depin_core::analysis::{locate_hc, smoothing_check, ScanSetup, SmoothingConfig};
use depin_core::engine::ModelSpec;
use depin_core::estimator::{check_concavity, estimate_phi, replica_free_energies};
use depin_core::numeric::mean_stderr;
use depin_core::oracle::{cross_check, COPOLYMER_GUARD};
use depin_core::pure_solver::{hc_pure, solve_free_energy_pure};
use depin_core::ReturnKernel;

use crate::config::{RunConfig, Subcommand};
use crate::output::{emit, gnuplot, num, Table};
use crate::CliError;

pub fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.subcommand {
        Subcommand::Pure => pure(cfg),
        Subcommand::Fe => fe(cfg),
        Subcommand::Phi => phi(cfg),
        Subcommand::Hc => hc(cfg),
        Subcommand::Smooth => smooth(cfg),
        Subcommand::Verify => verify(cfg),
    }
}

fn runtime(command: &'static str) -> impl Fn(depin_core::Error) -> CliError {
    move |source| CliError::Runtime { command, source }
}

fn build_kernel(cfg: &RunConfig) -> Result<ReturnKernel, CliError> {
    cfg.kernel()?.build().map_err(runtime(cfg.subcommand.name()))
}

fn model<'a>(cfg: &RunConfig, kernel: &'a ReturnKernel, h: f64) -> Result<ModelSpec<'a>, CliError> {
    Ok(ModelSpec {
        kind: cfg.model()?,
        beta: cfg.f64("beta")?,
        h,
        kernel,
    })
}

fn pure(cfg: &RunConfig) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let fields = cfg.fields()?;
    let mut table = Table::new(&["h", "b", "residual"]);
    let solutions: Vec<_> = fields.iter().map(|&h| solve_free_energy_pure(&kernel, h)).collect();
    for s in &solutions {
        table.push(vec![num(s.h), num(s.b), num(s.residual)]);
    }
    let csv = table.render(cfg);
    if cfg.raw("out").is_none() && solutions.len() == 1 {
        let s = &solutions[0];
        println!("hc = {}", hc_pure(&kernel));
        println!("b = {}", s.b);
        println!("residual = {}", s.residual);
        return Ok(());
    }
    let gp = gnuplot("pure.csv", "pure free energy", "h", "b", false, &["using 1:2 with linespoints".to_string()]);
    emit(cfg, &[("pure.csv", csv), ("pure.gp", gp)])
}

fn fe(cfg: &RunConfig) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let law = cfg.law()?;
    let n_list = cfg.lengths("N")?;
    let replicas = cfg.usize("replicas")?;
    let seed = cfg.u64("seed")?;
    let mut table = Table::new(&["N", "beta", "h", "mean", "stderr", "replicas", "seed"]);
    for h in cfg.fields()? {
        let m = model(cfg, &kernel, h)?;
        if replicas == 0 {
            return Err(CliError::Usage("--replicas must be at least 1".to_string()));
        }
        let values = replica_free_energies(&m, law, &n_list, replicas, seed).map_err(runtime("fe"))?;
        for (k, &n) in n_list.iter().enumerate() {
            let (mean, se) = mean_stderr(&values.column(k));
            let se = if m.beta == 0.0 || replicas < 2 { 0.0 } else { se };
            table.push(vec![num(n), num(m.beta), num(h), num(mean), num(se), num(replicas), num(seed)]);
        }
    }
    let gp = gnuplot(
        "fe.csv",
        "quenched free energy",
        "N",
        "F_N",
        false,
        &["using 1:4:5 with yerrorbars".to_string()],
    );
    emit(cfg, &[("fe.csv", table.render(cfg)), ("fe.gp", gp)])
}

fn phi(cfg: &RunConfig) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let law = cfg.law()?;
    let n = single_length(cfg)?;
    let m = model(cfg, &kernel, 0.0)?;
    let curve = estimate_phi(
        &m,
        law,
        &cfg.grid("m-grid")?,
        cfg.optional_f64("epsilon")?,
        n,
        cfg.usize("replicas")?,
        cfg.u64("seed")?,
    )
    .map_err(runtime("phi"))?;
    let mut table = Table::new(&["m", "epsilon", "value", "stderr", "feasible"]);
    for p in &curve.points {
        table.push(vec![num(p.m), num(curve.epsilon), num(p.value), num(p.stderr), num(p.feasible)]);
    }
    let violations = check_concavity(&curve).iter().filter(|c| !c.concave).count();
    if cfg.raw("out").is_some() {
        println!("concavity violations beyond 3 stderr: {violations}");
    }
    let gp = gnuplot(
        "phi.csv",
        "constrained free energy",
        "m",
        "phi",
        false,
        &["using 1:3:4 with yerrorbars".to_string()],
    );
    emit(cfg, &[("phi.csv", table.render(cfg)), ("phi.gp", gp)])
}

fn single_length(cfg: &RunConfig) -> Result<usize, CliError> {
    match cfg.lengths("N")?.as_slice() {
        [n] => Ok(*n),
        _ => Err(CliError::Usage(format!("--N: `{}` needs a single length", cfg.subcommand.name()))),
    }
}

fn scan_setup<'a>(cfg: &RunConfig, kernel: &'a ReturnKernel, n_list: &'a [usize]) -> Result<ScanSetup<'a>, CliError> {
    Ok(ScanSetup {
        kind: cfg.model()?,
        beta: cfg.f64("beta")?,
        kernel,
        law: cfg.law()?,
        n_list,
        replicas: cfg.usize("replicas")?,
        seed: cfg.u64("seed")?,
    })
}

fn hc(cfg: &RunConfig) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let n_list = cfg.lengths("N")?;
    let setup = scan_setup(cfg, &kernel, &n_list)?;
    let bracket = match cfg.raw("h-range") {
        Some(_) => Some(cfg.range("h-range")?),
        None => None,
    };
    let cp = locate_hc(&setup, cfg.f64("tol")?, bracket).map_err(runtime("hc"))?;
    let mut table = Table::new(&["beta", "hc", "hc_err", "lo", "hi", "evaluations"]);
    table.push(vec![
        num(setup.beta),
        num(cp.hc),
        num(cp.uncertainty),
        num(cp.lo),
        num(cp.hi),
        num(cp.evaluations),
    ]);
    if cfg.raw("out").is_some() {
        println!("hc = {} ± {}", cp.hc, cp.uncertainty);
    }
    emit(cfg, &[("hc.csv", table.render(cfg))])
}

fn smooth(cfg: &RunConfig) -> Result<(), CliError> {
    let kernel = build_kernel(cfg)?;
    let sc = SmoothingConfig {
        kind: cfg.model()?,
        kernel: &kernel,
        law: cfg.law()?,
        beta: cfg.f64("beta")?,
        n_list: cfg.lengths("N")?,
        replicas: cfg.usize("replicas")?,
        seed: cfg.u64("seed")?,
        tol: cfg.f64("tol")?,
        dh_range: cfg.range("dh-range")?,
        points: cfg.usize("points")?,
        points_above: cfg.usize("points-above")?,
    };
    let report = smoothing_check(&sc).map_err(runtime("smooth"))?;

    let mut table = Table::new(&["h", "dh", "F", "stderr", "envelope", "below_envelope", "ratio", "ratio_err", "side"]);
    for (side, points) in [("below", &report.points), ("above", &report.points_above)] {
        for p in points {
            table.push(vec![
                num(p.h),
                num(p.dh),
                num(p.f),
                num(p.stderr),
                num(p.envelope),
                num(p.below_envelope),
                num(p.ratio),
                num(p.ratio_err),
                side.to_string(),
            ]);
        }
    }
    let mut doc = serde_json::to_value(&report).map_err(|e| CliError::Failed(e.to_string()))?;
    let extra = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": sc.seed,
        "hc": report.critical.hc,
        "hc_err": report.critical.uncertainty,
        "config": { "subcommand": cfg.subcommand, "entries": cfg.echo() },
    });
    if let (Value::Object(d), Value::Object(e)) = (&mut doc, extra) {
        d.extend(e);
    }
    let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Failed(e.to_string()))? + "\n";
    let gp = gnuplot(
        "smooth.csv",
        "free energy below the critical point",
        "h_c - h",
        "F",
        true,
        &[
            "using ($9 eq 'below' ? $2 : 1/0):3:4 with yerrorbars title 'F'".to_string(),
            "using ($9 eq 'below' ? $2 : 1/0):5 with lines title 'envelope'".to_string(),
        ],
    );
    if cfg.raw("out").is_some() {
        println!("hc = {} ± {}", report.critical.hc, report.critical.uncertainty);
        println!(
            "exponent = {} ± {} (lower 2σ bound {})",
            report.exponent, report.exponent_err, report.exponent_lower_bound
        );
        println!("envelope_ok = {}", report.envelope_ok);
        println!("ratio_decreasing = {}", report.ratio_decreasing);
    }
    emit(cfg, &[("smooth.json", text), ("smooth.csv", table.render(cfg)), ("smooth.gp", gp)])
}

fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let n = single_length(cfg)?;
    let draws = cfg.usize("draws")?;
    let checks = cross_check(n, n.min(COPOLYMER_GUARD), draws, cfg.u64("seed")?).map_err(runtime("verify"))?;
    let tol = 1e-12;
    let failures: Vec<_> = checks.iter().filter(|c| !(c.worst <= tol)).collect();
    let worst = checks.iter().map(|c| c.worst).fold(0.0, f64::max);
    for c in &failures {
        println!(
            "FAIL {} draw {} kernel {} beta {} h {} N {}: relative gap {:e}",
            c.what, c.draw, c.kernel, c.beta, c.h, c.n, c.worst
        );
    }
    println!("{} comparisons, largest relative gap {:e}", checks.len(), worst);
    if failures.is_empty() {
        println!("all oracle checks passed");
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} oracle checks failed", failures.len())))
    }
}
