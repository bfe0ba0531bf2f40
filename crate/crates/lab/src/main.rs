use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use packetlab::config::{Experiment, ExperimentConfig};
use packetlab::experiments::{
    run_energy_drift, run_long_time_existence, run_nls_validity, run_residual_scaling, verdicts, Verdict,
};
use packetlab::props::run_property_suite;
use packetlab::report::write_file;
use packetlab::simulate::simulate;

/// Scaling experiments for modulated wave packets of ∂ₜu = K₀u − u∂ₓu.
///
/// Exit status: 0 when every criterion holds, 1 when one fails, 2 on errors.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single logged run from the basic ansatz at the first eps
    Simulate(Common),
    /// Approximation error of the NLS ansatz along full simulations
    ValidateNls(Common),
    /// Residual of the basic and corrected ansatz
    Residual(Common),
    /// Sobolev norm growth for small random data
    Existence(Common),
    /// Exponential drift rate of the energy
    EnergyDrift(Common),
    /// Operator identities and energy properties
    Props(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated, strictly decreasing
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    k0: Option<f64>,
}

impl Common {
    fn load(&self, experiment: Option<Experiment>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::parse(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(e) = experiment {
            cfg.experiment = e;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        let overrides = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("eps_list", self.eps.clone()),
            ("k0", self.k0.map(|k| k.to_string())),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, &v).map_err(anyhow::Error::msg)?;
            }
        }
        Ok(cfg)
    }
}

fn print_verdicts(verdicts: &[Verdict]) -> bool {
    for v in verdicts {
        let measured = v.measured.map_or("n/a".to_string(), |m| format!("{m:.4}"));
        let status = if v.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {measured} (required {})", v.name, v.requirement);
    }
    verdicts.iter().all(|v| v.passed)
}

fn scaling(cfg: &ExperimentConfig, name: &str) -> Result<bool> {
    let rep = match cfg.experiment {
        Experiment::NlsValidity => run_nls_validity(cfg)?,
        Experiment::ResidualScaling => run_residual_scaling(cfg)?,
        Experiment::Existence => run_long_time_existence(cfg)?,
        Experiment::EnergyDrift => run_energy_drift(cfg)?,
        Experiment::PropertySuite => unreachable!("handled separately"),
    };
    rep.write(&cfg.output_dir, name)?;
    for w in &rep.metadata.warnings {
        eprintln!("warning: {w}");
    }
    for (eps, msg) in &rep.metadata.failures {
        eprintln!("run at eps = {eps} failed: {msg}");
    }
    print!("{}", rep.to_csv());
    if let Some(f) = rep.fit {
        println!("slope {:.4} (r^2 {:.4})", f.slope, f.r_squared);
    }
    Ok(print_verdicts(&verdicts(cfg.experiment, &rep)))
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    write_file(&dir.join("config.txt"), &cfg.to_text())?;
    Ok(())
}

fn execute(cli: Cli) -> Result<bool> {
    let (common, experiment, name) = match &cli.command {
        Command::Simulate(c) => (c, None, "simulate"),
        Command::ValidateNls(c) => (c, Some(Experiment::NlsValidity), "nls_validity"),
        Command::Residual(c) => (c, Some(Experiment::ResidualScaling), "residual_scaling"),
        Command::Existence(c) => (c, Some(Experiment::Existence), "existence"),
        Command::EnergyDrift(c) => (c, Some(Experiment::EnergyDrift), "energy_drift"),
        Command::Props(c) => (c, Some(Experiment::PropertySuite), "property_suite"),
    };
    let cfg = common.load(experiment)?;
    write_config(&cfg, &cfg.output_dir)?;
    match cli.command {
        Command::Simulate(_) => {
            let sim = simulate(&cfg)?;
            sim.write(&cfg.output_dir)?;
            let last = sim.log.samples.last().context("empty run log")?;
            println!("eps {} t {} steps {} l2 {:.6e} H^{} {:.6e}", sim.eps, last.t, sim.log.steps, last.l2, cfg.s, last.sobolev);
            Ok(true)
        }
        Command::Props(_) => {
            let rep = run_property_suite(&cfg)?;
            write_file(&cfg.output_dir.join(format!("{name}.json")), &serde_json::to_string_pretty(&rep)?)?;
            for c in &rep.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("{status} {}: {:.3e} (threshold {:.3e})", c.name, c.measured, c.threshold);
            }
            println!("nonresonance margin {:.6}", rep.nonresonance_margin);
            Ok(rep.passed())
        }
        _ => scaling(&cfg, name),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
