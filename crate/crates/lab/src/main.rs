use std::path::PathBuf;
use std::process::ExitCode;

use benney_lab::commands;
use benney_lab::config::{Command, RunConfig};
use benney_lab::{configure_threads, LabError};
use clap::Parser;

/// Numerical laboratory for the Lax polynomial family and its 2×2 reduction.
#[derive(Parser, Debug)]
#[command(name = "benney-lab", version)]
struct Cli {
    /// classify | simulate | reduce-lift | travelwave | strata | verify
    command: String,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Cell count.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    /// Tolerance override, `scale=F` or `<check id>=F`; repeatable.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    tol: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Run only this check (verify); repeatable.
    #[arg(long = "check", value_name = "ID")]
    check: Vec<String>,
    /// Any other configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VAL")]
    set: Vec<String>,
}

fn pair(s: &str) -> Result<(&str, &str), LabError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| LabError::Usage(format!("expected KEY=VAL, got `{s}`")))
}

fn build_config(cli: &Cli) -> Result<RunConfig, LabError> {
    let command: Command = cli.command.parse().map_err(LabError::Usage)?;
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(command);
    for s in &cli.set {
        let (k, v) = pair(s)?;
        cfg.set(k, v)?;
    }
    let mut flag = |key: &str, value: Option<String>| -> Result<(), LabError> {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
        Ok(())
    };
    flag("out", cli.out.as_ref().map(|p| p.display().to_string()))?;
    flag("n", cli.n.map(|x| x.to_string()))?;
    flag("grid", cli.grid.map(|x| x.to_string()))?;
    flag("cfl", cli.cfl.map(|x| x.to_string()))?;
    flag("tmax", cli.tmax.map(|x| x.to_string()))?;
    flag("seed", cli.seed.map(|x| x.to_string()))?;
    if !cli.check.is_empty() {
        cfg.set("check", &cli.check.join(","))?;
    }
    for s in &cli.tol {
        let (k, v) = pair(s)?;
        cfg.set_tol(k, v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads(std::env::var("BENNEY_LAB_THREADS").ok().as_deref())
        .and_then(|_| build_config(&cli))
        .and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(report) => {
            match &report.table {
                Some(table) => print!("{table}"),
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&report.json).expect("JSON values serialize")
                ),
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
