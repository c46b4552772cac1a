use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use freqstrat::cli_harness::{emit_report, resolve_experiment, run_experiment, write_artifacts, ExperimentConfig};
use freqstrat::Error;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "freqstrat", version, about = "Frequency and stratification experiments on Dini domains")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Frequency profiles, monotonicity, rigidity and doubling.
    Frequency(RunArgs),
    /// Singular and effective critical sets.
    Singular(RunArgs),
    /// Beta-number sweeps.
    Beta(RunArgs),
    /// Covering and packing.
    Cover(RunArgs),
    /// Minkowski-content estimate.
    Mink(RunArgs),
    /// Run the configured experiment and summarize its checks.
    Verify(RunArgs),
    /// Summarize an artifact directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "FREQSTRAT_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Artifact directory; defaults to the config's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = "FREQSTRAT_THREADS")]
    threads: Option<usize>,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

fn classify(e: Error) -> Failure {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::UnknownField(_) | Error::DomainCondition(_) => {
            Failure::Usage(e.into())
        }
        other => Failure::Runtime(other.into()),
    }
}

fn threads(n: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")
            .map_err(Failure::Usage)?;
    }
    Ok(())
}

fn run(name: &str, a: &RunArgs) -> Result<bool, Failure> {
    threads(a.threads)?;
    let mut cfg = ExperimentConfig::from_path(&a.config).map_err(classify)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let exp = resolve_experiment(&cfg, name).map_err(classify)?;
    let dir = a.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let art = run_experiment(&cfg, &exp).map_err(classify)?;
    write_artifacts(&cfg, &exp, &art, &dir)
        .with_context(|| format!("writing artifacts to {}", dir.display()))
        .map_err(Failure::Runtime)?;
    if name == "verify" {
        let s = emit_report(&dir).map_err(classify)?;
        print!("{}", std::fs::read_to_string(dir.join("summary.txt")).unwrap_or_default());
        return Ok(s.all_pass);
    }
    for c in art.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    println!("{exp}: wrote {} files to {}", art.files.len() + 1, dir.display());
    Ok(art.all_pass())
}

fn report(a: &ReportArgs) -> Result<bool, Failure> {
    threads(a.threads)?;
    let dir = match (&a.out, &a.config) {
        (Some(d), _) => d.clone(),
        (None, Some(c)) => {
            let cfg = ExperimentConfig::from_path(c).map_err(classify)?;
            cfg.out.unwrap_or_else(|| PathBuf::from("out"))
        }
        (None, None) => return Err(Failure::Usage(anyhow::anyhow!("report needs --out or --config"))),
    };
    let s = emit_report(&dir).map_err(classify)?;
    for c in s.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} ({})", c.name, c.detail);
    }
    print!("{}", std::fs::read_to_string(dir.join("summary.txt")).unwrap_or_default());
    Ok(s.all_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Frequency(a) => run("frequency", a),
        Cmd::Singular(a) => run("singular", a),
        Cmd::Beta(a) => run("beta", a),
        Cmd::Cover(a) => run("cover", a),
        Cmd::Mink(a) => run("mink", a),
        Cmd::Verify(a) => run("verify", a),
        Cmd::Report(a) => report(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
