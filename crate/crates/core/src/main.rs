use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Args, Parser, Subcommand};

use circsine::config::{Experiment, ExperimentConfig};
use circsine::experiments::{self, num, Report};
use circsine::manifest::{write_outputs, RunManifest};
use circsine::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "circsine", version, about = "Coupled circular and Sine operator experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Heat-kernel domination, total variation and pointwise bounds.
    Heatkernel(Common),
    /// Single-step coupling and coupled-walk diagnostics.
    CoupleDiag(Common),
    /// Operator spectra by transfer matrices and Nyström discretization.
    Spectrum(Common),
    /// Hilbert–Schmidt convergence of coupled operators in `n`.
    Converge(Common),
    /// Dependence of the Sine operator on `beta` along one Brownian path.
    Betadep(Common),
    /// Disk chart of a Brownian trace and its coupled walk.
    Figure(Common),
    /// Brownian path checks.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config document or a previous run manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, `a.b=value` with a JSON or plain string value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, taking precedence over the environment and config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, Common) {
        match self {
            Command::Heatkernel(c) => (Experiment::Heatkernel, c),
            Command::CoupleDiag(c) => (Experiment::CoupleDiag, c),
            Command::Spectrum(c) => (Experiment::Spectrum, c),
            Command::Converge(c) => (Experiment::Converge, c),
            Command::Betadep(c) => (Experiment::Betadep, c),
            Command::Figure(c) => (Experiment::Figure, c),
            Command::Validate(c) => (Experiment::Validate, c),
        }
    }
}

fn print_checks(report: &Report) {
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        let param = if c.param.is_empty() { String::new() } else { format!("[{}]", c.param) };
        println!("{tag} {}{param} statistic={} bound={}", c.name, num(c.statistic), num(c.bound));
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let (experiment, common) = cli.command.split();
    let cfg = match ExperimentConfig::load(experiment, common.config.as_deref(), &common.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let out_dir = common.out.unwrap_or_else(|| cfg.resolved_out_dir());

    let started = SystemTime::now();
    let clock = Instant::now();
    let (report, code) = match experiments::run(&cfg) {
        Ok(r) => {
            let code = if r.numerical_failure {
                EXIT_NUMERICAL
            } else if !r.passed() {
                EXIT_ACCEPTANCE
            } else {
                0
            };
            (r, code)
        }
        Err(Error::InvalidArgument(m)) => {
            eprintln!("error: invalid argument: {m}");
            return ExitCode::from(EXIT_USAGE);
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut r = Report::new(experiment);
            r.numerical_failure = true;
            (r, EXIT_NUMERICAL)
        }
    };
    let elapsed = clock.elapsed();
    print_checks(&report);

    let mut manifest = RunManifest::new(&cfg, &report, started, elapsed, code.into());
    match write_outputs(&report, &out_dir) {
        Ok(files) => manifest.outputs = files,
        Err(e) => {
            eprintln!("error: writing outputs to {}: {e}", out_dir.display());
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }
    if let Err(e) = manifest.write(&out_dir) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    println!("{} finished in {:.1}s, outputs in {}", experiment.name(), elapsed.as_secs_f64(), out_dir.display());
    ExitCode::from(code)
}
