use chaoscope::config::{ExperimentConfig, Mode};
use chaoscope::run::{replot, run, standalone_checks, Report};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "chaoscope", version, about = "Size-of-chaos experiments for mean-field hierarchies")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Cap on S^N or d^N entries.
    #[arg(long, env = "CHAOSCOPE_MEM_CAP", global = true, hide_env_values = true)]
    mem_cap: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DirArgs {
    /// A directory written by one of the run commands.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Exact master-equation evolution with E_j and chaos-distance rows.
    ExactRun(RunArgs),
    /// Master pipeline against the correlation hierarchy.
    #[command(alias = "hierarchy-verify")]
    VerifyHierarchy(RunArgs),
    /// Exact runs over several N with slope fits.
    ScalingSweep(RunArgs),
    /// N-qudit von Neumann evolution against the Hartree equation.
    QuantumRun(RunArgs),
    /// Kac or soft-sphere Monte Carlo ensembles.
    McRun(RunArgs),
    /// Regenerates plots/ for a run directory.
    Plot(DirArgs),
    /// Re-runs the checkers on results.csv and compares with report.json.
    CheckBounds(DirArgs),
}

fn summarize(report: &Report) {
    for c in &report.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for s in &report.slopes {
        println!("slope {} j={} t={}: {:.4} ± {:.4} ({} points)", s.quantity, s.j, s.t, s.slope, s.ci95, s.points);
    }
    println!("{}", if report.pass { "all checks passed" } else { "some checks failed" });
}

fn execute(mode: Mode, args: &RunArgs, mem_cap: Option<usize>) -> Result<bool, String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let cfg = ExperimentConfig::parse(&text, mode, args.seed, mem_cap).map_err(|e| format!("{}: {e}", args.config.display()))?;
    let report = run(&cfg, &args.out).map_err(|e| e.to_string())?;
    summarize(&report);
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::ExactRun(a) => execute(Mode::ExactRun, a, cli.mem_cap),
        Command::VerifyHierarchy(a) => execute(Mode::VerifyHierarchy, a, cli.mem_cap),
        Command::ScalingSweep(a) => execute(Mode::ScalingSweep, a, cli.mem_cap),
        Command::QuantumRun(a) => execute(Mode::QuantumRun, a, cli.mem_cap),
        Command::McRun(a) => execute(Mode::McRun, a, cli.mem_cap),
        Command::Plot(a) => replot(&a.out, cli.mem_cap).map(|_| true).map_err(|e| e.to_string()),
        Command::CheckBounds(a) => standalone_checks(&a.out, cli.mem_cap).map_err(|e| e.to_string()).map(|(fresh, stored)| {
            summarize(&fresh);
            let agree = fresh.pass == stored.pass
                && fresh.checks.iter().map(|c| c.pass).eq(stored.checks.iter().map(|c| c.pass));
            if !agree {
                println!("report.json disagrees with the standalone checkers");
            }
            agree && fresh.pass
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
