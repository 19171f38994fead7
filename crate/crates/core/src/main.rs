use clap::{Parser, Subcommand};
use randiter::cli::{execute, ExperimentKind, RunArgs};

#[derive(Parser)]
#[command(name = "randiter", version, about = "Simulation and numerical checks for stationary random iterates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One stationary trajectory.
    Simulate(RunArgs),
    /// Pairwise distances and the coupling coefficients.
    Coupling(RunArgs),
    /// Meeting-time survival function and tail fit.
    MeetingTime(RunArgs),
    /// Series conditions on the tabulated inputs.
    Conditions(RunArgs),
    /// Block plan, ν_k and the block conditions.
    Blocks(RunArgs),
    /// Long-run variance.
    Variance(RunArgs),
    /// Normal approximation of partial sums.
    Clt(RunArgs),
    /// Coupling, meeting times, conditions, variance and CLT in one bundle.
    Report(RunArgs),
}

fn main() {
    let (kind, args) = match Cli::parse().command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Coupling(a) => (ExperimentKind::Coupling, a),
        Command::MeetingTime(a) => (ExperimentKind::MeetingTime, a),
        Command::Conditions(a) => (ExperimentKind::Conditions, a),
        Command::Blocks(a) => (ExperimentKind::Blocks, a),
        Command::Variance(a) => (ExperimentKind::Variance, a),
        Command::Clt(a) => (ExperimentKind::Clt, a),
        Command::Report(a) => (ExperimentKind::FullReport, a),
    };
    if let Some(t) = args.threads {
        if t == 0 {
            eprintln!("error: --threads must be >= 1");
            std::process::exit(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(1);
        }
    }
    std::process::exit(execute(kind, &args));
}
