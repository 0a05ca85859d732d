use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fjsim::harness::{self, Overrides, GRAMMAR};

#[derive(Parser)]
#[command(name = "fjsim", version, about = "MIMO wiretap friendly-jamming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory.
    #[arg(long, env = "FJSIM_OUT_DIR", default_value = "fjsim-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "mc-draws")]
    mc_draws: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run(RunArgs),
    /// Evaluate every scheme listed under `schemes` on shared channel draws.
    Compare(RunArgs),
    /// Print a complete config template and the key grammar.
    Schema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, compare) = match cli.command {
        Command::Schema => {
            println!("{}", harness::schema());
            eprintln!("{GRAMMAR}");
            return ExitCode::SUCCESS;
        }
        Command::Run(a) => (a, false),
        Command::Compare(a) => (a, true),
    };
    let ov = Overrides {
        seed: args.seed,
        workers: args.workers,
        mc_draws: args.mc_draws,
    };
    let result = if compare {
        harness::compare(&args.config, &args.out, &ov)
    } else {
        harness::run(&args.config, &args.out, &ov)
    };
    match result {
        Ok(out) => {
            for d in &out.manifest.outputs {
                println!("{}  {}", d.sha256, out.out_dir.join(&d.file).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fjsim: {e}");
            ExitCode::FAILURE
        }
    }
}
