use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyfw::games::{to_sequence_form, GameId};
use polyfw_cli::experiment::{output_dir, run_experiment};
use polyfw_cli::verify::{verify_facial_distance, FdRow, Table};
use polyfw_cli::{exit, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "polyfw",
    version,
    about = "Learning dynamics for sequence-form games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Compare brute-force facial distances with their lower bounds.
    VerifyFd {
        #[arg(long, default_value_t = 5)]
        max_n: usize,
    },
    /// List the registry games with their sizes.
    ListGames,
}

fn run(config: PathBuf, jobs: usize) -> u8 {
    let config = match ExperimentConfig::load(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit::CONFIG;
        }
    };
    let dir = output_dir(&config);
    match run_experiment(&config, &dir, jobs) {
        Ok(manifest) => {
            for r in &manifest.runs {
                match &r.error {
                    Some(e) => {
                        eprintln!("{}: FAILED after {} iterations: {e}", r.file, r.iterations)
                    }
                    None => println!(
                        "{}: {} iterations, final {} {}",
                        r.file,
                        r.iterations,
                        r.metric,
                        r.final_metric.map_or("-".into(), |m| format!("{m:.6e}"))
                    ),
                }
            }
            let n = manifest.runs.len();
            let plural = if n == 1 { "" } else { "s" };
            println!("wrote {n} run{plural} to {}", dir.display());
            if manifest.any_failed() {
                exit::RUNTIME
            } else {
                exit::OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::RUNTIME
        }
    }
}

fn verify(max_n: usize) -> u8 {
    match verify_facial_distance(max_n) {
        Ok(rows) => {
            print!("{}", Table(&rows));
            if rows.iter().all(FdRow::ok) {
                exit::OK
            } else {
                exit::VERIFICATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit::VERIFICATION
        }
    }
}

fn list_games() -> u8 {
    println!(
        "{:<18} {:<26} {:>7} {:>9} {:>20}",
        "id", "instance", "players", "leaves", "sequences"
    );
    for name in GameId::NAMES {
        let id = GameId::from_name(name).expect("registry name");
        match id.build().and_then(|t| to_sequence_form(&t)) {
            Ok(game) => {
                let seqs: Vec<String> = game
                    .treeplexes()
                    .iter()
                    .map(|t| t.num_sequences().to_string())
                    .collect();
                println!(
                    "{:<18} {:<26} {:>7} {:>9} {:>20}",
                    name,
                    id.to_string(),
                    game.num_players(),
                    game.leaves().len(),
                    seqs.join("/")
                );
            }
            Err(e) => {
                eprintln!("{name}: {e}");
                return exit::RUNTIME;
            }
        }
    }
    exit::OK
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, jobs } => run(config, jobs),
        Command::VerifyFd { max_n } => verify(max_n),
        Command::ListGames => list_games(),
    };
    ExitCode::from(code)
}
