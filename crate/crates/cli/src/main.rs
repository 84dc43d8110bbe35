use clap::{Args, Parser, Subcommand};
use nofdm_cli::commands::{self, Options};
use nofdm_cli::CliError;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Multi-band FTN-NOFDM link simulator.
#[derive(Parser)]
#[command(name = "nofdm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured link once.
    Run(SimArgs),
    /// Simulate every point of the configured sweep.
    Sweep(SimArgs),
    /// Decoder operation counts against the single-band plan.
    Complexity(SimArgs),
    /// Power spectrum of one transmitted frame.
    Spectrum(SimArgs),
    /// List shipped channel presets and allocation profiles.
    Profiles,
}

#[derive(Args)]
struct SimArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of frames, overriding the configuration.
    #[arg(long)]
    frames: Option<u64>,
    /// Directory for every output file.
    #[arg(long, default_value = "nofdm-out")]
    out: PathBuf,
    /// Worker threads, 0 for one per CPU.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl From<SimArgs> for Options {
    fn from(a: SimArgs) -> Self {
        Options {
            config: a.config,
            seed: a.seed,
            frames: a.frames,
            out: a.out,
            threads: a.threads,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let result: Result<Vec<PathBuf>, CliError> = match cli.command {
        Command::Run(a) => commands::run(&a.into(), &mut stdout),
        Command::Sweep(a) => commands::sweep(&a.into(), &mut stdout),
        Command::Complexity(a) => commands::complexity_table(&a.into(), &mut stdout),
        Command::Spectrum(a) => commands::spectrum(&a.into(), &mut stdout),
        Command::Profiles => commands::profiles(&mut stdout).map(|_| Vec::new()),
    };
    match result {
        Ok(files) => {
            for f in files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nofdm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
