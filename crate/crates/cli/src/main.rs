use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tumor_spectra::{parse_config, run_command, Command, RunError};

#[derive(Parser, Debug)]
#[command(
    name = "tumor-spectra",
    version,
    about = "Stationary states and stability spectra of a free-boundary tumor model"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    jobs: Option<usize>,
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return fail(RunError {
                kind: "usage",
                message: e.kind().to_string(),
                exit_code: 2,
                details: None,
            });
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    let cfg = match parse_config(&cli.config) {
        Ok(c) => c,
        Err(e) => return fail(e.into()),
    };
    match run_command(cli.command, cfg, &cli.out) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
