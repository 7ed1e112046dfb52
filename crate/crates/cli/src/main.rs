use std::path::PathBuf;
use std::process::ExitCode;

use ballet_cli::{method_listing, run, RunManifest};
use ballet_core::ballet::MethodName;
use clap::Parser;

/// Runs candidate-pool Bayesian optimization experiments from a config file.
#[derive(Debug, Parser)]
#[command(name = "ballet", version)]
struct Args {
    /// Experiment config file.
    #[arg(required_unless_present = "list_methods")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Replace existing output files.
    #[arg(long)]
    overwrite: bool,
    /// Print accepted method names and exit.
    #[arg(long)]
    list_methods: bool,
    /// Added to every seed in the config.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Only run these methods (comma-separated, e.g. `ici,ucb-global`).
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodName>>,
}

fn main() -> ExitCode {
    // Usage errors count as config errors so that exit code 2 stays reserved for runtime failures.
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("error\tkind=usage\tmessage={}", e.kind());
            return ExitCode::from(1);
        }
    };
    if args.list_methods {
        print!("{}", method_listing());
        return ExitCode::SUCCESS;
    }
    let manifest = RunManifest {
        config_path: args.config.expect("required by clap"),
        out_dir: args.out,
        jobs: args.jobs,
        overwrite: args.overwrite,
        seed_offset: args.seed_offset,
        methods: args.methods,
    };
    match run(&manifest) {
        Ok(report) => {
            for f in &report.failures {
                eprintln!("{}", f.machine_line());
            }
            eprintln!(
                "{} trials ok, {} failed, {} files written to {}",
                report.trials_ok,
                report.failures.len(),
                report.files.len(),
                manifest.out_dir.display()
            );
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("{}", e.machine_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
