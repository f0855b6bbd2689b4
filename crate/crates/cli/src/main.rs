use clap::{Parser, Subcommand};
use finsec_cli::error::{EXIT_IO, EXIT_OK};
use finsec_cli::{norms, run, weights_check, CliError, Options};
use std::path::PathBuf;
use std::process::ExitCode;

/// Finite section experiments: convergence studies, algebra norms and
/// weight diagnostics.
#[derive(Parser)]
#[command(name = "finsec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: PathBuf,
    /// output directory (overrides the config's output_dir)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// progress on stderr
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a convergence study
    Run(Common),
    /// Section norms across n
    Norms(Common),
    /// Weight property probes
    WeightsCheck(Common),
}

fn options(c: &Common) -> Options {
    Options {
        out: c.out.clone(),
        threads: c.threads,
        verbose: c.verbose,
    }
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(c) => {
            let summary = run(&c.config, &options(c))?;
            for p in &summary.pipelines {
                let last = p.max_abs_error.last();
                let detail = match (&p.error, p.fitted_exponent, last) {
                    (Some(e), _, _) => e.clone(),
                    (None, Some(rate), _) => format!("fitted exponent {rate:.3}"),
                    (None, None, Some((n, e))) => format!("max |x - x_n| = {e:.2e} at n = {n}"),
                    (None, None, None) => "no solves".to_string(),
                };
                let expected = if p.expect_failure { " (expected)" } else { "" };
                println!("{}: {}{expected}: {detail}", p.pipeline, p.status);
            }
        }
        Command::Norms(c) => {
            let rows = norms(&c.config, &options(c))?;
            println!("{} norm values written", rows.len());
        }
        Command::WeightsCheck(c) => {
            for r in weights_check(&c.config, &options(c))? {
                println!(
                    "{}: {}",
                    r.label,
                    if r.all_pass {
                        "all checks pass"
                    } else {
                        "some checks fail"
                    }
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Norms(c) | Command::WeightsCheck(c) => c,
    };
    if let Some(k) = common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
        {
            eprintln!("error: cannot start {k} threads: {e}");
            return ExitCode::from(EXIT_IO as u8);
        }
    }
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
