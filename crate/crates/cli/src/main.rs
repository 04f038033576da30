use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_embed_cli::{load_config, run, Command, RunConfig, Target, EXIT_FAIL, EXIT_PASS, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(name = "spectral-embed", version, about = "Heat-kernel embeddings of manifolds: spectra, embeddings and checks")]
struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampling verification pairs; overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Eigenvalues and leading eigenfunctions.
    Spectrum,
    /// Embedding map with dilatation and injectivity reports.
    Embed {
        /// Scan the t grid instead of using `embed.t`.
        #[arg(long)]
        scan: bool,
    },
    /// One verification target; exits 1 when its assertion fails.
    Verify {
        #[arg(value_enum)]
        target: Target,
        #[arg(long)]
        scan: bool,
    },
    /// Appendix constants and coordinate radii.
    Constants,
    /// Finite-difference chart study.
    Charts,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let mut cfg = match &cli.config {
        Some(p) => match load_config(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_USAGE as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let cmd = match cli.command {
        Sub::Spectrum => Command::Spectrum,
        Sub::Embed { scan } => Command::Embed { scan },
        Sub::Verify { target, scan } => Command::Verify { target, scan },
        Sub::Constants => Command::Constants,
        Sub::Charts => Command::Charts,
    };
    let outcome = run(cmd, &cfg).and_then(|r| r.write(&cfg.output_dir, &cfg).map(|dir| (r, dir)));
    match outcome {
        Ok((report, dir)) => {
            // a closed stdout does not change the outcome
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}", report.summary_text(&cfg));
            let _ = writeln!(out, "output_dir={}", dir.display());
            ExitCode::from(if report.passed { EXIT_PASS } else { EXIT_FAIL } as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
