use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kkh::config::{ConfigError, Format, SuiteConfig};
use kkh::emit::{emit, load_report, render, report_path};
use kkh::suite::run_suite;

#[derive(Parser)]
#[command(name = "kkh", version, about = "Harmonicity checks for vector fields under Kaluza-Klein metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Suite config (JSON).
    config: PathBuf,
    /// Overrides the seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every case of the config.
    Verify(RunArgs),
    /// Run only the parameter sweeps (`scan` cases).
    Scan(RunArgs),
    /// Run only the unit-section flows (`flow` cases).
    Flow(RunArgs),
    /// Re-emit the report stored in a directory in another format.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum)]
        format: CliFormat,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum CliFormat {
    Json,
    Csv,
}

impl From<CliFormat> for Format {
    fn from(f: CliFormat) -> Self {
        match f {
            CliFormat::Json => Format::Json,
            CliFormat::Csv => Format::Csv,
        }
    }
}

fn run(args: RunArgs, kinds: Option<&[&str]>) -> anyhow::Result<bool> {
    let mut config = SuiteConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k) = kinds {
        config.retain_kinds(k);
    }
    let dir = args.out.unwrap_or_else(|| config.output.dir.clone());
    let report = run_suite(&config);
    for c in &report.cases {
        let mark = if c.matched { "ok  " } else { "FAIL" };
        let expected = c.expected.as_deref().map(|e| format!(" (expected {e})")).unwrap_or_default();
        let err = c.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default();
        eprintln!("{mark} {:<32} {}{expected}{err} [{:.2} s]", c.id, c.verdict, c.seconds);
    }
    for path in emit(&report, &dir, &config.output.formats)? {
        println!("{}", path.display());
    }
    let s = report.summary;
    eprintln!("{} cases: {} matched, {} mismatched, {} errors", s.cases, s.matched, s.mismatched, s.errors);
    Ok(report.all_matched())
}

fn rerender(dir: &Path, format: Format) -> anyhow::Result<()> {
    let report = load_report(dir)?;
    let path = report_path(dir, format);
    std::fs::write(&path, render(&report, format)?)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify(a) => run(a, None),
        Command::Scan(a) => run(a, Some(&["scan"])),
        Command::Flow(a) => run(a, Some(&["flow"])),
        Command::Report { dir, format } => rerender(&dir, format.into()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("kkh: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
