use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use handsoff::commands::{self, Overrides};
use handsoff::pipeline::{Diagnostics, OnRecordError};
use handsoff_core::record::CsvMode;

/// Stream delimited files through spreadsheet-style business rules.
#[derive(Parser)]
#[command(name = "handsoff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sort (if configured), stream the input through the workbook, then report (if configured).
    Run {
        job: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Sort the file described by the job's [sort] section.
    Sort {
        job: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Build the job's subtotal report from a data file.
    Report {
        job: PathBuf,
        data: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Compare two sorted files through the workbook's status cell.
    Compare {
        job: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Validate a job and its definition without touching any data.
    Check { job: PathBuf },
    /// Evaluate one formula against a definition.
    Eval {
        definition: PathBuf,
        formula: String,
        /// Sheet for unqualified references (default: the first sheet).
        #[arg(long)]
        sheet: Option<String>,
    },
}

#[derive(Args)]
struct Flags {
    /// Print a progress line every N records.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    progress: usize,
    /// No progress or summary lines.
    #[arg(long)]
    quiet: bool,
    /// Parse quoted fields per RFC 4180.
    #[arg(long, conflicts_with = "naive_split")]
    strict_csv: bool,
    /// Split lines on every comma, ignoring quotes.
    #[arg(long)]
    naive_split: bool,
    /// Stop at the first bad record.
    #[arg(long, conflicts_with = "lenient")]
    fail_fast: bool,
    /// Log and skip bad records.
    #[arg(long)]
    lenient: bool,
    /// Also write the records fed to the report to this file.
    #[arg(long, value_name = "PATH")]
    raw_out: Option<PathBuf>,
    /// Write run statistics as JSON to this file.
    #[arg(long, value_name = "PATH")]
    stats_json: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            csv_mode: if self.naive_split {
                Some(CsvMode::NaiveSplit)
            } else if self.strict_csv {
                Some(CsvMode::Rfc4180)
            } else {
                None
            },
            on_record_error: if self.lenient {
                Some(OnRecordError::SkipAndLog)
            } else if self.fail_fast {
                Some(OnRecordError::FailFast)
            } else {
                None
            },
            raw_out: self.raw_out.clone(),
            stats_json: self.stats_json.clone(),
            progress_every: self.progress.max(1),
            quiet: self.quiet,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stderr = io::stderr().lock();
    let mut stdout = io::stdout().lock();
    let result = match &cli.command {
        Command::Run { job, flags } => {
            let ov = flags.overrides();
            let mut diag = Diagnostics::new(&mut stderr, ov.progress_every, ov.quiet);
            commands::run(job, &ov, &mut diag, &mut stdout).map(|_| ())
        }
        Command::Sort { job, flags } => {
            let ov = flags.overrides();
            let mut diag = Diagnostics::new(&mut stderr, ov.progress_every, ov.quiet);
            commands::sort(job, &ov, &mut diag, &mut stdout).map(|_| ())
        }
        Command::Report { job, data, flags } => {
            let ov = flags.overrides();
            let mut diag = Diagnostics::new(&mut stderr, ov.progress_every, ov.quiet);
            commands::report(job, data.as_deref(), &ov, &mut diag, &mut stdout).map(|_| ())
        }
        Command::Compare { job, flags } => {
            let ov = flags.overrides();
            let mut diag = Diagnostics::new(&mut stderr, ov.progress_every, ov.quiet);
            commands::compare(job, &ov, &mut diag, &mut stdout).map(|_| ())
        }
        Command::Check { job } => {
            let mut diag = Diagnostics::new(&mut stderr, 10_000, false);
            commands::check(job, &mut diag, &mut stdout)
        }
        Command::Eval { definition, formula, sheet } => {
            commands::eval(definition, formula, sheet.as_deref()).map(|v| {
                let _ = writeln!(stdout, "{v}");
            })
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = stdout.flush();
            let _ = writeln!(stderr, "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
