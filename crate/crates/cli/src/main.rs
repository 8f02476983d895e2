use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fcd_cli::bench::{BenchOptions, DEFAULT_SIZES, LARGE_SIZE};
use fcd_cli::commands::{self, Outcome};
use fcd_cli::config::{ModelChoice, RunConfig};
use fcd_cli::{CliError, Result};
use fcd_core::decompose::ReportSpace;
use fcd_core::models::ContinuityOrder;

/// Multi-resolution piecewise decomposition of 1-D signals.
#[derive(Parser)]
#[command(name = "fcd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit every mode and write series, segment table, report and document.
    Decompose(RunArgs),
    /// Write derivative series of every mode.
    Derive(RunArgs),
    /// Write running integrals of every mode.
    Integrate(RunArgs),
    /// Print fit-quality metrics.
    Metrics(RunArgs),
    /// Write sliding-window feature tensors.
    Features(RunArgs),
    /// Time decompositions of synthetic signals.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Local,
    Absolute,
}

#[derive(Clone, Copy, ValueEnum)]
enum Continuity {
    None,
    C0,
    C1,
}

#[derive(Args)]
struct RunArgs {
    /// Input CSV file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// x column, by header name or 0-based index.
    #[arg(long)]
    x_col: Option<String>,
    /// y column, by header name or 0-based index.
    #[arg(long)]
    y_col: Option<String>,
    /// Preset model name.
    #[arg(long)]
    model: Option<String>,
    /// TOML file whose keys override the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    report: Option<Report>,
    /// Derivative order; repeat for several.
    #[arg(long = "order")]
    orders: Vec<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    alpha_seg: Option<usize>,
    #[arg(long)]
    beta_min: Option<usize>,
    #[arg(long)]
    s_f: Option<f64>,
    #[arg(long, value_enum)]
    continuity: Option<Continuity>,
    /// Also write running integrals (decompose).
    #[arg(long)]
    integral: bool,
    /// Fit modes one after another.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Signal lengths; defaults to 10, 100, 1000, 10000.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    /// Add a 100000-sample run.
    #[arg(long)]
    large: bool,
    /// Preset models; defaults to cubic and sin6.
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    /// Warm repeats per measurement.
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    /// Also write bench.json here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn config(self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        c.input = self.input.or(c.input);
        c.x_col = self.x_col.or(c.x_col);
        c.y_col = self.y_col.or(c.y_col);
        if let Some(m) = self.model {
            c.model = ModelChoice::Preset(m);
        }
        if let Some(d) = self.out_dir {
            c.out_dir = d;
        }
        if let Some(r) = self.report {
            c.report = match r {
                Report::Local => ReportSpace::Local,
                Report::Absolute => ReportSpace::Absolute,
            };
        }
        if !self.orders.is_empty() {
            c.orders = self.orders;
        }
        c.window = self.window.unwrap_or(c.window);
        c.stride = self.stride.unwrap_or(c.stride);
        c.horizon = self.horizon.unwrap_or(c.horizon);
        c.alpha_seg = self.alpha_seg.unwrap_or(c.alpha_seg);
        c.beta_min = self.beta_min.unwrap_or(c.beta_min);
        c.s_f = self.s_f.unwrap_or(c.s_f);
        if let Some(o) = self.continuity {
            c.continuity = Some(match o {
                Continuity::None => ContinuityOrder::None,
                Continuity::C0 => ContinuityOrder::C0,
                Continuity::C1 => ContinuityOrder::C1,
            });
        }
        c.integral |= self.integral;
        c.parallel &= !self.sequential;
        match self.config {
            Some(path) => c.overlay_file(&path),
            None => Ok(c),
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Decompose(a) => commands::cmd_decompose(&a.config()?),
        Command::Derive(a) => commands::cmd_derive(&a.config()?),
        Command::Integrate(a) => commands::cmd_integrate(&a.config()?),
        Command::Metrics(a) => commands::cmd_metrics(&a.config()?),
        Command::Features(a) => commands::cmd_features(&a.config()?),
        Command::Bench(b) => {
            let mut opts = BenchOptions::default();
            opts.sizes = if b.sizes.is_empty() { DEFAULT_SIZES.to_vec() } else { b.sizes };
            if b.large {
                opts.sizes.push(LARGE_SIZE);
            }
            if !b.models.is_empty() {
                opts.models = b.models;
            }
            if b.repeats == 0 {
                return Err(CliError::Config("repeats must be at least 1".into()));
            }
            opts.repeats = b.repeats;
            commands::cmd_bench(&opts, b.out_dir.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{}", out.stdout);
            for p in &out.written {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::to_string(&e.report()).expect("error report serializes");
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
