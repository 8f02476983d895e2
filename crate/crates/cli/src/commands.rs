//! The `fcd` subcommands as library functions.

use std::path::PathBuf;

use fcd_core::calculus::{derivative_series, integral_series};
use fcd_core::decompose::{decompose, Decomposition};
use fcd_core::models::ModelSpec;
use fcd_core::signal::Signal;

use crate::artifacts::{
    decomposition_artifacts, derivative_artifacts, integral_artifacts, metrics, metrics_text, write_all,
    Artifact,
};
use crate::bench::{render_table, run_bench, BenchOptions};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::features::{extract_features, feature_artifacts, WindowSpec};
use crate::ingest::{ingest_csv, IngestReport};

/// What a command wrote and what it has to say on stdout.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub stdout: String,
}

/// Validates the configuration, then reads the input.
pub fn load(cfg: &RunConfig) -> Result<(ModelSpec, Signal, IngestReport)> {
    let model = cfg.validate()?;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("no input file given".into()))?;
    let (signal, report) = ingest_csv(input, cfg.x_col.as_deref(), cfg.y_col.as_deref())?;
    Ok((model, signal, report))
}

pub fn run_decomposition(cfg: &RunConfig) -> Result<(Decomposition, IngestReport)> {
    let (model, signal, report) = load(cfg)?;
    let d = decompose(&signal, &model, &cfg.decompose_config())?;
    Ok((d, report))
}

pub fn derive_artifacts(d: &Decomposition, orders: &[usize]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    for &order in orders {
        let series = (0..d.mode_count())
            .map(|m| derivative_series(d, m, order))
            .collect::<fcd_core::Result<Vec<_>>>()?;
        out.extend(derivative_artifacts(&series, order));
    }
    Ok(out)
}

pub fn integrate_artifacts(d: &Decomposition) -> Result<Vec<Artifact>> {
    let series = (0..d.mode_count())
        .map(|m| integral_series(d, m))
        .collect::<fcd_core::Result<Vec<_>>>()?;
    Ok(integral_artifacts(&series))
}

/// Artifacts of `decompose`, including integrals when configured.
pub fn decompose_outputs(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let (d, report) = run_decomposition(cfg)?;
    let mut out = decomposition_artifacts(&d, cfg.report, Some(&report))?;
    if cfg.integral {
        out.extend(integrate_artifacts(&d)?);
    }
    Ok(out)
}

fn finish(cfg: &RunConfig, artifacts: &[Artifact], stdout: String) -> Result<Outcome> {
    Ok(Outcome {
        written: write_all(&cfg.out_dir, artifacts)?,
        stdout,
    })
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<Outcome> {
    finish(cfg, &decompose_outputs(cfg)?, String::new())
}

pub fn cmd_derive(cfg: &RunConfig) -> Result<Outcome> {
    let (d, _) = run_decomposition(cfg)?;
    finish(cfg, &derive_artifacts(&d, &cfg.orders)?, String::new())
}

pub fn cmd_integrate(cfg: &RunConfig) -> Result<Outcome> {
    let (d, _) = run_decomposition(cfg)?;
    finish(cfg, &integrate_artifacts(&d)?, String::new())
}

pub fn cmd_metrics(cfg: &RunConfig) -> Result<Outcome> {
    let (d, report) = run_decomposition(cfg)?;
    let m = metrics(&d, Some(&report));
    let mut body = serde_json::to_string_pretty(&m).expect("metrics serialize");
    body.push('\n');
    let artifacts = [Artifact {
        name: "metrics.json".into(),
        body,
    }];
    finish(cfg, &artifacts, metrics_text(&m))
}

pub fn cmd_features(cfg: &RunConfig) -> Result<Outcome> {
    let (model, signal, _) = load(cfg)?;
    let spec = WindowSpec {
        window: cfg.window,
        stride: cfg.stride,
        horizon: cfg.horizon,
    };
    let t = extract_features(&signal, &model, &cfg.decompose_config(), spec)?;
    let stdout = format!(
        "{} windows of {} columns ({} modes)\n",
        t.layout.n_windows, t.layout.row_len, t.layout.mode_count
    );
    finish(cfg, &feature_artifacts(&t), stdout)
}

pub fn cmd_bench(opts: &BenchOptions, out_dir: Option<&std::path::Path>) -> Result<Outcome> {
    let rows = run_bench(opts)?;
    let table = render_table(&rows);
    let mut written = Vec::new();
    if let Some(dir) = out_dir {
        let mut body = serde_json::to_string_pretty(&rows).expect("bench rows serialize");
        body.push('\n');
        written = write_all(
            dir,
            &[Artifact {
                name: "bench.json".into(),
                body,
            }],
        )?;
    }
    Ok(Outcome {
        written,
        stdout: table,
    })
}
