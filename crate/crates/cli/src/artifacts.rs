//! Text artifacts produced by the commands.
//!
//! Tables are comma-separated with a `# fcd/1 ...` schema line followed by a
//! header row. Documents are pretty-printed JSON whose first key is
//! `"format": "fcd/1"`. Floats are written in Rust's shortest round-trip
//! form, so the same result always produces the same bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fcd_core::calculus::{DerivativeSeries, IntegralSeries, Method, SegmentCalculus};
use fcd_core::decompose::{Decomposition, ReportSpace, FORMAT};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::ingest::IngestReport;

/// A named artifact body, written as `out_dir/name`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub body: String,
}

impl Artifact {
    fn new(name: impl Into<String>, body: String) -> Self {
        Artifact {
            name: name.into(),
            body,
        }
    }
}

pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    artifacts
        .iter()
        .map(|a| {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.body).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact documents serialize");
    s.push('\n');
    s
}

fn mode_columns(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("mode_{i}")).collect()
}

/// `x` followed by one column per series.
pub fn series_table(schema: &str, columns: &[String], x: &[f64], series: &[Vec<f64>]) -> String {
    let mut out = format!("# {FORMAT} {schema}\nx");
    for c in columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (i, xi) in x.iter().enumerate() {
        out.push_str(&num(*xi));
        for s in series {
            out.push(',');
            out.push_str(&num(s[i]));
        }
        out.push('\n');
    }
    out
}

fn segment_table(d: &Decomposition) -> String {
    let names = &d.model.param_names;
    let mut out = format!(
        "# {FORMAT} segments: one row per segment; start/end are sample indices [start, end); \
         parameters are physical unless space = normalized\n"
    );
    out.push_str(
        "mode,segment,start,end,anchor_index,anchor_x,n_points,srmse,flat,forced,converged,clamped,termination,iterations,space",
    );
    for n in names {
        let _ = write!(out, ",{n}");
    }
    out.push('\n');
    for m in &d.modes {
        for s in &m.segments {
            let f = &s.fit;
            let (space, values) = match &s.physical {
                Some(p) => ("physical", &p.values),
                None => ("normalized", &f.params.values),
            };
            let termination = serde_json::to_value(f.termination)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                m.index + 1,
                s.index + 1,
                s.range.0,
                s.range.1,
                s.anchor_index,
                num(s.anchor_x),
                s.metrics.n_points,
                num(s.metrics.srmse),
                u8::from(s.metrics.flat),
                u8::from(f.flags.forced),
                u8::from(f.flags.converged),
                u8::from(f.flags.clamped),
                termination,
                f.iterations,
                space
            );
            for v in values {
                let _ = write!(out, ",{}", num(*v));
            }
            out.push('\n');
        }
    }
    out
}

fn report_text(d: &Decomposition, space: ReportSpace) -> Result<String> {
    let label = match space {
        ReportSpace::Local => "local",
        ReportSpace::Absolute => "absolute",
    };
    let mut out = format!("# {FORMAT} piecewise report ({label})\n");
    for m in 0..d.mode_count() {
        out.push('\n');
        out.push_str(&d.piecewise_report(m, space)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub format: String,
    pub model: String,
    pub n_points: usize,
    pub mode_count: usize,
    pub segment_counts: Vec<usize>,
    pub overall_mean_srmse: f64,
    pub mode_mean_srmse: Vec<f64>,
    pub forced_segments: usize,
    pub flat_segments: usize,
    pub unconverged_segments: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestReport>,
}

pub fn metrics(d: &Decomposition, ingest: Option<&IngestReport>) -> Metrics {
    let summary = d.aggregate_srmse();
    let segs = || d.modes.iter().flat_map(|m| &m.segments);
    Metrics {
        format: FORMAT.into(),
        model: d.model.name.clone(),
        n_points: d.signal.len(),
        mode_count: d.mode_count(),
        segment_counts: d.modes.iter().map(|m| m.segments.len()).collect(),
        overall_mean_srmse: summary.overall,
        mode_mean_srmse: summary.per_mode,
        forced_segments: segs().filter(|s| s.fit.flags.forced).count(),
        flat_segments: segs().filter(|s| s.metrics.flat).count(),
        unconverged_segments: segs().filter(|s| !s.fit.flags.converged).count(),
        ingest: ingest.cloned(),
    }
}

/// Plain-text rendering of [`Metrics`] for the terminal.
pub fn metrics_text(m: &Metrics) -> String {
    let mut out = format!(
        "model {}, {} points, {} modes\noverall mean SRMSE {}\n",
        m.model,
        m.n_points,
        m.mode_count,
        fmt4(m.overall_mean_srmse)
    );
    out.push_str("mode  segments  mean SRMSE\n");
    for (i, (k, s)) in m.segment_counts.iter().zip(&m.mode_mean_srmse).enumerate() {
        let _ = writeln!(out, "{:>4}  {:>8}  {}", i + 1, k, fmt4(*s));
    }
    let _ = writeln!(
        out,
        "forced {}, flat {}, unconverged {}",
        m.forced_segments, m.flat_segments, m.unconverged_segments
    );
    out
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

/// Everything `decompose` writes.
pub fn decomposition_artifacts(
    d: &Decomposition,
    space: ReportSpace,
    ingest: Option<&IngestReport>,
) -> Result<Vec<Artifact>> {
    let fitted = (0..d.mode_count()).map(|m| d.fitted(m)).collect::<fcd_core::Result<Vec<_>>>()?;
    Ok(vec![
        Artifact::new(
            "fitted.csv",
            series_table(
                "fitted: reconstruction of each mode, mode_1 finest, last mode the trend",
                &mode_columns(d.mode_count()),
                d.signal.x(),
                &fitted,
            ),
        ),
        Artifact::new("segments.csv", segment_table(d)),
        Artifact::new("report.txt", report_text(d, space)?),
        Artifact::new("decomposition.json", json(&d.document())),
        Artifact::new("metrics.json", json(&metrics(d, ingest))),
    ])
}

#[derive(Serialize)]
struct SeriesDoc<'a> {
    format: &'static str,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    order: Option<usize>,
    modes: Vec<ModeSeriesDoc<'a>>,
}

#[derive(Serialize)]
struct ModeSeriesDoc<'a> {
    mode: usize,
    method: Method,
    segments: &'a [SegmentCalculus],
}

/// Derivative table and expression document for one order.
pub fn derivative_artifacts(series: &[DerivativeSeries], order: usize) -> Vec<Artifact> {
    let x = series.first().map(|s| s.x.as_slice()).unwrap_or(&[]);
    let values: Vec<Vec<f64>> = series.iter().map(|s| s.values.clone()).collect();
    let doc = SeriesDoc {
        format: FORMAT,
        kind: "derivative",
        order: Some(order),
        modes: series
            .iter()
            .map(|s| ModeSeriesDoc {
                mode: s.mode + 1,
                method: s.method,
                segments: &s.segments,
            })
            .collect(),
    };
    vec![
        Artifact::new(
            format!("derivative_{order}.csv"),
            series_table(
                &format!("derivative of order {order} of each mode"),
                &mode_columns(series.len()),
                x,
                &values,
            ),
        ),
        Artifact::new(format!("derivative_{order}.json"), json(&doc)),
    ]
}

/// Running-integral table and antiderivative document.
pub fn integral_artifacts(series: &[IntegralSeries]) -> Vec<Artifact> {
    let x = series.first().map(|s| s.x.as_slice()).unwrap_or(&[]);
    let values: Vec<Vec<f64>> = series.iter().map(|s| s.values.clone()).collect();
    let doc = SeriesDoc {
        format: FORMAT,
        kind: "integral",
        order: None,
        modes: series
            .iter()
            .map(|s| ModeSeriesDoc {
                mode: s.mode + 1,
                method: s.method,
                segments: &s.segments,
            })
            .collect(),
    };
    vec![
        Artifact::new(
            "integral.csv",
            series_table(
                "running integral of each mode from the first sample",
                &mode_columns(series.len()),
                x,
                &values,
            ),
        ),
        Artifact::new("integral.json", json(&doc)),
    ]
}
