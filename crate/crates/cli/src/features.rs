//! Sliding-window feature tensors for downstream forecasting models.
//!
//! Each window is decomposed on its own. A row holds
//! `[raw | per mode: fitted, d1 | per mode: segment parameters]`, where the
//! parameter block of every mode is zero-padded to the largest segment count
//! so all rows share one shape. Windows start every `stride` samples and are
//! emitted only while `horizon` samples remain after the window for the
//! prediction targets, giving `floor((N - window - horizon) / stride) + 1`
//! rows.

use fcd_core::calculus::derivative_series;
use fcd_core::decompose::{decompose, DecomposeConfig, FORMAT};
use fcd_core::models::ModelSpec;
use fcd_core::signal::Signal;
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{num, Artifact};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WindowSpec {
    pub window: usize,
    pub stride: usize,
    pub horizon: usize,
}

impl WindowSpec {
    /// Number of windows over `n` samples, or an error when none fits.
    pub fn count(&self, n: usize) -> Result<usize> {
        if self.stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        if self.window + self.horizon > n {
            return Err(CliError::data(
                "WindowTooLong",
                format!(
                    "window {} plus horizon {} exceeds the {n} samples",
                    self.window, self.horizon
                ),
            ));
        }
        Ok((n - self.window - self.horizon) / self.stride + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Raw,
    Fitted,
    FirstDerivative,
    Parameters,
}

/// A contiguous run of columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub kind: BlockKind,
    /// 1-based mode, absent for the raw block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<usize>,
    pub start: usize,
    pub len: usize,
}

/// Self-contained description of the row layout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layout {
    pub format: &'static str,
    pub model: String,
    pub params: Vec<String>,
    pub spec: WindowSpec,
    pub n_windows: usize,
    pub row_len: usize,
    pub mode_count: usize,
    pub segment_counts: Vec<usize>,
    /// Parameter slots per mode; unused slots are 0.0.
    pub padded_segments: usize,
    /// Sample index of each window's first point; targets follow at
    /// `start + window .. start + window + horizon`.
    pub starts: Vec<usize>,
    pub blocks: Vec<Block>,
    pub columns: Vec<String>,
    pub notes: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub layout: Layout,
    pub rows: Vec<Vec<f64>>,
}

struct WindowFeatures {
    fitted: Vec<Vec<f64>>,
    d1: Vec<Vec<f64>>,
    /// Per mode, per segment parameter vectors.
    params: Vec<Vec<Vec<f64>>>,
}

fn window_features(s: &Signal, model: &ModelSpec, cfg: &DecomposeConfig) -> Result<WindowFeatures> {
    let d = decompose(s, model, cfg)?;
    let mut out = WindowFeatures {
        fitted: Vec::new(),
        d1: Vec::new(),
        params: Vec::new(),
    };
    for m in 0..d.mode_count() {
        out.fitted.push(d.fitted(m)?);
        out.d1.push(derivative_series(&d, m, 1)?.values);
        out.params.push(
            d.modes[m]
                .segments
                .iter()
                .map(|seg| {
                    seg.physical
                        .as_ref()
                        .map_or_else(|| seg.fit.params.values.clone(), |p| p.values.clone())
                })
                .collect(),
        );
    }
    Ok(out)
}

pub fn extract_features(
    signal: &Signal,
    model: &ModelSpec,
    cfg: &DecomposeConfig,
    spec: WindowSpec,
) -> Result<FeatureTensor> {
    if spec.window < model.n_params() {
        return Err(CliError::Config(format!(
            "window {} is shorter than the model's {} parameters",
            spec.window,
            model.n_params()
        )));
    }
    let n_windows = spec.count(signal.len())?;
    let starts: Vec<usize> = (0..n_windows).map(|i| i * spec.stride).collect();
    // windows run in parallel already
    let inner = DecomposeConfig {
        parallel: false,
        ..cfg.clone()
    };
    let slice = |a: usize| {
        let r = a..a + spec.window;
        Signal::new(signal.x()[r.clone()].to_vec(), signal.y()[r].to_vec())
    };
    let run = |&a: &usize| -> Result<WindowFeatures> { window_features(&slice(a)?, model, &inner) };
    let feats: Vec<WindowFeatures> = if cfg.parallel {
        starts.par_iter().map(run).collect::<Result<_>>()?
    } else {
        starts.iter().map(run).collect::<Result<_>>()?
    };

    let first = &feats[0];
    let mode_count = first.fitted.len();
    let segment_counts: Vec<usize> = first.params.iter().map(Vec::len).collect();
    let padded = segment_counts.iter().copied().max().unwrap_or(0);
    let np = model.n_params();
    let w = spec.window;

    let mut blocks = vec![Block {
        kind: BlockKind::Raw,
        mode: None,
        start: 0,
        len: w,
    }];
    let mut columns: Vec<String> = (0..w).map(|i| format!("raw_{i}")).collect();
    for m in 1..=mode_count {
        for (kind, tag) in [(BlockKind::Fitted, "fit"), (BlockKind::FirstDerivative, "d1")] {
            blocks.push(Block {
                kind,
                mode: Some(m),
                start: columns.len(),
                len: w,
            });
            columns.extend((0..w).map(|i| format!("{tag}_m{m}_{i}")));
        }
    }
    for m in 1..=mode_count {
        blocks.push(Block {
            kind: BlockKind::Parameters,
            mode: Some(m),
            start: columns.len(),
            len: padded * np,
        });
        for k in 1..=padded {
            columns.extend(model.param_names.iter().map(|p| format!("p_m{m}_s{k}_{p}")));
        }
    }

    let rows = starts
        .iter()
        .zip(&feats)
        .map(|(&a, f)| {
            let mut row = Vec::with_capacity(columns.len());
            row.extend_from_slice(&signal.y()[a..a + w]);
            for m in 0..mode_count {
                row.extend_from_slice(&f.fitted[m]);
                row.extend_from_slice(&f.d1[m]);
            }
            for m in 0..mode_count {
                let start = row.len();
                for p in &f.params[m] {
                    row.extend_from_slice(p);
                }
                row.resize(start + padded * np, 0.0);
            }
            row
        })
        .collect::<Vec<_>>();

    Ok(FeatureTensor {
        layout: Layout {
            format: FORMAT,
            model: model.name.clone(),
            params: model.param_names.clone(),
            spec,
            n_windows,
            row_len: columns.len(),
            mode_count,
            segment_counts,
            padded_segments: padded,
            starts,
            blocks,
            columns,
            notes: vec![
                "raw holds the window's y values; fitted and d1 are per-mode reconstruction and first derivative at the same samples",
                "parameter blocks list each segment's physical parameters in model order, segments in order, zero-padded to padded_segments",
            ],
        },
        rows,
    })
}

pub fn feature_artifacts(t: &FeatureTensor) -> Vec<Artifact> {
    let mut csv = format!("# {FORMAT} features: column meaning in features.layout.json\n");
    csv.push_str(&t.layout.columns.join(","));
    csv.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let mut layout = serde_json::to_string_pretty(&t.layout).expect("layout serializes");
    layout.push('\n');
    vec![
        Artifact {
            name: "features.csv".into(),
            body: csv,
        },
        Artifact {
            name: "features.layout.json".into(),
            body: layout,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_counts() {
        let spec = WindowSpec {
            window: 60,
            stride: 5,
            horizon: 30,
        };
        assert_eq!(spec.count(5000).unwrap(), 983);
        let tiling = WindowSpec {
            window: 50,
            stride: 50,
            horizon: 0,
        };
        assert_eq!(tiling.count(1020).unwrap(), 20);
        let e = WindowSpec { horizon: 0, ..spec }.count(59).unwrap_err();
        assert_eq!(e.kind(), "WindowTooLong");
    }
}
