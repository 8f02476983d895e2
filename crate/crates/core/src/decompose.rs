//! The full pipeline: normalize, lay out modes, fit every mode and map the
//! fits back to physical units. Also hosts fit-quality metrics, piecewise
//! reports and the `fcd/1` result document.
//!
//! Segment `k > 0` of a mode is expressed in local coordinates whose origin
//! is the last sample of segment `k - 1`. Query points are assigned to
//! segments by those knots: segment `k` owns `(knot_k, knot_{k+1}]` and the
//! first segment also owns the first sample.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{fmt_sig, Expr, Sym};
use crate::layout::{ModeLayout, DEFAULT_ALPHA_SEG, DEFAULT_BETA_MIN};
use crate::models::{ModelSpec, ParamSpace, ParamVector};
use crate::optimizer::{fit_mode, segment_anchor, LMConfig, SegmentFit, Termination};
use crate::signal::{normalize, std_dev, NormalizationState, Signal, DEFAULT_SF};

/// Version tag of serialized results.
pub const FORMAT: &str = "fcd/1";

/// Significant digits in piecewise reports.
pub const REPORT_DIGITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecomposeConfig {
    pub s_f: f64,
    pub alpha_seg: usize,
    pub beta_min: usize,
    pub lm: LMConfig,
    /// Fit modes on the rayon pool.
    pub parallel: bool,
}

impl Default for DecomposeConfig {
    fn default() -> Self {
        DecomposeConfig {
            s_f: DEFAULT_SF,
            alpha_seg: DEFAULT_ALPHA_SEG,
            beta_min: DEFAULT_BETA_MIN,
            lm: LMConfig::default(),
            parallel: true,
        }
    }
}

impl DecomposeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_f > 0.0 && self.s_f.is_finite()) {
            return Err(Error::InvalidConfig(format!("s_f must be positive, got {}", self.s_f)));
        }
        if self.alpha_seg == 0 || self.beta_min == 0 {
            return Err(Error::InvalidConfig(
                "alpha_seg and beta_min must be at least 1".into(),
            ));
        }
        self.lm.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentMetrics {
    pub srmse: f64,
    pub flat: bool,
    pub n_points: usize,
}

/// Segment RMSE over the segment's own (population) standard deviation.
///
/// A segment is flat when its deviation is below 1% of `sigma_global` (or
/// zero up to rounding); flat segments report `min(srmse, 1)`, and `0/0` counts as 1.
pub fn segment_srmse(y: &[f64], fitted: &[f64], sigma_global: f64) -> Result<SegmentMetrics> {
    if y.is_empty() {
        return Err(Error::EmptySegment);
    }
    if y.len() != fitted.len() {
        return Err(Error::InvalidSignal(format!(
            "{} observations but {} fitted values",
            y.len(),
            fitted.len()
        )));
    }
    let n = y.len();
    let rmse = (y.iter().zip(fitted).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64).sqrt();
    // deviation at rounding level is no deviation
    let magnitude = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sigma = Some(std_dev(y)).filter(|&s| s > 1e-12 * magnitude).unwrap_or(0.0);
    let flat = sigma == 0.0 || sigma < 0.01 * sigma_global;
    let srmse = if sigma == 0.0 {
        1.0
    } else if flat {
        (rmse / sigma).min(1.0)
    } else {
        rmse / sigma
    };
    Ok(SegmentMetrics {
        srmse,
        flat,
        n_points: n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub index: usize,
    /// Sample index range `[start, end)`.
    pub range: (usize, usize),
    /// Sample index of the local origin.
    pub anchor_index: usize,
    /// Local origin in physical x units.
    pub anchor_x: f64,
    /// Fit in normalized space.
    pub fit: SegmentFit,
    /// Physical parameters; `None` when the model has no unscale rules.
    pub physical: Option<ParamVector>,
    pub metrics: SegmentMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub index: usize,
    pub trend: bool,
    pub boundaries: Vec<usize>,
    pub segments: Vec<SegmentResult>,
}

impl ModeResult {
    pub fn mean_srmse(&self) -> f64 {
        mean(self.segments.iter().map(|s| s.metrics.srmse))
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub signal: Signal,
    pub state: NormalizationState,
    pub layout: ModeLayout,
    pub modes: Vec<ModeResult>,
    pub model: ModelSpec,
    pub config: DecomposeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrmseSummary {
    pub per_mode: Vec<f64>,
    /// Unweighted mean over every segment of every mode.
    pub overall: f64,
}

/// Decomposes `signal` into modes of piecewise `model` fits.
pub fn decompose(signal: &Signal, model: &ModelSpec, config: &DecomposeConfig) -> Result<Decomposition> {
    config.validate()?;
    let (z, state) = normalize(signal, config.s_f)?;
    let layout = ModeLayout::new(
        signal.len(),
        config.alpha_seg,
        config.beta_min,
        model.n_params(),
    )?;
    let fit = |m: usize| fit_mode(model, z.x(), z.y(), &layout.boundaries[m], &config.lm);
    let fits: Vec<_> = if config.parallel {
        (0..layout.mode_count()).into_par_iter().map(fit).collect()
    } else {
        (0..layout.mode_count()).map(fit).collect()
    };
    let sigma_global = std_dev(signal.y());
    let last = layout.mode_count() - 1;
    let mut modes = Vec::with_capacity(fits.len());
    for (m, mode_fit) in fits.into_iter().enumerate() {
        let mode_fit = mode_fit?;
        let b = &layout.boundaries[m];
        let mut segments = Vec::with_capacity(mode_fit.segments.len());
        for (k, mut fit) in mode_fit.segments.into_iter().enumerate() {
            let (lo, hi) = fit.range;
            let anchor_index = if k == 0 { lo } else { lo - 1 };
            let za = segment_anchor(z.x(), b, k);
            let local: Vec<f64> = z.x()[lo..hi].iter().map(|&v| v - za).collect();
            let fitted: Vec<f64> = model
                .evaluate(&fit.params.values, &local)?
                .into_iter()
                .map(|v| state.unscale(v, crate::signal::Axis::Y))
                .collect();
            let metrics = segment_srmse(&signal.y()[lo..hi], &fitted, sigma_global)?;
            fit.flags.flat = metrics.flat;
            fit.srmse = Some(metrics.srmse);
            let physical = model
                .unscale
                .as_ref()
                .map(|_| model.unscale_params(&fit.params.values, &state));
            segments.push(SegmentResult {
                index: k,
                range: (lo, hi),
                anchor_index,
                anchor_x: signal.x()[anchor_index],
                fit,
                physical,
                metrics,
            });
        }
        modes.push(ModeResult {
            index: m,
            trend: m == last,
            boundaries: b.clone(),
            segments,
        });
    }
    Ok(Decomposition {
        signal: signal.clone(),
        state,
        layout,
        modes,
        model: model.clone(),
        config: config.clone(),
    })
}

/// How piecewise reports show the local shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportSpace {
    /// Expressions in `t = x - x_k`, anchors listed per line.
    Local,
    /// `(x - x_k)` written into each expression.
    Absolute,
}

fn shifted_var(anchor: f64) -> String {
    if anchor == 0.0 {
        "x".into()
    } else if anchor < 0.0 {
        format!("(x + {})", fmt_sig(-anchor, 6))
    } else {
        format!("(x - {})", fmt_sig(anchor, 6))
    }
}

impl Decomposition {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    fn mode(&self, mode: usize) -> Result<&ModeResult> {
        self.modes.get(mode).ok_or_else(|| {
            Error::InvalidConfig(format!("mode {mode} out of range (0..{})", self.modes.len()))
        })
    }

    /// Segment owning physical `x` in `mode`.
    pub fn locate(&self, mode: usize, x: f64) -> Result<usize> {
        let xs = self.signal.x();
        let (lo, hi) = (xs[0], xs[xs.len() - 1]);
        if !(x >= lo && x <= hi) {
            return Err(Error::ExtrapolationError { x, lo, hi });
        }
        let segs = &self.mode(mode)?.segments;
        // knots are the anchors of segments 1.., increasing
        Ok(segs[1..].partition_point(|s| s.anchor_x < x))
    }

    /// Physical model values of `mode` at the query points.
    pub fn reconstruct(&self, mode: usize, xq: &[f64]) -> Result<Vec<f64>> {
        let m = self.mode(mode)?;
        let mut out = Vec::with_capacity(xq.len());
        for &q in xq {
            let s = &m.segments[self.locate(mode, q)?];
            let u = (q - s.anchor_x) / self.state.sigma_x;
            let v = self.model.evaluate(&s.fit.params.values, &[u])?[0];
            out.push(self.state.unscale(v, crate::signal::Axis::Y));
        }
        Ok(out)
    }

    /// Reconstruction at every sample.
    pub fn fitted(&self, mode: usize) -> Result<Vec<f64>> {
        self.reconstruct(mode, self.signal.x())
    }

    /// Segment function in physical units as an expression of the local
    /// variable `x - anchor`, with every parameter bound to its value. Uses
    /// the physical parameters when available, otherwise wraps the normalized
    /// model in the axis scaling.
    pub fn physical_expr(&self, mode: usize, seg: usize) -> Result<Expr> {
        let s = self
            .mode(mode)?
            .segments
            .get(seg)
            .ok_or(Error::EmptySegment)?;
        Ok(match &s.physical {
            Some(p) => self.model.expr.bind_params(&p.values),
            None => {
                let st = &self.state;
                let u = Expr::x() / Expr::num(st.sigma_x);
                let f = self.model.expr.bind_params(&s.fit.params.values).substitute(Sym::X, &u);
                Expr::num(st.sigma_y) * f + Expr::num(st.mu_y)
            }
        })
    }

    /// Reconstruction through [`Self::physical_expr`].
    pub fn reconstruct_physical(&self, mode: usize, xq: &[f64]) -> Result<Vec<f64>> {
        let m = self.mode(mode)?;
        let exprs: Vec<Expr> = (0..m.segments.len())
            .map(|k| self.physical_expr(mode, k))
            .collect::<Result<_>>()?;
        xq.iter()
            .map(|&q| {
                let k = self.locate(mode, q)?;
                Ok(exprs[k].eval(q - m.segments[k].anchor_x, &[], (0.0, 0.0)))
            })
            .collect()
    }

    pub fn aggregate_srmse(&self) -> SrmseSummary {
        SrmseSummary {
            per_mode: self.modes.iter().map(ModeResult::mean_srmse).collect(),
            overall: mean(
                self.modes
                    .iter()
                    .flat_map(|m| m.segments.iter().map(|s| s.metrics.srmse)),
            ),
        }
    }

    /// Case-by-case text of the piecewise function of `mode`.
    pub fn piecewise_report(&self, mode: usize, space: ReportSpace) -> Result<String> {
        let m = self.mode(mode)?;
        let n = self.signal.len();
        let mut out = String::new();
        let kind = if m.trend { ", trend" } else { "" };
        let _ = writeln!(
            out,
            "mode {} of {}{kind}: {} segment(s), model {}, continuity {}",
            mode + 1,
            self.modes.len(),
            m.segments.len(),
            self.model.name,
            self.model.continuity.order.name()
        );
        match space {
            ReportSpace::Absolute => out.push_str(
                "x-values are absolute; each case is shifted by its anchor x_k, so evaluate it at x - x_k\n",
            ),
            ReportSpace::Local => {
                out.push_str("each case is a function of t = x - x_k with anchor x_k listed\n")
            }
        }
        out.push_str("f(x) = {\n");
        for (k, s) in m.segments.iter().enumerate() {
            let e = self.physical_expr(mode, k)?;
            let var = match space {
                ReportSpace::Local => "t".to_string(),
                ReportSpace::Absolute => shifted_var(s.anchor_x),
            };
            let body = e
                .render(&self.model.param_names)
                .sig_digits(REPORT_DIGITS)
                .var(&var)
                .juxtapose(true)
                .to_string();
            let range = if s.range.1 == n {
                format!("[{}, {}]", s.range.0, n - 1)
            } else {
                format!("[{}, {})", s.range.0, s.range.1)
            };
            let mut line = format!("  {body},  {range}");
            if space == ReportSpace::Local {
                let _ = write!(line, "  x_k = {}", fmt_sig(s.anchor_x, 6));
            }
            if s.fit.flags.forced {
                line.push_str("  [forced]");
            }
            if s.metrics.flat {
                line.push_str("  [flat]");
            }
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("}\n");
        Ok(out)
    }

    /// Serializable result document.
    pub fn document(&self) -> Document {
        let names = &self.model.param_names;
        let summary = self.aggregate_srmse();
        Document {
            format: FORMAT.into(),
            model: ModelDoc {
                name: self.model.name.clone(),
                expression: self.model.expr.render(names).to_string(),
                params: names.clone(),
                continuity: self.model.continuity.order.name().into(),
                fixed: self
                    .model
                    .continuity
                    .fixed()
                    .into_iter()
                    .map(|i| names[i].clone())
                    .collect(),
            },
            config: self.config.clone(),
            normalization: self.state,
            n_points: self.signal.len(),
            summary: SummaryDoc {
                overall_mean_srmse: summary.overall,
                mode_mean_srmse: summary.per_mode,
                segment_counts: self.modes.iter().map(|m| m.segments.len()).collect(),
                forced_segments: self
                    .modes
                    .iter()
                    .flat_map(|m| &m.segments)
                    .filter(|s| s.fit.flags.forced)
                    .count(),
            },
            modes: self
                .modes
                .iter()
                .map(|m| ModeDoc {
                    mode: m.index + 1,
                    trend: m.trend,
                    segment_count: m.segments.len(),
                    mean_srmse: m.mean_srmse(),
                    segments: m.segments.iter().map(|s| segment_doc(s, names)).collect(),
                })
                .collect(),
        }
    }
}

fn segment_doc(s: &SegmentResult, names: &[String]) -> SegmentDoc {
    let f = &s.fit;
    SegmentDoc {
        segment: s.index + 1,
        range: [s.range.0, s.range.1],
        anchor: AnchorDoc {
            index: s.anchor_index,
            x: s.anchor_x,
        },
        normalized: f.params.values.clone(),
        physical: s.physical.as_ref().map(|p| {
            debug_assert_eq!(p.space, ParamSpace::Physical);
            p.values.clone()
        }),
        free: f.free.iter().map(|&i| names[i].clone()).collect(),
        loss: f.loss,
        srmse: s.metrics.srmse,
        flat: s.metrics.flat,
        n_points: s.metrics.n_points,
        converged: f.flags.converged,
        forced: f.flags.forced,
        clamped: f.flags.clamped,
        termination: f.termination,
        iterations: f.iterations,
    }
}

/// Top level of the `fcd/1` document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub format: String,
    pub model: ModelDoc,
    pub config: DecomposeConfig,
    pub normalization: NormalizationState,
    pub n_points: usize,
    pub summary: SummaryDoc,
    pub modes: Vec<ModeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDoc {
    pub name: String,
    pub expression: String,
    pub params: Vec<String>,
    pub continuity: String,
    pub fixed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub overall_mean_srmse: f64,
    pub mode_mean_srmse: Vec<f64>,
    pub segment_counts: Vec<usize>,
    pub forced_segments: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDoc {
    /// 1-based, finest first.
    pub mode: usize,
    pub trend: bool,
    pub segment_count: usize,
    pub mean_srmse: f64,
    pub segments: Vec<SegmentDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorDoc {
    pub index: usize,
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDoc {
    pub segment: usize,
    pub range: [usize; 2],
    pub anchor: AnchorDoc,
    pub normalized: Vec<f64>,
    pub physical: Option<Vec<f64>>,
    pub free: Vec<String>,
    pub loss: f64,
    pub srmse: f64,
    pub flat: bool,
    pub n_points: usize,
    pub converged: bool,
    pub forced: bool,
    pub clamped: bool,
    pub termination: Termination,
    pub iterations: usize,
}
