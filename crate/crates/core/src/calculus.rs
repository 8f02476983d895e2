//! Derivatives of any order and running integrals of a decomposed mode.
//!
//! Everything is computed from the physical-space segment functions, so
//! derivatives carry y-units per x-unit and integrals y-units times x-units.
//! Running integrals start at zero at the first sample; each segment adds
//! a cumulative constant so the integral stays continuous across knots.

use serde::{Deserialize, Serialize};

use crate::decompose::{Decomposition, REPORT_DIGITS};
use crate::error::{Error, Result};
use crate::expr::{antiderivative, Expr, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Numeric,
}

/// Per-segment expression of a derivative or integral in `t = x - anchor_x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCalculus {
    pub segment: usize,
    pub anchor_x: f64,
    /// Absent for numeric results.
    pub expression: Option<String>,
    /// Cumulative constant `C_t`; integrals only.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeSeries {
    pub mode: usize,
    pub order: usize,
    pub method: Method,
    pub segments: Vec<SegmentCalculus>,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralSeries {
    pub mode: usize,
    pub method: Method,
    pub segments: Vec<SegmentCalculus>,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
}

fn render(e: &Expr) -> String {
    e.render(&[]).sig_digits(REPORT_DIGITS).var("t").juxtapose(true).to_string()
}

/// Compiled per-segment functions of one mode.
struct Piecewise<'a> {
    d: &'a Decomposition,
    mode: usize,
    exprs: Vec<Expr>,
    tapes: Vec<Tape>,
    /// Integrands of antiderivative pieces; `None` for derivatives.
    integrands: Option<Vec<Tape>>,
    /// Running integral at each segment's anchor.
    start: Vec<f64>,
}

impl<'a> Piecewise<'a> {
    fn new(d: &'a Decomposition, mode: usize, exprs: Vec<Expr>) -> Self {
        let tapes = exprs.iter().map(|e| Tape::compile(std::slice::from_ref(e))).collect();
        let start = vec![0.0; exprs.len()];
        Piecewise {
            d,
            mode,
            exprs,
            tapes,
            integrands: None,
            start,
        }
    }

    fn anchor(&self, k: usize) -> f64 {
        self.d.modes[self.mode].segments[k].anchor_x
    }

    fn local(&self, k: usize, t: f64) -> f64 {
        self.tapes[k].eval(t, &[], (0.0, 0.0))[0]
    }

    /// Piece `k` at local `t`; for integrals, the running integral.
    fn value(&self, k: usize, t: f64) -> f64 {
        match &self.integrands {
            None => self.local(k, t),
            Some(f) => self.start[k] + self.definite(k, &f[k], t),
        }
    }

    /// `F_k(t) - F_k(0)`, or quadrature of the integrand when that difference
    /// has cancelled away (e.g. `A/k * exp(-k*t)` with `k` near zero).
    fn definite(&self, k: usize, f: &Tape, t: f64) -> f64 {
        let (ft, f0) = (self.local(k, t), self.local(k, 0.0));
        let g = ft - f0;
        if ft.abs().max(f0.abs()) <= ILL_CONDITIONED * g.abs() {
            return g;
        }
        let (lo, hi) = self.d.modes[self.mode].segments[k].range;
        let x = self.d.signal.x();
        let width = (x[hi - 1] - self.anchor(k)).max(x[hi - 1] - x[lo]);
        let panels = if width > 0.0 {
            ((t.abs() / width) * QUAD_PANELS as f64).ceil().max(1.0) as usize
        } else {
            1
        };
        gauss_legendre(|s| f.eval(s, &[], (0.0, 0.0))[0], t, panels)
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let k = self.d.locate(self.mode, x)?;
        Ok(self.value(k, x - self.anchor(k)))
    }

    fn sample(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.d.signal.len());
        for s in &self.d.modes[self.mode].segments {
            for &x in &self.d.signal.x()[s.range.0..s.range.1] {
                out.push(self.value(s.index, x - s.anchor_x));
            }
        }
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(Error::EvalDomainError { index: i });
        }
        Ok(out)
    }

    fn segments(&self, with_constants: bool) -> Vec<SegmentCalculus> {
        self.exprs
            .iter()
            .enumerate()
            .map(|(k, e)| SegmentCalculus {
                segment: k,
                anchor_x: self.anchor(k),
                expression: Some(render(e)),
                constant: with_constants.then(|| self.start[k] - self.local(k, 0.0)),
            })
            .collect()
    }
}

fn check_mode(d: &Decomposition, mode: usize) -> Result<()> {
    if mode >= d.mode_count() {
        return Err(Error::InvalidConfig(format!(
            "mode {mode} out of range (0..{})",
            d.mode_count()
        )));
    }
    Ok(())
}

fn derivative_piecewise(d: &Decomposition, mode: usize, order: usize) -> Result<Piecewise<'_>> {
    check_mode(d, mode)?;
    if order == 0 {
        return Err(Error::InvalidConfig("derivative order must be at least 1".into()));
    }
    let exprs = (0..d.modes[mode].segments.len())
        .map(|k| Ok(d.physical_expr(mode, k)?.nth_derivative(order)))
        .collect::<Result<_>>()?;
    Ok(Piecewise::new(d, mode, exprs))
}

/// Analytic `order`-th derivative of `mode`, sampled on the signal's x grid.
pub fn derivative_series(d: &Decomposition, mode: usize, order: usize) -> Result<DerivativeSeries> {
    let pw = derivative_piecewise(d, mode, order)?;
    Ok(DerivativeSeries {
        mode,
        order,
        method: Method::Analytic,
        segments: pw.segments(false),
        x: d.signal.x().to_vec(),
        values: pw.sample()?,
    })
}

/// Analytic derivative at arbitrary in-range points.
pub fn derivative_at(d: &Decomposition, mode: usize, order: usize, xq: &[f64]) -> Result<Vec<f64>> {
    let pw = derivative_piecewise(d, mode, order)?;
    xq.iter().map(|&x| pw.eval(x)).collect()
}

/// Antiderivatives with cumulative constants, or `None` when some segment
/// has no closed form.
fn integral_piecewise(d: &Decomposition, mode: usize) -> Result<Option<Piecewise<'_>>> {
    check_mode(d, mode)?;
    let mut exprs = Vec::new();
    let mut integrands = Vec::new();
    for k in 0..d.modes[mode].segments.len() {
        let f = d.physical_expr(mode, k)?;
        match antiderivative(&f) {
            Some(e) => exprs.push(e),
            None => return Ok(None),
        }
        integrands.push(Tape::compile(&[f]));
    }
    let mut pw = Piecewise::new(d, mode, exprs);
    pw.integrands = Some(integrands);
    // I(first sample) = 0, then I(anchor_k) carried from segment k - 1
    for k in 1..pw.exprs.len() {
        let t = pw.anchor(k) - pw.anchor(k - 1);
        pw.start[k] = pw.value(k - 1, t);
    }
    Ok(Some(pw))
}

/// Running integral of `mode` from the first sample.
///
/// Falls back to the composite trapezoid rule on the reconstruction when a
/// segment has no closed-form antiderivative.
pub fn integral_series(d: &Decomposition, mode: usize) -> Result<IntegralSeries> {
    if let Some(pw) = integral_piecewise(d, mode)? {
        return Ok(IntegralSeries {
            mode,
            method: Method::Analytic,
            segments: pw.segments(true),
            x: d.signal.x().to_vec(),
            values: pw.sample()?,
        });
    }
    let x = d.signal.x();
    let values = trapezoid(x, &d.fitted(mode)?);
    let segments = d.modes[mode]
        .segments
        .iter()
        .map(|s| SegmentCalculus {
            segment: s.index,
            anchor_x: s.anchor_x,
            expression: None,
            constant: Some(values[s.anchor_index]),
        })
        .collect();
    Ok(IntegralSeries {
        mode,
        method: Method::Numeric,
        segments,
        x: x.to_vec(),
        values,
    })
}

/// Running integral at arbitrary in-range points, with the method used.
pub fn integral_at(d: &Decomposition, mode: usize, xq: &[f64]) -> Result<(Vec<f64>, Method)> {
    if let Some(pw) = integral_piecewise(d, mode)? {
        let v = xq.iter().map(|&x| pw.eval(x)).collect::<Result<_>>()?;
        return Ok((v, Method::Analytic));
    }
    let x = d.signal.x();
    let f = d.fitted(mode)?;
    let cum = trapezoid(x, &f);
    let fq = d.reconstruct(mode, xq)?;
    let v = xq
        .iter()
        .zip(fq)
        .map(|(&q, fv)| {
            let i = x.partition_point(|&v| v <= q).saturating_sub(1);
            cum[i] + 0.5 * (q - x[i]) * (f[i] + fv)
        })
        .collect();
    Ok((v, Method::Numeric))
}

/// Relative cancellation beyond which `F(t) - F(0)` is not trusted.
const ILL_CONDITIONED: f64 = 1e5;

/// Quadrature panels per segment width.
const QUAD_PANELS: usize = 8;

/// Composite 8-point Gauss-Legendre integral of `f` over `[0, t]`.
fn gauss_legendre(f: impl Fn(f64) -> f64, t: f64, panels: usize) -> f64 {
    const NODES: [(f64, f64); 4] = [
        (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
        (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
        (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
        (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    ];
    let h = t / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for &(node, weight) in &NODES {
            let off = 0.5 * h * node;
            sum += weight * (f(mid - off) + f(mid + off));
        }
    }
    0.5 * h * sum
}

/// Cumulative composite trapezoid, starting at 0.
fn trapezoid(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (f[i] + f[i - 1]);
        out.push(acc);
    }
    out
}

/// First derivative of samples on a possibly non-uniform grid: second-order
/// central differences inside, one-sided differences at the ends.
fn gradient(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut g = vec![0.0; n];
    g[0] = (f[1] - f[0]) / (x[1] - x[0]);
    g[n - 1] = (f[n - 1] - f[n - 2]) / (x[n - 1] - x[n - 2]);
    for i in 1..n - 1 {
        let (hl, hr) = (x[i] - x[i - 1], x[i + 1] - x[i]);
        g[i] = (hl * hl * f[i + 1] - hr * hr * f[i - 1] + (hr * hr - hl * hl) * f[i])
            / (hl * hr * (hl + hr));
    }
    g
}

/// Numeric `order`-th derivative of the reconstruction by repeated
/// differencing on the sample grid.
pub fn numeric_derivative(d: &Decomposition, mode: usize, order: usize) -> Result<DerivativeSeries> {
    check_mode(d, mode)?;
    if order == 0 {
        return Err(Error::InvalidConfig("derivative order must be at least 1".into()));
    }
    let x = d.signal.x();
    if x.len() < 2 * order + 1 {
        return Err(Error::TooFewPoints {
            needed: 2 * order + 1,
            got: x.len(),
        });
    }
    let mut values = d.fitted(mode)?;
    for _ in 0..order {
        values = gradient(x, &values);
    }
    let segments = d.modes[mode]
        .segments
        .iter()
        .map(|s| SegmentCalculus {
            segment: s.index,
            anchor_x: s.anchor_x,
            expression: None,
            constant: None,
        })
        .collect();
    Ok(DerivativeSeries {
        mode,
        order,
        method: Method::Numeric,
        segments,
        x: x.to_vec(),
        values,
    })
}

/// Maps `values` onto `[0, 1]`; a constant series maps to zeros.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_of_a_line_is_exact() {
        let x = [0.0, 0.5, 2.0, 3.0];
        let f: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let i = trapezoid(&x, &f);
        for (xi, ii) in x.iter().zip(&i) {
            assert!((ii - (xi * xi + xi)).abs() < 1e-14);
        }
    }

    #[test]
    fn gauss_legendre_integrates_smooth_functions() {
        let v = gauss_legendre(|s| s.cos(), 2.0, 4);
        assert!((v - 2f64.sin()).abs() < 1e-14);
        let p = gauss_legendre(|s| s.powi(15), -1.5, 1);
        assert!((p - 1.5f64.powi(16) / 16.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_exact_for_quadratics_inside() {
        let x = [0.0, 0.3, 1.0, 1.2, 2.0];
        let f: Vec<f64> = x.iter().map(|v| v * v).collect();
        let g = gradient(&x, &f);
        for i in 1..4 {
            assert!((g[i] - 2.0 * x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn minmax_endpoints() {
        let v = minmax_normalize(&[3.0, -1.0, 5.0, 0.0]);
        assert_eq!(v.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(v.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
        assert_eq!(minmax_normalize(&[2.0, 2.0]), vec![0.0, 0.0]);
    }
}
