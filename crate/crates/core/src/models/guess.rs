//! Data-driven initial guesses for the preset families.
//!
//! Every rule takes segment-local normalized `x` (starting at 0) and the
//! matching `y`, and returns a full parameter vector.

use std::f64::consts::PI;

use crate::optimizer::MIN_SAMPLES_PER_PERIOD;
use crate::signal::{mean, std_dev};

/// Upper bound on the number of candidate frequencies in [`dominant_sine`].
const MAX_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum GuessRule {
    /// Constant vector, used for custom models.
    Fixed(Vec<f64>),
    /// Zeros, except the parameter at `offset` which takes the first `y`.
    Polynomial { offset: usize },
    /// Sine family. Indices refer to the parameter vector; `phase` is absent
    /// for models without a phase term.
    Sine {
        amplitude: usize,
        frequency: usize,
        phase: Option<usize>,
        slope: usize,
        offset: usize,
    },
    Decay {
        amplitude: usize,
        rate: usize,
        slope: usize,
        offset: usize,
    },
    Gaussian {
        amplitude: usize,
        center: usize,
        width: usize,
        offset: usize,
    },
    Logistic {
        height: usize,
        rate: usize,
        midpoint: usize,
        offset: usize,
    },
    Fourier {
        amplitudes: Vec<usize>,
        phases: Vec<usize>,
        frequency: usize,
        slope: usize,
        offset: usize,
    },
}

/// Straight line through the first and last sample, as (slope, offset).
fn endpoint_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let span = x[n - 1] - x[0];
    let slope = if n > 1 && span > 0.0 {
        (y[n - 1] - y[0]) / span
    } else {
        0.0
    };
    (slope, y[0] - slope * x[0])
}

/// Strongest sinusoid `R*sin(w*x + phi)` in `y`, scanning `w = 2*pi*j/span`
/// for `j = 1..=min((n-1)/3, 64)` and projecting onto `sin` and `cos`.
/// Returns `(R, w, phi)`; for tiny segments falls back to one period per span.
pub fn dominant_sine(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    dominant_sine_below(x, y, 1)
}

/// [`dominant_sine`] restricted to frequencies whose `harmonics`-th multiple
/// keeps [`MIN_SAMPLES_PER_PERIOD`] samples per period, the limit the fitter
/// enforces. Harmonics at the sampling limit vanish on the samples and leave
/// their amplitudes unconstrained.
pub fn dominant_sine_below(x: &[f64], y: &[f64], harmonics: usize) -> (f64, f64, f64) {
    let n = x.len();
    let span = x[n - 1] - x[0];
    if n < 3 || span <= 0.0 {
        let w = if span > 0.0 { 2.0 * PI / span } else { 1.0 };
        return (std_dev(y) * 2f64.sqrt(), w, 0.0);
    }
    let per_period = MIN_SAMPLES_PER_PERIOD * harmonics.max(1) as f64;
    let jmax = (((n - 1) as f64 / per_period) as usize).clamp(1, MAX_CANDIDATES);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for j in 1..=jmax {
        let w = 2.0 * PI * j as f64 / span;
        // 2x2 least squares on [sin, cos]
        let (mut ss, mut sc, mut cc, mut ys, mut yc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(y) {
            let (s, c) = (w * xi).sin_cos();
            ss += s * s;
            sc += s * c;
            cc += c * c;
            ys += yi * s;
            yc += yi * c;
        }
        let det = ss * cc - sc * sc;
        if det.abs() <= 1e-12 * (ss * cc).max(1e-300) {
            continue;
        }
        let a = (ys * cc - yc * sc) / det;
        let b = (yc * ss - ys * sc) / det;
        let power = a * ys + b * yc;
        if power > best.0 {
            best = (power, a, b, w);
        }
    }
    if !best.0.is_finite() {
        return (std_dev(y) * 2f64.sqrt(), 2.0 * PI / span, 0.0);
    }
    let (_, a, b, w) = best;
    // a sin + b cos = R sin(w x + phi)
    (a.hypot(b), w, b.atan2(a))
}

impl GuessRule {
    pub fn guess(&self, n_params: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; n_params];
        if x.is_empty() {
            return p;
        }
        match self {
            GuessRule::Fixed(v) => p.copy_from_slice(v),
            GuessRule::Polynomial { offset } => p[*offset] = y[0],
            GuessRule::Sine {
                amplitude,
                frequency,
                phase,
                slope,
                offset,
            } => {
                let (m, c) = endpoint_line(x, y);
                let detrended: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| b - m * a - c).collect();
                let (r, w, phi) = dominant_sine(x, &detrended);
                match phase {
                    Some(ph) => {
                        p[*amplitude] = r;
                        p[*ph] = phi;
                    }
                    // without a phase term keep the sine-projection sign
                    None => p[*amplitude] = r * phi.cos().signum(),
                }
                p[*frequency] = w;
                p[*slope] = m;
                p[*offset] = c;
            }
            GuessRule::Decay {
                amplitude,
                rate,
                slope,
                offset,
            } => {
                let n = x.len();
                let span = (x[n - 1] - x[0]).max(f64::MIN_POSITIVE);
                p[*amplitude] = y[0] - y[n - 1];
                p[*rate] = 1.0 / span;
                p[*slope] = 0.0;
                p[*offset] = y[n - 1];
            }
            GuessRule::Gaussian {
                amplitude,
                center,
                width,
                offset,
            } => {
                let n = x.len();
                let base = 0.5 * (y[0] + y[n - 1]);
                let (k, peak) = y
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (i, v - base))
                    .fold((0, 0.0_f64), |acc, (i, d)| if d.abs() > acc.1.abs() { (i, d) } else { acc });
                let span = x[n - 1] - x[0];
                p[*amplitude] = peak;
                p[*center] = x[k];
                p[*width] = if span > 0.0 { span / 4.0 } else { 1.0 };
                p[*offset] = base;
            }
            GuessRule::Logistic {
                height,
                rate,
                midpoint,
                offset,
            } => {
                let n = x.len();
                let span = x[n - 1] - x[0];
                p[*height] = y[n - 1] - y[0];
                p[*rate] = if span > 0.0 { 8.0 / span } else { 1.0 };
                p[*midpoint] = 0.5 * (x[0] + x[n - 1]);
                p[*offset] = y[0];
            }
            GuessRule::Fourier {
                amplitudes,
                phases,
                frequency,
                slope,
                offset,
            } => {
                let (m, c) = endpoint_line(x, y);
                let detrended: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| b - m * a - c).collect();
                let (r, w, phi) = dominant_sine_below(x, &detrended, amplitudes.len());
                p[amplitudes[0]] = r;
                p[phases[0]] = phi;
                p[*frequency] = w;
                p[*slope] = m;
                p[*offset] = c;
            }
        }
        // degenerate segments fall back to a constant
        if p.iter().any(|v| !v.is_finite()) {
            p.iter_mut().for_each(|v| *v = 0.0);
            if let GuessRule::Polynomial { offset } = self {
                p[*offset] = mean(y);
            }
        }
        p
    }
}
