//! Raw signals and adaptive standard scaling.
//!
//! Both axes are centred on their mean and divided by a length-dependent
//! scale `sigma / (N * s_f)`, so the normalized sample density stays the same
//! whatever the series length. Normalization is exactly invertible through
//! [`denormalize`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sample-density scaling factor.
pub const DEFAULT_SF: f64 = 0.01;

/// A 1-D series `y(x)` with strictly increasing, finite abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    x: Vec<f64>,
    y: Vec<f64>,
}

/// What [`Signal::from_samples`] had to do to the input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub reordered: bool,
    /// Number of samples removed by collapsing repeated x values.
    pub collapsed: usize,
}

impl Signal {
    /// Builds a signal, sorting by x (stable) and collapsing duplicate x values
    /// to the mean of their y values.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::from_samples(x, y).map(|(s, _)| s)
    }

    pub fn from_samples(x: Vec<f64>, y: Vec<f64>) -> Result<(Self, CleanReport)> {
        if x.len() != y.len() {
            return Err(Error::InvalidSignal(format!(
                "x has {} values but y has {}",
                x.len(),
                y.len()
            )));
        }
        if let Some(i) = x.iter().zip(&y).position(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidSignal(format!("non-finite value at index {i}")));
        }

        let mut report = CleanReport::default();
        let mut order: Vec<usize> = (0..x.len()).collect();
        if x.windows(2).any(|w| w[1] < w[0]) {
            report.reordered = true;
            order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        }

        let mut xs = Vec::with_capacity(x.len());
        let mut ys = Vec::with_capacity(y.len());
        let mut i = 0;
        while i < order.len() {
            let xv = x[order[i]];
            let mut j = i;
            let mut sum = 0.0;
            while j < order.len() && x[order[j]] == xv {
                sum += y[order[j]];
                j += 1;
            }
            xs.push(xv);
            ys.push(if j - i == 1 { y[order[i]] } else { sum / (j - i) as f64 });
            report.collapsed += j - i - 1;
            i = j;
        }

        if xs.len() < 2 {
            return Err(Error::TooFewPoints {
                needed: 2,
                got: xs.len(),
            });
        }
        Ok((Signal { x: xs, y: ys }, report))
    }

    /// Caller guarantees sorted, finite, equal-length input.
    pub(crate) fn from_sorted(x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), y.len());
        Signal { x, y }
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Everything needed to map normalized values back to physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub mu_x: f64,
    pub mu_y: f64,
    /// Effective x scale `sigma_N`; 1.0 when the axis is degenerate.
    pub sigma_x: f64,
    /// Effective y scale `sigma_N`; 1.0 when the axis is degenerate.
    pub sigma_y: f64,
    pub s_f: f64,
    pub degenerate_x: bool,
    pub degenerate_y: bool,
}

impl NormalizationState {
    pub fn mu(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.mu_x,
            Axis::Y => self.mu_y,
        }
    }

    pub fn sigma(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.sigma_x,
            Axis::Y => self.sigma_y,
        }
    }

    pub fn degenerate(&self, axis: Axis) -> bool {
        match axis {
            Axis::X => self.degenerate_x,
            Axis::Y => self.degenerate_y,
        }
    }

    /// Maps a single physical value to normalized coordinates.
    pub fn scale(&self, value: f64, axis: Axis) -> f64 {
        if self.degenerate(axis) {
            0.0
        } else {
            (value - self.mu(axis)) / self.sigma(axis)
        }
    }

    pub fn unscale(&self, z: f64, axis: Axis) -> f64 {
        z * self.sigma(axis) + self.mu(axis)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / v.len() as f64).sqrt()
}

fn axis_scale(v: &[f64], n_sf: f64) -> (f64, f64, bool) {
    let mu = mean(v);
    let sigma = std_dev(v);
    if sigma < 1e-12 * mu.abs().max(1.0) {
        (mu, 1.0, true)
    } else {
        (mu, sigma / n_sf, false)
    }
}

/// Adaptive standard scaling of both axes.
pub fn normalize(signal: &Signal, s_f: f64) -> Result<(Signal, NormalizationState)> {
    if !(s_f > 0.0 && s_f.is_finite()) {
        return Err(Error::InvalidConfig(format!("s_f must be positive, got {s_f}")));
    }
    let n = signal.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    if signal.x.iter().chain(&signal.y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidSignal("non-finite value".into()));
    }
    let n_sf = n as f64 * s_f;
    let (mu_x, sigma_x, degenerate_x) = axis_scale(&signal.x, n_sf);
    let (mu_y, sigma_y, degenerate_y) = axis_scale(&signal.y, n_sf);
    let state = NormalizationState {
        mu_x,
        mu_y,
        sigma_x,
        sigma_y,
        s_f,
        degenerate_x,
        degenerate_y,
    };
    let x = signal.x.iter().map(|&v| state.scale(v, Axis::X)).collect();
    let y = signal.y.iter().map(|&v| state.scale(v, Axis::Y)).collect();
    Ok((Signal::from_sorted(x, y), state))
}

/// Inverse of [`normalize`] along one axis.
pub fn denormalize(values: &[f64], state: &NormalizationState, axis: Axis) -> Result<Vec<f64>> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidSignal(format!("non-finite value at index {i}")));
    }
    Ok(values.iter().map(|&z| state.unscale(z, axis)).collect())
}

/// Translates x values into a segment's local frame, `x - x_anchor`.
pub fn localize(x: &[f64], x_anchor: f64) -> Vec<f64> {
    x.iter().map(|&v| v - x_anchor).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spread(n: usize, sigma: f64) -> Vec<f64> {
        // alternating +-sigma has population std exactly sigma
        (0..n)
            .map(|i| if i % 2 == 0 { sigma } else { -sigma })
            .collect()
    }

    #[test]
    fn scale_equals_sigma_when_n_sf_is_one() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let s = Signal::new(x, spread(100, 3.0)).unwrap();
        let (_, st) = normalize(&s, 0.01).unwrap();
        assert_relative_eq!(st.sigma_y, 3.0, max_relative = 1e-14);
    }

    #[test]
    fn length_dependent_scale() {
        let x: Vec<f64> = (0..1000).map(f64::from).collect();
        let s = Signal::new(x, spread(1000, 2.0)).unwrap();
        let (_, st) = normalize(&s, 0.01).unwrap();
        assert_relative_eq!(st.sigma_y, 0.2, max_relative = 1e-14);
        assert_relative_eq!(st.scale(st.mu_y + 2.0, Axis::Y), 10.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_y_is_degenerate() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let s = Signal::new(x, vec![5.0; 10]).unwrap();
        let (z, st) = normalize(&s, 0.01).unwrap();
        assert!(st.degenerate_y);
        assert_eq!(st.sigma_y, 1.0);
        assert!(z.y().iter().all(|&v| v == 0.0));
        assert_eq!(denormalize(&[0.0], &st, Axis::Y).unwrap(), vec![5.0]);
    }

    #[test]
    fn denormalize_examples() {
        let st = NormalizationState {
            mu_x: 0.0,
            mu_y: 10.0,
            sigma_x: 1.0,
            sigma_y: 0.2,
            s_f: 0.01,
            degenerate_x: false,
            degenerate_y: false,
        };
        assert_eq!(denormalize(&[0.0], &st, Axis::Y).unwrap(), vec![10.0]);
        assert_relative_eq!(denormalize(&[1.0], &st, Axis::Y).unwrap()[0], 10.2);
        assert!(denormalize(&[f64::NAN], &st, Axis::Y).is_err());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            Signal::new(vec![0.0, f64::NAN], vec![1.0, 2.0]),
            Err(Error::InvalidSignal(_))
        ));
        assert!(matches!(
            Signal::new(vec![1.0, 1.0], vec![1.0, 2.0]),
            Err(Error::TooFewPoints { .. })
        ));
        assert!(Signal::new(vec![1.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn sorts_and_collapses_duplicates() {
        let (s, rep) =
            Signal::from_samples(vec![2.0, 0.0, 1.0, 1.0], vec![5.0, 1.0, 2.0, 4.0]).unwrap();
        assert_eq!(s.x(), &[0.0, 1.0, 2.0]);
        assert_eq!(s.y(), &[1.0, 3.0, 5.0]);
        assert!(rep.reordered);
        assert_eq!(rep.collapsed, 1);
    }

    #[test]
    fn localize_examples() {
        assert_eq!(localize(&[3.0, 4.0, 5.0], 3.0), vec![0.0, 1.0, 2.0]);
        assert_eq!(localize(&[1.5, 2.5], 0.0), vec![1.5, 2.5]);
        assert_eq!(localize(&[7.0], 7.0), vec![0.0]);
    }

    #[test]
    fn normalized_density_is_length_invariant() {
        // uniform samples over the same range: normalized spacing is set by s_f alone
        let density = |n: usize| {
            let x: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64 * 50.0).collect();
            let y = x.iter().map(|v| v.sin()).collect();
            let (z, _) = normalize(&Signal::new(x, y).unwrap(), 0.01).unwrap();
            let span = z.x()[n - 1] - z.x()[0];
            n as f64 / span
        };
        let d100 = density(100);
        let d10k = density(10_000);
        assert_relative_eq!(d100, d10k, max_relative = 0.03);
        // 1 / (sqrt(12) * s_f) for uniform data
        assert_relative_eq!(d10k, 1.0 / (12f64.sqrt() * 0.01), max_relative = 0.01);
    }
}
