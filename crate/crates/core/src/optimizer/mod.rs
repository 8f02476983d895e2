//! Segment fitting: the LM engine and the overlapping forward fit that chains
//! segments of one mode under continuity constraints.

mod forward;
mod lm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ParamVector;

pub use forward::{fit_batch, fit_mode, fit_trend, segment_anchor, BatchOutput, ModeFit};
pub use lm::{
    chain_jacobian, lm_fit, lm_fit_bounded, ChainLinearization, LMStep, LMTrace, Termination, MIN_SAMPLES_PER_PERIOD,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LMConfig {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub ridge_alpha: f64,
    pub max_iters: usize,
    pub loss_tol: f64,
    pub step_tol: f64,
    /// Segments kept per batch of the forward fit.
    pub batch_size: usize,
    /// Rejected steps allowed within one iteration.
    pub max_rejections: usize,
    /// Damping above which the fit gives up.
    pub lambda_max: f64,
}

impl Default for LMConfig {
    fn default() -> Self {
        LMConfig {
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            ridge_alpha: 1e-8,
            max_iters: 100,
            loss_tol: 1e-10,
            step_tol: 1e-10,
            batch_size: 8,
            max_rejections: 20,
            lambda_max: 1e12,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda0", self.lambda0),
            ("ridge_alpha", self.ridge_alpha),
            ("loss_tol", self.loss_tol),
            ("step_tol", self.step_tol),
            ("lambda_max", self.lambda_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda_up", self.lambda_up), ("lambda_down", self.lambda_down)] {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must exceed 1, got {v}")));
            }
        }
        for (name, v) in [
            ("max_iters", self.max_iters),
            ("batch_size", self.batch_size),
            ("max_rejections", self.max_rejections),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentFlags {
    pub converged: bool,
    /// Parameters were not optimized: either nothing was free or the solve
    /// failed and the initial guess was kept.
    pub forced: bool,
    /// The segment is nearly constant relative to the whole signal.
    pub flat: bool,
    /// The initial guess lay outside the bounds and was clamped.
    pub clamped: bool,
}

/// Result of fitting one segment, in normalized local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    pub model: String,
    /// Sample index range `[start, end)` within the signal.
    pub range: (usize, usize),
    /// Full parameter vector, normalized space.
    pub params: ParamVector,
    /// Indices of the parameters that were optimized.
    pub free: Vec<usize>,
    pub loss: f64,
    pub srmse: Option<f64>,
    /// Value and slope handed to the next segment.
    pub exit: (f64, f64),
    pub iterations: usize,
    pub termination: Termination,
    pub flags: SegmentFlags,
}

impl SegmentFit {
    pub fn free_values(&self) -> Vec<f64> {
        self.free.iter().map(|&j| self.params.values[j]).collect()
    }

    pub fn fixed_values(&self) -> Vec<f64> {
        (0..self.params.values.len())
            .filter(|j| !self.free.contains(j))
            .map(|j| self.params.values[j])
            .collect()
    }
}
