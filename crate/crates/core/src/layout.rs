//! Hierarchical mode layout: how many modes, how many segments per mode and
//! where the segment boundaries fall in index space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA_SEG: usize = 5;
pub const DEFAULT_BETA_MIN: usize = 4;

/// Number of modes for a series of `n` points, trend mode included.
///
/// Equals `ceil(log2((n / alpha_seg) / beta_min)) + 1`, clamped to at least 1.
/// Evaluated in integer arithmetic so exact powers of two never round the
/// wrong way.
pub fn mode_count(n: usize, alpha_seg: usize, beta_min: usize) -> usize {
    let denom = alpha_seg.max(1) as u128 * beta_min.max(1) as u128;
    let n = n as u128;
    if n <= denom {
        return 1;
    }
    // smallest c >= 1 with denom * 2^c >= n
    let mut c = 1usize;
    while denom << c < n {
        c += 1;
    }
    c + 1
}

/// Segment count of every mode, finest first, ending with the trend mode's 1.
pub fn segment_counts(n: usize, alpha_seg: usize, beta_min: usize) -> Vec<usize> {
    let m = mode_count(n, alpha_seg, beta_min);
    let k1 = n / alpha_seg.max(1);
    if m == 1 || k1 < 1 {
        return vec![1];
    }
    let mut counts = Vec::with_capacity(m);
    counts.push(k1);
    for _ in 1..m - 1 {
        let prev = *counts.last().unwrap();
        counts.push((prev / 2).max(beta_min));
    }
    counts.push(1);
    counts
}

/// Index boundaries `[0, .., n]` splitting `n` points into `k` near-equal runs.
///
/// Boundary `i` is `round_half_up(i * n / k)`; duplicates are bumped forward.
pub fn segment_boundaries(n: usize, k: usize) -> Result<Vec<usize>> {
    if k == 0 || n < k + 1 {
        return Err(Error::SegmentTooSmall {
            points: n,
            segments: k,
        });
    }
    let mut b: Vec<usize> = (0..=k).map(|i| (2 * i * n + k) / (2 * k)).collect();
    for i in 1..b.len() {
        if b[i] <= b[i - 1] {
            b[i] = b[i - 1] + 1;
        }
    }
    b[k] = n;
    Ok(b)
}

/// Segment counts and boundaries of every mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeLayout {
    pub n: usize,
    pub alpha_seg: usize,
    pub beta_min: usize,
    /// Segment count per mode after short segments were folded away.
    pub seg_counts: Vec<usize>,
    /// Per mode, `seg_counts[m] + 1` increasing indices from 0 to `n`.
    pub boundaries: Vec<Vec<usize>>,
}

impl ModeLayout {
    /// Builds the layout, guaranteeing every segment has at least `min_points`
    /// samples (and never fewer than 2).
    ///
    /// A mode whose uniform split would produce shorter segments gets fewer,
    /// longer segments instead.
    pub fn new(n: usize, alpha_seg: usize, beta_min: usize, min_points: usize) -> Result<Self> {
        if alpha_seg == 0 || beta_min == 0 {
            return Err(Error::InvalidConfig(
                "alpha_seg and beta_min must be at least 1".into(),
            ));
        }
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        let min_points = min_points.max(2);
        let mut seg_counts = Vec::new();
        let mut boundaries = Vec::new();
        for k in segment_counts(n, alpha_seg, beta_min) {
            let k = k.min(n / min_points).max(1);
            boundaries.push(segment_boundaries(n, k)?);
            seg_counts.push(k);
        }
        Ok(ModeLayout {
            n,
            alpha_seg,
            beta_min,
            seg_counts,
            boundaries,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.seg_counts.len()
    }

    /// Index range of segment `seg` in mode `mode`.
    pub fn segment_range(&self, mode: usize, seg: usize) -> std::ops::Range<usize> {
        let b = &self.boundaries[mode];
        b[seg]..b[seg + 1]
    }
}
