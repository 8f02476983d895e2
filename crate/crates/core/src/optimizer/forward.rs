//! Overlapping forward fit.
//!
//! Segments of a mode are fitted left to right in batches of `s` kept
//! segments plus one overlap segment. Each segment after the first starts at
//! the value and slope where its predecessor ends, and a batch is solved as
//! one problem. The overlap segment's fit is discarded and only seeds the
//! first segment of the next batch.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::lm::{Chain, Link};
use super::{LMConfig, SegmentFit, SegmentFlags, Termination};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamSpace, ParamVector};

/// All segment fits of one mode, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeFit {
    pub boundaries: Vec<usize>,
    pub segments: Vec<SegmentFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutput {
    /// Fits kept from this batch.
    pub kept: Vec<SegmentFit>,
    /// Parameters of the discarded overlap segment, used as the next
    /// batch's first guess.
    pub carry: Option<Vec<f64>>,
}

/// Local origin of segment `seg`: its own first sample for the first segment
/// of a mode, otherwise the last sample of the previous segment. Every
/// segment after the first therefore starts exactly where its predecessor's
/// data end.
pub fn segment_anchor(x: &[f64], boundaries: &[usize], seg: usize) -> f64 {
    let lo = boundaries[seg];
    if seg == 0 {
        x[lo]
    } else {
        x[lo - 1]
    }
}

/// Keeps the guesses and only enforces continuity along the chain.
fn forced_chain(
    model: &ModelSpec,
    links: &[Link<'_>],
    entry: Option<(f64, f64)>,
    p0: Vec<Vec<f64>>,
) -> Result<Vec<SegmentFit>> {
    let mut prev = entry;
    let mut out = Vec::with_capacity(links.len());
    for (link, mut p) in links.iter().zip(p0) {
        let t = if link.constrained { prev } else { None };
        if let Some((v, s)) = t {
            model.solve_continuity(&mut p, v, s)?;
        }
        let f = model.evaluate(&p, &link.x)?;
        let loss = link.y.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum();
        let exit = model.value_and_slope(&p, link.x[link.x.len() - 1]);
        prev = Some(exit);
        out.push(SegmentFit {
            model: model.name.clone(),
            range: (0, link.x.len()),
            params: ParamVector {
                values: p,
                space: ParamSpace::Normalized,
            },
            free: model.free_params(link.constrained).to_vec(),
            loss,
            srmse: None,
            exit,
            iterations: 0,
            termination: Termination::MaxIters,
            flags: SegmentFlags {
                forced: true,
                ..Default::default()
            },
        });
    }
    Ok(out)
}

/// Iterations spent per segment on the sequential warm start.
const WARM_ITERS: usize = 20;

/// Replaces the guesses with short single-segment fits, each started from
/// its predecessor's exit state. Chaining raw guesses through continuity
/// compounds their slopes and can start the joint solve astronomically far
/// from the data.
fn warm_start(chain: &Chain<'_>, guesses: &mut [Vec<f64>], cfg: &LMConfig) {
    let cfg = LMConfig {
        max_iters: cfg.max_iters.min(WARM_ITERS),
        ..cfg.clone()
    };
    let model = chain.model;
    let mut prev = chain.entry;
    for (link, guess) in chain.links.iter().zip(guesses.iter_mut()) {
        let t = if link.constrained { prev } else { None };
        let one = Chain {
            model,
            links: vec![Link {
                x: link.x.clone(),
                y: link.y,
                constrained: link.constrained,
            }],
            entry: t,
            bounded: chain.bounded,
        };
        match one.fit(std::slice::from_ref(guess), &cfg) {
            Ok((mut fits, _)) => {
                let fit = fits.remove(0);
                prev = Some(fit.exit);
                *guess = fit.params.values;
            }
            Err(_) => {
                let mut p = guess.clone();
                let solved = match t {
                    Some((v, s)) => model.solve_continuity(&mut p, v, s).is_ok(),
                    None => true,
                };
                if !solved {
                    return;
                }
                prev = Some(model.value_and_slope(&p, link.x[link.x.len() - 1]));
            }
        }
    }
}

/// Fits the segments `segs` of one mode jointly, keeping the first `keep`
/// fits. `entry` is the exit state of the segment before `segs.start`
/// (absent for the mode's first segment) and `first_guess` seeds the first
/// segment. Fits beyond `keep` are discarded; the first of them is returned
/// as the carry.
#[allow(clippy::too_many_arguments)]
pub fn fit_batch(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    boundaries: &[usize],
    segs: Range<usize>,
    entry: Option<(f64, f64)>,
    first_guess: Option<&[f64]>,
    keep: usize,
    cfg: &LMConfig,
) -> Result<BatchOutput> {
    let mut links = Vec::with_capacity(segs.len());
    for seg in segs.clone() {
        let (lo, hi) = (boundaries[seg], boundaries[seg + 1]);
        if hi <= lo {
            return Err(Error::EmptySegment);
        }
        let anchor = segment_anchor(x, boundaries, seg);
        links.push(Link {
            x: x[lo..hi].iter().map(|&v| v - anchor).collect(),
            y: &y[lo..hi],
            constrained: seg > 0 && model.has_continuity(),
        });
    }
    let entry = if segs.start == 0 { None } else { entry };
    if links.first().is_some_and(|l| l.constrained) && entry.is_none() {
        return Err(Error::InvalidConfig("batch needs an entry state".into()));
    }
    let defaults: Vec<Vec<f64>> = links.iter().map(|l| model.initial_guess(&l.x, l.y)).collect();
    let mut seeded = defaults.clone();
    if let (Some(g), Some(first)) = (first_guess, seeded.first_mut()) {
        *first = g.to_vec();
    }
    let chain = Chain {
        model,
        links,
        entry,
        bounded: model.has_bounds(),
    };
    warm_start(&chain, &mut seeded, cfg);
    let result = match chain.fit(&seeded, cfg) {
        Err(Error::BadInitialGuess) if first_guess.is_some() => chain.fit(&defaults, cfg),
        other => other,
    };
    let mut fits = match result {
        Ok((fits, _)) => fits,
        Err(Error::BadInitialGuess) => {
            let zeros = vec![vec![0.0; model.n_params()]; chain.links.len()];
            match chain.fit(&zeros, cfg) {
                Ok((fits, _)) => fits,
                Err(_) => forced_chain(model, &chain.links, entry, seeded)?,
            }
        }
        Err(Error::SolveFailed(_)) => forced_chain(model, &chain.links, entry, seeded)?,
        Err(e) => return Err(e),
    };
    for (fit, seg) in fits.iter_mut().zip(segs) {
        fit.range = (boundaries[seg], boundaries[seg + 1]);
    }
    let carry = fits.get(keep).map(|f| f.params.values.clone());
    fits.truncate(keep);
    Ok(BatchOutput { kept: fits, carry })
}

/// Fits every segment of a mode with the overlapping forward fit.
pub fn fit_mode(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    boundaries: &[usize],
    cfg: &LMConfig,
) -> Result<ModeFit> {
    cfg.validate()?;
    let k = boundaries.len().saturating_sub(1);
    let s = cfg.batch_size;
    let mut segments = Vec::with_capacity(k);
    let mut entry = None;
    let mut carry: Option<Vec<f64>> = None;
    let mut start = 0;
    while start < k {
        let last = start + s >= k;
        let end = (start + s + 1).min(k);
        let keep = if last { end - start } else { s };
        let out = fit_batch(
            model,
            x,
            y,
            boundaries,
            start..end,
            entry,
            carry.as_deref(),
            keep,
            cfg,
        )?;
        entry = out.kept.last().map(|f| f.exit);
        carry = out.carry;
        segments.extend(out.kept);
        start += keep;
    }
    Ok(ModeFit {
        boundaries: boundaries.to_vec(),
        segments,
    })
}

/// Single unconstrained fit over the whole range.
pub fn fit_trend(model: &ModelSpec, x: &[f64], y: &[f64], cfg: &LMConfig) -> Result<SegmentFit> {
    let mut m = fit_mode(model, x, y, &[0, x.len()], cfg)?;
    Ok(m.segments.remove(0))
}
