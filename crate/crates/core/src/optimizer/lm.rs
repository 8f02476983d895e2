//! Damped Gauss-Newton (Levenberg-Marquardt) with a static ridge term.
//!
//! The engine fits a chain of consecutive segments jointly. Each segment
//! after the first starts at the value and slope where its predecessor ends,
//! so its fixed parameters depend on the free parameters of every earlier
//! segment; the Jacobian carries that dependence down the chain. A single
//! segment is a chain of length one.
//!
//! Frequencies of oscillating models are held to at least
//! [`MIN_SAMPLES_PER_PERIOD`] samples per period of their highest harmonic.
//! At the sampling limit a sine vanishes on every sample while its amplitude
//! still sets the exit slope, which lets a chain pass arbitrary slopes down
//! to later segments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LMConfig, SegmentFit, SegmentFlags};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, ParamSpace, ParamVector};

pub const MIN_SAMPLES_PER_PERIOD: f64 = 3.0;

/// Largest admissible angular frequency on samples `x`.
fn frequency_cap(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let spacing = (x[n - 1] - x[0]) / (n - 1) as f64;
    if spacing > 0.0 {
        2.0 * std::f64::consts::PI / (MIN_SAMPLES_PER_PERIOD * spacing)
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    LossTol,
    StepTol,
    MaxIters,
    LambdaOverflow,
    RejectionCap,
    /// Every parameter is fixed by continuity; nothing to optimize.
    NoFreeParams,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::LossTol | Termination::StepTol | Termination::NoFreeParams
        )
    }
}

/// One attempted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LMStep {
    pub iteration: usize,
    /// Loss after the step if accepted, otherwise the trial loss.
    pub loss: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub accepted: bool,
    /// `|A dp - rhs| / |rhs|` of the damped normal equations.
    pub solve_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMTrace {
    pub initial_loss: f64,
    pub steps: Vec<LMStep>,
    pub termination: Termination,
}

impl LMTrace {
    pub fn iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iteration + 1).max().unwrap_or(0)
    }
}

/// One segment of a chain, in segment-local coordinates.
pub(crate) struct Link<'a> {
    pub x: Vec<f64>,
    pub y: &'a [f64],
    /// The segment starts at the previous exit state (the chain's entry
    /// state for the first link).
    pub constrained: bool,
}

pub(crate) struct Chain<'a> {
    pub model: &'a ModelSpec,
    pub links: Vec<Link<'a>>,
    pub entry: Option<(f64, f64)>,
    pub bounded: bool,
}

struct Settled {
    loss: f64,
    losses: Vec<f64>,
    targets: Vec<Option<(f64, f64)>>,
    exits: Vec<(f64, f64)>,
}

impl Chain<'_> {
    fn free(&self, j: usize) -> &[usize] {
        self.model.free_params(self.links[j].constrained)
    }

    /// Completes each link's parameters (bounds, continuity) in order and
    /// evaluates the loss.
    fn settle(&self, params: &mut [Vec<f64>], f: &mut [f64]) -> Result<Settled> {
        let n = self.links.len();
        let mut out = Settled {
            loss: 0.0,
            losses: Vec::with_capacity(n),
            targets: Vec::with_capacity(n),
            exits: Vec::with_capacity(n),
        };
        let mut prev = self.entry;
        for (j, link) in self.links.iter().enumerate() {
            let p = &mut params[j];
            if self.bounded {
                for &i in self.free(j) {
                    let (lo, hi) = self.model.bounds[i];
                    p[i] = p[i].clamp(lo, hi);
                }
            }
            if let Some((i, harmonics)) = self.model.frequency() {
                let cap = frequency_cap(&link.x) / harmonics;
                p[i] = p[i].clamp(-cap, cap);
            }
            let t = if link.constrained { prev } else { None };
            if let Some((v, s)) = t {
                self.model.solve_continuity(p, v, s)?;
            }
            let fj = &mut f[..link.x.len()];
            self.model.eval_with_grad(p, t, &link.x, fj, None)?;
            let l: f64 = link.y.iter().zip(fj.iter()).map(|(y, f)| (y - f) * (y - f)).sum();
            let exit = self.model.value_and_slope(p, link.x[link.x.len() - 1]);
            if !(l.is_finite() && exit.0.is_finite() && exit.1.is_finite()) {
                return Err(Error::EvalDomainError { index: 0 });
            }
            out.loss += l;
            out.losses.push(l);
            out.targets.push(t);
            out.exits.push(exit);
            prev = Some(exit);
        }
        Ok(out)
    }

    /// Fills residuals `y - f` and `g = df/dtheta` over the stacked free
    /// parameters.
    fn linearize(
        &self,
        params: &[Vec<f64>],
        st: &Settled,
        cols: &[usize],
        r: &mut DVector<f64>,
        g: &mut DMatrix<f64>,
    ) -> Result<()> {
        let total = g.ncols();
        g.fill(0.0);
        // derivatives of the current link's (v, s) targets
        let mut dv = vec![0.0; total];
        let mut ds = vec![0.0; total];
        let mut row = 0;
        for (j, link) in self.links.iter().enumerate() {
            let m = self.free(j).len();
            let t = st.targets[j];
            let extra = if t.is_some() { 2 } else { 0 };
            let mut local = DMatrix::zeros(link.x.len(), m + extra);
            let mut f = vec![0.0; link.x.len()];
            self.model
                .eval_with_grad(&params[j], t, &link.x, &mut f, Some(&mut local))?;
            for i in 0..link.x.len() {
                r[row + i] = link.y[i] - f[i];
                for k in 0..m {
                    g[(row + i, cols[j] + k)] = local[(i, k)];
                }
                if t.is_some() {
                    let (gv, gs) = (local[(i, m)], local[(i, m + 1)]);
                    for c in 0..cols[j] {
                        g[(row + i, c)] += gv * dv[c] + gs * ds[c];
                    }
                }
            }
            row += link.x.len();
            if j + 1 == self.links.len() {
                break;
            }
            let e = self.model.exit_state(&params[j], t, link.x[link.x.len() - 1]);
            let mut nv = vec![0.0; total];
            let mut ns = vec![0.0; total];
            for k in 0..m {
                nv[cols[j] + k] = e.d_value[k];
                ns[cols[j] + k] = e.d_slope[k];
            }
            if t.is_some() {
                for c in 0..cols[j] {
                    nv[c] += e.d_value[m] * dv[c] + e.d_value[m + 1] * ds[c];
                    ns[c] += e.d_slope[m] * dv[c] + e.d_slope[m + 1] * ds[c];
                }
            }
            dv = nv;
            ds = ns;
        }
        Ok(())
    }

    fn theta_norm(&self, p: &[Vec<f64>]) -> f64 {
        (0..self.links.len())
            .flat_map(|j| self.free(j).iter().map(move |&i| p[j][i] * p[j][i]))
            .sum::<f64>()
            .sqrt()
    }

    fn step_norm(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
        (0..self.links.len())
            .flat_map(|j| self.free(j).iter().map(move |&i| (a[j][i] - b[j][i]).powi(2)))
            .sum::<f64>()
            .sqrt()
    }

    /// Runs LM from `p0`, one full parameter vector per link.
    pub fn fit(&self, p0: &[Vec<f64>], cfg: &LMConfig) -> Result<(Vec<SegmentFit>, LMTrace)> {
        if self.links.iter().any(|l| l.x.is_empty()) {
            return Err(Error::EmptySegment);
        }
        let n_links = self.links.len();
        let mut cols = Vec::with_capacity(n_links);
        let mut total = 0;
        for j in 0..n_links {
            cols.push(total);
            total += self.free(j).len();
        }
        let rows: usize = self.links.iter().map(|l| l.x.len()).sum();
        let max_len = self.links.iter().map(|l| l.x.len()).max().unwrap_or(0);

        let mut p = p0.to_vec();
        let clamped = self.bounded
            && (0..n_links).any(|j| {
                self.free(j).iter().any(|&i| {
                    let (lo, hi) = self.model.bounds[i];
                    p[j][i] < lo || p[j][i] > hi
                })
            });
        let mut f = vec![0.0; max_len];
        let mut st = match self.settle(&mut p, &mut f) {
            Ok(s) => s,
            Err(Error::EvalDomainError { .. }) => return Err(Error::BadInitialGuess),
            Err(e) => return Err(e),
        };
        let mut trace = LMTrace {
            initial_loss: st.loss,
            steps: Vec::new(),
            termination: if total == 0 {
                Termination::NoFreeParams
            } else {
                Termination::MaxIters
            },
        };
        let mut lambda = cfg.lambda0;
        let mut g = DMatrix::zeros(rows, total);
        let mut r = DVector::zeros(rows);
        let iters = if total == 0 { 0 } else { cfg.max_iters };
        'outer: for iter in 0..iters {
            self.linearize(&p, &st, &cols, &mut r, &mut g)?;
            // J = -g, so -J^T r = g^T r
            let rhs = g.tr_mul(&r);
            let jtj = g.tr_mul(&g);
            let rhs_norm = rhs.norm();
            let p_norm = self.theta_norm(&p);
            let mut rejections = 0;
            let mut solved_once = false;
            loop {
                if lambda > cfg.lambda_max {
                    if !solved_once {
                        return Err(Error::SolveFailed(
                            "damped normal equations stayed singular".into(),
                        ));
                    }
                    trace.termination = Termination::LambdaOverflow;
                    break 'outer;
                }
                let mut a = jtj.clone();
                for d in 0..total {
                    a[(d, d)] += lambda + cfg.ridge_alpha;
                }
                let Some(dp) = solve(&a, &rhs) else {
                    lambda *= cfg.lambda_up;
                    rejections += 1;
                    continue;
                };
                solved_once = true;
                let solve_residual = if rhs_norm > 0.0 {
                    (&a * &dp - &rhs).norm() / rhs_norm
                } else {
                    0.0
                };
                let mut trial = p.clone();
                for j in 0..n_links {
                    for (k, &i) in self.free(j).iter().enumerate() {
                        trial[j][i] += dp[cols[j] + k];
                    }
                }
                let trial_st = self.settle(&mut trial, &mut f).ok();
                let step_norm = self.step_norm(&p, &trial);
                let delta = trial_st.as_ref().map(|t| st.loss - t.loss);
                let accepted = delta.is_some_and(|d| d > 0.0);
                trace.steps.push(LMStep {
                    iteration: iter,
                    loss: trial_st.as_ref().map_or(f64::INFINITY, |t| t.loss),
                    lambda,
                    step_norm,
                    accepted,
                    solve_residual,
                });
                // a flat loss only counts once the step is small too; near-zero
                // residual problems would otherwise stop far from the minimizer
                let small_step = step_norm <= cfg.step_tol * (1.0 + p_norm);
                let negligible = small_step
                    && delta.is_some_and(|d| d.abs() <= cfg.loss_tol * (1.0 + st.loss));
                if let (true, Some(t)) = (accepted, trial_st) {
                    p = trial;
                    st = t;
                    lambda /= cfg.lambda_down;
                    if negligible {
                        trace.termination = Termination::LossTol;
                        break 'outer;
                    }
                    if small_step {
                        trace.termination = Termination::StepTol;
                        break 'outer;
                    }
                    continue 'outer;
                }
                if negligible {
                    trace.termination = Termination::LossTol;
                    break 'outer;
                }
                lambda *= cfg.lambda_up;
                rejections += 1;
                if rejections >= cfg.max_rejections {
                    trace.termination = Termination::RejectionCap;
                    break 'outer;
                }
            }
        }
        let fits = p
            .into_iter()
            .enumerate()
            .map(|(j, values)| SegmentFit {
                model: self.model.name.clone(),
                range: (0, self.links[j].x.len()),
                params: ParamVector {
                    values,
                    space: ParamSpace::Normalized,
                },
                free: self.free(j).to_vec(),
                loss: st.losses[j],
                srmse: None,
                exit: st.exits[j],
                iterations: trace.iterations(),
                termination: trace.termination,
                flags: SegmentFlags {
                    converged: trace.termination.converged(),
                    forced: self.free(j).is_empty(),
                    flat: false,
                    clamped,
                },
            })
            .collect();
        Ok((fits, trace))
    }
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.clone().cholesky();
    let lu = if chol.is_none() { Some(a.clone().lu()) } else { None };
    let apply = |v: &DVector<f64>| match (&chol, &lu) {
        (Some(c), _) => Some(c.solve(v)),
        (None, Some(l)) => l.solve(v),
        _ => None,
    };
    let raw = apply(b)?;
    // one step of iterative refinement
    let dp = &raw + apply(&(b - a * &raw))?;
    dp.iter().all(|v| v.is_finite()).then_some(dp)
}

fn single(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
    targets: Option<(f64, f64)>,
    cfg: &LMConfig,
    bounded: bool,
) -> Result<(SegmentFit, LMTrace)> {
    let targets = targets.filter(|_| model.has_continuity());
    let chain = Chain {
        model,
        links: vec![Link {
            x: x.to_vec(),
            y,
            constrained: targets.is_some(),
        }],
        entry: targets,
        bounded: bounded && model.has_bounds(),
    };
    let (mut fits, trace) = chain.fit(&[p0.to_vec()], cfg)?;
    Ok((fits.remove(0), trace))
}

/// Residuals and Jacobian of a chain of segments as the joint solver sees
/// them.
#[derive(Debug, Clone)]
pub struct ChainLinearization {
    /// Parameters after continuity has been solved along the chain.
    pub params: Vec<Vec<f64>>,
    /// Free parameter indices per link; Jacobian columns follow this order.
    pub free: Vec<Vec<usize>>,
    /// `y - f` over all links, stacked.
    pub residuals: DVector<f64>,
    /// `df/dtheta`, including the dependence of every link on the free
    /// parameters of the links before it.
    pub jacobian: DMatrix<f64>,
}

/// Linearizes a chain of segments in local coordinates. When the model has
/// continuity rules, link `j > 0` starts at the exit state (last `x`) of link
/// `j - 1`.
pub fn chain_jacobian(
    model: &ModelSpec,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    params: &[Vec<f64>],
) -> Result<ChainLinearization> {
    if xs.len() != ys.len() || xs.len() != params.len() || xs.is_empty() {
        return Err(Error::InvalidConfig("chain needs one x, y and parameter vector per link".into()));
    }
    if xs.iter().zip(ys).any(|(x, y)| x.is_empty() || x.len() != y.len()) {
        return Err(Error::EmptySegment);
    }
    let chain = Chain {
        model,
        links: xs
            .iter()
            .zip(ys)
            .enumerate()
            .map(|(j, (x, y))| Link {
                x: x.clone(),
                y,
                constrained: j > 0 && model.has_continuity(),
            })
            .collect(),
        entry: None,
        bounded: false,
    };
    let mut p = params.to_vec();
    let mut f = vec![0.0; xs.iter().map(Vec::len).max().unwrap_or(0)];
    let st = chain.settle(&mut p, &mut f)?;
    let mut cols = Vec::with_capacity(xs.len());
    let mut total = 0;
    for j in 0..xs.len() {
        cols.push(total);
        total += chain.free(j).len();
    }
    let rows = xs.iter().map(Vec::len).sum();
    let mut r = DVector::zeros(rows);
    let mut g = DMatrix::zeros(rows, total);
    chain.linearize(&p, &st, &cols, &mut r, &mut g)?;
    Ok(ChainLinearization {
        free: (0..xs.len()).map(|j| chain.free(j).to_vec()).collect(),
        params: p,
        residuals: r,
        jacobian: g,
    })
}

/// Fits `model` to `(x, y)` starting from `p0`, a full parameter vector whose
/// continuity-fixed entries are ignored. With `targets = Some((v, s))` and
/// an active continuity rule, fixed parameters are re-solved at every
/// iterate so the fit starts at value `v` with slope `s` at `x = 0`.
///
/// The fit covers `0..x.len()` and its exit state is taken at the last `x`.
pub fn lm_fit(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
    targets: Option<(f64, f64)>,
    cfg: &LMConfig,
) -> Result<(SegmentFit, LMTrace)> {
    single(model, x, y, p0, targets, cfg, false)
}

/// As [`lm_fit`], projecting every trial point onto the model's bounds.
/// A `p0` outside the bounds is clamped and flagged.
pub fn lm_fit_bounded(
    model: &ModelSpec,
    x: &[f64],
    y: &[f64],
    p0: &[f64],
    targets: Option<(f64, f64)>,
    cfg: &LMConfig,
) -> Result<(SegmentFit, LMTrace)> {
    single(model, x, y, p0, targets, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::preset;

    fn chain_values(chain: &Chain<'_>, p: &[Vec<f64>]) -> Vec<f64> {
        let mut p = p.to_vec();
        let mut f = vec![0.0; 64];
        chain.settle(&mut p, &mut f).unwrap();
        let mut out = Vec::new();
        for (j, link) in chain.links.iter().enumerate() {
            out.extend(chain.model.evaluate(&p[j], &link.x).unwrap());
        }
        out
    }

    #[test]
    fn chained_jacobian_matches_finite_differences() {
        for name in ["cubic", "sin6", "decay", "gaussian"] {
            let m = preset(name).unwrap();
            let ys: Vec<Vec<f64>> = (0..3).map(|j| vec![0.1 * j as f64; 12]).collect();
            let links: Vec<Link<'_>> = (0..3)
                .map(|j| Link {
                    x: (1..=12).map(|i| 0.1 * i as f64 + if j == 0 { -0.1 } else { 0.0 }).collect(),
                    y: &ys[j],
                    constrained: j > 0 && m.has_continuity(),
                })
                .collect();
            let chain = Chain {
                model: &m,
                links,
                entry: None,
                bounded: false,
            };
            let p0: Vec<Vec<f64>> = (0..3)
                .map(|j| (0..m.n_params()).map(|i| 0.3 + 0.17 * (i + 2 * j) as f64).collect())
                .collect();
            let mut p = p0.clone();
            let mut f = vec![0.0; 12];
            let st = chain.settle(&mut p, &mut f).unwrap();
            let mut cols = Vec::new();
            let mut total = 0;
            for j in 0..3 {
                cols.push(total);
                total += chain.free(j).len();
            }
            let mut g = DMatrix::zeros(36, total);
            let mut r = DVector::zeros(36);
            chain.linearize(&p, &st, &cols, &mut r, &mut g).unwrap();

            let mut fd = DMatrix::zeros(36, total);
            for j in 0..3 {
                for (k, &i) in chain.free(j).iter().enumerate() {
                    let h = 1e-6 * p[j][i].abs().max(1.0);
                    let (mut up, mut dn) = (p.clone(), p.clone());
                    up[j][i] += h;
                    dn[j][i] -= h;
                    let (a, b) = (chain_values(&chain, &up), chain_values(&chain, &dn));
                    for row in 0..36 {
                        fd[(row, cols[j] + k)] = (a[row] - b[row]) / (2.0 * h);
                    }
                }
            }
            let err = (&g - &fd).norm() / fd.norm();
            assert!(err <= 1e-5, "{name}: {err:e}");
            // later segments do depend on earlier free parameters
            if m.has_continuity() {
                assert!(g.view((24, 0), (12, cols[1])).norm() > 0.0);
            }
        }
    }
}
