//! Parametric segment models.
//!
//! A [`ModelSpec`] bundles an expression `f(x, p)` with its symbolic
//! derivatives, an optional antiderivative, a continuity rule and the rules
//! for mapping fitted parameters back to physical units. Models come either
//! from the preset catalogue ([`preset`]) or from a user expression
//! ([`parse_model`]).
//!
//! When continuity is active the fixed parameters are replaced by their
//! closed-form solution before differentiation, so Jacobians of the reduced
//! model carry the chain rule through the solver exactly.

mod continuity;
mod guess;
mod presets;

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{antiderivative, parse, Expr, Func, Sym, Tape};
use crate::signal::NormalizationState;

pub use guess::{dominant_sine, dominant_sine_below, GuessRule};
pub use presets::{preset, PRESET_NAMES};

/// Smoothness enforced at segment boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ContinuityOrder {
    #[serde(rename = "none")]
    None,
    C0,
    C1,
}

impl ContinuityOrder {
    pub fn name(self) -> &'static str {
        match self {
            ContinuityOrder::None => "none",
            ContinuityOrder::C0 => "C0",
            ContinuityOrder::C1 => "C1",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuityRule {
    pub order: ContinuityOrder,
    /// Parameter fixed by the value condition (C0 and C1).
    pub value_param: Option<usize>,
    /// Parameter fixed by the slope condition (C1 only).
    pub slope_param: Option<usize>,
}

impl ContinuityRule {
    pub fn none() -> Self {
        ContinuityRule {
            order: ContinuityOrder::None,
            value_param: None,
            slope_param: None,
        }
    }

    pub fn fixed(&self) -> Vec<usize> {
        self.value_param.into_iter().chain(self.slope_param).collect()
    }
}

/// Physical value of a parameter: `p * sigma_y^y * sigma_x^x`, plus `mu_y`
/// when `offset` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnscaleRule {
    pub y: i32,
    pub x: i32,
    #[serde(default)]
    pub offset: bool,
}

impl UnscaleRule {
    pub const fn new(y: i32, x: i32, offset: bool) -> Self {
        UnscaleRule { y, x, offset }
    }

    pub fn apply(&self, p: f64, state: &NormalizationState) -> f64 {
        let v = p * state.sigma_y.powi(self.y) * state.sigma_x.powi(self.x);
        if self.offset {
            v + state.mu_y
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamSpace {
    Normalized,
    Physical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub space: ParamSpace,
}

/// Options for [`parse_model`]; also used to adjust presets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelOptions {
    pub fixed_value_param: Option<String>,
    pub fixed_slope_param: Option<String>,
    /// Lowers the continuity order implied by the fixed parameters.
    pub continuity: Option<ContinuityOrder>,
    pub initial_guess: Option<Vec<f64>>,
    pub bounds: BTreeMap<String, (f64, f64)>,
    pub unscale: BTreeMap<String, UnscaleRule>,
}

/// Compiled evaluation of `f` and its gradients.
#[derive(Debug)]
struct Kernel {
    free: Vec<usize>,
    /// Outputs: `f`, `df/dp_j` for each free `j`, `df/dv`, `df/ds`.
    tape: Tape,
    /// The same block for `f`, followed by the same block for `df/dx`.
    exit: Tape,
    /// Fixed parameter indices and a tape with outputs `det`, then one
    /// solution per fixed parameter.
    solver: Option<(Vec<usize>, Tape)>,
}

impl Kernel {
    fn build(f: &Expr, n: usize, sol: Option<continuity::Solution>) -> Kernel {
        let (f_red, solver) = match sol {
            Some(sol) => {
                let fixed = sol.fixed.clone();
                let f_red = f.map_syms(&|s| match s {
                    Sym::Param(i) => fixed
                        .iter()
                        .position(|&q| q == i)
                        .map(|k| sol.exprs[k].clone()),
                    _ => None,
                });
                let mut outs = vec![sol.det.clone()];
                outs.extend(sol.exprs.iter().cloned());
                (f_red, Some((sol.fixed, Tape::compile(&outs))))
            }
            None => (f.clone(), None),
        };
        let fixed = solver.as_ref().map(|s| s.0.clone()).unwrap_or_default();
        let free: Vec<usize> = (0..n).filter(|i| !fixed.contains(i)).collect();
        let block = |e: &Expr| {
            let mut v = vec![e.clone()];
            v.extend(free.iter().map(|&j| e.derivative(Sym::Param(j))));
            v.push(e.derivative(Sym::TargetValue));
            v.push(e.derivative(Sym::TargetSlope));
            v
        };
        let value = block(&f_red);
        let mut exit = value.clone();
        exit.extend(block(&f_red.derivative(Sym::X)));
        Kernel {
            free,
            tape: Tape::compile(&value),
            exit: Tape::compile(&exit),
            solver,
        }
    }
}

/// Value and slope at a point together with their gradients over the free
/// parameters followed by the two continuity targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitState {
    pub value: f64,
    pub slope: f64,
    pub d_value: Vec<f64>,
    pub d_slope: Vec<f64>,
}

#[derive(Debug)]
struct Kernels {
    unconstrained: Kernel,
    constrained: Option<Kernel>,
    /// Outputs: `f`, `df/dx`.
    value_slope: Tape,
}

/// A parametric model with everything the fitter and the calculus layer need.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub param_names: Vec<String>,
    pub expr: Expr,
    pub d_expr: Expr,
    pub antideriv_expr: Option<Expr>,
    pub param_grads: Vec<Expr>,
    pub continuity: ContinuityRule,
    pub guess: GuessRule,
    /// Per-parameter `[lo, hi]`; unbounded parameters hold infinities.
    pub bounds: Vec<(f64, f64)>,
    pub unscale: Option<Vec<UnscaleRule>>,
    kernels: Arc<Kernels>,
}

fn validate_names(names: &[String]) -> Result<()> {
    if names.is_empty() {
        return Err(Error::InvalidConfig("a model needs at least one parameter".into()));
    }
    for (i, n) in names.iter().enumerate() {
        let ident = n.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
            && n.chars().all(|c| c.is_alphanumeric() || c == '_');
        if !ident || n == "x" || n == "pi" || Func::from_name(n).is_some() {
            return Err(Error::InvalidConfig(format!("`{n}` is not a valid parameter name")));
        }
        if names[..i].contains(n) {
            return Err(Error::InvalidConfig(format!("duplicate parameter `{n}`")));
        }
    }
    Ok(())
}

impl ModelSpec {
    /// Assembles a model; continuity solvers and tapes are derived here.
    pub fn from_parts(
        name: &str,
        param_names: Vec<String>,
        expr: Expr,
        continuity: ContinuityRule,
        guess: GuessRule,
        unscale: Option<Vec<UnscaleRule>>,
    ) -> Result<ModelSpec> {
        validate_names(&param_names)?;
        let n = param_names.len();
        let sol = match (continuity.order, continuity.value_param, continuity.slope_param) {
            (ContinuityOrder::None, _, _) => None,
            (ContinuityOrder::C0, Some(pv), _) => {
                Some(continuity::derive(&expr, &param_names, pv, None)?)
            }
            (ContinuityOrder::C1, Some(pv), Some(ps)) => {
                Some(continuity::derive(&expr, &param_names, pv, Some(ps))?)
            }
            (order, _, _) => {
                return Err(Error::InvalidConfig(format!(
                    "{} continuity needs its fixed parameters",
                    order.name()
                )))
            }
        };
        let continuity = match continuity.order {
            ContinuityOrder::None => ContinuityRule::none(),
            ContinuityOrder::C0 => ContinuityRule {
                slope_param: None,
                ..continuity
            },
            ContinuityOrder::C1 => continuity,
        };
        let d_expr = expr.derivative(Sym::X);
        let kernels = Kernels {
            unconstrained: Kernel::build(&expr, n, None),
            constrained: sol.map(|s| Kernel::build(&expr, n, Some(s))),
            value_slope: Tape::compile(&[expr.clone(), d_expr.clone()]),
        };
        Ok(ModelSpec {
            name: name.to_string(),
            antideriv_expr: antiderivative(&expr),
            param_grads: (0..n).map(|j| expr.derivative(Sym::Param(j))).collect(),
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            param_names,
            expr,
            d_expr,
            continuity,
            guess,
            unscale,
            kernels: Arc::new(kernels),
        })
    }

    pub fn n_params(&self) -> usize {
        self.param_names.len()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.param_names.iter().position(|n| n == name)
    }

    fn index_or_err(&self, name: &str) -> Result<usize> {
        self.param_index(name).ok_or_else(|| {
            Error::InvalidConfig(format!("model `{}` has no parameter `{name}`", self.name))
        })
    }

    /// True when segments after the first are constrained by continuity.
    pub fn has_continuity(&self) -> bool {
        self.kernels.constrained.is_some()
    }

    fn kernel(&self, constrained: bool) -> &Kernel {
        match (&self.kernels.constrained, constrained) {
            (Some(k), true) => k,
            _ => &self.kernels.unconstrained,
        }
    }

    /// Indices of the parameters the optimizer varies.
    pub fn free_params(&self, constrained: bool) -> &[usize] {
        &self.kernel(constrained).free
    }

    pub fn has_bounds(&self) -> bool {
        self.bounds.iter().any(|b| b.0.is_finite() || b.1.is_finite())
    }

    /// Returns a copy with per-parameter bounds. Continuity-fixed parameters
    /// cannot be bounded.
    pub fn with_bounds(mut self, bounds: &BTreeMap<String, (f64, f64)>) -> Result<ModelSpec> {
        let fixed = self.continuity.fixed();
        for (name, &(lo, hi)) in bounds {
            let i = self.index_or_err(name)?;
            if fixed.contains(&i) {
                return Err(Error::InvalidConfig(format!(
                    "`{name}` is fixed by continuity and cannot be bounded"
                )));
            }
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidConfig(format!("empty bounds for `{name}`")));
            }
            self.bounds[i] = (lo, hi);
        }
        Ok(self)
    }

    /// Returns a copy with a lower (or equal) continuity order.
    pub fn with_continuity(self, order: ContinuityOrder) -> Result<ModelSpec> {
        if order == self.continuity.order {
            return Ok(self);
        }
        let rule = match order {
            ContinuityOrder::None => ContinuityRule::none(),
            ContinuityOrder::C0 if self.continuity.value_param.is_some() => ContinuityRule {
                order,
                value_param: self.continuity.value_param,
                slope_param: None,
            },
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "model `{}` does not define parameters for {} continuity",
                    self.name,
                    order.name()
                )))
            }
        };
        let bounds = self.bounds.clone();
        let mut m = ModelSpec::from_parts(
            &self.name,
            self.param_names,
            self.expr,
            rule,
            self.guess,
            self.unscale,
        )?;
        m.bounds = bounds;
        Ok(m)
    }

    /// Evaluates `f` at each `x`.
    pub fn evaluate(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let tape = &self.kernels.value_slope;
        let mut buf = Vec::new();
        tape.prepare(params, (0.0, 0.0), &mut buf);
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                tape.eval_at(xi, &mut buf);
                let v = tape.output(0, &buf);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::EvalDomainError { index: i })
                }
            })
            .collect()
    }

    /// `(f(x), f'(x))` at a single point.
    pub fn value_and_slope(&self, params: &[f64], x: f64) -> (f64, f64) {
        let v = self.kernels.value_slope.eval(x, params, (0.0, 0.0));
        (v[0], v[1])
    }

    /// Fills `f` with model values and, when given, `grad` with `df/dp` over
    /// the free parameters of the model the optimizer sees: the reduced model
    /// when `targets` is set and continuity is active, the full one otherwise.
    /// `grad` has one row per point and either one column per free parameter
    /// or two more for `df/dv` and `df/ds`.
    pub fn eval_with_grad(
        &self,
        params: &[f64],
        targets: Option<(f64, f64)>,
        x: &[f64],
        f: &mut [f64],
        mut grad: Option<&mut DMatrix<f64>>,
    ) -> Result<()> {
        let k = self.kernel(targets.is_some());
        let cols = grad.as_ref().map_or(0, |g| g.ncols());
        debug_assert!(grad.is_none() || cols == k.free.len() || cols == k.free.len() + 2);
        let mut buf = Vec::new();
        k.tape.prepare(params, targets.unwrap_or((0.0, 0.0)), &mut buf);
        for (i, &xi) in x.iter().enumerate() {
            k.tape.eval_at(xi, &mut buf);
            let v = k.tape.output(0, &buf);
            if !v.is_finite() {
                return Err(Error::EvalDomainError { index: i });
            }
            f[i] = v;
            if let Some(g) = grad.as_deref_mut() {
                for j in 0..cols {
                    g[(i, j)] = k.tape.output(1 + j, &buf);
                }
            }
        }
        Ok(())
    }

    /// Value and slope at `x` with gradients, for chaining continuity
    /// through consecutive segments.
    pub fn exit_state(&self, params: &[f64], targets: Option<(f64, f64)>, x: f64) -> ExitState {
        let k = self.kernel(targets.is_some());
        let out = k.exit.eval(x, params, targets.unwrap_or((0.0, 0.0)));
        let w = k.free.len() + 3;
        ExitState {
            value: out[0],
            slope: out[w],
            d_value: out[1..w].to_vec(),
            d_slope: out[w + 1..].to_vec(),
        }
    }

    /// Residual Jacobian `J_ij = -df(x_i)/dp_j` over the free parameters.
    pub fn jacobian(
        &self,
        params: &[f64],
        x: &[f64],
        targets: Option<(f64, f64)>,
    ) -> Result<DMatrix<f64>> {
        let nf = self.free_params(targets.is_some()).len();
        let mut g = DMatrix::zeros(x.len(), nf);
        let mut f = vec![0.0; x.len()];
        self.eval_with_grad(params, targets, x, &mut f, Some(&mut g))?;
        Ok(-g)
    }

    /// Overwrites the continuity-fixed entries of `params` so that the model
    /// starts at value `v` with slope `s`.
    pub fn solve_continuity(&self, params: &mut [f64], v: f64, s: f64) -> Result<()> {
        let Some((fixed, tape)) = self.kernels.constrained.as_ref().and_then(|k| k.solver.as_ref())
        else {
            return Ok(());
        };
        let out = tape.eval(0.0, params, (v, s));
        if !(out[0].is_finite() && out[0] != 0.0) {
            return Err(Error::ContinuitySingular);
        }
        for (k, &i) in fixed.iter().enumerate() {
            if !out[1 + k].is_finite() {
                return Err(Error::ContinuitySingular);
            }
            params[i] = out[1 + k];
        }
        Ok(())
    }

    /// Index of the oscillation frequency and the highest harmonic it
    /// drives, for the sine and Fourier families.
    pub fn frequency(&self) -> Option<(usize, f64)> {
        match &self.guess {
            GuessRule::Sine { frequency, .. } => Some((*frequency, 1.0)),
            GuessRule::Fourier {
                frequency, amplitudes, ..
            } => Some((*frequency, amplitudes.len().max(1) as f64)),
            _ => None,
        }
    }

    /// Default initial guess for one segment, clamped to the bounds.
    pub fn initial_guess(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut p = self.guess.guess(self.n_params(), x, y);
        for (v, &(lo, hi)) in p.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
        p
    }

    fn derived(&self, name: String, expr: Expr) -> Result<ModelSpec> {
        ModelSpec::from_parts(
            &name,
            self.param_names.clone(),
            expr,
            ContinuityRule::none(),
            GuessRule::Fixed(vec![0.0; self.n_params()]),
            self.unscale.clone(),
        )
    }

    /// Model of the `n`-th derivative in `x`, sharing the parameter vector.
    pub fn derivative_model(&self, n: usize) -> Result<ModelSpec> {
        self.derived(format!("d{n}({})", self.name), self.expr.nth_derivative(n))
    }

    /// Model of the antiderivative in `x`, sharing the parameter vector.
    pub fn antiderivative_model(&self) -> Result<ModelSpec> {
        let e = self.antideriv_expr.clone().ok_or(Error::NoClosedFormIntegral)?;
        self.derived(format!("int({})", self.name), e)
    }

    /// Maps normalized parameters to physical units. Without unscale rules
    /// the input is returned unchanged and tagged as normalized.
    pub fn unscale_params(&self, params: &[f64], state: &NormalizationState) -> ParamVector {
        match &self.unscale {
            Some(rules) => ParamVector {
                values: params
                    .iter()
                    .zip(rules)
                    .map(|(&p, r)| r.apply(p, state))
                    .collect(),
                space: ParamSpace::Physical,
            },
            None => ParamVector {
                values: params.to_vec(),
                space: ParamSpace::Normalized,
            },
        }
    }
}

/// Builds a model from a user expression in `x` and the named parameters.
pub fn parse_model(
    name: &str,
    expression: &str,
    param_names: &[String],
    options: &ModelOptions,
) -> Result<ModelSpec> {
    validate_names(param_names)?;
    let expr = parse(expression, param_names)?;
    let index = |n: &Option<String>| -> Result<Option<usize>> {
        match n {
            None => Ok(None),
            Some(n) => param_names
                .iter()
                .position(|p| p == n)
                .map(Some)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown fixed parameter `{n}`"))),
        }
    };
    let pv = index(&options.fixed_value_param)?;
    let ps = index(&options.fixed_slope_param)?;
    let implied = match (pv, ps) {
        (Some(_), Some(_)) => ContinuityOrder::C1,
        (Some(_), None) => ContinuityOrder::C0,
        (None, Some(_)) => {
            return Err(Error::InvalidConfig(
                "a slope parameter requires a value parameter".into(),
            ))
        }
        (None, None) => ContinuityOrder::None,
    };
    let guess = match &options.initial_guess {
        Some(g) if g.len() != param_names.len() => {
            return Err(Error::InvalidConfig(format!(
                "initial guess has {} values for {} parameters",
                g.len(),
                param_names.len()
            )))
        }
        Some(g) => GuessRule::Fixed(g.clone()),
        None => GuessRule::Fixed(vec![0.0; param_names.len()]),
    };
    let unscale = if options.unscale.is_empty() {
        None
    } else {
        let mut rules = Vec::with_capacity(param_names.len());
        for n in param_names {
            match options.unscale.get(n) {
                Some(r) => rules.push(*r),
                None => {
                    return Err(Error::InvalidConfig(format!("missing unscale rule for `{n}`")))
                }
            }
        }
        if let Some(extra) = options.unscale.keys().find(|k| !param_names.contains(k)) {
            return Err(Error::InvalidConfig(format!("unscale rule for unknown `{extra}`")));
        }
        Some(rules)
    };
    let rule = ContinuityRule {
        order: implied,
        value_param: pv,
        slope_param: ps,
    };
    let m = ModelSpec::from_parts(name, param_names.to_vec(), expr, rule, guess, unscale)?;
    let m = match options.continuity {
        Some(order) => m.with_continuity(order)?,
        None => m,
    };
    m.with_bounds(&options.bounds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn parse_model_builds_derivatives() {
        let m = parse_model(
            "custom",
            "a*x^3 + b*x^2 + c*x + d",
            &names(&["a", "b", "c", "d"]),
            &ModelOptions {
                fixed_value_param: Some("d".into()),
                fixed_slope_param: Some("c".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.d_expr.render(&m.param_names).to_string(), "3*a*x^2 + 2*b*x + c");
        assert_eq!(m.continuity.order, ContinuityOrder::C1);
        assert_eq!(m.free_params(true), &[0, 1]);
        assert_eq!(m.free_params(false), &[0, 1, 2, 3]);
        assert!(m.antideriv_expr.is_some());
    }

    #[test]
    fn option_errors() {
        let n = names(&["a", "b"]);
        let bad_fixed = ModelOptions {
            fixed_value_param: Some("z".into()),
            ..Default::default()
        };
        assert!(matches!(parse_model("m", "a*x + b", &n, &bad_fixed), Err(Error::InvalidConfig(_))));
        let bounded_fixed = ModelOptions {
            fixed_value_param: Some("b".into()),
            bounds: [("b".to_string(), (0.0, 1.0))].into(),
            ..Default::default()
        };
        assert!(matches!(
            parse_model("m", "a*x + b", &n, &bounded_fixed),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            parse_model("m", "a*x + b", &names(&["a", "a"]), &ModelOptions::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            parse_model("m", "a*x + q", &n, &ModelOptions::default()),
            Err(Error::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn evaluate_reports_domain_errors() {
        let m = parse_model("m", "log(x - a)", &names(&["a"]), &ModelOptions::default()).unwrap();
        assert_eq!(m.evaluate(&[0.5], &[1.0, 2.0, 0.0]), Err(Error::EvalDomainError { index: 2 }));
    }

    #[test]
    fn lowering_continuity_frees_parameters() {
        let m = preset("cubic").unwrap();
        let c0 = m.clone().with_continuity(ContinuityOrder::C0).unwrap();
        assert_eq!(c0.free_params(true), &[0, 1, 2]);
        let none = m.with_continuity(ContinuityOrder::None).unwrap();
        assert!(!none.has_continuity());
        assert!(preset("gaussian").unwrap().with_continuity(ContinuityOrder::C1).is_err());
    }
}
