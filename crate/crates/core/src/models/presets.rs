//! Built-in model catalogue.

use super::{ContinuityOrder, ContinuityRule, GuessRule, ModelSpec, UnscaleRule};
use crate::error::{Error, Result};
use crate::expr::parse;

pub const PRESET_NAMES: &[&str] = &[
    "linear", "quadratic", "cubic", "sin4", "sin5", "sin6", "sin7", "decay", "gaussian", "logistic",
    "fourier",
];

/// Unscale rule shorthands.
const fn r(y: i32, x: i32) -> UnscaleRule {
    UnscaleRule::new(y, x, false)
}
const OFFSET: UnscaleRule = UnscaleRule::new(1, 0, true);

struct Def {
    expr: &'static str,
    params: &'static [&'static str],
    order: ContinuityOrder,
    value: Option<&'static str>,
    slope: Option<&'static str>,
    unscale: Vec<UnscaleRule>,
    guess: fn(&dyn Fn(&str) -> usize) -> GuessRule,
}

fn def(name: &str) -> Option<Def> {
    use ContinuityOrder::{C0, C1};
    let d = match name {
        "linear" => Def {
            expr: "a*x + b",
            params: &["a", "b"],
            order: C1,
            value: Some("b"),
            slope: Some("a"),
            unscale: vec![r(1, -1), OFFSET],
            guess: |i| GuessRule::Polynomial { offset: i("b") },
        },
        "quadratic" => Def {
            expr: "a*x^2 + b*x + c",
            params: &["a", "b", "c"],
            order: C1,
            value: Some("c"),
            slope: Some("b"),
            unscale: vec![r(1, -2), r(1, -1), OFFSET],
            guess: |i| GuessRule::Polynomial { offset: i("c") },
        },
        "cubic" => Def {
            expr: "a*x^3 + b*x^2 + c*x + d",
            params: &["a", "b", "c", "d"],
            order: C1,
            value: Some("d"),
            slope: Some("c"),
            unscale: vec![r(1, -3), r(1, -2), r(1, -1), OFFSET],
            guess: |i| GuessRule::Polynomial { offset: i("d") },
        },
        "sin4" => Def {
            expr: "A*sin(B*x) + C1*x + C0",
            params: &["A", "B", "C1", "C0"],
            order: C1,
            value: Some("C0"),
            slope: Some("C1"),
            unscale: vec![r(1, 0), r(0, -1), r(1, -1), OFFSET],
            guess: |i| GuessRule::Sine {
                amplitude: i("A"),
                frequency: i("B"),
                phase: None,
                slope: i("C1"),
                offset: i("C0"),
            },
        },
        "sin5" => Def {
            expr: "A*sin(B*x + D) + C1*x + C0",
            params: &["A", "B", "D", "C1", "C0"],
            order: C1,
            value: Some("C0"),
            slope: Some("C1"),
            unscale: vec![r(1, 0), r(0, -1), r(0, 0), r(1, -1), OFFSET],
            guess: |i| GuessRule::Sine {
                amplitude: i("A"),
                frequency: i("B"),
                phase: Some(i("D")),
                slope: i("C1"),
                offset: i("C0"),
            },
        },
        "sin6" => Def {
            expr: "(A1*x + A0)*sin(B0*x + D) + C1*x + C0",
            params: &["A1", "A0", "B0", "D", "C1", "C0"],
            order: C1,
            value: Some("C0"),
            slope: Some("C1"),
            unscale: vec![r(1, -1), r(1, 0), r(0, -1), r(0, 0), r(1, -1), OFFSET],
            guess: |i| GuessRule::Sine {
                amplitude: i("A0"),
                frequency: i("B0"),
                phase: Some(i("D")),
                slope: i("C1"),
                offset: i("C0"),
            },
        },
        "sin7" => Def {
            expr: "(A2*x^2 + A1*x + A0)*sin(B0*x + D) + C1*x + C0",
            params: &["A2", "A1", "A0", "B0", "D", "C1", "C0"],
            order: C1,
            value: Some("C0"),
            slope: Some("C1"),
            unscale: vec![r(1, -2), r(1, -1), r(1, 0), r(0, -1), r(0, 0), r(1, -1), OFFSET],
            guess: |i| GuessRule::Sine {
                amplitude: i("A0"),
                frequency: i("B0"),
                phase: Some(i("D")),
                slope: i("C1"),
                offset: i("C0"),
            },
        },
        "decay" => Def {
            expr: "A*exp(-k*x) + a*x + b",
            params: &["A", "k", "a", "b"],
            order: C1,
            value: Some("b"),
            slope: Some("a"),
            unscale: vec![r(1, 0), r(0, -1), r(1, -1), OFFSET],
            guess: |i| GuessRule::Decay {
                amplitude: i("A"),
                rate: i("k"),
                slope: i("a"),
                offset: i("b"),
            },
        },
        "gaussian" => Def {
            expr: "A*exp(-((x - mu)/w)^2) + b",
            params: &["A", "mu", "w", "b"],
            order: C0,
            value: Some("b"),
            slope: None,
            unscale: vec![r(1, 0), r(0, 1), r(0, 1), OFFSET],
            guess: |i| GuessRule::Gaussian {
                amplitude: i("A"),
                center: i("mu"),
                width: i("w"),
                offset: i("b"),
            },
        },
        "logistic" => Def {
            expr: "L/(1 + exp(-k*(x - x0))) + b",
            params: &["L", "k", "x0", "b"],
            order: C0,
            value: Some("b"),
            slope: None,
            unscale: vec![r(1, 0), r(0, -1), r(0, 1), OFFSET],
            guess: |i| GuessRule::Logistic {
                height: i("L"),
                rate: i("k"),
                midpoint: i("x0"),
                offset: i("b"),
            },
        },
        "fourier" => Def {
            expr: "A1*sin(w*x + phi1) + A2*sin(2*w*x + phi2) + A3*sin(3*w*x + phi3) + a*x + b",
            params: &["A1", "phi1", "A2", "phi2", "A3", "phi3", "w", "a", "b"],
            order: C1,
            value: Some("b"),
            slope: Some("a"),
            unscale: vec![
                r(1, 0),
                r(0, 0),
                r(1, 0),
                r(0, 0),
                r(1, 0),
                r(0, 0),
                r(0, -1),
                r(1, -1),
                OFFSET,
            ],
            guess: |i| GuessRule::Fourier {
                amplitudes: vec![i("A1"), i("A2"), i("A3")],
                phases: vec![i("phi1"), i("phi2"), i("phi3")],
                frequency: i("w"),
                slope: i("a"),
                offset: i("b"),
            },
        },
        _ => return None,
    };
    Some(d)
}

/// Looks up a preset model by name.
pub fn preset(name: &str) -> Result<ModelSpec> {
    let d = def(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    let names: Vec<String> = d.params.iter().map(|s| s.to_string()).collect();
    let index = |p: &str| d.params.iter().position(|n| *n == p).expect("preset parameter");
    let expr = parse(d.expr, &names)?;
    let rule = ContinuityRule {
        order: d.order,
        value_param: d.value.map(index),
        slope_param: d.slope.map(index),
    };
    ModelSpec::from_parts(name, names, expr, rule, (d.guess)(&index), Some(d.unscale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds() {
        for name in PRESET_NAMES {
            let m = preset(name).unwrap();
            assert_eq!(m.param_grads.len(), m.n_params());
            assert_eq!(m.unscale.as_ref().unwrap().len(), m.n_params());
        }
        assert!(matches!(preset("spline"), Err(Error::UnknownModel(n)) if n == "spline"));
    }

    #[test]
    fn linear_has_no_free_parameters_under_c1() {
        let m = preset("linear").unwrap();
        assert!(m.free_params(true).is_empty());
        assert_eq!(m.free_params(false), &[0, 1]);
    }

    #[test]
    fn closed_form_integrals_where_expected() {
        for name in ["linear", "quadratic", "cubic", "sin4", "sin5", "sin6", "sin7", "decay", "fourier"] {
            assert!(preset(name).unwrap().antideriv_expr.is_some(), "{name}");
        }
        assert!(preset("gaussian").unwrap().antideriv_expr.is_none());
        assert!(preset("logistic").unwrap().antideriv_expr.is_none());
    }
}
