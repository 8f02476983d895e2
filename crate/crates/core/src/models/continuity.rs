//! Closed-form continuity solver.
//!
//! The fixed parameters must enter `f(0)` and `f'(0)` affinely. Writing
//! `f(0) = a00*pv + a01*ps + r0` and `f'(0) = a10*pv + a11*ps + r1`, the
//! solution for targets `(v, s)` is obtained symbolically with Cramer's rule,
//! so the reduced model stays an ordinary expression in the free parameters.

use crate::error::{Error, Result};
use crate::expr::{Expr, Sym};

/// Symbolic solution of the continuity system.
#[derive(Debug, Clone)]
pub(crate) struct Solution {
    /// Fixed parameter indices, value parameter first.
    pub fixed: Vec<usize>,
    /// Expression for each fixed parameter in terms of the free parameters
    /// and the targets `v`, `s`.
    pub exprs: Vec<Expr>,
    /// Determinant of the linear system; zero at runtime means singular.
    pub det: Expr,
}

fn coefficient(g: &Expr, p: usize, fixed: &[usize], names: &[String]) -> Result<Expr> {
    let a = g.derivative(Sym::Param(p));
    if let Some(&q) = fixed.iter().find(|&&q| a.depends_on(Sym::Param(q))) {
        return Err(Error::ContinuityUnsolvable(format!(
            "`{}` enters the boundary conditions non-affinely (its coefficient depends on `{}`)",
            names[p], names[q]
        )));
    }
    Ok(a)
}

/// Derives the solver for value parameter `pv` and, for C1, slope parameter
/// `ps`.
pub(crate) fn derive(
    f: &Expr,
    names: &[String],
    pv: usize,
    ps: Option<usize>,
) -> Result<Solution> {
    let at0 = |e: &Expr| e.substitute(Sym::X, &Expr::zero());
    let g0 = at0(f);
    let v = Expr::sym(Sym::TargetValue);
    let zero_fixed = |e: &Expr, fixed: &[usize]| {
        e.map_syms(&|s| match s {
            Sym::Param(i) if fixed.contains(&i) => Some(Expr::zero()),
            _ => None,
        })
    };
    match ps {
        None => {
            let fixed = [pv];
            let a = coefficient(&g0, pv, &fixed, names)?;
            if a.is_zero() {
                return Err(Error::ContinuityUnsolvable(format!(
                    "`{}` does not affect the value at the segment start",
                    names[pv]
                )));
            }
            let r0 = zero_fixed(&g0, &fixed);
            Ok(Solution {
                fixed: vec![pv],
                exprs: vec![(v - r0) / a.clone()],
                det: a,
            })
        }
        Some(ps) => {
            if ps == pv {
                return Err(Error::ContinuityUnsolvable(
                    "value and slope parameters must differ".into(),
                ));
            }
            let g1 = at0(&f.derivative(Sym::X));
            let fixed = [pv, ps];
            let a00 = coefficient(&g0, pv, &fixed, names)?;
            let a01 = coefficient(&g0, ps, &fixed, names)?;
            let a10 = coefficient(&g1, pv, &fixed, names)?;
            let a11 = coefficient(&g1, ps, &fixed, names)?;
            let det = a00.clone() * a11.clone() - a01.clone() * a10.clone();
            if det.is_zero() {
                return Err(Error::ContinuityUnsolvable(format!(
                    "`{}` and `{}` cannot set value and slope independently",
                    names[pv], names[ps]
                )));
            }
            let s = Expr::sym(Sym::TargetSlope);
            let e0 = v - zero_fixed(&g0, &fixed);
            let e1 = s - zero_fixed(&g1, &fixed);
            let sol_v = (e0.clone() * a11 - a01 * e1.clone()) / det.clone();
            let sol_s = (a00 * e1 - a10 * e0) / det.clone();
            Ok(Solution {
                fixed: vec![pv, ps],
                exprs: vec![sol_v, sol_s],
                det,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn cubic_solution_is_trivial() {
        let n = names(&["a", "b", "c", "d"]);
        let f = parse("a*x^3 + b*x^2 + c*x + d", &n).unwrap();
        let sol = derive(&f, &n, 3, Some(2)).unwrap();
        assert_eq!(sol.exprs[0].render(&n).to_string(), "v");
        assert_eq!(sol.exprs[1].render(&n).to_string(), "s");
        assert_eq!(sol.det.as_num(), Some(1.0));
    }

    #[test]
    fn sin6_solution_matches_hand_derivation() {
        let n = names(&["A1", "A0", "B0", "D", "C1", "C0"]);
        let f = parse("(A1*x + A0)*sin(B0*x + D) + C1*x + C0", &n).unwrap();
        let sol = derive(&f, &n, 5, Some(4)).unwrap();
        let p = [0.3, -1.2, 2.5, 0.7, 0.0, 0.0];
        let (v, s) = (0.8, -0.4);
        let c0 = sol.exprs[0].eval(0.0, &p, (v, s));
        let c1 = sol.exprs[1].eval(0.0, &p, (v, s));
        // C0 = v - A0 sin D ; C1 = s - A1 sin D - A0 B0 cos D
        let want_c0 = v - p[1] * p[3].sin();
        let want_c1 = s - p[0] * p[3].sin() - p[1] * p[2] * p[3].cos();
        assert!((c0 - want_c0).abs() < 1e-15);
        assert!((c1 - want_c1).abs() < 1e-15);
    }

    #[test]
    fn non_affine_parameter_is_rejected() {
        let n = names(&["A", "B", "D"]);
        let f = parse("A*sin(B*x + D)", &n).unwrap();
        assert!(matches!(derive(&f, &n, 1, None), Err(Error::ContinuityUnsolvable(_))));
        assert!(matches!(derive(&f, &n, 2, None), Err(Error::ContinuityUnsolvable(_))));
        let g = parse("A*exp(B) + D*x", &n).unwrap();
        assert!(matches!(derive(&g, &n, 1, Some(2)), Err(Error::ContinuityUnsolvable(_))));
    }

    #[test]
    fn coupled_parameters_need_a_nonzero_determinant() {
        let n = names(&["a", "b"]);
        // both parameters only shift the value
        let f = parse("a + b + x^2", &n).unwrap();
        assert!(matches!(derive(&f, &n, 0, Some(1)), Err(Error::ContinuityUnsolvable(_))));
        // coupled but solvable
        let g = parse("(a + b)*exp(x) + a*x", &n).unwrap();
        let sol = derive(&g, &n, 0, Some(1)).unwrap();
        let p = [0.0, 0.0];
        let a = sol.exprs[0].eval(0.0, &p, (1.5, 0.25));
        let b = sol.exprs[1].eval(0.0, &p, (1.5, 0.25));
        let q = [a, b];
        assert!((g.eval(0.0, &q, (0.0, 0.0)) - 1.5).abs() < 1e-14);
        let dg = g.derivative(Sym::X);
        assert!((dg.eval(0.0, &q, (0.0, 0.0)) - 0.25).abs() < 1e-14);
    }
}
