//! Closed-form antiderivatives in `x` for sums of terms of the form
//! `P(x)`, `P(x)*sin(a*x + b)`, `P(x)*cos(a*x + b)` and `P(x)*exp(a*x + b)`,
//! where `P` is a polynomial whose coefficients may depend on parameters.
//! Transcendental factors are integrated by repeated integration by parts.

use super::{Expr, Func, Node, Sym};

const MAX_DEGREE: usize = 12;

/// Polynomial coefficients, lowest degree first.
type Poly = Vec<Expr>;

fn trim(mut p: Poly) -> Poly {
    while p.len() > 1 && p.last().is_some_and(Expr::is_zero) {
        p.pop();
    }
    p
}

fn poly_add(a: &[Expr], b: &[Expr], sign: f64) -> Poly {
    let n = a.len().max(b.len());
    let zero = Expr::zero();
    trim(
        (0..n)
            .map(|i| {
                let x = a.get(i).unwrap_or(&zero).clone();
                let y = b.get(i).unwrap_or(&zero).clone();
                if sign > 0.0 {
                    x + y
                } else {
                    x - y
                }
            })
            .collect(),
    )
}

fn poly_mul(a: &[Expr], b: &[Expr]) -> Option<Poly> {
    if a.len() + b.len() - 1 > MAX_DEGREE + 1 {
        return None;
    }
    let mut out = vec![Expr::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + x.clone() * y.clone();
        }
    }
    Some(trim(out))
}

fn poly_scale(a: &[Expr], f: impl Fn(Expr) -> Expr) -> Poly {
    trim(a.iter().cloned().map(f).collect())
}

fn poly_derivative(a: &[Expr]) -> Poly {
    if a.len() <= 1 {
        return vec![Expr::zero()];
    }
    trim(
        a.iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| Expr::num(i as f64) * c.clone())
            .collect(),
    )
}

fn poly_is_zero(a: &[Expr]) -> bool {
    a.iter().all(Expr::is_zero)
}

fn poly_expr(a: &[Expr]) -> Expr {
    poly_times(a, &Expr::one())
}

/// `sum_i c_i x^i * factor`, distributed term by term.
fn poly_times(a: &[Expr], factor: &Expr) -> Expr {
    a.iter().enumerate().fold(Expr::zero(), |acc, (i, c)| {
        let xi = match i {
            0 => Expr::one(),
            1 => Expr::x(),
            _ => Expr::powi(Expr::x(), i as i32),
        };
        acc + c.clone() * (xi * factor.clone())
    })
}

/// Coefficients of `e` as a polynomial in `x`, lowest degree first, or `None`
/// if `e` is not polynomial in `x`.
pub fn as_polynomial(e: &Expr) -> Option<Vec<Expr>> {
    if !e.depends_on(Sym::X) {
        return Some(vec![e.clone()]);
    }
    match e.node() {
        Node::Sym(Sym::X) => Some(vec![Expr::zero(), Expr::one()]),
        Node::Neg(a) => Some(poly_scale(&as_polynomial(a)?, Expr::neg)),
        Node::Add(a, b) => Some(poly_add(&as_polynomial(a)?, &as_polynomial(b)?, 1.0)),
        Node::Sub(a, b) => Some(poly_add(&as_polynomial(a)?, &as_polynomial(b)?, -1.0)),
        Node::Mul(a, b) => poly_mul(&as_polynomial(a)?, &as_polynomial(b)?),
        Node::Div(a, b) if !b.depends_on(Sym::X) => {
            Some(poly_scale(&as_polynomial(a)?, |c| c / b.clone()))
        }
        Node::Pow(a, b) => {
            let n = b.as_num()?;
            if n < 0.0 || n.fract() != 0.0 || n as usize > MAX_DEGREE {
                return None;
            }
            let base = as_polynomial(a)?;
            let mut acc = vec![Expr::one()];
            for _ in 0..n as usize {
                acc = poly_mul(&acc, &base)?;
            }
            Some(acc)
        }
        _ => None,
    }
}

#[derive(Clone)]
enum Kind {
    One,
    /// `f(a*x + b)` for `f` in sin, cos, exp.
    Trans(Func, Expr, Expr),
}

#[derive(Clone)]
struct Term {
    poly: Poly,
    kind: Kind,
}

fn terms(e: &Expr) -> Option<Vec<Term>> {
    if let Some(poly) = as_polynomial(e) {
        return Some(vec![Term {
            poly,
            kind: Kind::One,
        }]);
    }
    match e.node() {
        Node::Neg(a) => Some(
            terms(a)?
                .into_iter()
                .map(|t| Term {
                    poly: poly_scale(&t.poly, Expr::neg),
                    kind: t.kind,
                })
                .collect(),
        ),
        Node::Add(a, b) => {
            let mut v = terms(a)?;
            v.extend(terms(b)?);
            Some(v)
        }
        Node::Sub(a, b) => {
            let mut v = terms(a)?;
            v.extend(terms(&Expr::neg(b.clone()))?);
            Some(v)
        }
        Node::Mul(a, b) => {
            let (ta, tb) = (terms(a)?, terms(b)?);
            let mut out = Vec::with_capacity(ta.len() * tb.len());
            for l in &ta {
                for r in &tb {
                    let kind = match (&l.kind, &r.kind) {
                        (Kind::One, k) | (k, Kind::One) => k.clone(),
                        _ => return None,
                    };
                    out.push(Term {
                        poly: poly_mul(&l.poly, &r.poly)?,
                        kind,
                    });
                }
            }
            Some(out)
        }
        Node::Div(a, b) if !b.depends_on(Sym::X) => Some(
            terms(a)?
                .into_iter()
                .map(|t| Term {
                    poly: poly_scale(&t.poly, |c| c / b.clone()),
                    kind: t.kind,
                })
                .collect(),
        ),
        Node::Call(f @ (Func::Sin | Func::Cos | Func::Exp), arg) => {
            let lin = as_polynomial(arg)?;
            if lin.len() != 2 {
                return None;
            }
            Some(vec![Term {
                poly: vec![Expr::one()],
                kind: Kind::Trans(*f, lin[1].clone(), lin[0].clone()),
            }])
        }
        _ => None,
    }
}

/// `∫ P(x) f(a x + b) dx` by parts, for `f` in sin, cos, exp.
fn integrate_by_parts(poly: &[Expr], f: Func, a: &Expr, b: &Expr) -> Expr {
    if poly_is_zero(poly) {
        return Expr::zero();
    }
    let u = a.clone() * Expr::x() + b.clone();
    let dp = poly_derivative(poly);
    let scaled = poly_scale(poly, |c| c / a.clone());
    match f {
        // ∫P sin = -P cos/a + ∫P' cos / a
        Func::Sin => {
            Expr::neg(poly_times(&scaled, &u.cos()))
                + integrate_by_parts(&dp, Func::Cos, a, b) / a.clone()
        }
        // ∫P cos = P sin/a - ∫P' sin / a
        Func::Cos => {
            poly_times(&scaled, &u.sin()) - integrate_by_parts(&dp, Func::Sin, a, b) / a.clone()
        }
        // ∫P exp = P exp/a - ∫P' exp / a
        _ => poly_times(&scaled, &u.exp()) - integrate_by_parts(&dp, Func::Exp, a, b) / a.clone(),
    }
}

/// Antiderivative in `x` (zero integration constant is not enforced), or
/// `None` when `e` is outside the supported family.
pub fn antiderivative(e: &Expr) -> Option<Expr> {
    let ts = terms(e)?;
    let mut acc = Expr::zero();
    for t in ts {
        let part = match &t.kind {
            Kind::One => {
                let lifted: Poly = std::iter::once(Expr::zero())
                    .chain(
                        t.poly
                            .iter()
                            .enumerate()
                            .map(|(i, c)| c.clone() / Expr::num(i as f64 + 1.0)),
                    )
                    .collect();
                poly_expr(&trim(lifted))
            }
            Kind::Trans(f, a, b) => {
                if a.is_zero() {
                    // constant factor
                    let c = Expr::call(*f, b.clone());
                    let lifted: Poly = std::iter::once(Expr::zero())
                        .chain(t.poly.iter().enumerate().map(|(i, p)| {
                            c.clone() * p.clone() / Expr::num(i as f64 + 1.0)
                        }))
                        .collect();
                    poly_expr(&trim(lifted))
                } else {
                    integrate_by_parts(&t.poly, *f, a, b)
                }
            }
        };
        acc = acc + part;
    }
    Some(acc)
}
