//! Symbolic expressions in one variable `x`, a set of indexed parameters and
//! the two continuity targets.
//!
//! Expressions are immutable and cheaply cloneable. Every constructor folds
//! constants and strips neutral elements, which keeps derivatives and
//! substitutions readable without a general simplifier.

mod display;
mod integrate;
mod parse;
mod tape;

use std::fmt;
use std::ops;
use std::sync::Arc;

pub use display::{fmt_sig, Render};
pub use integrate::{antiderivative, as_polynomial};
pub use parse::parse;
pub use tape::Tape;

/// Elementary functions accepted by the parser. `Sign` only arises from
/// differentiating `abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tan => v.tan(),
            Func::Exp => v.exp(),
            Func::Log => v.ln(),
            Func::Sqrt => v.sqrt(),
            Func::Abs => v.abs(),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// A leaf symbol an expression can depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sym {
    X,
    Param(usize),
    /// Continuity target value `v`.
    TargetValue,
    /// Continuity target slope `s`.
    TargetSlope,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Sym(Sym),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Pow(Expr, Expr),
    Call(Func, Expr),
}

#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.render(&[]), f)
    }
}

fn num_of(e: &Expr) -> Option<f64> {
    match *e.0 {
        Node::Num(v) => Some(v),
        _ => None,
    }
}

impl Expr {
    fn wrap(n: Node) -> Expr {
        Expr(Arc::new(n))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(v: f64) -> Expr {
        Expr::wrap(Node::Num(v))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub fn x() -> Expr {
        Expr::wrap(Node::Sym(Sym::X))
    }

    pub fn param(i: usize) -> Expr {
        Expr::wrap(Node::Sym(Sym::Param(i)))
    }

    pub fn sym(s: Sym) -> Expr {
        Expr::wrap(Node::Sym(s))
    }

    pub fn as_num(&self) -> Option<f64> {
        num_of(self)
    }

    pub fn is_zero(&self) -> bool {
        num_of(self) == Some(0.0)
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Num(v) => Expr::num(-v),
            Node::Neg(inner) => inner.clone(),
            Node::Mul(l, r) if num_of(l).is_some() => {
                Expr::mul(Expr::num(-num_of(l).unwrap()), r.clone())
            }
            _ => Expr::wrap(Node::Neg(a)),
        }
    }

    /// `Some(-e)` when `e` carries an explicit negative sign.
    fn negated_lead(e: &Expr) -> Option<Expr> {
        match e.node() {
            Node::Neg(inner) => Some(inner.clone()),
            Node::Num(v) if *v < 0.0 => Some(Expr::num(-v)),
            Node::Mul(l, r) => match num_of(l) {
                Some(c) if c < 0.0 => Some(Expr::mul(Expr::num(-c), r.clone())),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (num_of(&a), num_of(&b)) {
            (Some(x), Some(y)) => Expr::num(x + y),
            (Some(x), _) if x == 0.0 => b,
            (_, Some(y)) if y == 0.0 => a,
            _ => match Expr::negated_lead(&b) {
                Some(pos) => Expr::wrap(Node::Sub(a, pos)),
                None => Expr::wrap(Node::Add(a, b)),
            },
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (num_of(&a), num_of(&b)) {
            (Some(x), Some(y)) => Expr::num(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a,
            _ if a == b => Expr::zero(),
            _ => match Expr::negated_lead(&b) {
                Some(pos) => Expr::wrap(Node::Add(a, pos)),
                None => Expr::wrap(Node::Sub(a, b)),
            },
        }
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (num_of(&a), num_of(&b)) {
            (Some(x), Some(y)) => return Expr::num(x * y),
            (Some(x), _) | (_, Some(x)) if x == 0.0 => return Expr::zero(),
            (Some(x), _) if x == 1.0 => return b,
            (_, Some(y)) if y == 1.0 => return a,
            (Some(x), _) if x == -1.0 => return Expr::neg(b),
            (_, Some(y)) if y == -1.0 => return Expr::neg(a),
            // constants lead
            (None, Some(_)) => return Expr::mul(b, a),
            _ => {}
        }
        // pull negations and leading constants outward
        if let Node::Neg(inner) = a.node() {
            return Expr::neg(Expr::mul(inner.clone(), b));
        }
        if let Node::Neg(inner) = b.node() {
            return Expr::neg(Expr::mul(a, inner.clone()));
        }
        if let (None, Node::Mul(l, r)) = (num_of(&b), a.node()) {
            if let Some(c) = num_of(l) {
                return Expr::mul(Expr::num(c), Expr::mul(r.clone(), b));
            }
        }
        if let Node::Mul(l, r) = b.node() {
            if let Some(c) = num_of(l) {
                return Expr::mul(Expr::mul(Expr::num(c), a), r.clone());
            }
        }
        if let (Some(c), Node::Mul(l, r)) = (num_of(&a), b.node()) {
            if let Some(d) = num_of(l) {
                return Expr::mul(Expr::num(c * d), r.clone());
            }
        }
        Expr::wrap(Node::Mul(a, b))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (num_of(&a), num_of(&b)) {
            (Some(x), Some(y)) if y != 0.0 => Expr::num(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => a,
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ if a == b => Expr::one(),
            _ => {
                if let Node::Neg(inner) = a.node() {
                    return Expr::neg(Expr::div(inner.clone(), b));
                }
                // fold a numeric divisor into a leading constant
                if let (Some(y), Node::Mul(l, r)) = (num_of(&b), a.node()) {
                    if let Some(c) = num_of(l).filter(|_| y != 0.0) {
                        return Expr::mul(Expr::num(c / y), r.clone());
                    }
                }
                Expr::wrap(Node::Div(a, b))
            }
        }
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        match (num_of(&a), num_of(&b)) {
            (Some(x), Some(y)) => Expr::num(x.powf(y)),
            (_, Some(y)) if y == 0.0 => Expr::one(),
            (_, Some(y)) if y == 1.0 => a,
            _ => Expr::wrap(Node::Pow(a, b)),
        }
    }

    pub fn powi(a: Expr, n: i32) -> Expr {
        Expr::pow(a, Expr::num(n as f64))
    }

    pub fn call(f: Func, a: Expr) -> Expr {
        match num_of(&a) {
            Some(v) => Expr::num(f.apply(v)),
            None => Expr::wrap(Node::Call(f, a)),
        }
    }

    pub fn sin(self) -> Expr {
        Expr::call(Func::Sin, self)
    }

    pub fn cos(self) -> Expr {
        Expr::call(Func::Cos, self)
    }

    pub fn exp(self) -> Expr {
        Expr::call(Func::Exp, self)
    }

    /// True when `sym` occurs anywhere in the expression.
    pub fn depends_on(&self, sym: Sym) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(s) => *s == sym,
            Node::Neg(a) | Node::Call(_, a) => a.depends_on(sym),
            Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Pow(a, b) => a.depends_on(sym) || b.depends_on(sym),
        }
    }

    /// Rebuilds the tree bottom-up through the simplifying constructors,
    /// replacing leaves with `f(sym)` where it returns `Some`.
    pub fn map_syms(&self, f: &impl Fn(Sym) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Num(_) => self.clone(),
            Node::Sym(s) => f(*s).unwrap_or_else(|| self.clone()),
            Node::Neg(a) => Expr::neg(a.map_syms(f)),
            Node::Add(a, b) => Expr::add(a.map_syms(f), b.map_syms(f)),
            Node::Sub(a, b) => Expr::sub(a.map_syms(f), b.map_syms(f)),
            Node::Mul(a, b) => Expr::mul(a.map_syms(f), b.map_syms(f)),
            Node::Div(a, b) => Expr::div(a.map_syms(f), b.map_syms(f)),
            Node::Pow(a, b) => Expr::pow(a.map_syms(f), b.map_syms(f)),
            Node::Call(func, a) => Expr::call(*func, a.map_syms(f)),
        }
    }

    pub fn substitute(&self, sym: Sym, with: &Expr) -> Expr {
        self.map_syms(&|s| (s == sym).then(|| with.clone()))
    }

    /// Replaces every parameter with its numeric value.
    pub fn bind_params(&self, values: &[f64]) -> Expr {
        self.map_syms(&|s| match s {
            Sym::Param(i) => Some(Expr::num(values[i])),
            _ => None,
        })
    }

    /// Symbolic derivative with respect to `sym`.
    pub fn derivative(&self, sym: Sym) -> Expr {
        if !self.depends_on(sym) {
            return Expr::zero();
        }
        match self.node() {
            Node::Num(_) => Expr::zero(),
            Node::Sym(s) => Expr::num(if *s == sym { 1.0 } else { 0.0 }),
            Node::Neg(a) => Expr::neg(a.derivative(sym)),
            Node::Add(a, b) => Expr::add(a.derivative(sym), b.derivative(sym)),
            Node::Sub(a, b) => Expr::sub(a.derivative(sym), b.derivative(sym)),
            Node::Mul(a, b) => Expr::add(
                Expr::mul(a.derivative(sym), b.clone()),
                Expr::mul(a.clone(), b.derivative(sym)),
            ),
            Node::Div(a, b) => {
                let da = a.derivative(sym);
                if !b.depends_on(sym) {
                    return Expr::div(da, b.clone());
                }
                let db = b.derivative(sym);
                Expr::div(
                    Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                    Expr::powi(b.clone(), 2),
                )
            }
            Node::Pow(a, b) => {
                if let Some(n) = num_of(b) {
                    // n * a^(n-1) * a'
                    Expr::mul(
                        Expr::mul(Expr::num(n), Expr::pow(a.clone(), Expr::num(n - 1.0))),
                        a.derivative(sym),
                    )
                } else {
                    // a^b * (b' ln a + b a' / a)
                    let term = Expr::add(
                        Expr::mul(b.derivative(sym), Expr::call(Func::Log, a.clone())),
                        Expr::div(Expr::mul(b.clone(), a.derivative(sym)), a.clone()),
                    );
                    Expr::mul(self.clone(), term)
                }
            }
            Node::Call(f, a) => {
                let da = a.derivative(sym);
                let outer = match f {
                    Func::Sin => a.clone().cos(),
                    Func::Cos => Expr::neg(a.clone().sin()),
                    Func::Tan => Expr::div(Expr::one(), Expr::powi(a.clone().cos(), 2)),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::div(Expr::one(), a.clone()),
                    Func::Sqrt => Expr::div(Expr::num(0.5), self.clone()),
                    Func::Abs => Expr::call(Func::Sign, a.clone()),
                    Func::Sign => Expr::zero(),
                };
                Expr::mul(outer, da)
            }
        }
    }

    /// `n`-th derivative with respect to `x`.
    pub fn nth_derivative(&self, n: usize) -> Expr {
        (0..n).fold(self.clone(), |e, _| e.derivative(Sym::X))
    }

    /// Tree-walking evaluation. Use [`Tape`] on hot paths.
    pub fn eval(&self, x: f64, params: &[f64], targets: (f64, f64)) -> f64 {
        match self.node() {
            Node::Num(v) => *v,
            Node::Sym(Sym::X) => x,
            Node::Sym(Sym::Param(i)) => params[*i],
            Node::Sym(Sym::TargetValue) => targets.0,
            Node::Sym(Sym::TargetSlope) => targets.1,
            Node::Neg(a) => -a.eval(x, params, targets),
            Node::Add(a, b) => a.eval(x, params, targets) + b.eval(x, params, targets),
            Node::Sub(a, b) => a.eval(x, params, targets) - b.eval(x, params, targets),
            Node::Mul(a, b) => a.eval(x, params, targets) * b.eval(x, params, targets),
            Node::Div(a, b) => a.eval(x, params, targets) / b.eval(x, params, targets),
            Node::Pow(a, b) => pow_value(a.eval(x, params, targets), b.eval(x, params, targets)),
            Node::Call(f, a) => f.apply(a.eval(x, params, targets)),
        }
    }

    /// Renders with parameter names; see [`Render`] for more options.
    pub fn render<'a>(&'a self, names: &'a [String]) -> Render<'a> {
        Render::new(self, names)
    }
}

pub(crate) fn pow_value(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= 64.0 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}
