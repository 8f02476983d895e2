use std::fmt;

use super::{num_of, Expr, Node, Sym};

/// Formats `v` rounded to `sig` significant digits.
///
/// Fixed notation is used for magnitudes in `[1e-4, 1e15)`, scientific
/// notation (`1.09e-5`) otherwise; trailing zeros are dropped.
pub fn fmt_sig(v: f64, sig: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { v.to_string() };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..15).contains(&exp) {
        return format!("{}e{}", trim_zeros(mant), exp);
    }
    let rounded: f64 = sci.parse().expect("round-trippable");
    let decimals = (sig as i32 - 1 - exp).max(0) as usize;
    let s = trim_zeros(&format!("{:.*}", decimals, rounded)).to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Display adapter for [`Expr`].
pub struct Render<'a> {
    expr: &'a Expr,
    names: &'a [String],
    sig: Option<usize>,
    var: Option<&'a str>,
    juxtapose: bool,
}

impl<'a> Render<'a> {
    pub(crate) fn new(expr: &'a Expr, names: &'a [String]) -> Self {
        Render {
            expr,
            names,
            sig: None,
            var: None,
            juxtapose: false,
        }
    }

    /// Round numeric literals to `sig` significant digits.
    pub fn sig_digits(mut self, sig: usize) -> Self {
        self.sig = Some(sig);
        self
    }

    /// Print the variable as `var` instead of `x` (e.g. `t` or `(x - 90)`).
    pub fn var(mut self, var: &'a str) -> Self {
        self.var = Some(var);
        self
    }

    /// Write `0.5x^2` instead of `0.5*x^2` when a literal multiplies a power
    /// of the variable.
    pub fn juxtapose(mut self, on: bool) -> Self {
        self.juxtapose = on;
        self
    }

    fn num(&self, v: f64) -> String {
        match self.sig {
            Some(s) => fmt_sig(v, s),
            None => v.to_string(),
        }
    }

    fn var_name(&self) -> &str {
        self.var.unwrap_or("x")
    }

    fn var_is_atomic(&self) -> bool {
        let v = self.var_name();
        v.chars().all(|c| c.is_alphanumeric() || c == '_') || (v.starts_with('(') && v.ends_with(')'))
    }

    fn is_var_power(&self, e: &Expr) -> bool {
        match e.node() {
            Node::Sym(Sym::X) => true,
            Node::Pow(b, p) => matches!(b.node(), Node::Sym(Sym::X)) && num_of(p).is_some(),
            _ => false,
        }
    }

    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>, ctx: u8, right: bool) -> fmt::Result {
        let p = prec(e);
        let negative_lead = is_negative_lead(e);
        let paren = p < ctx || (right && negative_lead && ctx > 1);
        if paren {
            f.write_str("(")?;
        }
        match e.node() {
            Node::Num(v) => f.write_str(&self.num(*v))?,
            Node::Sym(Sym::X) => f.write_str(self.var_name())?,
            Node::Sym(Sym::Param(i)) => match self.names.get(*i) {
                Some(n) => f.write_str(n)?,
                None => write!(f, "p{i}")?,
            },
            Node::Sym(Sym::TargetValue) => f.write_str("v")?,
            Node::Sym(Sym::TargetSlope) => f.write_str("s")?,
            Node::Neg(a) => {
                f.write_str("-")?;
                self.write(a, f, 2, true)?;
            }
            Node::Add(a, b) => {
                self.write(a, f, 1, false)?;
                f.write_str(" + ")?;
                self.write(b, f, 1, true)?;
            }
            Node::Sub(a, b) => {
                self.write(a, f, 1, false)?;
                f.write_str(" - ")?;
                self.write(b, f, 2, true)?;
            }
            Node::Mul(a, b) => {
                self.write(a, f, 2, false)?;
                let jux = self.juxtapose
                    && num_of(a).is_some()
                    && self.is_var_power(b)
                    && self.var_is_atomic();
                if !jux {
                    f.write_str("*")?;
                }
                self.write(b, f, 2, true)?;
            }
            Node::Div(a, b) => {
                self.write(a, f, 2, false)?;
                f.write_str("/")?;
                self.write(b, f, 3, true)?;
            }
            Node::Pow(a, b) => {
                self.write(a, f, 5, false)?;
                f.write_str("^")?;
                self.write(b, f, 4, true)?;
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write(a, f, 0, false)?;
                f.write_str(")")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn prec(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => 1,
        Node::Mul(..) | Node::Div(..) => 2,
        Node::Neg(_) => 3,
        Node::Num(v) if *v < 0.0 => 3,
        Node::Pow(..) => 4,
        _ => 5,
    }
}

fn is_negative_lead(e: &Expr) -> bool {
    match e.node() {
        Node::Neg(_) => true,
        Node::Num(v) => *v < 0.0,
        _ => false,
    }
}

impl fmt::Display for Render<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f, 0, false)
    }
}
