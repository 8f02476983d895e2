//! Flat evaluation tape for a batch of expressions.
//!
//! Common subexpressions are shared, and nodes that do not depend on `x` are
//! evaluated once per parameter vector in [`Tape::prepare`] rather than once
//! per sample.

use std::collections::HashMap;

use super::{pow_value, Expr, Func, Node, Sym};

#[derive(Debug, Clone, Copy)]
enum Op {
    Num(f64),
    X,
    Param(usize),
    TargetValue,
    TargetSlope,
    Neg(u32),
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    Powi(u32, i32),
    Pow(u32, u32),
    Call(Func, u32),
}

#[derive(Hash, PartialEq, Eq)]
enum Key {
    Num(u64),
    Sym(Sym),
    Un(u8, u32),
    Bin(u8, u32, u32),
    Call(Func, u32),
}

#[derive(Debug, Clone)]
pub struct Tape {
    ops: Vec<Op>,
    pre: Vec<u32>,
    per_x: Vec<u32>,
    outputs: Vec<u32>,
}

struct Builder {
    ops: Vec<Op>,
    x_dep: Vec<bool>,
    seen: HashMap<Key, u32>,
}

impl Builder {
    fn intern(&mut self, key: Key, op: Op, x_dep: bool) -> u32 {
        if let Some(&i) = self.seen.get(&key) {
            return i;
        }
        let i = self.ops.len() as u32;
        self.ops.push(op);
        self.x_dep.push(x_dep);
        self.seen.insert(key, i);
        i
    }

    fn bin(&mut self, tag: u8, a: &Expr, b: &Expr, make: fn(u32, u32) -> Op) -> u32 {
        let (ia, ib) = (self.visit(a), self.visit(b));
        let dep = self.x_dep[ia as usize] || self.x_dep[ib as usize];
        self.intern(Key::Bin(tag, ia, ib), make(ia, ib), dep)
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        match e.node() {
            Node::Num(v) => self.intern(Key::Num(v.to_bits()), Op::Num(*v), false),
            Node::Sym(s) => {
                let op = match s {
                    Sym::X => Op::X,
                    Sym::Param(i) => Op::Param(*i),
                    Sym::TargetValue => Op::TargetValue,
                    Sym::TargetSlope => Op::TargetSlope,
                };
                self.intern(Key::Sym(*s), op, *s == Sym::X)
            }
            Node::Neg(a) => {
                let ia = self.visit(a);
                let dep = self.x_dep[ia as usize];
                self.intern(Key::Un(0, ia), Op::Neg(ia), dep)
            }
            Node::Add(a, b) => self.bin(1, a, b, Op::Add),
            Node::Sub(a, b) => self.bin(2, a, b, Op::Sub),
            Node::Mul(a, b) => self.bin(3, a, b, Op::Mul),
            Node::Div(a, b) => self.bin(4, a, b, Op::Div),
            Node::Pow(a, b) => match b.as_num() {
                Some(n) if n.fract() == 0.0 && n.abs() <= 64.0 => {
                    let ia = self.visit(a);
                    let dep = self.x_dep[ia as usize];
                    self.intern(Key::Bin(5, ia, n as i32 as u32), Op::Powi(ia, n as i32), dep)
                }
                _ => self.bin(6, a, b, Op::Pow),
            },
            Node::Call(f, a) => {
                let ia = self.visit(a);
                let dep = self.x_dep[ia as usize];
                self.intern(Key::Call(*f, ia), Op::Call(*f, ia), dep)
            }
        }
    }
}

impl Tape {
    pub fn compile(exprs: &[Expr]) -> Tape {
        let mut b = Builder {
            ops: Vec::new(),
            x_dep: Vec::new(),
            seen: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| b.visit(e)).collect();
        let (per_x, pre): (Vec<u32>, Vec<u32>) =
            (0..b.ops.len() as u32).partition(|&i| b.x_dep[i as usize]);
        Tape {
            ops: b.ops,
            pre,
            per_x,
            outputs,
        }
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    #[inline]
    fn step(&self, i: u32, x: f64, params: &[f64], targets: (f64, f64), buf: &mut [f64]) {
        let v = match self.ops[i as usize] {
            Op::Num(v) => v,
            Op::X => x,
            Op::Param(p) => params[p],
            Op::TargetValue => targets.0,
            Op::TargetSlope => targets.1,
            Op::Neg(a) => -buf[a as usize],
            Op::Add(a, b) => buf[a as usize] + buf[b as usize],
            Op::Sub(a, b) => buf[a as usize] - buf[b as usize],
            Op::Mul(a, b) => buf[a as usize] * buf[b as usize],
            Op::Div(a, b) => buf[a as usize] / buf[b as usize],
            Op::Powi(a, n) => buf[a as usize].powi(n),
            Op::Pow(a, b) => pow_value(buf[a as usize], buf[b as usize]),
            Op::Call(f, a) => f.apply(buf[a as usize]),
        };
        buf[i as usize] = v;
    }

    /// Evaluates every `x`-independent node for this parameter vector.
    pub fn prepare(&self, params: &[f64], targets: (f64, f64), buf: &mut Vec<f64>) {
        buf.clear();
        buf.resize(self.ops.len(), 0.0);
        for &i in &self.pre {
            self.step(i, 0.0, params, targets, buf);
        }
    }

    /// Evaluates the `x`-dependent nodes; call after [`Tape::prepare`].
    #[inline]
    pub fn eval_at(&self, x: f64, buf: &mut [f64]) {
        for &i in &self.per_x {
            self.step(i, x, &[], (0.0, 0.0), buf);
        }
    }

    #[inline]
    pub fn output(&self, k: usize, buf: &[f64]) -> f64 {
        buf[self.outputs[k] as usize]
    }

    /// One-shot evaluation of every output at a single point.
    pub fn eval(&self, x: f64, params: &[f64], targets: (f64, f64)) -> Vec<f64> {
        let mut buf = Vec::new();
        self.prepare(params, targets, &mut buf);
        self.eval_at(x, &mut buf);
        (0..self.outputs.len()).map(|k| self.output(k, &buf)).collect()
    }
}
