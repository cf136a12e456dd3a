//! Arithmetic expressions over named symbols.
//!
//! Expressions appear as equation residuals and ODE right-hand sides. The
//! structural analyses only need [`Expr::free_symbols`]; the equilibrium lab
//! compiles expressions into a small stack program ([`CompiledExpr`]) and
//! evaluates them for any [`Scalar`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Sym(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Expr {
    pub fn sym(name: impl Into<String>) -> Self {
        Expr::Sym(name.into())
    }

    pub fn num(value: f64) -> Self {
        Expr::Num(value)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(inner: Expr) -> Self {
        Expr::Neg(Box::new(inner))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(v) if v.is_sign_negative() => PREC_NEG,
            Expr::Num(_) | Expr::Sym(_) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Binary(op, _, _) => op.precedence(),
        }
    }

    /// Set of symbols occurring anywhere in the expression.
    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self];
        while let Some(e) = stack.pop() {
            match e {
                Expr::Num(_) => {}
                Expr::Sym(s) => {
                    out.insert(s.clone());
                }
                Expr::Neg(inner) => stack.push(inner),
                Expr::Binary(_, l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        out
    }

    /// Symbols in order of first occurrence (left to right).
    pub fn symbols_in_order(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.visit_symbols(&mut |s| {
            if seen.insert(s.to_string()) {
                out.push(s.to_string());
            }
        });
        out
    }

    fn visit_symbols(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Expr::Num(_) => {}
            Expr::Sym(s) => f(s),
            Expr::Neg(inner) => inner.visit_symbols(f),
            Expr::Binary(_, l, r) => {
                l.visit_symbols(f);
                r.visit_symbols(f);
            }
        }
    }

    /// Returns a copy with every symbol found in `map` replaced by its image.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Sym(s) => Expr::Sym(map.get(s).cloned().unwrap_or_else(|| s.clone())),
            Expr::Neg(inner) => Expr::neg(inner.rename(map)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.rename(map), r.rename(map)),
        }
    }

    /// Flattens a top-level product into its factors. Non-products yield
    /// themselves as the single factor.
    pub fn factors(&self) -> Vec<&Expr> {
        match self {
            Expr::Binary(BinOp::Mul, l, r) => {
                let mut out = l.factors();
                out.extend(r.factors());
                out
            }
            other => vec![other],
        }
    }

    /// Removes one top-level factor equal to the symbol `name`.
    ///
    /// Returns `None` when the expression is not a product with `name` as a
    /// direct factor. A bare `name` reduces to the constant `1`.
    pub fn divide_out_symbol(&self, name: &str) -> Option<Expr> {
        let factors = self.factors();
        let pos = factors
            .iter()
            .position(|f| matches!(f, Expr::Sym(s) if s == name))?;
        let rest: Vec<Expr> = factors
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != pos)
            .map(|(_, f)| (*f).clone())
            .collect();
        let mut iter = rest.into_iter();
        let first = match iter.next() {
            Some(f) => f,
            None => return Some(Expr::Num(1.0)),
        };
        Some(iter.fold(first, |acc, f| Expr::binary(BinOp::Mul, acc, f)))
    }

    /// Compiles the expression against a symbol-to-slot lookup.
    pub fn compile<F>(&self, slot_of: F) -> Result<CompiledExpr, String>
    where
        F: Fn(&str) -> Option<usize>,
    {
        let mut ops = Vec::new();
        self.emit(&slot_of, &mut ops)?;
        Ok(CompiledExpr { ops })
    }

    fn emit<F>(&self, slot_of: &F, ops: &mut Vec<Op>) -> Result<(), String>
    where
        F: Fn(&str) -> Option<usize>,
    {
        match self {
            Expr::Num(v) => ops.push(Op::Const(*v)),
            Expr::Sym(s) => ops.push(Op::Load(slot_of(s).ok_or_else(|| s.clone())?)),
            Expr::Neg(inner) => {
                inner.emit(slot_of, ops)?;
                ops.push(Op::Neg);
            }
            Expr::Binary(BinOp::Pow, base, exponent) => {
                base.emit(slot_of, ops)?;
                match exponent.as_ref() {
                    Expr::Num(e) if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 => {
                        ops.push(Op::PowInt(*e as i32))
                    }
                    other => {
                        other.emit(slot_of, ops)?;
                        ops.push(Op::Pow);
                    }
                }
            }
            Expr::Binary(op, l, r) => {
                l.emit(slot_of, ops)?;
                r.emit(slot_of, ops)?;
                ops.push(match op {
                    BinOp::Add => Op::Add,
                    BinOp::Sub => Op::Sub,
                    BinOp::Mul => Op::Mul,
                    BinOp::Div => Op::Div,
                    BinOp::Pow => unreachable!("handled above"),
                });
            }
        }
        Ok(())
    }

    /// Direct tree-walking evaluation; `lookup` supplies symbol values.
    pub fn eval<T: Scalar>(&self, lookup: &dyn Fn(&str) -> Option<T>) -> Option<T> {
        Some(match self {
            Expr::Num(v) => T::lit(*v),
            Expr::Sym(s) => lookup(s)?,
            Expr::Neg(inner) => -inner.eval(lookup)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval(lookup)?;
                let b = r.eval(lookup)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Sym(s) => f.write_str(s),
            Expr::Neg(inner) => {
                if inner.precedence() >= PREC_NEG {
                    write!(f, "-{inner}")
                } else {
                    write!(f, "-({inner})")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (l.precedence() < PREC_ATOM, r.precedence() < PREC_NEG)
                } else {
                    (l.precedence() < p, r.precedence() <= p)
                };
                write_operand(f, l, left_parens)?;
                f.write_str(op.symbol())?;
                write_operand(f, r, right_parens)
            }
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    PowInt(i32),
}

/// Postfix program produced by [`Expr::compile`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledExpr {
    ops: Vec<Op>,
}

impl CompiledExpr {
    pub fn eval<T: Scalar>(&self, slots: &[T], stack: &mut Vec<T>) -> T {
        stack.clear();
        for op in &self.ops {
            match *op {
                Op::Const(v) => stack.push(T::lit(v)),
                Op::Load(i) => stack.push(slots[i]),
                Op::Neg => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(-a);
                }
                Op::PowInt(n) => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(a.powi(n));
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    stack.push(match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        Op::Div => a / b,
                        _ => a.powf(b),
                    });
                }
            }
        }
        stack.pop().expect("empty expression program")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(name: &str) -> Expr {
        Expr::sym(name)
    }

    fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinOp::Mul, a, b)
    }

    #[test]
    fn free_symbols_of_viral_target_cell_residual() {
        // U_sigma - d_T*X_T - beta*X_T*X_I
        let e = Expr::binary(
            BinOp::Sub,
            Expr::binary(BinOp::Sub, s("U_sigma"), mul(s("d_T"), s("X_T"))),
            mul(mul(s("beta"), s("X_T")), s("X_I")),
        );
        let syms: Vec<_> = e.free_symbols().into_iter().collect();
        assert_eq!(syms, vec!["U_sigma", "X_I", "X_T", "beta", "d_T"]);
        assert_eq!(
            e.symbols_in_order(),
            vec!["U_sigma", "d_T", "X_T", "beta", "X_I"]
        );
    }

    #[test]
    fn divide_out_symbol_removes_direct_factor_only() {
        // (U_f*beta*X_T - U_delta)*X_I
        let inner = Expr::binary(
            BinOp::Sub,
            mul(mul(s("U_f"), s("beta")), s("X_T")),
            s("U_delta"),
        );
        let e = mul(inner.clone(), s("X_I"));
        assert_eq!(e.divide_out_symbol("X_I"), Some(inner.clone()));
        assert_eq!(inner.divide_out_symbol("X_T"), None);
        assert_eq!(s("x").divide_out_symbol("x"), Some(Expr::Num(1.0)));
    }

    #[test]
    fn display_inserts_needed_parentheses() {
        let e = Expr::binary(
            BinOp::Sub,
            s("a"),
            Expr::binary(BinOp::Sub, s("b"), s("c")),
        );
        assert_eq!(e.to_string(), "a-(b-c)");
        let p = Expr::binary(BinOp::Pow, Expr::neg(s("x")), Expr::num(1.5));
        assert_eq!(p.to_string(), "(-x)^1.5");
        let q = Expr::neg(Expr::binary(BinOp::Add, s("x"), s("y")));
        assert_eq!(q.to_string(), "-(x+y)");
    }

    #[test]
    fn compiled_matches_tree_evaluation() {
        let e = Expr::binary(
            BinOp::Div,
            Expr::binary(BinOp::Pow, s("x"), Expr::num(1.5)),
            Expr::binary(BinOp::Add, s("y"), Expr::binary(BinOp::Pow, s("x"), Expr::num(2.0))),
        );
        let names = ["x", "y"];
        let prog = e.compile(|n| names.iter().position(|m| *m == n)).unwrap();
        let vals = [2.0f64, 0.5];
        let mut stack = Vec::new();
        let compiled = prog.eval(&vals, &mut stack);
        let tree = e
            .eval::<f64>(&|n| names.iter().position(|m| *m == n).map(|i| vals[i]))
            .unwrap();
        assert!((compiled - tree).abs() < 1e-15);
        assert!((compiled - 2f64.powf(1.5) / 4.5).abs() < 1e-15);
        assert!(e.compile(|_| None).is_err());
    }
}
