//! Typed expressions used for guards, updates, timing bounds and
//! state-dependent probabilities.
//!
//! An [`Expr`] is generic over its reference type. Models are written with
//! `Expr<String>` (names such as `balance` inside a component or
//! `customer.balance` at the compound level); [`crate::kernel::build_compound`]
//! resolves those names into slots so the simulator never hashes strings.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Runtime value of a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Int,
    Real,
    Bool,
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Int(_) => ValueKind::Int,
            Value::Real(_) => ValueKind::Real,
            Value::Bool(_) => ValueKind::Bool,
        }
    }

    /// Numeric view; booleans map to 0/1 so monitors can compare flags.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Int(i) => i as f64,
            Value::Real(r) => r,
            Value::Bool(b) => {
                if b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    /// Converts a sampled real into a value of the given kind.
    /// Integers round to nearest; booleans are `x >= 0.5`.
    pub fn from_sample(kind: ValueKind, x: f64) -> Value {
        match kind {
            ValueKind::Int => Value::Int(x.round() as i64),
            ValueKind::Real => Value::Real(x),
            ValueKind::Bool => Value::Bool(x >= 0.5),
        }
    }

    /// Coerces into `kind` when the conversion is lossless by typing rules
    /// (only int -> real widening).
    pub fn coerce(self, kind: ValueKind) -> Option<Value> {
        match (self, kind) {
            (Value::Int(i), ValueKind::Real) => Some(Value::Real(i as f64)),
            (v, k) if v.kind() == k => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::Int => "int",
            ValueKind::Real => "real",
            ValueKind::Bool => "bool",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

/// Built-in numeric functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Func {
    Pow,
    Exp,
    Ln,
    Min,
    Max,
    Abs,
}

impl Func {
    fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Min | Func::Max => 2,
            Func::Exp | Func::Ln | Func::Abs => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Pow => "pow",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Min => "min",
            Func::Max => "max",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr<N = String> {
    Lit(Value),
    Ref(N),
    Unary(UnOp, Box<Expr<N>>),
    Binary(BinOp, Box<Expr<N>>, Box<Expr<N>>),
    Call(Func, Vec<Expr<N>>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("operator {op} cannot take {lhs} and {rhs}")]
    Operands {
        op: String,
        lhs: ValueKind,
        rhs: ValueKind,
    },
    #[error("operator {op} cannot take {operand}")]
    Operand { op: String, operand: ValueKind },
    #[error("{func} expects {expected} arguments, got {got}")]
    Arity {
        func: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("expected {expected}, found {found}")]
    Expected {
        expected: ValueKind,
        found: ValueKind,
    },
}

// Small builders so model code reads like arithmetic.

pub fn int(i: i64) -> Expr {
    Expr::Lit(Value::Int(i))
}

pub fn real(r: f64) -> Expr {
    Expr::Lit(Value::Real(r))
}

pub fn boolean(b: bool) -> Expr {
    Expr::Lit(Value::Bool(b))
}

pub fn var(name: &str) -> Expr {
    Expr::Ref(name.to_string())
}

pub fn call(func: Func, args: Vec<Expr>) -> Expr {
    Expr::Call(func, args)
}

impl<N> Expr<N> {
    pub fn bin(op: BinOp, lhs: Expr<N>, rhs: Expr<N>) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }
    pub fn add(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Add, self, rhs)
    }
    pub fn sub(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Sub, self, rhs)
    }
    pub fn mul(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Mul, self, rhs)
    }
    pub fn div(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Div, self, rhs)
    }
    pub fn eq(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Eq, self, rhs)
    }
    pub fn ne(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Ne, self, rhs)
    }
    pub fn lt(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Lt, self, rhs)
    }
    pub fn le(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Le, self, rhs)
    }
    pub fn gt(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Gt, self, rhs)
    }
    pub fn ge(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Ge, self, rhs)
    }
    pub fn and(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::And, self, rhs)
    }
    pub fn or(self, rhs: Expr<N>) -> Self {
        Self::bin(BinOp::Or, self, rhs)
    }
    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Expr::Unary(UnOp::Not, Box::new(self))
    }

    /// Literal value, if this is a constant expression.
    pub fn as_literal(&self) -> Option<Value> {
        match self {
            Expr::Lit(v) => Some(*v),
            _ => None,
        }
    }

    /// Rewrites every reference, failing on the first unresolved one.
    pub fn try_map_refs<M, E>(&self, f: &mut impl FnMut(&N) -> Result<M, E>) -> Result<Expr<M>, E> {
        Ok(match self {
            Expr::Lit(v) => Expr::Lit(*v),
            Expr::Ref(n) => Expr::Ref(f(n)?),
            Expr::Unary(op, e) => Expr::Unary(*op, Box::new(e.try_map_refs(f)?)),
            Expr::Binary(op, l, r) => Expr::Binary(
                *op,
                Box::new(l.try_map_refs(f)?),
                Box::new(r.try_map_refs(f)?),
            ),
            Expr::Call(func, args) => Expr::Call(
                *func,
                args.iter()
                    .map(|a| a.try_map_refs(f))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn refs(&self) -> Vec<&N> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a N>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Ref(n) => out.push(n),
            Expr::Unary(_, e) => e.collect_refs(out),
            Expr::Binary(_, l, r) => {
                l.collect_refs(out);
                r.collect_refs(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_refs(out)),
        }
    }

    /// Infers the result kind, resolving references through `scope`.
    pub fn type_check(
        &self,
        scope: &impl Fn(&N) -> Option<ValueKind>,
    ) -> Result<ValueKind, TypeError>
    where
        N: fmt::Display,
    {
        use ValueKind::*;
        match self {
            Expr::Lit(v) => Ok(v.kind()),
            Expr::Ref(n) => scope(n).ok_or_else(|| TypeError::UnboundName(n.to_string())),
            Expr::Unary(op, e) => {
                let k = e.type_check(scope)?;
                match (op, k) {
                    (UnOp::Neg, Int | Real) => Ok(k),
                    (UnOp::Not, Bool) => Ok(Bool),
                    _ => Err(TypeError::Operand {
                        op: format!("{op:?}"),
                        operand: k,
                    }),
                }
            }
            Expr::Binary(op, l, r) => {
                let lk = l.type_check(scope)?;
                let rk = r.type_check(scope)?;
                let bad = || TypeError::Operands {
                    op: format!("{op:?}"),
                    lhs: lk,
                    rhs: rk,
                };
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => match (lk, rk) {
                        (Int, Int) => Ok(Int),
                        (Int | Real, Int | Real) => Ok(Real),
                        _ => Err(bad()),
                    },
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => match (lk, rk) {
                        (Int | Real, Int | Real) => Ok(Bool),
                        _ => Err(bad()),
                    },
                    BinOp::Eq | BinOp::Ne => match (lk, rk) {
                        (Int | Real, Int | Real) | (Bool, Bool) => Ok(Bool),
                        _ => Err(bad()),
                    },
                    BinOp::And | BinOp::Or => match (lk, rk) {
                        (Bool, Bool) => Ok(Bool),
                        _ => Err(bad()),
                    },
                }
            }
            Expr::Call(func, args) => {
                if args.len() != func.arity() {
                    return Err(TypeError::Arity {
                        func: func.name(),
                        expected: func.arity(),
                        got: args.len(),
                    });
                }
                let kinds = args
                    .iter()
                    .map(|a| a.type_check(scope))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Some(&k) = kinds.iter().find(|k| **k == Bool) {
                    return Err(TypeError::Operand {
                        op: func.name().to_string(),
                        operand: k,
                    });
                }
                let all_int = kinds.iter().all(|k| *k == Int);
                Ok(match func {
                    Func::Min | Func::Max | Func::Abs if all_int => Int,
                    _ => Real,
                })
            }
        }
    }

    /// Evaluates with `lookup` resolving references.
    pub fn eval(&self, lookup: &impl Fn(&N) -> Option<Value>) -> Result<Value, EvalError>
    where
        N: fmt::Display,
    {
        match self {
            Expr::Lit(v) => Ok(*v),
            Expr::Ref(n) => lookup(n).ok_or_else(|| EvalError::UnboundName(n.to_string())),
            Expr::Unary(op, e) => {
                let v = e.eval(lookup)?;
                match (op, v) {
                    (UnOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or(EvalError::Overflow),
                    (UnOp::Neg, Value::Real(r)) => Ok(Value::Real(-r)),
                    (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                    _ => Err(EvalError::TypeMismatch(format!("{op:?} applied to {}", v.kind()))),
                }
            }
            Expr::Binary(op, l, r) => {
                // Boolean connectives short-circuit.
                if matches!(op, BinOp::And | BinOp::Or) {
                    let lb = expect_bool(l.eval(lookup)?)?;
                    return match (op, lb) {
                        (BinOp::And, false) => Ok(Value::Bool(false)),
                        (BinOp::Or, true) => Ok(Value::Bool(true)),
                        _ => Ok(Value::Bool(expect_bool(r.eval(lookup)?)?)),
                    };
                }
                binary(*op, l.eval(lookup)?, r.eval(lookup)?)
            }
            Expr::Call(func, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(lookup))
                    .collect::<Result<Vec<_>, _>>()?;
                apply(*func, &vals)
            }
        }
    }
}

fn expect_bool(v: Value) -> Result<bool, EvalError> {
    v.as_bool()
        .ok_or_else(|| EvalError::TypeMismatch(format!("expected bool, found {}", v.kind())))
}

fn numeric(v: Value) -> Result<f64, EvalError> {
    match v {
        Value::Int(i) => Ok(i as f64),
        Value::Real(r) => Ok(r),
        Value::Bool(_) => Err(EvalError::TypeMismatch("expected number, found bool".into())),
    }
}

fn binary(op: BinOp, l: Value, r: Value) -> Result<Value, EvalError> {
    use Value::*;
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
            if let (Int(a), Int(b)) = (l, r) {
                let out = match op {
                    BinOp::Add => a.checked_add(b),
                    BinOp::Sub => a.checked_sub(b),
                    BinOp::Mul => a.checked_mul(b),
                    _ => {
                        if b == 0 {
                            return Err(EvalError::DivisionByZero);
                        }
                        a.checked_div(b)
                    }
                };
                return out.map(Int).ok_or(EvalError::Overflow);
            }
            let (a, b) = (numeric(l)?, numeric(r)?);
            Ok(Real(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                _ => {
                    if b == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    a / b
                }
            }))
        }
        BinOp::Eq | BinOp::Ne => {
            let same = match (l, r) {
                (Bool(a), Bool(b)) => a == b,
                (Int(a), Int(b)) => a == b,
                (Bool(_), _) | (_, Bool(_)) => {
                    return Err(EvalError::TypeMismatch("bool compared with number".into()))
                }
                _ => numeric(l)? == numeric(r)?,
            };
            Ok(Bool(if op == BinOp::Eq { same } else { !same }))
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let ord = match (l, r) {
                (Int(a), Int(b)) => a.partial_cmp(&b),
                _ => numeric(l)?.partial_cmp(&numeric(r)?),
            };
            let Some(ord) = ord else {
                return Ok(Bool(false));
            };
            Ok(Bool(match op {
                BinOp::Lt => ord.is_lt(),
                BinOp::Le => ord.is_le(),
                BinOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinOp::And | BinOp::Or => unreachable!("handled by short-circuit path"),
    }
}

fn apply(func: Func, args: &[Value]) -> Result<Value, EvalError> {
    if args.len() != func.arity() {
        return Err(EvalError::TypeMismatch(format!(
            "{} expects {} arguments",
            func.name(),
            func.arity()
        )));
    }
    if let (Func::Min | Func::Max, [Value::Int(a), Value::Int(b)]) = (func, args) {
        return Ok(Value::Int(if func == Func::Min { *a.min(b) } else { *a.max(b) }));
    }
    if let (Func::Abs, [Value::Int(a)]) = (func, args) {
        return a.checked_abs().map(Value::Int).ok_or(EvalError::Overflow);
    }
    let x = numeric(args[0])?;
    Ok(Value::Real(match func {
        Func::Pow => x.powf(numeric(args[1])?),
        Func::Exp => x.exp(),
        Func::Ln => x.ln(),
        Func::Min => x.min(numeric(args[1])?),
        Func::Max => x.max(numeric(args[1])?),
        Func::Abs => x.abs(),
    }))
}

impl<N: fmt::Display> fmt::Display for Expr<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Ref(n) => write!(f, "{n}"),
            Expr::Unary(UnOp::Neg, e) => write!(f, "-({e})"),
            Expr::Unary(UnOp::Not, e) => write!(f, "!({e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Eq => "==",
                    BinOp::Ne => "!=",
                    BinOp::Lt => "<",
                    BinOp::Le => "<=",
                    BinOp::Gt => ">",
                    BinOp::Ge => ">=",
                    BinOp::And => "&&",
                    BinOp::Or => "||",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Evaluates a name-based expression against a `(name, value)` environment.
pub fn eval_expr(expr: &Expr, env: &[(&str, Value)]) -> Result<Value, EvalError> {
    expr.eval(&|n: &String| env.iter().find(|(k, _)| *k == n.as_str()).map(|(_, v)| *v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_of_locals() {
        let e = var("balance").gt(var("price"));
        let env = [("balance", Value::Int(100)), ("price", Value::Int(30))];
        assert_eq!(eval_expr(&e, &env), Ok(Value::Bool(true)));
    }

    #[test]
    fn additive_identity() {
        let e = var("x").add(int(0));
        assert_eq!(eval_expr(&e, &[("x", Value::Int(5))]), Ok(Value::Int(5)));
    }

    #[test]
    fn contradiction_is_false() {
        let e = var("a").and(var("a").not());
        for a in [true, false] {
            assert_eq!(eval_expr(&e, &[("a", Value::Bool(a))]), Ok(Value::Bool(false)));
        }
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(
            eval_expr(&int(1).div(int(0)), &[]),
            Err(EvalError::DivisionByZero)
        );
        assert_eq!(
            eval_expr(&real(1.0).div(var("z")), &[("z", Value::Real(0.0))]),
            Err(EvalError::DivisionByZero)
        );
    }

    #[test]
    fn unbound_name() {
        assert_eq!(
            eval_expr(&var("nope"), &[]),
            Err(EvalError::UnboundName("nope".into()))
        );
    }

    #[test]
    fn integer_division_truncates_and_mixed_promotes() {
        assert_eq!(eval_expr(&int(7).div(int(2)), &[]), Ok(Value::Int(3)));
        assert_eq!(eval_expr(&int(7).div(real(2.0)), &[]), Ok(Value::Real(3.5)));
    }

    #[test]
    fn functions() {
        let e = call(Func::Pow, vec![real(2.0), int(-3)]);
        assert_eq!(eval_expr(&e, &[]), Ok(Value::Real(0.125)));
        let e = call(Func::Min, vec![int(4), int(2)]);
        assert_eq!(eval_expr(&e, &[]), Ok(Value::Int(2)));
    }

    #[test]
    fn type_checking() {
        let scope = |n: &String| match n.as_str() {
            "b" => Some(ValueKind::Bool),
            "i" => Some(ValueKind::Int),
            "r" => Some(ValueKind::Real),
            _ => None,
        };
        assert_eq!(var("i").add(var("r")).type_check(&scope), Ok(ValueKind::Real));
        assert_eq!(var("i").gt(int(0)).and(var("b")).type_check(&scope), Ok(ValueKind::Bool));
        assert!(var("b").add(int(1)).type_check(&scope).is_err());
        assert!(var("i").and(var("b")).type_check(&scope).is_err());
        assert_eq!(
            var("q").type_check(&scope),
            Err(TypeError::UnboundName("q".into()))
        );
        assert!(call(Func::Exp, vec![]).type_check(&scope).is_err());
    }
}
