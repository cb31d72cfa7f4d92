//! Three-valued pointwise evaluation.
//!
//! The signal is piecewise constant and right-continuous, defined on
//! `[0, horizon]`. A temporal operator at instant `t` with bound `[a, b]`
//! inspects the instant `t + a` and every observation point in
//! `(t + a, t + b]`. Instants past the horizon are unknown.

use super::formula::{Bound, Comparator, MtlFormula};
use super::MtlError;
use crate::kernel::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Truth {
    True,
    False,
    Inconclusive,
}

impl Truth {
    fn from_bool(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn not(self) -> Self {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Inconclusive => Truth::Inconclusive,
        }
    }

    pub fn and(self, other: Self) -> Self {
        match (self, other) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Inconclusive,
        }
    }

    pub fn or(self, other: Self) -> Self {
        self.not().and(other.not()).not()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub value: Truth,
    /// Earliest witnessing (or violating) instant, when one exists.
    pub witness_time: Option<f64>,
}

impl Verdict {
    pub fn is_true(&self) -> bool {
        self.value == Truth::True
    }
}

enum Node {
    Const(bool),
    Atom { column: usize, op: Comparator, constant: f64 },
    Not(Box<Node>),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Finally(Bound, Box<Node>),
    Globally(Bound, Box<Node>),
    Until(Bound, Box<Node>, Box<Node>),
}

fn compile(f: &MtlFormula, trace: &Trace) -> Result<Node, MtlError> {
    let b = |g: &MtlFormula| compile(g, trace).map(Box::new);
    Ok(match f {
        MtlFormula::True => Node::Const(true),
        MtlFormula::False => Node::Const(false),
        MtlFormula::Atom { variable, op, constant } => Node::Atom {
            column: trace
                .column(variable)
                .ok_or_else(|| MtlError::UnknownVariable(variable.clone()))?,
            op: *op,
            constant: *constant,
        },
        MtlFormula::Not(p) => Node::Not(b(p)?),
        MtlFormula::And(l, r) => Node::And(b(l)?, b(r)?),
        MtlFormula::Or(l, r) => Node::Or(b(l)?, b(r)?),
        MtlFormula::Finally(bd, p) => Node::Finally(*bd, b(p)?),
        MtlFormula::Globally(bd, p) => Node::Globally(*bd, b(p)?),
        MtlFormula::Until(bd, l, r) => Node::Until(*bd, b(l)?, b(r)?),
    })
}

struct Signal<'a> {
    trace: &'a Trace,
    times: Vec<f64>,
    horizon: f64,
}

type Eval = (Truth, Option<f64>);

impl Signal<'_> {
    /// Indices of points strictly after `lo` and at or before `hi`.
    fn points_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.times.partition_point(|&p| p <= lo);
        let end = self.times.partition_point(|&p| p <= hi).max(start);
        start..end
    }

    /// `t + a` followed by the points in `(t + a, t + b]`.
    fn candidates(&self, t: f64, bd: Bound) -> impl Iterator<Item = f64> + '_ {
        let lo = t + bd.a;
        std::iter::once(lo).chain(self.points_in(lo, t + bd.b).map(|i| self.times[i]))
    }

    fn eval(&self, n: &Node, t: f64) -> Eval {
        match n {
            Node::Const(c) => (Truth::from_bool(*c), None),
            Node::Atom { column, op, constant } => {
                if t > self.horizon {
                    return (Truth::Inconclusive, None);
                }
                let i = self.times.partition_point(|&p| p <= t) - 1;
                let v = self.trace.points()[i].values[*column].as_f64();
                (Truth::from_bool(op.holds(v, *constant)), Some(t))
            }
            Node::Not(p) => {
                let (v, w) = self.eval(p, t);
                (v.not(), w)
            }
            Node::And(l, r) => {
                let (lv, lw) = self.eval(l, t);
                if lv == Truth::False {
                    return (Truth::False, lw);
                }
                let (rv, rw) = self.eval(r, t);
                match (lv, rv) {
                    (_, Truth::False) => (Truth::False, rw),
                    (Truth::True, Truth::True) => (Truth::True, max_opt(lw, rw)),
                    _ => (Truth::Inconclusive, None),
                }
            }
            Node::Or(l, r) => {
                let (lv, lw) = self.eval(l, t);
                if lv == Truth::True {
                    return (Truth::True, lw);
                }
                let (rv, rw) = self.eval(r, t);
                match (lv, rv) {
                    (_, Truth::True) => (Truth::True, rw),
                    (Truth::False, Truth::False) => (Truth::False, max_opt(lw, rw)),
                    _ => (Truth::Inconclusive, None),
                }
            }
            Node::Finally(bd, p) => self.search(*bd, p, t, Truth::True),
            Node::Globally(bd, p) => self.search(*bd, p, t, Truth::False),
            Node::Until(bd, l, r) => self.until(*bd, l, r, t),
        }
    }

    /// Finally (`decisive = True`) or Globally (`decisive = False`): the
    /// first candidate with the decisive value settles the operator.
    fn search(&self, bd: Bound, p: &Node, t: f64, decisive: Truth) -> Eval {
        let mut unknown = t + bd.b > self.horizon;
        for tau in self.candidates(t, bd) {
            match self.eval(p, tau).0 {
                v if v == decisive => return (decisive, Some(tau)),
                Truth::Inconclusive => unknown = true,
                _ => {}
            }
        }
        if unknown {
            (Truth::Inconclusive, None)
        } else {
            (decisive.not(), None)
        }
    }

    /// `l U[a,b] r` at `t`: some candidate `tau` satisfies `r` and `l` holds
    /// at `t` and at every point strictly between `t` and `tau`.
    fn until(&self, bd: Bound, l: &Node, r: &Node, t: f64) -> Eval {
        let after_t = self.points_in(t, f64::INFINITY);
        let mut prefix_instants = std::iter::once(t).chain(after_t.map(|i| self.times[i])).peekable();
        let mut prefix = Truth::True;
        let mut result = Truth::False;
        for tau in self.candidates(t, bd) {
            while let Some(&s) = prefix_instants.peek() {
                if s >= tau {
                    break;
                }
                prefix = prefix.and(self.eval(l, s).0);
                prefix_instants.next();
            }
            if prefix == Truth::False {
                return (result, None);
            }
            let here = self.eval(r, tau).0.and(prefix);
            if here == Truth::True {
                return (Truth::True, Some(tau));
            }
            result = result.or(here);
        }
        if t + bd.b > self.horizon {
            for s in prefix_instants {
                prefix = prefix.and(self.eval(l, s).0);
            }
            result = result.or(Truth::Inconclusive.and(prefix));
        }
        (result, None)
    }
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Evaluates `formula` at time 0 of `trace`.
pub fn evaluate(formula: &MtlFormula, trace: &Trace) -> Result<Verdict, MtlError> {
    let node = compile(formula, trace)?;
    let signal = Signal {
        trace,
        times: trace.points().iter().map(|p| p.time).collect(),
        horizon: trace.horizon(),
    };
    let (value, witness) = signal.eval(&node, 0.0);
    Ok(Verdict {
        value,
        witness_time: if value == Truth::Inconclusive { None } else { witness },
    })
}
