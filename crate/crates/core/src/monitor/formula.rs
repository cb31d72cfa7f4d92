use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }
}

/// Closed time interval `[a, b]` with `0 <= a <= b < inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MtlFormula {
    True,
    False,
    Atom {
        variable: String,
        op: Comparator,
        constant: f64,
    },
    Not(Box<MtlFormula>),
    And(Box<MtlFormula>, Box<MtlFormula>),
    Or(Box<MtlFormula>, Box<MtlFormula>),
    Finally(Bound, Box<MtlFormula>),
    Globally(Bound, Box<MtlFormula>),
    Until(Bound, Box<MtlFormula>, Box<MtlFormula>),
}

impl MtlFormula {
    pub fn atom(variable: &str, op: Comparator, constant: f64) -> Self {
        MtlFormula::Atom {
            variable: variable.to_string(),
            op,
            constant,
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        MtlFormula::Not(Box::new(self))
    }

    pub fn and(self, other: Self) -> Self {
        MtlFormula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Self) -> Self {
        MtlFormula::Or(Box::new(self), Box::new(other))
    }

    pub fn finally(a: f64, b: f64, phi: Self) -> Self {
        MtlFormula::Finally(Bound { a, b }, Box::new(phi))
    }

    pub fn globally(a: f64, b: f64, phi: Self) -> Self {
        MtlFormula::Globally(Bound { a, b }, Box::new(phi))
    }

    pub fn until(self, a: f64, b: f64, rhs: Self) -> Self {
        MtlFormula::Until(Bound { a, b }, Box::new(self), Box::new(rhs))
    }

    /// Dotted names referenced by atoms, in first-occurrence order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit_atoms(&mut |v| {
            if !out.contains(&v) {
                out.push(v);
            }
        });
        out
    }

    fn visit_atoms<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            MtlFormula::True | MtlFormula::False => {}
            MtlFormula::Atom { variable, .. } => f(variable),
            MtlFormula::Not(p) | MtlFormula::Finally(_, p) | MtlFormula::Globally(_, p) => p.visit_atoms(f),
            MtlFormula::And(l, r) | MtlFormula::Or(l, r) | MtlFormula::Until(_, l, r) => {
                l.visit_atoms(f);
                r.visit_atoms(f);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            MtlFormula::True | MtlFormula::False | MtlFormula::Atom { .. } => 0,
            MtlFormula::Not(p) | MtlFormula::Finally(_, p) | MtlFormula::Globally(_, p) => 1 + p.depth(),
            MtlFormula::And(l, r) | MtlFormula::Or(l, r) | MtlFormula::Until(_, l, r) => {
                1 + l.depth().max(r.depth())
            }
        }
    }
}

/// Length of trace needed for a verdict that cannot be overturned by later
/// observations.
pub fn required_horizon(formula: &MtlFormula) -> f64 {
    match formula {
        MtlFormula::True | MtlFormula::False | MtlFormula::Atom { .. } => 0.0,
        MtlFormula::Not(p) => required_horizon(p),
        MtlFormula::And(l, r) | MtlFormula::Or(l, r) => required_horizon(l).max(required_horizon(r)),
        MtlFormula::Finally(bd, p) | MtlFormula::Globally(bd, p) => bd.b + required_horizon(p),
        MtlFormula::Until(bd, l, r) => bd.b + required_horizon(l).max(required_horizon(r)),
    }
}

fn num(x: f64) -> String {
    // Debug keeps a decimal point or exponent, which the parser accepts.
    format!("{x:?}")
}

/// Fully parenthesized; parses back to the same formula.
impl fmt::Display for MtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MtlFormula::True => write!(f, "true"),
            MtlFormula::False => write!(f, "false"),
            MtlFormula::Atom { variable, op, constant } => {
                write!(f, "{variable} {} {}", op.symbol(), num(*constant))
            }
            MtlFormula::Not(p) => write!(f, "!({p})"),
            MtlFormula::And(l, r) => write!(f, "({l}) && ({r})"),
            MtlFormula::Or(l, r) => write!(f, "({l}) || ({r})"),
            MtlFormula::Finally(bd, p) => write!(f, "F[{},{}]({p})", num(bd.a), num(bd.b)),
            MtlFormula::Globally(bd, p) => write!(f, "G[{},{}]({p})", num(bd.a), num(bd.b)),
            MtlFormula::Until(bd, l, r) => write!(f, "({l}) U[{},{}] ({r})", num(bd.a), num(bd.b)),
        }
    }
}
