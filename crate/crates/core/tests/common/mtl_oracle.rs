//! Brute-force reference semantics for the MTL monitor, plus a seeded
//! generator of small traces and formulas.
//!
//! Deliberately naive: instants are found by scanning the whole trace and
//! each operator is spelled out from its definition, with no early exits.

#![allow(dead_code)]

use bipsmc::expr::Value;
use bipsmc::kernel::{ObservationPoint, Trace};
use bipsmc::monitor::{Bound, Comparator, MtlFormula};
use rand::seq::SliceRandom;
use rand::Rng;

pub type K = Option<bool>;

fn k_and(a: K, b: K) -> K {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

fn k_or(a: K, b: K) -> K {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

fn k_all(xs: impl IntoIterator<Item = K>) -> K {
    xs.into_iter().fold(Some(true), k_and)
}

fn k_any(xs: impl IntoIterator<Item = K>) -> K {
    xs.into_iter().fold(Some(false), k_or)
}

fn value_at(trace: &Trace, name: &str, t: f64) -> f64 {
    let col = trace.variables().iter().position(|v| v == name).expect("known variable");
    let mut v = None;
    for p in trace.points() {
        if p.time <= t {
            v = Some(p.values[col].as_f64());
        }
    }
    v.expect("t >= 0")
}

fn window_instants(trace: &Trace, t: f64, bd: &Bound) -> Vec<f64> {
    let lo = t + bd.a;
    let hi = t + bd.b;
    let mut out = vec![lo];
    for p in trace.points() {
        if p.time > lo && p.time <= hi {
            out.push(p.time);
        }
    }
    out
}

pub fn holds(f: &MtlFormula, trace: &Trace, t: f64) -> K {
    let h = trace.horizon();
    match f {
        MtlFormula::True => Some(true),
        MtlFormula::False => Some(false),
        MtlFormula::Atom { variable, op, constant } => {
            if t > h {
                return None;
            }
            let v = value_at(trace, variable, t);
            Some(match op {
                Comparator::Eq => v == *constant,
                Comparator::Ne => v != *constant,
                Comparator::Lt => v < *constant,
                Comparator::Le => v <= *constant,
                Comparator::Gt => v > *constant,
                Comparator::Ge => v >= *constant,
            })
        }
        MtlFormula::Not(p) => holds(p, trace, t).map(|b| !b),
        MtlFormula::And(l, r) => k_and(holds(l, trace, t), holds(r, trace, t)),
        MtlFormula::Or(l, r) => k_or(holds(l, trace, t), holds(r, trace, t)),
        MtlFormula::Finally(bd, p) => {
            let seen = k_any(window_instants(trace, t, bd).iter().map(|&s| holds(p, trace, s)));
            if t + bd.b > h && seen != Some(true) {
                None
            } else {
                seen
            }
        }
        MtlFormula::Globally(bd, p) => {
            let seen = k_all(window_instants(trace, t, bd).iter().map(|&s| holds(p, trace, s)));
            if t + bd.b > h && seen != Some(false) {
                None
            } else {
                seen
            }
        }
        MtlFormula::Until(bd, l, r) => {
            let mut prefix_pool = vec![t];
            prefix_pool.extend(trace.points().iter().map(|p| p.time).filter(|&p| p > t));
            let mut terms: Vec<K> = window_instants(trace, t, bd)
                .iter()
                .map(|&tau| {
                    let before = k_all(prefix_pool.iter().filter(|&&s| s < tau).map(|&s| holds(l, trace, s)));
                    k_and(holds(r, trace, tau), before)
                })
                .collect();
            if t + bd.b > h {
                let all = k_all(prefix_pool.iter().map(|&s| holds(l, trace, s)));
                terms.push(k_and(None, all));
            }
            k_any(terms)
        }
    }
}

/// First instant of the top-level window where `F`/`U` is witnessed or `G`
/// is violated.
pub fn witness(f: &MtlFormula, trace: &Trace) -> Option<f64> {
    match f {
        MtlFormula::Finally(bd, p) => window_instants(trace, 0.0, bd)
            .into_iter()
            .find(|&s| holds(p, trace, s) == Some(true)),
        MtlFormula::Globally(bd, p) => window_instants(trace, 0.0, bd)
            .into_iter()
            .find(|&s| holds(p, trace, s) == Some(false)),
        _ => None,
    }
}

const STEPS: [f64; 5] = [0.5, 1.0, 1.5, 2.0, 3.0];
const BOUNDS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 3.0];

pub fn random_trace<R: Rng>(rng: &mut R) -> Trace {
    let n = rng.gen_range(1..=6);
    let mut t = 0.0;
    let mut points = Vec::new();
    for i in 0..n {
        if i > 0 {
            t += *STEPS.choose(rng).unwrap();
        }
        points.push(ObservationPoint {
            time: t,
            fired: format!("e{i}"),
            values: vec![Value::Int(rng.gen_range(0..3)), Value::Int(rng.gen_range(0..3))],
        });
    }
    let horizon = t + [0.0, 0.5, 1.0, 2.0, 5.0].choose(rng).unwrap();
    Trace::from_parts(vec!["x".into(), "y".into()], points, horizon).unwrap()
}

fn random_bound<R: Rng>(rng: &mut R) -> (f64, f64) {
    let a = *BOUNDS.choose(rng).unwrap();
    let b = a + *BOUNDS.choose(rng).unwrap();
    (a, b)
}

pub fn random_formula<R: Rng>(rng: &mut R, depth: usize) -> MtlFormula {
    if depth == 0 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..12) {
            0 => MtlFormula::True,
            1 => MtlFormula::False,
            _ => {
                let ops = [
                    Comparator::Eq,
                    Comparator::Ne,
                    Comparator::Lt,
                    Comparator::Le,
                    Comparator::Gt,
                    Comparator::Ge,
                ];
                MtlFormula::atom(
                    ["x", "y"].choose(rng).unwrap(),
                    *ops.choose(rng).unwrap(),
                    rng.gen_range(0..3) as f64,
                )
            }
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..6) {
        0 => random_formula(rng, d).not(),
        1 => random_formula(rng, d).and(random_formula(rng, d)),
        2 => random_formula(rng, d).or(random_formula(rng, d)),
        3 => {
            let (a, b) = random_bound(rng);
            MtlFormula::finally(a, b, random_formula(rng, d))
        }
        4 => {
            let (a, b) = random_bound(rng);
            MtlFormula::globally(a, b, random_formula(rng, d))
        }
        _ => {
            let (a, b) = random_bound(rng);
            random_formula(rng, d).until(a, b, random_formula(rng, d))
        }
    }
}
