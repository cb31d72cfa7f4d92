mod common;

use bipsmc::expr::Value;
use bipsmc::kernel::{ObservationPoint, Trace};
use bipsmc::monitor::{evaluate, parse_formula, required_horizon, Comparator, MtlError, MtlFormula, Truth};
use bipsmc::stochastics::rng_stream;
use common::mtl_oracle::{holds, random_formula, random_trace, witness};
use proptest::prelude::*;

fn step_trace() -> Trace {
    let pt = |time, x| ObservationPoint {
        time,
        fired: String::new(),
        values: vec![Value::Int(x)],
    };
    Trace::from_parts(vec!["x".into()], vec![pt(0.0, 0), pt(5.0, 1)], 10.0).unwrap()
}

fn truth(k: Option<bool>) -> Truth {
    match k {
        Some(true) => Truth::True,
        Some(false) => Truth::False,
        None => Truth::Inconclusive,
    }
}

#[test]
fn parses_property_examples() {
    let f = parse_formula("F[0,1000](spoofed.amount > 0)").unwrap();
    assert_eq!(
        f,
        MtlFormula::finally(0.0, 1000.0, MtlFormula::atom("spoofed.amount", Comparator::Gt, 0.0))
    );
    let f = parse_formula("F[0,1e12](adversary.asset == 2)").unwrap();
    assert_eq!(required_horizon(&f), 1e12);
    assert_eq!(parse_formula("F[0,10^12](adversary.asset == 2)").unwrap(), f);
    assert_eq!(parse_formula("F[0, 1000] {spoofed.amount > 0}").unwrap(), parse_formula("F[0,1000](spoofed.amount>0)").unwrap());
}

#[test]
fn parse_errors() {
    assert!(matches!(parse_formula("F[5,2](x>0)"), Err(MtlError::BadInterval { .. })));
    assert!(matches!(parse_formula("F[-1,2](x>0)"), Err(MtlError::BadInterval { .. })));
    assert!(matches!(parse_formula("x >"), Err(MtlError::Syntax { position: 3, .. })));
    assert!(matches!(parse_formula("x > 0 )"), Err(MtlError::Syntax { position: 6, .. })));
    assert!(matches!(parse_formula("x # 0"), Err(MtlError::Syntax { position: 2, .. })));
    assert!(matches!(parse_formula(""), Err(MtlError::Syntax { .. })));
}

#[test]
fn precedence() {
    let f = parse_formula("!a > 0 || b < 1 && c == 2").unwrap();
    let a = MtlFormula::atom("a", Comparator::Gt, 0.0);
    let b = MtlFormula::atom("b", Comparator::Lt, 1.0);
    let c = MtlFormula::atom("c", Comparator::Eq, 2.0);
    assert_eq!(f, a.clone().not().or(b.clone().and(c.clone())));
    let u = parse_formula("a > 0 U[0,3] b < 1 && c == 2").unwrap();
    assert_eq!(u, a.until(0.0, 3.0, b).and(c));
}

#[test]
fn evaluation_examples() {
    let tr = step_trace();
    let v = evaluate(&parse_formula("F[0,10](x>0)").unwrap(), &tr).unwrap();
    assert_eq!((v.value, v.witness_time), (Truth::True, Some(5.0)));
    let v = evaluate(&parse_formula("F[0,4](x>0)").unwrap(), &tr).unwrap();
    assert_eq!(v.value, Truth::False);
    let v = evaluate(&parse_formula("G[0,10](x>=0)").unwrap(), &tr).unwrap();
    assert_eq!(v.value, Truth::True);
}

#[test]
fn short_trace_is_inconclusive_unless_decided() {
    let tr = step_trace();
    let v = evaluate(&parse_formula("F[0,20](x>1)").unwrap(), &tr).unwrap();
    assert_eq!((v.value, v.witness_time), (Truth::Inconclusive, None));
    let early = evaluate(&parse_formula("F[0,20](x>0)").unwrap(), &tr).unwrap();
    assert_eq!(early.value, Truth::True);
    let violated = evaluate(&parse_formula("G[0,20](x<1)").unwrap(), &tr).unwrap();
    assert_eq!((violated.value, violated.witness_time), (Truth::False, Some(5.0)));
}

#[test]
fn unknown_variable() {
    assert_eq!(
        evaluate(&parse_formula("F[0,1](y>0)").unwrap(), &step_trace()),
        Err(MtlError::UnknownVariable("y".into()))
    );
}

#[test]
fn required_horizon_examples() {
    let atom = MtlFormula::atom("x", Comparator::Gt, 0.0);
    assert_eq!(required_horizon(&atom), 0.0);
    assert_eq!(required_horizon(&MtlFormula::finally(0.0, 1000.0, atom.clone())), 1000.0);
    let nested = MtlFormula::globally(0.0, 10.0, MtlFormula::finally(0.0, 5.0, atom.clone()));
    assert_eq!(required_horizon(&nested), 15.0);
    let u = atom.clone().until(1.0, 4.0, MtlFormula::finally(0.0, 2.0, atom));
    assert_eq!(required_horizon(&u), 6.0);
}

#[test]
fn until_semantics() {
    let tr = step_trace();
    // x == 0 holds on [0, 5) and x == 1 from 5 on.
    let f = parse_formula("x == 0 U[0,10] x == 1").unwrap();
    assert_eq!(evaluate(&f, &tr).unwrap().witness_time, Some(5.0));
    let f = parse_formula("x == 1 U[0,10] x == 1").unwrap();
    assert_eq!(evaluate(&f, &tr).unwrap().value, Truth::False);
    let f = parse_formula("false U[0,10] x == 0").unwrap();
    assert_eq!(evaluate(&f, &tr).unwrap().value, Truth::True);
}

#[test]
fn agrees_with_brute_force_oracle() {
    let mut rng = rng_stream(0x3713, 0);
    for case in 0..20_000 {
        let tr = random_trace(&mut rng);
        let f = random_formula(&mut rng, 3);
        let got = evaluate(&f, &tr).unwrap();
        let want = truth(holds(&f, &tr, 0.0));
        assert_eq!(got.value, want, "case {case}: {f} on {tr:?}");
        if matches!(f, MtlFormula::Finally(..) | MtlFormula::Globally(..)) && want != Truth::Inconclusive {
            assert_eq!(got.witness_time, witness(&f, &tr), "case {case}: {f}");
        }
    }
}

#[test]
fn verdict_conclusive_past_required_horizon() {
    let mut rng = rng_stream(0x77, 0);
    for _ in 0..5000 {
        let tr = random_trace(&mut rng);
        let f = random_formula(&mut rng, 3);
        if tr.horizon() >= required_horizon(&f) {
            assert_ne!(evaluate(&f, &tr).unwrap().value, Truth::Inconclusive, "{f}");
        }
    }
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    any::<u64>().prop_map(|seed| random_trace(&mut rng_stream(seed, 1)))
}

fn arb_formula() -> impl Strategy<Value = MtlFormula> {
    any::<u64>().prop_map(|seed| random_formula(&mut rng_stream(seed, 2), 3))
}

proptest! {
    #[test]
    fn duality(tr in arb_trace(), phi in arb_formula(), a in 0u8..4, w in 0u8..4) {
        let (a, b) = (a as f64, (a + w) as f64);
        let lhs = evaluate(&MtlFormula::finally(a, b, phi.clone()).not(), &tr).unwrap().value;
        let rhs = evaluate(&MtlFormula::globally(a, b, phi.not()), &tr).unwrap().value;
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn widening_finally_keeps_truth(tr in arb_trace(), phi in arb_formula(), b in 0u8..5, extra in 0u8..5) {
        let f = MtlFormula::finally(0.0, b as f64, phi.clone());
        if evaluate(&f, &tr).unwrap().value == Truth::True {
            let g = MtlFormula::finally(0.0, (b + extra) as f64, phi);
            prop_assert_eq!(evaluate(&g, &tr).unwrap().value, Truth::True);
        }
    }

    #[test]
    fn display_round_trips(phi in arb_formula()) {
        prop_assert_eq!(parse_formula(&phi.to_string()).unwrap(), phi);
    }
}
