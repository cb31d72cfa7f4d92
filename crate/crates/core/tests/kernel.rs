use bipsmc::corpus::{purchasing_model, PurchaseParams};
use bipsmc::expr::{int, real, var, Value};
use bipsmc::kernel::{
    build_compound, AtomicComponentDef, BuildError, CompoundModel, ConnectorDef, Interval, PriorityRule, SimError,
    StepOutcome, Trace, TransitionDef,
};
use bipsmc::stochastics::{rng_stream, Distribution};

fn single(component: AtomicComponentDef, connectors: Vec<ConnectorDef>) -> CompoundModel {
    build_compound(vec![("x".into(), component)], connectors, vec![]).unwrap()
}

fn fired_names(model: &CompoundModel, state: &bipsmc::kernel::SimState) -> Vec<String> {
    model
        .enabled_interactions(state)
        .unwrap()
        .iter()
        .map(|e| model.interaction_name(e.connector).to_string())
        .collect()
}

#[test]
fn purchasing_model_is_valid() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    assert_eq!(m.instance_count(), 2);
    assert_eq!(m.connectors().len(), 2);
}

#[test]
fn purchase_moves_price_once() {
    let params = PurchaseParams {
        goods: 1,
        ..PurchaseParams::default()
    };
    let m = purchasing_model(&params).unwrap();
    for seed in 0..20 {
        let tr = m.simulate(100.0, &mut rng_stream(seed, 0)).unwrap();
        assert_eq!(tr.final_value("customer.balance"), Some(Value::Int(70)));
        assert_eq!(tr.final_value("seller.balance"), Some(Value::Int(30)));
    }
}

#[test]
fn empty_model_yields_single_point() {
    let m = build_compound(vec![], vec![], vec![]).unwrap();
    let tr = m.simulate(10.0, &mut rng_stream(0, 0)).unwrap();
    assert_eq!(tr.points().len(), 1);
    assert_eq!(tr.points()[0].time, 0.0);
    assert!(m.enabled_interactions(&m.initial_state()).unwrap().is_empty());
}

#[test]
fn unknown_port_is_reported() {
    let c = AtomicComponentDef::new("C", &["s"]).ports(&["process"]);
    let errs = build_compound(
        vec![("customer".into(), c)],
        vec![ConnectorDef::new("pay", &[("customer", "pay")])],
        vec![],
    )
    .unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, BuildError::UnknownPort { port, .. } if port == "pay")));
}

#[test]
fn validation_errors() {
    let c = || AtomicComponentDef::new("C", &["s"]).var("n", Value::Int(0)).ports(&["p"]);
    let errs = build_compound(vec![("a".into(), c()), ("a".into(), c())], vec![], vec![]).unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, BuildError::DuplicateInstanceId(_))));

    let errs = build_compound(vec![("a".into(), c())], vec![ConnectorDef::new("k", &[("b", "p")])], vec![])
        .unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, BuildError::UnknownInstance { .. })));

    let bad_guard = c().transition(TransitionDef::new("t", "s", "s").guard(var("n").add(int(1))));
    let errs = build_compound(vec![("a".into(), bad_guard)], vec![], vec![]).unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, BuildError::TypeError { .. })));

    let errs = build_compound(vec![("a".into(), c())], vec![], vec![PriorityRule::new("x", "y")]).unwrap_err();
    assert!(errs.iter().any(|e| matches!(e, BuildError::DanglingPriority { .. })));

    let bad_window = c().transition(TransitionDef::new("t", "s", "s").timing(Interval::new(5.0, 2.0)));
    assert!(build_compound(vec![("a".into(), bad_window)], vec![], vec![]).is_err());
}

#[test]
fn priority_prefers_receive_while_in_stock() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    let mut s = m.initial_state();
    s.set_location(&m, "customer", "c1").unwrap();
    s.set_location(&m, "seller", "s1").unwrap();
    assert_eq!(s.value(&m, "seller.goods"), Some(Value::Int(3)));
    assert_eq!(fired_names(&m, &s), vec!["receive"]);

    s.set_value(&m, "seller.goods", Value::Int(0)).unwrap();
    let mut names = fired_names(&m, &s);
    names.sort();
    assert_eq!(names, vec!["customer.done", "receive", "seller.done"]);
}

#[test]
fn guard_blocks_process_when_poor() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    let mut s = m.initial_state();
    assert_eq!(fired_names(&m, &s), vec!["process"]);
    s.set_value(&m, "customer.balance", Value::Int(10)).unwrap();
    assert!(fired_names(&m, &s).is_empty());
}

#[test]
fn degenerate_window_fires_on_time() {
    let c = AtomicComponentDef::new("C", &["a", "b"])
        .transition(TransitionDef::new("go", "a", "b").timing(Interval::exactly(3.0)));
    let m = single(c, vec![]);
    match m.step(&m.initial_state(), &mut rng_stream(1, 0)).unwrap() {
        StepOutcome::Fired { state, point } => {
            assert_eq!(point.time, 3.0);
            assert_eq!(point.fired, "x.go");
            assert_eq!(state.location(&m, "x"), Some("b"));
        }
        StepOutcome::Quiescent => panic!("expected a firing"),
    }
}

#[test]
fn earliest_window_wins() {
    let c = AtomicComponentDef::new("C", &["a", "early", "late"])
        .transition(TransitionDef::new("late", "a", "late").timing(Interval::exactly(5.0)))
        .transition(TransitionDef::new("early", "a", "early").timing(Interval::immediate()));
    let m = single(c, vec![]);
    for seed in 0..50 {
        let StepOutcome::Fired { point, .. } = m.step(&m.initial_state(), &mut rng_stream(seed, 0)).unwrap() else {
            panic!()
        };
        assert_eq!(point.fired, "x.early");
    }
}

#[test]
fn ties_are_broken_both_ways() {
    let c = AtomicComponentDef::new("C", &["a", "l", "r"])
        .transition(TransitionDef::new("left", "a", "l").timing(Interval::exactly(1.0)))
        .transition(TransitionDef::new("right", "a", "r").timing(Interval::exactly(1.0)));
    let m = single(c, vec![]);
    let lefts = (0..400)
        .filter(|&s| {
            let StepOutcome::Fired { point, .. } = m.step(&m.initial_state(), &mut rng_stream(s, 0)).unwrap() else {
                panic!()
            };
            point.fired == "x.left"
        })
        .count();
    assert!((140..=260).contains(&lefts), "{lefts}");
}

fn gated_loop(p: f64) -> CompoundModel {
    // Ping-pong between two states: a self-loop would not restart its window.
    let c = ["ping", "pong"].iter().zip(["pong", "ping"]).fold(
        AtomicComponentDef::new("C", &["ping", "pong"])
            .var("hits", Value::Int(0))
            .var("tries", Value::Int(0))
            .ports(&["p"]),
        |c, (from, to)| {
            c.transition(
                TransitionDef::new("t", from, to)
                    .on_port("p")
                    .timing(Interval::exactly(1.0))
                    .update("tries", var("tries").add(int(1))),
            )
        },
    );
    let k = ConnectorDef::new("k", &[("x", "p")])
        .action("x.hits", var("x.hits").add(int(1)))
        .gate(Distribution::bernoulli(p).unwrap());
    single(c, vec![k])
}

#[test]
fn degenerate_gates() {
    for (p, hits) in [(1.0, 1000), (0.0, 0)] {
        let m = gated_loop(p);
        let mut s = m.initial_state();
        let mut rng = rng_stream(4, 0);
        for _ in 0..1000 {
            let StepOutcome::Fired { state, point } = m.step(&s, &mut rng).unwrap() else {
                panic!()
            };
            assert_eq!(point.fired.ends_with(":failed"), p == 0.0);
            s = state;
        }
        assert_eq!(s.value(&m, "x.hits"), Some(Value::Int(hits)));
        // A failed gate still completes the participants' transitions, but
        // skips their updates along with the actions.
        assert_eq!(s.value(&m, "x.tries"), Some(Value::Int(hits)));
        assert_eq!(s.now(), 1000.0);
    }
}

#[test]
fn simulation_is_deterministic() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    let a = m.simulate(50.0, &mut rng_stream(77, 3)).unwrap();
    let b = m.simulate(50.0, &mut rng_stream(77, 3)).unwrap();
    assert_eq!(a, b);
    let c = m.simulate(50.0, &mut rng_stream(77, 4)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn times_strictly_increase() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    for seed in 0..100 {
        let tr = m.simulate(50.0, &mut rng_stream(seed, 0)).unwrap();
        assert_eq!(tr.points()[0].fired, "init");
        for w in tr.points().windows(2) {
            assert!(w[0].time < w[1].time);
        }
        assert!(tr.last().time <= 50.0);
    }
}

#[test]
fn livelock_hits_step_limit() {
    let c = AtomicComponentDef::new("C", &["s"]).transition(TransitionDef::new("spin", "s", "s"));
    let m = single(c, vec![]);
    let err = m.simulate_with_limit(1.0, &mut rng_stream(0, 0), 1000).unwrap_err();
    assert_eq!(err, SimError::StepLimitExceeded(1000));
}

#[test]
fn division_by_zero_surfaces() {
    let c = AtomicComponentDef::new("C", &["a", "b"])
        .var("n", Value::Int(1))
        .var("z", Value::Int(0))
        .transition(TransitionDef::new("t", "a", "b").update("n", var("n").div(var("z"))));
    let m = single(c, vec![]);
    assert!(matches!(
        m.simulate(10.0, &mut rng_stream(0, 0)),
        Err(SimError::Eval { .. })
    ));
}

#[test]
fn non_positive_horizon_rejected() {
    let m = build_compound(vec![], vec![], vec![]).unwrap();
    assert!(matches!(m.simulate(0.0, &mut rng_stream(0, 0)), Err(SimError::BadHorizon(_))));
}

#[test]
fn sampled_delay_drives_window() {
    let c = AtomicComponentDef::new("C", &["a", "b", "c"])
        .var("d", Value::Real(0.0))
        .transition(
            TransitionDef::new("draw", "a", "b").outcome(Distribution::uniform(2.0, 4.0).unwrap(), "d"),
        )
        .transition(TransitionDef::new("wait", "b", "c").timing(Interval::at(var("d"))));
    let m = single(c, vec![]);
    for seed in 0..30 {
        let tr = m.simulate(10.0, &mut rng_stream(seed, 0)).unwrap();
        let d = tr.final_value("x.d").unwrap().as_f64();
        assert_eq!(tr.last().time, d);
        assert!((2.0..=4.0).contains(&d));
    }
}

#[test]
fn clocks_measure_time_since_reset() {
    let c = AtomicComponentDef::new("C", &["a", "b", "c"])
        .clock("k")
        .var("seen", Value::Real(-1.0))
        .transition(TransitionDef::new("first", "a", "b").timing(Interval::exactly(2.0)).reset("k"))
        .transition(
            TransitionDef::new("second", "b", "c")
                .timing(Interval::exactly(3.0))
                .update("seen", var("k")),
        );
    let m = single(c, vec![]);
    let tr = m.simulate(10.0, &mut rng_stream(0, 0)).unwrap();
    assert_eq!(tr.final_value("x.seen"), Some(Value::Real(3.0)));
}

#[test]
fn simultaneous_events_merge() {
    let c = AtomicComponentDef::new("C", &["a", "b", "c"])
        .transition(TransitionDef::new("one", "a", "b").timing(Interval::exactly(1.0)))
        .transition(TransitionDef::new("two", "b", "c"));
    let m = single(c, vec![]);
    let tr = m.simulate(10.0, &mut rng_stream(0, 0)).unwrap();
    assert_eq!(tr.points().len(), 2);
    assert_eq!(tr.points()[1].fired, "x.one;x.two");
}

#[test]
fn connector_window_relative_to_latest_entry() {
    let a = AtomicComponentDef::new("A", &["s0", "s1", "s2"])
        .ports(&["sync"])
        .transition(TransitionDef::new("move", "s0", "s1").timing(Interval::exactly(4.0)))
        .transition(TransitionDef::new("sync", "s1", "s2").on_port("sync"));
    let b = AtomicComponentDef::new("B", &["t0", "t1"])
        .ports(&["sync"])
        .transition(TransitionDef::new("sync", "t0", "t1").on_port("sync"));
    let m = build_compound(
        vec![("a".into(), a), ("b".into(), b)],
        vec![ConnectorDef::new("sync", &[("a", "sync"), ("b", "sync")]).timing(Interval::exactly(1.5))],
        vec![],
    )
    .unwrap();
    let tr = m.simulate(10.0, &mut rng_stream(0, 0)).unwrap();
    assert_eq!(tr.last().time, 5.5);
    assert_eq!(tr.last().fired, "sync");
}

#[test]
fn real_variables_accept_int_assignments() {
    let c = AtomicComponentDef::new("C", &["a", "b"])
        .var("r", Value::Real(0.5))
        .transition(TransitionDef::new("t", "a", "b").update("r", int(2)));
    let m = single(c, vec![]);
    let tr = m.simulate(1.0, &mut rng_stream(0, 0)).unwrap();
    assert_eq!(tr.final_value("x.r"), Some(Value::Real(2.0)));
    let _ = real(0.0);
}

#[test]
fn trace_csv_round_trip() {
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    let tr = m.simulate(40.0, &mut rng_stream(5, 0)).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("time,fired,customer.balance,customer.price,customer.transfer,seller.balance,seller.goods"));
    let back = Trace::read_csv(buf.as_slice(), 40.0).unwrap();
    assert_eq!(back, tr);
}

#[test]
fn composition_locality() {
    // Purchasing: the seller's goods only change on `process`.
    let m = purchasing_model(&PurchaseParams::default()).unwrap();
    for seed in 0..200 {
        let tr = m.simulate(100.0, &mut rng_stream(seed, 1)).unwrap();
        let g = tr.column("seller.goods").unwrap();
        for w in tr.points().windows(2) {
            if w[0].values[g] != w[1].values[g] {
                assert!(w[1].fired.split(';').any(|f| f == "process"), "{}", w[1].fired);
            }
        }
    }
}
