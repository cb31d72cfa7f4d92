//! Small reference models: the customer/seller purchase example and two
//! toy models with known satisfaction probabilities.

use crate::expr::{int, var, Value};
use crate::kernel::{
    build_compound, AtomicComponentDef, BuildError, CompoundModel, ConnectorDef, Interval, PriorityRule,
    TransitionDef,
};
use crate::stochastics::{Distribution, DistributionError};

#[derive(Debug, Clone, PartialEq)]
pub struct PurchaseParams {
    pub customer_balance: i64,
    pub seller_balance: i64,
    pub price: i64,
    pub goods: i64,
    /// Upper end of every `[0, w]` firing window.
    pub window: f64,
}

impl Default for PurchaseParams {
    fn default() -> Self {
        Self {
            customer_balance: 100,
            seller_balance: 0,
            price: 30,
            goods: 3,
            window: 5.0,
        }
    }
}

/// Customer pays `price` to the seller through `process`, then either
/// receives the goods or gives up via its internal `done`. While the seller
/// still has stock, `receive` beats both `done` transitions.
pub fn purchasing_model(p: &PurchaseParams) -> Result<CompoundModel, Vec<BuildError>> {
    let w = Interval::new(0.0, p.window);
    let customer = AtomicComponentDef::new("Customer", &["c0", "c1", "c2"])
        .var("balance", Value::Int(p.customer_balance))
        .var("price", Value::Int(p.price))
        .var("transfer", Value::Int(0))
        .ports(&["process", "receive"])
        .transition(
            TransitionDef::new("process", "c0", "c1")
                .on_port("process")
                .guard(var("balance").gt(var("price"))),
        )
        .transition(
            TransitionDef::new("receive", "c1", "c0")
                .on_port("receive")
                .update("transfer", var("transfer").add(int(1))),
        )
        .transition(TransitionDef::new("done", "c1", "c2").timing(w.clone()));
    let seller = AtomicComponentDef::new("Seller", &["s0", "s1"])
        .var("balance", Value::Int(p.seller_balance))
        .var("goods", Value::Int(p.goods))
        .ports(&["process", "receive"])
        .transition(
            TransitionDef::new("process", "s0", "s1")
                .on_port("process")
                .guard(var("goods").gt(int(0)))
                .update("goods", var("goods").sub(int(1))),
        )
        .transition(TransitionDef::new("receive", "s1", "s0").on_port("receive"))
        .transition(TransitionDef::new("done", "s1", "s0").timing(w.clone()));
    let connectors = vec![
        ConnectorDef::new("process", &[("customer", "process"), ("seller", "process")])
            .timing(w.clone())
            .action("customer.balance", var("customer.balance").sub(var("customer.price")))
            .action("seller.balance", var("seller.balance").add(var("customer.price"))),
        ConnectorDef::new("receive", &[("customer", "receive"), ("seller", "receive")]).timing(w),
    ];
    let in_stock = var("seller.goods").gt(int(0));
    let priorities = vec![
        PriorityRule::new("receive", "customer.done").when(in_stock.clone()),
        PriorityRule::new("receive", "seller.done").when(in_stock),
    ];
    build_compound(
        vec![("customer".into(), customer), ("seller".into(), seller)],
        connectors,
        priorities,
    )
}

/// One instance `flag` whose `value` never changes.
pub fn constant_model(value: bool) -> CompoundModel {
    let c = AtomicComponentDef::new("Constant", &["s"]).var("value", Value::Int(value as i64));
    build_compound(vec![("flag".into(), c)], vec![], vec![]).expect("constant model is well formed")
}

/// At time 1 a connector gated by Bernoulli(p) tries to set `coin.flag`.
pub fn coin_model(p: f64) -> Result<CompoundModel, DistributionError> {
    let gate = Distribution::bernoulli(p)?;
    let c = AtomicComponentDef::new("Coin", &["ready", "tossed"])
        .var("flag", Value::Int(0))
        .ports(&["toss"])
        .transition(TransitionDef::new("toss", "ready", "tossed").on_port("toss"));
    let toss = ConnectorDef::new("toss", &[("coin", "toss")])
        .timing(Interval::exactly(1.0))
        .action("coin.flag", int(1))
        .gate(gate);
    Ok(build_compound(vec![("coin".into(), c)], vec![toss], vec![]).expect("coin model is well formed"))
}

pub const COIN_PROPERTY: &str = "F[0,2](coin.flag == 1)";
pub const CONSTANT_PROPERTY: &str = "F[0,1](flag.value == 1)";
