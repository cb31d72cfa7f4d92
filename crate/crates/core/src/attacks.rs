//! Attack scenarios as compound models, and their closed-form probabilities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{call, int, real, var, Func, Value};
use crate::kernel::{
    build_compound, AtomicComponentDef, BuildError, CompoundModel, ConnectorDef, Interval, TransitionDef,
};
use crate::monitor::{parse_formula, MtlError, MtlFormula};
use crate::stochastics::{Distribution, DistributionError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("model failed validation: {}", join_errors(.0))]
    Build(Vec<BuildError>),
    #[error("invalid distribution: {0}")]
    Distribution(#[from] DistributionError),
    #[error("default property: {0}")]
    Property(#[from] MtlError),
}

fn join_errors(errs: &[BuildError]) -> String {
    errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

fn bad(msg: impl Into<String>) -> AttackError {
    AttackError::BadParameter(msg.into())
}

/// Birthday collision probability `1 - (1 - 1/t)^(n(n-1)/2)`.
pub fn collision_probability(t: u64, n: u64) -> Result<f64, AttackError> {
    if t == 0 {
        return Err(bad("master set size must be at least 1"));
    }
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    if pairs == 0.0 {
        return Ok(0.0);
    }
    if t == 1 {
        return Ok(1.0);
    }
    Ok(-(pairs * (-1.0 / t as f64).ln_1p()).exp_m1())
}

/// Probability that the `n`-th guess collides given that none of the
/// earlier ones did: `1 - (1 - 1/t)^(n-1)`. Its running product reproduces
/// [`collision_probability`].
pub fn collision_hazard(t: u64, n: u64) -> Result<f64, AttackError> {
    if t == 0 {
        return Err(bad("master set size must be at least 1"));
    }
    if n <= 1 {
        return Ok(0.0);
    }
    if t == 1 {
        return Ok(1.0);
    }
    Ok(-((n - 1) as f64 * (-1.0 / t as f64).ln_1p()).exp_m1())
}

/// `min(1, R * q_s * 2^-hash_bits)`.
pub fn negligible_bound(domain_set: u64, queries: u64, hash_bits: u32) -> Result<f64, AttackError> {
    if domain_set == 0 {
        return Err(bad("domain set size must be at least 1"));
    }
    if hash_bits == 0 {
        return Err(bad("hash length must be at least 1 bit"));
    }
    Ok((domain_set as f64 * queries as f64 * 2f64.powi(-(hash_bits as i32))).min(1.0))
}

/// A model together with the property it is meant to be checked against.
#[derive(Debug, Clone)]
pub struct AttackModelBundle {
    pub model: CompoundModel,
    pub default_property: MtlFormula,
    pub property_text: String,
    /// Variables worth watching, e.g. `spoofed.amount`.
    pub variables: Vec<String>,
    /// Observation horizon matching the default property.
    pub horizon: f64,
}

fn bundle(
    model: CompoundModel,
    property_text: String,
    variables: &[&str],
    horizon: f64,
) -> Result<AttackModelBundle, AttackError> {
    let default_property = parse_formula(&property_text)?;
    for v in default_property.variables() {
        if !model.variables().iter().any(|m| m == v) {
            return Err(AttackError::Property(MtlError::UnknownVariable(v.to_string())));
        }
    }
    Ok(AttackModelBundle {
        model,
        default_property,
        property_text,
        variables: variables.iter().map(|s| s.to_string()).collect(),
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mitigation {
    pub hash_bits: u32,
    #[serde(default = "default_domain_set")]
    pub domain_set: u64,
}

fn default_domain_set() -> u64 {
    65535
}

/// DNS cache poisoning parameters. Model time is in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DnsParams {
    pub master_set_size: u64,
    /// Observation window `[0, W]`.
    pub request_window: f64,
    pub max_requests: u64,
    /// Time between consecutive adversary requests.
    pub request_interval: f64,
    /// The user re-resolves the address within this delay after each
    /// completed transfer.
    pub lookup_interval: f64,
    pub mitigation: Option<Mitigation>,
}

impl Default for DnsParams {
    fn default() -> Self {
        Self {
            master_set_size: 65535,
            request_window: 1000.0,
            max_requests: 1000,
            request_interval: 1.0,
            lookup_interval: 10.0,
            mitigation: None,
        }
    }
}

impl DnsParams {
    fn validate(&self) -> Result<(), AttackError> {
        if self.master_set_size < 1 {
            return Err(bad("master_set_size must be at least 1"));
        }
        if !(self.request_window > 0.0 && self.request_window.is_finite()) {
            return Err(bad("request_window must be positive"));
        }
        if !(self.request_interval > 0.0 && self.request_interval.is_finite()) {
            return Err(bad("request_interval must be positive"));
        }
        if !(self.lookup_interval >= 0.0 && self.lookup_interval.is_finite()) {
            return Err(bad("lookup_interval must be non-negative"));
        }
        if let Some(m) = self.mitigation {
            if m.hash_bits < 1 {
                return Err(bad("hash_bits must be at least 1"));
            }
            if m.domain_set < 1 {
                return Err(bad("domain_set must be at least 1"));
            }
        }
        Ok(())
    }
}

pub fn build_dns_model(params: &DnsParams) -> Result<AttackModelBundle, AttackError> {
    params.validate()?;
    let t = params.master_set_size as f64;
    // Conditional success of the current guess, see `collision_hazard`.
    let hazard = real(1.0).sub(call(
        Func::Pow,
        vec![real(1.0).sub(real(1.0).div(real(t))), var("requests").sub(int(1))],
    ));

    let adversary = AtomicComponentDef::new("Adversary", &["a0", "a1", "a2", "a3", "poisoned"])
        .var("requests", Value::Int(0))
        .var("guessed", Value::Int(0))
        .ports(&["request", "reply", "forge"])
        .transition(
            TransitionDef::new("request", "a0", "a1")
                .on_port("request")
                .guard(var("requests").lt(int(params.max_requests as i64)))
                .timing(Interval::exactly(params.request_interval))
                .update("requests", var("requests").add(int(1))),
        )
        .transition(TransitionDef::new("reply", "a1", "a2").on_port("reply"))
        .transition(
            TransitionDef::new("guess", "a2", "a3").outcome(Distribution::state_bernoulli(hazard), "guessed"),
        )
        .transition(
            TransitionDef::new("forge", "a3", "poisoned")
                .on_port("forge")
                .guard(var("guessed").eq(int(1))),
        )
        .transition(TransitionDef::new("retry", "a3", "a0").guard(var("guessed").eq(int(0))));

    let cache = AtomicComponentDef::new("Cache", &["serving"])
        .var("address", Value::Int(0))
        .ports(&["request", "reply", "daemon", "query"])
        .transition(TransitionDef::new("request", "serving", "serving").on_port("request"))
        .transition(TransitionDef::new("reply", "serving", "serving").on_port("reply"))
        .transition(TransitionDef::new("daemon", "serving", "serving").on_port("daemon"))
        .transition(TransitionDef::new("query", "serving", "serving").on_port("query"));

    let user = AtomicComponentDef::new("User", &["idle", "resolved", "genuine", "fooled", "done"])
        .var("target", Value::Int(0))
        .ports(&["lookup", "pay_genuine", "pay_spoofed"])
        .transition(TransitionDef::new("lookup", "idle", "resolved").on_port("lookup"))
        .transition(TransitionDef::new("connect_genuine", "resolved", "genuine").guard(var("target").eq(int(0))))
        .transition(TransitionDef::new("connect_spoofed", "resolved", "fooled").guard(var("target").eq(int(1))))
        .transition(TransitionDef::new("transfer", "genuine", "idle").on_port("pay_genuine"))
        .transition(TransitionDef::new("transfer", "fooled", "done").on_port("pay_spoofed"));

    let network = |name: &str| {
        AtomicComponentDef::new(name, &["up"])
            .var("amount", Value::Int(0))
            .ports(&["receive"])
            .transition(TransitionDef::new("receive", "up", "up").on_port("receive"))
    };

    let mut daemon = ConnectorDef::new("daemon", &[("adversary", "forge"), ("cache", "daemon")])
        .action("cache.address", int(1));
    if let Some(m) = params.mitigation {
        let mu = call(
            Func::Min,
            vec![
                real(1.0),
                real(m.domain_set as f64)
                    .mul(var("adversary.requests"))
                    .mul(call(Func::Pow, vec![real(2.0), real(-(m.hash_bits as f64))])),
            ],
        );
        daemon = daemon.gate(Distribution::state_bernoulli(mu));
    }

    let connectors = vec![
        ConnectorDef::new("request", &[("adversary", "request"), ("cache", "request")]),
        ConnectorDef::new("reply", &[("adversary", "reply"), ("cache", "reply")]),
        daemon,
        ConnectorDef::new("query", &[("user", "lookup"), ("cache", "query")])
            .timing(Interval::new(0.0, params.lookup_interval))
            .action("user.target", var("cache.address")),
        ConnectorDef::new("transfer_genuine", &[("user", "pay_genuine"), ("blockchain", "receive")])
            .action("blockchain.amount", var("blockchain.amount").add(int(1))),
        ConnectorDef::new("transfer_spoofed", &[("user", "pay_spoofed"), ("spoofed", "receive")])
            .action("spoofed.amount", var("spoofed.amount").add(int(1))),
    ];

    let model = build_compound(
        vec![
            ("adversary".into(), adversary),
            ("cache".into(), cache),
            ("user".into(), user),
            ("blockchain".into(), network("Blockchain")),
            ("spoofed".into(), network("SpoofedNetwork")),
        ],
        connectors,
        vec![],
    )
    .map_err(AttackError::Build)?
    .with_time_unit("ms");
    let w = params.request_window;
    bundle(
        model,
        format!("F[0,{w}](spoofed.amount > 0)"),
        &["spoofed.amount", "blockchain.amount", "cache.address", "adversary.requests"],
        w,
    )
}

/// Double-spend parameters. Model time is in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleSpendParams {
    /// Earliest time of the conflicting second send.
    pub t_prime: f64,
    /// Width of the second-send window above `t_prime` (mempool model only).
    pub send_slack: f64,
    pub horizon: f64,
}

impl Default for DoubleSpendParams {
    fn default() -> Self {
        Self {
            t_prime: 0.0,
            send_slack: 60.0,
            horizon: 1e12,
        }
    }
}

impl DoubleSpendParams {
    fn validate(&self) -> Result<(), AttackError> {
        if !(self.t_prime >= 0.0 && self.t_prime.is_finite()) {
            return Err(bad("t_prime must be a non-negative number"));
        }
        if !(self.send_slack >= 0.0 && self.send_slack.is_finite()) {
            return Err(bad("send_slack must be a non-negative number"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(bad("horizon must be positive"));
        }
        Ok(())
    }
}

struct Race<'a> {
    block_maker: &'a str,
    makers: [&'a str; 2],
    chain_type: &'a str,
    chain: &'a str,
    delay: &'a Distribution,
    second_send: Interval,
}

/// Shared shape of both double-spend scenarios: two users each pass one of
/// two conflicting transactions to their own block producer; the chain
/// keeps whichever block arrives first. A user only validates (and then
/// releases the goods) while nothing is committed.
fn build_race(r: Race<'_>) -> Result<CompoundModel, AttackError> {
    r.delay.validate()?;
    let adversary = AtomicComponentDef::new("Adversary", &["d0", "d1", "d2"])
        .var("asset", Value::Int(0))
        .ports(&["send_a", "send_b", "obtain"])
        .transition(
            TransitionDef::new("send_a", "d0", "d1")
                .on_port("send_a")
                .timing(Interval::immediate()),
        )
        .transition(
            TransitionDef::new("send_b", "d1", "d2")
                .on_port("send_b")
                .timing(r.second_send),
        );
    let adversary = ["d0", "d1", "d2"].iter().fold(adversary, |c, s| {
        c.transition(TransitionDef::new("obtain", s, s).on_port("obtain"))
    });

    let user = AtomicComponentDef::new(
        "User",
        &["idle", "received", "validated", "verified", "forwarded", "released", "rejected"],
    )
    .ports(&["receive", "validate", "reject", "forward", "release"])
    .transition(TransitionDef::new("receive", "idle", "received").on_port("receive"))
    .transition(TransitionDef::new("validate", "received", "validated").on_port("validate"))
    .transition(TransitionDef::new("reject", "received", "rejected").on_port("reject"))
    .transition(TransitionDef::new("verify", "validated", "verified"))
    .transition(TransitionDef::new("forward", "verified", "forwarded").on_port("forward"))
    .transition(TransitionDef::new("release", "forwarded", "released").on_port("release"));

    let maker = AtomicComponentDef::new(r.block_maker, &["waiting", "holding", "published"])
        .var("delay", Value::Real(0.0))
        .ports(&["accept", "publish"])
        .transition(
            TransitionDef::new("accept", "waiting", "holding")
                .on_port("accept")
                .outcome(r.delay.clone(), "delay"),
        )
        .transition(
            TransitionDef::new("publish", "holding", "published")
                .on_port("publish")
                .timing(Interval::at(var("delay"))),
        );

    let chain = AtomicComponentDef::new(r.chain_type, &["open", "committed"])
        .var("committed", Value::Int(0))
        .var("rejected", Value::Int(0))
        .ports(&["check", "append"])
        .transition(TransitionDef::new("check", "open", "open").on_port("check"))
        .transition(TransitionDef::new("check", "committed", "committed").on_port("check"))
        .transition(
            TransitionDef::new("accept_block", "open", "committed")
                .on_port("append")
                .update("committed", int(1)),
        )
        .transition(
            TransitionDef::new("reject_block", "committed", "committed")
                .on_port("append")
                .update("rejected", var("rejected").add(int(1))),
        );

    let chain_id = r.chain;
    let committed = format!("{chain_id}.committed");
    let mut connectors = Vec::new();
    for (side, maker_id) in [("a", r.makers[0]), ("b", r.makers[1])] {
        let user_id = format!("user_{side}");
        let u = user_id.as_str();
        connectors.extend([
            ConnectorDef::new(&format!("send_{side}"), &[("adversary", &format!("send_{side}")), (u, "receive")]),
            ConnectorDef::new(&format!("validate_{side}"), &[(u, "validate"), (chain_id, "check")])
                .guard(var(&committed).eq(int(0))),
            ConnectorDef::new(&format!("reject_{side}"), &[(u, "reject"), (chain_id, "check")])
                .guard(var(&committed).eq(int(1))),
            ConnectorDef::new(&format!("forward_{side}"), &[(u, "forward"), (maker_id, "accept")]),
            ConnectorDef::new(&format!("release_{side}"), &[(u, "release"), ("adversary", "obtain")])
                .action("adversary.asset", var("adversary.asset").add(int(1))),
            ConnectorDef::new(&format!("publish_{side}"), &[(maker_id, "publish"), (chain_id, "append")]),
        ]);
    }

    build_compound(
        vec![
            ("adversary".into(), adversary),
            ("user_a".into(), user.clone()),
            ("user_b".into(), user),
            (r.makers[0].into(), maker.clone()),
            (r.makers[1].into(), maker),
            (chain_id.into(), chain),
        ],
        connectors,
        vec![],
    )
    .map_err(AttackError::Build)
    .map(|m| m.with_time_unit("s"))
}

fn double_spend_property(horizon: f64) -> String {
    format!("F[0,{horizon:e}](adversary.asset == 2)")
}

/// Mempool flooding: the second send lands uniformly in
/// `[t_prime, t_prime + send_slack]`; miners hold transactions for a delay
/// drawn from `mining_time`.
pub fn build_mempool_model(
    params: &DoubleSpendParams,
    mining_time: &Distribution,
) -> Result<AttackModelBundle, AttackError> {
    params.validate()?;
    let model = build_race(Race {
        block_maker: "Miner",
        makers: ["miner_c", "miner_d"],
        chain_type: "PowBlockchain",
        chain: "blockchain",
        delay: mining_time,
        second_send: Interval::new(params.t_prime, params.t_prime + params.send_slack),
    })?;
    bundle(
        model,
        double_spend_property(params.horizon),
        &["adversary.asset", "blockchain.committed", "blockchain.rejected"],
        params.horizon,
    )
}

/// Consensus delay: the second send happens exactly at `t_prime`; nodes
/// build blocks at once and propagate them after `propagation_delay`.
pub fn build_consensus_model(
    params: &DoubleSpendParams,
    propagation_delay: &Distribution,
) -> Result<AttackModelBundle, AttackError> {
    params.validate()?;
    let model = build_race(Race {
        block_maker: "Node",
        makers: ["node_a", "node_b"],
        chain_type: "Ledger",
        chain: "ledger",
        delay: propagation_delay,
        second_send: Interval::exactly(params.t_prime),
    })?;
    bundle(
        model,
        double_spend_property(params.horizon),
        &["adversary.asset", "ledger.committed", "ledger.rejected"],
        params.horizon,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Repeated multiplication; independent of the log-space evaluation.
    fn collision_naive(t: u64, n: u64) -> f64 {
        let q = 1.0 - 1.0 / t as f64;
        let mut s = 1.0f64;
        for _ in 0..n * n.saturating_sub(1) / 2 {
            s *= q;
        }
        1.0 - s
    }

    #[test]
    fn collision_examples() {
        assert_eq!(collision_probability(65535, 1).unwrap(), 0.0);
        let p300 = collision_probability(65535, 300).unwrap();
        assert!((p300 - collision_naive(65535, 300)).abs() < 1e-9);
        assert!((p300 - 0.4956).abs() < 5e-4, "{p300}");
        let p1000 = collision_probability(65535, 1000).unwrap();
        assert!((p1000 - collision_naive(65535, 1000)).abs() < 1e-9);
        assert!((p1000 - 0.99951).abs() < 5e-4, "{p1000}");
        assert!(collision_probability(0, 3).is_err());
    }

    #[test]
    fn hazard_product_matches_closed_form() {
        for t in [1u64, 2, 17, 65535] {
            let mut survive = 1.0;
            for n in 1..=400u64 {
                survive *= 1.0 - collision_hazard(t, n).unwrap();
                let p = collision_probability(t, n).unwrap();
                assert!((1.0 - survive - p).abs() < 1e-9, "t={t} n={n}");
            }
        }
    }

    #[test]
    fn collision_is_monotone() {
        let mut last = 0.0;
        for n in 0..2000 {
            let p = collision_probability(65535, n).unwrap();
            assert!(p >= last && (0.0..=1.0).contains(&p));
            last = p;
        }
        for t in 1..500 {
            assert!(collision_probability(t + 1, 40).unwrap() <= collision_probability(t, 40).unwrap());
        }
    }

    #[test]
    fn negligible_bound_examples() {
        assert_eq!(negligible_bound(65535, 0, 256).unwrap(), 0.0);
        let sha1 = negligible_bound(65535, 1000, 160).unwrap();
        assert!((sha1 - 4.48e-41).abs() < 1e-43, "{sha1}");
        let short = negligible_bound(65535, 1000, 26).unwrap();
        assert!((short - 65_535_000.0 / 67_108_864.0).abs() < 1e-12);
        assert!((short - 0.9766).abs() < 5e-4);
        assert_eq!(negligible_bound(65535, 1000, 10).unwrap(), 1.0);
        for bits in 30..60 {
            let a = negligible_bound(65535, 1000, bits).unwrap();
            let b = negligible_bound(65535, 1000, bits + 1).unwrap();
            assert!((a / b - 2.0).abs() < 1e-12);
        }
        assert!(negligible_bound(0, 1, 1).is_err());
        assert!(negligible_bound(1, 1, 0).is_err());
    }
}
