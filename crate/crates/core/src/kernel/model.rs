use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::expr::{boolean, real, Expr, TypeError, Value, ValueKind};
use crate::stochastics::{Distribution, DistributionError};

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub kind: ValueKind,
    pub initial: Value,
}

/// Firing window `[lo, hi]`. Bounds are numeric expressions evaluated when
/// the window is inspected, so a delay sampled into a variable can drive the
/// next transition. `hi = None` is unbounded: such a window fires as soon as
/// it opens.
#[derive(Debug, Clone, PartialEq)]
pub struct Interval {
    pub lo: Expr,
    pub hi: Option<Expr>,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self {
            lo: real(lo),
            hi: Some(real(hi)),
        }
    }

    pub fn exactly(t: f64) -> Self {
        Self::new(t, t)
    }

    /// `[0, 0]`: fires at the instant it becomes enabled.
    pub fn immediate() -> Self {
        Self::exactly(0.0)
    }

    pub fn from(lo: f64) -> Self {
        Self {
            lo: real(lo),
            hi: None,
        }
    }

    /// `[0, inf)`.
    pub fn any() -> Self {
        Self::from(0.0)
    }

    pub fn between(lo: Expr, hi: Expr) -> Self {
        Self { lo, hi: Some(hi) }
    }

    /// Degenerate window at a computed delay.
    pub fn at(delay: Expr) -> Self {
        Self {
            lo: delay.clone(),
            hi: Some(delay),
        }
    }
}

impl Default for Interval {
    fn default() -> Self {
        Self::any()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub distribution: Distribution,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDef {
    pub name: String,
    pub source: String,
    pub target: String,
    /// `None` marks an internal transition.
    pub port: Option<String>,
    pub guard: Expr,
    /// Relative to the instant the component entered `source`.
    pub timing: Interval,
    pub updates: Vec<(String, Expr)>,
    pub clock_resets: Vec<String>,
    /// Sampled into the target variable before `updates` run.
    pub outcome: Option<Outcome>,
}

impl TransitionDef {
    pub fn new(name: &str, source: &str, target: &str) -> Self {
        Self {
            name: name.to_string(),
            source: source.to_string(),
            target: target.to_string(),
            port: None,
            guard: boolean(true),
            timing: Interval::any(),
            updates: Vec::new(),
            clock_resets: Vec::new(),
            outcome: None,
        }
    }

    pub fn on_port(mut self, port: &str) -> Self {
        self.port = Some(port.to_string());
        self
    }

    pub fn guard(mut self, guard: Expr) -> Self {
        self.guard = guard;
        self
    }

    pub fn timing(mut self, timing: Interval) -> Self {
        self.timing = timing;
        self
    }

    pub fn update(mut self, var: &str, value: Expr) -> Self {
        self.updates.push((var.to_string(), value));
        self
    }

    pub fn reset(mut self, clock: &str) -> Self {
        self.clock_resets.push(clock.to_string());
        self
    }

    pub fn outcome(mut self, distribution: Distribution, target: &str) -> Self {
        self.outcome = Some(Outcome {
            distribution,
            target: target.to_string(),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicComponentDef {
    pub name: String,
    pub states: Vec<String>,
    pub initial_state: String,
    pub variables: Vec<VariableDef>,
    pub clocks: Vec<String>,
    pub ports: Vec<String>,
    pub transitions: Vec<TransitionDef>,
}

impl AtomicComponentDef {
    /// Starts a component; the first listed state is the initial one unless
    /// overridden with [`Self::initial`].
    pub fn new(name: &str, states: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            initial_state: states.first().map(|s| s.to_string()).unwrap_or_default(),
            variables: Vec::new(),
            clocks: Vec::new(),
            ports: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn initial(mut self, state: &str) -> Self {
        self.initial_state = state.to_string();
        self
    }

    pub fn var(mut self, name: &str, initial: Value) -> Self {
        self.variables.push(VariableDef {
            name: name.to_string(),
            kind: initial.kind(),
            initial,
        });
        self
    }

    pub fn clock(mut self, name: &str) -> Self {
        self.clocks.push(name.to_string());
        self
    }

    pub fn ports(mut self, ports: &[&str]) -> Self {
        self.ports.extend(ports.iter().map(|p| p.to_string()));
        self
    }

    pub fn transition(mut self, t: TransitionDef) -> Self {
        self.transitions.push(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectorDef {
    pub name: String,
    /// `(instance id, port id)` pairs.
    pub participants: Vec<(String, String)>,
    /// Over dotted participant names, e.g. `cache.address`.
    pub guard: Expr,
    /// Relative to the latest state entry among the participants.
    pub timing: Interval,
    pub actions: Vec<(String, Expr)>,
    /// Success/failure gate; must be a Bernoulli-type distribution.
    pub probability: Option<Distribution>,
}

impl ConnectorDef {
    pub fn new(name: &str, participants: &[(&str, &str)]) -> Self {
        Self {
            name: name.to_string(),
            participants: participants
                .iter()
                .map(|(i, p)| (i.to_string(), p.to_string()))
                .collect(),
            guard: boolean(true),
            timing: Interval::any(),
            actions: Vec::new(),
            probability: None,
        }
    }

    pub fn guard(mut self, guard: Expr) -> Self {
        self.guard = guard;
        self
    }

    pub fn timing(mut self, timing: Interval) -> Self {
        self.timing = timing;
        self
    }

    pub fn action(mut self, target: &str, value: Expr) -> Self {
        self.actions.push((target.to_string(), value));
        self
    }

    pub fn gate(mut self, probability: Distribution) -> Self {
        self.probability = Some(probability);
        self
    }
}

/// When `condition` holds and `higher` is enabled, `lower` is suppressed.
/// Internal transitions are addressed as `instance.transition`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityRule {
    pub condition: Expr,
    pub higher: String,
    pub lower: String,
}

impl PriorityRule {
    pub fn new(higher: &str, lower: &str) -> Self {
        Self {
            condition: boolean(true),
            higher: higher.to_string(),
            lower: lower.to_string(),
        }
    }

    pub fn when(mut self, condition: Expr) -> Self {
        self.condition = condition;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("duplicate instance id `{0}`")]
    DuplicateInstanceId(String),
    #[error("duplicate connector name `{0}`")]
    DuplicateConnector(String),
    #[error("component `{component}`: {reason}")]
    InvalidComponent { component: String, reason: String },
    #[error("connector `{connector}` references unknown instance `{instance}`")]
    UnknownInstance { connector: String, instance: String },
    #[error("connector `{connector}` references unknown port `{instance}.{port}`")]
    UnknownPort {
        connector: String,
        instance: String,
        port: String,
    },
    #[error("connector `{connector}` lists `{instance}.{port}` more than once")]
    DuplicateParticipant {
        connector: String,
        instance: String,
        port: String,
    },
    #[error("connector `{0}` has no participants")]
    EmptyConnector(String),
    #[error("type error in {context}: {error}")]
    TypeError { context: String, error: TypeError },
    #[error("priority `{higher}` > `{lower}`: {reason}")]
    DanglingPriority {
        higher: String,
        lower: String,
        reason: String,
    },
    #[error("invalid timing in {context}: {reason}")]
    InvalidInterval { context: String, reason: String },
    #[error("invalid distribution in {context}: {error}")]
    InvalidDistribution {
        context: String,
        error: DistributionError,
    },
}

/// Resolved reference to a variable or clock of an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Var(usize, usize),
    Clock(usize, usize),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Var(i, v) => write!(f, "var#{i}.{v}"),
            Slot::Clock(i, c) => write!(f, "clock#{i}.{c}"),
        }
    }
}

pub(crate) type CExpr = Expr<Slot>;

#[derive(Debug, Clone)]
pub(crate) struct CInterval {
    pub lo: CExpr,
    pub hi: Option<CExpr>,
}

#[derive(Debug, Clone)]
pub(crate) struct CTransition {
    pub source: usize,
    pub target: usize,
    pub guard: CExpr,
    pub timing: CInterval,
    pub updates: Vec<(usize, CExpr)>,
    pub resets: Vec<usize>,
    pub outcome: Option<(Distribution<Slot>, usize)>,
}

#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub id: String,
    pub def: AtomicComponentDef,
    pub initial: usize,
    pub transitions: Vec<CTransition>,
    /// `by_port[state][port]` lists transitions leaving `state` on `port`.
    pub by_port: Vec<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Selector {
    Port(usize),
    Transition(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct CConnector {
    pub name: String,
    pub participants: Vec<(usize, Selector)>,
    pub guard: CExpr,
    pub timing: CInterval,
    pub actions: Vec<((usize, usize), CExpr)>,
    pub gate: Option<Distribution<Slot>>,
}

#[derive(Debug, Clone)]
pub(crate) struct CPriority {
    pub condition: CExpr,
    pub higher: usize,
    pub lower: usize,
}

/// A validated network of component instances, connectors and priorities.
#[derive(Debug, Clone)]
pub struct CompoundModel {
    pub(crate) instances: Vec<Instance>,
    pub(crate) connectors: Vec<CConnector>,
    pub(crate) priorities: Vec<CPriority>,
    connector_defs: Vec<ConnectorDef>,
    priority_defs: Vec<PriorityRule>,
    /// Dotted variable names, sorted; trace columns follow this order.
    pub(crate) columns: Vec<String>,
    pub(crate) column_slots: Vec<(usize, usize)>,
    time_unit: String,
}

impl CompoundModel {
    pub fn instance_ids(&self) -> impl Iterator<Item = &str> {
        self.instances.iter().map(|i| i.id.as_str())
    }

    pub fn instance(&self, id: &str) -> Option<&AtomicComponentDef> {
        self.instances.iter().find(|i| i.id == id).map(|i| &i.def)
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    /// Explicit connectors as declared.
    pub fn connectors(&self) -> &[ConnectorDef] {
        &self.connector_defs
    }

    pub fn priorities(&self) -> &[PriorityRule] {
        &self.priority_defs
    }

    /// Name of an interaction, explicit or implicit.
    pub fn interaction_name(&self, index: usize) -> &str {
        &self.connectors[index].name
    }

    pub fn interaction_index(&self, name: &str) -> Option<usize> {
        self.connectors.iter().position(|c| c.name == name)
    }

    /// Every dotted variable name, sorted.
    pub fn variables(&self) -> &[String] {
        &self.columns
    }

    pub fn time_unit(&self) -> &str {
        &self.time_unit
    }

    pub fn with_time_unit(mut self, label: &str) -> Self {
        self.time_unit = label.to_string();
        self
    }

    pub(crate) fn instance_index(&self, id: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.id == id)
    }
}

/// Validates raw definitions and assembles an executable model. All problems
/// found are reported, not only the first.
pub fn build_compound(
    instances: Vec<(String, AtomicComponentDef)>,
    connectors: Vec<ConnectorDef>,
    priorities: Vec<PriorityRule>,
) -> Result<CompoundModel, Vec<BuildError>> {
    let mut errors = Vec::new();

    let mut seen = HashSet::new();
    for (id, _) in &instances {
        if !seen.insert(id.as_str()) {
            errors.push(BuildError::DuplicateInstanceId(id.clone()));
        }
    }

    let compiled: Vec<Instance> = instances
        .iter()
        .enumerate()
        .map(|(idx, (id, def))| compile_instance(idx, id, def, &mut errors))
        .collect();

    // Global scope: `instance.var` and `instance.clock`.
    let mut global: HashMap<String, (Slot, ValueKind)> = HashMap::new();
    for (i, inst) in compiled.iter().enumerate() {
        for (v, var) in inst.def.variables.iter().enumerate() {
            global.insert(format!("{}.{}", inst.id, var.name), (Slot::Var(i, v), var.kind));
        }
        for (c, clock) in inst.def.clocks.iter().enumerate() {
            global.insert(format!("{}.{}", inst.id, clock), (Slot::Clock(i, c), ValueKind::Real));
        }
    }

    let mut cconnectors = Vec::new();
    let mut names = HashSet::new();
    for def in &connectors {
        if !names.insert(def.name.clone()) {
            errors.push(BuildError::DuplicateConnector(def.name.clone()));
        }
        if let Some(c) = compile_connector(def, &compiled, &global, &mut errors) {
            cconnectors.push(c);
        }
    }

    // Internal transitions become single-participant interactions.
    for (i, inst) in compiled.iter().enumerate() {
        for (t, tdef) in inst.def.transitions.iter().enumerate() {
            if tdef.port.is_some() {
                continue;
            }
            let name = format!("{}.{}", inst.id, tdef.name);
            if !names.insert(name.clone()) {
                errors.push(BuildError::DuplicateConnector(name.clone()));
            }
            cconnectors.push(CConnector {
                name,
                participants: vec![(i, Selector::Transition(t))],
                guard: Expr::Lit(Value::Bool(true)),
                timing: CInterval {
                    lo: Expr::Lit(Value::Real(0.0)),
                    hi: None,
                },
                actions: Vec::new(),
                gate: None,
            });
        }
    }

    let mut cpriorities = Vec::new();
    for rule in &priorities {
        let find = |n: &str| cconnectors.iter().position(|c| c.name == n);
        let (higher, lower) = (find(&rule.higher), find(&rule.lower));
        let dangling = |reason: &str| BuildError::DanglingPriority {
            higher: rule.higher.clone(),
            lower: rule.lower.clone(),
            reason: reason.to_string(),
        };
        if rule.higher == rule.lower {
            errors.push(dangling("a connector cannot dominate itself"));
            continue;
        }
        let (Some(higher), Some(lower)) = (higher, lower) else {
            errors.push(dangling("unknown connector"));
            continue;
        };
        let context = format!("priority `{}` > `{}`", rule.higher, rule.lower);
        if let Some(condition) = compile_global_bool(&rule.condition, &global, None, &context, &mut errors) {
            cpriorities.push(CPriority {
                condition,
                higher,
                lower,
            });
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let mut columns: Vec<(String, (usize, usize))> = compiled
        .iter()
        .enumerate()
        .flat_map(|(i, inst)| {
            inst.def
                .variables
                .iter()
                .enumerate()
                .map(move |(v, var)| (format!("{}.{}", inst.id, var.name), (i, v)))
        })
        .collect();
    columns.sort_by(|a, b| a.0.cmp(&b.0));

    Ok(CompoundModel {
        instances: compiled,
        connectors: cconnectors,
        priorities: cpriorities,
        connector_defs: connectors,
        priority_defs: priorities,
        column_slots: columns.iter().map(|c| c.1).collect(),
        columns: columns.into_iter().map(|c| c.0).collect(),
        time_unit: "units".to_string(),
    })
}

fn compile_instance(
    idx: usize,
    id: &str,
    def: &AtomicComponentDef,
    errors: &mut Vec<BuildError>,
) -> Instance {
    let inv = |reason: String| BuildError::InvalidComponent {
        component: id.to_string(),
        reason,
    };

    let state_index = |s: &str| def.states.iter().position(|x| x == s);
    let port_index = |p: &str| def.ports.iter().position(|x| x == p);

    let mut names = HashSet::new();
    for s in &def.states {
        if !names.insert(("state", s.as_str())) {
            errors.push(inv(format!("duplicate state `{s}`")));
        }
    }
    let mut locals: HashMap<String, (Slot, ValueKind)> = HashMap::new();
    for (v, var) in def.variables.iter().enumerate() {
        if var.initial.coerce(var.kind).is_none() {
            errors.push(inv(format!("variable `{}` initial value does not match kind {}", var.name, var.kind)));
        }
        if locals.insert(var.name.clone(), (Slot::Var(idx, v), var.kind)).is_some() {
            errors.push(inv(format!("duplicate variable or clock `{}`", var.name)));
        }
    }
    for (c, clock) in def.clocks.iter().enumerate() {
        if locals.insert(clock.clone(), (Slot::Clock(idx, c), ValueKind::Real)).is_some() {
            errors.push(inv(format!("duplicate variable or clock `{clock}`")));
        }
    }
    let mut seen_ports = HashSet::new();
    for p in &def.ports {
        if !seen_ports.insert(p) {
            errors.push(inv(format!("duplicate port `{p}`")));
        }
    }

    let initial = state_index(&def.initial_state).unwrap_or_else(|| {
        errors.push(inv(format!("initial state `{}` is not declared", def.initial_state)));
        0
    });

    let mut transitions = Vec::new();
    let mut by_port = vec![vec![Vec::new(); def.ports.len()]; def.states.len()];
    for tdef in &def.transitions {
        let ctx = format!("transition `{}.{}`", id, tdef.name);
        let source = state_index(&tdef.source);
        let target = state_index(&tdef.target);
        if source.is_none() {
            errors.push(inv(format!("{ctx}: unknown source state `{}`", tdef.source)));
        }
        if target.is_none() {
            errors.push(inv(format!("{ctx}: unknown target state `{}`", tdef.target)));
        }
        let port = match &tdef.port {
            Some(p) => match port_index(p) {
                Some(pi) => Some(pi),
                None => {
                    errors.push(inv(format!("{ctx}: unknown port `{p}`")));
                    None
                }
            },
            None => None,
        };

        let guard = compile_local(&tdef.guard, &locals, Some(ValueKind::Bool), &format!("{ctx} guard"), errors);
        let timing = compile_interval(&tdef.timing, &|e, c, errs| compile_local(e, &locals, None, c, errs), &ctx, errors);
        let mut updates = Vec::new();
        for (target_var, e) in &tdef.updates {
            let Some(v) = def.variables.iter().position(|v| &v.name == target_var) else {
                errors.push(BuildError::InvalidComponent {
                    component: id.to_string(),
                    reason: format!("{ctx}: update of unknown variable `{target_var}`"),
                });
                continue;
            };
            let kind = def.variables[v].kind;
            if let Some(ce) = compile_assign(e, kind, &|n| locals.get(n).copied(), &format!("{ctx} update of `{target_var}`"), errors) {
                updates.push((v, ce));
            }
        }
        let mut resets = Vec::new();
        for clock in &tdef.clock_resets {
            match def.clocks.iter().position(|c| c == clock) {
                Some(c) => resets.push(c),
                None => errors.push(BuildError::InvalidComponent {
                    component: id.to_string(),
                    reason: format!("{ctx}: reset of unknown clock `{clock}`"),
                }),
            }
        }
        let outcome = tdef.outcome.as_ref().and_then(|o| {
            let Some(v) = def.variables.iter().position(|v| v.name == o.target) else {
                errors.push(BuildError::InvalidComponent {
                    component: id.to_string(),
                    reason: format!("{ctx}: outcome target `{}` is not a variable", o.target),
                });
                return None;
            };
            let dist = compile_distribution(&o.distribution, &|n| locals.get(n).copied(), &format!("{ctx} outcome"), errors)?;
            Some((dist, v))
        });

        if let (Some(source), Some(target), Some(guard), Some(timing)) = (source, target, guard, timing) {
            let t = transitions.len();
            if let Some(p) = port {
                by_port[source][p].push(t);
            }
            transitions.push(CTransition {
                source,
                target,
                guard,
                timing,
                updates,
                resets,
                outcome,
            });
        } else {
            // Keep indices aligned with definitions even on error; the build
            // fails anyway.
            transitions.push(CTransition {
                source: 0,
                target: 0,
                guard: Expr::Lit(Value::Bool(false)),
                timing: CInterval {
                    lo: Expr::Lit(Value::Real(0.0)),
                    hi: None,
                },
                updates: Vec::new(),
                resets: Vec::new(),
                outcome: None,
            });
        }
    }

    Instance {
        id: id.to_string(),
        def: def.clone(),
        initial,
        transitions,
        by_port,
    }
}

fn compile_connector(
    def: &ConnectorDef,
    instances: &[Instance],
    global: &HashMap<String, (Slot, ValueKind)>,
    errors: &mut Vec<BuildError>,
) -> Option<CConnector> {
    let before = errors.len();
    if def.participants.is_empty() {
        errors.push(BuildError::EmptyConnector(def.name.clone()));
    }
    let mut participants = Vec::new();
    let mut seen = HashSet::new();
    for (inst_id, port) in &def.participants {
        let Some(i) = instances.iter().position(|x| &x.id == inst_id) else {
            errors.push(BuildError::UnknownInstance {
                connector: def.name.clone(),
                instance: inst_id.clone(),
            });
            continue;
        };
        let Some(p) = instances[i].def.ports.iter().position(|x| x == port) else {
            errors.push(BuildError::UnknownPort {
                connector: def.name.clone(),
                instance: inst_id.clone(),
                port: port.clone(),
            });
            continue;
        };
        if !seen.insert((i, p)) {
            errors.push(BuildError::DuplicateParticipant {
                connector: def.name.clone(),
                instance: inst_id.clone(),
                port: port.clone(),
            });
            continue;
        }
        participants.push((i, Selector::Port(p)));
    }
    if errors.len() > before {
        return None;
    }

    // Connector data is restricted to participating instances.
    let allowed: HashSet<usize> = participants.iter().map(|(i, _)| *i).collect();
    let ctx = format!("connector `{}`", def.name);
    let guard = compile_global_bool(&def.guard, global, Some(&allowed), &format!("{ctx} guard"), errors);
    let scoped = |n: &String| {
        global
            .get(n)
            .copied()
            .filter(|(slot, _)| match slot {
                Slot::Var(i, _) | Slot::Clock(i, _) => allowed.contains(i),
            })
    };
    let timing = compile_interval(
        &def.timing,
        &|e, c, errs| compile_typed(e, &scoped, None, c, errs),
        &ctx,
        errors,
    );
    let mut actions = Vec::new();
    for (target, e) in &def.actions {
        match scoped(target) {
            Some((Slot::Var(i, v), kind)) => {
                if let Some(ce) = compile_assign(e, kind, &scoped, &format!("{ctx} action on `{target}`"), errors) {
                    actions.push(((i, v), ce));
                }
            }
            _ => errors.push(BuildError::TypeError {
                context: format!("{ctx} action"),
                error: TypeError::UnboundName(target.clone()),
            }),
        }
    }
    let gate = def.probability.as_ref().and_then(|d| {
        if !d.is_binary() {
            errors.push(BuildError::InvalidDistribution {
                context: format!("{ctx} gate"),
                error: DistributionError::NotBinary,
            });
            return None;
        }
        compile_distribution(d, &scoped, &format!("{ctx} gate"), errors)
    });
    if errors.len() > before {
        return None;
    }
    Some(CConnector {
        name: def.name.clone(),
        participants,
        guard: guard?,
        timing: timing?,
        actions,
        gate,
    })
}

fn compile_typed(
    e: &Expr,
    scope: &impl Fn(&String) -> Option<(Slot, ValueKind)>,
    expected: Option<ValueKind>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<CExpr> {
    let kind = match e.type_check(&|n| scope(n).map(|(_, k)| k)) {
        Ok(k) => k,
        Err(error) => {
            errors.push(BuildError::TypeError {
                context: context.to_string(),
                error,
            });
            return None;
        }
    };
    let ok = match expected {
        Some(ValueKind::Bool) => kind == ValueKind::Bool,
        Some(_) => kind != ValueKind::Bool,
        // Timing bounds: any numeric.
        None => kind != ValueKind::Bool,
    };
    if !ok {
        errors.push(BuildError::TypeError {
            context: context.to_string(),
            error: TypeError::Expected {
                expected: expected.unwrap_or(ValueKind::Real),
                found: kind,
            },
        });
        return None;
    }
    e.try_map_refs(&mut |n| scope(n).map(|(s, _)| s).ok_or(())).ok()
}

fn compile_local(
    e: &Expr,
    locals: &HashMap<String, (Slot, ValueKind)>,
    expected: Option<ValueKind>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<CExpr> {
    compile_typed(e, &|n| locals.get(n).copied(), expected, context, errors)
}

fn compile_global_bool(
    e: &Expr,
    global: &HashMap<String, (Slot, ValueKind)>,
    allowed: Option<&HashSet<usize>>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<CExpr> {
    let scope = |n: &String| {
        global.get(n).copied().filter(|(slot, _)| match (allowed, slot) {
            (None, _) => true,
            (Some(a), Slot::Var(i, _) | Slot::Clock(i, _)) => a.contains(i),
        })
    };
    compile_typed(e, &scope, Some(ValueKind::Bool), context, errors)
}

fn compile_assign(
    e: &Expr,
    target: ValueKind,
    scope: &impl Fn(&String) -> Option<(Slot, ValueKind)>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<CExpr> {
    let kind = match e.type_check(&|n| scope(n).map(|(_, k)| k)) {
        Ok(k) => k,
        Err(error) => {
            errors.push(BuildError::TypeError {
                context: context.to_string(),
                error,
            });
            return None;
        }
    };
    let assignable = kind == target || (kind == ValueKind::Int && target == ValueKind::Real);
    if !assignable {
        errors.push(BuildError::TypeError {
            context: context.to_string(),
            error: TypeError::Expected {
                expected: target,
                found: kind,
            },
        });
        return None;
    }
    e.try_map_refs(&mut |n| scope(n).map(|(s, _)| s).ok_or(())).ok()
}

type ExprCompiler<'a> = dyn Fn(&Expr, &str, &mut Vec<BuildError>) -> Option<CExpr> + 'a;

fn compile_interval(
    interval: &Interval,
    compile: &ExprCompiler<'_>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<CInterval> {
    let bad = |reason: String| BuildError::InvalidInterval {
        context: context.to_string(),
        reason,
    };
    let lo_lit = interval.lo.as_literal().map(|v| v.as_f64());
    let hi_lit = interval.hi.as_ref().and_then(|h| h.as_literal()).map(|v| v.as_f64());
    if let Some(lo) = lo_lit {
        if !(lo.is_finite() && lo >= 0.0) {
            errors.push(bad(format!("lower bound {lo} must be finite and >= 0")));
            return None;
        }
    }
    if let Some(hi) = hi_lit {
        if hi.is_nan() || hi < lo_lit.unwrap_or(0.0) {
            errors.push(bad(format!("upper bound {hi} is below the lower bound")));
            return None;
        }
    }
    let lo = compile(&interval.lo, &format!("{context} lower bound"), errors)?;
    let hi = match &interval.hi {
        Some(h) => Some(compile(h, &format!("{context} upper bound"), errors)?),
        None => None,
    };
    Some(CInterval { lo, hi })
}

fn compile_distribution(
    d: &Distribution,
    scope: &impl Fn(&String) -> Option<(Slot, ValueKind)>,
    context: &str,
    errors: &mut Vec<BuildError>,
) -> Option<Distribution<Slot>> {
    if let Err(error) = d.validate() {
        errors.push(BuildError::InvalidDistribution {
            context: context.to_string(),
            error,
        });
        return None;
    }
    if let Distribution::StateBernoulli(e) = d {
        compile_typed(e, scope, Some(ValueKind::Real), &format!("{context} probability"), errors)?;
    }
    d.try_map_refs(&mut |n| scope(n).map(|(s, _)| s).ok_or(())).ok()
}
