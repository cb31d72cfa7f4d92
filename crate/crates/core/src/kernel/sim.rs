//! Discrete-event execution of compound models.
//!
//! At every step each enabled interaction proposes a firing time drawn
//! uniformly from its feasible window (unbounded windows propose their lower
//! bound) and the earliest proposal fires. Equal proposals are broken
//! uniformly at random. Because a uniform window conditioned on not having
//! fired yet is again uniform on the remaining part, re-drawing proposals
//! after every event does not distort the delay distributions.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use super::model::{CInterval, CompoundModel, Selector, Slot};
use super::trace::{ObservationPoint, Trace};
use crate::expr::{EvalError, Value};
use crate::stochastics::DistributionError;

pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("evaluating {context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("sampling in {context}: {source}")]
    Distribution {
        context: String,
        #[source]
        source: DistributionError,
    },
    #[error("{context} produced an invalid window [{lo}, {hi}]")]
    InvalidWindow { context: String, lo: f64, hi: f64 },
    #[error("step limit of {0} exceeded (livelock?)")]
    StepLimitExceeded(u64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("unknown {0}")]
    UnknownName(String),
}

/// Configuration of a running model.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    now: f64,
    locations: Vec<usize>,
    /// Instant each instance entered its current location. Self-loops do
    /// not count as entering.
    entered: Vec<f64>,
    vars: Vec<Vec<Value>>,
    clock_resets: Vec<Vec<f64>>,
}

impl SimState {
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn location<'m>(&self, model: &'m CompoundModel, instance: &str) -> Option<&'m str> {
        let i = model.instance_index(instance)?;
        Some(model.instances[i].def.states[self.locations[i]].as_str())
    }

    pub fn value(&self, model: &CompoundModel, dotted: &str) -> Option<Value> {
        let (i, v) = resolve_var(model, dotted)?;
        Some(self.vars[i][v])
    }

    pub fn set_value(&mut self, model: &CompoundModel, dotted: &str, value: Value) -> Result<(), SimError> {
        let (i, v) = resolve_var(model, dotted).ok_or_else(|| SimError::UnknownName(format!("variable `{dotted}`")))?;
        let kind = model.instances[i].def.variables[v].kind;
        self.vars[i][v] = value
            .coerce(kind)
            .ok_or_else(|| SimError::UnknownName(format!("{kind} value for `{dotted}`")))?;
        Ok(())
    }

    /// Moves an instance to `state` as if it had just entered it.
    pub fn set_location(&mut self, model: &CompoundModel, instance: &str, state: &str) -> Result<(), SimError> {
        let i = model
            .instance_index(instance)
            .ok_or_else(|| SimError::UnknownName(format!("instance `{instance}`")))?;
        let s = model.instances[i]
            .def
            .states
            .iter()
            .position(|x| x == state)
            .ok_or_else(|| SimError::UnknownName(format!("state `{instance}.{state}`")))?;
        self.locations[i] = s;
        self.entered[i] = self.now;
        Ok(())
    }

    fn lookup(&self, slot: &Slot) -> Option<Value> {
        match *slot {
            Slot::Var(i, v) => self.vars.get(i)?.get(v).copied(),
            Slot::Clock(i, c) => self
                .clock_resets
                .get(i)?
                .get(c)
                .map(|r| Value::Real(self.now - r)),
        }
    }

    fn snapshot(&self, model: &CompoundModel) -> Vec<Value> {
        model.column_slots.iter().map(|&(i, v)| self.vars[i][v]).collect()
    }
}

fn resolve_var(model: &CompoundModel, dotted: &str) -> Option<(usize, usize)> {
    let col = model.columns.binary_search_by(|c| c.as_str().cmp(dotted)).ok()?;
    Some(model.column_slots[col])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    /// `f64::INFINITY` when unbounded.
    pub hi: f64,
}

impl Window {
    fn intersect(self, other: Window) -> Window {
        Window {
            lo: self.lo.max(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi
    }
}

/// An interaction that may fire now, with the absolute times at which it may
/// fire.
#[derive(Debug, Clone, PartialEq)]
pub struct EnabledInteraction {
    pub connector: usize,
    pub window: Window,
    /// `(instance, transition)` chosen for each participant.
    transitions: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Fired { state: SimState, point: ObservationPoint },
    Quiescent,
}

impl CompoundModel {
    pub fn initial_state(&self) -> SimState {
        SimState {
            now: 0.0,
            locations: self.instances.iter().map(|i| i.initial).collect(),
            entered: vec![0.0; self.instances.len()],
            vars: self
                .instances
                .iter()
                .map(|i| {
                    i.def
                        .variables
                        .iter()
                        .map(|v| v.initial.coerce(v.kind).unwrap_or(v.initial))
                        .collect()
                })
                .collect(),
            clock_resets: self.instances.iter().map(|i| vec![0.0; i.def.clocks.len()]).collect(),
        }
    }

    /// Interactions that can fire from `state`, after priority filtering.
    pub fn enabled_interactions(&self, state: &SimState) -> Result<Vec<EnabledInteraction>, SimError> {
        let mut out = self.enabled_unfiltered(state)?;
        if self.priorities.is_empty() || out.is_empty() {
            return Ok(out);
        }
        let mut present = vec![false; self.connectors.len()];
        for e in &out {
            present[e.connector] = true;
        }
        let mut suppressed = vec![false; self.connectors.len()];
        for rule in &self.priorities {
            if !present[rule.higher] || !present[rule.lower] {
                continue;
            }
            if eval_bool(&rule.condition, state, || {
                format!(
                    "priority condition `{}` > `{}`",
                    self.connectors[rule.higher].name, self.connectors[rule.lower].name
                )
            })? {
                suppressed[rule.lower] = true;
            }
        }
        out.retain(|e| !suppressed[e.connector]);
        Ok(out)
    }

    fn enabled_unfiltered(&self, state: &SimState) -> Result<Vec<EnabledInteraction>, SimError> {
        let mut out = Vec::new();
        let mut per_participant: Vec<Vec<(usize, Window)>> = Vec::new();
        'connectors: for (ci, conn) in self.connectors.iter().enumerate() {
            per_participant.clear();
            for &(i, sel) in &conn.participants {
                let inst = &self.instances[i];
                let loc = state.locations[i];
                let mut options = Vec::new();
                let mut consider = |t: usize| -> Result<(), SimError> {
                    let tr = &inst.transitions[t];
                    if tr.source != loc {
                        return Ok(());
                    }
                    let ctx = || format!("guard of `{}.{}`", inst.id, inst.def.transitions[t].name);
                    if !eval_bool(&tr.guard, state, ctx)? {
                        return Ok(());
                    }
                    let w = window(&tr.timing, state.entered[i], state, || {
                        format!("window of `{}.{}`", inst.id, inst.def.transitions[t].name)
                    })?;
                    options.push((t, w));
                    Ok(())
                };
                match sel {
                    Selector::Port(p) => {
                        for &t in &inst.by_port[loc][p] {
                            consider(t)?;
                        }
                    }
                    Selector::Transition(t) => consider(t)?,
                }
                if options.is_empty() {
                    continue 'connectors;
                }
                per_participant.push(options);
            }
            if !eval_bool(&conn.guard, state, || format!("guard of connector `{}`", conn.name))? {
                continue;
            }
            let enabling = conn
                .participants
                .iter()
                .map(|&(i, _)| state.entered[i])
                .fold(0.0, f64::max);
            let base = window(&conn.timing, enabling, state, || format!("window of connector `{}`", conn.name))?
                .intersect(Window {
                    lo: state.now,
                    hi: f64::INFINITY,
                });

            // Cartesian product over the participants' enabled transitions.
            let mut idx = vec![0usize; per_participant.len()];
            loop {
                let mut w = base;
                for (k, options) in per_participant.iter().enumerate() {
                    w = w.intersect(options[idx[k]].1);
                }
                if !w.is_empty() {
                    out.push(EnabledInteraction {
                        connector: ci,
                        window: w,
                        transitions: conn
                            .participants
                            .iter()
                            .zip(&idx)
                            .enumerate()
                            .map(|(k, (&(i, _), &j))| (i, per_participant[k][j].0))
                            .collect(),
                    });
                }
                let mut k = 0;
                loop {
                    if k == idx.len() {
                        continue 'connectors;
                    }
                    idx[k] += 1;
                    if idx[k] < per_participant[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        Ok(out)
    }

    /// Picks the next interaction and its firing time, or `None` when
    /// nothing is enabled.
    fn schedule<R: Rng + ?Sized>(
        &self,
        state: &SimState,
        rng: &mut R,
    ) -> Result<Option<(EnabledInteraction, f64)>, SimError> {
        let mut candidates = self.enabled_interactions(state)?;
        if candidates.is_empty() {
            return Ok(None);
        }
        let times: Vec<f64> = candidates
            .iter()
            .map(|c| {
                let Window { lo, hi } = c.window;
                if hi.is_infinite() || hi == lo {
                    lo
                } else {
                    lo + (hi - lo) * rng.gen::<f64>()
                }
            })
            .collect();
        let earliest = times.iter().copied().fold(f64::INFINITY, f64::min);
        let tied: Vec<usize> = (0..times.len()).filter(|&k| times[k] == earliest).collect();
        let pick = if tied.len() == 1 {
            tied[0]
        } else {
            tied[rng.gen_range(0..tied.len())]
        };
        Ok(Some((candidates.swap_remove(pick), earliest)))
    }

    /// Executes `chosen` at time `at`, returning the fired label.
    fn fire<R: Rng + ?Sized>(
        &self,
        state: &mut SimState,
        chosen: &EnabledInteraction,
        at: f64,
        rng: &mut R,
    ) -> Result<String, SimError> {
        let conn = &self.connectors[chosen.connector];
        state.now = at;

        let succeeded = match &conn.gate {
            None => true,
            Some(gate) => {
                let draw = gate
                    .sample(rng, &|s: &Slot| state.lookup(s))
                    .map_err(|source| SimError::Distribution {
                        context: format!("gate of connector `{}`", conn.name),
                        source,
                    })?;
                draw >= 0.5
            }
        };

        if succeeded {
            for ((i, v), e) in &conn.actions {
                let val = e.eval(&|s: &Slot| state.lookup(s)).map_err(|source| SimError::Eval {
                    context: format!("action of connector `{}`", conn.name),
                    source,
                })?;
                let kind = self.instances[*i].def.variables[*v].kind;
                state.vars[*i][*v] = coerce(val, kind, || format!("action of connector `{}`", conn.name))?;
            }
            for &(i, t) in &chosen.transitions {
                let inst = &self.instances[i];
                let tr = &inst.transitions[t];
                let name = || format!("`{}.{}`", inst.id, inst.def.transitions[t].name);
                if let Some((dist, v)) = &tr.outcome {
                    let x = dist
                        .sample(rng, &|s: &Slot| state.lookup(s))
                        .map_err(|source| SimError::Distribution {
                            context: format!("outcome of {}", name()),
                            source,
                        })?;
                    state.vars[i][*v] = Value::from_sample(inst.def.variables[*v].kind, x);
                }
                for (v, e) in &tr.updates {
                    let val = e.eval(&|s: &Slot| state.lookup(s)).map_err(|source| SimError::Eval {
                        context: format!("update of {}", name()),
                        source,
                    })?;
                    state.vars[i][*v] = coerce(val, inst.def.variables[*v].kind, || format!("update of {}", name()))?;
                }
            }
        }

        for &(i, t) in &chosen.transitions {
            let tr = &self.instances[i].transitions[t];
            for &c in &tr.resets {
                state.clock_resets[i][c] = at;
            }
            if tr.target != state.locations[i] {
                state.locations[i] = tr.target;
                state.entered[i] = at;
            }
        }

        Ok(if succeeded {
            conn.name.clone()
        } else {
            format!("{}:failed", conn.name)
        })
    }

    /// Performs one step from `state`.
    pub fn step<R: Rng + ?Sized>(&self, state: &SimState, rng: &mut R) -> Result<StepOutcome, SimError> {
        let Some((chosen, at)) = self.schedule(state, rng)? else {
            return Ok(StepOutcome::Quiescent);
        };
        let mut next = state.clone();
        let fired = self.fire(&mut next, &chosen, at, rng)?;
        let point = ObservationPoint {
            time: at,
            fired,
            values: next.snapshot(self),
        };
        Ok(StepOutcome::Fired { state: next, point })
    }

    /// Runs one trace up to `horizon`.
    pub fn simulate<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Result<Trace, SimError> {
        self.simulate_with_limit(horizon, rng, DEFAULT_MAX_STEPS)
    }

    pub fn simulate_with_limit<R: Rng + ?Sized>(
        &self,
        horizon: f64,
        rng: &mut R,
        max_steps: u64,
    ) -> Result<Trace, SimError> {
        if !(horizon > 0.0) {
            return Err(SimError::BadHorizon(horizon));
        }
        let mut state = self.initial_state();
        let mut points = vec![ObservationPoint {
            time: 0.0,
            fired: "init".to_string(),
            values: state.snapshot(self),
        }];
        let mut steps = 0u64;
        while let Some((chosen, at)) = self.schedule(&state, rng)? {
            if at > horizon {
                break;
            }
            steps += 1;
            if steps > max_steps {
                return Err(SimError::StepLimitExceeded(max_steps));
            }
            let fired = self.fire(&mut state, &chosen, at, rng)?;
            let values = state.snapshot(self);
            let last = points.last_mut().expect("non-empty");
            if last.time == at {
                last.fired.push(';');
                last.fired.push_str(&fired);
                last.values = values;
            } else {
                points.push(ObservationPoint {
                    time: at,
                    fired,
                    values,
                });
            }
        }
        Ok(Trace::new(Arc::from(self.columns.clone()), points, horizon))
    }
}

fn eval_bool(
    e: &crate::expr::Expr<Slot>,
    state: &SimState,
    context: impl Fn() -> String,
) -> Result<bool, SimError> {
    match e.eval(&|s: &Slot| state.lookup(s)) {
        Ok(Value::Bool(b)) => Ok(b),
        Ok(other) => Err(SimError::Eval {
            context: context(),
            source: EvalError::TypeMismatch(format!("expected bool, found {}", other.kind())),
        }),
        Err(source) => Err(SimError::Eval {
            context: context(),
            source,
        }),
    }
}

fn window(
    interval: &CInterval,
    origin: f64,
    state: &SimState,
    context: impl Fn() -> String,
) -> Result<Window, SimError> {
    let num = |e: &crate::expr::Expr<Slot>| {
        e.eval(&|s: &Slot| state.lookup(s))
            .map(|v| v.as_f64())
            .map_err(|source| SimError::Eval {
                context: context(),
                source,
            })
    };
    let lo = num(&interval.lo)?;
    let hi = match &interval.hi {
        Some(h) => num(h)?,
        None => f64::INFINITY,
    };
    if !(lo.is_finite() && lo >= 0.0 && hi >= lo) {
        return Err(SimError::InvalidWindow {
            context: context(),
            lo,
            hi,
        });
    }
    Ok(Window {
        lo: origin + lo,
        hi: origin + hi,
    })
}

fn coerce(v: Value, kind: crate::expr::ValueKind, context: impl Fn() -> String) -> Result<Value, SimError> {
    v.coerce(kind).ok_or_else(|| SimError::Eval {
        context: context(),
        source: EvalError::TypeMismatch(format!("cannot store {} in {kind} variable", v.kind())),
    })
}

/// Free-function form of [`CompoundModel::enabled_interactions`].
pub fn enabled_interactions(model: &CompoundModel, state: &SimState) -> Result<Vec<EnabledInteraction>, SimError> {
    model.enabled_interactions(state)
}

/// Free-function form of [`CompoundModel::step`].
pub fn step<R: Rng + ?Sized>(model: &CompoundModel, state: &SimState, rng: &mut R) -> Result<StepOutcome, SimError> {
    model.step(state, rng)
}

/// Free-function form of [`CompoundModel::simulate`].
pub fn simulate<R: Rng + ?Sized>(model: &CompoundModel, horizon: f64, rng: &mut R) -> Result<Trace, SimError> {
    model.simulate(horizon, rng)
}
