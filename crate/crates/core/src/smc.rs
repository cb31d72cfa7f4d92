//! Statistical model checking: fixed-size estimation and sequential
//! hypothesis testing over independently seeded traces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{CompoundModel, SimError};
use crate::monitor::{evaluate, required_horizon, MtlError, MtlFormula, Truth, Verdict};
use crate::stochastics::rng_stream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmcError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("trace {index} produced an inconclusive verdict (horizon {horizon} < required {required})")]
    InconclusiveTrace { index: u64, horizon: f64, required: f64 },
    #[error("trace {index}: {source}")]
    Simulation {
        index: u64,
        #[source]
        source: SimError,
    },
    #[error(transparent)]
    Monitor(#[from] MtlError),
}

/// How independent traces are scheduled. Results never depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Chernoff-Hoeffding sample count `ceil(ln(2/alpha) / (2 delta^2))`.
pub fn sample_size(delta: f64, alpha: f64) -> Result<u64, SmcError> {
    check_unit("delta", delta)?;
    check_unit("alpha", alpha)?;
    Ok(((2.0 / alpha).ln() / (2.0 * delta * delta)).ceil() as u64)
}

fn check_unit(name: &str, x: f64) -> Result<(), SmcError> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(SmcError::BadParameter(format!("{name} must lie in (0, 1), got {x}")))
    }
}

fn one_trace(
    model: &CompoundModel,
    formula: &MtlFormula,
    horizon: f64,
    master_seed: u64,
    index: u64,
) -> Result<Verdict, SmcError> {
    let mut rng = rng_stream(master_seed, index);
    let trace = model
        .simulate(horizon, &mut rng)
        .map_err(|source| SmcError::Simulation { index, source })?;
    Ok(evaluate(formula, &trace)?)
}

fn run_range(
    model: &CompoundModel,
    formula: &MtlFormula,
    horizon: f64,
    master_seed: u64,
    range: std::ops::Range<u64>,
    execution: Execution,
) -> Vec<Result<Verdict, SmcError>> {
    match execution {
        Execution::Sequential => range
            .map(|i| one_trace(model, formula, horizon, master_seed, i))
            .collect(),
        Execution::Parallel => range
            .into_par_iter()
            .map(|i| one_trace(model, formula, horizon, master_seed, i))
            .collect(),
    }
}

/// Simulates and monitors traces `0..n`; trace `i` uses stream `i`.
pub fn run_traces(
    model: &CompoundModel,
    formula: &MtlFormula,
    horizon: f64,
    master_seed: u64,
    n: u64,
) -> Result<Vec<Verdict>, SmcError> {
    run_traces_with(model, formula, horizon, master_seed, n, Execution::Parallel)
}

pub fn run_traces_with(
    model: &CompoundModel,
    formula: &MtlFormula,
    horizon: f64,
    master_seed: u64,
    n: u64,
    execution: Execution,
) -> Result<Vec<Verdict>, SmcError> {
    if n == 0 {
        return Err(SmcError::BadParameter("trace count must be at least 1".into()));
    }
    run_range(model, formula, horizon, master_seed, 0..n, execution)
        .into_iter()
        .collect()
}

fn check_horizon(formula: &MtlFormula, horizon: f64) -> Result<f64, SmcError> {
    let required = required_horizon(formula);
    if !(horizon > 0.0) || horizon < required {
        return Err(SmcError::BadParameter(format!(
            "horizon {horizon} is shorter than the {required} the property needs"
        )));
    }
    Ok(required)
}

#[derive(Debug, Clone)]
pub struct EstimationRequest<'a> {
    pub model: &'a CompoundModel,
    pub formula: &'a MtlFormula,
    pub delta: f64,
    pub alpha: f64,
    pub master_seed: u64,
    pub horizon: f64,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub p_hat: f64,
    pub n_traces: u64,
    pub successes: u64,
    pub delta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub inconclusive_count: u64,
}

pub fn estimate(req: &EstimationRequest<'_>) -> Result<EstimationResult, SmcError> {
    let n = sample_size(req.delta, req.alpha)?;
    let required = check_horizon(req.formula, req.horizon)?;
    let verdicts = run_traces_with(req.model, req.formula, req.horizon, req.master_seed, n, req.execution)?;
    let mut successes = 0;
    for (i, v) in verdicts.iter().enumerate() {
        match v.value {
            Truth::True => successes += 1,
            Truth::False => {}
            Truth::Inconclusive => {
                return Err(SmcError::InconclusiveTrace {
                    index: i as u64,
                    horizon: req.horizon,
                    required,
                })
            }
        }
    }
    Ok(EstimationResult {
        p_hat: successes as f64 / n as f64,
        n_traces: n,
        successes,
        delta: req.delta,
        alpha: req.alpha,
        seed: req.master_seed,
        inconclusive_count: 0,
    })
}

pub const DEFAULT_EPSILON: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct HypothesisRequest<'a> {
    pub model: &'a CompoundModel,
    pub formula: &'a MtlFormula,
    pub horizon: f64,
    pub master_seed: u64,
    pub theta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub max_samples: u64,
    pub execution: Execution,
}

impl<'a> HypothesisRequest<'a> {
    /// Request with `epsilon = 0.01`, `beta = alpha` and
    /// `max_samples = 10 * sample_size(epsilon, alpha)`.
    pub fn new(
        model: &'a CompoundModel,
        formula: &'a MtlFormula,
        horizon: f64,
        master_seed: u64,
        theta: f64,
        alpha: f64,
    ) -> Result<Self, SmcError> {
        Ok(Self {
            model,
            formula,
            horizon,
            master_seed,
            theta,
            alpha,
            beta: alpha,
            epsilon: DEFAULT_EPSILON,
            max_samples: 10 * sample_size(DEFAULT_EPSILON, alpha)?,
            execution: Execution::Parallel,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    GeqTheta,
    LtTheta,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub decision: Decision,
    pub samples_used: u64,
    pub log_ratio: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
}

/// Validates the SPRT parameters without running anything.
pub fn check_hypothesis_parameters(theta: f64, epsilon: f64, alpha: f64, beta: f64) -> Result<(), SmcError> {
    check_unit("theta", theta)?;
    check_unit("alpha", alpha)?;
    check_unit("beta", beta)?;
    if !(epsilon > 0.0) || theta - epsilon <= 0.0 || theta + epsilon >= 1.0 {
        return Err(SmcError::BadParameter(format!(
            "indifference region [{}, {}] must lie strictly inside (0, 1)",
            theta - epsilon,
            theta + epsilon
        )));
    }
    Ok(())
}

const SPRT_CHUNK: u64 = 64;

/// Wald's sequential test of `p >= theta + epsilon` against
/// `p <= theta - epsilon`. Traces are generated in chunks but consumed in
/// index order, so the decision does not depend on the chunking.
pub fn hypothesis_test(req: &HypothesisRequest<'_>) -> Result<HypothesisResult, SmcError> {
    check_hypothesis_parameters(req.theta, req.epsilon, req.alpha, req.beta)?;
    if req.max_samples == 0 {
        return Err(SmcError::BadParameter("max_samples must be at least 1".into()));
    }
    let required = check_horizon(req.formula, req.horizon)?;
    let p1 = req.theta + req.epsilon;
    let p0 = req.theta - req.epsilon;
    let step_true = (p1 / p0).ln();
    let step_false = ((1.0 - p1) / (1.0 - p0)).ln();
    let accept_h1 = ((1.0 - req.beta) / req.alpha).ln();
    let accept_h0 = (req.beta / (1.0 - req.alpha)).ln();

    let mut log_ratio = 0.0;
    let mut used = 0u64;
    let finish = |decision, used, log_ratio| HypothesisResult {
        decision,
        samples_used: used,
        log_ratio,
        theta: req.theta,
        epsilon: req.epsilon,
        alpha: req.alpha,
        beta: req.beta,
        seed: req.master_seed,
    };
    while used < req.max_samples {
        let end = (used + SPRT_CHUNK).min(req.max_samples);
        let chunk = run_range(req.model, req.formula, req.horizon, req.master_seed, used..end, req.execution);
        for verdict in chunk {
            let index = used;
            match verdict?.value {
                Truth::True => log_ratio += step_true,
                Truth::False => log_ratio += step_false,
                Truth::Inconclusive => {
                    return Err(SmcError::InconclusiveTrace {
                        index,
                        horizon: req.horizon,
                        required,
                    })
                }
            }
            used += 1;
            if log_ratio >= accept_h1 {
                return Ok(finish(Decision::GeqTheta, used, log_ratio));
            }
            if log_ratio <= accept_h0 {
                return Ok(finish(Decision::LtTheta, used, log_ratio));
            }
        }
    }
    Ok(finish(Decision::Undecided, used, log_ratio))
}
