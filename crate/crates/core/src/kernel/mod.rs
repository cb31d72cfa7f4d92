//! Component models and their stochastic timed execution.

mod model;
mod sim;
mod trace;

pub use model::{
    build_compound, AtomicComponentDef, BuildError, CompoundModel, ConnectorDef, Interval, Outcome,
    PriorityRule, Slot, TransitionDef, VariableDef,
};
pub use sim::{
    enabled_interactions, simulate, step, EnabledInteraction, SimError, SimState, StepOutcome, Window,
    DEFAULT_MAX_STEPS,
};
pub use trace::{ObservationPoint, Trace, TraceCsvError};
