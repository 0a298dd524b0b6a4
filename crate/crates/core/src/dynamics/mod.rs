//! Time integration of the coupled system, energy bookkeeping and the Picard oracle.

mod picard;
mod signal;
mod simulate;
mod state;
mod stepper;

pub use picard::{picard_solve, PicardReport, PICARD_TOLERANCE};
pub use signal::{ControlSignal, SignalDump};
pub use simulate::{
    dissipation_rate, energy, fit_decay_rate, simulate, simulate_with, DecayFit, EnergySample, SimOptions,
    Trajectory,
};
pub use state::{StateDump, WaveState};
pub use stepper::{rhs_closed_loop, Forcing, Mode, Stepper, Tangent, BLOWUP_GUARD};

pub(crate) use simulate::step_count;
pub(crate) use stepper::Pair;
