//! HUM controls for the linear system, fixed-point local control of the full
//! system, and global transfer between states of equal `v` mean.

mod export;
mod global;
mod hum;
mod krylov;
mod local;

pub use export::{write_signal_csv, ControlMeta};
pub use global::{global_transfer, replay, PhaseKind, SchedulePhase, TransferConfig, TransferReport};
pub use hum::{
    adjoint_free_flow, hum_forward_map, phi_window, solve_linear_control, ControlProblem, Gramian, GramianReport,
    LinearControl, SolverKind, SYMMETRY_FALLBACK,
};
pub use local::{nonlinear_local_control, LocalControl, LOCAL_TOLERANCE};
