use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_with, ControlSignal, Mode, Pair, SimOptions, Stepper, WaveState};
use crate::error::{Error, Result};
use crate::operators::SystemParams;

use super::hum::ControlProblem;
use super::local::{nonlinear_local_control, LocalControl};

#[derive(Clone, Copy, Debug)]
pub struct TransferConfig {
    pub dt: f64,
    /// Horizon of the steering phase.
    pub horizon: f64,
    /// Damped phases stop once `‖(u, ṽ)‖ ≤ delta`.
    pub delta: f64,
    /// Cap on each damped phase.
    pub max_phase_time: f64,
    pub local_iterations: usize,
    /// Acceptable end-to-end residual.
    pub tol: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 1.0,
            delta: 0.02,
            max_phase_time: 200.0,
            local_iterations: 20,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseKind {
    /// Damped flow from the initial state.
    Stabilize,
    /// Local steering between the two small states.
    Steer,
    /// Damped flow from the target, replayed in reverse under anti-damping feedback.
    Retrace,
}

#[derive(Clone, Debug)]
pub struct SchedulePhase {
    pub kind: PhaseKind,
    pub mode: Mode,
    pub steps: usize,
    pub duration: f64,
    pub control: Option<ControlSignal>,
}

#[derive(Clone, Debug)]
pub struct TransferReport {
    pub phases: Vec<SchedulePhase>,
    /// Small state reached from the initial data.
    pub entry: WaveState,
    /// Small state from which the retrace phase ends at the target.
    pub exit: WaveState,
    pub steering: Option<LocalControl>,
    /// `‖x_end − target‖` from re-simulating the whole schedule.
    pub residual: f64,
    pub terminal: WaveState,
}

impl TransferReport {
    pub fn total_time(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }
}

fn phase_cap(cfg: &TransferConfig) -> usize {
    (cfg.max_phase_time / cfg.dt).ceil() as usize
}

/// Stabilize, steer, retrace: moves `initial` to `target` (equal `v` means).
pub fn global_transfer(
    initial: &WaveState,
    target: &WaveState,
    params: &SystemParams,
    cfg: &TransferConfig,
) -> Result<TransferReport> {
    if (initial.v_mean - target.v_mean).abs() > 1e-12 {
        return Err(Error::param("target", "mean of v must match the initial mean"));
    }
    if !(cfg.delta > 0.0 && cfg.tol > 0.0 && cfg.max_phase_time > 0.0) {
        return Err(Error::param("config", "delta, tol and max_phase_time must be positive"));
    }
    let v_mean = initial.v_mean;
    let threshold = cfg.delta * cfg.delta;
    let cap = phase_cap(cfg);

    let damped = Stepper::new(params, Mode::ClosedLoop, cfg.dt, v_mean)?;
    let mut y = Pair::of(initial);
    let mut k1 = 0;
    while y.norm_sqr() > threshold {
        if k1 >= cap {
            return Err(Error::DecayStalled {
                phase: "stabilize",
                energy: y.norm_sqr(),
                threshold,
                t: k1 as f64 * cfg.dt,
            });
        }
        damped.advance(&mut y, None);
        k1 += 1;
        damped.check(&y, k1 as f64 * cfg.dt)?;
    }
    let entry = WaveState::from_coeffs(initial.grid(), y.u, y.v, v_mean, 0.0);

    let anti = Stepper::new(params, Mode::AntiDamped, cfg.dt, v_mean)?;
    let mut y = Pair::of(target);
    let mut k2 = 0;
    while y.norm_sqr() > threshold {
        if k2 >= cap {
            return Err(Error::DecayStalled {
                phase: "retrace",
                energy: y.norm_sqr(),
                threshold,
                t: k2 as f64 * cfg.dt,
            });
        }
        anti.advance_inverse(&mut y)?;
        k2 += 1;
        anti.check(&y, -(k2 as f64) * cfg.dt)?;
    }
    let exit = WaveState::from_coeffs(target.grid(), y.u, y.v, v_mean, 0.0);

    let mut problem = ControlProblem::new(params.clone(), entry.clone(), exit.clone(), cfg.horizon);
    problem.dt = cfg.dt;
    let steering = nonlinear_local_control(&problem, 2.0 * cfg.delta, cfg.local_iterations)?;

    let mut phases = Vec::new();
    if k1 > 0 {
        phases.push(SchedulePhase {
            kind: PhaseKind::Stabilize,
            mode: Mode::ClosedLoop,
            steps: k1,
            duration: k1 as f64 * cfg.dt,
            control: None,
        });
    }
    phases.push(SchedulePhase {
        kind: PhaseKind::Steer,
        mode: Mode::OpenLoop,
        steps: steering.signal.steps(),
        duration: steering.signal.horizon(),
        control: Some(steering.signal.clone()),
    });
    if k2 > 0 {
        phases.push(SchedulePhase {
            kind: PhaseKind::Retrace,
            mode: Mode::AntiDamped,
            steps: k2,
            duration: k2 as f64 * cfg.dt,
            control: None,
        });
    }
    let terminal = replay(params, initial, &phases, cfg.dt)?;
    let residual = terminal.difference(target).norm();
    if residual > cfg.tol || !residual.is_finite() {
        return Err(Error::VerificationFailed {
            residual,
            tolerance: cfg.tol,
        });
    }
    Ok(TransferReport {
        phases,
        entry,
        exit,
        steering: Some(steering),
        residual,
        terminal,
    })
}

/// Forward re-simulation of a schedule from `initial`.
pub fn replay(params: &SystemParams, initial: &WaveState, phases: &[SchedulePhase], dt: f64) -> Result<WaveState> {
    let mut state = initial.clone();
    for phase in phases {
        let opts = SimOptions {
            mode: phase.mode,
            record_every: usize::MAX,
            keep_states: false,
        };
        let start = state.t;
        state.t = 0.0;
        let mut next = simulate_with(params, &state, phase.duration, dt, phase.control.as_ref(), opts)?.last;
        next.t += start;
        state = next;
    }
    Ok(state)
}
