use crate::dynamics::{ControlSignal, Mode, Pair, Stepper, WaveState};
use crate::error::{Error, Result};

use super::hum::{relative_gap, verify, ControlProblem, Gramian, GramianReport};

/// Successive-iterate threshold of the fixed-point loop.
pub const LOCAL_TOLERANCE: f64 = 1e-10;

/// Outcome of [`nonlinear_local_control`].
#[derive(Clone, Debug)]
pub struct LocalControl {
    pub signal: ControlSignal,
    pub iterations: usize,
    /// Successive dual differences in the HUM norm `‖dz‖_Λ = ⟨Λ dz, dz⟩^{1/2}`,
    /// the `L²` size of the control increment.
    pub differences: Vec<f64>,
    /// Total Gramian iterations over all solves.
    pub gramian_iterations: usize,
    pub last_report: GramianReport,
    /// `‖x(T) − target‖` from an independent nonlinear forward solve.
    pub terminal_residual: f64,
    pub terminal: WaveState,
}

/// Fixed point `z = z + Λ⁻¹(target − F(z))`, where `F(z)` is the terminal state
/// of the full nonlinear system under the HUM controls of dual `z`. Equivalent to
/// `z = Λ⁻¹(target − free(initial) − K(z))` with `K` the nonlinear remainder.
pub fn nonlinear_local_control(problem: &ControlProblem, delta: f64, max_iterations: usize) -> Result<LocalControl> {
    problem.validate()?;
    for (name, s) in [("initial", &problem.initial), ("target", &problem.target)] {
        if s.norm() >= delta {
            return Err(Error::param(
                name,
                format!("norm {:.3e} not below delta = {delta:.3e}; data too large for local control", s.norm()),
            ));
        }
    }
    let params = &problem.params;
    let gram = Gramian::new(params, problem.horizon, problem.dt, problem.initial.v_mean)?;
    let stepper = Stepper::new(params, Mode::OpenLoop, problem.dt, problem.initial.v_mean)?;
    let target = Pair::of(&problem.target);
    let x0 = Pair::of(&problem.initial);
    let n = x0.u.len();
    let defect = gram.symmetry_defect(0x10ca1, 1);

    let terminal_of = |z: &Pair| -> Result<Pair> {
        let forcings = gram.controls(z).forcings(&params.profile);
        let mut y = x0.clone();
        for k in 0..gram.steps() {
            stepper.advance(&mut y, Some((&forcings[k], &forcings[k + 1])));
            stepper.check(&y, (k + 1) as f64 * problem.dt)?;
        }
        Ok(y)
    };

    let mut z = Pair::zeros(n);
    let mut differences = Vec::new();
    let mut total = 0;
    let mut growth = 0;
    for j in 1..=max_iterations {
        let mut mismatch = target.clone();
        mismatch.axpy(-1.0, &terminal_of(&z)?);
        let (dz, report) = gram.solve(&mismatch, problem.tol, problem.max_iterations, defect);
        total += report.cg_iterations;
        if !report.residual.is_finite() || report.residual > problem.tol * 10.0 {
            return Err(Error::GramianIllConditioned {
                iterations: report.cg_iterations,
                residual: report.residual,
            });
        }
        z.axpy(1.0, &dz);
        let diff = mismatch.dot(&dz).abs().sqrt();
        if let Some(&prev) = differences.last() {
            if diff > prev {
                growth += 1;
            } else {
                growth = 0;
            }
        }
        differences.push(diff);
        if !diff.is_finite() || growth >= 2 {
            return Err(Error::LocalControlDivergence {
                iterations: j,
                last_diff: diff,
            });
        }
        if diff <= LOCAL_TOLERANCE {
            let signal = gram.controls(&z);
            let terminal = verify(params, problem, &signal)?;
            let terminal_residual = relative_gap(&terminal, &problem.target, 1.0);
            return Ok(LocalControl {
                signal,
                iterations: j,
                differences,
                gramian_iterations: total,
                last_report: report,
                terminal_residual,
                terminal,
            });
        }
    }
    Err(Error::LocalControlDivergence {
        iterations: max_iterations,
        last_diff: differences.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::hum::{solve_linear_control, zero_state_like};
    use crate::operators::{ActuatorProfile, ProfileSpec, SystemParams};
    use crate::spectral::TorusGrid;
    use std::f64::consts::PI;

    fn params(n: usize) -> SystemParams {
        let g = TorusGrid::new(n).unwrap();
        let prof = ActuatorProfile::build(&g, ProfileSpec::new(PI, PI / 2.0, 0.5)).unwrap();
        SystemParams::new(1.0, 0.0, prof)
    }

    #[test]
    fn zero_data_converges_in_one_iteration() {
        let p = params(16);
        let z = zero_state_like(p.grid(), 0.0);
        let r = nonlinear_local_control(&ControlProblem::new(p, z.clone(), z, 0.5), 0.1, 5).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.signal.l2_norm(), 0.0);
    }

    #[test]
    fn linear_system_matches_linear_solver() {
        let p = params(16).linearized();
        let x0 = WaveState::random(p.grid(), 2, 6, 0.01);
        let prob = ControlProblem::new(p.clone(), x0, zero_state_like(p.grid(), 0.0), 1.0);
        let nl = nonlinear_local_control(&prob, 0.1, 5).unwrap();
        let lin = solve_linear_control(&prob).unwrap();
        assert!(nl.iterations <= 2);
        let a = nl.signal.l2_norm();
        let b = lin.signal.l2_norm();
        assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
    }

    #[test]
    fn small_nonlinear_data_reaches_rest() {
        let p = params(16);
        let mut x0 = WaveState::random(p.grid(), 7, 6, 0.01);
        x0.v_mean = 0.1;
        let prob = ControlProblem::new(p.clone(), x0, zero_state_like(p.grid(), 0.1), 1.0);
        let r = nonlinear_local_control(&prob, 0.1, 20).unwrap();
        assert!(r.terminal_residual < 1e-8, "{}", r.terminal_residual);
    }

    #[test]
    fn large_data_is_rejected_up_front() {
        let p = params(16);
        let x0 = WaveState::random(p.grid(), 7, 6, 1.0);
        let prob = ControlProblem::new(p.clone(), x0, zero_state_like(p.grid(), 0.0), 0.5);
        assert!(nonlinear_local_control(&prob, 0.1, 20).is_err());
    }
}
