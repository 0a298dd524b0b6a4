use crate::error::{Error, Result};
use crate::operators::{airy_multipliers, schrodinger_multipliers, SystemParams};
use crate::spectral::C64;

use super::simulate::step_count;
use super::state::WaveState;
use super::stepper::{Mode, Pair, Stepper};

/// Fixed-point solution of the Duhamel equations on a uniform time grid.
#[derive(Clone, Debug)]
pub struct PicardReport {
    pub times: Vec<f64>,
    pub states: Vec<WaveState>,
    pub iterations: usize,
    /// `sup_t ‖y^{(k+1)}(t) − y^{(k)}(t)‖` per iteration.
    pub differences: Vec<f64>,
}

impl PicardReport {
    pub fn final_state(&self) -> &WaveState {
        self.states.last().expect("at least one sample")
    }

    /// Successive ratios of the iterate differences.
    pub fn ratios(&self) -> Vec<f64> {
        self.differences.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

pub const PICARD_TOLERANCE: f64 = 1e-10;

/// Picard iteration of the damped Duhamel maps, integrals by the composite
/// trapezoid rule against the exact linear groups.
pub fn picard_solve(
    params: &SystemParams,
    initial: &WaveState,
    t_final: f64,
    samples: usize,
    max_iterations: usize,
) -> Result<PicardReport> {
    if samples < 1 {
        return Err(Error::param("samples", "need at least one interval"));
    }
    let h = t_final / samples as f64;
    step_count(t_final, h)?;
    let grid = initial.grid().clone();
    let field = Stepper::new(params, Mode::ClosedLoop, h, initial.v_mean)?;
    let drift = field.drift();
    let times: Vec<f64> = (0..=samples).map(|m| m as f64 * h).collect();
    let prop: Vec<(Vec<C64>, Vec<C64>)> = times
        .iter()
        .map(|&t| (schrodinger_multipliers(&grid, t), airy_multipliers(&grid, t, drift)))
        .collect();
    let apply = |y: &Pair, m: usize, back: bool| -> Pair {
        let (pu, pv) = &prop[m];
        let f = |c: &C64, p: &C64| if back { c * p.conj() } else { c * p };
        Pair {
            u: y.u.iter().zip(pu).map(|(c, p)| f(c, p)).collect(),
            v: y.v.iter().zip(pv).map(|(c, p)| f(c, p)).collect(),
        }
    };
    let y0 = Pair::of(initial);
    let mut current: Vec<Pair> = (0..=samples).map(|m| apply(&y0, m, false)).collect();
    let mut differences = Vec::new();
    for iteration in 1..=max_iterations {
        let pulled: Vec<Pair> = current
            .iter()
            .enumerate()
            .map(|(m, y)| apply(&field.middle(y, None), m, true))
            .collect();
        let mut acc = y0.clone();
        let mut next = Vec::with_capacity(samples + 1);
        next.push(apply(&acc, 0, false));
        for m in 1..=samples {
            acc.axpy(0.5 * h, &pulled[m - 1]);
            acc.axpy(0.5 * h, &pulled[m]);
            next.push(apply(&acc, m, false));
        }
        let mut diff: f64 = 0.0;
        for (a, b) in next.iter().zip(&current) {
            let mut d = a.clone();
            d.axpy(-1.0, b);
            diff = diff.max(d.norm_sqr().sqrt());
            field.check(a, initial.t)?;
        }
        differences.push(diff);
        current = next;
        if diff <= PICARD_TOLERANCE {
            let states = current
                .into_iter()
                .zip(&times)
                .map(|(y, &t)| WaveState::from_coeffs(&grid, y.u, y.v, initial.v_mean, initial.t + t))
                .collect();
            return Ok(PicardReport {
                times: times.iter().map(|t| initial.t + t).collect(),
                states,
                iterations: iteration,
                differences,
            });
        }
        if !diff.is_finite() {
            break;
        }
    }
    Err(Error::PicardNonContraction {
        iterations: max_iterations,
        last_diff: differences.last().copied().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::simulate::{simulate_with, SimOptions};
    use crate::operators::{ActuatorProfile, ProfileSpec};
    use crate::spectral::TorusGrid;
    use std::f64::consts::PI;

    fn damped(n: usize) -> SystemParams {
        let g = TorusGrid::new(n).unwrap();
        let prof = ActuatorProfile::build(&g, ProfileSpec::new(PI, PI / 2.0, 0.5)).unwrap();
        SystemParams::new(1.0, 0.3, prof)
    }

    #[test]
    fn zero_data_converges_immediately() {
        let p = damped(16);
        let r = picard_solve(&p, &WaveState::zeros(p.grid()), 0.05, 50, 10).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.final_state().energy(), 0.0);
    }

    #[test]
    fn agrees_with_stepper_on_small_data() {
        let p = damped(32);
        let s = WaveState::random(p.grid(), 17, 4, 0.1);
        let r = picard_solve(&p, &s, 0.05, 2000, 60).unwrap();
        let opts = SimOptions {
            keep_states: false,
            record_every: 500,
            ..SimOptions::default()
        };
        let tr = simulate_with(&p, &s, 0.05, 1e-4, None, opts).unwrap();
        let err = tr.last.difference(r.final_state()).norm();
        assert!(err < 1e-6, "discrepancy {err}");
        assert!(r.ratios().iter().all(|&q| q < 1.0));
    }

    #[test]
    fn long_horizon_reports_non_contraction() {
        let p = damped(32);
        let s = WaveState::random(p.grid(), 17, 4, 0.1);
        assert!(matches!(
            picard_solve(&p, &s, 5.0, 500, 3),
            Err(Error::PicardNonContraction { .. })
        ));
    }
}
