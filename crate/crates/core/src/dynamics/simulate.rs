use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{ParamsSnapshot, SystemParams};
use crate::spectral;

use super::signal::ControlSignal;
use super::state::WaveState;
use super::stepper::{Mode, Pair, Stepper};

/// `E = ‖u‖² + ‖ṽ‖²`.
pub fn energy(state: &WaveState) -> f64 {
    state.energy()
}

/// `dE/dt = −2(‖a u‖² + ‖G v‖²)` for the damped system.
pub fn dissipation_rate(state: &WaveState, params: &SystemParams) -> f64 {
    let profile = &params.profile;
    let u = state.u.to_physical();
    let n = u.len() as f64;
    let au: f64 = u
        .iter()
        .zip(profile.a_squared_samples())
        .map(|(c, a2)| a2 * c.norm_sqr())
        .sum::<f64>()
        / n;
    let gv = profile.apply_g(&state.v);
    -2.0 * (au + spectral::norm_sqr(gv.coeffs()))
}

/// One logged sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySample {
    pub t: f64,
    pub energy: f64,
    pub u_norm: f64,
    pub v_norm: f64,
    pub dissipation: f64,
}

impl EnergySample {
    fn of(state: &WaveState, params: &SystemParams) -> Self {
        Self {
            t: state.t,
            energy: state.energy(),
            u_norm: state.u.l2_norm(),
            v_norm: state.v.l2_norm(),
            dissipation: dissipation_rate(state, params),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SimOptions {
    pub mode: Mode,
    /// Log every `record_every` steps.
    pub record_every: usize,
    /// Keep full states at the logged samples.
    pub keep_states: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            mode: Mode::ClosedLoop,
            record_every: 1,
            keep_states: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub record_every: usize,
    pub mode: Mode,
    pub meta: ParamsSnapshot,
    pub samples: Vec<EnergySample>,
    /// Empty unless states were kept.
    pub states: Vec<WaveState>,
    pub last: WaveState,
    /// Largest `|v̂(0)|` removed by the per-step projection.
    pub max_mean_drift: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    /// `max_t |[v](t) − [v](0)|` over kept states.
    pub fn mean_deviation(&self) -> f64 {
        let Some(first) = self.states.first() else {
            return (self.last.full_v().coeff(0).re - self.last.v_mean).abs();
        };
        let m0 = first.full_v().coeff(0).re;
        self.states
            .iter()
            .chain(std::iter::once(&self.last))
            .map(|s| (s.full_v().coeff(0).re - m0).abs())
            .fold(0.0, f64::max)
    }

    /// CSV with columns `t,energy,u_norm,v_norm,dissipation`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,energy,u_norm,v_norm,dissipation")?;
        for s in &self.samples {
            writeln!(w, "{:e},{:e},{:e},{:e},{:e}", s.t, s.energy, s.u_norm, s.v_norm, s.dissipation)?;
        }
        Ok(())
    }
}

pub(crate) fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final.is_finite() && t_final > 0.0) {
        return Err(Error::param("T", "must be positive"));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let k = (t_final / dt).round();
    if (k * dt - t_final).abs() > 1e-9 * t_final || k < 1.0 {
        return Err(Error::param("dt", format!("must divide T = {t_final}")));
    }
    Ok(k as usize)
}

/// Damped run with every step logged.
pub fn simulate(
    params: &SystemParams,
    initial: &WaveState,
    t_final: f64,
    dt: f64,
    forcing: Option<&ControlSignal>,
) -> Result<Trajectory> {
    let mode = if forcing.is_some() { Mode::OpenLoop } else { Mode::ClosedLoop };
    simulate_with(
        params,
        initial,
        t_final,
        dt,
        forcing,
        SimOptions {
            mode,
            ..SimOptions::default()
        },
    )
}

pub fn simulate_with(
    params: &SystemParams,
    initial: &WaveState,
    t_final: f64,
    dt: f64,
    forcing: Option<&ControlSignal>,
    opts: SimOptions,
) -> Result<Trajectory> {
    let steps = step_count(t_final, dt)?;
    if initial.grid() != params.grid() {
        return Err(Error::SizeMismatch {
            expected: params.grid().len(),
            got: initial.grid().len(),
        });
    }
    let forcings = match forcing {
        Some(sig) => {
            if sig.steps() != steps || (sig.dt() - dt).abs() > 1e-12 * dt {
                return Err(Error::param("forcing", "sample grid does not match T and dt"));
            }
            if sig.grid() != params.grid() {
                return Err(Error::SizeMismatch {
                    expected: params.grid().len(),
                    got: sig.grid().len(),
                });
            }
            Some(sig.forcings(&params.profile))
        }
        None => None,
    };
    let record = opts.record_every.max(1);
    let stepper = Stepper::new(params, opts.mode, dt, initial.v_mean)?;
    let grid = initial.grid().clone();
    let mut y = Pair::of(initial);
    let mut samples = vec![EnergySample::of(initial, params)];
    let mut states = Vec::new();
    if opts.keep_states {
        states.push(initial.clone());
    }
    let mut drift: f64 = 0.0;
    let mut current = initial.clone();
    for k in 0..steps {
        let fk = forcings.as_ref().map(|f| (&f[k], &f[k + 1]));
        drift = drift.max(stepper.advance(&mut y, fk));
        let t = initial.t + (k + 1) as f64 * dt;
        stepper.check(&y, t)?;
        if (k + 1) % record == 0 || k + 1 == steps {
            current = WaveState::from_coeffs(&grid, y.u.clone(), y.v.clone(), initial.v_mean, t);
            samples.push(EnergySample::of(&current, params));
            if opts.keep_states {
                states.push(current.clone());
            }
        }
    }
    Ok(Trajectory {
        dt,
        record_every: record,
        mode: opts.mode,
        meta: params.snapshot(),
        samples,
        states,
        last: current,
        max_mean_drift: drift,
    })
}

/// Least-squares fit of `log E` on a time window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `‖(u, ṽ)(t)‖ ≈ C e^{−γ t} ‖(u₀, ṽ₀)‖`.
    pub gamma: f64,
    pub c: f64,
    pub r_squared: f64,
    pub samples: usize,
}

pub fn fit_decay_rate(traj: &Trajectory, t0: f64, t1: f64) -> Result<DecayFit> {
    if !(t1 > t0 && t0 >= 0.0) {
        return Err(Error::param("window", "need t1 > t0 >= 0"));
    }
    let e0 = traj.samples.first().map(|s| s.energy).unwrap_or(0.0);
    fit_samples(&traj.samples, t0, t1, e0)
}

pub(crate) fn fit_samples(samples: &[EnergySample], t0: f64, t1: f64, e0: f64) -> Result<DecayFit> {
    let eps = 1e-9 * (t1 - t0);
    let window: Vec<&EnergySample> = samples
        .iter()
        .filter(|s| s.t >= t0 - eps && s.t <= t1 + eps)
        .collect();
    if window.len() < 2 {
        return Err(Error::TrajectoryTooShort {
            got: window.len(),
            need: 2,
        });
    }
    if window.iter().any(|s| s.energy <= 0.0) {
        return Err(Error::AlreadyAtRest);
    }
    let n = window.len() as f64;
    let xs: Vec<f64> = window.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.energy.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy <= f64::EPSILON * n * my.abs().max(1.0) {
        1.0
    } else {
        1.0 - sse / syy
    };
    let c = if e0 > 0.0 { (intercept.exp() / e0).sqrt() } else { f64::NAN };
    Ok(DecayFit {
        gamma: -slope / 2.0,
        c,
        r_squared,
        samples: window.len(),
    })
}
