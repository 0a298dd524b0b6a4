use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_with, step_count, ControlSignal, Forcing, Mode, Pair, SimOptions, Stepper, WaveState};
use crate::error::{Error, Result};
use crate::operators::{airy_multipliers, schrodinger_multipliers, SystemParams};
use crate::spectral::{Reality, SpectralField, TorusGrid};

use super::krylov::{cg, gmres, KrylovStats};

/// Relative symmetry defect above which the Gramian solve switches to GMRES.
pub const SYMMETRY_FALLBACK: f64 = 1e-6;

/// Exact free evolution of the adjoint pair: Schrödinger group on `phi0`,
/// Airy group with drift `drift` on `psi0`.
pub fn adjoint_free_flow(
    phi0: &SpectralField,
    psi0: &SpectralField,
    t: f64,
    drift: f64,
) -> Result<(SpectralField, SpectralField)> {
    if psi0.reality() != Reality::Real || psi0.coeff(0).norm() > 1e-13 {
        return Err(Error::param("psi0", "must be real and mean-zero"));
    }
    let grid = phi0.grid();
    let mu = schrodinger_multipliers(grid, t);
    let mv = airy_multipliers(grid, t, drift);
    let mut phi = phi0.clone();
    for (c, m) in phi.coeffs_mut().iter_mut().zip(&mu) {
        *c *= m;
    }
    let mut psi = psi0.project_zero_mean();
    for (c, m) in psi.coeffs_mut().iter_mut().zip(&mv) {
        *c *= m;
    }
    Ok((phi, psi))
}

fn smoothstep5(s: f64) -> f64 {
    let s = s.clamp(0.0, 1.0);
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Time cutoff: 0 at both ends, 1 on `[T/3, 2T/3]`, quintic ramps between.
pub fn phi_window(t: f64, horizon: f64) -> f64 {
    let third = horizon / 3.0;
    if t <= third {
        smoothstep5(t / third)
    } else if t >= 2.0 * third {
        smoothstep5((horizon - t) / third)
    } else {
        1.0
    }
}

/// Steering `initial` to `target` over `[0, horizon]`.
#[derive(Clone, Debug)]
pub struct ControlProblem {
    pub params: SystemParams,
    pub initial: WaveState,
    pub target: WaveState,
    pub horizon: f64,
    pub dt: f64,
    /// Relative tolerance of the Gramian solve.
    pub tol: f64,
    pub max_iterations: usize,
}

impl ControlProblem {
    pub fn new(params: SystemParams, initial: WaveState, target: WaveState, horizon: f64) -> Self {
        Self {
            params,
            initial,
            target,
            horizon,
            dt: 1e-3,
            tol: 1e-11,
            max_iterations: 500,
        }
    }

    pub fn validate(&self) -> Result<usize> {
        self.params.validate()?;
        let steps = step_count(self.horizon, self.dt)?;
        for s in [&self.initial, &self.target] {
            if s.grid() != self.params.grid() {
                return Err(Error::SizeMismatch {
                    expected: self.params.grid().len(),
                    got: s.grid().len(),
                });
            }
        }
        if (self.initial.v_mean - self.target.v_mean).abs() > 1e-12 {
            return Err(Error::param(
                "target",
                format!(
                    "mean of v must match the initial mean ({} vs {})",
                    self.initial.v_mean, self.target.v_mean
                ),
            ));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::param("tol", "must be positive"));
        }
        Ok(steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Cg,
    Gmres,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramianReport {
    pub solver: SolverKind,
    pub cg_iterations: usize,
    pub residual: f64,
    pub symmetry_defect: f64,
    /// Smallest `⟨Λp, p⟩/⟨p, p⟩` over the search directions.
    pub min_rayleigh: f64,
}

/// Discrete HUM Gramian `Λ = L W Lᵀ`: `L` maps forcing samples to the terminal
/// state of the linear system started at rest, `W = φ²·(a², GG)`.
#[derive(Clone, Debug)]
pub struct Gramian {
    stepper: Stepper,
    grid: Arc<TorusGrid>,
    steps: usize,
    weights: Vec<f64>,
}

impl Gramian {
    pub fn new(params: &SystemParams, horizon: f64, dt: f64, v_mean: f64) -> Result<Self> {
        let steps = step_count(horizon, dt)?;
        let stepper = Stepper::new(&params.linearized(), Mode::OpenLoop, dt, v_mean)?;
        let weights = (0..=steps).map(|k| phi_window(k as f64 * dt, horizon).powi(2)).collect();
        Ok(Self {
            stepper,
            grid: params.grid().clone(),
            steps,
            weights,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.stepper.dt()
    }

    /// `Lᵀ z`: adjoint forcing samples for terminal dual `z`.
    fn pullback(&self, z: &Pair) -> Vec<Pair> {
        let n = self.grid.len();
        let mut bars = vec![Pair::zeros(n); self.steps + 1];
        let mut y = z.clone();
        for k in (0..self.steps).rev() {
            let (lo, hi) = bars.split_at_mut(k + 1);
            self.stepper.advance_transpose(&mut y, &mut lo[k], &mut hi[0]);
        }
        bars
    }

    /// Physical control samples `f = φ² a² p`, `h = φ² G q` for dual `z`.
    pub(crate) fn controls(&self, z: &Pair) -> ControlSignal {
        let profile = &self.stepper.params().profile;
        let a2 = profile.a_squared_samples();
        let n = self.grid.len();
        let mut f = Vec::with_capacity(self.steps + 1);
        let mut h = Vec::with_capacity(self.steps + 1);
        let mut gq = vec![0.0; n];
        for (bar, w) in self.pullback(z).into_iter().zip(&self.weights) {
            let mut p = bar.u;
            self.grid.inverse(&mut p);
            f.push(p.iter().zip(a2).map(|(c, s)| c * (w * s)).collect());
            let mut q = bar.v;
            self.grid.inverse(&mut q);
            let qr: Vec<f64> = q.iter().map(|c| c.re).collect();
            profile.apply_g_samples(&qr, &mut gq);
            h.push(gq.iter().map(|x| w * x).collect());
        }
        ControlSignal::new(&self.grid, self.dt(), f, h).expect("consistent sample grid")
    }

    /// Terminal state of the linear system from `x0` under `forcing`.
    fn push(&self, x0: &Pair, forcing: Option<&[Forcing]>) -> Pair {
        let mut y = x0.clone();
        for k in 0..self.steps {
            self.stepper
                .advance(&mut y, forcing.map(|f| (&f[k], &f[k + 1])));
        }
        y
    }

    pub(crate) fn free_terminal(&self, x0: &Pair) -> Pair {
        self.push(x0, None)
    }

    pub(crate) fn apply(&self, z: &Pair) -> Pair {
        let forcings = self.controls(z).forcings(&self.stepper.params().profile);
        self.push(&Pair::zeros(self.grid.len()), Some(&forcings))
    }

    /// `Λ` applied to a state-shaped dual variable.
    pub fn apply_state(&self, z: &WaveState) -> WaveState {
        let y = self.apply(&Pair::of(z));
        WaveState::from_coeffs(&self.grid, y.u, y.v, z.v_mean, z.t)
    }

    /// `max |⟨Λx, y⟩ − ⟨x, Λy⟩| / max(‖Λx‖, ‖Λy‖)` over random unit pairs.
    pub fn symmetry_defect(&self, seed: u64, pairs: usize) -> f64 {
        let max_mode = (self.grid.len() / 2) as i64;
        (0..pairs as u64)
            .map(|i| {
                let x = Pair::of(&WaveState::random(&self.grid, seed.wrapping_add(2 * i + 1), max_mode, 1.0));
                let y = Pair::of(&WaveState::random(&self.grid, seed.wrapping_add(2 * i + 2), max_mode, 1.0));
                let lx = self.apply(&x);
                let ly = self.apply(&y);
                let scale = lx.norm_sqr().sqrt().max(ly.norm_sqr().sqrt());
                (lx.dot(&y) - x.dot(&ly)).abs() / scale
            })
            .fold(0.0, f64::max)
    }

    /// Solves `Λ z = b`.
    pub(crate) fn solve(&self, b: &Pair, tol: f64, max_iter: usize, defect: f64) -> (Pair, GramianReport) {
        let op = |x: &Pair| self.apply(x);
        let (z, stats, solver): (Pair, KrylovStats, SolverKind) = if defect > SYMMETRY_FALLBACK {
            let (z, s) = gmres(&op, b, tol, max_iter, 60);
            (z, s, SolverKind::Gmres)
        } else {
            let (z, s) = cg(&op, b, tol, max_iter);
            (z, s, SolverKind::Cg)
        };
        (
            z,
            GramianReport {
                solver,
                cg_iterations: stats.iterations,
                residual: stats.residual,
                symmetry_defect: defect,
                min_rayleigh: stats.min_rayleigh,
            },
        )
    }
}

/// `Λ(φ₀, ψ₀)`: terminal state produced from rest by the HUM controls of the
/// terminal dual pair `(φ₀, ψ₀)`.
pub fn hum_forward_map(phi0: &SpectralField, psi0: &SpectralField, problem: &ControlProblem) -> Result<WaveState> {
    problem.validate()?;
    if psi0.reality() != Reality::Real {
        return Err(Error::param("psi0", "must be real"));
    }
    let gram = Gramian::new(&problem.params, problem.horizon, problem.dt, problem.initial.v_mean)?;
    let z = WaveState::new(phi0.clone(), psi0.clone(), problem.horizon)?;
    let mut out = gram.apply_state(&z);
    out.v_mean = problem.initial.v_mean;
    Ok(out)
}

/// Controls returned by [`solve_linear_control`].
#[derive(Clone, Debug)]
pub struct LinearControl {
    pub signal: ControlSignal,
    pub report: GramianReport,
    /// `‖x(T) − target‖ / max(‖initial‖, ‖target‖)` from an independent forward solve.
    pub terminal_residual: f64,
    pub terminal: WaveState,
}

pub(crate) fn relative_gap(a: &WaveState, b: &WaveState, scale: f64) -> f64 {
    a.difference(b).norm() / scale.max(f64::MIN_POSITIVE)
}

/// HUM steering of the linearized system.
pub fn solve_linear_control(problem: &ControlProblem) -> Result<LinearControl> {
    problem.validate()?;
    let params = problem.params.linearized();
    let gram = Gramian::new(&params, problem.horizon, problem.dt, problem.initial.v_mean)?;
    let free = gram.free_terminal(&Pair::of(&problem.initial));
    let mut rhs = Pair::of(&problem.target);
    rhs.axpy(-1.0, &free);
    let defect = if rhs.norm_sqr() == 0.0 {
        0.0
    } else {
        gram.symmetry_defect(0x5eed, 2)
    };
    let (z, report) = gram.solve(&rhs, problem.tol, problem.max_iterations, defect);
    if report.residual > problem.tol * 10.0 || !report.residual.is_finite() {
        return Err(Error::GramianIllConditioned {
            iterations: report.cg_iterations,
            residual: report.residual,
        });
    }
    let signal = gram.controls(&z);
    let terminal = verify(&params, problem, &signal)?;
    let scale = problem.initial.norm().max(problem.target.norm());
    let terminal_residual = if scale == 0.0 {
        terminal.norm()
    } else {
        relative_gap(&terminal, &problem.target, scale)
    };
    Ok(LinearControl {
        signal,
        report,
        terminal_residual,
        terminal,
    })
}

/// Independent open-loop forward solve under `signal`.
pub(crate) fn verify(params: &SystemParams, problem: &ControlProblem, signal: &ControlSignal) -> Result<WaveState> {
    let opts = SimOptions {
        mode: Mode::OpenLoop,
        record_every: usize::MAX,
        keep_states: false,
    };
    let tr = simulate_with(params, &problem.initial, problem.horizon, problem.dt, Some(signal), opts)?;
    Ok(tr.last)
}

#[cfg(test)]
pub(crate) fn zero_state_like(grid: &Arc<TorusGrid>, v_mean: f64) -> WaveState {
    let mut s = WaveState::zeros(grid);
    s.v_mean = v_mean;
    s
}
