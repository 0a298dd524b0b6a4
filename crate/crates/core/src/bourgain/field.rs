use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::spectral::{TorusGrid, C64};

/// Smooth cutoff: 1 on `[−1, 1]`, 0 outside `(−2, 2)`.
pub fn psi(t: f64) -> f64 {
    let a = t.abs();
    if a <= 1.0 {
        return 1.0;
    }
    if a >= 2.0 {
        return 0.0;
    }
    let s = 2.0 - a;
    let f = |x: f64| if x <= 0.0 { 0.0 } else { (-1.0 / x).exp() };
    f(s) / (f(s) + f(1.0 - s))
}

/// Time cutoff `ψ((t − center)/scale)`, or none.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowSpec {
    None,
    Psi { center: f64, scale: f64 },
}

impl WindowSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            WindowSpec::None => 1.0,
            WindowSpec::Psi { center, scale } => psi((t - center) / scale),
        }
    }
}

/// Collocation points in `x` times `m` uniform samples `t_j = t0 + j·dt`.
pub struct SpaceTimeGrid {
    x: Arc<TorusGrid>,
    m: usize,
    dt: f64,
    t0: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpaceTimeGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpaceTimeGrid")
            .field("n", &self.x.len())
            .field("m", &self.m)
            .field("dt", &self.dt)
            .field("t0", &self.t0)
            .finish()
    }
}

impl SpaceTimeGrid {
    pub fn new(x: &Arc<TorusGrid>, m: usize, dt: f64, t0: f64) -> Result<Arc<Self>> {
        if m < 8 {
            return Err(Error::TrajectoryTooShort { got: m, need: 8 });
        }
        if !m.is_multiple_of(2) {
            return Err(Error::param("m", "number of time samples must be even"));
        }
        if !(dt.is_finite() && dt > 0.0 && t0.is_finite()) {
            return Err(Error::param("dt", "must be positive"));
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            x: x.clone(),
            m,
            dt,
            t0,
            fft: planner.plan_fft_forward(m),
            ifft: planner.plan_fft_inverse(m),
        }))
    }

    /// `m` samples spanning `[−half_span, half_span)`.
    pub fn symmetric(x: &Arc<TorusGrid>, m: usize, half_span: f64) -> Result<Arc<Self>> {
        Self::new(x, m, 2.0 * half_span / m as f64, -half_span)
    }

    pub fn x(&self) -> &Arc<TorusGrid> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn dtau(&self) -> f64 {
        2.0 * PI / (self.m as f64 * self.dt)
    }

    /// Dual frequency of FFT-ordered index `m`.
    pub fn tau(&self, m: usize) -> f64 {
        let s = if m < self.m / 2 { m as i64 } else { m as i64 - self.m as i64 };
        s as f64 * self.dtau()
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.m).map(|m| self.tau(m)).collect()
    }

    /// Physical samples (row `j` = time `t_j`) to `ŵ(n, τ)`, stored `[k·m + l]`.
    pub fn forward(&self, phys: &[C64]) -> Vec<C64> {
        let (n, m) = (self.n(), self.m);
        let mut rows = phys.to_vec();
        for j in 0..m {
            self.x.forward(&mut rows[j * n..(j + 1) * n]);
        }
        let scale = self.dt / (2.0 * PI).sqrt();
        let mut out = vec![C64::new(0.0, 0.0); n * m];
        let mut col = vec![C64::new(0.0, 0.0); m];
        for k in 0..n {
            for j in 0..m {
                col[j] = rows[j * n + k];
            }
            self.fft.process(&mut col);
            for l in 0..m {
                out[k * m + l] = col[l] * C64::from_polar(scale, -self.tau(l) * self.t0);
            }
        }
        out
    }

    /// Inverse of [`forward`](Self::forward).
    pub fn inverse(&self, coeffs: &[C64]) -> Vec<C64> {
        let (n, m) = (self.n(), self.m);
        let scale = (2.0 * PI).sqrt() / (self.dt * m as f64);
        let mut phys = vec![C64::new(0.0, 0.0); n * m];
        let mut col = vec![C64::new(0.0, 0.0); m];
        for k in 0..n {
            for l in 0..m {
                col[l] = coeffs[k * m + l] * C64::from_polar(scale, self.tau(l) * self.t0);
            }
            self.ifft.process(&mut col);
            for j in 0..m {
                phys[j * n + k] = col[j];
            }
        }
        for j in 0..m {
            self.x.inverse(&mut phys[j * n..(j + 1) * n]);
        }
        phys
    }
}

/// Space-time Fourier coefficients `ŵ(n, τ_l)` of a windowed field, normalized
/// so that `Σ_n Σ_l |ŵ|² Δτ` equals the discrete space-time `L²` norm squared.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    grid: Arc<SpaceTimeGrid>,
    coeffs: Vec<C64>,
    window: WindowSpec,
}

impl SpaceTimeField {
    pub fn zeros(grid: &Arc<SpaceTimeGrid>) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![C64::new(0.0, 0.0); grid.n() * grid.m()],
            window: WindowSpec::None,
        }
    }

    pub fn from_coeffs(grid: &Arc<SpaceTimeGrid>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.n() * grid.m() {
            return Err(Error::SizeMismatch {
                expected: grid.n() * grid.m(),
                got: coeffs.len(),
            });
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            window: WindowSpec::None,
        })
    }

    /// Physical samples (row-major in time), multiplied by `window`.
    pub fn from_physical(grid: &Arc<SpaceTimeGrid>, phys: &[C64], window: WindowSpec) -> Result<Self> {
        if phys.len() != grid.n() * grid.m() {
            return Err(Error::SizeMismatch {
                expected: grid.n() * grid.m(),
                got: phys.len(),
            });
        }
        let n = grid.n();
        let windowed: Vec<C64> = phys
            .iter()
            .enumerate()
            .map(|(i, c)| c * window.eval(grid.time(i / n)))
            .collect();
        Ok(Self {
            coeffs: grid.forward(&windowed),
            grid: grid.clone(),
            window,
        })
    }

    pub fn to_physical(&self) -> Vec<C64> {
        self.grid.inverse(&self.coeffs)
    }

    pub fn grid(&self) -> &Arc<SpaceTimeGrid> {
        &self.grid
    }

    pub fn window(&self) -> WindowSpec {
        self.window
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Coefficient at spatial index `k` and time-frequency index `l`.
    pub fn at(&self, k: usize, l: usize) -> C64 {
        self.coeffs[k * self.grid.m() + l]
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= alpha;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        out
    }

    /// `∂_x` applied in `n`; the Nyquist row is dropped.
    pub fn dx(&self) -> Self {
        let mut out = self.clone();
        let m = self.grid.m();
        let xg = self.grid.x();
        for k in 0..xg.len() {
            let factor = if k == xg.nyquist_index() {
                C64::new(0.0, 0.0)
            } else {
                C64::new(0.0, xg.wavenumber(k) as f64)
            };
            for c in &mut out.coeffs[k * m..(k + 1) * m] {
                *c *= factor;
            }
        }
        out
    }

    /// Windowed copy: `ψ(t) w` recomputed in physical space.
    pub fn windowed(&self, window: WindowSpec) -> Self {
        Self::from_physical(&self.grid, &self.to_physical(), window).expect("same grid")
    }

    /// `‖w‖_{L²_{t,x}}` from physical samples.
    pub fn l2_physical(&self) -> f64 {
        let n = self.grid.n() as f64;
        let sum: f64 = self.to_physical().iter().map(|c| c.norm_sqr()).sum();
        (sum * self.grid.dt() / n).sqrt()
    }

    /// `‖w‖_{L⁴_{t,x}}` from physical samples.
    pub fn l4_physical(&self) -> f64 {
        let n = self.grid.n() as f64;
        let sum: f64 = self.to_physical().iter().map(|c| c.norm_sqr().powi(2)).sum();
        (sum * self.grid.dt() / n).powf(0.25)
    }
}

/// Pointwise product of physical samples, windowed, back to coefficients.
pub fn product(grid: &Arc<SpaceTimeGrid>, factors: &[Vec<C64>], window: WindowSpec) -> SpaceTimeField {
    let len = grid.n() * grid.m();
    let mut out = vec![C64::new(1.0, 0.0); len];
    for f in factors {
        for (o, v) in out.iter_mut().zip(f) {
            *o *= v;
        }
    }
    SpaceTimeField::from_physical(grid, &out, window).expect("grid-sized factors")
}

/// Which component of a trajectory to transform.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    U,
    V,
}

/// Space-time coefficients of a uniformly sampled trajectory under `window`.
pub fn spacetime_coefficients(traj: &Trajectory, component: Component, window: WindowSpec) -> Result<SpaceTimeField> {
    let states = &traj.states;
    let usable = states.len() - states.len() % 2;
    if usable < 8 {
        return Err(Error::TrajectoryTooShort {
            got: states.len(),
            need: 8,
        });
    }
    let x = states[0].grid().clone();
    let dt = traj.dt * traj.record_every as f64;
    let grid = SpaceTimeGrid::new(&x, usable, dt, states[0].t)?;
    let n = x.len();
    let mut phys = Vec::with_capacity(n * usable);
    for s in &states[..usable] {
        match component {
            Component::U => phys.extend(s.u.to_physical()),
            Component::V => phys.extend(s.full_v().to_physical()),
        }
    }
    SpaceTimeField::from_physical(&grid, &phys, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, m: usize) -> Arc<SpaceTimeGrid> {
        SpaceTimeGrid::symmetric(&TorusGrid::new(n).unwrap(), m, 2.0).unwrap()
    }

    #[test]
    fn psi_profile() {
        assert_eq!(psi(0.0), 1.0);
        assert_eq!(psi(1.0), 1.0);
        assert_eq!(psi(-2.0), 0.0);
        assert_eq!(psi(3.0), 0.0);
        assert!((psi(1.5) - 0.5).abs() < 1e-15);
        assert!(psi(1.2) > psi(1.7));
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid(16, 32);
        let phys: Vec<C64> = (0..16 * 32)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let f = SpaceTimeField::from_physical(&g, &phys, WindowSpec::None).unwrap();
        let back = f.to_physical();
        for (a, b) in back.iter().zip(&phys) {
            assert!((a - b).norm() < 1e-13);
        }
        let spec: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * g.dtau();
        assert!((spec.sqrt() - f.l2_physical()).abs() < 1e-12);
    }

    #[test]
    fn free_wave_sits_on_its_characteristic() {
        let g = grid(16, 64);
        let n0 = 2i64;
        let omega = -(n0 * n0) as f64;
        let xg = g.x().clone();
        let phys: Vec<C64> = (0..64)
            .flat_map(|j| {
                let t = g.time(j);
                xg.points()
                    .into_iter()
                    .map(move |x| C64::from_polar(1.0, n0 as f64 * x + omega * t))
            })
            .collect();
        let f = SpaceTimeField::from_physical(&g, &phys, WindowSpec::None).unwrap();
        let k = xg.index_of(n0).unwrap();
        let (lbest, _) = (0..64)
            .map(|l| (l, f.at(k, l).norm()))
            .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert!((g.tau(lbest) - omega).abs() < g.dtau());
        let total: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum();
        let row: f64 = (0..64).map(|l| f.at(k, l).norm_sqr()).sum();
        assert!((row / total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_and_short_grid() {
        let g = grid(8, 8);
        let f = SpaceTimeField::from_physical(&g, &vec![C64::new(0.0, 0.0); 64], WindowSpec::None).unwrap();
        assert!(f.coeffs().iter().all(|c| c.norm() == 0.0));
        assert!(SpaceTimeGrid::symmetric(&TorusGrid::new(8).unwrap(), 6, 1.0).is_err());
    }

    #[test]
    fn trajectory_transform() {
        use crate::dynamics::{simulate_with, Mode, SimOptions, WaveState};
        use crate::operators::{ActuatorProfile, SystemParams};
        let xg = TorusGrid::new(16).unwrap();
        let p = SystemParams::new(0.0, 0.0, ActuatorProfile::inactive(&xg)).linearized();
        let s = WaveState::random(&xg, 4, 3, 1.0);
        let opts = SimOptions {
            mode: Mode::OpenLoop,
            record_every: 10,
            keep_states: true,
        };
        let tr = simulate_with(&p, &s, 0.32, 1e-3, None, opts).unwrap();
        let f = spacetime_coefficients(&tr, Component::U, WindowSpec::None).unwrap();
        assert_eq!(f.grid().m(), 32);
        let direct: f64 = tr.states[..32].iter().map(|x| x.u.l2_norm().powi(2)).sum::<f64>() * f.grid().dt();
        assert!((f.l2_physical() - direct.sqrt()).abs() < 1e-12);
        let short = simulate_with(&p, &s, 0.005, 1e-3, None, opts).unwrap();
        assert!(spacetime_coefficients(&short, Component::V, WindowSpec::None).is_err());
    }
}
