use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{airy_multipliers, schrodinger_multipliers, Dealias, SystemParams};
use crate::spectral::{self, Reality, SpectralField, TorusGrid, C64};

use super::state::WaveState;

/// Coefficient magnitude above which a step is rejected.
pub const BLOWUP_GUARD: f64 = 1e8;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Sign of the feedback terms `−a²u` and `−GG*v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Damped system, feedback switched on.
    ClosedLoop,
    /// No feedback; external forcing only.
    OpenLoop,
    /// Feedback with reversed sign. Its forward flow retraces damped trajectories backwards.
    AntiDamped,
}

impl Mode {
    pub fn damping_sign(self) -> f64 {
        match self {
            Mode::ClosedLoop => 1.0,
            Mode::OpenLoop => 0.0,
            Mode::AntiDamped => -1.0,
        }
    }
}

/// Forcing pair in coefficient space: `f` drives the u-equation, `gh = G h` the v-equation.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub f: Vec<C64>,
    pub gh: Vec<C64>,
}

impl Forcing {
    pub fn zeros(n: usize) -> Self {
        Self {
            f: vec![ZERO; n],
            gh: vec![ZERO; n],
        }
    }

    fn midpoint(a: &Self, b: &Self) -> Self {
        Self {
            f: a.f.iter().zip(&b.f).map(|(x, y)| 0.5 * (x + y)).collect(),
            gh: a.gh.iter().zip(&b.gh).map(|(x, y)| 0.5 * (x + y)).collect(),
        }
    }
}

/// Time derivative of a state, as returned by [`Stepper::rhs`].
#[derive(Clone, Debug)]
pub struct Tangent {
    pub du: SpectralField,
    pub dv: SpectralField,
}

#[derive(Clone, Debug)]
pub(crate) struct Pair {
    pub u: Vec<C64>,
    pub v: Vec<C64>,
}

impl Pair {
    pub fn zeros(n: usize) -> Self {
        Self {
            u: vec![ZERO; n],
            v: vec![ZERO; n],
        }
    }

    pub fn of(state: &WaveState) -> Self {
        Self {
            u: state.u.coeffs().to_vec(),
            v: state.v.coeffs().to_vec(),
        }
    }

    /// `self + alpha·x`.
    fn plus(&self, alpha: f64, x: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(alpha, x);
        out
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        for (a, b) in self.u.iter_mut().zip(&x.u) {
            *a += alpha * b;
        }
        for (a, b) in self.v.iter_mut().zip(&x.v) {
            *a += alpha * b;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        spectral::norm_sqr(&self.u) + spectral::norm_sqr(&self.v)
    }

    pub fn dot(&self, other: &Self) -> f64 {
        spectral::inner(&self.u, &other.u) + spectral::inner(&self.v, &other.v)
    }

    fn max_abs(&self) -> f64 {
        self.u
            .iter()
            .chain(&self.v)
            .map(|c| if c.is_finite() { c.norm() } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// Strang-split integrator: exact half-steps of the dispersive groups around
/// one RK4 step of coupling, nonlinearity, feedback and forcing.
#[derive(Clone, Debug)]
pub struct Stepper {
    params: SystemParams,
    mode: Mode,
    dt: f64,
    drift: f64,
    half_u: Vec<C64>,
    half_v: Vec<C64>,
}

impl Stepper {
    /// `v_mean` is the conserved mean of `v`; it shifts the Airy drift to `μ + v_mean`.
    pub fn new(params: &SystemParams, mode: Mode, dt: f64, v_mean: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::param("dt", "must be finite and nonzero"));
        }
        if !v_mean.is_finite() {
            return Err(Error::param("v_mean", "must be finite"));
        }
        let grid = params.grid();
        let drift = params.mu + v_mean;
        Ok(Self {
            params: params.clone(),
            mode,
            dt,
            drift,
            half_u: schrodinger_multipliers(grid, 0.5 * dt),
            half_v: airy_multipliers(grid, 0.5 * dt, drift),
        })
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Effective Airy drift `μ + [v]`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    fn grid(&self) -> &TorusGrid {
        self.params.grid()
    }

    fn truncate(&self, c: &mut [C64]) {
        if self.params.dealias == Dealias::TwoThirds {
            spectral::truncate_two_thirds(self.grid(), c);
        }
    }

    fn feedback_u(&self, u: &[C64]) -> Vec<C64> {
        let grid = self.grid();
        let mut w = u.to_vec();
        grid.inverse(&mut w);
        for (s, a2) in w.iter_mut().zip(self.params.profile.a_squared_samples()) {
            *s *= *a2;
        }
        grid.forward(&mut w);
        w
    }

    /// `GGv` for a real mean-zero coefficient vector.
    fn feedback_v(&self, v: &[C64]) -> Vec<C64> {
        let grid = self.grid();
        let mut w = v.to_vec();
        grid.inverse(&mut w);
        let h: Vec<f64> = w.iter().map(|c| c.re).collect();
        let mut once = vec![0.0; h.len()];
        let mut twice = vec![0.0; h.len()];
        self.params.profile.apply_g_samples(&h, &mut once);
        self.params.profile.apply_g_samples(&once, &mut twice);
        let mut out: Vec<C64> = twice.iter().map(|&x| C64::new(x, 0.0)).collect();
        grid.forward(&mut out);
        out[0] = ZERO;
        out
    }

    /// Non-dispersive part of the vector field plus forcing.
    pub(crate) fn middle(&self, y: &Pair, forcing: Option<&Forcing>) -> Pair {
        let grid = self.grid();
        let n = grid.len();
        let mut du = vec![ZERO; n];
        let mut dv = vec![ZERO; n];
        let p = &self.params;
        if p.coupling {
            spectral::derivative_into(grid, &y.v, &mut du);
            spectral::derivative_into(grid, &y.u, &mut dv);
        }
        if p.beta != 0.0 {
            let mut w = y.u.clone();
            self.truncate(&mut w);
            grid.inverse(&mut w);
            for s in w.iter_mut() {
                *s *= s.norm_sqr();
            }
            grid.forward(&mut w);
            self.truncate(&mut w);
            let coef = C64::new(0.0, -p.beta);
            for (d, s) in du.iter_mut().zip(&w) {
                *d += coef * s;
            }
        }
        if p.kdv_quadratic {
            let mut w = y.v.clone();
            self.truncate(&mut w);
            grid.inverse(&mut w);
            for s in w.iter_mut() {
                *s = C64::new(s.re * s.re, 0.0);
            }
            grid.forward(&mut w);
            self.truncate(&mut w);
            spectral::apply_derivative(grid, &mut w, 1);
            for (d, s) in dv.iter_mut().zip(&w) {
                *d -= 0.5 * s;
            }
        }
        let sign = self.mode.damping_sign();
        if sign != 0.0 {
            for (d, s) in du.iter_mut().zip(self.feedback_u(&y.u)) {
                *d -= sign * s;
            }
            for (d, s) in dv.iter_mut().zip(self.feedback_v(&y.v)) {
                *d -= sign * s;
            }
        }
        if let Some(fc) = forcing {
            for (d, s) in du.iter_mut().zip(&fc.f) {
                *d += s;
            }
            for (d, s) in dv.iter_mut().zip(&fc.gh) {
                *d += s;
            }
        }
        let mut dv = spectral::real_part(grid, &dv);
        dv[0] = ZERO;
        Pair { u: du, v: dv }
    }

    /// Transpose of the linear part of [`middle`](Self::middle).
    fn middle_transpose(&self, y: &Pair) -> Pair {
        let grid = self.grid();
        let n = grid.len();
        let mut ou = vec![ZERO; n];
        let mut ov = vec![ZERO; n];
        if self.params.coupling {
            spectral::derivative_into(grid, &y.v, &mut ou);
            spectral::derivative_into(grid, &y.u, &mut ov);
            for c in ou.iter_mut().chain(ov.iter_mut()) {
                *c = -*c;
            }
        }
        let sign = self.mode.damping_sign();
        if sign != 0.0 {
            for (d, s) in ou.iter_mut().zip(self.feedback_u(&y.u)) {
                *d -= sign * s;
            }
            for (d, s) in ov.iter_mut().zip(self.feedback_v(&y.v)) {
                *d -= sign * s;
            }
        }
        let mut ov = spectral::real_part(grid, &ov);
        ov[0] = ZERO;
        Pair { u: ou, v: ov }
    }

    fn rk4(&self, y: &Pair, f0: Option<&Forcing>, fh: Option<&Forcing>, f1: Option<&Forcing>) -> Pair {
        let dt = self.dt;
        let k1 = self.middle(y, f0);
        let k2 = self.middle(&y.plus(0.5 * dt, &k1), fh);
        let k3 = self.middle(&y.plus(0.5 * dt, &k2), fh);
        let k4 = self.middle(&y.plus(dt, &k3), f1);
        let mut out = y.clone();
        out.axpy(dt / 6.0, &k1);
        out.axpy(dt / 3.0, &k2);
        out.axpy(dt / 3.0, &k3);
        out.axpy(dt / 6.0, &k4);
        out
    }

    fn linear_half(&self, y: &mut Pair, inverse: bool) {
        for (c, m) in y.u.iter_mut().zip(&self.half_u) {
            *c *= if inverse { m.conj() } else { *m };
        }
        for (c, m) in y.v.iter_mut().zip(&self.half_v) {
            *c *= if inverse { m.conj() } else { *m };
        }
    }

    /// Restores the real, mean-zero structure of `v`; returns the mean it removed.
    fn project(&self, y: &mut Pair) -> f64 {
        let drift = y.v[0].norm();
        y.v = spectral::real_part(self.grid(), &y.v);
        y.v[0] = ZERO;
        drift
    }

    /// One step on raw coefficients. `forcing` holds the samples at the two step ends.
    pub(crate) fn advance(&self, y: &mut Pair, forcing: Option<(&Forcing, &Forcing)>) -> f64 {
        self.linear_half(y, false);
        let mid = match forcing {
            Some((f0, f1)) => {
                let fh = Forcing::midpoint(f0, f1);
                self.rk4(y, Some(f0), Some(&fh), Some(f1))
            }
            None => self.rk4(y, None, None, None),
        };
        *y = mid;
        self.linear_half(y, false);
        self.project(y)
    }

    pub(crate) fn check(&self, y: &Pair, t: f64) -> Result<()> {
        let m = y.max_abs();
        if m > BLOWUP_GUARD {
            return Err(Error::BlowUp { t, magnitude: m });
        }
        Ok(())
    }

    /// Exact transpose of [`advance`](Self::advance) for linear parameters.
    /// Overwrites `y` with the pulled-back adjoint and accumulates the forcing
    /// adjoints into `fbar0` (start of step) and `fbar1` (end of step).
    pub(crate) fn advance_transpose(&self, y: &mut Pair, fbar0: &mut Pair, fbar1: &mut Pair) {
        debug_assert!(self.params.is_linear());
        let dt = self.dt;
        self.project(y);
        self.linear_half(y, true);
        let mut ybar = y.clone();
        let mut k1 = Pair::zeros(y.u.len());
        k1.axpy(dt / 6.0, y);
        let mut k2 = Pair::zeros(y.u.len());
        k2.axpy(dt / 3.0, y);
        let mut k3 = k2.clone();
        let k4 = k1.clone();
        let mut fh = Pair::zeros(y.u.len());

        let z4 = self.middle_transpose(&k4);
        ybar.axpy(1.0, &z4);
        k3.axpy(dt, &z4);
        fbar1.axpy(1.0, &k4);

        let z3 = self.middle_transpose(&k3);
        ybar.axpy(1.0, &z3);
        k2.axpy(0.5 * dt, &z3);
        fh.axpy(1.0, &k3);

        let z2 = self.middle_transpose(&k2);
        ybar.axpy(1.0, &z2);
        k1.axpy(0.5 * dt, &z2);
        fh.axpy(1.0, &k2);

        let z1 = self.middle_transpose(&k1);
        ybar.axpy(1.0, &z1);
        fbar0.axpy(1.0, &k1);

        fbar0.axpy(0.5, &fh);
        fbar1.axpy(0.5, &fh);
        *y = ybar;
        self.linear_half(y, true);
    }

    /// Inverse of an unforced [`advance`](Self::advance), solved by fixed-point
    /// iteration on the RK4 stage.
    pub(crate) fn advance_inverse(&self, y: &mut Pair) -> Result<()> {
        self.linear_half(y, true);
        let target = y.clone();
        let scale = target.norm_sqr().sqrt().max(f64::MIN_POSITIVE);
        let mut w = target.clone();
        let mut last = f64::INFINITY;
        for _ in 0..100 {
            let mut r = self.rk4(&w, None, None, None);
            self.project(&mut r);
            let mut corr = target.clone();
            corr.axpy(-1.0, &r);
            w.axpy(1.0, &corr);
            let size = corr.norm_sqr().sqrt();
            if size <= 1e-15 * scale || (size >= last && size <= 1e-13 * scale) {
                *y = w;
                self.linear_half(y, true);
                self.project(y);
                return Ok(());
            }
            last = size;
        }
        Err(Error::param(
            "dt",
            "inverse step did not converge; reduce the time step",
        ))
    }

    /// Advances `state` by one step; forcing samples are taken at both step ends.
    pub fn step(&self, state: &WaveState, forcing: Option<(&Forcing, &Forcing)>) -> Result<WaveState> {
        let mut y = Pair::of(state);
        self.advance(&mut y, forcing);
        let t = state.t + self.dt;
        self.check(&y, t)?;
        Ok(WaveState::from_coeffs(state.grid(), y.u, y.v, state.v_mean, t))
    }

    /// Full vector field at `state`, dispersive terms included.
    pub fn rhs(&self, state: &WaveState) -> Tangent {
        let grid = state.grid();
        let y = Pair::of(state);
        let mut m = self.middle(&y, None);
        let mut lin_u = y.u.clone();
        spectral::apply_derivative(grid, &mut lin_u, 2);
        for (d, s) in m.u.iter_mut().zip(&lin_u) {
            *d += C64::new(0.0, 1.0) * s;
        }
        for (k, (d, s)) in m.v.iter_mut().zip(&y.v).enumerate() {
            if k == grid.nyquist_index() {
                continue;
            }
            let n = grid.wavenumber(k) as f64;
            *d += C64::new(0.0, n * n * n - self.drift * n) * s;
        }
        Tangent {
            du: SpectralField::with_coeffs(state.grid(), m.u, Reality::Complex, false),
            dv: SpectralField::with_coeffs(state.grid(), m.v, Reality::Real, true),
        }
    }
}

/// `(du/dt, dv/dt)` of the damped system at `state`.
pub fn rhs_closed_loop(state: &WaveState, params: &SystemParams) -> Result<Tangent> {
    Ok(Stepper::new(params, Mode::ClosedLoop, 1.0, state.v_mean)?.rhs(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{phase_airy, phase_schrodinger, ActuatorProfile, ProfileSpec};
    use crate::spectral::TorusGrid;
    use std::f64::consts::PI;

    fn damped(n: usize) -> SystemParams {
        let g = TorusGrid::new(n).unwrap();
        let prof = ActuatorProfile::build(&g, ProfileSpec::new(PI, PI / 2.0, 0.5)).unwrap();
        SystemParams::new(1.0, 0.5, prof)
    }

    #[test]
    fn rhs_zero_state_is_zero() {
        let p = damped(32);
        let s = WaveState::zeros(p.grid());
        let t = rhs_closed_loop(&s, &p).unwrap();
        assert_eq!(t.du.l2_norm(), 0.0);
        assert_eq!(t.dv.l2_norm(), 0.0);
    }

    #[test]
    fn rhs_single_mode_example() {
        let g = TorusGrid::new(32).unwrap();
        let mut p = SystemParams::new(0.0, 0.0, ActuatorProfile::inactive(&g));
        p.kdv_quadratic = false;
        let u = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(x.cos(), x.sin()));
        let s = WaveState::new(u, SpectralField::zeros(&g, Reality::Real), 0.0).unwrap();
        let t = rhs_closed_loop(&s, &p).unwrap();
        let du = t.du.to_physical();
        let dv = t.dv.to_real_physical();
        for (j, x) in g.points().iter().enumerate() {
            assert!((du[j] - C64::new(x.sin(), -x.cos())).norm() < 1e-13);
            assert!((dv[j] + x.sin()).abs() < 1e-13);
        }
    }

    /// Term-by-term quadrature of the damped vector field with naive DFTs.
    #[test]
    fn rhs_matches_quadrature_oracle() {
        let p = {
            let mut p = damped(32);
            p.dealias = Dealias::None;
            p
        };
        let g = p.grid().clone();
        let n = g.len();
        let mut s = WaveState::random(&g, 11, 4, 0.3);
        s.v_mean = 0.2;
        let tan = rhs_closed_loop(&s, &p).unwrap();

        let xs = g.points();
        let ks: Vec<i64> = (0..n).map(|k| g.wavenumber(k)).collect();
        let synth = |c: &[C64], p: u32| -> Vec<C64> {
            xs.iter()
                .map(|&x| {
                    (0..n)
                        .filter(|&k| !(p % 2 == 1 && k == g.nyquist_index()))
                        .map(|k| c[k] * C64::new(0.0, ks[k] as f64).powu(p) * C64::from_polar(1.0, ks[k] as f64 * x))
                        .sum()
                })
                .collect()
        };
        let analyse = |f: &[C64]| -> Vec<C64> {
            (0..n)
                .map(|k| {
                    f.iter()
                        .zip(&xs)
                        .map(|(v, &x)| v * C64::from_polar(1.0, -(ks[k] as f64) * x))
                        .sum::<C64>()
                        / n as f64
                })
                .collect()
        };
        let u = synth(s.u.coeffs(), 0);
        let uxx = synth(s.u.coeffs(), 2);
        let ux = synth(s.u.coeffs(), 1);
        let v: Vec<f64> = synth(s.v.coeffs(), 0).iter().map(|c| c.re + s.v_mean).collect();
        let vx: Vec<f64> = synth(s.v.coeffs(), 1).iter().map(|c| c.re).collect();
        let vxxx: Vec<f64> = synth(s.v.coeffs(), 3).iter().map(|c| c.re).collect();
        let a2 = p.profile.a_squared_samples();
        let gs = p.profile.g_samples();
        let dx = g.dx();
        let gop = |h: &[f64]| -> Vec<f64> {
            let m: f64 = gs.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() * dx;
            gs.iter().zip(h).map(|(a, b)| a * (b - m)).collect()
        };
        let ggv = gop(&gop(&v));
        let du: Vec<C64> = (0..n)
            .map(|j| {
                C64::new(0.0, 1.0) * uxx[j] + vx[j] - C64::new(0.0, p.beta) * u[j].norm_sqr() * u[j] - a2[j] * u[j]
            })
            .collect();
        let v2: Vec<C64> = v.iter().map(|x| C64::new(x * x, 0.0)).collect();
        let v2x = synth(&analyse(&v2), 1);
        let dv: Vec<C64> = (0..n)
            .map(|j| C64::new(-vxxx[j] - p.mu * vx[j] - 0.5 * v2x[j].re + ux[j].re - ggv[j], 0.0))
            .collect();
        let du_hat = analyse(&du);
        let mut dv_hat = analyse(&dv);
        dv_hat[0] = ZERO;
        for k in 0..n {
            if k == g.nyquist_index() {
                continue;
            }
            assert!((du_hat[k] - tan.du.coeffs()[k]).norm() < 1e-11, "u mode {k}");
            assert!((dv_hat[k] - tan.dv.coeffs()[k]).norm() < 1e-11, "v mode {k}");
        }
    }

    #[test]
    fn pure_linear_step_is_exact_group() {
        let g = TorusGrid::new(32).unwrap();
        let mut p = SystemParams::new(0.0, 0.7, ActuatorProfile::inactive(&g));
        p.kdv_quadratic = false;
        p.coupling = false;
        let st = Stepper::new(&p, Mode::OpenLoop, 0.01, 0.0).unwrap();
        let s = WaveState::random(&g, 2, 15, 1.0);
        let next = st.step(&s, None).unwrap();
        for k in 0..g.len() {
            let n = g.wavenumber(k);
            let eu = s.u.coeffs()[k] * phase_schrodinger(n, 0.01);
            let ev = if k == g.nyquist_index() {
                s.v.coeffs()[k]
            } else {
                s.v.coeffs()[k] * phase_airy(n, 0.01, 0.7)
            };
            assert!((eu - next.u.coeffs()[k]).norm() < 1e-12);
            assert!((ev - next.v.coeffs()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_loop_step_keeps_mean_zero() {
        let p = damped(32);
        let st = Stepper::new(&p, Mode::ClosedLoop, 1e-3, 0.3).unwrap();
        let mut y = Pair::of(&WaveState::random(p.grid(), 5, 6, 1.0));
        let drift = st.advance(&mut y, None);
        assert!(drift <= 1e-13);
        assert_eq!(y.v[0], ZERO);
    }

    #[test]
    fn transpose_is_exact_adjoint() {
        let p = damped(16).linearized();
        for mode in [Mode::OpenLoop, Mode::ClosedLoop] {
            let st = Stepper::new(&p, mode, 0.05, 0.4).unwrap();
            let n = p.grid().len();
            let x = Pair::of(&WaveState::random(p.grid(), 1, 7, 1.0));
            let y = Pair::of(&WaveState::random(p.grid(), 2, 7, 1.0));
            let f0 = Pair::of(&WaveState::random(p.grid(), 3, 7, 1.0));
            let f1 = Pair::of(&WaveState::random(p.grid(), 4, 7, 1.0));
            let to_forcing = |q: &Pair| Forcing {
                f: q.u.clone(),
                gh: q.v.clone(),
            };
            let mut ax = x.clone();
            st.advance(&mut ax, Some((&to_forcing(&f0), &to_forcing(&f1))));
            let lhs = ax.dot(&y);

            let mut yt = y.clone();
            let mut b0 = Pair::zeros(n);
            let mut b1 = Pair::zeros(n);
            st.advance_transpose(&mut yt, &mut b0, &mut b1);
            let rhs = x.dot(&yt) + f0.dot(&b0) + f1.dot(&b1);
            assert!((lhs - rhs).abs() < 1e-13 * lhs.abs().max(1.0), "{mode:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn inverse_step_undoes_step() {
        let p = damped(32);
        let st = Stepper::new(&p, Mode::AntiDamped, 1e-3, 0.1).unwrap();
        let x = Pair::of(&WaveState::random(p.grid(), 9, 8, 1.0));
        let mut y = x.clone();
        st.advance(&mut y, None);
        st.advance_inverse(&mut y).unwrap();
        let mut d = y.clone();
        d.axpy(-1.0, &x);
        assert!(d.norm_sqr().sqrt() < 1e-13);
    }

    #[test]
    fn blow_up_guard_trips() {
        let p = damped(16);
        let st = Stepper::new(&p, Mode::ClosedLoop, 1e-3, 0.0).unwrap();
        let s = WaveState::random(p.grid(), 1, 3, 1e9);
        assert!(matches!(st.step(&s, None), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn rejects_bad_dt() {
        let p = damped(16);
        assert!(Stepper::new(&p, Mode::ClosedLoop, 0.0, 0.0).is_err());
        assert!(Stepper::new(&p, Mode::ClosedLoop, f64::NAN, 0.0).is_err());
    }
}
