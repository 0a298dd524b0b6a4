//! Actuator profiles, the mean-preserving control operator `G`, linear group
//! phases and the resonance bound `H(n, τ)`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Reality, SpectralField, TorusGrid, C64};

/// Arc `ω = (center − half_width, center + half_width)` on the torus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcRegion {
    pub center: f64,
    pub half_width: f64,
}

impl ArcRegion {
    /// Signed offset of `x` from the arc center, wrapped to `(−π, π]`.
    pub fn offset(&self, x: f64) -> f64 {
        let d = (x - self.center).rem_euclid(2.0 * PI);
        if d > PI {
            d - 2.0 * PI
        } else {
            d
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.offset(x).abs() < self.half_width
    }
}

/// Reproducible description of an actuator profile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub omega: ArcRegion,
    /// Lower bound `η` for `a²` on the core of `ω`.
    pub eta: f64,
    /// Peak value of `a²`; must exceed `η`.
    pub damping_peak: f64,
}

impl ProfileSpec {
    pub fn new(center: f64, half_width: f64, eta: f64) -> Self {
        Self {
            omega: ArcRegion { center, half_width },
            eta,
            damping_peak: 2.0 * eta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.omega.half_width;
        if !(w > 0.0 && w < PI) {
            return Err(Error::param("half_width", format!("need 0 < w < π, got {w}")));
        }
        if !self.omega.center.is_finite() {
            return Err(Error::param("center", "must be finite"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param("eta", format!("need η > 0, got {}", self.eta)));
        }
        if !(self.damping_peak > self.eta && self.damping_peak.is_finite()) {
            return Err(Error::param(
                "damping_peak",
                format!("need peak > η = {}, got {}", self.eta, self.damping_peak),
            ));
        }
        Ok(())
    }

    /// Half-width of the core arc on which `a² > η`.
    pub fn core_half_width(&self) -> f64 {
        // peak·exp(1 − 1/(1 − s²)) = η  ⇔  s² = 1 − 1/(1 + ln(peak/η))
        let l = (self.damping_peak / self.eta).ln();
        self.omega.half_width * (1.0 - 1.0 / (1.0 + l)).sqrt()
    }
}

/// `exp(1 − 1/(1 − s²))` on `|s| < 1`, zero elsewhere. Peak value 1 at `s = 0`.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

/// Damping amplitude `a` and control window `g`, sampled on the grid.
#[derive(Clone, Debug)]
pub struct ActuatorProfile {
    grid: Arc<TorusGrid>,
    spec: Option<ProfileSpec>,
    a_sq: Vec<f64>,
    g: Vec<f64>,
}

impl ActuatorProfile {
    /// Smooth bump profiles on `ω`: `a² = peak·b(s)`, `g ∝ b(s)` with `∫ g dx = 1`.
    pub fn build(grid: &Arc<TorusGrid>, spec: ProfileSpec) -> Result<Self> {
        spec.validate()?;
        let w = spec.omega.half_width;
        let shape: Vec<f64> = grid
            .points()
            .iter()
            .map(|&x| bump(spec.omega.offset(x) / w))
            .collect();
        let mass: f64 = shape.iter().sum::<f64>() * grid.dx();
        if mass <= 0.0 {
            return Err(Error::param(
                "half_width",
                "control arc contains no grid point; refine the grid or widen ω",
            ));
        }
        let a_sq = shape.iter().map(|b| spec.damping_peak * b).collect();
        let g = shape.iter().map(|b| b / mass).collect();
        Ok(Self {
            grid: grid.clone(),
            spec: Some(spec),
            a_sq,
            g,
        })
    }

    /// Both actuators switched off (`a = 0`, `g = 0`).
    pub fn inactive(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: grid.clone(),
            spec: None,
            a_sq: vec![0.0; grid.len()],
            g: vec![0.0; grid.len()],
        }
    }

    /// Uniform damping `a ≡ amplitude` with no KdV actuator.
    pub fn uniform_damping(grid: &Arc<TorusGrid>, amplitude: f64) -> Self {
        Self {
            grid: grid.clone(),
            spec: None,
            a_sq: vec![amplitude * amplitude; grid.len()],
            g: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn spec(&self) -> Option<&ProfileSpec> {
        self.spec.as_ref()
    }

    pub fn a_squared_samples(&self) -> &[f64] {
        &self.a_sq
    }

    pub fn g_samples(&self) -> &[f64] {
        &self.g
    }

    pub fn a(&self) -> SpectralField {
        let a: Vec<f64> = self.a_sq.iter().map(|v| v.sqrt()).collect();
        SpectralField::from_real_samples(&self.grid, &a).expect("grid length")
    }

    pub fn g(&self) -> SpectralField {
        SpectralField::from_real_samples(&self.grid, &self.g).expect("grid length")
    }

    pub fn g_integral(&self) -> f64 {
        self.g.iter().sum::<f64>() * self.grid.dx()
    }

    /// `Gh = g (h − ∫ g h dy)` on physical samples.
    pub fn apply_g_samples(&self, h: &[f64], out: &mut [f64]) {
        let dx = self.grid.dx();
        let avg: f64 = self.g.iter().zip(h).map(|(g, h)| g * h).sum::<f64>() * dx;
        for ((o, g), h) in out.iter_mut().zip(&self.g).zip(h) {
            *o = g * (h - avg);
        }
    }

    pub fn apply_g(&self, h: &SpectralField) -> SpectralField {
        let samples = h.to_real_physical();
        let mut out = vec![0.0; samples.len()];
        self.apply_g_samples(&samples, &mut out);
        let mut field = SpectralField::from_real_samples(&self.grid, &out).expect("grid length");
        field.coeffs_mut()[0] = C64::new(0.0, 0.0);
        field.set_mean_zero(true);
        field
    }

    /// `G*`; identical to [`apply_g`](Self::apply_g) since `G` is self-adjoint.
    pub fn apply_g_star(&self, h: &SpectralField) -> SpectralField {
        self.apply_g(h)
    }

    /// Pointwise `a² u`.
    pub fn apply_damping(&self, u: &SpectralField) -> SpectralField {
        let mut samples = u.to_physical();
        for (s, a2) in samples.iter_mut().zip(&self.a_sq) {
            *s *= *a2;
        }
        let mut field = SpectralField::to_spectral(&self.grid, &samples).expect("grid length");
        if u.reality() == Reality::Real {
            field.symmetrize();
            field = SpectralField::with_coeffs(&self.grid, field.into_coeffs(), Reality::Real, false);
        }
        field
    }

    /// Smallest `a²` over grid points of the core arc, `None` without a spec.
    pub fn min_a_squared_on_core(&self) -> Option<f64> {
        let spec = self.spec?;
        let core = spec.core_half_width();
        self.grid
            .points()
            .iter()
            .zip(&self.a_sq)
            .filter(|(x, _)| spec.omega.offset(**x).abs() < core)
            .map(|(_, a)| *a)
            .reduce(f64::min)
    }
}

/// Aliasing control for the pointwise products `|u|²u` and `v²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dealias {
    TwoThirds,
    None,
}

/// Physical parameters of the coupled system.
#[derive(Clone, Debug)]
pub struct SystemParams {
    pub beta: f64,
    pub mu: f64,
    pub profile: ActuatorProfile,
    pub dealias: Dealias,
    /// Cross terms `i∂_x v` and `Re(∂_x u)`.
    pub coupling: bool,
    /// Quadratic KdV term `½∂_x(v²)`.
    pub kdv_quadratic: bool,
}

impl SystemParams {
    pub fn new(beta: f64, mu: f64, profile: ActuatorProfile) -> Self {
        Self {
            beta,
            mu,
            profile,
            dealias: Dealias::TwoThirds,
            coupling: true,
            kdv_quadratic: true,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.profile.grid()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::param("beta", "must be finite"));
        }
        if !self.mu.is_finite() {
            return Err(Error::param("mu", "must be finite"));
        }
        Ok(())
    }

    /// Same system with every nonlinear term removed.
    pub fn linearized(&self) -> Self {
        Self {
            beta: 0.0,
            kdv_quadratic: false,
            ..self.clone()
        }
    }

    pub fn is_linear(&self) -> bool {
        self.beta == 0.0 && !self.kdv_quadratic
    }

    pub fn snapshot(&self) -> ParamsSnapshot {
        ParamsSnapshot {
            n: self.grid().len(),
            beta: self.beta,
            mu: self.mu,
            profile: self.profile.spec().copied(),
            dealias: self.dealias,
            coupling: self.coupling,
            kdv_quadratic: self.kdv_quadratic,
        }
    }
}

/// Serializable record of [`SystemParams`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsSnapshot {
    pub n: usize,
    pub beta: f64,
    pub mu: f64,
    pub profile: Option<ProfileSpec>,
    pub dealias: Dealias,
    pub coupling: bool,
    pub kdv_quadratic: bool,
}

impl ParamsSnapshot {
    pub fn restore(&self) -> Result<SystemParams> {
        let grid = TorusGrid::new(self.n)?;
        let profile = match self.profile {
            Some(spec) => ActuatorProfile::build(&grid, spec)?,
            None => ActuatorProfile::inactive(&grid),
        };
        Ok(SystemParams {
            beta: self.beta,
            mu: self.mu,
            profile,
            dealias: self.dealias,
            coupling: self.coupling,
            kdv_quadratic: self.kdv_quadratic,
        })
    }
}

/// Symbol of `e^{it∂_x²}` at wavenumber `n`: `exp(−i n² t)`.
pub fn phase_schrodinger(n: i64, t: f64) -> C64 {
    let n = n as f64;
    C64::from_polar(1.0, -n * n * t)
}

/// Symbol of `e^{−t(∂_x³ + μ∂_x)}` at wavenumber `n`: `exp(i (n³ − μ n) t)`.
pub fn phase_airy(n: i64, t: f64, mu: f64) -> C64 {
    let n = n as f64;
    C64::from_polar(1.0, (n * n * n - mu * n) * t)
}

/// Schrödinger group multipliers on the grid.
pub fn schrodinger_multipliers(grid: &TorusGrid, t: f64) -> Vec<C64> {
    (0..grid.len())
        .map(|k| phase_schrodinger(grid.wavenumber(k), t))
        .collect()
}

/// Airy group multipliers on the grid; the Nyquist mode carries the zero
/// symbol of odd-order operators and does not rotate.
pub fn airy_multipliers(grid: &TorusGrid, t: f64, mu: f64) -> Vec<C64> {
    (0..grid.len())
        .map(|k| {
            if k == grid.nyquist_index() {
                C64::new(1.0, 0.0)
            } else {
                phase_airy(grid.wavenumber(k), t, mu)
            }
        })
        .collect()
}

/// `⟨x⟩ = √(1 + x²)`.
pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// `H(n, τ) = |n| / (⟨τ − n³ + μn⟩^{1/2−ε} ⟨τ + n²⟩^{1/2−ε})`.
pub fn bound_h(n: i64, tau: f64, mu: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param("eps", format!("need 0 < ε < 1/2, got {eps}")));
    }
    let nf = n as f64;
    let airy = bracket(tau - nf * nf * nf + mu * nf);
    let schr = bracket(tau + nf * nf);
    Ok(nf.abs() / (airy * schr).powf(0.5 - eps))
}
