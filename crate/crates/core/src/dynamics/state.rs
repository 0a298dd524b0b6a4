use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, Reality, SpectralField, TorusGrid, C64};

/// The pair `(u, ṽ)` at one instant. `v` holds the mean-zero part `ṽ = v − μ̃`;
/// the conserved mean `μ̃ = [v₀]` is kept in `v_mean`.
#[derive(Clone, Debug)]
pub struct WaveState {
    pub u: SpectralField,
    pub v: SpectralField,
    pub v_mean: f64,
    pub t: f64,
}

impl WaveState {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        let mut v = SpectralField::zeros(grid, Reality::Real);
        v.set_mean_zero(true);
        Self {
            u: SpectralField::zeros(grid, Reality::Complex),
            v,
            v_mean: 0.0,
            t: 0.0,
        }
    }

    /// Splits a full long-wave field into its mean and mean-zero part.
    pub fn new(u: SpectralField, v_full: SpectralField, t: f64) -> Result<Self> {
        if u.grid() != v_full.grid() {
            return Err(Error::SizeMismatch {
                expected: u.grid().len(),
                got: v_full.grid().len(),
            });
        }
        if v_full.reality() != Reality::Real {
            return Err(Error::param("v", "long-wave field must be real"));
        }
        let v_mean = v_full.coeff(0).re;
        Ok(Self {
            v: v_full.project_zero_mean(),
            u,
            v_mean,
            t,
        })
    }

    pub fn from_samples(grid: &Arc<TorusGrid>, u: &[C64], v: &[f64]) -> Result<Self> {
        Self::new(
            SpectralField::to_spectral(grid, u)?,
            SpectralField::from_real_samples(grid, v)?,
            0.0,
        )
    }

    pub(crate) fn from_coeffs(grid: &Arc<TorusGrid>, u: Vec<C64>, v: Vec<C64>, v_mean: f64, t: f64) -> Self {
        Self {
            u: SpectralField::with_coeffs(grid, u, Reality::Complex, false),
            v: SpectralField::with_coeffs(grid, v, Reality::Real, true),
            v_mean,
            t,
        }
    }

    /// Random smooth state: Gaussian coefficients with `⟨n⟩^{-1}` envelope on
    /// `|n| ≤ max_mode`, scaled so that `‖(u, ṽ)‖ = norm`.
    pub fn random(grid: &Arc<TorusGrid>, seed: u64, max_mode: i64, norm: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.len();
        let mut u = vec![C64::new(0.0, 0.0); n];
        let mut v = vec![C64::new(0.0, 0.0); n];
        for k in 0..n {
            let m = grid.wavenumber(k);
            if m.abs() > max_mode || k == grid.nyquist_index() {
                continue;
            }
            let env = 1.0 / (1.0 + (m * m) as f64).sqrt();
            let mut draw = || -> C64 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im) * env
            };
            u[k] = draw();
            if m > 0 {
                let c = draw();
                v[k] = c;
                v[grid.mirror(k)] = c.conj();
            }
        }
        let mut state = Self::from_coeffs(grid, u, v, 0.0, 0.0);
        let current = state.norm();
        if current > 0.0 {
            state.scale_mut(norm / current);
        }
        state
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.u.grid()
    }

    /// `E = ‖u‖² + ‖ṽ‖²`.
    pub fn energy(&self) -> f64 {
        spectral::norm_sqr(self.u.coeffs()) + spectral::norm_sqr(self.v.coeffs())
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// Long-wave field with its mean restored.
    pub fn full_v(&self) -> SpectralField {
        let mut v = self.v.clone();
        v.coeffs_mut()[0] = C64::new(self.v_mean, 0.0);
        v.set_mean_zero(false);
        v
    }

    /// Real inner product of the coefficient pairs; ignores `t` and `v_mean`.
    pub fn dot(&self, other: &Self) -> f64 {
        spectral::inner(self.u.coeffs(), other.u.coeffs()) + spectral::inner(self.v.coeffs(), other.v.coeffs())
    }

    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        for (a, b) in self.u.coeffs_mut().iter_mut().zip(x.u.coeffs()) {
            *a += alpha * b;
        }
        for (a, b) in self.v.coeffs_mut().iter_mut().zip(x.v.coeffs()) {
            *a += alpha * b;
        }
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        for c in self.u.coeffs_mut().iter_mut().chain(self.v.coeffs_mut().iter_mut()) {
            *c *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    /// `self − other` in the coefficient pair; keeps `self`'s mean and time.
    pub fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_coeff(&self) -> f64 {
        self.u
            .coeffs()
            .iter()
            .chain(self.v.coeffs())
            .map(|c| if c.is_finite() { c.norm() } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    pub fn to_dump(&self) -> StateDump {
        StateDump {
            n: self.grid().len(),
            t: self.t,
            v_mean: self.v_mean,
            u: self.u.coeffs().iter().map(|c| [c.re, c.im]).collect(),
            v: self.v.coeffs().iter().map(|c| [c.re, c.im]).collect(),
        }
    }

    pub fn from_dump(dump: &StateDump) -> Result<Self> {
        let grid = TorusGrid::new(dump.n)?;
        Self::from_dump_on(&grid, dump)
    }

    pub fn from_dump_on(grid: &Arc<TorusGrid>, dump: &StateDump) -> Result<Self> {
        if dump.n != grid.len() || dump.u.len() != dump.n || dump.v.len() != dump.n {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: dump.u.len().min(dump.v.len()),
            });
        }
        let u = dump.u.iter().map(|p| C64::new(p[0], p[1])).collect();
        let v: Vec<C64> = dump.v.iter().map(|p| C64::new(p[0], p[1])).collect();
        let vf = SpectralField::from_coeffs(grid, v, Reality::Real)?;
        if vf.coeff(0).norm() > 1e-12 {
            return Err(Error::param("v", "stored long-wave part must be mean-zero"));
        }
        Ok(Self::from_coeffs(grid, u, vf.into_coeffs(), dump.v_mean, dump.t))
    }
}

/// Exact, reloadable JSON form of a [`WaveState`] (coefficients in FFT order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub n: usize,
    pub t: f64,
    pub v_mean: f64,
    pub u: Vec<[f64; 2]>,
    pub v: Vec<[f64; 2]>,
}
