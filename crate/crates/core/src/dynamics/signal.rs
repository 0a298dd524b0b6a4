use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::ActuatorProfile;
use crate::spectral::{TorusGrid, C64};

use super::stepper::Forcing;

/// Time-sampled forcing on a uniform grid `t_k = k·dt`, `k = 0..=steps`.
/// `f` is the Schrödinger forcing, `h` the KdV input before `G` is applied.
#[derive(Clone, Debug)]
pub struct ControlSignal {
    grid: Arc<TorusGrid>,
    dt: f64,
    f: Vec<Vec<C64>>,
    h: Vec<Vec<f64>>,
}

impl ControlSignal {
    pub fn zeros(grid: &Arc<TorusGrid>, dt: f64, steps: usize) -> Self {
        Self {
            grid: grid.clone(),
            dt,
            f: vec![vec![C64::new(0.0, 0.0); grid.len()]; steps + 1],
            h: vec![vec![0.0; grid.len()]; steps + 1],
        }
    }

    pub fn new(grid: &Arc<TorusGrid>, dt: f64, f: Vec<Vec<C64>>, h: Vec<Vec<f64>>) -> Result<Self> {
        if f.len() != h.len() || f.len() < 2 {
            return Err(Error::SizeMismatch {
                expected: f.len().max(2),
                got: h.len(),
            });
        }
        if let Some(bad) = f.iter().map(Vec::len).chain(h.iter().map(Vec::len)).find(|&l| l != grid.len()) {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: bad,
            });
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        Ok(Self {
            grid: grid.clone(),
            dt,
            f,
            h,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.f.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn f(&self) -> &[Vec<C64>] {
        &self.f
    }

    pub fn h(&self) -> &[Vec<f64>] {
        &self.h
    }

    /// Coefficient-space forcing `(f̂_k, (G h_k)^)` at sample `k`.
    pub fn forcing(&self, k: usize, profile: &ActuatorProfile) -> Forcing {
        let grid = &self.grid;
        let mut f = self.f[k].clone();
        grid.forward(&mut f);
        let mut gh = vec![0.0; grid.len()];
        profile.apply_g_samples(&self.h[k], &mut gh);
        let mut gh: Vec<C64> = gh.into_iter().map(|x| C64::new(x, 0.0)).collect();
        grid.forward(&mut gh);
        gh[0] = C64::new(0.0, 0.0);
        Forcing { f, gh }
    }

    pub fn forcings(&self, profile: &ActuatorProfile) -> Vec<Forcing> {
        (0..self.f.len()).map(|k| self.forcing(k, profile)).collect()
    }

    /// Largest `|f|` and `|G h|` over samples at grid points outside `supp(a)` and `supp(g)`.
    pub fn leakage(&self, profile: &ActuatorProfile) -> (f64, f64) {
        let a2 = profile.a_squared_samples();
        let gs = profile.g_samples();
        let mut lf: f64 = 0.0;
        let mut lh: f64 = 0.0;
        let mut gh = vec![0.0; self.grid.len()];
        for (f, h) in self.f.iter().zip(&self.h) {
            profile.apply_g_samples(h, &mut gh);
            for j in 0..self.grid.len() {
                if a2[j] == 0.0 {
                    lf = lf.max(f[j].norm());
                }
                if gs[j] == 0.0 {
                    lh = lh.max(gh[j].abs());
                }
            }
        }
        (lf, lh)
    }

    /// Discrete `L²(0,T; L²)` norm of `(f, h)` by the trapezoid rule.
    pub fn l2_norm(&self) -> f64 {
        let n = self.grid.len() as f64;
        let last = self.f.len() - 1;
        let sum: f64 = self
            .f
            .iter()
            .zip(&self.h)
            .enumerate()
            .map(|(k, (f, h))| {
                let w = if k == 0 || k == last { 0.5 } else { 1.0 };
                let e = f.iter().map(|c| c.norm_sqr()).sum::<f64>() + h.iter().map(|x| x * x).sum::<f64>();
                w * e / n
            })
            .sum();
        (sum * self.dt).sqrt()
    }

    pub fn to_dump(&self) -> SignalDump {
        SignalDump {
            n: self.grid.len(),
            dt: self.dt,
            f: self.f.iter().map(|row| row.iter().map(|c| [c.re, c.im]).collect()).collect(),
            h: self.h.clone(),
        }
    }

    pub fn from_dump(dump: &SignalDump) -> Result<Self> {
        let grid = TorusGrid::new(dump.n)?;
        let f = dump
            .f
            .iter()
            .map(|row| row.iter().map(|p| C64::new(p[0], p[1])).collect())
            .collect();
        Self::new(&grid, dump.dt, f, dump.h.clone())
    }
}

/// JSON form of a [`ControlSignal`] (physical samples).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalDump {
    pub n: usize,
    pub dt: f64,
    pub f: Vec<Vec<[f64; 2]>>,
    pub h: Vec<Vec<f64>>,
}
