use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::bracket;
use crate::spectral::{TorusGrid, C64};

use super::field::{SpaceTimeField, SpaceTimeGrid, WindowSpec};

/// Dispersion relation a random field concentrates around.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Characteristic {
    /// `τ = −n²`
    Schrodinger,
    /// `τ = n³ − μn`
    Airy { mu: f64 },
}

impl Characteristic {
    pub fn tau(&self, n: i64) -> f64 {
        let n = n as f64;
        match *self {
            Characteristic::Schrodinger => -n * n,
            Characteristic::Airy { mu } => n * n * n - mu * n,
        }
    }
}

/// Grid and sample sizes of a random-ensemble experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    /// Time samples.
    pub m: usize,
    /// The time grid covers `[−half_span, half_span)`.
    pub half_span: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n: 32,
            m: 64,
            half_span: 2.0,
            samples: 100,
            seed: 2024,
        }
    }
}

impl EnsembleConfig {
    /// Same experiment with both grids refined by two.
    pub fn doubled(&self) -> Self {
        Self {
            n: 2 * self.n,
            m: 2 * self.m,
            ..*self
        }
    }

    pub fn grid(&self) -> Result<Arc<SpaceTimeGrid>> {
        if self.samples == 0 {
            return Err(Error::param("samples", "must be positive"));
        }
        if !(self.half_span.is_finite() && self.half_span > 0.0) {
            return Err(Error::param("half_span", "must be positive"));
        }
        SpaceTimeGrid::symmetric(&TorusGrid::new(self.n)?, self.m, self.half_span)
    }
}

/// Gaussian coefficients with envelope `⟨n⟩^{-1}⟨τ − h(n)⟩^{-1}`, supported on
/// the inner two thirds of both frequency ranges. `real` fields are symmetrized
/// through physical space; `mean_zero` drops `n = 0`.
pub fn random_field<R: Rng>(
    grid: &Arc<SpaceTimeGrid>,
    ch: Characteristic,
    real: bool,
    mean_zero: bool,
    rng: &mut R,
) -> SpaceTimeField {
    let (nx, m) = (grid.n(), grid.m());
    let xg = grid.x();
    let kmax = xg.dealias_cutoff();
    let lmax = (m as i64 + 2) / 3 - 1;
    let mut coeffs = vec![C64::new(0.0, 0.0); nx * m];
    for k in 0..nx {
        let n = xg.wavenumber(k);
        let skip = n.abs() > kmax || (mean_zero && n == 0);
        let centre = ch.tau(n);
        for l in 0..m {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let ls = if l < m / 2 { l as i64 } else { l as i64 - m as i64 };
            if skip || ls.abs() > lmax {
                continue;
            }
            let env = 1.0 / (bracket(n as f64) * bracket(grid.tau(l) - centre));
            coeffs[k * m + l] = C64::new(re, im) * env;
        }
    }
    let field = SpaceTimeField::from_coeffs(grid, coeffs).expect("grid-sized");
    if !real {
        return field;
    }
    let phys: Vec<C64> = field.to_physical().into_iter().map(|c| C64::new(c.re, 0.0)).collect();
    SpaceTimeField::from_physical(grid, &phys, WindowSpec::None).expect("grid-sized")
}
