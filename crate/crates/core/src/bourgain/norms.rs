use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::bracket;

use super::field::SpaceTimeField;

/// Norm family. `X` is adapted to `τ = −n²`, `Y` to `τ = n³ − μn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    X,
    Y,
    /// `X^{k,1/2}` plus `‖⟨n⟩^k ŵ‖_{l²_n L¹_τ}`.
    XTilde,
    YTilde,
    /// `X^{k,−1/2}` plus `‖⟨n⟩^k ŵ / ⟨τ + n²⟩‖_{L¹_τ l²_n}`.
    Z,
    W,
}

impl Family {
    fn airy(self) -> bool {
        matches!(self, Family::Y | Family::YTilde | Family::W)
    }
}

/// A Bourgain-type norm: family, spatial index `s`, modulation index `b`, and `μ`.
/// `b` is ignored by the tilde, `Z` and `W` families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormSpec {
    pub family: Family,
    pub s: f64,
    pub b: f64,
    pub mu: f64,
}

impl NormSpec {
    pub fn x(s: f64, b: f64) -> Self {
        Self { family: Family::X, s, b, mu: 0.0 }
    }

    pub fn y(s: f64, b: f64, mu: f64) -> Self {
        Self { family: Family::Y, s, b, mu }
    }

    pub fn z(s: f64) -> Self {
        Self { family: Family::Z, s, b: -0.5, mu: 0.0 }
    }

    pub fn w(s: f64, mu: f64) -> Self {
        Self { family: Family::W, s, b: -0.5, mu }
    }

    pub fn tilde(self) -> Self {
        let family = if self.family.airy() { Family::YTilde } else { Family::XTilde };
        Self { family, b: 0.5, ..self }
    }

    fn validate(&self) -> Result<()> {
        if !(self.s.is_finite() && self.b.is_finite() && self.mu.is_finite()) {
            return Err(Error::param("norm", "indices must be finite"));
        }
        Ok(())
    }

    /// `⟨τ − h(n)⟩` for the family's characteristic `h`.
    pub fn modulation(&self, n: i64, tau: f64) -> f64 {
        let n = n as f64;
        if self.family.airy() {
            bracket(tau - n * n * n + self.mu * n)
        } else {
            bracket(tau + n * n)
        }
    }

    /// Squared `X`/`Y` weight `⟨n⟩^{2s}⟨τ − h(n)⟩^{2b}`.
    pub fn weight_sq(&self, n: i64, tau: f64, b: f64) -> f64 {
        bracket(n as f64).powf(2.0 * self.s) * self.modulation(n, tau).powf(2.0 * b)
    }

    pub fn norm(&self, field: &SpaceTimeField) -> Result<f64> {
        self.validate()?;
        let g = field.grid();
        let (nx, m) = (g.n(), g.m());
        let dtau = g.dtau();
        let taus = g.taus();
        let xg = g.x();
        let quad = |b: f64| -> f64 {
            let mut sum = 0.0;
            for k in 0..nx {
                let n = xg.wavenumber(k);
                for (l, &tau) in taus.iter().enumerate() {
                    let c = field.at(k, l).norm_sqr();
                    if c != 0.0 {
                        sum += self.weight_sq(n, tau, b) * c;
                    }
                }
            }
            (sum * dtau).sqrt()
        };
        let value = match self.family {
            Family::X | Family::Y => quad(self.b),
            Family::XTilde | Family::YTilde => {
                let mut l2 = 0.0;
                for k in 0..nx {
                    let n = xg.wavenumber(k);
                    let l1: f64 = (0..m).map(|l| field.at(k, l).norm()).sum::<f64>() * dtau;
                    l2 += bracket(n as f64).powf(2.0 * self.s) * l1 * l1;
                }
                quad(0.5) + l2.sqrt()
            }
            Family::Z | Family::W => {
                let mut l1 = 0.0;
                for (l, &tau) in taus.iter().enumerate() {
                    let mut col = 0.0;
                    for k in 0..nx {
                        let n = xg.wavenumber(k);
                        let c = field.at(k, l).norm_sqr();
                        if c != 0.0 {
                            col += self.weight_sq(n, tau, -1.0) * c;
                        }
                    }
                    l1 += col.sqrt();
                }
                quad(-0.5) + l1 * dtau
            }
        };
        if !value.is_finite() {
            return Err(Error::param("norm", "non-finite value"));
        }
        Ok(value)
    }
}

/// Shorthand for [`NormSpec::norm`].
pub fn norm(field: &SpaceTimeField, spec: &NormSpec) -> Result<f64> {
    spec.norm(field)
}
