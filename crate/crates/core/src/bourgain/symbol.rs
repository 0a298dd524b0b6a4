use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::bracket;

/// Log-spaced offsets around both resonance curves `τ = n³ − μn` and `τ = −n²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSpec {
    /// Offsets per sign and curve.
    pub per_side: usize,
    /// Smallest offset.
    pub min_offset: f64,
    /// Largest offset as a multiple of `max(|n|³, 1)`.
    pub reach: f64,
}

impl Default for TauSpec {
    fn default() -> Self {
        Self {
            per_side: 250,
            min_offset: 1e-3,
            reach: 4.0,
        }
    }
}

impl TauSpec {
    fn validate(&self) -> Result<()> {
        if self.per_side < 2 || self.min_offset.is_nan() || self.min_offset <= 0.0 || self.reach.is_nan() || self.reach <= 0.0 {
            return Err(Error::param("tau", "need per_side ≥ 2 and positive offsets"));
        }
        Ok(())
    }

    /// Sample `τ` values for wavenumber `n`.
    pub fn taus(&self, n: i64, mu: f64) -> Vec<f64> {
        let nf = n as f64;
        let centres = [nf * nf * nf - mu * nf, -nf * nf];
        let lo = self.min_offset.ln();
        let hi = (self.reach * nf.abs().powi(3).max(1.0)).ln().max(lo);
        let p = self.per_side;
        let mut out = Vec::with_capacity(2 + 4 * p);
        for c in centres {
            out.push(c);
            for i in 0..p {
                let d = (lo + (hi - lo) * i as f64 / (p - 1) as f64).exp();
                out.push(c + d);
                out.push(c - d);
            }
        }
        out
    }
}

/// Result of [`scan_symbol_bound`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolScan {
    pub nmax: i64,
    pub mu: f64,
    pub eps: f64,
    pub points: usize,
    /// `sup H(n, τ)` over the scanned points.
    pub sup: f64,
    pub argmax_n: i64,
    pub argmax_tau: f64,
    /// Points where `⟨τ − n³ + μn⟩⟨τ + n²⟩ < |n³ − n² − μn| / 4`.
    pub violations: usize,
    /// Smallest ratio of the two sides of that inequality (`∞` if the right side always vanishes).
    pub min_margin: f64,
    /// Point attaining `min_margin`.
    pub worst_n: i64,
    pub worst_tau: f64,
    /// Same check against `|n³ + n² − μn| / 4`, the exact gap between the two modulations.
    pub gap_violations: usize,
    pub gap_min_margin: f64,
}

/// Scans `H(n, τ)` for `|n| ≤ nmax` along `tau`, and checks the resonance lower bound.
pub fn scan_symbol_bound(nmax: i64, tau: &TauSpec, mu: f64, eps: f64) -> Result<SymbolScan> {
    if nmax < 0 {
        return Err(Error::param("nmax", "must be non-negative"));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param("eps", format!("need 0 < ε < 1/2, got {eps}")));
    }
    if !mu.is_finite() {
        return Err(Error::param("mu", "must be finite"));
    }
    tau.validate()?;
    let expo = 0.5 - eps;
    #[derive(Clone, Copy)]
    struct Acc {
        points: usize,
        sup: f64,
        n: i64,
        tau: f64,
        violations: usize,
        margin: f64,
        worst_n: i64,
        worst_tau: f64,
        gap_violations: usize,
        gap_margin: f64,
    }
    let empty = Acc {
        points: 0,
        sup: 0.0,
        n: 0,
        tau: 0.0,
        violations: 0,
        margin: f64::INFINITY,
        worst_n: 0,
        worst_tau: 0.0,
        gap_violations: 0,
        gap_margin: f64::INFINITY,
    };
    let acc = (-nmax..=nmax)
        .into_par_iter()
        .map(|n| {
            let nf = n as f64;
            let stated = (nf * nf * nf - nf * nf - mu * nf).abs() / 4.0;
            let gap = (nf * nf * nf + nf * nf - mu * nf).abs() / 4.0;
            let mut a = empty;
            for t in tau.taus(n, mu) {
                let airy = bracket(t - nf * nf * nf + mu * nf);
                let schr = bracket(t + nf * nf);
                let h = nf.abs() / (airy * schr).powf(expo);
                a.points += 1;
                if h > a.sup {
                    a.sup = h;
                    a.n = n;
                    a.tau = t;
                }
                let lhs = airy * schr;
                if lhs < stated {
                    a.violations += 1;
                }
                if stated > 0.0 && lhs / stated < a.margin {
                    a.margin = lhs / stated;
                    a.worst_n = n;
                    a.worst_tau = t;
                }
                if lhs < gap {
                    a.gap_violations += 1;
                }
                if gap > 0.0 {
                    a.gap_margin = a.gap_margin.min(lhs / gap);
                }
            }
            a
        })
        .reduce(
            || empty,
            |x, y| {
                let best = if y.sup > x.sup || (y.sup == x.sup && y.n.abs() < x.n.abs()) { y } else { x };
                let worst = if y.margin < x.margin { y } else { x };
                Acc {
                    points: x.points + y.points,
                    violations: x.violations + y.violations,
                    margin: worst.margin,
                    worst_n: worst.worst_n,
                    worst_tau: worst.worst_tau,
                    gap_violations: x.gap_violations + y.gap_violations,
                    gap_margin: x.gap_margin.min(y.gap_margin),
                    ..best
                }
            },
        );
    Ok(SymbolScan {
        nmax,
        mu,
        eps,
        points: acc.points,
        sup: acc.sup,
        argmax_n: acc.n,
        argmax_tau: acc.tau,
        violations: acc.violations,
        min_margin: acc.margin,
        worst_n: acc.worst_n,
        worst_tau: acc.worst_tau,
        gap_violations: acc.gap_violations,
        gap_min_margin: acc.gap_margin,
    })
}
