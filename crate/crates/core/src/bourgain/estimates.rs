use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::ensemble::{random_field, Characteristic, EnsembleConfig};
use super::field::{product, SpaceTimeField, SpaceTimeGrid, WindowSpec};
use super::norms::NormSpec;

/// Ratios of one estimate over a random ensemble.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub estimate: String,
    pub label: String,
    pub n: usize,
    pub m: usize,
    pub samples: usize,
    /// Samples dropped because the denominator vanished or a value was not finite.
    pub excluded: usize,
    pub max: f64,
    pub median: f64,
    pub ratios: Vec<f64>,
}

impl RatioStats {
    fn collect(estimate: &str, label: String, cfg: &EnsembleConfig, raw: Vec<(f64, f64)>) -> Self {
        let samples = raw.len();
        let mut ratios: Vec<f64> = raw
            .into_iter()
            .filter(|(num, den)| num.is_finite() && den.is_finite() && *den > 1e-300)
            .map(|(num, den)| num / den)
            .filter(|r| r.is_finite())
            .collect();
        let excluded = samples - ratios.len();
        let mut sorted = ratios.clone();
        sorted.sort_by(f64::total_cmp);
        let (max, median) = if sorted.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (sorted[sorted.len() - 1], sorted[sorted.len() / 2])
        };
        ratios.shrink_to_fit();
        Self {
            estimate: estimate.to_string(),
            label,
            n: cfg.n,
            m: cfg.m,
            samples,
            excluded,
            max,
            median,
            ratios,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.excluded == 0 && self.max.is_finite()
    }
}

fn sample_pairs<T, F>(cfg: &EnsembleConfig, salt: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Arc<SpaceTimeGrid>, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    let grid = cfg.grid()?;
    (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.rotate_left(17));
            rng.set_stream(i as u64);
            f(&grid, &mut rng)
        })
        .collect()
}

fn check_b(name: &'static str, b: f64) -> Result<()> {
    if !(b.is_finite() && b.abs() < 0.5) {
        return Err(Error::param(name, format!("need |b| < 1/2, got {b}")));
    }
    Ok(())
}

fn window(t: f64) -> WindowSpec {
    WindowSpec::Psi { center: 0.0, scale: t }
}

/// `‖ψ u v w̄‖_{Z^k} / (‖u‖‖v‖‖w‖)_{X^{k,3/8}}`.
pub fn trilinear_ratio(cfg: &EnsembleConfig, k: f64) -> Result<RatioStats> {
    let lhs = NormSpec::z(k);
    let rhs = NormSpec::x(k, 0.375);
    let raw = sample_pairs(cfg, 1, |g, rng| {
        let fs: Vec<SpaceTimeField> = (0..3)
            .map(|_| random_field(g, Characteristic::Schrodinger, false, false, rng))
            .collect();
        let mut w = fs[2].to_physical();
        w.iter_mut().for_each(|c| *c = c.conj());
        let prod = product(g, &[fs[0].to_physical(), fs[1].to_physical(), w], window(1.0));
        let den = fs.iter().map(|f| rhs.norm(f)).product::<Result<f64>>()?;
        Ok((lhs.norm(&prod)?, den))
    })?;
    Ok(RatioStats::collect("trilinear", format!("k={k}"), cfg, raw))
}

/// Bilinear ratios at each window size and the fitted exponent `θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearReport {
    pub stats: Vec<RatioStats>,
    pub windows: Vec<f64>,
    /// Slope of `log max` against `log T`.
    pub theta: f64,
}

/// `‖ψ_T ∂_x(v₁v₂)‖_{W^s} / (‖v₁‖‖v₂‖)_{Y^{s,1/2}}` for each `T` in `windows`.
pub fn bilinear_ratio(cfg: &EnsembleConfig, s: f64, mu: f64, windows: &[f64]) -> Result<BilinearReport> {
    if windows.len() < 2 || windows.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::param("windows", "need at least two positive window sizes"));
    }
    let lhs = NormSpec::w(s, mu);
    let rhs = NormSpec::y(s, 0.5, mu);
    let ch = Characteristic::Airy { mu };
    let raw = sample_pairs(cfg, 2, |g, rng| {
        let a = random_field(g, ch, true, true, rng);
        let b = random_field(g, ch, true, true, rng);
        let den = rhs.norm(&a)? * rhs.norm(&b)?;
        let (pa, pb) = (a.to_physical(), b.to_physical());
        let mut nums = Vec::with_capacity(windows.len());
        for &t in windows {
            nums.push(lhs.norm(&product(g, &[pa.clone(), pb.clone()], window(t)).dx())?);
        }
        Ok((nums, den))
    })?;
    let stats: Vec<RatioStats> = windows
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pairs = raw.iter().map(|(nums, den)| (nums[i], *den)).collect();
            RatioStats::collect("bilinear", format!("s={s},mu={mu},T={t}"), cfg, pairs)
        })
        .collect();
    let xs: Vec<f64> = windows.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = stats.iter().map(|st| st.max.ln()).collect();
    let theta = slope(&xs, &ys);
    Ok(BilinearReport {
        stats,
        windows: windows.to_vec(),
        theta,
    })
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖∂_x u‖_{W^k} / ‖u‖_{X^{k,1/2−ε}}` and `‖∂_x v‖_{Z^s} / ‖v‖_{Y^{s,1/2−ε}}`.
pub fn derivative_coupling_ratio(cfg: &EnsembleConfig, k: f64, s: f64, mu: f64, eps: f64) -> Result<[RatioStats; 2]> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::param("eps", format!("need 0 < ε < 1/2, got {eps}")));
    }
    let b = 0.5 - eps;
    let (w, x) = (NormSpec::w(k, mu), NormSpec::x(k, b));
    let first = sample_pairs(cfg, 3, |g, rng| {
        let u = random_field(g, Characteristic::Schrodinger, false, false, rng);
        Ok((w.norm(&u.dx())?, x.norm(&u)?))
    })?;
    let (z, y) = (NormSpec::z(s), NormSpec::y(s, b, mu));
    let second = sample_pairs(cfg, 4, |g, rng| {
        let v = random_field(g, Characteristic::Airy { mu }, true, true, rng);
        Ok((z.norm(&v.dx())?, y.norm(&v)?))
    })?;
    Ok([
        RatioStats::collect("coupling-schrodinger", format!("k={k},mu={mu},eps={eps}"), cfg, first),
        RatioStats::collect("coupling-kdv", format!("s={s},mu={mu},eps={eps}"), cfg, second),
    ])
}

/// `‖v‖_{L⁴_{t,x}} / ‖v‖_{Y^{0,1/3}}`.
pub fn strichartz_ratio(cfg: &EnsembleConfig, mu: f64) -> Result<RatioStats> {
    let y = NormSpec::y(0.0, 1.0 / 3.0, mu);
    let raw = sample_pairs(cfg, 5, |g, rng| {
        let v = random_field(g, Characteristic::Airy { mu }, true, true, rng);
        Ok((v.l4_physical(), y.norm(&v)?))
    })?;
    Ok(RatioStats::collect("strichartz", format!("mu={mu}"), cfg, raw))
}

/// `‖ψ_T f‖_{X^{s,b′}} / (T^{b−b′}‖f‖_{X^{s,b}})` with `−1/2 < b′ ≤ b < 1/2`.
pub fn time_localization_ratio(cfg: &EnsembleConfig, s: f64, b: f64, b_prime: f64, t: f64) -> Result<RatioStats> {
    check_b("b", b)?;
    check_b("b_prime", b_prime)?;
    if b_prime > b {
        return Err(Error::param("b_prime", "must not exceed b"));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::param("t", "window size must lie in (0, 1)"));
    }
    let (lhs, rhs) = (NormSpec::x(s, b_prime), NormSpec::x(s, b));
    let raw = sample_pairs(cfg, 6, |g, rng| {
        let f = random_field(g, Characteristic::Schrodinger, false, false, rng);
        Ok((lhs.norm(&f.windowed(window(t)))?, t.powf(b - b_prime) * rhs.norm(&f)?))
    })?;
    Ok(RatioStats::collect(
        "time-localization",
        format!("s={s},b={b},b'={b_prime},T={t}"),
        cfg,
        raw,
    ))
}

/// Parameters of the full estimate suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub ensemble: EnsembleConfig,
    pub k: f64,
    pub s: f64,
    pub mu: f64,
    pub eps: f64,
    pub windows: Vec<f64>,
    pub b: f64,
    pub b_prime: f64,
    pub localization_window: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            ensemble: EnsembleConfig::default(),
            k: 0.0,
            s: 0.0,
            mu: 1.0,
            eps: 0.1,
            windows: vec![0.5, 0.25, 0.125],
            b: 0.4,
            b_prime: 0.2,
            localization_window: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub config: SuiteConfig,
    pub stats: Vec<RatioStats>,
    pub bilinear_theta: f64,
}

impl SuiteReport {
    pub fn all_finite(&self) -> bool {
        self.stats.iter().all(RatioStats::all_finite)
    }

    pub fn find(&self, estimate: &str) -> Option<&RatioStats> {
        self.stats.iter().find(|s| s.estimate == estimate)
    }

    /// One row per sample: `estimate,label,n,m,index,ratio`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "estimate,label,n,m,index,ratio")?;
        for st in &self.stats {
            for (i, r) in st.ratios.iter().enumerate() {
                writeln!(w, "{},\"{}\",{},{},{},{:.17e}", st.estimate, st.label, st.n, st.m, i, r)?;
            }
        }
        Ok(())
    }
}

/// Runs all five estimates on one ensemble configuration.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let e = &cfg.ensemble;
    let mut stats = vec![trilinear_ratio(e, cfg.k)?];
    let bi = bilinear_ratio(e, cfg.s, cfg.mu, &cfg.windows)?;
    stats.extend(bi.stats);
    stats.extend(derivative_coupling_ratio(e, cfg.k, cfg.s, cfg.mu, cfg.eps)?);
    stats.push(strichartz_ratio(e, cfg.mu)?);
    stats.push(time_localization_ratio(e, cfg.s, cfg.b, cfg.b_prime, cfg.localization_window)?);
    Ok(SuiteReport {
        config: cfg.clone(),
        stats,
        bilinear_theta: bi.theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> EnsembleConfig {
        EnsembleConfig {
            n: 16,
            m: 32,
            samples: 8,
            ..EnsembleConfig::default()
        }
    }

    #[test]
    fn suite_is_finite_and_deterministic() {
        let cfg = SuiteConfig {
            ensemble: small(),
            ..SuiteConfig::default()
        };
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert!(a.all_finite());
        assert_eq!(a, b);
        assert_eq!(a.stats.len(), 8);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 8 * 8);
    }

    #[test]
    fn rejects_bad_parameters() {
        let e = small();
        assert!(time_localization_ratio(&e, 0.0, 0.2, 0.4, 0.5).is_err());
        assert!(time_localization_ratio(&e, 0.0, 0.6, 0.2, 0.5).is_err());
        assert!(derivative_coupling_ratio(&e, 0.0, 0.0, 0.0, 0.0).is_err());
        assert!(bilinear_ratio(&e, 0.0, 0.0, &[0.5]).is_err());
        let short = EnsembleConfig { m: 4, ..e };
        assert!(strichartz_ratio(&short, 0.0).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let xs: Vec<f64> = [0.5f64, 0.25, 0.125].iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.3 * x + 1.0).collect();
        assert!((slope(&xs, &ys) - 0.3).abs() < 1e-12);
    }
}
