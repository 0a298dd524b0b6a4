//! Fourier substrate on the torus `[0, 2π)`.
//!
//! Coefficients are stored in FFT order: index `k < N/2` holds wavenumber `k`,
//! index `k ≥ N/2` holds `k − N`, so the Nyquist slot `N/2` carries `−N/2`.
//! The normalization is `c_n = (1/N) Σ_j f(x_j) e^{−i n x_j}`, which makes
//! Parseval exact for the normalized measure `dx / 2π`:
//! `(1/2π) ∫ |f|² dx = (1/N) Σ_j |f(x_j)|² = Σ_n |c_n|²`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Equispaced collocation grid with cached FFT plans.
pub struct TorusGrid {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("n", &self.n).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Arc<Self>> {
        if !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid {
                n,
                reason: "N must be even",
            });
        }
        if n < 4 {
            return Err(Error::InvalidGrid {
                n,
                reason: "N must be at least 4",
            });
        }
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.dx() * j as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.point(j)).collect()
    }

    /// Wavenumber stored at coefficient index `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn wavenumbers(&self) -> Vec<i64> {
        (0..self.n).map(|k| self.wavenumber(k)).collect()
    }

    pub fn index_of(&self, wavenumber: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if wavenumber < -half || wavenumber >= half {
            return None;
        }
        Some(wavenumber.rem_euclid(self.n as i64) as usize)
    }

    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Index of the mirrored wavenumber `−n` (the Nyquist slot maps to itself).
    pub fn mirror(&self, k: usize) -> usize {
        (self.n - k) % self.n
    }

    /// Largest retained |n| under the 2/3 rule: `K < N/3`, so products of two
    /// retained modes never alias back onto a retained mode.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.n as i64 + 2) / 3 - 1
    }

    /// In-place forward transform, samples to coefficients.
    pub fn forward(&self, data: &mut [C64]) {
        self.fft.process(data);
        let scale = 1.0 / self.n as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse transform, coefficients to samples.
    pub fn inverse(&self, data: &mut [C64]) {
        self.ifft.process(data);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reality {
    Complex,
    Real,
}

/// One periodic function held as Fourier coefficients.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<TorusGrid>,
    coeffs: Vec<C64>,
    reality: Reality,
    mean_zero: bool,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<TorusGrid>, reality: Reality) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![C64::new(0.0, 0.0); grid.len()],
            reality,
            mean_zero: false,
        }
    }

    pub fn from_coeffs(grid: &Arc<TorusGrid>, coeffs: Vec<C64>, reality: Reality) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        let mut field = Self {
            grid: grid.clone(),
            coeffs,
            reality,
            mean_zero: false,
        };
        if reality == Reality::Real {
            let defect = field.symmetry_defect();
            let scale = field.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
            if defect > 1e-10 * scale {
                return Err(Error::param(
                    "coeffs",
                    format!("real field violates conjugate symmetry by {defect:e}"),
                ));
            }
            field.symmetrize();
        }
        Ok(field)
    }

    /// Forward transform of complex samples.
    pub fn to_spectral(grid: &Arc<TorusGrid>, samples: &[C64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        let mut coeffs = samples.to_vec();
        grid.forward(&mut coeffs);
        Ok(Self {
            grid: grid.clone(),
            coeffs,
            reality: Reality::Complex,
            mean_zero: false,
        })
    }

    pub fn from_real_samples(grid: &Arc<TorusGrid>, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::SizeMismatch {
                expected: grid.len(),
                got: samples.len(),
            });
        }
        let mut coeffs: Vec<C64> = samples.iter().map(|&x| C64::new(x, 0.0)).collect();
        grid.forward(&mut coeffs);
        let mut field = Self {
            grid: grid.clone(),
            coeffs,
            reality: Reality::Real,
            mean_zero: false,
        };
        field.symmetrize();
        Ok(field)
    }

    /// Evaluates `f` at the collocation points and transforms.
    pub fn from_fn(grid: &Arc<TorusGrid>, reality: Reality, f: impl Fn(f64) -> C64) -> Self {
        let samples: Vec<C64> = grid.points().into_iter().map(f).collect();
        let mut field = Self::to_spectral(grid, &samples).expect("length matches grid");
        if reality == Reality::Real {
            field.reality = Reality::Real;
            field.symmetrize();
        }
        field
    }

    pub fn to_physical(&self) -> Vec<C64> {
        let mut data = self.coeffs.clone();
        self.grid.inverse(&mut data);
        data
    }

    pub fn to_real_physical(&self) -> Vec<f64> {
        self.to_physical().into_iter().map(|c| c.re).collect()
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn reality(&self) -> Reality {
        self.reality
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    /// Coefficient of wavenumber `n`, zero outside the representable band.
    pub fn coeff(&self, n: i64) -> C64 {
        self.grid
            .index_of(n)
            .map_or(C64::new(0.0, 0.0), |k| self.coeffs[k])
    }

    /// `max |c(−n) − conj c(n)|` together with `|Im c(−N/2)|`.
    pub fn symmetry_defect(&self) -> f64 {
        symmetry_defect(&self.grid, &self.coeffs)
    }

    /// Projects onto real fields (averaging each mirrored pair).
    pub fn symmetrize(&mut self) {
        self.coeffs = real_part(&self.grid, &self.coeffs);
    }

    /// `∂_x^p`: multiply by `(i n)^p`; the Nyquist mode is dropped for odd `p`.
    pub fn derivative(&self, p: u32) -> Self {
        let mut out = self.clone();
        apply_derivative(&self.grid, &mut out.coeffs, p);
        if p >= 1 {
            out.mean_zero = true;
        }
        out
    }

    /// `D^r`: `|n|^r c(n)` for `n ≠ 0`, mode zero unchanged. Non-integer `r`
    /// drops the Nyquist mode.
    pub fn fractional_d(&self, r: f64) -> Self {
        let mut out = self.clone();
        let integer = r.fract() == 0.0;
        for (k, c) in out.coeffs.iter_mut().enumerate() {
            let n = self.grid.wavenumber(k);
            if n == 0 {
                continue;
            }
            if k == self.grid.nyquist_index() && !integer {
                *c = C64::new(0.0, 0.0);
                continue;
            }
            *c *= (n.unsigned_abs() as f64).powf(r);
        }
        out
    }

    /// `(Σ ⟨n⟩^{2s} |c(n)|²)^{1/2}` with `⟨n⟩ = √(1 + n²)`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let n = self.grid.wavenumber(k) as f64;
                (1.0 + n * n).powf(s) * c.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        norm_sqr(&self.coeffs).sqrt()
    }

    pub fn project_zero_mean(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = C64::new(0.0, 0.0);
        out.mean_zero = true;
        out
    }

    /// Real `L²` inner product `Re Σ conj(a_n) b_n`.
    pub fn inner(&self, other: &Self) -> f64 {
        inner(&self.coeffs, &other.coeffs)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.iter_mut() {
            *c *= alpha;
        }
        out
    }

    pub(crate) fn set_mean_zero(&mut self, flag: bool) {
        self.mean_zero = flag;
    }

    pub(crate) fn with_coeffs(grid: &Arc<TorusGrid>, coeffs: Vec<C64>, reality: Reality, mean_zero: bool) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self {
            grid: grid.clone(),
            coeffs,
            reality,
            mean_zero,
        }
    }
}

pub(crate) fn apply_derivative(grid: &TorusGrid, coeffs: &mut [C64], p: u32) {
    if p == 0 {
        return;
    }
    let nyq = grid.nyquist_index();
    for (k, c) in coeffs.iter_mut().enumerate() {
        if k == nyq && p % 2 == 1 {
            *c = C64::new(0.0, 0.0);
            continue;
        }
        let n = grid.wavenumber(k) as f64;
        *c *= C64::new(0.0, n).powu(p);
    }
}

/// First derivative written into `out`.
pub(crate) fn derivative_into(grid: &TorusGrid, src: &[C64], out: &mut [C64]) {
    let nyq = grid.nyquist_index();
    for (k, (o, s)) in out.iter_mut().zip(src).enumerate() {
        if k == nyq {
            *o = C64::new(0.0, 0.0);
        } else {
            let n = grid.wavenumber(k) as f64;
            *o = C64::new(-n * s.im, n * s.re);
        }
    }
}

/// Coefficients of the physical real part: `(c(n) + conj c(−n)) / 2`.
pub(crate) fn real_part(grid: &TorusGrid, coeffs: &[C64]) -> Vec<C64> {
    (0..coeffs.len())
        .map(|k| 0.5 * (coeffs[k] + coeffs[grid.mirror(k)].conj()))
        .collect()
}

pub(crate) fn symmetry_defect(grid: &TorusGrid, coeffs: &[C64]) -> f64 {
    (0..coeffs.len())
        .map(|k| (coeffs[grid.mirror(k)] - coeffs[k].conj()).norm())
        .fold(0.0, f64::max)
}

/// Zeroes every mode with `|n|` above the 2/3-rule cutoff.
pub(crate) fn truncate_two_thirds(grid: &TorusGrid, coeffs: &mut [C64]) {
    let cut = grid.dealias_cutoff();
    for (k, c) in coeffs.iter_mut().enumerate() {
        if grid.wavenumber(k).abs() > cut {
            *c = C64::new(0.0, 0.0);
        }
    }
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|c| c.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_samples(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    fn random_real_field(grid: &Arc<TorusGrid>, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s: Vec<f64> = (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SpectralField::from_real_samples(grid, &s).unwrap()
    }

    #[test]
    fn grid_points_and_wavenumbers() {
        let g = TorusGrid::new(4).unwrap();
        let pts = g.points();
        for (p, e) in pts.iter().zip([0.0, PI / 2.0, PI, 3.0 * PI / 2.0]) {
            assert!((p - e).abs() < 1e-15);
        }
        let mut ks = g.wavenumbers();
        ks.sort();
        assert_eq!(ks, vec![-2, -1, 0, 1]);
        let g8 = TorusGrid::new(8).unwrap();
        assert!((g8.point(3) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        let err = TorusGrid::new(5).unwrap_err();
        assert!(err.to_string().contains("N must be even"));
        assert!(TorusGrid::new(2).is_err());
        assert!(TorusGrid::new(0).is_err());
    }

    #[test]
    fn dealias_cutoff_is_alias_free() {
        for n in [4usize, 6, 8, 16, 30, 32, 64, 96, 128] {
            let g = TorusGrid::new(n).unwrap();
            let k = g.dealias_cutoff();
            assert!(3 * k < n as i64, "N={n} K={k}");
            assert!(3 * (k + 1) >= n as i64, "N={n} K={k} not maximal");
        }
    }

    #[test]
    fn constant_and_single_mode_transforms() {
        let g = TorusGrid::new(16).unwrap();
        let f = SpectralField::to_spectral(&g, &vec![C64::new(2.5, 0.0); 16]).unwrap();
        assert!((f.coeff(0) - C64::new(2.5, 0.0)).norm() < 1e-15);
        assert!(f.coeffs()[1..].iter().all(|c| c.norm() < 1e-15));

        let e = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(0.0, x).exp());
        for k in 0..16 {
            let expect = if g.wavenumber(k) == 1 { 1.0 } else { 0.0 };
            assert!((e.coeffs()[k].norm() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        for (n, seed) in [(16usize, 1u64), (64, 2), (1024, 3), (4096, 4)] {
            let g = TorusGrid::new(n).unwrap();
            let s = random_samples(n, seed);
            let f = SpectralField::to_spectral(&g, &s).unwrap();
            let back = f.to_physical();
            let scale = s.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let err = s.iter().zip(&back).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-13 * scale.max(1.0), "N={n} err={err}");
            let phys = s.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
            let spec = f.l2_norm().powi(2);
            assert!((phys - spec).abs() <= 1e-12 * phys);
        }
    }

    #[test]
    fn size_mismatch_is_rejected() {
        let g = TorusGrid::new(8).unwrap();
        assert!(matches!(
            SpectralField::to_spectral(&g, &[C64::new(0.0, 0.0); 6]),
            Err(Error::SizeMismatch { expected: 8, got: 6 })
        ));
    }

    #[test]
    fn derivatives_of_simple_functions() {
        let g = TorusGrid::new(32).unwrap();
        let s = SpectralField::from_fn(&g, Reality::Real, |x| C64::new(x.sin(), 0.0));
        let ds = s.derivative(1).to_real_physical();
        for (x, d) in g.points().iter().zip(&ds) {
            assert!((d - x.cos()).abs() < 1e-13);
        }
        let e2 = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(0.0, 2.0 * x).exp());
        let d3 = e2.derivative(3);
        assert!((d3.coeff(2) - C64::new(0.0, -8.0)).norm() < 1e-13);
        let c = SpectralField::to_spectral(&g, &vec![C64::new(3.0, 0.0); 32]).unwrap();
        for p in 1..4 {
            assert!(c.derivative(p).l2_norm() < 1e-15);
        }
    }

    #[test]
    fn odd_derivative_drops_nyquist() {
        let g = TorusGrid::new(8).unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); 8];
        coeffs[4] = C64::new(1.0, 0.0);
        let f = SpectralField::from_coeffs(&g, coeffs, Reality::Real).unwrap();
        assert_eq!(f.derivative(1).coeffs()[4], C64::new(0.0, 0.0));
        assert!((f.derivative(2).coeffs()[4] - C64::new(-16.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn fractional_d_examples() {
        let g = TorusGrid::new(16).unwrap();
        let e1 = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(0.0, x).exp());
        let d = e1.fractional_d(-1.0);
        assert!((d.coeff(1) - C64::new(1.0, 0.0)).norm() < 1e-14);
        let c = SpectralField::to_spectral(&g, &vec![C64::new(1.7, 0.0); 16]).unwrap();
        for r in [-2.5, -1.0, 0.3, 2.0] {
            assert!((c.fractional_d(r).coeff(0) - C64::new(1.7, 0.0)).norm() < 1e-15);
        }
        let e3 = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(0.0, 3.0 * x).exp());
        assert!((e3.fractional_d(2.0).coeff(3) - C64::new(9.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = TorusGrid::new(32).unwrap();
        let e1 = SpectralField::from_fn(&g, Reality::Complex, |x| C64::new(0.0, x).exp());
        assert!((e1.sobolev_norm(1.0) - 2f64.sqrt()).abs() < 1e-13);

        let s = random_samples(32, 9);
        let f = SpectralField::to_spectral(&g, &s).unwrap();
        let l2_samples = (s.iter().map(|c| c.norm_sqr()).sum::<f64>() / 32.0).sqrt();
        assert!((f.sobolev_norm(0.0) - l2_samples).abs() < 1e-13);

        // brute-force sum over the symmetric wavenumber range
        let mut brute = 0.0;
        for n in -16i64..16 {
            let c = f.coeff(n);
            brute += (1.0 + (n * n) as f64).powi(2) * c.norm_sqr();
        }
        assert!((f.sobolev_norm(2.0) - brute.sqrt()).abs() <= 1e-12 * brute.sqrt());
    }

    #[test]
    fn zero_mean_projection() {
        let g = TorusGrid::new(16).unwrap();
        let c = SpectralField::to_spectral(&g, &vec![C64::new(4.0, 0.0); 16]).unwrap();
        assert!(c.project_zero_mean().l2_norm() < 1e-15);
        let f = SpectralField::from_fn(&g, Reality::Real, |x| C64::new(1.0 + x.sin(), 0.0));
        let p = f.project_zero_mean();
        for (x, v) in g.points().iter().zip(p.to_real_physical()) {
            assert!((v - x.sin()).abs() < 1e-14);
        }
        assert!(p.is_mean_zero());
        assert_eq!(p.project_zero_mean().coeffs(), p.coeffs());
    }

    #[test]
    fn real_fields_stay_conjugate_symmetric() {
        let g = TorusGrid::new(32).unwrap();
        let f = random_real_field(&g, 5);
        assert!(f.symmetry_defect() < 1e-15);
        assert!(f.coeffs()[16].im.abs() < 1e-15);
        assert!(f.derivative(1).symmetry_defect() < 1e-14);
        assert!(f.fractional_d(0.5).symmetry_defect() < 1e-14);
    }

    #[test]
    fn real_from_coeffs_rejects_asymmetry() {
        let g = TorusGrid::new(8).unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); 8];
        coeffs[1] = C64::new(1.0, 0.0);
        assert!(SpectralField::from_coeffs(&g, coeffs, Reality::Real).is_err());
    }
}
