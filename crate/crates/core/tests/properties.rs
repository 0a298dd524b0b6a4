use std::f64::consts::PI;
use std::sync::Arc;

use nlskdv::bourgain::{NormSpec, SpaceTimeField, SpaceTimeGrid, WindowSpec};
use nlskdv::dynamics::{simulate, WaveState};
use nlskdv::operators::{bracket, ActuatorProfile, ProfileSpec, SystemParams};
use nlskdv::spectral::{Reality, SpectralField, TorusGrid, C64};
use proptest::prelude::*;

fn grid_size() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![4usize, 8, 16, 32, 64, 128])
}

fn samples(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn real_samples(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn sized<T: std::fmt::Debug>(f: impl Fn(usize) -> BoxedStrategy<T>) -> impl Strategy<Value = (Arc<TorusGrid>, T)> {
    grid_size().prop_flat_map(move |n| (Just(TorusGrid::new(n).unwrap()), f(n)))
}

fn max_gap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn round_trip((g, s) in sized(|n| samples(n).boxed())) {
        let f = SpectralField::to_spectral(&g, &s).unwrap();
        prop_assert!(max_gap(&f.to_physical(), &s) <= 1e-12);
    }

    #[test]
    fn parseval((g, s) in sized(|n| samples(n).boxed())) {
        let f = SpectralField::to_spectral(&g, &s).unwrap();
        let phys = (s.iter().map(|c| c.norm_sqr()).sum::<f64>() / g.len() as f64).sqrt();
        prop_assert!((f.l2_norm() - phys).abs() <= 1e-12 * phys.max(1.0));
        prop_assert!((f.sobolev_norm(0.0) - f.l2_norm()).abs() <= 1e-14);
    }

    #[test]
    fn derivative_is_skew((g, (a, b)) in sized(|n| (real_samples(n), real_samples(n)).boxed())) {
        let f = SpectralField::from_real_samples(&g, &a).unwrap().project_zero_mean();
        let h = SpectralField::from_real_samples(&g, &b).unwrap().project_zero_mean();
        let defect = f.derivative(1).inner(&h) + f.inner(&h.derivative(1));
        prop_assert!(defect.abs() <= 1e-12 * (1.0 + g.len() as f64));
    }

    #[test]
    fn projection_is_orthogonal_and_idempotent((g, s) in sized(|n| samples(n).boxed())) {
        let f = SpectralField::to_spectral(&g, &s).unwrap();
        let p = f.project_zero_mean();
        prop_assert!(p.is_mean_zero());
        prop_assert!(max_gap(p.project_zero_mean().coeffs(), p.coeffs()) <= 1e-14);
        let rest: Vec<C64> = f.coeffs().iter().zip(p.coeffs()).map(|(a, b)| a - b).collect();
        let rest = SpectralField::from_coeffs(&g, rest, Reality::Complex).unwrap();
        prop_assert!(p.inner(&rest).abs() <= 1e-14);
    }

    #[test]
    fn multipliers_commute((g, s) in sized(|n| samples(n).boxed()), r in -2.0f64..2.0, p in 0u32..4) {
        let f = SpectralField::to_spectral(&g, &s).unwrap();
        let x = f.fractional_d(r).derivative(p);
        let y = f.derivative(p).fractional_d(r);
        let size = x.coeffs().iter().map(|c| c.norm()).fold(f64::MIN_POSITIVE, f64::max);
        prop_assert!(max_gap(x.coeffs(), y.coeffs()) <= 1e-13 * size);
    }

    #[test]
    fn real_fields_stay_real((g, a) in sized(|n| real_samples(n).boxed()), p in 0u32..4, r in -1.5f64..1.5) {
        let f = SpectralField::from_real_samples(&g, &a).unwrap();
        prop_assert!(f.derivative(p).symmetry_defect() <= 1e-12);
        prop_assert!(f.fractional_d(r).symmetry_defect() <= 1e-12);
    }

    #[test]
    fn g_is_self_adjoint_with_mean_zero_range(
        (g, (a, b)) in sized(|n| (real_samples(n), real_samples(n)).boxed()),
        center in 0.0f64..(2.0 * PI),
        half in 0.3f64..1.5,
    ) {
        prop_assume!(g.len() >= 16);
        let prof = ActuatorProfile::build(&g, ProfileSpec::new(center, half, 0.5)).unwrap();
        let mut out = vec![0.0; g.len()];
        prof.apply_g_samples(&a, &mut out);
        prop_assert!((out.iter().sum::<f64>() * g.dx()).abs() <= 1e-12);
        let fa = SpectralField::from_real_samples(&g, &a).unwrap();
        let fb = SpectralField::from_real_samples(&g, &b).unwrap();
        let gap = prof.apply_g(&fa).inner(&fb) - fa.inner(&prof.apply_g(&fb));
        prop_assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn modulation_gap_bound(n in -600i64..600, tau in -3e8f64..3e8, mu in -3.0f64..3.0, near in any::<bool>()) {
        let nf = n as f64;
        let t = if near { nf * nf * nf - mu * nf + tau / 1e8 } else { tau };
        let lhs = bracket(t - nf * nf * nf + mu * nf) * bracket(t + nf * nf);
        prop_assert!(lhs >= (nf * nf * nf + nf * nf - mu * nf).abs() / 4.0);
    }

    #[test]
    fn norms_are_homogeneous(s in samples(8 * 16), alpha in -5.0f64..5.0, k in -1.0f64..2.0, b in -0.5f64..0.5) {
        let g = SpaceTimeGrid::symmetric(&TorusGrid::new(8).unwrap(), 16, 2.0).unwrap();
        let f = SpaceTimeField::from_physical(&g, &s, WindowSpec::None).unwrap();
        for spec in [NormSpec::x(k, b), NormSpec::y(k, b, 1.0), NormSpec::z(k), NormSpec::w(k, 0.5), NormSpec::x(k, b).tilde()] {
            let a = spec.norm(&f.scale(alpha)).unwrap();
            let c = alpha.abs() * spec.norm(&f).unwrap();
            prop_assert!((a - c).abs() <= 1e-12 * c.max(1e-300));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn closed_loop_energy_never_grows(seed in any::<u64>(), norm in 0.05f64..1.0) {
        let g = TorusGrid::new(16).unwrap();
        let prof = ActuatorProfile::build(&g, ProfileSpec::new(PI, PI / 2.0, 0.5)).unwrap();
        let p = SystemParams::new(1.0, 0.0, prof);
        let s = WaveState::random(&g, seed, 4, norm);
        let tr = simulate(&p, &s, 0.2, 1e-3, None).unwrap();
        let e = tr.energies();
        prop_assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        prop_assert!(tr.mean_deviation() <= 1e-12);
    }
}
