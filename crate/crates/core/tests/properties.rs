use proptest::prelude::*;

use manova::empirics::{counting, stieltjes_of};
use manova::ensembles::{sample_entry, sample_pair, EmpiricalSpectrum, EnsembleSpec, EntryDistribution, SpectrumKind};
use manova::harness::{bulk_window_manova, bulk_window_product, fit_log_slope, median, quantile_sorted};
use manova::laws::{manova_density, manova_stieltjes, product_density, support_edges, ModelParams};
use manova::selfconsistent::{map_to_manova, map_to_product, underbar_transform};
use manova::Complex64;

fn ratio() -> impl Strategy<Value = f64> {
    1.05f64..8.0
}

fn upper_half_plane() -> impl Strategy<Value = Complex64> {
    (-2.0f64..3.0, 1e-3f64..5.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn dist() -> impl Strategy<Value = EntryDistribution> {
    prop::sample::select(EntryDistribution::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn edges_are_ordered(a in ratio(), b in ratio()) {
        let e = support_edges(&ModelParams::new(a, b).unwrap());
        prop_assert!(0.0 < e.lambda_minus && e.lambda_minus < e.lambda_plus && e.lambda_plus < 1.0);
        prop_assert!((e.mu_minus - (1.0 / e.lambda_plus - 1.0)).abs() <= 1e-9 * e.mu_minus.max(1.0));
        prop_assert!(0.0 < e.a_minus && e.a_minus < e.a_plus);
    }

    #[test]
    fn densities_are_nonnegative_and_vanish_off_support(a in ratio(), b in ratio(), t in -0.5f64..1.5) {
        let p = ModelParams::new(a, b).unwrap();
        let e = support_edges(&p);
        let f = manova_density(&p, t);
        prop_assert!(f >= 0.0);
        if t <= e.lambda_minus || t >= e.lambda_plus {
            prop_assert_eq!(f, 0.0);
        }
        prop_assert!(product_density(&p, 20.0 * t.abs()) >= 0.0);
    }

    #[test]
    fn manova_stieltjes_is_nevanlinna(a in ratio(), b in ratio(), z in upper_half_plane()) {
        let p = ModelParams::new(a, b).unwrap();
        let m = manova_stieltjes(&p, z).unwrap();
        prop_assert!(m.im > 0.0);
        // |m(z)| <= 1 / Im z for a probability measure.
        prop_assert!(m.norm() <= 1.0 / z.im * (1.0 + 1e-9));
        let mc = manova_stieltjes(&p, z.conj()).unwrap();
        prop_assert!((mc - m.conj()).norm() <= 1e-12 * m.norm().max(1.0));
    }

    #[test]
    fn coordinate_maps_are_inverse(a in ratio(), b in ratio(), z in upper_half_plane()) {
        let p = ModelParams::new(a, b).unwrap();
        let manova = |w: Complex64| manova_stieltjes(&p, w);
        let zp = 1.0 / z - 1.0;
        let mp = map_to_product(zp, manova).unwrap();
        let back = map_to_manova(z, |w| Ok(if w == zp { mp } else { mp.conj() })).unwrap();
        prop_assert!((back - manova_stieltjes(&p, z).unwrap()).norm() <= 1e-9 * back.norm().max(1.0));
    }

    #[test]
    fn underbar_is_affine_in_m(c in 1.01f64..6.0, z in upper_half_plane(), m in upper_half_plane()) {
        // Affine in m with slope 1/c.
        let u1 = underbar_transform(c, z, m).unwrap();
        let u0 = underbar_transform(c, z, Complex64::new(0.0, 0.0)).unwrap();
        prop_assert!((u1 - u0 - m / c).norm() <= 1e-12 * (1.0 + m.norm()));
    }

    #[test]
    fn empirical_stieltjes_is_nevanlinna(values in prop::collection::vec(-3.0f64..3.0, 1..40), z in upper_half_plane()) {
        let m = stieltjes_of(&values, z).unwrap();
        prop_assert!(m.im > 0.0);
        prop_assert!(m.norm() <= 1.0 / z.im * (1.0 + 1e-12));
    }

    #[test]
    fn counting_is_bounded(mut values in prop::collection::vec(0.0f64..1.0, 1..60), e in 0.0f64..1.0, eta in 1e-3f64..0.5) {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let s = EmpiricalSpectrum { eigenvalues: values.clone(), eigenvectors: None, kind: SpectrumKind::Manova };
        let c = counting(&s, e, eta).unwrap();
        let hand = values.iter().filter(|&&l| (l - e).abs() <= 0.5 * eta).count();
        prop_assert_eq!(c.count, hand);
        prop_assert!(c.count <= n);
    }

    #[test]
    fn bulk_windows_shrink_with_kappa(a in ratio(), b in ratio(), k1 in 0.0f64..1.0, k2 in 0.0f64..1.0) {
        let p = ModelParams::new(a, b).unwrap();
        let e = support_edges(&p);
        let max = (0.5 * (e.lambda_plus - e.lambda_minus)).powi(2);
        let (small, large) = if k1 < k2 { (k1 * max, k2 * max) } else { (k2 * max, k1 * max) };
        let (l0, h0) = bulk_window_manova(&p, small).unwrap();
        let (l1, h1) = bulk_window_manova(&p, large).unwrap();
        prop_assert!(l0 <= l1 + 1e-15 && h1 <= h0 + 1e-15);
        let (pl, ph) = bulk_window_product(&p, large).unwrap();
        prop_assert!(pl <= ph);
        prop_assert!(bulk_window_manova(&p, max * 1.01 + 1e-12).is_err());
    }

    #[test]
    fn quantiles_are_ordered(mut values in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        values.sort_by(f64::total_cmp);
        let qs: Vec<f64> = [0.0, 0.25, 0.5, 0.75, 1.0].iter().map(|&q| quantile_sorted(&values, q)).collect();
        prop_assert!(qs.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(median(&values).unwrap(), qs[2]);
    }

    #[test]
    fn slope_is_scale_invariant(slope in -2.0f64..0.5, scale in 0.01f64..100.0) {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0, 32.0].iter().map(|&x: &f64| (x, x.powf(slope))).collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, scale * y)).collect();
        let f0 = fit_log_slope(&pts).unwrap();
        let f1 = fit_log_slope(&scaled).unwrap();
        prop_assert!((f0.slope - slope).abs() < 1e-10);
        prop_assert!((f1.slope - f0.slope).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampling_is_counter_based(seed in any::<u64>(), trial in 0u64..1000, d in dist(), n in 2usize..12) {
        let spec = EnsembleSpec {
            n,
            params: ModelParams::new(2.0, 1.5).unwrap(),
            dist: d,
            master_seed: seed,
            trial_index: trial,
        };
        let pair = sample_pair(&spec).unwrap();
        let again = sample_pair(&spec).unwrap();
        prop_assert_eq!(&pair.x, &again.x);
        let (i, j) = (n - 1, spec.cols_y() - 1);
        prop_assert_eq!(pair.y[(i, j)], sample_entry(&spec, true, i, j));
        let other = sample_pair(&spec.with_trial(trial + 1)).unwrap();
        prop_assert!(pair.x != other.x);
    }
}
