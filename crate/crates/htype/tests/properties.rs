use htype::evolve::{schrodinger_coeffs, Equation, LocalizationSpec};
use htype::gft::{plancherel_norm, SpectralSpec};
use htype::gft::SpectralCoeffs;
use htype::grid::{SpaceGrid, SpaceTimeField, TimeGrid};
use htype::group::{DualFrequency, GroupPoint, HTypeStructure};
use htype::norms::{admissible_check, conjugate, critical_sigma, mixed_norm, mixed_norm_time_inner, MixedNormSpec};
use htype::special::{hermite_fn, laguerre_radial};
use nalgebra::DMatrix;
use num_complex::Complex;
use proptest::prelude::*;

type C = Complex<f64>;

fn point(d: usize, m: usize) -> impl Strategy<Value = GroupPoint<f64>> {
    (prop::collection::vec(-3.0..3.0f64, 2 * d), prop::collection::vec(-3.0..3.0f64, m)).prop_map(|(x, z)| GroupPoint::new(x, z).unwrap())
}

fn close(a: &GroupPoint<f64>, b: &GroupPoint<f64>) -> bool {
    a.distance_sup(b) < 1e-12
}

fn small_field(vals: Vec<(f64, f64)>) -> SpaceTimeField<f64> {
    let grid = SpaceGrid::new(1, 1, 3, 1.0, 3, 1.0).unwrap();
    let times = TimeGrid::midpoint(0.0, 1.0, 3).unwrap();
    let mut u = SpaceTimeField::zeros(grid, times);
    for (v, (re, im)) in u.data.iter_mut().zip(vals) {
        *v = C::new(re, im);
    }
    u
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![1.0..12.0f64, Just(f64::INFINITY)]
}

fn random_coeffs(seed: Vec<(f64, f64)>) -> SpectralCoeffs<f64> {
    let spec = SpectralSpec {
        n_max: 3,
        radial_nodes: 4,
        ..SpectralSpec::default()
    };
    let mut c = SpectralCoeffs::zeros(1, 1, 3, spec.nodes(1).unwrap());
    for (v, (re, im)) in c.data.iter_mut().zip(seed.iter().cycle()) {
        *v = C::new(*re, *im);
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law_is_associative_with_inverses(a in point(2, 3), b in point(2, 3), c in point(2, 3)) {
        let s = HTypeStructure::<f64>::quaternionic(2).unwrap();
        let ab_c = s.multiply(&s.multiply(&a, &b).unwrap(), &c).unwrap();
        let a_bc = s.multiply(&a, &s.multiply(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&ab_c, &a_bc));
        let e = s.multiply(&a, &a.inverse()).unwrap();
        prop_assert!(close(&e, &GroupPoint::identity(2, 3)));
    }

    #[test]
    fn dilations_are_automorphisms(a in point(1, 1), b in point(1, 1), scale in 0.1..5.0f64) {
        let s = HTypeStructure::<f64>::heisenberg(1).unwrap();
        let lhs = s.multiply(&a, &b).unwrap().dilate(scale).unwrap();
        let rhs = s.multiply(&a.dilate(scale).unwrap(), &b.dilate(scale).unwrap()).unwrap();
        prop_assert!(lhs.distance_sup(&rhs) < 1e-11 * scale.max(1.0).powi(2));
    }

    #[test]
    fn j_map_has_spectrum_plus_minus_i_norm(mu in prop::collection::vec(-2.0..2.0f64, 3)) {
        prop_assume!(mu.iter().map(|v| v * v).sum::<f64>() > 1e-4);
        let s = HTypeStructure::<f64>::quaternionic(2).unwrap();
        let lam = DualFrequency::new(mu.clone()).unwrap();
        let j = s.j_map(&lam).unwrap();
        let n = j.rows();
        let m = DMatrix::from_row_slice(n, n, j.as_slice());
        let norm = lam.rho();
        for ev in m.complex_eigenvalues().iter() {
            prop_assert!(ev.re.abs() < 1e-10);
            prop_assert!((ev.im.abs() - norm).abs() < 1e-10);
        }
        // J^2 = -|mu|^2 I
        let sq = &m * &m + DMatrix::identity(n, n) * norm * norm;
        prop_assert!(sq.amax() < 1e-12);
    }

    #[test]
    fn mixed_norm_is_a_norm(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 81),
        b in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 81),
        r in exponent(), q in exponent(), p in exponent(),
        c in (-3.0..3.0f64, -3.0..3.0f64),
    ) {
        let spec = MixedNormSpec::new(r, q, p).unwrap();
        let (u, v) = (small_field(a), small_field(b));
        let nu = mixed_norm(&u, &spec);
        let sum = small_field(u.data.iter().zip(&v.data).map(|(x, y)| ((x + y).re, (x + y).im)).collect());
        prop_assert!(mixed_norm(&sum, &spec) <= nu + mixed_norm(&v, &spec) + 1e-12);
        let c = C::new(c.0, c.1);
        let scaled = small_field(u.data.iter().map(|x| ((x * c).re, (x * c).im)).collect());
        prop_assert!((mixed_norm(&scaled, &spec) - c.norm() * nu).abs() <= 1e-12 * (1.0 + c.norm() * nu));
    }

    #[test]
    fn minkowski_orders_time_and_space(
        a in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 81),
        r in exponent(), p in 1.0..6.0f64, extra in 0.0..6.0f64,
    ) {
        // Minkowski: with q >= p the larger exponent belongs outside.
        let spec = MixedNormSpec::new(r, p + extra, p).unwrap();
        let u = small_field(a);
        prop_assert!(mixed_norm(&u, &spec) <= mixed_norm_time_inner(&u, &spec) * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn schrodinger_flow_is_a_unitary_group(seed in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16), s in -3.0..3.0f64, t in -3.0..3.0f64) {
        let c = random_coeffs(seed);
        let a = schrodinger_coeffs(&schrodinger_coeffs(&c, s), t);
        let b = schrodinger_coeffs(&c, s + t);
        let diff = plancherel_norm(&a.add(&b.scale(C::new(-1.0, 0.0))).unwrap());
        prop_assert!(diff <= 1e-12 * plancherel_norm(&c));
        prop_assert!((plancherel_norm(&a) - plancherel_norm(&c)).abs() <= 1e-12 * plancherel_norm(&c));
    }

    #[test]
    fn admissibility_is_consistent(p in 1.0..10.0f64, q in 1.0..10.0f64, r in exponent(), m in 1usize..4, d in 1usize..3) {
        for eq in [Equation::Schrodinger, Equation::Wave] {
            let a = admissible_check(p, q, r, d, m, eq);
            prop_assert!((a.sigma - critical_sigma(p, q, r, d, m, eq)).abs() < 1e-12);
            prop_assert_eq!(a.admissible, a.diagnostics.is_empty());
            if p < 2.0 || q < 2.0 {
                prop_assert!(!a.admissible);
            }
        }
    }

    #[test]
    fn conjugate_exponent_is_an_involution(p in 1.0..50.0f64) {
        let pc = conjugate(p);
        prop_assert!((1.0 / p + 1.0 / pc - 1.0).abs() < 1e-12);
        prop_assert!((conjugate(pc) - p).abs() < 1e-9 * p);
    }

    #[test]
    fn localization_profile_is_a_cutoff(scale in 0.1..10.0f64, mu in 0.0..500.0f64) {
        for spec in [LocalizationSpec::ball(scale), LocalizationSpec::annulus(scale)] {
            let v = spec.profile(mu);
            prop_assert!((0.0..=1.0).contains(&v));
            let (lo, hi) = spec.support();
            if mu > hi || mu < lo {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn hermite_and_laguerre_are_even_where_expected(t in -8.0..8.0f64, k in 0usize..30) {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((hermite_fn(k, -t) - sign * hermite_fn(k, t)).abs() < 1e-12);
        // The ground Laguerre function is exp(-s/4).
        prop_assert!((laguerre_radial(0, 1, t * t) - (-t * t / 4.0).exp()).abs() < 1e-14);
    }
}

#[test]
fn strichartz_ratio_grows_above_critical_sigma() {
    use htype::grid::SpaceField;
    use htype::norms::{dilation_scan, loglog_slope};
    let s = HTypeStructure::<f64>::heisenberg(1).unwrap();
    let grid = SpaceGrid::new(1, 1, 16, 5.0, 32, 8.0).unwrap();
    let spec = SpectralSpec {
        n_max: 8,
        radial_nodes: 16,
        lambda_max: 5.0,
        ..SpectralSpec::default()
    };
    let u0 = SpaceField::from_fn(grid, |x: &[f64], z: &[f64]| C::new((-(x[0] * x[0] + x[1] * x[1]) / 2.0 - z[0] * z[0] / 2.0).exp(), 0.0));
    let norm = MixedNormSpec::new(f64::INFINITY, 4.0, 4.0).unwrap();
    let scales = [1.0, 2.0, 4.0];
    let excess = 0.5;
    let scan = dilation_scan(&u0, &s, &spec, &TimeGrid::midpoint(0.0, 1.0, 6).unwrap(), &norm, Equation::Schrodinger, 1.0 + excess, &scales).unwrap();
    let ratios: Vec<f64> = scan.rows.iter().map(|r| r.ratio).collect();
    assert!(ratios.windows(2).all(|w| w[1] > w[0]), "{ratios:?}");
    // Data on grid.dilated(L) sits at frequency 1/L, so the ratio goes as L^{sigma - sigma_c}.
    assert!((loglog_slope(&scales, &ratios) - excess).abs() < 1e-6);
}
