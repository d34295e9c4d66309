use proptest::prelude::*;

use kkharmonic::energy::{DiscreteField, Quadrature};
use kkharmonic::geometry::{sphere_volume, TorusFunction, VectorField};
use kkharmonic::kk::{metric_on_lifts, LiftPair};
use kkharmonic::rng::{sample_point, sample_tangent, seeded};
use kkharmonic::solver::{
    closed_form_b, construct_b_from_c, obstruction_check, ode_residual, CheckOutcome, Family, ObstructionCase, ProfileProblem,
};
use kkharmonic::tension::sigma_defect;
use kkharmonic::{tension, FieldSpec, KkMetricSpec, Manifold, ScalarProfile, Vector};

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 48,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn g_mr_family_is_positive(m in 0.0f64..4.0, r in 0.0f64..4.0, t_max in 0.5f64..10.0) {
        let report = KkMetricSpec::g_mr(m, r).unwrap().with_t_max(t_max).validate();
        prop_assert!(report.pass);
        prop_assert!(report.min_b > 0.0 && report.min_radial > 0.0);
    }

    #[test]
    fn lift_metric_is_symmetric_and_positive(seed in any::<u64>(), m in 0.0f64..3.0, r in 0.0f64..3.0) {
        let s = Manifold::sphere(3);
        let spec = KkMetricSpec::g_mr(m, r).unwrap();
        let mut rng = seeded(seed);
        let p = sample_point(&s, &mut rng);
        let e = sample_tangent(&s, &p, &mut rng);
        let mk = |rng: &mut _| {
            LiftPair::new(&s, p.clone(), e.clone(), sample_tangent(&s, &p, rng), sample_tangent(&s, &p, rng)).unwrap()
        };
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let xy = metric_on_lifts(&s, &spec, &x, &y).unwrap();
        let yx = metric_on_lifts(&s, &spec, &y, &x).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-12 * xy.abs().max(1.0));
        prop_assert!(metric_on_lifts(&s, &spec, &x, &x).unwrap() > 0.0);
    }

    #[test]
    fn hopf_is_harmonic_for_exponential_profiles(
        seed in any::<u64>(),
        lambda in 0.3f64..2.0,
        k in 0.1f64..5.0,
        c in 0.0f64..2.0,
    ) {
        let s3 = Manifold::sphere(3);
        let field = FieldSpec::killing(&[lambda, lambda]);
        let spec = KkMetricSpec::new(
            ScalarProfile::constant(1.0),
            ScalarProfile::exp(k, -1.0 / (lambda * lambda)),
            ScalarProfile::constant(c),
        );
        let p = sample_point(&s3, &mut seeded(seed));
        let t = tension(&s3, &spec, &field, &p).unwrap();
        prop_assert!(t.norm_g < 1e-9 * (1.0 + k), "{}", t.norm_g);
    }

    #[test]
    fn tension_is_invariant_under_metric_scaling(seed in any::<u64>(), c in 0.1f64..10.0) {
        let s2 = Manifold::sphere(2);
        let field = FieldSpec::quadratic(&[(1.0, 1), (0.3, 1), (-0.4, 1)]);
        let base = KkMetricSpec::new(ScalarProfile::exp(1.0, -0.2).plus_constant(1.0), ScalarProfile::exp(1.0, -1.0), ScalarProfile::constant(0.3));
        let scaled = KkMetricSpec::new(ScalarProfile::exp(c, -0.2).plus_constant(c), ScalarProfile::exp(c, -1.0), ScalarProfile::constant(0.3 * c));
        let p = sample_point(&s2, &mut seeded(seed));
        let a = tension(&s2, &base, &field, &p).unwrap();
        let b = tension(&s2, &scaled, &field, &p).unwrap();
        prop_assert!((&a.horizontal - &b.horizontal).norm() < 1e-10 * (1.0 + a.horizontal_norm));
        prop_assert!((&a.vertical - &b.vertical).norm() < 1e-10 * (1.0 + a.vertical_norm));
    }

    #[test]
    fn closed_forms_solve_the_family_odes(
        half in 2usize..6,
        mu in 0.3f64..2.0,
        p in 2usize..5,
        lambda in 0.3f64..2.0,
        k in 0.2f64..3.0,
    ) {
        let families = [
            Family::Quadratic { n: 2 * half + 1, mu },
            Family::KillingEven { p, k: p - 2, lambda },
            Family::KillingOdd { p, k: p - 1, lambda },
            Family::KillingOdd { p, k: 0, lambda },
            Family::EnlargedConformal { n: p, a_norm_sq: mu * mu },
            Family::EnlargedKilling { p, lambda },
        ];
        for family in families {
            let spec = closed_form_b(&family, k, 1.0).unwrap().solved().unwrap();
            prop_assert!(ode_residual(&family, &spec) < 1e-9 * (1.0 + k), "{}", family.id());
            prop_assert!(spec.validate().pass);
        }
    }

    #[test]
    fn conformal_defect_is_the_radial_coefficient(
        seed in any::<u64>(),
        a in proptest::array::uniform3(-2.0f64..2.0),
        m in 0.0f64..3.0,
        r in 0.0f64..3.0,
    ) {
        let av = Vector::from_row_slice(&a);
        let a2 = av.norm_squared();
        prop_assume!(a2 > 0.01);
        let s2 = Manifold::sphere(2);
        let spec = KkMetricSpec::g_mr(m, r).unwrap();
        let q = sample_point(&s2, &mut seeded(seed));
        let q = &q - &av * (q.dot(&av) / a2);
        prop_assume!(q.norm() > 1e-3);
        let p = &q / q.norm();
        let d = sigma_defect(&s2, &spec, &FieldSpec::conformal(&a), &p).unwrap();
        let v = spec.at(a2);
        prop_assert!((d - (v.b + a2 * v.c)).abs() < 1e-10 * (1.0 + d.abs()));
        prop_assert!(d > 0.0);
    }

    #[test]
    fn quadrature_weights_sum_to_volume(res in 12usize..40, n in 2usize..4) {
        let m = Manifold::sphere(n);
        let q = Quadrature::for_manifold(&m, res, 0).unwrap();
        prop_assert!((q.total_weight() - sphere_volume(n)).abs() < 1e-8 * sphere_volume(n));
        prop_assert!(q.weights.iter().all(|w| *w > 0.0));
    }

    #[test]
    fn projection_produces_unit_grids(seed in any::<u64>(), n in 8usize..24) {
        let m = Manifold::square_flat_torus();
        let mut rng = seeded(seed);
        let base = DiscreteField::random_unit(&m, n, 2, &mut rng).unwrap();
        prop_assert!(base.unit_defect() < 1e-12);
        let bumped = base.combine(&DiscreteField::from_fn(&m, n, |x, y| [0.3 * x.sin(), 0.2 * y.cos()]).unwrap(), 1.0);
        let mut projected = bumped.clone();
        if projected.project_unit().is_ok() {
            prop_assert!(projected.unit_defect() < 1e-12);
            prop_assert!(projected.unit_constrained);
        }
    }

    #[test]
    fn rescaled_sections_stay_unit(x in 0.0f64..6.28, y in 0.0f64..6.28, angle in 0.0f64..6.28, amp in -0.5f64..0.5) {
        let u = TorusFunction::sin_product(amp);
        let target = Manifold::conformal_torus(u.clone());
        let p = Vector::from_row_slice(&[x, y]);
        let sigma = FieldSpec::parallel([angle.cos(), angle.sin()]).value(&Manifold::square_flat_torus(), &p).unwrap();
        let rescaled = sigma * (-u.value(x, y)).exp();
        prop_assert!((target.norm_sq(&p, &rescaled) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn profile_derivatives_match_differences(k in 0.1f64..3.0, rate in -3.0f64..3.0, t in 0.0f64..3.0) {
        let h = 1e-5;
        for prof in [ScalarProfile::exp(k, rate), ScalarProfile::power_law(k, 1.0, 1.0, rate), ScalarProfile::exp(k, rate).prolonged(1.5)] {
            let fd = (prof.value(t + h) - prof.value(t - h)) / (2.0 * h);
            prop_assert!((fd - prof.derivative(t)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn even_quadratic_certificates_are_positive_for_valid_metrics(m in 0.0f64..3.0, r in 0.0f64..3.0, mu in 0.2f64..2.0) {
        let spec = KkMetricSpec::g_mr(m, r).unwrap();
        match obstruction_check(&ObstructionCase::Quadratic { n: 4, mu }, &[spec]) {
            CheckOutcome::Obstructed(c) => prop_assert!(c[0].margin > 0.0),
            CheckOutcome::Feasible => prop_assert!(false, "even spheres are never feasible"),
        }
    }

    #[test]
    fn parallel_fields_are_harmonic_when_a_is_constant(
        a in 0.1f64..3.0,
        rate in -2.0f64..2.0,
        c in 0.0f64..2.0,
        v in proptest::array::uniform2(-2.0f64..2.0),
    ) {
        let m = Manifold::square_flat_torus();
        let spec = KkMetricSpec::new(ScalarProfile::constant(a), ScalarProfile::exp(1.0, rate), ScalarProfile::constant(c));
        let p = Vector::from_row_slice(&[1.0, 2.0]);
        prop_assert!(tension(&m, &spec, &FieldSpec::parallel(v), &p).unwrap().norm_g < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn constructed_profiles_solve_their_odes(c in 0.0f64..0.5, rate in -1.0f64..0.0, lambda in 0.6f64..1.5) {
        for family in [Family::KillingOdd { p: 2, k: 1, lambda }, Family::Quadratic { n: 5, mu: lambda }] {
            let built = construct_b_from_c(&ProfileProblem::new(family.clone(), ScalarProfile::exp(c, rate))).unwrap();
            prop_assert!(built.ode_residual < 1e-8, "{}: {:e}", family.id(), built.ode_residual);
            prop_assert!(built.spec.validate().pass);
        }
    }
}
