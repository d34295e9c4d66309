use approx::assert_relative_eq;
use kkharmonic::rng::{admissible_points, seeded};
use kkharmonic::tension::{
    identity_checks, residual_report, sigma_defect, tension_from_calculus, unit_section_residual, CalculusPath, Verdict,
};
use kkharmonic::{closed_form_oracle, tension, FieldSpec, KkMetricSpec, Manifold, ScalarProfile};

#[test]
fn hopf_unit_section_and_harmonic_map() {
    let m = Manifold::sphere(3);
    let hopf = FieldSpec::killing(&[1.0, 1.0]);
    let points = admissible_points(&m, &hopf, 40, &mut seeded(21));
    for p in &points {
        assert!(unit_section_residual(&m, &hopf, p).unwrap().norm() < 1e-12);
    }
    let r = residual_report(&m, &KkMetricSpec::sasaki(), &hopf, &points, CalculusPath::Analytic, 1e-8).unwrap();
    // under Sasaki τᵛ = −2ξ, so only the unit-section equation holds
    assert_eq!(r.verdict, Verdict::UnitHarmonicSection);
    let r = residual_report(&m, &KkMetricSpec::exponential(1.0, -1.0), &hopf, &points, CalculusPath::Stencil, 1e-4)
        .unwrap();
    assert_eq!(r.verdict, Verdict::HarmonicMap);
}

#[test]
fn analytic_and_oracle_tension_agree() {
    let m = Manifold::sphere(3);
    let spec = KkMetricSpec::cheeger_gromoll();
    let mut rng = seeded(22);
    for field in [
        FieldSpec::conformal(&[0.3, 0.1, -0.6, 0.4]),
        FieldSpec::killing(&[0.5, 1.5]),
        FieldSpec::quadratic(&[(1.0, 2), (0.2, 2)]),
    ] {
        for p in admissible_points(&m, &field, 50, &mut rng) {
            let a = tension(&m, &spec, &field, &p).unwrap();
            let o = tension_from_calculus(&m, &spec, &closed_form_oracle(&field, &m, &p).unwrap(), 1e-8).unwrap();
            assert!((&a.horizontal - &o.horizontal).norm() < 1e-9);
            assert!((&a.vertical - &o.vertical).norm() < 1e-9);
        }
    }
}

#[test]
fn scaling_the_metric_scales_only_the_norm() {
    let m = Manifold::sphere(2);
    let field = FieldSpec::conformal(&[0.2, 0.5, 0.7]);
    let base = KkMetricSpec::g_mr(1.0, 0.5).unwrap();
    let c = 3.5;
    let scaled = KkMetricSpec::new(
        ScalarProfile::constant(c),
        ScalarProfile::power_law(c, 1.0, 1.0, -1.0),
        ScalarProfile::power_law(0.5 * c, 1.0, 1.0, -1.0),
    );
    for p in admissible_points(&m, &field, 30, &mut seeded(23)) {
        let a = tension(&m, &base, &field, &p).unwrap();
        let b = tension(&m, &scaled, &field, &p).unwrap();
        assert!((&a.horizontal - &b.horizontal).norm() < 1e-12);
        assert!((&a.vertical - &b.vertical).norm() < 1e-12);
        assert_relative_eq!(b.norm_g, c.sqrt() * a.norm_g, max_relative = 1e-12);
    }
}

#[test]
fn parallel_fields_are_harmonic_for_constant_a() {
    let m = Manifold::square_flat_torus();
    let field = FieldSpec::parallel([0.4, -0.9]);
    for spec in [KkMetricSpec::sasaki(), KkMetricSpec::cheeger_gromoll(), KkMetricSpec::exponential(2.0, -0.7)] {
        for p in admissible_points(&m, &field, 10, &mut seeded(24)) {
            assert!(tension(&m, &spec, &field, &p).unwrap().norm_g < 1e-14);
        }
    }
}

#[test]
fn conformal_defect_sweep() {
    let m = Manifold::sphere(3);
    let a = [0.0, 0.0, 0.0, 1.3];
    let field = FieldSpec::conformal(&a);
    let a2: f64 = 1.69;
    let mut rng = seeded(25);
    for mm in [0.0, 0.5, 1.0, 2.0, 3.0] {
        for r in [0.0, 1.0] {
            let spec = KkMetricSpec::g_mr(mm, r).unwrap();
            let v = spec.at(a2);
            for _ in 0..5 {
                let q = kkharmonic::rng::gaussian_vector(&mut rng, 3);
                let q = &q / q.norm();
                let p = kkharmonic::Vector::from_row_slice(&[q[0], q[1], q[2], 0.0]);
                let d = sigma_defect(&m, &spec, &field, &p).unwrap();
                assert!((d - (v.b + a2 * v.c)).abs() < 1e-10);
                assert!(d > 0.0);
            }
        }
    }
}

#[test]
fn pointwise_identities() {
    let mut rng = seeded(26);
    let cases = [
        (Manifold::sphere(2), FieldSpec::conformal(&[0.1, 0.4, 0.9]), KkMetricSpec::cheeger_gromoll()),
        (Manifold::sphere(3), FieldSpec::killing(&[1.0, 0.4]), KkMetricSpec::sasaki()),
        (
            Manifold::conformal_torus(kkharmonic::geometry::TorusFunction::sin_product(0.3)),
            FieldSpec::parallel([1.0, 0.5]),
            KkMetricSpec::sasaki(),
        ),
    ];
    for (m, field, spec) in cases {
        for p in admissible_points(&m, &field, 20, &mut rng) {
            for r in identity_checks(&m, &spec, &field, &p).unwrap() {
                match (r.name.as_str(), r.value) {
                    ("bochner" | "horizontal_constant_curvature" | "surface", Some(v)) => {
                        assert!(v < 1e-5, "{} on {}: {v:e}", r.name, m.id())
                    }
                    _ => {}
                }
            }
        }
    }
}

#[test]
fn harmonic_section_satisfies_norm_identity() {
    // S⁵ quadratic field with its harmonic profile: the Laplacian of |σ|²/2
    // must follow from the metric alone
    let m = Manifold::sphere(5);
    let field = FieldSpec::quadratic_two(5, 1.0, 3);
    let spec = KkMetricSpec::exponential(1.0, -8.0);
    for p in admissible_points(&m, &field, 30, &mut seeded(27)) {
        let checks = identity_checks(&m, &spec, &field, &p).unwrap();
        let norm = checks.iter().find(|c| c.name == "section_norm").unwrap();
        assert!(norm.value.unwrap() < 1e-5, "{:?}", norm.value);
    }
}

#[test]
fn degenerate_metric_is_an_error() {
    let m = Manifold::sphere(2);
    let spec = KkMetricSpec::new(
        ScalarProfile::constant(1.0),
        ScalarProfile::linear(1.0, -2.0),
        ScalarProfile::constant(0.0),
    );
    let field = FieldSpec::conformal(&[0.0, 0.0, 1.0]);
    let p = kkharmonic::Vector::from_row_slice(&[1.0, 0.0, 0.0]);
    assert!(tension(&m, &spec, &field, &p).is_err());
}

#[test]
fn unit_verdict_needs_constant_norm() {
    // τᵛ is parallel to this field everywhere, but its norm varies
    let m = Manifold::sphere(4);
    let field = FieldSpec::quadratic_two(4, 1.0, 2);
    let points = admissible_points(&m, &field, 50, &mut seeded(28));
    let r = residual_report(&m, &KkMetricSpec::sasaki(), &field, &points, CalculusPath::Analytic, 1e-8).unwrap();
    assert!(r.unit.max < 1e-12);
    assert_eq!(r.verdict, Verdict::NotHarmonic);
}
