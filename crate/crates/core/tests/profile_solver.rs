use approx::assert_relative_eq;
use kkharmonic::profile::Provenance;
use kkharmonic::rng::{admissible_points, seeded};
use kkharmonic::solver::{
    closed_form_b, construct_b_from_c, hopf_power_law, obstruction_check, ode_residual, profile_csv,
    unequal_speed_enlarged, CheckOutcome, Family, ObstructionCase, ProfileProblem, Solution,
};
use kkharmonic::tension::constant_norm_condition;
use kkharmonic::{tension, Error, FieldSpec, KkMetricSpec, Manifold, ScalarProfile};

fn max_vertical(family: &Family, spec: &KkMetricSpec, samples: usize) -> f64 {
    let m = family.manifold();
    let field = family.field();
    admissible_points(&m, &field, samples, &mut seeded(31))
        .iter()
        .map(|p| tension(&m, spec, &field, p).unwrap().vertical_norm)
        .fold(0.0, f64::max)
}

#[test]
fn constructed_profiles_make_fields_harmonic() {
    let cases = [
        (Family::Quadratic { n: 5, mu: 1.0 }, ScalarProfile::exp(0.2, -1.0)),
        (Family::Quadratic { n: 7, mu: 0.8 }, ScalarProfile::constant(0.1)),
        (Family::KillingEven { p: 2, k: 0, lambda: 1.0 }, ScalarProfile::exp(0.3, -0.5)),
        (Family::KillingOdd { p: 2, k: 1, lambda: 1.2 }, ScalarProfile::constant(0.2)),
        (Family::KillingOdd { p: 1, k: 0, lambda: 1.0 }, ScalarProfile::constant(0.5)),
    ];
    for (family, c) in cases {
        let built = construct_b_from_c(&ProfileProblem::new(family.clone(), c)).unwrap();
        assert!(built.ode_residual < 1e-8, "{}: {:e}", family.id(), built.ode_residual);
        assert_eq!(built.spec.b.provenance, Provenance::OdeConstructed);
        assert!(built.spec.validate().pass);
        let v = max_vertical(&family, &built.spec, 40);
        assert!(v < 1e-6, "{}: {v:e}", family.id());
    }
}

#[test]
fn enlarged_constructions() {
    for family in [
        Family::EnlargedConformal { n: 2, a_norm_sq: 1.0 },
        Family::EnlargedConformal { n: 3, a_norm_sq: 0.5 },
        Family::EnlargedKilling { p: 2, lambda: 1.0 },
    ] {
        let built = construct_b_from_c(&ProfileProblem::new(family.clone(), ScalarProfile::constant(0.1))).unwrap();
        assert!(built.ode_residual < 1e-8);
        assert_relative_eq!(built.spec.a.value(0.3), built.spec.b.value(0.3) + 1.0, epsilon = 1e-14);
        assert!(max_vertical(&family, &built.spec, 40) < 1e-6, "{}", family.id());
    }
}

#[test]
fn enlarged_killing_on_s2_is_a_harmonic_map() {
    let family = Family::EnlargedKilling { p: 1, lambda: 1.0 };
    let spec = closed_form_b(&family, 1.0, 1.0).unwrap().solved().unwrap();
    let m = family.manifold();
    let field = family.field();
    for p in admissible_points(&m, &field, 40, &mut seeded(32)) {
        assert!(tension(&m, &spec, &field, &p).unwrap().vertical_norm < 1e-10);
    }
}

#[test]
fn unequal_speeds_with_linear_a() {
    let thetas = [1.0, 0.6];
    let spec = unequal_speed_enlarged(2, &thetas, 1.0, 2.0).unwrap();
    let m = Manifold::sphere(4);
    let field = FieldSpec::killing(&thetas);
    for p in admissible_points(&m, &field, 40, &mut seeded(33)) {
        assert!(tension(&m, &spec, &field, &p).unwrap().vertical_norm < 1e-10);
    }
    assert!(unequal_speed_enlarged(2, &thetas, 1.0, 0.5).is_err());
}

#[test]
fn construction_failure_reports_the_crossing() {
    let problem = ProfileProblem::new(Family::KillingEven { p: 2, k: 0, lambda: 1.0 }, ScalarProfile::constant(-2.0));
    match construct_b_from_c(&problem) {
        Err(Error::ConstructionFailed { t, value }) => {
            assert!(t > 0.0 && t <= 1.0);
            assert!(value <= 0.0);
        }
        other => panic!("expected a construction failure, got {other:?}"),
    }
}

#[test]
fn obstructed_families_refuse_construction() {
    let problem = ProfileProblem::new(Family::Quadratic { n: 3, mu: 1.0 }, ScalarProfile::constant(0.0));
    assert!(matches!(construct_b_from_c(&problem), Err(Error::InvalidInput(_))));
    let problem = ProfileProblem::new(Family::KillingOdd { p: 2, k: 2, lambda: 1.0 }, ScalarProfile::constant(0.0));
    assert!(construct_b_from_c(&problem).is_err());
}

#[test]
fn obstruction_certificates() {
    let candidates = [KkMetricSpec::sasaki(), KkMetricSpec::cheeger_gromoll()];
    let CheckOutcome::Obstructed(certs) = obstruction_check(&ObstructionCase::Quadratic { n: 4, mu: 2.0 }, &candidates)
    else {
        panic!("even spheres are obstructed")
    };
    assert_eq!(certs.len(), 2);
    assert_eq!(certs[0].witness_t, Some(1.0));
    assert_relative_eq!(certs[1].witness_value, 0.5 + 0.5, epsilon = 1e-15);

    let CheckOutcome::Obstructed(certs) =
        obstruction_check(&ObstructionCase::Conformal { n: 3, a_norm_sq: 1.0 }, &[])
    else {
        panic!()
    };
    assert_eq!(certs[0].witness_value, 1.0);

    let CheckOutcome::Obstructed(certs) =
        obstruction_check(&ObstructionCase::KillingOdd { p: 2, thetas: vec![1.0, 2.0] }, &[])
    else {
        panic!()
    };
    // k = 1: −kΣθ² = −5
    assert_eq!(certs[0].witness_value, -5.0);

    let CheckOutcome::Obstructed(certs) =
        obstruction_check(&ObstructionCase::KillingOdd { p: 2, thetas: vec![1.0] }, &[])
    else {
        panic!("a single plane on S5 leaves a maximal axis")
    };
    assert_eq!(certs[0].witness_t, Some(1.0));

    assert_eq!(
        obstruction_check(&ObstructionCase::Quadratic { n: 7, mu: 1.0 }, &[]),
        CheckOutcome::Feasible
    );
    assert_eq!(
        obstruction_check(&ObstructionCase::KillingOdd { p: 2, thetas: vec![1.0, 1.0] }, &[]),
        CheckOutcome::Feasible
    );
}

#[test]
fn closed_form_on_inadmissible_parameters() {
    match closed_form_b(&Family::Quadratic { n: 3, mu: 1.0 }, 1.0, 1.0).unwrap() {
        Solution::Obstructed(o) => assert!(o.margin > 1e-6),
        Solution::Solved(_) => panic!(),
    }
    assert!(closed_form_b(&Family::KillingEven { p: 2, k: 2, lambda: 1.0 }, 1.0, 1.0).is_err());
    assert!(closed_form_b(&Family::Quadratic { n: 5, mu: 1.0 }, -1.0, 1.0).is_err());
}

#[test]
fn hopf_profiles_satisfy_the_constant_norm_condition() {
    for lambda in [0.5, 1.0, 2.0] {
        let spec = hopf_power_law(1, lambda, 1.0);
        assert!(constant_norm_condition(&spec.b, lambda).abs() < 1e-12);
        let family = Family::KillingOdd { p: 1, k: 0, lambda };
        assert!(max_vertical(&family, &spec, 20) < 1e-10);
        let exp = closed_form_b(&family, 2.0, 1.0).unwrap().solved().unwrap();
        assert!(constant_norm_condition(&exp.b, lambda).abs() < 1e-12);
        assert!(ode_residual(&family, &exp) < 1e-10);
    }
}

#[test]
fn csv_export_is_plot_ready() {
    let spec = closed_form_b(&Family::Quadratic { n: 7, mu: 1.0 }, 1.0, 1.0).unwrap().solved().unwrap();
    let csv = profile_csv(&spec.b, spec.t_max, 10);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    for r in &rows {
        assert_eq!(r.len(), 3);
        assert!(r[1] > 0.0);
        assert_relative_eq!(r[2], spec.b.derivative(r[0]), max_relative = 1e-15);
    }
}
