use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use radial_compose::catalog::{
    catalog_list, coshc, entry, grosse_singular_pair, sinhc, CatalogError, CatalogName,
};
use radial_compose::ode::solve_regular;
use radial_compose::verify::catalog_residual;

#[test]
fn closed_forms_solve_their_equations() {
    let cases: &[(CatalogName, &[(&str, f64)])] = &[
        (CatalogName::RationalQuartic, &[("lambda", 1.0)]),
        (CatalogName::RationalQuartic, &[("lambda", 4.0)]),
        (CatalogName::InverseSquareShape, &[("lambda", 2.0)]),
        (CatalogName::InverseSquareShape, &[("lambda", -35.0)]),
        (CatalogName::Exponential, &[("lambda", 1.0)]),
        (CatalogName::Exponential, &[("lambda", -10.0)]),
        (CatalogName::SingularQuartic, &[("g", 1.0)]),
        (CatalogName::Coulomb, &[("alpha", 1.0)]),
        (CatalogName::Zero, &[]),
    ];
    for (name, params) in cases {
        let e = entry(*name, params).unwrap();
        let res = catalog_residual(&e);
        assert!(res.skipped.is_empty(), "{name} skipped {:?}", res.skipped);
        assert!(res.max <= 1e-6, "{name} {params:?}: {}", res.max);
    }
}

#[test]
fn quartic_value_at_two() {
    let e = entry(CatalogName::RationalQuartic, &[("lambda", 4.0), ("a", 1.0)]).unwrap();
    assert_abs_diff_eq!(e.phi_value(2.0), 1.5 * (4.0f64 / 3.0).sinh(), epsilon = 1e-14);
}

#[test]
fn regular_entries_have_unit_slope_at_origin() {
    for name in CatalogName::ALL {
        if name == CatalogName::SingularQuartic {
            continue;
        }
        let e = entry(name, &[]).unwrap();
        let (p, dp) = (e.phi)(0.0);
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(dp, 1.0, epsilon = 1e-12);
    }
}

#[test]
fn closed_forms_agree_with_integration() {
    for (name, params) in [
        (CatalogName::Exponential, [("lambda", -2.0)]),
        (CatalogName::Exponential, [("lambda", 3.0)]),
        (CatalogName::Coulomb, [("alpha", 0.5)]),
        (CatalogName::InverseSquareShape, [("lambda", -35.0)]),
    ] {
        let e = entry(name, &params).unwrap();
        let sol = solve_regular(&e.potential, 10.0, 1e-12).unwrap();
        for r in [0.01, 0.7, 2.5, 6.0, 9.5] {
            let exact = e.phi_value(r);
            assert!((sol.eval(r).0 - exact).abs() < 1e-8 * (1.0 + exact.abs()), "{name} r = {r}");
        }
    }
}

#[test]
fn listing_is_stable_and_filterable() {
    let all = catalog_list(None);
    assert_eq!(all.len(), 6);
    let names: Vec<_> = all.iter().map(|l| l.name).collect();
    assert_eq!(names, CatalogName::ALL.to_vec());
    for l in &all {
        assert!(l.formula.starts_with("V(r) ="), "{}", l.formula);
    }
    let singular = catalog_list(Some("singular"));
    assert_eq!(singular.len(), 1);
    assert_eq!(singular[0].name, CatalogName::SingularQuartic);
    assert!(catalog_list(Some("no_such_tag")).is_empty());
}

#[test]
fn names_round_trip() {
    for name in CatalogName::ALL {
        assert_eq!(name.as_str().parse::<CatalogName>().unwrap(), name);
    }
    assert!(matches!("yukawa".parse::<CatalogName>(), Err(CatalogError::UnknownName(_))));
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(matches!(
        entry(CatalogName::RationalQuartic, &[("a", -1.0)]),
        Err(CatalogError::Invalid { key: "a", .. })
    ));
    assert!(matches!(
        entry(CatalogName::SingularQuartic, &[("g", 0.0)]),
        Err(CatalogError::Invalid { .. })
    ));
    assert!(matches!(
        entry(CatalogName::Exponential, &[("nu", 1.0)]),
        Err(CatalogError::UnknownParameter { .. })
    ));
    assert!(grosse_singular_pair(-1.0).is_err());
}

#[test]
fn singular_pair_values() {
    let p = grosse_singular_pair(1.0).unwrap();
    assert_abs_diff_eq!(p.chi(10.0), (1.0f64 / 600.0).exp(), epsilon = 1e-15);
    let p6 = grosse_singular_pair(6.0).unwrap();
    assert_abs_diff_eq!(p6.chi(1.0), std::f64::consts::E, epsilon = 1e-15);
}

#[test]
fn singular_pair_limits() {
    let p = grosse_singular_pair(1.0).unwrap();
    // relative corrections are O(r²) near the origin and O(1/r) at infinity
    let r = 0.1;
    assert!((p.phi(r) / p.phi_near_origin(r) - 1.0).abs() < 0.05);
    let r = 200.0;
    assert!((p.phi(r) - p.phi_near_infinity(r)).abs() < 1e-2);
}

#[test]
fn zero_coupling_branch_is_continuous() {
    for s in [0.0, 0.3, 0.9] {
        assert_abs_diff_eq!(sinhc(0.0, s), s, epsilon = 1e-15);
        assert_abs_diff_eq!(coshc(0.0, s), 1.0, epsilon = 1e-15);
        for k2 in [1e-9, -1e-9] {
            assert_abs_diff_eq!(sinhc(k2, s), s, epsilon = 1e-9);
            assert_abs_diff_eq!(coshc(k2, s), 1.0, epsilon = 1e-9);
        }
    }
    let near = entry(CatalogName::RationalQuartic, &[("lambda", 1e-10)]).unwrap();
    let free = entry(CatalogName::RationalQuartic, &[("lambda", 0.0)]).unwrap();
    for r in [0.5, 5.0, 50.0] {
        assert_abs_diff_eq!(near.phi_value(r), free.phi_value(r), epsilon = 1e-8 * r);
        assert_abs_diff_eq!(free.phi_value(r), r, epsilon = 1e-12 * r);
    }
}

#[test]
fn predicted_node_counts() {
    let p = entry(CatalogName::InverseSquareShape, &[("lambda", -35.0)]).unwrap();
    assert_eq!(p.predicted_nodes(), Some(2));
    let p = entry(CatalogName::InverseSquareShape, &[("lambda", 2.0)]).unwrap();
    assert_eq!(p.predicted_nodes(), Some(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sinhc_matches_hyperbolic_definition(k2 in 0.01f64..9.0, s in 0.0f64..1.0) {
        let k = k2.sqrt();
        prop_assert!((sinhc(k2, s) - (k * s).sinh() / k).abs() < 1e-13);
        prop_assert!((sinhc(-k2, s) - (k * s).sin() / k).abs() < 1e-13);
        prop_assert!((coshc(-k2, s) - (k * s).cos()).abs() < 1e-13);
    }
}
