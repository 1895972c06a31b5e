use std::sync::Arc;

use approx::assert_abs_diff_eq;
use radial_compose::catalog::{entry, grosse_singular_pair, CatalogEntry, CatalogName};
use radial_compose::ode::{count_nodes_fn, standard_grid};
use radial_compose::potential::RadialPotential;
use radial_compose::transform::{
    grosse_auxiliary_phi, grosse_compose, grosse_kernels, grosse_tilde, higher_ell_compose, iterate, pair_for,
    theorem1_compose, theorem2_compose, ChiNormalization, CompositionRecord, Engine, InnerSolution, TransformError,
};
use radial_compose::verify::{check_composition, perturbed_potential_residual, Tolerances};

fn cat(name: CatalogName, params: &[(&str, f64)]) -> CatalogEntry {
    entry(name, params).unwrap()
}

fn exp_pot(lambda: f64) -> RadialPotential {
    cat(CatalogName::Exponential, &[("lambda", lambda)]).potential
}

fn inner(name: CatalogName, params: &[(&str, f64)]) -> InnerSolution {
    InnerSolution::from_entry(&cat(name, params))
}

/// Inner problem with two nodes.
fn two_node_inner() -> InnerSolution {
    inner(CatalogName::InverseSquareShape, &[("lambda", -35.0)])
}

fn theorem1(v0: &CatalogEntry, inner: InnerSolution) -> CompositionRecord {
    let pair = pair_for(&v0.potential, Some(v0.phi.clone()), 1e-12).unwrap();
    theorem1_compose(&v0.potential, Arc::new(pair), inner).unwrap()
}

fn theorem2(v0: &CatalogEntry, v1: &RadialPotential, inner: InnerSolution) -> CompositionRecord {
    let pair = pair_for(&v0.potential, Some(v0.phi.clone()), 1e-12).unwrap();
    theorem2_compose(&v0.potential, Arc::new(pair), v1, inner).unwrap()
}

fn sample() -> Vec<f64> {
    (1..=200).map(|i| 0.1 * i as f64).collect()
}

/// Largest relative gap between two records' potentials and solutions.
fn record_gap(a: &CompositionRecord, b: &CompositionRecord) -> f64 {
    sample()
        .into_iter()
        .map(|r| {
            let dv = (a.potential(r) - b.potential(r)).abs() / (1.0 + b.potential(r).abs());
            let dp = (a.phi(r) - b.phi(r)).abs() / (1.0 + b.phi(r).abs());
            dv.max(dp)
        })
        .fold(0.0, f64::max)
}

#[test]
fn exponential_kernels_are_closed_form() {
    // W₀ = U₀ = −e^{-r} for V₀ = e^{-r}
    let k = grosse_kernels(&exp_pot(1.0)).unwrap();
    for r in [1e-3f64, 0.1, 1.0, 4.0, 12.0, 30.0] {
        let exact = -(-r).exp();
        assert_abs_diff_eq!(k.w(r), exact, epsilon = 1e-10);
        assert_abs_diff_eq!(k.u(r), exact, epsilon = 1e-10);
        assert_abs_diff_eq!(k.u_direct(r), exact, epsilon = 1e-10);
    }
}

#[test]
fn tilde_potential_is_attractive_and_map_inverts() {
    for lambda in [1.0, -0.5] {
        let (tilde, map) = grosse_tilde(&exp_pot(lambda)).unwrap();
        for i in 0..100 {
            let x = 0.01 + 0.2 * i as f64;
            assert!(tilde.eval(x) <= 0.0, "x = {x}");
        }
        let grid = standard_grid(1e-3, 30.0);
        assert!(map.roundtrip_max(&grid) <= 1e-9, "{}", map.roundtrip_max(&grid));
    }
}

#[test]
fn singular_kernels_give_closed_form_chi() {
    let v0 = cat(CatalogName::SingularQuartic, &[("g", 1.0)]).potential;
    let k = grosse_kernels(&v0).unwrap();
    let pair = grosse_singular_pair(1.0).unwrap();
    for i in 0..=99 {
        let r = 0.2 + 0.198 * i as f64;
        let chi = (-k.u(r)).exp();
        assert!((chi / pair.chi(r) - 1.0).abs() < 1e-9, "r = {r}");
    }
    let (phi0, norm) = grosse_auxiliary_phi(&v0).unwrap();
    assert_eq!(norm, ChiNormalization::UnitAtInfinity);
    for r in [0.3, 1.0, 5.0] {
        assert!((phi0(r) / pair.phi(r) - 1.0).abs() < 1e-8, "r = {r}");
    }
}

#[test]
fn singular_theorem1_map_value() {
    // x = φ₀/χ₀ with φ₀ = re^{-1/r}, χ₀ = r sinh(1/r)
    let rec = theorem1(&cat(CatalogName::SingularQuartic, &[]), inner(CatalogName::Zero, &[]));
    let expected = (-1.0f64).exp() / 1.0f64.sinh();
    assert_abs_diff_eq!(rec.map.x(1.0), expected, epsilon = 1e-10);
    assert_abs_diff_eq!(expected, 0.3130, epsilon = 1e-4);
}

#[test]
fn theorem2_without_v0_is_grosse() {
    let v1 = exp_pot(1.0);
    let a = theorem2(&cat(CatalogName::Zero, &[]), &v1, two_node_inner());
    let b = grosse_compose(&v1, two_node_inner()).unwrap();
    assert!(record_gap(&a, &b) <= 1e-9, "{}", record_gap(&a, &b));
}

#[test]
fn theorem2_without_v1_is_theorem1() {
    let v0 = cat(CatalogName::RationalQuartic, &[("lambda", 1.0)]);
    let a = theorem2(&v0, &RadialPotential::zero(), two_node_inner());
    let b = theorem1(&v0, two_node_inner());
    assert!(record_gap(&a, &b) <= 1e-9, "{}", record_gap(&a, &b));
}

#[test]
fn higher_ell_zero_is_grosse() {
    let v0 = exp_pot(1.0);
    let a = higher_ell_compose(&v0, two_node_inner(), 0).unwrap();
    let b = grosse_compose(&v0, two_node_inner()).unwrap();
    assert!(record_gap(&a, &b) <= 1e-9, "{}", record_gap(&a, &b));
}

#[test]
fn higher_ell_free_map_is_cubic() {
    let rec = higher_ell_compose(&RadialPotential::zero(), inner(CatalogName::Zero, &[]), 1).unwrap();
    for r in [0.1, 1.0, 3.0, 10.0] {
        let exact = r * r * r / 3.0;
        assert!((rec.map.x(r) - exact).abs() <= 1e-10 * (1.0 + exact), "r = {r}");
    }
}

#[test]
fn engines_preserve_node_count() {
    let records = vec![
        theorem1(&cat(CatalogName::RationalQuartic, &[("lambda", 1.0)]), two_node_inner()),
        grosse_compose(&exp_pot(1.0), two_node_inner()).unwrap(),
        grosse_compose(&exp_pot(-0.5), two_node_inner()).unwrap(),
        theorem2(&cat(CatalogName::Exponential, &[("lambda", 1.0)]), &cat(CatalogName::RationalQuartic, &[]).potential, two_node_inner()),
        higher_ell_compose(&exp_pot(1.0), two_node_inner(), 1).unwrap(),
    ];
    for rec in &records {
        let report = check_composition(rec, Tolerances::default());
        assert_eq!(report.node_count_inner, Some(2), "{}", rec.engine);
        assert_eq!(report.node_count_composed, Some(2), "{}", rec.engine);
        assert!(report.passed, "{} {:?}", rec.engine, report.checks);
    }
}

#[test]
fn auxiliary_solution_is_nodeless() {
    let grid = standard_grid(1e-3, 40.0);
    for lambda in [-0.5, 1.0] {
        let (phi0, _) = grosse_auxiliary_phi(&exp_pot(lambda)).unwrap();
        assert_eq!(count_nodes_fn(&|r| phi0(r), &grid).unwrap(), 0, "λ = {lambda}");
    }
}

#[test]
fn exponential_grosse_constant() {
    // sup |rW₀| = sup re^{-r} = 1/e
    let rec = grosse_compose(&exp_pot(1.0), two_node_inner()).unwrap();
    let report = check_composition(&rec, Tolerances::default());
    assert_abs_diff_eq!(report.constant_c.unwrap(), (-1.0f64).exp(), epsilon = 1e-6);
}

#[test]
fn perturbed_potential_is_detected() {
    let rec = grosse_compose(&exp_pot(1.0), two_node_inner()).unwrap();
    assert!(perturbed_potential_residual(&rec) > 1e-4);
}

#[test]
fn grosse_iterates_three_levels() {
    let first = grosse_compose(&exp_pot(1.0), two_node_inner()).unwrap();
    let chain = iterate(first, 3, Tolerances::default()).unwrap();
    assert_eq!(chain.records.len(), 3);
    for (i, rep) in chain.reports.iter().enumerate() {
        assert_eq!(rep.depth, i + 1);
        assert!(rep.passed, "level {} {:?}", i + 1, rep.checks);
        assert_eq!(rep.node_count_composed, Some(2), "level {}", i + 1);
    }
}

#[test]
fn higher_ell_is_not_iterable() {
    let first = higher_ell_compose(&exp_pot(1.0), two_node_inner(), 1).unwrap();
    assert_eq!(first.engine, Engine::HigherEll);
    assert!(matches!(
        iterate(first, 2, Tolerances::default()),
        Err(TransformError::NotIterable(Engine::HigherEll))
    ));
}

#[test]
fn long_range_kernel_source_is_refused() {
    let coulomb = cat(CatalogName::Coulomb, &[]).potential;
    assert!(matches!(grosse_kernels(&coulomb), Err(TransformError::Precondition { .. })));
}

#[test]
fn bound_state_v0_is_refused() {
    let v0 = exp_pot(-3.0);
    assert!(matches!(pair_for(&v0, None, 1e-10), Err(TransformError::BoundStates { .. })));
}

#[test]
fn theorem1_map_slope_approaches_a_squared() {
    let v0 = cat(CatalogName::RationalQuartic, &[("lambda", 4.0), ("a", 1.0)]);
    let rec = theorem1(&v0, inner(CatalogName::InverseSquareShape, &[("lambda", 2.0)]));
    let pair = rec.v0_pair.clone().unwrap();
    let a2 = pair.a * pair.a;
    let end = *pair.grid.last().unwrap();
    assert!((rec.map.dx(end) - a2).abs() / a2 <= 1e-4);
}

#[test]
fn theorem1_identity_composition() {
    let rec = theorem1(&cat(CatalogName::Zero, &[]), inner(CatalogName::RationalQuartic, &[("lambda", 4.0)]));
    let quartic = cat(CatalogName::RationalQuartic, &[("lambda", 4.0)]);
    for r in [0.01, 1.0, 7.0, 19.0] {
        assert_abs_diff_eq!(rec.map.x(r), r, epsilon = 1e-10 * (1.0 + r));
        assert_abs_diff_eq!(rec.phi(r), quartic.phi_value(r), epsilon = 1e-9 * (1.0 + r));
    }
    let report = check_composition(&rec, Tolerances::default());
    assert!(report.passed, "{:?}", report.checks);
}

#[test]
fn theorem2_full_example() {
    let v0 = cat(CatalogName::RationalQuartic, &[("lambda", 4.0), ("a", 1.0)]);
    let rec = theorem2(&v0, &exp_pot(1.0), inner(CatalogName::InverseSquareShape, &[("lambda", 2.0)]));
    let report = check_composition(&rec, Tolerances::default());
    assert!(report.passed, "{:?}", report.checks);
    assert!(report.residual_max <= 1e-6);
    assert_eq!(report.node_count_composed, Some(0));
    assert!(rec.phi(0.0).abs() < 1e-12);
}

#[test]
fn grosse_with_repulsive_inner_has_no_nodes() {
    let rec = grosse_compose(&exp_pot(1.0), inner(CatalogName::RationalQuartic, &[("lambda", 1.0)])).unwrap();
    let report = check_composition(&rec, Tolerances::default());
    assert!(report.passed, "{:?}", report.checks);
    assert_eq!(report.node_count_composed, Some(0));
}

#[test]
fn theorem1_iterates_twice() {
    let v0 = cat(CatalogName::RationalQuartic, &[("lambda", 4.0)]);
    let first = theorem1(&v0, inner(CatalogName::InverseSquareShape, &[("lambda", 2.0)]));
    let chain = iterate(first, 2, Tolerances::default()).unwrap();
    assert!(chain.reports[1].residual_max <= 1e-5, "{}", chain.reports[1].residual_max);
}
