//! Executable checks on catalog entries and composition records.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::CatalogEntry;
use crate::ode::{bargmann_bound, count_nodes_fn};
use crate::potential::{InfinityClass, OriginClass, RadialPotential};
use crate::quadrature::{integrability_report, IntegrabilityReport};
use crate::transform::{CompositionRecord, Engine, HigherEllIntegrand};
use crate::Func;

/// Thresholds for the individual checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub residual: f64,
    pub wronskian: f64,
    pub roundtrip: f64,
    pub slope: f64,
    pub formula: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-6,
            wronskian: 1e-8,
            roundtrip: 1e-9,
            slope: 1e-3,
            formula: 1e-10,
        }
    }
}

impl Tolerances {
    /// Residual tolerance relaxed by one order of magnitude per level below
    /// the first.
    pub fn at_depth(self, depth: usize) -> Self {
        Self {
            residual: self.residual * 10f64.powi(depth.saturating_sub(1) as i32),
            ..self
        }
    }
}

/// Pointwise relative residual |φ'' − Vφ|/(1 + |Vφ|) with φ'' from the
/// five-point stencil at h = min(1e-3, 0.05r).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualProfile {
    pub max: f64,
    /// (r, residual) for every evaluated point.
    pub points: Vec<(f64, f64)>,
    /// Grid points where φ or V was not finite on the stencil.
    pub skipped: Vec<f64>,
}

pub fn stencil_step(r: f64) -> f64 {
    (1e-3f64).min(0.05 * r)
}

pub fn residual(phi: &dyn Fn(f64) -> f64, v: &dyn Fn(f64) -> f64, grid: &[f64]) -> ResidualProfile {
    let mut points = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    let mut max = 0.0f64;
    for &r in grid {
        let h = stencil_step(r);
        let f = [
            phi(r - 2.0 * h),
            phi(r - h),
            phi(r),
            phi(r + h),
            phi(r + 2.0 * h),
        ];
        let vr = v(r);
        if f.iter().any(|x| !x.is_finite()) || !vr.is_finite() {
            skipped.push(r);
            continue;
        }
        let d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
        let vp = vr * f[2];
        let res = (d2 - vp).abs() / (1.0 + vp.abs());
        max = max.max(res);
        points.push((r, res));
    }
    ResidualProfile { max, points, skipped }
}

/// Log-spaced points on [lo, 1] and linear points on [1, hi].
pub fn check_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    if lo < 1.0 {
        let decades = (1.0 / lo).log10();
        let n = (decades * 20.0).ceil().max(1.0) as usize;
        for i in 0..n {
            grid.push(lo * 10f64.powf(decades * i as f64 / n as f64));
        }
    }
    let first = lo.max(1.0);
    let n = ((hi - first) / 0.1).round().max(1.0) as usize;
    for i in 0..=n {
        grid.push(first + (hi - first) * i as f64 / n as f64);
    }
    grid
}

/// Residual of a catalog entry's closed form on its documented domain.
pub fn catalog_residual(entry: &CatalogEntry) -> ResidualProfile {
    let (lo, hi) = entry.residual_domain;
    let phi = entry.phi.clone();
    let v = entry.potential.clone();
    residual(&|r| phi(r).0, &|r| v.eval(r), &check_grid(lo, hi))
}

/// Outer radius of node-count scans.
pub const NODE_SCAN_END: f64 = 40.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedIntegrability {
    pub slot: String,
    pub report: IntegrabilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub engine: Engine,
    pub depth: usize,
    pub tolerances: Tolerances,
    pub residual_domain: (f64, f64),
    pub residual_max: f64,
    pub residual_grid: Vec<(f64, f64)>,
    pub residual_skipped: Vec<f64>,
    pub wronskian_drift: Option<f64>,
    pub node_count_inner: Option<usize>,
    pub node_count_composed: Option<usize>,
    pub bargmann_inner: Option<f64>,
    pub map_min_derivative: f64,
    pub map_roundtrip_max: f64,
    pub map_slope_vs_a2: Option<f64>,
    /// Spread of x(r) − r over the outer part of the table (exponential V₀ only).
    pub map_offset_spread: Option<f64>,
    pub formula_max_deviation: f64,
    /// sup_r |rW₀(r)|.
    pub constant_c: Option<f64>,
    pub higher_ell_integrand: Option<HigherEllIntegrand>,
    pub integrability: Vec<NamedIntegrability>,
    pub checks: BTreeMap<String, bool>,
    pub passed: bool,
    pub notes: Vec<String>,
}

pub const REPORT_SCHEMA: &str = "radial-compose/report/v1";

/// Run every applicable check on `record`.
pub fn check_composition(record: &CompositionRecord, tol: Tolerances) -> VerificationReport {
    let mut checks = BTreeMap::new();
    let mut notes = record.notes.clone();
    let (lo, hi) = record.residual_domain;
    let grid = check_grid(lo, hi);

    let phi = record.composed_solution.clone();
    let vc = record.composed_potential.clone();
    let profile = residual(&|r| phi(r).0, &|r| vc.eval(r), &grid);
    checks.insert("residual".into(), profile.max <= tol.residual);
    if !profile.skipped.is_empty() {
        notes.push(format!("{} residual points skipped (non-finite stencil)", profile.skipped.len()));
    }

    let wronskian_drift = record.v0_pair.as_ref().map(|p| p.wronskian_drift());
    if let Some(d) = wronskian_drift {
        checks.insert("wronskian".into(), d <= tol.wronskian);
    }

    // nodes of the composed solution and of ψ over the matching x range
    let scan = check_grid(lo.min(1e-3), NODE_SCAN_END);
    let composed_nodes = count_nodes_fn(&|r| phi(r).0, &scan);
    let x_scan: Vec<f64> = scan.iter().map(|&r| record.map.x(r)).filter(|x| *x > 0.0).collect();
    let inner = record.inner.psi.clone();
    let inner_nodes = count_nodes_fn(&|x| inner(x).0, &x_scan);
    let node_count_composed = composed_nodes.as_ref().ok().copied();
    let node_count_inner = inner_nodes.as_ref().ok().copied();
    for (what, res) in [("composed", &composed_nodes), ("inner", &inner_nodes)] {
        if let Err(e) = res {
            notes.push(format!("{what} node count: {e}"));
        }
    }
    checks.insert(
        "node_preservation".into(),
        node_count_composed.is_some() && node_count_composed == node_count_inner,
    );

    let bargmann_inner = bargmann_bound(&record.inner.potential).ok();
    match (bargmann_inner, node_count_inner) {
        (Some(b), Some(n)) => {
            checks.insert("bargmann".into(), n as f64 <= b);
        }
        _ => notes.push("Bargmann bound not applicable to the inner potential".into()),
    }

    let map_min_derivative = grid.iter().map(|&r| record.map.dx(r)).fold(f64::INFINITY, f64::min);
    checks.insert("map_monotone".into(), map_min_derivative > 0.0);
    let map_roundtrip_max = record.map.roundtrip_max(&grid);
    checks.insert("map_roundtrip".into(), map_roundtrip_max <= tol.roundtrip);

    let map_slope_vs_a2 = match (record.engine, record.v0_pair.as_ref()) {
        (Engine::Theorem1 | Engine::Theorem2, Some(pair)) => {
            let a2 = pair.a * pair.a;
            let end = pair.grid[pair.grid.len() - 1];
            let err = [0.5 * end, end]
                .iter()
                .map(|&r| (record.map.dx(r) - a2).abs() / a2)
                .fold(0.0, f64::max);
            checks.insert("map_slope".into(), err <= tol.slope);
            Some(err)
        }
        _ => None,
    };

    let map_offset_spread = match (record.engine, record.constituent("V0")) {
        (Engine::Grosse, Some(v0)) if v0.infinity() == InfinityClass::Exponential => {
            let offsets: Vec<f64> = [20.0, 30.0, 40.0].iter().map(|&r| record.map.x(r) - r).collect();
            let spread = offsets.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
                - offsets.iter().fold(f64::INFINITY, |m, &v| m.min(v));
            checks.insert("map_offset_bounded".into(), spread < 1e-6);
            Some(spread)
        }
        _ => None,
    };

    let formula_max_deviation = grid
        .iter()
        .map(|&r| {
            let stored = phi(r).0;
            (record.formula_solution(r) - stored).abs() / (1.0 + stored.abs())
        })
        .fold(0.0, f64::max);
    checks.insert("solution_formula".into(), formula_max_deviation <= tol.formula);

    let constant_c = match (&record.kernels, record.engine) {
        (Some(k), Engine::Grosse) => Some(
            k.table()
                .nodes()
                .iter()
                .zip(k.table().w_nodes())
                .map(|(r, w)| (r * w).abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };

    if record.engine == Engine::HigherEll {
        checks.insert(
            "higher_ell_variant".into(),
            record.higher_ell_checks.iter().any(|(_, res)| *res <= crate::transform::VARIANT_TOL),
        );
    }

    let mut integrability = Vec::new();
    for c in &record.constituents {
        if let Ok(report) = integrability_report(|r| c.potential.eval(r)) {
            integrability.push(NamedIntegrability {
                slot: c.slot.to_string(),
                report,
            });
        }
    }

    let passed = checks.values().all(|&ok| ok);
    VerificationReport {
        schema: REPORT_SCHEMA.into(),
        engine: record.engine,
        depth: record.depth,
        tolerances: tol,
        residual_domain: record.residual_domain,
        residual_max: profile.max,
        residual_grid: profile.points,
        residual_skipped: profile.skipped,
        wronskian_drift,
        node_count_inner,
        node_count_composed,
        bargmann_inner,
        map_min_derivative,
        map_roundtrip_max,
        map_slope_vs_a2,
        map_offset_spread,
        formula_max_deviation,
        constant_c,
        higher_ell_integrand: record.higher_ell_integrand,
        integrability,
        checks,
        passed,
        notes,
    }
}

/// Residual of the stored solution against the composed potential plus
/// `1e-2·e^{-r}`. A working harness reports this well above tolerance.
pub fn perturbed_potential_residual(record: &CompositionRecord) -> f64 {
    let delta: Func = Arc::new(|r: f64| 1e-2 * (-r).exp());
    let v = record.composed_potential.perturbed(delta);
    let phi = record.composed_solution.clone();
    let (lo, hi) = record.residual_domain;
    residual(&|r| phi(r).0, &|r| v.eval(r), &check_grid(lo, hi)).max
}

/// Residual of φ + 1e-3·r² against V.
pub fn corrupted_solution_residual(phi: &dyn Fn(f64) -> f64, v: &RadialPotential, domain: (f64, f64)) -> f64 {
    residual(&|r| phi(r) + 1e-3 * r * r, &|r| v.eval(r), &check_grid(domain.0, domain.1)).max
}

/// Seeding radius below which checks on singular potentials are skipped.
pub fn exclusion_radius(v: &RadialPotential) -> Option<f64> {
    match v.origin() {
        OriginClass::SingularRepulsive { .. } => Some(crate::ode::seed(v).0),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_is_exact_for_linear_functions() {
        let p = residual(&|r| r, &|_| 0.0, &check_grid(0.01, 20.0));
        assert!(p.max < 1e-7, "{}", p.max);
    }

    #[test]
    fn corrupted_free_solution_fails() {
        let v = RadialPotential::zero();
        let res = corrupted_solution_residual(&|r| r, &v, (0.01, 20.0));
        assert!(res > 1e-4);
    }

    #[test]
    fn non_finite_points_are_skipped() {
        let p = residual(&|r| if r < 0.1 { f64::NAN } else { r }, &|_| 0.0, &[0.05, 0.5]);
        assert_eq!(p.skipped, vec![0.05]);
        assert_eq!(p.points.len(), 1);
    }
}
