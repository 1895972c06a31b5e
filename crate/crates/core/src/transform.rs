//! Composition engines.
//!
//! Every engine builds a new potential whose regular solution has the form
//! φ(r) = c(r)·ψ(x(r)), where ψ solves ψ'' = V_in(x)ψ for a known inner
//! potential and x' = c⁻². The engines differ in the factor c:
//!
//! | engine       | c(r)                 | kernel source g      | weight y'  |
//! |--------------|----------------------|----------------------|------------|
//! | `Theorem1`   | χ₀                   | none                 | 1/χ₀²      |
//! | `Grosse`     | e^{-U₀}              | V₀                   | 1          |
//! | `Theorem2`   | χ₀e^{-U₁}            | V₁χ₀²                | 1/χ₀²      |
//! | `HigherEll`  | r^{-ℓ}e^{-U_ℓ}       | V₀t^{-2ℓ}            | t^{2ℓ}     |
//!
//! with W(r) = −∫_r^∞ g and U(r) = ∫_r^∞ W y'.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{make_entry, CatalogEntry, CatalogError};
use crate::interp::{invert_increasing, InterpError, MonotoneCubic, PanelFn};
use crate::ode::{default_r_max, seed, OdeError, SolutionPair};
use crate::potential::{InfinityClass, OriginClass, RadialPotential};
use crate::quadrature::{integrability_report, integrate, tail_integral, Decay, QuadError};
use crate::{DiffFunc, Func};

const KERNEL_TOL: f64 = 1e-14;
const TABLE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Theorem1,
    Grosse,
    Theorem2,
    HigherEll,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Theorem1 => "theorem1",
            Engine::Grosse => "grosse",
            Engine::Theorem2 => "theorem2",
            Engine::HigherEll => "higher_ell",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("precondition `{condition}` fails for {slot}: {detail}")]
    Precondition {
        slot: &'static str,
        condition: &'static str,
        detail: String,
    },
    #[error("{slot} sustains bound states: {source}")]
    BoundStates { slot: &'static str, source: OdeError },
    #[error("{0}")]
    Ode(#[from] OdeError),
    #[error("{0}")]
    Quadrature(#[from] QuadError),
    #[error("{0}")]
    Interp(#[from] InterpError),
    #[error("{0}")]
    Catalog(#[from] CatalogError),
    #[error("kernel W diverges for ℓ = {ell}: {detail}")]
    DivergentKernel { ell: u32, detail: String },
    #[error("iteration level {level} failed: {detail}")]
    Iteration { level: usize, detail: String },
    #[error("{0} records cannot be iterated")]
    NotIterable(Engine),
}

/// Smallest radius used for tables built on a potential.
pub fn table_start(origin: OriginClass) -> f64 {
    match origin {
        OriginClass::SingularRepulsive { .. } => 0.5 * seed_radius(origin),
        _ => 1e-6,
    }
}

fn seed_radius(origin: OriginClass) -> f64 {
    let probe = RadialPotential::new("probe", Arc::new(|_| 0.0), origin, InfinityClass::Exponential).expect("valid");
    seed(&probe).0
}

/// Outer radius of kernel tables: far enough that the tail terms are
/// negligible or computed by a tail integral.
pub fn table_end(decay: Decay) -> f64 {
    match decay {
        Decay::Exponential => 60.0,
        Decay::Power(_) => 200.0,
    }
}

/// Node set for kernel and map tables.
pub fn kernel_nodes(start: f64, end: f64) -> Vec<f64> {
    let mut nodes = Vec::new();
    if start < 1.0 {
        let decades = (1.0 / start).log10();
        let n = (decades * 10.0).ceil().max(1.0) as usize;
        for i in 0..n {
            nodes.push(start * 10f64.powf(decades * i as f64 / n as f64));
        }
    }
    let first = start.max(1.0);
    let n = ((end - first) / 0.25).ceil() as usize;
    for i in 0..=n {
        nodes.push(first + (end - first) * i as f64 / n.max(1) as f64);
    }
    nodes
}

fn shift(decay: Decay, by: f64) -> Decay {
    match decay {
        Decay::Exponential => Decay::Exponential,
        Decay::Power(p) => Decay::Power((p + by).max(1.0001)),
    }
}

/// W and U tabulated at nodes and evaluated elsewhere from the nearest node.
///
/// With source g and weight primitive y:
/// W(r) = W(r_k) + ∫_{r_k}^r g, and
/// U(r) = U(r_k) − W(r_k)(y(r) − y(r_k)) − ∫_{r_k}^r g(s)(y(r) − y(s)) ds.
#[derive(Clone)]
pub struct KernelTable {
    nodes: Vec<f64>,
    w_at: Vec<f64>,
    u_at: Vec<f64>,
    source: Func,
    primitive: Func,
}

impl fmt::Debug for KernelTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelTable").field("nodes", &self.nodes.len()).finish()
    }
}

impl KernelTable {
    /// `decay` is the decay of the source g and y grows like t^`growth`.
    pub fn build(source: Func, primitive: Func, decay: Decay, growth: f64, nodes: Vec<f64>) -> Result<Self, QuadError> {
        let n = nodes.len();
        let end = nodes[n - 1];
        let y_end = primitive(end);
        let mut w_at = vec![0.0; n];
        let mut u_at = vec![0.0; n];
        w_at[n - 1] = -tail_integral(|s| source(s), end, decay, KERNEL_TOL)?;
        u_at[n - 1] = -tail_integral(|s| source(s) * (primitive(s) - y_end), end, shift(decay, -growth), KERNEL_TOL)?;
        for k in (0..n - 1).rev() {
            let (a, b) = (nodes[k], nodes[k + 1]);
            let ya = primitive(a);
            let piece_w = integrate(|s| source(s), a, b, KERNEL_TOL)?;
            let piece_u = integrate(|s| source(s) * (primitive(s) - ya), a, b, KERNEL_TOL)?;
            w_at[k] = w_at[k + 1] - piece_w;
            u_at[k] = u_at[k + 1] + w_at[k + 1] * (primitive(b) - ya) - piece_u;
        }
        Ok(Self {
            nodes,
            w_at,
            u_at,
            source,
            primitive,
        })
    }

    fn anchor(&self, r: f64) -> usize {
        let n = self.nodes.len();
        let k = self.nodes.partition_point(|&t| t <= r).min(n - 1);
        if k > 0 && (r - self.nodes[k - 1]) < (self.nodes[k] - r) {
            k - 1
        } else {
            k
        }
    }

    pub fn w(&self, r: f64) -> f64 {
        let k = self.anchor(r);
        let g = &self.source;
        self.w_at[k] + integrate(|s| g(s), self.nodes[k], r, KERNEL_TOL).unwrap_or(f64::NAN)
    }

    pub fn u(&self, r: f64) -> f64 {
        let k = self.anchor(r);
        let (g, y) = (&self.source, &self.primitive);
        let rk = self.nodes[k];
        let yr = y(r);
        let piece = integrate(|s| g(s) * (yr - y(s)), rk, r, KERNEL_TOL).unwrap_or(f64::NAN);
        self.u_at[k] - self.w_at[k] * (yr - y(rk)) - piece
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn u_nodes(&self) -> &[f64] {
        &self.u_at
    }

    pub fn w_nodes(&self) -> &[f64] {
        &self.w_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Grosse,
    General,
    HigherEll,
}

/// How the higher-ℓ U kernel weights W.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HigherEllIntegrand {
    /// U(r) = ∫_r^∞ t^{2ℓ} W(t) dt.
    InnerWeight,
    /// U(r) = r^{2ℓ} ∫_r^∞ W(t) dt.
    OuterWeight,
}

/// W and U kernels with the weight y' = 1/b² and primitive y.
#[derive(Clone)]
pub struct TransformKernels {
    pub variant: KernelVariant,
    pub ell: u32,
    table: Arc<KernelTable>,
    u_fast: Arc<PanelFn>,
    weight: Func,
}

impl fmt::Debug for TransformKernels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformKernels")
            .field("variant", &self.variant)
            .field("ell", &self.ell)
            .field("table", &self.table)
            .finish()
    }
}

impl TransformKernels {
    fn build(
        variant: KernelVariant,
        ell: u32,
        source: Func,
        primitive: Func,
        weight: Func,
        decay: Decay,
        start: f64,
    ) -> Result<Self, QuadError> {
        let nodes = kernel_nodes(start, table_end(decay));
        Self::build_on(variant, ell, source, primitive, weight, decay, nodes)
    }

    /// W(r) by direct quadrature from the nearest node.
    pub fn w(&self, r: f64) -> f64 {
        self.table.w(r)
    }

    /// U(r), from the Chebyshev tabulation where it validated.
    pub fn u(&self, r: f64) -> f64 {
        self.u_fast.eval(r)
    }

    /// U(r) by direct quadrature from the nearest node.
    pub fn u_direct(&self, r: f64) -> f64 {
        self.table.u(r)
    }

    /// y'(r).
    pub fn weight(&self, r: f64) -> f64 {
        (self.weight)(r)
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }
}

/// Panel breaks at every other node.
fn nodes_to_breaks(nodes: &[f64]) -> Vec<f64> {
    let mut breaks: Vec<f64> = nodes.iter().step_by(2).copied().collect();
    if *breaks.last().unwrap() < nodes[nodes.len() - 1] {
        breaks.push(nodes[nodes.len() - 1]);
    }
    breaks
}

/// A strictly increasing change of variable x(r) with x(0) = 0.
#[derive(Clone)]
pub struct MonotoneMap {
    forward: Func,
    derivative: Func,
    r_nodes: Vec<f64>,
    x_nodes: Vec<f64>,
    seed: Arc<MonotoneCubic>,
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneMap")
            .field("nodes", &self.r_nodes.len())
            .field("r_max", &self.r_nodes.last())
            .field("x_max", &self.x_nodes.last())
            .finish()
    }
}

impl MonotoneMap {
    /// Tabulate `forward` on `r_nodes` for inversion. Fails if dx/dr is not
    /// positive at every node.
    pub fn new(forward: Func, derivative: Func, r_nodes: Vec<f64>) -> Result<Self, TransformError> {
        for &r in &r_nodes {
            let d = derivative(r);
            if !(d > 0.0) {
                return Err(TransformError::Precondition {
                    slot: "map",
                    condition: "dx/dr > 0",
                    detail: format!("dx/dr = {d:e} at r = {r}"),
                });
            }
        }
        let x_nodes: Vec<f64> = r_nodes.iter().map(|&r| forward(r)).collect();
        let seed = MonotoneCubic::new(x_nodes.clone(), r_nodes.clone())?;
        Ok(Self {
            forward,
            derivative,
            r_nodes,
            x_nodes,
            seed: Arc::new(seed),
        })
    }

    /// Map with x(r) = x(r_k) + ∫_{r_k}^r x' anchored on `r_nodes`.
    pub fn from_derivative(derivative: Func, r_nodes: Vec<f64>) -> Result<Self, TransformError> {
        let mut x_nodes = Vec::with_capacity(r_nodes.len());
        let mut acc = integrate(|t| derivative(t), 0.0, r_nodes[0], KERNEL_TOL)?;
        x_nodes.push(acc);
        for w in r_nodes.windows(2) {
            acc += integrate(|t| derivative(t), w[0], w[1], KERNEL_TOL)?;
            x_nodes.push(acc);
        }
        let (rn, xn, d) = (Arc::new(r_nodes.clone()), Arc::new(x_nodes), derivative.clone());
        let forward: Func = Arc::new(move |r| {
            let n = rn.len();
            let mut k = rn.partition_point(|&t| t <= r).min(n - 1);
            if k > 0 && (r - rn[k - 1]) < (rn[k] - r) {
                k -= 1;
            }
            if r < rn[0] {
                return integrate(|t| d(t), 0.0, r, KERNEL_TOL).unwrap_or(f64::NAN);
            }
            xn[k] + integrate(|t| d(t), rn[k], r, KERNEL_TOL).unwrap_or(f64::NAN)
        });
        Self::new(forward, derivative, r_nodes)
    }

    pub fn x(&self, r: f64) -> f64 {
        (self.forward)(r)
    }

    pub fn dx(&self, r: f64) -> f64 {
        (self.derivative)(r)
    }

    /// r(x), by safeguarded Newton on the forward map seeded from the table.
    pub fn inverse(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.x_nodes.len();
        let (lo, hi, seed) = if x < self.x_nodes[0] {
            (0.0, self.r_nodes[0], self.r_nodes[0] * x / self.x_nodes[0])
        } else if x > self.x_nodes[n - 1] {
            let slope = self.dx(self.r_nodes[n - 1]);
            let guess = self.r_nodes[n - 1] + (x - self.x_nodes[n - 1]) / slope;
            let mut hi = guess.max(self.r_nodes[n - 1]) * 2.0;
            while self.x(hi) < x {
                hi *= 2.0;
            }
            (self.r_nodes[n - 1], hi, guess)
        } else {
            let k = self.x_nodes.partition_point(|&t| t <= x).min(n - 1).max(1);
            (self.r_nodes[k - 1], self.r_nodes[k], self.seed.eval(x))
        };
        invert_increasing(|r| self.x(r), |r| self.dx(r), x, lo, hi, seed, 1e-15)
    }

    /// max |r(x(r)) − r|/(1 + r) over `grid`.
    pub fn roundtrip_max(&self, grid: &[f64]) -> f64 {
        grid.iter()
            .map(|&r| (self.inverse(self.x(r)) - r).abs() / (1.0 + r))
            .fold(0.0, f64::max)
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn forward_func(&self) -> Func {
        self.forward.clone()
    }
}

/// The inner problem ψ'' = V_in(x)ψ with ψ known.
#[derive(Clone)]
pub struct InnerSolution {
    pub potential: RadialPotential,
    /// x ↦ (ψ(x), ψ'(x)).
    pub psi: DiffFunc,
    pub label: String,
}

impl fmt::Debug for InnerSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InnerSolution")
            .field("label", &self.label)
            .field("potential", &self.potential)
            .finish()
    }
}

impl InnerSolution {
    pub fn from_entry(entry: &CatalogEntry) -> Self {
        Self {
            potential: entry.potential.clone(),
            psi: entry.phi.clone(),
            label: entry.potential.label().to_string(),
        }
    }

    pub fn psi_value(&self, x: f64) -> f64 {
        (self.psi)(x).0
    }
}

/// Rebuild `entry` with its strength multiplied by `lambda`, so that the
/// closed form solves ψ'' = λV ψ.
pub fn scale_entry(entry: &CatalogEntry, lambda: f64) -> Result<CatalogEntry, CatalogError> {
    if lambda == 1.0 {
        return Ok(entry.clone());
    }
    let mut params = entry.params.clone();
    for key in ["lambda", "alpha", "g"] {
        if let Some(v) = params.get_mut(key) {
            *v *= lambda;
        }
    }
    make_entry(entry.name, &params)
}

/// Which constant fixes the scale of the auxiliary χ₀ = e^{-U₀}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiNormalization {
    /// χ₀(0) = 1, possible when U₀(0) is finite.
    UnitAtOrigin,
    /// χ₀(∞) = 1, used when V₀ is singular at the origin.
    UnitAtInfinity,
}

/// Generic composition φ = b e^{-U} ψ(x) with x' = e^{2U}/b².
struct Liouville {
    /// r ↦ (b, b').
    base: DiffFunc,
    /// Potential terms that do not involve the kernels or the inner potential.
    base_potential: Func,
    kernels: Option<TransformKernels>,
    map: MonotoneMap,
    inner: InnerSolution,
}

impl Liouville {
    fn kernel_values(&self, r: f64) -> (f64, f64) {
        match &self.kernels {
            Some(k) => (k.u(r), k.w(r)),
            None => (0.0, 0.0),
        }
    }

    fn potential(&self, r: f64) -> f64 {
        let (b, _) = (self.base)(r);
        let (u, w) = self.kernel_values(r);
        let b4 = (b * b) * (b * b);
        let inner = self.inner.potential.eval(self.map.x(r));
        (self.base_potential)(r) + w * w / b4 + (4.0 * u).exp() / b4 * inner
    }

    fn solution(&self, r: f64) -> (f64, f64) {
        let (b, db) = (self.base)(r);
        let (u, w) = self.kernel_values(r);
        let (psi, dpsi) = (self.inner.psi)(self.map.x(r));
        if psi == 0.0 && !(-u).exp().is_finite() {
            return (0.0, 0.0);
        }
        let e = (-u).exp();
        (b * e * psi, e * (db + w / b) * psi + dpsi / (e * b))
    }
}

/// Slot name and potential of one constituent.
#[derive(Debug, Clone)]
pub struct Constituent {
    pub slot: &'static str,
    pub potential: RadialPotential,
}

/// A composed potential with its explicit solution and everything used to
/// build it.
#[derive(Clone)]
pub struct CompositionRecord {
    pub engine: Engine,
    pub depth: usize,
    pub constituents: Vec<Constituent>,
    pub inner: InnerSolution,
    pub kernels: Option<TransformKernels>,
    pub map: MonotoneMap,
    pub composed_potential: RadialPotential,
    /// r ↦ (φ(r), φ'(r)).
    pub composed_solution: DiffFunc,
    /// Regular/second solution pair of V₀ for the engines that use one.
    pub v0_pair: Option<Arc<SolutionPair>>,
    pub ell: u32,
    pub normalization: Option<ChiNormalization>,
    pub higher_ell_integrand: Option<HigherEllIntegrand>,
    /// Residual of the χ_ℓ equation for each integrand variant tried.
    pub higher_ell_checks: Vec<(HigherEllIntegrand, f64)>,
    /// Interval on which the residual is checked.
    pub residual_domain: (f64, f64),
    pub notes: Vec<String>,
    liouville: Arc<Liouville>,
}

impl fmt::Debug for CompositionRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositionRecord")
            .field("engine", &self.engine)
            .field("depth", &self.depth)
            .field("constituents", &self.constituents)
            .field("inner", &self.inner)
            .field("map", &self.map)
            .field("ell", &self.ell)
            .field("notes", &self.notes)
            .finish()
    }
}

impl CompositionRecord {
    pub fn phi(&self, r: f64) -> f64 {
        (self.composed_solution)(r).0
    }

    pub fn potential(&self, r: f64) -> f64 {
        self.composed_potential.eval(r)
    }

    /// The composed solution recomputed from the engine's own formula
    /// rather than the shared implementation.
    pub fn formula_solution(&self, r: f64) -> f64 {
        let x = self.map.x(r);
        let psi = self.inner.psi_value(x);
        let kern = self.kernels.as_ref();
        match self.engine {
            Engine::Theorem1 => {
                let second = self.v0_pair.as_ref().expect("theorem1 keeps its pair").second();
                let chi = second.chi(r);
                chi * self.inner.psi_value(second.phi()(r).0 / chi)
            }
            Engine::Grosse => (-kern.expect("kernels").u_direct(r)).exp() * psi,
            Engine::Theorem2 => {
                let chi = self.v0_pair.as_ref().expect("theorem2 keeps its pair").second().chi(r);
                chi * (-kern.expect("kernels").u_direct(r)).exp() * psi
            }
            Engine::HigherEll => r.powi(-(self.ell as i32)) * (-kern.expect("kernels").u_direct(r)).exp() * psi,
        }
    }

    /// c(r) in φ = c ψ(x).
    pub fn prefactor(&self, r: f64) -> f64 {
        let (b, _) = (self.liouville.base)(r);
        let (u, _) = self.liouville.kernel_values(r);
        b * (-u).exp()
    }

    pub fn constituent(&self, slot: &str) -> Option<&RadialPotential> {
        self.constituents.iter().find(|c| c.slot == slot).map(|c| &c.potential)
    }
}

fn require_regularity(slot: &'static str, v: &RadialPotential, need_first_moment: bool) -> Result<(), TransformError> {
    let rep = integrability_report(|r| v.eval(r))?;
    let regular_origin = matches!(v.origin(), OriginClass::Regular);
    if regular_origin && !rep.near0_finite {
        return Err(TransformError::Precondition {
            slot,
            condition: "r|V| integrable near 0",
            detail: format!("∫₀¹ r|V| = {}", rep.int_r_abs_v_near0),
        });
    }
    if need_first_moment {
        if v.infinity().is_short_range() && !rep.first_moment_finite() && regular_origin {
            return Err(TransformError::Precondition {
                slot,
                condition: "rV ∈ L¹(0, ∞)",
                detail: format!("∫₀^∞ r|V| = {}", rep.int_x_abs_v_full),
            });
        }
    } else if v.infinity().is_short_range() && !rep.tail_finite {
        return Err(TransformError::Precondition {
            slot,
            condition: "r²|V| integrable at infinity",
            detail: format!("∫₁^∞ r²|V| = {}", rep.int_r2_abs_v_tail),
        });
    }
    Ok(())
}

fn residual_domain_for(origin: OriginClass) -> (f64, f64) {
    match origin {
        OriginClass::SingularRepulsive { .. } => (0.1, 20.0),
        _ => (1e-3, 20.0),
    }
}

fn composed_infinity(parts: &[&RadialPotential]) -> InfinityClass {
    parts
        .iter()
        .map(|p| p.infinity())
        .reduce(|a, b| a.slowest(b))
        .unwrap_or(InfinityClass::Exponential)
}

/// The regular/second solution pair of V₀, from a closed form when one is
/// given and from the ODE otherwise.
pub fn pair_for(v0: &RadialPotential, closed: Option<DiffFunc>, tol: f64) -> Result<SolutionPair, TransformError> {
    let grid = crate::ode::solution_grid(v0.origin(), seed(v0).0, default_r_max(v0));
    let pair = match closed {
        Some(phi) => SolutionPair::from_closed_form(v0, phi, grid),
        None => SolutionPair::solve(v0, tol),
    };
    pair.map_err(|e| match e {
        OdeError::BoundStates { .. } => TransformError::BoundStates { slot: "V0", source: e },
        other => TransformError::Ode(other),
    })
}

/// Chebyshev tabulations of χ₀ and φ₀/χ₀ over the pair grid.
fn tabulate_pair(pair: &SolutionPair) -> (Func, Func, Func) {
    let second = pair.second().clone();
    let grid = &pair.grid;
    let breaks = nodes_to_breaks(&kernel_nodes(grid[0], grid[grid.len() - 1]));
    let s1 = second.clone();
    let chi = PanelFn::build(Arc::new(move |r| s1.chi(r)), &breaks, TABLE_TOL).into_func();
    let s2 = second.clone();
    let ratio = PanelFn::build(Arc::new(move |r| s2.ratio(r)), &breaks, TABLE_TOL).into_func();
    let s3 = second;
    let dchi: Func = Arc::new(move |r| s3.chi_d(r).1);
    (chi, dchi, ratio)
}

/// Compose V₀ (through its solution pair) with an inner potential:
/// V₀ + χ₀⁻⁴V(x), x = φ₀/χ₀, φ = χ₀ψ(x).
pub fn theorem1_compose(
    v0: &RadialPotential,
    pair: Arc<SolutionPair>,
    inner: InnerSolution,
) -> Result<CompositionRecord, TransformError> {
    require_regularity("V0", v0, false)?;
    require_regularity("V", &inner.potential, false)?;
    let second = pair.second().clone();
    let s1 = second.clone();
    let base: DiffFunc = Arc::new(move |r| s1.chi_d(r));
    let s2 = second.clone();
    let forward: Func = Arc::new(move |r| s2.ratio(r));
    let s3 = second.clone();
    let derivative: Func = Arc::new(move |r| {
        let c = s3.chi(r);
        1.0 / (c * c)
    });
    let grid = &pair.grid;
    let map = MonotoneMap::new(forward, derivative, kernel_nodes(grid[0], grid[grid.len() - 1]))?;
    let constituents = vec![
        Constituent { slot: "V0", potential: v0.clone() },
        Constituent {
            slot: "V",
            potential: inner.potential.clone(),
        },
    ];
    let infinity = composed_infinity(&[v0, &inner.potential]);
    let liouville = Liouville {
        base,
        base_potential: v0.func(),
        kernels: None,
        map,
        inner,
    };
    Ok(finish(
        Engine::Theorem1,
        liouville,
        constituents,
        Some(pair),
        0,
        v0.origin(),
        infinity,
    ))
}

fn finish(
    engine: Engine,
    liouville: Liouville,
    constituents: Vec<Constituent>,
    pair: Option<Arc<SolutionPair>>,
    ell: u32,
    origin: OriginClass,
    infinity: InfinityClass,
) -> CompositionRecord {
    let liouville = Arc::new(liouville);
    let lv = liouville.clone();
    let label = format!("{}[{}]", engine, constituents.iter().map(|c| c.potential.label()).collect::<Vec<_>>().join(", "));
    let composed_potential = RadialPotential::new(label, Arc::new(move |r| lv.potential(r)), origin, infinity)
        .expect("classes inherited from valid constituents");
    let ls = liouville.clone();
    CompositionRecord {
        engine,
        depth: 1,
        constituents,
        inner: liouville.inner.clone(),
        kernels: liouville.kernels.clone(),
        map: liouville.map.clone(),
        composed_potential,
        composed_solution: Arc::new(move |r| ls.solution(r)),
        v0_pair: pair,
        ell,
        normalization: None,
        higher_ell_integrand: None,
        higher_ell_checks: Vec::new(),
        residual_domain: residual_domain_for(origin),
        notes: Vec::new(),
        liouville,
    }
}

/// W₀ = −∫_r^∞ V₀ and U₀ = ∫_r^∞ W₀.
pub fn grosse_kernels(v0: &RadialPotential) -> Result<TransformKernels, TransformError> {
    require_regularity("V0", v0, true)?;
    let decay = v0.infinity().decay();
    if let Decay::Power(p) = decay {
        if p <= 2.0 {
            return Err(TransformError::Precondition {
                slot: "V0",
                condition: "rV₀ ∈ L¹(0, ∞)",
                detail: format!("tail decays like r^-{p}"),
            });
        }
    }
    Ok(TransformKernels::build(
        KernelVariant::Grosse,
        0,
        v0.func(),
        Arc::new(|t| t),
        Arc::new(|_| 1.0),
        decay,
        table_start(v0.origin()),
    )?)
}

fn kernel_map(kernels: &TransformKernels, base: DiffFunc, start: f64, end: f64) -> Result<MonotoneMap, TransformError> {
    let k = kernels.clone();
    let derivative: Func = Arc::new(move |r| {
        let b = base(r).0;
        (2.0 * k.u(r)).exp() / (b * b)
    });
    MonotoneMap::from_derivative(derivative, kernel_nodes(start, end))
}

fn normalization_for(origin: OriginClass) -> ChiNormalization {
    match origin {
        OriginClass::SingularRepulsive { .. } => ChiNormalization::UnitAtInfinity,
        _ => ChiNormalization::UnitAtOrigin,
    }
}

/// V₀ + W₀² + e^{4U₀}V₁(x), x = ∫₀^r e^{2U₀}, φ = e^{-U₀}ψ(x).
pub fn grosse_compose(v0: &RadialPotential, inner: InnerSolution) -> Result<CompositionRecord, TransformError> {
    require_regularity("V1", &inner.potential, true)?;
    let kernels = grosse_kernels(v0)?;
    let base: DiffFunc = Arc::new(|_| (1.0, 0.0));
    let start = table_start(v0.origin());
    let map = kernel_map(&kernels, base.clone(), start, table_end(v0.infinity().decay()))?;
    let constituents = vec![
        Constituent { slot: "V0", potential: v0.clone() },
        Constituent {
            slot: "V1",
            potential: inner.potential.clone(),
        },
    ];
    let infinity = composed_infinity(&[v0, &inner.potential]);
    let origin = match v0.origin() {
        // W₀² ~ g²/(9r⁶) dominates g/r⁴
        OriginClass::SingularRepulsive { n, g } => OriginClass::SingularRepulsive {
            n: 2.0 * n - 2.0,
            g: g * g / ((n - 1.0) * (n - 1.0)),
        },
        other => other,
    };
    let liouville = Liouville {
        base,
        base_potential: v0.func(),
        kernels: Some(kernels),
        map,
        inner,
    };
    let mut record = finish(Engine::Grosse, liouville, constituents, None, 0, origin, infinity);
    record.normalization = Some(normalization_for(v0.origin()));
    if record.normalization == Some(ChiNormalization::UnitAtInfinity) {
        record.notes.push("χ₀ = e^{-U₀} normalised at infinity (U₀(0) is infinite)".into());
    }
    Ok(record)
}

/// Ṽ(x) = −W₀²(r(x))e^{-4U₀(r(x))}, the potential seen by e^{U₀}φ₀ in the
/// x variable.
pub fn grosse_tilde(v0: &RadialPotential) -> Result<(RadialPotential, MonotoneMap), TransformError> {
    let kernels = grosse_kernels(v0)?;
    let base: DiffFunc = Arc::new(|_| (1.0, 0.0));
    let map = kernel_map(&kernels, base, table_start(v0.origin()), table_end(v0.infinity().decay()))?;
    let (k, m) = (kernels.clone(), map.clone());
    let tilde: Func = Arc::new(move |x| {
        let r = m.inverse(x);
        let w = k.w(r);
        -w * w * (-4.0 * k.u(r)).exp()
    });
    let infinity = match v0.infinity() {
        InfinityClass::ShortRange { power } => InfinityClass::ShortRange {
            power: 2.0 * power - 2.0,
        },
        other => other,
    };
    let v = RadialPotential::new(format!("tilde[{}]", v0.label()), tilde, OriginClass::Regular, infinity)
        .expect("regular");
    Ok((v, map))
}

/// φ₀ = χ₀∫₀^r χ₀⁻² for V₀ + W₀², with χ₀ = e^{-U₀} normalised per class.
/// Evaluated by direct quadrature, independently of any map table.
pub fn grosse_auxiliary_phi(v0: &RadialPotential) -> Result<(Func, ChiNormalization), TransformError> {
    let kernels = grosse_kernels(v0)?;
    let norm = normalization_for(v0.origin());
    let u0 = match norm {
        ChiNormalization::UnitAtOrigin => kernels.u_direct(table_start(v0.origin())),
        ChiNormalization::UnitAtInfinity => 0.0,
    };
    let k = kernels;
    let chi = move |r: f64| (-(k.u_direct(r) - u0)).exp();
    let phi: Func = Arc::new(move |r| {
        let integral = integrate(
            |t| {
                let c = chi(t);
                1.0 / (c * c)
            },
            0.0,
            r,
            1e-12,
        )
        .unwrap_or(f64::NAN);
        chi(r) * integral
    });
    Ok((phi, norm))
}

/// W₁ = −∫_r^∞ V₁χ₀², U₁ = ∫_r^∞ W₁/χ₀²; composed potential
/// V₀ + V₁ + χ₀⁻⁴W₁² + χ₀⁻⁴e^{4U₁}V(x) with x = ∫₀^r e^{2U₁}/χ₀² and
/// φ = χ₀e^{-U₁}ψ(x).
pub fn theorem2_compose(
    v0: &RadialPotential,
    pair: Arc<SolutionPair>,
    v1: &RadialPotential,
    inner: InnerSolution,
) -> Result<CompositionRecord, TransformError> {
    require_regularity("V0", v0, false)?;
    require_regularity("V1", v1, true)?;
    require_regularity("V", &inner.potential, true)?;
    let (chi, dchi, ratio) = tabulate_pair(&pair);
    let v1f = v1.func();
    let c1 = chi.clone();
    let source: Func = Arc::new(move |t| {
        let c = c1(t);
        v1f(t) * c * c
    });
    let c2 = chi.clone();
    let weight: Func = Arc::new(move |t| {
        let c = c2(t);
        1.0 / (c * c)
    });
    let start = pair.grid[0];
    let decay = v1.infinity().decay();
    let nodes_end = pair.grid[pair.grid.len() - 1];
    let kernels = TransformKernels::build_on(
        KernelVariant::General,
        0,
        source,
        ratio,
        weight,
        decay,
        kernel_nodes(start, nodes_end),
    )?;
    let (c3, d3) = (chi.clone(), dchi);
    let base: DiffFunc = Arc::new(move |r| (c3(r), d3(r)));
    let map = kernel_map(&kernels, base.clone(), start, nodes_end)?;
    let constituents = vec![
        Constituent { slot: "V0", potential: v0.clone() },
        Constituent { slot: "V1", potential: v1.clone() },
        Constituent {
            slot: "V",
            potential: inner.potential.clone(),
        },
    ];
    let infinity = composed_infinity(&[v0, v1, &inner.potential]);
    let (f0, f1) = (v0.func(), v1.func());
    let liouville = Liouville {
        base,
        base_potential: Arc::new(move |r| f0(r) + f1(r)),
        kernels: Some(kernels),
        map,
        inner,
    };
    Ok(finish(Engine::Theorem2, liouville, constituents, Some(pair), 0, v0.origin(), infinity))
}

impl TransformKernels {
    fn build_on(
        variant: KernelVariant,
        ell: u32,
        source: Func,
        primitive: Func,
        weight: Func,
        decay: Decay,
        nodes: Vec<f64>,
    ) -> Result<Self, QuadError> {
        let growth = 2.0 * ell as f64 + 1.0;
        let table = Arc::new(KernelTable::build(source, primitive, decay, growth, nodes.clone())?);
        let t = table.clone();
        let u_fast = PanelFn::build(Arc::new(move |r| t.u(r)), &nodes_to_breaks(&nodes), TABLE_TOL);
        Ok(Self {
            variant,
            ell,
            table,
            u_fast: Arc::new(u_fast),
            weight,
        })
    }
}

/// Points used to decide between the higher-ℓ integrand variants.
const VARIANT_CHECK_POINTS: usize = 200;
/// A variant passes the χ_ℓ check below this residual.
pub const VARIANT_TOL: f64 = 1e-6;
/// χ_ℓ ~ r^{-ℓ} stresses the stencil close to the origin, so the check
/// starts here.
const VARIANT_CHECK_START: f64 = 0.1;

/// Residual of χ_ℓ = r^{-ℓ}e^{-U} against V₀ + ℓ(ℓ+1)/r² + r^{4ℓ}W², for a
/// given U.
fn chi_ell_residual(v0: &RadialPotential, ell: u32, w: &dyn Fn(f64) -> f64, u: &dyn Fn(f64) -> f64) -> f64 {
    let l = ell as i32;
    let lf = ell as f64;
    let grid: Vec<f64> = (0..VARIANT_CHECK_POINTS)
        .map(|i| VARIANT_CHECK_START + (20.0 - VARIANT_CHECK_START) * i as f64 / (VARIANT_CHECK_POINTS - 1) as f64)
        .collect();
    let chi = |r: f64| r.powi(-l) * (-u(r)).exp();
    let pot = |r: f64| {
        let wr = w(r);
        v0.eval(r) + lf * (lf + 1.0) / (r * r) + r.powi(4 * l) * wr * wr
    };
    crate::verify::residual(&chi, &pot, &grid).max
}

/// V₀ + ℓ(ℓ+1)/r² + r^{4ℓ}W_ℓ² + r^{4ℓ}e^{4U_ℓ}V(x) with W_ℓ = −∫_r^∞ V₀t^{-2ℓ},
/// U_ℓ = ∫_r^∞ t^{2ℓ}W_ℓ, x = ∫₀^r t^{2ℓ}e^{2U_ℓ}, φ = r^{-ℓ}e^{-U_ℓ}ψ(x).
pub fn higher_ell_compose(v0: &RadialPotential, inner: InnerSolution, ell: u32) -> Result<CompositionRecord, TransformError> {
    require_regularity("V0", v0, true)?;
    require_regularity("V1", &inner.potential, true)?;
    let decay = v0.infinity().decay();
    if let Decay::Power(p) = decay {
        if p <= 2.0 {
            return Err(TransformError::DivergentKernel {
                ell,
                detail: format!("V₀ decays like r^-{p}, so ∫ t^{{2ℓ}}W_ℓ diverges"),
            });
        }
    }
    let l = ell as i32;
    let twol = 2.0 * ell as f64;
    let f0 = v0.func();
    let source: Func = Arc::new(move |t| f0(t) * t.powi(-2 * l));
    let primitive: Func = Arc::new(move |t| t.powi(2 * l + 1) / (twol + 1.0));
    let weight: Func = Arc::new(move |t| t.powi(2 * l));
    let start = table_start(v0.origin());
    let kernels = TransformKernels::build(
        KernelVariant::HigherEll,
        ell,
        source.clone(),
        primitive,
        weight,
        shift(decay, twol),
        start,
    )?;

    // U_ℓ = r^{2ℓ}∫_r^∞ W_ℓ = −r^{2ℓ}∫_r^∞ (s − r)g(s) ds
    let g_outer = source;
    let outer_u = move |r: f64| {
        let tail = tail_integral(|s| g_outer(s) * (s - r), r, shift(decay, twol - 1.0), 1e-12).unwrap_or(f64::NAN);
        -r.powi(2 * l) * tail
    };
    let kw = kernels.clone();
    let inner_res = chi_ell_residual(v0, ell, &|r| kw.w(r), &|r| kw.u_direct(r));
    let outer_res = chi_ell_residual(v0, ell, &|r| kw.w(r), &outer_u);
    let checks = vec![
        (HigherEllIntegrand::InnerWeight, inner_res),
        (HigherEllIntegrand::OuterWeight, outer_res),
    ];
    let mut notes = Vec::new();
    let chosen = if inner_res <= VARIANT_TOL || inner_res <= outer_res {
        HigherEllIntegrand::InnerWeight
    } else {
        HigherEllIntegrand::OuterWeight
    };
    if inner_res <= VARIANT_TOL && outer_res <= VARIANT_TOL && ell > 0 {
        notes.push("both U_ℓ integrand variants pass the χ_ℓ check; using t^{2ℓ}W_ℓ".to_string());
    }
    if chosen == HigherEllIntegrand::OuterWeight {
        return Err(TransformError::Precondition {
            slot: "V0",
            condition: "χ_ℓ equation holds for U_ℓ = ∫ t^{2ℓ}W_ℓ",
            detail: format!("residual {inner_res:e}, alternative {outer_res:e}"),
        });
    }

    let base: DiffFunc = Arc::new(move |r| {
        let b = r.powi(-l);
        (b, -(l as f64) * b / r)
    });
    let map = kernel_map(&kernels, base.clone(), start, table_end(decay))?;
    let constituents = vec![
        Constituent { slot: "V0", potential: v0.clone() },
        Constituent {
            slot: "V1",
            potential: inner.potential.clone(),
        },
    ];
    let infinity = composed_infinity(&[v0, &inner.potential]);
    let origin = match v0.origin() {
        OriginClass::Regular if ell > 0 => OriginClass::Centrifugal { ell },
        other => other,
    };
    let f0 = v0.func();
    let lf = ell as f64;
    let liouville = Liouville {
        base,
        base_potential: Arc::new(move |r| f0(r) + lf * (lf + 1.0) / (r * r)),
        kernels: Some(kernels),
        map,
        inner,
    };
    let mut record = finish(Engine::HigherEll, liouville, constituents, None, ell, origin, infinity);
    record.higher_ell_integrand = Some(chosen);
    record.higher_ell_checks = checks;
    record.notes.extend(notes);
    Ok(record)
}

/// Radius up to which an iterated inner solution must be accurate.
const ITERATION_REACH: f64 = 40.0;

/// Chebyshev tabulation of a record's composed potential and solution,
/// ready to serve as the inner problem of the next level.
pub fn tabulated_inner(record: &CompositionRecord) -> InnerSolution {
    let start = table_start(record.composed_potential.origin());
    let end = record.map.x(ITERATION_REACH) * 1.05 + 1.0;
    let breaks = crate::interp::standard_breaks(start, end, 10);
    let v = PanelFn::build(record.composed_potential.func(), &breaks, TABLE_TOL).into_func();
    let s1 = record.composed_solution.clone();
    let phi = PanelFn::build(Arc::new(move |r| s1(r).0), &breaks, TABLE_TOL).into_func();
    let s2 = record.composed_solution.clone();
    let dphi = PanelFn::build(Arc::new(move |r| s2(r).1), &breaks, TABLE_TOL).into_func();
    let cp = &record.composed_potential;
    let label = format!("level{}", record.depth);
    let potential = RadialPotential::new(label.clone(), v, cp.origin(), cp.infinity()).expect("inherited classes");
    InnerSolution {
        potential,
        psi: Arc::new(move |x| (phi(x), dphi(x))),
        label,
    }
}

/// A sequence of records where each level uses the previous composed
/// potential as its inner problem, with the report for every level.
#[derive(Debug, Clone)]
pub struct IterationChain {
    pub records: Vec<CompositionRecord>,
    pub reports: Vec<crate::verify::VerificationReport>,
}

/// Re-apply the engine of `first` until `depth` levels exist. The outer
/// constituents stay fixed and the inner slot takes the previous level.
/// Every level is verified, with the residual tolerance relaxed by one order
/// of magnitude per level.
pub fn iterate(
    first: CompositionRecord,
    depth: usize,
    tol: crate::verify::Tolerances,
) -> Result<IterationChain, TransformError> {
    match iterate_partial(first, depth, tol) {
        (chain, None) => Ok(chain),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`iterate`], but keeps the levels built so far (including a level
/// that failed its checks) alongside the error.
pub fn iterate_partial(
    first: CompositionRecord,
    depth: usize,
    tol: crate::verify::Tolerances,
) -> (IterationChain, Option<TransformError>) {
    let mut chain = IterationChain {
        records: Vec::new(),
        reports: Vec::new(),
    };
    if depth > 1 && first.engine == Engine::HigherEll {
        return (chain, Some(TransformError::NotIterable(Engine::HigherEll)));
    }
    let mut current = first;
    for level in 1..=depth.max(1) {
        if level > 1 {
            let prev = chain.records.last().expect("previous level");
            let inner = tabulated_inner(prev);
            let v0 = prev.constituent("V0").expect("V0 slot").clone();
            let next = match prev.engine {
                Engine::Theorem1 => theorem1_compose(&v0, prev.v0_pair.clone().expect("pair"), inner),
                Engine::Grosse => grosse_compose(&v0, inner),
                Engine::Theorem2 => {
                    let v1 = prev.constituent("V1").expect("V1 slot").clone();
                    theorem2_compose(&v0, prev.v0_pair.clone().expect("pair"), &v1, inner)
                }
                Engine::HigherEll => unreachable!("rejected above"),
            };
            current = match next {
                Ok(r) => r,
                Err(e) => {
                    let detail = e.to_string();
                    return (chain, Some(TransformError::Iteration { level, detail }));
                }
            };
            current.depth = level;
        }
        let report = crate::verify::check_composition(&current, tol.at_depth(level));
        let passed = report.passed;
        let failed: Vec<String> = report.checks.iter().filter(|(_, ok)| !**ok).map(|(k, _)| k.clone()).collect();
        let residual = report.residual_max;
        chain.records.push(current.clone());
        chain.reports.push(report);
        if !passed {
            let detail = format!("checks failed: {} (residual {:e})", failed.join(", "), residual);
            return (chain, Some(TransformError::Iteration { level, detail }));
        }
    }
    (chain, None)
}
