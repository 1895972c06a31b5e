//! JSON recipes and the compose/verify/export pipeline behind the CLI.
//!
//! A recipe names an engine and fills its slots with catalog entries:
//!
//! ```json
//! {
//!   "schema": "radial-compose/recipe/v1",
//!   "engine": "grosse",
//!   "potentials": {
//!     "V0": { "name": "exponential", "params": { "lambda": 1, "mu": 1 } },
//!     "V1": { "name": "inverse_square_shape", "params": { "lambda": -35, "b": 1 } }
//!   }
//! }
//! ```
//!
//! Slots may also be written `V₀` and `V₁`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{make_entry, CatalogEntry, CatalogError, CatalogName};
use crate::transform::{
    grosse_compose, higher_ell_compose, iterate_partial, pair_for, scale_entry, theorem1_compose, theorem2_compose,
    CompositionRecord, Engine, InnerSolution, TransformError,
};
use crate::verify::{check_grid, Tolerances, VerificationReport};

pub const RECIPE_SCHEMA: &str = "radial-compose/recipe/v1";
pub const RUN_SCHEMA: &str = "radial-compose/run/v1";

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "RADIAL_COMPOSE_OUT";

/// Tolerance of the ODE solves behind solution pairs.
const PAIR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub name: CatalogName,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverride {
    /// Inner end of the residual domain.
    pub lo: Option<f64>,
    /// Outer end of the residual domain.
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverride {
    pub residual: Option<f64>,
    pub wronskian: Option<f64>,
    pub roundtrip: Option<f64>,
    pub slope: Option<f64>,
    pub formula: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default = "yes")]
    pub report: bool,
    #[serde(default)]
    pub plot: bool,
}

fn yes() -> bool {
    true
}

impl Default for Outputs {
    fn default() -> Self {
        Self { report: true, plot: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub schema: String,
    pub engine: Engine,
    pub potentials: BTreeMap<String, PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<u32>,
    /// Multiplies the strength of the innermost potential.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub grid: GridOverride,
    #[serde(default)]
    pub tolerances: ToleranceOverride,
    #[serde(default = "one")]
    pub depth: usize,
    #[serde(default)]
    pub outputs: Outputs,
}

fn one() -> usize {
    1
}

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error("cannot read recipe {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("recipe is not valid JSON for the schema: {0}")]
    Parse(String),
    #[error("field `schema`: expected \"{RECIPE_SCHEMA}\", found \"{0}\"")]
    Schema(String),
    #[error("field `potentials`: engine {engine} requires slot {slot}")]
    MissingSlot { engine: Engine, slot: &'static str },
    #[error("field `potentials`: engine {engine} has no slot `{slot}`")]
    UnexpectedSlot { engine: Engine, slot: String },
    #[error("field `ell`: engine higher_ell requires ℓ")]
    MissingEll,
    #[error("field `ell`: only the higher_ell engine takes ℓ")]
    UnexpectedEll,
    #[error("field `depth`: {0}")]
    Depth(String),
    #[error("field `{field}`: {detail}")]
    Value { field: String, detail: String },
    #[error("field `potentials.{slot}`: {source}")]
    Catalog { slot: &'static str, source: CatalogError },
    #[error("composition rejected: {0}")]
    Compose(TransformError),
}

/// A slot with its display name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    pub key: &'static str,
    pub display: &'static str,
}

const V0: Slot = Slot { key: "V0", display: "V₀ (V0)" };
const V1: Slot = Slot { key: "V1", display: "V₁ (V1)" };
const V: Slot = Slot { key: "V", display: "V" };

/// Slots an engine takes, outermost first.
pub fn engine_slots(engine: Engine) -> &'static [Slot] {
    match engine {
        Engine::Theorem1 => &[V0, V],
        Engine::Grosse | Engine::HigherEll => &[V0, V1],
        Engine::Theorem2 => &[V0, V1, V],
    }
}

fn normalize_slot(key: &str) -> String {
    key.replace('₀', "0").replace('₁', "1")
}

/// Parse and validate a recipe from JSON text.
pub fn parse_recipe(text: &str) -> Result<Recipe, RecipeError> {
    let mut recipe: Recipe = serde_json::from_str(text).map_err(|e| RecipeError::Parse(e.to_string()))?;
    recipe.potentials = recipe
        .potentials
        .into_iter()
        .map(|(k, v)| (normalize_slot(&k), v))
        .collect();
    validate(&recipe)?;
    Ok(recipe)
}

pub fn load_recipe(path: &Path) -> Result<Recipe, RecipeError> {
    let text = fs::read_to_string(path).map_err(|source| RecipeError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_recipe(&text)
}

pub fn validate(recipe: &Recipe) -> Result<(), RecipeError> {
    if recipe.schema != RECIPE_SCHEMA {
        return Err(RecipeError::Schema(recipe.schema.clone()));
    }
    let slots = engine_slots(recipe.engine);
    for slot in slots {
        if !recipe.potentials.contains_key(slot.key) {
            return Err(RecipeError::MissingSlot {
                engine: recipe.engine,
                slot: slot.display,
            });
        }
    }
    for key in recipe.potentials.keys() {
        if !slots.iter().any(|s| s.key == key) {
            return Err(RecipeError::UnexpectedSlot {
                engine: recipe.engine,
                slot: key.clone(),
            });
        }
    }
    match (recipe.engine, recipe.ell) {
        (Engine::HigherEll, None) => return Err(RecipeError::MissingEll),
        (Engine::HigherEll, Some(_)) | (_, None) => {}
        (_, Some(_)) => return Err(RecipeError::UnexpectedEll),
    }
    if recipe.depth == 0 {
        return Err(RecipeError::Depth("must be at least 1".into()));
    }
    if recipe.depth > 1 && recipe.engine == Engine::HigherEll {
        return Err(RecipeError::Depth("higher_ell records cannot be iterated".into()));
    }
    if let Some(s) = recipe.scale {
        if !s.is_finite() {
            return Err(RecipeError::Value {
                field: "scale".into(),
                detail: format!("must be finite, got {s}"),
            });
        }
    }
    let (lo, hi) = (recipe.grid.lo.unwrap_or(1e-3), recipe.grid.hi.unwrap_or(20.0));
    if !(lo > 0.0 && hi > lo) {
        return Err(RecipeError::Value {
            field: "grid".into(),
            detail: format!("need 0 < lo < hi, got lo = {lo}, hi = {hi}"),
        });
    }
    let t = recipe.tolerances;
    for (name, value) in [
        ("residual", t.residual),
        ("wronskian", t.wronskian),
        ("roundtrip", t.roundtrip),
        ("slope", t.slope),
        ("formula", t.formula),
    ] {
        if let Some(v) = value {
            if !(v > 0.0) {
                return Err(RecipeError::Value {
                    field: format!("tolerances.{name}"),
                    detail: format!("must be positive, got {v}"),
                });
            }
        }
    }
    for slot in slots {
        entry_for(recipe, *slot, 1.0)?;
    }
    Ok(())
}

fn entry_for(recipe: &Recipe, slot: Slot, scale: f64) -> Result<CatalogEntry, RecipeError> {
    let spec = &recipe.potentials[slot.key];
    let wrap = |source| RecipeError::Catalog { slot: slot.key, source };
    let entry = make_entry(spec.name, &spec.params).map_err(wrap)?;
    scale_entry(&entry, scale).map_err(wrap)
}

/// Tolerances from the recipe, with `residual_override` (the `--tol` flag)
/// taking precedence.
pub fn tolerances(recipe: &Recipe, residual_override: Option<f64>) -> Tolerances {
    let base = Tolerances::default();
    let t = recipe.tolerances;
    Tolerances {
        residual: residual_override.or(t.residual).unwrap_or(base.residual),
        wronskian: t.wronskian.unwrap_or(base.wronskian),
        roundtrip: t.roundtrip.unwrap_or(base.roundtrip),
        slope: t.slope.unwrap_or(base.slope),
        formula: t.formula.unwrap_or(base.formula),
    }
}

/// Build the first-level record a recipe describes.
pub fn compose(recipe: &Recipe) -> Result<CompositionRecord, RecipeError> {
    let slots = engine_slots(recipe.engine);
    let innermost = slots[slots.len() - 1];
    let scale = recipe.scale.unwrap_or(1.0);
    let inner_entry = entry_for(recipe, innermost, scale)?;
    let inner = InnerSolution::from_entry(&inner_entry);
    let v0 = entry_for(recipe, V0, 1.0)?;
    let pair = || pair_for(&v0.potential, Some(v0.phi.clone()), PAIR_TOL).map(Arc::new);
    let result = match recipe.engine {
        Engine::Theorem1 => pair().and_then(|p| theorem1_compose(&v0.potential, p, inner)),
        Engine::Grosse => grosse_compose(&v0.potential, inner),
        Engine::Theorem2 => {
            let v1 = entry_for(recipe, V1, 1.0)?;
            pair().and_then(|p| theorem2_compose(&v0.potential, p, &v1.potential, inner))
        }
        Engine::HigherEll => higher_ell_compose(&v0.potential, inner, recipe.ell.unwrap_or(0)),
    };
    let mut record = result.map_err(RecipeError::Compose)?;
    if recipe.grid.lo.is_some() || recipe.grid.hi.is_some() {
        let (lo, hi) = record.residual_domain;
        record.residual_domain = (recipe.grid.lo.unwrap_or(lo), recipe.grid.hi.unwrap_or(hi));
    }
    Ok(record)
}

/// Everything a run produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub recipe: Recipe,
    pub levels: Vec<VerificationReport>,
    /// Set when a level could not be built or failed its checks.
    pub failure: Option<String>,
    pub passed: bool,
}

pub struct RunOutcome {
    pub report: RunReport,
    /// Records of every level that was built.
    pub records: Vec<CompositionRecord>,
}

impl RunOutcome {
    /// 0 on overall pass, 1 on verification failure.
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            0
        } else {
            1
        }
    }
}

/// Compose, iterate and verify. Input errors are returned as `Err`;
/// verification failures are part of the outcome.
pub fn run(recipe: &Recipe, residual_override: Option<f64>) -> Result<RunOutcome, RecipeError> {
    let tol = tolerances(recipe, residual_override);
    let first = compose(recipe)?;
    let (chain, error) = iterate_partial(first, recipe.depth, tol);
    let failure = match error {
        None => None,
        Some(e @ TransformError::Iteration { .. }) => Some(e.to_string()),
        Some(e) => return Err(RecipeError::Compose(e)),
    };
    let (levels, records) = (chain.reports, chain.records);
    let passed = failure.is_none() && levels.iter().all(|r| r.passed);
    Ok(RunOutcome {
        report: RunReport {
            schema: RUN_SCHEMA.into(),
            recipe: recipe.clone(),
            levels,
            failure,
            passed,
        },
        records,
    })
}

/// Plot data for a record: header `r,V,phi,x` then one row per grid point.
pub fn plot_csv(record: &CompositionRecord) -> String {
    let (lo, hi) = record.residual_domain;
    let mut out = String::from("r,V,phi,x\n");
    for r in check_grid(lo, hi) {
        out.push_str(&format!(
            "{:e},{:e},{:e},{:e}\n",
            r,
            record.potential(r),
            record.phi(r),
            record.map.x(r)
        ));
    }
    out
}

pub fn report_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize")
}

/// File stem used for artifacts of `recipe_path`.
pub fn artifact_stem(recipe_path: &Path) -> String {
    recipe_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "recipe".into())
}

/// Write the report to `<dir>/<stem>.report.json`.
pub fn write_report(dir: &Path, stem: &str, report: &RunReport) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.report.json"));
    fs::write(&path, report_json(report))?;
    Ok(path)
}

/// Write `<dir>/<stem>.csv` for the deepest level, plus
/// `<dir>/<stem>.level<k>.csv` for earlier levels of a chain.
pub fn write_plots(dir: &Path, stem: &str, records: &[CompositionRecord]) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (i, record) in records.iter().enumerate() {
        let name = if i + 1 == records.len() {
            format!("{stem}.csv")
        } else {
            format!("{stem}.level{}.csv", i + 1)
        };
        let path = dir.join(name);
        fs::write(&path, plot_csv(record))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_slot_names_it() {
        let text = r#"{"schema": "radial-compose/recipe/v1", "engine": "theorem2",
            "potentials": {"V0": {"name": "zero"}, "V": {"name": "exponential"}}}"#;
        let err = parse_recipe(text).unwrap_err();
        assert!(err.to_string().contains("V₁"), "{err}");
    }

    #[test]
    fn subscript_slots_are_accepted() {
        let text = r#"{"schema": "radial-compose/recipe/v1", "engine": "grosse",
            "potentials": {"V₀": {"name": "exponential"}, "V₁": {"name": "zero"}}}"#;
        let recipe = parse_recipe(text).unwrap();
        assert!(recipe.potentials.contains_key("V0"));
        assert_eq!(recipe.depth, 1);
    }

    #[test]
    fn ell_only_for_higher_ell() {
        let text = r#"{"schema": "radial-compose/recipe/v1", "engine": "grosse", "ell": 1,
            "potentials": {"V0": {"name": "exponential"}, "V1": {"name": "zero"}}}"#;
        assert!(matches!(parse_recipe(text), Err(RecipeError::UnexpectedEll)));
        let text = r#"{"schema": "radial-compose/recipe/v1", "engine": "higher_ell",
            "potentials": {"V0": {"name": "exponential"}, "V1": {"name": "zero"}}}"#;
        assert!(matches!(parse_recipe(text), Err(RecipeError::MissingEll)));
    }

    #[test]
    fn bad_parameter_is_reported_with_slot() {
        let text = r#"{"schema": "radial-compose/recipe/v1", "engine": "theorem1",
            "potentials": {"V0": {"name": "zero"}, "V": {"name": "exponential", "params": {"mu": -1}}}}"#;
        let err = parse_recipe(text).unwrap_err();
        assert!(err.to_string().contains("potentials.V"), "{err}");
    }
}
