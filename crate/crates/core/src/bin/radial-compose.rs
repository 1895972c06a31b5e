use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use radial_compose::catalog::catalog_list;
use radial_compose::recipe::{
    artifact_stem, load_recipe, report_json, run, write_plots, write_report, RecipeError, RunOutcome, OUT_DIR_ENV,
};

#[derive(Parser)]
#[command(name = "radial-compose", version, about = "Compose and verify explicitly solvable radial potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the closed-form catalog.
    Catalog {
        /// Only entries carrying this tag (e.g. `singular`).
        #[arg(long)]
        filter: Option<String>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Build and verify a recipe, writing the report (and plots if requested).
    Compose {
        recipe: PathBuf,
        /// Residual tolerance, overriding the recipe.
        #[arg(long)]
        tol: Option<f64>,
        /// Output directory.
        #[arg(long, env = OUT_DIR_ENV, default_value = ".")]
        out: PathBuf,
    },
    /// Build and verify a recipe, printing the report to stdout.
    Verify {
        recipe: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Build a recipe and write plot tables (r, V, phi, x) as CSV.
    ExportPlot {
        recipe: PathBuf,
        #[arg(long, env = OUT_DIR_ENV)]
        out: PathBuf,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn execute(recipe_path: &Path, tol: Option<f64>) -> Result<RunOutcome, RecipeError> {
    if let Some(t) = tol {
        if !(t > 0.0) {
            return Err(RecipeError::Value {
                field: "--tol".into(),
                detail: format!("must be positive, got {t}"),
            });
        }
    }
    let recipe = load_recipe(recipe_path)?;
    run(&recipe, tol)
}

fn summary(outcome: &RunOutcome) -> String {
    let mut lines = Vec::new();
    for level in &outcome.report.levels {
        lines.push(format!(
            "level {}: {} residual {:.3e} nodes {}/{} {}",
            level.depth,
            level.engine,
            level.residual_max,
            level.node_count_inner.map_or("?".into(), |n| n.to_string()),
            level.node_count_composed.map_or("?".into(), |n| n.to_string()),
            if level.passed { "PASS" } else { "FAIL" },
        ));
    }
    if let Some(f) = &outcome.report.failure {
        lines.push(format!("failure: {f}"));
    }
    lines.push(if outcome.report.passed { "overall: PASS" } else { "overall: FAIL" }.to_string());
    lines.join("\n")
}

fn io_failure(what: &str, e: std::io::Error) -> ExitCode {
    eprintln!("error: cannot write {what}: {e}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog { filter, json } => {
            let entries = catalog_list(filter.as_deref());
            if json {
                println!("{}", serde_json::to_string_pretty(&entries).expect("listing serializes"));
            } else {
                for e in &entries {
                    let params: Vec<String> = e.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    println!(
                        "{:<22} {:<34} defaults [{}]  valid: {}  tags: {}",
                        e.name.as_str(),
                        e.formula,
                        params.join(", "),
                        e.validity,
                        e.tags.join(",")
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Command::Compose { recipe, tol, out } => match execute(&recipe, tol) {
            Ok(outcome) => {
                let stem = artifact_stem(&recipe);
                if outcome.report.recipe.outputs.report {
                    match write_report(&out, &stem, &outcome.report) {
                        Ok(path) => eprintln!("report: {}", path.display()),
                        Err(e) => return io_failure("report", e),
                    }
                }
                if outcome.report.recipe.outputs.plot {
                    match write_plots(&out, &stem, &outcome.records) {
                        Ok(paths) => paths.iter().for_each(|p| eprintln!("plot: {}", p.display())),
                        Err(e) => return io_failure("plot data", e),
                    }
                }
                println!("{}", summary(&outcome));
                ExitCode::from(outcome.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::Verify { recipe, tol } => match execute(&recipe, tol) {
            Ok(outcome) => {
                println!("{}", report_json(&outcome.report));
                eprintln!("{}", summary(&outcome));
                ExitCode::from(outcome.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Command::ExportPlot { recipe, out, tol } => match execute(&recipe, tol) {
            Ok(outcome) => {
                match write_plots(&out, &artifact_stem(&recipe), &outcome.records) {
                    Ok(paths) => paths.iter().for_each(|p| println!("{}", p.display())),
                    Err(e) => return io_failure("plot data", e),
                }
                ExitCode::from(outcome.exit_code() as u8)
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
