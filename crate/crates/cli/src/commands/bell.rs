//! Upper bounds for a Bell functional, one relaxation level per row.

use std::process::ExitCode;

use anyhow::{Context, Result};
use qmoment_core::{bell_maximum, Level, RelaxationStructure};
use serde_json::json;

use crate::inputs;
use crate::output::{self, Format};

struct LevelRow {
    level: String,
    value: f64,
    size: usize,
    rank_loop: String,
    status: String,
    iterations: usize,
    gap: f64,
}

pub fn run(
    inequality: &str,
    d: Option<usize>,
    levels: &[String],
    tol_feas: Option<f64>,
    tol_rank: Option<f64>,
    format: Format,
    jobs: usize,
) -> Result<ExitCode> {
    let ineq = inputs::resolve_inequality(inequality, d)?;
    let options = super::solver_options(tol_feas);
    let parsed: Vec<Level> = levels
        .iter()
        .map(|s| s.trim().parse().map_err(anyhow::Error::from))
        .collect::<Result<_>>()?;

    let rows = super::parallel_map(parsed, jobs, |level| -> Result<LevelRow> {
        let structure = RelaxationStructure::build(ineq.scenario(), &level)?;
        let report = bell_maximum(&structure, ineq.functional(), &options)
            .with_context(|| format!("extremal solve at level {level}"))?;
        let rank_loop = super::rank_loop_cell(&structure, &report.optimizer, tol_rank)?;
        Ok(LevelRow {
            level: level.to_string(),
            value: report.value,
            size: structure.n(),
            rank_loop,
            status: report.status.to_string(),
            iterations: report.iterations,
            gap: report.gap,
        })
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .with_context(|| format!("bounding {}", ineq.name()))?;

    match format {
        Format::Table => {
            println!(
                "{}: scenario {}, local bound {}{}",
                ineq.name(),
                ineq.scenario(),
                ineq.local_bound(),
                ineq.reference_quantum()
                    .map_or(String::new(), |q| format!(", reference quantum {q}")),
            );
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.clone(),
                        output::cell(r.value),
                        r.size.to_string(),
                        r.rank_loop.clone(),
                        r.status.clone(),
                        r.iterations.to_string(),
                    ]
                })
                .collect();
            print!(
                "{}",
                output::render_table(
                    &["level", "value", "size", "rank-loop", "status", "iterations"],
                    &cells,
                )
            );
        }
        Format::LineRecords => {
            let mut fields = vec![
                ("name", ineq.name().to_string()),
                ("scenario", ineq.scenario().to_string()),
                ("local_bound", output::float(ineq.local_bound())),
            ];
            if let Some(q) = ineq.reference_quantum() {
                fields.push(("reference_quantum", output::float(q)));
            }
            println!("{}", output::record("inequality", &fields));
            for r in &rows {
                println!(
                    "{}",
                    output::record(
                        "bell",
                        &[
                            ("level", r.level.clone()),
                            ("value", output::float(r.value)),
                            ("size", r.size.to_string()),
                            ("rank_loop", r.rank_loop.clone()),
                            ("status", r.status.clone()),
                            ("iterations", r.iterations.to_string()),
                            ("gap", output::float(r.gap)),
                        ],
                    )
                );
            }
        }
        Format::Document => {
            let doc = json!({
                "command": "bell",
                "inequality": ineq.name(),
                "scenario": ineq.scenario(),
                "local_bound": ineq.local_bound(),
                "reference_quantum": ineq.reference_quantum(),
                "levels": rows.iter().map(|r| json!({
                    "level": r.level,
                    "value": r.value,
                    "size": r.size,
                    "rank_loop": r.rank_loop,
                    "status": r.status,
                    "iterations": r.iterations,
                    "gap": r.gap,
                })).collect::<Vec<_>>(),
            });
            println!("{doc:#}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
