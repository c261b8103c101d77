//! Writes a relaxation as a solver-ready sparse .dat-s file.

use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use qmoment_core::solver::membership::{bell_max_problem, membership_problem};
use qmoment_core::solver::sdpa::write_dat_s;
use qmoment_core::{Level, RelaxationStructure, SdpProblem};
use serde_json::json;

use crate::inputs;
use crate::output::{self, Format};

pub fn run(
    behavior: Option<&Path>,
    bell: Option<&str>,
    d: Option<usize>,
    level: &str,
    out: &Path,
    format: Format,
) -> Result<ExitCode> {
    let level: Level = level.trim().parse()?;
    // the program is min sum(c_k x_k) with slack sum(x_k F_k) - G >= 0;
    // `offset` records the constant to add back to recover the bound
    let (problem, what, offset): (SdpProblem, String, Option<f64>) = match (behavior, bell) {
        (Some(path), None) => {
            let b = inputs::load_behavior(path)?;
            let structure = RelaxationStructure::build(b.scenario(), &level)?;
            let problem = membership_problem(&structure, &b)?;
            (problem, format!("membership of {}", path.display()), None)
        }
        (None, Some(name)) => {
            let ineq = inputs::resolve_inequality(name, d)?;
            let structure = RelaxationStructure::build(ineq.scenario(), &level)?;
            let (problem, beta0) = bell_max_problem(&structure, ineq.functional())?;
            (problem, format!("extremal value of {}", ineq.name()), Some(beta0))
        }
        _ => bail!("pass exactly one of --behavior or --bell"),
    };
    write_dat_s(out, &problem).with_context(|| format!("writing {}", out.display()))?;

    // how the solver's optimum maps back to the quantity of interest
    let recover = match offset {
        Some(beta0) => format!("bound = {beta0} - objective"),
        None => "lambda-max = -objective".into(),
    };
    match format {
        Format::Table => {
            println!(
                "wrote {}: {} at level {level}, sdp block {}, lp block {}, \
                 {} constraints; {recover}",
                out.display(),
                what,
                problem.sdp_dim,
                problem.lp_dim,
                problem.constraints.len(),
            );
        }
        Format::LineRecords => {
            println!(
                "{}",
                output::record(
                    "export",
                    &[
                        ("path", out.display().to_string()),
                        ("program", what.clone()),
                        ("level", level.to_string()),
                        ("sdp_dim", problem.sdp_dim.to_string()),
                        ("lp_dim", problem.lp_dim.to_string()),
                        ("constraints", problem.constraints.len().to_string()),
                        (
                            "offset",
                            offset.map_or("none".into(), output::float),
                        ),
                    ],
                )
            );
        }
        Format::Document => {
            println!(
                "{:#}",
                json!({
                    "command": "export",
                    "path": out.display().to_string(),
                    "program": what,
                    "level": level.to_string(),
                    "sdp_dim": problem.sdp_dim,
                    "lp_dim": problem.lp_dim,
                    "constraints": problem.constraints.len(),
                    "offset": offset,
                    "recover": recover,
                })
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}
