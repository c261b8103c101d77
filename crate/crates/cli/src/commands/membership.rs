//! Certificate search for a behavior, escalating level by level.

use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use qmoment_core::scenario::deterministic_behaviors;
use qmoment_core::{
    membership, MembershipOptions, MembershipOutcome, Party, RejectionCertificate,
    RelaxationStructure, Scenario,
};
use serde_json::json;

use crate::inputs;
use crate::output::{self, Format};

struct LevelRow {
    level: String,
    size: usize,
    lambda_max: f64,
    verdict: &'static str,
    status: String,
    iterations: usize,
    gap: f64,
}

pub fn run(
    behavior_path: &Path,
    level: &str,
    tol_feas: Option<f64>,
    margin: Option<f64>,
    out: Option<&Path>,
    format: Format,
) -> Result<ExitCode> {
    let behavior = inputs::load_behavior(behavior_path)?;
    let mut options = MembershipOptions {
        solver: super::solver_options(tol_feas),
        ..MembershipOptions::default()
    };
    if let Some(m) = margin {
        options.margin = m;
    }

    let mut rows = Vec::new();
    let mut rejection = None;
    for level in inputs::level_ladder(level)? {
        let structure = RelaxationStructure::build(behavior.scenario(), &level)
            .with_context(|| format!("building the level-{level} relaxation"))?;
        let report = membership(&structure, &behavior, &options)
            .with_context(|| format!("membership solve at level {level}"))?;
        rows.push(LevelRow {
            level: level.to_string(),
            size: structure.n(),
            lambda_max: report.lambda_max,
            verdict: if report.is_member() { "member" } else { "rejected" },
            status: report.status.to_string(),
            iterations: report.iterations,
            gap: report.gap,
        });
        if let MembershipOutcome::Excluded { certificate } = report.outcome {
            // deeper levels only shrink the accepted set
            rejection = Some((level.to_string(), certificate));
            break;
        }
    }

    let certificate = rejection
        .as_ref()
        .map(|(level, c)| certificate_document(behavior.scenario(), level, c))
        .transpose()?;
    if let (Some(doc), Some(path)) = (&certificate, out) {
        std::fs::write(path, format!("{:#}\n", doc))
            .with_context(|| format!("writing certificate to {}", path.display()))?;
    }

    match format {
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.level.clone(),
                        r.size.to_string(),
                        output::cell(r.lambda_max),
                        r.verdict.into(),
                        r.status.clone(),
                        r.iterations.to_string(),
                    ]
                })
                .collect();
            print!(
                "{}",
                output::render_table(
                    &["level", "size", "lambda-max", "verdict", "status", "iterations"],
                    &cells,
                )
            );
            if let Some(doc) = &certificate {
                match out {
                    Some(path) => println!("certificate written to {}", path.display()),
                    None => println!("{doc:#}"),
                }
            }
        }
        Format::LineRecords => {
            for r in &rows {
                println!(
                    "{}",
                    output::record(
                        "membership",
                        &[
                            ("level", r.level.clone()),
                            ("size", r.size.to_string()),
                            ("lambda_max", output::float(r.lambda_max)),
                            ("verdict", r.verdict.into()),
                            ("status", r.status.clone()),
                            ("iterations", r.iterations.to_string()),
                            ("gap", output::float(r.gap)),
                        ],
                    )
                );
            }
            if let Some((level, c)) = &rejection {
                println!(
                    "{}",
                    output::record(
                        "rejection",
                        &[
                            ("level", level.clone()),
                            ("value", output::float(c.value)),
                            (
                                "certificate",
                                out.map_or("stdout".into(), |p| p.display().to_string()),
                            ),
                        ],
                    )
                );
                if out.is_none() {
                    // compact, so the emission still occupies a single line
                    println!("{}", certificate.as_ref().expect("built above"));
                }
            }
        }
        Format::Document => {
            let doc = json!({
                "command": "membership",
                "behavior": behavior_path.display().to_string(),
                "levels": rows.iter().map(|r| json!({
                    "level": r.level,
                    "size": r.size,
                    "lambda_max": r.lambda_max,
                    "verdict": r.verdict,
                    "status": r.status,
                    "iterations": r.iterations,
                    "gap": r.gap,
                })).collect::<Vec<_>>(),
                "member": rejection.is_none(),
                "certificate": certificate,
            });
            println!("{doc:#}");
        }
    }
    Ok(ExitCode::from(u8::from(rejection.is_some())))
}

/// The separating functional as an inequality file: nonnegative on every
/// behavior the relaxation accepts, negative on the rejected one. The
/// local bound is recomputed by exhaustive deterministic enumeration, the
/// same arithmetic the loader audits against, so the file re-parses.
fn certificate_document(
    scenario: &Scenario,
    level: &str,
    certificate: &RejectionCertificate,
) -> Result<serde_json::Value> {
    let f = &certificate.functional;
    let alice: Vec<_> = f
        .alice
        .iter()
        .map(|&(a, w)| {
            let (x, k) = scenario.input_of(Party::Alice, a);
            json!([x, k, w])
        })
        .collect();
    let bob: Vec<_> = f
        .bob
        .iter()
        .map(|&(b, w)| {
            let (y, k) = scenario.input_of(Party::Bob, b);
            json!([y, k, w])
        })
        .collect();
    let joint: Vec<_> = f
        .joint
        .iter()
        .map(|&(a, b, w)| {
            let (x, ka) = scenario.input_of(Party::Alice, a);
            let (y, kb) = scenario.input_of(Party::Bob, b);
            json!([x, ka, y, kb, w])
        })
        .collect();
    let local_bound = deterministic_behaviors(scenario)
        .map(|b| f.eval(&b))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(json!({
        "format": "bell-inequality/1",
        "name": format!("rejection-at-level-{level}"),
        "scenario": scenario,
        "constant": f.constant,
        "alice": alice,
        "bob": bob,
        "joint": joint,
        "local_bound": local_bound,
        "note": format!(
            "separating functional from a rejected membership test at level \
             {level}; evaluates to {} on the rejected behavior and stays \
             nonnegative on every behavior the relaxation accepts",
            certificate.value
        ),
    }))
}
