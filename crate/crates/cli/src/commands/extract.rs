//! Model reconstruction: find a certificate whose ranks loop, then rebuild
//! the state and projectors it encodes.

use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use faer::Mat;
use qmoment_core::{
    membership, minimum_trace_certificate, Level, MembershipOptions, MembershipOutcome,
    NumericCertificate, RankLoopOutcome, RankLoopReport, Reconstruction, RelaxationStructure,
};
use serde_json::json;

use crate::inputs;
use crate::output::{self, Format};

struct Attempt {
    source: &'static str,
    report: RankLoopReport,
}

pub fn run(
    behavior_path: &Path,
    level: &str,
    trace_objective: bool,
    tol_feas: Option<f64>,
    tol_rank: Option<f64>,
    out: Option<&Path>,
    format: Format,
) -> Result<ExitCode> {
    let behavior = inputs::load_behavior(behavior_path)?;
    let level: Level = level.trim().parse()?;
    let structure = RelaxationStructure::build(behavior.scenario(), &level)
        .with_context(|| format!("building the level-{level} relaxation"))?;
    let solver = super::solver_options(tol_feas);

    // candidate certificates, cheapest first: the membership witness is a
    // byproduct of the member check, but interior behaviors give it full
    // rank, so a trace-minimizing solve hunts for a low-rank one after it
    let mut next: Option<(&'static str, Mat<f64>)> = Some(if trace_objective {
        (
            "trace-minimized",
            minimum_trace_certificate(&structure, &behavior, &solver)
                .context("trace minimization failed; is the behavior a member at this level?")?,
        )
    } else {
        let options = MembershipOptions {
            solver,
            ..MembershipOptions::default()
        };
        let report = membership(&structure, &behavior, &options)
            .with_context(|| format!("membership solve at level {level}"))?;
        match report.outcome {
            MembershipOutcome::Member { witness } => ("witness", witness),
            MembershipOutcome::Excluded { certificate } => {
                emit_rejected(format, &level, report.lambda_max, certificate.value);
                return Ok(ExitCode::from(1));
            }
        }
    });

    let mut tried_trace = trace_objective;
    let mut attempts: Vec<Attempt> = Vec::new();
    let mut found: Option<(usize, Reconstruction)> = None;
    while let Some((source, matrix)) = next.take() {
        let certificate = |band_factor: f64| {
            let mut c = NumericCertificate::new(&structure, &matrix)?.tightened(band_factor);
            if let Some(t) = tol_rank {
                c = c.with_rank_tolerance(t);
            }
            Ok::<_, qmoment_core::Error>(c)
        };
        let mut band_factor = 1.0;
        let mut report = certificate(band_factor)?.detect_rank_loop()?;
        if report.outcome == RankLoopOutcome::Inconclusive {
            band_factor = 10.0;
            report = certificate(band_factor)?.detect_rank_loop()?;
        }
        let looped = matches!(report.outcome, RankLoopOutcome::Loop { .. });
        attempts.push(Attempt { source, report });
        if looped {
            let reconstruction = certificate(band_factor)?
                .reconstruct_model()
                .context("rebuilding the model from the looped certificate")?;
            found = Some((attempts.len() - 1, reconstruction));
        } else if !tried_trace {
            tried_trace = true;
            next = Some((
                "trace-minimized",
                minimum_trace_certificate(&structure, &behavior, &solver)
                    .context("trace minimization after the witness carried no rank loop")?,
            ));
        }
    }

    if let (Some((_, reconstruction)), Some(path)) = (&found, out) {
        let text = reconstruction.model.to_json()?;
        std::fs::write(path, text)
            .with_context(|| format!("writing model to {}", path.display()))?;
    }
    render(format, &level, &attempts, &found, out)?;
    Ok(match &found {
        Some((_, r)) if r.accepted => ExitCode::SUCCESS,
        _ => ExitCode::from(1),
    })
}

fn emit_rejected(format: Format, level: &Level, lambda_max: f64, value: f64) {
    match format {
        Format::Table => println!(
            "behavior rejected at level {level} (lambda-max {lambda_max:.3e}); \
             nothing to extract. Run the membership command for the certificate."
        ),
        Format::LineRecords => println!(
            "{}",
            output::record(
                "rejected",
                &[
                    ("level", level.to_string()),
                    ("lambda_max", output::float(lambda_max)),
                    ("value", output::float(value)),
                ],
            )
        ),
        Format::Document => println!(
            "{:#}",
            json!({
                "command": "extract",
                "level": level.to_string(),
                "rejected": true,
                "lambda_max": lambda_max,
            })
        ),
    }
}

fn render(
    format: Format,
    level: &Level,
    attempts: &[Attempt],
    found: &Option<(usize, Reconstruction)>,
    out: Option<&Path>,
) -> Result<()> {
    match format {
        Format::Table => {
            let cells: Vec<Vec<String>> = attempts
                .iter()
                .map(|a| {
                    vec![
                        a.source.to_string(),
                        outcome_cell(&a.report.outcome),
                        a.report.reference_rank.to_string(),
                        a.report.reference_size.to_string(),
                        pair_summary(&a.report),
                    ]
                })
                .collect();
            print!(
                "{}",
                output::render_table(
                    &["certificate", "rank-loop", "ref-rank", "ref-size", "pair-ranks"],
                    &cells,
                )
            );
            match found {
                Some((_, r)) => {
                    println!(
                        "model: dim {}, reproduction gap {}, accepted {}",
                        r.model.dim,
                        output::defect(r.reproduction),
                        if r.accepted { "yes" } else { "no" },
                    );
                    println!(
                        "defects: idempotence {}, orthogonality {}, completeness {}, \
                         commutator {}, state-norm {}",
                        output::defect(r.defects.idempotence),
                        output::defect(r.defects.orthogonality),
                        output::defect(r.defects.completeness),
                        output::defect(r.defects.commutator),
                        output::defect(r.defects.state_norm),
                    );
                    if let Some(path) = out {
                        println!("model written to {}", path.display());
                    }
                }
                None => println!("no rank loop at level {level}; no model extracted"),
            }
        }
        Format::LineRecords => {
            for a in attempts {
                println!(
                    "{}",
                    output::record(
                        "rank_loop",
                        &[
                            ("certificate", a.source.to_string()),
                            ("outcome", outcome_cell(&a.report.outcome)),
                            ("reference_rank", a.report.reference_rank.to_string()),
                            ("reference_size", a.report.reference_size.to_string()),
                        ],
                    )
                );
                for p in &a.report.pairs {
                    println!(
                        "{}",
                        output::record(
                            "pair",
                            &[
                                ("certificate", a.source.to_string()),
                                ("alice_input", p.alice_input.to_string()),
                                ("bob_input", p.bob_input.to_string()),
                                ("rank", p.rank.to_string()),
                                ("size", p.size.to_string()),
                                ("uncertain", p.uncertain.to_string()),
                            ],
                        )
                    );
                }
            }
            if let Some((_, r)) = found {
                println!(
                    "{}",
                    output::record(
                        "model",
                        &[
                            ("dim", r.model.dim.to_string()),
                            ("idempotence", output::float(r.defects.idempotence)),
                            ("orthogonality", output::float(r.defects.orthogonality)),
                            ("completeness", output::float(r.defects.completeness)),
                            ("commutator", output::float(r.defects.commutator)),
                            ("state_norm", output::float(r.defects.state_norm)),
                            ("reproduction", output::float(r.reproduction)),
                            ("accepted", r.accepted.to_string()),
                            (
                                "out",
                                out.map_or("none".into(), |p| p.display().to_string()),
                            ),
                        ],
                    )
                );
            }
        }
        Format::Document => {
            let model = found
                .as_ref()
                .map(|(_, r)| -> Result<serde_json::Value> {
                    Ok(serde_json::from_str(&r.model.to_json()?)?)
                })
                .transpose()?;
            let doc = json!({
                "command": "extract",
                "level": level.to_string(),
                "attempts": attempts.iter().map(|a| json!({
                    "certificate": a.source,
                    "outcome": outcome_cell(&a.report.outcome),
                    "reference_rank": a.report.reference_rank,
                    "reference_size": a.report.reference_size,
                    "pairs": a.report.pairs.iter().map(|p| json!({
                        "alice_input": p.alice_input,
                        "bob_input": p.bob_input,
                        "rank": p.rank,
                        "size": p.size,
                        "uncertain": p.uncertain,
                    })).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "reconstruction": found.as_ref().map(|(i, r)| json!({
                    "certificate": attempts[*i].source,
                    "dim": r.model.dim,
                    "defects": {
                        "idempotence": r.defects.idempotence,
                        "orthogonality": r.defects.orthogonality,
                        "completeness": r.defects.completeness,
                        "commutator": r.defects.commutator,
                        "state_norm": r.defects.state_norm,
                    },
                    "reproduction": r.reproduction,
                    "accepted": r.accepted,
                })),
                "model": model,
            });
            println!("{doc:#}");
        }
    }
    Ok(())
}

fn outcome_cell(outcome: &RankLoopOutcome) -> String {
    match outcome {
        RankLoopOutcome::Loop { rank } => format!("yes(rank {rank})"),
        RankLoopOutcome::NoLoop => "no".into(),
        RankLoopOutcome::Inconclusive => "inconclusive".into(),
    }
}

/// Pair ranks in input order, compact: "r0,0=4 r0,1=4 ...".
fn pair_summary(report: &RankLoopReport) -> String {
    report
        .pairs
        .iter()
        .map(|p| format!("r{},{}={}", p.alice_input, p.bob_input, p.rank))
        .collect::<Vec<_>>()
        .join(" ")
}
