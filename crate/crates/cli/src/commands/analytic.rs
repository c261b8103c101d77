//! Closed-form first-level membership for two-input binary correlators.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;

use anyhow::Result;
use qmoment_core::{correlator_only_condition, q1_membership, ArcsinReport, ArcsinVerdict};
use serde_json::json;

use crate::inputs;
use crate::output::{self, Format};

fn verdict_cell(v: ArcsinVerdict) -> &'static str {
    match v {
        ArcsinVerdict::Member => "member",
        ArcsinVerdict::NotMember => "not-member",
        ArcsinVerdict::DegenerateDeterministic => "degenerate-deterministic",
    }
}

pub fn run(data: &Path, tolerance: f64, format: Format) -> Result<ExitCode> {
    let data = inputs::load_correlators(data)?;
    let full = q1_membership(&data, tolerance);
    let raw = correlator_only_condition(&data);

    let tests: [(&str, &ArcsinReport); 2] =
        [("first-level", &full), ("correlator-only", &raw)];
    match format {
        Format::Table => {
            let cells: Vec<Vec<String>> = tests
                .iter()
                .map(|(name, r)| {
                    vec![
                        name.to_string(),
                        verdict_cell(r.verdict).into(),
                        output::cell(r.max_abs),
                        output::cell(PI),
                    ]
                })
                .collect();
            print!(
                "{}",
                output::render_table(&["test", "verdict", "max-arcsin-sum", "bound"], &cells)
            );
        }
        Format::LineRecords => {
            for (name, r) in &tests {
                let mut fields = vec![
                    ("test", name.to_string()),
                    ("verdict", verdict_cell(r.verdict).into()),
                    ("max_abs", output::float(r.max_abs)),
                    ("bound", output::float(PI)),
                ];
                for (k, v) in ["s00", "s01", "s10", "s11"].into_iter().zip(r.values) {
                    fields.push((k, output::float(v)));
                }
                println!("{}", output::record("analytic", &fields));
            }
        }
        Format::Document => {
            let report = |r: &ArcsinReport| {
                json!({
                    "verdict": verdict_cell(r.verdict),
                    "values": r.values.to_vec(),
                    "max_abs": r.max_abs,
                    "bound": PI,
                })
            };
            println!(
                "{:#}",
                json!({
                    "command": "analytic",
                    "singles": data.singles.to_vec(),
                    "joints": data.joints.to_vec(),
                    "first_level": report(&full),
                    "correlator_only": report(&raw),
                })
            );
        }
    }
    Ok(ExitCode::from(u8::from(!full.is_member())))
}
