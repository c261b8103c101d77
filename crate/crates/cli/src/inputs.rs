//! File loading and name resolution shared by the commands.

use std::path::Path;

use anyhow::{bail, Context, Result};
use qmoment_core::algebra::Level;
use qmoment_core::scenario::DEFAULT_NS_TOLERANCE;
use qmoment_core::{bell, Behavior, BellInequality, CorrelatorData};

pub fn load_behavior(path: &Path) -> Result<Behavior> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading behavior file {}", path.display()))?;
    Behavior::from_json(&text, DEFAULT_NS_TOLERANCE)
        .with_context(|| format!("parsing behavior file {}", path.display()))
}

/// Resolves a catalog name (chsh, cglmp with --d, is, i3322) or falls back
/// to reading the argument as an inequality file.
pub fn resolve_inequality(name: &str, d: Option<usize>) -> Result<BellInequality> {
    let ineq = match name.to_ascii_lowercase().as_str() {
        "chsh" => Some(bell::chsh()),
        "cglmp" => Some(bell::cglmp(d.unwrap_or(3))?),
        "is" | "i_s" => Some(bell::i_s()),
        "i3322" => Some(bell::i3322()),
        _ => None,
    };
    if let Some(ineq) = ineq {
        if d.is_some() && !name.eq_ignore_ascii_case("cglmp") {
            bail!("--d only applies to the cglmp family");
        }
        return Ok(ineq);
    }
    let path = Path::new(name);
    let text = std::fs::read_to_string(path).with_context(|| {
        format!(
            "{name:?} is not a catalog name (chsh, cglmp, is, i3322) and \
             reading it as a file failed"
        )
    })?;
    BellInequality::from_json(&text)
        .with_context(|| format!("parsing inequality file {}", path.display()))
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CorrelatorFile {
    singles: [f64; 4],
    joints: [f64; 4],
}

/// Loads correlator data from either a raw correlator document or a
/// behavior file in a two-input binary scenario.
pub fn load_correlators(path: &Path) -> Result<CorrelatorData> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading data file {}", path.display()))?;
    let probe: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if probe.get("singles").is_some() {
        let file: CorrelatorFile = serde_json::from_value(probe)
            .with_context(|| format!("parsing correlator file {}", path.display()))?;
        return Ok(CorrelatorData::new(file.singles, file.joints)?);
    }
    let behavior = Behavior::from_json(&text, DEFAULT_NS_TOLERANCE)
        .with_context(|| format!("parsing behavior file {}", path.display()))?;
    Ok(CorrelatorData::from_behavior(&behavior)?)
}

/// The escalation chain ending at a level label: integer levels first,
/// then the label's token extensions one at a time.
///
/// "2" gives [1, 2]; "1+AB+AA'B" gives [1, 1+AB, 1+AB+AA'B].
pub fn level_ladder(label: &str) -> Result<Vec<Level>> {
    let target: Level = label.trim().parse()?;
    let mut out: Vec<Level> = (1..=target.base()).map(Level::Integer).collect();
    if !matches!(target, Level::Integer(_)) {
        let parts: Vec<&str> = label.trim().split('+').collect();
        for k in 1..parts.len() {
            out.push(parts[..=k].join("+").parse()?);
        }
    }
    Ok(out)
}
