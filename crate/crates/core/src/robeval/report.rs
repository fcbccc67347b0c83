use std::fmt::Write as _;

use super::protocol::{ProtocolError, RobustnessReport, ScenarioSpec};
use crate::models::Arch;
use crate::posbias::BiasMode;

/// `↑1.94` / `↓1.17` for a difference given in percentage points.
pub fn format_delta(pp: f64) -> String {
    if pp < 0.0 {
        format!("↓{:.2}", -pp)
    } else {
        format!("↑{:.2}", pp)
    }
}

fn columns(report: &RobustnessReport) -> Vec<ScenarioSpec> {
    let mut specs: Vec<ScenarioSpec> = report.cells.iter().map(|c| c.spec).collect();
    specs.sort();
    specs.dedup();
    specs
}

/// Markdown table: one row per model and bias mode, an accuracy and an F1
/// column per (training domain, scenario). Scores are percentages; biased
/// rows carry their difference from the same model without bias.
pub fn render_markdown(report: &RobustnessReport) -> Result<String, ProtocolError> {
    if report.cells.is_empty() {
        return Err(ProtocolError::Empty);
    }
    let cols = columns(report);
    let mut rows: Vec<(Arch, BiasMode)> = Vec::new();
    for c in &report.cells {
        if !rows.contains(&(c.arch, c.mode)) {
            rows.push((c.arch, c.mode));
        }
    }

    let mut out = String::new();
    out.push_str("| Model |");
    for s in &cols {
        let dom = s.train_domain.short();
        let _ = write!(out, " {} {} Acc. | {} {} F1 |", capital(dom), s.scenario.title(), capital(dom), s.scenario.title());
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &cols {
        out.push_str("---|---|");
    }
    out.push('\n');
    for (arch, mode) in rows {
        let name = match mode {
            BiasMode::None => arch.display_name().to_string(),
            m => format!("&nbsp;&nbsp;w/ {m}"),
        };
        let _ = write!(out, "| {name} |");
        for s in &cols {
            match report.cell(arch, mode, *s) {
                Some(cell) => {
                    let mean = cell.mean();
                    let d = report.delta_vs_baseline(cell);
                    let acc = format!("{:.2}", 100.0 * mean.accuracy);
                    let f1 = format!("{:.2}", 100.0 * mean.macro_f1);
                    match d {
                        Some(d) => {
                            let _ = write!(
                                out,
                                " {acc} {} | {f1} {} |",
                                format_delta(100.0 * d.accuracy),
                                format_delta(100.0 * d.macro_f1)
                            );
                        }
                        None => {
                            let _ = write!(out, " {acc} | {f1} |");
                        }
                    }
                }
                None => out.push_str(" – | – |"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

fn capital(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Per-seed rows: `model,bias_mode,scenario,seed,accuracy,macro_f1`.
pub fn render_csv(report: &RobustnessReport) -> Result<String, ProtocolError> {
    if report.cells.is_empty() {
        return Err(ProtocolError::Empty);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| ProtocolError::Render(e.to_string());
    w.write_record(["model", "bias_mode", "scenario", "seed", "accuracy", "macro_f1"])
        .map_err(io)?;
    for c in &report.cells {
        for s in &c.per_seed {
            w.write_record([
                c.arch.as_str().to_string(),
                c.mode.as_str().to_string(),
                c.spec.label(),
                s.seed.to_string(),
                s.metrics.accuracy.to_string(),
                s.metrics.macro_f1.to_string(),
            ])
            .map_err(io)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| ProtocolError::Render(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 fields"))
}
