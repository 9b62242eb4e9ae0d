//! Plain-text tables for theorem reports and sweep aggregates.

use crate::rational::Quantity;
use crate::theorems::{SweepTable, TheoremId, TheoremReport, TheoremVerdict};

const REPORT_HEADER: [&str; 6] = ["theorem", "verdict", "quantity", "exact", "decimal", "skip_reason"];
const SWEEP_HEADER: [&str; 5] = ["theorem", "holds", "violated", "skipped", "skip_reasons"];

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let last = cells.len() - 1;
        let mut out = String::new();
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i == last {
                out.push_str(cell);
            } else {
                out.push_str(&format!("{cell:<w$}  "));
            }
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
        out
    };
    let mut out = line(header.to_vec());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
    out
}

/// One row per intermediate of each report, exact and decimal side by side.
///
/// SKIPPED reports repeat their skip reason on every row.
pub fn report_render(reports: &[TheoremReport]) -> String {
    let mut rows = Vec::new();
    for r in reports {
        let reason = match (r.verdict, r.skip_reason) {
            (TheoremVerdict::Skipped, Some(s)) => s.describe().to_string(),
            _ => String::new(),
        };
        let mut push = |name: &str, value: Option<&Quantity>| {
            rows.push(vec![
                r.theorem_id.code().to_string(),
                r.verdict.to_string(),
                name.to_string(),
                value.map_or("-".into(), |v| v.to_string()),
                value.map_or("-".into(), |v| v.to_decimal()),
                reason.clone(),
            ]);
        };
        if r.intermediates.iter().next().is_none() {
            push("-", None);
        }
        for (name, value) in r.intermediates.iter() {
            push(name, Some(value));
        }
    }
    table(&REPORT_HEADER, &rows)
}

pub fn render_sweep(table_in: &SweepTable) -> String {
    let rows: Vec<Vec<String>> = TheoremId::ALL
        .iter()
        .map(|id| {
            let t = table_in.tally(*id);
            let reasons = t
                .skip_reasons
                .iter()
                .map(|(r, n)| format!("{}={n}", serde_json::to_value(r).unwrap().as_str().unwrap_or_default()))
                .collect::<Vec<_>>()
                .join(",");
            vec![
                id.code().to_string(),
                t.holds.to_string(),
                t.violated.to_string(),
                t.skipped.to_string(),
                reasons,
            ]
        })
        .collect();
    table(&SWEEP_HEADER, &rows)
}
