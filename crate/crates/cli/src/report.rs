//! Per-group correct-count tables with a final `Total` row.
//!
//! A single evaluation gives `group,correct,total`. Several evaluations of
//! the same dataset give one column of correct counts per run after the
//! shared `total` column, the layout used to compare encoders.

use std::fmt::Write as _;

use prooflens_core::decoder::TacticEval;

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    /// Group name and one count per non-name column.
    pub rows: Vec<(String, Vec<usize>)>,
}

impl Table {
    pub fn from_evals(runs: &[(String, TacticEval)]) -> Result<Table> {
        if let [(_, eval)] = runs {
            let mut rows: Vec<(String, Vec<usize>)> =
                eval.groups.iter().map(|g| (g.group.clone(), vec![g.correct, g.total])).collect();
            rows.push(("Total".into(), vec![eval.correct(), eval.total()]));
            return Ok(Table {
                header: ["group", "correct", "total"].map(String::from).to_vec(),
                rows,
            });
        }
        let mut header = vec!["group".to_string(), "total".to_string()];
        header.extend(runs.iter().map(|(label, _)| label.clone()));
        let first = runs.first().map(|(_, e)| e.clone()).unwrap_or_default();
        let mut rows = Vec::with_capacity(first.groups.len() + 1);
        for (k, g) in first.groups.iter().enumerate() {
            let mut counts = vec![g.total];
            for (label, eval) in runs {
                match eval.groups.get(k) {
                    Some(other) if other.group == g.group && other.total == g.total => counts.push(other.correct),
                    _ => {
                        return Err(CliError::Usage(format!(
                            "run {label} does not cover the same groups as {}",
                            runs[0].0
                        )))
                    }
                }
            }
            rows.push((g.group.clone(), counts));
        }
        if runs.iter().any(|(_, e)| e.groups.len() != first.groups.len()) {
            return Err(CliError::Usage("runs cover different numbers of groups".into()));
        }
        let mut total = vec![first.total()];
        total.extend(runs.iter().map(|(_, e)| e.correct()));
        rows.push(("Total".into(), total));
        Ok(Table { header, rows })
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for (group, counts) in &self.rows {
            out.push_str(group);
            for c in counts {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain text: names left-aligned, counts right-aligned, a rule
    /// above the `Total` row.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = core::iter::once(self.header.clone())
            .chain(
                self.rows
                    .iter()
                    .map(|(g, counts)| core::iter::once(g.clone()).chain(counts.iter().map(usize::to_string)).collect()),
            )
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| cells.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let line = |row: &[String]| {
            let mut s = String::new();
            for (c, cell) in row.iter().enumerate() {
                if c == 0 {
                    let _ = write!(s, "{cell:<w$}", w = widths[0]);
                } else {
                    let _ = write!(s, "  {cell:>w$}", w = widths[c]);
                }
            }
            s.trim_end().to_string() + "\n"
        };
        let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)) + "\n";
        let mut out = line(&cells[0]);
        out.push_str(&rule);
        for (i, row) in cells[1..].iter().enumerate() {
            if i + 1 == self.rows.len() {
                out.push_str(&rule);
            }
            out.push_str(&line(row));
        }
        out
    }
}
