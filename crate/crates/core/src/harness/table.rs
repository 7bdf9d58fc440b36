//! Attack score tables: rows are model/defense pairs, columns access levels.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::privacy::{AccessLevel, AttackResult, Score};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub defense: String,
    /// One entry per table column; `None` when the level was not run.
    pub cells: Vec<Option<AttackResult>>,
    /// Shuffled-label reference per column.
    pub chance: Vec<Option<AttackResult>>,
    /// Shadow targets that failed to train.
    pub failures: usize,
}

impl ScoreRow {
    pub fn label(&self) -> String {
        format!("{} / {}", self.model, self.defense)
    }

    pub fn cell(&self, col: usize) -> Option<&Score> {
        self.cells.get(col)?.as_ref().map(|r| &r.overall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub columns: Vec<AccessLevel>,
    pub rows: Vec<ScoreRow>,
}

impl ScoreTable {
    pub fn new(columns: Vec<AccessLevel>) -> ScoreTable {
        ScoreTable { columns, rows: Vec::new() }
    }

    pub fn column(&self, level: AccessLevel) -> Option<usize> {
        self.columns.iter().position(|&c| c == level)
    }

    pub fn row(&self, model: &str, defense: &str) -> Option<&ScoreRow> {
        self.rows.iter().find(|r| r.model == model && r.defense == defense)
    }

    pub fn get(&self, model: &str, defense: &str, level: AccessLevel) -> Option<&AttackResult> {
        self.row(model, defense)?.cells.get(self.column(level)?)?.as_ref()
    }

    pub fn chance(&self, model: &str, defense: &str, level: AccessLevel) -> Option<&AttackResult> {
        self.row(model, defense)?.chance.get(self.column(level)?)?.as_ref()
    }

    /// Concatenate tables; columns are merged in canonical access order.
    pub fn merge(tables: &[ScoreTable]) -> Result<ScoreTable> {
        if tables.is_empty() {
            return argument("nothing to merge");
        }
        let mut columns: Vec<AccessLevel> = tables.iter().flat_map(|t| t.columns.iter().copied()).collect();
        columns.sort();
        columns.dedup();
        let mut out = ScoreTable::new(columns);
        for t in tables {
            for r in &t.rows {
                let pick = |v: &[Option<AttackResult>]| -> Vec<Option<AttackResult>> {
                    out.columns.iter().map(|c| t.column(*c).and_then(|i| v[i].clone())).collect()
                };
                out.rows.push(ScoreRow { cells: pick(&r.cells), chance: pick(&r.chance), ..r.clone() });
            }
        }
        Ok(out)
    }

    /// Plain-text table with `mean ± std` cells.
    pub fn render(&self) -> String {
        let mut header = vec!["model / defense".to_string()];
        header.extend(self.columns.iter().map(|c| c.header()));
        let mut lines = vec![header];
        for r in &self.rows {
            let mut line = vec![r.label()];
            line.extend((0..self.columns.len()).map(|c| r.cell(c).map_or("-".into(), |s| s.to_string())));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|c| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| {
                    let pad = w - s.chars().count();
                    if c == 0 { format!("{s}{}", " ".repeat(pad)) } else { format!("{}{s}", " ".repeat(pad)) }
                })
                .collect();
            out += cells.join("  ").trim_end();
            out.push('\n');
            if i == 0 {
                out += &"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
                out.push('\n');
            }
        }
        out
    }

    /// Long form: model, defense, access, mean, std, chance_mean, chance_std.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "defense", "access", "mean", "std", "chance_mean", "chance_std"])?;
        for r in &self.rows {
            for (c, level) in self.columns.iter().enumerate() {
                let Some(s) = r.cell(c) else { continue };
                let ch = r.chance[c].as_ref().map(|x| x.overall);
                w.write_record([
                    r.model.clone(),
                    r.defense.clone(),
                    level.to_string(),
                    s.mean.to_string(),
                    s.std.to_string(),
                    ch.map_or(String::new(), |x| x.mean.to_string()),
                    ch.map_or(String::new(), |x| x.std.to_string()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(mean: f64) -> AttackResult {
        AttackResult {
            overall: Score { mean, std: 0.01 },
            per_label: vec![],
            repeats: vec![mean],
            degenerate: vec![],
        }
    }

    fn table() -> ScoreTable {
        let mut t = ScoreTable::new(vec![AccessLevel::Wbb(2), AccessLevel::Sbb, AccessLevel::Wb]);
        t.rows.push(ScoreRow {
            model: "LR".into(),
            defense: "vanilla".into(),
            cells: vec![Some(result(0.7)), Some(result(0.8)), None],
            chance: vec![Some(result(0.5)), None, None],
            failures: 0,
        });
        t
    }

    #[test]
    fn render_has_header_and_cells() {
        let text = table().render();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("model / defense"));
        assert!(lines[0].ends_with("WB"));
        assert!(lines[0].contains("2-WBB"));
        assert!(lines[2].contains("0.700 ± 0.010"));
        assert!(lines[2].ends_with('-'));
    }

    #[test]
    fn merge_aligns_columns() {
        let a = table();
        let mut b = ScoreTable::new(vec![AccessLevel::Wb, AccessLevel::Wbb(6)]);
        b.rows.push(ScoreRow {
            model: "NN".into(),
            defense: "vanilla".into(),
            cells: vec![Some(result(0.9)), Some(result(0.6))],
            chance: vec![None, None],
            failures: 0,
        });
        let m = ScoreTable::merge(&[a, b]).unwrap();
        assert_eq!(m.columns, vec![AccessLevel::Wbb(2), AccessLevel::Wbb(6), AccessLevel::Sbb, AccessLevel::Wb]);
        assert_eq!(m.get("NN", "vanilla", AccessLevel::Wb).unwrap().overall.mean, 0.9);
        assert_eq!(m.get("LR", "vanilla", AccessLevel::Sbb).unwrap().overall.mean, 0.8);
        assert!(m.get("LR", "vanilla", AccessLevel::Wbb(6)).is_none());
    }

    #[test]
    fn csv_skips_missing_cells() {
        let mut buf = Vec::new();
        table().write_csv_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("LR,vanilla,wbb2,0.7,0.01,0.5,0.01"));
    }
}
