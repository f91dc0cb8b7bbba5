use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Outcome of one (dataset, model, measure) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellOutcome {
    Ok { coverage_pct: f64, scaled_auc: f64 },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub model: String,
    pub measure: String,
    pub outcome: CellOutcome,
}

/// Measures by datasets, each cell the mean over models, plus the row mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkTable {
    pub metric: String,
    pub datasets: Vec<String>,
    /// Sorted by `avg` descending; rows without any value go last.
    pub rows: Vec<TableRow>,
    pub footnotes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub measure: String,
    pub cells: Vec<Option<f64>>,
    pub avg: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn build(metric: &str, cells: &[CellResult], datasets: &[String], pick: impl Fn(&CellOutcome) -> Option<f64>) -> BenchmarkTable {
    let mut by: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    let mut measures = BTreeSet::new();
    let mut footnotes = Vec::new();
    for c in cells {
        measures.insert(c.measure.as_str());
        let slot = by.entry((c.measure.as_str(), c.dataset.as_str())).or_default();
        match (&c.outcome, pick(&c.outcome)) {
            (_, Some(v)) => slot.push(v),
            (CellOutcome::Failed { reason }, _) => {
                footnotes.push(format!("{}/{}/{}: {}", c.dataset, c.model, c.measure, reason))
            }
            _ => {}
        }
    }
    let mut rows: Vec<TableRow> = measures
        .into_iter()
        .map(|m| {
            let cells: Vec<Option<f64>> =
                datasets.iter().map(|d| by.get(&(m, d.as_str())).and_then(|v| mean(v))).collect();
            let present: Vec<f64> = cells.iter().flatten().copied().collect();
            TableRow { measure: m.to_string(), avg: mean(&present), cells }
        })
        .collect();
    rows.sort_by(|a, b| match (a.avg, b.avg) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.measure.cmp(&b.measure)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.measure.cmp(&b.measure),
    });
    BenchmarkTable { metric: metric.to_string(), datasets: datasets.to_vec(), rows, footnotes }
}

/// Coverage and scaled-AUC tables. Datasets keep their order of first
/// appearance; failed cells are left out of every mean and listed as
/// footnotes.
pub fn aggregate(cells: &[CellResult]) -> (BenchmarkTable, BenchmarkTable) {
    let mut datasets: Vec<String> = Vec::new();
    for c in cells {
        if !datasets.contains(&c.dataset) {
            datasets.push(c.dataset.clone());
        }
    }
    let cov = build("coverage", cells, &datasets, |o| match o {
        CellOutcome::Ok { coverage_pct, .. } => Some(*coverage_pct),
        _ => None,
    });
    let auc = build("auc", cells, &datasets, |o| match o {
        CellOutcome::Ok { scaled_auc, .. } => Some(*scaled_auc),
        _ => None,
    });
    (cov, auc)
}

impl BenchmarkTable {
    pub fn row(&self, measure: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.measure == measure)
    }

    /// 0-based position of a measure in the ranking.
    pub fn rank_of(&self, measure: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.measure == measure)
    }

    /// Full-precision CSV: `measure,<datasets...>,avg`; missing cells empty.
    pub fn to_csv(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut s = format!("measure,{},avg\n", self.datasets.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.cells.iter().map(|&c| fmt(c)).collect();
            let _ = writeln!(s, "{},{},{}", r.measure, cells.join(","), fmt(r.avg));
        }
        s
    }

    /// Aligned text with two decimals and numbered footnotes.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.2}"));
        let mut header = vec!["measure".to_string()];
        header.extend(self.datasets.iter().cloned());
        header.push("avg".to_string());
        let mut grid = vec![header];
        for r in &self.rows {
            let mut line = vec![r.measure.clone()];
            line.extend(r.cells.iter().map(|&c| fmt(c)));
            line.push(fmt(r.avg));
            grid.push(line);
        }
        let widths: Vec<usize> =
            (0..grid[0].len()).map(|j| grid.iter().map(|l| l[j].len()).max().unwrap_or(0)).collect();
        let mut s = format!("{} table\n", self.metric);
        for line in &grid {
            let cols: Vec<String> = line
                .iter()
                .enumerate()
                .map(|(j, c)| if j == 0 { format!("{c:<w$}", w = widths[j]) } else { format!("{c:>w$}", w = widths[j]) })
                .collect();
            let _ = writeln!(s, "{}", cols.join("  ").trim_end());
        }
        for (i, f) in self.footnotes.iter().enumerate() {
            let _ = writeln!(s, "[{}] excluded {}", i + 1, f);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok(d: &str, model: &str, m: &str, c: f64) -> CellResult {
        CellResult {
            dataset: d.into(),
            model: model.into(),
            measure: m.into(),
            outcome: CellOutcome::Ok { coverage_pct: c, scaled_auc: c / 100.0 },
        }
    }

    #[test]
    fn single_cell() {
        let (cov, auc) = aggregate(&[ok("a", "ridge", "kappa", 40.0)]);
        assert_eq!(cov.rows[0].cells, vec![Some(40.0)]);
        assert_eq!(cov.rows[0].avg, Some(40.0));
        assert_eq!(auc.rows[0].avg, Some(0.4));
    }

    #[test]
    fn means_and_order() {
        let cells = vec![
            ok("a", "m1", "kappa", 10.0),
            ok("a", "m2", "kappa", 20.0),
            ok("a", "m3", "kappa", 30.0),
            ok("b", "m1", "kappa", 40.0),
            ok("a", "m1", "gamma", 50.0),
            CellResult {
                dataset: "b".into(),
                model: "m1".into(),
                measure: "gamma".into(),
                outcome: CellOutcome::Failed { reason: "boom".into() },
            },
        ];
        let (cov, _) = aggregate(&cells);
        assert_eq!(cov.datasets, vec!["a", "b"]);
        assert_eq!(cov.rows[0].measure, "gamma");
        assert_eq!(cov.rows[0].cells, vec![Some(50.0), None]);
        assert_eq!(cov.row("kappa").unwrap().cells, vec![Some(20.0), Some(40.0)]);
        assert_eq!(cov.row("kappa").unwrap().avg, Some(30.0));
        assert_eq!(cov.footnotes, vec!["b/m1/gamma: boom"]);
        assert!(cov.to_csv().starts_with("measure,a,b,avg\ngamma,50,,50\n"));
        assert!(cov.to_text().contains("n/a"));
    }
}
