//! Result tables: per-cell and summary CSV, a plain-text grid and JSON.

use serde::{Deserialize, Serialize};

use super::ExperimentResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub model: String,
    pub feature_set: String,
    pub seed: u64,
    pub fold: usize,
    pub auroc: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub n_synthetic_train: usize,
    pub n_synthetic_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub feature_set: String,
    pub mean_auroc: f64,
    pub std_auroc: f64,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub cells: usize,
    pub undefined_auroc_cells: usize,
}

impl From<&ExperimentResult> for SummaryRow {
    fn from(r: &ExperimentResult) -> Self {
        SummaryRow {
            model: r.model.clone(),
            feature_set: r.feature_set.clone(),
            mean_auroc: r.mean_auroc,
            std_auroc: r.std_auroc,
            mean_f1: r.mean_f1,
            std_f1: r.std_f1,
            cells: r.cells.len(),
            undefined_auroc_cells: r.undefined_auroc_cells,
        }
    }
}

fn to_csv<S: Serialize>(rows: impl IntoIterator<Item = S>) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv is utf-8")
}

pub fn cell_rows(results: &[ExperimentResult]) -> Vec<CellRow> {
    results
        .iter()
        .flat_map(|r| {
            r.cells.iter().map(move |c| CellRow {
                model: r.model.clone(),
                feature_set: r.feature_set.clone(),
                seed: c.seed,
                fold: c.fold,
                auroc: c.report.auroc,
                f1: c.report.at_threshold.f1,
                precision: c.report.at_threshold.precision,
                recall: c.report.at_threshold.recall,
                tp: c.report.at_threshold.tp,
                fp: c.report.at_threshold.fp,
                tn: c.report.at_threshold.tn,
                fn_: c.report.at_threshold.fn_,
                n_train: c.n_train,
                n_test: c.n_test,
                n_synthetic_train: c.n_synthetic_train,
                n_synthetic_test: c.n_synthetic_test,
            })
        })
        .collect()
}

/// One line per seed x fold cell.
pub fn cells_csv(results: &[ExperimentResult]) -> String {
    to_csv(cell_rows(results))
}

/// One line per (model, feature set) with mean and standard deviation.
pub fn summary_csv(results: &[ExperimentResult]) -> String {
    to_csv(results.iter().map(SummaryRow::from))
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>, csv::Error> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect()
}

pub fn to_json(results: &[ExperimentResult]) -> String {
    serde_json::to_string_pretty(results).expect("results serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Auroc,
    F1,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for s in items {
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Feature sets down, models across, `mean ± std` in each cell.
pub fn text_table(rows: &[SummaryRow], metric: TableMetric) -> String {
    let sets = first_seen(rows.iter().map(|r| r.feature_set.as_str()));
    let models = first_seen(rows.iter().map(|r| r.model.as_str()));
    let mut grid: Vec<Vec<String>> = vec![std::iter::once("feature set")
        .chain(models.iter().copied())
        .map(String::from)
        .collect()];
    for set in &sets {
        let mut line = vec![set.to_string()];
        for model in &models {
            let cell = rows
                .iter()
                .find(|r| r.feature_set == *set && r.model == *model)
                .map(|r| {
                    let (m, s) = match metric {
                        TableMetric::Auroc => (r.mean_auroc, r.std_auroc),
                        TableMetric::F1 => (r.mean_f1, r.std_f1),
                    };
                    format!("{m:.2} ± {s:.2}")
                });
            line.push(cell.unwrap_or_else(|| "-".into()));
        }
        grid.push(line);
    }
    let widths: Vec<usize> = (0..grid[0].len())
        .map(|j| grid.iter().map(|l| l[j].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, line) in grid.iter().enumerate() {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(
                &widths
                    .iter()
                    .map(|&w| "-".repeat(w))
                    .collect::<Vec<_>>()
                    .join("  "),
            );
            out.push('\n');
        }
    }
    out
}
