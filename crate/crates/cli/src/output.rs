//! CSV and JSON rendering of experiment rows. Rendering goes to a string
//! first so identical inputs give identical bytes.

use frugal_core::harness::experiment::{ExperimentRow, MechanismSummary};
use serde::Serialize;

use crate::config::{Format, Layout};

/// Column order of the wide layout.
pub const WIDE_COLUMNS: [&str; 16] = [
    "mechanism",
    "seed",
    "T",
    "L",
    "lambda",
    "delta",
    "beta",
    "total_payment",
    "tasks_completed",
    "price_per_task",
    "opt_cost_L",
    "opt_cost_2L",
    "idealistic_ratio",
    "realistic_ratio",
    "winner_cost",
    "users",
];

#[derive(Serialize)]
struct LongRow<'a> {
    mechanism: &'a str,
    seed: u64,
    #[serde(rename = "T")]
    horizon: u32,
    #[serde(rename = "L")]
    tasks: u64,
    lambda: f64,
    delta: Option<f64>,
    beta: f64,
    metric: &'static str,
    value: Option<f64>,
}

fn long_rows(r: &ExperimentRow) -> Vec<LongRow<'_>> {
    let metrics: [(&'static str, Option<f64>); 8] = [
        ("total_payment", Some(r.total_payment)),
        ("tasks_completed", Some(r.tasks_completed)),
        ("price_per_task", r.price_per_task),
        ("opt_cost_L", r.opt_cost_l),
        ("opt_cost_2L", r.opt_cost_2l),
        ("idealistic_ratio", r.idealistic_ratio),
        ("realistic_ratio", r.realistic_ratio),
        ("winner_cost", r.winner_cost),
    ];
    metrics
        .into_iter()
        .map(|(metric, value)| LongRow {
            mechanism: &r.mechanism,
            seed: r.seed,
            horizon: r.horizon,
            tasks: r.tasks,
            lambda: r.lambda,
            delta: r.delta,
            beta: r.beta,
            metric,
            value,
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn render_rows(
    rows: &[ExperimentRow],
    format: Format,
    layout: Layout,
) -> Result<String, String> {
    match (format, layout) {
        (Format::Json, _) => serde_json::to_string_pretty(rows)
            .map(|s| s + "\n")
            .map_err(|e| e.to_string()),
        (Format::Csv, Layout::Wide) => {
            if rows.is_empty() {
                return Ok(WIDE_COLUMNS.join(",") + "\n");
            }
            to_csv(rows).map_err(|e| e.to_string())
        }
        (Format::Csv, Layout::Long) => {
            to_csv(rows.iter().flat_map(long_rows)).map_err(|e| e.to_string())
        }
    }
}

/// Per-cell aggregate with the cell's coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    #[serde(rename = "L")]
    pub tasks: u64,
    pub lambda: f64,
    pub mechanism: String,
    pub delta: Option<f64>,
    pub runs: usize,
    pub mean_payment: f64,
    pub mean_tasks: f64,
    pub completion_rate: f64,
    #[serde(rename = "mean_opt_cost_L")]
    pub mean_opt_cost_l: Option<f64>,
    #[serde(rename = "mean_opt_cost_2L")]
    pub mean_opt_cost_2l: Option<f64>,
    #[serde(rename = "payment_over_opt_L")]
    pub payment_over_opt_l: Option<f64>,
    #[serde(rename = "payment_over_opt_2L")]
    pub payment_over_opt_2l: Option<f64>,
    pub mean_winner_cost: Option<f64>,
    #[serde(rename = "winner_cost_over_opt_L")]
    pub winner_cost_over_opt_l: Option<f64>,
}

impl CellSummary {
    pub fn new(tasks: u64, lambda: f64, s: MechanismSummary) -> Self {
        CellSummary {
            tasks,
            lambda,
            mechanism: s.mechanism,
            delta: s.delta,
            runs: s.runs,
            mean_payment: s.mean_payment,
            mean_tasks: s.mean_tasks,
            completion_rate: s.completion_rate,
            mean_opt_cost_l: s.mean_opt_cost_l,
            mean_opt_cost_2l: s.mean_opt_cost_2l,
            payment_over_opt_l: s.payment_over_opt_l,
            payment_over_opt_2l: s.payment_over_opt_2l,
            mean_winner_cost: s.mean_winner_cost,
            winner_cost_over_opt_l: s.winner_cost_over_opt_l,
        }
    }
}

pub fn render_summaries(summaries: &[CellSummary], format: Format) -> Result<String, String> {
    match format {
        Format::Json => serde_json::to_string_pretty(summaries)
            .map(|s| s + "\n")
            .map_err(|e| e.to_string()),
        Format::Csv => to_csv(summaries).map_err(|e| e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64) -> ExperimentRow {
        ExperimentRow {
            mechanism: "hetero-omz".into(),
            seed,
            horizon: 1800,
            tasks: 100,
            lambda: 0.6,
            delta: Some(2.0),
            beta: 10.0,
            total_payment: 250.5,
            tasks_completed: 100.0,
            price_per_task: Some(2.505),
            opt_cost_l: Some(200.0),
            opt_cost_2l: None,
            idealistic_ratio: Some(1.2525),
            realistic_ratio: None,
            winner_cost: Some(180.0),
            users: 1000,
        }
    }

    #[test]
    fn wide_header_is_stable() {
        let csv = render_rows(&[row(1)], Format::Csv, Layout::Wide).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), WIDE_COLUMNS.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "hetero-omz,1,1800,100,0.6,2.0,10.0,250.5,100.0,2.505,200.0,,1.2525,,180.0,1000"
        );
        assert_eq!(
            render_rows(&[], Format::Csv, Layout::Wide).unwrap(),
            WIDE_COLUMNS.join(",") + "\n"
        );
    }

    #[test]
    fn long_layout_one_row_per_metric() {
        let csv = render_rows(&[row(1), row(2)], Format::Csv, Layout::Long).unwrap();
        assert_eq!(csv.lines().count(), 1 + 16);
        assert!(csv.starts_with("mechanism,seed,T,L,lambda,delta,beta,metric,value\n"));
        assert!(csv.contains("hetero-omz,2,1800,100,0.6,2.0,10.0,opt_cost_2L,\n"));
    }

    #[test]
    fn json_parses_back() {
        let json = render_rows(&[row(1)], Format::Json, Layout::Wide).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v[0]["opt_cost_L"], 200.0);
        assert!(v[0]["realistic_ratio"].is_null());
    }
}
