//! JSON, aligned text and CSV renderings of reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Comparison, ExperimentReport};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
    Csv,
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn csv_line(fields: &[String]) -> String {
    let quoted: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains([',', '"', '\n']) {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    quoted.join(",") + "\n"
}

/// `98.5 (0.97)` style: accuracy in percent, kappa in parentheses.
fn acc_kappa(acc: f64, kappa: f64) -> String {
    format!("{:.1} ({:.3})", acc * 100.0, kappa)
}

pub fn render_report(report: &ExperimentReport, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        OutputFormat::Text => {
            let a = &report.aggregate;
            let mut out = String::new();
            let _ = writeln!(
                out,
                "{} subject {}: mean accuracy (kappa) {}  sd {:.4}  runs {} ok / {} failed",
                report.label,
                report.subject_id,
                acc_kappa(a.mean_accuracy, a.mean_kappa),
                a.std_accuracy,
                a.successful_runs,
                a.failed_runs
            );
            let mut rows = vec![vec!["class".to_string(), "ppv".into(), "npv".into(), "sensitivity".into(), "f".into()]];
            for (c, m) in a.classes.iter().enumerate() {
                rows.push(vec![
                    (c + 1).to_string(),
                    format!("{:.3}", m.ppv),
                    format!("{:.3}", m.npv),
                    format!("{:.3}", m.sensitivity),
                    format!("{:.3}", m.f_measure),
                ]);
            }
            out.push_str(&align(&rows));
            let mut rows = vec![vec!["run".to_string(), "seed".into(), "accuracy".into(), "kappa".into(), "train".into(), "stop".into()]];
            for r in &report.runs {
                match (&r.metrics, &r.error) {
                    (Some(m), _) => rows.push(vec![
                        r.run.to_string(),
                        r.seed.to_string(),
                        format!("{:.4}", m.accuracy),
                        format!("{:.4}", m.kappa),
                        m.train_size.to_string(),
                        m.training.iter().map(|t| t.stop_iteration.to_string()).collect::<Vec<_>>().join("/"),
                    ]),
                    (None, e) => rows.push(vec![
                        r.run.to_string(),
                        r.seed.to_string(),
                        "failed".into(),
                        e.clone().unwrap_or_default(),
                    ]),
                }
            }
            out.push_str(&align(&rows));
            Ok(out)
        }
        OutputFormat::Csv => {
            let mut out = csv_line(&["label", "subject", "run", "seed", "status", "accuracy", "kappa", "train_size", "error"].map(String::from));
            for r in &report.runs {
                let (status, acc, kap, size) = match &r.metrics {
                    Some(m) => ("ok", m.accuracy.to_string(), m.kappa.to_string(), m.train_size.to_string()),
                    None => ("failed", String::new(), String::new(), String::new()),
                };
                out.push_str(&csv_line(&[
                    report.label.clone(),
                    report.subject_id.clone(),
                    r.run.to_string(),
                    r.seed.to_string(),
                    status.to_string(),
                    acc,
                    kap,
                    size,
                    r.error.clone().unwrap_or_default(),
                ]));
            }
            Ok(out)
        }
    }
}

/// Rows = cell labels (first-seen order), columns = subjects, entries
/// `accuracy (kappa)` with a trailing mean column.
pub fn matrix_table(reports: &[ExperimentReport], format: OutputFormat) -> Result<String> {
    let mut labels: Vec<String> = Vec::new();
    let mut subjects: Vec<String> = Vec::new();
    for r in reports {
        if !labels.contains(&r.label) {
            labels.push(r.label.clone());
        }
        if !subjects.contains(&r.subject_id) {
            subjects.push(r.subject_id.clone());
        }
    }
    let find = |l: &str, s: &str| reports.iter().find(|r| r.label == l && r.subject_id == s);
    match format {
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Cell<'a> {
                label: &'a str,
                subject: &'a str,
                mean_accuracy: f64,
                mean_kappa: f64,
                std_accuracy: f64,
                successful_runs: usize,
            }
            let cells: Vec<Cell> = reports
                .iter()
                .map(|r| Cell {
                    label: &r.label,
                    subject: &r.subject_id,
                    mean_accuracy: r.aggregate.mean_accuracy,
                    mean_kappa: r.aggregate.mean_kappa,
                    std_accuracy: r.aggregate.std_accuracy,
                    successful_runs: r.aggregate.successful_runs,
                })
                .collect();
            Ok(serde_json::to_string_pretty(&cells)? + "\n")
        }
        OutputFormat::Text => {
            let mut rows = vec![std::iter::once("Method".to_string())
                .chain(subjects.iter().cloned())
                .chain(std::iter::once("Mean".to_string()))
                .collect::<Vec<_>>()];
            for l in &labels {
                let mut row = vec![l.clone()];
                let (mut acc, mut kap, mut n) = (0.0, 0.0, 0usize);
                for s in &subjects {
                    match find(l, s) {
                        Some(r) => {
                            row.push(acc_kappa(r.aggregate.mean_accuracy, r.aggregate.mean_kappa));
                            acc += r.aggregate.mean_accuracy;
                            kap += r.aggregate.mean_kappa;
                            n += 1;
                        }
                        None => row.push("-".into()),
                    }
                }
                row.push(if n > 0 { acc_kappa(acc / n as f64, kap / n as f64) } else { "-".into() });
                rows.push(row);
            }
            Ok(align(&rows))
        }
        OutputFormat::Csv => {
            let mut out = csv_line(&["label", "subject", "mean_accuracy", "mean_kappa", "std_accuracy", "successful_runs"].map(String::from));
            for l in &labels {
                for s in &subjects {
                    if let Some(r) = find(l, s) {
                        out.push_str(&csv_line(&[
                            l.clone(),
                            s.clone(),
                            r.aggregate.mean_accuracy.to_string(),
                            r.aggregate.mean_kappa.to_string(),
                            r.aggregate.std_accuracy.to_string(),
                            r.aggregate.successful_runs.to_string(),
                        ]));
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn render_comparison(cmp: &Comparison, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => Ok(serde_json::to_string_pretty(cmp)? + "\n"),
        OutputFormat::Text => {
            let mut rows = vec![vec!["subject".to_string(), "A".into(), "NA".into(), "diff".into()]];
            for ((s, a), b) in cmp.subjects.iter().zip(&cmp.with_augmentation).zip(&cmp.without_augmentation) {
                rows.push(vec![s.clone(), format!("{a:.4}"), format!("{b:.4}"), format!("{:+.4}", a - b)]);
            }
            Ok(align(&rows) + &cmp.summary + "\n")
        }
        OutputFormat::Csv => {
            let mut out = csv_line(&["subject", "a", "na"].map(String::from));
            for ((s, a), b) in cmp.subjects.iter().zip(&cmp.with_augmentation).zip(&cmp.without_augmentation) {
                out.push_str(&csv_line(&[s.clone(), a.to_string(), b.to_string()]));
            }
            out.push_str(&csv_line(&[
                "t".into(),
                cmp.ttest.t.to_string(),
                String::new(),
            ]));
            out.push_str(&csv_line(&["p".into(), cmp.ttest.p_value.to_string(), String::new()]));
            Ok(out)
        }
    }
}
