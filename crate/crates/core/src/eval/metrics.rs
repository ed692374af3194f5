use serde::{Deserialize, Serialize};

use super::episode::{EventKind, TrajectoryLog};
use super::EvalError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub runs: usize,
    pub success_rate: f64,
    /// Mean collision count per run.
    pub collisions: f64,
    /// Mean completion time over successful runs; absent without successes.
    pub t_mean: Option<f64>,
    /// RMS of finite-difference commanded accelerations pooled over all runs.
    pub v_rms_accel: Option<f64>,
    pub w_rms_accel: Option<f64>,
}

fn rms(sum_sq: f64, n: usize) -> Option<f64> {
    (n > 0).then(|| (sum_sq / n as f64).sqrt())
}

pub fn compute_metrics(logs: &[TrajectoryLog]) -> Result<MetricsReport, EvalError> {
    let first = logs.first().ok_or(EvalError::NoLogs)?;
    if let Some(other) = logs.iter().find(|l| l.scenario != first.scenario) {
        return Err(EvalError::MixedScenarios(first.scenario.clone(), other.scenario.clone()));
    }
    let runs = logs.len();
    let successes: Vec<&TrajectoryLog> = logs.iter().filter(|l| l.success()).collect();
    let collisions = logs.iter().map(|l| l.collisions()).sum::<usize>() as f64 / runs as f64;
    let times: Vec<f64> = successes
        .iter()
        .filter_map(|l| l.terminal().filter(|e| e.kind == EventKind::GoalReached).map(|e| e.t))
        .collect();
    let t_mean = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);

    let (mut sv, mut sw, mut n) = (0.0, 0.0, 0usize);
    for log in logs {
        for w in log.samples.windows(2) {
            let dt = w[1].t - w[0].t;
            sv += ((w[1].v - w[0].v) / dt).powi(2);
            sw += ((w[1].omega - w[0].omega) / dt).powi(2);
            n += 1;
        }
    }
    Ok(MetricsReport {
        scenario: first.scenario.clone(),
        runs,
        success_rate: successes.len() as f64 / runs as f64,
        collisions,
        t_mean,
        v_rms_accel: rms(sv, n),
        w_rms_accel: rms(sw, n),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub report: MetricsReport,
}

/// Success rate, collisions, t_mean and the two RMS accelerations per planner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const COLUMNS: [&str; 7] = ["scenario", "planner", "success_rate", "collisions", "t_mean_s", "v_rms_accel", "w_rms_accel"];

impl ComparisonTable {
    /// Cells as rendered; time and accelerations are "-" when nothing succeeded.
    pub fn cells(&self) -> Vec<[String; 7]> {
        self.rows
            .iter()
            .map(|row| {
                let r = &row.report;
                let gated = |v: Option<f64>, digits: usize| match v {
                    Some(v) if r.success_rate > 0.0 => format!("{v:.digits$}"),
                    _ => "-".to_string(),
                };
                [
                    r.scenario.clone(),
                    row.label.clone(),
                    format!("{:.2}", r.success_rate),
                    format!("{:.2}", r.collisions),
                    gated(r.t_mean, 0),
                    gated(r.v_rms_accel, 4),
                    gated(r.w_rms_accel, 4),
                ]
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let cells = self.cells();
        let mut widths: Vec<usize> = COLUMNS.iter().map(|c| c.len()).collect();
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |row: Vec<&str>| {
            row.iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(COLUMNS.to_vec());
        out.push('\n');
        out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for row in self.cells() {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn compare(reports: &[(String, MetricsReport)]) -> Result<ComparisonTable, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::Arity(reports.len()));
    }
    Ok(ComparisonTable {
        rows: reports
            .iter()
            .map(|(label, report)| ComparisonRow {
                label: label.clone(),
                report: report.clone(),
            })
            .collect(),
    })
}
