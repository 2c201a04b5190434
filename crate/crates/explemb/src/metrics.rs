//! Evaluation suite: 3-bin discretization, MAE on continuous and discretized
//! values, 0-1 accuracy, l1 explanation distances, and the per-arm report.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two thresholds mapping a continuous value onto bins {-1, 0, +1}.
///
/// Boundary convention (lower-closed): v < t1 -> -1, t1 <= v < t2 -> 0,
/// v >= t2 -> +1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretizer {
    pub t1: f64,
    pub t2: f64,
}

impl Discretizer {
    pub fn new(t1: f64, t2: f64) -> Result<Discretizer> {
        if !(t1 < t2) {
            return Err(Error::InvalidValue(format!(
                "discretizer needs t1 < t2, got ({t1}, {t2})"
            )));
        }
        Ok(Discretizer { t1, t2 })
    }

    pub fn bin(&self, v: f64) -> i8 {
        if v < self.t1 {
            -1
        } else if v < self.t2 {
            0
        } else {
            1
        }
    }

    /// Thresholds that split the given values into (rough) thirds.
    pub fn from_tertiles(values: &[f64]) -> Result<Discretizer> {
        if values.len() < 3 {
            return Err(Error::InvalidValue(
                "tertile thresholds need at least 3 values".into(),
            ));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let t1 = sorted[sorted.len() / 3];
        let t2 = sorted[2 * sorted.len() / 3];
        if t1 < t2 {
            Discretizer::new(t1, t2)
        } else {
            // degenerate value spread; nudge apart so the binning stays valid
            Discretizer::new(t1, t1 + 1e-9)
        }
    }
}

/// Bin every value.
pub fn discretize(values: &Array1<f64>, d: &Discretizer) -> Array1<f64> {
    values.mapv(|v| d.bin(v) as f64)
}

pub fn discretize_matrix(values: &Array2<f64>, d: &Discretizer) -> Array2<f64> {
    values.mapv(|v| d.bin(v) as f64)
}

/// Mean absolute error over samples.
pub fn mae(pred: &Array1<f64>, target: &Array1<f64>) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "mae lengths {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Fraction of exact matches.
pub fn zero_one_accuracy(pred: &[usize], target: &[usize]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::ShapeMismatch(format!(
            "accuracy lengths {} vs {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = pred.iter().zip(target).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// 0-1 accuracy of discretized continuous values.
pub fn discretized_accuracy(
    pred: &Array1<f64>,
    target: &Array1<f64>,
    d: &Discretizer,
) -> Result<f64> {
    let p: Vec<usize> = pred.iter().map(|&v| (d.bin(v) + 1) as usize).collect();
    let t: Vec<usize> = target.iter().map(|&v| (d.bin(v) + 1) as usize).collect();
    zero_one_accuracy(&p, &t)
}

/// l1 explanation distance: per-sample sum of absolute differences over
/// attributes, averaged over samples.
pub fn explanation_l1(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "explanation shapes {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / pred.nrows() as f64)
}

/// One row of the report: an arm at one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub arm: String,
    /// "NA" for single-setting arms, otherwise the k or lambda value.
    pub param: String,
    pub y_accuracy: Option<f64>,
    pub y_mae_discretized: Option<f64>,
    pub y_mae_continuous: Option<f64>,
    pub e_accuracy: Option<f64>,
    pub e_mae_discretized: Option<f64>,
    pub e_mae_continuous: Option<f64>,
    /// Number of test samples the row was evaluated on.
    pub n_test: usize,
}

/// Columns a best-marker can refer to.
pub const REPORT_COLUMNS: [&str; 6] = [
    "y_accuracy",
    "y_mae_discretized",
    "y_mae_continuous",
    "e_accuracy",
    "e_mae_discretized",
    "e_mae_continuous",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<ReportRow>,
    /// Per (arm, column): index into `rows` of the best value within the arm
    /// group (max for accuracies, min for MAEs). Sorted for determinism.
    pub best: Vec<BestMark>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestMark {
    pub arm: String,
    pub column: String,
    pub row: usize,
}

fn column_value(row: &ReportRow, column: &str) -> Option<f64> {
    match column {
        "y_accuracy" => row.y_accuracy,
        "y_mae_discretized" => row.y_mae_discretized,
        "y_mae_continuous" => row.y_mae_continuous,
        "e_accuracy" => row.e_accuracy,
        "e_mae_discretized" => row.e_mae_discretized,
        "e_mae_continuous" => row.e_mae_continuous,
        _ => None,
    }
}

/// Assemble the report: rows ordered by (arm appearance order, numeric param
/// ascending), with per-arm per-column best markers.
pub fn compile_report(rows: Vec<ReportRow>) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::InvalidValue("empty report".into()));
    }
    let n_test = rows[0].n_test;
    if rows.iter().any(|r| r.n_test != n_test) {
        return Err(Error::InvalidValue(
            "inconsistent test-set sizes across arms".into(),
        ));
    }
    // stable arm order = first appearance
    let mut arm_order: Vec<String> = Vec::new();
    for r in &rows {
        if !arm_order.contains(&r.arm) {
            arm_order.push(r.arm.clone());
        }
    }
    let mut rows = rows;
    rows.sort_by(|a, b| {
        let ai = arm_order.iter().position(|x| x == &a.arm).unwrap();
        let bi = arm_order.iter().position(|x| x == &b.arm).unwrap();
        ai.cmp(&bi).then_with(|| {
            let av = a.param.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
            let bv = b.param.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
            av.partial_cmp(&bv).unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let mut best = Vec::new();
    for arm in &arm_order {
        for column in REPORT_COLUMNS {
            let maximize = column.ends_with("accuracy");
            let mut best_row: Option<(usize, f64)> = None;
            for (i, r) in rows.iter().enumerate() {
                if &r.arm != arm {
                    continue;
                }
                if let Some(v) = column_value(r, column) {
                    let better = match best_row {
                        None => true,
                        Some((_, bv)) => {
                            if maximize {
                                v > bv
                            } else {
                                v < bv
                            }
                        }
                    };
                    if better {
                        best_row = Some((i, v));
                    }
                }
            }
            if let Some((i, _)) = best_row {
                best.push(BestMark {
                    arm: arm.clone(),
                    column: column.to_string(),
                    row: i,
                });
            }
        }
    }
    Ok(MetricsReport { rows, best })
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<MetricsReport> {
        serde_json::from_str(text).map_err(|e| Error::InvalidValue(format!("bad report json: {e}")))
    }

    /// Aligned-column human table; best-in-arm values are starred.
    pub fn to_table(&self) -> String {
        let headers = [
            "arm",
            "param",
            "Y acc",
            "Y MAE disc",
            "Y MAE cont",
            "E acc",
            "E MAE disc",
            "E MAE cont",
        ];
        let is_best = |row_idx: usize, column: &str| {
            self.best
                .iter()
                .any(|b| b.row == row_idx && b.column == column)
        };
        let fmt = |v: Option<f64>, star: bool| match v {
            None => "NA".to_string(),
            Some(x) => {
                if star {
                    format!("*{x:.4}")
                } else {
                    format!("{x:.4}")
                }
            }
        };
        let mut table: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
        for (i, r) in self.rows.iter().enumerate() {
            table.push(vec![
                r.arm.clone(),
                r.param.clone(),
                fmt(r.y_accuracy, is_best(i, "y_accuracy")),
                fmt(r.y_mae_discretized, is_best(i, "y_mae_discretized")),
                fmt(r.y_mae_continuous, is_best(i, "y_mae_continuous")),
                fmt(r.e_accuracy, is_best(i, "e_accuracy")),
                fmt(r.e_mae_discretized, is_best(i, "e_mae_discretized")),
                fmt(r.e_mae_continuous, is_best(i, "e_mae_continuous")),
            ]);
        }
        let widths: Vec<usize> = (0..headers.len())
            .map(|c| table.iter().map(|row| row[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for (ri, row) in table.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, w)| format!("{cell:>w$}"))
                .collect();
            out.push_str(&line.join("  "));
            out.push('\n');
            if ri == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                out.push_str(&"-".repeat(total));
                out.push('\n');
            }
        }
        out
    }
}
