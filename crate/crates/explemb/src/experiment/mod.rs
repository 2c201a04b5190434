//! Config-driven orchestration of the experimental arms: dataset
//! preparation, per-arm execution with derived seeds, test-split evaluation,
//! and report/manifest artifacts on disk.

pub mod arms;
pub mod config;
pub mod gradcheck;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array1;
use sha2::{Digest, Sha256};

use crate::dataset::{self, Dataset, Explanations, Labels, Split};
use crate::error::{Error, Result};
use crate::metrics::{self, Discretizer, MetricsReport, ReportRow};

use arms::{ArmContext, ArmOutput, EPrediction, YPrediction};
use config::{DataSource, ExperimentConfig, ThresholdSpec};

/// Counts reads of test-split labels; the manifest records the value observed
/// before the metrics stage, which must be zero.
#[derive(Debug, Default)]
pub struct TestAccessAudit {
    reads: AtomicU64,
}

impl TestAccessAudit {
    pub fn count(&self) -> u64 {
        self.reads.load(Ordering::SeqCst)
    }

    /// Test-split labels; every call is counted.
    pub fn test_labels(&self, d: &Dataset) -> Labels {
        self.reads.fetch_add(1, Ordering::SeqCst);
        d.labels.select(&d.rows_of(Split::Test))
    }

    /// Test-split explanations; every call is counted.
    pub fn test_explanations(&self, d: &Dataset) -> Explanations {
        self.reads.fetch_add(1, Ordering::SeqCst);
        d.explanations.select(&d.rows_of(Split::Test))
    }
}

/// Load or synthesize the dataset and run the configured preprocessing:
/// split tagging, log transform, train-stat standardization, and feature
/// selection.
pub fn prepare_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    let raw = match &config.source {
        DataSource::Csv {
            csv_path,
            schema_path,
        } => {
            let schema = dataset::CsvSchema::load(schema_path)?;
            dataset::load_csv(csv_path, &schema)?
        }
        DataSource::Synthetic(spec) => dataset::generate_synthetic(spec)?,
    };
    let mut d = dataset::split_fixed(&raw, config.split)?;
    if config.log_transform {
        d = dataset::log_transform(&d)?;
    }
    if config.standardize {
        d = dataset::standardize(&d, None)?.0;
    }
    if config.select_k > 0 {
        d = dataset::select_features(&d, config.select_k, &dataset::CorrelationRanker)?.0;
    }
    Ok(d)
}

/// Discretizers for Y and E, fitting training tertiles when set to auto.
pub fn resolve_discretizers(
    d: &Dataset,
    config: &ExperimentConfig,
) -> Result<(Option<Discretizer>, Option<Discretizer>)> {
    let train_rows = d.rows_of(Split::Train);
    let y = match (&d.labels, config.y_thresholds) {
        (Labels::Categorical { .. }, _) => None,
        (Labels::Continuous(_), ThresholdSpec::Fixed(t1, t2)) => Some(Discretizer::new(t1, t2)?),
        (Labels::Continuous(v), ThresholdSpec::Auto) => {
            let train: Vec<f64> = train_rows.iter().map(|&i| v[i]).collect();
            Some(Discretizer::from_tertiles(&train)?)
        }
    };
    let e = match (&d.explanations, config.e_thresholds) {
        (Explanations::Categorical { .. }, _) => None,
        (Explanations::Continuous(m), _) if m.ncols() == 0 => None,
        (Explanations::Continuous(_), ThresholdSpec::Fixed(t1, t2)) => {
            Some(Discretizer::new(t1, t2)?)
        }
        (Explanations::Continuous(m), ThresholdSpec::Auto) => {
            let mut train = Vec::with_capacity(train_rows.len() * m.ncols());
            for &i in &train_rows {
                train.extend(m.row(i).iter().copied());
            }
            Some(Discretizer::from_tertiles(&train)?)
        }
    };
    Ok((y, e))
}

/// Seed for one arm, derived from the master seed and the arm name only, so
/// disabling one arm never shifts another arm's stream.
pub fn arm_seed(master: u64, arm: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(arm.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Run a single arm on a prepared dataset.
pub fn run_arm(
    d: &Dataset,
    config: &ExperimentConfig,
    arm_name: &str,
    artifact_dir: Option<std::path::PathBuf>,
) -> Result<ArmOutput> {
    let arm = arms::arm_by_name(arm_name)?;
    let ctx = ArmContext::prepare(d, config, arm_seed(config.seed, arm_name), artifact_dir)
        .map_err(|e| e.in_arm(arm_name))?;
    arm.run(&ctx).map_err(|e| e.in_arm(arm_name))
}

fn evaluate_predictions(
    arm: &str,
    output: &ArmOutput,
    test_labels: &Labels,
    test_expl: &Explanations,
    disc_y: Option<&Discretizer>,
    disc_e: Option<&Discretizer>,
) -> Result<Vec<ReportRow>> {
    let n_test = test_labels.len();
    let mut rows = Vec::with_capacity(output.predictions.len());
    for p in &output.predictions {
        let mut row = ReportRow {
            arm: arm.to_string(),
            param: p.param.clone(),
            y_accuracy: None,
            y_mae_discretized: None,
            y_mae_continuous: None,
            e_accuracy: None,
            e_mae_discretized: None,
            e_mae_continuous: None,
            n_test,
        };
        match (&p.y, test_labels) {
            (Some(YPrediction::Continuous(pred)), Labels::Continuous(target)) => {
                row.y_mae_continuous = Some(metrics::mae(pred, target)?);
                if let Some(d) = disc_y {
                    let pd = metrics::discretize(pred, d);
                    let td = metrics::discretize(target, d);
                    row.y_mae_discretized = Some(metrics::mae(&pd, &td)?);
                    row.y_accuracy = Some(metrics::discretized_accuracy(pred, target, d)?);
                }
            }
            (Some(YPrediction::Categorical(pred)), Labels::Categorical { classes, .. }) => {
                row.y_accuracy = Some(metrics::zero_one_accuracy(pred, classes)?);
            }
            (None, _) => {}
            _ => {
                return Err(Error::InvalidValue(format!(
                    "arm {arm} produced Y predictions of the wrong kind"
                )))
            }
        }
        match (&p.e, test_expl) {
            (Some(EPrediction::Continuous(pred)), Explanations::Continuous(target)) => {
                row.e_mae_continuous = Some(metrics::explanation_l1(pred, target)?);
                if let Some(d) = disc_e {
                    let pd = metrics::discretize_matrix(pred, d);
                    let td = metrics::discretize_matrix(target, d);
                    row.e_mae_discretized = Some(metrics::explanation_l1(&pd, &td)?);
                }
            }
            (Some(EPrediction::Categorical(pred)), Explanations::Categorical { classes, .. }) => {
                row.e_accuracy = Some(metrics::zero_one_accuracy(pred, classes)?);
            }
            (None, _) => {}
            _ => {
                return Err(Error::InvalidValue(format!(
                    "arm {arm} produced E predictions of the wrong kind"
                )))
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

fn predictions_text(output: &ArmOutput) -> String {
    let mut s = String::new();
    for p in &output.predictions {
        let _ = writeln!(s, "param {}", p.param);
        match &p.y {
            Some(YPrediction::Continuous(v)) => {
                let cells: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
                let _ = writeln!(s, "y {}", cells.join(" "));
            }
            Some(YPrediction::Categorical(c)) => {
                let cells: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(s, "y {}", cells.join(" "));
            }
            None => {}
        }
        match &p.e {
            Some(EPrediction::Continuous(m)) => {
                for row in m.rows() {
                    let cells: Vec<String> = row.iter().map(|x| format!("{x:.12e}")).collect();
                    let _ = writeln!(s, "e {}", cells.join(" "));
                }
            }
            Some(EPrediction::Categorical(c)) => {
                let cells: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(s, "e {}", cells.join(" "));
            }
            None => {}
        }
    }
    s
}

/// Outcome of a full experiment run.
pub struct RunSummary {
    pub report: MetricsReport,
    pub failed_arms: Vec<(String, String)>,
    pub manifest_path: std::path::PathBuf,
}

/// Run every requested arm in declared order, evaluate on the test split,
/// and write per-arm artifacts, the report (JSON + table), and a manifest.
/// Arms that fail are recorded and skipped; the run continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunSummary> {
    if config.arms.is_empty() {
        return Err(Error::Config("no arms requested".into()));
    }
    let out_dir = &config.out_dir;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let d = prepare_dataset(config)?;
    let (disc_y, disc_e) = resolve_discretizers(&d, config)?;
    let audit = TestAccessAudit::default();

    let mut outputs: Vec<(String, ArmOutput)> = Vec::new();
    let mut failed: Vec<(String, String)> = Vec::new();
    for arm_name in &config.arms {
        let arm_dir = out_dir.join(arm_name);
        std::fs::create_dir_all(&arm_dir)
            .map_err(|e| Error::io(arm_dir.display().to_string(), e))?;
        match run_arm(&d, config, arm_name, Some(arm_dir.clone())) {
            Ok(output) => {
                std::fs::write(arm_dir.join("predictions.txt"), predictions_text(&output))
                    .map_err(|e| Error::io(arm_dir.display().to_string(), e))?;
                outputs.push((arm_name.clone(), output));
            }
            Err(e) => failed.push((arm_name.clone(), e.to_string())),
        }
    }

    // All training and prediction is done; test labels are read only from
    // here on.
    let reads_before_metrics = audit.count();
    let test_labels = audit.test_labels(&d);
    let test_expl = audit.test_explanations(&d);

    let mut rows = Vec::new();
    for (arm_name, output) in &outputs {
        rows.extend(evaluate_predictions(
            arm_name,
            output,
            &test_labels,
            &test_expl,
            disc_y.as_ref(),
            disc_e.as_ref(),
        )?);
    }
    if rows.is_empty() {
        let detail: Vec<String> = failed.iter().map(|(a, e)| format!("{a}: {e}")).collect();
        return Err(Error::InvalidValue(format!(
            "every requested arm failed: {}",
            detail.join("; ")
        )));
    }
    let report = metrics::compile_report(rows)?;
    std::fs::write(out_dir.join("report.json"), report.to_json())
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    std::fs::write(out_dir.join("report.txt"), report.to_table())
        .map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let manifest_path = out_dir.join("manifest.txt");
    let mut manifest = String::from("explemb-manifest v1\n");
    let mut hasher = Sha256::new();
    hasher.update(config.raw.canonical().as_bytes());
    let _ = writeln!(manifest, "config_sha256 = {:x}", hasher.finalize());
    let _ = writeln!(manifest, "master_seed = {}", config.seed);
    let _ = writeln!(
        manifest,
        "timestamp_unix = {}",
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|t| t.as_secs())
            .unwrap_or(0)
    );
    for arm_name in &config.arms {
        let status = failed
            .iter()
            .find(|(a, _)| a == arm_name)
            .map(|(_, e)| format!("failed: {e}"))
            .unwrap_or_else(|| "ok".to_string());
        let _ = writeln!(
            manifest,
            "arm {} seed={} status={}",
            arm_name,
            arm_seed(config.seed, arm_name),
            status
        );
    }
    let _ = writeln!(
        manifest,
        "test_label_reads_before_metrics = {reads_before_metrics}"
    );
    let _ = writeln!(manifest, "test_label_reads_total = {}", audit.count());
    std::fs::write(&manifest_path, manifest)
        .map_err(|e| Error::io(manifest_path.display().to_string(), e))?;

    Ok(RunSummary {
        report,
        failed_arms: failed,
        manifest_path,
    })
}

/// Write a synthetic dataset to `<out>/data.csv` and `<out>/schema.cfg` so a
/// CSV-sourced run can consume it.
pub fn write_synthetic_csv(spec: &dataset::SyntheticSpec, out: &Path) -> Result<()> {
    let d = dataset::generate_synthetic(spec)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    let mut header: Vec<String> = d.feature_names.clone();
    header.push("y".into());
    let expl_cols: Vec<String> = match &d.explanations {
        Explanations::Continuous(m) => (0..m.ncols()).map(|i| format!("e{i}")).collect(),
        Explanations::Categorical { .. } => vec!["e".to_string()],
    };
    header.extend(expl_cols.iter().cloned());
    let mut csv = header.join(",");
    csv.push('\n');
    for i in 0..d.n_samples() {
        let mut cells: Vec<String> = d.features.row(i).iter().map(|v| format!("{v:.12e}")).collect();
        match &d.labels {
            Labels::Continuous(v) => cells.push(format!("{:.12e}", v[i])),
            Labels::Categorical { classes, .. } => cells.push(classes[i].to_string()),
        }
        match &d.explanations {
            Explanations::Continuous(m) => {
                cells.extend(m.row(i).iter().map(|v| format!("{v:.12e}")))
            }
            Explanations::Categorical { classes, .. } => cells.push(classes[i].to_string()),
        }
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    let csv_path = out.join("data.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(csv_path.display().to_string(), e))?;

    let label_kind = if d.labels.is_continuous() {
        "continuous"
    } else {
        "categorical"
    };
    let expl_kind = if d.explanations.is_continuous() {
        "continuous"
    } else {
        "categorical"
    };
    let schema = format!(
        "label_column = y\nlabel_kind = {label_kind}\nexplanation_columns = {}\nexplanation_kind = {expl_kind}\nfeature_columns = rest\n",
        expl_cols.join(",")
    );
    let schema_path = out.join("schema.cfg");
    std::fs::write(&schema_path, schema)
        .map_err(|e| Error::io(schema_path.display().to_string(), e))
}

/// Convenience accessor for tests: Y values of the test split as a vector,
/// routed through the audit.
pub fn test_label_vector(audit: &TestAccessAudit, d: &Dataset) -> Option<Array1<f64>> {
    match audit.test_labels(d) {
        Labels::Continuous(v) => Some(v),
        Labels::Categorical { .. } => None,
    }
}
