//! (X, Y, E) datasets: CSV loading, log transform, standardization, feature
//! selection, fixed splits, and deterministic synthetic generation.
//!
//! All operations are pure: they take a `Dataset` by reference and return a
//! new one, so they are safe to call from multiple threads.

use std::collections::HashMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Split tag carried by every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Label vector: continuous scores or class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    Continuous(Array1<f64>),
    Categorical { classes: Vec<usize>, n_classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Continuous(v) => v.len(),
            Labels::Categorical { classes, .. } => classes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Labels::Continuous(_))
    }

    /// Row subset in the given index order.
    pub fn select(&self, rows: &[usize]) -> Labels {
        match self {
            Labels::Continuous(v) => {
                Labels::Continuous(rows.iter().map(|&i| v[i]).collect())
            }
            Labels::Categorical { classes, n_classes } => Labels::Categorical {
                classes: rows.iter().map(|&i| classes[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

/// Explanation block: a continuous attribute matrix or class indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Explanations {
    Continuous(Array2<f64>),
    Categorical { classes: Vec<usize>, n_classes: usize },
}

impl Explanations {
    pub fn len(&self) -> usize {
        match self {
            Explanations::Continuous(m) => m.nrows(),
            Explanations::Categorical { classes, .. } => classes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, Explanations::Continuous(_))
    }

    /// Width of the continuous attribute block (1 for categorical).
    pub fn width(&self) -> usize {
        match self {
            Explanations::Continuous(m) => m.ncols(),
            Explanations::Categorical { .. } => 1,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Explanations {
        match self {
            Explanations::Continuous(m) => {
                let mut out = Array2::zeros((rows.len(), m.ncols()));
                for (r, &i) in rows.iter().enumerate() {
                    out.row_mut(r).assign(&m.row(i));
                }
                Explanations::Continuous(out)
            }
            Explanations::Categorical { classes, n_classes } => Explanations::Categorical {
                classes: rows.iter().map(|&i| classes[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

/// Aligned (X, Y, E) triples with per-sample split tags.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Labels,
    pub explanations: Explanations,
    pub splits: Vec<Split>,
    pub feature_names: Vec<String>,
    pub explanation_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Labels,
        explanations: Explanations,
        splits: Vec<Split>,
        feature_names: Vec<String>,
        explanation_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        if labels.len() != n || explanations.len() != n || splits.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "features {} / labels {} / explanations {} / splits {} rows",
                n,
                labels.len(),
                explanations.len(),
                splits.len()
            )));
        }
        if let Labels::Categorical { classes, n_classes } = &labels {
            if classes.iter().any(|&c| c >= *n_classes) {
                return Err(Error::InvalidValue("label class index out of range".into()));
            }
        }
        if let Explanations::Categorical { classes, n_classes } = &explanations {
            if classes.iter().any(|&c| c >= *n_classes) {
                return Err(Error::InvalidValue(
                    "explanation class index out of range".into(),
                ));
            }
        }
        Ok(Dataset {
            features,
            labels,
            explanations,
            splits,
            feature_names,
            explanation_names,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Row indices carrying the given split tag, in dataset order.
    pub fn rows_of(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Feature submatrix for a row index set.
    pub fn features_of(&self, rows: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), self.n_features()));
        for (r, &i) in rows.iter().enumerate() {
            out.row_mut(r).assign(&self.features.row(i));
        }
        out
    }
}

/// Per-feature mean and standard deviation, computed on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl StandardizationStats {
    /// Stats that undo this transform: x = z * std + mean.
    pub fn inverse(&self) -> StandardizationStats {
        let std_inv = self.std.mapv(|s| 1.0 / s);
        let mean_inv = -&self.mean / &self.std;
        StandardizationStats {
            mean: mean_inv,
            std: std_inv,
        }
    }
}

/// Replace every feature cell x with log10(100 + x).
pub fn log_transform(d: &Dataset) -> Result<Dataset> {
    if d.features.iter().any(|&x| 100.0 + x <= 0.0) {
        return Err(Error::InvalidValue(
            "log transform requires 100 + x > 0 for every feature cell".into(),
        ));
    }
    let mut out = d.clone();
    out.features.mapv_inplace(|x| (100.0 + x).log10());
    Ok(out)
}

/// Standardize features to zero mean and unit variance.
///
/// When `stats` is omitted, mean and (population) standard deviation are
/// computed on the training split only and applied to all splits. Constant
/// columns (std < 1e-12) use std = 1 so they map to zeros.
pub fn standardize(
    d: &Dataset,
    stats: Option<StandardizationStats>,
) -> Result<(Dataset, StandardizationStats)> {
    let stats = match stats {
        Some(s) => s,
        None => {
            let train_rows = d.rows_of(Split::Train);
            if train_rows.is_empty() {
                return Err(Error::InvalidValue(
                    "standardize requires a non-empty training split".into(),
                ));
            }
            let x = d.features_of(&train_rows);
            let n = x.nrows() as f64;
            let mean = x.sum_axis(Axis(0)) / n;
            let mut var = Array1::<f64>::zeros(x.ncols());
            for row in x.rows() {
                for (j, &v) in row.iter().enumerate() {
                    let c = v - mean[j];
                    var[j] += c * c;
                }
            }
            let std = var.mapv(|v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            });
            StandardizationStats { mean, std }
        }
    };
    if stats.mean.len() != d.n_features() || stats.std.len() != d.n_features() {
        return Err(Error::ShapeMismatch(format!(
            "standardization stats width {} vs {} features",
            stats.mean.len(),
            d.n_features()
        )));
    }
    let mut out = d.clone();
    for mut row in out.features.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - stats.mean[j]) / stats.std[j];
        }
    }
    Ok((out, stats))
}

/// Scores one feature column per call; higher means more relevant.
pub trait FeatureRanker {
    fn name(&self) -> &'static str;
    /// Scores for each feature column, computed on the training split.
    fn scores(&self, x_train: &Array2<f64>, y_train: &Array1<f64>) -> Result<Vec<f64>>;
}

/// Absolute Pearson correlation with the (continuous) label.
pub struct CorrelationRanker;

impl FeatureRanker for CorrelationRanker {
    fn name(&self) -> &'static str {
        "corr"
    }

    fn scores(&self, x_train: &Array2<f64>, y_train: &Array1<f64>) -> Result<Vec<f64>> {
        let n = x_train.nrows();
        if n == 0 || y_train.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "ranker rows {} vs labels {}",
                n,
                y_train.len()
            )));
        }
        let nf = n as f64;
        let y_mean = y_train.sum() / nf;
        let y_c: Array1<f64> = y_train.mapv(|v| v - y_mean);
        let y_ss = y_c.dot(&y_c);
        let mut out = Vec::with_capacity(x_train.ncols());
        for col in x_train.columns() {
            let m = col.sum() / nf;
            let mut cov = 0.0;
            let mut ss = 0.0;
            for (i, &v) in col.iter().enumerate() {
                let c = v - m;
                cov += c * y_c[i];
                ss += c * c;
            }
            let denom = (ss * y_ss).sqrt();
            out.push(if denom < 1e-300 { 0.0 } else { (cov / denom).abs() });
        }
        Ok(out)
    }
}

/// Known rankers by name.
pub fn ranker_by_name(name: &str) -> Option<Box<dyn FeatureRanker>> {
    match name {
        "corr" => Some(Box::new(CorrelationRanker)),
        _ => None,
    }
}

/// Keep the k columns with the highest ranking score (ties break toward the
/// lower column index); returns the restricted dataset and the selected
/// indices sorted ascending. The ranking is computed on the training split.
pub fn select_features(
    d: &Dataset,
    k: usize,
    ranker: &dyn FeatureRanker,
) -> Result<(Dataset, Vec<usize>)> {
    if k == 0 || k > d.n_features() {
        return Err(Error::InvalidValue(format!(
            "select_features k = {} out of range 1..={}",
            k,
            d.n_features()
        )));
    }
    let train_rows = d.rows_of(Split::Train);
    let y_train = match d.labels.select(&train_rows) {
        Labels::Continuous(v) => v,
        Labels::Categorical { .. } => {
            return Err(Error::InvalidValue(
                "correlation ranking requires continuous labels".into(),
            ))
        }
    };
    let x_train = d.features_of(&train_rows);
    let scores = ranker.scores(&x_train, &y_train)?;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = order[..k].to_vec();
    selected.sort_unstable();

    let mut features = Array2::zeros((d.n_samples(), k));
    for (jj, &j) in selected.iter().enumerate() {
        features.column_mut(jj).assign(&d.features.column(j));
    }
    let feature_names = if d.feature_names.is_empty() {
        vec![]
    } else {
        selected.iter().map(|&j| d.feature_names[j].clone()).collect()
    };
    let out = Dataset {
        features,
        labels: d.labels.clone(),
        explanations: d.explanations.clone(),
        splits: d.splits.clone(),
        feature_names,
        explanation_names: d.explanation_names.clone(),
    };
    Ok((out, selected))
}

/// Tag the first `train` rows as train, the next `val` as validation, and the
/// remainder as test. The caller pre-orders rows to match official splits.
pub fn split_fixed(d: &Dataset, counts: (usize, usize, usize)) -> Result<Dataset> {
    let (tr, va, te) = counts;
    if tr + va + te != d.n_samples() {
        return Err(Error::InvalidValue(format!(
            "split counts {}+{}+{} != {} samples",
            tr,
            va,
            te,
            d.n_samples()
        )));
    }
    let mut out = d.clone();
    for (i, s) in out.splits.iter_mut().enumerate() {
        *s = if i < tr {
            Split::Train
        } else if i < tr + va {
            Split::Validation
        } else {
            Split::Test
        };
    }
    Ok(out)
}

/// How explanations are derived from the latent vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ExplanationRule {
    /// E = linear map of the latent, `n_outputs` attributes.
    Linear { n_outputs: usize },
    /// E = index of the nearest of `n_clusters` seeded centroids; labels are a
    /// fixed many-to-one map of the cluster onto `n_label_classes`.
    Clusters {
        n_clusters: usize,
        n_label_classes: usize,
    },
}

/// Deterministic synthetic (X, Y, E) generator.
///
/// The latent z is standard normal; features are a random linear expansion of
/// z plus noise; E is derived from z by the explanation rule; Y is derived
/// from E by the label rule, so E is strictly more informative than X alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_latent: usize,
    /// Noise added to Y (continuous rules only).
    pub label_noise: f64,
    /// Noise added to the feature expansion.
    pub feature_noise: f64,
    pub explanation_rule: ExplanationRule,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_features == 0 || self.n_latent == 0 {
            return Err(Error::InvalidValue("synthetic sizes must be positive".into()));
        }
        if self.n_latent > self.n_features {
            return Err(Error::InvalidValue(
                "n_latent must not exceed n_features".into(),
            ));
        }
        if self.label_noise < 0.0 || self.feature_noise < 0.0 {
            return Err(Error::InvalidValue("noise levels must be >= 0".into()));
        }
        match self.explanation_rule {
            ExplanationRule::Linear { n_outputs } if n_outputs == 0 => {
                Err(Error::InvalidValue("n_outputs must be positive".into()))
            }
            ExplanationRule::Clusters {
                n_clusters,
                n_label_classes,
            } if n_clusters == 0 || n_label_classes == 0 => {
                Err(Error::InvalidValue("cluster counts must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Generate a dataset as a pure function of the spec (all samples tagged train).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let n = spec.n_samples;
    let d = spec.n_features;
    let l = spec.n_latent;

    // Fixed maps first so sample noise draws do not perturb them.
    let expansion = Array2::from_shape_fn((d, l), |_| normal.sample(&mut rng));
    let latent = Array2::from_shape_fn((n, l), |_| normal.sample(&mut rng));
    let mut features = latent.dot(&expansion.t());
    if spec.feature_noise > 0.0 {
        for v in features.iter_mut() {
            *v += spec.feature_noise * normal.sample(&mut rng);
        }
    }

    let (labels, explanations, explanation_names) = match &spec.explanation_rule {
        ExplanationRule::Linear { n_outputs } => {
            let expl_map = Array2::from_shape_fn((*n_outputs, l), |_| normal.sample(&mut rng));
            let expl = latent.dot(&expl_map.t());
            let label_map = Array1::from_shape_fn(*n_outputs, |_| normal.sample(&mut rng));
            let mut y = expl.dot(&label_map);
            if spec.label_noise > 0.0 {
                for v in y.iter_mut() {
                    *v += spec.label_noise * normal.sample(&mut rng);
                }
            }
            let names = (0..*n_outputs).map(|i| format!("e{i}")).collect();
            (Labels::Continuous(y), Explanations::Continuous(expl), names)
        }
        ExplanationRule::Clusters {
            n_clusters,
            n_label_classes,
        } => {
            let centroids = Array2::from_shape_fn((*n_clusters, l), |_| normal.sample(&mut rng));
            let classes: Vec<usize> = latent
                .rows()
                .into_iter()
                .map(|z| {
                    let mut best = 0;
                    let mut best_d = f64::INFINITY;
                    for (c, row) in centroids.rows().into_iter().enumerate() {
                        let dist: f64 = z
                            .iter()
                            .zip(row.iter())
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        if dist < best_d {
                            best_d = dist;
                            best = c;
                        }
                    }
                    best
                })
                .collect();
            // Deterministic many-to-one cluster -> label map.
            let cluster_to_label: Vec<usize> = (0..*n_clusters)
                .map(|_| rng.gen_range(0..*n_label_classes))
                .collect();
            let labels: Vec<usize> = classes.iter().map(|&c| cluster_to_label[c]).collect();
            (
                Labels::Categorical {
                    classes: labels,
                    n_classes: *n_label_classes,
                },
                Explanations::Categorical {
                    classes,
                    n_classes: *n_clusters,
                },
                vec!["group".to_string()],
            )
        }
    };

    let feature_names = (0..d).map(|i| format!("x{i}")).collect();
    Dataset::new(
        features,
        labels,
        explanations,
        vec![Split::Train; n],
        feature_names,
        explanation_names,
    )
}

/// Which columns play which role in a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub label_column: String,
    pub label_kind: ValueKind,
    pub explanation_columns: Vec<String>,
    pub explanation_kind: ValueKind,
    /// Explicit feature column list, or everything not named elsewhere.
    pub feature_columns: FeatureColumns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureColumns {
    Named(Vec<String>),
    Rest,
}

impl CsvSchema {
    /// Parse the key-value sidecar format: `key = value` lines, `#` comments.
    pub fn parse(text: &str) -> Result<CsvSchema> {
        let mut kv = HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("expected 'key = value', got '{line}'")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let kind = |s: &str| match s {
            "continuous" => Ok(ValueKind::Continuous),
            "categorical" => Ok(ValueKind::Categorical),
            other => Err(Error::Schema(format!(
                "kind must be continuous or categorical, got '{other}'"
            ))),
        };
        let label_column = kv
            .get("label_column")
            .ok_or_else(|| Error::Schema("missing label_column".into()))?
            .clone();
        let label_kind = kind(kv.get("label_kind").map(String::as_str).unwrap_or("continuous"))?;
        let explanation_kind = kind(
            kv.get("explanation_kind")
                .map(String::as_str)
                .unwrap_or("continuous"),
        )?;
        let explanation_columns = kv
            .get("explanation_columns")
            .map(|s| {
                s.split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect()
            })
            .unwrap_or_default();
        let feature_columns = match kv.get("feature_columns").map(String::as_str) {
            None | Some("rest") => FeatureColumns::Rest,
            Some(list) => FeatureColumns::Named(
                list.split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect(),
            ),
        };
        Ok(CsvSchema {
            label_column,
            label_kind,
            explanation_columns,
            explanation_kind,
            feature_columns,
        })
    }

    pub fn load(path: &Path) -> Result<CsvSchema> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        CsvSchema::parse(&text)
    }
}

/// Load a comma-separated file (first row = header) under a column-role schema.
/// All samples are tagged train; apply `split_fixed` afterwards.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };

    let label_idx = col_index(&schema.label_column)?;
    let expl_idx: Vec<usize> = schema
        .explanation_columns
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    let feature_idx: Vec<usize> = match &schema.feature_columns {
        FeatureColumns::Named(cols) => cols.iter().map(|c| col_index(c)).collect::<Result<_>>()?,
        FeatureColumns::Rest => (0..headers.len())
            .filter(|i| *i != label_idx && !expl_idx.contains(i))
            .collect(),
    };
    if feature_idx.is_empty() {
        return Err(Error::Schema("schema names no feature columns".into()));
    }

    let parse_num = |cell: &str, row: usize, col: usize| -> Result<f64> {
        cell.trim().parse::<f64>().map_err(|_| Error::Csv {
            path: path.display().to_string(),
            detail: format!(
                "non-numeric cell '{}' at row {} column '{}'",
                cell, row, headers[col]
            ),
        })
    };

    let mut feature_rows: Vec<f64> = Vec::new();
    let mut label_raw: Vec<f64> = Vec::new();
    let mut expl_raw: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Csv {
                path: path.display().to_string(),
                detail: format!(
                    "ragged row {}: {} cells, expected {}",
                    r,
                    record.len(),
                    headers.len()
                ),
            });
        }
        for &j in &feature_idx {
            feature_rows.push(parse_num(&record[j], r, j)?);
        }
        label_raw.push(parse_num(&record[label_idx], r, label_idx)?);
        for &j in &expl_idx {
            expl_raw.push(parse_num(&record[j], r, j)?);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyDataset);
    }

    let to_classes = |raw: &[f64], what: &str| -> Result<(Vec<usize>, usize)> {
        let mut classes = Vec::with_capacity(raw.len());
        let mut max = 0usize;
        for &v in raw {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidValue(format!(
                    "categorical {what} value {v} is not a non-negative integer"
                )));
            }
            let c = v as usize;
            max = max.max(c);
            classes.push(c);
        }
        Ok((classes, max + 1))
    };

    let labels = match schema.label_kind {
        ValueKind::Continuous => Labels::Continuous(Array1::from_vec(label_raw)),
        ValueKind::Categorical => {
            let (classes, n_classes) = to_classes(&label_raw, "label")?;
            Labels::Categorical { classes, n_classes }
        }
    };
    let explanations = if expl_idx.is_empty() {
        Explanations::Continuous(Array2::zeros((n_rows, 0)))
    } else {
        match schema.explanation_kind {
            ValueKind::Continuous => Explanations::Continuous(
                Array2::from_shape_vec((n_rows, expl_idx.len()), expl_raw)
                    .expect("shape from counts"),
            ),
            ValueKind::Categorical => {
                if expl_idx.len() != 1 {
                    return Err(Error::Schema(
                        "categorical explanations need exactly one column".into(),
                    ));
                }
                let (classes, n_classes) = to_classes(&expl_raw, "explanation")?;
                Explanations::Categorical { classes, n_classes }
            }
        }
    };

    let features = Array2::from_shape_vec((n_rows, feature_idx.len()), feature_rows)
        .expect("shape from counts");
    let feature_names = feature_idx.iter().map(|&j| headers[j].clone()).collect();
    let explanation_names = expl_idx.iter().map(|&j| headers[j].clone()).collect();
    Dataset::new(
        features,
        labels,
        explanations,
        vec![Split::Train; n_rows],
        feature_names,
        explanation_names,
    )
}
