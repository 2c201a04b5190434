//! Flat key-value experiment configuration with section headers.
//!
//! The format is deliberately nesting-free: `[section]` lines open a section,
//! `key = value` lines set keys, `#` starts a comment. Per-arm overrides live
//! in `[arm <name>]` sections and shadow the base sections key-by-key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::dataset::{ExplanationRule, SyntheticSpec};
use crate::error::{Error, Result};
use crate::knn::{BandwidthPolicy, Metric};
use crate::network::{Activation, TrainConfig};
use crate::pairloss::{LossParams, NeighborSpec};

/// Raw parsed sections, preserving declaration order of keys per section.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> Result<ConfigFile> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ConfigFile::parse(&text)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    /// Arm-override lookup: `[arm <name>]` first, then the base section.
    pub fn get_for_arm(&self, arm: &str, section: &str, key: &str) -> Option<&str> {
        self.get(&format!("arm {arm}"), key)
            .or_else(|| self.get(section, key))
    }

    /// Canonical text for hashing: sorted sections and keys.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.sections {
            out.push_str(&format!("[{section}]\n"));
            for (k, v) in keys {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }
}

fn parse<T: std::str::FromStr>(value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {what} from '{value}'")))
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s, what))
        .collect()
}

fn parse_bool(value: &str, what: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("cannot parse {what} from '{value}'"))),
    }
}

/// Where the dataset comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv {
        csv_path: PathBuf,
        schema_path: PathBuf,
    },
    Synthetic(SyntheticSpec),
}

/// Either fixed thresholds or training-tertile auto-fitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    Auto,
    Fixed(f64, f64),
}

impl ThresholdSpec {
    fn parse(value: &str) -> Result<ThresholdSpec> {
        if value == "auto" {
            return Ok(ThresholdSpec::Auto);
        }
        let parts: Vec<f64> = parse_list(value, "threshold")?;
        if parts.len() != 2 {
            return Err(Error::Config(format!(
                "thresholds need two comma-separated values or 'auto', got '{value}'"
            )));
        }
        Ok(ThresholdSpec::Fixed(parts[0], parts[1]))
    }
}

/// Pairwise-training settings resolved for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseConfig {
    pub n_pairs: usize,
    pub neighbor_spec: NeighborSpec,
    pub loss_params: LossParams,
    pub train: TrainConfig,
    /// Initialize the trunk from the trained baseline-Y network.
    pub warm_start: bool,
}

/// kNN settings resolved for one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnConfig {
    pub ks: Vec<usize>,
    /// Metric override; per-arm defaults apply when absent.
    pub metric: Option<Metric>,
    pub bandwidth: BandwidthPolicy,
    pub majority_vote: bool,
}

/// Everything `run_experiment` needs, resolved from a config file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub log_transform: bool,
    pub standardize: bool,
    /// 0 keeps every feature.
    pub select_k: usize,
    pub split: (usize, usize, usize),
    pub arms: Vec<String>,
    pub embedding_width: usize,
    pub activation: Activation,
    pub lambdas: Vec<f64>,
    pub y_thresholds: ThresholdSpec,
    pub e_thresholds: ThresholdSpec,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Raw file kept for per-arm overrides and the manifest hash.
    pub raw: ConfigFile,
}

/// Synthetic dataset spec from a `[dataset]` section; every key has a default.
pub fn synthetic_spec_from_file(file: &ConfigFile) -> Result<SyntheticSpec> {
    let rule = match file.get("dataset", "explanation_rule").unwrap_or("linear") {
        "linear" => ExplanationRule::Linear {
            n_outputs: parse(
                file.get("dataset", "n_explanations").unwrap_or("5"),
                "n_explanations",
            )?,
        },
        "clusters" => ExplanationRule::Clusters {
            n_clusters: parse(file.get("dataset", "n_clusters").unwrap_or("5"), "n_clusters")?,
            n_label_classes: parse(
                file.get("dataset", "n_label_classes").unwrap_or("3"),
                "n_label_classes",
            )?,
        },
        other => return Err(Error::Config(format!("unknown explanation_rule '{other}'"))),
    };
    Ok(SyntheticSpec {
        n_samples: parse(file.get("dataset", "n_samples").unwrap_or("500"), "n_samples")?,
        n_features: parse(file.get("dataset", "n_features").unwrap_or("50"), "n_features")?,
        n_latent: parse(file.get("dataset", "n_latent").unwrap_or("5"), "n_latent")?,
        label_noise: parse(file.get("dataset", "label_noise").unwrap_or("0.0"), "label_noise")?,
        feature_noise: parse(
            file.get("dataset", "feature_noise").unwrap_or("0.5"),
            "feature_noise",
        )?,
        explanation_rule: rule,
        seed: parse(file.get("dataset", "data_seed").unwrap_or("1"), "data_seed")?,
    })
}

impl ExperimentConfig {
    pub fn from_file(file: ConfigFile) -> Result<ExperimentConfig> {
        let source = match file.get("dataset", "source") {
            Some("csv") => DataSource::Csv {
                csv_path: PathBuf::from(
                    file.get("dataset", "csv_path")
                        .ok_or_else(|| Error::Config("csv source needs csv_path".into()))?,
                ),
                schema_path: PathBuf::from(
                    file.get("dataset", "schema_path")
                        .ok_or_else(|| Error::Config("csv source needs schema_path".into()))?,
                ),
            },
            Some("synthetic") | None => DataSource::Synthetic(synthetic_spec_from_file(&file)?),
            Some(other) => {
                return Err(Error::Config(format!("unknown dataset source '{other}'")))
            }
        };

        let split = {
            let text = file
                .get("preprocess", "split")
                .ok_or_else(|| Error::Config("missing preprocess.split = train,val,test".into()))?;
            let parts: Vec<usize> = parse_list(text, "split count")?;
            if parts.len() != 3 {
                return Err(Error::Config("split needs three counts".into()));
            }
            (parts[0], parts[1], parts[2])
        };

        let arms: Vec<String> = file
            .get("arms", "run")
            .map(|s| {
                s.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();

        let activation = Activation::from_tag(file.get("train", "activation").unwrap_or("identity"))?;

        Ok(ExperimentConfig {
            source,
            log_transform: parse_bool(
                file.get("preprocess", "log_transform").unwrap_or("false"),
                "log_transform",
            )?,
            standardize: parse_bool(
                file.get("preprocess", "standardize").unwrap_or("true"),
                "standardize",
            )?,
            select_k: parse(file.get("preprocess", "select_k").unwrap_or("0"), "select_k")?,
            split,
            arms,
            embedding_width: parse(
                file.get("train", "embedding_width").unwrap_or("64"),
                "embedding_width",
            )?,
            activation,
            lambdas: parse_list(file.get("train", "lambdas").unwrap_or("1.0"), "lambda")?,
            y_thresholds: ThresholdSpec::parse(file.get("metrics", "y_thresholds").unwrap_or("auto"))?,
            e_thresholds: ThresholdSpec::parse(file.get("metrics", "e_thresholds").unwrap_or("auto"))?,
            seed: parse(file.get("experiment", "seed").unwrap_or("0"), "seed")?,
            out_dir: PathBuf::from(file.get("experiment", "out_dir").unwrap_or("out")),
            raw: file,
        })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        ExperimentConfig::from_file(ConfigFile::load(path)?)
    }

    /// Base training config with `[arm <name>]` overrides applied; the
    /// `dropout` key is recognized only to be rejected.
    pub fn train_config(&self, arm: &str, seed: u64) -> Result<TrainConfig> {
        if self.raw.get_for_arm(arm, "train", "dropout").is_some() {
            return Err(Error::Config(
                "dropout is not supported by the dense networks".into(),
            ));
        }
        let g = |key: &str, default: &str| -> String {
            self.raw
                .get_for_arm(arm, "train", key)
                .unwrap_or(default)
                .to_string()
        };
        let trunk_lr = match self.raw.get_for_arm(arm, "train", "trunk_learning_rate") {
            Some(v) => Some(parse(v, "trunk_learning_rate")?),
            None => None,
        };
        let config = TrainConfig {
            epochs: parse(&g("epochs", "200"), "epochs")?,
            batch_size: parse(&g("batch_size", "64"), "batch_size")?,
            learning_rate: parse(&g("learning_rate", "0.001"), "learning_rate")?,
            trunk_learning_rate: trunk_lr,
            lambda: 1.0,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    /// Pairwise settings with `[arm <name>]` overrides applied.
    pub fn pairwise_config(&self, arm: &str, seed: u64) -> Result<PairwiseConfig> {
        let g = |key: &str, default: &str| -> String {
            self.raw
                .get_for_arm(arm, "pairwise", key)
                .unwrap_or(default)
                .to_string()
        };
        let neighbor_spec = if self.raw.get_for_arm(arm, "pairwise", "categorical").is_some() {
            NeighborSpec::Categorical
        } else {
            NeighborSpec::Continuous {
                c1: parse(&g("c1", "0.1"), "c1")?,
                c2: parse(&g("c2", "0.1"), "c2")?,
                c3: parse(&g("c3", "0.1"), "c3")?,
                c4: parse(&g("c4", "0.1"), "c4")?,
            }
        };
        neighbor_spec.validate()?;
        let loss_params = LossParams {
            m1: parse(&g("m1", "0.25"), "m1")?,
            m2: parse(&g("m2", "0.25"), "m2")?,
            w: parse(&g("w", "1.0"), "w")?,
        };
        loss_params.validate()?;
        let trunk_lr = match self.raw.get_for_arm(arm, "pairwise", "trunk_learning_rate") {
            Some(v) => Some(parse(v, "trunk_learning_rate")?),
            None => None,
        };
        let train = TrainConfig {
            epochs: parse(&g("epochs", "30"), "pairwise epochs")?,
            batch_size: parse(&g("batch_size", "64"), "pairwise batch_size")?,
            learning_rate: parse(&g("learning_rate", "0.001"), "pairwise learning_rate")?,
            trunk_learning_rate: trunk_lr,
            lambda: 1.0,
            seed,
        };
        train.validate()?;
        Ok(PairwiseConfig {
            n_pairs: parse(&g("n_pairs", "2000"), "n_pairs")?,
            neighbor_spec,
            loss_params,
            train,
            warm_start: parse_bool(&g("warm_start", "false"), "warm_start")?,
        })
    }

    /// kNN settings with `[arm <name>]` overrides applied.
    pub fn knn_config(&self, arm: &str) -> Result<KnnConfig> {
        let metric = match self.raw.get_for_arm(arm, "knn", "metric") {
            Some(tag) => Some(Metric::from_tag(tag)?),
            None => None,
        };
        let bandwidth = match self.raw.get_for_arm(arm, "knn", "bandwidth") {
            None | Some("median") => BandwidthPolicy::MedianDistance,
            Some(v) => {
                let sigma: f64 = parse(v, "bandwidth")?;
                if sigma <= 0.0 {
                    return Err(Error::Config("bandwidth must be positive".into()));
                }
                BandwidthPolicy::Fixed(sigma)
            }
        };
        let majority_vote = match self.raw.get_for_arm(arm, "knn", "categorical_vote") {
            None | Some("kernel") => false,
            Some("majority") => true,
            Some(other) => {
                return Err(Error::Config(format!(
                    "categorical_vote must be kernel or majority, got '{other}'"
                )))
            }
        };
        Ok(KnnConfig {
            ks: parse_list(
                self.raw.get_for_arm(arm, "knn", "ks").unwrap_or("1,2,5,10,15,20"),
                "k",
            )?,
            metric,
            bandwidth,
            majority_vote,
        })
    }
}
