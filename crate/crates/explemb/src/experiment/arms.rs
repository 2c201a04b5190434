//! The experimental arms, each behind the [`Arm`] trait and selected by name
//! at runtime. An arm maps the prepared dataset to test-split predictions;
//! metric evaluation happens in the runner, which is the only place test
//! labels are read.

use ndarray::{Array1, Array2};

use crate::dataset::{Dataset, Explanations, Labels, Split};
use crate::error::{Error, Result};
use crate::knn::{self, Metric};
use crate::network::{HeadTarget, LossSpec, Network};
use crate::pairloss::{self, PairMode};

use super::config::ExperimentConfig;

/// Test-split label predictions of one arm setting.
#[derive(Debug, Clone, PartialEq)]
pub enum YPrediction {
    Continuous(Array1<f64>),
    Categorical(Vec<usize>),
}

/// Test-split explanation predictions of one arm setting.
#[derive(Debug, Clone, PartialEq)]
pub enum EPrediction {
    Continuous(Array2<f64>),
    Categorical(Vec<usize>),
}

/// Predictions at one parameter setting (one k or one lambda).
#[derive(Debug, Clone)]
pub struct ArmPrediction {
    /// "NA" for single-setting arms.
    pub param: String,
    pub y: Option<YPrediction>,
    pub e: Option<EPrediction>,
}

#[derive(Debug, Clone, Default)]
pub struct ArmOutput {
    pub predictions: Vec<ArmPrediction>,
}

/// Everything an arm may read: the prepared dataset, training-split slices,
/// test features, resolved config, and a derived seed. Test labels are not
/// reachable from here.
pub struct ArmContext<'a> {
    pub data: &'a Dataset,
    pub train_x: Array2<f64>,
    pub test_x: Array2<f64>,
    pub train_labels: Labels,
    pub train_explanations: Explanations,
    pub config: &'a ExperimentConfig,
    pub arm_seed: u64,
    /// When set, the arm writes its checkpoint/pairs/embedding artifacts here.
    pub artifact_dir: Option<std::path::PathBuf>,
}

impl<'a> ArmContext<'a> {
    pub fn prepare(
        data: &'a Dataset,
        config: &'a ExperimentConfig,
        arm_seed: u64,
        artifact_dir: Option<std::path::PathBuf>,
    ) -> Result<Self> {
        let train_rows = data.rows_of(Split::Train);
        let test_rows = data.rows_of(Split::Test);
        if train_rows.is_empty() || test_rows.is_empty() {
            return Err(Error::InvalidValue(
                "arms need non-empty train and test splits".into(),
            ));
        }
        Ok(ArmContext {
            data,
            train_x: data.features_of(&train_rows),
            test_x: data.features_of(&test_rows),
            train_labels: data.labels.select(&train_rows),
            train_explanations: data.explanations.select(&train_rows),
            config,
            arm_seed,
            artifact_dir,
        })
    }

    fn y_head_width(&self) -> usize {
        match &self.data.labels {
            Labels::Continuous(_) => 1,
            Labels::Categorical { n_classes, .. } => *n_classes,
        }
    }

    fn e_head_width(&self) -> Option<usize> {
        match &self.data.explanations {
            Explanations::Continuous(m) if m.ncols() == 0 => None,
            Explanations::Continuous(m) => Some(m.ncols()),
            Explanations::Categorical { n_classes, .. } => Some(*n_classes),
        }
    }

    fn y_target(&self) -> HeadTarget {
        match &self.train_labels {
            Labels::Continuous(v) => {
                HeadTarget::Regression(v.clone().insert_axis(ndarray::Axis(1)))
            }
            Labels::Categorical { classes, .. } => HeadTarget::Classes(classes.clone()),
        }
    }

    fn e_target(&self) -> Result<HeadTarget> {
        match &self.train_explanations {
            Explanations::Continuous(m) if m.ncols() == 0 => Err(Error::InvalidValue(
                "this arm needs explanations but the dataset has none".into(),
            )),
            Explanations::Continuous(m) => Ok(HeadTarget::Regression(m.clone())),
            Explanations::Categorical { classes, .. } => Ok(HeadTarget::Classes(classes.clone())),
        }
    }

    /// Fresh seeded network with both heads (the E head only when the dataset
    /// carries explanations).
    fn build_network(&self) -> Result<Network> {
        let e_widths = self.e_head_width().map(|w| vec![w]);
        Network::dense(
            &[self.data.n_features(), self.config.embedding_width],
            &[self.y_head_width()],
            e_widths.as_deref(),
            self.config.activation,
            self.arm_seed ^ 0x9e3779b97f4a7c15,
        )
    }

    fn train_with(&self, arm: &str, spec: &LossSpec) -> Result<Network> {
        let net = self.build_network()?;
        let config = self.config.train_config(arm, self.arm_seed ^ 1)?;
        let (trained, _) = crate::network::train(&net, &self.train_x, spec, &config)?;
        if let Some(dir) = &self.artifact_dir {
            trained.save_checkpoint(&dir.join("checkpoint.txt"))?;
        }
        Ok(trained)
    }

    fn head_prediction_y(&self, net: &Network) -> Result<YPrediction> {
        let out = net.forward(&self.test_x)?.y_output().clone();
        Ok(match &self.data.labels {
            Labels::Continuous(_) => YPrediction::Continuous(out.column(0).to_owned()),
            Labels::Categorical { .. } => YPrediction::Categorical(argmax_rows(&out)),
        })
    }

    fn head_prediction_e(&self, net: &Network) -> Result<EPrediction> {
        let pass = net.forward(&self.test_x)?;
        let out = pass
            .e_output()
            .ok_or_else(|| Error::InvalidValue("network has no E head".into()))?
            .clone();
        Ok(match &self.data.explanations {
            Explanations::Continuous(_) => EPrediction::Continuous(out),
            Explanations::Categorical { .. } => EPrediction::Categorical(argmax_rows(&out)),
        })
    }

    /// kNN predictions of Y and E over the embedding of `net`, one entry per
    /// configured k.
    fn knn_predictions(
        &self,
        arm: &str,
        net: &Network,
        default_metric: Metric,
    ) -> Result<Vec<ArmPrediction>> {
        let knn_cfg = self.config.knn_config(arm)?;
        let metric = knn_cfg.metric.unwrap_or(default_metric);
        let train_emb = net.embed(&self.train_x)?;
        let index = knn::build_index(
            train_emb,
            self.train_labels.clone(),
            self.train_explanations.clone(),
            metric,
            knn_cfg.bandwidth,
        )?;
        if let Some(dir) = &self.artifact_dir {
            index.save(&dir.join("index.txt"))?;
        }
        let test_emb = net.embed(&self.test_x)?;
        let mut out = Vec::with_capacity(knn_cfg.ks.len());
        for &k in &knn_cfg.ks {
            let mut y_cont = Vec::new();
            let mut y_cat = Vec::new();
            let mut e_cont: Vec<Array1<f64>> = Vec::new();
            let mut e_cat = Vec::new();
            for row in test_emb.rows() {
                let nbhd = index.query(row, k)?;
                match &index.y_values {
                    Labels::Continuous(v) => {
                        let m = v.clone().insert_axis(ndarray::Axis(1));
                        y_cont.push(knn::predict_continuous(&nbhd, &m)?[0]);
                    }
                    Labels::Categorical { classes, n_classes } => {
                        y_cat.push(knn::predict_categorical(
                            &nbhd,
                            classes,
                            *n_classes,
                            knn_cfg.majority_vote,
                        )?);
                    }
                }
                match &index.e_values {
                    Explanations::Continuous(m) if m.ncols() == 0 => {}
                    Explanations::Continuous(m) => {
                        e_cont.push(knn::predict_continuous(&nbhd, m)?);
                    }
                    Explanations::Categorical { classes, n_classes } => {
                        e_cat.push(knn::predict_categorical(
                            &nbhd,
                            classes,
                            *n_classes,
                            knn_cfg.majority_vote,
                        )?);
                    }
                }
            }
            let y = if !y_cont.is_empty() {
                Some(YPrediction::Continuous(Array1::from_vec(y_cont)))
            } else {
                Some(YPrediction::Categorical(y_cat))
            };
            let e = if !e_cont.is_empty() {
                let width = e_cont[0].len();
                let mut m = Array2::zeros((e_cont.len(), width));
                for (r, v) in e_cont.iter().enumerate() {
                    m.row_mut(r).assign(v);
                }
                Some(EPrediction::Continuous(m))
            } else if !e_cat.is_empty() {
                Some(EPrediction::Categorical(e_cat))
            } else {
                None
            };
            out.push(ArmPrediction {
                param: k.to_string(),
                y,
                e,
            });
        }
        Ok(out)
    }

    /// Embedding trained with the pairwise loss in the given mode, starting
    /// from scratch or from the baseline-Y network when warm_start is set.
    fn pairwise_network(&self, arm: &str, mode: PairMode) -> Result<Network> {
        let pw = self.config.pairwise_config(arm, self.arm_seed ^ 2)?;
        let pairs = pairloss::sample_pairs(
            self.data,
            &pw.neighbor_spec,
            pw.n_pairs,
            self.arm_seed ^ 3,
            mode,
        )?;
        if let Some(dir) = &self.artifact_dir {
            pairs.save(&dir.join("pairs.txt"))?;
        }
        let init = if pw.warm_start {
            self.train_with(arm, &LossSpec::YOnly(self.y_target()))?
        } else {
            self.build_network()?
        };
        let (trained, _) = pairloss::train_pairwise(
            &init,
            &self.train_x,
            &pairs,
            &pw.loss_params,
            &pw.train,
            mode,
        )?;
        if let Some(dir) = &self.artifact_dir {
            trained.save_checkpoint(&dir.join("checkpoint.txt"))?;
        }
        Ok(trained)
    }
}

fn argmax_rows(m: &Array2<f64>) -> Vec<usize> {
    m.rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// One experimental pipeline variant.
pub trait Arm: Sync {
    fn name(&self) -> &'static str;
    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput>;
}

struct BaselineY;

impl Arm for BaselineY {
    fn name(&self) -> &'static str {
        "baseline_y"
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let net = ctx.train_with(self.name(), &LossSpec::YOnly(ctx.y_target()))?;
        Ok(ArmOutput {
            predictions: vec![ArmPrediction {
                param: "NA".into(),
                y: Some(ctx.head_prediction_y(&net)?),
                e: None,
            }],
        })
    }
}

struct BaselineE;

impl Arm for BaselineE {
    fn name(&self) -> &'static str {
        "baseline_e"
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let net = ctx.train_with(self.name(), &LossSpec::EOnly(ctx.e_target()?))?;
        Ok(ArmOutput {
            predictions: vec![ArmPrediction {
                param: "NA".into(),
                y: None,
                e: Some(ctx.head_prediction_e(&net)?),
            }],
        })
    }
}

struct Multitask;

impl Arm for Multitask {
    fn name(&self) -> &'static str {
        "multitask"
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let mut predictions = Vec::new();
        for &lambda in &ctx.config.lambdas {
            let spec = LossSpec::Multitask {
                y: ctx.y_target(),
                e: ctx.e_target()?,
                lambda,
            };
            let net = ctx.train_with(self.name(), &spec)?;
            predictions.push(ArmPrediction {
                param: format!("{lambda}"),
                y: Some(ctx.head_prediction_y(&net)?),
                e: Some(ctx.head_prediction_e(&net)?),
            });
        }
        Ok(ArmOutput { predictions })
    }
}

struct EmbedYKnn;

impl Arm for EmbedYKnn {
    fn name(&self) -> &'static str {
        "embed_y_knn"
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let net = ctx.train_with(self.name(), &LossSpec::YOnly(ctx.y_target()))?;
        Ok(ArmOutput {
            predictions: ctx.knn_predictions(self.name(), &net, Metric::Euclidean)?,
        })
    }
}

struct EmbedEKnn;

impl Arm for EmbedEKnn {
    fn name(&self) -> &'static str {
        "embed_e_knn"
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let net = ctx.train_with(self.name(), &LossSpec::EOnly(ctx.e_target()?))?;
        Ok(ArmOutput {
            predictions: ctx.knn_predictions(self.name(), &net, Metric::Euclidean)?,
        })
    }
}

struct PairwiseKnn {
    arm_name: &'static str,
    mode: PairMode,
}

impl Arm for PairwiseKnn {
    fn name(&self) -> &'static str {
        self.arm_name
    }

    fn run(&self, ctx: &ArmContext) -> Result<ArmOutput> {
        let net = ctx.pairwise_network(self.name(), self.mode)?;
        Ok(ArmOutput {
            predictions: ctx.knn_predictions(self.name(), &net, Metric::Cosine)?,
        })
    }
}

/// All known arms, in the canonical report order.
pub fn registry() -> Vec<Box<dyn Arm>> {
    vec![
        Box::new(BaselineY),
        Box::new(BaselineE),
        Box::new(Multitask),
        Box::new(EmbedYKnn),
        Box::new(EmbedEKnn),
        Box::new(PairwiseKnn {
            arm_name: "pairwise_y_knn",
            mode: PairMode::YOnly,
        }),
        Box::new(PairwiseKnn {
            arm_name: "pairwise_e_knn",
            mode: PairMode::EOnly,
        }),
        Box::new(PairwiseKnn {
            arm_name: "pairwise_ye_knn",
            mode: PairMode::YAndE,
        }),
    ]
}

/// Look an arm up by its registered name.
pub fn arm_by_name(name: &str) -> Result<Box<dyn Arm>> {
    registry()
        .into_iter()
        .find(|a| a.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = registry().iter().map(|a| a.name()).collect();
            Error::Config(format!(
                "unknown arm '{name}'; known arms: {}",
                known.join(", ")
            ))
        })
}
