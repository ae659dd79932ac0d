//! Per-crop training and the full four-model comparison.
//!
//! Every stage draws its seed from the run seed with
//! [`derive_seed`](crate::rng::derive_seed) and a fixed label:
//! `split/<Crop>` for the crop's train/test split and `<method>/<Crop>` for
//! the model trained on it.

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::baselines::{
    train_forest, train_logistic, train_svm, ForestConfig, LogisticConfig, Method, Model, ModelKind,
    SvmConfig, TrainingInfo,
};
use crate::error::{ModelError, PipelineError};
use crate::eval::{compare, CropReport, EvalReport};
use crate::ingest::{apply_normalizer, fit_normalizer, split, Dataset, NormalizedData, Normalizer, SplitConfig};
use crate::nn::{self, Activation, LossHistory, TrainConfig};
use crate::rng::derive_seed;
use crate::schema::{Crop, NUM_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DnnConfig {
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    /// Fields left out of a config file keep the pipeline values below,
    /// not those of [`TrainConfig::default`].
    #[serde(deserialize_with = "train_over_pipeline_defaults")]
    pub train: TrainConfig,
}

/// The pipeline trains harder than [`TrainConfig::default`]: a larger step,
/// smaller batches and a longer patience window.
impl Default for DnnConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![64, 32, 16],
            activation: Activation::Relu,
            train: TrainConfig {
                learning_rate: 0.1,
                batch_size: 16,
                max_epochs: 400,
                patience: 50,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Deserialize)]
struct PartialTrain {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    max_epochs: Option<usize>,
    patience: Option<usize>,
    seed: Option<u64>,
    validation_fraction: Option<f64>,
}

fn train_over_pipeline_defaults<'de, D: Deserializer<'de>>(d: D) -> Result<TrainConfig, D::Error> {
    let p = PartialTrain::deserialize(d)?;
    let base = DnnConfig::default().train;
    Ok(TrainConfig {
        learning_rate: p.learning_rate.unwrap_or(base.learning_rate),
        batch_size: p.batch_size.unwrap_or(base.batch_size),
        max_epochs: p.max_epochs.unwrap_or(base.max_epochs),
        patience: p.patience.unwrap_or(base.patience),
        seed: p.seed.unwrap_or(base.seed),
        validation_fraction: p.validation_fraction.unwrap_or(base.validation_fraction),
    })
}

impl DnnConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![NUM_FEATURES];
        sizes.extend(&self.hidden_layers);
        sizes.push(1);
        sizes
    }
}

/// Hyperparameters for every model. Seeds inside the nested configs are
/// ignored; they are derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub dnn: DnnConfig,
    pub svm: SvmConfig,
    pub logistic: LogisticConfig,
    pub forest: ForestConfig,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            dnn: DnnConfig::default(),
            svm: SvmConfig::default(),
            logistic: LogisticConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

pub fn split_seed(seed: u64, crop: Crop) -> u64 {
    derive_seed(seed, &format!("split/{crop:?}"))
}

pub fn model_seed(seed: u64, method: Method, crop: Crop) -> u64 {
    derive_seed(seed, &format!("{}/{crop:?}", method.key()))
}

/// One crop's split with the normalizer fitted on its training part.
#[derive(Debug, Clone)]
pub struct CropSplit {
    pub crop: Crop,
    pub split: SplitConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub normalizer: Normalizer,
    pub train_data: NormalizedData,
}

pub fn prepare_crop(dataset: &Dataset, crop: Crop, train_ratio: f64, seed: u64) -> Result<CropSplit, PipelineError> {
    let cfg = SplitConfig { train_ratio, seed: split_seed(seed, crop) };
    let (train, test) = split(&dataset.for_crop(crop), &cfg)?;
    let normalizer = fit_normalizer(&train)?;
    let train_data = apply_normalizer(&normalizer, &train);
    Ok(CropSplit { crop, split: cfg, train, test, normalizer, train_data })
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub model: Model,
    /// Present for the network only.
    pub loss_history: Option<LossHistory>,
}

pub fn train_method(
    method: Method,
    data: &CropSplit,
    settings: &ModelSettings,
    seed: u64,
) -> Result<TrainedModel, PipelineError> {
    let seed = model_seed(seed, method, data.crop);
    let (x, y) = (&data.train_data.features, &data.train_data.targets);
    let mut loss_history = None;
    let kind = match method {
        Method::Dnn => {
            let cfg = &settings.dnn;
            let net = nn::init_network(&cfg.layer_sizes(), cfg.activation, derive_seed(seed, "init"))
                .map_err(ModelError::from)?;
            let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
            let (net, history) = nn::train(net, x, y, &train_cfg).map_err(ModelError::from)?;
            loss_history = Some(history);
            ModelKind::Dnn(net)
        }
        Method::Svm => {
            let cfg = SvmConfig { seed, ..settings.svm.clone() };
            ModelKind::Svm(train_svm(x, y, &cfg)?.0)
        }
        Method::Logistic => {
            let cfg = LogisticConfig { seed, ..settings.logistic.clone() };
            ModelKind::Logistic(train_logistic(x, y, &cfg)?.0)
        }
        Method::Forest => {
            let cfg = ForestConfig { seed, ..settings.forest.clone() };
            ModelKind::Forest(train_forest(x, y, &cfg)?)
        }
    };
    let mut model = Model::new(kind, data.normalizer.clone());
    model.crop = Some(data.crop);
    model.training = Some(TrainingInfo {
        train_ratio: data.split.train_ratio,
        split_seed: data.split.seed,
    });
    Ok(TrainedModel { model, loss_history })
}

#[derive(Debug, Clone)]
pub struct ReportOutput {
    pub report: EvalReport,
    /// Trained models in report order: crops, then methods.
    pub models: Vec<(Crop, Method, TrainedModel)>,
}

/// Trains all four methods for every crop present in `dataset` and scores
/// them on each crop's held-out split.
pub fn run_report(
    dataset: &Dataset,
    settings: &ModelSettings,
    train_ratio: f64,
    seed: u64,
) -> Result<ReportOutput, PipelineError> {
    let present: Vec<Crop> = Crop::ALL
        .iter()
        .copied()
        .filter(|&c| dataset.records.iter().any(|r| r.crop == c))
        .collect();
    let per_crop = present
        .par_iter()
        .map(|&crop| -> Result<_, PipelineError> {
            let data = prepare_crop(dataset, crop, train_ratio, seed)?;
            let trained = Method::ALL
                .iter()
                .map(|&m| train_method(m, &data, settings, seed))
                .collect::<Result<Vec<_>, _>>()?;
            let slots = [&trained[0].model, &trained[1].model, &trained[2].model, &trained[3].model];
            let rows = compare(slots, &data.test, train_ratio)?;
            let report = CropReport {
                crop,
                n_train: data.train.len(),
                n_test: data.test.len(),
                rows,
            };
            Ok((report, trained))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut crops = Vec::new();
    let mut models = Vec::new();
    for (report, trained) in per_crop {
        let crop = report.crop;
        crops.push(report);
        models.extend(Method::ALL.into_iter().zip(trained).map(|(m, t)| (crop, m, t)));
    }
    Ok(ReportOutput {
        report: EvalReport {
            provenance: dataset.source.clone(),
            seed,
            crops,
        },
        models,
    })
}
