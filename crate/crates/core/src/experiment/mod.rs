//! The transform × augmentation study: plans, per-run pipeline, reports.

mod render;
mod runner;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::classify::SchemeKind;
use crate::data::SplitSpec;
use crate::error::{Error, Result};
use crate::metrics::{ClasswiseReport, ConfusionMatrix, TTestResult};
use crate::network::{TrainConfig, TrainReport, DEFAULT_DROPOUT};
use crate::preprocess::{CspScheme, FilterBankSpec};

pub use render::{matrix_table, render_comparison, render_report, OutputFormat};
pub use runner::{compare_augmentation, compare_means, run_experiment, run_experiment_on, run_matrix, run_matrix_on};

/// Stage streams under a run seed.
pub mod stream {
    pub const SPLIT: u64 = 0;
    pub const AUGMENT: u64 = 1;
    pub const INIT: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Transform {
    #[serde(rename = "NTS")]
    Nts,
    #[serde(rename = "TS")]
    Ts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Augmentation {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "NA")]
    Na,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CspSettings {
    pub m: usize,
    #[serde(default)]
    pub bank: FilterBankSpec,
    /// Defaults to two-class for 2 classes and one-vs-rest otherwise.
    #[serde(default)]
    pub scheme: Option<CspScheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub dataset: Option<PathBuf>,
    /// Needed only for CSV datasets.
    pub csv_sampling_rate: Option<f64>,
    pub subject_id: Option<String>,
    pub transform: Transform,
    pub augment: Augmentation,
    pub augment_config: AugmentConfig,
    pub csp: Option<CspSettings>,
    /// Triple syntax, e.g. `"2,7,40 / 40,7,40 / 40,16,16"`.
    pub structure: String,
    pub codebook_order: usize,
    pub batch_norm: bool,
    pub dropout: f64,
    pub train: TrainConfig,
    pub scheme: SchemeKind,
    pub split: SplitSpec,
    /// Stratified cap on the post-validation training partition.
    pub max_train_epochs: Option<usize>,
    pub n_runs: usize,
    pub master_seed: u64,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            dataset: None,
            csv_sampling_rate: None,
            subject_id: None,
            transform: Transform::Nts,
            augment: Augmentation::Na,
            augment_config: AugmentConfig::default(),
            csp: None,
            structure: String::new(),
            codebook_order: 16,
            batch_norm: true,
            dropout: DEFAULT_DROPOUT,
            train: TrainConfig::default(),
            scheme: SchemeKind::Single,
            split: SplitSpec::default(),
            max_train_epochs: None,
            n_runs: 30,
            master_seed: 0,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be >= 1".into()));
        }
        if self.transform == Transform::Ts && self.csp.is_none() {
            return Err(Error::InvalidConfig("TS plans need csp settings (m)".into()));
        }
        if self.structure.trim().is_empty() {
            return Err(Error::InvalidConfig("plan has no network structure".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.max_train_epochs == Some(0) {
            return Err(Error::InvalidConfig("max_train_epochs must be >= 1".into()));
        }
        self.split.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Cell label such as `TS-A`.
    pub fn label(&self) -> String {
        let t = match self.transform {
            Transform::Nts => "NTS",
            Transform::Ts => "TS",
        };
        let a = match self.augment {
            Augmentation::A => "A",
            Augmentation::Na => "NA",
        };
        format!("{t}-{a}")
    }

    pub fn cell(&self, transform: Transform, augment: Augmentation) -> Self {
        ExperimentPlan {
            transform,
            augment,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub kappa: f64,
    pub classwise: ClasswiseReport,
    pub confusion: ConfusionMatrix,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    pub test_indices: Vec<usize>,
    pub network_input_channels: usize,
    /// One report per member network.
    pub training: Vec<TrainReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run: usize,
    pub seed: u64,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAggregate {
    pub ppv: f64,
    pub npv: f64,
    pub sensitivity: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub successful_runs: usize,
    pub failed_runs: usize,
    pub mean_accuracy: f64,
    /// Sample standard deviation; 0 with fewer than two runs.
    pub std_accuracy: f64,
    pub mean_kappa: f64,
    pub std_kappa: f64,
    pub classes: Vec<ClassAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub library_version: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub dataset_fingerprint: String,
    pub num_classes: usize,
    pub channels: usize,
    pub samples: usize,
    pub covariance_convention: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub label: String,
    pub subject_id: String,
    pub plan: ExperimentPlan,
    pub provenance: Provenance,
    pub runs: Vec<RunEntry>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixReport {
    pub cells: Vec<ExperimentReport>,
}

impl MatrixReport {
    pub fn cell(&self, label: &str) -> Option<&ExperimentReport> {
        self.cells.iter().find(|c| c.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub subjects: Vec<String>,
    pub with_augmentation: Vec<f64>,
    pub without_augmentation: Vec<f64>,
    pub ttest: TTestResult,
    pub summary: String,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    pub fn from_runs(runs: &[RunEntry], num_classes: usize) -> Self {
        let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let acc: Vec<f64> = ok.iter().map(|m| m.accuracy).collect();
        let kap: Vec<f64> = ok.iter().map(|m| m.kappa).collect();
        let (mean_accuracy, std_accuracy) = mean_std(&acc);
        let (mean_kappa, std_kappa) = mean_std(&kap);
        let classes = (0..num_classes)
            .map(|c| {
                let pick = |f: fn(&crate::metrics::ClassMetrics) -> f64| {
                    mean_std(&ok.iter().filter_map(|m| m.classwise.classes.get(c).map(f)).collect::<Vec<_>>()).0
                };
                ClassAggregate {
                    ppv: pick(|m| m.ppv),
                    npv: pick(|m| m.npv),
                    sensitivity: pick(|m| m.sensitivity),
                    f_measure: pick(|m| m.f_measure),
                }
            })
            .collect();
        Aggregate {
            successful_runs: ok.len(),
            failed_runs: runs.len() - ok.len(),
            mean_accuracy,
            std_accuracy,
            mean_kappa,
            std_kappa,
            classes,
        }
    }
}
