use std::collections::HashSet;

use super::{
    stream, Aggregate, Augmentation, Comparison, CspSettings, ExperimentPlan, ExperimentReport, MatrixReport,
    Provenance, RunEntry, RunMetrics, Transform,
};
use crate::augment::{augment_set, AugmentConfig};
use crate::classify::{member_classes, MdnClassifier, Member, MetaScheme, SchemeKind};
use crate::data::{load_epochs, split_dataset, stratified_subsample, CsvOptions, EpochSet, Format, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::{classwise_metrics, confusion, paired_ttest};
use crate::network::{parse_structure, train, Network, NetworkSpec, TrainConfig};
use crate::preprocess::{apply_filter_bank, fit_csp, transform_set, CspScheme};
use crate::scalar::Real;
use crate::seed;
use crate::walsh::WalshCodebook;

/// Digests of held-out epochs; any stage that may only see training data
/// checks its input against them.
struct HeldOut {
    digests: HashSet<[u8; 32]>,
}

impl HeldOut {
    fn new<T: Real>(sets: &[&EpochSet<T>]) -> Self {
        HeldOut {
            digests: sets.iter().flat_map(|s| s.iter().map(|e| e.digest())).collect(),
        }
    }

    fn check<T: Real>(&self, stage: &str, set: &EpochSet<T>) -> Result<()> {
        if let Some(i) = set.iter().position(|e| self.digests.contains(&e.digest())) {
            return Err(Error::DataFlow(format!(
                "{stage} received epoch {i}, which belongs to a validation or test partition"
            )));
        }
        Ok(())
    }
}

fn load_plan_dataset<T: Real>(plan: &ExperimentPlan) -> Result<EpochSet<T>> {
    let path = plan
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("plan has no dataset path".into()))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let format = if is_csv {
        let sampling_rate = plan
            .csv_sampling_rate
            .ok_or_else(|| Error::InvalidConfig("CSV datasets need csv_sampling_rate".into()))?;
        Format::Csv(CsvOptions {
            sampling_rate,
            num_classes: None,
        })
    } else {
        Format::Binary
    };
    load_epochs(path, &format)
}

/// Loads the plan's dataset and runs every repetition.
pub fn run_experiment<T: Real>(plan: &ExperimentPlan) -> Result<ExperimentReport> {
    plan.validate()?;
    let set = load_plan_dataset::<T>(plan)?;
    run_experiment_on(plan, &set)
}

pub fn run_experiment_on<T: Real>(plan: &ExperimentPlan, set: &EpochSet<T>) -> Result<ExperimentReport> {
    plan.validate()?;
    // Catch structural mistakes once instead of failing every run.
    WalshCodebook::new(plan.codebook_order, set.num_classes().max(2))?;
    let subject_id = plan
        .subject_id
        .clone()
        .or_else(|| set.epochs().first().map(|e| e.subject_id.clone()))
        .unwrap_or_default();
    let mut runs = Vec::with_capacity(plan.n_runs);
    for r in 0..plan.n_runs {
        let run_seed = seed::derive(plan.master_seed, r as u64);
        let entry = match run_once(plan, set, run_seed) {
            Ok(metrics) => RunEntry {
                run: r,
                seed: run_seed,
                metrics: Some(metrics),
                error: None,
            },
            Err(e) => {
                log::warn!("{} run {r} failed: {e}", plan.label());
                RunEntry {
                    run: r,
                    seed: run_seed,
                    metrics: None,
                    error: Some(e.to_string()),
                }
            }
        };
        log::info!(
            "{} run {r}: {}",
            plan.label(),
            entry
                .metrics
                .as_ref()
                .map_or("failed".to_string(), |m| format!("accuracy {:.4}", m.accuracy))
        );
        runs.push(entry);
    }
    let aggregate = Aggregate::from_runs(&runs, set.num_classes());
    Ok(ExperimentReport {
        label: plan.label(),
        subject_id,
        plan: plan.clone(),
        provenance: Provenance {
            library_version: crate::VERSION.to_string(),
            master_seed: plan.master_seed,
            seed_rule: format!(
                "run seed = derive(master, run); stage seed = derive(run seed, k) with k = split {}, augment {}, init {}, train {}, subsample {}; {}",
                stream::SPLIT,
                stream::AUGMENT,
                stream::INIT,
                stream::TRAIN,
                stream::SUBSAMPLE,
                seed::SEED_RULE
            ),
            dataset_fingerprint: set.fingerprint(),
            num_classes: set.num_classes(),
            channels: set.channels(),
            samples: set.samples(),
            covariance_convention: "population (1/n) covariances for divergence scatter matrices".into(),
        },
        runs,
        aggregate,
    })
}

fn csp_scheme(settings: &CspSettings, num_classes: usize) -> CspScheme {
    settings.scheme.unwrap_or(if num_classes == 2 {
        CspScheme::TwoClass
    } else {
        CspScheme::OneVsRest
    })
}

fn run_once<T: Real>(plan: &ExperimentPlan, set: &EpochSet<T>, run_seed: u64) -> Result<RunMetrics> {
    let split = split_dataset(
        set,
        &SplitSpec {
            seed: seed::derive(run_seed, stream::SPLIT),
            ..plan.split.clone()
        },
    )?;
    let train_idx = match plan.max_train_epochs {
        Some(cap) => stratified_subsample(set, &split.train, cap, seed::derive(run_seed, stream::SUBSAMPLE))?,
        None => split.train.clone(),
    };
    let mut train_set = set.subset(&train_idx)?;
    let mut val_set = set.subset(&split.validation)?;
    let mut test_set = set.subset(&split.test)?;
    HeldOut::new(&[&val_set, &test_set]).check("training partition", &train_set)?;

    if plan.transform == Transform::Ts {
        let settings = plan.csp.as_ref().expect("validated");
        let filtered = train_set.try_map(|e| apply_filter_bank(e, &settings.bank))?;
        let filtered_held = [&val_set, &test_set]
            .iter()
            .map(|s| s.try_map(|e| apply_filter_bank(e, &settings.bank)))
            .collect::<Result<Vec<_>>>()?;
        HeldOut::new(&filtered_held.iter().collect::<Vec<_>>()).check("fit_csp", &filtered)?;
        let model = fit_csp(&filtered, settings.m, csp_scheme(settings, set.num_classes()), &settings.bank)?;
        if model.fitted_on != filtered.fingerprint() {
            return Err(Error::DataFlow("CSP model fingerprint differs from the training partition".into()));
        }
        train_set = transform_set(&train_set, &model)?;
        val_set = transform_set(&val_set, &model)?;
        test_set = transform_set(&test_set, &model)?;
    }

    if plan.augment == Augmentation::A {
        HeldOut::new(&[&val_set, &test_set]).check("augment_set", &train_set)?;
        let cfg = AugmentConfig {
            seed: seed::derive(run_seed, stream::AUGMENT),
            ..plan.augment_config.clone()
        };
        let before = train_set.len();
        train_set = augment_set(&train_set, &cfg)?;
        debug_assert_eq!(train_set.len(), before * (1 + cfg.copies_per_epoch));
    }

    let spec = parse_structure(&plan.structure, train_set.channels(), train_set.samples(), plan.codebook_order)?
        .with_regularization(plan.batch_norm, plan.dropout);
    let init_seed = seed::derive(run_seed, stream::INIT);
    let train_cfg = TrainConfig {
        seed: seed::derive(run_seed, stream::TRAIN),
        ..plan.train.clone()
    };
    let c = set.num_classes();
    let (scheme, reports) = train_scheme(plan.scheme, c, &spec, init_seed, &train_cfg, &train_set, &val_set)?;

    let clf = if plan.scheme == SchemeKind::Single {
        MdnClassifier::new(WalshCodebook::new(plan.codebook_order, c)?)
    } else {
        MdnClassifier::new(WalshCodebook::new(plan.codebook_order, 2)?)
    };
    let preds = test_set
        .iter()
        .map(|e| scheme.predict(&e.data, &clf))
        .collect::<Result<Vec<_>>>()?;
    let cm = confusion(&preds, &test_set.labels(), c)?;
    let classwise = classwise_metrics(&cm);
    Ok(RunMetrics {
        accuracy: classwise.accuracy,
        kappa: classwise.kappa,
        classwise,
        confusion: cm,
        train_size: train_set.len(),
        validation_size: val_set.len(),
        test_size: test_set.len(),
        test_indices: split.test,
        network_input_channels: spec.input_planes(),
        training: reports,
    })
}

/// Binary view of a set for one ensemble member: the member's first class
/// becomes label 1, the other (or the rest) label 2.
fn member_view<T: Real>(set: &EpochSet<T>, kind: SchemeKind, classes: &[usize]) -> Result<EpochSet<T>> {
    match kind {
        SchemeKind::Single => Ok(set.clone()),
        SchemeKind::Ovo => set.select_classes(classes),
        SchemeKind::Ovr => set.relabel(2, |l| if l == classes[0] { 1 } else { 2 }),
    }
}

fn train_scheme<T: Real>(
    kind: SchemeKind,
    num_classes: usize,
    spec: &NetworkSpec,
    init_seed: u64,
    cfg: &TrainConfig,
    train_set: &EpochSet<T>,
    val_set: &EpochSet<T>,
) -> Result<(MetaScheme<Network<T>>, Vec<crate::network::TrainReport>)> {
    let mut members = Vec::new();
    let mut reports = Vec::new();
    for (k, classes) in member_classes(kind, num_classes).into_iter().enumerate() {
        let (tr, va, book) = match kind {
            SchemeKind::Single => (train_set.clone(), val_set.clone(), WalshCodebook::new(spec.output_dim, num_classes)?),
            _ => (
                member_view(train_set, kind, &classes)?,
                member_view(val_set, kind, &classes)?,
                WalshCodebook::new(spec.output_dim, 2)?,
            ),
        };
        let member_cfg = TrainConfig {
            seed: seed::derive(cfg.seed, k as u64),
            ..cfg.clone()
        };
        let (net, report) = train(spec, seed::derive(init_seed, k as u64), &tr, &va, &book, &member_cfg)?;
        members.push(Member { classes, extractor: net });
        reports.push(report);
    }
    Ok((MetaScheme::new(kind, num_classes, members)?, reports))
}

pub fn run_matrix<T: Real>(base: &ExperimentPlan) -> Result<MatrixReport> {
    let set = load_plan_dataset::<T>(base)?;
    run_matrix_on(base, &set)
}

/// Runs TS-A, TS-NA, NTS-A, NTS-NA with the base plan's master seed, so
/// every cell sees the same splits.
pub fn run_matrix_on<T: Real>(base: &ExperimentPlan, set: &EpochSet<T>) -> Result<MatrixReport> {
    if base.csp.is_none() {
        return Err(Error::InvalidConfig("matrix plans need csp settings for the TS cells".into()));
    }
    let cells = [
        (Transform::Ts, Augmentation::A),
        (Transform::Ts, Augmentation::Na),
        (Transform::Nts, Augmentation::A),
        (Transform::Nts, Augmentation::Na),
    ]
    .iter()
    .map(|&(t, a)| run_experiment_on(&base.cell(t, a), set))
    .collect::<Result<Vec<_>>>()?;
    Ok(MatrixReport { cells })
}

/// Paired t-test of per-subject accuracies (`a` minus `b`).
pub fn compare_means(subjects: Vec<String>, a: Vec<f64>, b: Vec<f64>) -> Result<Comparison> {
    if a.len() != b.len() || subjects.len() != a.len() {
        return Err(Error::Shape(format!(
            "{} subjects, {} augmented and {} non-augmented values",
            subjects.len(),
            a.len(),
            b.len()
        )));
    }
    let ttest = paired_ttest(&a, &b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let verdict = if ttest.p_value < 0.05 {
        if ttest.mean_difference > 0.0 {
            "augmentation significantly higher"
        } else {
            "augmentation significantly lower"
        }
    } else {
        "no significant difference"
    };
    let summary = format!(
        "n={} mean(A)={:.4} mean(NA)={:.4} t={:.4} df={} p={:.3e}: {verdict} at 0.05 (two-tailed)",
        a.len(),
        mean(&a),
        mean(&b),
        ttest.t,
        ttest.df,
        ttest.p_value
    );
    Ok(Comparison {
        subjects,
        with_augmentation: a,
        without_augmentation: b,
        ttest,
        summary,
    })
}

/// Pairs reports by position (one per subject) and compares mean accuracies.
pub fn compare_augmentation(with_aug: &[ExperimentReport], without: &[ExperimentReport]) -> Result<Comparison> {
    if with_aug.len() != without.len() {
        return Err(Error::Shape(format!(
            "{} augmented reports vs {} non-augmented",
            with_aug.len(),
            without.len()
        )));
    }
    for (a, b) in with_aug.iter().zip(without) {
        if a.subject_id != b.subject_id {
            return Err(Error::InvalidConfig(format!(
                "report subjects differ: {} vs {}",
                a.subject_id, b.subject_id
            )));
        }
        if a.aggregate.successful_runs != b.aggregate.successful_runs {
            return Err(Error::InvalidConfig(format!(
                "subject {}: {} vs {} successful runs",
                a.subject_id, a.aggregate.successful_runs, b.aggregate.successful_runs
            )));
        }
    }
    compare_means(
        with_aug.iter().map(|r| r.subject_id.clone()).collect(),
        with_aug.iter().map(|r| r.aggregate.mean_accuracy).collect(),
        without.iter().map(|r| r.aggregate.mean_accuracy).collect(),
    )
}
