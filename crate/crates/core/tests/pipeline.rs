use mieeg::classify::SchemeKind;
use mieeg::data::{generate_synthetic, load_epochs, save_epochs, split_dataset, CsvOptions, EpochSet, Format, SplitSpec, SyntheticSpec};
use mieeg::experiment::{
    compare_means, matrix_table, render_report, run_experiment_on, run_matrix_on, Augmentation, CspSettings, ExperimentPlan,
    ExperimentReport, OutputFormat, Transform,
};
use mieeg::network::{parse_structure, train, Network, TrainConfig};
use mieeg::preprocess::{apply_filter_bank, fit_csp, transform_set, CspModel, CspScheme, FilterBankSpec};
use mieeg::walsh::WalshCodebook;

const STRUCTURE: &str = "2,5,4 / 4,5,4 / 4,16,16";

fn small_set(classes: usize, seed: u64) -> EpochSet<f64> {
    generate_synthetic(&SyntheticSpec::lateralized(classes, 20, 2, 64, 128.0, 2.0, seed)).unwrap()
}

fn quick_plan() -> ExperimentPlan {
    ExperimentPlan {
        structure: STRUCTURE.into(),
        dropout: 0.1,
        csp: Some(CspSettings {
            m: 1,
            bank: FilterBankSpec::default(),
            scheme: None,
        }),
        train: TrainConfig {
            max_iterations: 3,
            ..TrainConfig::default()
        },
        n_runs: 2,
        master_seed: 9,
        ..ExperimentPlan::default()
    }
}

#[test]
fn files_round_trip() {
    let set: EpochSet<f32> = generate_synthetic(&SyntheticSpec::lateralized(3, 4, 2, 16, 100.0, 1.0, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("set.epb");
    save_epochs(&set, &bin, &Format::Binary).unwrap();
    let back: EpochSet<f32> = load_epochs(&bin, &Format::Binary).unwrap();
    assert_eq!(back, set);

    let csv = dir.path().join("set.csv");
    let fmt = Format::Csv(CsvOptions {
        sampling_rate: 100.0,
        num_classes: None,
    });
    save_epochs(&set, &csv, &fmt).unwrap();
    let back: EpochSet<f32> = load_epochs(&csv, &fmt).unwrap();
    assert_eq!(back.labels(), set.labels());
    assert_eq!(back.num_classes(), 3);
    assert_eq!(back.epochs()[5].data, set.epochs()[5].data);
}

#[test]
fn training_is_deterministic_and_reloadable() {
    let set = small_set(2, 3);
    let split = split_dataset(&set, &SplitSpec::default()).unwrap();
    let tr = set.subset(&split.train).unwrap();
    let va = set.subset(&split.validation).unwrap();
    let spec = parse_structure(STRUCTURE, 2, 64, 16).unwrap().with_regularization(true, 0.1);
    let book = WalshCodebook::new(16, 2).unwrap();
    let cfg = TrainConfig {
        max_iterations: 15,
        seed: 4,
        ..TrainConfig::default()
    };
    let (net, report) = train(&spec, 7, &tr, &va, &book, &cfg).unwrap();
    let (net2, report2) = train(&spec, 7, &tr, &va, &book, &cfg).unwrap();
    assert_eq!(net, net2);
    assert_eq!(report, report2);
    assert!(report.best_validation_loss <= report.validation_loss[0]);
    assert_eq!(report.train_loss.len(), report.stop_iteration);

    let reloaded = Network::<f64>::from_json(&net.to_json().unwrap()).unwrap();
    assert_eq!(reloaded.features(&va).unwrap(), net.features(&va).unwrap());
}

#[test]
fn csp_model_reloads_and_projects() {
    let set = small_set(2, 5);
    let bank = FilterBankSpec::default();
    let filtered = set.try_map(|e| apply_filter_bank(e, &bank)).unwrap();
    assert_eq!(filtered.channels(), 2 * bank.bands.len());
    let model = fit_csp(&filtered, 2, CspScheme::TwoClass, &bank).unwrap();
    let back = CspModel::<f64>::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
    let projected = transform_set(&set, &back).unwrap();
    assert_eq!(projected.channels(), 4);
    assert_eq!(projected.samples(), set.samples());
}

#[test]
fn matrix_runs_every_cell_on_shared_splits() {
    let set = small_set(2, 11);
    let m = run_matrix_on(&quick_plan(), &set).unwrap();
    let labels: Vec<&str> = m.cells.iter().map(|c| c.label.as_str()).collect();
    assert_eq!(labels, ["TS-A", "TS-NA", "NTS-A", "NTS-NA"]);
    for cell in &m.cells {
        assert_eq!(cell.provenance.dataset_fingerprint, set.fingerprint());
        assert_eq!(cell.aggregate.successful_runs, 2, "{}: {:?}", cell.label, cell.runs);
    }
    let metrics = |label: &str, run: usize| m.cell(label).unwrap().runs[run].metrics.clone().unwrap();
    for run in 0..2 {
        let (a, na) = (metrics("NTS-A", run), metrics("NTS-NA", run));
        assert_eq!(a.train_size, 10 * na.train_size);
        assert_eq!(a.test_indices, na.test_indices);
        assert_eq!(metrics("TS-A", run).test_indices, na.test_indices);
        assert_eq!(metrics("TS-NA", run).network_input_channels, 2);
    }
    let table = matrix_table(&m.cells, OutputFormat::Text).unwrap();
    assert!(table.contains("NTS-NA"));
}

#[test]
fn failed_runs_are_recorded() {
    // m = 2 yields 4 virtual channels, the structure expects 2.
    let plan = ExperimentPlan {
        transform: Transform::Ts,
        csp: Some(CspSettings {
            m: 2,
            bank: FilterBankSpec::default(),
            scheme: None,
        }),
        ..quick_plan()
    };
    let report = run_experiment_on(&plan, &small_set(2, 2)).unwrap();
    assert_eq!(report.aggregate.failed_runs, 2);
    assert!(report.runs.iter().all(|r| r.metrics.is_none() && r.error.is_some()));
}

#[test]
fn ensembles_train_one_network_per_member() {
    let set = small_set(3, 8);
    for (kind, members) in [(SchemeKind::Ovo, 3), (SchemeKind::Ovr, 3), (SchemeKind::Single, 1)] {
        let plan = ExperimentPlan {
            scheme: kind,
            augment: Augmentation::Na,
            n_runs: 1,
            ..quick_plan()
        };
        let report = run_experiment_on(&plan, &set).unwrap();
        let m = report.runs[0].metrics.as_ref().unwrap();
        assert_eq!(m.training.len(), members);
        assert_eq!(m.confusion.num_classes(), 3);
        assert_eq!(m.confusion.total() as usize, m.test_size);
    }
}

#[test]
fn reports_render_and_reload() {
    let plan = ExperimentPlan {
        augment: Augmentation::Na,
        ..quick_plan()
    };
    let report = run_experiment_on(&plan, &small_set(2, 6)).unwrap();
    let json = render_report(&report, OutputFormat::Json).unwrap();
    let back: ExperimentReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    assert!(render_report(&report, OutputFormat::Text).unwrap().contains("NTS-NA"));
    assert!(!render_report(&report, OutputFormat::Csv).unwrap().is_empty());
}

#[test]
fn comparison_direction() {
    let cmp = compare_means(
        vec!["a".into(), "b".into(), "c".into(), "d".into()],
        vec![0.9, 0.95, 0.85, 0.99],
        vec![0.6, 0.7, 0.62, 0.5],
    )
    .unwrap();
    assert!(cmp.ttest.t > 0.0);
    assert!(cmp.ttest.p_value < 0.05);
    assert!(cmp.summary.contains("significantly higher"));
    assert!(compare_means(vec!["a".into()], vec![0.9, 0.8], vec![0.1, 0.2]).is_err());
}
