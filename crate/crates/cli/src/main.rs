//! Command-line front end for the `mieeg` library.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use mieeg::augment::{augment_set, AugmentConfig};
use mieeg::classify::{MdnClassifier, SchemeKind};
use mieeg::data::{generate_synthetic, load_epochs, save_epochs, split_dataset, CsvOptions, EpochSet, Format, SplitSpec, SyntheticSpec};
use mieeg::experiment::{
    compare_augmentation, compare_means, matrix_table, render_comparison, render_report, run_experiment, run_matrix,
    Augmentation, CspSettings, ExperimentPlan, ExperimentReport, MatrixReport, OutputFormat, Transform,
};
use mieeg::metrics::{classwise_metrics, confusion};
use mieeg::network::{
    count_conv2d_weights, count_dense_weights, count_weights, parse_structure, train, Conv2dLayer, DenseLayer,
    Network, TrainConfig,
};
use mieeg::preprocess::{apply_filter_bank, fit_csp, transform_set, CspModel, CspScheme, FilterBankSpec};
use mieeg::walsh::WalshCodebook;

type Set = EpochSet<f32>;

#[derive(Parser)]
#[command(name = "mieeg", version, about = "Motor-imagery EEG classification toolkit")]
struct Cli {
    /// Master seed for every random stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON document with the command's settings (plan, spec or config).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Fmt::Text)]
    format: Fmt,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Json,
    Text,
    Csv,
}

impl From<Fmt> for OutputFormat {
    fn from(f: Fmt) -> Self {
        match f {
            Fmt::Json => OutputFormat::Json,
            Fmt::Text => OutputFormat::Text,
            Fmt::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Args)]
struct Input {
    /// EPB1 file, or CSV when the name ends in `.csv`.
    input: PathBuf,
    /// Sampling rate for CSV input.
    #[arg(long)]
    csv_rate: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic lateralized mu/beta dataset.
    Synth {
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        epochs_per_class: usize,
        #[arg(long, default_value_t = 4)]
        channels: usize,
        #[arg(long, default_value_t = 250)]
        samples: usize,
        #[arg(long, default_value_t = 250.0)]
        rate: f64,
        #[arg(long, default_value_t = 1.0)]
        gain: f64,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long, default_value = "synthetic.epb")]
        output: String,
    },
    /// Expand a training set with augmented copies.
    Augment {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        copies: Option<usize>,
        #[arg(long)]
        amp_low: Option<f64>,
        #[arg(long)]
        amp_high: Option<f64>,
        #[arg(long)]
        flip_probability: Option<f64>,
        #[arg(long)]
        rotation_half_range: Option<usize>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long, default_value = "augmented.epb")]
        output: String,
    },
    /// Stratified train/validation/test split; writes indices and partitions.
    Split {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        validation_fraction: Option<f64>,
    },
    /// Fit filter-bank CSP on a (training) set.
    CspFit {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        m: usize,
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, default_value = "csp.json")]
        output: String,
    },
    /// Filter and project a set with a fitted CSP model.
    CspApply {
        model: PathBuf,
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value = "transformed.epb")]
        output: String,
    },
    /// Train a feature extractor on a training and a validation set.
    Train {
        train: PathBuf,
        validation: PathBuf,
        #[arg(long)]
        structure: String,
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        no_batch_norm: bool,
        #[arg(long, default_value_t = mieeg::network::DEFAULT_DROPOUT)]
        dropout: f64,
        #[arg(long, default_value = "network.json")]
        output: String,
    },
    /// Classify a set with a trained network and report metrics.
    Eval {
        network: PathBuf,
        #[command(flatten)]
        input: Input,
    },
    /// Run one plan (N repetitions).
    Experiment {
        #[command(flatten)]
        overrides: PlanOverrides,
        #[arg(long, default_value = "report.json")]
        output: String,
    },
    /// Run the TS/NTS x A/NA matrix for one plan.
    Matrix {
        #[command(flatten)]
        overrides: PlanOverrides,
        #[arg(long, default_value = "matrix.json")]
        output: String,
    },
    /// Paired t-test of augmented vs non-augmented accuracies.
    Ttest {
        /// Numbers (JSON array or separated text) or report JSON files.
        a: PathBuf,
        b: PathBuf,
    },
    /// Weight count of a structure (kernels plus MDN weights).
    CountWeights {
        #[arg(long)]
        structure: Option<String>,
        #[arg(long)]
        channels: Option<usize>,
        #[arg(long)]
        length: Option<usize>,
        #[arg(long, default_value_t = 16)]
        order: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        /// Also print the AlexNet convolution and dense-layer totals.
        #[arg(long)]
        alexnet: bool,
    },
    /// Render saved experiment or matrix reports.
    Report { reports: Vec<PathBuf> },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    TwoClass,
    OneVsRest,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransformArg {
    Ts,
    Nts,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentArg {
    A,
    Na,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetaArg {
    Single,
    Ovo,
    Ovr,
}

#[derive(Args)]
struct PlanOverrides {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long, value_enum)]
    transform: Option<TransformArg>,
    #[arg(long, value_enum)]
    augment: Option<AugmentArg>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    structure: Option<String>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long, value_enum)]
    scheme: Option<MetaArg>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_train_epochs: Option<usize>,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl From<mieeg::Error> for CliError {
    fn from(e: mieeg::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn read_config<T: DeserializeOwned + Default>(cli: &Cli) -> CliResult<T> {
    match &cli.config {
        None => Ok(T::default()),
        Some(p) => read_json(p),
    }
}

fn read_json<T: DeserializeOwned>(p: &Path) -> CliResult<T> {
    let text = fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
}

fn out_path(cli: &Cli, name: &str) -> CliResult<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn format_of(path: &Path, csv_rate: Option<f64>) -> CliResult<Format> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let sampling_rate =
            csv_rate.ok_or_else(|| CliError::Validation("CSV input needs --csv-rate".into()))?;
        Ok(Format::Csv(CsvOptions {
            sampling_rate,
            num_classes: None,
        }))
    } else {
        Ok(Format::Binary)
    }
}

fn load(input: &Input) -> CliResult<Set> {
    Ok(load_epochs(&input.input, &format_of(&input.input, input.csv_rate)?)?)
}

fn load_binary(path: &Path) -> CliResult<Set> {
    Ok(load_epochs(path, &Format::Binary)?)
}

fn save(set: &Set, path: &Path) -> CliResult {
    Ok(save_epochs(set, path, &Format::Binary)?)
}

/// Prints `value` as JSON, or `text` for the text format, or `csv`.
fn emit<T: Serialize>(cli: &Cli, value: &T, text: String, csv: String) -> CliResult {
    let s = match cli.format {
        Fmt::Json => serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))? + "\n",
        Fmt::Text => text,
        Fmt::Csv => csv,
    };
    print!("{s}");
    Ok(())
}

fn run(cli: &Cli) -> CliResult {
    let seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Synth {
            classes,
            epochs_per_class,
            channels,
            samples,
            rate,
            gain,
            noise_sd,
            output,
        } => {
            let mut spec = match &cli.config {
                Some(p) => read_json::<SyntheticSpec>(p)?,
                None => SyntheticSpec::lateralized(*classes, *epochs_per_class, *channels, *samples, *rate, *gain, seed),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(n) = noise_sd {
                spec.noise_sd = *n;
            }
            let set: Set = generate_synthetic(&spec)?;
            let path = out_path(cli, output)?;
            save(&set, &path)?;
            let summary = serde_json::json!({
                "path": path, "epochs": set.len(), "classes": set.num_classes(),
                "channels": set.channels(), "samples": set.samples(), "fingerprint": set.fingerprint(),
            });
            emit(
                cli,
                &summary,
                format!("wrote {} epochs ({} classes, {}x{}) to {}\n", set.len(), set.num_classes(), set.channels(), set.samples(), path.display()),
                format!("path,epochs,classes,channels,samples\n{},{},{},{},{}\n", path.display(), set.len(), set.num_classes(), set.channels(), set.samples()),
            )
        }
        Command::Augment {
            input,
            copies,
            amp_low,
            amp_high,
            flip_probability,
            rotation_half_range,
            noise_sd,
            output,
        } => {
            let mut cfg: AugmentConfig = read_config(cli)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(v) = copies {
                cfg.copies_per_epoch = *v;
            }
            if let Some(v) = amp_low {
                cfg.amp_low = *v;
            }
            if let Some(v) = amp_high {
                cfg.amp_high = *v;
            }
            if let Some(v) = flip_probability {
                cfg.flip_probability = *v;
            }
            if rotation_half_range.is_some() {
                cfg.rotation_half_range = *rotation_half_range;
            }
            if let Some(v) = noise_sd {
                cfg.noise_sd = *v;
            }
            let set = load(input)?;
            let out = augment_set(&set, &cfg)?;
            let path = out_path(cli, output)?;
            save(&out, &path)?;
            let summary = serde_json::json!({
                "path": path, "input_epochs": set.len(), "output_epochs": out.len(),
                "augmented": out.count_origin(true), "config": cfg,
            });
            emit(
                cli,
                &summary,
                format!("{} -> {} epochs ({} augmented) written to {}\n", set.len(), out.len(), out.count_origin(true), path.display()),
                format!("input_epochs,output_epochs\n{},{}\n", set.len(), out.len()),
            )
        }
        Command::Split {
            input,
            test_fraction,
            validation_fraction,
        } => {
            let mut spec: SplitSpec = read_config(cli)?;
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if let Some(v) = test_fraction {
                spec.test_fraction = *v;
            }
            if let Some(v) = validation_fraction {
                spec.validation_fraction_of_train = *v;
            }
            spec.validate()?;
            let set = load(input)?;
            let split = split_dataset(&set, &spec)?;
            write_json(&out_path(cli, "split.json")?, &split)?;
            for (name, idx) in [("train.epb", &split.train), ("validation.epb", &split.validation), ("test.epb", &split.test)] {
                save(&set.subset(idx)?, &out_path(cli, name)?)?;
            }
            emit(
                cli,
                &split,
                format!("train {}  validation {}  test {}\n", split.train.len(), split.validation.len(), split.test.len()),
                format!("partition,count\ntrain,{}\nvalidation,{}\ntest,{}\n", split.train.len(), split.validation.len(), split.test.len()),
            )
        }
        Command::CspFit { input, m, scheme, output } => {
            let bank: FilterBankSpec = read_config(cli)?;
            let set = load(input)?;
            let scheme = match scheme {
                Some(SchemeArg::TwoClass) => CspScheme::TwoClass,
                Some(SchemeArg::OneVsRest) => CspScheme::OneVsRest,
                None if set.num_classes() == 2 => CspScheme::TwoClass,
                None => CspScheme::OneVsRest,
            };
            let filtered = set.try_map(|e| apply_filter_bank(e, &bank))?;
            let model = fit_csp(&filtered, *m, scheme, &bank)?;
            let path = out_path(cli, output)?;
            write_text(&path, &model.to_json()?)?;
            let summary = serde_json::json!({
                "path": path, "filters": model.output_channels(), "input_channels": model.input_channels(),
                "fitted_on": model.fitted_on,
            });
            emit(
                cli,
                &summary,
                format!("{} filters over {} channels written to {}\n", model.output_channels(), model.input_channels(), path.display()),
                format!("filters,input_channels\n{},{}\n", model.output_channels(), model.input_channels()),
            )
        }
        Command::CspApply { model, input, output } => {
            let text = fs::read_to_string(model).map_err(|e| CliError::Validation(format!("{}: {e}", model.display())))?;
            let model = CspModel::<f32>::from_json(&text)?;
            let set = load(input)?;
            let out = transform_set(&set, &model)?;
            let path = out_path(cli, output)?;
            save(&out, &path)?;
            let summary = serde_json::json!({ "path": path, "epochs": out.len(), "channels": out.channels() });
            emit(
                cli,
                &summary,
                format!("{} epochs with {} virtual channels written to {}\n", out.len(), out.channels(), path.display()),
                format!("epochs,channels\n{},{}\n", out.len(), out.channels()),
            )
        }
        Command::Train {
            train: train_path,
            validation,
            structure,
            order,
            max_iterations,
            patience,
            learning_rate,
            batch_size,
            no_batch_norm,
            dropout,
            output,
        } => {
            let mut cfg: TrainConfig = read_config(cli)?;
            cfg.seed = mieeg::seed::derive(seed, 3);
            if let Some(v) = max_iterations {
                cfg.max_iterations = *v;
            }
            if let Some(v) = patience {
                cfg.patience = *v;
            }
            if let Some(v) = learning_rate {
                cfg.learning_rate = *v;
            }
            if let Some(v) = batch_size {
                cfg.batch_size = *v;
            }
            let tr = load_binary(train_path)?;
            let va = load_binary(validation)?;
            let spec = parse_structure(structure, tr.channels(), tr.samples(), *order)?
                .with_regularization(!no_batch_norm, *dropout);
            let book = WalshCodebook::new(*order, tr.num_classes())?;
            let (net, report) = train(&spec, mieeg::seed::derive(seed, 2), &tr, &va, &book, &cfg)?;
            let path = out_path(cli, output)?;
            write_text(&path, &net.to_json()?)?;
            write_json(&out_path(cli, "train_report.json")?, &report)?;
            let last = report.validation_accuracy.last().copied().unwrap_or(0.0);
            emit(
                cli,
                &report,
                format!(
                    "stopped at iteration {} ({:?}); best iteration {} with validation loss {:.5}; last validation accuracy {:.4}\nnetwork written to {}\n",
                    report.stop_iteration, report.stop_reason, report.best_iteration, report.best_validation_loss, last, path.display()
                ),
                {
                    let mut s = String::from("iteration,train_loss,validation_loss,validation_accuracy\n");
                    for i in 0..report.train_loss.len() {
                        s += &format!("{},{},{},{}\n", i + 1, report.train_loss[i], report.validation_loss[i], report.validation_accuracy[i]);
                    }
                    s
                },
            )
        }
        Command::Eval { network, input } => {
            let text = fs::read_to_string(network).map_err(|e| CliError::Validation(format!("{}: {e}", network.display())))?;
            let net = Network::<f32>::from_json(&text)?;
            let set = load(input)?;
            let clf = MdnClassifier::<f32>::new(WalshCodebook::new(net.output_dim(), set.num_classes())?);
            let preds = set
                .iter()
                .map(|e| {
                    let ofe = net.forward(&e.data)?;
                    clf.classify(ofe.as_slice().expect("contiguous"))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let cm = confusion(&preds, &set.labels(), set.num_classes())?;
            let report = classwise_metrics(&cm);
            let mut text = format!("accuracy {:.4}  kappa {:.4}\n", report.accuracy, report.kappa);
            let mut csv = String::from("class,ppv,npv,sensitivity,f_measure\n");
            for (c, m) in report.classes.iter().enumerate() {
                text += &format!("class {}: ppv {:.3} npv {:.3} sens {:.3} f {:.3}\n", c + 1, m.ppv, m.npv, m.sensitivity, m.f_measure);
                csv += &format!("{},{},{},{},{}\n", c + 1, m.ppv, m.npv, m.sensitivity, m.f_measure);
            }
            text += &format!("confusion (rows true, cols predicted): {:?}\n", cm.counts);
            emit(cli, &serde_json::json!({ "report": report, "confusion": cm }), text, csv)
        }
        Command::Experiment { overrides, output } => {
            let plan = build_plan(cli, overrides)?;
            let report = run_experiment::<f32>(&plan)?;
            write_json(&out_path(cli, output)?, &report)?;
            print!("{}", render_report(&report, cli.format.into())?);
            Ok(())
        }
        Command::Matrix { overrides, output } => {
            let plan = build_plan(cli, overrides)?;
            let matrix = run_matrix::<f32>(&plan)?;
            write_json(&out_path(cli, output)?, &matrix)?;
            print!("{}", matrix_table(&matrix.cells, cli.format.into())?);
            Ok(())
        }
        Command::Ttest { a, b } => {
            let cmp = match (read_reports(a), read_reports(b)) {
                (Ok(ra), Ok(rb)) => compare_augmentation(&ra, &rb)?,
                _ => {
                    let va = read_numbers(a)?;
                    let vb = read_numbers(b)?;
                    let subjects = (1..=va.len()).map(|i| i.to_string()).collect();
                    compare_means(subjects, va, vb)?
                }
            };
            print!("{}", render_comparison(&cmp, cli.format.into())?);
            Ok(())
        }
        Command::CountWeights {
            structure,
            channels,
            length,
            order,
            classes,
            alexnet,
        } => {
            let mut fields = Vec::new();
            if let Some(s) = structure {
                let channels = channels.ok_or_else(|| CliError::Validation("--channels is required with --structure".into()))?;
                let length = length.ok_or_else(|| CliError::Validation("--length is required with --structure".into()))?;
                let spec = parse_structure(s, channels, length, *order)?;
                fields.push(("divfe", count_weights(&spec, *classes)));
            }
            if *alexnet {
                fields.push(("alexnet_conv", count_conv2d_weights(&alexnet_conv())));
                fields.push(("alexnet_dense", count_dense_weights(&alexnet_dense())));
            }
            if fields.is_empty() {
                return Err(CliError::Validation("give --structure or --alexnet".into()));
            }
            let map: serde_json::Map<String, serde_json::Value> =
                fields.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect();
            emit(
                cli,
                &map,
                fields.iter().map(|(k, v)| format!("{k}: {v}\n")).collect(),
                std::iter::once("name,weights\n".to_string()).chain(fields.iter().map(|(k, v)| format!("{k},{v}\n"))).collect(),
            )
        }
        Command::Report { reports } => {
            if reports.is_empty() {
                return Err(CliError::Validation("no report files given".into()));
            }
            let mut all = Vec::new();
            for p in reports {
                all.extend(read_reports(p)?);
            }
            if all.len() == 1 {
                print!("{}", render_report(&all[0], cli.format.into())?);
            } else {
                print!("{}", matrix_table(&all, cli.format.into())?);
            }
            Ok(())
        }
    }
}

fn build_plan(cli: &Cli, o: &PlanOverrides) -> CliResult<ExperimentPlan> {
    let mut plan: ExperimentPlan = read_config(cli)?;
    if let Some(s) = cli.seed {
        plan.master_seed = s;
    }
    if let Some(d) = &o.dataset {
        plan.dataset = Some(d.clone());
    }
    if let Some(s) = &o.subject {
        plan.subject_id = Some(s.clone());
    }
    if let Some(t) = o.transform {
        plan.transform = match t {
            TransformArg::Ts => Transform::Ts,
            TransformArg::Nts => Transform::Nts,
        };
    }
    if let Some(a) = o.augment {
        plan.augment = match a {
            AugmentArg::A => Augmentation::A,
            AugmentArg::Na => Augmentation::Na,
        };
    }
    if let Some(m) = o.m {
        match &mut plan.csp {
            Some(c) => c.m = m,
            None => {
                plan.csp = Some(CspSettings {
                    m,
                    bank: FilterBankSpec::default(),
                    scheme: None,
                })
            }
        }
    }
    if let Some(s) = &o.structure {
        plan.structure = s.clone();
    }
    if let Some(r) = o.runs {
        plan.n_runs = r;
    }
    if let Some(s) = o.scheme {
        plan.scheme = match s {
            MetaArg::Single => SchemeKind::Single,
            MetaArg::Ovo => SchemeKind::Ovo,
            MetaArg::Ovr => SchemeKind::Ovr,
        };
    }
    if let Some(v) = o.max_iterations {
        plan.train.max_iterations = v;
    }
    if o.max_train_epochs.is_some() {
        plan.max_train_epochs = o.max_train_epochs;
    }
    plan.validate()?;
    Ok(plan)
}

/// Reports from a file holding one report, a list of reports or a matrix.
fn read_reports(path: &Path) -> CliResult<Vec<ExperimentReport>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if let Ok(r) = serde_json::from_str::<ExperimentReport>(&text) {
        return Ok(vec![r]);
    }
    if let Ok(m) = serde_json::from_str::<MatrixReport>(&text) {
        return Ok(m.cells);
    }
    serde_json::from_str::<Vec<ExperimentReport>>(&text)
        .map_err(|e| CliError::Validation(format!("{}: not a report file ({e})", path.display())))
}

fn read_numbers(path: &Path) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
        return Ok(v);
    }
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{}: '{s}' is not a number", path.display())))
        })
        .collect()
}

fn alexnet_conv() -> Vec<Conv2dLayer> {
    let l = |in_planes, k, out_planes| Conv2dLayer {
        in_planes,
        kernel_h: k,
        kernel_w: k,
        out_planes,
    };
    vec![l(3, 11, 96), l(96, 5, 256), l(256, 3, 192), l(192, 3, 192), l(192, 3, 128)]
}

fn alexnet_dense() -> Vec<DenseLayer> {
    vec![
        DenseLayer {
            inputs: 13 * 13 * 128,
            outputs: 2048,
        },
        DenseLayer {
            inputs: 2048,
            outputs: 2048,
        },
        DenseLayer {
            inputs: 2048,
            outputs: 2,
        },
    ]
}
