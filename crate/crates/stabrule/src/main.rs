//! Batch CLI wiring the pipeline: prep -> train -> rule -> boost -> eval,
//! plus a synthetic-data generator. Messages go to stderr; machine artifacts
//! go to files (written atomically) or stdout. Exit codes: 0 success,
//! 1 validation error, 2 runtime error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use stabrule::dataset::{self, Dataset, SplitSpec};
use stabrule::metrics;
use stabrule::rgb::{self, RgbConfig, RgbModelFile};
use stabrule::rulegen::{self, RuleFile, RuleGenConfig};
use stabrule::similarity;
use stabrule::sslr::{self, ModelWeights, ModelWeightsFile, SslrConfig};
use stabrule::synth::{self, GroundTruth, SynthConfig};

#[derive(Parser)]
#[command(name = "stabrule", version, about = "Stable sparse risk rules from tabular data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a CSV, drop rare features, and write a balanced train/test split.
    Prep(PrepArgs),
    /// Fit a stabilized sparse logistic regression and write the model JSON.
    Train(TrainArgs),
    /// Distill a bootstrap-averaged integer score card with a risk curve.
    Rule(RuleArgs),
    /// Fit the randomized gradient-boosting ensemble.
    Boost(BoostArgs),
    /// Evaluate a saved model on a labeled CSV.
    Eval(EvalArgs),
    /// Generate a correlated synthetic benchmark with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
struct PrepArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the 0/1 label column.
    #[arg(long)]
    label: String,
    /// Minimum nonzero prevalence a feature must reach to be kept.
    #[arg(long, default_value_t = 0.01)]
    min_prevalence: f64,
    /// Fraction of rows assigned to training.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "train.csv")]
    out_train: PathBuf,
    #[arg(long, default_value = "test.csv")]
    out_test: PathBuf,
    /// Dropped-feature report, one name per line.
    #[arg(long, default_value = "dropped.txt")]
    dropped_out: PathBuf,
}

#[derive(Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    /// Penalty factor.
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    /// Mix between the sparsity and smoothness penalties; 1 is pure l1.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = false)]
    penalize_intercept: bool,
    /// Standardize columns before fitting; weights are mapped back.
    #[arg(long, default_value_t = false)]
    standardize: bool,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Also export the similarity matrix as p x p CSV.
    #[arg(long)]
    similarity_out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct RuleArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    /// Features retained in the score card.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Bootstrap replicates.
    #[arg(long = "B", default_value_t = 100)]
    bootstraps: usize,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest score magnitude in the card.
    #[arg(long, default_value_t = 10)]
    score_cap: u32,
    #[arg(long, default_value = "rule.json")]
    out: PathBuf,
    /// Also write the human-readable score card to a file.
    #[arg(long)]
    out_text: Option<PathBuf>,
    /// Fit the risk curve on this CSV instead of the training data.
    #[arg(long)]
    risk_data: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BoostArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value_t = 0.03)]
    rate: f64,
    #[arg(long, default_value_t = 256)]
    max_leaves: usize,
    /// Features drawn per tree; defaults to floor(p/3).
    #[arg(long)]
    per_tree_features: Option<usize>,
    /// Features drawn per node split; defaults to ceil(per_tree/3).
    #[arg(long)]
    per_node_features: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    row_subsample: f64,
    #[arg(long, default_value_t = 5)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "rgb.json")]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Model JSON from `train`, `rule`, or `boost`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    label: String,
    /// Decision threshold; overrides --train.
    #[arg(long)]
    threshold: Option<f64>,
    /// Training CSV used to pick the sensitivity=specificity threshold.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write ROC points as "fpr,tpr" CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    group_size: usize,
    /// Within-group correlation in [0,1).
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
    /// Sparse true weights as "index:value,index:value".
    #[arg(long, default_value = "")]
    weights: String,
    #[arg(long, default_value_t = 0.0)]
    intercept: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit thresholded 0/1 features instead of raw Gaussians.
    #[arg(long, default_value_t = false)]
    count_mode: bool,
    #[arg(long, default_value = "synth.csv")]
    out: PathBuf,
    #[arg(long, default_value = "truth.json")]
    truth_out: PathBuf,
}

enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own usage text; route it to stderr and use the
            // validation exit code. Help/version requests are successes.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Prep(args) => cmd_prep(args),
        Command::Train(args) => cmd_train(args),
        Command::Rule(args) => cmd_rule(args),
        Command::Boost(args) => cmd_boost(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| runtime(format!("cannot create temp file near {}: {e}", path.display())))?;
    tmp.write_all(bytes)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))?;
    tmp.persist(path)
        .map_err(|e| runtime(format!("cannot persist {}: {e}", path.display())))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(runtime)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn load(path: &Path, label: &str) -> Result<Dataset, CliError> {
    dataset::load_table(path, label).map_err(runtime)
}

fn config_echo<T: Serialize>(command: &str, args: &T) -> serde_json::Value {
    let mut value = serde_json::to_value(args).unwrap_or_else(|_| json!({}));
    if let Some(map) = value.as_object_mut() {
        map.insert("command".to_string(), json!(command));
    }
    value
}

fn cmd_prep(args: PrepArgs) -> Result<(), CliError> {
    let spec = SplitSpec::new(args.train_fraction, args.seed).map_err(validation)?;
    if !(0.0..=1.0).contains(&args.min_prevalence) {
        return Err(validation("min_prevalence must be in [0,1]"));
    }

    let ds = load(&args.data, &args.label)?;
    let (filtered, dropped) = dataset::filter_rare_features(&ds, args.min_prevalence).map_err(runtime)?;
    let (train, test) = dataset::split_balanced(&filtered, &spec).map_err(runtime)?;

    let mut buf = Vec::new();
    train.write_csv(&mut buf).map_err(runtime)?;
    write_atomic(&args.out_train, &buf)?;
    buf.clear();
    test.write_csv(&mut buf).map_err(runtime)?;
    write_atomic(&args.out_test, &buf)?;

    let mut report = dropped.join("\n");
    if !report.is_empty() {
        report.push('\n');
    }
    write_atomic(&args.dropped_out, report.as_bytes())?;

    eprintln!(
        "prep: {} rows -> train {} / test {} ({} features kept, {} dropped)",
        ds.n_rows(),
        train.n_rows(),
        test.n_rows(),
        filtered.n_features(),
        dropped.len()
    );
    Ok(())
}

fn sslr_config(lambda: f64, alpha: f64, max_iters: usize, tol: f64, penalize: bool) -> Result<SslrConfig, CliError> {
    let cfg = SslrConfig {
        lambda,
        alpha,
        max_iterations: max_iters,
        tolerance: tol,
        penalize_intercept: penalize,
    };
    cfg.validate().map_err(validation)?;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let cfg = sslr_config(args.lambda, args.alpha, args.max_iters, args.tol, args.penalize_intercept)?;

    let ds = load(&args.data, &args.label)?;
    let s = similarity::cosine_similarity_matrix(&ds).map_err(runtime)?;
    if let Some(path) = &args.similarity_out {
        let mut buf = Vec::new();
        s.write_csv(&mut buf).map_err(runtime)?;
        write_atomic(path, &buf)?;
    }

    let fitted = if args.standardize {
        sslr::fit_sslr_standardized(&ds, &s, &cfg, None)
    } else {
        sslr::fit_sslr(&ds, &s, &cfg, None)
    }
    .map_err(runtime)?;

    let mut file = ModelWeightsFile::new(&fitted, ds.feature_names());
    file.config = Some(config_echo("train", &args));
    write_json(&args.out, &file)?;

    let nonzero = fitted.coefficients.iter().filter(|w| **w != 0.0).count();
    eprintln!(
        "train: fitted {} features, {} nonzero, intercept {:.6}",
        ds.n_features(),
        nonzero,
        fitted.intercept
    );
    Ok(())
}

fn cmd_rule(args: RuleArgs) -> Result<(), CliError> {
    let sslr_cfg = sslr_config(args.lambda, args.alpha, args.max_iters, args.tol, false)?;
    let rg_cfg = RuleGenConfig {
        k: args.k,
        bootstraps: args.bootstraps,
        seed: args.seed,
        score_cap: args.score_cap,
    };
    rg_cfg.validate().map_err(validation)?;

    let ds = load(&args.data, &args.label)?;
    let s = similarity::cosine_similarity_matrix(&ds).map_err(runtime)?;
    let summary = rulegen::bootstrap_average(&ds, &s, &sslr_cfg, &rg_cfg).map_err(runtime)?;
    let ranking = rulegen::feature_importance(&summary, &ds).map_err(runtime)?;
    let rule = rulegen::derive_rule(&summary, &ranking, &rg_cfg, ds.feature_names()).map_err(runtime)?;
    let curve = match &args.risk_data {
        None => rulegen::fit_risk_curve(&rule, &ds).map_err(runtime)?,
        Some(path) => {
            let curve_ds = load(path, &args.label)?;
            let bound = rebind_rule(&rule, &curve_ds)?;
            rulegen::fit_risk_curve(&bound, &curve_ds).map_err(runtime)?
        }
    };

    let mut file = RuleFile::new(&rule, &curve);
    file.config = Some(config_echo("rule", &args));
    write_json(&args.out, &file)?;

    let card = format!(
        "{}\n{}",
        rulegen::render_score_card(&rule),
        rulegen::render_risk_table(&curve)
    );
    if let Some(path) = &args.out_text {
        write_atomic(path, card.as_bytes())?;
    } else {
        print!("{card}");
    }
    eprintln!(
        "rule: {} items from {} bootstraps, risk-curve slope {:.4}",
        rule.items.len(),
        summary.bootstraps,
        curve.slope
    );
    Ok(())
}

/// Re-index a rule's items against another dataset's columns by name.
fn rebind_rule(
    rule: &rulegen::PredictionRule,
    ds: &Dataset,
) -> Result<rulegen::PredictionRule, CliError> {
    let items = rule
        .items
        .iter()
        .map(|it| {
            let feature_index = ds
                .feature_names()
                .iter()
                .position(|n| *n == it.feature_name)
                .ok_or_else(|| runtime(format!("feature {:?} missing from the data", it.feature_name)))?;
            Ok(rulegen::RuleItem {
                feature_index,
                ..it.clone()
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(rulegen::PredictionRule { items, k: rule.k })
}

fn cmd_boost(args: BoostArgs) -> Result<(), CliError> {
    // The p-independent knobs are validated before touching the data; the
    // dimension-dependent defaults need p from the header.
    if !(args.rate > 0.0 && args.rate < 1.0) {
        return Err(validation(format!("learning_rate must be in (0,1), got {}", args.rate)));
    }
    if !(args.row_subsample > 0.0 && args.row_subsample <= 1.0) {
        return Err(validation(format!(
            "row_subsample must be in (0,1], got {}",
            args.row_subsample
        )));
    }
    if args.max_leaves == 0 {
        return Err(validation("max_leaves must be at least 1"));
    }
    if args.min_samples_leaf == 0 {
        return Err(validation("min_samples_leaf must be at least 1"));
    }
    let ds = load(&args.data, &args.label)?;
    let p = ds.n_features();
    let defaults = RgbConfig::defaults_for(p, args.seed);
    let per_tree = args.per_tree_features.unwrap_or(defaults.per_tree_features);
    let per_node = args
        .per_node_features
        .unwrap_or_else(|| per_tree.div_ceil(3).max(1));
    let cfg = RgbConfig {
        n_trees: args.trees,
        learning_rate: args.rate,
        max_leaves: args.max_leaves,
        per_tree_features: per_tree,
        per_node_features: per_node,
        row_subsample: args.row_subsample,
        min_samples_leaf: args.min_samples_leaf,
        seed: args.seed,
    };
    cfg.validate(p).map_err(validation)?;

    let model = rgb::fit_rgb(&ds, &cfg).map_err(runtime)?;
    let mut file = RgbModelFile::new(&model, ds.feature_names());
    let mut echo = config_echo("boost", &args);
    if let Some(map) = echo.as_object_mut() {
        map.insert("per_tree_features".into(), json!(per_tree));
        map.insert("per_node_features".into(), json!(per_node));
    }
    file.config = Some(echo);
    write_json(&args.out, &file)?;

    eprintln!("boost: {} trees fitted on {} rows", model.trees.len(), ds.n_rows());
    Ok(())
}

/// A loaded model of any kind, reduced to a per-row probability scorer.
enum LoadedModel {
    Sslr(ModelWeightsFile),
    Rgb(RgbModelFile),
    Rule(RuleFile),
}

fn load_model(path: &Path) -> Result<LoadedModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| runtime(format!("invalid JSON in {}: {e}", path.display())))?;
    let obj = value
        .as_object()
        .ok_or_else(|| runtime(format!("{} is not a JSON object", path.display())))?;
    if obj.contains_key("coefficients") {
        Ok(LoadedModel::Sslr(serde_json::from_value(value).map_err(runtime)?))
    } else if obj.contains_key("trees") {
        Ok(LoadedModel::Rgb(serde_json::from_value(value).map_err(runtime)?))
    } else if obj.contains_key("items") {
        Ok(LoadedModel::Rule(serde_json::from_value(value).map_err(runtime)?))
    } else {
        Err(runtime(format!(
            "{}: unrecognized model layout (expected coefficients, trees, or items)",
            path.display()
        )))
    }
}

/// Column indices in `ds` for each model feature name, in model order.
fn name_mapping(model_names: &[String], ds: &Dataset) -> Result<Vec<usize>, CliError> {
    model_names
        .iter()
        .map(|name| {
            ds.feature_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| runtime(format!("feature {name:?} missing from the data")))
        })
        .collect()
}

fn score_rows(model: &LoadedModel, ds: &Dataset) -> Result<Vec<f64>, CliError> {
    match model {
        LoadedModel::Sslr(file) => {
            let map = name_mapping(&file.feature_names, ds)?;
            let weights: ModelWeights = file.weights();
            let mut probs = Vec::with_capacity(ds.n_rows());
            let mut x = vec![0.0; map.len()];
            for d in 0..ds.n_rows() {
                let row = ds.row(d);
                for (slot, &col) in x.iter_mut().zip(&map) {
                    *slot = row[col];
                }
                probs.push(sslr::predict_proba(&weights, &x).map_err(runtime)?);
            }
            Ok(probs)
        }
        LoadedModel::Rgb(file) => {
            let map = name_mapping(&file.feature_names, ds)?;
            let ensemble = file.ensemble();
            let mut probs = Vec::with_capacity(ds.n_rows());
            let mut x = vec![0.0; map.len()];
            for d in 0..ds.n_rows() {
                let row = ds.row(d);
                for (slot, &col) in x.iter_mut().zip(&map) {
                    *slot = row[col];
                }
                probs.push(rgb::rgb_predict_proba(&ensemble, &x).map_err(runtime)?);
            }
            Ok(probs)
        }
        LoadedModel::Rule(file) => {
            let rule = file.to_rule(ds.feature_names()).map_err(runtime)?;
            (0..ds.n_rows())
                .map(|d| {
                    let score = rulegen::rule_score(&rule, ds.row(d)).map_err(runtime)?;
                    Ok(file.risk_curve.probability(score))
                })
                .collect()
        }
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    if let Some(t) = args.threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(validation("threshold must be in [0,1]"));
        }
    }

    let model = load_model(&args.model)?;
    let ds = load(&args.data, &args.label)?;
    let probs = score_rows(&model, &ds)?;

    let (threshold, threshold_source) = match (args.threshold, &args.train) {
        (Some(t), _) => (t, "flag"),
        (None, Some(train_path)) => {
            let train = load(train_path, &args.label)?;
            let train_probs = score_rows(&model, &train)?;
            let tau = metrics::select_threshold(&train_probs, train.labels()).map_err(runtime)?;
            (tau, "train")
        }
        (None, None) => {
            let tau = metrics::select_threshold(&probs, ds.labels()).map_err(runtime)?;
            (tau, "eval-data")
        }
    };

    let mut report = metrics::confusion_metrics(&probs, ds.labels(), threshold).map_err(runtime)?;
    report.auc = Some(metrics::auc(&probs, ds.labels()).map_err(runtime)?);

    if let Some(roc_path) = &args.roc {
        let points = metrics::roc_points(&probs, ds.labels()).map_err(runtime)?;
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in points {
            csv.push_str(&format!("{fpr},{tpr}\n"));
        }
        write_atomic(roc_path, csv.as_bytes())?;
    }

    let mut payload = serde_json::to_value(&report).map_err(runtime)?;
    if let Some(map) = payload.as_object_mut() {
        let mut echo = config_echo("eval", &args);
        if let Some(echo_map) = echo.as_object_mut() {
            echo_map.insert("threshold_source".into(), json!(threshold_source));
        }
        map.insert("config".into(), echo);
    }

    eprint!("{}", report.text_table());
    match &args.out {
        Some(path) => write_json(path, &payload)?,
        None => {
            let mut text = serde_json::to_string_pretty(&payload).map_err(runtime)?;
            text.push('\n');
            print!("{text}");
        }
    }
    Ok(())
}

fn parse_sparse_weights(spec: &str, p: usize) -> Result<Vec<f64>, CliError> {
    let mut weights = vec![0.0; p];
    if spec.trim().is_empty() {
        return Ok(weights);
    }
    for part in spec.split(',') {
        let (idx, val) = part
            .split_once(':')
            .ok_or_else(|| validation(format!("weights entry {part:?} is not index:value")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| validation(format!("bad weight index {idx:?}")))?;
        let val: f64 = val
            .trim()
            .parse()
            .map_err(|_| validation(format!("bad weight value {val:?}")))?;
        if idx >= p {
            return Err(validation(format!("weight index {idx} out of range for p={p}")));
        }
        weights[idx] = val;
    }
    Ok(weights)
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let true_weights = parse_sparse_weights(&args.weights, args.p)?;
    let cfg = SynthConfig {
        n: args.n,
        p: args.p,
        group_size: args.group_size,
        within_group_correlation: args.rho,
        true_weights,
        intercept: args.intercept,
        seed: args.seed,
        count_mode: args.count_mode,
    };
    cfg.validate().map_err(validation)?;

    let ds = synth::generate(&cfg).map_err(runtime)?;
    let mut buf = Vec::new();
    ds.write_csv(&mut buf).map_err(runtime)?;
    write_atomic(&args.out, &buf)?;

    let truth = GroundTruth {
        true_weights: cfg.true_weights.clone(),
        groups: cfg.groups(),
        config: Some(config_echo("synth", &args)),
    };
    write_json(&args.truth_out, &truth)?;

    eprintln!(
        "synth: wrote {} rows x {} features (base rate {:.3})",
        ds.n_rows(),
        ds.n_features(),
        ds.base_rate()
    );
    Ok(())
}
