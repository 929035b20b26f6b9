//! Command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 numerical or solver error.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::Array1;
use serde::Serialize;
use serde_json::{json, Value};

use mrc::classifier::{self, Anchor, FeatureChoice, FeatureConfig, MrcModel, TrainConfig};
use mrc::dataset::{load_csv, load_instances, stratified_split, Dataset, NormalizationStats};
use mrc::estimate::{LambdaEstimator, UncertaintySet};
use mrc::experiments::{self, ReductionSetup};
use mrc::objective::build_learning_problem;
use mrc::solver::{write_trace_csv, Method, SolverConfig};
use mrc::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "mrc", version, about = "Minimax risk classifiers with certified error bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Opts {
    /// CSV file, one instance per row, label in the last column.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// The CSV files start with a header row.
    #[arg(long, global = true)]
    header: bool,
    /// Held-out fraction for commands that split the data.
    #[arg(long, global = true)]
    test_fraction: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = FeatureArg::Rff)]
    features: FeatureArg,
    /// Number of random Fourier frequencies.
    #[arg(long = "D", global = true, default_value_t = 500)]
    num_frequencies: usize,
    /// Kernel scale; defaults to √(d/2).
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    rff_seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = LambdaMode::Practical)]
    lambda_mode: LambdaMode,
    #[arg(long, global = true, default_value_t = 0.3)]
    lambda0: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    delta: f64,
    /// Rademacher complexity constant, `R_n(F) ≤ R/√n`.
    #[arg(long = "rademacher-R", global = true)]
    rademacher_r: Option<f64>,
    /// bsm, ebsm, asm, easm, easm-restart or lp.
    #[arg(long, global = true, default_value = "easm-restart")]
    solver: String,
    #[arg(long, global = true, default_value_t = 200_000)]
    max_iters: usize,
    #[arg(long, global = true, default_value_t = 10_000)]
    restart_period: usize,
    /// `train` or `file:<path>`.
    #[arg(long, global = true, default_value = "train")]
    anchor: String,
    /// Master seed for splits, folds and subsets.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "mrc-out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FeatureArg {
    Rff,
    Identity,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum LambdaMode {
    Practical,
    Hoeffding,
    Bernstein,
    Rademacher,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Train a model and write it with a report.
    Train,
    /// Predict labels and probabilities with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
    /// Error bounds of a saved model.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        /// Also bound the deterministic rule.
        #[arg(long)]
        deterministic: bool,
        /// Widened confidence vector `λδ = scale·λ`.
        #[arg(long)]
        lambda_delta_scale: Option<f64>,
        /// Widened confidence vector `λδ = λ + shift`.
        #[arg(long)]
        lambda_delta_shift: Option<f64>,
    },
    /// Bounds and held-out errors for a grid of λ₀.
    SweepLambda {
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.5,0.7,1")]
        grid: Vec<f64>,
        #[arg(long, default_value_t = 10)]
        folds: usize,
    },
    /// Bounds over random anchor subsets of a pool.
    ReduceStudy {
        /// Anchor pool; defaults to the `--anchor` file or the data itself.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "100,500,1000,2000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Runs every subgradient method on the same learning problem.
    BenchSolvers {
        #[arg(long, value_delimiter = ',', default_value = "bsm,ebsm,asm,easm,easm-restart")]
        methods: Vec<String>,
        #[arg(long, default_value_t = 100)]
        trace_every: usize,
    },
    /// Kernel-scale selection by the smallest upper bound.
    ModelSelect {
        /// Explicit candidates; defaults to a percentile grid of distances.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20)]
        grid_size: usize,
        #[arg(long, default_value_t = 1)]
        splits: usize,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Predict { .. } => "predict",
            Command::Bounds { .. } => "bounds",
            Command::SweepLambda { .. } => "sweep-lambda",
            Command::ReduceStudy { .. } => "reduce-study",
            Command::BenchSolvers { .. } => "bench-solvers",
            Command::ModelSelect { .. } => "model-select",
        }
    }
}

impl Opts {
    fn data(&self) -> Result<Dataset> {
        let path = self
            .data
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("--data is required".into()))?;
        load_csv(path, self.header)
    }

    fn features(&self) -> FeatureConfig {
        FeatureConfig {
            kind: match self.features {
                FeatureArg::Rff => FeatureChoice::Rff,
                FeatureArg::Identity => FeatureChoice::Identity,
            },
            num_frequencies: self.num_frequencies,
            sigma: self.sigma,
            seed: self.rff_seed,
            ..FeatureConfig::default()
        }
    }

    fn estimator(&self) -> Result<LambdaEstimator> {
        Ok(match self.lambda_mode {
            LambdaMode::Practical => LambdaEstimator::Practical { lambda0: self.lambda0 },
            LambdaMode::Hoeffding => LambdaEstimator::Hoeffding { delta: self.delta },
            LambdaMode::Bernstein => LambdaEstimator::Bernstein { delta: self.delta },
            LambdaMode::Rademacher => LambdaEstimator::Rademacher {
                delta: self.delta,
                r: self
                    .rademacher_r
                    .ok_or_else(|| Error::InvalidInput("--lambda-mode rademacher needs --rademacher-R".into()))?,
            },
        })
    }

    fn solver(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig::new(self.solver.parse::<Method>()?)
            .with_max_iters(self.max_iters)
            .with_restart_period(self.restart_period);
        cfg.validate()?;
        Ok(cfg)
    }

    fn anchor(&self, dim: usize) -> Result<Anchor> {
        match self.anchor.as_str() {
            "train" => Ok(Anchor::Train),
            s => match s.strip_prefix("file:") {
                Some(path) => Ok(Anchor::External {
                    label: s.to_string(),
                    instances: load_instances(path, self.header, Some(dim))?,
                }),
                None => Err(Error::InvalidInput(format!("--anchor must be 'train' or 'file:<path>', got '{s}'"))),
            },
        }
    }

    fn train_config(&self, dim: usize) -> Result<TrainConfig> {
        Ok(TrainConfig {
            estimator: self.estimator()?,
            solver: self.solver()?,
            anchor: self.anchor(dim)?,
            ..TrainConfig::default()
        })
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_report(cli: &Cli, results: Value) -> Result<PathBuf> {
    let path = cli.opts.out.join("report.json");
    let report = json!({
        "version": mrc::VERSION,
        "command": cli.command.name(),
        "arguments": &cli.command,
        "flags": &cli.opts,
        "seeds": { "master": cli.opts.seed, "rff": cli.opts.rff_seed },
        "results": results,
    });
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn cmd_train(cli: &Cli) -> Result<Value> {
    let opts = &cli.opts;
    let data = opts.data()?;
    let (train, test) = match opts.test_fraction {
        Some(f) if f > 0.0 => {
            let (a, b) = stratified_split(&data, f, opts.seed)?;
            (a, Some(b))
        }
        _ => (data, None),
    };
    let mut config = opts.train_config(train.d())?;
    config.solver.record_trace = true;
    let features = opts.features();

    let model = classifier::train(&train, &features, &config)?;
    model.save(opts.out.join("model.json"))?;
    let trace_path = opts.out.join("trace.csv");
    write_trace_csv(&model.trace, create_file(&trace_path)?)?;
    let eval = test.as_ref().map(|t| classifier::evaluate(&model, t)).transpose()?;
    println!("R̄(U) = {:.6} ({})", model.minimax_risk, model.solver.label());
    if let Some(lo) = model.lower_bound {
        println!("R̲(U) = {lo:.6}");
    }
    if let Some(e) = &eval {
        println!("test: randomized risk {:.4}, deterministic error {:.4}", e.randomized_risk, e.deterministic_error);
    }
    Ok(json!({
        "model": opts.out.join("model.json"),
        "upper": model.minimax_risk,
        "lower": model.lower_bound,
        "upper_solver": model.solver,
        "lower_solver": model.lower_solver,
        "n": train.n(),
        "m": model.feature_map.dim(),
        "p": model.solver.rows,
        "trace": trace_path,
        "test": eval,
    }))
}

fn cmd_predict(cli: &Cli, model_path: &Path) -> Result<Value> {
    let opts = &cli.opts;
    let model = MrcModel::load(model_path)?;
    let path = opts
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("--data is required".into()))?;
    let x = load_instances(path, opts.header, Some(model.input_dim()))?;
    let out = opts.out.join("predictions.csv");
    let mut w = csv::Writer::from_writer(create_file(&out)?);
    let mut header = vec!["row".to_string(), "label".to_string()];
    header.extend(model.label_names.iter().map(|n| format!("p_{n}")));
    w.write_record(&header)?;
    for (i, xi) in x.outer_iter().enumerate() {
        let probs = model.predict_proba(xi)?;
        let label = &model.label_names[model.predict(xi)? - 1];
        let mut rec = vec![i.to_string(), label.clone()];
        rec.extend(probs.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&out, e))?;
    // Labeled input also gets an evaluation.
    let eval = match load_csv(path, opts.header) {
        Ok(d) if d.d() == model.input_dim() => classifier::evaluate(&model, &d).ok(),
        _ => None,
    };
    Ok(json!({ "predictions": out, "n": x.nrows(), "test": eval }))
}

fn cmd_bounds(cli: &Cli, model_path: &Path, deterministic: bool, scale: Option<f64>, shift: Option<f64>) -> Result<Value> {
    let model = MrcModel::load(model_path)?;
    let solver = cli.opts.solver()?;
    match model.lower_bound {
        Some(lo) => println!("R̲(U) = {lo:.6}, R̄(U) = {:.6}", model.minimax_risk),
        None => println!("R̄(U) = {:.6}", model.minimax_risk),
    }
    let det = if deterministic {
        let b = classifier::deterministic_bounds(&model, &solver)?;
        println!("deterministic rule: [{:.6}, {:.6}]", b.lower, b.upper);
        Some(json!({
            "lower": b.lower,
            "upper": b.upper,
            "lower_solver": b.lower_solver,
            "upper_solver": b.upper_solver,
        }))
    } else {
        None
    };
    let lambda = &model.uncertainty.lambda;
    let widened: Option<Array1<f64>> = match (scale, shift) {
        (None, None) => None,
        (s, c) => Some(lambda * s.unwrap_or(1.0) + c.unwrap_or(0.0)),
    };
    let high = widened
        .map(|ld| classifier::high_confidence_bounds(&model, ld.view()))
        .transpose()?;
    if let Some(h) = &high {
        println!("widened: [{:.6}, {:.6}]", h.lo, h.hi);
    }
    Ok(json!({
        "upper": model.minimax_risk,
        "lower": model.lower_bound,
        "upper_solver": model.solver,
        "lower_solver": model.lower_solver,
        "deterministic": det,
        "high_confidence": high,
    }))
}

fn cmd_sweep(cli: &Cli, grid: &[f64], folds: usize) -> Result<Value> {
    let opts = &cli.opts;
    let data = opts.data()?;
    let config = opts.train_config(data.d())?;
    let rows = experiments::sweep_lambda(&data, &opts.features(), &config, grid, folds, opts.seed)?;
    let path = opts.out.join("sweep.csv");
    experiments::write_sweep_csv(&rows, create_file(&path)?)?;
    Ok(json!({ "table": path, "rows": rows }))
}

fn cmd_reduce(cli: &Cli, pool: Option<&Path>, sizes: &[usize], reps: usize) -> Result<Value> {
    let opts = &cli.opts;
    let data = opts.data()?;
    let pool = match (pool, opts.anchor(data.d())?) {
        (Some(p), _) => load_instances(p, opts.header, Some(data.d()))?,
        (None, Anchor::External { instances, .. }) => instances,
        (None, Anchor::Train) => data.instances().to_owned(),
    };
    let setup = ReductionSetup::new(&data, pool.view(), &opts.features(), &opts.estimator()?)?;
    let study = experiments::reduce_study(&setup, sizes, reps, opts.seed, &opts.solver()?, opts.delta)?;
    let path = opts.out.join("reduce.csv");
    experiments::write_reduce_csv(&study, create_file(&path)?)?;
    Ok(json!({
        "table": path,
        "pool_size": pool.nrows(),
        "full_upper": study.full_upper,
        "full_lower": study.full_lower,
        "summary": study.summary,
    }))
}

fn cmd_bench(cli: &Cli, methods: &[String], trace_every: usize) -> Result<Value> {
    let opts = &cli.opts;
    let data = opts.data()?;
    let features = opts.features();
    let x = NormalizationStats::fit(data.instances())?.apply_matrix(data.instances())?;
    let map = features.build(x.view(), data.num_classes())?;
    let u = UncertaintySet::estimate(&map, x.view(), data.labels(), &opts.estimator()?)?;
    let problem = build_learning_problem(&u, x.view(), &map)?;
    let methods = methods.iter().map(|m| m.parse()).collect::<Result<Vec<Method>>>()?;
    let config = opts.solver()?.with_trace(trace_every);
    let result = experiments::bench_solvers(&problem, &methods, &config)?;
    let path = opts.out.join("bench_traces.csv");
    experiments::write_bench_traces(&result, create_file(&path)?)?;
    for e in &result.entries {
        println!(
            "{:<13} best {:.6}  {:.3e} s/iter  gamma {:.4}",
            e.method.name(),
            e.best_value,
            e.seconds_per_iteration,
            e.sparsity_gamma
        );
    }
    Ok(json!({
        "traces": path,
        "m": problem.dim(),
        "p": problem.num_rows(),
        "lp_optimum": result.lp_optimum,
        "entries": result.entries,
    }))
}

fn cmd_select(cli: &Cli, sigmas: Option<&[f64]>, grid_size: usize, splits: usize) -> Result<Value> {
    let opts = &cli.opts;
    let data = opts.data()?;
    let config = opts.train_config(data.d())?;
    let features = opts.features();
    let test_fraction = opts.test_fraction.unwrap_or(0.2);
    if let Some(sigmas) = sigmas {
        let (train, test) = stratified_split(&data, test_fraction, opts.seed)?;
        let sel = experiments::model_select(&train, &features, &config, sigmas)?;
        let eval = classifier::evaluate(&sel.model, &test)?;
        sel.model.save(opts.out.join("model.json"))?;
        println!("sigma {:.4}: R̄ {:.4}, test error {:.4}", sel.sigma, sel.model.minimax_risk, eval.deterministic_error);
        return Ok(json!({
            "sigma": sel.sigma,
            "upper": sel.model.minimax_risk,
            "lower": sel.model.lower_bound,
            "candidates": sel.candidates,
            "test": eval,
        }));
    }
    let protocol = experiments::selection_protocol(&data, &features, &config, splits, test_fraction, grid_size, opts.seed)?;
    println!(
        "deterministic error {:.4} ± {:.4}, randomized risk {:.4}, mean R̄ {:.4}",
        protocol.mean_det_error, protocol.std_det_error, protocol.mean_rand_risk, protocol.mean_upper
    );
    Ok(serde_json::to_value(&protocol)?)
}

fn run(cli: &Cli) -> Result<()> {
    create_out(&cli.opts.out)?;
    let results = match &cli.command {
        Command::Train => cmd_train(cli)?,
        Command::Predict { model } => cmd_predict(cli, model)?,
        Command::Bounds {
            model,
            deterministic,
            lambda_delta_scale,
            lambda_delta_shift,
        } => cmd_bounds(cli, model, *deterministic, *lambda_delta_scale, *lambda_delta_shift)?,
        Command::SweepLambda { grid, folds } => cmd_sweep(cli, grid, *folds)?,
        Command::ReduceStudy { pool, sizes, reps } => cmd_reduce(cli, pool.as_deref(), sizes, *reps)?,
        Command::BenchSolvers { methods, trace_every } => cmd_bench(cli, methods, *trace_every)?,
        Command::ModelSelect {
            sigmas,
            grid_size,
            splits,
        } => cmd_select(cli, sigmas.as_deref(), *grid_size, *splits)?,
    };
    let path = write_report(cli, results)?;
    println!("report: {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
