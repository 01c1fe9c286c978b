//! `precis` — estimate the diagonal of a sparse Gaussian precision matrix.
//!
//! Exit codes: 0 success, 1 usage error, 2 computation failure.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use precis_core::bench::{render_csv, render_text, run_config, BenchFile, BenchResult};
use precis_core::estimators::{PhiVector, PmlConfig};
use precis_core::models::{build_model, ModelKind, PrecisionModel};
use precis_core::regression::{ols_refit, sqrt_lasso_all, RegressionMatrix, SqrlConfig};
use precis_core::{
    assemble_precision, estimate_pml, estimate_rml, estimate_rv, estimate_sml, sample_gaussian,
    DataMatrix, MeanMode, TreeMode,
};

/// Seed override honored by `sample-data` and `bench`.
const SEED_ENV: &str = "PRECIS_SEED";

#[derive(Parser)]
#[command(
    name = "precis",
    version,
    about = "Sparse precision matrix diagonal estimation",
    after_help = "The PRECIS_SEED environment variable overrides the base seed of \
                  sample-data and bench."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a ground-truth precision model (omega, phi, edges) as JSON
    GenerateModel(GenerateModelArgs),
    /// Draw iid Gaussian rows from a model's covariance into a CSV file
    SampleData(SampleDataArgs),
    /// Fit the regression matrix B column-wise by the square-root Lasso
    FitB(FitBArgs),
    /// Estimate the diagonal variances phi (and optionally omega) from data
    Estimate(EstimateArgs),
    /// Assemble omega = B * diag(phi)^-1 from fitted B and phi files
    AssembleOmega(AssembleOmegaArgs),
    /// Run a Monte Carlo benchmark grid described by a JSON config
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateModelArgs {
    /// Model family: m1..m6
    #[arg(long)]
    model: String,
    /// Dimension (m6 needs a multiple of 6)
    #[arg(long)]
    p: usize,
    /// Output JSON path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleDataArgs {
    /// Model JSON produced by generate-model
    #[arg(long)]
    model_json: PathBuf,
    /// Number of samples (rows)
    #[arg(long)]
    n: usize,
    /// RNG seed [default: 0; PRECIS_SEED overrides]
    #[arg(long)]
    seed: Option<u64>,
    /// Center and scale each column to unit sample variance before writing
    #[arg(long)]
    standardize: bool,
    /// Output CSV path (headerless, one row per sample)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitBArgs {
    /// Input data CSV (headerless, one row per sample)
    #[arg(long)]
    data: PathBuf,
    /// Penalty level [default: the universal choice sqrt(2 log p)]
    #[arg(long)]
    lambda: Option<f64>,
    /// Fixed-point tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Sweep cap per column
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Drop the intercept (skip column centering)
    #[arg(long)]
    no_intercept: bool,
    /// Re-estimate by OLS on the selected support
    #[arg(long)]
    ols_refit: bool,
    /// Support threshold for the OLS refit
    #[arg(long, default_value_t = 1e-10)]
    support_threshold: f64,
    /// Output format
    #[arg(long, value_enum, default_value_t = BFormat::Csv)]
    format: BFormat,
    /// Output path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BFormat {
    /// Dense CSV, p rows of p entries
    Csv,
    /// Sparse JSON triplet list {i, j, value}
    SparseJson,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input data CSV
    #[arg(long)]
    data: PathBuf,
    /// Estimator: rv, rml, sml, or pml
    #[arg(long)]
    estimator: String,
    /// Pre-fitted B matrix (CSV, or sparse JSON if the path ends in .json)
    #[arg(long, conflicts_with = "scenario")]
    bhat: Option<PathBuf>,
    /// First-stage scenario: sqrt-lasso, sqrt-lasso-ols, or oracle-b
    #[arg(long)]
    scenario: Option<String>,
    /// Model JSON (required for --scenario oracle-b)
    #[arg(long)]
    model_json: Option<PathBuf>,
    /// Mean handling for the sample covariance: sample or zero
    #[arg(long, default_value = "sample")]
    mean: String,
    /// Square-root Lasso penalty [default: sqrt(2 log p)]
    #[arg(long)]
    lambda: Option<f64>,
    /// Partial-correlation threshold [default: min(0.01, n^-1/2)]
    #[arg(long)]
    t: Option<f64>,
    /// PML penalty weight [default: sqrt(log p)/3]
    #[arg(long)]
    kappa: Option<f64>,
    /// Tree mode for sml: mst, spt, or spt-best-root [default: mst]
    #[arg(long, default_value = "mst")]
    tree: String,
    /// Output CSV for phi (one value per line)
    #[arg(long)]
    out: PathBuf,
    /// Also write omega = B * diag(phi)^-1 to this CSV
    #[arg(long)]
    omega: Option<PathBuf>,
}

#[derive(Args)]
struct AssembleOmegaArgs {
    /// Fitted B matrix (CSV or sparse JSON)
    #[arg(long)]
    bhat: PathBuf,
    /// phi vector CSV (one value per line)
    #[arg(long)]
    phi: PathBuf,
    /// Output CSV for omega
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark description JSON (defaults + configs and/or grid)
    #[arg(long)]
    config: PathBuf,
    /// Output directory for results.json, table.csv and table.txt
    #[arg(long)]
    out_dir: PathBuf,
    /// Print the resolved configuration grid and run nothing
    #[arg(long)]
    dry_run: bool,
    /// Cap the worker thread count
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::GenerateModel(args) => cmd_generate_model(args),
        Command::SampleData(args) => cmd_sample_data(args),
        Command::FitB(args) => cmd_fit_b(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::AssembleOmega(args) => cmd_assemble_omega(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(text) => {
            let seed = text
                .trim()
                .parse::<u64>()
                .with_context(|| format!("{SEED_ENV} must be an unsigned integer, got '{text}'"))?;
            Ok(Some(seed))
        }
        Err(_) => Ok(None),
    }
}

fn read_data(path: &Path) -> Result<DataMatrix> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(DataMatrix::from_csv(BufReader::new(file))?)
}

fn read_bhat(path: &Path) -> Result<RegressionMatrix> {
    if path.extension().is_some_and(|e| e == "json") {
        let text = fs::read_to_string(path)?;
        Ok(RegressionMatrix::from_sparse_json(&text)?)
    } else {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(RegressionMatrix::from_csv(BufReader::new(file))?)
    }
}

fn read_model(path: &Path) -> Result<PrecisionModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(PrecisionModel::from_json(&text)?)
}

fn write_phi(path: &Path, phi: &PhiVector) -> Result<()> {
    let body = phi
        .values()
        .iter()
        .map(|v| format!("{v}\n"))
        .collect::<String>();
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn read_phi(path: &Path) -> Result<PhiVector> {
    let text = fs::read_to_string(path)?;
    let values = text
        .split([',', '\n', '\r'])
        .filter(|tok| !tok.trim().is_empty())
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| anyhow!("{e}: '{tok}'"))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PhiVector::new(values)?)
}

fn write_mat_csv(path: &Path, m: &precis_core::Mat) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line = m
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate_model(args: GenerateModelArgs) -> Result<ExitCode> {
    let kind = ModelKind::parse(&args.model)?;
    let model = build_model(precis_core::ModelId::new(kind, args.p)?)?;
    fs::write(&args.out, model.to_json()?)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote model {} (p = {}, {} edges) to {}",
        kind.name(),
        args.p,
        model.edges.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample_data(args: SampleDataArgs) -> Result<ExitCode> {
    let model = read_model(&args.model_json)?;
    let seed = env_seed()?.or(args.seed).unwrap_or(0);
    let sigma = model.sigma()?;
    let mut x = sample_gaussian(&sigma, args.n, seed)?;
    if args.standardize {
        x = x.standardized()?;
    }
    let mut buf = Vec::new();
    x.to_csv(&mut buf)?;
    fs::write(&args.out, buf).with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "wrote {} x {} samples (seed {seed}) to {}",
        args.n,
        model.p(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit_b(args: FitBArgs) -> Result<ExitCode> {
    let x = read_data(&args.data)?;
    let cfg = SqrlConfig {
        lambda: args.lambda,
        tol: args.tol,
        max_iter: args.max_iter,
        intercept: !args.no_intercept,
    };
    let fit = sqrt_lasso_all(&x, &cfg)?;
    let b = if args.ols_refit {
        let refit = ols_refit(&x, &fit.b, args.support_threshold)?;
        if !refit.singular_columns.is_empty() {
            eprintln!(
                "note: collinear support in columns {:?}; used minimum-norm solutions",
                refit.singular_columns
            );
        }
        refit.b
    } else {
        fit.b
    };
    match args.format {
        BFormat::Csv => {
            let mut buf = Vec::new();
            b.to_csv(&mut buf)?;
            fs::write(&args.out, buf)?;
        }
        BFormat::SparseJson => {
            fs::write(&args.out, b.to_sparse_json()?)?;
        }
    }
    let nonzero = (0..b.p())
        .flat_map(|i| (0..b.p()).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && b.values()[(i, j)] != 0.0)
        .count();
    println!(
        "fitted B ({} x {}, {} off-diagonal nonzeros) to {}",
        b.p(),
        b.p(),
        nonzero,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn mean_mode(name: &str, p: usize) -> Result<MeanMode> {
    match name {
        "sample" => Ok(MeanMode::SampleMean),
        "zero" => Ok(MeanMode::known_zero(p)),
        other => bail!("unknown mean mode '{other}' (expected sample or zero)"),
    }
}

fn cmd_estimate(args: EstimateArgs) -> Result<ExitCode> {
    let x = read_data(&args.data)?;
    let p = x.p();
    let bhat = match (&args.bhat, &args.scenario) {
        (Some(path), None) => read_bhat(path)?,
        (None, Some(scenario)) => match scenario.as_str() {
            "oracle-b" => {
                let path = args
                    .model_json
                    .as_ref()
                    .ok_or_else(|| anyhow!("--scenario oracle-b needs --model-json"))?;
                read_model(path)?.b_star
            }
            "sqrt-lasso" | "sqrt-lasso-ols" => {
                let cfg = SqrlConfig {
                    lambda: args.lambda,
                    ..Default::default()
                };
                let fit = sqrt_lasso_all(&x, &cfg)?;
                if scenario == "sqrt-lasso-ols" {
                    ols_refit(&x, &fit.b, 1e-10)?.b
                } else {
                    fit.b
                }
            }
            other => bail!("unknown scenario '{other}'"),
        },
        _ => bail!("exactly one of --bhat or --scenario is required"),
    };
    let mode = mean_mode(&args.mean, p)?;
    let phi = match args.estimator.as_str() {
        "rv" => estimate_rv(&x, &bhat, &mode)?,
        "rml" => estimate_rml(&x, &bhat, &mode)?,
        "sml" => {
            let tree = TreeMode::parse(&args.tree)?;
            let out = estimate_sml(&x, &bhat, &mode, tree, args.t)?;
            if !out.fallback_components.is_empty() {
                eprintln!(
                    "note: {} component(s) fell back to the relaxed likelihood",
                    out.fallback_components.len()
                );
            }
            out.phi
        }
        "pml" => {
            let cfg = PmlConfig {
                kappa: args.kappa,
                t: args.t,
                ..Default::default()
            };
            let out = estimate_pml(&x, &bhat, &mode, &cfg)?;
            if !out.converged {
                eprintln!(
                    "note: pml stopped at {} iterations with gradient norm {:.2e}",
                    out.iterations, out.grad_norm
                );
            }
            out.phi
        }
        other => bail!("unknown estimator '{other}' (expected rv, rml, sml, or pml)"),
    };
    write_phi(&args.out, &phi)?;
    println!("wrote phi ({} values) to {}", phi.p(), args.out.display());
    if let Some(omega_path) = &args.omega {
        let omega = assemble_precision(&bhat, &phi)?;
        write_mat_csv(omega_path, &omega)?;
        println!("wrote omega ({p} x {p}) to {}", omega_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_assemble_omega(args: AssembleOmegaArgs) -> Result<ExitCode> {
    let bhat = read_bhat(&args.bhat)?;
    let phi = read_phi(&args.phi)?;
    let omega = assemble_precision(&bhat, &phi)?;
    write_mat_csv(&args.out, &omega)?;
    println!(
        "wrote omega ({} x {}) to {}",
        omega.rows(),
        omega.cols(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> Result<ExitCode> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let file = BenchFile::parse(&text)?;
    let configs = file.resolve(env_seed()?)?;
    if args.dry_run {
        println!("resolved {} configuration(s):", configs.len());
        for (idx, cfg) in configs.iter().enumerate() {
            println!(
                "  [{idx}] model {} p {} n {} scenario {} R {} seed {} estimators {:?}",
                cfg.model.name(),
                cfg.p,
                cfg.n,
                cfg.scenario.name(),
                cfg.replications,
                cfg.base_seed,
                cfg.estimators.iter().map(|e| e.name()).collect::<Vec<_>>()
            );
        }
        return Ok(ExitCode::SUCCESS);
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut results: Vec<BenchResult> = Vec::new();
    let mut errors = Vec::new();
    for (idx, cfg) in configs.iter().enumerate() {
        eprintln!(
            "[{}/{}] model {} p {} n {} scenario {} ...",
            idx + 1,
            configs.len(),
            cfg.model.name(),
            cfg.p,
            cfg.n,
            cfg.scenario.name()
        );
        match run_config(cfg) {
            Ok(res) => results.push(res),
            Err(e) => {
                eprintln!("config {idx} failed: {e}");
                errors.push((idx, e.to_string()));
            }
        }
    }
    let results_json = serde_json::to_string_pretty(&results)?;
    let csv = render_csv(&results);
    let table = render_text(&results);
    fs::write(args.out_dir.join("results.json"), results_json)?;
    fs::write(args.out_dir.join("table.csv"), &csv)?;
    fs::write(args.out_dir.join("table.txt"), &table)?;
    print!("{table}");
    println!(
        "wrote results.json, table.csv, table.txt to {}",
        args.out_dir.display()
    );
    if !errors.is_empty() {
        bail!(
            "{} of {} configurations failed: {:?}",
            errors.len(),
            configs.len(),
            errors
        );
    }
    Ok(ExitCode::SUCCESS)
}
