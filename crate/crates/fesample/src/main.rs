//! Command-line harness around the library: exact oracles, the mean-field
//! solver, cut decompositions, the sampling estimator, magnetization,
//! the lower-bound experiment, and the reproducible experiment suite.
//!
//! Exit codes: `0` when every hard assertion of the invoked command holds,
//! `1` when a computation finished but an assertion failed, `2` on
//! operational errors (bad arguments, unreadable files, infeasible sizes).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fesample::harness::{self, ExperimentConfig, ExperimentName};
use fesample::lowerbound;
use fesample::magnet;
use fesample::meanfield::{self, MeanFieldConfig};
use fesample::model::{
    exact_free_energy_auto, free_energy_and_magnetization, free_energy_exact_mrf,
    DEFAULT_ENUM_GUARD,
};
use fesample::regularity::{self, FkConfig, NormMode};
use fesample::sampler::{self, Backend, EstimatorConfig};
use fesample::{io, Error, Model, Result};

#[derive(Parser)]
#[command(
    name = "fesample",
    about = "Free-energy estimation for Ising models and binary MRFs from small vertex samples",
    version
)]
struct Cli {
    /// Master seed; all randomness derives from named substreams of it.
    #[arg(long, global = true, default_value_t = 17)]
    seed: u64,

    /// Output path (CSV for row-producing commands, a directory for
    /// `experiment`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Size of the rayon thread pool (default: one per core). Results do not
    /// depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Exact enumeration refuses models larger than this.
    #[arg(long, global = true, default_value_t = DEFAULT_ENUM_GUARD)]
    enum_guard: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact free energy (closed form for uniform complete graphs,
    /// enumeration otherwise).
    Exact(ExactArgs),
    /// Mean-field variational free energy F*; checks F* ≤ F when enumerable.
    Meanfield(MeanfieldArgs),
    /// Weak-regularity cut decomposition of the coupling matrix.
    Decompose(DecomposeArgs),
    /// The ∞→1 norm of the coupling matrix.
    Cutnorm(CutnormArgs),
    /// The n/q-rescaled median-of-repeats estimator.
    Estimate(EstimateArgs),
    /// Mean magnetization from three free-energy queries.
    Magnetize(MagnetizeArgs),
    /// The indistinguishable dense pair: probe failure-rate experiment.
    Lowerbound(LowerboundArgs),
    /// Reproducible experiment suite (CSV + JSON reports).
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ExactArgs {
    /// Model file: edge-list text or JSON ({n, edges, fields} / {n, r, terms}).
    #[arg(long)]
    model: PathBuf,
    /// Also report E[Σ x_i] (Ising only).
    #[arg(long)]
    magnetization: bool,
}

#[derive(Args)]
struct MeanfieldArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Regularity parameter; width is at most 16/ε².
    #[arg(long)]
    epsilon: f64,
}

#[derive(Args)]
struct CutnormArgs {
    #[arg(long)]
    model: PathBuf,
    /// Force the sign-enumeration exact algorithm up to this dimension.
    #[arg(long, default_value_t = regularity::DEFAULT_EXACT_NORM_GUARD)]
    exact_guard: usize,
    /// Seeded restarts of the alternating heuristic above the guard.
    #[arg(long, default_value_t = 64)]
    restarts: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Exact,
    Meanfield,
    MaxentGrid,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sample size; q = n reproduces the exact free energy.
    #[arg(long)]
    q: usize,
    /// Odd number of repeats entering the median.
    #[arg(long, default_value_t = 11)]
    repeats: usize,
    #[arg(long, value_enum, default_value_t = BackendChoice::Exact)]
    backend: BackendChoice,
    /// Target accuracy; feeds the reported error envelope only.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleChoice {
    Exact,
    Sampler,
}

#[derive(Args)]
struct MagnetizeArgs {
    #[arg(long)]
    model: PathBuf,
    /// Field window; the estimate approximates m_{h'} for some |h'| < ν.
    #[arg(long)]
    nu: f64,
    /// Per-call oracle error bound εν, echoed into the report.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, value_enum, default_value_t = OracleChoice::Exact)]
    oracle: OracleChoice,
    /// Sample size for the sampler oracle.
    #[arg(long)]
    q: Option<usize>,
    /// Repeats for the sampler oracle.
    #[arg(long, default_value_t = 11)]
    repeats: usize,
}

#[derive(Args)]
struct LowerboundArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long)]
    delta: f64,
    /// Weight scale of the pair (echoed; probing sees only weight positions).
    #[arg(long = "M", default_value_t = 1.0)]
    m_weight: f64,
    /// Entries probed per trial.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    /// convergence | concentration | legs | lowerbound | magnetization | all
    #[arg(long, default_value = "all")]
    name: String,
    /// Trials per probe row in the lower-bound experiment.
    #[arg(long, default_value_t = 10_000)]
    probe_trials: usize,
    /// Master seeds in the convergence sweep.
    #[arg(long, default_value_t = 10)]
    master_seeds: usize,
    /// Re-run every experiment and fail unless the CSV bytes match.
    #[arg(long)]
    verify: bool,
}

fn require_ising(model: Model, command: &str) -> Result<fesample::IsingModel> {
    match model {
        Model::Ising(m) => Ok(m),
        Model::Mrf(_) => Err(Error::InvalidModel(format!(
            "`{command}` operates on Ising models; got a higher-order MRF"
        ))),
    }
}

fn backend_of(choice: BackendChoice) -> Backend {
    match choice {
        BackendChoice::Exact => Backend::Exact,
        BackendChoice::Meanfield => Backend::MeanField(MeanFieldConfig::default()),
        BackendChoice::MaxentGrid => Backend::default_maxent_grid(),
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Exact(args) => {
            let model = io::read_model(&args.model)?;
            let n = model.n();
            match &model {
                Model::Ising(m) => {
                    if args.magnetization {
                        let (f, mag) = free_energy_and_magnetization(m, cli.enum_guard)?;
                        println!("n: {n}");
                        println!("free_energy: {f}");
                        println!("per_site: {}", f / n as f64);
                        println!("magnetization: {mag}");
                    } else {
                        let f = exact_free_energy_auto(m, cli.enum_guard)?;
                        println!("n: {n}");
                        println!("free_energy: {f}");
                        println!("per_site: {}", f / n as f64);
                    }
                }
                Model::Mrf(m) => {
                    if args.magnetization {
                        return Err(Error::InvalidModel(
                            "--magnetization applies to Ising models only".into(),
                        ));
                    }
                    let f = free_energy_exact_mrf(m, cli.enum_guard)?;
                    println!("n: {n}");
                    println!("r: {}", m.r());
                    println!("free_energy: {f}");
                    println!("per_site: {}", f / n as f64);
                }
            }
            Ok(true)
        }
        Command::Meanfield(args) => {
            let model = require_ising(io::read_model(&args.model)?, "meanfield")?;
            let config = MeanFieldConfig {
                tolerance: args.tolerance,
                max_sweeps: args.max_sweeps,
                restarts: args.restarts,
            };
            let result = meanfield::variational_free_energy(&model, &config, cli.seed)?;
            println!("n: {}", model.n());
            println!("variational_free_energy: {}", result.value);
            println!("converged: {}", result.converged);
            println!("residual: {:e}", result.residual);
            println!("winning_restart: {}", result.restart);
            if model.n() <= cli.enum_guard {
                let exact = exact_free_energy_auto(&model, cli.enum_guard)?;
                let ok = result.value <= exact + 1e-6;
                println!("exact_free_energy: {exact}");
                println!("variational_gap: {}", exact - result.value);
                println!("lower_bound_holds: {ok}");
                return Ok(ok);
            }
            Ok(true)
        }
        Command::Decompose(args) => {
            let model = require_ising(io::read_model(&args.model)?, "decompose")?;
            let decomp = regularity::fk_decompose(
                model.coupling(),
                args.epsilon,
                &FkConfig::default(),
                cli.seed,
            )?;
            let width_bound = (16.0 / (args.epsilon * args.epsilon)).ceil() as usize;
            let n = model.n() as f64;
            let frob = model.coupling().iter().map(|v| v * v).sum::<f64>().sqrt();
            let threshold = 4.0 * args.epsilon * n * frob;
            let residual = model.coupling() - &decomp.materialize();
            let norm = regularity::infty_to_one_norm(
                &residual,
                NormMode::Heuristic { restarts: 64 },
                cli.seed,
            )?;
            println!("n: {}", model.n());
            println!("width: {}", decomp.width());
            println!("width_bound: {width_bound}");
            println!("coefficient_length: {}", decomp.coefficient_length());
            println!(
                "residual_norm{}: {}",
                if norm.exact { "" } else { "_lower_bound" },
                norm.value
            );
            println!("residual_threshold: {threshold}");
            if let Some(out) = &cli.out {
                io::write_decomposition(out, &decomp)?;
                println!("wrote: {}", out.display());
            }
            let ok =
                decomp.width() <= width_bound && (!norm.exact || norm.value <= threshold + 1e-9);
            println!("contract_holds: {ok}");
            Ok(ok)
        }
        Command::Cutnorm(args) => {
            let model = require_ising(io::read_model(&args.model)?, "cutnorm")?;
            let mode = if model.n() <= args.exact_guard {
                NormMode::Exact
            } else {
                NormMode::Heuristic {
                    restarts: args.restarts,
                }
            };
            let result = regularity::infty_to_one_norm(model.coupling(), mode, cli.seed)?;
            println!("n: {}", model.n());
            println!("infty_to_one_norm: {}", result.value);
            println!("exact: {}", result.exact);
            Ok(true)
        }
        Command::Estimate(args) => {
            let model = io::read_model(&args.model)?;
            let config = EstimatorConfig {
                q: args.q,
                repeats: args.repeats,
                backend: backend_of(args.backend),
                epsilon: args.epsilon,
                seed: cli.seed,
                enum_guard: cli.enum_guard,
                ..EstimatorConfig::new(args.q, cli.seed)
            };
            let estimate = match &model {
                Model::Ising(m) => sampler::estimate_free_energy(m, &config)?,
                Model::Mrf(m) => {
                    if !matches!(args.backend, BackendChoice::Exact) {
                        return Err(Error::InvalidModel(
                            "MRF estimation supports the exact backend only".into(),
                        ));
                    }
                    sampler::estimate_free_energy_mrf(m, &config)?
                }
            };
            println!("n: {}", estimate.n);
            println!("q: {}", estimate.q);
            println!("estimate: {}", estimate.estimate);
            println!("per_site: {}", estimate.estimate / estimate.n as f64);
            println!("successful_repeats: {}", estimate.per_repeat.len());
            println!("failed_repeats: {}", estimate.failures.len());
            println!("error_envelope: {}", estimate.error_envelope);
            if let Some(out) = &cli.out {
                io::write_estimate_csv(out, &estimate)?;
                println!("wrote: {}", out.display());
            }
            Ok(true)
        }
        Command::Magnetize(args) => {
            let model = require_ising(io::read_model(&args.model)?, "magnetize")?;
            let estimate = match args.oracle {
                OracleChoice::Exact => {
                    magnet::estimate_magnetization_exact(&model, args.nu, cli.enum_guard)?
                }
                OracleChoice::Sampler => {
                    let q = args.q.unwrap_or_else(|| model.n().min(16));
                    let config = EstimatorConfig {
                        q,
                        repeats: args.repeats,
                        epsilon: args.epsilon,
                        seed: cli.seed,
                        enum_guard: cli.enum_guard,
                        ..EstimatorConfig::new(q, cli.seed)
                    };
                    magnet::estimate_magnetization(
                        |h| {
                            Ok(
                                sampler::estimate_free_energy(&model.with_field_shift(h), &config)?
                                    .estimate,
                            )
                        },
                        args.nu,
                        args.epsilon,
                    )?
                }
            };
            let (lo, hi) = estimate.bracket;
            println!("n: {}", model.n());
            println!("magnetization: {}", estimate.value);
            println!("bracket_low: {lo}");
            println!("bracket_high: {hi}");
            println!("oracle_calls: {}", estimate.oracle_calls);
            println!("nu: {}", estimate.h_window);
            println!("epsilon: {}", estimate.epsilon);
            let ok = estimate.oracle_calls == 3
                && (!matches!(args.oracle, OracleChoice::Exact) || lo <= hi + 1e-9);
            println!("assertions_hold: {ok}");
            Ok(ok)
        }
        Command::Lowerbound(args) => {
            let report = lowerbound::probe_experiment(
                args.n,
                args.epsilon,
                args.delta,
                args.k,
                args.trials,
                cli.seed,
            )?;
            println!("n: {}", report.n);
            println!("epsilon: {}", report.epsilon);
            println!("delta: {}", report.delta);
            println!("M: {}", args.m_weight);
            println!("k: {}", report.k);
            println!("trials: {}", report.trials);
            println!("failures: {}", report.failures);
            println!("failure_rate: {}", report.failure_rate);
            println!("bound: {}", report.bound);
            println!("sigma: {}", report.sigma);
            if let Some(out) = &cli.out {
                let mut csv =
                    String::from("n,epsilon,delta,M,k,trials,failures,failure_rate,bound,sigma\n");
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    report.n,
                    report.epsilon,
                    report.delta,
                    args.m_weight,
                    report.k,
                    report.trials,
                    report.failures,
                    report.failure_rate,
                    report.bound,
                    report.sigma
                ));
                std::fs::write(out, csv)?;
                println!("wrote: {}", out.display());
            }
            let ok = report.failure_rate >= report.bound - 3.0 * report.sigma;
            println!("meets_bound: {ok}");
            Ok(ok)
        }
        Command::Experiment(args) => {
            let config = ExperimentConfig {
                seed: cli.seed,
                enum_guard: cli.enum_guard,
                probe_trials: args.probe_trials,
                master_seeds: args.master_seeds,
            };
            let names: Vec<ExperimentName> = if args.name == "all" {
                ExperimentName::ALL.to_vec()
            } else {
                vec![args.name.parse()?]
            };
            let dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from("experiments"));
            let mut all_ok = true;
            for name in names {
                let report = harness::run_experiment(name, &config)?;
                let (csv_path, json_path) = report.write(&dir)?;
                let passed = report.all_checks_passed();
                all_ok &= passed;
                println!(
                    "{name}: {} rows, checks {}, wrote {} and {}",
                    report.rows.len(),
                    if passed { "passed" } else { "FAILED" },
                    csv_path.display(),
                    json_path.display()
                );
                for check in &report.checks {
                    println!(
                        "  [{}] {}: {}",
                        if check.passed { "ok" } else { "FAIL" },
                        check.name,
                        check.detail
                    );
                }
                if args.verify {
                    let again = harness::run_experiment(name, &config)?;
                    let written = std::fs::read_to_string(&csv_path)?;
                    let identical = written == again.csv();
                    all_ok &= identical;
                    println!(
                        "  [{}] verify: rerun CSV {}",
                        if identical { "ok" } else { "FAIL" },
                        if identical {
                            "byte-identical"
                        } else {
                            "DIFFERS"
                        }
                    );
                }
            }
            Ok(all_ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: building thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
