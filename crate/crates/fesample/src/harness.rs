//! Instance generators and the reproducible experiment suite behind the CLI.
//!
//! Instances come from a small family of generators: the complete graph and
//! `G(n, m)` graphs with the uniform edge weight `β·n/m`, uniform
//! `r`-uniform hypergraphs with the same coefficient rule, step-graphon
//! samples (`u_i ~ U[0,1]`, edge `{i,j}` present with probability
//! `W(u_i, u_j)`, weight `β/n`), the lower-bound pairs, and model files.
//! With the `β·n/m` rule the edge-coefficient vector satisfies
//! `‖J‖_F = |β|n/√m` and `‖vec J‖_∞ = |β|n/m` exactly.
//!
//! Experiments produce an [`ExperimentReport`]: a CSV table whose cells are
//! fully determined by `(spec, seed)` — floats are rendered with Rust's
//! shortest round-trip `Display`, so reruns are byte-identical — plus a JSON
//! summary holding the config echo, derived statistics, named pass/fail
//! checks, and the wall clock (the only nondeterministic field, deliberately
//! kept out of the CSV).

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::lowerbound::{self, WhichModel};
use crate::magnet;
use crate::model::{
    exact_free_energy_auto, free_energy_exact, IsingModel, Model, Mrf, DEFAULT_ENUM_GUARD,
};
use crate::regularity::{fk_decompose, CutDecomposition, CutMatrix, FkConfig};
use crate::rng::substream;
use crate::sampler::{self, EstimatorConfig};

/// What to generate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceKind {
    /// Complete graph, uniform weight `β·n/C(n,2)`.
    Complete { n: usize, beta: f64 },
    /// `G(n, m)`: `m` distinct edges drawn uniformly, weight `β·n/m`.
    ErdosRenyiUniformWeight { n: usize, m: usize, beta: f64 },
    /// `r`-uniform hypergraph: all `C(n, r)` subsets, or `m` drawn uniformly
    /// when given; coefficient `β·n/m`.
    HypergraphUniform {
        n: usize,
        r: usize,
        beta: f64,
        #[serde(default)]
        m: Option<usize>,
    },
    /// Step graphon: `u_i ~ U[0,1]`, edge `{i,j}` kept with probability
    /// `W(u_i, u_j)` read from the block matrix, weight `β/n`.
    StepGraphon {
        n: usize,
        blocks: Vec<Vec<f64>>,
        beta: f64,
    },
    /// One member of the indistinguishable dense pair.
    LowerboundPair {
        n: usize,
        epsilon: f64,
        delta: f64,
        weight: f64,
        which: WhichModel,
    },
    /// Load from an edge-list or JSON file.
    File { path: PathBuf },
}

/// A generator plus the seed that makes it deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(flatten)]
    pub kind: InstanceKind,
    #[serde(default)]
    pub seed: u64,
}

fn binomial(n: usize, r: usize) -> Option<usize> {
    if r > n {
        return Some(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// Decode a flat index in `[0, C(n,r))` to the `idx`-th `r`-subset of `[n]`
/// in lexicographic order.
fn subset_from_index(n: usize, r: usize, mut idx: usize) -> Vec<usize> {
    let mut subset = Vec::with_capacity(r);
    let mut next = 0usize;
    for slot in 0..r {
        loop {
            // Subsets starting with `next` continue with an (r−slot−1)-subset
            // of the remaining tail.
            let tail = binomial(n - next - 1, r - slot - 1).expect("tail count fits");
            if idx < tail {
                subset.push(next);
                next += 1;
                break;
            }
            idx -= tail;
            next += 1;
        }
    }
    subset
}

/// Build the instance a spec describes. Deterministic given the seed.
pub fn generate_instance(spec: &InstanceSpec) -> Result<Model> {
    match &spec.kind {
        InstanceKind::Complete { n, beta } => {
            let m = lowerbound::edge_count(*n);
            if m == 0 {
                return Err(Error::ParameterOutOfRange(format!(
                    "complete graph needs n ≥ 2, got {n}"
                )));
            }
            let w = beta * *n as f64 / m as f64;
            let edges: Vec<(usize, usize, f64)> = (0..m)
                .map(|e| lowerbound::edge_from_index(*n, e))
                .map(|(i, j)| (i, j, w))
                .collect();
            Ok(Model::Ising(IsingModel::from_edges(*n, &edges, None)?))
        }
        InstanceKind::ErdosRenyiUniformWeight { n, m, beta } => {
            let total = lowerbound::edge_count(*n);
            if *m == 0 || *m > total {
                return Err(Error::ParameterOutOfRange(format!(
                    "edge count m = {m} must lie in [1, C({n},2) = {total}]"
                )));
            }
            let w = beta * *n as f64 / *m as f64;
            let mut rng = substream(spec.seed, "instance", 0);
            let mut edges: Vec<(usize, usize, f64)> = rand::seq::index::sample(&mut rng, total, *m)
                .into_iter()
                .map(|e| lowerbound::edge_from_index(*n, e))
                .map(|(i, j)| (i, j, w))
                .collect();
            edges.sort_unstable_by_key(|a| (a.0, a.1));
            Ok(Model::Ising(IsingModel::from_edges(*n, &edges, None)?))
        }
        InstanceKind::HypergraphUniform { n, r, beta, m } => {
            let total = binomial(*n, *r)
                .ok_or_else(|| Error::ParameterOutOfRange(format!("C({n}, {r}) overflows")))?;
            if total == 0 {
                return Err(Error::ParameterOutOfRange(format!(
                    "no {r}-subsets of {n} vertices"
                )));
            }
            let chosen: Vec<usize> = match m {
                None => (0..total).collect(),
                Some(m) => {
                    if *m == 0 || *m > total {
                        return Err(Error::ParameterOutOfRange(format!(
                            "term count m = {m} must lie in [1, C({n},{r}) = {total}]"
                        )));
                    }
                    let mut rng = substream(spec.seed, "instance", 0);
                    let mut picks = rand::seq::index::sample(&mut rng, total, *m).into_vec();
                    picks.sort_unstable();
                    picks
                }
            };
            let w = beta * *n as f64 / chosen.len() as f64;
            let terms: Vec<(Vec<usize>, f64)> = chosen
                .into_iter()
                .map(|idx| (subset_from_index(*n, *r, idx), w))
                .collect();
            Ok(Model::Mrf(Mrf::new(*n, *r, terms)?))
        }
        InstanceKind::StepGraphon { n, blocks, beta } => {
            let k = blocks.len();
            if k == 0 || blocks.iter().any(|row| row.len() != k) {
                return Err(Error::ParameterOutOfRange(
                    "graphon block matrix must be square and nonempty".into(),
                ));
            }
            for (i, row) in blocks.iter().enumerate() {
                for (j, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) || blocks[j][i] != p {
                        return Err(Error::ParameterOutOfRange(format!(
                            "graphon blocks must be symmetric with entries in [0,1]; \
                             W[{i}][{j}] = {p}, W[{j}][{i}] = {}",
                            blocks[j][i]
                        )));
                    }
                }
            }
            if *n < 2 {
                return Err(Error::ParameterOutOfRange(format!(
                    "graphon sample needs n ≥ 2, got {n}"
                )));
            }
            let mut rng = substream(spec.seed, "instance", 0);
            let block_of: Vec<usize> = (0..*n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    ((u * k as f64) as usize).min(k - 1)
                })
                .collect();
            let w = beta / *n as f64;
            let mut edges = Vec::new();
            for i in 0..*n {
                for j in (i + 1)..*n {
                    let coin: f64 = rng.gen();
                    if coin < blocks[block_of[i]][block_of[j]] {
                        edges.push((i, j, w));
                    }
                }
            }
            Ok(Model::Ising(IsingModel::from_edges(*n, &edges, None)?))
        }
        InstanceKind::LowerboundPair {
            n,
            epsilon,
            delta,
            weight,
            which,
        } => {
            let (perturbed, uniform) =
                lowerbound::generate_pair(*n, *epsilon, *delta, *weight, spec.seed)?;
            let member = match which {
                WhichModel::Perturbed => perturbed,
                WhichModel::Uniform => uniform,
            };
            Ok(Model::Ising(member.to_model()?))
        }
        InstanceKind::File { path } => crate::io::read_model(path),
    }
}

/// Which experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    /// Sampled estimates of a Curie–Weiss model against the closed form,
    /// sweeping the sample size.
    Convergence,
    /// Repeat-to-repeat spread of the estimator, including the `J = 0` and
    /// `q = n` exact cases.
    Concentration,
    /// The three legs of the variational sampling argument on small models.
    Legs,
    /// The dense indistinguishable pair: probe failure rates and the
    /// free-energy separation sweep.
    Lowerbound,
    /// Three-call magnetization brackets and the adversarial instance.
    Magnetization,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 5] = [
        ExperimentName::Convergence,
        ExperimentName::Concentration,
        ExperimentName::Legs,
        ExperimentName::Lowerbound,
        ExperimentName::Magnetization,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Convergence => "convergence",
            ExperimentName::Concentration => "concentration",
            ExperimentName::Legs => "legs",
            ExperimentName::Lowerbound => "lowerbound",
            ExperimentName::Magnetization => "magnetization",
        }
    }
}

impl std::str::FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|name| name.as_str() == s)
            .ok_or_else(|| {
                Error::ParameterOutOfRange(format!(
                    "unknown experiment {s:?}; expected one of convergence, concentration, \
                     legs, lowerbound, magnetization"
                ))
            })
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Knobs shared by all experiments.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub enum_guard: usize,
    /// Trials per probe row in the lower-bound experiment.
    pub probe_trials: usize,
    /// Master seeds in the convergence sweep.
    pub master_seeds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 17,
            enum_guard: DEFAULT_ENUM_GUARD,
            probe_trials: 10_000,
            master_seeds: 10,
        }
    }
}

/// A named boolean invariant checked while the experiment ran.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The result of one experiment: a deterministic CSV table plus a JSON
/// summary.
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: ExperimentName,
    pub config: serde_json::Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub summary: serde_json::Value,
    pub checks: Vec<Check>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Render the deterministic CSV table.
    pub fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Render the JSON summary (carries the wall clock; everything else is
    /// reproducible).
    pub fn summary_json(&self) -> Result<String> {
        let value = json!({
            "experiment": self.name.as_str(),
            "config": self.config,
            "summary": self.summary,
            "checks": self.checks,
            "all_checks_passed": self.all_checks_passed(),
            "rows": self.rows.len(),
            "wall_clock_seconds": self.wall_clock_seconds,
        });
        let mut out = serde_json::to_string_pretty(&value)?;
        out.push('\n');
        Ok(out)
    }

    /// Write `<dir>/<name>.csv` and `<dir>/<name>.json`; returns the paths.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{}.csv", self.name.as_str()));
        let json_path = dir.join(format!("{}.json", self.name.as_str()));
        std::fs::write(&csv_path, self.csv())?;
        std::fs::write(&json_path, self.summary_json()?)?;
        Ok((csv_path, json_path))
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// Run one experiment. Rows are deterministic in `(name, config.seed)`.
pub fn run_experiment(name: ExperimentName, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = match name {
        ExperimentName::Convergence => run_convergence(config),
        ExperimentName::Concentration => run_concentration(config),
        ExperimentName::Legs => run_legs(config),
        ExperimentName::Lowerbound => run_lowerbound(config),
        ExperimentName::Magnetization => run_magnetization(config),
    }?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Curie–Weiss `n = 400`, `β = 1`: sweep `q ∈ {20, 40, 80, 160}` over
/// `master_seeds` seeds with the exact backend (the restriction of a uniform
/// complete graph is again one, so the closed form applies at every `q`).
fn run_convergence(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let n = 400usize;
    let beta = 1.0;
    let qs = [20usize, 40, 80, 160];
    let spec = InstanceSpec {
        kind: InstanceKind::Complete { n, beta },
        seed: config.seed,
    };
    let model = match generate_instance(&spec)? {
        Model::Ising(m) => m,
        Model::Mrf(_) => unreachable!("complete instances are Ising"),
    };
    let oracle = exact_free_energy_auto(&model, config.enum_guard)?;

    let mut rows = Vec::new();
    let mut devs_by_q: Vec<(usize, Vec<f64>)> = Vec::new();
    for &q in &qs {
        let mut devs = Vec::new();
        for master in 0..config.master_seeds {
            let est_seed = config.seed.wrapping_add(1000).wrapping_add(master as u64);
            let est = sampler::estimate_free_energy(
                &model,
                &EstimatorConfig {
                    q,
                    enum_guard: config.enum_guard,
                    ..EstimatorConfig::new(q, est_seed)
                },
            )?;
            let dev_per_site = (est.estimate - oracle).abs() / n as f64;
            devs.push(dev_per_site);
            rows.push(vec![
                q.to_string(),
                master.to_string(),
                fmt(est.estimate),
                fmt(oracle),
                fmt(dev_per_site),
            ]);
        }
        devs_by_q.push((q, devs));
    }

    let median_dev: Vec<(usize, f64)> = devs_by_q
        .iter()
        .map(|(q, devs)| Ok((*q, sampler::median(devs)?)))
        .collect::<Result<_>>()?;
    let monotone = median_dev.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let hits_at_40 = devs_by_q
        .iter()
        .find(|(q, _)| *q == 40)
        .map(|(_, devs)| devs.iter().filter(|&&d| d <= 0.15).count())
        .unwrap_or(0);

    let checks = vec![
        Check {
            name: "median_deviation_non_increasing_in_q".into(),
            passed: monotone,
            detail: format!("median |estimate − F|/n by q: {median_dev:?}"),
        },
        Check {
            name: "q40_within_0.15_on_9_of_10_seeds".into(),
            passed: hits_at_40 * 10 >= 9 * config.master_seeds,
            detail: format!(
                "{hits_at_40}/{} seeds within 0.15 at q = 40",
                config.master_seeds
            ),
        },
    ];
    Ok(ExperimentReport {
        name: ExperimentName::Convergence,
        config: json!({
            "seed": config.seed, "n": n, "beta": beta, "qs": qs,
            "master_seeds": config.master_seeds, "repeats": 11, "backend": "exact",
        }),
        columns: vec!["q", "master_seed", "estimate", "oracle", "abs_dev_per_site"],
        rows,
        summary: json!({
            "oracle_free_energy": oracle,
            "median_abs_dev_per_site_by_q":
                median_dev.iter().map(|(q, d)| json!({"q": q, "median_dev": d})).collect::<Vec<_>>(),
        }),
        checks,
        wall_clock_seconds: 0.0,
    })
}

/// Estimator spread: the `J = 0` model (all repeats must agree exactly), a
/// `G(n, m)` instance swept over `q` up to `q = n` (where the estimate must
/// reproduce the exact free energy).
fn run_concentration(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    // Free model: every subset contributes exactly (n/q)·q·ln 2 = n·ln 2.
    let n_free = 60usize;
    let free = IsingModel::new(
        ndarray::Array2::zeros((n_free, n_free)),
        ndarray::Array1::zeros(n_free),
    )?;
    let est = sampler::estimate_free_energy(
        &free,
        &EstimatorConfig {
            enum_guard: config.enum_guard,
            ..EstimatorConfig::new(20, config.seed)
        },
    )?;
    let exact = n_free as f64 * std::f64::consts::LN_2;
    let mut max_dev: f64 = 0.0;
    for outcome in &est.per_repeat {
        let dev = (outcome.rescaled - exact).abs();
        max_dev = max_dev.max(dev);
        rows.push(vec![
            "free".into(),
            "20".into(),
            outcome.repeat.to_string(),
            fmt(outcome.rescaled),
            fmt(exact),
            fmt(dev),
        ]);
    }
    checks.push(Check {
        name: "free_model_deviations_exactly_zero".into(),
        passed: max_dev == 0.0,
        detail: format!("max |rescaled − n·ln 2| = {max_dev:e}"),
    });

    // G(n, m) with the uniform Example-1 weight.
    let n = 20usize;
    let spec = InstanceSpec {
        kind: InstanceKind::ErdosRenyiUniformWeight {
            n,
            m: 60,
            beta: 0.8,
        },
        seed: config.seed,
    };
    let model = match generate_instance(&spec)? {
        Model::Ising(m) => m,
        Model::Mrf(_) => unreachable!(),
    };
    let oracle = free_energy_exact(&model, config.enum_guard)?;
    let mut identity_dev = f64::INFINITY;
    for q in [8usize, 12, 20] {
        let est = sampler::estimate_free_energy(
            &model,
            &EstimatorConfig {
                enum_guard: config.enum_guard,
                ..EstimatorConfig::new(q, config.seed.wrapping_add(7))
            },
        )?;
        let values: Vec<f64> = est.per_repeat.iter().map(|o| o.rescaled).collect();
        let spread = values.iter().cloned().fold(f64::MIN, f64::max)
            - values.iter().cloned().fold(f64::MAX, f64::min);
        let dev = (est.estimate - oracle).abs();
        if q == n {
            identity_dev = dev;
        }
        rows.push(vec![
            "gnm".into(),
            q.to_string(),
            "median".into(),
            fmt(est.estimate),
            fmt(oracle),
            fmt(dev),
        ]);
        rows.push(vec![
            "gnm".into(),
            q.to_string(),
            "spread".into(),
            fmt(spread),
            fmt(oracle),
            fmt(dev),
        ]);
    }
    checks.push(Check {
        name: "q_equals_n_reproduces_exact".into(),
        passed: identity_dev <= 1e-12,
        detail: format!("|estimate − F| = {identity_dev:e} at q = n"),
    });

    Ok(ExperimentReport {
        name: ExperimentName::Concentration,
        config: json!({
            "seed": config.seed, "free_n": n_free, "gnm": {"n": n, "m": 60, "beta": 0.8},
            "qs": [8, 12, 20], "repeats": 11, "backend": "exact",
        }),
        columns: vec!["instance", "q", "row", "value", "oracle", "abs_dev"],
        rows,
        summary: json!({ "free_model_max_dev": max_dev, "identity_dev": identity_dev }),
        checks,
        wall_clock_seconds: 0.0,
    })
}

/// The three legs `|F* − F*_D|`, `|F*_D − (n/q)F*_{D̃_Q}|`,
/// `|(n/q)F*_{D̃_Q} − (n/q)F*_Q|` for a cut-structured model (where the
/// first leg vanishes) and a graphon sample.
fn run_legs(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let n = 12usize;
    let q = 8usize;

    // A model that *is* a two-cut sum: leg 1 must vanish when measured
    // against its own exact decomposition.
    let cuts = vec![
        CutMatrix::new(vec![0, 1, 2, 3, 4], vec![5, 6, 7, 8], 0.12),
        CutMatrix::new(vec![2, 3, 9, 10], vec![0, 1, 11], -0.08),
    ];
    let symmetric = {
        let mut sum = CutDecomposition {
            m: n,
            n,
            epsilon: 0.5,
            cuts: cuts.clone(),
        }
        .materialize();
        sum = &sum + &sum.t();
        let half = sum.mapv(|v| 0.5 * v);
        let mut diagless = half.clone();
        for i in 0..n {
            diagless[(i, i)] = 0.0;
        }
        diagless
    };
    let model = IsingModel::new(symmetric.clone(), ndarray::Array1::zeros(n))?;
    // The symmetrized, diagonal-free matrix is again a cut sum: halve each
    // cut and add its transpose, then subtract the diagonal via singletons.
    let mut exact_cuts: Vec<CutMatrix> = Vec::new();
    for c in &cuts {
        exact_cuts.push(CutMatrix::new(c.rows.clone(), c.cols.clone(), 0.5 * c.d));
        exact_cuts.push(CutMatrix::new(c.cols.clone(), c.rows.clone(), 0.5 * c.d));
    }
    for i in 0..n {
        let full = CutDecomposition {
            m: n,
            n,
            epsilon: 0.5,
            cuts: exact_cuts.clone(),
        }
        .materialize()[(i, i)];
        let gap = symmetric[(i, i)] - full;
        if gap != 0.0 {
            exact_cuts.push(CutMatrix::new(vec![i], vec![i], gap));
        }
    }
    let exact_decomp = CutDecomposition {
        m: n,
        n,
        epsilon: 0.5,
        cuts: exact_cuts,
    };

    let mut subset_rng = substream(config.seed, "legs", 0);
    let subset = sampler::sample_subset(&mut subset_rng, n, q);
    let legs = sampler::variational_sample_gap(&model, &exact_decomp, &subset, config.seed)?;
    rows.push(vec![
        "cut-sum".into(),
        fmt(legs.leg_decomposition),
        fmt(legs.leg_sampling),
        fmt(legs.leg_residual),
        fmt(legs.total),
    ]);
    checks.push(Check {
        name: "exact_decomposition_leg_vanishes".into(),
        passed: legs.leg_decomposition <= 1e-7,
        detail: format!("|F* − F*_D| = {:e}", legs.leg_decomposition),
    });
    checks.push(Check {
        name: "legs_dominate_total".into(),
        passed: legs.total <= legs.leg_decomposition + legs.leg_sampling + legs.leg_residual + 1e-9,
        detail: "triangle inequality across the three legs".into(),
    });

    // A graphon sample decomposed by the regularity algorithm.
    let spec = InstanceSpec {
        kind: InstanceKind::StepGraphon {
            n,
            blocks: vec![vec![0.9, 0.3], vec![0.3, 0.7]],
            beta: 1.5,
        },
        seed: config.seed.wrapping_add(1),
    };
    let graphon = match generate_instance(&spec)? {
        Model::Ising(m) => m,
        Model::Mrf(_) => unreachable!(),
    };
    let decomp = fk_decompose(
        graphon.coupling(),
        0.4,
        &FkConfig::default(),
        config.seed.wrapping_add(2),
    )?;
    let legs2 = sampler::variational_sample_gap(&graphon, &decomp, &subset, config.seed)?;
    rows.push(vec![
        "graphon".into(),
        fmt(legs2.leg_decomposition),
        fmt(legs2.leg_sampling),
        fmt(legs2.leg_residual),
        fmt(legs2.total),
    ]);
    checks.push(Check {
        name: "graphon_legs_finite".into(),
        passed: [
            legs2.leg_decomposition,
            legs2.leg_sampling,
            legs2.leg_residual,
            legs2.total,
        ]
        .iter()
        .all(|v| v.is_finite()),
        detail: format!("total gap {:.6}", legs2.total),
    });

    Ok(ExperimentReport {
        name: ExperimentName::Legs,
        config: json!({
            "seed": config.seed, "n": n, "q": q,
            "graphon_blocks": [[0.9, 0.3], [0.3, 0.7]], "decomp_epsilon": 0.4,
        }),
        columns: vec![
            "instance",
            "leg_decomposition",
            "leg_sampling",
            "leg_residual",
            "total",
        ],
        rows,
        summary: json!({
            "subset": subset,
            "cut_sum_total": legs.total,
            "graphon_total": legs2.total,
        }),
        checks,
        wall_clock_seconds: 0.0,
    })
}

/// Probe failure rates over a `k`-grid at `n = 200`, `ε = Δ = 0.1`, plus the
/// free-energy separation sweep at `n = 8`.
fn run_lowerbound(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    let (n, eps, delta) = (200usize, 0.1, 0.1);
    let mut acceptance_row = None;
    for k in [0usize, 5, 25, 100] {
        let probe =
            lowerbound::probe_experiment(n, eps, delta, k, config.probe_trials, config.seed)?;
        if k == 25 {
            acceptance_row = Some(probe.clone());
        }
        rows.push(vec![
            "probe".into(),
            k.to_string(),
            probe.trials.to_string(),
            fmt(probe.failure_rate),
            fmt(probe.bound),
            fmt(probe.sigma),
        ]);
    }
    let probe = acceptance_row.expect("k = 25 row present");
    checks.push(Check {
        name: "probe_failure_rate_meets_bound_at_k25".into(),
        passed: probe.failure_rate >= probe.bound - 3.0 * probe.sigma,
        detail: format!(
            "rate {} vs bound {} − 3σ = {}",
            probe.failure_rate,
            probe.bound,
            probe.bound - 3.0 * probe.sigma
        ),
    });

    let separation = lowerbound::free_energy_separation(
        8,
        0.2,
        0.125,
        &[0.0, 1.0, 2.0, 5.0],
        config.seed,
        config.enum_guard,
    )?;
    let mut ratio_at_5 = f64::NAN;
    for row in &separation.rows {
        if row.m == 5.0 {
            ratio_at_5 = row.ratio_uniform.unwrap_or(f64::NAN);
        }
        rows.push(vec![
            "separation".into(),
            fmt(row.m),
            fmt(row.f_perturbed),
            fmt(row.f_uniform),
            fmt(row.separation),
            fmt(row.threshold),
        ]);
    }
    checks.push(Check {
        name: "uniform_ratio_within_2pct_of_limit".into(),
        passed: (ratio_at_5 - separation.limit_ratio_uniform).abs()
            <= 0.02 * separation.limit_ratio_uniform,
        detail: format!(
            "F'_M/M = {ratio_at_5} vs 2·C(8,2) = {}",
            separation.limit_ratio_uniform
        ),
    });

    Ok(ExperimentReport {
        name: ExperimentName::Lowerbound,
        config: json!({
            "seed": config.seed,
            "probe": {"n": n, "epsilon": eps, "delta": delta, "trials": config.probe_trials,
                       "k_grid": [0, 5, 25, 100]},
            "separation": {"n": 8, "epsilon": 0.2, "delta": 0.125, "m_schedule": [0, 1, 2, 5]},
        }),
        columns: vec![
            "row",
            "k_or_m",
            "trials_or_fp",
            "value_or_fu",
            "bound_or_sep",
            "sigma_or_thr",
        ],
        rows,
        summary: json!({
            "probe_bound": probe.bound,
            "probe_rate_at_k25": probe.failure_rate,
            "separation_first_achieving_m": separation.first_achieving_m,
            "limit_ratio_uniform": separation.limit_ratio_uniform,
            "limit_ratio_perturbed": separation.limit_ratio_perturbed,
        }),
        checks,
        wall_clock_seconds: 0.0,
    })
}

/// Three-call magnetization brackets on random models plus the adversarial
/// instance demonstration.
fn run_magnetization(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();

    let mut all_three_calls = true;
    let mut brackets_ordered = true;
    for trial in 0..6u64 {
        let mut rng = substream(config.seed, "magnet-instance", trial);
        let n = 6;
        let mut j = ndarray::Array2::zeros((n, n));
        for i in 0..n {
            for l in (i + 1)..n {
                let w: f64 = rng.gen_range(-1.0..1.0) / n as f64;
                j[(i, l)] = w;
                j[(l, i)] = w;
            }
        }
        let h = ndarray::Array1::from_iter((0..n).map(|_| rng.gen_range(-0.5..0.5)));
        let model = IsingModel::new(j, h)?;
        let nu = 0.05;
        let est = magnet::estimate_magnetization_exact(&model, nu, config.enum_guard)?;
        all_three_calls &= est.oracle_calls == 3;
        let (lo, hi) = est.bracket;
        brackets_ordered &= lo <= hi + 1e-12;
        rows.push(vec![
            trial.to_string(),
            fmt(nu),
            fmt(est.value),
            fmt(lo),
            fmt(hi),
            est.oracle_calls.to_string(),
        ]);
    }
    checks.push(Check {
        name: "exactly_three_oracle_calls".into(),
        passed: all_three_calls,
        detail: "every estimate consumed exactly 3 free-energy queries".into(),
    });
    checks.push(Check {
        name: "bracket_ordered".into(),
        passed: brackets_ordered,
        detail: "left difference quotient ≤ right (convexity of log Z in h)".into(),
    });

    let demo = magnet::adversarial_instance_demo(3, 5.0, config.enum_guard)?;
    rows.push(vec![
        "adversarial".into(),
        fmt(demo.c),
        fmt(demo.magnetization_zero),
        fmt(demo.magnetization_minus),
        fmt(demo.magnetization_plus),
        fmt(demo.separation),
    ]);
    checks.push(Check {
        name: "adversarial_instances_separated".into(),
        passed: demo.magnetization_zero.abs() <= 1e-9
            && demo.magnetization_plus >= demo.n as f64
            && (demo.magnetization_plus + demo.magnetization_minus).abs() <= 1e-9,
        detail: format!(
            "m(−1) = {}, m(0) = {}, m(+1) = {}",
            demo.magnetization_minus, demo.magnetization_zero, demo.magnetization_plus
        ),
    });

    Ok(ExperimentReport {
        name: ExperimentName::Magnetization,
        config: json!({
            "seed": config.seed, "random_models": 6, "n": 6, "nu": 0.05,
            "adversarial": {"n": 3, "c": 5.0},
        }),
        columns: vec![
            "trial",
            "nu_or_c",
            "value",
            "lower",
            "upper",
            "calls_or_sep",
        ],
        rows,
        summary: json!({
            "adversarial_separation": demo.separation,
        }),
        checks,
        wall_clock_seconds: 0.0,
    })
}

/// Run every experiment into `dir`; returns the reports in order.
pub fn run_suite(config: &ExperimentConfig, dir: &Path) -> Result<Vec<ExperimentReport>> {
    ExperimentName::ALL
        .into_iter()
        .map(|name| {
            let report = run_experiment(name, config)?;
            report.write(dir)?;
            Ok(report)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ising(spec: &InstanceSpec) -> IsingModel {
        match generate_instance(spec).unwrap() {
            Model::Ising(m) => m,
            Model::Mrf(_) => panic!("expected Ising"),
        }
    }

    #[test]
    fn complete_instance_has_the_uniform_weight() {
        // n = 4, β = 1 → every off-diagonal weight β·n/C(4,2) = 4/6.
        let model = ising(&InstanceSpec {
            kind: InstanceKind::Complete { n: 4, beta: 1.0 },
            seed: 0,
        });
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.0 } else { 4.0 / 6.0 };
                assert_relative_eq!(model.coupling()[(i, j)], expected);
            }
        }
    }

    #[test]
    fn example_one_norm_identities_hold() {
        // Over the edge-coefficient vector (upper triangle):
        // ‖J‖_F = |β|n/√m and ‖vec J‖_∞ = |β|n/m, exactly.
        let (n, m, beta) = (14usize, 30usize, 0.7);
        let model = ising(&InstanceSpec {
            kind: InstanceKind::ErdosRenyiUniformWeight { n, m, beta },
            seed: 5,
        });
        let j = model.coupling();
        let mut frob2 = 0.0;
        let mut max = 0.0f64;
        let mut count = 0;
        for i in 0..n {
            for l in (i + 1)..n {
                frob2 += j[(i, l)] * j[(i, l)];
                max = max.max(j[(i, l)].abs());
                count += usize::from(j[(i, l)] != 0.0);
            }
        }
        assert_eq!(count, m);
        assert_relative_eq!(
            frob2.sqrt(),
            beta * n as f64 / (m as f64).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(max, beta * n as f64 / m as f64, epsilon = 1e-12);
    }

    #[test]
    fn gnm_instances_are_deterministic_and_validated() {
        let spec = |seed| InstanceSpec {
            kind: InstanceKind::ErdosRenyiUniformWeight {
                n: 10,
                m: 12,
                beta: 1.0,
            },
            seed,
        };
        assert_eq!(ising(&spec(3)), ising(&spec(3)));
        assert_ne!(ising(&spec(3)), ising(&spec(4)));
        assert!(generate_instance(&InstanceSpec {
            kind: InstanceKind::ErdosRenyiUniformWeight {
                n: 10,
                m: 0,
                beta: 1.0
            },
            seed: 0,
        })
        .is_err());
        assert!(generate_instance(&InstanceSpec {
            kind: InstanceKind::ErdosRenyiUniformWeight {
                n: 10,
                m: 46,
                beta: 1.0
            },
            seed: 0,
        })
        .is_err());
    }

    #[test]
    fn complete_hypergraph_has_all_subsets_and_the_uniform_coefficient() {
        // r = 3, n = 5, β = 1 → C(5,3) = 10 terms of coefficient 5/10 = 0.5.
        let spec = InstanceSpec {
            kind: InstanceKind::HypergraphUniform {
                n: 5,
                r: 3,
                beta: 1.0,
                m: None,
            },
            seed: 0,
        };
        let mrf = match generate_instance(&spec).unwrap() {
            Model::Mrf(m) => m,
            Model::Ising(_) => panic!("expected MRF"),
        };
        assert_eq!(mrf.terms().len(), 10);
        for (subset, coeff) in mrf.terms() {
            assert_eq!(subset.len(), 3);
            assert_relative_eq!(*coeff, 0.5);
        }
    }

    #[test]
    fn sampled_hypergraph_draws_distinct_subsets() {
        let spec = InstanceSpec {
            kind: InstanceKind::HypergraphUniform {
                n: 6,
                r: 2,
                beta: 1.0,
                m: Some(5),
            },
            seed: 9,
        };
        let mrf = match generate_instance(&spec).unwrap() {
            Model::Mrf(m) => m,
            Model::Ising(_) => panic!("expected MRF"),
        };
        assert_eq!(mrf.terms().len(), 5);
        let distinct: std::collections::HashSet<_> =
            mrf.terms().iter().map(|(s, _)| s.clone()).collect();
        assert_eq!(distinct.len(), 5);
        for (_, coeff) in mrf.terms() {
            assert_relative_eq!(*coeff, 6.0 / 5.0);
        }
    }

    #[test]
    fn subset_unranking_is_lexicographic_and_complete() {
        let n = 6;
        let r = 3;
        let mut seen = Vec::new();
        for idx in 0..binomial(n, r).unwrap() {
            seen.push(subset_from_index(n, r, idx));
        }
        let mut sorted = seen.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(seen, sorted, "lexicographic order");
        assert_eq!(seen.len(), 20);
    }

    #[test]
    fn constant_one_graphon_is_the_complete_graph() {
        let model = ising(&InstanceSpec {
            kind: InstanceKind::StepGraphon {
                n: 7,
                blocks: vec![vec![1.0]],
                beta: 2.1,
            },
            seed: 3,
        });
        for i in 0..7 {
            for j in 0..7 {
                let expected = if i == j { 0.0 } else { 2.1 / 7.0 };
                assert_relative_eq!(model.coupling()[(i, j)], expected);
            }
        }
    }

    #[test]
    fn graphon_blocks_are_validated() {
        for blocks in [
            vec![vec![0.5, 0.2]],                 // not square
            vec![vec![0.5, 0.2], vec![0.3, 0.5]], // asymmetric
            vec![vec![1.5]],                      // out of [0,1]
        ] {
            assert!(generate_instance(&InstanceSpec {
                kind: InstanceKind::StepGraphon {
                    n: 5,
                    blocks,
                    beta: 1.0
                },
                seed: 0,
            })
            .is_err());
        }
    }

    #[test]
    fn zero_graphon_yields_no_edges_and_free_energy_n_ln2() {
        let model = ising(&InstanceSpec {
            kind: InstanceKind::StepGraphon {
                n: 6,
                blocks: vec![vec![0.0]],
                beta: 1.0,
            },
            seed: 11,
        });
        assert!(model.coupling().iter().all(|&v| v == 0.0));
        assert_relative_eq!(
            free_energy_exact(&model, 25).unwrap(),
            6.0 * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lowerbound_pair_instances_match_the_module() {
        let spec = |which| InstanceSpec {
            kind: InstanceKind::LowerboundPair {
                n: 10,
                epsilon: 0.2,
                delta: 0.1,
                weight: 1.0,
                which,
            },
            seed: 21,
        };
        let perturbed = ising(&spec(WhichModel::Perturbed));
        let uniform = ising(&spec(WhichModel::Uniform));
        let (p, u) = lowerbound::generate_pair(10, 0.2, 0.1, 1.0, 21).unwrap();
        assert_eq!(perturbed, p.to_model().unwrap());
        assert_eq!(uniform, u.to_model().unwrap());
    }

    #[test]
    fn file_instances_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = Model::Ising(
            IsingModel::from_edges(3, &[(0, 1, 0.4)], Some(vec![0.0, 0.1, -0.1])).unwrap(),
        );
        crate::io::write_model(&path, &model).unwrap();
        let loaded = generate_instance(&InstanceSpec {
            kind: InstanceKind::File { path },
            seed: 0,
        })
        .unwrap();
        assert_eq!(loaded, model);
    }

    #[test]
    fn experiment_names_round_trip_through_strings() {
        for name in ExperimentName::ALL {
            let parsed: ExperimentName = name.as_str().parse().unwrap();
            assert_eq!(parsed, name);
        }
        assert!("spectral".parse::<ExperimentName>().is_err());
    }

    #[test]
    fn concentration_experiment_passes_its_checks() {
        let config = ExperimentConfig::default();
        let report = run_experiment(ExperimentName::Concentration, &config).unwrap();
        assert!(report.all_checks_passed(), "checks: {:?}", report.checks);
        assert!(!report.rows.is_empty());
        // CSV is stable under rerun.
        let again = run_experiment(ExperimentName::Concentration, &config).unwrap();
        assert_eq!(report.csv(), again.csv());
    }

    #[test]
    fn magnetization_experiment_passes_its_checks() {
        let config = ExperimentConfig::default();
        let report = run_experiment(ExperimentName::Magnetization, &config).unwrap();
        assert!(report.all_checks_passed(), "checks: {:?}", report.checks);
        let again = run_experiment(ExperimentName::Magnetization, &config).unwrap();
        assert_eq!(report.csv(), again.csv());
    }

    #[test]
    fn legs_experiment_passes_its_checks() {
        let config = ExperimentConfig::default();
        let report = run_experiment(ExperimentName::Legs, &config).unwrap();
        assert!(report.all_checks_passed(), "checks: {:?}", report.checks);
        let again = run_experiment(ExperimentName::Legs, &config).unwrap();
        assert_eq!(report.csv(), again.csv());
    }

    #[test]
    fn convergence_experiment_passes_its_checks() {
        let config = ExperimentConfig {
            master_seeds: 4,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(ExperimentName::Convergence, &config).unwrap();
        assert!(report.all_checks_passed(), "checks: {:?}", report.checks);
        assert_eq!(report.rows.len(), 16);
    }

    #[test]
    fn lowerbound_experiment_passes_its_checks() {
        let config = ExperimentConfig {
            probe_trials: 2000,
            ..ExperimentConfig::default()
        };
        let report = run_experiment(ExperimentName::Lowerbound, &config).unwrap();
        assert!(report.all_checks_passed(), "checks: {:?}", report.checks);
    }

    #[test]
    fn reports_write_csv_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let config = ExperimentConfig::default();
        let report = run_experiment(ExperimentName::Magnetization, &config).unwrap();
        let (csv_path, json_path) = report.write(dir.path()).unwrap();
        let csv = std::fs::read_to_string(&csv_path).unwrap();
        assert!(csv.starts_with("trial,nu_or_c,value,lower,upper,calls_or_sep\n"));
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
        assert_eq!(json["experiment"], "magnetization");
        assert_eq!(json["all_checks_passed"], true);
        assert!(json["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
        // The CSV never mentions the wall clock.
        assert!(!csv.contains("wall"));
    }
}
