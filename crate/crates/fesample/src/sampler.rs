//! The vertex-sample free-energy estimator.
//!
//! One repeat draws a uniform size-`q` subset `Q ⊆ [n]`, builds the induced
//! model with couplings rescaled by `n/q` (degree-`d` coefficients by
//! `(n/q)^{d−1}` for MRFs), computes its free energy `F_Q` with a pluggable
//! backend, and rescales by `n/q`. The estimate is the median of `T`
//! independent repeats. The theoretical error envelope
//! `4000εn(‖J‖_F + εn‖vec J‖_∞ + ω/q)` with `ω = log(1/ε)/ε⁸` (and its MRF
//! analogue with `ω = r⁷log(1/ε)/ε⁸`) is computed for reporting only — its
//! constants are vacuous at desk scale, so tests judge the estimator against
//! oracles instead.
//!
//! Determinism: repeat `t` draws everything from the substream
//! `(seed, "sample", t)`, repeats run in parallel, and results are collected
//! in repeat order, so outputs are independent of thread count.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield::{variational_free_energy_matrix, MeanFieldConfig};
use crate::model::{
    exact_free_energy_auto, free_energy_exact_mrf, FieldScaling, IsingModel, Mrf,
    DEFAULT_ENUM_GUARD,
};
use crate::regularity::{fk_decompose, CutDecomposition, FkConfig};
use crate::rng::substream;

/// Free-energy backend applied to each induced sample model.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Exact enumeration (with closed forms for uniform complete graphs).
    Exact,
    /// Multi-start mean-field — returns the variational free energy `F*_Q`.
    MeanField(MeanFieldConfig),
    /// The full regularity pipeline: cut-decompose the induced couplings,
    /// then maximize `F*_{r,c,ℓγ}` over the statistic grid. Fields must be
    /// zero. Returns the grid approximation of `F*_Q`.
    MaxEntGrid {
        decomp_epsilon: f64,
        gamma: f64,
        ell: f64,
        budget: u128,
    },
}

impl Backend {
    pub fn default_maxent_grid() -> Self {
        Backend::MaxEntGrid {
            decomp_epsilon: 0.35,
            gamma: 0.25,
            ell: 1.0,
            budget: crate::maxent::DEFAULT_GRID_BUDGET,
        }
    }
}

/// Estimator parameters. `repeats` must be odd so the median is a repeat
/// value; `epsilon` only feeds the reported envelope.
#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub q: usize,
    pub repeats: usize,
    pub backend: Backend,
    pub epsilon: f64,
    pub seed: u64,
    pub field_scaling: FieldScaling,
    pub enum_guard: usize,
}

impl EstimatorConfig {
    pub fn new(q: usize, seed: u64) -> Self {
        Self {
            q,
            repeats: 11,
            backend: Backend::Exact,
            epsilon: 0.1,
            seed,
            field_scaling: FieldScaling::Unscaled,
            enum_guard: DEFAULT_ENUM_GUARD,
        }
    }
}

/// One successful repeat: the drawn subset, the backend value `F_Q`, and the
/// `(n/q)`-rescaled contribution to the median.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub subset: Vec<usize>,
    pub value: f64,
    pub rescaled: f64,
}

/// A repeat whose backend failed; recorded, not fatal (unless a majority
/// fails).
#[derive(Debug, Clone)]
pub struct RepeatFailure {
    pub repeat: usize,
    pub error: String,
}

/// Result of [`estimate_free_energy`] / [`estimate_free_energy_mrf`].
#[derive(Debug, Clone)]
pub struct SampleEstimate {
    pub n: usize,
    pub q: usize,
    /// `n/q`.
    pub scale: f64,
    /// Exact median of the successful rescaled repeat values.
    pub estimate: f64,
    pub per_repeat: Vec<RepeatOutcome>,
    pub failures: Vec<RepeatFailure>,
    /// Reported theoretical envelope (never asserted — see module docs).
    pub error_envelope: f64,
    /// The `ω` entering the envelope and the sample-size floor.
    pub omega: f64,
}

/// Exact median; the values are sorted by total order first, so permuting
/// the inputs cannot change the result. Even counts (possible after repeat
/// failures) take the midpoint of the two central values.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::NotEnoughRepeats { got: 0, need: 1 });
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Ok(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    })
}

/// Draw a uniform size-`q` subset of `[n]` without replacement, sorted.
pub fn sample_subset(rng: &mut impl rand::Rng, n: usize, q: usize) -> Vec<usize> {
    let mut subset = rand::seq::index::sample(rng, n, q).into_vec();
    subset.sort_unstable();
    subset
}

/// `ω = log(1/ε)/ε⁸` and the envelope `4000εn(‖J‖_F + εn‖vec J‖_∞ + ω/q)`.
pub fn ising_error_envelope(model: &IsingModel, epsilon: f64, q: usize) -> Result<(f64, f64)> {
    check_epsilon(epsilon)?;
    let omega = (1.0 / epsilon).ln() / epsilon.powi(8);
    let norms = model.norms();
    let n = model.n() as f64;
    let envelope =
        4000.0 * epsilon * n * (norms.frobenius + epsilon * n * norms.max_entry + omega / q as f64);
    Ok((envelope, omega))
}

/// MRF analogue: `ω = r⁷log(1/ε)/ε⁸` and
/// `10⁵εr³ Σ_d n^{d/2}(‖J_{=d}‖_F + εn^{d/2}‖vec J‖_∞ + ω/q)`.
pub fn mrf_error_envelope(model: &Mrf, epsilon: f64, q: usize) -> Result<(f64, f64)> {
    check_epsilon(epsilon)?;
    let r = model.r() as f64;
    let omega = r.powi(7) * (1.0 / epsilon).ln() / epsilon.powi(8);
    let norms = model.norms();
    let n = model.n() as f64;
    let mut sum = 0.0;
    for (d, &fro) in norms.per_degree.iter().enumerate() {
        let half_pow = n.powf((d + 1) as f64 / 2.0);
        sum += half_pow * (fro + epsilon * half_pow * norms.max_entry + omega / q as f64);
    }
    Ok((1e5 * epsilon * r.powi(3) * sum, omega))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "envelope epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_config(n: usize, config: &EstimatorConfig) -> Result<()> {
    if config.q == 0 || config.q > n {
        return Err(Error::ParameterOutOfRange(format!(
            "sample size q = {} must satisfy 1 ≤ q ≤ n = {n}",
            config.q
        )));
    }
    if config.repeats == 0 || config.repeats.is_multiple_of(2) {
        return Err(Error::ParameterOutOfRange(format!(
            "repeat count T = {} must be odd and positive",
            config.repeats
        )));
    }
    check_epsilon(config.epsilon)
}

/// Shared repeat loop: `eval(subset, backend_seed) -> F_Q`.
fn run_repeats<F>(
    n: usize,
    config: &EstimatorConfig,
    eval: F,
) -> Result<(f64, Vec<RepeatOutcome>, Vec<RepeatFailure>)>
where
    F: Fn(&[usize], u64) -> Result<f64> + Sync,
{
    let scale = n as f64 / config.q as f64;
    let outcomes: Vec<(usize, Vec<usize>, Result<f64>)> = (0..config.repeats)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(config.seed, "sample", t as u64);
            let subset = sample_subset(&mut rng, n, config.q);
            let backend_seed: u64 = rng.gen();
            let value = eval(&subset, backend_seed);
            (t, subset, value)
        })
        .collect();
    let mut per_repeat = Vec::new();
    let mut failures = Vec::new();
    for (t, subset, value) in outcomes {
        match value {
            Ok(v) => per_repeat.push(RepeatOutcome {
                repeat: t,
                subset,
                value: v,
                rescaled: scale * v,
            }),
            Err(e) => failures.push(RepeatFailure {
                repeat: t,
                error: e.to_string(),
            }),
        }
    }
    let need = config.repeats.div_ceil(2);
    if per_repeat.len() < need {
        return Err(Error::NotEnoughRepeats {
            got: per_repeat.len(),
            need,
        });
    }
    let rescaled: Vec<f64> = per_repeat.iter().map(|r| r.rescaled).collect();
    Ok((median(&rescaled)?, per_repeat, failures))
}

fn backend_value(
    restricted: &IsingModel,
    backend: &Backend,
    enum_guard: usize,
    backend_seed: u64,
) -> Result<f64> {
    match backend {
        Backend::Exact => exact_free_energy_auto(restricted, enum_guard),
        Backend::MeanField(mf) => {
            Ok(crate::meanfield::variational_free_energy(restricted, mf, backend_seed)?.value)
        }
        Backend::MaxEntGrid {
            decomp_epsilon,
            gamma,
            ell,
            budget,
        } => {
            if restricted.field().iter().any(|&v| v != 0.0) {
                return Err(Error::InvalidModel(
                    "the maxent-grid backend supports zero external field only".into(),
                ));
            }
            let decomp = fk_decompose(
                restricted.coupling(),
                *decomp_epsilon,
                &FkConfig::default(),
                backend_seed,
            )?;
            let grid = crate::maxent::grid_maximize(
                &decomp,
                *gamma,
                *ell,
                &crate::maxent::SolverConfig::default(),
                *budget,
            )?;
            if grid.value == f64::NEG_INFINITY {
                return Err(Error::OracleFailure(
                    "no feasible grid cell for the induced sample model".into(),
                ));
            }
            Ok(grid.value)
        }
    }
}

/// The headline estimator: median over `T` repeats of `(n/q)·F_Q` on
/// uniformly drawn size-`q` subsets. Fully deterministic given the seed.
pub fn estimate_free_energy(
    model: &IsingModel,
    config: &EstimatorConfig,
) -> Result<SampleEstimate> {
    check_config(model.n(), config)?;
    let (envelope, omega) = ising_error_envelope(model, config.epsilon, config.q)?;
    let (estimate, per_repeat, failures) = run_repeats(model.n(), config, |subset, seed| {
        let restricted = model.restrict_scaled(subset, config.field_scaling)?;
        backend_value(&restricted, &config.backend, config.enum_guard, seed)
    })?;
    Ok(SampleEstimate {
        n: model.n(),
        q: config.q,
        scale: model.n() as f64 / config.q as f64,
        estimate,
        per_repeat,
        failures,
        error_envelope: envelope,
        omega,
    })
}

/// MRF variant; the induced polynomial scales degree-`d` coefficients by
/// `(n/q)^{d−1}` and is evaluated by exact enumeration (the only MRF
/// backend).
pub fn estimate_free_energy_mrf(model: &Mrf, config: &EstimatorConfig) -> Result<SampleEstimate> {
    check_config(model.n(), config)?;
    if !matches!(config.backend, Backend::Exact) {
        return Err(Error::ParameterOutOfRange(
            "MRF estimation supports the exact backend only".into(),
        ));
    }
    let (envelope, omega) = mrf_error_envelope(model, config.epsilon, config.q)?;
    let (estimate, per_repeat, failures) = run_repeats(model.n(), config, |subset, _seed| {
        let restricted = model.restrict_scaled(subset)?;
        free_energy_exact_mrf(&restricted, config.enum_guard)
    })?;
    Ok(SampleEstimate {
        n: model.n(),
        q: config.q,
        scale: model.n() as f64 / config.q as f64,
        estimate,
        per_repeat,
        failures,
        error_envelope: envelope,
        omega,
    })
}

/// Guard for the exact-oracle legs diagnostics.
pub const LEGS_GUARD: usize = 14;

/// The three legs of the triangle chain from `F*` to `(n/q)F*_Q`, every
/// `F*` computed by generously multi-started mean-field (the variational
/// oracle at this scale).
#[derive(Debug, Clone)]
pub struct GapLegs {
    pub f_star: f64,
    pub f_star_d: f64,
    /// `(n/q)·F*_{D̃_Q}`.
    pub f_star_dq_scaled: f64,
    /// `(n/q)·F*_Q`.
    pub f_star_q_scaled: f64,
    /// `|F* − F*_D|`.
    pub leg_decomposition: f64,
    /// `|F*_D − (n/q)F*_{D̃_Q}|`.
    pub leg_sampling: f64,
    /// `|(n/q)F*_{D̃_Q} − (n/q)F*_Q|`.
    pub leg_residual: f64,
    /// `|F* − (n/q)F*_Q|`.
    pub total: f64,
}

/// Compute the legs for a fixed model, decomposition, and drawn subset `Q`.
pub fn variational_sample_gap(
    model: &IsingModel,
    decomp: &CutDecomposition,
    subset: &[usize],
    seed: u64,
) -> Result<GapLegs> {
    if model.n() > LEGS_GUARD {
        return Err(Error::EnumerationTooLarge {
            n: model.n(),
            guard: LEGS_GUARD,
        });
    }
    if decomp.m != model.n() || decomp.n != model.n() {
        return Err(Error::DimensionMismatch(format!(
            "decomposition is {}x{}, model has n = {}",
            decomp.m,
            decomp.n,
            model.n()
        )));
    }
    let mf = MeanFieldConfig {
        restarts: 32,
        ..MeanFieldConfig::default()
    };
    let scale = model.n() as f64 / subset.len() as f64;
    let zero_n = ndarray::Array1::zeros(model.n());
    let zero_q = ndarray::Array1::zeros(subset.len());

    let f_star = variational_free_energy_matrix(model.coupling(), model.field(), &mf, seed)?.value;
    let d_full = decomp.materialize();
    let f_star_d = variational_free_energy_matrix(&d_full, &zero_n, &mf, seed)?.value;
    let restricted = model.restrict_scaled(subset, FieldScaling::Unscaled)?;
    let f_star_q =
        variational_free_energy_matrix(restricted.coupling(), restricted.field(), &mf, seed)?.value;
    let d_q = decomp.restrict(subset, scale)?.materialize();
    let f_star_dq = variational_free_energy_matrix(&d_q, &zero_q, &mf, seed)?.value;

    let f_star_dq_scaled = scale * f_star_dq;
    let f_star_q_scaled = scale * f_star_q;
    Ok(GapLegs {
        f_star,
        f_star_d,
        f_star_dq_scaled,
        f_star_q_scaled,
        leg_decomposition: (f_star - f_star_d).abs(),
        leg_sampling: (f_star_d - f_star_dq_scaled).abs(),
        leg_residual: (f_star_dq_scaled - f_star_q_scaled).abs(),
        total: (f_star - f_star_q_scaled).abs(),
    })
}

/// Outcome of the easy-direction inequality
/// `(n/q)·F*_{D̃_Q} ≥ F*_D − 3αγn√s` for one drawn subset.
#[derive(Debug, Clone)]
pub struct EasyDirectionOutcome {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

/// Evaluate the easy direction for a generalized-cut model `D` and subset
/// `Q`, with slack `3αγn√s`.
pub fn easy_direction_check(
    decomp: &CutDecomposition,
    subset: &[usize],
    gamma: f64,
    alpha: f64,
    seed: u64,
) -> Result<EasyDirectionOutcome> {
    if decomp.m != decomp.n {
        return Err(Error::DimensionMismatch(
            "easy direction needs a square decomposition".into(),
        ));
    }
    let n = decomp.n;
    let q = subset.len();
    let mf = MeanFieldConfig {
        restarts: 32,
        ..MeanFieldConfig::default()
    };
    let scale = n as f64 / q as f64;
    let d_full = decomp.materialize();
    let f_star_d =
        variational_free_energy_matrix(&d_full, &ndarray::Array1::zeros(n), &mf, seed)?.value;
    let d_q = decomp.restrict(subset, scale)?.materialize();
    let f_star_dq =
        variational_free_energy_matrix(&d_q, &ndarray::Array1::zeros(q), &mf, seed)?.value;
    let slack = 3.0 * alpha * gamma * n as f64 * (decomp.width() as f64).sqrt();
    let lhs = scale * f_star_dq;
    let rhs = f_star_d - slack;
    Ok(EasyDirectionOutcome {
        lhs,
        rhs,
        slack,
        holds: lhs >= rhs,
    })
}
