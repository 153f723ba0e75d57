//! Naive mean-field variational free energy.
//!
//! Over product measures with means `x ∈ [-1, 1]^n` the Gibbs variational
//! principle gives the lower bound
//!
//! `F ≥ F* = max_x  Σ_{i,j} J_ij x_i x_j + Σ_i h_i x_i + Σ_i H((1+x_i)/2)`
//!
//! with `H` the natural-log binary entropy, and `F − F*` equals the smallest
//! KL divergence from a product measure to the Gibbs measure. The solver is
//! multi-start cyclic coordinate ascent: each coordinate update solves the
//! scalar problem `max_t a·t² + b·t + H((1+t)/2)` exactly (for an Ising
//! coupling matrix `a = 0` and the update is the classical
//! `x_i ← tanh(2·Σ_j J_ij x_j + h_i)`; the general case covers matrices with
//! diagonal entries, as produced by cut decompositions). Coordinate ascent is
//! monotone, so the reported value never decreases within a restart.
//!
//! [`mean_field_gap_bound`] evaluates two a-priori bounds on `F − F*` — the
//! `n^{2/3}`-style bound
//! `200·n^{2/3}·‖J‖_F^{2/3}·log^{1/3}(n‖J‖_F + e)` and the ε-form
//! `ε·n·‖J‖_F + 10⁵·log(e + 1/ε)/ε²` — and returns their minimum.

use ndarray::{Array1, Array2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng::substream;

/// Keep coordinate iterates strictly inside (-1, 1) so `atanh` and entropy
/// derivatives stay finite.
const CLAMP: f64 = 1.0 - 1e-12;

/// Binary entropy `H(p) = -p·ln p - (1-p)·ln(1-p)`, extended by continuity
/// with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// Total product-measure entropy `Σ_i H((1+x_i)/2)` for means `x ∈ [-1,1]^n`.
///
/// Errors with [`Error::MarginalOutOfRange`] if any `|x_i| > 1`.
pub fn entropy_term(x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if !(v.abs() <= 1.0) {
            return Err(Error::MarginalOutOfRange { index: i, value: v });
        }
        total += binary_entropy(0.5 * (1.0 + v));
    }
    Ok(total)
}

/// Solver configuration.
#[derive(Debug, Clone)]
pub struct MeanFieldConfig {
    /// Sweep convergence threshold on the largest coordinate change.
    pub tolerance: f64,
    /// Hard cap on sweeps per restart; hitting it reports `converged = false`.
    pub max_sweeps: usize,
    /// Number of starts: all-zeros, ±0.9, then seeded uniform random points.
    pub restarts: usize,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_sweeps: 10_000,
            restarts: 16,
        }
    }
}

/// Outcome of a multi-start solve: the best value found and its witness.
#[derive(Debug, Clone)]
pub struct MeanFieldResult {
    /// The variational value at `x` (a lower bound on `F` up to roundoff).
    pub value: f64,
    /// The optimizing means.
    pub x: Vec<f64>,
    /// Whether the winning restart met the sweep tolerance.
    pub converged: bool,
    /// Fixed-point violation `max_i |x_i − argmax_t(…)|` at the winner.
    pub residual: f64,
    /// Sweeps used by the winning restart.
    pub sweeps: usize,
    /// Index of the winning restart (0 = zeros, 1 = +0.9, 2 = −0.9, …).
    pub restart: usize,
}

/// `argmax_{t ∈ [-1,1]} a·t² + b·t + H((1+t)/2)`.
///
/// `d/dt = 2at + b − atanh(t)`, which diverges to `∓∞` at `t → ±1`, so the
/// maximum is interior. For `a < 1/2` the objective is strictly concave and
/// the stationary point is unique; otherwise the derivative has at most three
/// roots, separated by the inflection points `±√(1 − 1/(2a))`, and all are
/// compared. Ties resolve to the smaller `t`.
pub(crate) fn maximize_coordinate(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        // The Ising fast path: the stationary condition is t = tanh(b).
        return b.tanh().clamp(-CLAMP, CLAMP);
    }
    let f = |t: f64| a * t * t + b * t + binary_entropy(0.5 * (1.0 + t));
    let g = |t: f64| 2.0 * a * t + b - t.atanh();
    let mut candidates: Vec<f64> = vec![-CLAMP, CLAMP];
    let bisect = |mut lo: f64, mut hi: f64, out: &mut Vec<f64>| {
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            out.push(lo);
            return;
        }
        if ghi == 0.0 {
            out.push(hi);
            return;
        }
        if glo.signum() == ghi.signum() {
            return;
        }
        let rising = glo < 0.0;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if hi - lo < 1e-15 {
                break;
            }
            let gm = g(mid);
            if (gm < 0.0) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    };
    if a < 0.5 {
        bisect(-CLAMP, CLAMP, &mut candidates);
    } else {
        let t_star = (1.0 - 1.0 / (2.0 * a)).sqrt().min(CLAMP);
        bisect(-CLAMP, -t_star, &mut candidates);
        bisect(-t_star, t_star, &mut candidates);
        bisect(t_star, CLAMP, &mut candidates);
    }
    let mut best = candidates[0];
    let mut best_val = f(best);
    for &t in &candidates[1..] {
        let v = f(t);
        if v > best_val {
            best = t;
            best_val = v;
        }
    }
    best
}

/// Variational objective `Σ_{i,j} M_ij x_i x_j + h·x + Σ_i H((1+x_i)/2)` for
/// a general square matrix (diagonal included).
fn objective(mat: &Array2<f64>, h: &Array1<f64>, x: &[f64]) -> f64 {
    let n = h.len();
    let mut total = 0.0;
    for i in 0..n {
        let row = mat.row(i);
        let mut s = 0.0;
        for k in 0..n {
            s += row[k] * x[k];
        }
        total += x[i] * (s + h[i]);
    }
    total + entropy_term(x).expect("iterates stay in [-1,1]")
}

/// The scalar coefficients of coordinate `i` with the others frozen:
/// `a = M_ii`, `b = Σ_{j≠i} (M_ij + M_ji)·x_j + h_i`.
fn coordinate_coefficients(mat: &Array2<f64>, h: &Array1<f64>, x: &[f64], i: usize) -> (f64, f64) {
    let n = h.len();
    let mut b = h[i];
    for j in 0..n {
        if j != i {
            b += (mat[(i, j)] + mat[(j, i)]) * x[j];
        }
    }
    (mat[(i, i)], b)
}

fn ascend(
    mat: &Array2<f64>,
    h: &Array1<f64>,
    mut x: Vec<f64>,
    config: &MeanFieldConfig,
) -> (Vec<f64>, bool, usize) {
    let n = h.len();
    for sweep in 1..=config.max_sweeps {
        let mut max_change = 0.0f64;
        for i in 0..n {
            let (a, b) = coordinate_coefficients(mat, h, &x, i);
            let t = maximize_coordinate(a, b);
            max_change = max_change.max((t - x[i]).abs());
            x[i] = t;
        }
        if max_change < config.tolerance {
            return (x, true, sweep);
        }
    }
    (x, false, config.max_sweeps)
}

/// Multi-start variational free energy for a general square coupling matrix
/// (as produced by cut decompositions: possibly asymmetric, nonzero
/// diagonal). Deterministic for fixed `(config, seed)` and independent of
/// thread count: restarts run in parallel but are compared in index order.
pub fn variational_free_energy_matrix(
    mat: &Array2<f64>,
    h: &Array1<f64>,
    config: &MeanFieldConfig,
    seed: u64,
) -> Result<MeanFieldResult> {
    let n = h.len();
    if mat.nrows() != n || mat.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{} but the field has length {n}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if config.restarts == 0 {
        return Err(Error::ParameterOutOfRange(
            "restarts must be at least 1".into(),
        ));
    }
    let start = |k: usize| -> Vec<f64> {
        match k {
            0 => vec![0.0; n],
            1 => vec![0.9; n],
            2 => vec![-0.9; n],
            _ => {
                let mut rng = substream(seed, "meanfield", k as u64);
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
            }
        }
    };
    let runs: Vec<(f64, Vec<f64>, bool, usize)> = (0..config.restarts)
        .into_par_iter()
        .map(|k| {
            let (x, converged, sweeps) = ascend(mat, h, start(k), config);
            (objective(mat, h, &x), x, converged, sweeps)
        })
        .collect();
    let mut best = 0usize;
    for k in 1..runs.len() {
        if runs[k].0 > runs[best].0 {
            best = k;
        }
    }
    let (value, x, converged, sweeps) = runs[best].clone();
    let mut residual = 0.0f64;
    for i in 0..n {
        let (a, b) = coordinate_coefficients(mat, h, &x, i);
        residual = residual.max((x[i] - maximize_coordinate(a, b)).abs());
    }
    Ok(MeanFieldResult {
        value,
        x,
        converged,
        residual,
        sweeps,
        restart: best,
    })
}

/// Multi-start mean-field solve of an Ising model (see module docs).
pub fn variational_free_energy(
    model: &IsingModel,
    config: &MeanFieldConfig,
    seed: u64,
) -> Result<MeanFieldResult> {
    variational_free_energy_matrix(model.coupling(), model.field(), config, seed)
}

/// A-priori bound on the mean-field gap `F − F*`: the minimum of
/// `200·n^{2/3}·‖J‖_F^{2/3}·log^{1/3}(n‖J‖_F + e)` and
/// `ε·n·‖J‖_F + 10⁵·log(e + 1/ε)/ε²` for the supplied `ε ∈ (0, 1]`.
///
/// Both are loose at desk scales; they are reported, not asserted sharp.
pub fn mean_field_gap_bound(model: &IsingModel, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )));
    }
    let n = model.n() as f64;
    let jf = model.norms().frobenius;
    let cube = |v: f64| v.cbrt();
    let thm =
        200.0 * n.powf(2.0 / 3.0) * jf.powf(2.0 / 3.0) * cube((n * jf + std::f64::consts::E).ln());
    let eps_form =
        epsilon * n * jf + 1e5 * (std::f64::consts::E + 1.0 / epsilon).ln() / (epsilon * epsilon);
    Ok(thm.min(eps_form))
}
