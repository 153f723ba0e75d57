//! Max-entropy programs over product distributions and their bounded duals.
//!
//! The program `C_{r,c,γ}` maximizes `Σ_i H((1+x_i)/2)` over `x ∈ [−1,1]^n`
//! subject to linear constraints `a_j·x ≤ b_j`. For a width-`s` cut
//! decomposition the constraints pin the cut statistics: each cut contributes
//! four rows `±1_{R_j}·x ≤ ±r_j + γn` and `±1_{C_j}·x ≤ ±c_j + γn`, so
//! `m = 4s`.
//!
//! The Lagrangian dual has a closed form: the inner maximizer is
//! `x_i(y) = tanh(−Σ_j y_j a_{j,i})` and
//!
//! `g(y) = Σ_i log 2cosh(Σ_j y_j a_{j,i}) + Σ_j y_j b_j`,
//!
//! a smooth convex function with gradient `∇_j g = b_j − a_j·x(y)`. Weak
//! duality gives `g(y) ≥ OPT` for every `y ≥ 0`; since the entropy of a
//! feasible point is nonnegative, any dual value below zero certifies
//! infeasibility. [`solve_dual_bounded`] minimizes `g` over the box
//! `[0, K/γ]^m`; its value sits between the γ-slack optimum and the larger of
//! the 2γ-slack optimum and `−(K−1)n`, which turns deep-negative dual values
//! into infeasibility certificates.
//!
//! On top of the programs sits the generalized-cut free-energy approximation
//! `F*_{r,c,γ} = Σ_s r_s c_s d_s + O_{r,c,γ}` and its maximization over the
//! grid `I_γ^s × I_γ^s` ([`grid_maximize`]), which approximates the
//! variational free energy `F*_D` of the cut sum to within `2αℓγn√s` when the
//! coefficient length of the decomposition is at most `α/n`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::entropy_term;
use crate::regularity::CutDecomposition;

/// One linear constraint `a·x ≤ b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: Vec<f64>,
    pub b: f64,
}

/// The program `C_{r,c,γ}`: maximize `Σ H((1+x_i)/2)` over `[−1,1]^n`
/// subject to `a_j·x ≤ b_j` for all stored constraints. `gamma` records the
/// slack the constraints were built with (the dual box bound is `K/γ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntProgram {
    pub n: usize,
    pub constraints: Vec<Constraint>,
    pub gamma: f64,
}

impl MaxEntProgram {
    pub fn new(n: usize, constraints: Vec<Constraint>, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel(
                "program dimension must be positive".into(),
            ));
        }
        if !(gamma >= 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "program slack gamma must be nonnegative, got {gamma}"
            )));
        }
        for (j, c) in constraints.iter().enumerate() {
            if c.a.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "constraint {j} has {} coefficients, expected {n}",
                    c.a.len()
                )));
            }
            if !c.b.is_finite() || c.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "constraint {j} has non-finite entries"
                )));
            }
        }
        Ok(Self {
            n,
            constraints,
            gamma,
        })
    }

    /// Number of constraints `m`.
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Build `C_{r,c,γ_slack}` from a square cut decomposition: rows `j`,
    /// `s+j`, `2s+j`, `3s+j` are `1_{R_j}·x ≤ r_j + γn`, `−1_{R_j}·x ≤ −r_j +
    /// γn`, `1_{C_j}·x ≤ c_j + γn`, `−1_{C_j}·x ≤ −c_j + γn`.
    pub fn from_cuts(
        decomp: &CutDecomposition,
        r: &[f64],
        c: &[f64],
        gamma_slack: f64,
    ) -> Result<Self> {
        if decomp.m != decomp.n {
            return Err(Error::DimensionMismatch(format!(
                "cut programs need a square decomposition, got {}x{}",
                decomp.m, decomp.n
            )));
        }
        let s = decomp.width();
        if r.len() != s || c.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "expected {s} row/column targets, got {} and {}",
                r.len(),
                c.len()
            )));
        }
        let n = decomp.n;
        let bound = n as f64;
        for &t in r.iter().chain(c.iter()) {
            if !(t.abs() <= bound) {
                return Err(Error::ParameterOutOfRange(format!(
                    "cut statistic target {t} outside [-{bound}, {bound}]"
                )));
            }
        }
        let slack = gamma_slack * n as f64;
        let indicator = |idx: &[usize], sign: f64| -> Vec<f64> {
            let mut a = vec![0.0; n];
            for &i in idx {
                a[i] = sign;
            }
            a
        };
        let mut constraints = Vec::with_capacity(4 * s);
        for (targets, side) in [(r, 0), (c, 1)] {
            for sign in [1.0, -1.0] {
                for (j, cut) in decomp.cuts.iter().enumerate() {
                    let idx = if side == 0 { &cut.rows } else { &cut.cols };
                    constraints.push(Constraint {
                        a: indicator(idx, sign),
                        b: sign * targets[j] + slack,
                    });
                }
            }
        }
        MaxEntProgram::new(n, constraints, gamma_slack)
    }
}

/// Solver status per the bounded-dual dichotomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgramStatus {
    /// The returned primal point satisfies every constraint within tolerance.
    Feasible,
    /// The dual certifies infeasibility (weak duality + nonnegative entropy;
    /// for the bounded dual, certified at the 2γ-slack level).
    InfeasibleCertified,
    /// The dual point's primal recovery needed a feasibility repair; the
    /// returned point lies within tolerance of the constraint boundary.
    Boundary,
}

/// Outcome of a primal or dual solve. `primal_value` is `None` when only the
/// dual was computed and `Some(−∞)` when infeasibility was certified.
#[derive(Debug, Clone)]
pub struct ProgramValue {
    pub primal_value: Option<f64>,
    pub dual_value: f64,
    pub primal_point: Option<Vec<f64>>,
    pub dual_point: Vec<f64>,
    pub status: ProgramStatus,
    pub converged: bool,
    pub iterations: usize,
}

/// Stopping rules for the projected-gradient dual solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Stop when the projected-gradient residual `‖y − P(y − ∇g)‖_∞` falls
    /// below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iters: 100_000,
        }
    }
}

/// `log(2·cosh(t))`, stable for large `|t|`.
fn log_2cosh(t: f64) -> f64 {
    t.abs() + (-2.0 * t.abs()).exp().ln_1p()
}

/// The closed-form inner maximizer `x_i(y) = tanh(−Σ_j y_j a_{j,i})` of the
/// Lagrangian at dual point `y`.
pub fn primal_x_of_y(program: &MaxEntProgram, y: &[f64]) -> Vec<f64> {
    let u = field_of_y(program, y);
    u.iter().map(|&t| (-t).tanh()).collect()
}

/// `u_i = Σ_j y_j a_{j,i}`.
fn field_of_y(program: &MaxEntProgram, y: &[f64]) -> Vec<f64> {
    let mut u = vec![0.0; program.n];
    for (j, c) in program.constraints.iter().enumerate() {
        let yj = y[j];
        if yj != 0.0 {
            for (ui, ai) in u.iter_mut().zip(&c.a) {
                *ui += yj * ai;
            }
        }
    }
    u
}

/// The dual objective `g(y) = sup_x L(x, y)` and its gradient
/// `(b_j − a_j·x(y))_j`.
pub fn dual_objective(program: &MaxEntProgram, y: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(y.len(), program.m(), "dual point has wrong dimension");
    let u = field_of_y(program, y);
    let x: Vec<f64> = u.iter().map(|&t| (-t).tanh()).collect();
    let mut g: f64 = u.iter().map(|&t| log_2cosh(t)).sum();
    let mut grad = Vec::with_capacity(program.m());
    for (j, c) in program.constraints.iter().enumerate() {
        g += y[j] * c.b;
        let ax: f64 = c.a.iter().zip(&x).map(|(a, xi)| a * xi).sum();
        grad.push(c.b - ax);
    }
    (g, grad)
}

fn max_violation(program: &MaxEntProgram, x: &[f64]) -> f64 {
    program
        .constraints
        .iter()
        .map(|c| c.a.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() - c.b)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0)
}

/// Minimize the convex dual over `[0, box_bound]^m` by projected gradient
/// with backtracking line search from `y = 0`. Returns the final iterate,
/// value, iteration count, and whether the projected-gradient residual met
/// the tolerance.
fn minimize_dual_box(
    program: &MaxEntProgram,
    box_bound: f64,
    config: &SolverConfig,
) -> (Vec<f64>, f64, usize, bool) {
    let m = program.m();
    let mut y = vec![0.0; m];
    if m == 0 {
        let (g, _) = dual_objective(program, &y);
        return (y, g, 0, true);
    }
    let project = |v: f64| v.clamp(0.0, box_bound);
    let (mut g, mut grad) = dual_objective(program, &y);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..config.max_iters {
        iterations = it + 1;
        let residual = (0..m)
            .map(|j| (y[j] - project(y[j] - grad[j])).abs())
            .fold(0.0f64, f64::max);
        if residual < config.tolerance {
            converged = true;
            break;
        }
        // Backtracking: accept y⁺ = P(y − t·∇g) under the sufficient-decrease
        // condition g(y⁺) ≤ g(y) + ∇g·(y⁺ − y) + ‖y⁺ − y‖²/(2t).
        let mut accepted = false;
        for _ in 0..60 {
            let y_next: Vec<f64> = (0..m).map(|j| project(y[j] - step * grad[j])).collect();
            let (g_next, grad_next) = dual_objective(program, &y_next);
            let (mut lin, mut sq) = (0.0, 0.0);
            for j in 0..m {
                let dj = y_next[j] - y[j];
                lin += grad[j] * dj;
                sq += dj * dj;
            }
            if g_next <= g + lin + sq / (2.0 * step) + 1e-15 * g.abs().max(1.0) {
                y = y_next;
                g = g_next;
                grad = grad_next;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // The step has collapsed to rounding level; no further progress
            // is possible in floating point.
            break;
        }
    }
    (y, g, iterations, converged)
}

/// Minimize the dual over the box `[0, K/γ]^m` (the bounded dual program).
///
/// The value sits between the γ-slack primal optimum and
/// `max{O_{r,c,2γ}, −(K−1)n}`; a value at or below `−(K−1)n·(1 − 1e−9)`
/// therefore certifies that even the 2γ-slack program is infeasible, which
/// the result reports as [`ProgramStatus::InfeasibleCertified`]. Requires
/// `K > 1` and a positive program slack.
pub fn solve_dual_bounded(
    program: &MaxEntProgram,
    k: f64,
    config: &SolverConfig,
) -> Result<ProgramValue> {
    if !(k > 1.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "K must exceed 1, got {k}"
        )));
    }
    if !(program.gamma > 0.0) {
        return Err(Error::ParameterOutOfRange(
            "bounded dual needs a positive program slack".into(),
        ));
    }
    let (y, g, iterations, converged) = minimize_dual_box(program, k / program.gamma, config);
    let n = program.n as f64;
    let certified = g <= -(k - 1.0) * n * (1.0 - 1e-9);
    let x = primal_x_of_y(program, &y);
    Ok(ProgramValue {
        primal_value: certified.then_some(f64::NEG_INFINITY),
        dual_value: g,
        primal_point: Some(x),
        dual_point: y,
        status: if certified {
            ProgramStatus::InfeasibleCertified
        } else {
            ProgramStatus::Feasible
        },
        converged,
        iterations,
    })
}

/// Effective `K` for the near-unbounded dual solve inside [`solve_primal`].
const PRIMAL_K: f64 = 1000.0;

/// Solve `C_{r,c,γ}` itself: the unique entropy maximizer over the
/// constraint polytope, or certified infeasibility.
///
/// Solves the dual over a large box (`K = 1000`, or a fixed large bound when
/// `γ = 0`), recovers `x(y*)`, and — if any slack is violated by more than
/// `1e−7` — repairs feasibility by cyclic projection onto the violated
/// half-spaces and the cube. A dual value below `−1e−6` certifies
/// infeasibility outright (feasible programs have nonnegative entropy, and
/// `g(y) ≥ OPT` for every `y ≥ 0`).
pub fn solve_primal(program: &MaxEntProgram, config: &SolverConfig) -> Result<ProgramValue> {
    let box_bound = if program.gamma > 0.0 {
        PRIMAL_K / program.gamma
    } else {
        1e9
    };
    let (y, g, iterations, converged) = minimize_dual_box(program, box_bound, config);
    if g < -1e-6 {
        return Ok(ProgramValue {
            primal_value: Some(f64::NEG_INFINITY),
            dual_value: g,
            primal_point: None,
            dual_point: y,
            status: ProgramStatus::InfeasibleCertified,
            converged,
            iterations,
        });
    }
    let mut x = primal_x_of_y(program, &y);
    let pre_violation = max_violation(program, &x);
    let mut status = ProgramStatus::Feasible;
    let mut repaired = true;
    if pre_violation > 1e-7 {
        status = ProgramStatus::Boundary;
        repaired = repair_feasibility(program, &mut x);
    }
    let value = entropy_term(&x)?;
    Ok(ProgramValue {
        primal_value: Some(value),
        dual_value: g,
        primal_point: Some(x),
        dual_point: y,
        status,
        converged: converged && repaired,
        iterations,
    })
}

/// Cyclic projection onto the violated half-spaces and the cube; returns
/// whether the residual violation fell below `1e−9`.
fn repair_feasibility(program: &MaxEntProgram, x: &mut [f64]) -> bool {
    for _ in 0..20_000 {
        let mut worst = 0.0f64;
        for c in &program.constraints {
            let ax: f64 = c.a.iter().zip(x.iter()).map(|(a, xi)| a * xi).sum();
            let violation = ax - c.b;
            if violation > 0.0 {
                worst = worst.max(violation);
                let norm_sq: f64 = c.a.iter().map(|a| a * a).sum();
                if norm_sq > 0.0 {
                    let t = violation / norm_sq;
                    for (xi, a) in x.iter_mut().zip(&c.a) {
                        *xi -= t * a;
                    }
                }
            }
        }
        for xi in x.iter_mut() {
            *xi = xi.clamp(-1.0, 1.0);
        }
        if worst <= 1e-9 && max_violation(program, x) <= 1e-9 {
            return true;
        }
    }
    max_violation(program, x) <= 1e-9
}

/// `F*_{r,c,ℓγ} = Σ_s r_s c_s d_s + O_{r,c,ℓγ}` for a square decomposition;
/// `−∞` when the program is infeasible.
pub fn cut_free_energy_terms(
    decomp: &CutDecomposition,
    r: &[f64],
    c: &[f64],
    gamma: f64,
    ell: f64,
    config: &SolverConfig,
) -> Result<f64> {
    if !(gamma > 0.0) || !(ell > 0.0) {
        return Err(Error::ParameterOutOfRange(
            "cut free-energy terms need positive gamma and ell".into(),
        ));
    }
    let program = MaxEntProgram::from_cuts(decomp, r, c, ell * gamma)?;
    let solved = solve_primal(&program, config)?;
    let o = solved
        .primal_value
        .expect("solve_primal always sets a primal value");
    if o == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let quadratic: f64 = decomp
        .cuts
        .iter()
        .enumerate()
        .map(|(s, cut)| r[s] * c[s] * cut.d)
        .sum();
    Ok(quadratic + o)
}

/// The grid `I_γ ⊂ [−n, n]`: a minimal collection of points covering
/// `[−n, n]` within distance `γn`, together with the slack multiplier `ℓ`.
///
/// Realized as the centers `−n + (2k+1)γn` for `k = 0, …, ⌈1/γ⌉−1`, with the
/// last point clamped to `n`; this has `⌈1/γ⌉ ≤ 1/γ + 1` points and every
/// `z ∈ [−n, n]` within `γn` of one of them.
#[derive(Debug, Clone)]
pub struct GridIndex {
    pub gamma: f64,
    pub ell: f64,
    pub points: Vec<f64>,
}

impl GridIndex {
    pub fn new(n: usize, gamma: f64, ell: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "grid spacing gamma must be positive, got {gamma}"
            )));
        }
        if !(ell > 0.0) {
            return Err(Error::ParameterOutOfRange(format!(
                "slack multiplier ell must be positive, got {ell}"
            )));
        }
        let nf = n as f64;
        let count = (1.0 / gamma).ceil() as usize;
        let points = (0..count.max(1))
            .map(|k| (-nf + (2 * k + 1) as f64 * gamma * nf).min(nf))
            .collect();
        Ok(Self { gamma, ell, points })
    }
}

/// Result of maximizing `F*_{r,c,ℓγ}` over the grid.
#[derive(Debug, Clone)]
pub struct GridMaxResult {
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub value: f64,
    /// Cells whose program was feasible (`O ≥ −1e−9`, membership in the
    /// admissible family).
    pub feasible_cells: usize,
    pub total_cells: usize,
}

/// Cell budget for [`grid_maximize`]: `|I_γ|^{2s}` programs are solved, so
/// the default admits e.g. `s = 3` at `γ = 0.25` (4096 cells) but rejects
/// unbounded blowups with [`Error::GridTooLarge`].
pub const DEFAULT_GRID_BUDGET: u128 = 65_536;

/// Maximize `F*_{r,c,ℓγ}` over `(r, c) ∈ I_γ^s × I_γ^s`, keeping only cells
/// whose program value `O` is `≥ −1e−9` (the admissible family). Under the
/// coefficient-length bound `(Σ d_s²)^{1/2} ≤ α/n` the result is within
/// `2αℓγn√s` of the variational free energy of the cut sum.
///
/// Cells are solved in parallel; the winner is the lexicographically
/// smallest maximizing cell, independent of thread count. Ties at `s = 0`
/// reduce to the unconstrained value `n log 2`.
pub fn grid_maximize(
    decomp: &CutDecomposition,
    gamma: f64,
    ell: f64,
    config: &SolverConfig,
    budget: u128,
) -> Result<GridMaxResult> {
    let grid = GridIndex::new(decomp.n, gamma, ell)?;
    let s = decomp.width();
    let p = grid.points.len() as u128;
    let cells = p.checked_pow(2 * s as u32).ok_or(Error::GridTooLarge {
        cells: u128::MAX,
        budget,
    })?;
    if cells > budget {
        return Err(Error::GridTooLarge { cells, budget });
    }
    let decode = |mut idx: u128| -> (Vec<f64>, Vec<f64>) {
        // Mixed-radix decode, last coordinate fastest, so ascending idx is
        // lexicographic in (r, c).
        let mut coords = vec![0.0; 2 * s];
        for slot in (0..2 * s).rev() {
            coords[slot] = grid.points[(idx % p) as usize];
            idx /= p;
        }
        let c = coords.split_off(s);
        (coords, c)
    };
    let evaluated: Vec<Option<f64>> = (0..cells as u64)
        .into_par_iter()
        .map(|idx| {
            let (r, c) = decode(idx as u128);
            let program = MaxEntProgram::from_cuts(decomp, &r, &c, ell * gamma)?;
            let solved = solve_primal(&program, config)?;
            let o = solved
                .primal_value
                .expect("solve_primal always sets a primal value");
            if o >= -1e-9 {
                let quad: f64 = decomp
                    .cuts
                    .iter()
                    .enumerate()
                    .map(|(t, cut)| r[t] * c[t] * cut.d)
                    .sum();
                Ok(Some(quad + o))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, f64)> = None;
    let mut feasible_cells = 0;
    for (idx, value) in evaluated.iter().enumerate() {
        if let Some(v) = value {
            feasible_cells += 1;
            if best.is_none_or(|(_, bv)| *v > bv) {
                best = Some((idx, *v));
            }
        }
    }
    match best {
        Some((idx, value)) => {
            let (r, c) = decode(idx as u128);
            Ok(GridMaxResult {
                r,
                c,
                value,
                feasible_cells,
                total_cells: cells as usize,
            })
        }
        None => Ok(GridMaxResult {
            r: Vec::new(),
            c: Vec::new(),
            value: f64::NEG_INFINITY,
            feasible_cells: 0,
            total_cells: cells as usize,
        }),
    }
}

/// Convenience: the variational free energy of the materialized cut sum,
/// used as the oracle against which the grid approximation is judged.
pub fn cut_sum_variational(
    decomp: &CutDecomposition,
    config: &crate::meanfield::MeanFieldConfig,
    seed: u64,
) -> Result<f64> {
    let mat: Array2<f64> = decomp.materialize();
    let h = ndarray::Array1::zeros(decomp.n);
    Ok(crate::meanfield::variational_free_energy_matrix(&mat, &h, config, seed)?.value)
}
