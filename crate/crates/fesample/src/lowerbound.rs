//! The sample-complexity lower bound: indistinguishable Δ-dense pairs.
//!
//! `J'_M` puts weight `M` on every edge of the complete graph; `J_M` upgrades
//! `k_h = round(εΔ·C(n,2))` randomly chosen edges to `M/Δ`. Both are Δ-dense
//! (`Δ‖vec J‖_∞ ≤ ‖vec J‖_1/n²`), ferromagnetic, and — for large `M` —
//! separated in free energy by at least `(ε/2)‖vec J'_M‖_1`, since
//! `F_M/M → ‖vec J_M‖_1/M = 2(1 + ε(1−Δ))·C(n,2)` while
//! `F'_M/M → 2·C(n,2)`.
//!
//! Yet any algorithm probing at most `k` entries fails to distinguish them
//! with probability at least `(1/2)(1 − 2kεΔ)`: the optimal test guesses
//! `J'_M` unless a probe hits a heavy edge, and `k` probes miss all `k_h`
//! heavy edges among `C(n,2)` most of the time. [`probe_experiment`]
//! simulates exactly that test on edge index sets (no matrices are
//! materialized), so it runs comfortably at `n = 200`, `10⁴` trials.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IsingModel;
use crate::rng::substream;

/// Which member of the pair an instance is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WhichModel {
    Perturbed,
    Uniform,
}

/// One member of a lower-bound pair, stored as the heavy-edge set (empty for
/// the uniform model) rather than a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundInstance {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub m: f64,
    /// Sorted pairs `(i, j)` with `i < j` carrying weight `M/Δ`.
    pub heavy_edges: Vec<(usize, usize)>,
    pub which: WhichModel,
}

/// `C(n, 2)`.
pub fn edge_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Number of heavy edges: `round(εΔ·C(n,2))`.
pub fn heavy_edge_count(n: usize, epsilon: f64, delta: f64) -> usize {
    (epsilon * delta * edge_count(n) as f64).round() as usize
}

fn check_parameters(n: usize, epsilon: f64, delta: f64, m: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::ParameterOutOfRange(format!(
            "need n ≥ 2 vertices, got {n}"
        )));
    }
    for (name, v) in [("epsilon", epsilon), ("delta", delta)] {
        if !(v > 0.0 && v < 0.25) {
            return Err(Error::ParameterOutOfRange(format!(
                "{name} must lie in (0, 1/4), got {v}"
            )));
        }
    }
    if !(m > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "weight scale M must be positive, got {m}"
        )));
    }
    Ok(())
}

/// Decode a flat edge index in `[0, C(n,2))` to the pair `(i, j)`, `i < j`,
/// in lexicographic order.
pub(crate) fn edge_from_index(n: usize, mut idx: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if idx < row {
            return (i, i + 1 + idx);
        }
        idx -= row;
        i += 1;
    }
}

impl LowerBoundInstance {
    /// Coupling between distinct vertices `i` and `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        if self.heavy_edges.binary_search(&key).is_ok() {
            self.m / self.delta
        } else {
            self.m
        }
    }

    /// `‖vec J‖_∞` over the `n²` matrix entries.
    pub fn vec_infinity_norm(&self) -> f64 {
        if self.heavy_edges.is_empty() {
            self.m
        } else {
            self.m / self.delta
        }
    }

    /// `‖vec J‖_1` over the `n²` matrix entries (each edge appears twice).
    pub fn vec_l1_norm(&self) -> f64 {
        let total = edge_count(self.n);
        let heavy = self.heavy_edges.len();
        2.0 * ((total - heavy) as f64 * self.m + heavy as f64 * self.m / self.delta)
    }

    /// The Δ-density predicate `Δ‖vec J‖_∞ ≤ ‖vec J‖_1/n²`.
    pub fn is_delta_dense(&self) -> bool {
        self.delta * self.vec_infinity_norm()
            <= self.vec_l1_norm() / (self.n * self.n) as f64 + 1e-12
    }

    /// Materialize as a dense model (for enumeration at small `n`).
    pub fn to_model(&self) -> Result<IsingModel> {
        let mut j = ndarray::Array2::from_elem((self.n, self.n), self.m);
        for i in 0..self.n {
            j[(i, i)] = 0.0;
        }
        for &(a, b) in &self.heavy_edges {
            j[(a, b)] = self.m / self.delta;
            j[(b, a)] = self.m / self.delta;
        }
        IsingModel::new(j, ndarray::Array1::zeros(self.n))
    }
}

/// Generate `(J_M, J'_M)`: the perturbed model draws its heavy-edge set from
/// the substream `(seed, "lowerbound", 0)`, the uniform model has none.
pub fn generate_pair(
    n: usize,
    epsilon: f64,
    delta: f64,
    m: f64,
    seed: u64,
) -> Result<(LowerBoundInstance, LowerBoundInstance)> {
    check_parameters(n, epsilon, delta, m)?;
    let total = edge_count(n);
    let k_heavy = heavy_edge_count(n, epsilon, delta);
    let mut rng = substream(seed, "lowerbound", 0);
    let mut heavy_edges: Vec<(usize, usize)> = rand::seq::index::sample(&mut rng, total, k_heavy)
        .into_iter()
        .map(|idx| edge_from_index(n, idx))
        .collect();
    heavy_edges.sort_unstable();
    let perturbed = LowerBoundInstance {
        n,
        epsilon,
        delta,
        m,
        heavy_edges,
        which: WhichModel::Perturbed,
    };
    let uniform = LowerBoundInstance {
        n,
        epsilon,
        delta,
        m,
        heavy_edges: Vec::new(),
        which: WhichModel::Uniform,
    };
    Ok((perturbed, uniform))
}

/// One row of the separation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationRow {
    pub m: f64,
    pub f_perturbed: f64,
    pub f_uniform: f64,
    /// `F_M/M` and `F'_M/M`; absent at `M = 0`.
    pub ratio_perturbed: Option<f64>,
    pub ratio_uniform: Option<f64>,
    pub separation: f64,
    /// `(ε/2)·‖vec J'_M‖_1`.
    pub threshold: f64,
    pub achieved: bool,
}

/// Exact free energies of a fixed pair along a weight schedule.
#[derive(Debug, Clone, Serialize)]
pub struct SeparationReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub heavy_edges: usize,
    pub rows: Vec<SeparationRow>,
    /// `lim_{M→∞} F_M/M = 2[C(n,2) + k_h(1/Δ − 1)]` with the realized
    /// (rounded) heavy count.
    pub limit_ratio_perturbed: f64,
    /// `lim_{M→∞} F'_M/M = 2·C(n,2)`.
    pub limit_ratio_uniform: f64,
    pub first_achieving_m: Option<f64>,
}

/// Sweep `M` over `m_schedule` (one heavy set fixed by `seed`), computing
/// both free energies exactly at each weight.
pub fn free_energy_separation(
    n: usize,
    epsilon: f64,
    delta: f64,
    m_schedule: &[f64],
    seed: u64,
    enum_guard: usize,
) -> Result<SeparationReport> {
    let mut rows = Vec::with_capacity(m_schedule.len());
    let mut first_achieving_m = None;
    let mut heavy = 0;
    for &m in m_schedule {
        if m == 0.0 {
            let f = n as f64 * std::f64::consts::LN_2;
            rows.push(SeparationRow {
                m,
                f_perturbed: f,
                f_uniform: f,
                ratio_perturbed: None,
                ratio_uniform: None,
                separation: 0.0,
                threshold: 0.0,
                achieved: true,
            });
            continue;
        }
        let (perturbed, uniform) = generate_pair(n, epsilon, delta, m, seed)?;
        heavy = perturbed.heavy_edges.len();
        let f_p = crate::model::free_energy_exact(&perturbed.to_model()?, enum_guard)?;
        let f_u = crate::model::free_energy_exact(&uniform.to_model()?, enum_guard)?;
        let separation = (f_p - f_u).abs();
        let threshold = 0.5 * epsilon * uniform.vec_l1_norm();
        let achieved = separation >= threshold;
        if achieved && first_achieving_m.is_none() {
            first_achieving_m = Some(m);
        }
        rows.push(SeparationRow {
            m,
            f_perturbed: f_p,
            f_uniform: f_u,
            ratio_perturbed: Some(f_p / m),
            ratio_uniform: Some(f_u / m),
            separation,
            threshold,
            achieved,
        });
    }
    let total = edge_count(n) as f64;
    Ok(SeparationReport {
        n,
        epsilon,
        delta,
        heavy_edges: heavy,
        rows,
        limit_ratio_perturbed: 2.0 * (total + heavy as f64 * (1.0 / delta - 1.0)),
        limit_ratio_uniform: 2.0 * total,
        first_achieving_m: first_achieving_m.filter(|&m| m > 0.0),
    })
}

/// Outcome of the probing experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// The proof's guarantee `(1/2)(1 − 2kεΔ)`, clamped at 0.
    pub bound: f64,
    /// Binomial standard deviation of the empirical rate at `p = bound`.
    pub sigma: f64,
}

/// Simulate the optimal `k`-probe distinguisher against a 50/50 prior:
/// truth is drawn, the perturbed model redraws its heavy set per trial, the
/// tester probes `k` distinct edges and guesses "uniform" unless a probed
/// weight differs from `M`. Returns the empirical failure rate. Works on
/// edge indices; `M` itself never enters (only where the heavy edges are).
pub fn probe_experiment(
    n: usize,
    epsilon: f64,
    delta: f64,
    k: usize,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport> {
    check_parameters(n, epsilon, delta, 1.0)?;
    if trials < 100 {
        return Err(Error::ParameterOutOfRange(format!(
            "need at least 100 trials for a meaningful rate, got {trials}"
        )));
    }
    let total = edge_count(n);
    if k > total {
        return Err(Error::ParameterOutOfRange(format!(
            "cannot probe {k} distinct edges among {total}"
        )));
    }
    let k_heavy = heavy_edge_count(n, epsilon, delta);
    let failures: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, "probe", t as u64);
            let truth_perturbed: bool = rng.gen();
            let heavy: std::collections::HashSet<usize> = if truth_perturbed {
                rand::seq::index::sample(&mut rng, total, k_heavy)
                    .into_iter()
                    .collect()
            } else {
                std::collections::HashSet::new()
            };
            let saw_heavy = rand::seq::index::sample(&mut rng, total, k)
                .into_iter()
                .any(|e| heavy.contains(&e));
            // Optimal test: guess "perturbed" iff a heavy weight was seen.
            let guess_perturbed = saw_heavy;
            usize::from(guess_perturbed != truth_perturbed)
        })
        .sum();
    let bound = (0.5 * (1.0 - 2.0 * k as f64 * epsilon * delta)).max(0.0);
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    Ok(ProbeReport {
        n,
        epsilon,
        delta,
        k,
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        bound,
        sigma,
    })
}
