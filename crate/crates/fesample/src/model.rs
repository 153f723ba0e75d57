//! Ising models, higher-order binary Markov random fields, and exact
//! free-energy oracles.
//!
//! An [`IsingModel`] is the Gibbs measure `P(x) ∝ exp(xᵀJx + h·x)` on
//! `{±1}^n` with `J` real symmetric and zero on the diagonal. Quadratic forms
//! are always taken over *ordered* pairs, so an edge `{i, j}` with matrix
//! entry `J_ij` contributes `2·J_ij·x_i·x_j` to the energy; norms
//! ([`ModelNorms`]) follow the same ordered-pair convention.
//!
//! An [`Mrf`] of order `r` is the sparse polynomial
//! `J(x) = Σ_α J_α Π_{i∈α} x_i` over subsets `α` with `1 ≤ |α| ≤ r`.
//!
//! The exact free energy `F = log Σ_x exp(energy(x))` is computed by
//! Gray-code enumeration with a streaming log-sum-exp (never materializing
//! `2^n` terms), guarded by a configurable cap on `n`; for models that are
//! uniform complete graphs (optionally with a uniform external field) the
//! `O(n)` binomial closed form is available and exact at any size.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield;

/// Default enumeration guard: exact oracles refuse `n` above this.
pub const DEFAULT_ENUM_GUARD: usize = 25;

/// Largest number of low bits enumerated per Gray-code chunk. Chunks are
/// re-initialized from scratch, which keeps incremental floating-point drift
/// bounded regardless of `n`, and gives `rayon` independent units of work
/// whose partial sums are merged in a fixed order (results are independent of
/// thread count).
const CHUNK_BITS: usize = 12;

/// How the external field transforms under [`IsingModel::restrict_scaled`].
///
/// The degree-`k` rescaling rule multiplies coefficients by `(n/q)^{k-1}`,
/// which leaves degree-1 terms — the field — untouched; that is the default.
/// `Rescaled` multiplies the field by `n/q` as well, for experiments that
/// want every coefficient scaled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldScaling {
    #[default]
    Unscaled,
    Rescaled,
}

/// Norms of the interaction part of a model (the field is excluded).
///
/// For an Ising model the entries run over ordered pairs: `frobenius² =
/// Σ_{i,j} J_ij²`, `l1 = Σ_{i,j} |J_ij|`, `max_entry = max |J_ij|`. For an
/// MRF they run over stored subset coefficients, and `per_degree[d-1]` holds
/// the Frobenius norm of the degree-`d` homogeneous part (empty for Ising).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelNorms {
    pub frobenius: f64,
    pub max_entry: f64,
    pub l1: f64,
    pub per_degree: Vec<f64>,
}

/// Dense Ising model `P(x) ∝ exp(xᵀJx + h·x)` on `{±1}^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingModel {
    n: usize,
    j: Array2<f64>,
    h: Array1<f64>,
}

impl IsingModel {
    /// Validate and build a model from a coupling matrix and field.
    ///
    /// `j` must be square with side `h.len() ≥ 1`, exactly zero on the
    /// diagonal, and symmetric to within `1e-12` relative to its largest
    /// entry (it is then symmetrized exactly so downstream arithmetic is
    /// deterministic). All entries must be finite.
    pub fn new(j: Array2<f64>, h: Array1<f64>) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::InvalidModel(
                "model must have at least one vertex".into(),
            ));
        }
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix is {}x{} but the field has length {n}",
                j.nrows(),
                j.ncols()
            )));
        }
        if j.iter().any(|v| !v.is_finite()) || h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel(
                "non-finite coupling or field entry".into(),
            ));
        }
        let scale = j.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut j = j;
        for i in 0..n {
            if j[(i, i)] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "diagonal entry J[{i}][{i}] = {} must be zero",
                    j[(i, i)]
                )));
            }
            for k in (i + 1)..n {
                let (a, b) = (j[(i, k)], j[(k, i)]);
                if (a - b).abs() > 1e-12 * scale {
                    return Err(Error::InvalidModel(format!(
                        "asymmetric coupling: J[{i}][{k}] = {a} vs J[{k}][{i}] = {b}"
                    )));
                }
                let sym = 0.5 * (a + b);
                j[(i, k)] = sym;
                j[(k, i)] = sym;
            }
        }
        Ok(Self { n, j, h })
    }

    /// The zero model on `n` vertices (`F = n·log 2`).
    pub fn zero(n: usize) -> Result<Self> {
        Self::new(Array2::zeros((n, n)), Array1::zeros(n))
    }

    /// Complete graph with every off-diagonal entry equal to `w` and no field.
    pub fn complete(n: usize, w: f64) -> Result<Self> {
        let mut j = Array2::from_elem((n, n), w);
        for i in 0..n {
            j[(i, i)] = 0.0;
        }
        Self::new(j, Array1::zeros(n))
    }

    /// Build from an undirected edge list. Each edge `(i, j, w)` with `i ≠ j`
    /// sets both matrix entries to `w`; self-loops and repeated edges are
    /// rejected. `h` defaults to zero when `None`.
    pub fn from_edges(
        n: usize,
        edges: &[(usize, usize, f64)],
        h: Option<Vec<f64>>,
    ) -> Result<Self> {
        let mut j = Array2::zeros((n, n));
        let mut seen = std::collections::HashSet::new();
        for &(a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidModel(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!("self-loop at vertex {a}")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidModel(format!(
                    "duplicate edge ({}, {})",
                    key.0, key.1
                )));
            }
            j[(a, b)] = w;
            j[(b, a)] = w;
        }
        let h = match h {
            Some(v) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "field has length {} but n = {n}",
                        v.len()
                    )));
                }
                Array1::from_vec(v)
            }
            None => Array1::zeros(n),
        };
        Self::new(j, h)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.j
    }

    pub fn field(&self) -> &Array1<f64> {
        &self.h
    }

    /// Return a copy with the uniform shift `delta` added to every field entry.
    pub fn with_field_shift(&self, delta: f64) -> Self {
        Self {
            n: self.n,
            j: self.j.clone(),
            h: &self.h + delta,
        }
    }

    /// Energy `xᵀJx + h·x` of a spin configuration `x ∈ {±1}^n`.
    pub fn energy(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "configuration has length {} but n = {}",
                x.len(),
                self.n
            )));
        }
        if let Some(bad) = x.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidModel(format!(
                "spin x[{bad}] = {} is not ±1",
                x[bad]
            )));
        }
        let xf: Vec<f64> = x.iter().map(|&s| s as f64).collect();
        Ok(self.quadratic(&xf))
    }

    /// The relaxed energy `Σ_{i,j} J_ij x_i x_j + Σ_i h_i x_i` for real `x`.
    /// (For a product measure with means `x` this is the expected energy.)
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let n = self.n;
        debug_assert_eq!(x.len(), n);
        let mut total = 0.0;
        for i in 0..n {
            let row = self.j.row(i);
            let mut s = 0.0;
            for k in 0..n {
                s += row[k] * x[k];
            }
            total += x[i] * (s + self.h[i]);
        }
        total
    }

    /// Interaction norms (ordered-pair convention; field excluded).
    pub fn norms(&self) -> ModelNorms {
        let mut sq = 0.0;
        let mut l1 = 0.0;
        let mut max = 0.0f64;
        for v in self.j.iter() {
            sq += v * v;
            l1 += v.abs();
            max = max.max(v.abs());
        }
        ModelNorms {
            frobenius: sq.sqrt(),
            max_entry: max,
            l1,
            per_degree: Vec::new(),
        }
    }

    /// Restrict to the ordered vertex subset `subset` and rescale couplings by
    /// `n/q` (the degree-2 rule; the field follows `scaling`).
    ///
    /// With `subset = 0..n` and [`FieldScaling::Unscaled`] this is the
    /// identity, bit for bit.
    pub fn restrict_scaled(&self, subset: &[usize], scaling: FieldScaling) -> Result<IsingModel> {
        validate_subset(subset, self.n)?;
        let q = subset.len();
        let scale = self.n as f64 / q as f64;
        let mut j = Array2::zeros((q, q));
        for (a, &i) in subset.iter().enumerate() {
            for (b, &k) in subset.iter().enumerate() {
                if a != b {
                    j[(a, b)] = scale * self.j[(i, k)];
                }
            }
        }
        let h = Array1::from_iter(subset.iter().map(|&i| match scaling {
            FieldScaling::Unscaled => self.h[i],
            FieldScaling::Rescaled => scale * self.h[i],
        }));
        IsingModel::new(j, h)
    }

    /// View this model as an order-2 MRF: each edge `{i, j}` becomes the
    /// subset coefficient `2·J_ij` (ordered-pair convention folded in), each
    /// nonzero field entry a degree-1 coefficient.
    pub fn to_mrf(&self) -> Mrf {
        let mut terms = Vec::new();
        for i in 0..self.n {
            if self.h[i] != 0.0 {
                terms.push((vec![i], self.h[i]));
            }
            for k in (i + 1)..self.n {
                if self.j[(i, k)] != 0.0 {
                    terms.push((vec![i, k], 2.0 * self.j[(i, k)]));
                }
            }
        }
        Mrf::new(self.n, 2, terms).expect("a valid Ising model converts to a valid MRF")
    }
}

/// Sparse binary Markov random field of order `r`:
/// `J(x) = Σ_α J_α Π_{i∈α} x_i`, `1 ≤ |α| ≤ r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mrf {
    n: usize,
    r: usize,
    /// Canonically sorted: strictly increasing vars within a term, terms in
    /// lexicographic order, no duplicate subsets.
    terms: Vec<(Vec<usize>, f64)>,
}

impl Mrf {
    /// Validate and canonicalize a term list. Each term is a subset of
    /// distinct vertices (any order) with a finite weight; duplicates of the
    /// same subset are rejected. Requires `1 ≤ |α| ≤ r` and `r ≥ 1`.
    pub fn new(n: usize, r: usize, terms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel(
                "MRF must have at least one vertex".into(),
            ));
        }
        if r == 0 {
            return Err(Error::InvalidModel("MRF order r must be at least 1".into()));
        }
        let mut canon: Vec<(Vec<usize>, f64)> = Vec::with_capacity(terms.len());
        for (mut vars, w) in terms {
            if !w.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "non-finite weight on term {vars:?}"
                )));
            }
            if vars.is_empty() {
                return Err(Error::InvalidModel("empty interaction term".into()));
            }
            vars.sort_unstable();
            if vars.windows(2).any(|p| p[0] == p[1]) {
                return Err(Error::InvalidModel(format!(
                    "repeated vertex in term {vars:?}"
                )));
            }
            if *vars.last().unwrap() >= n {
                return Err(Error::InvalidModel(format!(
                    "term {vars:?} out of range for n = {n}"
                )));
            }
            if vars.len() > r {
                return Err(Error::InvalidModel(format!(
                    "term {vars:?} has degree {} > r = {r}",
                    vars.len()
                )));
            }
            canon.push((vars, w));
        }
        canon.sort_by(|a, b| a.0.cmp(&b.0));
        if canon.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidModel("duplicate interaction subset".into()));
        }
        Ok(Self { n, r, terms: canon })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn terms(&self) -> &[(Vec<usize>, f64)] {
        &self.terms
    }

    /// Energy `J(x)` of a spin configuration `x ∈ {±1}^n`.
    pub fn energy(&self, x: &[i8]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "configuration has length {} but n = {}",
                x.len(),
                self.n
            )));
        }
        if let Some(bad) = x.iter().position(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidModel(format!(
                "spin x[{bad}] = {} is not ±1",
                x[bad]
            )));
        }
        let mut e = 0.0;
        for (vars, w) in &self.terms {
            let sign: i32 = vars.iter().map(|&i| x[i] as i32).product();
            e += w * sign as f64;
        }
        Ok(e)
    }

    /// Per-degree and total norms over stored subset coefficients.
    pub fn norms(&self) -> ModelNorms {
        let mut per_sq = vec![0.0f64; self.r];
        let mut l1 = 0.0;
        let mut max = 0.0f64;
        for (vars, w) in &self.terms {
            per_sq[vars.len() - 1] += w * w;
            l1 += w.abs();
            max = max.max(w.abs());
        }
        let frobenius = per_sq.iter().sum::<f64>().sqrt();
        ModelNorms {
            frobenius,
            max_entry: max,
            l1,
            per_degree: per_sq.into_iter().map(f64::sqrt).collect(),
        }
    }

    /// Restrict to `subset` keeping only terms fully inside it, rescaling a
    /// degree-`k` coefficient by `(n/q)^{k-1}`.
    pub fn restrict_scaled(&self, subset: &[usize]) -> Result<Mrf> {
        validate_subset(subset, self.n)?;
        let q = subset.len();
        let scale = self.n as f64 / q as f64;
        let mut pos = vec![usize::MAX; self.n];
        for (a, &i) in subset.iter().enumerate() {
            pos[i] = a;
        }
        let mut terms = Vec::new();
        for (vars, w) in &self.terms {
            if vars.iter().all(|&i| pos[i] != usize::MAX) {
                let new_vars: Vec<usize> = vars.iter().map(|&i| pos[i]).collect();
                terms.push((new_vars, w * scale.powi(vars.len() as i32 - 1)));
            }
        }
        Mrf::new(q, self.r, terms)
    }
}

/// Either kind of model, as read from input files.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ising(IsingModel),
    Mrf(Mrf),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Ising(m) => m.n(),
            Model::Mrf(m) => m.n(),
        }
    }

    pub fn norms(&self) -> ModelNorms {
        match self {
            Model::Ising(m) => m.norms(),
            Model::Mrf(m) => m.norms(),
        }
    }
}

pub(crate) fn validate_subset(subset: &[usize], n: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset is empty".into()));
    }
    if subset.len() > n {
        return Err(Error::InvalidSubset(format!(
            "subset of size {} exceeds n = {n}",
            subset.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::InvalidSubset(format!(
                "vertex {i} out of range for n = {n}"
            )));
        }
        if seen[i] {
            return Err(Error::InvalidSubset(format!("vertex {i} repeated")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Streaming log-sum-exp: represents `Σᵢ exp(eᵢ)` as `sum·exp(max)` with the
/// running maximum as the shift, so arbitrarily large energies never overflow.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn push(&mut self, e: f64) {
        if e <= self.max {
            self.sum += (e - self.max).exp();
        } else {
            self.sum = if self.sum == 0.0 {
                1.0
            } else {
                self.sum * (self.max - e).exp() + 1.0
            };
            self.max = e;
        }
    }

    pub(crate) fn merge(&mut self, other: LogSumExp) {
        if other.sum == 0.0 {
            return;
        }
        if self.sum == 0.0 {
            *self = other;
        } else if other.max <= self.max {
            self.sum += other.sum * (other.max - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - other.max).exp() + other.sum;
            self.max = other.max;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// Like [`LogSumExp`] but also tracks `Σᵢ wᵢ·exp(eᵢ)` for a signed weight,
/// exposing the ratio `Σ wᵢ exp(eᵢ) / Σ exp(eᵢ)` (a Gibbs expectation).
#[derive(Debug, Clone, Copy)]
struct WeightedLse {
    max: f64,
    z: f64,
    w: f64,
}

impl WeightedLse {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            z: 0.0,
            w: 0.0,
        }
    }

    fn push(&mut self, e: f64, weight: f64) {
        if e <= self.max {
            let t = (e - self.max).exp();
            self.z += t;
            self.w += weight * t;
        } else {
            let t = if self.z == 0.0 {
                0.0
            } else {
                (self.max - e).exp()
            };
            self.z = self.z * t + 1.0;
            self.w = self.w * t + weight;
            self.max = e;
        }
    }

    fn merge(&mut self, other: WeightedLse) {
        if other.z == 0.0 {
            return;
        }
        if self.z == 0.0 {
            *self = other;
        } else if other.max <= self.max {
            let t = (other.max - self.max).exp();
            self.z += other.z * t;
            self.w += other.w * t;
        } else {
            let t = (self.max - other.max).exp();
            self.z = self.z * t + other.z;
            self.w = self.w * t + other.w;
            self.max = other.max;
        }
    }

    fn log_z(&self) -> f64 {
        self.max + self.z.ln()
    }

    fn mean(&self) -> f64 {
        self.w / self.z
    }
}

fn check_guard(n: usize, guard: usize) -> Result<()> {
    if n > guard {
        return Err(Error::EnumerationTooLarge { n, guard });
    }
    Ok(())
}

/// Walk one Gray-code chunk of an Ising model's configuration space.
///
/// The chunk index fixes the spins of the high vertices; the low `low_bits`
/// vertices are enumerated in reflected Gray order, updating the energy and
/// the local fields `s_i = Σ_j J_ij x_j` incrementally (one spin flip per
/// step, `O(n)` work). `visit` receives `(energy, Σᵢ xᵢ)` for every
/// configuration in the chunk.
fn ising_chunk(model: &IsingModel, low_bits: usize, chunk: usize, mut visit: impl FnMut(f64, f64)) {
    let n = model.n;
    let j = &model.j;
    let h = &model.h;
    let mut x = vec![1.0f64; n];
    for b in 0..(n - low_bits) {
        if (chunk >> b) & 1 == 1 {
            x[low_bits + b] = -1.0;
        }
    }
    let mut s = vec![0.0f64; n];
    for (i, si) in s.iter_mut().enumerate() {
        let row = j.row(i);
        *si = (0..n).map(|k| row[k] * x[k]).sum();
    }
    let mut energy: f64 =
        (0..n).map(|i| x[i] * s[i]).sum::<f64>() + (0..n).map(|i| h[i] * x[i]).sum::<f64>();
    let mut sum_x: f64 = x.iter().sum();
    visit(energy, sum_x);
    for k in 1usize..(1usize << low_bits) {
        let v = k.trailing_zeros() as usize;
        let xv = -x[v];
        energy += 4.0 * xv * s[v] + 2.0 * h[v] * xv;
        x[v] = xv;
        sum_x += 2.0 * xv;
        let row = j.row(v); // row v equals column v by symmetry
        for i in 0..n {
            s[i] += 2.0 * xv * row[i];
        }
        visit(energy, sum_x);
    }
}

fn ising_enumerate<A: Send + Copy>(
    model: &IsingModel,
    init: impl Fn() -> A + Sync,
    push: impl Fn(&mut A, f64, f64) + Sync,
    merge: impl Fn(&mut A, A),
) -> A {
    let n = model.n;
    let low_bits = n.min(CHUNK_BITS);
    let chunks = 1usize << (n - low_bits);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            ising_chunk(model, low_bits, c, |e, sx| push(&mut acc, e, sx));
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Exact free energy `F = log Σ_{x∈{±1}^n} exp(xᵀJx + h·x)` by enumeration.
///
/// Refuses `n > enum_guard` (default [`DEFAULT_ENUM_GUARD`]). Cost is
/// `O(2^n · n)` via Gray-code updates, parallelized over chunks whose partial
/// log-sum-exps are merged in fixed order.
pub fn free_energy_exact(model: &IsingModel, enum_guard: usize) -> Result<f64> {
    check_guard(model.n, enum_guard)?;
    let acc = ising_enumerate(
        model,
        LogSumExp::new,
        |a, e, _| a.push(e),
        |a, b| a.merge(b),
    );
    Ok(acc.value())
}

/// Exact free energy and mean total magnetization
/// `(F, E[Σᵢ Xᵢ])` by enumeration, under the same guard as
/// [`free_energy_exact`].
pub fn free_energy_and_magnetization(model: &IsingModel, enum_guard: usize) -> Result<(f64, f64)> {
    check_guard(model.n, enum_guard)?;
    let acc = ising_enumerate(
        model,
        WeightedLse::new,
        |a, e, sx| a.push(e, sx),
        |a, b| a.merge(b),
    );
    Ok((acc.log_z(), acc.mean()))
}

/// Exact free energy of an MRF by enumeration (Gray-code incremental over
/// the terms touching the flipped vertex), guarded like [`free_energy_exact`].
pub fn free_energy_exact_mrf(mrf: &Mrf, enum_guard: usize) -> Result<f64> {
    let n = mrf.n;
    check_guard(n, enum_guard)?;
    let low_bits = n.min(CHUNK_BITS);
    let chunks = 1usize << (n - low_bits);
    // Terms indexed by the vertices they touch, for O(deg) flip updates.
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, (vars, _)) in mrf.terms.iter().enumerate() {
        for &v in vars {
            touching[v].push(t);
        }
    }
    let partials: Vec<LogSumExp> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut x = vec![1i8; n];
            for b in 0..(n - low_bits) {
                if (chunk >> b) & 1 == 1 {
                    x[low_bits + b] = -1;
                }
            }
            // Current value of each monomial, and the total energy.
            let mut prod: Vec<f64> = mrf
                .terms
                .iter()
                .map(|(vars, w)| w * vars.iter().map(|&i| x[i] as f64).product::<f64>())
                .collect();
            let mut energy: f64 = prod.iter().sum();
            let mut acc = LogSumExp::new();
            acc.push(energy);
            for k in 1usize..(1usize << low_bits) {
                let v = k.trailing_zeros() as usize;
                x[v] = -x[v];
                for &t in &touching[v] {
                    energy -= 2.0 * prod[t];
                    prod[t] = -prod[t];
                }
                acc.push(energy);
            }
            acc
        })
        .collect();
    let mut total = LogSumExp::new();
    for p in partials {
        total.merge(p);
    }
    Ok(total.value())
}

/// `O(n)` closed-form free energy of the complete graph with uniform
/// off-diagonal coupling `w` and no field:
/// `F = log Σ_{k=0}^n C(n,k) · exp(w·((n-2k)² - n))`
/// where `k` counts down spins. Exact at any `n` (log-space binomials).
pub fn free_energy_complete_graph(n: usize, w: f64) -> f64 {
    free_energy_complete_graph_with_field(n, w, 0.0)
}

/// Closed form extended with a uniform external field `h`:
/// the energy of a configuration with `k` down spins is
/// `w·((n-2k)² - n) + h·(n-2k)`.
pub fn free_energy_complete_graph_with_field(n: usize, w: f64, h: f64) -> f64 {
    let nf = n as f64;
    let mut lse = LogSumExp::new();
    let mut ln_binom = 0.0f64; // log C(n, k), updated incrementally
    for k in 0..=n {
        if k > 0 {
            ln_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        let m = nf - 2.0 * k as f64;
        lse.push(ln_binom + w * (m * m - nf) + h * m);
    }
    lse.value()
}

/// Exact free energy with structure dispatch: a uniform complete graph with a
/// uniform field uses the `O(n)` closed form (valid at any `n`); anything
/// else falls back to guarded enumeration. Both paths are exact.
pub fn exact_free_energy_auto(model: &IsingModel, enum_guard: usize) -> Result<f64> {
    if let Some((w, h)) = uniform_complete_structure(model) {
        return Ok(free_energy_complete_graph_with_field(model.n, w, h));
    }
    free_energy_exact(model, enum_guard)
}

/// Detect `J_ij = w` for all `i ≠ j` and `h_i = h` (bit-exact), the structure
/// preserved by restriction of uniform complete graphs.
fn uniform_complete_structure(model: &IsingModel) -> Option<(f64, f64)> {
    let n = model.n;
    let h = model.h[0];
    if model.h.iter().any(|&v| v != h) {
        return None;
    }
    if n == 1 {
        return Some((0.0, h));
    }
    let w = model.j[(0, 1)];
    for i in 0..n {
        for k in 0..n {
            if i != k && model.j[(i, k)] != w {
                return None;
            }
        }
    }
    Some((w, h))
}

/// The (nonnegative) gap `F − (Σ_{i,j} J_ij x̄_i x̄_j + h·x̄ + Σᵢ H((1+x̄ᵢ)/2))`
/// between the free energy and the Gibbs variational value of the product
/// measure with means `x̄`; equals `KL(μ_x̄ ‖ P)`.
///
/// Errors with [`Error::MarginalOutOfRange`] if any `|x̄ᵢ| > 1`, and respects
/// the enumeration guard for the exact `F`.
pub fn kl_free_energy_gap(model: &IsingModel, xbar: &[f64], enum_guard: usize) -> Result<f64> {
    if xbar.len() != model.n {
        return Err(Error::DimensionMismatch(format!(
            "marginal vector has length {} but n = {}",
            xbar.len(),
            model.n
        )));
    }
    for (i, &v) in xbar.iter().enumerate() {
        if !(v.abs() <= 1.0) {
            return Err(Error::MarginalOutOfRange { index: i, value: v });
        }
    }
    let f = exact_free_energy_auto(model, enum_guard)?;
    let value = model.quadratic(xbar) + meanfield::entropy_term(xbar)?;
    Ok(f - value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent oracle: direct sum over all `2^n` configurations, no
    /// Gray-code increments, no log-sum-exp.
    fn brute_force_f(model: &IsingModel) -> f64 {
        let n = model.n();
        let mut z = 0.0f64;
        for mask in 0u64..(1u64 << n) {
            let x: Vec<i8> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                .collect();
            z += model.energy(&x).unwrap().exp();
        }
        z.ln()
    }

    fn brute_force_f_mrf(mrf: &Mrf) -> f64 {
        let n = mrf.n();
        let mut z = 0.0f64;
        for mask in 0u64..(1u64 << n) {
            let x: Vec<i8> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                .collect();
            z += mrf.energy(&x).unwrap().exp();
        }
        z.ln()
    }

    fn random_model(n: usize, scale: f64, seed: u64) -> IsingModel {
        use rand::Rng;
        let mut rng = crate::rng::substream(seed, "test-model", 0);
        let mut j = Array2::zeros((n, n));
        for i in 0..n {
            for k in (i + 1)..n {
                let w = rng.gen_range(-scale..scale);
                j[(i, k)] = w;
                j[(k, i)] = w;
            }
        }
        let h = Array1::from_iter((0..n).map(|_| rng.gen_range(-scale..scale)));
        IsingModel::new(j, h).unwrap()
    }

    #[test]
    fn two_spin_ferromagnet_matches_closed_form() {
        // Z = 2e + 2e^{-1}: aligned pairs have energy J12 + J21 = 1.
        let m = IsingModel::from_edges(2, &[(0, 1, 0.5)], None).unwrap();
        let f = free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap();
        assert_relative_eq!(f, brute_force_f(&m), max_relative = 1e-14);
        assert_relative_eq!(f, 1.8200751916029179, max_relative = 1e-14);
    }

    #[test]
    fn single_spin_field_matches_closed_form() {
        let m = IsingModel::new(Array2::zeros((1, 1)), ndarray::arr1(&[0.7])).unwrap();
        let f = free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap();
        assert_relative_eq!(f, 0.9204174099184509, max_relative = 1e-14); // log(2 cosh 0.7)
    }

    #[test]
    fn zero_model_free_energy_is_n_log2() {
        for n in [1, 3, 13] {
            let f = free_energy_exact(&IsingModel::zero(n).unwrap(), DEFAULT_ENUM_GUARD).unwrap();
            assert_relative_eq!(f, n as f64 * std::f64::consts::LN_2, max_relative = 1e-13);
        }
    }

    #[test]
    fn enumeration_matches_brute_force_on_random_models() {
        for (i, n) in [1usize, 2, 3, 5, 8, 13].iter().enumerate() {
            let m = random_model(*n, 1.0, i as u64);
            let f = free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap();
            assert_relative_eq!(f, brute_force_f(&m), max_relative = 1e-11);
        }
    }

    #[test]
    fn enumeration_guard_is_enforced() {
        let m = IsingModel::zero(6).unwrap();
        match free_energy_exact(&m, 5) {
            Err(Error::EnumerationTooLarge { n: 6, guard: 5 }) => {}
            other => panic!("expected EnumerationTooLarge, got {other:?}"),
        }
    }

    #[test]
    fn complete_graph_closed_form_matches_enumeration() {
        // Cross-validation of the O(n) oracle at small n, plus the frozen
        // value for n = 5, w = 0.2.
        assert_relative_eq!(
            free_energy_complete_graph(5, 0.2),
            4.944768165478033,
            max_relative = 1e-14
        );
        for n in [1usize, 2, 5, 9, 14, 16] {
            for w in [-1.0, -0.3, 0.0, 0.25, 1.0] {
                let m = IsingModel::complete(n, w).unwrap();
                assert_relative_eq!(
                    free_energy_complete_graph(n, w),
                    free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap(),
                    max_relative = 1e-9
                );
            }
        }
        // With a uniform field.
        for h in [-0.8, 0.4] {
            let m = IsingModel::complete(7, 0.3).unwrap().with_field_shift(h);
            assert_relative_eq!(
                free_energy_complete_graph_with_field(7, 0.3, h),
                free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn complete_graph_closed_form_is_finite_at_large_scale() {
        // Energies reach ~n²·w ≈ 160 000·1; naive exponentials would overflow.
        let f = free_energy_complete_graph(400, 1.0);
        assert!(f.is_finite());
        assert!(f > 400.0 * 399.0); // dominated by the aligned configurations
    }

    #[test]
    fn auto_oracle_dispatches_to_closed_form_above_the_guard() {
        let m = IsingModel::complete(60, 0.01).unwrap();
        let f = exact_free_energy_auto(&m, DEFAULT_ENUM_GUARD).unwrap();
        assert_relative_eq!(
            f,
            free_energy_complete_graph(60, 0.01),
            max_relative = 1e-14
        );
        // Non-uniform models above the guard still refuse.
        let mut j = Array2::zeros((30, 30));
        j[(0, 1)] = 1.0;
        j[(1, 0)] = 1.0;
        let m = IsingModel::new(j, Array1::zeros(30)).unwrap();
        assert!(matches!(
            exact_free_energy_auto(&m, DEFAULT_ENUM_GUARD),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn magnetization_enumeration_agrees_with_direct_sums() {
        let m = random_model(7, 0.6, 42);
        let (f, mag) = free_energy_and_magnetization(&m, DEFAULT_ENUM_GUARD).unwrap();
        // Independent oracle.
        let n = m.n();
        let (mut z, mut num) = (0.0f64, 0.0f64);
        for mask in 0u64..(1u64 << n) {
            let x: Vec<i8> = (0..n)
                .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                .collect();
            let w = m.energy(&x).unwrap().exp();
            z += w;
            num += w * x.iter().map(|&s| s as f64).sum::<f64>();
        }
        assert_relative_eq!(f, z.ln(), max_relative = 1e-12);
        assert_relative_eq!(mag, num / z, max_relative = 1e-10);
    }

    #[test]
    fn spin_flip_symmetry_without_field() {
        let mut m = random_model(6, 0.8, 7);
        m.h = Array1::zeros(6);
        let (_, mag) = free_energy_and_magnetization(&m, DEFAULT_ENUM_GUARD).unwrap();
        assert!(mag.abs() < 1e-10, "h = 0 forces E[Σx] = 0, got {mag}");
    }

    #[test]
    fn restriction_identity_and_scaling() {
        let m = random_model(6, 1.0, 3);
        let full: Vec<usize> = (0..6).collect();
        let r = m.restrict_scaled(&full, FieldScaling::Unscaled).unwrap();
        assert_eq!(r, m, "restricting to all vertices must be the identity");

        // n = 4 uniform w, Q = {1, 2}: J' = 2w off-diagonal.
        let m = IsingModel::complete(4, 0.3).unwrap();
        let r = m.restrict_scaled(&[1, 2], FieldScaling::Unscaled).unwrap();
        assert_eq!(r.coupling()[(0, 1)], 0.6);
        assert_eq!(r.coupling()[(1, 0)], 0.6);

        // Field scaling switch.
        let m = m.with_field_shift(0.5);
        let unscaled = m.restrict_scaled(&[0, 3], FieldScaling::Unscaled).unwrap();
        let rescaled = m.restrict_scaled(&[0, 3], FieldScaling::Rescaled).unwrap();
        assert_eq!(unscaled.field()[0], 0.5);
        assert_eq!(rescaled.field()[0], 1.0);
    }

    #[test]
    fn restriction_rejects_bad_subsets() {
        let m = IsingModel::zero(4).unwrap();
        assert!(matches!(
            m.restrict_scaled(&[], FieldScaling::Unscaled),
            Err(Error::InvalidSubset(_))
        ));
        assert!(matches!(
            m.restrict_scaled(&[0, 0], FieldScaling::Unscaled),
            Err(Error::InvalidSubset(_))
        ));
        assert!(matches!(
            m.restrict_scaled(&[0, 4], FieldScaling::Unscaled),
            Err(Error::InvalidSubset(_))
        ));
    }

    #[test]
    fn model_validation_rejects_malformed_input() {
        // Nonzero diagonal.
        let mut j = Array2::zeros((2, 2));
        j[(0, 0)] = 0.1;
        assert!(matches!(
            IsingModel::new(j, Array1::zeros(2)),
            Err(Error::InvalidModel(_))
        ));
        // Asymmetry beyond tolerance.
        let mut j = Array2::zeros((2, 2));
        j[(0, 1)] = 0.5;
        j[(1, 0)] = 0.5001;
        assert!(matches!(
            IsingModel::new(j, Array1::zeros(2)),
            Err(Error::InvalidModel(_))
        ));
        // Dimension mismatch.
        assert!(matches!(
            IsingModel::new(Array2::zeros((3, 3)), Array1::zeros(2)),
            Err(Error::DimensionMismatch(_))
        ));
        // Self-loops and duplicate edges.
        assert!(IsingModel::from_edges(3, &[(1, 1, 0.2)], None).is_err());
        assert!(IsingModel::from_edges(3, &[(0, 1, 0.2), (1, 0, 0.3)], None).is_err());
    }

    #[test]
    fn norms_match_hand_computation() {
        let m = IsingModel::from_edges(3, &[(0, 1, 0.3), (1, 2, -0.4)], None).unwrap();
        let norms = m.norms();
        assert_relative_eq!(
            norms.frobenius,
            (2.0f64 * (0.09 + 0.16)).sqrt(),
            max_relative = 1e-15
        );
        assert_eq!(norms.max_entry, 0.4);
        assert_relative_eq!(norms.l1, 2.0 * 0.7, max_relative = 1e-15);
        assert!(norms.frobenius <= (norms.l1 * norms.max_entry).sqrt() + 1e-15);
    }

    #[test]
    fn mrf_energy_and_ising_equivalence() {
        // x1x2x3 term: energy is ±w depending on the sign product.
        let mrf = Mrf::new(3, 3, vec![(vec![0, 1, 2], 0.7)]).unwrap();
        assert_eq!(mrf.energy(&[1, 1, 1]).unwrap(), 0.7);
        assert_eq!(mrf.energy(&[1, -1, 1]).unwrap(), -0.7);

        // An Ising model and its MRF view have identical energies and F.
        let m = random_model(6, 0.9, 11);
        let mrf = m.to_mrf();
        for mask in 0u64..64 {
            let x: Vec<i8> = (0..6)
                .map(|i| if (mask >> i) & 1 == 1 { -1 } else { 1 })
                .collect();
            assert_relative_eq!(
                m.energy(&x).unwrap(),
                mrf.energy(&x).unwrap(),
                max_relative = 1e-12,
                epsilon = 1e-12
            );
        }
        assert_relative_eq!(
            free_energy_exact(&m, DEFAULT_ENUM_GUARD).unwrap(),
            free_energy_exact_mrf(&mrf, DEFAULT_ENUM_GUARD).unwrap(),
            max_relative = 1e-11
        );
    }

    #[test]
    fn mrf_enumeration_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::substream(5, "test-mrf", 0);
        let n = 9;
        let mut terms = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    terms.push((vec![a, b, c], rng.gen_range(-0.05..0.05)));
                }
            }
        }
        let mrf = Mrf::new(n, 3, terms).unwrap();
        let f = free_energy_exact_mrf(&mrf, DEFAULT_ENUM_GUARD).unwrap();
        assert_relative_eq!(f, brute_force_f_mrf(&mrf), max_relative = 1e-12);
    }

    #[test]
    fn mrf_restriction_scales_by_degree() {
        let mrf = Mrf::new(
            4,
            3,
            vec![
                (vec![0], 1.0),
                (vec![0, 1], 1.0),
                (vec![0, 1, 2], 1.0),
                (vec![0, 3], 1.0),
            ],
        )
        .unwrap();
        let r = mrf.restrict_scaled(&[0, 1, 2]).unwrap();
        // n/q = 4/3; degree-1 unscaled, degree-2 ×(4/3), degree-3 ×(16/9);
        // the term touching vertex 3 is dropped.
        let want = [
            (vec![0], 1.0),
            (vec![0, 1], 4.0 / 3.0),
            (vec![0, 1, 2], 16.0 / 9.0),
        ];
        assert_eq!(r.terms(), &want[..]);
    }

    #[test]
    fn mrf_validation_rejects_malformed_terms() {
        assert!(Mrf::new(3, 2, vec![(vec![0, 1, 2], 0.1)]).is_err()); // degree > r
        assert!(Mrf::new(3, 2, vec![(vec![1, 1], 0.1)]).is_err()); // repeated vertex
        assert!(Mrf::new(3, 2, vec![(vec![3], 0.1)]).is_err()); // out of range
        assert!(Mrf::new(3, 2, vec![(vec![], 0.1)]).is_err()); // empty subset
        assert!(Mrf::new(3, 2, vec![(vec![0, 1], 0.1), (vec![1, 0], 0.2)]).is_err()); // dup
        assert!(Mrf::new(3, 0, vec![]).is_err()); // r = 0
    }

    #[test]
    fn mrf_norms_are_per_degree() {
        let mrf = Mrf::new(3, 3, vec![(vec![0], 3.0), (vec![0, 1], 4.0)]).unwrap();
        let norms = mrf.norms();
        assert_eq!(norms.per_degree, vec![3.0, 4.0, 0.0]);
        assert_relative_eq!(norms.frobenius, 5.0, max_relative = 1e-15);
        assert_eq!(norms.max_entry, 4.0);
        assert_eq!(norms.l1, 7.0);
    }

    #[test]
    fn kl_gap_is_nonnegative_and_matches_the_uniform_case() {
        // J = 0, x̄ = (1, 0, 0): the product measure pins one spin, losing
        // exactly log 2 of entropy.
        let m = IsingModel::zero(3).unwrap();
        let gap = kl_free_energy_gap(&m, &[1.0, 0.0, 0.0], DEFAULT_ENUM_GUARD).unwrap();
        assert_relative_eq!(gap, std::f64::consts::LN_2, max_relative = 1e-12);
        // x̄ = 0 is the exact optimizer for J = 0.
        let gap = kl_free_energy_gap(&m, &[0.0; 3], DEFAULT_ENUM_GUARD).unwrap();
        assert!(gap.abs() < 1e-12);
        // Random models: KL ≥ 0 for any feasible x̄.
        for seed in 0..5u64 {
            use rand::Rng;
            let m = random_model(5, 0.7, 100 + seed);
            let mut rng = crate::rng::substream(seed, "test-kl", 0);
            let xbar: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let gap = kl_free_energy_gap(&m, &xbar, DEFAULT_ENUM_GUARD).unwrap();
            assert!(gap >= -1e-10, "KL gap must be nonnegative, got {gap}");
        }
    }

    #[test]
    fn kl_gap_rejects_out_of_range_marginals() {
        let m = IsingModel::zero(2).unwrap();
        assert!(matches!(
            kl_free_energy_gap(&m, &[0.0, 1.5], DEFAULT_ENUM_GUARD),
            Err(Error::MarginalOutOfRange { index: 1, .. })
        ));
    }
}
