//! Maximum likelihood fitting by block coordinate ascent.
//!
//! The parameters whose heads contain a vertex `v` enter every cell
//! probability linearly, so with everything else held fixed the
//! log-likelihood is concave in that block and the feasible region is the
//! polyhedron `A θ ≥ b`. Each block is maximized with damped Newton steps,
//! backtracking until the step is both feasible and satisfies the Armijo
//! condition, and vertices are visited in turn until a full cycle no longer
//! improves the likelihood.
//!
//! Districts do not share parameters and the likelihood splits into one term
//! per district, computed from the counts marginalized to the district's
//! scope. Each district is therefore fitted on its own.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::moebius::{pack, Model};

/// Cell counts in canonical state order (bit `v` of the index is `X_v`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
}

impl CountVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if !counts.len().is_power_of_two() {
            return Err(Error::Data(format!(
                "count vector length {} is not a power of two",
                counts.len()
            )));
        }
        let total = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .ok_or_else(|| Error::Data("total count overflows".into()))?;
        if total == 0 {
            return Err(Error::NoObservations);
        }
        Ok(CountVector { counts, total })
    }

    /// Aggregates raw observations, each a packed joint state.
    pub fn from_states(n_vars: usize, states: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut counts = vec![0u64; 1 << n_vars];
        for s in states {
            let cell = counts
                .get_mut(s as usize)
                .ok_or_else(|| Error::Data(format!("state {s} out of range")))?;
            *cell += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n_vars(&self) -> usize {
        self.counts.len().trailing_zeros() as usize
    }

    pub fn first_zero(&self) -> Option<usize> {
        self.counts.iter().position(|&c| c == 0)
    }

    /// Counts of the margin over `scope`, indexed by packed scope state.
    pub fn marginal(&self, scope: crate::graph::VertexSet) -> Vec<f64> {
        let mut out = vec![0.0; 1 << scope.len()];
        for (i, &c) in self.counts.iter().enumerate() {
            out[pack(i as u64, scope) as usize] += c as f64;
        }
        out
    }

    /// Proportion of observations with `X_v = 0`.
    pub fn zero_proportion(&self, v: usize) -> f64 {
        let zeros: u64 = self
            .counts
            .iter()
            .enumerate()
            .filter(|(i, _)| i >> v & 1 == 0)
            .map(|(_, &c)| c)
            .sum();
        zeros as f64 / self.total as f64
    }

    fn check_len(&self, model: &Model) -> Result<()> {
        if self.counts.len() != model.n_states() {
            return Err(Error::CountLength {
                expected: model.n_states(),
                found: self.counts.len(),
            });
        }
        Ok(())
    }
}

/// Line search constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Armijo {
    pub initial_step: f64,
    /// Backtracking factor.
    pub beta: f64,
    /// Sufficient increase constant.
    pub sigma: f64,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo {
            initial_step: 1.0,
            beta: 0.5,
            sigma: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Stop once a full cycle raises the log-likelihood by less than this.
    pub tol: f64,
    pub max_cycles: usize,
    /// Newton iterations per vertex update.
    pub max_inner: usize,
    pub armijo: Armijo,
    /// Number of starting points; extra starts jitter the independence start.
    pub starts: usize,
    pub allow_zero_counts: bool,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_cycles: 1000,
            max_inner: 100,
            armijo: Armijo::default(),
            starts: 1,
            allow_zero_counts: false,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.tol > 0.0) {
            return Err(Error::InvalidOption(format!("tol must be positive, got {}", self.tol)));
        }
        if !(a.beta > 0.0 && a.beta < 1.0) {
            return Err(Error::InvalidOption(format!("beta must lie in (0,1), got {}", a.beta)));
        }
        if !(a.sigma > 0.0 && a.sigma < 1.0) {
            return Err(Error::InvalidOption(format!("sigma must lie in (0,1), got {}", a.sigma)));
        }
        if !(a.initial_step > 0.0) {
            return Err(Error::InvalidOption("initial step must be positive".into()));
        }
        if self.max_cycles == 0 || self.starts == 0 {
            return Err(Error::InvalidOption("max_cycles and starts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub q_hat: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub loglik: f64,
    /// Largest number of cycles used by any district.
    pub cycles: usize,
    pub converged: bool,
    /// Set when zero counts were allowed and present: the optimum may lie on
    /// the boundary and need not be unique.
    pub possibly_nonunique: bool,
}

/// Parameters with `vertex` in their head, and the affine map `p = A θ - b`
/// giving the joint distribution when every other parameter is held fixed.
#[derive(Debug, Clone)]
pub struct VertexBlock {
    pub vertex: usize,
    /// Global parameter indices, in canonical order.
    pub params: Vec<usize>,
    pub theta: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl VertexBlock {
    pub fn probabilities(&self, theta: &DVector<f64>) -> DVector<f64> {
        &self.a * theta - &self.b
    }
}

/// The independence starting point: `q_{H|T} = ∏_{v∈H} m_v` with `m_v` the
/// proportion of zeros at `v`. In relaxed mode the proportions are shrunk
/// slightly towards 1/2 so that every parameter stays interior.
pub fn initialize(model: &Model, counts: &CountVector, allow_zero_counts: bool) -> Result<Vec<f64>> {
    counts.check_len(model)?;
    if let Some(cell) = counts.first_zero() {
        if !allow_zero_counts {
            return Err(Error::ZeroCount { cell });
        }
    }
    let n = counts.total() as f64;
    let margins: Vec<f64> = (0..model.graph().n())
        .map(|v| {
            let m = counts.zero_proportion(v);
            if allow_zero_counts {
                (m * n + 0.5) / (n + 1.0)
            } else {
                m
            }
        })
        .collect();
    Ok(independence_params(model, &margins))
}

fn independence_params(model: &Model, margins: &[f64]) -> Vec<f64> {
    model
        .params
        .iter()
        .map(|pi| pi.head.iter().map(|v| margins[v]).product())
        .collect()
}

/// One vertex block in district-local form: rows are scope states of the
/// district and `A θ - b` is the district factor.
struct LocalBlock {
    params: Vec<usize>,
    theta: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
}

fn local_block(model: &Model, j: usize, q: &[f64], v: usize) -> LocalBlock {
    let d = &model.districts[j];
    let start = d.params.start;
    let ql = &q[d.params.clone()];
    let mut slot = vec![usize::MAX; d.p.n_cols];
    let mut params = Vec::new();
    for c in 0..d.p.n_cols {
        if model.params[start + c].head.contains(v) {
            slot[c] = params.len();
            params.push(start + c);
        }
    }
    // Each term has at most one factor whose head contains v.
    let mut which = vec![usize::MAX; d.terms.len()];
    let mut coef = vec![1.0; d.terms.len()];
    for k in 0..d.terms.len() {
        for (c, _) in d.p.row(k) {
            if slot[c] != usize::MAX {
                which[k] = slot[c];
            } else {
                coef[k] *= ql[c];
            }
        }
    }
    let rows = d.m.n_rows();
    let mut a = DMatrix::zeros(rows, params.len());
    let mut b = DVector::zeros(rows);
    for s in 0..rows {
        for (k, sign) in d.m.row(s) {
            let x = f64::from(sign) * coef[k];
            if which[k] == usize::MAX {
                b[s] -= x;
            } else {
                a[(s, which[k])] += x;
            }
        }
    }
    let theta = DVector::from_iterator(params.len(), params.iter().map(|&i| q[i]));
    LocalBlock { params, theta, a, b }
}

/// The block for `v` over all joint states: the district-local map scaled
/// by the product of the other district factors.
pub fn vertex_block(model: &Model, q: &[f64], v: usize) -> Result<VertexBlock> {
    model.check_params(q)?;
    if v >= model.graph().n() {
        return Err(Error::UnknownVertex(v.to_string()));
    }
    let j = model.district_of(v);
    let local = local_block(model, j, q, v);
    let factors = model.district_factors(q)?;
    let n = model.n_states();
    let scope = model.districts[j].scope;
    let mut a = DMatrix::zeros(n, local.params.len());
    let mut b = DVector::zeros(n);
    for i in 0..n {
        let mut r = 1.0;
        for (jj, d) in model.districts.iter().enumerate() {
            if jj != j {
                r *= factors[jj][pack(i as u64, d.scope) as usize];
            }
        }
        let s = pack(i as u64, scope) as usize;
        for c in 0..local.params.len() {
            a[(i, c)] = r * local.a[(s, c)];
        }
        b[i] = r * local.b[s];
    }
    Ok(VertexBlock {
        vertex: v,
        params: local.params,
        theta: local.theta,
        a,
        b,
    })
}

/// Outcome of maximizing one block.
#[derive(Debug, Clone)]
pub struct BlockUpdate {
    pub theta: DVector<f64>,
    pub loglik: f64,
    pub iterations: usize,
    /// The line search could not find an acceptable step before the
    /// iteration converged.
    pub stalled: bool,
    pub moved: bool,
}

const FEASIBILITY_SLACK: f64 = 1e-12;

fn block_loglik(f: &DVector<f64>, w: &[f64]) -> Option<f64> {
    let mut ll = 0.0;
    for (fi, &wi) in f.iter().zip(w) {
        if !(*fi > FEASIBILITY_SLACK) {
            return None;
        }
        if wi > 0.0 {
            ll += wi * fi.ln();
        }
    }
    Some(ll)
}

/// Maximizes `Σ w_s log (A θ - b)_s` over the strict interior of
/// `A θ ≥ b`, starting from the feasible `theta`.
fn maximize_block(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    theta: &DVector<f64>,
    w: &[f64],
    opts: &FitOptions,
) -> Result<BlockUpdate> {
    let mut theta = theta.clone();
    let mut f = a * &theta - b;
    let mut ll = block_loglik(&f, w).ok_or(Error::NonFiniteLikelihood)?;
    let m = theta.len();
    let mut moved = false;
    let mut stalled = false;
    let mut it = 0;
    while it < opts.max_inner {
        it += 1;
        let ratio = DVector::from_iterator(f.len(), f.iter().zip(w).map(|(fi, wi)| wi / fi));
        let grad = a.transpose() * &ratio;
        let mut weighted = a.clone();
        for (s, mut row) in weighted.row_iter_mut().enumerate() {
            row *= (w[s].sqrt()) / f[s];
        }
        let hess = weighted.transpose() * &weighted;
        let dir = newton_direction(hess, &grad).unwrap_or_else(|| grad.clone());
        let slope = grad.dot(&dir);
        if !(slope > 0.0) || slope < 1e-3 * opts.tol {
            break;
        }
        let mut t = opts.armijo.initial_step;
        let mut accepted = None;
        while t > 1e-20 {
            let cand = &theta + t * &dir;
            let fc = a * &cand - b;
            if let Some(lc) = block_loglik(&fc, w) {
                if lc >= ll + opts.armijo.sigma * t * slope {
                    accepted = Some((cand, fc, lc));
                    break;
                }
            }
            t *= opts.armijo.beta;
        }
        match accepted {
            Some((cand, fc, lc)) => {
                let gain = lc - ll;
                theta = cand;
                f = fc;
                ll = lc;
                moved = true;
                if gain < 1e-3 * opts.tol {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }
    debug_assert_eq!(theta.len(), m);
    Ok(BlockUpdate {
        theta,
        loglik: ll,
        iterations: it,
        stalled,
        moved,
    })
}

/// Solves `H d = g` for the Newton direction of the concave problem, where
/// `hess` is the (positive semidefinite) negated Hessian.
fn newton_direction(hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().max();
    if !(scale > 0.0) {
        return None;
    }
    if let Some(ch) = hess.clone().cholesky() {
        return Some(ch.solve(grad));
    }
    // Singular directions only occur when some cells have zero weight.
    let n = hess.nrows();
    let ridged = hess + DMatrix::identity(n, n) * (1e-10 * scale);
    ridged.cholesky().map(|ch| ch.solve(grad))
}

/// Maximizes the block's partial likelihood `Σ n_i log p_i(θ)` subject to
/// `A θ ≥ b`. `counts` are indexed like the rows of the block.
pub fn update_vertex(block: &VertexBlock, counts: &[u64], opts: &FitOptions) -> Result<BlockUpdate> {
    if counts.len() != block.a.nrows() {
        return Err(Error::CountLength {
            expected: block.a.nrows(),
            found: counts.len(),
        });
    }
    let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    maximize_block(&block.a, &block.b, &block.theta, &w, opts)
}

struct DistrictFit {
    q: Vec<f64>,
    loglik: f64,
    cycles: usize,
    converged: bool,
}

fn district_loglik(model: &Model, j: usize, q: &[f64], w: &[f64]) -> Option<f64> {
    let f = DVector::from_vec(model.districts[j].factor(q));
    block_loglik(&f, w)
}

/// Fits the parameters of district `j`. Other coordinates of `q` are left
/// untouched and serve as the reference for the projection check.
fn fit_district(
    model: &Model,
    j: usize,
    counts: &CountVector,
    q0: &[f64],
    opts: &FitOptions,
) -> Result<DistrictFit> {
    let d = &model.districts[j];
    let w = counts.marginal(d.scope);
    let mut q = q0.to_vec();
    let mut ll = district_loglik(model, j, &q, &w).ok_or(Error::NonFiniteLikelihood)?;
    let mut cycles = 0;
    let mut converged = false;
    while cycles < opts.max_cycles {
        cycles += 1;
        let before = ll;
        let mut moved = false;
        for v in d.district.iter() {
            let blk = local_block(model, j, &q, v);
            let up = maximize_block(&blk.a, &blk.b, &blk.theta, &w, opts)?;
            if !up.loglik.is_finite() {
                return Err(Error::NonFiniteLikelihood);
            }
            if up.loglik < ll - 1e-9 * ll.abs().max(1.0) {
                warn!("vertex {v}: log-likelihood decreased from {ll} to {}", up.loglik);
            }
            if up.stalled {
                debug!("vertex {v}: line search stalled after {} iterations", up.iterations);
            }
            if up.moved {
                moved = true;
                for (k, &i) in blk.params.iter().enumerate() {
                    q[i] = up.theta[k];
                }
                ll = up.loglik;
            }
        }
        if moved {
            if let Some(lp) = project(model, j, &mut q, q0, &w) {
                if lp < ll - 1e-9 * ll.abs().max(1.0) {
                    warn!("projection lowered the log-likelihood from {ll} to {lp}");
                }
                ll = lp;
            }
        }
        debug!("district {j} cycle {cycles}: loglik {ll}");
        if !moved || ll - before < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(DistrictFit {
        q,
        loglik: ll,
        cycles,
        converged,
    })
}

/// Replaces district `j`'s parameters by `q(p(q))` when they differ, with
/// the other districts at their reference values. Returns the new district
/// log-likelihood if a change was made.
fn project(model: &Model, j: usize, q: &mut [f64], reference: &[f64], w: &[f64]) -> Option<f64> {
    let range = model.districts[j].params.clone();
    let mut mixed = reference.to_vec();
    mixed[range.clone()].copy_from_slice(&q[range.clone()]);
    let p = model.prob_vector(&mixed).ok()?;
    if p.iter().any(|&x| !(x > 0.0)) {
        return None;
    }
    let back = model.q_from_p(&p).ok()?;
    let gap = range
        .clone()
        .map(|i| (back[i] - q[i]).abs())
        .fold(0.0, f64::max);
    if gap <= 1e-10 {
        return None;
    }
    debug!("district {j}: projecting back onto the model (gap {gap:e})");
    q[range.clone()].copy_from_slice(&back[range]);
    district_loglik(model, j, q, w)
}

fn prepare(model: &Model, counts: &CountVector, opts: &FitOptions) -> Result<Vec<Vec<f64>>> {
    opts.validate()?;
    let q0 = initialize(model, counts, opts.allow_zero_counts)?;
    let mut starts = vec![q0];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 1..opts.starts {
        let margins: Vec<f64> = (0..model.graph().n())
            .map(|v| {
                let m = counts.zero_proportion(v) + rng.gen_range(-0.2..0.2);
                m.clamp(0.05, 0.95)
            })
            .collect();
        starts.push(independence_params(model, &margins));
    }
    Ok(starts)
}

fn assemble(
    model: &Model,
    counts: &CountVector,
    parts: Vec<(usize, DistrictFit)>,
    start: &[f64],
) -> Result<FitResult> {
    let mut q = start.to_vec();
    let mut cycles = 0;
    let mut converged = true;
    let split: f64 = parts.iter().map(|(_, f)| f.loglik).sum();
    for (j, fit) in parts {
        let range = model.districts[j].params.clone();
        q[range.clone()].copy_from_slice(&fit.q[range]);
        cycles = cycles.max(fit.cycles);
        converged &= fit.converged;
    }
    let p = model.prob_vector(&q)?;
    let loglik = crate::moebius::loglik_of(&p, counts.counts());
    if !loglik.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    debug!("loglik {loglik} (sum over districts {split})");
    Ok(FitResult {
        q_hat: q,
        p_hat: p,
        loglik,
        cycles,
        converged,
        possibly_nonunique: counts.first_zero().is_some(),
    })
}

fn best_of(results: Vec<FitResult>) -> FitResult {
    results
        .into_iter()
        .reduce(|best, r| if r.loglik > best.loglik { r } else { best })
        .expect("at least one start")
}

/// Fits `model` to `counts`, one district after another.
pub fn fit(model: &Model, counts: &CountVector, opts: &FitOptions) -> Result<FitResult> {
    let starts = prepare(model, counts, opts)?;
    let mut results = Vec::with_capacity(starts.len());
    for q0 in &starts {
        let parts = (0..model.districts.len())
            .map(|j| fit_district(model, j, counts, q0, opts).map(|f| (j, f)))
            .collect::<Result<Vec<_>>>()?;
        results.push(assemble(model, counts, parts, q0)?);
    }
    Ok(best_of(results))
}

/// Fits from a caller-supplied feasible starting point (a warm start).
pub fn fit_from(model: &Model, counts: &CountVector, q0: &[f64], opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    counts.check_len(model)?;
    model.check_params(q0)?;
    if let Some(cell) = counts.first_zero() {
        if !opts.allow_zero_counts {
            return Err(Error::ZeroCount { cell });
        }
    }
    let parts = (0..model.districts.len())
        .map(|j| fit_district(model, j, counts, q0, opts).map(|f| (j, f)))
        .collect::<Result<Vec<_>>>()?;
    assemble(model, counts, parts, q0)
}

/// Same contract as [`fit`], with districts fitted concurrently on the
/// current rayon pool.
pub fn fit_districts_parallel(model: &Model, counts: &CountVector, opts: &FitOptions) -> Result<FitResult> {
    let starts = prepare(model, counts, opts)?;
    let mut results = Vec::with_capacity(starts.len());
    for q0 in &starts {
        let parts = (0..model.districts.len())
            .into_par_iter()
            .map(|j| fit_district(model, j, counts, q0, opts).map(|f| (j, f)))
            .collect::<Result<Vec<_>>>()?;
        results.push(assemble(model, counts, parts, q0)?);
    }
    Ok(best_of(results))
}
