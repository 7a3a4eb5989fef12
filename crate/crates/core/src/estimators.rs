//! Convex estimators for the metric.
//!
//! The PAQ estimators all minimize a weighted rank-one least-squares loss
//!
//! ```text
//! f(Σ) = (1/n) Σᵢ (tᵢ − wᵢ·aᵢᵀΣaᵢ)²  +  λ·tr(Σ),   Σ ⪰ 0
//! ```
//!
//! where the three sensing modes differ only in `(wᵢ, tᵢ)`. On the PSD cone
//! the nuclear norm is the trace, so the proximal step is an eigenvalue
//! shift-and-clip. The ordinal baselines minimize hinge losses with a
//! proximal subgradient method.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{prox_trace_psd, MetricMatrix, SymMatrix};
use crate::oracles::{decompose_ranking, Label, PaqResponse};
use crate::pipeline::PipelineOutput;

/// Consecutive small objective changes required before stopping.
const STALL_WINDOW: usize = 5;
/// Power-iteration steps used to seed the Lipschitz constant.
const POWER_STEPS: usize = 20;
/// Backtracking gives up once the step shrinks by this factor overall.
const MAX_LIPSCHITZ_GROWTH: f64 = 1e30;
/// Hinge solvers stop once the best objective moves less than `rel_tol`
/// over this many iterations.
const HINGE_WINDOW: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    Zero,
    /// `s·I` with `s` matched to the mean response level.
    ScaledIdentity,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub backtrack_shrink: f64,
    pub init: Init,
}

impl SolverConfig {
    /// Defaults for the smooth least-squares estimators.
    pub fn smooth(lambda: f64) -> Self {
        SolverConfig { lambda, max_iters: 5000, rel_tol: 1e-9, backtrack_shrink: 0.5, init: Init::Zero }
    }

    /// Defaults for the hinge-loss baselines.
    pub fn hinge(lambda: f64) -> Self {
        SolverConfig { lambda, max_iters: 3000, rel_tol: 1e-6, backtrack_shrink: 0.5, init: Init::Zero }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be positive".into()));
        }
        if !(self.backtrack_shrink > 0.0 && self.backtrack_shrink < 1.0) {
            return Err(Error::InvalidArgument("backtrack_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub estimate: MetricMatrix,
    /// Objective after each accepted iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }
}

/// Weighted rank-one least squares `(1/n) Σ (tᵢ − wᵢ aᵢᵀΣaᵢ)²`.
///
/// Sensing vectors are kept both as rows and as columns so that the two
/// products per iteration (`Σ·Aᵀ` and `Aᵀ·diag(c)·A`) run as plain gemms.
#[derive(Debug, Clone)]
pub struct TraceRegression {
    rows: DMatrix<f64>,
    cols: DMatrix<f64>,
    weights: Vec<f64>,
    targets: Vec<f64>,
}

impl TraceRegression {
    /// `vectors` holds one sensing vector per row.
    pub fn new(vectors: DMatrix<f64>, weights: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        let n = vectors.nrows();
        if n == 0 || vectors.ncols() == 0 {
            return Err(Error::InvalidArgument("trace regression needs at least one sample".into()));
        }
        if weights.len() != n || targets.len() != n {
            return Err(Error::DimMismatch { expected: n, got: weights.len().min(targets.len()) });
        }
        if vectors.iter().chain(&weights).chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let cols = vectors.transpose();
        Ok(TraceRegression { rows: vectors, cols, weights, targets })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    /// `aᵢᵀ Σ aᵢ` for every sample.
    fn quadratics(&self, sigma: &DMatrix<f64>) -> Vec<f64> {
        let projected = sigma * &self.cols;
        projected
            .column_iter()
            .zip(self.cols.column_iter())
            .map(|(p, a)| p.dot(&a))
            .collect()
    }

    fn loss_from(&self, q: &[f64]) -> f64 {
        let n = self.len() as f64;
        q.iter()
            .zip(&self.weights)
            .zip(&self.targets)
            .map(|((q, w), t)| {
                let r = t - w * q;
                r * r
            })
            .sum::<f64>()
            / n
    }

    /// `Σᵢ cᵢ aᵢaᵢᵀ`
    fn weighted_outer_sum(&self, coef: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.cols.clone();
        for (mut col, c) in scaled.column_iter_mut().zip(coef) {
            col.scale_mut(*c);
        }
        &scaled * &self.rows
    }

    fn gradient_from(&self, q: &[f64]) -> SymMatrix {
        let n = self.len() as f64;
        let coef: Vec<f64> = q
            .iter()
            .zip(&self.weights)
            .zip(&self.targets)
            .map(|((q, w), t)| -2.0 / n * w * (t - w * q))
            .collect();
        SymMatrix::symmetrized(self.weighted_outer_sum(&coef))
    }

    /// Smooth part of the objective.
    pub fn loss(&self, sigma: &SymMatrix) -> f64 {
        self.loss_from(&self.quadratics(sigma.as_matrix()))
    }

    pub fn gradient(&self, sigma: &SymMatrix) -> SymMatrix {
        self.gradient_from(&self.quadratics(sigma.as_matrix()))
    }

    pub fn objective(&self, sigma: &SymMatrix, lambda: f64) -> f64 {
        self.loss(sigma) + lambda * sigma.trace()
    }

    /// Power-iteration estimate of the largest eigenvalue of the loss Hessian
    /// `X ↦ (2/n) Σ wᵢ² ⟨aᵢaᵢᵀ, X⟩ aᵢaᵢᵀ`.
    pub fn lipschitz_estimate(&self) -> f64 {
        let d = self.dim();
        let n = self.len() as f64;
        let w2: Vec<f64> = self.weights.iter().map(|w| 2.0 / n * w * w).collect();
        let mut x = DMatrix::identity(d, d) / (d as f64).sqrt();
        let mut estimate = 0.0;
        for _ in 0..POWER_STEPS {
            let q = self.quadratics(&x);
            let coef: Vec<f64> = q.iter().zip(&w2).map(|(q, w)| q * w).collect();
            let hx = self.weighted_outer_sum(&coef);
            let norm = hx.norm();
            if !(norm > 0.0) {
                break;
            }
            estimate = norm;
            x = hx / norm;
        }
        estimate
    }

    /// Starting point for [`Init::ScaledIdentity`]: `s·I` with
    /// `s = mean(t) / mean(w‖a‖²)`, the level at which `wᵢ·aᵢᵀ(sI)aᵢ ≈ tᵢ` on average.
    pub fn scaled_identity_start(&self) -> SymMatrix {
        let n = self.len() as f64;
        let mean_t = self.targets.iter().sum::<f64>() / n;
        let mean_wa = self
            .rows
            .row_iter()
            .zip(&self.weights)
            .map(|(a, w)| w * a.norm_squared())
            .sum::<f64>()
            / n;
        let s = if mean_wa > 0.0 { (mean_t / mean_wa).max(0.0) } else { 0.0 };
        SymMatrix::identity(self.dim()).scale(s)
    }

    /// `‖Σ − prox_{tλ}(Σ − t∇f(Σ))‖_F`, zero exactly at a minimizer.
    pub fn fixed_point_residual(&self, sigma: &SymMatrix, lambda: f64, step: f64) -> Result<f64> {
        let grad = self.gradient(sigma);
        let moved = SymMatrix::symmetrized(sigma.as_matrix() - grad.as_matrix() * step);
        let next = prox_trace_psd(&moved, step * lambda)?;
        Ok((next.as_matrix() - sigma.as_matrix()).norm())
    }

    /// Accelerated proximal gradient with backtracking and objective-based
    /// momentum restart.
    ///
    /// Only iterates that do not increase the objective are accepted, so the
    /// recorded trace is monotone.
    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolveResult> {
        cfg.validate()?;
        let lambda = cfg.lambda;
        let d = self.dim();
        let start = match cfg.init {
            Init::Zero => SymMatrix::zeros(d),
            Init::ScaledIdentity => self.scaled_identity_start(),
        };
        let mut x = prox_trace_psd(&start, 0.0)?;
        let mut qx = self.quadratics(x.as_matrix());
        let mut fx = self.loss_from(&qx) + lambda * x.trace();

        let mut lip = self.lipschitz_estimate();
        if !(lip > 0.0) {
            // All weights vanish: the loss is constant and Σ = 0 is optimal.
            let zero = SymMatrix::zeros(d);
            let obj = self.objective(&zero, lambda);
            return Ok(SolveResult {
                estimate: MetricMatrix::new(zero)?,
                objective_trace: vec![obj],
                iterations: 0,
                converged: true,
            });
        }
        let lip_floor = lip;

        let mut y = x.clone();
        let mut qy = qx.clone();
        let mut theta = 1.0f64;
        let mut trace = vec![fx];
        let mut stalls = 0;
        let mut converged = false;
        let mut iterations = 0;

        while iterations < cfg.max_iters {
            iterations += 1;
            let grad = self.gradient_from(&qy);
            let fy = self.loss_from(&qy);
            let (z, qz, fz) = loop {
                let moved = SymMatrix::symmetrized(y.as_matrix() - grad.as_matrix() / lip);
                let z = prox_trace_psd(&moved, lambda / lip)?;
                let qz = self.quadratics(z.as_matrix());
                let fz = self.loss_from(&qz);
                let diff = z.as_matrix() - y.as_matrix();
                let model = fy + grad.as_matrix().dot(&diff) + 0.5 * lip * diff.norm_squared();
                if fz <= model + 1e-12 * fy.abs().max(f64::MIN_POSITIVE) {
                    break (z, qz, fz);
                }
                lip /= cfg.backtrack_shrink;
                if lip > lip_floor * MAX_LIPSCHITZ_GROWTH {
                    return Err(Error::NoProgress);
                }
            };
            let fz_total = fz + lambda * z.trace();

            if fz_total > fx {
                if theta > 1.0 {
                    // Momentum overshot: restart from the last accepted point.
                    theta = 1.0;
                    y = x.clone();
                    qy = qx.clone();
                    continue;
                }
                // A plain proximal step from x failed to descend: x is optimal
                // up to rounding.
                converged = true;
                break;
            }

            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            let momentum = z.as_matrix() - x.as_matrix();
            y = SymMatrix::symmetrized(z.as_matrix() + momentum * beta);
            qy = qz.iter().zip(&qx).map(|(a, b)| a + beta * (a - b)).collect();
            theta = theta_next;

            let change = (fx - fz_total).abs() / fz_total.abs().max(f64::MIN_POSITIVE);
            x = z;
            qx = qz;
            fx = fz_total;
            trace.push(fx);

            if change < cfg.rel_tol {
                stalls += 1;
                if stalls >= STALL_WINDOW {
                    converged = true;
                    break;
                }
            } else {
                stalls = 0;
            }
        }

        Ok(SolveResult { estimate: MetricMatrix::new(x)?, objective_trace: trace, iterations, converged })
    }
}

/// Estimator on the averaged and truncated pipeline output:
/// sensing matrices `Ãᵢ = γ̃²ᵢ aᵢaᵢᵀ`, target `y`.
pub fn fit_paq(data: &PipelineOutput, y: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("pipeline output is empty".into()));
    }
    let n = data.len();
    TraceRegression::new(data.sensing_vectors.clone(), data.truncated_responses.clone(), vec![y; n])?.solve(cfg)
}

fn response_rows(responses: &[PaqResponse]) -> Result<DMatrix<f64>> {
    let first = responses
        .first()
        .ok_or_else(|| Error::InvalidArgument("no responses".into()))?;
    let d = first.query.len();
    let mut rows = DMatrix::zeros(responses.len(), d);
    for (i, r) in responses.iter().enumerate() {
        if r.query.len() != d {
            return Err(Error::DimMismatch { expected: d, got: r.query.len() });
        }
        rows.row_mut(i).copy_from(&r.query.transpose());
    }
    Ok(rows)
}

/// Least squares on the raw inverted measurements `A_inv = γ²aaᵀ`, with no
/// averaging or truncation. Biased whenever the noise has positive variance.
pub fn fit_paq_naive(responses: &[PaqResponse], y: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    let rows = response_rows(responses)?;
    let weights = responses.iter().map(|r| r.gamma_sq).collect();
    TraceRegression::new(rows, weights, vec![y; responses.len()])?.solve(cfg)
}

/// Conventional trace regression with sensing `aaᵀ` and targets `y/γ²`.
/// Meant for noiseless responses.
pub fn fit_paq_direct(responses: &[PaqResponse], y: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    if let Some(index) = responses.iter().position(|r| r.gamma_sq == 0.0) {
        return Err(Error::ZeroResponse { index });
    }
    let rows = response_rows(responses)?;
    let targets = responses.iter().map(|r| y / r.gamma_sq).collect();
    TraceRegression::new(rows, vec![1.0; responses.len()], targets)?.solve(cfg)
}

/// `Σ / ‖Σ‖_F`
pub fn normalize_unit_fro(est: &MetricMatrix) -> Result<MetricMatrix> {
    let norm = est.frobenius_norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    MetricMatrix::new(est.matrix.scale(1.0 / norm))
}

#[derive(Debug, Clone)]
pub struct PairwiseOutcome {
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
    pub label: Label,
}

/// Triplet answer over explicit items: `label == triplet_oracle(x1, x2, x3)`.
#[derive(Debug, Clone)]
pub struct TripletOutcome {
    pub x1: DVector<f64>,
    pub x2: DVector<f64>,
    pub x3: DVector<f64>,
    pub label: Label,
}

/// Triplet answer over a shared point pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexedTriplet {
    pub anchor: usize,
    pub first: usize,
    pub second: usize,
    pub label: Label,
}

/// Triplets that index into a common pool of points, so that rankings can
/// share item vectors across their decomposed triplets.
#[derive(Debug, Clone, Default)]
pub struct TripletData {
    pub points: Vec<DVector<f64>>,
    pub triplets: Vec<IndexedTriplet>,
}

impl TripletData {
    pub fn from_outcomes(outcomes: &[TripletOutcome]) -> Self {
        let mut data = TripletData::default();
        for o in outcomes {
            let base = data.points.len();
            data.points.extend([o.x1.clone(), o.x2.clone(), o.x3.clone()]);
            data.triplets.push(IndexedTriplet { anchor: base, first: base + 1, second: base + 2, label: o.label });
        }
        data
    }

    pub fn from_rankings(queries: &[RankingQuery]) -> Result<Self> {
        let mut data = TripletData::default();
        for q in queries {
            data.push_ranking(q)?;
        }
        Ok(data)
    }

    /// Appends one ranking and its `k(k−1)/2` triplets.
    pub fn push_ranking(&mut self, query: &RankingQuery) -> Result<()> {
        let k = query.items.len();
        if k < 2 || query.perm.len() != k {
            return Err(Error::InvalidArgument(format!(
                "ranking needs k >= 2 items and a matching permutation (k={k}, perm={})",
                query.perm.len()
            )));
        }
        let base = self.points.len();
        self.points.push(query.reference.clone());
        self.points.extend(query.items.iter().cloned());
        for t in decompose_ranking(&query.perm) {
            self.triplets.push(IndexedTriplet {
                anchor: base,
                first: base + 1 + t.first,
                second: base + 1 + t.second,
                label: t.label,
            });
        }
        Ok(())
    }
}

/// A reference item, the items it ranks, and the closest-first permutation.
#[derive(Debug, Clone)]
pub struct RankingQuery {
    pub reference: DVector<f64>,
    pub items: Vec<DVector<f64>>,
    pub perm: Vec<usize>,
}

/// `max{0, offset − Σ coef·⟨Σ, uuᵀ⟩}` over at most two difference vectors.
#[derive(Debug, Clone, Copy)]
struct HingeTerm {
    offset: f64,
    parts: [(usize, f64); 2],
}

/// Mean hinge loss over quadratic features `⟨Σ, uⱼuⱼᵀ⟩` of distinct difference vectors.
struct HingeProblem {
    rows: DMatrix<f64>,
    cols: DMatrix<f64>,
    terms: Vec<HingeTerm>,
}

impl HingeProblem {
    fn new(diffs: Vec<DVector<f64>>, terms: Vec<HingeTerm>) -> Result<Self> {
        let d = diffs.first().map(|v| v.len()).ok_or_else(|| Error::InvalidArgument("no outcomes".into()))?;
        let mut cols = DMatrix::zeros(d, diffs.len());
        for (j, u) in diffs.iter().enumerate() {
            if u.len() != d {
                return Err(Error::DimMismatch { expected: d, got: u.len() });
            }
            cols.set_column(j, u);
        }
        Ok(HingeProblem { rows: cols.transpose(), cols, terms })
    }

    fn dim(&self) -> usize {
        self.cols.nrows()
    }

    fn features(&self, sigma: &DMatrix<f64>) -> Vec<f64> {
        let projected = sigma * &self.cols;
        projected
            .column_iter()
            .zip(self.cols.column_iter())
            .map(|(p, u)| p.dot(&u))
            .collect()
    }

    /// Mean hinge loss and one subgradient of it.
    fn loss_and_subgradient(&self, sigma: &DMatrix<f64>) -> (f64, DMatrix<f64>, bool) {
        let q = self.features(sigma);
        let n = self.terms.len() as f64;
        let mut coef = vec![0.0; q.len()];
        let mut loss = 0.0;
        let mut active = false;
        for term in &self.terms {
            let margin = term.offset - term.parts.iter().map(|&(j, c)| c * q[j]).sum::<f64>();
            if margin > 0.0 {
                loss += margin;
                active = true;
                for &(j, c) in &term.parts {
                    coef[j] -= c / n;
                }
            }
        }
        let mut scaled = self.cols.clone();
        for (mut col, c) in scaled.column_iter_mut().zip(&coef) {
            col.scale_mut(*c);
        }
        (loss / n, &scaled * &self.rows, active)
    }

    /// Proximal subgradient descent with steps `c/√k`, where `c` is the Polyak
    /// step at the starting point. Returns the best iterate seen.
    fn solve(&self, cfg: &SolverConfig) -> Result<SolveResult> {
        cfg.validate()?;
        let lambda = cfg.lambda;
        let d = self.dim();
        let mut x = match cfg.init {
            Init::Zero => SymMatrix::zeros(d),
            Init::ScaledIdentity => {
                let mean_sq = self.rows.row_iter().map(|u| u.norm_squared()).sum::<f64>() / self.rows.nrows() as f64;
                SymMatrix::identity(d).scale(1.0 / mean_sq.max(f64::MIN_POSITIVE))
            }
        };
        let (loss0, g0, _) = self.loss_and_subgradient(x.as_matrix());
        let mut best_obj = loss0 + lambda * x.trace();
        let mut best = x.clone();
        let mut trace = vec![best_obj];

        let full0 = g0 + DMatrix::identity(d, d) * lambda;
        let g_norm_sq = full0.norm_squared();
        if !(g_norm_sq > 0.0) {
            return Ok(SolveResult { estimate: MetricMatrix::new(best)?, objective_trace: trace, iterations: 0, converged: true });
        }
        let base_step = best_obj / g_norm_sq;

        let mut converged = false;
        let mut iterations = 0;
        let mut current: Option<(f64, DMatrix<f64>, bool)> = None;
        for k in 1..=cfg.max_iters {
            iterations = k;
            let (_, grad, active) = current.take().unwrap_or_else(|| self.loss_and_subgradient(x.as_matrix()));
            if !active && lambda == 0.0 {
                converged = true;
                break;
            }
            let step = base_step / (k as f64).sqrt();
            let moved = SymMatrix::symmetrized(x.as_matrix() - grad * step);
            x = prox_trace_psd(&moved, step * lambda)?;
            let eval = self.loss_and_subgradient(x.as_matrix());
            let obj = eval.0 + lambda * x.trace();
            current = Some(eval);
            if obj < best_obj {
                best_obj = obj;
                best = x.clone();
            }
            trace.push(best_obj);
            if k >= HINGE_WINDOW {
                let past = trace[k - HINGE_WINDOW];
                if past - best_obj <= cfg.rel_tol * best_obj.abs() {
                    converged = true;
                    break;
                }
            }
        }
        Ok(SolveResult { estimate: MetricMatrix::new(best)?, objective_trace: trace, iterations, converged })
    }
}

/// `(1/N) Σ max{0, y − εᵢ‖x₁ − x₂‖²_Σ} + λ tr Σ` over PSD Σ.
pub fn fit_pairwise(outcomes: &[PairwiseOutcome], y: f64, cfg: &SolverConfig) -> Result<SolveResult> {
    let mut diffs = Vec::with_capacity(outcomes.len());
    let mut terms = Vec::with_capacity(outcomes.len());
    for (j, o) in outcomes.iter().enumerate() {
        if o.x1.len() != o.x2.len() {
            return Err(Error::DimMismatch { expected: o.x1.len(), got: o.x2.len() });
        }
        diffs.push(&o.x1 - &o.x2);
        terms.push(HingeTerm { offset: y, parts: [(j, o.label.sign()), (j, 0.0)] });
    }
    HingeProblem::new(diffs, terms)?.solve(cfg)
}

/// `(1/N) Σ max{0, 1 − εᵢ(‖x₁ − x₂‖²_Σ − ‖x₁ − x₃‖²_Σ)} + λ tr Σ` over PSD Σ.
///
/// Difference vectors `anchor − other` that recur across triplets are stored once.
pub fn fit_triplet(data: &TripletData, cfg: &SolverConfig) -> Result<SolveResult> {
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut diffs: Vec<DVector<f64>> = Vec::new();
    let mut diff_of = |anchor: usize, other: usize, diffs: &mut Vec<DVector<f64>>| -> Result<usize> {
        let (Some(a), Some(b)) = (data.points.get(anchor), data.points.get(other)) else {
            return Err(Error::InvalidArgument(format!("triplet index out of range ({anchor}, {other})")));
        };
        if a.len() != b.len() {
            return Err(Error::DimMismatch { expected: a.len(), got: b.len() });
        }
        Ok(*index.entry((anchor, other)).or_insert_with(|| {
            diffs.push(a - b);
            diffs.len() - 1
        }))
    };
    let mut terms = Vec::with_capacity(data.triplets.len());
    for t in &data.triplets {
        let j = diff_of(t.anchor, t.first, &mut diffs)?;
        let l = diff_of(t.anchor, t.second, &mut diffs)?;
        let s = t.label.sign();
        terms.push(HingeTerm { offset: 1.0, parts: [(j, s), (l, -s)] });
    }
    HingeProblem::new(diffs, terms)?.solve(cfg)
}

/// Decomposes each ranking into triplets and runs the triplet estimator.
pub fn fit_ranking(queries: &[RankingQuery], cfg: &SolverConfig) -> Result<SolveResult> {
    fit_triplet(&TripletData::from_rankings(queries)?, cfg)
}
