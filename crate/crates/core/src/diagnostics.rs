//! Monte Carlo checks of the moment identities behind the estimator analysis.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{fit_paq, SolverConfig};
use crate::linalg::MetricMatrix;
use crate::oracles::{sample_query_vector, NoiseModel};
use crate::pipeline::{policy_with_m, run_pipeline, PipelineConfig, PipelineOutput, SpectrumSummary};

/// Batches used for batch-means standard errors.
pub const BATCHES: usize = 100;

/// Sample mean, its standard error, and the comparison with an analytic
/// target when one is known. Scalars are stored as 1×1 matrices.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub estimate: DMatrix<f64>,
    /// Entrywise standard error of `estimate`.
    pub standard_error: DMatrix<f64>,
    pub n_samples: usize,
    pub target: Option<DMatrix<f64>>,
    /// Largest entrywise `|estimate − target| / standard_error`.
    pub z_score: Option<f64>,
}

impl MonteCarloReport {
    fn new(estimate: DMatrix<f64>, standard_error: DMatrix<f64>, n_samples: usize, target: Option<DMatrix<f64>>) -> Self {
        let z_score = target.as_ref().map(|t| {
            estimate
                .iter()
                .zip(t.iter())
                .zip(standard_error.iter())
                .map(|((e, t), se)| {
                    let diff = (e - t).abs();
                    if diff == 0.0 {
                        0.0
                    } else if *se > 0.0 {
                        diff / se
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max)
        });
        MonteCarloReport { estimate, standard_error, n_samples, target, z_score }
    }

    /// Scalar estimate for 1×1 reports.
    pub fn scalar(&self) -> f64 {
        self.estimate[(0, 0)]
    }

    pub fn max_standard_error(&self) -> f64 {
        self.standard_error.max()
    }
}

/// Splits `samples` into [`BATCHES`] batches, each on its own ChaCha stream,
/// and returns the mean and batch-means standard error of `draw`.
fn batch_means<R, F>(samples: usize, rows: usize, cols: usize, rng: &mut R, draw: F) -> Result<(DMatrix<f64>, DMatrix<f64>)>
where
    R: Rng + ?Sized,
    F: Fn(&mut ChaCha8Rng, &mut DMatrix<f64>) + Sync,
{
    if samples < BATCHES {
        return Err(Error::InvalidArgument(format!("need at least {BATCHES} samples, got {samples}")));
    }
    let base = ChaCha8Rng::seed_from_u64(rng.random());
    let per = samples / BATCHES;
    let extra = samples % BATCHES;
    let batch: Vec<DMatrix<f64>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut sub = base.clone();
            sub.set_stream(b as u64);
            sub.set_word_pos(0);
            let count = per + usize::from(b < extra);
            let mut acc = DMatrix::zeros(rows, cols);
            for _ in 0..count {
                draw(&mut sub, &mut acc);
            }
            acc / count as f64
        })
        .collect();
    let k = BATCHES as f64;
    let mean = batch.iter().fold(DMatrix::zeros(rows, cols), |acc, m| acc + m) / k;
    let var = batch.iter().fold(DMatrix::zeros(rows, cols), |acc, m| {
        let dev = m - &mean;
        acc + dev.component_mul(&dev)
    }) / (k - 1.0);
    let se = var.map(|v| (v / k).sqrt());
    Ok((mean, se))
}

/// Mean of `η·A_inv = η·γ²aaᵀ` over `samples` simulated responses.
///
/// The target `ν²/(σd)·I` is attached when Σ* = σI, where
/// `E[aaᵀ/aᵀa] = I/d` makes the expectation exact.
pub fn bias_monte_carlo<R: Rng + ?Sized>(sigma: &MetricMatrix, noise: &NoiseModel, samples: usize, rng: &mut R) -> Result<MonteCarloReport> {
    if sigma.rank == 0 {
        return Err(Error::InvalidRank { rank: 0, dim: sigma.dim() });
    }
    let d = sigma.dim();
    let y = noise.y();
    let s = sigma.matrix.as_matrix();
    let (mean, se) = batch_means(samples, d, d, rng, |sub, acc| {
        let a = sample_query_vector(d, sub);
        let eta = noise.sample(sub);
        let q = (s * &a).dot(&a);
        let coef = eta * (y + eta) / q;
        acc.ger(coef, &a, &a, 1.0);
    })?;
    let target = isotropic_scale(s).map(|sig| DMatrix::identity(d, d) * (noise.variance() / (sig * d as f64)));
    Ok(MonteCarloReport::new(mean, se, samples, target))
}

/// `Some(σ)` when the matrix is exactly σI.
fn isotropic_scale(s: &DMatrix<f64>) -> Option<f64> {
    let sig = s[(0, 0)];
    let iso = s
        .iter()
        .enumerate()
        .all(|(k, v)| if k % (s.nrows() + 1) == 0 { *v == sig } else { *v == 0.0 });
    (iso && sig > 0.0).then_some(sig)
}

/// `E[(1/χ²_d)^p] = ∏_{j=1..p} 1/(d − 2j)`, finite only for `d > 2p`.
pub fn inverse_chi_square_moment(d: usize, p: u32) -> Result<f64> {
    if p == 0 || d <= 2 * p as usize {
        return Err(Error::InvalidDim { dim: d, power: p });
    }
    Ok((1..=p as usize).map(|j| 1.0 / (d - 2 * j) as f64).product())
}

/// Monte Carlo mean of `(1/‖a‖²)^p` for `a ~ N(0, I_d)` against the exact moment.
pub fn inverse_moment_check<R: Rng + ?Sized>(d: usize, p: u32, samples: usize, rng: &mut R) -> Result<MonteCarloReport> {
    let target = inverse_chi_square_moment(d, p)?;
    let (mean, se) = batch_means(samples, 1, 1, rng, |sub, acc| {
        let a = sample_query_vector(d, sub);
        acc[(0, 0)] += (1.0 / a.norm_squared()).powi(p as i32);
    })?;
    Ok(MonteCarloReport::new(mean, se, samples, Some(DMatrix::from_element(1, 1, target))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationAudit {
    pub n: usize,
    pub hits: usize,
    pub hit_rate: f64,
}

/// Checks the three truncation properties on every response:
/// `γ̃² ≤ τ`, `γ̃² ≤ γ̄²`, and `γ̃² = γ̄²` whenever `γ̄² < τ`.
pub fn truncation_audit(out: &PipelineOutput) -> Result<TruncationAudit> {
    let mut hits = 0;
    for (i, (&t, &a)) in out.truncated_responses.iter().zip(&out.averaged_responses).enumerate() {
        if t > out.tau {
            return Err(Error::PropertyViolated { property: "capped_at_threshold", index: i });
        }
        if t > a {
            return Err(Error::PropertyViolated { property: "never_exceeds_average", index: i });
        }
        if a < out.tau && a != t {
            return Err(Error::PropertyViolated { property: "unchanged_below_threshold", index: i });
        }
        if a >= out.tau {
            hits += 1;
        }
    }
    let n = out.len();
    Ok(TruncationAudit { n, hits, hit_rate: if n == 0 { 0.0 } else { hits as f64 / n as f64 } })
}

/// One noisy pipeline-plus-estimator run, parameterized so that it can be
/// replayed at a different scale.
#[derive(Debug, Clone)]
pub struct ScaleScenario {
    pub sigma: MetricMatrix,
    pub noise: NoiseModel,
    pub total: usize,
    pub m: usize,
    pub c1_scale: f64,
    pub seed: u64,
    pub solver: SolverConfig,
}

/// Runs the scenario at scale 1 and at scale `c` on the same randomness and
/// returns `‖Σ̂_c − cΣ̂‖_F / (c‖Σ̂‖_F)`.
///
/// Σ*, y and η↑ are multiplied by `c`. The thresholds and λ come from the
/// policies, so τ is unchanged and λ scales by `c`.
pub fn scale_equivariance_check(scenario: &ScaleScenario, c: f64) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {c}")));
    }
    let base = run_scaled(scenario, 1.0)?;
    let scaled = run_scaled(scenario, c)?;
    let norm = base.frobenius_norm();
    if !(norm > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let diff = scaled.matrix.as_matrix() - base.matrix.as_matrix() * c;
    Ok(diff.norm() / (c * norm))
}

fn run_scaled(scenario: &ScaleScenario, c: f64) -> Result<MetricMatrix> {
    let sigma = if c == 1.0 { scenario.sigma.clone() } else { scenario.sigma.scale(c)? };
    let noise = if c == 1.0 { scenario.noise } else { scenario.noise.scaled(c)? };
    let d = sigma.dim();
    let spectrum = SpectrumSummary::from_metric(&sigma)?;
    let policy = policy_with_m(&spectrum, &noise, scenario.total, d, scenario.m, scenario.c1_scale)?;
    let cfg = PipelineConfig::new(scenario.total, scenario.m, policy.tau, noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let out = run_pipeline(&sigma, &cfg, &mut rng)?;
    let solver = SolverConfig { lambda: policy.lambda, ..scenario.solver };
    let fit = fit_paq(&out, noise.y(), &solver)?;
    Ok(fit.estimate)
}
