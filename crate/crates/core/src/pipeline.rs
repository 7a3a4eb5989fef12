//! Measurement collection with m-fold averaging and τ-truncation, and the
//! parameter policies that pick `m`, `τ` and `λ_n` from the problem scales.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::MetricMatrix;
use crate::oracles::{checked_quadratic, sample_query_vector, NoiseModel};

/// Rank at or below which the fourth inverse moment of `aᵀΣ*a` is infinite
/// and the error guarantees no longer apply.
pub const HEAVY_TAIL_RANK: usize = 8;

#[derive(Debug, Clone, Copy)]
pub struct PipelineConfig {
    /// Total measurement budget N.
    pub total: usize,
    /// Responses averaged per sensing vector.
    pub m: usize,
    /// Truncation threshold; `f64::INFINITY` disables truncation.
    pub tau: f64,
    pub noise: NoiseModel,
}

impl PipelineConfig {
    pub fn new(total: usize, m: usize, tau: f64, noise: NoiseModel) -> Result<Self> {
        let cfg = PipelineConfig { total, m, tau, noise };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("averaging parameter m must be at least 1".into()));
        }
        if self.total / self.m < 1 {
            return Err(Error::BudgetTooSmall { total: self.total, m: self.m });
        }
        if !(self.tau > 0.0) {
            return Err(Error::InvalidArgument(format!("truncation threshold must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Number of distinct sensing vectors, `n = ⌊N/m⌋`.
    pub fn distinct_vectors(&self) -> usize {
        self.total / self.m
    }
}

/// The n averaged-and-truncated responses with their sensing vectors.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// One sensing vector per row (n × d).
    pub sensing_vectors: DMatrix<f64>,
    /// γ̃²ᵢ = min(γ̄²ᵢ, τ)
    pub truncated_responses: Vec<f64>,
    /// γ̄²ᵢ, the mean of the m raw responses.
    pub averaged_responses: Vec<f64>,
    /// η̄ᵢ, the mean of the m noise draws behind γ̄²ᵢ.
    pub noise_means: Vec<f64>,
    pub truncation_hits: usize,
    /// Measurements left over when m does not divide N.
    pub discarded: usize,
    pub m: usize,
    pub tau: f64,
}

impl PipelineOutput {
    pub fn len(&self) -> usize {
        self.truncated_responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truncated_responses.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sensing_vectors.ncols()
    }
}

struct VectorDraw {
    a: Vec<f64>,
    averaged: f64,
    noise_mean: f64,
}

/// Runs the collection loop: draw `aᵢ ~ N(0, I)`, collect `m` responses,
/// average them, then cap the average at `τ`.
///
/// Vector `i` draws from its own ChaCha stream keyed by a single seed taken
/// from `rng`, so the output does not depend on thread count or scheduling.
pub fn run_pipeline<R: Rng + ?Sized>(sigma: &MetricMatrix, cfg: &PipelineConfig, rng: &mut R) -> Result<PipelineOutput> {
    cfg.validate()?;
    if sigma.rank == 0 {
        return Err(Error::InvalidRank { rank: 0, dim: sigma.dim() });
    }
    let n = cfg.distinct_vectors();
    let d = sigma.dim();
    let base = ChaCha8Rng::seed_from_u64(rng.random());
    let y = cfg.noise.y();
    let m = cfg.m;

    let draws: Vec<VectorDraw> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sub = base.clone();
            sub.set_stream(i as u64);
            sub.set_word_pos(0);
            let a = sample_query_vector(d, &mut sub);
            let q = checked_quadratic(sigma, &a)?;
            let mut response_sum = 0.0;
            let mut noise_sum = 0.0;
            for _ in 0..m {
                let eta = cfg.noise.sample(&mut sub);
                response_sum += (y + eta) / q;
                noise_sum += eta;
            }
            Ok(VectorDraw {
                a: a.as_slice().to_vec(),
                averaged: response_sum / m as f64,
                noise_mean: noise_sum / m as f64,
            })
        })
        .collect::<Result<_>>()?;

    let mut sensing_vectors = DMatrix::zeros(n, d);
    let mut truncated = Vec::with_capacity(n);
    let mut averaged = Vec::with_capacity(n);
    let mut noise_means = Vec::with_capacity(n);
    let mut hits = 0;
    for (i, draw) in draws.into_iter().enumerate() {
        for (j, v) in draw.a.iter().enumerate() {
            sensing_vectors[(i, j)] = *v;
        }
        if draw.averaged >= cfg.tau {
            hits += 1;
        }
        truncated.push(draw.averaged.min(cfg.tau));
        averaged.push(draw.averaged);
        noise_means.push(draw.noise_mean);
    }

    Ok(PipelineOutput {
        sensing_vectors,
        truncated_responses: truncated,
        averaged_responses: averaged,
        noise_means,
        truncation_hits: hits,
        discarded: cfg.total - n * m,
        m,
        tau: cfg.tau,
    })
}

/// Spectral facts about Σ* that the τ and λ policies need.
///
/// In simulation these come from the ground truth; a deployment would pass
/// plug-in estimates through [`SpectrumSummary::new`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSummary {
    pub sigma_r: f64,
    pub rank: usize,
    pub trace: f64,
}

impl SpectrumSummary {
    pub fn new(sigma_r: f64, rank: usize, trace: f64) -> Result<Self> {
        if !(sigma_r > 0.0) || rank == 0 || !(trace > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "spectrum summary needs sigma_r > 0, rank >= 1, trace > 0 (got {sigma_r}, {rank}, {trace})"
            )));
        }
        Ok(SpectrumSummary { sigma_r, rank, trace })
    }

    pub fn from_metric(sigma: &MetricMatrix) -> Result<Self> {
        Self::new(sigma.sigma_min_nonzero(), sigma.rank, sigma.trace)
    }

    fn sigma_r_times_r(&self) -> f64 {
        self.sigma_r * self.rank as f64
    }
}

/// `ν² / (b↑)²`, the noise level that separates the two regimes.
pub fn noise_ratio(noise: &NoiseModel) -> f64 {
    let b = noise.upper_boundary();
    noise.variance() / (b * b)
}

/// `m = ⌈(ν²/b↑²)^{2/3} (N/d)^{1/3}⌉`, clamped to at least 1.
pub fn choose_m(noise: &NoiseModel, total: usize, d: usize) -> usize {
    let ratio = noise_ratio(noise);
    let nd = total as f64 / d as f64;
    if ratio <= (1.0 / nd).sqrt() {
        return 1;
    }
    let inner = ratio.powf(2.0 / 3.0) * nd.powf(1.0 / 3.0);
    // Absorb last-ulp error from the fractional powers before rounding up.
    let m = (inner * (1.0 - 1e-12)).ceil();
    (m as usize).max(1)
}

/// `τ = b↑/(σ_r r) · √(N/(m d))`, checked against `τ ≥ μ_b / tr Σ*`.
pub fn choose_tau(spectrum: &SpectrumSummary, noise: &NoiseModel, total: usize, m: usize, d: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let tau = noise.upper_boundary() / spectrum.sigma_r_times_r() * (total as f64 / (m as f64 * d as f64)).sqrt();
    let minimum = noise.median_boundary() / spectrum.trace;
    if tau < minimum {
        return Err(Error::PreconditionViolated { tau, minimum });
    }
    Ok(tau)
}

/// Regularization level
/// `c₁·[b↑(b↑/(σ_r r)·√(d/n) + (d/n)·τ + (b↑/(σ_r r))²/τ) + ν²/(m σ_r r)]`.
///
/// `c1_scale` stands in for the unknown universal constant.
pub fn choose_lambda(
    spectrum: &SpectrumSummary,
    noise: &NoiseModel,
    n: usize,
    m: usize,
    d: usize,
    tau: f64,
    c1_scale: f64,
) -> f64 {
    let b = noise.upper_boundary();
    let sr = spectrum.sigma_r_times_r();
    let ratio = b / sr;
    let dn = d as f64 / n as f64;
    let bracket = b * (ratio * dn.sqrt() + dn * tau + ratio * ratio / tau) + noise.variance() / (m as f64 * sr);
    c1_scale * bracket
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    HighNoise,
    LowNoise,
}

/// High noise iff `ν²/b↑² > √(d/N)`.
pub fn classify_regime(noise: &NoiseModel, total: usize, d: usize) -> Regime {
    if noise_ratio(noise) > (d as f64 / total as f64).sqrt() {
        Regime::HighNoise
    } else {
        Regime::LowNoise
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeReport {
    pub regime: Regime,
    /// ν²/b↑²
    pub noise_ratio: f64,
    /// √(d/N)
    pub threshold: f64,
    pub m: usize,
    pub n: usize,
    pub tau: f64,
    pub lambda: f64,
    /// Set when the rank is at or below [`HEAVY_TAIL_RANK`].
    pub heavy_tail_warning: bool,
}

/// Chooses `m`, `τ` and `λ_n` together, as the error rates prescribe.
pub fn theory_policy(
    spectrum: &SpectrumSummary,
    noise: &NoiseModel,
    total: usize,
    d: usize,
    c1_scale: f64,
) -> Result<RegimeReport> {
    let m = choose_m(noise, total, d);
    policy_with_m(spectrum, noise, total, d, m, c1_scale)
}

/// Same as [`theory_policy`] with a caller-fixed averaging parameter.
pub fn policy_with_m(
    spectrum: &SpectrumSummary,
    noise: &NoiseModel,
    total: usize,
    d: usize,
    m: usize,
    c1_scale: f64,
) -> Result<RegimeReport> {
    if m == 0 || total / m == 0 {
        return Err(Error::BudgetTooSmall { total, m });
    }
    let n = total / m;
    let tau = choose_tau(spectrum, noise, total, m, d)?;
    let lambda = choose_lambda(spectrum, noise, n, m, d, tau, c1_scale);
    Ok(RegimeReport {
        regime: classify_regime(noise, total, d),
        noise_ratio: noise_ratio(noise),
        threshold: (d as f64 / total as f64).sqrt(),
        m,
        n,
        tau,
        lambda,
        heavy_tail_warning: spectrum.rank <= HEAVY_TAIL_RANK,
    })
}
