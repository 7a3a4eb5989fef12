//! Simulated respondents.
//!
//! A PAQ respondent moves a slider along `x + γ·a` until the item stops
//! looking similar to `x`; under the model this happens where
//! `γ²·aᵀΣ*a = y + η`. The ordinal oracles answer the classic pairwise,
//! triplet and ranking queries without noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mahalanobis_sq, quad_form_unchecked, MetricMatrix, SymMatrix};

/// Relative threshold below which `aᵀΣa` counts as a null direction.
pub const DEGENERATE_DIRECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Uniform,
}

/// Boundary value `y` plus a zero-mean bounded perturbation `η`.
///
/// The variance, the upper boundary `b↑ = y + η↑` and the median boundary
/// `μ_b` are derived from `(kind, η↑, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    eta_up: f64,
    y: f64,
}

impl NoiseModel {
    pub fn none(y: f64) -> Result<Self> {
        Self::new(NoiseKind::None, 0.0, y)
    }

    /// Uniform noise on `[−η↑, η↑]`; requires `η↑ ≤ y` so that `y + η ≥ 0`.
    pub fn uniform(y: f64, eta_up: f64) -> Result<Self> {
        Self::new(NoiseKind::Uniform, eta_up, y)
    }

    pub fn new(kind: NoiseKind, eta_up: f64, y: f64) -> Result<Self> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::InvalidNoise(format!("boundary y must be positive, got {y}")));
        }
        match kind {
            NoiseKind::None => Ok(NoiseModel { kind, eta_up: 0.0, y }),
            NoiseKind::Uniform => {
                if !(eta_up >= 0.0) || eta_up > y {
                    return Err(Error::InvalidNoise(format!(
                        "uniform noise needs 0 <= eta_up <= y, got eta_up={eta_up}, y={y}"
                    )));
                }
                Ok(NoiseModel { kind, eta_up, y })
            }
        }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn eta_up(&self) -> f64 {
        self.eta_up
    }

    /// ν²
    pub fn variance(&self) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => self.eta_up * self.eta_up / 3.0,
        }
    }

    /// b↑ = y + η↑
    pub fn upper_boundary(&self) -> f64 {
        self.y + self.eta_up
    }

    /// μ_b = y + median(η); both supported laws are symmetric.
    pub fn median_boundary(&self) -> f64 {
        self.y
    }

    /// Same law with `y` and `η↑` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.kind, self.eta_up * c, self.y * c)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::None => 0.0,
            NoiseKind::Uniform => self.eta_up * rng.random_range(-1.0..=1.0),
        }
    }
}

/// One slider response: query direction, squared scale `γ²`, and the noise draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PaqResponse {
    pub query: DVector<f64>,
    pub gamma_sq: f64,
    pub noise: f64,
}

pub fn sample_query_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.sample(StandardNormal))
}

/// Draws `η` from `noise` and answers the query `a` under `Σ*`.
pub fn paq_respond<R: Rng + ?Sized>(
    sigma: &MetricMatrix,
    a: &DVector<f64>,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<PaqResponse> {
    let q = checked_quadratic(sigma, a)?;
    let eta = noise.sample(rng);
    Ok(PaqResponse { query: a.clone(), gamma_sq: (noise.y() + eta) / q, noise: eta })
}

/// Deterministic response for a given noise realization.
pub fn paq_respond_with_noise(sigma: &MetricMatrix, a: &DVector<f64>, y: f64, eta: f64) -> Result<PaqResponse> {
    let q = checked_quadratic(sigma, a)?;
    Ok(PaqResponse { query: a.clone(), gamma_sq: (y + eta) / q, noise: eta })
}

/// `aᵀΣa`, rejecting directions where the slider would never reach the boundary.
pub(crate) fn checked_quadratic(sigma: &MetricMatrix, a: &DVector<f64>) -> Result<f64> {
    if a.len() != sigma.dim() {
        return Err(Error::DimMismatch { expected: sigma.dim(), got: a.len() });
    }
    let q = quad_form_unchecked(sigma.matrix.as_matrix(), a);
    if q <= DEGENERATE_DIRECTION_TOL * sigma.sigma_max() * a.norm_squared() || q <= 0.0 {
        return Err(Error::DegenerateDirection);
    }
    Ok(q)
}

/// Inverted sensing matrix `A_inv = γ²·aaᵀ`.
pub fn build_inverted_sensing(resp: &PaqResponse) -> SymMatrix {
    let a = &resp.query;
    SymMatrix::symmetrized(DMatrix::from_fn(a.len(), a.len(), |i, j| resp.gamma_sq * a[i] * a[j]))
}

/// Binary ordinal answer. A zero difference resolves to `Plus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Plus,
    Minus,
}

impl Label {
    pub fn from_difference(v: f64) -> Self {
        if v < 0.0 {
            Label::Minus
        } else {
            Label::Plus
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Label::Plus => 1.0,
            Label::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Plus => Label::Minus,
            Label::Minus => Label::Plus,
        }
    }
}

/// `sign(‖x₁ − x₂‖²_Σ − y)`: are the two items dissimilar?
pub fn pairwise_oracle(sigma: &MetricMatrix, x1: &DVector<f64>, x2: &DVector<f64>, y: f64) -> Result<Label> {
    Ok(Label::from_difference(mahalanobis_sq(x1, x2, sigma)? - y))
}

/// `sign(‖x₁ − x₂‖²_Σ − ‖x₁ − x₃‖²_Σ)`: `Minus` means `x₂` is closer to the anchor `x₁`.
pub fn triplet_oracle(
    sigma: &MetricMatrix,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    x3: &DVector<f64>,
) -> Result<Label> {
    Ok(Label::from_difference(mahalanobis_sq(x1, x2, sigma)? - mahalanobis_sq(x1, x3, sigma)?))
}

/// Indices of `items` sorted by distance to `x0`, closest first. Ties keep input order.
pub fn ranking_oracle(sigma: &MetricMatrix, x0: &DVector<f64>, items: &[DVector<f64>]) -> Result<Vec<usize>> {
    if items.len() < 2 {
        return Err(Error::InvalidArgument(format!("ranking needs at least 2 items, got {}", items.len())));
    }
    let dist = items.iter().map(|x| mahalanobis_sq(x0, x, sigma)).collect::<Result<Vec<_>>>()?;
    let mut perm: Vec<usize> = (0..items.len()).collect();
    perm.sort_by(|&i, &j| dist[i].total_cmp(&dist[j]));
    Ok(perm)
}

/// A triplet answer over a ranking's items, anchored at the ranking reference.
///
/// Read as `triplet_oracle(x0, items[first], items[second]) == label`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankedTriplet {
    pub first: usize,
    pub second: usize,
    pub label: Label,
}

/// Splits a ranking into its `k(k−1)/2` constituent triplets.
///
/// Each pair is emitted farther-item first with label `Plus`, which agrees
/// with the triplet oracle both for strict orderings and for ties.
///
/// # Panics
/// If `perm` is not a permutation of `0..perm.len()`.
pub fn decompose_ranking(perm: &[usize]) -> Vec<RankedTriplet> {
    let k = perm.len();
    let mut seen = vec![false; k];
    for &p in perm {
        assert!(p < k && !seen[p], "not a permutation: {perm:?}");
        seen[p] = true;
    }
    let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
    for (pos, &closer) in perm.iter().enumerate() {
        for &farther in &perm[pos + 1..] {
            out.push(RankedTriplet { first: farther, second: closer, label: Label::Plus });
        }
    }
    out
}
