//! Dense symmetric-matrix primitives.
//!
//! Everything here works on small dense matrices (d up to a few hundred).
//! The eigendecomposition is the workhorse: PSD projection and the
//! trace-norm proximal map are both spectral functions of the input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance for the PSD check, scaled by the largest eigenvalue.
pub const TOL_PSD: f64 = 1e-10;
/// Relative tolerance for counting nonzero eigenvalues, scaled by the largest eigenvalue.
pub const TOL_RANK: f64 = 1e-8;

/// A square matrix that is exactly symmetric.
///
/// Construction symmetrizes the input as `(A + Aᵀ) / 2`, so the entries
/// satisfy `a[i][j] == a[j][i]` bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() == 0 {
            return Err(Error::NotSquare { rows: a.nrows(), cols: a.ncols() });
        }
        Ok(Self::symmetrized(a))
    }

    /// Symmetrizes a square matrix. Callers guarantee squareness.
    pub(crate) fn symmetrized(mut a: DMatrix<f64>) -> Self {
        let d = a.nrows();
        for j in 0..d {
            for i in (j + 1)..d {
                let v = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymMatrix(a)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::NotSquare { rows: 0, cols: 0 });
        }
        Ok(SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag))))
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(Error::DimMismatch { expected: dim * dim, got: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scale(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// Frobenius inner product `⟨A, B⟩ = tr(AᵀB)`.
    pub fn inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::DimMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(quad_form_unchecked(&self.0, v))
    }
}

pub(crate) fn quad_form_unchecked(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let d = v.len();
    let mut acc = 0.0;
    for j in 0..d {
        let col = a.column(j);
        let mut s = 0.0;
        for i in 0..d {
            s += col[i] * v[i];
        }
        acc += s * v[j];
    }
    acc
}

/// Full eigendecomposition with eigenvalues sorted in descending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, in eigenvalue order.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    /// Rebuilds `V diag(f(λ)) Vᵀ` for a spectral function `f`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        let mut any = false;
        for (k, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w != 0.0 {
                any = true;
            }
            scaled.column_mut(k).scale_mut(w);
        }
        if !any {
            return SymMatrix::zeros(d);
        }
        SymMatrix::symmetrized(scaled * v.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(|x| x)
    }
}

pub fn sym_eigendecompose(a: &SymMatrix) -> Result<Spectrum> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let d = a.dim();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut eigenvectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Frobenius-nearest PSD matrix: clips negative eigenvalues to zero.
pub fn project_psd(a: &SymMatrix) -> Result<SymMatrix> {
    prox_trace_psd(a, 0.0)
}

/// Proximal map of `t·tr(X) + ι{X ⪰ 0}`: shifts every eigenvalue down by `t`
/// and clips at zero.
pub fn prox_trace_psd(a: &SymMatrix, t: f64) -> Result<SymMatrix> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("prox step must be nonnegative, got {t}")));
    }
    let spec = sym_eigendecompose(a)?;
    Ok(spec.reconstruct_with(|lam| (lam - t).max(0.0)))
}

/// A symmetric PSD matrix together with its spectral summary.
///
/// Ground-truth metrics have rank at least one; estimates may be the zero
/// matrix, in which case `rank == 0`.
#[derive(Debug, Clone)]
pub struct MetricMatrix {
    pub matrix: SymMatrix,
    pub rank: usize,
    /// Descending nonzero eigenvalues (equal to the singular values for PSD input).
    pub nonzero_singular_values: Vec<f64>,
    pub trace: f64,
}

impl MetricMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let spec = sym_eigendecompose(&matrix)?;
        let sigma1 = spec.eigenvalues[0].max(0.0);
        let min = spec.eigenvalues[spec.eigenvalues.len() - 1];
        if min < -TOL_PSD * sigma1 || (sigma1 == 0.0 && min < 0.0) {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        let tol_rank = TOL_RANK * sigma1;
        let nonzero: Vec<f64> = spec.eigenvalues.iter().copied().filter(|&l| l > tol_rank).collect();
        Ok(MetricMatrix {
            rank: nonzero.len(),
            nonzero_singular_values: nonzero,
            trace: matrix.trace(),
            matrix,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.frobenius_norm()
    }

    /// Largest eigenvalue σ₁ (zero for the zero matrix).
    pub fn sigma_max(&self) -> f64 {
        self.nonzero_singular_values.first().copied().unwrap_or(0.0)
    }

    /// Smallest nonzero eigenvalue σ_r.
    pub fn sigma_min_nonzero(&self) -> f64 {
        self.nonzero_singular_values.last().copied().unwrap_or(0.0)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        MetricMatrix::new(self.matrix.scale(c))
    }
}

/// Modified Gram–Schmidt with one full re-orthogonalization pass.
///
/// Returns `None` when a column is numerically dependent on its predecessors.
pub fn orthonormalize_columns(g: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let (d, r) = g.shape();
    let mut q = g.clone();
    for k in 0..r {
        let norm_in = q.column(k).norm();
        for _pass in 0..2 {
            for j in 0..k {
                let proj = q.column(j).dot(&q.column(k));
                let qj = q.column(j).clone_owned();
                q.column_mut(k).axpy(-proj, &qj, 1.0);
            }
        }
        let norm = q.column(k).norm();
        if !(norm > 1e-12 * norm_in.max(f64::MIN_POSITIVE)) || d == 0 {
            return None;
        }
        q.column_mut(k).unscale_mut(norm);
    }
    Some(q)
}

pub fn standard_normal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    // Filled in column-major order.
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn check_rank(d: usize, r: usize) -> Result<()> {
    if r < 1 || r > d {
        return Err(Error::InvalidRank { rank: r, dim: d });
    }
    Ok(())
}

/// `Σ* = (d/√r)·UUᵀ` with `U` a d×r matrix of orthonormalized Gaussian columns.
///
/// Every nonzero eigenvalue equals `d/√r`, so `tr Σ* = d√r` and `‖Σ*‖_F = d`.
pub fn generate_metric_orthonormal<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> Result<MetricMatrix> {
    check_rank(d, r)?;
    let u = loop {
        let g = standard_normal_matrix(d, r, rng);
        if let Some(u) = orthonormalize_columns(&g) {
            break u;
        }
    };
    let scale = d as f64 / (r as f64).sqrt();
    let sigma = SymMatrix::symmetrized((&u * u.transpose()) * scale);
    MetricMatrix::new(sigma)
}

/// `Σ* = LLᵀ / ‖LLᵀ‖_F` with `L` a d×r standard normal matrix.
pub fn generate_metric_wishart<R: Rng + ?Sized>(d: usize, r: usize, rng: &mut R) -> Result<MetricMatrix> {
    check_rank(d, r)?;
    let l = standard_normal_matrix(d, r, rng);
    let llt = SymMatrix::symmetrized(&l * l.transpose());
    let norm = llt.frobenius_norm();
    MetricMatrix::new(llt.scale(1.0 / norm))
}

/// `‖est − truth‖_F / ‖truth‖_F`.
pub fn normalized_error(est: &MetricMatrix, truth: &MetricMatrix) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimMismatch { expected: truth.dim(), got: est.dim() });
    }
    let diff = est.matrix.as_matrix() - truth.matrix.as_matrix();
    Ok(diff.norm() / truth.frobenius_norm())
}

/// Squared Mahalanobis distance `(x − x')ᵀ Σ (x − x')`.
pub fn mahalanobis_sq(x: &DVector<f64>, xp: &DVector<f64>, sigma: &MetricMatrix) -> Result<f64> {
    let d = sigma.dim();
    for v in [x, xp] {
        if v.len() != d {
            return Err(Error::DimMismatch { expected: d, got: v.len() });
        }
    }
    Ok(quad_form_unchecked(sigma.matrix.as_matrix(), &(x - xp)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_sym(d: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        SymMatrix::new(standard_normal_matrix(d, d, rng)).unwrap()
    }

    fn diag_of(a: &SymMatrix) -> Vec<f64> {
        a.as_matrix().diagonal().iter().copied().collect()
    }

    #[test]
    fn construction_symmetrizes() {
        let a = SymMatrix::from_row_slice(2, &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(a.as_matrix()[(0, 1)], 3.0);
        assert_eq!(a.as_matrix()[(1, 0)], 3.0);
        assert!(SymMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymMatrix::new(DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let s = sym_eigendecompose(&SymMatrix::identity(3)).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        let s = sym_eigendecompose(&SymMatrix::from_diagonal(&[1.0, 4.0]).unwrap()).unwrap();
        assert_relative_eq!(s.eigenvalues[0], 4.0);
        assert_relative_eq!(s.eigenvalues[1], 1.0);
        assert_relative_eq!(s.eigenvectors[(1, 0)].abs(), 1.0);
        assert_relative_eq!(s.eigenvectors[(0, 1)].abs(), 1.0);
    }

    #[test]
    fn eigen_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_sym(5, &mut rng);
            let s = sym_eigendecompose(&a).unwrap();
            let rec = s.reconstruct();
            assert!((rec.as_matrix() - a.as_matrix()).norm() <= 1e-10);
            let vtv = s.eigenvectors.transpose() * &s.eigenvectors;
            assert!((vtv - DMatrix::<f64>::identity(5, 5)).norm() <= 1e-8);
            for k in 1..5 {
                assert!(s.eigenvalues[k - 1] >= s.eigenvalues[k]);
            }
        }
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 0)] = f64::NAN;
        let a = SymMatrix::new(m).unwrap();
        assert_eq!(sym_eigendecompose(&a).unwrap_err(), Error::NonFinite);
        assert_eq!(project_psd(&a).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn psd_projection_examples() {
        let p = project_psd(&SymMatrix::from_diagonal(&[2.0, -3.0]).unwrap()).unwrap();
        assert!((p.as_matrix() - DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 0.0]))).norm() < 1e-12);

        // Eigenpairs of [[0,1],[1,0]] are (1, (1,1)/√2) and (−1, (1,−1)/√2).
        let swap = SymMatrix::from_row_slice(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let p = project_psd(&swap).unwrap();
        for v in p.as_matrix().iter() {
            assert_relative_eq!(*v, 0.5, epsilon = 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = standard_normal_matrix(4, 4, &mut rng);
        let psd = SymMatrix::new(&g * g.transpose()).unwrap();
        let p = project_psd(&psd).unwrap();
        assert!((p.as_matrix() - psd.as_matrix()).norm() <= 1e-10 * psd.frobenius_norm().max(1.0));
    }

    #[test]
    fn projection_is_idempotent_and_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = random_sym(6, &mut rng);
            let p = project_psd(&a).unwrap();
            let pp = project_psd(&p).unwrap();
            assert!((pp.as_matrix() - p.as_matrix()).norm() <= 1e-10);
            let best = (p.as_matrix() - a.as_matrix()).norm();
            for _ in 0..100 {
                let g = standard_normal_matrix(6, 3, &mut rng);
                let x = &g * g.transpose();
                assert!((x - a.as_matrix()).norm() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn trace_prox_examples() {
        let out = prox_trace_psd(&SymMatrix::from_diagonal(&[5.0, 1.0]).unwrap(), 2.0).unwrap();
        assert_eq!(diag_of(&out).iter().map(|v| (v * 1e12).round() / 1e12).collect::<Vec<_>>(), vec![3.0, 0.0]);
        let out = prox_trace_psd(&SymMatrix::from_diagonal(&[3.0, 2.0, 1.0]).unwrap(), 1.5).unwrap();
        let d = diag_of(&out);
        assert_relative_eq!(d[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(d[1], 0.5, epsilon = 1e-12);
        assert_relative_eq!(d[2], 0.0, epsilon = 1e-12);
        assert!(prox_trace_psd(&SymMatrix::identity(2), -1.0).is_err());
    }

    #[test]
    fn trace_prox_shifts_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &t in &[0.0, 0.3, 1.0, 2.5] {
            let a = random_sym(5, &mut rng);
            let before = sym_eigendecompose(&a).unwrap().eigenvalues;
            let after = sym_eigendecompose(&prox_trace_psd(&a, t).unwrap()).unwrap().eigenvalues;
            for k in 0..5 {
                assert!((after[k] - (before[k] - t).max(0.0)).abs() <= 1e-10);
            }
            if t == 0.0 {
                let p = project_psd(&a).unwrap();
                assert!((prox_trace_psd(&a, 0.0).unwrap().as_matrix() - p.as_matrix()).norm() == 0.0);
            }
        }
    }

    #[test]
    fn trace_prox_minimizes_its_objective() {
        // ½‖X − A‖² + t·tr X over random PSD X never beats the prox output.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_sym(4, &mut rng);
        let t = 0.7;
        let obj = |x: &DMatrix<f64>| 0.5 * (x - a.as_matrix()).norm_squared() + t * x.trace();
        let best = obj(prox_trace_psd(&a, t).unwrap().as_matrix());
        for _ in 0..500 {
            let g = standard_normal_matrix(4, 2, &mut rng) * 0.7;
            assert!(obj(&(&g * g.transpose())) >= best - 1e-12);
        }
    }

    #[test]
    fn orthonormal_metric_has_flat_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = generate_metric_orthonormal(50, 15, &mut rng).unwrap();
        assert_eq!(m.rank, 15);
        let level = 50.0 / 15f64.sqrt();
        for s in &m.nonzero_singular_values {
            assert!((s - level).abs() <= 1e-8 * level);
        }
        assert!((m.trace - 50.0 * 15f64.sqrt()).abs() <= 1e-8 * m.trace);
        assert!((m.trace - 193.649_167_310_370_8).abs() < 1e-6);
        assert!((m.frobenius_norm() - 50.0).abs() <= 1e-8 * 50.0);

        let m = generate_metric_orthonormal(2, 2, &mut rng).unwrap();
        let target = DMatrix::<f64>::identity(2, 2) * (2.0 / 2f64.sqrt());
        assert!((m.matrix.as_matrix() - target).norm() < 1e-12);
    }

    #[test]
    fn gram_schmidt_is_orthonormal_at_d50() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = standard_normal_matrix(50, 40, &mut rng);
        let u = orthonormalize_columns(&g).unwrap();
        let err = (u.transpose() * &u - DMatrix::<f64>::identity(40, 40)).norm();
        assert!(err <= 1e-8, "{err}");
        let mut dup = g.clone();
        let c0 = dup.column(0).clone_owned();
        dup.set_column(1, &(c0 * 2.0));
        assert!(orthonormalize_columns(&dup).is_none());
    }

    #[test]
    fn wishart_metric_is_unit_norm_rank_r() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = generate_metric_wishart(50, 10, &mut rng).unwrap();
        assert!((m.frobenius_norm() - 1.0).abs() <= 1e-10);
        assert_eq!(m.rank, 10);
        let m = generate_metric_wishart(3, 1, &mut rng).unwrap();
        assert_eq!(m.rank, 1);
        assert!((m.frobenius_norm() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn generators_reject_bad_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(generate_metric_orthonormal(3, 4, &mut rng).unwrap_err(), Error::InvalidRank { rank: 4, dim: 3 });
        assert!(generate_metric_orthonormal(3, 0, &mut rng).is_err());
        assert!(generate_metric_wishart(3, 0, &mut rng).is_err());
    }

    #[test]
    fn metric_rejects_indefinite() {
        let a = SymMatrix::from_diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(MetricMatrix::new(a), Err(Error::NotPsd { .. })));
        let z = MetricMatrix::new(SymMatrix::zeros(3)).unwrap();
        assert_eq!(z.rank, 0);
    }

    #[test]
    fn normalized_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = generate_metric_orthonormal(6, 2, &mut rng).unwrap();
        assert_eq!(normalized_error(&truth, &truth).unwrap(), 0.0);
        let zero = MetricMatrix::new(SymMatrix::zeros(6)).unwrap();
        assert_relative_eq!(normalized_error(&zero, &truth).unwrap(), 1.0, epsilon = 1e-15);
        let twice = truth.scale(2.0).unwrap();
        assert_relative_eq!(normalized_error(&twice, &truth).unwrap(), 1.0, epsilon = 1e-14);
        let other = MetricMatrix::new(SymMatrix::identity(5)).unwrap();
        assert!(matches!(normalized_error(&other, &truth), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn mahalanobis_examples() {
        let id = MetricMatrix::new(SymMatrix::identity(2)).unwrap();
        let x = DVector::from_vec(vec![3.0, 4.0]);
        let o = DVector::zeros(2);
        assert_eq!(mahalanobis_sq(&x, &o, &id).unwrap(), 25.0);
        let d23 = MetricMatrix::new(SymMatrix::from_diagonal(&[2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(mahalanobis_sq(&DVector::from_vec(vec![1.0, 1.0]), &o, &d23).unwrap(), 5.0);
        assert_eq!(mahalanobis_sq(&x, &x, &d23).unwrap(), 0.0);
        assert!(mahalanobis_sq(&DVector::zeros(3), &o, &d23).is_err());
    }
}
