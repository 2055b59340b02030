//! Shared numeric primitives: covariance estimation, symmetric inverse square
//! root with pseudoinverse fallback, univariate normal CDF and least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenvalue tolerance separating genuine rank deficiency from round-off.
pub const EIGEN_TOL: f64 = 1e-9;

/// A symmetric d×d matrix. Construction checks symmetry to 1e-12 relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSymmetric);
        }
        let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        for i in 0..m.nrows() {
            for j in (i + 1)..m.ncols() {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from a diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
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
}

/// Empirical covariance with divisor n−1.
pub fn covariance_of(points: &[DVector<f64>]) -> Result<SymMatrix> {
    if points.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let d = points[0].len();
    let n = points.len();
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += p;
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let c = p - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    // syger fills the lower triangle only
    for i in 0..d {
        for j in (i + 1)..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    Ok(SymMatrix(cov))
}

pub fn mean_of(points: &[DVector<f64>]) -> DVector<f64> {
    let d = points[0].len();
    let mut mean = DVector::zeros(d);
    for p in points {
        mean += p;
    }
    mean / points.len() as f64
}

/// Symmetric (pseudo) inverse square root of a PSD matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdRoot {
    /// Q Λ⁺^{-1/2} Qᵀ on the retained subspace.
    pub root_inv: DMatrix<f64>,
    /// Number of retained eigenvalues.
    pub rank: usize,
    /// Sum of logs of the retained eigenvalues (log-determinant on the subspace).
    pub log_det: f64,
}

/// Eigendecomposes `m` and inverts the square root on the subspace of
/// eigenvalues above `tol · λ_max`; smaller eigenvalues are treated as zero.
pub fn inv_sqrt_psd(m: &SymMatrix, tol: f64) -> Result<PsdRoot> {
    let d = m.dim();
    let eig = m.0.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(lambda_max > 0.0) {
        return Err(Error::ZeroMatrix);
    }
    let cutoff = tol * lambda_max;
    let mut root_inv = DMatrix::zeros(d, d);
    let mut rank = 0usize;
    let mut log_det = 0.0f64;
    for k in 0..d {
        let lam = eig.eigenvalues[k];
        if lam > cutoff {
            rank += 1;
            log_det += lam.ln();
            let q = eig.eigenvectors.column(k);
            root_inv.syger(1.0 / lam.sqrt(), &q, &q, 1.0);
        }
    }
    if rank == 0 {
        return Err(Error::ZeroMatrix);
    }
    for i in 0..d {
        for j in (i + 1)..d {
            root_inv[(i, j)] = root_inv[(j, i)];
        }
    }
    Ok(PsdRoot { root_inv, rank, log_det })
}

/// Symmetric pseudoinverse of a PSD matrix (Q Λ⁺^{-1} Qᵀ).
pub fn pinv_psd(m: &SymMatrix, tol: f64) -> Result<PsdRoot> {
    let r = inv_sqrt_psd(m, tol)?;
    Ok(PsdRoot {
        root_inv: &r.root_inv * &r.root_inv,
        rank: r.rank,
        log_det: r.log_det,
    })
}

/// Affine whitening transform x ↦ Σ̂^{-1/2}(x − x̄), with pseudoinverse fallback
/// on rank-deficient samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpheringTransform {
    pub center: DVector<f64>,
    pub root_inv: DMatrix<f64>,
    pub rank: usize,
    /// Log-determinant of the covariance on the retained subspace.
    pub log_det: f64,
}

impl SpheringTransform {
    /// Fits the transform on a sample: center at the mean, whiten with the
    /// empirical covariance.
    pub fn fit(points: &[DVector<f64>]) -> Result<Self> {
        let cov = covariance_of(points)?;
        Self::from_center_cov(mean_of(points), &cov)
    }

    pub fn from_center_cov(center: DVector<f64>, cov: &SymMatrix) -> Result<Self> {
        let root = inv_sqrt_psd(cov, EIGEN_TOL)?;
        Ok(SpheringTransform {
            center,
            root_inv: root.root_inv,
            rank: root.rank,
            log_det: root.log_det,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.root_inv * (x - &self.center)
    }

    pub fn is_rank_deficient(&self) -> bool {
        self.rank < self.dim()
    }
}

/// Standard normal CDF Φ(x).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Ordinary least squares y = a + b·x. Returns (a, b).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 paired points, got {}/{}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::VerticalFit);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    Ok((my - b * mx, b))
}

/// Least squares quadratic y = a + b·x + c·x². Returns (a, b, c).
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() < 3 || xs.len() != ys.len() {
        return Err(Error::DegenerateSample(format!(
            "need at least 3 paired points, got {}/{}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len();
    let mut design = DMatrix::zeros(n, 3);
    for (i, &x) in xs.iter().enumerate() {
        design[(i, 0)] = 1.0;
        design[(i, 1)] = x;
        design[(i, 2)] = x * x;
    }
    let y = DVector::from_row_slice(ys);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * y;
    let sol = xtx
        .lu()
        .solve(&xty)
        .ok_or(Error::VerticalFit)?;
    Ok((sol[0], sol[1], sol[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn covariance_two_points_1d() {
        let cov = covariance_of(&[dvector![0.0], dvector![2.0]]).unwrap();
        assert_relative_eq!(cov.as_matrix()[(0, 0)], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn covariance_cross_pattern() {
        let pts = vec![
            dvector![1.0, 0.0],
            dvector![0.0, 1.0],
            dvector![-1.0, 0.0],
            dvector![0.0, -1.0],
        ];
        let cov = covariance_of(&pts).unwrap();
        let m = cov.as_matrix();
        assert_relative_eq!(m[(0, 0)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m[(1, 1)], 2.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn covariance_monte_carlo_diag() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let norm = rand_distr::StandardNormal;
        let pts: Vec<_> = (0..100)
            .map(|_| {
                let a: f64 = norm.sample(&mut rng);
                let b: f64 = norm.sample(&mut rng);
                dvector![a, b * 5.0f64.sqrt()]
            })
            .collect();
        let cov = covariance_of(&pts).unwrap();
        assert!((cov.as_matrix()[(0, 0)] - 1.0).abs() < 0.5);
        assert!((cov.as_matrix()[(1, 1)] - 5.0).abs() < 0.5);
    }

    #[test]
    fn covariance_rejects_single_point() {
        assert!(matches!(
            covariance_of(&[dvector![0.0]]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn inv_sqrt_identity() {
        let m = SymMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let r = inv_sqrt_psd(&m, 1e-10).unwrap();
        assert_eq!(r.rank, 3);
        assert_relative_eq!(r.root_inv, DMatrix::identity(3, 3), epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_rank_one() {
        let m = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 0.0])).unwrap();
        let r = inv_sqrt_psd(&m, 1e-10).unwrap();
        assert_eq!(r.rank, 1);
        assert_relative_eq!(r.root_inv[(0, 0)], 0.5, epsilon = 1e-12);
        assert_relative_eq!(r.root_inv[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_whitens() {
        let raw = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let m = SymMatrix::new(raw.clone()).unwrap();
        let r = inv_sqrt_psd(&m, 1e-12).unwrap();
        let prod = &r.root_inv * raw * r.root_inv.transpose();
        assert_relative_eq!(prod, DMatrix::identity(2, 2), epsilon = 1e-10);
    }

    #[test]
    fn inv_sqrt_zero_matrix() {
        let m = SymMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(inv_sqrt_psd(&m, 1e-10), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-12);
        // erf-series oracle values; -1.5 corresponds to the 6.7% Bayes error of
        // the third location set, -2.0 to the 2.28% of the fourth.
        assert_relative_eq!(normal_cdf(-1.5), 0.066807201268858, epsilon = 1e-9);
        assert_relative_eq!(normal_cdf(-2.0), 0.022750131948179, epsilon = 1e-9);
        assert_relative_eq!(normal_cdf(1.0) + normal_cdf(-1.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fit_line_cases() {
        assert_eq!(fit_line(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), (0.0, 1.0));
        let (a, b) = fit_line(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_relative_eq!(a, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b, 0.0, epsilon = 1e-14);
        // closed-form by hand: x̄=1, ȳ=5/3, sxy=3, sxx=2
        let (a, b) = fit_line(&[0.0, 1.0, 2.0], &[0.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(a, 1.0 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(b, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn fit_line_vertical() {
        assert!(matches!(
            fit_line(&[1.0, 1.0], &[0.0, 2.0]),
            Err(Error::VerticalFit)
        ));
    }

    #[test]
    fn sphering_whitens_sample() {
        use rand::SeedableRng;
        use rand_distr::Distribution;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let norm = rand_distr::StandardNormal;
        let pts: Vec<_> = (0..200)
            .map(|_| {
                let a: f64 = norm.sample(&mut rng);
                let b: f64 = norm.sample(&mut rng);
                dvector![2.0 * a + b + 3.0, a - b]
            })
            .collect();
        let t = SpheringTransform::fit(&pts).unwrap();
        let sphered: Vec<_> = pts.iter().map(|p| t.apply(p)).collect();
        let cov = covariance_of(&sphered).unwrap();
        assert_relative_eq!(cov.as_matrix(), &DMatrix::identity(2, 2), epsilon = 1e-6);
    }
}
