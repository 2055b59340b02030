//! Gaussian kernel potential estimation under joint or separate sphering,
//! and the pot-pot transform.
//!
//! The potential of class j at x is the prior-weighted kernel density
//! estimate φ̂_j(x) = (1/n) Σ_i |det H_j|^{-1/2} K(H_j^{-1/2}(x − x_ji)) with
//! H_j = h_j² Σ̂_j. Training points are stored pre-sphered so that every
//! evaluation is a spherical kernel sum over squared distances.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numkit::{covariance_of, mean_of, SpheringTransform, SymMatrix};

/// Legal bandwidth range; below the lower bound kernel sums underflow the
/// double representation, above the upper bound the kernels are flat.
pub const H2_MIN: f64 = 1e-3;
pub const H2_MAX: f64 = 1e3;

/// Whether the classes share one pooled sphering or get individual ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScalingMode {
    Joint,
    Separate,
}

/// Bandwidths h² for a model: one shared value under joint scaling, one per
/// class under separate scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthConfig {
    pub mode: ScalingMode,
    pub h2: Vec<f64>,
}

impl BandwidthConfig {
    pub fn joint(h2: f64) -> Self {
        BandwidthConfig { mode: ScalingMode::Joint, h2: vec![h2] }
    }

    pub fn separate(h2: Vec<f64>) -> Self {
        BandwidthConfig { mode: ScalingMode::Separate, h2 }
    }

    pub fn validate(&self, q: usize) -> Result<()> {
        let expected = match self.mode {
            ScalingMode::Joint => 1,
            ScalingMode::Separate => q,
        };
        if self.h2.len() != expected {
            return Err(Error::BandwidthCount { expected, got: self.h2.len() });
        }
        for &h2 in &self.h2 {
            if !(h2 >= H2_MIN && h2 <= H2_MAX) {
                return Err(Error::BandwidthOutOfRange(h2));
            }
        }
        Ok(())
    }

    /// Bandwidth of class j (1-based).
    pub fn class_h2(&self, j: usize) -> f64 {
        match self.mode {
            ScalingMode::Joint => self.h2[0],
            ScalingMode::Separate => self.h2[j - 1],
        }
    }
}

/// The spherical Gaussian kernel K(u) = (2π)^{-d/2} exp(-uᵀu/2).
pub fn gaussian_kernel(u: &DVector<f64>) -> f64 {
    let d = u.len() as f64;
    (2.0 * std::f64::consts::PI).powf(-d / 2.0) * (-0.5 * u.dot(u)).exp()
}

/// Per-class fitted state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassModel {
    pub prior: f64,
    pub transform: SpheringTransform,
    pub h2: f64,
    /// Class training points in sphered coordinates.
    pub train: Vec<DVector<f64>>,
}

/// Fitted potential model for all classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialModel {
    pub classes: Vec<ClassModel>,
    pub n_total: usize,
    pub dim: usize,
    pub mode: ScalingMode,
    /// Non-fatal events recorded during the fit (pseudoinverse fallbacks).
    pub warnings: Vec<String>,
}

impl PotentialModel {
    pub fn q(&self) -> usize {
        self.classes.len()
    }

    pub fn priors(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.prior).collect()
    }
}

/// Fits the per-class sphering and stores pre-transformed training points.
///
/// Joint mode pools all classes for one mean/covariance; separate mode fits
/// each class on its own points. Singular covariances fall back to the
/// pseudoinverse subspace with a recorded warning.
pub fn fit_potential_model(data: &LabeledDataset, cfg: &BandwidthConfig) -> Result<PotentialModel> {
    cfg.validate(data.q())?;
    let n = data.n();
    let mut warnings = Vec::new();

    let pooled = match cfg.mode {
        ScalingMode::Joint => {
            let cov = covariance_of(data.points())?;
            let t = SpheringTransform::from_center_cov(mean_of(data.points()), &cov)?;
            if t.is_rank_deficient() {
                warnings.push(format!(
                    "pooled covariance is rank deficient (rank {} < {}); using pseudoinverse",
                    t.rank,
                    data.dim()
                ));
            }
            Some(t)
        }
        ScalingMode::Separate => None,
    };

    let mut classes = Vec::with_capacity(data.q());
    for j in 1..=data.q() {
        let points = data.class_points(j);
        let transform = match &pooled {
            Some(t) => t.clone(),
            None => {
                let t = class_sphering(&points, data.dim())?;
                if t.is_rank_deficient() {
                    warnings.push(format!(
                        "class {} covariance is rank deficient (rank {} < {}); using pseudoinverse",
                        j,
                        t.rank,
                        data.dim()
                    ));
                }
                t
            }
        };
        let train = points.iter().map(|p| transform.apply(p)).collect();
        classes.push(ClassModel {
            prior: points.len() as f64 / n as f64,
            transform,
            h2: cfg.class_h2(j),
            train,
        });
    }

    Ok(PotentialModel {
        classes,
        n_total: n,
        dim: data.dim(),
        mode: cfg.mode,
        warnings,
    })
}

/// Per-class sphering: covariance whitening on ≥2 points, identity sphering
/// around the point for a single-point class.
pub(crate) fn class_sphering(points: &[DVector<f64>], d: usize) -> Result<SpheringTransform> {
    if points.len() >= 2 {
        let cov = covariance_of(points)?;
        SpheringTransform::from_center_cov(mean_of(points), &cov)
    } else {
        SpheringTransform::from_center_cov(
            points[0].clone(),
            &SymMatrix::from_diagonal(&vec![1.0; d]),
        )
    }
}

/// log Σᵢ exp(xᵢ); −inf on an empty slice.
pub(crate) fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Log of the constant in front of the kernel sum:
/// −ln n − (r/2)·ln h² − ½·ln det Σ_r − (r/2)·ln 2π,
/// with r the effective rank of the sphering.
pub(crate) fn log_prefactor(n_total: usize, rank: usize, log_det: f64, h2: f64) -> f64 {
    -(n_total as f64).ln()
        - 0.5 * rank as f64 * h2.ln()
        - 0.5 * log_det
        - 0.5 * rank as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Kernel sum from squared sphered distances, computed in the log domain so
/// that narrow-bandwidth sums only underflow when the true value is below
/// exp(−745).
pub(crate) fn kernel_sum_from_sq_dists(sq_dists: &[f64], h2: f64, log_pref: f64) -> f64 {
    if sq_dists.is_empty() {
        return 0.0;
    }
    let lse = log_sum_exp(sq_dists.iter().map(|&d2| -0.5 * d2 / h2));
    (log_pref + lse).exp()
}

/// φ̂_j(x) for class j (1-based).
pub fn potential_at(model: &PotentialModel, x: &DVector<f64>, j: usize) -> Result<f64> {
    if j == 0 || j > model.q() {
        return Err(Error::ClassIndex(j, model.q()));
    }
    if x.len() != model.dim {
        return Err(Error::DimensionMismatch { expected: model.dim, got: x.len() });
    }
    let class = &model.classes[j - 1];
    let xt = class.transform.apply(x);
    let sq_dists: Vec<f64> = class.train.iter().map(|t| (&xt - t).norm_squared()).collect();
    let log_pref = log_prefactor(
        model.n_total,
        class.transform.rank,
        class.transform.log_det,
        class.h2,
    );
    Ok(kernel_sum_from_sq_dists(&sq_dists, class.h2, log_pref))
}

/// The pot-pot plot: the q-vector of potentials of every point, plus labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotPotPlot {
    /// n×q matrix of nonnegative potentials.
    pub z: DMatrix<f64>,
    pub labels: Vec<usize>,
    /// Priors of the model that produced the plot (used by tie rules).
    pub priors: Vec<f64>,
}

impl PotPotPlot {
    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.q()).map(|j| self.z[(i, j)]).collect()
    }
}

/// Maps points to their potential vectors: row per point, column per class.
pub fn pot_pot_transform(model: &PotentialModel, points: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let mut z = DMatrix::zeros(points.len(), model.q());
    for (i, p) in points.iter().enumerate() {
        for j in 1..=model.q() {
            z[(i, j - 1)] = potential_at(model, p, j)?;
        }
    }
    Ok(z)
}

/// Builds the plot of a labeled dataset under a fitted model.
pub fn make_plot(model: &PotentialModel, data: &LabeledDataset) -> Result<PotPotPlot> {
    let z = pot_pot_transform(model, data.points())?;
    Ok(PotPotPlot {
        z,
        labels: data.labels().to_vec(),
        priors: model.priors(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn two_class_data() -> LabeledDataset {
        // sizes 60/40 around two centers
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let t = i as f64 / 10.0;
            points.push(dvector![t.sin() * 0.5, t.cos() * 0.5]);
            labels.push(1);
        }
        for i in 0..40 {
            let t = i as f64 / 7.0;
            points.push(dvector![5.0 + t.sin(), t.cos() * 0.3]);
            labels.push(2);
        }
        LabeledDataset::new(points, labels).unwrap()
    }

    #[test]
    fn kernel_at_zero() {
        assert_relative_eq!(gaussian_kernel(&dvector![0.0]), 0.3989422804014327, epsilon = 1e-12);
        assert_relative_eq!(
            gaussian_kernel(&dvector![0.0, 0.0]),
            0.15915494309189535,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            gaussian_kernel(&dvector![1.0, 1.0]),
            0.15915494309189535 * (-1.0f64).exp(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn priors_from_class_sizes() {
        let data = two_class_data();
        let model = fit_potential_model(&data, &BandwidthConfig::joint(1.0)).unwrap();
        assert_relative_eq!(model.classes[0].prior, 0.6, epsilon = 1e-12);
        assert_relative_eq!(model.classes[1].prior, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn separate_mode_whitens_each_class() {
        let data = two_class_data();
        let model =
            fit_potential_model(&data, &BandwidthConfig::separate(vec![1.0, 1.0])).unwrap();
        for class in &model.classes {
            let cov = covariance_of(&class.train).unwrap();
            let d = class.train[0].len();
            assert_relative_eq!(
                cov.as_matrix(),
                &DMatrix::identity(d, d),
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn joint_mode_shares_transform() {
        let data = two_class_data();
        let model = fit_potential_model(&data, &BandwidthConfig::joint(1.0)).unwrap();
        assert_eq!(model.classes[0].transform.center, model.classes[1].transform.center);
        assert_eq!(model.classes[0].transform.root_inv, model.classes[1].transform.root_inv);
    }

    #[test]
    fn bandwidth_bounds_enforced() {
        let data = two_class_data();
        assert!(matches!(
            fit_potential_model(&data, &BandwidthConfig::joint(1e-4)),
            Err(Error::BandwidthOutOfRange(_))
        ));
        assert!(matches!(
            fit_potential_model(&data, &BandwidthConfig::joint(1e4)),
            Err(Error::BandwidthOutOfRange(_))
        ));
    }

    #[test]
    fn single_point_class_kernel_value() {
        // single-point class, identity sphering, h²=1, n=1:
        // potential at the point itself is (2π)^{-1/2} in d=1
        let class = ClassModel {
            prior: 1.0,
            transform: SpheringTransform::from_center_cov(
                dvector![2.0],
                &SymMatrix::from_diagonal(&[1.0]),
            )
            .unwrap(),
            h2: 1.0,
            train: vec![dvector![0.0]],
        };
        let model = PotentialModel {
            classes: vec![class],
            n_total: 1,
            dim: 1,
            mode: ScalingMode::Separate,
            warnings: vec![],
        };
        let at_center = potential_at(&model, &dvector![2.0], 1).unwrap();
        assert_relative_eq!(at_center, 0.3989422804014327, epsilon = 1e-12);
        let shifted = potential_at(&model, &dvector![3.0], 1).unwrap();
        assert_relative_eq!(shifted, 0.3989422804014327 * (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn class_index_out_of_range() {
        let data = two_class_data();
        let model = fit_potential_model(&data, &BandwidthConfig::joint(1.0)).unwrap();
        assert!(matches!(
            potential_at(&model, &dvector![0.0, 0.0], 3),
            Err(Error::ClassIndex(3, 2))
        ));
        assert!(matches!(
            potential_at(&model, &dvector![0.0, 0.0], 0),
            Err(Error::ClassIndex(0, 2))
        ));
    }

    #[test]
    fn plot_is_positive_and_matches_potential_at() {
        let data = two_class_data();
        let model =
            fit_potential_model(&data, &BandwidthConfig::separate(vec![0.5, 2.0])).unwrap();
        let plot = make_plot(&model, &data).unwrap();
        assert_eq!(plot.n(), data.n());
        assert_eq!(plot.q(), 2);
        for i in 0..plot.n() {
            for j in 1..=2 {
                let z = plot.z[(i, j - 1)];
                assert!(z > 0.0);
                assert_eq!(z, potential_at(&model, data.point(i), j).unwrap());
            }
        }
    }

    #[test]
    fn mirror_symmetry_gives_equal_potentials() {
        // two mirror-image classes across x=0; a point on the axis gets z1 = z2
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let y = (i as f64 - 10.0) / 5.0;
            points.push(dvector![-2.0 + 0.1 * (i as f64 % 3.0), y]);
            labels.push(1);
        }
        for i in 0..20 {
            let y = (i as f64 - 10.0) / 5.0;
            points.push(dvector![2.0 - 0.1 * (i as f64 % 3.0), y]);
            labels.push(2);
        }
        let data = LabeledDataset::new(points, labels).unwrap();
        let model =
            fit_potential_model(&data, &BandwidthConfig::separate(vec![1.0, 1.0])).unwrap();
        let x = dvector![0.0, 0.3];
        let z1 = potential_at(&model, &x, 1).unwrap();
        let z2 = potential_at(&model, &x, 2).unwrap();
        assert_relative_eq!(z1, z2, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn smoothing_flattens_with_growing_bandwidth() {
        let data = two_class_data();
        let mut prev_ratio = f64::INFINITY;
        for &h2 in &[1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3] {
            let model = fit_potential_model(&data, &BandwidthConfig::joint(h2)).unwrap();
            let vals: Vec<f64> = data
                .points()
                .iter()
                .map(|p| potential_at(&model, p, 1).unwrap())
                .collect();
            let ratio = vals.iter().cloned().fold(f64::MIN, f64::max)
                / vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(ratio < prev_ratio, "ratio should decrease: {ratio} vs {prev_ratio}");
            prev_ratio = ratio;
        }
    }
}
