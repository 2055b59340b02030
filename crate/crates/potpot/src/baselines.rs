//! Reference classifiers for the comparison tables: the Bayes rule on known
//! densities, LDA, QDA, k-NN in the original space, and depth-depth plot
//! classifiers built from Mahalanobis or spatial depth.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::datagen::Density;
use crate::error::{Error, Result};
use crate::numkit::{covariance_of, mean_of, pinv_psd, SpheringTransform, EIGEN_TOL};
use crate::potentials::PotPotPlot;
use crate::separators::{
    argmax_prior_tie, default_k_max, knn_vote, nearest_into, select_k_loo, Separator,
    SeparatorKind,
};

/// Depth notions available for DD-plot classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DepthKind {
    Mahalanobis,
    Spatial,
}

/// Baseline selector. `Bayes` cannot be trained from data alone; build it
/// with [`bayes_classifier`] from a generated set's true densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineKind {
    Bayes,
    Lda,
    Qda,
    KnnOriginal { k_max: Option<usize> },
    DdPlot { depth: DepthKind, separator: SeparatorKind },
}

impl BaselineKind {
    pub fn name(&self) -> String {
        match self {
            BaselineKind::Bayes => "bayes".into(),
            BaselineKind::Lda => "lda".into(),
            BaselineKind::Qda => "qda".into(),
            BaselineKind::KnnOriginal { .. } => "knn".into(),
            BaselineKind::DdPlot { depth, separator } => {
                let d = match depth {
                    DepthKind::Mahalanobis => "mah",
                    DepthKind::Spatial => "spat",
                };
                format!("dd-{d}-{}", separator.name())
            }
        }
    }
}

/// Gaussian discriminant shared by LDA and QDA: per-class mean, (pseudo)
/// inverse covariance, log pseudo-determinant and prior.
#[derive(Debug, Clone)]
struct ClassDiscriminant {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
    prior: f64,
}

/// A trained baseline classifier.
pub enum Baseline {
    Bayes { priors: Vec<f64>, densities: Vec<Density> },
    Lda { classes: Vec<ClassDiscriminantBox>, warnings: Vec<String> },
    Qda { classes: Vec<ClassDiscriminantBox>, warnings: Vec<String> },
    KnnOriginal(KnnOriginalModel),
    DdPlot(DdPlotModel),
}

/// Public opaque wrapper so the discriminant internals stay private.
pub struct ClassDiscriminantBox(ClassDiscriminant);

/// k-NN on jointly sphered coordinates with LOO-selected k.
pub struct KnnOriginalModel {
    transform: SpheringTransform,
    flat: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    priors: Vec<f64>,
    pub k: usize,
}

/// DD-plot classifier: per-class depth evaluators plus a separator trained on
/// the training points' depth pairs.
pub struct DdPlotModel {
    evals: Vec<DepthEval>,
    pub separator: Separator,
}

/// The Bayes rule argmax_j p_j f_j for known class densities.
pub fn bayes_classifier(priors: Vec<f64>, densities: Vec<Density>) -> Baseline {
    Baseline::Bayes { priors, densities }
}

/// Trains a data-driven baseline. Singular covariances fall back to the
/// pseudoinverse on the retained eigenspace, with a recorded warning.
pub fn train_baseline(kind: BaselineKind, data: &LabeledDataset) -> Result<Baseline> {
    match kind {
        BaselineKind::Bayes => Err(Error::InvalidSpec(
            "the Bayes rule needs true densities; use bayes_classifier".into(),
        )),
        BaselineKind::Lda => train_lda(data),
        BaselineKind::Qda => train_qda(data),
        BaselineKind::KnnOriginal { k_max } => train_knn_original(data, k_max),
        BaselineKind::DdPlot { depth, separator } => {
            Ok(Baseline::DdPlot(train_dd_plot(depth, separator, data)?))
        }
    }
}

fn train_lda(data: &LabeledDataset) -> Result<Baseline> {
    let q = data.q();
    let n = data.n();
    let d = data.dim();
    let mut warnings = Vec::new();
    let priors = data.priors();
    let means: Vec<DVector<f64>> = (1..=q).map(|j| mean_of(&data.class_points(j))).collect();
    // pooled within-class covariance with divisor n − q
    let mut pooled = DMatrix::zeros(d, d);
    for i in 0..n {
        let c = data.point(i) - &means[data.label(i) - 1];
        pooled += &c * c.transpose();
    }
    if n <= q {
        return Err(Error::DegenerateSample("too few points for a pooled covariance".into()));
    }
    pooled /= (n - q) as f64;
    let sym = crate::numkit::SymMatrix::new(symmetrize(pooled))?;
    let root = pinv_psd(&sym, EIGEN_TOL)?;
    if root.rank < d {
        warnings.push(format!(
            "pooled covariance is rank deficient (rank {} < {d}); using pseudoinverse",
            root.rank
        ));
    }
    let classes = means
        .into_iter()
        .zip(&priors)
        .map(|(mean, &prior)| {
            ClassDiscriminantBox(ClassDiscriminant {
                mean,
                precision: root.root_inv.clone(),
                log_det: root.log_det,
                prior,
            })
        })
        .collect();
    Ok(Baseline::Lda { classes, warnings })
}

fn train_qda(data: &LabeledDataset) -> Result<Baseline> {
    let q = data.q();
    let d = data.dim();
    let mut warnings = Vec::new();
    let priors = data.priors();
    let mut classes = Vec::with_capacity(q);
    for j in 1..=q {
        let pts = data.class_points(j);
        let cov = covariance_of(&pts)?;
        let root = pinv_psd(&cov, EIGEN_TOL)?;
        if root.rank < d {
            warnings.push(format!(
                "class {j} covariance is rank deficient (rank {} < {d}); using pseudoinverse",
                root.rank
            ));
        }
        classes.push(ClassDiscriminantBox(ClassDiscriminant {
            mean: mean_of(&pts),
            precision: root.root_inv,
            log_det: root.log_det,
            prior: priors[j - 1],
        }));
    }
    Ok(Baseline::Qda { classes, warnings })
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn train_knn_original(data: &LabeledDataset, k_max: Option<usize>) -> Result<Baseline> {
    let n = data.n();
    let transform = SpheringTransform::fit(data.points())?;
    let d = data.dim();
    let mut flat = vec![0.0f64; n * d];
    for i in 0..n {
        let s = transform.apply(data.point(i));
        flat[i * d..(i + 1) * d].copy_from_slice(s.as_slice());
    }
    let k_max = k_max.unwrap_or_else(|| default_k_max(n));
    if k_max == 0 || k_max >= n {
        return Err(Error::InvalidKMax { k_max, n });
    }
    let priors = data.priors();
    let k = select_k_loo(&flat, d, data.labels(), &priors, k_max);
    Ok(Baseline::KnnOriginal(KnnOriginalModel {
        transform,
        flat,
        dim: d,
        labels: data.labels().to_vec(),
        priors,
        k,
    }))
}

/// A fitted depth evaluator for one reference class.
enum DepthEval {
    Mahalanobis { mean: DVector<f64>, precision: DMatrix<f64> },
    Spatial { transform: SpheringTransform, sphered: Vec<DVector<f64>> },
}

impl DepthEval {
    fn fit(kind: DepthKind, reference: &[DVector<f64>]) -> Result<Self> {
        match kind {
            DepthKind::Mahalanobis => {
                let cov = covariance_of(reference)?;
                let root = pinv_psd(&cov, EIGEN_TOL)?;
                Ok(DepthEval::Mahalanobis { mean: mean_of(reference), precision: root.root_inv })
            }
            DepthKind::Spatial => {
                let transform = SpheringTransform::fit(reference)?;
                let sphered = reference.iter().map(|p| transform.apply(p)).collect();
                Ok(DepthEval::Spatial { transform, sphered })
            }
        }
    }

    fn depth(&self, x: &DVector<f64>) -> f64 {
        match self {
            DepthEval::Mahalanobis { mean, precision } => {
                let c = x - mean;
                let d2 = (precision * &c).dot(&c);
                1.0 / (1.0 + d2)
            }
            DepthEval::Spatial { transform, sphered } => {
                let xt = transform.apply(x);
                let mut avg = DVector::zeros(xt.len());
                for p in sphered {
                    let diff = &xt - p;
                    let norm = diff.norm();
                    if norm > 0.0 {
                        avg += diff / norm;
                    }
                }
                avg /= sphered.len() as f64;
                1.0 - avg.norm()
            }
        }
    }
}

/// Mahalanobis depth 1 / (1 + (x−μ̂)ᵀ Σ̂⁺ (x−μ̂)) of x with respect to a sample.
pub fn mahalanobis_depth(x: &DVector<f64>, reference: &[DVector<f64>]) -> Result<f64> {
    Ok(DepthEval::fit(DepthKind::Mahalanobis, reference)?.depth(x))
}

/// Spatial (L₁) depth 1 − ‖avg of unit vectors toward x̃‖, computed in
/// sphered coordinates so the value is affine invariant.
pub fn spatial_depth(x: &DVector<f64>, reference: &[DVector<f64>]) -> Result<f64> {
    Ok(DepthEval::fit(DepthKind::Spatial, reference)?.depth(x))
}

/// Trains a DD-plot classifier: maps every training point to its pair of
/// class depths and trains the chosen separator there. The diagonal
/// separator then coincides with the maximum-depth rule.
pub fn train_dd_plot(
    depth: DepthKind,
    sep_kind: SeparatorKind,
    data: &LabeledDataset,
) -> Result<DdPlotModel> {
    if data.q() != 2 {
        return Err(Error::NotBinary(data.q()));
    }
    let evals: Vec<DepthEval> = (1..=2)
        .map(|j| DepthEval::fit(depth, &data.class_points(j)))
        .collect::<Result<_>>()?;
    let n = data.n();
    let mut z = DMatrix::zeros(n, 2);
    for i in 0..n {
        for j in 0..2 {
            z[(i, j)] = evals[j].depth(data.point(i));
        }
    }
    let plot = PotPotPlot { z, labels: data.labels().to_vec(), priors: data.priors() };
    let separator = Separator::train(sep_kind, &plot)?;
    Ok(DdPlotModel { evals, separator })
}

impl DdPlotModel {
    pub fn depths(&self, x: &DVector<f64>) -> [f64; 2] {
        [self.evals[0].depth(x), self.evals[1].depth(x)]
    }
}

impl Baseline {
    /// Classifies a point; returns a class index in 1..=q.
    pub fn classify(&self, x: &DVector<f64>) -> usize {
        match self {
            Baseline::Bayes { priors, densities } => {
                let scores: Vec<f64> =
                    priors.iter().zip(densities).map(|(p, f)| p * f(x)).collect();
                argmax_prior_tie(&scores, priors)
            }
            Baseline::Lda { classes, .. } => {
                // linear discriminant: xᵀΣ⁻¹μ_j − ½μ_jᵀΣ⁻¹μ_j + ln p_j
                let scores: Vec<f64> = classes
                    .iter()
                    .map(|ClassDiscriminantBox(c)| {
                        let sm = &c.precision * &c.mean;
                        x.dot(&sm) - 0.5 * c.mean.dot(&sm) + c.prior.ln()
                    })
                    .collect();
                let priors: Vec<f64> =
                    classes.iter().map(|ClassDiscriminantBox(c)| c.prior).collect();
                argmax_prior_tie(&scores, &priors)
            }
            Baseline::Qda { classes, .. } => {
                let scores: Vec<f64> = classes
                    .iter()
                    .map(|ClassDiscriminantBox(c)| {
                        let diff = x - &c.mean;
                        let quad = (&c.precision * &diff).dot(&diff);
                        -0.5 * c.log_det - 0.5 * quad + c.prior.ln()
                    })
                    .collect();
                let priors: Vec<f64> =
                    classes.iter().map(|ClassDiscriminantBox(c)| c.prior).collect();
                argmax_prior_tie(&scores, &priors)
            }
            Baseline::KnnOriginal(m) => {
                let xt = m.transform.apply(x);
                let mut best = Vec::with_capacity(m.k + 1);
                nearest_into(&m.flat, m.dim, xt.as_slice(), usize::MAX, m.k, &mut best);
                knn_vote(&best, &m.labels, &m.priors)
            }
            Baseline::DdPlot(m) => {
                let d = m.depths(x);
                m.separator.classify(&d)
            }
        }
    }

    /// Misclassification rate on a labeled dataset.
    pub fn error_on(&self, data: &LabeledDataset) -> f64 {
        let errs = (0..data.n())
            .filter(|&i| self.classify(data.point(i)) != data.label(i))
            .count();
        errs as f64 / data.n() as f64
    }

    pub fn warnings(&self) -> &[String] {
        match self {
            Baseline::Lda { warnings, .. } | Baseline::Qda { warnings, .. } => warnings,
            _ => &[],
        }
    }
}

/// Relative efficiency ε_classifier / ε_reference. Both zero → 1; a zero
/// reference with a nonzero numerator has no defined ratio.
pub fn efficiency_index(err: f64, ref_err: f64) -> Result<f64> {
    if ref_err == 0.0 {
        if err == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::UndefinedEfficiency);
    }
    Ok(err / ref_err)
}
