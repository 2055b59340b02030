//! Decision rules on the pot-pot plot (reused on DD-plots): the diagonal
//! (maximum-potential) rule, k-NN on the plot, and the α-procedure.
//!
//! All tie rules are fixed: value ties resolve toward the class with the
//! larger prior, then the smaller class index.

mod alpha;
mod knn;

pub use alpha::{
    classify_alpha, exact_origin_line_search, train_alpha, train_alpha_fixed_degree,
    AlphaSeparator, Monomial,
};
pub use knn::{classify_knn_plot, loo_error_for_k, train_knn_plot, KnnSeparator};
pub(crate) use knn::{knn_vote, nearest_into, select_k_loo};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::potentials::PotPotPlot;

/// Which separator to train; configuration only, no fitted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeparatorKind {
    Diagonal,
    /// `k_max = None` uses the default schedule max(10, ⌈√n⌉), capped at n−1.
    Knn { k_max: Option<usize> },
    Alpha { max_degree: usize },
}

impl SeparatorKind {
    pub fn knn() -> Self {
        SeparatorKind::Knn { k_max: None }
    }

    pub fn alpha() -> Self {
        SeparatorKind::Alpha { max_degree: 3 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SeparatorKind::Diagonal => "diagonal",
            SeparatorKind::Knn { .. } => "knn",
            SeparatorKind::Alpha { .. } => "alpha",
        }
    }
}

/// Default neighbor budget for k selection on a plot of n points.
pub fn default_k_max(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).max(10).min(n.saturating_sub(1)).max(1)
}

/// A trained decision rule on the plot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Separator {
    Diagonal { priors: Vec<f64> },
    Knn(KnnSeparator),
    Alpha(AlphaSeparator),
}

impl Separator {
    pub fn train(kind: SeparatorKind, plot: &PotPotPlot) -> Result<Self> {
        match kind {
            SeparatorKind::Diagonal => Ok(Separator::Diagonal { priors: plot.priors.clone() }),
            SeparatorKind::Knn { k_max } => {
                let k_max = k_max.unwrap_or_else(|| default_k_max(plot.n()));
                Ok(Separator::Knn(train_knn_plot(plot, k_max)?))
            }
            SeparatorKind::Alpha { max_degree } => {
                Ok(Separator::Alpha(train_alpha(plot, max_degree as u32)?))
            }
        }
    }

    /// Classifies a potential vector; returns a class index in 1..=q.
    pub fn classify(&self, z: &[f64]) -> usize {
        match self {
            Separator::Diagonal { priors } => classify_diagonal(z, priors),
            Separator::Knn(sep) => classify_knn_plot(sep, z),
            Separator::Alpha(sep) => classify_alpha(sep, z),
        }
    }
}

/// Argmax of the potential vector; ties toward the larger prior, then the
/// smaller index. Returns a 1-based class index.
pub fn classify_diagonal(z: &[f64], priors: &[f64]) -> usize {
    argmax_prior_tie(z, priors)
}

/// Shared tie rule: largest value, then largest prior, then smallest index.
pub(crate) fn argmax_prior_tie(values: &[f64], priors: &[f64]) -> usize {
    let mut best = 0usize;
    for i in 1..values.len() {
        if values[i] > values[best]
            || (values[i] == values[best] && priors[i] > priors[best])
        {
            best = i;
        }
    }
    best + 1
}
