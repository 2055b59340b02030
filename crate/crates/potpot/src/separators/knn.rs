//! k-NN on the pot-pot plot with leave-one-out selection of k.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotPotPlot;
use crate::separators::argmax_prior_tie;

/// Trained k-NN rule: the reference plot and the selected neighbor count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnSeparator {
    pub k: usize,
    pub reference: PotPotPlot,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row-major copy of the plot coordinates.
fn flat_rows(plot: &PotPotPlot) -> Vec<f64> {
    let (n, q) = (plot.n(), plot.q());
    let mut flat = vec![0.0; n * q];
    for i in 0..n {
        for j in 0..q {
            flat[i * q + j] = plot.z[(i, j)];
        }
    }
    flat
}

/// Fills `best` with the k nearest rows of the row-major matrix `z` to
/// `target`, sorted ascending by (squared distance, row index); `skip`
/// excludes one row for leave-one-out. Bounded insertion keeps the scan at
/// one comparison per row in the common case.
pub(crate) fn nearest_into(
    z: &[f64],
    ncols: usize,
    target: &[f64],
    skip: usize,
    k: usize,
    best: &mut Vec<(f64, usize)>,
) {
    best.clear();
    let n = z.len() / ncols;
    for j in 0..n {
        if j == skip {
            continue;
        }
        let d = sq_dist(&z[j * ncols..(j + 1) * ncols], target);
        if best.len() == k {
            let &(wd, wi) = best.last().unwrap();
            if d > wd || (d == wd && j > wi) {
                continue;
            }
            best.pop();
        }
        let pos = best.partition_point(|&(bd, bi)| bd < d || (bd == d && bi < j));
        best.insert(pos, (d, j));
    }
}

/// Majority vote over already-selected neighbors; ties by larger prior then
/// smaller class index.
pub(crate) fn knn_vote(best: &[(f64, usize)], labels: &[usize], priors: &[f64]) -> usize {
    let mut counts = vec![0.0f64; priors.len()];
    for &(_, i) in best {
        counts[labels[i] - 1] += 1.0;
    }
    argmax_prior_tie(&counts, priors)
}

/// Leave-one-out selection of k on row-major data: for every k in 1..=k_max
/// counts the LOO misclassifications and returns the best k, ties toward the
/// smaller k.
pub(crate) fn select_k_loo(
    z: &[f64],
    ncols: usize,
    labels: &[usize],
    priors: &[f64],
    k_max: usize,
) -> usize {
    let n = z.len() / ncols;
    let q = priors.len();
    let mut errors = vec![0usize; k_max + 1];
    let mut best = Vec::with_capacity(k_max + 1);
    let mut counts = vec![0.0f64; q];
    for i in 0..n {
        nearest_into(z, ncols, &z[i * ncols..(i + 1) * ncols], i, k_max, &mut best);
        counts.iter_mut().for_each(|c| *c = 0.0);
        for (rank, &(_, nb)) in best.iter().enumerate() {
            counts[labels[nb] - 1] += 1.0;
            if argmax_prior_tie(&counts, priors) != labels[i] {
                errors[rank + 1] += 1;
            }
        }
    }
    let mut k = 1;
    for cand in 2..=k_max {
        if errors[cand] < errors[k] {
            k = cand;
        }
    }
    k
}

/// Selects k in {1..k_max} minimizing the leave-one-out misclassification
/// rate on the plot; ties toward smaller k.
pub fn train_knn_plot(plot: &PotPotPlot, k_max: usize) -> Result<KnnSeparator> {
    let n = plot.n();
    if n == 0 {
        return Err(Error::EmptyPlot);
    }
    if k_max == 0 || k_max >= n {
        return Err(Error::InvalidKMax { k_max, n });
    }
    let mut class_counts = vec![0usize; plot.q()];
    for &l in &plot.labels {
        class_counts[l - 1] += 1;
    }
    if class_counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidDataset(
            "k-NN plot training needs at least 2 points per class".into(),
        ));
    }
    let flat = flat_rows(plot);
    let k = select_k_loo(&flat, plot.q(), &plot.labels, &plot.priors, k_max);
    Ok(KnnSeparator { k, reference: plot.clone() })
}

/// Majority label among the k nearest reference rows; distance ties by
/// reference row order, vote ties by larger prior then smaller index.
pub fn classify_knn_plot(sep: &KnnSeparator, z: &[f64]) -> usize {
    let plot = &sep.reference;
    let flat = flat_rows(plot);
    let mut best = Vec::with_capacity(sep.k);
    nearest_into(&flat, plot.q(), z, usize::MAX, sep.k, &mut best);
    knn_vote(&best, &plot.labels, &plot.priors)
}

/// Leave-one-out misclassification count on the reference plot for a fixed k.
/// Test oracle companion: a plain O(n²) rescan independent of the incremental
/// selection loop above.
pub fn loo_error_for_k(plot: &PotPotPlot, k: usize) -> usize {
    let n = plot.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| plot.row(i)).collect();
    let mut errs = 0;
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            (sq_dist(&rows[a], &rows[i]), a)
                .partial_cmp(&(sq_dist(&rows[b], &rows[i]), b))
                .unwrap()
        });
        let mut counts = vec![0.0f64; plot.q()];
        for &nb in order.iter().take(k) {
            counts[plot.labels[nb] - 1] += 1.0;
        }
        if argmax_prior_tie(&counts, &plot.priors) != plot.labels[i] {
            errs += 1;
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn plot_from_rows(rows: &[(f64, f64, usize)]) -> PotPotPlot {
        let n = rows.len();
        let mut z = DMatrix::zeros(n, 2);
        let mut labels = Vec::with_capacity(n);
        for (i, &(a, b, l)) in rows.iter().enumerate() {
            z[(i, 0)] = a;
            z[(i, 1)] = b;
            labels.push(l);
        }
        let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
        let priors = vec![n1 / n as f64, 1.0 - n1 / n as f64];
        PotPotPlot { z, labels, priors }
    }

    #[test]
    fn nearest_respects_row_order_on_ties() {
        // rows 1 and 3 are equidistant from the target; row 1 must come first
        let z = vec![0.0, 0.0, 1.0, 0.0, 5.0, 5.0, 1.0, 0.0];
        let mut best = Vec::new();
        nearest_into(&z, 2, &[0.5, 0.0], usize::MAX, 2, &mut best);
        assert_eq!(best.iter().map(|&(_, i)| i).collect::<Vec<_>>(), vec![0, 1]);
        nearest_into(&z, 2, &[1.0, 0.0], usize::MAX, 3, &mut best);
        assert_eq!(best.iter().map(|&(_, i)| i).collect::<Vec<_>>(), vec![1, 3, 0]);
    }

    #[test]
    fn well_separated_picks_k1() {
        let plot = plot_from_rows(&[
            (0.0, 1.0, 1),
            (0.1, 1.1, 1),
            (0.0, 1.2, 1),
            (1.0, 0.0, 2),
            (1.1, 0.1, 2),
            (1.2, 0.0, 2),
        ]);
        let sep = train_knn_plot(&plot, 4).unwrap();
        assert_eq!(sep.k, 1);
    }

    #[test]
    fn k_max_equal_n_is_rejected() {
        let plot = plot_from_rows(&[(0.0, 1.0, 1), (0.1, 1.1, 1), (1.0, 0.0, 2), (1.1, 0.1, 2)]);
        assert!(matches!(
            train_knn_plot(&plot, 4),
            Err(Error::InvalidKMax { k_max: 4, n: 4 })
        ));
    }

    #[test]
    fn classify_at_reference_point_with_k1() {
        let plot = plot_from_rows(&[
            (0.0, 1.0, 1),
            (0.3, 0.9, 1),
            (1.0, 0.0, 2),
            (0.9, 0.3, 2),
        ]);
        let sep = KnnSeparator { k: 1, reference: plot };
        assert_eq!(classify_knn_plot(&sep, &[0.3, 0.9]), 1);
        assert_eq!(classify_knn_plot(&sep, &[0.9, 0.3]), 2);
    }

    #[test]
    fn vote_tie_resolved_by_prior() {
        // z equidistant to one point of each class, k=2; class 1 has the
        // larger prior through an extra far-away point
        let plot = plot_from_rows(&[
            (0.0, 1.0, 1),
            (1.0, 0.0, 2),
            (9.0, 9.0, 1),
            (8.0, 8.0, 1),
            (10.0, 10.0, 2),
        ]);
        let sep = KnnSeparator { k: 2, reference: plot };
        assert_eq!(classify_knn_plot(&sep, &[0.5, 0.5]), 1);
    }

    #[test]
    fn zero_resubstitution_error_at_k1_on_distinct_rows() {
        let plot = plot_from_rows(&[
            (0.0, 1.0, 1),
            (0.2, 0.8, 1),
            (0.7, 0.1, 2),
            (1.0, 0.0, 2),
        ]);
        assert_eq!(loo_error_for_k(&plot, 1), 0);
        let sep = KnnSeparator { k: 1, reference: plot.clone() };
        for i in 0..plot.n() {
            assert_eq!(classify_knn_plot(&sep, &plot.row(i)), plot.labels[i]);
        }
    }

    #[test]
    fn checkerboard_selection_matches_brute_force() {
        // labels alternate along one axis; the selected k's LOO error must
        // equal an independent recount, and no other k may beat it
        let mut rows = Vec::new();
        for i in 0..24 {
            let label = if i % 2 == 0 { 1 } else { 2 };
            rows.push((i as f64, 0.1 * ((i * 7) % 5) as f64, label));
        }
        let plot = plot_from_rows(&rows);
        let k_max = 9;
        let sep = train_knn_plot(&plot, k_max).unwrap();
        let chosen_err = loo_error_for_k(&plot, sep.k);
        for k in 1..=k_max {
            let e = loo_error_for_k(&plot, k);
            assert!(chosen_err <= e, "k={k} has error {e} < chosen {chosen_err}");
            if e == chosen_err {
                assert!(sep.k <= k, "tie must resolve to the smaller k");
                break;
            }
        }
    }
}
