//! The α-procedure: an iterative heuristic that builds a polynomial
//! discriminant on a binary plot by repeatedly choosing the 2-D feature pair
//! and origin line minimizing the empirical misclassification count.
//!
//! The composite feature uses a (cosθ, sinθ) combination, so the angle sweep
//! over lines through the origin is exact rather than a grid approximation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotPotPlot;

/// A term w·z₁ᵃ·z₂ᵇ of the discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub a: u32,
    pub b: u32,
    pub weight: f64,
}

/// Trained α separator: sign of the discriminant polynomial at (z₁, z₂)
/// decides the class; positive means class 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaSeparator {
    pub degree: u32,
    pub monomials: Vec<Monomial>,
    pub priors: Vec<f64>,
}

/// Minimizes the misclassification count over all lines through the origin of
/// a 2-D feature plane. Points are (f, g, is_class1).
///
/// Classification convention: class 1 iff cosθ·f + sinθ·g ≥ 0. The sweep
/// walks the 2n critical angles where a point changes side and returns the
/// midpoint of the best angular gap, so the optimum is exact.
pub fn exact_origin_line_search(points: &[(f64, f64, bool)]) -> Result<(f64, usize)> {
    const TAU: f64 = 2.0 * std::f64::consts::PI;
    let mut base_error = 0usize; // points at the origin: always classified class 1
    // (angle, delta, is_leave): the class-1 arc is closed on both ends, so at
    // exactly the enter angle the point already counts as class 1 and at
    // exactly the leave angle it still does.
    let mut events: Vec<(f64, i32, bool)> = Vec::with_capacity(2 * points.len());
    let mut off_origin = Vec::with_capacity(points.len());
    for &(f, g, is_class1) in points {
        if f == 0.0 && g == 0.0 {
            if !is_class1 {
                base_error += 1;
            }
            continue;
        }
        off_origin.push((f, g, is_class1));
        let psi = g.atan2(f);
        // while θ is inside [ψ−π/2, ψ+π/2] the point is classified class 1
        let enter = (psi - std::f64::consts::FRAC_PI_2).rem_euclid(TAU);
        let leave = (psi + std::f64::consts::FRAC_PI_2).rem_euclid(TAU);
        let delta = if is_class1 { -1 } else { 1 };
        events.push((enter, delta, false));
        events.push((leave, -delta, true));
    }
    if off_origin.is_empty() {
        return Err(Error::AllAtOrigin);
    }
    // enters sort before leaves at equal angles
    events.sort_by(|a, b| (a.0, a.2).partial_cmp(&(b.0, b.2)).unwrap());

    let count_errors = |theta: f64| -> usize {
        off_origin
            .iter()
            .filter(|&&(f, g, c1)| (theta.cos() * f + theta.sin() * g >= 0.0) != c1)
            .count()
    };

    // start in the wrap-around gap between the last and the first event
    let first = events[0].0;
    let last = events[events.len() - 1].0;
    let start = ((last + first + TAU) / 2.0).rem_euclid(TAU);
    let mut current = count_errors(start);
    // gap midpoints are numerically robust; an optimum attained only at an
    // event angle (a boundary point counting as class 1) is kept separately
    // and used only when strictly better than every midpoint
    let mut best_mid = (current, start);
    let mut best_event = (usize::MAX, 0.0f64);

    let mut i = 0;
    while i < events.len() {
        let angle = events[i].0;
        // enter events take effect at their angle
        while i < events.len() && events[i].0 == angle && !events[i].2 {
            current = (current as i64 + events[i].1 as i64) as usize;
            i += 1;
        }
        // candidate exactly on the event angle: pending leaves still inside
        if current < best_event.0 {
            best_event = (current, angle);
        }
        // leave events take effect just past their angle
        while i < events.len() && events[i].0 == angle {
            current = (current as i64 + events[i].1 as i64) as usize;
            i += 1;
        }
        let next = if i < events.len() { events[i].0 } else { first + TAU };
        if next > angle {
            let mid = ((angle + next) / 2.0).rem_euclid(TAU);
            if current < best_mid.0 {
                best_mid = (current, mid);
            }
        }
    }
    let (best_err, best_theta) = if best_event.0 < best_mid.0 {
        best_event
    } else {
        best_mid
    };
    Ok((best_theta, best_err + base_error))
}

fn monomials_up_to(degree: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 1..=degree {
        for b in 0..=total {
            out.push((total - b, b));
        }
    }
    out
}

struct PlotColumns {
    features: Vec<(u32, u32)>,
    columns: Vec<Vec<f64>>,
    is_class1: Vec<bool>,
}

impl PlotColumns {
    fn build(z1: &[f64], z2: &[f64], labels: &[usize], degree: u32) -> Self {
        let features = monomials_up_to(degree);
        let columns = features
            .iter()
            .map(|&(a, b)| {
                z1.iter()
                    .zip(z2)
                    .map(|(&x, &y)| x.powi(a as i32) * y.powi(b as i32))
                    .collect()
            })
            .collect();
        let is_class1 = labels.iter().map(|&l| l == 1).collect();
        PlotColumns { features, columns, is_class1 }
    }
}

fn search_pair(xs: &[f64], ys: &[f64], is_class1: &[bool]) -> Result<(f64, usize)> {
    let points: Vec<(f64, f64, bool)> = xs
        .iter()
        .zip(ys)
        .zip(is_class1)
        .map(|((&x, &y), &c)| (x, y, c))
        .collect();
    exact_origin_line_search(&points)
}

/// Runs the α iterations at a fixed polynomial degree. Returns the weights
/// over the monomial feature set and the final training error count.
fn alpha_iterations(cols: &PlotColumns) -> Result<(Vec<f64>, usize)> {
    let nf = cols.features.len();
    let n = cols.is_class1.len();

    // first iteration: best origin line over all feature pairs
    let mut best: Option<(usize, usize, f64, usize)> = None;
    for i in 0..nf {
        for j in (i + 1)..nf {
            match search_pair(&cols.columns[i], &cols.columns[j], &cols.is_class1) {
                Ok((theta, err)) => {
                    if best.as_ref().map_or(true, |b| err < b.3) {
                        best = Some((i, j, theta, err));
                    }
                }
                Err(Error::AllAtOrigin) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    let (fi, fj, theta, mut best_err) = best.ok_or(Error::DegeneratePlot)?;

    let mut weights = vec![0.0f64; nf];
    weights[fi] = theta.cos();
    weights[fj] = theta.sin();
    let mut current: Vec<f64> = (0..n)
        .map(|p| theta.cos() * cols.columns[fi][p] + theta.sin() * cols.columns[fj][p])
        .collect();
    let mut remaining: Vec<usize> = (0..nf).filter(|&f| f != fi && f != fj).collect();

    // later iterations: pair the composite with each remaining feature;
    // stop at the first non-improving step
    while best_err > 0 && !remaining.is_empty() {
        let mut step: Option<(usize, f64, usize)> = None;
        for (pos, &g) in remaining.iter().enumerate() {
            match search_pair(&current, &cols.columns[g], &cols.is_class1) {
                Ok((theta, err)) => {
                    if step.as_ref().map_or(true, |s| err < s.2) {
                        step = Some((pos, theta, err));
                    }
                }
                Err(Error::AllAtOrigin) => continue,
                Err(e) => return Err(e),
            }
        }
        match step {
            Some((pos, theta, err)) if err < best_err => {
                let g = remaining.remove(pos);
                for w in weights.iter_mut() {
                    *w *= theta.cos();
                }
                weights[g] += theta.sin();
                for p in 0..n {
                    current[p] = theta.cos() * current[p] + theta.sin() * cols.columns[g][p];
                }
                best_err = err;
            }
            _ => break,
        }
    }

    // orient so the majority of class-1 training points lie on the
    // nonnegative side
    let mut pos = 0i64;
    for (p, &c1) in cols.is_class1.iter().enumerate() {
        if c1 {
            pos += if current[p] >= 0.0 { 1 } else { -1 };
        }
    }
    if pos < 0 {
        for w in weights.iter_mut() {
            *w = -*w;
        }
    }
    Ok((weights, best_err))
}

fn weights_to_monomials(features: &[(u32, u32)], weights: &[f64]) -> Vec<Monomial> {
    features
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w != 0.0)
        .map(|(&(a, b), &w)| Monomial { a, b, weight: w })
        .collect()
}

/// Trains at one fixed degree without cross-validated degree selection.
pub fn train_alpha_fixed_degree(plot: &PotPotPlot, degree: u32) -> Result<AlphaSeparator> {
    if plot.q() != 2 {
        return Err(Error::NotBinary(plot.q()));
    }
    let z1: Vec<f64> = (0..plot.n()).map(|i| plot.z[(i, 0)]).collect();
    let z2: Vec<f64> = (0..plot.n()).map(|i| plot.z[(i, 1)]).collect();
    if z1.windows(2).all(|w| w[0] == w[1]) && z2.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegeneratePlot);
    }
    let cols = PlotColumns::build(&z1, &z2, &plot.labels, degree);
    let (weights, _) = alpha_iterations(&cols)?;
    Ok(AlphaSeparator {
        degree,
        monomials: weights_to_monomials(&cols.features, &weights),
        priors: plot.priors.clone(),
    })
}

/// Evaluates the discriminant polynomial at (z₁, z₂).
pub fn discriminant_value(sep: &AlphaSeparator, z: &[f64]) -> f64 {
    sep.monomials
        .iter()
        .map(|m| m.weight * z[0].powi(m.a as i32) * z[1].powi(m.b as i32))
        .sum()
}

/// Sign of the discriminant decides: positive → class 1, negative → class 2,
/// zero → the class with the larger prior (then the smaller index).
pub fn classify_alpha(sep: &AlphaSeparator, z: &[f64]) -> usize {
    let v = discriminant_value(sep, z);
    if v > 0.0 {
        1
    } else if v < 0.0 {
        2
    } else if sep.priors[1] > sep.priors[0] {
        2
    } else {
        1
    }
}

/// Deterministic stratified folds for degree selection: within each class,
/// points are dealt round-robin in row order.
fn degree_cv_folds(labels: &[usize], folds: usize) -> Vec<usize> {
    let mut fold_of = vec![0usize; labels.len()];
    let mut class_pos = [0usize; 2];
    for (i, &l) in labels.iter().enumerate() {
        fold_of[i] = class_pos[l - 1] % folds;
        class_pos[l - 1] += 1;
    }
    fold_of
}

/// Trains the α separator on a binary plot. The polynomial degree in
/// {1..max_degree} is chosen by 10-fold cross-validation on the plot,
/// smallest degree on ties.
pub fn train_alpha(plot: &PotPotPlot, max_degree: u32) -> Result<AlphaSeparator> {
    if plot.q() != 2 {
        return Err(Error::NotBinary(plot.q()));
    }
    let n = plot.n();
    let mut counts = [0usize; 2];
    for &l in &plot.labels {
        counts[l - 1] += 1;
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(Error::InvalidDataset(
            "alpha training needs at least 2 points per class".into(),
        ));
    }
    let z1: Vec<f64> = (0..n).map(|i| plot.z[(i, 0)]).collect();
    let z2: Vec<f64> = (0..n).map(|i| plot.z[(i, 1)]).collect();

    let best_degree = if max_degree <= 1 {
        1
    } else {
        let nfolds = 10.min(counts[0]).min(counts[1]);
        let fold_of = degree_cv_folds(&plot.labels, nfolds);
        let fallback = if plot.priors[1] > plot.priors[0] { 2 } else { 1 };
        let mut best = (usize::MAX, 1u32);
        for degree in 1..=max_degree {
            let cols = PlotColumns::build(&z1, &z2, &plot.labels, degree);
            let mut cv_err = 0usize;
            for fold in 0..nfolds {
                let train_idx: Vec<usize> = (0..n).filter(|&i| fold_of[i] != fold).collect();
                let sub = PlotColumns {
                    features: cols.features.clone(),
                    columns: cols
                        .columns
                        .iter()
                        .map(|c| train_idx.iter().map(|&i| c[i]).collect())
                        .collect(),
                    is_class1: train_idx.iter().map(|&i| cols.is_class1[i]).collect(),
                };
                match alpha_iterations(&sub) {
                    Ok((weights, _)) => {
                        for i in (0..n).filter(|&i| fold_of[i] == fold) {
                            let v: f64 = cols
                                .columns
                                .iter()
                                .zip(&weights)
                                .map(|(c, &w)| w * c[i])
                                .sum();
                            let predicted = if v > 0.0 {
                                1
                            } else if v < 0.0 {
                                2
                            } else {
                                fallback
                            };
                            if predicted != plot.labels[i] {
                                cv_err += 1;
                            }
                        }
                    }
                    Err(_) => {
                        // degenerate fold: count its held-out points against
                        // this degree
                        cv_err += (0..n).filter(|&i| fold_of[i] == fold).count();
                    }
                }
            }
            if cv_err < best.0 {
                best = (cv_err, degree);
            }
        }
        best.1
    };

    train_alpha_fixed_degree(plot, best_degree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn plot(rows: &[(f64, f64, usize)]) -> PotPotPlot {
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
    fn line_search_vertical_split() {
        // class 1 at angle 90°, class 2 at 270°
        let (_, err) =
            exact_origin_line_search(&[(0.0, 1.0, true), (0.0, -1.0, false)]).unwrap();
        assert_eq!(err, 0);
    }

    #[test]
    fn line_search_interleaved() {
        // interleaved angles 0/90/180/270 with labels 1,2,1,2: every origin
        // line misclassifies at least one point (enumerated over all 8 gaps)
        let pts = [
            (1.0, 0.0, true),
            (0.0, 1.0, false),
            (-1.0, 0.0, true),
            (0.0, -1.0, false),
        ];
        let (_, err) = exact_origin_line_search(&pts).unwrap();
        assert_eq!(err, 1);
    }

    #[test]
    fn line_search_beats_grid_oracle() {
        // exact sweep must be at least as good as 3600 evenly spaced angles
        let pts: Vec<(f64, f64, bool)> = (0..40)
            .map(|i| {
                let a = i as f64 * 0.7;
                ((a.sin() * (1.0 + 0.1 * i as f64)), a.cos() * 0.8 - 0.2, i % 3 != 0)
            })
            .collect();
        let (theta, err) = exact_origin_line_search(&pts).unwrap();
        let grid_best = (0..3600)
            .map(|g| {
                let t = g as f64 * std::f64::consts::PI / 1800.0;
                pts.iter()
                    .filter(|&&(f, gg, c1)| (t.cos() * f + t.sin() * gg >= 0.0) != c1)
                    .count()
            })
            .min()
            .unwrap();
        assert!(err <= grid_best);
        // the returned angle reproduces the error up to points sitting
        // exactly on the boundary, which count as class 1 in the sweep but
        // whose floating dot product can round to either side
        let (c, s) = (theta.cos(), theta.sin());
        let direct = pts
            .iter()
            .filter(|&&(f, g, c1)| (c * f + s * g >= 0.0) != c1)
            .count();
        let on_boundary = pts
            .iter()
            .filter(|&&(f, g, _)| (c * f + s * g).abs() <= 1e-9 * f.hypot(g))
            .count();
        assert!(direct <= err + on_boundary && err <= direct + on_boundary);
    }

    #[test]
    fn line_search_all_at_origin() {
        assert!(matches!(
            exact_origin_line_search(&[(0.0, 0.0, true)]),
            Err(Error::AllAtOrigin)
        ));
    }

    #[test]
    fn separates_diagonal_halves_in_first_step() {
        // class 1 strictly above the diagonal, class 2 strictly below:
        // training error 0 with a line equivalent to the diagonal
        let mut rows = Vec::new();
        for i in 0..10 {
            let t = 0.1 + 0.08 * i as f64;
            rows.push((t, t + 0.05 + 0.01 * i as f64, 1));
            rows.push((t + 0.05 + 0.01 * i as f64, t, 2));
        }
        let p = plot(&rows);
        let sep = train_alpha(&p, 3).unwrap();
        for i in 0..p.n() {
            assert_eq!(classify_alpha(&sep, &p.row(i)), p.labels[i]);
        }
    }

    #[test]
    fn xor_needs_degree_two() {
        let p = plot(&[
            (1.0, 1.0, 1),
            (-1.0, -1.0, 1),
            (1.0, -1.0, 2),
            (-1.0, 1.0, 2),
        ]);
        // degree 1: no origin line separates the XOR layout
        let d1 = train_alpha_fixed_degree(&p, 1).unwrap();
        let errs1 = (0..4).filter(|&i| classify_alpha(&d1, &p.row(i)) != p.labels[i]).count();
        assert!(errs1 > 0);
        // degree 2: the monomial z1·z2 separates exactly
        let d2 = train_alpha_fixed_degree(&p, 2).unwrap();
        let errs2 = (0..4).filter(|&i| classify_alpha(&d2, &p.row(i)) != p.labels[i]).count();
        assert_eq!(errs2, 0);
    }

    #[test]
    fn two_singleton_points() {
        let p = plot(&[(1.0, 0.0, 1), (0.0, 1.0, 2), (2.0, 0.1, 1), (0.1, 2.0, 2)]);
        let sep = train_alpha_fixed_degree(&p, 1).unwrap();
        for i in 0..p.n() {
            assert_eq!(classify_alpha(&sep, &p.row(i)), p.labels[i]);
        }
    }

    #[test]
    fn degenerate_plot_rejected() {
        let p = plot(&[(0.0, 0.0, 1), (0.0, 0.0, 1), (0.0, 0.0, 2), (0.0, 0.0, 2)]);
        assert!(matches!(train_alpha(&p, 2), Err(Error::DegeneratePlot)));
    }

    #[test]
    fn classify_alpha_sign_and_tie() {
        let sep = AlphaSeparator {
            degree: 1,
            monomials: vec![
                Monomial { a: 0, b: 1, weight: 1.0 },
                Monomial { a: 1, b: 0, weight: -1.0 },
            ],
            priors: vec![0.5, 0.5],
        };
        // discriminant z2 − z1, class-1-positive orientation
        assert_eq!(classify_alpha(&sep, &[0.1, 0.5]), 1);
        assert_eq!(classify_alpha(&sep, &[0.5, 0.1]), 2);
        assert_eq!(classify_alpha(&sep, &[0.3, 0.3]), 1);
    }
}
