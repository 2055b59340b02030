//! Cross-module invariants exercised with randomized inputs.

use nalgebra::DVector;
use proptest::prelude::*;

use potpot::potentials::{fit_potential_model, make_plot, potential_at, BandwidthConfig};
use potpot::separators::{classify_diagonal, Separator, SeparatorKind};
use potpot::tuning::{CvProtocol, GridSpec};
use potpot::{parse_csv, save_csv, LabeledDataset};

/// A small full-rank 2-class dataset in 2-D built from raw floats.
fn dataset(raw: &[(f64, f64)], split: usize) -> Option<LabeledDataset> {
    let points: Vec<DVector<f64>> =
        raw.iter().map(|&(a, b)| DVector::from_vec(vec![a, b])).collect();
    let labels: Vec<usize> =
        (0..raw.len()).map(|i| if i < split { 1 } else { 2 }).collect();
    LabeledDataset::new(points, labels).ok()
}

fn coord() -> impl Strategy<Value = (f64, f64)> {
    ((-50.0f64..50.0), (-50.0f64..50.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every potential of a training point is strictly positive and the plot
    /// has one row per point and one column per class.
    #[test]
    fn plot_shape_and_positivity(
        raw in proptest::collection::vec(coord(), 8..24),
        h in 0.01f64..100.0,
    ) {
        let split = raw.len() / 2;
        let Some(data) = dataset(&raw, split) else { return Ok(()) };
        let Ok(model) = fit_potential_model(&data, &BandwidthConfig::joint(h)) else {
            return Ok(());
        };
        let plot = make_plot(&model, &data).unwrap();
        prop_assert_eq!(plot.n(), data.n());
        prop_assert_eq!(plot.q(), 2);
        for i in 0..plot.n() {
            for j in 0..2 {
                prop_assert!(plot.z[(i, j)] > 0.0);
            }
        }
    }

    /// The trained diagonal separator agrees with calling the max-potential
    /// rule directly on every evaluation point.
    #[test]
    fn diagonal_separator_is_the_max_potential_rule(
        raw in proptest::collection::vec(coord(), 8..24),
        probe in coord(),
        h in 0.05f64..50.0,
    ) {
        let split = raw.len() / 2;
        let Some(data) = dataset(&raw, split) else { return Ok(()) };
        let Ok(model) = fit_potential_model(&data, &BandwidthConfig::joint(h)) else {
            return Ok(());
        };
        let plot = make_plot(&model, &data).unwrap();
        let sep = Separator::train(SeparatorKind::Diagonal, &plot).unwrap();
        let x = DVector::from_vec(vec![probe.0, probe.1]);
        let z = [
            potential_at(&model, &x, 1).unwrap(),
            potential_at(&model, &x, 2).unwrap(),
        ];
        prop_assert_eq!(sep.classify(&z), classify_diagonal(&z, &data.priors()));
    }

    /// CSV round trip preserves every coordinate bit-exactly, hence all
    /// potentials.
    #[test]
    fn csv_round_trip_preserves_potentials(
        raw in proptest::collection::vec(coord(), 8..20),
        h in 0.1f64..10.0,
    ) {
        let split = raw.len() / 2;
        let Some(data) = dataset(&raw, split) else { return Ok(()) };
        let path = std::env::temp_dir().join(format!(
            "potpot-prop-{}.csv",
            std::process::id()
        ));
        save_csv(&data, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let _ = std::fs::remove_file(&path);
        let back = parse_csv(&text).unwrap();
        prop_assert_eq!(back.labels(), data.labels());
        for (a, b) in back.points().iter().zip(data.points()) {
            prop_assert_eq!(a, b);
        }
        let cfg = BandwidthConfig::joint(h);
        if let (Ok(m1), Ok(m2)) =
            (fit_potential_model(&data, &cfg), fit_potential_model(&back, &cfg))
        {
            let x = DVector::from_vec(vec![0.5, -0.5]);
            for j in 1..=2 {
                let p1 = potential_at(&m1, &x, j).unwrap();
                let p2 = potential_at(&m2, &x, j).unwrap();
                prop_assert!((p1 - p2).abs() <= 1e-12 * p1.abs().max(1e-300));
            }
        }
    }

    /// Grid values stay inside the bandwidth bounds and increase strictly.
    #[test]
    fn grid_values_are_sorted_and_bounded(count in 2usize..80) {
        let grid = GridSpec { log10_min: -3.0, log10_max: 3.0, count };
        let values = grid.values();
        prop_assert_eq!(values.len(), count);
        for w in values.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        prop_assert!(values[0] >= 1e-3 * (1.0 - 1e-12));
        prop_assert!(values[count - 1] <= 1e3 * (1.0 + 1e-12));
    }

    /// Cross-validation folds partition the index set exactly.
    #[test]
    fn folds_partition(
        raw in proptest::collection::vec(coord(), 12..40),
        max_iterations in 2usize..20,
        fold_seed in 0u64..1000,
    ) {
        let split = raw.len() / 2;
        let Some(data) = dataset(&raw, split) else { return Ok(()) };
        let protocol = CvProtocol::new(max_iterations, fold_seed);
        let Ok(folds) = protocol.folds(&data) else { return Ok(()) };
        let mut seen = vec![false; data.n()];
        for fold in &folds {
            for &i in fold {
                prop_assert!(!seen[i], "index {} in two folds", i);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
    }
}
