//! Classification via class potentials: points are mapped to the vector of
//! their kernel-estimated, prior-weighted class densities and separated in
//! that low-dimensional potential space.

pub mod baselines;
pub mod datagen;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod numkit;
pub mod potentials;
pub mod selftest;
pub mod separators;
pub mod tuning;

pub use baselines::{
    bayes_classifier, efficiency_index, mahalanobis_depth, spatial_depth, train_baseline,
    train_dd_plot, Baseline, BaselineKind, DepthKind,
};
pub use datagen::{
    gen_disks, gen_hyperspheres, gen_normal_series, hypersphere_raw_class1_probability,
    replicate, Density, GeneratedSet, NormalFamily,
};
pub use dataset::{load_csv, parse_csv, save_csv, LabeledDataset};
pub use error::{Error, Result};
pub use experiment::{
    classify_multiclass, export_surface, generate_named, parse_classifier, parse_spec,
    run_experiment, train_one_vs_all, train_one_vs_one, Aggregation, Cell, ClassifierSpec,
    ErrorTable, ExperimentSpec, PotPotClassifier,
};
pub use potentials::{
    fit_potential_model, make_plot, pot_pot_transform, potential_at, BandwidthConfig,
    PotPotPlot, PotentialModel, ScalingMode, H2_MAX, H2_MIN,
};
pub use separators::{Separator, SeparatorKind};
pub use tuning::{
    cv_error, extreme_bandwidth, rot_bandwidth, tune_joint, tune_regressive_separate,
    tune_rot, tune_separate, CvContext, CvProtocol, GridSpec, RegressionKind, Strategy,
    TuneReport,
};
