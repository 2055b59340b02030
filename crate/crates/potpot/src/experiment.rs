//! Experiment harness: named classifier specs, replicated error tables over
//! generated or CSV datasets, multi-class aggregation, and error-surface
//! export for tuning reports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::baselines::{bayes_classifier, efficiency_index, train_baseline, BaselineKind, DepthKind};
use crate::datagen::{gen_disks, gen_hyperspheres, gen_normal_series, splitmix64, GeneratedSet, NormalFamily};
use crate::dataset::{load_csv, LabeledDataset};
use crate::error::{Error, Result};
use crate::potentials::{fit_potential_model, make_plot, potential_at, BandwidthConfig, PotentialModel, ScalingMode};
use crate::separators::{argmax_prior_tie, Separator, SeparatorKind};
use crate::tuning::{
    extreme_bandwidth, tune_joint, tune_regressive_separate, tune_rot, tune_separate,
    CvProtocol, GridSpec, RegressionKind, Strategy, TuneReport,
};

use nalgebra::DVector;

/// One column of an experiment: either a pot-pot classifier
/// (tuning strategy × scaling mode × separator) or a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierSpec {
    PotPot {
        strategy: Strategy,
        mode: ScalingMode,
        separator: SeparatorKind,
    },
    Baseline(BaselineKind),
}

impl ClassifierSpec {
    pub fn name(&self) -> String {
        match self {
            ClassifierSpec::PotPot { strategy, mode, separator } => match strategy {
                Strategy::Rot | Strategy::MinMax => {
                    let m = match mode {
                        ScalingMode::Joint => "joint",
                        ScalingMode::Separate => "separate",
                    };
                    format!("{}-{m}-{}", strategy.name(), separator.name())
                }
                _ => format!("{}-{}", strategy.name(), separator.name()),
            },
            ClassifierSpec::Baseline(kind) => kind.name(),
        }
    }
}

fn parse_separator(s: &str) -> Result<SeparatorKind> {
    match s {
        "diag" | "diagonal" => Ok(SeparatorKind::Diagonal),
        "knn" => Ok(SeparatorKind::Knn { k_max: None }),
        "alpha" => Ok(SeparatorKind::Alpha { max_degree: 3 }),
        _ => Err(Error::InvalidSpec(format!("unknown separator '{s}'"))),
    }
}

/// Parses a classifier name. Pot-pot classifiers are
/// `joint|separate|regressive-separate` + `-diag|-knn|-alpha`, or
/// `rot|mM` + `-joint|-separate` + separator. Baselines are `bayes`, `lda`,
/// `qda`, `knn`, and `dd-mah|dd-spat` + separator.
pub fn parse_classifier(name: &str) -> Result<ClassifierSpec> {
    match name {
        "bayes" => return Ok(ClassifierSpec::Baseline(BaselineKind::Bayes)),
        "lda" => return Ok(ClassifierSpec::Baseline(BaselineKind::Lda)),
        "qda" => return Ok(ClassifierSpec::Baseline(BaselineKind::Qda)),
        "knn" => return Ok(ClassifierSpec::Baseline(BaselineKind::KnnOriginal { k_max: None })),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("dd-") {
        let (depth, sep) = rest
            .split_once('-')
            .ok_or_else(|| Error::InvalidSpec(format!("unknown classifier '{name}'")))?;
        let depth = match depth {
            "mah" => DepthKind::Mahalanobis,
            "spat" => DepthKind::Spatial,
            _ => return Err(Error::InvalidSpec(format!("unknown depth '{depth}'"))),
        };
        return Ok(ClassifierSpec::Baseline(BaselineKind::DdPlot {
            depth,
            separator: parse_separator(sep)?,
        }));
    }
    for (prefix, strategy, mode) in [
        ("joint-", Strategy::Joint, ScalingMode::Joint),
        ("separate-", Strategy::Separate, ScalingMode::Separate),
        ("regressive-separate-", Strategy::RegressiveSeparate, ScalingMode::Separate),
        ("regressive-", Strategy::RegressiveSeparate, ScalingMode::Separate),
        ("rot-joint-", Strategy::Rot, ScalingMode::Joint),
        ("rot-separate-", Strategy::Rot, ScalingMode::Separate),
        ("mM-joint-", Strategy::MinMax, ScalingMode::Joint),
        ("mM-separate-", Strategy::MinMax, ScalingMode::Separate),
        ("mm-joint-", Strategy::MinMax, ScalingMode::Joint),
        ("mm-separate-", Strategy::MinMax, ScalingMode::Separate),
    ] {
        if let Some(sep) = name.strip_prefix(prefix) {
            return Ok(ClassifierSpec::PotPot {
                strategy,
                mode,
                separator: parse_separator(sep)?,
            });
        }
    }
    Err(Error::InvalidSpec(format!("unknown classifier '{name}'")))
}

/// A full experiment: datasets × classifiers, with replication and seeding.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    /// Generator names (`1dist3`, `2scale*4`, `disks_100x100`, `spheres_d3_n1000`)
    /// or CSV file paths.
    pub datasets: Vec<String>,
    pub classifiers: Vec<ClassifierSpec>,
    pub replications: usize,
    pub seed: u64,
    pub protocol: CvProtocol,
    /// Classifier name whose error anchors the efficiency columns.
    pub reference: Option<String>,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::InvalidSpec("no dataset configured".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::InvalidSpec("no classifier configured".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidSpec("replications must be at least 1".into()));
        }
        if let Some(r) = &self.reference {
            if !self.classifiers.iter().any(|c| &c.name() == r) {
                return Err(Error::InvalidSpec(format!(
                    "reference '{r}' is not in the classifier list"
                )));
            }
        }
        Ok(())
    }
}

/// Parses the flat key-value spec format. Lines are `key = value`; `#`
/// starts a comment; `dataset` and `classifier` may repeat. Keys:
/// `dataset`, `classifier`, `replications`, `seed`, `max_iterations`,
/// `fold_seed`, `reference`, `output`.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec {
        datasets: Vec::new(),
        classifiers: Vec::new(),
        replications: 40,
        seed: 0,
        protocol: CvProtocol::default(),
        reference: None,
        output: None,
    };
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::CsvParse {
            line: lineno + 1,
            msg: "expected 'key = value'".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let parse_int = |what: &str| -> Result<u64> {
            value.parse::<u64>().map_err(|_| Error::InvalidSpec(format!(
                "{what} must be a non-negative integer, got '{value}'"
            )))
        };
        match key {
            "dataset" => spec.datasets.push(value.to_string()),
            "classifier" => spec.classifiers.push(parse_classifier(value)?),
            "replications" => spec.replications = parse_int("replications")? as usize,
            "seed" => spec.seed = parse_int("seed")?,
            "max_iterations" => spec.protocol.max_iterations = parse_int("max_iterations")? as usize,
            "fold_seed" => spec.protocol.fold_seed = parse_int("fold_seed")?,
            "reference" => spec.reference = Some(value.to_string()),
            "output" => spec.output = Some(PathBuf::from(value)),
            _ => {
                return Err(Error::InvalidSpec(format!(
                    "unknown key '{key}' on line {}",
                    lineno + 1
                )))
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Resolves a generator name; returns None for names that look like file paths.
pub fn generate_named(name: &str, seed: u64) -> Option<Result<GeneratedSet>> {
    if let Some(rest) = name.strip_prefix("disks_") {
        let (a, b) = rest.split_once('x')?;
        let (n1, n2) = (a.parse::<usize>().ok()?, b.parse::<usize>().ok()?);
        return Some(gen_disks(n1, n2, seed));
    }
    if let Some(rest) = name.strip_prefix("spheres_d") {
        let (d, n) = rest.split_once("_n")?;
        let (d, n) = (d.parse::<usize>().ok()?, n.parse::<usize>().ok()?);
        return Some(gen_hyperspheres(d, n, seed));
    }
    let series = match name.chars().next()? {
        '1' => 1u8,
        '2' => 2u8,
        _ => return None,
    };
    let rest = &name[1..];
    for (tag, family) in [
        ("dist", NormalFamily::Location),
        ("scale*", NormalFamily::ScaleStar),
        ("scale", NormalFamily::Scale),
        ("rotate", NormalFamily::Rotation),
    ] {
        if let Some(idx) = rest.strip_prefix(tag) {
            let index = idx.parse::<usize>().ok()?;
            return Some(gen_normal_series(series, family, index, seed));
        }
    }
    None
}

/// One cell of an [`ErrorTable`]: an error rate in [0, 1] or a diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Rate(f64),
    Failed(String),
}

/// Error rates (and optional efficiency indices) for datasets × classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Cell>)>,
    pub reference: Option<String>,
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ErrorTable {
    /// Renders the table as CSV: error rates in percent with one decimal; if
    /// a reference is configured, an efficiency column per classifier follows.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("dataset");
        for c in &self.columns {
            write!(out, ",{}", csv_escape(c)).unwrap();
        }
        if self.reference.is_some() {
            for c in &self.columns {
                write!(out, ",eff:{}", csv_escape(c)).unwrap();
            }
        }
        out.push('\n');
        let ref_idx = self
            .reference
            .as_ref()
            .and_then(|r| self.columns.iter().position(|c| c == r));
        for (name, cells) in &self.rows {
            out.push_str(&csv_escape(name));
            for cell in cells {
                match cell {
                    Cell::Rate(r) => write!(out, ",{:.1}", 100.0 * r).unwrap(),
                    Cell::Failed(msg) => write!(out, ",{}", csv_escape(msg)).unwrap(),
                }
            }
            if let Some(ri) = ref_idx {
                let ref_rate = match &cells[ri] {
                    Cell::Rate(r) => Some(*r),
                    Cell::Failed(_) => None,
                };
                for cell in cells {
                    let eff = match (cell, ref_rate) {
                        (Cell::Rate(r), Some(rr)) => efficiency_index(*r, rr).ok(),
                        _ => None,
                    };
                    match eff {
                        Some(e) => write!(out, ",{e:.2}").unwrap(),
                        None => out.push_str(",n/a"),
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}

/// A pot-pot classifier at a fixed bandwidth configuration: the fitted
/// potential model plus a separator trained on the training plot.
pub struct PotPotClassifier {
    pub model: PotentialModel,
    pub separator: Separator,
}

impl PotPotClassifier {
    pub fn train(
        data: &LabeledDataset,
        cfg: &BandwidthConfig,
        sep_kind: SeparatorKind,
    ) -> Result<Self> {
        let model = fit_potential_model(data, cfg)?;
        let plot = make_plot(&model, data)?;
        let separator = Separator::train(sep_kind, &plot)?;
        Ok(PotPotClassifier { model, separator })
    }

    pub fn classify(&self, x: &DVector<f64>) -> Result<usize> {
        let q = self.model.q();
        let z: Vec<f64> = (1..=q)
            .map(|j| potential_at(&self.model, x, j))
            .collect::<Result<_>>()?;
        Ok(self.separator.classify(&z))
    }

    pub fn error_on(&self, data: &LabeledDataset) -> Result<f64> {
        let mut errs = 0usize;
        for i in 0..data.n() {
            if self.classify(data.point(i))? != data.label(i) {
                errs += 1;
            }
        }
        Ok(errs as f64 / data.n() as f64)
    }
}

/// Runs the tuning strategy of a pot-pot classifier spec.
pub fn tune_for(
    strategy: Strategy,
    mode: ScalingMode,
    data: &LabeledDataset,
    sep_kind: SeparatorKind,
    protocol: &CvProtocol,
) -> Result<TuneReport> {
    let grid = GridSpec::default();
    match strategy {
        Strategy::Joint => tune_joint(data, sep_kind, &grid, protocol),
        Strategy::Separate => tune_separate(data, sep_kind, &grid, protocol),
        Strategy::RegressiveSeparate => {
            tune_regressive_separate(data, sep_kind, &grid, protocol, RegressionKind::Linear)
        }
        Strategy::Rot => tune_rot(data, mode, sep_kind, protocol),
        Strategy::MinMax => extreme_bandwidth(data, mode, sep_kind, protocol),
    }
}

/// Train-on-train, evaluate-on-test error for one classifier on a generated
/// replication.
fn generated_cell(spec: &ClassifierSpec, set: &GeneratedSet, protocol: &CvProtocol) -> Result<f64> {
    match spec {
        ClassifierSpec::Baseline(BaselineKind::Bayes) => {
            let bayes = bayes_classifier(set.priors.clone(), set.densities.clone());
            Ok(bayes.error_on(&set.test))
        }
        ClassifierSpec::Baseline(kind) => {
            Ok(train_baseline(*kind, &set.train)?.error_on(&set.test))
        }
        ClassifierSpec::PotPot { strategy, mode, separator } => {
            let report = tune_for(*strategy, *mode, &set.train, *separator, protocol)?;
            let clf = PotPotClassifier::train(&set.train, &report.best, *separator)?;
            clf.error_on(&set.test)
        }
    }
}

/// Cross-validated error for one classifier on a fixed dataset loaded from
/// disk: pot-pot classifiers report their tuned CV error, baselines are
/// refit on every fold.
fn csv_cell(spec: &ClassifierSpec, data: &LabeledDataset, protocol: &CvProtocol) -> Result<f64> {
    match spec {
        ClassifierSpec::Baseline(BaselineKind::Bayes) => Err(Error::InvalidSpec(
            "the Bayes rule needs a generated dataset with known densities".into(),
        )),
        ClassifierSpec::Baseline(kind) => {
            let folds = protocol.folds(data)?;
            let all: Vec<usize> = (0..data.n()).collect();
            let mut errs = 0usize;
            for fold in &folds {
                let train_idx: Vec<usize> =
                    all.iter().copied().filter(|i| !fold.contains(i)).collect();
                let train = data.subset(&train_idx)?;
                let model = train_baseline(*kind, &train)?;
                for &i in fold {
                    if model.classify(data.point(i)) != data.label(i) {
                        errs += 1;
                    }
                }
            }
            Ok(errs as f64 / data.n() as f64)
        }
        ClassifierSpec::PotPot { strategy, mode, separator } => {
            Ok(tune_for(*strategy, *mode, data, *separator, protocol)?.best_error)
        }
    }
}

/// Runs a full experiment. Generated datasets are replicated
/// `spec.replications` times from a per-replication seed stream and the cell
/// holds the mean test error; CSV datasets are evaluated once by cross
/// validation. A failing cell records its diagnostic and does not abort the
/// rest of the table.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ErrorTable> {
    spec.validate()?;
    let columns: Vec<String> = spec.classifiers.iter().map(|c| c.name()).collect();
    let mut rows = Vec::new();
    let mut seed_state = spec.seed;
    for name in &spec.datasets {
        let cells = if generate_named(name, 0).is_some() {
            let mut sums = vec![0.0f64; spec.classifiers.len()];
            let mut fails: Vec<Option<String>> = vec![None; spec.classifiers.len()];
            for _ in 0..spec.replications {
                let rep_seed = splitmix64(&mut seed_state);
                let set = match generate_named(name, rep_seed).unwrap() {
                    Ok(s) => s,
                    Err(e) => {
                        let msg = e.to_string();
                        fails.iter_mut().for_each(|f| *f = Some(msg.clone()));
                        break;
                    }
                };
                for (ci, c) in spec.classifiers.iter().enumerate() {
                    if fails[ci].is_some() {
                        continue;
                    }
                    match generated_cell(c, &set, &spec.protocol) {
                        Ok(e) => sums[ci] += e,
                        Err(e) => fails[ci] = Some(e.to_string()),
                    }
                }
            }
            sums.iter()
                .zip(&fails)
                .map(|(&s, f)| match f {
                    Some(msg) => Cell::Failed(msg.clone()),
                    None => Cell::Rate(s / spec.replications as f64),
                })
                .collect()
        } else {
            match load_csv(Path::new(name)) {
                Ok(data) => spec
                    .classifiers
                    .iter()
                    .map(|c| match csv_cell(c, &data, &spec.protocol) {
                        Ok(e) => Cell::Rate(e),
                        Err(e) => Cell::Failed(e.to_string()),
                    })
                    .collect(),
                Err(e) => {
                    let msg = e.to_string();
                    spec.classifiers.iter().map(|_| Cell::Failed(msg.clone())).collect()
                }
            }
        };
        rows.push((name.clone(), cells));
    }
    Ok(ErrorTable { columns, rows, reference: spec.reference.clone() })
}

/// Multi-class aggregation scheme for binary separators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    OneVsAll,
    OneVsOne,
}

/// A binary pot-pot classifier used as a building block for q > 2.
/// `negative == 0` marks a one-vs-rest model.
pub struct BinaryModel {
    pub positive: usize,
    pub negative: usize,
    model: PotentialModel,
    separator: Separator,
}

impl BinaryModel {
    fn margin(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(potential_at(&self.model, x, 1)? - potential_at(&self.model, x, 2)?)
    }

    fn winner(&self, x: &DVector<f64>) -> Result<usize> {
        let z = [potential_at(&self.model, x, 1)?, potential_at(&self.model, x, 2)?];
        Ok(if self.separator.classify(&z) == 1 { self.positive } else { self.negative })
    }
}

fn binary_model(
    data: &LabeledDataset,
    cfg: &BandwidthConfig,
    sep_kind: SeparatorKind,
    positive: usize,
    negative: usize,
) -> Result<BinaryModel> {
    let model = fit_potential_model(data, cfg)?;
    let plot = make_plot(&model, data)?;
    let separator = Separator::train(sep_kind, &plot)?;
    Ok(BinaryModel { positive, negative, model, separator })
}

/// Trains the q(q−1)/2 pairwise binary pot-pot classifiers.
pub fn train_one_vs_one(
    data: &LabeledDataset,
    cfg: &BandwidthConfig,
    sep_kind: SeparatorKind,
) -> Result<Vec<BinaryModel>> {
    let q = data.q();
    if q <= 2 {
        return Err(Error::NotMulticlass(q));
    }
    let mut models = Vec::with_capacity(q * (q - 1) / 2);
    for a in 1..=q {
        for b in (a + 1)..=q {
            models.push(binary_model(&data.restrict_pair(a, b)?, cfg, sep_kind, a, b)?);
        }
    }
    Ok(models)
}

/// Trains the q one-against-rest binary pot-pot classifiers.
pub fn train_one_vs_all(
    data: &LabeledDataset,
    cfg: &BandwidthConfig,
    sep_kind: SeparatorKind,
) -> Result<Vec<BinaryModel>> {
    let q = data.q();
    if q <= 2 {
        return Err(Error::NotMulticlass(q));
    }
    (1..=q)
        .map(|j| binary_model(&data.relabel_one_vs_rest(j)?, cfg, sep_kind, j, 0))
        .collect()
}

/// Majority vote with ties broken by larger prior, then smaller index.
pub fn aggregate_votes(votes: &[usize], priors: &[f64]) -> usize {
    let as_f64: Vec<f64> = votes.iter().map(|&v| v as f64).collect();
    argmax_prior_tie(&as_f64, priors)
}

/// Aggregates binary pot-pot models into a q-class decision. One-vs-one is
/// a pairwise majority vote; one-vs-all picks the class whose binary model
/// wins with the largest potential-difference margin.
pub fn classify_multiclass(
    models: &[BinaryModel],
    aggregation: Aggregation,
    priors: &[f64],
    x: &DVector<f64>,
) -> Result<usize> {
    let q = priors.len();
    if q <= 2 {
        return Err(Error::NotMulticlass(q));
    }
    match aggregation {
        Aggregation::OneVsOne => {
            let mut votes = vec![0usize; q];
            for m in models {
                let w = m.winner(x)?;
                if w >= 1 {
                    votes[w - 1] += 1;
                }
            }
            Ok(aggregate_votes(&votes, priors))
        }
        Aggregation::OneVsAll => {
            let mut margins = vec![f64::NEG_INFINITY; q];
            for m in models {
                margins[m.positive - 1] = m.margin(x)?;
            }
            Ok(argmax_prior_tie(&margins, priors))
        }
    }
}

fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-4..=14).contains(&exp) {
        format!("{v:.5e}")
    } else {
        let decimals = (5 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    }
}

/// Writes a tuning report as a `log10_h1,log10_h2,error` CSV in evaluation
/// order; joint-mode rows repeat the shared bandwidth in both columns.
pub fn export_surface(report: &TuneReport, path: &Path) -> Result<()> {
    if report.evaluations.is_empty() {
        return Err(Error::InvalidSpec("empty tuning report".into()));
    }
    let mut out = String::from("log10_h1,log10_h2,error\n");
    for (cfg, err) in &report.evaluations {
        let (l1, l2) = match cfg.mode {
            ScalingMode::Joint => {
                let l = cfg.h2[0].log10();
                (l, l)
            }
            ScalingMode::Separate => (cfg.h2[0].log10(), cfg.h2[1].log10()),
        };
        writeln!(out, "{},{},{}", sig6(l1), sig6(l2), sig6(*err)).unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}
