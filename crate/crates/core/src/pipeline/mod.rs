//! End-to-end experiments.
//!
//! Both experiments start the same way: a stratified holdout split, then a
//! t-test per feature computed on the training rows only, ranked by p-value.
//! The test rows are touched once, for the final misclassification error.
//!
//! * The filter experiment fits the classifier on the top-k ranked features
//!   for each k in a grid and records the test error of each.
//! * The wrapper experiment takes the top `prefilter_k` ranked features as
//!   candidates and runs forward selection scored by stratified k-fold
//!   cross-validated error on the training rows, then refits the chosen
//!   subset on all training rows.

mod config;
mod report;
mod svg;

use std::path::PathBuf;
use std::time::{Duration, Instant};

pub use config::{parse_config, ConfigError, Invocation, SynthConfig};
pub use report::emit_report;

use crate::classifiers::{self, max_features, DiscriminantKind, DiscriminantModel};
use crate::dataset::{self, holdout_split, load_csv, stratified_folds, Dataset, HoldoutSplit, LabelColumn, SyntheticSpec};
use crate::rng::derive_seed;
use crate::selection::{sequential_select, CvMce, Direction, SelectionTrace, StopMode, StopRule};
use crate::stats::{feature_pvalues, rank_by_pvalue, Ecdf, TTestMode, TTestResult};
use crate::{Error, Result, ResultExt};

const FOLD_STREAM: u64 = 1;

/// Default forward-search size limit for the wrapper experiment.
pub const DEFAULT_MAX_SIZE: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv { path: PathBuf, label: LabelColumn },
    Synthetic(SyntheticSpec),
}

impl DataSource {
    pub fn load(&self) -> Result<Dataset> {
        Ok(match self {
            DataSource::Csv { path, label } => load_csv(path, label)?,
            DataSource::Synthetic(spec) => dataset::synthetic_gaussian(spec)?,
        })
    }

    fn describe(&self) -> String {
        match self {
            DataSource::Csv { path, .. } => path.display().to_string(),
            DataSource::Synthetic(s) => format!(
                "synthetic({}+{}x{}, {} informative, delta {}, seed {})",
                s.n_per_class.0,
                s.n_per_class.1,
                s.n_features,
                s.informative.len(),
                s.delta,
                s.seed
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: DataSource,
    pub seed: u64,
    /// Training rows in the holdout split; `None` keeps 160 of every 216.
    pub train_count: Option<usize>,
    pub stratified: bool,
    pub classifier: DiscriminantKind,
    pub ridge: f64,
    pub ttest: TTestMode,
    pub folds: usize,
    pub prefilter_k: usize,
    pub filter_grid: Vec<usize>,
    pub stop: StopRule,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(data: DataSource) -> Self {
        Self {
            data,
            seed: 0,
            train_count: None,
            stratified: true,
            classifier: DiscriminantKind::Quadratic,
            ridge: 0.0,
            ttest: TTestMode::Welch,
            folds: 10,
            prefilter_k: 150,
            filter_grid: (5..=70).step_by(5).collect(),
            stop: StopRule::new(StopMode::FirstLocalMin, DEFAULT_MAX_SIZE),
            threads: None,
            out_dir: PathBuf::from("out"),
        }
    }

    /// Holdout training size for a dataset of `n_obs` rows.
    pub fn train_count_for(&self, n_obs: usize) -> usize {
        self.train_count
            .unwrap_or_else(|| ((n_obs * 160 + 108) / 216).clamp(1, n_obs.saturating_sub(1).max(1)))
    }

    /// Checks the settings that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(ConfigError::Invalid(msg)));
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.prefilter_k == 0 {
            return bad("prefilter-k must be >= 1".into());
        }
        if self.filter_grid.is_empty() || self.filter_grid[0] == 0 {
            return bad("grid values must be >= 1".into());
        }
        if self.filter_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("grid must be strictly increasing".into());
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge must be >= 0, got {}", self.ridge));
        }
        if self.stop.max_size == 0 {
            return bad("max-size must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    fn validate_for(&self, ds: &Dataset, experiment: ExperimentKind) -> Result<()> {
        self.validate()?;
        let train = self.train_count_for(ds.n_obs());
        if train == 0 || train >= ds.n_obs() {
            return Err(Error::Config(ConfigError::Invalid(format!(
                "train-count must lie in 1..{}, got {train}",
                ds.n_obs()
            ))));
        }
        if experiment == ExperimentKind::Wrapper && self.prefilter_k > ds.n_features() {
            return Err(Error::Config(ConfigError::Invalid(format!(
                "prefilter-k {} exceeds the {} available features",
                self.prefilter_k,
                ds.n_features()
            ))));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Filter,
    Wrapper,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Filter => "filter",
            ExperimentKind::Wrapper => "wrapper",
        })
    }
}

/// Test error of the classifier fitted on the top `k` ranked features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    pub test_errors: usize,
    pub test_mce: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: PipelineConfig,
    pub data_description: String,
    pub n_obs: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub split: HoldoutSplit,
    pub train_class_counts: Vec<usize>,
    pub test_class_counts: Vec<usize>,
    pub ttests: Vec<TTestResult>,
    pub ranking: Vec<usize>,
    pub ecdf: Ecdf,
    /// Ridge-free size limit for the classifier on the training rows.
    pub feasibility_bound: usize,
    pub filter_curve: Vec<CurvePoint>,
    pub trace: Option<SelectionTrace>,
    pub selected_features: Vec<usize>,
    pub final_test_errors: usize,
    pub final_test_mce: f64,
    /// Wall-clock time; not written to any report file.
    pub elapsed: Duration,
}

impl ExperimentReport {
    pub fn pvalues_below(&self, threshold: f64) -> usize {
        self.ttests.iter().filter(|r| r.p < threshold).count()
    }
}

/// Split, ranking and ECDF shared by both experiments.
struct Prepared {
    ds: Dataset,
    split: HoldoutSplit,
    ttests: Vec<TTestResult>,
    ranking: Vec<usize>,
    ecdf: Ecdf,
    bound: usize,
}

fn prepare(cfg: &PipelineConfig, ds: Dataset, experiment: ExperimentKind) -> Result<Prepared> {
    cfg.validate_for(&ds, experiment)?;
    let train_count = cfg.train_count_for(ds.n_obs());
    let split = holdout_split(&ds, train_count, cfg.stratified, cfg.seed).stage("holdout split")?;
    let ttests = feature_pvalues(&ds, &split.train, cfg.ttest).stage("t-test filter")?;
    let ranking = rank_by_pvalue(&ttests);
    let pvalues: Vec<f64> = ttests.iter().map(|r| r.p).collect();
    let ecdf = Ecdf::new(&pvalues).stage("p-value ECDF")?;
    let bound = max_features(&ds.class_counts(&split.train), cfg.classifier);
    Ok(Prepared { ds, split, ttests, ranking, ecdf, bound })
}

fn within_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(ConfigError::Invalid(format!("thread pool: {e}"))))?;
            Ok(pool.install(job))
        }
    }
}

/// Loads the configured data and runs the filter experiment.
pub fn run_filter_experiment(cfg: &PipelineConfig) -> Result<ExperimentReport> {
    let ds = cfg.data.load().stage("loading data")?;
    run_filter_on(cfg, ds)
}

/// Loads the configured data and runs the wrapper experiment.
pub fn run_wrapper_experiment(cfg: &PipelineConfig) -> Result<ExperimentReport> {
    let ds = cfg.data.load().stage("loading data")?;
    run_wrapper_on(cfg, ds)
}

/// Filter experiment on an already loaded dataset.
pub fn run_filter_on(cfg: &PipelineConfig, ds: Dataset) -> Result<ExperimentReport> {
    within_pool(cfg.threads, || filter_inner(cfg, ds))?
}

/// Wrapper experiment on an already loaded dataset.
pub fn run_wrapper_on(cfg: &PipelineConfig, ds: Dataset) -> Result<ExperimentReport> {
    within_pool(cfg.threads, || wrapper_inner(cfg, ds))?
}

fn filter_inner(cfg: &PipelineConfig, ds: Dataset) -> Result<ExperimentReport> {
    let started = Instant::now();
    let prep = prepare(cfg, ds, ExperimentKind::Filter)?;
    let limit = prep.bound.min(prep.ds.n_features());
    let mut curve = Vec::new();
    for &k in cfg.filter_grid.iter().filter(|&&k| k <= limit) {
        let subset = &prep.ranking[..k];
        match DiscriminantModel::fit(&prep.ds, &prep.split.train, subset, cfg.classifier, cfg.ridge) {
            Ok(model) => {
                let errors = model.misclassified(&prep.ds, &prep.split.test).stage("filter curve")?;
                curve.push(CurvePoint {
                    k,
                    test_errors: errors,
                    test_mce: errors as f64 / prep.split.test.len() as f64,
                });
            }
            Err(e) => log::warn!("filter curve: skipping k = {k}: {e}"),
        }
    }
    // smallest error, fewest features on ties
    let best = curve
        .iter()
        .min_by(|a, b| a.test_errors.cmp(&b.test_errors).then(a.k.cmp(&b.k)))
        .copied()
        .ok_or_else(|| {
            Error::Config(ConfigError::Invalid(format!(
                "no grid point is feasible: the {} bound on this split is {} features",
                cfg.classifier, prep.bound
            )))
        })?;
    let selected = prep.ranking[..best.k].to_vec();
    Ok(finish(cfg, prep, ExperimentKind::Filter, curve, None, selected, best.test_errors, started))
}

fn wrapper_inner(cfg: &PipelineConfig, ds: Dataset) -> Result<ExperimentReport> {
    let started = Instant::now();
    let prep = prepare(cfg, ds, ExperimentKind::Wrapper)?;
    let candidates = &prep.ranking[..cfg.prefilter_k];
    let folds = stratified_folds(
        &prep.split.train,
        prep.ds.labels(),
        cfg.folds,
        derive_seed(cfg.seed, FOLD_STREAM),
    )
    .stage("cross-validation folds")?;
    let evaluator = CvMce {
        ds: &prep.ds,
        folds: &folds,
        kind: cfg.classifier,
        ridge: cfg.ridge,
    };
    let stop = StopRule {
        max_size: cfg.stop.max_size.min(candidates.len()),
        ..cfg.stop
    };
    let trace = sequential_select(candidates, Direction::Forward, &evaluator, stop).stage("sequential selection")?;
    let selected = trace.selected.clone();
    let model = DiscriminantModel::fit(&prep.ds, &prep.split.train, &selected, cfg.classifier, cfg.ridge)
        .stage("final fit")?;
    let errors = model.misclassified(&prep.ds, &prep.split.test).stage("final evaluation")?;
    Ok(finish(cfg, prep, ExperimentKind::Wrapper, Vec::new(), Some(trace), selected, errors, started))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    cfg: &PipelineConfig,
    prep: Prepared,
    experiment: ExperimentKind,
    filter_curve: Vec<CurvePoint>,
    trace: Option<SelectionTrace>,
    selected_features: Vec<usize>,
    final_test_errors: usize,
    started: Instant,
) -> ExperimentReport {
    let ds = &prep.ds;
    ExperimentReport {
        experiment,
        config: cfg.clone(),
        data_description: cfg.data.describe(),
        n_obs: ds.n_obs(),
        n_features: ds.n_features(),
        class_names: ds.class_names().to_vec(),
        feature_names: (0..ds.n_features()).map(|f| ds.feature_name(f)).collect(),
        train_class_counts: ds.class_counts(&prep.split.train),
        test_class_counts: ds.class_counts(&prep.split.test),
        final_test_mce: final_test_errors as f64 / prep.split.test.len() as f64,
        split: prep.split,
        ttests: prep.ttests,
        ranking: prep.ranking,
        ecdf: prep.ecdf,
        feasibility_bound: prep.bound,
        filter_curve,
        trace,
        selected_features,
        final_test_errors,
        elapsed: started.elapsed(),
    }
}

/// Test error of `features` refitted on the report's training rows; used to
/// cross-check an emitted summary.
pub fn recompute_test_mce(report: &ExperimentReport, ds: &Dataset, features: &[usize]) -> Result<f64> {
    let cfg = &report.config;
    let model = DiscriminantModel::fit(ds, &report.split.train, features, cfg.classifier, cfg.ridge)?;
    Ok(classifiers::mce(&model, ds, &report.split.test)?)
}
