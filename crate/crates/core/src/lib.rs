//! Feature selection for high-dimensional two-class data.
//!
//! Two pipelines share one set of building blocks:
//!
//! * a filter that ranks features by two-sample t-test p-values
//!   ([`stats`]) and scores the top-k sets on a holdout split;
//! * a wrapper that runs sequential forward selection driven by
//!   cross-validated misclassification error of a Gaussian discriminant
//!   classifier ([`selection`], [`classifiers`]).
//!
//! [`pipeline`] wires them into reproducible experiments whose reports are
//! written as CSV files and SVG plots. All randomness comes from explicit
//! seeds ([`rng`]).

pub mod classifiers;
pub mod dataset;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod stats;

use std::path::PathBuf;

use thiserror::Error;

pub use classifiers::{max_features, mce, ClassifierError, DiscriminantKind, DiscriminantModel};
pub use dataset::{
    holdout_split, load_csv, stratified_folds, synthetic_gaussian, CovarianceMode, Dataset, DatasetError,
    FoldAssignment, HoldoutSplit, LabelColumn, SyntheticSpec,
};
pub use pipeline::{
    emit_report, parse_config, run_filter_experiment, run_wrapper_experiment, DataSource, ExperimentReport,
    PipelineConfig,
};
pub use selection::{
    cv_mce, exhaustive_best_subset, mahalanobis_j, sequential_select, Direction, Evaluation, SelectionError,
    SelectionTrace, StopMode, StopReason, StopRule, SubsetEvaluator,
};
pub use stats::{feature_pvalues, rank_by_pvalue, reg_inc_beta, welch_t, Ecdf, StatsError, TTestMode, TTestResult};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Config(#[from] pipeline::ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Annotates an error with the pipeline stage it came from.
pub(crate) trait ResultExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> ResultExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e.into()),
        })
    }
}
