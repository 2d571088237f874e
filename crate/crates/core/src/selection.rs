//! Wrapper feature selection: cross-validated subset scoring, sequential
//! forward/backward search, the Mahalanobis class-separation criterion and
//! an exhaustive search used as a reference in tests.
//!
//! The search engine minimizes a loss. Criteria where larger is better
//! (such as the Mahalanobis separation) are plugged in negated.

use std::fmt;

use itertools::Itertools;
use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, DiscriminantKind, DiscriminantModel};
use crate::dataset::{Dataset, FoldAssignment};

/// Default ceiling on the number of subsets [`exhaustive_best_subset`] will
/// evaluate.
pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 200_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ClassifierError,
    },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("no candidate subset could be evaluated at step {step}")]
    NoFeasibleCandidate { step: usize },
    #[error("exhaustive search over {combinations} subsets exceeds the cap of {cap}")]
    CapExceeded { combinations: u128, cap: u128 },
    #[error("{0}")]
    Invalid(String),
}

/// Score of one subset: the loss and the per-fold values it averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: f64,
    pub per_fold: Vec<f64>,
}

impl Evaluation {
    /// A score with no fold structure; recorded as a single "fold".
    pub fn single(score: f64) -> Self {
        Self { score, per_fold: vec![score] }
    }

    /// Unweighted mean of per-fold values.
    pub fn from_folds(per_fold: Vec<f64>) -> Self {
        let score = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
        Self { score, per_fold }
    }
}

/// Scores a feature subset; lower is better. Implementations must be pure:
/// the same subset always yields the same evaluation.
pub trait SubsetEvaluator: Sync {
    fn evaluate(&self, subset: &[usize]) -> Result<Evaluation, SelectionError>;
}

impl<F> SubsetEvaluator for F
where
    F: Fn(&[usize]) -> Result<Evaluation, SelectionError> + Sync,
{
    fn evaluate(&self, subset: &[usize]) -> Result<Evaluation, SelectionError> {
        self(subset)
    }
}

/// k-fold cross-validated misclassification error of a subset.
///
/// For each fold the classifier is fitted on the other folds and scored on
/// the held-out one; the result is the plain average over folds.
pub fn cv_mce(
    ds: &Dataset,
    folds: &FoldAssignment,
    subset: &[usize],
    kind: DiscriminantKind,
    ridge: f64,
) -> Result<Evaluation, SelectionError> {
    let per_fold = (0..folds.k())
        .map(|fold| {
            let fit_rows = folds.training(fold);
            let held = folds.held_out(fold);
            DiscriminantModel::fit(ds, &fit_rows, subset, kind, ridge)
                .and_then(|m| classifiers::mce(&m, ds, &held))
                .map_err(|source| SelectionError::Fold { fold, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evaluation::from_folds(per_fold))
}

/// [`cv_mce`] packaged as an evaluator.
#[derive(Debug, Clone, Copy)]
pub struct CvMce<'a> {
    pub ds: &'a Dataset,
    pub folds: &'a FoldAssignment,
    pub kind: DiscriminantKind,
    pub ridge: f64,
}

impl SubsetEvaluator for CvMce<'_> {
    fn evaluate(&self, subset: &[usize]) -> Result<Evaluation, SelectionError> {
        cv_mce(self.ds, self.folds, subset, self.kind, self.ridge)
    }
}

/// Squared Mahalanobis distance between the two class means under the
/// pooled within-class covariance (`n - 2` divisor), restricted to `subset`.
pub fn mahalanobis_j(ds: &Dataset, obs: &[usize], subset: &[usize]) -> Result<f64, SelectionError> {
    if ds.n_classes() != 2 {
        return Err(SelectionError::Invalid(format!(
            "the separation criterion needs two classes, data has {}",
            ds.n_classes()
        )));
    }
    let model = DiscriminantModel::fit(ds, obs, subset, DiscriminantKind::Linear, 0.0)?;
    let means = model.class_means();
    let diff: Vec<f64> = means[1].iter().zip(means[0].iter()).map(|(a, b)| a - b).collect();
    Ok(classifiers::whitened_norm_sq(model.factor(0), &diff))
}

/// `δᵀ S⁻¹ δ` for an explicit mean difference and covariance.
pub fn mahalanobis_criterion(mean_diff: &[f64], cov: &DMatrix<f64>) -> Result<f64, SelectionError> {
    if cov.nrows() != mean_diff.len() || cov.ncols() != mean_diff.len() {
        return Err(SelectionError::Invalid(format!(
            "covariance is {}x{}, mean difference has {} entries",
            cov.nrows(),
            cov.ncols(),
            mean_diff.len()
        )));
    }
    let chol = Cholesky::new(cov.clone()).ok_or(ClassifierError::Singular { class: None })?;
    Ok(classifiers::whitened_norm_sq(&chol.unpack(), mean_diff))
}

/// Negated [`mahalanobis_j`] as a loss.
#[derive(Debug, Clone, Copy)]
pub struct NegatedSeparation<'a> {
    pub ds: &'a Dataset,
    pub obs: &'a [usize],
}

impl SubsetEvaluator for NegatedSeparation<'_> {
    fn evaluate(&self, subset: &[usize]) -> Result<Evaluation, SelectionError> {
        Ok(Evaluation::single(-mahalanobis_j(self.ds, self.obs, subset)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopMode {
    /// Stop the first time a step strictly worsens the score. Equal scores
    /// continue the search.
    #[default]
    FirstLocalMin,
    /// Search the whole size range and keep the best step.
    RangeMin,
}

impl fmt::Display for StopMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopMode::FirstLocalMin => "local-min",
            StopMode::RangeMin => "range-min",
        })
    }
}

/// When the sequential search ends and which step it keeps.
///
/// `max_size` bounds the subset size in a forward search; in a backward
/// search it is the cardinality at which removal stops. Among steps tied for
/// the best score, `prefer_smaller` keeps the smallest subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopRule {
    pub mode: StopMode,
    pub max_size: usize,
    pub prefer_smaller: bool,
}

impl StopRule {
    pub fn new(mode: StopMode, max_size: usize) -> Self {
        Self { mode, max_size, prefer_smaller: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    FirstLocalMin,
    MaxSizeReached,
    CandidatesExhausted,
    RangeMin,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::FirstLocalMin => "first-local-min",
            StopReason::MaxSizeReached => "max-size-reached",
            StopReason::CandidatesExhausted => "candidates-exhausted",
            StopReason::RangeMin => "range-min",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    /// Feature added (forward) or removed (backward). `None` only for the
    /// starting full set of a backward search.
    pub feature: Option<usize>,
    pub subset: Vec<usize>,
    pub score: f64,
    pub per_fold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub direction: Direction,
    pub steps: Vec<SelectionStep>,
    pub stop_reason: StopReason,
    /// Index into `steps` of the kept subset.
    pub selected_step: usize,
    pub selected: Vec<usize>,
}

impl SelectionTrace {
    pub fn selected_score(&self) -> f64 {
        self.steps[self.selected_step].score
    }
}

/// Greedy sequential search over `candidates`.
///
/// Forward search starts from the empty set and at each step adds the
/// candidate whose extension scores lowest; backward search starts from all
/// candidates and removes the feature whose removal scores lowest. Equal
/// scores go to the earlier candidate. All extensions of a step are evaluated
/// (in parallel) before the choice is made, so results do not depend on the
/// number of worker threads. Subsets the evaluator rejects are skipped.
pub fn sequential_select(
    candidates: &[usize],
    direction: Direction,
    evaluator: &dyn SubsetEvaluator,
    stop: StopRule,
) -> Result<SelectionTrace, SelectionError> {
    if candidates.is_empty() {
        return Err(SelectionError::Invalid("no candidate features".into()));
    }
    if stop.max_size == 0 {
        return Err(SelectionError::Invalid("max size must be >= 1".into()));
    }
    if !candidates.iter().all_unique() {
        return Err(SelectionError::Invalid("candidate features must be distinct".into()));
    }

    let mut steps: Vec<SelectionStep> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    match direction {
        Direction::Forward => {}
        Direction::Backward => {
            current = candidates.to_vec();
            let eval = evaluator.evaluate(&current).map_err(|e| {
                log::debug!("full candidate set rejected: {e}");
                SelectionError::NoFeasibleCandidate { step: 0 }
            })?;
            steps.push(SelectionStep {
                feature: None,
                subset: current.clone(),
                score: eval.score,
                per_fold: eval.per_fold,
            });
        }
    }

    let target_reached = |current: &[usize]| match direction {
        Direction::Forward => current.len() >= stop.max_size,
        Direction::Backward => current.len() <= stop.max_size.max(1),
    };

    let mut reason = None;
    loop {
        if target_reached(&current) {
            reason = Some(StopReason::MaxSizeReached);
            break;
        }
        let options: Vec<(usize, Vec<usize>)> = match direction {
            Direction::Forward => candidates
                .iter()
                .filter(|c| !current.contains(c))
                .map(|&c| {
                    let mut s = current.clone();
                    s.push(c);
                    (c, s)
                })
                .collect(),
            Direction::Backward => current
                .iter()
                .map(|&c| (c, current.iter().copied().filter(|&f| f != c).collect()))
                .collect(),
        };
        if options.is_empty() {
            reason = Some(StopReason::CandidatesExhausted);
            break;
        }
        let evaluated: Vec<_> = options
            .par_iter()
            .map(|(_, subset)| evaluator.evaluate(subset))
            .collect();

        let mut best: Option<(usize, Evaluation)> = None;
        for (i, result) in evaluated.into_iter().enumerate() {
            match result {
                Ok(eval) => {
                    if best.as_ref().is_none_or(|(_, b)| eval.score < b.score) {
                        best = Some((i, eval));
                    }
                }
                Err(e) => log::debug!("skipping subset {:?}: {e}", options[i].1),
            }
        }
        let Some((i, eval)) = best else {
            if steps.is_empty() {
                return Err(SelectionError::NoFeasibleCandidate { step: 1 });
            }
            reason = Some(StopReason::CandidatesExhausted);
            break;
        };
        let (feature, subset) = options.into_iter().nth(i).expect("chosen option exists");
        let worsened = steps.last().is_some_and(|prev| eval.score > prev.score);
        current = subset.clone();
        steps.push(SelectionStep {
            feature: Some(feature),
            subset,
            score: eval.score,
            per_fold: eval.per_fold,
        });
        if worsened && stop.mode == StopMode::FirstLocalMin {
            break;
        }
    }

    let (considered, stop_reason) = match stop.mode {
        StopMode::RangeMin => (steps.len(), StopReason::RangeMin),
        StopMode::FirstLocalMin => match reason {
            None => (steps.len() - 1, StopReason::FirstLocalMin),
            Some(r) => (steps.len(), r),
        },
    };
    let selected_step = designated_step(&steps[..considered], stop.prefer_smaller);
    Ok(SelectionTrace {
        direction,
        selected: steps[selected_step].subset.clone(),
        steps,
        stop_reason,
        selected_step,
    })
}

/// Lowest-scoring step; among equal scores the smallest (or largest) subset.
fn designated_step(steps: &[SelectionStep], prefer_smaller: bool) -> usize {
    let mut best = 0;
    for (i, s) in steps.iter().enumerate().skip(1) {
        let b = &steps[best];
        let better = s.score < b.score
            || (s.score == b.score
                && if prefer_smaller {
                    s.subset.len() < b.subset.len()
                } else {
                    s.subset.len() > b.subset.len()
                });
        if better {
            best = i;
        }
    }
    best
}

/// Exact minimum of `evaluator` over all `size`-subsets of `candidates`.
///
/// Subsets are enumerated in lexicographic order of sorted feature indices
/// and ties keep the first. Rejected subsets are skipped. Refuses to run when
/// more than `cap` subsets would be evaluated.
pub fn exhaustive_best_subset(
    candidates: &[usize],
    size: usize,
    evaluator: &dyn SubsetEvaluator,
    cap: u128,
) -> Result<(Vec<usize>, f64), SelectionError> {
    if size == 0 || size > candidates.len() {
        return Err(SelectionError::Invalid(format!(
            "subset size {size} outside 1..={}",
            candidates.len()
        )));
    }
    let combinations = binomial(candidates.len() as u128, size as u128);
    if combinations > cap {
        return Err(SelectionError::CapExceeded { combinations, cap });
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let subsets: Vec<Vec<usize>> = sorted.into_iter().combinations(size).collect();
    let scores: Vec<_> = subsets.par_iter().map(|s| evaluator.evaluate(s)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in scores.into_iter().enumerate() {
        if let Ok(eval) = r {
            if best.is_none_or(|(_, b)| eval.score < b) {
                best = Some((i, eval.score));
            }
        }
    }
    let (i, score) = best.ok_or(SelectionError::NoFeasibleCandidate { step: 0 })?;
    Ok((subsets[i].clone(), score))
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}
