//! Gaussian discriminant classifiers.
//!
//! Both kinds score an observation `x` for class `c` as
//!
//! ```text
//! δ_c(x) = -½ log|Σ_c| - ½ (x - μ_c)ᵀ Σ_c⁻¹ (x - μ_c) + log π_c
//! ```
//!
//! and predict the arg-max, ties going to the lower class id. The linear
//! kind shares one pooled covariance across classes (divisor `n - C`), the
//! quadratic kind keeps one per class (divisor `n_c - 1`). Priors are class
//! frequencies in the fitting data. Covariances are only ever used through
//! their Cholesky factors: the quadratic form is a triangular solve and the
//! log-determinant is `2 Σ log L_ii`.

use std::fmt;

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::dataset::Dataset;

/// A Cholesky pivot whose square falls below this fraction of the matching
/// covariance diagonal marks the matrix as numerically singular.
const PIVOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DiscriminantKind {
    /// Shared (pooled) covariance, affine boundaries.
    #[default]
    Linear,
    /// Per-class covariance, quadratic boundaries.
    Quadratic,
}

impl fmt::Display for DiscriminantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiscriminantKind::Linear => "lda",
            DiscriminantKind::Quadratic => "qda",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error(
        "{kind} with {features} features is infeasible for class counts {counts:?} \
         (at most {bound} features without ridge)"
    )]
    Infeasible {
        kind: DiscriminantKind,
        features: usize,
        counts: Vec<usize>,
        bound: usize,
    },
    #[error("class {class} has {count} observations; at least 2 are required")]
    TooFewObservations { class: usize, count: usize },
    #[error("covariance of {} is singular; add ridge regularization", .class.map_or("pooled classes".to_string(), |c| format!("class {c}")))]
    Singular { class: Option<usize> },
    #[error("{0}")]
    Invalid(String),
}

/// Largest subset size for which the covariance estimate can be full rank
/// without ridge: `min(n_c) - 1` per class for QDA, `Σ n_c - C` pooled for LDA.
pub fn max_features(class_counts: &[usize], kind: DiscriminantKind) -> usize {
    match kind {
        DiscriminantKind::Quadratic => class_counts
            .iter()
            .min()
            .map_or(0, |&m| m.saturating_sub(1)),
        DiscriminantKind::Linear => class_counts
            .iter()
            .sum::<usize>()
            .saturating_sub(class_counts.len()),
    }
}

/// A fitted LDA or QDA model over a fixed, ordered feature subset.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantModel {
    kind: DiscriminantKind,
    feature_subset: Vec<usize>,
    class_means: Vec<DVector<f64>>,
    /// Lower Cholesky factors: one shared (linear) or one per class.
    factors: Vec<DMatrix<f64>>,
    log_dets: Vec<f64>,
    log_priors: Vec<f64>,
    class_counts: Vec<usize>,
    ridge: f64,
}

impl DiscriminantModel {
    /// Fits on rows `obs` of `ds`, columns `feature_subset`. `ridge` is added
    /// to every covariance diagonal before factorization.
    pub fn fit(
        ds: &Dataset,
        obs: &[usize],
        feature_subset: &[usize],
        kind: DiscriminantKind,
        ridge: f64,
    ) -> Result<Self, ClassifierError> {
        if feature_subset.is_empty() {
            return Err(ClassifierError::Invalid("empty feature subset".into()));
        }
        if let Some(&f) = feature_subset.iter().find(|&&f| f >= ds.n_features()) {
            return Err(ClassifierError::Invalid(format!(
                "feature {f} outside 0..{}",
                ds.n_features()
            )));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(ClassifierError::Invalid(format!("ridge must be >= 0, got {ridge}")));
        }
        let d = feature_subset.len();
        let n_classes = ds.n_classes();
        let counts = ds.class_counts(obs);
        if let Some((class, &count)) = counts.iter().enumerate().find(|&(_, &c)| c < 2) {
            return Err(ClassifierError::TooFewObservations { class, count });
        }
        let bound = max_features(&counts, kind);
        if ridge == 0.0 && d > bound {
            return Err(ClassifierError::Infeasible {
                kind,
                features: d,
                counts,
                bound,
            });
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for &i in obs {
            members[ds.label(i)].push(i);
        }
        let mut class_means = Vec::with_capacity(n_classes);
        let mut scatters = Vec::with_capacity(n_classes);
        let mut row = vec![0.0; d];
        for rows in &members {
            let mut x = DMatrix::zeros(rows.len(), d);
            for (r, &i) in rows.iter().enumerate() {
                ds.gather_row(i, feature_subset, &mut row);
                for (j, &v) in row.iter().enumerate() {
                    x[(r, j)] = v;
                }
            }
            let mean = DVector::from_iterator(d, x.column_iter().map(|c| c.mean()));
            for mut col in x.column_iter_mut() {
                let m = col.mean();
                col.add_scalar_mut(-m);
            }
            scatters.push(x.tr_mul(&x));
            class_means.push(mean);
        }

        let n = obs.len() as f64;
        let (factors, log_dets) = match kind {
            DiscriminantKind::Linear => {
                let mut pooled = DMatrix::zeros(d, d);
                for s in &scatters {
                    pooled += s;
                }
                let dof = (obs.len() - n_classes) as f64;
                let (l, log_det) = factorize(pooled / dof, ridge, None)?;
                (vec![l], vec![log_det; n_classes])
            }
            DiscriminantKind::Quadratic => {
                let mut factors = Vec::with_capacity(n_classes);
                let mut log_dets = Vec::with_capacity(n_classes);
                for (c, s) in scatters.into_iter().enumerate() {
                    let cov = s / (counts[c] - 1) as f64;
                    let (l, log_det) = factorize(cov, ridge, Some(c))?;
                    factors.push(l);
                    log_dets.push(log_det);
                }
                (factors, log_dets)
            }
        };
        let log_priors = counts.iter().map(|&c| (c as f64 / n).ln()).collect();
        Ok(Self {
            kind,
            feature_subset: feature_subset.to_vec(),
            class_means,
            factors,
            log_dets,
            log_priors,
            class_counts: counts,
            ridge,
        })
    }

    pub fn kind(&self) -> DiscriminantKind {
        self.kind
    }

    pub fn feature_subset(&self) -> &[usize] {
        &self.feature_subset
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    pub fn class_means(&self) -> &[DVector<f64>] {
        &self.class_means
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn log_priors(&self) -> &[f64] {
        &self.log_priors
    }

    pub fn log_dets(&self) -> &[f64] {
        &self.log_dets
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Cholesky factor used for `class`.
    pub fn factor(&self, class: usize) -> &DMatrix<f64> {
        match self.kind {
            DiscriminantKind::Linear => &self.factors[0],
            DiscriminantKind::Quadratic => &self.factors[class],
        }
    }

    /// Squared Mahalanobis distance of `x` from the mean of `class` under
    /// that class's covariance.
    pub fn mahalanobis_sq(&self, class: usize, x: &[f64]) -> f64 {
        let mean = &self.class_means[class];
        let diff: Vec<f64> = x.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
        whitened_norm_sq(self.factor(class), &diff)
    }

    /// Discriminant value of every class for `x`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassifierError> {
        self.check_row(x)?;
        Ok(self.scores_unchecked(x))
    }

    fn scores_unchecked(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_classes())
            .map(|c| -0.5 * self.log_dets[c] - 0.5 * self.mahalanobis_sq(c, x) + self.log_priors[c])
            .collect()
    }

    /// Predicted class for a row given over `feature_subset`.
    pub fn predict(&self, x: &[f64]) -> Result<usize, ClassifierError> {
        self.check_row(x)?;
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> usize {
        let scores = self.scores_unchecked(x);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    fn check_row(&self, x: &[f64]) -> Result<(), ClassifierError> {
        if x.len() != self.feature_subset.len() {
            return Err(ClassifierError::Invalid(format!(
                "row has {} values, model expects {}",
                x.len(),
                self.feature_subset.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifierError::Invalid("row contains non-finite values".into()));
        }
        Ok(())
    }

    /// Number of rows in `obs` whose prediction differs from the label.
    pub fn misclassified(&self, ds: &Dataset, obs: &[usize]) -> Result<usize, ClassifierError> {
        if let Some(&f) = self.feature_subset.iter().find(|&&f| f >= ds.n_features()) {
            return Err(ClassifierError::Invalid(format!(
                "model feature {f} outside 0..{}",
                ds.n_features()
            )));
        }
        let mut row = vec![0.0; self.feature_subset.len()];
        let mut wrong = 0;
        for &i in obs {
            ds.gather_row(i, &self.feature_subset, &mut row);
            if self.predict_unchecked(&row) != ds.label(i) {
                wrong += 1;
            }
        }
        Ok(wrong)
    }
}

/// Misclassification error: misclassified rows over evaluated rows.
pub fn mce(model: &DiscriminantModel, ds: &Dataset, obs: &[usize]) -> Result<f64, ClassifierError> {
    if obs.is_empty() {
        return Err(ClassifierError::Invalid("no observations to evaluate".into()));
    }
    Ok(model.misclassified(ds, obs)? as f64 / obs.len() as f64)
}

/// Adds `ridge` to the diagonal and returns the lower Cholesky factor with
/// its log-determinant.
fn factorize(
    mut cov: DMatrix<f64>,
    ridge: f64,
    class: Option<usize>,
) -> Result<(DMatrix<f64>, f64), ClassifierError> {
    for i in 0..cov.nrows() {
        cov[(i, i)] += ridge;
    }
    let diag: Vec<f64> = cov.diagonal().iter().copied().collect();
    let l = Cholesky::new(cov)
        .ok_or(ClassifierError::Singular { class })?
        .unpack();
    let mut log_det = 0.0;
    for (i, &d) in diag.iter().enumerate() {
        let pivot = l[(i, i)];
        if !(pivot > 0.0) || pivot * pivot <= PIVOT_RTOL * d {
            return Err(ClassifierError::Singular { class });
        }
        log_det += 2.0 * pivot.ln();
    }
    Ok((l, log_det))
}

/// `‖L⁻¹ v‖²` by forward substitution.
pub(crate) fn whitened_norm_sq(l: &DMatrix<f64>, v: &[f64]) -> f64 {
    let d = v.len();
    let mut z = vec![0.0; d];
    let mut total = 0.0;
    for i in 0..d {
        let mut acc = v[i];
        for (j, zj) in z.iter().enumerate().take(i) {
            acc -= l[(i, j)] * zj;
        }
        let zi = acc / l[(i, i)];
        z[i] = zi;
        total += zi * zi;
    }
    total
}
