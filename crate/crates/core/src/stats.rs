//! Univariate filter statistics: two-sample t-tests per feature with exact
//! Student-t p-values, p-value ranking and empirical CDFs.

use std::cmp::Ordering;

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("{0}")]
    Invalid(String),
}

/// Reported as `t` (with the sign of the mean difference) when both samples
/// have zero variance but different means.
pub const INFINITE_SEPARATION_T: f64 = f64::MAX;

const CF_EPS: f64 = 1e-16;
const CF_TINY: f64 = 1e-300;
const CF_MAX_ITER: usize = 10_000;

/// Regularized incomplete beta function `I_x(a, b)`.
///
/// Evaluates the continued fraction with the modified Lentz method, using
/// `I_x(a, b) = 1 - I_{1-x}(b, a)` when `x > (a + 1) / (a + b + 2)` so the
/// fraction is always evaluated where it converges quickly.
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> Result<f64, StatsError> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return Err(StatsError::Domain(format!(
            "shape parameters must be positive and finite, got a={a}, b={b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::Domain(format!("x must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta;
    let value = if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(b, a, 1.0 - x) / b
    };
    Ok(value.clamp(0.0, 1.0))
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    let guard = |v: f64| if v.abs() < CF_TINY { CF_TINY } else { v };
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let even = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + even * d);
        c = guard(1.0 + even / c);
        h *= d * c;
        let odd = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + odd * d);
        c = guard(1.0 + odd / c);
        let step = d * c;
        h *= step;
        if (step - 1.0).abs() < CF_EPS {
            return h;
        }
    }
    log::warn!("incomplete beta fraction did not converge for a={a}, b={b}, x={x}");
    h
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::Domain(format!("df must be positive, got {df}")));
    }
    if t.is_nan() {
        return Err(StatsError::Domain("t is NaN".into()));
    }
    let x = df / (df + t * t);
    reg_inc_beta(df / 2.0, 0.5, x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TTestMode {
    /// Unequal variances, Welch–Satterthwaite degrees of freedom.
    #[default]
    Welch,
    /// Equal variances, pooled estimate, `n1 + n2 - 2` degrees of freedom.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub feature_index: usize,
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

/// Welch's two-sample t-test of `mean(xs) - mean(ys)`.
pub fn welch_t(xs: &[f64], ys: &[f64]) -> Result<TTestResult, StatsError> {
    t_test(xs, ys, TTestMode::Welch)
}

/// Two-sample t-test in the given mode. `feature_index` is left at 0.
///
/// Zero variance in both samples is handled without NaNs: equal means give
/// `t = 0, p = 1`; different means give `p = 0` and `t = ±INFINITE_SEPARATION_T`.
/// In both cases `df` is `n1 + n2 - 2`.
pub fn t_test(xs: &[f64], ys: &[f64], mode: TTestMode) -> Result<TTestResult, StatsError> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(StatsError::Invalid(format!(
            "t-test needs at least 2 values per sample, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (m1, v1) = mean_var(xs);
    let (m2, v2) = mean_var(ys);
    let diff = m1 - m2;
    let (se2, df) = match mode {
        TTestMode::Welch => {
            let (a, b) = (v1 / n1, v2 / n2);
            let df = (a + b).powi(2) / (a * a / (n1 - 1.0) + b * b / (n2 - 1.0));
            (a + b, df)
        }
        TTestMode::Pooled => {
            let pooled = ((n1 - 1.0) * v1 + (n2 - 1.0) * v2) / (n1 + n2 - 2.0);
            (pooled * (1.0 / n1 + 1.0 / n2), n1 + n2 - 2.0)
        }
    };
    if se2 == 0.0 {
        let df = n1 + n2 - 2.0;
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (INFINITE_SEPARATION_T.copysign(diff), 0.0)
        };
        return Ok(TTestResult { feature_index: 0, t, df, p });
    }
    let t = diff / se2.sqrt();
    let p = student_t_two_sided(t, df)?;
    Ok(TTestResult { feature_index: 0, t, df, p })
}

/// Sample mean and unbiased variance, two-pass.
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// One t-test per feature comparing class 0 against class 1 over `obs`.
/// Each feature depends only on its own column; features are tested in
/// parallel and returned in feature order.
pub fn feature_pvalues(
    ds: &Dataset,
    obs: &[usize],
    mode: TTestMode,
) -> Result<Vec<TTestResult>, StatsError> {
    if ds.n_classes() != 2 {
        return Err(StatsError::Invalid(format!(
            "the t-test filter needs exactly two classes, data has {}",
            ds.n_classes()
        )));
    }
    let (class0, class1): (Vec<usize>, Vec<usize>) = obs.iter().partition(|&&i| ds.label(i) == 0);
    if class0.len() < 2 || class1.len() < 2 {
        return Err(StatsError::Invalid(format!(
            "each class needs at least 2 observations, got {} and {}",
            class0.len(),
            class1.len()
        )));
    }
    (0..ds.n_features())
        .into_par_iter()
        .map(|f| {
            let column = ds.column(f);
            let xs: Vec<f64> = class0.iter().map(|&i| column[i]).collect();
            let ys: Vec<f64> = class1.iter().map(|&i| column[i]).collect();
            t_test(&xs, &ys, mode).map(|r| TTestResult { feature_index: f, ..r })
        })
        .collect()
}

/// Feature indices ordered by ascending p, then descending |t|, then
/// ascending feature index.
pub fn rank_by_pvalue(results: &[TTestResult]) -> Vec<usize> {
    let mut sorted: Vec<&TTestResult> = results.iter().collect();
    sorted.sort_by(|a, b| {
        a.p.total_cmp(&b.p)
            .then_with(|| b.t.abs().total_cmp(&a.t.abs()))
            .then_with(|| a.feature_index.cmp(&b.feature_index))
    });
    sorted.into_iter().map(|r| r.feature_index).collect()
}

/// Empirical cumulative distribution of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::Invalid("ECDF of an empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::Invalid("ECDF sample contains non-finite values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// Fraction of the sample at or below `q`.
    pub fn evaluate(&self, q: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v.partial_cmp(&q) != Some(Ordering::Greater));
        below as f64 / self.sorted.len() as f64
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }

    /// `(value, i / n)` for the i-th smallest value, i = 1..=n.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.sorted.len() as f64;
        self.sorted
            .iter()
            .enumerate()
            .map(move |(i, &v)| (v, (i + 1) as f64 / n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn beta_simple_values() {
        assert!((reg_inc_beta(1.0, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(reg_inc_beta(5.0, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(5.0, 2.0, 1.0).unwrap(), 1.0);
        // 12 (x^2/2 - 2x^3/3 + x^4/4) at x = 1/4.
        let x: f64 = 0.25;
        let exact = 12.0 * (x.powi(2) / 2.0 - 2.0 * x.powi(3) / 3.0 + x.powi(4) / 4.0);
        assert!((exact - 0.26171875).abs() < 1e-15);
        assert!((reg_inc_beta(2.0, 3.0, 0.25).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn beta_domain_errors() {
        assert!(reg_inc_beta(0.0, 1.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, -2.0, 0.5).is_err());
        assert!(reg_inc_beta(1.0, 1.0, 1.5).is_err());
        assert!(reg_inc_beta(1.0, 1.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn beta_reflection(a in 0.1f64..300.0, b in 0.1f64..300.0, x in 0.0f64..=1.0) {
            let lhs = reg_inc_beta(a, b, x).unwrap() + reg_inc_beta(b, a, 1.0 - x).unwrap();
            prop_assert!((lhs - 1.0).abs() < 1e-10, "a={} b={} x={} sum={}", a, b, x, lhs);
        }

        #[test]
        fn welch_antisymmetric(
            xs in prop::collection::vec(-50.0f64..50.0, 2..20),
            ys in prop::collection::vec(-50.0f64..50.0, 2..20),
        ) {
            let ab = welch_t(&xs, &ys).unwrap();
            let ba = welch_t(&ys, &xs).unwrap();
            prop_assert_eq!(ab.t, -ba.t);
            prop_assert_eq!(ab.df, ba.df);
            prop_assert_eq!(ab.p, ba.p);
        }

        #[test]
        fn welch_shift_scale_invariant(
            xs in prop::collection::vec(-5.0f64..5.0, 3..15),
            ys in prop::collection::vec(-5.0f64..5.0, 3..15),
            scale in 0.1f64..10.0,
            shift in -100.0f64..100.0,
        ) {
            let base = welch_t(&xs, &ys).unwrap();
            prop_assume!(base.t.abs() < 1e6);
            let tx: Vec<f64> = xs.iter().map(|v| scale * v + shift).collect();
            let ty: Vec<f64> = ys.iter().map(|v| scale * v + shift).collect();
            let moved = welch_t(&tx, &ty).unwrap();
            prop_assert!((moved.t - base.t).abs() <= 1e-10 * base.t.abs().max(1.0));
            prop_assert!((moved.df - base.df).abs() <= 1e-10 * base.df);
            prop_assert!((moved.p - base.p).abs() <= 1e-10);
        }

        #[test]
        fn rank_is_permutation(ps in prop::collection::vec(0.0f64..=1.0, 1..60)) {
            let results: Vec<TTestResult> = ps
                .iter()
                .enumerate()
                .map(|(i, &p)| TTestResult { feature_index: i, t: 1.0 - p, df: 3.0, p })
                .collect();
            let mut order = rank_by_pvalue(&results);
            for w in order.windows(2) {
                prop_assert!(ps[w[0]] <= ps[w[1]]);
            }
            order.sort_unstable();
            prop_assert_eq!(order, (0..ps.len()).collect::<Vec<_>>());
        }

        #[test]
        fn ecdf_monotone(vals in prop::collection::vec(-10.0f64..10.0, 1..50), qs in prop::collection::vec(-11.0f64..11.0, 2..20)) {
            let e = Ecdf::new(&vals).unwrap();
            let mut qs = qs;
            qs.sort_by(f64::total_cmp);
            for w in qs.windows(2) {
                prop_assert!(e.evaluate(w[0]) <= e.evaluate(w[1]));
            }
            for (v, cum) in e.points() {
                // right-continuous: the jump at v is included at v
                prop_assert!(e.evaluate(v) >= cum);
                let count = vals.iter().filter(|&&x| x <= v).count();
                prop_assert_eq!(e.evaluate(v), count as f64 / vals.len() as f64);
            }
        }
    }

    #[test]
    fn p_monotone_in_abs_t() {
        for df in [1.0, 2.5, 7.0, 30.0, 200.0] {
            let mut last = 1.0;
            for i in 0..=400 {
                let t = i as f64 * 0.05;
                let p = student_t_two_sided(t, df).unwrap();
                assert!(p <= last, "df={df} t={t}");
                assert_eq!(p, student_t_two_sided(-t, df).unwrap());
                last = p;
            }
        }
    }

    #[test]
    fn welch_identical_samples() {
        let r = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((r.t, r.p), (0.0, 1.0));
    }

    #[test]
    fn welch_reference_pair() {
        let r = welch_t(&[1.0, 2.0, 3.0, 4.0], &[3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t + 2.190_890_230_020_664_7).abs() < 1e-12);
        assert!((r.df - 6.0).abs() < 1e-12);
        // with df = 6 the two-sided tail at t^2 = 4.8 is exactly 23/324
        assert!((r.p - 23.0 / 324.0).abs() < 1e-12);
    }

    #[test]
    fn welch_zero_variance_cases() {
        let r = welch_t(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.p, 0.0);
        assert_eq!(r.t, -INFINITE_SEPARATION_T);
        let r = welch_t(&[2.0, 2.0], &[2.0, 2.0, 2.0]).unwrap();
        assert_eq!((r.t, r.p, r.df), (0.0, 1.0, 3.0));
        assert!(welch_t(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn pooled_mode_uses_n_minus_two() {
        let r = t_test(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0, 8.0], TTestMode::Pooled).unwrap();
        assert_eq!(r.df, 5.0);
        // pooled variance = (2*1 + 3*20/3)/5 = 4.4
        let t = (2.0 - 5.0) / (4.4f64 * (1.0 / 3.0 + 1.0 / 4.0)).sqrt();
        assert!((r.t - t).abs() < 1e-12);
    }

    fn two_class(values: Vec<f64>, labels: Vec<usize>, d: usize) -> Dataset {
        let n = labels.len();
        Dataset::new(DMatrix::from_row_slice(n, d, &values), labels, None).unwrap()
    }

    #[test]
    fn feature_pvalues_perfect_separation_and_shape() {
        let labels = vec![0, 0, 0, 1, 1, 1];
        let values = vec![0.0, 0.3, 0.0, 1.2, 0.0, -0.4, 1.0, 0.9, 1.0, 0.1, 1.0, 0.5];
        let ds = two_class(values, labels, 2);
        let res = feature_pvalues(&ds, &(0..6).collect::<Vec<_>>(), TTestMode::Welch).unwrap();
        assert_eq!(res.len(), 2);
        assert_eq!(res[0].p, 0.0);
        assert_eq!(res[0].t, -INFINITE_SEPARATION_T);
        assert_eq!(res[1].feature_index, 1);

        let single = two_class(vec![1.0, 2.0, 3.0, 5.0], vec![0, 0, 1, 1], 1);
        assert_eq!(feature_pvalues(&single, &[0, 1, 2, 3], TTestMode::Welch).unwrap().len(), 1);
        assert!(feature_pvalues(&single, &[0, 1, 2], TTestMode::Welch).is_err());
    }

    #[test]
    fn feature_pvalues_rejects_three_classes() {
        let ds = two_class(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0, 0, 1, 1, 2, 2], 1);
        assert!(feature_pvalues(&ds, &[0, 1, 2, 3, 4, 5], TTestMode::Welch).is_err());
    }

    #[test]
    fn ranking_rules() {
        let mk = |p: &[f64], t: &[f64]| -> Vec<TTestResult> {
            p.iter()
                .zip(t)
                .enumerate()
                .map(|(i, (&p, &t))| TTestResult { feature_index: i, t, df: 5.0, p })
                .collect()
        };
        assert_eq!(rank_by_pvalue(&mk(&[0.5, 0.01, 0.3], &[1.0, 1.0, 1.0])), vec![1, 2, 0]);
        assert_eq!(rank_by_pvalue(&mk(&[0.0, 0.0], &[3.0, -9.0])), vec![1, 0]);
        let mut rev = mk(&[0.5, 0.01, 0.3], &[1.0, 2.0, 3.0]);
        rev.reverse();
        assert_eq!(rank_by_pvalue(&rev), vec![1, 2, 0]);
    }

    #[test]
    fn ecdf_counts() {
        let e = Ecdf::new(&[0.3, 0.1, 0.2]).unwrap();
        assert!((e.evaluate(0.2) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.evaluate(0.3), 1.0);
        assert_eq!(e.evaluate(0.0), 0.0);
        assert!(Ecdf::new(&[]).is_err());
        assert!(Ecdf::new(&[f64::NAN]).is_err());
    }
}
