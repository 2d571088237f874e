//! Independent numerical oracles for the special functions.
//!
//! Both oracles integrate a density by tanh-sinh quadrature and take a ratio
//! of two integrals, so no gamma or beta normalising constant is involved.
//! Node positions are kept as distances to each interval end so that
//! endpoint singularities are evaluated without cancellation, and the
//! integrand is summed in log space.

#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

/// Nodes of the tanh-sinh rule on `[0, 1]` with step `h`: distance from the
/// left end, distance from the right end, log weight.
fn nodes(h: f64) -> Vec<(f64, f64, f64)> {
    let limit = 4.5;
    let k_max = (limit / h).ceil() as i64;
    (-k_max..=k_max)
        .filter_map(|k| {
            let s = k as f64 * h;
            let v = FRAC_PI_2 * s.sinh();
            let from_lo = 1.0 / (1.0 + (-2.0 * v).exp());
            let from_hi = 1.0 / (1.0 + (2.0 * v).exp());
            if from_lo == 0.0 || from_hi == 0.0 {
                return None;
            }
            // ln cosh v = |v| + ln(1 + e^{-2|v|}) - ln 2
            let ln_cosh = v.abs() + (-2.0 * v.abs()).exp().ln_1p() - std::f64::consts::LN_2;
            let ln_w = (h * FRAC_PI_2 * s.cosh()).ln() - 2.0 * ln_cosh - std::f64::consts::LN_2;
            Some((from_lo, from_hi, ln_w))
        })
        .collect()
}

/// Log-sum-exp of terms.
fn log_sum(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `A / (A + B)` from `ln A` and `ln B`.
fn share(ln_a: f64, ln_b: f64) -> f64 {
    if ln_a == f64::NEG_INFINITY {
        return 0.0;
    }
    1.0 / (1.0 + (ln_b - ln_a).exp())
}

/// Halves the step until two successive ratios agree, never stopping
/// before a step of 1/32.
fn refine(ratio_at: impl Fn(&[(f64, f64, f64)]) -> f64) -> f64 {
    let mut h = 0.25;
    let mut last = ratio_at(&nodes(h));
    for _ in 0..9 {
        h /= 2.0;
        let next = ratio_at(&nodes(h));
        if h <= 1.0 / 32.0 && (next - last).abs() < 1e-14 {
            return next;
        }
        last = next;
    }
    last
}

/// Regularized incomplete beta `I_x(a, b)` as the share of the beta density's
/// mass on `[0, x]`.
pub fn inc_beta_by_quadrature(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_density = |t: f64, one_minus_t: f64| (a - 1.0) * t.ln() + (b - 1.0) * one_minus_t.ln();
    refine(|nodes| {
        let left: Vec<f64> = nodes
            .iter()
            .map(|&(lo, hi, w)| {
                let t = x * lo;
                let one_minus_t = (1.0 - x) + x * hi;
                ln_density(t, one_minus_t) + w + x.ln()
            })
            .collect();
        let right: Vec<f64> = nodes
            .iter()
            .map(|&(lo, hi, w)| {
                let t = x + (1.0 - x) * lo;
                let one_minus_t = (1.0 - x) * hi;
                ln_density(t, one_minus_t) + w + (1.0 - x).ln()
            })
            .collect();
        share(log_sum(&left), log_sum(&right))
    })
}

/// Two-sided Student-t tail probability `P(|T| >= |t|)` with `df` degrees of
/// freedom, as the ratio of the density's mass beyond `|t|` to its mass on
/// the positive half line.
pub fn t_two_sided_by_quadrature(t: f64, df: f64) -> f64 {
    let c = t.abs();
    let ln_density = |s: f64| -(df + 1.0) / 2.0 * (s * s / df).ln_1p();
    // s = start + v / (1 - v) maps [0, 1) onto [start, inf)
    let ln_mass_from = |start: f64, nodes: &[(f64, f64, f64)]| {
        let terms: Vec<f64> = nodes
            .iter()
            .map(|&(lo, hi, w)| ln_density(start + lo / hi) - 2.0 * hi.ln() + w)
            .collect();
        log_sum(&terms)
    };
    refine(|nodes| {
        let tail = ln_mass_from(c, nodes);
        let half = ln_mass_from(0.0, nodes);
        (tail - half).exp().min(1.0)
    })
}

/// Welch statistic and degrees of freedom written out directly.
pub fn welch_by_formula(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (n, m, var)
    };
    let (n1, m1, v1) = stats(xs);
    let (n2, m2, v2) = stats(ys);
    let t = (m1 - m2) / (v1 / n1 + v2 / n2).sqrt();
    let df = (v1 / n1 + v2 / n2).powi(2) / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    (t, df)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}
