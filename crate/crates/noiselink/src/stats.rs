//! Shared statistical helpers: normal tail probabilities, Wilson score
//! intervals for error rates, a two-sample Kolmogorov–Smirnov test, and a
//! chi-square goodness-of-fit test against an arbitrary CDF.
//!
//! Special functions (erfc, regularized incomplete gamma) come from `statrs`;
//! everything built on top of them lives here so the rest of the crate has a
//! single place to get its p-values from.

use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

/// Arithmetic mean. Returns 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n-1) sample variance. Returns 0 for fewer than two samples.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard normal CDF Phi(z).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival function Q(z) = 1 - Phi(z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

/// Wilson score interval for a binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilsonInterval {
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval for `successes` out of `trials` at critical value
/// `z` (1.96 for the usual 95% interval). Unlike the normal-approximation
/// interval it stays inside [0, 1] and behaves at zero observed successes.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> WilsonInterval {
    if trials == 0 {
        return WilsonInterval { lo: 0.0, hi: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    WilsonInterval {
        lo: (center - half).max(0.0),
        hi: (center + half).min(1.0),
    }
}

/// Result of a two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsResult {
    /// Maximum distance between the two empirical CDFs.
    pub statistic: f64,
    /// Asymptotic p-value for the hypothesis that both samples share a
    /// distribution.
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test.
///
/// The p-value uses the asymptotic Kolmogorov distribution with the small-
/// sample correction factor `sqrt(ne) + 0.12 + 0.11/sqrt(ne)` on the
/// statistic, where `ne = n1*n2/(n1+n2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    assert!(
        !a.is_empty() && !b.is_empty(),
        "KS test requires non-empty samples"
    );
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).expect("NaN in KS input"));
    ys.sort_by(|u, v| u.partial_cmp(v).expect("NaN in KS input"));

    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = xs[i];
        let y = ys[j];
        let t = x.min(y);
        while i < n1 && xs[i] <= t {
            i += 1;
        }
        while j < n2 && ys[j] <= t {
            j += 1;
        }
        let f1 = i as f64 / n1 as f64;
        let f2 = j as f64 / n2 as f64;
        d = d.max((f1 - f2).abs());
    }

    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2)`.
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct GofResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square goodness of fit of `samples` against the distribution whose CDF
/// is `cdf`, using `bins` equal-width bins spanning `[lo, hi]`. Probability
/// mass outside the span is folded into the edge bins, and adjacent bins are
/// merged until every expected count is at least 5 so the chi-square
/// approximation holds.
pub fn chi_square_gof<F: Fn(f64) -> f64>(
    samples: &[f64],
    cdf: F,
    bins: usize,
    lo: f64,
    hi: f64,
) -> GofResult {
    assert!(bins >= 2 && hi > lo, "degenerate binning");
    assert!(!samples.is_empty(), "GOF test requires samples");

    let n = samples.len() as f64;
    let width = (hi - lo) / bins as f64;
    let mut observed = vec![0.0f64; bins];
    for &s in samples {
        let idx = (((s - lo) / width).floor() as i64).clamp(0, bins as i64 - 1) as usize;
        observed[idx] += 1.0;
    }

    let mut expected = Vec::with_capacity(bins);
    for b in 0..bins {
        let left = if b == 0 { 0.0 } else { cdf(lo + b as f64 * width) };
        let right = if b == bins - 1 {
            1.0
        } else {
            cdf(lo + (b + 1) as f64 * width)
        };
        expected.push(n * (right - left));
    }

    // Merge adjacent low-expectation bins (rule of thumb: expected >= 5).
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut acc_obs, mut acc_exp) = (0.0, 0.0);
    for b in 0..bins {
        acc_obs += observed[b];
        acc_exp += expected[b];
        if acc_exp >= 5.0 {
            merged.push((acc_obs, acc_exp));
            acc_obs = 0.0;
            acc_exp = 0.0;
        }
    }
    if acc_exp > 0.0 {
        if let Some(last) = merged.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            merged.push((acc_obs, acc_exp));
        }
    }

    let statistic: f64 = merged
        .iter()
        .map(|&(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = merged.len().saturating_sub(1).max(1);
    GofResult {
        statistic,
        dof,
        p_value: gamma_ur(dof as f64 / 2.0, statistic / 2.0),
    }
}

// ----------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn normal_tail_reference_values() {
        assert!(approx(normal_sf(0.0), 0.5, 1e-12));
        assert!(approx(normal_sf(1.0), 0.158_655_253_9, 1e-9));
        assert!(approx(normal_sf(3.0), 1.349_898_03e-3, 1e-9));
        assert!(approx(normal_cdf(1.96), 0.975_002_1, 1e-6));
    }

    #[test]
    fn wilson_interval_contains_point_estimate() {
        let w = wilson_interval(10, 1000, 1.96);
        assert!(w.lo < 0.01 && 0.01 < w.hi, "interval {w:?} should cover 1%");
        assert!(w.lo > 0.0);
    }

    #[test]
    fn wilson_interval_zero_successes_has_zero_lower_bound() {
        let w = wilson_interval(0, 100, 1.96);
        assert_eq!(w.lo, 0.0);
        assert!(w.hi > 0.0 && w.hi < 0.06);
    }

    #[test]
    fn wilson_interval_shrinks_with_sample_size() {
        let narrow = wilson_interval(100, 10_000, 1.96);
        let wide = wilson_interval(10, 1_000, 1.96);
        assert!(narrow.hi - narrow.lo < wide.hi - wide.lo);
    }

    #[test]
    fn ks_identical_samples_have_zero_distance() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = ks_two_sample(&a, &a);
        assert_eq!(r.statistic, 0.0);
        assert!(approx(r.p_value, 1.0, 1e-9));
    }

    #[test]
    fn ks_disjoint_samples_have_unit_distance() {
        let a = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
        let b = [10.0, 10.1, 10.2, 10.3, 10.4, 10.5];
        let r = ks_two_sample(&a, &b);
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.05, "p = {}", r.p_value);
    }

    #[test]
    fn chi_square_accepts_data_from_the_model() {
        // Uniform samples laid out deterministically, tested against the
        // uniform CDF: the fit is essentially exact.
        let samples: Vec<f64> = (0..10_000).map(|i| (i as f64 + 0.5) / 10_000.0).collect();
        let r = chi_square_gof(&samples, |x| x.clamp(0.0, 1.0), 20, 0.0, 1.0);
        assert!(r.p_value > 0.99, "uniform grid should fit: {r:?}");
    }

    #[test]
    fn chi_square_rejects_data_from_a_different_model() {
        // Quadratic CDF data against a uniform model.
        let samples: Vec<f64> = (0..10_000)
            .map(|i| ((i as f64 + 0.5) / 10_000.0).sqrt())
            .collect();
        let r = chi_square_gof(&samples, |x| x.clamp(0.0, 1.0), 20, 0.0, 1.0);
        assert!(r.p_value < 1e-6, "quadratic data must reject: {r:?}");
    }
}
