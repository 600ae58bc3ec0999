//! Sample summaries and the Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest number of non-zero differences for which the null distribution is
/// enumerated exactly.
pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no finite samples to summarize ({excluded} infinite samples excluded)")]
    NoFiniteSamples { excluded: usize },
    #[error("sample {index} is not a finite number or +inf ({value})")]
    InvalidSample { index: usize, value: f64 },
    #[error("paired samples have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired test needs at least one pair")]
    EmptyInput,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
}

/// Mean and population standard deviation of a metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric_name: String,
    #[serde(with = "crate::serde_inf")]
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// `+inf` samples left out of the mean (e.g. PSNR of identical slices).
    pub excluded_infinite: usize,
}

/// Mean and population (1/n) standard deviation, skipping `+inf` samples.
pub fn summarize(metric_name: &str, samples: &[f64]) -> Result<MetricSummary, StatsError> {
    let mut finite = Vec::with_capacity(samples.len());
    let mut excluded = 0;
    for (index, &value) in samples.iter().enumerate() {
        if value.is_finite() {
            finite.push(value);
        } else if value == f64::INFINITY {
            excluded += 1;
        } else {
            return Err(StatsError::InvalidSample { index, value });
        }
    }
    if finite.is_empty() {
        return Err(StatsError::NoFiniteSamples { excluded });
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok(MetricSummary {
        metric_name: metric_name.to_string(),
        mean,
        std: var.sqrt(),
        n: finite.len(),
        excluded_infinite: excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMode {
    Exact,
    NormalApprox,
}

/// How the p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PValueMethod {
    /// Exact up to [`EXACT_MAX_N`] non-zero differences, normal approximation above.
    #[default]
    Auto,
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub w_statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n_effective: usize,
    pub mode: PValueMode,
}

/// Two-sided Wilcoxon signed-rank test on the paired differences `x - y`.
///
/// Zero differences are dropped, tied magnitudes get mid-ranks. With at most
/// [`EXACT_MAX_N`] non-zero differences the p-value comes from the exact
/// permutation distribution of the (possibly tied) ranks; above that a normal
/// approximation with tie and continuity corrections is used.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, StatsError> {
    wilcoxon_signed_rank_with(x, y, PValueMethod::Auto)
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    method: PValueMethod,
) -> Result<WilcoxonResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if let Some(index) = diffs.iter().position(|d| !d.is_finite()) {
        return Err(StatsError::InvalidSample {
            index,
            value: diffs[index],
        });
    }
    if diffs.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    diffs.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let n = diffs.len();

    // Doubled mid-ranks stay integral: a tie block covering 1-based ranks
    // i+1..=j has mid-rank (i + 1 + j) / 2.
    let mut doubled_ranks = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && diffs[j].abs() == diffs[i].abs() {
            j += 1;
        }
        for r in &mut doubled_ranks[i..j] {
            *r = (i + 1 + j) as u64;
        }
        if j - i > 1 {
            tie_sizes.push(j - i);
        }
        i = j;
    }

    let doubled_plus: u64 = diffs
        .iter()
        .zip(&doubled_ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let doubled_total = (n * (n + 1)) as u64;
    let doubled_minus = doubled_total - doubled_plus;
    let doubled_w = doubled_plus.min(doubled_minus);

    let use_exact = match method {
        PValueMethod::Auto => n <= EXACT_MAX_N,
        PValueMethod::Exact => true,
        PValueMethod::NormalApprox => false,
    };
    let (p_value, mode) = if use_exact {
        (exact_p(&doubled_ranks, doubled_w), PValueMode::Exact)
    } else {
        (
            normal_p(n, &tie_sizes, doubled_w as f64 / 2.0),
            PValueMode::NormalApprox,
        )
    };

    Ok(WilcoxonResult {
        w_statistic: doubled_w as f64 / 2.0,
        w_plus: doubled_plus as f64 / 2.0,
        w_minus: doubled_minus as f64 / 2.0,
        p_value,
        n_effective: n,
        mode,
    })
}

/// `2 * P(T+ <= w)` under random signs, by dynamic programming over the
/// doubled ranks.
fn exact_p(doubled_ranks: &[u64], doubled_w: u64) -> f64 {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let below: f64 = counts[..=doubled_w as usize].iter().sum();
    let p = 2.0 * below / 2f64.powi(doubled_ranks.len() as i32);
    p.min(1.0)
}

fn normal_p(n: usize, tie_sizes: &[usize], w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let mut d = w - mean;
    if d != 0.0 {
        d -= 0.5 * d.signum();
    }
    let z = d / var.sqrt();
    let std_normal = Normal::standard();
    (2.0 * std_normal.sf(z.abs())).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summarize_examples() {
        let s = summarize("x", &[5.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (5.0, 0.0, 1));
        let s = summarize("x", &[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (2.0, 1.0, 2));
        let s = summarize("psnr_db", &[2.0, f64::INFINITY]).unwrap();
        assert_eq!((s.mean, s.n, s.excluded_infinite), (2.0, 1, 1));
        assert_eq!(
            summarize("x", &[f64::INFINITY]).unwrap_err(),
            StatsError::NoFiniteSamples { excluded: 1 }
        );
        assert!(summarize("x", &[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn all_positive_six() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [0.0; 6];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.w_statistic, 0.0);
        assert_eq!(r.p_value, 0.03125);
        assert_eq!(r.mode, PValueMode::Exact);
        assert_eq!(r.n_effective, 6);
    }

    #[test]
    fn zero_differences() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(
            wilcoxon_signed_rank(&x, &x).unwrap_err(),
            StatsError::AllZeroDifferences
        );
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 5.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(r.n_effective, 2);
    }

    #[test]
    fn swapping_arguments_keeps_p() {
        let x = [1.3, 2.0, 0.4, 5.5, 3.3, 2.2, 1.0];
        let y = [1.0, 2.5, 0.1, 4.0, 3.4, 1.9, 2.0];
        let a = wilcoxon_signed_rank(&x, &y).unwrap();
        let b = wilcoxon_signed_rank(&y, &x).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.w_plus, b.w_minus);
    }

    #[test]
    fn input_validation() {
        assert_eq!(
            wilcoxon_signed_rank(&[1.0], &[1.0, 2.0]).unwrap_err(),
            StatsError::LengthMismatch(1, 2)
        );
        assert_eq!(
            wilcoxon_signed_rank(&[], &[]).unwrap_err(),
            StatsError::EmptyInput
        );
    }

    #[test]
    fn ties_use_mid_ranks() {
        // |d| = 1, 1, 2 -> ranks 1.5, 1.5, 3; signs +, -, +.
        let r = wilcoxon_signed_rank(&[1.0, -1.0, 2.0], &[0.0; 3]).unwrap();
        assert_eq!(r.w_plus, 4.5);
        assert_eq!(r.w_minus, 1.5);
        // Doubled subset sums of {3, 3, 6}: 0, 3, 3, 6, 6, 9, 9, 12, so P(2 T+ <= 3) = 3/8.
        assert_eq!(r.p_value, 0.75);
    }

    #[test]
    fn large_n_uses_normal_approx() {
        let x: Vec<f64> = (1..=40).map(f64::from).collect();
        let y = vec![0.0; 40];
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.mode, PValueMode::NormalApprox);
        assert!(r.p_value < 1e-6);
    }
}
