//! Correlation and significance statistics used by meta-evaluation.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use serde::Serialize;

use crate::error::{Error, Result};

/// Correlations this close to ±1 are clamped before the Fisher transform.
pub const FISHER_CLAMP: f64 = 1.0 - 1e-15;

/// Order-independent sum: values are sorted before compensated summation,
/// so any permutation of the input yields the same bits.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in v {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean via [`stable_sum`]; a constant input returns that constant exactly.
pub fn stable_mean(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    if values.iter().all(|&v| v == first) {
        return Some(first);
    }
    Some(stable_sum(values) / values.len() as f64)
}

/// Median; the mean of the two central values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Structure {
            context: "pearson".into(),
            message: format!("length mismatch: {} vs {}", x.len(), y.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "pearson needs at least 2 points, got {}",
            x.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the variables has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Fisher-Z weighted average of correlations: `tanh(Σ w·atanh(r) / Σ w)`.
///
/// Correlations of magnitude 1 are clamped to [`FISHER_CLAMP`] with a
/// warning. The result does not depend on input order.
pub fn fisher_weighted_average(results: &[(f64, f64)]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::Domain("fisher average of an empty list".into()));
    }
    let mut z = Vec::with_capacity(results.len());
    let mut w = Vec::with_capacity(results.len());
    for &(r, weight) in results {
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::Domain(format!("weight {weight} must be positive")));
        }
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
        }
        let r = if r.abs() > FISHER_CLAMP {
            log::warn!("clamping correlation {r} to ±{FISHER_CLAMP} before the Fisher transform");
            r.signum() * FISHER_CLAMP
        } else {
            r
        };
        z.push(weight * r.atanh());
        w.push(weight);
    }
    Ok((stable_sum(&z) / stable_sum(&w)).tanh())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize)]
pub enum Tails {
    #[default]
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WilliamsResult {
    pub t: f64,
    pub p: f64,
}

fn student_t(df: f64) -> StudentsT {
    StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom")
}

/// Williams test for the difference between two dependent correlations
/// `r1h` and `r2h` that share the human variable; `r12` is the correlation
/// between the two metrics. The one-tailed p tests `r1h > r2h`.
pub fn williams_test(r1h: f64, r2h: f64, r12: f64, n: usize, tails: Tails) -> Result<WilliamsResult> {
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "williams test needs n >= 4, got {n}"
        )));
    }
    for r in [r1h, r2h, r12] {
        if !(-1.0..=1.0).contains(&r) {
            return Err(Error::Domain(format!("correlation {r} outside [-1, 1]")));
        }
    }
    // Symmetric terms use a fixed operand order so swapping r1h and r2h
    // negates t exactly.
    let (hi, lo) = if r1h >= r2h { (r1h, r2h) } else { (r2h, r1h) };
    let k = 1.0 - r12 * r12 - hi * hi - lo * lo + 2.0 * r12 * hi * lo;
    if k <= 0.0 {
        return Err(Error::Degenerate(format!(
            "determinant {k} of the correlation matrix is not positive"
        )));
    }
    let nf = n as f64;
    let rbar = (hi + lo) / 2.0;
    let num = (r1h - r2h) * ((nf - 1.0) * (1.0 + r12)).sqrt();
    let den = (2.0 * k * (nf - 1.0) / (nf - 3.0) + rbar * rbar * (1.0 - r12).powi(3)).sqrt();
    let t = num / den;
    let dist = student_t(nf - 3.0);
    let p = match tails {
        Tails::One => dist.cdf(-t),
        Tails::Two => (2.0 * dist.cdf(-t.abs())).min(1.0),
    };
    Ok(WilliamsResult { t, p })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RankSumResult {
    /// Mid-rank sum of the first sample.
    pub w: f64,
    /// Standardized statistic (normal approximation), 0 when all values tie.
    pub z: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Largest sample size for which the exact permutation distribution is used.
pub const RANK_SUM_EXACT_MAX: usize = 25;

/// Mid-ranks (1-based) of the pooled values and the tie group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon rank-sum test with mid-ranks.
///
/// When both samples have at most [`RANK_SUM_EXACT_MAX`] values the p-value
/// comes from the exact permutation distribution of the mid-rank sum;
/// otherwise from the normal approximation with tie correction and no
/// continuity correction.
pub fn rank_sum_test(a: &[f64], b: &[f64]) -> Result<RankSumResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("rank-sum test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Domain("rank-sum test input is not finite".into()));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let n = (n1 + n2) as f64;
    let w: f64 = ranks[..n1].iter().sum();
    let mean = n1 as f64 * (n + 1.0) / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = n1 as f64 * n2 as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let z = if var > 0.0 { (w - mean) / var.sqrt() } else { 0.0 };

    if n1 <= RANK_SUM_EXACT_MAX && n2 <= RANK_SUM_EXACT_MAX {
        let p = exact_rank_sum_p(&ranks, n1);
        return Ok(RankSumResult { w, z, p, exact: true });
    }
    let p = if var > 0.0 { erfc(z.abs() / std::f64::consts::SQRT_2) } else { 1.0 };
    Ok(RankSumResult { w, z, p: p.min(1.0), exact: false })
}

/// P(|W - E[W]| >= |w_obs - E[W]|) under random assignment of the pooled
/// mid-ranks to the first sample. Works on doubled ranks so sums are integers.
fn exact_rank_sum_p(ranks: &[f64], n1: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = doubled[..n1].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: number of k-subsets with doubled-rank sum s
    let mut counts = vec![vec![0u128; max_sum + 1]; n1 + 1];
    counts[0][0] = 1;
    for &d in &doubled {
        for k in (1..=n1).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (d..=max_sum).rev() {
                cur[s] += prev[s - d];
            }
        }
    }
    let center = n1 * (ranks.len() + 1); // 2 * E[W]
    let dev = observed.abs_diff(center);
    let (mut extreme, mut total) = (0u128, 0u128);
    for (s, &c) in counts[n1].iter().enumerate() {
        total += c;
        if s.abs_diff(center) >= dev {
            extreme += c;
        }
    }
    extreme as f64 / total as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// Mean of `a - b`.
    pub mean_diff: f64,
}

/// Two-sided paired t-test on `a - b`.
///
/// Constant differences give t = 0, p = 1 when they are all zero and
/// t = ±∞, p = 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::Structure {
            context: "paired t-test".into(),
            message: format!("length mismatch: {} vs {}", a.len(), b.len()),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let ss: f64 = d.iter().map(|x| (x - mean).powi(2)).sum();
    let df = nf - 1.0;
    let sd = (ss / df).sqrt();
    let spread = d.iter().map(|x| (x - mean).abs()).fold(0.0, f64::max);
    if sd == 0.0 || spread <= 1e-12 * mean.abs() {
        return Ok(if mean == 0.0 {
            TTestResult { t: 0.0, df, p: 1.0, mean_diff: 0.0 }
        } else {
            TTestResult { t: mean.signum() * f64::INFINITY, df, p: 0.0, mean_diff: mean }
        });
    }
    let t = mean / (sd / nf.sqrt());
    let p = (2.0 * student_t(df).cdf(-t.abs())).min(1.0);
    Ok(TTestResult { t, df, p, mean_diff: mean })
}
