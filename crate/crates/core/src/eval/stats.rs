//! Order statistics used in score summaries.

/// Median with midpoint averaging for even lengths; NaN for empty input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Index of the lower-middle element in sorted order (ties → first index).
pub fn median_index(values: &[f64]) -> usize {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx[(values.len() - 1) / 2]
}

/// Median absolute deviation around the median (unscaled).
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let dev: Vec<f64> = values.iter().map(|v| (v - m).abs()).collect();
    median(&dev)
}

/// Percentile with linear interpolation between order statistics, `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = (q / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn binomial_half_cdf(n: usize) -> Vec<f64> {
    // P(X <= j) for X ~ Binomial(n, 1/2), computed in log space.
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut cdf = Vec::with_capacity(n + 1);
    let mut ln_choose = 0.0f64;
    let mut acc = 0.0;
    for j in 0..=n {
        if j > 0 {
            ln_choose += ((n - j + 1) as f64).ln() - (j as f64).ln();
        }
        acc += (ln_choose - ln2n).exp();
        cdf.push(acc.min(1.0));
    }
    cdf
}

fn binomial_quantile(cdf: &[f64], p: f64) -> usize {
    cdf.iter().position(|&c| c >= p - 1e-12).unwrap_or(cdf.len() - 1)
}

/// Order-statistic confidence interval for the median.
///
/// Bounds are the order statistics (1-based) at the Binomial(n, 1/2)
/// quantiles `level/2` away from the centre; the lower index is at least 1.
pub fn binomial_ci_median(values: &[f64], level: f64) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let alpha = 1.0 - level;
    let cdf = binomial_half_cdf(n);
    let lo = binomial_quantile(&cdf, alpha / 2.0).clamp(1, n);
    let hi = binomial_quantile(&cdf, 1.0 - alpha / 2.0).clamp(1, n);
    (v[lo - 1], v[hi - 1])
}
