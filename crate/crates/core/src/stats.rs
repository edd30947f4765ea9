//! Small statistics helpers for the CLT diagnostics: sample moments and the
//! Kolmogorov-Smirnov statistic against a standard normal.

/// Standard normal CDF via the Abramowitz-Stegun 26.2.17 rational
/// approximation; absolute error below 7.5e-8.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    let t = 1.0 / (1.0 + 0.231_641_9 * x);
    let poly = t
        * (0.319_381_530
            + t * (-0.356_563_782
                + t * (1.781_477_937 + t * (-1.821_255_978 + t * 1.330_274_429))));
    let pdf = (-(x * x) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

fn central_moment(xs: &[f64], m: f64, k: i32) -> f64 {
    xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / xs.len() as f64
}

pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    central_moment(xs, m, 3) / m2.powf(1.5)
}

pub fn excess_kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    central_moment(xs, m, 4) / (m2 * m2) - 3.0
}

/// One-sample KS statistic of `samples` against the standard normal CDF.
pub fn ks_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = normal_cdf(x);
        d = d.max(((i + 1) as f64 / n - cdf).abs());
        d = d.max((cdf - i as f64 / n).abs());
    }
    d
}
