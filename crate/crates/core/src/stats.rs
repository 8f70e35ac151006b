//! Denominator-n moment helpers shared by the estimators.
//!
//! Every variance and covariance in the crate uses the empirical (1/n)
//! normalization so that decomposition identities hold exactly on a sample.

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let mx = mean(x);
    let my = mean(y);
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    covariance(x, x)
}

/// Pearson correlation; zero when either side has no spread.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let vx = variance(x);
    let vy = variance(y);
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0;
    }
    covariance(x, y) / (vx * vy).sqrt()
}

/// Sample standard deviation with the n-1 denominator.
pub fn sample_std(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Linear-interpolation quantile (the usual "type 7") of unsorted data.
pub fn quantile(x: &[f64], q: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&sorted, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
    }
}

/// Subtracts the mean in place and returns it.
pub fn center(x: &mut [f64]) -> f64 {
    let m = mean(x);
    x.iter_mut().for_each(|v| *v -= m);
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let x = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&x, 0.0), 1.0);
        assert_eq!(quantile(&x, 1.0), 4.0);
        assert!((quantile(&x, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&x, 0.25) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn moments_use_n_denominator() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((variance(&x) - 1.25).abs() < 1e-15);
        assert!((sample_std(&x) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((correlation(&x, &x) - 1.0).abs() < 1e-15);
        assert_eq!(correlation(&x, &[1.0; 4]), 0.0);
    }
}
