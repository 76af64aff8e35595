//! Brute-force sample statistics.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() as f64 - 1.0)).sqrt()
}

/// Circular mean `⟨e^{iθ}⟩` of angles in radians, as `(re, im)`.
pub fn circular_mean(angles: &[f64]) -> (f64, f64) {
    let n = angles.len() as f64;
    let re = angles.iter().map(|a| a.cos()).sum::<f64>() / n;
    let im = angles.iter().map(|a| a.sin()).sum::<f64>() / n;
    (re, im)
}

/// Least-squares slope of `ys` against `xs` by the normal equations.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
