//! Binomial confidence intervals.

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959964;

/// Wilson score interval for an observed proportion over `trials`.
pub fn wilson_interval(proportion: f64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (proportion + z2 / (2.0 * n)) / denom;
    let half = z / denom * (proportion * (1.0 - proportion) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if proportion <= 0.0 { 0.0 } else { (center - half).max(0.0) };
    let high = if proportion >= 1.0 { 1.0 } else { (center + half).min(1.0) };
    (low, high)
}

/// 95% Wilson interval for `successes` out of `trials`.
///
/// Unlike the normal approximation, it stays informative at zero or near-zero
/// counts, which is where rare-loss sources live.
///
/// # Panics
///
/// If `trials == 0` or `successes > trials`.
pub fn binomial_ci95(successes: u64, trials: u64) -> (f64, f64) {
    assert!(trials > 0, "binomial interval needs at least one trial");
    assert!(successes <= trials, "{successes} successes out of {trials} trials");
    wilson_interval(successes as f64 / trials as f64, trials, Z_95)
}

/// Standard deviation of a binomial proportion.
pub fn binomial_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
