//! Scalar summaries of an error trace.

/// Minimum number of points in the rate fit.
pub const MIN_RATE_POINTS: usize = 20;

/// First iteration whose error is at most `target`.
pub fn iterations_to_target(errs: &[f64], target: f64) -> Option<usize> {
    errs.iter().position(|&e| e <= target)
}

/// Least-squares slope of `log10(err)` against `k` over the final half of
/// the iterations up to (and including) the first one at or below `target`.
///
/// `None` when fewer than [`MIN_RATE_POINTS`] points are available or any
/// error in the window is not a positive finite number.
pub fn rate_slope(errs: &[f64], target: f64) -> Option<f64> {
    let end = iterations_to_target(errs, target).map_or(errs.len(), |k| k + 1);
    let window = &errs[end / 2..end];
    fit_log10_slope(window)
}

/// Slope of `log10(y)` against the index, for `y` positive and finite.
pub fn fit_log10_slope(ys: &[f64]) -> Option<f64> {
    if ys.len() < MIN_RATE_POINTS || ys.iter().any(|&y| !(y > 0.0 && y.is_finite())) {
        return None;
    }
    let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, y)| (i as f64, y.log10())).collect();
    least_squares_slope(&pts)
}

/// Ordinary least-squares slope through `(x, y)` points.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in pts {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}
