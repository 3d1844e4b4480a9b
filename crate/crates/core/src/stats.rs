//! Small order-statistic helpers shared by the trace and fleet modules.

/// Nearest-rank percentile of `values` (no interpolation).
///
/// Sorts ascending and returns the element at 1-based rank `ceil(p / 100 * n)`,
/// with rank clamped to `[1, n]`. Returns `None` for empty input or a
/// percentile outside `(0, 100]`.
pub fn nearest_rank(values: &[f64], percentile: f64) -> Option<f64> {
    if values.is_empty() || !(percentile > 0.0 && percentile <= 100.0) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(sorted[nearest_rank_index(sorted.len(), percentile)])
}

/// Zero-based index selected by the nearest-rank rule for `n` sorted values.
pub(crate) fn nearest_rank_index(n: usize, percentile: f64) -> usize {
    // p * n is formed before dividing so that e.g. 95 * 20 / 100 stays exactly 19.
    let rank = (percentile * n as f64 / 100.0 - 1e-9).ceil() as usize;
    rank.clamp(1, n) - 1
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
