//! Benjamini–Hochberg false discovery rate.

#[derive(Debug, Clone, PartialEq)]
pub struct FdrResult {
    /// Largest p-value that is rejected, if any.
    pub cutoff: Option<f64>,
    pub reject: Vec<bool>,
}

impl FdrResult {
    pub fn n_rejected(&self) -> usize {
        self.reject.iter().filter(|&&r| r).count()
    }
}

/// Step-up procedure: with p sorted ascending, `k = max{i : p(i) <= i q / m}`
/// and every `p <= p(k)` is rejected. `NaN` entries are never rejected and do
/// not count toward `m`.
pub fn fdr_bh(p_values: &[f64], q: f64) -> FdrResult {
    let mut sorted: Vec<f64> = p_values.iter().copied().filter(|p| !p.is_nan()).collect();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let cutoff = sorted
        .iter()
        .enumerate()
        .rev()
        .find(|&(i, &p)| p <= (i + 1) as f64 * q / m)
        .map(|(_, &p)| p);
    let reject = match cutoff {
        Some(c) => p_values.iter().map(|&p| p <= c).collect(),
        None => vec![false; p_values.len()],
    };
    FdrResult { cutoff, reject }
}
