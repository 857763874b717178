//! CUSUM-type break statistic over a dependence-measure path.
//!
//! For a measure path `m_t` on the trimmed grid with full-sample value `m_T`,
//! the statistic is
//!
//! ```text
//! M_T = max_{t in grid} (t/T)^2 * T * || m_t - m_T ||^2
//! ```
//!
//! The maximising prefix length `t*` dates the break: `s_hat = t*/T` and
//! `k_hat = floor(s_hat * T) = t*`. Ties are resolved toward the smallest
//! grid point.

use crate::depmeasures::DependencePath;
use crate::error::{Error, Result};

/// Outcome of the CUSUM maximisation.
#[derive(Debug, Clone)]
pub struct CusumResult {
    /// The maximised statistic `M_T`.
    pub statistic: f64,
    /// Estimated break fraction `t*/T`, in `[epsilon, 1]`.
    pub s_hat: f64,
    /// Estimated break index `floor(s_hat * T)` (1-based observation count).
    pub k_hat: usize,
    /// Grid of prefix lengths the profile was evaluated on.
    pub grid: Vec<usize>,
    /// Profile value at every grid point (statistic is its maximum).
    pub profile: Vec<f64>,
    /// Series length `T`.
    pub t_len: usize,
}

/// Squared Euclidean distance between two measure vectors.
#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Evaluate the CUSUM profile and its maximiser over the path's grid.
pub fn cusum_statistic(path: &DependencePath) -> Result<CusumResult> {
    if path.grid.is_empty() || path.values.rows() == 0 {
        return Err(Error::EmptyPath);
    }
    let t_len = path.t_len as f64;
    let last = path.full_sample_row().to_vec();

    let mut profile = Vec::with_capacity(path.grid.len());
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = 0usize;
    for (gi, &t) in path.grid.iter().enumerate() {
        let frac = t as f64 / t_len;
        let value = frac * frac * t_len * sq_dist(path.values.row(gi), &last);
        if value > best {
            best = value;
            best_idx = gi;
        }
        profile.push(value);
    }

    let t_star = path.grid[best_idx];
    Ok(CusumResult {
        statistic: best,
        s_hat: t_star as f64 / t_len,
        k_hat: t_star,
        grid: path.grid.clone(),
        profile,
        t_len: path.t_len,
    })
}
