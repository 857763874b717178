//! Bootstrap inference: critical values and p-values for the CUSUM test by
//! i.i.d. row resampling, pivot confidence intervals for the break date by
//! within-segment resampling, and the common-break decision rule.
//!
//! Rows (not cells) are resampled, so the cross-sectional dependence inside
//! each time period survives intact; only the time ordering is destroyed,
//! which is exactly the null being mimicked. Rows drawn more than once are
//! re-ranked to a strict total order (ties broken by arrival), matching the
//! continuous-margin assumption baked into the plug-in estimators.
//! Replicate `p` always draws from an RNG stream derived from `(seed, p)`,
//! so results are bit-identical for a given configuration no matter how
//! many worker threads run.

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cusum::{cusum_statistic, CusumResult};
use crate::depmeasures::{
    averaged_path_from_keys, max_rank_leq, panel_keys, required_grid_start, DependencePath,
    DepConfig, Grid, MeasureSpec, ThresholdTable, TiePolicy,
};
use crate::error::{Error, Result};
use crate::marginal::{filter_panel, FilterMode};
use crate::panel::{Matrix, ResidualPanel, ReturnPanel};

/// Everything the bootstrap needs besides the data: replicate count,
/// level, seed and the grid parameters shared with the dependence path.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapConfig {
    /// Number of bootstrap replicates `B`.
    pub b: usize,
    /// Significance level in (0, 1).
    pub alpha: f64,
    /// Master seed; replicate `p` uses the derived stream `(seed, p)`.
    pub seed: u64,
    /// Trimming fraction for the evaluation grid.
    pub epsilon: f64,
    /// Grid stride (1 = every admissible prefix length).
    pub stride: usize,
    /// Tie handling for rank computation.
    pub ties: TiePolicy,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b: 500,
            alpha: 0.05,
            seed: 0,
            epsilon: 0.1,
            stride: 1,
            ties: TiePolicy::Fail,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b == 0 {
            return Err(Error::InsufficientReplicates { found: 0, required: 1 });
        }
        if self.b < 100 {
            log::warn!(
                "bootstrap with B = {} replicates; inference below B = 100 is coarse",
                self.b
            );
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::LevelOutOfRange { level: self.alpha });
        }
        // Grid construction validates epsilon and stride against the data.
        Ok(())
    }

    pub fn dep_config(&self) -> DepConfig {
        DepConfig { epsilon: self.epsilon, stride: self.stride, ties: self.ties }
    }
}

/// Smallest integer `m >= 1` with `m/b >= gamma`, i.e. `ceil(b * gamma)`
/// evaluated with an exact predicate instead of a float product (products
/// like `200 * 0.95` can land an ulp above the integer and push a naive
/// ceil one order statistic too high).
fn ceil_index(b: usize, gamma: f64) -> usize {
    let bf = b as f64;
    let mut m = (gamma * bf).ceil() as isize;
    m = m.clamp(1, b as isize);
    while m > 1 && ((m - 1) as f64) / bf >= gamma {
        m -= 1;
    }
    while m < b as isize && ((m as f64) / bf) < gamma {
        m += 1;
    }
    m as usize
}

/// Empirical `gamma`-quantile as the `ceil(B * gamma)`-th order statistic
/// (right-continuous inverse; the one convention used everywhere here).
fn order_statistic(sorted: &[f64], gamma: f64) -> f64 {
    sorted[ceil_index(sorted.len(), gamma) - 1]
}

/// Shared per-run context: rank keys of the original panel, the grid, and
/// the threshold table (thresholds depend only on `t`, so resamples reuse
/// them unchanged).
struct Engine {
    keys: Vec<Vec<u32>>,
    grid: Grid,
    thresholds: ThresholdTable,
    spec: MeasureSpec,
}

impl Engine {
    fn new(residuals: &ResidualPanel, spec: &MeasureSpec, config: &BootstrapConfig) -> Result<Self> {
        config.validate()?;
        if residuals.n_cols() < 2 {
            return Err(Error::TooFewColumns { found: residuals.n_cols(), required: 2 });
        }
        let grid = Grid::new(residuals.n_rows(), config.epsilon, config.stride)?;
        let required = required_grid_start(spec);
        if (grid.start() as f64) < required {
            return Err(Error::TrimTooSmall {
                start: grid.start(),
                required: required.ceil() as usize,
            });
        }
        let keys = panel_keys(residuals, config.ties)?;
        let levels: Vec<f64> = spec.quantile_items().iter().map(|&(_, q)| q).collect();
        let thresholds = ThresholdTable::new(&levels, grid.t_len);
        Ok(Engine { keys, grid, thresholds, spec: spec.clone() })
    }

    /// Averaged path values (row-major `grid x d`) for the given key columns.
    fn path_values(&self, keys: &[Vec<u32>]) -> Vec<f64> {
        averaged_path_from_keys(keys, &self.grid, &self.spec, &self.thresholds)
    }

    fn path_struct(&self, values: Vec<f64>) -> Result<DependencePath> {
        Ok(DependencePath {
            grid: self.grid.points.clone(),
            t_len: self.grid.t_len,
            spec: self.spec.clone(),
            values: Matrix::from_vec(values, self.grid.points.len(), self.spec.dim())?,
        })
    }

    /// Gather resampled key columns by row index, re-ranking each column to
    /// a strict total order. Rows drawn more than once are tie-broken by
    /// arrival position, which mirrors a draw from a continuous
    /// distribution: every marginal prefix count is pinned to its exact
    /// rank value, as the plug-in formulas assume. Leaving duplicates tied
    /// instead deflates the marginal counts by a random deficit that the
    /// upper-tail inclusion-exclusion formula amplifies by `1/(1-q)`, which
    /// badly inflates replicate statistics.
    fn gather(&self, idx: &[usize]) -> Vec<Vec<u32>> {
        self.keys
            .iter()
            .map(|col| {
                let mut order: Vec<u32> = (0..idx.len() as u32).collect();
                order.sort_unstable_by_key(|&pos| (col[idx[pos as usize]], pos));
                let mut out = vec![0u32; idx.len()];
                for (rank0, &pos) in order.iter().enumerate() {
                    out[pos as usize] = rank0 as u32 + 1;
                }
                out
            })
            .collect()
    }

    fn stream(&self, seed: u64, replicate: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(replicate as u64);
        rng
    }
}

/// Result of the critical-value bootstrap, including the observed CUSUM
/// outcome it was computed against.
#[derive(Debug, Clone)]
pub struct CriticalValueOutcome {
    /// Empirical `(1 - alpha)` quantile of the replicate statistics.
    pub critical_value: f64,
    /// Fraction of replicate statistics at or above the observed one.
    pub p_value: f64,
    /// Replicate statistics `K^(p)`, in replicate order.
    pub replicates: Vec<f64>,
    /// CUSUM outcome on the original panel.
    pub observed: CusumResult,
}

/// Supremum statistic of one bootstrap replicate: with `A(t/T) =
/// (t/T) * sqrt(T) * (m_t^rep - m_T^orig)`, the statistic is
/// `max_t || A(t/T) - (t/T) * A(1) ||^2`, evaluated literally.
fn replicate_sup_stat(rep_values: &[f64], original_full: &[f64], grid: &Grid) -> f64 {
    let d = original_full.len();
    let tf = grid.t_len as f64;
    let sqrt_t = tf.sqrt();
    let last = grid.points.len() - 1;
    let mut best = f64::NEG_INFINITY;
    for (g, &t) in grid.points.iter().enumerate() {
        let frac = t as f64 / tf;
        let mut acc = 0.0;
        for j in 0..d {
            let a = frac * sqrt_t * (rep_values[g * d + j] - original_full[j]);
            let a_one = sqrt_t * (rep_values[last * d + j] - original_full[j]);
            let diff = a - frac * a_one;
            acc += diff * diff;
        }
        if acc > best {
            best = acc;
        }
    }
    best
}

/// Critical value and p-value for the CUSUM statistic by i.i.d. row
/// resampling. Each replicate resamples `T` whole rows with replacement,
/// rebuilds the dependence path, and evaluates the bootstrap analogue of
/// the test statistic against the original full-sample measure vector.
pub fn critical_value_bootstrap(
    residuals: &ResidualPanel,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<CriticalValueOutcome> {
    let engine = Engine::new(residuals, spec, config)?;
    let observed = cusum_statistic(&engine.path_struct(engine.path_values(&engine.keys))?)?;
    let original_full: Vec<f64> = {
        let values = engine.path_values(&engine.keys);
        let d = spec.dim();
        values[values.len() - d..].to_vec()
    };

    let t_len = engine.grid.t_len;
    let replicates: Vec<f64> = (0..config.b)
        .into_par_iter()
        .map(|p| {
            let mut rng = engine.stream(config.seed, p);
            let idx: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..t_len)).collect();
            let rep_values = engine.path_values(&engine.gather(&idx));
            replicate_sup_stat(&rep_values, &original_full, &engine.grid)
        })
        .collect();

    let mut sorted = replicates.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let critical_value = order_statistic(&sorted, 1.0 - config.alpha);
    let exceed = replicates.iter().filter(|k| **k >= observed.statistic).count();
    let p_value = exceed as f64 / config.b as f64;

    Ok(CriticalValueOutcome { critical_value, p_value, replicates, observed })
}

/// Full test outcome with its configuration echo.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub cusum: CusumResult,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    /// Calendar date of the estimated break (row `k_hat` of the residual
    /// panel), meaningful when `reject` is set.
    pub break_date: Option<NaiveDate>,
    pub spec: MeasureSpec,
    pub config: BootstrapConfig,
    /// Replicate statistics, kept for diagnostics.
    pub replicates: Vec<f64>,
}

/// Run the CUSUM test on a residual panel: dependence path, statistic,
/// bootstrap critical value. Rejects when the statistic strictly exceeds
/// the critical value.
pub fn run_test(
    residuals: &ResidualPanel,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<TestResult> {
    let outcome = critical_value_bootstrap(residuals, spec, config)?;
    let reject = outcome.observed.statistic > outcome.critical_value;
    let break_date = residuals.dates.get(outcome.observed.k_hat.saturating_sub(1)).copied();
    Ok(TestResult {
        cusum: outcome.observed,
        critical_value: outcome.critical_value,
        p_value: outcome.p_value,
        reject,
        break_date,
        spec: spec.clone(),
        config: config.clone(),
        replicates: outcome.replicates,
    })
}

/// Convenience wrapper accepting a raw return panel: filters marginals per
/// `mode`, then tests the residuals.
pub fn run_test_on_returns(
    panel: &ReturnPanel,
    spec: &MeasureSpec,
    mode: FilterMode,
    config: &BootstrapConfig,
) -> Result<TestResult> {
    let residuals = filter_panel(panel, mode)?;
    run_test(&residuals, spec, config)
}

/// Pivot confidence interval for the break fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakCI {
    /// Point estimate the interval is built around.
    pub s_hat: f64,
    /// Clipped interval endpoints (inside `[epsilon, 1]`).
    pub lower: f64,
    pub upper: f64,
    /// Pivot endpoints before clipping: `2*s_hat - c_upper` and
    /// `2*s_hat - c_lower`.
    pub raw_lower: f64,
    pub raw_upper: f64,
    /// Empirical bootstrap quantiles `(c_{alpha/2}, c_{1-alpha/2})` of the
    /// replicate break fractions.
    pub c_lower: f64,
    pub c_upper: f64,
    /// Level the interval was built at.
    pub alpha: f64,
}

impl BreakCI {
    pub fn contains(&self, s: f64) -> bool {
        self.lower <= s && s <= self.upper
    }
}

/// Assemble the pivot interval `[2s - c_hi, 2s - c_lo]`, clipped to
/// `[epsilon, 1]`.
fn pivot_interval(s_hat: f64, c_lower: f64, c_upper: f64, epsilon: f64, alpha: f64) -> BreakCI {
    let raw_lower = 2.0 * s_hat - c_upper;
    let raw_upper = 2.0 * s_hat - c_lower;
    BreakCI {
        s_hat,
        lower: raw_lower.clamp(epsilon, 1.0),
        upper: raw_upper.clamp(epsilon, 1.0),
        raw_lower,
        raw_upper,
        c_lower,
        c_upper,
        alpha,
    }
}

/// Pivot bootstrap confidence interval for the break date.
///
/// The sample is split at `floor(s_hat * T)`; each replicate redraws the
/// pre-break segment from pre-break rows and the post-break segment from
/// post-break rows (sizes preserved, order pre-then-post), re-estimates the
/// break fraction on the replicate, and the interval is the pivot transform
/// of the empirical `alpha/2` and `1 - alpha/2` quantiles of those
/// replicate fractions.
pub fn break_ci_bootstrap(
    residuals: &ResidualPanel,
    spec: &MeasureSpec,
    s_hat: f64,
    config: &BootstrapConfig,
) -> Result<BreakCI> {
    if !(s_hat > 0.0 && s_hat < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s_hat".to_string(),
            value: s_hat,
            context: "break interval bootstrap".to_string(),
            reason: "break fraction must lie strictly inside (0, 1)".to_string(),
        });
    }
    let engine = Engine::new(residuals, spec, config)?;
    let t_len = engine.grid.t_len;
    let k = max_rank_leq(t_len, s_hat) as usize;
    let required = engine.grid.start();
    if k < required {
        return Err(Error::SegmentTooShort { lo: 1, hi: k, len: k, required });
    }
    if t_len - k < required {
        return Err(Error::SegmentTooShort { lo: k + 1, hi: t_len, len: t_len - k, required });
    }

    let s_reps: Vec<f64> = (0..config.b)
        .into_par_iter()
        .map(|p| {
            let mut rng = engine.stream(config.seed, p);
            let mut idx: Vec<usize> = Vec::with_capacity(t_len);
            for _ in 0..k {
                idx.push(rng.random_range(0..k));
            }
            for _ in k..t_len {
                idx.push(rng.random_range(k..t_len));
            }
            let rep_values = engine.path_values(&engine.gather(&idx));
            let path = engine.path_struct(rep_values)?;
            Ok(cusum_statistic(&path)?.s_hat)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut sorted = s_reps.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let c_lower = order_statistic(&sorted, config.alpha / 2.0);
    let c_upper = order_statistic(&sorted, 1.0 - config.alpha / 2.0);
    Ok(pivot_interval(s_hat, c_lower, c_upper, config.epsilon, config.alpha))
}

/// Decide whether two break estimates describe the same event: true exactly
/// when both point estimates lie in the intersection of the two intervals.
/// Only meaningful when both intervals were computed over the same testing
/// period.
pub fn same_break(s_a: f64, ci_a: &BreakCI, s_b: f64, ci_b: &BreakCI) -> bool {
    let lo = ci_a.lower.max(ci_b.lower);
    let hi = ci_a.upper.min(ci_b.upper);
    lo <= s_a && s_a <= hi && lo <= s_b && s_b <= hi
}

/// Per-interval level `alpha` that makes the common-break decision operate
/// at overall level `alpha_star`: `(1 - alpha)^2 = 1 - alpha_star`.
pub fn alpha_for_common_break(alpha_star: f64) -> Result<f64> {
    if !(alpha_star > 0.0 && alpha_star < 1.0) {
        return Err(Error::LevelOutOfRange { level: alpha_star });
    }
    Ok(1.0 - (1.0 - alpha_star).sqrt())
}
