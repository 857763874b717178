//! Experiment orchestration: full-sample testing, rolling-window multi-break
//! scanning, Monte Carlo rejection-rate tables, coverage studies, and the
//! rolling descriptive dependence series.
//!
//! Everything here is deterministic under a master seed: per-repetition
//! seeds are derived from `(master seed, cell index, repetition index)` with
//! a splitmix-style hash, repetitions run concurrently, and results are
//! folded in index order, so tables are bit-identical no matter how many
//! worker threads participate.

use chrono::NaiveDate;
use rayon::prelude::*;

use crate::bootstrap::{
    break_ci_bootstrap, run_test, BootstrapConfig, BreakCI, TestResult,
};
use crate::copsim::{sample_panel, DgpSpec};
use crate::cusum::cusum_statistic;
use crate::depmeasures::{dependence_path, seq_spearman, DepConfig, Grid, MeasureSpec};
use crate::error::{Error, Result};
use crate::marginal::{filter_panel, FilterMode};
use crate::panel::{Matrix, ResidualPanel, ReturnPanel};

/// Caveat attached to rolling-scan reports: windows are tested repeatedly
/// and no multiplicity correction is applied.
pub const MULTIPLE_TESTING_NOTE: &str =
    "rolling windows are tested repeatedly; detection counts are uncorrected for multiple testing";

/// splitmix64 finalizer: cheap, well-mixed 64-bit hash step.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Deterministic seed for one unit of Monte Carlo work, derived from the
/// master seed and the unit's coordinates. `salt` separates independent
/// uses of the same coordinates (panel draw vs bootstrap).
pub(crate) fn derive_seed(master: u64, cell: u64, rep: u64, salt: u64) -> u64 {
    let mut h = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    h = splitmix64(h ^ cell);
    h = splitmix64(h ^ rep);
    splitmix64(h ^ salt)
}

/// Full-sample outcome: the test, plus a break confidence interval when the
/// null was rejected.
#[derive(Debug, Clone)]
pub struct FullSampleOutcome {
    pub test: TestResult,
    /// Pivot interval around the estimated break; present only on rejection.
    pub break_ci: Option<BreakCI>,
    /// Rows the test actually ran on (after any marginal filtering).
    pub residual_rows: usize,
}

/// Filter once, test once; on rejection, attach the break-date interval
/// computed from the same residuals and configuration.
pub fn full_sample_test(
    panel: &ReturnPanel,
    spec: &MeasureSpec,
    mode: FilterMode,
    config: &BootstrapConfig,
) -> Result<FullSampleOutcome> {
    let residuals = filter_panel(panel, mode)?;
    full_sample_test_residuals(&residuals, spec, config)
}

/// As [`full_sample_test`], for data that is already residual-like.
pub fn full_sample_test_residuals(
    residuals: &ResidualPanel,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<FullSampleOutcome> {
    let test = run_test(residuals, spec, config)?;
    let break_ci = if test.reject {
        Some(break_ci_bootstrap(residuals, spec, test.cusum.s_hat, config)?)
    } else {
        None
    };
    Ok(FullSampleOutcome { test, break_ci, residual_rows: residuals.n_rows() })
}

/// One detected break from the rolling scan.
#[derive(Debug, Clone)]
pub struct DetectedBreak {
    /// Break index on the full panel's 1-based row scale.
    pub k_abs: usize,
    /// Calendar date of that row.
    pub date: NaiveDate,
    /// Break fraction within the window that detected it.
    pub s_hat_window: f64,
    pub statistic: f64,
    pub critical_value: f64,
    /// First row (1-based) of the detecting window.
    pub window_start: usize,
}

/// Outcome of a rolling-window scan.
#[derive(Debug, Clone)]
pub struct RollingScanResult {
    pub breaks: Vec<DetectedBreak>,
    pub windows_tested: usize,
    /// Window length in panel rows.
    pub window: usize,
    /// Advancement on non-rejection (1 reproduces the every-step rule;
    /// larger values trade resolution for speed).
    pub step: usize,
}

fn window_panel(panel: &ReturnPanel, start: usize, len: usize) -> Result<ReturnPanel> {
    let n = panel.n_cols();
    let lo = start - 1;
    let data = (lo..lo + len).flat_map(|r| panel.values.row(r).to_vec()).collect();
    ReturnPanel::new(
        panel.dates[lo..lo + len].to_vec(),
        panel.names.clone(),
        Matrix::from_vec(data, len, n)?,
    )
}

/// Scan the panel with a rolling window of `l` rows.
///
/// Starting at row 1, the window `[t1, t1 + l - 1]` is filtered (marginals
/// re-estimated per window) and tested. On rejection the absolute break
/// index `k = t1 - 1 + floor(s_hat * window sample size)` is recorded and
/// the scan resumes at `t1 = k + 1`; on non-rejection it advances by
/// `step` rows. The scan stops when the window no longer fits.
pub fn rolling_scan(
    panel: &ReturnPanel,
    spec: &MeasureSpec,
    l: usize,
    mode: FilterMode,
    step: usize,
    config: &BootstrapConfig,
) -> Result<RollingScanResult> {
    let t_len = panel.n_rows();
    if step == 0 {
        return Err(Error::InvalidConfig("scan step must be at least 1".into()));
    }
    if l > t_len {
        return Err(Error::WindowTooShort {
            window: l,
            reason: format!("panel has only {t_len} rows"),
        });
    }
    // The window must leave room for the trimmed grid of its own residual
    // sample: enough observations at the first grid point, and at least two
    // trim widths overall so an interior break is estimable.
    let resid_len = match mode {
        FilterMode::None => l,
        FilterMode::Ar1Garch11 => l.saturating_sub(1),
    };
    if resid_len < 2 {
        return Err(Error::WindowTooShort {
            window: l,
            reason: "fewer than 2 residual rows per window".to_string(),
        });
    }
    let grid = Grid::new(resid_len, config.epsilon, config.stride).map_err(|e| {
        Error::WindowTooShort { window: l, reason: e.to_string() }
    })?;
    let required = crate::depmeasures::required_grid_start(spec).ceil() as usize;
    if grid.start() < required || resid_len < 2 * grid.start().max(required) {
        return Err(Error::WindowTooShort {
            window: l,
            reason: format!(
                "residual window of {resid_len} rows cannot host the trimmed grid \
                 (first grid point {}, {} observations required per tail)",
                grid.start(),
                required
            ),
        });
    }

    let mut breaks = Vec::new();
    let mut windows_tested = 0usize;
    let mut t1 = 1usize;
    while t1 + l - 1 <= t_len {
        let window = window_panel(panel, t1, l)?;
        let residuals = filter_panel(&window, mode).map_err(|e| {
            Error::InvalidConfig(format!("window [{t1}, {}]: {e}", t1 + l - 1))
        })?;
        let result = run_test(&residuals, spec, config)?;
        windows_tested += 1;
        if result.reject {
            // Break index within the window's residual sample, shifted by
            // any rows the filter consumed, then mapped to the panel scale.
            let k_abs = t1 - 1 + (l - residuals.n_rows()) + result.cusum.k_hat;
            breaks.push(DetectedBreak {
                k_abs,
                date: panel.dates[k_abs - 1],
                s_hat_window: result.cusum.s_hat,
                statistic: result.cusum.statistic,
                critical_value: result.critical_value,
                window_start: t1,
            });
            t1 = k_abs + 1;
        } else {
            t1 += step;
        }
    }
    Ok(RollingScanResult { breaks, windows_tested, window: l, step })
}

/// One cell of a Monte Carlo rejection table.
#[derive(Debug, Clone)]
pub struct McCell {
    pub dgp: DgpSpec,
    pub spec: MeasureSpec,
    /// Fraction of repetitions in which the test rejected.
    pub rate: f64,
    /// Binomial standard error `sqrt(rate * (1 - rate) / reps)`.
    pub se: f64,
    pub reps: usize,
}

/// Monte Carlo rejection-rate table over a grid of DGPs and measure
/// specifications.
#[derive(Debug, Clone)]
pub struct McTable {
    pub cells: Vec<McCell>,
    pub reps: usize,
    pub master_seed: u64,
    pub config: BootstrapConfig,
}

/// Simulate `reps` panels per (DGP, measure spec) cell, run the test on
/// each, and tabulate rejection fractions with binomial standard errors.
/// Cell `c`, repetition `r` uses seeds derived from
/// `(master seed, c, r)` — one stream for the panel draw, a separate one
/// for the bootstrap — so the table is reproducible bit-exactly.
pub fn mc_rejection_table(
    dgps: &[DgpSpec],
    specs: &[MeasureSpec],
    reps: usize,
    config: &BootstrapConfig,
    master_seed: u64,
) -> Result<McTable> {
    if reps == 0 {
        return Err(Error::InvalidConfig("at least one repetition required".into()));
    }
    let mut jobs = Vec::new();
    for (di, dgp) in dgps.iter().enumerate() {
        for (si, spec) in specs.iter().enumerate() {
            let cell = (di * specs.len() + si) as u64;
            for rep in 0..reps {
                jobs.push((cell, dgp, spec, rep as u64));
            }
        }
    }
    let rejections: Vec<bool> = jobs
        .par_iter()
        .map(|&(cell, dgp, spec, rep)| {
            let panel = sample_panel(dgp, derive_seed(master_seed, cell, rep, 1))?;
            let rep_config = BootstrapConfig {
                seed: derive_seed(master_seed, cell, rep, 2),
                ..config.clone()
            };
            let result = run_test(&panel, spec, &rep_config).map_err(|e| {
                log::error!("cell {cell} repetition {rep} failed: {e}");
                e
            })?;
            Ok(result.reject)
        })
        .collect::<Result<Vec<bool>>>()?;

    let mut cells = Vec::new();
    let mut cursor = 0usize;
    for dgp in dgps {
        for spec in specs {
            let hits = rejections[cursor..cursor + reps].iter().filter(|r| **r).count();
            cursor += reps;
            let rate = hits as f64 / reps as f64;
            cells.push(McCell {
                dgp: dgp.clone(),
                spec: spec.clone(),
                rate,
                se: (rate * (1.0 - rate) / reps as f64).sqrt(),
                reps,
            });
        }
    }
    Ok(McTable { cells, reps, master_seed, config: config.clone() })
}

/// Break fraction estimated by the CUSUM from one measure specification,
/// with no inference attached.
fn point_estimate(
    residuals: &ResidualPanel,
    spec: &MeasureSpec,
    config: &BootstrapConfig,
) -> Result<f64> {
    let dep = DepConfig { epsilon: config.epsilon, stride: config.stride, ties: config.ties };
    Ok(cusum_statistic(&dependence_path(residuals, spec, &dep)?)?.s_hat)
}

/// Coverage estimates for a single-break design: the true break fraction is
/// checked against intervals built from two measure specifications on the
/// same simulated panel.
#[derive(Debug, Clone)]
pub struct CoverageCell {
    pub dgp: DgpSpec,
    /// P(true s0 in interval from the first specification).
    pub p_first: f64,
    /// P(true s0 in interval from the second specification).
    pub p_second: f64,
    /// P(true s0 in both intervals' intersection).
    pub p_both: f64,
    pub reps: usize,
}

/// Single-break coverage study: per repetition, simulate one panel from
/// `dgp` (which must carry a break), estimate the break with each of the
/// two specifications, build both pivot intervals, and record containment
/// of the true break fraction.
pub fn mc_coverage_single(
    dgp: &DgpSpec,
    spec_a: &MeasureSpec,
    spec_b: &MeasureSpec,
    reps: usize,
    config: &BootstrapConfig,
    master_seed: u64,
) -> Result<CoverageCell> {
    let s0 = dgp.break_fraction.ok_or_else(|| {
        Error::InvalidConfig("coverage study needs a DGP with a break".into())
    })?;
    if reps == 0 {
        return Err(Error::InvalidConfig("at least one repetition required".into()));
    }
    let hits: Vec<(bool, bool)> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let panel = sample_panel(dgp, derive_seed(master_seed, 0, rep, 1))?;
            let mut contains = [false; 2];
            for (slot, (spec, salt)) in [(spec_a, 2u64), (spec_b, 3u64)].iter().enumerate() {
                let rep_config = BootstrapConfig {
                    seed: derive_seed(master_seed, 0, rep, *salt),
                    ..config.clone()
                };
                let s_hat = point_estimate(&panel, spec, &rep_config)?;
                let ci = break_ci_bootstrap(&panel, spec, s_hat, &rep_config)?;
                contains[slot] = ci.contains(s0);
            }
            Ok((contains[0], contains[1]))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = reps as f64;
    let p_first = hits.iter().filter(|h| h.0).count() as f64 / n;
    let p_second = hits.iter().filter(|h| h.1).count() as f64 / n;
    let p_both = hits.iter().filter(|h| h.0 && h.1).count() as f64 / n;
    Ok(CoverageCell { dgp: dgp.clone(), p_first, p_second, p_both, reps })
}

/// Joint containment estimate for the two-break design.
#[derive(Debug, Clone)]
pub struct TwoBreakCell {
    pub dgp_first: DgpSpec,
    pub dgp_second: DgpSpec,
    /// P(both true break fractions lie in the intersection of the two
    /// intervals).
    pub p_joint: f64,
    pub reps: usize,
}

/// Two-break separation study: per repetition, simulate one panel from each
/// DGP (each carrying its own break), build the first specification's
/// interval on the first panel and the second specification's interval on
/// the second panel, and record whether BOTH true break fractions lie in
/// the intersection — the event that the common-break rule would wrongly
/// merge the two distinct breaks.
pub fn mc_coverage_two_break(
    dgp_first: &DgpSpec,
    dgp_second: &DgpSpec,
    spec_a: &MeasureSpec,
    spec_b: &MeasureSpec,
    reps: usize,
    config: &BootstrapConfig,
    master_seed: u64,
) -> Result<TwoBreakCell> {
    let s0_first = dgp_first.break_fraction.ok_or_else(|| {
        Error::InvalidConfig("two-break study needs a break in the first DGP".into())
    })?;
    let s0_second = dgp_second.break_fraction.ok_or_else(|| {
        Error::InvalidConfig("two-break study needs a break in the second DGP".into())
    })?;
    if reps == 0 {
        return Err(Error::InvalidConfig("at least one repetition required".into()));
    }
    let joint: Vec<bool> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let panel_a = sample_panel(dgp_first, derive_seed(master_seed, 0, rep, 1))?;
            let panel_b = sample_panel(dgp_second, derive_seed(master_seed, 1, rep, 1))?;
            let config_a =
                BootstrapConfig { seed: derive_seed(master_seed, 0, rep, 2), ..config.clone() };
            let config_b =
                BootstrapConfig { seed: derive_seed(master_seed, 1, rep, 2), ..config.clone() };
            let s_hat_a = point_estimate(&panel_a, spec_a, &config_a)?;
            let ci_a = break_ci_bootstrap(&panel_a, spec_a, s_hat_a, &config_a)?;
            let s_hat_b = point_estimate(&panel_b, spec_b, &config_b)?;
            let ci_b = break_ci_bootstrap(&panel_b, spec_b, s_hat_b, &config_b)?;
            let lo = ci_a.lower.max(ci_b.lower);
            let hi = ci_a.upper.min(ci_b.upper);
            Ok(lo <= s0_first && s0_first <= hi && lo <= s0_second && s0_second <= hi)
        })
        .collect::<Result<Vec<_>>>()?;
    let p_joint = joint.iter().filter(|j| **j).count() as f64 / reps as f64;
    Ok(TwoBreakCell {
        dgp_first: dgp_first.clone(),
        dgp_second: dgp_second.clone(),
        p_joint,
        reps,
    })
}

/// Rolling-window descriptive series: for every window of `window`
/// consecutive rows, the pairwise-averaged Spearman coefficient of that
/// window (ranks computed within the window). Returned as
/// `(window end date, value)`, one entry per window position.
pub fn rolling_spearman_series(
    residuals: &ResidualPanel,
    window: usize,
) -> Result<Vec<(NaiveDate, f64)>> {
    let t_len = residuals.n_rows();
    let n = residuals.n_cols();
    if n < 2 {
        return Err(Error::TooFewColumns { found: n, required: 2 });
    }
    if window < 10 {
        return Err(Error::WindowTooShort {
            window,
            reason: "descriptive window needs at least 10 rows".to_string(),
        });
    }
    if window > t_len {
        return Err(Error::WindowTooShort {
            window,
            reason: format!("panel has only {t_len} rows"),
        });
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|c| residuals.values.column(c)).collect();
    let ends: Vec<usize> = (window..=t_len).collect();
    let values: Vec<f64> = ends
        .par_iter()
        .map(|&end| {
            let lo = end - window;
            let mut acc = 0.0;
            let mut pairs = 0usize;
            for i in 0..n {
                for j in (i + 1)..n {
                    acc += seq_spearman(&columns[i][lo..end], &columns[j][lo..end], window)?;
                    pairs += 1;
                }
            }
            Ok(acc / pairs as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ends
        .iter()
        .zip(values)
        .map(|(&end, v)| (residuals.dates[end - 1], v))
        .collect())
}
