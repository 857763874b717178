//! Copula-based dependence measures along the sequential (prefix) grid.
//!
//! All measures are plug-in functionals of the *sequential* empirical copula:
//! for a pair of residual columns and a prefix length `t`, ranks are computed
//! within the first `t` observations only,
//!
//! ```text
//! F_{i,t}(y)       = (1/t) * #{ k <= t : eta_{i,k} <= y }
//! C_t(u, v)        = (1/t) * #{ k <= t : F_{i,t}(eta_{i,k}) <= u, F_{j,t}(eta_{j,k}) <= v }
//! rho_t            = (12/t) * sum_{k<=t} F_{i,t}(eta_{i,k}) * F_{j,t}(eta_{j,k}) - 3
//! lambda_{q,t}     = C_t(q,q)/q                        for q in (0, 0.5]
//!                  = (1 - 2q + C_t(q,q)) / (1 - q)     for q in (0.5, 1)
//! ```
//!
//! A *measure specification* is an ordered list of such functionals; the
//! *dependence path* evaluates the specification at every prefix length on a
//! trimmed grid and averages over all column pairs (equidependence view).
//!
//! The path engine maintains prefix ranks incrementally (O(t) integer work
//! per inserted observation, O(T^2) per pair overall) and carries Spearman's
//! product sum and the joint tail counts as exact integers, so results are
//! bit-reproducible and independent of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::panel::{Matrix, ResidualPanel};

/// Largest prefix length supported by the engine. Keeps every intermediate
/// integer (rank product sums up to T^3) exactly representable in `f64` and
/// the chunked u32 accumulators overflow-free.
pub const MAX_T: usize = 100_000;

// ---------------------------------------------------------------------------
// measure specification
// ---------------------------------------------------------------------------

/// One dependence functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureItem {
    /// Spearman's rho (plug-in, no small-sample continuity correction).
    Rho,
    /// Quantile dependence at the given level `q in (0,1)`.
    Quantile(f64),
}

impl std::fmt::Display for MeasureItem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasureItem::Rho => write!(f, "rho"),
            MeasureItem::Quantile(q) => write!(f, "q{q}"),
        }
    }
}

/// Ordered, duplicate-free list of dependence functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    items: Vec<MeasureItem>,
}

impl MeasureSpec {
    pub fn new(items: Vec<MeasureItem>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidMeasureSpec {
                spec: String::new(),
                reason: "at least one measure required".into(),
            });
        }
        for (i, item) in items.iter().enumerate() {
            if let MeasureItem::Quantile(q) = item {
                if !(q.is_finite() && *q > 0.0 && *q < 1.0) {
                    return Err(Error::LevelOutOfRange { level: *q });
                }
            }
            for prev in &items[..i] {
                let dup = match (prev, item) {
                    (MeasureItem::Rho, MeasureItem::Rho) => true,
                    (MeasureItem::Quantile(a), MeasureItem::Quantile(b)) => a == b,
                    _ => false,
                };
                if dup {
                    return Err(Error::InvalidMeasureSpec {
                        spec: format!("{item}"),
                        reason: "duplicate measure".into(),
                    });
                }
            }
        }
        Ok(Self { items })
    }

    /// Parse a measure specification: a preset name (`m1`..`m5`) or a
    /// comma-separated list of `rho` / `q<level>` items.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim().to_ascii_lowercase();
        match trimmed.as_str() {
            "m1" => return Self::m1(),
            "m2" => return Self::m2(),
            "m3" => return Self::m3(),
            "m4" => return Self::m4(),
            "m5" => return Self::m5(),
            _ => {}
        }
        let mut items = Vec::new();
        for part in trimmed.split(',') {
            let part = part.trim();
            if part == "rho" {
                items.push(MeasureItem::Rho);
            } else if let Some(level_text) = part.strip_prefix('q') {
                let level: f64 = level_text.parse().map_err(|_| Error::InvalidMeasureSpec {
                    spec: text.to_owned(),
                    reason: format!("cannot parse quantile level in {part:?}"),
                })?;
                if !(level.is_finite() && level > 0.0 && level < 1.0) {
                    return Err(Error::LevelOutOfRange { level });
                }
                items.push(MeasureItem::Quantile(level));
            } else {
                return Err(Error::InvalidMeasureSpec {
                    spec: text.to_owned(),
                    reason: format!("unknown item {part:?}; expected \"rho\" or \"q<level>\""),
                });
            }
        }
        Self::new(items)
    }

    /// rho + both tails: (rho, q0.05, q0.10, q0.90, q0.95).
    pub fn m1() -> Result<Self> {
        Self::new(vec![
            MeasureItem::Rho,
            MeasureItem::Quantile(0.05),
            MeasureItem::Quantile(0.10),
            MeasureItem::Quantile(0.90),
            MeasureItem::Quantile(0.95),
        ])
    }

    /// Both tails without rho: (q0.05, q0.10, q0.90, q0.95).
    pub fn m2() -> Result<Self> {
        Self::new(vec![
            MeasureItem::Quantile(0.05),
            MeasureItem::Quantile(0.10),
            MeasureItem::Quantile(0.90),
            MeasureItem::Quantile(0.95),
        ])
    }

    /// Upper tail only: (q0.90, q0.95).
    pub fn m3() -> Result<Self> {
        Self::new(vec![MeasureItem::Quantile(0.90), MeasureItem::Quantile(0.95)])
    }

    /// Lower tail only: (q0.05, q0.10).
    pub fn m4() -> Result<Self> {
        Self::new(vec![MeasureItem::Quantile(0.05), MeasureItem::Quantile(0.10)])
    }

    /// Spearman's rho alone.
    pub fn m5() -> Result<Self> {
        Self::new(vec![MeasureItem::Rho])
    }

    #[inline]
    pub fn items(&self) -> &[MeasureItem] {
        &self.items
    }

    /// Dimension of the measure vector.
    #[inline]
    pub fn dim(&self) -> usize {
        self.items.len()
    }

    pub fn has_rho(&self) -> bool {
        self.items.iter().any(|i| matches!(i, MeasureItem::Rho))
    }

    /// Quantile items as (item index, level) in specification order.
    pub fn quantile_items(&self) -> Vec<(usize, f64)> {
        self.items
            .iter()
            .enumerate()
            .filter_map(|(i, item)| match item {
                MeasureItem::Quantile(q) => Some((i, *q)),
                MeasureItem::Rho => None,
            })
            .collect()
    }
}

impl std::fmt::Display for MeasureSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let rendered: Vec<String> = self.items.iter().map(|i| format!("{i}")).collect();
        write!(f, "{}", rendered.join(","))
    }
}

// ---------------------------------------------------------------------------
// configuration: trimming, stride, tie policy
// ---------------------------------------------------------------------------

/// What to do when a column contains exactly tied values (the model assumes
/// continuous margins, so ties signal data problems).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TiePolicy {
    /// Fail with [`Error::TiesDetected`] (default).
    Fail,
    /// Break ties by adding deterministic seeded jitter of magnitude
    /// `1e-10 * column range` to every entry of the affected columns.
    Jitter { seed: u64 },
}

impl Default for TiePolicy {
    fn default() -> Self {
        TiePolicy::Fail
    }
}

/// Trimming / grid configuration for the dependence path.
#[derive(Debug, Clone, PartialEq)]
pub struct DepConfig {
    /// Trimming fraction: the grid starts at the smallest `t` with `t/T >= epsilon`.
    pub epsilon: f64,
    /// Keep every `stride`-th grid point (the final point `T` is always kept).
    pub stride: usize,
    pub ties: TiePolicy,
}

impl Default for DepConfig {
    fn default() -> Self {
        Self { epsilon: 0.1, stride: 1, ties: TiePolicy::Fail }
    }
}

/// Trimmed evaluation grid `{t_0, t_0+stride, ...} ∪ {T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub t_len: usize,
    pub points: Vec<usize>,
    pub epsilon: f64,
    pub stride: usize,
}

/// Smallest integer `t >= 1` with `t/T >= epsilon` under exact f64 division
/// semantics (robust against products like `0.1 * 1000` landing an ulp off).
fn first_grid_point(t_len: usize, epsilon: f64) -> usize {
    let tf = t_len as f64;
    let mut t = (epsilon * tf).ceil() as isize;
    t = t.clamp(1, t_len as isize);
    while t > 1 && ((t - 1) as f64) / tf >= epsilon {
        t -= 1;
    }
    while (t as f64) / tf < epsilon && t < t_len as isize {
        t += 1;
    }
    t as usize
}

impl Grid {
    pub fn new(t_len: usize, epsilon: f64, stride: usize) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "trimming fraction must lie in (0, 1], got {epsilon}"
            )));
        }
        if stride == 0 {
            return Err(Error::InvalidConfig("stride must be at least 1".into()));
        }
        if t_len == 0 {
            return Err(Error::TooFewRows { found: 0, required: 1 });
        }
        if t_len > MAX_T {
            return Err(Error::InvalidConfig(format!(
                "series of {t_len} rows exceeds the supported maximum of {MAX_T}"
            )));
        }
        let start = first_grid_point(t_len, epsilon);
        let mut points: Vec<usize> = (start..=t_len).step_by(stride).collect();
        if *points.last().unwrap() != t_len {
            points.push(t_len);
        }
        Ok(Self { t_len, points, epsilon, stride })
    }

    #[inline]
    pub fn start(&self) -> usize {
        self.points[0]
    }
}

// ---------------------------------------------------------------------------
// exact threshold / formula helpers (shared by the engine and the spot API)
// ---------------------------------------------------------------------------

/// Largest integer rank `m in [0, t]` with `m/t <= q` under f64 division.
/// Equivalent to counting `F_{t}(x) <= q` by `rank <= m`.
#[inline]
pub(crate) fn max_rank_leq(t: usize, q: f64) -> u32 {
    let tf = t as f64;
    let mut m = (q * tf).floor() as i64;
    m = m.clamp(0, t as i64);
    while m > 0 && (m as f64) / tf > q {
        m -= 1;
    }
    while m < t as i64 && ((m + 1) as f64) / tf <= q {
        m += 1;
    }
    m as u32
}

/// Spearman's rho from the exact prefix rank product sum `p = sum R_k * S_k`.
#[inline]
pub(crate) fn rho_from_product_sum(p: u64, t: usize) -> f64 {
    let tf = t as f64;
    12.0 * (p as f64) / (tf * tf * tf) - 3.0
}

/// Quantile dependence from the exact joint tail count
/// `count = # { k <= t : R_k <= m(q,t), S_k <= m(q,t) }`.
#[inline]
pub(crate) fn lambda_from_count(count: u64, t: usize, q: f64) -> f64 {
    let c = count as f64 / t as f64;
    if q <= 0.5 {
        c / q
    } else {
        (1.0 - 2.0 * q + c) / (1.0 - q)
    }
}

// ---------------------------------------------------------------------------
// tie handling and rank keys
// ---------------------------------------------------------------------------

fn has_ties(col: &[f64]) -> bool {
    let mut sorted = col.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

/// Integer order keys (global ranks 1..=T) per column. Applies the tie
/// policy; the returned keys are strictly totally ordered per column.
pub(crate) fn panel_keys(panel: &ResidualPanel, ties: TiePolicy) -> Result<Vec<Vec<u32>>> {
    let t_len = panel.n_rows();
    if t_len > MAX_T {
        return Err(Error::InvalidConfig(format!(
            "series of {t_len} rows exceeds the supported maximum of {MAX_T}"
        )));
    }
    let mut keys = Vec::with_capacity(panel.n_cols());
    for c in 0..panel.n_cols() {
        let mut col = panel.values.column(c);
        if has_ties(&col) {
            match ties {
                TiePolicy::Fail => {
                    return Err(Error::TiesDetected { column: panel.names[c].clone() });
                }
                TiePolicy::Jitter { seed } => {
                    jitter_column(&mut col, seed, c);
                    if has_ties(&col) {
                        return Err(Error::TiesDetected { column: panel.names[c].clone() });
                    }
                }
            }
        }
        keys.push(global_ranks(&col));
    }
    Ok(keys)
}

/// Deterministic tie-breaking jitter: `1e-10 * column range`, seeded per
/// column so results do not depend on processing order.
fn jitter_column(col: &mut [f64], seed: u64, col_index: usize) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in col.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    let scale = if range > 0.0 { range } else { lo.abs().max(1.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(col_index as u64 + 1);
    for v in col.iter_mut() {
        let u: f64 = rng.random::<f64>() - 0.5;
        *v += 1e-10 * scale * u;
    }
}

/// Ranks 1..=len of a strictly totally ordered column.
fn global_ranks(col: &[f64]) -> Vec<u32> {
    let mut idx: Vec<u32> = (0..col.len() as u32).collect();
    idx.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
    let mut ranks = vec![0u32; col.len()];
    for (pos, &i) in idx.iter().enumerate() {
        ranks[i as usize] = pos as u32 + 1;
    }
    ranks
}

// ---------------------------------------------------------------------------
// the sequential path engine
// ---------------------------------------------------------------------------

/// Per-level rank thresholds m(q, t) for t = 1..=T, aligned with
/// `spec.quantile_items()`.
pub(crate) struct ThresholdTable {
    pub by_level: Vec<Vec<u32>>,
}

impl ThresholdTable {
    pub(crate) fn new(levels: &[f64], t_len: usize) -> Self {
        let by_level = levels
            .iter()
            .map(|&q| (1..=t_len).map(|t| max_rank_leq(t, q)).collect())
            .collect();
        Self { by_level }
    }
}

/// Reusable per-pair scratch buffers (prefix rank arrays).
pub(crate) struct PairScratch {
    r: Vec<u32>,
    s: Vec<u32>,
}

impl PairScratch {
    pub(crate) fn new(capacity: usize) -> Self {
        Self { r: Vec::with_capacity(capacity), s: Vec::with_capacity(capacity) }
    }
}

const CHUNK: usize = 4096;

/// Insert one observation into the prefix, updating both rank arrays and
/// returning `(new rank in x, new rank in y, increment of sum R_k S_k)`.
/// Tie-tolerant: ranks follow the `<=`-count (maximal rank) convention, which
/// is what the plug-in formulas prescribe for duplicated bootstrap rows.
#[inline]
fn insert_with_products(
    xs: &[u32],
    ys: &[u32],
    r: &mut [u32],
    s: &mut [u32],
    xn: u32,
    yn: u32,
) -> (u32, u32, u64) {
    let t_cur = xs.len();
    let mut sum_rb: u64 = 0;
    let mut sum_sa: u64 = 0;
    let mut n_ab: u64 = 0;
    let mut le_x: u64 = 0;
    let mut le_y: u64 = 0;
    let mut off = 0;
    while off < t_cur {
        let end = (off + CHUNK).min(t_cur);
        let xs_c = &xs[off..end];
        let ys_c = &ys[off..end];
        let r_c = &mut r[off..end];
        let s_c = &mut s[off..end];
        let (mut c_rb, mut c_sa, mut c_ab, mut c_lx, mut c_ly) = (0u32, 0u32, 0u32, 0u32, 0u32);
        for i in 0..xs_c.len() {
            let a = (xs_c[i] >= xn) as u32;
            let b = (ys_c[i] >= yn) as u32;
            c_lx += (xs_c[i] <= xn) as u32;
            c_ly += (ys_c[i] <= yn) as u32;
            c_rb += r_c[i] * b;
            c_sa += s_c[i] * a;
            c_ab += a & b;
            r_c[i] += a;
            s_c[i] += b;
        }
        sum_rb += c_rb as u64;
        sum_sa += c_sa as u64;
        n_ab += c_ab as u64;
        le_x += c_lx as u64;
        le_y += c_ly as u64;
        off = end;
    }
    let rn = le_x as u32 + 1;
    let sn = le_y as u32 + 1;
    let delta = sum_rb + sum_sa + n_ab + (rn as u64) * (sn as u64);
    (rn, sn, delta)
}

/// Rank-update-only variant for rho-free specifications.
#[inline]
fn insert_ranks_only(
    xs: &[u32],
    ys: &[u32],
    r: &mut [u32],
    s: &mut [u32],
    xn: u32,
    yn: u32,
) -> (u32, u32) {
    let mut le_x: u64 = 0;
    let mut le_y: u64 = 0;
    let mut off = 0;
    while off < xs.len() {
        let end = (off + CHUNK).min(xs.len());
        let xs_c = &xs[off..end];
        let ys_c = &ys[off..end];
        let r_c = &mut r[off..end];
        let s_c = &mut s[off..end];
        let (mut c_lx, mut c_ly) = (0u32, 0u32);
        for i in 0..xs_c.len() {
            let a = (xs_c[i] >= xn) as u32;
            let b = (ys_c[i] >= yn) as u32;
            c_lx += (xs_c[i] <= xn) as u32;
            c_ly += (ys_c[i] <= yn) as u32;
            r_c[i] += a;
            s_c[i] += b;
        }
        le_x += c_lx as u64;
        le_y += c_ly as u64;
        off = end;
    }
    (le_x as u32 + 1, le_y as u32 + 1)
}

/// Exact count of prefix points with both ranks at or below `m`.
#[inline]
fn count_joint_below(r: &[u32], s: &[u32], m: u32) -> u64 {
    let mut total: u64 = 0;
    let mut off = 0;
    while off < r.len() {
        let end = (off + CHUNK).min(r.len());
        let r_c = &r[off..end];
        let s_c = &s[off..end];
        let mut c: u32 = 0;
        for i in 0..r_c.len() {
            c += ((r_c[i] <= m) & (s_c[i] <= m)) as u32;
        }
        total += c as u64;
        off = end;
    }
    total
}

/// One pair's measure path over the grid (row-major `grid.len() x spec.dim()`).
pub(crate) fn pair_path(
    x: &[u32],
    y: &[u32],
    grid: &Grid,
    spec: &MeasureSpec,
    thresholds: &ThresholdTable,
    scratch: &mut PairScratch,
    out: &mut [f64],
) {
    let t_len = x.len();
    debug_assert_eq!(y.len(), t_len);
    debug_assert_eq!(grid.t_len, t_len);
    let d = spec.dim();
    debug_assert_eq!(out.len(), grid.points.len() * d);

    let need_rho = spec.has_rho();
    let qitems = spec.quantile_items();
    let r = &mut scratch.r;
    let s = &mut scratch.s;
    r.clear();
    s.clear();
    let mut p: u64 = 0;
    let mut gi = 0usize;

    for t in 1..=t_len {
        let (xn, yn) = (x[t - 1], y[t - 1]);
        if need_rho {
            let (rn, sn, delta) = insert_with_products(
                &x[..t - 1],
                &y[..t - 1],
                &mut r[..],
                &mut s[..],
                xn,
                yn,
            );
            p += delta;
            r.push(rn);
            s.push(sn);
        } else {
            let (rn, sn) =
                insert_ranks_only(&x[..t - 1], &y[..t - 1], &mut r[..], &mut s[..], xn, yn);
            r.push(rn);
            s.push(sn);
        }
        if gi < grid.points.len() && grid.points[gi] == t {
            let row = &mut out[gi * d..(gi + 1) * d];
            if need_rho {
                for (j, item) in spec.items().iter().enumerate() {
                    if matches!(item, MeasureItem::Rho) {
                        row[j] = rho_from_product_sum(p, t);
                    }
                }
            }
            for (li, &(item_idx, q)) in qitems.iter().enumerate() {
                let m = thresholds.by_level[li][t - 1];
                let count = count_joint_below(r, s, m);
                row[item_idx] = lambda_from_count(count, t, q);
            }
            gi += 1;
        }
    }
}

/// Pairwise-averaged measure path from per-column integer keys
/// (row-major `grid.len() x spec.dim()`). Pairs are processed in
/// lexicographic `(i, j), i < j` order and reduced sequentially, so the
/// result is bit-identical regardless of the rayon worker count.
pub(crate) fn averaged_path_from_keys(
    keys: &[Vec<u32>],
    grid: &Grid,
    spec: &MeasureSpec,
    thresholds: &ThresholdTable,
) -> Vec<f64> {
    let n = keys.len();
    let d = spec.dim();
    let cells = grid.points.len() * d;
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();

    let per_pair: Vec<Vec<f64>> = pairs
        .par_iter()
        .map_init(
            || PairScratch::new(grid.t_len),
            |scratch, &(i, j)| {
                let mut out = vec![0.0; cells];
                pair_path(&keys[i], &keys[j], grid, spec, thresholds, scratch, &mut out);
                out
            },
        )
        .collect();

    let mut acc = vec![0.0; cells];
    for pair_vals in &per_pair {
        for (a, v) in acc.iter_mut().zip(pair_vals) {
            *a += *v;
        }
    }
    let w = 1.0 / pairs.len() as f64;
    for a in acc.iter_mut() {
        *a *= w;
    }
    acc
}

// ---------------------------------------------------------------------------
// public path type and entry points
// ---------------------------------------------------------------------------

/// The pairwise-averaged dependence-measure path over the trimmed grid.
#[derive(Debug, Clone)]
pub struct DependencePath {
    /// Prefix lengths at which the measures were evaluated (ascending,
    /// last entry equals the series length).
    pub grid: Vec<usize>,
    /// Series length `T`.
    pub t_len: usize,
    /// Measure specification, defining the column order of `values`.
    pub spec: MeasureSpec,
    /// `grid.len() x spec.dim()` matrix of measure values.
    pub values: Matrix,
}

impl DependencePath {
    /// Measure vector at the final grid point (the full-sample value).
    pub fn full_sample_row(&self) -> &[f64] {
        self.values.row(self.values.rows() - 1)
    }
}

/// Smallest admissible first grid point for a specification: at least 10
/// observations, and at least `1/min(q, 1-q)` so the thinner tail of every
/// quantile level contains at least one observation.
pub(crate) fn required_grid_start(spec: &MeasureSpec) -> f64 {
    let mut req: f64 = 10.0;
    for (_, q) in spec.quantile_items() {
        req = req.max(1.0 / q.min(1.0 - q));
    }
    req
}

/// Evaluate the pairwise-averaged dependence path of a residual panel.
pub fn dependence_path(
    panel: &ResidualPanel,
    spec: &MeasureSpec,
    config: &DepConfig,
) -> Result<DependencePath> {
    if panel.n_cols() < 2 {
        return Err(Error::TooFewColumns { found: panel.n_cols(), required: 2 });
    }
    let grid = Grid::new(panel.n_rows(), config.epsilon, config.stride)?;
    let required = required_grid_start(spec);
    if (grid.start() as f64) < required {
        return Err(Error::TrimTooSmall {
            start: grid.start(),
            required: required.ceil() as usize,
        });
    }
    let keys = panel_keys(panel, config.ties)?;
    let levels: Vec<f64> = spec.quantile_items().iter().map(|&(_, q)| q).collect();
    let thresholds = ThresholdTable::new(&levels, grid.t_len);
    let values = averaged_path_from_keys(&keys, &grid, spec, &thresholds);
    Ok(DependencePath {
        grid: grid.points.clone(),
        t_len: grid.t_len,
        spec: spec.clone(),
        values: Matrix::from_vec(values, grid.points.len(), spec.dim())?,
    })
}

// ---------------------------------------------------------------------------
// spot API: single-prefix evaluations on raw columns
// ---------------------------------------------------------------------------

fn check_prefix(len: usize, t: usize) -> Result<()> {
    if t == 0 || t > len {
        return Err(Error::InvalidConfig(format!(
            "prefix length {t} outside 1..={len}"
        )));
    }
    Ok(())
}

fn prefix_ranks_checked(col: &[f64], t: usize, label: &str) -> Result<Vec<u32>> {
    let prefix = &col[..t];
    if has_ties(prefix) {
        return Err(Error::TiesDetected { column: label.to_owned() });
    }
    Ok(global_ranks(prefix))
}

/// Sequential empirical CDF `F_t(x)` of the first `t` entries.
pub fn seq_ecdf(values: &[f64], t: usize, x: f64) -> Result<f64> {
    check_prefix(values.len(), t)?;
    let count = values[..t].iter().filter(|&&v| v <= x).count();
    Ok(count as f64 / t as f64)
}

/// Sequential empirical copula `C_t(u, v)` of a column pair at prefix `t`.
pub fn seq_copula(x: &[f64], y: &[f64], t: usize, u: f64, v: f64) -> Result<f64> {
    check_prefix(x.len().min(y.len()), t)?;
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidConfig(format!(
            "copula arguments must lie in [0,1], got ({u}, {v})"
        )));
    }
    let r = prefix_ranks_checked(x, t, "x")?;
    let s = prefix_ranks_checked(y, t, "y")?;
    let tf = t as f64;
    let count = r
        .iter()
        .zip(&s)
        .filter(|&(&rk, &sk)| rk as f64 / tf <= u && sk as f64 / tf <= v)
        .count();
    Ok(count as f64 / tf)
}

/// Sequential Spearman's rho of a column pair at prefix `t`.
pub fn seq_spearman(x: &[f64], y: &[f64], t: usize) -> Result<f64> {
    check_prefix(x.len().min(y.len()), t)?;
    let r = prefix_ranks_checked(x, t, "x")?;
    let s = prefix_ranks_checked(y, t, "y")?;
    let p: u64 = r.iter().zip(&s).map(|(&rk, &sk)| rk as u64 * sk as u64).sum();
    Ok(rho_from_product_sum(p, t))
}

/// Sequential quantile dependence of a column pair at prefix `t` and level `q`.
pub fn seq_quantile_dep(x: &[f64], y: &[f64], t: usize, q: f64) -> Result<f64> {
    check_prefix(x.len().min(y.len()), t)?;
    if !(q.is_finite() && q > 0.0 && q < 1.0) {
        return Err(Error::LevelOutOfRange { level: q });
    }
    let r = prefix_ranks_checked(x, t, "x")?;
    let s = prefix_ranks_checked(y, t, "y")?;
    let m = max_rank_leq(t, q);
    let count = count_joint_below(&r, &s, m);
    Ok(lambda_from_count(count, t, q))
}
