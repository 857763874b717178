//! Independent brute-force oracles for the sequential dependence measures.
//!
//! Everything here is recomputed from first principles — double loops over
//! raw observations, no shared rank machinery — and compared to the library
//! bit-for-bit. Counts are integers and every final expression mirrors the
//! documented plug-in formulas, so exact equality is the correct assertion,
//! not a tolerance.

use chrono::NaiveDate;
use copubreak::{
    cusum_statistic, dependence_path, seq_copula, seq_ecdf, seq_quantile_dep, seq_spearman,
    DepConfig, Matrix, MeasureSpec, ResidualPanel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn synthetic_panel(cols: Vec<Vec<f64>>) -> ResidualPanel {
    let t = cols[0].len();
    let n = cols.len();
    let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
    let mut data = Vec::with_capacity(t * n);
    for r in 0..t {
        for col in &cols {
            data.push(col[r]);
        }
    }
    ResidualPanel {
        dates: (0..t).map(|i| start + chrono::Duration::days(i as i64)).collect(),
        names: (0..n).map(|c| format!("c{c}")).collect(),
        values: Matrix::from_vec(data, t, n).unwrap(),
        fits: None,
    }
}

fn random_columns(rng: &mut ChaCha8Rng, t: usize, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..t).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// Rank of each prefix element: `R_k = #{ j <= t : x_j <= x_k }`.
fn brute_ranks(x: &[f64], t: usize) -> Vec<u64> {
    (0..t)
        .map(|k| x[..t].iter().filter(|&&v| v <= x[k]).count() as u64)
        .collect()
}

fn oracle_ecdf(x: &[f64], t: usize, v: f64) -> f64 {
    x[..t].iter().filter(|&&w| w <= v).count() as f64 / t as f64
}

fn oracle_copula(x: &[f64], y: &[f64], t: usize, u: f64, v: f64) -> f64 {
    let (r, s) = (brute_ranks(x, t), brute_ranks(y, t));
    let tf = t as f64;
    let count = (0..t)
        .filter(|&k| r[k] as f64 / tf <= u && s[k] as f64 / tf <= v)
        .count();
    count as f64 / tf
}

fn oracle_spearman(x: &[f64], y: &[f64], t: usize) -> f64 {
    let (r, s) = (brute_ranks(x, t), brute_ranks(y, t));
    let p: u64 = r.iter().zip(&s).map(|(&rk, &sk)| rk * sk).sum();
    let tf = t as f64;
    12.0 * (p as f64) / (tf * tf * tf) - 3.0
}

fn oracle_quantile_dep(x: &[f64], y: &[f64], t: usize, q: f64) -> f64 {
    let (r, s) = (brute_ranks(x, t), brute_ranks(y, t));
    let tf = t as f64;
    let count = (0..t)
        .filter(|&k| r[k] as f64 / tf <= q && s[k] as f64 / tf <= q)
        .count();
    let c = count as f64 / tf;
    if q <= 0.5 {
        c / q
    } else {
        (1.0 - 2.0 * q + c) / (1.0 - q)
    }
}

#[test]
fn spot_estimators_match_brute_force_on_100_random_panels() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    let levels = [0.05, 0.1, 0.25, 0.5, 0.6, 0.75, 0.9, 0.95];
    for panel_idx in 0..100 {
        let t_len = rng.random_range(5..=50usize);
        let cols = random_columns(&mut rng, t_len, 2);
        let (x, y) = (&cols[0], &cols[1]);
        for t in 2..=t_len {
            assert_eq!(
                seq_spearman(x, y, t).unwrap(),
                oracle_spearman(x, y, t),
                "spearman, panel {panel_idx}, prefix {t}"
            );
            let q = levels[rng.random_range(0..levels.len())];
            assert_eq!(
                seq_quantile_dep(x, y, t, q).unwrap(),
                oracle_quantile_dep(x, y, t, q),
                "quantile dep, panel {panel_idx}, prefix {t}, q {q}"
            );
            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            assert_eq!(
                seq_copula(x, y, t, u, v).unwrap(),
                oracle_copula(x, y, t, u, v),
                "copula, panel {panel_idx}, prefix {t}, ({u}, {v})"
            );
            let w = x[rng.random_range(0..t)];
            assert_eq!(
                seq_ecdf(x, t, w).unwrap(),
                oracle_ecdf(x, t, w),
                "ecdf, panel {panel_idx}, prefix {t}"
            );
        }
    }
}

#[test]
fn averaged_path_matches_pairwise_spot_averages_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFACE);
    let spec = MeasureSpec::parse("rho,q0.25,q0.75").unwrap();
    // A wider trim keeps the first grid point at >= 10 observations (the
    // engine's floor) while the panels stay small enough to brute-force.
    let config = DepConfig { epsilon: 0.25, ..DepConfig::default() };
    for trial in 0..20 {
        let t_len = rng.random_range(40..=60usize);
        let n = rng.random_range(2..=4usize);
        let cols = random_columns(&mut rng, t_len, n);
        let panel = synthetic_panel(cols.clone());
        let path = dependence_path(&panel, &spec, &config).unwrap();

        let n_pairs = n * (n - 1) / 2;
        let w = 1.0 / n_pairs as f64;
        for (gi, &t) in path.grid.iter().enumerate() {
            for (d, item) in ["rho", "q0.25", "q0.75"].iter().enumerate() {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        acc += match d {
                            0 => oracle_spearman(&cols[i], &cols[j], t),
                            1 => oracle_quantile_dep(&cols[i], &cols[j], t, 0.25),
                            _ => oracle_quantile_dep(&cols[i], &cols[j], t, 0.75),
                        };
                    }
                }
                assert_eq!(
                    path.values.get(gi, d),
                    acc * w,
                    "trial {trial}, grid point {t}, measure {item}"
                );
            }
        }
    }
}

#[test]
fn full_tail_spec_path_matches_oracle_at_larger_sample() {
    // q0.05/q0.95 need 20 observations at the first grid point, hence a
    // larger panel than the random-small sweep above.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cols = random_columns(&mut rng, 240, 3);
    let panel = synthetic_panel(cols.clone());
    let spec = MeasureSpec::m1().unwrap();
    let path = dependence_path(&panel, &spec, &DepConfig::default()).unwrap();
    let w = 1.0 / 3.0;
    let levels = [0.05, 0.10, 0.90, 0.95];
    for (gi, &t) in path.grid.iter().enumerate() {
        for d in 0..spec.dim() {
            let mut acc = 0.0;
            for i in 0..3 {
                for j in (i + 1)..3 {
                    acc += if d == 0 {
                        oracle_spearman(&cols[i], &cols[j], t)
                    } else {
                        oracle_quantile_dep(&cols[i], &cols[j], t, levels[d - 1])
                    };
                }
            }
            assert_eq!(path.values.get(gi, d), acc * w, "grid point {t}, dim {d}");
        }
    }
}

#[test]
fn comonotone_and_countermonotone_hit_the_closed_forms() {
    // Strictly increasing columns: R_k = S_k = k, so the plug-in estimator
    // is 12/t^3 * sum k^2 - 3 = 2(t+1)(2t+1)/t^2 - 3 exactly.
    let t = 100usize;
    let x: Vec<f64> = (1..=t).map(|k| k as f64).collect();
    let up = x.clone();
    let down: Vec<f64> = (1..=t).map(|k| -(k as f64)).collect();

    let rho_up = seq_spearman(&x, &up, t).unwrap();
    let tf = t as f64;
    let sum_sq = (t * (t + 1) * (2 * t + 1) / 6) as f64;
    assert_eq!(rho_up, 12.0 * sum_sq / (tf * tf * tf) - 3.0);
    assert!((rho_up - 1.0602).abs() < 1e-12);

    // Countermonotone: S_k = t + 1 - R_k.
    let rho_down = seq_spearman(&x, &down, t).unwrap();
    let sum_rev = ((t + 1) * (t * (t + 1) / 2) - t * (t + 1) * (2 * t + 1) / 6) as f64;
    assert_eq!(rho_down, 12.0 * sum_rev / (tf * tf * tf) - 3.0);
    assert!((rho_down + 0.9396).abs() < 1e-12);

    // Comonotone quantile dependence is exactly 1 at matching thresholds.
    assert_eq!(seq_quantile_dep(&x, &up, t, 0.05).unwrap(), 1.0);
    assert_eq!(seq_quantile_dep(&x, &up, t, 0.95).unwrap(), 1.0);
}

#[test]
fn cusum_profile_matches_direct_reimplementation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cols = random_columns(&mut rng, 120, 3);
    let panel = synthetic_panel(cols);
    let spec = MeasureSpec::parse("rho,q0.5").unwrap();
    let path = dependence_path(&panel, &spec, &DepConfig::default()).unwrap();
    let result = cusum_statistic(&path).unwrap();

    let t_len = path.t_len as f64;
    let last = path.grid.len() - 1;
    let mut best = f64::NEG_INFINITY;
    let mut best_t = 0usize;
    for (gi, &t) in path.grid.iter().enumerate() {
        let frac = t as f64 / t_len;
        let mut dist = 0.0;
        for d in 0..spec.dim() {
            let diff = path.values.get(gi, d) - path.values.get(last, d);
            dist += diff * diff;
        }
        let value = frac * frac * t_len * dist;
        assert_eq!(result.profile[gi], value, "profile at t = {t}");
        if value > best {
            best = value;
            best_t = t;
        }
    }
    assert_eq!(result.statistic, best);
    assert_eq!(result.k_hat, best_t);
    assert_eq!(result.s_hat, best_t as f64 / t_len);
    assert_eq!(result.profile[last], 0.0);
}
