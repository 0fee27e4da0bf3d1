//! Heavy-tail and extreme-value estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::{level_sequence, predicted_stationary_tail, ChainModel, TailLaw};
use crate::rng::RngStream;
use crate::sim::{replicate, step, CensoredSample, ExceedanceRecord, DEFAULT_CAP};
use crate::stats::{linear_fit, quantile_sorted};

/// Exceedances needed by the threshold-based estimators.
pub const MIN_EXCEEDANCES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMethod {
    Hill,
    LoglogRegression,
    ParetoMle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub method: TailMethod,
    pub index: f64,
    pub constant: f64,
    /// Order statistics (Hill) or thresholds (regression) used.
    pub k_used: usize,
    /// `index / √k` for Hill, regression standard error otherwise.
    pub stderr: f64,
}

/// Default Hill `k = ⌊n^{0.6}⌋`.
pub fn default_k(n: usize) -> usize {
    ((n as f64).powf(0.6).floor() as usize).clamp(2, n.saturating_sub(1).max(2))
}

fn positive_descending(samples: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = samples.iter().cloned().filter(|&x| x > 0.0).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn hill_sorted(desc: &[f64], n_total: usize, k: usize) -> TailEstimate {
    let anchor = desc[k];
    let mean_log: f64 = desc[..k].iter().map(|x| (x / anchor).ln()).sum::<f64>() / k as f64;
    let index = 1.0 / mean_log;
    TailEstimate {
        method: TailMethod::Hill,
        index,
        constant: k as f64 / n_total as f64 * anchor.powf(index),
        k_used: k,
        stderr: index / (k as f64).sqrt(),
    }
}

/// Hill estimator on the `k` largest of `samples` with anchor `X_{(k+1)}`.
/// The constant is `(k/n) X_{(k+1)}^{index}`, `n` counting every sample.
pub fn hill(samples: &[f64], k: usize) -> Result<TailEstimate> {
    let desc = positive_descending(samples);
    if k < 2 || desc.len() < k + 1 {
        return Err(Error::InsufficientData(format!(
            "Hill with k={k} needs k ≥ 2 and k+1 positive samples, have {}",
            desc.len()
        )));
    }
    Ok(hill_sorted(&desc, samples.len(), k))
}

/// Hill estimates over a k-grid (one sort).
pub fn hill_plot(samples: &[f64], ks: &[usize]) -> Vec<TailEstimate> {
    let desc = positive_descending(samples);
    ks.iter()
        .filter(|&&k| k >= 2 && k < desc.len())
        .map(|&k| hill_sorted(&desc, samples.len(), k))
        .collect()
}

/// Roughly logarithmic k-grid from 10 to `n/2`.
pub fn hill_grid(n: usize) -> Vec<usize> {
    let mut ks = Vec::new();
    let mut k = 10.0f64;
    while (k as usize) < n / 2 {
        let ki = k as usize;
        if ks.last() != Some(&ki) {
            ks.push(ki);
        }
        k *= 1.25;
    }
    ks
}

/// Pareto maximum-likelihood index of `X / threshold` over exceedances.
pub fn hill_above_threshold(samples: &[f64], threshold: f64) -> Result<TailEstimate> {
    let logs: Vec<f64> = samples
        .iter()
        .filter(|&&x| x > threshold)
        .map(|&x| (x / threshold).ln())
        .collect();
    if logs.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{} exceedances of {threshold}, need {MIN_EXCEEDANCES}",
            logs.len()
        )));
    }
    let k = logs.len();
    let index = k as f64 / logs.iter().sum::<f64>();
    Ok(TailEstimate {
        method: TailMethod::ParetoMle,
        index,
        constant: k as f64 / samples.len() as f64 * threshold.powf(index),
        k_used: k,
        stderr: index / (k as f64).sqrt(),
    })
}

// ---------------------------------------------------------------------------
// survival tables and regression
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalRow {
    pub threshold: f64,
    pub empirical: f64,
    pub predicted: f64,
    pub ratio: f64,
    /// Samples usable at this threshold (censored values at or below it drop out).
    pub n_effective: usize,
    pub exceedances: usize,
}

/// Empirical `P(X > x)` on a threshold grid. A censored sample is a lower
/// bound, so it counts as an exceedance of every threshold below its value
/// and is dropped from thresholds at or above it.
pub fn survival_table(
    samples: &[CensoredSample],
    thresholds: &[f64],
    predicted: Option<&TailLaw>,
) -> Vec<SurvivalRow> {
    thresholds
        .iter()
        .map(|&x| {
            let mut n_eff = 0usize;
            let mut exc = 0usize;
            for s in samples {
                let v = s.value as f64;
                if s.censored && v <= x {
                    continue;
                }
                n_eff += 1;
                if v > x {
                    exc += 1;
                }
            }
            let empirical = if n_eff == 0 { f64::NAN } else { exc as f64 / n_eff as f64 };
            let pred = predicted.map_or(f64::NAN, |t| t.survival(x));
            SurvivalRow {
                threshold: x,
                empirical,
                predicted: pred,
                ratio: empirical / pred,
                n_effective: n_eff,
                exceedances: exc,
            }
        })
        .collect()
}

pub const MIN_LOGLOG_THRESHOLDS: usize = 5;
pub const MIN_LOGLOG_EXCEEDANCES: usize = 100;

/// Least squares `log P̂(X > x) = log C − γ log x` over the threshold grid.
pub fn survival_loglog_fit(samples: &[CensoredSample], thresholds: &[f64]) -> Result<TailEstimate> {
    loglog_fit_checked(&survival_table(samples, thresholds, None))
}

/// [`loglog_fit_rows`] with the data requirements of [`survival_loglog_fit`].
pub fn loglog_fit_checked(rows: &[SurvivalRow]) -> Result<TailEstimate> {
    if rows.len() < MIN_LOGLOG_THRESHOLDS {
        return Err(Error::InsufficientData(format!(
            "{} thresholds given, need {MIN_LOGLOG_THRESHOLDS}",
            rows.len()
        )));
    }
    if let Some(bad) = rows.iter().find(|r| r.exceedances < MIN_LOGLOG_EXCEEDANCES) {
        return Err(Error::InsufficientData(format!(
            "threshold {} has {} exceedances, need {MIN_LOGLOG_EXCEEDANCES}",
            bad.threshold, bad.exceedances
        )));
    }
    Ok(loglog_fit_rows(rows))
}

/// Same regression on a precomputed table (no exceedance requirement).
pub fn loglog_fit_rows(rows: &[SurvivalRow]) -> TailEstimate {
    let xs: Vec<f64> = rows.iter().map(|r| r.threshold.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.empirical.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    let m = xs.len() as f64;
    let resid: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2))
        .sum();
    let sxx: f64 = {
        let mx = xs.iter().sum::<f64>() / m;
        xs.iter().map(|x| (x - mx).powi(2)).sum()
    };
    let stderr = if m > 2.0 { (resid / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    TailEstimate {
        method: TailMethod::LoglogRegression,
        index: -fit.slope,
        constant: fit.intercept.exp(),
        k_used: rows.len(),
        stderr,
    }
}

/// `count` log-spaced thresholds from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2 && lo > 0.0 && hi > lo);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

// ---------------------------------------------------------------------------
// tail process
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProcessSummary {
    pub threshold: f64,
    pub horizon: usize,
    pub exceedances: usize,
    /// Some exceedance windows overlap.
    pub overlapping: bool,
    /// `[q05, q50, q95]` of `X_j / X_0` for `j = 1..=horizon`.
    pub lag_quantiles: Vec<[f64; 3]>,
    /// Pareto index of `X_0 / threshold` among exceedances.
    pub u0_index: f64,
}

impl TailProcessSummary {
    pub fn max_median_deviation(&self) -> f64 {
        self.lag_quantiles
            .iter()
            .map(|q| (q[1] - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Windows `X_t, …, X_{t+h}` at every `t` with `X_t > threshold`.
pub fn tail_process_stat(values: &[f64], threshold: f64, horizon: usize) -> Result<TailProcessSummary> {
    if values.len() <= horizon {
        return Err(Error::InsufficientData(format!(
            "trajectory of length {} is not longer than horizon {horizon}",
            values.len()
        )));
    }
    let starts: Vec<usize> = (0..values.len() - horizon)
        .filter(|&t| values[t] > threshold)
        .collect();
    let windows: Vec<&[f64]> = starts.iter().map(|&t| &values[t..=t + horizon]).collect();
    let overlapping = starts.windows(2).any(|w| w[1] - w[0] <= horizon);
    summarize_windows(&windows, threshold, horizon, overlapping)
}

/// [`tail_process_stat`] on a sparse record; `threshold` must not be below
/// the record's floor.
pub fn tail_process_sparse(record: &ExceedanceRecord, threshold: f64) -> Result<TailProcessSummary> {
    if threshold < record.floor as f64 {
        return Err(Error::ParameterDomain(format!(
            "threshold {threshold} is below the record floor {}",
            record.floor
        )));
    }
    let h = record.horizon;
    let e = &record.entries;
    let mut windows: Vec<Vec<f64>> = Vec::new();
    let mut last_start: Option<u64> = None;
    let mut overlapping = false;
    for i in 0..e.len() {
        let (t, x) = e[i];
        if (x as f64) <= threshold || t + h as u64 >= record.n {
            continue;
        }
        // every value above the floor is followed by its next `h` values
        debug_assert_eq!(e[i + h].0, t + h as u64);
        windows.push(e[i..=i + h].iter().map(|p| p.1 as f64).collect());
        overlapping |= last_start.is_some_and(|s| t - s <= h as u64);
        last_start = Some(t);
    }
    let windows: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
    summarize_windows(&windows, threshold, h, overlapping)
}

fn summarize_windows(
    windows: &[&[f64]],
    threshold: f64,
    horizon: usize,
    overlapping: bool,
) -> Result<TailProcessSummary> {
    if windows.len() < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{} exceedances of {threshold}, need {MIN_EXCEEDANCES}",
            windows.len()
        )));
    }
    let lag_quantiles = (1..=horizon)
        .map(|j| {
            let mut r: Vec<f64> = windows.iter().map(|w| w[j] / w[0]).collect();
            r.sort_by(f64::total_cmp);
            [
                quantile_sorted(&r, 0.05),
                quantile_sorted(&r, 0.5),
                quantile_sorted(&r, 0.95),
            ]
        })
        .collect();
    let heads: Vec<f64> = windows.iter().map(|w| w[0]).collect();
    let u0 = hill_above_threshold(&heads, threshold)?;
    Ok(TailProcessSummary {
        threshold,
        horizon,
        exceedances: windows.len(),
        overlapping,
        lag_quantiles,
        u0_index: u0.index,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnticlusterEstimate {
    pub probability: f64,
    pub exceedances: usize,
}

/// `P̂(max_{m ≤ k ≤ r_n} X_{t+k} > u | X_t > u)` over exceedance times with a
/// full forward window.
pub fn anticluster_stat(values: &[f64], m: usize, r_n: usize, u_level: f64) -> Result<AnticlusterEstimate> {
    if !(m >= 1 && r_n > m) {
        return Err(Error::ParameterDomain(format!(
            "anti-clustering needs r_n > m ≥ 1, got m={m}, r_n={r_n}"
        )));
    }
    if values.len() <= r_n {
        return Err(Error::InsufficientData(format!(
            "sequence of length {} shorter than r_n={r_n}",
            values.len()
        )));
    }
    let mut exc = 0usize;
    let mut hits = 0usize;
    for t in 0..values.len() - r_n {
        if values[t] > u_level {
            exc += 1;
            if values[t + m..=t + r_n].iter().any(|&v| v > u_level) {
                hits += 1;
            }
        }
    }
    if exc < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{exc} exceedances of {u_level}, need {MIN_EXCEEDANCES}"
        )));
    }
    Ok(AnticlusterEstimate {
        probability: hits as f64 / exc as f64,
        exceedances: exc,
    })
}

// ---------------------------------------------------------------------------
// extremes of the chain
// ---------------------------------------------------------------------------

/// iid comparison sequence for [`extremal_diag`].
#[derive(Debug, Clone, PartialEq)]
pub enum Surrogate {
    /// Exact continuous Pareto with the predicted stationary tail
    /// `P(Y > y) = C y^{−γ}`, `y ≥ C^{1/γ}`.
    PredictedPareto,
    /// Resampling with replacement from a pool of chain values.
    Resample(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalRow {
    pub n: u64,
    pub level: f64,
    /// Fraction of chain replicates with `M_n ≤ u_n(τ)`.
    pub chain: f64,
    /// Same for the iid surrogate (→ e^{−τ}).
    pub surrogate: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalConfig {
    pub n_grid: Vec<u64>,
    pub tau: f64,
    pub reps: usize,
    pub burn_in: u64,
    pub seed: u64,
    pub surrogate: Surrogate,
}

/// `P̂(M_n ≤ u_n(τ))` for the chain and for an iid surrogate, with `u_n`
/// from the predicted stationary tail. Chain replicate `i` uses stream `i`
/// and is run once to the largest `n`, reading off its running maximum at
/// every grid point; surrogate replicates use streams `reps + i`.
pub fn extremal_diag(model: &ChainModel, cfg: &ExtremalConfig) -> Result<Vec<ExtremalRow>> {
    let tail = predicted_stationary_tail(model)?;
    let mut grid = cfg.n_grid.clone();
    grid.sort_unstable();
    if grid.is_empty() || grid[0] == 0 || cfg.reps == 0 {
        return Err(Error::ParameterDomain("extremal diagnostics need n ≥ 1 and reps ≥ 1".into()));
    }
    if let Surrogate::Resample(pool) = &cfg.surrogate {
        if pool.is_empty() {
            return Err(Error::InsufficientData("empty resampling pool".into()));
        }
    }
    let levels: Vec<f64> = grid.iter().map(|&n| level_sequence(&tail, cfg.tau, n)).collect();
    let n_max = *grid.last().unwrap();

    let below = |maxima: &[f64]| -> Vec<bool> {
        maxima.iter().zip(&levels).map(|(m, u)| m <= u).collect()
    };
    let chain = replicate(cfg.reps, cfg.seed, 0, |rng| {
        let mut x = model.atom();
        for _ in 0..cfg.burn_in {
            x = step(x, model, DEFAULT_CAP, rng).value;
        }
        let mut maxima = Vec::with_capacity(grid.len());
        let mut running = 0u64;
        let mut gi = 0;
        for t in 1..=n_max {
            x = step(x, model, DEFAULT_CAP, rng).value;
            running = running.max(x);
            while gi < grid.len() && grid[gi] == t {
                maxima.push(running as f64);
                gi += 1;
            }
        }
        below(&maxima)
    });
    let draw = |rng: &mut RngStream| -> f64 {
        match &cfg.surrogate {
            Surrogate::PredictedPareto => {
                tail.constant.powf(1.0 / tail.index) * rng.uniform_open_closed().powf(-1.0 / tail.index)
            }
            Surrogate::Resample(pool) => {
                pool[(rng.uniform_open_closed() * pool.len() as f64).ceil() as usize - 1]
            }
        }
    };
    let surrogate = replicate(cfg.reps, cfg.seed, cfg.reps as u64, |rng| {
        let mut maxima = Vec::with_capacity(grid.len());
        let mut running = f64::NEG_INFINITY;
        let mut gi = 0;
        for t in 1..=n_max {
            running = running.max(draw(rng));
            while gi < grid.len() && grid[gi] == t {
                maxima.push(running);
                gi += 1;
            }
        }
        below(&maxima)
    });
    let frac = |flags: &[Vec<bool>], i: usize| {
        flags.iter().filter(|f| f[i]).count() as f64 / flags.len() as f64
    };
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, &n)| ExtremalRow {
            n,
            level: levels[i],
            chain: frac(&chain, i),
            surrogate: frac(&surrogate, i),
            reps: cfg.reps,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// partial sums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    /// Slope of `log quantile_q(S_n)` on `log n`, estimating `1/η`.
    pub growth: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(n, quantile)` pairs used.
    pub points: Vec<(u64, f64)>,
}

pub const MIN_SCALING_NS: usize = 4;
pub const MIN_SCALING_SAMPLES: usize = 1000;

pub fn quantile_scaling(samples_by_n: &[(u64, Vec<f64>)], q: f64) -> Result<ScalingFit> {
    if samples_by_n.len() < MIN_SCALING_NS {
        return Err(Error::InsufficientData(format!(
            "{} values of n, need {MIN_SCALING_NS}",
            samples_by_n.len()
        )));
    }
    if let Some((n, s)) = samples_by_n.iter().find(|(_, s)| s.len() < MIN_SCALING_SAMPLES) {
        return Err(Error::InsufficientData(format!(
            "n={n} has {} samples, need {MIN_SCALING_SAMPLES}",
            s.len()
        )));
    }
    let points: Vec<(u64, f64)> = samples_by_n
        .iter()
        .map(|(n, s)| {
            let mut v = s.clone();
            v.sort_by(f64::total_cmp);
            (*n, quantile_sorted(&v, q))
        })
        .collect();
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let fit = linear_fit(&xs, &ys);
    Ok(ScalingFit {
        growth: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StableTailCheck {
    pub estimate: TailEstimate,
    pub eta: f64,
    /// Power tail with index at most 2 (a stable law other than the normal).
    pub heavy: bool,
}

/// Hill index of `S_n` samples (default `k`) next to the stable index `η`.
pub fn stable_tail_check(samples: &[f64], eta: f64) -> Result<StableTailCheck> {
    stable_tail_check_k(samples, eta, default_k(samples.len()))
}

pub fn stable_tail_check_k(samples: &[f64], eta: f64, k: usize) -> Result<StableTailCheck> {
    let estimate = hill(samples, k)?;
    Ok(StableTailCheck {
        heavy: estimate.index <= 2.0,
        estimate,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{ImmigrationLaw, OffspringLaw};
    use proptest::prelude::*;

    fn pareto_grid(n: usize, gamma: f64) -> Vec<f64> {
        (1..=n).map(|i| (i as f64 / n as f64).powf(-1.0 / gamma)).collect()
    }

    #[test]
    fn hill_example() {
        let e = hill(&[8.0, 4.0, 2.0, 1.0], 3).unwrap();
        assert!((e.index - 1.0 / (2.0 * 2f64.ln())).abs() < 1e-12);
        assert!(matches!(hill(&[1.0, 2.0], 2), Err(Error::InsufficientData(_))));
        assert!(hill(&[0.0, 0.0, 1.0, 2.0], 2).is_err());
    }

    #[test]
    fn hill_on_pareto_quantiles_converges() {
        for gamma in [0.5, 2.0 / 3.0, 1.5] {
            let mut prev = f64::INFINITY;
            for n in [1_000, 10_000, 100_000] {
                let e = hill(&pareto_grid(n, gamma), n / 10).unwrap();
                let err = (e.index - gamma).abs();
                assert!(err <= 2.0 * gamma / (n / 10) as f64 * (n as f64).ln() + 1e-12);
                assert!(err <= prev);
                prev = err;
            }
        }
    }

    #[test]
    fn hill_plot_matches_pointwise() {
        let s = pareto_grid(5_000, 0.5);
        let ks = hill_grid(s.len());
        let plot = hill_plot(&s, &ks);
        assert_eq!(plot.len(), ks.len());
        for e in &plot {
            assert_eq!(e, &hill(&s, e.k_used).unwrap());
        }
    }

    #[test]
    fn loglog_is_exact_on_power_law() {
        let (gamma, c) = (0.5, 0.5641895835477563);
        let thresholds = log_grid(1e2, 1e4, 5);
        let rows: Vec<SurvivalRow> = thresholds
            .iter()
            .map(|&x| SurvivalRow {
                threshold: x,
                empirical: c * x.powf(-gamma),
                predicted: f64::NAN,
                ratio: f64::NAN,
                n_effective: 1,
                exceedances: 1000,
            })
            .collect();
        let e = loglog_fit_rows(&rows);
        assert!((e.index - gamma).abs() < 1e-12);
        assert!((e.constant / c - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglog_needs_enough_thresholds_and_exceedances() {
        let samples: Vec<CensoredSample> = (1..=10_000).map(CensoredSample::exact).collect();
        assert!(survival_loglog_fit(&samples, &[1.0, 2.0, 3.0]).is_err());
        match survival_loglog_fit(&samples, &[10.0, 100.0, 1000.0, 5000.0, 9950.0]) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("9950")),
            other => panic!("{other:?}"),
        }
        assert!(survival_loglog_fit(&samples, &[10.0, 100.0, 1000.0, 5000.0, 9000.0]).is_ok());
    }

    #[test]
    fn survival_table_drops_censored_values_at_or_above_their_bound() {
        let samples = [
            CensoredSample::exact(5),
            CensoredSample::exact(50),
            CensoredSample { value: 20, censored: true },
        ];
        let rows = survival_table(&samples, &[10.0, 20.0, 30.0], None);
        assert_eq!((rows[0].exceedances, rows[0].n_effective), (2, 3));
        assert_eq!((rows[1].exceedances, rows[1].n_effective), (1, 2));
        assert_eq!((rows[2].exceedances, rows[2].n_effective), (1, 2));
    }

    #[test]
    fn tail_process_on_constant_windows() {
        let mut v = vec![1.0; 1000];
        for x in v.iter_mut().skip(100).take(500) {
            *x = 50.0;
        }
        let s = tail_process_stat(&v, 10.0, 5).unwrap();
        assert!(s.lag_quantiles.iter().all(|q| q == &[1.0, 1.0, 1.0]));
        assert!(s.overlapping);
        assert!(tail_process_stat(&v, 100.0, 5).is_err());
    }

    #[test]
    fn sparse_record_matches_dense_trajectory() {
        use crate::genfun::ModelSpec;
        use crate::sim::{run_chain, run_chain_exceedances, ChainConfig};
        let model = ModelSpec {
            offspring: crate::dists::OffspringKind::PowerFractional { alpha: 0.5 },
            immigration: crate::dists::ImmigrationKind::Constant { b: 1 },
        }
        .build()
        .unwrap();
        let cfg = ChainConfig {
            n: 200_000,
            burn_in: 1_000,
            seed: 3,
            ..ChainConfig::default()
        };
        let dense = run_chain(&model, &cfg).unwrap();
        let values = dense.as_f64();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let record = run_chain_exceedances(&model, &cfg, 500, 10).unwrap();
        assert_eq!(record.stats, dense.stats);
        for q in [0.99, 0.999] {
            let u = record.quantile(q).unwrap();
            assert_eq!(u, quantile_sorted(&sorted, q));
            assert_eq!(
                tail_process_sparse(&record, u).unwrap(),
                tail_process_stat(&values, u, 10).unwrap()
            );
        }
        assert!(record.quantile(0.5).is_none());
        assert!(tail_process_sparse(&record, 100.0).is_err());
    }

    #[test]
    fn anticluster_on_iid_pareto_is_small() {
        let mut rng = RngStream::new(1, 0);
        let v: Vec<f64> = (0..1_000_000).map(|_| rng.uniform_open_closed().powf(-2.0)).collect();
        let u = quantile_sorted(&{
            let mut s = v.clone();
            s.sort_by(f64::total_cmp);
            s
        }, 0.999);
        let a = anticluster_stat(&v, 5, 100, u).unwrap();
        let expect = 1.0 - 0.999f64.powi(96);
        assert!((a.probability - expect).abs() < 0.05, "{a:?} vs {expect}");
        assert!(anticluster_stat(&vec![0.0; 1000], 5, 100, 1.0).is_err());
        assert!(anticluster_stat(&v, 5, 5, u).is_err());
    }

    #[test]
    fn extremal_surrogate_tends_to_exp_minus_tau() {
        let m = ChainModel::new(
            OffspringLaw::power_fractional(0.5).unwrap(),
            ImmigrationLaw::constant(1).unwrap(),
        );
        let cfg = ExtremalConfig {
            n_grid: vec![100, 1_000],
            tau: 1.0,
            reps: 4_000,
            burn_in: 100,
            seed: 3,
            surrogate: Surrogate::PredictedPareto,
        };
        let rows = extremal_diag(&m, &cfg).unwrap();
        for r in &rows {
            assert!((r.surrogate - (-1f64).exp()).abs() < 0.04, "{r:?}");
        }
        let small_tau = extremal_diag(&m, &ExtremalConfig { tau: 1e-6, ..cfg.clone() }).unwrap();
        assert!(small_tau.iter().all(|r| r.chain == 1.0 && r.surrogate == 1.0));
        let pool = vec![1.0, 2.0, 3.0];
        let res = extremal_diag(&m, &ExtremalConfig { surrogate: Surrogate::Resample(pool), reps: 10, ..cfg }).unwrap();
        assert!(res.iter().all(|r| r.surrogate == 1.0));
    }

    #[test]
    fn quantile_scaling_on_deterministic_square() {
        let data: Vec<(u64, Vec<f64>)> = (7..=10)
            .map(|j| {
                let n = 1u64 << j;
                (n, vec![(n * n) as f64; 1000])
            })
            .collect();
        let f = quantile_scaling(&data, 0.5).unwrap();
        assert!((f.growth - 2.0).abs() < 1e-12);
        assert!(quantile_scaling(&data[..3], 0.5).is_err());
    }

    #[test]
    fn stable_check_flags_gaussian_as_light() {
        use rand_distr::{Distribution, Normal};
        let mut rng = RngStream::new(4, 0);
        let normal = Normal::new(100.0, 1.0).unwrap();
        let s: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let c = stable_tail_check(&s, 0.5).unwrap();
        assert!(!c.heavy, "{c:?}");
        let p: Vec<f64> = (0..10_000).map(|_| rng.uniform_open_closed().powf(-1.0 / 0.6)).collect();
        let c = stable_tail_check(&p, 0.6).unwrap();
        assert!(c.heavy && (c.estimate.index - 0.6).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn estimators_are_scale_equivariant(
            raw in proptest::collection::vec(1.0f64..1e6, 300..600),
            lambda in 0.01f64..100.0,
        ) {
            let scaled: Vec<f64> = raw.iter().map(|x| x * lambda).collect();
            let k = 50;
            let a = hill(&raw, k).unwrap();
            let b = hill(&scaled, k).unwrap();
            prop_assert!((a.index - b.index).abs() <= 1e-9 * a.index);
            prop_assert!((b.constant / (a.constant * lambda.powf(a.index)) - 1.0).abs() < 1e-8);

            let rows = |s: &[f64], lam: f64| {
                let cs: Vec<CensoredSample> = s.iter().map(|&x| CensoredSample::exact(x.round() as u64)).collect();
                let th: Vec<f64> = [10.0, 20.0, 40.0, 80.0, 160.0].iter().map(|t| t * lam).collect();
                survival_table(&cs, &th, None)
            };
            // integer-valued inputs so rounding commutes with scaling
            let ints: Vec<f64> = raw.iter().map(|x| x.round()).collect();
            let lam = lambda.round().max(1.0);
            let ints_scaled: Vec<f64> = ints.iter().map(|x| x * lam).collect();
            let r1 = rows(&ints, 1.0);
            let r2 = rows(&ints_scaled, lam);
            if r1.iter().all(|r| r.exceedances > 0) {
                let e1 = loglog_fit_rows(&r1);
                let e2 = loglog_fit_rows(&r2);
                prop_assert!((e1.index - e2.index).abs() <= 1e-9);
                prop_assert!((e2.constant / (e1.constant * lam.powf(e1.index)) - 1.0).abs() < 1e-8);
            }
        }

        #[test]
        fn estimators_are_order_independent(mut raw in proptest::collection::vec(1.0f64..1e6, 100..200)) {
            let a = hill(&raw, 20).unwrap();
            raw.reverse();
            let b = hill(&raw, 20).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
