//! Monte Carlo engines: the chain itself, total progeny of a critical tree,
//! immigrant clans and partial sums.
//!
//! Populations are `u64` and saturate at a configurable cap. Anything that
//! would exceed the cap is returned at the cap with a `censored` flag, so a
//! censored value is a lower bound on the truth.
//!
//! Replicates run in parallel, one [`RngStream`] per replicate addressed by
//! `(seed, stream_id)`, and are collected in stream order. Output is therefore
//! identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dists::DiscreteLaw;
use crate::error::{Error, Result};
use crate::est::{survival_table, SurvivalRow};
use crate::genfun::{ChainModel, TailLaw};
use crate::rng::RngStream;

pub const DEFAULT_CAP: u64 = 1 << 62;
pub const DEFAULT_BURN_IN: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensoredSample {
    pub value: u64,
    /// `value` is only a lower bound.
    pub censored: bool,
}

impl CensoredSample {
    pub fn exact(value: u64) -> Self {
        Self {
            value,
            censored: false,
        }
    }

    fn capped(value: u64, cap: u64) -> Self {
        if value > cap {
            Self {
                value: cap,
                censored: true,
            }
        } else {
            Self::exact(value)
        }
    }
}

/// Run `f` on `reps` independent streams `(seed, first_stream + i)`.
pub fn replicate<T: Send>(
    reps: usize,
    seed: u64,
    first_stream: u64,
    f: impl Fn(&mut RngStream) -> T + Sync,
) -> Vec<T> {
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut RngStream::new(seed, first_stream + i as u64)))
        .collect()
}

// ---------------------------------------------------------------------------
// chain
// ---------------------------------------------------------------------------

/// One transition `X' = Σ_{i ≤ x} A_i + B`.
pub fn step_laws(
    x: u64,
    offspring: &impl DiscreteLaw,
    immigration: &impl DiscreteLaw,
    cap: u64,
    rng: &mut RngStream,
) -> CensoredSample {
    let children = offspring.sum_iid(x, rng);
    let next = children.saturating_add(immigration.sample(rng));
    CensoredSample::capped(next, cap)
}

pub fn step(x: u64, model: &ChainModel, cap: u64, rng: &mut RngStream) -> CensoredSample {
    step_laws(x, model.offspring(), model.immigration(), cap, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Number of recorded values.
    pub n: u64,
    pub burn_in: u64,
    pub stride: u64,
    pub cap: u64,
    pub seed: u64,
    pub stream_id: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n: 1,
            burn_in: DEFAULT_BURN_IN,
            stride: 1,
            cap: DEFAULT_CAP,
            seed: 0,
            stream_id: 0,
        }
    }
}

/// Running summaries of the recorded values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StreamStats {
    pub count: u64,
    pub sum: u128,
    pub max: u64,
    /// Transitions (recorded or not) that hit the cap.
    pub censored_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub values: Vec<u64>,
    pub burn_in: u64,
    pub stride: u64,
    pub censored: bool,
    pub stats: StreamStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `S_1, …, S_n`.
    pub fn prefix_sums(&self) -> Vec<u128> {
        self.values
            .iter()
            .scan(0u128, |s, &v| {
                *s += v as u128;
                Some(*s)
            })
            .collect()
    }

    /// `M_1, …, M_n`.
    pub fn prefix_maxima(&self) -> Vec<u64> {
        self.values
            .iter()
            .scan(0u64, |m, &v| {
                *m = (*m).max(v);
                Some(*m)
            })
            .collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }
}

/// Runs the chain and hands each recorded value to `visit` in order.
fn drive_chain(
    offspring: &impl DiscreteLaw,
    immigration: &impl DiscreteLaw,
    start: u64,
    cfg: &ChainConfig,
    mut visit: impl FnMut(u64),
) -> Result<StreamStats> {
    if cfg.n == 0 || cfg.stride == 0 {
        return Err(Error::ParameterDomain(format!(
            "chain needs n ≥ 1 and stride ≥ 1, got n={}, stride={}",
            cfg.n, cfg.stride
        )));
    }
    let mut rng = RngStream::new(cfg.seed, cfg.stream_id);
    let mut stats = StreamStats::default();
    let mut x = start;
    let advance = |x: u64, stats: &mut StreamStats, rng: &mut RngStream| {
        let next = step_laws(x, offspring, immigration, cfg.cap, rng);
        if next.censored {
            stats.censored_steps += 1;
        }
        next.value
    };
    for _ in 0..cfg.burn_in {
        x = advance(x, &mut stats, &mut rng);
    }
    for _ in 0..cfg.n {
        for _ in 0..cfg.stride {
            x = advance(x, &mut stats, &mut rng);
        }
        visit(x);
        stats.count += 1;
        stats.sum += x as u128;
        stats.max = stats.max.max(x);
    }
    Ok(stats)
}

pub fn run_chain_laws(
    offspring: &impl DiscreteLaw,
    immigration: &impl DiscreteLaw,
    start: u64,
    cfg: &ChainConfig,
) -> Result<Trajectory> {
    let mut values = Vec::with_capacity(cfg.n.min(1 << 32) as usize);
    let stats = drive_chain(offspring, immigration, start, cfg, |x| values.push(x))?;
    Ok(Trajectory {
        values,
        burn_in: cfg.burn_in,
        stride: cfg.stride,
        censored: stats.censored_steps > 0,
        stats,
    })
}

/// Sparse record of a long chain: every value above `floor` together with
/// the `horizon` values that follow it, as `(index, value)` in time order.
///
/// This keeps tail statistics of chains far too long to store.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceRecord {
    pub n: u64,
    pub floor: u64,
    pub horizon: usize,
    /// Number of recorded values strictly above `floor`.
    pub above_floor: u64,
    pub entries: Vec<(u64, u64)>,
    pub censored: bool,
    pub stats: StreamStats,
}

impl ExceedanceRecord {
    /// Empirical quantile of the full trajectory, matching
    /// [`crate::stats::quantile_sorted`] on the dense values. `None` when it
    /// falls at or below the floor.
    pub fn quantile(&self, q: f64) -> Option<f64> {
        let pos = (q.clamp(0.0, 1.0) * (self.n - 1) as f64).round() as u64;
        let below = self.n - self.above_floor;
        if pos < below {
            return None;
        }
        let mut above: Vec<u64> = self
            .entries
            .iter()
            .filter(|e| e.1 > self.floor)
            .map(|e| e.1)
            .collect();
        above.sort_unstable();
        Some(above[(pos - below) as usize] as f64)
    }
}

pub fn run_chain_exceedances(
    model: &ChainModel,
    cfg: &ChainConfig,
    floor: u64,
    horizon: usize,
) -> Result<ExceedanceRecord> {
    let mut entries = Vec::new();
    let mut above_floor = 0u64;
    let mut t = 0u64;
    let mut pending = 0usize;
    let stats = drive_chain(model.offspring(), model.immigration(), model.atom(), cfg, |x| {
        if x > floor {
            above_floor += 1;
            entries.push((t, x));
            pending = horizon;
        } else if pending > 0 {
            entries.push((t, x));
            pending -= 1;
        }
        t += 1;
    })?;
    Ok(ExceedanceRecord {
        n: cfg.n,
        floor,
        horizon,
        above_floor,
        entries,
        censored: stats.censored_steps > 0,
        stats,
    })
}

/// Chain started at the accessible atom `k₀`.
pub fn run_chain(model: &ChainModel, cfg: &ChainConfig) -> Result<Trajectory> {
    run_chain_laws(model.offspring(), model.immigration(), model.atom(), cfg)
}

// ---------------------------------------------------------------------------
// progeny and clans
// ---------------------------------------------------------------------------

/// Total progeny of a forest with `roots` ancestors.
///
/// This is the Łukasiewicz walk `W_{t+1} = W_t + A_t − 1` explored in
/// breadth-first order and advanced a whole generation at a time: the `W`
/// individuals currently in the queue are consumed together and replaced by
/// `Σ_{i ≤ W} A_i` children, drawn by [`DiscreteLaw::sum_iid`]. The hitting
/// time of zero is unchanged. If the explored count plus the queue exceeds
/// `cap`, the walk is still alive after `cap` steps and the result is censored.
pub fn forest_progeny(
    offspring: &impl DiscreteLaw,
    roots: u64,
    cap: u64,
    rng: &mut RngStream,
) -> CensoredSample {
    let mut explored = 0u64;
    let mut queue = roots;
    while queue > 0 {
        if queue > cap - explored.min(cap) {
            return CensoredSample {
                value: cap,
                censored: true,
            };
        }
        explored += queue;
        queue = offspring.sum_iid(queue, rng);
    }
    CensoredSample::exact(explored)
}

/// `T = Z_0 + Z_1 + …` from a single ancestor.
pub fn sample_total_progeny(
    offspring: &impl DiscreteLaw,
    cap: u64,
    rng: &mut RngStream,
) -> CensoredSample {
    forest_progeny(offspring, 1, cap, rng)
}

/// `U = Σ_{j ≤ B} T_j`: everything descended from one batch of immigrants.
pub fn sample_clan_laws(
    offspring: &impl DiscreteLaw,
    immigration: &impl DiscreteLaw,
    cap: u64,
    rng: &mut RngStream,
) -> CensoredSample {
    let b = immigration.sample(rng);
    forest_progeny(offspring, b, cap, rng)
}

pub fn sample_clan(model: &ChainModel, cap: u64, rng: &mut RngStream) -> CensoredSample {
    sample_clan_laws(model.offspring(), model.immigration(), cap, rng)
}

pub fn progeny_samples(
    offspring: &impl DiscreteLaw,
    reps: usize,
    cap: u64,
    seed: u64,
) -> Vec<CensoredSample> {
    replicate(reps, seed, 0, |rng| sample_total_progeny(offspring, cap, rng))
}

pub fn clan_samples(model: &ChainModel, reps: usize, cap: u64, seed: u64) -> Vec<CensoredSample> {
    replicate(reps, seed, 0, |rng| sample_clan(model, cap, rng))
}

// ---------------------------------------------------------------------------
// partial sums
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    /// `S_n = X_1 + … + X_n` along a chain after burn-in.
    Chain,
    /// `Σ_{j ≤ n} U_j` for iid clans.
    ClanSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SumConfig {
    pub n: u64,
    pub reps: usize,
    pub seed: u64,
    pub cap: u64,
    /// Chain mode only.
    pub burn_in: u64,
}

impl Default for SumConfig {
    fn default() -> Self {
        Self {
            n: 1,
            reps: 1,
            seed: 0,
            cap: DEFAULT_CAP,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// `reps` independent samples of `S_n`, replicate `i` on stream `i`.
///
/// In clan-sum mode the `n` clans are a forest whose root count is
/// `B_1 + … + B_n`, so one walk from that many roots has the law of
/// `Σ_{j ≤ n} U_j`.
pub fn sample_partial_sum(model: &ChainModel, mode: SumMode, cfg: &SumConfig) -> Vec<CensoredSample> {
    replicate(cfg.reps, cfg.seed, 0, |rng| match mode {
        SumMode::ClanSum => {
            let roots = model.immigration().sum_iid(cfg.n, rng);
            forest_progeny(model.offspring(), roots, cfg.cap, rng)
        }
        SumMode::Chain => {
            let mut x = model.atom();
            let mut censored = false;
            for _ in 0..cfg.burn_in {
                let s = step(x, model, cfg.cap, rng);
                censored |= s.censored;
                x = s.value;
            }
            let mut total = 0u64;
            for _ in 0..cfg.n {
                let s = step(x, model, cfg.cap, rng);
                censored |= s.censored;
                x = s.value;
                total = total.saturating_add(x);
            }
            let mut out = CensoredSample::capped(total, cfg.cap);
            out.censored |= censored;
            out
        }
    })
}

// ---------------------------------------------------------------------------
// random sums
// ---------------------------------------------------------------------------

/// Integer Pareto law `Y = ⌈V^{−1/ν}⌉`, `V` uniform on `(0, 1]`, for which
/// `P(Y > k) = k^{−ν}` exactly at every integer `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegerPareto {
    nu: f64,
}

impl IntegerPareto {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "Pareto index must be positive, got {nu}"
            )));
        }
        Ok(Self { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// `P(Y > x) = x^{−ν}` as a [`TailLaw`].
    pub fn tail(&self) -> TailLaw {
        TailLaw {
            index: self.nu,
            constant: 1.0,
        }
    }
}

impl DiscreteLaw for IntegerPareto {
    fn pmf(&self, k: u64) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.survival(k - 1) - self.survival(k)
        }
    }

    fn survival(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            (k as f64).powf(-self.nu)
        }
    }

    /// By direct summation of `Σ P(Y > k) s^k`; slow for `s` near 1.
    fn pgf(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return 1.0;
        }
        let mut acc = 1.0;
        let mut sk = 1.0;
        for k in 1..10_000_000u64 {
            sk *= s;
            let term = sk * self.survival(k);
            acc += term;
            if term < 1e-17 * acc {
                break;
            }
        }
        1.0 - (1.0 - s) * acc
    }

    fn mean(&self) -> f64 {
        if self.nu <= 1.0 {
            f64::INFINITY
        } else {
            1.0 + (2..200_000u64).map(|k| (k as f64 - 1.0).powf(-self.nu)).sum::<f64>()
        }
    }

    fn sample(&self, rng: &mut RngStream) -> u64 {
        let v = rng.uniform_open_closed().powf(-1.0 / self.nu).ceil();
        if v >= crate::dists::MAX_SAMPLE as f64 {
            crate::dists::MAX_SAMPLE
        } else {
            v as u64
        }
    }
}

/// `Σ_{i ≤ count} Y_i`, stopped as soon as the running total exceeds `limit`
/// (the result is then censored with `value > limit`).
pub fn capped_iid_sum(
    law: &impl DiscreteLaw,
    count: u64,
    limit: u64,
    rng: &mut RngStream,
) -> CensoredSample {
    let mut total = 0u64;
    for _ in 0..count {
        total = total.saturating_add(law.sample(rng));
        if total > limit {
            return CensoredSample {
                value: total,
                censored: true,
            };
        }
    }
    CensoredSample::exact(total)
}

/// Monte Carlo survival of `Σ_{i ≤ τ} Y_i` against a predicted tail.
///
/// Each replicate stops summing once the total passes the largest threshold,
/// so the cost per replicate is bounded even when `E τ = ∞`.
pub fn verify_random_sum_tail(
    tau: &impl DiscreteLaw,
    y: &impl DiscreteLaw,
    reps: usize,
    thresholds: &[f64],
    predicted: Option<&TailLaw>,
    seed: u64,
) -> Vec<SurvivalRow> {
    let limit = thresholds.iter().cloned().fold(0.0, f64::max).ceil() as u64;
    let samples = replicate(reps, seed, 0, |rng| {
        let count = tau.sample(rng);
        let mut s = capped_iid_sum(y, count, limit, rng);
        // a censored total is above every threshold; pin it above the grid
        if s.censored {
            s.value = s.value.max(limit + 1);
        }
        s
    });
    survival_table(&samples, thresholds, predicted)
}
