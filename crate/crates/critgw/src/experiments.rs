//! Named experiments: each binds a model, a simulator and an estimator and
//! turns the comparison with the predicted value into report rows.

use std::time::Instant;

use critgw_core::dists::{DiscreteLaw, ImmigrationLaw};
use critgw_core::est::{
    anticluster_stat, default_k, extremal_diag, hill, hill_grid, hill_plot, log_grid,
    loglog_fit_checked, quantile_scaling, stable_tail_check, survival_loglog_fit, survival_table,
    tail_process_sparse, ExtremalConfig, Surrogate,
};
use critgw_core::genfun::{
    fw_check as classify, predicted_progeny_tail, predicted_stationary_tail, random_sum_tail_heavy,
    stationary_pmf, ChainModel, Integrability, TailLaw, FW_MARGIN,
};
use critgw_core::sim::{
    progeny_samples, run_chain, run_chain_exceedances, sample_partial_sum, verify_random_sum_tail, CensoredSample,
    ChainConfig, IntegerPareto, SumConfig, SumMode, Trajectory, DEFAULT_BURN_IN, DEFAULT_CAP,
};
use critgw_core::special::gamma;
use critgw_core::stats::{chi_square_batch_means, chi_square_gof, quantile_sorted};
use critgw_core::{Error as CoreError, RngStream};
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind, Sizes, SurrogateMode};
use crate::report::{MetricRow, Report, Status};
use crate::HarnessError;

pub const REF_PRODUCT: &str = "stationary pgf as the product of g(f_n(s)) over n >= 0";
pub const REF_TAIL_FINITE: &str = "stationary tail, finite-mean immigration: g'(1)/((1-a)Gamma(a) l_A) x^-(1-a)";
pub const REF_TAIL_SIBUYA: &str = "stationary tail, Sibuya immigration: l_B/(l_A (b-a) Gamma(1-b+a)) x^-(b-a)";
pub const REF_PROGENY: &str = "total progeny tail of a critical tree: index 1/(1+a)";
pub const REF_TAIL_PROCESS: &str = "tail process of the chain is U_0 (1,1,1,...), P(U_0 > x) = x^-gamma";
pub const REF_ANTICLUSTER: &str = "anti-clustering condition fails for the chain";
pub const REF_SUMS: &str = "partial sums S_n / n^(1/eta) converge to a positive stable law, eta = b/(1+a)";
pub const REF_EXTREMAL: &str = "extremal index of the chain is 0: P(M_n <= u_n(tau)) -> 1";
pub const REF_IID: &str = "iid sequence with the same tail: P(M_n <= u_n(tau)) -> exp(-tau)";
pub const REF_FW: &str = "stationary law exists iff the integral of (1-g)/(f-s) near 1 is finite";
pub const REF_RANDSUM_FINITE: &str = "random sum with finite-mean count: E tau P(Y > x)";
pub const REF_RANDSUM_HEAVY: &str = "random sum with regularly varying count: index mu*nu";

/// One CSV file produced by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub bytes: Vec<u8>,
}

pub fn csv_artifact<T: Serialize>(file: &str, rows: &[T]) -> Result<Artifact, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(Artifact {
        file: file.to_string(),
        bytes,
    })
}

/// Desk-scale defaults per experiment.
pub fn default_sizes(kind: ExperimentKind) -> Sizes {
    let mut s = Sizes {
        burn_in: Some(DEFAULT_BURN_IN),
        stride: Some(1),
        cap: Some(DEFAULT_CAP),
        ..Sizes::default()
    };
    match kind {
        ExperimentKind::StationaryOracle => {
            s.n = Some(1_000_000);
            s.k_max = Some(4);
        }
        ExperimentKind::StationaryTail => {
            s.n = Some(10_000_000);
            s.thresholds = Some(log_grid(1e2, 1e4, 5));
        }
        ExperimentKind::ProgenyTail => {
            s.reps = Some(1_000_000);
            s.cap = Some(100_000_000);
            s.thresholds = Some(log_grid(1e2, 1e5, 7));
        }
        ExperimentKind::TailProcess => {
            // independent excursions above the 99.99% level are rare: about
            // one per 1e7 steps for the alpha = 1/2 chain
            s.n = Some(1_000_000_000);
            s.levels = Some(vec![0.999, 0.9999]);
            s.horizon = Some(10);
        }
        ExperimentKind::Anticluster => {
            s.n = Some(10_000_000);
            s.levels = Some(vec![0.999]);
            s.m = Some(5);
            s.r_n = Some(100);
        }
        ExperimentKind::SumClt => {
            s.n_grid = Some((7..=13).map(|j| 1u64 << j).collect());
            s.reps = Some(1_000);
            s.q = Some(0.5);
            s.stable_n = Some(1_024);
            s.stable_reps = Some(100_000);
        }
        ExperimentKind::Extremal => {
            s.n_grid = Some(vec![1_000, 10_000, 100_000]);
            s.reps = Some(1_000);
            s.tau = Some(1.0);
            s.n = Some(10_000_000);
        }
        ExperimentKind::FwCheck => {}
        ExperimentKind::Randsum => {
            s.reps = Some(1_000_000);
        }
    }
    s
}

/// Config with every unset size replaced by its default.
pub fn resolve(cfg: &ExperimentConfig) -> ExperimentConfig {
    let d = default_sizes(cfg.experiment);
    let s = &cfg.sizes;
    let mut out = cfg.clone();
    out.sizes = Sizes {
        n: s.n.or(d.n),
        reps: s.reps.or(d.reps),
        burn_in: s.burn_in.or(d.burn_in),
        stride: s.stride.or(d.stride),
        cap: s.cap.or(d.cap),
        thresholds: s.thresholds.clone().or(d.thresholds),
        k_grid: s.k_grid.clone().or(d.k_grid),
        k_max: s.k_max.or(d.k_max),
        n_grid: s.n_grid.clone().or(d.n_grid),
        levels: s.levels.clone().or(d.levels),
        horizon: s.horizon.or(d.horizon),
        m: s.m.or(d.m),
        r_n: s.r_n.or(d.r_n),
        tau: s.tau.or(d.tau),
        q: s.q.or(d.q),
        stable_n: s.stable_n.or(d.stable_n),
        stable_reps: s.stable_reps.or(d.stable_reps),
    };
    out
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    report: &'a mut Report,
    artifacts: &'a mut Vec<Artifact>,
}

impl Ctx<'_> {
    fn sizes(&self) -> &Sizes {
        &self.cfg.sizes
    }

    fn model(&self) -> Result<ChainModel, CoreError> {
        self.cfg
            .model
            .as_ref()
            .expect("validated config has a model")
            .build()
    }

    fn chain(&self, model: &ChainModel, n: u64, stream_id: u64) -> Result<Trajectory, CoreError> {
        let s = self.sizes();
        run_chain(
            model,
            &ChainConfig {
                n,
                burn_in: s.burn_in.unwrap(),
                stride: s.stride.unwrap(),
                cap: s.cap.unwrap(),
                seed: self.cfg.seed,
                stream_id,
            },
        )
    }

    fn push(&mut self, row: MetricRow) {
        self.report.push(row);
    }

    fn artifact<T: Serialize>(&mut self, file: &str, rows: &[T]) -> Result<(), HarnessError> {
        let a = csv_artifact(file, rows)?;
        self.report.artifacts.push(file.to_string());
        self.artifacts.push(a);
        Ok(())
    }
}

enum Failure {
    Core(CoreError),
    Harness(HarnessError),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Harness(e)
    }
}

/// Run one experiment. Data insufficiency yields a partial report with
/// status [`Status::InsufficientData`]; configuration problems are errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(Report, Vec<Artifact>), HarnessError> {
    cfg.validate()?;
    let cfg = resolve(cfg);
    let start = Instant::now();
    let mut report = Report::new(&cfg);
    let mut artifacts = Vec::new();
    let mut ctx = Ctx {
        cfg: &cfg,
        report: &mut report,
        artifacts: &mut artifacts,
    };
    let outcome = match cfg.experiment {
        ExperimentKind::StationaryOracle => stationary_oracle(&mut ctx),
        ExperimentKind::StationaryTail => stationary_tail(&mut ctx),
        ExperimentKind::ProgenyTail => progeny_tail(&mut ctx),
        ExperimentKind::TailProcess => tail_process(&mut ctx),
        ExperimentKind::Anticluster => anticluster(&mut ctx),
        ExperimentKind::SumClt => sum_clt(&mut ctx),
        ExperimentKind::Extremal => extremal(&mut ctx),
        ExperimentKind::FwCheck => fw_check(&mut ctx),
        ExperimentKind::Randsum => randsum(&mut ctx),
    };
    match outcome {
        Ok(()) => {}
        Err(Failure::Harness(e)) => return Err(e),
        Err(Failure::Core(e)) => match e {
            CoreError::InsufficientData(msg) => {
                report.status = Status::InsufficientData;
                report.message = Some(msg);
            }
            CoreError::ParameterDomain(_)
            | CoreError::UnsupportedRegime(_)
            | CoreError::NotHeavyTailed(_) => return Err(HarnessError::Config(e.to_string())),
            CoreError::BudgetExceeded { .. } | CoreError::Accuracy { .. } => {
                report.status = Status::Fail;
                report.message = Some(e.to_string());
            }
        },
    }
    report.finish();
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok((report, artifacts))
}

fn chain_samples(tr: &Trajectory, cap: u64) -> Vec<CensoredSample> {
    tr.values
        .iter()
        .map(|&v| CensoredSample {
            value: v,
            censored: tr.censored && v >= cap,
        })
        .collect()
}

#[derive(Serialize)]
struct PmfRow {
    k: usize,
    count: u64,
    empirical: f64,
    predicted: f64,
}

/// Blocks for the dependence-aware χ² in the pmf oracle.
pub const ORACLE_BATCHES: usize = 100;

fn stationary_oracle(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let s = ctx.sizes().clone();
    let k_max = s.k_max.unwrap();
    let coeffs = stationary_pmf(&model, k_max, 0.5, 1e-10)?;
    let n = s.n.unwrap();
    let tr = ctx.chain(&model, n, 0)?;
    let mut counts = vec![0u64; k_max];
    for &v in &tr.values {
        if (1..=k_max as u64).contains(&v) {
            counts[v as usize - 1] += 1;
        }
    }
    let probs = &coeffs.values[1..];
    let categories: Vec<u64> = (1..=k_max as u64).collect();
    let naive = chi_square_gof(&counts, probs, n);
    let chi = chi_square_batch_means(&tr.values, &categories, probs, ORACLE_BATCHES);
    let mut rows = Vec::new();
    for k in 1..=k_max {
        let emp = counts[k - 1] as f64 / n as f64;
        ctx.push(MetricRow::info(&format!("pmf[{k}]"), Some(probs[k - 1]), emp, REF_PRODUCT));
        rows.push(PmfRow {
            k,
            count: counts[k - 1],
            empirical: emp,
            predicted: probs[k - 1],
        });
    }
    ctx.push(MetricRow::info("coefficient error bound", None, coeffs.error_bound, REF_PRODUCT));
    ctx.push(MetricRow::info("iid chi-square p-value (ignores dependence)", None, naive.p_value, REF_PRODUCT));
    ctx.push(MetricRow::info("batch-means chi-square statistic", None, chi.statistic, REF_PRODUCT));
    let level = ctx.cfg.tolerances.level.unwrap_or(1e-3);
    ctx.push(MetricRow::new(
        "chi-square p-value",
        None,
        chi.p_value,
        Some(level),
        None,
        REF_PRODUCT,
    ));
    ctx.artifact("pmf.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct HillRow {
    k: usize,
    index: f64,
    constant: f64,
}

fn stationary_tail(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let tail = predicted_stationary_tail(&model)?;
    let reference = if model.immigration().is_finite_mean() {
        REF_TAIL_FINITE
    } else {
        REF_TAIL_SIBUYA
    };
    let s = ctx.sizes().clone();
    let tr = ctx.chain(&model, s.n.unwrap(), 0)?;
    let samples = chain_samples(&tr, s.cap.unwrap());
    let thresholds = s.thresholds.unwrap();
    let table = survival_table(&samples, &thresholds, Some(&tail));
    ctx.artifact("survival.csv", &table)?;
    let values = tr.as_f64();
    let ks = s.k_grid.unwrap_or_else(|| hill_grid(values.len()));
    let plot: Vec<HillRow> = hill_plot(&values, &ks)
        .into_iter()
        .map(|e| HillRow {
            k: e.k_used,
            index: e.index,
            constant: e.constant,
        })
        .collect();
    ctx.artifact("hill.csv", &plot)?;
    ctx.push(MetricRow::info("censored steps", Some(0.0), tr.stats.censored_steps as f64, reference));
    let h = hill(&values, default_k(values.len()))?;
    ctx.push(MetricRow::info("hill index (k = n^0.6)", Some(tail.index), h.index, reference));
    let fit = survival_loglog_fit(&samples, &thresholds)?;
    let t = &ctx.cfg.tolerances;
    let (ti, tc) = (t.index.unwrap_or(0.05), t.constant.unwrap_or(0.2));
    ctx.push(MetricRow::absolute("tail index", tail.index, fit.index, ti, reference));
    ctx.push(MetricRow::relative("tail constant", tail.constant, fit.constant, tc, reference));
    Ok(())
}

fn progeny_tail(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let tail = predicted_progeny_tail(model.offspring());
    let s = ctx.sizes().clone();
    let samples = progeny_samples(model.offspring(), s.reps.unwrap(), s.cap.unwrap(), ctx.cfg.seed);
    let censored = samples.iter().filter(|c| c.censored).count();
    ctx.push(MetricRow::info("censored samples", None, censored as f64, REF_PROGENY));
    let mut grid = s.thresholds.unwrap();
    for x in [1e2, 1e3, 1e4] {
        if !grid.contains(&x) {
            grid.push(x);
        }
    }
    grid.sort_by(f64::total_cmp);
    let table = survival_table(&samples, &grid, Some(&tail));
    ctx.artifact("survival.csv", &table)?;
    for r in table.iter().filter(|r| [1e2, 1e3, 1e4].contains(&r.threshold)) {
        ctx.push(MetricRow::info(
            &format!("survival ratio at {}", r.threshold),
            Some(1.0),
            r.ratio,
            REF_PROGENY,
        ));
    }
    let fit = survival_loglog_fit(&samples, ctx.sizes().thresholds.as_ref().unwrap())?;
    let t = &ctx.cfg.tolerances;
    let (ti, tc) = (t.index.unwrap_or(0.05), t.constant.unwrap_or(0.15));
    ctx.push(MetricRow::absolute("tail index", tail.index, fit.index, ti, REF_PROGENY));
    ctx.push(MetricRow::relative("tail constant", tail.constant, fit.constant, tc, REF_PROGENY));
    Ok(())
}

#[derive(Serialize)]
struct LagRow {
    level: f64,
    threshold: f64,
    lag: usize,
    q05: f64,
    q50: f64,
    q95: f64,
}

fn tail_process(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let gamma_idx = model.stationary_index()?;
    let s = ctx.sizes().clone();
    let levels = s.levels.clone().unwrap();
    let horizon = s.horizon.unwrap();
    // keep values a decade of probability below the lowest level
    let lowest = levels.iter().cloned().fold(1.0, f64::min);
    let floor = predicted_stationary_tail(&model)?.level(10.0 * (1.0 - lowest)).floor() as u64;
    let record = run_chain_exceedances(
        &model,
        &ChainConfig {
            n: s.n.unwrap(),
            burn_in: s.burn_in.unwrap(),
            stride: s.stride.unwrap(),
            cap: s.cap.unwrap(),
            seed: ctx.cfg.seed,
            stream_id: 0,
        },
        floor,
        horizon,
    )?;
    ctx.push(MetricRow::info(
        "censored steps",
        Some(0.0),
        record.stats.censored_steps as f64,
        REF_TAIL_PROCESS,
    ));
    let t = &ctx.cfg.tolerances;
    let (tol_med, tol_idx) = (t.median.unwrap_or(0.05), t.index.unwrap_or(0.1));
    let mut lag_rows = Vec::new();
    let mut deviations = Vec::new();
    for &level in &levels {
        let threshold = record.quantile(level).ok_or_else(|| {
            CoreError::InsufficientData(format!("quantile {level} lies below the record floor {floor}"))
        })?;
        let summary = tail_process_sparse(&record, threshold)?;
        for (j, q) in summary.lag_quantiles.iter().enumerate() {
            lag_rows.push(LagRow {
                level,
                threshold,
                lag: j + 1,
                q05: q[0],
                q50: q[1],
                q95: q[2],
            });
        }
        let dev = summary.max_median_deviation();
        deviations.push(dev);
        ctx.push(MetricRow::info(
            &format!("exceedances at {level}"),
            None,
            summary.exceedances as f64,
            REF_TAIL_PROCESS,
        ));
        ctx.push(MetricRow::new(
            &format!("max |median X_j/X_0 - 1| at {level}"),
            Some(0.0),
            dev,
            None,
            Some(tol_med),
            REF_TAIL_PROCESS,
        ));
        ctx.push(MetricRow::absolute(
            &format!("exceedance ratio index at {level}"),
            gamma_idx,
            summary.u0_index,
            tol_idx,
            REF_TAIL_PROCESS,
        ));
    }
    if deviations.len() >= 2 {
        ctx.push(MetricRow::info(
            "median deviation change (last - first level)",
            None,
            deviations.last().unwrap() - deviations[0],
            REF_TAIL_PROCESS,
        ));
    }
    ctx.artifact("tail_process.csv", &lag_rows)?;
    Ok(())
}

/// iid resample with replacement of `values`, on its own stream.
fn resample(values: &[f64], len: usize, rng: &mut RngStream) -> Vec<f64> {
    (0..len)
        .map(|_| values[(rng.uniform_open_closed() * values.len() as f64).ceil() as usize - 1])
        .collect()
}

#[derive(Serialize)]
struct AnticlusterRow {
    level: f64,
    threshold: f64,
    chain: f64,
    surrogate: f64,
    iid_prediction: f64,
    exceedances: usize,
}

fn anticluster(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let s = ctx.sizes().clone();
    let tr = ctx.chain(&model, s.n.unwrap(), 0)?;
    let values = tr.as_f64();
    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    let surrogate = resample(&values, values.len(), &mut RngStream::new(ctx.cfg.seed, 1));
    let (m, r_n) = (s.m.unwrap(), s.r_n.unwrap());
    let t = &ctx.cfg.tolerances;
    let (chain_min, sur_max) = (t.chain_min.unwrap_or(0.9), t.surrogate_max.unwrap_or(0.2));
    let mut rows = Vec::new();
    for &level in s.levels.as_ref().unwrap() {
        let u = quantile_sorted(&sorted, level);
        let c = anticluster_stat(&values, m, r_n, u)?;
        let i = anticluster_stat(&surrogate, m, r_n, u)?;
        let p_exceed = values.iter().filter(|&&v| v > u).count() as f64 / values.len() as f64;
        let iid_pred = 1.0 - (1.0 - p_exceed).powi((r_n - m + 1) as i32);
        ctx.push(MetricRow::new(
            &format!("chain return probability at {level}"),
            Some(1.0),
            c.probability,
            Some(chain_min),
            None,
            REF_ANTICLUSTER,
        ));
        ctx.push(MetricRow::new(
            &format!("iid resample return probability at {level}"),
            Some(iid_pred),
            i.probability,
            None,
            Some(sur_max),
            REF_ANTICLUSTER,
        ));
        rows.push(AnticlusterRow {
            level,
            threshold: u,
            chain: c.probability,
            surrogate: i.probability,
            iid_prediction: iid_pred,
            exceedances: c.exceedances,
        });
    }
    ctx.artifact("anticluster.csv", &rows)?;
    Ok(())
}

#[derive(Serialize)]
struct QuantileRow {
    n: u64,
    quantile: f64,
    censored: usize,
}

fn sum_clt(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let eta = model.eta();
    let s = ctx.sizes().clone();
    let reps = s.reps.unwrap();
    let cap = s.cap.unwrap();
    let mut data = Vec::new();
    let mut censored = Vec::new();
    for &n in s.n_grid.as_ref().unwrap() {
        let samples = sample_partial_sum(
            &model,
            SumMode::ClanSum,
            &SumConfig {
                n,
                reps,
                seed: ctx.cfg.seed,
                cap,
                burn_in: 0,
            },
        );
        censored.push(samples.iter().filter(|c| c.censored).count());
        data.push((n, samples.iter().map(|c| c.value as f64).collect::<Vec<_>>()));
    }
    let fit = quantile_scaling(&data, s.q.unwrap())?;
    let rows: Vec<QuantileRow> = fit
        .points
        .iter()
        .zip(&censored)
        .map(|(&(n, q), &c)| QuantileRow {
            n,
            quantile: q,
            censored: c,
        })
        .collect();
    ctx.artifact("quantiles.csv", &rows)?;
    let t = &ctx.cfg.tolerances;
    let (tg, ti) = (t.growth.unwrap_or(0.1), t.index.unwrap_or(0.07));
    ctx.push(MetricRow::absolute("growth exponent 1/eta", 1.0 / eta, fit.growth, tg, REF_SUMS));
    ctx.push(MetricRow::info("growth fit r-squared", None, fit.r_squared, REF_SUMS));

    let stable = sample_partial_sum(
        &model,
        SumMode::ClanSum,
        &SumConfig {
            n: s.stable_n.unwrap(),
            reps: s.stable_reps.unwrap(),
            // a fresh seed keeps this sample independent of the grid above
            seed: ctx.cfg.seed ^ 0x5eed_5ab1e,
            cap,
            burn_in: 0,
        },
    );
    let values: Vec<f64> = stable.iter().map(|c| c.value as f64).collect();
    let check = stable_tail_check(&values, eta)?;
    let plot: Vec<HillRow> = hill_plot(&values, &hill_grid(values.len()))
        .into_iter()
        .map(|e| HillRow {
            k: e.k_used,
            index: e.index,
            constant: e.constant,
        })
        .collect();
    ctx.artifact("stable_hill.csv", &plot)?;
    ctx.push(MetricRow::absolute("stable tail index", eta, check.estimate.index, ti, REF_SUMS));
    ctx.push(MetricRow::new(
        "heavy tail flag",
        Some(1.0),
        if check.heavy { 1.0 } else { 0.0 },
        Some(1.0),
        None,
        REF_SUMS,
    ));
    Ok(())
}

fn extremal(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let s = ctx.sizes().clone();
    let surrogate = match ctx.cfg.surrogate.unwrap_or(SurrogateMode::PredictedPareto) {
        SurrogateMode::PredictedPareto => Surrogate::PredictedPareto,
        SurrogateMode::Resample => {
            // pool from a separate chain stream, disjoint from the replicates
            let tr = ctx.chain(&model, s.n.unwrap(), u64::MAX)?;
            Surrogate::Resample(tr.as_f64())
        }
    };
    let tau = s.tau.unwrap();
    let rows = extremal_diag(
        &model,
        &ExtremalConfig {
            n_grid: s.n_grid.clone().unwrap(),
            tau,
            reps: s.reps.unwrap(),
            burn_in: s.burn_in.unwrap(),
            seed: ctx.cfg.seed,
            surrogate,
        },
    )?;
    ctx.artifact("extremal.csv", &rows)?;
    let t = &ctx.cfg.tolerances;
    let (chain_min, band) = (t.chain_min.unwrap_or(0.9), t.surrogate_band.unwrap_or(0.05));
    let iid = (-tau).exp();
    for r in &rows {
        ctx.push(MetricRow::info(&format!("chain P(M_n <= u_n) at n={}", r.n), Some(1.0), r.chain, REF_EXTREMAL));
        ctx.push(MetricRow::absolute(
            &format!("iid P(M_n <= u_n) at n={}", r.n),
            iid,
            r.surrogate,
            band,
            REF_IID,
        ));
    }
    let min_step = rows
        .windows(2)
        .map(|w| w[1].chain - w[0].chain)
        .fold(f64::INFINITY, f64::min);
    if rows.len() >= 2 {
        ctx.push(MetricRow::new(
            "chain smallest increase along n",
            None,
            min_step,
            Some(0.0),
            None,
            REF_EXTREMAL,
        ));
    }
    let last = rows.last().expect("non-empty grid");
    ctx.push(MetricRow::new(
        &format!("chain P(M_n <= u_n) at largest n={}", last.n),
        Some(1.0),
        last.chain,
        Some(chain_min),
        None,
        REF_EXTREMAL,
    ));
    Ok(())
}

#[derive(Serialize)]
struct IntegrandRow {
    u: f64,
    integrand: f64,
}

fn fw_check(ctx: &mut Ctx) -> Result<(), Failure> {
    let model = ctx.model()?;
    let check = classify(&model);
    let expect = ctx.cfg.expect.expect("validated");
    let (lower, upper) = match expect {
        Integrability::Finite => (Some(-1.0 + FW_MARGIN), None),
        Integrability::Infinite => (None, Some(-1.0 - FW_MARGIN)),
        Integrability::Indeterminate => (Some(-1.0 - FW_MARGIN), Some(-1.0 + FW_MARGIN)),
    };
    let predicted = model
        .immigration()
        .beta()
        .map(|b| b - model.alpha() - 1.0)
        .unwrap_or(-model.alpha());
    let exponent = if check.exponent.is_infinite() { f64::MAX } else { check.exponent };
    ctx.push(MetricRow::new("integrand exponent", Some(predicted), exponent, lower, upper, REF_FW));
    ctx.push(MetricRow::new("fit r-squared", None, check.r_squared, Some(0.99), None, REF_FW));
    let rows: Vec<IntegrandRow> = check
        .points
        .iter()
        .map(|&(u, integrand)| IntegrandRow { u, integrand })
        .collect();
    ctx.artifact("integrand.csv", &rows)?;
    Ok(())
}

/// Predicted tail of `Σ_{i ≤ τ} Y_i` for an integer-Pareto `Y`.
///
/// A finite-mean count gives `E τ · P(Y > x)`. A Sibuya(μ) count has
/// `1 − E s^τ = (1 − s)^μ`, and `1 − E s^Y ~ Γ(1 − ν)(1 − s)^ν`.
pub fn randsum_prediction(count: &ImmigrationLaw, y: &IntegerPareto) -> TailLaw {
    match count.beta() {
        None => TailLaw {
            index: y.nu(),
            constant: count.mean(),
        },
        Some(mu) => random_sum_tail_heavy(mu, 1.0, y.nu(), gamma(1.0 - y.nu())),
    }
}

fn randsum(ctx: &mut Ctx) -> Result<(), Failure> {
    let spec = ctx.cfg.randsum.expect("validated");
    let count = ImmigrationLaw::new(spec.count)?;
    let y = IntegerPareto::new(spec.nu)?;
    let reps = ctx.sizes().reps.unwrap();
    let t = ctx.cfg.tolerances.clone();
    let tail = randsum_prediction(&count, &y);
    match count.beta() {
        None => {
            let thresholds = ctx.sizes().thresholds.clone().unwrap_or(vec![1e2, 1e3, 1e4]);
            let table = verify_random_sum_tail(&count, &y, reps, &thresholds, Some(&tail), ctx.cfg.seed);
            ctx.artifact("survival.csv", &table)?;
            let (last, rest) = table.split_last().expect("thresholds are non-empty");
            for r in rest {
                ctx.push(MetricRow::info(
                    &format!("survival ratio at {}", r.threshold),
                    Some(1.0),
                    r.ratio,
                    REF_RANDSUM_FINITE,
                ));
            }
            ctx.push(MetricRow::relative(
                &format!("survival ratio at {}", last.threshold),
                1.0,
                last.ratio,
                t.ratio.unwrap_or(0.1),
                REF_RANDSUM_FINITE,
            ));
        }
        Some(_) => {
            let thresholds = ctx.sizes().thresholds.clone().unwrap_or(log_grid(1e2, 1e6, 9));
            let table = verify_random_sum_tail(&count, &y, reps, &thresholds, Some(&tail), ctx.cfg.seed);
            ctx.artifact("survival.csv", &table)?;
            let fit = loglog_fit_checked(&table)?;
            ctx.push(MetricRow::absolute(
                "tail index mu*nu",
                tail.index,
                fit.index,
                t.index.unwrap_or(0.05),
                REF_RANDSUM_HEAVY,
            ));
            ctx.push(MetricRow::info("tail constant", Some(tail.constant), fit.constant, REF_RANDSUM_HEAVY));
        }
    }
    Ok(())
}
