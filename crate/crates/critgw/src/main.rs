use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use critgw::config::{ExperimentConfig, ExperimentKind};
use critgw::experiments::{randsum_prediction, run_experiment};
use critgw::{write_outputs, HarnessError};
use critgw_core::dists::{ImmigrationKind, ImmigrationLaw, OffspringKind, OffspringLaw};
use critgw_core::est::{
    hill, hill_grid, hill_plot, default_k, log_grid, loglog_fit_checked, survival_table, SurvivalRow,
    MIN_LOGLOG_EXCEEDANCES,
};
use critgw_core::genfun::{
    fw_check, iterate_f, predicted_clan_tail, predicted_progeny_tail, stationary_pgf, stationary_pmf,
    ChainModel, ModelSpec, FW_MARGIN,
};
use critgw_core::sim::{
    clan_samples, progeny_samples, run_chain, sample_partial_sum, verify_random_sum_tail, CensoredSample,
    ChainConfig, IntegerPareto, SumConfig, SumMode, DEFAULT_BURN_IN, DEFAULT_CAP,
};
use critgw_core::stats::quantile_sorted;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "critgw", version, about = "Critical Galton-Watson chains with immigration")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "CRITGW_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Multiplier on the Monte Carlo sizes.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the experiment names accepted in configs.
    ListExperiments,
    /// Generating-function numerics; one JSON record per line.
    #[command(subcommand)]
    Genfun(GenfunCmd),
    /// Simulation; CSV output.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Tail estimation from a CSV column `value` (optional `censored`).
    #[command(subcommand)]
    Est(EstCmd),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    alpha: f64,
    /// Slack constant; without it the offspring law is power-fractional.
    #[arg(long)]
    c: Option<f64>,
    /// `constant:B`, `poisson:MEAN`, `geometric:P` or `sibuya:BETA`.
    #[arg(long, default_value = "constant:1", value_parser = parse_immigration)]
    immigration: ImmigrationKind,
}

impl ModelArgs {
    fn offspring_kind(&self) -> OffspringKind {
        match self.c {
            Some(c) => OffspringKind::Slack { alpha: self.alpha, c },
            None => OffspringKind::PowerFractional { alpha: self.alpha },
        }
    }

    fn spec(&self) -> ModelSpec {
        ModelSpec {
            offspring: self.offspring_kind(),
            immigration: self.immigration,
        }
    }

    fn build(&self) -> Result<ChainModel, CliError> {
        Ok(self.spec().build()?)
    }
}

fn parse_immigration(text: &str) -> Result<ImmigrationKind, String> {
    let (name, value) = text
        .split_once(':')
        .ok_or_else(|| format!("expected NAME:VALUE, got {text:?}"))?;
    let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    let kind = match name {
        "constant" => ImmigrationKind::Constant {
            b: value.parse().map_err(|e| format!("{value:?}: {e}"))?,
        },
        "poisson" => ImmigrationKind::Poisson { mean: num(value)? },
        "geometric" => ImmigrationKind::Geometric { p: num(value)? },
        "sibuya" => ImmigrationKind::Sibuya { beta: num(value)? },
        _ => return Err(format!("unknown immigration law {name:?}")),
    };
    ImmigrationLaw::new(kind).map_err(|e| e.to_string())?;
    Ok(kind)
}

#[derive(Subcommand)]
enum GenfunCmd {
    /// Stationary pgf at each `s`.
    EvalPhi {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, required = true, value_delimiter = ',')]
        s: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// n-th offspring iterate at each `s`.
    Fn {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        n: u64,
        #[arg(long, required = true, value_delimiter = ',')]
        s: Vec<f64>,
    },
    /// Is the stationary law proper?
    FwCheck {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Stationary pmf on {0..K}.
    Pmf {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "K", short = 'K')]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Args)]
struct SimCommon {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Output CSV file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long, default_value_t = 100_000)]
    reps: usize,
    /// Survival thresholds (default: 9 points from 10 to 10^5).
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Emit the samples `(value, censored)` instead of a survival table.
    #[arg(long)]
    raw: bool,
}

impl TailArgs {
    fn thresholds(&self) -> Vec<f64> {
        if self.thresholds.is_empty() {
            log_grid(1e1, 1e5, 9)
        } else {
            self.thresholds.clone()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Chain,
    ClanSum,
}

#[derive(Subcommand)]
enum SimCmd {
    /// Chain trajectory `(index, value)`.
    Chain {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: SimCommon,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: u64,
        #[arg(long, default_value_t = 1)]
        stride: u64,
    },
    /// Total progeny of single-ancestor trees.
    Progeny {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        c: Option<f64>,
        #[command(flatten)]
        common: SimCommon,
        #[command(flatten)]
        tail: TailArgs,
    },
    /// Clan sizes: one immigrant batch with all descendants.
    Clan {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: SimCommon,
        #[command(flatten)]
        tail: TailArgs,
    },
    /// Partial sums `S_n`, one sample per replicate.
    Sums {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        common: SimCommon,
        #[arg(long, value_enum, default_value = "clan-sum")]
        mode: ModeArg,
        #[arg(long)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: u64,
    },
    /// Random sums of integer-Pareto summands.
    Randsum {
        /// Count law, same syntax as `--immigration`.
        #[arg(long, value_parser = parse_immigration)]
        count: ImmigrationKind,
        #[arg(long)]
        nu: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum EstCmd {
    /// Hill estimator with the full Hill plot as diagnostics.
    Hill {
        #[arg(long)]
        input: PathBuf,
        /// Order statistics (default: floor(n^0.6)).
        #[arg(long)]
        k: Option<usize>,
    },
    /// Log-log regression of the empirical survival function.
    Loglog {
        #[arg(long)]
        input: PathBuf,
        /// Default: 8 points between the 90% quantile and the level with
        /// 100 exceedances.
        #[arg(long, value_delimiter = ',')]
        thresholds: Vec<f64>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Core(#[from] critgw_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("usage error: {0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Harness(e) => e.exit_code() as u8,
            CliError::Core(critgw_core::Error::InsufficientData(_)) => 3,
            CliError::Core(
                critgw_core::Error::ParameterDomain(_)
                | critgw_core::Error::UnsupportedRegime(_)
                | critgw_core::Error::NotHeavyTailed(_),
            ) => 2,
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("critgw: cannot set thread count: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("critgw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Run { config, scale, out } => run(&config, scale, out),
        Command::ListExperiments => {
            for kind in ExperimentKind::ALL {
                println!("{:<18} {}", kind.name(), kind.description());
            }
            Ok(0)
        }
        Command::Genfun(c) => genfun(c).map(|()| 0),
        Command::Sim(c) => sim(c).map(|()| 0),
        Command::Est(c) => est(c).map(|()| 0),
    }
}

fn run(config: &Path, scale: f64, out: Option<PathBuf>) -> Result<u8, CliError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CliError::Usage(format!("--scale must be positive, got {scale}")));
    }
    let cfg = ExperimentConfig::from_path(config)?.scaled(scale);
    let (report, artifacts) = run_experiment(&cfg)?;
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("critgw-out").join(cfg.experiment.name()));
    write_outputs(&report, &artifacts, &dir)?;
    print!("{}", report.summary());
    println!("  output: {}", dir.display());
    Ok(report.status.exit_code() as u8)
}

// ---------------------------------------------------------------------------
// genfun
// ---------------------------------------------------------------------------

fn emit(record: serde_json::Value) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, &record).map_err(io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn genfun(cmd: GenfunCmd) -> Result<(), CliError> {
    match cmd {
        GenfunCmd::EvalPhi { model, s, tol } => {
            let m = model.build()?;
            for s in s {
                let e = stationary_pgf(&m, s, tol)?;
                emit(json!({
                    "input": {"model": m.spec(), "s": s},
                    "value": e.value,
                    "error_bound": e.error_bound,
                }))?;
            }
        }
        GenfunCmd::Fn { alpha, c, n, s } => {
            let kind = match c {
                Some(c) => OffspringKind::Slack { alpha, c },
                None => OffspringKind::PowerFractional { alpha },
            };
            let f = OffspringLaw::new(kind)?;
            for s in s {
                let value = iterate_f(&f, s, n);
                // each step rounds 1 - f relative to itself and the map is a
                // contraction in u, so errors add without amplification
                let bound = 4.0 * f64::EPSILON * (n as f64 + 1.0) * (1.0 - value) + f64::EPSILON;
                emit(json!({
                    "input": {"offspring": kind, "n": n, "s": s},
                    "value": value,
                    "error_bound": bound,
                }))?;
            }
        }
        GenfunCmd::FwCheck { model } => {
            let m = model.build()?;
            let fw = fw_check(&m);
            emit(json!({
                "input": {"model": m.spec()},
                "value": {
                    "classification": fw.classification,
                    "exponent": fw.exponent,
                    "r_squared": fw.r_squared,
                },
                "error_bound": FW_MARGIN,
            }))?;
        }
        GenfunCmd::Pmf { model, k, radius, tol } => {
            let m = model.build()?;
            let coef = stationary_pmf(&m, k, radius, tol)?;
            emit(json!({
                "input": {"model": m.spec(), "K": k, "radius": coef.radius, "points": coef.points},
                "value": coef.values,
                "error_bound": coef.error_bound,
            }))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(io::BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

#[derive(Serialize)]
struct ChainRow {
    index: u64,
    value: u64,
}

/// Schema shared by `sim --raw` output and `est` input.
#[derive(Serialize, Deserialize)]
struct SampleRow {
    value: f64,
    #[serde(default)]
    censored: bool,
}

#[derive(Serialize)]
struct SurvivalCsv {
    threshold: f64,
    empirical: f64,
    predicted: f64,
    ratio: f64,
    n_effective: usize,
}

impl From<&SurvivalRow> for SurvivalCsv {
    fn from(r: &SurvivalRow) -> Self {
        Self {
            threshold: r.threshold,
            empirical: r.empirical,
            predicted: r.predicted,
            ratio: r.ratio,
            n_effective: r.n_effective,
        }
    }
}

fn write_rows<T: Serialize>(out: Option<&Path>, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    let mut w = csv_writer(out)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_samples(out: Option<&Path>, samples: &[CensoredSample]) -> Result<(), CliError> {
    write_rows(
        out,
        samples.iter().map(|s| SampleRow {
            value: s.value as f64,
            censored: s.censored,
        }),
    )
}

fn write_survival(out: Option<&Path>, rows: &[SurvivalRow]) -> Result<(), CliError> {
    write_rows(out, rows.iter().map(SurvivalCsv::from))
}

fn sim(cmd: SimCmd) -> Result<(), CliError> {
    match cmd {
        SimCmd::Chain {
            model,
            common,
            n,
            burn_in,
            stride,
        } => {
            let m = model.build()?;
            let tr = run_chain(
                &m,
                &ChainConfig {
                    n,
                    burn_in,
                    stride,
                    cap: common.cap,
                    seed: common.seed,
                    stream_id: 0,
                },
            )?;
            if tr.censored {
                eprintln!("critgw: {} transitions hit the cap", tr.stats.censored_steps);
            }
            write_rows(
                common.out.as_deref(),
                tr.values.iter().enumerate().map(|(i, &value)| ChainRow {
                    index: i as u64,
                    value,
                }),
            )
        }
        SimCmd::Progeny { alpha, c, common, tail } => {
            let kind = match c {
                Some(c) => OffspringKind::Slack { alpha, c },
                None => OffspringKind::PowerFractional { alpha },
            };
            let f = OffspringLaw::new(kind)?;
            let samples = progeny_samples(&f, tail.reps, common.cap, common.seed);
            if tail.raw {
                return write_samples(common.out.as_deref(), &samples);
            }
            let pred = predicted_progeny_tail(&f);
            let rows = survival_table(&samples, &tail.thresholds(), Some(&pred));
            write_survival(common.out.as_deref(), &rows)
        }
        SimCmd::Clan { model, common, tail } => {
            let m = model.build()?;
            let samples = clan_samples(&m, tail.reps, common.cap, common.seed);
            if tail.raw {
                return write_samples(common.out.as_deref(), &samples);
            }
            let pred = predicted_clan_tail(&m);
            let rows = survival_table(&samples, &tail.thresholds(), Some(&pred));
            write_survival(common.out.as_deref(), &rows)
        }
        SimCmd::Sums {
            model,
            common,
            mode,
            n,
            reps,
            burn_in,
        } => {
            let m = model.build()?;
            let mode = match mode {
                ModeArg::Chain => SumMode::Chain,
                ModeArg::ClanSum => SumMode::ClanSum,
            };
            let samples = sample_partial_sum(
                &m,
                mode,
                &SumConfig {
                    n,
                    reps,
                    seed: common.seed,
                    cap: common.cap,
                    burn_in,
                },
            );
            write_samples(common.out.as_deref(), &samples)
        }
        SimCmd::Randsum {
            count,
            nu,
            seed,
            out,
            reps,
            thresholds,
        } => {
            let count = ImmigrationLaw::new(count)?;
            let y = IntegerPareto::new(nu)?;
            let pred = randsum_prediction(&count, &y);
            let thresholds = if thresholds.is_empty() {
                log_grid(1e2, 1e6, 9)
            } else {
                thresholds
            };
            let rows = verify_random_sum_tail(&count, &y, reps, &thresholds, Some(&pred), seed);
            write_survival(out.as_deref(), &rows)
        }
    }
}

// ---------------------------------------------------------------------------
// est
// ---------------------------------------------------------------------------

fn read_samples(path: &Path) -> Result<Vec<SampleRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<SampleRow>, _>>()?;
    if rows.is_empty() {
        return Err(critgw_core::Error::InsufficientData(format!("{}: no rows", path.display())).into());
    }
    Ok(rows)
}

fn est(cmd: EstCmd) -> Result<(), CliError> {
    match cmd {
        EstCmd::Hill { input, k } => {
            let rows = read_samples(&input)?;
            let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
            let k = k.unwrap_or_else(|| default_k(values.len()));
            let e = hill(&values, k)?;
            let plot = hill_plot(&values, &hill_grid(values.len()));
            emit(json!({
                "method": e.method,
                "index_hat": e.index,
                "constant_hat": e.constant,
                "k_used": e.k_used,
                "diagnostics": plot
                    .iter()
                    .map(|p| json!({"k": p.k_used, "index": p.index, "stderr": p.stderr}))
                    .collect::<Vec<_>>(),
            }))
        }
        EstCmd::Loglog { input, thresholds } => {
            let rows = read_samples(&input)?;
            let samples: Vec<CensoredSample> = rows
                .iter()
                .map(|r| CensoredSample {
                    value: r.value.max(0.0).round() as u64,
                    censored: r.censored,
                })
                .collect();
            let thresholds = if thresholds.is_empty() {
                let mut sorted: Vec<f64> = rows.iter().map(|r| r.value).collect();
                sorted.sort_by(f64::total_cmp);
                let n = sorted.len() as f64;
                let hi_q = 1.0 - MIN_LOGLOG_EXCEEDANCES as f64 / n;
                let lo = quantile_sorted(&sorted, 0.9).max(1.0);
                let hi = quantile_sorted(&sorted, hi_q.max(0.9));
                if !(hi > lo) {
                    return Err(critgw_core::Error::InsufficientData(
                        "too few samples for a default threshold grid".into(),
                    )
                    .into());
                }
                log_grid(lo, hi, 8)
            } else {
                thresholds
            };
            let table = survival_table(&samples, &thresholds, None);
            let e = loglog_fit_checked(&table)?;
            emit(json!({
                "method": e.method,
                "index_hat": e.index,
                "constant_hat": e.constant,
                "k_used": e.k_used,
                "diagnostics": table
                    .iter()
                    .map(|r| json!({
                        "threshold": r.threshold,
                        "empirical": r.empirical,
                        "n_effective": r.n_effective,
                        "exceedances": r.exceedances,
                    }))
                    .collect::<Vec<_>>(),
            }))
        }
    }
}
