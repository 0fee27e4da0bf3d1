//! Experiment configuration files.
//!
//! One JSON object per experiment. Unknown keys are rejected at every level
//! and all values are checked by [`ExperimentConfig::validate`] before any
//! simulation runs.

use std::path::Path;

use critgw_core::dists::{ImmigrationKind, ImmigrationLaw};
use critgw_core::genfun::{Integrability, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StationaryOracle,
    StationaryTail,
    ProgenyTail,
    TailProcess,
    Anticluster,
    SumClt,
    Extremal,
    FwCheck,
    Randsum,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::StationaryOracle,
        ExperimentKind::StationaryTail,
        ExperimentKind::ProgenyTail,
        ExperimentKind::TailProcess,
        ExperimentKind::Anticluster,
        ExperimentKind::SumClt,
        ExperimentKind::Extremal,
        ExperimentKind::FwCheck,
        ExperimentKind::Randsum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::StationaryOracle => "stationary-oracle",
            ExperimentKind::StationaryTail => "stationary-tail",
            ExperimentKind::ProgenyTail => "progeny-tail",
            ExperimentKind::TailProcess => "tail-process",
            ExperimentKind::Anticluster => "anticluster",
            ExperimentKind::SumClt => "sum-clt",
            ExperimentKind::Extremal => "extremal",
            ExperimentKind::FwCheck => "fw-check",
            ExperimentKind::Randsum => "randsum",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::StationaryOracle => {
                "chain marginal on {1..K} against pmf coefficients of the stationary pgf (chi-square)"
            }
            ExperimentKind::StationaryTail => {
                "stationary tail index and constant from a long chain (log-log survival fit)"
            }
            ExperimentKind::ProgenyTail => "total progeny tail of one critical tree",
            ExperimentKind::TailProcess => {
                "ratios X_j/X_0 after a high exceedance stay near 1; Pareto law of X_0/threshold"
            }
            ExperimentKind::Anticluster => {
                "probability of a return above the level within lags m..r_n, chain vs iid resample"
            }
            ExperimentKind::SumClt => {
                "growth exponent 1/eta of partial-sum quantiles and stable tail index eta"
            }
            ExperimentKind::Extremal => {
                "P(M_n <= u_n(tau)) for the chain (tends to 1) and an iid surrogate (tends to e^-tau)"
            }
            ExperimentKind::FwCheck => "integrability of (1-g)/(f-s) at s=1",
            ExperimentKind::Randsum => "tail of a random sum of integer Pareto summands",
        }
    }
}

/// Simulation sizes. Unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sizes {
    pub n: Option<u64>,
    pub reps: Option<usize>,
    pub burn_in: Option<u64>,
    pub stride: Option<u64>,
    pub cap: Option<u64>,
    pub thresholds: Option<Vec<f64>>,
    /// Hill k values for the Hill plot.
    pub k_grid: Option<Vec<usize>>,
    /// Largest pmf index (stationary-oracle).
    pub k_max: Option<usize>,
    pub n_grid: Option<Vec<u64>>,
    /// Exceedance levels given as quantile probabilities.
    pub levels: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub m: Option<usize>,
    pub r_n: Option<usize>,
    pub tau: Option<f64>,
    /// Quantile used for the growth fit.
    pub q: Option<f64>,
    /// Sample size `n` and replicate count for the stable-index check.
    pub stable_n: Option<u64>,
    pub stable_reps: Option<usize>,
}

/// Acceptance tolerances. Unset fields take per-experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Significance level for chi-square tests.
    pub level: Option<f64>,
    /// Absolute tolerance on a tail index.
    pub index: Option<f64>,
    /// Relative tolerance on a tail constant.
    pub constant: Option<f64>,
    /// Relative tolerance on a survival ratio.
    pub ratio: Option<f64>,
    /// Absolute tolerance on a growth exponent.
    pub growth: Option<f64>,
    /// Largest allowed |median ratio − 1|.
    pub median: Option<f64>,
    /// Threshold for a probability: lower bound for the chain, upper bound
    /// for the surrogate.
    pub chain_min: Option<f64>,
    pub surrogate_max: Option<f64>,
    /// Half-width of the band around e^{−τ} for the surrogate.
    pub surrogate_band: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandSumSpec {
    /// Law of the number of summands.
    pub count: ImmigrationKind,
    /// Pareto index of the summands, `P(Y > x) = x^{−ν}`.
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateMode {
    /// Exact Pareto draws from the predicted stationary tail.
    PredictedPareto,
    /// Resampling with replacement from a separate long chain.
    Resample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub randsum: Option<RandSumSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// fw-check: the classification the model should receive.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Integrability>,
    /// extremal: iid comparison sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate: Option<SurrogateMode>,
    /// Directory for the report and CSV files; overridden by `--out`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        match self.experiment {
            ExperimentKind::Randsum => {
                let Some(rs) = &self.randsum else {
                    return bad("randsum needs a `randsum` block".into());
                };
                ImmigrationLaw::new(rs.count).map_err(|e| HarnessError::Config(e.to_string()))?;
                if !(rs.nu > 0.0 && rs.nu < 1.0) {
                    return bad(format!("randsum.nu must lie in (0, 1), got {}", rs.nu));
                }
            }
            _ => {
                let Some(model) = &self.model else {
                    return bad(format!("{} needs a `model` block", self.experiment.name()));
                };
                model.build().map_err(|e| HarnessError::Config(e.to_string()))?;
            }
        }
        if self.experiment == ExperimentKind::FwCheck && self.expect.is_none() {
            return bad("fw-check needs `expect` (finite or infinite)".into());
        }
        let s = &self.sizes;
        if s.n == Some(0) || s.reps == Some(0) || s.stride == Some(0) || s.cap == Some(0) {
            return bad("n, reps, stride and cap must be positive".into());
        }
        if let Some(t) = &s.thresholds {
            if t.is_empty() || t.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                return bad("thresholds must be positive and finite".into());
            }
        }
        if let Some(levels) = &s.levels {
            if levels.is_empty() || levels.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return bad("levels must lie in (0, 1)".into());
            }
        }
        if let Some(q) = s.q {
            if !(q > 0.0 && q < 1.0) {
                return bad(format!("q must lie in (0, 1), got {q}"));
            }
        }
        if let Some(tau) = s.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(format!("tau must be positive, got {tau}"));
            }
        }
        if let Some(grid) = &s.n_grid {
            if grid.is_empty() || grid.contains(&0) {
                return bad("n_grid must be non-empty and positive".into());
            }
        }
        if let (Some(m), Some(r)) = (s.m, s.r_n) {
            if !(m >= 1 && r > m) {
                return bad(format!("need r_n > m >= 1, got m={m}, r_n={r}"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("level", t.level),
            ("index", t.index),
            ("constant", t.constant),
            ("ratio", t.ratio),
            ("growth", t.growth),
            ("median", t.median),
            ("chain_min", t.chain_min),
            ("surrogate_max", t.surrogate_max),
            ("surrogate_band", t.surrogate_band),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("tolerance {name} must be non-negative, got {v}"));
                }
            }
        }
        Ok(())
    }

    /// Scale sample sizes (`n`, `reps`, `stable_reps`) by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        let scale_u64 = |v: u64| ((v as f64 * factor).round() as u64).max(1);
        let scale_usize = |v: usize| ((v as f64 * factor).round() as usize).max(1);
        if factor != 1.0 {
            let defaults = crate::experiments::default_sizes(self.experiment);
            out.sizes.n = self.sizes.n.or(defaults.n).map(scale_u64);
            out.sizes.reps = self.sizes.reps.or(defaults.reps).map(scale_usize);
            out.sizes.stable_reps = self.sizes.stable_reps.or(defaults.stable_reps).map(scale_usize);
        }
        out
    }
}
