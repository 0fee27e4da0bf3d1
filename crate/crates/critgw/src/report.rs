//! Experiment reports.
//!
//! A report row carries a predicted value, an estimate and optional bounds;
//! its `pass` flag is `lower ≤ estimated ≤ upper` and nothing else, so every
//! verdict can be re-derived from the numbers in the JSON.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub predicted: Option<f64>,
    pub estimated: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
    /// Which result the prediction comes from.
    pub reference: String,
}

impl MetricRow {
    pub fn new(
        name: impl Into<String>,
        predicted: Option<f64>,
        estimated: f64,
        lower: Option<f64>,
        upper: Option<f64>,
        reference: impl Into<String>,
    ) -> Self {
        let pass = within(estimated, lower, upper);
        Self {
            name: name.into(),
            predicted,
            estimated,
            lower,
            upper,
            pass,
            reference: reference.into(),
        }
    }

    /// `predicted ± tol`.
    pub fn absolute(name: &str, predicted: f64, estimated: f64, tol: f64, reference: &str) -> Self {
        Self::new(
            name,
            Some(predicted),
            estimated,
            Some(predicted - tol),
            Some(predicted + tol),
            reference,
        )
    }

    /// `predicted · (1 ± rel)`.
    pub fn relative(name: &str, predicted: f64, estimated: f64, rel: f64, reference: &str) -> Self {
        Self::new(
            name,
            Some(predicted),
            estimated,
            Some(predicted * (1.0 - rel)),
            Some(predicted * (1.0 + rel)),
            reference,
        )
    }

    /// No bounds; recorded for information and always passing.
    pub fn info(name: &str, predicted: Option<f64>, estimated: f64, reference: &str) -> Self {
        Self::new(name, predicted, estimated, None, None, reference)
    }

    pub fn recheck(&self) -> bool {
        self.pass == within(self.estimated, self.lower, self.upper)
    }
}

pub fn within(x: f64, lower: Option<f64>, upper: Option<f64>) -> bool {
    !x.is_nan() && lower.is_none_or(|l| x >= l) && upper.is_none_or(|u| x <= u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Not enough usable data; rows are partial.
    InsufficientData,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::InsufficientData => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rows: Vec<MetricRow>,
    pub status: Status,
    pub message: Option<String>,
    pub artifacts: Vec<String>,
    pub wall_clock_secs: f64,
    pub version: String,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            experiment: config.experiment.name().to_string(),
            config: config.clone(),
            rows: Vec::new(),
            status: Status::Pass,
            message: None,
            artifacts: Vec::new(),
            wall_clock_secs: 0.0,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn push(&mut self, row: MetricRow) {
        self.rows.push(row);
    }

    pub fn row(&self, name: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Status from the rows alone (unless data ran out).
    pub fn finish(&mut self) {
        if self.status != Status::InsufficientData {
            self.status = if self.rows.iter().all(|r| r.pass) {
                Status::Pass
            } else {
                Status::Fail
            };
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    /// Human-readable summary, one line per row.
    pub fn summary(&self) -> String {
        let mut out = format!("{} [{:?}]\n", self.experiment, self.status);
        for r in &self.rows {
            let bound = |b: Option<f64>| b.map_or("-".to_string(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "  {:<5} {:<40} est {:<14.6} pred {:<14} [{}, {}]\n",
                if r.pass { "ok" } else { "FAIL" },
                r.name,
                r.estimated,
                r.predicted.map_or("-".to_string(), |p| format!("{p:.6}")),
                bound(r.lower),
                bound(r.upper),
            ));
        }
        if let Some(m) = &self.message {
            out.push_str(&format!("  note: {m}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_is_a_function_of_the_numbers() {
        let r = MetricRow::absolute("x", 0.5, 0.54, 0.05, "ref");
        assert!(r.pass && r.recheck());
        let r = MetricRow::relative("c", 2.0, 2.6, 0.25, "ref");
        assert!(!r.pass && r.recheck());
        let r = MetricRow::new("lower only", None, 0.95, Some(0.9), None, "ref");
        assert!(r.pass);
        assert!(!MetricRow::info("nan", None, f64::NAN, "ref").pass);
    }
}
