use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::JointProblem;
use crate::error::{FarmError, Result};
use crate::farm::Layout;
use crate::wake::farm_power;

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Formulation {
    #[serde(rename = "MLR-A")]
    Mlr,
    #[serde(rename = "JOINT")]
    Joint,
    #[serde(rename = "ADMM")]
    Admm,
}

impl Formulation {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Mlr => "MLR-A",
            Self::Joint => "JOINT",
            Self::Admm => "ADMM",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Formulation {
    type Err = FarmError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlr" | "mlr-a" => Ok(Self::Mlr),
            "joint" => Ok(Self::Joint),
            "admm" => Ok(Self::Admm),
            _ => Err(FarmError::Config(format!("unknown formulation `{s}`"))),
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Expected power at the iterate, W.
    pub objective_w: f64,
    /// Worst spacing deficit, m.
    pub max_violation_m: f64,
    pub penalty: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub formulation: Formulation,
    pub n_turbines: usize,
    pub scenarios: usize,
    /// Final positions `[x; y]`, m.
    pub layout: Vec<f64>,
    /// Final yaws, one vector per scenario, rad.
    pub yaws: Vec<Vec<f64>>,
    /// `Σ_ω p^ω P(l, λ^ω, θ^ω)`, W.
    pub expected_power_w: f64,
    pub objective_gwh: f64,
    pub trace: Vec<TraceEntry>,
    pub runtime_s: f64,
    /// Objective evaluations of the outer solver.
    pub outer_evaluations: usize,
    /// Total inner yaw-solver evaluations, summed over scenarios.
    pub inner_evaluations: usize,
    /// Mean inner evaluations per scenario once warm, over the cold mean.
    pub warm_savings: Option<f64>,
    pub converged: bool,
    pub message: Option<String>,
}

pub fn watts_to_gwh(watts: f64) -> f64 {
    watts * HOURS_PER_YEAR / 1e9
}

impl SolveReport {
    /// Expected power recomputed from the stored variables.
    pub fn reevaluate(&self, problem: &JointProblem) -> Result<f64> {
        let layout = Layout::new(self.layout.clone())?;
        if self.yaws.len() != problem.rose.len() {
            return Err(FarmError::DimensionMismatch {
                expected: problem.rose.len(),
                found: self.yaws.len(),
            });
        }
        Ok(expected_power(problem, &layout, &self.yaws))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| FarmError::Config(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| FarmError::io(path, e))
    }
}

pub(crate) fn expected_power(problem: &JointProblem, layout: &Layout, yaws: &[Vec<f64>]) -> f64 {
    problem
        .rose
        .scenarios()
        .zip(yaws)
        .map(|((angle, p), y)| p * farm_power(layout, y, angle, &problem.params))
        .sum()
}
