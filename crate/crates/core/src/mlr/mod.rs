//! Joint layout and yaw optimization.
//!
//! The multilevel formulation treats the expected optimal power
//! `f(l) = Σ_ω p^ω max_λ P(l, λ, θ^ω)` as a function of positions alone. Each
//! inner maximization is a small box-constrained problem, re-solved from a
//! cached solution whenever the layout moves, and `∇f` is the layout gradient
//! of the power at the cached maximizers (no differentiation of the argmax is
//! needed). The joint formulation optimizes positions and every scenario's
//! yaws at once and is kept as a baseline. Both use the same augmented
//! Lagrangian outer loop for the spacing constraints.

mod al;
mod inner;
mod joint;
mod outer;
mod repair;
mod report;

use serde::{Deserialize, Serialize};

use crate::farm::{FarmRegion, PhysicalParams, WindRose};

pub(crate) use al::{AlEngine, AlObjective};
pub use inner::{inner_objective, optimal_power, CacheEntry, InnerSettings, ScenarioCache};
pub use joint::{joint_objective, solve_joint};
pub use outer::{outer_objective, solve_mlr, OuterValue};
pub(crate) use outer::{check_start, position_bounds};
pub(crate) use report::expected_power;
pub use repair::{repair_by_resampling, round_to_feasible};
pub use report::{watts_to_gwh, Formulation, SolveReport, TraceEntry, HOURS_PER_YEAR};

/// Default tie-break weight, relative to single-turbine power.
pub const DEFAULT_TIE_BREAK: f64 = 1e-6;

/// A joint layout-and-control instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointProblem {
    pub params: PhysicalParams,
    pub region: FarmRegion,
    pub rose: WindRose,
    pub n_turbines: usize,
    /// Weight `ε_tb` of the quadratic yaw regularizer that makes each inner
    /// maximizer unique.
    pub tie_break: f64,
}

impl JointProblem {
    pub fn new(params: PhysicalParams, region: FarmRegion, rose: WindRose, n_turbines: usize) -> Self {
        Self {
            params,
            region,
            rose,
            n_turbines,
            tie_break: DEFAULT_TIE_BREAK,
        }
    }

    /// `N_T` unwaked, unyawed turbines: no layout can produce more.
    pub fn no_wake_bound(&self) -> f64 {
        self.n_turbines as f64 * self.params.single_turbine_power() * self.rose.probabilities().iter().sum::<f64>()
    }

    /// Scale that brings the objective to order one.
    pub(crate) fn power_scale(&self) -> f64 {
        self.n_turbines as f64 * self.params.single_turbine_power()
    }
}

/// Settings of the augmented Lagrangian outer loop. Positions are handled in
/// rotor diameters and power in units of `N_T` nominal turbines, so these
/// values are dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlSettings {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    /// Grow the penalty unless the worst violation shrinks by this factor.
    pub required_shrink: f64,
    pub max_outer_iterations: usize,
    pub subproblem_iterations: usize,
    pub subproblem_pg_tol: f64,
    pub subproblem_f_tol: f64,
    /// Relative objective change between outer iterations.
    pub objective_tol: f64,
    /// Spacing violation tolerance, in rotor diameters.
    pub feasibility_tol: f64,
    pub carry_history: bool,
}

impl Default for AlSettings {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            required_shrink: 0.25,
            max_outer_iterations: 50,
            subproblem_iterations: 200,
            subproblem_pg_tol: 1e-5,
            subproblem_f_tol: 1e-7,
            objective_tol: 1e-5,
            feasibility_tol: 1e-3,
            carry_history: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub outer: AlSettings,
    pub inner: InnerSettings,
    /// Largest change of any cached yaw, in degrees, tolerated between
    /// successive accepted layouts before a step is halved.
    pub max_yaw_jump_deg: f64,
    /// Seed for resampling infeasible starting layouts.
    pub repair_seed: u64,
    /// Wall-clock limit for one solve, s.
    pub time_limit_s: Option<f64>,
}

impl SolverConfig {
    pub(crate) fn deadline(&self, start: std::time::Instant) -> Option<std::time::Instant> {
        self.time_limit_s.map(|t| start + std::time::Duration::from_secs_f64(t.max(0.0)))
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer: AlSettings::default(),
            inner: InnerSettings::default(),
            max_yaw_jump_deg: 5.0,
            repair_seed: 0,
            time_limit_s: None,
        }
    }
}
