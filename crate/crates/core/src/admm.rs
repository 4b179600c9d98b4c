//! Consensus ADMM over per-scenario copies of the layout.
//!
//! Each scenario optimizes its own positions and yaws against a proximal
//! pull toward the shared layout; the shared layout is then the closed-form
//! minimizer of the coupling terms, and the duals take a gradient step.
//! Kept as a comparison baseline.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FarmError, Result};
use crate::farm::{max_separation_deficit, Layout};
use crate::gradient::power_gradient;
use crate::mlr::{
    check_start, position_bounds, round_to_feasible, watts_to_gwh, expected_power, AlEngine, AlObjective,
    Formulation, JointProblem, ScenarioCache, SolveReport, SolverConfig, TraceEntry,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmmSettings {
    /// Proximal weight `μ`, W/m². `None` uses the outer loop's initial
    /// penalty, converted from its normalized units.
    pub penalty: Option<f64>,
    pub max_iterations: usize,
    /// Primal and dual residual tolerance, in rotor diameters.
    pub residual_tol: f64,
    /// Outer iterations of each scenario's constrained solve.
    pub subproblem_outer_iterations: usize,
    /// Double or halve `μ` when one residual exceeds the other tenfold.
    pub residual_balancing: bool,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            penalty: None,
            max_iterations: 100,
            residual_tol: 1e-3,
            subproblem_outer_iterations: 10,
            residual_balancing: false,
        }
    }
}

/// Iterates of the decomposition, in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmState {
    /// Shared layout `[x; y]`, m.
    pub consensus: Vec<f64>,
    /// One layout copy per scenario, m.
    pub copies: Vec<Vec<f64>>,
    /// One yaw vector per scenario, rad.
    pub yaws: Vec<Vec<f64>>,
    /// Consensus multipliers, W/m.
    pub duals: Vec<Vec<f64>>,
    /// `μ`, W/m².
    pub penalty: f64,
    /// `max_ω ‖l^ω - l‖`, m.
    pub primal_residual: f64,
    /// Movement of the shared layout in the last coordination, m.
    pub dual_residual: f64,
}

impl AdmmState {
    /// Every copy at `start`, zero yaws and duals.
    pub fn new(start: &Layout, scenarios: usize, penalty: f64) -> Self {
        let n = start.len();
        Self {
            consensus: start.as_slice().to_vec(),
            copies: vec![start.as_slice().to_vec(); scenarios],
            yaws: vec![vec![0.0; n]; scenarios],
            duals: vec![vec![0.0; 2 * n]; scenarios],
            penalty,
            primal_residual: 0.0,
            dual_residual: 0.0,
        }
    }

    fn scenarios(&self) -> usize {
        self.copies.len()
    }
}

/// `μ` matching the outer loop's initial penalty on the normalized problem.
pub fn default_penalty(problem: &JointProblem, config: &SolverConfig) -> f64 {
    let d = problem.params.rotor_diameter;
    config.outer.initial_penalty * problem.power_scale() / (d * d)
}

/// One scenario's solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub layout: Vec<f64>,
    pub yaws: Vec<f64>,
    pub converged: bool,
    pub evaluations: usize,
}

/// `-[p P(l^ω, λ^ω) - tie-break - ν·(l^ω - l) - μ ‖l^ω - l‖²]`, scaled,
/// over `[l^ω / D; λ^ω]`.
struct ScenarioObjective<'a> {
    problem: &'a JointProblem,
    scenario: usize,
    consensus: &'a [f64],
    duals: &'a [f64],
    penalty: f64,
    scale: f64,
}

impl AlObjective for ScenarioObjective<'_> {
    fn evaluate(&mut self, v: &[f64], grad: &mut [f64]) -> Result<Option<f64>> {
        let pr = self.problem;
        let n = pr.n_turbines;
        let d = pr.params.rotor_diameter;
        let prob = pr.rose.probabilities()[self.scenario];
        let angle = pr.rose.angles()[self.scenario];
        let layout = Layout::new(v[..2 * n].iter().map(|z| z * d).collect())?;
        let yaws = &v[2 * n..];
        let (power, g) = power_gradient(&layout, yaws, angle, &pr.params);
        let weight = pr.tie_break * pr.params.single_turbine_power() / n as f64;

        let mut value = prob * power;
        for (k, (gk, y)) in grad[2 * n..].iter_mut().zip(yaws).enumerate() {
            value -= prob * weight * y * y;
            *gk = -prob * (g.grad_yaw[k] - 2.0 * weight * y) * self.scale;
        }
        let l = layout.as_slice();
        for k in 0..2 * n {
            let gap = l[k] - self.consensus[k];
            value -= self.duals[k] * gap + self.penalty * gap * gap;
            let dv = prob * g.grad_layout[k] - self.duals[k] - 2.0 * self.penalty * gap;
            grad[k] = -dv * d * self.scale;
        }
        Ok(Some(-value * self.scale))
    }
}

/// Maximizes scenario `ω`'s augmented objective with the shared layout held
/// fixed, warm from the scenario's current copy and yaws.
pub fn admm_subproblem(
    scenario: usize,
    state: &AdmmState,
    problem: &JointProblem,
    config: &SolverConfig,
    settings: &AdmmSettings,
) -> Result<SubproblemSolution> {
    admm_subproblem_until(scenario, state, problem, config, settings, None)
}

fn admm_subproblem_until(
    scenario: usize,
    state: &AdmmState,
    problem: &JointProblem,
    config: &SolverConfig,
    settings: &AdmmSettings,
    deadline: Option<Instant>,
) -> Result<SubproblemSolution> {
    let n = problem.n_turbines;
    let d = problem.params.rotor_diameter;
    let p = &problem.params;
    if scenario >= state.scenarios() {
        return Err(FarmError::DimensionMismatch {
            expected: state.scenarios(),
            found: scenario + 1,
        });
    }
    let (mut lower, mut upper) = position_bounds(problem);
    lower.extend(std::iter::repeat_n(p.yaw_min, n));
    upper.extend(std::iter::repeat_n(p.yaw_max, n));
    let mut x0: Vec<f64> = state.copies[scenario].iter().map(|v| v / d).collect();
    x0.extend(state.yaws[scenario].iter().map(|y| y.clamp(p.yaw_min, p.yaw_max)));
    for ((x, lo), hi) in x0.iter_mut().zip(&lower).zip(&upper) {
        *x = x.clamp(*lo, *hi);
    }

    let outer = crate::mlr::AlSettings {
        max_outer_iterations: settings.subproblem_outer_iterations,
        ..config.outer.clone()
    };
    let engine = AlEngine {
        n_turbines: n,
        separation: problem.region.min_separation / d,
        lower,
        upper,
        settings: &outer,
        deadline,
    };
    let mut objective = ScenarioObjective {
        problem,
        scenario,
        consensus: &state.consensus,
        duals: &state.duals[scenario],
        penalty: state.penalty,
        scale: 1.0 / problem.power_scale(),
    };
    let out = engine.run(&mut objective, &x0)?;
    Ok(SubproblemSolution {
        layout: out.x[..2 * n].iter().map(|z| z * d).collect(),
        yaws: out.x[2 * n..].to_vec(),
        converged: out.converged,
        evaluations: out.evaluations,
    })
}

/// `l = (1/W) Σ_ω (l^ω + ν^ω / 2μ)`, the minimizer of
/// `Σ_ω ν^ω·(l^ω - l) + μ ‖l^ω - l‖²` over `l`.
pub fn admm_coordinate(state: &AdmmState) -> Result<Vec<f64>> {
    if !(state.penalty > 0.0) {
        return Err(FarmError::InvalidParams(format!("ADMM penalty must be positive, got {}", state.penalty)));
    }
    let w = state.scenarios();
    if w == 0 {
        return Err(FarmError::InvalidRose("at least one scenario required".into()));
    }
    let mut l = vec![0.0; state.consensus.len()];
    for (copy, dual) in state.copies.iter().zip(&state.duals) {
        for ((lk, c), v) in l.iter_mut().zip(copy).zip(dual) {
            *lk += c + v / (2.0 * state.penalty);
        }
    }
    l.iter_mut().for_each(|v| *v /= w as f64);
    Ok(l)
}

/// `ν^ω ← ν^ω + 2μ (l^ω - l)`.
pub fn admm_dual_update(state: &mut AdmmState) {
    let mu = state.penalty;
    for (dual, copy) in state.duals.iter_mut().zip(&state.copies) {
        for ((v, c), l) in dual.iter_mut().zip(copy).zip(&state.consensus) {
            *v += 2.0 * mu * (c - l);
        }
    }
}

fn primal_residual(state: &AdmmState) -> f64 {
    state
        .copies
        .iter()
        .map(|c| c.iter().zip(&state.consensus).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Runs the decomposition to consensus, then re-optimizes every scenario's
/// yaws on the (rounded) shared layout.
pub fn admm_solve(
    problem: &JointProblem,
    start: &Layout,
    config: &SolverConfig,
    settings: &AdmmSettings,
) -> Result<SolveReport> {
    let clock = Instant::now();
    let deadline = config.deadline(clock);
    let start = check_start(problem, start, config.repair_seed)?;
    let n = problem.n_turbines;
    let d = problem.params.rotor_diameter;
    let w = problem.rose.len();
    let penalty = settings.penalty.unwrap_or_else(|| default_penalty(problem, config));
    let mut state = AdmmState::new(&start, w, penalty);
    admm_coordinate(&state)?;

    let tol = settings.residual_tol * d;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    let mut converged = false;
    for iteration in 0..settings.max_iterations {
        if deadline.is_some_and(|t| Instant::now() >= t) {
            break;
        }
        let solutions = (0..w)
            .into_par_iter()
            .map(|s| admm_subproblem_until(s, &state, problem, config, settings, deadline))
            .collect::<Result<Vec<_>>>()?;
        let mut copy_value = 0.0;
        let mut step_evals = 0;
        for (s, sol) in solutions.into_iter().enumerate() {
            let layout = Layout::new(sol.layout.clone())?;
            copy_value += problem.rose.probabilities()[s]
                * crate::wake::farm_power(&layout, &sol.yaws, problem.rose.angles()[s], &problem.params);
            step_evals += sol.evaluations;
            state.copies[s] = sol.layout;
            state.yaws[s] = sol.yaws;
        }
        evaluations += step_evals;

        let coordinated = admm_coordinate(&state)?;
        let previous = std::mem::replace(&mut state.consensus, coordinated);
        admm_dual_update(&mut state);
        state.primal_residual = primal_residual(&state);
        state.dual_residual = previous
            .iter()
            .zip(&state.consensus)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let shared = Layout::new(state.consensus.clone())?;
        trace.push(TraceEntry {
            iteration,
            objective_w: copy_value,
            max_violation_m: max_separation_deficit(&shared, problem.region.min_separation),
            penalty: state.penalty,
            evaluations: step_evals,
        });
        if state.primal_residual <= tol && state.dual_residual <= tol {
            converged = true;
            break;
        }
        if settings.residual_balancing {
            if state.primal_residual > 10.0 * state.dual_residual {
                rescale_penalty(&mut state, 2.0);
            } else if state.dual_residual > 10.0 * state.primal_residual {
                rescale_penalty(&mut state, 0.5);
            }
        }
    }

    let raw = Layout::new(state.consensus.clone())?;
    let (layout, rounded) = match round_to_feasible(&raw, &problem.region) {
        Some(l) => (l, true),
        None => (raw, false),
    };
    let mut cache = ScenarioCache::new(w);
    let polish = cache.refresh(&layout, &problem.rose, &problem.params, problem.tie_break, &config.inner)?;
    let yaws = cache.yaws(n);
    let power = expected_power(problem, &layout, &yaws);
    let message = if !rounded {
        Some("final layout could not be rounded to feasibility".to_string())
    } else if !converged {
        Some(format!(
            "consensus not reached: primal residual {:.3e} m, dual residual {:.3e} m",
            state.primal_residual, state.dual_residual
        ))
    } else {
        None
    };
    Ok(SolveReport {
        formulation: Formulation::Admm,
        n_turbines: n,
        scenarios: w,
        layout: layout.into_vec(),
        yaws,
        expected_power_w: power,
        objective_gwh: watts_to_gwh(power),
        trace,
        runtime_s: clock.elapsed().as_secs_f64(),
        outer_evaluations: evaluations,
        inner_evaluations: polish,
        warm_savings: None,
        converged: converged && rounded,
        message,
    })
}

/// Changes `μ` while keeping the scaled duals `ν / μ` fixed.
fn rescale_penalty(state: &mut AdmmState, factor: f64) {
    // The multipliers estimate the constraint duals, which do not depend on
    // the penalty, so only `μ` changes.
    state.penalty *= factor;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(copies: Vec<Vec<f64>>, duals: Vec<Vec<f64>>, penalty: f64) -> AdmmState {
        AdmmState {
            consensus: vec![0.0; copies[0].len()],
            yaws: vec![vec![0.0; copies[0].len() / 2]; copies.len()],
            copies,
            duals,
            penalty,
            primal_residual: 0.0,
            dual_residual: 0.0,
        }
    }

    #[test]
    fn coordination_without_duals_is_centroid() {
        let s = state(vec![vec![0.0, 4.0], vec![2.0, 8.0]], vec![vec![0.0; 2]; 2], 3.0);
        assert_eq!(admm_coordinate(&s).unwrap(), vec![1.0, 6.0]);
    }

    #[test]
    fn coordination_rejects_nonpositive_penalty() {
        let s = state(vec![vec![0.0, 4.0]], vec![vec![0.0; 2]], 0.0);
        assert!(admm_coordinate(&s).is_err());
    }

    #[test]
    fn duals_grow_linearly_with_fixed_disagreement() {
        let mut s = state(vec![vec![1.0, 3.0]], vec![vec![0.0; 2]], 0.5);
        for k in 1..=4 {
            admm_dual_update(&mut s);
            assert_eq!(s.duals[0], vec![k as f64, 3.0 * k as f64]);
        }
        let mut agreed = state(vec![vec![0.0, 0.0]], vec![vec![2.0, -1.0]], 0.5);
        admm_dual_update(&mut agreed);
        assert_eq!(agreed.duals[0], vec![2.0, -1.0]);
    }

    #[test]
    fn rescaling_leaves_multipliers() {
        let mut s = state(vec![vec![1.0, 3.0]], vec![vec![4.0, 2.0]], 2.0);
        rescale_penalty(&mut s, 0.5);
        assert_eq!(s.penalty, 1.0);
        assert_eq!(s.duals, vec![vec![4.0, 2.0]]);
        // ν/2μ doubles, so the shared layout moves further along the duals.
        assert_eq!(admm_coordinate(&s).unwrap(), vec![3.0, 4.0]);
    }
}
