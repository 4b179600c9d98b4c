use std::time::Instant;

use super::al::{AlEngine, AlObjective, AlOutcome};
use super::inner::{InnerSettings, ScenarioCache};
use super::repair::{repair_by_resampling, round_to_feasible};
use super::report::{expected_power, watts_to_gwh, Formulation, SolveReport, TraceEntry};
use super::{JointProblem, SolverConfig};
use crate::error::{FarmError, Result};
use crate::farm::Layout;

/// Expected optimal power at one layout and its envelope gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterValue {
    /// `Σ_ω p^ω P*(l, θ^ω)`, tie-break excluded, W.
    pub value: f64,
    /// The same sum with the tie-break term, which is what is maximized.
    pub regularized: f64,
    /// `Σ_ω p^ω ∇_l P(l, λ*^ω, θ^ω)`, W/m, ordered `[x; y]`.
    pub gradient: Vec<f64>,
    pub inner_evaluations: usize,
    pub converged: bool,
}

/// Solves every scenario's yaw problem at `layout` (warm from `cache`) and
/// returns the expected optimal power with its layout gradient.
pub fn outer_objective(
    problem: &JointProblem,
    layout: &Layout,
    cache: &mut ScenarioCache,
    settings: &InnerSettings,
) -> Result<OuterValue> {
    if cache.len() != problem.rose.len() {
        return Err(FarmError::DimensionMismatch {
            expected: problem.rose.len(),
            found: cache.len(),
        });
    }
    let inner_evaluations = cache.refresh(layout, &problem.rose, &problem.params, problem.tie_break, settings)?;
    let gradient = cache.layout_gradient(layout, &problem.rose, &problem.params);
    let mut value = 0.0;
    let mut regularized = 0.0;
    let mut converged = true;
    for (entry, p) in cache.entries.iter().zip(problem.rose.probabilities()) {
        let e = entry.as_ref().expect("refreshed");
        value += p * e.power;
        regularized += p * e.regularized;
        converged &= e.converged;
    }
    Ok(OuterValue {
        value,
        regularized,
        gradient,
        inner_evaluations,
        converged,
    })
}

/// Outer objective in the units the outer loop works in: negated and
/// scaled power over positions measured in rotor diameters.
struct MlrObjective<'a> {
    problem: &'a JointProblem,
    config: &'a SolverConfig,
    cache: ScenarioCache,
    scale: f64,
    inner_per_call: Vec<usize>,
    inner_failures: usize,
    accepted: Option<(Vec<f64>, Vec<Vec<f64>>)>,
    /// Whether the current step has already been halved by the guard.
    guarded: bool,
}

impl AlObjective for MlrObjective<'_> {
    fn evaluate(&mut self, z: &[f64], grad: &mut [f64]) -> Result<Option<f64>> {
        let d = self.problem.params.rotor_diameter;
        let layout = Layout::new(z.iter().map(|v| v * d).collect())?;
        let out = outer_objective(self.problem, &layout, &mut self.cache, &self.config.inner)?;
        self.inner_per_call.push(out.inner_evaluations);
        if !out.converged {
            self.inner_failures += 1;
        }
        if let Some((z_acc, yaws_acc)) = &self.accepted {
            let moved = z.iter().zip(z_acc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let jump = self
                .cache
                .entries
                .iter()
                .zip(yaws_acc)
                .flat_map(|(e, old)| e.as_ref().expect("refreshed").yaws.iter().zip(old).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            // A large jump of the maximizer means the envelope gradient may
            // not describe the step: halve it once and take what follows.
            if !self.guarded && jump > self.config.max_yaw_jump_deg.to_radians() && moved > 1e-3 {
                self.guarded = true;
                return Ok(None);
            }
        }
        for (g, v) in grad.iter_mut().zip(&out.gradient) {
            *g = -v * d * self.scale;
        }
        Ok(Some(-out.regularized * self.scale))
    }

    fn accept(&mut self, z: &[f64]) {
        let n = z.len() / 2;
        self.accepted = Some((z.to_vec(), self.cache.yaws(n)));
        self.guarded = false;
    }
}

pub(crate) fn check_start(problem: &JointProblem, start: &Layout, seed: u64) -> Result<Layout> {
    if start.len() != problem.n_turbines {
        return Err(FarmError::DimensionMismatch {
            expected: problem.n_turbines,
            found: start.len(),
        });
    }
    repair_by_resampling(start, &problem.region, seed)
}

pub(crate) fn position_bounds(problem: &JointProblem) -> (Vec<f64>, Vec<f64>) {
    let d = problem.params.rotor_diameter;
    let (lo, hi) = problem.region.bounds(problem.n_turbines);
    (lo.iter().map(|v| v / d).collect(), hi.iter().map(|v| v / d).collect())
}

pub(crate) fn trace_entries(outcome: &AlOutcome, scale: f64, d: f64) -> Vec<TraceEntry> {
    outcome
        .trace
        .iter()
        .enumerate()
        .map(|(k, t)| TraceEntry {
            iteration: k,
            objective_w: -t.objective / scale,
            max_violation_m: t.max_violation * d,
            penalty: t.penalty,
            evaluations: t.evaluations,
        })
        .collect()
}

/// Mean inner evaluations per call from the sixth outer evaluation on,
/// divided by the count of the first (cold) call.
pub(crate) fn warm_savings(per_call: &[usize]) -> Option<f64> {
    if per_call.len() < 6 || per_call[0] == 0 {
        return None;
    }
    let warm = &per_call[5..];
    let mean = warm.iter().sum::<usize>() as f64 / warm.len() as f64;
    Some(mean / per_call[0] as f64)
}

/// Maximizes expected optimal power over positions, with yaws optimized
/// per scenario inside every evaluation.
pub fn solve_mlr(problem: &JointProblem, start: &Layout, config: &SolverConfig) -> Result<SolveReport> {
    let clock = Instant::now();
    let start = check_start(problem, start, config.repair_seed)?;
    let n = problem.n_turbines;
    let d = problem.params.rotor_diameter;
    let scale = 1.0 / problem.power_scale();
    let (lower, upper) = position_bounds(problem);
    let engine = AlEngine {
        n_turbines: n,
        separation: problem.region.min_separation / d,
        lower,
        upper,
        settings: &config.outer,
        deadline: config.deadline(clock),
    };
    let mut objective = MlrObjective {
        problem,
        config,
        cache: ScenarioCache::new(problem.rose.len()),
        scale,
        inner_per_call: Vec::new(),
        inner_failures: 0,
        accepted: None,
        guarded: false,
    };
    let z0: Vec<f64> = start.as_slice().iter().map(|v| v / d).collect();
    let outcome = engine.run(&mut objective, &z0)?;

    let raw = Layout::new(outcome.x.iter().map(|v| v * d).collect())?;
    let (layout, rounded) = match round_to_feasible(&raw, &problem.region) {
        Some(l) => (l, true),
        None => (raw, false),
    };
    let polish = objective.cache.refresh(&layout, &problem.rose, &problem.params, problem.tie_break, &config.inner)?;
    let yaws = objective.cache.yaws(n);
    let power = expected_power(problem, &layout, &yaws);
    let runtime_s = clock.elapsed().as_secs_f64();

    let mut message = None;
    if !rounded {
        message = Some("final layout could not be rounded to feasibility".to_string());
    } else if objective.inner_failures > 0 {
        message = Some(format!("{} outer evaluations had unconverged inner solves", objective.inner_failures));
    }
    let inner_total = objective.inner_per_call.iter().sum::<usize>() + polish;
    Ok(SolveReport {
        formulation: Formulation::Mlr,
        n_turbines: n,
        scenarios: problem.rose.len(),
        layout: layout.into_vec(),
        yaws,
        expected_power_w: power,
        objective_gwh: watts_to_gwh(power),
        trace: trace_entries(&outcome, scale, d),
        runtime_s,
        outer_evaluations: outcome.evaluations,
        inner_evaluations: inner_total,
        warm_savings: warm_savings(&objective.inner_per_call),
        converged: outcome.converged && rounded,
        message,
    })
}
