use std::time::Instant;

use rayon::prelude::*;

use super::al::{AlEngine, AlObjective};
use super::outer::{check_start, position_bounds, trace_entries};
use super::repair::round_to_feasible;
use super::report::{expected_power, watts_to_gwh, Formulation, SolveReport};
use super::{JointProblem, SolverConfig};
use crate::error::{FarmError, Result};
use crate::farm::Layout;
use crate::gradient::power_gradient;

/// All variables at once: `[x; y] / D` followed by each scenario's yaws.
struct JointObjective<'a> {
    problem: &'a JointProblem,
    scale: f64,
}

impl AlObjective for JointObjective<'_> {
    fn evaluate(&mut self, v: &[f64], grad: &mut [f64]) -> Result<Option<f64>> {
        let pr = self.problem;
        let n = pr.n_turbines;
        let d = pr.params.rotor_diameter;
        let layout = Layout::new(v[..2 * n].iter().map(|z| z * d).collect())?;
        let weight = pr.tie_break * pr.params.single_turbine_power() / n as f64;
        let parts: Vec<(f64, Vec<f64>, Vec<f64>)> = pr
            .rose
            .angles()
            .par_iter()
            .enumerate()
            .map(|(w, &angle)| {
                let yaws = &v[2 * n + w * n..2 * n + (w + 1) * n];
                let (p, g) = power_gradient(&layout, yaws, angle, &pr.params);
                let reg: f64 = yaws.iter().map(|y| y * y).sum();
                let gy = g.grad_yaw.iter().zip(yaws).map(|(gi, y)| gi - 2.0 * weight * y).collect();
                (p - weight * reg, g.grad_layout, gy)
            })
            .collect();
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (w, ((p, gl, gy), prob)) in parts.into_iter().zip(pr.rose.probabilities()).enumerate() {
            value += prob * p;
            for (g, x) in grad[..2 * n].iter_mut().zip(&gl) {
                *g -= prob * x * d * self.scale;
            }
            for (g, x) in grad[2 * n + w * n..2 * n + (w + 1) * n].iter_mut().zip(&gy) {
                *g = -prob * x * self.scale;
            }
        }
        Ok(Some(-value * self.scale))
    }
}

/// `Σ_ω p^ω P(l, λ^ω, θ^ω)`, tie-break excluded, W.
pub fn joint_objective(problem: &JointProblem, layout: &Layout, yaws: &[Vec<f64>]) -> Result<f64> {
    let n = problem.n_turbines;
    if layout.len() != n || yaws.len() != problem.rose.len() || yaws.iter().any(|y| y.len() != n) {
        return Err(FarmError::DimensionMismatch {
            expected: n * (problem.rose.len() + 1),
            found: layout.len() + yaws.iter().map(Vec::len).sum::<usize>(),
        });
    }
    Ok(expected_power(problem, layout, yaws))
}

/// Maximizes expected power over positions and all scenario yaws together.
/// Yaws start at zero unless `start_yaws` is given.
pub fn solve_joint(
    problem: &JointProblem,
    start: &Layout,
    start_yaws: Option<&[Vec<f64>]>,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let clock = Instant::now();
    let start = check_start(problem, start, config.repair_seed)?;
    let n = problem.n_turbines;
    let w = problem.rose.len();
    let d = problem.params.rotor_diameter;
    let scale = 1.0 / problem.power_scale();
    let p = &problem.params;

    let (mut lower, mut upper) = position_bounds(problem);
    lower.extend(std::iter::repeat_n(p.yaw_min, n * w));
    upper.extend(std::iter::repeat_n(p.yaw_max, n * w));
    let mut x0: Vec<f64> = start.as_slice().iter().map(|v| v / d).collect();
    match start_yaws {
        Some(ys) => {
            if ys.len() != w || ys.iter().any(|y| y.len() != n) {
                return Err(FarmError::DimensionMismatch {
                    expected: n * w,
                    found: ys.iter().map(Vec::len).sum(),
                });
            }
            for y in ys {
                x0.extend(y.iter().map(|a| a.clamp(p.yaw_min, p.yaw_max)));
            }
        }
        None => x0.extend(std::iter::repeat_n(0.0f64.clamp(p.yaw_min, p.yaw_max), n * w)),
    }

    let engine = AlEngine {
        n_turbines: n,
        separation: problem.region.min_separation / d,
        lower,
        upper,
        settings: &config.outer,
        deadline: config.deadline(clock),
    };
    let mut objective = JointObjective { problem, scale };
    let outcome = engine.run(&mut objective, &x0)?;

    let raw = Layout::new(outcome.x[..2 * n].iter().map(|v| v * d).collect())?;
    let (layout, rounded) = match round_to_feasible(&raw, &problem.region) {
        Some(l) => (l, true),
        None => (raw, false),
    };
    let yaws: Vec<Vec<f64>> = outcome.x[2 * n..].chunks(n).map(<[f64]>::to_vec).collect();
    let power = expected_power(problem, &layout, &yaws);
    let runtime_s = clock.elapsed().as_secs_f64();
    Ok(SolveReport {
        formulation: Formulation::Joint,
        n_turbines: n,
        scenarios: w,
        layout: layout.into_vec(),
        yaws,
        expected_power_w: power,
        objective_gwh: watts_to_gwh(power),
        trace: trace_entries(&outcome, scale, d),
        runtime_s,
        outer_evaluations: outcome.evaluations,
        inner_evaluations: 0,
        warm_savings: None,
        converged: outcome.converged && rounded,
        message: (!rounded).then(|| "final layout could not be rounded to feasibility".to_string()),
    })
}
