//! Augmented Lagrangian outer loop for the spacing constraints
//! `‖z_i - z_j‖² / s² - 1 ≥ 0` on normalized positions `z = l / D`, with
//! region bounds (and any yaw bounds) left to the box solver.

use std::time::Instant;

use boxsolve::{hot_start, minimize, BoxProblem, Objective, Settings, SolverState, Start};

use super::AlSettings;
use crate::error::{FarmError, Result};

/// Smooth objective to minimize; the first `2 N_T` variables are normalized
/// positions `[x; y] / D`.
pub(crate) trait AlObjective {
    /// `Ok(None)` rejects the point, which makes the line search back off.
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Result<Option<f64>>;
    fn accept(&mut self, _x: &[f64]) {}
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AlIterate {
    /// Objective at the subproblem solution, without penalty terms.
    pub objective: f64,
    pub merit: f64,
    /// Worst spacing deficit, in separation units.
    pub max_violation: f64,
    pub penalty: f64,
    pub evaluations: usize,
}

pub(crate) struct AlOutcome {
    pub x: Vec<f64>,
    pub trace: Vec<AlIterate>,
    pub converged: bool,
    pub evaluations: usize,
}

pub(crate) struct AlEngine<'a> {
    pub n_turbines: usize,
    /// Minimum separation in normalized units.
    pub separation: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub settings: &'a AlSettings,
    /// Stop, unconverged, once this instant passes.
    pub deadline: Option<Instant>,
}

/// Index pairs `(i, j)`, `i < j`, in a fixed order.
fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

struct Penalized<'o, O> {
    inner: &'o mut O,
    n: usize,
    pairs: &'o [(usize, usize)],
    sep2: f64,
    multipliers: &'o [f64],
    penalty: f64,
    error: Option<FarmError>,
    last_raw: f64,
    accepted_raw: f64,
    deadline: Option<Instant>,
    evaluations: usize,
}

impl<O: AlObjective> Objective for Penalized<'_, O> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        if self.error.is_some() {
            return None;
        }
        // Rejecting every trial past the deadline ends the subproblem
        // through a failed line search; the starting point must still be
        // evaluated.
        if self.evaluations > 0 && self.deadline.is_some_and(|d| Instant::now() >= d) {
            return None;
        }
        self.evaluations += 1;
        let raw = match self.inner.evaluate(x, grad) {
            Ok(Some(v)) => v,
            Ok(None) => return None,
            Err(e) => {
                self.error = Some(e);
                return None;
            }
        };
        self.last_raw = raw;
        let n = self.n;
        let mu = self.penalty;
        let mut total = raw;
        for (&(i, j), &y) in self.pairs.iter().zip(self.multipliers) {
            let (dx, dy) = (x[i] - x[j], x[n + i] - x[n + j]);
            let c = (dx * dx + dy * dy) / self.sep2 - 1.0;
            // PHR term for an inequality c ≥ 0.
            if mu * c < y {
                total += -y * c + 0.5 * mu * c * c;
                let w = (mu * c - y) * 2.0 / self.sep2;
                grad[i] += w * dx;
                grad[j] -= w * dx;
                grad[n + i] += w * dy;
                grad[n + j] -= w * dy;
            } else {
                total -= y * y / (2.0 * mu);
            }
        }
        Some(total)
    }

    fn accept(&mut self, x: &[f64]) {
        self.accepted_raw = self.last_raw;
        self.inner.accept(x);
    }
}

/// Worst spacing deficit of normalized positions `x`, in the same units.
pub(crate) fn max_violation(x: &[f64], n: usize, separation: f64) -> f64 {
    pairs(n)
        .into_iter()
        .map(|(i, j)| separation - (x[i] - x[j]).hypot(x[n + i] - x[n + j]))
        .fold(0.0, f64::max)
}

impl AlEngine<'_> {
    pub fn run<O: AlObjective>(&self, objective: &mut O, x0: &[f64]) -> Result<AlOutcome> {
        let n = self.n_turbines;
        let s = self.settings;
        let pairs = pairs(n);
        let sep2 = self.separation * self.separation;
        let mut multipliers = vec![0.0; pairs.len()];
        let mut penalty = s.initial_penalty;
        let box_settings = Settings {
            carry_history: s.carry_history,
            ..Settings::default()
                .with_tolerances(s.subproblem_pg_tol, s.subproblem_f_tol)
                .with_max_iterations(s.subproblem_iterations)
        };

        let mut x = x0.to_vec();
        let mut state: Option<SolverState> = None;
        let mut trace = Vec::new();
        let mut evaluations = 0;
        let mut previous: Option<f64> = None;
        let mut last_violation = max_violation(&x, n, self.separation);
        let mut converged = false;
        
        for _ in 0..s.max_outer_iterations {
            if self.deadline.is_some_and(|d| Instant::now() >= d) {
                break;
            }
            let wrapped = Penalized {
                inner: &mut *objective,
                n,
                pairs: &pairs,
                sep2,
                multipliers: &multipliers,
                penalty,
                error: None,
                last_raw: f64::NAN,
                accepted_raw: f64::NAN,
                deadline: self.deadline,
                evaluations: 0,
            };
            let mut problem = BoxProblem::new(wrapped, self.lower.clone(), self.upper.clone())?;
            let result = match &state {
                Some(st) => hot_start(st, &mut problem, &box_settings),
                None => minimize(&mut problem, Start::Point(&x), &box_settings),
            };
            if let Some(e) = problem.objective.error.take() {
                return Err(e);
            }
            let result = result?;
            evaluations += result.evaluations;
            x = result.x.clone();
            let objective_value = problem.objective.accepted_raw;
            state = Some(result.state);

            let violation = max_violation(&x, n, self.separation);
            for (&(i, j), y) in pairs.iter().zip(multipliers.iter_mut()) {
                let c = ((x[i] - x[j]).powi(2) + (x[n + i] - x[n + j]).powi(2)) / sep2 - 1.0;
                *y = (*y - penalty * c).max(0.0);
            }
            trace.push(AlIterate {
                objective: objective_value,
                merit: result.value,
                max_violation: violation,
                penalty,
                evaluations: result.evaluations,
            });

            let stalled = previous.is_some_and(|p: f64| {
                (objective_value - p).abs() <= s.objective_tol * objective_value.abs().max(1e-12)
            });
            if stalled && violation <= s.feasibility_tol {
                converged = true;
                break;
            }
            if violation > s.feasibility_tol && violation > s.required_shrink * last_violation {
                penalty *= s.penalty_growth;
            }
            last_violation = violation;
            previous = Some(objective_value);
        }

        Ok(AlOutcome {
            x,
            trace,
            converged,
            evaluations,
        })
    }
}
