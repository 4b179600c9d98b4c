use crate::compact::CompactModel;
use crate::state::dot;
use crate::{BoxError, BoxProblem, Objective, SolverState};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Number of stored correction pairs.
    pub memory: usize,
    /// Stop when `‖P(x - g) - x‖∞` falls to this value.
    pub pg_tol: f64,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1)` falls to this value.
    pub f_tol: f64,
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub contraction: f64,
    pub max_backtracks: usize,
    /// Keep the correction pairs of a previous state on hot start.
    pub carry_history: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            memory: 10,
            pg_tol: 1e-5,
            f_tol: 1e-5,
            max_iterations: 200,
            max_evaluations: 2000,
            armijo: 1e-4,
            contraction: 0.5,
            max_backtracks: 40,
            carry_history: false,
        }
    }
}

impl Settings {
    pub fn with_tolerances(mut self, pg_tol: f64, f_tol: f64) -> Self {
        self.pg_tol = pg_tol;
        self.f_tol = f_tol;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    ProjectedGradient,
    ObjectiveDecrease,
    MaxIterations,
    MaxEvaluations,
    LineSearchFailed,
    NonFinite,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::ProjectedGradient | Self::ObjectiveDecrease)
    }
}

#[derive(Debug, Clone)]
pub struct BoxResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub converged: bool,
    pub termination: Termination,
    /// Iterations performed by this call.
    pub iterations: usize,
    /// Objective evaluations performed by this call.
    pub evaluations: usize,
    /// Final state; its counters are cumulative across hot starts.
    pub state: SolverState,
}

pub enum Start<'a> {
    Point(&'a [f64]),
    State(&'a SolverState),
}

/// Minimizes `problem` from a point or from a previously captured state.
pub fn minimize<O: Objective>(
    problem: &mut BoxProblem<O>,
    start: Start<'_>,
    settings: &Settings,
) -> Result<BoxResult, BoxError> {
    let n = problem.dim();
    let mut state = match start {
        Start::Point(x) => {
            if x.len() != n {
                return Err(BoxError::DimensionMismatch {
                    expected: n,
                    found: x.len(),
                });
            }
            SolverState::new(x.to_vec(), settings.memory)
        }
        Start::State(prev) => {
            if prev.dim() != n {
                return Err(BoxError::DimensionMismatch {
                    expected: n,
                    found: prev.dim(),
                });
            }
            let mut st = prev.clone();
            st.memory = settings.memory;
            if !settings.carry_history {
                st.clear_history();
            }
            while st.pairs() > st.memory {
                st.steps.pop_front();
                st.grad_diffs.pop_front();
            }
            st
        }
    };
    problem.project(&mut state.x);
    run(problem, state, settings)
}

/// Resumes from `previous` on a (possibly changed) problem of the same size.
pub fn hot_start<O: Objective>(
    previous: &SolverState,
    problem: &mut BoxProblem<O>,
    settings: &Settings,
) -> Result<BoxResult, BoxError> {
    minimize(problem, Start::State(previous), settings)
}

fn run<O: Objective>(
    problem: &mut BoxProblem<O>,
    mut state: SolverState,
    settings: &Settings,
) -> Result<BoxResult, BoxError> {
    let n = problem.dim();
    let mut g = vec![0.0; n];
    let mut f = problem
        .objective
        .evaluate(&state.x, &mut g)
        .filter(|v| v.is_finite())
        .ok_or(BoxError::NonFiniteStart)?;
    if g.iter().any(|v| !v.is_finite()) {
        return Err(BoxError::NonFiniteStart);
    }
    problem.objective.accept(&state.x);
    let mut evaluations = 1;
    let mut iterations = 0;
    let mut x_trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];

    let finish = |state: SolverState, f, g, termination: Termination, iterations, evaluations| {
        let mut state = state;
        state.iterations += iterations;
        state.evaluations += evaluations;
        Ok(BoxResult {
            x: state.x.clone(),
            value: f,
            gradient: g,
            converged: termination.is_converged(),
            termination,
            iterations,
            evaluations,
            state,
        })
    };

    if problem.projected_gradient_norm(&state.x, &g) <= settings.pg_tol {
        return finish(state, f, g, Termination::ProjectedGradient, 0, evaluations);
    }

    let mut retried = false;
    loop {
        if iterations >= settings.max_iterations {
            return finish(state, f, g, Termination::MaxIterations, iterations, evaluations);
        }
        if evaluations >= settings.max_evaluations {
            return finish(state, f, g, Termination::MaxEvaluations, iterations, evaluations);
        }

        let Some(dir) = search_direction(problem, &mut state, &g) else {
            // Stationary for the model: the projected gradient vanishes.
            return finish(state, f, g, Termination::ProjectedGradient, iterations, evaluations);
        };
        let slope = dot(&g, &dir);
        let dnorm = dot(&dir, &dir).sqrt();
        // Without curvature information the direction is a raw gradient, so
        // the first trial is normalized to unit length.
        let mut step = if state.theta.is_none() {
            (1.0 / dnorm).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            if evaluations >= settings.max_evaluations {
                break;
            }
            for i in 0..n {
                x_trial[i] = state.x[i] + step * dir[i];
            }
            problem.project(&mut x_trial);
            evaluations += 1;
            match problem.objective.evaluate(&x_trial, &mut g_trial) {
                Some(ft)
                    if ft.is_finite()
                        && g_trial.iter().all(|v| v.is_finite())
                        && ft <= f + settings.armijo * step * slope =>
                {
                    accepted = Some(ft);
                    break;
                }
                _ => step *= settings.contraction,
            }
        }

        let Some(f_new) = accepted else {
            if !retried && state.pairs() > 0 {
                retried = true;
                state.clear_history();
                state.theta = None;
                continue;
            }
            let termination = if evaluations >= settings.max_evaluations {
                Termination::MaxEvaluations
            } else {
                Termination::LineSearchFailed
            };
            return finish(state, f, g, termination, iterations, evaluations);
        };
        retried = false;
        iterations += 1;
        problem.objective.accept(&x_trial);

        let s: Vec<f64> = x_trial.iter().zip(&state.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_trial.iter().zip(&g).map(|(a, b)| a - b).collect();
        state.push_pair(s, y);
        state.x.copy_from_slice(&x_trial);
        g.copy_from_slice(&g_trial);
        let f_old = f;
        f = f_new;

        if problem.projected_gradient_norm(&state.x, &g) <= settings.pg_tol {
            return finish(state, f, g, Termination::ProjectedGradient, iterations, evaluations);
        }
        let scale = f_old.abs().max(f.abs()).max(1.0);
        if (f_old - f) / scale <= settings.f_tol {
            return finish(state, f, g, Termination::ObjectiveDecrease, iterations, evaluations);
        }
    }
}

/// Cauchy point plus subspace refinement; falls back to projected steepest
/// descent when the limited-memory model is unusable. `None` means no
/// feasible descent direction exists.
fn search_direction<O: Objective>(
    problem: &BoxProblem<O>,
    state: &mut SolverState,
    g: &[f64],
) -> Option<Vec<f64>> {
    let (lower, upper) = (problem.lower(), problem.upper());
    for attempt in 0..2 {
        let model = match CompactModel::new(state) {
            Some(m) => m,
            None => {
                state.clear_history();
                continue;
            }
        };
        let (xcp, c) = model.cauchy_point(&state.x, g, lower, upper);
        let xbar = model.subspace_min(&state.x, g, lower, upper, &xcp, &c);
        let dir: Vec<f64> = xbar.iter().zip(&state.x).map(|(a, b)| a - b).collect();
        let slope = dot(g, &dir);
        if dir.iter().all(|&v| v == 0.0) {
            return None;
        }
        if slope < 0.0 && slope.is_finite() {
            return Some(dir);
        }
        if attempt == 0 {
            state.clear_history();
        }
    }
    // Projected gradient step as the last resort.
    let dir: Vec<f64> = state
        .x
        .iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((x, gi), (l, u))| (x - gi).clamp(*l, *u) - x)
        .collect();
    if dot(g, &dir) < 0.0 {
        Some(dir)
    } else {
        None
    }
}
