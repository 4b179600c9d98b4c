use boxsolve::{hot_start, minimize, BoxProblem, FnObjective, Settings, SolverState, Start};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::farm::{Layout, PhysicalParams, WindRose};
use crate::gradient::power_gradient;
use crate::wake::{power_and_yaw_gradient, relative_coordinates, WakeConstants};

/// Tolerances of the inner yaw problems. The inner objective is scaled by the
/// farm's nominal power, so the projected-gradient tolerance is relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerSettings {
    pub pg_tol: f64,
    pub f_tol: f64,
    pub max_iterations: usize,
    /// Keep correction pairs across warm starts instead of only the iterate.
    pub carry_history: bool,
}

impl Default for InnerSettings {
    fn default() -> Self {
        Self {
            pg_tol: 1e-5,
            f_tol: 1e-9,
            max_iterations: 100,
            carry_history: false,
        }
    }
}

impl InnerSettings {
    fn box_settings(&self) -> Settings {
        Settings {
            carry_history: self.carry_history,
            ..Settings::default()
                .with_tolerances(self.pg_tol, self.f_tol)
                .with_max_iterations(self.max_iterations)
        }
    }
}

/// `-[P(l, λ, θ) - ε P_1 ‖λ‖² / N_T]` and its yaw gradient.
pub fn inner_objective(
    layout: &Layout,
    yaws: &[f64],
    wind_angle: f64,
    params: &PhysicalParams,
    tie_break: f64,
) -> (f64, Vec<f64>) {
    let k = WakeConstants::new(params);
    let rel = relative_coordinates(layout, wind_angle);
    let mut g = vec![0.0; yaws.len()];
    let v = regularized(&k, &rel, yaws, tie_break, params.single_turbine_power(), &mut g);
    (-v, g.iter().map(|x| -x).collect())
}

/// Regularized power; writes its yaw gradient into `g`.
fn regularized(
    k: &WakeConstants,
    rel: &crate::wake::RelativeCoords,
    yaws: &[f64],
    tie_break: f64,
    p1: f64,
    g: &mut [f64],
) -> f64 {
    let n = yaws.len() as f64;
    let power = power_and_yaw_gradient(k, rel, yaws, g);
    let weight = tie_break * p1 / n;
    let mut reg = 0.0;
    for (gi, y) in g.iter_mut().zip(yaws) {
        reg += y * y;
        *gi -= 2.0 * weight * y;
    }
    power - weight * reg
}

/// Optimal yaws for one scenario at one layout, with what is needed to
/// resume from them.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub yaws: Vec<f64>,
    /// `P(l, λ*, θ)` without the tie-break term.
    pub power: f64,
    /// The maximized value including the tie-break term.
    pub regularized: f64,
    pub state: SolverState,
    /// Layout that produced this entry.
    pub stamp: Vec<f64>,
    /// Evaluations spent by the solve that produced this entry.
    pub evaluations: usize,
    pub converged: bool,
}

impl CacheEntry {
    pub fn is_for(&self, layout: &Layout) -> bool {
        self.stamp == layout.as_slice()
    }
}

/// Solves `max_{λ ∈ Λ} P(l, λ, θ) - ε P_1 ‖λ‖²/N_T`, hot-starting from
/// `previous` when given.
pub fn optimal_power(
    layout: &Layout,
    wind_angle: f64,
    params: &PhysicalParams,
    tie_break: f64,
    previous: Option<&CacheEntry>,
    settings: &InnerSettings,
) -> Result<CacheEntry> {
    let n = layout.len();
    let k = WakeConstants::new(params);
    let rel = relative_coordinates(layout, wind_angle);
    let p1 = params.single_turbine_power();
    let scale = 1.0 / (n as f64 * p1);
    let objective = FnObjective(|y: &[f64], g: &mut [f64]| {
        let v = regularized(&k, &rel, y, tie_break, p1, g);
        g.iter_mut().for_each(|x| *x *= -scale);
        -v * scale
    });
    let mut problem = BoxProblem::new(objective, vec![params.yaw_min; n], vec![params.yaw_max; n])?;
    let box_settings = settings.box_settings();
    let result = match previous {
        Some(prev) if prev.state.dim() == n => hot_start(&prev.state, &mut problem, &box_settings)?,
        _ => {
            let start = vec![0.0f64.clamp(params.yaw_min, params.yaw_max); n];
            minimize(&mut problem, Start::Point(&start), &box_settings)?
        }
    };
    let yaws = result.x.clone();
    let mut g = vec![0.0; n];
    let power = power_and_yaw_gradient(&k, &rel, &yaws, &mut g);
    Ok(CacheEntry {
        regularized: -result.value / scale,
        power,
        yaws,
        stamp: layout.as_slice().to_vec(),
        evaluations: result.evaluations,
        converged: result.converged,
        state: result.state,
    })
}

/// Per-scenario inner solutions; entries are independent so scenarios can
/// be solved concurrently.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioCache {
    pub entries: Vec<Option<CacheEntry>>,
}

impl ScenarioCache {
    pub fn new(scenarios: usize) -> Self {
        Self {
            entries: vec![None; scenarios],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Cached yaws per scenario (zeros where nothing is cached).
    pub fn yaws(&self, n: usize) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .map(|e| e.as_ref().map_or_else(|| vec![0.0; n], |e| e.yaws.clone()))
            .collect()
    }

    /// Re-solves every scenario at `layout`, warm where possible. Returns
    /// the inner evaluations spent.
    pub(crate) fn refresh(
        &mut self,
        layout: &Layout,
        rose: &WindRose,
        params: &PhysicalParams,
        tie_break: f64,
        settings: &InnerSettings,
    ) -> Result<usize> {
        let solved: Vec<Result<CacheEntry>> = self
            .entries
            .par_iter()
            .zip(rose.angles().par_iter())
            .map(|(entry, &angle)| optimal_power(layout, angle, params, tie_break, entry.as_ref(), settings))
            .collect();
        let mut evaluations = 0;
        for (slot, entry) in self.entries.iter_mut().zip(solved) {
            let entry = entry?;
            evaluations += entry.evaluations;
            *slot = Some(entry);
        }
        Ok(evaluations)
    }

    /// `Σ_ω p^ω ∇_l P(l, λ*^ω, θ^ω)` at the cached maximizers.
    pub(crate) fn layout_gradient(&self, layout: &Layout, rose: &WindRose, params: &PhysicalParams) -> Vec<f64> {
        let parts: Vec<Vec<f64>> = self
            .entries
            .par_iter()
            .zip(rose.angles().par_iter())
            .map(|(entry, &angle)| {
                let yaws = &entry.as_ref().expect("cache refreshed before differentiation").yaws;
                power_gradient(layout, yaws, angle, params).1.grad_layout
            })
            .collect();
        let mut total = vec![0.0; 2 * layout.len()];
        for (part, p) in parts.iter().zip(rose.probabilities()) {
            for (t, v) in total.iter_mut().zip(part) {
                *t += p * v;
            }
        }
        total
    }
}
