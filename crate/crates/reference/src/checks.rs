use farmopt::bench::{farm_region_for, random_feasible_layout, sample_wind_rose};
use farmopt::error::Result;
use farmopt::farm::{default_params, Layout};
use farmopt::gradient::{default_fd_steps, max_relative_error, power_gradient};
use farmopt::mlr::{outer_objective, InnerSettings, JointProblem, ScenarioCache};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Oracle;

/// Worst error over a suite of random instances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSummary {
    pub instances: usize,
    pub max_relative_error: f64,
}

/// Components smaller than this fraction of the gradient norm are compared
/// against the fraction instead of their own magnitude.
const GRADIENT_FLOOR: f64 = 1e-8;
const ENVELOPE_FLOOR: f64 = 1e-6;
/// Absolute floor of the envelope comparison, in units of nominal farm power
/// per rotor diameter. Far below any gradient that moves a layout, yet
/// thousands of times above the roundoff of differencing an `f64` map.
const ENVELOPE_ABSOLUTE: f64 = 1e-9;
/// Position step for differencing the optimal-power map, m.
const ENVELOPE_STEP: f64 = 0.05;

/// Exact `[x; y; λ]` power gradients against central differences of the
/// double-double reference, on `instances` random farms of 2 to 8 turbines
/// with arbitrary yaws and wind directions.
pub fn gradient_suite(instances: usize, seed: u64) -> CheckSummary {
    let p = default_params();
    let oracle = Oracle { p };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(2..=8);
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.random_range(0.0..2000.0), rng.random_range(0.0..2000.0)))
            .collect();
        let yaws: Vec<f64> = (0..n).map(|_| rng.random_range(p.yaw_min..=p.yaw_max)).collect();
        let wind = rng.random_range(0.0..std::f64::consts::TAU);
        let layout = Layout::from_points(&pts).expect("finite points");
        let (_, g) = power_gradient(&layout, &yaws, wind, &p);
        let mut exact = g.grad_layout;
        exact.extend(g.grad_yaw);
        let fd = oracle.fd_gradient(&pts, &yaws, wind, &default_fd_steps(n));
        worst = worst.max(max_relative_error(&exact, &fd, GRADIENT_FLOOR));
    }
    CheckSummary {
        instances,
        max_relative_error: worst,
    }
}

/// Envelope gradients of the expected optimal power against central
/// differences of the re-solved map, on `instances` random feasible farms
/// of 2 to 5 turbines with 1 to 4 sampled wind scenarios. Each probe
/// re-solves every scenario starting from the maximizers at the base
/// layout, so the differences follow the same local branch.
pub fn envelope_suite(instances: usize, seed: u64) -> Result<CheckSummary> {
    let p = default_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let settings = InnerSettings {
        pg_tol: 1e-11,
        f_tol: 0.0,
        max_iterations: 500,
        carry_history: false,
    };
    let mut worst: f64 = 0.0;
    for k in 0..instances {
        let n = rng.random_range(2..=5);
        let w = rng.random_range(1..=4);
        let case_seed = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
        let rose = sample_wind_rose(w, case_seed)?;
        let region = farm_region_for(n, &p)?;
        let layout = random_feasible_layout(&region, n, case_seed)?;
        let problem = JointProblem::new(p, region, rose, n);

        let mut base = ScenarioCache::new(w);
        let exact = outer_objective(&problem, &layout, &mut base, &settings)?.gradient;
        let mut fd = Vec::with_capacity(2 * n);
        let mut probe = layout.as_slice().to_vec();
        for i in 0..2 * n {
            let x = probe[i];
            let mut side = |v: f64| -> Result<f64> {
                probe[i] = v;
                let mut cache = base.clone();
                let l = Layout::new(probe.clone())?;
                Ok(outer_objective(&problem, &l, &mut cache, &settings)?.regularized)
            };
            let (up, down) = (x + ENVELOPE_STEP, x - ENVELOPE_STEP);
            let fu = side(up)?;
            let fdn = side(down)?;
            probe[i] = x;
            fd.push((fu - fdn) / (up - down));
        }
        let absolute = ENVELOPE_ABSOLUTE * problem.no_wake_bound() / p.rotor_diameter;
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in exact.iter().zip(&fd) {
            let scale = b.abs().max(ENVELOPE_FLOOR * norm).max(absolute);
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(CheckSummary {
        instances,
        max_relative_error: worst,
    })
}
