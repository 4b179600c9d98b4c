//! Experiment protocol: sampled wind roses, density-matched farm regions,
//! random feasible starts, and batch runs written to CSV and JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{admm_solve, AdmmSettings};
use crate::error::{FarmError, Result};
use crate::farm::{FarmRegion, Layout, PhysicalParams, WindRose};
use crate::mlr::{solve_joint, solve_mlr, Formulation, JointProblem, SolveReport, SolverConfig};

/// Cap on rejection-sampling draws for one layout.
pub const MAX_DRAWS: usize = 1_000_000;

/// Independent random streams, one per purpose, so that drawing more of
/// one kind never shifts another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Rose = 1,
    Layout = 2,
    Repair = 3,
}

/// ChaCha8 seeded with `seed` on the stream reserved for `purpose`.
pub fn stream_rng(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// `W` equal bins with probabilities drawn uniformly from the simplex.
pub fn sample_wind_rose(w: usize, seed: u64) -> Result<WindRose> {
    if w == 0 {
        return Err(FarmError::InvalidRose("at least one scenario required".into()));
    }
    let mut rng = stream_rng(seed, Stream::Rose);
    // Normalized unit exponentials are Dirichlet(1, ..., 1).
    let draws: Vec<f64> = (0..w).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    WindRose::new(draws.iter().map(|v| v / total).collect())
}

/// Square region `1.3 √N · 4D` on a side, which keeps turbine density fixed
/// across farm sizes.
pub fn farm_region_for(n: usize, params: &PhysicalParams) -> Result<FarmRegion> {
    if n == 0 {
        return Err(FarmError::InvalidParams("at least one turbine required".into()));
    }
    let side = 1.3 * (n as f64).sqrt() * params.min_separation();
    FarmRegion::square(side, params)
}

/// Uniform positions, redrawing any turbine that lands too close to one
/// already placed.
pub fn random_feasible_layout(region: &FarmRegion, n: usize, seed: u64) -> Result<Layout> {
    if n == 0 {
        return Err(FarmError::InvalidLayout("at least one turbine required".into()));
    }
    let mut rng = stream_rng(seed, Stream::Layout);
    let sep = region.min_separation;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut draws = 0;
    while pts.len() < n {
        if draws >= MAX_DRAWS {
            return Err(FarmError::InfeasibleDensity { n, draws });
        }
        draws += 1;
        let c = (rng.random_range(0.0..=region.x_max), rng.random_range(0.0..=region.y_max));
        if pts.iter().all(|p| (p.0 - c.0).hypot(p.1 - c.1) >= sep) {
            pts.push(c);
        }
    }
    Layout::from_points(&pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub turbine_counts: Vec<usize>,
    pub scenarios: usize,
    pub seeds: Vec<u64>,
    pub formulations: Vec<Formulation>,
    /// Wall-clock budget per run, s.
    pub budget_s: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub admm: AdmmSettings,
    /// Physical parameter overrides as `key = value` text.
    #[serde(default)]
    pub params: Option<toml::Table>,
    /// Permit farms larger than 49 turbines.
    #[serde(default)]
    pub allow_large: bool,
    /// Run seeds concurrently; runtimes are then not comparable.
    #[serde(default)]
    pub parallel_runs: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| FarmError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| FarmError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(FarmError::Config(m.to_string()));
        if self.turbine_counts.is_empty() || self.turbine_counts.contains(&0) {
            return bad("turbine_counts must be nonempty and positive");
        }
        if !self.allow_large && self.turbine_counts.iter().any(|&n| n > 49) {
            return bad("farms above 49 turbines need allow_large = true (expect runs of hours)");
        }
        if self.scenarios == 0 {
            return bad("scenarios must be at least 1");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.formulations.is_empty() {
            return bad("at least one formulation is required");
        }
        if !(self.budget_s > 0.0) {
            return bad("budget_s must be positive");
        }
        self.physical_params().map(|_| ())
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        match &self.params {
            None => Ok(PhysicalParams::default()),
            Some(t) => PhysicalParams::default().with_overrides(&t.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub formulation: Formulation,
    pub n_turbines: usize,
    pub w: usize,
    pub seed: u64,
    pub runtime_s: f64,
    pub objective_gwh: f64,
    pub converged: bool,
    pub inner_evals: usize,
    pub warm_savings: Option<f64>,
}

/// Builds the instance for one `(N_T, W, seed)` cell.
pub fn build_instance(n: usize, w: usize, seed: u64, params: &PhysicalParams) -> Result<(JointProblem, Layout)> {
    let rose = sample_wind_rose(w, seed)?;
    let region = farm_region_for(n, params)?;
    let start = random_feasible_layout(&region, n, seed)?;
    Ok((JointProblem::new(*params, region, rose, n), start))
}

/// Runs one formulation on one instance, timing only the solver call.
pub fn run_single(
    formulation: Formulation,
    problem: &JointProblem,
    start: &Layout,
    solver: &SolverConfig,
    admm: &AdmmSettings,
    budget: Duration,
) -> Result<SolveReport> {
    let mut solver = solver.clone();
    solver.time_limit_s = Some(budget.as_secs_f64());
    let clock = Instant::now();
    let mut report = match formulation {
        Formulation::Mlr => solve_mlr(problem, start, &solver)?,
        Formulation::Joint => solve_joint(problem, start, None, &solver)?,
        Formulation::Admm => admm_solve(problem, start, &solver, admm)?,
    };
    report.runtime_s = clock.elapsed().as_secs_f64();
    Ok(report)
}

fn report_name(f: Formulation, n: usize, w: usize, seed: u64) -> String {
    format!("{}_n{n}_w{w}_s{seed}.json", f.tag().to_ascii_lowercase())
}

/// Runs every `(formulation, N_T, seed)` cell, writing `results.csv`,
/// `summary.csv`, and one report per run under `output_dir`. A failing run
/// becomes a non-converged row.
pub fn run_experiments(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let params = config.physical_params()?;
    let out = &config.output_dir;
    let reports_dir = out.join("reports");
    std::fs::create_dir_all(&reports_dir).map_err(|e| FarmError::io(&reports_dir, e))?;

    let mut jobs = Vec::new();
    for &f in &config.formulations {
        for &n in &config.turbine_counts {
            for &seed in &config.seeds {
                jobs.push((f, n, seed));
            }
        }
    }
    let budget = Duration::from_secs_f64(config.budget_s);
    let run = |&(f, n, seed): &(Formulation, usize, u64)| -> ResultRecord {
        let w = config.scenarios;
        let outcome = build_instance(n, w, seed, &params)
            .and_then(|(problem, start)| run_single(f, &problem, &start, &config.solver, &config.admm, budget));
        match outcome {
            Ok(report) => {
                let path = reports_dir.join(report_name(f, n, w, seed));
                let written = report.write(&path);
                ResultRecord {
                    formulation: f,
                    n_turbines: n,
                    w,
                    seed,
                    runtime_s: report.runtime_s,
                    objective_gwh: report.objective_gwh,
                    converged: report.converged && written.is_ok(),
                    inner_evals: report.inner_evaluations,
                    warm_savings: report.warm_savings,
                }
            }
            Err(_) => ResultRecord {
                formulation: f,
                n_turbines: n,
                w,
                seed,
                runtime_s: 0.0,
                objective_gwh: f64::NAN,
                converged: false,
                inner_evals: 0,
                warm_savings: None,
            },
        }
    };
    let records: Vec<ResultRecord> = if config.parallel_runs {
        jobs.par_iter().map(run).collect()
    } else {
        jobs.iter().map(run).collect()
    };

    write_records(&out.join("results.csv"), &records)?;
    write_summary(&out.join("summary.csv"), &records)?;
    Ok(records)
}

pub fn write_records(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| FarmError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> FarmError {
    FarmError::io(path, std::io::Error::other(e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub formulation: Formulation,
    pub n_turbines: usize,
    pub w: usize,
    pub runs: usize,
    pub converged: usize,
    pub mean_runtime_s: f64,
    pub min_runtime_s: f64,
    pub max_runtime_s: f64,
    pub mean_objective_gwh: f64,
    pub min_objective_gwh: f64,
    pub max_objective_gwh: f64,
}

/// Mean, min, and max runtime and objective per formulation and farm size.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(usize, &'static str, usize), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        cells.entry((r.n_turbines, r.formulation.tag(), r.w)).or_default().push(r);
    }
    cells
        .into_values()
        .map(|rows| {
            let stats = |f: fn(&ResultRecord) -> f64| {
                let v: Vec<f64> = rows.iter().map(|r| f(r)).collect();
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (mean, min, max)
            };
            let rt = stats(|r| r.runtime_s);
            let obj = stats(|r| r.objective_gwh);
            SummaryRow {
                formulation: rows[0].formulation,
                n_turbines: rows[0].n_turbines,
                w: rows[0].w,
                runs: rows.len(),
                converged: rows.iter().filter(|r| r.converged).count(),
                mean_runtime_s: rt.0,
                min_runtime_s: rt.1,
                max_runtime_s: rt.2,
                mean_objective_gwh: obj.0,
                min_objective_gwh: obj.1,
                max_objective_gwh: obj.2,
            }
        })
        .collect()
}

fn write_summary(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in summarize(records) {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| FarmError::io(path, e))
}
