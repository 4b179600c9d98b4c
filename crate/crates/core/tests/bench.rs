use std::path::Path;

use farmopt::bench::{build_instance, run_experiments, summarize, ExperimentConfig, ResultRecord};
use farmopt::farm::{default_params, Layout};
use farmopt::mlr::{watts_to_gwh, Formulation, SolveReport};

fn config(dir: &Path, extra: &str) -> ExperimentConfig {
    let text = format!(
        "turbine_counts = [1, 3]\nscenarios = 2\nseeds = [4, 5]\nformulations = [\"MLR-A\", \"JOINT\"]\nbudget_s = 60.0\noutput_dir = {:?}\n{extra}",
        dir.display().to_string()
    );
    ExperimentConfig::from_toml(&text).unwrap()
}

fn strip_runtime(csv: &str) -> Vec<String> {
    csv.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(4);
            f.join(",")
        })
        .collect()
}

#[test]
fn experiments_write_consistent_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "");
    let records = run_experiments(&cfg).unwrap();
    assert_eq!(records.len(), 8);

    let p = default_params();
    let single = watts_to_gwh(p.single_turbine_power());
    for r in records.iter().filter(|r| r.n_turbines == 1) {
        assert!((r.objective_gwh - single).abs() <= 1e-9 * single, "{}", r.objective_gwh);
    }

    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "formulation,n_turbines,w,seed,runtime_s,objective_gwh,converged,inner_evals,warm_savings"
    );
    assert_eq!(csv.lines().count(), 9);

    // Every report's layout and yaws reproduce its recorded objective.
    for r in &records {
        let name = format!("{}_n{}_w{}_s{}.json", r.formulation.tag().to_lowercase(), r.n_turbines, r.w, r.seed);
        let text = std::fs::read_to_string(dir.path().join("reports").join(name)).unwrap();
        let report = SolveReport::from_json(&text).unwrap();
        let (problem, _) = build_instance(r.n_turbines, r.w, r.seed, &p).unwrap();
        let again = watts_to_gwh(report.reevaluate(&problem).unwrap());
        assert!((again - r.objective_gwh).abs() <= 1e-9 * r.objective_gwh);
        assert!(Layout::new(report.layout).is_ok());
    }

    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);

    // Same config, same numbers apart from timing.
    let again = tempfile::tempdir().unwrap();
    run_experiments(&config(again.path(), "")).unwrap();
    let csv2 = std::fs::read_to_string(again.path().join("results.csv")).unwrap();
    assert_eq!(strip_runtime(&csv), strip_runtime(&csv2));
}

#[test]
fn invalid_configs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = format!("scenarios = 2\nseeds = [1]\nformulations = [\"MLR-A\"]\nbudget_s = 1.0\noutput_dir = {:?}\n", dir.path().display().to_string());
    for bad in [
        "turbine_counts = []",
        "turbine_counts = [0]",
        "turbine_counts = [60]",
        "turbine_counts = [2]\nunknown = 1",
        "turbine_counts = [2]\n[params]\nrotor_diameter = -1.0",
    ] {
        assert!(ExperimentConfig::from_toml(&format!("{bad}\n{base}")).is_err(), "{bad}");
    }
    assert!(ExperimentConfig::from_toml(&format!("turbine_counts = [2]\n{}", base.replace("budget_s = 1.0", "budget_s = 0.0"))).is_err());
    let large = format!("turbine_counts = [60]\nallow_large = true\n{base}");
    assert!(ExperimentConfig::from_toml(&large).is_ok());
}

#[test]
fn parameter_overrides_reach_the_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), "[params]\nfreestream_speed = 10.0\n");
    cfg.turbine_counts = vec![1];
    cfg.formulations = vec![Formulation::Mlr];
    let records = run_experiments(&cfg).unwrap();
    let base = watts_to_gwh(default_params().single_turbine_power());
    for r in records {
        assert!((r.objective_gwh - base * 1.953125).abs() <= 1e-9 * r.objective_gwh);
    }
}

#[test]
fn summary_counts_failed_runs() {
    let row = |f, obj: f64, ok| ResultRecord {
        formulation: f,
        n_turbines: 4,
        w: 2,
        seed: 0,
        runtime_s: 1.0,
        objective_gwh: obj,
        converged: ok,
        inner_evals: 0,
        warm_savings: None,
    };
    let rows = summarize(&[row(Formulation::Mlr, 10.0, true), row(Formulation::Mlr, 20.0, false), row(Formulation::Admm, f64::NAN, false)]);
    assert_eq!(rows.len(), 2);
    let mlr = rows.iter().find(|r| r.formulation == Formulation::Mlr).unwrap();
    assert_eq!((mlr.runs, mlr.converged), (2, 1));
    assert_eq!((mlr.mean_objective_gwh, mlr.min_objective_gwh, mlr.max_objective_gwh), (15.0, 10.0, 20.0));
    let admm = rows.iter().find(|r| r.formulation == Formulation::Admm).unwrap();
    assert!(admm.mean_objective_gwh.is_nan());
}
