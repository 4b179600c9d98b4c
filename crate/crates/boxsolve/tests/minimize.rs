use boxsolve::{hot_start, minimize, BoxProblem, FnObjective, Objective, Settings, SolverState, Start};

fn quadratic(center: Vec<f64>) -> impl FnMut(&[f64], &mut [f64]) -> f64 {
    move |x, g| {
        let mut f = 0.0;
        for i in 0..x.len() {
            let d = x[i] - center[i];
            g[i] = 2.0 * d;
            f += d * d;
        }
        f
    }
}

fn rosenbrock(x: &[f64], g: &mut [f64]) -> f64 {
    let (a, b) = (x[0], x[1]);
    g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
    g[1] = 200.0 * (b - a * a);
    (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
}

fn tight() -> Settings {
    Settings::default().with_tolerances(1e-10, 0.0)
}

#[test]
fn unconstrained_quadratic_reaches_center() {
    let c = vec![0.3, -1.7, 2.5];
    let mut p = BoxProblem::new(FnObjective(quadratic(c.clone())), vec![-5.0; 3], vec![5.0; 3]).unwrap();
    let r = minimize(&mut p, Start::Point(&[0.0; 3]), &tight()).unwrap();
    assert!(r.converged);
    for (x, c) in r.x.iter().zip(&c) {
        assert!((x - c).abs() < 1e-8, "{x} vs {c}");
    }
}

#[test]
fn active_lower_bound() {
    let mut p = BoxProblem::new(FnObjective(quadratic(vec![0.0; 4])), vec![1.0; 4], vec![f64::INFINITY; 4]).unwrap();
    let r = minimize(&mut p, Start::Point(&[3.0, 2.0, 5.0, 1.5]), &tight()).unwrap();
    assert!(r.converged);
    assert_eq!(r.x, vec![1.0; 4]);
}

/// Grid search at spacing 0.01 followed by compass-search refinement.
fn rosenbrock_oracle() -> [f64; 2] {
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    let mut g = [0.0; 2];
    for i in 0..=400 {
        for j in 0..=400 {
            let x = [-2.0 + 0.01 * i as f64, -2.0 + 0.01 * j as f64];
            let f = rosenbrock(&x, &mut g);
            if f < best.0 {
                best = (f, x);
            }
        }
    }
    let (mut f, mut x) = best;
    let mut h = 0.01;
    while h > 1e-12 {
        let mut improved = false;
        for (dx, dy) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h), (h, 2.0 * h), (-h, -2.0 * h)] {
            let y = [(x[0] + dx).clamp(-2.0, 2.0), (x[1] + dy).clamp(-2.0, 2.0)];
            let fy = rosenbrock(&y, &mut g);
            if fy < f {
                f = fy;
                x = y;
                improved = true;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    x
}

#[test]
fn bounded_rosenbrock() {
    let oracle = rosenbrock_oracle();
    assert!((oracle[0] - 1.0).abs() < 1e-5 && (oracle[1] - 1.0).abs() < 1e-5);
    let mut p = BoxProblem::new(FnObjective(rosenbrock), vec![-2.0; 2], vec![2.0; 2]).unwrap();
    let r = minimize(&mut p, Start::Point(&[-1.2, 1.0]), &tight()).unwrap();
    assert!(r.converged, "{:?}", r.termination);
    assert!((r.x[0] - oracle[0]).abs() < 1e-5, "{:?}", r.x);
    assert!((r.x[1] - oracle[1]).abs() < 1e-5, "{:?}", r.x);
}

#[test]
fn rosenbrock_with_active_bound() {
    // Constrained minimizer of Rosenbrock on x0 <= 0.5 is (0.5, 0.25).
    let mut p = BoxProblem::new(FnObjective(rosenbrock), vec![-2.0, -2.0], vec![0.5, 2.0]).unwrap();
    let r = minimize(&mut p, Start::Point(&[-1.2, 1.0]), &tight()).unwrap();
    assert!(r.converged);
    assert!((r.x[0] - 0.5).abs() < 1e-8 && (r.x[1] - 0.25).abs() < 1e-6, "{:?}", r.x);
}

#[test]
fn convex_quadratic_converges_within_3n_iterations() {
    let n = 8;
    // Diagonally dominant SPD matrix with spread eigenvalues.
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { 1.0 + 3.0 * i as f64 } else { 0.3 / (1.0 + (i as f64 - j as f64).abs()) })
                .collect()
        })
        .collect();
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
    let a2 = a.clone();
    let b2 = b.clone();
    let f = move |x: &[f64], g: &mut [f64]| {
        let mut f = 0.0;
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a2[i][j] * x[j]).sum();
            g[i] = ax - b2[i];
            f += 0.5 * x[i] * ax - b2[i] * x[i];
        }
        f
    };
    // Reference minimizer by Gauss-Seidel, which converges for this matrix.
    let mut xs = vec![0.0; n];
    for _ in 0..500 {
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[i][j] * xs[j]).sum();
            xs[i] = (b[i] - off) / a[i][i];
        }
    }
    let settings = Settings { memory: n, ..Settings::default().with_tolerances(1e-13, 0.0) };
    let mut p = BoxProblem::unbounded(FnObjective(f), n);
    let r = minimize(&mut p, Start::Point(&vec![1.0; n]), &settings).unwrap();
    assert!(r.iterations <= 3 * n, "{} iterations", r.iterations);
    for (x, s) in r.x.iter().zip(&xs) {
        assert!((x - s).abs() < 1e-10, "{x} vs {s}");
    }
}

struct Recorder<F> {
    inner: F,
    seen: Vec<Vec<f64>>,
    accepted: Vec<Vec<f64>>,
}

impl<F: FnMut(&[f64], &mut [f64]) -> f64> Objective for Recorder<F> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        self.seen.push(x.to_vec());
        Some((self.inner)(x, grad))
    }
    fn accept(&mut self, x: &[f64]) {
        self.accepted.push(x.to_vec());
    }
}

#[test]
fn iterates_stay_feasible_and_objective_is_monotone() {
    let lower = vec![-0.5, 0.2];
    let upper = vec![0.8, 1.5];
    let rec = Recorder { inner: rosenbrock, seen: vec![], accepted: vec![] };
    let mut p = BoxProblem::new(rec, lower.clone(), upper.clone()).unwrap();
    minimize(&mut p, Start::Point(&[5.0, -3.0]), &tight()).unwrap();
    let mut g = [0.0; 2];
    let mut last = f64::INFINITY;
    for x in &p.objective.accepted {
        for i in 0..2 {
            assert!(x[i] >= lower[i] && x[i] <= upper[i]);
        }
        let f = rosenbrock(x, &mut g);
        assert!(f <= last);
        last = f;
    }
    assert!(p.objective.seen.iter().all(|x| x[0] >= -0.5 && x[0] <= 0.8 && x[1] >= 0.2 && x[1] <= 1.5));
}

#[test]
fn deterministic_iterates() {
    let run = || {
        let rec = Recorder { inner: rosenbrock, seen: vec![], accepted: vec![] };
        let mut p = BoxProblem::new(rec, vec![-2.0; 2], vec![2.0; 2]).unwrap();
        minimize(&mut p, Start::Point(&[-1.2, 1.0]), &tight()).unwrap();
        p.objective.seen
    };
    assert_eq!(run(), run());
}

#[test]
fn hot_start_on_unchanged_problem_is_immediate() {
    let c = vec![1.0, -2.0, 0.5, 3.0];
    let mut p = BoxProblem::new(FnObjective(quadratic(c.clone())), vec![-10.0; 4], vec![10.0; 4]).unwrap();
    let first = minimize(&mut p, Start::Point(&[0.0; 4]), &Settings::default()).unwrap();
    let again = hot_start(&first.state, &mut p, &Settings::default()).unwrap();
    assert!(again.converged);
    assert!(again.evaluations <= 2, "{} evaluations", again.evaluations);
}

#[test]
fn hot_start_after_small_displacement() {
    let c = vec![1.0, -2.0, 0.5, 3.0];
    let settings = Settings::default();
    let mut p = BoxProblem::new(FnObjective(quadratic(c.clone())), vec![-10.0; 4], vec![10.0; 4]).unwrap();
    let first = minimize(&mut p, Start::Point(&[0.0; 4]), &settings).unwrap();

    let shifted: Vec<f64> = c.iter().map(|v| v + 1e-3).collect();
    let mut q = BoxProblem::new(FnObjective(quadratic(shifted.clone())), vec![-10.0; 4], vec![10.0; 4]).unwrap();
    let warm = hot_start(&first.state, &mut q, &settings).unwrap();
    assert!(warm.converged);
    // Measured: 2 evaluations; pinned with 2x slack.
    assert!(warm.evaluations <= 5, "{} evaluations", warm.evaluations);

    let mut q = BoxProblem::new(FnObjective(quadratic(shifted)), vec![-10.0; 4], vec![10.0; 4]).unwrap();
    let cold = minimize(&mut q, Start::Point(&first.x), &settings).unwrap();
    assert!(warm.evaluations < cold.evaluations, "warm {} cold {}", warm.evaluations, cold.evaluations);
}

#[test]
fn serialized_state_resumes_identically() {
    let mut p = BoxProblem::new(FnObjective(rosenbrock), vec![-2.0; 2], vec![2.0; 2]).unwrap();
    let settings = Settings { carry_history: true, ..Settings::default().with_max_iterations(5) };
    let partial = minimize(&mut p, Start::Point(&[-1.2, 1.0]), &settings).unwrap();
    let restored = SolverState::from_text(&partial.state.to_text()).unwrap();
    assert_eq!(restored, partial.state);
    let full = Settings { carry_history: true, ..tight() };
    let a = hot_start(&partial.state, &mut p, &full).unwrap();
    let b = hot_start(&restored, &mut p, &full).unwrap();
    assert_eq!(a.x, b.x);
    assert!(a.converged);
    assert_eq!(a.state.evaluations, partial.state.evaluations + a.evaluations);
}

#[test]
fn rejected_points_are_backtracked() {
    // The objective refuses any point with x > 0.5; the minimizer at 1.0 is
    // never reachable, but the solver must not crash or accept a rejected point.
    struct Fence;
    impl Objective for Fence {
        fn evaluate(&mut self, x: &[f64], g: &mut [f64]) -> Option<f64> {
            if x[0] > 0.5 {
                return None;
            }
            g[0] = 2.0 * (x[0] - 1.0);
            Some((x[0] - 1.0).powi(2))
        }
    }
    let mut p = BoxProblem::new(Fence, vec![-5.0], vec![5.0]).unwrap();
    let r = minimize(&mut p, Start::Point(&[-2.0]), &Settings::default()).unwrap();
    assert!(r.x[0] <= 0.5);
}

#[test]
fn bad_inputs() {
    assert!(BoxProblem::new(FnObjective(rosenbrock), vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
    assert!(BoxProblem::new(FnObjective(rosenbrock), vec![1.0], vec![0.0, 1.0]).is_err());
    let mut p = BoxProblem::new(FnObjective(|_: &[f64], _: &mut [f64]| f64::NAN), vec![0.0], vec![1.0]).unwrap();
    assert!(minimize(&mut p, Start::Point(&[0.5]), &Settings::default()).is_err());
}
