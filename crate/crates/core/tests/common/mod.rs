//! Shared helpers for the integration suites.

#![allow(dead_code)]

#[allow(unused_imports)]
pub use farmopt_reference::{pair_coords, rotate, Oracle};

use farmopt::farm::{Layout, PhysicalParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random turbines in a square of side `side`, no spacing constraint.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, side: f64) -> Vec<(f64, f64)> {
    (0..n).map(|_| (rng.random_range(0.0..side), rng.random_range(0.0..side))).collect()
}

/// Random turbines in a square, at least `min_gap` apart.
pub fn spaced_points(rng: &mut ChaCha8Rng, n: usize, side: f64, min_gap: f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    while pts.len() < n {
        let c = (rng.random_range(0.0..side), rng.random_range(0.0..side));
        if pts.iter().all(|p| (p.0 - c.0).hypot(p.1 - c.1) >= min_gap) {
            pts.push(c);
        }
    }
    pts
}

pub fn random_yaws(rng: &mut ChaCha8Rng, n: usize, p: &PhysicalParams) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(p.yaw_min..=p.yaw_max)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn layout(pts: &[(f64, f64)]) -> Layout {
    Layout::from_points(pts).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
