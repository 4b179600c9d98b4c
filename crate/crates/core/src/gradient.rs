//! Exact derivatives of farm power with respect to positions and yaws, and a
//! central-difference estimator used to check them.
//!
//! Each pairwise deficit is differentiated in forward mode with respect to its
//! three local inputs (downstream offset, radial offset, source yaw). Those
//! local partials are then pushed back through the windspeed combination and
//! the frame rotation by hand, which costs about four plain evaluations.

use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Scalar};
use crate::farm::{Layout, PhysicalParams};
use crate::wake::{relative_coordinates, WakeConstants};

/// Default finite-difference step for coordinates, m.
pub const FD_STEP_POSITION: f64 = 1e-3;
/// Default finite-difference step for yaw angles, rad.
pub const FD_STEP_YAW: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGradient {
    /// `[∂P/∂x; ∂P/∂y]`, W/m.
    pub grad_layout: Vec<f64>,
    /// `∂P/∂λ`, W/rad.
    pub grad_yaw: Vec<f64>,
}

#[derive(Clone, Copy, Default)]
struct Partials {
    w: f64,
    dd: f64,
    dr: f64,
    dyaw: f64,
}

/// Farm power and its gradient with respect to every coordinate and yaw.
pub fn power_gradient(
    layout: &Layout,
    yaws: &[f64],
    wind_angle: f64,
    params: &PhysicalParams,
) -> (f64, PowerGradient) {
    assert_eq!(yaws.len(), layout.len(), "one yaw angle per turbine");
    let k = WakeConstants::new(params);
    let n = layout.len();
    let rel = relative_coordinates(layout, wind_angle);
    let (sin_t, cos_t) = wind_angle.sin_cos();

    // Local partials, indexed [receiver][source].
    let mut pairs = vec![Partials::default(); n * n];
    for j in 0..n {
        for i in 0..n {
            if i == j {
                continue;
            }
            let v = k.deficit(
                Dual::<3>::variable(rel.d[(j, i)], 0),
                Dual::<3>::variable(rel.r[(j, i)], 1),
                Dual::<3>::variable(yaws[j], 2),
            );
            pairs[i * n + j] = Partials {
                w: v.value(),
                dd: v.d[0],
                dr: v.d[1],
                dyaw: v.d[2],
            };
        }
    }

    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut grad_yaw = vec![0.0; n];
    let mut power = 0.0;
    for i in 0..n {
        let row = &pairs[i * n..(i + 1) * n];
        let root = row.iter().map(|p| p.w * p.w).sum::<f64>().sqrt();
        let v = k.speed * (1.0 - root);
        let (sin, cos) = yaws[i].sin_cos();
        power += k.power_constant * cos * v.powi(3);
        grad_yaw[i] -= k.power_constant * sin * v.powi(3);
        if root == 0.0 {
            continue;
        }
        let scale = -3.0 * k.power_constant * cos * v * v * k.speed / root;
        for (j, p) in row.iter().enumerate() {
            if j == i {
                continue;
            }
            let g = scale * p.w;
            grad_yaw[j] += g * p.dyaw;
            // d = (l_i - l_j)·(cos θ, sin θ), r = (l_i - l_j)·(-sin θ, cos θ).
            let ddx = g * (p.dd * cos_t - p.dr * sin_t);
            let ddy = g * (p.dd * sin_t + p.dr * cos_t);
            gx[i] += ddx;
            gy[i] += ddy;
            gx[j] -= ddx;
            gy[j] -= ddy;
        }
    }
    gx.extend(gy);
    (
        power,
        PowerGradient {
            grad_layout: gx,
            grad_yaw,
        },
    )
}

/// Power and `∂P/∂λ` at a fixed layout.
pub fn yaw_gradient(layout: &Layout, yaws: &[f64], wind_angle: f64, params: &PhysicalParams) -> (f64, Vec<f64>) {
    let k = WakeConstants::new(params);
    let rel = relative_coordinates(layout, wind_angle);
    let mut g = vec![0.0; yaws.len()];
    let p = crate::wake::power_and_yaw_gradient(&k, &rel, yaws, &mut g);
    (p, g)
}

/// Central-difference gradient of `f` with a per-coordinate step.
pub fn fd_gradient<F, E>(mut f: F, x: &[f64], steps: &[f64]) -> Result<Vec<f64>, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    assert_eq!(x.len(), steps.len(), "one step per coordinate");
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let h = steps[k];
        probe[k] = x[k] + h;
        let up = f(&probe)?;
        probe[k] = x[k] - h;
        let down = f(&probe)?;
        probe[k] = x[k];
        out.push((up - down) / (2.0 * h));
    }
    Ok(out)
}

/// Default steps for a stacked `[x; y; λ]` vector of `n` turbines.
pub fn default_fd_steps(n: usize) -> Vec<f64> {
    let mut s = vec![FD_STEP_POSITION; 2 * n];
    s.extend(std::iter::repeat_n(FD_STEP_YAW, n));
    s
}

/// Largest componentwise mismatch, each measured relative to
/// `max(|reference_k|, floor · ‖reference‖)`.
pub fn max_relative_error(exact: &[f64], reference: &[f64], floor: f64) -> f64 {
    let norm = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    exact
        .iter()
        .zip(reference)
        .map(|(a, b)| {
            let scale = b.abs().max(floor * norm);
            if scale == 0.0 {
                (a - b).abs()
            } else {
                (a - b).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::farm::default_params;
    use std::convert::Infallible;

    #[test]
    fn fd_on_quadratic_and_constant() {
        let g = fd_gradient(|x| Ok::<_, Infallible>(x.iter().map(|v| v * v).sum()), &[1.0, 2.0], &[1e-3; 2]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 4.0).abs() < 1e-8);
        let g = fd_gradient(|_| Ok::<_, Infallible>(3.5), &[1.0, 2.0, 3.0], &[1e-3; 3]).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn fd_propagates_errors() {
        let r: Result<Vec<f64>, &str> = fd_gradient(|_| Err("boom"), &[1.0], &[1e-3]);
        assert_eq!(r, Err("boom"));
    }

    #[test]
    fn single_turbine_is_stationary_at_zero_yaw() {
        let p = default_params();
        let l = Layout::from_points(&[(250.0, 400.0)]).unwrap();
        let (pw, g) = power_gradient(&l, &[0.0], 0.7, &p);
        assert!((pw - p.single_turbine_power()).abs() < 1e-6);
        assert_eq!(g.grad_layout, vec![0.0, 0.0]);
        assert_eq!(g.grad_yaw, vec![0.0]);
    }

    #[test]
    fn yaw_gradient_agrees_with_full_gradient() {
        let p = default_params();
        let l = Layout::from_points(&[(0.0, 0.0), (600.0, 40.0), (1300.0, -30.0)]).unwrap();
        let yaws = [0.2, -0.1, 0.05];
        let (p1, full) = power_gradient(&l, &yaws, 0.1, &p);
        let (p2, yaw) = yaw_gradient(&l, &yaws, 0.1, &p);
        assert!((p1 - p2).abs() <= 1e-9 * p1);
        for (a, b) in full.grad_yaw.iter().zip(&yaw) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
