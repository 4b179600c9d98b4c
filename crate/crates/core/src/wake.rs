//! Forward wake model: wind-aligned coordinates, Gaussian deficit with
//! yaw-induced centerline deflection, and total farm power.
//!
//! Every nonsmooth guard in the printed model (square roots and logarithms of
//! quantities that turn negative far upstream) is replaced by a softplus-based
//! clamp whose offset from the hard clamp is below `1e-6`. Far upstream the
//! sigmoid gate already drives the deficit to zero, so the clamps only keep the
//! arithmetic finite.

use std::f64::consts::SQRT_2;
use std::ops::Index;

use crate::dual::{Dual, Scalar};
use crate::farm::{Layout, PhysicalParams};

/// Lower bound on the wake width, m.
pub const SIGMA_FLOOR: f64 = 1e-3;
const SIGMA_SOFTNESS: f64 = 1e-7;
const RADICAND_SOFTNESS: f64 = 1e-7;
/// Keeps the deflection logarithm's argument away from zero; the clamp is
/// active only about a kilometer upstream of a rotor.
const LOG_MARGIN: f64 = 1.05;
const LOG_SOFTNESS: f64 = 1e-6;

/// Dense row-major `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

/// Pairwise displacements in the wind frame. `d[(i, j)] > 0` means turbine
/// `j` is downstream of turbine `i`; row `i` is turbine `i`'s wake frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeCoords {
    pub d: Matrix,
    pub r: Matrix,
}

pub fn relative_coordinates(layout: &Layout, wind_angle: f64) -> RelativeCoords {
    let n = layout.len();
    let (s, c) = wind_angle.sin_cos();
    let (xs, ys) = (layout.xs(), layout.ys());
    let mut d = Matrix::zeros(n);
    let mut r = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let (dx, dy) = (xs[j] - xs[i], ys[j] - ys[i]);
            d.set(i, j, dx * c + dy * s);
            r.set(i, j, -dx * s + dy * c);
        }
    }
    RelativeCoords { d, r }
}

/// Constants of the kernel that depend only on the parameters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct WakeConstants {
    diameter: f64,
    pub speed: f64,
    offset: f64,
    slope: f64,
    expansion: f64,
    sharpness: f64,
    ct: f64,
    sqrt_ct: f64,
    e0: f64,
    log_floor: f64,
    pub power_constant: f64,
}

impl WakeConstants {
    pub fn new(p: &PhysicalParams) -> Self {
        let ct = p.thrust_coefficient();
        let c0 = 1.0 - (1.0 - ct).sqrt();
        let e0 = c0 * c0 - 3.0 * (1.0f64 / 12.0).exp() * c0 + 3.0 * (1.0f64 / 3.0).exp();
        Self {
            diameter: p.rotor_diameter,
            speed: p.freestream_speed,
            offset: p.deflection_offset,
            slope: p.deflection_slope,
            expansion: p.wake_expansion,
            sharpness: p.sigmoid_sharpness,
            ct,
            sqrt_ct: ct.sqrt(),
            e0,
            log_floor: LOG_MARGIN * ct.sqrt() / 1.6,
            power_constant: p.power_constant(),
        }
    }

    fn initial_width<S: Scalar>(&self, yaw: S) -> S {
        yaw.cos() * (self.diameter / (2.0 * SQRT_2))
    }

    fn width<S: Scalar>(&self, d: S, sigma0: S) -> S {
        let raw = sigma0 + d * self.expansion;
        soft_floor(raw, SIGMA_FLOOR, SIGMA_SOFTNESS)
    }

    fn deflection<S: Scalar>(&self, d: S, yaw: S, sigma0: S, sigma: S) -> S {
        let cos_yaw = yaw.cos();
        let phi = yaw * 0.3 / cos_yaw * (-(-(cos_yaw * self.ct) + 1.0).sqrt() + 1.0);
        let amp = phi * (self.e0 / 5.2) * (sigma0 / (self.expansion * self.ct)).sqrt();
        let u = soft_floor((sigma / sigma0).sqrt(), self.log_floor, LOG_SOFTNESS) * 1.6;
        let num = (u - self.sqrt_ct) * (1.6 + self.sqrt_ct);
        let den = (u + self.sqrt_ct) * (1.6 - self.sqrt_ct);
        amp * (num / den).ln() + d * self.slope + self.offset * self.diameter
    }

    /// Deficit factor at `(d, r)` in the wake frame of a rotor yawed by `yaw`.
    pub fn deficit<S: Scalar>(&self, d: S, r: S, yaw: S) -> S {
        let sigma0 = self.initial_width(yaw);
        let sigma = self.width(d, sigma0);
        let q = sigma0 / sigma * self.ct;
        // 1 - min(q, 1), softened; the tiny offset keeps the square root's
        // derivative finite where the clamp saturates.
        let radicand = soft_floor(-q + 1.0, 0.0, RADICAND_SOFTNESS) + 1e-300;
        let amplitude = -radicand.sqrt() + 1.0;
        let offset = r - self.deflection(d, yaw, sigma0, sigma);
        let gauss = (-(offset * offset) / (sigma * sigma * 2.0)).exp();
        (d * self.sharpness).sigmoid() * amplitude * gauss
    }
}

/// `max(x, floor)` smoothed over a band of width `h`.
fn soft_floor<S: Scalar>(x: S, floor: f64, h: f64) -> S {
    ((x - floor) / h).softplus() * h + floor
}

/// Wake width `σ_r` at downstream distance `d` behind a rotor yawed by `yaw`.
pub fn wake_width(d: f64, yaw: f64, params: &PhysicalParams) -> f64 {
    let k = WakeConstants::new(params);
    k.width(d, k.initial_width(yaw))
}

/// Lateral position of the wake centerline at downstream distance `d`.
pub fn deflection(d: f64, yaw: f64, params: &PhysicalParams) -> f64 {
    let k = WakeConstants::new(params);
    let sigma0 = k.initial_width(yaw);
    k.deflection(d, yaw, sigma0, k.width(d, sigma0))
}

/// Fractional windspeed reduction at `(d, r)` behind a rotor yawed by `yaw`.
pub fn smoothed_deficit(d: f64, r: f64, yaw: f64, params: &PhysicalParams) -> f64 {
    WakeConstants::new(params).deficit(d, r, yaw)
}

/// Pairwise deficits and the resulting effective windspeeds.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeField {
    /// `deficit[(j, i)]` is the deficit induced at turbine `i` by turbine `j`.
    pub deficit: Matrix,
    pub speeds: Vec<f64>,
}

pub fn effective_windspeeds(layout: &Layout, yaws: &[f64], wind_angle: f64, params: &PhysicalParams) -> WakeField {
    assert_eq!(yaws.len(), layout.len(), "one yaw angle per turbine");
    let k = WakeConstants::new(params);
    let rel = relative_coordinates(layout, wind_angle);
    let n = layout.len();
    let mut deficit = Matrix::zeros(n);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                deficit.set(j, i, k.deficit(rel.d[(j, i)], rel.r[(j, i)], yaws[j]));
            }
        }
    }
    let speeds = (0..n)
        .map(|i| {
            let s: f64 = (0..n).map(|j| deficit[(j, i)].powi(2)).sum();
            k.speed * (1.0 - s.sqrt())
        })
        .collect();
    WakeField { deficit, speeds }
}

/// Total farm power, W.
pub fn farm_power(layout: &Layout, yaws: &[f64], wind_angle: f64, params: &PhysicalParams) -> f64 {
    let field = effective_windspeeds(layout, yaws, wind_angle, params);
    let c = params.power_constant();
    yaws.iter()
        .zip(&field.speeds)
        .map(|(a, v)| c * a.cos() * v.powi(3))
        .sum()
}

/// Power and its derivatives with respect to every yaw angle, holding the
/// layout fixed. This is what the inner yaw problems need.
pub(crate) fn power_and_yaw_gradient(
    k: &WakeConstants,
    rel: &RelativeCoords,
    yaws: &[f64],
    grad: &mut [f64],
) -> f64 {
    let n = yaws.len();
    // Deficits and their yaw derivatives, indexed [receiver][source].
    let mut w = vec![(0.0, 0.0); n * n];
    for j in 0..n {
        let yaw = Dual::<1>::variable(yaws[j], 0);
        for i in 0..n {
            if i != j {
                let dj = Dual::constant(rel.d[(j, i)]);
                let rj = Dual::constant(rel.r[(j, i)]);
                let v = k.deficit(dj, rj, yaw);
                w[i * n + j] = (v.v, v.d[0]);
            }
        }
    }
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut power = 0.0;
    for i in 0..n {
        let row = &w[i * n..(i + 1) * n];
        let s: f64 = row.iter().map(|p| p.0 * p.0).sum();
        let root = s.sqrt();
        let v = k.speed * (1.0 - root);
        let (sin, cos) = yaws[i].sin_cos();
        power += k.power_constant * cos * v.powi(3);
        grad[i] -= k.power_constant * sin * v.powi(3);
        if root > 0.0 {
            let dp_dv = 3.0 * k.power_constant * cos * v * v;
            let scale = -dp_dv * k.speed / root;
            for (j, &(wv, wd)) in row.iter().enumerate() {
                grad[j] += scale * wv * wd;
            }
        }
    }
    power
}
