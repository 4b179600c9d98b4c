//! Scalar reference transcription of the wake model in double-double
//! arithmetic, and the gradient check suites built on it.
//!
//! Nothing here calls into the library's wake kernel: the model is written
//! out pair by pair with hard clamps and explicit rotations, so agreement
//! with the library is evidence rather than tautology.

mod checks;

pub use checks::{envelope_suite, gradient_suite, CheckSummary};

use farmopt::farm::PhysicalParams;
use twofloat::TwoFloat;

pub fn rotate(v: (f64, f64), angle: f64) -> (f64, f64) {
    // Rotation by -angle maps the wind direction onto the +x axis.
    let (s, c) = angle.sin_cos();
    let m = [[c, s], [-s, c]];
    (m[0][0] * v.0 + m[0][1] * v.1, m[1][0] * v.0 + m[1][1] * v.1)
}

/// Downstream and radial offsets of `to` in the wake frame of `from`.
pub fn pair_coords(from: (f64, f64), to: (f64, f64), wind: f64) -> (f64, f64) {
    rotate((to.0 - from.0, to.1 - from.1), wind)
}

/// Scalar model evaluated in double-double arithmetic, so that finite
/// differences of it carry far less roundoff than the library's own `f64`
/// evaluation.
pub struct Oracle {
    pub p: PhysicalParams,
}

fn dd(v: f64) -> TwoFloat {
    TwoFloat::from(v)
}

impl Oracle {
    fn ct(&self) -> TwoFloat {
        let a = dd(self.p.axial_induction);
        a * (1.0 - a) * 4.0
    }

    fn sigma0_dd(&self, yaw: TwoFloat) -> TwoFloat {
        dd(self.p.rotor_diameter) / (dd(2.0) * dd(2.0).sqrt()) * yaw.cos()
    }

    fn sigma_dd(&self, d: TwoFloat, yaw: TwoFloat) -> TwoFloat {
        let s = self.sigma0_dd(yaw) + d * self.p.wake_expansion;
        if s.hi() < 1e-3 {
            dd(1e-3)
        } else {
            s
        }
    }

    fn deflection_dd(&self, d: TwoFloat, yaw: TwoFloat) -> TwoFloat {
        let ct = self.ct();
        let sct = ct.sqrt();
        let c0 = 1.0 - (1.0 - ct).sqrt();
        let e0 = c0 * c0 - dd(1.0 / 12.0).exp() * c0 * 3.0 + dd(1.0 / 3.0).exp() * 3.0;
        let phi = yaw * 0.3 / yaw.cos() * (1.0 - (1.0 - ct * yaw.cos()).sqrt());
        let s0 = self.sigma0_dd(yaw);
        // Far upstream the printed logarithm's argument turns negative; the
        // model floors the square-root ratio just above that point.
        let mut ratio = (self.sigma_dd(d, yaw) / s0).sqrt();
        let floor = sct * 1.05 / 1.6;
        if ratio < floor {
            ratio = floor;
        }
        let arg = ((sct + 1.6) * (ratio * 1.6 - sct)) / ((1.6 - sct) * (ratio * 1.6 + sct));
        let d_term = dd(self.p.deflection_offset) * self.p.rotor_diameter + d * self.p.deflection_slope;
        d_term + phi / 5.2 * e0 * (s0 / (ct * self.p.wake_expansion)).sqrt() * arg.ln()
    }

    fn deficit_dd(&self, d: TwoFloat, r: TwoFloat, yaw: TwoFloat) -> TwoFloat {
        let s = self.sigma_dd(d, yaw);
        let mut q = self.sigma0_dd(yaw) / s * self.ct();
        if q > 1.0 {
            q = dd(1.0);
        }
        let gate = 1.0 / (1.0 + (-d * self.p.sigmoid_sharpness).exp());
        let off = r - self.deflection_dd(d, yaw);
        gate * (1.0 - (1.0 - q).sqrt()) * (-off * off / (s * s * 2.0)).exp()
    }

    pub fn sigma0(&self, yaw: f64) -> f64 {
        self.sigma0_dd(dd(yaw)).hi()
    }

    pub fn sigma(&self, d: f64, yaw: f64) -> f64 {
        self.sigma_dd(dd(d), dd(yaw)).hi()
    }

    pub fn deflection(&self, d: f64, yaw: f64) -> f64 {
        self.deflection_dd(dd(d), dd(yaw)).hi()
    }

    pub fn deficit(&self, d: f64, r: f64, yaw: f64) -> f64 {
        self.deficit_dd(dd(d), dd(r), dd(yaw)).hi()
    }

    fn speeds_dd(&self, pts: &[(f64, f64)], yaws: &[f64], wind: f64) -> Vec<TwoFloat> {
        let (s, c) = dd(wind).sin_cos();
        (0..pts.len())
            .map(|i| {
                let mut sum = dd(0.0);
                for j in 0..pts.len() {
                    if j != i {
                        // Explicit rotation of the offset by minus the wind angle.
                        let (dx, dy) = (dd(pts[i].0) - pts[j].0, dd(pts[i].1) - pts[j].1);
                        let (d, r) = (c * dx + s * dy, -s * dx + c * dy);
                        let w = self.deficit_dd(d, r, dd(yaws[j]));
                        sum += w * w;
                    }
                }
                (1.0 - sum.sqrt()) * self.p.freestream_speed
            })
            .collect()
    }

    pub fn speeds(&self, pts: &[(f64, f64)], yaws: &[f64], wind: f64) -> Vec<f64> {
        self.speeds_dd(pts, yaws, wind).iter().map(|v| v.hi()).collect()
    }

    fn power_dd(&self, pts: &[(f64, f64)], yaws: &[f64], wind: f64) -> TwoFloat {
        let area = twofloat::consts::PI / 4.0 * self.p.rotor_diameter * self.p.rotor_diameter;
        let a = dd(self.p.axial_induction);
        let cp = a * (1.0 - a) * (1.0 - a) * 4.0;
        let mut total = dd(0.0);
        for (v, y) in self.speeds_dd(pts, yaws, wind).into_iter().zip(yaws) {
            total += area * cp * dd(y.to_owned()).cos() * v * v * v * (0.5 * self.p.air_density);
        }
        total
    }

    pub fn power(&self, pts: &[(f64, f64)], yaws: &[f64], wind: f64) -> f64 {
        self.power_dd(pts, yaws, wind).hi()
    }

    /// Central differences of the power with respect to `[x; y; λ]`, using
    /// the given steps and the exact distance between the two probes.
    pub fn fd_gradient(&self, pts: &[(f64, f64)], yaws: &[f64], wind: f64, steps: &[f64]) -> Vec<f64> {
        let n = pts.len();
        let mut x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        x.extend(pts.iter().map(|p| p.1));
        x.extend_from_slice(yaws);
        let eval = |v: &[f64]| {
            let pts: Vec<(f64, f64)> = (0..n).map(|i| (v[i], v[n + i])).collect();
            self.power_dd(&pts, &v[2 * n..], wind)
        };
        let mut out = Vec::with_capacity(x.len());
        let mut probe = x.clone();
        for k in 0..x.len() {
            let (up, down) = (x[k] + steps[k], x[k] - steps[k]);
            probe[k] = up;
            let fu = eval(&probe);
            probe[k] = down;
            let fd = eval(&probe);
            probe[k] = x[k];
            out.push(((fu - fd) / (dd(up) - down)).hi());
        }
        out
    }
}
