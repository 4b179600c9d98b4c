//! Compact limited-memory representation `B = θI - W M Wᵀ` with
//! `W = [Y, θS]` and `M = [[-D, Lᵀ], [L, θSᵀS]]⁻¹`, plus the two pieces of
//! each iteration built on it: the generalized Cauchy point and the
//! subspace minimization over free variables.

use nalgebra::{DMatrix, DVector};

use crate::state::dot;
use crate::SolverState;

pub(crate) struct CompactModel<'a> {
    state: &'a SolverState,
    pub theta: f64,
    /// `M`, 2k x 2k. Empty when there are no pairs.
    m: DMatrix<f64>,
}

impl<'a> CompactModel<'a> {
    /// Returns `None` if the middle matrix is singular.
    pub fn new(state: &'a SolverState) -> Option<Self> {
        let theta = state.theta.unwrap_or(1.0);
        let k = state.pairs();
        if k == 0 {
            return Some(Self {
                state,
                theta,
                m: DMatrix::zeros(0, 0),
            });
        }
        let s = &state.steps;
        let y = &state.grad_diffs;
        let mut mid = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            mid[(i, i)] = -dot(&s[i], &y[i]);
            for j in 0..i {
                // L_ij = s_iᵀ y_j for i > j.
                let l = dot(&s[i], &y[j]);
                mid[(k + i, j)] = l;
                mid[(j, k + i)] = l;
            }
            for j in 0..=i {
                let ss = theta * dot(&s[i], &s[j]);
                mid[(k + i, k + j)] = ss;
                mid[(k + j, k + i)] = ss;
            }
        }
        let m = mid.lu().try_inverse()?;
        if m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { state, theta, m })
    }

    fn width(&self) -> usize {
        2 * self.state.pairs()
    }

    /// Row `i` of `W`.
    fn w_row(&self, i: usize) -> DVector<f64> {
        let k = self.state.pairs();
        let mut row = DVector::zeros(2 * k);
        for j in 0..k {
            row[j] = self.state.grad_diffs[j][i];
            row[k + j] = self.theta * self.state.steps[j][i];
        }
        row
    }

    /// `Wᵀ v` restricted to the index set `idx` (all indices when `None`).
    fn wt_times(&self, v: &[f64], idx: Option<&[usize]>) -> DVector<f64> {
        let k = self.state.pairs();
        let mut out = DVector::zeros(2 * k);
        for j in 0..k {
            let (y, s) = (&self.state.grad_diffs[j], &self.state.steps[j]);
            let (a, b) = match idx {
                None => (dot(y, v), dot(s, v)),
                Some(idx) => idx.iter().zip(v).fold((0.0, 0.0), |(a, b), (&i, vi)| {
                    (a + y[i] * vi, b + s[i] * vi)
                }),
            };
            out[j] = a;
            out[k + j] = self.theta * b;
        }
        out
    }

    fn m_times(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.m * v
    }

    /// Generalized Cauchy point: the first local minimizer of the quadratic
    /// model along the projected steepest-descent path `P(x - t g)`.
    /// Returns the point and `c = Wᵀ(x_cp - x)`.
    pub fn cauchy_point(
        &self,
        x: &[f64],
        g: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> (Vec<f64>, DVector<f64>) {
        let n = x.len();
        let theta = self.theta;
        let mut brk = vec![f64::INFINITY; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            if g[i] < 0.0 {
                if upper[i].is_finite() {
                    brk[i] = (x[i] - upper[i]) / g[i];
                }
            } else if g[i] > 0.0 && lower[i].is_finite() {
                brk[i] = (x[i] - lower[i]) / g[i];
            }
            if g[i] != 0.0 && brk[i] > 0.0 {
                d[i] = -g[i];
            }
        }
        let mut xcp = x.to_vec();
        let width = self.width();
        let mut c = DVector::zeros(width);
        if d.iter().all(|&v| v == 0.0) {
            return (xcp, c);
        }

        let mut p = self.wt_times(&d, None);
        let mut f1 = -dot(&d, &d);
        let mut f2 = -theta * f1 - if width > 0 { p.dot(&self.m_times(&p)) } else { 0.0 };
        let f2_floor = f64::EPSILON * f2.abs();
        let mut dt_min = -f1 / f2;
        let mut t_old = 0.0;

        let mut order: Vec<usize> = (0..n)
            .filter(|&i| d[i] != 0.0 && brk[i].is_finite())
            .collect();
        order.sort_by(|&a, &b| brk[a].total_cmp(&brk[b]).then(a.cmp(&b)));

        for &b in &order {
            let dt = brk[b] - t_old;
            if dt_min < dt {
                break;
            }
            xcp[b] = if d[b] > 0.0 { upper[b] } else { lower[b] };
            let zb = xcp[b] - x[b];
            let gb = g[b];
            if width > 0 {
                c += dt * &p;
                let wb = self.w_row(b);
                let mwb = self.m_times(&wb);
                f1 += dt * f2 + gb * gb + theta * gb * zb - gb * mwb.dot(&c);
                f2 += -theta * gb * gb - 2.0 * gb * mwb.dot(&p) - gb * gb * wb.dot(&mwb);
                p += gb * wb;
            } else {
                f1 += dt * f2 + gb * gb + theta * gb * zb;
                f2 -= theta * gb * gb;
            }
            f2 = f2.max(f2_floor);
            d[b] = 0.0;
            t_old = brk[b];
            dt_min = if f2 > 0.0 { -f1 / f2 } else { 0.0 };
        }

        let dt_min = dt_min.max(0.0);
        let t = t_old + dt_min;
        for i in 0..n {
            if d[i] != 0.0 {
                xcp[i] = (x[i] + t * d[i]).clamp(lower[i], upper[i]);
            }
        }
        if width > 0 {
            c += dt_min * &p;
        }
        (xcp, c)
    }

    /// Minimizes the model over the variables that are free at `xcp`, then
    /// truncates the step to stay inside the box.
    pub fn subspace_min(
        &self,
        x: &[f64],
        g: &[f64],
        lower: &[f64],
        upper: &[f64],
        xcp: &[f64],
        c: &DVector<f64>,
    ) -> Vec<f64> {
        let free: Vec<usize> = (0..x.len())
            .filter(|&i| xcp[i] > lower[i] && xcp[i] < upper[i])
            .collect();
        let mut xbar = xcp.to_vec();
        if free.is_empty() {
            return xbar;
        }
        let theta = self.theta;
        let width = self.width();
        let mc = if width > 0 { Some(self.m_times(c)) } else { None };
        let r: Vec<f64> = free
            .iter()
            .map(|&i| {
                let mut ri = g[i] + theta * (xcp[i] - x[i]);
                if let Some(mc) = &mc {
                    ri -= self.w_row(i).dot(mc);
                }
                ri
            })
            .collect();

        let du: Vec<f64> = if width == 0 {
            r.iter().map(|v| -v / theta).collect()
        } else {
            // Sherman-Morrison-Woodbury on the reduced Hessian θI - ZᵀWMWᵀZ.
            let rows: Vec<DVector<f64>> = free.iter().map(|&i| self.w_row(i)).collect();
            let mut wtzr = DVector::zeros(width);
            let mut wtzzw = DMatrix::zeros(width, width);
            for (row, ri) in rows.iter().zip(&r) {
                wtzr += *ri * row;
                wtzzw += row * row.transpose();
            }
            let v = self.m_times(&wtzr);
            let nmat = DMatrix::identity(width, width) - (&self.m * wtzzw) / theta;
            let v = match nmat.lu().solve(&v) {
                Some(v) => v,
                None => return subspace_fallback(x, g, lower, upper, xcp, &free, theta),
            };
            rows.iter()
                .zip(&r)
                .map(|(row, ri)| -ri / theta - row.dot(&v) / (theta * theta))
                .collect()
        };

        let mut alpha: f64 = 1.0;
        for (&i, &di) in free.iter().zip(&du) {
            if di > 0.0 {
                alpha = alpha.min((upper[i] - xcp[i]) / di);
            } else if di < 0.0 {
                alpha = alpha.min((lower[i] - xcp[i]) / di);
            }
        }
        let alpha = alpha.max(0.0);
        for (&i, &di) in free.iter().zip(&du) {
            xbar[i] = (xcp[i] + alpha * di).clamp(lower[i], upper[i]);
        }
        xbar
    }
}

fn subspace_fallback(
    x: &[f64],
    g: &[f64],
    lower: &[f64],
    upper: &[f64],
    xcp: &[f64],
    free: &[usize],
    theta: f64,
) -> Vec<f64> {
    let mut xbar = xcp.to_vec();
    for &i in free {
        xbar[i] = (x[i] - g[i] / theta).clamp(lower[i], upper[i]);
    }
    xbar
}
