//! Limited-memory BFGS minimization subject to simple bounds (L-BFGS-B).
//!
//! Each iteration computes a generalized Cauchy point along the projected
//! steepest-descent path, minimizes the limited-memory quadratic model over the
//! variables left free at that point, and then backtracks along the resulting
//! direction until sufficient decrease holds. Solver state (iterate plus
//! correction pairs) can be captured and resumed, which is what makes repeated
//! solves of slowly changing problems cheap.

mod compact;
mod error;
mod solver;
mod state;

pub use error::BoxError;
pub use solver::{hot_start, minimize, BoxResult, Settings, Start, Termination};
pub use state::SolverState;

/// Something that can be minimized: a value and gradient at a point.
pub trait Objective {
    /// Writes the gradient at `x` into `grad` and returns the value.
    ///
    /// Returning `None` rejects the point; the line search treats it like a
    /// failed sufficient-decrease test and backtracks.
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64>;

    /// Called once the most recently evaluated point has become the iterate.
    fn accept(&mut self, _x: &[f64]) {}
}

/// Adapts a plain closure `f(x, grad) -> value` to [`Objective`].
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        Some((self.0)(x, grad))
    }
}

impl<O: Objective + ?Sized> Objective for &mut O {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        (**self).evaluate(x, grad)
    }

    fn accept(&mut self, x: &[f64]) {
        (**self).accept(x)
    }
}

/// An objective together with its bounds. Infinite bounds are allowed.
pub struct BoxProblem<O> {
    pub objective: O,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<O: Objective> BoxProblem<O> {
    pub fn new(objective: O, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoxError> {
        if lower.len() != upper.len() {
            return Err(BoxError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if let Some(index) = lower
            .iter()
            .zip(&upper)
            .position(|(l, u)| l.is_nan() || u.is_nan() || l > u)
        {
            return Err(BoxError::InvertedBounds { index });
        }
        Ok(Self {
            objective,
            lower,
            upper,
        })
    }

    /// Problem with no bounds at all.
    pub fn unbounded(objective: O, n: usize) -> Self {
        Self {
            objective,
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Clips `x` into the box in place.
    pub fn project(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }

    /// Infinity norm of the projected gradient `P(x - g) - x`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((xi, gi), (l, u))| ((xi - gi).clamp(*l, *u) - xi).abs())
            .fold(0.0, f64::max)
    }
}
