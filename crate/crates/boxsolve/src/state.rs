use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::BoxError;

const MAGIC: &str = "boxsolve-state";
const VERSION: u32 = 1;

/// Resumable solver state: the current iterate, the stored correction pairs,
/// the scaling of the initial Hessian approximation, and cumulative counters.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    /// Steps `s_k = x_{k+1} - x_k`, oldest first.
    pub steps: VecDeque<Vec<f64>>,
    /// Gradient differences `y_k = g_{k+1} - g_k`, paired with `steps`.
    pub grad_diffs: VecDeque<Vec<f64>>,
    /// Scaling `θ` of the initial Hessian `θ I`. `None` until one pair has
    /// been accepted.
    pub theta: Option<f64>,
    pub memory: usize,
    pub iterations: usize,
    pub evaluations: usize,
}

impl SolverState {
    pub fn new(x: Vec<f64>, memory: usize) -> Self {
        Self {
            x,
            steps: VecDeque::with_capacity(memory),
            grad_diffs: VecDeque::with_capacity(memory),
            theta: None,
            memory,
            iterations: 0,
            evaluations: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn pairs(&self) -> usize {
        self.steps.len()
    }

    /// Accepts `(s, y)` if it satisfies the curvature condition
    /// `sᵀy > 1e-12 ‖s‖ ‖y‖`, evicting the oldest pair when full.
    pub fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        let yy = dot(&y, &y);
        if !(sy > 1e-12 * (ss * yy).sqrt()) || !sy.is_finite() || !yy.is_finite() {
            return false;
        }
        if self.memory == 0 {
            return false;
        }
        if self.steps.len() == self.memory {
            self.steps.pop_front();
            self.grad_diffs.pop_front();
        }
        self.steps.push_back(s);
        self.grad_diffs.push_back(y);
        self.theta = Some(yy / sy);
        true
    }

    pub fn clear_history(&mut self) {
        self.steps.clear();
        self.grad_diffs.clear();
    }

    /// Serializes as a versioned text blob: a tag line, the sizes and
    /// counters, `θ`, then the iterate and each stored vector on its own
    /// line. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {VERSION}");
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            self.dim(),
            self.memory,
            self.pairs(),
            self.iterations,
            self.evaluations
        );
        match self.theta {
            Some(t) => {
                let _ = writeln!(out, "{t:?}");
            }
            None => out.push_str("none\n"),
        }
        write_row(&mut out, &self.x);
        for s in &self.steps {
            write_row(&mut out, s);
        }
        for y in &self.grad_diffs {
            write_row(&mut out, y);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BoxError> {
        let bad = |msg: &str| BoxError::Parse(msg.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let mut tag = header.split_whitespace();
        if tag.next() != Some(MAGIC) {
            return Err(bad("missing tag"));
        }
        let version: u32 = tag
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing version"))?;
        if version != VERSION {
            return Err(BoxError::Parse(format!("unsupported version {version}")));
        }
        let sizes: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing sizes"))?
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| bad("bad size")))
            .collect::<Result<_, _>>()?;
        let [n, memory, pairs, iterations, evaluations] = sizes[..] else {
            return Err(bad("expected five size fields"));
        };
        if pairs > memory {
            return Err(bad("more pairs than memory"));
        }
        let theta = match lines.next().ok_or_else(|| bad("missing theta"))?.trim() {
            "none" => None,
            t => Some(t.parse().map_err(|_| bad("bad theta"))?),
        };
        let mut read_row = || -> Result<Vec<f64>, BoxError> {
            let row: Vec<f64> = lines
                .next()
                .ok_or_else(|| bad("truncated vectors"))?
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| bad("bad float")))
                .collect::<Result<_, _>>()?;
            if row.len() != n {
                return Err(BoxError::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            Ok(row)
        };
        let x = read_row()?;
        let steps = (0..pairs).map(|_| read_row()).collect::<Result<_, _>>()?;
        let grad_diffs = (0..pairs).map(|_| read_row()).collect::<Result<_, _>>()?;
        Ok(Self {
            x,
            steps,
            grad_diffs,
            theta,
            memory,
            iterations,
            evaluations,
        })
    }
}

fn write_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_pairs_without_curvature() {
        let mut st = SolverState::new(vec![0.0; 2], 3);
        assert!(!st.push_pair(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!st.push_pair(vec![1.0, 0.0], vec![0.0, 1.0]));
        assert!(st.push_pair(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert_eq!(st.theta, Some(2.0));
    }

    #[test]
    fn history_is_bounded_by_memory() {
        let mut st = SolverState::new(vec![0.0], 2);
        for k in 1..=5 {
            st.push_pair(vec![k as f64], vec![1.0]);
        }
        assert_eq!(st.pairs(), 2);
        assert_eq!(st.steps[0], vec![4.0]);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(SolverState::from_text("").is_err());
        assert!(SolverState::from_text("other 1\n").is_err());
        assert!(SolverState::from_text("boxsolve-state 9\n1 1 0 0 0\nnone\n0\n").is_err());
        assert!(SolverState::from_text("boxsolve-state 1\n2 1 0 0 0\nnone\n0\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip(
            x in prop::collection::vec(-1e6f64..1e6, 1..6),
            scale in prop::collection::vec(0.5f64..2.0, 0..4),
            iterations in 0usize..1000,
        ) {
            let n = x.len();
            let mut st = SolverState::new(x.clone(), 3);
            st.iterations = iterations;
            st.evaluations = iterations * 2 + 1;
            for (k, a) in scale.iter().enumerate() {
                let s: Vec<f64> = (0..n).map(|i| (i + k + 1) as f64 * 0.1).collect();
                let y: Vec<f64> = s.iter().map(|v| v * a).collect();
                st.push_pair(s, y);
            }
            let back = SolverState::from_text(&st.to_text()).unwrap();
            prop_assert_eq!(back, st);
        }
    }
}
