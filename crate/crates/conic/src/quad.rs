//! Feasibility of separable convex quadratic systems.
//!
//! Each row reads `Σ a_j x_j ≥ Σ c_j x_j² + const` with `c_j ≥ 0`. Boxes
//! `l_j ≤ x_j ≤ u_j` and an optional linear budget `Σ b_j x_j ≤ B` complete
//! the system. Writing every constraint as `h_i(x) ≤ 0` with `h_i` convex, the
//! solver runs the barrier method on
//!
//! ```text
//!   min s   s.t.  h_i(x) ≤ s
//! ```
//!
//! and stops at the first iterate with `s < 0`, which is a strictly feasible
//! point. Infeasibility is certified once the barrier lower bound `s - m/t`
//! turns positive.

use nalgebra::{DMatrix, DVector};

use crate::error::ConicError;

#[derive(Debug, Clone, Default)]
pub struct QuadConstraint {
    /// `(index, a_j)` terms of the dominating linear side.
    pub linear: Vec<(usize, f64)>,
    /// `(index, c_j)` terms of the quadratic side, `c_j ≥ 0`.
    pub quad: Vec<(usize, f64)>,
    pub constant: f64,
}

impl QuadConstraint {
    /// Slack `Σ a_j x_j - Σ c_j x_j² - const`; non-negative when satisfied.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.linear.iter().map(|&(j, a)| a * x[j]).sum();
        let quad: f64 = self.quad.iter().map(|&(j, c)| c * x[j] * x[j]).sum();
        lin - quad - self.constant
    }
}

#[derive(Debug, Clone)]
pub struct QuadFeasibility {
    pub dim: usize,
    pub constraints: Vec<QuadConstraint>,
    pub lower: Vec<f64>,
    /// May contain `f64::INFINITY`.
    pub upper: Vec<f64>,
    /// `(weights, cap)` for `Σ b_j x_j ≤ cap`.
    pub budget: Option<(Vec<f64>, f64)>,
    /// Optional warm start; projected into the box before use.
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct QuadSolution {
    pub status: QuadStatus,
    pub x: Vec<f64>,
    /// Final value of the common relaxation `s`; negative when feasible.
    pub relaxation: f64,
    pub newton_steps: usize,
}

impl QuadFeasibility {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            constraints: Vec::new(),
            lower: vec![0.0; dim],
            upper: vec![f64::INFINITY; dim],
            budget: None,
            start: None,
        }
    }

    fn validate(&self) -> Result<(), ConicError> {
        if self.lower.len() != self.dim || self.upper.len() != self.dim {
            return Err(ConicError::Dimension("box bounds must have one entry per variable".into()));
        }
        if let Some((w, cap)) = &self.budget {
            if w.len() != self.dim {
                return Err(ConicError::Dimension("budget weights must have one entry per variable".into()));
            }
            if !cap.is_finite() {
                return Err(ConicError::NonFinite("budget cap".into()));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            let idx_ok = c.linear.iter().chain(&c.quad).all(|&(j, _)| j < self.dim);
            if !idx_ok {
                return Err(ConicError::Dimension(format!("constraint {i} indexes past the variable vector")));
            }
            if c.quad.iter().any(|&(_, q)| q < 0.0) {
                return Err(ConicError::Invalid(format!("constraint {i} has a negative quadratic weight")));
            }
            let finite = c.linear.iter().chain(&c.quad).all(|&(_, v)| v.is_finite()) && c.constant.is_finite();
            if !finite {
                return Err(ConicError::NonFinite(format!("constraint {i}")));
            }
        }
        if self.lower.iter().any(|l| !l.is_finite()) || self.upper.iter().any(|u| u.is_nan()) {
            return Err(ConicError::NonFinite("box bounds".into()));
        }
        Ok(())
    }

    /// Largest violation over all rows, boxes and the budget.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().map(|c| (-c.slack(x)).max(0.0));
        let boxes = (0..self.dim).map(|j| (self.lower[j] - x[j]).max(0.0).max(x[j] - self.upper[j]));
        let budget =
            self.budget.iter().map(|(w, cap)| (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - cap).max(0.0));
        rows.chain(boxes).chain(budget).fold(0.0, f64::max)
    }
}

/// A convex row `h(x) = Σ q_j x_j² + Σ l_j x_j + c ≤ 0` in canonical form.
struct Row {
    lin: Vec<(usize, f64)>,
    quad: Vec<(usize, f64)>,
    constant: f64,
}

impl Row {
    fn value(&self, x: &[f64]) -> f64 {
        self.lin.iter().map(|&(j, a)| a * x[j]).sum::<f64>()
            + self.quad.iter().map(|&(j, c)| c * x[j] * x[j]).sum::<f64>()
            + self.constant
    }
}

fn canonical_rows(prob: &QuadFeasibility) -> Vec<Row> {
    let mut rows: Vec<Row> = prob
        .constraints
        .iter()
        .map(|c| Row {
            lin: c.linear.iter().map(|&(j, a)| (j, -a)).collect(),
            quad: c.quad.clone(),
            constant: c.constant,
        })
        .collect();
    for j in 0..prob.dim {
        rows.push(Row { lin: vec![(j, -1.0)], quad: vec![], constant: prob.lower[j] });
        if prob.upper[j].is_finite() {
            rows.push(Row { lin: vec![(j, 1.0)], quad: vec![], constant: -prob.upper[j] });
        }
    }
    if let Some((w, cap)) = &prob.budget {
        let lin = w.iter().enumerate().filter(|(_, &b)| b != 0.0).map(|(j, &b)| (j, b)).collect();
        rows.push(Row { lin, quad: vec![], constant: -cap });
    }
    rows
}

const MAX_NEWTON: usize = 400;

pub fn solve_quad_feasibility(prob: &QuadFeasibility) -> Result<QuadSolution, ConicError> {
    prob.validate()?;
    let d = prob.dim;
    let rows = canonical_rows(prob);
    let m = rows.len() as f64;

    let mut x: Vec<f64> = match &prob.start {
        Some(s) if s.len() == d => s.clone(),
        _ => (0..d)
            .map(|j| {
                let (l, u) = (prob.lower[j], prob.upper[j]);
                if u.is_finite() {
                    0.5 * (l + u)
                } else {
                    l + 1.0
                }
            })
            .collect(),
    };
    for j in 0..d {
        x[j] = x[j].max(prob.lower[j]).min(prob.upper[j]);
    }
    let worst = |x: &[f64]| rows.iter().map(|r| r.value(x)).fold(f64::NEG_INFINITY, f64::max);
    let h0 = worst(&x);
    if h0 < 0.0 {
        return Ok(QuadSolution { status: QuadStatus::Feasible, x, relaxation: h0, newton_steps: 0 });
    }
    let mut s = h0 + 1.0;
    let mut t = 1.0 / (h0.abs() + 1.0);
    let mut steps = 0;

    let barrier = |x: &[f64], s: f64, t: f64| -> f64 {
        let mut acc = t * s;
        for r in &rows {
            let gap = s - r.value(x);
            if gap <= 0.0 {
                return f64::INFINITY;
            }
            acc -= gap.ln();
        }
        acc
    };

    loop {
        // Centering by damped Newton.
        loop {
            if steps >= MAX_NEWTON {
                return Ok(QuadSolution {
                    status: QuadStatus::NumericalFailure,
                    x,
                    relaxation: s,
                    newton_steps: steps,
                });
            }
            let mut grad = DVector::<f64>::zeros(d + 1);
            let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
            grad[d] = t;
            for r in &rows {
                let gap = s - r.value(&x);
                let inv = 1.0 / gap;
                // Gradient of (h(x) - s) with respect to (x, s).
                let mut g = vec![(d, -1.0)];
                let mut dense = vec![0.0; d];
                for &(j, a) in &r.lin {
                    dense[j] += a;
                }
                for &(j, c) in &r.quad {
                    dense[j] += 2.0 * c * x[j];
                    hess[(j, j)] += 2.0 * c * inv;
                }
                g.extend(dense.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, v)| (j, *v)));
                for &(a, va) in &g {
                    grad[a] += va * inv;
                    for &(b, vb) in &g {
                        hess[(a, b)] += va * vb * inv * inv;
                    }
                }
            }
            let ridge = 1e-12 * (1.0 + hess.diagonal().amax());
            for i in 0..=d {
                hess[(i, i)] += ridge;
            }
            let Some(chol) = hess.cholesky() else {
                return Ok(QuadSolution {
                    status: QuadStatus::NumericalFailure,
                    x,
                    relaxation: s,
                    newton_steps: steps,
                });
            };
            let dir = -chol.solve(&grad);
            let decrement = -grad.dot(&dir);
            steps += 1;
            if !decrement.is_finite() {
                return Ok(QuadSolution {
                    status: QuadStatus::NumericalFailure,
                    x,
                    relaxation: s,
                    newton_steps: steps,
                });
            }
            if decrement < 1e-10 {
                break;
            }
            let f0 = barrier(&x, s, t);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let xn: Vec<f64> = (0..d).map(|j| x[j] + alpha * dir[j]).collect();
                let sn = s + alpha * dir[d];
                let f1 = barrier(&xn, sn, t);
                if f1 <= f0 - 0.25 * alpha * decrement {
                    x = xn;
                    s = sn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
            if s < 0.0 {
                let h = worst(&x);
                if h < 0.0 {
                    return Ok(QuadSolution { status: QuadStatus::Feasible, x, relaxation: h, newton_steps: steps });
                }
            }
        }
        if s - m / t > 0.0 {
            return Ok(QuadSolution { status: QuadStatus::Infeasible, x, relaxation: s, newton_steps: steps });
        }
        if m / t < 1e-13 {
            // Boundary case: the optimal relaxation is zero to working precision.
            let h = worst(&x);
            let status = if h <= 1e-10 { QuadStatus::Feasible } else { QuadStatus::Infeasible };
            return Ok(QuadSolution { status, x, relaxation: h, newton_steps: steps });
        }
        t *= 20.0;
    }
}
