//! Complex Hermitian semidefinite programs.
//!
//! A [`ConeProgram`] has one Hermitian matrix variable `X ⪰ 0` of size `n`,
//! an optional linear objective `maximize tr(C X)`, linear trace constraints
//! `tr(A_i X) {≤,=} b_i`, and an optional unit-diagonal flag. Programs are
//! mapped to the real embedding and handed to the interior-point core.
//!
//! Infeasibility is decided by a phase-I program that maximizes a common
//! margin `τ` over the inequality rows:
//!
//! ```text
//!   max τ   s.t.  tr(A_i X) + τ·r_i ≤ b_i,  equalities,  X ⪰ 0,  L ≤ τ ≤ 1
//! ```
//!
//! with `r_i = max(1, ‖A_i‖_F)` and `L` a lower bound derived from the trace
//! bound of the feasible set (`n` under the unit-diagonal flag, otherwise
//! [`ConeProgram::trace_bound`] or [`DEFAULT_TRACE_BOUND`]). A negative
//! optimal margin certifies infeasibility.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::ConicError;
use crate::hermitian::{embed, frobenius, is_hermitian, trace_product, unembed, CMat, HermitianEigen};
use crate::ipm::{self, ConMat, IpmSettings, IpmStatus, RealConstraint, RealSdp};

/// Largest accepted matrix dimension.
pub const DEFAULT_MAX_DIM: usize = 128;
/// Trace bound assumed when a program carries neither a unit diagonal nor an
/// explicit bound.
pub const DEFAULT_TRACE_BOUND: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub matrix: CMat,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ConeProgram {
    pub n: usize,
    /// `Some(C)` maximizes `tr(C X)`; `None` is a pure feasibility problem.
    pub objective: Option<CMat>,
    pub constraints: Vec<Constraint>,
    /// Forces `[X]_jj = 1` for every `j`.
    pub diag_one: bool,
    /// Upper bound on `tr(X)` over the feasible set, used by phase I.
    pub trace_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: CMat,
    /// `tr(C X)` for objective programs, `0` for feasibility programs.
    pub value: f64,
    /// Largest constraint violation of `x`, recomputed from the program data.
    pub max_violation: f64,
    /// Phase-I margin, when phase I was run.
    pub margin: Option<f64>,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub max_dim: usize,
    /// Absolute violation accepted per row (scaled by `max(1, ‖A_i‖_F)`).
    pub feas_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iter: 150, tol: 1e-9, max_dim: DEFAULT_MAX_DIM, feas_tol: 1e-7 }
    }
}

impl ConeProgram {
    pub fn new(n: usize) -> Self {
        Self { n, objective: None, constraints: Vec::new(), diag_one: false, trace_bound: None }
    }

    pub fn maximize(mut self, c: CMat) -> Self {
        self.objective = Some(c);
        self
    }

    pub fn with_diag_one(mut self) -> Self {
        self.diag_one = true;
        self
    }

    pub fn with_trace_bound(mut self, t: f64) -> Self {
        self.trace_bound = Some(t);
        self
    }

    pub fn push(&mut self, matrix: CMat, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint { matrix, sense, rhs });
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.n == 0 {
            return Err(ConicError::Invalid("matrix dimension must be positive".into()));
        }
        let check = |m: &CMat, what: &str| -> Result<(), ConicError> {
            if m.nrows() != self.n || m.ncols() != self.n {
                return Err(ConicError::Dimension(format!(
                    "{what} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols(),
                    n = self.n
                )));
            }
            if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(ConicError::NonFinite(what.into()));
            }
            if !is_hermitian(m, 1e-9) {
                return Err(ConicError::NotHermitian(what.into()));
            }
            Ok(())
        };
        if let Some(c) = &self.objective {
            check(c, "objective")?;
        }
        for (i, con) in self.constraints.iter().enumerate() {
            check(&con.matrix, &format!("constraint {i}"))?;
            if !con.rhs.is_finite() {
                return Err(ConicError::NonFinite(format!("rhs of constraint {i}")));
            }
        }
        Ok(())
    }

    fn effective_trace_bound(&self) -> f64 {
        if self.diag_one {
            self.n as f64
        } else {
            self.trace_bound.unwrap_or(DEFAULT_TRACE_BOUND)
        }
    }

    /// Largest violation of any constraint (and of the unit diagonal) at `x`,
    /// each row measured relative to `max(1, ‖A_i‖_F)`.
    pub fn max_violation(&self, x: &CMat) -> f64 {
        let mut worst: f64 = 0.0;
        for con in &self.constraints {
            let lhs = trace_product(&con.matrix, x);
            let scale = frobenius(&con.matrix).max(1.0);
            let v = match con.sense {
                Sense::Le => (lhs - con.rhs).max(0.0),
                Sense::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        if self.diag_one {
            for j in 0..self.n {
                worst = worst.max((x[(j, j)].re - 1.0).abs());
            }
        }
        worst
    }

    /// Plain-text dump: dimensions, flags, then each matrix row by row as
    /// `re,im` pairs.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let write_mat = |out: &mut String, m: &CMat| {
            for i in 0..m.nrows() {
                let row: Vec<String> =
                    (0..m.ncols()).map(|j| format!("{:e},{:e}", m[(i, j)].re, m[(i, j)].im)).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        let _ = writeln!(out, "n {}", self.n);
        let _ = writeln!(out, "diag_one {}", u8::from(self.diag_one));
        match self.trace_bound {
            Some(t) => {
                let _ = writeln!(out, "trace_bound {t:e}");
            }
            None => {
                let _ = writeln!(out, "trace_bound none");
            }
        }
        match &self.objective {
            Some(c) => {
                let _ = writeln!(out, "objective maximize");
                write_mat(&mut out, c);
            }
            None => {
                let _ = writeln!(out, "objective none");
            }
        }
        let _ = writeln!(out, "constraints {}", self.constraints.len());
        for con in &self.constraints {
            let sense = match con.sense {
                Sense::Le => "le",
                Sense::Eq => "eq",
            };
            let _ = writeln!(out, "{sense} {:e}", con.rhs);
            write_mat(&mut out, &con.matrix);
        }
        out
    }

    /// Parses the format written by [`ConeProgram::dump`].
    pub fn parse_dump(text: &str) -> Result<Self, ConicError> {
        let bad = |msg: &str| ConicError::Invalid(format!("dump: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut field = |key: &str| -> Result<String, ConicError> {
            let line = lines.next().ok_or_else(|| bad("unexpected end"))?;
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            if head != key {
                return Err(bad(&format!("expected `{key}`")));
            }
            Ok(rest.trim().to_string())
        };
        let n: usize = field("n")?.parse().map_err(|_| bad("n"))?;
        let diag_one = field("diag_one")? == "1";
        let tb = field("trace_bound")?;
        let trace_bound = if tb == "none" { None } else { Some(tb.parse().map_err(|_| bad("trace_bound"))?) };
        let has_obj = field("objective")? == "maximize";

        let mut lines = text.lines().filter(|l| !l.trim().is_empty()).skip(4);
        let read_mat = |lines: &mut dyn Iterator<Item = &str>| -> Result<CMat, ConicError> {
            let mut m = CMat::zeros(n, n);
            for i in 0..n {
                let line = lines.next().ok_or_else(|| bad("matrix truncated"))?;
                let toks: Vec<&str> = line.split_whitespace().collect();
                if toks.len() != n {
                    return Err(bad("row length"));
                }
                for (j, tok) in toks.into_iter().enumerate() {
                    let (re, im) = tok.split_once(',').ok_or_else(|| bad("entry"))?;
                    m[(i, j)] = Complex64::new(re.parse().map_err(|_| bad("re"))?, im.parse().map_err(|_| bad("im"))?);
                }
            }
            Ok(m)
        };
        let objective = if has_obj { Some(read_mat(&mut lines)?) } else { None };
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("constraints "))
            .ok_or_else(|| bad("constraints header"))?
            .trim()
            .parse()
            .map_err(|_| bad("constraint count"))?;
        let mut constraints = Vec::with_capacity(count);
        for _ in 0..count {
            let head = lines.next().ok_or_else(|| bad("constraint header"))?;
            let (sense, rhs) = head.split_once(' ').ok_or_else(|| bad("constraint header"))?;
            let sense = match sense {
                "le" => Sense::Le,
                "eq" => Sense::Eq,
                _ => return Err(bad("sense")),
            };
            let rhs: f64 = rhs.trim().parse().map_err(|_| bad("rhs"))?;
            let matrix = read_mat(&mut lines)?;
            constraints.push(Constraint { matrix, sense, rhs });
        }
        Ok(Self { n, objective, constraints, diag_one, trace_bound })
    }
}

fn is_real_diagonal(m: &CMat) -> bool {
    let n = m.nrows();
    (0..n).all(|i| m[(i, i)].im == 0.0 && (0..n).all(|j| i == j || m[(i, j)] == Complex64::new(0.0, 0.0)))
}

/// Real-embedded constraint matrix scaled so that `<Ã, X̃> = tr(A X)`.
fn embed_constraint(m: &CMat) -> ConMat {
    let n = m.nrows();
    if is_real_diagonal(m) {
        let mut entries = Vec::new();
        for j in 0..n {
            let d = m[(j, j)].re;
            if d != 0.0 {
                entries.push((j, j, 0.5 * d));
                entries.push((j + n, j + n, 0.5 * d));
            }
        }
        ConMat::Sparse(entries)
    } else {
        ConMat::Dense(embed(m) * 0.5)
    }
}

struct Built {
    real: RealSdp,
    /// Index of `t1 = τ - L` in the linear block (phase I only).
    margin_var: Option<usize>,
    margin_offset: f64,
}

fn build(prog: &ConeProgram, phase_one: bool) -> Built {
    let n = prog.n;
    let dim = 2 * n;
    let mut cons = Vec::new();
    let mut n_lin = 0;
    let le_count = prog.constraints.iter().filter(|c| c.sense == Sense::Le).count();
    let (t1, t2) = if phase_one { (Some(le_count), Some(le_count + 1)) } else { (None, None) };

    let trace_bound = prog.effective_trace_bound();
    let margin_lower = prog
        .constraints
        .iter()
        .filter(|c| c.sense == Sense::Le)
        .map(|c| {
            let r = frobenius(&c.matrix).max(1.0);
            (c.rhs - frobenius(&c.matrix) * trace_bound) / r
        })
        .fold(0.0, f64::min)
        - 1.0;

    for con in &prog.constraints {
        let mat = embed_constraint(&con.matrix);
        match con.sense {
            Sense::Eq => cons.push(RealConstraint { mat, lin: vec![], rhs: con.rhs }),
            Sense::Le => {
                let slack = n_lin;
                n_lin += 1;
                let mut lin = vec![(slack, 1.0)];
                let mut rhs = con.rhs;
                if let Some(t1) = t1 {
                    let r = frobenius(&con.matrix).max(1.0);
                    lin.push((t1, r));
                    rhs -= r * margin_lower;
                }
                cons.push(RealConstraint { mat, lin, rhs });
            }
        }
    }
    if prog.diag_one {
        for j in 0..n {
            cons.push(RealConstraint {
                mat: ConMat::Sparse(vec![(j, j, 0.5), (j + n, j + n, 0.5)]),
                lin: vec![],
                rhs: 1.0,
            });
        }
    }
    let mut c = DMatrix::zeros(dim, dim);
    if phase_one {
        n_lin += 2;
        let (t1, t2) = (t1.unwrap(), t2.unwrap());
        cons.push(RealConstraint {
            mat: ConMat::Sparse(vec![]),
            lin: vec![(t1, 1.0), (t2, 1.0)],
            rhs: 1.0 - margin_lower,
        });
    } else if let Some(obj) = &prog.objective {
        // The objective only fixes a direction; unit scale keeps the IPM
        // residuals comparable with the normalized rows.
        let scale = frobenius(obj);
        if scale > 0.0 {
            c = embed(obj) * (-0.5 / scale);
        }
    }
    let mut c_lin = DVector::zeros(n_lin);
    if let Some(t1) = t1 {
        c_lin[t1] = -1.0;
    }
    let mut real = RealSdp { n: dim, n_lin, c, c_lin, cons };
    real.normalize_rows();
    Built { real, margin_var: t1, margin_offset: margin_lower }
}

fn finish(prog: &ConeProgram, x_real: &DMatrix<f64>) -> (CMat, f64) {
    let mut x = unembed(x_real);
    if prog.diag_one {
        let d: Vec<f64> = (0..prog.n).map(|j| x[(j, j)].re.max(1e-300).sqrt()).collect();
        for i in 0..prog.n {
            for j in 0..prog.n {
                x[(i, j)] /= d[i] * d[j];
            }
        }
    }
    let viol = prog.max_violation(&x);
    (x, viol)
}

fn psd_ok(x: &CMat) -> bool {
    let eig = HermitianEigen::new(x);
    eig.min_value() >= -1e-7 * eig.max_value().abs().max(1.0)
}

pub fn solve_sdp(prog: &ConeProgram) -> Result<SdpSolution, ConicError> {
    solve_sdp_with(prog, &SolverOptions::default())
}

pub fn solve_sdp_with(prog: &ConeProgram, opts: &SolverOptions) -> Result<SdpSolution, ConicError> {
    prog.validate()?;
    if prog.n > opts.max_dim {
        return Err(ConicError::TooLarge { n: prog.n, cap: opts.max_dim });
    }
    let settings = IpmSettings { max_iter: opts.max_iter, tol: opts.tol };
    let has_le = prog.constraints.iter().any(|c| c.sense == Sense::Le);

    let phase_one = |iters: &mut usize| -> Option<(f64, CMat, f64)> {
        let built = build(prog, true);
        let res = ipm::solve(&built.real, settings);
        *iters += res.iterations;
        if res.status != IpmStatus::Converged {
            return None;
        }
        let margin = built.margin_offset + res.x_lin[built.margin_var.unwrap()];
        let (x, viol) = finish(prog, &res.x);
        Some((margin, x, viol))
    };

    let mut iterations = 0;
    let failure = |x: CMat, iterations: usize, status: SdpStatus, margin: Option<f64>| SdpSolution {
        status,
        max_violation: prog.max_violation(&x),
        x,
        value: 0.0,
        margin,
        iterations,
    };

    if prog.objective.is_none() && has_le {
        return Ok(match phase_one(&mut iterations) {
            Some((margin, x, viol)) if margin >= -opts.feas_tol => {
                if viol <= opts.feas_tol && psd_ok(&x) {
                    SdpSolution {
                        status: SdpStatus::Optimal,
                        x,
                        value: 0.0,
                        max_violation: viol,
                        margin: Some(margin),
                        iterations,
                    }
                } else {
                    failure(x, iterations, SdpStatus::NumericalFailure, Some(margin))
                }
            }
            Some((margin, x, _)) => failure(x, iterations, SdpStatus::Infeasible, Some(margin)),
            None => failure(CMat::zeros(prog.n, prog.n), iterations, SdpStatus::NumericalFailure, None),
        });
    }

    let built = build(prog, false);
    let res = ipm::solve(&built.real, settings);
    iterations += res.iterations;
    if res.status == IpmStatus::Converged {
        let (x, viol) = finish(prog, &res.x);
        if viol <= opts.feas_tol && psd_ok(&x) {
            let value = prog.objective.as_ref().map_or(0.0, |c| trace_product(c, &x));
            return Ok(SdpSolution {
                status: SdpStatus::Optimal,
                x,
                value,
                max_violation: viol,
                margin: None,
                iterations,
            });
        }
    }
    if !has_le {
        return Ok(failure(CMat::zeros(prog.n, prog.n), iterations, SdpStatus::NumericalFailure, None));
    }
    Ok(match phase_one(&mut iterations) {
        Some((margin, x, _)) if margin < -opts.feas_tol => failure(x, iterations, SdpStatus::Infeasible, Some(margin)),
        Some((margin, x, _)) => failure(x, iterations, SdpStatus::NumericalFailure, Some(margin)),
        None => failure(CMat::zeros(prog.n, prog.n), iterations, SdpStatus::NumericalFailure, None),
    })
}
