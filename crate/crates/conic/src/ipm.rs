//! Infeasible-start primal-dual interior-point method (HKM direction with a
//! Mehrotra predictor-corrector) for real symmetric programs of the form
//!
//! ```text
//!   min  <C, X> + c'x
//!   s.t. <A_i, X> + a_i'x = b_i,   X ⪰ 0,  x ≥ 0
//! ```
//!
//! with one dense semidefinite block and a short nonnegative vector. The
//! Schur complement is assembled densely; sparse constraint matrices (lists
//! of entries) skip the matrix products entirely.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) enum ConMat {
    /// Symmetric matrix given by its full list of nonzero entries (both
    /// triangles for off-diagonal terms).
    Sparse(Vec<(usize, usize, f64)>),
    Dense(DMatrix<f64>),
}

impl ConMat {
    fn inner(&self, b: &DMatrix<f64>) -> f64 {
        match self {
            ConMat::Sparse(entries) => entries.iter().map(|&(r, c, v)| v * b[(r, c)]).sum(),
            ConMat::Dense(a) => a.dot(b),
        }
    }

    fn add_to(&self, target: &mut DMatrix<f64>, coef: f64) {
        match self {
            ConMat::Sparse(entries) => {
                for &(r, c, v) in entries {
                    target[(r, c)] += coef * v;
                }
            }
            ConMat::Dense(a) => *target += a * coef,
        }
    }

    pub(crate) fn frobenius(&self) -> f64 {
        match self {
            ConMat::Sparse(entries) => entries.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt(),
            ConMat::Dense(a) => a.norm(),
        }
    }

    fn scale(&mut self, s: f64) {
        match self {
            ConMat::Sparse(entries) => entries.iter_mut().for_each(|e| e.2 *= s),
            ConMat::Dense(a) => *a *= s,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RealConstraint {
    pub mat: ConMat,
    pub lin: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub n: usize,
    pub n_lin: usize,
    pub c: DMatrix<f64>,
    pub c_lin: DVector<f64>,
    pub cons: Vec<RealConstraint>,
}

impl RealSdp {
    /// Rescales each row to unit norm; returns the factors applied.
    pub fn normalize_rows(&mut self) -> Vec<f64> {
        self.cons
            .iter_mut()
            .map(|con| {
                let norm = (con.mat.frobenius().powi(2) + con.lin.iter().map(|l| l.1 * l.1).sum::<f64>()).sqrt();
                let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
                con.mat.scale(s);
                con.lin.iter_mut().for_each(|l| l.1 *= s);
                con.rhs *= s;
                s
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum IpmStatus {
    Converged,
    IterationLimit,
    Breakdown,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub x: DMatrix<f64>,
    pub x_lin: DVector<f64>,
    pub status: IpmStatus,
    #[cfg_attr(not(test), allow(dead_code))]
    pub primal_obj: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct IpmSettings {
    pub max_iter: usize,
    pub tol: f64,
}

struct Workspace<'a> {
    prob: &'a RealSdp,
    lin_a: DMatrix<f64>,
    rhs: DVector<f64>,
    dense_idx: Vec<usize>,
    sparse_idx: Vec<usize>,
}

impl<'a> Workspace<'a> {
    fn new(prob: &'a RealSdp) -> Self {
        let m = prob.cons.len();
        let mut lin_a = DMatrix::zeros(m, prob.n_lin);
        for (i, con) in prob.cons.iter().enumerate() {
            for &(l, v) in &con.lin {
                lin_a[(i, l)] += v;
            }
        }
        let rhs = DVector::from_iterator(m, prob.cons.iter().map(|c| c.rhs));
        let (dense_idx, sparse_idx) = (0..m).partition(|&i| matches!(prob.cons[i].mat, ConMat::Dense(_)));
        Self { prob, lin_a, rhs, dense_idx, sparse_idx }
    }

    fn apply(&self, x: &DMatrix<f64>, x_lin: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.lin_a * x_lin;
        for (i, con) in self.prob.cons.iter().enumerate() {
            out[i] += con.mat.inner(x);
        }
        out
    }

    fn adjoint(&self, y: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.prob.n;
        let mut mat = DMatrix::zeros(n, n);
        for (i, con) in self.prob.cons.iter().enumerate() {
            if y[i] != 0.0 {
                con.mat.add_to(&mut mat, y[i]);
            }
        }
        (mat, self.lin_a.tr_mul(y))
    }

    fn schur(&self, x: &DMatrix<f64>, zinv: &DMatrix<f64>, d_lin: &DVector<f64>) -> DMatrix<f64> {
        let cons = &self.prob.cons;
        let m = cons.len();
        let mut mm = DMatrix::zeros(m, m);
        for &j in &self.dense_idx {
            let ConMat::Dense(aj) = &cons[j].mat else { unreachable!() };
            let g = x * aj * zinv;
            for i in 0..m {
                let v = cons[i].mat.inner(&g);
                mm[(i, j)] = v;
                mm[(j, i)] = v;
            }
        }
        for (a, &i) in self.sparse_idx.iter().enumerate() {
            let ConMat::Sparse(ai) = &cons[i].mat else { unreachable!() };
            for &j in &self.sparse_idx[a..] {
                let ConMat::Sparse(aj) = &cons[j].mat else { unreachable!() };
                let mut v = 0.0;
                for &(p, q, vi) in ai {
                    for &(r, s, vj) in aj {
                        v += vi * vj * x[(p, r)] * zinv[(s, q)];
                    }
                }
                mm[(i, j)] = v;
                mm[(j, i)] = v;
            }
        }
        if self.prob.n_lin > 0 {
            let scaled = DMatrix::from_fn(m, self.prob.n_lin, |i, l| self.lin_a[(i, l)] * d_lin[l]);
            mm += scaled * self.lin_a.transpose();
        }
        mm
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `alpha` such that `X + alpha dX ⪰ 0` (infinite if unbounded).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(chol) = x.clone().cholesky() else { return 0.0 };
    let l = chol.l();
    let Some(w) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(s) = l.solve_lower_triangular(&w.transpose()) else { return 0.0 };
    let mut s = s;
    symmetrize(&mut s);
    let lam_min = s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    if lam_min < 0.0 {
        -1.0 / lam_min
    } else {
        f64::INFINITY
    }
}

fn max_step_lin(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter().zip(dx.iter()).filter(|(_, &d)| d < 0.0).map(|(&v, &d)| -v / d).fold(f64::INFINITY, f64::min)
}

fn inverse_spd(z: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let mut inv = z.clone().cholesky()?.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

pub(crate) fn solve(prob: &RealSdp, settings: IpmSettings) -> IpmResult {
    let n = prob.n;
    let q = prob.n_lin;
    let m = prob.cons.len();
    let ws = Workspace::new(prob);
    let dim = (n + q) as f64;

    let b_norm = ws.rhs.norm();
    let c_norm = (prob.c.norm_squared() + prob.c_lin.norm_squared()).sqrt();
    let max_a = prob.cons.iter().map(|c| c.mat.frobenius()).fold(0.0, f64::max);
    let xi = prob
        .cons
        .iter()
        .map(|c| (1.0 + c.rhs.abs()) / (1.0 + c.mat.frobenius()))
        .fold((n as f64).sqrt().max(10.0), f64::max);
    let zeta = (n as f64).sqrt().max(10.0).max(c_norm).max(max_a);

    let mut x = DMatrix::identity(n, n) * xi;
    let mut x_lin = DVector::from_element(q, xi);
    let mut z = DMatrix::identity(n, n) * zeta;
    let mut z_lin = DVector::from_element(q, zeta);
    let mut y = DVector::zeros(m);

    let mut status = IpmStatus::IterationLimit;
    let mut iterations = 0;
    let mut stalls = 0;

    for it in 0..settings.max_iter {
        iterations = it;
        let ax = ws.apply(&x, &x_lin);
        let rp = &ws.rhs - ax;
        let (aty, aty_lin) = ws.adjoint(&y);
        let rd = &prob.c - aty - &z;
        let rd_lin = &prob.c_lin - aty_lin - &z_lin;
        let pobj = prob.c.dot(&x) + prob.c_lin.dot(&x_lin);
        let dobj = ws.rhs.dot(&y);
        let compl = x.dot(&z) + x_lin.dot(&z_lin);
        let mu = compl / dim;

        let relp = rp.norm() / (1.0 + b_norm);
        let reld = (rd.norm_squared() + rd_lin.norm_squared()).sqrt() / (1.0 + c_norm);
        let gap = compl.abs().min((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        if relp < settings.tol && reld < settings.tol && gap < settings.tol {
            status = IpmStatus::Converged;
            break;
        }
        if !mu.is_finite() || x.norm() > 1e14 || y.norm() > 1e14 {
            status = IpmStatus::Breakdown;
            break;
        }

        let Some(zinv) = inverse_spd(&z) else {
            status = IpmStatus::Breakdown;
            break;
        };
        let d_lin = x_lin.component_div(&z_lin);
        let schur = ws.schur(&x, &zinv, &d_lin);
        let chol = match schur.clone().cholesky() {
            Some(c) => c,
            None => {
                let bump = 1e-13 * schur.diagonal().amax().max(1e-300);
                match (schur + DMatrix::identity(m, m) * bump).cholesky() {
                    Some(c) => c,
                    None => {
                        status = IpmStatus::Breakdown;
                        break;
                    }
                }
            }
        };

        let x_rd_zinv = &x * &rd * &zinv;
        let x_rd_lin = x_lin.component_mul(&rd_lin).component_div(&z_lin);

        // Direction for target sigma*mu with optional second-order term.
        let direction = |sigma_mu: f64,
                         corr: Option<(&DMatrix<f64>, &DVector<f64>)>|
         -> (DMatrix<f64>, DVector<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
            let mut bmat = &zinv * sigma_mu - &x - &x_rd_zinv;
            let mut blin = DVector::from_fn(q, |l, _| sigma_mu / z_lin[l] - x_lin[l]) - &x_rd_lin;
            if let Some((cm, cl)) = corr {
                bmat -= cm;
                blin -= cl;
            }
            symmetrize(&mut bmat);
            let rhs = &rp - ws.apply(&bmat, &blin);
            let dy = chol.solve(&rhs);
            let (ady, ady_lin) = ws.adjoint(&dy);
            let dz = &rd - ady;
            let dz_lin = &rd_lin - ady_lin;
            let mut dx = &zinv * sigma_mu - &x - &x * &dz * &zinv;
            let mut dx_lin =
                DVector::from_fn(q, |l, _| sigma_mu / z_lin[l] - x_lin[l] - x_lin[l] * dz_lin[l] / z_lin[l]);
            if let Some((cm, cl)) = corr {
                dx -= cm;
                dx_lin -= cl;
            }
            symmetrize(&mut dx);
            (dx, dx_lin, dy, dz, dz_lin)
        };

        let (dxa, dxa_lin, _, dza, dza_lin) = direction(0.0, None);
        let ap_aff = 1.0f64.min(max_step_psd(&x, &dxa)).min(max_step_lin(&x_lin, &dxa_lin));
        let ad_aff = 1.0f64.min(max_step_psd(&z, &dza)).min(max_step_lin(&z_lin, &dza_lin));
        let mu_aff = ((&x + &dxa * ap_aff).dot(&(&z + &dza * ad_aff))
            + (&x_lin + &dxa_lin * ap_aff).dot(&(&z_lin + &dza_lin * ad_aff)))
            / dim;
        let sigma = (mu_aff / mu).max(0.0).powi(3).min(1.0);

        let corr_mat = &dxa * &dza * &zinv;
        let corr_lin = dxa_lin.component_mul(&dza_lin).component_div(&z_lin);
        let (dx, dx_lin, dy, dz, dz_lin) = direction(sigma * mu, Some((&corr_mat, &corr_lin)));

        let gamma = 0.9 + 0.09 * ap_aff.min(ad_aff);
        let ap = 1.0f64.min(gamma * max_step_psd(&x, &dx).min(max_step_lin(&x_lin, &dx_lin)));
        let ad = 1.0f64.min(gamma * max_step_psd(&z, &dz).min(max_step_lin(&z_lin, &dz_lin)));
        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls > 3 {
                status = IpmStatus::Breakdown;
                break;
            }
        } else {
            stalls = 0;
        }

        x += &dx * ap;
        x_lin += &dx_lin * ap;
        y += &dy * ad;
        z += &dz * ad;
        z_lin += &dz_lin * ad;
        symmetrize(&mut x);
        symmetrize(&mut z);
        iterations = it + 1;
    }

    let primal_obj = prob.c.dot(&x) + prob.c_lin.dot(&x_lin);
    IpmResult { x, x_lin, status, primal_obj, iterations }
}
