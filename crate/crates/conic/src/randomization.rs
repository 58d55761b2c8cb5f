//! Rank-one recovery by Gaussian randomization.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::ConicError;
use crate::hermitian::{CMat, CVec, HermitianEigen};

/// Eigenvalue ratio `λ₂/λ₁` below which the input is treated as rank one.
pub const RANK_ONE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    /// Entrywise `v_n / |v_n|`, with zero entries mapped to `1`.
    UnitModulus,
    /// `v / ‖v‖`; the zero vector maps to the first basis vector.
    UnitNorm,
}

impl Projector {
    pub fn project(self, v: &CVec) -> CVec {
        match self {
            Projector::UnitModulus => v.map(|z| {
                let r = z.norm();
                if r == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    z / r
                }
            }),
            Projector::UnitNorm => {
                let norm = v.norm();
                if norm == 0.0 {
                    let mut e = CVec::zeros(v.len());
                    if !e.is_empty() {
                        e[0] = Complex64::new(1.0, 0.0);
                    }
                    e
                } else {
                    v.unscale(norm)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Randomized {
    pub vector: CVec,
    pub score: f64,
    /// Number of Gaussian draws consumed (zero on the rank-one shortcut).
    pub samples_drawn: usize,
    /// The winner is the projected principal eigenvector.
    pub from_eigenvector: bool,
}

/// Draws up to `samples` vectors from `CN(0, X)`, projects each, and keeps the
/// best score. The projected principal eigenvector competes as an extra
/// candidate. Samples are consumed from `rng` in order, so a larger count with
/// the same seed scores at least as well. A scorer returns `-∞` for
/// infeasible candidates.
pub fn gaussian_randomization<R, F>(
    x: &CMat,
    samples: usize,
    projector: Projector,
    rng: &mut R,
    mut scorer: F,
) -> Result<Randomized, ConicError>
where
    R: Rng + ?Sized,
    F: FnMut(&CVec) -> f64,
{
    if !x.is_square() || x.nrows() == 0 {
        return Err(ConicError::Dimension("randomization needs a non-empty square matrix".into()));
    }
    if samples == 0 {
        return Err(ConicError::Invalid("sample count must be positive".into()));
    }
    let n = x.nrows();
    let eig = HermitianEigen::new(x);
    let top = eig.max_value();
    let principal = projector.project(&eig.principal_vector());
    let second = eig.values.get(1).copied().unwrap_or(0.0);
    if top > 0.0 && second.max(0.0) / top < RANK_ONE_RATIO {
        let score = scorer(&principal);
        if score == f64::NEG_INFINITY || score.is_nan() {
            return Err(ConicError::AllSamplesInfeasible(1));
        }
        return Ok(Randomized { vector: principal, score, samples_drawn: 0, from_eigenvector: true });
    }

    let roots: Vec<f64> = eig.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    let mut best =
        Randomized { score: scorer(&principal), vector: principal, samples_drawn: 0, from_eigenvector: true };
    if best.score.is_nan() {
        best.score = f64::NEG_INFINITY;
    }
    let half = std::f64::consts::FRAC_1_SQRT_2;
    for drawn in 1..=samples {
        let r = CVec::from_fn(n, |i, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (half * roots[i])
        });
        let candidate = projector.project(&(&eig.vectors * r));
        let score = scorer(&candidate);
        if score > best.score {
            best = Randomized { vector: candidate, score, samples_drawn: drawn, from_eigenvector: false };
        }
    }
    if best.score == f64::NEG_INFINITY {
        return Err(ConicError::AllSamplesInfeasible(samples + 1));
    }
    Ok(best)
}
