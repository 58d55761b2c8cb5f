//! RIS phase design by semidefinite relaxation and a rank-one penalty.
//!
//! For fixed powers and combiners, `w_cᴴ q_j = l_{c,j} φ` with the row
//! `l_{c,j} = w_cᴴ Hᴴ diag(f_j)`, so every gain is `tr(L_{c,j} S)` for the
//! lift `S = φφᴴ` and `L_{c,j} = l_{c,j}ᴴ l_{c,j}`. Unit modulus becomes
//! `diag(S) = 1`. The relaxation is bisected over `χ`; at the best feasible
//! level a penalty SCA pushes `S` towards rank one by maximizing the
//! linearized spectral norm, which is exact at convergence because
//! `tr(S) = N` is fixed.

use ris_conic::hermitian::{frobenius, principal, quad_form};
use ris_conic::{gaussian_randomization, solve_sdp, CMat, CVec, ConeProgram, Projector, SdpStatus, Sense};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::metrics::{chi_for_sinr, combined_channels, min_g, sinr_threshold};
use crate::model::{Allocation, SystemConfig};
use crate::seeds::{stream, Purpose};

const STEP: &str = "RIS phase design";
/// `1 − λ_max(S)/tr(S)` below which the lift counts as rank one.
pub const RANK_RESIDUAL_TOL: f64 = 1e-6;

/// Lifted gain matrices: `gain[c][j]` gives `|w_cᴴ q_j|² = φᴴ gain[c][j] φ`.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub gain: Vec<Vec<CMat>>,
}

pub fn build_effective_channels(ch: &ChannelRealization, combiners: &[CVec]) -> EffectiveChannels {
    let gain = combiners
        .iter()
        .map(|w| {
            let hw = &ch.bs_ris * w;
            ch.ris_user
                .iter()
                .map(|f| {
                    // Entries of the row l_{c,j}; the Gram matrix has (i, j) = conj(l_i)·l_j.
                    let l = CVec::from_fn(f.len(), |i, _| hw[i].conj() * f[i]);
                    CMat::from_fn(f.len(), f.len(), |i, j| l[i].conj() * l[j])
                })
                .collect()
        })
        .collect();
    EffectiveChannels { gain }
}

fn chi_upper_bound(eff: &EffectiveChannels, alloc: &Allocation, cfg: &SystemConfig) -> f64 {
    let n = cfg.ris_elements as f64;
    (0..cfg.users)
        .map(|k| {
            let top = principal(&eff.gain[k][k]).0.max(0.0);
            let snr = alloc.power[k] * top * n / cfg.noise_w;
            chi_for_sinr(snr, alloc.blocklength, cfg.payload_bits[k] as f64)
        })
        .fold(f64::INFINITY, f64::min)
}

/// The relaxed program at target `chi`, without objective.
fn relaxed_program(eff: &EffectiveChannels, alloc: &Allocation, cfg: &SystemConfig, chi: f64) -> ConeProgram {
    let n = cfg.ris_elements;
    let mut prog = ConeProgram::new(n).with_diag_one();
    for k in 0..cfg.users {
        let eta = sinr_threshold(chi, alloc.blocklength, cfg.payload_bits[k] as f64);
        let signal = alloc.power[k] / cfg.noise_w;
        let own = &eff.gain[k][k];
        let scale = (signal * principal(own).0 * n as f64).max(eta).max(1e-300);
        let mut row = own * ris_conic::Complex64::new(-signal / scale, 0.0);
        for j in alloc.grouping.interferers(k, &alloc.order) {
            let c = cfg.interference.combiner(k, j);
            row += &eff.gain[c][j] * ris_conic::Complex64::new(eta * alloc.power[j] / cfg.noise_w / scale, 0.0);
        }
        prog.push(row, Sense::Le, -eta / scale);
    }
    prog
}

/// Largest eigenvalue of `s` and the gradient `u uᴴ` of `λ_max` at `s`.
pub fn linearize_spectral(s: &CMat) -> (f64, CMat) {
    let (value, u) = principal(s);
    (value, &u * u.adjoint())
}

fn rank_residual(s: &CMat) -> f64 {
    let trace: f64 = (0..s.nrows()).map(|i| s[(i, i)].re).sum();
    if trace <= 0.0 {
        return 1.0;
    }
    1.0 - principal(s).0 / trace
}

#[derive(Debug, Clone)]
pub struct PenaltyOutcome {
    pub lift: CMat,
    pub reflection: CVec,
    pub iterations: usize,
    pub rank_residual: f64,
    /// `λ_max` of the starting lift and of every iterate.
    pub spectral: Vec<f64>,
}

/// Penalty SCA at fixed `chi`: repeatedly maximizes the linearized spectral
/// norm `tr(u uᴴ S)` over the relaxed feasible set. A start that is already
/// feasible and rank one is returned untouched.
pub fn penalty_sca_phase(
    eff: &EffectiveChannels,
    alloc: &Allocation,
    cfg: &SystemConfig,
    chi: f64,
    start: &CMat,
) -> Result<PenaltyOutcome> {
    let base = relaxed_program(eff, alloc, cfg, chi);
    let n = cfg.ris_elements as f64;
    let mut lift = start.clone();
    let mut spectral = vec![principal(&lift).0];
    let mut iterations = 0;
    let settled = |s: &CMat| rank_residual(s) < RANK_RESIDUAL_TOL && base.max_violation(s) <= FEASIBLE_TOL;
    while iterations < cfg.solver.ris_iters && !settled(&lift) {
        let (_, grad) = linearize_spectral(&lift);
        let sol = solve_sdp(&base.clone().maximize(grad)).map_err(Error::solver(STEP))?;
        iterations += 1;
        match sol.status {
            SdpStatus::Optimal => {}
            SdpStatus::Infeasible => {
                return Err(Error::infeasible(STEP, format!("relaxation infeasible at chi = {chi}")));
            }
            SdpStatus::NumericalFailure if iterations == 1 => {
                return Err(Error::infeasible(STEP, format!("relaxation unsolved at chi = {chi}")));
            }
            SdpStatus::NumericalFailure => break,
        }
        let change = frobenius(&(&sol.x - &lift)) / n;
        lift = sol.x;
        spectral.push(principal(&lift).0);
        if change < cfg.solver.ris_tol {
            break;
        }
    }
    let reflection = Projector::UnitModulus.project(&principal(&lift).1);
    Ok(PenaltyOutcome { rank_residual: rank_residual(&lift), lift, reflection, iterations, spectral })
}

/// Violation below which a lift counts as feasible for the relaxation.
const FEASIBLE_TOL: f64 = 1e-9;
/// Cap on the rank-one bisection steps inside one call.
const RANK_ONE_STEPS: usize = 6;

#[derive(Debug, Clone)]
pub struct PhaseResult {
    pub reflection: CVec,
    /// True `χ` of `reflection`.
    pub chi: f64,
    /// Largest `χ` certified feasible for the relaxation.
    pub relaxed_chi: f64,
    pub penalty_iterations: usize,
    pub rank_residual: f64,
}

/// True `χ` of a candidate reflection with everything else fixed.
pub fn chi_with_reflection(
    ch: &ChannelRealization,
    reflection: &CVec,
    alloc: &Allocation,
    cfg: &SystemConfig,
) -> Result<f64> {
    let q = combined_channels(ch, reflection)?;
    Ok(min_g(&q, &alloc.combiners, &alloc.power, alloc, cfg))
}

/// Reflection update in three stages:
///
/// 1. bisection on the relaxation bounds the reachable `χ` from above;
/// 2. a second bisection over `[χ_current, bound]` runs the penalty SCA at
///    each trial level, started from the best reflection so far, and accepts
///    the level when the extracted reflection truly reaches it;
/// 3. Gaussian randomization around the relaxed optimum adds one more
///    candidate.
///
/// The best candidate wins, the incoming reflection included, so `χ` never
/// drops.
pub fn optimize_phase(
    ch: &ChannelRealization,
    alloc: &Allocation,
    cfg: &SystemConfig,
    rng_index: u64,
) -> Result<PhaseResult> {
    let current = chi_with_reflection(ch, &alloc.reflection, alloc, cfg)?;
    let eff = build_effective_channels(ch, &alloc.combiners);
    let solve = |chi: f64| -> Result<Option<CMat>> {
        let sol = solve_sdp(&relaxed_program(&eff, alloc, cfg, chi)).map_err(Error::solver(STEP))?;
        Ok((sol.status == SdpStatus::Optimal).then_some(sol.x))
    };
    let mut lo = current;
    let mut hi = chi_upper_bound(&eff, alloc, cfg);
    let mut relaxed = None;
    if let Some(x) = solve(lo)? {
        relaxed = Some(x);
        while hi - lo > cfg.solver.ris_chi_tol {
            let mid = 0.5 * (lo + hi);
            match solve(mid)? {
                Some(x) => {
                    lo = mid;
                    relaxed = Some(x);
                }
                None => hi = mid,
            }
        }
    }
    let relaxed_chi = lo;
    let mut result = PhaseResult {
        reflection: alloc.reflection.clone(),
        chi: current,
        relaxed_chi,
        penalty_iterations: 0,
        rank_residual: 0.0,
    };
    let Some(relaxed) = relaxed else {
        return Ok(result);
    };

    let (mut lo, mut hi) = (current, relaxed_chi);
    for _ in 0..RANK_ONE_STEPS {
        if hi - lo <= cfg.solver.ris_chi_tol {
            break;
        }
        let mid = if result.penalty_iterations == 0 { hi } else { 0.5 * (lo + hi) };
        let start = &result.reflection * result.reflection.adjoint();
        let outcome = match penalty_sca_phase(&eff, alloc, cfg, mid, &start) {
            Ok(o) => o,
            Err(Error::Infeasible { .. }) => {
                hi = mid;
                continue;
            }
            Err(e) => return Err(e),
        };
        result.penalty_iterations += outcome.iterations;
        let reached = chi_with_reflection(ch, &outcome.reflection, alloc, cfg)?;
        if reached > result.chi {
            result.chi = reached;
            result.reflection = outcome.reflection;
            result.rank_residual = outcome.rank_residual;
        }
        if reached >= mid {
            lo = reached;
        } else {
            hi = mid;
            lo = lo.max(result.chi);
        }
    }

    let mut rng = stream(cfg.seed, Purpose::PhaseRandomization, rng_index);
    let randomized = gaussian_randomization(&relaxed, cfg.solver.samples, Projector::UnitModulus, &mut rng, |phi| {
        chi_with_reflection(ch, phi, alloc, cfg).unwrap_or(f64::NEG_INFINITY)
    })
    .map_err(Error::solver(STEP))?;
    if randomized.score > result.chi {
        result.chi = randomized.score;
        result.reflection = randomized.vector;
    }
    Ok(result)
}

/// Gain of user `j` through combiner `c` evaluated on the lift; used by tests
/// to cross-check the effective channels.
pub fn lifted_gain(eff: &EffectiveChannels, c: usize, j: usize, reflection: &CVec) -> f64 {
    quad_form(&eff.gain[c][j], reflection)
}
