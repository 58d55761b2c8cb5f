//! Receive combiners by semidefinite relaxation.
//!
//! With powers and reflection fixed, each SINR constraint is linear in the
//! lifted combiners `W_k = w_k w_kᴴ`. Dropping the rank-one requirement and
//! keeping `tr(W_k) = 1` gives an SDP feasibility problem per target `χ`;
//! bisection finds the largest feasible `χ` and Gaussian randomization turns
//! the lifted solution back into unit-norm combiners. Groups never interfere
//! with each other, so every feasibility check decomposes over groups.

use ris_conic::hermitian::principal;
use ris_conic::{gaussian_randomization, solve_sdp, CMat, CVec, ConeProgram, Projector, SdpStatus, Sense};

use crate::error::{Error, Result};
use crate::metrics::{chi_for_sinr, min_g, sinr_threshold};
use crate::model::{Allocation, SystemConfig};
use crate::seeds::{stream, Purpose};

const STEP: &str = "receive beamforming";

#[derive(Debug, Clone, PartialEq)]
pub struct BeamResult {
    pub combiners: Vec<CVec>,
    /// True `χ` of the returned combiners.
    pub chi: f64,
    /// Largest `χ` certified feasible for the relaxation.
    pub relaxed_chi: f64,
    /// Whether the randomized combiners replaced the incoming ones.
    pub accepted: bool,
}

/// Largest `χ` any combiner can reach: every user matched to its own channel
/// at its current power, free of interference.
pub fn chi_upper_bound(q: &[CVec], alloc: &Allocation, cfg: &SystemConfig) -> f64 {
    (0..cfg.users)
        .map(|k| {
            let snr = alloc.power[k] * q[k].norm_squared() / cfg.noise_w;
            chi_for_sinr(snr, alloc.blocklength, cfg.payload_bits[k] as f64)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Block `(b, b)` of an `n·nt` square matrix set to `m`.
fn place_block(target: &mut CMat, b: usize, nt: usize, m: &CMat, coef: f64) {
    let mut view = target.view_mut((b * nt, b * nt), (nt, nt));
    view += m * ris_conic::Complex64::new(coef, 0.0);
}

/// Relaxed feasibility at `chi`. Returns the lifted combiner of every user,
/// or `None` if some group is infeasible.
pub fn sdr_feasibility_w(q: &[CVec], alloc: &Allocation, cfg: &SystemConfig, chi: f64) -> Result<Option<Vec<CMat>>> {
    let nt = cfg.bs_antennas;
    let outer: Vec<CMat> = q.iter().map(|v| v * v.adjoint()).collect();
    let mut blocks = vec![CMat::zeros(nt, nt); cfg.users];
    for group in alloc.grouping.groups(cfg.users) {
        let local = |user: usize| group.iter().position(|&g| g == user).expect("combiner outside group");
        let n = group.len() * nt;
        let mut prog = ConeProgram::new(n).with_trace_bound(group.len() as f64);
        for (b, _) in group.iter().enumerate() {
            let mut sel = CMat::zeros(n, n);
            place_block(&mut sel, b, nt, &CMat::identity(nt, nt), 1.0);
            prog.push(sel, Sense::Eq, 1.0);
        }
        for &k in &group {
            let eta = sinr_threshold(chi, alloc.blocklength, cfg.payload_bits[k] as f64);
            let signal = alloc.power[k] / cfg.noise_w;
            let scale = (signal * q[k].norm_squared()).max(eta).max(1e-300);
            // η (Σ_j p_j tr(W_c Q_j) + σ²) − p_k tr(W_k Q_k) ≤ 0, divided by σ²·scale.
            let mut row = CMat::zeros(n, n);
            place_block(&mut row, local(k), nt, &outer[k], -signal / scale);
            for j in alloc.grouping.interferers(k, &alloc.order) {
                let c = cfg.interference.combiner(k, j);
                place_block(&mut row, local(c), nt, &outer[j], eta * alloc.power[j] / cfg.noise_w / scale);
            }
            prog.push(row, Sense::Le, -eta / scale);
        }
        let sol = solve_sdp(&prog).map_err(Error::solver(STEP))?;
        match sol.status {
            SdpStatus::Optimal => {
                for (b, &user) in group.iter().enumerate() {
                    blocks[user] = sol.x.view((b * nt, b * nt), (nt, nt)).into_owned();
                }
            }
            SdpStatus::Infeasible | SdpStatus::NumericalFailure => return Ok(None),
        }
    }
    Ok(Some(blocks))
}

/// Bisection over `[chi_start, upper bound]` followed by per-user
/// randomization. `chi_start` must be achieved by the incoming combiners; the
/// result never has a smaller true `χ` than those combiners.
pub fn optimize_w(
    q: &[CVec],
    alloc: &Allocation,
    cfg: &SystemConfig,
    chi_start: f64,
    rng_index: u64,
) -> Result<BeamResult> {
    let current = min_g(q, &alloc.combiners, &alloc.power, alloc, cfg);
    if cfg.bs_antennas == 1 {
        return Ok(BeamResult {
            combiners: alloc.combiners.clone(),
            chi: current,
            relaxed_chi: current,
            accepted: false,
        });
    }
    let mut lo = chi_start.min(current);
    let mut hi = chi_upper_bound(q, alloc, cfg);
    let mut best = sdr_feasibility_w(q, alloc, cfg, lo)?;
    if best.is_none() {
        // The incoming combiners lift to a feasible point; only numerical
        // trouble lands here.
        let lifted = alloc.combiners.iter().map(|w| w * w.adjoint()).collect();
        best = Some(lifted);
    }
    while hi - lo > cfg.solver.beam_tol {
        let mid = 0.5 * (lo + hi);
        match sdr_feasibility_w(q, alloc, cfg, mid)? {
            Some(blocks) => {
                lo = mid;
                best = Some(blocks);
            }
            None => hi = mid,
        }
    }
    let blocks = best.expect("bisection always keeps a feasible point");

    let mut combiners: Vec<CVec> = blocks.iter().map(|w| principal(w).1).collect();
    let mut rng = stream(cfg.seed, Purpose::BeamRandomization, rng_index);
    for k in 0..cfg.users {
        let trial = gaussian_randomization(&blocks[k], cfg.solver.samples, Projector::UnitNorm, &mut rng, |w| {
            let mut cand = combiners.clone();
            cand[k] = w.clone();
            min_g(q, &cand, &alloc.power, alloc, cfg)
        })
        .map_err(Error::solver(STEP))?;
        combiners[k] = trial.vector;
    }
    let chi = min_g(q, &combiners, &alloc.power, alloc, cfg);
    if chi >= current {
        Ok(BeamResult { combiners, chi, relaxed_chi: lo, accepted: true })
    } else {
        Ok(BeamResult { combiners: alloc.combiners.clone(), chi: current, relaxed_chi: lo, accepted: false })
    }
}
