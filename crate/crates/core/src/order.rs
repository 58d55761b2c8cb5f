//! Decoding order: reflection maximizing the summed combined gain, followed
//! by the strong/weak split.

use ris_conic::hermitian::quad_form;
use ris_conic::{gaussian_randomization, solve_sdp, CMat, CVec, Complex64, ConeProgram, Projector};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::metrics::combined_channels;
use crate::model::{DecodeOrder, SystemConfig};
use crate::seeds::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct OrderResult {
    /// Reflection used for the classification.
    pub reflection: CVec,
    /// Combined gains `‖Hᴴ diag(φ) f_k‖²` under that reflection.
    pub gains: Vec<f64>,
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    pub order: DecodeOrder,
    /// Optimal value of the relaxation; bounds the summed gain from above.
    pub relaxation_value: f64,
}

/// Per-user `R_k = diag(f_k)ᴴ H Hᴴ diag(f_k)`, so that `φᴴ R_k φ` is the
/// combined gain of user `k`.
pub fn gain_matrices(ch: &ChannelRealization) -> Vec<CMat> {
    let gram = &ch.bs_ris * ch.bs_ris.adjoint();
    ch.ris_user
        .iter()
        .map(|f| {
            let n = f.len();
            CMat::from_fn(n, n, |i, j| f[i].conj() * gram[(i, j)] * f[j])
        })
        .collect()
}

/// Splits users by descending score into strong (top half) and weak halves;
/// ties go to the lower index. The decoding order is the global descending
/// order.
pub fn classify(scores: &[f64]) -> (Vec<usize>, Vec<usize>, DecodeOrder) {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let half = scores.len() / 2;
    let order = DecodeOrder::from_sequence(&idx);
    let mut strong = idx[..half].to_vec();
    let mut weak = idx[half..].to_vec();
    strong.sort_unstable();
    weak.sort_unstable();
    (strong, weak, order)
}

/// Reflection maximizing `Σ_k φᴴ R_k φ` over unit-modulus `φ`, via the
/// semidefinite relaxation and Gaussian randomization.
pub fn max_sum_gain_reflection(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<(CVec, f64)> {
    let n = ch.elements();
    let total = gain_matrices(ch).into_iter().fold(CMat::zeros(n, n), |acc, r| acc + r);
    if n == 1 {
        return Ok((CVec::from_element(1, Complex64::new(1.0, 0.0)), total[(0, 0)].re));
    }
    let sol = solve_sdp(&ConeProgram::new(n).maximize(total.clone()).with_diag_one())
        .map_err(Error::solver("decoding order"))?;
    if !sol.is_optimal() {
        return Err(Error::infeasible("decoding order", format!("relaxation returned {:?}", sol.status)));
    }
    let mut rng = stream(cfg.seed, Purpose::OrderRandomization, 0);
    let best = gaussian_randomization(&sol.x, cfg.solver.samples, Projector::UnitModulus, &mut rng, |phi| {
        quad_form(&total, phi)
    })
    .map_err(Error::solver("decoding order"))?;
    debug_assert!(best.score <= sol.value * (1.0 + 1e-6) + 1e-300);
    Ok((best.vector, sol.value))
}

pub fn gains_under(ch: &ChannelRealization, reflection: &CVec) -> Result<Vec<f64>> {
    Ok(combined_channels(ch, reflection)?.iter().map(|q| q.norm_squared()).collect())
}

pub fn determine_order(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<OrderResult> {
    let (reflection, relaxation_value) = max_sum_gain_reflection(ch, cfg)?;
    let gains = gains_under(ch, &reflection)?;
    let (strong, weak, order) = classify(&gains);
    Ok(OrderResult { reflection, gains, strong, weak, order, relaxation_value })
}

/// Same reflection, but users closer to the RIS are classified as strong.
pub fn determine_order_by_distance(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<OrderResult> {
    let (reflection, relaxation_value) = max_sum_gain_reflection(ch, cfg)?;
    let gains = gains_under(ch, &reflection)?;
    let proximity: Vec<f64> = ch.ris_user_distance.iter().map(|d| -d).collect();
    let (strong, weak, order) = classify(&proximity);
    Ok(OrderResult { reflection, gains, strong, weak, order, relaxation_value })
}
