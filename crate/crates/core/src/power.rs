//! SCA power allocation for fixed combiners, reflection and blocklength.
//!
//! For a target `χ` every user needs `γ_k ≥ η_k(χ)`. Writing the SINR
//! condition as `X_k p_k ≥ γ_k (Σ_j X_kj p_j + σ²)` and bounding each product
//! `p_j γ_k` by `λ/2·γ_k² + p_j²/(2λ)` gives a convex quadratic feasibility
//! system in `p`; with `γ_k` held at its floor `η_k` the largest feasible `χ`
//! is found by bisection. The bound is tight at `λ = p_j/γ_k`, so refreshing
//! `λ` from the previous iterate keeps the true `χ` non-decreasing.

use ris_conic::{solve_quad_feasibility, QuadConstraint, QuadFeasibility, QuadStatus};

use crate::error::{Error, Result};
use crate::metrics::{chi_for_sinr, g_value, sinr_threshold, Dispersion, GainTable};
use crate::model::{DecodeOrder, Grouping, SystemConfig};

/// Strictly positive power floor in watts.
pub const POWER_FLOOR_W: f64 = 1e-9;
/// Lower clamp on the SCA weights.
pub const LAMBDA_FLOOR: f64 = 1e-8;

/// Everything held fixed during the power step.
#[derive(Debug, Clone, Copy)]
pub struct PowerContext<'a> {
    pub gains: &'a GainTable,
    pub grouping: &'a Grouping,
    pub order: &'a DecodeOrder,
    pub blocklength: f64,
    pub cfg: &'a SystemConfig,
}

impl PowerContext<'_> {
    pub fn sinr(&self, power: &[f64]) -> Vec<f64> {
        self.gains.sinr(power, self.grouping, self.order, self.cfg.noise_w)
    }

    pub fn chi(&self, power: &[f64]) -> f64 {
        self.sinr(power)
            .iter()
            .zip(&self.cfg.payload_bits)
            .map(|(&s, &d)| g_value(s, self.blocklength, d as f64, Dispersion::Unit))
            .fold(f64::INFINITY, f64::min)
    }

    fn budget_w(&self) -> f64 {
        self.cfg.energy_budget_j / (self.cfg.symbol_s * self.blocklength)
    }

    /// `χ` reachable if every user transmitted at full power without
    /// interference.
    pub fn chi_upper_bound(&self) -> f64 {
        let cfg = self.cfg;
        (0..cfg.users)
            .map(|k| {
                let snr = self.gains.signal[k] * cfg.p_max_w[k] / cfg.noise_w;
                chi_for_sinr(snr, self.blocklength, cfg.payload_bits[k] as f64)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// SCA weights `λ[k][j]` for victim `k` and interferer `j`.
pub type Lambda = Vec<Vec<f64>>;

/// Uniform start `min(p_max, 0.9·E0/(T_sym·m·K))`.
pub fn default_power(cfg: &SystemConfig, blocklength: f64) -> Vec<f64> {
    let share = 0.9 * cfg.energy_budget_j / (cfg.symbol_s * blocklength * cfg.users as f64);
    cfg.p_max_w.iter().map(|&cap| cap.min(share)).collect()
}

/// `λ_kj = p_j / γ_k` at the given powers, floored.
pub fn refresh_lambda(ctx: &PowerContext, power: &[f64]) -> Lambda {
    let sinr = ctx.sinr(power);
    let k = power.len();
    (0..k).map(|v| (0..k).map(|j| (power[j] / sinr[v].max(1e-300)).max(LAMBDA_FLOOR)).collect()).collect()
}

/// Convexified feasibility system at `chi`, in units of the largest power
/// cap.
fn build_system(ctx: &PowerContext, chi: f64, lambda: &Lambda, start: &[f64]) -> (QuadFeasibility, f64) {
    let cfg = ctx.cfg;
    let k = cfg.users;
    let scale = cfg.p_max_w.iter().copied().fold(0.0, f64::max);
    let mut prob = QuadFeasibility::new(k);
    prob.lower = vec![POWER_FLOOR_W / scale; k];
    prob.upper = cfg.p_max_w.iter().map(|p| p / scale).collect();
    prob.budget = Some((vec![1.0; k], ctx.budget_w() / scale));
    prob.start = Some(start.iter().map(|p| p / scale).collect());
    for v in 0..k {
        let eta = sinr_threshold(chi, ctx.blocklength, cfg.payload_bits[v] as f64);
        let signal = ctx.gains.signal[v] * scale / cfg.noise_w;
        let row_scale = (signal * prob.upper[v]).max(eta).max(1e-300);
        let mut quad = Vec::new();
        let mut constant = eta;
        for j in ctx.grouping.interferers(v, ctx.order) {
            let cross = ctx.gains.cross[v][j] * scale / cfg.noise_w;
            let lam = lambda[v][j] / scale;
            constant += cross * lam / 2.0 * eta * eta;
            quad.push((j, cross / (2.0 * lam) / row_scale));
        }
        prob.constraints.push(QuadConstraint {
            linear: vec![(v, signal / row_scale)],
            quad,
            constant: constant / row_scale,
        });
    }
    (prob, scale)
}

/// Feasibility of the convexified system at `chi`; returns feasible powers
/// in watts.
pub fn solve_p4_subproblem(ctx: &PowerContext, chi: f64, lambda: &Lambda, start: &[f64]) -> Result<Option<Vec<f64>>> {
    let (prob, scale) = build_system(ctx, chi, lambda, start);
    let sol = solve_quad_feasibility(&prob).map_err(Error::solver("power allocation"))?;
    Ok(match sol.status {
        QuadStatus::Feasible => Some(sol.x.iter().map(|u| u * scale).collect()),
        QuadStatus::Infeasible | QuadStatus::NumericalFailure => None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub power: Vec<f64>,
    pub chi: f64,
    /// True `χ` after each SCA iteration, starting with the initial point.
    pub trace: Vec<f64>,
}

/// Largest `χ` of the convexified system with weights `lambda`, bracketed
/// from below by the true `χ` of `start` (feasible by construction).
fn bisect(ctx: &PowerContext, lambda: &Lambda, start: &[f64], chi_lo: f64) -> Result<Vec<f64>> {
    let tol = ctx.cfg.solver.power_chi_tol;
    let mut lo = chi_lo;
    let mut hi = ctx.chi_upper_bound();
    let mut best = start.to_vec();
    while hi - lo > tol * (1.0 + lo.abs()) {
        let mid = 0.5 * (lo + hi);
        match solve_p4_subproblem(ctx, mid, lambda, &best)? {
            Some(p) => {
                lo = mid;
                best = p;
            }
            None => hi = mid,
        }
    }
    Ok(best)
}

pub fn sca_power(ctx: &PowerContext, init: &[f64]) -> Result<PowerResult> {
    let cfg = ctx.cfg;
    let budget = ctx.budget_w();
    let total: f64 = init.iter().sum();
    if init.iter().zip(&cfg.p_max_w).any(|(&p, &cap)| !(p > 0.0) || p > cap * (1.0 + 1e-12))
        || total > budget * (1.0 + 1e-12)
    {
        return Err(Error::infeasible("power allocation", "initial powers violate the box or the energy budget"));
    }
    let mut power = init.to_vec();
    let mut chi = ctx.chi(&power);
    let mut trace = vec![chi];
    for _ in 0..cfg.solver.power_iters {
        let lambda = refresh_lambda(ctx, &power);
        let candidate = bisect(ctx, &lambda, &power, chi)?;
        let candidate_chi = ctx.chi(&candidate);
        let improved = candidate_chi >= chi;
        let delta = candidate_chi - chi;
        if improved {
            power = candidate;
            chi = candidate_chi;
        }
        trace.push(chi);
        if !improved || delta <= cfg.solver.power_tol {
            break;
        }
    }
    Ok(PowerResult { power, chi, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Pair;

    #[test]
    fn bound_is_tight_at_refreshed_lambda() {
        for (p, g) in [(0.3, 2.0), (1e-3, 40.0), (0.05, 0.01)] {
            let lam: f64 = p / g;
            let bound = lam / 2.0 * g * g + p * p / (2.0 * lam);
            assert!((bound - p * g).abs() <= 1e-12 * (p * g));
        }
    }

    #[test]
    fn independent_users_split_the_budget() {
        let cfg = SystemConfig { energy_budget_j: 4.0, ..SystemConfig::default() }.with_users(2);
        let gains = GainTable { signal: vec![1e-11, 1e-11], cross: vec![vec![0.0; 2]; 2] };
        let grouping = Grouping::Pairs(vec![Pair { strong: 0, weak: 1 }]);
        let order = DecodeOrder::identity(2);
        let ctx = PowerContext { gains: &gains, grouping: &grouping, order: &order, blocklength: 20.0, cfg: &cfg };
        let res = sca_power(&ctx, &default_power(&cfg, 20.0)).unwrap();
        let expected = (cfg.energy_budget_j / (cfg.symbol_s * 20.0 * 2.0)).min(0.3);
        for p in &res.power {
            assert!((p - expected).abs() < 1e-4, "{p} vs {expected}");
        }
    }
}
