//! Shared blocklength: continuous optimum and integer rounding.
//!
//! `g_k(m) = √m·ln2·log₂(1+γ_k) − ln2·D_k/√m` increases with `m` for any
//! `γ_k ≥ 0`, so the continuous optimum sits at the tighter of the latency
//! and energy caps.

use crate::error::{Error, Result};
use crate::metrics::{g_value, Dispersion};
use crate::model::SystemConfig;

const STEP: &str = "blocklength";

/// `χ = min_k g_k(m)` for fixed SINRs.
pub fn chi_at(sinr: &[f64], m: f64, cfg: &SystemConfig) -> f64 {
    sinr.iter()
        .zip(&cfg.payload_bits)
        .map(|(&s, &d)| g_value(s, m, d as f64, Dispersion::Unit))
        .fold(f64::INFINITY, f64::min)
}

/// `min(floor(T/T_sym), E0/(T_sym·Σp))`.
pub fn upper_bound(power: &[f64], cfg: &SystemConfig) -> f64 {
    let total: f64 = power.iter().sum();
    let energy_cap = if total > 0.0 { cfg.energy_budget_j / (cfg.symbol_s * total) } else { f64::INFINITY };
    cfg.max_blocklength().min(energy_cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlocklengthResult {
    pub m_real: f64,
    pub chi: f64,
}

pub fn optimize_blocklength(sinr: &[f64], power: &[f64], cfg: &SystemConfig) -> Result<BlocklengthResult> {
    let m = upper_bound(power, cfg);
    if m < 1.0 {
        return Err(Error::infeasible(
            STEP,
            format!("the energy budget affords only {m:.3} symbols at current powers"),
        ));
    }
    Ok(BlocklengthResult { m_real: m, chi: chi_at(sinr, m, cfg) })
}

fn admissible(m: f64, power: &[f64], sinr: &[f64], chi: f64, cfg: &SystemConfig) -> bool {
    let energy = cfg.symbol_s * m * power.iter().sum::<f64>();
    m <= cfg.max_blocklength() && energy <= cfg.energy_budget_j && chi_at(sinr, m, cfg) >= chi
}

/// Starts from `floor(m_real)` and adds one symbol at a time while energy,
/// latency and the incumbent `χ` stay satisfied.
pub fn greedy_round(m_real: f64, power: &[f64], sinr: &[f64], cfg: &SystemConfig) -> f64 {
    let mut m = m_real.floor().max(1.0);
    let chi = chi_at(sinr, m, cfg);
    while admissible(m + 1.0, power, sinr, chi, cfg) {
        m += 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_cap_binds_with_energy_slack() {
        let cfg = SystemConfig::default().with_users(2);
        let res = optimize_blocklength(&[3.0, 3.0], &[0.01, 0.01], &cfg).unwrap();
        assert_eq!(res.m_real, 20.0);
        assert_eq!(greedy_round(res.m_real, &[0.01, 0.01], &[3.0, 3.0], &cfg), 20.0);
    }

    #[test]
    fn energy_cap_binds() {
        let mut cfg = SystemConfig::default().with_users(2);
        let power = [0.2, 0.2];
        cfg.energy_budget_j = 12.5 * cfg.symbol_s * 0.4;
        let res = optimize_blocklength(&[3.0, 3.0], &power, &cfg).unwrap();
        assert!((res.m_real - 12.5).abs() < 1e-12);
        assert_eq!(greedy_round(res.m_real, &power, &[3.0, 3.0], &cfg), 12.0);
    }

    #[test]
    fn unaffordable_symbol_is_reported() {
        let cfg = SystemConfig { energy_budget_j: 0.1, ..SystemConfig::default() }.with_users(2);
        assert!(optimize_blocklength(&[1.0, 1.0], &[0.3, 0.3], &cfg).is_err());
    }
}
