//! Combined channels, SIC SINRs, finite-blocklength error metrics and energy.

use std::f64::consts::{LN_2, SQRT_2};

use ris_conic::{CVec, Complex64};
use serde::Serialize;
use statrs::function::erf::{erfc, erfc_inv};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::model::{Allocation, DecodeOrder, Grouping, InterferenceModel, SystemConfig};

/// Lower clamp on the channel dispersion in exact mode.
pub const DISPERSION_FLOOR: f64 = 1e-6;

/// Channel dispersion used in `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    /// `V = 1`, the high-SNR approximation used by every optimizer.
    #[default]
    Unit,
    /// `V = √(1 − (1+γ)⁻²)`, clamped below by [`DISPERSION_FLOOR`].
    Exact,
}

/// `Hᴴ diag(φ) f`.
pub fn combined_channel(bs_ris: &ris_conic::CMat, reflection: &CVec, ris_user: &CVec) -> Result<CVec> {
    let n = bs_ris.nrows();
    if reflection.len() != n || ris_user.len() != n {
        return Err(Error::Dimension(format!(
            "reflection has {} and user vector {} entries for {n} RIS elements",
            reflection.len(),
            ris_user.len()
        )));
    }
    let reflected = reflection.component_mul(ris_user);
    Ok(bs_ris.adjoint() * reflected)
}

pub fn combined_channels(ch: &ChannelRealization, reflection: &CVec) -> Result<Vec<CVec>> {
    ch.ris_user.iter().map(|f| combined_channel(&ch.bs_ris, reflection, f)).collect()
}

fn beam_gain(w: &CVec, q: &CVec) -> f64 {
    w.dotc(q).norm_sqr()
}

/// Effective power gains for fixed combiners and reflection.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    /// `|w_kᴴ q_k|²`.
    pub signal: Vec<f64>,
    /// `cross[k][j]`: gain of user `j`'s signal in the decision statistic of
    /// user `k`, under the configured interference model.
    pub cross: Vec<Vec<f64>>,
}

impl GainTable {
    pub fn new(q: &[CVec], combiners: &[CVec], model: InterferenceModel) -> Self {
        let k = q.len();
        let signal = (0..k).map(|u| beam_gain(&combiners[u], &q[u])).collect();
        let cross =
            (0..k).map(|v| (0..k).map(|j| beam_gain(&combiners[model.combiner(v, j)], &q[j])).collect()).collect();
        Self { signal, cross }
    }

    pub fn sinr(&self, power: &[f64], grouping: &Grouping, order: &DecodeOrder, noise: f64) -> Vec<f64> {
        (0..self.signal.len())
            .map(|k| {
                let interference: f64 =
                    grouping.interferers(k, order).iter().map(|&j| self.cross[k][j] * power[j]).sum();
                self.signal[k] * power[k] / (interference + noise)
            })
            .collect()
    }
}

pub fn sinr_all(ch: &ChannelRealization, alloc: &Allocation, cfg: &SystemConfig) -> Result<Vec<f64>> {
    let q = combined_channels(ch, &alloc.reflection)?;
    let table = GainTable::new(&q, &alloc.combiners, cfg.interference);
    Ok(table.sinr(&alloc.power, &alloc.grouping, &alloc.order, cfg.noise_w))
}

/// `g = (√m·ln2 / V)·(log₂(1+γ) − D/m)`.
pub fn g_value(sinr: f64, blocklength: f64, bits: f64, dispersion: Dispersion) -> f64 {
    let v = match dispersion {
        Dispersion::Unit => 1.0,
        Dispersion::Exact => (1.0 - (1.0 + sinr).powi(-2)).max(0.0).sqrt().max(DISPERSION_FLOOR),
    };
    blocklength.sqrt() * LN_2 / v * ((1.0 + sinr).log2() - bits / blocklength)
}

pub fn g_values(sinr: &[f64], blocklength: f64, bits: &[u32], dispersion: Dispersion) -> Vec<f64> {
    sinr.iter().zip(bits).map(|(&s, &d)| g_value(s, blocklength, d as f64, dispersion)).collect()
}

/// SINR threshold at which `g` equals `chi` (unit dispersion):
/// `2^{χ/(√m·ln2) + D/m} − 1`, floored at zero: targets below the `γ = 0`
/// value of `g` hold for every SINR.
pub fn sinr_threshold(chi: f64, blocklength: f64, bits: f64) -> f64 {
    ((chi / (blocklength.sqrt() * LN_2) + bits / blocklength).exp2() - 1.0).max(0.0)
}

/// The `g` value reachable with a given SINR bound, i.e. the inverse of
/// [`sinr_threshold`].
pub fn chi_for_sinr(sinr: f64, blocklength: f64, bits: f64) -> f64 {
    g_value(sinr, blocklength, bits, Dispersion::Unit)
}

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn q_inverse(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Probability(eps));
    }
    let mut x = SQRT_2 * erfc_inv(2.0 * eps);
    // Newton polish on the tail equation.
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density <= 0.0 {
            break;
        }
        x += (q_function(x) - eps) / density;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub sinr: Vec<f64>,
    /// Coding rate in bits/s/Hz from the normal approximation.
    pub rate: Vec<f64>,
    pub g: Vec<f64>,
    pub eps: Vec<f64>,
    pub energy_j: f64,
    /// `min_k g_k`.
    pub chi: f64,
    /// `max_k ε_k = Q(χ)`.
    pub worst_eps: f64,
    pub blocklength: f64,
    /// The blocklength fits in one slot.
    pub latency_ok: bool,
    pub energy_ok: bool,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn report_from_sinr(sinr: Vec<f64>, alloc: &Allocation, cfg: &SystemConfig) -> MetricsReport {
    let m = alloc.blocklength;
    let g = g_values(&sinr, m, &cfg.payload_bits, Dispersion::Unit);
    let eps: Vec<f64> = g.iter().map(|&x| q_function(x)).collect();
    let rate = sinr.iter().zip(&g).map(|(&s, &gk)| (1.0 + s).log2() - gk / (m.sqrt() * LN_2)).collect();
    let chi = g.iter().copied().fold(f64::INFINITY, f64::min);
    let energy_j = alloc.energy(cfg);
    MetricsReport {
        rate,
        eps,
        g,
        sinr,
        energy_j,
        chi,
        worst_eps: q_function(chi),
        blocklength: m,
        latency_ok: m <= cfg.max_blocklength() + 1e-9,
        energy_ok: energy_j <= cfg.energy_budget_j * (1.0 + 1e-12),
    }
}

pub fn report(ch: &ChannelRealization, alloc: &Allocation, cfg: &SystemConfig) -> Result<MetricsReport> {
    Ok(report_from_sinr(sinr_all(ch, alloc, cfg)?, alloc, cfg))
}

/// `χ = min_k g_k` for explicit combined channels; the workhorse of every
/// scorer.
pub fn min_g(q: &[CVec], combiners: &[CVec], power: &[f64], alloc: &Allocation, cfg: &SystemConfig) -> f64 {
    let table = GainTable::new(q, combiners, cfg.interference);
    let sinr = table.sinr(power, &alloc.grouping, &alloc.order, cfg.noise_w);
    sinr.iter()
        .zip(&cfg.payload_bits)
        .map(|(&s, &d)| g_value(s, alloc.blocklength, d as f64, Dispersion::Unit))
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn unit(n: usize) -> CVec {
    let mut e = CVec::zeros(n);
    if n > 0 {
        e[0] = Complex64::new(1.0, 0.0);
    }
    e
}
