//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{LN_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_conic::{CMat, CVec, Complex64};
use ris_noma::channel::{realize_channels, ChannelRealization};
use ris_noma::metrics::combined_channels;
use ris_noma::model::{Allocation, DecodeOrder, Grouping, Pair, SystemConfig};
use ris_noma::orchestrator::matched_combiners;
use ris_noma::power::PowerContext;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_cvec<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
}

pub fn random_unit_modulus<R: Rng>(rng: &mut R, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| Complex64::from_polar(1.0, TAU * rng.random::<f64>()))
}

/// `g` written with natural logarithms: `√m·(ln(1+γ) − D·ln2/m)`.
pub fn g_by_hand(sinr: f64, m: f64, bits: f64) -> f64 {
    m.sqrt() * ((1.0 + sinr).ln() - bits * LN_2 / m)
}

/// Two-user SIC by hand: the strong user is decoded first and sees the weak
/// user through the weak user's own combiner.
pub fn pair_sinr_by_hand(q: &[CVec], w: &[CVec], p: &[f64], noise: f64, strong: usize, weak: usize) -> [f64; 2] {
    let gain = |a: usize, b: usize| {
        let mut acc = c(0.0, 0.0);
        for i in 0..q[b].len() {
            acc += w[a][i].conj() * q[b][i];
        }
        acc.norm_sqr()
    };
    let s = p[strong] * gain(strong, strong) / (p[weak] * gain(weak, weak) + noise);
    let wk = p[weak] * gain(weak, weak) / noise;
    [s, wk]
}

/// Two-user configuration with a fresh realization and the decoding order
/// set by the combined gain under an all-ones reflection.
pub fn pair_setup(seed: u64, nt: usize, n: usize) -> (SystemConfig, ChannelRealization, Allocation) {
    let cfg = SystemConfig { seed, bs_antennas: nt, ris_elements: n, ..SystemConfig::default() }.with_users(2);
    let ch = realize_channels(&cfg).unwrap();
    let reflection = CVec::from_element(n, c(1.0, 0.0));
    let q = combined_channels(&ch, &reflection).unwrap();
    let (strong, weak) = if q[0].norm() >= q[1].norm() { (0, 1) } else { (1, 0) };
    let m = cfg.max_blocklength();
    let alloc = Allocation {
        power: vec![0.9 * cfg.energy_budget_j / (m * 2.0); 2]
            .iter()
            .zip(&cfg.p_max_w)
            .map(|(a, b)| a.min(*b))
            .collect(),
        combiners: matched_combiners(&q),
        reflection,
        blocklength: m,
        grouping: Grouping::Pairs(vec![Pair { strong, weak }]),
        order: DecodeOrder::from_sequence(&[strong, weak]),
    };
    (cfg, ch, alloc)
}

/// Unit vectors of `C²` on a polar/phase grid with `step_deg` resolution,
/// up to a global phase.
pub fn sphere_grid(step_deg: f64) -> Vec<CVec> {
    let mut out = Vec::new();
    let polar_steps = (90.0 / step_deg).round() as usize;
    let phase_steps = (360.0 / step_deg).round() as usize;
    for a in 0..=polar_steps {
        let theta = (a as f64 * step_deg).to_radians();
        for b in 0..phase_steps {
            let phi = (b as f64 * step_deg).to_radians();
            out.push(CVec::from_vec(vec![c(theta.cos(), 0.0), Complex64::from_polar(theta.sin(), phi)]));
            if a == 0 {
                break;
            }
        }
    }
    out
}

/// `(1, e^{jθ})` on a `step_deg` grid.
pub fn phase_grid_2(step_deg: f64) -> Vec<CVec> {
    let steps = (360.0 / step_deg).round() as usize;
    (0..steps)
        .map(|i| CVec::from_vec(vec![c(1.0, 0.0), Complex64::from_polar(1.0, (i as f64 * step_deg).to_radians())]))
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Largest bottleneck over all perfect matchings, by enumeration.
pub fn bottleneck_by_enumeration(w: &[Vec<f64>]) -> f64 {
    permutations(w.len())
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| w[i][j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest total weight over all perfect matchings, by enumeration.
pub fn assignment_by_enumeration(w: &[Vec<f64>]) -> f64 {
    permutations(w.len())
        .iter()
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| w[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Hermitian matrix with entries drawn uniformly.
pub fn random_hermitian<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()) * c(0.5, 0.0)
}

pub fn random_psd<R: Rng>(rng: &mut R, n: usize) -> CMat {
    let a = CMat::from_fn(n, n, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    &a * a.adjoint()
}

/// Tolerance rule shared by the "within x%" comparisons: `value` may fall
/// short of `reference` by `frac·|reference|`.
pub fn within_fraction(value: f64, reference: f64, frac: f64) -> bool {
    value >= reference - frac * reference.abs()
}

/// Grid optimum of `min(g_strong, g_weak)` over unit combiners. The strong
/// user's SINR grows with its own beam gain alone, so its best grid point is
/// independent of the weak user's combiner.
pub fn beam_grid_chi(q: &[CVec], alloc: &Allocation, cfg: &SystemConfig, grid: &[CVec]) -> f64 {
    let pair = alloc.grouping.pairs().unwrap()[0];
    let (s, w) = (pair.strong, pair.weak);
    let best_strong = grid.iter().max_by(|a, b| a.dotc(&q[s]).norm_sqr().total_cmp(&b.dotc(&q[s]).norm_sqr())).unwrap();
    grid.iter()
        .map(|ww| {
            let mut comb = vec![CVec::zeros(2); 2];
            comb[s] = best_strong.clone();
            comb[w] = ww.clone();
            let sinr = pair_sinr_by_hand(q, &comb, &alloc.power, cfg.noise_w, s, w);
            let m = alloc.blocklength;
            g_by_hand(sinr[0], m, cfg.payload_bits[s] as f64).min(g_by_hand(sinr[1], m, cfg.payload_bits[w] as f64))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best `χ` over a `steps × steps` grid of `(0, p_max]²` within the budget.
pub fn power_grid_chi(ctx: &PowerContext, steps: usize) -> f64 {
    let cfg = ctx.cfg;
    let budget = cfg.energy_budget_j / (cfg.symbol_s * ctx.blocklength);
    let mut best = f64::NEG_INFINITY;
    for i in 1..=steps {
        let p0 = cfg.p_max_w[0] * i as f64 / steps as f64;
        for j in 1..=steps {
            let p1 = cfg.p_max_w[1] * j as f64 / steps as f64;
            if p0 + p1 <= budget {
                best = best.max(ctx.chi(&[p0, p1]));
            }
        }
    }
    best
}
