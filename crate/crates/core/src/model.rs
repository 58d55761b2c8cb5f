//! Scenario configuration, unit conversions and the allocation state.
//!
//! Powers are stored in watts, distances in meters and gains as linear
//! ratios. dB and dBm quantities only exist in the configuration file and are
//! converted once by [`SystemConfig::from_toml_str`].

use std::path::Path;

use ris_conic::{CVec, Complex64};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position(pub [f64; 3]);

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Axis-aligned placement rectangle at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub z: f64,
}

/// Which combiner the interference term of a later-decoded user is seen
/// through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceModel {
    /// The interferer's own combiner applied to its own channel,
    /// `|w_jᴴ q_j|²`.
    #[default]
    OwnCombiner,
    /// The victim's combiner applied to the interferer's channel,
    /// `|w_kᴴ q_j|²`.
    VictimCombiner,
}

impl InterferenceModel {
    /// Index of the combiner that sees interference from `source` at `victim`.
    pub fn combiner(self, victim: usize, source: usize) -> usize {
        match self {
            InterferenceModel::OwnCombiner => source,
            InterferenceModel::VictimCombiner => victim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Stop the power SCA when χ moves less than this.
    pub power_tol: f64,
    pub power_iters: usize,
    /// Width at which χ bisections inside the power step stop.
    pub power_chi_tol: f64,
    /// Width at which the beamforming χ bisection stops.
    pub beam_tol: f64,
    /// Change in the reflection iterate below which the penalty SCA stops.
    pub ris_tol: f64,
    pub ris_iters: usize,
    /// Width at which the reflection χ bisection stops.
    pub ris_chi_tol: f64,
    pub pairing_tol: f64,
    pub pairing_iters: usize,
    /// Bottleneck pairing over the sorted weight set instead of a real-valued
    /// threshold bisection.
    pub exact_bottleneck: bool,
    pub ao_tol: f64,
    pub ao_iters: usize,
    /// Gaussian randomization sample count.
    pub samples: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            power_tol: 1e-6,
            power_iters: 30,
            power_chi_tol: 1e-6,
            beam_tol: 1e-3,
            ris_tol: 1e-4,
            ris_iters: 8,
            ris_chi_tol: 1e-2,
            pairing_tol: 1e-6,
            pairing_iters: 60,
            exact_bottleneck: true,
            ao_tol: 1e-4,
            ao_iters: 20,
            samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub users: usize,
    pub bs_antennas: usize,
    pub ris_elements: usize,
    /// Payload bits per user.
    pub payload_bits: Vec<u32>,
    /// Slot duration in seconds.
    pub slot_s: f64,
    /// Symbol duration in seconds.
    pub symbol_s: f64,
    /// Shared energy budget in joules.
    pub energy_budget_j: f64,
    pub p_max_w: Vec<f64>,
    pub noise_w: f64,
    pub alpha_bs_ris: f64,
    pub alpha_ris_user: f64,
    pub rician_bs_ris: f64,
    pub rician_ris_user: f64,
    /// Path gain at 1 m.
    pub ref_gain: f64,
    pub bs_pos: Position,
    pub ris_pos: Position,
    pub user_region: Region,
    pub seed: u64,
    pub interference: InterferenceModel,
    pub solver: SolverSettings,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let users = 4;
        Self {
            users,
            bs_antennas: 3,
            ris_elements: 32,
            payload_bits: vec![DEFAULT_PAYLOAD_BITS; users],
            slot_s: 10.0,
            symbol_s: 0.5,
            energy_budget_j: 10.0,
            p_max_w: vec![0.3; users],
            noise_w: dbm_to_watts(-110.0),
            alpha_bs_ris: 2.2,
            alpha_ris_user: 2.6,
            rician_bs_ris: db_to_linear(5.0),
            rician_ris_user: db_to_linear(5.0),
            ref_gain: db_to_linear(-30.0),
            bs_pos: Position([5.0, 15.0, 10.0]),
            ris_pos: Position([0.0, 0.0, 10.0]),
            user_region: Region { x: [90.0, 190.0], y: [-10.0, 10.0], z: 0.0 },
            seed: 1,
            interference: InterferenceModel::OwnCombiner,
            solver: SolverSettings::default(),
        }
    }
}

pub const DEFAULT_PAYLOAD_BITS: u32 = 64;

impl SystemConfig {
    /// Largest blocklength allowed by the slot, `floor(T / T_sym)`.
    pub fn max_blocklength(&self) -> f64 {
        (self.slot_s / self.symbol_s + 1e-9).floor()
    }

    pub fn validate(self) -> Result<Self> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.users < 2 || !self.users.is_multiple_of(2) {
            return bad(format!("K must be even and at least 2 (got {})", self.users));
        }
        if self.bs_antennas == 0 {
            return bad("Nt must be at least 1".into());
        }
        if self.ris_elements == 0 {
            return bad("N must be at least 1".into());
        }
        if self.payload_bits.len() != self.users {
            return bad(format!("payload_bits has {} entries for {} users", self.payload_bits.len(), self.users));
        }
        if self.payload_bits.contains(&0) {
            return bad("payload_bits must be positive".into());
        }
        if self.p_max_w.len() != self.users {
            return bad(format!("p_max_w has {} entries for {} users", self.p_max_w.len(), self.users));
        }
        if self.p_max_w.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("p_max_w must be positive".into());
        }
        if !(self.symbol_s > 0.0 && self.symbol_s.is_finite()) {
            return bad("symbol_s must be positive".into());
        }
        if !(self.slot_s.is_finite() && self.symbol_s <= self.slot_s) {
            return bad("slot shorter than one symbol".into());
        }
        if self.max_blocklength() < 1.0 {
            return bad("slot shorter than one symbol".into());
        }
        if !(self.energy_budget_j > 0.0 && self.energy_budget_j.is_finite()) {
            return bad("E0 must be positive".into());
        }
        if !(self.noise_w > 0.0 && self.noise_w.is_finite()) {
            return bad("noise power must be positive".into());
        }
        if !(self.alpha_bs_ris >= 2.0 && self.alpha_ris_user >= 2.0) {
            return bad("path-loss exponents must be at least 2".into());
        }
        if !(self.rician_bs_ris >= 0.0 && self.rician_ris_user >= 0.0) {
            return bad("Rician factors must be non-negative".into());
        }
        if !(self.ref_gain > 0.0 && self.ref_gain.is_finite()) {
            return bad("reference gain must be positive".into());
        }
        let r = &self.user_region;
        if !(r.x[0] <= r.x[1] && r.y[0] <= r.y[1]) {
            return bad("user region bounds must be ordered".into());
        }
        let s = &self.solver;
        let tolerances = [s.power_tol, s.power_chi_tol, s.beam_tol, s.ris_tol, s.ris_chi_tol, s.pairing_tol, s.ao_tol];
        if tolerances.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("all solver tolerances must be positive".into());
        }
        if s.power_iters == 0 || s.ris_iters == 0 || s.pairing_iters == 0 || s.ao_iters == 0 {
            return bad("iteration caps must be positive".into());
        }
        if s.samples == 0 {
            return bad("randomization sample count must be positive".into());
        }
        Ok(self)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text)?;
        file.into_config()?.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Resizes the per-user vectors after a change of `users`, repeating the
    /// first entry.
    pub fn with_users(mut self, users: usize) -> Self {
        let bits = self.payload_bits.first().copied().unwrap_or(DEFAULT_PAYLOAD_BITS);
        let p = self.p_max_w.first().copied().unwrap_or(0.3);
        self.users = users;
        self.payload_bits = vec![bits; users];
        self.p_max_w = vec![p; users];
        self
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerUser<T> {
    Shared(T),
    Each(Vec<T>),
}

impl<T: Clone> PerUser<T> {
    fn expand(self, users: usize) -> Vec<T> {
        match self {
            PerUser::Shared(v) => vec![v; users],
            PerUser::Each(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    users: Option<usize>,
    bs_antennas: Option<usize>,
    ris_elements: Option<usize>,
    payload_bits: Option<PerUser<u32>>,
    slot_s: Option<f64>,
    symbol_s: Option<f64>,
    energy_budget_j: Option<f64>,
    p_max_w: Option<PerUser<f64>>,
    noise_dbm: Option<f64>,
    interference: Option<InterferenceModel>,
    geometry: Option<GeometryFile>,
    propagation: Option<PropagationFile>,
    solver: Option<SolverSettings>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryFile {
    bs: Option<[f64; 3]>,
    ris: Option<[f64; 3]>,
    user_x: Option<[f64; 2]>,
    user_y: Option<[f64; 2]>,
    user_z: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropagationFile {
    alpha_bs_ris: Option<f64>,
    alpha_ris_user: Option<f64>,
    rician_bs_ris_db: Option<f64>,
    rician_ris_user_db: Option<f64>,
    ref_gain_db: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> Result<SystemConfig> {
        let mut cfg = SystemConfig::default();
        let users = self.users.unwrap_or(cfg.users);
        cfg = cfg.with_users(users);
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(v) = self.bs_antennas {
            cfg.bs_antennas = v;
        }
        if let Some(v) = self.ris_elements {
            cfg.ris_elements = v;
        }
        if let Some(v) = self.payload_bits {
            cfg.payload_bits = v.expand(users);
        }
        if let Some(v) = self.slot_s {
            cfg.slot_s = v;
        }
        if let Some(v) = self.symbol_s {
            cfg.symbol_s = v;
        }
        if let Some(v) = self.energy_budget_j {
            cfg.energy_budget_j = v;
        }
        if let Some(v) = self.p_max_w {
            cfg.p_max_w = v.expand(users);
        }
        if let Some(v) = self.noise_dbm {
            cfg.noise_w = dbm_to_watts(v);
        }
        if let Some(v) = self.interference {
            cfg.interference = v;
        }
        if let Some(g) = self.geometry {
            if let Some(v) = g.bs {
                cfg.bs_pos = Position(v);
            }
            if let Some(v) = g.ris {
                cfg.ris_pos = Position(v);
            }
            if let Some(v) = g.user_x {
                cfg.user_region.x = v;
            }
            if let Some(v) = g.user_y {
                cfg.user_region.y = v;
            }
            if let Some(v) = g.user_z {
                cfg.user_region.z = v;
            }
        }
        if let Some(p) = self.propagation {
            if let Some(v) = p.alpha_bs_ris {
                cfg.alpha_bs_ris = v;
            }
            if let Some(v) = p.alpha_ris_user {
                cfg.alpha_ris_user = v;
            }
            if let Some(v) = p.rician_bs_ris_db {
                cfg.rician_bs_ris = db_to_linear(v);
            }
            if let Some(v) = p.rician_ris_user_db {
                cfg.rician_ris_user = db_to_linear(v);
            }
            if let Some(v) = p.ref_gain_db {
                cfg.ref_gain = db_to_linear(v);
            }
        }
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        Ok(cfg)
    }
}

/// SIC decoding order. `rank[k]` is the zero-based position at which user
/// `k` is decoded; a smaller rank is decoded earlier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOrder {
    rank: Vec<usize>,
}

impl DecodeOrder {
    /// Builds the order from the users listed in decoding sequence.
    pub fn from_sequence(sequence: &[usize]) -> Self {
        let mut rank = vec![usize::MAX; sequence.len()];
        for (pos, &k) in sequence.iter().enumerate() {
            rank[k] = pos;
        }
        Self { rank }
    }

    pub fn identity(users: usize) -> Self {
        Self { rank: (0..users).collect() }
    }

    pub fn rank(&self, user: usize) -> usize {
        self.rank[user]
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let mut seen = vec![false; self.rank.len()];
        self.rank.iter().all(|&r| r < seen.len() && !std::mem::replace(&mut seen[r], true))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pair {
    pub strong: usize,
    pub weak: usize,
}

/// How users share transmission resources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Grouping {
    /// TDMA across pairs, NOMA inside each pair.
    Pairs(Vec<Pair>),
    /// Every user in one NOMA group.
    Single,
}

impl Grouping {
    fn same_group(&self, a: usize, b: usize) -> bool {
        match self {
            Grouping::Single => true,
            Grouping::Pairs(pairs) => {
                pairs.iter().any(|p| (p.strong == a && p.weak == b) || (p.strong == b && p.weak == a))
            }
        }
    }

    /// Users whose signal is still present when `user` is decoded: members of
    /// its group with a later decoding rank.
    pub fn interferers(&self, user: usize, order: &DecodeOrder) -> Vec<usize> {
        (0..order.len())
            .filter(|&j| j != user && order.rank(j) > order.rank(user) && self.same_group(user, j))
            .collect()
    }

    /// Users that interfere with each other, as independent groups.
    pub fn groups(&self, users: usize) -> Vec<Vec<usize>> {
        match self {
            Grouping::Single => vec![(0..users).collect()],
            Grouping::Pairs(pairs) => pairs.iter().map(|p| vec![p.strong, p.weak]).collect(),
        }
    }

    pub fn pairs(&self) -> Option<&[Pair]> {
        match self {
            Grouping::Pairs(p) => Some(p),
            Grouping::Single => None,
        }
    }
}

/// The decision state shared by every optimization step.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub power: Vec<f64>,
    pub combiners: Vec<CVec>,
    pub reflection: CVec,
    /// Blocklength in symbols; real-valued until rounded.
    pub blocklength: f64,
    pub grouping: Grouping,
    pub order: DecodeOrder,
}

/// Tolerances used by [`Allocation::violations`].
#[derive(Debug, Clone, Copy)]
pub struct Audit {
    pub tol: f64,
    pub require_integer_blocklength: bool,
}

impl Default for Audit {
    fn default() -> Self {
        Self { tol: 1e-7, require_integer_blocklength: true }
    }
}

impl Allocation {
    pub fn energy(&self, cfg: &SystemConfig) -> f64 {
        cfg.symbol_s * self.blocklength * self.power.iter().sum::<f64>()
    }

    /// Every violated hard constraint, described in words; empty when the
    /// allocation is admissible.
    pub fn violations(&self, cfg: &SystemConfig, audit: Audit) -> Vec<String> {
        let tol = audit.tol;
        let k = cfg.users;
        let mut out = Vec::new();
        if self.power.len() != k || self.combiners.len() != k || self.order.len() != k {
            out.push("per-user vectors have the wrong length".to_string());
            return out;
        }
        for (u, (&p, &cap)) in self.power.iter().zip(&cfg.p_max_w).enumerate() {
            if !(p > 0.0) || p > cap + tol {
                out.push(format!("power of user {u} is {p}, outside (0, {cap}]"));
            }
        }
        for (u, w) in self.combiners.iter().enumerate() {
            if w.len() != cfg.bs_antennas || (w.norm() - 1.0).abs() > tol {
                out.push(format!("combiner of user {u} is not unit-norm"));
            }
        }
        if self.reflection.len() != cfg.ris_elements {
            out.push("reflection vector has the wrong length".to_string());
        } else if let Some(n) = self.reflection.iter().position(|z: &Complex64| (z.norm() - 1.0).abs() > tol) {
            out.push(format!("reflection element {n} is not unit-modulus"));
        }
        let m = self.blocklength;
        if !(m >= 1.0 - tol && m <= cfg.max_blocklength() + tol) {
            out.push(format!("blocklength {m} outside [1, {}]", cfg.max_blocklength()));
        }
        if audit.require_integer_blocklength && (m - m.round()).abs() > tol {
            out.push(format!("blocklength {m} is not an integer"));
        }
        let energy = self.energy(cfg);
        if energy > cfg.energy_budget_j + tol {
            out.push(format!("energy {energy} exceeds the budget {}", cfg.energy_budget_j));
        }
        if !self.order.is_permutation() {
            out.push("decoding order is not a permutation".to_string());
        }
        if let Grouping::Pairs(pairs) = &self.grouping {
            let mut seen = vec![0usize; k];
            for p in pairs {
                if p.strong >= k || p.weak >= k {
                    out.push("pair references an unknown user".to_string());
                    continue;
                }
                seen[p.strong] += 1;
                seen[p.weak] += 1;
                if self.order.is_permutation() && self.order.rank(p.strong) >= self.order.rank(p.weak) {
                    out.push(format!("pair ({}, {}) decodes the weak user first", p.strong, p.weak));
                }
            }
            if pairs.len() * 2 != k || seen.iter().any(|&c| c != 1) {
                out.push("pairing is not a perfect matching of the users".to_string());
            }
        }
        out
    }

    pub fn record(&self) -> AllocationRecord {
        let pairs = |v: &CVec| v.iter().map(|z| [z.re, z.im]).collect();
        AllocationRecord {
            power_w: self.power.clone(),
            combiners: self.combiners.iter().map(pairs).collect(),
            reflection: pairs(&self.reflection),
            blocklength: self.blocklength,
            pairs: self.grouping.pairs().map(|p| p.iter().map(|p| [p.strong, p.weak]).collect()),
            decode_rank: (0..self.order.len()).map(|k| self.order.rank(k)).collect(),
        }
    }
}

/// Flat serializable view of an [`Allocation`]; complex entries are
/// `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AllocationRecord {
    pub power_w: Vec<f64>,
    pub combiners: Vec<Vec<[f64; 2]>>,
    pub reflection: Vec<[f64; 2]>,
    pub blocklength: f64,
    /// `[strong, weak]` pairs, absent for a single NOMA group.
    pub pairs: Option<Vec<[usize; 2]>>,
    pub decode_rank: Vec<usize>,
}
