//! The three-step pipeline: decoding order with a random pairing, alternating
//! optimization of power, combiners, reflection and blocklength, then
//! bottleneck re-pairing on the converged resources.

use std::time::Instant;

use ris_conic::{CVec, Complex64};
use serde::Serialize;

use crate::beam::optimize_w;
use crate::blocklength::{greedy_round, optimize_blocklength};
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::metrics::{combined_channels, min_g, report, unit, GainTable, MetricsReport};
use crate::model::{Allocation, Grouping, SystemConfig};
use crate::order::{classify, determine_order, determine_order_by_distance, gains_under, OrderResult};
use crate::pairing::{bottleneck_pairing, pair_weights, random_pairing};
use crate::power::{default_power, sca_power, PowerContext};
use crate::ris::optimize_phase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
    InfeasibleStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Init,
    Power,
    Beamforming,
    Reflection,
    Blocklength,
}

/// `χ` right after one step of the alternating loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step: StepKind,
    pub chi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepTimings {
    pub order_s: f64,
    pub power_s: f64,
    pub beamforming_s: f64,
    pub reflection_s: f64,
    pub blocklength_s: f64,
    pub pairing_s: f64,
}

impl StepTimings {
    pub fn total(&self) -> f64 {
        self.order_s + self.power_s + self.beamforming_s + self.reflection_s + self.blocklength_s + self.pairing_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunTrace {
    /// `χ` at the start and after every alternating-optimization iteration,
    /// with the blocklength still continuous.
    pub chi: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub timings: StepTimings,
    pub termination: Termination,
    /// Step that failed when `termination` is `InfeasibleStep`.
    pub failed_step: Option<String>,
}

impl RunTrace {
    fn new() -> Self {
        Self {
            chi: Vec::new(),
            steps: Vec::new(),
            timings: StepTimings::default(),
            termination: Termination::IterationCap,
            failed_step: None,
        }
    }

    fn record(&mut self, iteration: usize, step: StepKind, chi: f64) {
        self.steps.push(StepRecord { iteration, step, chi });
    }
}

/// How the strong/weak classification and decoding order are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderRule {
    CombinedGain,
    Proximity,
}

/// Reflection used by the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum ReflectionMode {
    Optimized,
    /// Kept as given throughout, including for the classification.
    Frozen(CVec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMode {
    Optimized,
    /// `min(p_max, E0/(T_sym·m·K))` for everyone, never updated.
    Equal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingMode {
    /// Random strong/weak pairs, optionally re-paired afterwards.
    Pairs { repair: bool },
    /// One NOMA group with the global decoding order.
    Single,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub order: OrderRule,
    pub reflection: ReflectionMode,
    pub power: PowerMode,
    pub grouping: GroupingMode,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            order: OrderRule::CombinedGain,
            reflection: ReflectionMode::Optimized,
            power: PowerMode::Optimized,
            grouping: GroupingMode::Pairs { repair: true },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub allocation: Allocation,
    pub report: MetricsReport,
    pub trace: RunTrace,
    pub order: OrderResult,
    /// Allocation and report before re-pairing, when re-pairing ran.
    pub before_pairing: Option<(Allocation, MetricsReport)>,
}

/// Uniform powers at the same budget share the power step starts from.
pub fn equal_power(cfg: &SystemConfig, blocklength: f64) -> Vec<f64> {
    let share = cfg.energy_budget_j / (cfg.symbol_s * blocklength * cfg.users as f64);
    cfg.p_max_w.iter().map(|&cap| cap.min(share)).collect()
}

/// Matched-filter combiners `q_k/‖q_k‖`.
pub fn matched_combiners(q: &[CVec]) -> Vec<CVec> {
    q.iter()
        .map(|v| {
            let norm = v.norm();
            if norm > 0.0 {
                v.unscale(norm)
            } else {
                unit(v.len())
            }
        })
        .collect()
}

fn initial_allocation(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    order: &OrderResult,
    grouping: Grouping,
    pipe: &Pipeline,
) -> Result<Allocation> {
    let m = cfg.max_blocklength();
    let q = combined_channels(ch, &order.reflection)?;
    let power = match pipe.power {
        PowerMode::Optimized => default_power(cfg, m),
        PowerMode::Equal => equal_power(cfg, m),
    };
    Ok(Allocation {
        power,
        combiners: matched_combiners(&q),
        reflection: order.reflection.clone(),
        blocklength: m,
        grouping,
        order: order.order.clone(),
    })
}

fn chi_of(ch: &ChannelRealization, alloc: &Allocation, cfg: &SystemConfig) -> Result<f64> {
    let q = combined_channels(ch, &alloc.reflection)?;
    Ok(min_g(&q, &alloc.combiners, &alloc.power, alloc, cfg))
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Alternating optimization for a fixed grouping and order, followed by
/// greedy rounding of the blocklength. A failing step ends the loop and the
/// last complete allocation is returned.
pub fn ao_inner_loop(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    init: Allocation,
    pipe: &Pipeline,
) -> Result<(Allocation, RunTrace)> {
    let mut trace = RunTrace::new();
    let mut alloc = init;
    let mut chi = chi_of(ch, &alloc, cfg)?;
    trace.chi.push(chi);
    trace.record(0, StepKind::Init, chi);
    let solver = &cfg.solver;
    for it in 0..solver.ao_iters {
        match ao_iteration(ch, cfg, &alloc, pipe, it, &mut trace) {
            Ok(next) => {
                let next_chi = chi_of(ch, &next, cfg)?;
                alloc = next;
                let gain = next_chi - chi;
                chi = next_chi;
                trace.chi.push(chi);
                if gain <= solver.ao_tol {
                    trace.termination = Termination::Converged;
                    break;
                }
            }
            Err(Error::Infeasible { step, .. }) | Err(Error::Solver { step, .. }) => {
                trace.termination = Termination::InfeasibleStep;
                trace.failed_step = Some(step.to_string());
                break;
            }
            Err(other) => return Err(other),
        }
    }
    let start = Instant::now();
    let sinr = sinr_of(ch, &alloc, cfg)?;
    alloc.blocklength = greedy_round(alloc.blocklength, &alloc.power, &sinr, cfg);
    trace.timings.blocklength_s += seconds(start);
    Ok((alloc, trace))
}

fn sinr_of(ch: &ChannelRealization, alloc: &Allocation, cfg: &SystemConfig) -> Result<Vec<f64>> {
    let q = combined_channels(ch, &alloc.reflection)?;
    Ok(GainTable::new(&q, &alloc.combiners, cfg.interference).sinr(
        &alloc.power,
        &alloc.grouping,
        &alloc.order,
        cfg.noise_w,
    ))
}

fn ao_iteration(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    current: &Allocation,
    pipe: &Pipeline,
    it: usize,
    trace: &mut RunTrace,
) -> Result<Allocation> {
    let mut alloc = current.clone();
    let iteration = it + 1;
    let mut q = combined_channels(ch, &alloc.reflection)?;

    let start = Instant::now();
    if pipe.power == PowerMode::Optimized {
        let gains = GainTable::new(&q, &alloc.combiners, cfg.interference);
        let ctx = PowerContext {
            gains: &gains,
            grouping: &alloc.grouping,
            order: &alloc.order,
            blocklength: alloc.blocklength,
            cfg,
        };
        alloc.power = sca_power(&ctx, &alloc.power)?.power;
    }
    let chi_power = min_g(&q, &alloc.combiners, &alloc.power, &alloc, cfg);
    trace.timings.power_s += seconds(start);
    trace.record(iteration, StepKind::Power, chi_power);

    let start = Instant::now();
    let beam = optimize_w(&q, &alloc, cfg, chi_power, it as u64)?;
    alloc.combiners = beam.combiners;
    trace.timings.beamforming_s += seconds(start);
    trace.record(iteration, StepKind::Beamforming, beam.chi);

    let start = Instant::now();
    if pipe.reflection == ReflectionMode::Optimized {
        let phase = optimize_phase(ch, &alloc, cfg, it as u64)?;
        alloc.reflection = phase.reflection;
        q = combined_channels(ch, &alloc.reflection)?;
    }
    trace.timings.reflection_s += seconds(start);
    trace.record(iteration, StepKind::Reflection, min_g(&q, &alloc.combiners, &alloc.power, &alloc, cfg));

    let start = Instant::now();
    let sinr = GainTable::new(&q, &alloc.combiners, cfg.interference).sinr(
        &alloc.power,
        &alloc.grouping,
        &alloc.order,
        cfg.noise_w,
    );
    let block = optimize_blocklength(&sinr, &alloc.power, cfg)?;
    alloc.blocklength = block.m_real;
    trace.timings.blocklength_s += seconds(start);
    trace.record(iteration, StepKind::Blocklength, block.chi);
    Ok(alloc)
}

fn uniform_phase_order(ch: &ChannelRealization, reflection: &CVec, rule: OrderRule) -> Result<OrderResult> {
    let gains = gains_under(ch, reflection)?;
    let scores: Vec<f64> = match rule {
        OrderRule::CombinedGain => gains.clone(),
        OrderRule::Proximity => ch.ris_user_distance.iter().map(|d| -d).collect(),
    };
    let (strong, weak, order) = classify(&scores);
    Ok(OrderResult { reflection: reflection.clone(), gains, strong, weak, order, relaxation_value: f64::NAN })
}

/// Runs a configured pipeline end to end.
pub fn run_pipeline(cfg: &SystemConfig, ch: &ChannelRealization, pipe: &Pipeline) -> Result<RunOutput> {
    if ch.users() != cfg.users || ch.elements() != cfg.ris_elements || ch.antennas() != cfg.bs_antennas {
        return Err(Error::Dimension("channel realization does not match the configuration".into()));
    }
    let start = Instant::now();
    let order = match (&pipe.reflection, pipe.order) {
        (ReflectionMode::Frozen(phi), rule) => uniform_phase_order(ch, phi, rule)?,
        (ReflectionMode::Optimized, OrderRule::CombinedGain) => determine_order(ch, cfg)?,
        (ReflectionMode::Optimized, OrderRule::Proximity) => determine_order_by_distance(ch, cfg)?,
    };
    let order_s = seconds(start);

    let grouping = match pipe.grouping {
        GroupingMode::Pairs { .. } => random_pairing(&order.strong, &order.weak, cfg.seed),
        GroupingMode::Single => Grouping::Single,
    };
    let init = initial_allocation(ch, cfg, &order, grouping, pipe)?;
    let (step2, mut trace) = ao_inner_loop(ch, cfg, init, pipe)?;
    trace.timings.order_s = order_s;
    let step2_report = report(ch, &step2, cfg)?;

    let repair = matches!(pipe.grouping, GroupingMode::Pairs { repair: true });
    if !repair || cfg.users <= 2 {
        return Ok(RunOutput { allocation: step2, report: step2_report, trace, order, before_pairing: None });
    }
    let start = Instant::now();
    let q = combined_channels(ch, &step2.reflection)?;
    let weights = pair_weights(&q, &step2, cfg, &order.strong, &order.weak);
    let matched = bottleneck_pairing(&weights.e, &cfg.solver);
    let mut allocation = step2.clone();
    allocation.grouping = weights.grouping(&matched.matching);
    trace.timings.pairing_s = seconds(start);
    let final_report = report(ch, &allocation, cfg)?;
    Ok(RunOutput { allocation, report: final_report, trace, order, before_pairing: Some((step2, step2_report)) })
}

pub fn run_three_step(cfg: &SystemConfig, ch: &ChannelRealization) -> Result<RunOutput> {
    run_pipeline(cfg, ch, &Pipeline::default())
}

/// Uniformly random unit-modulus vector.
pub fn random_reflection<R: rand::Rng>(n: usize, rng: &mut R) -> CVec {
    CVec::from_fn(n, |_, _| Complex64::from_polar(1.0, std::f64::consts::TAU * rng.random::<f64>()))
}
