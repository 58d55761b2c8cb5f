mod common;

use common::{pair_setup, power_grid_chi, rng};
use rand::Rng;
use ris_noma::metrics::{combined_channels, g_value, Dispersion, GainTable};
use ris_noma::model::{DecodeOrder, Grouping, Pair, SystemConfig};
use ris_noma::power::{default_power, refresh_lambda, sca_power, solve_p4_subproblem, PowerContext};

#[test]
fn sca_reaches_the_power_grid_chi() {
    for seed in 0..5 {
        let (mut cfg, ch, alloc) = pair_setup(seed, 2, 8);
        cfg.energy_budget_j = [4.0, 8.0, 12.0][seed as usize % 3];
        let q = combined_channels(&ch, &alloc.reflection).unwrap();
        let gains = GainTable::new(&q, &alloc.combiners, cfg.interference);
        let ctx = PowerContext {
            gains: &gains,
            grouping: &alloc.grouping,
            order: &alloc.order,
            blocklength: 20.0,
            cfg: &cfg,
        };
        let res = sca_power(&ctx, &default_power(&cfg, 20.0)).unwrap();
        let grid = power_grid_chi(&ctx, 200);
        assert!(res.chi >= grid - 1e-3, "seed {seed}: {} vs grid {grid}", res.chi);
    }
}

fn hand_instance() -> (SystemConfig, GainTable, Grouping, DecodeOrder) {
    let mut cfg = SystemConfig { noise_w: 0.1, energy_budget_j: 8.0, ..SystemConfig::default() }.with_users(2);
    cfg.payload_bits = vec![4, 4];
    let gains = GainTable { signal: vec![1.0, 1.0], cross: vec![vec![0.0, 1.0], vec![1.0, 0.0]] };
    (cfg, gains, Grouping::Pairs(vec![Pair { strong: 0, weak: 1 }]), DecodeOrder::identity(2))
}

/// Slack of the convexified system at the best point of a 1e-3 grid.
fn grid_slack(cfg: &SystemConfig, chi: f64, lambda: f64) -> f64 {
    let m: f64 = 20.0;
    let eta = |k: usize| (chi / (m.sqrt() * std::f64::consts::LN_2) + cfg.payload_bits[k] as f64 / m).exp2() - 1.0;
    let (e0, e1) = (eta(0), eta(1));
    let budget = cfg.energy_budget_j / (cfg.symbol_s * m);
    let mut best = f64::NEG_INFINITY;
    for i in 1..=300 {
        let p0 = i as f64 * 1e-3;
        for j in 1..=300 {
            let p1 = j as f64 * 1e-3;
            if p0 + p1 > budget {
                continue;
            }
            let strong = p0 - (lambda / 2.0 * e0 * e0 + p1 * p1 / (2.0 * lambda)) - e0 * cfg.noise_w;
            let weak = p1 - e1 * cfg.noise_w;
            best = best.max(strong.min(weak));
        }
    }
    best
}

#[test]
fn subproblem_verdict_matches_grid_scan() {
    let (cfg, gains, grouping, order) = hand_instance();
    let ctx = PowerContext { gains: &gains, grouping: &grouping, order: &order, blocklength: 20.0, cfg: &cfg };
    let lambda = vec![vec![1.0; 2]; 2];
    let mut checked = 0;
    for step in 0..60 {
        let chi = -3.0 + step as f64 * 0.1;
        let slack = grid_slack(&cfg, chi, 1.0);
        if slack.abs() < 2e-3 {
            continue;
        }
        let verdict = solve_p4_subproblem(&ctx, chi, &lambda, &[0.01, 0.01]).unwrap();
        assert_eq!(verdict.is_some(), slack > 0.0, "chi {chi}: slack {slack}");
        checked += 1;
    }
    assert!(checked >= 30);
}

#[test]
fn very_negative_target_is_feasible() {
    let (cfg, gains, grouping, order) = hand_instance();
    let ctx = PowerContext { gains: &gains, grouping: &grouping, order: &order, blocklength: 20.0, cfg: &cfg };
    let lambda = vec![vec![1.0; 2]; 2];
    assert!(solve_p4_subproblem(&ctx, -1e3, &lambda, &[0.01, 0.01]).unwrap().is_some());
}

#[test]
fn feasible_sets_are_nested() {
    let mut r = rng(3);
    for _ in 0..20 {
        let (cfg, mut gains, grouping, order) = hand_instance();
        gains.signal = vec![r.random_range(0.2..3.0), r.random_range(0.2..3.0)];
        gains.cross[0][1] = r.random_range(0.1..2.0);
        let ctx = PowerContext { gains: &gains, grouping: &grouping, order: &order, blocklength: 20.0, cfg: &cfg };
        let lambda = vec![vec![r.random_range(0.05..2.0); 2]; 2];
        let verdicts: Vec<bool> = (0..25)
            .map(|i| solve_p4_subproblem(&ctx, -2.0 + 0.2 * i as f64, &lambda, &[0.01, 0.01]).unwrap().is_some())
            .collect();
        // Once infeasible, always infeasible.
        if let Some(first) = verdicts.iter().position(|v| !v) {
            assert!(verdicts[first..].iter().all(|v| !v), "{verdicts:?}");
        }
    }
}

#[test]
fn runs_are_deterministic_monotone_and_admissible() {
    for seed in 10..14 {
        let (cfg, ch, alloc) = pair_setup(seed, 3, 8);
        let q = combined_channels(&ch, &alloc.reflection).unwrap();
        let gains = GainTable::new(&q, &alloc.combiners, cfg.interference);
        let ctx = PowerContext {
            gains: &gains,
            grouping: &alloc.grouping,
            order: &alloc.order,
            blocklength: 20.0,
            cfg: &cfg,
        };
        let a = sca_power(&ctx, &default_power(&cfg, 20.0)).unwrap();
        let b = sca_power(&ctx, &default_power(&cfg, 20.0)).unwrap();
        assert_eq!(a, b);
        for w in a.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        for (p, cap) in a.power.iter().zip(&cfg.p_max_w) {
            assert!(*p > 0.0 && *p <= cap + 1e-8);
        }
        assert!(cfg.symbol_s * 20.0 * a.power.iter().sum::<f64>() <= cfg.energy_budget_j + 1e-8);
        let lambda = refresh_lambda(&ctx, &a.power);
        assert!(lambda.iter().flatten().all(|&l| l > 0.0));
    }
}

#[test]
fn chi_helper_agrees_with_g_values() {
    let (cfg, gains, grouping, order) = hand_instance();
    let ctx = PowerContext { gains: &gains, grouping: &grouping, order: &order, blocklength: 20.0, cfg: &cfg };
    let p = [0.2, 0.05];
    let s0 = 0.2 / (0.05 + 0.1);
    let s1 = 0.05 / 0.1;
    let expected = g_value(s0, 20.0, 4.0, Dispersion::Unit).min(g_value(s1, 20.0, 4.0, Dispersion::Unit));
    assert!((ctx.chi(&p) - expected).abs() < 1e-12);
}
