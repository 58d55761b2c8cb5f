//! Strong/weak user pairing: random initial pairing, per-pair weights and
//! bottleneck matching by threshold search with Kuhn–Munkres.

use rand::seq::SliceRandom;
use ris_conic::CVec;

use crate::metrics::{g_value, Dispersion, GainTable};
use crate::model::{Allocation, DecodeOrder, Grouping, Pair, SolverSettings, SystemConfig};
use crate::seeds::{stream, Purpose};

/// Edge weights of the strong × weak bipartite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PairWeightMatrix {
    pub strong: Vec<usize>,
    pub weak: Vec<usize>,
    /// `e[i][j] = min(g_strong, g_weak)` if `strong[i]` were paired with
    /// `weak[j]`.
    pub e: Vec<Vec<f64>>,
}

impl PairWeightMatrix {
    pub fn grouping(&self, matching: &[usize]) -> Grouping {
        Grouping::Pairs(
            matching.iter().enumerate().map(|(i, &j)| Pair { strong: self.strong[i], weak: self.weak[j] }).collect(),
        )
    }

    /// Column matched to each strong user under `grouping`, if it pairs the
    /// same two sets.
    pub fn matching_of(&self, grouping: &Grouping) -> Option<Vec<usize>> {
        let pairs = grouping.pairs()?;
        self.strong
            .iter()
            .map(|s| {
                let p = pairs.iter().find(|p| p.strong == *s)?;
                self.weak.iter().position(|&w| w == p.weak)
            })
            .collect()
    }
}

/// Pairs `strong[i]` with a uniformly shuffled weak user.
pub fn random_pairing(strong: &[usize], weak: &[usize], root: u64) -> Grouping {
    let mut shuffled = weak.to_vec();
    shuffled.shuffle(&mut stream(root, Purpose::Pairing, 0));
    Grouping::Pairs(strong.iter().zip(shuffled).map(|(&s, w)| Pair { strong: s, weak: w }).collect())
}

/// Weights from the current powers, combiners and reflection, with each
/// candidate pair evaluated on its own.
pub fn pair_weights(
    q: &[CVec],
    alloc: &Allocation,
    cfg: &SystemConfig,
    strong: &[usize],
    weak: &[usize],
) -> PairWeightMatrix {
    let gains = GainTable::new(q, &alloc.combiners, cfg.interference);
    let e = strong.iter().map(|&s| weak.iter().map(|&w| pair_chi(&gains, alloc, cfg, s, w)).collect()).collect();
    PairWeightMatrix { strong: strong.to_vec(), weak: weak.to_vec(), e }
}

fn pair_chi(gains: &GainTable, alloc: &Allocation, cfg: &SystemConfig, s: usize, w: usize) -> f64 {
    let grouping = Grouping::Pairs(vec![Pair { strong: s, weak: w }]);
    let sinr = gains.sinr(&alloc.power, &grouping, &alloc.order, cfg.noise_w);
    [s, w]
        .iter()
        .map(|&k| g_value(sinr[k], alloc.blocklength, cfg.payload_bits[k] as f64, Dispersion::Unit))
        .fold(f64::INFINITY, f64::min)
}

/// Kuhn–Munkres with potentials on a square cost matrix (minimization).
/// Returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r - 1][col - 1] - u[r] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for col in 1..=n {
        assign[owner[col] - 1] = col - 1;
    }
    assign
}

fn best_total(weights: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let cost: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| -weights[r][c]).collect()).collect();
    let assign = min_cost_assignment(&cost);
    rows.iter().zip(&assign).map(|(&r, &a)| weights[r][cols[a]]).sum()
}

/// Perfect matching maximizing the total weight; among optimal matchings
/// the lexicographically smallest column sequence is returned.
pub fn hungarian_assign(weights: &[Vec<f64>]) -> Vec<usize> {
    let n = weights.len();
    let all: Vec<usize> = (0..n).collect();
    let target = best_total(weights, &all, &all);
    let tol = 1e-9 * (1.0 + target.abs());
    let mut free: Vec<usize> = all.clone();
    let mut gathered = 0.0;
    let mut matching = Vec::with_capacity(n);
    for row in 0..n {
        let rest_rows: Vec<usize> = (row + 1..n).collect();
        let pick = free
            .iter()
            .copied()
            .find(|&col| {
                let rest_cols: Vec<usize> = free.iter().copied().filter(|&c| c != col).collect();
                gathered + weights[row][col] + best_total(weights, &rest_rows, &rest_cols) >= target - tol
            })
            .expect("an optimal completion always exists");
        gathered += weights[row][pick];
        free.retain(|&c| c != pick);
        matching.push(pick);
    }
    matching
}

#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckMatch {
    /// Column (weak index) matched to each row (strong index).
    pub matching: Vec<usize>,
    /// Smallest weight on the matching.
    pub chi_match: f64,
}

fn perfect_at(weights: &[Vec<f64>], threshold: f64) -> Option<Vec<usize>> {
    let n = weights.len();
    let indicator: Vec<Vec<f64>> =
        weights.iter().map(|row| row.iter().map(|&e| if e >= threshold { 1.0 } else { 0.0 }).collect()).collect();
    let matching = hungarian_assign(&indicator);
    let size: f64 = matching.iter().enumerate().map(|(i, &j)| indicator[i][j]).sum();
    (size as usize == n).then_some(matching)
}

pub fn bottleneck_value(weights: &[Vec<f64>], matching: &[usize]) -> f64 {
    matching.iter().enumerate().map(|(i, &j)| weights[i][j]).fold(f64::INFINITY, f64::min)
}

/// Perfect matching maximizing the smallest selected weight.
///
/// The exact mode searches the sorted distinct weights; otherwise the
/// threshold is bisected on the real line until the bracket is narrower than
/// the pairing tolerance or the iteration cap is reached.
pub fn bottleneck_pairing(weights: &[Vec<f64>], settings: &SolverSettings) -> BottleneckMatch {
    let n = weights.len();
    if n == 0 {
        return BottleneckMatch { matching: Vec::new(), chi_match: f64::INFINITY };
    }
    let matching = if settings.exact_bottleneck {
        let mut levels: Vec<f64> = weights.iter().flatten().copied().collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        // levels[lo] always admits a perfect matching (it is the minimum).
        let (mut lo, mut hi) = (0usize, levels.len());
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if perfect_at(weights, levels[mid]).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        perfect_at(weights, levels[lo]).expect("threshold admitted a perfect matching")
    } else {
        let flat = weights.iter().flatten().copied();
        let mut lo = flat.clone().fold(f64::INFINITY, f64::min);
        let mut hi = flat.fold(f64::NEG_INFINITY, f64::max);
        let mut best = perfect_at(weights, lo).expect("the minimum weight admits every matching");
        let mut iters = 0;
        while hi - lo > settings.pairing_tol && iters < settings.pairing_iters {
            let mid = 0.5 * (lo + hi);
            match perfect_at(weights, mid) {
                Some(m) => {
                    lo = mid;
                    best = m;
                }
                None => hi = mid,
            }
            iters += 1;
        }
        if let Some(m) = perfect_at(weights, hi) {
            best = m;
        }
        best
    };
    let chi_match = bottleneck_value(weights, &matching);
    BottleneckMatch { matching, chi_match }
}

/// Strong users are decoded before their partners; any order works as long
/// as that holds within each pair.
pub fn respects_order(grouping: &Grouping, order: &DecodeOrder) -> bool {
    grouping.pairs().is_none_or(|pairs| pairs.iter().all(|p| order.rank(p.strong) < order.rank(p.weak)))
}
