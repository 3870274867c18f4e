//! Shared generators and independent oracles for the integration suites.
//!
//! Each integration-test target compiles its own copy of this module, so
//! helpers used by only one suite look dead to the others.
//!
//! The oracles here deliberately avoid the library's kink-based order logic:
//! they evaluate hockey-stick expectations on a fine strike grid and solve
//! first-order conditions by plain bisection, so the fast paths are checked
//! against something dumber.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use riskorder::{DiscreteDist, EventTree, IncrementDist, NodeSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random distribution with up to `max_atoms` atoms and values in `[lo, hi]`.
pub fn random_dist(rng: &mut ChaCha8Rng, max_atoms: usize, lo: f64, hi: f64) -> DiscreteDist {
    let n = rng.random_range(1..=max_atoms);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(0.05..1.0)))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    DiscreteDist::new(pairs.into_iter().map(|(x, w)| (x, w / total))).expect("valid by construction")
}

/// Random distribution supported on integers in `[lo, hi]`.
pub fn random_integer_dist(rng: &mut ChaCha8Rng, max_atoms: usize, lo: i64, hi: i64) -> DiscreteDist {
    let n = rng.random_range(1..=max_atoms);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(lo..=hi) as f64, rng.random_range(0.05..1.0)))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    DiscreteDist::new(pairs.into_iter().map(|(x, w)| (x, w / total))).expect("valid by construction")
}

/// A random mean-preserving spread of `d`: each atom is split symmetrically
/// with probability 1/2, which preserves the mean and increases convex order.
pub fn mean_preserving_spread(rng: &mut ChaCha8Rng, d: &DiscreteDist) -> DiscreteDist {
    let mut pairs = Vec::new();
    for a in d.atoms() {
        if rng.random_bool(0.5) {
            let delta: f64 = rng.random_range(0.01..1.0);
            pairs.push((a.x - delta, a.p / 2.0));
            pairs.push((a.x + delta, a.p / 2.0));
        } else {
            pairs.push((a.x, a.p));
        }
    }
    DiscreteDist::new(pairs).expect("splitting keeps a valid law")
}

/// Random complete binomial tree of the given depth with per-step returns
/// inside `(-0.9, 4)` and one-step no-arbitrage at every node.
pub fn random_binomial_tree(rng: &mut ChaCha8Rng, max_depth: u32) -> EventTree {
    let depth = rng.random_range(1..=max_depth);
    let mut specs: Vec<NodeSpec> = vec![NodeSpec {
        id: 0,
        parent: None,
        prob: 1.0,
        price: 1.0,
        time: 0,
    }];
    let mut frontier: Vec<usize> = vec![0];
    let mut next_id: u64 = 1;
    for t in 1..=depth {
        let mut new_frontier = Vec::new();
        for &parent_pos in &frontier {
            let parent_id = specs[parent_pos].id;
            let price = specs[parent_pos].price;
            // down moves of at least 25% cap the admissible leverage at 4,
            // keeping terminal wealth at desk scale even for nearly
            // risk-neutral investors
            let r_up: f64 = rng.random_range(0.05..1.0);
            let r_down: f64 = rng.random_range(-0.7..-0.25);
            let p_up: f64 = rng.random_range(0.15..0.85);
            for (r, p) in [(r_up, p_up), (r_down, 1.0 - p_up)] {
                specs.push(NodeSpec {
                    id: next_id,
                    parent: Some(parent_id),
                    prob: p,
                    price: price * (1.0 + r),
                    time: t,
                });
                new_frontier.push(specs.len() - 1);
                next_id += 1;
            }
        }
        frontier = new_frontier;
    }
    EventTree::new(depth, &specs).expect("generated tree is well formed")
}

/// Random incomplete tree: every node branches into two or three children
/// (the root always into three), mixed-sign returns throughout.
pub fn random_incomplete_tree(rng: &mut ChaCha8Rng, max_depth: u32) -> EventTree {
    let depth = rng.random_range(2..=max_depth);
    let mut specs: Vec<NodeSpec> = vec![NodeSpec {
        id: 0,
        parent: None,
        prob: 1.0,
        price: 1.0,
        time: 0,
    }];
    let mut frontier: Vec<usize> = vec![0];
    let mut next_id: u64 = 1;
    for t in 1..=depth {
        let mut new_frontier = Vec::new();
        for &parent_pos in &frontier {
            let parent_id = specs[parent_pos].id;
            let price = specs[parent_pos].price;
            let fanout = if parent_pos == 0 { 3 } else { rng.random_range(2..=3) };
            let mut returns = vec![rng.random_range(0.05..1.2), rng.random_range(-0.6..-0.05)];
            if fanout == 3 {
                returns.push(rng.random_range(-0.6..1.2));
            }
            let weights: Vec<f64> = (0..fanout).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (r, w) in returns.iter().zip(&weights) {
                specs.push(NodeSpec {
                    id: next_id,
                    parent: Some(parent_id),
                    prob: w / total,
                    price: price * (1.0 + r),
                    time: t,
                });
                new_frontier.push(specs.len() - 1);
                next_id += 1;
            }
        }
        frontier = new_frontier;
    }
    EventTree::new(depth, &specs).expect("generated tree is well formed")
}

/// Random increment law with up to `max_atoms` atoms, at least one negative
/// and one positive return value.
pub fn random_increment(rng: &mut ChaCha8Rng, max_atoms: usize) -> IncrementDist {
    let extra = rng.random_range(0..=max_atoms.saturating_sub(2));
    let mut pairs = vec![
        (rng.random_range(-0.9..-0.05), rng.random_range(0.1..1.0)),
        (rng.random_range(0.05..1.5), rng.random_range(0.1..1.0)),
    ];
    for _ in 0..extra {
        pairs.push((rng.random_range(-0.9..1.5), rng.random_range(0.1..1.0)));
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let law = DiscreteDist::new(pairs.into_iter().map(|(x, w)| (x, w / total)))
        .expect("valid by construction");
    IncrementDist::new(law).expect("mixed-sign support by construction")
}

/// Brute-force monotone convex order oracle: checks `E[(X-K)^+] <=
/// E[(Y-K)^+] + tol` on a fine uniform strike grid spanning both supports
/// (plus a margin) and the mean comparison.
pub fn mc_order_oracle(x: &DiscreteDist, y: &DiscreteDist, grid: usize, tol: f64) -> bool {
    let lo = x.min_value().min(y.min_value()) - 1.0;
    let hi = x.max_value().max(y.max_value()) + 1.0;
    let call = |d: &DiscreteDist, k: f64| -> f64 {
        d.atoms().iter().map(|a| a.p * (a.x - k).max(0.0)).sum()
    };
    for i in 0..=grid {
        let k = lo + (hi - lo) * i as f64 / grid as f64;
        if call(y, k) - call(x, k) < -tol {
            return false;
        }
    }
    y.mean() - x.mean() >= -tol
}

/// Bisection on a decreasing-difference first-order condition
/// `sum p_c r_c (1 + pi r_c)^(-p) w_c = 0` over the admissible interval;
/// fully independent of the library's golden-section path.
pub fn bisect_power_foc(branches: &[(f64, f64, f64)], p: f64) -> f64 {
    let g = |pi: f64| -> f64 {
        branches
            .iter()
            .map(|&(prob, r, w)| prob * r * (1.0 + pi * r).powf(-p) * w)
            .sum()
    };
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &(_, r, _) in branches {
        if r > 0.0 {
            lo = lo.max(-1.0 / r);
        } else if r < 0.0 {
            hi = hi.min(-1.0 / r);
        }
    }
    let width = hi - lo;
    let (mut a, mut b) = (lo + 1e-14 * width, hi - 1e-14 * width);
    // g is decreasing with g(a) > 0 > g(b) under one-step no-arbitrage
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if g(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Sup-norm distance between two laws with matching atom layouts; panics if
/// the layouts differ, which the cross-validation treats as disagreement.
pub fn law_sup_distance(a: &DiscreteDist, b: &DiscreteDist) -> f64 {
    assert_eq!(a.len(), b.len(), "terminal laws have different atom counts");
    a.atoms()
        .iter()
        .zip(b.atoms())
        .map(|(x, y)| (x.x - y.x).abs().max((x.p - y.p).abs()))
        .fold(0.0, f64::max)
}
