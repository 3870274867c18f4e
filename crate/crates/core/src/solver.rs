//! Optimal wealth processes on event trees.
//!
//! Two routes to the optimum: backward dynamic programming, which works on
//! any arbitrage-free tree, and the complete-market dual method, which reads
//! the terminal wealth off the martingale density and replicates it. For
//! power and log utilities the control is the fraction of wealth in the
//! risky asset; for exponential utility it is the absolute holding, whose
//! optimum is wealth-independent.

use crate::dist::DiscreteDist;
use crate::opt::{golden_section_min, newton_polish};
use crate::tree::{EventTree, TreeError};
use crate::utility::{UtilityError, UtilitySpec};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Utility(#[from] UtilityError),
    #[error("initial capital {0} must be strictly positive for halfline utilities")]
    BadInitialCapital(f64),
    #[error("failed to bracket the optimal control at node {0}")]
    ControlBracket(u64),
    #[error("failed to bracket the budget multiplier")]
    BudgetBracket,
    #[error("replication impossible at node {node}: {detail}")]
    Replication { node: u64, detail: String },
}

/// How the per-node control is parametrized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlKind {
    /// Fraction of current wealth invested in the risky asset (power, log).
    Fraction,
    /// Absolute holding of the risky asset (exponential).
    Amount,
}

/// The trading strategy: one control per non-terminal node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Policy {
    pub kind: ControlKind,
    /// Indexed like the tree's nodes; `None` at terminal nodes.
    pub controls: Vec<Option<f64>>,
}

/// An optimal wealth process together with its terminal law and value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub policy: Policy,
    /// Wealth per node, indexed like the tree's nodes.
    pub wealth: Vec<f64>,
    pub terminal_dist: DiscreteDist,
    /// Attained expected utility.
    pub value: f64,
    /// Lagrange multiplier of the budget constraint (dual solver only).
    pub multiplier: Option<f64>,
}

impl Solution {
    pub fn terminal_distribution(&self) -> &DiscreteDist {
        &self.terminal_dist
    }
}

fn ensure_no_arbitrage(tree: &EventTree) -> Result<(), SolveError> {
    let report = tree.validate();
    if report.passes() {
        Ok(())
    } else {
        Err(SolveError::Tree(TreeError::Arbitrage(report.arbitrage_nodes)))
    }
}

/// Aggregates leaf wealth into the physical-measure terminal law.
fn terminal_law(tree: &EventTree, wealth: &[f64]) -> DiscreteDist {
    DiscreteDist::new(tree.leaves().iter().map(|&l| (wealth[l], tree.path_prob(l))))
        .expect("path probabilities form a distribution")
}

fn expected_utility(tree: &EventTree, u: &UtilitySpec, wealth: &[f64]) -> Result<f64, SolveError> {
    let mut total = 0.0;
    for &l in tree.leaves() {
        total += tree.path_prob(l) * u.evaluate(wealth[l])?;
    }
    Ok(total)
}

/// Open interval of fractions keeping `1 + pi * r > 0` for every return.
fn admissible_interval(returns: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &r in returns {
        if r > 0.0 {
            lo = lo.max(-1.0 / r);
        } else if r < 0.0 {
            hi = hi.min(-1.0 / r);
        }
    }
    (lo, hi)
}

pub(crate) struct Branch {
    pub(crate) prob: f64,
    pub(crate) ret: f64,
    pub(crate) weight: f64,
}

/// Optimal fraction for one node of the power-utility recursion, maximizing
/// (p < 1) or minimizing (p > 1) `sum prob * (1 + pi*r)^(1-p) * weight`.
pub(crate) fn optimal_power_fraction(branches: &[Branch], p: f64) -> (f64, f64) {
    let e = 1.0 - p;
    let h = |pi: f64| -> f64 {
        branches
            .iter()
            .map(|b| b.prob * (1.0 + pi * b.ret).powf(e) * b.weight)
            .sum()
    };
    let returns: Vec<f64> = branches.iter().map(|b| b.ret).collect();
    let (lo, hi) = admissible_interval(&returns);
    let objective = |pi: f64| if p < 1.0 { -h(pi) } else { h(pi) };
    let coarse = golden_section_min(objective, lo, hi);
    let g = |pi: f64| -> f64 {
        branches
            .iter()
            .map(|b| b.prob * b.ret * (1.0 + pi * b.ret).powf(-p) * b.weight)
            .sum()
    };
    let dg = |pi: f64| -> f64 {
        -p * branches
            .iter()
            .map(|b| b.prob * b.ret * b.ret * (1.0 + pi * b.ret).powf(-p - 1.0) * b.weight)
            .sum::<f64>()
    };
    let pi = newton_polish(g, dg, coarse, lo, hi);
    (pi, h(pi))
}

/// Optimal fraction for one node under log utility, maximizing
/// `sum prob * ln(1 + pi*r)`; independent of the continuation values.
pub(crate) fn optimal_log_fraction(branches: &[Branch]) -> f64 {
    let returns: Vec<f64> = branches.iter().map(|b| b.ret).collect();
    let (lo, hi) = admissible_interval(&returns);
    let objective = |pi: f64| -> f64 {
        -branches
            .iter()
            .map(|b| b.prob * (1.0 + pi * b.ret).ln())
            .sum::<f64>()
    };
    let coarse = golden_section_min(objective, lo, hi);
    let g = |pi: f64| -> f64 {
        branches.iter().map(|b| b.prob * b.ret / (1.0 + pi * b.ret)).sum()
    };
    let dg = |pi: f64| -> f64 {
        -branches
            .iter()
            .map(|b| b.prob * (b.ret / (1.0 + pi * b.ret)).powi(2))
            .sum::<f64>()
    };
    newton_polish(g, dg, coarse, lo, hi)
}

/// Optimal holding for one node under exponential utility, minimizing
/// `sum prob * exp(-gamma * theta * dS) * weight` over all reals.
fn optimal_exp_amount(
    branches: &[(f64, f64, f64)], // (prob, dS, weight)
    gamma: f64,
    node_id: u64,
) -> Result<(f64, f64), SolveError> {
    let f = |theta: f64| -> f64 {
        branches
            .iter()
            .map(|&(prob, ds, w)| prob * (-gamma * theta * ds).exp() * w)
            .sum()
    };
    // coercive and strictly convex under one-step no-arbitrage: double the
    // symmetric interval until both ends lie above the center
    let max_ds = branches.iter().map(|b| b.1.abs()).fold(0.0, f64::max);
    let f0 = f(0.0);
    let mut radius = 1.0 / (gamma * max_ds);
    for _ in 0..200 {
        if f(-radius) > f0 && f(radius) > f0 {
            break;
        }
        radius *= 2.0;
        if !radius.is_finite() {
            return Err(SolveError::ControlBracket(node_id));
        }
    }
    let coarse = golden_section_min(f, -radius, radius);
    let g = |theta: f64| -> f64 {
        branches
            .iter()
            .map(|&(prob, ds, w)| -gamma * ds * prob * (-gamma * theta * ds).exp() * w)
            .sum()
    };
    let dg = |theta: f64| -> f64 {
        branches
            .iter()
            .map(|&(prob, ds, w)| (gamma * ds).powi(2) * prob * (-gamma * theta * ds).exp() * w)
            .sum()
    };
    let theta = newton_polish(g, dg, coarse, -radius, radius);
    Ok((theta, f(theta)))
}

fn zero_return_node(tree: &EventTree, node: usize) -> bool {
    tree.children(node)
        .iter()
        .all(|&c| tree.one_step_return(c).abs() <= 1e-12)
}

/// Solves the utility maximization problem by backward induction.
///
/// Power and log utilities factor the value function as
/// `U(x) * v(node)` (log: `ln x + v(node)`), so the optimal fraction at a
/// node depends only on the children's factors; exponential utility factors
/// as `-exp(-gamma x) * w(node)` with a wealth-independent optimal holding.
pub fn solve_dp(tree: &EventTree, u: &UtilitySpec, x0: f64) -> Result<Solution, SolveError> {
    ensure_no_arbitrage(tree)?;
    match *u {
        UtilitySpec::Power { .. } | UtilitySpec::Log => {
            if !(x0.is_finite() && x0 > 0.0) {
                return Err(SolveError::BadInitialCapital(x0));
            }
        }
        UtilitySpec::Exp { .. } => {
            if !x0.is_finite() {
                return Err(SolveError::BadInitialCapital(x0));
            }
        }
    }

    let n = tree.len();
    let mut controls: Vec<Option<f64>> = vec![None; n];
    let mut factor = vec![1.0; n];
    let kind = match *u {
        UtilitySpec::Exp { .. } => ControlKind::Amount,
        _ => ControlKind::Fraction,
    };

    for t in (0..tree.horizon()).rev() {
        for &i in tree.level(t) {
            if tree.is_leaf(i) {
                continue;
            }
            if zero_return_node(tree, i) {
                // flat objective: any control is optimal, take zero
                controls[i] = Some(0.0);
                factor[i] = tree
                    .children(i)
                    .iter()
                    .map(|&c| tree.node(c).branch_prob * factor[c])
                    .sum();
                continue;
            }
            match *u {
                UtilitySpec::Power { p } => {
                    let branches: Vec<Branch> = tree
                        .children(i)
                        .iter()
                        .map(|&c| Branch {
                            prob: tree.node(c).branch_prob,
                            ret: tree.one_step_return(c),
                            weight: factor[c],
                        })
                        .collect();
                    let (pi, value) = optimal_power_fraction(&branches, p);
                    controls[i] = Some(pi);
                    factor[i] = value;
                }
                UtilitySpec::Log => {
                    let branches: Vec<Branch> = tree
                        .children(i)
                        .iter()
                        .map(|&c| Branch {
                            prob: tree.node(c).branch_prob,
                            ret: tree.one_step_return(c),
                            weight: 1.0,
                        })
                        .collect();
                    controls[i] = Some(optimal_log_fraction(&branches));
                }
                UtilitySpec::Exp { gamma } => {
                    let node_price = tree.node(i).price;
                    let branches: Vec<(f64, f64, f64)> = tree
                        .children(i)
                        .iter()
                        .map(|&c| {
                            (
                                tree.node(c).branch_prob,
                                tree.node(c).price - node_price,
                                factor[c],
                            )
                        })
                        .collect();
                    let (theta, value) = optimal_exp_amount(&branches, gamma, tree.node(i).id)?;
                    controls[i] = Some(theta);
                    factor[i] = value;
                }
            }
        }
    }

    // roll wealth forward through the controls
    let mut wealth = vec![0.0; n];
    wealth[tree.root()] = x0;
    for t in 1..=tree.horizon() {
        for &i in tree.level(t) {
            let parent = tree.node(i).parent.expect("non-root");
            let control = controls[parent].expect("non-terminal parent has a control");
            wealth[i] = match kind {
                ControlKind::Fraction => {
                    wealth[parent] * (1.0 + control * tree.one_step_return(i))
                }
                ControlKind::Amount => {
                    wealth[parent] + control * (tree.node(i).price - tree.node(parent).price)
                }
            };
        }
    }

    let terminal_dist = terminal_law(tree, &wealth);
    let value = expected_utility(tree, u, &wealth)?;
    Ok(Solution {
        policy: Policy { kind, controls },
        wealth,
        terminal_dist,
        value,
        multiplier: None,
    })
}

/// Solves the problem on a complete tree through the first-order condition:
/// terminal wealth is the inverse marginal utility of `y * dQ/dP`, with the
/// multiplier `y` pinned down by the budget constraint under the unique
/// martingale measure.
pub fn solve_complete_dual(
    tree: &EventTree,
    u: &UtilitySpec,
    x0: f64,
) -> Result<Solution, SolveError> {
    ensure_no_arbitrage(tree)?;
    if matches!(u, UtilitySpec::Power { .. } | UtilitySpec::Log) && !(x0.is_finite() && x0 > 0.0) {
        return Err(SolveError::BadInitialCapital(x0));
    }
    if !x0.is_finite() {
        return Err(SolveError::BadInitialCapital(x0));
    }
    let emm = tree.unique_emm()?;
    let leaves = tree.leaves();
    let q_mass: Vec<f64> = leaves
        .iter()
        .map(|&l| tree.path_prob(l) * emm.density(l))
        .collect();

    let budget = |y: f64| -> f64 {
        leaves
            .iter()
            .zip(&q_mass)
            .map(|(&l, &q)| {
                q * u
                    .inverse_marginal(y * emm.density(l))
                    .expect("positive multiplier times positive density")
            })
            .sum()
    };

    // bracket the multiplier geometrically, then bisect in log space
    let y_guess = match *u {
        UtilitySpec::Exp { gamma } => gamma * (-gamma * x0).exp(),
        _ => u.marginal(x0)?,
    };
    let mut lo = y_guess;
    let mut hi = y_guess;
    let mut steps = 0;
    while budget(lo) < x0 {
        lo *= 0.25;
        steps += 1;
        if steps > 600 || lo < f64::MIN_POSITIVE {
            return Err(SolveError::BudgetBracket);
        }
    }
    while budget(hi) > x0 {
        hi *= 4.0;
        steps += 1;
        if steps > 600 || !hi.is_finite() {
            return Err(SolveError::BudgetBracket);
        }
    }
    // resolve the multiplier essentially to machine precision: its relative
    // error is amplified by 1/p in the terminal wealth
    for _ in 0..256 {
        if hi / lo - 1.0 <= 4e-15 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if budget(mid) > x0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = (lo * hi).sqrt();

    let leaf_wealth: Vec<f64> = leaves
        .iter()
        .map(|&l| {
            u.inverse_marginal(y * emm.density(l))
                .expect("positive multiplier times positive density")
        })
        .collect();
    let kind = match *u {
        UtilitySpec::Exp { .. } => ControlKind::Amount,
        _ => ControlKind::Fraction,
    };
    let (wealth, policy) = replicate(tree, &leaf_wealth, kind)?;
    let terminal_dist = terminal_law(tree, &wealth);
    let value = expected_utility(tree, u, &wealth)?;
    Ok(Solution {
        policy,
        wealth,
        terminal_dist,
        value,
        multiplier: Some(y),
    })
}

/// Replicates a terminal claim on a complete tree: wealth is the
/// Q-expectation of the claim, and each node's control solves the two-point
/// hedge equations exactly.
///
/// `leaf_wealth` is aligned with `tree.leaves()`.
pub fn replicate(
    tree: &EventTree,
    leaf_wealth: &[f64],
    kind: ControlKind,
) -> Result<(Vec<f64>, Policy), SolveError> {
    assert_eq!(leaf_wealth.len(), tree.leaves().len(), "one wealth entry per leaf");
    let emm = tree.unique_emm()?;
    let n = tree.len();
    let mut wealth = vec![0.0; n];
    for (&l, &w) in tree.leaves().iter().zip(leaf_wealth) {
        wealth[l] = w;
    }
    let mut controls: Vec<Option<f64>> = vec![None; n];
    for t in (0..tree.horizon()).rev() {
        for &i in tree.level(t) {
            if tree.is_leaf(i) {
                continue;
            }
            let ch = tree.children(i);
            wealth[i] = ch.iter().map(|&c| emm.branch_q(c) * wealth[c]).sum();
            let theta = match ch.len() {
                1 => 0.0,
                2 => {
                    let (a, b) = (ch[0], ch[1]);
                    let ds = tree.node(a).price - tree.node(b).price;
                    (wealth[a] - wealth[b]) / ds
                }
                _ => unreachable!("unique_emm enforces at most two children"),
            };
            controls[i] = Some(match kind {
                ControlKind::Amount => theta,
                ControlKind::Fraction => {
                    if theta == 0.0 {
                        0.0
                    } else if wealth[i] != 0.0 {
                        theta * tree.node(i).price / wealth[i]
                    } else {
                        return Err(SolveError::Replication {
                            node: tree.node(i).id,
                            detail: "zero wealth cannot carry a nonzero fractional hedge".into(),
                        });
                    }
                }
            });
        }
    }
    Ok((wealth, Policy { kind, controls }))
}
