//! Finite multi-period markets as event trees.
//!
//! One riskless asset normalized to 1 and one risky asset whose price lives
//! on the nodes of a rooted tree. Each edge carries a branch probability;
//! leaves all sit at the horizon. The module also hosts the construction of
//! the two-period counterexample market and the generic last-period
//! perturbation that destroys market completeness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for treating a one-step return as zero and for
/// grouping equal successor prices.
const PRICE_TOL: f64 = 1e-12;

/// Tolerance on each node's children probabilities summing to one.
const PROB_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TreeError {
    #[error("duplicate node id {0}")]
    DuplicateId(u64),
    #[error("node {node} references unknown parent {parent}")]
    UnknownParent { node: u64, parent: u64 },
    #[error("tree has no root node")]
    NoRoot,
    #[error("nodes {0} and {1} are both roots")]
    MultipleRoots(u64, u64),
    #[error("root must have time 0 and probability 1")]
    BadRoot,
    #[error("node {node}: branch probability {prob} outside (0, 1]")]
    BadBranchProb { node: u64, prob: f64 },
    #[error("node {node}: price {price} is not strictly positive")]
    BadPrice { node: u64, price: f64 },
    #[error("node {node}: time {time} inconsistent with parent or horizon")]
    BadTime { node: u64, time: u32 },
    #[error("node {node} is a leaf at time {time}, expected horizon {horizon}")]
    LeafBeforeHorizon { node: u64, time: u32, horizon: u32 },
    #[error("node {node}: children probabilities sum to {sum}")]
    ChildProbSum { node: u64, sum: f64 },
    #[error("tree admits one-step arbitrage at nodes {0:?}")]
    Arbitrage(Vec<u64>),
    #[error("market is incomplete at node {node}: {detail}")]
    IncompleteMarket { node: u64, detail: String },
    #[error("parameter {name} = {value} out of range")]
    BadParameter { name: &'static str, value: f64 },
    #[error("perturbation targets time {got}, expected horizon - 1 = {expected}")]
    PerturbTime { expected: u32, got: u32 },
    #[error("node selector matched no node at the target time")]
    NoNodeSelected,
}

/// Raw node record as it appears in the JSON tree format.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: u64,
    pub parent: Option<u64>,
    pub prob: f64,
    pub price: f64,
    pub time: u32,
}

/// A node of an [`EventTree`]. `parent` is an internal index into the tree's
/// node array; `id` is the external identifier kept for round trips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub id: u64,
    pub parent: Option<usize>,
    pub branch_prob: f64,
    pub price: f64,
    pub time: u32,
}

#[derive(Deserialize)]
struct RawTree {
    horizon: u32,
    nodes: Vec<NodeSpec>,
}

/// A finite event-tree market.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct EventTree {
    nodes: Vec<TreeNode>,
    children: Vec<Vec<usize>>,
    levels: Vec<Vec<usize>>,
    root: usize,
    horizon: u32,
}

impl TryFrom<RawTree> for EventTree {
    type Error = TreeError;

    fn try_from(raw: RawTree) -> Result<Self, TreeError> {
        EventTree::new(raw.horizon, &raw.nodes)
    }
}

impl Serialize for EventTree {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Out<'a> {
            horizon: u32,
            nodes: Vec<NodeSpecRef<'a>>,
        }
        #[derive(Serialize)]
        struct NodeSpecRef<'a> {
            id: u64,
            parent: Option<u64>,
            prob: f64,
            price: f64,
            time: u32,
            #[serde(skip)]
            _marker: std::marker::PhantomData<&'a ()>,
        }
        let nodes = self
            .nodes
            .iter()
            .map(|n| NodeSpecRef {
                id: n.id,
                parent: n.parent.map(|p| self.nodes[p].id),
                prob: n.branch_prob,
                price: n.price,
                time: n.time,
                _marker: std::marker::PhantomData,
            })
            .collect();
        Out { horizon: self.horizon, nodes }.serialize(serializer)
    }
}

/// Outcome of the market validation scan: the tree is usable by the solvers
/// iff no node admits one-step arbitrage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    /// External ids of nodes whose one-step returns are all of one sign.
    pub arbitrage_nodes: Vec<u64>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.arbitrage_nodes.is_empty()
    }
}

/// The density of the unique equivalent martingale measure on a complete
/// tree, along with the risk-neutral branch probabilities that generate it.
#[derive(Debug, Clone, PartialEq)]
pub struct EmmDensity {
    branch_q: Vec<f64>,
    density: Vec<f64>,
}

impl EmmDensity {
    /// Risk-neutral probability of the edge leading into `node`.
    pub fn branch_q(&self, node: usize) -> f64 {
        self.branch_q[node]
    }

    /// `dQ/dP` restricted to the event of reaching `node`.
    pub fn density(&self, node: usize) -> f64 {
        self.density[node]
    }
}

impl EventTree {
    /// Builds a tree from raw node records, checking structural and market
    /// invariants (links, times, probabilities, prices).
    pub fn new(horizon: u32, specs: &[NodeSpec]) -> Result<Self, TreeError> {
        use std::collections::HashMap;
        let mut index: HashMap<u64, usize> = HashMap::with_capacity(specs.len());
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.id, i).is_some() {
                return Err(TreeError::DuplicateId(s.id));
            }
        }
        let mut nodes = Vec::with_capacity(specs.len());
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); specs.len()];
        let mut root: Option<usize> = None;
        for (i, s) in specs.iter().enumerate() {
            let parent = match s.parent {
                None => {
                    if let Some(r) = root {
                        return Err(TreeError::MultipleRoots(specs[r].id, s.id));
                    }
                    root = Some(i);
                    None
                }
                Some(pid) => {
                    let p = *index
                        .get(&pid)
                        .ok_or(TreeError::UnknownParent { node: s.id, parent: pid })?;
                    children[p].push(i);
                    Some(p)
                }
            };
            if !(s.prob.is_finite() && s.prob > 0.0 && s.prob <= 1.0) {
                return Err(TreeError::BadBranchProb { node: s.id, prob: s.prob });
            }
            if !(s.price.is_finite() && s.price > 0.0) {
                return Err(TreeError::BadPrice { node: s.id, price: s.price });
            }
            nodes.push(TreeNode {
                id: s.id,
                parent,
                branch_prob: s.prob,
                price: s.price,
                time: s.time,
            });
        }
        let root = root.ok_or(TreeError::NoRoot)?;
        if nodes[root].time != 0 || (nodes[root].branch_prob - 1.0).abs() > PROB_SUM_TOL {
            return Err(TreeError::BadRoot);
        }

        // time consistency and leaf depth
        for (i, n) in nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if n.time != nodes[p].time + 1 || n.time > horizon {
                    return Err(TreeError::BadTime { node: n.id, time: n.time });
                }
            }
            if children[i].is_empty() && n.time != horizon {
                return Err(TreeError::LeafBeforeHorizon {
                    node: n.id,
                    time: n.time,
                    horizon,
                });
            }
        }

        // children probabilities sum to one
        for (i, ch) in children.iter().enumerate() {
            if ch.is_empty() {
                continue;
            }
            let sum: f64 = ch.iter().map(|&c| nodes[c].branch_prob).sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(TreeError::ChildProbSum { node: nodes[i].id, sum });
            }
        }

        let mut levels: Vec<Vec<usize>> = vec![Vec::new(); horizon as usize + 1];
        for (i, n) in nodes.iter().enumerate() {
            levels[n.time as usize].push(i);
        }
        Ok(EventTree { nodes, children, levels, root, horizon })
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, idx: usize) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn children(&self, idx: usize) -> &[usize] {
        &self.children[idx]
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        self.children[idx].is_empty()
    }

    /// Internal indexes of the nodes at time `t`, in storage order.
    pub fn level(&self, t: u32) -> &[usize] {
        &self.levels[t as usize]
    }

    pub fn leaves(&self) -> &[usize] {
        self.level(self.horizon)
    }

    /// Physical probability of the path from the root to `idx`.
    pub fn path_prob(&self, idx: usize) -> f64 {
        let mut p = 1.0;
        let mut cur = idx;
        loop {
            p *= self.nodes[cur].branch_prob;
            match self.nodes[cur].parent {
                Some(parent) => cur = parent,
                None => break,
            }
        }
        p
    }

    /// One-step arithmetic return of the edge leading into `child`.
    pub fn one_step_return(&self, child: usize) -> f64 {
        let parent = self.nodes[child].parent.expect("root has no incoming edge");
        self.nodes[child].price / self.nodes[parent].price - 1.0
    }

    fn is_zero_return(&self, child: usize) -> bool {
        let parent = self.nodes[child].parent.expect("root has no incoming edge");
        (self.nodes[child].price - self.nodes[parent].price).abs()
            <= PRICE_TOL * self.nodes[parent].price
    }

    /// Scans every non-terminal node for one-step arbitrage: the node is
    /// sound when all its one-step returns are zero, or when the minimum
    /// return is negative and the maximum positive.
    pub fn validate(&self) -> ValidationReport {
        let mut bad = Vec::new();
        for (i, ch) in self.children.iter().enumerate() {
            if ch.is_empty() {
                continue;
            }
            let all_zero = ch.iter().all(|&c| self.is_zero_return(c));
            if all_zero {
                continue;
            }
            let min = ch.iter().map(|&c| self.one_step_return(c)).fold(f64::INFINITY, f64::min);
            let max = ch.iter().map(|&c| self.one_step_return(c)).fold(f64::NEG_INFINITY, f64::max);
            if !(min < 0.0 && max > 0.0) {
                bad.push(self.nodes[i].id);
            }
        }
        ValidationReport { arbitrage_nodes: bad }
    }

    /// Computes the unique equivalent martingale measure of a complete tree.
    ///
    /// Completeness with a single risky asset requires every node to branch
    /// into either one zero-return child or exactly two children with
    /// distinct prices; the one-step equation `q*S_up + (1-q)*S_down = S`
    /// must then have its solution in `(0, 1)`.
    pub fn unique_emm(&self) -> Result<EmmDensity, TreeError> {
        let n = self.nodes.len();
        let mut branch_q = vec![1.0; n];
        for (i, ch) in self.children.iter().enumerate() {
            if ch.is_empty() {
                continue;
            }
            let node = &self.nodes[i];
            match ch.len() {
                1 => {
                    if !self.is_zero_return(ch[0]) {
                        return Err(TreeError::IncompleteMarket {
                            node: node.id,
                            detail: "single successor with nonzero return admits no martingale measure".into(),
                        });
                    }
                    branch_q[ch[0]] = 1.0;
                }
                2 => {
                    let (a, b) = (ch[0], ch[1]);
                    let (sa, sb) = (self.nodes[a].price, self.nodes[b].price);
                    if (sa - sb).abs() <= PRICE_TOL * node.price {
                        return Err(TreeError::IncompleteMarket {
                            node: node.id,
                            detail: "two successors with equal prices leave the measure underdetermined".into(),
                        });
                    }
                    let q = (node.price - sb) / (sa - sb);
                    if !(q.is_finite() && q > 0.0 && q < 1.0) {
                        return Err(TreeError::IncompleteMarket {
                            node: node.id,
                            detail: format!("one-step equation has no solution in (0,1): q = {q}"),
                        });
                    }
                    branch_q[a] = q;
                    branch_q[b] = 1.0 - q;
                }
                _ => {
                    return Err(TreeError::IncompleteMarket {
                        node: node.id,
                        detail: format!("{} successors exceed the span of one risky asset", ch.len()),
                    });
                }
            }
        }
        let mut density = vec![1.0; n];
        for t in 1..=self.horizon {
            for &i in self.level(t) {
                let p = self.nodes[i].parent.expect("non-root node has a parent");
                density[i] = density[p] * branch_q[i] / self.nodes[i].branch_prob;
            }
        }
        Ok(EmmDensity { branch_q, density })
    }
}

/// Probability convention for the root branches of the two-period
/// counterexample market, whose published weights (0.6, eps, 0.4) cannot sum
/// to one exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbConvention {
    /// (0.6, eps, 0.4) / (1 + eps) — reproduces the published perturbed
    /// fractions to a few parts in 1e4.
    Normalized,
    /// (0.6, eps, 0.4 - eps) — subtracts the inserted mass from the down
    /// branch; kept for comparison.
    Deducted,
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), TreeError> {
    if value.is_finite() && value > lo && value < hi {
        Ok(())
    } else {
        Err(TreeError::BadParameter { name, value })
    }
}

/// The unperturbed two-period base market: the price moves from 1 to 2
/// (probability 0.6) or to 0.5 (probability 0.4) and stays constant in the
/// second period.
pub fn build_base_example() -> EventTree {
    let specs = [
        NodeSpec { id: 0, parent: None, prob: 1.0, price: 1.0, time: 0 },
        NodeSpec { id: 1, parent: Some(0), prob: 0.6, price: 2.0, time: 1 },
        NodeSpec { id: 2, parent: Some(0), prob: 0.4, price: 0.5, time: 1 },
        NodeSpec { id: 3, parent: Some(1), prob: 1.0, price: 2.0, time: 2 },
        NodeSpec { id: 4, parent: Some(2), prob: 1.0, price: 0.5, time: 2 },
    ];
    EventTree::new(2, &specs).expect("base example is well formed")
}

/// The one-period branch that gets inserted by the perturbation: price `c`
/// jumps to `c*k` with probability `1 - alpha` or drops to `c/2` with
/// probability `alpha`.
pub fn build_inserted_branch(c: f64, alpha: f64, k: f64) -> Result<EventTree, TreeError> {
    check_range("alpha", alpha, 0.0, 1.0)?;
    check_range("c", c, 0.0, f64::INFINITY)?;
    if !(k.is_finite() && k > 1.0) {
        return Err(TreeError::BadParameter { name: "k", value: k });
    }
    let specs = [
        NodeSpec { id: 0, parent: None, prob: 1.0, price: c, time: 0 },
        NodeSpec { id: 1, parent: Some(0), prob: 1.0 - alpha, price: c * k, time: 1 },
        NodeSpec { id: 2, parent: Some(0), prob: alpha, price: 0.5 * c, time: 1 },
    ];
    EventTree::new(1, &specs)
}

/// The perturbed two-period counterexample market: the base market plus an
/// extra first-period branch of probability ~`eps` at price 0.5 whose second
/// period jumps to `0.5*k` (probability `1 - alpha`) or drops to 0.25.
pub fn build_paper_example(
    eps: f64,
    alpha: f64,
    k: f64,
    convention: ProbConvention,
) -> Result<EventTree, TreeError> {
    check_range("eps", eps, 0.0, 1.0)?;
    check_range("alpha", alpha, 0.0, 1.0)?;
    if !(k.is_finite() && k > 1.0) {
        return Err(TreeError::BadParameter { name: "k", value: k });
    }
    let (p_up, p_ins, p_down) = match convention {
        ProbConvention::Normalized => (0.6 / (1.0 + eps), eps / (1.0 + eps), 0.4 / (1.0 + eps)),
        ProbConvention::Deducted => {
            if eps >= 0.4 {
                return Err(TreeError::BadParameter { name: "eps", value: eps });
            }
            (0.6, eps, 0.4 - eps)
        }
    };
    let specs = [
        NodeSpec { id: 0, parent: None, prob: 1.0, price: 1.0, time: 0 },
        NodeSpec { id: 1, parent: Some(0), prob: p_up, price: 2.0, time: 1 },
        NodeSpec { id: 2, parent: Some(0), prob: p_ins, price: 0.5, time: 1 },
        NodeSpec { id: 3, parent: Some(0), prob: p_down, price: 0.5, time: 1 },
        NodeSpec { id: 4, parent: Some(1), prob: 1.0, price: 2.0, time: 2 },
        NodeSpec { id: 5, parent: Some(2), prob: 1.0 - alpha, price: 0.5 * k, time: 2 },
        NodeSpec { id: 6, parent: Some(2), prob: alpha, price: 0.25, time: 2 },
        NodeSpec { id: 7, parent: Some(3), prob: 1.0, price: 0.5, time: 2 },
    ];
    EventTree::new(2, &specs)
}

/// Splits each selected node at time `horizon - 1` by an independent coin of
/// probability `eps`: on heads the final period is replaced by the two-point
/// branch `(c*k, 1-alpha) / (c/2, alpha)` where `c` is the node's price; on
/// tails the original subtree is kept with its probability scaled by
/// `1 - eps`. With `eps = 0` the tree is returned unchanged.
pub fn perturb<F>(
    tree: &EventTree,
    target_time: u32,
    selector: F,
    eps: f64,
    alpha: f64,
    k: f64,
) -> Result<EventTree, TreeError>
where
    F: Fn(&TreeNode) -> bool,
{
    if tree.horizon() < 1 || target_time != tree.horizon() - 1 {
        return Err(TreeError::PerturbTime {
            expected: tree.horizon().saturating_sub(1),
            got: target_time,
        });
    }
    if target_time == 0 {
        // splitting the root would need a second root; the construction
        // requires at least two periods
        return Err(TreeError::PerturbTime { expected: 1, got: 0 });
    }
    check_range("alpha", alpha, 0.0, 1.0)?;
    if !(k.is_finite() && k > 1.0) {
        return Err(TreeError::BadParameter { name: "k", value: k });
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(TreeError::BadParameter { name: "eps", value: eps });
    }

    let selected: Vec<usize> = tree
        .level(target_time)
        .iter()
        .copied()
        .filter(|&i| selector(tree.node(i)))
        .collect();
    if selected.is_empty() {
        return Err(TreeError::NoNodeSelected);
    }
    if eps == 0.0 {
        // zero coin mass: the heads branch would be null, so prune it
        return Ok(tree.clone());
    }

    let mut specs: Vec<NodeSpec> = tree
        .nodes()
        .iter()
        .map(|n| NodeSpec {
            id: n.id,
            parent: n.parent.map(|p| tree.node(p).id),
            prob: n.branch_prob,
            price: n.price,
            time: n.time,
        })
        .collect();
    let mut next_id = tree.nodes().iter().map(|n| n.id).max().unwrap_or(0) + 1;
    for &i in &selected {
        let node = tree.node(i);
        specs[i].prob *= 1.0 - eps;
        let head_id = next_id;
        specs.push(NodeSpec {
            id: head_id,
            parent: specs[i].parent,
            prob: node.branch_prob * eps,
            price: node.price,
            time: target_time,
        });
        specs.push(NodeSpec {
            id: next_id + 1,
            parent: Some(head_id),
            prob: 1.0 - alpha,
            price: node.price * k,
            time: target_time + 1,
        });
        specs.push(NodeSpec {
            id: next_id + 2,
            parent: Some(head_id),
            prob: alpha,
            price: node.price * 0.5,
            time: target_time + 1,
        });
        next_id += 3;
    }
    EventTree::new(tree.horizon(), &specs)
}
