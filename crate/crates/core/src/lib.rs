//! Expected-utility portfolio optimization on finite event trees and
//! stochastic-order analysis of the optimal payoffs.
//!
//! The crate provides:
//!
//! * [`dist`] — finite discrete distributions with the call-function
//!   calculus used by every order check;
//! * [`order`] — monotone convex / convex order decisions and the
//!   construction of a coupling witnessing the convex order;
//! * [`utility`] — power, log and exponential utilities with exact marginal
//!   calculus and risk-aversion comparison;
//! * [`tree`] — event-tree markets, their validation, the unique martingale
//!   measure of complete trees, and small-probability perturbations that
//!   break completeness;
//! * [`solver`] — optimal wealth processes by backward induction and by the
//!   complete-market dual method;
//! * [`iid`] — constant-fraction optima and exact or Monte Carlo laws of
//!   centered return products in i.i.d. markets.

pub mod dist;
pub mod iid;
pub mod order;
mod opt;
pub mod solver;
pub mod tree;
pub mod utility;

pub use dist::{Atom, DiscreteDist, DistError};
pub use iid::{
    check_centered_convex_statistical, check_euler_order, euler_product_dist, mc_product_sample,
    optimal_fraction, EmpiricalDist, IidError, IncrementDist,
};
pub use order::{
    check_centered_convex, check_convex, check_mc, default_tol, gap_curve, strassen_coupling,
    Coupling, CouplingAtom, GapPoint, OrderError, OrderVerdict, Relation,
};
pub use solver::{
    replicate, solve_complete_dual, solve_dp, ControlKind, Policy, Solution, SolveError,
};
pub use tree::{
    build_base_example, build_inserted_branch, build_paper_example, perturb, EmmDensity,
    EventTree, NodeSpec, ProbConvention, TreeError, TreeNode, ValidationReport,
};
pub use utility::{compare_risk_aversion, more_risk_averse, AraOrder, UtilityError, UtilitySpec};
