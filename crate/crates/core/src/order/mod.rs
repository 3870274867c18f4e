//! Monotone convex and convex order checks between finite distributions,
//! plus the construction of a coupling witnessing the convex order.
//!
//! The gap function `K -> E[(Y-K)^+] - E[(X-K)^+]` is piecewise linear with
//! kinks only at support points of the two laws, so evaluating it at every
//! support point together with the mean comparison (its limit as the strike
//! tends to minus infinity) decides the order exactly.

mod simplex;

use crate::dist::{CallTable, DiscreteDist};
use serde::Serialize;
use simplex::LpError;
use thiserror::Error;

/// Which order relation a verdict refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "mc")]
    MonotoneConvex,
    #[serde(rename = "c")]
    Convex,
    #[serde(rename = "centered-c")]
    CenteredConvex,
}

/// Outcome of an order check between two distributions `X` and `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderVerdict {
    pub relation: Relation,
    /// Whether the order holds at the stated tolerance.
    pub holds: bool,
    /// Strike at which the call gap is smallest. `None` marks the limit
    /// `K -> -inf`, i.e. the mean comparison is the binding one.
    pub witness_k: Option<f64>,
    /// Most negative value of `E[(Y-K)^+] - E[(X-K)^+]` over the kinks.
    pub min_gap: f64,
    /// `E[Y] - E[X]`.
    pub mean_gap: f64,
    /// Tolerance the verdict was decided at.
    pub tol: f64,
    /// Set when the verdict holds but the smallest gap is within tolerance
    /// of zero, i.e. the weak inequality is active.
    pub boundary: bool,
    /// Set by the Monte Carlo checks, where gaps are compared against
    /// standard errors instead of a fixed tolerance.
    pub statistical: bool,
}

/// One sampled point of the call-gap curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapPoint {
    pub strike: f64,
    pub call_x: f64,
    pub call_y: f64,
    pub gap: f64,
}

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("the centered convex order between the marginals does not hold (min gap {min_gap}, mean gap {mean_gap})")]
    OrderDoesNotHold { min_gap: f64, mean_gap: f64 },
    #[error("coupling problem infeasible: {source}")]
    Infeasible {
        #[from]
        source: LpError,
    },
    #[error("coupling residual {residual} exceeds tolerance {tol}")]
    ResidualTooLarge { residual: f64, tol: f64 },
}

/// Default order tolerance: 1e-9 scaled by the magnitude of the means.
pub fn default_tol(x: &DiscreteDist, y: &DiscreteDist) -> f64 {
    1e-9 * x.mean().abs().max(y.mean().abs()).max(1.0)
}

/// Strikes at which the gap function can kink: the union of both supports.
fn kink_strikes(x: &DiscreteDist, y: &DiscreteDist) -> Vec<f64> {
    let mut ks: Vec<f64> = x
        .atoms()
        .iter()
        .chain(y.atoms().iter())
        .map(|a| a.x)
        .collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    ks
}

fn scan_gaps(x: &DiscreteDist, y: &DiscreteDist, tol: f64) -> (f64, f64, f64) {
    let tx = CallTable::new(x);
    let ty = CallTable::new(y);
    let strikes = kink_strikes(x, y);
    let gaps: Vec<f64> = strikes.iter().map(|&k| ty.call(k) - tx.call(k)).collect();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    // the gap can be exactly flat across a strike interval (equal tail
    // masses); resolve ties toward the largest strike, which is the
    // canonical witness when the order fails at the top of a support
    let witness = strikes
        .iter()
        .zip(&gaps)
        .rev()
        .find(|(_, &g)| g <= min_gap + tol)
        .map(|(&k, _)| k)
        .unwrap_or(f64::NAN);
    (min_gap, witness, y.mean() - x.mean())
}

/// Decides the monotone convex order `X <=_MC Y`: every call value of `Y`
/// must dominate the one of `X`, and so must the mean.
pub fn check_mc(x: &DiscreteDist, y: &DiscreteDist, tol: f64) -> OrderVerdict {
    let (min_gap, witness, mean_gap) = scan_gaps(x, y, tol);
    let gaps_ok = min_gap >= -tol;
    let holds = gaps_ok && mean_gap >= -tol;
    OrderVerdict {
        relation: Relation::MonotoneConvex,
        holds,
        witness_k: if holds || !gaps_ok { Some(witness) } else { None },
        min_gap,
        mean_gap,
        tol,
        boundary: holds && min_gap <= tol,
        statistical: false,
    }
}

/// Decides the convex order `X <=_C Y`: the monotone convex order with
/// equal means.
pub fn check_convex(x: &DiscreteDist, y: &DiscreteDist, tol: f64) -> OrderVerdict {
    let (min_gap, witness, mean_gap) = scan_gaps(x, y, tol);
    let gaps_ok = min_gap >= -tol;
    let holds = gaps_ok && mean_gap.abs() <= tol;
    OrderVerdict {
        relation: Relation::Convex,
        holds,
        witness_k: if holds || !gaps_ok { Some(witness) } else { None },
        min_gap,
        mean_gap,
        tol,
        boundary: holds && min_gap <= tol,
        statistical: false,
    }
}

/// Decides the convex order between the centered laws `X - E[X]` and
/// `Y - E[Y]`.
pub fn check_centered_convex(x: &DiscreteDist, y: &DiscreteDist, tol: f64) -> OrderVerdict {
    let mut verdict = check_convex(&x.center(), &y.center(), tol);
    verdict.relation = Relation::CenteredConvex;
    verdict
}

/// Samples the call-gap curve at every kink plus `fill` uniformly spaced
/// strikes across the joint support, for plotting.
pub fn gap_curve(x: &DiscreteDist, y: &DiscreteDist, fill: usize) -> Vec<GapPoint> {
    let mut ks = kink_strikes(x, y);
    let (lo, hi) = (ks[0], ks[ks.len() - 1]);
    if fill > 0 && hi > lo {
        for i in 0..fill {
            ks.push(lo + (hi - lo) * (i as f64 + 0.5) / fill as f64);
        }
    }
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let tx = CallTable::new(x);
    let ty = CallTable::new(y);
    ks.iter()
        .map(|&k| {
            let (cx, cy) = (tx.call(k), ty.call(k));
            GapPoint { strike: k, call_x: cx, call_y: cy, gap: cy - cx }
        })
        .collect()
}

/// One cell of a [`Coupling`]'s joint table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CouplingAtom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

/// A joint law of `(X, Y)` with the given marginals in which
/// `E[Y | X] = X + shift`, witnessing that `Y` is `X` plus a deterministic
/// risk premium plus conditional-mean-zero noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub joint: Vec<CouplingAtom>,
    pub shift: f64,
}

impl Coupling {
    /// Marginal law of the first coordinate.
    pub fn x_marginal(&self) -> DiscreteDist {
        DiscreteDist::new(self.joint.iter().map(|c| (c.x, c.mass)))
            .expect("coupling masses form a distribution")
    }

    /// Marginal law of the second coordinate.
    pub fn y_marginal(&self) -> DiscreteDist {
        DiscreteDist::new(self.joint.iter().map(|c| (c.y, c.mass)))
            .expect("coupling masses form a distribution")
    }

    /// Largest deviation of a conditional mean from `x + shift`, weighted by
    /// nothing: the raw per-`x` residual `|E[Y | X=x] - x - shift|`.
    pub fn max_conditional_mean_residual(&self) -> f64 {
        use std::collections::BTreeMap;
        let mut groups: BTreeMap<u64, (f64, f64, f64)> = BTreeMap::new();
        for c in &self.joint {
            let key = c.x.to_bits();
            let e = groups.entry(key).or_insert((c.x, 0.0, 0.0));
            e.1 += c.mass;
            e.2 += c.mass * c.y;
        }
        groups
            .values()
            .map(|&(x, mass, wy)| (wy / mass - x - self.shift).abs())
            .fold(0.0, f64::max)
    }
}

/// Builds a coupling witnessing `X <=_C Y - shift` with
/// `shift = E[Y] - E[X]`, by solving the joint-mass feasibility program with
/// marginal and conditional-mean constraints.
///
/// Fails with [`OrderError::OrderDoesNotHold`] when the centered convex order
/// between the inputs does not hold (a caller error rather than a numerical
/// problem), and with an infeasibility or residual error when the linear
/// program cannot be solved to tolerance.
pub fn strassen_coupling(
    x: &DiscreteDist,
    y: &DiscreteDist,
    tol: f64,
) -> Result<Coupling, OrderError> {
    let pre = check_centered_convex(x, y, tol);
    if !pre.holds {
        return Err(OrderError::OrderDoesNotHold {
            min_gap: pre.min_gap,
            mean_gap: pre.mean_gap,
        });
    }
    let shift = y.mean() - x.mean();
    let m = x.len();
    let n = y.len();
    let cols = m * n;

    // full constraint set: m + n marginal rows, m conditional-mean rows.
    // Two rows are linear combinations of the others (the final Y marginal
    // and the final mean row); the solver gets the reduced full-rank system,
    // the verification below uses everything.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(2 * m + n);
    let mut rhs: Vec<f64> = Vec::with_capacity(2 * m + n);

    for (i, ax) in x.atoms().iter().enumerate() {
        let mut row = vec![0.0; cols];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(ax.p);
    }
    for (j, ay) in y.atoms().iter().enumerate() {
        let mut row = vec![0.0; cols];
        for i in 0..m {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(ay.p);
    }
    for (i, ax) in x.atoms().iter().enumerate() {
        let mut row = vec![0.0; cols];
        let mut scale = 0.0_f64;
        for (j, ay) in y.atoms().iter().enumerate() {
            let coeff = ay.x - ax.x - shift;
            row[i * n + j] = coeff;
            scale = scale.max(coeff.abs());
        }
        // equilibrate: payoff-scale coefficients next to unit marginal rows
        // would otherwise dominate the pivoting
        if scale > 0.0 {
            for v in row.iter_mut() {
                *v /= scale;
            }
        }
        rows.push(row);
        rhs.push(0.0);
    }

    let mut lp_rows: Vec<Vec<f64>> = Vec::with_capacity(2 * m + n - 2);
    let mut lp_rhs: Vec<f64> = Vec::with_capacity(2 * m + n - 2);
    for (k, (row, &b)) in rows.iter().zip(&rhs).enumerate() {
        let last_y_marginal = k == m + n - 1;
        let last_mean_row = m > 1 && k == 2 * m + n - 1;
        if !(last_y_marginal || last_mean_row) {
            lp_rows.push(row.clone());
            lp_rhs.push(b);
        }
    }

    let masses = simplex::find_feasible(&lp_rows, &lp_rhs, tol)?;

    // verify the solution against all raw constraints, dropped rows included
    let mut residual = 0.0_f64;
    for (row, &b) in rows.iter().zip(&rhs) {
        let lhs: f64 = row.iter().zip(&masses).map(|(a, m)| a * m).sum();
        residual = residual.max((lhs - b).abs());
    }
    if residual > tol {
        return Err(OrderError::ResidualTooLarge { residual, tol });
    }

    let mut joint = Vec::new();
    for (i, ax) in x.atoms().iter().enumerate() {
        for (j, ay) in y.atoms().iter().enumerate() {
            let mass = masses[i * n + j];
            if mass > 0.0 {
                joint.push(CouplingAtom { x: ax.x, y: ay.x, mass });
            }
        }
    }
    Ok(Coupling { joint, shift })
}
