//! Minimal dense phase-1 simplex for small equality-constrained
//! feasibility problems: find `x >= 0` with `A x = b`.
//!
//! Entering columns follow Dantzig's most-positive-reduced-cost rule with
//! index tie-breaks; artificials never re-enter. The leaving row is chosen
//! among the minimum-ratio candidates by largest pivot magnitude (ties by
//! smallest basic-variable index), which keeps the tableau well-conditioned
//! while staying fully deterministic. A streak of degenerate pivots switches
//! both choices to Bland's smallest-index rule, which cannot cycle. The
//! feasibility decision uses the directly recomputed sum of artificial
//! variables, never the incrementally updated objective row alone.

use thiserror::Error;

/// Reduced costs below this threshold do not qualify a column for entering.
const RC_TOL: f64 = 1e-9;

/// Smallest pivot element the ratio test will accept.
const PIVOT_MIN: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("problem is infeasible (phase-1 objective {objective})")]
    Infeasible { objective: f64 },
    #[error("simplex iteration limit reached")]
    IterationLimit,
}

/// Finds a nonnegative solution of `A x = b`, or reports infeasibility when
/// the minimal phase-1 objective stays above `feas_tol`.
pub(crate) fn find_feasible(a: &[Vec<f64>], b: &[f64], feas_tol: f64) -> Result<Vec<f64>, LpError> {
    let m = a.len();
    if m == 0 {
        return Ok(Vec::new());
    }
    let n = a[0].len();

    // tableau: structural columns | artificial identity | rhs
    let width = n + m + 1;
    let mut tab: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = vec![0.0; width];
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            row[j] = flip * a[i][j];
        }
        row[n + i] = 1.0;
        row[width - 1] = flip * b[i];
        tab.push(row);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // phase-1 reduced costs: the column sums over rows with basic
    // artificials; recomputed from scratch periodically to shed drift
    let recompute_obj = |tab: &[Vec<f64>], basis: &[usize]| -> Vec<f64> {
        let mut obj = vec![0.0; width];
        for (row, &bv) in tab.iter().zip(basis) {
            if bv >= n {
                for (o, v) in obj.iter_mut().zip(row) {
                    *o += v;
                }
            }
        }
        for &bv in basis {
            obj[bv] = 0.0;
        }
        obj
    };
    let mut obj = recompute_obj(&tab, &basis);

    // after a long streak of degenerate pivots, fall back to Bland's strict
    // smallest-index leaving rule, which cannot cycle; the stability-first
    // rule below is the fast path for the non-degenerate bulk of the work
    let bland_threshold = 2 * m + 16;
    let mut degenerate_streak = 0usize;

    let max_iter = 10_000 + 100 * m;
    let mut iter = 0;
    loop {
        if iter >= max_iter {
            break;
        }
        if iter > 0 && iter % 128 == 0 {
            obj = recompute_obj(&tab, &basis);
        }
        let bland_mode = degenerate_streak > bland_threshold;

        // entering: most positive reduced cost (Dantzig) in the fast path —
        // smallest-index scanning needs an order of magnitude more pivots —
        // with Bland's smallest-index order as the anti-cycling fallback
        let mut order: Vec<usize> = (0..n).filter(|&j| obj[j] > RC_TOL).collect();
        if !bland_mode {
            order.sort_by(|&a, &b| obj[b].partial_cmp(&obj[a]).unwrap().then(a.cmp(&b)));
        }
        let mut pivot_choice: Option<(usize, usize)> = None;
        for j in order {
            // prefer well-sized pivots, but accept tiny ones before giving
            // a column up entirely
            let mut chosen: Option<usize> = None;
            for pivot_floor in [PIVOT_MIN, 1e-12] {
                let mut best_ratio = f64::INFINITY;
                for row in tab.iter() {
                    if row[j] > pivot_floor {
                        best_ratio = best_ratio.min(row[width - 1] / row[j]);
                    }
                }
                if !best_ratio.is_finite() {
                    continue;
                }
                let tie = if bland_mode { 0.0 } else { 1e-9 * (1.0 + best_ratio.abs()) };
                let mut leave: Option<usize> = None;
                for (i, row) in tab.iter().enumerate() {
                    if row[j] > pivot_floor && row[width - 1] / row[j] <= best_ratio + tie {
                        let better = match leave {
                            None => true,
                            Some(l) if bland_mode => basis[i] < basis[l],
                            Some(l) => {
                                row[j] > tab[l][j] + 1e-12
                                    || ((row[j] - tab[l][j]).abs() <= 1e-12 && basis[i] < basis[l])
                            }
                        };
                        if better {
                            leave = Some(i);
                        }
                    }
                }
                if leave.is_some() {
                    chosen = leave;
                    break;
                }
            }
            if let Some(r) = chosen {
                pivot_choice = Some((r, j));
                break;
            }
        }
        let Some((r, enter)) = pivot_choice else {
            // the incrementally updated reduced costs may have drifted;
            // conclude only from a freshly recomputed objective row
            let fresh = recompute_obj(&tab, &basis);
            if fresh.iter().take(n).any(|&v| v > RC_TOL) && fresh != obj {
                obj = fresh;
                iter += 1;
                continue;
            }
            break;
        };
        iter += 1;
        if tab[r][width - 1] / tab[r][enter] <= 1e-12 {
            degenerate_streak += 1;
        } else {
            degenerate_streak = 0;
        }

        let pivot = tab[r][enter];
        for v in tab[r].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = tab[r].clone();
        for (i, row) in tab.iter_mut().enumerate() {
            if i != r && row[enter] != 0.0 {
                let factor = row[enter];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[enter] = 0.0;
            }
            // the ratio test keeps the rhs nonnegative up to roundoff
            if row[width - 1] < 0.0 {
                row[width - 1] = 0.0;
            }
        }
        let factor = obj[enter];
        if factor != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            obj[enter] = 0.0;
        }
        basis[r] = enter;
    }

    // decide feasibility on the true artificial mass left in the basis
    let objective: f64 = basis
        .iter()
        .enumerate()
        .filter(|&(_, &bv)| bv >= n)
        .map(|(i, _)| tab[i][width - 1].max(0.0))
        .sum();
    if objective <= feas_tol {
        let mut x = vec![0.0; n];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < n {
                x[bv] = tab[i][width - 1].max(0.0);
            }
        }
        Ok(x)
    } else {
        Err(LpError::Infeasible { objective })
    }
}
