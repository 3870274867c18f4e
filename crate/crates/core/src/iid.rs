//! Markets with i.i.d. one-period returns.
//!
//! For power utility the optimal policy invests a constant fraction of
//! wealth each period, so the terminal law is a product of i.i.d. factors.
//! This module computes that fraction, enumerates the exact law of the
//! centered product when small enough, and falls back to seeded Monte Carlo
//! with statistical call-gap verdicts at larger horizons.

use crate::dist::{CallTable, DiscreteDist, DistError};
use crate::order::{check_convex, OrderVerdict, Relation};
use crate::solver::{optimal_log_fraction, optimal_power_fraction, Branch};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of raw outcomes `|support|^N` enumerated exactly.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// Gap-to-standard-error threshold for statistical verdicts.
pub const STATISTICAL_Z: f64 = 3.0;

/// Smallest admissible Monte Carlo sample size.
pub const MIN_PATHS: usize = 1_000;

#[derive(Debug, Error)]
pub enum IidError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("increment must take at least one negative and one positive value")]
    DegenerateIncrement,
    #[error("relative risk aversion {0} must be strictly positive")]
    InvalidRiskAversion(f64),
    #[error("enumerating {outcomes} outcomes exceeds the cap of {ENUMERATION_CAP}")]
    EnumerationCap { outcomes: f64 },
    #[error("fractions violate the ordering preconditions: pi_more = {pi_more}, pi_less = {pi_less}")]
    FractionOrder { pi_more: f64, pi_less: f64 },
    #[error("{0} Monte Carlo paths are below the minimum of {MIN_PATHS}")]
    TooFewPaths(usize),
}

/// Law of the one-period arithmetic return, with its drift cached.
///
/// The return must take a negative and a positive value, so the price
/// process is neither a.s. increasing nor a.s. decreasing and the one-period
/// market is free of arbitrage.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "DiscreteDist")]
pub struct IncrementDist {
    law: DiscreteDist,
    drift: f64,
}

impl Serialize for IncrementDist {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.law.serialize(serializer)
    }
}

impl TryFrom<DiscreteDist> for IncrementDist {
    type Error = IidError;

    fn try_from(law: DiscreteDist) -> Result<Self, IidError> {
        IncrementDist::new(law)
    }
}

impl IncrementDist {
    pub fn new(law: DiscreteDist) -> Result<Self, IidError> {
        if law.len() < 2 || !(law.min_value() < 0.0 && law.max_value() > 0.0) {
            return Err(IidError::DegenerateIncrement);
        }
        let drift = law.mean();
        Ok(IncrementDist { law, drift })
    }

    pub fn law(&self) -> &DiscreteDist {
        &self.law
    }

    /// Mean of the one-period return.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// Law of one centered product factor `1 + pi * (R - E[R])`.
    fn factor_law(&self, pi: f64) -> DiscreteDist {
        DiscreteDist::new(
            self.law
                .atoms()
                .iter()
                .map(|a| (1.0 + pi * (a.x - self.drift), a.p)),
        )
        .expect("affine image of a valid law is valid")
    }
}

/// The fraction of wealth maximizing one-period expected power utility
/// `E[(1 + pi R)^(1-p)] / (1-p)` over the open admissible interval
/// (`p = 1` uses the log form). Its sign matches the sign of the drift.
pub fn optimal_fraction(inc: &IncrementDist, p: f64) -> Result<f64, IidError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(IidError::InvalidRiskAversion(p));
    }
    let branches: Vec<Branch> = inc
        .law
        .atoms()
        .iter()
        .map(|a| Branch { prob: a.p, ret: a.x, weight: 1.0 })
        .collect();
    if p == 1.0 {
        Ok(optimal_log_fraction(&branches))
    } else {
        Ok(optimal_power_fraction(&branches, p).0)
    }
}

/// Exact law of the centered product `prod_{i=1..n} (1 + pi (R_i - E[R]))`
/// by full enumeration. Factors may be negative; the mean is one.
///
/// Fails with [`IidError::EnumerationCap`] when `|support|^n` exceeds
/// [`ENUMERATION_CAP`]; callers should switch to [`mc_product_sample`].
pub fn euler_product_dist(inc: &IncrementDist, pi: f64, n: u32) -> Result<DiscreteDist, IidError> {
    let outcomes = (inc.law.len() as f64).powi(n as i32);
    if outcomes > ENUMERATION_CAP as f64 {
        return Err(IidError::EnumerationCap { outcomes });
    }
    let factor = inc.factor_law(pi);
    let mut acc: Vec<(f64, f64)> = vec![(1.0, 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(acc.len() * factor.len());
        for &(v, q) in &acc {
            for a in factor.atoms() {
                next.push((v * a.x, q * a.p));
            }
        }
        acc = next;
    }
    Ok(DiscreteDist::new(acc)?)
}

/// Verifies the convex-order comparison between two centered product laws
/// with `|pi_more| <= |pi_less|` and compatible signs; under those
/// preconditions the order must hold.
pub fn check_euler_order(
    inc: &IncrementDist,
    pi_more: f64,
    pi_less: f64,
    n: u32,
    tol: f64,
) -> Result<OrderVerdict, IidError> {
    if pi_more * pi_less < 0.0 || pi_more.abs() > pi_less.abs() {
        return Err(IidError::FractionOrder { pi_more, pi_less });
    }
    let x = euler_product_dist(inc, pi_more, n)?;
    let y = euler_product_dist(inc, pi_less, n)?;
    Ok(check_convex(&x, &y, tol))
}

/// An empirical law carrying its sample size, so call values can be
/// reported together with their standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDist {
    pub law: DiscreteDist,
    pub paths: usize,
}

impl EmpiricalDist {
    /// The empirical law of the sample shifted by its sample mean.
    pub fn centered(&self) -> EmpiricalDist {
        EmpiricalDist { law: self.law.center(), paths: self.paths }
    }

    /// Call value at `strike` and the standard error of that sample mean.
    pub fn call_value_se(&self, strike: f64) -> (f64, f64) {
        let table = CallTable::new(&self.law);
        call_se_from(&table, strike, self.paths)
    }
}

fn call_se_from(table: &CallTable, strike: f64, paths: usize) -> (f64, f64) {
    let m1 = table.call(strike);
    let m2 = table.call_sq(strike);
    let var = (m2 - m1 * m1).max(0.0);
    (m1, (var / paths as f64).sqrt())
}

/// Samples `paths` realizations of the centered product
/// `prod_{i=1..n} (1 + pi (R_i - E[R]))` with a seeded generator.
/// The same seed reproduces the same underlying return draws regardless of
/// `pi`, so two fractions can be compared on coupled samples.
pub fn mc_product_sample(
    inc: &IncrementDist,
    pi: f64,
    n: u32,
    paths: usize,
    seed: u64,
) -> Result<EmpiricalDist, IidError> {
    if paths < MIN_PATHS {
        return Err(IidError::TooFewPaths(paths));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cum = Vec::with_capacity(inc.law.len());
    let mut acc = 0.0;
    for a in inc.law.atoms() {
        acc += a.p;
        cum.push((acc, 1.0 + pi * (a.x - inc.drift)));
    }
    cum.last_mut().expect("non-empty law").0 = 1.0;

    let weight = 1.0 / paths as f64;
    let mut samples = Vec::with_capacity(paths);
    for _ in 0..paths {
        let mut product = 1.0;
        for _ in 0..n {
            let u: f64 = rng.random();
            let factor = cum
                .iter()
                .find(|(c, _)| u < *c)
                .map(|&(_, f)| f)
                .unwrap_or(cum[cum.len() - 1].1);
            product *= factor;
        }
        samples.push((product, weight));
    }
    Ok(EmpiricalDist { law: DiscreteDist::new(samples)?, paths })
}

/// Statistical analogue of the centered convex-order check: at every support
/// point of either centered sample, the call gap must stay above minus
/// [`STATISTICAL_Z`] (or `z`) combined standard errors.
pub fn check_centered_convex_statistical(
    x: &EmpiricalDist,
    y: &EmpiricalDist,
    z: f64,
) -> OrderVerdict {
    let xc = x.law.center();
    let yc = y.law.center();
    let mut strikes: Vec<f64> = xc
        .atoms()
        .iter()
        .chain(yc.atoms().iter())
        .map(|a| a.x)
        .collect();
    strikes.sort_by(f64::total_cmp);
    strikes.dedup();

    let tx = CallTable::new(&xc);
    let ty = CallTable::new(&yc);
    let mut min_gap = f64::INFINITY;
    let mut witness = f64::NAN;
    let mut holds = true;
    for &k in &strikes {
        let (cx, sex) = call_se_from(&tx, k, x.paths);
        let (cy, sey) = call_se_from(&ty, k, y.paths);
        let gap = cy - cx;
        if gap < min_gap {
            min_gap = gap;
            witness = k;
        }
        if gap < -z * (sex * sex + sey * sey).sqrt() {
            holds = false;
        }
    }
    OrderVerdict {
        relation: Relation::CenteredConvex,
        holds,
        witness_k: Some(witness),
        min_gap,
        mean_gap: yc.mean() - xc.mean(),
        tol: z,
        boundary: false,
        statistical: true,
    }
}
