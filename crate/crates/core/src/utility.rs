//! Closed-form utility families: power, log and exponential.
//!
//! Each family carries its marginal utility, the exact inverse marginal and
//! the absolute risk aversion in closed form; these are all the solver needs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum UtilityError {
    #[error("utility parameter {name} = {value} out of range")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("wealth {0} is outside the utility domain")]
    DomainViolation(f64),
    #[error("marginal utility level {0} must be positive")]
    NonPositiveMarginalLevel(f64),
}

/// Domain on which a utility function is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    PositiveHalfline,
    WholeRealLine,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum RawUtility {
    Power { p: f64 },
    Log,
    Exp { gamma: f64 },
}

/// A utility function from one of the three supported closed-form families.
///
/// * `Power { p }` — `x^(1-p)/(1-p)` on the positive halfline, `p > 0`,
///   `p != 1` (constructing with `p = 1` yields [`UtilitySpec::Log`]).
/// * `Log` — `ln x` on the positive halfline.
/// * `Exp { gamma }` — `-exp(-gamma*x)` on the whole real line, `gamma > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", try_from = "RawUtility")]
pub enum UtilitySpec {
    Power { p: f64 },
    Log,
    Exp { gamma: f64 },
}

impl TryFrom<RawUtility> for UtilitySpec {
    type Error = UtilityError;

    fn try_from(raw: RawUtility) -> Result<Self, UtilityError> {
        match raw {
            RawUtility::Power { p } => UtilitySpec::power(p),
            RawUtility::Log => Ok(UtilitySpec::Log),
            RawUtility::Exp { gamma } => UtilitySpec::exponential(gamma),
        }
    }
}

/// Outcome of comparing two utility functions by pointwise absolute risk
/// aversion. `MoreAverse` means the first argument dominates (weakly).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AraOrder {
    MoreAverse,
    LessAverse,
    Incomparable,
}

impl UtilitySpec {
    /// Power utility with relative risk aversion `p`. `p = 1` is the log
    /// utility and is mapped to it explicitly.
    pub fn power(p: f64) -> Result<Self, UtilityError> {
        if !(p.is_finite() && p > 0.0) {
            return Err(UtilityError::InvalidParameter { name: "p", value: p });
        }
        if p == 1.0 {
            return Ok(UtilitySpec::Log);
        }
        Ok(UtilitySpec::Power { p })
    }

    /// Exponential utility with absolute risk aversion `gamma > 0`.
    pub fn exponential(gamma: f64) -> Result<Self, UtilityError> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(UtilityError::InvalidParameter { name: "gamma", value: gamma });
        }
        Ok(UtilitySpec::Exp { gamma })
    }

    pub fn domain(&self) -> Domain {
        match self {
            UtilitySpec::Power { .. } | UtilitySpec::Log => Domain::PositiveHalfline,
            UtilitySpec::Exp { .. } => Domain::WholeRealLine,
        }
    }

    fn check_domain(&self, x: f64) -> Result<(), UtilityError> {
        let ok = match self.domain() {
            Domain::PositiveHalfline => x > 0.0,
            Domain::WholeRealLine => true,
        } && x.is_finite();
        if ok { Ok(()) } else { Err(UtilityError::DomainViolation(x)) }
    }

    /// Utility of wealth `x`.
    pub fn evaluate(&self, x: f64) -> Result<f64, UtilityError> {
        self.check_domain(x)?;
        Ok(match *self {
            UtilitySpec::Power { p } => x.powf(1.0 - p) / (1.0 - p),
            UtilitySpec::Log => x.ln(),
            UtilitySpec::Exp { gamma } => -(-gamma * x).exp(),
        })
    }

    /// Marginal utility `U'(x)`.
    pub fn marginal(&self, x: f64) -> Result<f64, UtilityError> {
        self.check_domain(x)?;
        Ok(match *self {
            UtilitySpec::Power { p } => x.powf(-p),
            UtilitySpec::Log => 1.0 / x,
            UtilitySpec::Exp { gamma } => gamma * (-gamma * x).exp(),
        })
    }

    /// Exact functional inverse of the marginal utility, defined for `y > 0`.
    pub fn inverse_marginal(&self, y: f64) -> Result<f64, UtilityError> {
        if !(y.is_finite() && y > 0.0) {
            return Err(UtilityError::NonPositiveMarginalLevel(y));
        }
        Ok(match *self {
            UtilitySpec::Power { p } => y.powf(-1.0 / p),
            UtilitySpec::Log => 1.0 / y,
            UtilitySpec::Exp { gamma } => -(y / gamma).ln() / gamma,
        })
    }

    /// Absolute risk aversion `-U''(x)/U'(x)`.
    pub fn ara(&self, x: f64) -> Result<f64, UtilityError> {
        self.check_domain(x)?;
        Ok(match *self {
            UtilitySpec::Power { p } => p / x,
            UtilitySpec::Log => 1.0 / x,
            UtilitySpec::Exp { gamma } => gamma,
        })
    }

    /// Relative risk aversion exponent for halfline families (`p` for power,
    /// 1 for log); `None` for exponential.
    fn rra(&self) -> Option<f64> {
        match *self {
            UtilitySpec::Power { p } => Some(p),
            UtilitySpec::Log => Some(1.0),
            UtilitySpec::Exp { .. } => None,
        }
    }
}

/// Compares two utilities by pointwise absolute risk aversion.
///
/// Within the halfline families the ARA is `p/x` (log: `1/x`), so dominance
/// reduces to comparing exponents; within the exponential family it reduces
/// to comparing `gamma`. Across families, `p/x` against a constant `gamma`
/// dominates in neither direction on `(0, inf)`, so the pair is incomparable.
pub fn compare_risk_aversion(a: &UtilitySpec, b: &UtilitySpec) -> AraOrder {
    match (a.rra(), b.rra()) {
        (Some(pa), Some(pb)) => {
            if pa >= pb {
                AraOrder::MoreAverse
            } else {
                AraOrder::LessAverse
            }
        }
        (None, None) => {
            let (UtilitySpec::Exp { gamma: ga }, UtilitySpec::Exp { gamma: gb }) = (a, b) else {
                unreachable!("rra() is None only for exponential utilities")
            };
            if ga >= gb {
                AraOrder::MoreAverse
            } else {
                AraOrder::LessAverse
            }
        }
        _ => AraOrder::Incomparable,
    }
}

/// True when `a` is (weakly) more risk averse than `b` pointwise.
pub fn more_risk_averse(a: &UtilitySpec, b: &UtilitySpec) -> bool {
    compare_risk_aversion(a, b) == AraOrder::MoreAverse
}
