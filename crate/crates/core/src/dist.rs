//! Finite discrete distributions of payoffs.
//!
//! [`DiscreteDist`] is the common currency of every stochastic-order check in
//! this crate: terminal wealth laws, one-period return laws and product laws
//! all end up here. Atoms are kept sorted by strictly increasing value with
//! positive probabilities summing to one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute distance under which two atom values are merged into one.
pub const MERGE_TOL: f64 = 1e-12;

/// Maximum allowed deviation of input probabilities from summing to one.
/// Inputs further off are rejected; anything closer is renormalized.
pub const PROB_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("distribution has no atoms")]
    Empty,
    #[error("atom value {0} is not finite")]
    NonFiniteValue(f64),
    #[error("atom probability {0} is not a positive finite number")]
    InvalidProb(f64),
    #[error("probabilities sum to {0}, further than {PROB_SUM_TOL:e} from 1")]
    ProbSum(f64),
    #[error("rescaling factor {0} is below 1")]
    ScaleBelowOne(f64),
}

/// One support point: payoff value `x` with probability mass `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub p: f64,
}

#[derive(Deserialize)]
struct RawDist {
    atoms: Vec<Atom>,
}

/// A finite discrete distribution of a real-valued payoff.
///
/// Invariants established at construction and preserved by every operation:
/// values are finite and strictly increasing (values closer than
/// [`MERGE_TOL`] are merged), probabilities are positive and sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist")]
pub struct DiscreteDist {
    atoms: Vec<Atom>,
}

impl TryFrom<RawDist> for DiscreteDist {
    type Error = DistError;

    fn try_from(raw: RawDist) -> Result<Self, DistError> {
        DiscreteDist::new(raw.atoms.into_iter().map(|a| (a.x, a.p)))
    }
}

impl DiscreteDist {
    /// Builds a distribution from `(value, probability)` pairs.
    ///
    /// Pairs may come in any order and contain duplicate values; atoms are
    /// sorted, near-equal values merged and probabilities renormalized.
    /// Probabilities must be positive and sum to one within [`PROB_SUM_TOL`].
    pub fn new(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, DistError> {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut total = 0.0;
        for (x, p) in pairs {
            if !x.is_finite() {
                return Err(DistError::NonFiniteValue(x));
            }
            if !(p.is_finite() && p > 0.0) {
                return Err(DistError::InvalidProb(p));
            }
            total += p;
            atoms.push(Atom { x, p });
        }
        if atoms.is_empty() {
            return Err(DistError::Empty);
        }
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(DistError::ProbSum(total));
        }
        atoms.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite values"));

        // Merge runs of values closer than MERGE_TOL; the representative is
        // the probability-weighted mean so first moments are unaffected.
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        let mut i = 0;
        while i < atoms.len() {
            let mut j = i + 1;
            while j < atoms.len() && atoms[j].x - atoms[j - 1].x <= MERGE_TOL {
                j += 1;
            }
            if j == i + 1 {
                merged.push(atoms[i]);
            } else {
                let mass: f64 = atoms[i..j].iter().map(|a| a.p).sum();
                let center: f64 = atoms[i..j].iter().map(|a| a.p * a.x).sum::<f64>() / mass;
                merged.push(Atom { x: center, p: mass });
            }
            i = j;
        }
        for a in &mut merged {
            a.p /= total;
        }
        Ok(DiscreteDist { atoms: merged })
    }

    /// The distribution concentrated at a single value.
    pub fn point_mass(x: f64) -> Self {
        DiscreteDist::new([(x, 1.0)]).expect("point mass is always valid")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        // Construction rejects empty support.
        false
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].x
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].x
    }

    /// Expectation of the payoff.
    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.p * a.x).sum()
    }

    /// Call function `E[(X - strike)^+]`; convex and nonincreasing in the strike.
    pub fn call_value(&self, strike: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.p * (a.x - strike).max(0.0))
            .sum()
    }

    /// The centered law of `X - E[X]`.
    pub fn center(&self) -> Self {
        let m = self.mean();
        DiscreteDist::new(self.atoms.iter().map(|a| (a.x - m, a.p)))
            .expect("centering preserves validity")
    }

    /// The law of `a*X - (a-1)*E[X]` for `a >= 1`: spreads the distribution
    /// about its mean by the factor `a` while preserving the mean.
    pub fn scale_center(&self, a: f64) -> Result<Self, DistError> {
        if !(a.is_finite() && a >= 1.0) {
            return Err(DistError::ScaleBelowOne(a));
        }
        if a == 1.0 {
            return Ok(self.clone());
        }
        let m = self.mean();
        DiscreteDist::new(self.atoms.iter().map(|at| (a * at.x - (a - 1.0) * m, at.p)))
    }

    /// The law of `X * Z` for `Z` distributed as `other`, independent of `X`.
    pub fn product_independent(&self, other: &Self) -> Self {
        let pairs = self.atoms.iter().flat_map(|a| {
            other.atoms.iter().map(move |b| (a.x * b.x, a.p * b.p))
        });
        DiscreteDist::new(pairs).expect("product of valid distributions is valid")
    }
}

/// Suffix-sum tables for evaluating many call values (and their second
/// moments) against one distribution in `O(log n)` per strike.
pub(crate) struct CallTable {
    xs: Vec<f64>,
    suf_p: Vec<f64>,
    suf_px: Vec<f64>,
    suf_pxx: Vec<f64>,
}

impl CallTable {
    pub(crate) fn new(d: &DiscreteDist) -> Self {
        let n = d.atoms.len();
        let xs: Vec<f64> = d.atoms.iter().map(|a| a.x).collect();
        let mut suf_p = vec![0.0; n + 1];
        let mut suf_px = vec![0.0; n + 1];
        let mut suf_pxx = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let Atom { x, p } = d.atoms[i];
            suf_p[i] = suf_p[i + 1] + p;
            suf_px[i] = suf_px[i + 1] + p * x;
            suf_pxx[i] = suf_pxx[i + 1] + p * x * x;
        }
        CallTable { xs, suf_p, suf_px, suf_pxx }
    }

    fn cut(&self, strike: f64) -> usize {
        self.xs.partition_point(|&x| x <= strike)
    }

    /// `E[(X - strike)^+]`.
    pub(crate) fn call(&self, strike: f64) -> f64 {
        let i = self.cut(strike);
        self.suf_px[i] - strike * self.suf_p[i]
    }

    /// `E[((X - strike)^+)^2]`.
    pub(crate) fn call_sq(&self, strike: f64) -> f64 {
        let i = self.cut(strike);
        self.suf_pxx[i] - 2.0 * strike * self.suf_px[i] + strike * strike * self.suf_p[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dist(pairs: &[(f64, f64)]) -> DiscreteDist {
        DiscreteDist::new(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn mean_point_mass() {
        assert_eq!(dist(&[(2.0, 1.0)]).mean(), 2.0);
    }

    #[test]
    fn mean_symmetric_pair() {
        assert_eq!(dist(&[(1.0, 0.5), (3.0, 0.5)]).mean(), 2.0);
    }

    #[test]
    fn mean_base_model_terminal_law() {
        let d = dist(&[(0.5565, 0.4), (1.887, 0.6)]);
        assert_abs_diff_eq!(d.mean(), 1.3548, epsilon = 1e-12);
    }

    #[test]
    fn call_values_around_support() {
        let d = dist(&[(1.0, 0.5), (3.0, 0.5)]);
        assert_eq!(d.call_value(2.0), 0.5);
        assert_eq!(d.call_value(5.0), 0.0);
        // strike below the support: call equals mean minus strike
        assert_eq!(d.call_value(0.0), 2.0);
    }

    #[test]
    fn center_examples() {
        let c = dist(&[(2.0, 1.0)]).center();
        assert_eq!(c.atoms(), &[Atom { x: 0.0, p: 1.0 }]);

        let c = dist(&[(1.0, 0.5), (3.0, 0.5)]).center();
        assert_eq!(c.atoms()[0].x, -1.0);
        assert_eq!(c.atoms()[1].x, 1.0);

        let c = dist(&[(0.0, 0.9), (10.0, 0.1)]).center();
        assert_abs_diff_eq!(c.atoms()[0].x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.atoms()[1].x, 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.mean(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn scale_center_examples() {
        let d = dist(&[(0.0, 0.5), (2.0, 0.5)]);
        let s = d.scale_center(2.0).unwrap();
        assert_eq!(s.atoms()[0].x, -1.0);
        assert_eq!(s.atoms()[1].x, 3.0);
        assert_abs_diff_eq!(s.mean(), d.mean(), epsilon = 1e-12);

        // a = 1 is the identity
        assert_eq!(d.scale_center(1.0).unwrap(), d);

        // point masses are fixed points
        let pm = DiscreteDist::point_mass(1.0);
        let s = pm.scale_center(5.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_abs_diff_eq!(s.atoms()[0].x, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn scale_center_rejects_a_below_one() {
        let d = dist(&[(0.0, 0.5), (2.0, 0.5)]);
        assert!(matches!(d.scale_center(0.5), Err(DistError::ScaleBelowOne(_))));
    }

    #[test]
    fn product_independent_examples() {
        let p = DiscreteDist::point_mass(2.0).product_independent(&DiscreteDist::point_mass(3.0));
        assert_eq!(p.atoms(), &[Atom { x: 6.0, p: 1.0 }]);

        let a = dist(&[(0.0, 0.5), (1.0, 0.5)]);
        let b = dist(&[(-1.0, 0.5), (1.0, 0.5)]);
        let p = a.product_independent(&b);
        assert_eq!(p.len(), 3);
        assert_eq!(p.atoms()[0], Atom { x: -1.0, p: 0.25 });
        assert_eq!(p.atoms()[1], Atom { x: 0.0, p: 0.5 });
        assert_eq!(p.atoms()[2], Atom { x: 1.0, p: 0.25 });

        let c = dist(&[(1.0, 0.6), (2.0, 0.4)]);
        let unit = DiscreteDist::point_mass(1.0);
        assert_eq!(c.product_independent(&unit), c);
    }

    #[test]
    fn construction_merges_close_values() {
        let d = dist(&[(1.0, 0.25), (1.0, 0.25), (2.0, 0.5)]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.atoms()[0], Atom { x: 1.0, p: 0.5 });
    }

    #[test]
    fn construction_rejects_bad_inputs() {
        assert!(matches!(
            DiscreteDist::new([(1.0, 0.5), (2.0, 0.6)]),
            Err(DistError::ProbSum(_))
        ));
        assert!(matches!(
            DiscreteDist::new([(1.0, 0.5), (2.0, -0.5)]),
            Err(DistError::InvalidProb(_))
        ));
        assert!(matches!(
            DiscreteDist::new([(f64::INFINITY, 1.0)]),
            Err(DistError::NonFiniteValue(_))
        ));
        assert!(matches!(
            DiscreteDist::new(std::iter::empty()),
            Err(DistError::Empty)
        ));
    }

    #[test]
    fn construction_renormalizes_small_drift() {
        let d = DiscreteDist::new([(0.0, 0.5 + 4e-10), (1.0, 0.5)]).unwrap();
        let total: f64 = d.atoms().iter().map(|a| a.p).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let d = dist(&[(0.5565, 0.4), (1.887, 0.6)]);
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.starts_with("{\"atoms\":[{"));
        let back: DiscreteDist = serde_json::from_str(&s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn json_rejects_invalid() {
        let err = serde_json::from_str::<DiscreteDist>(r#"{"atoms":[{"x":1.0,"p":0.2}]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn call_table_matches_direct_evaluation() {
        let d = dist(&[(-1.5, 0.2), (0.0, 0.3), (2.0, 0.4), (7.5, 0.1)]);
        let table = CallTable::new(&d);
        for k in [-3.0, -1.5, -0.2, 0.0, 1.0, 2.0, 5.0, 7.5, 9.0] {
            assert_abs_diff_eq!(table.call(k), d.call_value(k), epsilon = 1e-14);
            let direct_sq: f64 = d
                .atoms()
                .iter()
                .map(|a| a.p * (a.x - k).max(0.0).powi(2))
                .sum();
            assert_abs_diff_eq!(table.call_sq(k), direct_sq, epsilon = 1e-13);
        }
    }
}
