//! Finitely supported probability distributions over scenario space.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the weight sum of a validated distribution.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weights summing to within this window of 1 are renormalized instead of rejected.
pub const RENORMALIZE_WINDOW: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("distribution needs at least one atom")]
    Empty,
    #[error("{atoms} atoms but {weights} weights")]
    LengthMismatch { atoms: usize, weights: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("scenario must have at least one coordinate")]
    ZeroDimension,
    #[error("non-finite coordinate {value} at position {index}")]
    NonFiniteCoordinate { index: usize, value: f64 },
    #[error("weight {value} at atom {index} is negative or not finite")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, outside [1 - 1e-9, 1 + 1e-9]")]
    WeightSumOutOfRange { sum: f64 },
    #[error("atoms {first} and {second} are identical")]
    DuplicateAtom { first: usize, second: usize },
}

/// A point in scenario space. Coordinates are finite and there is at least one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Scenario {
    coords: Vec<f64>,
}

impl Scenario {
    pub fn new(coords: Vec<f64>) -> Result<Self, MeasureError> {
        if coords.is_empty() {
            return Err(MeasureError::ZeroDimension);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(MeasureError::NonFiniteCoordinate { index, value });
        }
        Ok(Self { coords })
    }

    /// One-dimensional scenario. Panics on a non-finite value.
    pub fn scalar(value: f64) -> Self {
        Self::new(vec![value]).expect("finite scalar scenario")
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn euclidean_distance(&self, other: &Scenario) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    // Bit pattern key with -0.0 folded onto 0.0 so that hashing agrees with `==`.
    fn key(&self) -> Vec<u64> {
        self.coords
            .iter()
            .map(|&c| if c == 0.0 { 0u64 } else { c.to_bits() })
            .collect()
    }
}

impl TryFrom<Vec<f64>> for Scenario {
    type Error = MeasureError;

    fn try_from(coords: Vec<f64>) -> Result<Self, Self::Error> {
        Scenario::new(coords)
    }
}

impl From<Scenario> for Vec<f64> {
    fn from(s: Scenario) -> Self {
        s.coords
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finitely supported probability measure. Atoms keep insertion order and
/// every downstream matrix indexes them in that order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Scenario>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates atoms and weights. Weights whose sum lies within 1e-9 of one
    /// are rescaled to sum to one.
    pub fn new(atoms: Vec<Scenario>, weights: Vec<f64>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if atoms.len() != weights.len() {
            return Err(MeasureError::LengthMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        let dim = atoms[0].dim();
        if let Some(bad) = atoms.iter().find(|a| a.dim() != dim) {
            return Err(MeasureError::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(MeasureError::NegativeWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_WINDOW {
            return Err(MeasureError::WeightSumOutOfRange { sum });
        }
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            if let Some(&first) = seen.get(&atom.key()) {
                return Err(MeasureError::DuplicateAtom { first, second: i });
            }
            seen.insert(atom.key(), i);
        }
        let weights = if sum == 1.0 {
            weights
        } else {
            weights.into_iter().map(|w| w / sum).collect()
        };
        Ok(Self { atoms, weights })
    }

    pub fn dirac(atom: Scenario) -> Self {
        Self {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    /// Uniform weights over distinct atoms.
    pub fn uniform(atoms: Vec<Scenario>) -> Result<Self, MeasureError> {
        let n = atoms.len().max(1) as f64;
        let weights = vec![1.0 / n; atoms.len()];
        Self::new(atoms, weights)
    }

    /// Empirical measure: each distinct point gets weight multiplicity / n.
    /// Atoms appear in order of first occurrence.
    pub fn empirical(points: &[Scenario]) -> Result<Self, MeasureError> {
        let first = points.first().ok_or(MeasureError::Empty)?;
        let dim = first.dim();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut atoms = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for p in points {
            if p.dim() != dim {
                return Err(MeasureError::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
            match index.get(&p.key()) {
                Some(&i) => counts[i] += 1,
                None => {
                    index.insert(p.key(), atoms.len());
                    atoms.push(p.clone());
                    counts.push(1);
                }
            }
        }
        // multiplicity / n is exact per atom; renormalizing by a float sum
        // would make the weights depend on input order
        let n = points.len() as f64;
        let weights = counts.into_iter().map(|c| c as f64 / n).collect();
        Ok(Self { atoms, weights })
    }

    pub fn atoms(&self) -> &[Scenario] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].dim()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Scenario, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Weight of `atom`, or `None` if it is not in the support.
    pub fn weight_of(&self, atom: &Scenario) -> Option<f64> {
        self.position(atom).map(|i| self.weights[i])
    }

    pub fn position(&self, atom: &Scenario) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    /// Same atom-to-weight map regardless of atom order.
    pub fn same_measure(&self, other: &Self) -> bool {
        self.len() == other.len()
            && self
                .iter()
                .all(|(a, w)| other.weight_of(a) == Some(w))
    }

    pub fn expectation<F: Fn(&Scenario) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }
}

/// Union of supports, atoms of `first` followed by new atoms of `second`.
pub fn union_support(first: &DiscreteDistribution, second: &DiscreteDistribution) -> Vec<Scenario> {
    let mut support = first.atoms().to_vec();
    for atom in second.atoms() {
        if !support.contains(atom) {
            support.push(atom.clone());
        }
    }
    support
}

/// Draws `n` distinct atoms uniformly in the box `[low, high]^dim` with
/// random positive weights. Coordinates are rounded to `decimals` places when
/// given, which keeps test data readable.
pub fn random_distribution<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dim: usize,
    low: f64,
    high: f64,
    decimals: Option<i32>,
) -> DiscreteDistribution {
    assert!(n >= 1 && dim >= 1 && high > low);
    let mut atoms: Vec<Scenario> = Vec::with_capacity(n);
    let mut attempts = 0;
    while atoms.len() < n {
        attempts += 1;
        assert!(attempts < 100 * n + 1000, "box too small for {n} distinct atoms");
        let coords = (0..dim)
            .map(|_| {
                let v = rng.random_range(low..=high);
                match decimals {
                    Some(d) => {
                        let s = 10f64.powi(d);
                        (v * s).round() / s
                    }
                    None => v,
                }
            })
            .collect();
        let s = Scenario::new(coords).expect("finite draw");
        if !atoms.contains(&s) {
            atoms.push(s);
        }
    }
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / total).collect();
    DiscreteDistribution::new(atoms, weights).expect("valid random distribution")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn s(v: &[f64]) -> Scenario {
        Scenario::new(v.to_vec()).unwrap()
    }

    #[test]
    fn two_point_demand_distribution() {
        let d = DiscreteDistribution::new(vec![s(&[10.0]), s(&[20.0])], vec![0.5, 0.5]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.dim(), 1);
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn dirac_in_two_dimensions() {
        let d = DiscreteDistribution::new(vec![s(&[0.0, 0.0])], vec![1.0]).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.dim(), 2);
    }

    #[test]
    fn rejects_duplicates() {
        let err = DiscreteDistribution::new(vec![s(&[1.0]), s(&[1.0])], vec![0.5, 0.5]).unwrap_err();
        assert_eq!(err, MeasureError::DuplicateAtom { first: 0, second: 1 });
        // -0.0 and 0.0 are the same point
        let err = DiscreteDistribution::new(vec![s(&[0.0]), s(&[-0.0])], vec![0.5, 0.5]).unwrap_err();
        assert!(matches!(err, MeasureError::DuplicateAtom { .. }));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(DiscreteDistribution::new(vec![], vec![]).unwrap_err(), MeasureError::Empty);
        assert!(matches!(
            DiscreteDistribution::new(vec![s(&[1.0]), s(&[1.0, 2.0])], vec![0.5, 0.5]),
            Err(MeasureError::DimensionMismatch { expected: 1, found: 2 })
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![s(&[1.0]), s(&[2.0])], vec![1.5, -0.5]),
            Err(MeasureError::NegativeWeight { index: 1, .. })
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![s(&[1.0]), s(&[2.0])], vec![0.5, 0.6]),
            Err(MeasureError::WeightSumOutOfRange { .. })
        ));
        assert!(matches!(
            DiscreteDistribution::new(vec![s(&[1.0])], vec![0.5, 0.5]),
            Err(MeasureError::LengthMismatch { .. })
        ));
        assert!(Scenario::new(vec![f64::NAN]).is_err());
        assert!(Scenario::new(vec![]).is_err());
    }

    #[test]
    fn renormalizes_inside_window() {
        let d = DiscreteDistribution::new(vec![s(&[1.0]), s(&[2.0])], vec![0.5, 0.5 + 5e-10]).unwrap();
        let sum: f64 = d.weights().iter().sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
        assert!(d.weights()[1] > d.weights()[0]);
    }

    #[test]
    fn empirical_counts_multiplicity() {
        let d = DiscreteDistribution::empirical(&[s(&[1.0]), s(&[1.0]), s(&[2.0])]).unwrap();
        assert_eq!(d.atoms(), &[s(&[1.0]), s(&[2.0])]);
        assert_eq!(d.weights(), &[2.0 / 3.0, 1.0 / 3.0]);

        let d = DiscreteDistribution::empirical(&[s(&[5.0])]).unwrap();
        assert_eq!(d.weights(), &[1.0]);

        assert!(matches!(
            DiscreteDistribution::empirical(&[s(&[5.0]), s(&[1.0, 1.0])]),
            Err(MeasureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empirical_of_seeded_draws_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Scenario> = (0..100)
            .map(|_| Scenario::scalar(rng.random_range(0..12) as f64))
            .collect();
        let d = DiscreteDistribution::empirical(&points).unwrap();
        let sum: f64 = d.weights().iter().sum();
        assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
    }

    #[test]
    fn union_keeps_first_order() {
        let p = DiscreteDistribution::uniform(vec![s(&[1.0]), s(&[2.0])]).unwrap();
        let q = DiscreteDistribution::uniform(vec![s(&[3.0]), s(&[1.0])]).unwrap();
        assert_eq!(union_support(&p, &q), vec![s(&[1.0]), s(&[2.0]), s(&[3.0])]);
    }
}
