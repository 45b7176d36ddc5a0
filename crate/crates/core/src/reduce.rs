//! Scenario reduction under a general (possibly asymmetric) ground cost.
//!
//! For a kept subset `S` the optimal reduced measure sends every atom to its
//! `c`-nearest kept atom, so `𝒯_c(P, Q_S) = Σ_i p_i min_{j ∈ S} c(ξ_i, ξ_j)`.
//! The three searches differ only in how `S` is chosen. P is always the
//! transport source.

use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{CostError, GroundCostSpec, Taint};
use crate::measures::{DiscreteDistribution, MeasureError};
use crate::otsolve::{self, CostMatrix, OtError};
use crate::problems::{ProblemError, TwoStageInstance};
use crate::regret::{self, DominationCertificate, RegretError};
use crate::stability::{self, StabilityError, StabilityReport};

/// Largest number of subsets the exhaustive search will enumerate.
pub const MAX_SUBSETS: u128 = 1_000_000;
/// Agreement required between the redistribution formula and the OT solver.
pub const REDISTRIBUTION_TOL: f64 = 1e-9;
/// Directed transport costs differing by more than this factor are flagged.
pub const DIRECTION_RATIO_FLAG: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReduceError {
    #[error("cannot keep {m} of {n} atoms")]
    InvalidSize { m: usize, n: usize },
    #[error("cost matrix must be {n}x{n}, got {rows}x{cols}")]
    NotSquare { n: usize, rows: usize, cols: usize },
    #[error("{count} subsets exceed the exhaustive limit")]
    TooManySubsets { count: u128 },
    #[error("seed keeps {found} atoms, expected {expected}")]
    BadSeed { expected: usize, found: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Regret(#[from] RegretError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMethod {
    Exhaustive,
    Greedy,
    /// Best-improvement swaps seeded with the greedy result.
    Swap,
}

impl fmt::Display for ReductionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReductionMethod::Exhaustive => "exhaustive",
            ReductionMethod::Greedy => "greedy",
            ReductionMethod::Swap => "swap",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionResult {
    /// Kept atom indices into `supp(P)`, ascending.
    pub kept_indices: Vec<usize>,
    /// Kept atoms with the mass they receive.
    pub reduced: DiscreteDistribution,
    /// `𝒯_c(P, reduced)`.
    pub transport_cost: f64,
    pub method: ReductionMethod,
    /// `assignment[i]` is the kept atom (index into `supp(P)`) receiving atom `i`.
    pub assignment: Vec<usize>,
}

fn check_inputs(p: &DiscreteDistribution, cost: &CostMatrix, m: usize) -> Result<(), ReduceError> {
    let n = p.len();
    if cost.rows() != n || cost.cols() != n {
        return Err(ReduceError::NotSquare {
            n,
            rows: cost.rows(),
            cols: cost.cols(),
        });
    }
    if m == 0 || m > n {
        return Err(ReduceError::InvalidSize { m, n });
    }
    Ok(())
}

/// Nearest kept atom for each atom; ties go to the lowest index.
fn assign(cost: &CostMatrix, kept: &[usize]) -> Vec<usize> {
    (0..cost.rows())
        .map(|i| {
            let mut best = kept[0];
            for &j in &kept[1..] {
                if cost.get(i, j) < cost.get(i, best) {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// `Σ_i p_i min_{j ∈ S} c(ξ_i, ξ_j)`.
pub fn redistribution_cost(p: &DiscreteDistribution, cost: &CostMatrix, kept: &[usize]) -> f64 {
    p.weights()
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let c = kept.iter().map(|&j| cost.get(i, j)).fold(f64::INFINITY, f64::min);
            if w == 0.0 {
                0.0
            } else {
                w * c
            }
        })
        .sum()
}

fn finish(
    p: &DiscreteDistribution,
    cost: &CostMatrix,
    mut kept: Vec<usize>,
    method: ReductionMethod,
) -> Result<ReductionResult, ReduceError> {
    kept.sort_unstable();
    let assignment = assign(cost, &kept);
    let mut mass = vec![0.0; kept.len()];
    for (i, &j) in assignment.iter().enumerate() {
        let k = kept.binary_search(&j).expect("assigned to a kept atom");
        mass[k] += p.weights()[i];
    }
    let atoms = kept.iter().map(|&j| p.atoms()[j].clone()).collect();
    Ok(ReductionResult {
        transport_cost: redistribution_cost(p, cost, &kept),
        reduced: DiscreteDistribution::new(atoms, mass)?,
        kept_indices: kept,
        method,
        assignment,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Globally optimal subset; the lexicographically first one on ties.
pub fn reduce_exhaustive(p: &DiscreteDistribution, cost: &CostMatrix, m: usize) -> Result<ReductionResult, ReduceError> {
    check_inputs(p, cost, m)?;
    let count = binomial(p.len(), m);
    if count > MAX_SUBSETS {
        return Err(ReduceError::TooManySubsets { count });
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in (0..p.len()).combinations(m) {
        let c = redistribution_cost(p, cost, &subset);
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, subset));
        }
    }
    let (_, kept) = best.expect("at least one subset");
    finish(p, cost, kept, ReductionMethod::Exhaustive)
}

/// Backward greedy: repeatedly drop the atom whose removal increases the
/// cost least, lowest index first on ties.
pub fn reduce_greedy(p: &DiscreteDistribution, cost: &CostMatrix, m: usize) -> Result<ReductionResult, ReduceError> {
    check_inputs(p, cost, m)?;
    let mut kept: Vec<usize> = (0..p.len()).collect();
    while kept.len() > m {
        let mut best: Option<(f64, usize)> = None;
        for pos in 0..kept.len() {
            let trial: Vec<usize> = kept.iter().enumerate().filter(|&(k, _)| k != pos).map(|(_, &j)| j).collect();
            let c = redistribution_cost(p, cost, &trial);
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, pos));
            }
        }
        kept.remove(best.expect("nonempty").1);
    }
    finish(p, cost, kept, ReductionMethod::Greedy)
}

/// Best-improvement single swaps starting from `seed`, until no swap lowers
/// the cost or `max_iters` swaps have been made.
pub fn reduce_local_search(
    p: &DiscreteDistribution,
    cost: &CostMatrix,
    m: usize,
    seed: &ReductionResult,
    max_iters: usize,
) -> Result<ReductionResult, ReduceError> {
    check_inputs(p, cost, m)?;
    if seed.kept_indices.len() != m {
        return Err(ReduceError::BadSeed {
            expected: m,
            found: seed.kept_indices.len(),
        });
    }
    let mut kept = seed.kept_indices.clone();
    let mut current = redistribution_cost(p, cost, &kept);
    for _ in 0..max_iters {
        let mut best: Option<(f64, usize, usize)> = None;
        for pos in 0..kept.len() {
            for cand in (0..p.len()).filter(|j| !kept.contains(j)) {
                let mut trial = kept.clone();
                trial[pos] = cand;
                let c = redistribution_cost(p, cost, &trial);
                if c < current - 1e-12 * (1.0 + current.abs()) && best.is_none_or(|(b, _, _)| c < b) {
                    best = Some((c, pos, cand));
                }
            }
        }
        let Some((c, pos, cand)) = best else { break };
        kept[pos] = cand;
        kept.sort_unstable();
        current = c;
    }
    finish(p, cost, kept, ReductionMethod::Swap)
}

pub fn reduce(
    p: &DiscreteDistribution,
    cost: &CostMatrix,
    m: usize,
    method: ReductionMethod,
) -> Result<ReductionResult, ReduceError> {
    match method {
        ReductionMethod::Exhaustive => reduce_exhaustive(p, cost, m),
        ReductionMethod::Greedy => reduce_greedy(p, cost, m),
        ReductionMethod::Swap => {
            let seed = reduce_greedy(p, cost, m)?;
            reduce_local_search(p, cost, m, &seed, 10 * p.len() * m + 10)
        }
    }
}

/// Reduction followed by a certificate and both stability inequalities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionAudit {
    pub result: ReductionResult,
    pub cost_kind: &'static str,
    pub taint: Taint,
    /// `𝒯_c(P, Q)` recomputed by the OT solver.
    pub ot_forward: f64,
    pub redistribution_verified: bool,
    /// `𝒯_c(Q, P)`.
    pub ot_backward: f64,
    /// `max/min` of the two directed costs (`+∞` if only one is zero).
    pub direction_ratio: f64,
    pub direction_flag: bool,
    pub certificate: DominationCertificate,
    /// `β̂·max{𝒯_c(P, Q), 𝒯_c(Q, P)}`.
    pub a_priori_bound: f64,
    pub realized_gap: f64,
    pub report: Option<StabilityReport>,
}

impl ReductionAudit {
    pub fn passed(&self) -> bool {
        self.redistribution_verified
            && self.certificate.is_valid()
            && self.report.as_ref().is_some_and(StabilityReport::passed)
    }
}

pub fn reduction_stability_audit(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    m: usize,
    method: ReductionMethod,
    spec: &GroundCostSpec,
    tolerance: f64,
) -> Result<ReductionAudit, ReduceError> {
    let support = p.atoms().to_vec();
    let built = spec.build(instance, &support)?;
    let cost = &built.matrix;
    let result = reduce(p, cost, m, method)?;
    let all: Vec<usize> = (0..p.len()).collect();
    let ot_forward = otsolve::transport_cost(p, &result.reduced, &cost.submatrix(&all, &result.kept_indices))?.cost;
    let ot_backward = otsolve::transport_cost(&result.reduced, p, &cost.submatrix(&result.kept_indices, &all))?.cost;
    let redistribution_verified = if ot_forward.is_infinite() || result.transport_cost.is_infinite() {
        ot_forward == result.transport_cost
    } else {
        (ot_forward - result.transport_cost).abs() <= REDISTRIBUTION_TOL * (1.0 + ot_forward.abs())
    };
    let (lo, hi) = (ot_forward.min(ot_backward), ot_forward.max(ot_backward));
    let direction_ratio = if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    };

    let regret = regret::regret_matrix(instance, &support)?;
    let certificate = regret::certify_domination(&regret, cost)?;
    let report = if certificate.is_valid() {
        Some(stability::check_stability_on_support(
            instance,
            p,
            &result.reduced,
            &support,
            cost,
            Some(&certificate),
            built.taint,
            tolerance,
        )?)
    } else {
        None
    };
    let a_priori_bound = if hi.is_infinite() {
        f64::INFINITY
    } else {
        certificate.beta_hat * hi
    };
    let realized_gap = (instance.expected_value(p)?.value - instance.expected_value(&result.reduced)?.value).abs();
    Ok(ReductionAudit {
        result,
        cost_kind: spec.label(),
        taint: built.taint,
        ot_forward,
        redistribution_verified,
        ot_backward,
        direction_ratio,
        direction_flag: direction_ratio > DIRECTION_RATIO_FLAG,
        certificate,
        a_priori_bound,
        realized_gap,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::cost_norm;
    use crate::measures::Scenario;
    use proptest::prelude::*;

    fn uniform(v: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::uniform(v.iter().map(|&x| Scenario::scalar(x)).collect()).unwrap()
    }

    #[test]
    fn keep_everything_costs_nothing() {
        let p = uniform(&[1.0, 4.0, 9.0]);
        let c = cost_norm(p.atoms(), p.atoms()).unwrap();
        for r in [reduce_exhaustive(&p, &c, 3), reduce_greedy(&p, &c, 3)] {
            let r = r.unwrap();
            assert_eq!(r.transport_cost, 0.0);
            assert_eq!(r.kept_indices, vec![0, 1, 2]);
        }
    }

    #[test]
    fn single_atom_from_two() {
        let p = uniform(&[10.0, 20.0]);
        let c = cost_norm(p.atoms(), p.atoms()).unwrap();
        let r = reduce_exhaustive(&p, &c, 1).unwrap();
        assert_eq!(r.transport_cost, 5.0);
        assert_eq!(r.kept_indices, vec![0]);
        assert_eq!(r.reduced.weights(), &[1.0]);
        assert_eq!(r.assignment, vec![0, 0]);
    }

    #[test]
    fn bad_sizes() {
        let p = uniform(&[1.0, 2.0]);
        let c = cost_norm(p.atoms(), p.atoms()).unwrap();
        assert!(matches!(reduce_greedy(&p, &c, 0), Err(ReduceError::InvalidSize { .. })));
        assert!(matches!(reduce_greedy(&p, &c, 3), Err(ReduceError::InvalidSize { .. })));
        let rect = CostMatrix::from_fn(2, 3, |_, _| 1.0).unwrap();
        assert!(matches!(reduce_exhaustive(&p, &rect, 1), Err(ReduceError::NotSquare { .. })));
    }

    #[test]
    fn exhaustive_limit() {
        let pts: Vec<f64> = (0..30).map(f64::from).collect();
        let p = uniform(&pts);
        let c = cost_norm(p.atoms(), p.atoms()).unwrap();
        assert!(matches!(reduce_exhaustive(&p, &c, 15), Err(ReduceError::TooManySubsets { .. })));
    }

    #[test]
    fn swap_escapes_a_bad_seed() {
        // two tight clusters; a seed with both kept atoms in one cluster
        let p = uniform(&[0.0, 0.1, 0.2, 10.0, 10.1, 10.2]);
        let c = cost_norm(p.atoms(), p.atoms()).unwrap();
        let seed = finish(&p, &c, vec![0, 1], ReductionMethod::Greedy).unwrap();
        let out = reduce_local_search(&p, &c, 2, &seed, 100).unwrap();
        assert_eq!(out.kept_indices, vec![1, 4]);
        assert!(out.transport_cost < seed.transport_cost);
        let again = reduce_local_search(&p, &c, 2, &out, 100).unwrap();
        assert_eq!(again.kept_indices, out.kept_indices);
        let opt = reduce_exhaustive(&p, &c, 2).unwrap();
        assert_eq!(reduce_local_search(&p, &c, 2, &opt, 100).unwrap().kept_indices, opt.kept_indices);
    }

    fn arb_problem() -> impl Strategy<Value = (DiscreteDistribution, CostMatrix)> {
        (2usize..8).prop_flat_map(|n| {
            (
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0.0f64..10.0, n * n),
            )
                .prop_map(move |(w, c)| {
                    let s: f64 = w.iter().sum();
                    let atoms = (0..n).map(|i| Scenario::scalar(i as f64)).collect();
                    let p = DiscreteDistribution::new(atoms, w.iter().map(|x| x / s).collect()).unwrap();
                    let cost = CostMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { c[i * n + j] }).unwrap();
                    (p, cost)
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn ordering_and_redistribution((p, cost) in arb_problem(), m_frac in 0.0f64..1.0) {
            let n = p.len();
            let m = 1 + ((n - 1) as f64 * m_frac) as usize;
            let ex = reduce_exhaustive(&p, &cost, m).unwrap();
            let gr = reduce_greedy(&p, &cost, m).unwrap();
            let sw = reduce_local_search(&p, &cost, m, &gr, 1000).unwrap();
            prop_assert!(ex.transport_cost <= gr.transport_cost + 1e-12);
            prop_assert!(sw.transport_cost <= gr.transport_cost + 1e-12);
            prop_assert!(ex.transport_cost <= sw.transport_cost + 1e-12);
            for r in [&ex, &gr, &sw] {
                prop_assert_eq!(r.kept_indices.len(), m);
                prop_assert!((r.reduced.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let all: Vec<usize> = (0..n).collect();
                let ot = otsolve::transport_cost(&p, &r.reduced, &cost.submatrix(&all, &r.kept_indices)).unwrap();
                prop_assert!((ot.cost - r.transport_cost).abs() <= 1e-9);
            }
        }

        #[test]
        fn cost_nonincreasing_in_m((p, cost) in arb_problem()) {
            let (mut last_ex, mut last_gr) = (f64::INFINITY, f64::INFINITY);
            for m in 1..=p.len() {
                let ex = reduce_exhaustive(&p, &cost, m).unwrap().transport_cost;
                let gr = reduce_greedy(&p, &cost, m).unwrap().transport_cost;
                prop_assert!(ex <= last_ex + 1e-12);
                prop_assert!(gr <= last_gr + 1e-12);
                last_ex = ex;
                last_gr = gr;
            }
        }
    }
}
