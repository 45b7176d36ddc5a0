//! Bundled desk-scale instances and the worked-example regression checks.
//!
//! Every entry carries a ten-atom distribution and the ground cost that suits
//! its structure, so the whole catalog can be pushed through reduction and
//! stability audits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::costs::{self, GroundCostSpec, KnapsackMode};
use crate::measures::{random_distribution, DiscreteDistribution, Scenario};
use crate::problems::{
    build_cfl_single_source, build_fixed_recourse_lp, build_network_design_toy, build_newsvendor,
    build_unbounded_knapsack, build_unit_commitment_toy, AffineMatrix, AffineVector, FixedRecourseLp,
    NetworkDesignSpec, ProblemError, Recourse, TwoStageInstance, UnitCommitmentSpec,
};
use crate::regret;

pub struct CatalogEntry {
    pub instance: TwoStageInstance,
    pub distribution: DiscreteDistribution,
    pub cost: GroundCostSpec,
}

fn scalars(v: &[f64]) -> Vec<Scenario> {
    v.iter().map(|&x| Scenario::scalar(x)).collect()
}

fn points(v: &[&[f64]]) -> Vec<Scenario> {
    v.iter().map(|c| Scenario::new(c.to_vec()).expect("finite")).collect()
}

pub fn newsvendor() -> TwoStageInstance {
    let grid: Vec<f64> = (4..=12).map(|k| 2.0 * k as f64).collect();
    build_newsvendor(0.5, 1.0, 3.0, &grid).expect("valid newsvendor")
}

/// Weights (6, 9, 15), values (30, 36, 45).
pub fn knapsack() -> TwoStageInstance {
    build_unbounded_knapsack(vec![6, 9, 15], vec![30.0, 36.0, 45.0]).expect("valid knapsack")
}

const CFL_COSTS: [[f64; 3]; 2] = [[4.0, 6.0, 5.0], [6.0, 4.0, 5.0]];

fn cfl_costs() -> Vec<Vec<f64>> {
    CFL_COSTS.iter().map(|r| r.to_vec()).collect()
}

/// Two facilities of capacity 6, three customers; a single open facility
/// cannot serve every demand vector.
pub fn cfl() -> TwoStageInstance {
    build_cfl_single_source(
        cfl_costs(),
        vec![6.0, 6.0],
        vec![3.0, 3.0],
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
    )
    .expect("valid CFL")
}

/// Same costs with capacities above any total demand and both facilities open.
pub fn cfl_high_capacity() -> TwoStageInstance {
    build_cfl_single_source(cfl_costs(), vec![10.0, 10.0], vec![3.0, 3.0], vec![vec![1.0, 1.0]])
        .expect("valid CFL")
}

/// Demand grid `{1, 2, 3}³` used for the CFL bound checks.
pub fn cfl_demand_grid() -> Vec<Scenario> {
    let mut out = Vec::new();
    for a in 1..=3 {
        for b in 1..=3 {
            for c in 1..=3 {
                out.push(Scenario::new(vec![a as f64, b as f64, c as f64]).expect("finite"));
            }
        }
    }
    out
}

/// Two-dimensional fixed-recourse LP:
/// `min y₁⁺ + y₂⁺ + 2y₁⁻ + 2y₂⁻ + 1.5s  s.t.  y⁺ − y⁻ + s·(1, 1) = ξ − T(ξ)x`
/// with `T(ξ) = I + 0.1·ξ₁·e₁e₁ᵀ`.
pub fn lp_toy_recourse() -> FixedRecourseLp {
    FixedRecourseLp::new(
        vec![1.0, 1.0, 2.0, 2.0, 1.5],
        vec![vec![1.0, 0.0, -1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, -1.0, 1.0]],
        AffineVector {
            constant: vec![0.0, 0.0],
            slope: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        },
        AffineMatrix {
            constant: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            slopes: vec![vec![vec![0.1, 0.0], vec![0.0, 0.0]]],
        },
        2,
        2,
    )
    .expect("valid LP toy")
}

pub fn lp_toy() -> TwoStageInstance {
    build_fixed_recourse_lp(
        lp_toy_recourse(),
        2,
        vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 2.0]],
        vec![0.0, 1.0, 1.2, 1.5],
    )
    .expect("valid LP toy")
}

pub fn unit_commitment_spec() -> UnitCommitmentSpec {
    UnitCommitmentSpec {
        generation_costs: vec![2.0, 5.0],
        min_output: vec![0.0, 0.0],
        max_output: vec![6.0, 8.0],
        ramp_up: vec![4.0, 6.0],
        ramp_down: vec![4.0, 6.0],
        shed_penalty: 20.0,
        periods: 3,
        commitment_costs: vec![3.0, 1.0],
        commitments: vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
        ],
    }
}

pub fn unit_commitment() -> TwoStageInstance {
    build_unit_commitment_toy(&unit_commitment_spec()).expect("valid UC toy")
}

/// Single commodity from node 0 to sinks 3 and 2 over five arcs. The flow
/// matrix is a network matrix, so the LP relaxation has integral vertices.
pub fn network_design_spec() -> NetworkDesignSpec {
    NetworkDesignSpec {
        nodes: 4,
        arcs: vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)],
        arc_costs: vec![vec![1.0], vec![2.0], vec![1.0], vec![2.0], vec![1.0]],
        capacities: vec![3, 3, 2, 3, 2],
        opening_costs: vec![1.0, 1.0, 1.0, 1.0, 1.0],
        sources: vec![0],
        sinks: vec![(3, 0), (2, 0)],
        designs: vec![
            vec![1.0, 1.0, 1.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0, 1.0, 0.0],
        ],
    }
}

pub fn network_design() -> TwoStageInstance {
    build_network_design_toy(&network_design_spec()).expect("valid network design")
}

/// Integer demand grid `{0..3} × {0..2}` for sinks (3, 2).
pub fn network_demand_grid() -> Vec<Scenario> {
    let mut out = Vec::new();
    for d3 in 0..=3 {
        for d2 in 0..=2 {
            out.push(Scenario::new(vec![d3 as f64, d2 as f64]).expect("finite"));
        }
    }
    out
}

/// Every bundled instance with its ten-atom distribution and default cost.
pub fn bundled() -> Vec<CatalogEntry> {
    let weights = vec![0.05, 0.15, 0.1, 0.1, 0.05, 0.2, 0.1, 0.05, 0.1, 0.1];
    let dist = |atoms: Vec<Scenario>| DiscreteDistribution::new(atoms, weights.clone()).expect("valid distribution");
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let lp_dist = random_distribution(&mut rng, 10, 2, 0.0, 6.0, Some(1));
    let uc_dist = random_distribution(&mut rng, 10, 3, 2.0, 12.0, Some(1));
    let nd_atoms: Vec<Scenario> = network_demand_grid().into_iter().take(10).collect();
    vec![
        CatalogEntry {
            instance: newsvendor(),
            distribution: dist(scalars(&[7.0, 9.0, 11.0, 12.5, 14.0, 15.0, 17.0, 19.5, 22.0, 25.0])),
            cost: GroundCostSpec::Bm { alpha: 0.1 },
        },
        CatalogEntry {
            instance: knapsack(),
            distribution: DiscreteDistribution::uniform(scalars(&(10..20).map(f64::from).collect::<Vec<_>>()))
                .expect("valid distribution"),
            cost: GroundCostSpec::KnapsackStepwise,
        },
        CatalogEntry {
            instance: cfl(),
            // total demand at most 6, so either facility alone is feasible
            distribution: dist(points(&[
                &[1.0, 1.0, 1.0],
                &[2.0, 1.0, 1.0],
                &[1.0, 2.0, 1.0],
                &[1.0, 1.0, 2.0],
                &[2.0, 2.0, 1.0],
                &[2.0, 1.0, 2.0],
                &[1.0, 2.0, 2.0],
                &[2.0, 2.0, 2.0],
                &[3.0, 1.0, 1.0],
                &[1.0, 3.0, 2.0],
            ])),
            cost: GroundCostSpec::CflMax,
        },
        CatalogEntry {
            instance: cfl_high_capacity(),
            distribution: dist(points(&[
                &[1.0, 1.0, 1.0],
                &[3.0, 1.0, 2.0],
                &[1.0, 3.0, 3.0],
                &[2.0, 2.0, 2.0],
                &[3.0, 3.0, 3.0],
                &[1.0, 2.0, 3.0],
                &[3.0, 2.0, 1.0],
                &[2.0, 3.0, 1.0],
                &[1.0, 1.0, 3.0],
                &[2.0, 1.0, 1.0],
            ])),
            cost: GroundCostSpec::CflMin,
        },
        CatalogEntry {
            instance: lp_toy(),
            distribution: lp_dist,
            cost: GroundCostSpec::LpSensitivity { m_pi: None, radius: None },
        },
        CatalogEntry {
            instance: unit_commitment(),
            distribution: uc_dist,
            cost: GroundCostSpec::UnitCommitment { price_bounds: None },
        },
        CatalogEntry {
            instance: network_design(),
            distribution: dist(nd_atoms),
            cost: GroundCostSpec::NetworkDesign { price_bounds: None },
        },
    ]
}

/// A worked-example number recomputed by the library.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionCheck {
    pub name: &'static str,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
}

impl RegressionCheck {
    pub fn passed(&self) -> bool {
        (self.actual - self.expected).abs() <= self.tolerance
    }
}

/// Knapsack and inventory worked examples.
pub fn regression_checks() -> Result<Vec<RegressionCheck>, ProblemError> {
    let mut out = Vec::new();
    let ks = knapsack();
    for (name, cap) in [("knapsack Q(12)", 12.0), ("knapsack Q(13)", 13.0), ("knapsack Q(14)", 14.0)] {
        out.push(RegressionCheck {
            name,
            expected: 60.0,
            actual: ks.second_stage(0, &Scenario::scalar(cap))?,
            tolerance: 0.0,
        });
    }
    let pair = scalars(&[14.0, 13.0]);
    let r = regret::regret_matrix(&ks, &pair).map_err(|e| ProblemError::Invalid(e.to_string()))?;
    out.push(RegressionCheck {
        name: "knapsack R(14, 13)",
        expected: 0.0,
        actual: r.get(0, 1),
        tolerance: 0.0,
    });
    let Recourse::Knapsack(k) = ks.recourse() else {
        unreachable!("knapsack builder")
    };
    let step = costs::cost_knapsack(k, &pair[..1], &pair[1..], KnapsackMode::Stepwise)
        .map_err(|e| ProblemError::Invalid(e.to_string()))?;
    let lin = costs::cost_knapsack(k, &pair[..1], &pair[1..], KnapsackMode::Linear)
        .map_err(|e| ProblemError::Invalid(e.to_string()))?;
    out.push(RegressionCheck {
        name: "knapsack stepwise bound (14, 13)",
        expected: 0.0,
        actual: step.get(0, 0),
        tolerance: 0.0,
    });
    out.push(RegressionCheck {
        name: "knapsack linear bound (14, 13)",
        expected: 5.0,
        actual: lin.get(0, 0),
        tolerance: 0.0,
    });

    let nv = build_newsvendor(0.0, 1.0, 1.0, &[12.0, 18.0])?;
    let s = scalars(&[10.0, 20.0]);
    let bm = costs::cost_bm(&nv, &s, &s, 0.0).map_err(|e| ProblemError::Invalid(e.to_string()))?;
    out.push(RegressionCheck {
        name: "inventory BM regret term c(10, 20), h = 1",
        expected: 6.0,
        actual: bm.get(0, 1),
        tolerance: 1e-12,
    });
    Ok(out)
}
