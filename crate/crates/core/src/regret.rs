//! Regret matrices, regret-domination certificates and integrality-gap
//! estimates.
//!
//! All quantities are in minimization form; maximization instances are
//! negated by [`TwoStageInstance::recourse_cost`] before they reach here.

use serde::Serialize;
use thiserror::Error;

use crate::costs::{self, CflMode, CostError};
use crate::lp::{self, LpError};
use crate::measures::Scenario;
use crate::otsolve::CostMatrix;
use crate::problems::{ProblemError, Recourse, RecourseTable, TwoStageInstance};

/// Tolerance on certificate inequalities.
pub const CERTIFICATE_TOL: f64 = 1e-9;
/// Tolerance on the LP-sensitivity domination check.
pub const LP_DOMINATION_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegretError {
    #[error("regret matrix is {regret}x{regret}, cost matrix is {rows}x{cols}")]
    ShapeMismatch { regret: usize, rows: usize, cols: usize },
    #[error("instance {0} has no fixed-recourse LP second stage")]
    NotLp(String),
    #[error("instance {0} has no facility-location second stage")]
    NotCfl(String),
    #[error("dual feasible region is unbounded, so no finite M_pi exists")]
    UnboundedDual,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// `R[i][j] = max_{x ∈ X} [Q(x, ξ_i) − Q(x, ξ_j)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretMatrix {
    pub support: Vec<Scenario>,
    entries: Vec<f64>,
}

impl RegretMatrix {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.len() + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn from_table(support: &[Scenario], table: &RecourseTable) -> Self {
        let n = support.len();
        let mut entries = vec![f64::NEG_INFINITY; n * n];
        for row in &table.values {
            for i in 0..n {
                for j in 0..n {
                    let d = row[i] - row[j];
                    let e = &mut entries[i * n + j];
                    if d > *e {
                        *e = d;
                    }
                }
            }
        }
        Self {
            support: support.to_vec(),
            entries,
        }
    }
}

pub fn regret_matrix(instance: &TwoStageInstance, support: &[Scenario]) -> Result<RegretMatrix, RegretError> {
    let table = RecourseTable::compute(instance, support)?;
    Ok(RegretMatrix::from_table(support, &table))
}

/// A pair with positive regret and zero cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub regret: f64,
}

/// Smallest `β` with `R ≤ β·c` on every pair of a support, or the pairs that
/// rule out any finite `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationCertificate {
    pub support: Vec<Scenario>,
    pub beta_hat: f64,
    pub argmax_pair: Option<(usize, usize)>,
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl DominationCertificate {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `β̂ = max_{i,j} max(R_ij, 0) / c_ij`. Regret at most [`CERTIFICATE_TOL`]
/// counts as zero, a positive regret against `c = +∞` contributes nothing,
/// and a positive regret against `c = 0` is a violation.
pub fn certify_domination(regret: &RegretMatrix, cost: &CostMatrix) -> Result<DominationCertificate, RegretError> {
    let n = regret.len();
    if cost.rows() != n || cost.cols() != n {
        return Err(RegretError::ShapeMismatch {
            regret: n,
            rows: cost.rows(),
            cols: cost.cols(),
        });
    }
    let mut beta_hat = 0.0f64;
    let mut argmax_pair = None;
    let mut violations = Vec::new();
    let mut infinite_pairs = 0usize;
    for i in 0..n {
        for j in 0..n {
            let r = regret.get(i, j);
            if r <= CERTIFICATE_TOL {
                continue;
            }
            let c = cost.get(i, j);
            if c == 0.0 {
                violations.push(Violation { i, j, regret: r });
            } else if c.is_infinite() {
                infinite_pairs += 1;
            } else if r / c > beta_hat {
                beta_hat = r / c;
                argmax_pair = Some((i, j));
            }
        }
    }
    let mut notes = vec!["ratio max(R, 0) / c; R <= 1e-9 treated as zero".to_string()];
    if infinite_pairs > 0 {
        notes.push(format!("{infinite_pairs} pairs with positive regret have infinite cost"));
    }
    if !violations.is_empty() {
        notes.push(format!("{} pairs have positive regret and zero cost", violations.len()));
    }
    Ok(DominationCertificate {
        support: regret.support.clone(),
        beta_hat,
        argmax_pair,
        violations,
        notes,
    })
}

/// Outcome of `R ≤ c_LP` over all pairs of a support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpDominationReport {
    pub m_pi: f64,
    pub radius: f64,
    pub pairs: usize,
    /// `(i, j, R, c_LP)` for every pair with `R > c_LP + tol`.
    pub failures: Vec<(usize, usize, f64, f64)>,
    pub min_slack: f64,
    pub mean_slack: f64,
    pub max_slack: f64,
}

impl LpDominationReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `R(ξ, ξ') ≤ c_LP(ξ, ξ')` with `β = 1`, using the exact dual bound
/// `M_π` of the recourse LP and `R = max_x ‖x‖_∞`.
pub fn verify_lp_sensitivity_domination(
    instance: &TwoStageInstance,
    support: &[Scenario],
) -> Result<LpDominationReport, RegretError> {
    let Recourse::Lp(lp) = instance.recourse() else {
        return Err(RegretError::NotLp(instance.name().to_string()));
    };
    let m_pi = lp::dual_inf_norm_bound(&lp.recourse, &lp.cost)?;
    if !m_pi.is_finite() {
        return Err(RegretError::UnboundedDual);
    }
    let radius = instance.decision_radius();
    let cost = costs::cost_lp_sensitivity(lp, m_pi, radius, support, support)?;
    let regret = regret_matrix(instance, support)?;
    let n = support.len();
    let mut failures = Vec::new();
    let (mut min_slack, mut max_slack, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for i in 0..n {
        for j in 0..n {
            let (r, c) = (regret.get(i, j), cost.get(i, j));
            let slack = c - r;
            min_slack = min_slack.min(slack);
            max_slack = max_slack.max(slack);
            sum += slack;
            if r > c + LP_DOMINATION_TOL {
                failures.push((i, j, r, c));
            }
        }
    }
    Ok(LpDominationReport {
        m_pi,
        radius,
        pairs: n * n,
        failures,
        min_slack,
        mean_slack: if n == 0 { 0.0 } else { sum / (n * n) as f64 },
        max_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflFailure {
    pub candidate: usize,
    pub i: usize,
    pub j: usize,
    pub difference: f64,
    pub bound: f64,
}

/// Outcome of `|Q(y, ξ) − Q(y, ξ')| ≤ Σ_j c̄_j |ξ_j − ξ'_j|` for each fixed `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflDominationReport {
    pub mode: CflMode,
    /// Number of `(y, ξ, ξ')` triples compared.
    pub checks: usize,
    /// Triples skipped because `y` cannot serve one of the two demands.
    pub skipped: usize,
    pub failures: Vec<CflFailure>,
    /// Some triple with a positive bound attains it.
    pub tight: bool,
    pub max_ratio: f64,
}

impl CflDominationReport {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn verify_cfl_domination(
    instance: &TwoStageInstance,
    support: &[Scenario],
    mode: CflMode,
) -> Result<CflDominationReport, RegretError> {
    let Recourse::Cfl(cfl) = instance.recourse() else {
        return Err(RegretError::NotCfl(instance.name().to_string()));
    };
    let bound = costs::cost_cfl(cfl, support, support, mode)?;
    let n = support.len();
    let mut report = CflDominationReport {
        mode,
        checks: 0,
        skipped: 0,
        failures: Vec::new(),
        tight: false,
        max_ratio: 0.0,
    };
    for y in 0..instance.candidates().len() {
        let values: Vec<Option<f64>> = support
            .iter()
            .map(|xi| match instance.second_stage(y, xi) {
                Ok(v) => Ok(Some(v)),
                Err(ProblemError::InfeasibleRecourse { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<_, _>>()?;
        for i in 0..n {
            for j in 0..n {
                let (Some(a), Some(b)) = (values[i], values[j]) else {
                    report.skipped += 1;
                    continue;
                };
                report.checks += 1;
                let diff = (a - b).abs();
                let c = bound.get(i, j);
                if diff > c + CERTIFICATE_TOL * (1.0 + c) {
                    report.failures.push(CflFailure {
                        candidate: y,
                        i,
                        j,
                        difference: diff,
                        bound: c,
                    });
                }
                if c > 0.0 {
                    report.max_ratio = report.max_ratio.max(diff / c);
                    if (diff - c).abs() <= CERTIFICATE_TOL * (1.0 + c) {
                        report.tight = true;
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `γ̂ = max [Q_MILP(x, ξ) − Q_LP(x, ξ)]` over every candidate and every grid
/// scenario. A lower bound on the true integrality gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    pub gamma_hat: f64,
    /// Candidate and grid index attaining `γ̂`.
    pub argmax: Option<(usize, usize)>,
    pub grid_points: usize,
    pub grid: Vec<Scenario>,
}

pub fn estimate_integrality_gap(instance: &TwoStageInstance, grid: &[Scenario]) -> Result<GapEstimate, ProblemError> {
    let mut est = GapEstimate {
        gamma_hat: 0.0,
        argmax: None,
        grid_points: grid.len(),
        grid: grid.to_vec(),
    };
    if matches!(instance.recourse(), Recourse::Lp(_)) {
        return Ok(est);
    }
    for x in 0..instance.candidates().len() {
        for (k, xi) in grid.iter().enumerate() {
            let gap = instance.recourse_cost(x, xi)? - instance.relaxed_recourse_cost(x, xi)?;
            if gap > est.gamma_hat {
                est.gamma_hat = gap;
                est.argmax = Some((x, k));
            }
        }
    }
    Ok(est)
}
