//! Ground-cost constructors.
//!
//! Each constructor evaluates a cost `c(ξ, ξ')` on a pair of supports and
//! returns a [`CostMatrix`] with rows indexed by the first support. Costs that
//! need the recourse function read it through a [`RecourseTable`] so that each
//! `Q(x, ξ)` is evaluated once.
//!
//! Vector norms are Euclidean everywhere except in the LP-sensitivity and
//! MILP-gap costs, which use 1-norms to pair with the ∞-norm dual bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LpError};
use crate::measures::Scenario;
use crate::otsolve::{CostMatrix, OtError};
use crate::problems::{
    CflRecourse, FixedRecourseLp, KnapsackRecourse, NetworkDesignSpec, ProblemError, Recourse, RecourseTable,
    TwoStageInstance,
};
use crate::regret;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("scenario dimensions {0} and {1} differ")]
    DimensionMismatch(usize, usize),
    #[error("invalid cost parameter: {0}")]
    InvalidParameter(String),
    #[error("cost kind {kind} does not apply to instance {instance}")]
    NotApplicable { kind: &'static str, instance: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn check_dims(a: &[Scenario], b: &[Scenario]) -> Result<(), CostError> {
    let da = a.first().map(Scenario::dim);
    let db = b.first().map(Scenario::dim);
    for s in a.iter().chain(b) {
        let expected = da.or(db).unwrap_or(s.dim());
        if s.dim() != expected {
            return Err(CostError::DimensionMismatch(expected, s.dim()));
        }
    }
    Ok(())
}

fn nonnegative(name: &str, v: f64) -> Result<(), CostError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CostError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), CostError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CostError::InvalidParameter(format!("{name} must be finite and > 0, got {v}")))
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `c(ξ, ξ') = ‖ξ − ξ'‖₂`.
pub fn cost_norm(rows: &[Scenario], cols: &[Scenario]) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        rows[i].euclidean_distance(&cols[j])
    })?)
}

/// Recourse table over `rows` followed by `cols` (duplicates evaluated twice).
fn joint_table(instance: &TwoStageInstance, rows: &[Scenario], cols: &[Scenario]) -> Result<RecourseTable, CostError> {
    let mut support = rows.to_vec();
    support.extend_from_slice(cols);
    Ok(RecourseTable::compute(instance, &support)?)
}

/// Bertsimas-Mundru cost
/// `c(ξ, ξ') = [g + Q](x*(ξ'), ξ) − [g + Q](x*(ξ), ξ) + α‖ξ − ξ'‖`.
///
/// The decision-regret term compares full first- plus second-stage costs,
/// so it is nonnegative because `x*(ξ)` minimizes exactly that quantity. With
/// `g ≡ 0` it is `Q(x*(ξ'), ξ) − Q(x*(ξ), ξ)`.
pub fn cost_bm(instance: &TwoStageInstance, rows: &[Scenario], cols: &[Scenario], alpha: f64) -> Result<CostMatrix, CostError> {
    nonnegative("alpha", alpha)?;
    check_dims(rows, cols)?;
    let table = joint_table(instance, rows, cols)?;
    let n = rows.len();
    let row_star: Vec<usize> = (0..n).map(|i| table.optimal_first_stage(i)).collect();
    let col_star: Vec<usize> = (0..cols.len()).map(|j| table.optimal_first_stage(n + j)).collect();
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let regret = table.total(col_star[j], i) - table.total(row_star[i], i);
        regret.max(0.0) + alpha * rows[i].euclidean_distance(&cols[j])
    })?)
}

/// `c_S = ½ [c_BM(ξ, ξ') + c_BM(ξ', ξ)]` on a single support.
pub fn cost_bm_symmetrized(instance: &TwoStageInstance, support: &[Scenario], alpha: f64) -> Result<CostMatrix, CostError> {
    let bm = cost_bm(instance, support, support, alpha)?;
    Ok(CostMatrix::from_fn(support.len(), support.len(), |i, j| {
        0.5 * (bm.get(i, j) + bm.get(j, i))
    })?)
}

/// `c_avg = (1/K) Σ_k |Q(x_k, ξ) − Q(x_k, ξ')|` over a panel of candidate indices.
pub fn cost_avg_regret(
    instance: &TwoStageInstance,
    panel: &[usize],
    rows: &[Scenario],
    cols: &[Scenario],
) -> Result<CostMatrix, CostError> {
    if panel.is_empty() {
        return Err(CostError::InvalidParameter("decision panel is empty".into()));
    }
    if let Some(&x) = panel.iter().find(|&&x| x >= instance.candidates().len()) {
        return Err(ProblemError::NoSuchCandidate(x).into());
    }
    check_dims(rows, cols)?;
    let table = joint_table(instance, rows, cols)?;
    let n = rows.len();
    let k = panel.len() as f64;
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        panel
            .iter()
            .map(|&x| (table.recourse(x, i) - table.recourse(x, n + j)).abs())
            .sum::<f64>()
            / k
    })?)
}

/// `α‖ξ − ξ'‖ + β‖x*(ξ) − x*(ξ')‖ + γ·c_BM(ξ, ξ')` with `c_BM` taken at `α = 0`.
pub fn cost_composite(
    instance: &TwoStageInstance,
    rows: &[Scenario],
    cols: &[Scenario],
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<CostMatrix, CostError> {
    positive("alpha", alpha)?;
    nonnegative("beta", beta)?;
    nonnegative("gamma", gamma)?;
    check_dims(rows, cols)?;
    let table = joint_table(instance, rows, cols)?;
    let n = rows.len();
    let row_star: Vec<usize> = (0..n).map(|i| table.optimal_first_stage(i)).collect();
    let col_star: Vec<usize> = (0..cols.len()).map(|j| table.optimal_first_stage(n + j)).collect();
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let decision_gap = euclid(instance.candidate(row_star[i]), instance.candidate(col_star[j]));
        let regret = (table.total(col_star[j], i) - table.total(row_star[i], i)).max(0.0);
        let dist = rows[i].euclidean_distance(&cols[j]);
        let mut c = alpha * dist;
        if beta > 0.0 {
            c += beta * decision_gap;
        }
        if gamma > 0.0 {
            c += gamma * regret;
        }
        c
    })?)
}

/// `‖A − B‖₁` summed entrywise; bounds `‖(A − B)x‖₁ / ‖x‖_∞`.
fn matrix_l1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(ra, rb)| l1(ra, rb)).sum()
}

/// `c_LP = M_π [‖h(ξ) − h(ξ')‖₁ + R‖T(ξ) − T(ξ')‖₁]`, matrix norm entrywise.
pub fn cost_lp_sensitivity(
    recourse: &FixedRecourseLp,
    dual_bound: f64,
    radius: f64,
    rows: &[Scenario],
    cols: &[Scenario],
) -> Result<CostMatrix, CostError> {
    nonnegative("M_pi", dual_bound)?;
    nonnegative("R", radius)?;
    check_dims(rows, cols)?;
    let h_rows: Vec<Vec<f64>> = rows.iter().map(|s| recourse.rhs.eval(s.coords())).collect();
    let h_cols: Vec<Vec<f64>> = cols.iter().map(|s| recourse.rhs.eval(s.coords())).collect();
    let t_rows: Vec<Vec<Vec<f64>>> = rows.iter().map(|s| recourse.technology.eval(s.coords())).collect();
    let t_cols: Vec<Vec<Vec<f64>>> = cols.iter().map(|s| recourse.technology.eval(s.coords())).collect();
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let dh = l1(&h_rows[i], &h_cols[j]);
        let dt = matrix_l1(&t_rows[i], &t_cols[j]);
        let inner = dh + if radius > 0.0 { radius * dt } else { 0.0 };
        if inner == 0.0 {
            0.0
        } else {
            dual_bound * inner
        }
    })?)
}

/// `c_MILP = c_LP + γ̂` for distinct scenarios and 0 on identical ones.
pub fn cost_milp_gap(
    recourse: &FixedRecourseLp,
    dual_bound: f64,
    radius: f64,
    gap: f64,
    rows: &[Scenario],
    cols: &[Scenario],
) -> Result<CostMatrix, CostError> {
    nonnegative("gamma", gap)?;
    let base = cost_lp_sensitivity(recourse, dual_bound, radius, rows, cols)?;
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        if rows[i] == cols[j] {
            0.0
        } else {
            base.get(i, j) + gap
        }
    })?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CflMode {
    /// Largest unit cost per customer; valid for binding capacities.
    Max,
    /// Smallest unit cost per customer; the uncapacitated case.
    Min,
}

/// `Σ_j c̄_j |ξ_j − ξ'_j|` with `c̄_j` the max or min unit cost of customer `j`.
pub fn cost_cfl(cfl: &CflRecourse, rows: &[Scenario], cols: &[Scenario], mode: CflMode) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    let weights = cfl.unit_cost_bounds(mode == CflMode::Max);
    if let Some(s) = rows.iter().chain(cols).find(|s| s.dim() != weights.len()) {
        return Err(CostError::DimensionMismatch(weights.len(), s.dim()));
    }
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        weights
            .iter()
            .zip(rows[i].coords().iter().zip(cols[j].coords()))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum()
    })?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnapsackMode {
    /// `ρ·g·(⌊max(ξ,ξ')/g⌋ − ⌊min(ξ,ξ')/g⌋)`
    Stepwise,
    /// `ρ·|ξ − ξ'|`
    Linear,
}

/// Knapsack capacity cost with `ρ = max_j v_j/w_j` and `g = gcd(w)`.
pub fn cost_knapsack(
    knapsack: &KnapsackRecourse,
    rows: &[Scenario],
    cols: &[Scenario],
    mode: KnapsackMode,
) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    if let Some(s) = rows.iter().chain(cols).find(|s| s.dim() != 1) {
        return Err(CostError::DimensionMismatch(1, s.dim()));
    }
    let rho = knapsack.best_ratio();
    let g = knapsack.weight_gcd() as f64;
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (a, b) = (rows[i].coords()[0], cols[j].coords()[0]);
        match mode {
            KnapsackMode::Linear => rho * (a - b).abs(),
            KnapsackMode::Stepwise => {
                let steps = (a.max(b) / g).floor() - (a.min(b) / g).floor();
                if steps == 0.0 {
                    0.0
                } else {
                    rho * g * steps
                }
            }
        }
    })?)
}

/// `c_UC = Σ_t π̄_t |D_t(ξ) − D_t(ξ')|` where scenario coordinate `t` is `D_t`.
pub fn cost_unit_commitment(price_bounds: &[f64], rows: &[Scenario], cols: &[Scenario]) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    for &p in price_bounds {
        nonnegative("price bound", p)?;
    }
    if let Some(s) = rows.iter().chain(cols).find(|s| s.dim() != price_bounds.len()) {
        return Err(CostError::DimensionMismatch(price_bounds.len(), s.dim()));
    }
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        price_bounds
            .iter()
            .zip(rows[i].coords().iter().zip(cols[j].coords()))
            .map(|(p, (a, b))| p * (a - b).abs())
            .sum()
    })?)
}

/// `c_ND = Σ_{v,c} π̄_vc |d_vc(ξ) − d_vc(ξ')|`, bounds indexed `v * C + c`.
pub fn cost_network_design(
    spec: &NetworkDesignSpec,
    price_bounds: &[f64],
    rows: &[Scenario],
    cols: &[Scenario],
) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    if price_bounds.len() != spec.nodes * spec.commodities() {
        return Err(CostError::InvalidParameter(format!(
            "expected {} node-commodity price bounds",
            spec.nodes * spec.commodities()
        )));
    }
    for &p in price_bounds {
        nonnegative("price bound", p)?;
    }
    let d_rows: Vec<Vec<f64>> = rows.iter().map(|s| spec.demands(s.coords())).collect();
    let d_cols: Vec<Vec<f64>> = cols.iter().map(|s| spec.demands(s.coords())).collect();
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        price_bounds
            .iter()
            .zip(d_rows[i].iter().zip(&d_cols[j]))
            .map(|(p, (a, b))| p * (a - b).abs())
            .sum()
    })?)
}

/// `Σ_r w_r |h_r(ξ) − h_r(ξ')|` over selected right-hand-side rows of a
/// recourse LP. Unit commitment and network design costs are this form on
/// their demand rows.
pub fn cost_rhs_weighted(
    recourse: &FixedRecourseLp,
    row_weights: &[(usize, f64)],
    rows: &[Scenario],
    cols: &[Scenario],
) -> Result<CostMatrix, CostError> {
    check_dims(rows, cols)?;
    for &(_, w) in row_weights {
        nonnegative("row weight", w)?;
    }
    let h_rows: Vec<Vec<f64>> = rows.iter().map(|s| recourse.rhs.eval(s.coords())).collect();
    let h_cols: Vec<Vec<f64>> = cols.iter().map(|s| recourse.rhs.eval(s.coords())).collect();
    Ok(CostMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        row_weights
            .iter()
            .map(|&(r, w)| w * (h_rows[i][r] - h_cols[j][r]).abs())
            .sum()
    })?)
}

/// Empirical bounds `π̄_r = max |π_r|` over LP duals on an evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceBounds {
    pub rows: Vec<usize>,
    pub bounds: Vec<f64>,
    pub grid: Vec<Scenario>,
    pub candidates: usize,
}

/// Sweeps every candidate and every grid scenario, solving the recourse LP
/// (the relaxation for MILP recourse) and recording the largest absolute
/// dual on each requested row. The result is an estimate of a supremum.
pub fn dual_price_bounds(instance: &TwoStageInstance, grid: &[Scenario], rows: &[usize]) -> Result<PriceBounds, CostError> {
    let recourse = instance.recourse_lp().ok_or_else(|| CostError::NotApplicable {
        kind: "dual price sweep",
        instance: instance.name().to_string(),
    })?;
    let mut bounds = vec![0.0f64; rows.len()];
    for x in 0..instance.candidates().len() {
        for xi in grid {
            let sol = recourse.solve(instance.candidate(x), xi.coords())?;
            if !sol.is_optimal() {
                return Err(ProblemError::InfeasibleRecourse {
                    candidate: x,
                    scenario: xi.clone(),
                }
                .into());
            }
            for (b, &r) in bounds.iter_mut().zip(rows) {
                *b = b.max(sol.dual[r].abs());
            }
        }
    }
    Ok(PriceBounds {
        rows: rows.to_vec(),
        bounds,
        grid: grid.to_vec(),
        candidates: instance.candidates().len(),
    })
}

/// A cost triangle `c(i, k) > c(i, j) + c(j, k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleViolation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub direct: f64,
    pub via: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostValidation {
    pub nonnegative: bool,
    /// Some entry is finite.
    pub proper: bool,
    /// `None` for rectangular matrices.
    pub zero_diagonal: Option<bool>,
    pub symmetric: bool,
    /// Largest triangle-inequality violation, if any (square matrices only).
    pub triangle_violation: Option<TriangleViolation>,
}

impl CostValidation {
    /// Nonnegative, proper and zero on the diagonal.
    pub fn is_valid(&self) -> bool {
        self.nonnegative && self.proper && self.zero_diagonal.unwrap_or(true)
    }
}

/// Checks the ground-cost requirements that make sense on a finite support
/// and reports whether the cost happens to be symmetric or metric.
pub fn validate_ground_cost(cost: &CostMatrix) -> CostValidation {
    let nonnegative = cost.entries().iter().all(|v| *v >= 0.0);
    let proper = cost.entries().iter().any(|v| v.is_finite());
    let square = cost.rows() == cost.cols();
    let zero_diagonal = square.then(|| (0..cost.rows()).all(|i| cost.get(i, i) == 0.0));
    let mut triangle_violation: Option<TriangleViolation> = None;
    if square {
        let n = cost.rows();
        for i in 0..n {
            for k in 0..n {
                let direct = cost.get(i, k);
                for j in 0..n {
                    let via = cost.get(i, j) + cost.get(j, k);
                    let excess = direct - via;
                    if excess > 1e-9 * (1.0 + via.abs())
                        && triangle_violation
                            .as_ref()
                            .is_none_or(|t| excess > t.direct - t.via)
                    {
                        triangle_violation = Some(TriangleViolation { i, j, k, direct, via });
                    }
                }
            }
        }
    }
    CostValidation {
        nonnegative,
        proper,
        zero_diagonal,
        symmetric: cost.is_symmetric(),
        triangle_violation,
    }
}

/// Whether a cost used only exact quantities or some estimated constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Taint {
    Exact,
    Estimate,
}

/// Serializable description of a ground cost. Constants left as `None` are
/// resolved from the instance when the cost is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundCostSpec {
    Norm,
    Bm {
        alpha: f64,
    },
    BmSymmetrized {
        alpha: f64,
    },
    AvgRegret {
        panel: Vec<usize>,
    },
    Composite {
        alpha: f64,
        beta: f64,
        gamma: f64,
    },
    LpSensitivity {
        #[serde(default)]
        m_pi: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    MilpGap {
        #[serde(default)]
        m_pi: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
        #[serde(default)]
        gamma: Option<f64>,
    },
    CflMax,
    CflMin,
    KnapsackStepwise,
    KnapsackLinear,
    UnitCommitment {
        #[serde(default)]
        price_bounds: Option<Vec<f64>>,
    },
    NetworkDesign {
        #[serde(default)]
        price_bounds: Option<Vec<f64>>,
    },
}

/// A built cost together with the constants it resolved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuiltCost {
    pub matrix: CostMatrix,
    pub taint: Taint,
    pub constants: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl GroundCostSpec {
    pub fn label(&self) -> &'static str {
        match self {
            GroundCostSpec::Norm => "norm",
            GroundCostSpec::Bm { .. } => "bm",
            GroundCostSpec::BmSymmetrized { .. } => "bm_symmetrized",
            GroundCostSpec::AvgRegret { .. } => "avg_regret",
            GroundCostSpec::Composite { .. } => "composite",
            GroundCostSpec::LpSensitivity { .. } => "lp_sensitivity",
            GroundCostSpec::MilpGap { .. } => "milp_gap",
            GroundCostSpec::CflMax => "cfl_max",
            GroundCostSpec::CflMin => "cfl_min",
            GroundCostSpec::KnapsackStepwise => "knapsack_stepwise",
            GroundCostSpec::KnapsackLinear => "knapsack_linear",
            GroundCostSpec::UnitCommitment { .. } => "unit_commitment",
            GroundCostSpec::NetworkDesign { .. } => "network_design",
        }
    }

    /// Evaluates the cost on a single support (rows and columns alike).
    /// Estimated constants (dual sweeps, integrality gaps) use this support
    /// as their evaluation grid.
    pub fn build(&self, instance: &TwoStageInstance, support: &[Scenario]) -> Result<BuiltCost, CostError> {
        let not_applicable = || CostError::NotApplicable {
            kind: self.label(),
            instance: instance.name().to_string(),
        };
        let exact = |matrix| BuiltCost {
            matrix,
            taint: Taint::Exact,
            constants: Vec::new(),
            notes: Vec::new(),
        };
        Ok(match self {
            GroundCostSpec::Norm => exact(cost_norm(support, support)?),
            GroundCostSpec::Bm { alpha } => exact(cost_bm(instance, support, support, *alpha)?),
            GroundCostSpec::BmSymmetrized { alpha } => exact(cost_bm_symmetrized(instance, support, *alpha)?),
            GroundCostSpec::AvgRegret { panel } => exact(cost_avg_regret(instance, panel, support, support)?),
            GroundCostSpec::Composite { alpha, beta, gamma } => {
                exact(cost_composite(instance, support, support, *alpha, *beta, *gamma)?)
            }
            GroundCostSpec::LpSensitivity { m_pi, radius } => {
                let Recourse::Lp(lp) = instance.recourse() else {
                    return Err(not_applicable());
                };
                let radius = radius.unwrap_or_else(|| instance.decision_radius());
                let (m_pi, taint, note) = resolve_dual_bound(instance, lp, *m_pi, support)?;
                BuiltCost {
                    matrix: cost_lp_sensitivity(lp, m_pi, radius, support, support)?,
                    taint,
                    constants: vec![("M_pi".into(), m_pi), ("R".into(), radius)],
                    notes: note.into_iter().collect(),
                }
            }
            GroundCostSpec::MilpGap { m_pi, radius, gamma } => {
                let lp = match instance.recourse() {
                    Recourse::Milp(_) | Recourse::Knapsack(_) | Recourse::Lp(_) => {
                        instance.recourse_lp().expect("LP-representable recourse")
                    }
                    _ => return Err(not_applicable()),
                };
                let radius = radius.unwrap_or_else(|| instance.decision_radius());
                let (m_pi, mut taint, note) = resolve_dual_bound(instance, &lp, *m_pi, support)?;
                let mut notes: Vec<String> = note.into_iter().collect();
                let gap = match gamma {
                    Some(g) => *g,
                    None => {
                        let est = regret::estimate_integrality_gap(instance, support)?;
                        taint = Taint::Estimate;
                        notes.push(format!(
                            "integrality gap estimated as {} over {} grid points and {} candidates",
                            est.gamma_hat,
                            est.grid_points,
                            instance.candidates().len()
                        ));
                        est.gamma_hat
                    }
                };
                BuiltCost {
                    matrix: cost_milp_gap(&lp, m_pi, radius, gap, support, support)?,
                    taint,
                    constants: vec![("M_pi".into(), m_pi), ("R".into(), radius), ("gamma".into(), gap)],
                    notes,
                }
            }
            GroundCostSpec::CflMax | GroundCostSpec::CflMin => {
                let Recourse::Cfl(cfl) = instance.recourse() else {
                    return Err(not_applicable());
                };
                let mode = if matches!(self, GroundCostSpec::CflMax) {
                    CflMode::Max
                } else {
                    CflMode::Min
                };
                exact(cost_cfl(cfl, support, support, mode)?)
            }
            GroundCostSpec::KnapsackStepwise | GroundCostSpec::KnapsackLinear => {
                let Recourse::Knapsack(k) = instance.recourse() else {
                    return Err(not_applicable());
                };
                let mode = if matches!(self, GroundCostSpec::KnapsackStepwise) {
                    KnapsackMode::Stepwise
                } else {
                    KnapsackMode::Linear
                };
                let mut built = exact(cost_knapsack(k, support, support, mode)?);
                built.constants = vec![("rho".into(), k.best_ratio()), ("g".into(), k.weight_gcd() as f64)];
                built
            }
            GroundCostSpec::UnitCommitment { price_bounds } | GroundCostSpec::NetworkDesign { price_bounds } => {
                let lp = match (self, instance.recourse()) {
                    (GroundCostSpec::UnitCommitment { .. }, Recourse::Lp(lp)) => lp.clone(),
                    (GroundCostSpec::NetworkDesign { .. }, Recourse::Milp(m)) => m.relaxation.clone(),
                    _ => return Err(not_applicable()),
                };
                let rows = lp.scenario_rows();
                let (bounds, taint, notes) = match price_bounds {
                    Some(b) if b.len() == rows.len() => (b.clone(), Taint::Exact, Vec::new()),
                    Some(b) => {
                        return Err(CostError::InvalidParameter(format!(
                            "expected {} price bounds, got {}",
                            rows.len(),
                            b.len()
                        )))
                    }
                    None => {
                        let sweep = dual_price_bounds(instance, support, &rows)?;
                        let note = format!(
                            "price bounds estimated from LP duals over {} grid points and {} candidates",
                            sweep.grid.len(),
                            sweep.candidates
                        );
                        (sweep.bounds, Taint::Estimate, vec![note])
                    }
                };
                let weights: Vec<(usize, f64)> = rows.iter().copied().zip(bounds.iter().copied()).collect();
                BuiltCost {
                    matrix: cost_rhs_weighted(&lp, &weights, support, support)?,
                    taint,
                    constants: rows
                        .iter()
                        .zip(&bounds)
                        .map(|(r, b)| (format!("pi_bar[{r}]"), *b))
                        .collect(),
                    notes,
                }
            }
        })
    }
}

/// `M_π` from the dual polytope when it is bounded, otherwise the largest
/// optimal dual seen on the support (an estimate).
fn resolve_dual_bound(
    instance: &TwoStageInstance,
    lp: &FixedRecourseLp,
    given: Option<f64>,
    support: &[Scenario],
) -> Result<(f64, Taint, Option<String>), CostError> {
    if let Some(m) = given {
        return Ok((m, Taint::Exact, None));
    }
    let bound = lp::dual_inf_norm_bound(&lp.recourse, &lp.cost)?;
    if bound.is_finite() {
        return Ok((bound, Taint::Exact, None));
    }
    let all_rows: Vec<usize> = (0..lp.rows()).collect();
    let sweep = dual_price_bounds(instance, support, &all_rows)?;
    let m = sweep.bounds.iter().copied().fold(0.0, f64::max);
    Ok((
        m,
        Taint::Estimate,
        Some(format!(
            "dual polytope unbounded; M_pi estimated from optimal duals over {} grid points",
            support.len()
        )),
    ))
}
