//! Two-stage instances with a finite first-stage candidate list, and builders
//! for the worked example problems (newsvendor, fixed-recourse LP,
//! single-sourcing facility location, unbounded knapsack, unit commitment,
//! network design).
//!
//! Every instance exposes the recourse value `Q(x, ξ)` in its native
//! orientation ([`TwoStageInstance::second_stage`]) and in minimization form
//! ([`TwoStageInstance::recourse_cost`]), which is what the regret and cost
//! machinery consumes.

use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num_integer::Integer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, IntegerBox, LinearProgram, LpError, LpSolution, LpStatus, DEFAULT_ENUMERATION_CAP};
use crate::measures::{DiscreteDistribution, Scenario};

/// Largest integer capacity the knapsack table is built for.
pub const MAX_KNAPSACK_CAPACITY: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("second stage infeasible for candidate {candidate} at scenario {scenario}")]
    InfeasibleRecourse { candidate: usize, scenario: Scenario },
    #[error("second stage unbounded for candidate {candidate} at scenario {scenario}")]
    UnboundedRecourse { candidate: usize, scenario: Scenario },
    #[error("scenario has dimension {found}, instance expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("candidate index {0} out of range")]
    NoSuchCandidate(usize),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("{assignments} assignments exceed the enumeration cap {cap}")]
    EnumerationTooLarge { assignments: u128, cap: usize },
    #[error("instance has no LP relaxation")]
    NoRelaxation,
    #[error(transparent)]
    Lp(#[from] LpError),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ProblemError> {
    Err(ProblemError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Orientation {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RecourseStructure {
    Continuous,
    MixedInteger,
}

/// `h(ξ) = constant + slope · ξ`, with `slope` stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineVector {
    pub constant: Vec<f64>,
    pub slope: Vec<Vec<f64>>,
}

impl AffineVector {
    pub fn constant(values: Vec<f64>, dim: usize) -> Self {
        let rows = values.len();
        Self {
            constant: values,
            slope: vec![vec![0.0; dim]; rows],
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        self.constant
            .iter()
            .zip(&self.slope)
            .map(|(c, row)| c + row.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }
}

/// `T(ξ) = constant + Σ_k ξ_k · slopes[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffineMatrix {
    pub constant: Vec<Vec<f64>>,
    pub slopes: Vec<Vec<Vec<f64>>>,
}

impl AffineMatrix {
    pub fn constant(values: Vec<Vec<f64>>) -> Self {
        Self {
            constant: values,
            slopes: Vec::new(),
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::constant(vec![vec![0.0; cols]; rows])
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<Vec<f64>> {
        let mut out = self.constant.clone();
        for (k, slope) in self.slopes.iter().enumerate() {
            for (row, srow) in out.iter_mut().zip(slope) {
                for (v, s) in row.iter_mut().zip(srow) {
                    *v += xi[k] * s;
                }
            }
        }
        out
    }
}

/// `Q(x, ξ) = min { qᵀz : Wz = h(ξ) − T(ξ)x, z ≥ 0 }`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedRecourseLp {
    pub cost: Vec<f64>,
    pub recourse: Vec<Vec<f64>>,
    pub rhs: AffineVector,
    pub technology: AffineMatrix,
}

impl FixedRecourseLp {
    pub fn new(
        cost: Vec<f64>,
        recourse: Vec<Vec<f64>>,
        rhs: AffineVector,
        technology: AffineMatrix,
        dim: usize,
        decision_len: usize,
    ) -> Result<Self, ProblemError> {
        let m = recourse.len();
        let n = cost.len();
        if recourse.iter().any(|r| r.len() != n) {
            return invalid("recourse matrix rows must match the cost vector length");
        }
        if rhs.constant.len() != m || rhs.slope.len() != m || rhs.slope.iter().any(|r| r.len() != dim) {
            return invalid(format!("h(ξ) must have {m} rows of {dim} slopes"));
        }
        let shape_ok = |t: &Vec<Vec<f64>>| t.len() == m && t.iter().all(|r| r.len() == decision_len);
        if !shape_ok(&technology.constant) || !technology.slopes.iter().all(shape_ok) {
            return invalid(format!("T(ξ) must be {m}x{decision_len}"));
        }
        if technology.slopes.len() > dim {
            return invalid("T(ξ) has more slope matrices than scenario coordinates");
        }
        Ok(Self {
            cost,
            recourse,
            rhs,
            technology,
        })
    }

    pub fn rows(&self) -> usize {
        self.recourse.len()
    }

    /// `h(ξ) − T(ξ)x`.
    pub fn right_hand_side(&self, x: &[f64], xi: &[f64]) -> Vec<f64> {
        let h = self.rhs.eval(xi);
        let t = self.technology.eval(xi);
        h.iter()
            .zip(&t)
            .map(|(hv, trow)| hv - trow.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn program(&self, x: &[f64], xi: &[f64]) -> LinearProgram {
        LinearProgram {
            objective: self.cost.clone(),
            eq_matrix: self.recourse.clone(),
            rhs: self.right_hand_side(x, xi),
        }
    }

    pub fn solve(&self, x: &[f64], xi: &[f64]) -> Result<LpSolution, LpError> {
        lp::solve(&self.program(x, xi))
    }

    /// Rows whose right-hand side moves with the scenario.
    pub fn scenario_rows(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&r| {
                self.rhs.slope[r].iter().any(|v| *v != 0.0)
                    || self.technology.slopes.iter().any(|s| s[r].iter().any(|v| *v != 0.0))
            })
            .collect()
    }
}

/// Fixed-recourse program with some integer recourse variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedRecourseMilp {
    pub relaxation: FixedRecourseLp,
    pub integers: Vec<IntegerBox>,
    pub enumeration_cap: usize,
}

/// Single-sourcing capacitated facility location second stage.
/// `costs[i][j]` is the unit cost of serving customer `j` from facility `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CflRecourse {
    pub costs: Vec<Vec<f64>>,
    pub capacities: Vec<f64>,
    pub enumeration_cap: usize,
}

impl CflRecourse {
    pub fn facilities(&self) -> usize {
        self.costs.len()
    }

    pub fn customers(&self) -> usize {
        self.costs.first().map_or(0, Vec::len)
    }

    /// Per-customer largest (`max`) or smallest unit cost over facilities.
    pub fn unit_cost_bounds(&self, max: bool) -> Vec<f64> {
        (0..self.customers())
            .map(|j| {
                let col = self.costs.iter().map(|row| row[j]);
                if max {
                    col.fold(f64::NEG_INFINITY, f64::max)
                } else {
                    col.fold(f64::INFINITY, f64::min)
                }
            })
            .collect()
    }

    /// Cheapest feasible assignment for the open facilities, or `None`.
    fn value(&self, open: &[f64], demand: &[f64]) -> Result<Option<f64>, ProblemError> {
        let open_idx: Vec<usize> = (0..self.facilities()).filter(|&i| open[i] > 0.5).collect();
        let n = self.customers();
        if open_idx.is_empty() {
            return Ok(None);
        }
        let assignments = (open_idx.len() as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if assignments > self.enumeration_cap as u128 {
            return Err(ProblemError::EnumerationTooLarge {
                assignments,
                cap: self.enumeration_cap,
            });
        }
        let mut best: Option<f64> = None;
        let mut load = vec![0.0; self.facilities()];
        for assign in (0..n).map(|_| open_idx.iter().copied()).multi_cartesian_product() {
            load.iter_mut().for_each(|l| *l = 0.0);
            for (j, &i) in assign.iter().enumerate() {
                load[i] += demand[j];
            }
            if open_idx.iter().any(|&i| load[i] > self.capacities[i] + 1e-9) {
                continue;
            }
            let cost: f64 = assign.iter().enumerate().map(|(j, &i)| self.costs[i][j] * demand[j]).sum();
            if best.is_none_or(|b| cost < b) {
                best = Some(cost);
            }
        }
        Ok(best)
    }
}

/// `max { vᵀz : wᵀz ≤ ξ, z ∈ Z₊ }` with positive integer weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnapsackRecourse {
    pub weights: Vec<u64>,
    pub values: Vec<f64>,
}

impl KnapsackRecourse {
    pub fn new(weights: Vec<u64>, values: Vec<f64>) -> Result<Self, ProblemError> {
        if weights.is_empty() || weights.len() != values.len() {
            return invalid("knapsack needs matching, nonempty weights and values");
        }
        if weights.contains(&0) {
            return invalid("knapsack weights must be positive integers");
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("knapsack values must be finite and nonnegative");
        }
        Ok(Self { weights, values })
    }

    /// `g = gcd(w)`.
    pub fn weight_gcd(&self) -> u64 {
        self.weights.iter().fold(0u64, |g, &w| g.gcd(&w))
    }

    /// `ρ = max_j v_j / w_j`.
    pub fn best_ratio(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.values)
            .map(|(&w, &v)| v / w as f64)
            .fold(0.0, f64::max)
    }

    /// Best value for every integer capacity `0..=capacity`.
    pub fn value_table(&self, capacity: u64) -> Vec<f64> {
        let cap = capacity as usize;
        let mut best = vec![0.0f64; cap + 1];
        for c in 1..=cap {
            let mut b = best[c - 1];
            for (&w, &v) in self.weights.iter().zip(&self.values) {
                let w = w as usize;
                if w <= c {
                    b = b.max(best[c - w] + v);
                }
            }
            best[c] = b;
        }
        best
    }

    /// Value at a real capacity; effective capacity is `⌊ξ⌋`.
    pub fn value(&self, capacity: f64) -> Option<f64> {
        if capacity < 0.0 || capacity.floor() > MAX_KNAPSACK_CAPACITY as f64 {
            return None;
        }
        let cap = capacity.floor() as u64;
        self.value_table(cap).last().copied()
    }

    /// The knapsack as an equality-form MILP in minimization form,
    /// `min −vᵀz  s.t.  wᵀz + s = ξ`, with item boxes sized for capacities up
    /// to `max_capacity`.
    pub fn as_milp(&self, max_capacity: f64) -> FixedRecourseMilp {
        let top = max_capacity.max(0.0).floor() as i64;
        FixedRecourseMilp {
            relaxation: self.relaxation(),
            integers: self
                .weights
                .iter()
                .enumerate()
                .map(|(j, &w)| IntegerBox::new(j, 0, top / w as i64))
                .collect(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    /// Continuous relaxation of [`Self::as_milp`].
    pub fn relaxation(&self) -> FixedRecourseLp {
        let mut cost: Vec<f64> = self.values.iter().map(|v| -v).collect();
        cost.push(0.0);
        let mut row: Vec<f64> = self.weights.iter().map(|&w| w as f64).collect();
        row.push(1.0);
        FixedRecourseLp {
            cost,
            recourse: vec![row],
            rhs: AffineVector {
                constant: vec![0.0],
                slope: vec![vec![1.0]],
            },
            technology: AffineMatrix::zero(1, 1),
        }
    }
}

/// Type-erased recourse oracle for ad hoc instances.
pub type RecourseFn = Arc<dyn Fn(&[f64], &Scenario) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Recourse {
    Newsvendor { holding: f64, penalty: f64 },
    Lp(FixedRecourseLp),
    Milp(FixedRecourseMilp),
    Cfl(CflRecourse),
    Knapsack(KnapsackRecourse),
    Custom(RecourseFn),
}

impl fmt::Debug for Recourse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recourse::Newsvendor { holding, penalty } => f
                .debug_struct("Newsvendor")
                .field("holding", holding)
                .field("penalty", penalty)
                .finish(),
            Recourse::Lp(lp) => f.debug_tuple("Lp").field(lp).finish(),
            Recourse::Milp(m) => f.debug_tuple("Milp").field(m).finish(),
            Recourse::Cfl(c) => f.debug_tuple("Cfl").field(c).finish(),
            Recourse::Knapsack(k) => f.debug_tuple("Knapsack").field(k).finish(),
            Recourse::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// `v(P)` together with the lowest-index minimizing candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueSolution {
    pub value: f64,
    pub minimizer: usize,
}

/// Two-stage program `min_{x ∈ X} g(x) + E[Q(x, ξ)]` over a finite,
/// ordered candidate list `X`.
#[derive(Debug, Clone)]
pub struct TwoStageInstance {
    name: String,
    dim: usize,
    candidates: Vec<Vec<f64>>,
    first_stage_costs: Vec<f64>,
    recourse: Recourse,
    orientation: Orientation,
}

impl TwoStageInstance {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        candidates: Vec<Vec<f64>>,
        first_stage_costs: Vec<f64>,
        recourse: Recourse,
        orientation: Orientation,
    ) -> Result<Self, ProblemError> {
        if candidates.is_empty() {
            return invalid("candidate set X must be nonempty");
        }
        if candidates.len() != first_stage_costs.len() {
            return invalid("one first-stage cost per candidate is required");
        }
        if dim == 0 {
            return invalid("scenario dimension must be positive");
        }
        if first_stage_costs.iter().chain(candidates.iter().flatten()).any(|v| !v.is_finite()) {
            return invalid("candidates and first-stage costs must be finite");
        }
        let len = candidates[0].len();
        if candidates.iter().any(|c| c.len() != len) {
            return invalid("all candidates must have the same length");
        }
        Ok(Self {
            name: name.into(),
            dim,
            candidates,
            first_stage_costs,
            recourse,
            orientation,
        })
    }

    /// Instance with an arbitrary min-form recourse closure.
    pub fn custom<F>(name: &str, dim: usize, candidates: Vec<Vec<f64>>, first_stage_costs: Vec<f64>, f: F) -> Result<Self, ProblemError>
    where
        F: Fn(&[f64], &Scenario) -> f64 + Send + Sync + 'static,
    {
        Self::new(name, dim, candidates, first_stage_costs, Recourse::Custom(Arc::new(f)), Orientation::Minimize)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn candidate(&self, x: usize) -> &[f64] {
        &self.candidates[x]
    }

    pub fn first_stage_cost(&self, x: usize) -> f64 {
        self.first_stage_costs[x]
    }

    pub fn recourse(&self) -> &Recourse {
        &self.recourse
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn structure(&self) -> RecourseStructure {
        match &self.recourse {
            Recourse::Milp(_) | Recourse::Cfl(_) | Recourse::Knapsack(_) => RecourseStructure::MixedInteger,
            _ => RecourseStructure::Continuous,
        }
    }

    /// `R = max_{x ∈ X} ‖x‖_∞`.
    pub fn decision_radius(&self) -> f64 {
        self.candidates
            .iter()
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }

    fn check(&self, x: usize, xi: &Scenario) -> Result<(), ProblemError> {
        if x >= self.candidates.len() {
            return Err(ProblemError::NoSuchCandidate(x));
        }
        if xi.dim() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                expected: self.dim,
                found: xi.dim(),
            });
        }
        Ok(())
    }

    fn lp_value(&self, sol: LpSolution, x: usize, xi: &Scenario) -> Result<f64, ProblemError> {
        match sol.status {
            LpStatus::Optimal => Ok(sol.objective_value),
            LpStatus::Infeasible => Err(ProblemError::InfeasibleRecourse {
                candidate: x,
                scenario: xi.clone(),
            }),
            LpStatus::Unbounded => Err(ProblemError::UnboundedRecourse {
                candidate: x,
                scenario: xi.clone(),
            }),
        }
    }

    /// `Q(x, ξ)` in the instance's own orientation (the knapsack reports
    /// its maximal value).
    pub fn second_stage(&self, x: usize, xi: &Scenario) -> Result<f64, ProblemError> {
        self.check(x, xi)?;
        let decision = &self.candidates[x];
        let c = xi.coords();
        let infeasible = || ProblemError::InfeasibleRecourse {
            candidate: x,
            scenario: xi.clone(),
        };
        match &self.recourse {
            Recourse::Newsvendor { holding, penalty } => {
                let order = decision[0];
                Ok(holding * (order - c[0]).max(0.0) + penalty * (c[0] - order).max(0.0))
            }
            Recourse::Lp(lp) => self.lp_value(lp.solve(decision, c)?, x, xi),
            Recourse::Milp(m) => {
                let sol = lp::milp_solve_bruteforce(&m.relaxation.program(decision, c), &m.integers, m.enumeration_cap)
                    .map_err(|e| match e {
                        LpError::EnumerationTooLarge { assignments, cap } => {
                            ProblemError::EnumerationTooLarge { assignments, cap }
                        }
                        other => other.into(),
                    })?;
                self.lp_value(sol, x, xi)
            }
            Recourse::Cfl(cfl) => cfl.value(decision, c)?.ok_or_else(infeasible),
            Recourse::Knapsack(k) => k.value(c[0]).ok_or_else(infeasible),
            Recourse::Custom(f) => Ok(f(decision, xi)),
        }
    }

    /// `Q(x, ξ)` in minimization form: negated for maximization instances.
    pub fn recourse_cost(&self, x: usize, xi: &Scenario) -> Result<f64, ProblemError> {
        let q = self.second_stage(x, xi)?;
        Ok(match self.orientation {
            Orientation::Minimize => q,
            Orientation::Maximize => -q,
        })
    }

    /// `g(x) + Q(x, ξ)` in minimization form.
    pub fn total_cost(&self, x: usize, xi: &Scenario) -> Result<f64, ProblemError> {
        Ok(self.first_stage_costs[x] + self.recourse_cost(x, xi)?)
    }

    /// `x*(ξ)`, the lowest-index minimizer of `g(x) + Q(x, ξ)`.
    pub fn optimal_first_stage(&self, xi: &Scenario) -> Result<usize, ProblemError> {
        let mut best = (0, self.total_cost(0, xi)?);
        for x in 1..self.candidates.len() {
            let v = self.total_cost(x, xi)?;
            if v < best.1 {
                best = (x, v);
            }
        }
        Ok(best.0)
    }

    /// `v(P)` by enumerating X; minimization form.
    pub fn expected_value(&self, dist: &DiscreteDistribution) -> Result<ValueSolution, ProblemError> {
        let mut best: Option<ValueSolution> = None;
        for x in 0..self.candidates.len() {
            let mut v = self.first_stage_costs[x];
            for (atom, w) in dist.iter() {
                v += w * self.recourse_cost(x, atom)?;
            }
            if best.is_none_or(|b| v < b.value) {
                best = Some(ValueSolution { value: v, minimizer: x });
            }
        }
        Ok(best.expect("X is nonempty"))
    }

    /// LP relaxation of the recourse problem in minimization form.
    pub fn relaxed_recourse_cost(&self, x: usize, xi: &Scenario) -> Result<f64, ProblemError> {
        self.check(x, xi)?;
        let decision = &self.candidates[x];
        match &self.recourse {
            Recourse::Lp(lp) => self.lp_value(lp.solve(decision, xi.coords())?, x, xi),
            Recourse::Milp(m) => self.lp_value(m.relaxation.solve(decision, xi.coords())?, x, xi),
            Recourse::Knapsack(k) => {
                let relax = k.relaxation();
                self.lp_value(relax.solve(&[], xi.coords())?, x, xi)
            }
            _ => Err(ProblemError::NoRelaxation),
        }
    }

    /// The continuous recourse LP (or the LP relaxation of a MILP recourse).
    pub fn recourse_lp(&self) -> Option<FixedRecourseLp> {
        match &self.recourse {
            Recourse::Lp(lp) => Some(lp.clone()),
            Recourse::Milp(m) => Some(m.relaxation.clone()),
            Recourse::Knapsack(k) => Some(k.relaxation()),
            _ => None,
        }
    }
}

/// `Q(x, ξ_i)` in minimization form for every candidate and every atom of a
/// support, evaluated once.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecourseTable {
    /// `values[x][i]`.
    pub values: Vec<Vec<f64>>,
    pub first_stage_costs: Vec<f64>,
}

impl RecourseTable {
    pub fn compute(instance: &TwoStageInstance, support: &[Scenario]) -> Result<Self, ProblemError> {
        let values = (0..instance.candidates().len())
            .map(|x| support.iter().map(|xi| instance.recourse_cost(x, xi)).collect())
            .collect::<Result<_, _>>()?;
        Ok(Self {
            values,
            first_stage_costs: instance.first_stage_costs.clone(),
        })
    }

    pub fn candidates(&self) -> usize {
        self.values.len()
    }

    pub fn atoms(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn recourse(&self, x: usize, i: usize) -> f64 {
        self.values[x][i]
    }

    pub fn total(&self, x: usize, i: usize) -> f64 {
        self.first_stage_costs[x] + self.values[x][i]
    }

    /// Lowest-index minimizer of `g(x) + Q(x, ξ_i)`, same rule as
    /// [`TwoStageInstance::optimal_first_stage`].
    pub fn optimal_first_stage(&self, i: usize) -> usize {
        let mut best = (0, self.total(0, i));
        for x in 1..self.candidates() {
            let v = self.total(x, i);
            if v < best.1 {
                best = (x, v);
            }
        }
        best.0
    }
}

/// Newsvendor: `g(x) = c·x`, `Q(x, ξ) = h·(x − ξ)⁺ + p·(ξ − x)⁺` over the
/// order quantities in `grid`.
pub fn build_newsvendor(order_cost: f64, holding: f64, penalty: f64, grid: &[f64]) -> Result<TwoStageInstance, ProblemError> {
    if [order_cost, holding, penalty].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return invalid("newsvendor costs must be finite and nonnegative");
    }
    TwoStageInstance::new(
        "newsvendor",
        1,
        grid.iter().map(|&x| vec![x]).collect(),
        grid.iter().map(|&x| order_cost * x).collect(),
        Recourse::Newsvendor { holding, penalty },
        Orientation::Minimize,
    )
}

/// Fixed-recourse LP second stage over explicit candidates.
pub fn build_fixed_recourse_lp(
    lp: FixedRecourseLp,
    dim: usize,
    candidates: Vec<Vec<f64>>,
    first_stage_costs: Vec<f64>,
) -> Result<TwoStageInstance, ProblemError> {
    let len = candidates.first().map_or(0, Vec::len);
    FixedRecourseLp::new(lp.cost.clone(), lp.recourse.clone(), lp.rhs.clone(), lp.technology.clone(), dim, len)?;
    TwoStageInstance::new(
        "fixed-recourse-lp",
        dim,
        candidates,
        first_stage_costs,
        Recourse::Lp(lp),
        Orientation::Minimize,
    )
}

/// Single-sourcing CFL. Candidates are facility-opening 0/1 vectors and
/// `opening_costs[i]` is charged for each open facility.
pub fn build_cfl_single_source(
    costs: Vec<Vec<f64>>,
    capacities: Vec<f64>,
    opening_costs: Vec<f64>,
    candidates: Vec<Vec<f64>>,
) -> Result<TwoStageInstance, ProblemError> {
    let facilities = costs.len();
    let customers = costs.first().map_or(0, Vec::len);
    if facilities == 0 || customers == 0 || costs.iter().any(|r| r.len() != customers) {
        return invalid("CFL cost matrix must be a nonempty facilities x customers table");
    }
    if costs.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return invalid("CFL unit costs must be finite and nonnegative");
    }
    if capacities.len() != facilities || opening_costs.len() != facilities {
        return invalid("one capacity and one opening cost per facility");
    }
    if candidates.iter().any(|y| y.len() != facilities || y.iter().any(|v| *v != 0.0 && *v != 1.0)) {
        return invalid("CFL candidates must be 0/1 facility vectors");
    }
    let g = candidates
        .iter()
        .map(|y| y.iter().zip(&opening_costs).map(|(a, b)| a * b).sum())
        .collect();
    TwoStageInstance::new(
        "cfl-single-source",
        customers,
        candidates,
        g,
        Recourse::Cfl(CflRecourse {
            costs,
            capacities,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }),
        Orientation::Minimize,
    )
}

/// Unbounded knapsack with uncertain capacity and a single fixed first stage.
pub fn build_unbounded_knapsack(weights: Vec<u64>, values: Vec<f64>) -> Result<TwoStageInstance, ProblemError> {
    let k = KnapsackRecourse::new(weights, values)?;
    TwoStageInstance::new(
        "unbounded-knapsack",
        1,
        vec![vec![0.0]],
        vec![0.0],
        Recourse::Knapsack(k),
        Orientation::Maximize,
    )
}

/// Unit-commitment toy data. Scenario coordinate `t` is the demand `D_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCommitmentSpec {
    pub generation_costs: Vec<f64>,
    pub min_output: Vec<f64>,
    pub max_output: Vec<f64>,
    pub ramp_up: Vec<f64>,
    pub ramp_down: Vec<f64>,
    pub shed_penalty: f64,
    pub periods: usize,
    /// Cost per committed unit-period, the first-stage cost.
    pub commitment_costs: Vec<f64>,
    /// Candidate commitments, each `units × periods` row-major 0/1 values.
    pub commitments: Vec<Vec<f64>>,
}

/// Unit commitment with continuous dispatch: the second stage is an LP.
///
/// Recourse variables are ordered as dispatch `p_it`, shedding `s_t`, then
/// the slacks of the lower/upper output bounds and the ramp limits. The
/// first `periods` rows are the demand balances.
pub fn build_unit_commitment_toy(spec: &UnitCommitmentSpec) -> Result<TwoStageInstance, ProblemError> {
    let units = spec.generation_costs.len();
    let periods = spec.periods;
    if units == 0 || periods == 0 {
        return invalid("unit commitment needs at least one unit and one period");
    }
    for v in [&spec.min_output, &spec.max_output, &spec.ramp_up, &spec.ramp_down, &spec.commitment_costs] {
        if v.len() != units {
            return invalid("per-unit parameter vectors must have one entry per unit");
        }
    }
    if spec.commitments.iter().any(|u| u.len() != units * periods || u.iter().any(|v| *v != 0.0 && *v != 1.0)) {
        return invalid("commitments must be units x periods 0/1 vectors");
    }
    let ramps = periods.saturating_sub(1);
    let n_p = units * periods;
    let n = n_p + periods + 2 * n_p + 2 * units * ramps;
    let p_idx = |i: usize, t: usize| i * periods + t;
    let s_idx = |t: usize| n_p + t;
    let lo_idx = |i: usize, t: usize| n_p + periods + p_idx(i, t);
    let hi_idx = |i: usize, t: usize| 2 * n_p + periods + p_idx(i, t);
    let up_idx = |i: usize, t: usize| 3 * n_p + periods + i * ramps + (t - 1);
    let dn_idx = |i: usize, t: usize| 3 * n_p + periods + units * ramps + i * ramps + (t - 1);

    let mut cost = vec![0.0; n];
    for i in 0..units {
        for t in 0..periods {
            cost[p_idx(i, t)] = spec.generation_costs[i];
        }
    }
    for t in 0..periods {
        cost[s_idx(t)] = spec.shed_penalty;
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut h0 = Vec::new();
    let mut h_slope = Vec::new();
    let mut t0 = Vec::new();
    let zero_x = vec![0.0; n_p];
    for t in 0..periods {
        let mut row = vec![0.0; n];
        for i in 0..units {
            row[p_idx(i, t)] = 1.0;
        }
        row[s_idx(t)] = 1.0;
        rows.push(row);
        h0.push(0.0);
        let mut slope = vec![0.0; periods];
        slope[t] = 1.0;
        h_slope.push(slope);
        t0.push(zero_x.clone());
    }
    for i in 0..units {
        for t in 0..periods {
            // p − lo = p_min·u
            let mut row = vec![0.0; n];
            row[p_idx(i, t)] = 1.0;
            row[lo_idx(i, t)] = -1.0;
            rows.push(row);
            h0.push(0.0);
            h_slope.push(vec![0.0; periods]);
            let mut trow = zero_x.clone();
            trow[p_idx(i, t)] = -spec.min_output[i];
            t0.push(trow);
            // p + hi = p_max·u
            let mut row = vec![0.0; n];
            row[p_idx(i, t)] = 1.0;
            row[hi_idx(i, t)] = 1.0;
            rows.push(row);
            h0.push(0.0);
            h_slope.push(vec![0.0; periods]);
            let mut trow = zero_x.clone();
            trow[p_idx(i, t)] = -spec.max_output[i];
            t0.push(trow);
        }
        for t in 1..periods {
            let mut row = vec![0.0; n];
            row[p_idx(i, t)] = 1.0;
            row[p_idx(i, t - 1)] = -1.0;
            row[up_idx(i, t)] = 1.0;
            rows.push(row);
            h0.push(spec.ramp_up[i]);
            h_slope.push(vec![0.0; periods]);
            t0.push(zero_x.clone());
            let mut row = vec![0.0; n];
            row[p_idx(i, t)] = -1.0;
            row[p_idx(i, t - 1)] = 1.0;
            row[dn_idx(i, t)] = 1.0;
            rows.push(row);
            h0.push(spec.ramp_down[i]);
            h_slope.push(vec![0.0; periods]);
            t0.push(zero_x.clone());
        }
    }
    let lp = FixedRecourseLp::new(
        cost,
        rows,
        AffineVector {
            constant: h0,
            slope: h_slope,
        },
        AffineMatrix::constant(t0),
        periods,
        n_p,
    )?;
    let g = spec
        .commitments
        .iter()
        .map(|u| (0..units).map(|i| spec.commitment_costs[i] * u[i * periods..(i + 1) * periods].iter().sum::<f64>()).sum())
        .collect();
    TwoStageInstance::new("unit-commitment", periods, spec.commitments.clone(), g, Recourse::Lp(lp), Orientation::Minimize)
}

/// Network-design toy data. Each scenario coordinate `k` is the demand of
/// `sinks[k] = (node, commodity)`, supplied by that commodity's source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDesignSpec {
    pub nodes: usize,
    pub arcs: Vec<(usize, usize)>,
    /// `arc_costs[a][c]`, unit cost of commodity `c` on arc `a`.
    pub arc_costs: Vec<Vec<f64>>,
    pub capacities: Vec<u32>,
    pub opening_costs: Vec<f64>,
    pub sources: Vec<usize>,
    pub sinks: Vec<(usize, usize)>,
    /// Candidate designs, 0/1 per arc.
    pub designs: Vec<Vec<f64>>,
}

impl NetworkDesignSpec {
    pub fn commodities(&self) -> usize {
        self.sources.len()
    }

    /// Net demand `d_vc(ξ)` (inflow minus outflow), indexed `v * C + c`.
    pub fn demands(&self, xi: &[f64]) -> Vec<f64> {
        let c_count = self.commodities();
        let mut d = vec![0.0; self.nodes * c_count];
        for (k, &(v, c)) in self.sinks.iter().enumerate() {
            d[v * c_count + c] += xi[k];
            d[self.sources[c] * c_count + c] -= xi[k];
        }
        d
    }
}

/// Capacitated network design with integer flows; the second stage is a
/// MILP solved by enumeration. The first `nodes × commodities` rows are flow
/// conservation, followed by one capacity row per arc.
pub fn build_network_design_toy(spec: &NetworkDesignSpec) -> Result<TwoStageInstance, ProblemError> {
    let a_count = spec.arcs.len();
    let c_count = spec.commodities();
    let v_count = spec.nodes;
    if a_count == 0 || c_count == 0 || spec.sinks.is_empty() {
        return invalid("network design needs arcs, commodities and sinks");
    }
    if spec.arcs.iter().any(|&(u, v)| u >= v_count || v >= v_count || u == v) {
        return invalid("arc endpoints must be distinct existing nodes");
    }
    if spec.arc_costs.len() != a_count || spec.arc_costs.iter().any(|r| r.len() != c_count) {
        return invalid("arc_costs must be arcs x commodities");
    }
    if spec.capacities.len() != a_count || spec.opening_costs.len() != a_count {
        return invalid("one capacity and one opening cost per arc");
    }
    if spec.sources.iter().any(|&s| s >= v_count) || spec.sinks.iter().any(|&(v, c)| v >= v_count || c >= c_count) {
        return invalid("sources and sinks must reference existing nodes and commodities");
    }
    if spec.designs.iter().any(|x| x.len() != a_count || x.iter().any(|v| *v != 0.0 && *v != 1.0)) {
        return invalid("designs must be 0/1 arc vectors");
    }
    let dim = spec.sinks.len();
    let y_idx = |a: usize, c: usize| a * c_count + c;
    let n = a_count * c_count + a_count;
    let mut cost = vec![0.0; n];
    for a in 0..a_count {
        for c in 0..c_count {
            cost[y_idx(a, c)] = spec.arc_costs[a][c];
        }
    }
    let mut rows = Vec::new();
    let mut slope = Vec::new();
    for v in 0..v_count {
        for c in 0..c_count {
            let mut row = vec![0.0; n];
            for (a, &(from, to)) in spec.arcs.iter().enumerate() {
                if to == v {
                    row[y_idx(a, c)] += 1.0;
                }
                if from == v {
                    row[y_idx(a, c)] -= 1.0;
                }
            }
            rows.push(row);
            let mut s = vec![0.0; dim];
            for (k, &(sink, sc)) in spec.sinks.iter().enumerate() {
                if sc == c {
                    if sink == v {
                        s[k] += 1.0;
                    }
                    if spec.sources[c] == v {
                        s[k] -= 1.0;
                    }
                }
            }
            slope.push(s);
        }
    }
    let mut t0 = vec![vec![0.0; a_count]; v_count * c_count];
    for a in 0..a_count {
        let mut row = vec![0.0; n];
        for c in 0..c_count {
            row[y_idx(a, c)] = 1.0;
        }
        row[a_count * c_count + a] = 1.0;
        rows.push(row);
        slope.push(vec![0.0; dim]);
        let mut trow = vec![0.0; a_count];
        trow[a] = -(spec.capacities[a] as f64);
        t0.push(trow);
    }
    let m = rows.len();
    let relaxation = FixedRecourseLp::new(
        cost,
        rows,
        AffineVector {
            constant: vec![0.0; m],
            slope,
        },
        AffineMatrix::constant(t0),
        dim,
        a_count,
    )?;
    let integers = (0..a_count)
        .flat_map(|a| (0..c_count).map(move |c| (a, c)))
        .map(|(a, c)| IntegerBox::new(y_idx(a, c), 0, spec.capacities[a] as i64))
        .collect();
    let g = spec
        .designs
        .iter()
        .map(|x| x.iter().zip(&spec.opening_costs).map(|(a, b)| a * b).sum())
        .collect();
    TwoStageInstance::new(
        "network-design",
        dim,
        spec.designs.clone(),
        g,
        Recourse::Milp(FixedRecourseMilp {
            relaxation,
            integers,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }),
        Orientation::Minimize,
    )
}
