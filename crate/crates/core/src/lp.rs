//! Dense two-phase primal simplex for small equality-form LPs
//! `min qᵀz  s.t.  Wz = b, z ≥ 0`, with dual extraction, a bound on the dual
//! feasible polytope and a brute-force mixed-integer driver.
//!
//! Pivoting follows Bland's rule, so the solver terminates on degenerate
//! problems and is deterministic. It is meant for desk-scale instances (tens
//! of rows, a few hundred columns).

use itertools::Itertools;
use serde::Serialize;
use thiserror::Error;

/// Primal feasibility tolerance.
pub const FEAS_TOL: f64 = 1e-8;
/// Strong-duality tolerance.
pub const DUALITY_TOL: f64 = 1e-7;
/// Default cap on the number of integer assignments enumerated by
/// [`milp_solve_bruteforce`].
pub const DEFAULT_ENUMERATION_CAP: usize = 1_000_000;

const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("objective has {objective} entries but the matrix has {columns} columns")]
    ColumnMismatch { objective: usize, columns: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow { row: usize, found: usize, expected: usize },
    #[error("rhs has {rhs} entries but the matrix has {rows} rows")]
    RowMismatch { rhs: usize, rows: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("simplex hit the iteration cap of {0}")]
    CyclingGuardExceeded(usize),
    #[error("dual feasible set {{π : Wᵀπ ≤ q}} is empty")]
    DualInfeasible,
    #[error("{assignments} integer assignments exceed the enumeration cap {cap}")]
    EnumerationTooLarge { assignments: u128, cap: usize },
    #[error("integer variable index {0} out of range")]
    BadIntegerVariable(usize),
}

/// `min qᵀz  s.t.  Wz = b, z ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, eq_matrix: Vec<Vec<f64>>, rhs: Vec<f64>) -> Result<Self, LpError> {
        let lp = Self {
            objective,
            eq_matrix,
            rhs,
        };
        lp.validate()?;
        Ok(lp)
    }

    pub fn rows(&self) -> usize {
        self.eq_matrix.len()
    }

    pub fn cols(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.cols();
        if self.rhs.len() != self.rows() {
            return Err(LpError::RowMismatch {
                rhs: self.rhs.len(),
                rows: self.rows(),
            });
        }
        for (row, r) in self.eq_matrix.iter().enumerate() {
            if r.len() != n {
                return Err(LpError::RaggedRow {
                    row,
                    found: r.len(),
                    expected: n,
                });
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("objective"));
        }
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("rhs"));
        }
        if self.eq_matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("matrix"));
        }
        Ok(())
    }

    /// `max_i |(Wz - b)_i|`.
    pub fn primal_residual(&self, z: &[f64]) -> f64 {
        self.eq_matrix
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| (dot(row, z) - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub primal: Vec<f64>,
    /// One multiplier per equality row; empty unless optimal.
    pub dual: Vec<f64>,
    /// `+∞` when infeasible, `-∞` when unbounded.
    pub objective_value: f64,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            primal: Vec::new(),
            dual: Vec::new(),
            objective_value: f64::INFINITY,
        }
    }

    fn unbounded() -> Self {
        Self {
            status: LpStatus::Unbounded,
            primal: Vec::new(),
            dual: Vec::new(),
            objective_value: f64::NEG_INFINITY,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// `|qᵀz - πᵀb|` for an optimal solution.
    pub fn duality_gap(&self, lp: &LinearProgram) -> f64 {
        (dot(&lp.objective, &self.primal) - dot(&self.dual, &lp.rhs)).abs()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Tableau {
    // m rows of n structural + m artificial columns, rhs kept separately
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    structural: usize,
    cap: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.rows[i][c] = 0.0;
            self.rhs[i] -= f * pivot_rhs;
            if self.rhs[i] < 0.0 && self.rhs[i] > -1e-12 {
                self.rhs[i] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        let mut d = cost[j];
        for (i, row) in self.rows.iter().enumerate() {
            d -= cost[self.basis[i]] * row[j];
        }
        d
    }

    /// Runs Bland-rule pivots with only structural columns eligible to enter.
    fn optimize(&mut self, cost: &[f64]) -> Result<PhaseEnd, LpError> {
        for _ in 0..self.cap {
            let entering = (0..self.structural)
                .find(|&j| !self.basis.contains(&j) && self.reduced_cost(cost, j) < -OPT_TOL);
            let Some(c) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs[i].max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12
                            || ((ratio - br).abs() <= 1e-12 && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match leave {
                None => return Ok(PhaseEnd::Unbounded),
                Some((r, _)) => self.pivot(r, c),
            }
        }
        Err(LpError::CyclingGuardExceeded(self.cap))
    }
}

/// Solves the LP to optimality, reporting infeasibility or unboundedness.
///
/// Duals are the simplex multipliers `c_Bᵀ B⁻¹` of the final basis, one per
/// original row (redundant rows receive multiplier 0).
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let m = lp.rows();
    let n = lp.cols();

    let signs: Vec<f64> = lp.rhs.iter().map(|&b| if b < 0.0 { -1.0 } else { 1.0 }).collect();
    let rows = lp
        .eq_matrix
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<f64> = r.iter().map(|v| v * signs[i]).collect();
            row.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let mut t = Tableau {
        rows,
        rhs: lp.rhs.iter().zip(&signs).map(|(b, s)| b * s).collect(),
        basis: (n..n + m).collect(),
        structural: n,
        cap: 50 * (m + n).max(1),
    };

    // phase 1: drive artificial mass to zero
    let phase1_cost: Vec<f64> = (0..n + m).map(|j| if j < n { 0.0 } else { 1.0 }).collect();
    t.optimize(&phase1_cost)?;
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= n).map(|i| t.rhs[i]).sum();
    let scale = 1.0 + lp.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if infeasibility > FEAS_TOL * scale {
        return Ok(LpSolution::infeasible());
    }
    for r in 0..m {
        if t.basis[r] < n {
            continue;
        }
        if let Some(c) = (0..n).find(|&j| !t.basis.contains(&j) && t.rows[r][j].abs() > PIVOT_TOL) {
            t.pivot(r, c);
        }
        // otherwise the row is redundant; its artificial stays basic at zero
    }

    // phase 2
    let cost: Vec<f64> = (0..n + m).map(|j| if j < n { lp.objective[j] } else { 0.0 }).collect();
    if let PhaseEnd::Unbounded = t.optimize(&cost)? {
        return Ok(LpSolution::unbounded());
    }

    let mut primal = vec![0.0; n];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n {
            primal[b] = t.rhs[i].max(0.0);
        }
    }
    let dual = (0..m)
        .map(|k| {
            let y: f64 = (0..m).map(|i| cost[t.basis[i]] * t.rows[i][n + k]).sum();
            y * signs[k]
        })
        .collect();
    let objective_value = dot(&lp.objective, &primal);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective_value,
    })
}

/// `M_π = sup { ‖π‖_∞ : Wᵀπ ≤ q }`, or `+∞` when the polytope is unbounded.
///
/// `w` is the `m × n` recourse matrix and `q` the `n`-vector of recourse costs.
/// Each coordinate is maximized and minimized by its own LP.
pub fn dual_inf_norm_bound(w: &[Vec<f64>], q: &[f64]) -> Result<f64, LpError> {
    let m = w.len();
    let n = q.len();
    for (row, r) in w.iter().enumerate() {
        if r.len() != n {
            return Err(LpError::RaggedRow {
                row,
                found: r.len(),
                expected: n,
            });
        }
    }
    // variables: π⁺ (m), π⁻ (m), slack (n); one equality per column of W
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut row = Vec::with_capacity(2 * m + n);
            row.extend((0..m).map(|i| w[i][j]));
            row.extend((0..m).map(|i| -w[i][j]));
            row.extend((0..n).map(|k| if k == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    let width = 2 * m + n;
    let feasibility = LinearProgram::new(vec![0.0; width], matrix.clone(), q.to_vec())?;
    if solve(&feasibility)?.status == LpStatus::Infeasible {
        return Err(LpError::DualInfeasible);
    }
    let mut bound = 0.0f64;
    for i in 0..m {
        for direction in [1.0, -1.0] {
            // minimize -direction·π_i
            let mut objective = vec![0.0; width];
            objective[i] = -direction;
            objective[m + i] = direction;
            let lp = LinearProgram::new(objective, matrix.clone(), q.to_vec())?;
            let sol = solve(&lp)?;
            match sol.status {
                LpStatus::Unbounded => return Ok(f64::INFINITY),
                LpStatus::Infeasible => return Err(LpError::DualInfeasible),
                LpStatus::Optimal => bound = bound.max(-sol.objective_value),
            }
        }
    }
    Ok(bound)
}

/// Integer variable with an inclusive enumeration box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IntegerBox {
    pub var: usize,
    pub lower: i64,
    pub upper: i64,
}

impl IntegerBox {
    pub fn new(var: usize, lower: i64, upper: i64) -> Self {
        Self { var, lower, upper }
    }

    fn size(&self) -> u128 {
        if self.upper < self.lower {
            0
        } else {
            (self.upper - self.lower) as u128 + 1
        }
    }
}

/// Exact MILP optimum by enumerating every integer assignment in the boxes and
/// solving the continuous remainder LP for each. Ties keep the first
/// assignment in lexicographic order. The returned dual belongs to the
/// remainder LP of the winning assignment.
pub fn milp_solve_bruteforce(
    lp: &LinearProgram,
    integer_vars: &[IntegerBox],
    cap: usize,
) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if integer_vars.is_empty() {
        return solve(lp);
    }
    let n = lp.cols();
    for ib in integer_vars {
        if ib.var >= n || integer_vars.iter().filter(|o| o.var == ib.var).count() > 1 {
            return Err(LpError::BadIntegerVariable(ib.var));
        }
    }
    let assignments = integer_vars
        .iter()
        .try_fold(1u128, |acc, ib| acc.checked_mul(ib.size()))
        .unwrap_or(u128::MAX);
    if assignments > cap as u128 {
        return Err(LpError::EnumerationTooLarge { assignments, cap });
    }

    let continuous: Vec<usize> = (0..n)
        .filter(|j| !integer_vars.iter().any(|ib| ib.var == *j))
        .collect();
    let sub_matrix: Vec<Vec<f64>> = lp
        .eq_matrix
        .iter()
        .map(|row| continuous.iter().map(|&j| row[j]).collect())
        .collect();
    let sub_objective: Vec<f64> = continuous.iter().map(|&j| lp.objective[j]).collect();

    let mut best: Option<LpSolution> = None;
    for values in integer_vars
        .iter()
        .map(|ib| ib.lower..=ib.upper)
        .multi_cartesian_product()
    {
        let rhs: Vec<f64> = lp
            .eq_matrix
            .iter()
            .zip(&lp.rhs)
            .map(|(row, b)| {
                b - integer_vars
                    .iter()
                    .zip(&values)
                    .map(|(ib, &v)| row[ib.var] * v as f64)
                    .sum::<f64>()
            })
            .collect();
        let fixed_cost: f64 = integer_vars
            .iter()
            .zip(&values)
            .map(|(ib, &v)| lp.objective[ib.var] * v as f64)
            .sum();
        let sub = LinearProgram {
            objective: sub_objective.clone(),
            eq_matrix: sub_matrix.clone(),
            rhs,
        };
        let sol = solve(&sub)?;
        match sol.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => return Ok(LpSolution::unbounded()),
            LpStatus::Optimal => {
                let value = fixed_cost + sol.objective_value;
                if best.as_ref().is_none_or(|b| value < b.objective_value - 1e-12) {
                    let mut primal = vec![0.0; n];
                    for (ib, &v) in integer_vars.iter().zip(&values) {
                        primal[ib.var] = v as f64;
                    }
                    for (k, &j) in continuous.iter().enumerate() {
                        primal[j] = sol.primal[k];
                    }
                    best = Some(LpSolution {
                        status: LpStatus::Optimal,
                        primal,
                        dual: sol.dual,
                        objective_value: value,
                    });
                }
            }
        }
    }
    Ok(best.unwrap_or_else(LpSolution::infeasible))
}
