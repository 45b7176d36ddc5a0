//! Exact discrete optimal transport for arbitrary non-negative ground costs.
//!
//! Costs may be asymmetric and may contain `+∞` entries (forbidden moves).
//! The transportation LP is solved with [`crate::lp::solve`]; arcs with
//! infinite cost are simply left out, and if the remaining arcs cannot carry
//! the marginals the transport cost is `+∞`.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus};
use crate::measures::{union_support, DiscreteDistribution, Scenario};

/// Marginal tolerance of returned plans.
pub const MARGINAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OtError {
    #[error("cost matrix is {found_rows}x{found_cols}, expected {rows}x{cols}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        found_rows: usize,
        found_cols: usize,
    },
    #[error("cost entry ({row}, {col}) = {value} is negative or NaN")]
    InvalidEntry { row: usize, col: usize, value: f64 },
    #[error("distributions live in dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("Wasserstein order must be a finite p >= 1, got {0}")]
    InvalidOrder(f64),
    #[error("test function is not 1-Lipschitz between {a} and {b}: |f(a) - f(b)| = {gap}, distance {distance}")]
    LipschitzViolation {
        a: Scenario,
        b: Scenario,
        gap: f64,
        distance: f64,
    },
    #[error("cannot parse cost matrix: {0}")]
    Parse(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Ground cost evaluated on two supports, row-major, entries in `[0, +∞]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    symmetric: bool,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, OtError> {
        if entries.len() != rows * cols {
            return Err(OtError::ShapeMismatch {
                rows,
                cols,
                found_rows: entries.len() / cols.max(1),
                found_cols: cols,
            });
        }
        if let Some(k) = entries.iter().position(|v| v.is_nan() || *v < 0.0) {
            return Err(OtError::InvalidEntry {
                row: k / cols,
                col: k % cols,
                value: entries[k],
            });
        }
        let symmetric = rows == cols
            && (0..rows).all(|i| (0..i).all(|j| entries[i * cols + j] == entries[j * cols + i]));
        Ok(Self {
            rows,
            cols,
            entries,
            symmetric,
        })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Result<Self, OtError> {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Self::new(rows, cols, entries)
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, OtError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(OtError::Parse("ragged rows".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// True iff square and exactly symmetric. Always recomputed.
    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i)).expect("transpose of a valid matrix")
    }

    pub fn scaled(&self, t: f64) -> Result<Self, OtError> {
        Self::new(self.rows, self.cols, self.entries.iter().map(|v| v * t).collect())
    }

    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        Self::from_fn(row_idx.len(), col_idx.len(), |i, j| self.get(row_idx[i], col_idx[j]))
            .expect("submatrix of a valid matrix")
    }

    /// Plain text: a `rows cols` header, then one whitespace-separated row per
    /// line. `+∞` is written as `inf`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let line = self
                .row(i)
                .iter()
                .map(|v| if v.is_infinite() { "inf".to_string() } else { format!("{v}") })
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OtError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| OtError::Parse("missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| OtError::Parse(format!("bad header token {t:?}"))))
            .collect::<Result<_, _>>()?;
        let [rows, cols] = dims[..] else {
            return Err(OtError::Parse("header must be `rows cols`".into()));
        };
        let mut entries = Vec::with_capacity(rows * cols);
        for (line_no, line) in lines.enumerate() {
            let before = entries.len();
            for tok in line.split_whitespace() {
                let v = match tok {
                    "inf" => f64::INFINITY,
                    _ => tok
                        .parse()
                        .map_err(|_| OtError::Parse(format!("line {}: bad entry {tok:?}", line_no + 2)))?,
                };
                entries.push(v);
            }
            if entries.len() - before != cols {
                return Err(OtError::Parse(format!("line {}: expected {cols} entries", line_no + 2)));
            }
        }
        if entries.len() != rows * cols {
            return Err(OtError::Parse(format!("expected {rows} rows")));
        }
        Self::new(rows, cols, entries)
    }
}

/// An optimal coupling. `plan` is row-major and empty when no finite-cost
/// coupling exists, in which case `cost` is `+∞`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub plan: Vec<f64>,
    pub cost: f64,
}

impl TransportPlan {
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }

    pub fn is_feasible(&self) -> bool {
        self.cost.is_finite()
    }
}

/// Minimum of `Σ C[i][j] π[i][j]` over couplings of `source` and `target`.
pub fn transport_cost(
    source: &DiscreteDistribution,
    target: &DiscreteDistribution,
    cost: &CostMatrix,
) -> Result<TransportPlan, OtError> {
    let (n, m) = (source.len(), target.len());
    if cost.rows() != n || cost.cols() != m {
        return Err(OtError::ShapeMismatch {
            rows: n,
            cols: m,
            found_rows: cost.rows(),
            found_cols: cost.cols(),
        });
    }
    let infeasible = TransportPlan {
        rows: n,
        cols: m,
        plan: Vec::new(),
        cost: f64::INFINITY,
    };
    // zero-weight atoms drop out and come back as zero rows/columns
    let src: Vec<usize> = (0..n).filter(|&i| source.weights()[i] > 0.0).collect();
    let dst: Vec<usize> = (0..m).filter(|&j| target.weights()[j] > 0.0).collect();
    let arcs: Vec<(usize, usize)> = src
        .iter()
        .flat_map(|&i| dst.iter().map(move |&j| (i, j)))
        .filter(|&(i, j)| cost.get(i, j).is_finite())
        .collect();
    if src.iter().any(|&i| !arcs.iter().any(|a| a.0 == i)) || dst.iter().any(|&j| !arcs.iter().any(|a| a.1 == j)) {
        return Ok(infeasible);
    }

    let mut matrix = Vec::with_capacity(src.len() + dst.len());
    let mut rhs = Vec::with_capacity(src.len() + dst.len());
    for &i in &src {
        matrix.push(arcs.iter().map(|a| if a.0 == i { 1.0 } else { 0.0 }).collect());
        rhs.push(source.weights()[i]);
    }
    for &j in &dst {
        matrix.push(arcs.iter().map(|a| if a.1 == j { 1.0 } else { 0.0 }).collect());
        rhs.push(target.weights()[j]);
    }
    let objective = arcs.iter().map(|&(i, j)| cost.get(i, j)).collect();
    let sol = lp::solve(&LinearProgram::new(objective, matrix, rhs)?)?;
    if sol.status != LpStatus::Optimal {
        return Ok(infeasible);
    }
    let mut plan = vec![0.0; n * m];
    for (&(i, j), &x) in arcs.iter().zip(&sol.primal) {
        plan[i * m + j] = x;
    }
    let total = arcs
        .iter()
        .zip(&sol.primal)
        .map(|(&(i, j), &x)| if x > 0.0 { cost.get(i, j) * x } else { 0.0 })
        .sum();
    Ok(TransportPlan {
        rows: n,
        cols: m,
        plan,
        cost: total,
    })
}

/// Euclidean distances between two supports raised to `power`.
pub fn distance_matrix(source: &[Scenario], target: &[Scenario], power: f64) -> Result<CostMatrix, OtError> {
    CostMatrix::from_fn(source.len(), target.len(), |i, j| {
        source[i].euclidean_distance(&target[j]).powf(power)
    })
}

/// `W_p(P, Q)` with the Euclidean ground metric.
pub fn wasserstein_p(p_dist: &DiscreteDistribution, q_dist: &DiscreteDistribution, order: f64) -> Result<f64, OtError> {
    if p_dist.dim() != q_dist.dim() {
        return Err(OtError::DimensionMismatch(p_dist.dim(), q_dist.dim()));
    }
    if !(order.is_finite() && order >= 1.0) {
        return Err(OtError::InvalidOrder(order));
    }
    let cost = distance_matrix(p_dist.atoms(), q_dist.atoms(), order)?;
    let plan = transport_cost(p_dist, q_dist, &cost)?;
    Ok(plan.cost.max(0.0).powf(1.0 / order))
}

/// `|∫f dP − ∫f dQ|` for a test function `f` that is 1-Lipschitz on the
/// union of the supports. Any such value is a lower bound on `W_1(P, Q)`.
pub fn fm1_lower_bound<F: Fn(&Scenario) -> f64>(
    p_dist: &DiscreteDistribution,
    q_dist: &DiscreteDistribution,
    f: F,
) -> Result<f64, OtError> {
    if p_dist.dim() != q_dist.dim() {
        return Err(OtError::DimensionMismatch(p_dist.dim(), q_dist.dim()));
    }
    let support = union_support(p_dist, q_dist);
    let values: Vec<f64> = support.iter().map(&f).collect();
    for i in 0..support.len() {
        for j in (i + 1)..support.len() {
            let gap = (values[i] - values[j]).abs();
            let distance = support[i].euclidean_distance(&support[j]);
            if gap > distance + 1e-9 {
                return Err(OtError::LipschitzViolation {
                    a: support[i].clone(),
                    b: support[j].clone(),
                    gap,
                    distance,
                });
            }
        }
    }
    Ok((p_dist.expectation(&f) - q_dist.expectation(&f)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(points: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::uniform(points.iter().map(|&v| Scenario::scalar(v)).collect()).unwrap()
    }

    #[test]
    fn self_transport_is_free() {
        let p = uniform(&[1.0, 2.0, 4.0]);
        let c = distance_matrix(p.atoms(), p.atoms(), 1.0).unwrap();
        let plan = transport_cost(&p, &p, &c).unwrap();
        assert_eq!(plan.cost, 0.0);
        for i in 0..3 {
            assert!((plan.mass(i, i) - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn diracs_force_the_coupling() {
        let p = uniform(&[0.0]);
        let q = uniform(&[3.0]);
        let c = CostMatrix::new(1, 1, vec![7.5]).unwrap();
        let plan = transport_cost(&p, &q, &c).unwrap();
        assert_eq!(plan.cost, 7.5);
        assert_eq!(plan.plan, vec![1.0]);
    }

    #[test]
    fn infinite_entries_block_arcs() {
        let p = uniform(&[0.0, 1.0]);
        let inf = f64::INFINITY;
        // only the anti-diagonal is allowed
        let c = CostMatrix::from_rows(vec![vec![inf, 2.0], vec![3.0, inf]]).unwrap();
        let plan = transport_cost(&p, &p, &c).unwrap();
        assert!((plan.cost - 2.5).abs() < 1e-12);
        // nothing can leave atom 0
        let c = CostMatrix::from_rows(vec![vec![inf, inf], vec![0.0, 0.0]]).unwrap();
        let plan = transport_cost(&p, &p, &c).unwrap();
        assert_eq!(plan.cost, inf);
        assert!(plan.plan.is_empty());
    }

    #[test]
    fn zero_weight_atoms_come_back_as_zero_rows() {
        let p = DiscreteDistribution::new(vec![Scenario::scalar(0.0), Scenario::scalar(5.0)], vec![1.0, 0.0]).unwrap();
        let q = uniform(&[1.0]);
        let c = distance_matrix(p.atoms(), q.atoms(), 1.0).unwrap();
        let plan = transport_cost(&p, &q, &c).unwrap();
        assert_eq!(plan.cost, 1.0);
        assert_eq!(plan.plan, vec![1.0, 0.0]);
    }

    #[test]
    fn shape_is_checked() {
        let p = uniform(&[0.0, 1.0]);
        let c = CostMatrix::new(1, 1, vec![0.0]).unwrap();
        assert!(matches!(transport_cost(&p, &p, &c), Err(OtError::ShapeMismatch { .. })));
    }

    #[test]
    fn cost_matrix_validation_and_symmetry() {
        assert!(CostMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap().is_symmetric());
        assert!(!CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap().is_symmetric());
        assert!(!CostMatrix::from_rows(vec![vec![0.0, 1.0]]).unwrap().is_symmetric());
    }

    #[test]
    fn text_format_with_infinity() {
        let c = CostMatrix::from_rows(vec![vec![0.0, f64::INFINITY], vec![1.5, 0.0]]).unwrap();
        let text = c.to_text();
        assert_eq!(text, "2 2\n0 inf\n1.5 0\n");
        assert_eq!(CostMatrix::from_text(&text).unwrap(), c);
        assert!(CostMatrix::from_text("2 2\n0 1\n").is_err());
        assert!(CostMatrix::from_text("1 2\n0 x\n").is_err());
    }

    #[test]
    fn wasserstein_of_diracs() {
        let a = DiscreteDistribution::dirac(Scenario::new(vec![0.0, 0.0]).unwrap());
        let b = DiscreteDistribution::dirac(Scenario::new(vec![3.0, 4.0]).unwrap());
        for p in [1.0, 1.5, 2.0, 3.0] {
            assert!((wasserstein_p(&a, &b, p).unwrap() - 5.0).abs() < 1e-12);
        }
        assert_eq!(wasserstein_p(&a, &a, 2.0).unwrap(), 0.0);
        assert!(matches!(wasserstein_p(&a, &b, 0.5), Err(OtError::InvalidOrder(_))));
        assert!(matches!(wasserstein_p(&a, &uniform(&[1.0]), 1.0), Err(OtError::DimensionMismatch(2, 1))));
    }

    #[test]
    fn fm1_witnesses() {
        let p = uniform(&[0.0]);
        let q = uniform(&[3.0]);
        assert_eq!(fm1_lower_bound(&p, &q, |_| 4.0).unwrap(), 0.0);
        assert_eq!(fm1_lower_bound(&p, &q, |s| s.coords()[0]).unwrap(), 3.0);
        assert!(matches!(
            fm1_lower_bound(&p, &q, |s| 2.0 * s.coords()[0]),
            Err(OtError::LipschitzViolation { .. })
        ));
    }
}
