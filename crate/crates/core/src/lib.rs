//! Problem-dependent optimal transport for two-stage stochastic programs.
//!
//! Two-stage programs here have a finite first-stage candidate list, so the
//! optimal value `v(P)`, the regret `R(ξ, ξ')` and every transport cost can
//! be computed exactly at desk scale. The crate checks regret-domination
//! certificates `R ≤ β·c` and the resulting value-stability bounds
//! `v(P) − v(ν) ≤ β·𝒯_c(P, ν)`, and reduces scenario sets under the same
//! ground costs.

pub mod catalog;
pub mod costs;
pub mod lp;
pub mod measures;
pub mod otsolve;
pub mod problems;
pub mod reduce;
pub mod regret;
pub mod stability;

pub use costs::{BuiltCost, GroundCostSpec, Taint};
pub use measures::{DiscreteDistribution, Scenario};
pub use otsolve::{transport_cost, CostMatrix, TransportPlan};
pub use problems::{Orientation, Recourse, TwoStageInstance};
pub use reduce::{ReductionMethod, ReductionResult};
pub use regret::{DominationCertificate, RegretMatrix};
pub use stability::StabilityReport;
