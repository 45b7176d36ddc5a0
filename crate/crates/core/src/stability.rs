//! End-to-end checks of the value-stability bounds
//! `v(P) − v(ν) ≤ β·𝒯_c(P, ν)` and `v(ν) − v(P) ≤ β·𝒯_c(ν, P)`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::costs::{CostError, GroundCostSpec, Taint};
use crate::measures::{union_support, DiscreteDistribution, Scenario};
use crate::otsolve::{self, CostMatrix, OtError};
use crate::problems::{ProblemError, TwoStageInstance};
use crate::regret::{self, DominationCertificate, RegretError};

/// Default tolerance on the stability inequalities.
pub const STABILITY_TOL: f64 = 1e-7;
/// Allowed disagreement between the symmetric shortcut and the two-solve path.
pub const SHORTCUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("no violation-free domination certificate available")]
    CertificateMissing,
    #[error("certificate or cost matrix does not cover the supports: {0}")]
    SupportMismatch(String),
    #[error("cost matrix is not symmetric")]
    NotSymmetric,
    #[error("symmetric shortcut gives {shortcut}, two-sided path gives {general}")]
    ShortcutDisagreement { shortcut: f64, general: f64 },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Regret(#[from] RegretError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub v_p: f64,
    pub v_nu: f64,
    pub minimizer_p: usize,
    pub minimizer_nu: usize,
    /// `𝒯_c(P, ν)`, possibly `+∞`.
    pub t_forward: f64,
    /// `𝒯_c(ν, P)`, possibly `+∞`.
    pub t_backward: f64,
    pub beta: f64,
    pub lhs_forward: f64,
    pub lhs_backward: f64,
    pub bound_forward: f64,
    pub bound_backward: f64,
    pub forward_pass: bool,
    pub backward_pass: bool,
    /// `|v(P) − v(ν)| ≤ β·max{𝒯_c(P, ν), 𝒯_c(ν, P)}`.
    pub absolute_pass: bool,
    pub tolerance: f64,
    pub taint: Taint,
}

impl StabilityReport {
    pub fn passed(&self) -> bool {
        self.forward_pass && self.backward_pass && self.absolute_pass
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "v(P)        = {} (x index {})", self.v_p, self.minimizer_p)?;
        writeln!(f, "v(nu)       = {} (x index {})", self.v_nu, self.minimizer_nu)?;
        writeln!(f, "T_c(P, nu)  = {}", self.t_forward)?;
        writeln!(f, "T_c(nu, P)  = {}", self.t_backward)?;
        writeln!(f, "beta        = {}", self.beta)?;
        writeln!(
            f,
            "forward     {} <= {}  {}",
            self.lhs_forward,
            self.bound_forward,
            verdict(self.forward_pass)
        )?;
        writeln!(
            f,
            "backward    {} <= {}  {}",
            self.lhs_backward,
            self.bound_backward,
            verdict(self.backward_pass)
        )?;
        writeln!(
            f,
            "absolute    {} <= {}  {}",
            self.lhs_forward.abs(),
            self.bound_forward.max(self.bound_backward),
            verdict(self.absolute_pass)
        )?;
        write!(f, "constants   {}", if self.taint == Taint::Exact { "exact" } else { "estimate" })
    }
}

/// `β·T`, with `+∞` whenever `T` is.
fn bound(beta: f64, t: f64) -> f64 {
    if t.is_infinite() {
        f64::INFINITY
    } else {
        beta * t
    }
}

fn covers(cert: &DominationCertificate, dist: &DiscreteDistribution) -> bool {
    dist.atoms().iter().all(|a| cert.support.contains(a))
}

fn certified_beta(
    cert: Option<&DominationCertificate>,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
) -> Result<f64, StabilityError> {
    let cert = cert.ok_or(StabilityError::CertificateMissing)?;
    if !cert.is_valid() {
        return Err(StabilityError::CertificateMissing);
    }
    if !covers(cert, p) || !covers(cert, nu) {
        return Err(StabilityError::SupportMismatch(
            "certificate support must contain every atom of P and nu".into(),
        ));
    }
    Ok(cert.beta_hat)
}

fn check_shape(c: &CostMatrix, rows: usize, cols: usize, what: &str) -> Result<(), StabilityError> {
    if c.rows() != rows || c.cols() != cols {
        return Err(StabilityError::SupportMismatch(format!(
            "{what} cost is {}x{}, expected {rows}x{cols}",
            c.rows(),
            c.cols()
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    t_forward: f64,
    t_backward: f64,
    beta: f64,
    taint: Taint,
    tolerance: f64,
) -> Result<StabilityReport, StabilityError> {
    let sp = instance.expected_value(p)?;
    let sn = instance.expected_value(nu)?;
    let lhs_forward = sp.value - sn.value;
    let lhs_backward = sn.value - sp.value;
    let bound_forward = bound(beta, t_forward);
    let bound_backward = bound(beta, t_backward);
    Ok(StabilityReport {
        v_p: sp.value,
        v_nu: sn.value,
        minimizer_p: sp.minimizer,
        minimizer_nu: sn.minimizer,
        t_forward,
        t_backward,
        beta,
        lhs_forward,
        lhs_backward,
        bound_forward,
        bound_backward,
        forward_pass: lhs_forward <= bound_forward + tolerance,
        backward_pass: lhs_backward <= bound_backward + tolerance,
        absolute_pass: lhs_forward.abs() <= bound_forward.max(bound_backward) + tolerance,
        tolerance,
        taint,
    })
}

/// Evaluates both directed inequalities. `forward` is indexed by
/// `supp(P) × supp(ν)` and `backward` by `supp(ν) × supp(P)`; `cert` must be
/// violation-free and computed on a support containing both.
#[allow(clippy::too_many_arguments)]
pub fn check_stability(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    forward: &CostMatrix,
    backward: &CostMatrix,
    cert: Option<&DominationCertificate>,
    taint: Taint,
    tolerance: f64,
) -> Result<StabilityReport, StabilityError> {
    let beta = certified_beta(cert, p, nu)?;
    check_shape(forward, p.len(), nu.len(), "forward")?;
    check_shape(backward, nu.len(), p.len(), "backward")?;
    let t_forward = otsolve::transport_cost(p, nu, forward)?.cost;
    let t_backward = otsolve::transport_cost(nu, p, backward)?.cost;
    assemble(instance, p, nu, t_forward, t_backward, beta, taint, tolerance)
}

/// Row/column indices of each distribution's atoms inside `support`.
fn positions(support: &[Scenario], dist: &DiscreteDistribution) -> Result<Vec<usize>, StabilityError> {
    dist.atoms()
        .iter()
        .map(|a| {
            support
                .iter()
                .position(|s| s == a)
                .ok_or_else(|| StabilityError::SupportMismatch(format!("atom {a} missing from the cost support")))
        })
        .collect()
}

/// [`check_stability`] with both directed costs cut out of one matrix over
/// `support`, which must contain `supp(P) ∪ supp(ν)`.
#[allow(clippy::too_many_arguments)]
pub fn check_stability_on_support(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    support: &[Scenario],
    cost: &CostMatrix,
    cert: Option<&DominationCertificate>,
    taint: Taint,
    tolerance: f64,
) -> Result<StabilityReport, StabilityError> {
    check_shape(cost, support.len(), support.len(), "support")?;
    let ip = positions(support, p)?;
    let iv = positions(support, nu)?;
    check_stability(
        instance,
        p,
        nu,
        &cost.submatrix(&ip, &iv),
        &cost.submatrix(&iv, &ip),
        cert,
        taint,
        tolerance,
    )
}

/// `|v(P) − v(ν)| ≤ β·𝒯_c(P, ν)` for a symmetric cost over `support`, with a
/// single transport solve. The two-sided path is also run and must agree
/// within [`SHORTCUT_TOL`].
#[allow(clippy::too_many_arguments)]
pub fn check_symmetric_shortcut(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    support: &[Scenario],
    cost: &CostMatrix,
    cert: Option<&DominationCertificate>,
    taint: Taint,
    tolerance: f64,
) -> Result<StabilityReport, StabilityError> {
    if !cost.is_symmetric() {
        return Err(StabilityError::NotSymmetric);
    }
    let beta = certified_beta(cert, p, nu)?;
    check_shape(cost, support.len(), support.len(), "support")?;
    let ip = positions(support, p)?;
    let iv = positions(support, nu)?;
    let t = otsolve::transport_cost(p, nu, &cost.submatrix(&ip, &iv))?.cost;
    let report = assemble(instance, p, nu, t, t, beta, taint, tolerance)?;
    let general = check_stability_on_support(instance, p, nu, support, cost, cert, taint, tolerance)?;
    let agree = if t.is_infinite() || general.t_backward.is_infinite() {
        t == general.t_backward
    } else {
        (bound(beta, t) - general.bound_backward).abs() <= SHORTCUT_TOL * (1.0 + t.abs())
    };
    if !agree {
        return Err(StabilityError::ShortcutDisagreement {
            shortcut: bound(beta, t),
            general: general.bound_backward,
        });
    }
    Ok(report)
}

/// Cost, certificate and stability report for one `(P, ν)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairAudit {
    pub support: Vec<Scenario>,
    pub cost_kind: &'static str,
    pub cost_constants: Vec<(String, f64)>,
    pub cost_notes: Vec<String>,
    pub certificate: DominationCertificate,
    /// `None` when the certificate has violations.
    pub report: Option<StabilityReport>,
}

impl PairAudit {
    /// Exit-code semantics: no violations and every inequality holds.
    pub fn passed(&self) -> bool {
        self.certificate.is_valid() && self.report.as_ref().is_some_and(StabilityReport::passed)
    }
}

/// Builds the cost on `supp(P) ∪ supp(ν)`, certifies domination there and
/// checks both directions.
pub fn audit_pair(
    instance: &TwoStageInstance,
    p: &DiscreteDistribution,
    nu: &DiscreteDistribution,
    spec: &GroundCostSpec,
    tolerance: f64,
) -> Result<PairAudit, StabilityError> {
    let support = union_support(p, nu);
    let built = spec.build(instance, &support)?;
    let regret = regret::regret_matrix(instance, &support)?;
    let certificate = regret::certify_domination(&regret, &built.matrix)?;
    let report = if certificate.is_valid() {
        Some(check_stability_on_support(
            instance,
            p,
            nu,
            &support,
            &built.matrix,
            Some(&certificate),
            built.taint,
            tolerance,
        )?)
    } else {
        None
    };
    Ok(PairAudit {
        support,
        cost_kind: spec.label(),
        cost_constants: built.constants,
        cost_notes: built.notes,
        certificate,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs;
    use crate::problems::build_newsvendor;

    fn dist(atoms: &[f64], w: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::new(atoms.iter().map(|&a| Scenario::scalar(a)).collect(), w.to_vec()).unwrap()
    }

    #[test]
    fn identical_distributions_are_trivial() {
        let inst = build_newsvendor(0.2, 1.0, 2.0, &[12.0, 18.0]).unwrap();
        let p = dist(&[10.0, 20.0], &[0.5, 0.5]);
        let a = audit_pair(&inst, &p, &p, &GroundCostSpec::Bm { alpha: 0.1 }, STABILITY_TOL).unwrap();
        let r = a.report.unwrap();
        assert_eq!(r.lhs_forward, 0.0);
        assert_eq!(r.t_forward, 0.0);
        assert!(r.passed());
    }

    #[test]
    fn newsvendor_bm_pipeline() {
        let inst = build_newsvendor(0.0, 1.0, 1.0, &[12.0, 18.0]).unwrap();
        let p = dist(&[10.0, 20.0], &[0.5, 0.5]);
        let nu = DiscreteDistribution::dirac(Scenario::scalar(10.0));
        let a = audit_pair(&inst, &p, &nu, &GroundCostSpec::Bm { alpha: 0.1 }, STABILITY_TOL).unwrap();
        assert!(a.passed());
        let r = a.report.unwrap();
        // v(P) = min(0.5·2 + 0.5·8, 0.5·8 + 0.5·2) = 5, v(δ10) = 2
        assert_eq!(r.v_p, 5.0);
        assert_eq!(r.v_nu, 2.0);
        assert!(r.lhs_forward <= r.bound_forward);
    }

    #[test]
    fn missing_or_violating_certificate() {
        let inst = build_newsvendor(0.0, 1.0, 1.0, &[12.0, 18.0]).unwrap();
        let p = dist(&[10.0, 20.0], &[0.5, 0.5]);
        let s = p.atoms().to_vec();
        let c = costs::cost_norm(&s, &s).unwrap();
        let err = check_stability_on_support(&inst, &p, &p, &s, &c, None, Taint::Exact, STABILITY_TOL);
        assert_eq!(err.unwrap_err(), StabilityError::CertificateMissing);

        let r = regret::regret_matrix(&inst, &s).unwrap();
        let zero = CostMatrix::from_fn(2, 2, |_, _| 0.0).unwrap();
        let bad = regret::certify_domination(&r, &zero).unwrap();
        let err = check_stability_on_support(&inst, &p, &p, &s, &c, Some(&bad), Taint::Exact, STABILITY_TOL);
        assert_eq!(err.unwrap_err(), StabilityError::CertificateMissing);

        // certificate computed on a smaller support
        let cert = regret::certify_domination(
            &regret::regret_matrix(&inst, &s[..1]).unwrap(),
            &costs::cost_norm(&s[..1], &s[..1]).unwrap(),
        )
        .unwrap();
        let err = check_stability_on_support(&inst, &p, &p, &s, &c, Some(&cert), Taint::Exact, STABILITY_TOL);
        assert!(matches!(err, Err(StabilityError::SupportMismatch(_))));
    }

    #[test]
    fn shortcut_matches_two_sided_path() {
        let inst = build_newsvendor(0.3, 1.0, 2.0, &[11.0, 15.0, 19.0]).unwrap();
        let p = dist(&[10.0, 14.0, 20.0], &[0.2, 0.5, 0.3]);
        let nu = dist(&[12.0, 20.0], &[0.6, 0.4]);
        let support = union_support(&p, &nu);
        let c = costs::cost_bm_symmetrized(&inst, &support, 0.5).unwrap();
        let cert = regret::certify_domination(&regret::regret_matrix(&inst, &support).unwrap(), &c).unwrap();
        let short = check_symmetric_shortcut(&inst, &p, &nu, &support, &c, Some(&cert), Taint::Exact, STABILITY_TOL).unwrap();
        let full = check_stability_on_support(&inst, &p, &nu, &support, &c, Some(&cert), Taint::Exact, STABILITY_TOL).unwrap();
        assert!((short.bound_forward - full.bound_backward).abs() <= 1e-9);
        assert!((full.bound_forward - full.bound_backward).abs() <= 1e-9);
        assert!(short.passed());

        let bm = costs::cost_bm(&inst, &support, &support, 0.5).unwrap();
        assert!(!bm.is_symmetric());
        let err = check_symmetric_shortcut(&inst, &p, &nu, &support, &bm, Some(&cert), Taint::Exact, STABILITY_TOL);
        assert_eq!(err.unwrap_err(), StabilityError::NotSymmetric);
    }

    #[test]
    fn infinite_transport_gives_infinite_bound() {
        let inst = build_newsvendor(0.0, 1.0, 1.0, &[12.0, 18.0]).unwrap();
        let p = DiscreteDistribution::dirac(Scenario::scalar(10.0));
        let nu = DiscreteDistribution::dirac(Scenario::scalar(20.0));
        let support = union_support(&p, &nu);
        let c = CostMatrix::from_rows(vec![vec![0.0, f64::INFINITY], vec![f64::INFINITY, 0.0]]).unwrap();
        let cert = regret::certify_domination(&regret::regret_matrix(&inst, &support).unwrap(), &c).unwrap();
        let r = check_stability_on_support(&inst, &p, &nu, &support, &c, Some(&cert), Taint::Exact, STABILITY_TOL).unwrap();
        assert_eq!(r.bound_forward, f64::INFINITY);
        assert!(r.passed());
    }

    #[test]
    fn halving_beta_breaks_a_tight_case() {
        // one decision, Q(x, ξ) = ξ − x for ξ ≥ x: the regret between the two
        // atoms equals the norm cost, so β̂ = 1 and the bound is attained
        let inst = build_newsvendor(0.0, 1.0, 1.0, &[0.0]).unwrap();
        let p = DiscreteDistribution::dirac(Scenario::scalar(3.0));
        let nu = DiscreteDistribution::dirac(Scenario::scalar(1.0));
        let support = union_support(&p, &nu);
        let c = costs::cost_norm(&support, &support).unwrap();
        let mut cert = regret::certify_domination(&regret::regret_matrix(&inst, &support).unwrap(), &c).unwrap();
        assert_eq!(cert.beta_hat, 1.0);
        let r = check_stability_on_support(&inst, &p, &nu, &support, &c, Some(&cert), Taint::Exact, STABILITY_TOL).unwrap();
        assert!(r.passed());
        assert_eq!(r.lhs_forward, r.bound_forward);
        cert.beta_hat /= 2.0;
        let r = check_stability_on_support(&inst, &p, &nu, &support, &c, Some(&cert), Taint::Exact, STABILITY_TOL).unwrap();
        assert!(!r.forward_pass);
    }
}
