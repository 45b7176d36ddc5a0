//! The five subcommands. Each returns a text report, a JSON document and a
//! verdict; nothing here touches stdout or the exit code.

use std::fmt::Write;

use serde_json::{json, Value};

use regret_transport::catalog;
use regret_transport::reduce::reduction_stability_audit;
use regret_transport::regret::{certify_domination, regret_matrix};
use regret_transport::stability::audit_pair;
use regret_transport::{Orientation, ReductionMethod, Scenario, Taint};

use crate::instance::{InputError, Loaded};

pub struct Report {
    pub text: String,
    pub json: Value,
    /// False when a verdict failed or a certificate has violations.
    pub ok: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Library(String),
}

fn lib<E: std::fmt::Display>(e: E) -> CommandError {
    CommandError::Library(e.to_string())
}

fn taint_label(t: Taint) -> &'static str {
    match t {
        Taint::Exact => "exact",
        Taint::Estimate => "estimate",
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Square table with scenario labels on both axes.
fn matrix_text(out: &mut String, labels: &[String], get: impl Fn(usize, usize) -> f64) {
    let width = labels.iter().map(String::len).max().unwrap_or(0).max(10);
    let _ = write!(out, "{:>width$}", "");
    for l in labels {
        let _ = write!(out, " {l:>width$}");
    }
    out.push('\n');
    for (i, l) in labels.iter().enumerate() {
        let _ = write!(out, "{l:>width$}");
        for j in 0..labels.len() {
            let _ = write!(out, " {:>width$}", format!("{}", get(i, j)));
        }
        out.push('\n');
    }
}

fn labels(support: &[Scenario]) -> Vec<String> {
    support.iter().map(ToString::to_string).collect()
}

fn header(loaded: &Loaded) -> String {
    let inst = &loaded.instance;
    let mut s = format!("instance    {} ({} candidates, dim {})\n", inst.name(), inst.candidates().len(), inst.dim());
    if inst.orientation() == Orientation::Maximize {
        s.push_str("orientation maximize; values below are negated to minimization form\n");
    }
    s
}

pub fn solve(loaded: &Loaded) -> Result<Report, CommandError> {
    let inst = &loaded.instance;
    let p = loaded.distribution("p")?;
    let sol = inst.expected_value(&p).map_err(lib)?;
    let mut text = header(loaded);
    let _ = writeln!(
        text,
        "v(P)        = {}\nminimizer   x index {} = {:?}",
        sol.value,
        sol.minimizer,
        inst.candidate(sol.minimizer)
    );
    text.push_str("\nQ(x, xi), rows x, columns atoms of P\n");
    let mut table = Vec::with_capacity(inst.candidates().len());
    for x in 0..inst.candidates().len() {
        let row = p
            .atoms()
            .iter()
            .map(|a| inst.recourse_cost(x, a))
            .collect::<Result<Vec<_>, _>>()
            .map_err(lib)?;
        table.push(row);
    }
    let _ = write!(text, "{:>6}", "x");
    for (a, w) in p.iter() {
        let _ = write!(text, " {:>14}", format!("{a}@{w:.4}"));
    }
    text.push('\n');
    for (x, row) in table.iter().enumerate() {
        let _ = write!(text, "{x:>6}");
        for q in row {
            let _ = write!(text, " {:>14}", format!("{q}"));
        }
        text.push('\n');
    }
    let json = json!({
        "command": "solve",
        "instance": inst.name(),
        "value": sol.value,
        "minimizer": sol.minimizer,
        "minimizer_decision": inst.candidate(sol.minimizer),
        "distribution": to_json(&p),
        "recourse_table": table,
    });
    Ok(Report { text, json, ok: true })
}

pub fn regret(loaded: &Loaded) -> Result<Report, CommandError> {
    let inst = &loaded.instance;
    let support = loaded.support()?;
    let spec = loaded.cost()?;
    let r = regret_matrix(inst, &support).map_err(lib)?;
    let built = spec.build(inst, &support).map_err(lib)?;
    let cert = certify_domination(&r, &built.matrix).map_err(lib)?;

    let names = labels(&support);
    let mut text = header(loaded);
    text.push_str("\nregret R(xi_i, xi_j)\n");
    matrix_text(&mut text, &names, |i, j| r.get(i, j));
    let _ = writeln!(text, "\nground cost {} ({})", spec.label(), taint_label(built.taint));
    matrix_text(&mut text, &names, |i, j| built.matrix.get(i, j));
    for (k, v) in &built.constants {
        let _ = writeln!(text, "constant    {k} = {v}");
    }
    for n in built.notes.iter().chain(&cert.notes) {
        let _ = writeln!(text, "note        {n}");
    }
    let _ = writeln!(text, "\nbeta_hat    = {}", cert.beta_hat);
    if let Some((i, j)) = cert.argmax_pair {
        let _ = writeln!(text, "argmax      ({i}, {j})");
    }
    if cert.is_valid() {
        text.push_str("certificate valid\n");
    } else {
        let _ = writeln!(text, "certificate has {} violations", cert.violations.len());
        for v in &cert.violations {
            let _ = writeln!(text, "  R({}, {}) = {} with zero cost", v.i, v.j, v.regret);
        }
    }
    let json = json!({
        "command": "regret",
        "instance": inst.name(),
        "support": to_json(&support),
        "regret": to_json(&r),
        "cost": {
            "kind": spec.label(),
            "taint": built.taint,
            "matrix": to_json(&built.matrix),
            "constants": built.constants,
            "notes": built.notes,
        },
        "certificate": to_json(&cert),
    });
    Ok(Report {
        text,
        json,
        ok: cert.is_valid(),
    })
}

pub fn stability(loaded: &Loaded, tol: Option<f64>) -> Result<Report, CommandError> {
    let inst = &loaded.instance;
    let p = loaded.distribution("p")?;
    let nu = loaded.distribution("nu")?;
    let spec = loaded.cost()?;
    let tol = loaded.tolerance(tol)?;
    let audit = audit_pair(inst, &p, &nu, spec, tol).map_err(lib)?;

    let mut text = header(loaded);
    let _ = writeln!(text, "ground cost {} on {} support atoms", audit.cost_kind, audit.support.len());
    for (k, v) in &audit.cost_constants {
        let _ = writeln!(text, "constant    {k} = {v}");
    }
    for n in audit.cost_notes.iter().chain(&audit.certificate.notes) {
        let _ = writeln!(text, "note        {n}");
    }
    let _ = writeln!(text, "beta_hat    = {}", audit.certificate.beta_hat);
    match &audit.report {
        Some(rep) => {
            let _ = writeln!(text, "tolerance   {}\n{rep}", rep.tolerance);
        }
        None => {
            let _ = writeln!(
                text,
                "certificate has {} violations; no stability bound",
                audit.certificate.violations.len()
            );
        }
    }
    let passed = audit.passed();
    let _ = writeln!(text, "verdict     {}", if passed { "pass" } else { "FAIL" });
    let json = json!({
        "command": "stability",
        "instance": inst.name(),
        "verdict": if passed { "pass" } else { "fail" },
        "audit": to_json(&audit),
    });
    Ok(Report { text, json, ok: passed })
}

pub fn reduce(
    loaded: &Loaded,
    m: Option<usize>,
    method: Option<ReductionMethod>,
    tol: Option<f64>,
) -> Result<Report, CommandError> {
    let inst = &loaded.instance;
    let p = loaded.distribution("p")?;
    let spec = loaded.cost()?;
    let tol = loaded.tolerance(tol)?;
    let m = m.or(loaded.file.run.m).ok_or_else(|| InputError::Field {
        path: loaded.path.clone(),
        field: "run.m".into(),
        message: "missing; pass --m or set run.m".into(),
    })?;
    let method = method.or(loaded.file.run.method).unwrap_or(ReductionMethod::Exhaustive);
    let audit = reduction_stability_audit(inst, &p, m, method, spec, tol).map_err(lib)?;
    let res = &audit.result;

    let mut text = header(loaded);
    let _ = writeln!(text, "ground cost {} ({})", audit.cost_kind, taint_label(audit.taint));
    let _ = writeln!(text, "method      {} keeping {} of {} atoms", res.method, m, p.len());
    let _ = writeln!(text, "kept        {:?}", res.kept_indices);
    for (a, w) in res.reduced.iter() {
        let _ = writeln!(text, "  {a} weight {w}");
    }
    let _ = writeln!(text, "assignment  {:?}", res.assignment);
    let _ = writeln!(text, "T_c(P, Q)   = {} (OT solver {})", res.transport_cost, audit.ot_forward);
    let _ = writeln!(text, "T_c(Q, P)   = {}", audit.ot_backward);
    let _ = writeln!(
        text,
        "direction   ratio {}{}",
        audit.direction_ratio,
        if audit.direction_flag { " (flagged)" } else { "" }
    );
    let _ = writeln!(text, "beta_hat    = {}", audit.certificate.beta_hat);
    let _ = writeln!(text, "bound       {} >= realized {}", audit.a_priori_bound, audit.realized_gap);
    if let Some(rep) = &audit.report {
        let _ = writeln!(text, "\nstability with nu = reduced measure\n{rep}");
    }
    let passed = audit.passed();
    let _ = writeln!(text, "verdict     {}", if passed { "pass" } else { "FAIL" });
    let json = json!({
        "command": "reduce",
        "instance": inst.name(),
        "m": m,
        "verdict": if passed { "pass" } else { "fail" },
        "audit": to_json(&audit),
    });
    Ok(Report { text, json, ok: passed })
}

pub fn paper_examples() -> Result<Report, CommandError> {
    let checks = catalog::regression_checks().map_err(lib)?;
    let mut text = String::new();
    for c in &checks {
        let _ = writeln!(
            text,
            "{} {}: expected {}, got {} (tol {})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.name,
            c.expected,
            c.actual,
            c.tolerance
        );
    }
    let ok = checks.iter().all(|c| c.passed());
    let _ = writeln!(text, "{} of {} checks passed", checks.iter().filter(|c| c.passed()).count(), checks.len());
    let json = json!({
        "command": "paper-examples",
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "expected": c.expected,
            "actual": c.actual,
            "tolerance": c.tolerance,
            "passed": c.passed(),
        })).collect::<Vec<_>>(),
    });
    Ok(Report { text, json, ok })
}
