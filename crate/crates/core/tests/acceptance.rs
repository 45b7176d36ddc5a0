//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits nonzero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use itertools::Itertools;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regret_transport::catalog;
use regret_transport::costs::{self, CflMode, GroundCostSpec, KnapsackMode};
use regret_transport::measures::{random_distribution, union_support, DiscreteDistribution, Scenario};
use regret_transport::otsolve::{self, CostMatrix};
use regret_transport::problems::{build_newsvendor, Recourse, TwoStageInstance};
use regret_transport::reduce::{self, ReductionMethod};
use regret_transport::regret;
use regret_transport::stability::{self, STABILITY_TOL};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn scalar(v: f64) -> Scenario {
    Scenario::scalar(v)
}

fn criterion_1() -> Outcome {
    let ks = catalog::knapsack();
    let q: Vec<f64> = [12.0, 13.0, 14.0]
        .iter()
        .map(|&c| ks.second_stage(0, &scalar(c)).unwrap())
        .collect();
    let pair = vec![scalar(14.0), scalar(13.0)];
    let r = regret::regret_matrix(&ks, &pair).unwrap().get(0, 1);
    let Recourse::Knapsack(k) = ks.recourse() else { unreachable!() };
    let step = costs::cost_knapsack(k, &pair[..1], &pair[1..], KnapsackMode::Stepwise).unwrap().get(0, 0);
    let lin = costs::cost_knapsack(k, &pair[..1], &pair[1..], KnapsackMode::Linear).unwrap().get(0, 0);
    let ok = q == [60.0, 60.0, 60.0] && r == 0.0 && step == 0.0 && lin == 5.0;
    outcome(ok, format!("Q(12,13,14) = {q:?}, R(14,13) = {r}, stepwise = {step}, linear = {lin}"))
}

fn criterion_2() -> Outcome {
    let nv = build_newsvendor(0.0, 1.0, 1.0, &[12.0, 18.0]).unwrap();
    let x10 = nv.optimal_first_stage(&scalar(10.0)).unwrap();
    let x20 = nv.optimal_first_stage(&scalar(20.0)).unwrap();
    let s = vec![scalar(10.0), scalar(20.0)];
    let c = costs::cost_bm(&nv, &s, &s, 0.0).unwrap().get(0, 1);
    let ok = x10 == 0 && x20 == 1 && (c - 6.0).abs() <= 1e-12;
    outcome(ok, format!("x*(10) = 12, x*(20) = 18, c_BM(10, 20) = {c}"))
}

/// Scenario pool and cost kinds exercised for one instance.
struct Family {
    instance: TwoStageInstance,
    pool: Vec<Scenario>,
    costs: Vec<GroundCostSpec>,
}

fn families(rng: &mut ChaCha8Rng) -> Vec<Family> {
    let scalars = |v: Vec<f64>| v.into_iter().map(Scenario::scalar).collect::<Vec<_>>();
    let lp_pool = random_distribution(rng, 12, 2, 0.0, 6.0, Some(1)).atoms().to_vec();
    let uc_pool = random_distribution(rng, 10, 3, 2.0, 12.0, Some(1)).atoms().to_vec();
    let custom = TwoStageInstance::custom(
        "custom-quadratic",
        1,
        vec![vec![0.0], vec![1.0], vec![2.5]],
        vec![0.3, 0.0, 0.2],
        |x, xi| (xi.coords()[0] - x[0]).powi(2).min(4.0),
    )
    .unwrap();
    let cfl_pool: Vec<Scenario> = catalog::cfl_demand_grid()
        .into_iter()
        .filter(|s| s.coords().iter().sum::<f64>() <= 6.0)
        .collect();
    vec![
        Family {
            instance: catalog::newsvendor(),
            pool: scalars((0..14).map(|k| 6.0 + 1.5 * k as f64).collect()),
            costs: vec![
                GroundCostSpec::Norm,
                GroundCostSpec::Bm { alpha: 0.1 },
                GroundCostSpec::BmSymmetrized { alpha: 0.5 },
                GroundCostSpec::AvgRegret { panel: vec![0, 3, 8] },
                GroundCostSpec::Composite {
                    alpha: 0.2,
                    beta: 0.5,
                    gamma: 1.0,
                },
            ],
        },
        Family {
            instance: catalog::knapsack(),
            pool: scalars((0..=30).map(f64::from).collect()),
            costs: vec![
                GroundCostSpec::KnapsackStepwise,
                GroundCostSpec::KnapsackLinear,
                GroundCostSpec::MilpGap {
                    m_pi: None,
                    radius: None,
                    gamma: None,
                },
                GroundCostSpec::Norm,
            ],
        },
        Family {
            instance: catalog::cfl(),
            pool: cfl_pool,
            costs: vec![GroundCostSpec::CflMax, GroundCostSpec::AvgRegret { panel: vec![0, 1, 2] }],
        },
        Family {
            instance: catalog::cfl_high_capacity(),
            pool: catalog::cfl_demand_grid(),
            costs: vec![GroundCostSpec::CflMin, GroundCostSpec::CflMax],
        },
        Family {
            instance: catalog::lp_toy(),
            pool: lp_pool,
            costs: vec![
                GroundCostSpec::LpSensitivity { m_pi: None, radius: None },
                GroundCostSpec::Bm { alpha: 0.05 },
                GroundCostSpec::Norm,
            ],
        },
        Family {
            instance: catalog::unit_commitment(),
            pool: uc_pool,
            costs: vec![GroundCostSpec::UnitCommitment { price_bounds: None }, GroundCostSpec::Norm],
        },
        Family {
            instance: catalog::network_design(),
            pool: catalog::network_demand_grid(),
            costs: vec![
                GroundCostSpec::NetworkDesign { price_bounds: None },
                GroundCostSpec::MilpGap {
                    m_pi: None,
                    radius: None,
                    gamma: None,
                },
            ],
        },
        Family {
            instance: custom,
            pool: scalars((0..10).map(|k| 0.4 * k as f64).collect()),
            costs: vec![GroundCostSpec::Composite {
                alpha: 1.0,
                beta: 0.0,
                gamma: 0.0,
            }],
        },
    ]
}

fn sample(rng: &mut ChaCha8Rng, pool: &[Scenario], max_atoms: usize) -> DiscreteDistribution {
    let n = rng.random_range(1..=max_atoms.min(pool.len()));
    let atoms: Vec<Scenario> = pool.choose_multiple(rng, n).cloned().collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    DiscreteDistribution::new(atoms, raw.iter().map(|w| w / s).collect()).unwrap()
}

fn criterion_3() -> Outcome {
    const PER_COST: usize = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fams = families(&mut rng);
    let (mut tuples, mut certified, mut symmetric, mut failures) = (0, 0, 0, Vec::new());
    for fam in &fams {
        for spec in &fam.costs {
            for t in 0..PER_COST {
                let p = sample(&mut rng, &fam.pool, 4);
                let nu = sample(&mut rng, &fam.pool, 4);
                tuples += 1;
                let audit = stability::audit_pair(&fam.instance, &p, &nu, spec, STABILITY_TOL).unwrap();
                let Some(report) = &audit.report else { continue };
                certified += 1;
                if !report.passed() {
                    failures.push(format!("{}/{} #{t}", fam.instance.name(), spec.label()));
                }
                let support = union_support(&p, &nu);
                let built = spec.build(&fam.instance, &support).unwrap();
                if built.matrix.is_symmetric() {
                    symmetric += 1;
                    let r = stability::check_symmetric_shortcut(
                        &fam.instance,
                        &p,
                        &nu,
                        &support,
                        &built.matrix,
                        Some(&audit.certificate),
                        built.taint,
                        STABILITY_TOL,
                    )
                    .unwrap();
                    if !r.absolute_pass {
                        failures.push(format!("{}/{} #{t} symmetric", fam.instance.name(), spec.label()));
                    }
                }
            }
        }
    }
    let kinds: std::collections::BTreeSet<&str> = fams.iter().flat_map(|f| f.costs.iter().map(|c| c.label())).collect();
    let ok = tuples >= 200 && kinds.len() == 13 && failures.is_empty();
    outcome(
        ok,
        format!(
            "{tuples} tuples, {} cost kinds, {certified} certified, {symmetric} symmetric, failures {failures:?}",
            kinds.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let inst = catalog::lp_toy();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut failures, mut min_slack) = (0, 0, f64::INFINITY);
    while pairs < 100 {
        let a = Scenario::new(vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)]).unwrap();
        let b = Scenario::new(vec![rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)]).unwrap();
        if a == b {
            continue;
        }
        pairs += 1;
        let rep = regret::verify_lp_sensitivity_domination(&inst, &[a, b]).unwrap();
        failures += rep.failures.len();
        min_slack = min_slack.min(rep.min_slack);
    }
    outcome(failures == 0, format!("{pairs} pairs, {failures} failures, min slack {min_slack:.4}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut cases, mut worst) = (0, 0.0f64);
    for n in 2..=6 {
        let atoms: Vec<Scenario> = (0..n).map(|k| scalar(k as f64)).collect();
        let p = DiscreteDistribution::uniform(atoms.clone()).unwrap();
        for _ in 0..50 {
            let c = CostMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..10.0)).unwrap();
            let ot = otsolve::transport_cost(&p, &p, &c).unwrap().cost;
            let brute = (0..n)
                .permutations(n)
                .map(|s| s.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum::<f64>() / n as f64)
                .fold(f64::INFINITY, f64::min);
            worst = worst.max((ot - brute).abs());
            cases += 1;
        }
    }
    outcome(worst <= 1e-9, format!("{cases} cost matrices, max deviation {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut violations, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let (n, m) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let p = random_distribution(&mut rng, n, dim, -5.0, 5.0, None);
        let q = random_distribution(&mut rng, m, dim, -5.0, 5.0, None);
        let w: Vec<f64> = [1.0, 1.5, 2.0, 3.0]
            .iter()
            .map(|&o| otsolve::wasserstein_p(&p, &q, o).unwrap())
            .collect();
        for k in 1..w.len() {
            let drop = w[k - 1] - w[k];
            worst = worst.max(drop);
            if drop > 1e-9 {
                violations += 1;
            }
        }
    }
    outcome(violations == 0, format!("100 pairs, {violations} order violations, largest drop {worst:.2e}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut checks, mut violations, mut worst) = (0, 0, f64::NEG_INFINITY);
    for _ in 0..50 {
        let dim = rng.random_range(1..=2);
        let (n, m) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let p = random_distribution(&mut rng, n, dim, 0.0, 4.0, None);
        let q = random_distribution(&mut rng, m, dim, 0.0, 4.0, None);
        let w1 = otsolve::wasserstein_p(&p, &q, 1.0).unwrap();
        for _ in 0..20 {
            // min of cones with slopes in [0, 1] is 1-Lipschitz
            let cones: Vec<(f64, f64, Scenario)> = (0..3)
                .map(|_| {
                    let z = Scenario::new((0..dim).map(|_| rng.random_range(0.0..4.0)).collect()).unwrap();
                    (rng.random_range(-2.0..2.0), rng.random_range(0.0..=1.0), z)
                })
                .collect();
            let f = |s: &Scenario| {
                cones
                    .iter()
                    .map(|(a, l, z)| a + l * s.euclidean_distance(z))
                    .fold(f64::INFINITY, f64::min)
            };
            let lb = otsolve::fm1_lower_bound(&p, &q, f).unwrap();
            checks += 1;
            worst = worst.max(lb - w1);
            if lb > w1 + 1e-9 {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checks} witnesses, {violations} above W1, max excess {worst:.2e}"),
    )
}

fn criterion_8() -> Outcome {
    let grid = catalog::cfl_demand_grid();
    let cap = regret::verify_cfl_domination(&catalog::cfl(), &grid, CflMode::Max).unwrap();
    let high_max = regret::verify_cfl_domination(&catalog::cfl_high_capacity(), &grid, CflMode::Max).unwrap();
    let high_min = regret::verify_cfl_domination(&catalog::cfl_high_capacity(), &grid, CflMode::Min).unwrap();
    let pairs = grid.len() * grid.len();
    let ok = pairs >= 400 && cap.holds() && high_max.holds() && high_min.holds();
    outcome(
        ok,
        format!(
            "{pairs} pairs; capacitated max: {} checks ({} skipped), {} failures, tight {}; high-capacity max/min failures {}/{}, min tight {}",
            cap.checks,
            cap.skipped,
            cap.failures.len(),
            cap.tight,
            high_max.failures.len(),
            high_min.failures.len(),
            high_min.tight
        ),
    )
}

fn criterion_9() -> Outcome {
    let inst = catalog::network_design();
    let grid = catalog::network_demand_grid();
    let est = regret::estimate_integrality_gap(&inst, &grid).unwrap();
    let mut exact = true;
    for x in 0..inst.candidates().len() {
        for xi in &grid {
            exact &= inst.recourse_cost(x, xi).unwrap() == inst.relaxed_recourse_cost(x, xi).unwrap();
        }
    }
    let points = grid.len() * inst.candidates().len();
    outcome(
        est.gamma_hat == 0.0 && exact,
        format!("{points} (x, xi) points, gamma_hat = {}, MILP == LP everywhere: {exact}", est.gamma_hat),
    )
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid: Vec<f64> = (0..5).map(|_| (rng.random_range(5.0..25.0) * 2.0f64).round() / 2.0).collect();
    let nv = build_newsvendor(0.5, 1.0, 3.0, &grid).unwrap();
    let support = random_distribution(&mut rng, 8, 1, 0.0, 30.0, Some(0)).atoms().to_vec();
    let c = costs::cost_bm(&nv, &support, &support, 0.1).unwrap();
    let v = costs::validate_ground_cost(&c);
    match &v.triangle_violation {
        Some(t) => outcome(
            v.is_valid(),
            format!(
                "c({}, {}) = {:.4} > c({}, {}) + c({}, {}) = {:.4}",
                support[t.i], support[t.k], t.direct, support[t.i], support[t.j], support[t.j], support[t.k], t.via
            ),
        ),
        None => outcome(false, "no triangle violation found"),
    }
}

fn criterion_11() -> Outcome {
    let (mut audits, mut failures, mut order) = (0, Vec::new(), Vec::new());
    let mut worst_ratio = 0.0f64;
    for entry in catalog::bundled() {
        let name = entry.instance.name().to_string();
        for m in [2, 3, 5] {
            let a = reduce::reduction_stability_audit(
                &entry.instance,
                &entry.distribution,
                m,
                ReductionMethod::Exhaustive,
                &entry.cost,
                STABILITY_TOL,
            )
            .unwrap();
            audits += 1;
            let holds = a.certificate.is_valid()
                && a.redistribution_verified
                && a.realized_gap <= a.a_priori_bound + STABILITY_TOL
                && a.report.as_ref().is_some_and(|r| r.passed());
            if !holds {
                failures.push(format!("{name} m={m}"));
            }
            if a.a_priori_bound > 0.0 {
                worst_ratio = worst_ratio.max(a.realized_gap / a.a_priori_bound);
            }
            let built = entry.cost.build(&entry.instance, entry.distribution.atoms()).unwrap();
            let greedy = reduce::reduce_greedy(&entry.distribution, &built.matrix, m).unwrap();
            if a.result.transport_cost > greedy.transport_cost + 1e-12 {
                order.push(format!("{name} m={m}"));
            }
        }
    }
    outcome(
        failures.is_empty() && order.is_empty(),
        format!(
            "{audits} audits, bound failures {failures:?}, ordering failures {order:?}, max realized/bound {worst_ratio:.3}"
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("knapsack worked example", criterion_1),
        ("inventory worked example", criterion_2),
        ("stability bound property suite", criterion_3),
        ("LP-sensitivity domination", criterion_4),
        ("OT solver vs permutation brute force", criterion_5),
        ("Wasserstein ordering in p", criterion_6),
        ("Fortet-Mourier lower bound", criterion_7),
        ("CFL bounds", criterion_8),
        ("TU integrality", criterion_9),
        ("non-metric BM cost", criterion_10),
        ("reduction audit", criterion_11),
    ];
    let start = Instant::now();
    let mut all = true;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = run();
        all &= out.ok;
        println!(
            "criterion {:>2} {} {name} ({:.2}s): {}",
            k + 1,
            if out.ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance total {:.2}s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
