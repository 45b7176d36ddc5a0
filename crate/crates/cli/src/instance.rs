//! Instance-file schema and its conversion into library objects.

use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use regret_transport::measures::{random_distribution, union_support};
use regret_transport::problems::{
    build_cfl_single_source, build_fixed_recourse_lp, build_network_design_toy, build_newsvendor,
    build_unbounded_knapsack, build_unit_commitment_toy, AffineMatrix, AffineVector, FixedRecourseLp,
    NetworkDesignSpec, UnitCommitmentSpec,
};
use regret_transport::{DiscreteDistribution, GroundCostSpec, ReductionMethod, Scenario, TwoStageInstance};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Field { path: String, field: String, message: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub problem: ProblemBlock,
    pub p: Option<DistributionBlock>,
    pub nu: Option<DistributionBlock>,
    pub cost: Option<GroundCostSpec>,
    #[serde(default)]
    pub run: RunBlock,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemBlock {
    Newsvendor {
        #[serde(default)]
        order_cost: f64,
        holding: f64,
        penalty: f64,
        grid: Vec<f64>,
    },
    Knapsack {
        weights: Vec<u64>,
        values: Vec<f64>,
    },
    Cfl {
        costs: Vec<Vec<f64>>,
        capacities: Vec<f64>,
        opening_costs: Vec<f64>,
        candidates: Vec<Vec<f64>>,
    },
    FixedRecourseLp {
        dim: usize,
        cost: Vec<f64>,
        recourse: Vec<Vec<f64>>,
        rhs_constant: Vec<f64>,
        rhs_slope: Vec<Vec<f64>>,
        technology: Vec<Vec<f64>>,
        #[serde(default)]
        technology_slopes: Vec<Vec<Vec<f64>>>,
        candidates: Vec<Vec<f64>>,
        first_stage_costs: Vec<f64>,
    },
    UnitCommitment(UnitCommitmentSpec),
    NetworkDesign(NetworkDesignSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBlock {
    pub atoms: Option<Vec<Scenario>>,
    /// Uniform when omitted.
    pub weights: Option<Vec<f64>>,
    pub random: Option<RandomBlock>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBlock {
    pub n: usize,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
    pub decimals: Option<i32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub m: Option<usize>,
    pub method: Option<ReductionMethod>,
    pub tol: Option<f64>,
}

/// A parsed file with its problem already built.
pub struct Loaded {
    pub path: String,
    pub file: InstanceFile,
    pub instance: TwoStageInstance,
}

impl Loaded {
    fn field_error(&self, field: &str, message: impl ToString) -> InputError {
        InputError::Field {
            path: self.path.clone(),
            field: field.to_string(),
            message: message.to_string(),
        }
    }

    pub fn distribution(&self, name: &str) -> Result<DiscreteDistribution, InputError> {
        let block = match name {
            "p" => self.file.p.as_ref(),
            _ => self.file.nu.as_ref(),
        }
        .ok_or_else(|| self.field_error(name, "missing distribution block"))?;
        let dim = self.instance.dim();
        match (&block.atoms, &block.random) {
            (Some(atoms), None) => {
                if let Some(bad) = atoms.iter().position(|a| a.dim() != dim) {
                    return Err(self.field_error(&format!("{name}.atoms[{bad}]"), format!("expected {dim} coordinates")));
                }
                let weights = match &block.weights {
                    Some(w) => w.clone(),
                    None => vec![1.0 / atoms.len().max(1) as f64; atoms.len()],
                };
                DiscreteDistribution::new(atoms.clone(), weights).map_err(|e| self.field_error(name, e))
            }
            (None, Some(r)) => {
                if block.weights.is_some() {
                    return Err(self.field_error(&format!("{name}.weights"), "not allowed with `random`"));
                }
                let field = format!("{name}.random");
                if r.n == 0 || !(r.low.is_finite() && r.high.is_finite() && r.high > r.low) {
                    return Err(self.field_error(&field, "need n >= 1 and finite low < high"));
                }
                if let Some(d) = r.decimals {
                    // keep the lattice comfortably larger than n
                    let per_axis = ((r.high - r.low) * 10f64.powi(d)).floor() + 1.0;
                    if per_axis.powi(dim as i32) < 2.0 * r.n as f64 {
                        return Err(self.field_error(&field, "box too small for n distinct rounded atoms"));
                    }
                }
                let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
                Ok(random_distribution(&mut rng, r.n, dim, r.low, r.high, r.decimals))
            }
            _ => Err(self.field_error(name, "give exactly one of `atoms` or `random`")),
        }
    }

    /// Union support of `p` and, when present, `nu`.
    pub fn support(&self) -> Result<Vec<Scenario>, InputError> {
        let p = self.distribution("p")?;
        Ok(match self.file.nu {
            Some(_) => union_support(&p, &self.distribution("nu")?),
            None => p.atoms().to_vec(),
        })
    }

    pub fn cost(&self) -> Result<&GroundCostSpec, InputError> {
        self.file.cost.as_ref().ok_or_else(|| self.field_error("cost", "missing cost block"))
    }

    pub fn tolerance(&self, flag: Option<f64>) -> Result<f64, InputError> {
        let tol = flag.or(self.file.run.tol).unwrap_or(regret_transport::stability::STABILITY_TOL);
        if !(tol.is_finite() && tol >= 0.0) {
            return Err(self.field_error("run.tol", "must be finite and nonnegative"));
        }
        Ok(tol)
    }
}

pub fn load(path: &Path) -> Result<Loaded, InputError> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: display.clone(),
        source,
    })?;
    parse(&display, &text)
}

pub fn parse(path: &str, text: &str) -> Result<Loaded, InputError> {
    let file: InstanceFile = toml::from_str(text).map_err(|e| InputError::Parse {
        path: path.to_string(),
        message: with_key_line(e.to_string().trim_end(), text),
    })?;
    let instance = build_problem(&file.problem).map_err(|message| InputError::Field {
        path: path.to_string(),
        field: "problem".into(),
        message,
    })?;
    Ok(Loaded {
        path: path.to_string(),
        file,
        instance,
    })
}

/// Tagged tables are buffered before their fields are checked, so the
/// parser points at the table header. Add the line of the offending key.
fn with_key_line(message: &str, text: &str) -> String {
    let Some(rest) = message.split("unknown field `").nth(1) else {
        return message.to_string();
    };
    let key = rest.split('`').next().unwrap_or_default();
    let line = text.lines().position(|l| {
        l.trim_start()
            .strip_prefix(key)
            .is_some_and(|after| after.trim_start().starts_with('='))
    });
    match line {
        Some(k) => format!("{message}\nkey `{key}` is at line {}", k + 1),
        None => message.to_string(),
    }
}

fn build_problem(block: &ProblemBlock) -> Result<TwoStageInstance, String> {
    let built = match block {
        ProblemBlock::Newsvendor {
            order_cost,
            holding,
            penalty,
            grid,
        } => build_newsvendor(*order_cost, *holding, *penalty, grid),
        ProblemBlock::Knapsack { weights, values } => build_unbounded_knapsack(weights.clone(), values.clone()),
        ProblemBlock::Cfl {
            costs,
            capacities,
            opening_costs,
            candidates,
        } => build_cfl_single_source(costs.clone(), capacities.clone(), opening_costs.clone(), candidates.clone()),
        ProblemBlock::FixedRecourseLp {
            dim,
            cost,
            recourse,
            rhs_constant,
            rhs_slope,
            technology,
            technology_slopes,
            candidates,
            first_stage_costs,
        } => {
            let len = candidates.first().map_or(0, Vec::len);
            FixedRecourseLp::new(
                cost.clone(),
                recourse.clone(),
                AffineVector {
                    constant: rhs_constant.clone(),
                    slope: rhs_slope.clone(),
                },
                AffineMatrix {
                    constant: technology.clone(),
                    slopes: technology_slopes.clone(),
                },
                *dim,
                len,
            )
            .and_then(|lp| build_fixed_recourse_lp(lp, *dim, candidates.clone(), first_stage_costs.clone()))
        }
        ProblemBlock::UnitCommitment(spec) => build_unit_commitment_toy(spec),
        ProblemBlock::NetworkDesign(spec) => build_network_design_toy(spec),
    };
    built.map_err(|e| e.to_string())
}
