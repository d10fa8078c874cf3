//! JSON-serializable description of one verification run.
//!
//! A scenario names the structure parameters, the ambient operator (diagonal
//! token list, explicit matrix, or an almost-product matrix plus branch),
//! the immersion (component expressions over declared chart variables with a
//! sampling box), the tangent distributions, the checks to execute and the
//! sampling plan. The ambient metric is always the Euclidean one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse;
use crate::immersion::Immersion;
use crate::metallic::{metallic_number, Branch, MetallicParams, StructureKind, StructureOperator};
use crate::sampling::SamplingPlan;
use crate::slant::{DistributionSelector, DistributionSpec};
use nalgebra::DMatrix;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ParamSpec {
    pub p: u32,
    pub q: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureSpec {
    /// Diagonal operator with entries `"sigma"` or `"sigma_bar"`.
    Diagonal(Vec<String>),
    /// Explicit dense operator, row-major.
    Matrix(Vec<Vec<f64>>),
    /// Metallic operator induced by an almost-product matrix.
    Product {
        matrix: Vec<Vec<f64>>,
        branch: Branch,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImmersionSpec {
    pub vars: Vec<String>,
    pub components: Vec<String>,
    /// One [lo, hi] interval per chart variable.
    pub chart_box: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<usize>>,
    /// Column-major tangent-frame coefficient expressions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_columns: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: ParamSpec,
    pub ambient_dim: usize,
    pub structure: StructureSpec,
    pub immersion: ImmersionSpec,
    #[serde(default)]
    pub distributions: Vec<DistributionConfig>,
    /// Check-section names; empty means every applicable section.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub sampling: SamplingPlan,
}

impl Scenario {
    pub fn from_json(src: &str) -> Result<Scenario> {
        serde_json::from_str(src).map_err(|e| Error::Scenario(format!("bad scenario JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }
}

/// Scenario with everything parsed and bound, ready to run.
pub struct CompiledScenario {
    pub name: String,
    pub params: MetallicParams,
    pub operator: StructureOperator,
    pub immersion: Immersion,
    pub distributions: Vec<DistributionSpec>,
    pub checks: Vec<String>,
    pub plan: SamplingPlan,
}

fn matrix_from_rows(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::Scenario(format!(
            "{what} must be {dim}x{dim} to match ambient_dim"
        )));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

/// Validates and binds a scenario. Structural problems (dimensions, unknown
/// names, parse failures) surface here as configuration errors; whether the
/// operator actually satisfies its defining identities is left to the
/// structure check so that corrupted operators produce a failing report
/// rather than a configuration error.
pub fn compile(scenario: &Scenario) -> Result<CompiledScenario> {
    let params = metallic_number(scenario.params.p, scenario.params.q)?;
    let m = scenario.ambient_dim;

    let matrix = match &scenario.structure {
        StructureSpec::Diagonal(tokens) => {
            if tokens.len() != m {
                return Err(Error::Scenario(format!(
                    "diagonal has {} entries for ambient_dim {m}",
                    tokens.len()
                )));
            }
            let mut d = DMatrix::zeros(m, m);
            for (i, t) in tokens.iter().enumerate() {
                d[(i, i)] = match t.as_str() {
                    "sigma" => params.sigma,
                    "sigma_bar" => params.sigma_bar,
                    other => {
                        return Err(Error::Scenario(format!(
                            "unknown diagonal token `{other}` (expected sigma or sigma_bar)"
                        )))
                    }
                };
            }
            d
        }
        StructureSpec::Matrix(rows) => matrix_from_rows(rows, m, "structure matrix")?,
        StructureSpec::Product { matrix, branch } => {
            let f = matrix_from_rows(matrix, m, "product matrix")?;
            let half_gap = (2.0 * params.sigma - params.pf()) / 2.0;
            let sign = match branch {
                Branch::Plus => 1.0,
                Branch::Minus => -1.0,
            };
            sign * half_gap * f + (params.pf() / 2.0) * DMatrix::identity(m, m)
        }
    };
    let operator = StructureOperator::new_unchecked(matrix, None, StructureKind::Metallic(params))?;

    if scenario.immersion.components.len() != m {
        return Err(Error::Scenario(format!(
            "immersion has {} components for ambient_dim {m}",
            scenario.immersion.components.len()
        )));
    }
    let vars = scenario.immersion.vars.clone();
    let components = scenario
        .immersion
        .components
        .iter()
        .map(|src| parse(src, &vars))
        .collect::<Result<Vec<_>>>()?;
    let chart_box = scenario
        .immersion
        .chart_box
        .iter()
        .map(|[lo, hi]| (*lo, *hi))
        .collect();
    let immersion = Immersion::new(vars.clone(), components, chart_box, params)?;

    let mut distributions = Vec::new();
    for d in &scenario.distributions {
        if distributions
            .iter()
            .any(|existing: &DistributionSpec| existing.name == d.name)
        {
            return Err(Error::Scenario(format!(
                "duplicate distribution name `{}`",
                d.name
            )));
        }
        let selector = match (&d.coords, &d.frame_columns) {
            (Some(idxs), None) => DistributionSelector::Coords(idxs.clone()),
            (None, Some(cols)) => {
                let parsed = cols
                    .iter()
                    .map(|col| col.iter().map(|src| parse(src, &vars)).collect())
                    .collect::<Result<Vec<Vec<_>>>>()?;
                DistributionSelector::FrameColumns(parsed)
            }
            _ => {
                return Err(Error::Scenario(format!(
                    "distribution `{}` needs exactly one of `coords` or `frame_columns`",
                    d.name
                )))
            }
        };
        distributions.push(DistributionSpec {
            name: d.name.clone(),
            selector,
        });
    }

    Ok(CompiledScenario {
        name: scenario.name.clone(),
        params,
        operator,
        immersion,
        distributions,
        checks: scenario.checks.clone(),
        plan: scenario.sampling,
    })
}
