//! Metallic-number arithmetic and structure operators on flat ambient space.
//!
//! A metallic operator J satisfies the quadratic relation J² = pJ + qI for
//! positive integers p, q; an almost-product operator F satisfies F² = I.
//! The two families are interchangeable through the affine eigenvalue maps
//! implemented by [`metallic_from_product`] and [`products_from_metallic`],
//! and every metallic operator splits the ambient space through the
//! complementary projector pair returned by [`projectors`].
//!
//! All operators are stored dense together with the ambient metric (identity
//! by default) and are validated against the polynomial identity and metric
//! compatibility g(JX, Y) = g(X, JY).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{CheckResult, VerificationReport};
use crate::sampling::SplitMix64;

/// Default absolute tolerance for entrywise max-norm residuals.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest supported ambient dimension for dense operators.
pub const MAX_DIM: usize = 1024;

/// The pair (p, q) with the two roots of x² − px − q.
///
/// `sigma` is the positive root (p + √(p²+4q))/2; `sigma_bar = p − sigma`
/// is the negative one. Both terms of `sigma` are positive so the formula
/// has no cancellation; `sigma_bar` is computed as −q/σ for the same reason.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetallicParams {
    pub p: u32,
    pub q: u32,
    pub sigma: f64,
    pub sigma_bar: f64,
}

/// Positive root of x² − px − q together with its conjugate.
pub fn metallic_number(p: u32, q: u32) -> Result<MetallicParams> {
    if p == 0 || q == 0 {
        return Err(Error::Domain(format!(
            "metallic numbers require p >= 1 and q >= 1, got p={p}, q={q}"
        )));
    }
    let (pf, qf) = (p as f64, q as f64);
    let sigma = (pf + (pf * pf + 4.0 * qf).sqrt()) / 2.0;
    let sigma_bar = -qf / sigma;
    Ok(MetallicParams {
        p,
        q,
        sigma,
        sigma_bar,
    })
}

impl MetallicParams {
    pub fn golden() -> MetallicParams {
        metallic_number(1, 1).expect("(1,1) is valid")
    }

    pub fn pf(&self) -> f64 {
        self.p as f64
    }

    pub fn qf(&self) -> f64 {
        self.q as f64
    }

    /// σ − σ̄ = √(p²+4q), the gap between the two roots.
    pub fn root_gap(&self) -> f64 {
        self.sigma - self.sigma_bar
    }
}

/// Which of the two metallic structures an almost-product operator induces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StructureKind {
    Metallic(MetallicParams),
    AlmostProduct,
}

/// A dense (1,1)-tensor on flat ambient space with its compatible metric.
#[derive(Debug, Clone)]
pub struct StructureOperator {
    pub matrix: DMatrix<f64>,
    pub metric: DMatrix<f64>,
    pub kind: StructureKind,
}

impl StructureOperator {
    /// Builds without validating; pair with [`validate_structure`].
    pub fn new_unchecked(
        matrix: DMatrix<f64>,
        metric: Option<DMatrix<f64>>,
        kind: StructureKind,
    ) -> Result<Self> {
        let m = matrix.nrows();
        if m == 0 || m > MAX_DIM {
            return Err(Error::Dimension(format!(
                "ambient dimension {m} outside supported range 1..={MAX_DIM}"
            )));
        }
        if matrix.ncols() != m {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let metric = metric.unwrap_or_else(|| DMatrix::identity(m, m));
        if metric.nrows() != m || metric.ncols() != m {
            return Err(Error::Dimension(format!(
                "metric must be {m}x{m}, got {}x{}",
                metric.nrows(),
                metric.ncols()
            )));
        }
        Ok(StructureOperator {
            matrix,
            metric,
            kind,
        })
    }

    /// Validated metallic operator; Euclidean metric when `metric` is `None`.
    pub fn metallic(
        matrix: DMatrix<f64>,
        metric: Option<DMatrix<f64>>,
        params: MetallicParams,
    ) -> Result<Self> {
        let op = Self::new_unchecked(matrix, metric, StructureKind::Metallic(params))?;
        let report = validate_structure(&op, DEFAULT_TOL, 0)?;
        if !report.overall_pass {
            return Err(Error::Structure(describe_failure(&report)));
        }
        Ok(op)
    }

    /// Validated almost-product operator.
    pub fn almost_product(matrix: DMatrix<f64>, metric: Option<DMatrix<f64>>) -> Result<Self> {
        let op = Self::new_unchecked(matrix, metric, StructureKind::AlmostProduct)?;
        let report = validate_structure(&op, DEFAULT_TOL, 0)?;
        if !report.overall_pass {
            return Err(Error::Structure(describe_failure(&report)));
        }
        Ok(op)
    }

    /// Metallic operator with the given diagonal of σ/σ̄ entries.
    /// `pattern[i] == true` selects σ at slot i, `false` selects σ̄.
    pub fn metallic_diagonal(pattern: &[bool], params: MetallicParams) -> Result<Self> {
        let m = pattern.len();
        let mut d = DMatrix::zeros(m, m);
        for (i, &is_sigma) in pattern.iter().enumerate() {
            d[(i, i)] = if is_sigma {
                params.sigma
            } else {
                params.sigma_bar
            };
        }
        Self::metallic(d, None, params)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn params(&self) -> Option<MetallicParams> {
        match self.kind {
            StructureKind::Metallic(p) => Some(p),
            StructureKind::AlmostProduct => None,
        }
    }

    /// Inner product of ambient vectors under the stored metric.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        (x.transpose() * &self.metric * y)[(0, 0)]
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }

    /// Entrywise max-norm of the defining polynomial residual:
    /// J² − pJ − qI for metallic, F² − I for almost-product.
    pub fn polynomial_residual(&self) -> f64 {
        let m = self.dim();
        let id = DMatrix::<f64>::identity(m, m);
        let sq = &self.matrix * &self.matrix;
        match &self.kind {
            StructureKind::Metallic(pq) => {
                (sq - pq.pf() * &self.matrix - pq.qf() * id).amax()
            }
            StructureKind::AlmostProduct => (sq - id).amax(),
        }
    }

    /// Entrywise max-norm of GJ − JᵀG (metric compatibility).
    pub fn compatibility_residual(&self) -> f64 {
        (&self.metric * &self.matrix - self.matrix.transpose() * &self.metric).amax()
    }
}

fn describe_failure(report: &VerificationReport) -> String {
    let failed: Vec<String> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{} (residual {:.3e} > tol {:.1e})", c.tag, c.residual, c.tolerance))
        .collect();
    failed.join("; ")
}

/// Complementary projectors onto the σ̄- and σ-eigendistributions of a
/// metallic operator: P = (σI − J)/(σ − σ̄), Q = (J − σ̄I)/(σ − σ̄).
#[derive(Debug, Clone)]
pub struct ProjectorPair {
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

pub fn projectors(j: &StructureOperator) -> Result<ProjectorPair> {
    let params = j
        .params()
        .ok_or_else(|| Error::Structure("projectors require a metallic operator".into()))?;
    let m = j.dim();
    let id = DMatrix::<f64>::identity(m, m);
    let gap = params.root_gap();
    let p = (params.sigma * &id - &j.matrix) / gap;
    let q = (&j.matrix - params.sigma_bar * &id) / gap;
    Ok(ProjectorPair { p, q })
}

/// J = ±((σ − σ̄)/2)F + (p/2)I, the metallic structure induced by an
/// almost-product structure. `Plus` maps the +1 eigenspace of F to σ.
pub fn metallic_from_product(
    f: &StructureOperator,
    params: MetallicParams,
    branch: Branch,
) -> Result<StructureOperator> {
    let residual = match f.kind {
        StructureKind::AlmostProduct => f.polynomial_residual(),
        StructureKind::Metallic(_) => {
            return Err(Error::Structure(
                "input must be an almost-product operator".into(),
            ))
        }
    };
    if residual > DEFAULT_TOL {
        return Err(Error::Structure(format!(
            "involution residual {residual:.3e} exceeds {DEFAULT_TOL:.1e}"
        )));
    }
    let m = f.dim();
    let id = DMatrix::<f64>::identity(m, m);
    let half_gap = (2.0 * params.sigma - params.pf()) / 2.0;
    let sign = match branch {
        Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    let matrix = sign * half_gap * &f.matrix + (params.pf() / 2.0) * id;
    StructureOperator::metallic(matrix, Some(f.metric.clone()), params)
}

/// The two almost-product structures induced by a metallic operator:
/// F₁ = (2J − pI)/(σ − σ̄) and F₂ = −F₁. `metallic_from_product(F₁, Plus)`
/// recovers J.
pub fn products_from_metallic(
    j: &StructureOperator,
) -> Result<(StructureOperator, StructureOperator)> {
    let params = j
        .params()
        .ok_or_else(|| Error::Structure("input must be a metallic operator".into()))?;
    if j.polynomial_residual() > DEFAULT_TOL {
        return Err(Error::Structure(
            "input fails the metallic polynomial identity".into(),
        ));
    }
    let m = j.dim();
    let id = DMatrix::<f64>::identity(m, m);
    let gap = params.root_gap();
    let f1 = (2.0 * &j.matrix - params.pf() * id) / gap;
    let f2 = -&f1;
    let f1 = StructureOperator::almost_product(f1, Some(j.metric.clone()))?;
    let f2 = StructureOperator::almost_product(f2, Some(j.metric.clone()))?;
    Ok((f1, f2))
}

/// Checks the polynomial identity, metric compatibility, metric SPD-ness and
/// the sampled two-argument compatibility relation. Sampling is deterministic
/// in `seed`.
pub fn validate_structure(
    op: &StructureOperator,
    tol: f64,
    seed: u64,
) -> Result<VerificationReport> {
    let m = op.dim();
    if op.metric != op.metric.transpose() {
        let asym = (&op.metric - op.metric.transpose()).amax();
        if asym > 1e-12 {
            return Err(Error::Dimension(format!(
                "metric is not symmetric (asymmetry {asym:.3e})"
            )));
        }
    }
    if nalgebra::Cholesky::new(op.metric.clone()).is_none() {
        return Err(Error::Dimension(
            "metric is not positive definite".into(),
        ));
    }

    let (p, q, sigma, sigma_bar) = match op.kind {
        StructureKind::Metallic(pq) => (pq.p, pq.q, pq.sigma, pq.sigma_bar),
        StructureKind::AlmostProduct => (0, 0, 1.0, -1.0),
    };
    let mut report = VerificationReport::new("structure_validation", seed, p, q, sigma, sigma_bar);

    let poly_label = match op.kind {
        StructureKind::Metallic(_) => "quadratic identity of the operator",
        StructureKind::AlmostProduct => "involution identity of the operator",
    };
    report.push(CheckResult::asserted(
        "structure_polynomial",
        poly_label,
        op.polynomial_residual(),
        tol,
        1,
    ));
    report.push(CheckResult::asserted(
        "metric_compatibility",
        "self-adjointness of the operator under the metric",
        op.compatibility_residual(),
        tol,
        1,
    ));

    // Sampled two-argument form: g(Jx, Jy) = p g(Jx, y) + q g(x, y) for
    // metallic, g(Fx, Fy) = g(x, y) for almost-product.
    let mut rng = SplitMix64::new(seed ^ 0x5eed_c0de);
    let pairs = 100;
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let x = rng.vector_in_cube(m);
        let y = rng.vector_in_cube(m);
        let jx = op.apply(&x);
        let jy = op.apply(&y);
        let r = match op.kind {
            StructureKind::Metallic(pq) => {
                op.inner(&jx, &jy) - pq.pf() * op.inner(&jx, &y) - pq.qf() * op.inner(&x, &y)
            }
            StructureKind::AlmostProduct => op.inner(&jx, &jy) - op.inner(&x, &y),
        };
        worst = worst.max(r.abs());
    }
    report.push(CheckResult::asserted(
        "compatibility_sampled",
        "two-argument metric relation on random vector pairs",
        worst,
        tol * 10.0 * m as f64,
        pairs,
    ));
    Ok(report)
}
