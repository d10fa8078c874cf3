//! Parametric immersions and per-point frame data.
//!
//! An [`Immersion`] is a map f: U ⊂ ℝ^{m'} → ℝ^m given by parsed component
//! expressions, evaluable with exact first and second derivatives. At each
//! chart point [`frame_at`] assembles the Jacobian, an orthonormal tangent
//! frame (modified Gram–Schmidt with one reorthogonalization pass), an
//! orthonormal normal frame (deterministic completion from the ambient
//! axes), and the induced metric g_ij = ⟨∂_i f, ∂_j f⟩.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{eval_gradient, eval_jet, eval_value, EvalContext};
use crate::metallic::MetallicParams;

/// Relative singular-value threshold below which a point counts as rank
/// deficient.
pub const RANK_TOL: f64 = 1e-8;

/// Residual threshold for accepting an ambient axis into the normal frame.
const COMPLETION_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Immersion {
    vars: Vec<String>,
    components: Vec<Expr>,
    chart_box: Vec<(f64, f64)>,
    params: MetallicParams,
}

impl Immersion {
    pub fn new(
        vars: Vec<String>,
        components: Vec<Expr>,
        chart_box: Vec<(f64, f64)>,
        params: MetallicParams,
    ) -> Result<Self> {
        let chart_dim = vars.len();
        let ambient_dim = components.len();
        if chart_dim == 0 {
            return Err(Error::Dimension("chart dimension must be positive".into()));
        }
        if ambient_dim <= chart_dim {
            return Err(Error::Dimension(format!(
                "ambient dimension {ambient_dim} must exceed chart dimension {chart_dim}"
            )));
        }
        if chart_box.len() != chart_dim {
            return Err(Error::Dimension(format!(
                "chart box has {} intervals for {chart_dim} variables",
                chart_box.len()
            )));
        }
        for (lo, hi) in &chart_box {
            if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Dimension(format!(
                    "empty chart interval [{lo}, {hi}]"
                )));
            }
        }
        for c in &components {
            if c.max_var_bound() > chart_dim {
                return Err(Error::Dimension(
                    "component references an undeclared variable".into(),
                ));
            }
        }
        Ok(Immersion {
            vars,
            components,
            chart_box,
            params,
        })
    }

    pub fn chart_dim(&self) -> usize {
        self.vars.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.components.len()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.chart_dim()
    }

    pub fn chart_box(&self) -> &[(f64, f64)] {
        &self.chart_box
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn params(&self) -> MetallicParams {
        self.params
    }

    pub fn eval_ctx(&self) -> EvalContext<'_> {
        EvalContext::new(self.params, &self.vars)
    }

    /// f(x) ∈ ℝ^m.
    pub fn value(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let ctx = self.eval_ctx();
        let mut out = DVector::zeros(self.ambient_dim());
        for (k, c) in self.components.iter().enumerate() {
            out[k] = eval_value(c, x, &ctx)?;
        }
        Ok(out)
    }

    /// m×m' Jacobian, column i = ∂f/∂u_i(x); exact via forward AD.
    pub fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let ctx = self.eval_ctx();
        let mut jac = DMatrix::zeros(self.ambient_dim(), self.chart_dim());
        for (k, c) in self.components.iter().enumerate() {
            let (_, grad) = eval_gradient(c, x, &ctx)?;
            for i in 0..self.chart_dim() {
                jac[(k, i)] = grad[i];
            }
        }
        Ok(jac)
    }

    /// Entry (i,j) is the ambient vector ∂²f/∂u_i∂u_j(x); symmetric in (i,j).
    pub fn coordinate_hessian(&self, x: &DVector<f64>) -> Result<Vec<Vec<DVector<f64>>>> {
        self.check_point(x)?;
        let ctx = self.eval_ctx();
        let n = self.chart_dim();
        let m = self.ambient_dim();
        let mut out = vec![vec![DVector::zeros(m); n]; n];
        for (k, c) in self.components.iter().enumerate() {
            let jet = eval_jet(c, x, &ctx)?;
            for (i, row) in out.iter_mut().enumerate() {
                for (j, entry) in row.iter_mut().enumerate() {
                    entry[k] = jet.hessian[(i, j)];
                }
            }
        }
        Ok(out)
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.chart_dim() {
            return Err(Error::Dimension(format!(
                "point has dimension {}, chart has {}",
                x.len(),
                self.chart_dim()
            )));
        }
        Ok(())
    }
}

/// Frames and induced metric at one chart point. Columns of `tangent_onb`
/// and `normal_onb` are orthonormal and mutually orthogonal; `chart_to_frame`
/// is R with jacobian = tangent_onb · R, so chart coordinates map to tangent
/// frame coordinates through R and back through `frame_to_chart`.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub point: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    pub tangent_onb: DMatrix<f64>,
    pub normal_onb: DMatrix<f64>,
    pub induced_metric: DMatrix<f64>,
    pub chart_to_frame: DMatrix<f64>,
    pub frame_to_chart: DMatrix<f64>,
}

impl FrameData {
    pub fn chart_dim(&self) -> usize {
        self.tangent_onb.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.tangent_onb.nrows()
    }

    pub fn codim(&self) -> usize {
        self.normal_onb.ncols()
    }

    /// Tangent-frame coordinates of an ambient vector (orthogonal projection).
    pub fn tangent_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.tangent_onb.transpose() * v
    }

    /// Normal-frame coordinates of an ambient vector.
    pub fn normal_coords(&self, v: &DVector<f64>) -> DVector<f64> {
        self.normal_onb.transpose() * v
    }

    /// Ambient vector with the given tangent frame coordinates.
    pub fn tangent_from_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.tangent_onb * c
    }

    pub fn normal_from_coords(&self, c: &DVector<f64>) -> DVector<f64> {
        &self.normal_onb * c
    }

    /// Orthogonal projector onto the tangent space, applied to `v`.
    pub fn project_tangent(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.tangent_onb * (self.tangent_onb.transpose() * v)
    }

    pub fn project_normal(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project_tangent(v)
    }
}

/// Ambient vector known to lie in the tangent space at `point`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub point: DVector<f64>,
    pub ambient: DVector<f64>,
}

/// Ambient vector known to lie in the normal space at `point`.
#[derive(Debug, Clone)]
pub struct NormalVector {
    pub point: DVector<f64>,
    pub ambient: DVector<f64>,
}

/// Modified Gram–Schmidt with one reorthogonalization pass; columns of the
/// result are orthonormal. Returns the R factor as well (input = Q·R).
pub(crate) fn mgs(columns: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = (columns.nrows(), columns.ncols());
    let mut q = DMatrix::<f64>::zeros(m, n);
    let mut r = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut v = columns.column(j).clone_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&v);
                r[(i, j)] += c;
                v -= c * qi.clone_owned();
            }
        }
        let norm = v.norm();
        r[(j, j)] = norm;
        if norm > 0.0 {
            v /= norm;
        }
        q.set_column(j, &v);
    }
    (q, r)
}

/// Builds the frame data at `x`. Errors when the Jacobian is rank deficient
/// (smallest singular value below [`RANK_TOL`] times the largest).
pub fn frame_at(f: &Immersion, x: &DVector<f64>) -> Result<FrameData> {
    let jac = f.jacobian(x)?;
    let m = f.ambient_dim();
    let r = f.codim();

    let svals = jac.clone().singular_values();
    let smax = svals.max();
    let smin = svals.min();
    if smin < RANK_TOL * smax {
        return Err(Error::Degenerate(format!(
            "jacobian rank deficient at {:?} (sigma_min/sigma_max = {:.3e})",
            x.as_slice(),
            smin / smax
        )));
    }

    let (tangent_onb, r_factor) = mgs(&jac);
    let frame_to_chart = r_factor.clone().try_inverse().ok_or_else(|| {
        Error::Degenerate("tangent frame triangular factor is singular".into())
    })?;

    // Complete to an ambient orthonormal basis: sweep the ambient axes in
    // order, keep the ones with a residual after projection.
    let mut normal_cols: Vec<DVector<f64>> = Vec::with_capacity(r);
    for axis in 0..m {
        if normal_cols.len() == r {
            break;
        }
        let mut v = DVector::zeros(m);
        v[axis] = 1.0;
        for _pass in 0..2 {
            let vt = tangent_onb.transpose() * &v;
            v -= &tangent_onb * vt;
            for nc in &normal_cols {
                let c = nc.dot(&v);
                v -= c * nc;
            }
        }
        let norm = v.norm();
        if norm > COMPLETION_TOL {
            normal_cols.push(v / norm);
        }
    }
    if normal_cols.len() != r {
        return Err(Error::Degenerate(format!(
            "normal frame completion found {} of {r} directions",
            normal_cols.len()
        )));
    }
    let normal_onb = DMatrix::from_columns(&normal_cols);
    let induced_metric = jac.transpose() * &jac;

    Ok(FrameData {
        point: x.clone(),
        jacobian: jac,
        tangent_onb,
        normal_onb,
        induced_metric,
        chart_to_frame: r_factor,
        frame_to_chart,
    })
}

/// Splits an ambient vector into tangential and normal parts at the frame
/// point; the two parts recompose to `v` exactly up to rounding.
pub fn split(v: &DVector<f64>, frame: &FrameData) -> (TangentVector, NormalVector) {
    let vt = frame.project_tangent(v);
    let vn = v - &vt;
    (
        TangentVector {
            point: frame.point.clone(),
            ambient: vt,
        },
        NormalVector {
            point: frame.point.clone(),
            ambient: vn,
        },
    )
}
