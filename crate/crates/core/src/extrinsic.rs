//! Extrinsic geometry of an immersed submanifold in flat ambient space.
//!
//! The second fundamental form of coordinate fields is the normal part of
//! the ambient coordinate Hessian, which forward AD supplies exactly; shape
//! operators follow by metric duality. Everything that differentiates a
//! frame-dependent field along the submanifold (the normal connection, the
//! covariant derivatives of the induced blocks, field brackets of
//! frame-coefficient fields) crosses exactly one central-difference layer
//! with step proportional to the chart box, so those residuals carry the
//! looser finite-difference tolerance.
//!
//! The normal frame field entering the connection forms is the
//! deterministic axis-order completion from [`crate::immersion`]; the forms
//! are basis-dependent, and only basis-invariant consequences (antisymmetry,
//! closure of the mutual identities) are asserted.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::immersion::{frame_at, FrameData, Immersion, TangentVector};
use crate::jet::{eval_gradient, eval_value};
use crate::metallic::StructureOperator;
use crate::report::CheckResult;
use crate::sampling::{map_items, sample_chart_points, SamplingPlan, SplitMix64};
use crate::slant::{DistributionSelector, DistributionSpec};

/// Relative central-difference step (scaled by the chart box width).
pub const FD_REL: f64 = 1e-5;

fn fd_step(imm: &Immersion) -> f64 {
    let min_width = imm
        .chart_box()
        .iter()
        .map(|(lo, hi)| hi - lo)
        .fold(f64::INFINITY, f64::min);
    FD_REL * min_width
}

/// A tangent vector field expressed in chart coordinates.
pub trait TangentField: Sync {
    fn chart_components(&self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Entry (j, i) is ∂X^j/∂u_i.
    fn chart_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>>;
}

/// Serde-facing field description: a chart coordinate field or explicit
/// component expressions.
#[derive(Debug, Clone)]
pub enum ChartVectorField {
    Coordinate(usize),
    Components(Vec<Expr>),
}

/// Runtime binding of a [`ChartVectorField`] to its immersion.
pub struct BoundField<'a> {
    imm: &'a Immersion,
    field: ChartVectorField,
}

impl ChartVectorField {
    pub fn bind<'a>(&self, imm: &'a Immersion) -> Result<BoundField<'a>> {
        match self {
            ChartVectorField::Coordinate(i) if *i >= imm.chart_dim() => {
                return Err(Error::Scenario(format!(
                    "coordinate field {i} out of range for chart dimension {}",
                    imm.chart_dim()
                )))
            }
            ChartVectorField::Components(comps) if comps.len() != imm.chart_dim() => {
                return Err(Error::Dimension(format!(
                    "field has {} components for chart dimension {}",
                    comps.len(),
                    imm.chart_dim()
                )))
            }
            _ => {}
        }
        Ok(BoundField {
            imm,
            field: self.clone(),
        })
    }
}

impl TangentField for BoundField<'_> {
    fn chart_components(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.imm.chart_dim();
        match &self.field {
            ChartVectorField::Coordinate(i) => {
                let mut v = DVector::zeros(n);
                v[*i] = 1.0;
                Ok(v)
            }
            ChartVectorField::Components(comps) => {
                let ctx = self.imm.eval_ctx();
                let mut v = DVector::zeros(n);
                for (j, c) in comps.iter().enumerate() {
                    v[j] = eval_value(c, x, &ctx)?;
                }
                Ok(v)
            }
        }
    }

    fn chart_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.imm.chart_dim();
        match &self.field {
            ChartVectorField::Coordinate(_) => Ok(DMatrix::zeros(n, n)),
            ChartVectorField::Components(comps) => {
                let ctx = self.imm.eval_ctx();
                let mut jac = DMatrix::zeros(n, n);
                for (j, c) in comps.iter().enumerate() {
                    let (_, grad) = eval_gradient(c, x, &ctx)?;
                    for i in 0..n {
                        jac[(j, i)] = grad[i];
                    }
                }
                Ok(jac)
            }
        }
    }
}

/// Tangent-frame coefficient columns evaluated through the frame at each
/// point; its chart Jacobian is finite-difference (frames are algorithmic).
pub struct FrameCoeffField<'a> {
    imm: &'a Immersion,
    coeffs: Vec<Expr>,
}

impl TangentField for FrameCoeffField<'_> {
    fn chart_components(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let frame = frame_at(self.imm, x)?;
        let ctx = self.imm.eval_ctx();
        let mut c = DVector::zeros(self.coeffs.len());
        for (i, e) in self.coeffs.iter().enumerate() {
            c[i] = eval_value(e, x, &ctx)?;
        }
        Ok(&frame.frame_to_chart * c)
    }

    fn chart_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = self.imm.chart_dim();
        let h = fd_step(self.imm);
        let mut jac = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let d = (self.chart_components(&xp)? - self.chart_components(&xm)?) / (2.0 * h);
            for j in 0..n {
                jac[(j, i)] = d[j];
            }
        }
        Ok(jac)
    }
}

/// Spanning fields of a distribution, bracketable along the chart.
pub fn distribution_fields<'a>(
    d: &DistributionSpec,
    imm: &'a Immersion,
) -> Result<Vec<Box<dyn TangentField + 'a>>> {
    match &d.selector {
        DistributionSelector::Coords(idxs) => idxs
            .iter()
            .map(|&i| {
                ChartVectorField::Coordinate(i)
                    .bind(imm)
                    .map(|f| Box::new(f) as Box<dyn TangentField + 'a>)
            })
            .collect(),
        DistributionSelector::FrameColumns(cols) => Ok(cols
            .iter()
            .map(|col| {
                Box::new(FrameCoeffField {
                    imm,
                    coeffs: col.clone(),
                }) as Box<dyn TangentField + 'a>
            })
            .collect()),
    }
}

/// Chart-coordinate Lie bracket [X, Y]^j = Σ_i (X^i ∂_i Y^j − Y^i ∂_i X^j).
pub fn chart_bracket(
    x: &DVector<f64>,
    xf: &dyn TangentField,
    yf: &dyn TangentField,
) -> Result<DVector<f64>> {
    let xc = xf.chart_components(x)?;
    let yc = yf.chart_components(x)?;
    let jx = xf.chart_jacobian(x)?;
    let jy = yf.chart_jacobian(x)?;
    Ok(&jy * xc - &jx * yc)
}

/// Central difference of an ambient-vector field over the chart, along the
/// chart direction `v`; the result is linear in `v`. The step is taken
/// along the unit direction so truncation error does not grow with ‖v‖³.
pub fn ambient_field_derivative<F>(
    imm: &Immersion,
    x: &DVector<f64>,
    v: &DVector<f64>,
    field: F,
) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let scale = v.norm();
    if scale == 0.0 {
        return Ok(DVector::zeros(field(x)?.len()));
    }
    let unit = v / scale;
    let h = fd_step(imm);
    let xp = x + h * &unit;
    let xm = x - h * &unit;
    Ok((field(&xp)? - field(&xm)?) * (scale / (2.0 * h)))
}

fn scalar_field_derivative<F>(
    imm: &Immersion,
    x: &DVector<f64>,
    v: &DVector<f64>,
    field: F,
) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let scale = v.norm();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let unit = v / scale;
    let h = fd_step(imm);
    let xp = x + h * &unit;
    let xm = x - h * &unit;
    Ok((field(&xp)? - field(&xm)?) * (scale / (2.0 * h)))
}

/// Second fundamental form, shape operators and normal-connection forms at
/// one chart point.
#[derive(Debug, Clone)]
pub struct ExtrinsicData {
    pub frame: FrameData,
    /// Per normal direction α: the m'×m' matrix h_α(∂_i, ∂_j).
    pub h_chart: Vec<DMatrix<f64>>,
    /// Per normal direction α: the shape operator in the orthonormal
    /// tangent frame (symmetric).
    pub shape_frame: Vec<DMatrix<f64>>,
    /// Per chart direction i: the antisymmetric r×r matrix l_αβ(∂_i).
    pub l_forms: Vec<DMatrix<f64>>,
}

impl ExtrinsicData {
    pub fn codim(&self) -> usize {
        self.h_chart.len()
    }

    /// h(X, Y) in normal-frame coordinates for chart-coordinate arguments.
    pub fn h_normal_coords(&self, xc: &DVector<f64>, yc: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.codim(), |a, _| (xc.transpose() * &self.h_chart[a] * yc)[(0, 0)])
    }

    /// h(X, Y) as an ambient normal vector.
    pub fn h_ambient(&self, xc: &DVector<f64>, yc: &DVector<f64>) -> DVector<f64> {
        self.frame
            .normal_from_coords(&self.h_normal_coords(xc, yc))
    }

    /// Shape operator for the normal vector with frame coordinates `v`,
    /// applied to tangent-frame coordinates `x` (A is linear in v).
    pub fn shape_apply(&self, v: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(x.len());
        for (a, shape) in self.shape_frame.iter().enumerate() {
            out += v[a] * (shape * x);
        }
        out
    }

    /// l_αβ evaluated on the chart direction `xc`.
    pub fn l_of_dir(&self, xc: &DVector<f64>) -> DMatrix<f64> {
        let r = self.codim();
        let mut out = DMatrix::zeros(r, r);
        for (i, li) in self.l_forms.iter().enumerate() {
            out += xc[i] * li;
        }
        out
    }
}

/// Assembles extrinsic data at `x`: h from the exact coordinate Hessian,
/// shape operators by duality, connection forms by differentiating the
/// completed normal frame along coordinate lines.
pub fn extrinsic_at(imm: &Immersion, x: &DVector<f64>) -> Result<ExtrinsicData> {
    let frame = frame_at(imm, x)?;
    let n = imm.chart_dim();
    let r = imm.codim();
    let hess = imm.coordinate_hessian(x)?;

    let mut h_chart = vec![DMatrix::zeros(n, n); r];
    for i in 0..n {
        for j in 0..n {
            let hn = frame.normal_coords(&hess[i][j]);
            for (a, h_a) in h_chart.iter_mut().enumerate() {
                h_a[(i, j)] = hn[a];
            }
        }
    }

    // Shape operators in the orthonormal tangent frame: with C mapping
    // frame coordinates to chart coordinates, A_α = Cᵀ h_α C.
    let c = &frame.frame_to_chart;
    let shape_frame: Vec<DMatrix<f64>> = h_chart
        .iter()
        .map(|h_a| c.transpose() * h_a * c)
        .collect();

    // Normal connection forms along coordinate lines, one finite-difference
    // layer on the completed frame field.
    let mut l_forms = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = imm.chart_box()[i];
        let h = FD_REL * (hi - lo);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let fp = frame_at(imm, &xp)?;
        let fm = frame_at(imm, &xm)?;
        let dn = (&fp.normal_onb - &fm.normal_onb) / (2.0 * h);
        l_forms.push(dn.transpose() * &frame.normal_onb);
    }

    Ok(ExtrinsicData {
        frame,
        h_chart,
        shape_frame,
        l_forms,
    })
}

/// Pushed-forward field as an ambient vector at chart point `y`.
fn push_forward(imm: &Immersion, field: &dyn TangentField, y: &DVector<f64>) -> Result<DVector<f64>> {
    let comps = field.chart_components(y)?;
    Ok(imm.jacobian(y)? * comps)
}

/// Levi-Civita connection of the induced metric: the tangential part of the
/// ambient derivative of the pushed-forward field.
pub fn induced_connection(
    imm: &Immersion,
    x: &DVector<f64>,
    xf: &dyn TangentField,
    yf: &dyn TangentField,
) -> Result<TangentVector> {
    let frame = frame_at(imm, x)?;
    let v = xf.chart_components(x)?;
    let deriv = ambient_field_derivative(imm, x, &v, |y| push_forward(imm, yf, y))?;
    Ok(TangentVector {
        point: x.clone(),
        ambient: frame.project_tangent(&deriv),
    })
}

/// Derivative blocks of the induced decomposition at a point, computed for
/// one pair of tangent fields. All outputs are ambient vectors.
pub struct InducedDerivatives {
    /// (∇_X T)Y = ∇_X(TY) − T(∇_X Y); tangent.
    pub dt: DVector<f64>,
    /// (∇̄_X N)Y = ∇⊥_X(NY) − N(∇_X Y); normal.
    pub dn: DVector<f64>,
    /// ∇_X Y; tangent.
    pub conn: DVector<f64>,
    /// ∇⊥_X (NY); normal.
    pub normal_conn: DVector<f64>,
}

fn tangential_of(op: &StructureOperator, frame: &FrameData, v: &DVector<f64>) -> DVector<f64> {
    frame.project_tangent(&op.apply(v))
}

fn normal_of(op: &StructureOperator, frame: &FrameData, v: &DVector<f64>) -> DVector<f64> {
    let jv = op.apply(v);
    &jv - frame.project_tangent(&jv)
}

/// Covariant derivatives of the tangential and normal parts of the
/// structure operator along `xf`, applied to `yf`.
pub fn covariant_blocks(
    imm: &Immersion,
    op: &StructureOperator,
    x: &DVector<f64>,
    xf: &dyn TangentField,
    yf: &dyn TangentField,
) -> Result<InducedDerivatives> {
    let frame = frame_at(imm, x)?;
    let v = xf.chart_components(x)?;

    let conn = induced_connection(imm, x, xf, yf)?.ambient;

    let ty_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let f = frame_at(imm, y)?;
        Ok(tangential_of(op, &f, &push_forward(imm, yf, y)?))
    };
    let dt_raw = ambient_field_derivative(imm, x, &v, ty_field)?;
    let dt = frame.project_tangent(&dt_raw) - tangential_of(op, &frame, &conn);

    let ny_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let f = frame_at(imm, y)?;
        Ok(normal_of(op, &f, &push_forward(imm, yf, y)?))
    };
    let dn_raw = ambient_field_derivative(imm, x, &v, ny_field)?;
    let normal_conn = &dn_raw - frame.project_tangent(&dn_raw);
    let dn = &normal_conn - normal_of(op, &frame, &conn);

    Ok(InducedDerivatives {
        dt,
        dn,
        conn,
        normal_conn,
    })
}

/// (∇_X t)V and (∇̄_X n)V for a normal field with constant frame
/// coefficients `v_coeffs`; both ambient vectors, plus ∇⊥_X V.
pub struct NormalBlockDerivatives {
    pub dt_map: DVector<f64>,
    pub dn_map: DVector<f64>,
    pub normal_conn: DVector<f64>,
}

pub fn covariant_normal_blocks(
    imm: &Immersion,
    op: &StructureOperator,
    x: &DVector<f64>,
    xf: &dyn TangentField,
    v_coeffs: &DVector<f64>,
) -> Result<NormalBlockDerivatives> {
    let frame = frame_at(imm, x)?;
    let v = xf.chart_components(x)?;

    let v_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let f = frame_at(imm, y)?;
        Ok(f.normal_from_coords(v_coeffs))
    };
    let dv_raw = ambient_field_derivative(imm, x, &v, v_field)?;
    let normal_conn = &dv_raw - frame.project_tangent(&dv_raw);

    let tv_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let f = frame_at(imm, y)?;
        Ok(tangential_of(op, &f, &v_field(y)?))
    };
    let dt_raw = ambient_field_derivative(imm, x, &v, tv_field)?;
    let dt_map = frame.project_tangent(&dt_raw) - tangential_of(op, &frame, &normal_conn);

    let nv_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
        let f = frame_at(imm, y)?;
        Ok(normal_of(op, &f, &v_field(y)?))
    };
    let dn_raw = ambient_field_derivative(imm, x, &v, nv_field)?;
    let dn_map = (&dn_raw - frame.project_tangent(&dn_raw)) - normal_of(op, &frame, &normal_conn);

    Ok(NormalBlockDerivatives {
        dt_map,
        dn_map,
        normal_conn,
    })
}

/// Random field with affine components c₀ + Σ c_k u_k.
fn affine_field<'a>(rng: &mut SplitMix64, imm: &'a Immersion) -> Result<BoundField<'a>> {
    let n = imm.chart_dim();
    let comps: Vec<Expr> = (0..n)
        .map(|_| {
            let mut e = Expr::number(rng.uniform(-1.0, 1.0));
            for k in 0..n {
                e = Expr::sum(
                    e,
                    Expr::product(Expr::number(rng.uniform(-1.0, 1.0)), Expr::var(k)),
                );
            }
            e
        })
        .collect();
    ChartVectorField::Components(comps).bind(imm)
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Basic extrinsic checks: symmetry of h, closure of the shape operator
/// against the differentiated normal frame, antisymmetry of the connection
/// forms.
pub fn verify_extrinsic_basics(
    imm: &Immersion,
    plan: &SamplingPlan,
) -> Result<Vec<CheckResult>> {
    let points = sample_chart_points(imm.chart_box(), plan.point_count, plan.seed);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();

    struct Out {
        h_sym: f64,
        weingarten: f64,
        l_antisym: f64,
    }
    let per_point = map_items(&indexed, |(idx, x)| -> Result<Out> {
        let data = extrinsic_at(imm, x)?;
        let mut out = Out {
            h_sym: 0.0,
            weingarten: 0.0,
            l_antisym: 0.0,
        };
        for h_a in &data.h_chart {
            out.h_sym = out.h_sym.max((h_a - h_a.transpose()).amax());
        }
        for li in &data.l_forms {
            out.l_antisym = out.l_antisym.max((li + li.transpose()).amax());
        }
        // Independent route to the shape operator: the tangential part of
        // the derivative of the normal frame field is −A_α X.
        let mut rng = SplitMix64::substream(plan.seed, *idx as u64);
        let n = imm.chart_dim();
        let r = imm.codim();
        for _ in 0..2 {
            let xc = rng.unit_vector(n);
            let x_frame = &data.frame.chart_to_frame * &xc;
            for a in 0..r {
                let n_field = |y: &DVector<f64>| -> Result<DVector<f64>> {
                    Ok(frame_at(imm, y)?.normal_onb.column(a).clone_owned())
                };
                let dn = ambient_field_derivative(imm, x, &xc, n_field)?;
                let tang = data.frame.tangent_coords(&dn);
                let via_h = &data.shape_frame[a] * &x_frame;
                out.weingarten = out.weingarten.max(max_abs(&(tang + via_h)));
            }
        }
        Ok(out)
    });

    let mut h_sym: f64 = 0.0;
    let mut weingarten: f64 = 0.0;
    let mut l_antisym: f64 = 0.0;
    for out in per_point {
        let out = out?;
        h_sym = h_sym.max(out.h_sym);
        weingarten = weingarten.max(out.weingarten);
        l_antisym = l_antisym.max(out.l_antisym);
    }
    let n = indexed.len();
    Ok(vec![
        CheckResult::asserted(
            "h_symmetry",
            "second fundamental form is symmetric",
            h_sym,
            plan.tol_algebraic,
            n,
        ),
        CheckResult::asserted(
            "shape_duality",
            "shape operators close against the differentiated normal frame",
            weingarten,
            plan.tol_fd,
            n,
        ),
        CheckResult::asserted(
            "normal_connection_antisymmetry",
            "normal connection forms are antisymmetric",
            l_antisym,
            plan.tol_fd,
            n,
        ),
    ])
}

/// Metric compatibility and torsion-freeness of the induced connection.
pub fn verify_connection(imm: &Immersion, plan: &SamplingPlan) -> Result<Vec<CheckResult>> {
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(40), plan.seed);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();

    struct Out {
        metric: f64,
        torsion: f64,
    }
    let per_point = map_items(&indexed, |(idx, x)| -> Result<Out> {
        let mut rng = SplitMix64::substream(plan.seed, *idx as u64);
        let xf = affine_field(&mut rng, imm)?;
        let yf = affine_field(&mut rng, imm)?;
        let zf = affine_field(&mut rng, imm)?;
        let frame = frame_at(imm, x)?;

        let v = xf.chart_components(x)?;
        let inner_yz = |y: &DVector<f64>| -> Result<f64> {
            Ok(push_forward(imm, &yf, y)?.dot(&push_forward(imm, &zf, y)?))
        };
        let lhs = scalar_field_derivative(imm, x, &v, inner_yz)?;
        let dxy = induced_connection(imm, x, &xf, &yf)?.ambient;
        let dxz = induced_connection(imm, x, &xf, &zf)?.ambient;
        let y_amb = push_forward(imm, &yf, x)?;
        let z_amb = push_forward(imm, &zf, x)?;
        let metric = (lhs - (dxy.dot(&z_amb) + y_amb.dot(&dxz))).abs();

        let dyx = induced_connection(imm, x, &yf, &xf)?.ambient;
        let bracket = chart_bracket(x, &xf, &yf)?;
        let bracket_amb = &frame.jacobian * bracket;
        let torsion = max_abs(&(&dxy - &dyx - &bracket_amb));
        Ok(Out { metric, torsion })
    });

    let mut metric: f64 = 0.0;
    let mut torsion: f64 = 0.0;
    for out in per_point {
        let out = out?;
        metric = metric.max(out.metric);
        torsion = torsion.max(out.torsion);
    }
    let n = indexed.len();
    Ok(vec![
        CheckResult::asserted(
            "connection_metric_compatibility",
            "induced connection is metric",
            metric,
            plan.tol_fd,
            n,
        ),
        CheckResult::asserted(
            "connection_torsion_free",
            "induced connection is torsion-free against chart brackets",
            torsion,
            plan.tol_fd,
            n,
        ),
    ])
}

/// Derivative identities tying (∇T, ∇̄N, ∇t, ∇̄n) to the second fundamental
/// form, the shape operators and the induced forms, for a constant ambient
/// structure operator.
pub fn verify_derivative_props(
    imm: &Immersion,
    op: &StructureOperator,
    plan: &SamplingPlan,
) -> Result<Vec<CheckResult>> {
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(50), plan.seed);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();

    struct Out {
        gauss_dt: f64,
        gauss_dn: f64,
        weingarten_dt: f64,
        weingarten_dn: f64,
        forms_dt: f64,
        forms_du: f64,
        dt_symmetric: f64,
    }
    let per_point = map_items(&indexed, |(idx, x)| -> Result<Out> {
        let mut rng = SplitMix64::substream(plan.seed, *idx as u64);
        let xf = affine_field(&mut rng, imm)?;
        let yf = affine_field(&mut rng, imm)?;
        let zf = affine_field(&mut rng, imm)?;
        let data = extrinsic_at(imm, x)?;
        let frame = &data.frame;
        let r = imm.codim();

        let xc = xf.chart_components(x)?;
        let yc = yf.chart_components(x)?;
        let y_amb = &frame.jacobian * &yc;
        let x_frame = &frame.chart_to_frame * &xc;

        let der = covariant_blocks(imm, op, x, &xf, &yf)?;

        // Tangential identity: (∇_X T)Y = A_{NY}X + t h(X,Y).
        let ny_coords = frame.normal_coords(&op.apply(&y_amb));
        let a_ny_x = frame.tangent_from_coords(&data.shape_apply(&ny_coords, &x_frame));
        let h_xy = data.h_ambient(&xc, &yc);
        let t_h = frame.project_tangent(&op.apply(&h_xy));
        let gauss_dt = max_abs(&(&der.dt - &a_ny_x - &t_h));

        // Normal identity: (∇̄_X N)Y = n h(X,Y) − h(X, TY).
        let n_h = normal_of(op, frame, &h_xy);
        let ty_amb = tangential_of(op, frame, &y_amb);
        let ty_chart = &frame.frame_to_chart * frame.tangent_coords(&ty_amb);
        let h_x_ty = data.h_ambient(&xc, &ty_chart);
        let gauss_dn = max_abs(&(&der.dn - &n_h + &h_x_ty));

        // Normal-block identities with a random constant-coefficient
        // normal field V: (∇_X t)V = A_{nV}X − T A_V X and
        // (∇̄_X n)V = −h(X, tV) − N A_V X.
        let v_coeffs = rng.unit_vector(r);
        let nder = covariant_normal_blocks(imm, op, x, &xf, &v_coeffs)?;
        let v_amb = frame.normal_from_coords(&v_coeffs);
        let nv_coords = frame.normal_coords(&op.apply(&v_amb));
        let a_nv_x = frame.tangent_from_coords(&data.shape_apply(&nv_coords, &x_frame));
        let a_v_x_frame = data.shape_apply(&v_coeffs, &x_frame);
        let a_v_x = frame.tangent_from_coords(&a_v_x_frame);
        let t_a_v_x = tangential_of(op, frame, &a_v_x);
        let weingarten_dt = max_abs(&(&nder.dt_map - &a_nv_x + &t_a_v_x));

        let tv_amb = tangential_of(op, frame, &v_amb);
        let tv_chart = &frame.frame_to_chart * frame.tangent_coords(&tv_amb);
        let h_x_tv = data.h_ambient(&xc, &tv_chart);
        let n_a_v_x = normal_of(op, frame, &a_v_x);
        let weingarten_dn = max_abs(&(&nder.dn_map + &h_x_tv + &n_a_v_x));

        // Form identities: (∇_X T)Y against h_α ξ_α + u_α(Y) A_α X, and the
        // covariant derivative of each u_α.
        let h_coords = data.h_normal_coords(&xc, &yc);
        let mut forms_rhs = DVector::zeros(frame.ambient_dim());
        for a in 0..r {
            let n_col = frame.normal_onb.column(a).clone_owned();
            let xi_a = frame.project_tangent(&op.apply(&n_col));
            forms_rhs += h_coords[a] * xi_a;
            let u_a_y = op.apply(&y_amb).dot(&n_col);
            let a_a_x = frame.tangent_from_coords(&(&data.shape_frame[a] * &x_frame));
            forms_rhs += u_a_y * a_a_x;
        }
        let forms_dt = max_abs(&(&der.dt - &forms_rhs));

        // (∇_X u_α)Y = −h_α(X, TY) + Σ_β [u_β(Y) l_αβ(X) + h_β(X, Y) a_βα].
        let l_x = data.l_of_dir(&xc);
        let nn = frame.normal_onb.transpose() * &op.matrix * &frame.normal_onb;
        let h_x_ty_coords = data.h_normal_coords(&xc, &ty_chart);
        let u_y = frame.normal_coords(&op.apply(&y_amb));
        let mut forms_du: f64 = 0.0;
        for a in 0..r {
            let u_a_field = |y: &DVector<f64>| -> Result<f64> {
                let f = frame_at(imm, y)?;
                Ok(op
                    .apply(&push_forward(imm, &yf, y)?)
                    .dot(&f.normal_onb.column(a)))
            };
            let x_u_a_y = scalar_field_derivative(imm, x, &xc, u_a_field)?;
            let u_a_conn = op.apply(&der.conn).dot(&frame.normal_onb.column(a));
            let lhs = x_u_a_y - u_a_conn;
            let mut rhs = -h_x_ty_coords[a];
            for b in 0..r {
                rhs += u_y[b] * l_x[(a, b)] + h_coords[b] * nn[(b, a)];
            }
            forms_du = forms_du.max((lhs - rhs).abs());
        }

        // Self-adjointness of (∇_X T).
        let der_z = covariant_blocks(imm, op, x, &xf, &zf)?;
        let z_amb = push_forward(imm, &zf, x)?;
        let dt_symmetric = (der.dt.dot(&z_amb) - y_amb.dot(&der_z.dt)).abs();

        Ok(Out {
            gauss_dt,
            gauss_dn,
            weingarten_dt,
            weingarten_dn,
            forms_dt,
            forms_du,
            dt_symmetric,
        })
    });

    let mut agg = [0.0f64; 7];
    for out in per_point {
        let out = out?;
        agg[0] = agg[0].max(out.gauss_dt);
        agg[1] = agg[1].max(out.gauss_dn);
        agg[2] = agg[2].max(out.weingarten_dt);
        agg[3] = agg[3].max(out.weingarten_dn);
        agg[4] = agg[4].max(out.forms_dt);
        agg[5] = agg[5].max(out.forms_du);
        agg[6] = agg[6].max(out.dt_symmetric);
    }
    let n = indexed.len();
    let tol = plan.tol_fd;
    let tags: [(&str, &str); 7] = [
        ("derivative_tangential_gauss", "covariant derivative of the tangential block against shape and form terms"),
        ("derivative_normal_gauss", "covariant derivative of the normal-valued block against h terms"),
        ("derivative_tangential_weingarten", "covariant derivative of the normal-to-tangent block"),
        ("derivative_normal_weingarten", "covariant derivative of the normal-to-normal block"),
        ("derivative_tangential_forms", "tangential derivative identity in induced-form variables"),
        ("derivative_form_transport", "covariant derivative of the induced 1-forms"),
        ("derivative_tangential_selfadjoint", "covariant derivative of the tangential block is self-adjoint"),
    ];
    Ok(tags
        .iter()
        .zip(agg.iter())
        .map(|((tag, label), &res)| CheckResult::asserted(tag, label, res, tol, n))
        .collect())
}

/// Bracket decompositions: the tangential and normal parts of chart
/// brackets recovered from covariant derivatives, shape operators and
/// connection forms.
pub fn verify_bracket_props(
    imm: &Immersion,
    op: &StructureOperator,
    plan: &SamplingPlan,
) -> Result<Vec<CheckResult>> {
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(30), plan.seed);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();
    let n_chart = imm.chart_dim();

    struct Out {
        tangential: f64,
        normal: f64,
        tangential_forms: f64,
        normal_forms: f64,
    }
    let run_pair = |x: &DVector<f64>,
                    xf: &dyn TangentField,
                    yf: &dyn TangentField|
     -> Result<Out> {
        let data = extrinsic_at(imm, x)?;
        let frame = &data.frame;
        let r = imm.codim();
        let xc = xf.chart_components(x)?;
        let yc = yf.chart_components(x)?;
        let x_amb = &frame.jacobian * &xc;
        let y_amb = &frame.jacobian * &yc;
        let x_frame = &frame.chart_to_frame * &xc;

        let bracket = chart_bracket(x, xf, yf)?;
        let bracket_amb = &frame.jacobian * &bracket;
        let t_bracket = tangential_of(op, frame, &bracket_amb);
        let n_bracket = normal_of(op, frame, &bracket_amb);

        let der_xy = covariant_blocks(imm, op, x, xf, yf)?;
        let der_yx = covariant_blocks(imm, op, x, yf, xf)?;

        // ∇_X(TY) = (∇_X T)Y + T(∇_X Y), so recover the raw derivatives.
        let dx_ty = &der_xy.dt + tangential_of(op, frame, &der_xy.conn);
        let dy_tx = &der_yx.dt + tangential_of(op, frame, &der_yx.conn);

        let ny_coords = frame.normal_coords(&op.apply(&y_amb));
        let nx_coords = frame.normal_coords(&op.apply(&x_amb));
        let y_frame = &frame.chart_to_frame * &yc;
        let a_ny_x = frame.tangent_from_coords(&data.shape_apply(&ny_coords, &x_frame));
        let a_nx_y = frame.tangent_from_coords(&data.shape_apply(&nx_coords, &y_frame));
        let tangential = max_abs(&(&t_bracket - (&dx_ty - &dy_tx - &a_ny_x + &a_nx_y)));

        // Normal part: h(X,TY) − h(TX,Y) + ∇⊥_X NY − ∇⊥_Y NX.
        let ty_chart =
            &frame.frame_to_chart * frame.tangent_coords(&tangential_of(op, frame, &y_amb));
        let tx_chart =
            &frame.frame_to_chart * frame.tangent_coords(&tangential_of(op, frame, &x_amb));
        let h_x_ty = data.h_ambient(&xc, &ty_chart);
        let h_tx_y = data.h_ambient(&tx_chart, &yc);
        let normal = max_abs(
            &(&n_bracket - (&h_x_ty - &h_tx_y + &der_xy.normal_conn - &der_yx.normal_conn)),
        );

        // Same tangential content in induced-form variables.
        let mut form_terms = DVector::zeros(frame.ambient_dim());
        for a in 0..r {
            let a_a_x = frame.tangent_from_coords(&(&data.shape_frame[a] * &x_frame));
            let a_a_y = frame.tangent_from_coords(&(&data.shape_frame[a] * &y_frame));
            form_terms += ny_coords[a] * a_a_x - nx_coords[a] * a_a_y;
        }
        let tangential_forms = max_abs(&(&t_bracket - (&dx_ty - &dy_tx - &form_terms)));

        // Normal part in form variables: for each α,
        // u_α([X,Y]) = X(u_α(Y)) − Y(u_α(X)) + h_α(X,TY) − h_α(TX,Y)
        //              + Σ_β (u_β(X) l_αβ(Y) − u_β(Y) l_αβ(X)).
        let l_x = data.l_of_dir(&xc);
        let l_y = data.l_of_dir(&yc);
        let h_x_ty_c = data.h_normal_coords(&xc, &ty_chart);
        let h_tx_y_c = data.h_normal_coords(&tx_chart, &yc);
        let mut normal_forms: f64 = 0.0;
        for a in 0..r {
            let u_a = |zf: &dyn TangentField, y: &DVector<f64>| -> Result<f64> {
                let f = frame_at(imm, y)?;
                Ok(op
                    .apply(&push_forward(imm, zf, y)?)
                    .dot(&f.normal_onb.column(a)))
            };
            let lhs = n_bracket.dot(&frame.normal_onb.column(a));
            let x_of_uy = scalar_field_derivative(imm, x, &xc, |y| u_a(yf, y))?;
            let y_of_ux = scalar_field_derivative(imm, x, &yc, |y| u_a(xf, y))?;
            let mut rhs = x_of_uy - y_of_ux + h_x_ty_c[a] - h_tx_y_c[a];
            for b in 0..r {
                rhs += nx_coords[b] * l_y[(a, b)] - ny_coords[b] * l_x[(a, b)];
            }
            normal_forms = normal_forms.max((lhs - rhs).abs());
        }

        Ok(Out {
            tangential,
            normal,
            tangential_forms,
            normal_forms,
        })
    };

    let per_point = map_items(&indexed, |(idx, x)| -> Result<Out> {
        let mut rng = SplitMix64::substream(plan.seed, *idx as u64);
        // One commuting coordinate pair (when the chart has one) and one
        // generic affine pair per point.
        let mut out = Out {
            tangential: 0.0,
            normal: 0.0,
            tangential_forms: 0.0,
            normal_forms: 0.0,
        };
        if n_chart >= 2 {
            let i = (rng.next_u64() as usize) % n_chart;
            let j = ((rng.next_u64() as usize) % (n_chart - 1) + i + 1) % n_chart;
            let ci = ChartVectorField::Coordinate(i).bind(imm)?;
            let cj = ChartVectorField::Coordinate(j).bind(imm)?;
            let pair = run_pair(x, &ci, &cj)?;
            out.tangential = out.tangential.max(pair.tangential);
            out.normal = out.normal.max(pair.normal);
            out.tangential_forms = out.tangential_forms.max(pair.tangential_forms);
            out.normal_forms = out.normal_forms.max(pair.normal_forms);
        }
        let xf = affine_field(&mut rng, imm)?;
        let yf = affine_field(&mut rng, imm)?;
        let pair = run_pair(x, &xf, &yf)?;
        out.tangential = out.tangential.max(pair.tangential);
        out.normal = out.normal.max(pair.normal);
        out.tangential_forms = out.tangential_forms.max(pair.tangential_forms);
        out.normal_forms = out.normal_forms.max(pair.normal_forms);
        Ok(out)
    });

    let mut agg = [0.0f64; 4];
    for out in per_point {
        let out = out?;
        agg[0] = agg[0].max(out.tangential);
        agg[1] = agg[1].max(out.normal);
        agg[2] = agg[2].max(out.tangential_forms);
        agg[3] = agg[3].max(out.normal_forms);
    }
    let n = indexed.len();
    let tol = plan.tol_fd;
    Ok(vec![
        CheckResult::asserted(
            "bracket_tangential",
            "tangential part of chart brackets from covariant derivatives and shape terms",
            agg[0],
            tol,
            n,
        ),
        CheckResult::asserted(
            "bracket_normal",
            "normal part of chart brackets from h and the normal connection",
            agg[1],
            tol,
            n,
        ),
        CheckResult::asserted(
            "bracket_tangential_forms",
            "tangential bracket identity in induced-form variables",
            agg[2],
            tol,
            n,
        ),
        CheckResult::asserted(
            "bracket_normal_forms",
            "normal bracket identity in induced-form variables",
            agg[3],
            tol,
            n,
        ),
    ])
}

/// Max norm of the component of [X, Y] outside the span of the fields,
/// over sampled points and all field pairs. Zero for involutive spans.
pub fn bracket_complement_residual(
    imm: &Immersion,
    fields: &[Box<dyn TangentField + '_>],
    plan: &SamplingPlan,
    point_cap: usize,
) -> Result<f64> {
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(point_cap), plan.seed);
    let mut worst: f64 = 0.0;
    for x in &points {
        let frame = frame_at(imm, x)?;
        let k = fields.len();
        let mut span = DMatrix::zeros(imm.chart_dim(), k);
        for (c, f) in fields.iter().enumerate() {
            let comps = f.chart_components(x)?;
            span.set_column(c, &(&frame.chart_to_frame * comps));
        }
        let (basis, _) = crate::immersion::mgs(&span);
        for a in 0..k {
            for b in (a + 1)..k {
                let br = chart_bracket(x, fields[a].as_ref(), fields[b].as_ref())?;
                let br_frame = &frame.chart_to_frame * br;
                let proj = &basis * (basis.transpose() * &br_frame);
                worst = worst.max((br_frame - proj).amax());
            }
        }
    }
    Ok(worst)
}

/// Integrability criteria for the two distributions of a semi-slant split,
/// cross-validated against direct chart-bracket tests.
pub fn integrability_checks(
    imm: &Immersion,
    op: &StructureOperator,
    d1: &DistributionSpec,
    d2: &DistributionSpec,
    plan: &SamplingPlan,
) -> Result<Vec<CheckResult>> {
    let fields1 = distribution_fields(d1, imm)?;
    let fields2 = distribution_fields(d2, imm)?;
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(25), plan.seed);

    let mut du_symmetry: f64 = 0.0; // (∇_Y u_α)X = (∇_X u_α)Y on D1
    let mut h_commute: f64 = 0.0; // h(X, TY) = h(TX, Y) on D1
    let mut shape_commute: f64 = 0.0; // tangential J A_V = A_V J on D1
    let mut d2_forms: f64 = 0.0; // P1-part of D2 brackets via forms
    let mut d2_shape: f64 = 0.0; // P1-part of D2 brackets via shape ops

    for x in &points {
        let data = extrinsic_at(imm, x)?;
        let frame = &data.frame;
        let r = imm.codim();
        let b1 = d1.basis_at(imm, frame)?;
        let _b2 = d2.basis_at(imm, frame)?;
        let p1 = &b1 * b1.transpose();

        let du = |xf: &dyn TangentField, yf: &dyn TangentField, a: usize| -> Result<f64> {
            let xc = xf.chart_components(x)?;
            let u_a_field = |y: &DVector<f64>| -> Result<f64> {
                let f = frame_at(imm, y)?;
                Ok(op
                    .apply(&push_forward(imm, yf, y)?)
                    .dot(&f.normal_onb.column(a)))
            };
            let x_u_y = scalar_field_derivative(imm, x, &xc, u_a_field)?;
            let conn = induced_connection(imm, x, xf, yf)?.ambient;
            Ok(x_u_y - op.apply(&conn).dot(&frame.normal_onb.column(a)))
        };

        // D1 criteria over spanning pairs.
        for i in 0..fields1.len() {
            for j in (i + 1)..fields1.len() {
                let xf = fields1[i].as_ref();
                let yf = fields1[j].as_ref();
                for a in 0..r {
                    du_symmetry = du_symmetry.max((du(xf, yf, a)? - du(yf, xf, a)?).abs());
                }
                let xc = xf.chart_components(x)?;
                let yc = yf.chart_components(x)?;
                let x_amb = &frame.jacobian * &xc;
                let y_amb = &frame.jacobian * &yc;
                let ty_chart = &frame.frame_to_chart
                    * frame.tangent_coords(&tangential_of(op, frame, &y_amb));
                let tx_chart = &frame.frame_to_chart
                    * frame.tangent_coords(&tangential_of(op, frame, &x_amb));
                let h_diff =
                    data.h_normal_coords(&xc, &ty_chart) - data.h_normal_coords(&tx_chart, &yc);
                h_commute = h_commute.max(h_diff.amax());
            }
        }

        // Shape commutation on D1 directions, paired against D1 only: the
        // bilinear form g(J A_V X − A_V J X, Y) vanishes for X, Y in the
        // invariant distribution.
        let e = &frame.tangent_onb;
        let tt = e.transpose() * &op.matrix * e;
        for field in &fields1 {
            let xc = field.chart_components(x)?;
            let xfr = &frame.chart_to_frame * &xc;
            for shape in &data.shape_frame {
                let lhs = &tt * (shape * &xfr);
                let rhs = shape * (&tt * &xfr);
                shape_commute = shape_commute.max((b1.transpose() * (lhs - rhs)).amax());
            }
        }

        // D2 criteria over spanning pairs (trivially zero when D2 is a
        // line; the identities still must close).
        for i in 0..fields2.len() {
            for j in (i + 1)..fields2.len() {
                let xf = fields2[i].as_ref();
                let yf = fields2[j].as_ref();
                let der_xy = covariant_blocks(imm, op, x, xf, yf)?;
                let der_yx = covariant_blocks(imm, op, x, yf, xf)?;
                let dx_ty = &der_xy.dt + tangential_of(op, frame, &der_xy.conn);
                let dy_tx = &der_yx.dt + tangential_of(op, frame, &der_yx.conn);
                let lhs = &p1 * frame.tangent_coords(&(&dx_ty - &dy_tx));

                let xc = xf.chart_components(x)?;
                let yc = yf.chart_components(x)?;
                let x_frame = &frame.chart_to_frame * &xc;
                let y_frame = &frame.chart_to_frame * &yc;
                let nx = frame.normal_coords(&op.apply(&(&frame.jacobian * &xc)));
                let ny = frame.normal_coords(&op.apply(&(&frame.jacobian * &yc)));
                let mut rhs_forms = DVector::zeros(frame.chart_dim());
                for a in 0..r {
                    rhs_forms += ny[a] * (&p1 * (&data.shape_frame[a] * &x_frame))
                        - nx[a] * (&p1 * (&data.shape_frame[a] * &y_frame));
                }
                d2_forms = d2_forms.max((&lhs - &rhs_forms).amax());

                let a_ny_x = &p1 * data.shape_apply(&ny, &x_frame);
                let a_nx_y = &p1 * data.shape_apply(&nx, &y_frame);
                d2_shape = d2_shape.max((&lhs - (a_ny_x - a_nx_y)).amax());
            }
        }
    }

    // Direct bracket tests: the span of each distribution must absorb its
    // own brackets.
    let direct_d1 = bracket_complement_residual(imm, &fields1, plan, 25)?;
    let direct_d2 = bracket_complement_residual(imm, &fields2, plan, 25)?;

    let n = points.len();
    let tol = plan.tol_fd;
    Ok(vec![
        CheckResult::asserted(
            "integrability_d1_form_symmetry",
            "covariant derivatives of the induced forms are symmetric on the invariant distribution",
            du_symmetry,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d1_h_commute",
            "second fundamental form commutes with the tangential operator on the invariant distribution",
            h_commute,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d1_shape_commute",
            "shape operators commute tangentially with the structure operator on the invariant distribution",
            shape_commute,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d2_forms",
            "slant-distribution bracket criterion in form variables",
            d2_forms,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d2_shape",
            "slant-distribution bracket criterion through shape operators",
            d2_shape,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d1_direct_bracket",
            "chart brackets of the invariant distribution stay inside it",
            direct_d1,
            tol,
            n,
        ),
        CheckResult::asserted(
            "integrability_d2_direct_bracket",
            "chart brackets of the slant distribution stay inside it",
            direct_d2,
            tol,
            n,
        ),
    ])
}

/// Mixed-pair second fundamental form, mixed ∇̄N, shape-transfer residuals
/// and the mixed-geodesic implication.
pub fn mixed_geodesic_check(
    imm: &Immersion,
    op: &StructureOperator,
    d1: &DistributionSpec,
    d2: &DistributionSpec,
    plan: &SamplingPlan,
) -> Result<Vec<CheckResult>> {
    let fields1 = distribution_fields(d1, imm)?;
    let fields2 = distribution_fields(d2, imm)?;
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(25), plan.seed);

    let mut mixed_h: f64 = 0.0;
    let mut mixed_dn: f64 = 0.0;
    let mut transfer_a: f64 = 0.0; // A_{nV} vs T A_V
    let mut transfer_b: f64 = 0.0; // T A_V vs A_V T
    let mut duality_89: f64 = 0.0;

    for (pidx, x) in points.iter().enumerate() {
        let data = extrinsic_at(imm, x)?;
        let frame = &data.frame;
        let r = imm.codim();
        let b1 = d1.basis_at(imm, frame)?;
        let b2 = d2.basis_at(imm, frame)?;
        let mut rng = SplitMix64::substream(plan.seed, pidx as u64);

        // Pointwise mixed h over unit directions.
        for _ in 0..plan.dirs_per_point.min(8) {
            let x1 = &b1 * rng.unit_vector(d1.dim());
            let y2 = &b2 * rng.unit_vector(d2.dim());
            let xc = &frame.frame_to_chart * x1;
            let yc = &frame.frame_to_chart * y2;
            mixed_h = mixed_h.max(data.h_ambient(&xc, &yc).norm());
        }

        // Field-level mixed (∇̄_X N)Y and the transfer duality.
        for xf in &fields1 {
            for yf in &fields2 {
                let der = covariant_blocks(imm, op, x, xf.as_ref(), yf.as_ref())?;
                mixed_dn = mixed_dn.max(der.dn.norm());

                let xc = xf.chart_components(x)?;
                let yc = yf.chart_components(x)?;
                let x_frame = &frame.chart_to_frame * &xc;
                let y_amb = &frame.jacobian * &yc;
                for a in 0..r {
                    let n_col = frame.normal_onb.column(a).clone_owned();
                    let nv = frame.normal_coords(&op.apply(&n_col));
                    let a_nv_x = data.shape_apply(&nv, &x_frame);
                    let mut e_a = DVector::zeros(r);
                    e_a[a] = 1.0;
                    let a_v_x = data.shape_apply(&e_a, &x_frame);
                    let t_a_v_x =
                        frame.tangent_coords(&tangential_of(op, frame, &frame.tangent_from_coords(&a_v_x)));
                    let lhs89 = der.dn.dot(&n_col);
                    let rhs89 = frame
                        .tangent_from_coords(&(&a_nv_x - &t_a_v_x))
                        .dot(&y_amb);
                    duality_89 = duality_89.max((lhs89 - rhs89).abs());
                }
            }
        }

        // Shape transfer residuals over random directions (reported).
        let e = &frame.tangent_onb;
        let tt = e.transpose() * &op.matrix * e;
        for _ in 0..2 {
            let xfr = rng.unit_vector(frame.chart_dim());
            for a in 0..r {
                let n_col = frame.normal_onb.column(a).clone_owned();
                let nv = frame.normal_coords(&op.apply(&n_col));
                let a_nv_x = data.shape_apply(&nv, &xfr);
                let mut e_a = DVector::zeros(r);
                e_a[a] = 1.0;
                let a_v = &data.shape_frame[a];
                let t_a_v_x = &tt * (a_v * &xfr);
                let a_v_t_x = a_v * (&tt * &xfr);
                transfer_a = transfer_a.max((&a_nv_x - &t_a_v_x).amax());
                transfer_b = transfer_b.max((&t_a_v_x - &a_v_t_x).amax());
            }
        }
    }

    let n = points.len();
    let h_vanishes = mixed_h < 1e-9;
    let implication_residual = if h_vanishes { mixed_dn } else { 0.0 };
    let mut implication = CheckResult::asserted(
        "mixed_geodesic_implication",
        "vanishing mixed h forces vanishing mixed normal-part derivative",
        implication_residual,
        plan.tol_fd,
        n,
    );
    implication.details = Some(serde_json::json!({
        "mixed_h_max": mixed_h,
        "mixed_dn_max": mixed_dn,
        "mixed_h_vanishes": h_vanishes,
    }));

    Ok(vec![
        CheckResult::reported(
            "mixed_h",
            "max second fundamental form over mixed unit pairs",
            n,
            serde_json::json!({ "max_norm": mixed_h }),
        ),
        CheckResult::reported(
            "mixed_normal_derivative",
            "max normal-part covariant derivative over mixed field pairs",
            n,
            serde_json::json!({ "max_norm": mixed_dn }),
        ),
        CheckResult::reported(
            "shape_transfer",
            "shape operator transfer residuals under the structure operator",
            n,
            serde_json::json!({
                "structure_vs_tangential": transfer_a,
                "tangential_commutator": transfer_b,
            }),
        ),
        CheckResult::asserted(
            "weingarten_transfer_duality",
            "normal-part derivative pairs with the shape transfer defect",
            duality_89,
            plan.tol_fd,
            n,
        ),
        implication,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::metallic::MetallicParams;

    fn build(vars: &[&str], comps: &[&str], chart_box: &[(f64, f64)]) -> Immersion {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let comps: Vec<Expr> = comps.iter().map(|s| parse(s, &vars).unwrap()).collect();
        Immersion::new(vars, comps, chart_box.to_vec(), MetallicParams::golden()).unwrap()
    }

    fn example1() -> (StructureOperator, Immersion) {
        let params = MetallicParams::golden();
        let j = StructureOperator::metallic_diagonal(
            &[true, true, false, false, false, true, false],
            params,
        )
        .unwrap();
        let imm = build(
            &["u", "t1", "t2"],
            &[
                "u*cos(t1)",
                "u*sin(t1)",
                "u*cos(t2)",
                "u*sin(t2)",
                "u",
                "t1",
                "t2",
            ],
            &[(0.5, 3.0), (0.0, 1.55), (0.0, 1.55)],
        );
        (j, imm)
    }

    #[test]
    fn affine_plane_is_totally_geodesic() {
        let imm = build(
            &["u", "v"],
            &["u", "v", "0", "0"],
            &[(-1.0, 1.0), (-1.0, 1.0)],
        );
        let data = extrinsic_at(&imm, &DVector::from_row_slice(&[0.2, -0.3])).unwrap();
        for h in &data.h_chart {
            assert!(h.amax() < 1e-14);
        }
        for a in &data.shape_frame {
            assert!(a.amax() < 1e-14);
        }
        for l in &data.l_forms {
            assert!(l.amax() < 1e-9);
        }
    }

    #[test]
    fn circle_curvature_is_reciprocal_radius() {
        let rho = 1.7;
        let imm = build(
            &["u"],
            &["1.7*cos(u)", "1.7*sin(u)"],
            &[(0.1, 1.2)],
        );
        let x = DVector::from_row_slice(&[0.4]);
        let data = extrinsic_at(&imm, &x).unwrap();
        // ‖h(∂u, ∂u)‖ is the full second-derivative magnitude ρ.
        let h_amb = data.h_ambient(
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[1.0]),
        );
        assert!((h_amb.norm() - rho).abs() < 1e-12);
        // The unit-frame shape operator is -(1/ρ) I for the outward normal.
        assert_eq!(data.shape_frame.len(), 1);
        assert!((data.shape_frame[0][(0, 0)] + 1.0 / rho).abs() < 1e-12);
    }

    #[test]
    fn connection_is_levi_civita_on_the_helicoid() {
        let imm = build(
            &["u", "t"],
            &["u*cos(t)", "u*sin(t)", "t", "u"],
            &[(0.5, 2.0), (0.0, 3.0)],
        );
        let plan = SamplingPlan {
            point_count: 15,
            ..Default::default()
        };
        for c in verify_connection(&imm, &plan).unwrap() {
            assert!(c.pass, "{} residual {:.3e}", c.tag, c.residual);
        }
    }

    #[test]
    fn coordinate_connection_vanishes_on_affine_plane() {
        let imm = build(
            &["u", "v"],
            &["u", "v", "0", "0"],
            &[(-1.0, 1.0), (-1.0, 1.0)],
        );
        let xf = ChartVectorField::Coordinate(0).bind(&imm).unwrap();
        let yf = ChartVectorField::Coordinate(1).bind(&imm).unwrap();
        let d = induced_connection(&imm, &DVector::from_row_slice(&[0.0, 0.0]), &xf, &yf)
            .unwrap();
        assert!(d.ambient.amax() < 1e-9);
    }

    #[test]
    fn derivative_identities_on_the_surface_of_revolution() {
        let (j, imm) = example1();
        let plan = SamplingPlan {
            point_count: 12,
            ..Default::default()
        };
        for c in verify_derivative_props(&imm, &j, &plan).unwrap() {
            assert!(c.pass, "{} residual {:.3e}", c.tag, c.residual);
        }
    }

    #[test]
    fn bracket_identities_on_the_surface_of_revolution() {
        let (j, imm) = example1();
        let plan = SamplingPlan {
            point_count: 8,
            ..Default::default()
        };
        for c in verify_bracket_props(&imm, &j, &plan).unwrap() {
            assert!(c.pass, "{} residual {:.3e}", c.tag, c.residual);
        }
    }

    #[test]
    fn point_dependent_operator_breaks_the_derivative_identities() {
        // Scaling the operator by a chart function destroys parallelism;
        // the covariant blocks no longer close against the constant-J terms.
        let (j, imm) = example1();
        let x = DVector::from_row_slice(&[1.0, 0.5, 0.7]);
        let xf = ChartVectorField::Coordinate(0).bind(&imm).unwrap();
        let yf = ChartVectorField::Coordinate(1).bind(&imm).unwrap();
        let frame = frame_at(&imm, &x).unwrap();

        let scaled = |y: &DVector<f64>| -> Result<DVector<f64>> {
            let f = frame_at(&imm, y)?;
            let w = push_forward(&imm, &yf, y)?;
            let scale = 1.0 + 0.1 * y[0];
            Ok(f.project_tangent(&(scale * (&j.matrix * &w))))
        };
        let v = xf.chart_components(&x).unwrap();
        let dt_raw = ambient_field_derivative(&imm, &x, &v, scaled).unwrap();
        let conn = induced_connection(&imm, &x, &xf, &yf).unwrap().ambient;
        let scale_x = 1.0 + 0.1 * x[0];
        let dt_scaled = frame.project_tangent(&dt_raw)
            - frame.project_tangent(&(scale_x * (&j.matrix * &conn)));

        // Compare against the constant-operator right-hand side.
        let data = extrinsic_at(&imm, &x).unwrap();
        let xc = xf.chart_components(&x).unwrap();
        let yc = yf.chart_components(&x).unwrap();
        let y_amb = &frame.jacobian * &yc;
        let x_frame = &frame.chart_to_frame * &xc;
        let ny = frame.normal_coords(&(&j.matrix * &y_amb));
        let rhs = frame.tangent_from_coords(&data.shape_apply(&ny, &x_frame))
            + frame.project_tangent(&(&j.matrix * data.h_ambient(&xc, &yc)));
        let residual = (dt_scaled - rhs).amax();
        assert!(
            residual > 1e-3,
            "point-dependent scaling must break closure, residual {residual:.3e}"
        );
    }

    #[test]
    fn covariant_blocks_vanish_on_an_invariant_plane() {
        // A flat plane inside one eigenspace: the tangential block is the
        // constant σI, so its covariant derivative vanishes, as does the
        // normal-valued block.
        let params = MetallicParams::golden();
        let j = StructureOperator::metallic_diagonal(&[true, true, false, false], params)
            .unwrap();
        let imm = build(
            &["u", "v"],
            &["u", "v", "0", "0"],
            &[(-1.0, 1.0), (-1.0, 1.0)],
        );
        let x = DVector::from_row_slice(&[0.3, -0.2]);
        let xf = ChartVectorField::Coordinate(0).bind(&imm).unwrap();
        let yf = ChartVectorField::Components(vec![
            crate::expr::parse("v", imm.vars()).unwrap(),
            crate::expr::parse("u + 1", imm.vars()).unwrap(),
        ])
        .bind(&imm)
        .unwrap();
        let der = covariant_blocks(&imm, &j, &x, &xf, &yf).unwrap();
        assert!(der.dt.amax() < 1e-9, "dt {:.3e}", der.dt.amax());
        assert!(der.dn.amax() < 1e-9, "dn {:.3e}", der.dn.amax());
    }

    #[test]
    fn integrability_of_the_coordinate_split() {
        let (j, imm) = example1();
        let d1 = DistributionSpec::coords("D1", &[1, 2]);
        let d2 = DistributionSpec::coords("D2", &[0]);
        let plan = SamplingPlan {
            point_count: 10,
            ..Default::default()
        };
        for c in integrability_checks(&imm, &j, &d1, &d2, &plan).unwrap() {
            assert!(c.pass, "{} residual {:.3e}", c.tag, c.residual);
        }
    }

    #[test]
    fn twisted_span_fails_the_direct_bracket_test() {
        // span{∂u, ∂t1 + u ∂t2} is not involutive: the bracket is ∂t2.
        let (_, imm) = example1();
        let vars: Vec<String> = ["u", "t1", "t2"].iter().map(|s| s.to_string()).collect();
        let twist = ChartVectorField::Components(vec![
            parse("0", &vars).unwrap(),
            parse("1", &vars).unwrap(),
            parse("u", &vars).unwrap(),
        ]);
        let fields: Vec<Box<dyn TangentField>> = vec![
            Box::new(ChartVectorField::Coordinate(0).bind(&imm).unwrap()),
            Box::new(twist.bind(&imm).unwrap()),
        ];
        let plan = SamplingPlan {
            point_count: 10,
            ..Default::default()
        };
        let residual = bracket_complement_residual(&imm, &fields, &plan, 10).unwrap();
        assert!(residual > 0.1, "twisted span must fail, got {residual:.3e}");
    }

    #[test]
    fn mixed_geodesic_on_invariant_product_plane() {
        // An affine plane splits into two invariant lines; everything
        // extrinsic vanishes identically.
        let params = MetallicParams::golden();
        let j = StructureOperator::metallic_diagonal(&[true, false, true, false], params)
            .unwrap();
        let imm = build(
            &["u", "v"],
            &["u", "0", "v", "0"],
            &[(-1.0, 1.0), (-1.0, 1.0)],
        );
        let d1 = DistributionSpec::coords("D1", &[0]);
        let d2 = DistributionSpec::coords("D2", &[1]);
        let plan = SamplingPlan {
            point_count: 8,
            ..Default::default()
        };
        let checks = mixed_geodesic_check(&imm, &j, &d1, &d2, &plan).unwrap();
        for c in &checks {
            assert!(c.pass, "{} residual {:.3e}", c.tag, c.residual);
        }
        let mixed_h = checks.iter().find(|c| c.tag == "mixed_h").unwrap();
        let detail = mixed_h.details.as_ref().unwrap();
        assert!(detail["max_norm"].as_f64().unwrap() < 1e-12);
    }
}
