//! Suite orchestration: built-in scenarios, check scheduling, reporting.
//!
//! Checks always execute in the fixed canonical order below, whatever order
//! the scenario lists them in, and every random draw descends from the plan
//! seed, so a seed plus a scenario pins the whole report.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::extrinsic::{
    integrability_checks, mixed_geodesic_check, verify_bracket_props, verify_connection,
    verify_derivative_props, verify_extrinsic_basics,
};
use crate::immersion::{frame_at, split};
use crate::induced::verify_induced_structure;
use crate::metallic::{
    metallic_from_product, products_from_metallic, projectors, validate_structure, Branch,
    StructureOperator,
};
use crate::report::{round_sig, CheckResult, VerificationReport};
use crate::sampling::{map_items, sample_chart_points, SamplingPlan, SplitMix64};
use crate::scenario::{
    compile, CompiledScenario, DistributionConfig, ImmersionSpec, ParamSpec, Scenario,
    StructureSpec,
};
use crate::slant::{
    angle_relation_prediction, pointwise_angle_relation, slant_distribution_lambda,
    slant_identity_residuals, slant_test, AngleReport, SlantClass,
};

/// Canonical section order; scenario `checks` entries select a subset.
pub const CHECK_SECTIONS: [&str; 13] = [
    "structure",
    "projectors",
    "frames",
    "induced",
    "slant",
    "semi_slant",
    "angle_relation",
    "extrinsic",
    "connection",
    "derivative_props",
    "bracket_props",
    "integrability",
    "mixed_geodesic",
];

/// Upper edge of the angular chart intervals: π/2 − 0.01.
const ANGULAR_HI: f64 = std::f64::consts::FRAC_PI_2 - 0.01;

/// Scenario for the three-parameter surface of revolution in R⁷ with the
/// mixed-sign diagonal structure: an invariant angular plane and a proper
/// slant radial line.
pub fn builtin_example1(p: u32, q: u32) -> Scenario {
    Scenario {
        name: "example1".to_string(),
        params: ParamSpec { p, q },
        ambient_dim: 7,
        structure: StructureSpec::Diagonal(
            ["sigma", "sigma", "sigma_bar", "sigma_bar", "sigma_bar", "sigma", "sigma_bar"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        ),
        immersion: ImmersionSpec {
            vars: vec!["u".into(), "t1".into(), "t2".into()],
            components: vec![
                "u*cos(t1)".into(),
                "u*sin(t1)".into(),
                "u*cos(t2)".into(),
                "u*sin(t2)".into(),
                "u".into(),
                "t1".into(),
                "t2".into(),
            ],
            chart_box: vec![[0.5, 3.0], [0.0, ANGULAR_HI], [0.0, ANGULAR_HI]],
        },
        distributions: vec![
            DistributionConfig {
                name: "D1".into(),
                coords: Some(vec![1, 2]),
                frame_columns: None,
            },
            DistributionConfig {
                name: "D2".into(),
                coords: Some(vec![0]),
                frame_columns: None,
            },
        ],
        checks: Vec::new(),
        sampling: SamplingPlan::default(),
    }
}

/// Scenario for the n-cone family in R^{3n+1}: n invariant angular
/// directions and one proper slant radial direction.
pub fn builtin_example2(n: u32, p: u32, q: u32) -> Scenario {
    let n = n.max(1) as usize;
    let mut vars = vec!["u".to_string()];
    for i in 1..=n {
        vars.push(format!("a{i}"));
    }
    let mut components = Vec::with_capacity(3 * n + 1);
    for i in 1..=n {
        components.push(format!("u*cos(a{i})"));
    }
    for i in 1..=n {
        components.push(format!("u*sin(a{i})"));
    }
    for i in 1..=n {
        components.push(format!("a{i}"));
    }
    components.push("u".to_string());
    let mut chart_box = vec![[0.5, 3.0]];
    chart_box.extend(std::iter::repeat_n([0.0, ANGULAR_HI], n));
    let mut diagonal = vec!["sigma".to_string(); 3 * n];
    diagonal.push("sigma_bar".to_string());
    Scenario {
        name: format!("example2_n{n}"),
        params: ParamSpec { p, q },
        ambient_dim: 3 * n + 1,
        structure: StructureSpec::Diagonal(diagonal),
        immersion: ImmersionSpec {
            vars,
            components,
            chart_box,
        },
        distributions: vec![
            DistributionConfig {
                name: "D1".into(),
                coords: Some((1..=n).collect()),
                frame_columns: None,
            },
            DistributionConfig {
                name: "D2".into(),
                coords: Some(vec![0]),
                frame_columns: None,
            },
        ],
        checks: Vec::new(),
        sampling: SamplingPlan::default(),
    }
}

fn projector_checks(op: &StructureOperator, plan: &SamplingPlan) -> Result<Vec<CheckResult>> {
    let params = op.params().expect("structure section validated kind");
    let pq = projectors(op)?;
    let m = op.dim();
    let id = DMatrix::<f64>::identity(m, m);
    let algebra = (&pq.p + &pq.q - &id)
        .amax()
        .max((&pq.p * &pq.p - &pq.p).amax())
        .max((&pq.q * &pq.q - &pq.q).amax())
        .max((&pq.p * &pq.q).amax())
        .max((&pq.q * &pq.p).amax());

    let mut rng = SplitMix64::new(plan.seed ^ 0x9d0e);
    let mut spectral: f64 = 0.0;
    let samples = 100;
    for _ in 0..samples {
        let v = rng.vector_in_cube(m);
        let pv = &pq.p * &v;
        let qv = &pq.q * &v;
        spectral = spectral
            .max((op.apply(&pv) - params.sigma_bar * &pv).amax())
            .max((op.apply(&qv) - params.sigma * &qv).amax());
    }
    Ok(vec![
        CheckResult::asserted(
            "projector_algebra",
            "complementary idempotents summing to the identity",
            algebra,
            plan.tol_algebraic,
            1,
        ),
        CheckResult::asserted(
            "projector_spectral",
            "operator acts as σ̄ on one projector range and σ on the other",
            spectral,
            plan.tol_algebraic,
            samples,
        ),
    ])
}

fn frame_checks(c: &CompiledScenario) -> Result<Vec<CheckResult>> {
    let plan = &c.plan;
    let points = sample_chart_points(c.immersion.chart_box(), plan.point_count, plan.seed);
    let indexed: Vec<(usize, DVector<f64>)> = points.into_iter().enumerate().collect();

    struct Out {
        ortho: f64,
        metric_gram: f64,
        spd_defect: f64,
        pythagoras: f64,
    }
    let imm = &c.immersion;
    let per_point = map_items(&indexed, |(idx, x)| -> Result<Out> {
        let frame = frame_at(imm, x)?;
        let e = &frame.tangent_onb;
        let nf = &frame.normal_onb;
        let n = frame.chart_dim();
        let r = frame.codim();
        let ortho = (e.transpose() * e - DMatrix::identity(n, n))
            .amax()
            .max((nf.transpose() * nf - DMatrix::identity(r, r)).amax())
            .max((e.transpose() * nf).amax());
        let gram = frame.jacobian.transpose() * &frame.jacobian;
        let metric_gram = (&frame.induced_metric - gram).amax();
        let min_eig = frame
            .induced_metric
            .clone()
            .symmetric_eigenvalues()
            .min();
        let spd_defect = (-min_eig).max(0.0);

        let mut rng = SplitMix64::substream(plan.seed, *idx as u64);
        let mut pythagoras: f64 = 0.0;
        for _ in 0..4 {
            let w = rng.vector_in_cube(frame.ambient_dim());
            let (wt, wn) = split(&w, &frame);
            pythagoras = pythagoras.max(
                (w.norm_squared() - wt.ambient.norm_squared() - wn.ambient.norm_squared())
                    .abs(),
            );
        }
        Ok(Out {
            ortho,
            metric_gram,
            spd_defect,
            pythagoras,
        })
    });

    let mut ortho: f64 = 0.0;
    let mut metric_gram: f64 = 0.0;
    let mut spd: f64 = 0.0;
    let mut pyth: f64 = 0.0;
    for out in per_point {
        let out = out?;
        ortho = ortho.max(out.ortho);
        metric_gram = metric_gram.max(out.metric_gram);
        spd = spd.max(out.spd_defect);
        pyth = pyth.max(out.pythagoras);
    }
    let n = indexed.len();
    Ok(vec![
        CheckResult::asserted(
            "frame_orthonormal",
            "tangent and normal frames are orthonormal and mutually orthogonal",
            ortho,
            1e-10,
            n,
        ),
        CheckResult::asserted(
            "induced_metric_gram",
            "induced metric equals the Jacobian Gram matrix",
            metric_gram,
            plan.tol_algebraic,
            n,
        ),
        CheckResult::asserted(
            "induced_metric_spd",
            "induced metric is positive definite",
            spd,
            plan.tol_algebraic,
            n,
        ),
        CheckResult::asserted(
            "split_pythagoras",
            "tangential/normal split preserves squared norms",
            pyth,
            1e-10,
            n,
        ),
    ])
}

fn slant_checks(c: &CompiledScenario) -> Result<Vec<CheckResult>> {
    let plan = &c.plan;
    let op = &c.operator;
    let imm = &c.immersion;
    let params = c.params;
    let mut checks = Vec::new();

    // Norm-splitting invariants of both operators and the affine relation
    // between their induced blocks, over sampled points.
    let (f1, _) = products_from_metallic(op)?;
    let points = sample_chart_points(imm.chart_box(), plan.point_count.min(50), plan.seed);
    let half_gap = (2.0 * params.sigma - params.pf()) / 2.0;
    let half_p = params.pf() / 2.0;
    let mut pyth_j: f64 = 0.0;
    let mut pyth_f: f64 = 0.0;
    let mut block_relation: f64 = 0.0;
    let mut product_symmetry: f64 = 0.0;
    for (idx, x) in points.iter().enumerate() {
        let frame = frame_at(imm, x)?;
        let mut rng = SplitMix64::substream(plan.seed, idx as u64);
        for _ in 0..4 {
            let xa = frame.tangent_from_coords(&rng.unit_vector(frame.chart_dim()));
            let jx = op.apply(&xa);
            let tx = frame.project_tangent(&jx);
            let nx = &jx - &tx;
            let e3 = params.pf() * jx.dot(&xa) + params.qf() * xa.norm_squared();
            pyth_j = pyth_j
                .max((tx.norm_squared() + nx.norm_squared() - jx.norm_squared()).abs())
                .max((jx.norm_squared() - e3).abs());
            let fx = f1.apply(&xa);
            let ft = frame.project_tangent(&fx);
            let fn_ = &fx - &ft;
            pyth_f = pyth_f
                .max((ft.norm_squared() + fn_.norm_squared() - xa.norm_squared()).abs());
        }

        // Each block of J is the same affine map of the matching block of
        // its positive-branch product structure; the product blocks carry
        // the same symmetry and transpose duality as the metallic ones.
        let maps_j = crate::induced::induced_maps(op, &frame)?;
        let maps_f = crate::induced::induced_maps(&f1, &frame)?;
        let n = frame.chart_dim();
        let r = frame.codim();
        let id_t = DMatrix::<f64>::identity(n, n);
        let id_n = DMatrix::<f64>::identity(r, r);
        block_relation = block_relation
            .max((&maps_j.tt - half_p * id_t - half_gap * &maps_f.tt).amax())
            .max((&maps_j.tn - half_gap * &maps_f.tn).amax())
            .max((&maps_j.nt - half_gap * &maps_f.nt).amax())
            .max((&maps_j.nn - half_p * id_n - half_gap * &maps_f.nn).amax());
        product_symmetry = product_symmetry
            .max((&maps_f.tt - maps_f.tt.transpose()).amax())
            .max((&maps_f.nn - maps_f.nn.transpose()).amax())
            .max((&maps_f.tn - maps_f.nt.transpose()).amax());
    }
    checks.push(CheckResult::asserted(
        "tangent_normal_split_metallic",
        "squared norms of the split agree with the quadratic metric relation",
        pyth_j,
        plan.tol_algebraic,
        points.len() * 4,
    ));
    checks.push(CheckResult::asserted(
        "tangent_normal_split_product",
        "product operator splits squared norms exactly",
        pyth_f,
        1e-10,
        points.len() * 4,
    ));
    checks.push(CheckResult::asserted(
        "product_block_relation",
        "induced blocks of the operator are affine in the product-structure blocks",
        block_relation,
        plan.tol_algebraic,
        points.len(),
    ));
    checks.push(CheckResult::asserted(
        "product_block_symmetry",
        "product-structure blocks are self-adjoint with transpose duality",
        product_symmetry,
        1e-10,
        points.len(),
    ));

    for d in &c.distributions {
        let report = slant_test(op, imm, d, plan)?;
        let suffix = d.name.to_lowercase();
        checks.push(CheckResult::reported(
            &format!("slant_angle:{suffix}"),
            &format!("sampled slant angle of `{}`", d.name),
            report.angles.len(),
            serde_json::json!({
                "classification": report.classification,
                "angle_radians": round_sig(report.mean, 12),
                "max_deviation": round_sig(report.max_deviation, 12),
                "lambda": round_sig(report.lambda, 12),
            }),
        ));

        let (lambda, residual) = slant_distribution_lambda(op, imm, d, plan)?;
        let is_slant = report.classification != SlantClass::NotSlant;
        if is_slant {
            checks.push(CheckResult::asserted(
                &format!("slant_lambda_residual:{suffix}"),
                &format!("quadratic slant criterion on `{}` at the fitted λ", d.name),
                residual,
                plan.tol_algebraic,
                plan.point_count * plan.dirs_per_point,
            ));
            checks.push(CheckResult::asserted(
                &format!("slant_lambda_cross_check:{suffix}"),
                &format!("fitted λ matches mean cos²θ on `{}`", d.name),
                (lambda - report.lambda).abs(),
                1e-8,
                report.angles.len(),
            ));
        } else {
            checks.push(CheckResult::reported(
                &format!("slant_lambda_residual:{suffix}"),
                &format!("quadratic slant criterion on `{}` (not slant)", d.name),
                plan.point_count * plan.dirs_per_point,
                serde_json::json!({ "lambda": lambda, "residual": residual }),
            ));
        }

        if report.classification == SlantClass::ProperSlant {
            let res = slant_identity_residuals(op, imm, d, report.mean, plan)?;
            checks.push(CheckResult::asserted(
                &format!("slant_tt_metric:{suffix}"),
                "metric identity of the in-distribution tangential part",
                res.tt_metric,
                plan.tol_algebraic,
                res.samples,
            ));
            checks.push(CheckResult::asserted(
                &format!("slant_nn_metric:{suffix}"),
                "metric identity of the out-of-distribution part",
                res.nn_metric,
                plan.tol_algebraic,
                res.samples,
            ));
            checks.push(CheckResult::asserted(
                &format!("slant_t_squared:{suffix}"),
                "quadratic identity of the in-distribution tangential part",
                res.t_squared,
                plan.tol_algebraic,
                res.samples,
            ));
            checks.push(CheckResult::asserted(
                &format!("slant_form_outer:{suffix}"),
                "sin²θ-weighted operator equals the projected form correction",
                res.form_outer,
                plan.tol_algebraic,
                res.samples,
            ));
        }
    }
    Ok(checks)
}

fn angle_relation_checks(c: &CompiledScenario) -> Result<Vec<CheckResult>> {
    let plan = &c.plan;
    let op = &c.operator;
    let imm = &c.immersion;
    let (f1, _) = products_from_metallic(op)?;

    // Pointwise relation over 200 random tangent vectors.
    let n_pts = plan.point_count.clamp(1, 50);
    let dirs = 200usize.div_ceil(n_pts);
    let points = sample_chart_points(imm.chart_box(), n_pts, plan.seed);
    let mut residual: f64 = 0.0;
    let mut samples = 0;
    for (idx, x) in points.iter().enumerate() {
        let frame = frame_at(imm, x)?;
        let mut rng = SplitMix64::substream(plan.seed, idx as u64);
        for _ in 0..dirs {
            let xa = frame.tangent_from_coords(&rng.unit_vector(frame.chart_dim()));
            let (_, _, r) = pointwise_angle_relation(op, &f1, &frame, &xa)?;
            residual = residual.max(r);
            samples += 1;
        }
    }
    let mut checks = vec![CheckResult::asserted(
        "angle_relation_pointwise",
        "sin²-weighted pointwise relation between the two slant angles",
        residual,
        1e-8,
        samples,
    )];

    // Global prediction, reported on the last distribution (the slant one
    // by convention).
    if let Some(d) = c.distributions.last() {
        let theta = slant_test(op, imm, d, plan)?;
        let vartheta = slant_test(&f1, imm, d, plan)?;
        let (predicted, observed, discrepancy) =
            angle_relation_prediction(theta.mean, vartheta.mean, c.params);
        checks.push(CheckResult::reported(
            "angle_relation_global",
            "closed-form sin θ prediction from the product angle (reported, not asserted)",
            theta.angles.len(),
            serde_json::json!({
                "distribution": d.name,
                "observed_sin_theta": round_sig(observed, 12),
                "predicted_sin_theta": round_sig(predicted, 12),
                "discrepancy": round_sig(discrepancy, 12),
                "consistent": discrepancy < 1e-6,
            }),
        ));
    }
    Ok(checks)
}

fn resolve_sections(c: &CompiledScenario) -> Result<Vec<&'static str>> {
    if c.checks.is_empty() {
        let mut sections: Vec<&'static str> = CHECK_SECTIONS.to_vec();
        if c.distributions.len() < 2 {
            sections.retain(|s| {
                !matches!(*s, "semi_slant" | "integrability" | "mixed_geodesic")
            });
        }
        if c.distributions.is_empty() {
            sections.retain(|s| *s != "slant");
        }
        return Ok(sections);
    }
    let mut selected = Vec::new();
    for name in &c.checks {
        let canonical = CHECK_SECTIONS
            .iter()
            .find(|s| **s == name.as_str())
            .ok_or_else(|| {
                Error::Scenario(format!(
                    "unknown check `{name}`; known checks: {}",
                    CHECK_SECTIONS.join(", ")
                ))
            })?;
        if !selected.contains(canonical) {
            selected.push(*canonical);
        }
    }
    // Fixed execution order regardless of the listed order.
    let ordered: Vec<&'static str> = CHECK_SECTIONS
        .iter()
        .copied()
        .filter(|s| selected.contains(s))
        .collect();
    if c.distributions.len() < 2 {
        for s in ["semi_slant", "integrability", "mixed_geodesic"] {
            if ordered.contains(&s) {
                return Err(Error::Scenario(format!(
                    "check `{s}` requires two distributions, scenario has {}",
                    c.distributions.len()
                )));
            }
        }
    }
    if c.distributions.is_empty() && ordered.contains(&"slant") {
        return Err(Error::Scenario(
            "check `slant` requires at least one distribution".into(),
        ));
    }
    Ok(ordered)
}

/// Runs the scenario and aggregates a deterministic report. Configuration
/// problems return an error; failing identities return a report with
/// `overall_pass == false`. When the operator itself fails validation the
/// dependent sections are skipped.
pub fn run_suite(scenario: &Scenario) -> Result<VerificationReport> {
    let c = compile(scenario)?;
    let mut report = VerificationReport::new(
        &c.name,
        c.plan.seed,
        c.params.p,
        c.params.q,
        c.params.sigma,
        c.params.sigma_bar,
    );
    let sections = resolve_sections(&c)?;

    for section in &sections {
        match *section {
            "structure" => {
                let val = validate_structure(&c.operator, c.plan.tol_algebraic, c.plan.seed)?;
                let structure_ok = val.overall_pass;
                report.extend(val.checks);
                if structure_ok {
                    // Conversion round trip through the induced product
                    // structure.
                    let (f1, _) = products_from_metallic(&c.operator)?;
                    let back = metallic_from_product(&f1, c.params, Branch::Plus)?;
                    report.push(CheckResult::asserted(
                        "product_roundtrip",
                        "metallic → product → metallic conversion reproduces the operator",
                        (&back.matrix - &c.operator.matrix).amax(),
                        c.plan.tol_algebraic,
                        1,
                    ));
                } else {
                    // Nothing downstream is meaningful on an invalid
                    // operator.
                    break;
                }
            }
            "projectors" => report.extend(projector_checks(&c.operator, &c.plan)?),
            "frames" => report.extend(frame_checks(&c)?),
            "induced" => {
                report.extend(verify_induced_structure(&c.operator, &c.immersion, &c.plan)?)
            }
            "slant" => report.extend(slant_checks(&c)?),
            "semi_slant" => {
                let checks = crate::slant::semi_slant_check(
                    &c.operator,
                    &c.immersion,
                    &c.distributions[0],
                    &c.distributions[1],
                    &c.plan,
                )?;
                report.extend(checks);
            }
            "angle_relation" => report.extend(angle_relation_checks(&c)?),
            "extrinsic" => report.extend(verify_extrinsic_basics(&c.immersion, &c.plan)?),
            "connection" => report.extend(verify_connection(&c.immersion, &c.plan)?),
            "derivative_props" => {
                report.extend(verify_derivative_props(&c.immersion, &c.operator, &c.plan)?)
            }
            "bracket_props" => {
                report.extend(verify_bracket_props(&c.immersion, &c.operator, &c.plan)?)
            }
            "integrability" => report.extend(integrability_checks(
                &c.immersion,
                &c.operator,
                &c.distributions[0],
                &c.distributions[1],
                &c.plan,
            )?),
            "mixed_geodesic" => report.extend(mixed_geodesic_check(
                &c.immersion,
                &c.operator,
                &c.distributions[0],
                &c.distributions[1],
                &c.plan,
            )?),
            other => unreachable!("unhandled section {other}"),
        }
    }
    Ok(report)
}

/// Slant-angle report for one named distribution of a scenario.
pub fn run_angle(scenario: &Scenario, distribution: &str) -> Result<AngleReport> {
    let c = compile(scenario)?;
    let d = c
        .distributions
        .iter()
        .find(|d| d.name == distribution)
        .ok_or_else(|| {
            Error::Scenario(format!(
                "unknown distribution `{distribution}`; scenario defines: {}",
                c.distributions
                    .iter()
                    .map(|d| d.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        })?;
    Ok(slant_test(&c.operator, &c.immersion, d, &c.plan)?.rounded())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_round_trips_through_json() {
        let s = builtin_example1(1, 1);
        let json = s.to_json();
        let back = Scenario::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn example2_dimensions_scale_with_n() {
        for n in [1u32, 2, 3] {
            let s = builtin_example2(n, 1, 1);
            assert_eq!(s.ambient_dim, 3 * n as usize + 1);
            assert_eq!(s.immersion.vars.len(), n as usize + 1);
            let c = compile(&s).unwrap();
            assert!(c.operator.polynomial_residual() < 1e-12);
        }
    }

    #[test]
    fn unknown_check_is_a_scenario_error() {
        let mut s = builtin_example1(1, 1);
        s.checks = vec!["bogus".into()];
        assert!(matches!(run_suite(&s), Err(Error::Scenario(_))));
    }

    #[test]
    fn angle_lookup_rejects_unknown_distribution() {
        let s = builtin_example1(1, 1);
        assert!(matches!(run_angle(&s, "D9"), Err(Error::Scenario(_))));
    }

    #[test]
    fn structure_only_run_passes_quickly() {
        let mut s = builtin_example1(2, 1);
        s.checks = vec!["structure".into(), "projectors".into()];
        let report = run_suite(&s).unwrap();
        assert!(report.overall_pass);
        assert!(report.find("product_roundtrip").is_some());
        assert!(report.find("projector_spectral").is_some());
    }

    #[test]
    fn corrupted_structure_fails_and_skips_dependents() {
        let mut s = builtin_example1(1, 1);
        // An identity block violates the quadratic identity for (1,1).
        s.structure = StructureSpec::Matrix(
            (0..7)
                .map(|i| {
                    (0..7)
                        .map(|j| if i == j { 1.0 } else { 0.0 })
                        .collect::<Vec<f64>>()
                })
                .collect(),
        );
        let report = run_suite(&s).unwrap();
        assert!(!report.overall_pass);
        assert_eq!(report.exit_code(), 1);
        assert!(report.find("sigma_quadratic_closure").is_none());
    }
}
