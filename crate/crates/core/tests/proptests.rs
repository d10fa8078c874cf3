//! Property tests: parser round trips, AD against central differences,
//! structure algebra on randomly conjugated operators, frame invariants on
//! random graph immersions.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use metalgeo::expr::{parse, print, Expr};
use metalgeo::immersion::{frame_at, split, Immersion};
use metalgeo::jet::{eval_jet, eval_value, EvalContext};
use metalgeo::metallic::{
    metallic_from_product, metallic_number, products_from_metallic, projectors, Branch,
    MetallicParams, StructureOperator,
};

const VARS: [&str; 3] = ["u", "t1", "t2"];

fn var_names() -> Vec<String> {
    VARS.iter().map(|s| s.to_string()).collect()
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Number(n as f64 / 8.0)),
        (0usize..3).prop_map(Expr::Var),
        Just(Expr::Const(metalgeo::expr::ConstName::Sigma)),
        Just(Expr::Const(metalgeo::expr::ConstName::PhiBar)),
        Just(Expr::Const(metalgeo::expr::ConstName::Pi)),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                metalgeo::expr::BinOp::Add,
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                metalgeo::expr::BinOp::Sub,
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                metalgeo::expr::BinOp::Mul,
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Bin(
                metalgeo::expr::BinOp::Div,
                Box::new(a),
                Box::new(b)
            )),
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), 0i32..4).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
            inner.clone().prop_map(|a| Expr::Call(
                metalgeo::expr::Func::Sin,
                Box::new(a)
            )),
            inner.clone().prop_map(|a| Expr::Call(
                metalgeo::expr::Func::Cos,
                Box::new(a)
            )),
            inner.prop_map(|a| Expr::Call(metalgeo::expr::Func::Exp, Box::new(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let vars = var_names();
        let printed = print(&e, &vars);
        let reparsed = parse(&printed, &vars)
            .unwrap_or_else(|err| panic!("`{printed}` failed to reparse: {err}"));
        prop_assert_eq!(e, reparsed, "round trip changed `{}`", printed);
    }

    #[test]
    fn gradients_and_hessians_match_central_differences(
        e in arb_expr(),
        coords in proptest::array::uniform3(-1.2f64..1.2),
    ) {
        let vars = var_names();
        let ctx = EvalContext::new(MetallicParams::golden(), &vars);
        let x = DVector::from_row_slice(&coords);
        // Skip trees that hit a singularity or overflow at this point.
        let jet = match eval_jet(&e, &x, &ctx) {
            Ok(j) if j.value.is_finite()
                && j.gradient.iter().all(|g| g.is_finite() && g.abs() < 1e6)
                && j.hessian.iter().all(|h| h.is_finite() && h.abs() < 1e6) => j,
            _ => return Ok(()),
        };
        let h = 1e-5;
        let mut fd_ok = true;
        let mut values = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                let mut pp = x.clone(); pp[i] += h; pp[j] += h;
                let mut pm = x.clone(); pm[i] += h; pm[j] -= h;
                let mut mp = x.clone(); mp[i] -= h; mp[j] += h;
                let mut mm = x.clone(); mm[i] -= h; mm[j] -= h;
                match (
                    eval_value(&e, &pp, &ctx),
                    eval_value(&e, &pm, &ctx),
                    eval_value(&e, &mp, &ctx),
                    eval_value(&e, &mm, &ctx),
                ) {
                    (Ok(a), Ok(b), Ok(c), Ok(d))
                        if [a, b, c, d].iter().all(|v| v.is_finite()) =>
                    {
                        values.push(((i, j), (a - b - c + d) / (4.0 * h * h)))
                    }
                    _ => fd_ok = false,
                }
            }
        }
        if !fd_ok {
            return Ok(());
        }
        // Gradient against first-order central differences.
        for i in 0..3 {
            let mut p = x.clone(); p[i] += h;
            let mut m = x.clone(); m[i] -= h;
            let (fp, fm) = match (eval_value(&e, &p, &ctx), eval_value(&e, &m, &ctx)) {
                (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
                _ => return Ok(()),
            };
            let fd = (fp - fm) / (2.0 * h);
            // Central-difference error: h² truncation on the derivative
            // scale plus ε|f|/h cancellation on the value scale.
            let tol = 1e-5 * (1.0 + jet.gradient[i].abs().max(fd.abs()))
                + 1e-10 * jet.value.abs();
            prop_assert!(
                (jet.gradient[i] - fd).abs() <= tol,
                "grad[{}] ad={} fd={} for `{}`",
                i, jet.gradient[i], fd, print(&e, &var_names())
            );
        }
        for ((i, j), fd) in values {
            // Second differences cancel harder: ε|f|/h² on the value scale.
            let tol = 2e-4 * (1.0 + jet.hessian[(i, j)].abs().max(fd.abs()))
                + 1e-5 * jet.value.abs();
            prop_assert!(
                (jet.hessian[(i, j)] - fd).abs() <= tol,
                "hess[{},{}] ad={} fd={} for `{}`",
                i, j, jet.hessian[(i, j)], fd, print(&e, &var_names())
            );
        }
    }

    #[test]
    fn conjugated_operators_stay_metallic(
        p in 1u32..6,
        q in 1u32..6,
        dim in 2usize..6,
        raw in proptest::collection::vec(-1.0f64..1.0, 36),
        pattern in proptest::collection::vec(any::<bool>(), 6),
    ) {
        let params = metallic_number(p, q).unwrap();
        // Orthogonal basis from a random matrix; skip degenerate draws.
        let m = DMatrix::from_fn(dim, dim, |i, j| raw[i * 6 + j] + if i == j { 1.5 } else { 0.0 });
        let qr = m.qr();
        let basis = qr.q();
        let diag = DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                if pattern[i] { params.sigma } else { params.sigma_bar }
            } else {
                0.0
            }
        });
        let j_matrix = &basis * diag * basis.transpose();
        let j = StructureOperator::metallic(j_matrix, None, params).unwrap();
        prop_assert!(j.polynomial_residual() < 1e-10);

        let (f1, f2) = products_from_metallic(&j).unwrap();
        prop_assert!(f1.polynomial_residual() < 1e-12);
        prop_assert!(f2.polynomial_residual() < 1e-12);
        let back = metallic_from_product(&f1, params, Branch::Plus).unwrap();
        prop_assert!((back.matrix - &j.matrix).amax() < 1e-10);

        let pq = projectors(&j).unwrap();
        let mut rng = metalgeo::sampling::SplitMix64::new(p as u64 * 31 + q as u64);
        for _ in 0..20 {
            let v = rng.vector_in_cube(dim);
            let pv = &pq.p * &v;
            let qv = &pq.q * &v;
            prop_assert!((j.apply(&pv) - params.sigma_bar * &pv).amax() < 1e-9);
            prop_assert!((j.apply(&qv) - params.sigma * &qv).amax() < 1e-9);
            // Two-argument metric relation.
            let w = rng.vector_in_cube(dim);
            let jv = j.apply(&v);
            let jw = j.apply(&w);
            let r = jv.dot(&jw) - params.pf() * jv.dot(&w) - params.qf() * v.dot(&w);
            prop_assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn graph_immersion_frames_are_orthonormal(
        c1 in proptest::array::uniform4(-0.8f64..0.8),
        c2 in proptest::array::uniform4(-0.8f64..0.8),
        at in proptest::array::uniform2(-0.9f64..0.9),
    ) {
        // Graph immersions (u, v) ↦ (u, v, g1, g2) are full rank everywhere.
        let vars: Vec<String> = ["u", "v"].iter().map(|s| s.to_string()).collect();
        let g1 = format!("{}*u + {}*v + {}*u*v + {}*sin(u)", c1[0], c1[1], c1[2], c1[3]);
        let g2 = format!("{}*v + {}*u^2 + {}*cos(v) + {}*u", c2[0], c2[1], c2[2], c2[3]);
        let comps = vec![
            parse("u", &vars).unwrap(),
            parse("v", &vars).unwrap(),
            parse(&g1, &vars).unwrap(),
            parse(&g2, &vars).unwrap(),
        ];
        let imm = Immersion::new(
            vars,
            comps,
            vec![(-1.0, 1.0), (-1.0, 1.0)],
            MetallicParams::golden(),
        )
        .unwrap();
        let x = DVector::from_row_slice(&at);
        let frame = frame_at(&imm, &x).unwrap();
        let e = &frame.tangent_onb;
        let n = &frame.normal_onb;
        prop_assert!((e.transpose() * e - DMatrix::identity(2, 2)).amax() < 1e-10);
        prop_assert!((n.transpose() * n - DMatrix::identity(2, 2)).amax() < 1e-10);
        prop_assert!((e.transpose() * n).amax() < 1e-10);
        // Metric SPD: both eigenvalues positive.
        let eig = frame.induced_metric.clone().symmetric_eigenvalues();
        prop_assert!(eig.min() > 0.0);
        // Split recomposes and is idempotent.
        let w = DVector::from_row_slice(&[0.3, -0.7, 0.2, 0.9]);
        let (wt, wn) = split(&w, &frame);
        prop_assert!((&wt.ambient + &wn.ambient - &w).amax() < 1e-12);
        let (wtt, wtn) = split(&wt.ambient, &frame);
        prop_assert!((wtt.ambient - &wt.ambient).amax() < 1e-12);
        prop_assert!(wtn.ambient.amax() < 1e-12);
    }
}
