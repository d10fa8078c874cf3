//! Forward-mode automatic differentiation for parsed expressions.
//!
//! First derivatives come from single-perturbation dual numbers; second
//! derivatives from nested first-order perturbations (one pass per index
//! pair), which keeps the arithmetic first-order everywhere and makes the
//! Hessian symmetric by construction. Derivatives are exact to floating
//! point; no finite differences are involved.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{print, ConstName, Expr, Func};
use crate::metallic::{metallic_number, MetallicParams};

/// Value, gradient and symmetric Hessian of one expression at one point.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// Binds the metallic constants and variable names used in diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub params: MetallicParams,
    pub vars: &'a [String],
}

impl<'a> EvalContext<'a> {
    pub fn new(params: MetallicParams, vars: &'a [String]) -> Self {
        EvalContext { params, vars }
    }

    fn constant(&self, c: ConstName) -> f64 {
        let golden = metallic_number(1, 1).expect("(1,1) is valid");
        match c {
            ConstName::Pi => std::f64::consts::PI,
            ConstName::Sigma => self.params.sigma,
            ConstName::SigmaBar => self.params.sigma_bar,
            ConstName::Phi => golden.sigma,
            ConstName::PhiBar => golden.sigma_bar,
        }
    }

    fn domain_err(&self, e: &Expr, message: &str) -> Error {
        Error::Eval {
            subexpr: print(e, self.vars),
            message: message.to_string(),
        }
    }
}

/// Scalar type a tree can be evaluated over: plain values or perturbed
/// values carrying derivative components.
trait AdScalar: Copy {
    fn lift(v: f64) -> Self;
    fn value(self) -> f64;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn neg(self) -> Self;
    /// Chain rule through g given g(v), g'(v), g''(v).
    fn chain(self, g: f64, dg: f64, d2g: f64) -> Self;
}

impl AdScalar for f64 {
    fn lift(v: f64) -> f64 {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn add(self, o: f64) -> f64 {
        self + o
    }
    fn sub(self, o: f64) -> f64 {
        self - o
    }
    fn mul(self, o: f64) -> f64 {
        self * o
    }
    fn neg(self) -> f64 {
        -self
    }
    fn chain(self, g: f64, _dg: f64, _d2g: f64) -> f64 {
        let _ = self;
        g
    }
}

/// One-perturbation dual number.
#[derive(Debug, Clone, Copy)]
struct Dual {
    v: f64,
    d: f64,
}

impl AdScalar for Dual {
    fn lift(v: f64) -> Dual {
        Dual { v, d: 0.0 }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.v * o.d + self.d * o.v,
        }
    }
    fn neg(self) -> Dual {
        Dual {
            v: -self.v,
            d: -self.d,
        }
    }
    fn chain(self, g: f64, dg: f64, _d2g: f64) -> Dual {
        Dual {
            v: g,
            d: dg * self.d,
        }
    }
}

/// Two independent perturbations and their product term; equivalent to a
/// dual number whose components are themselves dual.
#[derive(Debug, Clone, Copy)]
struct Dual2 {
    v: f64,
    d1: f64,
    d2: f64,
    d12: f64,
}

impl AdScalar for Dual2 {
    fn lift(v: f64) -> Dual2 {
        Dual2 {
            v,
            d1: 0.0,
            d2: 0.0,
            d12: 0.0,
        }
    }
    fn value(self) -> f64 {
        self.v
    }
    fn add(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d12: self.d12 + o.d12,
        }
    }
    fn sub(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v - o.v,
            d1: self.d1 - o.d1,
            d2: self.d2 - o.d2,
            d12: self.d12 - o.d12,
        }
    }
    fn mul(self, o: Dual2) -> Dual2 {
        Dual2 {
            v: self.v * o.v,
            d1: self.v * o.d1 + self.d1 * o.v,
            d2: self.v * o.d2 + self.d2 * o.v,
            d12: self.v * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.v,
        }
    }
    fn neg(self) -> Dual2 {
        Dual2 {
            v: -self.v,
            d1: -self.d1,
            d2: -self.d2,
            d12: -self.d12,
        }
    }
    fn chain(self, g: f64, dg: f64, d2g: f64) -> Dual2 {
        Dual2 {
            v: g,
            d1: dg * self.d1,
            d2: dg * self.d2,
            d12: dg * self.d12 + d2g * self.d1 * self.d2,
        }
    }
}

fn eval_ad<T: AdScalar>(e: &Expr, inputs: &[T], ctx: &EvalContext) -> Result<T> {
    Ok(match e {
        Expr::Number(x) => T::lift(*x),
        Expr::Var(i) => inputs[*i],
        Expr::Const(c) => T::lift(ctx.constant(*c)),
        Expr::Neg(inner) => eval_ad(inner, inputs, ctx)?.neg(),
        Expr::Bin(op, a, b) => {
            let x = eval_ad(a, inputs, ctx)?;
            let y = eval_ad(b, inputs, ctx)?;
            match op {
                crate::expr::BinOp::Add => x.add(y),
                crate::expr::BinOp::Sub => x.sub(y),
                crate::expr::BinOp::Mul => x.mul(y),
                crate::expr::BinOp::Div => {
                    if y.value() == 0.0 {
                        return Err(ctx.domain_err(e, "division by zero"));
                    }
                    let yv = y.value();
                    // x / y = x * (1/y), with 1/y pushed through the chain rule.
                    let recip = y.chain(1.0 / yv, -1.0 / (yv * yv), 2.0 / (yv * yv * yv));
                    x.mul(recip)
                }
            }
        }
        Expr::Pow(base, k) => {
            let b = eval_ad(base, inputs, ctx)?;
            let bv = b.value();
            if *k < 0 && bv == 0.0 {
                return Err(ctx.domain_err(e, "zero base with negative exponent"));
            }
            let kf = *k as f64;
            let g = bv.powi(*k);
            let dg = if *k == 0 { 0.0 } else { kf * bv.powi(*k - 1) };
            let d2g = if *k == 0 || *k == 1 {
                0.0
            } else {
                kf * (kf - 1.0) * bv.powi(*k - 2)
            };
            b.chain(g, dg, d2g)
        }
        Expr::Call(f, arg) => {
            let a = eval_ad(arg, inputs, ctx)?;
            let v = a.value();
            match f {
                Func::Sin => a.chain(v.sin(), v.cos(), -v.sin()),
                Func::Cos => a.chain(v.cos(), -v.sin(), -v.cos()),
                Func::Tan => {
                    let t = v.tan();
                    let sec2 = 1.0 + t * t;
                    a.chain(t, sec2, 2.0 * t * sec2)
                }
                Func::Exp => {
                    let ev = v.exp();
                    a.chain(ev, ev, ev)
                }
                Func::Log => {
                    if v <= 0.0 {
                        return Err(ctx.domain_err(e, "logarithm of a non-positive value"));
                    }
                    a.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(ctx.domain_err(e, "square root of a negative value"));
                    }
                    let s = v.sqrt();
                    a.chain(s, 0.5 / s, -0.25 / (s * v))
                }
            }
        }
    })
}

pub fn eval_value(e: &Expr, point: &DVector<f64>, ctx: &EvalContext) -> Result<f64> {
    eval_ad::<f64>(e, point.as_slice(), ctx)
}

/// Value and exact gradient: one dual pass per variable.
pub fn eval_gradient(
    e: &Expr,
    point: &DVector<f64>,
    ctx: &EvalContext,
) -> Result<(f64, DVector<f64>)> {
    let n = point.len();
    let mut grad = DVector::zeros(n);
    let mut value = 0.0;
    for i in 0..n {
        let inputs: Vec<Dual> = (0..n)
            .map(|k| Dual {
                v: point[k],
                d: if k == i { 1.0 } else { 0.0 },
            })
            .collect();
        let out = eval_ad(e, &inputs, ctx)?;
        value = out.v;
        grad[i] = out.d;
    }
    Ok((value, grad))
}

/// Value, gradient and Hessian: one nested pass per index pair i <= j.
pub fn eval_jet(e: &Expr, point: &DVector<f64>, ctx: &EvalContext) -> Result<Jet2> {
    let n = point.len();
    if e.max_var_bound() > n {
        return Err(Error::Dimension(format!(
            "expression references variable index {} but point has dimension {n}",
            e.max_var_bound() - 1
        )));
    }
    let mut value = 0.0;
    let mut gradient = DVector::zeros(n);
    let mut hessian = DMatrix::zeros(n, n);
    if n == 0 {
        value = eval_value(e, point, ctx)?;
        return Ok(Jet2 {
            value,
            gradient,
            hessian,
        });
    }
    for i in 0..n {
        for j in i..n {
            let inputs: Vec<Dual2> = (0..n)
                .map(|k| Dual2 {
                    v: point[k],
                    d1: if k == i { 1.0 } else { 0.0 },
                    d2: if k == j { 1.0 } else { 0.0 },
                    d12: 0.0,
                })
                .collect();
            let out = eval_ad(e, &inputs, ctx)?;
            value = out.v;
            if i == j {
                gradient[i] = out.d1;
            }
            hessian[(i, j)] = out.d12;
            hessian[(j, i)] = out.d12;
        }
    }
    Ok(Jet2 {
        value,
        gradient,
        hessian,
    })
}
