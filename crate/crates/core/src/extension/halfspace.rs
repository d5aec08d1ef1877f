use serde::Serialize;

use super::reflection::{common_delta, reflection_delta, SAFETY};
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fields::kernel::smooth_step_jet;
use crate::fields::{Jet, ScalarField};
use crate::transform::{pullback, Diffeomorphism};

/// Tolerance for `u = 0`, `Lu = 0` and `a_in = 0` on `{x_n = 0}`.
pub const ADMISSIBLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfspaceChecks {
    pub cross_terms: f64,
    pub boundary_value: f64,
    pub boundary_operator: f64,
    pub tolerance: f64,
}

impl HalfspaceChecks {
    pub fn ok(&self) -> bool {
        self.cross_terms <= self.tolerance
            && self.boundary_value <= self.tolerance
            && self.boundary_operator <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct HalfspaceExtension {
    /// `eta(x_n) E u`, defined on `{x_n > -3 delta/4}` and zero below.
    pub field: ScalarField,
    pub delta: f64,
    /// Reflection coefficients `a_nn(x', 0)` and `b_n(x', 0)`.
    pub a_nn: ScalarField,
    pub b_n: ScalarField,
    pub checks: HalfspaceChecks,
}

/// Points of `[-w, w]^(n-1) x {0}` on a tensor grid with `per_side` points per axis.
pub fn flat_boundary_samples(n: usize, w: f64, per_side: usize) -> Vec<Vec<f64>> {
    let m = per_side.max(2);
    let count = m.pow((n - 1) as u32);
    (0..count)
        .map(|mut c| {
            let mut p = vec![0.0; n];
            for k in 0..n - 1 {
                p[k] = -w + 2.0 * w * (c % m) as f64 / (m - 1) as f64;
                c /= m;
            }
            p
        })
        .collect()
}

/// Residuals of the membership conditions on the flat boundary samples.
pub fn halfspace_checks(
    u: &ScalarField,
    op: &EllipticOperator,
    samples: &[Vec<f64>],
) -> Result<HalfspaceChecks> {
    let n = op.dim();
    let mut cross = 0.0f64;
    let mut value = 0.0f64;
    let mut lu = 0.0f64;
    for p in samples {
        let a = op.a_matrix(p)?;
        for row in a.iter().take(n - 1) {
            cross = cross.max(row[n - 1].abs());
        }
        value = value.max(u.try_value(p)?.abs());
        let l = if u.has_exact_jet() {
            op.apply_exact(u, p)?
        } else {
            op.apply_one_sided(u, p, 1e-3, n - 1, true)?
        };
        lu = lu.max(l.abs());
    }
    Ok(HalfspaceChecks {
        cross_terms: cross,
        boundary_value: value,
        boundary_operator: lu,
        tolerance: ADMISSIBLE_TOL,
    })
}

/// Lower cutoff in `x_n`: 1 on `[-delta/2, inf)`, 0 on `(-inf, -3 delta/4]`.
fn lower_cutoff(delta: f64, t: f64) -> (f64, f64, f64) {
    let rho = delta / 8.0;
    let (v, d1, d2) = smooth_step_jet((t + 5.0 * rho) / rho);
    (v, d1 / rho, d2 / (rho * rho))
}

/// Contractive extension of `u` from `{x_n >= 0}` to `{x_n > -delta}`.
///
/// `op` must have no mixed terms `a_in` on `{x_n = 0}`, and `u` must satisfy
/// `u = Lu = 0` there; both are checked on `[-w, w]^(n-1) x {0}`. Reflected
/// points land in `[0, R)` in the normal direction.
pub fn extend_halfspace(u: &ScalarField, op: &EllipticOperator, r: f64, w: f64) -> Result<HalfspaceExtension> {
    let n = op.dim();
    let samples = flat_boundary_samples(n, w, if n == 2 { 41 } else { 9 });
    let checks = halfspace_checks(u, op, &samples)?;
    if checks.cross_terms > checks.tolerance {
        return Err(Error::CrossTerms {
            max_abs: checks.cross_terms,
        });
    }
    if !checks.ok() {
        return Err(Error::Inadmissible {
            what: "u = 0 and Lu = 0 on the flat boundary".into(),
            residual: checks.boundary_value.max(checks.boundary_operator),
            tolerance: checks.tolerance,
        });
    }
    let a_nn = op.a[n - 1][n - 1].on_flat_boundary();
    let b_n = op.b[n - 1].on_flat_boundary();
    let delta = halfspace_delta(op, &a_nn, &b_n, &samples, r)?;
    let mut e = extend_halfspace_with(u, &a_nn, &b_n, delta)?;
    e.checks = checks;
    Ok(e)
}

/// `min(common_delta(lambda, Lambda, R), min over samples of the pointwise depth)`.
pub(crate) fn halfspace_delta(
    op: &EllipticOperator,
    a_nn: &ScalarField,
    b_n: &ScalarField,
    samples: &[Vec<f64>],
    r: f64,
) -> Result<f64> {
    let mut delta = common_delta(op.lambda, op.big_lambda, r, SAFETY)?;
    for p in samples {
        let a = a_nn.try_value(p)?;
        if !(a > 0.0) {
            return Err(Error::NotElliptic {
                point: p.clone(),
                value: a,
            });
        }
        delta = delta.min(reflection_delta(a, b_n.try_value(p)?, r, SAFETY)?);
    }
    Ok(delta)
}

/// The extension with given reflection coefficients and depth, without checks.
pub fn extend_halfspace_with(
    u: &ScalarField,
    a_nn: &ScalarField,
    b_n: &ScalarField,
    delta: f64,
) -> Result<HalfspaceExtension> {
    let n = u.dim();
    if !(delta > 0.0) {
        return Err(Error::invalid("delta", "must be positive"));
    }
    // (x', x_n) -> (x', F(a(x'), b(x'), x_n))
    let t = Expr::Var(n - 1);
    let reflected_last = match (a_nn.as_expr(), b_n.as_expr()) {
        (Some(a), Some(b)) => {
            let q = expr::div(b.clone(), a.clone());
            let e = expr::neg(expr::sub(
                t.clone(),
                expr::mul(q, expr::pow(t.clone(), Expr::Num(2.0))),
            ));
            ScalarField::from_expr(e, n)?
        }
        _ => {
            let tf = ScalarField::from_expr(t, n)?;
            tf.mul(&b_n.div(a_nn)).mul(&tf).sub(&tf)
        }
    };
    let mut comps: Vec<ScalarField> = (0..n - 1)
        .map(|k| ScalarField::from_expr(Expr::Var(k), n))
        .collect::<Result<_>>()?;
    comps.push(reflected_last);
    let reflection = Diffeomorphism::from_fields(comps)?;
    let lower = pullback(&reflection, u).neg();
    let upper = u.clone();
    let (lower_v, upper_v) = (lower.clone(), u.clone());
    let value = move |x: &[f64]| -> Result<f64> {
        let tn = x[n - 1];
        if tn >= 0.0 {
            return upper_v.try_value(x);
        }
        let e0 = lower_cutoff(delta, tn).0;
        if e0 == 0.0 {
            return Ok(0.0);
        }
        Ok(e0 * lower_v.try_value(x)?)
    };
    let field = ScalarField::from_fns(n, value, move |x| {
        let tn = x[n - 1];
        if tn >= 0.0 {
            return upper.jet(x);
        }
        let (e0, e1, e2) = lower_cutoff(delta, tn);
        if e0 == 0.0 && e1 == 0.0 && e2 == 0.0 {
            return Ok(Jet::constant(0.0, n));
        }
        let mut cut = Jet::constant(e0, n);
        cut.gradient[n - 1] = e1;
        cut.hessian[n - 1][n - 1] = e2;
        Ok(cut.mul(&lower.jet(x)?))
    });
    Ok(HalfspaceExtension {
        field,
        delta,
        a_nn: a_nn.clone(),
        b_n: b_n.clone(),
        checks: HalfspaceChecks {
            cross_terms: f64::NAN,
            boundary_value: f64::NAN,
            boundary_operator: f64::NAN,
            tolerance: ADMISSIBLE_TOL,
        },
    })
}
