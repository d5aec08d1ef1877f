use std::f64::consts::PI;

use super::diffeo::Diffeomorphism;
use crate::error::Result;
use crate::expr::{self, Expr, Func};

/// Boundary chart of the unit disk near the angle `theta`.
///
/// With `(p, q)` the coordinates rotated by `-theta` and `r = |x|`,
/// `z1 = atan(q/p) + shear (1 - r)` and `z2 = 1 - r`, so the disk maps to
/// `z2 > 0` and the circle to `z2 = 0`. A nonzero shear makes the
/// transformed Laplacian carry a mixed term on the boundary.
pub fn polar_shear_chart(theta: f64, shear: f64, valid_radius: f64) -> Result<Diffeomorphism> {
    let (c, s) = (theta.cos(), theta.sin());
    let (x1, x2) = (Expr::Var(0), Expr::Var(1));
    let num = |v: f64| Expr::Num(v);
    let p = num(c) * x1.clone() + num(s) * x2.clone();
    let q = num(-s) * x1.clone() + num(c) * x2.clone();
    let r = expr::call(
        Func::Sqrt,
        expr::pow(x1.clone(), num(2.0)) + expr::pow(x2.clone(), num(2.0)),
    );
    let z1 = expr::call(Func::Atan, q / p) + num(shear) * (num(1.0) - r.clone());
    let z2 = num(1.0) - r;
    let angle = x1 - num(shear) * x2.clone() + num(theta);
    let radius = num(1.0) - x2;
    let inv1 = radius.clone() * expr::call(Func::Cos, angle.clone());
    let inv2 = radius * expr::call(Func::Sin, angle);
    Diffeomorphism::from_exprs(vec![z1, z2])?
        .with_inverse(vec![inv1, inv2])
        .map(|d| d.with_valid_ball(vec![c, s], valid_radius.min(PI / 2.0)))
}
