use serde::Serialize;

use super::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Func};
use crate::fields::{DomainSpec, ScalarField};

/// Explicit super- and subsolution `v+ >= u >= v-` for `Lu = f`, `u = g`.
#[derive(Debug, Clone)]
pub struct ComparisonPair {
    pub v_plus: ScalarField,
    pub v_minus: ScalarField,
    pub gamma: f64,
    /// Width of the slab `{s <= x1 <= s + d}` containing the domain.
    pub slab_width: f64,
    pub slab_start: f64,
    /// `sup |g|` and `sup |f|` used in the construction.
    pub g_sup: f64,
    pub f_sup: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SandwichReport {
    pub below: f64,
    pub above: f64,
    pub ok: bool,
}

impl ComparisonPair {
    /// `G + (e^{gamma d} - 1) F / lambda`, the value of `v+` at the slab start.
    pub fn sup_bound(&self) -> f64 {
        self.g_sup + ((self.gamma * self.slab_width).exp() - 1.0) * self.f_sup / self.lambda
    }

    /// Largest violations of `v- <= u <= v+` over the given points.
    pub fn check(&self, points: &[Vec<f64>], u: &[f64], tol: f64) -> SandwichReport {
        let mut below = 0.0f64;
        let mut above = 0.0f64;
        for (p, &v) in points.iter().zip(u) {
            below = below.max(self.v_minus.value(p) - v);
            above = above.max(v - self.v_plus.value(p));
        }
        SandwichReport {
            below,
            above,
            ok: below <= tol && above <= tol,
        }
    }
}

fn closed_nodes(domain: &DomainSpec, h: f64) -> Result<Vec<Vec<f64>>> {
    Ok(domain.mesh(h)?.points().filter(|p| domain.contains_closed(p)).collect())
}

/// Build `v+ = G + (e^{gamma d} - e^{gamma (x1 - s)}) F / lambda` and `v- = -v+`.
///
/// `gamma` is the smallest of `Lambda/lambda + k`, `k = 1, 2, ...`, for which
/// `L v+ <= -F` holds at every closed-domain node of the mesh (tolerance 1e-6).
pub fn build_comparison_pair(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    domain: &DomainSpec,
    h: f64,
) -> Result<ComparisonPair> {
    let n = op.dim();
    let nodes = closed_nodes(domain, h)?;
    if nodes.is_empty() {
        return Err(Error::EmptySamples);
    }
    for p in &nodes {
        let c = op.c.try_value(p)?;
        if c > 0.0 {
            return Err(Error::PositiveZerothOrder {
                point: p.clone(),
                value: c,
            });
        }
    }
    let f_sup = nodes
        .iter()
        .map(|p| f.try_value(p).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let g_sup = nodes
        .iter()
        .chain(domain.boundary_samples((1.0 / h).ceil() as usize).iter())
        .map(|p| g.try_value(p).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let (lo, hi) = domain.bbox();
    let (s, d) = (lo[0], hi[0] - lo[0]);
    let lambda = op.lambda;
    let ratio = op.big_lambda / lambda;
    for k in 1..=64 {
        let gamma = ratio + k as f64;
        let v_plus = comparison_expr(gamma, s, d, g_sup, f_sup, lambda);
        let vp = ScalarField::from_expr(v_plus.clone(), n)?;
        let mut ok = true;
        for p in &nodes {
            if op.apply_exact(&vp, p)? > -f_sup + 1e-6 {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(ComparisonPair {
                v_minus: ScalarField::from_expr(expr::neg(v_plus), n)?,
                v_plus: vp,
                gamma,
                slab_width: d,
                slab_start: s,
                g_sup,
                f_sup,
                lambda,
            });
        }
    }
    Err(Error::Inadmissible {
        what: "no gamma in Lambda/lambda + {1..64} makes v+ a supersolution; check lambda and Lambda"
            .into(),
        residual: f64::NAN,
        tolerance: 1e-6,
    })
}

fn comparison_expr(gamma: f64, s: f64, d: f64, g: f64, f: f64, lambda: f64) -> Expr {
    let shifted = expr::sub(Expr::Var(0), Expr::Num(s));
    let e = expr::call(Func::Exp, expr::mul(Expr::Num(gamma), shifted));
    let bracket = expr::sub(Expr::Num((gamma * d).exp()), e);
    expr::add(Expr::Num(g), expr::mul(Expr::Num(f / lambda), bracket))
}

/// A priori bound `sup |u| <= sup |g| + (e^{gamma d} - 1) sup |f| / lambda`.
pub fn interior_sup_bound(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    domain: &DomainSpec,
    h: f64,
) -> Result<f64> {
    Ok(build_comparison_pair(op, f, g, domain, h)?.sup_bound())
}
