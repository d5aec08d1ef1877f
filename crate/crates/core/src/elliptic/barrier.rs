use serde::Serialize;

use super::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fields::domain::dist;
use crate::fields::{DomainSpec, ScalarField};

/// Closed ball touching the domain closure only at the barrier point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Upper and lower barrier for one tolerance `eps`.
#[derive(Debug, Clone)]
pub struct BarrierPair {
    pub eps: f64,
    pub k_eps: f64,
    /// `max(k_eps, sup |f| + Lambda |g(x0)|)`.
    pub k_prime: f64,
    pub w_plus: ScalarField,
    pub w_minus: ScalarField,
    /// Sampled check of the three barrier conditions.
    pub verified: bool,
}

#[derive(Debug, Clone)]
pub struct BarrierNet {
    pub x0: Vec<f64>,
    pub sphere: Sphere,
    pub sigma: f64,
    pub tau: f64,
    /// `w = tau (R^-sigma - r^-sigma)`.
    pub w: ScalarField,
    pub g0: f64,
    /// Largest sampled `Lw`, at most -1.
    pub lw_max: f64,
    pub pairs: Vec<BarrierPair>,
}

/// Evaluates `L_h` of a field at the interior nodes of a discretization, so
/// the barrier can be scaled to hold for the discrete operator as well.
pub type DiscreteApply<'a> = &'a (dyn Fn(&ScalarField) -> Result<Vec<f64>> + Sync);

#[derive(Clone, Copy)]
pub struct BarrierOptions<'a> {
    /// Mesh spacing for the sampled checks.
    pub h: f64,
    /// Additional points where the Dirichlet data is imposed (e.g. staircase
    /// boundary nodes of a solver grid).
    pub extra_boundary: &'a [Vec<f64>],
    pub discrete: Option<DiscreteApply<'a>>,
}

impl<'a> BarrierOptions<'a> {
    pub fn new(h: f64) -> Self {
        BarrierOptions {
            h,
            extra_boundary: &[],
            discrete: None,
        }
    }
}

/// `R^-sigma - r^-sigma`, with the constant taken as the second term evaluated
/// at `x0` so that the barrier vanishes there exactly.
fn radial_expr(y: &[f64], x0: &[f64], sigma: f64) -> Expr {
    let r2 = y
        .iter()
        .enumerate()
        .map(|(i, &c)| expr::pow(expr::sub(Expr::Var(i), Expr::Num(c)), Expr::Num(2.0)))
        .reduce(expr::add)
        .expect("dimension >= 1");
    let inv = expr::pow(r2, Expr::Num(-sigma / 2.0));
    expr::sub(Expr::Num(inv.eval(x0)), inv)
}

/// `L w1` for `w1 = R^-sigma - r^-sigma`, in closed form.
fn lw_unit(op: &EllipticOperator, p: &[f64], y: &[f64], r_big: f64, sigma: f64) -> Result<f64> {
    let c = op.coefficients(p)?;
    let z: Vec<f64> = p.iter().zip(y).map(|(a, b)| a - b).collect();
    let r2: f64 = z.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let tr: f64 = (0..z.len()).map(|i| c.a[i][i]).sum();
    let bz: f64 = c.b.iter().zip(&z).map(|(b, z)| b * z).sum();
    let bracket = -(sigma + 2.0) * c.quadratic_form(&z) + r2 * (tr + bz);
    Ok(sigma * r.powf(-(sigma + 4.0)) * bracket + c.c * (r_big.powf(-sigma) - r.powf(-sigma)))
}

/// Barrier family at `x0` from an exterior sphere.
///
/// `sigma` starts at `max(1, ceil(C1/lambda))`, `C1 = sup(tr a + b.z)`, and
/// doubles until the sampled `L w1` is negative everywhere; then
/// `tau = 1 / min(-L w1)` so that `L w <= -1`.
pub fn build_barrier(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    domain: &DomainSpec,
    x0: &[f64],
    sphere: &Sphere,
    epsilons: &[f64],
    opts: BarrierOptions<'_>,
) -> Result<BarrierNet> {
    let n = op.dim();
    let h = opts.h;
    let y = &sphere.center;
    let r_big = sphere.radius;
    if !(r_big > 0.0) {
        return Err(Error::invalid("radius", "sphere radius must be positive"));
    }
    let scale = domain.diameter().max(1.0);
    let nodes: Vec<Vec<f64>> = domain
        .mesh(h)?
        .points()
        .filter(|p| domain.contains_closed(p))
        .collect();
    let mut boundary = domain.boundary_samples((1.0 / h).ceil() as usize);
    boundary.extend(opts.extra_boundary.iter().cloned());
    boundary.push(x0.to_vec());
    // external sphere condition, sampled
    for s in boundary.iter().chain(&nodes) {
        if dist(s, x0) > 1e-9 * scale && dist(s, y) <= r_big * (1.0 + 1e-12) {
            return Err(Error::SphereCondition { sample: s.clone() });
        }
    }
    let samples: Vec<&Vec<f64>> = nodes.iter().chain(&boundary).collect();

    let mut c1 = f64::NEG_INFINITY;
    for p in &samples {
        let c = op.coefficients(p)?;
        let tr: f64 = (0..n).map(|i| c.a[i][i]).sum();
        let bz: f64 = c.b.iter().zip(p.iter().zip(y)).map(|(b, (a, yy))| b * (a - yy)).sum();
        c1 = c1.max(tr + bz);
    }
    let mut sigma = (c1 / op.lambda).ceil().max(1.0);
    let mut found = None;
    for _ in 0..12 {
        let mut worst = f64::NEG_INFINITY;
        let mut most_negative_slack = f64::INFINITY;
        for p in &samples {
            let v = lw_unit(op, p, y, r_big, sigma)?;
            worst = worst.max(v);
            most_negative_slack = most_negative_slack.min(-v);
        }
        if let Some(apply) = opts.discrete {
            let w1 = ScalarField::from_expr(radial_expr(y, x0, sigma), n)?;
            for v in apply(&w1)? {
                worst = worst.max(v);
                most_negative_slack = most_negative_slack.min(-v);
            }
        }
        if worst < 0.0 && most_negative_slack.is_finite() {
            found = Some((sigma, most_negative_slack, worst));
            break;
        }
        sigma *= 2.0;
    }
    let (sigma, slack, worst) = found.ok_or_else(|| Error::Inadmissible {
        what: "no sigma makes L w negative on the samples".into(),
        residual: sigma,
        tolerance: 0.0,
    })?;
    let tau = 1.0 / slack;
    let w_expr = expr::mul(Expr::Num(tau), radial_expr(y, x0, sigma));
    let w = ScalarField::from_expr(w_expr.clone(), n)?;
    let g0 = g.try_value(x0)?;
    let f_sup = nodes
        .iter()
        .map(|p| f.try_value(p).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let floor = f_sup + op.big_lambda * g0.abs();

    let mut pairs = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(eps > 0.0) {
            return Err(Error::invalid("epsilon", "must be positive"));
        }
        let mut k_eps = 0.0f64;
        for b in &boundary {
            let wb = w.try_value(b)?;
            let gap = (g.try_value(b)? - g0).abs() - eps;
            if gap > 0.0 {
                if wb <= 1e-14 {
                    return Err(Error::Inadmissible {
                        what: format!("g jumps by more than eps = {eps} at the barrier point"),
                        residual: gap,
                        tolerance: 0.0,
                    });
                }
                k_eps = k_eps.max(gap / wb);
            }
        }
        let k_prime = k_eps.max(floor);
        let scaled = expr::mul(Expr::Num(k_prime), w_expr.clone());
        let w_plus = ScalarField::from_expr(expr::add(Expr::Num(g0 + eps), scaled.clone()), n)?;
        let w_minus = ScalarField::from_expr(expr::sub(Expr::Num(g0 - eps), scaled), n)?;
        let verified = verify_pair(op, f, g, &nodes, &boundary, &w_plus, &w_minus)?;
        pairs.push(BarrierPair {
            eps,
            k_eps,
            k_prime,
            w_plus,
            w_minus,
            verified,
        });
    }
    Ok(BarrierNet {
        x0: x0.to_vec(),
        sphere: sphere.clone(),
        sigma,
        tau,
        w,
        g0,
        lw_max: tau * worst,
        pairs,
    })
}

fn verify_pair(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    nodes: &[Vec<f64>],
    boundary: &[Vec<f64>],
    w_plus: &ScalarField,
    w_minus: &ScalarField,
) -> Result<bool> {
    let tol = 1e-9;
    for p in nodes {
        let fv = f.try_value(p)?;
        if op.apply_exact(w_plus, p)? > fv + tol || op.apply_exact(w_minus, p)? < fv - tol {
            return Ok(false);
        }
    }
    for b in boundary {
        let gv = g.try_value(b)?;
        if w_plus.try_value(b)? < gv - tol || w_minus.try_value(b)? > gv + tol {
            return Ok(false);
        }
    }
    Ok(true)
}
