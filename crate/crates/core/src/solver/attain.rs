use serde::Serialize;

use super::stencil::Discretization;
use crate::elliptic::barrier::{build_barrier, BarrierOptions, Sphere};
use crate::elliptic::operator::EllipticOperator;
use crate::error::Result;
use crate::fields::{DomainSpec, GridFunction, NodeKind, ScalarField};

/// Slack of the barrier sandwich on the mesh.
pub const SANDWICH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonCheck {
    pub eps: f64,
    pub k_prime: f64,
    /// `max (w- - u)` and `max (u - w+)` over closed-domain nodes.
    pub below: f64,
    pub above: f64,
    /// The same restricted to nodes next to the boundary.
    pub below_near: f64,
    pub above_near: f64,
    pub verified: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointCheck {
    pub x0: Vec<f64>,
    /// Why the point was skipped, if it was.
    pub skipped: Option<String>,
    pub sigma: f64,
    pub tau: f64,
    pub lw_max: f64,
    pub checks: Vec<EpsilonCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttainmentReport {
    pub points: Vec<PointCheck>,
    /// Largest `|u - g(x0)|` over nodes within `2h` of a tested point.
    pub boundary_modulus: f64,
    pub ok: bool,
}

/// Checks `w-_eps <= u <= w+_eps` on the mesh of `u` for barriers built at
/// each boundary point `x0`. Barriers are scaled so that they are discrete
/// super- and subsolutions too, with the staircase boundary nodes as extra
/// Dirichlet points.
pub fn boundary_attainment_check(
    u: &GridFunction,
    g: &ScalarField,
    op: &EllipticOperator,
    f: &ScalarField,
    domain: &DomainSpec,
    x0s: &[Vec<f64>],
    epsilons: &[f64],
) -> Result<AttainmentReport> {
    let disc = Discretization::on_mesh(op, domain, u.mesh.clone())?;
    let h = u.h();
    let closed: Vec<usize> = (0..u.mesh.len())
        .filter(|&i| disc.kinds[i] != NodeKind::Exterior)
        .collect();
    let near: Vec<bool> = (0..u.mesh.len())
        .map(|i| disc.kinds[i] == NodeKind::Boundary || adjacent_to_boundary(&disc, i))
        .collect();
    let staircase: Vec<Vec<f64>> = disc.boundary_nodes().map(|i| u.mesh.point(i)).collect();
    let apply = |w: &ScalarField| disc.apply_field(w);
    let opts = BarrierOptions {
        h,
        extra_boundary: &staircase,
        discrete: Some(&apply),
    };
    let radius = 0.5 * domain.diameter();
    let mut points = Vec::with_capacity(x0s.len());
    let mut modulus = 0.0f64;
    let mut all_ok = true;
    for x0 in x0s {
        let skip = |reason: String| PointCheck {
            x0: x0.clone(),
            skipped: Some(reason),
            sigma: f64::NAN,
            tau: f64::NAN,
            lw_max: f64::NAN,
            checks: Vec::new(),
        };
        let Some((center, r)) = domain.external_sphere(x0, radius) else {
            points.push(skip("no external sphere".into()));
            continue;
        };
        let sphere = Sphere { center, radius: r };
        let net = match build_barrier(op, f, g, domain, x0, &sphere, epsilons, opts) {
            Ok(net) => net,
            Err(e) => {
                points.push(skip(e.to_string()));
                continue;
            }
        };
        let mut checks = Vec::with_capacity(net.pairs.len());
        for pair in &net.pairs {
            let mut c = EpsilonCheck {
                eps: pair.eps,
                k_prime: pair.k_prime,
                below: f64::NEG_INFINITY,
                above: f64::NEG_INFINITY,
                below_near: f64::NEG_INFINITY,
                above_near: f64::NEG_INFINITY,
                verified: pair.verified,
                ok: false,
            };
            for &i in &closed {
                let p = u.mesh.point(i);
                let v = u.values()[i];
                let lo = pair.w_minus.try_value(&p)? - v;
                let hi = v - pair.w_plus.try_value(&p)?;
                c.below = c.below.max(lo);
                c.above = c.above.max(hi);
                if near[i] {
                    c.below_near = c.below_near.max(lo);
                    c.above_near = c.above_near.max(hi);
                }
            }
            c.ok = c.below <= SANDWICH_TOL && c.above <= SANDWICH_TOL;
            all_ok &= c.ok;
            checks.push(c);
        }
        for &i in &closed {
            let p = u.mesh.point(i);
            if crate::fields::domain::dist(&p, x0) <= 2.0 * h * (1.0 + 1e-9) {
                modulus = modulus.max((u.values()[i] - net.g0).abs());
            }
        }
        points.push(PointCheck {
            x0: x0.clone(),
            skipped: None,
            sigma: net.sigma,
            tau: net.tau,
            lw_max: net.lw_max,
            checks,
        });
    }
    Ok(AttainmentReport {
        points,
        boundary_modulus: modulus,
        ok: all_ok,
    })
}

fn adjacent_to_boundary(disc: &Discretization, i: usize) -> bool {
    if disc.kinds[i] != NodeKind::Interior {
        return false;
    }
    let n = disc.mesh.dim();
    (0..n).any(|k| {
        [-1isize, 1].iter().any(|&s| {
            let mut o = vec![0isize; n];
            o[k] = s;
            disc.mesh
                .offset(i, &o)
                .is_some_and(|j| disc.kinds[j] == NodeKind::Boundary)
        })
    })
}
