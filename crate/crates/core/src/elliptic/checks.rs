use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::norms::{holder_seminorm, PairStrategy, Samples};
use crate::fields::{DomainSpec, GridFunction, Jet, NodeKind, ScalarField};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EllipticityReport {
    pub lambda_est: f64,
    pub ok: bool,
    /// Largest sampled coefficient modulus.
    pub coefficient_max: f64,
    pub bounds_ok: bool,
    pub worst_point: Vec<f64>,
}

fn directions(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    if n == 2 {
        return (0..count)
            .map(|k| {
                let t = PI * k as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|k| (0..n).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
        .collect();
    while out.len() < count.max(n) {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let l = crate::fields::domain::norm(&v);
        if l > 1e-3 && l <= 1.0 {
            out.push(v.iter().map(|x| x / l).collect());
        }
    }
    out
}

/// Sampled check of `xi' a(x) xi >= lambda |xi|^2` and of the coefficient bound.
pub fn verify_ellipticity(
    op: &EllipticOperator,
    domain: &DomainSpec,
    n_points: usize,
    n_directions: usize,
    seed: u64,
) -> Result<EllipticityReport> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs = directions(n, n_directions.max(1), &mut rng);
    let points = domain.sample_interior(n_points.max(1), seed);
    let mut lambda_est = f64::INFINITY;
    let mut worst = vec![];
    let mut coefficient_max = 0.0f64;
    for p in &points {
        let c = op.coefficients(p)?;
        for d in &dirs {
            let q = c.quadratic_form(d);
            if q < lambda_est {
                lambda_est = q;
                worst = p.clone();
            }
        }
        for i in 0..n {
            for j in 0..n {
                coefficient_max = coefficient_max.max(op.a[i][j].try_value(p)?.abs());
            }
        }
        coefficient_max = coefficient_max
            .max(c.b.iter().fold(0.0, |m, v| m.max(v.abs())))
            .max(c.c.abs());
    }
    Ok(EllipticityReport {
        lambda_est,
        ok: lambda_est >= op.lambda - 1e-9,
        coefficient_max,
        bounds_ok: coefficient_max <= op.big_lambda + 1e-9,
        worst_point: worst,
    })
}

/// `omega = max c` over the closed-domain mesh plus `[c]_alpha h^alpha`.
pub fn estimate_omega(op: &EllipticOperator, domain: &DomainSpec, h: f64) -> Result<f64> {
    if let Some(c) = op.c.constant_value() {
        return Ok(c);
    }
    let s = Samples::from_field(&op.c, domain, h)?;
    let max = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let alpha = op.c.holder_alpha().unwrap_or(1.0);
    // coarse sample for the modulus term; the pair count grows quadratically
    let coarse_h = (h * 4.0).max(domain.diameter() / 40.0);
    let coarse = Samples::from_field(&op.c, domain, coarse_h)?;
    let semi = if coarse.len() >= 2 {
        holder_seminorm(&coarse, alpha, PairStrategy::default())?
    } else {
        0.0
    };
    Ok(max + semi * h.powf(alpha))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DissipativityReport {
    pub x_star: Vec<f64>,
    pub u_star: f64,
    /// `sign(u(x*)) * Lu(x*)`.
    pub margin: f64,
    pub omega: f64,
    /// `margin - omega |u(x*)|`, which should not be positive.
    pub excess: f64,
}

/// Central-difference `L_h u` at an interior mesh node.
pub(crate) fn grid_apply(op: &EllipticOperator, u: &GridFunction, idx: usize) -> Result<f64> {
    let mesh = &u.mesh;
    let n = mesh.dim();
    let h = mesh.h;
    let v = u.values();
    let at = |off: &[isize]| -> Result<f64> {
        mesh.offset(idx, off).map(|j| v[j]).ok_or_else(|| Error::StencilOutOfDomain {
            point: mesh.point(idx),
        })
    };
    let mut jet = Jet::constant(v[idx], n);
    let mut off = vec![0isize; n];
    for i in 0..n {
        off[i] = 1;
        let up = at(&off)?;
        off[i] = -1;
        let um = at(&off)?;
        off[i] = 0;
        jet.gradient[i] = (up - um) / (2.0 * h);
        jet.hessian[i][i] = (up - 2.0 * v[idx] + um) / (h * h);
        for j in 0..i {
            let mut s = 0.0;
            for (si, sj, w) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                off[i] = si;
                off[j] = sj;
                s += w * at(&off)?;
            }
            off[i] = 0;
            off[j] = 0;
            let m = s / (4.0 * h * h);
            jet.hessian[i][j] = m;
            jet.hessian[j][i] = m;
        }
    }
    Ok(op.coefficients(&mesh.point(idx))?.apply(&jet))
}

/// Evaluate `Lu` at the argmax of `|u|`, where dissipativity says it points
/// back toward zero.
pub fn dissipativity_margin(
    op: &EllipticOperator,
    u: &GridFunction,
    domain: &DomainSpec,
) -> Result<DissipativityReport> {
    let kinds = domain.classify(&u.mesh);
    let v = u.values();
    for (i, k) in kinds.iter().enumerate() {
        if *k != NodeKind::Interior && domain.contains_closed(&u.mesh.point(i)) && v[i].abs() > 1e-9
        {
            return Err(Error::Inadmissible {
                what: "u must vanish on the boundary".into(),
                residual: v[i].abs(),
                tolerance: 1e-9,
            });
        }
    }
    let (idx, _) = kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| **k == NodeKind::Interior)
        .map(|(i, _)| (i, v[i].abs()))
        .fold((usize::MAX, 0.0), |acc, (i, a)| if a > acc.1 { (i, a) } else { acc });
    if idx == usize::MAX {
        return Err(Error::ZeroFunction);
    }
    let lu = grid_apply(op, u, idx)?;
    let omega = estimate_omega(op, domain, u.h())?;
    let margin = v[idx].signum() * lu;
    Ok(DissipativityReport {
        x_star: u.mesh.point(idx),
        u_star: v[idx],
        margin,
        omega,
        excess: margin - omega * v[idx].abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// `Lu >= 0`: interior values stay below the boundary maximum.
    Subsolution,
    /// `Lu <= 0`: interior values stay above the boundary minimum.
    Supersolution,
    /// `Lu = 0`: both bounds, so `sup |u|` is attained on the boundary.
    Solution,
    /// `Lu` changes sign; no claim is checked.
    Indefinite,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MaxPrincipleReport {
    pub regime: Regime,
    pub interior_max: f64,
    pub interior_min: f64,
    pub boundary_max: f64,
    pub boundary_min: f64,
    /// Largest amount by which the applicable bound is exceeded (0 when fine).
    pub violation: f64,
    pub ok: bool,
}

pub const MAX_PRINCIPLE_TOL: f64 = 1e-9;

/// Weak maximum principle on the mesh. The regime comes from the sign of `f`
/// (the claimed `Lu`) on interior nodes, or from `L_h u` when `f` is absent.
pub fn max_principle_check(
    u: &GridFunction,
    op: &EllipticOperator,
    f: Option<&ScalarField>,
    domain: &DomainSpec,
) -> Result<MaxPrincipleReport> {
    let kinds = domain.classify(&u.mesh);
    max_principle_on(u, op, f, &kinds)
}

pub(crate) fn max_principle_on(
    u: &GridFunction,
    op: &EllipticOperator,
    f: Option<&ScalarField>,
    kinds: &[NodeKind],
) -> Result<MaxPrincipleReport> {
    let v = u.values();
    let (mut imax, mut imin) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut bmax, mut bmin) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut pos, mut neg) = (false, false);
    let scale = u.sup_norm().max(1.0);
    for (i, k) in kinds.iter().enumerate() {
        match k {
            NodeKind::Interior => {
                imax = imax.max(v[i]);
                imin = imin.min(v[i]);
                let lu = match f {
                    Some(f) => f.try_value(&u.mesh.point(i))?,
                    None => grid_apply(op, u, i)?,
                };
                // discrete L_h u carries round-off of order eps/h^2
                let noise = if f.is_some() {
                    0.0
                } else {
                    1e-12 * scale / (u.h() * u.h())
                };
                pos |= lu > noise;
                neg |= lu < -noise;
            }
            NodeKind::Boundary => {
                bmax = bmax.max(v[i]);
                bmin = bmin.min(v[i]);
            }
            NodeKind::Exterior => {}
        }
    }
    if bmax == f64::NEG_INFINITY {
        return Err(Error::EmptySamples);
    }
    let regime = match (pos, neg) {
        (false, false) => Regime::Solution,
        (true, false) => Regime::Subsolution,
        (false, true) => Regime::Supersolution,
        (true, true) => Regime::Indefinite,
    };
    // with c <= 0 the bounds are against u+ and u-; with c = 0 against u itself
    let c_zero = op.c.constant_value() == Some(0.0);
    let upper = if c_zero { bmax } else { bmax.max(0.0) };
    let lower = if c_zero { bmin } else { bmin.min(0.0) };
    let violation = if imax == f64::NEG_INFINITY {
        0.0
    } else {
        let over = (imax - upper).max(0.0);
        let under = (lower - imin).max(0.0);
        match regime {
            Regime::Subsolution => over,
            Regime::Supersolution => under,
            Regime::Solution => over.max(under),
            Regime::Indefinite => 0.0,
        }
    };
    Ok(MaxPrincipleReport {
        regime,
        interior_max: imax,
        interior_min: imin,
        boundary_max: bmax,
        boundary_min: bmin,
        violation,
        ok: violation <= MAX_PRINCIPLE_TOL,
    })
}
