//! Bump kernel, smoothed indicators and mollification.

use std::sync::OnceLock;

use super::domain::{dist, DomainSpec, Shape};
use super::grid::{GridFunction, Mesh};
use super::scalar::{Jet, ScalarField};
use crate::error::{Error, Result};

/// `exp(-1/(1 - t^2))` on (-1, 1), zero outside.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

fn bump_d1(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - t * t;
    bump(t) * (-2.0 * t / (q * q))
}

#[cfg(test)]
fn bump_d2(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - t * t;
    let g = -2.0 * t / (q * q);
    // derivative of g
    let dg = (-2.0 * q * q - 2.0 * t * 2.0 * q * 2.0 * t) / (q * q * q * q);
    bump(t) * (g * g + dg)
}

// 10-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let m = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        s += GL_W[k] * (f(m - r * GL_X[k]) + f(m + r * GL_X[k]));
    }
    s * r
}

const TABLE_CELLS: usize = 4096;

struct CdfTable {
    mass: f64,
    values: Vec<f64>,
}

fn table() -> &'static CdfTable {
    static T: OnceLock<CdfTable> = OnceLock::new();
    T.get_or_init(|| {
        let w = 2.0 / TABLE_CELLS as f64;
        let mut acc = 0.0;
        let mut raw = Vec::with_capacity(TABLE_CELLS + 1);
        raw.push(0.0);
        for i in 0..TABLE_CELLS {
            let a = -1.0 + w * i as f64;
            acc += gauss(bump, a, a + w);
            raw.push(acc);
        }
        CdfTable {
            mass: acc,
            values: raw.iter().map(|v| v / acc).collect(),
        }
    })
}

/// Integral of the bump over (-1, 1).
pub fn bump_mass() -> f64 {
    table().mass
}

/// Normalized bump density `phi = bump / mass`.
pub fn density(t: f64) -> f64 {
    bump(t) / bump_mass()
}

/// Cumulative distribution of the normalized bump: 0 below -1, 1 above 1.
/// Hermite interpolation of a quadrature table using the exact density as slope.
pub fn smooth_step(t: f64) -> f64 {
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let tab = table();
    let w = 2.0 / TABLE_CELLS as f64;
    let u = (t + 1.0) / w;
    let i = (u.floor() as usize).min(TABLE_CELLS - 1);
    let s = u - i as f64;
    let x0 = -1.0 + w * i as f64;
    let (p0, p1) = (tab.values[i], tab.values[i + 1]);
    let (m0, m1) = (density(x0) * w, density(x0 + w) * w);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * m1
}

/// `(smooth_step, derivative, second derivative)` at `t`.
pub fn smooth_step_jet(t: f64) -> (f64, f64, f64) {
    let m = bump_mass();
    (smooth_step(t), bump(t) / m, bump_d1(t) / m)
}

pub(crate) fn density_d1(t: f64) -> f64 {
    bump_d1(t) / bump_mass()
}

/// Smoothed indicator of `[p, q]` with mollifier radius `rho`: equal to 1 on
/// `[p + rho, q - rho]` and 0 outside `(p - rho, q + rho)`.
pub fn smooth_interval(t: f64, p: f64, q: f64, rho: f64) -> (f64, f64, f64) {
    let (a0, a1, a2) = smooth_step_jet((t - p) / rho);
    let (b0, b1, b2) = smooth_step_jet((t - q) / rho);
    (a0 - b0, (a1 - b1) / rho, (a2 - b2) / (rho * rho))
}

/// Smooth cutoff equal to 1 on `inner` with support compactly inside `outer`.
///
/// Box inner sets use a product of smoothed interval indicators, ball inner
/// sets a radial profile. Three quarters of the margin is used, so the
/// support keeps a quarter of the margin away from the outer boundary.
pub fn cutoff(inner: &DomainSpec, outer: &DomainSpec) -> Result<ScalarField> {
    if inner.dim() != outer.dim() {
        return Err(Error::DimensionMismatch {
            expected: outer.dim(),
            found: inner.dim(),
        });
    }
    let margin = inner.margin_inside(outer);
    if !(margin > 0.0) {
        return Err(Error::ZeroMargin { margin });
    }
    let n = inner.dim();
    if let Some((lo, hi)) = inner.as_box() {
        let e = 0.75 * margin / (n as f64).sqrt();
        let rho = e / 3.0;
        let f = ScalarField::from_jet_fn(n, move |x| {
            let parts: Vec<(f64, f64, f64)> = (0..n)
                .map(|k| smooth_interval(x[k], lo[k] - 2.0 * rho, hi[k] + 2.0 * rho, rho))
                .collect();
            Ok(product_jet(&parts))
        });
        let (blo, bhi) = inner.bbox();
        let ext = e;
        return Ok(f.with_support_hint(
            blo.iter().map(|v| v - ext).collect(),
            bhi.iter().map(|v| v + ext).collect(),
        ));
    }
    match &inner.shape {
        Shape::Ball { center, radius } => {
            let e = 0.75 * margin;
            let rho = e / 3.0;
            let edge = radius + 2.0 * rho;
            let c = center.clone();
            let f = ScalarField::from_jet_fn(n, move |x| {
                let r = dist(x, &c);
                let (v, d1, d2) = {
                    let (s0, s1, s2) = smooth_step_jet((r - edge) / rho);
                    (1.0 - s0, -s1 / rho, -s2 / (rho * rho))
                };
                let mut jet = Jet::constant(v, n);
                if d1 != 0.0 || d2 != 0.0 {
                    let u: Vec<f64> = x.iter().zip(&c).map(|(a, b)| (a - b) / r).collect();
                    for i in 0..n {
                        jet.gradient[i] = d1 * u[i];
                        for j in 0..n {
                            let delta = if i == j { 1.0 } else { 0.0 };
                            jet.hessian[i][j] = d2 * u[i] * u[j] + d1 / r * (delta - u[i] * u[j]);
                        }
                    }
                }
                Ok(jet)
            });
            let ext = radius + e;
            Ok(f.with_support_hint(
                center.iter().map(|v| v - ext).collect(),
                center.iter().map(|v| v + ext).collect(),
            ))
        }
        _ => Err(Error::invalid(
            "inner",
            "cutoffs are built for box and ball inner sets",
        )),
    }
}

fn product_jet(parts: &[(f64, f64, f64)]) -> Jet {
    let n = parts.len();
    let mut jet = Jet::constant(parts.iter().map(|p| p.0).product(), n);
    let others = |skip: &[usize]| -> f64 {
        parts
            .iter()
            .enumerate()
            .filter(|(k, _)| !skip.contains(k))
            .map(|(_, p)| p.0)
            .product()
    };
    for i in 0..n {
        jet.gradient[i] = parts[i].1 * others(&[i]);
        jet.hessian[i][i] = parts[i].2 * others(&[i]);
        for j in 0..i {
            let v = parts[i].1 * parts[j].1 * others(&[i, j]);
            jet.hessian[i][j] = v;
            jet.hessian[j][i] = v;
        }
    }
    jet
}

/// Discrete convolution of `u` with the bump scaled to radius `1/k`, on the
/// grid nodes inside the box `inner`. Weights are normalized to unit sum, so
/// sup norm and sampled Hölder quotients cannot grow.
pub fn mollify(u: &GridFunction, k: u32, inner: &DomainSpec) -> Result<GridFunction> {
    if k == 0 {
        return Err(Error::invalid("k", "must be positive"));
    }
    let (lo, hi) = inner
        .as_box()
        .ok_or_else(|| Error::invalid("inner", "mollification targets a box"))?;
    let mesh = &u.mesh;
    let n = mesh.dim();
    if lo.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: lo.len(),
        });
    }
    let radius = 1.0 / k as f64;
    let top = mesh.upper();
    let margin = (0..n)
        .map(|a| (lo[a] - mesh.origin[a]).min(top[a] - hi[a]))
        .fold(f64::INFINITY, f64::min);
    if !(margin > radius) {
        let required = if margin > 0.0 {
            (1.0 / margin).floor() as u32 + 1
        } else {
            u32::MAX
        };
        return Err(Error::MarginTooSmall {
            margin,
            required_k: required,
        });
    }
    let h = mesh.h;
    let reach = (radius / h).ceil() as isize;
    let width = (2 * reach + 1) as usize;
    let mut stencil: Vec<(Vec<isize>, f64)> = Vec::new();
    for c in 0..width.pow(n as u32) {
        let mut c = c;
        let mut off = vec![0isize; n];
        for o in off.iter_mut().rev() {
            *o = (c % width) as isize - reach;
            c /= width;
        }
        let r = off.iter().map(|&o| (o as f64 * h).powi(2)).sum::<f64>().sqrt();
        let w = bump(r / radius);
        if w > 0.0 {
            stencil.push((off, w));
        }
    }
    if stencil.is_empty() {
        stencil.push((vec![0; n], 1.0));
    }
    let total: f64 = stencil.iter().map(|s| s.1).sum();
    stencil.iter_mut().for_each(|s| s.1 /= total);
    // output mesh: grid nodes inside [lo, hi]
    let first: Vec<usize> = (0..n)
        .map(|a| ((lo[a] - mesh.origin[a]) / h - 1e-9).ceil() as usize)
        .collect();
    let last: Vec<usize> = (0..n)
        .map(|a| ((hi[a] - mesh.origin[a]) / h + 1e-9).floor() as usize)
        .collect();
    let counts: Vec<usize> = (0..n).map(|a| last[a] + 1 - first[a]).collect();
    let out_mesh = Mesh::new(mesh.point_of(&first), h, counts)?;
    let values = (0..out_mesh.len())
        .map(|i| {
            let m = out_mesh.multi_index(i);
            let base: Vec<usize> = (0..n).map(|a| m[a] + first[a]).collect();
            let idx = mesh.linear_index(&base);
            stencil
                .iter()
                .map(|(off, w)| {
                    let j = mesh.offset(idx, off).expect("margin check keeps the stencil inside");
                    w * u.values()[j]
                })
                .sum()
        })
        .collect();
    let mut g = GridFunction::new(out_mesh, values)?;
    g.alpha = u.alpha;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_mass_matches_reference() {
        assert!((bump_mass() - 0.443_993_816_168_079_4).abs() < 1e-13);
    }

    #[test]
    fn smooth_step_is_a_cdf() {
        assert_eq!(smooth_step(-1.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.0) - 0.5).abs() < 1e-14);
        let mut prev = 0.0;
        for i in 0..=2000 {
            let t = -1.0 + i as f64 * 1e-3;
            let v = smooth_step(t);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        // the derivative of the table agrees with the density
        let t = 0.37;
        let fd = (smooth_step(t + 1e-6) - smooth_step(t - 1e-6)) / 2e-6;
        assert!((fd - density(t)).abs() < 1e-8);
    }

    #[test]
    fn bump_derivatives() {
        for t in [-0.8, -0.2, 0.0, 0.5, 0.9] {
            let fd1 = (bump(t + 1e-6) - bump(t - 1e-6)) / 2e-6;
            let fd2 = (bump_d1(t + 1e-6) - bump_d1(t - 1e-6)) / 2e-6;
            assert!((fd1 - bump_d1(t)).abs() < 1e-7 * (1.0 + fd1.abs()));
            assert!((fd2 - bump_d2(t)).abs() < 1e-5 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn cutoff_examples() {
        let inner = DomainSpec::cuboid(vec![0.3, 0.3], vec![0.7, 0.7]).unwrap();
        let outer = DomainSpec::unit_box(2);
        let eta = cutoff(&inner, &outer).unwrap();
        assert_eq!(eta.value(&[0.5, 0.5]), 1.0);
        assert_eq!(eta.value(&[0.3, 0.7]), 1.0);
        assert_eq!(eta.value(&[1.2, 0.5]), 0.0);
        assert_eq!(eta.value(&[0.05, 0.5]), 0.0);
        for i in 0..=40 {
            for j in 0..=40 {
                let v = eta.value(&[i as f64 / 40.0, j as f64 / 40.0]);
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let touching = DomainSpec::cuboid(vec![0.0, 0.3], vec![0.5, 0.6]).unwrap();
        assert!(matches!(cutoff(&touching, &outer), Err(Error::ZeroMargin { .. })));
    }

    #[test]
    fn ball_cutoff_jet_matches_fd() {
        let inner = DomainSpec::ball(vec![0.0, 0.0], 0.5).unwrap();
        let outer = DomainSpec::ball(vec![0.0, 0.0], 1.0).unwrap();
        let eta = cutoff(&inner, &outer).unwrap();
        let p = [0.7, 0.2];
        let j = eta.jet(&p).unwrap();
        let h = 1e-5;
        let fx = (eta.value(&[p[0] + h, p[1]]) - eta.value(&[p[0] - h, p[1]])) / (2.0 * h);
        assert!((fx - j.gradient[0]).abs() < 1e-6);
        assert!(j.gradient[0] < 0.0);
        assert_eq!(eta.value(&[0.0, 0.0]), 1.0);
        assert_eq!(eta.value(&[0.0, 0.95]), 0.0);
    }

    #[test]
    fn mollify_examples() {
        let d = DomainSpec::interval(0.0, 1.0).unwrap();
        let mesh = d.mesh(1e-3).unwrap();
        let c = GridFunction::from_field(mesh.clone(), &ScalarField::constant(2.5, 1)).unwrap();
        let inner = DomainSpec::interval(0.3, 0.7).unwrap();
        let m = mollify(&c, 8, &inner).unwrap();
        assert!(m.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
        let id = GridFunction::from_field(mesh, &ScalarField::parse("x1", 1).unwrap()).unwrap();
        let m = mollify(&id, 8, &inner).unwrap();
        for (i, v) in m.values().iter().enumerate() {
            assert!((v - m.mesh.point(i)[0]).abs() < 1e-12);
        }
        match mollify(&id, 2, &inner) {
            Err(Error::MarginTooSmall { required_k, .. }) => assert_eq!(required_k, 4),
            other => panic!("{other:?}"),
        }
    }
}
