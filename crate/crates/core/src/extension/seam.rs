use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{holder_seminorm, PairStrategy, Samples, ScalarField};

/// Sample points on the hyperplane `{x_axis = const}` where a piecewise
/// definition switches.
#[derive(Debug, Clone)]
pub struct Seam {
    pub axis: usize,
    pub points: Vec<Vec<f64>>,
}

impl Seam {
    pub fn new(axis: usize, points: Vec<Vec<f64>>) -> Seam {
        Seam { axis, points }
    }
}

/// Largest one-sided mismatches across a seam.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeamReport {
    pub h: f64,
    pub alpha: f64,
    /// Values extrapolated quadratically from each side.
    pub value_mismatch: f64,
    /// Normal derivative, stencil `(-3, 4, -1)/(2h)`.
    pub first_mismatch: f64,
    /// Normal second derivative, stencil `(2, -5, 4, -1)/h^2`.
    pub second_mismatch: f64,
    /// Mixed tangential-normal second derivatives.
    pub mixed_mismatch: f64,
    /// Sampled Hölder seminorm of the normal second derivative in a band
    /// around the seam.
    pub second_holder: f64,
    pub points: usize,
}

/// One-sided derivative checks across a seam (report only).
pub fn verify_extension_smoothness(
    eu: &ScalarField,
    seam: &Seam,
    alpha: f64,
    h: f64,
) -> Result<SeamReport> {
    let n = eu.dim();
    let k = seam.axis;
    if k >= n {
        return Err(Error::invalid("axis", format!("{k} >= {n}")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("h", "must be positive"));
    }
    let at = |p: &[f64], moves: &[(usize, f64)]| -> Result<f64> {
        let mut q = p.to_vec();
        for &(i, s) in moves {
            q[i] += s;
        }
        eu.try_value(&q)
    };
    // along the normal from one side: values at 0, s h, 2 s h, 3 s h
    let line = |p: &[f64], s: f64, shift: &[(usize, f64)]| -> Result<[f64; 4]> {
        let mut v = [0.0; 4];
        for (m, slot) in v.iter_mut().enumerate() {
            let mut moves = shift.to_vec();
            moves.push((k, s * m as f64 * h));
            *slot = at(p, &moves)?;
        }
        Ok(v)
    };
    let d1 = |v: &[f64; 4], s: f64| s * (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
    let d2 = |v: &[f64; 4]| (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
    // values at the seam extrapolated from 1h, 2h, 3h
    let extrap = |v: &[f64; 4]| 3.0 * v[1] - 3.0 * v[2] + v[3];

    let mut rep = SeamReport {
        h,
        alpha,
        value_mismatch: 0.0,
        first_mismatch: 0.0,
        second_mismatch: 0.0,
        mixed_mismatch: 0.0,
        second_holder: 0.0,
        points: seam.points.len(),
    };
    for p in &seam.points {
        let plus = line(p, 1.0, &[])?;
        let minus = line(p, -1.0, &[])?;
        rep.value_mismatch = rep.value_mismatch.max((extrap(&plus) - extrap(&minus)).abs());
        rep.first_mismatch = rep.first_mismatch.max((d1(&plus, 1.0) - d1(&minus, -1.0)).abs());
        rep.second_mismatch = rep.second_mismatch.max((d2(&plus) - d2(&minus)).abs());
        for i in (0..n).filter(|&i| i != k) {
            let side = |s: f64| -> Result<f64> {
                let f = line(p, s, &[(i, h)])?;
                let b = line(p, s, &[(i, -h)])?;
                Ok((d1(&f, s) - d1(&b, s)) / (2.0 * h))
            };
            rep.mixed_mismatch = rep.mixed_mismatch.max((side(1.0)? - side(-1.0)?).abs());
        }
    }
    // Hölder quotient of the normal second derivative near the seam
    let width = (20.0 * h).max(0.02);
    let step = width / 10.0;
    let mut pts = Vec::new();
    let mut vals = Vec::new();
    for p in &seam.points {
        for j in 1..=10 {
            for s in [-1.0, 1.0] {
                let mut q = p.clone();
                q[k] += s * step * j as f64;
                let c = eu.try_value(&q)?;
                let v = (at(&q, &[(k, h)])? - 2.0 * c + at(&q, &[(k, -h)])?) / (h * h);
                pts.push(q);
                vals.push(v);
            }
        }
    }
    let samples = Samples::new(pts, vals)?;
    rep.second_holder = holder_seminorm(&samples, alpha, PairStrategy::Auto { seed: 7 })?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_odd_extension_is_seamless() {
        let u = ScalarField::parse("x1", 1).unwrap();
        let r = verify_extension_smoothness(&u, &Seam::new(0, vec![vec![0.0]]), 0.5, 1e-3).unwrap();
        assert!(r.value_mismatch < 1e-10 && r.first_mismatch < 1e-10 && r.second_mismatch < 1e-6);
    }

    #[test]
    fn kink_is_detected() {
        let u = ScalarField::from_fn(2, |x| Ok(x[1].abs() * x[0]));
        let seam = Seam::new(1, vec![vec![0.5, 0.0]]);
        let r = verify_extension_smoothness(&u, &seam, 0.5, 1e-3).unwrap();
        assert!((r.first_mismatch - 1.0).abs() < 1e-6);
        assert!((r.mixed_mismatch - 2.0).abs() < 1e-6);
    }
}
