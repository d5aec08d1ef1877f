use serde::Serialize;

use super::reflection::{reflect_jet, ReflectionParams};
use crate::error::{Error, Result};
use crate::fields::kernel::smooth_interval;
use crate::fields::{fd_derivatives, Jet, OneSided, ScalarField};

/// Tolerance on `u(0)` and `(a u'' + b u')(0+)` for exactly differentiated inputs.
pub const ADMISSIBLE_TOL_1D: f64 = 1e-8;
/// The same for closures, whose one-sided differences carry `O(h^2)` noise.
pub const ADMISSIBLE_TOL_FD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    /// `|u(0)|`.
    pub value: f64,
    /// `|(a u'' + b u')(0+)|`.
    pub condition: f64,
    pub tolerance: f64,
}

impl Admissibility {
    pub fn ok(&self) -> bool {
        self.value <= self.tolerance && self.condition <= self.tolerance
    }
}

#[derive(Debug, Clone)]
pub struct Extension1d {
    /// `E1 u = eta E u` on the real line.
    pub field: ScalarField,
    pub params: ReflectionParams,
    pub support_end: f64,
    pub admissibility: Admissibility,
}

impl Extension1d {
    /// `2 (a u'' + b u')(0) / a`, the second-derivative jump an inadmissible input produces.
    pub fn predicted_jump(&self) -> f64 {
        2.0 * self.admissibility.condition / self.params.a
    }
}

/// Value, first and second derivative of `u` at `0+`.
fn jet_at_zero(u: &ScalarField) -> Result<(f64, f64, f64, f64)> {
    if u.has_exact_jet() {
        let j = u.jet(&[0.0])?;
        return Ok((j.value, j.gradient[0], j.hessian[0][0], ADMISSIBLE_TOL_1D));
    }
    let os = Some(OneSided {
        axis: 0,
        forward: true,
    });
    let d = fd_derivatives(u, &[0.0], 1e-3, 2, os, None)?;
    Ok((d.value, d.gradient[0], d.hessian.expect("order 2")[0][0], ADMISSIBLE_TOL_FD))
}

/// Cutoff equal to 1 on `[-delta/2, c]` with support in `(-3 delta/4, c + delta/4)`.
pub(crate) fn cutoff_1d(delta: f64, c: f64) -> impl Fn(f64) -> (f64, f64, f64) + Clone {
    let rho = delta / 8.0;
    move |t| smooth_interval(t, -5.0 * rho, c + rho, rho)
}

/// Contractive extension of `u` (supported in `[0, c]`) across 0 for the
/// boundary operator `a d^2 + b d`, reflecting into `[0, R)`.
///
/// Rejects inputs with `u(0) != 0` or `(a u'' + b u')(0+) != 0`.
pub fn extend_1d(u: &ScalarField, a: f64, b: f64, r: f64, c: f64) -> Result<Extension1d> {
    let e = extend_1d_unchecked(u, a, b, r, c)?;
    let adm = e.admissibility;
    if !adm.ok() {
        return Err(Error::Inadmissible {
            what: "u(0) = 0 and (a u'' + b u')(0) = 0".into(),
            residual: adm.value.max(adm.condition),
            tolerance: adm.tolerance,
        });
    }
    Ok(e)
}

/// Same construction without the admissibility gate (for negative controls).
pub fn extend_1d_unchecked(u: &ScalarField, a: f64, b: f64, r: f64, c: f64) -> Result<Extension1d> {
    if u.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: u.dim(),
        });
    }
    if !(c > 0.0) {
        return Err(Error::invalid("C", "support end must be positive"));
    }
    let params = ReflectionParams::new(a, b, r)?;
    let (v0, d1, d2, tol) = jet_at_zero(u)?;
    let admissibility = Admissibility {
        value: v0.abs(),
        condition: (a * d2 + b * d1).abs(),
        tolerance: tol,
    };
    let eta = cutoff_1d(params.delta, c);
    let src = u.clone();
    let field = ScalarField::from_jet_fn(1, move |x| {
        let s = x[0];
        let (e0, e1, e2) = eta(s);
        if e0 == 0.0 && e1 == 0.0 && e2 == 0.0 {
            return Ok(Jet::constant(0.0, 1));
        }
        let inner = if s >= 0.0 {
            src.jet(&[s])?
        } else {
            // -u(F(s)): chain rule with the polynomial reflection
            let (f0, f1, f2) = reflect_jet(a, b, s);
            let j = src.jet(&[f0])?;
            let mut out = Jet::constant(-j.value, 1);
            out.gradient[0] = -j.gradient[0] * f1;
            out.hessian[0][0] = -(j.hessian[0][0] * f1 * f1 + j.gradient[0] * f2);
            out
        };
        let mut cut = Jet::constant(e0, 1);
        cut.gradient[0] = e1;
        cut.hessian[0][0] = e2;
        Ok(cut.mul(&inner))
    });
    Ok(Extension1d {
        field,
        params,
        support_end: c,
        admissibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::seam::{verify_extension_smoothness, Seam};

    fn bump_times(p: &str) -> ScalarField {
        // p(s) times a cutoff that is 1 near 0 and vanishes beyond s = 0.9
        let q = ScalarField::parse(p, 1).unwrap();
        let eta = ScalarField::from_jet_fn(1, |x| {
            let (v, d1, d2) = smooth_interval(x[0], -1.0, 0.8, 0.1);
            let mut j = Jet::constant(v, 1);
            j.gradient[0] = d1;
            j.hessian[0][0] = d2;
            Ok(j)
        });
        q.mul(&eta)
    }

    #[test]
    fn odd_reflection() {
        let u = bump_times("x1");
        let e = extend_1d(&u, 1.0, 0.0, 1.0, 1.0).unwrap();
        for s in [0.01, 0.1, 0.3] {
            assert!((e.field.value(&[-s]) + s).abs() < 1e-15);
        }
    }

    #[test]
    fn robin_type_case_matches_second_derivative() {
        let u = bump_times("x1 - x1^2");
        let e = extend_1d(&u, 1.0, 2.0, 1.0, 1.0).unwrap();
        let rep = verify_extension_smoothness(&e.field, &Seam::new(0, vec![vec![0.0]]), 0.5, 1e-4)
            .unwrap();
        assert!(rep.second_mismatch <= 1e-3, "{rep:?}");
        let left = e.field.jet(&[-1e-9]).unwrap().hessian[0][0];
        assert!((left + 2.0).abs() < 1e-6);
    }

    #[test]
    fn sup_norm_is_preserved() {
        let u = bump_times("cos(3*x1)*(x1 - x1^2)");
        let j = u.jet(&[0.0]).unwrap();
        let (a, b) = (1.0, -j.hessian[0][0] / j.gradient[0]);
        let e = extend_1d(&u, a, b, 1.0, 1.0).unwrap();
        let pos = (0..=2000).map(|i| u.value(&[i as f64 / 2000.0]).abs()).fold(0.0, f64::max);
        let all = (0..=4000)
            .map(|i| e.field.value(&[-1.0 + i as f64 / 2000.0]).abs())
            .fold(0.0, f64::max);
        assert!(all <= pos + 1e-12);
    }

    #[test]
    fn inadmissible_input_is_rejected() {
        let u = bump_times("x1 + x1^2");
        let err = extend_1d(&u, 1.0, 0.0, 1.0, 1.0);
        assert!(matches!(err, Err(Error::Inadmissible { .. })));
        let e = extend_1d_unchecked(&u, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!((e.predicted_jump() - 4.0).abs() < 1e-12);
    }
}
