use super::domain::DomainSpec;
use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// One-sided stencil along `axis`, pointing into `+axis` when `forward`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneSided {
    pub axis: usize,
    pub forward: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdDerivatives {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Present when `order == 2`.
    pub hessian: Option<Vec<Vec<f64>>>,
}

/// Finite-difference derivatives of `u` at `x`.
///
/// Central stencils everywhere, except along `one_sided.axis` where the
/// second-order one-sided stencils `(-3, 4, -1)/(2h)` and `(2, -5, 4, -1)/h^2`
/// are used. Mixed derivatives against that axis are central in the other
/// coordinate and one-sided in the chosen one. With a domain given, every
/// stencil node must lie in its closure.
pub fn fd_derivatives(
    u: &ScalarField,
    x: &[f64],
    h: f64,
    order: u8,
    one_sided: Option<OneSided>,
    domain: Option<&DomainSpec>,
) -> Result<FdDerivatives> {
    if !(order == 1 || order == 2) {
        return Err(Error::invalid("order", format!("{order} is not 1 or 2")));
    }
    if !(h > 0.0) {
        return Err(Error::invalid("h", "must be positive"));
    }
    let n = u.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if let Some(os) = one_sided {
        if os.axis >= n {
            return Err(Error::invalid("one_sided_axis", format!("axis {} >= {n}", os.axis)));
        }
    }
    let eval = |offsets: &[(usize, f64)]| -> Result<f64> {
        let mut p = x.to_vec();
        for &(k, s) in offsets {
            p[k] += s * h;
        }
        if let Some(d) = domain {
            if !d.contains_closed(&p) {
                return Err(Error::StencilOutOfDomain { point: p });
            }
        }
        u.try_value(&p).map_err(|e| match e {
            Error::OutOfDomain { point } => Error::StencilOutOfDomain { point },
            other => other,
        })
    };
    let sided = |k: usize| one_sided.filter(|o| o.axis == k);
    let value = eval(&[])?;

    let mut gradient = vec![0.0; n];
    for (k, g) in gradient.iter_mut().enumerate() {
        *g = match sided(k) {
            Some(o) => {
                let s = if o.forward { 1.0 } else { -1.0 };
                s * (-3.0 * value + 4.0 * eval(&[(k, s)])? - eval(&[(k, 2.0 * s)])?) / (2.0 * h)
            }
            None => (eval(&[(k, 1.0)])? - eval(&[(k, -1.0)])?) / (2.0 * h),
        };
    }
    if order == 1 {
        return Ok(FdDerivatives {
            value,
            gradient,
            hessian: None,
        });
    }

    let mut hess = vec![vec![0.0; n]; n];
    for k in 0..n {
        hess[k][k] = match sided(k) {
            Some(o) => {
                let s = if o.forward { 1.0 } else { -1.0 };
                (2.0 * value - 5.0 * eval(&[(k, s)])? + 4.0 * eval(&[(k, 2.0 * s)])?
                    - eval(&[(k, 3.0 * s)])?)
                    / (h * h)
            }
            None => (eval(&[(k, 1.0)])? - 2.0 * value + eval(&[(k, -1.0)])?) / (h * h),
        };
        for j in 0..k {
            let (a, b) = match (sided(k), sided(j)) {
                (Some(o), None) => (Some((k, o)), j),
                (None, Some(o)) => (Some((j, o)), k),
                _ => (None, j),
            };
            let v = match a {
                Some((s_axis, o)) => {
                    // central in `b`, one-sided in `s_axis`
                    let s = if o.forward { 1.0 } else { -1.0 };
                    let d1 = |c: f64| -> Result<f64> {
                        Ok(s * (-3.0 * eval(&[(b, c)])? + 4.0 * eval(&[(b, c), (s_axis, s)])?
                            - eval(&[(b, c), (s_axis, 2.0 * s)])?)
                            / (2.0 * h))
                    };
                    (d1(1.0)? - d1(-1.0)?) / (2.0 * h)
                }
                None => {
                    (eval(&[(k, 1.0), (j, 1.0)])? - eval(&[(k, 1.0), (j, -1.0)])?
                        - eval(&[(k, -1.0), (j, 1.0)])?
                        + eval(&[(k, -1.0), (j, -1.0)])?)
                        / (4.0 * h * h)
                }
            };
            hess[k][j] = v;
            hess[j][k] = v;
        }
    }
    Ok(FdDerivatives {
        value,
        gradient,
        hessian: Some(hess),
    })
}
