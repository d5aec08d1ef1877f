use serde::Serialize;

use crate::error::{Error, Result};

pub const SAFETY: f64 = 0.9;

/// `F_{a,b}(s) = -(s - (b/a) s^2)`, the reflection with `F(0) = 0`,
/// `F'(0) = -1` and `F''(0) = 2b/a`.
pub fn reflection_function(a: f64, b: f64, s: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("a", format!("{a} must be positive")));
    }
    Ok(reflect(a, b, s))
}

#[inline]
pub(crate) fn reflect(a: f64, b: f64, s: f64) -> f64 {
    -(s - (b / a) * s * s)
}

/// `(F, F', F'')` at `s`.
#[inline]
pub(crate) fn reflect_jet(a: f64, b: f64, s: f64) -> (f64, f64, f64) {
    let q = b / a;
    (reflect(a, b, s), -1.0 + 2.0 * q * s, 2.0 * q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReflectionParams {
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub safety: f64,
}

impl ReflectionParams {
    pub fn new(a: f64, b: f64, r: f64) -> Result<ReflectionParams> {
        let delta = reflection_delta(a, b, r, SAFETY)?;
        Ok(ReflectionParams {
            a,
            b,
            delta,
            r,
            safety: SAFETY,
        })
    }

    /// Dense check that `F((-delta, 0]) ⊂ [0, R)`.
    pub fn verify(&self) -> bool {
        maps_into(self.a, self.b, self.delta, self.r)
    }
}

fn maps_into(a: f64, b: f64, delta: f64, r: f64) -> bool {
    (0..=1000).all(|i| {
        let s = -delta * i as f64 / 1000.0;
        let v = reflect(a, b, s);
        (0.0..r).contains(&v)
    })
}

/// Admissible reflection depth: `safety` times `R` (b = 0), `min(a/|b|, R)`
/// (b < 0), or `|s_R|` with `s_R` the negative root of `(b/a) s^2 - s = R` (b > 0).
pub fn reflection_delta(a: f64, b: f64, r: f64, safety: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::invalid("a", format!("{a} must be positive")));
    }
    if !(r > 0.0) {
        return Err(Error::invalid("R", format!("{r} must be positive")));
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::invalid("safety", "must lie in (0, 1)"));
    }
    let bound = if b == 0.0 {
        r
    } else if b < 0.0 {
        (a / -b).min(r)
    } else {
        let s_r = a * (1.0 - (1.0 + 4.0 * b * r / a).sqrt()) / (2.0 * b);
        s_r.abs()
    };
    Ok(safety * bound)
}

/// Common depth for `a >= lambda`, `|b| <= Lambda`: the minimum over the
/// corners `a = lambda`, `b = ±Lambda`, re-verified on a 10 x 10 grid of
/// `[lambda, max(lambda, Lambda)] x [-Lambda, Lambda]`.
pub fn common_delta(lambda: f64, big_lambda: f64, r: f64, safety: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(big_lambda >= 0.0 && big_lambda.is_finite()) {
        return Err(Error::invalid("lambda", "needs 0 < lambda and finite Lambda >= 0"));
    }
    let delta = reflection_delta(lambda, big_lambda, r, safety)?
        .min(reflection_delta(lambda, -big_lambda, r, safety)?);
    let a_hi = lambda.max(big_lambda);
    for i in 0..10 {
        for j in 0..10 {
            let a = lambda + (a_hi - lambda) * i as f64 / 9.0;
            let b = -big_lambda + 2.0 * big_lambda * j as f64 / 9.0;
            if !maps_into(a, b, delta, r) {
                return Err(Error::Inadmissible {
                    what: format!("common depth fails for a = {a}, b = {b}"),
                    residual: delta,
                    tolerance: 0.0,
                });
            }
        }
    }
    Ok(delta)
}
