use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fields::domain::dist;
use crate::fields::{Jet, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MapRegularity {
    C2Alpha,
    C4Alpha,
}

#[derive(Clone)]
enum Inverse {
    /// Closed-form inverse components.
    Symbolic(Vec<Expr>),
    /// Newton iteration started at the image point.
    Newton,
    /// `(outer o inner)^-1 = inner^-1 o outer^-1`, then polished on the whole map.
    Composite(Arc<Diffeomorphism>, Arc<Diffeomorphism>),
}

/// A smooth map `R^n -> R^n` trusted on the ball `B(center, valid_radius)`.
#[derive(Clone)]
pub struct Diffeomorphism {
    components: Vec<ScalarField>,
    inverse: Inverse,
    pub regularity: MapRegularity,
    pub center: Vec<f64>,
    pub valid_radius: f64,
}

impl fmt::Debug for Diffeomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffeomorphism")
            .field("components", &self.components)
            .field("center", &self.center)
            .field("valid_radius", &self.valid_radius)
            .finish()
    }
}

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 50;
const DET_FLOOR: f64 = 1e-8;

impl Diffeomorphism {
    pub fn from_fields(components: Vec<ScalarField>) -> Result<Diffeomorphism> {
        let n = components.len();
        if n == 0 || components.iter().any(|c| c.dim() != n) {
            return Err(Error::invalid("map", "components must be n fields on R^n"));
        }
        Ok(Diffeomorphism {
            components,
            inverse: Inverse::Newton,
            regularity: MapRegularity::C4Alpha,
            center: vec![0.0; n],
            valid_radius: f64::INFINITY,
        })
    }

    pub fn from_exprs(forward: Vec<Expr>) -> Result<Diffeomorphism> {
        let n = forward.len();
        let comps = forward
            .into_iter()
            .map(|e| ScalarField::from_expr(e, n))
            .collect::<Result<Vec<_>>>()?;
        Diffeomorphism::from_fields(comps)
    }

    pub fn parse(forward: &[&str]) -> Result<Diffeomorphism> {
        Diffeomorphism::from_exprs(forward.iter().map(|s| Expr::parse(s)).collect::<Result<_>>()?)
    }

    pub fn identity(n: usize) -> Diffeomorphism {
        let mut d = Diffeomorphism::from_exprs((0..n).map(Expr::Var).collect()).expect("valid");
        d.inverse = Inverse::Symbolic((0..n).map(Expr::Var).collect());
        d
    }

    /// `x -> m x + v`.
    pub fn affine(m: &[Vec<f64>], v: &[f64]) -> Result<Diffeomorphism> {
        let n = v.len();
        let mat = DMatrix::from_fn(n, n, |i, j| m[i][j]);
        let inv = mat
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularJacobian {
                point: vec![0.0; n],
                det: mat.determinant(),
            })?;
        let lin = |a: &DMatrix<f64>, shift: &dyn Fn(usize) -> Expr| -> Vec<Expr> {
            (0..n)
                .map(|i| {
                    (0..n).fold(shift(i), |acc, j| {
                        crate::expr::add(acc, crate::expr::mul(Expr::Num(a[(i, j)]), Expr::Var(j)))
                    })
                })
                .collect()
        };
        let forward = lin(&mat, &|i| Expr::Num(v[i]));
        // inverse: m^-1 (y - v)
        let iv: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| inv[(i, j)] * v[j]).sum::<f64>()).collect();
        let backward = lin(&inv, &|i| Expr::Num(iv[i]));
        Diffeomorphism::from_exprs(forward)?.with_inverse(backward)
    }

    pub fn with_inverse(mut self, inverse: Vec<Expr>) -> Result<Diffeomorphism> {
        let n = self.dim();
        if inverse.len() != n || inverse.iter().any(|e| e.max_var().is_some_and(|m| m >= n)) {
            return Err(Error::invalid("inverse", "needs n components in x1..xn"));
        }
        self.inverse = Inverse::Symbolic(inverse);
        Ok(self)
    }

    pub fn with_valid_ball(mut self, center: Vec<f64>, radius: f64) -> Diffeomorphism {
        self.center = center;
        self.valid_radius = radius;
        self
    }

    pub fn with_regularity(mut self, r: MapRegularity) -> Diffeomorphism {
        self.regularity = r;
        self
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Forward components as expressions, when every component is symbolic.
    pub fn forward_exprs(&self) -> Option<Vec<Expr>> {
        self.components.iter().map(|c| c.as_expr().cloned()).collect()
    }

    pub fn inverse_exprs(&self) -> Option<&[Expr]> {
        match &self.inverse {
            Inverse::Symbolic(v) => Some(v),
            _ => None,
        }
    }

    pub fn in_valid_ball(&self, x: &[f64]) -> bool {
        dist(x, &self.center) <= self.valid_radius * (1.0 + 1e-9)
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.try_value(x)).collect()
    }

    /// `DF[k][i] = d_i F_k`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.components.iter().map(|c| c.gradient(x)).collect()
    }

    pub fn det(&self, x: &[f64]) -> Result<f64> {
        let j = self.jacobian(x)?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, n, |i, k| j[i][k]).determinant())
    }

    /// `D2F[k][i][j] = d_i d_j F_k`.
    pub fn second_derivs(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.components.iter().map(|c| c.hessian(x)).collect()
    }

    pub fn jets(&self, x: &[f64]) -> Result<Vec<Jet>> {
        self.components.iter().map(|c| c.jet(x)).collect()
    }

    /// `F^-1(y)`: closed form when known, Newton otherwise.
    pub fn inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        match &self.inverse {
            Inverse::Symbolic(v) => Ok(v.iter().map(|e| e.eval(y)).collect()),
            Inverse::Newton => invert_at(self, y, y),
            Inverse::Composite(outer, inner) => {
                let guess = inner.inverse(&outer.inverse(y)?)?;
                invert_at(self, y, &guess)
            }
        }
    }

    /// `self o inner`.
    pub fn compose(&self, inner: &Diffeomorphism) -> Result<Diffeomorphism> {
        if self.dim() != inner.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: inner.dim(),
            });
        }
        let components = self.components.iter().map(|c| pullback(inner, c)).collect();
        let inverse = match (self.inverse_exprs(), inner.inverse_exprs()) {
            (Some(outer_inv), Some(inner_inv)) => {
                Inverse::Symbolic(inner_inv.iter().map(|e| e.substitute(outer_inv)).collect())
            }
            _ => Inverse::Composite(Arc::new(self.clone()), Arc::new(inner.clone())),
        };
        let regularity = if self.regularity == MapRegularity::C4Alpha
            && inner.regularity == MapRegularity::C4Alpha
        {
            MapRegularity::C4Alpha
        } else {
            MapRegularity::C2Alpha
        };
        Ok(Diffeomorphism {
            components,
            inverse,
            regularity,
            center: inner.center.clone(),
            valid_radius: inner.valid_radius,
        })
    }

    /// Largest `|F^-1(F(x)) - x|` over the samples.
    pub fn round_trip_error(&self, samples: &[Vec<f64>]) -> Result<f64> {
        let mut worst = 0.0f64;
        for x in samples {
            let back = self.inverse(&self.apply(x)?)?;
            worst = worst.max(dist(&back, x));
        }
        Ok(worst)
    }
}

/// Newton iteration `x <- x - DF(x)^-1 (F(x) - y)` from `x_guess`, stopped at
/// `|F(x) - y| <= 1e-10` and followed by two polishing steps.
pub fn invert_at(f: &Diffeomorphism, y: &[f64], x_guess: &[f64]) -> Result<Vec<f64>> {
    let n = f.dim();
    if y.len() != n || x_guess.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: y.len().min(x_guess.len()),
        });
    }
    let mut x = x_guess.to_vec();
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        Ok(f.apply(x)?.iter().zip(y).map(|(a, b)| a - b).collect())
    };
    let step = |x: &mut Vec<f64>, r: &[f64]| -> Result<()> {
        let j = f.jacobian(x)?;
        let m = DMatrix::from_fn(n, n, |i, k| j[i][k]);
        let det = m.determinant();
        if !(det.abs() >= DET_FLOOR) {
            return Err(Error::SingularJacobian {
                point: x.clone(),
                det,
            });
        }
        let dx = m
            .lu()
            .solve(&DVector::from_column_slice(r))
            .ok_or_else(|| Error::SingularJacobian {
                point: x.clone(),
                det,
            })?;
        for i in 0..n {
            x[i] -= dx[i];
        }
        Ok(())
    };
    let norm = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = residual(&x)?;
    let mut iterations = 0;
    while norm(&r) > NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER || !r.iter().all(|v| v.is_finite()) {
            return Err(Error::NewtonNonConvergence {
                iterations,
                residual: norm(&r),
            });
        }
        step(&mut x, &r)?;
        r = residual(&x)?;
        iterations += 1;
    }
    for _ in 0..2 {
        let mut cand = x.clone();
        if step(&mut cand, &r).is_err() {
            break;
        }
        let rc = residual(&cand)?;
        if norm(&rc) >= norm(&r) {
            break;
        }
        x = cand;
        r = rc;
    }
    Ok(x)
}

/// `g o F`, symbolic when both are expressions and otherwise with exact chain-rule jets.
pub fn pullback(f: &Diffeomorphism, g: &ScalarField) -> ScalarField {
    let n = f.dim();
    assert_eq!(g.dim(), n, "pullback: dimension mismatch");
    if let (Some(ge), Some(fe)) = (g.as_expr(), f.forward_exprs()) {
        return ScalarField::from_expr(ge.substitute(&fe), n).expect("same variable set");
    }
    let (f, g) = (f.clone(), g.clone());
    let (fv, gv) = (f.clone(), g.clone());
    ScalarField::from_fns(
        n,
        move |x| gv.try_value(&fv.apply(x)?),
        move |x| {
            let fj = f.jets(x)?;
            let y: Vec<f64> = fj.iter().map(|j| j.value).collect();
            let gj = g.jet(&y)?;
            Ok(chain_rule(&gj, &fj))
        },
    )
}

/// Jet of `g o F` from the jet of `g` at `F(x)` and the component jets of `F` at `x`.
pub(crate) fn chain_rule(g: &Jet, f: &[Jet]) -> Jet {
    let n = f[0].dim();
    let m = f.len();
    let mut out = Jet::constant(g.value, n);
    for i in 0..n {
        out.gradient[i] = (0..m).map(|k| g.gradient[k] * f[k].gradient[i]).sum();
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..m {
                s += g.gradient[k] * f[k].hessian[i][j];
                for l in 0..m {
                    s += g.hessian[k][l] * f[k].gradient[i] * f[l].gradient[j];
                }
            }
            out.hessian[i][j] = s;
        }
    }
    out
}

/// Jets of the inverse components at `y`, from implicit differentiation:
/// `Dx = DF^-1` and `d_j d_l x_i = -sum_k DF^-1_ik D2F_k(Dx e_j, Dx e_l)`.
pub fn inverse_jets(f: &Diffeomorphism, y: &[f64]) -> Result<Vec<Jet>> {
    let n = f.dim();
    let x = f.inverse(y)?;
    let j = f.jacobian(&x)?;
    let m = DMatrix::from_fn(n, n, |a, b| j[a][b]);
    let k = m.clone().try_inverse().ok_or_else(|| Error::SingularJacobian {
        point: x.clone(),
        det: m.determinant(),
    })?;
    let d2 = f.second_derivs(&x)?;
    // t[c][j][l] = D2F_c(K e_j, K e_l)
    let mut t = vec![vec![vec![0.0; n]; n]; n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for p in 0..n {
                    for q in 0..n {
                        s += d2[c][p][q] * k[(p, a)] * k[(q, b)];
                    }
                }
                t[c][a][b] = s;
            }
        }
    }
    Ok((0..n)
        .map(|i| {
            let mut jet = Jet::constant(x[i], n);
            for a in 0..n {
                jet.gradient[a] = k[(i, a)];
                for b in 0..n {
                    jet.hessian[a][b] = -(0..n).map(|c| k[(i, c)] * t[c][a][b]).sum::<f64>();
                }
            }
            jet
        })
        .collect())
}

/// `g o F^-1`, symbolic when possible and otherwise with exact implicit jets.
pub fn pushforward_field(f: &Diffeomorphism, g: &ScalarField) -> ScalarField {
    let n = f.dim();
    assert_eq!(g.dim(), n, "pushforward: dimension mismatch");
    if let (Some(ge), Some(inv)) = (g.as_expr(), f.inverse_exprs()) {
        return ScalarField::from_expr(ge.substitute(inv), n).expect("same variable set");
    }
    let (f, g) = (f.clone(), g.clone());
    let (fv, gv) = (f.clone(), g.clone());
    ScalarField::from_fns(
        n,
        move |y| {
            let x = fv.inverse(y)?;
            if !fv.in_valid_ball(&x) {
                return Err(Error::OutOfDomain { point: y.to_vec() });
            }
            gv.try_value(&x)
        },
        move |y| {
            let xj = inverse_jets(&f, y)?;
            let x: Vec<f64> = xj.iter().map(|j| j.value).collect();
            if !f.in_valid_ball(&x) {
                return Err(Error::OutOfDomain { point: y.to_vec() });
            }
            Ok(chain_rule(&g.jet(&x)?, &xj))
        },
    )
}

/// Largest radius `R' <= r` (bisection, 40 steps) on whose sampled ball
/// `|det DF| >= det_floor` and no two sample images coincide within 1e-12.
pub fn jacobian_radius(f: &Diffeomorphism, r: f64, det_floor: f64) -> Result<f64> {
    let c = f.center.clone();
    let d0 = f.det(&c)?;
    if !(d0.abs() >= det_floor) {
        return Err(Error::SingularJacobian { point: c, det: d0 });
    }
    let ok = |radius: f64| -> Result<bool> {
        let pts = ball_grid(&c, radius, 10);
        let mut images = Vec::with_capacity(pts.len());
        for p in &pts {
            if !(f.det(p)?.abs() >= det_floor) {
                return Ok(false);
            }
            images.push(f.apply(p)?);
        }
        for i in 0..images.len() {
            for j in 0..i {
                if dist(&images[i], &images[j]) <= 1e-12 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    };
    if ok(r)? {
        return Ok(r);
    }
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Tensor grid of `2 per_axis + 1` points per axis, clipped to the closed ball.
pub(crate) fn ball_grid(c: &[f64], r: f64, per_axis: usize) -> Vec<Vec<f64>> {
    let n = c.len();
    let w = 2 * per_axis + 1;
    let mut out = Vec::new();
    for mut idx in 0..w.pow(n as u32) {
        let mut p = vec![0.0; n];
        for k in (0..n).rev() {
            let s = (idx % w) as f64 - per_axis as f64;
            p[k] = c[k] + r * s / per_axis as f64;
            idx /= w;
        }
        if dist(&p, c) <= r * (1.0 + 1e-12) {
            out.push(p);
        }
    }
    out
}
