use std::fmt;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::expr::Expr;

/// Value, gradient and Hessian of a field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

impl Jet {
    pub fn constant(value: f64, n: usize) -> Jet {
        Jet {
            value,
            gradient: vec![0.0; n],
            hessian: vec![vec![0.0; n]; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn scale(mut self, s: f64) -> Jet {
        self.value *= s;
        self.gradient.iter_mut().for_each(|g| *g *= s);
        self.hessian.iter_mut().flatten().for_each(|h| *h *= s);
        self
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let n = self.dim();
        Jet {
            value: self.value + other.value,
            gradient: (0..n).map(|i| self.gradient[i] + other.gradient[i]).collect(),
            hessian: (0..n)
                .map(|i| (0..n).map(|j| self.hessian[i][j] + other.hessian[i][j]).collect())
                .collect(),
        }
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        let n = self.dim();
        let (u, v) = (self, other);
        Jet {
            value: u.value * v.value,
            gradient: (0..n)
                .map(|i| u.gradient[i] * v.value + u.value * v.gradient[i])
                .collect(),
            hessian: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            u.hessian[i][j] * v.value
                                + u.gradient[i] * v.gradient[j]
                                + u.gradient[j] * v.gradient[i]
                                + u.value * v.hessian[i][j]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Compose with a scalar function `phi` given its first two derivatives.
    pub fn map(&self, phi: f64, dphi: f64, d2phi: f64) -> Jet {
        let n = self.dim();
        Jet {
            value: phi,
            gradient: self.gradient.iter().map(|g| dphi * g).collect(),
            hessian: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            d2phi * self.gradient[i] * self.gradient[j]
                                + dphi * self.hessian[i][j]
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn recip(&self) -> Jet {
        let v = self.value;
        self.map(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

type PointFn = dyn Fn(&[f64]) -> Result<f64> + Send + Sync;
type JetFn = dyn Fn(&[f64]) -> Result<Jet> + Send + Sync;

/// Symbolic field with lazily derived gradient and Hessian expressions.
pub(crate) struct ExprRepr {
    pub(crate) expr: Expr,
    grad: OnceLock<Vec<Expr>>,
    hess: OnceLock<Vec<Vec<Expr>>>,
}

impl ExprRepr {
    fn grad(&self, n: usize) -> &[Expr] {
        self.grad.get_or_init(|| (0..n).map(|i| self.expr.diff(i)).collect())
    }

    fn hess(&self, n: usize) -> &[Vec<Expr>] {
        self.hess.get_or_init(|| {
            let g = self.grad(n).to_vec();
            (0..n)
                .map(|i| (0..n).map(|j| g[i].diff(j)).collect())
                .collect()
        })
    }
}

#[derive(Clone)]
enum Repr {
    Expr(Arc<ExprRepr>),
    Closure(Arc<PointFn>),
    /// Jet closure with an optional cheaper value-only path.
    Jet(Arc<JetFn>, Option<Arc<PointFn>>),
}

/// A real-valued function on a subset of R^n.
///
/// Expression fields differentiate symbolically, jet fields carry their own
/// derivatives, plain closures fall back to central differences
/// (step `FD_STEP_1` for gradients, `FD_STEP_2` for Hessians).
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    repr: Repr,
    holder_alpha: Option<f64>,
    support_hint: Option<(Vec<f64>, Vec<f64>)>,
}

pub const FD_STEP_1: f64 = 1e-5;
pub const FD_STEP_2: f64 = 1e-4;

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Expr(e) => write!(f, "ScalarField[{}]({})", self.dim, e.expr),
            Repr::Closure(_) => write!(f, "ScalarField[{}](<closure>)", self.dim),
            Repr::Jet(..) => write!(f, "ScalarField[{}](<jet>)", self.dim),
        }
    }
}

impl ScalarField {
    pub fn from_expr(expr: Expr, dim: usize) -> Result<ScalarField> {
        if let Some(m) = expr.max_var() {
            if m >= dim {
                return Err(Error::invalid(
                    "expression",
                    format!("references x{} but the dimension is {dim}", m + 1),
                ));
            }
        }
        Ok(ScalarField {
            dim,
            repr: Repr::Expr(Arc::new(ExprRepr {
                expr,
                grad: OnceLock::new(),
                hess: OnceLock::new(),
            })),
            holder_alpha: None,
            support_hint: None,
        })
    }

    pub fn parse(src: &str, dim: usize) -> Result<ScalarField> {
        ScalarField::from_expr(Expr::parse(src)?, dim)
    }

    pub fn constant(value: f64, dim: usize) -> ScalarField {
        ScalarField::from_expr(Expr::Num(value), dim).expect("constants have no variables")
    }

    pub fn from_fn<F>(dim: usize, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            repr: Repr::Closure(Arc::new(f)),
            holder_alpha: None,
            support_hint: None,
        }
    }

    pub fn from_jet_fn<F>(dim: usize, f: F) -> ScalarField
    where
        F: Fn(&[f64]) -> Result<Jet> + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            repr: Repr::Jet(Arc::new(f), None),
            holder_alpha: None,
            support_hint: None,
        }
    }

    /// Jet closure together with a value-only closure for plain evaluation.
    pub fn from_fns<V, F>(dim: usize, value: V, jet: F) -> ScalarField
    where
        V: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
        F: Fn(&[f64]) -> Result<Jet> + Send + Sync + 'static,
    {
        ScalarField {
            dim,
            repr: Repr::Jet(Arc::new(jet), Some(Arc::new(value))),
            holder_alpha: None,
            support_hint: None,
        }
    }

    pub fn with_holder_alpha(mut self, alpha: f64) -> Result<ScalarField> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1]")));
        }
        self.holder_alpha = Some(alpha);
        Ok(self)
    }

    pub fn with_support_hint(mut self, lo: Vec<f64>, hi: Vec<f64>) -> ScalarField {
        self.support_hint = Some((lo, hi));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn holder_alpha(&self) -> Option<f64> {
        self.holder_alpha
    }

    pub fn support_hint(&self) -> Option<(&[f64], &[f64])> {
        self.support_hint.as_ref().map(|(a, b)| (a.as_slice(), b.as_slice()))
    }

    pub fn as_expr(&self) -> Option<&Expr> {
        match &self.repr {
            Repr::Expr(e) => Some(&e.expr),
            _ => None,
        }
    }

    /// True when derivatives are exact (symbolic or supplied jets).
    pub fn has_exact_jet(&self) -> bool {
        !matches!(self.repr, Repr::Closure(_))
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.as_expr().and_then(Expr::as_num)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let v = match &self.repr {
            Repr::Expr(e) => e.expr.eval(x),
            Repr::Closure(f) => f(x)?,
            Repr::Jet(_, Some(v)) => v(x)?,
            Repr::Jet(f, None) => f(x)?.value,
        };
        Ok(v)
    }

    /// Value at `x`, NaN where the field is undefined.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.try_value(x).unwrap_or(f64::NAN)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        match &self.repr {
            Repr::Expr(e) => Ok(e.grad(self.dim).iter().map(|g| g.eval(x)).collect()),
            Repr::Jet(f, _) => Ok(f(x)?.gradient),
            Repr::Closure(_) => {
                let h = FD_STEP_1;
                let mut p = x.to_vec();
                (0..self.dim)
                    .map(|i| {
                        p[i] = x[i] + h;
                        let up = self.try_value(&p)?;
                        p[i] = x[i] - h;
                        let um = self.try_value(&p)?;
                        p[i] = x[i];
                        Ok((up - um) / (2.0 * h))
                    })
                    .collect()
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.jet(x)?.hessian)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        self.check_dim(x)?;
        let n = self.dim;
        match &self.repr {
            Repr::Expr(e) => Ok(Jet {
                value: e.expr.eval(x),
                gradient: e.grad(n).iter().map(|g| g.eval(x)).collect(),
                hessian: e
                    .hess(n)
                    .iter()
                    .map(|row| row.iter().map(|h| h.eval(x)).collect())
                    .collect(),
            }),
            Repr::Jet(f, _) => f(x),
            Repr::Closure(_) => {
                let value = self.try_value(x)?;
                let gradient = self.gradient(x)?;
                let h = FD_STEP_2;
                let mut hessian = vec![vec![0.0; n]; n];
                let mut p = x.to_vec();
                let at = |p: &mut Vec<f64>, i: usize, di: f64, j: usize, dj: f64| {
                    p[i] += di;
                    p[j] += dj;
                    let v = self.try_value(p);
                    p[i] = x[i];
                    p[j] = x[j];
                    v
                };
                for i in 0..n {
                    let up = at(&mut p, i, h, i, 0.0)?;
                    let um = at(&mut p, i, -h, i, 0.0)?;
                    hessian[i][i] = (up - 2.0 * value + um) / (h * h);
                    for j in 0..i {
                        let pp = at(&mut p, i, h, j, h)?;
                        let pm = at(&mut p, i, h, j, -h)?;
                        let mp = at(&mut p, i, -h, j, h)?;
                        let mm = at(&mut p, i, -h, j, -h)?;
                        let v = (pp - pm - mp + mm) / (4.0 * h * h);
                        hessian[i][j] = v;
                        hessian[j][i] = v;
                    }
                }
                Ok(Jet {
                    value,
                    gradient,
                    hessian,
                })
            }
        }
    }

    /// Symbolic partial derivative when available, otherwise a closure.
    pub fn partial(&self, i: usize) -> ScalarField {
        if let Repr::Expr(e) = &self.repr {
            return ScalarField::from_expr(e.grad(self.dim)[i].clone(), self.dim)
                .expect("derivatives keep the variable set");
        }
        let me = self.clone();
        ScalarField::from_fn(self.dim, move |x| Ok(me.gradient(x)?[i]))
    }

    fn binary(
        &self,
        other: &ScalarField,
        sym: fn(Expr, Expr) -> Expr,
        jet: fn(&Jet, &Jet) -> Jet,
    ) -> ScalarField {
        assert_eq!(self.dim, other.dim, "field dimensions differ");
        if let (Some(a), Some(b)) = (self.as_expr(), other.as_expr()) {
            return ScalarField::from_expr(sym(a.clone(), b.clone()), self.dim)
                .expect("same variable set");
        }
        let (a, b) = (self.clone(), other.clone());
        let (va, vb) = (self.clone(), other.clone());
        ScalarField::from_fns(
            self.dim,
            move |x| {
                let (p, q) = (va.try_value(x)?, vb.try_value(x)?);
                Ok(jet(&Jet::constant(p, 1), &Jet::constant(q, 1)).value)
            },
            move |x| Ok(jet(&a.jet(x)?, &b.jet(x)?)),
        )
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, crate::expr::add, Jet::add)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, crate::expr::mul, Jet::mul)
    }

    pub fn div(&self, other: &ScalarField) -> ScalarField {
        self.binary(other, crate::expr::div, |a, b| a.mul(&b.recip()))
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        if let Some(e) = self.as_expr() {
            return ScalarField::from_expr(crate::expr::mul(Expr::Num(s), e.clone()), self.dim)
                .expect("same variable set");
        }
        let (a, v) = (self.clone(), self.clone());
        ScalarField::from_fns(self.dim, move |x| Ok(s * v.try_value(x)?), move |x| Ok(a.jet(x)?.scale(s)))
    }

    pub fn neg(&self) -> ScalarField {
        self.scale(-1.0)
    }

    pub fn add_constant(&self, c: f64) -> ScalarField {
        self.add(&ScalarField::constant(c, self.dim))
    }

    /// The trace `x' -> self(x', 0)` as a field on R^(n-1) embedded in R^n
    /// (the last coordinate is ignored).
    pub fn on_flat_boundary(&self) -> ScalarField {
        let n = self.dim;
        if let Some(e) = self.as_expr() {
            return ScalarField::from_expr(e.with_var(n - 1, Expr::Num(0.0)), n)
                .expect("substitution keeps the variable set");
        }
        let a = self.clone();
        ScalarField::from_jet_fn(n, move |x| {
            let mut p = x.to_vec();
            p[n - 1] = 0.0;
            let mut j = a.jet(&p)?;
            j.gradient[n - 1] = 0.0;
            for i in 0..n {
                j.hessian[i][n - 1] = 0.0;
                j.hessian[n - 1][i] = 0.0;
            }
            Ok(j)
        })
    }
}

impl From<Expr> for ScalarField {
    /// Dimension is the smallest one covering the referenced variables.
    fn from(e: Expr) -> Self {
        let dim = e.max_var().map_or(1, |m| m + 1);
        ScalarField::from_expr(e, dim).expect("dimension covers all variables")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expr_and_closure_jets_agree() {
        let e = ScalarField::parse("sin(x1)*x2^2 + exp(x1*x2)", 2).unwrap();
        let c = {
            let e = e.clone();
            ScalarField::from_fn(2, move |x| e.try_value(x))
        };
        let p = [0.4, -0.3];
        let je = e.jet(&p).unwrap();
        let jc = c.jet(&p).unwrap();
        assert!((je.value - jc.value).abs() < 1e-15);
        for i in 0..2 {
            assert!((je.gradient[i] - jc.gradient[i]).abs() < 1e-8);
            for j in 0..2 {
                assert!((je.hessian[i][j] - jc.hessian[i][j]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn product_rule_on_jets() {
        let a = ScalarField::parse("x1^2 + x2", 2).unwrap();
        let b = ScalarField::parse("cos(x2)", 2).unwrap();
        let bc = {
            let b = b.clone();
            ScalarField::from_jet_fn(2, move |x| b.jet(x))
        };
        let sym = a.mul(&b);
        let num = a.mul(&bc);
        assert!(num.as_expr().is_none());
        let p = [0.9, 0.2];
        let (s, n) = (sym.jet(&p).unwrap(), num.jet(&p).unwrap());
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.hessian[i][j] - n.hessian[i][j]).abs() < 1e-13);
            }
        }
        let q = sym.div(&bc).jet(&p).unwrap();
        let direct = a.jet(&p).unwrap();
        assert!((q.hessian[0][1] - direct.hessian[0][1]).abs() < 1e-12);
    }

    #[test]
    fn dimension_is_checked() {
        assert!(ScalarField::parse("x3", 2).is_err());
        let f = ScalarField::parse("x1", 2).unwrap();
        assert!(matches!(f.try_value(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(f.value(&[1.0]).is_nan());
    }
}
