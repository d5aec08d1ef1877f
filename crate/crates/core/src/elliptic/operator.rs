use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{fd_derivatives, Jet, OneSided, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regularity {
    /// Hölder continuous coefficients.
    C0Alpha,
    /// Twice differentiable with Hölder second derivatives.
    C2Alpha,
}

/// Coefficients at one point, with `a` symmetrized.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: f64,
}

impl Coefficients {
    /// `sum a_ij d_ij + sum b_i d_i + c u` for a given jet of `u`.
    pub fn apply(&self, u: &Jet) -> f64 {
        let n = self.b.len();
        let mut s = self.c * u.value;
        for i in 0..n {
            s += self.b[i] * u.gradient[i];
            for j in 0..n {
                s += self.a[i][j] * u.hessian[i][j];
            }
        }
        s
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> f64 {
        let n = xi.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.a[i][j] * xi[i] * xi[j];
            }
        }
        s
    }
}

/// `Lu = sum a_ij d_i d_j u + sum b_i d_i u + c u` with ellipticity constant
/// `lambda` and coefficient bound `big_lambda`.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub a: Vec<Vec<ScalarField>>,
    pub b: Vec<ScalarField>,
    pub c: ScalarField,
    pub lambda: f64,
    pub big_lambda: f64,
    pub regularity: Regularity,
}

impl EllipticOperator {
    pub fn new(
        a: Vec<Vec<ScalarField>>,
        b: Vec<ScalarField>,
        c: ScalarField,
        lambda: f64,
        big_lambda: f64,
    ) -> Result<EllipticOperator> {
        let n = b.len();
        if n == 0 || a.len() != n || a.iter().any(|row| row.len() != n) {
            return Err(Error::invalid("a", format!("expected a {n}x{n} coefficient matrix")));
        }
        let dims_ok = a.iter().flatten().chain(&b).chain([&c]).all(|f| f.dim() == n);
        if !dims_ok {
            return Err(Error::invalid("a", "coefficient fields must all live in R^n"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("{lambda} must be positive")));
        }
        if !(big_lambda.is_finite() && big_lambda >= 0.0) {
            return Err(Error::invalid("Lambda", format!("{big_lambda} must be finite")));
        }
        let regularity = if a.iter().flatten().chain(&b).chain([&c]).all(|f| f.has_exact_jet()) {
            Regularity::C2Alpha
        } else {
            Regularity::C0Alpha
        };
        Ok(EllipticOperator {
            a,
            b,
            c,
            lambda,
            big_lambda,
            regularity,
        })
    }

    /// Coefficients from expressions in `x1..xn`.
    pub fn parse<S: AsRef<str>>(
        a: &[Vec<S>],
        b: &[S],
        c: &str,
        lambda: f64,
        big_lambda: f64,
    ) -> Result<EllipticOperator> {
        let n = b.len();
        let field = |s: &str| ScalarField::parse(s, n);
        let a = a
            .iter()
            .map(|row| row.iter().map(|s| field(s.as_ref())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let b = b.iter().map(|s| field(s.as_ref())).collect::<Result<Vec<_>>>()?;
        EllipticOperator::new(a, b, field(c)?, lambda, big_lambda)
    }

    pub fn laplacian(n: usize) -> EllipticOperator {
        let a = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| ScalarField::constant(if i == j { 1.0 } else { 0.0 }, n))
                    .collect()
            })
            .collect();
        let b = (0..n).map(|_| ScalarField::constant(0.0, n)).collect();
        EllipticOperator::new(a, b, ScalarField::constant(0.0, n), 1.0, 1.0)
            .expect("laplacian is valid")
    }

    /// Constant coefficients. `lambda` is the smallest eigenvalue of the
    /// symmetrized `a`, `big_lambda` the largest coefficient modulus.
    pub fn constant(a: &[Vec<f64>], b: &[f64], c: f64) -> Result<EllipticOperator> {
        let n = b.len();
        let sym: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.5 * (a[i][j] + a[j][i])).collect())
            .collect();
        let lambda = min_eigenvalue(&sym);
        if !(lambda > 0.0) {
            return Err(Error::NotElliptic {
                point: vec![],
                value: lambda,
            });
        }
        let big = a
            .iter()
            .flatten()
            .chain(b)
            .chain([&c])
            .fold(0.0f64, |m, v| m.max(v.abs()));
        EllipticOperator::new(
            a.iter()
                .map(|row| row.iter().map(|&v| ScalarField::constant(v, n)).collect())
                .collect(),
            b.iter().map(|&v| ScalarField::constant(v, n)).collect(),
            ScalarField::constant(c, n),
            lambda,
            big,
        )
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn with_bounds(mut self, lambda: f64, big_lambda: f64) -> Result<EllipticOperator> {
        if !(lambda > 0.0) || !(big_lambda >= 0.0) {
            return Err(Error::invalid("lambda", "needs lambda > 0 and Lambda >= 0"));
        }
        self.lambda = lambda;
        self.big_lambda = big_lambda;
        Ok(self)
    }

    /// `L - mu`.
    pub fn shifted(&self, mu: f64) -> EllipticOperator {
        let mut out = self.clone();
        out.c = self.c.add_constant(-mu);
        out.big_lambda = self.big_lambda + mu.abs();
        out
    }

    pub fn coefficients(&self, x: &[f64]) -> Result<Coefficients> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = if i == j {
                    self.a[i][i].try_value(x)?
                } else {
                    0.5 * (self.a[i][j].try_value(x)? + self.a[j][i].try_value(x)?)
                };
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        let b = self
            .b
            .iter()
            .map(|f| f.try_value(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(Coefficients {
            a,
            b,
            c: self.c.try_value(x)?,
        })
    }

    /// Symmetrized `a(x)`.
    pub fn a_matrix(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.coefficients(x)?.a)
    }

    /// `Lu(x)` with central differences of step `h`.
    pub fn apply(&self, u: &ScalarField, x: &[f64], h: f64) -> Result<f64> {
        self.apply_fd(u, x, h, None)
    }

    /// `Lu(x)` with one-sided differences along `axis`.
    pub fn apply_one_sided(
        &self,
        u: &ScalarField,
        x: &[f64],
        h: f64,
        axis: usize,
        forward: bool,
    ) -> Result<f64> {
        self.apply_fd(u, x, h, Some(OneSided { axis, forward }))
    }

    fn apply_fd(&self, u: &ScalarField, x: &[f64], h: f64, os: Option<OneSided>) -> Result<f64> {
        let d = fd_derivatives(u, x, h, 2, os, None)?;
        let jet = Jet {
            value: d.value,
            gradient: d.gradient,
            hessian: d.hessian.expect("order 2"),
        };
        Ok(self.coefficients(x)?.apply(&jet))
    }

    /// `Lu(x)` from the jet of `u` (exact for expression fields).
    pub fn apply_exact(&self, u: &ScalarField, x: &[f64]) -> Result<f64> {
        Ok(self.coefficients(x)?.apply(&u.jet(x)?))
    }
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| a[i][j]);
    m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}
