use std::sync::Arc;

use super::diffeo::{ball_grid, pushforward_field, Diffeomorphism};
use crate::elliptic::operator::{min_eigenvalue, EllipticOperator};
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fields::ScalarField;

/// `L2` with `(L2 u)(F(x)) = L1(u o F)(x)`.
#[derive(Debug, Clone)]
pub struct TransformedOperator {
    /// Coefficients as fields of the image variable `y`.
    pub op: EllipticOperator,
    /// The same coefficients as fields of the source variable `x`.
    pub source_a: Vec<Vec<ScalarField>>,
    pub source_b: Vec<ScalarField>,
    pub source_c: ScalarField,
    pub map: Diffeomorphism,
}

struct SourceCoefficients {
    a: Vec<Vec<ScalarField>>,
    b: Vec<ScalarField>,
    c: ScalarField,
}

fn symbolic_source(l1: &EllipticOperator, f: &Diffeomorphism) -> Option<SourceCoefficients> {
    let n = l1.dim();
    let fe = f.forward_exprs()?;
    let sym = |i: usize, j: usize| -> Option<Expr> {
        let (p, q) = (l1.a[i][j].as_expr()?, l1.a[j][i].as_expr()?);
        Some(if i == j {
            p.clone()
        } else {
            expr::mul(Expr::Num(0.5), expr::add(p.clone(), q.clone()))
        })
    };
    let mut a_sym = vec![vec![Expr::Num(0.0); n]; n];
    for i in 0..n {
        for j in 0..n {
            a_sym[i][j] = sym(i, j)?;
        }
    }
    let b_sym: Vec<Expr> = l1.b.iter().map(|b| b.as_expr().cloned()).collect::<Option<_>>()?;
    let c_sym = l1.c.as_expr()?.clone();
    let df: Vec<Vec<Expr>> = fe.iter().map(|fk| (0..n).map(|i| fk.diff(i)).collect()).collect();
    let field = |e: Expr| ScalarField::from_expr(e, n).expect("same variable set");
    let mut a = vec![vec![ScalarField::constant(0.0, n); n]; n];
    for k in 0..n {
        for l in 0..=k {
            let mut s = Expr::Num(0.0);
            for i in 0..n {
                for j in 0..n {
                    let t = expr::mul(
                        a_sym[i][j].clone(),
                        expr::mul(df[k][i].clone(), df[l][j].clone()),
                    );
                    s = expr::add(s, t);
                }
            }
            a[k][l] = field(s.clone());
            a[l][k] = field(s);
        }
    }
    let b = (0..n)
        .map(|k| {
            let mut s = Expr::Num(0.0);
            for i in 0..n {
                s = expr::add(s, expr::mul(b_sym[i].clone(), df[k][i].clone()));
                for j in 0..n {
                    s = expr::add(s, expr::mul(a_sym[i][j].clone(), df[k][i].diff(j)));
                }
            }
            field(s)
        })
        .collect();
    Some(SourceCoefficients {
        a,
        b,
        c: field(c_sym),
    })
}

fn closure_source(l1: &EllipticOperator, f: &Diffeomorphism) -> SourceCoefficients {
    let n = l1.dim();
    let (l1, f) = (Arc::new(l1.clone()), Arc::new(f.clone()));
    let a = (0..n)
        .map(|k| {
            (0..n)
                .map(|l| {
                    let (l1, f) = (l1.clone(), f.clone());
                    ScalarField::from_fn(n, move |x| {
                        let a = l1.a_matrix(x)?;
                        let df = f.jacobian(x)?;
                        let mut s = 0.0;
                        for i in 0..n {
                            for j in 0..n {
                                s += a[i][j] * df[k][i] * df[l][j];
                            }
                        }
                        Ok(s)
                    })
                })
                .collect()
        })
        .collect();
    let b = (0..n)
        .map(|k| {
            let (l1, f) = (l1.clone(), f.clone());
            ScalarField::from_fn(n, move |x| {
                let c = l1.coefficients(x)?;
                let df = f.jacobian(x)?;
                let d2 = f.components()[k].hessian(x)?;
                let mut s = 0.0;
                for i in 0..n {
                    s += c.b[i] * df[k][i];
                    for j in 0..n {
                        s += c.a[i][j] * d2[i][j];
                    }
                }
                Ok(s)
            })
        })
        .collect();
    SourceCoefficients {
        a,
        b,
        c: l1.c.clone(),
    }
}

/// Transformed operator under `F` (full chain rule, symmetrized `a`).
///
/// `lambda` becomes `lambda * min sigma(DF)^2` and `Lambda` the largest
/// sampled coefficient, both over a grid of the valid ball (the unit ball
/// around the center when the radius is infinite).
pub fn pushforward_operator(l1: &EllipticOperator, f: &Diffeomorphism) -> Result<TransformedOperator> {
    let n = l1.dim();
    if f.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: f.dim(),
        });
    }
    let src = symbolic_source(l1, f).unwrap_or_else(|| closure_source(l1, f));
    let radius = if f.valid_radius.is_finite() { f.valid_radius } else { 1.0 };
    let mut sigma2 = f64::INFINITY;
    let mut big = 0.0f64;
    for p in ball_grid(&f.center, radius, 6) {
        let j = f.jacobian(&p)?;
        // smallest eigenvalue of DF DF^T is the squared smallest singular value
        let jjt: Vec<Vec<f64>> = (0..n)
            .map(|k| (0..n).map(|l| (0..n).map(|i| j[k][i] * j[l][i]).sum()).collect())
            .collect();
        sigma2 = sigma2.min(min_eigenvalue(&jjt));
        for v in src.a.iter().flatten().chain(&src.b).chain([&src.c]) {
            big = big.max(v.try_value(&p)?.abs());
        }
    }
    let lambda = l1.lambda * sigma2;
    if !(lambda > 0.0) {
        return Err(Error::NotElliptic {
            point: f.center.clone(),
            value: lambda,
        });
    }
    let a = src
        .a
        .iter()
        .map(|row| row.iter().map(|g| pushforward_field(f, g)).collect())
        .collect();
    let b = src.b.iter().map(|g| pushforward_field(f, g)).collect();
    let c = pushforward_field(f, &src.c);
    let op = EllipticOperator::new(a, b, c, lambda, big.max(lambda))?;
    Ok(TransformedOperator {
        op,
        source_a: src.a,
        source_b: src.b,
        source_c: src.c,
        map: f.clone(),
    })
}

impl TransformedOperator {
    /// `a_nn` and `b_n` on the flattened boundary `{y_n = 0}` as fields of `y'`,
    /// valid when the map fixes that hyperplane pointwise (flattening maps do).
    pub fn boundary_reflection_data(&self) -> (ScalarField, ScalarField) {
        let n = self.op.dim();
        (
            self.source_a[n - 1][n - 1].on_flat_boundary(),
            self.source_b[n - 1].on_flat_boundary(),
        )
    }
}

/// `max |a~_in(y)|` over `i < n` and the samples.
pub fn verify_no_cross_terms(l2: &TransformedOperator, boundary_samples: &[Vec<f64>]) -> Result<f64> {
    let n = l2.op.dim();
    let mut worst = 0.0f64;
    for y in boundary_samples {
        for i in 0..n - 1 {
            worst = worst.max(l2.op.a[i][n - 1].try_value(y)?.abs());
        }
    }
    Ok(worst)
}
