use super::diffeo::{jacobian_radius, Diffeomorphism, MapRegularity};
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::fields::ScalarField;

/// `F(x) = (x' + g(x') x_n, x_n)` with `g_i = -a_in(x', 0) / a_nn(x', 0)`.
#[derive(Debug, Clone)]
pub struct Flattening {
    pub map: Diffeomorphism,
    pub g: Vec<ScalarField>,
    pub r_prime: f64,
}

/// Mixed-term-eliminating map on the half ball of radius `r` around 0.
///
/// `R'` is the largest sampled radius where `|det DF| >= 1e-3` (with
/// `det DF(0) = 1`) and the sampled map stays injective.
pub fn build_flattening_map(l1: &EllipticOperator, r: f64) -> Result<Flattening> {
    let n = l1.dim();
    if !(r > 0.0) {
        return Err(Error::invalid("R", "must be positive"));
    }
    // a_nn > 0 on the flat part of the half ball
    for p in super::diffeo::ball_grid(&vec![0.0; n], r, 8) {
        if p[n - 1] != 0.0 {
            continue;
        }
        let ann = l1.coefficients(&p)?.a[n - 1][n - 1];
        if !(ann > 0.0) {
            return Err(Error::NotElliptic { point: p, value: ann });
        }
    }
    let ann = l1.a[n - 1][n - 1].on_flat_boundary();
    let g: Vec<ScalarField> = (0..n - 1)
        .map(|i| {
            l1.a[i][n - 1]
                .add(&l1.a[n - 1][i])
                .scale(-0.5)
                .on_flat_boundary()
                .div(&ann)
        })
        .map(|gi| numerically_constant(gi, n, r))
        .collect::<Result<_>>()?;
    let xn = ScalarField::from_expr(Expr::Var(n - 1), n).expect("valid");
    let mut comps: Vec<ScalarField> = (0..n - 1)
        .map(|k| {
            ScalarField::from_expr(Expr::Var(k), n)
                .expect("valid")
                .add(&g[k].mul(&xn))
        })
        .collect();
    comps.push(xn);
    let mut map = Diffeomorphism::from_fields(comps)?;
    if !g.iter().all(|gi| gi.has_exact_jet()) {
        map = map.with_regularity(MapRegularity::C2Alpha);
    }
    let constants: Option<Vec<f64>> = g.iter().map(|gi| gi.constant_value()).collect();
    if let Some(cs) = constants {
        // x' = y' - g y_n
        let mut inv: Vec<Expr> = (0..n - 1)
            .map(|k| expr::sub(Expr::Var(k), expr::mul(Expr::Num(cs[k]), Expr::Var(n - 1))))
            .collect();
        inv.push(Expr::Var(n - 1));
        map = map.with_inverse(inv)?;
    }
    let r_prime = jacobian_radius(&map, r, 1e-3)?;
    let map = map.with_valid_ball(vec![0.0; n], r_prime);
    Ok(Flattening { map, g, r_prime })
}

/// Replaces `g` by its value when it is constant to rounding on the flat
/// part of the ball. Keeps the map affine, with a closed-form inverse, for
/// charts whose mixed terms simplify to a constant only numerically.
fn numerically_constant(g: ScalarField, n: usize, r: f64) -> Result<ScalarField> {
    if g.constant_value().is_some() {
        return Ok(g);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for mut p in super::diffeo::ball_grid(&vec![0.0; n - 1], r, 20) {
        p.push(0.0);
        let v = g.try_value(&p)?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let mid = 0.5 * (lo + hi);
    if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
        Ok(ScalarField::constant(mid, n))
    } else {
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::pushforward::{pushforward_operator, verify_no_cross_terms};

    #[test]
    fn constant_example() {
        let l = EllipticOperator::constant(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[0.0, 0.0], 0.0)
            .unwrap();
        let fl = build_flattening_map(&l, 1.0).unwrap();
        assert!((fl.g[0].value(&[0.4, 0.0]) + 1.0 / 3.0).abs() < 1e-15);
        let y = fl.map.apply(&[0.5, 0.3]).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-15 && y[1] == 0.3);
        assert_eq!(fl.r_prime, 1.0);
        assert!((fl.map.det(&[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-15);
        let t = pushforward_operator(&l, &fl.map).unwrap();
        let samples: Vec<Vec<f64>> = (0..=10).map(|i| vec![-0.5 + 0.1 * i as f64, 0.0]).collect();
        assert!(verify_no_cross_terms(&t, &samples).unwrap() < 1e-12);
    }

    #[test]
    fn diagonal_gives_identity() {
        let l = EllipticOperator::constant(&[vec![2.0, 0.0], vec![0.0, 3.0]], &[0.0, 0.0], 0.0)
            .unwrap();
        let fl = build_flattening_map(&l, 0.7).unwrap();
        assert_eq!(fl.map.apply(&[0.2, 0.3]).unwrap(), vec![0.2, 0.3]);
        assert_eq!(fl.r_prime, 0.7);
    }

    #[test]
    fn variable_cross_term() {
        let a12 = ScalarField::parse("1 + x1^2/10", 2).unwrap();
        let l = EllipticOperator::new(
            vec![
                vec![ScalarField::constant(3.0, 2), a12.clone()],
                vec![a12, ScalarField::parse("2 + x1*x2", 2).unwrap()],
            ],
            vec![ScalarField::constant(0.0, 2), ScalarField::parse("x1", 2).unwrap()],
            ScalarField::constant(0.0, 2),
            1.0,
            4.0,
        )
        .unwrap();
        let fl = build_flattening_map(&l, 0.5).unwrap();
        let t = pushforward_operator(&l, &fl.map).unwrap();
        let samples: Vec<Vec<f64>> = (0..=20).map(|i| vec![-0.25 + 0.025 * i as f64, 0.0]).collect();
        assert!(verify_no_cross_terms(&t, &samples).unwrap() < 1e-8);
        // sign of the last coordinate is preserved
        let y = fl.map.apply(&[0.1, 0.2]).unwrap();
        assert!(y[1] > 0.0);
    }
}
