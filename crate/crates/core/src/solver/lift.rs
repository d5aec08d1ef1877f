use serde::{Deserialize, Serialize};

use super::linear::{BandLu, Csr};
use super::stencil::Discretization;
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::domain::dist;
use crate::fields::{DomainSpec, GridFunction, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Ball {
        Ball { center, radius }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(x, &self.center) < self.radius
    }

    /// Closed ball strictly inside the domain.
    pub fn inside(&self, domain: &DomainSpec) -> bool {
        self.radius > 0.0
            && domain.contains(&self.center)
            && domain.distance_to_boundary(&self.center) > self.radius
    }
}

/// Discrete Dirichlet problem on the interior nodes inside one ball, with the
/// values on the surrounding ring of nodes as data. The factorization is
/// reused across Perron sweeps.
#[derive(Debug, Clone)]
pub(crate) struct LocalProblem {
    /// Mesh indices of the unknowns.
    pub nodes: Vec<usize>,
    lu: Option<BandLu>,
    f: Vec<f64>,
    /// Ring couplings `(mesh index, weight)` per unknown.
    ring: Vec<Vec<(usize, f64)>>,
}

impl LocalProblem {
    pub fn new(disc: &Discretization, f: &[f64], ball: &Ball) -> Result<LocalProblem> {
        let rows: Vec<usize> = disc
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| ball.contains(&disc.mesh.point(r.node)))
            .map(|(k, _)| k)
            .collect();
        let mut local = vec![None; disc.mesh.len()];
        for (m, &k) in rows.iter().enumerate() {
            local[disc.rows[k].node] = Some(m);
        }
        let mut mat = Vec::with_capacity(rows.len());
        let mut ring = Vec::with_capacity(rows.len());
        for (m, &k) in rows.iter().enumerate() {
            let r = &disc.rows[k];
            let mut row = vec![(m, r.diag)];
            let mut outer = Vec::new();
            for &(j, w) in &r.off {
                match local[j] {
                    Some(c) => row.push((c, w)),
                    None => outer.push((j, w)),
                }
            }
            mat.push(row);
            ring.push(outer);
        }
        let lu = if rows.is_empty() {
            None
        } else {
            Some(BandLu::factor(&Csr::from_rows(mat))?)
        };
        Ok(LocalProblem {
            nodes: rows.iter().map(|&k| disc.rows[k].node).collect(),
            f: rows.iter().map(|&k| f[k]).collect(),
            lu,
            ring,
        })
    }

    /// New values at `nodes` given the current grid values.
    pub fn solve(&self, v: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .ring
            .iter()
            .zip(&self.f)
            .map(|(ring, &fi)| ring.iter().fold(fi, |s, &(j, w)| s - w * v[j]))
            .collect();
        if let Some(lu) = &self.lu {
            lu.solve(&mut b);
        }
        b
    }
}

/// Harmonic lifting of `u` in `ball`: `L_h u = f` at the interior nodes
/// inside the ball, with the mesh values on the surrounding ring as
/// Dirichlet data; unchanged elsewhere.
pub fn harmonic_lift(
    op: &EllipticOperator,
    f: &ScalarField,
    u: &GridFunction,
    domain: &DomainSpec,
    ball: &Ball,
) -> Result<GridFunction> {
    if !ball.inside(domain) {
        return Err(Error::BallNotInside {
            center: ball.center.clone(),
            radius: ball.radius,
        });
    }
    let disc = Discretization::on_mesh(op, domain, u.mesh.clone())?;
    let fv: Vec<f64> = disc
        .interior_nodes()
        .map(|i| f.try_value(&disc.mesh.point(i)))
        .collect::<Result<_>>()?;
    let lp = LocalProblem::new(&disc, &fv, ball)?;
    let mut v = u.values().to_vec();
    for (i, x) in lp.nodes.iter().zip(lp.solve(u.values())) {
        v[*i] = x;
    }
    GridFunction::new(u.mesh.clone(), v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Mesh;

    #[test]
    fn linear_interpolant_in_1d() {
        let l = EllipticOperator::laplacian(1);
        let d = DomainSpec::interval(-2.0, 2.0).unwrap();
        let mesh = Mesh::covering(&[-2.0], &[2.0], 0.1).unwrap();
        // u = 0 left of the ball, 2 right of it, anything inside
        let u = GridFunction::from_field(
            mesh,
            &ScalarField::from_fn(1, |x| Ok(if x[0] >= 1.0 - 1e-9 { 2.0 } else if x[0] <= -1.0 + 1e-9 { 0.0 } else { -5.0 })),
        )
        .unwrap();
        let z = ScalarField::constant(0.0, 1);
        let ball = Ball::new(vec![0.0], 1.0 - 1e-9);
        let lifted = harmonic_lift(&l, &z, &u, &d, &ball).unwrap();
        for i in 0..u.mesh.len() {
            let x = u.mesh.point(i)[0];
            if x.abs() < 1.0 - 1e-9 {
                assert!((lifted.values()[i] - (1.0 + x)).abs() < 1e-12);
            } else {
                assert_eq!(lifted.values()[i], u.values()[i]);
            }
        }
    }

    #[test]
    fn solution_is_a_fixed_point() {
        let l = EllipticOperator::laplacian(2);
        let d = DomainSpec::unit_box(2);
        let u = GridFunction::from_field(d.mesh(0.05).unwrap(), &ScalarField::parse("x1^2 - x2^2 + x1*x2", 2).unwrap())
            .unwrap();
        let z = ScalarField::constant(0.0, 2);
        let b = Ball::new(vec![0.5, 0.5], 0.3);
        let lifted = harmonic_lift(&l, &z, &u, &d, &b).unwrap();
        for (a, b) in lifted.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn subsolution_is_raised() {
        let l = EllipticOperator::laplacian(2);
        let d = DomainSpec::unit_box(2);
        // L u = 4 >= 0 = f
        let u = GridFunction::from_field(d.mesh(0.05).unwrap(), &ScalarField::parse("x1^2 + x2^2", 2).unwrap())
            .unwrap();
        let z = ScalarField::constant(0.0, 2);
        let lifted = harmonic_lift(&l, &z, &u, &d, &Ball::new(vec![0.4, 0.6], 0.25)).unwrap();
        assert!(lifted.values().iter().zip(u.values()).all(|(a, b)| a >= &(b - 1e-9)));
        assert!(lifted.values().iter().zip(u.values()).any(|(a, b)| a > &(b + 1e-3)));
    }

    #[test]
    fn ball_must_be_inside() {
        let l = EllipticOperator::laplacian(2);
        let d = DomainSpec::unit_box(2);
        let u = GridFunction::zeros(d.mesh(0.1).unwrap());
        let z = ScalarField::constant(0.0, 2);
        let r = harmonic_lift(&l, &z, &u, &d, &Ball::new(vec![0.1, 0.5], 0.2));
        assert!(matches!(r, Err(Error::BallNotInside { .. })));
    }
}
