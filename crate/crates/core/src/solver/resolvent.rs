use serde::Serialize;

use super::direct::{closed_sup, solve_discrete, SolveReport};
use super::stencil::Discretization;
use crate::elliptic::checks::estimate_omega;
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, GridFunction, ScalarField};

/// Slack in `||u|| (mu - omega) <= ||f||`.
pub const CONTRACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub mu: f64,
    pub omega: f64,
    pub u_sup: f64,
    /// `max |f|` over the interior nodes.
    pub f_sup: f64,
    /// `u_sup (mu - omega) - f_sup`; nonpositive up to round-off.
    pub excess: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct ResolventSolution {
    pub u: GridFunction,
    pub report: SolveReport,
    pub contraction: ContractionCheck,
}

impl ResolventSolution {
    pub fn contraction_ok(&self) -> bool {
        self.contraction.ok
    }
}

/// `(L - mu) u = f` in the domain, `u = 0` on the boundary, for `mu > omega`.
pub fn resolvent_solve(
    op: &EllipticOperator,
    mu: f64,
    f: &ScalarField,
    domain: &DomainSpec,
    h: f64,
) -> Result<ResolventSolution> {
    let omega = estimate_omega(op, domain, h)?;
    if !(mu > omega) {
        return Err(Error::ShiftTooSmall { mu, omega });
    }
    let shifted = op.shifted(mu);
    let disc = Discretization::new(&shifted, domain, h)?;
    let zero = ScalarField::constant(0.0, op.dim());
    let sol = solve_discrete(&shifted, &disc, f, &zero)?;
    let f_sup = disc
        .interior_nodes()
        .map(|i| f.try_value(&disc.mesh.point(i)).map(f64::abs))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let u_sup = closed_sup(&sol.u, &disc);
    let excess = u_sup * (mu - omega) - f_sup;
    Ok(ResolventSolution {
        u: sol.u,
        report: sol.report,
        contraction: ContractionCheck {
            mu,
            omega,
            u_sup,
            f_sup,
            excess,
            ok: excess <= CONTRACTION_TOL,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_1d() {
        let l = EllipticOperator::laplacian(1);
        let d = DomainSpec::unit_box(1);
        let r = resolvent_solve(&l, 1.0, &ScalarField::constant(1.0, 1), &d, 1e-3).unwrap();
        let exact = 1.0 - 1.0 / 0.5f64.cosh();
        assert!((r.contraction.u_sup - exact).abs() < 1e-6);
        assert!(r.contraction_ok());
    }

    #[test]
    fn zero_and_linearity() {
        let l = EllipticOperator::laplacian(2);
        let d = DomainSpec::unit_box(2);
        let z = resolvent_solve(&l, 2.0, &ScalarField::constant(0.0, 2), &d, 0.1).unwrap();
        assert!(z.u.values().iter().all(|v| *v == 0.0));
        let f = ScalarField::parse("sin(3*x1) + x2", 2).unwrap();
        let a = resolvent_solve(&l, 2.0, &f, &d, 0.1).unwrap();
        let b = resolvent_solve(&l, 2.0, &f.scale(2.0), &d, 0.1).unwrap();
        for (x, y) in a.u.values().iter().zip(b.u.values()) {
            assert!((2.0 * x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn shift_must_exceed_omega() {
        let l = EllipticOperator::constant(&[vec![1.0]], &[0.0], 1.0).unwrap();
        let r = resolvent_solve(&l, 0.5, &ScalarField::constant(1.0, 1), &DomainSpec::unit_box(1), 0.1);
        assert!(matches!(r, Err(Error::ShiftTooSmall { .. })));
    }
}
