use serde::Serialize;

use super::linear::{Csr, LinearSolver};
use super::stencil::Discretization;
use crate::elliptic::checks::max_principle_on;
use crate::elliptic::comparison::interior_sup_bound;
use crate::elliptic::operator::EllipticOperator;
use crate::elliptic::MaxPrincipleReport;
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, GridFunction, NodeKind, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub sup_u: f64,
    /// `sup |g| + (e^{gamma d} - 1) sup |f| / lambda`.
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// `max |L_h u - f|` over interior nodes.
    pub residual_norm: f64,
    pub iterations: usize,
    pub unknowns: usize,
    pub method: String,
    pub max_principle_ok: bool,
    pub max_principle: MaxPrincipleReport,
    /// `None` when no comparison function could be built.
    pub bound_check: Option<BoundCheck>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    pub report: SolveReport,
}

/// Matrix of `L_h` on the unknowns, plus `scale * I`.
pub(crate) fn system_matrix(disc: &Discretization, identity: f64, scale: f64) -> Csr {
    Csr::from_rows(
        disc.rows
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let mut out = vec![(k, identity + scale * r.diag)];
                out.extend(
                    r.off
                        .iter()
                        .filter_map(|&(j, w)| disc.index[j].map(|c| (c, scale * w))),
                );
                out
            })
            .collect(),
    )
}

/// `f_i - sum of known-neighbor terms` for every unknown.
pub(crate) fn dirichlet_rhs(disc: &Discretization, f: &[f64], known: &[f64]) -> Vec<f64> {
    disc.rows
        .iter()
        .zip(f)
        .map(|(r, &fi)| {
            r.off
                .iter()
                .filter(|(j, _)| disc.index[*j].is_none())
                .fold(fi, |s, &(j, w)| s - w * known[j])
        })
        .collect()
}

pub(crate) fn check_nonpositive_c(op: &EllipticOperator, disc: &Discretization) -> Result<()> {
    for (i, k) in disc.kinds.iter().enumerate() {
        if *k == NodeKind::Exterior {
            continue;
        }
        let p = disc.mesh.point(i);
        let c = op.c.try_value(&p)?;
        if c > 0.0 {
            return Err(Error::PositiveZerothOrder { point: p, value: c });
        }
    }
    Ok(())
}

/// Grid values of `g` everywhere, to be overwritten at interior nodes.
pub(crate) fn boundary_values(disc: &Discretization, g: &ScalarField) -> Result<Vec<f64>> {
    Ok(GridFunction::from_field(disc.mesh.clone(), g)?.into_values())
}

/// Dirichlet problem `L_h u = f` at interior nodes, `u = g` at the other
/// nodes of the mesh (exterior nodes also get `g`).
pub fn direct_solve(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    domain: &DomainSpec,
    h: f64,
) -> Result<Solution> {
    let disc = Discretization::new(op, domain, h)?;
    let mut sol = solve_discrete(op, &disc, f, g)?;
    sol.report.bound_check = interior_sup_bound(op, f, g, domain, h).ok().map(|bound| {
        let sup_u = closed_sup(&sol.u, &disc);
        BoundCheck {
            sup_u,
            bound,
            ok: sup_u <= bound + 1e-9,
        }
    });
    Ok(sol)
}

pub(crate) fn closed_sup(u: &GridFunction, disc: &Discretization) -> f64 {
    u.values()
        .iter()
        .zip(&disc.kinds)
        .filter(|(_, k)| **k != NodeKind::Exterior)
        .fold(0.0, |m, (v, _)| m.max(v.abs()))
}

/// Solve on an existing discretization; no comparison bound.
pub(crate) fn solve_discrete(
    op: &EllipticOperator,
    disc: &Discretization,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<Solution> {
    check_nonpositive_c(op, disc)?;
    let fv: Vec<f64> = disc
        .interior_nodes()
        .map(|i| f.try_value(&disc.mesh.point(i)))
        .collect::<Result<_>>()?;
    let mut values = boundary_values(disc, g)?;
    let solver = LinearSolver::new(system_matrix(disc, 0.0, 1.0))?;
    let (x, iterations) = solver.solve(&dirichlet_rhs(disc, &fv, &values))?;
    for (r, xi) in disc.rows.iter().zip(x) {
        values[r.node] = xi;
    }
    let residual_norm = disc
        .apply(&values)
        .iter()
        .zip(&fv)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let u = GridFunction::new(disc.mesh.clone(), values)?;
    let max_principle = max_principle_on(&u, op, Some(f), &disc.kinds)?;
    Ok(Solution {
        report: SolveReport {
            residual_norm,
            iterations,
            unknowns: disc.unknowns(),
            method: solver.method().into(),
            max_principle_ok: max_principle.ok,
            max_principle,
            bound_check: None,
        },
        u,
    })
}
