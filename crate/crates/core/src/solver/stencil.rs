use rayon::prelude::*;

use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, GridFunction, Mesh, NodeKind, ScalarField};

/// `L_h u` at one interior node: `diag u_i + sum w_j u_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub node: usize,
    pub diag: f64,
    pub off: Vec<(usize, f64)>,
}

impl Row {
    pub fn apply(&self, v: &[f64]) -> f64 {
        self.off.iter().fold(self.diag * v[self.node], |s, &(j, w)| s + w * v[j])
    }
}

/// Finite-difference discretization of `L` on the nodes of a mesh.
///
/// Second derivatives are central; first derivatives switch to upwind
/// differences where the cell Péclet number `|b_i| h / (2 a_ii)` exceeds 1;
/// mixed terms use the four-point cross stencil.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub kinds: Vec<NodeKind>,
    /// Unknown number of each interior node.
    pub index: Vec<Option<usize>>,
    /// One row per interior node, in mesh order.
    pub rows: Vec<Row>,
}

impl Discretization {
    pub fn new(op: &EllipticOperator, domain: &DomainSpec, h: f64) -> Result<Discretization> {
        Discretization::on_mesh(op, domain, domain.mesh(h)?)
    }

    pub fn on_mesh(op: &EllipticOperator, domain: &DomainSpec, mesh: Mesh) -> Result<Discretization> {
        if op.dim() != mesh.dim() || domain.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: mesh.dim(),
            });
        }
        let kinds = domain.classify(&mesh);
        let interior: Vec<usize> = (0..mesh.len())
            .filter(|&i| kinds[i] == NodeKind::Interior)
            .collect();
        let mut index = vec![None; mesh.len()];
        for (k, &i) in interior.iter().enumerate() {
            index[i] = Some(k);
        }
        let rows = interior
            .par_iter()
            .map(|&i| stencil_row(op, &mesh, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Discretization {
            mesh,
            kinds,
            index,
            rows,
        })
    }

    pub fn unknowns(&self) -> usize {
        self.rows.len()
    }

    /// `L_h v` at the interior nodes, in unknown order.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.rows.par_iter().map(|r| r.apply(v)).collect()
    }

    /// `L_h` of a field sampled at the mesh nodes.
    pub fn apply_field(&self, u: &ScalarField) -> Result<Vec<f64>> {
        let v = GridFunction::from_field(self.mesh.clone(), u)?;
        Ok(self.apply(v.values()))
    }

    /// Interior-node mesh indices, in unknown order.
    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(|r| r.node)
    }

    /// Closed-domain nodes that are not interior (they carry Dirichlet data).
    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == NodeKind::Boundary)
            .map(|(i, _)| i)
    }
}

pub(crate) fn stencil_row(op: &EllipticOperator, mesh: &Mesh, i: usize) -> Result<Row> {
    let n = mesh.dim();
    let h = mesh.h;
    let x = mesh.point(i);
    let co = op.coefficients(&x)?;
    let mut diag = co.c;
    let mut off: Vec<(usize, f64)> = Vec::with_capacity(2 * n + 4 * n * (n - 1) / 2);
    let nb = |o: &[isize]| mesh.offset(i, o).ok_or_else(|| Error::StencilOutOfDomain { point: x.clone() });
    let mut o = vec![0isize; n];
    for k in 0..n {
        let a = co.a[k][k];
        if !(a > 0.0) {
            return Err(Error::NotElliptic {
                point: x.clone(),
                value: a,
            });
        }
        o[k] = 1;
        let up = nb(&o)?;
        o[k] = -1;
        let dn = nb(&o)?;
        o[k] = 0;
        let (mut wu, mut wd) = (a / (h * h), a / (h * h));
        diag -= 2.0 * a / (h * h);
        let b = co.b[k];
        if b.abs() * h / (2.0 * a) > 1.0 {
            if b > 0.0 {
                wu += b / h;
                diag -= b / h;
            } else {
                wd -= b / h;
                diag += b / h;
            }
        } else {
            wu += b / (2.0 * h);
            wd -= b / (2.0 * h);
        }
        off.push((up, wu));
        off.push((dn, wd));
        for j in 0..k {
            let m = co.a[k][j];
            if m == 0.0 {
                continue;
            }
            let w = 2.0 * m / (4.0 * h * h);
            for (sk, sj, s) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                o[k] = sk;
                o[j] = sj;
                off.push((nb(&o)?, s * w));
            }
            o[k] = 0;
            o[j] = 0;
        }
    }
    Ok(Row { node: i, diag, off })
}
