use rayon::prelude::*;
use serde::Serialize;

use super::global::{ChartSummary, GlobalExtension};
use super::partition::PartitionReport;
use super::seam::{verify_extension_smoothness, Seam, SeamReport};
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, Mesh, ScalarField};

/// Summary of a global extension, written by the CLI as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionReport {
    pub sup_u: f64,
    pub sup_eu: f64,
    pub ratio: f64,
    pub boundary_value: f64,
    pub boundary_operator: f64,
    pub charts: Vec<ChartSummary>,
    pub partition: PartitionReport,
    /// Seam checks along inward normals at boundary points.
    pub seam: SeamReport,
}

/// `(max |u| on the closed domain, max |Eu| on the enlarged box)`, both on
/// the nodes of one mesh of spacing `h`.
pub fn sup_norms(
    u: &ScalarField,
    eu: &ScalarField,
    omega: &DomainSpec,
    margin: f64,
    h: f64,
) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = omega.bbox();
    lo.iter_mut().for_each(|v| *v -= margin);
    hi.iter_mut().for_each(|v| *v += margin);
    let mesh = Mesh::covering(&lo, &hi, h)?;
    let (su, se) = (0..mesh.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let p = mesh.point(i);
            let e = eu.try_value(&p)?.abs();
            let v = if omega.contains_closed(&p) {
                u.try_value(&p)?.abs()
            } else {
                0.0
            };
            Ok((v, e))
        })
        .try_reduce(|| (0.0, 0.0), |a, b| Ok((a.0.max(b.0), a.1.max(b.1))))?;
    let mut su = su;
    let mut se = se;
    for p in omega.boundary_samples(64) {
        su = su.max(u.try_value(&p)?.abs());
        se = se.max(eu.try_value(&p)?.abs());
    }
    Ok((su, se))
}

/// Seam check of `t -> eu(x0 - t n)` for `count` points of a circle, `n` the
/// outward normal. The extension side is `t < 0`.
pub fn circle_seam(
    eu: &ScalarField,
    center: &[f64],
    radius: f64,
    count: usize,
    alpha: f64,
    h: f64,
) -> Result<SeamReport> {
    if eu.dim() != 2 || count == 0 {
        return Err(Error::invalid("seam", "needs a planar field and at least one point"));
    }
    let mut total: Option<SeamReport> = None;
    for k in 0..count {
        let t = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
        let n = [t.cos(), t.sin()];
        let x0 = [center[0] + radius * n[0], center[1] + radius * n[1]];
        let f = eu.clone();
        let line = ScalarField::from_fn(1, move |s| f.try_value(&[x0[0] - s[0] * n[0], x0[1] - s[0] * n[1]]));
        let r = verify_extension_smoothness(&line, &Seam::new(0, vec![vec![0.0]]), alpha, h)?;
        total = Some(match total {
            None => r,
            Some(a) => SeamReport {
                value_mismatch: a.value_mismatch.max(r.value_mismatch),
                first_mismatch: a.first_mismatch.max(r.first_mismatch),
                second_mismatch: a.second_mismatch.max(r.second_mismatch),
                mixed_mismatch: 0.0,
                second_holder: a.second_holder.max(r.second_holder),
                points: a.points + r.points,
                ..a
            },
        });
    }
    Ok(total.expect("count > 0"))
}

/// Report for an extension of `u` from the unit disk.
pub fn disk_report(
    u: &ScalarField,
    e: &GlobalExtension,
    omega: &DomainSpec,
    h: f64,
    seam_h: f64,
) -> Result<ExtensionReport> {
    let (sup_u, sup_eu) = sup_norms(u, &e.field, omega, 0.3, h)?;
    let outside: Vec<Vec<f64>> = (0..200)
        .map(|i| {
            let t = i as f64 * 0.137;
            let r = 1.02 + 0.5 * i as f64 / 200.0;
            vec![r * t.cos(), r * t.sin()]
        })
        .collect();
    let partition = e.partition.check(omega, &outside)?;
    let seam = circle_seam(&e.field, &[0.0, 0.0], 1.0, 16, 0.5, seam_h)?;
    Ok(ExtensionReport {
        sup_u,
        sup_eu,
        ratio: if sup_u > 0.0 { sup_eu / sup_u } else { f64::NAN },
        boundary_value: e.boundary_value,
        boundary_operator: e.boundary_operator,
        charts: e.charts.clone(),
        partition,
        seam,
    })
}
