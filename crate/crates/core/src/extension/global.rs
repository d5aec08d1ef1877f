use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use super::halfspace::{
    extend_halfspace_with, halfspace_checks, halfspace_delta, HalfspaceChecks, HalfspaceExtension,
};
use super::partition::PartitionOfUnity;
use crate::elliptic::operator::{min_eigenvalue, EllipticOperator};
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, Jet, ScalarField};
use crate::transform::{
    build_flattening_map, polar_shear_chart, pullback, pushforward_field, pushforward_operator,
    verify_no_cross_terms, Diffeomorphism, Flattening, TransformedOperator,
};

/// Boundary chart `T = F1 o Psi` on the open set `cover`.
#[derive(Debug, Clone)]
pub struct Chart {
    pub cover: DomainSpec,
    pub psi: Diffeomorphism,
    pub flattening: Flattening,
    pub map: Diffeomorphism,
    /// `L` in flattened coordinates.
    pub operator: TransformedOperator,
    /// Largest `|a_in|` on the flat boundary before flattening.
    pub cross_terms_before: f64,
    /// Reflected points land in `[0, R)` in the normal coordinate.
    pub reflect_radius: f64,
}

/// Ellipticity and coefficient bounds sampled on `[-w, w]^(n-1) x [0, R]`,
/// the part of the chart the reflection reads from.
fn local_bounds(op: EllipticOperator, w: f64, r: f64) -> Result<EllipticOperator> {
    let n = op.dim();
    let m = 21usize;
    let mut lambda = f64::INFINITY;
    let mut big = 0.0f64;
    for mut c in 0..m.pow(n as u32) {
        let p: Vec<f64> = (0..n)
            .map(|k| {
                let t = (c % m) as f64 / (m - 1) as f64;
                c /= m;
                if k + 1 == n { r * t } else { w * (2.0 * t - 1.0) }
            })
            .collect();
        let co = op.coefficients(&p)?;
        lambda = lambda.min(min_eigenvalue(&co.a));
        let amax = co.a.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let bmax = co.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        big = big.max(amax).max(bmax).max(co.c.abs());
    }
    if !(lambda > 0.0) {
        return Err(Error::NotElliptic {
            point: vec![0.0; n],
            value: lambda,
        });
    }
    op.with_bounds(lambda, big.max(lambda))
}

/// Flattening and transformed operator for one boundary chart `psi`
/// (boundary mapped into `{z_n = 0}`, the domain into `{z_n > 0}`).
pub fn build_chart(
    op: &EllipticOperator,
    psi: Diffeomorphism,
    cover: DomainSpec,
    flatten_radius: f64,
    reflect_radius: f64,
    half_width: f64,
) -> Result<Chart> {
    let l_psi = pushforward_operator(op, &psi)?;
    let n = op.dim();
    let flat: Vec<Vec<f64>> = (0..=20)
        .map(|i| {
            let mut p = vec![0.0; n];
            p[0] = flatten_radius * (-1.0 + i as f64 / 10.0);
            p
        })
        .collect();
    let cross_terms_before = verify_no_cross_terms(&l_psi, &flat)?;
    let flattening = build_flattening_map(&l_psi.op, flatten_radius)?;
    let mut operator = pushforward_operator(&l_psi.op, &flattening.map)?;
    operator.op = local_bounds(operator.op, half_width, reflect_radius)?;
    let map = flattening.map.compose(&psi)?;
    Ok(Chart {
        cover,
        psi,
        flattening,
        map,
        operator,
        cross_terms_before,
        reflect_radius,
    })
}

#[derive(Debug, Clone)]
pub struct Atlas {
    pub omega: DomainSpec,
    /// Open set compactly inside the domain, covered by no chart.
    pub interior: DomainSpec,
    pub charts: Vec<Chart>,
}

impl Atlas {
    /// `[interior, chart covers...]`, the order used by the partition.
    pub fn cover(&self) -> Vec<DomainSpec> {
        std::iter::once(self.interior.clone())
            .chain(self.charts.iter().map(|c| c.cover.clone()))
            .collect()
    }
}

/// Unit disk with `count` sheared polar charts on balls of radius 0.5
/// around equally spaced boundary points, and `B(0, 0.85)` inside.
pub fn unit_disk_atlas(op: &EllipticOperator, count: usize, shear: f64) -> Result<Atlas> {
    if op.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: op.dim(),
        });
    }
    let omega = DomainSpec::ball(vec![0.0, 0.0], 1.0)?;
    let charts = (0..count)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / count as f64;
            let psi = polar_shear_chart(theta, shear, 0.5)?;
            let cover = DomainSpec::ball(vec![theta.cos(), theta.sin()], 0.5)?;
            build_chart(op, psi, cover, 0.8, 0.5, 0.55)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Atlas {
        omega,
        interior: DomainSpec::ball(vec![0.0, 0.0], 0.85)?,
        charts,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSummary {
    pub index: usize,
    pub delta: f64,
    pub cross_terms_before: f64,
    pub checks: HalfspaceChecks,
}

#[derive(Debug, Clone)]
pub struct GlobalExtension {
    /// `Phi_0 u + sum Phi_i (E_i (u o T_i^-1)) o T_i`.
    pub field: ScalarField,
    pub partition: PartitionOfUnity,
    pub charts: Vec<ChartSummary>,
    /// `max |u|` and `max |Lu|` on boundary samples.
    pub boundary_value: f64,
    pub boundary_operator: f64,
}

/// Global contractive extension. Every chart must see `u o T^-1` with
/// `u = Lu = 0` and no mixed terms on its flat boundary; all failures are
/// listed in the error.
pub fn extend_global(
    u: &ScalarField,
    op: &EllipticOperator,
    atlas: &Atlas,
    partition: &PartitionOfUnity,
) -> Result<GlobalExtension> {
    build_global(u, op, atlas, partition, true)
}

/// The same construction with failed membership checks only recorded.
pub fn extend_global_unchecked(
    u: &ScalarField,
    op: &EllipticOperator,
    atlas: &Atlas,
    partition: &PartitionOfUnity,
) -> Result<GlobalExtension> {
    build_global(u, op, atlas, partition, false)
}

fn build_global(
    u: &ScalarField,
    op: &EllipticOperator,
    atlas: &Atlas,
    partition: &PartitionOfUnity,
    enforce: bool,
) -> Result<GlobalExtension> {
    let n = op.dim();
    if partition.len() != atlas.charts.len() + 1 {
        return Err(Error::invalid("partition", "needs one weight per cover set"));
    }
    let boundary = atlas.omega.boundary_samples(32);
    let mut failures = Vec::new();
    let mut bv = 0.0f64;
    let mut bl = 0.0f64;
    for p in &boundary {
        bv = bv.max(u.try_value(p)?.abs());
        let l = if u.has_exact_jet() {
            op.apply_exact(u, p)?
        } else {
            op.apply(u, p, 1e-4)?
        };
        bl = bl.max(l.abs());
    }
    let mut pieces: Vec<ScalarField> = Vec::with_capacity(atlas.charts.len());
    let mut charts = Vec::with_capacity(atlas.charts.len());
    for (i, chart) in atlas.charts.iter().enumerate() {
        let v = pushforward_field(&chart.map, u);
        let samples: Vec<Vec<f64>> = boundary
            .iter()
            .filter(|p| chart.cover.contains(p))
            .map(|p| {
                let mut z = chart.map.apply(p)?;
                z[n - 1] = 0.0;
                Ok(z)
            })
            .collect::<Result<_>>()?;
        if samples.is_empty() {
            return Err(Error::invalid("atlas", format!("chart {i} sees no boundary")));
        }
        let checks = halfspace_checks(&v, &chart.operator.op, &samples)?;
        if checks.cross_terms > checks.tolerance {
            failures.push(format!("chart {i}: mixed terms {:.3e} on the flat boundary", checks.cross_terms));
        }
        if checks.boundary_value > checks.tolerance {
            failures.push(format!("chart {i}: u = {:.3e} on the flat boundary", checks.boundary_value));
        }
        if checks.boundary_operator > checks.tolerance {
            failures.push(format!("chart {i}: Lu = {:.3e} on the flat boundary", checks.boundary_operator));
        }
        let (a_nn, b_n) = chart.operator.boundary_reflection_data();
        let delta = halfspace_delta(&chart.operator.op, &a_nn, &b_n, &samples, chart.reflect_radius)?;
        let HalfspaceExtension { field, .. } = extend_halfspace_with(&v, &a_nn, &b_n, delta)?;
        pieces.push(pullback(&chart.map, &field));
        charts.push(ChartSummary {
            index: i,
            delta,
            cross_terms_before: chart.cross_terms_before,
            checks,
        });
    }
    if enforce && !failures.is_empty() {
        return Err(Error::ChartMembership { failures });
    }
    let pieces = Arc::new(pieces);
    let (pv, pj) = (partition.clone(), partition.clone());
    let (piv, pij) = (pieces.clone(), pieces);
    let (uv, uj) = (u.clone(), u.clone());
    let value = move |x: &[f64]| -> Result<f64> {
        let w = pv.weights_at(x)?;
        let mut s = 0.0;
        if w[0] != 0.0 {
            s += w[0] * uv.try_value(x)?;
        }
        for (k, piece) in piv.iter().enumerate() {
            if w[k + 1] != 0.0 {
                s += w[k + 1] * piece.try_value(x)?;
            }
        }
        Ok(s)
    };
    let jet = move |x: &[f64]| -> Result<Jet> {
        let w = pj.jets_at(x)?;
        let zero = |j: &Jet| j.value == 0.0 && j.gradient.iter().all(|g| *g == 0.0);
        let mut s = Jet::constant(0.0, n);
        if !zero(&w[0]) {
            s = s.add(&w[0].mul(&uj.jet(x)?));
        }
        for (k, piece) in pij.iter().enumerate() {
            if !zero(&w[k + 1]) {
                s = s.add(&w[k + 1].mul(&piece.jet(x)?));
            }
        }
        Ok(s)
    };
    Ok(GlobalExtension {
        field: ScalarField::from_fns(n, value, jet),
        partition: partition.clone(),
        charts,
        boundary_value: bv,
        boundary_operator: bl,
    })
}

/// `u_m = (1 - r^2) exp(-(m+1) r^2 / 2) Re((x1 + i x2)^m)`, which satisfies
/// `u = 0` and `Laplacian u = 0` on the unit circle.
pub fn disk_test_function(m: u32) -> Result<ScalarField> {
    // Re((x1 + i x2)^m) by the binomial theorem
    let mut re = String::new();
    for k in (0..=m).step_by(2) {
        let sign = if (k / 2) % 2 == 0 { "+" } else { "-" };
        let c = binomial(m, k);
        re.push_str(&format!(" {sign} {c}*x1^{}*x2^{}", m - k, k));
    }
    let src = format!(
        "(1 - x1^2 - x2^2) * exp(-{}*(x1^2 + x2^2)/2) * (0 {re})",
        m + 1
    );
    ScalarField::parse(&src, 2)
}

fn binomial(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extension::partition::build_partition;

    #[test]
    fn test_functions_are_admissible() {
        let l = EllipticOperator::laplacian(2);
        for m in 0..5 {
            let u = disk_test_function(m).unwrap();
            for k in 0..16 {
                let t = k as f64 * 0.4;
                let p = [t.cos(), t.sin()];
                assert!(u.value(&p).abs() < 1e-14);
                assert!(l.apply_exact(&u, &p).unwrap().abs() < 1e-12, "m = {m}");
            }
        }
    }

    #[test]
    fn shear_chart_needs_flattening() {
        let l = EllipticOperator::laplacian(2);
        let atlas = unit_disk_atlas(&l, 12, 0.3).unwrap();
        let ch = &atlas.charts[0];
        assert!((ch.cross_terms_before - 0.3).abs() < 1e-12);
        let flat: Vec<Vec<f64>> = (0..9).map(|i| vec![-0.4 + 0.1 * i as f64, 0.0]).collect();
        assert!(verify_no_cross_terms(&ch.operator, &flat).unwrap() < 1e-12);
    }

    #[test]
    fn global_extension_on_the_disk() {
        let l = EllipticOperator::laplacian(2);
        let atlas = unit_disk_atlas(&l, 12, 0.3).unwrap();
        let part = build_partition(&atlas.cover(), &atlas.omega).unwrap();
        let u = disk_test_function(2).unwrap();
        let e = extend_global(&u, &l, &atlas, &part).unwrap();
        for p in [[0.1, 0.2], [0.7, -0.5], [0.0, 0.99], [-0.6, 0.6]] {
            assert!((e.field.value(&p) - u.value(&p)).abs() < 1e-9);
        }
        assert_eq!(e.field.value(&[2.0, 0.0]), 0.0);
        // zero in, zero out
        let z = extend_global(&ScalarField::constant(0.0, 2), &l, &atlas, &part).unwrap();
        assert_eq!(z.field.value(&[1.05, 0.1]), 0.0);
    }

    #[test]
    fn inadmissible_input_lists_charts() {
        let l = EllipticOperator::laplacian(2);
        let atlas = unit_disk_atlas(&l, 12, 0.3).unwrap();
        let part = build_partition(&atlas.cover(), &atlas.omega).unwrap();
        let u = ScalarField::parse("1 - x1^2 - x2^2", 2).unwrap();
        match extend_global(&u, &l, &atlas, &part) {
            Err(Error::ChartMembership { failures }) => assert_eq!(failures.len(), 12),
            other => panic!("{other:?}"),
        }
    }
}
