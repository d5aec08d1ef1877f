use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::kernel::{cutoff, density, density_d1, smooth_step};
use crate::fields::{DomainSpec, Jet, Shape, ScalarField};

/// Shrink fractions tried in order; the first one whose inner sets cover the
/// sampled closure wins.
pub const SHRINK_FRACTIONS: [f64; 7] = [0.5, 0.4, 0.3, 0.2, 0.1, 0.05, 0.02];

/// `Phi_i = eta_i / M(sum eta_j)` with a smooth `M(s) >= max(s, ...)` that
/// equals `s` for `s >= 1` and `1` for `s <= 1/2`.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    pub cover: Vec<DomainSpec>,
    /// Cutoffs equal to 1 on the shrunken sets.
    pub cutoffs: Arc<Vec<ScalarField>>,
    pub shrink: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionReport {
    /// `max |sum Phi_i - 1|` on the closure samples.
    pub sum_error_inside: f64,
    /// `max sum Phi_i` on samples outside the closure.
    pub max_sum_outside: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    pub ok: bool,
}

fn shrunk(set: &DomainSpec, f: f64) -> Result<DomainSpec> {
    match &set.shape {
        Shape::Ball { center, radius } => DomainSpec::ball(center.clone(), radius * (1.0 - f)),
        _ => {
            let (lo, hi) = set
                .as_box()
                .ok_or_else(|| Error::invalid("cover", "cover sets must be balls or boxes"))?;
            let (a, b): (Vec<f64>, Vec<f64>) = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| {
                    let (c, w) = (0.5 * (l + h), 0.5 * (h - l) * (1.0 - f));
                    (c - w, c + w)
                })
                .unzip();
            DomainSpec::cuboid(a, b)
        }
    }
}

fn sigma(t: f64) -> (f64, f64, f64) {
    let z = 4.0 * t - 1.0;
    (smooth_step(z), 4.0 * density(z), 16.0 * density_d1(z))
}

/// `(M(s), M'(s), M''(s))` for `M(s) = s + (1 - s) sigma(1 - s)`.
fn soft_max(s: f64) -> (f64, f64, f64) {
    let (v, d1, d2) = sigma(1.0 - s);
    (
        s + (1.0 - s) * v,
        1.0 - v - (1.0 - s) * d1,
        2.0 * d1 + (1.0 - s) * d2,
    )
}

/// Closed-domain samples used for the coverage test.
pub(crate) fn closure_samples(omega: &DomainSpec) -> Result<Vec<Vec<f64>>> {
    let h = omega.diameter() / 60.0;
    let mut pts: Vec<Vec<f64>> = omega
        .mesh(h)?
        .points()
        .filter(|p| omega.contains_closed(p))
        .collect();
    pts.extend(omega.boundary_samples((40.0 / omega.diameter()).ceil() as usize));
    Ok(pts)
}

pub fn build_partition(cover: &[DomainSpec], omega: &DomainSpec) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return Err(Error::EmptySamples);
    }
    let samples = closure_samples(omega)?;
    let mut last_miss = None;
    for &f in &SHRINK_FRACTIONS {
        let inner = cover.iter().map(|s| shrunk(s, f)).collect::<Result<Vec<_>>>()?;
        let miss = samples
            .iter()
            .find(|p| !inner.iter().any(|s| s.contains_closed(p)));
        if let Some(p) = miss {
            last_miss = Some(p.clone());
            continue;
        }
        let cutoffs = inner
            .iter()
            .zip(cover)
            .map(|(i, o)| cutoff(i, o))
            .collect::<Result<Vec<_>>>()?;
        return Ok(PartitionOfUnity {
            cover: cover.to_vec(),
            cutoffs: Arc::new(cutoffs),
            shrink: f,
        });
    }
    Err(Error::Uncovered {
        point: last_miss.expect("some fraction was tried"),
    })
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cutoffs.is_empty()
    }

    /// All weights at `x`, evaluating each cutoff once.
    pub fn weights_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        let eta = self
            .cutoffs
            .iter()
            .map(|c| c.try_value(x))
            .collect::<Result<Vec<_>>>()?;
        let m = soft_max(eta.iter().sum()).0;
        Ok(eta.into_iter().map(|e| e / m).collect())
    }

    pub fn jets_at(&self, x: &[f64]) -> Result<Vec<Jet>> {
        let eta = self.cutoffs.iter().map(|c| c.jet(x)).collect::<Result<Vec<_>>>()?;
        let n = x.len();
        let sum = eta.iter().fold(Jet::constant(0.0, n), |acc, j| acc.add(j));
        let (m0, m1, m2) = soft_max(sum.value);
        let inv = sum.map(m0, m1, m2).recip();
        Ok(eta.iter().map(|e| e.mul(&inv)).collect())
    }

    /// `Phi_i` as a field.
    pub fn weight(&self, i: usize) -> ScalarField {
        let me = self.clone();
        let n = self.cover[i].dim();
        ScalarField::from_jet_fn(n, move |x| Ok(me.jets_at(x)?.swap_remove(i)))
    }

    pub fn check(&self, omega: &DomainSpec, outside: &[Vec<f64>]) -> Result<PartitionReport> {
        let mut rep = PartitionReport {
            sum_error_inside: 0.0,
            max_sum_outside: 0.0,
            min_weight: f64::INFINITY,
            max_weight: f64::NEG_INFINITY,
            ok: false,
        };
        for p in closure_samples(omega)? {
            let w = self.weights_at(&p)?;
            rep.sum_error_inside = rep.sum_error_inside.max((w.iter().sum::<f64>() - 1.0).abs());
            for v in w {
                rep.min_weight = rep.min_weight.min(v);
                rep.max_weight = rep.max_weight.max(v);
            }
        }
        for p in outside {
            let w = self.weights_at(p)?;
            rep.max_sum_outside = rep.max_sum_outside.max(w.iter().sum());
        }
        rep.ok = rep.sum_error_inside <= 1e-9
            && rep.max_sum_outside <= 1.0 + 1e-12
            && rep.min_weight >= 0.0
            && rep.max_weight <= 1.0 + 1e-12;
        Ok(rep)
    }
}
