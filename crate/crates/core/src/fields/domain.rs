use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::Mesh;
use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// Region given by a level set `phi < 0`, with a dense sample of its boundary.
#[derive(Debug)]
pub struct LevelSetShape {
    pub level: ScalarField,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub boundary: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum Shape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `(-R, R)^(n-1) x (0, R)`.
    HalfCuboid { dim: usize, half_width: f64 },
    ChartAtlas(Arc<LevelSetShape>),
}

/// A bounded open region with its boundary regularity (`k + alpha`).
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub shape: Shape,
    pub boundary_order: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Strictly inside, with the whole 3^n neighborhood in the closed domain.
    Interior,
    /// In the closed domain but not interior; carries Dirichlet data.
    Boundary,
    Exterior,
}

const EDGE_TOL: f64 = 1e-12;

impl DomainSpec {
    pub fn unit_box(n: usize) -> DomainSpec {
        DomainSpec::cuboid(vec![0.0; n], vec![1.0; n]).expect("valid box")
    }

    pub fn cuboid(lo: Vec<f64>, hi: Vec<f64>) -> Result<DomainSpec> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::invalid("box", "needs finite lo < hi on every axis"));
        }
        Ok(DomainSpec {
            shape: Shape::Box { lo, hi },
            boundary_order: f64::INFINITY,
        })
    }

    pub fn interval(a: f64, b: f64) -> Result<DomainSpec> {
        DomainSpec::cuboid(vec![a], vec![b])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<DomainSpec> {
        if !(radius > 0.0 && radius.is_finite()) || center.is_empty() {
            return Err(Error::invalid("radius", format!("{radius} must be positive")));
        }
        Ok(DomainSpec {
            shape: Shape::Ball { center, radius },
            boundary_order: f64::INFINITY,
        })
    }

    pub fn half_cuboid(dim: usize, half_width: f64) -> Result<DomainSpec> {
        if dim == 0 || !(half_width > 0.0) {
            return Err(Error::invalid("half_width", "must be positive"));
        }
        Ok(DomainSpec {
            shape: Shape::HalfCuboid { dim, half_width },
            boundary_order: f64::INFINITY,
        })
    }

    pub fn level_set(
        level: ScalarField,
        lo: Vec<f64>,
        hi: Vec<f64>,
        boundary: Vec<Vec<f64>>,
        boundary_order: f64,
    ) -> Result<DomainSpec> {
        if boundary.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(DomainSpec {
            shape: Shape::ChartAtlas(Arc::new(LevelSetShape {
                level,
                lo,
                hi,
                boundary,
            })),
            boundary_order,
        })
    }

    pub fn with_boundary_order(mut self, order: f64) -> DomainSpec {
        self.boundary_order = order;
        self
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lo, .. } => lo.len(),
            Shape::Ball { center, .. } => center.len(),
            Shape::HalfCuboid { dim, .. } => *dim,
            Shape::ChartAtlas(s) => s.lo.len(),
        }
    }

    /// Box corners for box-like shapes.
    pub fn as_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match &self.shape {
            Shape::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            Shape::HalfCuboid { dim, half_width } => {
                let mut lo = vec![-half_width; *dim];
                let hi = vec![*half_width; *dim];
                lo[dim - 1] = 0.0;
                Some((lo, hi))
            }
            _ => None,
        }
    }

    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        if let Some(b) = self.as_box() {
            return b;
        }
        match &self.shape {
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::ChartAtlas(s) => (s.lo.clone(), s.hi.clone()),
            _ => unreachable!(),
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.iter().zip(&hi).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt()
    }

    fn scale(&self) -> f64 {
        self.diameter().max(1.0)
    }

    /// Signed distance-like quantity: negative inside, positive outside.
    /// Exact for boxes and balls.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        if let Some((lo, hi)) = self.as_box() {
            let mut outside = 0.0;
            let mut inside = f64::INFINITY;
            for k in 0..lo.len() {
                let d = (lo[k] - x[k]).max(x[k] - hi[k]);
                if d > 0.0 {
                    outside += d * d;
                }
                inside = inside.min(-d);
            }
            return if outside > 0.0 { outside.sqrt() } else { -inside };
        }
        match &self.shape {
            Shape::Ball { center, radius } => dist(x, center) - radius,
            Shape::ChartAtlas(s) => {
                let d = s
                    .boundary
                    .iter()
                    .map(|b| dist(x, b))
                    .fold(f64::INFINITY, f64::min);
                if s.level.value(x) < 0.0 {
                    -d
                } else {
                    d
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.signed_distance(x).abs()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance(x) < -EDGE_TOL * self.scale()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        self.signed_distance(x) <= EDGE_TOL * self.scale()
    }

    pub fn mesh(&self, h: f64) -> Result<Mesh> {
        let (lo, hi) = self.bbox();
        Mesh::covering(&lo, &hi, h)
    }

    pub fn classify(&self, mesh: &Mesh) -> Vec<NodeKind> {
        let n = mesh.dim();
        let closed: Vec<bool> = mesh.points().map(|p| self.contains_closed(&p)).collect();
        let offsets = neighborhood(n);
        (0..mesh.len())
            .map(|i| {
                if !closed[i] {
                    return NodeKind::Exterior;
                }
                let p = mesh.point(i);
                if !self.contains(&p) {
                    return NodeKind::Boundary;
                }
                let all = offsets
                    .iter()
                    .all(|o| mesh.offset(i, o).is_some_and(|j| closed[j]));
                if all {
                    NodeKind::Interior
                } else {
                    NodeKind::Boundary
                }
            })
            .collect()
    }

    /// Deterministic boundary sample with roughly `per_unit` points per unit length.
    pub fn boundary_samples(&self, per_unit: usize) -> Vec<Vec<f64>> {
        let per_unit = per_unit.max(2);
        if let Some((lo, hi)) = self.as_box() {
            return box_boundary(&lo, &hi, per_unit);
        }
        match &self.shape {
            Shape::Ball { center, radius } => sphere_points(center, *radius, per_unit),
            Shape::ChartAtlas(s) => s.boundary.clone(),
            _ => unreachable!(),
        }
    }

    /// Ball of radius `radius` touching the closed domain only at `x0`.
    /// `None` for shapes without a closed-form construction.
    pub fn external_sphere(&self, x0: &[f64], radius: f64) -> Option<(Vec<f64>, f64)> {
        if let Some((lo, hi)) = self.as_box() {
            let tol = 1e-9 * self.scale();
            let mut normal = vec![0.0; lo.len()];
            for k in 0..lo.len() {
                if (x0[k] - lo[k]).abs() < tol {
                    normal[k] = -1.0;
                } else if (x0[k] - hi[k]).abs() < tol {
                    normal[k] = 1.0;
                }
            }
            let len = norm(&normal);
            if len == 0.0 {
                return None;
            }
            let y = x0
                .iter()
                .zip(&normal)
                .map(|(x, v)| x + radius * v / len)
                .collect();
            return Some((y, radius));
        }
        match &self.shape {
            Shape::Ball { center, radius: r } => {
                let d = dist(x0, center);
                if d == 0.0 {
                    return None;
                }
                let y = x0
                    .iter()
                    .zip(center)
                    .map(|(x, c)| c + (r + radius) * (x - c) / d)
                    .collect();
                Some((y, radius))
            }
            _ => None,
        }
    }

    /// Uniform random points of the open domain (rejection from the bounding box).
    pub fn sample_interior(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bbox();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count && tries < 1000 * count.max(1) {
            tries += 1;
            let p: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(*a..*b)).collect();
            if self.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    /// Largest `m` with `{x : d(x, self) <= m}` inside `outer`; at most 0 when
    /// `self` is not compactly inside.
    pub fn margin_inside(&self, outer: &DomainSpec) -> f64 {
        match (&self.shape, self.as_box()) {
            (Shape::Ball { center, radius }, _) => -outer.signed_distance(center) - radius,
            (_, Some((lo, hi))) => {
                // the worst point of a box against a convex outer set is a corner
                let n = lo.len();
                (0..1usize << n)
                    .map(|mask| {
                        let corner: Vec<f64> = (0..n)
                            .map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] })
                            .collect();
                        -outer.signed_distance(&corner)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
            _ => {
                let s = self.boundary_samples(64);
                s.iter()
                    .map(|p| -outer.signed_distance(p))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

pub(crate) fn neighborhood(n: usize) -> Vec<Vec<isize>> {
    (0..3usize.pow(n as u32))
        .filter_map(|mut c| {
            let mut o = vec![0isize; n];
            for k in (0..n).rev() {
                o[k] = (c % 3) as isize - 1;
                c /= 3;
            }
            o.iter().any(|&v| v != 0).then_some(o)
        })
        .collect()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn box_boundary(lo: &[f64], hi: &[f64], per_unit: usize) -> Vec<Vec<f64>> {
    let n = lo.len();
    if n == 1 {
        return vec![vec![lo[0]], vec![hi[0]]];
    }
    let counts: Vec<usize> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| (((b - a) * per_unit as f64).ceil() as usize).max(2) + 1)
        .collect();
    let mut out = Vec::new();
    for axis in 0..n {
        for side in [lo[axis], hi[axis]] {
            let others: Vec<usize> = (0..n).filter(|&k| k != axis).collect();
            let total: usize = others.iter().map(|&k| counts[k]).product();
            for mut c in 0..total {
                let mut p = vec![0.0; n];
                p[axis] = side;
                for &k in others.iter().rev() {
                    let i = c % counts[k];
                    c /= counts[k];
                    p[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (counts[k] - 1) as f64;
                }
                out.push(p);
            }
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup();
    out
}

fn sphere_points(center: &[f64], r: f64, per_unit: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    match n {
        1 => vec![vec![center[0] - r], vec![center[0] + r]],
        2 => {
            let m = ((2.0 * PI * r * per_unit as f64).ceil() as usize).max(8);
            (0..m)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / m as f64;
                    vec![center[0] + r * t.cos(), center[1] + r * t.sin()]
                })
                .collect()
        }
        _ => {
            // Fibonacci lattice in 3D, Gaussian directions otherwise
            let m = ((4.0 * PI * (r * per_unit as f64).powi(2)).ceil() as usize).max(32);
            if n == 3 {
                let golden = PI * (3.0 - 5f64.sqrt());
                (0..m)
                    .map(|k| {
                        let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                        let s = (1.0 - z * z).sqrt();
                        let t = golden * k as f64;
                        vec![
                            center[0] + r * s * t.cos(),
                            center[1] + r * s * t.sin(),
                            center[2] + r * z,
                        ]
                    })
                    .collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
                (0..m)
                    .map(|_| {
                        let v: Vec<f64> = (0..n)
                            .map(|_| {
                                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                                (-2.0 * (1.0 - a).ln()).sqrt() * (2.0 * PI * b).cos()
                            })
                            .collect();
                        let l = norm(&v);
                        v.iter().zip(center).map(|(x, c)| c + r * x / l).collect()
                    })
                    .collect()
            }
        }
    }
}
