use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::domain::{dist, DomainSpec};
use super::grid::GridFunction;
use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// Above this many points the Hölder quotient is sampled instead of exhaustive.
pub const ALL_PAIRS_LIMIT: usize = 20_000;
const RANDOM_PAIRS: usize = 2_000_000;

/// Point samples of a scalar function.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl Samples {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Samples> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: values.len(),
            });
        }
        Ok(Samples { points, values })
    }

    /// Samples of `u` at the mesh nodes of the closed domain.
    pub fn from_field(u: &ScalarField, domain: &DomainSpec, h: f64) -> Result<Samples> {
        let mesh = domain.mesh(h)?;
        let points: Vec<Vec<f64>> = mesh.points().filter(|p| domain.contains_closed(p)).collect();
        let values = points
            .iter()
            .map(|p| u.try_value(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Samples { points, values })
    }

    /// Grid values restricted to nodes of the closed domain.
    pub fn from_grid(g: &GridFunction, domain: Option<&DomainSpec>) -> Samples {
        let mut s = Samples::default();
        for (i, &v) in g.values().iter().enumerate() {
            let p = g.mesh.point(i);
            if domain.is_none_or(|d| d.contains_closed(&p)) {
                s.points.push(p);
                s.values.push(v);
            }
        }
        s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn sup_norm(s: &Samples) -> Result<f64> {
    if s.is_empty() {
        return Err(Error::EmptySamples);
    }
    Ok(s.values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Sup norm of a field over the closed-domain nodes of the mesh with spacing `h`.
pub fn field_sup_norm(u: &ScalarField, domain: &DomainSpec, h: f64) -> Result<f64> {
    sup_norm(&Samples::from_field(u, domain, h)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairStrategy {
    /// All pairs up to `ALL_PAIRS_LIMIT` points, sampled pairs beyond.
    Auto { seed: u64 },
    AllPairs,
}

impl Default for PairStrategy {
    fn default() -> Self {
        PairStrategy::Auto { seed: 0 }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("{alpha} is not in (0, 1]")));
    }
    Ok(())
}

/// Pairs used for sampled quotients: exhaustive for small sets, otherwise
/// random pairs plus all spatial-hash neighbor pairs.
fn candidate_pairs(points: &[Vec<f64>], strategy: PairStrategy) -> Option<Vec<(usize, usize)>> {
    let n = points.len();
    let seed = match strategy {
        PairStrategy::AllPairs => return None,
        PairStrategy::Auto { .. } if n <= ALL_PAIRS_LIMIT => return None,
        PairStrategy::Auto { seed } => seed,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..RANDOM_PAIRS)
        .map(|_| (rng.gen_range(0..n), rng.gen_range(0..n)))
        .filter(|(a, b)| a != b)
        .collect();
    let dim = points[0].len();
    let mut lo = points[0].clone();
    let mut hi = points[0].clone();
    for p in points {
        for k in 0..dim {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let vol: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).max(1e-12)).product();
    let cell = (2.0 * vol / n as f64).powf(1.0 / dim as f64);
    let key = |p: &[f64]| -> Vec<i64> {
        p.iter().zip(&lo).map(|(x, l)| ((x - l) / cell).floor() as i64).collect()
    };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let offsets = super::domain::neighborhood(dim);
    for (i, p) in points.iter().enumerate() {
        let k = key(p);
        let own = buckets.get(&k).into_iter().flatten();
        let near = offsets.iter().flat_map(|o| {
            let kk: Vec<i64> = k.iter().zip(o).map(|(a, b)| a + *b as i64).collect();
            buckets.get(&kk).cloned().unwrap_or_default()
        });
        for j in own.copied().chain(near) {
            if j > i {
                pairs.push((i, j));
            }
        }
    }
    Some(pairs)
}

fn max_quotient(
    points: &[Vec<f64>],
    diff: impl Fn(usize, usize) -> f64 + Sync,
    weight: impl Fn(usize, usize, f64) -> f64 + Sync,
    strategy: PairStrategy,
) -> f64 {
    let n = points.len();
    match candidate_pairs(points, strategy) {
        None => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut m = 0.0f64;
                for j in (i + 1)..n {
                    let d = dist(&points[i], &points[j]);
                    if d > 0.0 {
                        m = m.max(weight(i, j, d) * diff(i, j));
                    }
                }
                m
            })
            .reduce(|| 0.0, f64::max),
        Some(pairs) => pairs
            .par_iter()
            .map(|&(i, j)| {
                let d = dist(&points[i], &points[j]);
                if d > 0.0 {
                    weight(i, j, d) * diff(i, j)
                } else {
                    0.0
                }
            })
            .reduce(|| 0.0, f64::max),
    }
}

/// Largest sampled `|u(x) - u(y)| / |x - y|^alpha`: a lower bound for the seminorm.
pub fn holder_seminorm(s: &Samples, alpha: f64, strategy: PairStrategy) -> Result<f64> {
    check_alpha(alpha)?;
    if s.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let v = &s.values;
    Ok(max_quotient(
        &s.points,
        |i, j| (v[i] - v[j]).abs(),
        |_, _, d| d.powf(-alpha),
        strategy,
    ))
}

/// Part of a box boundary, as a list of `(axis, upper_face)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryPortion {
    pub faces: Vec<(usize, bool)>,
}

/// Distance weight `d(x, boundary minus portion)`.
fn weight_fn<'a>(
    domain: &'a DomainSpec,
    portion: Option<&'a BoundaryPortion>,
) -> Result<Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>> {
    let Some(portion) = portion else {
        return Ok(Box::new(move |x: &[f64]| {
            if domain.contains(x) {
                domain.distance_to_boundary(x)
            } else {
                0.0
            }
        }));
    };
    let (lo, hi) = domain
        .as_box()
        .ok_or_else(|| Error::invalid("boundary_portion", "only supported for box domains"))?;
    let n = lo.len();
    let remaining: Vec<(usize, bool)> = (0..n)
        .flat_map(|a| [(a, false), (a, true)])
        .filter(|f| !portion.faces.contains(f))
        .collect();
    Ok(Box::new(move |x: &[f64]| {
        remaining
            .iter()
            .map(|&(a, up)| {
                // distance to the closed face rectangle
                let mut s = 0.0;
                for k in 0..n {
                    let d = if k == a {
                        x[k] - if up { hi[k] } else { lo[k] }
                    } else {
                        (lo[k] - x[k]).max(x[k] - hi[k]).max(0.0)
                    };
                    s += d * d;
                }
                s.sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }))
}

fn weighted_pow(d: f64, beta: f64) -> f64 {
    if beta == 0.0 {
        1.0
    } else {
        d.powf(beta)
    }
}

/// `sup d(x)^beta |u(x)|` over the closed-domain mesh nodes.
pub fn weighted_interior_norm(
    u: &ScalarField,
    domain: &DomainSpec,
    beta: f64,
    h: f64,
    portion: Option<&BoundaryPortion>,
) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::invalid("beta", format!("{beta} must be nonnegative")));
    }
    let s = Samples::from_field(u, domain, h)?;
    if s.is_empty() {
        return Err(Error::EmptySamples);
    }
    let w = weight_fn(domain, portion)?;
    Ok(s
        .points
        .iter()
        .zip(&s.values)
        .map(|(p, v)| weighted_pow(w(p), beta) * v.abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NormReport {
    pub sup_norm: f64,
    pub alpha: f64,
    pub holder_seminorm: f64,
    /// Keyed by `"order=k,beta=b"`; `"holder,beta=b"` for the weighted quotient.
    pub weighted: BTreeMap<String, f64>,
    /// The primed C^{2,alpha} norm (sum of the four weighted terms).
    pub primed_c2alpha: f64,
    pub sample_count: usize,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Sampled norms of `u` over the domain, including the primed
/// C^{2,alpha} norm. The weighted Hölder quotient uses
/// `min(d(x), d(y))^(2+alpha)` as the pair weight.
pub fn norm_report(
    u: &ScalarField,
    domain: &DomainSpec,
    alpha: f64,
    h: f64,
    portion: Option<&BoundaryPortion>,
    strategy: PairStrategy,
) -> Result<NormReport> {
    check_alpha(alpha)?;
    let s = Samples::from_field(u, domain, h)?;
    if s.len() < 2 {
        return Err(Error::EmptySamples);
    }
    let w = weight_fn(domain, portion)?;
    let d: Vec<f64> = s.points.iter().map(|p| w(p)).collect();
    let jets = s
        .points
        .iter()
        .map(|p| u.jet(p))
        .collect::<Result<Vec<_>>>()?;
    let sup = sup_norm(&s)?;
    let holder = holder_seminorm(&s, alpha, strategy)?;
    let grad_w = jets
        .iter()
        .zip(&d)
        .map(|(j, &di)| di * crate::fields::domain::norm(&j.gradient))
        .fold(0.0, f64::max);
    let hess_flat: Vec<Vec<f64>> = jets
        .iter()
        .map(|j| j.hessian.iter().flatten().copied().collect())
        .collect();
    let hess_w = hess_flat
        .iter()
        .zip(&d)
        .map(|(hf, &di)| di * di * max_abs(hf))
        .fold(0.0, f64::max);
    let hess_holder = max_quotient(
        &s.points,
        |i, j| {
            hess_flat[i]
                .iter()
                .zip(&hess_flat[j])
                .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
        },
        |i, j, dd| d[i].min(d[j]).powf(2.0 + alpha) * dd.powf(-alpha),
        strategy,
    );
    let mut weighted = BTreeMap::new();
    weighted.insert("order=0,beta=0".to_string(), sup);
    weighted.insert("order=1,beta=1".to_string(), grad_w);
    weighted.insert("order=2,beta=2".to_string(), hess_w);
    weighted.insert(format!("holder2,beta={}", 2.0 + alpha), hess_holder);
    Ok(NormReport {
        sup_norm: sup,
        alpha,
        holder_seminorm: holder,
        primed_c2alpha: sup + grad_w + hess_w + hess_holder,
        weighted,
        sample_count: s.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> DomainSpec {
        DomainSpec::interval(0.0, 1.0).unwrap()
    }

    #[test]
    fn sup_norm_examples() {
        let d = unit();
        let zero = ScalarField::constant(0.0, 1);
        assert_eq!(field_sup_norm(&zero, &d, 0.01).unwrap(), 0.0);
        let id = ScalarField::parse("x1", 1).unwrap();
        assert_eq!(field_sup_norm(&id, &d, 0.01).unwrap(), 1.0);
        let s = ScalarField::parse("sin(pi*x1)", 1).unwrap();
        assert!((field_sup_norm(&s, &d, 1e-3).unwrap() - 1.0).abs() < 1e-5);
        assert!(matches!(sup_norm(&Samples::default()), Err(Error::EmptySamples)));
    }

    #[test]
    fn holder_examples() {
        let d = unit();
        let id = Samples::from_field(&ScalarField::parse("x1", 1).unwrap(), &d, 0.01).unwrap();
        assert!((holder_seminorm(&id, 1.0, PairStrategy::default()).unwrap() - 1.0).abs() < 1e-12);
        let c = Samples::from_field(&ScalarField::constant(3.0, 1), &d, 0.01).unwrap();
        assert_eq!(holder_seminorm(&c, 0.3, PairStrategy::default()).unwrap(), 0.0);
        assert!(holder_seminorm(&c, 0.0, PairStrategy::default()).is_err());
        assert!(holder_seminorm(&c, 1.5, PairStrategy::default()).is_err());
    }

    #[test]
    fn weighted_examples() {
        let d = unit();
        let one = ScalarField::constant(1.0, 1);
        assert!((weighted_interior_norm(&one, &d, 1.0, 0.01, None).unwrap() - 0.5).abs() < 1e-12);
        assert!((weighted_interior_norm(&one, &d, 2.0, 0.01, None).unwrap() - 0.25).abs() < 1e-12);
        let id = ScalarField::parse("x1", 1).unwrap();
        assert_eq!(
            weighted_interior_norm(&id, &d, 0.0, 0.01, None).unwrap(),
            field_sup_norm(&id, &d, 0.01).unwrap()
        );
        assert!(weighted_interior_norm(&one, &d, -1.0, 0.01, None).is_err());
    }

    #[test]
    fn portion_removes_a_face() {
        let d = unit();
        let one = ScalarField::constant(1.0, 1);
        let t = BoundaryPortion {
            faces: vec![(0, true)],
        };
        // distance to {0} only, so the sup of d is attained at x = 1
        let v = weighted_interior_norm(&one, &d, 1.0, 0.01, Some(&t)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_strategy_finds_near_diagonal_pairs() {
        // sqrt has its steepest quotient next to 0, which neighbor pairs catch
        let pts: Vec<Vec<f64>> = (0..30_001).map(|i| vec![i as f64 / 30_000.0]).collect();
        let vals = pts.iter().map(|p| p[0].sqrt()).collect();
        let s = Samples::new(pts, vals).unwrap();
        let q = holder_seminorm(&s, 0.5, PairStrategy::Auto { seed: 1 }).unwrap();
        assert!(q > 0.99 && q <= 1.0 + 1e-12, "{q}");
    }

    #[test]
    fn primed_norm_of_quadratic() {
        let d = unit();
        let u = ScalarField::parse("x1^2", 1).unwrap();
        let r = norm_report(&u, &d, 0.5, 0.01, None, PairStrategy::default()).unwrap();
        // sup |u| = 1, sup d|u'| = max x(1-x)... attained where d*2x is largest
        assert!((r.sup_norm - 1.0).abs() < 1e-12);
        assert!((r.weighted["order=2,beta=2"] - 0.5).abs() < 1e-12);
        assert!(r.weighted["holder2,beta=2.5"].abs() < 1e-9);
        assert!(r.primed_c2alpha > r.sup_norm);
    }
}
