use rayon::prelude::*;
use serde::Serialize;

use super::direct::{boundary_values, check_nonpositive_c};
use super::lift::{Ball, LocalProblem};
use super::stencil::Discretization;
use crate::elliptic::comparison::build_comparison_pair;
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::domain::dist;
use crate::fields::{DomainSpec, GridFunction, NodeKind, ScalarField};

#[derive(Debug, Clone)]
pub struct PerronOptions {
    pub max_sweeps: usize,
    pub tol: f64,
    /// Defaults to [`default_cover`].
    pub cover: Option<Vec<Ball>>,
}

impl Default for PerronOptions {
    fn default() -> Self {
        PerronOptions {
            max_sweeps: 20_000,
            tol: 1e-6,
            cover: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerronState {
    /// Running maximum of the liftings, a discrete subsolution.
    pub current: GridFunction,
    pub ball_cover: Vec<Ball>,
    pub sweep_count: usize,
    pub last_increment: f64,
    pub increments: Vec<f64>,
    /// Ratio of the last two increments.
    pub rate: Option<f64>,
    pub converged: bool,
    pub colors: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PerronSummary {
    pub sweep_count: usize,
    pub last_increment: f64,
    pub rate: Option<f64>,
    pub converged: bool,
    pub balls: usize,
    pub colors: usize,
}

impl PerronState {
    pub fn summary(&self) -> PerronSummary {
        PerronSummary {
            sweep_count: self.sweep_count,
            last_increment: self.last_increment,
            rate: self.rate,
            converged: self.converged,
            balls: self.ball_cover.len(),
            colors: self.colors,
        }
    }
}

/// Balls of radius `min(4h, 0.999 d(c))` centered at the interior nodes with
/// even multi-index, plus a ball around each interior node left uncovered.
pub fn default_cover(disc: &Discretization, domain: &DomainSpec) -> Vec<Ball> {
    let h = disc.mesh.h;
    let ball_at = |c: Vec<f64>| {
        let r = (4.0 * h).min(0.999 * domain.distance_to_boundary(&c));
        Ball::new(c, r)
    };
    let mut cover: Vec<Ball> = disc
        .interior_nodes()
        .filter(|&i| disc.mesh.multi_index(i).iter().all(|m| m % 2 == 0))
        .map(|i| ball_at(disc.mesh.point(i)))
        .collect();
    for i in disc.interior_nodes() {
        let p = disc.mesh.point(i);
        if !cover.iter().any(|b| b.contains(&p)) {
            cover.push(ball_at(p));
        }
    }
    cover
}

/// Greedy coloring: balls of one color have disjoint stencil footprints.
fn color(cover: &[Ball], h: f64, n: usize) -> Vec<Vec<usize>> {
    let reach = 2.0 * h * (n as f64).sqrt();
    let mut colors: Vec<Vec<usize>> = Vec::new();
    for (i, b) in cover.iter().enumerate() {
        let free = colors.iter_mut().find(|c| {
            c.iter().all(|&j| {
                let o = &cover[j];
                dist(&b.center, &o.center) >= b.radius + o.radius + reach
            })
        });
        match free {
            Some(c) => c.push(i),
            None => colors.push(vec![i]),
        }
    }
    colors
}

#[derive(Debug, Clone)]
pub struct PerronSolution {
    pub u: GridFunction,
    pub state: PerronState,
}

/// Perron iteration: start from the lower comparison function (with `g` on
/// the boundary nodes) and replace `u` by `max(u, lift_B(u))` ball by ball.
///
/// Stops once the sweep increment `d` and the tail estimate
/// `d rho / (1 - rho)`, `rho` the ratio of consecutive increments, are both
/// below `tol`.
pub fn perron_solve(
    op: &EllipticOperator,
    f: &ScalarField,
    g: &ScalarField,
    domain: &DomainSpec,
    h: f64,
    opts: &PerronOptions,
) -> Result<PerronSolution> {
    let disc = Discretization::new(op, domain, h)?;
    check_nonpositive_c(op, &disc)?;
    let n = disc.mesh.dim();
    let cover = match &opts.cover {
        Some(c) => c.clone(),
        None => default_cover(&disc, domain),
    };
    for b in &cover {
        if !b.inside(domain) {
            return Err(Error::BallNotInside {
                center: b.center.clone(),
                radius: b.radius,
            });
        }
    }
    for i in disc.interior_nodes() {
        let p = disc.mesh.point(i);
        if !cover.iter().any(|b| b.contains(&p)) {
            return Err(Error::Uncovered { point: p });
        }
    }
    let fv: Vec<f64> = disc
        .interior_nodes()
        .map(|i| f.try_value(&disc.mesh.point(i)))
        .collect::<Result<_>>()?;
    let problems = cover
        .par_iter()
        .map(|b| LocalProblem::new(&disc, &fv, b))
        .collect::<Result<Vec<_>>>()?;
    let colors = color(&cover, h, n);

    let pair = build_comparison_pair(op, f, g, domain, h)?;
    let mut v = boundary_values(&disc, g)?;
    let mut upper = vec![f64::INFINITY; v.len()];
    for (i, k) in disc.kinds.iter().enumerate() {
        if *k == NodeKind::Interior {
            let p = disc.mesh.point(i);
            v[i] = pair.v_minus.try_value(&p)?;
            upper[i] = pair.v_plus.try_value(&p)?;
        }
    }
    let scale = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let slack = 1e-9 * scale;

    let mut increments = Vec::new();
    let mut converged = false;
    for sweep in 1..=opts.max_sweeps {
        let mut inc = 0.0f64;
        for group in &colors {
            let lifts: Vec<Vec<f64>> = group.par_iter().map(|&b| problems[b].solve(&v)).collect();
            for (&b, new) in group.iter().zip(lifts) {
                for (&i, x) in problems[b].nodes.iter().zip(new) {
                    let d = x - v[i];
                    if d < -slack {
                        return Err(Error::Monotonicity { sweep, decrease: -d });
                    }
                    if d > 0.0 {
                        v[i] = x;
                        inc = inc.max(d);
                    }
                    if v[i] > upper[i] + slack {
                        return Err(Error::ComparisonViolated {
                            sweep,
                            excess: v[i] - upper[i],
                        });
                    }
                }
            }
        }
        increments.push(inc);
        let rate = rate_of(&increments);
        let tail = match rate {
            Some(r) if r < 1.0 => inc * r / (1.0 - r),
            _ => f64::INFINITY,
        };
        if inc < opts.tol && (tail < opts.tol || inc == 0.0) {
            converged = true;
            break;
        }
    }
    let current = GridFunction::new(disc.mesh.clone(), v)?;
    let state = PerronState {
        current: current.clone(),
        ball_cover: cover,
        sweep_count: increments.len(),
        last_increment: increments.last().copied().unwrap_or(0.0),
        rate: rate_of(&increments),
        increments,
        converged,
        colors: colors.len(),
    };
    Ok(PerronSolution { u: current, state })
}

fn rate_of(inc: &[f64]) -> Option<f64> {
    match inc {
        [.., a, b] if *a > 0.0 => Some(b / a),
        _ => None,
    }
}
