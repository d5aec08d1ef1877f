use std::fs;
use std::path::Path;

use serde::Serialize;

use super::direct::system_matrix;
use super::linear::LinearSolver;
use super::stencil::Discretization;
use crate::elliptic::checks::estimate_omega;
use crate::elliptic::operator::EllipticOperator;
use crate::error::{Error, Result};
use crate::fields::{DomainSpec, GridFunction, NodeKind};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GridFunction>,
    pub omega: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Index<'a> {
    times: &'a [f64],
    norms: Vec<f64>,
    omega: f64,
    dt: f64,
    files: Vec<String>,
}

impl Trajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(GridFunction::sup_norm).collect()
    }

    /// `max_k ||u_k|| - e^{factor omega t_k} ||u_0||`.
    pub fn growth_excess(&self, factor: f64) -> f64 {
        let n0 = self.states[0].sup_norm();
        self.norms()
            .iter()
            .zip(&self.times)
            .map(|(n, t)| n - (factor * self.omega * t).exp() * n0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_k ||u_k|| - (1 - dt omega)^{-k} ||u_0||`, the bound implicit
    /// Euler satisfies exactly.
    pub fn discrete_excess(&self) -> f64 {
        let n0 = self.states[0].sup_norm();
        let q = 1.0 / (1.0 - self.dt * self.omega);
        self.norms()
            .iter()
            .enumerate()
            .map(|(k, n)| n - q.powi(k as i32) * n0)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// One CSV per time slice plus `index.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.states.len());
        for (k, s) in self.states.iter().enumerate() {
            let name = format!("state_{k:05}.csv");
            s.write_csv(&dir.join(&name))?;
            files.push(name);
        }
        let index = Index {
            times: &self.times,
            norms: self.norms(),
            omega: self.omega,
            dt: self.dt,
            files,
        };
        fs::write(dir.join("index.json"), serde_json::to_string_pretty(&index)? + "\n")?;
        Ok(())
    }
}

/// Implicit Euler for `u' = Lu`, `u = 0` on the boundary:
/// `(I - dt L_h) u_{k+1} = u_k`, factored once.
pub fn evolve(
    op: &EllipticOperator,
    u0: &GridFunction,
    domain: &DomainSpec,
    dt: f64,
    t_final: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::invalid("dt", "needs dt > 0 and T >= 0"));
    }
    let disc = Discretization::on_mesh(op, domain, u0.mesh.clone())?;
    let omega = estimate_omega(op, domain, u0.h())?;
    if !(1.0 / dt > omega) {
        return Err(Error::StepTooLarge { dt, omega });
    }
    for (i, k) in disc.kinds.iter().enumerate() {
        let v = u0.values()[i];
        if *k != NodeKind::Interior && v.abs() > 1e-9 {
            return Err(Error::Inadmissible {
                what: "u0 must vanish on the boundary".into(),
                residual: v.abs(),
                tolerance: 1e-9,
            });
        }
    }
    let solver = LinearSolver::new(system_matrix(&disc, 1.0, -dt))?;
    let steps = (t_final / dt).round() as usize;
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut rhs: Vec<f64> = disc.interior_nodes().map(|i| u0.values()[i]).collect();
    for k in 1..=steps {
        let (x, _) = solver.solve(&rhs)?;
        let mut v = vec![0.0; disc.mesh.len()];
        for (r, &xi) in disc.rows.iter().zip(&x) {
            v[r.node] = xi;
        }
        states.push(GridFunction::new(disc.mesh.clone(), v)?);
        times.push(k as f64 * dt);
        rhs = x;
    }
    Ok(Trajectory {
        times,
        states,
        omega,
        dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ScalarField;

    fn sine(h: f64) -> (GridFunction, DomainSpec) {
        let d = DomainSpec::unit_box(1);
        let u = GridFunction::from_field(d.mesh(h).unwrap(), &ScalarField::parse("sin(pi*x1)", 1).unwrap())
            .unwrap();
        // clean round-off at x = 1
        (u.map(|v| if v.abs() < 1e-12 { 0.0 } else { v }), d)
    }

    #[test]
    fn eigenfunction_decay() {
        let (u0, d) = sine(1e-2);
        let dt = 1e-2;
        let t = evolve(&EllipticOperator::laplacian(1), &u0, &d, dt, 0.5).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        for (k, n) in t.norms().iter().enumerate() {
            let expect = (1.0 + pi2 * dt).powi(-(k as i32));
            assert!((n / expect - 1.0).abs() < 0.02);
        }
        assert!(t.norms().windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn semigroup_property() {
        let (u0, d) = sine(0.05);
        let l = EllipticOperator::laplacian(1);
        let full = evolve(&l, &u0, &d, 0.01, 0.2).unwrap();
        let first = evolve(&l, &u0, &d, 0.01, 0.1).unwrap();
        let second = evolve(&l, first.states.last().unwrap(), &d, 0.01, 0.1).unwrap();
        let a = full.states.last().unwrap().values();
        let b = second.states.last().unwrap().values();
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn growth_with_positive_c() {
        let (u0, d) = sine(0.05);
        let l = EllipticOperator::constant(&[vec![1.0]], &[0.0], 1.0).unwrap();
        let t = evolve(&l, &u0, &d, 0.01, 1.0).unwrap();
        assert_eq!(t.omega, 1.0);
        assert!(t.discrete_excess() <= 1e-12);
        assert!(t.growth_excess(1.05) <= 1e-9);
    }

    #[test]
    fn zero_stays_zero_and_large_steps_fail() {
        let d = DomainSpec::unit_box(1);
        let z = GridFunction::zeros(d.mesh(0.1).unwrap());
        let t = evolve(&EllipticOperator::laplacian(1), &z, &d, 0.1, 1.0).unwrap();
        assert!(t.states.iter().all(|s| s.sup_norm() == 0.0));
        let l = EllipticOperator::constant(&[vec![1.0]], &[0.0], 20.0).unwrap();
        assert!(matches!(evolve(&l, &z, &d, 0.1, 1.0), Err(Error::StepTooLarge { .. })));
    }
}
