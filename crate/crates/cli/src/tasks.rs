use std::path::Path;

use anyhow::{bail, Context, Result};
use ellipt_core::elliptic::{build_comparison_pair, estimate_omega};
use ellipt_core::extension::{
    build_partition, circle_seam, extend_1d, extend_global, extend_halfspace,
    unit_disk_atlas, verify_extension_smoothness, Seam,
};
use ellipt_core::fields::{NodeKind, Shape};
use ellipt_core::solver::{
    boundary_attainment_check, direct_solve, evolve, perron_solve, resolvent_solve,
    PerronOptions, Solution,
};
use ellipt_core::{DomainSpec, EllipticOperator, Error, GridFunction, Mesh, ScalarField};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::report::{fmt_f64, Check, Results};
use crate::scenario::{Problem, Task};

const ADMISSIBLE: &str = "the reflection extension needs u = 0 and Lu = 0 on the boundary";
const SUP_NORM: &str = "the reflection extension preserves the sup norm";
const SEAM: &str = "the extension is C2 across the boundary";
const PARTITION: &str = "the partition of unity sums to one on the closure";
const CROSS_TERMS: &str = "the flattening map removes the mixed terms a_in on the boundary";
const RESIDUAL: &str = "the discrete equation L_h u = f holds at interior nodes";
const MAX_PRINCIPLE: &str = "weak maximum principle for L u = f";
const SANDWICH: &str = "comparison functions bracket the solution";
const SUP_BOUND: &str = "a priori sup bound from the comparison functions";
const EXACT: &str = "agreement with the known solution";
const BARRIER: &str = "barriers at boundary points squeeze the solution onto g";
const PERRON_MONOTONE: &str = "Perron sweeps are nondecreasing and stay below the upper comparison function";
const PERRON_CONVERGED: &str = "the Perron iteration converges";
const PERRON_DIRECT: &str = "the Perron solution equals the direct solution";
const CONTRACTION: &str = "resolvent estimate (mu - omega) sup|u| <= sup|f|";
const GROWTH: &str = "semigroup growth bound sup|u(t)| <= exp(omega t) sup|u0|";
const DISCRETE_GROWTH: &str = "implicit Euler growth bound sup|u_k| <= (1 - dt omega)^-k sup|u0|";
const NON_EXPANSION: &str = "contraction semigroup for omega <= 0";

/// Largest Perron problem run inside `verify_all`.
const PERRON_NODE_LIMIT: usize = 41 * 41;

struct Runner<'a> {
    p: &'a Problem,
    out: &'a Path,
    checks: Vec<Check>,
    artifacts: Vec<String>,
}

pub fn run(p: &Problem, out: &Path) -> Result<Results> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut r = Runner {
        p,
        out,
        checks: Vec::new(),
        artifacts: Vec::new(),
    };
    match p.scenario.task {
        Task::Extend => r.extend()?,
        Task::Solve => {
            r.solve()?;
        }
        Task::Perron => r.perron()?,
        Task::Resolvent => r.resolvent()?,
        Task::Evolve => r.evolve()?,
        Task::VerifyAll => {
            r.solve()?;
            if p.domain.mesh(p.h)?.len() <= PERRON_NODE_LIMIT {
                r.perron()?;
            }
            r.resolvent()?;
            if p.u0.is_some() && p.scenario.evolve.is_some() {
                r.evolve()?;
            }
            if p.u.is_some() {
                r.extend()?;
            }
        }
    }
    let passed = r.checks.iter().all(|c| c.passed);
    Ok(Results {
        scenario: p.scenario.name.clone(),
        task: p.scenario.task.name().into(),
        seed: p.scenario.seed,
        mesh: p.h,
        passed,
        checks: r.checks,
        artifacts: r.artifacts,
    })
}

/// Max of `|v|` over nodes in `closed`, and over all nodes.
fn grid_sups(field: &ScalarField, inner: &ScalarField, mesh: &Mesh, inside: impl Fn(&[f64]) -> bool) -> Result<(f64, f64)> {
    let mut sup_in = 0.0f64;
    let mut sup_all = 0.0f64;
    for p in mesh.points() {
        let v = field.try_value(&p)?.abs();
        sup_all = sup_all.max(v);
        if inside(&p) {
            sup_in = sup_in.max(inner.try_value(&p)?.abs());
        }
    }
    Ok((sup_in, sup_all))
}

fn closed_nodes(u: &GridFunction, d: &DomainSpec) -> (Vec<Vec<f64>>, Vec<f64>) {
    (0..u.mesh.len())
        .map(|i| (u.mesh.point(i), u.values()[i]))
        .filter(|(p, _)| d.contains_closed(p))
        .unzip()
}

impl Runner<'_> {
    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn write_grid(&mut self, name: &str, g: &GridFunction) -> Result<()> {
        g.write_csv(&self.out.join(name))?;
        self.artifacts.push(name.into());
        Ok(())
    }

    fn sup_check(&mut self, sup_u: f64, sup_eu: f64) {
        let tol = self.p.scenario.tolerances.sup_ratio;
        let ratio = if sup_u > 0.0 { sup_eu / sup_u } else { f64::NAN };
        self.push(Check::new("extend", "sup_norm_ratio", SUP_NORM, (ratio - 1.0).abs() <= tol)
                .with("sup_u", sup_u)
                .with("sup_eu", sup_eu)
                .with("ratio", ratio)
                .with("tolerance", tol),
        );
    }

    fn inadmissible(&mut self, e: &Error) -> Result<()> {
        let c = Check::new("extend", "admissible_input", ADMISSIBLE, false);
        let c = match e {
            Error::Inadmissible { residual, tolerance, .. } => {
                c.with("residual", *residual).with("tolerance", *tolerance)
            }
            Error::CrossTerms { max_abs } => c.with("cross_terms", *max_abs),
            Error::ChartMembership { failures } => c.with("failing_charts", failures.len() as f64),
            _ => bail!("extension failed: {e}"),
        };
        self.push(c);
        Ok(())
    }

    fn extend(&mut self) -> Result<()> {
        let p = self.p;
        let u = p.u.as_ref().expect("validated");
        let spec = &p.scenario.extension;
        let tol = &p.scenario.tolerances;
        match &p.domain.shape {
            Shape::Box { lo, hi } if lo.len() == 1 => {
                if lo[0] != 0.0 {
                    bail!("1D extension needs the interval [0, L], got [{}, {}]", lo[0], hi[0]);
                }
                let l = hi[0];
                let a = p.op.a[0][0].try_value(&[0.0])?;
                let b = p.op.b[0].try_value(&[0.0])?;
                let e = match extend_1d(u, a, b, spec.radius.min(l), spec.support.unwrap_or(l)) {
                    Ok(e) => e,
                    Err(err) => return self.inadmissible(&err),
                };
                self.push(Check::new("extend", "admissible_input", ADMISSIBLE, e.admissibility.ok())
                        .with("u_at_0", e.admissibility.value)
                        .with("boundary_operator", e.admissibility.condition)
                        .with("delta", e.params.delta),
                );
                let mesh = Mesh::covering(&[-l], &[l], p.h)?;
                let (su, se) = grid_sups(&e.field, u, &mesh, |x| x[0] >= 0.0)?;
                self.sup_check(su, se);
                let seam = verify_extension_smoothness(
                    &e.field,
                    &Seam::new(0, vec![vec![0.0]]),
                    p.scenario.alpha,
                    spec.seam_h,
                )?;
                self.seam_check(seam.second_mismatch, seam.first_mismatch, tol.seam);
                let g = GridFunction::from_field(mesh, &e.field)?;
                self.write_grid("extension.csv", &g)?;
            }
            Shape::HalfCuboid { dim: 2, half_width: w } => {
                let w = *w;
                let e = match extend_halfspace(u, &p.op, spec.radius.min(w), 0.95 * w) {
                    Ok(e) => e,
                    Err(err) => return self.inadmissible(&err),
                };
                self.push(Check::new("extend", "admissible_input", ADMISSIBLE, e.checks.ok())
                        .with("boundary_value", e.checks.boundary_value)
                        .with("boundary_operator", e.checks.boundary_operator)
                        .with("cross_terms", e.checks.cross_terms)
                        .with("delta", e.delta),
                );
                let mesh = Mesh::covering(&[-w, -w], &[w, w], p.h)?;
                let (su, se) = grid_sups(&e.field, u, &mesh, |x| x[1] >= 0.0)?;
                self.sup_check(su, se);
                let pts = (0..9).map(|k| vec![-0.8 * w + 0.2 * w * k as f64, 0.0]).collect();
                let seam = verify_extension_smoothness(&e.field, &Seam::new(1, pts), p.scenario.alpha, spec.seam_h)?;
                self.seam_check(seam.second_mismatch, seam.first_mismatch, tol.seam);
                let g = GridFunction::from_field(mesh, &e.field)?;
                self.write_grid("extension.csv", &g)?;
            }
            Shape::Ball { center, radius }
                if center.len() == 2 && center.iter().all(|c| *c == 0.0) && *radius == 1.0 =>
            {
                let atlas = unit_disk_atlas(&p.op, spec.charts, spec.shear)?;
                let partition = build_partition(&atlas.cover(), &atlas.omega)?;
                let e = match extend_global(u, &p.op, &atlas, &partition) {
                    Ok(e) => e,
                    Err(err) => return self.inadmissible(&err),
                };
                self.push(Check::new("extend", "admissible_input", ADMISSIBLE, true)
                        .with("boundary_value", e.boundary_value)
                        .with("boundary_operator", e.boundary_operator)
                        .with("charts", e.charts.len() as f64),
                );
                let before = e.charts.iter().fold(0.0f64, |m, c| m.max(c.cross_terms_before));
                let after = e.charts.iter().fold(0.0f64, |m, c| m.max(c.checks.cross_terms));
                self.push(Check::new("extend", "cross_terms_removed", CROSS_TERMS, after <= 1e-6)
                        .with("max_before", before)
                        .with("max_after", after),
                );
                let outside: Vec<Vec<f64>> = (0..200)
                    .map(|i| {
                        let t = i as f64 * 0.137;
                        let r = 1.02 + 0.5 * i as f64 / 200.0;
                        vec![r * t.cos(), r * t.sin()]
                    })
                    .collect();
                let pr = partition.check(&atlas.omega, &outside)?;
                self.push(Check::new("extend", "partition_of_unity", PARTITION, pr.ok)
                        .with("sum_error_inside", pr.sum_error_inside)
                        .with("max_sum_outside", pr.max_sum_outside),
                );
                let mesh = Mesh::covering(&[-1.3, -1.3], &[1.3, 1.3], p.h)?;
                let omega = atlas.omega.clone();
                let (su, se) = grid_sups(&e.field, u, &mesh, |x| omega.contains_closed(x))?;
                self.sup_check(su, se);
                let seam = circle_seam(&e.field, &[0.0, 0.0], 1.0, 16, p.scenario.alpha, spec.seam_h)?;
                self.seam_check(seam.second_mismatch, seam.first_mismatch, tol.seam);
                let g = GridFunction::from_field(mesh, &e.field)?;
                self.write_grid("extension.csv", &g)?;
            }
            _ => bail!(
                "extension supports the interval [0, L], the 2D half cuboid and the unit disk"
            ),
        }
        Ok(())
    }

    fn seam_check(&mut self, second: f64, first: f64, tol: f64) {
        self.push(Check::new("extend", "seam_second_derivative", SEAM, second <= tol && first <= tol)
                .with("second_mismatch", second)
                .with("first_mismatch", first)
                .with("tolerance", tol),
        );
    }

    fn sandwich(&mut self, task: &str, op: &EllipticOperator, f: &ScalarField, g: &ScalarField, u: &GridFunction) -> Result<()> {
        let p = self.p;
        let tol = p.scenario.tolerances.sandwich;
        let pair = build_comparison_pair(op, f, g, &p.domain, p.h)?;
        let (pts, vals) = closed_nodes(u, &p.domain);
        let rep = pair.check(&pts, &vals, tol);
        self.push(Check::new(task, "comparison_sandwich", SANDWICH, rep.ok)
                .with("below", rep.below)
                .with("above", rep.above)
                .with("tolerance", tol),
        );
        Ok(())
    }

    fn solve(&mut self) -> Result<Solution> {
        let p = self.p;
        let s = direct_solve(&p.op, &p.f, &p.g, &p.domain, p.h)?;
        let rep = &s.report;
        let f_sup = GridFunction::from_field(p.domain.mesh(p.h)?, &p.f)?.sup_norm();
        let res_tol = 1e-8 * f_sup.max(1.0);
        self.push(Check::new("solve", "residual", RESIDUAL, rep.residual_norm <= res_tol)
                .with("residual", rep.residual_norm)
                .with("tolerance", res_tol)
                .with("unknowns", rep.unknowns as f64)
                .with("iterations", rep.iterations as f64),
        );
        self.push(Check::new("solve", "max_principle", MAX_PRINCIPLE, rep.max_principle_ok)
                .with("violation", rep.max_principle.violation)
                .with("interior_max", rep.max_principle.interior_max)
                .with("boundary_max", rep.max_principle.boundary_max),
        );
        if let Some(b) = &rep.bound_check {
            self.push(Check::new("solve", "sup_bound", SUP_BOUND, b.ok)
                    .with("sup_u", b.sup_u)
                    .with("bound", b.bound),
            );
        }
        self.sandwich("solve", &p.op, &p.f, &p.g, &s.u)?;
        if let Some(exact) = &p.exact {
            let (pts, vals) = closed_nodes(&s.u, &p.domain);
            let mut err = 0.0f64;
            for (x, v) in pts.iter().zip(&vals) {
                err = err.max((exact.try_value(x)? - v).abs());
            }
            let tol = p.scenario.tolerances.exact;
            self.push(Check::new("solve", "exact_solution", EXACT, err <= tol)
                    .with("max_error", err)
                    .with("tolerance", tol),
            );
        }
        self.barrier(&s.u)?;
        self.write_grid("u.csv", &s.u)?;
        Ok(s)
    }

    fn barrier(&mut self, u: &GridFunction) -> Result<()> {
        let p = self.p;
        let mut rng = ChaCha8Rng::seed_from_u64(p.scenario.seed);
        let samples = p.domain.boundary_samples((8.0 / p.domain.diameter()).ceil() as usize);
        let x0s: Vec<Vec<f64>> = samples.choose_multiple(&mut rng, 4).cloned().collect();
        let rep = boundary_attainment_check(u, &p.g, &p.op, &p.f, &p.domain, &x0s, &[0.1, 0.01])?;
        let worst = rep
            .points
            .iter()
            .flat_map(|q| &q.checks)
            .fold(f64::NEG_INFINITY, |m, c| m.max(c.below).max(c.above));
        let skipped = rep.points.iter().filter(|q| q.skipped.is_some()).count();
        self.push(Check::new("solve", "barrier_attainment", BARRIER, rep.ok)
                .with("points", rep.points.len() as f64)
                .with("skipped", skipped as f64)
                .with("worst_violation", worst)
                .with("boundary_modulus", rep.boundary_modulus),
        );
        Ok(())
    }

    fn perron(&mut self) -> Result<()> {
        let p = self.p;
        let tol = p.scenario.tolerances.perron;
        let opts = PerronOptions {
            tol,
            ..PerronOptions::default()
        };
        let d = direct_solve(&p.op, &p.f, &p.g, &p.domain, p.h)?;
        let s = match perron_solve(&p.op, &p.f, &p.g, &p.domain, p.h, &opts) {
            Ok(s) => s,
            Err(Error::Monotonicity { sweep, decrease }) => {
                self.push(Check::new("perron", "monotone_sweeps", PERRON_MONOTONE, false)
                        .with("sweep", sweep as f64)
                        .with("decrease", decrease),
                );
                return Ok(());
            }
            Err(Error::ComparisonViolated { sweep, excess }) => {
                self.push(Check::new("perron", "monotone_sweeps", PERRON_MONOTONE, false)
                        .with("sweep", sweep as f64)
                        .with("excess", excess),
                );
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        let st = &s.state;
        let min_inc = st.increments.iter().copied().fold(f64::INFINITY, f64::min);
        self.push(Check::new("perron", "monotone_sweeps", PERRON_MONOTONE, min_inc >= 0.0)
                .with("min_increment", min_inc),
        );
        self.push(Check::new("perron", "converged", PERRON_CONVERGED, st.converged)
                .with("sweeps", st.sweep_count as f64)
                .with("last_increment", st.last_increment)
                .with("rate", st.rate.unwrap_or(f64::NAN))
                .with("balls", st.ball_cover.len() as f64)
                .with("colors", st.colors as f64),
        );
        let (_, a) = closed_nodes(&s.u, &p.domain);
        let (_, b) = closed_nodes(&d.u, &p.domain);
        let diff = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        self.push(Check::new("perron", "matches_direct", PERRON_DIRECT, diff <= 10.0 * tol)
                .with("max_diff", diff)
                .with("tolerance", 10.0 * tol),
        );
        self.sandwich("perron", &p.op, &p.f, &p.g, &s.u)?;
        self.write_grid("u_perron.csv", &s.u)?;
        self.write_grid("u_direct.csv", &d.u)?;
        let mut w = csv::Writer::from_path(self.out.join("sweeps.csv"))?;
        w.write_record(["sweep", "increment"])?;
        for (k, inc) in st.increments.iter().enumerate() {
            w.write_record([(k + 1).to_string(), fmt_f64(*inc)])?;
        }
        w.flush()?;
        self.artifacts.push("sweeps.csv".into());
        Ok(())
    }

    fn resolvent(&mut self) -> Result<()> {
        let p = self.p;
        let omega = estimate_omega(&p.op, &p.domain, p.h)?;
        let spec = &p.scenario.resolvent;
        let mu = spec.mu.unwrap_or(omega + spec.shift.unwrap_or(1.0));
        let r = resolvent_solve(&p.op, mu, &p.f, &p.domain, p.h)?;
        let c = &r.contraction;
        self.push(Check::new("resolvent", "contraction", CONTRACTION, c.ok)
                .with("mu", c.mu)
                .with("omega", c.omega)
                .with("u_sup", c.u_sup)
                .with("f_sup", c.f_sup)
                .with("excess", c.excess),
        );
        let zero = ScalarField::constant(0.0, p.domain.dim());
        self.sandwich("resolvent", &p.op.shifted(mu), &p.f, &zero, &r.u)?;
        self.write_grid("u_resolvent.csv", &r.u)?;
        Ok(())
    }

    fn evolve(&mut self) -> Result<()> {
        let p = self.p;
        let spec = p.scenario.evolve.as_ref().expect("validated");
        let g = GridFunction::from_field(p.domain.mesh(p.h)?, p.u0.as_ref().expect("validated"))?;
        let kinds = p.domain.classify(&g.mesh);
        let mut clamped = 0.0f64;
        let v = g
            .values()
            .iter()
            .zip(&kinds)
            .map(|(v, k)| {
                if *k == NodeKind::Interior {
                    *v
                } else {
                    clamped = clamped.max(v.abs());
                    0.0
                }
            })
            .collect();
        let u0 = GridFunction::new(g.mesh.clone(), v)?;
        let t = evolve(&p.op, &u0, &p.domain, spec.dt, spec.t_final)?;
        let growth = t.growth_excess(1.0);
        self.push(Check::new("evolve", "growth_bound", GROWTH, growth <= 1e-9)
                .with("excess", growth)
                .with("omega", t.omega)
                .with("steps", (t.states.len() - 1) as f64)
                .with("u0_clamped", clamped),
        );
        let discrete = t.discrete_excess();
        self.push(Check::new("evolve", "discrete_growth_bound", DISCRETE_GROWTH, discrete <= 1e-9)
                .with("excess", discrete),
        );
        if t.omega <= 0.0 {
            let norms = t.norms();
            let worst = norms.windows(2).fold(f64::NEG_INFINITY, |m, w| m.max(w[1] - w[0]));
            self.push(Check::new("evolve", "non_expansion", NON_EXPANSION, worst <= 0.0)
                    .with("max_step_increase", worst),
            );
        }
        t.write(&self.out.join("trajectory"))?;
        self.artifacts.push("trajectory/index.json".into());
        Ok(())
    }
}
