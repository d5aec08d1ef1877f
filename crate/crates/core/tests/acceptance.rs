//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::io::Write as _;
use std::time::Instant;

use ellipt_core::elliptic::{
    build_barrier, build_comparison_pair, estimate_omega, BarrierOptions, Sphere,
};
use ellipt_core::extension::{
    build_partition, circle_seam, common_delta, disk_test_function, extend_1d,
    extend_1d_unchecked, extend_global, extend_global_unchecked, extend_halfspace,
    extend_halfspace_with, halfspace_checks, reflection_function, unit_disk_atlas,
    verify_extension_smoothness, Seam,
};
use ellipt_core::fields::kernel::smooth_interval;
use ellipt_core::fields::{
    holder_seminorm, mollify, Jet, NodeKind, PairStrategy, Samples,
};
use ellipt_core::solver::{
    boundary_attainment_check, direct_solve, evolve, perron_solve, resolvent_solve,
    PerronOptions,
};
use ellipt_core::transform::{
    build_flattening_map, pushforward_operator, verify_no_cross_terms, Diffeomorphism,
};
use ellipt_core::{DomainSpec, EllipticOperator, GridFunction, Mesh, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(n: u32, title: &str, pass: bool, detail: String) {
    let line = format!(
        "criterion {n} [{title}]: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    // bypasses the harness capture so the line always shows
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

/// Grid maximum of `|f|` over the points kept by `keep`, then refined by a
/// compass search around the best few candidates.
fn refined_sup(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    lo: &[f64],
    hi: &[f64],
    h: f64,
    keep: &(dyn Fn(&[f64]) -> bool + Sync),
) -> f64 {
    let mesh = Mesh::covering(lo, hi, h).unwrap();
    let mut vals: Vec<(f64, usize)> = (0..mesh.len())
        .into_par_iter()
        .filter_map(|i| {
            let p = mesh.point(i);
            keep(&p).then(|| (f(&p).abs(), i))
        })
        .collect();
    vals.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = vals.first().map_or(0.0, |v| v.0);
    for &(v0, i) in vals.iter().take(8) {
        let mut x = mesh.point(i);
        let mut v = v0;
        let mut step = h;
        while step > 1e-9 {
            let mut moved = false;
            for k in 0..x.len() {
                for s in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[k] += s * step;
                    if keep(&y) {
                        let fy = f(&y).abs();
                        if fy > v {
                            v = fy;
                            x = y;
                            moved = true;
                        }
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.max(v);
    }
    best
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn closed_values(u: &GridFunction, d: &DomainSpec) -> Vec<(Vec<f64>, f64)> {
    (0..u.mesh.len())
        .map(|i| (u.mesh.point(i), u.values()[i]))
        .filter(|(p, _)| d.contains_closed(p))
        .collect()
}

fn max_diff_closed(a: &GridFunction, b: &GridFunction, d: &DomainSpec) -> f64 {
    closed_values(a, d)
        .iter()
        .zip(closed_values(b, d))
        .fold(0.0, |m, ((_, x), (_, y))| m.max((x - y).abs()))
}

fn cutoff_1d(p: f64, q: f64, rho: f64) -> ScalarField {
    ScalarField::from_jet_fn(1, move |x| {
        let (v, d1, d2) = smooth_interval(x[0], p, q, rho);
        let mut j = Jet::constant(v, 1);
        j.gradient[0] = d1;
        j.hessian[0][0] = d2;
        Ok(j)
    })
}

#[test]
fn c1_reflection_endpoints() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = 1e-4;
    let mut worst = [0.0f64; 3];
    for _ in 0..100 {
        let a = rng.gen_range(0.5..5.0);
        let b = rng.gen_range(-5.0..5.0);
        let f = |s: f64| reflection_function(a, b, s).unwrap();
        let (fm, f0, fp) = (f(-e), f(0.0), f(e));
        worst[0] = worst[0].max(f0.abs());
        worst[1] = worst[1].max(((fp - fm) / (2.0 * e) + 1.0).abs());
        worst[2] = worst[2].max(((fp - 2.0 * f0 + fm) / (e * e) - 2.0 * b / a).abs());
    }
    let t = start.elapsed().as_secs_f64();
    let pass = worst.iter().all(|w| *w <= 1e-6) && t < 1.0;
    verdict(
        1,
        "reflection endpoints",
        pass,
        format!(
            "max errors F(0) {:.2e}, F'(0) {:.2e}, F''(0) {:.2e}; {t:.3}s",
            worst[0], worst[1], worst[2]
        ),
    );
}

struct ExtensionTally {
    cases: usize,
    worst_ratio: f64,
    worst_seam: f64,
    controls: usize,
    worst_control: f64,
}

impl ExtensionTally {
    fn ratio(&mut self, su: f64, se: f64) {
        self.cases += 1;
        self.worst_ratio = self.worst_ratio.max((se / su - 1.0).abs());
    }

    /// `mismatch / |residual|` for a negative control.
    fn control(&mut self, mismatch: f64, residual: f64) {
        self.controls += 1;
        if residual.abs() > 1e-3 {
            self.worst_control = self.worst_control.min(mismatch / residual.abs());
        }
    }
}

fn one_d_cases(t: &mut ExtensionTally, rng: &mut ChaCha8Rng) {
    let eta = cutoff_1d(-1.0, 0.8, 0.1);
    for k in 0..11 {
        let a: f64 = rng.gen_range(0.5..5.0);
        let b: f64 = rng.gen_range(-5.0..5.0);
        let kappa = if k < 8 { 0.0 } else { 0.5 + 0.5 * (k - 8) as f64 };
        let q = -b / (2.0 * a) + kappa;
        let r: f64 = rng.gen_range(-1.0..1.0);
        let u = ScalarField::parse(&format!("x1 + {q}*x1^2 + {r}*x1^3"), 1)
            .unwrap()
            .mul(&eta);
        let seam = Seam::new(0, vec![vec![0.0]]);
        if kappa == 0.0 {
            let e = extend_1d(&u, a, b, 1.0, 1.0).unwrap();
            let su = refined_sup(&|x| u.value(x), &[0.0], &[1.0], 1e-4, &|x| (0.0..=1.0).contains(&x[0]));
            let se = refined_sup(&|x| e.field.value(x), &[-1.0], &[1.0], 1e-4, &|_| true);
            t.ratio(su, se);
            let rep = verify_extension_smoothness(&e.field, &seam, 0.5, 1e-4).unwrap();
            t.worst_seam = t.worst_seam.max(rep.second_mismatch);
        } else {
            let e = extend_1d_unchecked(&u, a, b, 1.0, 1.0).unwrap();
            let rep = verify_extension_smoothness(&e.field, &seam, 0.5, 1e-4).unwrap();
            t.control(rep.second_mismatch, e.admissibility.condition);
        }
    }
}

fn half_cuboid_cases(t: &mut ExtensionTally, rng: &mut ChaCha8Rng) {
    let omega = DomainSpec::half_cuboid(2, 1.0).unwrap();
    let (lo, hi) = omega.bbox();
    for k in 0..10 {
        let a1: f64 = rng.gen_range(1.0..3.0);
        let a2: f64 = rng.gen_range(1.0..3.0);
        let b1: f64 = rng.gen_range(-2.0..2.0);
        let bb: f64 = rng.gen_range(-3.0..3.0);
        let c: f64 = rng.gen_range(0.0..1.0);
        let ann = format!("({a2} + 0.3*sin(x1))");
        let bn = format!("({bb} + 0.5*cos(x1))");
        let lambda = a1.min(a2) - 0.6;
        let big = (a1 + 0.2).max(a2 + 0.3).max(b1.abs()).max(bb.abs() + 0.5).max(c);
        let op = EllipticOperator::parse(
            &[
                vec![format!("{a1} + 0.2*sin(x1 + x2)"), "0.2*x2".to_string()],
                vec!["0.2*x2".to_string(), ann.clone()],
            ],
            &[b1.to_string(), bn.clone()],
            &format!("-{c}"),
            lambda,
            big,
        )
        .unwrap();
        let kappa = if k < 8 { 0.0 } else { 0.5 * (k - 7) as f64 };
        let r: f64 = rng.gen_range(-1.0..1.0);
        let src = format!(
            "(1 - x1^2)^4 * (x2 + (-{bn}/(2*{ann}) + {kappa})*x2^2 + {r}*x2^3) * (1 - x2^2)^4"
        );
        let u = ScalarField::parse(&src, 2).unwrap();
        let pts: Vec<Vec<f64>> = [-0.6, -0.2, 0.3, 0.7].iter().map(|&x| vec![x, 0.0]).collect();
        if kappa == 0.0 {
            let e = extend_halfspace(&u, &op, 0.5, 0.95).unwrap();
            let su = refined_sup(&|x| u.value(x), &lo, &hi, 0.01, &|x| omega.contains_closed(x));
            let se = refined_sup(&|x| e.field.value(x), &[-1.0, -1.0], &[1.0, 1.0], 0.01, &|x| {
                x[0].abs() <= 1.0 && x[1].abs() <= 1.0
            });
            t.ratio(su, se);
            let rep = verify_extension_smoothness(&e.field, &Seam::new(1, pts), 0.5, 1e-4).unwrap();
            t.worst_seam = t.worst_seam.max(rep.second_mismatch);
        } else {
            let a_nn = op.a[1][1].on_flat_boundary();
            let b_n = op.b[1].on_flat_boundary();
            let delta = common_delta(op.lambda, op.big_lambda, 0.5, 0.9).unwrap();
            let e = extend_halfspace_with(&u, &a_nn, &b_n, delta).unwrap();
            for p in pts {
                let res = halfspace_checks(&u, &op, std::slice::from_ref(&p)).unwrap();
                let rep = verify_extension_smoothness(&e.field, &Seam::new(1, vec![p]), 0.5, 1e-4)
                    .unwrap();
                t.control(rep.second_mismatch, res.boundary_operator);
            }
        }
    }
}

fn disk_cases(t: &mut ExtensionTally) {
    let l = EllipticOperator::laplacian(2);
    let atlas = unit_disk_atlas(&l, 12, 0.3).unwrap();
    let part = build_partition(&atlas.cover(), &atlas.omega).unwrap();
    let omega = &atlas.omega;
    for m in 0..5 {
        let u = disk_test_function(m).unwrap();
        let e = extend_global(&u, &l, &atlas, &part).unwrap();
        let su = refined_sup(&|x| u.value(x), &[-1.0, -1.0], &[1.0, 1.0], 0.01, &|x| {
            omega.contains_closed(x)
        });
        let se = refined_sup(&|x| e.field.value(x), &[-1.3, -1.3], &[1.3, 1.3], 0.01, &|_| true);
        t.ratio(su, se);
        let rep = circle_seam(&e.field, &[0.0, 0.0], 1.0, 16, 0.5, 1e-4).unwrap();
        t.worst_seam = t.worst_seam.max(rep.second_mismatch);
    }
    // u = 0 on the circle but Lu = -8 - 8 x1 there
    let bad = ScalarField::parse("(1 - x1^2 - x2^2) * (2 + x1)", 2).unwrap();
    let e = extend_global_unchecked(&bad, &l, &atlas, &part).unwrap();
    for k in 0..12 {
        let th = 0.3 + k as f64 * 0.5;
        let x0 = [th.cos(), th.sin()];
        let res = l.apply_exact(&bad, &x0).unwrap();
        let f = e.field.clone();
        let line = ScalarField::from_fn(1, move |s| {
            f.try_value(&[x0[0] * (1.0 - s[0]), x0[1] * (1.0 - s[0])])
        });
        let rep = verify_extension_smoothness(&line, &Seam::new(0, vec![vec![0.0]]), 0.5, 1e-4)
            .unwrap();
        t.control(rep.second_mismatch, res);
    }
}

#[test]
fn c2_contractive_extension() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut t = ExtensionTally {
        cases: 0,
        worst_ratio: 0.0,
        worst_seam: 0.0,
        controls: 0,
        worst_control: f64::INFINITY,
    };
    one_d_cases(&mut t, &mut rng);
    half_cuboid_cases(&mut t, &mut rng);
    disk_cases(&mut t);
    let secs = start.elapsed().as_secs_f64();
    let pass = t.cases >= 20
        && t.worst_ratio <= 1e-6
        && t.worst_seam <= 1e-3
        && t.controls > 0
        && t.worst_control >= 0.1
        && secs < 30.0;
    verdict(
        2,
        "contractive extension",
        pass,
        format!(
            "{} cases, max |ratio - 1| {:.2e}, max seam mismatch {:.2e}; {} controls, min mismatch/residual {:.3}; {secs:.1}s",
            t.cases, t.worst_ratio, t.worst_seam, t.controls, t.worst_control
        ),
    );
}

#[test]
fn c3_cross_term_elimination() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let samples: Vec<Vec<f64>> = (0..=20).map(|i| vec![-0.4 + 0.04 * i as f64, 0.0]).collect();
    for _ in 0..10 {
        let a1: f64 = rng.gen_range(2.0..3.0);
        let a2: f64 = rng.gen_range(2.0..3.0);
        let m0: f64 = rng.gen_range(-0.8..0.8);
        let (k1, k2, k3) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
        let b1: f64 = rng.gen_range(-2.0..2.0);
        let b2: f64 = rng.gen_range(-2.0..2.0);
        let mixed = format!("{m0} + 0.3*sin(x1)*cos({k3}*x2) + 0.1*abs(x1)^2.5");
        let op = EllipticOperator::parse(
            &[
                vec![format!("{a1} + 0.2*sin({k1}*x1 + x2)"), mixed.clone()],
                vec![mixed, format!("{a2} + 0.2*cos(x1 - {k2}*x2)")],
            ],
            &[b1.to_string(), format!("{b2} + x1")],
            "-1",
            a1.min(a2) - 0.2 - m0.abs() - 0.4,
            5.0,
        )
        .unwrap();
        let fl = build_flattening_map(&op, 0.5).unwrap();
        let t = pushforward_operator(&op, &fl.map).unwrap();
        assert!(t.op.a.iter().flatten().all(|f| f.has_exact_jet()));
        worst = worst.max(verify_no_cross_terms(&t, &samples).unwrap());
    }
    let l = EllipticOperator::constant(&[vec![2.0, 1.0], vec![1.0, 3.0]], &[0.0, 0.0], 0.0).unwrap();
    let f = Diffeomorphism::parse(&["x1 - x2/3", "x2"]).unwrap();
    let t = pushforward_operator(&l, &f).unwrap();
    let target = [[5.0 / 3.0, 0.0], [0.0, 3.0]];
    let mut cong = 0.0f64;
    for p in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.7]] {
        let a = t.op.a_matrix(&p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                cong = cong.max((a[i][j] - target[i][j]).abs());
            }
        }
    }
    verdict(
        3,
        "cross-term elimination",
        worst <= 1e-6 && cong <= 1e-12,
        format!("10 operators, max |a_in| on the flat boundary {worst:.2e}; congruence error {cong:.2e}"),
    );
}

struct Problem {
    name: &'static str,
    op: EllipticOperator,
    f: ScalarField,
    g: ScalarField,
    domain: DomainSpec,
    h: f64,
}

fn perron_problems() -> Vec<Problem> {
    vec![
        Problem {
            name: "1d poisson",
            op: EllipticOperator::laplacian(1),
            f: ScalarField::constant(-2.0, 1),
            g: ScalarField::constant(0.0, 1),
            domain: DomainSpec::unit_box(1),
            h: 1.0 / 40.0,
        },
        Problem {
            name: "disk",
            op: EllipticOperator::laplacian(2),
            f: ScalarField::constant(1.0, 2),
            g: ScalarField::parse("x1^2 - x2^2 + 0.5*x1", 2).unwrap(),
            domain: DomainSpec::ball(vec![0.0, 0.0], 1.0).unwrap(),
            h: 0.05,
        },
        Problem {
            name: "square",
            op: EllipticOperator::constant(&[vec![1.0, 0.0], vec![0.0, 2.0]], &[0.5, 0.0], -1.0)
                .unwrap()
                .with_bounds(1.0, 2.0)
                .unwrap(),
            f: ScalarField::parse("sin(pi*x1)*x2", 2).unwrap(),
            g: ScalarField::parse("x1*x2", 2).unwrap(),
            domain: DomainSpec::unit_box(2),
            h: 1.0 / 40.0,
        },
    ]
}

#[test]
fn c4_perron_matches_direct() {
    let start = Instant::now();
    let tol = 1e-6;
    let opts = PerronOptions {
        tol,
        ..PerronOptions::default()
    };
    let mut details = Vec::new();
    let mut pass = true;
    for p in perron_problems() {
        assert!(p.domain.mesh(p.h).unwrap().len() <= 41 * 41);
        let d = direct_solve(&p.op, &p.f, &p.g, &p.domain, p.h).unwrap();
        let s = perron_solve(&p.op, &p.f, &p.g, &p.domain, p.h, &opts).unwrap();
        let diff = max_diff_closed(&s.u, &d.u, &p.domain);
        let monotone = s.state.increments.iter().all(|&x| x >= 0.0);
        pass &= diff <= 10.0 * tol && monotone && s.state.converged;
        details.push(format!("{} diff {diff:.2e} in {} sweeps", p.name, s.state.sweep_count));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    verdict(4, "Perron vs direct", pass, format!("{}; {secs:.1}s", details.join(", ")));
}

#[test]
fn c5_comparison_sandwich() {
    let mut worst = f64::NEG_INFINITY;
    let mut solves = 0;
    let mut check = |op: &EllipticOperator, f: &ScalarField, g: &ScalarField, d: &DomainSpec, h: f64, u: &GridFunction| {
        let pair = build_comparison_pair(op, f, g, d, h).unwrap();
        let (pts, vals): (Vec<Vec<f64>>, Vec<f64>) = closed_values(u, d).into_iter().unzip();
        let rep = pair.check(&pts, &vals, 1e-6);
        worst = worst.max(rep.below).max(rep.above);
        solves += 1;
    };
    let opts = PerronOptions::default();
    for p in perron_problems() {
        let d = direct_solve(&p.op, &p.f, &p.g, &p.domain, p.h).unwrap();
        check(&p.op, &p.f, &p.g, &p.domain, p.h, &d.u);
        let s = perron_solve(&p.op, &p.f, &p.g, &p.domain, p.h, &opts).unwrap();
        check(&p.op, &p.f, &p.g, &p.domain, p.h, &s.u);
    }
    // drift-dominated and resolvent solves
    let drift = EllipticOperator::constant(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[8.0, -3.0], 0.0)
        .unwrap()
        .with_bounds(1.0, 8.0)
        .unwrap();
    let sq = DomainSpec::unit_box(2);
    let f = ScalarField::parse("cos(3*x1) - x2", 2).unwrap();
    let g = ScalarField::parse("x1 - x2^2", 2).unwrap();
    let d = direct_solve(&drift, &f, &g, &sq, 0.05).unwrap();
    check(&drift, &f, &g, &sq, 0.05, &d.u);
    let zero = ScalarField::constant(0.0, 2);
    for mu in [0.5, 3.0] {
        let r = resolvent_solve(&drift, mu, &f, &sq, 0.05).unwrap();
        check(&drift.shifted(mu), &f, &zero, &sq, 0.05, &r.u);
    }
    verdict(
        5,
        "comparison sandwich",
        worst <= 1e-6,
        format!("{solves} solves, largest violation {worst:.2e}"),
    );
}

#[test]
fn c6_resolvent_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for k in 0..50 {
        let two_d = k % 2 == 0;
        let (n, d, h) = if two_d {
            (2, DomainSpec::unit_box(2), 0.05)
        } else {
            (1, DomainSpec::unit_box(1), 0.01)
        };
        let amp: f64 = rng.gen_range(0.5..2.0);
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let b: Vec<String> = (0..n).map(|_| format!("{}", rng.gen_range(-3.0..3.0))).collect();
        let a: Vec<Vec<String>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { format!("{amp}") } else { "0".into() }).collect())
            .collect();
        let op = EllipticOperator::parse(&a, &b, &format!("{c0} + 0.5*sin(2*x1)"), amp, 4.0).unwrap();
        let terms: Vec<String> = (0..3)
            .map(|_| {
                format!(
                    "{}*sin({}*x1 + {})",
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(0.5..6.0),
                    rng.gen_range(0.0..3.0)
                )
            })
            .collect();
        let f = ScalarField::parse(&terms.join(" + "), n).unwrap();
        let omega = estimate_omega(&op, &d, h).unwrap();
        let mu = omega + rng.gen_range(0.1..10.0);
        let r = resolvent_solve(&op, mu, &f, &d, h).unwrap();
        worst = worst.max(r.contraction.u_sup * (mu - r.contraction.omega) - r.contraction.f_sup);
    }
    let l = EllipticOperator::laplacian(1);
    let r = resolvent_solve(&l, 1.0, &ScalarField::constant(1.0, 1), &DomainSpec::unit_box(1), 1e-3).unwrap();
    let closed = 1.0 - 1.0 / 0.5f64.cosh();
    let err = (r.contraction.u_sup - closed).abs();
    verdict(
        6,
        "resolvent contraction",
        worst <= 1e-9 && err <= 1e-4,
        format!("50 random shifts, max ||u||(mu - omega) - ||f|| = {worst:.2e}; closed form error {err:.2e}"),
    );
}

fn sine_start(d: &DomainSpec, h: f64, src: &str) -> GridFunction {
    let g = GridFunction::from_field(d.mesh(h).unwrap(), &ScalarField::parse(src, d.dim()).unwrap())
        .unwrap();
    let kinds = d.classify(&g.mesh);
    let v = g
        .values()
        .iter()
        .zip(&kinds)
        .map(|(v, k)| if *k == NodeKind::Interior { *v } else { 0.0 })
        .collect();
    GridFunction::new(g.mesh.clone(), v).unwrap()
}

#[test]
fn c7_semigroup_growth() {
    let mut worst_growth = f64::NEG_INFINITY;
    let mut strict = true;
    let mut worst_decay = 0.0f64;
    let line = DomainSpec::unit_box(1);
    let sq = DomainSpec::unit_box(2);
    let cases: Vec<(EllipticOperator, DomainSpec, f64, &str)> = vec![
        (EllipticOperator::laplacian(1), line.clone(), 1e-2, "x1*(1 - x1)*(1 + sin(5*x1))"),
        (EllipticOperator::laplacian(2), sq.clone(), 0.05, "sin(pi*x1)*sin(2*pi*x2) + x1*x2*(1-x1)*(1-x2)"),
        (
            EllipticOperator::constant(&[vec![1.0]], &[0.0], 1.0).unwrap(),
            line.clone(),
            1e-2,
            "sin(pi*x1)",
        ),
        (
            EllipticOperator::parse(&[vec!["1", "0"], vec!["0", "1"]], &["1", "0"], "1 + 0.5*sin(x1)*x2", 1.0, 2.0)
                .unwrap(),
            sq,
            0.05,
            "x1*x2*(1-x1)*(1-x2)",
        ),
    ];
    for (op, d, h, src) in &cases {
        let u0 = sine_start(d, *h, src);
        for dt in [1e-2, 1e-3] {
            let t = evolve(op, &u0, d, dt, 2.0).unwrap();
            let norms = t.norms();
            let n0 = norms[0];
            for (n, time) in norms.iter().zip(&t.times) {
                worst_growth = worst_growth.max(n - (1.05 * t.omega * time).exp() * n0 - 1e-9);
            }
            if t.omega == 0.0 {
                strict &= norms.windows(2).all(|w| w[1] < w[0]);
            }
        }
    }
    let u0 = sine_start(&line, 1e-3, "sin(pi*x1)");
    let pi2 = std::f64::consts::PI.powi(2);
    for dt in [1e-2, 1e-3] {
        let t = evolve(&EllipticOperator::laplacian(1), &u0, &line, dt, 2.0).unwrap();
        let n0 = t.states[0].sup_norm();
        for (k, n) in t.norms().iter().enumerate() {
            let expect = (1.0 + pi2 * dt).powi(-(k as i32));
            worst_decay = worst_decay.max((n / n0 / expect - 1.0).abs());
        }
    }
    verdict(
        7,
        "semigroup growth",
        worst_growth <= 0.0 && strict && worst_decay <= 0.02,
        format!(
            "max excess over e^(1.05 w t) {worst_growth:.2e}; strict decay for w = 0: {strict}; eigenmode deviation {:.3}%",
            100.0 * worst_decay
        ),
    );
}

#[test]
fn c8_barrier_sandwich() {
    let l = EllipticOperator::laplacian(2);
    let f = ScalarField::parse("1 + x1", 2).unwrap();
    let g = ScalarField::parse("x1*x2 + 0.5*x1", 2).unwrap();
    let h = 0.05;
    let square = DomainSpec::unit_box(2);
    let disk = DomainSpec::ball(vec![0.0, 0.0], 1.0).unwrap();
    let square_pts: Vec<Vec<f64>> = vec![vec![1.0, 0.5], vec![0.3, 0.0], vec![0.0, 0.8], vec![0.55, 1.0]];
    let disk_pts: Vec<Vec<f64>> = (0..8)
        .map(|k| {
            let t = 0.2 + k as f64 * std::f64::consts::FRAC_PI_4;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let mut near = f64::NEG_INFINITY;
    let mut all_ok = true;
    let mut w0 = 0.0f64;
    let mut lw = f64::NEG_INFINITY;
    let mut tested = 0;
    for (d, pts) in [(&square, &square_pts), (&disk, &disk_pts)] {
        let s = direct_solve(&l, &f, &g, d, h).unwrap();
        let rep = boundary_attainment_check(&s.u, &g, &l, &f, d, pts, &[0.1, 0.01]).unwrap();
        all_ok &= rep.ok && rep.points.iter().all(|p| p.skipped.is_none());
        for p in &rep.points {
            for c in &p.checks {
                near = near.max(c.below_near).max(c.above_near);
                tested += 1;
            }
        }
        let nodes: Vec<Vec<f64>> = d.mesh(h).unwrap().points().filter(|p| d.contains_closed(p)).collect();
        for x0 in pts.iter() {
            let (center, radius) = d.external_sphere(x0, 0.5 * d.diameter()).unwrap();
            let net = build_barrier(&l, &f, &g, d, x0, &Sphere { center, radius }, &[0.1, 0.01], BarrierOptions::new(h))
                .unwrap();
            w0 = w0.max(net.w.value(x0).abs());
            for p in nodes.iter().filter(|p| dist(p, x0) > 1e-9) {
                lw = lw.max(l.apply_exact(&net.w, p).unwrap());
            }
        }
    }
    verdict(
        8,
        "barrier sandwich",
        all_ok && near <= 1e-6 && w0 == 0.0 && lw <= -1.0 + 1e-6,
        format!("{tested} (point, eps) pairs, worst violation next to the boundary {near:.2e}; |w(x0)| {w0:.1e}; max sampled Lw {lw:.6}"),
    );
}

#[test]
fn c9_mollifier_non_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let alpha = 0.5;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..20 {
        let (n, h) = if k < 15 { (1, 1.0 / 512.0) } else { (2, 1.0 / 32.0) };
        let mesh = Mesh::covering(&vec![-0.3; n], &vec![1.3; n], h).unwrap();
        // noise plus a cusp and a jump
        let cusp: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let jump: f64 = rng.gen_range(0.0..1.0);
        let vals: Vec<f64> = mesh
            .points()
            .map(|p| {
                let r = dist(&p, &cusp);
                rng.gen_range(-1.0..1.0) * 0.3 + r.sqrt() + if p[0] > jump { 0.5 } else { 0.0 }
            })
            .collect();
        let u = GridFunction::new(mesh, vals).unwrap();
        let su = Samples::from_grid(&u, None);
        let sup_u = su.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hol_u = holder_seminorm(&su, alpha, PairStrategy::AllPairs).unwrap();
        for kk in [4, 16, 64] {
            let m = mollify(&u, kk, &DomainSpec::unit_box(n)).unwrap();
            let sm = Samples::from_grid(&m, None);
            let sup_m = sm.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let hol_m = holder_seminorm(&sm, alpha, PairStrategy::AllPairs).unwrap();
            worst = worst.max(sup_m - sup_u).max(hol_m - hol_u);
        }
    }
    verdict(
        9,
        "mollifier non-expansion",
        worst <= 1e-10,
        format!("20 rough functions x 3 radii, largest increase {worst:.2e}"),
    );
}
