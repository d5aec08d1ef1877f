use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use ellipt_core::elliptic::min_eigenvalue;
use ellipt_core::{DomainSpec, EllipticOperator, GridFunction, ScalarField};
use serde::Deserialize;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Extend,
    Solve,
    Perron,
    Resolvent,
    Evolve,
    VerifyAll,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Extend => "extend",
            Task::Solve => "solve",
            Task::Perron => "perron",
            Task::Resolvent => "resolvent",
            Task::Evolve => "evolve",
            Task::VerifyAll => "verify_all",
        }
    }
}

/// A coefficient or data field: a number, an expression in `x1..xn`, or a
/// grid file written by `GridFunction::write_csv`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Expr(String),
    Grid { grid: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub a: Vec<Vec<FieldSpec>>,
    pub b: Vec<FieldSpec>,
    pub c: FieldSpec,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainDesc {
    Interval { lo: f64, hi: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    HalfCuboid { dim: usize, half_width: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub f: Option<FieldSpec>,
    pub g: Option<FieldSpec>,
    pub u0: Option<FieldSpec>,
    /// Input of the extension task.
    pub u: Option<FieldSpec>,
    /// Known solution, compared against the direct solve.
    pub exact: Option<FieldSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub perron: f64,
    pub sandwich: f64,
    pub sup_ratio: f64,
    pub seam: f64,
    pub contraction: f64,
    pub exact: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            perron: 1e-6,
            sandwich: 1e-6,
            sup_ratio: 1e-6,
            seam: 1e-3,
            contraction: 1e-9,
            exact: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtensionSpec {
    /// Reflected points land in `[0, radius)` along the normal.
    pub radius: f64,
    /// End of the plateau of the 1D cutoff; defaults to the interval end.
    pub support: Option<f64>,
    pub charts: usize,
    pub shear: f64,
    pub seam_h: f64,
}

impl Default for ExtensionSpec {
    fn default() -> Self {
        ExtensionSpec {
            radius: 0.5,
            support: None,
            charts: 12,
            shear: 0.3,
            seam_h: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSpec {
    pub mu: Option<f64>,
    /// `mu = omega + shift` when `mu` is absent.
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveSpec {
    pub dt: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub task: Task,
    pub operator: OperatorSpec,
    pub domain: DomainDesc,
    #[serde(default)]
    pub data: DataSpec,
    pub mesh: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub extension: ExtensionSpec,
    #[serde(default)]
    pub resolvent: ResolventSpec,
    #[serde(default)]
    pub evolve: Option<EvolveSpec>,
}

fn default_alpha() -> f64 {
    0.5
}

/// A parsed scenario together with the text it came from, for error context.
#[derive(Debug, Clone)]
pub struct Source {
    pub text: String,
    /// Directory that grid paths are relative to.
    pub base: PathBuf,
    pub label: String,
}

impl Source {
    pub fn from_file(path: &Path) -> Result<Source> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read scenario {}", path.display()))?;
        Ok(Source {
            text,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
            label: path.display().to_string(),
        })
    }

    pub fn bundled(name: &str, text: &str) -> Source {
        Source {
            text: text.to_string(),
            base: PathBuf::from("."),
            label: format!("bundled:{name}"),
        }
    }

    /// 1-based line of the first occurrence of `needle`, searching from the
    /// first line that contains `after` when given.
    pub fn line_of(&self, needle: &str, after: Option<&str>) -> Option<usize> {
        let lines: Vec<&str> = self.text.lines().collect();
        let start = after
            .and_then(|a| lines.iter().position(|l| l.contains(a)))
            .unwrap_or(0);
        lines[start..]
            .iter()
            .position(|l| l.contains(needle))
            .map(|i| start + i + 1)
    }

    /// Validation error pointing at `key` (a JSON path such as `operator.a`).
    pub fn error(&self, key: &str, message: impl std::fmt::Display) -> anyhow::Error {
        let mut parts = key.split('.');
        let first = parts.next().unwrap_or(key);
        let last = key.rsplit('.').next().unwrap_or(key);
        let last = last.split('[').next().unwrap_or(last);
        let line = if first == last {
            self.line_of(&format!("\"{last}\""), None)
        } else {
            self.line_of(&format!("\"{last}\""), Some(&format!("\"{first}\"")))
        };
        match line {
            Some(l) => anyhow!("{}:{l}: invalid `{key}`: {message}", self.label),
            None => anyhow!("{}: invalid `{key}`: {message}", self.label),
        }
    }
}

pub fn parse(src: &Source) -> Result<Scenario> {
    let s: Scenario = serde_json::from_str(&src.text).map_err(|e| {
        anyhow!("{}: {e}", src.label)
    })?;
    if s.schema != SCHEMA {
        return Err(src.error("schema", format!("unsupported version {} (expected {SCHEMA})", s.schema)));
    }
    Ok(s)
}

/// Everything a task needs, built from a validated scenario.
pub struct Problem {
    pub scenario: Scenario,
    pub op: EllipticOperator,
    pub domain: DomainSpec,
    pub h: f64,
    pub f: ScalarField,
    pub g: ScalarField,
    pub u0: Option<ScalarField>,
    pub u: Option<ScalarField>,
    pub exact: Option<ScalarField>,
}

fn build_domain(d: &DomainDesc) -> ellipt_core::Result<DomainSpec> {
    match d {
        DomainDesc::Interval { lo, hi } => DomainSpec::interval(*lo, *hi),
        DomainDesc::Box { lo, hi } => DomainSpec::cuboid(lo.clone(), hi.clone()),
        DomainDesc::Ball { center, radius } => DomainSpec::ball(center.clone(), *radius),
        DomainDesc::HalfCuboid { dim, half_width } => DomainSpec::half_cuboid(*dim, *half_width),
    }
}

fn build_field(src: &Source, key: &str, spec: &FieldSpec, n: usize) -> Result<ScalarField> {
    match spec {
        FieldSpec::Number(v) => Ok(ScalarField::constant(*v, n)),
        FieldSpec::Expr(e) => {
            ScalarField::parse(e, n).map_err(|err| src.error(key, format!("{err} in \"{e}\"")))
        }
        FieldSpec::Grid { grid } => {
            let path = src.base.join(grid);
            if !path.exists() {
                return Err(src.error(key, format!("grid file {} does not exist", path.display())));
            }
            let g = GridFunction::read_csv(&path).map_err(|e| src.error(key, e))?;
            if g.dim() != n {
                return Err(src.error(key, format!("grid has dimension {}, domain has {n}", g.dim())));
            }
            Ok(g.to_field())
        }
    }
}

/// Smallest eigenvalue of `a` and largest coefficient modulus on a coarse
/// mesh of the closed domain.
fn sample_coefficients(op: &EllipticOperator, domain: &DomainSpec) -> Result<(f64, Vec<f64>, f64)> {
    let h = domain.diameter() / 20.0;
    let mut worst = (f64::INFINITY, vec![]);
    let mut big = 0.0f64;
    for p in domain.mesh(h)?.points().filter(|p| domain.contains_closed(p)) {
        let c = op.coefficients(&p)?;
        let e = min_eigenvalue(&c.a);
        if e < worst.0 {
            worst = (e, p.clone());
        }
        for row in &c.a {
            big = row.iter().fold(big, |m, v| m.max(v.abs()));
        }
        big = c.b.iter().fold(big, |m, v| m.max(v.abs())).max(c.c.abs());
    }
    Ok((worst.0, worst.1, big))
}

/// Validation plus construction; `mesh` and `seed` override the scenario.
pub fn build(src: &Source, mut s: Scenario, mesh: Option<f64>, seed: Option<u64>) -> Result<Problem> {
    if let Some(h) = mesh {
        s.mesh = h;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if !(s.mesh > 0.0 && s.mesh.is_finite()) {
        return Err(src.error("mesh", format!("{} must be positive", s.mesh)));
    }
    if !(s.alpha > 0.0 && s.alpha <= 1.0) {
        return Err(src.error("alpha", format!("{} must lie in (0, 1]", s.alpha)));
    }
    let domain = build_domain(&s.domain).map_err(|e| src.error("domain", e))?;
    let n = domain.dim();
    let o = &s.operator;
    if o.a.len() != n || o.a.iter().any(|r| r.len() != n) {
        return Err(src.error("operator.a", format!("expected a {n}x{n} matrix for a {n}-dimensional domain")));
    }
    if o.b.len() != n {
        return Err(src.error("operator.b", format!("expected {n} entries, found {}", o.b.len())));
    }
    let mut a = Vec::with_capacity(n);
    for (i, row) in o.a.iter().enumerate() {
        let mut r = Vec::with_capacity(n);
        for (j, spec) in row.iter().enumerate() {
            r.push(build_field(src, &format!("operator.a[{i}][{j}]"), spec, n)?);
        }
        a.push(r);
    }
    let b = o
        .b
        .iter()
        .enumerate()
        .map(|(i, spec)| build_field(src, &format!("operator.b[{i}]"), spec, n))
        .collect::<Result<Vec<_>>>()?;
    let c = build_field(src, "operator.c", &o.c, n)?;
    if !(o.lambda > 0.0) {
        return Err(src.error("operator.lambda", format!("{} must be positive", o.lambda)));
    }
    let op = EllipticOperator::new(a, b, c, o.lambda, o.big_lambda).map_err(|e| src.error("operator", e))?;
    let (min_eig, at, big) = sample_coefficients(&op, &domain)?;
    if !(min_eig > 0.0) {
        let what = if n == 1 { "a" } else { "a (smallest eigenvalue)" };
        return Err(src.error(
            "operator.a",
            format!("{what} = {min_eig} at x = {at:?}; the operator must be uniformly elliptic (a > 0)"),
        ));
    }
    if min_eig < o.lambda - 1e-12 {
        return Err(src.error(
            "operator.lambda",
            format!("{} exceeds the sampled ellipticity constant {min_eig}", o.lambda),
        ));
    }
    if big > o.big_lambda + 1e-12 {
        return Err(src.error(
            "operator.Lambda",
            format!("{} is below the sampled coefficient bound {big}", o.big_lambda),
        ));
    }

    let d = &s.data;
    let field = |key: &str, spec: &Option<FieldSpec>| -> Result<Option<ScalarField>> {
        spec.as_ref().map(|f| build_field(src, &format!("data.{key}"), f, n)).transpose()
    };
    let f = field("f", &d.f)?.unwrap_or_else(|| ScalarField::constant(0.0, n));
    let g = field("g", &d.g)?.unwrap_or_else(|| ScalarField::constant(0.0, n));
    let u0 = field("u0", &d.u0)?;
    let u = field("u", &d.u)?;
    let exact = field("exact", &d.exact)?;

    match s.task {
        Task::Extend if u.is_none() => return Err(src.error("data", "task `extend` needs `data.u`")),
        Task::Evolve if u0.is_none() => return Err(src.error("data", "task `evolve` needs `data.u0`")),
        Task::Evolve if s.evolve.is_none() => {
            return Err(src.error("task", "task `evolve` needs an `evolve` block with `dt` and `t_final`"))
        }
        _ => {}
    }
    if let Some(e) = &s.evolve {
        if !(e.dt > 0.0 && e.t_final > 0.0) {
            return Err(src.error("evolve", "`dt` and `t_final` must be positive"));
        }
    }
    Ok(Problem {
        op,
        domain,
        h: s.mesh,
        f,
        g,
        u0,
        u,
        exact,
        scenario: s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "schema": 1,
  "name": "t",
  "task": "solve",
  "operator": { "a": [[1, 0], [0, 1]], "b": [0, 0], "c": 0, "lambda": 1, "Lambda": 1 },
  "domain": { "kind": "box", "lo": [0, 0], "hi": [1, 1] },
  "data": { "g": "x1" },
  "mesh": 0.1
}"#;

    fn check(text: &str) -> Result<Problem> {
        let src = Source::bundled("t", text);
        build(&src, parse(&src)?, None, None)
    }

    #[test]
    fn valid_scenario_builds() {
        let p = check(BASE).unwrap();
        assert_eq!(p.domain.dim(), 2);
        assert_eq!(p.g.value(&[0.3, 0.9]), 0.3);
    }

    #[test]
    fn shape_and_bounds_are_validated() {
        let e = check(&BASE.replace("\"b\": [0, 0]", "\"b\": [0]")).err().unwrap();
        assert!(e.to_string().contains("`operator.b`"), "{e}");
        let e = check(&BASE.replace("\"lambda\": 1,", "\"lambda\": 2,")).err().unwrap();
        assert!(e.to_string().contains("`operator.lambda`"), "{e}");
        let e = check(&BASE.replace("\"Lambda\": 1", "\"Lambda\": 0.5")).err().unwrap();
        assert!(e.to_string().contains("`operator.Lambda`"), "{e}");
        let e = check(&BASE.replace("\"schema\": 1", "\"schema\": 2")).err().unwrap();
        assert!(e.to_string().contains("t:2"), "{e}");
        let e = check(&BASE.replace("\"solve\"", "\"evolve\"")).err().unwrap();
        assert!(e.to_string().contains("data.u0"), "{e}");
    }

    #[test]
    fn grid_files_are_loaded_relative_to_the_scenario() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = DomainSpec::unit_box(2).mesh(0.25).unwrap();
        let g = GridFunction::from_field(mesh, &ScalarField::parse("x1 + 2*x2", 2).unwrap()).unwrap();
        g.write_csv(&dir.path().join("g.csv")).unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, BASE.replace("\"g\": \"x1\"", "\"g\": { \"grid\": \"g.csv\" }")).unwrap();
        let src = Source::from_file(&path).unwrap();
        let p = build(&src, parse(&src).unwrap(), None, None).unwrap();
        assert!((p.g.value(&[0.5, 0.25]) - 1.0).abs() < 1e-12);

        std::fs::write(&path, BASE.replace("\"g\": \"x1\"", "\"g\": { \"grid\": \"missing.csv\" }")).unwrap();
        let src = Source::from_file(&path).unwrap();
        let e = build(&src, parse(&src).unwrap(), None, None).err().unwrap();
        assert!(e.to_string().contains("does not exist"), "{e}");
    }
}
