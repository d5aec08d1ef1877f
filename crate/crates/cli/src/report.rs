use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Deserializer, Serialize};

/// One verified property with its measured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub task: String,
    pub name: String,
    /// The mathematical statement the check exercises.
    pub anchor: String,
    pub passed: bool,
    #[serde(deserialize_with = "nullable_values")]
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub scenario: String,
    pub task: String,
    pub seed: u64,
    pub mesh: f64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

fn nullable_values<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
    let m: BTreeMap<String, Option<f64>> = BTreeMap::deserialize(d)?;
    Ok(m.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect())
}

impl Check {
    pub fn new(task: &str, name: &str, anchor: &str, passed: bool) -> Check {
        Check {
            task: task.into(),
            name: name.into(),
            anchor: anchor.into(),
            passed,
            values: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, v: f64) -> Check {
        self.values.insert(key.into(), v);
        self
    }
}

impl Results {
    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Fixed 17-significant-digit floats.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        // no negative zero
        "0.0000000000000000e0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Pretty JSON with every float written as `{:.16e}`.
struct FixedFloats(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedFloats(serde_json::ser::PrettyFormatter::new()),
    );
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf)?)
}

pub fn to_csv(r: &Results) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "check", "anchor", "passed", "key", "value"])?;
    for c in &r.checks {
        let passed = if c.passed { "true" } else { "false" };
        if c.values.is_empty() {
            w.write_record([&c.task, &c.name, &c.anchor, passed, "", ""])?;
        }
        for (k, v) in &c.values {
            w.write_record([&c.task, &c.name, &c.anchor, passed, k, &fmt_f64(*v)])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn to_text(r: &Results) -> String {
    let mut s = format!(
        "scenario {} (task {}, mesh {}, seed {})\n",
        r.scenario,
        r.task,
        fmt_f64(r.mesh),
        r.seed
    );
    for c in &r.checks {
        let _ = write!(
            s,
            "{} {}/{}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.task,
            c.name,
            c.anchor
        );
        for (k, v) in &c.values {
            let _ = write!(s, "; {k} = {}", fmt_f64(*v));
        }
        s.push('\n');
    }
    let _ = writeln!(
        s,
        "{}: {} of {} checks passed",
        if r.passed { "PASS" } else { "FAIL" },
        r.checks.iter().filter(|c| c.passed).count(),
        r.checks.len()
    );
    s
}

/// Writes `report.{json,csv}` and `report.txt`; returns the written paths.
pub fn emit(r: &Results, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    if r.checks.is_empty() {
        bail!("nothing to emit: the run produced no checks");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let (name, body) = match format {
        Format::Json => ("report.json", to_json(r)?),
        Format::Csv => ("report.csv", to_csv(r)?),
    };
    let main = dir.join(name);
    std::fs::write(&main, body).with_context(|| format!("cannot write {}", main.display()))?;
    let text = dir.join("report.txt");
    std::fs::write(&text, to_text(r)).with_context(|| format!("cannot write {}", text.display()))?;
    Ok(vec![main, text])
}

pub fn read_json(path: &Path) -> Result<Results> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Results {
        Results {
            scenario: "s".into(),
            task: "solve".into(),
            seed: 7,
            mesh: 0.05,
            passed: false,
            checks: vec![
                Check::new("solve", "a", "first", true).with("x", 1.0 / 3.0).with("nan", f64::NAN),
                Check::new("solve", "b", "second", false),
            ],
            artifacts: vec!["u.csv".into()],
        }
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        let text = to_json(&r).unwrap();
        assert!(text.contains("3.3333333333333331e-1"), "{text}");
        let back: Results = serde_json::from_str(&text).unwrap();
        assert_eq!(back.checks[0].values["x"], 1.0 / 3.0);
        assert!(back.checks[0].values["nan"].is_nan());
        assert_eq!(back.checks[1], r.checks[1]);
    }

    #[test]
    fn empty_results_are_rejected() {
        let mut r = sample();
        r.checks.clear();
        let dir = tempfile::tempdir().unwrap();
        assert!(emit(&r, dir.path(), Format::Json).is_err());
    }

    #[test]
    fn csv_has_one_row_per_value() {
        let text = to_csv(&sample()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(sample().first_failure().unwrap().name, "b");
    }
}
