use std::fs::File;
use std::io::{BufReader, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scalar::ScalarField;
use crate::error::{Error, Result};

/// Regular mesh `origin + h * index`, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub origin: Vec<f64>,
    pub h: f64,
    pub counts: Vec<usize>,
}

impl Mesh {
    pub fn new(origin: Vec<f64>, h: f64, counts: Vec<usize>) -> Result<Mesh> {
        if origin.len() != counts.len() || origin.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: origin.len(),
                found: counts.len(),
            });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::invalid("h", format!("spacing {h} must be positive")));
        }
        if let Some(c) = counts.iter().find(|&&c| c < 3) {
            return Err(Error::invalid(
                "counts",
                format!("{c} points on an axis; finite differences need at least 3"),
            ));
        }
        Ok(Mesh { origin, h, counts })
    }

    /// Mesh covering `[lo, hi]` with spacing `h` (the last node may overshoot
    /// `hi` by less than `h` when the extent is not a multiple of `h`).
    pub fn covering(lo: &[f64], hi: &[f64], h: f64) -> Result<Mesh> {
        let counts = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) / h - 1e-9).ceil().max(0.0) as usize + 1)
            .collect();
        Mesh::new(lo.to_vec(), h, counts)
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.counts[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let n = self.dim();
        let mut m = vec![0; n];
        for k in (0..n).rev() {
            m[k] = idx % self.counts[k];
            idx /= self.counts[k];
        }
        m
    }

    pub fn linear_index(&self, m: &[usize]) -> usize {
        m.iter().zip(&self.counts).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, idx: usize) -> Vec<f64> {
        self.point_of(&self.multi_index(idx))
    }

    pub fn point_of(&self, m: &[usize]) -> Vec<f64> {
        m.iter()
            .zip(&self.origin)
            .map(|(&i, &o)| o + self.h * i as f64)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.counts)
            .map(|(o, &c)| o + self.h * (c - 1) as f64)
            .collect()
    }

    /// Neighbor of `idx` shifted by `offset` steps along each axis.
    pub fn offset(&self, idx: usize, offset: &[isize]) -> Option<usize> {
        let m = self.multi_index(idx);
        let mut out = Vec::with_capacity(m.len());
        for k in 0..m.len() {
            let j = m[k] as isize + offset[k];
            if j < 0 || j >= self.counts[k] as isize {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.linear_index(&out))
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }
}

/// Values on a regular mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub mesh: Mesh,
    values: Vec<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    h: f64,
    origin: Vec<f64>,
    extents: Vec<f64>,
    counts: Vec<usize>,
    alpha: Option<f64>,
}

impl GridFunction {
    pub fn new(mesh: Mesh, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != mesh.len() {
            return Err(Error::DimensionMismatch {
                expected: mesh.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "values",
                format!("non-finite value at {:?}", mesh.point(i)),
            ));
        }
        Ok(GridFunction {
            mesh,
            values,
            alpha: None,
        })
    }

    pub fn from_field(mesh: Mesh, f: &ScalarField) -> Result<GridFunction> {
        let values = (0..mesh.len())
            .map(|i| f.try_value(&mesh.point(i)))
            .collect::<Result<Vec<_>>>()?;
        let alpha = f.holder_alpha();
        let mut g = GridFunction::new(mesh, values)?;
        g.alpha = alpha;
        Ok(g)
    }

    pub fn zeros(mesh: Mesh) -> GridFunction {
        let n = mesh.len();
        GridFunction {
            mesh,
            values: vec![0.0; n],
            alpha: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn h(&self) -> f64 {
        self.mesh.h
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Tensor-product Catmull-Rom interpolation. Exact for quadratics away
    /// from the mesh edge, C^1 across cells.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        let mut base = vec![0usize; n];
        let mut weights = vec![[0.0; 4]; n];
        for k in 0..n {
            let t = (x[k] - self.mesh.origin[k]) / self.mesh.h;
            let last = (self.mesh.counts[k] - 1) as f64;
            if t < -1e-9 || t > last + 1e-9 {
                return Err(Error::OutOfDomain { point: x.to_vec() });
            }
            let t = t.clamp(0.0, last);
            let cell = (t.floor() as usize).min(self.mesh.counts[k] - 2);
            let s = t - cell as f64;
            base[k] = cell;
            weights[k] = catmull_rom(s);
        }
        let mut total = 0.0;
        let mut idx = vec![0usize; n];
        for combo in 0..4usize.pow(n as u32) {
            let mut c = combo;
            let mut w = 1.0;
            for k in 0..n {
                let o = c % 4;
                c /= 4;
                w *= weights[k][o];
                // clamp stencil at the edges (constant extrapolation of the ghost)
                let j = base[k] as isize + o as isize - 1;
                idx[k] = j.clamp(0, self.mesh.counts[k] as isize - 1) as usize;
            }
            if w != 0.0 {
                total += w * self.values[self.mesh.linear_index(&idx)];
            }
        }
        Ok(total)
    }

    pub fn to_field(&self) -> ScalarField {
        let g = self.clone();
        let f = ScalarField::from_fn(self.dim(), move |x| g.interpolate(x));
        let f = f.with_support_hint(self.mesh.origin.clone(), self.mesh.upper());
        match self.alpha {
            Some(a) => f.with_holder_alpha(a).unwrap_or_else(|_| unreachable!()),
            None => f,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            alpha: self.alpha,
        }
    }

    /// Write `x1..xn,value` rows plus a JSON sidecar next to `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let n = self.dim();
        let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        w.write_record(&header)?;
        for (i, v) in self.values.iter().enumerate() {
            let mut rec: Vec<String> = self
                .mesh
                .point(i)
                .iter()
                .map(|c| format!("{c:.16e}"))
                .collect();
            rec.push(format!("{v:.16e}"));
            w.write_record(&rec)?;
        }
        w.flush()?;
        let side = Sidecar {
            h: self.mesh.h,
            origin: self.mesh.origin.clone(),
            extents: self
                .mesh
                .counts
                .iter()
                .map(|&c| self.mesh.h * (c - 1) as f64)
                .collect(),
            counts: self.mesh.counts.clone(),
            alpha: self.alpha,
        };
        let mut f = File::create(path.with_extension("json"))?;
        f.write_all(serde_json::to_string_pretty(&side)?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<GridFunction> {
        let side: Sidecar =
            serde_json::from_reader(BufReader::new(File::open(path.with_extension("json"))?))?;
        let mesh = Mesh::new(side.origin, side.h, side.counts)?;
        let mut r = csv::Reader::from_path(path)?;
        let n = mesh.dim();
        let header = r.headers()?.clone();
        if header.len() != n + 1 || &header[n] != "value" {
            return Err(Error::GridFormat(format!(
                "expected header x1..x{n},value, found {:?}",
                header.iter().collect::<Vec<_>>()
            )));
        }
        let mut values = Vec::with_capacity(mesh.len());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let v: f64 = rec[n]
                .trim()
                .parse()
                .map_err(|_| Error::GridFormat(format!("row {}: bad value", row + 2)))?;
            values.push(v);
        }
        let mut g = GridFunction::new(mesh, values)?;
        g.alpha = side.alpha;
        Ok(g)
    }
}

fn catmull_rom(s: f64) -> [f64; 4] {
    let s2 = s * s;
    let s3 = s2 * s;
    [
        0.5 * (-s3 + 2.0 * s2 - s),
        0.5 * (3.0 * s3 - 5.0 * s2 + 2.0),
        0.5 * (-3.0 * s3 + 4.0 * s2 + s),
        0.5 * (s3 - s2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_round_trip() {
        let m = Mesh::new(vec![0.0, -1.0, 2.0], 0.5, vec![3, 4, 5]).unwrap();
        for i in 0..m.len() {
            assert_eq!(m.linear_index(&m.multi_index(i)), i);
        }
        assert_eq!(m.point(m.len() - 1), vec![1.0, 0.5, 4.0]);
        assert_eq!(m.offset(0, &[0, 0, -1]), None);
        assert_eq!(m.offset(0, &[1, 0, 0]), Some(20));
    }

    #[test]
    fn rejects_thin_mesh_and_nan() {
        assert!(Mesh::new(vec![0.0], 0.1, vec![2]).is_err());
        let m = Mesh::new(vec![0.0], 0.5, vec![3]).unwrap();
        assert!(GridFunction::new(m, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn interpolation_reproduces_quadratics_inside() {
        let m = Mesh::covering(&[0.0, 0.0], &[1.0, 1.0], 0.1).unwrap();
        let f = ScalarField::parse("x1^2 - 3*x1*x2 + x2", 2).unwrap();
        let g = GridFunction::from_field(m, &f).unwrap();
        let p = [0.43, 0.57];
        assert!((g.interpolate(&p).unwrap() - f.value(&p)).abs() < 1e-12);
        assert!(g.interpolate(&[1.2, 0.5]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        let m = Mesh::covering(&[0.0], &[1.0], 0.25).unwrap();
        let mut g = GridFunction::from_field(m, &ScalarField::parse("sin(x1)", 1).unwrap()).unwrap();
        g.alpha = Some(0.5);
        g.write_csv(&path).unwrap();
        let back = GridFunction::read_csv(&path).unwrap();
        assert_eq!(back, g);
    }
}
