use crate::error::{Error, Result};

/// Above this many unknowns the iterative solver is used.
pub const DIRECT_LIMIT: usize = 10_000;
/// Relative residual target of the iterative solver.
pub const ITERATIVE_TOL: f64 = 1e-10;

/// Compressed sparse rows.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n: usize,
    pub rowptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// From per-row `(column, value)` lists; duplicates are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Csr {
        let n = rows.len();
        let mut rowptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        rowptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if cols.len() > *rowptr.last().expect("nonempty") && *cols.last().expect("nonempty") == c {
                    *vals.last_mut().expect("nonempty") += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            rowptr.push(cols.len());
        }
        Csr {
            n,
            rowptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.rowptr[i]..self.rowptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }
}

/// Banded LU without pivoting; the discretized operators are diagonally
/// dominant M-matrices, for which it is stable.
#[derive(Debug, Clone)]
pub(crate) struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<BandLu> {
        let n = a.n;
        let (kl, ku) = a.bandwidths();
        let w = kl + ku + 1;
        let mut data = vec![0.0; n * w];
        let at = |i: usize, j: usize| i * w + j + kl - i;
        let mut scale = vec![0.0f64; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                data[at(i, j)] = v;
                scale[i] = scale[i].max(v.abs());
            }
        }
        for k in 0..n {
            let p = data[at(k, k)];
            if !(p.abs() > 1e-14 * scale[k]) {
                return Err(Error::SingularSystem { row: k, pivot: p });
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let l = data[at(i, k)] / p;
                if l == 0.0 {
                    continue;
                }
                data[at(i, k)] = l;
                for j in k + 1..=jmax {
                    data[at(i, j)] -= l * data[at(k, j)];
                }
            }
        }
        Ok(BandLu { n, kl, ku, data })
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        let at = |i: usize, j: usize| i * w + j + kl - i;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(kl)..i {
                s -= self.data[at(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + ku).min(n.saturating_sub(1)) {
                s -= self.data[at(i, j)] * b[j];
            }
            b[i] = s / self.data[at(i, i)];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB. Returns the solution and the iteration count.
pub(crate) fn bicgstab(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.n;
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.row(i).find(|e| e.0 == i).map_or(0.0, |e| e.1);
            if d == 0.0 {
                Err(Error::SingularSystem { row: i, pivot: d })
            } else {
                Ok(1.0 / d)
            }
        })
        .collect::<Result<_>>()?;
    let target = tol * norm(b).max(f64::MIN_POSITIVE);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    if norm(&r) <= target {
        return Ok((x, 0));
    }
    let r0 = r.clone();
    let (mut rho, mut alpha, mut om) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / om);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - om * v[i]);
            y[i] = inv_diag[i] * p[i];
        }
        a.mul(&y, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = inv_diag[i] * s[i];
        }
        a.mul(&z, &mut t);
        om = dot(&t, &s) / dot(&t, &t);
        for i in 0..n {
            x[i] += alpha * y[i] + om * z[i];
            r[i] = s[i] - om * t[i];
        }
        if norm(&r) <= target {
            return Ok((x, it));
        }
        if om == 0.0 || !om.is_finite() {
            break;
        }
    }
    let mut ax = vec![0.0; n];
    a.mul(&x, &mut ax);
    let res = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    Err(Error::SolverStalled {
        iterations: max_iter,
        residual: res / norm(b).max(f64::MIN_POSITIVE),
    })
}

/// Factored or iterative solver for one matrix.
#[derive(Debug, Clone)]
pub(crate) enum LinearSolver {
    Band(BandLu),
    Iterative(Csr),
}

impl LinearSolver {
    pub fn new(a: Csr) -> Result<LinearSolver> {
        if a.n <= DIRECT_LIMIT {
            Ok(LinearSolver::Band(BandLu::factor(&a)?))
        } else {
            Ok(LinearSolver::Iterative(a))
        }
    }

    pub fn method(&self) -> &'static str {
        match self {
            LinearSolver::Band(_) => "banded-lu",
            LinearSolver::Iterative(_) => "bicgstab",
        }
    }

    /// Solution and iteration count (1 for the direct solve).
    pub fn solve(&self, b: &[f64]) -> Result<(Vec<f64>, usize)> {
        match self {
            LinearSolver::Band(lu) => {
                let mut x = b.to_vec();
                lu.solve(&mut x);
                Ok((x, 1))
            }
            LinearSolver::Iterative(a) => bicgstab(a, b, ITERATIVE_TOL, 20 * a.n.max(100)),
        }
    }
}
