//! Small dense helpers and a CSR sparse matrix for collective operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type CMat = DMatrix<C64>;
pub type RMat = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn dagger(m: &CMat) -> CMat {
    m.adjoint()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Hilbert–Schmidt inner product Tr(a† b).
pub fn hs(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_error(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn outer(a: &DVector<C64>, b: &DVector<C64>) -> CMat {
    a * b.adjoint()
}

pub fn vdot(a: &DVector<C64>, b: &DVector<C64>) -> C64 {
    a.dotc(b)
}

/// Eigenvalues and eigenvectors of a real symmetric matrix, ascending.
pub fn sym_eig(m: &RMat) -> (Vec<f64>, RMat) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = idx.iter().map(|&k| e.eigenvalues[k]).collect();
    let vecs = RMat::from_fn(n, n, |r, col| e.eigenvectors[(r, idx[col])]);
    (vals, vecs)
}

pub fn sym_eigvals(m: &RMat) -> Vec<f64> {
    sym_eig(m).0
}

/// Operator 2-norm of a small complex matrix.
pub fn op_norm(m: &CMat) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Compressed sparse row complex matrix.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<C64>,
}

impl Csr {
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, C64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<C64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, col, v) in trip {
            if last == Some((r, col)) {
                *data.last_mut().unwrap() += v;
                continue;
            }
            indices.push(col);
            data.push(v);
            indptr[r + 1] += 1;
            last = Some((r, col));
        }
        for r in 0..n {
            indptr[r + 1] += indptr[r];
        }
        let mut m = Csr { n, indptr, indices, data };
        m.prune(0.0);
        m
    }

    fn prune(&mut self, tol: f64) {
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.data[k].norm() > tol {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn identity(n: usize) -> Self {
        Csr::from_triplets(n, (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, C64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                out.push((r, self.indices[k], self.data[k]));
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Csr::from_triplets(
            self.n,
            self.triplets().into_iter().map(|(r, c, v)| (c, r, v.conj())).collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    pub fn add(&self, other: &Csr) -> Self {
        let mut t = self.triplets();
        t.extend(other.triplets());
        Csr::from_triplets(self.n, t)
    }

    pub fn matmul(&self, other: &Csr) -> Self {
        let mut t = Vec::new();
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let j = self.indices[k];
                let a = self.data[k];
                for l in other.indptr[j]..other.indptr[j + 1] {
                    t.push((r, other.indices[l], a * other.data[l]));
                }
            }
        }
        Csr::from_triplets(self.n, t)
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.data[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for (_, c, v) in self.triplets() {
            col[c] += v.norm();
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|r| {
                (self.indptr[r]..self.indptr[r + 1])
                    .map(|k| self.data[k] * x[self.indices[k]])
                    .sum()
            })
            .collect()
    }

    /// out = self · x for a row-major dense n×n matrix x.
    pub fn mul_dense_into(&self, x: &[C64], out: &mut [C64]) {
        let n = self.n;
        out.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for r in 0..n {
            let orow = &mut out[r * n..(r + 1) * n];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.data[k];
                let xrow = &x[self.indices[k] * n..(self.indices[k] + 1) * n];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += a * xv;
                }
            }
        }
    }

    /// out += s · self · x.
    pub fn mul_dense_acc(&self, x: &[C64], s: C64, out: &mut [C64]) {
        let n = self.n;
        for r in 0..n {
            let orow = &mut out[r * n..(r + 1) * n];
            for k in self.indptr[r]..self.indptr[r + 1] {
                let a = self.data[k] * s;
                let xrow = &x[self.indices[k] * n..(self.indices[k] + 1) * n];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += a * xv;
                }
            }
        }
    }
}

/// Row-major conjugate transpose of a dense n×n matrix.
pub fn adjoint_into(x: &[C64], n: usize, out: &mut [C64]) {
    const B: usize = 32;
    for ib in (0..n).step_by(B) {
        for jb in (0..n).step_by(B) {
            for i in ib..(ib + B).min(n) {
                for j in jb..(jb + B).min(n) {
                    out[j * n + i] = x[i * n + j].conj();
                }
            }
        }
    }
}
