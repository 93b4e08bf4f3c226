//! Exact Lindblad evolution in the permutation-symmetric (bosonic Fock) subspace.

use crate::cumulant::{GellMannBasis, SpinCovariance};
use crate::error::{Error, Result};
use crate::linalg::{adjoint_into, c, CMat, Csr, RMat};
use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use std::collections::HashMap;

pub const DEFAULT_MAX_DIM: usize = 6000;

#[derive(Clone, Debug)]
pub struct SymmetricBasis {
    pub ell: usize,
    pub n: usize,
    pub states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r as usize
}

/// Occupation tuples with Σn = N in descending lexicographic order, so that
/// index 0 is |N, 0, …, 0⟩.
pub fn symmetric_basis(ell: usize, n: usize, max_dim: usize) -> Result<SymmetricBasis> {
    if ell < 2 || n < 1 {
        return Err(Error::Domain(format!("need ell >= 2 and N >= 1, got ell = {ell}, N = {n}")));
    }
    let dim = binomial(n + ell - 1, ell - 1);
    if dim > max_dim {
        return Err(Error::Resource { dim, cap: max_dim });
    }
    let mut states = Vec::with_capacity(dim);
    let mut cur = vec![0u16; ell];
    fn rec(pos: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Vec<u16>>) {
        if pos == cur.len() - 1 {
            cur[pos] = left as u16;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[pos] = k as u16;
            rec(pos + 1, left - k, cur, out);
        }
    }
    rec(0, n, &mut cur, &mut states);
    let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
    Ok(SymmetricBasis { ell, n, states, index })
}

impl SymmetricBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Second quantization Σ_jk op_jk a_j† a_k.
    pub fn collective(&self, op: &CMat) -> Csr {
        let mut trip = Vec::new();
        let l = self.ell;
        for (col, occ) in self.states.iter().enumerate() {
            for k in 0..l {
                if occ[k] == 0 {
                    continue;
                }
                for j in 0..l {
                    let a = op[(j, k)];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    if j == k {
                        trip.push((col, col, a * occ[k] as f64));
                        continue;
                    }
                    let mut new = occ.clone();
                    new[k] -= 1;
                    new[j] += 1;
                    let amp = (occ[k] as f64).sqrt() * (new[j] as f64).sqrt();
                    let row = self.index[&new];
                    trip.push((row, col, a * amp));
                }
            }
        }
        Csr::from_triplets(self.dim(), trip)
    }

    /// Amplitudes of ψ^{⊗N} in this basis.
    pub fn product_state(&self, psi: &DVector<C64>) -> Vec<C64> {
        let lnfact: Vec<f64> = (0..=self.n).scan(0.0, |acc, k| {
            if k > 0 {
                *acc += (k as f64).ln();
            }
            Some(*acc)
        }).collect();
        self.states
            .iter()
            .map(|occ| {
                let mut ln = 0.5 * lnfact[self.n];
                let mut phase = c(1.0, 0.0);
                for (j, &nj) in occ.iter().enumerate() {
                    if nj == 0 {
                        continue;
                    }
                    let a = psi[j];
                    if a.norm() == 0.0 {
                        return c(0.0, 0.0);
                    }
                    ln += nj as f64 * a.norm().ln() - 0.5 * lnfact[nj as usize];
                    phase *= (a / a.norm()).powu(nj as u32);
                }
                phase * ln.exp()
            })
            .collect()
    }
}

/// Row-major dense density matrix.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub dim: usize,
    pub data: Vec<C64>,
    pub time: f64,
}

impl DensityMatrix {
    pub fn pure(amps: &[C64]) -> Self {
        let dim = amps.len();
        let mut data = vec![c(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                data[i * dim + j] = amps[i] * amps[j].conj();
            }
        }
        DensityMatrix { dim, data, time: 0.0 }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut e: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                e = e.max((self.data[i * n + j] - self.data[j * n + i].conj()).norm());
            }
        }
        e
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += (self.data[i * n + j] * self.data[j * n + i]).re;
            }
        }
        s
    }

    /// Tr(A ρ) for a sparse operator A.
    pub fn expect(&self, a: &Csr) -> C64 {
        let n = self.dim;
        let mut s = c(0.0, 0.0);
        for r in 0..n {
            for k in a.indptr[r]..a.indptr[r + 1] {
                s += a.data[k] * self.data[a.indices[k] * n + r];
            }
        }
        s
    }

    pub fn to_dense(&self) -> CMat {
        CMat::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = self.to_dense();
        let h = (&m + m.adjoint()) * c(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Tr(A X) for sparse A and dense row-major X.
pub fn trace_product(a: &Csr, x: &[C64], n: usize) -> C64 {
    let mut s = c(0.0, 0.0);
    for r in 0..n {
        for k in a.indptr[r]..a.indptr[r + 1] {
            s += a.data[k] * x[a.indices[k] * n + r];
        }
    }
    s
}

pub fn prepare_initial(basis: &SymmetricBasis, psi: &DVector<C64>) -> DensityMatrix {
    DensityMatrix::pure(&basis.product_state(psi))
}

/// Superoperator pieces for dρ/dτ = −i[H, ρ] + Σ r (LρL† − ½{L†L, ρ}).
#[derive(Clone, Debug)]
pub struct Lindbladian {
    pub dim: usize,
    h: Option<Csr>,
    jumps: Vec<(f64, Csr, Csr)>,
}

impl Lindbladian {
    pub fn new(h: Option<Csr>, jumps: Vec<(f64, Csr)>) -> Self {
        let dim = h.as_ref().map(|m| m.n).or_else(|| jumps.first().map(|j| j.1.n)).unwrap_or(0);
        let jumps = jumps
            .into_iter()
            .map(|(r, l)| {
                let ldl = l.adjoint().matmul(&l);
                (r, l, ldl)
            })
            .collect();
        Lindbladian { dim, h, jumps }
    }

    /// Upper bound on the generator norm, used to choose a stable RK4 step.
    pub fn norm_bound(&self) -> f64 {
        let mut b = self.h.as_ref().map_or(0.0, |h| 2.0 * h.norm_inf());
        for (r, l, _) in &self.jumps {
            b += 2.0 * r * l.norm_inf() * l.norm_one();
        }
        b
    }

    /// out = L(ρ), assembled as Z + Z† with Z = −iHρ + Σ r(½LρL† − ½L†Lρ).
    pub fn apply(&self, rho: &[C64], out: &mut [C64], s1: &mut [C64], s2: &mut [C64]) {
        let n = self.dim;
        out.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        if let Some(h) = &self.h {
            h.mul_dense_acc(rho, c(0.0, -1.0), out);
        }
        for (rate, l, ldl) in &self.jumps {
            l.mul_dense_into(rho, s1);
            adjoint_into(s1, n, s2);
            l.mul_dense_acc(s2, c(0.5 * rate, 0.0), out);
            ldl.mul_dense_acc(rho, c(-0.5 * rate, 0.0), out);
        }
        adjoint_into(out, n, s1);
        for (o, v) in out.iter_mut().zip(s1.iter()) {
            *o += v;
        }
    }
}

#[derive(Clone, Debug)]
pub struct EdReport {
    pub steps: usize,
    pub dt: f64,
    pub trace_drift: f64,
}

/// Operators of a Lindbladian restricted to one invariant sector.
struct SectorOps {
    idx: Vec<usize>,
    h: Option<Csr>,
    /// (rate, L, L†, L†L)
    jumps: Vec<(f64, Csr, Csr, Csr)>,
}

fn restrict(a: &Csr, idx: &[usize], local: &[usize]) -> Csr {
    let mut trip = Vec::new();
    for (r, &g) in idx.iter().enumerate() {
        for k in a.indptr[g]..a.indptr[g + 1] {
            trip.push((r, local[a.indices[k]], a.data[k]));
        }
    }
    Csr::from_triplets(idx.len(), trip)
}

/// out (m×n) += s · a (m×m) · x (m×n).
fn left_acc(a: &Csr, x: &[C64], n: usize, s: C64, out: &mut [C64]) {
    for r in 0..a.n {
        let orow = &mut out[r * n..(r + 1) * n];
        for k in a.indptr[r]..a.indptr[r + 1] {
            let v = a.data[k] * s;
            let j = a.indices[k];
            for (o, xv) in orow.iter_mut().zip(&x[j * n..(j + 1) * n]) {
                *o += v * xv;
            }
        }
    }
}

/// out (m×n) += s · x (m×n) · b (n×n).
fn right_acc(x: &[C64], b: &Csr, s: C64, out: &mut [C64]) {
    let n = b.n;
    let m = x.len() / n.max(1);
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for (kk, xv) in x[r * n..(r + 1) * n].iter().enumerate() {
            if xv.re == 0.0 && xv.im == 0.0 {
                continue;
            }
            let v = xv * s;
            for q in b.indptr[kk]..b.indptr[kk + 1] {
                orow[b.indices[q]] += v * b.data[q];
            }
        }
    }
}

impl Lindbladian {
    /// Index sets left invariant by every operator of the generator.
    pub fn sectors(&self) -> Vec<Vec<usize>> {
        let n = self.dim;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        let mut ops: Vec<&Csr> = self.h.iter().collect();
        for (_, l, ldl) in &self.jumps {
            ops.push(l);
            ops.push(ldl);
        }
        for a in ops {
            for r in 0..n {
                for k in a.indptr[r]..a.indptr[r + 1] {
                    let (x, y) = (find(&mut parent, r), find(&mut parent, a.indices[k]));
                    if x != y {
                        parent[x.max(y)] = x.min(y);
                    }
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..n {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    fn sector_ops(&self) -> Vec<SectorOps> {
        let mut local = vec![usize::MAX; self.dim];
        self.sectors()
            .into_iter()
            .map(|idx| {
                for (k, &g) in idx.iter().enumerate() {
                    local[g] = k;
                }
                let h = self.h.as_ref().map(|h| restrict(h, &idx, &local));
                let jumps = self
                    .jumps
                    .iter()
                    .map(|(r, l, ldl)| {
                        let lr = restrict(l, &idx, &local);
                        (*r, lr.clone(), lr.adjoint(), restrict(ldl, &idx, &local))
                    })
                    .collect();
                SectorOps { idx, h, jumps }
            })
            .collect()
    }
}

/// Generator acting on the block ρ_IJ.
fn block_rhs(a: &SectorOps, b: &SectorOps, x: &[C64], out: &mut [C64], s: &mut [C64]) {
    let n = b.idx.len();
    out.iter_mut().for_each(|v| *v = c(0.0, 0.0));
    if let (Some(ha), Some(hb)) = (&a.h, &b.h) {
        left_acc(ha, x, n, c(0.0, -1.0), out);
        right_acc(x, hb, c(0.0, 1.0), out);
    }
    for ((rate, la, _, ldla), (_, _, lbd, ldlb)) in a.jumps.iter().zip(&b.jumps) {
        s.iter_mut().for_each(|v| *v = c(0.0, 0.0));
        right_acc(x, lbd, c(1.0, 0.0), s);
        left_acc(la, s, n, c(*rate, 0.0), out);
        left_acc(ldla, x, n, c(-0.5 * rate, 0.0), out);
        right_acc(x, ldlb, c(-0.5 * rate, 0.0), out);
    }
}

struct Block {
    a: usize,
    b: usize,
    x: Vec<C64>,
}

fn rk4_block(ops: &[SectorOps], blk: &mut Block, h: f64, nsteps: usize) {
    let (a, b) = (&ops[blk.a], &ops[blk.b]);
    let len = blk.x.len();
    let z = c(0.0, 0.0);
    let (mut k, mut acc, mut tmp, mut s) = (vec![z; len], vec![z; len], vec![z; len], vec![z; len]);
    for _ in 0..nsteps {
        let y = &blk.x;
        block_rhs(a, b, y, &mut k, &mut s);
        for i in 0..len {
            acc[i] = y[i] + k[i] * (h / 6.0);
            tmp[i] = y[i] + k[i] * (h / 2.0);
        }
        block_rhs(a, b, &tmp, &mut k, &mut s);
        for i in 0..len {
            acc[i] += k[i] * (h / 3.0);
            tmp[i] = y[i] + k[i] * (h / 2.0);
        }
        block_rhs(a, b, &tmp, &mut k, &mut s);
        for i in 0..len {
            acc[i] += k[i] * (h / 3.0);
            tmp[i] = y[i] + k[i] * h;
        }
        block_rhs(a, b, &tmp, &mut k, &mut s);
        for i in 0..len {
            acc[i] += k[i] * (h / 6.0);
        }
        std::mem::swap(&mut blk.x, &mut acc);
    }
}

/// Fixed-step RK4 from ρ.time through each time in `t_out`, calling `observe`
/// at every output time (including the start when it equals ρ.time).
/// Invariant sectors of the generator are integrated block by block.
pub fn ed_integrate<F>(rho: &mut DensityMatrix, lind: &Lindbladian, t_out: &[f64], dt: f64, mut observe: F) -> Result<EdReport>
where
    F: FnMut(&DensityMatrix),
{
    let n = rho.dim;
    let ops = lind.sector_ops();
    let mut blocks = Vec::new();
    for a in 0..ops.len() {
        for b in a..ops.len() {
            let (ia, ib) = (&ops[a].idx, &ops[b].idx);
            let mut x = Vec::with_capacity(ia.len() * ib.len());
            for &r in ia {
                for &q in ib {
                    x.push(rho.data[r * n + q]);
                }
            }
            blocks.push(Block { a, b, x });
        }
    }
    let tr0 = rho.trace().re;
    let mut steps = 0;
    for &target in t_out {
        if target < rho.time - 1e-12 {
            return Err(Error::Integrator { t: rho.time, msg: "output times must be non-decreasing".into() });
        }
        let span = target - rho.time;
        let nsteps = (span / dt - 1e-9).ceil().max(0.0) as usize;
        if nsteps > 0 {
            let h = span / nsteps as f64;
            blocks.par_iter_mut().for_each(|blk| rk4_block(&ops, blk, h, nsteps));
            for blk in &blocks {
                let (ia, ib) = (&ops[blk.a].idx, &ops[blk.b].idx);
                for (p, &r) in ia.iter().enumerate() {
                    for (q, &col) in ib.iter().enumerate() {
                        let v = blk.x[p * ib.len() + q];
                        rho.data[r * n + col] = v;
                        rho.data[col * n + r] = v.conj();
                    }
                }
            }
            steps += nsteps;
        }
        rho.time = target;
        observe(rho);
    }
    let drift = (rho.trace().re - tr0).abs();
    if drift > 1e-6 {
        return Err(Error::Accuracy(format!("trace drift {drift:.3e} exceeds 1e-6; reduce the step")));
    }
    Ok(EdReport { steps, dt, trace_drift: drift })
}

/// exp(A) applied to a dense row-major matrix by scaled Taylor steps.
pub fn expm_apply(a: &Csr, x: &[C64], out: &mut Vec<C64>) {
    let n = a.n;
    let norm = a.norm_inf().max(a.norm_one());
    let s = (norm / 0.5).ceil().max(1.0) as usize;
    let scaled = a.scale(c(1.0 / s as f64, 0.0));
    let mut cur = x.to_vec();
    let mut term = vec![c(0.0, 0.0); n * n];
    let mut next = vec![c(0.0, 0.0); n * n];
    for _ in 0..s {
        term.copy_from_slice(&cur);
        for k in 1..60 {
            scaled.mul_dense_into(&term, &mut next);
            let inv = 1.0 / k as f64;
            let mut tn: f64 = 0.0;
            for (t, v) in term.iter_mut().zip(next.iter()) {
                *t = v * inv;
                tn = tn.max(t.norm());
            }
            for (cv, t) in cur.iter_mut().zip(term.iter()) {
                *cv += t;
            }
            if tn < 1e-17 {
                break;
            }
        }
    }
    *out = cur;
}

/// ρ → U ρ U† with U = exp(−i·angle·collective(generator)).
pub fn rotate(rho: &mut DensityMatrix, basis: &SymmetricBasis, generator: &CMat, angle: f64) {
    let a = basis.collective(generator).scale(c(0.0, -angle));
    let n = rho.dim;
    let mut ur = Vec::new();
    expm_apply(&a, &rho.data, &mut ur);
    let mut adj = vec![c(0.0, 0.0); n * n];
    adjoint_into(&ur, n, &mut adj);
    let mut out = Vec::new();
    expm_apply(&a, &adj, &mut out);
    rho.data = out;
}

/// Collective Gell-Mann operators for ED moment evaluation.
pub struct CollectiveGellMann {
    pub ops: Vec<Csr>,
}

impl CollectiveGellMann {
    pub fn new(basis: &SymmetricBasis, gm: &GellMannBasis) -> Self {
        CollectiveGellMann { ops: gm.generators.iter().map(|g| basis.collective(g)).collect() }
    }

    /// Means ⟨G_k⟩ and symmetrized second moments ⟨{G_k, G_l}⟩/2.
    pub fn moments(&self, rho: &DensityMatrix) -> (Vec<f64>, RMat) {
        let n = rho.dim;
        let l = self.ops.len();
        let mean: Vec<f64> = self.ops.iter().map(|g| rho.expect(g).re).collect();
        let mut second = RMat::zeros(l, l);
        let mut y = vec![c(0.0, 0.0); n * n];
        for b in 0..l {
            self.ops[b].mul_dense_into(&rho.data, &mut y);
            for a in 0..l {
                let v = trace_product(&self.ops[a], &y, n);
                second[(a, b)] += 0.5 * v.re;
                second[(b, a)] += 0.5 * v.re;
            }
        }
        (mean, second)
    }
}

/// Normalized spin covariance Σ̃/(2N) and its leading eigenvalues.
pub fn ed_covariance(rho: &DensityMatrix, gm: &CollectiveGellMann, n_atoms: usize, ell: usize) -> SpinCovariance {
    let (mean, second) = gm.moments(rho);
    let l = mean.len();
    let cov = RMat::from_fn(l, l, |a, b| (second[(a, b)] - mean[a] * mean[b]) / n_atoms as f64);
    SpinCovariance::from_cov(&cov, ell)
}

/// RK4 step in τ units from the generator norm bound, capped at `cap`.
pub fn default_step(lind: &Lindbladian, cap: f64) -> f64 {
    (2.0 / lind.norm_bound().max(1e-12)).min(cap)
}

pub const DEFAULT_STEP_CAP: f64 = 0.1;

/// Superradiant model in τ = NΓt units: single jump 𝒟⁻ = D̂⁻ + iωN at rate
/// 1/N, with ω = Ω/(NΓ). Equivalent to the drive Ω D̂^x plus the bare jump.
pub fn superradiance_lindbladian(basis: &SymmetricBasis, d_minus: &CMat, omega: f64) -> Lindbladian {
    let n = basis.n as f64;
    let dm = basis.collective(d_minus);
    let shift = Csr::identity(basis.dim()).scale(c(0.0, omega * n));
    Lindbladian::new(None, vec![(1.0 / n, dm.add(&shift))])
}

/// Same model with the drive kept as the Hamiltonian ω D̂^x (τ units).
pub fn superradiance_lindbladian_hamiltonian(basis: &SymmetricBasis, d_minus: &CMat, d_x: &CMat, omega: f64) -> Lindbladian {
    let n = basis.n as f64;
    let h = basis.collective(d_x).scale(c(omega, 0.0));
    Lindbladian::new(Some(h), vec![(1.0 / n, basis.collective(d_minus))])
}
