//! Compressed-row complex operators tagged with the basis they act on.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::basis::BasisHash;

pub type C64 = Complex64;

/// Entries smaller than this are dropped at assembly.
pub const DROP_TOL: f64 = 1e-15;

/// Per-entry Hermiticity tolerance, relative to max(1, |a_ij|).
pub const HERMITIAN_TOL: f64 = 1e-14;

const MAGIC: &[u8; 8] = b"XYQCOP\0\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("basis mismatch: operator on {expected}, got {got}")]
    BasisMismatch { expected: BasisHash, got: BasisHash },
    #[error("dimension mismatch: {0} vs {1}")]
    Dimension(usize, usize),
    #[error("index ({row}, {col}) outside dimension {dim}")]
    Index { row: usize, col: usize, dim: usize },
    #[error("not a valid operator file: {0}")]
    Format(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Accumulates (row, col, value) entries; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    dim: usize,
    basis_hash: BasisHash,
    entries: Vec<(u32, u32, C64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize, basis_hash: BasisHash) -> Self {
        Self { dim, basis_hash, entries: Vec::new() }
    }

    pub fn with_capacity(dim: usize, basis_hash: BasisHash, cap: usize) -> Self {
        Self { dim, basis_hash, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, row: usize, col: usize, v: C64) {
        debug_assert!(row < self.dim && col < self.dim);
        if v != C64::new(0.0, 0.0) {
            self.entries.push((row as u32, col as u32, v));
        }
    }

    pub fn build(mut self) -> SparseOperator {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.dim + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut rows = Vec::with_capacity(self.entries.len());
        let mut iter = self.entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            if v.norm() >= DROP_TOL {
                rows.push(r);
                cols.push(c);
                vals.push(v);
            }
        }
        for &r in &rows {
            row_ptr[r as usize + 1] += 1;
        }
        for i in 0..self.dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator { dim: self.dim, basis_hash: self.basis_hash, row_ptr, cols, vals }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    basis_hash: BasisHash,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn zero(dim: usize, basis_hash: BasisHash) -> Self {
        TripletBuilder::new(dim, basis_hash).build()
    }

    pub fn identity(dim: usize, basis_hash: BasisHash) -> Self {
        Self::diagonal(basis_hash, &vec![1.0; dim])
    }

    pub fn diagonal(basis_hash: BasisHash, d: &[f64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), basis_hash, d.len());
        for (i, &x) in d.iter().enumerate() {
            b.push(i, i, C64::new(x, 0.0));
        }
        b.build()
    }

    /// Dense matrix to sparse; entries below [`DROP_TOL`] vanish.
    pub fn from_dense(basis_hash: BasisHash, m: &DMatrix<C64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), basis_hash);
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                b.push(i, j, m[(i, j)]);
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn basis_hash(&self) -> BasisHash {
        self.basis_hash
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&c, &v)| (c as usize, v))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&(j as u32)) {
            Ok(k) => self.vals[a + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    fn check(&self, other: &SparseOperator) -> Result<(), OperatorError> {
        if self.basis_hash != other.basis_hash {
            return Err(OperatorError::BasisMismatch { expected: self.basis_hash, got: other.basis_hash });
        }
        if self.dim != other.dim {
            return Err(OperatorError::Dimension(self.dim, other.dim));
        }
        Ok(())
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = C64::new(0.0, 0.0);
            for k in a..b {
                acc += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = acc;
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    /// `⟨x|A|x⟩` (not normalized).
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let y = self.matvec(x);
        x.iter().zip(&y).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        self.map_values(|v| v * s)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.dim, self.basis_hash, self.nnz());
        for (i, j, v) in self.triplets() {
            b.push(i, j, f(v));
        }
        b.build()
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, other: &SparseOperator, s: f64) -> Result<SparseOperator, OperatorError> {
        self.check(other)?;
        let mut b = TripletBuilder::with_capacity(self.dim, self.basis_hash, self.nnz() + other.nnz());
        for (i, j, v) in self.triplets() {
            b.push(i, j, v);
        }
        for (i, j, v) in other.triplets() {
            b.push(i, j, v * s);
        }
        Ok(b.build())
    }

    pub fn add(&self, other: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.add_scaled(other, 1.0)
    }

    pub fn sum<'a>(ops: impl IntoIterator<Item = &'a SparseOperator>) -> Result<SparseOperator, OperatorError> {
        let mut iter = ops.into_iter();
        let first = iter.next().expect("at least one operator");
        let mut b = TripletBuilder::new(first.dim, first.basis_hash);
        for (i, j, v) in first.triplets() {
            b.push(i, j, v);
        }
        for op in iter {
            first.check(op)?;
            for (i, j, v) in op.triplets() {
                b.push(i, j, v);
            }
        }
        Ok(b.build())
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.check(other)?;
        let mut b = TripletBuilder::new(self.dim, self.basis_hash);
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, c) in other.row(k) {
                    b.push(i, j, a * c);
                }
            }
        }
        Ok(b.build())
    }

    pub fn commutator(&self, other: &SparseOperator) -> Result<SparseOperator, OperatorError> {
        self.matmul(other)?.add_scaled(&other.matmul(self)?, -1.0)
    }

    pub fn adjoint(&self) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(self.dim, self.basis_hash, self.nnz());
        for (i, j, v) in self.triplets() {
            b.push(j, i, v.conj());
        }
        b.build()
    }

    /// Largest per-entry deviation `|a_ij − conj(a_ji)| / max(1, |a_ij|)`.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            let d = (v - self.get(j, i).conj()).norm() / v.norm().max(1.0);
            worst = worst.max(d);
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.dim).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Spectral norm estimate by power iteration on `A†A`, started from a
    /// fixed deterministic vector.
    pub fn norm_estimate(&self, iters: usize) -> f64 {
        if self.dim == 0 || self.nnz() == 0 {
            return 0.0;
        }
        let adj = self.adjoint();
        let mut x: Vec<C64> =
            (0..self.dim).map(|i| C64::new(1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0, 0.0)).collect();
        let mut est = 0.0;
        for _ in 0..iters {
            let n = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if n == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= n);
            let y = adj.matvec(&self.matvec(&x));
            est = x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum::<f64>().max(0.0).sqrt();
            x = y;
        }
        est
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Permutation operator `P|i⟩ = |perm[i]⟩`.
    pub fn permutation(basis_hash: BasisHash, perm: &[usize]) -> SparseOperator {
        let mut b = TripletBuilder::with_capacity(perm.len(), basis_hash, perm.len());
        for (i, &p) in perm.iter().enumerate() {
            b.push(p, i, C64::new(1.0, 0.0));
        }
        b.build()
    }

    /// Binary form: magic, version, basis hash, dim, nnz, then row-major
    /// (u32 row, u32 col, f64 re, f64 im) little-endian triplets.
    pub fn write_to(&self, mut w: impl Write) -> Result<(), OperatorError> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.basis_hash.0)?;
        w.write_all(&(self.dim as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (i, j, v) in self.triplets() {
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&(j as u32).to_le_bytes())?;
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read, expected: BasisHash) -> Result<SparseOperator, OperatorError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(OperatorError::Format("bad magic"));
        }
        let mut u4 = [0u8; 4];
        let mut u8b = [0u8; 8];
        r.read_exact(&mut u4)?;
        if u32::from_le_bytes(u4) != FORMAT_VERSION {
            return Err(OperatorError::Format("unsupported version"));
        }
        let mut h = [0u8; 32];
        r.read_exact(&mut h)?;
        let got = BasisHash(h);
        if got != expected {
            return Err(OperatorError::BasisMismatch { expected, got });
        }
        r.read_exact(&mut u8b)?;
        let dim = u64::from_le_bytes(u8b) as usize;
        r.read_exact(&mut u8b)?;
        let nnz = u64::from_le_bytes(u8b) as usize;
        let mut b = TripletBuilder::with_capacity(dim, got, nnz);
        for _ in 0..nnz {
            r.read_exact(&mut u4)?;
            let i = u32::from_le_bytes(u4) as usize;
            r.read_exact(&mut u4)?;
            let j = u32::from_le_bytes(u4) as usize;
            if i >= dim || j >= dim {
                return Err(OperatorError::Index { row: i, col: j, dim });
            }
            r.read_exact(&mut u8b)?;
            let re = f64::from_le_bytes(u8b);
            r.read_exact(&mut u8b)?;
            let im = f64::from_le_bytes(u8b);
            b.push(i, j, C64::new(re, im));
        }
        Ok(b.build())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hash(b: u8) -> BasisHash {
        BasisHash([b; 32])
    }

    fn sample() -> SparseOperator {
        let mut b = TripletBuilder::new(3, hash(1));
        b.push(0, 1, C64::new(1.0, 2.0));
        b.push(1, 0, C64::new(1.0, -2.0));
        b.push(2, 2, C64::new(0.5, 0.0));
        b.push(2, 2, C64::new(0.25, 0.0));
        b.push(1, 1, C64::new(1e-16, 0.0));
        b.build()
    }

    #[test]
    fn duplicates_summed_and_tiny_dropped() {
        let a = sample();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(2, 2), C64::new(0.75, 0.0));
        assert!(a.is_hermitian());
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let d = a.to_dense();
        let p = a.matmul(&a).unwrap().to_dense();
        assert!((p - &d * &d).norm() < 1e-14);
    }

    #[test]
    fn norm_estimate_close_to_gershgorin_for_diagonal() {
        let a = SparseOperator::diagonal(hash(0), &[1.0, -3.0, 2.0]);
        assert!((a.norm_estimate(200) - 3.0).abs() < 1e-6);
        assert_eq!(a.gershgorin_bound(), 3.0);
    }

    #[test]
    fn binary_round_trip_and_hash_check() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        let b = SparseOperator::read_from(&buf[..], hash(1)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            SparseOperator::read_from(&buf[..], hash(2)),
            Err(OperatorError::BasisMismatch { .. })
        ));
    }

    #[test]
    fn mismatched_bases_refuse_to_add() {
        let a = SparseOperator::identity(3, hash(1));
        let b = SparseOperator::identity(3, hash(2));
        assert!(a.add(&b).is_err());
    }
}
