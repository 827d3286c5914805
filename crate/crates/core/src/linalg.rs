//! Coordinate-format complex matrices and the handful of dense helpers the
//! solver needs.
//!
//! Every OPF matrix is stored as a sorted list of `(row, col, value)` triples.
//! At desk scale this is cheaper than dense storage for the per-constraint
//! matrices (a handful of nonzeros each) and it is the same layout the JSON
//! cache uses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix in coordinate format.
///
/// Entries are kept sorted by `(row, col)`, unique, and free of exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawMatrix", try_from = "RawMatrix")]
pub struct SparseMatrix {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    dim: usize,
    entries: Vec<(usize, usize, f64, f64)>,
}

impl From<SparseMatrix> for RawMatrix {
    fn from(m: SparseMatrix) -> Self {
        RawMatrix {
            dim: m.dim,
            entries: m.entries.iter().map(|&(r, c, z)| (r, c, z.re, z.im)).collect(),
        }
    }
}

impl TryFrom<RawMatrix> for SparseMatrix {
    type Error = String;

    fn try_from(raw: RawMatrix) -> Result<Self, Self::Error> {
        if let Some(&(r, c, _, _)) = raw.entries.iter().find(|e| e.0 >= raw.dim || e.1 >= raw.dim) {
            return Err(format!("entry ({r}, {c}) outside a {0}x{0} matrix", raw.dim));
        }
        Ok(SparseMatrix::from_triplets(
            raw.dim,
            raw.entries.into_iter().map(|(r, c, re, im)| (r, c, C64::new(re, im))),
        ))
    }
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseMatrix { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseMatrix { dim, entries: (0..dim).map(|i| (i, i, ONE)).collect() }
    }

    /// Builds a matrix from triplets, summing duplicates and dropping zeros.
    ///
    /// Panics if an index is out of range.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut entries: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        for &(r, c, _) in &entries {
            assert!(r < dim && c < dim, "entry ({r}, {c}) outside a {dim}x{dim} matrix");
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, c, z) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += z,
                _ => merged.push((r, c, z)),
            }
        }
        merged.retain(|e| e.2 != ZERO);
        SparseMatrix { dim, entries: merged }
    }

    pub fn from_dense(rows: &[Vec<C64>]) -> Self {
        let dim = rows.len();
        Self::from_triplets(
            dim,
            rows.iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &z)| (r, c, z))),
        )
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_triplets(values.len(), values.iter().enumerate().map(|(i, &x)| (i, i, C64::from(x))))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize, C64)] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        match self.entries.binary_search_by_key(&(row, col), |&(r, c, _)| (r, c)) {
            Ok(k) => self.entries[k].2,
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<C64>> {
        let mut out = vec![vec![ZERO; self.dim]; self.dim];
        for &(r, c, z) in &self.entries {
            out[r][c] = z;
        }
        out
    }

    /// Largest entrywise deviation `|M[i][j] - conj(M[j][i])|`.
    pub fn hermitian_residual(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(r, c, z)| (z - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zeros(self.dim);
        }
        SparseMatrix { dim: self.dim, entries: self.entries.iter().map(|&(r, c, z)| (r, c, z * s)).collect() }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// `Σ_k w_k A_k` over matrices of equal dimension.
    pub fn weighted_sum<'a>(dim: usize, terms: impl IntoIterator<Item = (f64, &'a SparseMatrix)>) -> Self {
        let mut trip = Vec::new();
        for (w, m) in terms {
            assert_eq!(m.dim, dim, "dimension mismatch in weighted sum");
            if w != 0.0 {
                trip.extend(m.entries.iter().map(|&(r, c, z)| (r, c, z * w)));
            }
        }
        Self::from_triplets(dim, trip)
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        Self::weighted_sum(self.dim, [(1.0, self), (1.0, other)])
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.dim, "dimension mismatch in matvec");
        let mut y = vec![ZERO; self.dim];
        for &(r, c, z) in &self.entries {
            y[r] += z * x[c];
        }
        y
    }

    /// `x† M x`. Real for Hermitian `M`; the imaginary part is returned for
    /// callers that want to check it.
    pub fn quad_form(&self, x: &[C64]) -> C64 {
        assert_eq!(x.len(), self.dim, "dimension mismatch in quadratic form");
        self.entries.iter().map(|&(r, c, z)| x[r].conj() * z * x[c]).sum()
    }

    /// Real part of `x† M x`.
    pub fn expectation(&self, x: &[C64]) -> f64 {
        self.quad_form(x).re
    }

    /// Zero-extends the matrix to `dim`.
    pub fn padded(&self, dim: usize) -> Self {
        assert!(dim >= self.dim, "cannot pad {} down to {dim}", self.dim);
        SparseMatrix { dim, entries: self.entries.clone() }
    }

    /// `P M Pᵀ` for the permutation sending old index `i` to `forward[i]`.
    pub fn permuted(&self, forward: &[usize]) -> Self {
        assert_eq!(forward.len(), self.dim, "permutation length mismatch");
        Self::from_triplets(self.dim, self.entries.iter().map(|&(r, c, z)| (forward[r], forward[c], z)))
    }

    /// Spectral norm by power iteration on `M†M`.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm_with(self, 1e-8, 20_000)
    }
}

/// Power iteration for `‖M‖₂`, stopping once consecutive estimates agree to
/// `rel_tol`.
pub fn spectral_norm_with(m: &SparseMatrix, rel_tol: f64, max_iters: usize) -> f64 {
    if m.is_zero() {
        return 0.0;
    }
    let n = m.dim();
    // Fixed, non-symmetric start vector so that no eigenvector is missed by
    // construction.
    let mut x: Vec<C64> = (0..n)
        .map(|i| {
            let h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 33;
            C64::new(1.0 + (h % 1000) as f64 / 1000.0, (h % 7) as f64 / 13.0)
        })
        .collect();
    normalize(&mut x);
    let mut estimate = 0.0;
    for _ in 0..max_iters {
        let y = m.matvec(&x);
        let sigma = norm(&y);
        if sigma == 0.0 {
            return 0.0;
        }
        // x ← M†(Mx)/‖·‖; for the Hermitian matrices used here M† = M is not
        // assumed, so apply the adjoint explicitly.
        let mut z = adjoint_matvec(m, &y);
        let zn = norm(&z);
        z.iter_mut().for_each(|v| *v /= zn);
        x = z;
        if (sigma - estimate).abs() <= rel_tol * sigma {
            return sigma.max(estimate);
        }
        estimate = sigma;
    }
    estimate
}

fn adjoint_matvec(m: &SparseMatrix, x: &[C64]) -> Vec<C64> {
    let mut y = vec![ZERO; m.dim()];
    for &(r, c, z) in m.entries() {
        y[c] += z.conj() * x[r];
    }
    y
}

pub fn norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(x: &mut [C64]) {
    let n = norm(x);
    if n > 0.0 {
        x.iter_mut().for_each(|z| *z /= n);
    }
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn real_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Smallest power of two that is `>= n` (1 for `n <= 1`).
pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

pub fn is_pow2(n: usize) -> bool {
    n.is_power_of_two()
}

pub fn log2_exact(n: usize) -> Option<usize> {
    n.is_power_of_two().then(|| n.trailing_zeros() as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            3,
            [(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (2, 2, c(2.0, 0.0)), (1, 0, c(0.5, 0.0))],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), ZERO);
        assert_eq!(m.get(1, 0), c(0.5, 0.0));
    }

    #[test]
    fn quad_form_of_hermitian_is_real() {
        let m = SparseMatrix::from_dense(&[vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(0.0, -2.0), c(-3.0, 0.0)]]);
        assert_eq!(m.hermitian_residual(), 0.0);
        let x = [c(0.3, -0.1), c(1.2, 0.7)];
        assert!(m.quad_form(&x).im.abs() < 1e-14);
    }

    #[test]
    fn spectral_norm_matches_known_values() {
        let m = SparseMatrix::diagonal(&[1.0, -4.0, 2.0]);
        assert!((m.spectral_norm() - 4.0).abs() < 1e-7);
        // Pauli Y has eigenvalues ±1.
        let y = SparseMatrix::from_dense(&[vec![ZERO, c(0.0, -1.0)], vec![c(0.0, 1.0), ZERO]]);
        assert!((y.spectral_norm() - 1.0).abs() < 1e-7);
        assert_eq!(SparseMatrix::zeros(4).spectral_norm(), 0.0);
    }

    #[test]
    fn json_uses_row_col_re_im_triples() {
        let m = SparseMatrix::from_triplets(2, [(0, 1, c(1.5, -2.0))]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"dim":2,"entries":[[0,1,1.5,-2.0]]}"#);
        let back: SparseMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<SparseMatrix>(r#"{"dim":1,"entries":[[0,3,1.0,0.0]]}"#).is_err());
    }

    #[test]
    fn permutation_conjugates_entries() {
        let m = SparseMatrix::from_triplets(3, [(0, 1, c(1.0, 1.0)), (1, 0, c(1.0, -1.0))]);
        let p = m.permuted(&[2, 0, 1]);
        assert_eq!(p.get(2, 0), c(1.0, 1.0));
        assert_eq!(p.get(0, 2), c(1.0, -1.0));
    }
}
