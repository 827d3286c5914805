//! Extended Bell measurement: XOR-colour decomposition of Hermitian
//! observables into pieces that a short circuit diagonalizes.
//!
//! Colour `c` collects the entries `(i, j)` with `i ⊕ j = c`. Each colour
//! splits into a real-symmetric piece and an `i·Im` piece, both Hermitian.
//! For `c ≥ 1` let `k = msb(c)`. Every pair `{p, p ⊕ c}` (bit `k` of `p`
//! clear) is a 2×2 block; the circuit "CX(k → t) for each other set bit `t`
//! of `c`, then H on `k`" maps the block's `±` eigenvectors to `|p⟩` and
//! `|p ⊕ 2ᵏ⟩`. Imaginary pieces apply S on `k` first. In the rotated basis
//! the piece is `diag(Λ)` with
//!
//! ```text
//! Λ[j] = (−1)^{bit k of j} · Re M[p][p ⊕ c]     (real part)
//! Λ[j] = (−1)^{bit k of j} · Im M[p][p ⊕ c]     (imaginary part)
//! ```
//!
//! where `p` is `j` with bit `k` cleared.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, SparseMatrix, C64};
use crate::statevector::{sample_basis, GateOp, QuantumState};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Real,
    Imaginary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPiece {
    pub color: usize,
    pub part: Part,
    /// Eigenvalues in the rotated computational basis.
    pub diagonal: Vec<f64>,
}

impl ColorPiece {
    /// Most significant set bit of the colour; `None` for colour 0.
    pub fn k_c(&self) -> Option<usize> {
        msb(self.color)
    }

    /// Spectral norm of the piece (largest |eigenvalue|).
    pub fn norm(&self) -> f64 {
        self.diagonal.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn n_qubits(&self) -> usize {
        self.diagonal.len().trailing_zeros() as usize
    }

    pub fn circuit(&self) -> RotationCircuit {
        if self.color == 0 {
            return RotationCircuit { color: 0, part: Part::Real, gates: Vec::new() };
        }
        rotation_circuit(self.color, self.n_qubits(), self.part).expect("colour in range")
    }

    /// The Hermitian matrix this piece represents.
    pub fn to_matrix(&self) -> SparseMatrix {
        let dim = self.diagonal.len();
        let Some(k) = self.k_c() else {
            return SparseMatrix::diagonal(&self.diagonal);
        };
        let bit = 1 << k;
        let mut trip = Vec::new();
        for p in (0..dim).filter(|p| p & bit == 0) {
            let q = p ^ self.color;
            let x = self.diagonal[p];
            let z = match self.part {
                Part::Real => C64::new(x, 0.0),
                Part::Imaginary => C64::new(0.0, x),
            };
            trip.push((p, q, z));
            trip.push((q, p, z.conj()));
        }
        SparseMatrix::from_triplets(dim, trip)
    }

    /// Probabilities of the rotated state; `(⟨Λ⟩, ⟨Λ²⟩)` under them.
    pub fn moments(&self, state: &QuantumState) -> (f64, f64) {
        let probs = self.rotate(state).probabilities();
        probs.iter().zip(&self.diagonal).fold((0.0, 0.0), |(a, b), (p, l)| (a + p * l, b + p * l * l))
    }

    pub fn rotate(&self, state: &QuantumState) -> QuantumState {
        let mut s = state.clone();
        for g in &self.circuit().gates {
            s.apply(g).expect("circuit matches state size");
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorDecomposition {
    pub n_qubits: usize,
    pub pieces: Vec<ColorPiece>,
}

impl ColorDecomposition {
    /// Per-piece spectral norms `‖Mᶜ‖`.
    pub fn source_norms(&self) -> Vec<f64> {
        self.pieces.iter().map(ColorPiece::norm).collect()
    }

    /// `Σ_c ‖Mᶜ‖²`.
    pub fn sum_sq_norms(&self) -> f64 {
        self.pieces.iter().map(|p| p.norm().powi(2)).sum()
    }

    pub fn colors(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.pieces.iter().map(|p| p.color).collect();
        c.dedup();
        c
    }

    pub fn recompose(&self) -> SparseMatrix {
        let dim = 1 << self.n_qubits;
        let mats: Vec<SparseMatrix> = self.pieces.iter().map(ColorPiece::to_matrix).collect();
        SparseMatrix::weighted_sum(dim, mats.iter().map(|m| (1.0, m)))
    }

    /// Exact `Σ_c ⟨ψ_c|Λᶜ|ψ_c⟩`.
    pub fn exact_expectation(&self, state: &QuantumState) -> f64 {
        self.pieces.iter().map(|p| p.moments(state).0).sum()
    }
}

/// A `ColorDecomposition` is built from a Hermitian, power-of-two matrix.
/// Zero pieces are omitted; pieces come sorted by `(colour, part)`.
pub fn decompose(matrix: &SparseMatrix) -> Result<ColorDecomposition> {
    let dim = matrix.dim();
    let n_qubits = linalg::log2_exact(dim).ok_or_else(|| Error::dimension(format!("dimension {dim} is not a power of two")))?;
    if matrix.hermitian_residual() > 1e-10 {
        return Err(Error::validation("matrix is not Hermitian"));
    }
    let mut diags: BTreeMap<(usize, Part), Vec<f64>> = BTreeMap::new();
    for &(i, j, z) in matrix.entries() {
        let c = i ^ j;
        if c == 0 {
            diags.entry((0, Part::Real)).or_insert_with(|| vec![0.0; dim])[i] = z.re;
            continue;
        }
        let bit = 1 << msb(c).expect("c > 0");
        if i & bit != 0 {
            continue; // mirrored by the (j, i) entry
        }
        for (part, x) in [(Part::Real, z.re), (Part::Imaginary, z.im)] {
            if x != 0.0 {
                let d = diags.entry((c, part)).or_insert_with(|| vec![0.0; dim]);
                d[i] = x;
                d[i | bit] = -x;
            }
        }
    }
    let pieces = diags
        .into_iter()
        .filter(|(_, d)| d.iter().any(|&x| x != 0.0))
        .map(|((color, part), diagonal)| ColorPiece { color, part, diagonal })
        .collect();
    Ok(ColorDecomposition { n_qubits, pieces })
}

/// Diagonalizing circuit for colour `c`, in application order.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationCircuit {
    pub color: usize,
    pub part: Part,
    pub gates: Vec<GateOp>,
}

pub fn rotation_circuit(color: usize, n_qubits: usize, part: Part) -> Result<RotationCircuit> {
    if color == 0 || color >= 1 << n_qubits {
        return Err(Error::validation(format!("colour {color} needs no rotation or is out of range for {n_qubits} qubits")));
    }
    let k = msb(color).expect("color > 0");
    let mut gates = Vec::new();
    if part == Part::Imaginary {
        gates.push(GateOp::s(k));
    }
    for t in (0..n_qubits).filter(|&t| t != k && color >> t & 1 == 1) {
        gates.push(GateOp::cx(k, t));
    }
    gates.push(GateOp::h(k));
    Ok(RotationCircuit { color, part, gates })
}

/// Eigen-diagonal of a matrix supported on colour `c` only.
pub fn eigen_diagonal(matrix: &SparseMatrix, color: usize, part: Part) -> Result<Vec<f64>> {
    if let Some(&(i, j, _)) = matrix.entries().iter().find(|e| e.0 ^ e.1 != color) {
        return Err(Error::validation(format!("entry ({i}, {j}) lies outside colour {color}")));
    }
    let dec = decompose(matrix)?;
    Ok(dec
        .pieces
        .into_iter()
        .find(|p| p.part == part)
        .map(|p| p.diagonal)
        .unwrap_or_else(|| vec![0.0; matrix.dim()]))
}

fn msb(c: usize) -> Option<usize> {
    (c != 0).then(|| usize::BITS as usize - 1 - c.leading_zeros() as usize)
}

/// How shots are split across pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShotAllocation {
    #[default]
    Equal,
    /// Proportional to piece norms; every piece gets at least one shot.
    NormWeighted,
}

impl ShotAllocation {
    pub fn split(self, dec: &ColorDecomposition, shots_per_piece: usize) -> Vec<usize> {
        let k = dec.pieces.len();
        match self {
            ShotAllocation::Equal => vec![shots_per_piece; k],
            ShotAllocation::NormWeighted => {
                let total = (shots_per_piece * k) as f64;
                let norms = dec.source_norms();
                let sum: f64 = norms.iter().sum();
                norms.iter().map(|n| ((total * n / sum).round() as usize).max(1)).collect()
            }
        }
    }
}

/// Sample-average estimate of `⟨ψ|M|ψ⟩` with `shots_per_piece` basis
/// measurements of each rotated state. Returns the total and the per-piece
/// averages (in piece order).
pub fn estimate_expectation(
    state: &QuantumState,
    dec: &ColorDecomposition,
    shots_per_piece: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    estimate_with_shots(state, dec, &vec![shots_per_piece; dec.pieces.len()], seed)
}

pub fn estimate_with_shots(
    state: &QuantumState,
    dec: &ColorDecomposition,
    shots: &[usize],
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    if state.n_qubits() != dec.n_qubits {
        return Err(Error::dimension("state and decomposition sizes differ"));
    }
    if shots.len() != dec.pieces.len() || shots.iter().any(|&s| s == 0) {
        return Err(Error::validation("every piece needs at least one shot"));
    }
    let per_piece: Vec<f64> = dec
        .pieces
        .par_iter()
        .zip(shots)
        .enumerate()
        .map(|(k, (piece, &s))| {
            let counts = sample_basis(&piece.rotate(state), s, rng::derive(seed, k as u64));
            counts.iter().zip(&piece.diagonal).map(|(&n, &l)| n as f64 * l).sum::<f64>() / s as f64
        })
        .collect();
    Ok((per_piece.iter().sum(), per_piece))
}

/// Exact variance of [`estimate_expectation`] and its norm bound
/// `(1/S) Σ_c ‖Mᶜ‖²`.
pub fn estimator_variance(dec: &ColorDecomposition, state: &QuantumState, shots_per_piece: usize) -> (f64, f64) {
    let s = shots_per_piece as f64;
    let var: f64 = dec
        .pieces
        .iter()
        .map(|p| {
            let (m1, m2) = p.moments(state);
            (m2 - m1 * m1).max(0.0)
        })
        .sum();
    (var / s, dec.sum_sq_norms() / s)
}

/// Colour decomposition of a family of matrices `{Mₘ}` on a shared piece
/// list: for each `(colour, part)` the diagonals of every `m` that occupies
/// it. This is the layout of the block observable `Σₘ eₘeₘᵀ ⊗ Mₘ`.
#[derive(Debug, Clone)]
pub struct JointDecomposition {
    pub n_qubits: usize,
    pub n_matrices: usize,
    pub pieces: Vec<JointPiece>,
}

#[derive(Debug, Clone)]
pub struct JointPiece {
    pub color: usize,
    pub part: Part,
    /// `(m, Λₘᶜ)` for every matrix with a nonzero piece here.
    pub members: Vec<(usize, Vec<f64>)>,
}

impl JointPiece {
    pub fn circuit(&self, n_qubits: usize) -> Vec<GateOp> {
        if self.color == 0 {
            Vec::new()
        } else {
            rotation_circuit(self.color, n_qubits, self.part).expect("colour in range").gates
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.members.iter().map(|(_, d)| d.iter().fold(0.0f64, |m, x| m.max(x.abs()))).fold(0.0, f64::max)
    }
}

impl JointDecomposition {
    pub fn new<'a>(matrices: impl IntoIterator<Item = &'a SparseMatrix>) -> Result<Self> {
        let mut table: BTreeMap<(usize, Part), Vec<(usize, Vec<f64>)>> = BTreeMap::new();
        let mut n_qubits = None;
        let mut count = 0;
        for (m, mat) in matrices.into_iter().enumerate() {
            count += 1;
            let dec = decompose(mat)?;
            if *n_qubits.get_or_insert(dec.n_qubits) != dec.n_qubits {
                return Err(Error::dimension("matrices of different sizes"));
            }
            for p in dec.pieces {
                table.entry((p.color, p.part)).or_default().push((m, p.diagonal));
            }
        }
        let n_qubits = n_qubits.ok_or_else(|| Error::validation("empty matrix family"))?;
        Ok(JointDecomposition {
            n_qubits,
            n_matrices: count,
            pieces: table.into_iter().map(|((color, part), members)| JointPiece { color, part, members }).collect(),
        })
    }

    /// Number of distinct colours `C`.
    pub fn color_count(&self) -> usize {
        let mut c: Vec<usize> = self.pieces.iter().map(|p| p.color).collect();
        c.dedup();
        c.len()
    }

    /// `Σ_c maxₘ ‖Mₘᶜ‖²`.
    pub fn sum_sq_max_norms(&self) -> f64 {
        self.pieces.iter().map(|p| p.max_norm().powi(2)).sum()
    }
}
