//! Admittance matrix and the Hermitian matrices whose quadratic forms give
//! nodal injections, voltage magnitudes and line currents.

use super::NetworkCase;
use crate::linalg::{SparseMatrix, C64};
use crate::permutation::SparsityPattern;
use crate::{Error, Result};

/// `Y = G + iB`, assembled from series admittances only.
pub fn build_admittance(case: &NetworkCase) -> SparseMatrix {
    let mut trip = Vec::with_capacity(4 * case.n_edges());
    for br in &case.branches {
        let y = C64::new(br.g_series, br.b_series);
        trip.push((br.from, br.from, y));
        trip.push((br.to, br.to, y));
        trip.push((br.from, br.to, -y));
        trip.push((br.to, br.from, -y));
    }
    SparseMatrix::from_triplets(case.n(), trip)
}

/// Pattern of `Y` with the full diagonal included.
pub fn admittance_pattern(case: &NetworkCase) -> SparsityPattern {
    SparsityPattern::new(
        case.n(),
        (0..case.n()).map(|i| (i, i)).chain(case.branches.iter().flat_map(|b| [(b.from, b.to), (b.to, b.from)])),
    )
    .expect("branch endpoints validated")
}

/// `(M_p, M_q)` for node `n`:
/// `M_p = ½(Y†eₙeₙᵀ + eₙeₙᵀY)`, `M_q = (1/2i)(Y†eₙeₙᵀ − eₙeₙᵀY)`.
pub fn injection_matrices(y: &SparseMatrix, n: usize) -> Result<(SparseMatrix, SparseMatrix)> {
    if n >= y.dim() {
        return Err(Error::validation(format!("node {} out of range for {} buses", n + 1, y.dim())));
    }
    let half = C64::new(0.5, 0.0);
    let half_over_i = C64::new(0.0, -0.5); // 1/(2i)
    let mut p = Vec::new();
    let mut q = Vec::new();
    for &(r, c, z) in y.entries().iter().filter(|e| e.0 == n) {
        // eₙeₙᵀY contributes Y[n][c] at (n, c); Y†eₙeₙᵀ contributes conj(Y[n][c]) at (c, n).
        p.push((r, c, half * z));
        p.push((c, r, half * z.conj()));
        q.push((c, r, half_over_i * z.conj()));
        q.push((r, c, -half_over_i * z));
    }
    Ok((SparseMatrix::from_triplets(y.dim(), p), SparseMatrix::from_triplets(y.dim(), q)))
}

#[derive(Debug, Clone)]
pub struct AuxiliaryMatrices {
    /// `eₙeₙᵀ` per node.
    pub voltage: Vec<SparseMatrix>,
    /// `|Y_nm|(eₙ−eₘ)(eₙ−eₘ)ᵀ` per branch, in branch order.
    pub current: Vec<SparseMatrix>,
    /// `e_ref e_refᵀ`.
    pub reference: SparseMatrix,
}

pub fn auxiliary_matrices(case: &NetworkCase) -> AuxiliaryMatrices {
    let n = case.n();
    let unit = |k: usize| SparseMatrix::from_triplets(n, [(k, k, C64::from(1.0))]);
    AuxiliaryMatrices {
        voltage: (0..n).map(unit).collect(),
        current: case
            .branches
            .iter()
            .map(|br| {
                let w = C64::from(br.admittance_abs());
                SparseMatrix::from_triplets(n, [(br.from, br.from, w), (br.to, br.to, w), (br.from, br.to, -w), (br.to, br.from, -w)])
            })
            .collect(),
        reference: unit(case.reference_bus),
    }
}
