//! Exact double-precision statevector simulation.
//!
//! Qubit 0 is the least significant bit of the basis index, so `X` on qubit 0
//! maps `|00⟩` to `|01⟩` (index 1). Shot noise only enters through
//! [`sample_basis`] and [`BasisSampler`].

mod ansatz;
mod gate;

pub use ansatz::{AnsatzSpec, Block, Entangler};
pub use gate::{GateKind, GateOp};

use std::f64::consts::FRAC_PI_2;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::linalg::{self, SparseMatrix, C64, ZERO};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl QuantumState {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = linalg::ONE;
        QuantumState { n_qubits, amps }
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[index] = linalg::ONE;
        QuantumState { n_qubits, amps }
    }

    /// Wraps amplitudes whose norm is 1 within `1e-10`.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let n_qubits = linalg::log2_exact(amps.len())
            .ok_or_else(|| Error::dimension(format!("{} amplitudes is not a power of two", amps.len())))?;
        let norm = linalg::norm(&amps);
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::validation(format!("state norm {norm} is not 1")));
        }
        Ok(QuantumState { n_qubits, amps })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<C64>) -> Result<Self> {
        if linalg::norm(&amps) == 0.0 {
            return Err(Error::validation("cannot normalize the zero vector"));
        }
        linalg::normalize(&mut amps);
        Self::from_amplitudes(amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amps)
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        gate.apply_unchecked(&mut self.amps);
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for g in gates {
            self.apply(g)?;
        }
        Ok(())
    }
}

/// Returns `gate · state`.
pub fn apply_gate(state: &QuantumState, gate: &GateOp) -> Result<QuantumState> {
    let mut out = state.clone();
    out.apply(gate)?;
    Ok(out)
}

/// `U(params)|0…0⟩`.
pub fn prepare(spec: &AnsatzSpec, params: &[f64]) -> Result<QuantumState> {
    let gates = spec.circuit(params)?;
    let mut state = QuantumState::zero(spec.n_qubits);
    for g in &gates {
        g.apply_unchecked(&mut state.amps);
    }
    Ok(state)
}

/// `ψ†Mψ`. Rejects observables with Hermitian residual above `1e-10`.
pub fn exact_expectation(state: &QuantumState, observable: &SparseMatrix) -> Result<f64> {
    if observable.dim() != state.dim() {
        return Err(Error::dimension(format!("observable is {0}x{0}, state has {1} amplitudes", observable.dim(), state.dim())));
    }
    if observable.hermitian_residual() > 1e-10 {
        return Err(Error::validation("observable is not Hermitian"));
    }
    Ok(observable.expectation(&state.amps))
}

/// Multinomial outcome counts (`counts[i]` = times `|i⟩` was observed).
pub fn sample_basis(state: &QuantumState, shots: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::rng(seed);
    let probs = state.probabilities();
    let mut counts = vec![0usize; probs.len()];
    let mut remaining = shots as u64;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || p >= mass {
            counts[i] = remaining as usize;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(&mut rng);
        counts[i] = k as usize;
        remaining -= k;
        mass -= p;
    }
    counts
}

/// Inverse-CDF sampler for repeated single-outcome draws.
#[derive(Debug, Clone)]
pub struct BasisSampler {
    cdf: Vec<f64>,
}

impl BasisSampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        BasisSampler { cdf }
    }

    pub fn of_state(state: &QuantumState) -> Self {
        Self::new(&state.probabilities())
    }

    pub fn draw<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("non-empty distribution");
        let u = rng.random::<f64>() * total;
        // Skip zero-probability outcomes that share a cdf value.
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// Copies of `params` with entry `index` shifted by `±π/2`.
pub fn shift_points(params: &[f64], index: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    shift_points_by(params, index, FRAC_PI_2)
}

pub fn shift_points_by(params: &[f64], index: usize, shift: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if index >= params.len() {
        return Err(Error::validation(format!("parameter index {index} out of range for {} parameters", params.len())));
    }
    let mut plus = params.to_vec();
    let mut minus = params.to_vec();
    plus[index] += shift;
    minus[index] -= shift;
    Ok((plus, minus))
}

/// Parameter-shift gradient of `f(U(θ)|0⟩)`: `½(f(θ + π/2·e_p) − f(θ − π/2·e_p))`
/// per entry, evaluated in parallel.
pub fn psr_gradient<F>(spec: &AnsatzSpec, params: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(&QuantumState) -> f64 + Sync,
{
    if params.len() != spec.param_count() {
        return Err(Error::dimension("parameter count mismatch"));
    }
    Ok((0..params.len())
        .into_par_iter()
        .map(|p| {
            let (plus, minus) = shift_points(params, p).expect("index in range");
            let fp = f(&prepare(spec, &plus).expect("valid length"));
            let fm = f(&prepare(spec, &minus).expect("valid length"));
            0.5 * (fp - fm)
        })
        .collect())
}

/// Exact gradient of `⟨ψ(θ)|O|ψ(θ)⟩` by reverse-mode (adjoint) sweep.
/// Equal to the parameter-shift gradient but needs one forward and one
/// backward pass instead of `2P` circuit evaluations.
pub fn adjoint_gradient(spec: &AnsatzSpec, params: &[f64], observable: &SparseMatrix) -> Result<(f64, Vec<f64>)> {
    let state = prepare(spec, params)?;
    if observable.dim() != state.dim() {
        return Err(Error::dimension("observable dimension mismatch"));
    }
    let mut psi = state.amps;
    let mut lam = observable.matvec(&psi);
    let value = linalg::inner(&psi, &lam).re;
    let mut grad = vec![0.0; params.len()];
    let mut scratch = vec![ZERO; psi.len()];
    for (gate, p) in spec.circuit_with_params(params).iter().rev() {
        if let Some(p) = p {
            scratch.copy_from_slice(&psi);
            gate::apply_generator(gate.kind, gate.target, &mut scratch);
            grad[*p] += 2.0 * linalg::inner(&lam, &scratch).re;
        }
        let inv = gate.inverse();
        inv.apply_unchecked(&mut psi);
        inv.apply_unchecked(&mut lam);
    }
    Ok((value, grad))
}

/// Uniform draw of `count` angles in `[0, 2π)`.
pub fn random_params(count: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::rng(seed);
    (0..count).map(|_| r.random::<f64>() * std::f64::consts::TAU).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() < tol)
    }

    #[test]
    fn ry_pi_flips() {
        let s = apply_gate(&QuantumState::zero(1), &GateOp::ry(0, PI)).unwrap();
        assert!(close(s.amplitudes(), &[ZERO, linalg::ONE], 1e-15));
    }

    #[test]
    fn x_endianness() {
        let s = apply_gate(&QuantumState::zero(2), &GateOp::x(0)).unwrap();
        assert_eq!(s.amplitudes()[1], linalg::ONE);
    }

    #[test]
    fn hh_is_identity() {
        let s = prepare(&AnsatzSpec::from_table(8, 2, 3).unwrap(), &random_params(18, 4)).unwrap();
        let mut t = s.clone();
        t.apply(&GateOp::h(1)).unwrap();
        t.apply(&GateOp::h(1)).unwrap();
        assert!(close(s.amplitudes(), t.amplitudes(), 1e-12));
    }

    #[test]
    fn bad_gates_rejected() {
        let mut s = QuantumState::zero(2);
        assert!(s.apply(&GateOp::x(2)).is_err());
        assert!(s.apply(&GateOp::cx(1, 1)).is_err());
    }

    #[test]
    fn zero_params_row2_is_ground() {
        let spec = AnsatzSpec::from_table(2, 3, 4).unwrap();
        let s = prepare(&spec, &vec![0.0; spec.param_count()]).unwrap();
        assert_eq!(s, QuantumState::zero(4));
    }

    #[test]
    fn sampling_is_deterministic_and_exact_on_basis_states() {
        let s = QuantumState::basis(1, 1);
        assert_eq!(sample_basis(&s, 100, 3), vec![0, 100]);
        let plus = QuantumState::normalized(vec![linalg::ONE, linalg::ONE]).unwrap();
        assert_eq!(sample_basis(&plus, 1000, 9), sample_basis(&plus, 1000, 9));
        assert_eq!(sample_basis(&plus, 1000, 9).iter().sum::<usize>(), 1000);
    }

    #[test]
    fn sampler_skips_zero_mass() {
        let sampler = BasisSampler::new(&[0.0, 0.5, 0.0, 0.5]);
        let mut r = rng::rng(1);
        for _ in 0..1000 {
            let k = sampler.draw(&mut r);
            assert!(k == 1 || k == 3);
        }
    }

    #[test]
    fn shift_points_basic() {
        let (p, m) = shift_points(&[0.0], 0).unwrap();
        assert_eq!((p[0], m[0]), (FRAC_PI_2, -FRAC_PI_2));
        assert!(shift_points(&[0.0], 1).is_err());
    }

    #[test]
    fn adjoint_equals_psr() {
        let spec = AnsatzSpec::from_table(7, 2, 3).unwrap();
        let params = random_params(spec.param_count(), 5);
        let obs = SparseMatrix::from_triplets(8, [(0, 0, C64::from(1.0)), (1, 6, C64::new(0.3, 0.4)), (6, 1, C64::new(0.3, -0.4))]);
        let (_, adj) = adjoint_gradient(&spec, &params, &obs).unwrap();
        let psr = psr_gradient(&spec, &params, |s| obs.expectation(s.amplitudes())).unwrap();
        for (a, b) in adj.iter().zip(&psr) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
