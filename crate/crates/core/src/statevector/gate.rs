use serde::{Deserialize, Serialize};

use crate::linalg::{C64, ONE, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    H,
    S,
    /// Inverse phase gate; only produced by [`GateOp::inverse`].
    Sdg,
    X,
    CX,
}

impl GateKind {
    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz)
    }
}

/// One gate. Rotations are `R_σ(θ) = exp(−iθσ/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: Option<f64>,
}

impl GateOp {
    fn single(kind: GateKind, target: usize) -> Self {
        GateOp { kind, target, control: None, angle: None }
    }

    pub fn rotation(kind: GateKind, target: usize, angle: f64) -> Self {
        debug_assert!(kind.is_rotation());
        GateOp { kind, target, control: None, angle: Some(angle) }
    }

    pub fn rx(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rx, q, angle)
    }

    pub fn ry(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Ry, q, angle)
    }

    pub fn rz(q: usize, angle: f64) -> Self {
        Self::rotation(GateKind::Rz, q, angle)
    }

    pub fn h(q: usize) -> Self {
        Self::single(GateKind::H, q)
    }

    pub fn s(q: usize) -> Self {
        Self::single(GateKind::S, q)
    }

    pub fn x(q: usize) -> Self {
        Self::single(GateKind::X, q)
    }

    pub fn cx(control: usize, target: usize) -> Self {
        GateOp { kind: GateKind::CX, target, control: Some(control), angle: None }
    }

    pub fn inverse(&self) -> Self {
        let mut g = *self;
        match self.kind {
            GateKind::S => g.kind = GateKind::Sdg,
            GateKind::Sdg => g.kind = GateKind::S,
            k if k.is_rotation() => g.angle = self.angle.map(|a| -a),
            _ => {}
        }
        g
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::validation(format!("gate target {} out of range for {n_qubits} qubits", self.target)));
        }
        match (self.kind, self.control) {
            (GateKind::CX, Some(c)) if c >= n_qubits => {
                Err(Error::validation(format!("gate control {c} out of range for {n_qubits} qubits")))
            }
            (GateKind::CX, Some(c)) if c == self.target => Err(Error::validation("control equals target")),
            (GateKind::CX, None) => Err(Error::validation("CX needs a control qubit")),
            (GateKind::CX, _) => Ok(()),
            (_, Some(_)) => Err(Error::validation("only CX takes a control qubit")),
            (k, None) if k.is_rotation() && self.angle.is_none_or(|a| !a.is_finite()) => {
                Err(Error::validation("rotation needs a finite angle"))
            }
            _ => Ok(()),
        }
    }

    /// 2×2 unitary `[[u00, u01], [u10, u11]]` of single-qubit gates.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let half = self.angle.unwrap_or(0.0) / 2.0;
        let (c, s) = (half.cos(), half.sin());
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self.kind {
            GateKind::Rx => [[C64::from(c), C64::new(0.0, -s)], [C64::new(0.0, -s), C64::from(c)]],
            GateKind::Ry => [[C64::from(c), C64::from(-s)], [C64::from(s), C64::from(c)]],
            GateKind::Rz => [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]],
            GateKind::H => [[C64::from(r), C64::from(r)], [C64::from(r), C64::from(-r)]],
            GateKind::S => [[ONE, ZERO], [ZERO, C64::new(0.0, 1.0)]],
            GateKind::Sdg => [[ONE, ZERO], [ZERO, C64::new(0.0, -1.0)]],
            GateKind::X => [[ZERO, ONE], [ONE, ZERO]],
            GateKind::CX => panic!("CX has no single-qubit matrix"),
        }
    }

    /// Applies the gate in place. Indices must already be validated.
    pub(crate) fn apply_unchecked(&self, amps: &mut [C64]) {
        let t = 1usize << self.target;
        match self.kind {
            GateKind::CX => {
                let c = 1usize << self.control.expect("CX control");
                for i in 0..amps.len() {
                    if i & c != 0 && i & t == 0 {
                        amps.swap(i, i | t);
                    }
                }
            }
            GateKind::Rz | GateKind::S | GateKind::Sdg => {
                let m = self.matrix();
                for (i, a) in amps.iter_mut().enumerate() {
                    *a *= if i & t == 0 { m[0][0] } else { m[1][1] };
                }
            }
            _ => {
                let m = self.matrix();
                for i in 0..amps.len() {
                    if i & t == 0 {
                        let (a0, a1) = (amps[i], amps[i | t]);
                        amps[i] = m[0][0] * a0 + m[0][1] * a1;
                        amps[i | t] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
    }
}

/// Applies `−(i/2)σ` for the rotation axis of `kind` on qubit `q`: the
/// derivative generator of `R_σ(θ)`.
pub(crate) fn apply_generator(kind: GateKind, q: usize, amps: &mut [C64]) {
    let t = 1usize << q;
    let mi = C64::new(0.0, -0.5);
    for i in 0..amps.len() {
        if i & t != 0 {
            continue;
        }
        let (a0, a1) = (amps[i], amps[i | t]);
        let (b0, b1) = match kind {
            GateKind::Rx => (a1, a0),
            GateKind::Ry => (C64::new(0.0, -1.0) * a1, C64::new(0.0, 1.0) * a0),
            GateKind::Rz => (a0, -a1),
            _ => panic!("{kind:?} is not a rotation"),
        };
        amps[i] = mi * b0;
        amps[i | t] = mi * b1;
    }
}
