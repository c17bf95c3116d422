use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Truncated Hilbert space of the phonon mode, optionally tensored with the
/// system qubit and the three-level ancilla.
///
/// Basis ordering is `|n> (x) |qubit> (x) |ancilla>` with the phonon index
/// slowest. Qubit level 0 is `|up>` (sigma_z = +1), level 1 is `|down>`.
/// Ancilla levels are `g = 0`, `e = 1`, `d = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HilbertSpec {
    fock_dim: usize,
    has_system_qubit: bool,
    has_ancilla: bool,
}

pub const QUBIT_UP: usize = 0;
pub const QUBIT_DOWN: usize = 1;
pub const ANCILLA_G: usize = 0;
pub const ANCILLA_E: usize = 1;
pub const ANCILLA_D: usize = 2;

impl HilbertSpec {
    pub fn new(fock_dim: usize, has_system_qubit: bool, has_ancilla: bool) -> Result<Self> {
        if fock_dim < 2 {
            return Err(Error::Config(format!("fock_dim must be >= 2, got {fock_dim}")));
        }
        Ok(Self { fock_dim, has_system_qubit, has_ancilla })
    }

    /// Phonon mode with the system qubit, the layout of the bare Rabi model.
    pub fn rabi(fock_dim: usize) -> Result<Self> {
        Self::new(fock_dim, true, false)
    }

    /// Default truncation for critical-point runs at system size `eta`.
    pub fn default_fock_dim(eta: f64) -> usize {
        (4.0 * eta.max(0.0).sqrt()).ceil() as usize + 10
    }

    pub fn fock_dim(&self) -> usize {
        self.fock_dim
    }

    pub fn has_system_qubit(&self) -> bool {
        self.has_system_qubit
    }

    pub fn has_ancilla(&self) -> bool {
        self.has_ancilla
    }

    pub fn qubit_dim(&self) -> usize {
        if self.has_system_qubit {
            2
        } else {
            1
        }
    }

    pub fn ancilla_dim(&self) -> usize {
        if self.has_ancilla {
            3
        } else {
            1
        }
    }

    /// Dimension of everything except the phonon factor.
    pub fn internal_dim(&self) -> usize {
        self.qubit_dim() * self.ancilla_dim()
    }

    pub fn dim(&self) -> usize {
        self.fock_dim * self.internal_dim()
    }

    pub fn index(&self, n: usize, qubit: usize, ancilla: usize) -> usize {
        debug_assert!(n < self.fock_dim && qubit < self.qubit_dim() && ancilla < self.ancilla_dim());
        (n * self.qubit_dim() + qubit) * self.ancilla_dim() + ancilla
    }

    /// Inverse of [`HilbertSpec::index`]: `(n, qubit, ancilla)`.
    pub fn decompose(&self, index: usize) -> (usize, usize, usize) {
        let a = index % self.ancilla_dim();
        let rest = index / self.ancilla_dim();
        (rest / self.qubit_dim(), rest % self.qubit_dim(), a)
    }

    /// Basis indices belonging to the top Fock level, the leakage monitor.
    pub fn top_fock_indices(&self) -> Vec<usize> {
        let start = (self.fock_dim - 1) * self.internal_dim();
        (start..self.dim()).collect()
    }

    /// Ground state index: vacuum, qubit down, ancilla in `g`.
    pub fn ground_index(&self) -> usize {
        let q = if self.has_system_qubit { QUBIT_DOWN } else { 0 };
        self.index(0, q, ANCILLA_G)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions_multiply() {
        assert_eq!(HilbertSpec::new(5, false, false).unwrap().dim(), 5);
        assert_eq!(HilbertSpec::new(5, true, false).unwrap().dim(), 10);
        assert_eq!(HilbertSpec::new(5, true, true).unwrap().dim(), 30);
        assert_eq!(HilbertSpec::new(4, false, true).unwrap().dim(), 12);
    }

    #[test]
    fn rejects_tiny_fock() {
        assert!(HilbertSpec::new(1, true, false).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let s = HilbertSpec::new(4, true, true).unwrap();
        for i in 0..s.dim() {
            let (n, q, a) = s.decompose(i);
            assert_eq!(s.index(n, q, a), i);
        }
        assert_eq!(s.index(1, 0, 0), 6);
    }

    #[test]
    fn default_truncation() {
        assert_eq!(HilbertSpec::default_fock_dim(50.0), 39);
        assert_eq!(HilbertSpec::default_fock_dim(10.0), 23);
    }
}
