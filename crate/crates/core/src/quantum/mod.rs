//! Hilbert-space layout, operators and states.

pub mod dense;
pub mod space;
pub mod sparse;
pub mod state;

pub use dense::{connected_blocks, expm, BlockDense};
pub use space::{HilbertSpec, ANCILLA_D, ANCILLA_E, ANCILLA_G, QUBIT_DOWN, QUBIT_UP};
pub use sparse::{
    ancilla_transition, build_ladder, build_pauli, number_operator, top_fock_projector, LocalOp, Pauli,
    SparseOperator,
};
pub use state::{expectation, expectation_real, Amplitudes, QuantumState};
