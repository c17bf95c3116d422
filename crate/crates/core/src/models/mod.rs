//! Parameter sets, Hamiltonians and analytic rate formulas.

pub mod hamiltonian;
pub mod params;
pub mod rates;

pub use hamiltonian::{
    build_ancilla_hamiltonian, build_ion_hamiltonian, build_rabi_hamiltonian, build_two_ion_hamiltonian,
    excitation_number, parity_operator,
};
pub use params::{AncillaParams, IonDriveParams, NoiseParams, RabiParams, RamanParams, DEFAULT_SEPARATION};
pub use rates::{
    cooling_timescales, critical_coupling, effective_kappa_analytic, emitted_per_phonon, enhancement_factor,
    rabi_from_ion, tune_to_cp, weak_rate_raman,
};
