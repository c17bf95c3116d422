use num_complex::Complex64 as C64;

use super::params::{AncillaParams, IonDriveParams, RabiParams};
use crate::error::{Error, Result};
use crate::quantum::space::{ANCILLA_D, ANCILLA_E, ANCILLA_G};
use crate::quantum::sparse::{build_ladder, build_pauli, number_operator, LocalOp, Pauli, SparseOperator};
use crate::quantum::HilbertSpec;

fn require_qubit(space: HilbertSpec) -> Result<()> {
    if space.has_system_qubit() {
        Ok(())
    } else {
        Err(Error::Config("the Rabi Hamiltonian needs a system qubit".into()))
    }
}

fn require_ancilla(space: HilbertSpec) -> Result<()> {
    if space.has_ancilla() {
        Ok(())
    } else {
        Err(Error::Config("the ancilla Hamiltonian needs an ancilla factor".into()))
    }
}

/// `omega c^dag c + (Omega/2) sigma_z - lambda (c + c^dag) sigma_x`.
pub fn build_rabi_hamiltonian(params: &RabiParams, space: HilbertSpec) -> Result<SparseOperator> {
    require_qubit(space)?;
    rabi_terms(params.omega, params.omega_q / 2.0, -params.lambda_c, space)
}

/// Ion-drive form `(db-dr)/2 c^dag c + (dr+db)/4 sigma_z + (eta_ld Omega_0/2) sigma_x (c + c^dag)`.
/// It differs from [`build_rabi_hamiltonian`] of the mapped parameters by the
/// sign of the coupling, which a `sigma_z` rotation removes.
pub fn build_ion_hamiltonian(ion: &IonDriveParams, space: HilbertSpec) -> Result<SparseOperator> {
    require_qubit(space)?;
    rabi_terms(
        (ion.delta_b - ion.delta_r) / 2.0,
        (ion.delta_r + ion.delta_b) / 4.0,
        ion.eta_ld * ion.omega_0 / 2.0,
        space,
    )
}

fn rabi_terms(mode: f64, half_split: f64, coupling: f64, space: HilbertSpec) -> Result<SparseOperator> {
    let (c, cd) = build_ladder(space);
    let z = build_pauli(space, Pauli::Z)?;
    let x = build_pauli(space, Pauli::X)?;
    let h = number_operator(space)
        .scale_real(mode)
        .add(&z.scale_real(half_split))?
        .add(&c.add(&cd)?.mul(&x)?.scale_real(coupling))?;
    h.mark_hermitian()
}

/// `Omega_s (|d><e| + |e><d|) + eta_ld2 Omega_w (|e><g| c + |g><e| c^dag)`.
pub fn build_ancilla_hamiltonian(anc: &AncillaParams, space: HilbertSpec) -> Result<SparseOperator> {
    require_ancilla(space)?;
    let carrier = LocalOp::new(vec![
        (ANCILLA_D, ANCILLA_E, C64::new(anc.omega_s, 0.0)),
        (ANCILLA_E, ANCILLA_D, C64::new(anc.omega_s, 0.0)),
    ]);
    let carrier = SparseOperator::product(space, None, None, Some(&carrier))?;
    let (c, _) = build_ladder(space);
    let raise = SparseOperator::product(space, None, None, Some(&LocalOp::transition(ANCILLA_E, ANCILLA_G)))?;
    let sideband = raise.mul(&c)?;
    let sideband = sideband.add(&sideband.adjoint())?.scale_real(anc.sideband_coupling());
    carrier.add(&sideband)?.mark_hermitian()
}

/// Rabi sensor and ancilla detector sharing one phonon mode.
pub fn build_two_ion_hamiltonian(
    params: &RabiParams,
    anc: &AncillaParams,
    space: HilbertSpec,
) -> Result<SparseOperator> {
    build_rabi_hamiltonian(params, space)?.add(&build_ancilla_hamiltonian(anc, space)?)?.mark_hermitian()
}

/// Parity `exp(i pi c^dag c) sigma_z`.
pub fn parity_operator(space: HilbertSpec) -> Result<SparseOperator> {
    require_qubit(space)?;
    let signs: Vec<f64> = (0..space.fock_dim()).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
    SparseOperator::product(space, Some(&LocalOp::diagonal(&signs)), Some(&LocalOp::diagonal(&[1.0, -1.0])), None)?
        .mark_hermitian()
}

/// Conserved excitation number `c^dag c + |e><e| + |d><d|` of the ancilla Hamiltonian.
pub fn excitation_number(space: HilbertSpec) -> Result<SparseOperator> {
    require_ancilla(space)?;
    let mut diag = [0.0; 3];
    diag[ANCILLA_E] = 1.0;
    diag[ANCILLA_D] = 1.0;
    let internal = SparseOperator::product(space, None, None, Some(&LocalOp::diagonal(&diag)))?;
    number_operator(space).add(&internal)?.mark_hermitian()
}
