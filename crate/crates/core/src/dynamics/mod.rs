//! Master-equation evolution, steady states and photon-counting trajectories.

pub mod ensemble;
pub mod kappa_fit;
pub mod liouvillian;
pub mod model;
pub mod record;
pub mod trajectory;

pub use ensemble::{mean_and_sem, pairwise_sum, par_map, run_ensemble, worker_pool};
pub use kappa_fit::{fit_effective_kappa, linear_fit, KappaFit};
pub use liouvillian::{
    evolve_expectations, evolve_lindblad, evolve_lindblad_with, step_doubling_error, steady_state, EvolveOptions,
    Expectations, Integrator, Liouvillian, LEAK_TOL,
};
pub use model::{default_dt, Channel, LindbladModel, ModelSpec, Parameter, SchemeConfig};
pub use record::{read_records, write_records, Event, TrajectoryRecord};
pub use trajectory::{
    checkpoint_steps, run_trajectory_ancilla, step_doubling_deviation, run_trajectory_noisy, run_trajectory_perfect, trajectory_rng,
    ReplayOutput, Samples, TrajectoryConfig, TrajectoryOutput, Unraveling,
};
