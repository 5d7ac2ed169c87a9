//! Time evolution under the lossy Lieb-Liniger master equation: dense
//! Lindblad blocks, quantum trajectories and conditional no-jump evolution,
//! plus ground/lowest-loss states and the two preparation protocols.

mod eigen;
mod master;
mod ramp;
mod relax;
mod state;
mod trajectory;

pub use eigen::{
    condensate, ground_state, ground_state_with, lowest_loss_state, lowest_orbital, uncorrelated_state, EigenMethod,
    GroundState, LowestLoss, DEGENERACY_TOL, DENSE_GROUND_CAP, DENSE_LOSS_CAP, RESIDUAL_TOL,
};
pub use master::{diagnose, master_evolve, BlockDiagnostics, Liouvillian, MASTER_CAP, POSITIVITY_TOL, TRACE_TOL};
pub use ramp::{adiabatic_ramp, adiabatic_ramp_master, RampControl, RampPoint, RampSchedule, RAMP_TOL};
pub use relax::{dissipative_relax, loss_timescale, Crossing, RelaxResult, CROSSING_LEVELS};
pub use state::{validate_grid, DensityBlocks, StateVector};
pub use trajectory::{
    ensemble_average, evolve_nojump, mcwf_trajectory, run_trajectory, trajectory_rng, Estimate, EnsembleResult,
    JumpRecord, NoJumpPoint, TrajectoryResult, JUMP_TIME_RTOL,
};
