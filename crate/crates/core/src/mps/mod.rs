//! Matrix product state simulation: long-range MPO, two-site TDVP and the
//! memory model.

mod env;
pub mod memory;
pub mod mpo;
pub mod state;
pub mod tdvp;
pub mod tensor;

pub use memory::{memory_estimate, MemoryBreakdown};
pub use mpo::{build_mpo, MpoEntry, MpoHamiltonian, PHYS_DIM};
pub use state::MpsState;
pub use tdvp::{
    run_quench, tdvp_step, InitialState, QuenchOptions, QuenchRun, Tdvp, TdvpConfig, TdvpStepRecord, DEFAULT_K_MAX,
    DEFAULT_MEMORY_BUDGET,
};
pub use tensor::Tensor3;
