//! Simulation of many-particle continuous-time quantum walks on noisy
//! q-dimensional lattices.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: lattice geometry, the m-particle joint index space and the
//!   shared [`TopologyMatrix`] of Hamiltonian non-zeros.
//! - [`noise`]: random telegraph processes living on lattice links and sites.
//! - [`hamiltonian`]: the per-realization reduced Hamiltonian (diagonal plus
//!   the forward half of every neighbor list) and its sparse action.
//! - [`propagators`]: spectral, RK4 and Taylor single-step backends with norm
//!   monitoring.
//! - [`ensemble`]: the realization loop, staged timing and the packed
//!   ensemble-averaged density matrix.
//! - [`observables`]: post-processing of density matrix snapshots.

pub mod ensemble;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod noise;
pub mod observables;
pub mod propagators;
pub mod real;

pub use ensemble::{
    accumulate_density, estimate_memory, run, DensityMatrix, InitialStateSpec, MemoryEstimate,
    NullSink, RunConfig, RunReport, SnapshotSink, StageProfile,
};
pub use error::{Error, Result};
pub use hamiltonian::{CouplingModel, ReducedHamiltonian};
pub use lattice::{Boundary, JointSpace, LatticeTopology, TopologyMatrix};
pub use noise::{NoiseProcess, NoiseSpec, NoiseTarget};
pub use observables::{ObservableKind, ObservableSet, Observables};
pub use propagators::{Backend, EigenDecomposition, NormEvent, StepperConfig, WaveFunction};
pub use real::{Precision, Real};

pub use num_complex::{Complex, Complex64};
