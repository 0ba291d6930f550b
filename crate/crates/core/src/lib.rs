//! Quantum van der Pol oscillator under a squeezing drive: Liouvillian
//! spectra, phase-space theory and stochastic trajectories.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod io;
pub mod langevin;
pub mod linalg;
pub mod liouvillian;
pub mod meanfield;
pub mod params;
pub mod semiclassical;
pub mod spectral;

pub use dynamics::{Frame, ObservableTrajectory};
pub use error::{Error, Result};
pub use faer::c64;
pub use io::{CsvTable, Provenance, SpectrumRecord};
pub use fock::{cutoff_for, default_cutoff, DensityMatrix, FockSpace};
pub use liouvillian::{build_rotating_liouvillian, Parity, Superoperator};
pub use params::{ModelParams, ScaledParams};
