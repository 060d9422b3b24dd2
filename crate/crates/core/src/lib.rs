//! Exact thermal states of small Heisenberg spin-1/2 clusters and the
//! entanglement diagnostics that can be read off them: susceptibility
//! witnesses, Wootters concurrence, Entanglement of Formation, a trimer
//! energy criterion for genuine tripartite entanglement, and (H, T) sweeps.
//!
//! Conventions used throughout:
//!
//! * energies and temperatures are in Kelvin, fields in Oersted;
//! * each bond `(i, j, J)` contributes `-J S_i·S_j` to the Hamiltonian;
//! * the computational basis has site 0 as the most significant bit and
//!   bit value 0 meaning spin up (`S^z = +1/2`);
//! * susceptibilities are reduced, `χ̃ = χ k_B / (g μ_B)²`, in 1/K.

pub mod constants;
pub mod entanglement;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod model;
pub mod report;
pub mod sweep;
pub mod thermal;

pub use error::{Error, Result};
pub use linalg::{CMatrix, DenseHermitian, EigenSystem};
pub use model::{Bond, ClusterSpec};
pub use thermal::{Axis, Curve, ThermalState};
