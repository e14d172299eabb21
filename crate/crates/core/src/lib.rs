//! Exact diagonalization of the PXP chain in its symmetric sector, scar
//! identification, and free-cumulant analysis of scar correlators.

pub mod basis;
pub mod cache;
pub mod cumulants;
pub mod error;
pub mod haar;
pub mod scars;
pub mod sector;
pub mod spectral;
pub mod system;
pub mod table;

pub use basis::ConstrainedBasis;
pub use error::{Error, Result};
pub use haar::{HaarSampler, MomentCheckReport};
pub use scars::{select_scars, ScarSet, SelectionMethod};
pub use sector::{SectorBasis, SectorVector};
pub use spectral::{
    build_hamiltonian, diagonalize, observable_in_eigenbasis, EigenObservable, SectorHamiltonian,
    Spectrum,
};
pub use system::{CacheStatus, PxpSystem};
