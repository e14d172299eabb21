//! The full pipeline for one chain length: basis, sector, Hamiltonian,
//! spectrum and observable.

use std::path::Path;
use std::sync::Arc;

use crate::basis::ConstrainedBasis;
use crate::cache;
use crate::error::{Error, Result};
use crate::sector::{SectorBasis, SECTOR_ID};
use crate::spectral::{
    build_hamiltonian, diagonalize, observable_in_eigenbasis, EigenObservable, SectorHamiltonian,
    Spectrum,
};

#[derive(Debug, Clone)]
pub struct PxpSystem {
    pub n_sites: usize,
    pub sector: SectorBasis,
    pub hamiltonian: SectorHamiltonian,
    pub spectrum: Spectrum,
    pub observable: EigenObservable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
    /// The existing file was rejected for the given reason.
    Rebuilt(String),
}

/// Energies closer than this (relative to the Hamiltonian norm) are
/// treated as one degenerate level.
pub fn degeneracy_tolerance(h: &SectorHamiltonian) -> f64 {
    1e-9 * h.norm_inf().max(1.0)
}

fn sector_and_hamiltonian(n_sites: usize) -> Result<(SectorBasis, SectorHamiltonian)> {
    let basis = Arc::new(ConstrainedBasis::enumerate(n_sites)?);
    let sector = SectorBasis::build(basis);
    let h = build_hamiltonian(&sector);
    Ok((sector, h))
}

impl PxpSystem {
    /// Diagonalizes from scratch. On even chains every degenerate
    /// eigenspace is rotated so a single vector carries its Néel weight.
    pub fn build(n_sites: usize) -> Result<Self> {
        let (sector, hamiltonian) = sector_and_hamiltonian(n_sites)?;
        let mut spectrum = diagonalize(&hamiltonian)?;
        if let Ok(neel) = sector.neel_index() {
            spectrum.align_degenerate(neel, degeneracy_tolerance(&hamiltonian))?;
        }
        let observable = observable_in_eigenbasis(&spectrum, &sector)?;
        Ok(Self {
            n_sites,
            sector,
            hamiltonian,
            spectrum,
            observable,
        })
    }

    /// Reuses a previously computed spectrum, checking it against the
    /// rebuilt Hamiltonian.
    pub fn from_spectrum(n_sites: usize, spectrum: Spectrum) -> Result<Self> {
        let (sector, hamiltonian) = sector_and_hamiltonian(n_sites)?;
        if spectrum.dim() != sector.dim() {
            return Err(Error::DimensionMismatch {
                expected: sector.dim(),
                got: spectrum.dim(),
            });
        }
        let bound = 1e-9 * hamiltonian.norm_inf().max(f64::MIN_POSITIVE);
        let residual = spectrum.max_residual(&hamiltonian);
        if !(residual <= bound) {
            return Err(Error::Eigensolver { residual, bound });
        }
        let observable = observable_in_eigenbasis(&spectrum, &sector)?;
        Ok(Self {
            n_sites,
            sector,
            hamiltonian,
            spectrum,
            observable,
        })
    }

    /// Loads the spectrum from `dir` when a valid cache exists, otherwise
    /// builds it and writes the cache. A corrupt or mismatched cache is
    /// rebuilt rather than trusted.
    pub fn load_or_build(n_sites: usize, dir: &Path) -> Result<(Self, CacheStatus)> {
        let path = cache::cache_path(dir, n_sites, SECTOR_ID);
        let mut status = CacheStatus::Built;
        if path.exists() {
            match cache::read(&path, n_sites, SECTOR_ID)
                .and_then(|(_, spectrum)| Self::from_spectrum(n_sites, spectrum))
            {
                Ok(sys) => return Ok((sys, CacheStatus::Hit)),
                Err(e) => status = CacheStatus::Rebuilt(e.to_string()),
            }
        }
        let sys = Self::build(n_sites)?;
        let bytes = cache::encode(&sys.spectrum, n_sites, SECTOR_ID, sys.observable.observable_id());
        cache::write(&path, &bytes)?;
        Ok((sys, status))
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }
}
