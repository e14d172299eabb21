//! Zero-momentum, reflection-even sector of the constrained chain.
//!
//! The symmetry group is the dihedral group generated by the one-site
//! translation `j -> j+1 (mod N)` and the reflection `j -> N-1-j`. Every
//! character is +1 in this sector, so each orbit contributes exactly one
//! symmetrized state: the uniform superposition of its members.

use std::sync::Arc;

use crate::basis::{reflect, translate, ConstrainedBasis};
use crate::error::{Error, Result};

/// Identifier written into cache headers.
pub const SECTOR_ID: &str = "k0_even";

#[derive(Debug, Clone)]
pub struct SectorBasis {
    parent: Arc<ConstrainedBasis>,
    representatives: Vec<u64>,
    orbit_sizes: Vec<usize>,
    norms: Vec<f64>,
    /// Parent-basis indices of each orbit's members, ascending.
    orbits: Vec<Vec<usize>>,
    /// Sector index of the orbit containing each parent configuration.
    orbit_of: Vec<usize>,
}

/// Distinct images of `config` under the full dihedral group, ascending.
pub fn orbit_images(config: u64, n_sites: usize) -> Vec<u64> {
    let mut images: Vec<u64> = (0..n_sites)
        .flat_map(|r| {
            let t = translate(config, r, n_sites);
            [t, reflect(t, n_sites)]
        })
        .collect();
    images.sort_unstable();
    images.dedup();
    images
}

impl SectorBasis {
    pub fn build(parent: Arc<ConstrainedBasis>) -> Self {
        let n = parent.n_sites();
        let unassigned = usize::MAX;
        let mut orbit_of = vec![unassigned; parent.dim()];
        let mut representatives = Vec::new();
        let mut orbits = Vec::new();

        // Configs are ascending, so the first unassigned member of an orbit
        // is its minimum.
        for (idx, &config) in parent.configs().iter().enumerate() {
            if orbit_of[idx] != unassigned {
                continue;
            }
            let sector_idx = representatives.len();
            let members: Vec<usize> = orbit_images(config, n)
                .into_iter()
                .map(|c| parent.index_of(c).expect("blockade is symmetry invariant"))
                .collect();
            for &m in &members {
                orbit_of[m] = sector_idx;
            }
            representatives.push(config);
            orbits.push(members);
        }

        let orbit_sizes: Vec<usize> = orbits.iter().map(Vec::len).collect();
        let norms = orbit_sizes
            .iter()
            .map(|&s| 1.0 / (s as f64).sqrt())
            .collect();

        Self {
            parent,
            representatives,
            orbit_sizes,
            norms,
            orbits,
            orbit_of,
        }
    }

    pub fn parent(&self) -> &ConstrainedBasis {
        &self.parent
    }

    pub fn parent_arc(&self) -> &Arc<ConstrainedBasis> {
        &self.parent
    }

    pub fn n_sites(&self) -> usize {
        self.parent.n_sites()
    }

    pub fn dim(&self) -> usize {
        self.representatives.len()
    }

    pub fn representatives(&self) -> &[u64] {
        &self.representatives
    }

    pub fn orbit_sizes(&self) -> &[usize] {
        &self.orbit_sizes
    }

    /// Amplitude of each orbit member in the normalized symmetrized state.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn orbit_members(&self, sector_idx: usize) -> &[usize] {
        &self.orbits[sector_idx]
    }

    /// Sector index of the orbit containing parent configuration `parent_idx`.
    pub fn orbit_of(&self, parent_idx: usize) -> usize {
        self.orbit_of[parent_idx]
    }

    /// Sector index of the orbit containing an arbitrary admissible config.
    pub fn sector_index_of(&self, config: u64) -> Option<usize> {
        self.parent.index_of(config).map(|i| self.orbit_of[i])
    }

    /// Sector index of the symmetrized Néel state, if the chain has one.
    pub fn neel_index(&self) -> Result<usize> {
        let n = self.n_sites();
        if !n.is_multiple_of(2) {
            return Err(Error::domain("no Néel state on an odd chain"));
        }
        let neel = (0..n / 2).fold(0u64, |c, k| c | (1 << (2 * k)));
        Ok(self
            .sector_index_of(neel)
            .expect("Néel configuration is admissible"))
    }

    pub fn vector(&self, amplitudes: Vec<f64>) -> Result<SectorVector<'_>> {
        SectorVector::new(self, amplitudes)
    }

    /// Orthogonal projection of a full-basis vector onto the sector.
    pub fn project(&self, full: &[f64]) -> Result<SectorVector<'_>> {
        if full.len() != self.parent.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.parent.dim(),
                got: full.len(),
            });
        }
        let amplitudes = self
            .orbits
            .iter()
            .zip(&self.norms)
            .map(|(members, norm)| norm * members.iter().map(|&m| full[m]).sum::<f64>())
            .collect();
        Ok(SectorVector {
            sector: self,
            amplitudes,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SectorVector<'a> {
    sector: &'a SectorBasis,
    amplitudes: Vec<f64>,
}

impl<'a> SectorVector<'a> {
    pub fn new(sector: &'a SectorBasis, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != sector.dim() {
            return Err(Error::DimensionMismatch {
                expected: sector.dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { sector, amplitudes })
    }

    pub fn sector(&self) -> &'a SectorBasis {
        self.sector
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Expands the symmetrized state over the full constrained basis.
    pub fn lift(&self) -> Vec<f64> {
        let s = self.sector;
        let mut full = vec![0.0; s.parent.dim()];
        for ((members, norm), amp) in s.orbits.iter().zip(&s.norms).zip(&self.amplitudes) {
            for &m in members {
                full[m] = amp * norm;
            }
        }
        full
    }
}
