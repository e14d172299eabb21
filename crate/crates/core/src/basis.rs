//! Rydberg-blockaded configuration space of a periodic chain.
//!
//! A configuration is an `N`-bit mask where bit `j` set means site `j` is
//! excited (spin up). The blockade forbids two excitations on neighbouring
//! sites, including the bond between site `N-1` and site `0`.

use crate::error::{Error, Result};

/// Largest chain length representable by a `u64` mask.
pub const MAX_SITES: usize = 63;

#[inline]
pub(crate) fn full_mask(n_sites: usize) -> u64 {
    (1u64 << n_sites) - 1
}

/// Cyclic rotation that moves site `j` to site `j + shift (mod N)`.
#[inline]
pub fn translate(config: u64, shift: usize, n_sites: usize) -> u64 {
    let shift = shift % n_sites;
    if shift == 0 {
        return config;
    }
    ((config << shift) | (config >> (n_sites - shift))) & full_mask(n_sites)
}

/// Mirror image under site `j -> N-1-j`.
#[inline]
pub fn reflect(config: u64, n_sites: usize) -> u64 {
    config.reverse_bits() >> (64 - n_sites)
}

/// True when no two cyclically adjacent sites are both up.
#[inline]
pub fn satisfies_blockade(config: u64, n_sites: usize) -> bool {
    config & translate(config, 1, n_sites) == 0
}

/// Number of up spins.
#[inline]
pub fn excitations(config: u64) -> u32 {
    config.count_ones()
}

#[derive(Debug, Clone)]
pub struct ConstrainedBasis {
    n_sites: usize,
    configs: Vec<u64>,
}

impl ConstrainedBasis {
    /// Enumerates every blockade-respecting configuration in ascending order.
    pub fn enumerate(n_sites: usize) -> Result<Self> {
        if n_sites < 3 {
            return Err(Error::domain("chain too short for periodic blockade"));
        }
        if n_sites > MAX_SITES {
            return Err(Error::domain(format!(
                "chain of {n_sites} sites exceeds the {MAX_SITES}-site mask limit"
            )));
        }

        // Open-chain strings built site by site, then the wrap-around bond.
        let mut configs = Vec::new();
        let mut stack = vec![(0u64, 0usize, false)];
        while let Some((config, site, prev_up)) = stack.pop() {
            if site == n_sites {
                let wrap = config & 1 == 1 && prev_up;
                if !wrap {
                    configs.push(config);
                }
                continue;
            }
            stack.push((config, site + 1, false));
            if !prev_up {
                stack.push((config | (1 << site), site + 1, true));
            }
        }
        configs.sort_unstable();

        Ok(Self { n_sites, configs })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[u64] {
        &self.configs
    }

    pub fn config(&self, index: usize) -> u64 {
        self.configs[index]
    }

    pub fn index_of(&self, config: u64) -> Option<usize> {
        self.configs.binary_search(&config).ok()
    }

    pub fn contains(&self, config: u64) -> bool {
        self.index_of(config).is_some()
    }

    /// Whether the PXP flip at `site` is admissible: both cyclic neighbours
    /// of `site` must be down.
    pub fn neighbors_down(&self, config: u64, site: usize) -> Result<bool> {
        if site >= self.n_sites {
            return Err(Error::Index {
                index: site,
                len: self.n_sites,
            });
        }
        debug_assert!(self.contains(config));
        let left = (site + self.n_sites - 1) % self.n_sites;
        let right = (site + 1) % self.n_sites;
        Ok(config & ((1 << left) | (1 << right)) == 0)
    }

    /// Configurations reached from `config` by one admissible flip, in site order.
    pub fn flips(&self, config: u64) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_sites).filter_map(move |site| {
            // site < n_sites, so the call cannot fail
            match self.neighbors_down(config, site) {
                Ok(true) => Some(config ^ (1 << site)),
                _ => None,
            }
        })
    }
}
