//! Scar identification: Néel overlap, bipartite entanglement entropy, and
//! the scar / thermal partition of the central band.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{full_mask, translate, ConstrainedBasis};
use crate::error::{Error, Result};
use crate::sector::SectorBasis;
use crate::spectral::Spectrum;
use crate::table::{fmt_float, write_row};

const NORM_TOL: f64 = 1e-8;
const RDM_CUTOFF: f64 = 1e-14;

/// A contiguous region of `cut` sites starting at `offset`, versus the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bipartition {
    pub cut: usize,
    pub offset: usize,
}

impl Bipartition {
    pub fn new(cut: usize, offset: usize) -> Self {
        Self { cut, offset }
    }

    pub fn half_chain(n_sites: usize) -> Self {
        Self::new(n_sites / 2, 0)
    }
}

/// Positions of every basis configuration in the amplitude matrix of a
/// bipartition. Only patterns that actually occur get a row or column, so
/// pairs that would violate the blockade across a boundary are simply absent.
#[derive(Debug, Clone)]
pub struct SchmidtLayout {
    rows: Vec<usize>,
    cols: Vec<usize>,
    n_rows: usize,
    n_cols: usize,
}

impl SchmidtLayout {
    pub fn new(basis: &ConstrainedBasis, part: Bipartition) -> Result<Self> {
        let n = basis.n_sites();
        if part.cut == 0 || part.cut >= n {
            return Err(Error::domain(format!(
                "cut of {} sites must lie strictly between 0 and {n}",
                part.cut
            )));
        }
        let mask = full_mask(part.cut);
        let shift = (n - part.offset % n) % n;
        let mut left_ids: HashMap<u64, usize> = HashMap::new();
        let mut right_ids: HashMap<u64, usize> = HashMap::new();
        let mut rows = Vec::with_capacity(basis.dim());
        let mut cols = Vec::with_capacity(basis.dim());
        for &c in basis.configs() {
            let moved = translate(c, shift, n);
            let next = left_ids.len();
            rows.push(*left_ids.entry(moved & mask).or_insert(next));
            let next = right_ids.len();
            cols.push(*right_ids.entry(moved >> part.cut).or_insert(next));
        }
        Ok(Self {
            rows,
            cols,
            n_rows: left_ids.len(),
            n_cols: right_ids.len(),
        })
    }

    /// Von Neumann entropy (nats) of the region for a normalized state.
    pub fn entropy(&self, full: &[f64]) -> Result<f64> {
        if full.len() != self.rows.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                got: full.len(),
            });
        }
        let norm = full.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::domain(format!("state norm {norm} is not 1")));
        }
        let mut m = DMatrix::<f64>::zeros(self.n_rows, self.n_cols);
        for ((&r, &c), &amp) in self.rows.iter().zip(&self.cols).zip(full) {
            m[(r, c)] = amp;
        }
        let rho = if self.n_rows <= self.n_cols {
            &m * m.transpose()
        } else {
            m.transpose() * &m
        };
        let eig = SymmetricEigen::new(rho);
        Ok(eig
            .eigenvalues
            .iter()
            .filter(|&&l| l > RDM_CUTOFF)
            .map(|&l| -l * l.ln())
            .sum())
    }
}

/// Entanglement entropy of the first `cut_sites` sites.
pub fn entanglement_entropy(basis: &ConstrainedBasis, full: &[f64], cut_sites: usize) -> Result<f64> {
    SchmidtLayout::new(basis, Bipartition::new(cut_sites, 0))?.entropy(full)
}

/// Half-chain entropy of every eigenstate.
pub fn eigenstate_entropies(spec: &Spectrum, sector: &SectorBasis) -> Result<Vec<f64>> {
    if spec.dim() != sector.dim() {
        return Err(Error::DimensionMismatch {
            expected: sector.dim(),
            got: spec.dim(),
        });
    }
    let layout = SchmidtLayout::new(sector.parent(), Bipartition::half_chain(sector.n_sites()))?;
    (0..spec.dim())
        .into_par_iter()
        .map(|m| {
            let v = sector.vector(spec.vector(m))?;
            layout.entropy(&v.lift())
        })
        .collect()
}

/// Squared overlap of each eigenstate with the symmetrized Néel state.
pub fn neel_overlap(spec: &Spectrum, sector: &SectorBasis) -> Result<Vec<f64>> {
    if spec.dim() != sector.dim() {
        return Err(Error::DimensionMismatch {
            expected: sector.dim(),
            got: spec.dim(),
        });
    }
    let k = sector.neel_index()?;
    Ok(spec.vectors().row(k).iter().map(|x| x * x).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    NeelOverlap,
    EntropyOutlier,
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMethod::NeelOverlap => "neel_overlap",
            SelectionMethod::EntropyOutlier => "entropy_outlier",
        })
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neel_overlap" => Ok(SelectionMethod::NeelOverlap),
            "entropy_outlier" => Ok(SelectionMethod::EntropyOutlier),
            other => Err(Error::domain(format!("unknown scar selection method {other:?}"))),
        }
    }
}

/// Central `band_fraction` of the spectral range, as a closed interval.
pub fn band_window(energies: &[f64], band_fraction: f64) -> Result<(f64, f64)> {
    if !(band_fraction > 0.0 && band_fraction <= 1.0) {
        return Err(Error::domain(format!(
            "band fraction {band_fraction} outside (0, 1]"
        )));
    }
    let (lo, hi) = match (energies.first(), energies.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::domain("empty spectrum")),
    };
    let centre = 0.5 * (lo + hi);
    let half = 0.5 * band_fraction * (hi - lo);
    Ok((centre - half, centre + half))
}

fn window_indices(energies: &[f64], window: (f64, f64)) -> Vec<usize> {
    (0..energies.len())
        .filter(|&m| energies[m] >= window.0 && energies[m] <= window.1)
        .collect()
}

/// Splits the window into `count` equal energy bins and keeps the largest
/// overlap of each (lower index on ties). Bins that contain no eigenstate
/// contribute nothing.
pub fn select_by_overlap(
    energies: &[f64],
    overlaps: &[f64],
    count: usize,
    band_fraction: f64,
) -> Result<Vec<usize>> {
    if overlaps.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            expected: energies.len(),
            got: overlaps.len(),
        });
    }
    let window = band_window(energies, band_fraction)?;
    let members = window_indices(energies, window);
    check_count(count, members.len())?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let width = (window.1 - window.0) / count as f64;
    let edges: Vec<f64> = (0..count).map(|k| window.0 + k as f64 * width).collect();
    let mut best: Vec<Option<usize>> = vec![None; count];
    for &m in &members {
        // last edge not exceeding the energy; the top bin is closed
        let bin = edges.partition_point(|&e| e <= energies[m]).max(1) - 1;
        match best[bin] {
            Some(b) if overlaps[b] >= overlaps[m] => {}
            _ => best[bin] = Some(m),
        }
    }
    let mut out: Vec<usize> = best.into_iter().flatten().collect();
    out.sort_unstable();
    Ok(out)
}

/// The `count` lowest-entropy states of the window (lower index on ties).
pub fn select_by_entropy(
    energies: &[f64],
    entropy: &[f64],
    count: usize,
    band_fraction: f64,
) -> Result<Vec<usize>> {
    if entropy.len() != energies.len() {
        return Err(Error::DimensionMismatch {
            expected: energies.len(),
            got: entropy.len(),
        });
    }
    let window = band_window(energies, band_fraction)?;
    let mut members = window_indices(energies, window);
    check_count(count, members.len())?;
    members.sort_by(|&i, &j| entropy[i].total_cmp(&entropy[j]).then(i.cmp(&j)));
    members.truncate(count);
    members.sort_unstable();
    Ok(members)
}

fn check_count(count: usize, available: usize) -> Result<()> {
    if count > available {
        return Err(Error::domain(format!(
            "requested {count} scars but the band window holds {available} states"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScarSet {
    pub scar_indices: Vec<usize>,
    /// Window states that are not scars.
    pub thermal_indices: Vec<usize>,
    pub energies: Vec<f64>,
    /// Absent for odd chains, which have no Néel state.
    pub neel_overlap: Option<Vec<f64>>,
    pub entropy: Vec<f64>,
    pub method: SelectionMethod,
    pub band_window: (f64, f64),
}

impl ScarSet {
    /// Assembles a set from explicit scar indices and precomputed diagnostics.
    pub fn from_parts(
        scar_indices: Vec<usize>,
        energies: Vec<f64>,
        neel_overlap: Option<Vec<f64>>,
        entropy: Vec<f64>,
        method: SelectionMethod,
        band_fraction: f64,
    ) -> Result<Self> {
        let d = energies.len();
        if entropy.len() != d || neel_overlap.as_ref().is_some_and(|o| o.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: entropy.len(),
            });
        }
        if let Some(&bad) = scar_indices.iter().find(|&&m| m >= d) {
            return Err(Error::Index { index: bad, len: d });
        }
        let window = band_window(&energies, band_fraction)?;
        let mut scars = scar_indices;
        scars.sort_unstable();
        scars.dedup();
        let thermal = window_indices(&energies, window)
            .into_iter()
            .filter(|m| scars.binary_search(m).is_err())
            .collect();
        Ok(Self {
            scar_indices: scars,
            thermal_indices: thermal,
            energies,
            neel_overlap,
            entropy,
            method,
            band_window: window,
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn is_scar(&self, m: usize) -> bool {
        self.scar_indices.binary_search(&m).is_ok()
    }

    pub fn in_window(&self, m: usize) -> bool {
        let e = self.energies[m];
        e >= self.band_window.0 && e <= self.band_window.1
    }

    /// Every eigenstate that is not a scar, window or not.
    pub fn non_scar_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&m| !self.is_scar(m)).collect()
    }

    /// Scar closest to the band centre (lower index on ties).
    pub fn central_scar(&self) -> Option<usize> {
        let centre = 0.5 * (self.band_window.0 + self.band_window.1);
        self.scar_indices.iter().copied().min_by(|&i, &j| {
            (self.energies[i] - centre)
                .abs()
                .total_cmp(&(self.energies[j] - centre).abs())
                .then(i.cmp(&j))
        })
    }

    /// The scar just above `a` in energy, or just below when `a` is the top.
    pub fn adjacent_scar(&self, a: usize) -> Option<usize> {
        let pos = self.scar_indices.binary_search(&a).ok()?;
        // indices are energy ordered, so neighbours in the list are neighbours in energy
        self.scar_indices
            .get(pos + 1)
            .or_else(|| pos.checked_sub(1).and_then(|p| self.scar_indices.get(p)))
            .copied()
    }

    pub fn mean_scar_entropy(&self) -> f64 {
        mean(self.scar_indices.iter().map(|&m| self.entropy[m]))
    }

    pub fn mean_thermal_entropy(&self) -> f64 {
        mean(self.thermal_indices.iter().map(|&m| self.entropy[m]))
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_row(
            w,
            &[
                "index",
                "energy[J]",
                "neel_overlap[1]",
                "entropy[nats]",
                "is_scar[0/1]",
                "in_window[0/1]",
            ],
        )?;
        for m in 0..self.dim() {
            let ov = self
                .neel_overlap
                .as_ref()
                .map_or(f64::NAN, |o| o[m]);
            write_row(
                w,
                &[
                    m.to_string(),
                    fmt_float(self.energies[m]),
                    fmt_float(ov),
                    fmt_float(self.entropy[m]),
                    (self.is_scar(m) as u8).to_string(),
                    (self.in_window(m) as u8).to_string(),
                ],
            )?;
        }
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Computes diagnostics and picks the scars.
pub fn select_scars(
    spec: &Spectrum,
    sector: &SectorBasis,
    method: SelectionMethod,
    count: usize,
    band_fraction: f64,
) -> Result<ScarSet> {
    let overlaps = match (method, neel_overlap(spec, sector)) {
        (_, Ok(o)) => Some(o),
        (SelectionMethod::NeelOverlap, Err(e)) => return Err(e),
        (SelectionMethod::EntropyOutlier, Err(_)) => None,
    };
    let entropy = eigenstate_entropies(spec, sector)?;
    let energies = spec.energies().to_vec();
    let scars = match method {
        SelectionMethod::NeelOverlap => select_by_overlap(
            &energies,
            overlaps.as_deref().expect("checked above"),
            count,
            band_fraction,
        )?,
        SelectionMethod::EntropyOutlier => {
            select_by_entropy(&energies, &entropy, count, band_fraction)?
        }
    };
    ScarSet::from_parts(scars, energies, overlaps, entropy, method, band_fraction)
}
