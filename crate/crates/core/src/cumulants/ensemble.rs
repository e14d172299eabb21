//! Thermal ensembles over a spectrum and the energy-density matched
//! inverse temperature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scars::ScarSet;
use crate::spectral::Spectrum;

const BETA_TOL: f64 = 1e-10;
const BETA_LIMIT: f64 = 1e8;

/// Boltzmann weights `e^{-beta (E_i - shift)}` with the shift chosen so the
/// largest weight is 1.
fn boltzmann(energies: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let shift = if beta >= 0.0 {
        energies.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        energies.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    let w = energies.iter().map(|&e| (-beta * (e - shift)).exp()).collect();
    (w, shift)
}

/// `<H>_beta / N`.
pub fn energy_density(energies: &[f64], beta: f64, n_sites: usize) -> f64 {
    let (w, _) = boltzmann(energies, beta);
    let z: f64 = w.iter().sum();
    let e: f64 = w.iter().zip(energies).map(|(w, e)| w * e).sum();
    e / z / n_sites as f64
}

/// Inverse temperature at which the canonical energy density equals
/// `target`, by bisection.
pub fn solve_beta(spec: &Spectrum, target: f64, n_sites: usize) -> Result<f64> {
    let e = spec.energies();
    if e.is_empty() || n_sites == 0 {
        return Err(Error::domain("empty spectrum"));
    }
    let n = n_sites as f64;
    let (lo_e, hi_e) = (spec.e_min() / n, spec.e_max() / n);
    if !(target > lo_e && target < hi_e) {
        return Err(Error::domain(format!(
            "unreachable energy density {target} outside ({lo_e}, {hi_e})"
        )));
    }
    let f = |b: f64| energy_density(e, b, n_sites);

    // bracket: f decreases from e_max/N to e_min/N as beta goes -inf..inf
    let mut reach = 1.0;
    while !(f(reach) < target && f(-reach) > target) {
        reach *= 2.0;
        if reach > BETA_LIMIT {
            return Err(Error::domain(format!(
                "energy density {target} not bracketed for |beta| <= {BETA_LIMIT}"
            )));
        }
    }

    let grid: Vec<f64> = (0..=64).map(|k| -reach + 2.0 * reach * k as f64 / 64.0).collect();
    let values: Vec<f64> = grid.iter().map(|&b| f(b)).collect();
    let slack = 1e-12 * (hi_e - lo_e);
    if values.windows(2).any(|w| w[1] > w[0] + slack) {
        return Err(Error::domain("energy density is not monotone in beta"));
    }

    let (mut lo, mut hi) = (-reach, reach);
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let v = f(mid);
        if (v - target).abs() <= 0.25 * BETA_TOL {
            break;
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1e-300) {
            break;
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EnsembleKind {
    Canonical,
    /// Uniform weight on states within `window_width / 2` of a centre energy.
    Microcanonical { window_width: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    kind: EnsembleKind,
    /// Inverse temperature; `None` for microcanonical windows.
    beta: Option<f64>,
    /// Partition function `sum_i e^{-beta E_i}` (window count when
    /// microcanonical).
    z: f64,
    /// Normalized probabilities.
    weights: Vec<f64>,
}

impl Ensemble {
    pub fn canonical(spec: &Spectrum, beta: f64) -> Self {
        let (w, shift) = boltzmann(spec.energies(), beta);
        let total: f64 = w.iter().sum();
        Self {
            kind: EnsembleKind::Canonical,
            beta: Some(beta),
            z: total * (-beta * shift).exp(),
            weights: w.into_iter().map(|x| x / total).collect(),
        }
    }

    pub fn microcanonical(spec: &Spectrum, centre: f64, window_width: f64) -> Result<Self> {
        if !(window_width > 0.0) {
            return Err(Error::domain("microcanonical window width must be positive"));
        }
        let inside: Vec<bool> = spec
            .energies()
            .iter()
            .map(|&e| (e - centre).abs() <= 0.5 * window_width)
            .collect();
        let count = inside.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::domain(format!(
                "empty microcanonical window of width {window_width} at {centre}"
            )));
        }
        Ok(Self {
            kind: EnsembleKind::Microcanonical { window_width },
            beta: None,
            z: count as f64,
            weights: inside
                .into_iter()
                .map(|b| if b { 1.0 / count as f64 } else { 0.0 })
                .collect(),
        })
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn partition_function(&self) -> f64 {
        self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights renormalized over `set` (zero elsewhere).
    pub fn restricted_weights(&self, set: &[usize]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.weights.len()];
        for &m in set {
            if m >= out.len() {
                return Err(Error::Index {
                    index: m,
                    len: out.len(),
                });
            }
            out[m] = self.weights[m];
        }
        let total: f64 = out.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("ensemble has no weight on the thermal set"));
        }
        out.iter_mut().for_each(|x| *x /= total);
        Ok(out)
    }

    /// Ensemble average of a diagonal quantity.
    pub fn mean(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Two scar states and the inverse temperature matching their mean
/// energy density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScarPair {
    pub a: usize,
    pub b: usize,
    pub e_a: f64,
    pub e_b: f64,
    pub beta_ab: f64,
}

impl ScarPair {
    pub fn new(spec: &Spectrum, scars: &ScarSet, a: usize, b: usize, n_sites: usize) -> Result<Self> {
        for m in [a, b] {
            if !scars.is_scar(m) {
                return Err(Error::domain(format!("state {m} is not a selected scar")));
            }
        }
        let e = spec.energies();
        let (e_a, e_b) = (e[a], e[b]);
        let beta_ab = solve_beta(spec, (e_a + e_b) / (2.0 * n_sites as f64), n_sites)?;
        Ok(Self {
            a,
            b,
            e_a,
            e_b,
            beta_ab,
        })
    }

    pub fn energy_density(&self, n_sites: usize) -> f64 {
        (self.e_a + self.e_b) / (2.0 * n_sites as f64)
    }
}
