//! Size scaling of the lightest crossing contraction.

use serde::Serialize;

use super::free::crossing_term;
use crate::error::{Error, Result};
use crate::scars::ScarSet;
use crate::spectral::EigenObservable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingPoint {
    pub n_sites: usize,
    pub dim: usize,
    /// Central scar with itself.
    pub diagonal: f64,
    /// Central scar with its nearest scar in energy.
    pub adjacent: f64,
}

/// Crossing term for the central scar and for the adjacent pair, summed
/// over the in-band thermal states.
pub fn crossing_point(obs: &EigenObservable, scars: &ScarSet, n_sites: usize) -> Result<CrossingPoint> {
    let a = scars
        .central_scar()
        .ok_or_else(|| Error::domain("no scars selected"))?;
    let b = scars
        .adjacent_scar(a)
        .ok_or_else(|| Error::domain("crossing scaling needs at least two scars"))?;
    Ok(CrossingPoint {
        n_sites,
        dim: obs.dim(),
        diagonal: crossing_term(obs, &scars.thermal_indices, a, a)?,
        adjacent: crossing_term(obs, &scars.thermal_indices, a, b)?,
    })
}

/// Least-squares slope of `ln|y|` against `ln x`. NaN with fewer than two
/// distinct abscissae.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a.ln(), b.abs().ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}
