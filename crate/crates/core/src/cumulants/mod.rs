//! Thermal and scar correlators, their free cumulants, and the
//! non-crossing decomposition of scar correlators.

pub mod decomposition;
pub mod ensemble;
pub mod factorization;
pub mod free;
pub mod kernels;
pub mod partitions;
pub mod scaling;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub use decomposition::{decompose_scar_correlator, DecompositionReport};
pub use ensemble::{solve_beta, Ensemble, EnsembleKind, ScarPair};
pub use factorization::{factorization_test, FactorizationReport};
pub use free::{
    crossing_term, scar_correlator, scar_free_cumulant, thermal_correlator, thermal_free_cumulant,
};
pub use partitions::{noncrossing_partitions, Diagram, Partition};
pub use scaling::{crossing_point, loglog_slope, CrossingPoint};

/// A labelled complex series over a scalar time grid. Point `k` is
/// evaluated at the time vector `pattern * times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulantSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CumulantSeries {
    /// Evaluates `f` at every grid point in parallel; results keep grid
    /// order so the output does not depend on the thread count.
    pub fn evaluate<F>(label: impl Into<String>, grid: &[f64], pattern: &[f64], f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Result<Complex64> + Sync,
    {
        let values = grid
            .par_iter()
            .map(|&t| {
                let tv: Vec<f64> = pattern.iter().map(|c| c * t).collect();
                f(&tv)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            label: label.into(),
            times: grid.to_vec(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

/// `n_points` equally spaced times from 0 to `t_max` inclusive.
pub fn uniform_grid(t_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points == 0 || !t_max.is_finite() || t_max < 0.0 {
        return Err(Error::domain("time grid needs n_points >= 1 and finite t_max >= 0"));
    }
    if n_points == 1 {
        return Ok(vec![0.0]);
    }
    let step = t_max / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|k| if k == n_points - 1 { t_max } else { k as f64 * step })
        .collect())
}

/// Default time pattern for a correlator of order `q`: a single moving
/// operator in the middle of otherwise simultaneous ones.
pub fn default_pattern(q: usize) -> Vec<f64> {
    match q {
        3 => vec![0.0, 1.0, 0.0],
        4 => vec![1.0, 0.0, 1.0, 0.0],
        _ => {
            let mut p = vec![0.0; q];
            if q > 1 {
                p[0] = 1.0;
            }
            p
        }
    }
}
