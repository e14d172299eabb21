//! Factorization of the repeated-index product over scar pairs:
//!
//! `sum_{i in T} O_ai O_ii O_ib  ~  (sum_{i in T} O_ai O_ib) <O>_{ab}`
//!
//! where `<O>_{ab}` is the thermal expectation value at the pair's energy.

use std::io::{self, Write};

use nalgebra::DMatrix;

use super::ensemble::{solve_beta, Ensemble, EnsembleKind};
use super::free::thermal_mask;
use crate::error::{Error, Result};
use crate::scars::ScarSet;
use crate::spectral::{EigenObservable, Spectrum};
use crate::table::{fmt_float, write_row};

/// Default microcanonical window as a fraction of the spectral span.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.1;

impl EnsembleKind {
    pub fn default_microcanonical(spec: &Spectrum) -> Self {
        EnsembleKind::Microcanonical {
            window_width: DEFAULT_WINDOW_FRACTION * (spec.e_max() - spec.e_min()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FactorizationReport {
    pub kind: EnsembleKind,
    pub scars: Vec<usize>,
    pub energies: Vec<f64>,
    pub lhs: DMatrix<f64>,
    pub rhs: DMatrix<f64>,
    /// Matched inverse temperature per pair; `None` when it was not needed
    /// and could not be solved (microcanonical only).
    pub betas: Vec<Vec<Option<f64>>>,
    /// Thermal expectation value used for each pair.
    pub thermal_factor: DMatrix<f64>,
    pub rel_error: DMatrix<f64>,
    pub frobenius_rel_error: f64,
}

/// Builds the LHS and RHS matrices over all pairs of selected scars.
/// `thermal_set` defaults to the non-scar states inside the scar band.
pub fn factorization_test(
    spec: &Spectrum,
    obs: &EigenObservable,
    scars: &ScarSet,
    n_sites: usize,
    kind: EnsembleKind,
    thermal_set: Option<&[usize]>,
) -> Result<FactorizationReport> {
    let d = spec.dim();
    if obs.dim() != d || scars.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if obs.dim() != d { obs.dim() } else { scars.dim() },
        });
    }
    let s = &scars.scar_indices;
    if s.len() < 2 {
        return Err(Error::domain("factorization needs at least two scars"));
    }
    let mask = thermal_mask(d, scars, thermal_set.unwrap_or(&scars.thermal_indices))?;
    let t: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
    if t.is_empty() {
        return Err(Error::domain("empty thermal set"));
    }

    let e = spec.energies();
    let diag = obs.diagonal();
    let k = s.len();
    let mut lhs = DMatrix::zeros(k, k);
    let mut overlap = DMatrix::zeros(k, k);
    for (x, &a) in s.iter().enumerate() {
        for (y, &b) in s.iter().enumerate() {
            let (mut l, mut o) = (0.0, 0.0);
            for &i in &t {
                let p = obs.get(a, i) * obs.get(i, b);
                l += p * diag[i];
                o += p;
            }
            lhs[(x, y)] = l;
            overlap[(x, y)] = o;
        }
    }

    let mut betas = vec![vec![None; k]; k];
    let mut thermal_factor = DMatrix::zeros(k, k);
    for (x, &a) in s.iter().enumerate() {
        for (y, &b) in s.iter().enumerate() {
            let centre = 0.5 * (e[a] + e[b]);
            let beta = solve_beta(spec, centre / n_sites as f64, n_sites);
            let ens = match kind {
                EnsembleKind::Canonical => {
                    let beta = beta?;
                    betas[x][y] = Some(beta);
                    Ensemble::canonical(spec, beta)
                }
                EnsembleKind::Microcanonical { window_width } => {
                    betas[x][y] = beta.ok();
                    Ensemble::microcanonical(spec, centre, window_width)?
                }
            };
            thermal_factor[(x, y)] = ens.mean(&diag);
        }
    }
    let rhs = overlap.component_mul(&thermal_factor);

    let diff = &lhs - &rhs;
    let rel_error = DMatrix::from_fn(k, k, |x, y| diff[(x, y)].abs() / lhs[(x, y)].abs());
    let frobenius_rel_error = diff.norm() / lhs.norm();
    Ok(FactorizationReport {
        kind,
        scars: s.clone(),
        energies: s.iter().map(|&m| e[m]).collect(),
        lhs,
        rhs,
        betas,
        thermal_factor,
        rel_error,
        frobenius_rel_error,
    })
}

impl FactorizationReport {
    /// One row per ordered scar pair.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_row(
            w,
            &["a", "b", "E_a[J]", "E_b[J]", "beta_ab[1/J]", "lhs[1]", "rhs[1]", "rel_error[1]"],
        )?;
        for (x, &a) in self.scars.iter().enumerate() {
            for (y, &b) in self.scars.iter().enumerate() {
                write_row(
                    w,
                    &[
                        a.to_string(),
                        b.to_string(),
                        fmt_float(self.energies[x]),
                        fmt_float(self.energies[y]),
                        fmt_float(self.betas[x][y].unwrap_or(f64::NAN)),
                        fmt_float(self.lhs[(x, y)]),
                        fmt_float(self.rhs[(x, y)]),
                        fmt_float(self.rel_error[(x, y)]),
                    ],
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scars::{select_scars, SelectionMethod};
    use crate::test_support::small_system;

    #[test]
    fn identity_observable_factorizes_exactly() {
        let sys = small_system(12);
        let scars = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 4, 0.6).unwrap();
        let id = EigenObservable::identity(sys.spec.dim());
        for kind in [EnsembleKind::Canonical, EnsembleKind::default_microcanonical(&sys.spec)] {
            let all: Vec<usize> = (0..sys.spec.dim()).collect();
            let r = factorization_test(&sys.spec, &id, &scars, 12, kind, Some(&all)).unwrap();
            // identity has no thermal overlap with scars, so every entry is zero
            assert!(r.lhs.iter().all(|v| v.abs() < 1e-14));
            assert!((&r.lhs - &r.rhs).norm() < 1e-14);
            assert!(r.thermal_factor.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn matches_direct_sums() {
        let sys = small_system(12);
        let scars = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 4, 0.6).unwrap();
        let r = factorization_test(&sys.spec, &sys.obs, &scars, 12, EnsembleKind::Canonical, None).unwrap();
        assert_eq!(r.lhs.shape(), (4, 4));
        let (x, y) = (0, 2);
        let (a, b) = (r.scars[x], r.scars[y]);
        let t = &scars.thermal_indices;
        let lhs: f64 = t.iter().map(|&i| sys.obs.get(a, i) * sys.obs.get(i, i) * sys.obs.get(i, b)).sum();
        assert!((r.lhs[(x, y)] - lhs).abs() < 1e-13);

        let beta = r.betas[x][y].unwrap();
        let e = sys.spec.energies();
        let z: f64 = e.iter().map(|&ej| (-beta * ej).exp()).sum();
        let th: f64 = (0..e.len()).map(|j| sys.obs.get(j, j) * (-beta * e[j]).exp()).sum::<f64>() / z;
        let ov: f64 = t.iter().map(|&i| sys.obs.get(a, i) * sys.obs.get(i, b)).sum();
        assert!((r.rhs[(x, y)] - ov * th).abs() < 1e-12);
        assert!((&r.lhs - r.lhs.transpose()).norm() < 1e-12);
    }

    #[test]
    fn microcanonical_close_to_canonical() {
        let sys = small_system(14);
        let scars = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 6, 0.6).unwrap();
        let c = factorization_test(&sys.spec, &sys.obs, &scars, 14, EnsembleKind::Canonical, None).unwrap();
        let m = factorization_test(
            &sys.spec,
            &sys.obs,
            &scars,
            14,
            EnsembleKind::default_microcanonical(&sys.spec),
            None,
        )
        .unwrap();
        assert_eq!(c.lhs, m.lhs);
        let gap = (&c.rhs - &m.rhs).norm() / c.rhs.norm();
        assert!(gap <= c.frobenius_rel_error + m.frobenius_rel_error, "{gap}");
    }

    #[test]
    fn errors() {
        let sys = small_system(10);
        let one = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 1, 0.6).unwrap();
        assert!(factorization_test(&sys.spec, &sys.obs, &one, 10, EnsembleKind::Canonical, None).is_err());
        let two = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 2, 0.6).unwrap();
        let err = factorization_test(&sys.spec, &sys.obs, &two, 10, EnsembleKind::Canonical, Some(&[]))
            .unwrap_err();
        assert!(err.to_string().contains("empty thermal set"));
    }

    #[test]
    fn csv_rows() {
        let sys = small_system(10);
        let scars = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, 3, 0.6).unwrap();
        let r = factorization_test(&sys.spec, &sys.obs, &scars, 10, EnsembleKind::Canonical, None).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 9);
        assert!(text.starts_with("a,b,E_a[J],E_b[J],beta_ab[1/J],lhs[1],rhs[1],rel_error[1]"));
    }
}
