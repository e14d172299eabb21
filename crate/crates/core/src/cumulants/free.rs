//! Exact correlators and the distinct-index free cumulants.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ensemble::Ensemble;
use super::kernels::{mask_of, Evaluator};
use super::partitions::MAX_ORDER;
use crate::error::{Error, Result};
use crate::scars::ScarSet;
use crate::spectral::{EigenObservable, Spectrum};

fn check_times(times: &[f64], expected: usize) -> Result<()> {
    if times.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: times.len(),
        });
    }
    Ok(())
}

fn check_weights(ens: &Ensemble, d: usize) -> Result<()> {
    if ens.weights().len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ens.weights().len(),
        });
    }
    Ok(())
}

/// `<O(t_1) ... O(t_{q-1}) O(0)>` in the ensemble, summing over every
/// eigenstate. `times` has `q - 1` entries.
///
/// Orders 1 and 2 cost O(D^2); order 3 needs the dense product
/// `O diag(e^{i E (t_2 - t_1)}) O` and costs O(D^3) per call.
pub fn thermal_correlator(
    spec: &Spectrum,
    ens: &Ensemble,
    obs: &EigenObservable,
    times: &[f64],
    q: usize,
) -> Result<Complex64> {
    let ev = Evaluator::new(spec, obs)?;
    let d = ev.dim();
    check_weights(ens, d)?;
    let p = ens.weights();
    match q {
        1 => {
            check_times(times, 0)?;
            Ok(Complex64::new(ens.mean(ev.diag()), 0.0))
        }
        2 => {
            check_times(times, 1)?;
            let mask = vec![true; d];
            // the loop sum skips i == j; add the diagonal back
            let off = ev.distinct_loop(&mask, p, times[0]);
            let diag: f64 = (0..d).map(|i| p[i] * ev.diag()[i].powi(2)).sum();
            Ok(off + diag)
        }
        3 => {
            check_times(times, 2)?;
            let (t1, t2) = (times[0], times[1]);
            let e = ev.energies();
            let o = ev.matrix();
            let (mut ore, mut oim) = (o.clone(), o.clone());
            for (j, &ej) in e.iter().enumerate() {
                let ph = Complex64::from_polar(1.0, ej * (t2 - t1));
                ore.row_mut(j).scale_mut(ph.re);
                oim.row_mut(j).scale_mut(ph.im);
            }
            let mre: DMatrix<f64> = o * ore;
            let mim: DMatrix<f64> = o * oim;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                let left = p[i] * Complex64::from_polar(1.0, e[i] * t1);
                let mut inner = Complex64::new(0.0, 0.0);
                for k in 0..d {
                    let m = Complex64::new(mre[(i, k)], mim[(i, k)]);
                    inner += m * Complex64::from_polar(1.0, -e[k] * t2) * o[(k, i)];
                }
                acc += left * inner;
            }
            Ok(acc)
        }
        _ => Err(Error::UnsupportedOrder(q)),
    }
}

/// Thermal free cumulants restricted to `thermal_set`, with the ensemble
/// weights renormalized over that set:
///
/// * `q = 1`: `sum_{i in T} p_i O_ii`
/// * `q = 2`: `sum_{i != j in T} p_i O_ij O_ji e^{i (E_i - E_j) t}`
pub fn thermal_free_cumulant(
    spec: &Spectrum,
    ens: &Ensemble,
    obs: &EigenObservable,
    thermal_set: &[usize],
    times: &[f64],
    q: usize,
) -> Result<Complex64> {
    let ev = Evaluator::new(spec, obs)?;
    check_weights(ens, ev.dim())?;
    let p = ens.restricted_weights(thermal_set)?;
    match q {
        1 => {
            check_times(times, 0)?;
            Ok(Complex64::new(
                thermal_set.iter().map(|&i| p[i] * ev.diag()[i]).sum(),
                0.0,
            ))
        }
        2 => {
            check_times(times, 1)?;
            let mask = mask_of(ev.dim(), thermal_set)?;
            Ok(ev.distinct_loop(&mask, &p, times[0]))
        }
        _ => Err(Error::UnsupportedOrder(q)),
    }
}

/// `<a| O(t_1) ... O(t_q) |b>` with a complete set of eigenstates between
/// every pair of operators.
pub fn scar_correlator(
    spec: &Spectrum,
    obs: &EigenObservable,
    a: usize,
    b: usize,
    times: &[f64],
) -> Result<Complex64> {
    let q = times.len();
    if !(1..=MAX_ORDER).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    let ev = Evaluator::new(spec, obs)?;
    ev.check_index(a)?;
    ev.check_index(b)?;
    let mut r = ev.row(a, times[0]);
    for &t in &times[1..] {
        r = ev.step(&r, t);
    }
    Ok(r[b])
}

/// Thermal mask: members of `thermal_set` that are not scars.
pub(crate) fn thermal_mask(dim: usize, scars: &ScarSet, thermal_set: &[usize]) -> Result<Vec<bool>> {
    let mut mask = mask_of(dim, thermal_set)?;
    for &s in &scars.scar_indices {
        if s < dim {
            mask[s] = false;
        }
    }
    Ok(mask)
}

/// Scar free cumulant of order `q = times.len()`:
///
/// `sum_{i_1 != ... != i_{q-1} in T} O(t_1)_{a i_1} ... O(t_q)_{i_{q-1} b}`
///
/// with all thermal indices distinct and scars removed from `T`.
pub fn scar_free_cumulant(
    spec: &Spectrum,
    obs: &EigenObservable,
    scars: &ScarSet,
    thermal_set: &[usize],
    a: usize,
    b: usize,
    times: &[f64],
) -> Result<Complex64> {
    let q = times.len();
    if !(1..=4).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    for m in [a, b] {
        if !scars.is_scar(m) {
            return Err(Error::domain(format!("state {m} is not a selected scar")));
        }
    }
    let ev = Evaluator::new(spec, obs)?;
    let mask = thermal_mask(ev.dim(), scars, thermal_set)?;
    let labels: Vec<usize> = (0..q - 1).collect();
    Ok(ev.distinct_row(a, times, &labels, &mask)?[b])
}

/// `sum_{i != j in T} O_ai O_ij^3 O_jb`, the lightest crossing contraction.
/// Real because the observable matrix is real.
pub fn crossing_term(obs: &EigenObservable, thermal_set: &[usize], a: usize, b: usize) -> Result<f64> {
    let d = obs.dim();
    for m in [a, b] {
        if m >= d {
            return Err(Error::Index { index: m, len: d });
        }
    }
    let mask = mask_of(d, thermal_set)?;
    let t: Vec<usize> = (0..d).filter(|&i| mask[i]).collect();
    let o = obs.matrix();
    let n = t.len();
    let cube = DMatrix::from_fn(n, n, |r, c| o[(t[r], t[c])].powi(3));
    let x = DVector::from_iterator(n, t.iter().map(|&i| o[(a, i)]));
    let y = DVector::from_iterator(n, t.iter().map(|&j| o[(j, b)]));
    // unrestricted double sum minus the coincident i == j terms
    let all = x.dot(&(&cube * &y));
    let coincident: f64 = (0..n).map(|k| x[k] * cube[(k, k)] * y[k]).sum();
    Ok(all - coincident)
}
