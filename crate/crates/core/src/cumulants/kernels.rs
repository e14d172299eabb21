//! Index sums over products of Heisenberg-picture matrix elements
//! `O(t)_mn = O_mn e^{i(E_m - E_n) t}`.
//!
//! Everything is phrased as row-vector propagation: starting from row `x`
//! of `O(t_1)`, each further operator is one real matrix-vector product per
//! real and imaginary part. Sums with all-distinct indices are recovered
//! from unrestricted ones by Möbius inversion over index coincidences.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::partitions::{mobius_coefficient, set_partitions};
use crate::error::{Error, Result};
use crate::spectral::{EigenObservable, Spectrum};

pub struct Evaluator<'a> {
    o: &'a DMatrix<f64>,
    energies: &'a [f64],
    diag: Vec<f64>,
    squared: DMatrix<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a Spectrum, obs: &'a EigenObservable) -> Result<Self> {
        if spec.dim() != obs.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: obs.dim(),
            });
        }
        let o = obs.matrix();
        Ok(Self {
            o,
            energies: spec.energies(),
            diag: obs.diagonal(),
            squared: o.component_mul(o),
        })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        self.energies
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        self.o
    }

    /// `e^{i E_m t}` for every state.
    pub fn phases(&self, t: f64) -> Vec<Complex64> {
        self.energies
            .iter()
            .map(|&e| Complex64::from_polar(1.0, e * t))
            .collect()
    }

    pub fn check_index(&self, m: usize) -> Result<()> {
        if m >= self.dim() {
            return Err(Error::Index {
                index: m,
                len: self.dim(),
            });
        }
        Ok(())
    }

    /// Row `x` of `O(t)`.
    pub fn row(&self, x: usize, t: f64) -> Vec<Complex64> {
        let px = Complex64::from_polar(1.0, self.energies[x] * t);
        self.o
            .row(x)
            .iter()
            .zip(self.energies)
            .map(|(&v, &e)| px * v * Complex64::from_polar(1.0, -e * t))
            .collect()
    }

    /// `(r O(t))_n = sum_m r_m e^{i E_m t} O_mn e^{-i E_n t}`.
    pub fn step(&self, r: &[Complex64], t: f64) -> Vec<Complex64> {
        self.step_with(self.o, r, t)
    }

    fn step_with(&self, m: &DMatrix<f64>, r: &[Complex64], t: f64) -> Vec<Complex64> {
        let d = self.dim();
        let p = self.phases(t);
        let (mut re, mut im) = (DVector::zeros(d), DVector::zeros(d));
        for k in 0..d {
            let u = p[k] * r[k];
            re[k] = u.re;
            im[k] = u.im;
        }
        let mut out_re = DVector::zeros(d);
        let mut out_im = DVector::zeros(d);
        out_re.gemv_tr(1.0, m, &re, 0.0);
        out_im.gemv_tr(1.0, m, &im, 0.0);
        (0..d)
            .map(|k| p[k].conj() * Complex64::new(out_re[k], out_im[k]))
            .collect()
    }

    /// `h_i = sum_{j in mask} O_ij^2 w_j e^{i (E_i - E_j) tau}`.
    fn loop_weights(&self, mask: &[bool], w: &[f64], tau: f64) -> Vec<Complex64> {
        let r: Vec<Complex64> = (0..self.dim())
            .map(|j| if mask[j] { Complex64::new(w[j], 0.0) } else { Complex64::new(0.0, 0.0) })
            .collect();
        // step_with computes sum_j r_j e^{iE_j t} S_ji e^{-iE_i t}; use t = -tau
        self.step_with(&self.squared, &r, -tau)
    }

    /// Unrestricted sum over the inserted indices, returned as a function of
    /// the final index `y`:
    ///
    /// `sum O(t_1)_{x l_1} O(t_2)_{l_1 l_2} ... O(t_k)_{l_{k-1} y}`
    ///
    /// where equal labels force equal indices and every labelled index runs
    /// over `mask`. Supported label shapes, after merging runs of equal
    /// adjacent labels, are chains of distinct labels and `A B A`.
    pub fn pattern_row(
        &self,
        x: usize,
        times: &[f64],
        labels: &[usize],
        mask: &[bool],
    ) -> Result<Vec<Complex64>> {
        if times.len() != labels.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: labels.len() + 1,
                got: times.len(),
            });
        }
        self.check_index(x)?;
        if labels.is_empty() {
            return Ok(self.row(x, times[0]));
        }

        // visits: (label, diagonal power, time of the operator leaving it)
        let mut visits: Vec<(usize, i32)> = Vec::new();
        let mut leave_times: Vec<f64> = Vec::new();
        for (k, &l) in labels.iter().enumerate() {
            match visits.last_mut() {
                Some((prev, power)) if *prev == l => *power += 1,
                _ => {
                    visits.push((l, 0));
                    leave_times.push(times[k]);
                }
            }
        }
        // leave_times[v] is the operator entering visit v; the final one exits
        let enter = leave_times;
        let exit_time = times[times.len() - 1];

        let d = self.dim();
        let apply_visit = |r: &mut Vec<Complex64>, power: i32| {
            for m in 0..d {
                if mask[m] {
                    if power > 0 {
                        r[m] *= self.diag[m].powi(power);
                    }
                } else {
                    r[m] = Complex64::new(0.0, 0.0);
                }
            }
        };

        let distinct = {
            let mut ls: Vec<usize> = visits.iter().map(|v| v.0).collect();
            ls.sort_unstable();
            ls.dedup();
            ls.len() == visits.len()
        };
        if distinct {
            let mut r = self.row(x, enter[0]);
            apply_visit(&mut r, visits[0].1);
            for v in 1..visits.len() {
                r = self.step(&r, enter[v]);
                apply_visit(&mut r, visits[v].1);
            }
            return Ok(self.step(&r, exit_time));
        }

        if visits.len() == 3 && visits[0].0 == visits[2].0 {
            let inner_w: Vec<f64> = self.diag.iter().map(|x| x.powi(visits[1].1)).collect();
            let h = self.loop_weights(mask, &inner_w, enter[1] - enter[2]);
            let mut r = self.row(x, enter[0]);
            apply_visit(&mut r, visits[0].1 + visits[2].1);
            for m in 0..d {
                r[m] *= h[m];
            }
            return Ok(self.step(&r, exit_time));
        }

        Err(Error::UnsupportedOrder(times.len()))
    }

    /// Same as [`pattern_row`](Self::pattern_row) but with distinct labels
    /// forced onto distinct indices.
    pub fn distinct_row(
        &self,
        x: usize,
        times: &[f64],
        labels: &[usize],
        mask: &[bool],
    ) -> Result<Vec<Complex64>> {
        let mut names: Vec<usize> = Vec::new();
        for &l in labels {
            if !names.contains(&l) {
                names.push(l);
            }
        }
        let d = self.dim();
        let mut acc = vec![Complex64::new(0.0, 0.0); d];
        for coarse in set_partitions(names.len()) {
            let sizes: Vec<usize> = coarse.iter().map(Vec::len).collect();
            let mu = mobius_coefficient(&sizes) as f64;
            let merged: Vec<usize> = labels
                .iter()
                .map(|l| {
                    let pos = names.iter().position(|n| n == l).unwrap() + 1;
                    coarse.iter().position(|b| b.contains(&pos)).unwrap()
                })
                .collect();
            let term = self.pattern_row(x, times, &merged, mask)?;
            for (a, t) in acc.iter_mut().zip(term) {
                *a += mu * t;
            }
        }
        Ok(acc)
    }

    /// `sum_{i != j in mask} w_i O_ij^2 e^{i (E_i - E_j) tau}`.
    pub fn distinct_loop(&self, mask: &[bool], w: &[f64], tau: f64) -> Complex64 {
        let ones = vec![1.0; self.dim()];
        let h = self.loop_weights(mask, &ones, tau);
        (0..self.dim())
            .filter(|&i| mask[i])
            .map(|i| w[i] * (h[i] - self.diag[i] * self.diag[i]))
            .sum()
    }
}

/// Membership mask for a list of indices.
pub fn mask_of(dim: usize, indices: &[usize]) -> Result<Vec<bool>> {
    let mut mask = vec![false; dim];
    for &m in indices {
        if m >= dim {
            return Err(Error::Index { index: m, len: dim });
        }
        mask[m] = true;
    }
    Ok(mask)
}
