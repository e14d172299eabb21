//! Non-crossing decomposition of scar correlators into scar and thermal
//! free cumulants.
//!
//! Each non-crossing partition of the operators becomes one term. Its outer
//! blocks form a chain of scar free cumulants joined by sums over scar
//! states; blocks nested inside an outer block are thermal loops. In the
//! factorized form the loops are replaced by thermal free cumulants at the
//! pair's inverse temperature. In the unfactorized form every term keeps
//! its exact index-coincidence sum, and the terms add up to the exact
//! correlator with no approximation.

use std::io::{self, Write};

use num_complex::Complex64;

use super::ensemble::{Ensemble, ScarPair};
use super::free::thermal_mask;
use super::kernels::Evaluator;
use super::partitions::{diagrams, Diagram, Gap, Segment};
use super::CumulantSeries;
use crate::error::{Error, Result};
use crate::scars::ScarSet;
use crate::spectral::{EigenObservable, Spectrum};
use crate::table::{fmt_float, write_row};

#[derive(Debug, Clone)]
pub struct DecompositionReport {
    pub q: usize,
    pub pair: ScarPair,
    pub pattern: Vec<f64>,
    pub factorized: bool,
    pub terms: Vec<CumulantSeries>,
    pub sum: CumulantSeries,
    pub exact: CumulantSeries,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

struct Context<'a> {
    ev: Evaluator<'a>,
    scars: &'a [usize],
    mask: Vec<bool>,
    /// Weights of the thermal loops, renormalized over the thermal set.
    weights: Vec<f64>,
    thermal: Vec<usize>,
}

impl Context<'_> {
    fn loop_factor(&self, block: &[usize], tv: &[f64], q: usize) -> Result<Complex64> {
        match block.len() {
            1 => Ok(Complex64::new(
                self.thermal
                    .iter()
                    .map(|&i| self.weights[i] * self.ev.diag()[i])
                    .sum(),
                0.0,
            )),
            2 => Ok(self
                .ev
                .distinct_loop(&self.mask, &self.weights, tv[block[0]] - tv[block[1]])),
            _ => Err(Error::UnsupportedOrder(q)),
        }
    }

    /// Row over final states for one segment starting at state `x`.
    fn segment_row(
        &self,
        diagram: &Diagram,
        seg: &Segment,
        x: usize,
        tv: &[f64],
        factorized: bool,
    ) -> Result<Vec<Complex64>> {
        if factorized {
            let times: Vec<f64> = seg.outer.iter().map(|&k| tv[k]).collect();
            let labels: Vec<usize> = (0..times.len() - 1).collect();
            let mut row = self.ev.distinct_row(x, &times, &labels, &self.mask)?;
            let mut loops = Complex64::new(1.0, 0.0);
            for block in &seg.nested {
                loops *= self.loop_factor(block, tv, diagram.q)?;
            }
            row.iter_mut().for_each(|v| *v *= loops);
            Ok(row)
        } else {
            let times = &tv[seg.ops.clone()];
            let labels = (seg.ops.start + 1..seg.ops.end)
                .map(|g| match diagram.gaps[g - 1] {
                    Gap::Thermal(l) => Ok(l),
                    Gap::Scar => Err(Error::domain("scar insertion inside a segment")),
                })
                .collect::<Result<Vec<_>>>()?;
            self.ev.distinct_row(x, times, &labels, &self.mask)
        }
    }

    fn term(&self, diagram: &Diagram, a: usize, b: usize, tv: &[f64], factorized: bool) -> Result<Complex64> {
        let segs = &diagram.segments;
        let first = self.segment_row(diagram, &segs[0], a, tv, factorized)?;
        if segs.len() == 1 {
            return Ok(first[b]);
        }
        let mut w: Vec<Complex64> = self.scars.iter().map(|&c| first[c]).collect();
        for (k, seg) in segs.iter().enumerate().skip(1) {
            let last = k == segs.len() - 1;
            let targets: Vec<usize> = if last { vec![b] } else { self.scars.to_vec() };
            let mut next = vec![Complex64::new(0.0, 0.0); targets.len()];
            for (ci, &c) in self.scars.iter().enumerate() {
                let row = self.segment_row(diagram, seg, c, tv, factorized)?;
                for (ti, &y) in targets.iter().enumerate() {
                    next[ti] += w[ci] * row[y];
                }
            }
            w = next;
        }
        Ok(w[0])
    }
}

/// Decomposes `<a| O(c_1 t) ... O(c_q t) |b>` over a time grid, with
/// `pattern = (c_1, ..., c_q)` and `q` in 2..=4. The thermal states are
/// all non-scar eigenstates.
pub fn decompose_scar_correlator(
    spec: &Spectrum,
    obs: &EigenObservable,
    scars: &ScarSet,
    pair: &ScarPair,
    grid: &[f64],
    pattern: &[f64],
    factorized: bool,
) -> Result<DecompositionReport> {
    let q = pattern.len();
    if !(2..=4).contains(&q) {
        return Err(Error::UnsupportedOrder(q));
    }
    if scars.dim() != spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: scars.dim(),
        });
    }
    for m in [pair.a, pair.b] {
        if !scars.is_scar(m) {
            return Err(Error::domain(format!("state {m} is not a selected scar")));
        }
    }
    let thermal = scars.non_scar_indices();
    if thermal.is_empty() {
        return Err(Error::domain("no thermal states left after removing scars"));
    }
    let ev = Evaluator::new(spec, obs)?;
    let mask = thermal_mask(ev.dim(), scars, &thermal)?;
    let weights = Ensemble::canonical(spec, pair.beta_ab).restricted_weights(&thermal)?;
    let ctx = Context {
        ev,
        scars: &scars.scar_indices,
        mask,
        weights,
        thermal,
    };

    let all = diagrams(q)?;
    let mut terms = Vec::with_capacity(all.len());
    for d in &all {
        let label = if q == 3 { d.conventional_label() } else { d.label() };
        terms.push(CumulantSeries::evaluate(label, grid, pattern, |tv| {
            ctx.term(d, pair.a, pair.b, tv, factorized)
        })?);
    }

    let exact = CumulantSeries::evaluate("exact", grid, pattern, |tv| {
        super::free::scar_correlator(spec, obs, pair.a, pair.b, tv)
    })?;
    let sum_values: Vec<Complex64> = (0..grid.len())
        .map(|k| terms.iter().map(|s| s.values[k]).sum())
        .collect();
    let sum = CumulantSeries {
        label: "sum".into(),
        times: grid.to_vec(),
        values: sum_values,
    };
    let max_abs_error = sum
        .values
        .iter()
        .zip(&exact.values)
        .map(|(s, e)| (s - e).norm())
        .fold(0.0, f64::max);
    let scale = exact.max_abs();
    Ok(DecompositionReport {
        q,
        pair: *pair,
        pattern: pattern.to_vec(),
        factorized,
        terms,
        sum,
        exact,
        max_abs_error,
        max_rel_error: max_abs_error / scale,
    })
}

impl DecompositionReport {
    pub fn term(&self, label: &str) -> Option<&CumulantSeries> {
        self.terms.iter().find(|s| s.label == label)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_reports_csv(w, &[("", self)])
    }
}

/// Side-by-side CSV of several reports sharing one grid. Column names are
/// prefixed per report; the time column comes first.
pub fn write_reports_csv<W: Write>(w: &mut W, reports: &[(&str, &DecompositionReport)]) -> io::Result<()> {
    let Some((_, first)) = reports.first() else {
        return Ok(());
    };
    let mut header = vec!["t[1/J]".to_string()];
    for (prefix, r) in reports {
        for s in r.terms.iter().chain([&r.sum, &r.exact]) {
            header.push(format!("{prefix}re_{}", s.label));
            header.push(format!("{prefix}im_{}", s.label));
        }
        header.push(format!("{prefix}abs_error"));
    }
    write_row(w, &header)?;
    for (k, &t) in first.sum.times.iter().enumerate() {
        let mut row = vec![fmt_float(t)];
        for (_, r) in reports {
            for s in r.terms.iter().chain([&r.sum, &r.exact]) {
                row.push(fmt_float(s.values[k].re));
                row.push(fmt_float(s.values[k].im));
            }
            row.push(fmt_float((r.sum.values[k] - r.exact.values[k]).norm()));
        }
        write_row(w, &row)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cumulants::uniform_grid;
    use crate::scars::{select_scars, SelectionMethod};
    use crate::test_support::{small_system, System};

    fn setup(n: usize, count: usize) -> (System, ScarSet) {
        let sys = small_system(n);
        let scars = select_scars(&sys.spec, &sys.sector, SelectionMethod::NeelOverlap, count, 0.6).unwrap();
        (sys, scars)
    }

    #[test]
    fn unfactorized_terms_sum_to_exact() {
        let (sys, scars) = setup(10, 3);
        let a = scars.central_scar().unwrap();
        let b = scars.adjacent_scar(a).unwrap();
        let grid = uniform_grid(10.0, 21).unwrap();
        for pattern in [vec![1.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.3, 1.0, -0.5], vec![1.0, 0.0, 1.0, 0.0], vec![0.2, -1.0, 0.7, 1.3]] {
            for (x, y) in [(a, a), (a, b)] {
                let pair = ScarPair::new(&sys.spec, &scars, x, y, 10).unwrap();
                let r = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &pattern, false).unwrap();
                assert!(r.max_abs_error < 1e-10, "pattern {pattern:?}: {}", r.max_abs_error);
            }
        }
    }

    #[test]
    fn two_point_factorized_is_exact() {
        let (sys, scars) = setup(10, 3);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spec, &scars, a, a, 10).unwrap();
        let grid = uniform_grid(20.0, 41).unwrap();
        let r = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &[1.0, 0.0], true).unwrap();
        assert_eq!(r.terms.len(), 2);
        assert!(r.max_abs_error < 1e-10);
    }

    #[test]
    fn three_point_term_names_and_prefactor_variant() {
        let (sys, scars) = setup(10, 3);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spec, &scars, a, a, 10).unwrap();
        let grid = uniform_grid(5.0, 6).unwrap();
        let pattern = [0.0, 1.0, 0.0];
        let f = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &pattern, true).unwrap();
        let labels: Vec<&str> = f.terms.iter().map(|s| s.label.as_str()).collect();
        for l in ["k_sc_3", "term_a4", "term_3c", "term_3pc", "term_4cd"] {
            assert!(labels.contains(&l), "{l}");
        }
        let u = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &pattern, false).unwrap();
        // only the a4 term is approximated
        for (x, y) in f.terms.iter().zip(&u.terms) {
            if x.label != "term_a4" {
                for (p, q) in x.values.iter().zip(&y.values) {
                    assert!((p - q).norm() < 1e-12, "{}", x.label);
                }
            }
        }
        // unfactorized a4 is sum_i O_ai O_ii O_ib over non-scars
        let t = scars.non_scar_indices();
        let direct: f64 = t.iter().map(|&i| sys.obs.get(a, i) * sys.obs.get(i, i) * sys.obs.get(i, a)).sum();
        let a4 = u.term("term_a4").unwrap();
        assert!(a4.values.iter().all(|v| (v - direct).norm() < 1e-12));
    }

    #[test]
    fn palindromic_diagonal_correlator_is_real() {
        let (sys, scars) = setup(12, 4);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spec, &scars, a, a, 12).unwrap();
        let grid = uniform_grid(40.0, 81).unwrap();
        let r = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &[0.0, 1.0, 0.0], true).unwrap();
        assert!(r.exact.values.iter().all(|v| v.im.abs() < 1e-10));
    }

    #[test]
    fn errors() {
        let (sys, scars) = setup(10, 3);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spec, &scars, a, a, 10).unwrap();
        let grid = [0.0];
        for p in [vec![0.0], vec![0.0; 5]] {
            assert!(matches!(
                decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &p, true),
                Err(Error::UnsupportedOrder(_))
            ));
        }
    }

    #[test]
    fn csv_layout() {
        let (sys, scars) = setup(10, 3);
        let a = scars.central_scar().unwrap();
        let pair = ScarPair::new(&sys.spec, &scars, a, a, 10).unwrap();
        let grid = uniform_grid(1.0, 3).unwrap();
        let r = decompose_scar_correlator(&sys.spec, &sys.obs, &scars, &pair, &grid, &[0.0, 1.0, 0.0], true).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 1 + 2 * (5 + 2) + 1);
        assert!(header.starts_with("t[1/J],re_k_sc_3,im_k_sc_3"));
        assert!(header.ends_with("re_exact,im_exact,abs_error"));
        assert_eq!(text.lines().count(), 4);
    }
}
