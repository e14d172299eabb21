//! Haar-random unitaries and Monte-Carlo checks of the first and second
//! Weingarten moments, including the typicality scaling of thermal
//! insertions between fixed states.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type CMat = DMatrix<Complex64>;

/// Samples per RNG substream. Fixed so results do not depend on the
/// number of worker threads.
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct HaarSampler {
    d: usize,
    seed: u64,
    /// Optional fixed unitary multiplied onto every sample from the left.
    left: Option<CMat>,
}

impl HaarSampler {
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::domain(format!("Haar dimension {d} must be at least 2")));
        }
        Ok(Self { d, seed, left: None })
    }

    /// Sampler producing `w * U` instead of `U`.
    pub fn with_left_factor(mut self, w: CMat) -> Result<Self> {
        if w.shape() != (self.d, self.d) {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.nrows(),
            });
        }
        self.left = Some(w);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn stream(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk);
        rng
    }

    /// Sample `k` of the sequence defined by the seed.
    pub fn sample_at(&self, k: usize) -> CMat {
        let mut rng = self.stream((k / CHUNK) as u64);
        let mut u = sample_haar(self.d, &mut rng);
        for _ in 0..k % CHUNK {
            u = sample_haar(self.d, &mut rng);
        }
        self.apply_left(u)
    }

    fn apply_left(&self, u: CMat) -> CMat {
        match &self.left {
            Some(w) => w * u,
            None => u,
        }
    }

    /// Mean and standard error of each component of `f(U)` over
    /// `n_samples` draws. Chunks run in parallel and are combined in order.
    pub fn monte_carlo<F>(&self, n_samples: usize, f: F) -> Result<Vec<Estimate>>
    where
        F: Fn(&CMat) -> Vec<Complex64> + Sync,
    {
        if n_samples == 0 {
            return Err(Error::domain("need at least one sample"));
        }
        let chunks = n_samples.div_ceil(CHUNK);
        let partial: Vec<Vec<Accumulator>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = self.stream(c as u64);
                let count = CHUNK.min(n_samples - c * CHUNK);
                let mut acc: Vec<Accumulator> = Vec::new();
                for _ in 0..count {
                    let u = self.apply_left(sample_haar(self.d, &mut rng));
                    let values = f(&u);
                    if acc.is_empty() {
                        acc = vec![Accumulator::default(); values.len()];
                    }
                    for (a, v) in acc.iter_mut().zip(values) {
                        a.push(v);
                    }
                }
                acc
            })
            .collect();
        let mut total = partial[0].clone();
        for chunk in &partial[1..] {
            for (t, a) in total.iter_mut().zip(chunk) {
                t.merge(a);
            }
        }
        Ok(total.iter().map(Accumulator::finish).collect())
    }
}

/// Haar unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phases of R's diagonal moved into Q.
pub fn sample_haar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    n: usize,
    sum: Complex64,
    sum_sq: f64,
}

impl Accumulator {
    fn push(&mut self, v: Complex64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v.norm_sqr();
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    fn finish(&self) -> Estimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: Complex64,
    /// Standard error of the complex mean, `sqrt(E|x - mean|^2 / n)`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub label: String,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub prediction_re: f64,
    pub prediction_im: f64,
    pub std_error: f64,
    /// Deviation from the prediction in units of the standard error.
    pub sigmas: f64,
}

impl MomentEntry {
    fn new(label: impl Into<String>, est: Estimate, prediction: Complex64) -> Self {
        let dev = (est.mean - prediction).norm();
        // estimates that are exact per sample only carry rounding spread
        let sigmas = if dev <= 1e-12 * (1.0 + prediction.norm()) {
            0.0
        } else if est.std_error > 0.0 {
            dev / est.std_error
        } else {
            f64::INFINITY
        };
        Self {
            label: label.into(),
            estimate_re: est.mean.re,
            estimate_im: est.mean.im,
            prediction_re: prediction.re,
            prediction_im: prediction.im,
            std_error: est.std_error,
            sigmas,
        }
    }

    pub fn estimate(&self) -> Complex64 {
        Complex64::new(self.estimate_re, self.estimate_im)
    }

    pub fn prediction(&self) -> Complex64 {
        Complex64::new(self.prediction_re, self.prediction_im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheckReport {
    pub d: usize,
    pub n_samples: usize,
    pub entries: Vec<MomentEntry>,
}

impl MomentCheckReport {
    pub fn max_sigmas(&self) -> f64 {
        self.entries.iter().map(|e| e.sigmas).fold(0.0, f64::max)
    }

    pub fn passes(&self, sigma_gate: f64) -> bool {
        self.entries.iter().all(|e| e.sigmas <= sigma_gate)
    }
}

/// Checks `E[U X U^dag] = (Tr X / d) I` entry by entry.
pub fn check_first_moment(sampler: &HaarSampler, n_samples: usize, x: &CMat) -> Result<MomentCheckReport> {
    let d = sampler.dim();
    if x.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.nrows(),
        });
    }
    let est = sampler.monte_carlo(n_samples, |u| {
        let m = u * x * u.adjoint();
        m.iter().copied().collect()
    })?;
    let mean_trace = x.trace() / d as f64;
    // column-major, matching the sample layout
    let entries = est
        .into_iter()
        .enumerate()
        .map(|(k, e)| {
            let (r, c) = (k % d, k / d);
            let pred = if r == c { mean_trace } else { Complex64::new(0.0, 0.0) };
            MomentEntry::new(format!("E[UXU^dag]_{r}{c}"), e, pred)
        })
        .collect();
    Ok(MomentCheckReport { d, n_samples, entries })
}

/// Second-moment Weingarten matrix over the permutations {identity, swap},
/// in exact rationals.
pub fn weingarten_matrix(d: i64) -> Result<[[Rational64; 2]; 2]> {
    if d < 2 {
        return Err(Error::domain(format!("Haar dimension {d} must be at least 2")));
    }
    let den = Rational64::from_integer(d * d - 1);
    let diag = Rational64::from_integer(1) / den;
    let off = -Rational64::new(1, d) / den;
    Ok([[diag, off], [off, diag]])
}

/// Gram matrix `Tr(sigma^-1 tau)` of the permutation operators on two
/// copies of a d-dimensional space.
pub fn gram_matrix(d: i64) -> [[Rational64; 2]; 2] {
    let d2 = Rational64::from_integer(d * d);
    let d1 = Rational64::from_integer(d);
    [[d2, d1], [d1, d2]]
}

/// True when the Weingarten matrix inverts the Gram matrix exactly.
pub fn weingarten_inverts_gram(d: i64) -> Result<bool> {
    let c = weingarten_matrix(d)?;
    let q = gram_matrix(d);
    let one = Rational64::from_integer(1);
    let zero = Rational64::from_integer(0);
    Ok((0..2).all(|i| {
        (0..2).all(|j| {
            let v = q[i][0] * c[0][j] + q[i][1] * c[1][j];
            v == if i == j { one } else { zero }
        })
    }))
}

/// A second-moment entry `E[U_{i1 j1} U_{i2 j2} conj(U_{k1 l1}) conj(U_{k2 l2})]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexQuad {
    pub i: [usize; 2],
    pub j: [usize; 2],
    pub k: [usize; 2],
    pub l: [usize; 2],
}

impl IndexQuad {
    pub fn label(&self) -> String {
        format!(
            "U{}{} U{}{} U*{}{} U*{}{}",
            self.i[0] + 1,
            self.j[0] + 1,
            self.i[1] + 1,
            self.j[1] + 1,
            self.k[0] + 1,
            self.l[0] + 1,
            self.k[1] + 1,
            self.l[1] + 1
        )
    }

    /// Weingarten sum over pairs of permutations in {identity, swap}.
    pub fn prediction(&self, d: i64) -> Result<Rational64> {
        let c = weingarten_matrix(d)?;
        let perms = [[0usize, 1], [1, 0]];
        let mut total = Rational64::from_integer(0);
        for (s, ps) in perms.iter().enumerate() {
            for (t, pt) in perms.iter().enumerate() {
                let rows = (0..2).all(|x| self.i[x] == self.k[ps[x]]);
                let cols = (0..2).all(|x| self.j[x] == self.l[pt[x]]);
                if rows && cols {
                    total += c[s][t];
                }
            }
        }
        Ok(total)
    }

    fn evaluate(&self, u: &CMat) -> Complex64 {
        u[(self.i[0], self.j[0])]
            * u[(self.i[1], self.j[1])]
            * u[(self.k[0], self.l[0])].conj()
            * u[(self.k[1], self.l[1])].conj()
    }
}

/// Fixed battery of second-moment entries covering every delta pattern.
pub fn second_moment_battery() -> Vec<IndexQuad> {
    let q = |i, j, k, l| IndexQuad { i, j, k, l };
    vec![
        // |U_11|^4
        q([0, 0], [0, 0], [0, 0], [0, 0]),
        // |U_11|^2 |U_22|^2
        q([0, 1], [0, 1], [0, 1], [0, 1]),
        // |U_11|^2 |U_12|^2
        q([0, 0], [0, 1], [0, 0], [0, 1]),
        // |U_11|^2 |U_21|^2
        q([0, 1], [0, 0], [0, 1], [0, 0]),
        // U_11 U_22 conj(U_12 U_21)
        q([0, 1], [0, 1], [0, 1], [1, 0]),
        // unbalanced indices vanish
        q([0, 0], [0, 1], [0, 0], [0, 0]),
        q([0, 1], [0, 1], [0, 0], [0, 1]),
    ]
}

pub fn check_second_moment(sampler: &HaarSampler, n_samples: usize) -> Result<MomentCheckReport> {
    let d = sampler.dim();
    if !weingarten_inverts_gram(d as i64)? {
        return Err(Error::domain("Weingarten matrix does not invert the Gram matrix"));
    }
    let battery = second_moment_battery();
    let est = sampler.monte_carlo(n_samples, |u| battery.iter().map(|q| q.evaluate(u)).collect())?;
    let entries = battery
        .iter()
        .zip(est)
        .map(|(q, e)| {
            let p = q.prediction(d as i64)?;
            let p = *p.numer() as f64 / *p.denom() as f64;
            Ok(MomentEntry::new(q.label(), e, Complex64::new(p, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentCheckReport { d, n_samples, entries })
}

fn bra_ket(a: &[Complex64], m: &CMat, b: &[Complex64]) -> Complex64 {
    let d = a.len();
    (0..d)
        .map(|r| a[r].conj() * (0..d).map(|c| m[(r, c)] * b[c]).sum::<Complex64>())
        .sum()
}

/// Typicality of thermal insertions realized as Haar-rotated basis vectors
/// `|i> = U e_1`, `|j> = U e_2`:
///
/// * `q = 1`: `E[<a|O|i><i|O|b>] = <a|O^2|b> / d`
/// * `q = 2`: `E[<a|O|i><i|O|j><j|O|b>] = (<a|O^3|b> - <a|O^2|b> Tr O / d) / (d^2 - 1)`
pub fn check_typicality_scaling(
    sampler: &HaarSampler,
    n_samples: usize,
    o: &CMat,
    a: &[Complex64],
    b: &[Complex64],
    q: usize,
) -> Result<MomentCheckReport> {
    let d = sampler.dim();
    if o.shape() != (d, d) || a.len() != d || b.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if a.len() != d { a.len() } else if b.len() != d { b.len() } else { o.nrows() },
        });
    }
    let o2 = o * o;
    let (label, prediction) = match q {
        1 => ("<a|O|i><i|O|b>", bra_ket(a, &o2, b) / d as f64),
        2 => {
            let o3 = &o2 * o;
            let dd = d as f64;
            (
                "<a|O|i><i|O|j><j|O|b>",
                (bra_ket(a, &o3, b) - bra_ket(a, &o2, b) * o.trace() / dd) / (dd * dd - 1.0),
            )
        }
        _ => return Err(Error::UnsupportedOrder(q)),
    };
    // <a|O U e_k> is component k of (U^dag O^dag a)^dag; O is Hermitian
    let oa = o.adjoint() * nalgebra::DVector::from_column_slice(a);
    let ob = o * nalgebra::DVector::from_column_slice(b);
    let est = sampler.monte_carlo(n_samples, |u| {
        let left = u.adjoint() * &oa; // conj(<a|O|i>) per column i
        let right = u.adjoint() * &ob; // <i|O|b>
        let v = match q {
            1 => left[0].conj() * right[0],
            _ => {
                let (ui, uj) = (u.column(0), u.column(1));
                let oij = ui.dotc(&(o * uj));
                left[0].conj() * oij * right[1]
            }
        };
        vec![v]
    })?;
    Ok(MomentCheckReport {
        d,
        n_samples,
        entries: vec![MomentEntry::new(label, est[0], prediction)],
    })
}

/// Random Hermitian matrix with Gaussian entries, for test observables.
pub fn random_hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let g = CMat::from_fn(d, d, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    (&g + g.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

/// Reproducible matrices and vectors for the typicality checks.
pub fn test_inputs(d: usize, seed: u64) -> (CMat, Vec<Complex64>, Vec<Complex64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let o = random_hermitian(d, &mut rng);
    let a = random_unit_vector(d, &mut rng);
    let b = random_unit_vector(d, &mut rng);
    (o, a, b)
}
