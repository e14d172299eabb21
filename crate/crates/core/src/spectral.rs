//! PXP Hamiltonian in the symmetric sector, its spectrum, and the
//! magnetization observable in the energy eigenbasis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::excitations;
use crate::error::{Error, Result};
use crate::sector::SectorBasis;

/// Identifier of the uniform magnetization `(1/2N) sum_j sigma^z_j`.
pub const MAGNETIZATION_ID: &str = "sz_mean_half";

#[derive(Debug, Clone, PartialEq)]
pub struct SectorHamiltonian {
    matrix: DMatrix<f64>,
}

impl SectorHamiltonian {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Maximum absolute row sum, an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Sum of `P_{j-1} sigma^x_j P_{j+1}` restricted to the sector.
///
/// Each column is obtained by acting on the orbit representative only:
/// `<s|H|r> = sqrt(n_r / n_s) * #{j : flip_j(r) lies in orbit s}`.
pub fn build_hamiltonian(sector: &SectorBasis) -> SectorHamiltonian {
    let d = sector.dim();
    let parent = sector.parent();
    let sizes = sector.orbit_sizes();
    let mut h = DMatrix::<f64>::zeros(d, d);
    for (r, &rep) in sector.representatives().iter().enumerate() {
        for target in parent.flips(rep) {
            let s = sector
                .sector_index_of(target)
                .expect("flip of an admissible config is admissible");
            h[(s, r)] += (sizes[r] as f64 / sizes[s] as f64).sqrt();
        }
    }
    SectorHamiltonian { matrix: h }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    /// Column `m` is the eigenvector of `energies[m]`.
    vectors: DMatrix<f64>,
}

impl Spectrum {
    /// Wraps precomputed data, checking shapes and ordering only.
    pub fn from_parts(energies: Vec<f64>, vectors: DMatrix<f64>) -> Result<Self> {
        let d = energies.len();
        if vectors.nrows() != d || vectors.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: vectors.ncols(),
            });
        }
        if energies.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::domain("energies must be ascending"));
        }
        Ok(Self { energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn vector(&self, m: usize) -> Vec<f64> {
        self.vectors.column(m).iter().copied().collect()
    }

    pub fn e_min(&self) -> f64 {
        self.energies.first().copied().unwrap_or(0.0)
    }

    pub fn e_max(&self) -> f64 {
        self.energies.last().copied().unwrap_or(0.0)
    }

    /// Largest `|H v_m - E_m v_m|` over all eigenpairs.
    pub fn max_residual(&self, h: &SectorHamiltonian) -> f64 {
        let hv = h.matrix() * &self.vectors;
        (0..self.dim())
            .map(|m| (hv.column(m) - self.vectors.column(m) * self.energies[m]).norm())
            .fold(0.0, f64::max)
    }

    /// Groups of consecutive indices whose energies agree within `tol`.
    pub fn degenerate_clusters(&self, tol: f64) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for m in 1..=self.dim() {
            if m == self.dim() || self.energies[m] - self.energies[m - 1] > tol {
                out.push(start..m);
                start = m;
            }
        }
        out
    }

    /// Rotates every degenerate eigenspace so that its overlap with the
    /// basis vector `pivot` is carried by the first vector of the cluster
    /// alone; the others become orthogonal to `pivot`. Signs are then
    /// re-fixed.
    ///
    /// Without this the split of a degenerate eigenspace is whatever the
    /// eigensolver returns, which makes per-eigenstate diagnostics (and
    /// hence scar selection) arbitrary inside the PXP zero-energy manifold.
    pub fn align_degenerate(&mut self, pivot: usize, tol: f64) -> Result<()> {
        if pivot >= self.dim() {
            return Err(Error::Index {
                index: pivot,
                len: self.dim(),
            });
        }
        for cluster in self.degenerate_clusters(tol) {
            let k = cluster.len();
            if k < 2 {
                continue;
            }
            let block = self.vectors.columns(cluster.start, k).clone_owned();
            let c = DVector::from_iterator(k, block.row(pivot).iter().copied());
            let norm = c.norm();
            if norm < 1e-12 {
                continue;
            }
            // Householder reflection taking c/|c| to e_1.
            let mut w = -c / norm;
            w[0] += 1.0;
            let wn = w.norm();
            if wn < 1e-14 {
                continue;
            }
            w /= wn;
            let reflector = DMatrix::<f64>::identity(k, k) - (&w * w.transpose()) * 2.0;
            let rotated = block * reflector;
            self.vectors.columns_mut(cluster.start, k).copy_from(&rotated);
        }
        fix_signs(&mut self.vectors);
        Ok(())
    }
}

/// Makes the largest-magnitude entry of each column positive (first index
/// wins ties).
fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = i;
            }
        }
        if !col.is_empty() && col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Dense symmetric eigendecomposition with ascending energies.
pub fn diagonalize(h: &SectorHamiltonian) -> Result<Spectrum> {
    let d = h.dim();
    if d == 0 {
        return Ok(Spectrum {
            energies: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));

    let energies: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(d, d);
    for (m, &i) in order.iter().enumerate() {
        vectors.set_column(m, &eig.eigenvectors.column(i));
    }
    fix_signs(&mut vectors);

    let spectrum = Spectrum { energies, vectors };
    let bound = 1e-9 * h.norm_inf().max(f64::MIN_POSITIVE);
    let residual = spectrum.max_residual(h);
    if !(residual <= bound) {
        return Err(Error::Eigensolver { residual, bound });
    }
    Ok(spectrum)
}

/// Diagonal of `(1/2N) sum_j sigma^z_j` over the sector basis. The operator
/// is diagonal in configurations and constant on orbits.
pub fn magnetization_diagonal(sector: &SectorBasis) -> Vec<f64> {
    let n = sector.n_sites() as f64;
    sector
        .representatives()
        .iter()
        .map(|&r| (2.0 * excitations(r) as f64 - n) / (2.0 * n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenObservable {
    matrix: DMatrix<f64>,
    observable_id: String,
}

impl EigenObservable {
    pub fn new(matrix: DMatrix<f64>, observable_id: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        Ok(Self {
            matrix,
            observable_id: observable_id.into(),
        })
    }

    /// `V^T diag(values) V` for an operator diagonal in the sector basis.
    pub fn from_sector_diagonal(
        spec: &Spectrum,
        values: &[f64],
        observable_id: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: values.len(),
            });
        }
        let v = spec.vectors();
        let mut scaled = v.clone();
        for (mut row, &x) in scaled.row_iter_mut().zip(values) {
            row *= x;
        }
        let mut matrix = v.transpose() * scaled;
        // exact symmetry, so downstream reductions see O_mn == O_nm bitwise
        let d = matrix.nrows();
        for i in 0..d {
            for j in 0..i {
                let avg = 0.5 * (matrix[(i, j)] + matrix[(j, i)]);
                matrix[(i, j)] = avg;
                matrix[(j, i)] = avg;
            }
        }
        Self::new(matrix, observable_id)
    }

    /// Identity operator, handy as a degenerate test observable.
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            observable_id: "identity".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn observable_id(&self) -> &str {
        &self.observable_id
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.matrix[(m, n)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }
}

/// Magnetization `(1/2N) sum_j sigma^z_j` in the energy eigenbasis.
pub fn observable_in_eigenbasis(spec: &Spectrum, sector: &SectorBasis) -> Result<EigenObservable> {
    if spec.dim() != sector.dim() {
        return Err(Error::DimensionMismatch {
            expected: sector.dim(),
            got: spec.dim(),
        });
    }
    EigenObservable::from_sector_diagonal(spec, &magnetization_diagonal(sector), MAGNETIZATION_ID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::ConstrainedBasis;
    use std::sync::Arc;

    fn sector(n: usize) -> SectorBasis {
        SectorBasis::build(Arc::new(ConstrainedBasis::enumerate(n).unwrap()))
    }

    /// PXP in the full constrained basis, built flip by flip.
    fn full_hamiltonian(b: &ConstrainedBasis) -> DMatrix<f64> {
        let d = b.dim();
        let mut h = DMatrix::zeros(d, d);
        for (col, &c) in b.configs().iter().enumerate() {
            for site in 0..b.n_sites() {
                if b.neighbors_down(c, site).unwrap() {
                    let row = b.index_of(c ^ (1 << site)).unwrap();
                    h[(row, col)] += 1.0;
                }
            }
        }
        h
    }

    /// Columns are the lifted symmetrized basis states.
    fn isometry(s: &SectorBasis) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(s.parent().dim(), s.dim());
        for k in 0..s.dim() {
            let mut e = vec![0.0; s.dim()];
            e[k] = 1.0;
            let lifted = s.vector(e).unwrap().lift();
            b.set_column(k, &DVector::from_vec(lifted));
        }
        b
    }

    #[test]
    fn four_site_matrix_element() {
        let s = sector(4);
        let h = build_hamiltonian(&s);
        assert!((h.matrix()[(0, 1)] - 2.0).abs() < 1e-15);
        assert!((h.matrix()[(1, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matches_projected_full_hamiltonian() {
        for n in [4, 6, 8, 9] {
            let s = sector(n);
            let b = isometry(&s);
            let oracle = b.transpose() * full_hamiltonian(s.parent()) * &b;
            let h = build_hamiltonian(&s);
            assert!((h.matrix() - &oracle).amax() < 1e-12, "N={n}");
            assert!((h.matrix() - h.matrix().transpose()).amax() < 1e-12);
            assert_eq!(h.matrix().trace(), 0.0);
        }
    }

    #[test]
    fn one_by_one() {
        let h = SectorHamiltonian::from_matrix(DMatrix::zeros(1, 1)).unwrap();
        let s = diagonalize(&h).unwrap();
        assert_eq!(s.energies(), &[0.0]);
        assert_eq!(s.vectors()[(0, 0)], 1.0);
    }

    #[test]
    fn spectrum_invariants() {
        for n in [4, 8, 12] {
            let h = build_hamiltonian(&sector(n));
            let spec = diagonalize(&h).unwrap();
            let d = spec.dim();
            assert!(spec.max_residual(&h) <= 1e-9 * h.norm_inf());
            let vtv = spec.vectors().transpose() * spec.vectors();
            assert!((vtv - DMatrix::identity(d, d)).amax() < 1e-10);
            let e = spec.energies();
            for k in 0..d {
                assert!((e[k] + e[d - 1 - k]).abs() < 1e-10, "N={n}");
            }
            for col in spec.vectors().column_iter() {
                let imax = col.iamax();
                assert!(col[imax] > 0.0);
            }
        }
    }

    #[test]
    fn alignment_concentrates_pivot_weight() {
        let s = sector(12);
        let h = build_hamiltonian(&s);
        let mut spec = diagonalize(&h).unwrap();
        let neel = s.neel_index().unwrap();
        let tol = 1e-9 * h.norm_inf();
        let before: Vec<f64> = spec
            .degenerate_clusters(tol)
            .iter()
            .map(|r| r.clone().map(|m| spec.vectors()[(neel, m)].powi(2)).sum())
            .collect();
        spec.align_degenerate(neel, tol).unwrap();
        let clusters = spec.degenerate_clusters(tol);
        assert!(clusters.iter().any(|r| r.len() > 1));
        for (r, w) in clusters.iter().zip(&before) {
            let first = spec.vectors()[(neel, r.start)].powi(2);
            assert!((first - w).abs() < 1e-12);
            for m in r.clone().skip(1) {
                assert!(spec.vectors()[(neel, m)].abs() < 1e-12);
            }
        }
        assert!(spec.max_residual(&h) <= 1e-9 * h.norm_inf());
        let d = spec.dim();
        let vtv = spec.vectors().transpose() * spec.vectors();
        assert!((vtv - DMatrix::identity(d, d)).amax() < 1e-10);
    }

    #[test]
    fn observable_values_and_traces() {
        let s = sector(10);
        let diag = magnetization_diagonal(&s);
        assert_eq!(diag[0], -0.5);
        assert_eq!(diag[s.neel_index().unwrap()], 0.0);

        let spec = diagonalize(&build_hamiltonian(&s)).unwrap();
        let obs = observable_in_eigenbasis(&spec, &s).unwrap();
        let m = obs.matrix();
        assert!((m - m.transpose()).amax() < 1e-10);
        assert!(m.amax() <= 0.5 + 1e-12);
        let tr: f64 = diag.iter().sum();
        assert!((m.trace() - tr).abs() < 1e-12);
        let tr2: f64 = diag.iter().map(|x| x * x).sum();
        assert!(((m * m).trace() - tr2).abs() < 1e-10);
    }

    #[test]
    fn observable_dimension_mismatch() {
        let spec = diagonalize(&build_hamiltonian(&sector(8))).unwrap();
        assert!(observable_in_eigenbasis(&spec, &sector(10)).is_err());
    }
}
