//! Dense and sparse linear-algebra helpers shared by the physics modules.
//!
//! Dense work goes through `faer`; the sparse kernel below only exists to
//! apply `exp(-i h H)` to a block of vectors during time propagation.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

pub use faer::c64;

/// Relative Frobenius tolerance for Hermiticity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex Hermitian matrix in the sector basis.
#[derive(Clone, Debug)]
pub struct HermitianOperator {
    matrix: Mat<c64>,
    diagonal: bool,
}

impl HermitianOperator {
    /// Wraps `matrix`, rejecting it unless it is square and Hermitian to
    /// [`HERMITIAN_TOL`].
    pub fn new(matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::domain(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let dev = hermiticity_deviation(matrix.as_ref());
        if dev > HERMITIAN_TOL {
            return Err(Error::domain(format!(
                "operator is not Hermitian (relative deviation {dev:e})"
            )));
        }
        let diagonal = is_diagonal(matrix.as_ref());
        Ok(Self { matrix, diagonal })
    }

    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut matrix = Mat::<c64>::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            matrix[(i, i)] = c64::new(v, 0.0);
        }
        Self {
            matrix,
            diagonal: true,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> MatRef<'_, c64> {
        self.matrix.as_ref()
    }

    pub fn into_matrix(self) -> Mat<c64> {
        self.matrix
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Real parts of the diagonal entries.
    pub fn diagonal_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.matrix[(i, i)].re).collect()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        hermiticity_deviation(self.matrix.as_ref())
    }

    /// Frobenius norm of `[self, other]`.
    pub fn commutator_norm(&self, other: &HermitianOperator) -> f64 {
        let ab = &self.matrix * &other.matrix;
        let ba = &other.matrix * &self.matrix;
        (&ab - &ba).norm_l2()
    }
}

/// `||A - A^dagger||_F / max(1, ||A||_F)`.
pub fn hermiticity_deviation(a: MatRef<'_, c64>) -> f64 {
    let diff = a - a.adjoint();
    diff.norm_l2() / a.norm_l2().max(1.0)
}

fn is_diagonal(a: MatRef<'_, c64>) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j && a[(i, j)] != c64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

fn is_real(a: MatRef<'_, c64>) -> bool {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if a[(i, j)].im != 0.0 {
                return false;
            }
        }
    }
    true
}

fn real_part(a: MatRef<'_, c64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re)
}

pub(crate) fn complexify(a: MatRef<'_, f64>) -> Mat<c64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| c64::new(a[(i, j)], 0.0))
}

/// Full eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Real symmetric input takes the (much cheaper) real solver path.
pub fn eigh(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    if is_real(a) {
        let re = real_part(a);
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::numerical(format!("eigensolver failed: {e:?}")))?;
        let values = evd.S().column_vector().iter().copied().collect();
        Ok((values, complexify(evd.U())))
    } else {
        let evd = a
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::numerical(format!("eigensolver failed: {e:?}")))?;
        let values = evd.S().column_vector().iter().map(|z| z.re).collect();
        Ok((values, evd.U().to_owned()))
    }
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    let res = if is_real(a) {
        real_part(a).self_adjoint_eigenvalues(Side::Lower)
    } else {
        a.self_adjoint_eigenvalues(Side::Lower)
    };
    res.map_err(|e| Error::numerical(format!("eigensolver failed: {e:?}")))
}

/// Singular values of a (small) complex block, descending.
pub fn singular_values(a: MatRef<'_, c64>) -> Result<Vec<f64>> {
    if a.nrows() == 1 && a.ncols() == 1 {
        return Ok(vec![a[(0, 0)].norm()]);
    }
    a.singular_values()
        .map_err(|e| Error::numerical(format!("SVD failed: {e:?}")))
}

/// `V diag(w) V^dagger` for columns of `vectors`.
pub fn weighted_projector_sum(weights: &[f64], vectors: MatRef<'_, c64>) -> Mat<c64> {
    let scaled = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * weights[j]
    });
    let mut out = &scaled * vectors.adjoint();
    hermitize(&mut out);
    out
}

/// Replaces `a` by `(a + a^dagger) / 2`.
pub fn hermitize(a: &mut Mat<c64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..=j {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

/// `exp(-i h A)` for Hermitian `A`, via its spectral decomposition.
pub fn expm_hermitian(a: MatRef<'_, c64>, h: f64) -> Result<Mat<c64>> {
    let (values, vectors) = eigh(a)?;
    let phased = Mat::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * c64::cis(-h * values[j])
    });
    Ok(&phased * vectors.adjoint())
}

/// Real symmetric matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct SparseSymmetric {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            cols.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Copy with `diag[r]` added at `(r, r)`.
    pub fn with_diagonal(&self, diag: &[f64]) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz() + self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.cols[k], self.values[k]));
            }
            triplets.push((r, r, diag[r]));
        }
        Self::from_triplets(self.dim, triplets)
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += c64::new(self.values[k], 0.0);
            }
        }
        m
    }

    /// Gershgorin enclosure `[lo, hi]` of the spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut center = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    center += self.values[k];
                } else {
                    radius += self.values[k].abs();
                }
            }
            lo = lo.min(center - radius);
            hi = hi.max(center + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// `out = (self - shift) * x` on row-major blocks with `width` columns.
    fn apply_shifted(&self, shift: f64, x: &[c64], out: &mut [c64], width: usize) {
        for r in 0..self.dim {
            let row_out = &mut out[r * width..(r + 1) * width];
            let xr = &x[r * width..(r + 1) * width];
            for (o, &v) in row_out.iter_mut().zip(xr) {
                *o = v * (-shift);
            }
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let a = self.values[k];
                let c = self.cols[k];
                let xc = &x[c * width..(c + 1) * width];
                for (o, &v) in row_out.iter_mut().zip(xc) {
                    o.re += a * v.re;
                    o.im += a * v.im;
                }
            }
        }
    }

    /// Overwrites the row-major block `x` (`dim x width`) with
    /// `exp(-i h self) x`.
    ///
    /// Uses a shifted Taylor series with sub-stepping so that every
    /// sub-step has spectral radius at most one; the series is truncated
    /// once the next term falls below 1e-17 of the block norm, which keeps
    /// the result unitary to machine precision.
    pub fn expm_apply(&self, h: f64, x: &mut [c64], width: usize) -> Result<()> {
        debug_assert_eq!(x.len(), self.dim * width);
        if h == 0.0 || width == 0 {
            return Ok(());
        }
        let (lo, hi) = self.gershgorin();
        let shift = 0.5 * (lo + hi);
        let radius = 0.5 * (hi - lo);
        let substeps = (h.abs() * radius).ceil().max(1.0) as usize;
        let hs = h / substeps as f64;

        let mut term = vec![c64::new(0.0, 0.0); x.len()];
        let mut next = vec![c64::new(0.0, 0.0); x.len()];
        let base_norm = block_norm(x);
        for _ in 0..substeps {
            term.copy_from_slice(x);
            let mut converged = false;
            for k in 1..=60 {
                self.apply_shifted(shift, &term, &mut next, width);
                // next <- (-i hs / k) * next
                let f = hs / k as f64;
                for v in next.iter_mut() {
                    *v = c64::new(v.im * f, -v.re * f);
                }
                std::mem::swap(&mut term, &mut next);
                for (xi, ti) in x.iter_mut().zip(&term) {
                    *xi += *ti;
                }
                if block_norm(&term) <= 1e-17 * base_norm.max(f64::MIN_POSITIVE) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::numerical(
                    "Taylor series for the step propagator did not converge",
                ));
            }
        }
        let phase = c64::cis(-h * shift);
        for v in x.iter_mut() {
            *v *= phase;
        }
        Ok(())
    }
}

fn block_norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Row-major copy of a column-major matrix.
pub(crate) fn to_row_major(a: MatRef<'_, c64>) -> Vec<c64> {
    let (n, m) = (a.nrows(), a.ncols());
    let mut out = Vec::with_capacity(n * m);
    for i in 0..n {
        for j in 0..m {
            out.push(a[(i, j)]);
        }
    }
    out
}

pub(crate) fn from_row_major(data: &[c64], nrows: usize, ncols: usize) -> Mat<c64> {
    Mat::from_fn(nrows, ncols, |i, j| data[i * ncols + j])
}
