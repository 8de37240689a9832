//! Metric-aware dense linear operators.
//!
//! Every space carries a Hermitian positive-definite Gram matrix `G = L Lᴴ`.
//! Spectral routines run on the orthonormalized matrix `M̂ = L_codᴴ M L_dom⁻ᴴ`,
//! so ranks, norms, pseudo-inverses and projectors all respect the metrics.
//! The Cholesky factors are computed once per space and shared by clones.

use std::sync::Arc;

use faer::Side;
use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Default relative cutoff for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const HERMITIAN_TOL: f64 = 1e-12;

pub fn c64(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Real matrix from row-major entries.
pub fn real_matrix(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
    CMatrix::from_fn(rows, cols, |r, c| c64(entries[r * cols + c]))
}

fn to_faer(m: &CMatrix) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Matrix product; large operands go through faer's blocked kernel.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let p = to_faer(a) * to_faer(b);
    CMatrix::from_fn(p.nrows(), p.ncols(), |i, j| p[(i, j)])
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value in the standard inner product.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return 0.0;
    }
    to_faer(m)
        .singular_values()
        .expect("singular values converge")
        .first()
        .copied()
        .unwrap_or(0.0)
}

/// Singular value factorization `m = U diag(s) Vᴴ` with `V` always square
/// (`cols × cols`) and `s` sorted descending with `cols` entries.
#[derive(Clone, Debug)]
pub(crate) struct Factorization {
    /// `rows × cols`; only the columns with non-zero singular values are meaningful.
    pub u: CMatrix,
    pub s: Vec<f64>,
    /// `cols × cols`, unitary.
    pub v: CMatrix,
}

pub(crate) fn factorize(m: &CMatrix) -> Factorization {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return Factorization {
            u: CMatrix::zeros(rows, 0),
            s: Vec::new(),
            v: CMatrix::zeros(0, 0),
        };
    }
    if rows == 0 {
        return Factorization {
            u: CMatrix::zeros(0, cols),
            s: vec![0.0; cols],
            v: CMatrix::identity(cols, cols),
        };
    }
    let svd = to_faer(m).svd().expect("singular value decomposition converges");
    let k = rows.min(cols);
    let (u_all, s_all, v_all) = (svd.U(), svd.S().column_vector(), svd.V());
    let mut u = CMatrix::zeros(rows, cols);
    let mut s = vec![0.0; cols];
    for j in 0..k {
        s[j] = s_all[j].re;
        for i in 0..rows {
            u[(i, j)] = u_all[(i, j)];
        }
    }
    let v = CMatrix::from_fn(cols, cols, |i, j| v_all[(i, j)]);
    Factorization { u, s, v }
}

/// Absolute threshold of the repo-wide rank policy.
pub fn rank_threshold(largest_singular_value: f64, rank_tol_rel: f64) -> f64 {
    rank_tol_rel * largest_singular_value.max(1.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub(crate) fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let sym = (m + m.adjoint()) * c64(0.5);
    let eig = to_faer(&sym).self_adjoint_eigen(Side::Lower).expect("Hermitian eigensolver converges");
    let vals = (0..n).map(|k| eig.S().column_vector()[k].re).collect();
    let u = eig.U();
    let vecs = CMatrix::from_fn(n, n, |i, j| u[(i, j)]);
    (vals, vecs)
}

#[derive(Debug)]
struct Frame {
    gram: CMatrix,
    /// `Lᴴ`: original coordinates to orthonormal coordinates.
    to_ortho: CMatrix,
    /// `L⁻ᴴ`: orthonormal coordinates back to original coordinates.
    from_ortho: CMatrix,
}

/// Finite-dimensional complex Hilbert space given by a Gram matrix.
#[derive(Clone, Debug)]
pub struct InnerProductSpace {
    dim: usize,
    /// `None` means the identity Gram matrix.
    frame: Option<Arc<Frame>>,
}

impl InnerProductSpace {
    /// `ℂ^dim` with the standard inner product.
    pub fn euclidean(dim: usize) -> Self {
        InnerProductSpace { dim, frame: None }
    }

    pub fn zero() -> Self {
        Self::euclidean(0)
    }

    pub fn with_gram(gram: CMatrix) -> Result<Self> {
        let (r, c) = gram.shape();
        if r != c {
            return Err(Error::ShapeMismatch(format!("gram matrix is {r}x{c}, expected square")));
        }
        let scale = frobenius(&gram);
        let asym = frobenius(&(&gram - gram.adjoint()));
        if !asym.is_finite() || asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidMetric(format!(
                "gram matrix is not Hermitian (relative asymmetry {:e})",
                asym / scale.max(f64::MIN_POSITIVE)
            )));
        }
        if r == 0 {
            return Ok(Self::euclidean(0));
        }
        if gram == CMatrix::identity(r, r) {
            return Ok(Self::euclidean(r));
        }
        let (vals, _) = hermitian_eigen(&gram);
        if vals[0] <= 0.0 {
            return Err(Error::InvalidMetric(format!(
                "gram matrix is not positive definite (smallest eigenvalue {:e})",
                vals[0]
            )));
        }
        let sym = (&gram + gram.adjoint()) * c64(0.5);
        let chol = Cholesky::new(sym.clone())
            .ok_or_else(|| Error::InvalidMetric("Cholesky factorization failed".into()))?;
        let l = chol.l();
        let l_inv = l
            .solve_lower_triangular(&CMatrix::identity(r, r))
            .ok_or_else(|| Error::InvalidMetric("singular Cholesky factor".into()))?;
        Ok(InnerProductSpace {
            dim: r,
            frame: Some(Arc::new(Frame {
                gram: sym,
                to_ortho: l.adjoint(),
                from_ortho: l_inv.adjoint(),
            })),
        })
    }

    /// Positive diagonal metric.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        let n = weights.len();
        Self::with_gram(CMatrix::from_fn(n, n, |r, c| if r == c { c64(weights[r]) } else { c64(0.0) }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_euclidean(&self) -> bool {
        self.frame.is_none()
    }

    pub fn gram(&self) -> CMatrix {
        match &self.frame {
            Some(f) => f.gram.clone(),
            None => CMatrix::identity(self.dim, self.dim),
        }
    }

    /// `⟨u, v⟩ = uᴴ G v`.
    pub fn inner(&self, u: &CMatrix, v: &CMatrix) -> Complex64 {
        let gv = match &self.frame {
            Some(f) => &f.gram * v,
            None => v.clone(),
        };
        (u.adjoint() * gv)[(0, 0)]
    }

    /// Same dimension and same metric up to roundoff.
    pub fn same_as(&self, other: &InnerProductSpace) -> bool {
        if self.dim != other.dim {
            return false;
        }
        match (&self.frame, &other.frame) {
            (None, None) => true,
            (Some(a), Some(b)) if Arc::ptr_eq(a, b) => true,
            _ => {
                let ga = self.gram();
                let gb = other.gram();
                frobenius(&(&ga - &gb)) <= HERMITIAN_TOL * frobenius(&ga).max(1.0)
            }
        }
    }

    /// Orthogonal direct sum; the Gram matrix is block diagonal.
    pub fn direct_sum(&self, other: &InnerProductSpace) -> InnerProductSpace {
        if self.is_euclidean() && other.is_euclidean() {
            return Self::euclidean(self.dim + other.dim);
        }
        let n = self.dim + other.dim;
        let mut g = CMatrix::zeros(n, n);
        g.view_mut((0, 0), (self.dim, self.dim)).copy_from(&self.gram());
        g.view_mut((self.dim, self.dim), (other.dim, other.dim)).copy_from(&other.gram());
        Self::with_gram(g).expect("direct sum of valid metrics is a valid metric")
    }

    fn to_ortho(&self, m: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(f) => matmul(&f.to_ortho, m),
            None => m.clone(),
        }
    }

    fn from_ortho(&self, m: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(f) => matmul(&f.from_ortho, m),
            None => m.clone(),
        }
    }

    /// Right-multiplication by `Lᴴ` (maps orthonormal row coordinates).
    fn right_to_ortho_inverse(&self, m: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(f) => matmul(m, &f.from_ortho),
            None => m.clone(),
        }
    }

    fn right_to_ortho(&self, m: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(f) => matmul(m, &f.to_ortho),
            None => m.clone(),
        }
    }
}

/// Numerical rank together with the singular values it was read from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankProfile {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub rank_tol: f64,
}

/// Dense operator between two inner product spaces.
#[derive(Clone, Debug)]
pub struct LinearOp {
    domain: InnerProductSpace,
    codomain: InnerProductSpace,
    matrix: CMatrix,
}

impl LinearOp {
    pub fn new(domain: InnerProductSpace, codomain: InnerProductSpace, matrix: CMatrix) -> Result<Self> {
        if matrix.shape() != (codomain.dim(), domain.dim()) {
            return Err(Error::ShapeMismatch(format!(
                "matrix is {}x{}, spaces require {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                codomain.dim(),
                domain.dim()
            )));
        }
        Ok(LinearOp { domain, codomain, matrix })
    }

    /// Operator between Euclidean spaces of matching dimensions.
    pub fn euclidean(matrix: CMatrix) -> Self {
        let (r, c) = matrix.shape();
        LinearOp {
            domain: InnerProductSpace::euclidean(c),
            codomain: InnerProductSpace::euclidean(r),
            matrix,
        }
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Self {
        Self::euclidean(real_matrix(rows, cols, entries))
    }

    pub fn zero(domain: &InnerProductSpace, codomain: &InnerProductSpace) -> Self {
        LinearOp {
            matrix: CMatrix::zeros(codomain.dim(), domain.dim()),
            domain: domain.clone(),
            codomain: codomain.clone(),
        }
    }

    pub fn identity(space: &InnerProductSpace) -> Self {
        LinearOp {
            matrix: CMatrix::identity(space.dim(), space.dim()),
            domain: space.clone(),
            codomain: space.clone(),
        }
    }

    pub fn domain(&self) -> &InnerProductSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &InnerProductSpace {
        &self.codomain
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    pub fn is_square_on(&self, space: &InnerProductSpace) -> bool {
        self.domain.same_as(space) && self.codomain.same_as(space)
    }

    /// Same spaces, replaced matrix.
    pub fn with_matrix(&self, matrix: CMatrix) -> Result<Self> {
        Self::new(self.domain.clone(), self.codomain.clone(), matrix)
    }

    /// `self ∘ rhs`: apply `rhs` first.
    pub fn compose(&self, rhs: &LinearOp) -> Result<LinearOp> {
        if !rhs.codomain.same_as(&self.domain) {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose: inner spaces differ (dims {} and {})",
                rhs.codomain.dim(),
                self.domain.dim()
            )));
        }
        Ok(LinearOp {
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: matmul(&self.matrix, &rhs.matrix),
        })
    }

    /// Composition for operators already known to chain.
    pub fn then(&self, rhs: &LinearOp) -> LinearOp {
        self.compose(rhs).expect("operators must chain")
    }

    pub fn add(&self, rhs: &LinearOp) -> Result<LinearOp> {
        self.check_same_spaces(rhs)?;
        self.with_matrix(&self.matrix + &rhs.matrix)
    }

    pub fn sub(&self, rhs: &LinearOp) -> Result<LinearOp> {
        self.check_same_spaces(rhs)?;
        self.with_matrix(&self.matrix - &rhs.matrix)
    }

    pub fn scale(&self, factor: Complex64) -> LinearOp {
        LinearOp {
            domain: self.domain.clone(),
            codomain: self.codomain.clone(),
            matrix: &self.matrix * factor,
        }
    }

    fn check_same_spaces(&self, rhs: &LinearOp) -> Result<()> {
        if self.domain.same_as(&rhs.domain) && self.codomain.same_as(&rhs.codomain) {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "operator spaces differ: {:?} vs {:?}",
                self.shape(),
                rhs.shape()
            )))
        }
    }

    /// Matrix of the operator in metrically orthonormal coordinates.
    pub fn orthonormal_matrix(&self) -> CMatrix {
        self.codomain.to_ortho(&self.domain.right_to_ortho_inverse(&self.matrix))
    }

    /// Inverse of [`LinearOp::orthonormal_matrix`].
    pub fn from_orthonormal(domain: &InnerProductSpace, codomain: &InnerProductSpace, m: CMatrix) -> Result<Self> {
        let matrix = codomain.from_ortho(&domain.right_to_ortho(&m));
        LinearOp::new(domain.clone(), codomain.clone(), matrix)
    }

    /// Hilbert-space adjoint `G_dom⁻¹ Mᴴ G_cod`.
    pub fn adjoint(&self) -> LinearOp {
        if self.domain.is_euclidean() && self.codomain.is_euclidean() {
            return LinearOp {
                domain: self.codomain.clone(),
                codomain: self.domain.clone(),
                matrix: self.matrix.adjoint(),
            };
        }
        LinearOp::from_orthonormal(&self.codomain, &self.domain, self.orthonormal_matrix().adjoint())
            .expect("adjoint shape is consistent")
    }

    /// Metric-aware operator norm.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.orthonormal_matrix())
    }

    /// Metric Hilbert–Schmidt norm; an upper bound for [`LinearOp::norm`]
    /// that needs no factorization.
    pub fn hs_norm(&self) -> f64 {
        frobenius(&self.orthonormal_matrix())
    }

    pub(crate) fn factorization(&self) -> Factorization {
        factorize(&self.orthonormal_matrix())
    }

    pub fn rank_profile(&self, rank_tol_rel: f64) -> RankProfile {
        let f = self.factorization();
        profile_from(&f.s, rank_tol_rel)
    }

    pub fn rank(&self, rank_tol_rel: f64) -> usize {
        self.rank_profile(rank_tol_rel).rank
    }

    /// Moore–Penrose pseudo-inverse with respect to the Gram metrics.
    pub fn pinv(&self, rank_tol_rel: f64) -> LinearOp {
        let f = self.factorization();
        let profile = profile_from(&f.s, rank_tol_rel);
        let (m, n) = self.shape();
        let mut inv = CMatrix::zeros(n, m);
        for k in 0..profile.rank {
            let scaled = f.v.column(k) * c64(1.0 / f.s[k]);
            inv += scaled * f.u.column(k).adjoint();
        }
        LinearOp::from_orthonormal(&self.codomain, &self.domain, inv).expect("pinv shape is consistent")
    }

    /// Metric-orthonormal basis of the kernel, as columns in original coordinates.
    pub fn kernel_basis(&self, rank_tol_rel: f64) -> CMatrix {
        let f = self.factorization();
        let rank = profile_from(&f.s, rank_tol_rel).rank;
        let n = self.domain.dim();
        let v_ker = f.v.columns(rank, n - rank).into_owned();
        self.domain.from_ortho(&v_ker)
    }

    /// Metric-orthonormal basis of the image, as columns in original coordinates.
    pub fn image_basis(&self, rank_tol_rel: f64) -> CMatrix {
        let f = self.factorization();
        let rank = profile_from(&f.s, rank_tol_rel).rank;
        let u_im = f.u.columns(0, rank).into_owned();
        self.codomain.from_ortho(&u_im)
    }

    /// Orthogonal projector (in `space`) onto the span of metric-orthonormal columns.
    pub fn projector_onto(space: &InnerProductSpace, basis: &CMatrix) -> LinearOp {
        let ortho = space.to_ortho(basis);
        let p = &ortho * ortho.adjoint();
        LinearOp::from_orthonormal(space, space, p).expect("projector is square")
    }

    /// Residual of `self` against another operator on the same spaces.
    pub fn distance(&self, rhs: &LinearOp) -> f64 {
        match self.sub(rhs) {
            Ok(d) => d.norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// `‖self − self*‖`, meaningful for endomorphisms.
    pub fn self_adjoint_defect(&self) -> f64 {
        let m = self.orthonormal_matrix();
        spectral_norm(&(&m - m.adjoint()))
    }

    /// Eigenvalues of the Hermitian part, ascending; meaningful for endomorphisms.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.orthonormal_matrix()).0
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

pub(crate) fn profile_from(singular_values: &[f64], rank_tol_rel: f64) -> RankProfile {
    let largest = singular_values.first().copied().unwrap_or(0.0);
    let rank_tol = rank_threshold(largest, rank_tol_rel);
    let rank = singular_values.iter().filter(|s| **s > rank_tol).count();
    RankProfile { rank, singular_values: singular_values.to_vec(), rank_tol }
}

/// `adjoint(op)`.
pub fn adjoint(op: &LinearOp) -> LinearOp {
    op.adjoint()
}

pub fn rank_profile(op: &LinearOp, rank_tol_rel: f64) -> RankProfile {
    op.rank_profile(rank_tol_rel)
}

pub fn pinv(op: &LinearOp, rank_tol_rel: f64) -> LinearOp {
    op.pinv(rank_tol_rel)
}

pub fn op_norm(op: &LinearOp) -> f64 {
    op.norm()
}

/// Repo-wide matrix encoding: row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut re = Vec::with_capacity(rows * cols);
        let mut im = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                re.push(m[(r, c)].re);
                im.push(m[(r, c)].im);
            }
        }
        let im = if im.iter().all(|x| *x == 0.0) { None } else { Some(im) };
        MatrixJson { rows, cols, re, im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.rows * self.cols;
        if self.re.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "matrix declares {}x{} but has {} real entries",
                self.rows,
                self.cols,
                self.re.len()
            )));
        }
        if let Some(im) = &self.im {
            if im.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "matrix declares {}x{} but has {} imaginary entries",
                    self.rows,
                    self.cols,
                    im.len()
                )));
            }
        }
        if self.re.iter().chain(self.im.iter().flatten()).any(|x| !x.is_finite()) {
            return Err(Error::Parse("matrix entries must be finite".into()));
        }
        Ok(CMatrix::from_fn(self.rows, self.cols, |r, c| {
            let k = r * self.cols + c;
            Complex64::new(self.re[k], self.im.as_ref().map_or(0.0, |im| im[k]))
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    #[test]
    fn euclidean_adjoint_is_conjugate_transpose() {
        let m = CMatrix::from_fn(2, 3, |r, c| Complex64::new(r as f64 + 1.0, c as f64 - 1.0));
        let op = LinearOp::euclidean(m.clone());
        assert_eq!(op.adjoint().matrix(), &m.adjoint());
    }

    #[test]
    fn zero_adjoint_is_zero() {
        let op = LinearOp::zero(&InnerProductSpace::euclidean(3), &InnerProductSpace::euclidean(2));
        assert_eq!(max_abs(op.adjoint().matrix()), 0.0);
        assert_eq!(op.adjoint().shape(), (3, 2));
    }

    #[test]
    fn weighted_adjoint_by_hand() {
        // <Mu, v> = u1 v1 and <u, w>_dom = 2 u1 w1 + u2 w2 force w = (v1/2, 0).
        let dom = InnerProductSpace::diagonal(&[2.0, 1.0]).unwrap();
        let op = LinearOp::new(dom, InnerProductSpace::euclidean(1), real_matrix(1, 2, &[1.0, 0.0])).unwrap();
        let adj = op.adjoint();
        assert_abs_diff_eq!(adj.matrix()[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(adj.matrix()[(1, 0)].norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(LinearOp::identity(&InnerProductSpace::euclidean(2)).rank(DEFAULT_RANK_TOL), 2);
        let tiny = LinearOp::from_real(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        let p = tiny.rank_profile(DEFAULT_RANK_TOL);
        assert_eq!(p.rank, 1);
        assert_eq!(p.rank_tol, 1e-10);
        assert!(p.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn pinv_examples() {
        let m = LinearOp::from_real(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let inv = m.pinv(DEFAULT_RANK_TOL);
        let expected = real_matrix(2, 2, &[0.6, -0.2, -0.2, 0.4]);
        assert!(max_abs(&(inv.matrix() - expected)) < 1e-12);

        let z = LinearOp::zero(&InnerProductSpace::euclidean(2), &InnerProductSpace::euclidean(3));
        assert_eq!(max_abs(z.pinv(DEFAULT_RANK_TOL).matrix()), 0.0);

        let d = LinearOp::from_real(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let di = d.pinv(DEFAULT_RANK_TOL);
        assert!(max_abs(&(di.matrix() - real_matrix(2, 2, &[0.5, 0.0, 0.0, 0.0]))) < 1e-15);
    }

    #[test]
    fn norm_examples() {
        assert_abs_diff_eq!(LinearOp::identity(&InnerProductSpace::euclidean(3)).norm(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(LinearOp::from_real(2, 2, &[3.0, 0.0, 0.0, 1.0]).norm(), 3.0, epsilon = 1e-14);
        // Orthonormal coordinates: M L_dom⁻ᴴ = [[0, 1], [0, 0]] since L_dom = diag(2, 1).
        let dom = InnerProductSpace::diagonal(&[4.0, 1.0]).unwrap();
        let op = LinearOp::new(dom, InnerProductSpace::euclidean(2), real_matrix(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert_abs_diff_eq!(op.norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_dimensional_spaces() {
        let z = InnerProductSpace::zero();
        let v = InnerProductSpace::euclidean(3);
        let into = LinearOp::zero(&z, &v);
        let out = LinearOp::zero(&v, &z);
        assert_eq!(into.norm(), 0.0);
        assert_eq!(into.rank(DEFAULT_RANK_TOL), 0);
        assert_eq!(out.rank(DEFAULT_RANK_TOL), 0);
        assert_eq!(out.kernel_basis(DEFAULT_RANK_TOL).ncols(), 3);
        assert_eq!(into.kernel_basis(DEFAULT_RANK_TOL).ncols(), 0);
        assert_eq!(into.pinv(DEFAULT_RANK_TOL).shape(), (0, 3));
        assert_eq!(out.adjoint().shape(), (3, 0));
    }

    #[test]
    fn invalid_metrics_rejected() {
        let asym = real_matrix(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(InnerProductSpace::with_gram(asym), Err(Error::InvalidMetric(_))));
        let indefinite = real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(InnerProductSpace::with_gram(indefinite), Err(Error::InvalidMetric(_))));
        assert!(matches!(
            LinearOp::new(InnerProductSpace::euclidean(2), InnerProductSpace::euclidean(2), CMatrix::zeros(3, 2)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn kernel_and_image_bases_of_short_matrix() {
        let op = LinearOp::from_real(1, 3, &[1.0, 1.0, 0.0]);
        let k = op.kernel_basis(DEFAULT_RANK_TOL);
        assert_eq!(k.ncols(), 2);
        assert!(max_abs(&(op.matrix() * &k)) < 1e-14);
        assert_eq!(op.image_basis(DEFAULT_RANK_TOL).ncols(), 1);
    }

    #[test]
    fn matrix_json_omits_zero_imaginary_part() {
        let m = real_matrix(1, 2, &[1.0, -2.0]);
        let j = MatrixJson::from_matrix(&m);
        assert!(j.im.is_none());
        let text = serde_json::to_string(&j).unwrap();
        assert_eq!(text, r#"{"rows":1,"cols":2,"re":[1.0,-2.0]}"#);
        let bad = MatrixJson { rows: 2, cols: 2, re: vec![1.0], im: None };
        assert!(matches!(bad.to_matrix(), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn svd_reconstructs_rank_deficient_weighted_operators() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut gauss = |r: usize, c: usize| CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random(), rng.random()) - c64(0.5));
        for (n, rank) in [(8, 1), (8, 3), (6, 5), (5, 0)] {
            let b = gauss(n, n);
            let space = InnerProductSpace::with_gram(CMatrix::identity(n, n) + &b * b.adjoint()).unwrap();
            let m = gauss(n, rank) * gauss(rank, n);
            let op = LinearOp::new(space.clone(), space.clone(), m).unwrap();
            let f = op.factorization();
            let ortho = op.orthonormal_matrix();
            let sigma = CMatrix::from_fn(n, n, |i, j| if i == j { c64(f.s[i]) } else { c64(0.0) });
            let rebuilt = &f.u * sigma * f.v.adjoint();
            assert!(max_abs(&(rebuilt - &ortho)) <= 1e-12 * (1.0 + spectral_norm(&ortho)));
            assert!(max_abs(&(f.v.adjoint() * &f.v - CMatrix::identity(n, n))) <= 1e-12);
            assert!(f.s.windows(2).all(|w| w[0] >= w[1]));
            assert_eq!(op.rank(DEFAULT_RANK_TOL), rank);
        }
    }
}
