//! Deterministic Hermitian linear algebra.
//!
//! Everything downstream reduces to positive-semidefiniteness of Hermitian
//! matrices, Kronecker/block assembly, and the canonical shuffle that swaps
//! the outer two tensor factors of `M_n(M_m(M_d))`. Eigenvalues come from a
//! full Hermitian eigendecomposition with ascending ordering so certificates
//! are reproducible bit-for-bit.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Hermiticity tolerance enforced when constructing a [`HermitianMatrix`].
pub const ENTRY_TOL: f64 = 1e-12;

/// Hermiticity guard for raw inputs to spectral routines.
pub const HERMITIAN_GUARD_TOL: f64 = 1e-10;

/// Default tolerance for positive-semidefiniteness decisions.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

/// A square complex matrix with no constraints beyond its shape.
///
/// Used for scalar compression matrices `α ∈ M_{n,m}` and for off-diagonal
/// blocks that are not self-adjoint.
pub type ComplexMatrix = DMatrix<C64>;

/// A validated Hermitian matrix.
///
/// The wrapped matrix satisfies `M[i][j] = conj(M[j][i])` within
/// [`ENTRY_TOL`] at construction time (exact after symmetrization).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: DMatrix<C64>,
}

impl HermitianMatrix {
    /// Wraps `mat`, rejecting it when the Hermitian defect exceeds `tol`.
    pub fn with_tol(mat: DMatrix<C64>, tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", mat.nrows(), mat.ncols()),
            });
        }
        let asym = hermitian_defect(&mat);
        if asym > tol {
            return Err(Error::NonHermitianInput { asymmetry: asym });
        }
        // Symmetrize so the stored entries are exactly Hermitian.
        let herm = (&mat + mat.adjoint()) * C64::new(0.5, 0.0);
        Ok(Self { mat: herm })
    }

    /// Wraps `mat` using the construction tolerance [`ENTRY_TOL`].
    pub fn new(mat: DMatrix<C64>) -> Result<Self> {
        Self::with_tol(mat, ENTRY_TOL)
    }

    /// Wraps a product that is Hermitian in exact arithmetic, allowing
    /// rounding noise up to [`HERMITIAN_GUARD_TOL`].
    pub fn symmetrized(mat: DMatrix<C64>) -> Result<Self> {
        Self::with_tol(mat, HERMITIAN_GUARD_TOL)
    }

    /// The d×d identity.
    pub fn identity(dim: usize) -> Self {
        Self { mat: DMatrix::identity(dim, dim) }
    }

    /// The d×d zero matrix.
    pub fn zeros(dim: usize) -> Self {
        Self { mat: DMatrix::zeros(dim, dim) }
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.mat.norm()
    }

    /// Frobenius inner product `tr(A B)`; real for Hermitian pairs.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        frobenius_inner(&self.mat, &other.mat).re
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        hermitian_eigenvalues(&self.mat)[0]
    }

    /// Largest eigenvalue.
    pub fn lambda_max(&self) -> f64 {
        let ev = hermitian_eigenvalues(&self.mat);
        ev[ev.len() - 1]
    }

    /// Spectral norm `max(|λ_min|, |λ_max|)`.
    pub fn norm_spectral(&self) -> f64 {
        let ev = hermitian_eigenvalues(&self.mat);
        ev[0].abs().max(ev[ev.len() - 1].abs())
    }
}

/// Max-entry Hermitian defect `max |M - M*|`.
pub fn hermitian_defect(mat: &DMatrix<C64>) -> f64 {
    let diff = mat - mat.adjoint();
    diff.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius inner product `tr(A* B)`.
pub fn frobenius_inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Full Hermitian eigendecomposition with eigenvalues sorted ascending and
/// eigenvector columns permuted to match.
///
/// Backed by nalgebra's tridiagonalization solver, with a cyclic Jacobi
/// fallback: the QL iteration can emit NaN on matrices whose tridiagonal
/// form contains exact zeros (sparse sign patterns trigger this), and Jacobi
/// handles those unconditionally.
pub fn hermitian_eigen(mat: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let se = mat.clone().symmetric_eigen();
    let (raw_vals, raw_vecs) = if se.eigenvalues.iter().any(|v| v.is_nan()) {
        jacobi_hermitian_eigen(mat)
    } else {
        (se.eigenvalues, se.eigenvectors)
    };
    let n = raw_vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw_vals[i].partial_cmp(&raw_vals[j]).unwrap());
    let vals = DVector::from_iterator(n, order.iter().map(|&i| raw_vals[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &raw_vecs.column(i));
    }
    (vals, vecs)
}

/// Eigenvalues only, sorted ascending.
pub fn hermitian_eigenvalues(mat: &DMatrix<C64>) -> Vec<f64> {
    let mut vals: Vec<f64> = mat.clone().symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| v.is_nan()) {
        vals = jacobi_hermitian_eigen(mat).0.iter().copied().collect();
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Annihilates off-diagonal entries with unitary 2x2 rotations in a fixed
/// row-cyclic order until the off-diagonal mass is at rounding level.
/// Unsorted output; deterministic for fixed input.
fn jacobi_hermitian_eigen(mat: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let n = mat.nrows();
    let mut a = (mat + mat.adjoint()) * C64::new(0.5, 0.0);
    let mut v = DMatrix::<C64>::identity(n, n);
    let scale = a.norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off += 2.0 * a[(i, j)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let beta = a[(p, q)];
                let bmag = beta.norm();
                if bmag <= 1e-18 * scale {
                    continue;
                }
                let alpha = a[(p, p)].re;
                let gamma = a[(q, q)].re;
                let theta = (gamma - alpha) / (2.0 * bmag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sigma = t * c;
                let phase = beta / C64::new(bmag, 0.0);
                let s = phase * C64::new(sigma, 0.0);

                // A <- G* A G with G = I except [[c, s], [-conj(s), c]] on (p, q).
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * C64::new(c, 0.0) - akq * s.conj();
                    a[(k, q)] = akp * s + akq * C64::new(c, 0.0);
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = apk * C64::new(c, 0.0) - aqk * s;
                    a[(q, k)] = apk * s.conj() + aqk * C64::new(c, 0.0);
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * C64::new(c, 0.0) - vkq * s.conj();
                    v[(k, q)] = vkp * s + vkq * C64::new(c, 0.0);
                }
            }
        }
    }
    (DVector::from_iterator(n, (0..n).map(|i| a[(i, i)].re)), v)
}

/// Smallest eigenvalue of a Hermitian matrix, guarding the input at
/// [`HERMITIAN_GUARD_TOL`].
pub fn lambda_min(mat: &DMatrix<C64>) -> Result<f64> {
    let asym = hermitian_defect(mat);
    if asym > HERMITIAN_GUARD_TOL {
        return Err(Error::NonHermitianInput { asymmetry: asym });
    }
    let herm = (mat + mat.adjoint()) * C64::new(0.5, 0.0);
    Ok(hermitian_eigenvalues(&herm)[0])
}

/// Smallest eigenvalue together with a corresponding unit eigenvector.
pub fn lambda_min_with_vector(mat: &DMatrix<C64>) -> (f64, DVector<C64>) {
    let (vals, vecs) = hermitian_eigen(mat);
    (vals[0], vecs.column(0).into_owned())
}

/// Positive-semidefiniteness: `λ_min(M) ≥ -tol`.
pub fn is_psd(mat: &DMatrix<C64>, tol: f64) -> Result<bool> {
    debug_assert!(tol >= 0.0, "PSD tolerance must be nonnegative");
    Ok(lambda_min(mat)? >= -tol)
}

/// Kronecker product.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// `I_n ⊗ p`, the n-th ampliation of `p`.
pub fn ampliate(p: &DMatrix<C64>, n: usize) -> DMatrix<C64> {
    kron(&DMatrix::identity(n, n), p)
}

/// Canonical shuffle `M_n(M_m(M_d)) → M_m(M_n(M_d))`.
///
/// Swaps the outer two tensor factors,
/// `|i⟩⟨j| ⊗ |k⟩⟨l| ⊗ a ↦ |k⟩⟨l| ⊗ |i⟩⟨j| ⊗ a`. This is a permutation
/// similarity, so it preserves Hermiticity and the full spectrum.
pub fn canonical_shuffle(x: &DMatrix<C64>, n: usize, m: usize, d: usize) -> Result<DMatrix<C64>> {
    let size = n * m * d;
    if x.nrows() != size || x.ncols() != size {
        return Err(Error::ShapeMismatch {
            expected: format!("{size}x{size} (n*m*d with n={n}, m={m}, d={d})"),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let mut out = DMatrix::zeros(size, size);
    for i in 0..n {
        for k in 0..m {
            for j in 0..n {
                for l in 0..m {
                    for s in 0..d {
                        for t in 0..d {
                            let src = ((i * m + k) * d + s, (j * m + l) * d + t);
                            let dst = ((k * n + i) * d + s, (l * n + j) * d + t);
                            out[dst] = x[src];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Splits a square matrix into Hermitian and anti-Hermitian parts,
/// `X = a + i·b` with `a = (X+X*)/2` and `b = (X-X*)/(2i)`.
pub fn hermitian_decompose(x: &DMatrix<C64>) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if x.nrows() != x.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", x.nrows(), x.ncols()),
        });
    }
    let a = (x + x.adjoint()) * C64::new(0.5, 0.0);
    let b = (x - x.adjoint()) * C64::new(0.0, -0.5);
    Ok((HermitianMatrix { mat: a }, HermitianMatrix { mat: b }))
}

/// Assembles an n×n block matrix from d×d blocks in row-major order.
pub fn assemble_blocks(blocks: &[DMatrix<C64>], n: usize, d: usize) -> DMatrix<C64> {
    assert_eq!(blocks.len(), n * n);
    let mut out = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let blk = &blocks[i * n + j];
            out.view_mut((i * d, j * d), (d, d)).copy_from(blk);
        }
    }
    out
}

/// Extracts the (i,j) block of size d×d from an n-level block matrix.
pub fn block_at(x: &DMatrix<C64>, i: usize, j: usize, d: usize) -> DMatrix<C64> {
    x.view((i * d, j * d), (d, d)).into_owned()
}

/// 2×2 block matrix `[[a, b], [c, d]]` of equal square blocks.
pub fn block2(a: &DMatrix<C64>, b: &DMatrix<C64>, c: &DMatrix<C64>, d: &DMatrix<C64>) -> DMatrix<C64> {
    let k = a.nrows();
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    out.view_mut((0, 0), (k, k)).copy_from(a);
    out.view_mut((0, k), (k, k)).copy_from(b);
    out.view_mut((k, 0), (k, k)).copy_from(c);
    out.view_mut((k, k), (k, k)).copy_from(d);
    out
}

/// Real-coordinate embedding of a Hermitian d×d matrix into ℝ^{d²}.
///
/// Isometric for the Frobenius inner product: diagonal entries, then
/// `√2·Re`, `√2·Im` of the strict upper triangle.
pub fn vec_hermitian(m: &DMatrix<C64>) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(d * d);
    let mut idx = 0;
    for i in 0..d {
        v[idx] = m[(i, i)].re;
        idx += 1;
    }
    let s = std::f64::consts::SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            v[idx] = s * m[(i, j)].re;
            idx += 1;
            v[idx] = s * m[(i, j)].im;
            idx += 1;
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Closed-form eigenvalues of a 2×2 Hermitian matrix, used as an
    /// independent oracle.
    fn eig2_oracle(a: f64, b: C64, d: f64) -> (f64, f64) {
        let tr = a + d;
        let det = a * d - b.norm_sqr();
        let disc = (tr * tr - 4.0 * det).sqrt();
        ((tr - disc) / 2.0, (tr + disc) / 2.0)
    }

    #[test]
    fn lambda_min_diagonal() {
        let m = HermitianMatrix::from_diagonal(&[3.0, -2.0]);
        assert!((m.lambda_min() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_min_all_ones() {
        let m = DMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(lambda_min(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lambda_min_sigma_x() {
        // Oracle: characteristic polynomial of [[0,1],[1,0]] gives ±1.
        let (lo, hi) = eig2_oracle(0.0, c(1.0, 0.0), 0.0);
        assert_eq!(lo, -1.0);
        assert_eq!(hi, 1.0);
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((lambda_min(&m).unwrap() - lo).abs() < 1e-12);
    }

    #[test]
    fn lambda_min_rejects_non_hermitian() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(lambda_min(&m), Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn is_psd_examples() {
        let id = DMatrix::<C64>::identity(4, 4);
        assert!(is_psd(&id, 1e-8).unwrap());
        let neg = -DMatrix::<C64>::identity(2, 2);
        assert!(!is_psd(&neg, 1e-8).unwrap());
        // Oracle: eigenvalues of [[1,2],[2,1]] are {3, -1}.
        let (lo, hi) = eig2_oracle(1.0, c(2.0, 0.0), 1.0);
        assert_eq!((lo, hi), (-1.0, 3.0));
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        assert!(!is_psd(&m, 1e-8).unwrap());
    }

    #[test]
    fn kron_examples() {
        let p = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(-1.0, 0.0)]);
        let i1 = DMatrix::<C64>::identity(1, 1);
        assert_eq!(kron(&i1, &p), p);

        // |1><1| ⊗ I_d is a projection of rank d.
        let e11 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let k = kron(&e11, &DMatrix::<C64>::identity(3, 3));
        assert!(((&k * &k) - &k).norm() < 1e-14);
        let trace: C64 = (0..6).map(|i| k[(i, i)]).sum();
        assert!((trace.re - 3.0).abs() < 1e-14);

        let d10 = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let kk = kron(&d10, &d10);
        let expect = {
            let mut m = DMatrix::zeros(4, 4);
            m[(0, 0)] = c(1.0, 0.0);
            m
        };
        assert_eq!(kk, expect);
    }

    #[test]
    fn shuffle_degenerate_and_involution() {
        let d = 2;
        let x = DMatrix::from_fn(2 * 3 * d, 2 * 3 * d, |i, j| c((i + 2 * j) as f64, (i as f64) - (j as f64)));
        let x = (&x + x.adjoint()) * c(0.5, 0.0);
        // n = 1 is the identity.
        assert_eq!(canonical_shuffle(&x, 1, 6, d).unwrap(), x);
        // Involution: shuffling back recovers the input.
        let y = canonical_shuffle(&x, 2, 3, d).unwrap();
        let z = canonical_shuffle(&y, 3, 2, d).unwrap();
        assert_eq!(z, x);
        // Spectrum is preserved.
        let ex = hermitian_eigenvalues(&x);
        let ey = hermitian_eigenvalues(&y);
        for (u, v) in ex.iter().zip(ey.iter()) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn shuffle_swaps_matrix_units() {
        // |1><2| ⊗ |2><1| ⊗ a  ↦  |2><1| ⊗ |1><2| ⊗ a
        let d = 2;
        let a = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.5), c(0.0, 2.0), c(3.0, 0.0), c(-1.0, 0.0)]);
        let e12 = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let e21 = e12.transpose();
        let x = kron(&e12, &kron(&e21, &a));
        let want = kron(&e21, &kron(&e12, &a));
        let got = canonical_shuffle(&x, 2, 2, d).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn shuffle_shape_guard() {
        let x = DMatrix::<C64>::zeros(5, 5);
        assert!(matches!(canonical_shuffle(&x, 2, 2, 2), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn hermitian_decompose_reconstructs() {
        let herm = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, -1.0), c(2.0, 0.0)]);
        let (a, b) = hermitian_decompose(&herm).unwrap();
        assert!((a.matrix() - &herm).norm() < 1e-14);
        assert!(b.norm_fro() < 1e-14);

        let ii = DMatrix::<C64>::identity(2, 2) * c(0.0, 1.0);
        let (a, b) = hermitian_decompose(&ii).unwrap();
        assert!(a.norm_fro() < 1e-14);
        assert!((b.matrix() - DMatrix::<C64>::identity(2, 2)).norm() < 1e-14);

        // Reconstruction check for a generic non-normal input.
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let (a, b) = hermitian_decompose(&x).unwrap();
        let rebuilt = a.matrix() + b.matrix() * c(0.0, 1.0);
        assert!((rebuilt - &x).norm() < 1e-12);
    }

    #[test]
    fn jacobi_agrees_with_tridiagonal_solver() {
        // Dense random Hermitian matrices: both eigensolver paths must agree.
        let mut seed = 0x5eed_u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        for n in [2usize, 5, 9] {
            let g = DMatrix::from_fn(n, n, |_, _| c(next(), next()));
            let h = (&g + g.adjoint()) * c(0.5, 0.0);
            let direct = hermitian_eigenvalues(&h);
            let (jac_vals, jac_vecs) = jacobi_hermitian_eigen(&h);
            let mut jac: Vec<f64> = jac_vals.iter().copied().collect();
            jac.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (u, v) in direct.iter().zip(jac.iter()) {
                assert!((u - v).abs() < 1e-10, "{u} vs {v}");
            }
            // Eigenvector residual ||A V - V diag||.
            let residual = &h * &jac_vecs
                - &jac_vecs * DMatrix::from_diagonal(&jac_vals.map(|x| c(x, 0.0)));
            assert!(residual.norm() < 1e-10);
        }
    }

    #[test]
    fn sparse_sign_pattern_regression() {
        // nalgebra's QL iteration emits NaN on this sparse two-entry matrix
        // (captured from a detector sweep); the Jacobi fallback must kick in
        // and produce the analytic spectrum.
        let n = 18;
        let mut m = DMatrix::<C64>::zeros(n, n);
        let a = -0.5000000000000001;
        let b = -0.35355339059327384;
        m[(0, 1)] = c(a, 0.0);
        m[(1, 0)] = c(a, 0.0);
        m[(12, 13)] = c(b, 0.0);
        m[(13, 12)] = c(b, 0.0);
        let vals = hermitian_eigenvalues(&m);
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!((vals[0] - a).abs() < 1e-14);
        assert!((vals[1] - b).abs() < 1e-14);
        assert!((vals[n - 1] + a).abs() < 1e-14);
        assert!((vals[n - 2] + b).abs() < 1e-14);
        assert!(vals[2..n - 2].iter().all(|v| v.abs() < 1e-14));
        let (vv, vecs) = hermitian_eigen(&m);
        assert!(vv.iter().all(|v| v.is_finite()));
        let residual = &m * &vecs - &vecs * DMatrix::from_diagonal(&vv.map(|x| c(x, 0.0)));
        assert!(residual.norm() < 1e-12);
    }

    #[test]
    fn vec_hermitian_is_isometric() {
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, -1.0), c(2.0, 1.0), c(-3.0, 0.0)]);
        let v = vec_hermitian(&m);
        assert!((v.norm() - m.norm()).abs() < 1e-12);
    }
}
