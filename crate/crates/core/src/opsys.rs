//! Concrete operator systems `V ⊆ M_d(ℂ)` and their matrix ordering.
//!
//! A system is given by a real-linearly independent Hermitian basis whose
//! span contains the identity; the unit is always `I_d` itself. The level-n
//! cone is `C_n = M_n(V)_h ∩ PSD`, decided spectrally.

use nalgebra::{DMatrix, DVector};

use crate::certificate::ConeCertificate;
use crate::error::Error;
use crate::matlin::{
    self, block_at, frobenius_inner, hermitian_decompose, C64, HermitianMatrix,
};
use crate::Result;

/// Residual threshold for subspace containment; tighter than the PSD
/// tolerance because least-squares projection is better conditioned than
/// eigenvalue sign decisions.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Threshold for basis-independence and unit-in-span checks.
pub const SPAN_TOL: f64 = 1e-10;

/// A unital self-adjoint subspace of `M_d(ℂ)` with a Hermitian basis.
#[derive(Debug, Clone)]
pub struct OperatorSystemSpace {
    dim: usize,
    basis: Vec<HermitianMatrix>,
    /// Frobenius-orthonormal Hermitian basis of the real span.
    ortho: Vec<HermitianMatrix>,
    /// Change of basis: `basis[k] = Σ_j ortho[j] · r[(j, k)]`, upper triangular.
    r: DMatrix<f64>,
    /// Real coefficients of `I_d` over `basis`.
    unit_coeffs: DVector<f64>,
}

impl OperatorSystemSpace {
    /// Builds a system from a Hermitian basis, validating independence and
    /// that the identity lies in the span.
    pub fn new(basis: Vec<HermitianMatrix>) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvariantViolation { which: "basis must be nonempty".into() });
        }
        let dim = basis[0].dim();
        for b in &basis {
            if b.dim() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("{dim}x{dim}"),
                    got: format!("{}x{}", b.dim(), b.dim()),
                });
            }
        }

        // Modified Gram-Schmidt over the Frobenius inner product. The R
        // factor records coordinates of the original basis over `ortho`.
        let m = basis.len();
        let mut ortho: Vec<HermitianMatrix> = Vec::with_capacity(m);
        let mut r = DMatrix::<f64>::zeros(m, m);
        let scale = basis.iter().map(|b| b.norm_fro()).fold(0.0, f64::max).max(1.0);
        for (k, b) in basis.iter().enumerate() {
            let mut w = b.matrix().clone();
            for (j, o) in ortho.iter().enumerate() {
                let coef = frobenius_inner(o.matrix(), &w).re;
                r[(j, k)] = coef;
                w -= o.matrix() * C64::new(coef, 0.0);
            }
            let nw = w.norm();
            if nw <= SPAN_TOL * scale {
                return Err(Error::InvariantViolation {
                    which: format!("basis element {k} is linearly dependent (residual {nw:.3e})"),
                });
            }
            r[(k, k)] = nw;
            ortho.push(HermitianMatrix::symmetrized(w / C64::new(nw, 0.0))?);
        }

        // The unit must be I_d and must lie in the span.
        let identity = DMatrix::<C64>::identity(dim, dim);
        let mut resid = identity.clone();
        let mut ortho_coeffs = DVector::<f64>::zeros(m);
        for (j, o) in ortho.iter().enumerate() {
            let coef = frobenius_inner(o.matrix(), &resid).re;
            ortho_coeffs[j] = coef;
            resid -= o.matrix() * C64::new(coef, 0.0);
        }
        if resid.norm() > SPAN_TOL {
            return Err(Error::InvariantViolation {
                which: format!("identity is not in the span (residual {:.3e})", resid.norm()),
            });
        }
        let unit_coeffs = solve_upper_triangular(&r, &ortho_coeffs);

        Ok(Self { dim, basis, ortho, r, unit_coeffs })
    }

    /// Full matrix algebra `M_d` with its canonical Hermitian basis.
    pub fn full(dim: usize) -> Self {
        let mut basis = Vec::new();
        for i in 0..dim {
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            m[(i, i)] = C64::new(1.0, 0.0);
            basis.push(HermitianMatrix::new(m).unwrap());
        }
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let mut re = DMatrix::<C64>::zeros(dim, dim);
                re[(i, j)] = C64::new(s, 0.0);
                re[(j, i)] = C64::new(s, 0.0);
                basis.push(HermitianMatrix::new(re).unwrap());
                let mut im = DMatrix::<C64>::zeros(dim, dim);
                im[(i, j)] = C64::new(0.0, -s);
                im[(j, i)] = C64::new(0.0, s);
                basis.push(HermitianMatrix::new(im).unwrap());
            }
        }
        Self::new(basis).unwrap()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    /// Number of Hermitian basis elements (= complex dimension of the span).
    pub fn basis_len(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    /// Frobenius-orthonormal Hermitian basis of the span.
    pub fn ortho_basis(&self) -> &[HermitianMatrix] {
        &self.ortho
    }

    /// The order unit `e = I_d`.
    pub fn unit(&self) -> HermitianMatrix {
        HermitianMatrix::identity(self.dim)
    }

    /// Coefficients of the unit over `basis`.
    pub fn unit_coeffs(&self) -> &DVector<f64> {
        &self.unit_coeffs
    }

    /// Materializes an element from real coefficients over `basis`.
    pub fn hermitian_from_coeffs(&self, coeffs: &DVector<f64>) -> HermitianMatrix {
        let mut m = DMatrix::<C64>::zeros(self.dim, self.dim);
        for (k, b) in self.basis.iter().enumerate() {
            m += b.matrix() * C64::new(coeffs[k], 0.0);
        }
        HermitianMatrix::symmetrized(m).expect("real combination of Hermitian basis")
    }

    /// Least-squares membership of a Hermitian matrix in the real span.
    ///
    /// Returns the real coefficients over `basis` when the Frobenius residual
    /// is below [`CONTAINMENT_TOL`].
    pub fn contains_hermitian(&self, x: &HermitianMatrix) -> Result<Option<DVector<f64>>> {
        if x.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.dim),
                got: format!("{0}x{0}", x.dim()),
            });
        }
        let (coeffs_ortho, residual) = self.project_onto_ortho(x.matrix());
        if residual < CONTAINMENT_TOL {
            Ok(Some(solve_upper_triangular(&self.r, &coeffs_ortho)))
        } else {
            Ok(None)
        }
    }

    /// Complex-span membership: `X ∈ V` iff both Hermitian parts lie in the
    /// real span. Returns complex coefficients over `basis`.
    pub fn contains(&self, x: &DMatrix<C64>) -> Result<Option<DVector<C64>>> {
        let (a, b) = hermitian_decompose(x)?;
        if a.dim() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("{0}x{0}", self.dim),
                got: format!("{0}x{0}", a.dim()),
            });
        }
        let (ca, ra) = self.project_onto_ortho(a.matrix());
        let (cb, rb) = self.project_onto_ortho(b.matrix());
        if (ra * ra + rb * rb).sqrt() < CONTAINMENT_TOL {
            let ca = solve_upper_triangular(&self.r, &ca);
            let cb = solve_upper_triangular(&self.r, &cb);
            Ok(Some(DVector::from_iterator(
                ca.len(),
                ca.iter().zip(cb.iter()).map(|(&re, &im)| C64::new(re, im)),
            )))
        } else {
            Ok(None)
        }
    }

    /// Projects a Hermitian matrix onto the orthonormal basis, returning
    /// coefficients and the Frobenius residual.
    fn project_onto_ortho(&self, x: &DMatrix<C64>) -> (DVector<f64>, f64) {
        let m = self.ortho.len();
        let mut coeffs = DVector::zeros(m);
        let mut resid = x.clone();
        for (j, o) in self.ortho.iter().enumerate() {
            let c = frobenius_inner(o.matrix(), &resid).re;
            coeffs[j] = c;
            resid -= o.matrix() * C64::new(c, 0.0);
        }
        (coeffs, resid.norm())
    }
}

fn solve_upper_triangular(r: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    let n = rhs.len();
    let mut x = DVector::zeros(n);
    for i in (0..n).rev() {
        let mut s = rhs[i];
        for j in (i + 1)..n {
            s -= r[(i, j)] * x[j];
        }
        x[i] = s / r[(i, i)];
    }
    x
}

/// A self-adjoint element of `M_n(V)` as coefficients plus the materialized
/// `nd×nd` block matrix.
#[derive(Debug, Clone)]
pub struct LevelElement {
    level: usize,
    ambient_dim: usize,
    /// `coeffs[i][j]` are the complex coefficients of entry `x_{ij}` over the
    /// system basis; Hermiticity forces `coeffs[i][j][k] = conj(coeffs[j][i][k])`.
    coeffs: Vec<Vec<DVector<C64>>>,
    block: HermitianMatrix,
}

impl LevelElement {
    /// Builds an element from its coefficient tensor.
    pub fn from_coeffs(v: &OperatorSystemSpace, coeffs: Vec<Vec<DVector<C64>>>) -> Result<Self> {
        let n = coeffs.len();
        let d = v.ambient_dim();
        let m = v.basis_len();
        for row in &coeffs {
            if row.len() != n {
                return Err(Error::ShapeMismatch {
                    expected: format!("{n}x{n} coefficient grid"),
                    got: format!("{}x{}", n, row.len()),
                });
            }
            for c in row {
                if c.len() != m {
                    return Err(Error::ShapeMismatch {
                        expected: format!("coefficient vectors of length {m}"),
                        got: format!("{}", c.len()),
                    });
                }
            }
        }
        let mut blocks = Vec::with_capacity(n * n);
        for row in &coeffs {
            for c in row {
                let mut blk = DMatrix::<C64>::zeros(d, d);
                for (k, b) in v.basis().iter().enumerate() {
                    blk += b.matrix() * c[k];
                }
                blocks.push(blk);
            }
        }
        let block = matlin::assemble_blocks(&blocks, n, d);
        let block = HermitianMatrix::symmetrized(block)?;
        Ok(Self { level: n, ambient_dim: d, coeffs, block })
    }

    /// Builds an element from an `nd×nd` Hermitian block, checking that every
    /// entry lies in `V`.
    pub fn from_block(v: &OperatorSystemSpace, block: HermitianMatrix) -> Result<Self> {
        let d = v.ambient_dim();
        let size = block.dim();
        if size % d != 0 {
            return Err(Error::ShapeMismatch {
                expected: format!("multiple of ambient dimension {d}"),
                got: format!("{size}"),
            });
        }
        let n = size / d;
        let mut coeffs = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let entry = block_at(block.matrix(), i, j, d);
                match v.contains(&entry)? {
                    Some(c) => row.push(c),
                    None => {
                        let (_, residual) = v.project_onto_ortho(
                            &((&entry + entry.adjoint()) * C64::new(0.5, 0.0)),
                        );
                        return Err(Error::EntryNotInSystem { row: i, col: j, residual });
                    }
                }
            }
            coeffs.push(row);
        }
        Ok(Self { level: n, ambient_dim: d, coeffs, block })
    }

    /// The unit `e_n = I_n ⊗ e = I_{nd}`.
    pub fn unit(v: &OperatorSystemSpace, n: usize) -> Self {
        let m = v.basis_len();
        let mut coeffs = vec![vec![DVector::<C64>::zeros(m); n]; n];
        for i in 0..n {
            for (k, &u) in v.unit_coeffs().iter().enumerate() {
                coeffs[i][i][k] = C64::new(u, 0.0);
            }
        }
        Self::from_coeffs(v, coeffs).expect("unit element")
    }

    /// Level-1 element from real coefficients.
    pub fn from_hermitian_coeffs(v: &OperatorSystemSpace, c: &DVector<f64>) -> Self {
        let coeffs = vec![vec![c.map(|x| C64::new(x, 0.0))]];
        Self::from_coeffs(v, coeffs).expect("level-1 element")
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn block(&self) -> &HermitianMatrix {
        &self.block
    }

    pub fn coeffs(&self) -> &[Vec<DVector<C64>>] {
        &self.coeffs
    }

    /// Checks dimension compatibility with a system.
    pub fn compatible_with(&self, v: &OperatorSystemSpace) -> Result<()> {
        if self.ambient_dim != v.ambient_dim()
            || self.coeffs[0][0].len() != v.basis_len()
        {
            return Err(Error::ShapeMismatch {
                expected: format!("element over a system with d={}, m={}", v.ambient_dim(), v.basis_len()),
                got: format!("d={}, m={}", self.ambient_dim, self.coeffs[0][0].len()),
            });
        }
        Ok(())
    }
}

/// Decides `x ∈ C_n`, i.e. positive-semidefiniteness of the block.
pub fn cone_membership(
    v: &OperatorSystemSpace,
    x: &LevelElement,
    tol: f64,
) -> Result<ConeCertificate> {
    x.compatible_with(v)?;
    Ok(ConeCertificate::direct(x.block().lambda_min(), tol))
}

/// Order norm of a Hermitian element: `inf{t > 0 : t·e_n ± x ⪰ 0}`.
///
/// Because the unit is `I_{nd}`, this equals the spectral norm of the block.
pub fn order_norm_hermitian(v: &OperatorSystemSpace, x: &LevelElement) -> Result<f64> {
    x.compatible_with(v)?;
    Ok(x.block().norm_spectral())
}

/// Minimal order norm on Hermitian elements.
///
/// The state-supremum norm agrees with the order norm on Hermitians, so this
/// is an alias kept so unit-norm preconditions can be invoked by name.
pub fn minimal_order_norm_hermitian(v: &OperatorSystemSpace, x: &LevelElement) -> Result<f64> {
    order_norm_hermitian(v, x)
}

/// Report of the randomized matrix-order-unit verification.
#[derive(Debug, Clone, serde::Serialize)]
pub struct OrderUnitReport {
    pub trials: usize,
    pub failures: usize,
    /// Worst `λ_min(r·e_n - x)` over all trials; should be ≥ -tol.
    pub worst_margin: f64,
}

/// Verifies that the unit is a matrix order unit: for random Hermitian
/// `x ∈ M_n(V)` with `n ≤ n_max`, `r = ‖x‖ + margin` satisfies
/// `r·e_n - x ⪰ 0`.
pub fn matrix_order_unit_check(
    v: &OperatorSystemSpace,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> OrderUnitReport {
    use rand::Rng;
    let mut rng = crate::sampling::rng_from_seed(seed);
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    let margin = 1e-6;
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max);
        let x = crate::sampling::random_hermitian_element(v, n, &mut rng);
        let r = x.block().norm_spectral() + margin;
        let shifted = DMatrix::<C64>::identity(x.block().dim(), x.block().dim())
            * C64::new(r, 0.0)
            - x.block().matrix();
        let lm = matlin::hermitian_eigenvalues(&shifted)[0];
        worst = worst.min(lm);
        if lm < -1e-8 {
            failures += 1;
        }
    }
    OrderUnitReport { trials, failures, worst_margin: worst }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin::is_psd;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn pauli_x() -> HermitianMatrix {
        HermitianMatrix::new(DMatrix::from_row_slice(2, 2, &[
            c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0),
        ])).unwrap()
    }

    fn pauli_z() -> HermitianMatrix {
        HermitianMatrix::from_diagonal(&[1.0, -1.0])
    }

    #[test]
    fn contains_unit_and_zero() {
        let v = OperatorSystemSpace::full(2);
        let coeffs = v.contains_hermitian(&v.unit()).unwrap().unwrap();
        let rebuilt = v.hermitian_from_coeffs(&coeffs);
        assert!((rebuilt.matrix() - v.unit().matrix()).norm() < 1e-10);
        let zero = HermitianMatrix::zeros(2);
        let coeffs = v.contains_hermitian(&zero).unwrap().unwrap();
        assert!(coeffs.norm() < 1e-12);
    }

    #[test]
    fn pauli_span_excludes_sigma_z() {
        // V = span{I, sigma_x}; sigma_z is Frobenius-orthogonal to both.
        let v = OperatorSystemSpace::new(vec![HermitianMatrix::identity(2), pauli_x()]).unwrap();
        assert!(v.contains_hermitian(&pauli_z()).unwrap().is_none());
    }

    #[test]
    fn missing_identity_is_rejected() {
        let r = OperatorSystemSpace::new(vec![pauli_x()]);
        assert!(matches!(r, Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let r = OperatorSystemSpace::new(vec![
            HermitianMatrix::identity(2),
            HermitianMatrix::from_diagonal(&[2.0, 2.0]),
        ]);
        assert!(matches!(r, Err(Error::InvariantViolation { .. })));
    }

    #[test]
    fn cone_membership_of_unit() {
        let v = OperatorSystemSpace::full(2);
        let e2 = LevelElement::unit(&v, 2);
        let cert = cone_membership(&v, &e2, 1e-8).unwrap();
        assert!(cert.is_member());
        assert!((cert.lambda_min - 1.0).abs() < 1e-10);

        let minus = LevelElement::from_block(
            &v,
            HermitianMatrix::new(-DMatrix::<C64>::identity(4, 4)).unwrap(),
        ).unwrap();
        assert!(!cone_membership(&v, &minus, 1e-8).unwrap().is_member());
    }

    #[test]
    fn block_off_diagonal_identity_not_member() {
        // [[sigma_x, I], [I, sigma_x]] has an eigenvalue -2 via sigma_x ⊗ ... oracle:
        // eigenvalues are {sx ± 1 : sx ∈ spec(sigma_x)} = {-2, 0, 0, 2}.
        let v = OperatorSystemSpace::full(2);
        let sx = pauli_x();
        let id = DMatrix::<C64>::identity(2, 2);
        let blk = matlin::block2(sx.matrix(), &id, &id, sx.matrix());
        let evs = matlin::hermitian_eigenvalues(&blk);
        assert!((evs[0] + 2.0).abs() < 1e-10);
        let x = LevelElement::from_block(&v, HermitianMatrix::new(blk).unwrap()).unwrap();
        assert!(!cone_membership(&v, &x, 1e-8).unwrap().is_member());
    }

    #[test]
    fn from_block_rejects_foreign_entries() {
        let v = OperatorSystemSpace::new(vec![HermitianMatrix::identity(2), pauli_x()]).unwrap();
        let r = LevelElement::from_block(&v, pauli_z());
        assert!(matches!(r, Err(Error::EntryNotInSystem { .. })));
    }

    #[test]
    fn order_norm_examples() {
        let v = OperatorSystemSpace::full(2);
        let zero = LevelElement::from_hermitian_coeffs(&v, &DVector::zeros(v.basis_len()));
        assert_eq!(order_norm_hermitian(&v, &zero).unwrap(), 0.0);

        let p = LevelElement::from_block(&v, HermitianMatrix::from_diagonal(&[1.0, 0.0])).unwrap();
        assert!((order_norm_hermitian(&v, &p).unwrap() - 1.0).abs() < 1e-12);

        let x = LevelElement::from_block(&v, HermitianMatrix::from_diagonal(&[1.0, -3.0])).unwrap();
        assert!((order_norm_hermitian(&v, &x).unwrap() - 3.0).abs() < 1e-12);
        assert_eq!(
            minimal_order_norm_hermitian(&v, &x).unwrap(),
            order_norm_hermitian(&v, &x).unwrap()
        );
    }

    #[test]
    fn order_norm_vanishes_only_at_zero() {
        let v = OperatorSystemSpace::full(2);
        let mut rng = crate::sampling::rng_from_seed(12);
        for _ in 0..15 {
            let x = crate::sampling::random_hermitian_element(&v, 2, &mut rng);
            let norm = order_norm_hermitian(&v, &x).unwrap();
            assert!((norm == 0.0) == (x.block().norm_fro() < 1e-14));
        }
    }

    #[test]
    fn archimedean_shift_property() {
        // Membership of x + eps*e_n for the whole schedule bounds lambda_min.
        let v = OperatorSystemSpace::full(3);
        let mut rng = crate::sampling::rng_from_seed(14);
        for _ in 0..15 {
            let y = crate::sampling::random_hermitian_element(&v, 1, &mut rng);
            // Shift so that x + 1e-6*e is PSD but x itself is on the edge.
            let lm = y.block().lambda_min();
            let shift = DMatrix::<C64>::identity(3, 3) * C64::new(-lm - 5e-7, 0.0);
            let x = LevelElement::from_block(
                &v,
                HermitianMatrix::symmetrized(y.block().matrix() + shift).unwrap(),
            )
            .unwrap();
            let all_member = [1e-2, 1e-4, 1e-6].iter().all(|&eps| {
                let shifted = x.block().matrix() + DMatrix::<C64>::identity(3, 3) * C64::new(eps, 0.0);
                matlin::is_psd(&shifted, 1e-8).unwrap()
            });
            if all_member {
                assert!(x.block().lambda_min() >= -1e-5);
            }
        }
    }

    #[test]
    fn order_unit_check_passes() {
        let v = OperatorSystemSpace::full(3);
        let report = matrix_order_unit_check(&v, 3, 25, 7);
        assert_eq!(report.failures, 0);
        assert!(report.worst_margin >= -1e-8);
    }

    #[test]
    fn direct_sum_stays_in_cone() {
        // Matrix-ordering axiom: members of C_n and C_m give a member of C_{n+m}.
        let v = OperatorSystemSpace::full(2);
        let mut rng = crate::sampling::rng_from_seed(3);
        for _ in 0..20 {
            let x = crate::sampling::random_hermitian_element(&v, 1, &mut rng);
            let y = crate::sampling::random_hermitian_element(&v, 2, &mut rng);
            let shift = |z: &LevelElement| {
                let lm = z.block().lambda_min();
                z.block().matrix() + DMatrix::<C64>::identity(z.block().dim(), z.block().dim())
                    * C64::new(lm.abs() + 0.1, 0.0)
            };
            let xs = shift(&x);
            let ys = shift(&y);
            let mut sum = DMatrix::<C64>::zeros(6, 6);
            sum.view_mut((0, 0), (2, 2)).copy_from(&xs);
            sum.view_mut((2, 2), (4, 4)).copy_from(&ys);
            assert!(is_psd(&sum, 1e-8).unwrap());
        }
    }
}
