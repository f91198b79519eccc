//! Seeded random generators for systems, projections, and level elements.
//!
//! All randomness flows through `ChaCha8` so that a fixed seed reproduces
//! byte-identical certificates on every platform.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matlin::{C64, HermitianMatrix};
use crate::opsys::{LevelElement, OperatorSystemSpace};

/// Deterministic RNG used across the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Random Hermitian element of `M_n(V)` with standard-normal coefficients.
pub fn random_hermitian_element(
    v: &OperatorSystemSpace,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> LevelElement {
    let m = v.basis_len();
    let mut coeffs = vec![vec![DVector::<C64>::zeros(m); n]; n];
    for i in 0..n {
        for k in 0..m {
            coeffs[i][i][k] = C64::new(normal(rng), 0.0);
        }
        for j in (i + 1)..n {
            for k in 0..m {
                let z = C64::new(
                    normal(rng) * std::f64::consts::FRAC_1_SQRT_2,
                    normal(rng) * std::f64::consts::FRAC_1_SQRT_2,
                );
                coeffs[i][j][k] = z;
                coeffs[j][i][k] = z.conj();
            }
        }
    }
    LevelElement::from_coeffs(v, coeffs).expect("random element")
}

/// Haar-ish random unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<C64> {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
    let qr = g.qr();
    qr.q()
}

/// Random rank-r orthogonal projection in `M_d`.
pub fn random_projection(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    assert!(rank <= d);
    let u = random_unitary(d, rng);
    let mut diag = DMatrix::<C64>::zeros(d, d);
    for i in 0..rank {
        diag[(i, i)] = C64::new(1.0, 0.0);
    }
    HermitianMatrix::symmetrized(&u * diag * u.adjoint()).expect("projection")
}

/// Random PSD matrix with unit-scale spectrum.
pub fn random_psd(d: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
    let psd = &g * g.adjoint() / C64::new(d as f64, 0.0);
    HermitianMatrix::symmetrized(psd).expect("gram matrix")
}

/// Random operator system `V ⊆ M_d` containing the identity and a designated
/// projection, padded with `extra` random Hermitian directions.
///
/// Returns the system together with the projection (guaranteed to lie in it).
pub fn random_system_with_projection(
    d: usize,
    rank: usize,
    extra: usize,
    rng: &mut ChaCha8Rng,
) -> (OperatorSystemSpace, HermitianMatrix) {
    // Trivial ranks make p a multiple of the identity and the basis
    // degenerate.
    assert!(rank >= 1 && rank < d);
    let p = random_projection(d, rank, rng);
    loop {
        let mut basis = vec![HermitianMatrix::identity(d), p.clone()];
        for _ in 0..extra {
            let g = DMatrix::from_fn(d, d, |_, _| C64::new(normal(rng), normal(rng)));
            let h = (&g + g.adjoint()) * C64::new(0.5, 0.0);
            basis.push(HermitianMatrix::symmetrized(h).unwrap());
        }
        // Rank-1 projections in M_1, or unlucky draws, can collide; retry.
        match OperatorSystemSpace::new(basis) {
            Ok(v) => return (v, p),
            Err(_) => continue,
        }
    }
}

/// Random density matrix (PSD, unit trace).
pub fn random_state(d: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
    let psd = random_psd(d, rng);
    let tr: f64 = (0..d).map(|i| psd.matrix()[(i, i)].re).sum();
    HermitianMatrix::symmetrized(psd.matrix() / C64::new(tr, 0.0)).expect("state")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matlin;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = rng_from_seed(1);
        let u = random_unitary(4, &mut rng);
        let defect = (u.adjoint() * &u - DMatrix::<C64>::identity(4, 4)).norm();
        assert!(defect < 1e-10);
    }

    #[test]
    fn projection_is_projection() {
        let mut rng = rng_from_seed(2);
        let p = random_projection(5, 2, &mut rng);
        let defect = (p.matrix() * p.matrix() - p.matrix()).norm();
        assert!(defect < 1e-10);
        let trace: f64 = (0..5).map(|i| p.matrix()[(i, i)].re).sum();
        assert!((trace - 2.0).abs() < 1e-10);
    }

    #[test]
    fn psd_kron_psd_is_psd() {
        // Kronecker products of PSD factors stay PSD.
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            let a = random_psd(3, &mut rng);
            let b = random_psd(2, &mut rng);
            let k = matlin::kron(a.matrix(), b.matrix());
            assert!(matlin::is_psd(&k, 1e-8).unwrap());
        }
    }

    #[test]
    fn psd_conjugation_invariance() {
        // is_psd is invariant under unitary conjugation.
        let mut rng = rng_from_seed(4);
        for _ in 0..10 {
            let v = OperatorSystemSpace::full(3);
            let x = random_hermitian_element(&v, 1, &mut rng);
            let u = random_unitary(3, &mut rng);
            let conj = u.adjoint() * x.block().matrix() * &u;
            let before = matlin::is_psd(x.block().matrix(), 1e-8).unwrap();
            let after = matlin::is_psd(&conj, 1e-8).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn state_has_unit_trace() {
        let mut rng = rng_from_seed(5);
        let rho = random_state(4, &mut rng);
        let tr: f64 = (0..4).map(|i| rho.matrix()[(i, i)].re).sum();
        assert!((tr - 1.0).abs() < 1e-12);
        assert!(rho.lambda_min() >= -1e-12);
    }

    #[test]
    fn fixed_seed_reproduces() {
        let v = OperatorSystemSpace::full(2);
        let a = random_hermitian_element(&v, 2, &mut rng_from_seed(42));
        let b = random_hermitian_element(&v, 2, &mut rng_from_seed(42));
        assert_eq!(a.block().matrix(), b.block().matrix());
    }
}
