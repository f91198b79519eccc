//! Quotient operator systems `V/J_p`.
//!
//! Coset representatives live in the Frobenius-orthogonal complement of the
//! kernel `J_p` inside the Hermitian part of `V`, which makes reduction
//! idempotent and basis-independent up to orthogonal changes. The quotient
//! cone at level n asks for a kernel shift `j ∈ M_n(J)` with `x + j ∈ C(p_n)`.
//!
//! For projections the search collapses: `p_n·M_n(J)·p_n = 0`, so membership
//! is equivalent to `p_n x p_n ⪰ 0` and is decided spectrally. For general
//! contractions the shift is found by projected subgradient ascent on the
//! jointly concave objective
//! `F(c, t) = λ_min(x + Σ_k c_k j_k + eps·p_n + t·q_n)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::certificate::{ConeCertificate, EpsilonStep};
use crate::compression::{
    compute_j, gram_schmidt_hermitian, maximize_lambda_min_over_t,
    ContractionData, JSubspace, MembershipParams,
};
use crate::error::Error;
use crate::matlin::{
    self, block_at, frobenius_inner, hermitian_eigenvalues, lambda_min_with_vector, C64,
    HermitianMatrix,
};
use crate::opsys::LevelElement;
use crate::sampling;
use crate::Result;

/// The quotient `V/J_p` with its unit coset `p + J_p`.
#[derive(Debug, Clone)]
pub struct QuotientSystem {
    contraction: ContractionData,
    j: JSubspace,
    /// Orthonormal Hermitian basis of the complement of `J` inside `V_h`.
    reps: Vec<HermitianMatrix>,
    /// Coordinates of the reduced unit `p + J_p` over `reps`.
    unit_coset: DVector<f64>,
    /// Columns spanning `range(p)` when `p` is a projection.
    corner_isometry: Option<DMatrix<C64>>,
}

/// A level-n coset: the original representative plus its canonical
/// (kernel-orthogonal) representative, as raw Hermitian blocks.
#[derive(Debug, Clone)]
pub struct CosetElement {
    level: usize,
    representative: HermitianMatrix,
    reduced: HermitianMatrix,
}

impl CosetElement {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn representative(&self) -> &HermitianMatrix {
        &self.representative
    }

    pub fn reduced(&self) -> &HermitianMatrix {
        &self.reduced
    }

    /// Frobenius norm of the canonical representative; zero exactly for the
    /// zero coset.
    pub fn norm(&self) -> f64 {
        self.reduced.norm_fro()
    }
}

impl QuotientSystem {
    pub fn contraction(&self) -> &ContractionData {
        &self.contraction
    }

    pub fn kernel(&self) -> &JSubspace {
        &self.j
    }

    pub fn reps(&self) -> &[HermitianMatrix] {
        &self.reps
    }

    pub fn dim(&self) -> usize {
        self.reps.len()
    }

    pub fn unit_coset(&self) -> &DVector<f64> {
        &self.unit_coset
    }

    /// Coordinates of a (possibly non-Hermitian) d×d matrix over `reps`,
    /// after reduction mod `J`.
    pub fn coset_coords(&self, x: &DMatrix<C64>) -> DVector<C64> {
        DVector::from_iterator(
            self.reps.len(),
            self.reps.iter().map(|r| frobenius_inner(r.matrix(), x)),
        )
    }
}

/// Builds the quotient `V/J_p`.
///
/// Requires the contraction to have unit order norm (`‖p‖ = 1` within 1e-8);
/// otherwise `p ∈ J_p`, the quotient unit degenerates, and [`Error::TrivialUnit`]
/// is raised.
pub fn build_quotient(c: &ContractionData, params: &MembershipParams) -> Result<QuotientSystem> {
    let norm = c.p().norm_spectral();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::TrivialUnit { norm });
    }
    build_quotient_unchecked(c, params)
}

/// Quotient construction without the unit-norm precondition.
///
/// When `‖p‖ < 1` every direction is in the kernel and the quotient is the
/// zero space; the projection detector uses this to produce witnesses for
/// inputs that fail the norm precheck.
pub fn build_quotient_unchecked(
    c: &ContractionData,
    params: &MembershipParams,
) -> Result<QuotientSystem> {
    let j = compute_j(c, params)?;
    let v = c.system();

    // Complement of J inside V_h: strip kernel components from the
    // orthonormal system basis, then re-orthonormalize.
    let stripped: Vec<HermitianMatrix> = v
        .ortho_basis()
        .iter()
        .map(|o| {
            let resid = o.matrix() - j.project(o.matrix());
            HermitianMatrix::symmetrized(resid).expect("projection of Hermitian")
        })
        .collect();
    let reps = gram_schmidt_hermitian(&stripped, 1e-8);
    if reps.len() + j.dim() != v.basis_len() {
        return Err(Error::InvariantViolation {
            which: format!(
                "dim(reps) + dim(J) = {} + {} != dim(V) = {}",
                reps.len(),
                j.dim(),
                v.basis_len()
            ),
        });
    }

    let unit_coset = DVector::from_iterator(
        reps.len(),
        reps.iter().map(|r| frobenius_inner(r.matrix(), c.p().matrix()).re),
    );

    let corner_isometry = if c.is_projection() { Some(range_isometry(c.p())) } else { None };
    Ok(QuotientSystem { contraction: c.clone(), j, reps, unit_coset, corner_isometry })
}

/// Canonical coset representative: subtracts the Frobenius-orthogonal
/// projection onto `M_n(J)` (entrywise projection onto `J`). Idempotent.
pub fn coset_reduce(q: &QuotientSystem, x: &LevelElement) -> Result<CosetElement> {
    x.compatible_with(q.contraction.system())?;
    coset_reduce_block(q, x.block())
}

/// Reduction of a raw Hermitian block whose entries are known to lie in the
/// system (all internal callers construct them from validated elements).
pub fn coset_reduce_block(q: &QuotientSystem, x: &HermitianMatrix) -> Result<CosetElement> {
    let d = q.contraction.system().ambient_dim();
    if x.dim() % d != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("multiple of ambient dimension {d}"),
            got: format!("{}", x.dim()),
        });
    }
    let n = x.dim() / d;
    let mut blocks = Vec::with_capacity(n * n);
    for i in 0..n {
        for jj in 0..n {
            let entry = block_at(x.matrix(), i, jj, d);
            blocks.push(&entry - q.j.project(&entry));
        }
    }
    let reduced_block = matlin::assemble_blocks(&blocks, n, d);
    let reduced = HermitianMatrix::symmetrized(reduced_block)?;
    Ok(CosetElement { level: n, representative: x.clone(), reduced })
}

/// Decides membership of a coset in the quotient cone
/// `C~(p_n) = { x + M_n(J) : x ∈ C(p_n) }`.
pub fn quotient_cone_membership(
    q: &QuotientSystem,
    xc: &CosetElement,
    params: &MembershipParams,
) -> Result<ConeCertificate> {
    params.validate()?;
    let c = &q.contraction;
    let n = xc.level();
    let z = xc.reduced.matrix();

    if c.is_projection() {
        // Kernel shifts vanish under compression, so the coset is a member
        // exactly when the compressed representative is PSD. The corner
        // isometry keeps the eigensolve at the rank of p_n.
        let w = q.corner_isometry.as_ref().expect("projection quotient has a corner isometry");
        let w_n = matlin::kron(&DMatrix::identity(n, n), w);
        let compressed = w_n.adjoint() * z * &w_n;
        let lm = hermitian_eigenvalues(&compressed)[0];
        return Ok(ConeCertificate::direct(lm, params.tol));
    }

    // General path: projected subgradient ascent over shift coefficients and
    // the complement multiplier, jointly concave.
    let shift_basis = q.j.amplify(n);
    let p_n = c.p_level(n);
    let q_n = c.q_level(n);
    let k = shift_basis.len();

    let mut trace = Vec::with_capacity(params.eps_schedule.len());
    let mut cap_any = false;
    let mut final_val = f64::NEG_INFINITY;
    let mut final_coeffs = vec![0.0; k];

    for &eps in &params.eps_schedule {
        let base = z + &p_n * C64::new(eps, 0.0);
        let warm = maximize_lambda_min_over_t(&base, &q_n, params.t_cap, params.rel_width);
        cap_any |= warm.cap_reached;

        let mut best_val = warm.best_val;
        let mut best_t = warm.best_t;
        let mut best_c = vec![0.0; k];

        if k > 0 && best_val < 0.0 {
            let eval = |cv: &[f64], t: f64| -> (f64, DVector<C64>) {
                let mut m = &base + &q_n * C64::new(t, 0.0);
                for (ck, b) in cv.iter().zip(shift_basis.iter()) {
                    m += b.matrix() * C64::new(*ck, 0.0);
                }
                lambda_min_with_vector(&m)
            };
            let scale = xc.reduced.norm_spectral().max(1.0);
            let mut rng = sampling::rng_from_seed(params.seed);
            'restarts: for restart in 0..params.ascent_restarts {
                let mut cv = vec![0.0; k];
                let mut t = warm.best_t;
                if restart > 0 {
                    for ck in cv.iter_mut() {
                        *ck = rng.random_range(-0.5..0.5) * scale;
                    }
                    t = warm.best_t * rng.random_range(0.5..2.0) + rng.random_range(0.0..1.0);
                }
                for iter in 1..=params.ascent_iters {
                    let (val, vec) = eval(&cv, t);
                    if val > best_val {
                        best_val = val;
                        best_t = t;
                        best_c.copy_from_slice(&cv);
                        if best_val >= 0.0 {
                            break 'restarts;
                        }
                    }
                    let step = scale / (iter as f64).sqrt();
                    for (ck, b) in cv.iter_mut().zip(shift_basis.iter()) {
                        let g = (vec.adjoint() * b.matrix() * &vec)[(0, 0)].re;
                        *ck += step * g;
                    }
                    let gt = (vec.adjoint() * &q_n * &vec)[(0, 0)].re;
                    t = (t + step * gt).max(0.0);
                }
            }
        }

        trace.push(EpsilonStep { epsilon: eps, best_t, lambda_min: best_val });
        final_val = best_val;
        final_coeffs = best_c;
    }

    Ok(ConeCertificate::classify(
        final_val,
        params.tol,
        trace,
        cap_any,
        Some(final_coeffs),
    ))
}

/// Isometry whose columns span `range(p)` for a projection `p`.
pub fn range_isometry(p: &HermitianMatrix) -> DMatrix<C64> {
    let (vals, vecs) = matlin::hermitian_eigen(p.matrix());
    let cols: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 0.5).collect();
    let mut w = DMatrix::zeros(p.dim(), cols.len());
    for (out, &i) in cols.iter().enumerate() {
        w.set_column(out, &vecs.column(i));
    }
    w
}

/// Agreement report between the quotient cone and the concrete compression
/// `p_n x p_n` restricted to `range(p_n)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IsoReport {
    pub instances: usize,
    pub compared: usize,
    pub agreements: usize,
    pub skipped_boundary: usize,
    /// Worst |compressed margin| among compared instances.
    pub worst_margin: f64,
    pub kernel_instances: usize,
    /// Largest compressed spectral norm over kernel instances (should be ~0).
    pub kernel_worst_value: f64,
}

impl IsoReport {
    pub fn all_agree(&self) -> bool {
        self.compared == self.agreements
    }
}

/// Randomized check that the quotient is completely order isomorphic to the
/// concrete compression: for random Hermitian `x ∈ M_n(V)`, membership of
/// `x + M_n(J)` agrees with positivity of `W_n* x W_n` where `W` spans
/// `range(p)`. Boundary cases with margin below `margin_filter` are skipped.
pub fn compression_iso_check(
    q: &QuotientSystem,
    n_max: usize,
    trials: usize,
    seed: u64,
    params: &MembershipParams,
    margin_filter: f64,
) -> Result<IsoReport> {
    let c = &q.contraction;
    if !c.is_projection() {
        return Err(Error::NotAProjection { defect: c.projection_defect() });
    }
    let w = range_isometry(c.p());
    let mut rng = sampling::rng_from_seed(seed);
    let mut report = IsoReport {
        instances: 0,
        compared: 0,
        agreements: 0,
        skipped_boundary: 0,
        worst_margin: f64::INFINITY,
        kernel_instances: 0,
        kernel_worst_value: 0.0,
    };

    for _ in 0..trials {
        let n = rng.random_range(1..=n_max);
        let x = sampling::random_hermitian_element(c.system(), n, &mut rng);
        report.instances += 1;

        let w_n = matlin::kron(&DMatrix::identity(n, n), &w);
        let compressed = w_n.adjoint() * x.block().matrix() * &w_n;
        let margin = hermitian_eigenvalues(&compressed)[0];
        if margin.abs() <= margin_filter {
            report.skipped_boundary += 1;
            continue;
        }

        let coset = coset_reduce(q, &x)?;
        let quotient_member = quotient_cone_membership(q, &coset, params)?.is_member();
        let compressed_member = margin >= -params.tol;

        report.compared += 1;
        if quotient_member == compressed_member {
            report.agreements += 1;
        }
        report.worst_margin = report.worst_margin.min(margin.abs());
    }
    Ok(report)
}

/// Random element of `M_n(J)` (real coefficients over the amplified kernel
/// basis); used to exercise the zero-compression branch of the isomorphism.
pub fn random_kernel_element(
    q: &QuotientSystem,
    n: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<LevelElement> {
    let basis = q.j.amplify(n);
    let d = q.contraction.system().ambient_dim();
    let mut acc = DMatrix::<C64>::zeros(n * d, n * d);
    for b in &basis {
        acc += b.matrix() * C64::new(rng.random_range(-1.0..1.0), 0.0);
    }
    LevelElement::from_block(q.contraction.system(), HermitianMatrix::symmetrized(acc)?)
}

/// Exercises the kernel branch of the isomorphism: elements of `M_n(J)` must
/// be members on both sides with compressed value ~0.
pub fn kernel_iso_instances(
    q: &QuotientSystem,
    n_max: usize,
    trials: usize,
    seed: u64,
    params: &MembershipParams,
    report: &mut IsoReport,
) -> Result<()> {
    let c = &q.contraction;
    let w = range_isometry(c.p());
    let mut rng = sampling::rng_from_seed(seed ^ 0x6a5f);
    for _ in 0..trials {
        let n = rng.random_range(1..=n_max);
        let x = random_kernel_element(q, n, &mut rng)?;
        let coset = coset_reduce(q, &x)?;
        let quotient_member = quotient_cone_membership(q, &coset, params)?.is_member();

        let w_n = matlin::kron(&DMatrix::identity(n, n), &w);
        let compressed = w_n.adjoint() * x.block().matrix() * &w_n;
        let value = compressed.norm();
        let compressed_member = hermitian_eigenvalues(&compressed)[0] >= -params.tol;

        report.instances += 1;
        report.kernel_instances += 1;
        report.kernel_worst_value = report.kernel_worst_value.max(value);
        report.compared += 1;
        if quotient_member && compressed_member {
            report.agreements += 1;
        }
    }
    Ok(())
}

/// Report of the randomized complete-positivity check of the quotient map.
#[derive(Debug, Clone, serde::Serialize)]
pub struct UcpReport {
    pub trials: usize,
    pub failures: usize,
}

/// Verifies that `x ∈ C_n` implies membership of `x + M_n(J)`, i.e. that the
/// quotient map is (completely) positive at sampled levels.
pub fn quotient_map_ucp_check(
    q: &QuotientSystem,
    n_max: usize,
    trials: usize,
    seed: u64,
    params: &MembershipParams,
) -> Result<UcpReport> {
    let v = q.contraction.system();
    let mut rng = sampling::rng_from_seed(seed);
    let mut failures = 0;
    for trial in 0..trials {
        let n = rng.random_range(1..=n_max);
        let y = sampling::random_hermitian_element(v, n, &mut rng);
        // Shift to a PSD element of M_n(V); alternate between strictly
        // positive and singular PSD instances.
        let lm = y.block().lambda_min();
        let offset = if trial % 2 == 0 { lm.abs() + 0.2 } else { -lm };
        let block = y.block().matrix()
            + DMatrix::<C64>::identity(y.block().dim(), y.block().dim()) * C64::new(offset, 0.0);
        let x = LevelElement::from_block(v, HermitianMatrix::symmetrized(block)?)?;
        debug_assert!(x.block().lambda_min() >= -params.tol);

        let coset = coset_reduce(q, &x)?;
        if !quotient_cone_membership(q, &coset, params)?.is_member() {
            failures += 1;
        }
    }
    Ok(UcpReport { trials, failures })
}
