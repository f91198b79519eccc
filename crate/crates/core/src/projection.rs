//! Abstract projections and their detection.
//!
//! A positive contraction `p` of unit order norm is an abstract projection
//! when `x ↦ [[x, x], [x, x]] + J_{p⊕q}` is a complete order isomorphism
//! into `M_2(V)/J_{p⊕q}` (`q = e - p`). Concrete projections always satisfy
//! this; the converse fails at some finite matrix level for non-projections,
//! and the detector hunts for such a witness: an `x` whose double-block coset
//! is positive in the quotient while `x` itself has a markedly negative
//! eigenvalue.
//!
//! The detector is a semi-decision procedure: a rejection is sound (the
//! witness is re-checkable), while certification only covers levels up to
//! `n_max` because no finite level bound is available.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::certificate::ConeCertificate;
use crate::compression::{
    amplified_hermitian_basis, direct_sum_contraction, ContractionData, MembershipParams,
};
use crate::error::Error;
use crate::io::MatrixJson;
use crate::matlin::{self, block2, hermitian_eigenvalues, C64, HermitianMatrix};
use crate::opsys::LevelElement;
use crate::quotient::{
    build_quotient_unchecked, coset_reduce_block, quotient_cone_membership, CosetElement,
    QuotientSystem,
};
use crate::sampling;
use crate::Result;

/// Detector outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionStatus {
    /// No witness exists at any level up to the stated bound.
    CertifiedUpTo(usize),
    Rejected,
}

/// A self-certifying counterexample: re-evaluation must reproduce quotient
/// membership (margin ≥ -tol) and ambient negativity (λ_min ≤ -10·tol).
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub level: usize,
    pub block: MatrixJson,
    pub quotient_certificate: ConeCertificate,
    pub ambient_lambda_min: f64,
}

/// Results of the cheap preconditions checked before the witness search.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Prechecks {
    /// `0 ⪯ p ⪯ e` within 1e-8.
    pub contraction_ok: bool,
    /// `‖p‖ = 1` within 1e-8 (equivalently `p ∉ J_p`).
    pub unit_norm_ok: bool,
    /// The double-block map is unital, via the explicit scalar witnesses.
    pub unitality_ok: bool,
}

/// Verdict of the abstract-projection detector.
#[derive(Debug, Clone, Serialize)]
pub struct ProjectionVerdict {
    pub status: ProjectionStatus,
    pub witness: Option<Witness>,
    pub prechecks: Prechecks,
}

impl ProjectionVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self.status, ProjectionStatus::CertifiedUpTo(_))
    }
}

/// Detector configuration.
#[derive(Debug, Clone)]
pub struct DetectorConfig {
    pub n_max: usize,
    /// Random draws per level; also caps the deterministic sweep at
    /// `4·budget` candidates per level.
    pub budget: usize,
    pub seed: u64,
    pub params: MembershipParams,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { n_max: 3, budget: 2000, seed: 0, params: MembershipParams::default() }
    }
}

/// Cached context for queries against `M_2(V)/J_{p⊕q}`.
pub struct DoubleBlockContext {
    contraction: ContractionData,
    direct_sum: ContractionData,
    quotient: QuotientSystem,
}

impl DoubleBlockContext {
    /// Builds the direct-sum contraction `p ⊕ q` over `M_2(V)` and its
    /// quotient. The quotient may be trivial when `‖p‖ < 1`; membership
    /// queries remain meaningful (everything is then a member).
    pub fn new(c: &ContractionData, params: &MembershipParams) -> Result<Self> {
        let direct_sum = direct_sum_contraction(c)?;
        let quotient = build_quotient_unchecked(&direct_sum, params)?;
        Ok(Self { contraction: c.clone(), direct_sum, quotient })
    }

    pub fn contraction(&self) -> &ContractionData {
        &self.contraction
    }

    pub fn direct_sum(&self) -> &ContractionData {
        &self.direct_sum
    }

    pub fn quotient(&self) -> &QuotientSystem {
        &self.quotient
    }

    /// The double-block map: forms `[[x, x], [x, x]]` at level n, shuffles it
    /// into `M_n(M_2(V))`, and reduces mod `M_n(J_{p⊕q})`. The doubled block
    /// has all entries in `M_2(V)` by construction, so the reduction works on
    /// the raw block.
    pub fn pi(&self, x: &LevelElement) -> Result<CosetElement> {
        x.compatible_with(self.contraction.system())?;
        self.pi_block(x.block(), x.level())
    }

    /// Double-block map on a raw Hermitian block with entries in `V`.
    pub fn pi_block(&self, x: &HermitianMatrix, n: usize) -> Result<CosetElement> {
        let d = self.contraction.system().ambient_dim();
        let xm = x.matrix();
        let doubled = block2(xm, xm, xm, xm);
        let shuffled = matlin::canonical_shuffle(&doubled, 2, n, d)?;
        coset_reduce_block(&self.quotient, &HermitianMatrix::symmetrized(shuffled)?)
    }

    /// Membership of `pi(x)` in the quotient cone.
    pub fn pi_membership(&self, x: &LevelElement, params: &MembershipParams) -> Result<ConeCertificate> {
        let coset = self.pi(x)?;
        quotient_cone_membership(&self.quotient, &coset, params)
    }
}

/// `[[a, x], [x*, b]] ∈ C((p⊕q)_n)`, decided through the single-matrix
/// compression test for projections and through the epsilon/t search on the
/// 2×2 block arrangement otherwise.
pub fn block_cone_membership(
    c: &ContractionData,
    a: &LevelElement,
    b: &LevelElement,
    x_offdiag: &DMatrix<C64>,
    params: &MembershipParams,
) -> Result<bool> {
    a.compatible_with(c.system())?;
    b.compatible_with(c.system())?;
    let n = a.level();
    if b.level() != n || x_offdiag.nrows() != a.block().dim() || x_offdiag.ncols() != a.block().dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("three blocks of size {}", a.block().dim()),
            got: format!("b: {}, x: {}x{}", b.block().dim(), x_offdiag.nrows(), x_offdiag.ncols()),
        });
    }
    // Entries of the off-diagonal block must lie in V.
    let d = c.system().ambient_dim();
    for i in 0..n {
        for j in 0..n {
            let entry = matlin::block_at(x_offdiag, i, j, d);
            if c.system().contains(&entry)?.is_none() {
                return Err(Error::EntryNotInSystem { row: i, col: j, residual: f64::NAN });
            }
        }
    }

    let p_n = c.p_level(n);
    let q_n = c.q_level(n);
    if c.is_projection() {
        let combined = &p_n * a.block().matrix() * &p_n
            + &p_n * x_offdiag * &q_n
            + &q_n * x_offdiag.adjoint() * &p_n
            + &q_n * b.block().matrix() * &q_n;
        return matlin::is_psd(&combined, params.tol);
    }

    // General contraction: test the block against C(p_n ⊕ q_n), which the
    // canonical shuffle identifies with C((p⊕q)_n).
    let block = block2(a.block().matrix(), x_offdiag, &x_offdiag.adjoint(), b.block().matrix());
    let p_dir = block2(&p_n, &DMatrix::zeros(n * d, n * d), &DMatrix::zeros(n * d, n * d), &q_n);
    let q_dir = block2(&q_n, &DMatrix::zeros(n * d, n * d), &DMatrix::zeros(n * d, n * d), &p_n);
    let cert = crate::compression::eps_t_membership(&block, &p_dir, &q_dir, params)?;
    Ok(cert.is_member())
}

/// Verifies unitality of the double-block map through the closed-form
/// certificates: with `t = 1/eps` (positive sign) and `t = 1 + 1/eps`
/// (negative sign), the shifted differences
/// `±([[p,p],[p,p]] - [[p,0],[0,0]])` and `±([[q,q],[q,q]] - [[0,0],[0,q]])`
/// become PSD.
pub fn unitality_check(c: &ContractionData, params: &MembershipParams) -> Result<bool> {
    let d = c.p().dim();
    let zero = DMatrix::<C64>::zeros(d, d);
    let p = c.p().matrix();
    let q = c.q().matrix();
    let p_dir = block2(p, &zero, &zero, q);
    let q_dir = block2(q, &zero, &zero, p);
    // Differences of the two coset representatives.
    let diff_p = block2(&zero, p, p, p);
    let diff_q = block2(q, q, q, &zero);

    let mut ok = true;
    for &eps in &params.eps_schedule {
        for (diff, sign, t) in [
            (&diff_p, 1.0, 1.0 / eps),
            (&diff_p, -1.0, 1.0 + 1.0 / eps),
            (&diff_q, 1.0, 1.0 / eps),
            (&diff_q, -1.0, 1.0 + 1.0 / eps),
        ] {
            let shifted =
                diff * C64::new(sign, 0.0) + &p_dir * C64::new(eps, 0.0) + &q_dir * C64::new(t, 0.0);
            let lm = hermitian_eigenvalues(&shifted)[0];
            // Entries scale like 1/eps; loosen the floor accordingly.
            let floor = params.tol * (1.0 / eps).max(1.0).sqrt();
            if lm < -floor {
                ok = false;
            }
        }
    }
    Ok(ok)
}

/// Asserts the level-n biconditional `x ∈ C_n ⟺ pi(x) ∈ quotient cone`,
/// returning whether the two decisions agree.
pub fn forward_check(
    ctx: &DoubleBlockContext,
    x: &LevelElement,
    params: &MembershipParams,
) -> Result<bool> {
    let ambient = crate::opsys::cone_membership(ctx.contraction().system(), x, params.tol)?;
    let quotient = ctx.pi_membership(x, params)?;
    Ok(ambient.is_member() == quotient.is_member())
}

/// Ground truth for concrete representations: `‖p² - p‖_F < tol`.
pub fn spectral_projection_oracle(p: &HermitianMatrix, tol: f64) -> bool {
    (p.matrix() * p.matrix() - p.matrix()).norm() < tol
}

/// Runs the abstract-projection detector.
///
/// Prechecks: `0 ⪯ p ⪯ e`, `‖p‖ = 1` within 1e-8, and unitality of the
/// double-block map. The witness search then sweeps Hermitian coordinate
/// directions and their pairwise combinations, followed by seeded random
/// draws with greedy local refinement of the
/// `[quotient margin] - [ambient λ_min]` gap. A witness must satisfy
/// `quotient margin ≥ -tol` and `λ_min(x) ≤ -10·tol`; the separation factor
/// keeps numerical noise from masquerading as a counterexample.
pub fn is_abstract_projection(c: &ContractionData, cfg: &DetectorConfig) -> Result<ProjectionVerdict> {
    let params = &cfg.params;
    let prechecks = Prechecks {
        contraction_ok: c.p().lambda_min() >= -1e-8 && c.q().lambda_min() >= -1e-8,
        unit_norm_ok: (c.p().norm_spectral() - 1.0).abs() <= 1e-8,
        unitality_ok: unitality_check(c, params)?,
    };

    let ctx = DoubleBlockContext::new(c, params)?;
    let v = c.system();
    let ambient_threshold = -10.0 * params.tol;

    // Evaluates a candidate once: ambient floor first (cheap), then the
    // quotient certificate. Returns the pieces so callers can reuse them.
    let evaluate = |block: &HermitianMatrix, n: usize| -> Result<(f64, Option<ConeCertificate>)> {
        let ambient = block.lambda_min();
        if ambient > ambient_threshold {
            return Ok((ambient, None));
        }
        let coset = ctx.pi_block(block, n)?;
        let cert = quotient_cone_membership(&ctx.quotient, &coset, params)?;
        Ok((ambient, Some(cert)))
    };
    let witness_from = |block: &HermitianMatrix, n: usize, ambient: f64, cert: ConeCertificate| {
        Witness {
            level: n,
            block: MatrixJson::from_matrix(block.matrix()),
            quotient_certificate: cert,
            ambient_lambda_min: ambient,
        }
    };

    for n in 1..=cfg.n_max {
        // Deterministic sweep: coordinate directions, then pairwise
        // combinations, truncated by the budget.
        let directions = amplified_hermitian_basis(v.ortho_basis(), n);
        let mut candidates: Vec<DMatrix<C64>> = Vec::new();
        let cap = cfg.budget.max(2 * directions.len());
        'collect: {
            for u in &directions {
                candidates.push(u.matrix().clone());
                candidates.push(-u.matrix());
                if candidates.len() >= cap {
                    break 'collect;
                }
            }
            let s = std::f64::consts::FRAC_1_SQRT_2;
            for i in 0..directions.len() {
                for j in (i + 1)..directions.len() {
                    for sign in [1.0, -1.0] {
                        let combo = (directions[i].matrix()
                            + directions[j].matrix() * C64::new(sign, 0.0))
                            * C64::new(s, 0.0);
                        candidates.push(-&combo);
                        candidates.push(combo);
                        if candidates.len() >= cap {
                            break 'collect;
                        }
                    }
                }
            }
        }
        for cand in candidates {
            let block = HermitianMatrix::symmetrized(cand)?;
            let (ambient, cert) = evaluate(&block, n)?;
            if let Some(cert) = cert {
                if cert.is_member() {
                    return Ok(ProjectionVerdict {
                        status: ProjectionStatus::Rejected,
                        witness: Some(witness_from(&block, n, ambient, cert)),
                        prechecks,
                    });
                }
            }
        }

        // Randomized draws, pre-generated from the seed so the verdict does
        // not depend on evaluation order.
        let mut rng = sampling::rng_from_seed(cfg.seed ^ (n as u64));
        let mut best_gap = f64::NEG_INFINITY;
        let mut best_candidate: Option<HermitianMatrix> = None;
        for _ in 0..cfg.budget {
            let raw = sampling::random_hermitian_element(v, n, &mut rng);
            let scale = raw.block().norm_spectral().max(1e-12);
            let block =
                HermitianMatrix::symmetrized(raw.block().matrix() / C64::new(scale, 0.0))?;
            let (ambient, cert) = evaluate(&block, n)?;
            if let Some(cert) = cert {
                if cert.is_member() {
                    return Ok(ProjectionVerdict {
                        status: ProjectionStatus::Rejected,
                        witness: Some(witness_from(&block, n, ambient, cert)),
                        prechecks,
                    });
                }
                let gap = cert.lambda_min - ambient;
                if gap > best_gap {
                    best_gap = gap;
                    best_candidate = Some(block);
                }
            }
        }

        // Greedy refinement around the most promising draw.
        if let Some(mut x) = best_candidate {
            let mut best_obj = best_gap;
            for _ in 0..20 {
                let noise = sampling::random_hermitian_element(v, n, &mut rng);
                let perturbed = x.matrix() + noise.block().matrix() * C64::new(0.05, 0.0);
                let scale = matlin::hermitian_eigenvalues(&perturbed)
                    .iter()
                    .fold(0.0_f64, |m, &ev| m.max(ev.abs()))
                    .max(1e-12);
                let cand = HermitianMatrix::symmetrized(perturbed / C64::new(scale, 0.0))?;
                let (ambient, cert) = evaluate(&cand, n)?;
                if let Some(cert) = cert {
                    if cert.is_member() {
                        return Ok(ProjectionVerdict {
                            status: ProjectionStatus::Rejected,
                            witness: Some(witness_from(&cand, n, ambient, cert)),
                            prechecks,
                        });
                    }
                    if cert.lambda_min - ambient > best_obj {
                        best_obj = cert.lambda_min - ambient;
                        x = cand;
                    }
                }
            }
        }
    }

    // No witness found. When a precheck failed the element is still not an
    // abstract projection; surface the strongest direct counterexample, the
    // negated unit, which the degenerate quotient accepts.
    if !(prechecks.contraction_ok && prechecks.unit_norm_ok && prechecks.unitality_ok) {
        let minus_e = HermitianMatrix::symmetrized(-v.unit().matrix())?;
        let (ambient, cert) = evaluate(&minus_e, 1)?;
        if let Some(cert) = cert {
            if cert.is_member() {
                return Ok(ProjectionVerdict {
                    status: ProjectionStatus::Rejected,
                    witness: Some(witness_from(&minus_e, 1, ambient, cert)),
                    prechecks,
                });
            }
        }
        return Ok(ProjectionVerdict {
            status: ProjectionStatus::Rejected,
            witness: None,
            prechecks,
        });
    }

    Ok(ProjectionVerdict {
        status: ProjectionStatus::CertifiedUpTo(cfg.n_max),
        witness: None,
        prechecks,
    })
}

/// Re-evaluates a witness against a fresh context; the quotient margin and
/// ambient eigenvalue must reproduce.
pub fn verify_witness(
    c: &ContractionData,
    witness: &Witness,
    params: &MembershipParams,
) -> Result<bool> {
    let ctx = DoubleBlockContext::new(c, params)?;
    let block = HermitianMatrix::symmetrized(witness.block.to_matrix()?)?;
    let coset = ctx.pi_block(&block, witness.level)?;
    let cert = quotient_cone_membership(&ctx.quotient, &coset, params)?;
    Ok(cert.is_member() && block.lambda_min() <= -10.0 * params.tol)
}

/// Linear map out of `M_2(V)/J_{p⊕q}` given by the images of the coset
/// representative basis.
#[derive(Debug, Clone)]
pub struct UcpMapData {
    pub out_dim: usize,
    /// One image per element of `quotient.reps()`.
    pub images: Vec<DMatrix<C64>>,
}

impl UcpMapData {
    /// Evaluates the map on (the coset of) a `2d×2d` matrix.
    pub fn evaluate(&self, q: &QuotientSystem, x: &DMatrix<C64>) -> DMatrix<C64> {
        let coords = q.coset_coords(x);
        let mut out = DMatrix::zeros(self.out_dim, self.out_dim);
        for (k, img) in self.images.iter().enumerate() {
            out += img * coords[k];
        }
        out
    }

    /// Entrywise amplification on a level-k block over `M_2(V)`.
    pub fn evaluate_level(&self, q: &QuotientSystem, block: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
        let d2 = q.contraction().system().ambient_dim();
        let mut blocks = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let entry = matlin::block_at(block, i, j, d2);
                blocks.push(self.evaluate(q, &entry));
            }
        }
        matlin::assemble_blocks(&blocks, k, self.out_dim)
    }
}

/// Builds the canonical ucp map data: compression of `M_2(V)` to the range
/// of `p⊕q`, which realizes the quotient concretely (projection case).
pub fn compression_ucp(q: &QuotientSystem) -> Result<UcpMapData> {
    let c = q.contraction();
    if !c.is_projection() {
        return Err(Error::NotAProjection { defect: c.projection_defect() });
    }
    let w = crate::quotient::range_isometry(c.p());
    let out_dim = w.ncols();
    let images = q
        .reps()
        .iter()
        .map(|r| w.adjoint() * r.matrix() * &w)
        .collect();
    Ok(UcpMapData { out_dim, images })
}

/// Admissibility of a candidate ucp map: unital, *-preserving, and positive.
///
/// When the compressed corner spans a full matrix algebra the complete
/// positivity test is the exact Choi criterion; otherwise a randomized
/// positivity transfer at levels 1 and 2 is used.
pub fn check_ucp(q: &QuotientSystem, phi: &UcpMapData, tol: f64) -> Result<()> {
    if phi.images.len() != q.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} images", q.dim()),
            got: format!("{}", phi.images.len()),
        });
    }
    for img in &phi.images {
        if matlin::hermitian_defect(img) > 1e-9 {
            return Err(Error::InvariantViolation {
                which: "map must send Hermitian cosets to Hermitian matrices".into(),
            });
        }
    }
    // Unitality.
    let c = q.contraction();
    let unit = c.system().unit();
    let out = phi.evaluate(q, unit.matrix());
    if (out - DMatrix::<C64>::identity(phi.out_dim, phi.out_dim)).norm() > tol.max(1e-9) {
        return Err(Error::InvariantViolation { which: "map is not unital".into() });
    }

    if c.is_projection() {
        let w = crate::quotient::range_isometry(c.p());
        let r = w.ncols();
        if q.dim() == r * r {
            // The corner is all of M_r: exact Choi test of the factored map.
            let mut choi = DMatrix::<C64>::zeros(r * phi.out_dim, r * phi.out_dim);
            for u in 0..r {
                for vcol in 0..r {
                    let mut e_uv = DMatrix::<C64>::zeros(r, r);
                    e_uv[(u, vcol)] = C64::new(1.0, 0.0);
                    let lifted = &w * e_uv * w.adjoint();
                    let img = phi.evaluate(q, &lifted);
                    choi.view_mut((u * phi.out_dim, vcol * phi.out_dim), (phi.out_dim, phi.out_dim))
                        .copy_from(&img);
                }
            }
            if !matlin::is_psd(&choi, tol.max(1e-8))? {
                return Err(Error::InvariantViolation {
                    which: "Choi matrix is not PSD; map is not completely positive".into(),
                });
            }
            return Ok(());
        }
    }

    // Randomized fallback: ambient-PSD elements have member cosets and must
    // map to PSD matrices at levels 1 and 2.
    let mut rng = sampling::rng_from_seed(0x9c1f);
    for level in 1..=2usize {
        for _ in 0..20 {
            let y = sampling::random_hermitian_element(c.system(), level, &mut rng);
            let lm = y.block().lambda_min();
            let shifted = y.block().matrix()
                + DMatrix::<C64>::identity(y.block().dim(), y.block().dim())
                    * C64::new(lm.abs() + 0.1, 0.0);
            let img = phi.evaluate_level(q, &shifted, level);
            if !matlin::is_psd(&img, tol.max(1e-7))? {
                return Err(Error::InvariantViolation {
                    which: "map sends a positive coset to a non-PSD matrix".into(),
                });
            }
        }
    }
    Ok(())
}

/// Rescales a ucp map so the images of `p⊕0 + J` and `0⊕q + J` become
/// complementary projections.
///
/// The two images commute (they sum to the identity), so they are
/// diagonalized in a common basis; eigenvalues are sorted into the pattern
/// ones / interior / zeros, and the interior coordinates are stretched by
/// `x^{-1/2}` and `y^{-1/2}` through the rectangular matrices applied on the
/// 2×2 corner decomposition of each coset.
pub fn rescale_ucp(q: &QuotientSystem, phi: &UcpMapData, tol: f64) -> Result<UcpMapData> {
    check_ucp(q, phi, tol)?;
    let c = q.contraction();
    let d = c.system().ambient_dim() / 2;
    let zero = DMatrix::<C64>::zeros(d, d);

    // Corner blocks of p⊕q.
    let p_top = matlin::block_at(c.p().matrix(), 0, 0, d);
    let q_bot = matlin::block_at(c.p().matrix(), 1, 1, d);
    let p0 = block2(&p_top, &zero, &zero, &zero);
    let q0 = block2(&zero, &zero, &zero, &q_bot);

    let p_tilde = phi.evaluate(q, &p0);
    let q_tilde = phi.evaluate(q, &q0);
    let n = phi.out_dim;
    if (&p_tilde + &q_tilde - DMatrix::<C64>::identity(n, n)).norm() > tol.max(1e-8) {
        return Err(Error::InvariantViolation {
            which: "images of the unit halves do not sum to the identity".into(),
        });
    }

    let (vals, vecs) = matlin::hermitian_eigen(&HermitianMatrix::symmetrized(p_tilde)?.matrix());
    // Classify eigenvalues into ones / interior / zeros.
    let mut ones = Vec::new();
    let mut interior = Vec::new();
    let mut zeros = Vec::new();
    for (i, &x) in vals.iter().enumerate() {
        if (1.0 - x).abs() <= tol {
            ones.push(i);
        } else if x.abs() <= tol {
            zeros.push(i);
        } else {
            if x < 1e-10 || 1.0 - x < 1e-10 {
                return Err(Error::IllConditioned { value: x.min(1.0 - x) });
            }
            interior.push(i);
        }
    }
    // Pattern order: ones, interior (descending), zeros.
    interior.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let order: Vec<usize> = ones.iter().chain(interior.iter()).chain(zeros.iter()).copied().collect();
    let m = ones.len();
    let m_prime = m + interior.len();

    let mut u = DMatrix::<C64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        u.set_column(col, &vecs.column(i));
    }

    // V stretches the p-side (ones + interior), W the q-side (interior + zeros).
    let mut v_mat = DMatrix::<C64>::zeros(m_prime, n);
    for i in 0..m {
        v_mat[(i, i)] = C64::new(1.0, 0.0);
    }
    for (k, &idx) in interior.iter().enumerate() {
        v_mat[(m + k, m + k)] = C64::new(vals[idx].powf(-0.5), 0.0);
    }
    let n_out = m_prime + (n - m);
    let mut w_mat = DMatrix::<C64>::zeros(n - m, n);
    for (k, &idx) in interior.iter().enumerate() {
        w_mat[(k, m + k)] = C64::new((1.0 - vals[idx]).powf(-0.5), 0.0);
    }
    for i in 0..(n - m_prime) {
        w_mat[(interior.len() + i, m_prime + i)] = C64::new(1.0, 0.0);
    }
    let v_mat = v_mat * u.adjoint();
    let w_mat = w_mat * u.adjoint();

    // Corner-decomposed action conjugated by diag(V, W).
    let images = q
        .reps()
        .iter()
        .map(|rep| {
            let a = matlin::block_at(rep.matrix(), 0, 0, d);
            let b = matlin::block_at(rep.matrix(), 0, 1, d);
            let cc = matlin::block_at(rep.matrix(), 1, 0, d);
            let dd = matlin::block_at(rep.matrix(), 1, 1, d);
            let m11 = phi.evaluate(q, &block2(&a, &zero, &zero, &zero));
            let m12 = phi.evaluate(q, &block2(&zero, &b, &zero, &zero));
            let m21 = phi.evaluate(q, &block2(&zero, &zero, &cc, &zero));
            let m22 = phi.evaluate(q, &block2(&zero, &zero, &zero, &dd));
            let mut out = DMatrix::<C64>::zeros(n_out, n_out);
            out.view_mut((0, 0), (m_prime, m_prime)).copy_from(&(&v_mat * m11 * v_mat.adjoint()));
            out.view_mut((0, m_prime), (m_prime, n - m)).copy_from(&(&v_mat * m12 * w_mat.adjoint()));
            out.view_mut((m_prime, 0), (n - m, m_prime)).copy_from(&(&w_mat * m21 * v_mat.adjoint()));
            out.view_mut((m_prime, m_prime), (n - m, n - m)).copy_from(&(&w_mat * m22 * w_mat.adjoint()));
            out
        })
        .collect();

    let psi = UcpMapData { out_dim: n_out, images };

    // The rescaled images of the unit halves must be complementary
    // projections.
    let p_psi = psi.evaluate(q, &p0);
    let q_psi = psi.evaluate(q, &q0);
    let idem = (&p_psi * &p_psi - &p_psi).norm();
    let comp = (&p_psi * &q_psi).norm();
    let sum = (&p_psi + &q_psi - DMatrix::<C64>::identity(n_out, n_out)).norm();
    if idem > 1e-9 || comp > 1e-9 || sum > 1e-9 {
        return Err(Error::InvariantViolation {
            which: format!("rescaled images are not complementary projections (idem {idem:.2e}, prod {comp:.2e}, sum {sum:.2e})"),
        });
    }
    Ok(psi)
}

/// A concrete representation of `V`: images of the system basis.
#[derive(Debug, Clone)]
pub struct RepresentationData {
    pub out_dim: usize,
    /// One image per element of the system basis.
    pub images: Vec<DMatrix<C64>>,
}

impl RepresentationData {
    /// Applies the representation to a Hermitian element given by basis
    /// coefficients.
    pub fn apply(&self, coeffs: &DVector<f64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.out_dim, self.out_dim);
        for (k, img) in self.images.iter().enumerate() {
            out += img * C64::new(coeffs[k], 0.0);
        }
        out
    }
}

/// Composes rescaled ucp maps with the double-block map:
/// `π = (⊕_i ψ_i) ∘ pi`. The output is a finite truncation of the full
/// direct sum over all matrix-valued ucp maps, so it maps `p` to an honest
/// projection but is not claimed to be a complete order embedding.
pub fn projectionizing_representation(
    ctx: &DoubleBlockContext,
    phis: &[UcpMapData],
    tol: f64,
) -> Result<RepresentationData> {
    if phis.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let q = ctx.quotient();
    let psis: Vec<UcpMapData> =
        phis.iter().map(|phi| rescale_ucp(q, phi, tol)).collect::<Result<Vec<_>>>()?;
    let out_dim: usize = psis.iter().map(|p| p.out_dim).sum();

    let v = ctx.contraction().system();
    let images = v
        .basis()
        .iter()
        .map(|b| {
            let doubled = block2(b.matrix(), b.matrix(), b.matrix(), b.matrix());
            let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
            let mut off = 0;
            for psi in &psis {
                let img = psi.evaluate(q, &doubled);
                out.view_mut((off, off), (psi.out_dim, psi.out_dim)).copy_from(&img);
                off += psi.out_dim;
            }
            out
        })
        .collect::<Vec<_>>();

    let rep = RepresentationData { out_dim, images };

    // Unitality and projection property of the image of p.
    let unit_img = rep.apply(v.unit_coeffs());
    if (&unit_img - DMatrix::<C64>::identity(out_dim, out_dim)).norm() > 1e-8 {
        return Err(Error::InvariantViolation { which: "representation is not unital".into() });
    }
    let p_img = rep.apply(ctx.contraction().p_coeffs());
    let defect = (&p_img * &p_img - &p_img).norm();
    if defect > 1e-9 {
        return Err(Error::InvariantViolation {
            which: format!("image of p is not a projection (defect {defect:.2e})"),
        });
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opsys::OperatorSystemSpace;

    fn corner_contraction() -> ContractionData {
        let v = OperatorSystemSpace::full(2);
        ContractionData::new(v, HermitianMatrix::from_diagonal(&[1.0, 0.0])).unwrap()
    }

    #[test]
    fn block_membership_examples() {
        let c = corner_contraction();
        let params = MembershipParams::default();
        let v = c.system().clone();
        let e = LevelElement::unit(&v, 1);
        let zero2 = DMatrix::<C64>::zeros(2, 2);
        assert!(block_cone_membership(&c, &e, &e, &zero2, &params).unwrap());

        // a = p, b = q: p·p·p + q·q·q = e ⪰ 0.
        let p_el = LevelElement::from_block(&v, c.p().clone()).unwrap();
        let q_el = LevelElement::from_block(&v, c.q().clone()).unwrap();
        assert!(block_cone_membership(&c, &p_el, &q_el, &zero2, &params).unwrap());

        // a = b = 0, x = sigma_x: the combined compression is sigma_x itself,
        // with eigenvalue -1.
        let zero_el = LevelElement::from_block(&v, HermitianMatrix::zeros(2)).unwrap();
        let sx = DMatrix::from_row_slice(2, 2, &[
            C64::new(0.0, 0.0), C64::new(1.0, 0.0),
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        ]);
        assert!(!block_cone_membership(&c, &zero_el, &zero_el, &sx, &params).unwrap());
    }

    #[test]
    fn unitality_scalar_certificate() {
        // det[[eps, 1], [1, 1 + 1/eps]] = eps ≥ 0 for every positive eps.
        for &eps in &[1e-1_f64, 1e-3, 1e-6] {
            let det = eps * (1.0 + 1.0 / eps) - 1.0;
            assert!((det - eps).abs() < 1e-12);
        }
        let c = corner_contraction();
        assert!(unitality_check(&c, &MembershipParams::default()).unwrap());
        // Unitality holds for arbitrary positive contractions.
        let v = OperatorSystemSpace::full(2);
        let soft = ContractionData::new(v, HermitianMatrix::from_diagonal(&[0.8, 0.3])).unwrap();
        assert!(unitality_check(&soft, &MembershipParams::default()).unwrap());
    }

    #[test]
    fn pi_is_unital_and_maps_p_to_corner() {
        let c = corner_contraction();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let v = c.system().clone();

        // pi(e) reduces to the quotient unit coset.
        let e = LevelElement::unit(&v, 1);
        let coset = ctx.pi(&e).unwrap();
        let unit_block = block2(
            c.p().matrix(),
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 2),
            c.q().matrix(),
        );
        let unit_el = LevelElement::from_block(
            ctx.direct_sum().system(),
            HermitianMatrix::symmetrized(unit_block).unwrap(),
        )
        .unwrap();
        let unit_coset = crate::quotient::coset_reduce(ctx.quotient(), &unit_el).unwrap();
        assert!(
            (coset.reduced().matrix() - unit_coset.reduced().matrix()).norm()
                < 1e-9
        );

        // pi(p) reduces to the coset of [[p, 0], [0, 0]].
        let p_el = LevelElement::from_block(&v, c.p().clone()).unwrap();
        let coset = ctx.pi(&p_el).unwrap();
        let corner = block2(
            c.p().matrix(),
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::zeros(2, 2),
        );
        let corner_el = LevelElement::from_block(
            ctx.direct_sum().system(),
            HermitianMatrix::symmetrized(corner).unwrap(),
        )
        .unwrap();
        let corner_coset = crate::quotient::coset_reduce(ctx.quotient(), &corner_el).unwrap();
        assert!(
            (coset.reduced().matrix() - corner_coset.reduced().matrix()).norm()
                < 1e-9
        );

        // pi(0) is the zero coset.
        let zero = LevelElement::from_block(&v, HermitianMatrix::zeros(2)).unwrap();
        assert!(ctx.pi(&zero).unwrap().norm() < 1e-12);
    }

    #[test]
    fn forward_check_on_units() {
        let c = corner_contraction();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let v = c.system().clone();
        let e = LevelElement::unit(&v, 1);
        assert!(forward_check(&ctx, &e, &params).unwrap());
        let minus = LevelElement::from_block(
            &v,
            HermitianMatrix::symmetrized(-v.unit().matrix()).unwrap(),
        )
        .unwrap();
        assert!(forward_check(&ctx, &minus, &params).unwrap());
    }

    #[test]
    fn forward_check_random() {
        let v = OperatorSystemSpace::full(3);
        let p = HermitianMatrix::from_diagonal(&[1.0, 1.0, 0.0]);
        let c = ContractionData::new(v.clone(), p).unwrap();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let mut rng = sampling::rng_from_seed(31);
        for _ in 0..10 {
            let x = sampling::random_hermitian_element(&v, 1, &mut rng);
            if x.block().lambda_min().abs() <= 1e-6 {
                continue;
            }
            assert!(forward_check(&ctx, &x, &params).unwrap());
        }
    }

    #[test]
    fn oracle_examples() {
        assert!(spectral_projection_oracle(&HermitianMatrix::from_diagonal(&[1.0, 0.0]), 1e-9));
        assert!(!spectral_projection_oracle(&HermitianMatrix::from_diagonal(&[0.5, 0.5]), 1e-9));
        let mut rng = sampling::rng_from_seed(8);
        let p = sampling::random_projection(4, 1, &mut rng);
        assert!(spectral_projection_oracle(&p, 1e-9));
    }

    #[test]
    fn detector_certifies_corner_projection() {
        let c = corner_contraction();
        let cfg = DetectorConfig { n_max: 2, budget: 150, ..DetectorConfig::default() };
        let verdict = is_abstract_projection(&c, &cfg).unwrap();
        assert!(verdict.is_certified(), "{verdict:?}");
        assert!(verdict.prechecks.unit_norm_ok);
    }

    #[test]
    fn detector_certifies_unit() {
        let v = OperatorSystemSpace::full(2);
        let c = ContractionData::new(v, HermitianMatrix::identity(2)).unwrap();
        let cfg = DetectorConfig { n_max: 2, budget: 100, ..DetectorConfig::default() };
        assert!(is_abstract_projection(&c, &cfg).unwrap().is_certified());
    }

    #[test]
    fn detector_rejects_half_identity() {
        let v = OperatorSystemSpace::full(2);
        let c = ContractionData::new(v, HermitianMatrix::from_diagonal(&[0.5, 0.5])).unwrap();
        let cfg = DetectorConfig { n_max: 1, budget: 100, ..DetectorConfig::default() };
        let verdict = is_abstract_projection(&c, &cfg).unwrap();
        assert_eq!(verdict.status, ProjectionStatus::Rejected);
        assert!(!verdict.prechecks.unit_norm_ok);
        let w = verdict.witness.expect("witness");
        assert_eq!(w.level, 1);
        assert!(verify_witness(&c, &w, &cfg.params).unwrap());
    }

    #[test]
    fn detector_rejects_soft_contraction() {
        let v = OperatorSystemSpace::full(2);
        let c = ContractionData::new(v, HermitianMatrix::from_diagonal(&[1.0, 0.3])).unwrap();
        let cfg = DetectorConfig { n_max: 1, budget: 200, ..DetectorConfig::default() };
        let verdict = is_abstract_projection(&c, &cfg).unwrap();
        assert_eq!(verdict.status, ProjectionStatus::Rejected);
        assert!(verdict.prechecks.unit_norm_ok);
        let w = verdict.witness.expect("witness");
        assert!(w.ambient_lambda_min <= -1e-7);
        assert!(verify_witness(&c, &w, &cfg.params).unwrap());
    }

    #[test]
    fn rescale_on_compression_map_is_identity_like() {
        // The canonical compression already sends the unit halves to
        // projections, so rescaling must keep them projections.
        let c = corner_contraction();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let phi = compression_ucp(ctx.quotient()).unwrap();
        let psi = rescale_ucp(ctx.quotient(), &phi, 1e-8).unwrap();
        assert_eq!(psi.out_dim, phi.out_dim);
    }

    #[test]
    fn rescale_splits_half_eigenvalue() {
        // A scalar-valued map with image of the p-half equal to 1/2 rescales
        // to complementary 1x1 blocks on a 2-dimensional target.
        let c = corner_contraction();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let quo = ctx.quotient();
        let w = crate::quotient::range_isometry(ctx.direct_sum().p());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = DMatrix::from_row_slice(2, 1, &[C64::new(s, 0.0), C64::new(s, 0.0)]);
        let phi = UcpMapData {
            out_dim: 1,
            images: quo
                .reps()
                .iter()
                .map(|r| v.adjoint() * (w.adjoint() * r.matrix() * &w) * &v)
                .collect(),
        };
        check_ucp(quo, &phi, 1e-8).unwrap();

        let zero = DMatrix::<C64>::zeros(2, 2);
        let p0 = block2(c.p().matrix(), &zero, &zero, &zero);
        let q0 = block2(&zero, &zero, &zero, c.q().matrix());
        let p_tilde = phi.evaluate(quo, &p0);
        assert!((p_tilde[(0, 0)].re - 0.5).abs() < 1e-12);

        let psi = rescale_ucp(quo, &phi, 1e-8).unwrap();
        assert_eq!(psi.out_dim, 2);
        let p_img = psi.evaluate(quo, &p0);
        let q_img = psi.evaluate(quo, &q0);
        assert!((p_img - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.0, 0.0), C64::new(0.0, 0.0),
        ]))).norm() < 1e-10);
        assert!((q_img - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.0, 0.0), C64::new(1.0, 0.0),
        ]))).norm() < 1e-10);
    }

    #[test]
    fn projectionizing_representation_single_map() {
        let c = corner_contraction();
        let params = MembershipParams::default();
        let ctx = DoubleBlockContext::new(&c, &params).unwrap();
        let phi = compression_ucp(ctx.quotient()).unwrap();
        let rep = projectionizing_representation(&ctx, &[phi], 1e-8).unwrap();
        let p_img = rep.apply(c.p_coeffs());
        assert!((&p_img * &p_img - &p_img).norm() < 1e-9);

        assert!(matches!(
            projectionizing_representation(&ctx, &[], 1e-8),
            Err(Error::EmptyFamily)
        ));
    }

    #[test]
    fn double_block_collapses_for_projections() {
        // For projections, membership of [[x,x],[x,x]] in the block cone is
        // plain positivity of x: (p+q) x (p+q) = x.
        let c = corner_contraction();
        let params = MembershipParams::default();
        let v = c.system().clone();
        let mut rng = sampling::rng_from_seed(91);
        for _ in 0..10 {
            let x = sampling::random_hermitian_element(&v, 1, &mut rng);
            let member = block_cone_membership(&c, &x, &x, x.block().matrix(), &params).unwrap();
            let psd = matlin::is_psd(x.block().matrix(), params.tol).unwrap();
            if x.block().lambda_min().abs() > 1e-6 {
                assert_eq!(member, psd);
            }
        }
    }
}
