//! Compression cones induced by a positive contraction.
//!
//! For a positive contraction `p` in a system `V` with complement
//! `q = e - p`, the level-n cone is
//!
//! ```text
//! C(p_n) = { x = x* in M_n(V) : for all eps > 0 there is t > 0
//!            with x + eps*p_n + t*q_n PSD }
//! ```
//!
//! The universal quantifier is approximated by a finite descending epsilon
//! schedule; membership at a smaller epsilon implies membership at every
//! larger one, so only the last entry decides. For each epsilon the inner
//! existential is resolved by maximizing the concave function
//! `g(t) = λ_min(x + eps*p_n + t*q_n)` with bracket doubling followed by
//! ternary search.
//!
//! When `p` is a projection the cone has the exact spectral description
//! `p_n x p_n PSD`, and the kernel `J_p = span C(p) ∩ -C(p)` is the null
//! space of `v ↦ p v p` restricted to `V`. For general contractions the
//! kernel is found heuristically and flagged as such.

use nalgebra::{DMatrix, DVector};

use crate::certificate::{ConeCertificate, EpsilonStep};
use crate::error::Error;
use crate::matlin::{
    self, ampliate, frobenius_inner, hermitian_eigenvalues, vec_hermitian, C64, HermitianMatrix,
};
use crate::opsys::{LevelElement, OperatorSystemSpace};
use crate::Result;

/// Tolerance under which `p` is accepted as a projection (`‖p² - p‖_F`).
pub const PROJECTION_TOL: f64 = 1e-9;

/// Numerical parameters of the epsilon/t membership search.
#[derive(Debug, Clone)]
pub struct MembershipParams {
    /// PSD decision tolerance.
    pub tol: f64,
    /// Strictly decreasing positive epsilon schedule.
    pub eps_schedule: Vec<f64>,
    /// Upper cap for the t bracket.
    pub t_cap: f64,
    /// Relative width at which the ternary search stops.
    pub rel_width: f64,
    /// Iteration budget for the joint subgradient ascent (quotient path).
    pub ascent_iters: usize,
    /// Number of ascent restarts.
    pub ascent_restarts: usize,
    /// Seed for ascent restarts; fixed per query for determinism.
    pub seed: u64,
}

impl Default for MembershipParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            eps_schedule: vec![1e-1, 1e-3, 1e-6],
            t_cap: 1e12,
            rel_width: 1e-10,
            ascent_iters: 5000,
            ascent_restarts: 3,
            seed: 0,
        }
    }
}

impl MembershipParams {
    pub fn validate(&self) -> Result<()> {
        if self.tol <= 0.0 {
            return Err(Error::InvariantViolation { which: "tol must be positive".into() });
        }
        let mut prev = f64::INFINITY;
        for &e in &self.eps_schedule {
            if e <= 0.0 || e >= prev {
                return Err(Error::InvariantViolation {
                    which: "epsilon schedule must be strictly decreasing and positive".into(),
                });
            }
            prev = e;
        }
        if self.eps_schedule.is_empty() {
            return Err(Error::InvariantViolation { which: "epsilon schedule is empty".into() });
        }
        Ok(())
    }
}

/// A positive contraction `0 ⪯ p ⪯ e` inside a system, with its complement.
#[derive(Debug, Clone)]
pub struct ContractionData {
    system: OperatorSystemSpace,
    p: HermitianMatrix,
    q: HermitianMatrix,
    p_coeffs: DVector<f64>,
    q_coeffs: DVector<f64>,
    projection_defect: f64,
}

impl ContractionData {
    /// Validates `p ∈ V` and `0 ⪯ p ⪯ e` (within 1e-8) and forms `q = e - p`.
    pub fn new(system: OperatorSystemSpace, p: HermitianMatrix) -> Result<Self> {
        let p_coeffs = match system.contains_hermitian(&p)? {
            Some(c) => c,
            None => {
                return Err(Error::EntryNotInSystem { row: 0, col: 0, residual: f64::NAN });
            }
        };
        let q_mat = system.unit().matrix() - p.matrix();
        let q = HermitianMatrix::symmetrized(q_mat)?;
        let lm_p = p.lambda_min();
        let lm_q = q.lambda_min();
        if lm_p < -1e-8 || lm_q < -1e-8 {
            return Err(Error::NonContraction { lambda_min_p: lm_p, lambda_min_q: lm_q });
        }
        let q_coeffs = system.unit_coeffs() - &p_coeffs;
        let projection_defect = (p.matrix() * p.matrix() - p.matrix()).norm();
        Ok(Self { system, p, q, p_coeffs, q_coeffs, projection_defect })
    }

    pub fn system(&self) -> &OperatorSystemSpace {
        &self.system
    }

    pub fn p(&self) -> &HermitianMatrix {
        &self.p
    }

    pub fn q(&self) -> &HermitianMatrix {
        &self.q
    }

    pub fn p_coeffs(&self) -> &DVector<f64> {
        &self.p_coeffs
    }

    pub fn q_coeffs(&self) -> &DVector<f64> {
        &self.q_coeffs
    }

    /// `‖p² - p‖_F`.
    pub fn projection_defect(&self) -> f64 {
        self.projection_defect
    }

    pub fn is_projection(&self) -> bool {
        self.projection_defect < PROJECTION_TOL
    }

    /// `p_n = I_n ⊗ p`.
    pub fn p_level(&self, n: usize) -> DMatrix<C64> {
        ampliate(self.p.matrix(), n)
    }

    /// `q_n = I_n ⊗ q`.
    pub fn q_level(&self, n: usize) -> DMatrix<C64> {
        ampliate(self.q.matrix(), n)
    }
}

/// Outcome of maximizing `g(t) = λ_min(base + t·dir)` over `t ∈ [0, cap]`.
#[derive(Debug, Clone, Copy)]
pub struct TSearchOutcome {
    pub best_t: f64,
    pub best_val: f64,
    pub cap_reached: bool,
}

/// Maximizes the concave function `g(t) = λ_min(base + t·dir)` by bracket
/// doubling (`T ← 2T` until `g(T) ≤ g(T/2)`) followed by ternary search.
pub fn maximize_lambda_min_over_t(
    base: &DMatrix<C64>,
    dir: &DMatrix<C64>,
    t_cap: f64,
    rel_width: f64,
) -> TSearchOutcome {
    let g = |t: f64| -> f64 { hermitian_eigenvalues(&(base + dir * C64::new(t, 0.0)))[0] };

    let mut best_t = 0.0;
    let mut best_val = g(0.0);
    let track = |t: f64, v: f64, best_t: &mut f64, best_val: &mut f64| {
        if v > *best_val {
            *best_val = v;
            *best_t = t;
        }
    };

    let mut cap_reached = false;
    let mut t_hi = 1.0_f64;
    loop {
        let g_half = g(t_hi / 2.0);
        let g_full = g(t_hi);
        track(t_hi / 2.0, g_half, &mut best_t, &mut best_val);
        track(t_hi, g_full, &mut best_t, &mut best_val);
        if g_full <= g_half {
            break;
        }
        if t_hi >= t_cap {
            cap_reached = true;
            break;
        }
        t_hi = (t_hi * 2.0).min(t_cap);
    }

    let width_target = rel_width * t_hi.max(1.0);
    let (mut lo, mut hi) = (0.0_f64, t_hi);
    while hi - lo > width_target {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        let g1 = g(m1);
        let g2 = g(m2);
        track(m1, g1, &mut best_t, &mut best_val);
        track(m2, g2, &mut best_t, &mut best_val);
        if g1 < g2 {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let mid = 0.5 * (lo + hi);
    track(mid, g(mid), &mut best_t, &mut best_val);

    TSearchOutcome { best_t, best_val, cap_reached }
}

/// Epsilon-schedule membership for an arbitrary pair of shift directions.
///
/// Decides whether for all eps there is t with
/// `block + eps·p_dir + t·q_dir ⪰ 0`, testing the given schedule.
pub fn eps_t_membership(
    block: &DMatrix<C64>,
    p_dir: &DMatrix<C64>,
    q_dir: &DMatrix<C64>,
    params: &MembershipParams,
) -> Result<ConeCertificate> {
    params.validate()?;
    let mut trace = Vec::with_capacity(params.eps_schedule.len());
    let mut cap_any = false;
    let mut last = f64::NEG_INFINITY;
    for &eps in &params.eps_schedule {
        let base = block + p_dir * C64::new(eps, 0.0);
        let out = maximize_lambda_min_over_t(&base, q_dir, params.t_cap, params.rel_width);
        trace.push(EpsilonStep { epsilon: eps, best_t: out.best_t, lambda_min: out.best_val });
        cap_any |= out.cap_reached;
        last = out.best_val;
    }
    Ok(ConeCertificate::classify(last, params.tol, trace, cap_any, None))
}

/// Decides `x ∈ C(p_n)` through the epsilon/t search.
pub fn abstract_cone_membership(
    c: &ContractionData,
    x: &LevelElement,
    params: &MembershipParams,
) -> Result<ConeCertificate> {
    x.compatible_with(c.system())?;
    let n = x.level();
    eps_t_membership(x.block().matrix(), &c.p_level(n), &c.q_level(n), params)
}

/// Decides `x ∈ C(p_n)` for a projection `p` via `p_n x p_n ⪰ 0`.
pub fn concrete_cone_membership(c: &ContractionData, x: &LevelElement, tol: f64) -> Result<bool> {
    if !c.is_projection() {
        return Err(Error::NotAProjection { defect: c.projection_defect() });
    }
    x.compatible_with(c.system())?;
    let p_n = c.p_level(x.level());
    let compressed = &p_n * x.block().matrix() * &p_n;
    matlin::is_psd(&compressed, tol)
}

/// Side-by-side run of the abstract and concrete membership tests, together
/// with the closed-form witness `t`: for a member `x` and given `eps`, any
/// `t > ‖x‖` with `eps·(t - ‖x‖) > ‖x‖²` makes `x + eps·p_n + t·q_n` PSD.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EquivalenceReport {
    pub abstract_certificate: ConeCertificate,
    pub concrete_member: bool,
    pub agree: bool,
    /// Explicit witness evaluation, present when the concrete test accepts.
    pub witness_t: Option<f64>,
    pub witness_lambda_min: Option<f64>,
    pub witness_ok: Option<bool>,
}

pub fn equivalence_check(
    c: &ContractionData,
    x: &LevelElement,
    params: &MembershipParams,
) -> Result<EquivalenceReport> {
    let abstract_certificate = abstract_cone_membership(c, x, params)?;
    let concrete_member = concrete_cone_membership(c, x, params.tol)?;
    let agree = abstract_certificate.is_member() == concrete_member;

    let (mut witness_t, mut witness_lambda_min, mut witness_ok) = (None, None, None);
    if concrete_member {
        let n = x.level();
        let eps = params.eps_schedule[0];
        let norm_x = x.block().norm_spectral();
        let t = norm_x + 10.0 * norm_x * norm_x / eps + 1.0;
        let shifted = x.block().matrix()
            + c.p_level(n) * C64::new(eps, 0.0)
            + c.q_level(n) * C64::new(t, 0.0);
        let lm = hermitian_eigenvalues(&shifted)[0];
        witness_t = Some(t);
        witness_lambda_min = Some(lm);
        witness_ok = Some(lm >= -params.tol);
    }

    Ok(EquivalenceReport {
        abstract_certificate,
        concrete_member,
        agree,
        witness_t,
        witness_lambda_min,
        witness_ok,
    })
}

/// The kernel subspace `J_p = span(C(p) ∩ -C(p))`, stored through a
/// Frobenius-orthonormal Hermitian basis.
#[derive(Debug, Clone)]
pub struct JSubspace {
    ambient_dim: usize,
    basis: Vec<HermitianMatrix>,
    /// Coordinates of each basis element over the system basis.
    coeffs: Vec<DVector<f64>>,
    heuristic: bool,
}

impl JSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[HermitianMatrix] {
        &self.basis
    }

    pub fn coeffs(&self) -> &[DVector<f64>] {
        &self.coeffs
    }

    /// True when the basis came from the finite-epsilon search rather than
    /// the exact null-space computation.
    pub fn is_heuristic(&self) -> bool {
        self.heuristic
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Frobenius-orthogonal projection of a Hermitian matrix onto the span.
    pub fn project(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for b in &self.basis {
            let coef = frobenius_inner(b.matrix(), x);
            out += b.matrix() * coef;
        }
        out
    }

    /// Orthonormal Hermitian basis of `M_n(J) = J_{p_n}` obtained by
    /// tensoring with Hermitian matrix units.
    pub fn amplify(&self, n: usize) -> Vec<HermitianMatrix> {
        amplified_hermitian_basis(&self.basis, n)
    }
}

/// Orthonormal Hermitian basis of `M_n(span basis)` for an orthonormal input
/// basis: `E_ii ⊗ b`, `(E_ij + E_ji)/√2 ⊗ b`, `i(E_ij - E_ji)/√2 ⊗ b`.
pub fn amplified_hermitian_basis(basis: &[HermitianMatrix], n: usize) -> Vec<HermitianMatrix> {
    let mut out = Vec::with_capacity(n * n * basis.len());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for b in basis {
            let mut unit = DMatrix::<C64>::zeros(n, n);
            unit[(i, i)] = C64::new(1.0, 0.0);
            out.push(HermitianMatrix::symmetrized(matlin::kron(&unit, b.matrix())).unwrap());
        }
        for j in (i + 1)..n {
            for b in basis {
                let mut sym = DMatrix::<C64>::zeros(n, n);
                sym[(i, j)] = C64::new(s, 0.0);
                sym[(j, i)] = C64::new(s, 0.0);
                out.push(HermitianMatrix::symmetrized(matlin::kron(&sym, b.matrix())).unwrap());
                let mut asym = DMatrix::<C64>::zeros(n, n);
                asym[(i, j)] = C64::new(0.0, -s);
                asym[(j, i)] = C64::new(0.0, s);
                out.push(HermitianMatrix::symmetrized(matlin::kron(&asym, b.matrix())).unwrap());
            }
        }
    }
    out
}

/// Computes `J_p`.
///
/// Projection path: exact null space of the compression `v ↦ p v p` on `V`,
/// through an SVD in Hermitian coordinates. General path: finite-epsilon
/// search for directions `h` with `±h ∈ C(p)`, refined over pairwise
/// combinations of rejected directions; the result is flagged heuristic.
pub fn compute_j(c: &ContractionData, params: &MembershipParams) -> Result<JSubspace> {
    if c.is_projection() {
        compute_j_concrete(c)
    } else {
        compute_j_heuristic(c, params)
    }
}

fn compute_j_concrete(c: &ContractionData) -> Result<JSubspace> {
    let v = c.system();
    let d = v.ambient_dim();
    let m = v.basis_len();
    let p = c.p().matrix();
    let mut map = DMatrix::<f64>::zeros(d * d, m);
    for (k, b) in v.basis().iter().enumerate() {
        let image = p * b.matrix() * p;
        map.set_column(k, &vec_hermitian(&image));
    }
    let kernel = real_kernel(&map, PROJECTION_TOL);
    let (basis, coeffs) = materialize_and_orthonormalize(v, &kernel);
    Ok(JSubspace { ambient_dim: d, basis, coeffs, heuristic: false })
}

fn compute_j_heuristic(c: &ContractionData, params: &MembershipParams) -> Result<JSubspace> {
    let v = c.system();
    let is_null = |h: &HermitianMatrix| -> Result<bool> {
        let el = LevelElement::from_block(v, h.clone())?;
        if !abstract_cone_membership(c, &el, params)?.is_member() {
            return Ok(false);
        }
        let neg = LevelElement::from_block(v, HermitianMatrix::symmetrized(-h.matrix())?)?;
        Ok(abstract_cone_membership(c, &neg, params)?.is_member())
    };

    let mut null: Vec<HermitianMatrix> = Vec::new();
    let mut rejected: Vec<HermitianMatrix> = Vec::new();
    for o in v.ortho_basis() {
        if is_null(o)? {
            null.push(o.clone());
        } else {
            rejected.push(o.clone());
        }
    }
    // Kernel directions can hide diagonally across rejected axes.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..rejected.len() {
        for j in (i + 1)..rejected.len() {
            for sign in [1.0, -1.0] {
                let combo = HermitianMatrix::symmetrized(
                    (rejected[i].matrix() + rejected[j].matrix() * C64::new(sign, 0.0))
                        * C64::new(s, 0.0),
                )?;
                if is_null(&combo)? {
                    null.push(combo);
                }
            }
        }
    }

    // Orthonormalize the collected directions and confirm each survivor.
    let ortho = gram_schmidt_hermitian(&null, 1e-8);
    let mut confirmed = Vec::new();
    for h in ortho {
        if is_null(&h)? {
            confirmed.push(h);
        }
    }
    let coeffs = confirmed
        .iter()
        .map(|h| v.contains_hermitian(h).map(|o| o.expect("kernel direction lies in V")))
        .collect::<Result<Vec<_>>>()?;
    Ok(JSubspace { ambient_dim: v.ambient_dim(), basis: confirmed, coeffs, heuristic: true })
}

/// Orthonormal basis (rows of V^T with small singular values) of the kernel
/// of a tall real matrix.
fn real_kernel(map: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    debug_assert!(map.nrows() >= map.ncols());
    let svd = map.clone().svd(false, true);
    let v_t = svd.v_t.expect("svd with right singular vectors");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol * sigma_max.max(1.0);
    let mut kernel = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            kernel.push(v_t.row(i).transpose().into_owned());
        }
    }
    kernel
}

/// Materializes coefficient vectors as matrices and re-orthonormalizes them
/// in the Frobenius inner product (the system basis need not be orthonormal).
fn materialize_and_orthonormalize(
    v: &OperatorSystemSpace,
    kernel: &[DVector<f64>],
) -> (Vec<HermitianMatrix>, Vec<DVector<f64>>) {
    let mats: Vec<HermitianMatrix> = kernel.iter().map(|c| v.hermitian_from_coeffs(c)).collect();
    let ortho = gram_schmidt_hermitian(&mats, 1e-10);
    let coeffs = ortho
        .iter()
        .map(|h| v.contains_hermitian(h).unwrap().expect("kernel element lies in V"))
        .collect();
    (ortho, coeffs)
}

/// Modified Gram-Schmidt over the Frobenius inner product, dropping
/// directions whose residual falls below `tol`.
pub fn gram_schmidt_hermitian(mats: &[HermitianMatrix], tol: f64) -> Vec<HermitianMatrix> {
    let mut ortho: Vec<HermitianMatrix> = Vec::new();
    for m in mats {
        let mut w = m.matrix().clone();
        for o in &ortho {
            let c = frobenius_inner(o.matrix(), &w).re;
            w -= o.matrix() * C64::new(c, 0.0);
        }
        let nw = w.norm();
        if nw > tol {
            ortho.push(HermitianMatrix::symmetrized(w / C64::new(nw, 0.0)).unwrap());
        }
    }
    ortho
}

/// Directly computes `J_{p_n}` at level n through the null space of
/// `x ↦ p_n x p_n` on `M_n(V)` (projection path only). Used to verify the
/// amplification identity `M_n(J_p) = J_{p_n}`.
pub fn level_kernel(c: &ContractionData, n: usize) -> Result<Vec<HermitianMatrix>> {
    if !c.is_projection() {
        return Err(Error::NotAProjection { defect: c.projection_defect() });
    }
    let v = c.system();
    let d = v.ambient_dim();
    let p_n = c.p_level(n);
    let directions = amplified_hermitian_basis(v.ortho_basis(), n);
    let nd = n * d;
    let mut map = DMatrix::<f64>::zeros(nd * nd, directions.len());
    for (k, dir) in directions.iter().enumerate() {
        let image = &p_n * dir.matrix() * &p_n;
        map.set_column(k, &vec_hermitian(&image));
    }
    let kernel = real_kernel(&map, PROJECTION_TOL);
    let mats: Vec<HermitianMatrix> = kernel
        .iter()
        .map(|cv| {
            let mut acc = DMatrix::<C64>::zeros(nd, nd);
            for (k, dir) in directions.iter().enumerate() {
                acc += dir.matrix() * C64::new(cv[k], 0.0);
            }
            HermitianMatrix::symmetrized(acc).unwrap()
        })
        .collect();
    Ok(gram_schmidt_hermitian(&mats, 1e-10))
}

/// Largest residual of projecting each element of `a` onto the orthonormal
/// span of `b`. Zero (within tolerance) means `span a ⊆ span b`.
pub fn containment_residual(a: &[HermitianMatrix], b: &[HermitianMatrix]) -> f64 {
    let mut worst = 0.0_f64;
    for x in a {
        let mut w = x.matrix().clone();
        for o in b {
            let c = frobenius_inner(o.matrix(), &w);
            w -= o.matrix() * c;
        }
        worst = worst.max(w.norm());
    }
    worst
}

/// The contraction `p ⊕ q` inside `M_2(V)`, whose complement is `q ⊕ p`.
pub fn direct_sum_contraction(c: &ContractionData) -> Result<ContractionData> {
    let big = level_system(c.system(), 2)?;
    let p_oplus_q = HermitianMatrix::symmetrized(matlin::block2(
        c.p().matrix(),
        &DMatrix::zeros(c.p().dim(), c.p().dim()),
        &DMatrix::zeros(c.p().dim(), c.p().dim()),
        c.q().matrix(),
    ))?;
    ContractionData::new(big, p_oplus_q)
}

/// The system `M_k(V) ⊆ M_{kd}` spanned by Hermitian matrix units tensored
/// with the basis of `V`.
pub fn level_system(v: &OperatorSystemSpace, k: usize) -> Result<OperatorSystemSpace> {
    let basis = amplified_hermitian_basis(v.basis(), k);
    OperatorSystemSpace::new(basis)
}

/// Builds the contraction `P ⊕ Q` over `M_{2N}(V)` from a finite family of
/// projections, where `P = ⊕_i p^i` and `Q = ⊕_i (e - p^i)`.
pub fn family_compression(
    v: &OperatorSystemSpace,
    family: &[HermitianMatrix],
) -> Result<ContractionData> {
    if family.is_empty() {
        return Err(Error::EmptyFamily);
    }
    let d = v.ambient_dim();
    let unit = v.unit();
    let mut all_trivial = true;
    for p in family {
        let defect = (p.matrix() * p.matrix() - p.matrix()).norm();
        if defect > PROJECTION_TOL {
            return Err(Error::NotAProjection { defect });
        }
        if v.contains_hermitian(p)?.is_none() {
            return Err(Error::EntryNotInSystem { row: 0, col: 0, residual: f64::NAN });
        }
        let near_zero = p.norm_fro() < PROJECTION_TOL;
        let near_unit = (p.matrix() - unit.matrix()).norm() < PROJECTION_TOL;
        if !(near_zero || near_unit) {
            all_trivial = false;
        }
    }
    if all_trivial {
        return Err(Error::DegenerateFamily);
    }

    let n_family = family.len();
    let big = level_system(v, 2 * n_family)?;
    let size = 2 * n_family * d;
    let mut pq = DMatrix::<C64>::zeros(size, size);
    for (i, p) in family.iter().enumerate() {
        pq.view_mut((i * d, i * d), (d, d)).copy_from(p.matrix());
        let q = unit.matrix() - p.matrix();
        let off = (n_family + i) * d;
        pq.view_mut((off, off), (d, d)).copy_from(&q);
    }
    ContractionData::new(big, HermitianMatrix::symmetrized(pq)?)
}
