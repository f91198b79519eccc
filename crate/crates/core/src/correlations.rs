//! Non-signalling and quantum-commuting correlations.
//!
//! A correlation assigns joint outcome probabilities `p(a,b|x,y)` to pairs
//! of experiments. Quantum-commuting correlations arise from commuting
//! projection-valued measures and a state; abstractly, they are exactly the
//! values of a state on an operator system spanned by generators
//! `Q(a,b|x,y)` that sum to the unit, have consistent marginals, and are
//! each an abstract projection.

use nalgebra::{DMatrix, DVector};

use crate::compression::ContractionData;
use crate::error::Error;
use crate::matlin::{self, C64, HermitianMatrix};
use crate::opsys::OperatorSystemSpace;
use crate::projection::{
    is_abstract_projection, spectral_projection_oracle, DetectorConfig, ProjectionVerdict,
};
use crate::Result;

/// Validation tolerance for PVMs, states, and stored correlations.
pub const STRUCTURE_TOL: f64 = 1e-9;

/// A conditional probability tensor `p(a,b|x,y)` with `x,y` ranging over
/// experiments and `a,b` over outcomes (0-based internally, 1-based in
/// file prose).
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    experiments: usize,
    outcomes: usize,
    /// Row-major over `(x, y, a, b)`.
    values: Vec<f64>,
}

impl Correlation {
    pub fn new(experiments: usize, outcomes: usize, values: Vec<f64>) -> Result<Self> {
        let expect = experiments * experiments * outcomes * outcomes;
        if values.len() != expect {
            return Err(Error::ShapeMismatch {
                expected: format!("{expect} values"),
                got: format!("{}", values.len()),
            });
        }
        Ok(Self { experiments, outcomes, values })
    }

    pub fn from_fn(
        experiments: usize,
        outcomes: usize,
        f: impl Fn(usize, usize, usize, usize) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(experiments * experiments * outcomes * outcomes);
        for x in 0..experiments {
            for y in 0..experiments {
                for a in 0..outcomes {
                    for b in 0..outcomes {
                        values.push(f(a, b, x, y));
                    }
                }
            }
        }
        Self { experiments, outcomes, values }
    }

    pub fn experiments(&self) -> usize {
        self.experiments
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        let k = self.outcomes;
        self.values[((x * self.experiments + y) * k + a) * k + b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Maximum entrywise difference.
    pub fn max_diff(&self, other: &Correlation) -> f64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max)
    }
}

/// Marginals returned by a successful non-signalling validation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NsReport {
    /// `p_A[x][a]`.
    pub p_alice: Vec<Vec<f64>>,
    /// `p_B[y][b]`.
    pub p_bob: Vec<Vec<f64>>,
    /// Largest signalling defect observed (below tol).
    pub worst_defect: f64,
}

/// Checks nonnegativity, normalization, and marginal consistency.
pub fn validate_ns(corr: &Correlation, tol: f64) -> Result<NsReport> {
    let n = corr.experiments;
    let k = corr.outcomes;
    for (idx, &v) in corr.values.iter().enumerate() {
        if v < -tol.max(1e-10) {
            return Err(Error::NotADistribution {
                reason: format!("negative probability {v:.3e} at flat index {idx}"),
            });
        }
    }
    for x in 0..n {
        for y in 0..n {
            let total: f64 =
                (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| corr.get(a, b, x, y)).sum();
            if (total - 1.0).abs() > tol {
                return Err(Error::NotADistribution {
                    reason: format!("sum over outcomes at (x={},y={}) is {total:.12}", x + 1, y + 1),
                });
            }
        }
    }

    let mut worst = 0.0_f64;
    // Alice's marginal must not depend on y.
    let mut p_alice = vec![vec![0.0; k]; n];
    for x in 0..n {
        for a in 0..k {
            let col: Vec<f64> =
                (0..n).map(|y| (0..k).map(|b| corr.get(a, b, x, y)).sum()).collect();
            for y in 1..n {
                let defect = (col[y] - col[0]).abs();
                worst = worst.max(defect);
                if defect > tol {
                    return Err(Error::SignallingViolation {
                        party: "Alice".into(),
                        detail: format!("a={}, x={}, y={} vs y=1", a + 1, x + 1, y + 1),
                        magnitude: defect,
                    });
                }
            }
            p_alice[x][a] = col[0];
        }
    }
    // Bob's marginal must not depend on x.
    let mut p_bob = vec![vec![0.0; k]; n];
    for y in 0..n {
        for b in 0..k {
            let row: Vec<f64> =
                (0..n).map(|x| (0..k).map(|a| corr.get(a, b, x, y)).sum()).collect();
            for x in 1..n {
                let defect = (row[x] - row[0]).abs();
                worst = worst.max(defect);
                if defect > tol {
                    return Err(Error::SignallingViolation {
                        party: "Bob".into(),
                        detail: format!("b={}, y={}, x={} vs x=1", b + 1, y + 1, x + 1),
                        magnitude: defect,
                    });
                }
            }
            p_bob[y][b] = row[0];
        }
    }
    Ok(NsReport { p_alice, p_bob, worst_defect: worst })
}

/// One party's projection-valued measures: for each experiment, projections
/// summing to the identity.
#[derive(Debug, Clone)]
pub struct PvmFamily {
    dim: usize,
    measures: Vec<Vec<HermitianMatrix>>,
}

impl PvmFamily {
    pub fn new(dim: usize, measures: Vec<Vec<HermitianMatrix>>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::InvariantViolation { which: "PVM family is empty".into() });
        }
        let outcomes = measures[0].len();
        for (x, pvm) in measures.iter().enumerate() {
            if pvm.len() != outcomes {
                return Err(Error::ShapeMismatch {
                    expected: format!("{outcomes} outcomes"),
                    got: format!("{} at experiment {}", pvm.len(), x + 1),
                });
            }
            let mut sum = DMatrix::<C64>::zeros(dim, dim);
            for (a, proj) in pvm.iter().enumerate() {
                if proj.dim() != dim {
                    return Err(Error::ShapeMismatch {
                        expected: format!("{dim}x{dim}"),
                        got: format!("{0}x{0}", proj.dim()),
                    });
                }
                if !spectral_projection_oracle(proj, STRUCTURE_TOL) {
                    return Err(Error::NotAProjection {
                        defect: (proj.matrix() * proj.matrix() - proj.matrix()).norm(),
                    });
                }
                let _ = a;
                sum += proj.matrix();
            }
            if (&sum - DMatrix::<C64>::identity(dim, dim)).norm() > STRUCTURE_TOL {
                return Err(Error::InvariantViolation {
                    which: format!("PVM at experiment {} does not sum to the identity", x + 1),
                });
            }
        }
        Ok(Self { dim, measures })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn experiments(&self) -> usize {
        self.measures.len()
    }

    pub fn outcomes(&self) -> usize {
        self.measures[0].len()
    }

    pub fn projection(&self, x: usize, a: usize) -> &HermitianMatrix {
        &self.measures[x][a]
    }
}

/// A state as a density matrix on the ambient algebra; the abstract state on
/// `V` is its restriction `x ↦ tr(ρx)`.
#[derive(Debug, Clone)]
pub struct StateFunctional {
    rho: HermitianMatrix,
}

impl StateFunctional {
    pub fn new(rho: HermitianMatrix) -> Result<Self> {
        if rho.lambda_min() < -STRUCTURE_TOL {
            return Err(Error::InvalidState {
                reason: format!("density matrix has eigenvalue {:.3e}", rho.lambda_min()),
            });
        }
        let tr: f64 = (0..rho.dim()).map(|i| rho.matrix()[(i, i)].re).sum();
        if (tr - 1.0).abs() > STRUCTURE_TOL {
            return Err(Error::InvalidState { reason: format!("trace is {tr:.12}") });
        }
        Ok(Self { rho })
    }

    /// Maximally mixed state.
    pub fn maximally_mixed(dim: usize) -> Self {
        let rho = DMatrix::<C64>::identity(dim, dim) / C64::new(dim as f64, 0.0);
        Self { rho: HermitianMatrix::symmetrized(rho).unwrap() }
    }

    /// Pure state from a unit vector.
    pub fn pure(vector: &DVector<C64>) -> Result<Self> {
        let norm = vector.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState { reason: format!("vector norm is {norm:.12}") });
        }
        let rho = vector * vector.adjoint();
        Self::new(HermitianMatrix::symmetrized(rho)?)
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn rho(&self) -> &HermitianMatrix {
        &self.rho
    }

    /// `tr(ρ·x)`, real part (exact for Hermitian x).
    pub fn expect(&self, x: &DMatrix<C64>) -> f64 {
        matlin::frobenius_inner(self.rho.matrix(), x).re
    }
}

/// Generates `p(a,b|x,y) = tr(ρ·E_{x,a}F_{y,b})` from commuting PVM families.
pub fn qc_from_pvms(
    alice: &PvmFamily,
    bob: &PvmFamily,
    state: &StateFunctional,
    commute_tol: f64,
) -> Result<Correlation> {
    if alice.dim() != bob.dim() || alice.dim() != state.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("common dimension {}", alice.dim()),
            got: format!("bob {}, state {}", bob.dim(), state.dim()),
        });
    }
    if alice.experiments() != bob.experiments() || alice.outcomes() != bob.outcomes() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} experiments, {} outcomes", alice.experiments(), alice.outcomes()),
            got: format!("{} experiments, {} outcomes", bob.experiments(), bob.outcomes()),
        });
    }
    // Worst commutator first: the construction only makes sense for
    // commuting families.
    let mut worst = (0.0_f64, 0, 0, 0, 0);
    for x in 0..alice.experiments() {
        for a in 0..alice.outcomes() {
            for y in 0..bob.experiments() {
                for b in 0..bob.outcomes() {
                    let e = alice.projection(x, a).matrix();
                    let f = bob.projection(y, b).matrix();
                    let comm = (e * f - f * e).norm();
                    if comm > worst.0 {
                        worst = (comm, x, y, a, b);
                    }
                }
            }
        }
    }
    if worst.0 >= commute_tol {
        return Err(Error::CommutationViolation {
            x: worst.1 + 1,
            y: worst.2 + 1,
            a: worst.3 + 1,
            b: worst.4 + 1,
            norm: worst.0,
        });
    }

    let corr = Correlation::from_fn(alice.experiments(), alice.outcomes(), |a, b, x, y| {
        let ef = alice.projection(x, a).matrix() * bob.projection(y, b).matrix();
        state.expect(&ef)
    });
    validate_ns(&corr, STRUCTURE_TOL)?;
    Ok(corr)
}

/// Per-generator certification record.
#[derive(Debug, Clone)]
pub enum GeneratorVerdict {
    /// `Q² = Q` in the given representation; concrete projections are
    /// abstract projections.
    SpectralOracle,
    /// Settled by the abstract detector.
    Detector(ProjectionVerdict),
}

impl GeneratorVerdict {
    pub fn certified(&self) -> bool {
        match self {
            GeneratorVerdict::SpectralOracle => true,
            GeneratorVerdict::Detector(v) => v.is_certified(),
        }
    }
}

/// An operator system spanned by correlation generators `Q(a,b|x,y)`
/// together with the unit.
#[derive(Debug, Clone)]
pub struct NsOperatorSystem {
    system: OperatorSystemSpace,
    experiments: usize,
    outcomes: usize,
    /// Generator matrices, row-major over `(x, y, a, b)`.
    generators: Vec<HermitianMatrix>,
    pub non_signalling_ok: bool,
    pub quantum_commuting_ok: Option<bool>,
    generator_verdicts: Vec<Option<GeneratorVerdict>>,
}

impl NsOperatorSystem {
    pub fn system(&self) -> &OperatorSystemSpace {
        &self.system
    }

    pub fn experiments(&self) -> usize {
        self.experiments
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn generator(&self, a: usize, b: usize, x: usize, y: usize) -> &HermitianMatrix {
        let k = self.outcomes;
        &self.generators[((x * self.experiments + y) * k + a) * k + b]
    }

    pub fn generators(&self) -> &[HermitianMatrix] {
        &self.generators
    }

    pub fn generator_verdicts(&self) -> &[Option<GeneratorVerdict>] {
        &self.generator_verdicts
    }
}

/// Builds the span of the generators (plus the unit) and verifies the
/// non-signalling identities: each `Q ⪰ 0`, `Σ_{a,b} Q(a,b|x,y) = e`, and
/// the marginals `E(a|x) = Σ_b Q(a,b|x,y)`, `F(b|y) = Σ_a Q(a,b|x,y)` are
/// independent of the dropped index.
pub fn build_ns_opsys(
    generators: Vec<HermitianMatrix>,
    experiments: usize,
    outcomes: usize,
    tol: f64,
) -> Result<NsOperatorSystem> {
    let expect = experiments * experiments * outcomes * outcomes;
    if generators.len() != expect {
        return Err(Error::ShapeMismatch {
            expected: format!("{expect} generators"),
            got: format!("{}", generators.len()),
        });
    }
    let d = generators[0].dim();
    let at = |gens: &[HermitianMatrix], a: usize, b: usize, x: usize, y: usize| -> DMatrix<C64> {
        gens[((x * experiments + y) * outcomes + a) * outcomes + b].matrix().clone()
    };

    for (i, g) in generators.iter().enumerate() {
        if g.dim() != d {
            return Err(Error::ShapeMismatch {
                expected: format!("{d}x{d}"),
                got: format!("generator {i} is {0}x{0}", g.dim()),
            });
        }
        if g.lambda_min() < -tol {
            return Err(Error::NotNonSignalling {
                identity: format!("Q at flat index {i} is not positive (lambda_min {:.3e})", g.lambda_min()),
            });
        }
    }
    let identity = DMatrix::<C64>::identity(d, d);
    for x in 0..experiments {
        for y in 0..experiments {
            let mut sum = DMatrix::<C64>::zeros(d, d);
            for a in 0..outcomes {
                for b in 0..outcomes {
                    sum += at(&generators, a, b, x, y);
                }
            }
            if (&sum - &identity).norm() > tol {
                return Err(Error::NotNonSignalling {
                    identity: format!(
                        "sum of Q(a,b|{},{}) differs from e by {:.3e}",
                        x + 1,
                        y + 1,
                        (&sum - &identity).norm()
                    ),
                });
            }
        }
    }
    for x in 0..experiments {
        for a in 0..outcomes {
            let first: DMatrix<C64> =
                (0..outcomes).map(|b| at(&generators, a, b, x, 0)).sum();
            for y in 1..experiments {
                let other: DMatrix<C64> =
                    (0..outcomes).map(|b| at(&generators, a, b, x, y)).sum();
                let defect = (&other - &first).norm();
                if defect > tol {
                    return Err(Error::NotNonSignalling {
                        identity: format!(
                            "E({}|{}) depends on y: defect {:.3e} at y={}",
                            a + 1,
                            x + 1,
                            defect,
                            y + 1
                        ),
                    });
                }
            }
        }
    }
    for y in 0..experiments {
        for b in 0..outcomes {
            let first: DMatrix<C64> =
                (0..outcomes).map(|a| at(&generators, a, b, 0, y)).sum();
            for x in 1..experiments {
                let other: DMatrix<C64> =
                    (0..outcomes).map(|a| at(&generators, a, b, x, y)).sum();
                let defect = (&other - &first).norm();
                if defect > tol {
                    return Err(Error::NotNonSignalling {
                        identity: format!(
                            "F({}|{}) depends on x: defect {:.3e} at x={}",
                            b + 1,
                            y + 1,
                            defect,
                            x + 1
                        ),
                    });
                }
            }
        }
    }

    // Span: unit first, then independent generators.
    let mut basis = vec![HermitianMatrix::identity(d)];
    for g in &generators {
        let mut candidate = basis.clone();
        candidate.push(g.clone());
        if OperatorSystemSpace::new(candidate.clone()).is_ok() {
            basis = candidate;
        }
    }
    let system = OperatorSystemSpace::new(basis)?;

    let n_gens = generators.len();
    Ok(NsOperatorSystem {
        system,
        experiments,
        outcomes,
        generators,
        non_signalling_ok: true,
        quantum_commuting_ok: None,
        generator_verdicts: vec![None; n_gens],
    })
}

/// Certifies every generator as an abstract projection: the spectral oracle
/// settles concrete projections immediately, and the abstract detector is
/// the authority otherwise.
pub fn certify_quantum_commuting(
    ns: &NsOperatorSystem,
    cfg: &DetectorConfig,
) -> Result<NsOperatorSystem> {
    let mut out = ns.clone();
    let mut all = true;
    for (i, g) in ns.generators.iter().enumerate() {
        let verdict = if spectral_projection_oracle(g, STRUCTURE_TOL) {
            GeneratorVerdict::SpectralOracle
        } else {
            match ContractionData::new(ns.system.clone(), g.clone()) {
                Ok(c) => GeneratorVerdict::Detector(is_abstract_projection(&c, cfg)?),
                Err(_) => {
                    // Not a positive contraction in V, hence no projection.
                    all = false;
                    out.generator_verdicts[i] = None;
                    continue;
                }
            }
        };
        if !verdict.certified() {
            all = false;
        }
        out.generator_verdicts[i] = Some(verdict);
    }
    out.quantum_commuting_ok = Some(all);
    Ok(out)
}

/// Evaluates a state on the generators: `p(a,b|x,y) = tr(ρ·Q(a,b|x,y))`.
pub fn correlation_from_state(ns: &NsOperatorSystem, state: &StateFunctional) -> Result<Correlation> {
    if !ns.non_signalling_ok {
        return Err(Error::NotNonSignalling {
            identity: "system failed non-signalling validation".into(),
        });
    }
    if state.dim() != ns.system.ambient_dim() {
        return Err(Error::InvalidState {
            reason: format!(
                "state dimension {} does not match system dimension {}",
                state.dim(),
                ns.system.ambient_dim()
            ),
        });
    }
    let corr = Correlation::from_fn(ns.experiments, ns.outcomes, |a, b, x, y| {
        state.expect(ns.generator(a, b, x, y).matrix())
    });
    validate_ns(&corr, STRUCTURE_TOL)?;
    Ok(corr)
}

/// CHSH winning probability `(1/4)·Σ_{x,y} Σ_{a⊕b = x·y} p(a,b|x,y)` for
/// two experiments with binary outcomes (labels mapped to {0,1}).
pub fn chsh_value(corr: &Correlation) -> Result<f64> {
    if corr.experiments != 2 || corr.outcomes != 2 {
        return Err(Error::ShapeMismatch {
            expected: "2 experiments, 2 outcomes".into(),
            got: format!("{} experiments, {} outcomes", corr.experiments, corr.outcomes),
        });
    }
    let mut total = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    if (a ^ b) == (x & y) {
                        total += corr.get(a, b, x, y);
                    }
                }
            }
        }
    }
    Ok(total / 4.0)
}

/// Best CHSH winning probability over the 16 deterministic classical
/// strategies (exactly 3/4).
pub fn best_deterministic_chsh() -> f64 {
    let mut best = 0.0_f64;
    for code in 0..16u32 {
        let a = |x: usize| ((code >> x) & 1) as usize;
        let b = |y: usize| ((code >> (2 + y)) & 1) as usize;
        let corr = Correlation::from_fn(2, 2, |aa, bb, x, y| {
            if aa == a(x) && bb == b(y) {
                1.0
            } else {
                0.0
            }
        });
        best = best.max(chsh_value(&corr).unwrap());
    }
    best
}

/// A qubit projection along the axis at angle `theta` in the X-Z plane:
/// `(I + s·(cos2θ·σ_z + sin2θ·σ_x))/2` with `s = ±1` by outcome.
fn qubit_projection(theta: f64, outcome: usize) -> HermitianMatrix {
    let s = if outcome == 0 { 1.0 } else { -1.0 };
    let c2 = (2.0 * theta).cos();
    let s2 = (2.0 * theta).sin();
    let m = DMatrix::from_row_slice(2, 2, &[
        C64::new(0.5 * (1.0 + s * c2), 0.0),
        C64::new(0.5 * s * s2, 0.0),
        C64::new(0.5 * s * s2, 0.0),
        C64::new(0.5 * (1.0 - s * c2), 0.0),
    ]);
    HermitianMatrix::symmetrized(m).unwrap()
}

/// The optimal qubit strategy for CHSH: Alice measures at angles 0 and π/4,
/// Bob at ±π/8, on the maximally entangled two-qubit state. Achieves winning
/// probability `cos²(π/8)`.
pub fn tsirelson_construction() -> (PvmFamily, PvmFamily, StateFunctional) {
    use std::f64::consts::FRAC_PI_8;
    let id2 = DMatrix::<C64>::identity(2, 2);
    let alice_angles = [0.0, 2.0 * FRAC_PI_8];
    let bob_angles = [FRAC_PI_8, -FRAC_PI_8];

    let alice = PvmFamily::new(
        4,
        alice_angles
            .iter()
            .map(|&th| {
                (0..2)
                    .map(|a| {
                        HermitianMatrix::symmetrized(matlin::kron(
                            qubit_projection(th, a).matrix(),
                            &id2,
                        ))
                        .unwrap()
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap();
    let bob = PvmFamily::new(
        4,
        bob_angles
            .iter()
            .map(|&th| {
                (0..2)
                    .map(|b| {
                        HermitianMatrix::symmetrized(matlin::kron(
                            &id2,
                            qubit_projection(th, b).matrix(),
                        ))
                        .unwrap()
                    })
                    .collect()
            })
            .collect(),
    )
    .unwrap();

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phi_plus = DVector::from_vec(vec![
        C64::new(s, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(s, 0.0),
    ]);
    let state = StateFunctional::pure(&phi_plus).unwrap();
    (alice, bob, state)
}

/// Products `E_{x,a}·F_{y,b}` of commuting PVMs, in generator order.
pub fn pvm_product_generators(alice: &PvmFamily, bob: &PvmFamily) -> Result<Vec<HermitianMatrix>> {
    let mut gens = Vec::new();
    for x in 0..alice.experiments() {
        for y in 0..bob.experiments() {
            for a in 0..alice.outcomes() {
                for b in 0..bob.outcomes() {
                    let prod = alice.projection(x, a).matrix() * bob.projection(y, b).matrix();
                    gens.push(HermitianMatrix::symmetrized(prod)?);
                }
            }
        }
    }
    Ok(gens)
}
