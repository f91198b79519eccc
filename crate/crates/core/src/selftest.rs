//! Deterministic invariant suites behind `opsys selftest`.
//!
//! Everything is driven by the given seed; two runs with the same seed
//! produce byte-identical certificates.

use serde::Serialize;

use crate::compression::{
    abstract_cone_membership, compute_j, concrete_cone_membership, containment_residual,
    level_kernel, ContractionData, MembershipParams,
};
use crate::correlations::{
    best_deterministic_chsh, build_ns_opsys, certify_quantum_commuting, chsh_value,
    correlation_from_state, pvm_product_generators, qc_from_pvms, tsirelson_construction,
};
use crate::error::Error;
use crate::matlin::{hermitian_eigenvalues, HermitianMatrix};
use crate::opsys::{matrix_order_unit_check, OperatorSystemSpace};
use crate::projection::{is_abstract_projection, DetectorConfig, ProjectionStatus};
use crate::quotient::{build_quotient, compression_iso_check, kernel_iso_instances};
use crate::sampling;

#[derive(Debug, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub details: serde_json::Value,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub suites: Vec<SuiteResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed)
    }
}

pub fn run_selftest(seed: u64, params: &MembershipParams) -> Result<SelftestReport, Error> {
    let mut suites = Vec::new();

    // Order-unit axioms on full matrix algebras.
    {
        let mut passed = true;
        let mut worst = f64::INFINITY;
        for d in 2..=3 {
            let v = OperatorSystemSpace::full(d);
            let report = matrix_order_unit_check(&v, 3, 20, seed ^ d as u64);
            passed &= report.failures == 0;
            worst = worst.min(report.worst_margin);
        }
        suites.push(SuiteResult {
            name: "matrix_order_unit".into(),
            passed,
            details: serde_json::json!({ "worst_margin": worst }),
        });
    }

    // Abstract epsilon/t membership against the exact compression test.
    {
        let mut rng = sampling::rng_from_seed(seed ^ 0xe1);
        let mut compared = 0usize;
        let mut agreements = 0usize;
        for _ in 0..15 {
            let (v, p) = sampling::random_system_with_projection(3, 1, 2, &mut rng);
            let c = ContractionData::new(v, p)?;
            let x = sampling::random_hermitian_element(c.system(), 1, &mut rng);
            let p1 = c.p_level(1);
            let margin = hermitian_eigenvalues(&(&p1 * x.block().matrix() * &p1))[0];
            if margin.abs() <= 1e-6 {
                continue;
            }
            compared += 1;
            let a = abstract_cone_membership(&c, &x, params)?.is_member();
            let b = concrete_cone_membership(&c, &x, params.tol)?;
            if a == b {
                agreements += 1;
            }
        }
        suites.push(SuiteResult {
            name: "cone_equivalence".into(),
            passed: compared == agreements,
            details: serde_json::json!({ "compared": compared, "agreements": agreements }),
        });
    }

    // Kernel amplification: M_n(J_p) = J_{p_n}.
    {
        let v = OperatorSystemSpace::full(2);
        let c = ContractionData::new(v, HermitianMatrix::from_diagonal(&[1.0, 0.0]))?;
        let j = compute_j(&c, params)?;
        let mut passed = true;
        let mut worst_residual = 0.0_f64;
        for n in 1..=3 {
            let amplified = j.amplify(n);
            let direct = level_kernel(&c, n)?;
            passed &= amplified.len() == n * n * j.dim() && direct.len() == amplified.len();
            let r1 = containment_residual(&amplified, &direct);
            let r2 = containment_residual(&direct, &amplified);
            worst_residual = worst_residual.max(r1).max(r2);
            passed &= r1 < 1e-8 && r2 < 1e-8;
        }
        suites.push(SuiteResult {
            name: "kernel_amplification".into(),
            passed,
            details: serde_json::json!({ "kernel_dim": j.dim(), "worst_residual": worst_residual }),
        });
    }

    // Quotient vs concrete compression.
    {
        let v = OperatorSystemSpace::full(3);
        let c = ContractionData::new(v, HermitianMatrix::from_diagonal(&[1.0, 1.0, 0.0]))?;
        let q = build_quotient(&c, params)?;
        let mut report = compression_iso_check(&q, 2, 25, seed ^ 0xa3, params, 1e-6)?;
        kernel_iso_instances(&q, 2, 5, seed ^ 0xa3, params, &mut report)?;
        suites.push(SuiteResult {
            name: "quotient_isomorphism".into(),
            passed: report.all_agree() && report.kernel_worst_value < 1e-8,
            details: serde_json::to_value(&report)?,
        });
    }

    // Projection detector: accept honest projections, reject a soft
    // contraction with a self-certifying witness.
    {
        let cfg = DetectorConfig {
            n_max: 2,
            budget: 150,
            seed,
            params: params.clone(),
        };
        let v2 = OperatorSystemSpace::full(2);
        let honest = ContractionData::new(v2.clone(), HermitianMatrix::from_diagonal(&[1.0, 0.0]))?;
        let honest_ok = is_abstract_projection(&honest, &cfg)?.is_certified();

        let soft = ContractionData::new(v2, HermitianMatrix::from_diagonal(&[1.0, 0.3]))?;
        let soft_verdict = is_abstract_projection(&soft, &cfg)?;
        let soft_rejected = soft_verdict.status == ProjectionStatus::Rejected;
        let witness_ok = match &soft_verdict.witness {
            Some(w) => crate::projection::verify_witness(&soft, w, params)?,
            None => false,
        };
        suites.push(SuiteResult {
            name: "projection_detector".into(),
            passed: honest_ok && soft_rejected && witness_ok,
            details: serde_json::json!({
                "honest_certified": honest_ok,
                "soft_rejected": soft_rejected,
                "witness_verified": witness_ok,
            }),
        });
    }

    // CHSH pipeline: quantum value, classical bound, and path equivalence.
    {
        let (alice, bob, state) = tsirelson_construction();
        let direct = qc_from_pvms(&alice, &bob, &state, 1e-9)?;
        let quantum = chsh_value(&direct)?;
        let classical = best_deterministic_chsh();

        let gens = pvm_product_generators(&alice, &bob)?;
        let ns = build_ns_opsys(gens, 2, 2, 1e-9)?;
        let cfg = DetectorConfig { n_max: 1, budget: 50, seed, params: params.clone() };
        let certified = certify_quantum_commuting(&ns, &cfg)?;
        let via_state = correlation_from_state(&certified, &state)?;
        let path_diff = direct.max_diff(&via_state);

        let expected = (std::f64::consts::FRAC_PI_8).cos().powi(2);
        suites.push(SuiteResult {
            name: "chsh_pipeline".into(),
            passed: (quantum - expected).abs() < 1e-6
                && classical == 0.75
                && path_diff < 1e-10
                && certified.quantum_commuting_ok == Some(true),
            details: serde_json::json!({
                "chsh_quantum": quantum,
                "chsh_classical_best": classical,
                "path_equivalence_diff": path_diff,
            }),
        });
    }

    Ok(SelftestReport { seed, suites })
}
