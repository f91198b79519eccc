//! Serializable evidence for cone-membership decisions.

use serde::{Deserialize, Serialize};

/// Outcome of a cone-membership query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Member,
    NotMember,
}

/// One step of the descending-epsilon search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsilonStep {
    pub epsilon: f64,
    /// Best multiplier of the complement direction found for this epsilon.
    pub best_t: f64,
    /// Minimum eigenvalue achieved at `best_t`.
    pub lambda_min: f64,
}

/// Decision plus the numerical evidence that produced it.
///
/// `decision` is `Member` exactly when the entry for the final (smallest)
/// epsilon achieves `lambda_min ≥ -tol`. Values within `±tol` of zero are
/// reported as members with `marginal` set; cones are closed, so ties do not
/// become false negatives. A `NotMember` whose best value lies in
/// `(-10·tol, -tol)` is also flagged `marginal`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeCertificate {
    pub decision: Decision,
    pub marginal: bool,
    /// Final eigenvalue margin backing the decision.
    pub lambda_min: f64,
    pub tol: f64,
    /// Per-epsilon search trace; empty for direct spectral tests.
    pub epsilon_trace: Vec<EpsilonStep>,
    /// Set when the t-bracket hit its cap before the curvature test.
    pub cap_reached: bool,
    /// Shift coefficients over the kernel basis, for quotient searches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_coeffs: Option<Vec<f64>>,
}

impl ConeCertificate {
    /// Certificate for a direct spectral test (no epsilon search).
    pub fn direct(lambda_min: f64, tol: f64) -> Self {
        Self::classify(lambda_min, tol, Vec::new(), false, None)
    }

    /// Classifies a final margin into a decision with boundary policy.
    pub fn classify(
        lambda_min: f64,
        tol: f64,
        epsilon_trace: Vec<EpsilonStep>,
        cap_reached: bool,
        shift_coeffs: Option<Vec<f64>>,
    ) -> Self {
        let member = lambda_min >= -tol;
        let marginal = if member {
            lambda_min <= tol
        } else {
            lambda_min > -10.0 * tol
        };
        Self {
            decision: if member { Decision::Member } else { Decision::NotMember },
            marginal,
            lambda_min,
            tol,
            epsilon_trace,
            cap_reached,
            shift_coeffs,
        }
    }

    pub fn is_member(&self) -> bool {
        self.decision == Decision::Member
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_ties_are_members() {
        let c = ConeCertificate::direct(-0.5e-8, 1e-8);
        assert!(c.is_member());
        assert!(c.marginal);
        let c = ConeCertificate::direct(1.0, 1e-8);
        assert!(c.is_member());
        assert!(!c.marginal);
        let c = ConeCertificate::direct(-5e-8, 1e-8);
        assert!(!c.is_member());
        assert!(c.marginal);
        let c = ConeCertificate::direct(-1.0, 1e-8);
        assert!(!c.is_member());
        assert!(!c.marginal);
    }
}
