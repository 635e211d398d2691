//! Turning a refutation into a decision problem that separates the two
//! experiments.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::lp::{verify_result, FeasibilityResult};
use crate::oracle::DecisionProblem;
use crate::rational::{qi, Q};
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Status};

use super::blackwell::farkas_holds;

/// Check a certificate against the data it carries.
pub fn certificate_verifies(cert: &Certificate) -> bool {
    match &cert.kind {
        CertificateKind::Farkas { source, target, dual } => farkas_holds(&source.laws, &target.laws, dual),
        CertificateKind::Breakpoint {
            source_value,
            target_value,
            ..
        } => source_value < target_value,
        CertificateKind::Dual { problem, dual, .. } => {
            verify_result(problem, &FeasibilityResult::Certificate(dual.clone()))
        }
    }
}

/// Build the separating problem for a refutation.
///
/// For a Farkas certificate the actions are the target outcomes and
/// `u(y, θ) = dual(y, θ) / prior(θ)`. Playing the observed target outcome then
/// earns strictly more than any strategy on the source. `prior` overrides the
/// certificate's own prior; with neither, payoffs are the raw duals (the laws
/// are then joint state measures).
///
/// For a breakpoint certificate at `b` there are two actions: a safe one
/// paying 0 and a bet paying `b - 1` in the first state and `b` in the second.
pub fn certificate_to_decision_problem(cert: &Certificate, prior: Option<&[Q]>) -> Result<DecisionProblem> {
    if !certificate_verifies(cert) {
        return Err(Error::BadCertificate);
    }
    match &cert.kind {
        CertificateKind::Farkas { target, dual, .. } => {
            let n_states = target.states.len();
            let weights = prior.map(<[Q]>::to_vec).or_else(|| cert.prior.clone());
            if let Some(w) = &weights {
                if w.len() != n_states || w.iter().any(Zero::is_zero) {
                    return Err(Error::NotFullSupport);
                }
            }
            let payoff = (0..target.outcomes.len())
                .map(|y| {
                    (0..n_states)
                        .map(|th| {
                            let d = &dual[y * n_states + th];
                            match &weights {
                                Some(w) => d / &w[th],
                                None => d.clone(),
                            }
                        })
                        .collect()
                })
                .collect();
            DecisionProblem::new(target.outcomes.clone(), payoff)
        }
        CertificateKind::Breakpoint { point, .. } => DecisionProblem::new(
            vec!["safe".into(), "bet".into()],
            vec![vec![Q::zero(), Q::zero()], vec![point - qi(1), point.clone()]],
        ),
        CertificateKind::Dual { .. } => Err(Error::BadCertificate),
    }
}

/// Separating problem of a `NotSufficient` verdict. Fails on any other status.
pub fn verdict_decision_problem(v: &ComparisonVerdict, prior: Option<&[Q]>) -> Result<DecisionProblem> {
    if v.status != Status::NotSufficient {
        return Err(Error::Precondition("only a NotSufficient verdict carries a certificate".into()));
    }
    let cert = v.certificate.as_ref().ok_or(Error::BadCertificate)?;
    certificate_to_decision_problem(cert, prior)
}
