//! Two-state comparisons via the integrated CDF of the posterior.
//!
//! With posterior `π` of the first state distributed as `Σ p_i·[π_i]`,
//! `H(t) = 2 Σ p_i max(0, t - π_i)`. One experiment is sufficient for
//! another iff its `H` lies weakly above the other's on `[0, 1]`. Both
//! functions are piecewise linear with kinks at support points, so checking
//! the union of kinks (plus the endpoints) decides the comparison.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{posterior_distribution, PosteriorDistribution, StaticExperiment};
use crate::rational::{qi, serde_qvec, Q};
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Witness};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfIntegral {
    #[serde(with = "serde_qvec")]
    pub breakpoints: Vec<Q>,
    /// `H` at each breakpoint.
    #[serde(with = "serde_qvec")]
    pub values: Vec<Q>,
    #[serde(skip)]
    masses: Vec<(Q, Q)>,
}

impl CdfIntegral {
    /// `H(t)` for any `t`.
    pub fn eval(&self, t: &Q) -> Q {
        let mut acc = Q::zero();
        for (pi, p) in &self.masses {
            if t > pi {
                acc += p * (t - pi);
            }
        }
        acc * qi(2)
    }

    /// Convex and nondecreasing on the breakpoint grid.
    pub fn is_convex_nondecreasing(&self) -> bool {
        let n = self.breakpoints.len();
        let slopes: Vec<Q> = (1..n)
            .map(|i| (&self.values[i] - &self.values[i - 1]) / (&self.breakpoints[i] - &self.breakpoints[i - 1]))
            .collect();
        slopes.iter().all(|s| *s >= Q::zero()) && slopes.windows(2).all(|w| w[0] <= w[1])
    }
}

fn two_state(d: &PosteriorDistribution) -> Result<()> {
    if d.support.iter().any(|p| p.posterior.len() != 2) {
        return Err(Error::Invalid("integrated CDF needs exactly two states".into()));
    }
    d.check()
}

pub fn cdf_integral(d: &PosteriorDistribution) -> Result<CdfIntegral> {
    two_state(d)?;
    let masses = d.first_state_masses();
    let mut points: BTreeSet<Q> = masses.iter().map(|(pi, _)| pi.clone()).collect();
    points.insert(Q::zero());
    points.insert(Q::one());
    let mut h = CdfIntegral {
        breakpoints: points.into_iter().collect(),
        values: Vec::new(),
        masses,
    };
    h.values = h.breakpoints.iter().map(|t| h.eval(t)).collect();
    Ok(h)
}

/// Is `df` a mean-preserving spread of `dg`?
pub fn mps_compare(df: &PosteriorDistribution, dg: &PosteriorDistribution) -> Result<ComparisonVerdict> {
    let hf = cdf_integral(df)?;
    let hg = cdf_integral(dg)?;
    let prior = df.barycenter();
    if prior != dg.barycenter() {
        return Err(Error::Precondition("posterior distributions have different barycenters".into()));
    }
    let grid: BTreeSet<Q> = hf.breakpoints.iter().chain(&hg.breakpoints).cloned().collect();
    for b in &grid {
        let vf = hf.eval(b);
        let vg = hg.eval(b);
        if vf < vg {
            return Ok(ComparisonVerdict::not_sufficient(
                Certificate {
                    kind: CertificateKind::Breakpoint {
                        point: b.clone(),
                        source_value: vf,
                        target_value: vg,
                    },
                    prior: Some(prior),
                    delta: None,
                    period: None,
                    problem: None,
                },
                "convex order: integrated CDF below target",
            ));
        }
    }
    Ok(ComparisonVerdict::sufficient(
        Witness::ConvexOrder {
            breakpoints: grid.into_iter().collect(),
        },
        "convex order: integrated CDF dominates at every breakpoint",
    ))
}

/// Convex-order comparison of two static dichotomies under `prior`.
pub fn dichotomy_compare(f: &StaticExperiment, g: &StaticExperiment, prior: &[Q]) -> Result<ComparisonVerdict> {
    mps_compare(&posterior_distribution(f, prior)?, &posterior_distribution(g, prior)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::verdict::Status;

    fn dist(points: &[(Q, Q)]) -> PosteriorDistribution {
        PosteriorDistribution::from_points(
            points
                .iter()
                .map(|(pi, p)| (vec![pi.clone(), Q::one() - pi], p.clone()))
                .collect(),
        )
    }

    #[test]
    fn no_information_is_a_hinge_at_the_prior() {
        let h = cdf_integral(&dist(&[(q(1, 2), qi(1))])).unwrap();
        assert_eq!(h.eval(&q(1, 4)), qi(0));
        assert_eq!(h.eval(&q(3, 4)), q(1, 2));
        assert_eq!(h.eval(&qi(1)), qi(1));
    }

    #[test]
    fn full_information_is_the_identity() {
        let h = cdf_integral(&dist(&[(qi(0), q(1, 2)), (qi(1), q(1, 2))])).unwrap();
        for t in [q(0, 1), q(1, 3), q(1, 2), q(9, 10)] {
            assert_eq!(h.eval(&t), t);
        }
    }

    #[test]
    fn three_point_distribution() {
        let d = dist(&[(qi(0), q(1, 4)), (q(1, 2), q(1, 2)), (qi(1), q(1, 4))]);
        let h = cdf_integral(&d).unwrap();
        assert_eq!(h.eval(&q(1, 2)), q(1, 4));
        assert!(h.is_convex_nondecreasing());
    }

    #[test]
    fn reverse_order_fails_at_the_prior() {
        let none = dist(&[(q(1, 2), qi(1))]);
        let full = dist(&[(qi(0), q(1, 2)), (qi(1), q(1, 2))]);
        assert!(mps_compare(&full, &none).unwrap().is_sufficient());
        let v = mps_compare(&none, &full).unwrap();
        assert_eq!(v.status, Status::NotSufficient);
        match v.certificate.unwrap().kind {
            CertificateKind::Breakpoint { point, .. } => assert_eq!(point, q(1, 2)),
            _ => panic!(),
        }
        let shifted = dist(&[(q(1, 3), qi(1))]);
        assert!(mps_compare(&none, &shifted).is_err());
    }
}
