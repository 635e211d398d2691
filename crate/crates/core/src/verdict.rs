use serde::{Deserialize, Serialize};

use crate::controlled::GarblingProfile;
use crate::lp::FeasibilityProblem;
use crate::model::{DiscountFactor, Garbling, StaticExperiment};
use crate::oracle::DecisionProblem;
use crate::rational::{serde_q, serde_qvec, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Sufficient,
    NotSufficient,
    Inconclusive,
}

impl Status {
    /// Process exit code for a verdict: 0, 1 or 2.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Sufficient => 0,
            Status::NotSufficient => 1,
            Status::Inconclusive => 2,
        }
    }
}

/// Evidence for a positive verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Witness {
    /// One garbling between static experiments.
    Static(Garbling),
    /// A family indexed by source period: entry `t'-1` maps source outcomes
    /// of period `t'` to the target outcomes of all periods.
    Family(Vec<Garbling>),
    /// Per-period garblings `X^t -> Y^t`.
    PerPeriod(Vec<Garbling>),
    /// Joint chain `Γ_t: X^t -> Y^t` and its factorisation into kernels
    /// `γ_t(y_t | x^t, y^{t-1})`.
    Adapted {
        chain: Vec<Garbling>,
        kernels: Vec<Garbling>,
    },
    /// Convex-order dominance checked at the listed breakpoints.
    ConvexOrder {
        #[serde(with = "serde_qvec")]
        breakpoints: Vec<Q>,
    },
    /// A closed-form condition that held exactly.
    Condition(String),
    /// One garbling profile per test kernel of the named family.
    Controlled {
        family: String,
        profiles: Vec<(String, GarblingProfile)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// Farkas vector for the garbling system from `source` to `target`.
    /// Rows are ordered `(target outcome, state)` first, then one
    /// row-sum row per source outcome. For evolving-state comparisons the
    /// laws are joint measures rather than conditional laws.
    Farkas {
        source: StaticExperiment,
        target: StaticExperiment,
        #[serde(with = "serde_qvec")]
        dual: Vec<Q>,
    },
    /// A point where the source integrated CDF lies strictly below the
    /// target's.
    Breakpoint {
        #[serde(with = "serde_q")]
        point: Q,
        #[serde(with = "serde_q")]
        source_value: Q,
        #[serde(with = "serde_q")]
        target_value: Q,
    },
    /// Raw Farkas vector for a named linear system that has no static
    /// source/target form.
    Dual {
        system: String,
        problem: Box<FeasibilityProblem>,
        #[serde(with = "serde_qvec")]
        dual: Vec<Q>,
    },
}

/// Evidence for a negative verdict, with the separating problem it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Prior used to scale payoffs. `None` when the laws already carry
    /// state weights.
    #[serde(with = "opt_q")]
    pub prior: Option<Vec<Q>>,
    /// Discount factor at which the separation holds.
    pub delta: Option<DiscountFactor>,
    /// Failing period for per-period comparisons.
    pub period: Option<usize>,
    pub problem: Option<DecisionProblem>,
}

mod opt_q {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Q>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(xs) => serde_qvec::serialize(xs, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Q>>, D::Error> {
        let raw = Option::<Vec<String>>::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|s| crate::rational::parse_q(s).map_err(serde::de::Error::custom))
                .collect()
        })
        .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub status: Status,
    pub witness: Option<Witness>,
    pub certificate: Option<Certificate>,
    /// Route and provenance notes, e.g. which engine decided.
    pub notes: Vec<String>,
}

impl ComparisonVerdict {
    pub fn sufficient(witness: Witness, note: impl Into<String>) -> Self {
        Self {
            status: Status::Sufficient,
            witness: Some(witness),
            certificate: None,
            notes: vec![note.into()],
        }
    }

    pub fn not_sufficient(certificate: Certificate, note: impl Into<String>) -> Self {
        Self {
            status: Status::NotSufficient,
            witness: None,
            certificate: Some(certificate),
            notes: vec![note.into()],
        }
    }

    pub fn inconclusive(reason: impl Into<String>) -> Self {
        Self {
            status: Status::Inconclusive,
            witness: None,
            certificate: None,
            notes: vec![reason.into()],
        }
    }

    pub fn is_sufficient(&self) -> bool {
        self.status == Status::Sufficient
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}
