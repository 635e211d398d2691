//! Comparison engines for experiments whose signals ignore the
//! decision-maker's actions.

mod adapted;
mod blackwell;
mod certificate;
mod delta;
mod evolving;
mod sequential;

pub use adapted::{adapted_chain_valid, adapted_sufficient, factor_chain};
pub use blackwell::{blackwell_sufficient, farkas_holds, garbling_reproduces, solve_garbling, GarblingSolution};
pub use certificate::{certificate_to_decision_problem, certificate_verifies, verdict_decision_problem};
pub use delta::{
    big_delta_sufficient, compose_families, delta_sufficient, delta_sufficient_all, delta_sufficient_laws,
    family_reproduces, mix_delta_witnesses, tagged_outcomes, DeltaSweep,
};
pub use evolving::{
    evolving_state_sufficient, evolving_value, joint_measures, measure_masses, PathExperiment, StatePathLaw,
};
pub use sequential::{sequential_most_valuable, Coupling, HistoryRow, SequentialReport};
