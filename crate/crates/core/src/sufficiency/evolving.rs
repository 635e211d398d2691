//! Comparisons when the payoff-relevant state moves along a random path.
//!
//! Signal kernels read the realised state prefix `θ^t`. The comparison works
//! with joint measures `P(x^t, θ_t = θ)`, so the garbling system has the same
//! shape as the fixed-state one with measures in place of conditional laws.

use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{histories, DiscountFactor, Experiment, StaticExperiment};
use crate::oracle::{static_value, DecisionProblem};
use crate::rational::{is_probability_vector, sum, Q};
use crate::verdict::ComparisonVerdict;

use super::delta::delta_sufficient_laws;

/// A law over state paths `Θ^T`, listed in lexicographic path order.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePathLaw {
    num_states: usize,
    horizon: usize,
    probs: Vec<Q>,
}

impl StatePathLaw {
    pub fn new(num_states: usize, horizon: usize, probs: Vec<Q>) -> Result<Self> {
        if num_states == 0 || horizon == 0 {
            return Err(Error::Invalid("state path law needs states and periods".into()));
        }
        let expected = num_states.checked_pow(horizon as u32).ok_or_else(|| Error::CapExceeded("path count".into()))?;
        if probs.len() != expected {
            return Err(Error::Invalid(format!("{} path probabilities for {expected} paths", probs.len())));
        }
        if !is_probability_vector(&probs) {
            return Err(Error::Invalid("path probabilities must sum to 1".into()));
        }
        Ok(Self {
            num_states,
            horizon,
            probs,
        })
    }

    /// The state never moves: `p(θ,…,θ) = prior(θ)`.
    pub fn persistent(prior: &[Q], horizon: usize) -> Result<Self> {
        let n = prior.len();
        let paths = histories(&vec![n; horizon]);
        let probs = paths
            .iter()
            .map(|path| {
                if path.iter().all(|s| *s == path[0]) {
                    prior[path[0]].clone()
                } else {
                    Q::zero()
                }
            })
            .collect();
        Self::new(n, horizon, probs)
    }

    /// Independent redraws from `marginal` every period.
    pub fn iid(marginal: &[Q], horizon: usize) -> Result<Self> {
        let n = marginal.len();
        let probs = histories(&vec![n; horizon])
            .iter()
            .map(|path| path.iter().fold(Q::one(), |acc, s| acc * &marginal[*s]))
            .collect();
        Self::new(n, horizon, probs)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// `(path, probability)` for every path with positive mass.
    pub fn support(&self) -> Vec<(Vec<usize>, Q)> {
        histories(&vec![self.num_states; self.horizon])
            .into_iter()
            .zip(&self.probs)
            .filter(|(_, p)| !p.is_zero())
            .map(|(path, p)| (path, p.clone()))
            .collect()
    }
}

type PathKey = (usize, Vec<usize>, Vec<usize>);

/// Kernels `f_t(x_t | θ^t, x^{t-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathExperiment {
    states: Vec<String>,
    signals: Vec<Vec<String>>,
    kernels: BTreeMap<PathKey, Vec<Q>>,
}

impl PathExperiment {
    pub fn from_fn<F>(states: Vec<String>, signals: Vec<Vec<String>>, kernel: F) -> Result<Self>
    where
        F: Fn(usize, &[usize], &[usize]) -> Vec<Q>,
    {
        let mut kernels = BTreeMap::new();
        for t in 1..=signals.len() {
            let xsizes: Vec<usize> = signals[..t - 1].iter().map(Vec::len).collect();
            for path in histories(&vec![states.len(); t]) {
                for xs in histories(&xsizes) {
                    let row = kernel(t, &path, &xs);
                    if row.len() != signals[t - 1].len() || !is_probability_vector(&row) {
                        return Err(Error::Invalid(format!(
                            "kernel row at period {t}, state path {path:?}, history {xs:?} is not a distribution"
                        )));
                    }
                    kernels.insert((t, path.clone(), xs), row);
                }
            }
        }
        Ok(Self {
            states,
            signals,
            kernels,
        })
    }

    /// Embed a fixed-state experiment: the period-`t` kernel reads `θ_t`.
    pub fn from_fixed(e: &Experiment) -> Result<Self> {
        if !e.is_uncontrolled() {
            return Err(Error::Controlled);
        }
        Self::from_fn(e.states().to_vec(), e.signal_alphabets().to_vec(), |t, path, xs| {
            let ks = vec![0; t - 1];
            e.kernel(t, path[t - 1], xs, &ks).cloned().unwrap_or_default()
        })
    }

    pub fn horizon(&self) -> usize {
        self.signals.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    fn row(&self, t: usize, path: &[usize], xs: &[usize]) -> &Vec<Q> {
        &self.kernels[&(t, path[..t].to_vec(), xs.to_vec())]
    }

    fn history_labels(&self, t: usize) -> Vec<String> {
        let sizes: Vec<usize> = self.signals[..t].iter().map(Vec::len).collect();
        histories(&sizes)
            .iter()
            .map(|xs| {
                xs.iter()
                    .enumerate()
                    .map(|(i, x)| self.signals[i][*x].as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect()
    }
}

/// `P(x^t, θ_t = θ)` for each `t`, returned as static experiments whose
/// rows are measures (each period's rows sum to 1 across states jointly).
pub fn joint_measures(p: &StatePathLaw, e: &PathExperiment) -> Result<Vec<StaticExperiment>> {
    if p.horizon() != e.horizon() {
        return Err(Error::HorizonMismatch {
            expected: e.horizon(),
            found: p.horizon(),
        });
    }
    if p.num_states() != e.states.len() {
        return Err(Error::StateMismatch("path law and experiment disagree on states".into()));
    }
    let horizon = e.horizon();
    let n_states = p.num_states();
    let mut measures: Vec<Vec<Vec<Q>>> = (1..=horizon)
        .map(|t| {
            let n: usize = e.signals[..t].iter().map(Vec::len).product();
            vec![vec![Q::zero(); n]; n_states]
        })
        .collect();
    for (path, mass) in p.support() {
        let mut prev = vec![mass];
        let mut prev_hist: Vec<Vec<usize>> = vec![vec![]];
        for t in 1..=horizon {
            let width = e.signals[t - 1].len();
            let mut cur = Vec::with_capacity(prev.len() * width);
            let mut cur_hist = Vec::with_capacity(prev.len() * width);
            for (w, xs) in prev.iter().zip(&prev_hist) {
                let row = e.row(t, &path, xs);
                for (x, px) in row.iter().enumerate() {
                    cur.push(w * px);
                    let mut h = xs.clone();
                    h.push(x);
                    cur_hist.push(h);
                }
            }
            let th = path[t - 1];
            for (i, v) in cur.iter().enumerate() {
                measures[t - 1][th][i] += v;
            }
            prev = cur;
            prev_hist = cur_hist;
        }
    }
    Ok(measures
        .into_iter()
        .enumerate()
        .map(|(i, laws)| StaticExperiment {
            states: e.states.clone(),
            outcomes: e.history_labels(i + 1),
            laws,
        })
        .collect())
}

/// δ-sufficiency under an evolving state. The certificate, when present,
/// carries no prior because its laws are already joint measures.
pub fn evolving_state_sufficient(
    p: &StatePathLaw,
    f: &PathExperiment,
    g: &PathExperiment,
    delta: &DiscountFactor,
) -> Result<ComparisonVerdict> {
    if f.states != g.states {
        return Err(Error::StateMismatch("experiments disagree on states".into()));
    }
    if delta.horizon() != f.horizon() || g.horizon() != f.horizon() {
        return Err(Error::HorizonMismatch {
            expected: f.horizon(),
            found: delta.horizon().min(g.horizon()),
        });
    }
    let fm = joint_measures(p, f)?;
    let gm = joint_measures(p, g)?;
    let mut v = delta_sufficient_laws(&fm, &gm, delta)?;
    if let Some(cert) = v.certificate.as_mut() {
        cert.prior = None;
    }
    v.notes.push("evolving state: joint state measures".into());
    Ok(v)
}

/// Optimal discounted value when period-`t` payoffs depend on `θ_t`.
pub fn evolving_value(p: &StatePathLaw, e: &PathExperiment, dp: &DecisionProblem, delta: &DiscountFactor) -> Result<Q> {
    let measures = joint_measures(p, e)?;
    let mut total = Q::zero();
    for (i, m) in measures.iter().enumerate() {
        let w = delta.weight(i + 1);
        if !w.is_zero() {
            total += w * static_value(m, dp, None);
        }
    }
    Ok(total)
}

/// Total mass of each period's measure; `1` for a well-formed input.
pub fn measure_masses(measures: &[StaticExperiment]) -> Vec<Q> {
    measures
        .iter()
        .map(|m| m.laws.iter().map(|r| sum(r)).fold(Q::zero(), |a, b| a + b))
        .collect()
}
