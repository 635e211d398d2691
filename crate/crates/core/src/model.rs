//! Finite data model: state spaces, discount factors, multi-period
//! experiments, static experiments, garblings and posterior distributions.
//!
//! Periods are 1-based in every public signature. Histories are vectors of
//! alphabet indices, and history sets are always enumerated in lexicographic
//! order. That order fixes matrix layouts, so witnesses are reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{is_probability_vector, serde_qmat, serde_qvec, sum, Q};

// ---------------------------------------------------------------------------
// State space and discounting

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    pub states: Vec<String>,
    #[serde(with = "opt_qvec", default)]
    pub prior: Option<Vec<Q>>,
}

mod opt_qvec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<Q>>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(xs) => serde_qvec::serialize(xs, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<Vec<Q>>, D::Error> {
        let raw = Option::<Vec<String>>::deserialize(d)?;
        raw.map(|v| {
            v.iter()
                .map(|s| crate::rational::parse_q(s).map_err(serde::de::Error::custom))
                .collect()
        })
        .transpose()
    }
}

impl StateSpace {
    pub fn new(states: Vec<String>, prior: Option<Vec<Q>>) -> Result<Self> {
        check_labels("state", &states)?;
        if let Some(p) = &prior {
            check_full_support_prior(p, states.len())?;
        }
        Ok(Self { states, prior })
    }

    /// The declared prior, or the uniform prior when none was given.
    pub fn prior_or_uniform(&self) -> Vec<Q> {
        self.prior
            .clone()
            .unwrap_or_else(|| uniform_prior(self.states.len()))
    }
}

pub fn uniform_prior(n: usize) -> Vec<Q> {
    vec![Q::new(1.into(), (n as i64).into()); n]
}

pub(crate) fn check_full_support_prior(p: &[Q], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::Invalid(format!(
            "prior has {} entries for {n} states",
            p.len()
        )));
    }
    if !is_probability_vector(p) {
        return Err(Error::Invalid("prior must be a probability vector".into()));
    }
    if p.iter().any(|x| x.is_zero()) {
        return Err(Error::NotFullSupport);
    }
    Ok(())
}

fn check_labels(kind: &str, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Invalid(format!("{kind} list is empty")));
    }
    let distinct: BTreeSet<&String> = labels.iter().collect();
    if distinct.len() != labels.len() {
        return Err(Error::Invalid(format!("{kind} labels are not distinct")));
    }
    Ok(())
}

/// A probability vector over periods `1..=T`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiscountFactor {
    #[serde(with = "serde_qvec")]
    weights: Vec<Q>,
}

impl DiscountFactor {
    pub fn new(weights: Vec<Q>) -> Result<Self> {
        if !is_probability_vector(&weights) {
            return Err(Error::Invalid(
                "discount weights must be nonnegative and sum to 1".into(),
            ));
        }
        Ok(Self { weights })
    }

    pub fn horizon(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    /// Weight of period `t` (1-based).
    pub fn weight(&self, t: usize) -> &Q {
        &self.weights[t - 1]
    }

    pub fn degenerate(horizon: usize, t: usize) -> Result<Self> {
        if t == 0 || t > horizon {
            return Err(Error::Invalid(format!("period {t} outside 1..={horizon}")));
        }
        let mut w = vec![Q::zero(); horizon];
        w[t - 1] = Q::one();
        Ok(Self { weights: w })
    }

    pub fn uniform(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Invalid("horizon must be at least 1".into()));
        }
        Ok(Self {
            weights: uniform_prior(horizon),
        })
    }

    /// Weights proportional to `r^t`, normalised over `t = 1..=T`.
    pub fn geometric(r: &Q, horizon: usize) -> Result<Self> {
        if horizon == 0 || !r.is_positive() {
            return Err(Error::Invalid(
                "geometric discounting needs r > 0 and T >= 1".into(),
            ));
        }
        let mut raw = Vec::with_capacity(horizon);
        let mut pow = r.clone();
        for _ in 0..horizon {
            raw.push(pow.clone());
            pow *= r;
        }
        let total = sum(&raw);
        Self::new(raw.into_iter().map(|x| x / &total).collect())
    }

    /// Is this a point mass on some period?
    pub fn degenerate_period(&self) -> Option<usize> {
        self.weights.iter().position(|w| w.is_one()).map(|i| i + 1)
    }

    /// The renormalised tail over periods `t+1..=T`, or `None` when the
    /// tail has no mass (including `t == T`).
    pub fn tail(&self, t: usize) -> Option<DiscountFactor> {
        if t >= self.weights.len() {
            return None;
        }
        let rest = &self.weights[t..];
        let mass = sum(rest);
        if mass.is_zero() {
            return None;
        }
        Some(Self {
            weights: rest.iter().map(|w| w / &mass).collect(),
        })
    }

    /// `a·self + (1-a)·other`.
    pub fn mix(&self, other: &DiscountFactor, a: &Q) -> Result<Self> {
        if self.horizon() != other.horizon() {
            return Err(Error::HorizonMismatch {
                expected: self.horizon(),
                found: other.horizon(),
            });
        }
        let b = Q::one() - a;
        Self::new(
            self.weights
                .iter()
                .zip(&other.weights)
                .map(|(x, y)| a * x + &b * y)
                .collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// Histories

/// All sequences over the given alphabet sizes, in lexicographic order.
pub fn histories(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &n in sizes {
        let mut next = Vec::with_capacity(out.len() * n);
        for h in &out {
            for a in 0..n {
                let mut g = h.clone();
                g.push(a);
                next.push(g);
            }
        }
        out = next;
    }
    out
}

/// Position of `h` in [`histories`] for the same sizes.
pub fn history_index(sizes: &[usize], h: &[usize]) -> usize {
    h.iter().zip(sizes).fold(0, |acc, (x, n)| acc * n + x)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct History {
    pub period: usize,
    pub signals: Vec<usize>,
    pub controls: Vec<usize>,
}

impl History {
    /// Check lengths and alphabet membership against `e`.
    pub fn check(&self, e: &Experiment) -> Result<()> {
        if self.period == 0 || self.period > e.horizon() {
            return Err(Error::Invalid(format!("period {} out of range", self.period)));
        }
        if self.signals.len() != self.period || self.controls.len() + 1 != self.period {
            return Err(Error::Invalid("history lengths inconsistent with period".into()));
        }
        for (i, x) in self.signals.iter().enumerate() {
            if *x >= e.signals(i + 1).len() {
                return Err(Error::Invalid(format!("signal index {x} at period {}", i + 1)));
            }
        }
        for (i, k) in self.controls.iter().enumerate() {
            if *k >= e.controls(i + 1).len() {
                return Err(Error::Invalid(format!("control index {k} at period {}", i + 1)));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KernelKey {
    pub period: usize,
    pub state: usize,
    pub signals: Vec<usize>,
    pub controls: Vec<usize>,
}

/// Per-period signal kernels `f_t(x_t | θ, x^{t-1}, k^{t-1})`.
///
/// `controls[t-1]` is the control alphabet `K_t`. The period-`t` kernel reads
/// the controls `k_1..k_{t-1}`, so `K_T` never influences a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    states: Vec<String>,
    signals: Vec<Vec<String>>,
    controls: Vec<Vec<String>>,
    kernels: BTreeMap<KernelKey, Vec<Q>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub period: usize,
    pub state: String,
    pub signals: Vec<String>,
    pub controls: Vec<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "period {}, state {}, signals [{}], controls [{}]: {}",
            self.period,
            self.state,
            self.signals.join(","),
            self.controls.join(","),
            self.message
        )
    }
}

impl Experiment {
    /// Assemble an experiment without validation. See [`validate_experiment`].
    pub fn from_parts(
        states: Vec<String>,
        signals: Vec<Vec<String>>,
        controls: Vec<Vec<String>>,
        kernels: BTreeMap<KernelKey, Vec<Q>>,
    ) -> Self {
        Self {
            states,
            signals,
            controls,
            kernels,
        }
    }

    /// Build an experiment whose kernels ignore controls.
    pub fn uncontrolled<F>(states: Vec<String>, signals: Vec<Vec<String>>, kernel: F) -> Result<Self>
    where
        F: Fn(usize, usize, &[usize]) -> Vec<Q>,
    {
        let controls = vec![vec!["-".to_string()]; signals.len()];
        Self::controlled(states, signals, controls, |t, s, xs, _| kernel(t, s, xs))
    }

    /// Build a controlled experiment from a kernel function and validate it.
    pub fn controlled<F>(
        states: Vec<String>,
        signals: Vec<Vec<String>>,
        controls: Vec<Vec<String>>,
        kernel: F,
    ) -> Result<Self>
    where
        F: Fn(usize, usize, &[usize], &[usize]) -> Vec<Q>,
    {
        let mut kernels = BTreeMap::new();
        if controls.len() == signals.len() {
            for t in 1..=signals.len() {
                let xsizes: Vec<usize> = signals[..t - 1].iter().map(Vec::len).collect();
                let ksizes: Vec<usize> = controls[..t - 1].iter().map(Vec::len).collect();
                for s in 0..states.len() {
                    for xs in histories(&xsizes) {
                        for ks in histories(&ksizes) {
                            let row = kernel(t, s, &xs, &ks);
                            kernels.insert(
                                KernelKey {
                                    period: t,
                                    state: s,
                                    signals: xs.clone(),
                                    controls: ks,
                                },
                                row,
                            );
                        }
                    }
                }
            }
        }
        let e = Self::from_parts(states, signals, controls, kernels);
        e.checked()
    }

    /// Return `self` if it has no violations, otherwise the first one.
    pub fn checked(self) -> Result<Self> {
        match validate_experiment(&self).into_iter().next() {
            None => Ok(self),
            Some(v) => Err(Error::Invalid(v.to_string())),
        }
    }

    pub fn horizon(&self) -> usize {
        self.signals.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Signal alphabet `X_t` (1-based).
    pub fn signals(&self, t: usize) -> &[String] {
        &self.signals[t - 1]
    }

    pub fn signal_alphabets(&self) -> &[Vec<String>] {
        &self.signals
    }

    /// Control alphabet `K_t` (1-based).
    pub fn controls(&self, t: usize) -> &[String] {
        &self.controls[t - 1]
    }

    pub fn control_alphabets(&self) -> &[Vec<String>] {
        &self.controls
    }

    pub fn kernels(&self) -> &BTreeMap<KernelKey, Vec<Q>> {
        &self.kernels
    }

    pub fn is_uncontrolled(&self) -> bool {
        self.controls.iter().all(|k| k.len() == 1)
    }

    /// Sizes of `X_1..X_t`.
    pub fn signal_sizes(&self, t: usize) -> Vec<usize> {
        self.signals[..t].iter().map(Vec::len).collect()
    }

    /// Sizes of `K_1..K_t`.
    pub fn control_sizes(&self, t: usize) -> Vec<usize> {
        self.controls[..t].iter().map(Vec::len).collect()
    }

    pub fn kernel(&self, t: usize, state: usize, xs: &[usize], ks: &[usize]) -> Option<&Vec<Q>> {
        self.kernels.get(&KernelKey {
            period: t,
            state,
            signals: xs.to_vec(),
            controls: ks.to_vec(),
        })
    }

    /// Kernel value for an uncontrolled experiment.
    pub fn prob(&self, t: usize, state: usize, xs: &[usize], x: usize) -> &Q {
        let ks = vec![0; t - 1];
        &self
            .kernel(t, state, xs, &ks)
            .expect("validated experiment has every kernel row")[x]
    }

    /// Label of a signal history, e.g. `"x1,x2"`.
    pub fn history_label(&self, xs: &[usize]) -> String {
        xs.iter()
            .enumerate()
            .map(|(i, x)| self.signals[i][*x].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    fn require_uncontrolled(&self) -> Result<()> {
        if self.is_uncontrolled() {
            Ok(())
        } else {
            Err(Error::Controlled)
        }
    }
}

/// List every way `e` fails the experiment invariants. Empty means valid.
pub fn validate_experiment(e: &Experiment) -> Vec<Violation> {
    let mut out = Vec::new();
    let label = |list: &[String], i: usize| list.get(i).cloned().unwrap_or_else(|| format!("#{i}"));
    let general = |msg: String| Violation {
        period: 0,
        state: String::new(),
        signals: vec![],
        controls: vec![],
        message: msg,
    };
    if let Err(err) = check_labels("state", &e.states) {
        out.push(general(err.to_string()));
    }
    if e.signals.is_empty() {
        out.push(general("horizon must be at least 1".into()));
    }
    if e.controls.len() != e.signals.len() {
        out.push(general(format!(
            "{} control alphabets for horizon {}",
            e.controls.len(),
            e.signals.len()
        )));
        return out;
    }
    for (t, alpha) in e.signals.iter().enumerate() {
        if let Err(err) = check_labels(&format!("period-{} signal", t + 1), alpha) {
            out.push(general(err.to_string()));
        }
    }
    for (t, alpha) in e.controls.iter().enumerate() {
        if let Err(err) = check_labels(&format!("period-{} control", t + 1), alpha) {
            out.push(general(err.to_string()));
        }
    }
    if !out.is_empty() {
        return out;
    }
    let describe = |t: usize, s: usize, xs: &[usize], ks: &[usize], msg: String| Violation {
        period: t,
        state: label(&e.states, s),
        signals: xs.iter().enumerate().map(|(i, x)| label(&e.signals[i], *x)).collect(),
        controls: ks.iter().enumerate().map(|(i, k)| label(&e.controls[i], *k)).collect(),
        message: msg,
    };
    let mut expected = BTreeSet::new();
    for t in 1..=e.horizon() {
        let xsizes = e.signal_sizes(t - 1);
        let ksizes = e.control_sizes(t - 1);
        let width = e.signals[t - 1].len();
        for s in 0..e.states.len() {
            for xs in histories(&xsizes) {
                for ks in histories(&ksizes) {
                    let key = KernelKey {
                        period: t,
                        state: s,
                        signals: xs.clone(),
                        controls: ks.clone(),
                    };
                    match e.kernels.get(&key) {
                        None => out.push(describe(t, s, &xs, &ks, "missing entry".into())),
                        Some(row) if row.len() != width => out.push(describe(
                            t,
                            s,
                            &xs,
                            &ks,
                            format!("row has {} entries, expected {width}", row.len()),
                        )),
                        Some(row) if row.iter().any(|p| p.is_negative()) => {
                            out.push(describe(t, s, &xs, &ks, "negative probability".into()))
                        }
                        Some(row) if !sum(row).is_one() => out.push(describe(
                            t,
                            s,
                            &xs,
                            &ks,
                            format!("row sums to {}", crate::rational::fmt_q(&sum(row))),
                        )),
                        Some(_) => {}
                    }
                    expected.insert(key);
                }
            }
        }
    }
    for key in e.kernels.keys().filter(|k| !expected.contains(*k)) {
        out.push(Violation {
            period: key.period,
            state: label(&e.states, key.state),
            signals: key.signals.iter().map(|x| format!("#{x}")).collect(),
            controls: key.controls.iter().map(|k| format!("#{k}")).collect(),
            message: "entry outside the history tree".into(),
        });
    }
    out
}

// ---------------------------------------------------------------------------
// Static experiments

/// A state-indexed family of laws over a common outcome list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticExperiment {
    pub states: Vec<String>,
    pub outcomes: Vec<String>,
    /// `laws[θ][outcome]`.
    #[serde(with = "serde_qmat")]
    pub laws: Vec<Vec<Q>>,
}

impl StaticExperiment {
    pub fn new(states: Vec<String>, outcomes: Vec<String>, laws: Vec<Vec<Q>>) -> Result<Self> {
        let s = Self {
            states,
            outcomes,
            laws,
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<()> {
        if self.laws.len() != self.states.len() {
            return Err(Error::Invalid("one law per state is required".into()));
        }
        for (i, law) in self.laws.iter().enumerate() {
            if law.len() != self.outcomes.len() {
                return Err(Error::Invalid(format!(
                    "law for state {} has wrong length",
                    self.states[i]
                )));
            }
            if !is_probability_vector(law) {
                return Err(Error::Invalid(format!(
                    "law for state {} is not a probability vector",
                    self.states[i]
                )));
            }
        }
        Ok(())
    }

    pub fn num_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    /// Keep only the listed states (in the given order).
    pub fn restrict_states(&self, keep: &[usize]) -> Self {
        Self {
            states: keep.iter().map(|&s| self.states[s].clone()).collect(),
            outcomes: self.outcomes.clone(),
            laws: keep.iter().map(|&s| self.laws[s].clone()).collect(),
        }
    }
}

/// The period-`t` cumulative law `f^t(x^t|θ)`.
pub fn cumulative_law(e: &Experiment, t: usize) -> Result<StaticExperiment> {
    e.require_uncontrolled()?;
    if t == 0 || t > e.horizon() {
        return Err(Error::Invalid(format!("period {t} outside 1..={}", e.horizon())));
    }
    Ok(cumulative_laws(e)?.swap_remove(t - 1))
}

/// All cumulative laws `f^1, …, f^T`, built incrementally.
pub fn cumulative_laws(e: &Experiment) -> Result<Vec<StaticExperiment>> {
    e.require_uncontrolled()?;
    let mut out: Vec<StaticExperiment> = Vec::with_capacity(e.horizon());
    let mut prev_hist: Vec<Vec<usize>> = vec![vec![]];
    let mut prev: Vec<Vec<Q>> = vec![vec![Q::one()]; e.num_states()];
    for t in 1..=e.horizon() {
        let width = e.signals(t).len();
        let hist = histories(&e.signal_sizes(t));
        let mut laws = vec![Vec::with_capacity(hist.len()); e.num_states()];
        for (s, law) in laws.iter_mut().enumerate() {
            for (h, xs) in prev_hist.iter().enumerate() {
                for x in 0..width {
                    law.push(&prev[s][h] * e.prob(t, s, xs, x));
                }
            }
        }
        let outcomes = hist.iter().map(|xs| e.history_label(xs)).collect();
        out.push(StaticExperiment {
            states: e.states.clone(),
            outcomes,
            laws: laws.clone(),
        });
        prev = laws;
        prev_hist = hist;
    }
    Ok(out)
}

/// Where each mixture outcome came from: `(period, index within X^t)`.
pub type MixtureLayout = Vec<(usize, usize)>;

/// Mixture of per-period laws with weights `δ`. Periods with zero weight
/// contribute no outcomes.
pub fn mixture_of(cums: &[StaticExperiment], delta: &DiscountFactor) -> Result<(StaticExperiment, MixtureLayout)> {
    if cums.len() != delta.horizon() {
        return Err(Error::HorizonMismatch {
            expected: cums.len(),
            found: delta.horizon(),
        });
    }
    let states = cums[0].states.clone();
    let mut outcomes = Vec::new();
    let mut layout = Vec::new();
    let mut laws = vec![Vec::new(); states.len()];
    for (i, cum) in cums.iter().enumerate() {
        let w = delta.weight(i + 1);
        if w.is_zero() {
            continue;
        }
        for (j, label) in cum.outcomes.iter().enumerate() {
            outcomes.push(format!("{}:{}", i + 1, label));
            layout.push((i + 1, j));
            for (s, law) in laws.iter_mut().enumerate() {
                law.push(w * &cum.laws[s][j]);
            }
        }
    }
    Ok((
        StaticExperiment {
            states,
            outcomes,
            laws,
        },
        layout,
    ))
}

/// The mixture experiment `Σ_t δ_t f^t` with outcomes tagged by period.
pub fn mixture_experiment(e: &Experiment, delta: &DiscountFactor) -> Result<StaticExperiment> {
    e.require_uncontrolled()?;
    if delta.horizon() != e.horizon() {
        return Err(Error::HorizonMismatch {
            expected: e.horizon(),
            found: delta.horizon(),
        });
    }
    Ok(mixture_of(&cumulative_laws(e)?, delta)?.0)
}

// ---------------------------------------------------------------------------
// Garblings

/// A row-stochastic matrix from one outcome list to another.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Garbling {
    pub from: Vec<String>,
    pub to: Vec<String>,
    #[serde(with = "serde_qmat")]
    pub matrix: Vec<Vec<Q>>,
}

impl Garbling {
    pub fn new(from: Vec<String>, to: Vec<String>, matrix: Vec<Vec<Q>>) -> Result<Self> {
        let g = Self { from, to, matrix };
        if !g.is_stochastic() {
            return Err(Error::Invalid("garbling rows must be probability vectors".into()));
        }
        Ok(g)
    }

    pub fn identity(labels: Vec<String>) -> Self {
        let n = labels.len();
        let matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
            .collect();
        Self {
            from: labels.clone(),
            to: labels,
            matrix,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.matrix.len() == self.from.len()
            && self
                .matrix
                .iter()
                .all(|row| row.len() == self.to.len() && is_probability_vector(row))
    }

    /// Push per-state laws (or measures) over `from` through the garbling.
    pub fn apply_laws(&self, laws: &[Vec<Q>]) -> Vec<Vec<Q>> {
        laws.iter()
            .map(|law| {
                let mut out = vec![Q::zero(); self.to.len()];
                for (x, px) in law.iter().enumerate() {
                    if px.is_zero() {
                        continue;
                    }
                    for (y, g) in self.matrix[x].iter().enumerate() {
                        if !g.is_zero() {
                            out[y] += px * g;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `self` followed by `next`.
    pub fn compose(&self, next: &Garbling) -> Result<Garbling> {
        if self.to.len() != next.from.len() {
            return Err(Error::Invalid("garbling shapes do not compose".into()));
        }
        Ok(Garbling {
            from: self.from.clone(),
            to: next.to.clone(),
            matrix: next.apply_laws(&self.matrix),
        })
    }
}

// ---------------------------------------------------------------------------
// Posteriors

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorPoint {
    #[serde(with = "serde_qvec")]
    pub posterior: Vec<Q>,
    #[serde(with = "crate::rational::serde_q")]
    pub probability: Q,
}

/// A finitely supported law over posteriors, sorted by posterior vector,
/// with duplicate posteriors merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDistribution {
    pub support: Vec<PosteriorPoint>,
}

impl PosteriorDistribution {
    /// Build from raw points. Merges duplicates and drops zero mass.
    pub fn from_points(points: Vec<(Vec<Q>, Q)>) -> Self {
        let mut merged: BTreeMap<Vec<Q>, Q> = BTreeMap::new();
        for (post, p) in points {
            if p.is_zero() {
                continue;
            }
            *merged.entry(post).or_insert_with(Q::zero) += p;
        }
        Self {
            support: merged
                .into_iter()
                .map(|(posterior, probability)| PosteriorPoint {
                    posterior,
                    probability,
                })
                .collect(),
        }
    }

    pub fn barycenter(&self) -> Vec<Q> {
        let n = self.support.first().map_or(0, |p| p.posterior.len());
        let mut out = vec![Q::zero(); n];
        for pt in &self.support {
            for (o, x) in out.iter_mut().zip(&pt.posterior) {
                *o += &pt.probability * x;
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        let probs: Vec<Q> = self.support.iter().map(|p| p.probability.clone()).collect();
        if !is_probability_vector(&probs) {
            return Err(Error::Invalid("posterior weights must sum to 1".into()));
        }
        if self.support.iter().any(|p| !is_probability_vector(&p.posterior)) {
            return Err(Error::Invalid("each posterior must be a probability vector".into()));
        }
        Ok(())
    }

    /// `(first-state posterior, probability)` pairs, for two-state problems.
    pub fn first_state_masses(&self) -> Vec<(Q, Q)> {
        self.support
            .iter()
            .map(|p| (p.posterior[0].clone(), p.probability.clone()))
            .collect()
    }
}

/// Bayes posteriors of each outcome under `prior`, merged and sorted.
pub fn posterior_distribution(s: &StaticExperiment, prior: &[Q]) -> Result<PosteriorDistribution> {
    check_full_support_prior(prior, s.states.len())?;
    let mut points = Vec::with_capacity(s.outcomes.len());
    for o in 0..s.outcomes.len() {
        let joint: Vec<Q> = prior.iter().zip(&s.laws).map(|(p, law)| p * &law[o]).collect();
        let marginal = sum(&joint);
        if marginal.is_zero() {
            continue;
        }
        let post = joint.iter().map(|j| j / &marginal).collect();
        points.push((post, marginal));
    }
    Ok(PosteriorDistribution::from_points(points))
}
