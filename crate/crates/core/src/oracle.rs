//! Exact optimal values of discounted decision problems, random problem
//! generation, and dominance audits of sufficiency verdicts.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_feasibility, FeasibilityProblem};
use crate::model::{
    check_full_support_prior, cumulative_laws, histories, DiscountFactor, Experiment, StaticExperiment,
};
use crate::par;
use crate::rational::{is_probability_vector, serde_q, serde_qmat, Q};
use crate::verdict::Status;

/// `κ_t(k_t | a, k^{t-1})`, stored per period as a table keyed by
/// `(action, k^{t-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlMap {
    pub rows: Vec<BTreeMap<String, Vec<String>>>,
    #[serde(skip)]
    parsed: Vec<BTreeMap<(usize, Vec<usize>), Vec<Q>>>,
}

impl ControlMap {
    /// Tabulate `κ` over every action and realised control history of `e`.
    pub fn from_fn<F>(e: &Experiment, actions: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, &[usize]) -> Vec<Q>,
    {
        let mut parsed = Vec::with_capacity(e.horizon());
        for t in 1..=e.horizon() {
            let mut table = BTreeMap::new();
            for ks in histories(&e.control_sizes(t - 1)) {
                for a in 0..actions {
                    let row = f(t, a, &ks);
                    if row.len() != e.controls(t).len() || !is_probability_vector(&row) {
                        return Err(Error::Invalid(format!(
                            "control map row at period {t}, action {a} is not a distribution over K_{t}"
                        )));
                    }
                    table.insert((a, ks.clone()), row);
                }
            }
            parsed.push(table);
        }
        let rows = parsed
            .iter()
            .map(|table| {
                table
                    .iter()
                    .map(|((a, ks), row)| {
                        (
                            format!("{a}|{}", ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")),
                            row.iter().map(crate::rational::fmt_q).collect(),
                        )
                    })
                    .collect()
            })
            .collect();
        Ok(Self { rows, parsed })
    }

    pub fn row(&self, t: usize, a: usize, ks: &[usize]) -> Option<&Vec<Q>> {
        self.parsed.get(t - 1)?.get(&(a, ks.to_vec()))
    }
}

/// A finite problem `(A, u)` with an optional control map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionProblem {
    pub actions: Vec<String>,
    /// `payoff[a][θ]`.
    #[serde(with = "serde_qmat")]
    pub payoff: Vec<Vec<Q>>,
    pub control_map: Option<ControlMap>,
}

impl DecisionProblem {
    pub fn new(actions: Vec<String>, payoff: Vec<Vec<Q>>) -> Result<Self> {
        if actions.is_empty() || payoff.len() != actions.len() {
            return Err(Error::Invalid("one payoff row per action is required".into()));
        }
        let width = payoff[0].len();
        if payoff.iter().any(|r| r.len() != width) {
            return Err(Error::Invalid("payoff rows differ in length".into()));
        }
        Ok(Self {
            actions,
            payoff,
            control_map: None,
        })
    }

    pub fn with_control_map(mut self, kappa: ControlMap) -> Self {
        self.control_map = Some(kappa);
        self
    }

    pub fn num_states(&self) -> usize {
        self.payoff[0].len()
    }

    /// `max_a Σ_θ w_θ u(a, θ)` for an unnormalised state weight vector.
    pub fn best_response_value(&self, w: &[Q]) -> Q {
        self.payoff
            .iter()
            .map(|row| dot(row, w))
            .max()
            .expect("at least one action")
    }
}

fn dot(a: &[Q], b: &[Q]) -> Q {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .fold(Q::zero(), |acc, (x, y)| acc + x * y)
}

/// Value of the best static response: `Σ_x max_a Σ_θ w(θ) law(x|θ) u(a,θ)`.
/// With `prior = None` the laws are treated as joint state measures.
pub fn static_value(s: &StaticExperiment, dp: &DecisionProblem, prior: Option<&[Q]>) -> Q {
    let mut total = Q::zero();
    for o in 0..s.outcomes.len() {
        let w: Vec<Q> = s
            .laws
            .iter()
            .enumerate()
            .map(|(th, law)| match prior {
                Some(p) => &p[th] * &law[o],
                None => law[o].clone(),
            })
            .collect();
        if w.iter().all(Zero::is_zero) {
            continue;
        }
        total += dp.best_response_value(&w);
    }
    total
}

/// Per-state payoffs of the strategy that plays the outcome's own label:
/// `v(θ) = Σ_y law(y|θ) u(y, θ)`. Requires actions indexed like outcomes.
pub fn announce_payoffs(s: &StaticExperiment, dp: &DecisionProblem) -> Vec<Q> {
    s.laws
        .iter()
        .enumerate()
        .map(|(th, law)| {
            law.iter()
                .enumerate()
                .fold(Q::zero(), |acc, (y, p)| acc + p * &dp.payoff[y][th])
        })
        .collect()
}

fn check_problem(e: &Experiment, dp: &DecisionProblem, delta: &DiscountFactor, prior: &[Q]) -> Result<()> {
    if dp.num_states() != e.num_states() {
        return Err(Error::StateMismatch("payoff width differs from the state count".into()));
    }
    if delta.horizon() != e.horizon() {
        return Err(Error::HorizonMismatch {
            expected: e.horizon(),
            found: delta.horizon(),
        });
    }
    check_full_support_prior(prior, e.num_states())
}

/// Optimal discounted value when signals do not depend on actions. The
/// optimum is myopic at every history.
pub fn optimal_value_uncontrolled(
    e: &Experiment,
    dp: &DecisionProblem,
    delta: &DiscountFactor,
    prior: &[Q],
) -> Result<Q> {
    if !e.is_uncontrolled() {
        return Err(Error::Controlled);
    }
    check_problem(e, dp, delta, prior)?;
    let cums = cumulative_laws(e)?;
    let mut total = Q::zero();
    for (t, cum) in cums.iter().enumerate() {
        let w = delta.weight(t + 1);
        if w.is_zero() {
            continue;
        }
        total += w * static_value(cum, dp, Some(prior));
    }
    Ok(total)
}

/// Discounted value of a fixed deterministic strategy `σ(t, x^t) -> a`.
pub fn strategy_value_uncontrolled<S>(
    e: &Experiment,
    dp: &DecisionProblem,
    delta: &DiscountFactor,
    prior: &[Q],
    strategy: S,
) -> Result<Q>
where
    S: Fn(usize, &[usize]) -> usize,
{
    check_problem(e, dp, delta, prior)?;
    let cums = cumulative_laws(e)?;
    let mut total = Q::zero();
    for t in 1..=e.horizon() {
        for (i, xs) in histories(&e.signal_sizes(t)).iter().enumerate() {
            let a = strategy(t, xs);
            for th in 0..e.num_states() {
                total += delta.weight(t) * &prior[th] * &cums[t - 1].laws[th][i] * &dp.payoff[a][th];
            }
        }
    }
    Ok(total)
}

/// Optimal value with action-dependent controls, by backward induction
/// over `(x^t, k^{t-1})`. `cap` bounds the number of histories visited.
pub fn optimal_value_controlled(
    e: &Experiment,
    dp: &DecisionProblem,
    delta: &DiscountFactor,
    prior: &[Q],
    cap: usize,
) -> Result<Q> {
    check_problem(e, dp, delta, prior)?;
    let mut count: usize = 1;
    for t in 1..=e.horizon() {
        count = count
            .saturating_mul(e.signals(t).len())
            .saturating_mul(e.controls(t).len());
    }
    if count > cap {
        return Err(Error::CapExceeded(format!("{count} histories exceed the cap of {cap}")));
    }
    let trivial;
    let kappa = match &dp.control_map {
        Some(k) => k,
        None => {
            if !e.is_uncontrolled() {
                return Err(Error::Invalid("controlled experiment needs a control map".into()));
            }
            trivial = ControlMap::from_fn(e, dp.actions.len(), |_, _, _| vec![Q::one()])?;
            &trivial
        }
    };
    let mut total = Q::zero();
    for x in 0..e.signals(1).len() {
        let w: Vec<Q> = (0..e.num_states())
            .map(|th| &prior[th] * &e.kernel(1, th, &[], &[]).expect("kernel row")[x])
            .collect();
        total += continuation(e, dp, kappa, delta, 1, &[x], &[], &w)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn continuation(
    e: &Experiment,
    dp: &DecisionProblem,
    kappa: &ControlMap,
    delta: &DiscountFactor,
    t: usize,
    xs: &[usize],
    ks: &[usize],
    w: &[Q],
) -> Result<Q> {
    if w.iter().all(Zero::is_zero) {
        return Ok(Q::zero());
    }
    let immediate: Vec<Q> = dp.payoff.iter().map(|row| delta.weight(t) * dot(row, w)).collect();
    if t == e.horizon() {
        return Ok(immediate.into_iter().max().expect("actions"));
    }
    let mut cont = Vec::with_capacity(e.controls(t).len());
    for k in 0..e.controls(t).len() {
        let mut ks2 = ks.to_vec();
        ks2.push(k);
        let mut acc = Q::zero();
        for x in 0..e.signals(t + 1).len() {
            let w2: Vec<Q> = (0..e.num_states())
                .map(|th| {
                    let row = e.kernel(t + 1, th, xs, &ks2).expect("kernel row");
                    &w[th] * &row[x]
                })
                .collect();
            let mut xs2 = xs.to_vec();
            xs2.push(x);
            acc += continuation(e, dp, kappa, delta, t + 1, &xs2, &ks2, &w2)?;
        }
        cont.push(acc);
    }
    let mut best: Option<Q> = None;
    for (a, imm) in immediate.into_iter().enumerate() {
        let row = kappa
            .row(t, a, ks)
            .ok_or_else(|| Error::Invalid(format!("control map has no row for period {t}, action {a}")))?;
        let v = imm + dot(row, &cont);
        if best.as_ref().is_none_or(|b| v > *b) {
            best = Some(v);
        }
    }
    Ok(best.expect("actions"))
}

/// Is there a strategy for `e` whose per-state discounted payoffs weakly
/// dominate `target`? Decided exactly by linear feasibility over behaviour
/// strategies. Meant for tiny instances.
pub fn per_state_dominated(
    e: &Experiment,
    dp: &DecisionProblem,
    delta: &DiscountFactor,
    target: &[Q],
) -> Result<bool> {
    let cums = cumulative_laws(e)?;
    let n_states = e.num_states();
    let n_actions = dp.actions.len();
    let mut lp = FeasibilityProblem::new();
    let mut blocks = Vec::new();
    for t in 1..=e.horizon() {
        let n_hist = cums[t - 1].outcomes.len();
        let base = lp.num_vars();
        for h in 0..n_hist {
            for a in 0..n_actions {
                lp.add_variable(format!("s{t}_{h}_{a}"));
            }
        }
        blocks.push((t, base, n_hist));
    }
    let slack_base = lp.num_vars();
    for th in 0..n_states {
        lp.add_variable(format!("slack{th}"));
    }
    for &(_, base, n_hist) in &blocks {
        for h in 0..n_hist {
            let coeffs = (0..n_actions).map(|a| (base + h * n_actions + a, Q::one())).collect();
            lp.add_row(coeffs, Q::one());
        }
    }
    for th in 0..n_states {
        let mut coeffs = Vec::new();
        for &(t, base, n_hist) in &blocks {
            for h in 0..n_hist {
                let mass = delta.weight(t) * &cums[t - 1].laws[th][h];
                if mass.is_zero() {
                    continue;
                }
                for a in 0..n_actions {
                    coeffs.push((base + h * n_actions + a, &mass * &dp.payoff[a][th]));
                }
            }
        }
        coeffs.push((slack_base + th, -Q::one()));
        lp.add_row(coeffs, target[th].clone());
    }
    Ok(solve_feasibility(&lp)?.is_witness())
}

/// Grid for random payoffs: `lo + i·(hi-lo)/steps`, `i` uniform in `0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffGrid {
    #[serde(with = "serde_q")]
    pub lo: Q,
    #[serde(with = "serde_q")]
    pub hi: Q,
    pub steps: u32,
}

impl Default for PayoffGrid {
    fn default() -> Self {
        Self {
            lo: Q::from_integer((-5).into()),
            hi: Q::from_integer(5.into()),
            steps: 20,
        }
    }
}

/// Reproducible random problems with payoffs drawn from `grid`.
pub fn random_problem_suite(
    seed: u64,
    count: usize,
    states: usize,
    action_count: usize,
    grid: &PayoffGrid,
) -> Result<Vec<DecisionProblem>> {
    if count == 0 {
        return Err(Error::Invalid("problem count must be at least 1".into()));
    }
    if action_count == 0 || states == 0 || grid.steps == 0 || grid.hi < grid.lo {
        return Err(Error::Invalid("empty action set, state set or payoff grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = (&grid.hi - &grid.lo) / Q::from_integer(grid.steps.into());
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let payoff = (0..action_count)
            .map(|_| {
                (0..states)
                    .map(|_| &grid.lo + &step * Q::from_integer(rng.gen_range(0..=grid.steps).into()))
                    .collect()
            })
            .collect();
        let actions = (0..action_count).map(|a| format!("a{a}")).collect();
        out.push(DecisionProblem::new(actions, payoff)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub index: usize,
    #[serde(with = "serde_q")]
    pub value_f: Q,
    #[serde(with = "serde_q")]
    pub value_g: Q,
    /// `value_g > value_f`.
    pub violation: bool,
    /// Serialized instance, attached when the violation contradicts a
    /// sufficiency verdict.
    pub instance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub verdict: Status,
    pub entries: Vec<AuditEntry>,
    pub violations: usize,
    /// A violation under a `Sufficient` verdict is a bug somewhere.
    pub contradictions: usize,
}

/// Compare optimal values of `f` and `g` on every problem.
pub fn dominance_audit(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    problems: &[DecisionProblem],
    prior: &[Q],
    verdict: Status,
) -> Result<AuditReport> {
    let values = par::map(problems, |dp| -> Result<(Q, Q)> {
        Ok((
            optimal_value_uncontrolled(f, dp, delta, prior)?,
            optimal_value_uncontrolled(g, dp, delta, prior)?,
        ))
    });
    let mut entries = Vec::with_capacity(problems.len());
    for (index, v) in values.into_iter().enumerate() {
        let (value_f, value_g) = v?;
        let violation = value_g > value_f;
        let instance = (violation && verdict == Status::Sufficient).then(|| {
            serde_json::json!({
                "problem": problems[index],
                "delta": delta,
                "prior": prior.iter().map(crate::rational::fmt_q).collect::<Vec<_>>(),
            })
            .to_string()
        });
        entries.push(AuditEntry {
            index,
            value_f,
            value_g,
            violation,
            instance,
        });
    }
    let violations = entries.iter().filter(|e| e.violation).count();
    let contradictions = if verdict == Status::Sufficient { violations } else { 0 };
    Ok(AuditReport {
        verdict,
        entries,
        violations,
        contradictions,
    })
}

/// Signed gap `value_g - value_f` for one problem.
pub fn value_gap(
    f: &Experiment,
    g: &Experiment,
    dp: &DecisionProblem,
    delta: &DiscountFactor,
    prior: &[Q],
) -> Result<Q> {
    Ok(optimal_value_uncontrolled(g, dp, delta, prior)? - optimal_value_uncontrolled(f, dp, delta, prior)?)
}

/// True when `x` is strictly positive; small readability helper for audits.
pub fn strictly_positive(x: &Q) -> bool {
    x.is_positive()
}
