//! Sequential comparison under a coupling of the two signal processes.
//!
//! After each on-path history `x^t` the decision-maker may switch to the
//! other process for the remaining periods. The coupling fixes what the other
//! process looks like from there, so each history gets its own continuation
//! pair and its own tail discount factor.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cumulative_laws, histories, history_index, DiscountFactor, Experiment};
use crate::par;
use crate::rational::{fmt_q, is_probability_vector, Q};
use crate::verdict::{ComparisonVerdict, Status, Witness};

use super::delta::{delta_sufficient, require_comparable};

type CouplingKey = (usize, usize, Vec<usize>, Vec<usize>);

/// Joint kernels `h_t(x_t, y_t | θ, x^{t-1}, y^{t-1})`. Row entry
/// `x·|Y_t| + y` holds the probability of the pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    f: Experiment,
    g: Experiment,
    kernels: BTreeMap<CouplingKey, Vec<Q>>,
}

impl Coupling {
    /// Tabulate `h` and check that its marginal processes are `f` and `g`.
    pub fn from_fn<H>(f: Experiment, g: Experiment, h: H) -> Result<Self>
    where
        H: Fn(usize, usize, &[usize], &[usize]) -> Vec<Q>,
    {
        require_comparable(&f, &g)?;
        let mut kernels = BTreeMap::new();
        for t in 1..=f.horizon() {
            let width = f.signals(t).len() * g.signals(t).len();
            for th in 0..f.num_states() {
                for xs in histories(&f.signal_sizes(t - 1)) {
                    for ys in histories(&g.signal_sizes(t - 1)) {
                        let row = h(t, th, &xs, &ys);
                        if row.len() != width || !is_probability_vector(&row) {
                            return Err(Error::Invalid(format!(
                                "coupling row at period {t}, state {}, histories [{}] / [{}] is not a distribution over X_{t} x Y_{t}",
                                f.states()[th],
                                f.history_label(&xs),
                                g.history_label(&ys)
                            )));
                        }
                        kernels.insert((t, th, xs.clone(), ys), row);
                    }
                }
            }
        }
        let c = Self { f, g, kernels };
        c.check_marginals()?;
        Ok(c)
    }

    /// The coupling under which the two processes are independent given `θ`.
    pub fn independent(f: Experiment, g: Experiment) -> Result<Self> {
        let (f2, g2) = (f.clone(), g.clone());
        Self::from_fn(f, g, move |t, th, xs, ys| {
            let fr = f2.kernel(t, th, xs, &vec![0; t - 1]).expect("row");
            let gr = g2.kernel(t, th, ys, &vec![0; t - 1]).expect("row");
            fr.iter().flat_map(|a| gr.iter().map(move |b| a * b)).collect()
        })
    }

    pub fn f(&self) -> &Experiment {
        &self.f
    }

    pub fn g(&self) -> &Experiment {
        &self.g
    }

    pub fn kernel(&self, t: usize, th: usize, xs: &[usize], ys: &[usize]) -> Option<&Vec<Q>> {
        self.kernels.get(&(t, th, xs.to_vec(), ys.to_vec()))
    }

    /// `P_h(x^T, y^T | θ)` indexed `[θ][x^T][y^T]`.
    pub fn joint_law(&self) -> Vec<Vec<Vec<Q>>> {
        let horizon = self.f.horizon();
        let mut out = Vec::with_capacity(self.f.num_states());
        for th in 0..self.f.num_states() {
            let mut layer: Vec<(Vec<usize>, Vec<usize>, Q)> = vec![(vec![], vec![], Q::one())];
            for t in 1..=horizon {
                let ny = self.g.signals(t).len();
                let mut next = Vec::with_capacity(layer.len() * self.kernels_width(t));
                for (xs, ys, w) in &layer {
                    let row = &self.kernels[&(t, th, xs.clone(), ys.clone())];
                    for (i, p) in row.iter().enumerate() {
                        let mut x2 = xs.clone();
                        x2.push(i / ny);
                        let mut y2 = ys.clone();
                        y2.push(i % ny);
                        next.push((x2, y2, w * p));
                    }
                }
                layer = next;
            }
            let nx_total = histories(&self.f.signal_sizes(horizon)).len();
            let ny_total = histories(&self.g.signal_sizes(horizon)).len();
            let mut m = vec![vec![Q::zero(); ny_total]; nx_total];
            for (xs, ys, w) in layer {
                let xi = history_index(&self.f.signal_sizes(horizon), &xs);
                let yi = history_index(&self.g.signal_sizes(horizon), &ys);
                m[xi][yi] += w;
            }
            out.push(m);
        }
        out
    }

    fn kernels_width(&self, t: usize) -> usize {
        self.f.signals(t).len() * self.g.signals(t).len()
    }

    fn check_marginals(&self) -> Result<()> {
        let horizon = self.f.horizon();
        let joint = self.joint_law();
        let f_cums = cumulative_laws(&self.f)?;
        let g_cums = cumulative_laws(&self.g)?;
        let fx = self.f.signal_sizes(horizon);
        let gy = self.g.signal_sizes(horizon);
        for t in 1..=horizon {
            let nx_t: usize = fx[..t].iter().product();
            let ny_t: usize = gy[..t].iter().product();
            let x_tail: usize = fx[t..].iter().product();
            let y_tail: usize = gy[t..].iter().product();
            for th in 0..self.f.num_states() {
                let mut mx = vec![Q::zero(); nx_t];
                let mut my = vec![Q::zero(); ny_t];
                for (xi, row) in joint[th].iter().enumerate() {
                    for (yi, w) in row.iter().enumerate() {
                        if w.is_zero() {
                            continue;
                        }
                        mx[xi / x_tail] += w;
                        my[yi / y_tail] += w;
                    }
                }
                for (i, v) in mx.iter().enumerate() {
                    if *v != f_cums[t - 1].laws[th][i] {
                        return Err(Error::Invalid(format!(
                            "X-marginal differs from f at period {t}, state {}, history [{}]: {} vs {}",
                            self.f.states()[th],
                            f_cums[t - 1].outcomes[i],
                            fmt_q(v),
                            fmt_q(&f_cums[t - 1].laws[th][i])
                        )));
                    }
                }
                for (i, v) in my.iter().enumerate() {
                    if *v != g_cums[t - 1].laws[th][i] {
                        return Err(Error::Invalid(format!(
                            "Y-marginal differs from g at period {t}, state {}, history [{}]: {} vs {}",
                            self.g.states()[th],
                            g_cums[t - 1].outcomes[i],
                            fmt_q(v),
                            fmt_q(&g_cums[t - 1].laws[th][i])
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-history entry of a sequential comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    /// Number of observed periods.
    pub period: usize,
    pub history: Vec<String>,
    /// States not yet excluded by the history.
    pub live_states: Vec<String>,
    /// `None` for histories with zero probability in every state.
    pub verdict: Option<ComparisonVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequentialReport {
    pub status: Status,
    pub rows: Vec<HistoryRow>,
}

impl SequentialReport {
    pub fn row(&self, history: &[&str]) -> Option<&HistoryRow> {
        self.rows.iter().find(|r| r.history.iter().map(String::as_str).eq(history.iter().copied()))
    }
}

/// Build the continuation pair at `x^t` on the live states.
fn continuation(
    c: &Coupling,
    joint: &[Vec<Vec<Q>>],
    xs: &[usize],
    live: &[usize],
) -> Result<(Experiment, Experiment)> {
    let f = &c.f;
    let g = &c.g;
    let t = xs.len();
    let horizon = f.horizon();
    let states: Vec<String> = live.iter().map(|&s| f.states()[s].clone()).collect();
    let f_signals = f.signal_alphabets()[t..].to_vec();
    let g_signals = g.signal_alphabets()[t..].to_vec();
    let f_cont = Experiment::uncontrolled(states.clone(), f_signals, |s, i, rest| {
        let mut full = xs.to_vec();
        full.extend_from_slice(rest);
        f.kernel(t + s, live[i], &full, &vec![0; t + s - 1]).cloned().unwrap_or_default()
    })?;

    // Law of y_{t+1..T} given x^t and θ, from the joint law.
    let fx = f.signal_sizes(horizon);
    let gy = g.signal_sizes(horizon);
    let x_tail: usize = fx[t..].iter().product();
    let y_tail: usize = gy[t..].iter().product();
    let x_lo = history_index(&fx[..t], xs) * x_tail;
    let mut future: Vec<Vec<Q>> = Vec::with_capacity(live.len());
    for &th in live {
        let mut law = vec![Q::zero(); y_tail];
        for row in &joint[th][x_lo..x_lo + x_tail] {
            for (yi, w) in row.iter().enumerate() {
                if !w.is_zero() {
                    law[yi % y_tail] += w;
                }
            }
        }
        let total: Q = law.iter().fold(Q::zero(), |a, b| a + b);
        future.push(law.into_iter().map(|w| w / &total).collect());
    }
    let tail_sizes = gy[t..].to_vec();
    let g_cont = Experiment::uncontrolled(states, g_signals, |s, i, prefix| {
        let width = tail_sizes[s - 1];
        let after: usize = tail_sizes[s..].iter().product();
        let block = width * after;
        let lo = history_index(&tail_sizes[..s - 1], prefix) * block;
        let chunk = &future[i][lo..lo + block];
        let denom: Q = chunk.iter().fold(Q::zero(), |a, b| a + b);
        if denom.is_zero() {
            return vec![Q::new(1.into(), (width as i64).into()); width];
        }
        (0..width)
            .map(|y| chunk[y * after..(y + 1) * after].iter().fold(Q::zero(), |a, b| a + b) / &denom)
            .collect()
    })?;
    Ok((f_cont, g_cont))
}

/// Evaluate every on-path history `x^t`, `t = 0..T-1`.
pub fn sequential_most_valuable(c: &Coupling, delta: &DiscountFactor) -> Result<SequentialReport> {
    let f = &c.f;
    let horizon = f.horizon();
    if delta.horizon() != horizon {
        return Err(Error::HorizonMismatch {
            expected: horizon,
            found: delta.horizon(),
        });
    }
    let joint = c.joint_law();
    let f_cums = cumulative_laws(f)?;
    let mut items: Vec<Vec<usize>> = Vec::new();
    for t in 0..horizon {
        items.extend(histories(&f.signal_sizes(t)));
    }
    let rows = par::map(&items, |xs| -> Result<HistoryRow> {
        let t = xs.len();
        let live: Vec<usize> = if t == 0 {
            (0..f.num_states()).collect()
        } else {
            let i = history_index(&f.signal_sizes(t), xs);
            (0..f.num_states()).filter(|&th| !f_cums[t - 1].laws[th][i].is_zero()).collect()
        };
        let history = xs.iter().enumerate().map(|(i, x)| f.signals(i + 1)[*x].clone()).collect();
        let live_states = live.iter().map(|&s| f.states()[s].clone()).collect();
        if live.is_empty() {
            return Ok(HistoryRow {
                period: t,
                history,
                live_states,
                verdict: None,
            });
        }
        let verdict = match delta.tail(t) {
            None => ComparisonVerdict::sufficient(
                Witness::Condition("no discount weight after this history".into()),
                "trivial: zero tail weight",
            ),
            Some(tail) => {
                let (fc, gc) = continuation(c, &joint, xs, &live)?;
                delta_sufficient(&fc, &gc, &tail)?
            }
        };
        Ok(HistoryRow {
            period: t,
            history,
            live_states,
            verdict: Some(verdict),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let status = if rows
        .iter()
        .any(|r| r.verdict.as_ref().is_some_and(|v| v.status == Status::NotSufficient))
    {
        Status::NotSufficient
    } else if rows
        .iter()
        .any(|r| r.verdict.as_ref().is_some_and(|v| v.status == Status::Inconclusive))
    {
        Status::Inconclusive
    } else {
        Status::Sufficient
    };
    Ok(SequentialReport { status, rows })
}
