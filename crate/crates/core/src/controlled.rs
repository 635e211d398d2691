//! Experiments whose signals depend on realised controls.
//!
//! A test kernel `ξ` turns a simulated history of the target experiment `g`
//! (of any length) and the realised controls into a control distribution.
//! Given `ξ`, the target runs as an uncontrolled process over paths
//! `(y^t, l^{t-1})`. The source `f` runs with controls drawn by first
//! simulating a target path through a garbling `γ` and then applying `ξ`.
//! The comparison asks, for each `ξ`, for a `γ` that reproduces the
//! discounted target process from the discounted source process while also
//! being the garbling that drives the source's controls.
//!
//! For a fixed `ξ` that fixed-point condition is linear once each garbling
//! row is weighted by the probability of reaching its control path (the
//! same change of variables as the sequence form of an extensive game).
//! [`controlled_feasible_for_xi`] solves that system exactly, so each kernel
//! gets a definite answer.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve_feasibility, FeasibilityProblem, FeasibilityResult};
use crate::model::{histories, DiscountFactor, Experiment};
use crate::oracle::ControlMap;
use crate::par;
use crate::rational::{fmt_q, is_probability_vector, serde_q, serde_qmat, serde_qvec, Q};
use crate::sufficiency::{certificate_to_decision_problem, delta_sufficient};
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Witness};

/// A history `(x^t, k^{t-1})` of signals and the controls realised between
/// them. The period is `signals.len()`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Path {
    pub signals: Vec<usize>,
    pub controls: Vec<usize>,
}

impl Path {
    pub fn new(signals: Vec<usize>, controls: Vec<usize>) -> Self {
        Self { signals, controls }
    }

    pub fn period(&self) -> usize {
        self.signals.len()
    }

    /// The first `min(period, t)` signals with the controls between them.
    pub fn truncate(&self, t: usize) -> Path {
        let n = self.period().min(t);
        Path::new(self.signals[..n].to_vec(), self.controls[..n.saturating_sub(1)].to_vec())
    }

    pub fn label(&self, e: &Experiment) -> String {
        let mut parts = Vec::new();
        for (i, x) in self.signals.iter().enumerate() {
            if i > 0 {
                parts.push(format!("[{}]", e.controls(i)[self.controls[i - 1]]));
            }
            parts.push(e.signals(i + 1)[*x].clone());
        }
        parts.join(" ")
    }
}

/// Every path of `e`, period by period.
pub fn all_paths(e: &Experiment) -> Vec<Path> {
    let mut out = Vec::new();
    for t in 1..=e.horizon() {
        for ks in histories(&e.control_sizes(t - 1)) {
            for xs in histories(&e.signal_sizes(t)) {
                out.push(Path::new(xs, ks.clone()));
            }
        }
    }
    out
}

fn path_index(paths: &[Path]) -> BTreeMap<Path, usize> {
    paths.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect()
}

// ---------------------------------------------------------------------------
// Test kernels

/// What part of the simulated history a kernel reads at period `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelView {
    /// The whole simulated path.
    Full,
    /// Only its first `t` signals (and the controls between them).
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelRow {
    pub simulated: Path,
    pub realized: Vec<usize>,
    #[serde(with = "serde_qvec")]
    pub dist: Vec<Q>,
}

/// `ξ_t(k_t | simulated path, realised k^{t-1})` for `t = 1..T-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestKernel {
    pub label: String,
    pub view: KernelView,
    /// `rows[t-1]`, sorted by `(simulated, realized)`.
    pub rows: Vec<Vec<KernelRow>>,
}

impl TestKernel {
    /// Tabulate a kernel over every key `g` can present.
    pub fn from_fn<F>(g: &Experiment, view: KernelView, label: impl Into<String>, f: F) -> Result<Self>
    where
        F: Fn(usize, &Path, &[usize]) -> Vec<Q>,
    {
        let mut rows = Vec::new();
        for t in 1..g.horizon() {
            let mut period = Vec::new();
            for sim in kernel_views(g, view, t) {
                for ks in histories(&g.control_sizes(t - 1)) {
                    let dist = f(t, &sim, &ks);
                    period.push(KernelRow {
                        simulated: sim.clone(),
                        realized: ks,
                        dist,
                    });
                }
            }
            period.sort_by(|a, b| (&a.simulated, &a.realized).cmp(&(&b.simulated, &b.realized)));
            rows.push(period);
        }
        let k = Self {
            label: label.into(),
            view,
            rows,
        };
        k.check(g)?;
        Ok(k)
    }

    /// Always play `controls[t-1]` at period `t`.
    pub fn constant(g: &Experiment, controls: &[usize]) -> Result<Self> {
        if controls.len() + 1 != g.horizon().max(1) {
            return Err(Error::Invalid("a constant kernel needs one control per period before the last".into()));
        }
        let label = format!(
            "constant({})",
            controls
                .iter()
                .enumerate()
                .map(|(i, k)| g.controls(i + 1).get(*k).cloned().unwrap_or_else(|| format!("#{k}")))
                .collect::<Vec<_>>()
                .join(",")
        );
        Self::from_fn(g, KernelView::Prefix, label, |t, _, _| point_mass(g.controls(t).len(), controls[t - 1]))
    }

    /// Row for a simulated path and realised controls at period `t`.
    pub fn row(&self, t: usize, simulated: &Path, realized: &[usize]) -> Result<&Vec<Q>> {
        let key = match self.view {
            KernelView::Full => simulated.clone(),
            KernelView::Prefix => simulated.truncate(t),
        };
        let period = self
            .rows
            .get(t - 1)
            .ok_or_else(|| Error::Invalid(format!("kernel {} has no period {t}", self.label)))?;
        period
            .binary_search_by(|r| (&r.simulated, r.realized.as_slice()).cmp(&(&key, realized)))
            .map(|i| &period[i].dist)
            .map_err(|_| Error::Invalid(format!("kernel {} has no row for {key:?} at period {t}", self.label)))
    }

    /// Every row is present, sorted, and a distribution over `K_t`.
    pub fn check(&self, g: &Experiment) -> Result<()> {
        if self.rows.len() + 1 != g.horizon().max(1) {
            return Err(Error::HorizonMismatch {
                expected: g.horizon().saturating_sub(1),
                found: self.rows.len(),
            });
        }
        for (i, period) in self.rows.iter().enumerate() {
            let t = i + 1;
            if period
                .windows(2)
                .any(|w| (&w[0].simulated, &w[0].realized) >= (&w[1].simulated, &w[1].realized))
            {
                return Err(Error::Invalid(format!("kernel {} rows at period {t} are not sorted", self.label)));
            }
            for r in period {
                if r.dist.len() != g.controls(t).len() || !is_probability_vector(&r.dist) {
                    return Err(Error::MalformedRow(format!(
                        "kernel {} at period {t}, simulated {:?}: not a distribution over K_{t}",
                        self.label, r.simulated
                    )));
                }
            }
            for sim in all_paths(g) {
                for ks in histories(&g.control_sizes(t - 1)) {
                    self.row(t, &sim, &ks)?;
                }
            }
        }
        Ok(())
    }

    /// Deterministic and blind to the simulated history.
    pub fn is_constant(&self) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        for period in &self.rows {
            let first = period.first()?;
            let k = first.dist.iter().position(One::is_one)?;
            if period.iter().any(|r| r.dist != first.dist) {
                return None;
            }
            out.push(k);
        }
        Some(out)
    }
}

fn point_mass(n: usize, i: usize) -> Vec<Q> {
    (0..n).map(|j| if j == i { Q::one() } else { Q::zero() }).collect()
}

fn kernel_views(g: &Experiment, view: KernelView, t: usize) -> Vec<Path> {
    all_paths(g)
        .into_iter()
        .filter(|p| view == KernelView::Full || p.period() <= t)
        .collect()
}

/// Number of deterministic prefix-view kernels, or `None` on overflow.
pub fn deterministic_kernel_count(g: &Experiment) -> Option<u128> {
    let mut total: u128 = 1;
    for t in 1..g.horizon() {
        let keys = kernel_views(g, KernelView::Prefix, t).len() as u128
            * histories(&g.control_sizes(t - 1)).len() as u128;
        let k = g.controls(t).len() as u128;
        for _ in 0..keys {
            total = total.checked_mul(k)?;
        }
    }
    Some(total)
}

/// Every deterministic prefix-view kernel, history-blind ones first.
pub fn deterministic_family(g: &Experiment, cap: usize) -> Result<Vec<TestKernel>> {
    let count = deterministic_kernel_count(g);
    match count {
        Some(c) if c <= cap as u128 => {}
        _ => {
            return Err(Error::CapExceeded(format!(
                "{} deterministic kernels exceed the cap of {cap}",
                count.map_or("more than 2^128".to_string(), |c| c.to_string())
            )))
        }
    }
    let mut keys: Vec<(usize, Path, Vec<usize>)> = Vec::new();
    for t in 1..g.horizon() {
        for sim in kernel_views(g, KernelView::Prefix, t) {
            for ks in histories(&g.control_sizes(t - 1)) {
                keys.push((t, sim.clone(), ks));
            }
        }
    }
    let radix: Vec<usize> = keys.iter().map(|(t, _, _)| g.controls(*t).len()).collect();
    let mut family = Vec::new();
    for choice in histories(&radix) {
        let table: BTreeMap<(usize, &Path, &[usize]), usize> = keys
            .iter()
            .zip(&choice)
            .map(|((t, p, ks), c)| ((*t, p, ks.as_slice()), *c))
            .collect();
        let label = format!(
            "deterministic[{}]",
            choice.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("")
        );
        let kernel = TestKernel::from_fn(g, KernelView::Prefix, label, |t, sim, ks| {
            point_mass(g.controls(t).len(), table[&(t, sim, ks)])
        })?;
        family.push(kernel);
    }
    family.sort_by_key(|k| k.is_constant().is_none());
    Ok(family)
}

// ---------------------------------------------------------------------------
// Garbling profiles and process laws

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub source: Path,
    /// `(target index, probability)` with positive probabilities.
    pub entries: Vec<(usize, SerQ)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerQ(#[serde(with = "serde_q")] pub Q);

/// `γ_t(· | x^t, k^{t-1})` over every target path of `g`. Sources without a
/// row put all mass on `targets[0]`; they are only omitted where the source
/// process never reaches them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GarblingProfile {
    pub targets: Vec<Path>,
    /// Sorted by source.
    pub rows: Vec<ProfileRow>,
}

impl GarblingProfile {
    pub fn new(targets: Vec<Path>, rows: BTreeMap<Path, Vec<(usize, Q)>>) -> Self {
        let rows = rows
            .into_iter()
            .map(|(source, entries)| ProfileRow {
                source,
                entries: entries
                    .into_iter()
                    .filter(|(_, p)| !p.is_zero())
                    .map(|(i, p)| (i, SerQ(p)))
                    .collect(),
            })
            .collect();
        Self { targets, rows }
    }

    /// Sparse row for `source`.
    pub fn row(&self, source: &Path) -> Vec<(usize, Q)> {
        match self.rows.binary_search_by(|r| r.source.cmp(source)) {
            Ok(i) => self.rows[i].entries.iter().map(|(j, p)| (*j, p.0.clone())).collect(),
            Err(_) => vec![(0, Q::one())],
        }
    }

    pub fn is_stochastic(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].source < w[1].source)
            && self.rows.iter().all(|r| {
                r.entries.iter().all(|(j, p)| *j < self.targets.len() && p.0 >= Q::zero())
                    && r.entries.iter().fold(Q::zero(), |acc, (_, p)| acc + &p.0).is_one()
            })
    }
}

/// Per-state probabilities of every path of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessLaw {
    pub paths: Vec<Path>,
    /// `laws[θ][i]`.
    #[serde(with = "serde_qmat")]
    pub laws: Vec<Vec<Q>>,
}

impl ProcessLaw {
    /// Total mass of state `θ` on period-`t` paths.
    pub fn period_mass(&self, state: usize, t: usize) -> Q {
        self.paths
            .iter()
            .zip(&self.laws[state])
            .filter(|(p, _)| p.period() == t)
            .fold(Q::zero(), |acc, (_, v)| acc + v)
    }

    pub fn get(&self, state: usize, path: &Path) -> Q {
        self.paths
            .iter()
            .position(|p| p == path)
            .map_or_else(Q::zero, |i| self.laws[state][i].clone())
    }
}

/// Signal part `Π f_s(x_s | x^{s-1}, k^{s-1}, θ)` of every path.
fn signal_weights(e: &Experiment, paths: &[Path]) -> Vec<Vec<Q>> {
    (0..e.num_states())
        .map(|th| {
            paths
                .iter()
                .map(|p| {
                    let mut w = Q::one();
                    for s in 1..=p.period() {
                        let row = e
                            .kernel(s, th, &p.signals[..s - 1], &p.controls[..s - 1])
                            .expect("validated experiment has every kernel row");
                        w *= &row[p.signals[s - 1]];
                        if w.is_zero() {
                            break;
                        }
                    }
                    w
                })
                .collect()
        })
        .collect()
}

/// Run `e` with control distributions supplied by `control(t, path)`.
fn process<C>(e: &Experiment, control: C) -> Result<ProcessLaw>
where
    C: Fn(usize, &Path) -> Result<Vec<Q>>,
{
    let paths = all_paths(e);
    let index = path_index(&paths);
    let mut laws = signal_weights(e, &paths);
    // Control weight of each path, independent of the state.
    let mut weight = vec![Q::zero(); paths.len()];
    let mut cache: BTreeMap<usize, Vec<Q>> = BTreeMap::new();
    for (i, p) in paths.iter().enumerate() {
        let t = p.period();
        if t == 1 {
            weight[i] = Q::one();
            continue;
        }
        let parent = Path::new(p.signals[..t - 1].to_vec(), p.controls[..t - 2].to_vec());
        let pi = index[&parent];
        if weight[pi].is_zero() {
            continue;
        }
        if let std::collections::btree_map::Entry::Vacant(v) = cache.entry(pi) {
            let dist = control(t - 1, &parent)?;
            if dist.len() != e.controls(t - 1).len() || !is_probability_vector(&dist) {
                return Err(Error::MalformedRow(format!("control distribution after {parent:?}")));
            }
            v.insert(dist);
        }
        weight[i] = &weight[pi] * &cache[&pi][p.controls[t - 2]];
    }
    for law in &mut laws {
        for (v, w) in law.iter_mut().zip(&weight) {
            *v *= w;
        }
    }
    Ok(ProcessLaw { paths, laws })
}

fn same_controls(f: &Experiment, g: &Experiment) -> Result<()> {
    if f.states() != g.states() {
        return Err(Error::StateMismatch("experiments have different state spaces".into()));
    }
    if f.horizon() != g.horizon() {
        return Err(Error::HorizonMismatch {
            expected: f.horizon(),
            found: g.horizon(),
        });
    }
    if f.control_alphabets() != g.control_alphabets() {
        return Err(Error::Invalid("experiments must share their control alphabets".into()));
    }
    Ok(())
}

/// The target process `P_{θ,g,ξ}` over every path of `g`.
pub fn g_process_law(g: &Experiment, xi: &TestKernel) -> Result<ProcessLaw> {
    xi.check(g)?;
    process(g, |t, p| xi.row(t, p, &p.controls).cloned())
}

/// The source process `P_{θ,f,ξ∘γ}` over every path of `f`.
pub fn f_process_law(f: &Experiment, xi: &TestKernel, gamma: &GarblingProfile) -> Result<ProcessLaw> {
    if !gamma.is_stochastic() {
        return Err(Error::Invalid("garbling profile rows must be distributions".into()));
    }
    process(f, |t, p| {
        let mut out = vec![Q::zero(); f.controls(t).len()];
        for (j, w) in gamma.row(p) {
            let r = xi.row(t, &gamma.targets[j], &p.controls)?;
            for (o, v) in out.iter_mut().zip(r) {
                *o += &w * v;
            }
        }
        Ok(out)
    })
}

/// Exact substitution check of the comparison equation for one kernel:
/// `δ_t P_g(τ|θ) = Σ_s δ_{t(s)} P_{f,ξ∘γ}(s|θ) γ(τ|s)` for every target
/// path `τ` and state `θ`.
pub fn profile_satisfies(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    xi: &TestKernel,
    gamma: &GarblingProfile,
) -> Result<bool> {
    same_controls(f, g)?;
    require_horizon(f, delta)?;
    let pg = g_process_law(g, xi)?;
    if gamma.targets != pg.paths {
        return Err(Error::Invalid("garbling targets must be the paths of g".into()));
    }
    let pf = f_process_law(f, xi, gamma)?;
    for th in 0..f.num_states() {
        let mut rhs = vec![Q::zero(); pg.paths.len()];
        for (s, mass) in pf.paths.iter().zip(&pf.laws[th]) {
            if mass.is_zero() {
                continue;
            }
            let w = delta.weight(s.period()) * mass;
            for (j, p) in gamma.row(s) {
                rhs[j] += &w * p;
            }
        }
        for (j, tau) in pg.paths.iter().enumerate() {
            if delta.weight(tau.period()) * &pg.laws[th][j] != rhs[j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn require_horizon(e: &Experiment, delta: &DiscountFactor) -> Result<()> {
    if delta.horizon() != e.horizon() {
        return Err(Error::HorizonMismatch {
            expected: e.horizon(),
            found: delta.horizon(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// The per-kernel system

/// Decide, for one kernel, whether some garbling profile satisfies the
/// comparison equation while driving the source's controls.
///
/// Variables are `m(τ|s) = ρ(s)·γ(τ|s)` and `ρ(x^t, k^t)`, the probability
/// that the source's controls follow `k^t` given its signals. Rows:
///
/// * `Σ_τ m(τ|s) = ρ(parent of s)` for every reachable source `s`;
/// * `ρ(x^t, k^t) = Σ_τ m(τ|x^t, k^{t-1}) ξ_t(k_t|τ, k^{t-1})`;
/// * the comparison equation with `P_{f,ξ∘γ}(s|θ)·γ(τ|s) = F(s|θ)·m(τ|s)`.
///
/// A witness divides back to `γ` and is re-checked by substitution.
pub fn controlled_feasible_for_xi(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    xi: &TestKernel,
) -> Result<ComparisonVerdict> {
    same_controls(f, g)?;
    require_horizon(f, delta)?;
    let horizon = f.horizon();
    let pg = g_process_law(g, xi)?;
    let targets = pg.paths.clone();
    let n_states = f.num_states();
    let live_targets: Vec<usize> = (0..targets.len())
        .filter(|&j| {
            !delta.weight(targets[j].period()).is_zero() && (0..n_states).any(|th| !pg.laws[th][j].is_zero())
        })
        .collect();

    let sources = all_paths(f);
    let weights = signal_weights(f, &sources);
    let source_live = |i: usize| (0..n_states).any(|th| !weights[th][i].is_zero());

    // Candidate targets per source.
    let mut candidates: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in sources.iter().enumerate() {
        if !source_live(i) {
            continue;
        }
        let t = s.period();
        if !delta.weight(t).is_zero() {
            candidates.insert(i, live_targets.clone());
        } else if t < horizon {
            // Only the control distribution matters: one target per distinct ξ row.
            let mut seen: Vec<&Vec<Q>> = Vec::new();
            let mut reps = Vec::new();
            for (j, tau) in targets.iter().enumerate() {
                let r = xi.row(t, tau, &s.controls)?;
                if !seen.contains(&r) {
                    seen.push(r);
                    reps.push(j);
                }
            }
            candidates.insert(i, reps);
        }
    }

    let index = path_index(&sources);
    let mut lp = FeasibilityProblem::new();
    let mut m_vars: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&i, cands) in &candidates {
        for &j in cands {
            m_vars.insert((i, j), lp.add_variable(format!("m[{i},{j}]")));
        }
    }
    // ρ(x^t, k^t) is needed when some child source has variables.
    let mut rho_vars: BTreeMap<(Vec<usize>, Vec<usize>), usize> = BTreeMap::new();
    for &i in candidates.keys() {
        let s = &sources[i];
        let t = s.period();
        if t > 1 {
            let key = (s.signals[..t - 1].to_vec(), s.controls.clone());
            rho_vars.entry(key).or_insert_with(|| lp.add_variable(format!("rho[{i}]")));
        }
    }
    // Row-sum rows.
    for (&i, cands) in &candidates {
        let s = &sources[i];
        let t = s.period();
        let mut coeffs: Vec<(usize, Q)> = cands.iter().map(|&j| (m_vars[&(i, j)], Q::one())).collect();
        if t == 1 {
            lp.add_row(coeffs, Q::one());
        } else {
            let key = (s.signals[..t - 1].to_vec(), s.controls.clone());
            coeffs.push((rho_vars[&key], -Q::one()));
            lp.add_row(coeffs, Q::zero());
        }
    }
    // Control rows.
    for ((xs, ks), &r) in &rho_vars {
        let t = xs.len();
        let parent = Path::new(xs.clone(), ks[..t - 1].to_vec());
        let pi = index[&parent];
        let k_t = ks[t - 1];
        let mut coeffs = vec![(r, Q::one())];
        for &j in &candidates[&pi] {
            let x = &xi.row(t, &targets[j], &parent.controls)?[k_t];
            if !x.is_zero() {
                coeffs.push((m_vars[&(pi, j)], -x.clone()));
            }
        }
        lp.add_row(coeffs, Q::zero());
    }
    // Comparison rows.
    for &j in &live_targets {
        let dt = delta.weight(targets[j].period());
        for th in 0..n_states {
            let mut coeffs = Vec::new();
            for (&i, cands) in &candidates {
                let ds = delta.weight(sources[i].period());
                if ds.is_zero() || weights[th][i].is_zero() || !cands.contains(&j) {
                    continue;
                }
                coeffs.push((m_vars[&(i, j)], ds * &weights[th][i]));
            }
            lp.add_row(coeffs, dt * &pg.laws[th][j]);
        }
    }

    match solve_feasibility(&lp)? {
        FeasibilityResult::Witness(v) => {
            let mut rows = BTreeMap::new();
            for (&i, cands) in &candidates {
                let s = &sources[i];
                let t = s.period();
                let mass = if t == 1 {
                    Q::one()
                } else {
                    v[rho_vars[&(s.signals[..t - 1].to_vec(), s.controls.clone())]].clone()
                };
                let row: Vec<(usize, Q)> = if mass.is_zero() {
                    vec![(cands[0], Q::one())]
                } else {
                    cands.iter().map(|&j| (j, &v[m_vars[&(i, j)]] / &mass)).collect()
                };
                rows.insert(s.clone(), row);
            }
            let profile = GarblingProfile::new(targets, rows);
            if !profile_satisfies(f, g, delta, xi, &profile)? {
                return Err(Error::Invalid(format!(
                    "internal: recovered garbling for kernel {} fails substitution",
                    xi.label
                )));
            }
            Ok(ComparisonVerdict::sufficient(
                Witness::Controlled {
                    family: xi.label.clone(),
                    profiles: vec![(xi.label.clone(), profile)],
                },
                format!("lp: controlled system feasible for kernel {}", xi.label),
            ))
        }
        FeasibilityResult::Certificate(dual) => Ok(ComparisonVerdict::not_sufficient(
            Certificate {
                kind: CertificateKind::Dual {
                    system: format!("controlled system for kernel {}", xi.label),
                    problem: Box::new(lp),
                    dual,
                },
                prior: None,
                delta: Some(delta.clone()),
                period: None,
                problem: None,
            },
            format!("lp: controlled system infeasible for kernel {}", xi.label),
        )),
    }
}

// ---------------------------------------------------------------------------
// Families

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyOptions {
    /// Largest deterministic family that is enumerated.
    pub cap: usize,
    pub deterministic: bool,
    pub user: Vec<TestKernel>,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            cap: 4096,
            deterministic: true,
            user: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledOutcome {
    pub verdict: ComparisonVerdict,
    pub refuting_kernel: Option<TestKernel>,
    pub kernels_checked: usize,
    pub family_size: usize,
    pub family: String,
}

/// Check every kernel of the family. A single refuting kernel settles the
/// comparison negatively. A positive verdict only speaks for the family.
pub fn controlled_delta_sufficient(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    opts: &FamilyOptions,
) -> Result<ControlledOutcome> {
    same_controls(f, g)?;
    require_horizon(f, delta)?;
    if f.is_uncontrolled() && g.is_uncontrolled() {
        let verdict = delta_sufficient(f, g, delta)?.with_note("singleton controls: every test kernel is trivial");
        return Ok(ControlledOutcome {
            verdict,
            refuting_kernel: None,
            kernels_checked: 0,
            family_size: 1,
            family: "trivial".into(),
        });
    }
    let mut family = Vec::new();
    let mut description = Vec::new();
    let mut capped = None;
    if opts.deterministic {
        match deterministic_family(g, opts.cap) {
            Ok(k) => {
                description.push(format!("{} deterministic prefix kernels", k.len()));
                family.extend(k);
            }
            Err(Error::CapExceeded(msg)) => capped = Some(msg),
            Err(e) => return Err(e),
        }
    }
    for k in &opts.user {
        k.check(g)?;
    }
    if !opts.user.is_empty() {
        description.push(format!("{} user kernels", opts.user.len()));
        family.extend(opts.user.iter().cloned());
    }
    if family.is_empty() {
        let msg = capped.unwrap_or_else(|| "empty kernel family".into());
        return Ok(ControlledOutcome {
            verdict: ComparisonVerdict::inconclusive(format!("no kernels checked: {msg}")),
            refuting_kernel: None,
            kernels_checked: 0,
            family_size: 0,
            family: "none".into(),
        });
    }
    let description = description.join(" + ");
    let results = par::map_until(
        &family,
        |k| controlled_feasible_for_xi(f, g, delta, k),
        |r| !matches!(r, Ok(v) if v.is_sufficient()),
    );
    let checked = results.len();
    let mut profiles = Vec::new();
    for (k, r) in family.iter().zip(results) {
        let v = r?;
        if !v.is_sufficient() {
            let verdict = refutation(f, g, delta, k, v)?;
            return Ok(ControlledOutcome {
                verdict,
                refuting_kernel: Some(k.clone()),
                kernels_checked: checked,
                family_size: family.len(),
                family: description,
            });
        }
        if let Some(Witness::Controlled { profiles: p, .. }) = v.witness {
            profiles.extend(p);
        }
    }
    let mut verdict = ComparisonVerdict::sufficient(
        Witness::Controlled {
            family: description.clone(),
            profiles,
        },
        format!("sufficient over the family: {description}"),
    );
    if let Some(msg) = capped {
        verdict = ComparisonVerdict::inconclusive(format!(
            "deterministic family skipped ({msg}); user kernels all feasible"
        ));
    }
    Ok(ControlledOutcome {
        verdict,
        refuting_kernel: None,
        kernels_checked: checked,
        family_size: family.len(),
        family: description,
    })
}

/// Upgrade a refutation by a history-blind kernel to a certificate with a
/// separating decision problem: with controls pinned, both experiments are
/// uncontrolled and the static route applies.
fn refutation(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    k: &TestKernel,
    v: ComparisonVerdict,
) -> Result<ComparisonVerdict> {
    match k.is_constant() {
        Some(ks) => pinned_refutation(f, g, delta, &ks, &k.label),
        None => Ok(v.with_note(format!("refuting kernel: {}", k.label))),
    }
}

fn pinned_refutation(
    f: &Experiment,
    g: &Experiment,
    delta: &DiscountFactor,
    ks: &[usize],
    label: &str,
) -> Result<ComparisonVerdict> {
    let fixed = delta_sufficient(&pin_controls(f, ks)?, &pin_controls(g, ks)?, delta)?;
    let Some(mut cert) = fixed.certificate else {
        return Err(Error::Invalid(format!(
            "internal: kernel {label} refutes but the pinned comparison does not"
        )));
    };
    let dp = certificate_to_decision_problem(&cert, None)?;
    let kappa = ControlMap::from_fn(f, dp.actions.len(), |t, _, _| {
        point_mass(f.controls(t).len(), ks.get(t - 1).copied().unwrap_or(0))
    })?;
    cert.problem = Some(dp.with_control_map(kappa));
    Ok(ComparisonVerdict::not_sufficient(
        cert,
        format!("kernel {label} refutes; controls pinned to a fixed sequence"),
    ))
}

/// The uncontrolled experiment obtained by always playing `ks[t-1]`.
pub fn pin_controls(e: &Experiment, ks: &[usize]) -> Result<Experiment> {
    Experiment::uncontrolled(e.states().to_vec(), e.signal_alphabets().to_vec(), |t, s, xs| {
        e.kernel(t, s, xs, &ks[..t - 1])
            .expect("validated experiment has every kernel row")
            .clone()
    })
}

// ---------------------------------------------------------------------------
// Arrival-time experiments

/// Two periods. The informative draw `z ~ h(·|θ)` arrives at period 1 with
/// probability `α₁`, at period 2 with probability `α₂ᵏ` under control `k`,
/// and never otherwise. Likewise `β` for the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalParams {
    /// `h[θ][z]`.
    #[serde(with = "serde_qmat")]
    pub h: Vec<Vec<Q>>,
    #[serde(with = "serde_q")]
    pub alpha1: Q,
    #[serde(with = "serde_q")]
    pub beta1: Q,
    #[serde(with = "serde_qvec")]
    pub alpha2: Vec<Q>,
    #[serde(with = "serde_qvec")]
    pub beta2: Vec<Q>,
    pub delta: DiscountFactor,
}

impl ArrivalParams {
    pub fn check(&self) -> Result<()> {
        if self.h.is_empty() || self.h.iter().any(|r| r.len() != self.h[0].len() || !is_probability_vector(r)) {
            return Err(Error::Invalid("h must give one distribution over Z per state".into()));
        }
        if self.h[0].is_empty() {
            return Err(Error::Invalid("Z must be nonempty".into()));
        }
        if self.alpha2.is_empty() || self.alpha2.len() != self.beta2.len() {
            return Err(Error::Invalid("need one α₂ and one β₂ per control".into()));
        }
        if self.delta.horizon() != 2 {
            return Err(Error::HorizonMismatch {
                expected: 2,
                found: self.delta.horizon(),
            });
        }
        let unit = |v: &Q| *v >= Q::zero() && *v <= Q::one();
        for (first, second, name) in [(&self.alpha1, &self.alpha2, "α"), (&self.beta1, &self.beta2, "β")] {
            if !unit(first) || second.iter().any(|v| !unit(v) || first + v > Q::one()) {
                return Err(Error::Invalid(format!(
                    "{name}: arrival probabilities must lie in [0, 1] and sum to at most 1 per control"
                )));
            }
        }
        Ok(())
    }

    pub fn num_controls(&self) -> usize {
        self.alpha2.len()
    }

    pub fn num_signals(&self) -> usize {
        self.h[0].len()
    }

    /// Some two states disagree on the law of the draw.
    pub fn is_informative(&self) -> bool {
        self.h.iter().any(|r| *r != self.h[0])
    }

    /// `α₁ + δ₂α₂ᵏ - β₁ - δ₂β₂ᵏ`.
    pub fn margin(&self, k: usize) -> Q {
        let d2 = self.delta.weight(2);
        &self.alpha1 + d2 * &self.alpha2[k] - &self.beta1 - d2 * &self.beta2[k]
    }

    pub fn f_experiment(&self) -> Result<Experiment> {
        self.check()?;
        arrival_experiment(&self.h, &self.alpha1, &self.alpha2)
    }

    pub fn g_experiment(&self) -> Result<Experiment> {
        self.check()?;
        arrival_experiment(&self.h, &self.beta1, &self.beta2)
    }
}

/// Signals are `z0, z1, ...` followed by `none` (index `|Z|`).
fn arrival_experiment(h: &[Vec<Q>], first: &Q, second: &[Q]) -> Result<Experiment> {
    let nz = h[0].len();
    let mut letters: Vec<String> = (0..nz).map(|z| format!("z{z}")).collect();
    letters.push("none".into());
    let states = (0..h.len()).map(|s| format!("s{s}")).collect();
    let controls = vec![(0..second.len()).map(|k| format!("k{k}")).collect(), vec!["-".to_string()]];
    let rest = Q::one() - first;
    Experiment::controlled(states, vec![letters.clone(), letters], controls, |t, s, xs, ks| {
        let mut row = vec![Q::zero(); nz + 1];
        if t == 1 {
            for z in 0..nz {
                row[z] = first * &h[s][z];
            }
            row[nz] = rest.clone();
        } else if xs[0] < nz || rest.is_zero() {
            row[nz] = Q::one();
        } else {
            let a2 = &second[ks[0]];
            for z in 0..nz {
                row[z] = a2 / &rest * &h[s][z];
            }
            row[nz] = (&rest - a2) / &rest;
        }
        row
    })
}

/// The explicit garbling for a kernel that reads at most the first
/// simulated signal. The observed `z` is never garbled into another draw.
pub fn arrival_garbling(a: &ArrivalParams, xi: &TestKernel) -> Result<GarblingProfile> {
    let f = a.f_experiment()?;
    let g = a.g_experiment()?;
    xi.check(&g)?;
    let nz = a.num_signals();
    let nk = a.num_controls();
    let none = nz;
    let (d1, d2) = (a.delta.weight(1).clone(), a.delta.weight(2).clone());
    let targets = all_paths(&g);
    let index = path_index(&targets);
    let t1 = |y: usize| index[&Path::new(vec![y], vec![])];
    let t2 = |y1: usize, y2: usize, k: usize| index[&Path::new(vec![y1, y2], vec![k])];
    let xi_after = |y: usize| xi.row(1, &Path::new(vec![y], vec![]), &[]).cloned();
    let xi_none = xi_after(none)?;

    let beta_never: Vec<Q> = a.beta2.iter().map(|b2| Q::one() - &a.beta1 - b2).collect();
    let dsum = &d1 * (Q::one() - &a.beta1)
        + (0..nk).fold(Q::zero(), |acc, k| acc + &d2 * &beta_never[k] * &xi_none[k]);
    let b = &a.beta1 + (0..nk).fold(Q::zero(), |acc, k| acc + &d2 * &a.beta2[k] * &xi_none[k]);

    // Row for sources without an observed draw.
    let mut quiet: Vec<(usize, Q)> = Vec::new();
    if dsum.is_zero() {
        quiet.push((t1(none), Q::one()));
    } else {
        quiet.push((t1(none), &d1 * (Q::one() - &a.beta1) / &dsum));
        for k in 0..nk {
            quiet.push((t2(none, none, k), &d2 * &beta_never[k] * &xi_none[k] / &dsum));
        }
    }
    // Control distribution of the source after seeing nothing.
    let mut c = vec![Q::zero(); nk];
    for (j, w) in &quiet {
        let r = xi.row(1, &targets[*j], &[])?;
        for k in 0..nk {
            c[k] += w * &r[k];
        }
    }
    let big_a = &a.alpha1 + (0..nk).fold(Q::zero(), |acc, k| acc + &d2 * &a.alpha2[k] * &c[k]);
    if b > big_a {
        return Err(Error::Precondition(format!(
            "construction undefined: {} > {}",
            fmt_q(&b),
            fmt_q(&big_a)
        )));
    }

    let mut rows: BTreeMap<Path, Vec<(usize, Q)>> = BTreeMap::new();
    let informed = |z: usize| -> Result<Vec<(usize, Q)>> {
        if big_a.is_zero() {
            return Ok(quiet.clone());
        }
        let xi_z = xi_after(z)?;
        let mut row = vec![(t1(z), &d1 * &a.beta1 / &big_a)];
        for k in 0..nk {
            row.push((t2(z, none, k), &d2 * &a.beta1 * &xi_z[k] / &big_a));
            row.push((t2(none, z, k), &d2 * &a.beta2[k] * &xi_none[k] / &big_a));
        }
        let rest = Q::one() - &b / &big_a;
        for (j, w) in &quiet {
            if !dsum.is_zero() {
                row.push((*j, w * &rest));
            }
        }
        Ok(row)
    };
    rows.insert(Path::new(vec![none], vec![]), quiet.clone());
    for z in 0..nz {
        let row = informed(z)?;
        rows.insert(Path::new(vec![z], vec![]), row.clone());
        for kh in 0..nk {
            rows.insert(Path::new(vec![z, none], vec![kh]), row.clone());
            rows.insert(Path::new(vec![none, z], vec![kh]), row.clone());
        }
    }
    for kh in 0..nk {
        rows.insert(Path::new(vec![none, none], vec![kh]), quiet.clone());
    }
    // Merge duplicate targets inside a row.
    let rows = rows
        .into_iter()
        .map(|(s, r)| {
            let mut m: BTreeMap<usize, Q> = BTreeMap::new();
            for (j, w) in r {
                *m.entry(j).or_insert_with(Q::zero) += w;
            }
            (s, m.into_iter().collect())
        })
        .collect();
    let profile = GarblingProfile::new(targets, rows);
    debug_assert!(profile.is_stochastic());
    let _ = f;
    Ok(profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalOutcome {
    pub verdict: ComparisonVerdict,
    /// First control violating the arrival inequality.
    pub violating_control: Option<usize>,
    /// Kernels whose explicit garbling passed exact substitution.
    pub kernels_verified: usize,
}

/// Closed-form verdict: when `h` is informative, sufficient iff
/// `α₁ + δ₂α₂ᵏ >= β₁ + δ₂β₂ᵏ` for every control. An uninformative `h` makes
/// every pair sufficient; that case is settled by the kernel systems. A positive verdict is backed by the explicit garbling, checked
/// by substitution against every deterministic prefix kernel (up to `cap`).
pub fn arrival_verdict(a: &ArrivalParams, cap: usize) -> Result<ArrivalOutcome> {
    a.check()?;
    let f = a.f_experiment()?;
    let g = a.g_experiment()?;
    let violated = (0..a.num_controls()).any(|k| a.margin(k) < Q::zero());
    if violated && !a.is_informative() {
        // Every posterior equals the prior, so a slower arrival cannot hurt.
        // The explicit garbling needs the inequality; the kernel systems do not.
        let family = deterministic_family(&g, cap)?;
        let results = par::map(&family, |k| controlled_feasible_for_xi(&f, &g, &a.delta, k));
        let mut profiles = Vec::new();
        for (k, r) in family.iter().zip(results) {
            match r?.witness {
                Some(Witness::Controlled { profiles: p, .. }) => profiles.extend(p),
                _ => return Err(Error::Invalid(format!("internal: kernel {} refutes an uninformative pair", k.label))),
            }
        }
        let n = profiles.len();
        return Ok(ArrivalOutcome {
            verdict: ComparisonVerdict::sufficient(
                Witness::Controlled {
                    family: format!("{n} deterministic prefix kernels"),
                    profiles,
                },
                "h is the same in every state: the draw carries no information",
            )
            .with_note(format!("kernel systems feasible for all {n} kernels")),
            violating_control: None,
            kernels_verified: n,
        });
    }
    if let Some(k) = (0..a.num_controls()).find(|&k| a.margin(k) < Q::zero()) {
        let kernel = TestKernel::constant(&g, &[k])?;
        let mut verdict = pinned_refutation(&f, &g, &a.delta, &[k], &kernel.label)?;
        verdict.notes = vec![format!(
            "arrival inequality fails at control {}: {} < {}",
            g.controls(1)[k],
            fmt_q(&(&a.alpha1 + a.delta.weight(2) * &a.alpha2[k])),
            fmt_q(&(&a.beta1 + a.delta.weight(2) * &a.beta2[k]))
        )];
        verdict.notes.push(format!("refuting kernel: {}", kernel.label));
        return Ok(ArrivalOutcome {
            verdict,
            violating_control: Some(k),
            kernels_verified: 0,
        });
    }
    let family = deterministic_family(&g, cap)?;
    let checks = par::map(&family, |k| -> Result<(String, GarblingProfile, bool)> {
        let gamma = arrival_garbling(a, k)?;
        let ok = profile_satisfies(&f, &g, &a.delta, k, &gamma)?;
        Ok((k.label.clone(), gamma, ok))
    });
    let mut profiles = Vec::new();
    for c in checks {
        let (label, gamma, ok) = c?;
        if !ok {
            return Err(Error::Invalid(format!("internal: explicit garbling fails for kernel {label}")));
        }
        profiles.push((label, gamma));
    }
    let n = profiles.len();
    Ok(ArrivalOutcome {
        verdict: ComparisonVerdict::sufficient(
            Witness::Controlled {
                family: format!("{n} deterministic prefix kernels"),
                profiles,
            },
            "closed form: arrival inequality holds for every control",
        )
        .with_note(format!("explicit garbling verified by substitution for {n} kernels")),
        violating_control: None,
        kernels_verified: n,
    })
}
