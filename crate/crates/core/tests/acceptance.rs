//! Acceptance suite. Runs without the libtest harness and prints one
//! PASS/FAIL line per criterion; the process exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use sufficiency_core::bernoulli::{
    mixture_mps, necessity_max_check, closed_form_verdict, two_draw_static_verdict, BernoulliPair,
};
use sufficiency_core::controlled::{
    arrival_verdict, controlled_delta_sufficient, deterministic_kernel_count, profile_satisfies, ArrivalParams,
    FamilyOptions,
};
use sufficiency_core::dichotomy::mps_compare;
use sufficiency_core::fixtures::{
    correlated_repeaters, delayed_revelation, early_noisy_signal, independent_repeaters, RevealParams,
};
use sufficiency_core::lp::{solve_feasibility, verify_result, FeasibilityProblem, FeasibilityResult};
use sufficiency_core::model::{
    cumulative_laws, mixture_experiment, posterior_distribution, uniform_prior, DiscountFactor, Experiment,
};
use sufficiency_core::oracle::{
    dominance_audit, optimal_value_controlled, random_problem_suite, value_gap, ControlMap, PayoffGrid,
};
use sufficiency_core::rational::{fmt_q, q, qi, Q};
use sufficiency_core::sufficiency::{
    big_delta_sufficient, blackwell_sufficient, certificate_verifies, compose_families, delta_sufficient,
    delta_sufficient_all, family_reproduces, mix_delta_witnesses, sequential_most_valuable,
    verdict_decision_problem,
};
use sufficiency_core::verdict::{ComparisonVerdict, Status, Witness};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Debug>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

/// An uncontrolled comparison whose verdict is audited in criterion 9.
struct Case {
    label: String,
    f: Experiment,
    g: Experiment,
    delta: DiscountFactor,
    verdict: ComparisonVerdict,
}

#[derive(Default)]
struct Collected {
    cases: Vec<Case>,
    arrival: Vec<(String, ArrivalParams, ComparisonVerdict)>,
}

impl Collected {
    fn push(&mut self, label: impl Into<String>, f: &Experiment, g: &Experiment, delta: &DiscountFactor, v: &ComparisonVerdict) {
        self.cases.push(Case {
            label: label.into(),
            f: f.clone(),
            g: g.clone(),
            delta: delta.clone(),
            verdict: v.clone(),
        });
    }
}

fn d(ws: &[Q]) -> DiscountFactor {
    DiscountFactor::new(ws.to_vec()).expect("valid discount factor")
}

fn family_of(v: &ComparisonVerdict) -> Result<Vec<sufficiency_core::model::Garbling>, String> {
    match &v.witness {
        Some(Witness::Family(fam)) => Ok(fam.clone()),
        other => Err(format!("expected a family witness, got {other:?}")),
    }
}

fn first_state_table(e: &Experiment, delta: &DiscountFactor) -> Result<Vec<(Q, Q)>, String> {
    let mix = ok(mixture_experiment(e, delta), "mixture")?;
    let dist = ok(posterior_distribution(&mix, &uniform_prior(2)), "posteriors")?;
    Ok(dist.first_state_masses())
}

// ---------------------------------------------------------------------------

fn intro_example(col: &mut Collected) -> Outcome {
    let f = delayed_revelation();
    let g = early_noisy_signal();
    let half = d(&[q(1, 2), q(1, 2)]);
    let v = ok(delta_sufficient(&f, &g, &half), "delta")?;
    ensure!(v.is_sufficient(), "delayed revelation should be sufficient at (1/2, 1/2): {:?}", v.status);
    ensure!(family_equation_holds(&f, &g, &half, &family_of(&v)?), "witness family fails substitution");
    col.push("intro (1/2,1/2)", &f, &g, &half, &v);

    let tf = first_state_table(&f, &half)?;
    let tg = first_state_table(&g, &half)?;
    ensure!(tf == vec![(qi(0), q(1, 4)), (q(1, 2), q(1, 2)), (qi(1), q(1, 4))], "source posteriors {tf:?}");
    ensure!(tg == vec![(q(5, 12), q(1, 2)), (q(7, 12), q(1, 2))], "target posteriors {tg:?}");

    let mf = ok(mixture_experiment(&f, &half), "mixture")?;
    let mg = ok(mixture_experiment(&g, &half), "mixture")?;
    let prior = uniform_prior(2);
    let mps = ok(
        mps_compare(
            &ok(posterior_distribution(&mf, &prior), "posteriors")?,
            &ok(posterior_distribution(&mg, &prior), "posteriors")?,
        ),
        "mps",
    )?;
    ensure!(mps.is_sufficient(), "convex-order check disagrees");

    let big = ok(big_delta_sufficient(&f, &g), "big delta")?;
    ensure!(big.status == Status::NotSufficient, "per-period comparison should fail");
    let cert = big.certificate.as_ref().ok_or("missing certificate")?;
    ensure!(cert.period == Some(1), "failing period {:?}, expected 1", cert.period);
    ensure!(certificate_verifies(cert), "per-period certificate does not verify");
    col.push("intro per-period", &f, &g, &half, &big);
    Ok("sufficient at (1/2,1/2); posteriors exact; convex order agrees; per-period fails at t=1".into())
}

fn reveal_example(col: &mut Collected) -> Outcome {
    let p = RevealParams::standard();
    let (f, g) = p.experiments();
    let cases = [
        (d(&[qi(1), qi(0), qi(0)]), Status::Sufficient),
        (d(&[q(4, 7), q(2, 7), q(1, 7)]), Status::NotSufficient),
        (d(&[q(1, 3), q(1, 3), q(1, 3)]), Status::Sufficient),
    ];
    let (alpha, beta, chi, eps) = (q(1, 100), qi(1), q(2, 5), qi(0));
    for (delta, want) in &cases {
        let w = delta.weights();
        // Discounted revealed mass, written out directly.
        let fm = (&w[0] + &w[1]) * &alpha + &w[2] * (&alpha + (qi(1) - &alpha) * &beta);
        let gm = (&w[1] + &w[2]) * &chi + &w[2] * (qi(1) - &chi) * &eps;
        ensure!(p.revealed_mass(delta) == (fm.clone(), gm.clone()), "revealed mass helper disagrees");
        let by_inequality = if fm >= gm { Status::Sufficient } else { Status::NotSufficient };
        let v = ok(delta_sufficient(&f, &g, delta), "delta")?;
        ensure!(v.status == *want, "δ={:?}: got {:?}, expected {want:?}", w, v.status);
        ensure!(by_inequality == *want, "δ={:?}: revealed-mass inequality gives {by_inequality:?}", w);
        match v.status {
            Status::Sufficient => ensure!(
                family_equation_holds(&f, &g, delta, &family_of(&v)?),
                "witness fails substitution"
            ),
            _ => ensure!(
                certificate_verifies(v.certificate.as_ref().ok_or("missing certificate")?),
                "certificate does not verify"
            ),
        }
        col.push(format!("reveal {:?}", w.iter().map(fmt_q).collect::<Vec<_>>()), &f, &g, delta, &v);
    }
    Ok("Sufficient / NotSufficient / Sufficient, matching the revealed-mass inequality".into())
}

fn random_accuracy(rng: &mut ChaCha8Rng) -> Q {
    let den = rng.gen_range(2..=12);
    q(rng.gen_range((den + 1) / 2..=den), den)
}

fn bernoulli_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<(BernoulliPair, BernoulliPair, Q)> {
    let weights = [qi(0), q(1, 4), q(1, 3), q(1, 2), q(2, 3), q(3, 4), qi(1)];
    let pair = |rng: &mut ChaCha8Rng| {
        let (a, b) = (random_accuracy(rng), random_accuracy(rng));
        BernoulliPair::new(a.clone().max(b.clone()), a.min(b)).expect("ordered accuracies")
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = pair(rng);
        // Every fifth point compares an experiment with itself.
        let g = if i % 5 == 0 { f.clone() } else { pair(rng) };
        let w = if i % 3 == 0 {
            let den = rng.gen_range(1..=9);
            q(rng.gen_range(0..=den), den)
        } else {
            weights[rng.gen_range(0..weights.len())].clone()
        };
        out.push((f, g, w));
    }
    out
}

fn bernoulli_agreement(col: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let points = bernoulli_points(&mut rng, 240);
    let mut counts = [0usize; 2];
    for (f, g, w) in &points {
        let delta = d(&[qi(1) - w, w.clone()]);
        let closed = ok(closed_form_verdict(f, g, &delta), "closed form")?.verdict;
        let mps = ok(mixture_mps(f, g, &delta), "mps")?;
        let (fe, ge) = (f.experiment(), g.experiment());
        let lp = ok(
            blackwell_sufficient(
                &ok(mixture_experiment(&fe, &delta), "mixture")?,
                &ok(mixture_experiment(&ge, &delta), "mixture")?,
            ),
            "lp",
        )?;
        let oracle = bernoulli_mixture_dominates(&f.p, &f.q, &g.p, &g.q, w);
        let want = if oracle { Status::Sufficient } else { Status::NotSufficient };
        ensure!(
            closed.status == want && mps.status == want && lp.status == want,
            "disagreement at f={f:?} g={g:?} δ2={w}: closed {:?}, mps {:?}, lp {:?}, oracle {want:?}",
            closed.status,
            mps.status,
            lp.status
        );
        counts[usize::from(!oracle)] += 1;
        col.push(format!("bernoulli {f:?} {g:?} {w}"), &fe, &ge, &delta, &closed);
    }
    ensure!(counts[0] > 0 && counts[1] > 0, "grid lacks one of the outcomes: {counts:?}");
    Ok(format!(
        "{} points agree on all four routes ({} sufficient, {} not)",
        points.len(),
        counts[0],
        counts[1]
    ))
}

fn two_draw(col: &mut Collected) -> Outcome {
    let acc = [q(1, 2), q(3, 5), q(2, 3), q(3, 4), q(4, 5), q(9, 10), qi(1)];
    let mut pairs = Vec::new();
    for p in &acc {
        for qq in acc.iter().filter(|x| *x <= p) {
            pairs.push(BernoulliPair::new(p.clone(), qq.clone()).expect("ordered"));
        }
    }
    let late = DiscountFactor::degenerate(2, 2).expect("degenerate");
    let (mut n, mut sufficient) = (0, 0);
    for f in &pairs {
        for g in &pairs {
            let a = ok(two_draw_static_verdict(f, g), "two draw")?;
            let b = ok(closed_form_verdict(f, g, &late), "closed form")?.verdict;
            ensure!(a.status == b.status, "f={f:?} g={g:?}: two-draw {:?} vs closed form {:?}", a.status, b.status);
            let oracle = bernoulli_mixture_dominates(&f.p, &f.q, &g.p, &g.q, &qi(1));
            ensure!(oracle == a.is_sufficient(), "f={f:?} g={g:?}: oracle disagrees");
            if a.is_sufficient() {
                sufficient += 1;
                ensure!(necessity_max_check(f, g), "necessity check false on a sufficient instance f={f:?} g={g:?}");
            }
            n += 1;
            col.push(format!("two-draw {f:?} {g:?}"), &f.experiment(), &g.experiment(), &late, &a);
        }
    }
    Ok(format!("{n} ordered pairs agree; necessity check holds on all {sufficient} sufficient ones"))
}

fn arrival_grid(rng: &mut ChaCha8Rng, n: usize) -> Vec<ArrivalParams> {
    let deltas = [
        d(&[q(1, 2), q(1, 2)]),
        d(&[q(1, 3), q(2, 3)]),
        d(&[q(3, 4), q(1, 4)]),
        d(&[qi(0), qi(1)]),
        d(&[qi(1), qi(0)]),
    ];
    let tenth = |x: i64| q(x, 10);
    (0..n)
        .map(|i| {
            let nk = 1 + i % 3;
            let nz = 1 + (i / 3) % 3;
            let states = if i % 7 == 0 { 3 } else { 2 };
            let h = (0..states).map(|_| random_row(rng, nz, 0, 4)).collect();
            let a1 = rng.gen_range(0..=6);
            let alpha2: Vec<Q> = (0..nk).map(|_| tenth(rng.gen_range(0..=10 - a1))).collect();
            let (beta1, beta2) = if i % 5 == 0 {
                (tenth(a1), alpha2.clone())
            } else {
                let b1 = rng.gen_range(0..=6);
                (tenth(b1), (0..nk).map(|_| tenth(rng.gen_range(0..=10 - b1))).collect())
            };
            ArrivalParams {
                h,
                alpha1: tenth(a1),
                beta1,
                alpha2,
                beta2,
                delta: deltas[i % deltas.len()].clone(),
            }
        })
        .collect()
}

fn arrival(col: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let grid = arrival_grid(&mut rng, 200);
    let (mut sufficient, mut kernels) = (0, 0);
    for (i, a) in grid.iter().enumerate() {
        let f = ok(a.f_experiment(), "source")?;
        let g = ok(a.g_experiment(), "target")?;
        let d2 = a.delta.weight(2);
        let informative = a.h.iter().any(|r| *r != a.h[0]);
        let holds = !informative
            || (0..a.num_controls()).all(|k| &a.alpha1 + d2 * &a.alpha2[k] >= &a.beta1 + d2 * &a.beta2[k]);
        let closed = ok(arrival_verdict(a, 4096), &format!("arrival point {i}: {a:?}"))?;
        let lp = ok(controlled_delta_sufficient(&f, &g, &a.delta, &FamilyOptions::default()), "controlled")?;
        let want = if holds { Status::Sufficient } else { Status::NotSufficient };
        ensure!(
            closed.verdict.status == want && lp.verdict.status == want,
            "point {i}: inequality {want:?}, closed form {:?}, kernel LPs {:?}",
            closed.verdict.status,
            lp.verdict.status
        );
        if holds {
            sufficient += 1;
            let count = deterministic_kernel_count(&g).ok_or("family count overflow")? as usize;
            ensure!(closed.kernels_verified == count, "point {i}: {} of {count} garblings verified", closed.kernels_verified);
            let Some(Witness::Controlled { profiles, .. }) = &closed.verdict.witness else {
                return Err(format!("point {i}: missing garbling profiles"));
            };
            let family = ok(sufficiency_core::controlled::deterministic_family(&g, 4096), "family")?;
            for (kernel, (label, gamma)) in family.iter().zip(profiles) {
                ensure!(kernel.label == *label, "point {i}: kernel order differs");
                ensure!(gamma.is_stochastic(), "point {i}: garbling for {label} is not stochastic");
                ensure!(
                    ok(profile_satisfies(&f, &g, &a.delta, kernel, gamma), "substitution")?,
                    "point {i}: garbling for {label} fails substitution"
                );
            }
            kernels += count;
        } else {
            for v in [&closed.verdict, &lp.verdict] {
                let cert = v.certificate.as_ref().ok_or(format!("point {i}: missing certificate"))?;
                ensure!(certificate_verifies(cert), "point {i}: certificate does not verify");
            }
        }
        col.arrival.push((format!("arrival #{i}"), a.clone(), closed.verdict));
    }
    ensure!(sufficient > 0 && sufficient < grid.len(), "grid lacks one of the outcomes");
    Ok(format!(
        "{} points agree ({sufficient} sufficient); {kernels} explicit garblings pass substitution",
        grid.len()
    ))
}

fn convexity(col: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let candidates = [
        d(&[qi(1), qi(0)]),
        d(&[q(3, 4), q(1, 4)]),
        d(&[q(1, 2), q(1, 2)]),
        d(&[q(1, 3), q(2, 3)]),
        d(&[q(1, 5), q(4, 5)]),
        d(&[qi(0), qi(1)]),
    ];
    let weights = [q(1, 6), q(1, 3), q(1, 2), q(2, 3), q(5, 6)];
    let (mut pairs, mut attempts, mut partial) = (0, 0, 0);
    while pairs < 50 {
        attempts += 1;
        ensure!(attempts < 20_000, "only {pairs} qualifying pairs found");
        let f = random_experiment(&mut rng, 2, &[2, 2], 0, 4);
        let g = random_experiment(&mut rng, 2, &[2, 2], 1, 4);
        let mut found = Vec::new();
        for delta in &candidates {
            let v = ok(delta_sufficient(&f, &g, delta), "delta")?;
            if v.is_sufficient() {
                found.push((delta.clone(), family_of(&v)?));
            }
        }
        if found.len() < 2 {
            continue;
        }
        pairs += 1;
        if found.len() < candidates.len() {
            partial += 1;
        }
        let (d0, fam0) = found.first().cloned().expect("two found");
        let (d1, fam1) = found.last().cloned().expect("two found");
        let (fc, gc) = (ok(cumulative_laws(&f), "laws")?, ok(cumulative_laws(&g), "laws")?);
        col.push("convexity endpoint", &f, &g, &d0, &ok(delta_sufficient(&f, &g, &d0), "delta")?);
        for a in &weights {
            let mix = ok(d0.mix(&d1, a), "mix")?;
            let v = ok(delta_sufficient(&f, &g, &mix), "delta")?;
            ensure!(v.is_sufficient(), "convex combination {a} is not sufficient");
            let fam = ok(mix_delta_witnesses(&d0, &fam0, &d1, &fam1, a), "mixed witness")?;
            ensure!(family_reproduces(&fc, &gc, &mix, &fam), "mixed witness rejected by the library check");
            ensure!(family_equation_holds(&f, &g, &mix, &fam), "mixed witness fails substitution");
            col.push("convexity mix", &f, &g, &mix, &v);
        }
    }
    Ok(format!(
        "50 pairs ({partial} not sufficient everywhere), 250 combinations sufficient with verified mixed witnesses"
    ))
}

fn degenerate_equivalence(col: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = [0usize; 2];
    for i in 0..20 {
        let (f, g) = if i % 2 == 0 {
            let rows = random_independent_rows(&mut rng, 2, &[2, 2]);
            let garbled = garble_rows(&mut rng, &rows, &[2, 3]);
            (independent_experiment(rows), independent_experiment(garbled))
        } else {
            (
                random_experiment(&mut rng, 2, &[2, 2], 0, 4),
                random_experiment(&mut rng, 2, &[2, 2], 1, 4),
            )
        };
        let degenerate: Vec<DiscountFactor> =
            (1..=2).map(|t| DiscountFactor::degenerate(2, t).expect("degenerate")).collect();
        let all = degenerate
            .iter()
            .map(|dd| delta_sufficient(&f, &g, dd).map(|v| v.is_sufficient()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format!("{e:?}"))?
            .into_iter()
            .all(|x| x);
        let big = ok(big_delta_sufficient(&f, &g), "big delta")?;
        ensure!(all == big.is_sufficient(), "pair {i}: degenerate {all}, per-period {:?}", big.status);
        let sweep = ok(delta_sufficient_all(&f, &g, &degenerate), "sweep")?;
        ensure!(sweep.degenerate_consistent == Some(true), "pair {i}: sweep consistency flag unset");
        if let Some(Witness::PerPeriod(ws)) = &big.witness {
            ensure!(ws.iter().all(|w| rows_stochastic(&w.matrix, w.to.len())), "pair {i}: witness rows");
        }
        if !big.is_sufficient() {
            ensure!(certificate_verifies(big.certificate.as_ref().ok_or("certificate")?), "pair {i}: certificate");
        }
        agree[usize::from(!all)] += 1;
        col.push(format!("degenerate pair {i}"), &f, &g, &DiscountFactor::uniform(2).expect("uniform"), &big);
    }
    ensure!(agree[0] > 0 && agree[1] > 0, "pairs lack one of the outcomes: {agree:?}");
    Ok(format!("20 pairs agree ({} sufficient for every period, {} not)", agree[0], agree[1]))
}

/// One-period continuation after the first signal of a repeater: the
/// source repeats its own signal, the target shows `g_row` in each state.
fn continuation_pair(first: usize, g_rows: [Vec<Q>; 2]) -> (Experiment, Experiment) {
    let states = vec!["L".to_string(), "H".to_string()];
    let signals = vec![vec!["l".to_string(), "h".to_string()]];
    let f = Experiment::uncontrolled(states.clone(), signals.clone(), move |_, _, _| {
        let mut row = vec![qi(0), qi(0)];
        row[first] = qi(1);
        row
    })
    .expect("valid");
    let g = Experiment::uncontrolled(states, signals, move |_, s, _| g_rows[s].clone()).expect("valid");
    (f, g)
}

fn sequential(col: &mut Collected) -> Outcome {
    let delta = DiscountFactor::uniform(2).expect("uniform");
    let tail = delta.tail(1).expect("tail");
    let indep = ok(independent_repeaters(), "coupling")?;
    let report = ok(sequential_most_valuable(&indep, &delta), "sequential")?;
    ensure!(report.status == Status::NotSufficient, "independent coupling: {:?}", report.status);
    for (x, name) in [(0, "l"), (1, "h")] {
        let row = report.row(&[name]).ok_or(format!("no row for {name}"))?;
        let v = row.verdict.as_ref().ok_or(format!("no verdict at {name}"))?;
        ensure!(v.status == Status::NotSufficient, "independent coupling at {name}: {:?}", v.status);
        let (f, g) = continuation_pair(x, [vec![q(3, 4), q(1, 4)], vec![q(1, 4), q(3, 4)]]);
        col.push(format!("independent after {name}"), &f, &g, &tail, v);
    }
    let corr = ok(correlated_repeaters(), "coupling")?;
    let report = ok(sequential_most_valuable(&corr, &delta), "sequential")?;
    ensure!(report.status == Status::Sufficient, "correlated coupling: {:?}", report.status);
    for row in &report.rows {
        let v = row.verdict.as_ref().ok_or(format!("no verdict at {:?}", row.history))?;
        ensure!(v.is_sufficient(), "correlated coupling at {:?}: {:?}", row.history, v.status);
    }
    let root = report.row(&[]).and_then(|r| r.verdict.clone()).ok_or("no root row")?;
    col.push("correlated root", corr.f(), corr.g(), &delta, &root);
    for (x, name) in [(0, "l"), (1, "h")] {
        let v = report.row(&[name]).and_then(|r| r.verdict.clone()).ok_or("row")?;
        let mut same = vec![qi(0), qi(0)];
        same[x] = qi(1);
        let (f, g) = continuation_pair(x, [same.clone(), same]);
        col.push(format!("correlated after {name}"), &f, &g, &tail, &v);
    }
    Ok(format!(
        "independent: NotSufficient after l and h; correlated: Sufficient at all {} histories",
        report.rows.len()
    ))
}

fn point_mass(n: usize, k: usize) -> Vec<Q> {
    (0..n).map(|i| if i == k { qi(1) } else { qi(0) }).collect()
}

fn oracle_soundness(col: &mut Collected) -> Outcome {
    let grid = PayoffGrid::default();
    let (mut audited, mut gaps) = (0, 0);
    for (i, c) in col.cases.iter().enumerate() {
        let n = c.f.num_states();
        let prior = uniform_prior(n);
        match c.verdict.status {
            Status::Sufficient => {
                let problems = ok(random_problem_suite(100 + i as u64, 100, n, 3, &grid), "problems")?;
                let report = ok(
                    dominance_audit(&c.f, &c.g, &c.delta, &problems, &prior, Status::Sufficient),
                    "audit",
                )?;
                ensure!(report.violations == 0, "{}: {} violations", c.label, report.violations);
                audited += 1;
            }
            Status::NotSufficient => {
                let cert = c.verdict.certificate.as_ref().ok_or(format!("{}: no certificate", c.label))?;
                let dp = ok(verdict_decision_problem(&c.verdict, None), "decision problem")?;
                let p = cert.prior.clone().unwrap_or(prior);
                let delta = cert.delta.clone().unwrap_or_else(|| c.delta.clone());
                let gap = ok(value_gap(&c.f, &c.g, &dp, &delta, &p), "gap")?;
                ensure!(gap > Q::zero(), "{}: value gap {} is not positive", c.label, fmt_q(&gap));
                gaps += 1;
            }
            Status::Inconclusive => return Err(format!("{}: inconclusive verdict", c.label)),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (label, a, v) in &col.arrival {
        let f = ok(a.f_experiment(), "source")?;
        let g = ok(a.g_experiment(), "target")?;
        let prior = uniform_prior(f.num_states());
        let nk = a.num_controls();
        match v.status {
            Status::Sufficient => {
                let problems = ok(random_problem_suite(rng.gen(), 100, f.num_states(), 3, &grid), "problems")?;
                for dp in problems {
                    let choice: Vec<usize> = (0..3).map(|_| rng.gen_range(0..nk)).collect();
                    let kappa = ok(
                        ControlMap::from_fn(&f, 3, |t, act, _| {
                            if t == 1 {
                                point_mass(nk, choice[act])
                            } else {
                                vec![Q::one()]
                            }
                        }),
                        "control map",
                    )?;
                    let dp = dp.with_control_map(kappa);
                    let vf = ok(optimal_value_controlled(&f, &dp, &a.delta, &prior, 100_000), "value")?;
                    let vg = ok(optimal_value_controlled(&g, &dp, &a.delta, &prior, 100_000), "value")?;
                    ensure!(vf >= vg, "{label}: controlled problem favours the target");
                }
                audited += 1;
            }
            _ => {
                let cert = v.certificate.as_ref().ok_or(format!("{label}: no certificate"))?;
                let dp = cert.problem.clone().ok_or(format!("{label}: no decision problem"))?;
                let p = cert.prior.clone().unwrap_or(prior);
                let vf = ok(optimal_value_controlled(&f, &dp, &a.delta, &p, 100_000), "value")?;
                let vg = ok(optimal_value_controlled(&g, &dp, &a.delta, &p, 100_000), "value")?;
                ensure!(vg > vf, "{label}: certificate problem has gap {}", fmt_q(&(vg - vf)));
                gaps += 1;
            }
        }
    }
    Ok(format!(
        "{audited} sufficient verdicts audited on 100 problems each with no violation; {gaps} refutations give a strict gap"
    ))
}

fn random_lp(rng: &mut ChaCha8Rng, big: bool) -> (FeasibilityProblem, FeasibilityProblem) {
    let n = if big { rng.gen_range(20..=50) } else { rng.gen_range(1..=12) };
    let m = rng.gen_range(1..=(n / 2).clamp(1, 15));
    let x0: Vec<i64> = (0..n).map(|_| if rng.gen_bool(0.4) { 0 } else { rng.gen_range(1..=3) }).collect();
    let mut p = FeasibilityProblem::new();
    for j in 0..n {
        p.add_variable(format!("x{j}"));
    }
    let mut rows = Vec::with_capacity(m);
    for _ in 0..m {
        let mut coeffs: Vec<(usize, i64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.6) {
                coeffs.push((j, rng.gen_range(-3..=3)));
            }
        }
        let rhs: i64 = coeffs.iter().map(|(j, c)| c * x0[*j]).sum();
        rows.push((coeffs, rhs));
    }
    for (coeffs, rhs) in &rows {
        p.add_row(coeffs.iter().map(|(j, c)| (*j, qi(*c))).collect(), qi(*rhs));
    }
    // A row that restates an existing one with a shifted right-hand side.
    let mut bad = p.clone();
    let (coeffs, rhs) = &rows[rng.gen_range(0..rows.len())];
    bad.add_row(coeffs.iter().map(|(j, c)| (*j, qi(2 * c))).collect(), qi(2 * rhs + 1));
    (p, bad)
}

fn properties(col: &mut Collected) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cases = 0;
    for i in 0..250 {
        let (good, bad) = random_lp(&mut rng, i % 10 == 0);
        let r = ok(solve_feasibility(&good), "lp")?;
        ensure!(matches!(r, FeasibilityResult::Witness(_)), "lp {i}: feasible system reported infeasible");
        ensure!(verify_result(&good, &r), "lp {i}: witness fails");
        let r = ok(solve_feasibility(&bad), "lp")?;
        ensure!(matches!(r, FeasibilityResult::Certificate(_)), "lp {i}: infeasible system reported feasible");
        ensure!(verify_result(&bad, &r), "lp {i}: certificate fails");
        cases += 2;
    }
    for i in 0..200 {
        let states = 2 + i % 2;
        let sizes: &[usize] = if i % 3 == 0 { &[3, 2] } else { &[2, 2] };
        let f = random_experiment(&mut rng, states, sizes, 0, 4);
        let delta = random_delta(&mut rng, 2);
        let v = ok(delta_sufficient(&f, &f, &delta), "delta")?;
        ensure!(v.is_sufficient(), "reflexivity fails for case {i}");
        ensure!(family_equation_holds(&f, &f, &delta, &family_of(&v)?), "reflexive witness {i} fails");
        cases += 1;
    }
    for i in 0..150 {
        let rows = random_independent_rows(&mut rng, 2, &[2, 3]);
        let mid = garble_rows(&mut rng, &rows, &[2, 2]);
        let last = garble_rows(&mut rng, &mid, &[3, 2]);
        let (f, g, e) = (
            independent_experiment(rows),
            independent_experiment(mid),
            independent_experiment(last),
        );
        let delta = random_delta(&mut rng, 2);
        let v1 = ok(delta_sufficient(&f, &g, &delta), "delta")?;
        let v2 = ok(delta_sufficient(&g, &e, &delta), "delta")?;
        ensure!(v1.is_sufficient() && v2.is_sufficient(), "garbled chain {i} not sufficient");
        let composed = ok(compose_families(&family_of(&v1)?, &family_of(&v2)?), "compose")?;
        ensure!(family_equation_holds(&f, &e, &delta, &composed), "composed witness {i} fails");
        cases += 1;
    }
    let mut stochastic = 0;
    for c in col.cases.iter().filter(|c| c.verdict.is_sufficient()) {
        let ok = match &c.verdict.witness {
            Some(Witness::Family(fam)) | Some(Witness::PerPeriod(fam)) => {
                fam.iter().all(|w| rows_stochastic(&w.matrix, w.to.len()))
            }
            Some(Witness::Static(w)) => rows_stochastic(&w.matrix, w.to.len()),
            _ => continue,
        };
        ensure!(ok, "{}: witness rows are not stochastic", c.label);
        stochastic += 1;
    }
    for (label, _, v) in &col.arrival {
        if let Some(Witness::Controlled { profiles, .. }) = &v.witness {
            ensure!(profiles.iter().all(|(_, p)| p.is_stochastic()), "{label}: profile rows");
            stochastic += 1;
        }
    }
    cases += stochastic;
    ensure!(cases >= 1000, "only {cases} randomized cases");
    Ok(format!("{cases} cases: 500 LP systems, 200 reflexive, 150 composed, {stochastic} witness row checks"))
}

fn main() {
    type Criterion = fn(&mut Collected) -> Outcome;
    let criteria: [(&str, Option<Duration>, Criterion); 10] = [
        ("intro example", Some(Duration::from_secs(1)), intro_example),
        ("three-period reveal example", Some(Duration::from_secs(5)), reveal_example),
        ("Bernoulli three-way agreement", Some(Duration::from_secs(60)), bernoulli_agreement),
        ("two-draw comparisons", None, two_draw),
        ("arrival-time controlled pairs", Some(Duration::from_secs(300)), arrival),
        ("convexity in the discount factor", None, convexity),
        ("degenerate discount factors", None, degenerate_equivalence),
        ("sequential example", None, sequential),
        ("oracle soundness", None, oracle_soundness),
        ("property suite", None, properties),
    ];
    let mut col = Collected::default();
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| run(&mut col)))
            .unwrap_or_else(|e| {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            })
            .and_then(|detail| match budget {
                Some(b) if start.elapsed() > *b => Err(format!("{detail}; exceeded the {b:?} budget")),
                _ => Ok(detail),
            });
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why} [{took:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
