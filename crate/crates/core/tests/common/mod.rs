//! Shared generators and independent checkers for the integration tests.
//!
//! The checkers here recompute laws straight from kernel rows and never call
//! the library's own law or substitution routines.

#![allow(dead_code)]

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sufficiency_core::model::{histories, DiscountFactor, Experiment, Garbling};
use sufficiency_core::rational::{q, Q};

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// A probability row with integer weights drawn from `lo..=hi`.
pub fn random_row(rng: &mut ChaCha8Rng, n: usize, lo: i64, hi: i64) -> Vec<Q> {
    let mut w: Vec<i64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    if w.iter().all(|&x| x == 0) {
        let i = rng.gen_range(0..n);
        w[i] = 1;
    }
    let total: i64 = w.iter().sum();
    w.into_iter().map(|x| q(x, total)).collect()
}

/// An uncontrolled experiment whose rows depend on the full signal history.
/// Weights are drawn from `lo..=hi`; a narrow range near the top gives
/// nearly uninformative rows.
pub fn random_experiment(rng: &mut ChaCha8Rng, states: usize, sizes: &[usize], lo: i64, hi: i64) -> Experiment {
    let mut table: HashMap<(usize, usize, Vec<usize>), Vec<Q>> = HashMap::new();
    for t in 1..=sizes.len() {
        for s in 0..states {
            for xs in histories(&sizes[..t - 1]) {
                table.insert((t, s, xs), random_row(rng, sizes[t - 1], lo, hi));
            }
        }
    }
    let signals = sizes.iter().enumerate().map(|(t, &n)| labels(&format!("x{}_", t + 1), n)).collect();
    Experiment::uncontrolled(labels("s", states), signals, move |t, s, xs| table[&(t, s, xs.to_vec())].clone())
        .expect("random rows are distributions")
}

/// Signals that are independent across periods given the state:
/// `rows[t][s]` is the period-`t+1` law in state `s`.
pub fn independent_experiment(rows: Vec<Vec<Vec<Q>>>) -> Experiment {
    let states = rows[0].len();
    let signals = rows
        .iter()
        .enumerate()
        .map(|(t, r)| labels(&format!("x{}_", t + 1), r[0].len()))
        .collect();
    Experiment::uncontrolled(labels("s", states), signals, move |t, s, _| rows[t - 1][s].clone())
        .expect("independent rows are distributions")
}

pub fn random_independent_rows(rng: &mut ChaCha8Rng, states: usize, sizes: &[usize]) -> Vec<Vec<Vec<Q>>> {
    sizes
        .iter()
        .map(|&n| (0..states).map(|_| random_row(rng, n, 0, 4)).collect())
        .collect()
}

/// Pass each period's signal through its own random channel.
pub fn garble_rows(rng: &mut ChaCha8Rng, rows: &[Vec<Vec<Q>>], out_sizes: &[usize]) -> Vec<Vec<Vec<Q>>> {
    rows.iter()
        .zip(out_sizes)
        .map(|(period, &m)| {
            let n = period[0].len();
            let channel: Vec<Vec<Q>> = (0..n).map(|_| random_row(rng, m, 0, 3)).collect();
            period
                .iter()
                .map(|law| {
                    (0..m)
                        .map(|y| (0..n).fold(Q::zero(), |acc, x| acc + &law[x] * &channel[x][y]))
                        .collect()
                })
                .collect()
        })
        .collect()
}

pub fn random_delta(rng: &mut ChaCha8Rng, horizon: usize) -> DiscountFactor {
    loop {
        let w: Vec<i64> = (0..horizon).map(|_| rng.gen_range(0..=4)).collect();
        let total: i64 = w.iter().sum();
        if total > 0 {
            return DiscountFactor::new(w.into_iter().map(|x| q(x, total)).collect()).unwrap();
        }
    }
}

/// `law[t-1][θ][index of x^t]`, by direct products of kernel rows.
pub fn cumulative_by_hand(e: &Experiment) -> Vec<Vec<Vec<Q>>> {
    let sizes: Vec<usize> = (1..=e.horizon()).map(|t| e.signals(t).len()).collect();
    (1..=e.horizon())
        .map(|t| {
            (0..e.num_states())
                .map(|th| {
                    histories(&sizes[..t])
                        .iter()
                        .map(|xs| {
                            (0..t).fold(Q::one(), |acc, i| {
                                let row = e.kernel(i + 1, th, &xs[..i], &vec![0; i]).expect("row");
                                acc * &row[xs[i]]
                            })
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Exact check of `δ_t g^t(y^t|θ) = Σ_{t'} δ_{t'} Σ_x f^{t'}(x|θ) γ_{t'}(x, (t, y^t))`
/// with nonnegative, row-stochastic `γ`.
pub fn family_equation_holds(f: &Experiment, g: &Experiment, delta: &DiscountFactor, family: &[Garbling]) -> bool {
    let fl = cumulative_by_hand(f);
    let gl = cumulative_by_hand(g);
    let cols: usize = gl.iter().map(|p| p[0].len()).sum();
    if family.len() != fl.len() {
        return false;
    }
    for (tp, gam) in family.iter().enumerate() {
        if gam.matrix.len() != fl[tp][0].len() || !rows_stochastic(&gam.matrix, cols) {
            return false;
        }
    }
    for th in 0..f.num_states() {
        let mut rhs = vec![Q::zero(); cols];
        for (tp, gam) in family.iter().enumerate() {
            let w = delta.weight(tp + 1);
            for (x, row) in gam.matrix.iter().enumerate() {
                for (c, v) in row.iter().enumerate() {
                    rhs[c] += w * &fl[tp][th][x] * v;
                }
            }
        }
        let mut c = 0;
        for (t, period) in gl.iter().enumerate() {
            for v in &period[th] {
                if delta.weight(t + 1) * v != rhs[c] {
                    return false;
                }
                c += 1;
            }
        }
    }
    true
}

pub fn rows_stochastic(m: &[Vec<Q>], width: usize) -> bool {
    m.iter()
        .all(|r| r.len() == width && r.iter().all(|v| *v >= Q::zero()) && r.iter().fold(Q::zero(), |a, b| a + b) == Q::one())
}

/// Convex-order check for two-period Bernoulli mixtures under the uniform
/// prior, computed from the accuracies alone: `(p, q)` against `(p2, q2)`
/// with weight `d` on the second period.
pub fn bernoulli_mixture_dominates(p: &Q, qq: &Q, p2: &Q, q2: &Q, d: &Q) -> bool {
    let hf = bernoulli_masses(p, qq, d);
    let hg = bernoulli_masses(p2, q2, d);
    let h = |m: &[(Q, Q)], t: &Q| {
        m.iter()
            .filter(|(pi, _)| t > pi)
            .fold(Q::zero(), |acc, (pi, w)| acc + w * (t - pi))
    };
    let mut grid: Vec<Q> = hf.iter().chain(&hg).map(|(pi, _)| pi.clone()).collect();
    grid.push(Q::zero());
    grid.push(Q::one());
    grid.iter().all(|t| h(&hf, t) >= h(&hg, t))
}

/// `(posterior of state 0, probability)` for every outcome of the mixture.
fn bernoulli_masses(p: &Q, qq: &Q, d: &Q) -> Vec<(Q, Q)> {
    let half = q(1, 2);
    let one = Q::one();
    let hit = |a: &Q, s: usize, x: usize| if s == x { a.clone() } else { &one - a };
    let mut out = Vec::new();
    let mut push = |w0: Q, w1: Q| {
        let total = &w0 + &w1;
        if !total.is_zero() {
            out.push((w0 / &total, total));
        }
    };
    for x in 0..2 {
        let w = |s| &half * (&one - d) * hit(p, s, x);
        push(w(0), w(1));
    }
    for x1 in 0..2 {
        for x2 in 0..2 {
            let w = |s| &half * d * hit(p, s, x1) * hit(qq, s, x2);
            push(w(0), w(1));
        }
    }
    out
}
