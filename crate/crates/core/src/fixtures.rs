//! Small worked instances shared by tests, benches and the CLI.

use num_traits::{One, Zero};

use crate::error::Result;
use crate::model::{DiscountFactor, Experiment};
use crate::rational::{q, Q};
use crate::sufficiency::Coupling;

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Delayed full revelation: nothing in period 1, the state in period 2.
pub fn delayed_revelation() -> Experiment {
    Experiment::uncontrolled(
        labels(&["theta", "theta'"]),
        vec![labels(&["x1"]), labels(&["x2", "x2'"])],
        |t, s, _| {
            if t == 1 {
                vec![Q::one()]
            } else if s == 0 {
                vec![Q::one(), Q::zero()]
            } else {
                vec![Q::zero(), Q::one()]
            }
        },
    )
    .expect("valid kernels")
}

/// Early partial information: accuracy 7/12 in period 1, nothing after.
pub fn early_noisy_signal() -> Experiment {
    Experiment::uncontrolled(
        labels(&["theta", "theta'"]),
        vec![labels(&["y1", "y1'"]), labels(&["y2"])],
        |t, s, _| {
            if t == 2 {
                vec![Q::one()]
            } else if s == 0 {
                vec![q(7, 12), q(5, 12)]
            } else {
                vec![q(5, 12), q(7, 12)]
            }
        },
    )
    .expect("valid kernels")
}

/// Parameters of the three-period reveal-or-not pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RevealParams {
    /// Source reveals in period 1 with this probability.
    pub alpha: Q,
    /// Source reveals in period 3 (if not yet) with this probability.
    pub beta: Q,
    /// Target reveals in period 2 with this probability.
    pub chi: Q,
    /// Target reveals in period 3 (if not yet) with this probability.
    pub epsilon: Q,
}

impl RevealParams {
    pub fn standard() -> Self {
        Self {
            alpha: q(1, 100),
            beta: Q::one(),
            chi: q(2, 5),
            epsilon: Q::zero(),
        }
    }

    /// Discounted probability that the state has been revealed, for the
    /// source and the target. The source is sufficient iff the first is at
    /// least the second.
    pub fn revealed_mass(&self, delta: &DiscountFactor) -> (Q, Q) {
        let d = delta.weights();
        let one = Q::one();
        let f = (&d[0] + &d[1]) * &self.alpha + &d[2] * (&self.alpha + (&one - &self.alpha) * &self.beta);
        let g = (&d[1] + &d[2]) * &self.chi + &d[2] * (&one - &self.chi) * &self.epsilon;
        (f, g)
    }

    /// Source and target experiments. Signals: `quiet`, `is0`, `is1`.
    pub fn experiments(&self) -> (Experiment, Experiment) {
        // (period, reveal probability) schedule; once revealed the signal stays quiet.
        let f_sched = [self.alpha.clone(), Q::zero(), self.beta.clone()];
        let g_sched = [Q::zero(), self.chi.clone(), self.epsilon.clone()];
        (reveal_experiment(f_sched), reveal_experiment(g_sched))
    }
}

fn reveal_experiment(schedule: [Q; 3]) -> Experiment {
    Experiment::uncontrolled(
        labels(&["theta0", "theta1"]),
        vec![labels(&["quiet", "is0", "is1"]); 3],
        move |t, s, xs| {
            let mut row = vec![Q::one(), Q::zero(), Q::zero()];
            if xs.iter().any(|&x| x != 0) {
                return row;
            }
            let r = &schedule[t - 1];
            row[0] = Q::one() - r;
            row[1 + s] = r.clone();
            row
        },
    )
    .expect("valid kernels")
}

/// Two periods, states `L`, `H`, signals `l`, `h`: accuracy 3/4 in period 1,
/// then the first signal is repeated.
pub fn repeater() -> Experiment {
    Experiment::uncontrolled(
        labels(&["L", "H"]),
        vec![labels(&["l", "h"]); 2],
        |t, s, xs| {
            if t == 1 {
                if s == 0 {
                    vec![q(3, 4), q(1, 4)]
                } else {
                    vec![q(1, 4), q(3, 4)]
                }
            } else if xs[0] == 0 {
                vec![Q::one(), Q::zero()]
            } else {
                vec![Q::zero(), Q::one()]
            }
        },
    )
    .expect("valid kernels")
}

/// Two repeaters drawn independently given the state.
pub fn independent_repeaters() -> Result<Coupling> {
    Coupling::independent(repeater(), repeater())
}

/// Two repeaters whose signals always coincide.
pub fn correlated_repeaters() -> Result<Coupling> {
    let f = repeater();
    let f2 = f.clone();
    Coupling::from_fn(f, repeater(), move |t, s, xs, _| {
        let marginal = f2.kernel(t, s, xs, &vec![0; t - 1]).expect("row");
        // Diagonal entries (x, x) sit at index 3x for a 2x2 table.
        let mut row = vec![Q::zero(); 4];
        row[0] = marginal[0].clone();
        row[3] = marginal[1].clone();
        row
    })
}
