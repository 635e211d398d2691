//! Two-period experiments made of independent binary symmetric draws.
//!
//! Each experiment is a pair `(p, q)` of accuracies: the first-period signal
//! matches the state with probability `p`, the second with probability `q`.
//! Posteriors are those of the first state, `θ = 0`.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::dichotomy::mps_compare;
use crate::error::{Error, Result};
use crate::model::{mixture_experiment, posterior_distribution, uniform_prior, DiscountFactor, Experiment};
use crate::rational::{fmt_q, q, serde_q, Q};
use crate::verdict::{ComparisonVerdict, Status, Witness};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliPair {
    #[serde(with = "serde_q")]
    pub p: Q,
    #[serde(with = "serde_q")]
    pub q: Q,
}

impl BernoulliPair {
    /// Requires `1/2 <= q <= p <= 1`.
    pub fn new(p: Q, q: Q) -> Result<Self> {
        let half = crate::rational::q(1, 2);
        if q < half || p < q || p > Q::one() {
            return Err(Error::Invalid(format!(
                "need 1/2 <= q <= p <= 1, got p = {}, q = {}",
                fmt_q(&p),
                fmt_q(&q)
            )));
        }
        Ok(Self { p, q })
    }

    /// Any accuracies in `[0, 1]`, without ordering.
    pub fn raw(p: Q, q: Q) -> Result<Self> {
        for a in [&p, &q] {
            if *a < Q::zero() || *a > Q::one() {
                return Err(Error::Invalid(format!("accuracy {} outside [0, 1]", fmt_q(a))));
            }
        }
        Ok(Self { p, q })
    }

    /// The two-period experiment with these accuracies.
    pub fn experiment(&self) -> Experiment {
        let (p, qq) = (self.p.clone(), self.q.clone());
        Experiment::uncontrolled(
            vec!["0".into(), "1".into()],
            vec![vec!["0".into(), "1".into()]; 2],
            move |t, s, _| {
                let a = if t == 1 { p.clone() } else { qq.clone() };
                let miss = Q::one() - &a;
                if s == 0 {
                    vec![a, miss]
                } else {
                    vec![miss, a]
                }
            },
        )
        .expect("accuracies in [0, 1] give valid kernels")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BernoulliPosteriors {
    #[serde(with = "serde_q")]
    pub pi1: Q,
    #[serde(with = "serde_q")]
    pub pi10: Q,
    #[serde(with = "serde_q")]
    pub pi11: Q,
    #[serde(with = "serde_q")]
    pub lambda: Q,
}

pub fn bernoulli_posteriors(b: &BernoulliPair) -> Result<BernoulliPosteriors> {
    let b = BernoulliPair::new(b.p.clone(), b.q.clone())?;
    let one = Q::one();
    let (p, qq) = (&b.p, &b.q);
    let lambda = p * qq + (&one - p) * (&one - qq);
    let pi1 = &one - p;
    let pi11 = (&one - p) * (&one - qq) / &lambda;
    let den = p * (&one - qq) + (&one - p) * qq;
    // `den` vanishes only at p = q = 1, where the mixed history never occurs.
    let pi10 = if den.is_zero() {
        Q::zero()
    } else {
        (&one - p) * qq / den
    };
    Ok(BernoulliPosteriors {
        pi1,
        pi10,
        pi11,
        lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    /// One draw of `f` beats two draws of `g`.
    I,
    /// Two draws of `f` beat two of `g`, one does not.
    II,
    /// Neither, but discounting makes up the difference.
    III,
}

/// Which of the three branches hold, evaluated independently.
pub fn branches_holding(f: &BernoulliPair, g: &BernoulliPair, delta: &DiscountFactor) -> Result<Vec<Branch>> {
    let a = bernoulli_posteriors(f)?;
    let b = bernoulli_posteriors(g)?;
    check_two_periods(delta)?;
    let d1 = delta.weight(1);
    let d2 = delta.weight(2);
    let mut out = Vec::new();
    if a.pi1 <= b.pi11 {
        out.push(Branch::I);
    }
    let middle = a.pi11 <= b.pi11 && b.pi11 < a.pi1;
    let spread = (&a.pi10 - &a.pi11) * &a.lambda;
    let spread_g = (&a.pi10 - &b.pi11) * &b.lambda;
    if middle && spread >= spread_g {
        out.push(Branch::II);
    }
    if middle
        && spread < spread_g
        && (&a.pi1 - &a.pi11) * &a.lambda >= (&a.pi1 - &b.pi11) * &b.lambda
        && d2 * &spread >= d2 * &spread_g + (&a.pi1 - &b.pi1) * d1
    {
        out.push(Branch::III);
    }
    Ok(out)
}

fn check_two_periods(delta: &DiscountFactor) -> Result<()> {
    if delta.horizon() != 2 {
        return Err(Error::HorizonMismatch {
            expected: 2,
            found: delta.horizon(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormOutcome {
    pub verdict: ComparisonVerdict,
    pub condition_a: bool,
    pub branch: Option<Branch>,
    /// Relabelings applied to bring the inputs into `1/2 <= q <= p`.
    pub normalization: Vec<String>,
}

/// Bring raw accuracies into `1/2 <= q <= p`. Flipping an accuracy below
/// 1/2 relabels that period's signal and is always harmless. Swapping the
/// periods changes the first-period experiment, so it is only allowed when
/// `allow_swap` is set.
pub fn normalize(b: &BernoulliPair, allow_swap: bool, name: &str) -> Result<(BernoulliPair, Vec<String>)> {
    let half = q(1, 2);
    let mut notes = Vec::new();
    let mut p = b.p.clone();
    let mut qq = b.q.clone();
    if p < half {
        p = Q::one() - &p;
        notes.push(format!("{name}: first-period signal relabelled, accuracy {}", fmt_q(&p)));
    }
    if qq < half {
        qq = Q::one() - &qq;
        notes.push(format!("{name}: second-period signal relabelled, accuracy {}", fmt_q(&qq)));
    }
    if p < qq {
        if !allow_swap {
            return Err(Error::Precondition(format!(
                "{name}: first-period accuracy {} is below second-period accuracy {}; the closed form needs p >= q unless the first period has zero weight",
                fmt_q(&p),
                fmt_q(&qq)
            )));
        }
        std::mem::swap(&mut p, &mut qq);
        notes.push(format!("{name}: periods swapped"));
    }
    Ok((BernoulliPair::new(p, qq)?, notes))
}

/// The closed-form δ-comparison for two-period pairs.
pub fn closed_form_verdict(f: &BernoulliPair, g: &BernoulliPair, delta: &DiscountFactor) -> Result<ClosedFormOutcome> {
    check_two_periods(delta)?;
    let allow_swap = delta.weight(1).is_zero();
    let (f, mut notes) = normalize(f, allow_swap, "f")?;
    let (g, notes_g) = normalize(g, allow_swap, "g")?;
    notes.extend(notes_g);
    let a = bernoulli_posteriors(&f)?;
    let b = bernoulli_posteriors(&g)?;
    let condition_a = a.pi1 <= b.pi1;
    let branches = branches_holding(&f, &g, delta)?;
    let branch = branches.first().copied();
    let needs_b = !delta.weight(2).is_zero();
    let ok = condition_a && (!needs_b || branch.is_some());
    let verdict = if ok {
        let label = match (needs_b, branch) {
            (false, _) => "first-period accuracy dominates and the second period has no weight".to_string(),
            (true, Some(br)) => format!("first-period accuracy dominates; branch {br:?} holds"),
            (true, None) => unreachable!(),
        };
        ComparisonVerdict::sufficient(Witness::Condition(label), "closed form: two-period Bernoulli")
    } else {
        // Attach the convex-order certificate computed on the mixtures.
        let route = mixture_mps(&f, &g, delta)?;
        match route.certificate {
            Some(cert) if route.status == Status::NotSufficient => {
                let why = if condition_a {
                    "no branch holds".to_string()
                } else {
                    "first-period accuracy is lower".to_string()
                };
                ComparisonVerdict::not_sufficient(cert, format!("closed form: two-period Bernoulli, {why}"))
            }
            _ => {
                return Err(Error::Precondition(
                    "closed form and convex-order check disagree".into(),
                ))
            }
        }
    };
    let verdict = notes.iter().fold(verdict, |v, n| v.with_note(n.clone()));
    Ok(ClosedFormOutcome {
        verdict,
        condition_a,
        branch: if needs_b { branch } else { None },
        normalization: notes,
    })
}

/// Convex-order comparison of the two mixtures under the uniform prior.
pub fn mixture_mps(f: &BernoulliPair, g: &BernoulliPair, delta: &DiscountFactor) -> Result<ComparisonVerdict> {
    let prior = uniform_prior(2);
    let fm = mixture_experiment(&f.experiment(), delta)?;
    let gm = mixture_experiment(&g.experiment(), delta)?;
    mps_compare(&posterior_distribution(&fm, &prior)?, &posterior_distribution(&gm, &prior)?)
}

/// Static comparison of the two-draw experiments `f^2` and `g^2`.
pub fn two_draw_static_verdict(f: &BernoulliPair, g: &BernoulliPair) -> Result<ComparisonVerdict> {
    let (f, mut notes) = normalize(f, true, "f")?;
    let (g, notes_g) = normalize(g, true, "g")?;
    notes.extend(notes_g);
    let a = bernoulli_posteriors(&f)?;
    let b = bernoulli_posteriors(&g)?;
    // λ/(1-λ)·(π₁ - π₁₁) equals λ·(π₁₀ - π₁₁), which stays finite at λ = 1.
    let lhs = &a.lambda * (&a.pi10 - &a.pi11) * (Q::one() - &b.lambda);
    let rhs = (&a.pi1 - &b.pi11) * &b.lambda;
    let ok = a.pi11 <= b.pi11 && a.pi1 <= b.pi1 && lhs >= rhs;
    let d = DiscountFactor::degenerate(2, 2)?;
    let v = if ok {
        ComparisonVerdict::sufficient(
            Witness::Condition("two-draw posterior conditions hold".into()),
            "closed form: two-draw static",
        )
    } else {
        let route = mixture_mps(&f, &g, &d)?;
        match route.certificate {
            Some(cert) => ComparisonVerdict::not_sufficient(cert, "closed form: two-draw static"),
            None => return Err(Error::Precondition("closed form and convex-order check disagree".into())),
        }
    };
    Ok(notes.into_iter().fold(v, |v, n| v.with_note(n)))
}

/// Necessary condition for ranking two-draw experiments:
/// `max(p, q) >= max(p', q')`, on accuracies folded into `[1/2, 1]`.
pub fn necessity_max_check(f: &BernoulliPair, g: &BernoulliPair) -> bool {
    let fold = |a: &Q| {
        let b = Q::one() - a;
        if *a >= b {
            a.clone()
        } else {
            b
        }
    };
    let mf = std::cmp::max(fold(&f.p), fold(&f.q));
    let mg = std::cmp::max(fold(&g.p), fold(&g.q));
    mf >= mg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::qi;

    fn pair(p: (i64, i64), qq: (i64, i64)) -> BernoulliPair {
        BernoulliPair::new(q(p.0, p.1), q(qq.0, qq.1)).unwrap()
    }

    #[test]
    fn uninformative_posteriors() {
        let b = bernoulli_posteriors(&pair((1, 2), (1, 2))).unwrap();
        assert_eq!(b.pi1, q(1, 2));
        assert_eq!(b.pi10, q(1, 2));
        assert_eq!(b.pi11, q(1, 2));
        assert_eq!(b.lambda, q(1, 2));
    }

    #[test]
    fn perfect_first_draw() {
        for qq in [(1, 2), (3, 4), (1, 1)] {
            let b = bernoulli_posteriors(&pair((1, 1), qq)).unwrap();
            assert!(b.pi1.is_zero() && b.pi10.is_zero() && b.pi11.is_zero());
        }
    }

    #[test]
    fn three_quarters_two_thirds() {
        let b = bernoulli_posteriors(&pair((3, 4), (2, 3))).unwrap();
        assert_eq!(b.lambda, q(7, 12));
        assert_eq!(b.pi11, q(1, 7));
        assert_eq!(b.pi1, q(1, 4));
        assert_eq!(b.pi10, q(2, 5));
        assert_eq!(&b.lambda * &b.pi11 + (qi(1) - &b.lambda) * &b.pi10, b.pi1);
    }

    #[test]
    fn ordering_is_enforced() {
        assert!(BernoulliPair::new(q(3, 5), q(2, 3)).is_err());
        assert!(BernoulliPair::new(q(2, 3), q(2, 5)).is_err());
    }

    #[test]
    fn dominated_pair_is_sufficient() {
        let d = DiscountFactor::uniform(2).unwrap();
        let out = closed_form_verdict(&pair((3, 4), (2, 3)), &pair((2, 3), (3, 5)), &d).unwrap();
        assert!(out.verdict.is_sufficient());
        assert!(matches!(out.branch, Some(Branch::I) | Some(Branch::II)));
        let low = closed_form_verdict(&pair((3, 5), (1, 2)), &pair((7, 10), (1, 2)), &d).unwrap();
        assert_eq!(low.verdict.status, Status::NotSufficient);
        assert!(!low.condition_a);
    }

    #[test]
    fn normalization_rules() {
        let d = DiscountFactor::uniform(2).unwrap();
        let flipped = BernoulliPair::raw(q(1, 4), q(1, 3)).unwrap();
        let (n, notes) = normalize(&flipped, false, "f").unwrap();
        assert_eq!(n, pair((3, 4), (2, 3)));
        assert_eq!(notes.len(), 2);
        let swapped = BernoulliPair::raw(q(3, 5), q(4, 5)).unwrap();
        assert!(closed_form_verdict(&swapped, &pair((3, 5), (3, 5)), &d).is_err());
        let late = DiscountFactor::degenerate(2, 2).unwrap();
        assert!(closed_form_verdict(&swapped, &pair((3, 5), (3, 5)), &late).is_ok());
    }

    #[test]
    fn necessity_examples() {
        let r = |a: (i64, i64), b: (i64, i64)| BernoulliPair::raw(q(a.0, a.1), q(b.0, b.1)).unwrap();
        assert!(necessity_max_check(&r((9, 10), (6, 10)), &r((8, 10), (85, 100))));
        assert!(!necessity_max_check(&r((7, 10), (6, 10)), &r((8, 10), (55, 100))));
        assert!(necessity_max_check(&r((7, 10), (6, 10)), &r((7, 10), (6, 10))));
    }
}
