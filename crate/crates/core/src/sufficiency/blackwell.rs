//! Static garbling feasibility, for conditional laws or joint state measures.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lp::{solve_feasibility, FeasibilityProblem, FeasibilityResult};
use crate::model::{uniform_prior, Garbling, StaticExperiment};
use crate::rational::Q;
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Witness};

/// Outcome of the garbling system `target[θ][y] = Σ_x source[θ][x]·γ(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GarblingSolution {
    /// Row-stochastic `γ[x][y]`.
    Feasible(Vec<Vec<Q>>),
    /// Farkas vector. Entry `y·S + θ` belongs to the reproduction row of
    /// `(y, θ)`, entry `Y·S + x` to the row-sum row of source outcome `x`.
    Infeasible(Vec<Q>),
}

/// Solve the garbling system exactly. Source and target entries may be
/// conditional laws or unnormalised measures, one row per state.
pub fn solve_garbling(source: &[Vec<Q>], target: &[Vec<Q>]) -> Result<GarblingSolution> {
    let n_states = source.len();
    if target.len() != n_states || n_states == 0 {
        return Err(Error::StateMismatch("source and target have different state counts".into()));
    }
    let nx = source[0].len();
    let ny = target[0].len();
    if source.iter().any(|r| r.len() != nx) || target.iter().any(|r| r.len() != ny) {
        return Err(Error::Invalid("ragged law matrix".into()));
    }
    let live_x: Vec<usize> = (0..nx).filter(|&x| source.iter().any(|r| !r[x].is_zero())).collect();
    let live_y: Vec<usize> = (0..ny).filter(|&y| target.iter().any(|r| !r[y].is_zero())).collect();

    let mut lp = FeasibilityProblem::new();
    for &x in &live_x {
        for &y in &live_y {
            lp.add_variable(format!("g[{y}|{x}]"));
        }
    }
    let var = |xi: usize, yi: usize| xi * live_y.len() + yi;
    for (yi, &y) in live_y.iter().enumerate() {
        for th in 0..n_states {
            let coeffs = live_x
                .iter()
                .enumerate()
                .filter(|(_, &x)| !source[th][x].is_zero())
                .map(|(xi, &x)| (var(xi, yi), source[th][x].clone()))
                .collect();
            lp.add_row(coeffs, target[th][y].clone());
        }
    }
    for xi in 0..live_x.len() {
        let coeffs = (0..live_y.len()).map(|yi| (var(xi, yi), Q::one())).collect();
        lp.add_row(coeffs, Q::one());
    }

    match solve_feasibility(&lp)? {
        FeasibilityResult::Witness(v) => {
            let fill = if ny == 0 { Q::zero() } else { Q::new(1.into(), (ny as i64).into()) };
            let mut gamma = vec![vec![fill; ny]; nx];
            for (xi, &x) in live_x.iter().enumerate() {
                let mut row = vec![Q::zero(); ny];
                for (yi, &y) in live_y.iter().enumerate() {
                    row[y] = v[var(xi, yi)].clone();
                }
                gamma[x] = row;
            }
            if !garbling_reproduces(source, target, &gamma) {
                return Err(Error::BadCertificate);
            }
            Ok(GarblingSolution::Feasible(gamma))
        }
        FeasibilityResult::Certificate(y) => {
            let n_live_rows = live_y.len() * n_states;
            let mut dual = vec![Q::zero(); ny * n_states + nx];
            for (yi, &yy) in live_y.iter().enumerate() {
                for th in 0..n_states {
                    dual[yy * n_states + th] = y[yi * n_states + th].clone();
                }
            }
            for (xi, &x) in live_x.iter().enumerate() {
                dual[ny * n_states + x] = y[n_live_rows + xi].clone();
            }
            // Dead targets get a uniformly negative dual large enough to keep
            // every live column nonpositive.
            let mut m = Q::zero();
            for &x in &live_x {
                let mass: Q = source.iter().fold(Q::zero(), |a, r| a + &r[x]);
                let ratio = &dual[ny * n_states + x] / mass;
                if ratio > m {
                    m = ratio;
                }
            }
            for yy in (0..ny).filter(|y| !live_y.contains(y)) {
                for th in 0..n_states {
                    dual[yy * n_states + th] = -m.clone();
                }
            }
            if !farkas_holds(source, target, &dual) {
                return Err(Error::BadCertificate);
            }
            Ok(GarblingSolution::Infeasible(dual))
        }
    }
}

/// Exact check that `gamma` is row-stochastic and maps `source` to `target`.
pub fn garbling_reproduces(source: &[Vec<Q>], target: &[Vec<Q>], gamma: &[Vec<Q>]) -> bool {
    let ny = target.first().map_or(0, Vec::len);
    if gamma.len() != source.first().map_or(0, Vec::len) {
        return false;
    }
    let g = Garbling {
        from: vec![String::new(); gamma.len()],
        to: vec![String::new(); ny],
        matrix: gamma.to_vec(),
    };
    g.is_stochastic() && g.apply_laws(source) == target
}

/// Exact check of the Farkas conditions for the garbling system.
pub fn farkas_holds(source: &[Vec<Q>], target: &[Vec<Q>], dual: &[Q]) -> bool {
    let n_states = source.len();
    let nx = source.first().map_or(0, Vec::len);
    let ny = target.first().map_or(0, Vec::len);
    if dual.len() != ny * n_states + nx {
        return false;
    }
    for x in 0..nx {
        let z = &dual[ny * n_states + x];
        for y in 0..ny {
            let mut col = z.clone();
            for th in 0..n_states {
                if !source[th][x].is_zero() {
                    col += &source[th][x] * &dual[y * n_states + th];
                }
            }
            if col > Q::zero() {
                return false;
            }
        }
    }
    let mut rhs = Q::zero();
    for y in 0..ny {
        for th in 0..n_states {
            rhs += &target[th][y] * &dual[y * n_states + th];
        }
    }
    for x in 0..nx {
        rhs += &dual[ny * n_states + x];
    }
    rhs > Q::zero()
}

/// Static Blackwell comparison: is `p` sufficient for `q`?
pub fn blackwell_sufficient(p: &StaticExperiment, q: &StaticExperiment) -> Result<ComparisonVerdict> {
    if p.states != q.states {
        return Err(Error::StateMismatch(format!(
            "[{}] vs [{}]",
            p.states.join(","),
            q.states.join(",")
        )));
    }
    p.check()?;
    q.check()?;
    Ok(match solve_garbling(&p.laws, &q.laws)? {
        GarblingSolution::Feasible(matrix) => ComparisonVerdict::sufficient(
            Witness::Static(Garbling {
                from: p.outcomes.clone(),
                to: q.outcomes.clone(),
                matrix,
            }),
            "lp: static garbling",
        ),
        GarblingSolution::Infeasible(dual) => ComparisonVerdict::not_sufficient(
            Certificate {
                kind: CertificateKind::Farkas {
                    source: p.clone(),
                    target: q.clone(),
                    dual,
                },
                prior: Some(uniform_prior(p.states.len())),
                delta: None,
                period: None,
                problem: None,
            },
            "lp: static garbling infeasible",
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn labels(n: usize, prefix: &str) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    fn stat(laws: Vec<Vec<Q>>) -> StaticExperiment {
        let n = laws[0].len();
        StaticExperiment::new(labels(laws.len(), "s"), labels(n, "o"), laws).unwrap()
    }

    #[test]
    fn identity_is_sufficient() {
        let p = stat(vec![vec![q(2, 3), q(1, 3)], vec![q(1, 4), q(3, 4)]]);
        assert!(blackwell_sufficient(&p, &p).unwrap().is_sufficient());
    }

    #[test]
    fn perfect_information_garbles_to_anything() {
        let p = stat(vec![vec![qi(1), qi(0)], vec![qi(0), qi(1)]]);
        let target = stat(vec![vec![q(1, 5), q(3, 5), q(1, 5)], vec![q(1, 2), q(1, 4), q(1, 4)]]);
        match blackwell_sufficient(&p, &target).unwrap().witness {
            Some(Witness::Static(g)) => {
                assert_eq!(g.matrix[0], target.laws[0]);
                assert_eq!(g.matrix[1], target.laws[1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn no_information_cannot_produce_information() {
        let p = stat(vec![vec![qi(1)], vec![qi(1)]]);
        let target = stat(vec![vec![q(2, 3), q(1, 3)], vec![q(1, 3), q(2, 3)]]);
        let v = blackwell_sufficient(&p, &target).unwrap();
        assert!(!v.is_sufficient());
        match v.certificate.unwrap().kind {
            CertificateKind::Farkas { dual, .. } => assert!(farkas_holds(&p.laws, &target.laws, &dual)),
            _ => panic!("expected Farkas"),
        }
    }

    #[test]
    fn dead_outcomes_are_restored() {
        let p = stat(vec![vec![qi(1), qi(0), qi(0)], vec![qi(1), qi(0), qi(0)]]);
        let target = stat(vec![vec![q(1, 2), q(1, 2), qi(0)], vec![q(1, 4), q(3, 4), qi(0)]]);
        match solve_garbling(&p.laws, &target.laws).unwrap() {
            GarblingSolution::Infeasible(d) => {
                assert_eq!(d.len(), 3 * 2 + 3);
                assert!(farkas_holds(&p.laws, &target.laws, &d));
            }
            _ => panic!("expected infeasible"),
        }
        match solve_garbling(&target.laws, &p.laws).unwrap() {
            GarblingSolution::Feasible(g) => assert!(garbling_reproduces(&target.laws, &p.laws, &g)),
            _ => panic!("expected feasible"),
        }
    }

    #[test]
    fn state_mismatch_rejected() {
        let p = stat(vec![vec![qi(1)], vec![qi(1)]]);
        let r = stat(vec![vec![qi(1)], vec![qi(1)], vec![qi(1)]]);
        assert!(blackwell_sufficient(&p, &r).is_err());
    }
}
