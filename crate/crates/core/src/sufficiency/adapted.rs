//! Adapted garbling chains: the simulated history may only extend itself,
//! one period at a time, as real signals arrive.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lp::{solve_feasibility, FeasibilityProblem, FeasibilityResult};
use crate::model::{cumulative_laws, histories, history_index, Experiment, Garbling, StaticExperiment};
use crate::rational::Q;
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Witness};

use super::blackwell::blackwell_sufficient;
use super::delta::require_comparable;

struct Layout {
    /// Offset of the `Γ_t` block, 1-based `t` at index `t-1`.
    base: Vec<usize>,
    nx: Vec<usize>,
    ny: Vec<usize>,
}

impl Layout {
    fn var(&self, t: usize, x: usize, y: usize) -> usize {
        self.base[t - 1] + x * self.ny[t - 1] + y
    }
}

/// Does an adapted chain `Γ_1, …, Γ_T` exist with `g^t = f^t·Γ_t` for all `t`?
pub fn adapted_sufficient(f: &Experiment, g: &Experiment) -> Result<ComparisonVerdict> {
    require_comparable(f, g)?;
    let f_cums = cumulative_laws(f)?;
    let g_cums = cumulative_laws(g)?;
    let horizon = f.horizon();
    let n_states = f.num_states();

    let mut lp = FeasibilityProblem::new();
    let mut layout = Layout {
        base: Vec::new(),
        nx: Vec::new(),
        ny: Vec::new(),
    };
    for t in 1..=horizon {
        let nx = f_cums[t - 1].outcomes.len();
        let ny = g_cums[t - 1].outcomes.len();
        layout.base.push(lp.num_vars());
        layout.nx.push(nx);
        layout.ny.push(ny);
        for x in 0..nx {
            for y in 0..ny {
                lp.add_variable(format!("G{t}[{y}|{x}]"));
            }
        }
    }
    for x in 0..layout.nx[0] {
        let coeffs = (0..layout.ny[0]).map(|y| (layout.var(1, x, y), Q::one())).collect();
        lp.add_row(coeffs, Q::one());
    }
    for t in 2..=horizon {
        let xt = f.signals(t).len();
        let yt = g.signals(t).len();
        for xp in 0..layout.nx[t - 2] {
            for yp in 0..layout.ny[t - 2] {
                for xn in 0..xt {
                    let x = xp * xt + xn;
                    let mut coeffs: Vec<(usize, Q)> = (0..yt).map(|yn| (layout.var(t, x, yp * yt + yn), Q::one())).collect();
                    coeffs.push((layout.var(t - 1, xp, yp), -Q::one()));
                    lp.add_row(coeffs, Q::zero());
                }
            }
        }
    }
    for t in 1..=horizon {
        for y in 0..layout.ny[t - 1] {
            for th in 0..n_states {
                let coeffs = (0..layout.nx[t - 1])
                    .filter(|&x| !f_cums[t - 1].laws[th][x].is_zero())
                    .map(|x| (layout.var(t, x, y), f_cums[t - 1].laws[th][x].clone()))
                    .collect();
                lp.add_row(coeffs, g_cums[t - 1].laws[th][y].clone());
            }
        }
    }

    match solve_feasibility(&lp)? {
        FeasibilityResult::Witness(v) => {
            let mut chain = Vec::with_capacity(horizon);
            for t in 1..=horizon {
                let matrix = (0..layout.nx[t - 1])
                    .map(|x| (0..layout.ny[t - 1]).map(|y| v[layout.var(t, x, y)].clone()).collect())
                    .collect();
                chain.push(Garbling::new(
                    f_cums[t - 1].outcomes.clone(),
                    g_cums[t - 1].outcomes.clone(),
                    matrix,
                )?);
            }
            let kernels = factor_chain(f, g, &chain);
            if !adapted_chain_valid(f, g, &f_cums, &g_cums, &chain) {
                return Err(Error::BadCertificate);
            }
            Ok(ComparisonVerdict::sufficient(
                Witness::Adapted { chain, kernels },
                "lp: adapted garbling chain",
            ))
        }
        FeasibilityResult::Certificate(_) => {
            // A failing period gives a certificate with a separating problem.
            for t in 1..=horizon {
                let v = blackwell_sufficient(&f_cums[t - 1], &g_cums[t - 1])?;
                if let Some(mut cert) = v.certificate {
                    cert.period = Some(t);
                    cert.delta = Some(crate::model::DiscountFactor::degenerate(horizon, t)?);
                    return Ok(ComparisonVerdict::not_sufficient(
                        cert,
                        format!("lp: adapted chain infeasible; period {t} garbling infeasible"),
                    ));
                }
            }
            let dual = match solve_feasibility(&lp)? {
                FeasibilityResult::Certificate(y) => y,
                FeasibilityResult::Witness(_) => return Err(Error::BadCertificate),
            };
            Ok(ComparisonVerdict::not_sufficient(
                Certificate {
                    kind: CertificateKind::Dual {
                        system: "adapted chain".into(),
                        problem: Box::new(lp),
                        dual,
                    },
                    prior: None,
                    delta: None,
                    period: None,
                    problem: None,
                },
                "lp: adapted chain infeasible although every period is garbling-feasible",
            ))
        }
    }
}

/// Exact check of the chain constraints.
pub fn adapted_chain_valid(
    f: &Experiment,
    g: &Experiment,
    f_cums: &[StaticExperiment],
    g_cums: &[StaticExperiment],
    chain: &[Garbling],
) -> bool {
    if chain.len() != f.horizon() {
        return false;
    }
    for (t, gam) in chain.iter().enumerate() {
        if !gam.is_stochastic() || gam.apply_laws(&f_cums[t].laws) != g_cums[t].laws {
            return false;
        }
    }
    for t in 2..=f.horizon() {
        let xt = f.signals(t).len();
        let yt = g.signals(t).len();
        let prev = &chain[t - 2].matrix;
        let cur = &chain[t - 1].matrix;
        for (xp, prow) in prev.iter().enumerate() {
            for (yp, pv) in prow.iter().enumerate() {
                for xn in 0..xt {
                    let s = (0..yt).fold(Q::zero(), |acc, yn| acc + &cur[xp * xt + xn][yp * yt + yn]);
                    if s != *pv {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `γ_t(y_t | x^t, y^{t-1}) = Γ_t(y^t|x^t) / Γ_{t-1}(y^{t-1}|x^{t-1})`,
/// uniform where the denominator vanishes.
pub fn factor_chain(f: &Experiment, g: &Experiment, chain: &[Garbling]) -> Vec<Garbling> {
    let mut out = Vec::with_capacity(chain.len());
    for t in 1..=chain.len() {
        let yt = g.signals(t).len();
        let xsizes = f.signal_sizes(t);
        let ysizes_prev = g.signal_sizes(t - 1);
        let mut from = Vec::new();
        let mut matrix = Vec::new();
        for xs in histories(&xsizes) {
            for yp in histories(&ysizes_prev) {
                from.push(format!("{}|{}", f.history_label(&xs), g.history_label(&yp)));
                let x = history_index(&xsizes, &xs);
                let ypi = history_index(&ysizes_prev, &yp);
                let denom = if t == 1 {
                    Q::one()
                } else {
                    let xprev = history_index(&f.signal_sizes(t - 1), &xs[..t - 1]);
                    chain[t - 2].matrix[xprev][ypi].clone()
                };
                let row: Vec<Q> = if denom.is_zero() {
                    vec![Q::new(1.into(), (yt as i64).into()); yt]
                } else {
                    (0..yt).map(|yn| &chain[t - 1].matrix[x][ypi * yt + yn] / &denom).collect()
                };
                matrix.push(row);
            }
        }
        out.push(Garbling {
            from,
            to: g.signals(t).to_vec(),
            matrix,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;
    use crate::verdict::Status;

    fn bsc(p: Q) -> Experiment {
        Experiment::uncontrolled(
            vec!["a".into(), "b".into()],
            vec![vec!["0".into(), "1".into()]; 2],
            move |_, s, _| {
                let miss = Q::one() - &p;
                if s == 0 {
                    vec![p.clone(), miss]
                } else {
                    vec![miss, p.clone()]
                }
            },
        )
        .unwrap()
    }

    #[test]
    fn identity_chain() {
        let f = bsc(q(3, 4));
        let v = adapted_sufficient(&f, &f).unwrap();
        assert!(v.is_sufficient());
        if let Some(Witness::Adapted { kernels, .. }) = v.witness {
            assert!(kernels.iter().all(Garbling::is_stochastic));
        }
    }

    #[test]
    fn product_chain_between_channels() {
        let v = adapted_sufficient(&bsc(q(3, 4)), &bsc(q(2, 3))).unwrap();
        assert!(v.is_sufficient());
        let back = adapted_sufficient(&bsc(q(2, 3)), &bsc(q(3, 4))).unwrap();
        assert_eq!(back.status, Status::NotSufficient);
        assert_eq!(back.certificate.unwrap().period, Some(1));
    }
}
