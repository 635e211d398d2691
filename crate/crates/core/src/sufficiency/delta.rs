//! Discounted comparisons: δ-sufficiency through mixtures, period-by-period
//! Δ-sufficiency, sweeps over sets of discount factors, and the algebra of
//! garbling families (mixing across δ, composing across experiments).

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{cumulative_laws, mixture_of, uniform_prior, DiscountFactor, Experiment, Garbling, StaticExperiment};
use crate::par;
use crate::rational::Q;
use crate::verdict::{Certificate, CertificateKind, ComparisonVerdict, Status, Witness};

use super::blackwell::{blackwell_sufficient, solve_garbling, GarblingSolution};

pub(crate) fn require_comparable(f: &Experiment, g: &Experiment) -> Result<()> {
    if !f.is_uncontrolled() || !g.is_uncontrolled() {
        return Err(Error::Controlled);
    }
    if f.states() != g.states() {
        return Err(Error::StateMismatch(format!(
            "[{}] vs [{}]",
            f.states().join(","),
            g.states().join(",")
        )));
    }
    if f.horizon() != g.horizon() {
        return Err(Error::HorizonMismatch {
            expected: f.horizon(),
            found: g.horizon(),
        });
    }
    Ok(())
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

/// Every target outcome of every period, tagged `"t:label"`.
pub fn tagged_outcomes(cums: &[StaticExperiment]) -> Vec<String> {
    cums.iter()
        .enumerate()
        .flat_map(|(i, c)| c.outcomes.iter().map(move |o| format!("{}:{}", i + 1, o)))
        .collect()
}

fn uniform_row(n: usize) -> Vec<Q> {
    if n == 0 {
        return Vec::new();
    }
    vec![Q::new(1.into(), (n as i64).into()); n]
}

/// Split a mixture-to-mixture garbling into one garbling per source period
/// whose columns run over all target periods. Source periods with zero
/// weight get uniform rows.
fn reslice(
    f_cums: &[StaticExperiment],
    g_cums: &[StaticExperiment],
    delta: &DiscountFactor,
    layout_f: &[(usize, usize)],
    layout_g: &[(usize, usize)],
    gamma: &[Vec<Q>],
) -> Vec<Garbling> {
    let to = tagged_outcomes(g_cums);
    let offsets: Vec<usize> = g_cums
        .iter()
        .scan(0, |acc, c| {
            let o = *acc;
            *acc += c.outcomes.len();
            Some(o)
        })
        .collect();
    let mut family: Vec<Garbling> = f_cums
        .iter()
        .map(|c| Garbling {
            from: c.outcomes.clone(),
            to: to.clone(),
            matrix: vec![uniform_row(to.len()); c.outcomes.len()],
        })
        .collect();
    for (row, &(tp, xi)) in layout_f.iter().enumerate() {
        let mut full = vec![Q::zero(); to.len()];
        for (col, &(t, yi)) in layout_g.iter().enumerate() {
            full[offsets[t - 1] + yi] = gamma[row][col].clone();
        }
        family[tp - 1].matrix[xi] = full;
    }
    debug_assert!(delta.weights().len() == f_cums.len());
    family
}

/// Exact check of the family equation
/// `δ_t g^t(y^t|θ) = Σ_{t'} δ_{t'} Σ_{x^{t'}} f^{t'}(x^{t'}|θ) γ_{t'}((t,y^t)|x^{t'})`.
pub fn family_reproduces(
    f_cums: &[StaticExperiment],
    g_cums: &[StaticExperiment],
    delta: &DiscountFactor,
    family: &[Garbling],
) -> bool {
    let n_to: usize = g_cums.iter().map(|c| c.outcomes.len()).sum();
    if family.len() != f_cums.len() || g_cums.len() != f_cums.len() {
        return false;
    }
    for (tp, gam) in family.iter().enumerate() {
        if gam.matrix.len() != f_cums[tp].outcomes.len() || gam.to.len() != n_to || !gam.is_stochastic() {
            return false;
        }
    }
    let n_states = f_cums[0].laws.len();
    for th in 0..n_states {
        let mut rhs = vec![Q::zero(); n_to];
        for (tp, gam) in family.iter().enumerate() {
            let w = delta.weight(tp + 1);
            if w.is_zero() {
                continue;
            }
            for (x, row) in gam.matrix.iter().enumerate() {
                let mass = w * &f_cums[tp].laws[th][x];
                if mass.is_zero() {
                    continue;
                }
                for (col, g) in row.iter().enumerate() {
                    if !g.is_zero() {
                        rhs[col] += &mass * g;
                    }
                }
            }
        }
        let mut col = 0;
        for (t, c) in g_cums.iter().enumerate() {
            let w = delta.weight(t + 1);
            for y in 0..c.outcomes.len() {
                if w * &c.laws[th][y] != rhs[col] {
                    return false;
                }
                col += 1;
            }
        }
    }
    true
}

/// δ-sufficiency of `f` for `g` via the mixture experiments.
pub fn delta_sufficient(f: &Experiment, g: &Experiment, delta: &DiscountFactor) -> Result<ComparisonVerdict> {
    require_comparable(f, g)?;
    require_horizon(f, delta)?;
    let f_cums = cumulative_laws(f)?;
    let g_cums = cumulative_laws(g)?;
    delta_sufficient_laws(&f_cums, &g_cums, delta)
}

/// δ-sufficiency on precomputed cumulative laws.
pub fn delta_sufficient_laws(
    f_cums: &[StaticExperiment],
    g_cums: &[StaticExperiment],
    delta: &DiscountFactor,
) -> Result<ComparisonVerdict> {
    let (fm, layout_f) = mixture_of(f_cums, delta)?;
    let (gm, layout_g) = mixture_of(g_cums, delta)?;
    match solve_garbling(&fm.laws, &gm.laws)? {
        GarblingSolution::Feasible(gamma) => {
            let family = reslice(f_cums, g_cums, delta, &layout_f, &layout_g, &gamma);
            if !family_reproduces(f_cums, g_cums, delta, &family) {
                return Err(Error::BadCertificate);
            }
            Ok(ComparisonVerdict::sufficient(Witness::Family(family), "lp: mixture garbling"))
        }
        GarblingSolution::Infeasible(dual) => {
            let n = fm.states.len();
            Ok(ComparisonVerdict::not_sufficient(
                Certificate {
                    kind: CertificateKind::Farkas {
                        source: fm,
                        target: gm,
                        dual,
                    },
                    prior: Some(uniform_prior(n)),
                    delta: Some(delta.clone()),
                    period: None,
                    problem: None,
                },
                "lp: mixture garbling infeasible",
            ))
        }
    }
}

/// Period-by-period sufficiency `f^t ⊵ g^t` for every `t`.
pub fn big_delta_sufficient(f: &Experiment, g: &Experiment) -> Result<ComparisonVerdict> {
    require_comparable(f, g)?;
    let f_cums = cumulative_laws(f)?;
    let g_cums = cumulative_laws(g)?;
    let verdicts = par::map_range(f_cums.len(), |i| blackwell_sufficient(&f_cums[i], &g_cums[i]));
    let mut witnesses = Vec::with_capacity(verdicts.len());
    for (i, v) in verdicts.into_iter().enumerate() {
        let v = v?;
        match v.status {
            Status::Sufficient => match v.witness {
                Some(Witness::Static(gm)) => witnesses.push(gm),
                _ => return Err(Error::BadCertificate),
            },
            _ => {
                let t = i + 1;
                let mut cert = v.certificate.ok_or(Error::BadCertificate)?;
                cert.delta = Some(DiscountFactor::degenerate(f.horizon(), t)?);
                cert.period = Some(t);
                return Ok(ComparisonVerdict::not_sufficient(
                    cert,
                    format!("lp: period {t} garbling infeasible"),
                ));
            }
        }
    }
    Ok(ComparisonVerdict::sufficient(
        Witness::PerPeriod(witnesses),
        "lp: per-period garblings",
    ))
}

/// Verdicts over a set of discount factors, with the consistency check
/// between degenerate vectors and period-by-period sufficiency.
#[derive(Debug, Clone)]
pub struct DeltaSweep {
    pub verdicts: Vec<ComparisonVerdict>,
    /// `None` unless every degenerate vector is in the set. Otherwise whether
    /// "sufficient at every degenerate δ" matched the per-period verdict.
    pub degenerate_consistent: Option<bool>,
}

pub fn delta_sufficient_all(f: &Experiment, g: &Experiment, deltas: &[DiscountFactor]) -> Result<DeltaSweep> {
    require_comparable(f, g)?;
    for d in deltas {
        require_horizon(f, d)?;
    }
    let f_cums = cumulative_laws(f)?;
    let g_cums = cumulative_laws(g)?;
    let verdicts = par::map(deltas, |d| delta_sufficient_laws(&f_cums, &g_cums, d))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let horizon = f.horizon();
    let mut degenerate_status = vec![None; horizon];
    for (d, v) in deltas.iter().zip(&verdicts) {
        if let Some(t) = d.degenerate_period() {
            degenerate_status[t - 1] = Some(v.is_sufficient());
        }
    }
    let degenerate_consistent = if degenerate_status.iter().all(Option::is_some) {
        let all = degenerate_status.iter().all(|s| *s == Some(true));
        Some(all == big_delta_sufficient(f, g)?.is_sufficient())
    } else {
        None
    };
    Ok(DeltaSweep {
        verdicts,
        degenerate_consistent,
    })
}

/// Witness at `a·δ + (1-a)·δ̂` built from witnesses at `δ` and `δ̂`:
/// row `x^{t'}` is `(aδ_{t'}γ_{t'} + (1-a)δ̂_{t'}γ̂_{t'}) / (aδ_{t'} + (1-a)δ̂_{t'})`.
pub fn mix_delta_witnesses(
    delta: &DiscountFactor,
    family: &[Garbling],
    delta_hat: &DiscountFactor,
    family_hat: &[Garbling],
    a: &Q,
) -> Result<Vec<Garbling>> {
    if family.len() != delta.horizon() || family_hat.len() != delta_hat.horizon() || family.len() != family_hat.len() {
        return Err(Error::HorizonMismatch {
            expected: family.len(),
            found: family_hat.len(),
        });
    }
    let b = Q::one() - a;
    let mut out = Vec::with_capacity(family.len());
    for (i, (gam, gam_hat)) in family.iter().zip(family_hat).enumerate() {
        if gam.matrix.len() != gam_hat.matrix.len() || gam.to != gam_hat.to {
            return Err(Error::Invalid(format!("families differ in shape at period {}", i + 1)));
        }
        let wa = a * delta.weight(i + 1);
        let wb = &b * delta_hat.weight(i + 1);
        let denom = &wa + &wb;
        let matrix = gam
            .matrix
            .iter()
            .zip(&gam_hat.matrix)
            .map(|(r, rh)| {
                if denom.is_zero() {
                    uniform_row(r.len())
                } else {
                    r.iter().zip(rh).map(|(x, y)| (&wa * x + &wb * y) / &denom).collect()
                }
            })
            .collect();
        out.push(Garbling {
            from: gam.from.clone(),
            to: gam.to.clone(),
            matrix,
        });
    }
    Ok(out)
}

/// Compose a witness family for `f ⊵_δ g` with one for `g ⊵_δ e`:
/// `ρ_{t'}(·|x^{t'}) = Σ_{(s, y^s)} γ_{t'}((s,y^s)|x^{t'}) η_s(·|y^s)`.
pub fn compose_families(first: &[Garbling], second: &[Garbling]) -> Result<Vec<Garbling>> {
    let sizes: Vec<usize> = second.iter().map(|g| g.matrix.len()).collect();
    let total: usize = sizes.iter().sum();
    let stacked: Vec<Vec<Q>> = second.iter().flat_map(|g| g.matrix.iter().cloned()).collect();
    let to = second.first().map(|g| g.to.clone()).unwrap_or_default();
    if second.iter().any(|g| g.to != to) {
        return Err(Error::Invalid("second family has inconsistent columns".into()));
    }
    let labels: Vec<String> = second
        .iter()
        .enumerate()
        .flat_map(|(i, g)| g.from.iter().map(move |o| format!("{}:{}", i + 1, o)))
        .collect();
    let stack = Garbling {
        from: labels,
        to,
        matrix: stacked,
    };
    first
        .iter()
        .map(|g| {
            if g.to.len() != total {
                return Err(Error::Invalid("families do not compose".into()));
            }
            g.compose(&stack)
        })
        .collect()
}
