//! Exact feasibility for `{A v = b, v >= 0}`.
//!
//! The solver runs a phase-one simplex over [`Q`] with Bland's pivot rule.
//! The rule is deterministic and never cycles. A feasible system yields a
//! primal witness. An infeasible one yields a Farkas vector `y` with
//! `yᵀA <= 0` in every column and `yᵀb > 0`. The vector is read off the
//! optimal phase-one duals.

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{serde_q, serde_qvec, Q};

/// One sparse equality row `Σ coeff·v[idx] = rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, SerQ)>,
    #[serde(with = "serde_q")]
    pub rhs: Q,
}

/// Newtype so sparse coefficients serialize as strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerQ(#[serde(with = "serde_q")] pub Q);

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityProblem {
    names: Vec<String>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibilityResult {
    Witness(#[serde(with = "serde_qvec")] Vec<Q>),
    Certificate(#[serde(with = "serde_qvec")] Vec<Q>),
}

impl FeasibilityResult {
    pub fn is_witness(&self) -> bool {
        matches!(self, FeasibilityResult::Witness(_))
    }
}

impl FeasibilityProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> usize {
        self.names.push(name.into());
        self.names.len() - 1
    }

    /// Add a row. Zero coefficients are dropped; repeated indices are summed.
    pub fn add_row(&mut self, coeffs: Vec<(usize, Q)>, rhs: Q) {
        let mut merged: Vec<(usize, Q)> = Vec::with_capacity(coeffs.len());
        let mut sorted = coeffs;
        sorted.sort_by_key(|(i, _)| *i);
        for (i, c) in sorted {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|(_, c)| !c.is_zero());
        self.rows.push(Row {
            coeffs: merged.into_iter().map(|(i, c)| (i, SerQ(c))).collect(),
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.names.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Reject rows that mention undeclared variables.
    pub fn check_well_formed(&self) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            if let Some((i, _)) = row.coeffs.iter().find(|(i, _)| *i >= self.names.len()) {
                return Err(Error::MalformedRow(format!(
                    "row {r} references undeclared variable #{i} ({} declared)",
                    self.names.len()
                )));
            }
        }
        Ok(())
    }

    /// `A v` for an assignment `v`.
    pub fn apply(&self, v: &[Q]) -> Vec<Q> {
        self.rows
            .iter()
            .map(|row| {
                row.coeffs
                    .iter()
                    .fold(Q::zero(), |acc, (i, c)| acc + &c.0 * &v[*i])
            })
            .collect()
    }

    /// `yᵀA` as a dense vector over variables.
    pub fn transpose_apply(&self, y: &[Q]) -> Vec<Q> {
        let mut out = vec![Q::zero(); self.names.len()];
        for (row, yi) in self.rows.iter().zip(y) {
            if yi.is_zero() {
                continue;
            }
            for (i, c) in &row.coeffs {
                out[*i] += &c.0 * yi;
            }
        }
        out
    }
}

/// Consecutive degenerate pivots tolerated before falling back to Bland's rule.
const STALL_LIMIT: usize = 50;

/// Decide feasibility with the natural column order.
pub fn solve_feasibility(p: &FeasibilityProblem) -> Result<FeasibilityResult> {
    let order: Vec<usize> = (0..p.num_vars()).collect();
    solve_feasibility_ordered(p, &order)
}

/// Decide feasibility by phase-one simplex with columns in `order`. Ties
/// and the anti-cycling fallback follow that order, so different orders may
/// return different vertices of the feasible set.
pub fn solve_feasibility_ordered(
    p: &FeasibilityProblem,
    order: &[usize],
) -> Result<FeasibilityResult> {
    p.check_well_formed()?;
    let n = p.num_vars();
    if order.len() != n {
        return Err(Error::Invalid("column order must be a permutation".into()));
    }
    let mut position = vec![usize::MAX; n];
    for (pos, &j) in order.iter().enumerate() {
        if j >= n || position[j] != usize::MAX {
            return Err(Error::Invalid("column order must be a permutation".into()));
        }
        position[j] = pos;
    }
    let m = p.num_rows();
    let width = n + m;

    // Row signs make the right-hand side nonnegative.
    let signs: Vec<bool> = p.rows.iter().map(|r| r.rhs.is_negative()).collect();
    let mut tab: Vec<Vec<Q>> = Vec::with_capacity(m);
    let mut rhs: Vec<Q> = Vec::with_capacity(m);
    for (i, row) in p.rows.iter().enumerate() {
        let mut dense = vec![Q::zero(); width];
        for (j, c) in &row.coeffs {
            dense[position[*j]] = if signs[i] { -c.0.clone() } else { c.0.clone() };
        }
        dense[n + i] = Q::one();
        tab.push(dense);
        rhs.push(if signs[i] { -row.rhs.clone() } else { row.rhs.clone() });
    }
    let mut basis: Vec<usize> = (n..width).collect();

    // Reduced costs of the phase-one objective (sum of artificials).
    let mut cost = vec![Q::zero(); width];
    for row in &tab {
        for j in 0..n {
            if !row[j].is_zero() {
                cost[j] -= &row[j];
            }
        }
    }

    // Most negative reduced cost first; after a run of degenerate pivots
    // switch to Bland's rule for good, which cannot cycle. Artificial columns
    // never re-enter: the restricted problem has the same optimum zero when
    // the system is feasible, and the certificate only needs reduced costs of
    // the structural columns.
    let mut bland = false;
    let mut stalled = 0usize;
    loop {
        let enter = if bland {
            (0..n).find(|&j| cost[j].is_negative())
        } else {
            (0..n)
                .filter(|&j| cost[j].is_negative())
                .min_by(|&a, &b| cost[a].cmp(&cost[b]).then(a.cmp(&b)))
        };
        let Some(enter) = enter else {
            break;
        };
        let mut leave: Option<(usize, Q)> = None;
        for i in 0..m {
            let a = &tab[i][enter];
            if !a.is_positive() {
                continue;
            }
            let ratio = &rhs[i] / a;
            let better = match &leave {
                None => true,
                Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        // Phase one is bounded below by zero, so a leaving row always exists.
        let (r, step) = leave.expect("phase-one objective is bounded");
        if step.is_zero() {
            stalled += 1;
            bland |= stalled > STALL_LIMIT;
        } else {
            stalled = 0;
        }
        pivot(&mut tab, &mut rhs, &mut cost, r, enter);
        basis[r] = enter;
    }

    let infeasibility: Q = basis
        .iter()
        .zip(&rhs)
        .filter(|(b, _)| **b >= n)
        .fold(Q::zero(), |acc, (_, v)| acc + v);

    if infeasibility.is_zero() {
        let mut x = vec![Q::zero(); n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[order[b]] = rhs[i].clone();
            }
        }
        Ok(FeasibilityResult::Witness(x))
    } else {
        let y: Vec<Q> = (0..m)
            .map(|i| {
                let yi = Q::one() - &cost[n + i];
                if signs[i] {
                    -yi
                } else {
                    yi
                }
            })
            .collect();
        Ok(FeasibilityResult::Certificate(y))
    }
}

fn pivot(tab: &mut [Vec<Q>], rhs: &mut [Q], cost: &mut [Q], r: usize, c: usize) {
    let piv = tab[r][c].clone();
    let nz: Vec<usize> = (0..tab[r].len()).filter(|&j| !tab[r][j].is_zero()).collect();
    if !piv.is_one() {
        for &j in &nz {
            tab[r][j] /= &piv;
        }
        rhs[r] /= &piv;
    }
    let (pivot_row, pivot_rhs) = (tab[r].clone(), rhs[r].clone());
    for i in 0..tab.len() {
        if i == r || tab[i][c].is_zero() {
            continue;
        }
        let factor = tab[i][c].clone();
        for &j in &nz {
            let delta = &factor * &pivot_row[j];
            tab[i][j] -= delta;
        }
        rhs[i] -= &factor * &pivot_rhs;
    }
    if !cost[c].is_zero() {
        let factor = cost[c].clone();
        for &j in &nz {
            let delta = &factor * &pivot_row[j];
            cost[j] -= delta;
        }
    }
}

/// Exact check of a witness or certificate against `p`.
pub fn verify_result(p: &FeasibilityProblem, r: &FeasibilityResult) -> bool {
    if p.check_well_formed().is_err() {
        return false;
    }
    match r {
        FeasibilityResult::Witness(x) => {
            x.len() == p.num_vars()
                && x.iter().all(|v| !v.is_negative())
                && p.apply(x).iter().zip(&p.rows).all(|(lhs, row)| *lhs == row.rhs)
        }
        FeasibilityResult::Certificate(y) => {
            if y.len() != p.num_rows() {
                return false;
            }
            let yb = y
                .iter()
                .zip(&p.rows)
                .fold(Q::zero(), |acc, (yi, row)| acc + yi * &row.rhs);
            yb.is_positive() && p.transpose_apply(y).iter().all(|v| !v.is_positive())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qi};

    fn problem(n: usize, rows: &[(&[(usize, i64)], i64)]) -> FeasibilityProblem {
        let mut p = FeasibilityProblem::new();
        for j in 0..n {
            p.add_variable(format!("v{j}"));
        }
        for (coeffs, rhs) in rows {
            p.add_row(coeffs.iter().map(|(i, c)| (*i, qi(*c))).collect(), qi(*rhs));
        }
        p
    }

    #[test]
    fn single_variable_witness() {
        let p = problem(1, &[(&[(0, 1)], 1)]);
        let r = solve_feasibility(&p).unwrap();
        assert_eq!(r, FeasibilityResult::Witness(vec![qi(1)]));
        assert!(verify_result(&p, &r));
    }

    #[test]
    fn contradictory_system_gets_certificate() {
        // v1 + v2 = 1, v1 = 2.
        let p = problem(2, &[(&[(0, 1), (1, 1)], 1), (&[(0, 1)], 2)]);
        let r = solve_feasibility(&p).unwrap();
        let FeasibilityResult::Certificate(y) = &r else {
            panic!("expected certificate, got {r:?}");
        };
        assert!(verify_result(&p, &r));
        // The hand-derived certificate (-1, 1) also verifies.
        let hand = FeasibilityResult::Certificate(vec![qi(-1), qi(1)]);
        assert!(verify_result(&p, &hand));
        assert_eq!(y.len(), 2);
    }

    #[test]
    fn negative_rhs_rows_are_handled() {
        // -v0 = -3 is feasible with v0 = 3; -v1 = 2 is not.
        let p = problem(2, &[(&[(0, -1)], -3)]);
        assert_eq!(
            solve_feasibility(&p).unwrap(),
            FeasibilityResult::Witness(vec![qi(3), qi(0)])
        );
        let p = problem(1, &[(&[(0, -1)], 2)]);
        let r = solve_feasibility(&p).unwrap();
        assert!(!r.is_witness());
        assert!(verify_result(&p, &r));
    }

    #[test]
    fn binary_symmetric_garbling_has_diagonal_five_sixths() {
        // Garble BSC(3/4) into BSC(2/3): variables g00,g01,g10,g11.
        let mut p = FeasibilityProblem::new();
        for name in ["g00", "g01", "g10", "g11"] {
            p.add_variable(name);
        }
        let pm = [[q(3, 4), q(1, 4)], [q(1, 4), q(3, 4)]];
        let qm = [[q(2, 3), q(1, 3)], [q(1, 3), q(2, 3)]];
        for theta in 0..2 {
            for y in 0..2 {
                let coeffs = (0..2).map(|x| (2 * x + y, pm[theta][x].clone())).collect();
                p.add_row(coeffs, qm[theta][y].clone());
            }
        }
        for x in 0..2 {
            p.add_row(vec![(2 * x, qi(1)), (2 * x + 1, qi(1))], qi(1));
        }
        let r = solve_feasibility(&p).unwrap();
        let FeasibilityResult::Witness(g) = &r else { panic!() };
        assert!(verify_result(&p, &r));
        // The system has a unique solution, so the vertex is the hand value.
        let a = (q(2, 3) + q(3, 4) - qi(1)) / (q(3, 2) - qi(1));
        assert_eq!(a, q(5, 6));
        assert_eq!(g[0], a);
        assert_eq!(g[3], a);
    }

    #[test]
    fn perturbed_witness_and_flipped_certificate_fail() {
        let p = problem(2, &[(&[(0, 1), (1, 1)], 1)]);
        let r = solve_feasibility(&p).unwrap();
        let FeasibilityResult::Witness(mut x) = r else { panic!() };
        x[0] += q(1, 7);
        assert!(!verify_result(&p, &FeasibilityResult::Witness(x)));

        let p = problem(2, &[(&[(0, 1), (1, 1)], 1), (&[(0, 1)], 2)]);
        let FeasibilityResult::Certificate(y) = solve_feasibility(&p).unwrap() else { panic!() };
        let flipped: Vec<Q> = y.iter().map(|v| -v.clone()).collect();
        assert!(!verify_result(&p, &FeasibilityResult::Certificate(flipped)));
    }

    #[test]
    fn undeclared_variable_is_rejected() {
        let mut p = problem(1, &[]);
        p.add_row(vec![(3, qi(1))], qi(1));
        assert!(matches!(solve_feasibility(&p), Err(Error::MalformedRow(_))));
        assert!(!verify_result(&p, &FeasibilityResult::Witness(vec![qi(0)])));
    }

    #[test]
    fn empty_and_redundant_systems() {
        let p = problem(2, &[]);
        assert!(solve_feasibility(&p).unwrap().is_witness());
        let p = problem(2, &[(&[(0, 1), (1, 1)], 1), (&[(0, 2), (1, 2)], 2)]);
        let r = solve_feasibility(&p).unwrap();
        assert!(r.is_witness() && verify_result(&p, &r));
    }

    #[test]
    fn deterministic_across_calls_and_orders_are_valid() {
        let p = problem(3, &[(&[(0, 1), (1, 1), (2, 1)], 1), (&[(0, 1), (2, -1)], 0)]);
        let a = solve_feasibility(&p).unwrap();
        let b = solve_feasibility(&p).unwrap();
        assert_eq!(a, b);
        let c = solve_feasibility_ordered(&p, &[2, 1, 0]).unwrap();
        assert!(verify_result(&p, &c));
        assert!(solve_feasibility_ordered(&p, &[0, 0, 1]).is_err());
    }
}
