use sufficiency_core::bernoulli::{mixture_mps, closed_form_verdict, two_draw_static_verdict, BernoulliPair};
use sufficiency_core::model::DiscountFactor;
use sufficiency_core::rational::q;
use sufficiency_core::sufficiency::delta_sufficient;
use sufficiency_core::verdict::Status;

fn grid() -> Vec<BernoulliPair> {
    let acc = [q(1, 2), q(3, 5), q(2, 3), q(3, 4), q(4, 5), q(9, 10), q(1, 1)];
    let mut out = Vec::new();
    for p in &acc {
        for qq in &acc {
            if qq <= p {
                out.push(BernoulliPair::new(p.clone(), qq.clone()).unwrap());
            }
        }
    }
    out
}

#[test]
fn closed_form_matches_convex_order_and_lp() {
    let pairs = grid();
    let mut bad = Vec::new();
    for d2 in [q(0, 1), q(1, 4), q(1, 2), q(3, 4), q(1, 1)] {
        let delta = DiscountFactor::new(vec![q(1, 1) - &d2, d2.clone()]).unwrap();
        for f in &pairs {
            for g in pairs.iter().step_by(3) {
                let t3 = closed_form_verdict(f, g, &delta).unwrap().verdict.status;
                let mps = mixture_mps(f, g, &delta).unwrap().status;
                let lp = delta_sufficient(&f.experiment(), &g.experiment(), &delta).unwrap().status;
                if t3 != mps || mps != lp {
                    bad.push(format!("{f:?} {g:?} {d2} t3={t3:?} mps={mps:?} lp={lp:?}"));
                }
            }
        }
    }
    let late = DiscountFactor::degenerate(2, 2).unwrap();
    for f in &pairs {
        for g in &pairs {
            let a = two_draw_static_verdict(f, g).unwrap().status;
            let b = closed_form_verdict(f, g, &late).unwrap().verdict.status;
            if a != b {
                bad.push(format!("two-draw {f:?} {g:?} {a:?} {b:?}"));
            }
        }
    }
    assert!(bad.is_empty(), "{}", bad.join("\n"));
    let _ = Status::Sufficient;
}
