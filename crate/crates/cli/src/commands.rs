use std::path::Path;

use num_traits::{One, Zero};
use serde_json::Value;

use sufficiency_core::bernoulli::{bernoulli_posteriors, mixture_mps, normalize, closed_form_verdict, BernoulliPair};
use sufficiency_core::controlled::{arrival_verdict, controlled_delta_sufficient, ArrivalParams, FamilyOptions};
use sufficiency_core::error::Error as CoreError;
use sufficiency_core::model::{mixture_experiment, uniform_prior, DiscountFactor, Experiment};
use sufficiency_core::oracle::{dominance_audit, random_problem_suite, PayoffGrid};
use sufficiency_core::par;
use sufficiency_core::rational::{fmt_q, parse_q, Q};
use sufficiency_core::sufficiency::{
    adapted_sufficient, big_delta_sufficient, blackwell_sufficient, delta_sufficient, evolving_state_sufficient,
    sequential_most_valuable, verdict_decision_problem, PathExperiment, StatePathLaw,
};
use sufficiency_core::verdict::{ComparisonVerdict, Status};

use crate::args::{
    AuditArgs, BernoulliArgs, Cli, Command, CompareArgs, ControlledArgs, FileKind, Mode, SeqArgs, StateLaw,
    ValidateArgs,
};
use crate::error::{CliError, Result};
use crate::input::{load, load_with, parse_prior, DeltaSpec, InputDigest};
use crate::report::{payoff_table, render_certificate, render_witness, status_word, table, Report};
use crate::schema::{ArrivalFile, CouplingFile, ExperimentFile, KernelFamilyFile};

/// Run one command. Errors map to exit code 3; a report carries its own code.
pub fn run(cli: &Cli) -> Result<Report> {
    let mut notes = Vec::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        if !par::configure_jobs(jobs) {
            notes.push(format!("worker pool already sized; --jobs {jobs} ignored"));
        }
    }
    let mut report = match &cli.command {
        Command::Compare(a) => compare(a),
        Command::CompareSeq(a) => compare_seq(a),
        Command::CompareControlled(a) => compare_controlled(a),
        Command::Bernoulli(a) => bernoulli(a),
        Command::Audit(a) => audit(a),
        Command::Validate(a) => validate(a),
    }?;
    report.route.extend(notes);
    Ok(report)
}

fn experiment(role: &str, path: &Path) -> Result<(Experiment, InputDigest)> {
    load_with::<ExperimentFile, _>(role, path, |f| f.to_experiment(""))
}

fn prior_for(arg: &Option<String>, states: usize) -> Result<Option<Vec<Q>>> {
    let Some(s) = arg else { return Ok(None) };
    let p = parse_prior(s).map_err(CliError::Usage)?;
    if p.len() != states {
        return Err(CliError::Usage(format!("prior has {} entries for {states} states", p.len())));
    }
    if p.iter().any(|x| x.is_zero() || *x < Q::zero()) || p.iter().fold(Q::zero(), |a, b| a + b) != Q::one() {
        return Err(CliError::Usage("prior must be a full-support distribution".into()));
    }
    Ok(Some(p))
}

fn need_delta(d: &Option<DeltaSpec>, mode: &str) -> Result<DeltaSpec> {
    d.clone().ok_or_else(|| CliError::Usage(format!("--mode {mode} needs --delta")))
}

/// Append a verdict with its witness or certificate and separating problem.
fn finish(report: &mut Report, v: ComparisonVerdict, prior: Option<&[Q]>, g: &Experiment) {
    if let Some(w) = &v.witness {
        let text = render_witness(w, Some(g));
        report.text.push_str(&text);
    }
    if let Some(c) = &v.certificate {
        report.text.push_str(&render_certificate(c));
        if let Some(t) = c.period {
            report.detail("failing_period", t);
        }
        let dp = match &c.problem {
            Some(dp) => Ok(dp.clone()),
            None => verdict_decision_problem(&v, prior),
        };
        match dp {
            Ok(dp) => {
                report.line("separating decision problem (payoff by action and state):");
                report.text.push_str(&payoff_table(&dp, g.states()));
                report.decision_problem = Some(dp);
            }
            Err(e) => report.line(format!("no separating decision problem: {e}")),
        }
    }
    let mut summary = Report::new("");
    summary.set_verdict(v.clone());
    report.text.insert_str(0, &summary.text);
    report.status = summary.status;
    report.exit_code = summary.exit_code;
    report.route.extend(summary.route);
    report.verdict = Some(v);
}

fn compare(a: &CompareArgs) -> Result<Report> {
    let (f, df) = experiment("f", &a.f)?;
    let (g, dg) = experiment("g", &a.g)?;
    let mut report = Report::new("compare");
    report.inputs = vec![df, dg];
    let prior = prior_for(&a.prior, f.num_states())?;
    let mode = match a.mode {
        Mode::Delta => "delta",
        Mode::BigDelta => "big-delta",
        Mode::Adapted => "adapted",
        Mode::Evolving => "evolving",
    };
    report.param("mode", mode);
    if let Some(p) = &prior {
        report.param("prior", p.iter().map(fmt_q).collect::<Vec<_>>());
    }
    let (v, problem_prior) = match a.mode {
        Mode::Delta => {
            let d = need_delta(&a.delta, mode)?.resolve(f.horizon())?;
            report.param("delta", &d);
            report.route.push("engine: garbling of the discounted mixtures".into());
            (delta_sufficient(&f, &g, &d)?, prior.clone())
        }
        Mode::BigDelta => {
            report.route.push("engine: period-by-period garblings".into());
            (big_delta_sufficient(&f, &g)?, prior.clone())
        }
        Mode::Adapted => {
            report.route.push("engine: adapted garbling chain".into());
            (adapted_sufficient(&f, &g)?, prior.clone())
        }
        Mode::Evolving => {
            let d = need_delta(&a.delta, mode)?.resolve(f.horizon())?;
            report.param("delta", &d);
            let marginal = prior.clone().unwrap_or_else(|| uniform_prior(f.num_states()));
            let law = match a.state_law {
                StateLaw::Persistent => StatePathLaw::persistent(&marginal, f.horizon())?,
                StateLaw::Iid => StatePathLaw::iid(&marginal, f.horizon())?,
            };
            report.param(
                "state_law",
                match a.state_law {
                    StateLaw::Persistent => "persistent",
                    StateLaw::Iid => "iid",
                },
            );
            report.route.push("engine: joint state-path measures".into());
            let v = evolving_state_sufficient(&law, &PathExperiment::from_fixed(&f)?, &PathExperiment::from_fixed(&g)?, &d)?;
            (v, None)
        }
    };
    finish(&mut report, v, problem_prior.as_deref(), &g);
    Ok(report)
}

fn compare_seq(a: &SeqArgs) -> Result<Report> {
    let (c, dc) = load_with::<CouplingFile, _>("coupling", &a.coupling, CouplingFile::to_coupling)?;
    let d = a.delta.resolve(c.f().horizon())?;
    let mut report = Report::new("compare-seq");
    report.inputs = vec![dc];
    report.param("delta", &d);
    report.route.push("engine: continuation comparisons at every on-path history".into());
    let seq = sequential_most_valuable(&c, &d)?;
    report.status = Some(seq.status);
    report.exit_code = seq.status.exit_code();
    report.line(format!("verdict: {}", status_word(seq.status)));
    let mut rows = vec![vec!["period".to_string(), "history".into(), "live states".into(), "verdict".into()]];
    for r in &seq.rows {
        rows.push(vec![
            r.period.to_string(),
            if r.history.is_empty() { "(empty)".into() } else { r.history.join(",") },
            r.live_states.join(","),
            r.verdict.as_ref().map_or("unreached".into(), |v| status_word(v.status).into()),
        ]);
    }
    report.text.push_str(&table(&rows));
    report.detail("histories", &seq.rows);
    Ok(report)
}

fn compare_controlled(a: &ControlledArgs) -> Result<Report> {
    let mut report = Report::new("compare-controlled");
    report.param("cap", a.cap);
    if let Some(path) = &a.arrival {
        let d = a.delta.resolve(2)?;
        let (params, digest) = load_with::<ArrivalFile, _>("arrival", path, |x| x.to_params(d.clone()))?;
        report.inputs.push(digest);
        report.param("delta", &d);
        return arrival(report, &params, a.cap);
    }
    let (f, df) = experiment("f", a.f.as_deref().expect("clap requires f"))?;
    let (g, dg) = experiment("g", a.g.as_deref().expect("clap requires g"))?;
    report.inputs = vec![df, dg];
    let d = a.delta.resolve(f.horizon())?;
    report.param("delta", &d);
    let mut opts = FamilyOptions {
        cap: a.cap,
        deterministic: !a.user_only,
        user: Vec::new(),
    };
    if let Some(path) = &a.kernels {
        let (kernels, dk) = load_with::<KernelFamilyFile, _>("kernels", path, |x| x.to_kernels(&g))?;
        report.inputs.push(dk);
        opts.user = kernels;
    }
    let out = controlled_delta_sufficient(&f, &g, &d, &opts)?;
    report.route.push(format!("engine: sequence-form system per test kernel ({})", out.family));
    report.detail("family", &out.family);
    report.detail("family_size", out.family_size);
    report.detail("kernels_checked", out.kernels_checked);
    if let Some(k) = &out.refuting_kernel {
        report.detail("refuting_kernel", &k.label);
    }
    finish(&mut report, out.verdict, None, &g);
    report.line(format!("kernels checked: {} of {} ({})", out.kernels_checked, out.family_size, out.family));
    if let Some(k) = &out.refuting_kernel {
        report.line(format!("refuting kernel: {}", k.label));
    }
    Ok(report)
}

fn arrival(mut report: Report, params: &ArrivalParams, cap: usize) -> Result<Report> {
    report.route.push("engine: closed-form arrival inequality".into());
    let g = params.g_experiment()?;
    let margins: Vec<String> = (0..params.num_controls()).map(|k| fmt_q(&params.margin(k))).collect();
    report.detail("margins", &margins);
    let out = match arrival_verdict(params, cap) {
        Ok(out) => out,
        Err(CoreError::CapExceeded(msg)) => {
            report.set_verdict(ComparisonVerdict::inconclusive(format!("kernel family too large: {msg}")));
            return Ok(report);
        }
        Err(e) => return Err(e.into()),
    };
    report.detail("kernels_verified", out.kernels_verified);
    let violating = out.violating_control.map(|k| g.controls(1)[k].clone());
    if let Some(k) = &violating {
        report.detail("violating_control", k);
    }
    finish(&mut report, out.verdict, None, &g);
    let rows: Vec<Vec<String>> = std::iter::once(vec!["control".to_string(), "margin".into()])
        .chain(margins.iter().enumerate().map(|(k, m)| vec![g.controls(1)[k].clone(), m.clone()]))
        .collect();
    report.line("arrival margins a1 + d2*a2(k) - b1 - d2*b2(k):");
    report.text.push_str(&table(&rows));
    if let Some(k) = violating {
        report.line(format!("refuting kernel: constant({k})"));
    }
    Ok(report)
}

fn bernoulli(a: &BernoulliArgs) -> Result<Report> {
    let mut vals: [Option<Q>; 5] = Default::default();
    for kv in &a.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected key=value, found {kv:?}")))?;
        let slot = match k.trim() {
            "p" => 0,
            "q" => 1,
            "p'" | "p2" => 2,
            "q'" | "q2" => 3,
            "d2" => 4,
            other => return Err(CliError::Usage(format!("unknown parameter {other:?}; use p, q, p', q', d2"))),
        };
        if vals[slot].is_some() {
            return Err(CliError::Usage(format!("parameter {k} given twice")));
        }
        vals[slot] = Some(parse_q(v)?);
    }
    let names = ["p", "q", "p'", "q'", "d2"];
    let [p, q, p2, q2, d2] = vals;
    let take = |x: Option<Q>, i: usize| x.ok_or_else(|| CliError::Usage(format!("missing parameter {}", names[i])));
    let (p, q, p2, q2, d2) = (take(p, 0)?, take(q, 1)?, take(p2, 2)?, take(q2, 3)?, take(d2, 4)?);
    if d2 < Q::zero() || d2 > Q::one() {
        return Err(CliError::Usage(format!("d2 = {} outside [0, 1]", fmt_q(&d2))));
    }
    let f = BernoulliPair::raw(p, q)?;
    let g = BernoulliPair::raw(p2, q2)?;
    let delta = DiscountFactor::new(vec![Q::one() - &d2, d2])?;

    let mut report = Report::new("bernoulli");
    for (k, v) in [("p", &f.p), ("q", &f.q), ("p'", &g.p), ("q'", &g.q)] {
        report.param(k, fmt_q(v));
    }
    report.param("delta", &delta);
    report.route.push("engine: closed form, cross-checked by convex order and by the garbling LP".into());

    let closed = closed_form_verdict(&f, &g, &delta)?;
    let allow_swap = delta.weight(1).is_zero();
    let (fnorm, _) = normalize(&f, allow_swap, "f")?;
    let (gnorm, _) = normalize(&g, allow_swap, "g")?;
    let pf = bernoulli_posteriors(&fnorm)?;
    let pg = bernoulli_posteriors(&gnorm)?;
    let mps = mixture_mps(&f, &g, &delta)?;
    let lp = blackwell_sufficient(
        &mixture_experiment(&f.experiment(), &delta)?,
        &mixture_experiment(&g.experiment(), &delta)?,
    )?;
    let agree = closed.verdict.status == mps.status && mps.status == lp.status;

    let branch = closed.branch.map_or("none".to_string(), |b| format!("{b:?}"));
    report.detail("posteriors", serde_json::json!({ "f": pf, "g": pg }));
    report.detail("condition_a", closed.condition_a);
    report.detail("branch", &branch);
    report.detail(
        "cross_checks",
        serde_json::json!({ "convex_order": mps.status, "garbling_lp": lp.status, "agree": agree }),
    );
    report.detail("normalization", &closed.normalization);

    finish(&mut report, closed.verdict, None, &f.experiment());
    let rows = vec![
        vec!["".to_string(), "pi1".into(), "pi10".into(), "pi11".into(), "lambda".into()],
        vec!["f".to_string(), fmt_q(&pf.pi1), fmt_q(&pf.pi10), fmt_q(&pf.pi11), fmt_q(&pf.lambda)],
        vec!["g".to_string(), fmt_q(&pg.pi1), fmt_q(&pg.pi10), fmt_q(&pg.pi11), fmt_q(&pg.lambda)],
    ];
    report.line("posteriors of the low state:");
    report.text.push_str(&table(&rows));
    report.line(format!(
        "condition (a) pi1 <= pi1': {}",
        if closed.condition_a { "holds" } else { "fails" }
    ));
    report.line(format!("branch: {branch}"));
    report.line(format!(
        "cross-checks: convex order {}, garbling LP {}, {}",
        status_word(mps.status),
        status_word(lp.status),
        if agree { "all agree" } else { "DISAGREE" }
    ));
    if !agree {
        report.exit_code = CliError::EXIT_CODE;
    }
    Ok(report)
}

fn audit(a: &AuditArgs) -> Result<Report> {
    let (f, df) = experiment("f", &a.f)?;
    let (g, dg) = experiment("g", &a.g)?;
    let d = a.delta.resolve(f.horizon())?;
    let prior = prior_for(&a.prior, f.num_states())?.unwrap_or_else(|| uniform_prior(f.num_states()));
    let mut report = Report::new("audit");
    report.inputs = vec![df, dg];
    report.param("delta", &d);
    report.param("prior", prior.iter().map(fmt_q).collect::<Vec<_>>());
    report.param("count", a.count);
    report.param("seed", a.seed);
    report.param("actions", a.actions);
    report.param("inject_certificate", a.inject_certificate);
    report.route.push("engine: exact optimal values by backward induction".into());

    let mut problems = random_problem_suite(a.seed, a.count, f.num_states(), a.actions, &PayoffGrid::default())?;
    let v = delta_sufficient(&f, &g, &d)?;
    let status = v.status;
    if a.inject_certificate && status == Status::NotSufficient {
        problems.push(verdict_decision_problem(&v, Some(&prior))?);
        report.route.push(format!("certificate problem injected as problem #{}", problems.len() - 1));
    }
    let audit = dominance_audit(&f, &g, &d, &problems, &prior, status)?;
    report.set_verdict(v);
    report.exit_code = if audit.violations > 0 { 1 } else { 0 };
    report.line(format!(
        "audited {} problems: {} violations, {} contradicting the verdict",
        audit.entries.len(),
        audit.violations,
        audit.contradictions
    ));
    for e in audit.entries.iter().filter(|e| e.violation) {
        report.line(format!(
            "  violation at problem #{}: value f = {}, value g = {}",
            e.index,
            fmt_q(&e.value_f),
            fmt_q(&e.value_g)
        ));
    }
    report.detail("audit", &audit);
    Ok(report)
}

fn guess_kind(v: &Value) -> Option<FileKind> {
    let has = |k: &str| v.get(k).is_some();
    if has("kernel") {
        Some(FileKind::Experiment)
    } else if has("joint") || has("independent") || (has("f") && has("g")) {
        Some(FileKind::Coupling)
    } else if has("kernels") {
        Some(FileKind::Kernels)
    } else if has("h") {
        Some(FileKind::Arrival)
    } else {
        None
    }
}

fn validate(a: &ValidateArgs) -> Result<Report> {
    let raw = load::<Value>("file", &a.file)?;
    let kind = match a.kind.or_else(|| guess_kind(&raw.value)) {
        Some(k) => k,
        None => return Err(CliError::Usage("cannot tell the file kind; pass --kind".into())),
    };
    let mut report = Report::new("validate");
    let summary = match kind {
        FileKind::Experiment => {
            let (e, d) = experiment("experiment", &a.file)?;
            report.inputs.push(d);
            format!(
                "experiment: {} states, horizon {}, {} kernel rows, {}",
                e.num_states(),
                e.horizon(),
                e.kernels().len(),
                if e.is_uncontrolled() { "uncontrolled" } else { "controlled" }
            )
        }
        FileKind::Coupling => {
            let (c, d) = load_with::<CouplingFile, _>("coupling", &a.file, CouplingFile::to_coupling)?;
            report.inputs.push(d);
            format!("coupling: {} states, horizon {}, marginals match", c.f().num_states(), c.f().horizon())
        }
        FileKind::Kernels => {
            let against = a
                .against
                .as_deref()
                .ok_or_else(|| CliError::Usage("a kernel family needs --against <target experiment>".into()))?;
            let (g, dg) = experiment("against", against)?;
            let (k, d) = load_with::<KernelFamilyFile, _>("kernels", &a.file, |x| x.to_kernels(&g))?;
            report.inputs.extend([d, dg]);
            format!("kernel family: {} kernels", k.len())
        }
        FileKind::Arrival => {
            let (p, d) = load_with::<ArrivalFile, _>("arrival", &a.file, |x| x.to_params(DiscountFactor::uniform(2).expect("T = 2")))?;
            report.inputs.push(d);
            format!("arrival instance: {} states, {} draws, {} controls", p.h.len(), p.num_signals(), p.num_controls())
        }
    };
    report.line(format!("valid {summary}"));
    report.detail("summary", summary);
    Ok(report)
}
