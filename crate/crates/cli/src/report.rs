//! Report assembly and text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use sufficiency_core::controlled::GarblingProfile;
use sufficiency_core::model::{Experiment, Garbling};
use sufficiency_core::oracle::DecisionProblem;
use sufficiency_core::rational::{fmt_q, Q};
use sufficiency_core::verdict::{Certificate, CertificateKind, ComparisonVerdict, Status, Witness};

use crate::input::InputDigest;
use crate::schema::FORMAT_VERSION;

/// The structured output of one command: a single self-contained document.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub format_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub library_version: &'static str,
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: BTreeMap<String, Value>,
    /// Which engine decided and any notes it left.
    pub route: Vec<String>,
    pub status: Option<Status>,
    pub exit_code: i32,
    pub verdict: Option<ComparisonVerdict>,
    pub decision_problem: Option<DecisionProblem>,
    pub details: BTreeMap<String, Value>,
    #[serde(skip)]
    pub text: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            library_version: sufficiency_core::VERSION,
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            route: Vec::new(),
            status: None,
            exit_code: 0,
            verdict: None,
            decision_problem: None,
            details: BTreeMap::new(),
            text: String::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), to_value(value));
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), to_value(value));
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    /// Record a verdict: status, exit code, route notes and the text summary.
    pub fn set_verdict(&mut self, v: ComparisonVerdict) {
        self.status = Some(v.status);
        self.exit_code = v.status.exit_code();
        self.route.extend(v.notes.iter().cloned());
        self.line(format!("verdict: {}", status_word(v.status)));
        for n in &v.notes {
            self.line(format!("  note: {n}"));
        }
        self.verdict = Some(v);
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("report fields serialize")
}

pub fn status_word(s: Status) -> &'static str {
    match s {
        Status::Sufficient => "Sufficient",
        Status::NotSufficient => "NotSufficient",
        Status::Inconclusive => "Inconclusive",
    }
}

pub fn q_list(xs: &[Q]) -> String {
    xs.iter().map(fmt_q).collect::<Vec<_>>().join(", ")
}

pub fn garbling_table(g: &Garbling) -> String {
    let mut rows = vec![std::iter::once(String::new()).chain(g.to.iter().cloned()).collect::<Vec<_>>()];
    for (label, row) in g.from.iter().zip(&g.matrix) {
        rows.push(std::iter::once(label.clone()).chain(row.iter().map(fmt_q)).collect());
    }
    table(&rows)
}

pub fn payoff_table(dp: &DecisionProblem, states: &[String]) -> String {
    let header: Vec<String> = std::iter::once("action".to_string())
        .chain((0..dp.num_states()).map(|i| states.get(i).cloned().unwrap_or_else(|| format!("state {i}"))))
        .collect();
    let mut rows = vec![header];
    for (a, row) in dp.actions.iter().zip(&dp.payoff) {
        rows.push(std::iter::once(a.clone()).chain(row.iter().map(fmt_q)).collect());
    }
    table(&rows)
}

/// Left-aligned columns separated by two spaces, indented by two.
pub fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{s:<w$}", w = width[c])).collect();
        let _ = writeln!(out, "  {}", cells.join("  ").trim_end());
    }
    out
}

/// Human-readable witness. Kernel profiles beyond the first are summarised;
/// the structured report carries all of them.
pub fn render_witness(w: &Witness, g: Option<&Experiment>) -> String {
    let mut out = String::new();
    let family = |out: &mut String, name: &str, gs: &[Garbling]| {
        for (i, gm) in gs.iter().enumerate() {
            let _ = writeln!(out, "{name} {}:", i + 1);
            out.push_str(&garbling_table(gm));
        }
    };
    match w {
        Witness::Static(gm) => {
            out.push_str("witness garbling:\n");
            out.push_str(&garbling_table(gm));
        }
        Witness::Family(gs) => family(&mut out, "witness garbling from source period", gs),
        Witness::PerPeriod(gs) => family(&mut out, "witness garbling for period", gs),
        Witness::Adapted { kernels, .. } => family(&mut out, "adapted garbling kernel for period", kernels),
        Witness::ConvexOrder { breakpoints } => {
            let _ = writeln!(out, "witness: convex order holds at breakpoints [{}]", q_list(breakpoints));
        }
        Witness::Condition(c) => {
            let _ = writeln!(out, "witness: {c}");
        }
        Witness::Controlled { family, profiles } => {
            let _ = writeln!(out, "witness: {} garbling profiles over {family}", profiles.len());
            if let (Some((label, profile)), Some(g)) = (profiles.first(), g) {
                let _ = writeln!(out, "profile for kernel {label}:");
                out.push_str(&render_profile(profile, g));
                if profiles.len() > 1 {
                    let _ = writeln!(out, "  ({} more in the structured report)", profiles.len() - 1);
                }
            }
        }
    }
    out
}

fn render_profile(p: &GarblingProfile, g: &Experiment) -> String {
    let mut rows = Vec::new();
    for r in &p.rows {
        let targets = r
            .entries
            .iter()
            .map(|(j, w)| format!("{} ({})", p.targets[*j].label(g), fmt_q(&w.0)))
            .collect::<Vec<_>>()
            .join(", ");
        rows.push(vec![r.source.label(g), "->".to_string(), targets]);
    }
    table(&rows)
}

pub fn render_certificate(c: &Certificate) -> String {
    let mut out = String::new();
    match &c.kind {
        CertificateKind::Farkas { source, target, dual } => {
            let _ = writeln!(
                out,
                "certificate: Farkas vector over {} source and {} target outcomes",
                source.outcomes.len(),
                target.outcomes.len()
            );
            let _ = writeln!(out, "  dual: [{}]", q_list(dual));
        }
        CertificateKind::Breakpoint {
            point,
            source_value,
            target_value,
        } => {
            let _ = writeln!(
                out,
                "certificate: integrated CDF at {} is {} for the source, {} for the target",
                fmt_q(point),
                fmt_q(source_value),
                fmt_q(target_value)
            );
        }
        CertificateKind::Dual { system, dual, .. } => {
            let _ = writeln!(out, "certificate: Farkas vector for {system}");
            let _ = writeln!(out, "  dual: [{}]", q_list(dual));
        }
    }
    if let Some(t) = c.period {
        let _ = writeln!(out, "failing period: t={t}");
    }
    if let Some(d) = &c.delta {
        let _ = writeln!(out, "at discount factor: [{}]", q_list(d.weights()));
    }
    out
}
