//! On-disk formats for experiments, couplings, test-kernel families and
//! arrival instances.
//!
//! Every file is a JSON object with `"format_version": 1`. Labels are plain
//! strings and probabilities are strings holding exact rationals: `"3/4"`,
//! `"2"`, or a finite decimal such as `"0.375"` (read exactly). Conversions
//! into the data model report every problem found, each located by a field
//! path like `kernel[3].probs`.

use std::collections::BTreeMap;

use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use sufficiency_core::controlled::{ArrivalParams, KernelRow, KernelView, Path, TestKernel};
use sufficiency_core::model::{histories, validate_experiment, DiscountFactor, Experiment, KernelKey};
use sufficiency_core::rational::{fmt_q, serde_q, sum, Q};
use sufficiency_core::sufficiency::Coupling;

use crate::error::Diagnostic;

pub const FORMAT_VERSION: u32 = 1;

/// Control label used when a file omits `controls`.
pub const NO_CONTROL: &str = "-";

type Diagnosed<T> = std::result::Result<T, Vec<Diagnostic>>;

/// An exact rational stored as a string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rat(#[serde(with = "serde_q")] pub Q);

fn rats(xs: &[Q]) -> Vec<Rat> {
    xs.iter().cloned().map(Rat).collect()
}

fn values(xs: &[Rat]) -> Vec<Q> {
    xs.iter().map(|r| r.0.clone()).collect()
}

fn check_version(v: u32, field: &str, out: &mut Vec<Diagnostic>) {
    if v != FORMAT_VERSION {
        out.push(Diagnostic::new(
            field,
            format!("unsupported format_version {v}; this tool reads version {FORMAT_VERSION}"),
        ));
    }
}

fn lookup(alphabet: &[String], label: &str, field: String, what: &str, out: &mut Vec<Diagnostic>) -> Option<usize> {
    let found = alphabet.iter().position(|a| a == label);
    if found.is_none() {
        out.push(Diagnostic::new(
            field,
            format!("unknown {what} {label:?}; expected one of [{}]", alphabet.join(", ")),
        ));
    }
    found
}

fn lookup_all(alphabets: &[Vec<String>], labels: &[String], field: &str, what: &str, out: &mut Vec<Diagnostic>) -> Option<Vec<usize>> {
    let mut idx = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        idx.push(lookup(&alphabets[i], label, format!("{field}[{i}]"), what, out)?);
    }
    Some(idx)
}

fn check_row(row: &[Q], width: usize, field: String, out: &mut Vec<Diagnostic>) {
    if row.len() != width {
        out.push(Diagnostic::new(field, format!("row has {} entries, expected {width}", row.len())));
    } else if row.iter().any(Signed::is_negative) {
        out.push(Diagnostic::new(field, "negative probability"));
    } else if !sum(row).is_one() {
        out.push(Diagnostic::new(field, format!("row sums to {}, expected 1", fmt_q(&sum(row)))));
    }
}

// ---------------------------------------------------------------------------
// Experiments

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub format_version: u32,
    pub states: Vec<String>,
    pub horizon: usize,
    /// `signals[t-1]` is the period-`t` alphabet.
    pub signals: Vec<Vec<String>>,
    /// Per-period control alphabets. Omitted for uncontrolled experiments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controls: Option<Vec<Vec<String>>>,
    pub kernel: Vec<KernelEntry>,
}

/// `f_t(· | state, signals, controls)`, where `signals` and `controls` are
/// the histories before period `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelEntry {
    pub period: usize,
    pub state: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub controls: Vec<String>,
    pub probs: Vec<Rat>,
}

impl ExperimentFile {
    pub fn from_experiment(e: &Experiment) -> Self {
        let implicit = e.control_alphabets().iter().all(|k| k.len() == 1 && k[0] == NO_CONTROL);
        let kernel = e
            .kernels()
            .iter()
            .map(|(key, row)| KernelEntry {
                period: key.period,
                state: e.states()[key.state].clone(),
                signals: key.signals.iter().enumerate().map(|(i, x)| e.signals(i + 1)[*x].clone()).collect(),
                controls: if implicit {
                    Vec::new()
                } else {
                    key.controls.iter().enumerate().map(|(i, k)| e.controls(i + 1)[*k].clone()).collect()
                },
                probs: rats(row),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            states: e.states().to_vec(),
            horizon: e.horizon(),
            signals: e.signal_alphabets().to_vec(),
            controls: (!implicit).then(|| e.control_alphabets().to_vec()),
            kernel,
        }
    }

    /// Convert and validate. `prefix` is prepended to field paths.
    pub fn to_experiment(&self, prefix: &str) -> Diagnosed<Experiment> {
        let field = |s: &str| format!("{prefix}{s}");
        let mut out = Vec::new();
        check_version(self.format_version, &field("format_version"), &mut out);
        if self.horizon == 0 {
            out.push(Diagnostic::new(field("horizon"), "horizon must be at least 1"));
        }
        if self.signals.len() != self.horizon {
            out.push(Diagnostic::new(
                field("signals"),
                format!("{} alphabets for horizon {}", self.signals.len(), self.horizon),
            ));
        }
        let implicit = self.controls.is_none();
        let controls = self
            .controls
            .clone()
            .unwrap_or_else(|| vec![vec![NO_CONTROL.to_string()]; self.horizon]);
        if controls.len() != self.horizon {
            out.push(Diagnostic::new(
                field("controls"),
                format!("{} alphabets for horizon {}", controls.len(), self.horizon),
            ));
        }
        if !out.is_empty() {
            return Err(out);
        }

        let mut kernels = BTreeMap::new();
        for (i, entry) in self.kernel.iter().enumerate() {
            let at = |s: &str| field(&format!("kernel[{i}]{s}"));
            let t = entry.period;
            if t == 0 || t > self.horizon {
                out.push(Diagnostic::new(at(".period"), format!("period {t} outside 1..={}", self.horizon)));
                continue;
            }
            let state = lookup(&self.states, &entry.state, at(".state"), "state", &mut out);
            if entry.signals.len() != t - 1 {
                out.push(Diagnostic::new(
                    at(".signals"),
                    format!("period {t} needs a history of {} signals, found {}", t - 1, entry.signals.len()),
                ));
                continue;
            }
            let xs = lookup_all(&self.signals, &entry.signals, &at(".signals"), "signal", &mut out);
            let ks = if implicit && entry.controls.is_empty() {
                Some(vec![0; t - 1])
            } else if entry.controls.len() != t - 1 {
                out.push(Diagnostic::new(
                    at(".controls"),
                    format!("period {t} needs a history of {} controls, found {}", t - 1, entry.controls.len()),
                ));
                continue;
            } else {
                lookup_all(&controls, &entry.controls, &at(".controls"), "control", &mut out)
            };
            let probs = values(&entry.probs);
            check_row(&probs, self.signals[t - 1].len(), at(".probs"), &mut out);
            let (Some(state), Some(signals), Some(controls)) = (state, xs, ks) else {
                continue;
            };
            let key = KernelKey {
                period: t,
                state,
                signals,
                controls,
            };
            if kernels.insert(key, probs).is_some() {
                out.push(Diagnostic::new(at(""), "duplicate entry for this period, state and history"));
            }
        }
        if !out.is_empty() {
            return Err(out);
        }
        let e = Experiment::from_parts(self.states.clone(), self.signals.clone(), controls, kernels);
        let violations = validate_experiment(&e);
        if violations.is_empty() {
            Ok(e)
        } else {
            Err(violations
                .into_iter()
                .map(|v| Diagnostic::new(field("kernel"), v.to_string()))
                .collect())
        }
    }
}

// ---------------------------------------------------------------------------
// Couplings

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFile {
    pub format_version: u32,
    pub f: ExperimentFile,
    pub g: ExperimentFile,
    /// Draw the two processes independently given the state; `joint` must
    /// then be empty.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub independent: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint: Vec<JointEntry>,
}

/// `h_t(x_t, y_t | state, f history, g history)`. Entry `x·|Y_t| + y` of
/// `probs` is the probability of the pair `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointEntry {
    pub period: usize,
    pub state: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub f_signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub g_signals: Vec<String>,
    pub probs: Vec<Rat>,
}

type JointKey = (usize, usize, Vec<usize>, Vec<usize>);

impl CouplingFile {
    pub fn from_coupling(c: &Coupling) -> Self {
        let (f, g) = (c.f(), c.g());
        let mut joint = Vec::new();
        for t in 1..=f.horizon() {
            for th in 0..f.num_states() {
                for xs in histories(&f.signal_sizes(t - 1)) {
                    for ys in histories(&g.signal_sizes(t - 1)) {
                        let row = c.kernel(t, th, &xs, &ys).expect("coupling rows are complete");
                        joint.push(JointEntry {
                            period: t,
                            state: f.states()[th].clone(),
                            f_signals: xs.iter().enumerate().map(|(i, x)| f.signals(i + 1)[*x].clone()).collect(),
                            g_signals: ys.iter().enumerate().map(|(i, y)| g.signals(i + 1)[*y].clone()).collect(),
                            probs: rats(row),
                        });
                    }
                }
            }
        }
        Self {
            format_version: FORMAT_VERSION,
            f: ExperimentFile::from_experiment(f),
            g: ExperimentFile::from_experiment(g),
            independent: false,
            joint,
        }
    }

    pub fn to_coupling(&self) -> Diagnosed<Coupling> {
        let mut out = Vec::new();
        check_version(self.format_version, "format_version", &mut out);
        let f = self.f.to_experiment("f.");
        let g = self.g.to_experiment("g.");
        let (f, g) = match (f, g) {
            (Ok(f), Ok(g)) if out.is_empty() => (f, g),
            (f, g) => {
                out.extend(f.err().unwrap_or_default());
                out.extend(g.err().unwrap_or_default());
                return Err(out);
            }
        };
        if f.states() != g.states() || f.horizon() != g.horizon() {
            return Err(vec![Diagnostic::new("g", "f and g must share states and horizon")]);
        }
        if self.independent {
            if !self.joint.is_empty() {
                return Err(vec![Diagnostic::new("joint", "must be empty when independent is true")]);
            }
            return Coupling::independent(f, g).map_err(|e| vec![Diagnostic::new("independent", e.to_string())]);
        }

        let mut table: BTreeMap<JointKey, Vec<Q>> = BTreeMap::new();
        for (i, entry) in self.joint.iter().enumerate() {
            let at = |s: &str| format!("joint[{i}]{s}");
            let t = entry.period;
            if t == 0 || t > f.horizon() {
                out.push(Diagnostic::new(at(".period"), format!("period {t} outside 1..={}", f.horizon())));
                continue;
            }
            let th = lookup(f.states(), &entry.state, at(".state"), "state", &mut out);
            let mut lengths_ok = true;
            for (name, hist) in [("f_signals", &entry.f_signals), ("g_signals", &entry.g_signals)] {
                if hist.len() != t - 1 {
                    out.push(Diagnostic::new(
                        at(&format!(".{name}")),
                        format!("period {t} needs a history of {} signals, found {}", t - 1, hist.len()),
                    ));
                    lengths_ok = false;
                }
            }
            if !lengths_ok {
                continue;
            }
            let xs = lookup_all(f.signal_alphabets(), &entry.f_signals, &at(".f_signals"), "f signal", &mut out);
            let ys = lookup_all(g.signal_alphabets(), &entry.g_signals, &at(".g_signals"), "g signal", &mut out);
            let probs = values(&entry.probs);
            check_row(&probs, f.signals(t).len() * g.signals(t).len(), at(".probs"), &mut out);
            if let (Some(th), Some(xs), Some(ys)) = (th, xs, ys) {
                if table.insert((t, th, xs, ys), probs).is_some() {
                    out.push(Diagnostic::new(at(""), "duplicate entry for this period, state and histories"));
                }
            }
        }
        for t in 1..=f.horizon() {
            for th in 0..f.num_states() {
                for xs in histories(&f.signal_sizes(t - 1)) {
                    for ys in histories(&g.signal_sizes(t - 1)) {
                        if !table.contains_key(&(t, th, xs.clone(), ys.clone())) {
                            out.push(Diagnostic::new(
                                "joint",
                                format!(
                                    "missing entry for period {t}, state {}, histories [{}] / [{}]",
                                    f.states()[th],
                                    f.history_label(&xs),
                                    g.history_label(&ys)
                                ),
                            ));
                        }
                    }
                }
            }
        }
        if !out.is_empty() {
            return Err(out);
        }
        Coupling::from_fn(f, g, |t, th, xs, ys| table[&(t, th, xs.to_vec(), ys.to_vec())].clone())
            .map_err(|e| vec![Diagnostic::new("joint", e.to_string())])
    }
}

// ---------------------------------------------------------------------------
// Test-kernel families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewName {
    Prefix,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFamilyFile {
    pub format_version: u32,
    pub kernels: Vec<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub label: String,
    pub view: ViewName,
    pub rows: Vec<KernelRowEntry>,
}

/// `ξ_t(· | simulated path, realised controls)`. The simulated path lists
/// its signals and the controls between them; `realized` lists the controls
/// actually played before period `period`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelRowEntry {
    pub period: usize,
    pub simulated_signals: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub simulated_controls: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realized: Vec<String>,
    pub probs: Vec<Rat>,
}

impl KernelFamilyFile {
    pub fn from_kernels(kernels: &[TestKernel], g: &Experiment) -> Self {
        let label = |alpha: &[Vec<String>], xs: &[usize]| -> Vec<String> {
            xs.iter().enumerate().map(|(i, x)| alpha[i][*x].clone()).collect()
        };
        let specs = kernels
            .iter()
            .map(|k| KernelSpec {
                label: k.label.clone(),
                view: match k.view {
                    KernelView::Prefix => ViewName::Prefix,
                    KernelView::Full => ViewName::Full,
                },
                rows: k
                    .rows
                    .iter()
                    .enumerate()
                    .flat_map(|(i, period)| {
                        period.iter().map(move |r| KernelRowEntry {
                            period: i + 1,
                            simulated_signals: label(g.signal_alphabets(), &r.simulated.signals),
                            simulated_controls: label(g.control_alphabets(), &r.simulated.controls),
                            realized: label(g.control_alphabets(), &r.realized),
                            probs: rats(&r.dist),
                        })
                    })
                    .collect(),
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            kernels: specs,
        }
    }

    /// Convert against the target experiment `g`, whose alphabets the rows use.
    pub fn to_kernels(&self, g: &Experiment) -> Diagnosed<Vec<TestKernel>> {
        let mut out = Vec::new();
        check_version(self.format_version, "format_version", &mut out);
        let last = g.horizon().saturating_sub(1);
        let mut result = Vec::new();
        for (i, spec) in self.kernels.iter().enumerate() {
            let mut rows: Vec<Vec<KernelRow>> = vec![Vec::new(); last];
            let before = out.len();
            for (j, r) in spec.rows.iter().enumerate() {
                let at = |s: &str| format!("kernels[{i}].rows[{j}]{s}");
                let t = r.period;
                if t == 0 || t > last {
                    out.push(Diagnostic::new(at(".period"), format!("period {t} outside 1..={last}")));
                    continue;
                }
                let n = r.simulated_signals.len();
                if n == 0 || n > g.horizon() {
                    out.push(Diagnostic::new(
                        at(".simulated_signals"),
                        format!("a simulated path has 1..={} signals, found {n}", g.horizon()),
                    ));
                    continue;
                }
                if r.simulated_controls.len() != n - 1 {
                    out.push(Diagnostic::new(
                        at(".simulated_controls"),
                        format!("{n} simulated signals need {} controls, found {}", n - 1, r.simulated_controls.len()),
                    ));
                    continue;
                }
                if r.realized.len() != t - 1 {
                    out.push(Diagnostic::new(
                        at(".realized"),
                        format!("period {t} needs {} realised controls, found {}", t - 1, r.realized.len()),
                    ));
                    continue;
                }
                let sig = lookup_all(g.signal_alphabets(), &r.simulated_signals, &at(".simulated_signals"), "signal", &mut out);
                let sim_k = lookup_all(g.control_alphabets(), &r.simulated_controls, &at(".simulated_controls"), "control", &mut out);
                let real = lookup_all(g.control_alphabets(), &r.realized, &at(".realized"), "control", &mut out);
                let dist = values(&r.probs);
                check_row(&dist, g.controls(t).len(), at(".probs"), &mut out);
                if let (Some(sig), Some(sim_k), Some(real)) = (sig, sim_k, real) {
                    rows[t - 1].push(KernelRow {
                        simulated: Path::new(sig, sim_k),
                        realized: real,
                        dist,
                    });
                }
            }
            if out.len() > before {
                continue;
            }
            for period in &mut rows {
                period.sort_by(|a, b| (&a.simulated, &a.realized).cmp(&(&b.simulated, &b.realized)));
                if period.windows(2).any(|w| (&w[0].simulated, &w[0].realized) == (&w[1].simulated, &w[1].realized)) {
                    out.push(Diagnostic::new(format!("kernels[{i}].rows"), "duplicate row"));
                }
            }
            let kernel = TestKernel {
                label: spec.label.clone(),
                view: match spec.view {
                    ViewName::Prefix => KernelView::Prefix,
                    ViewName::Full => KernelView::Full,
                },
                rows,
            };
            match kernel.check(g) {
                Ok(()) => result.push(kernel),
                Err(e) => out.push(Diagnostic::new(format!("kernels[{i}]"), e.to_string())),
            }
        }
        if out.is_empty() {
            Ok(result)
        } else {
            Err(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Arrival instances

/// Parameters of a two-period arrival pair. The discount factor comes from
/// the command line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalFile {
    pub format_version: u32,
    /// `h[state][z]`.
    pub h: Vec<Vec<Rat>>,
    pub alpha1: Rat,
    pub beta1: Rat,
    pub alpha2: Vec<Rat>,
    pub beta2: Vec<Rat>,
}

impl ArrivalFile {
    pub fn from_params(a: &ArrivalParams) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            h: a.h.iter().map(|r| rats(r)).collect(),
            alpha1: Rat(a.alpha1.clone()),
            beta1: Rat(a.beta1.clone()),
            alpha2: rats(&a.alpha2),
            beta2: rats(&a.beta2),
        }
    }

    pub fn to_params(&self, delta: DiscountFactor) -> Diagnosed<ArrivalParams> {
        let mut out = Vec::new();
        check_version(self.format_version, "format_version", &mut out);
        if !out.is_empty() {
            return Err(out);
        }
        let a = ArrivalParams {
            h: self.h.iter().map(|r| values(r)).collect(),
            alpha1: self.alpha1.0.clone(),
            beta1: self.beta1.0.clone(),
            alpha2: values(&self.alpha2),
            beta2: values(&self.beta2),
            delta,
        };
        a.check().map_err(|e| vec![Diagnostic::new("", e.to_string())])?;
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sufficiency_core::fixtures;

    #[test]
    fn decimals_are_read_exactly() {
        let r: Rat = serde_json::from_str("\"0.375\"").unwrap();
        assert_eq!(fmt_q(&r.0), "3/8");
        assert!(serde_json::from_str::<Rat>("\"1/0\"").is_err());
    }

    #[test]
    fn uncontrolled_experiments_omit_controls() {
        let file = ExperimentFile::from_experiment(&fixtures::delayed_revelation());
        assert!(file.controls.is_none());
        assert!(file.kernel.iter().all(|k| k.controls.is_empty()));
        assert_eq!(file.to_experiment("").unwrap(), fixtures::delayed_revelation());
    }

    #[test]
    fn every_problem_is_reported_with_its_field() {
        let mut file = ExperimentFile::from_experiment(&fixtures::delayed_revelation());
        file.kernel[0].state = "nowhere".into();
        file.kernel[2].probs[0] = Rat(Q::from_integer(2.into()));
        let diags = file.to_experiment("").unwrap_err();
        assert_eq!(diags.len(), 2);
        assert_eq!(diags[0].field, "kernel[0].state");
        assert_eq!(diags[1].field, "kernel[2].probs");
        assert!(diags[1].message.contains("sums to"));
    }

    #[test]
    fn missing_rows_come_from_the_model_validator() {
        let mut file = ExperimentFile::from_experiment(&fixtures::delayed_revelation());
        file.kernel.pop();
        let diags = file.to_experiment("").unwrap_err();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("missing entry"));
    }

    #[test]
    fn independent_flag_rejects_joint_rows() {
        let mut file = CouplingFile::from_coupling(&fixtures::correlated_repeaters().unwrap());
        file.independent = true;
        assert_eq!(file.to_coupling().unwrap_err()[0].field, "joint");
    }
}
