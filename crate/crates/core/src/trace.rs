//! Timed execution traces and their text forms.
//!
//! A trace is a replayable sequence of configurations: entry 0 is the initial
//! configuration, entry k+1 follows entry k by one tick. Each entry records
//! the fired transitions and the nondeterministic choices taken during the
//! tick that produced it, so a counterexample can be fed back to the
//! simulator and reproduced exactly.
//!
//! Three text forms exist: a line-delimited record format for golden tests
//! (field order `minute|states|vars|fired|choices`), a human-readable table,
//! and a choice script accepted by the simulator.

use std::fmt::Write as _;

use crate::exec::{Choice, Engine, Successor};
use crate::expr::Value;
use crate::model::Configuration;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceChoice {
    Havoc { chart: String, var: String, value: bool },
    Pick { chart: String, index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub minute: u32,
    /// Active state per chart, in rank order.
    pub states: Vec<(String, String)>,
    /// Variable snapshot in declaration order.
    pub vars: Vec<(String, Value)>,
    /// Transitions fired during the tick that produced this entry,
    /// in rank order. Empty for the initial entry.
    pub fired: Vec<(String, String, String)>,
    /// Choices taken during that tick, in occurrence order.
    pub choices: Vec<TraceChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
}

impl Trace {
    /// Resolves a path of successors (initial entry first) into a trace.
    pub fn from_path(engine: &Engine, path: &[Successor]) -> Trace {
        let steps = path
            .iter()
            .map(|succ| trace_step(engine, &succ.config, &succ.fired, &succ.choices))
            .collect();
        Trace { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<&TraceStep> {
        self.steps.last()
    }

    /// Line-delimited records, one per entry.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            out.push_str(&record_line(step));
            out.push('\n');
        }
        out
    }

    /// Human-readable table: active states, fired transitions, and the
    /// variables that changed since the previous entry.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<[String; 4]> = Vec::with_capacity(self.steps.len() + 1);
        rows.push([
            "minute".into(),
            "active".into(),
            "fired".into(),
            "changes".into(),
        ]);
        let mut prev: Option<&TraceStep> = None;
        for step in &self.steps {
            let active = step
                .states
                .iter()
                .map(|(c, s)| format!("{c}.{s}"))
                .collect::<Vec<_>>()
                .join(" ");
            let fired = step
                .fired
                .iter()
                .map(|(c, s, t)| format!("{c}:{s}->{t}"))
                .collect::<Vec<_>>()
                .join(" ");
            let changes = match prev {
                None => step
                    .vars
                    .iter()
                    .map(|(n, v)| format!("{n}={v}"))
                    .collect::<Vec<_>>()
                    .join(" "),
                Some(p) => step
                    .vars
                    .iter()
                    .zip(&p.vars)
                    .filter(|(cur, old)| cur.1 != old.1)
                    .map(|(cur, _)| format!("{}={}", cur.0, cur.1))
                    .collect::<Vec<_>>()
                    .join(" "),
            };
            rows.push([step.minute.to_string(), active, fired, changes]);
            prev = Some(step);
        }
        render_columns(&rows)
    }

    /// Choice script reproducing this trace under the simulator.
    pub fn to_script(&self) -> String {
        let mut out = String::from("# choice script\n");
        for step in &self.steps {
            for choice in &step.choices {
                match choice {
                    TraceChoice::Havoc { var, value, .. } => {
                        let _ = writeln!(out, "choose {var} = {value}");
                    }
                    TraceChoice::Pick { chart, index } => {
                        let _ = writeln!(out, "pick {chart} = {index}");
                    }
                }
            }
        }
        out
    }
}

fn trace_step(
    engine: &Engine,
    config: &Configuration,
    fired: &[crate::exec::Fired],
    choices: &[Choice],
) -> TraceStep {
    let model = engine.model();
    let states = model
        .rank_order()
        .into_iter()
        .map(|ci| {
            (
                model.charts[ci].name.clone(),
                engine.state_name(ci, config.active[ci]).to_string(),
            )
        })
        .collect();
    let vars = model
        .variables
        .iter()
        .zip(&config.vars)
        .map(|(decl, value)| (decl.name.clone(), *value))
        .collect();
    let fired = fired
        .iter()
        .map(|f| {
            let t = &model.charts[f.chart].transitions[f.transition];
            (
                model.charts[f.chart].name.clone(),
                t.source.clone(),
                t.target.clone(),
            )
        })
        .collect();
    let choices = choices
        .iter()
        .map(|c| match c {
            Choice::Havoc { chart, var, value } => TraceChoice::Havoc {
                chart: model.charts[*chart].name.clone(),
                var: model.variables[*var].name.clone(),
                value: *value,
            },
            Choice::Pick { chart, index } => TraceChoice::Pick {
                chart: model.charts[*chart].name.clone(),
                index: *index,
            },
        })
        .collect();
    TraceStep {
        minute: config.minute,
        states,
        vars,
        fired,
        choices,
    }
}

fn record_line(step: &TraceStep) -> String {
    let states = step
        .states
        .iter()
        .map(|(c, s)| format!("{c}:{s}"))
        .collect::<Vec<_>>()
        .join(",");
    let vars = step
        .vars
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(",");
    let fired = step
        .fired
        .iter()
        .map(|(c, s, t)| format!("{c}:{s}->{t}"))
        .collect::<Vec<_>>()
        .join(",");
    let choices = step
        .choices
        .iter()
        .map(|c| match c {
            TraceChoice::Havoc { chart, var, value } => format!("choose:{chart}.{var}={value}"),
            TraceChoice::Pick { chart, index } => format!("pick:{chart}={index}"),
        })
        .collect::<Vec<_>>()
        .join(",");
    format!(
        "minute={}|states={}|vars={}|fired={}|choices={}",
        step.minute, states, vars, fired, choices
    )
}

fn render_columns(rows: &[[String; 4]]) -> String {
    let mut widths = [0usize; 4];
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        for (i, (cell, width)) in row.iter().zip(widths).enumerate() {
            if i + 1 == row.len() {
                out.push_str(cell);
            } else {
                let _ = write!(out, "{cell:<width$}  ");
            }
        }
        // keep single-column rows tidy
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    }
    out
}
