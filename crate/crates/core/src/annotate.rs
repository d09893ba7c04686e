//! Resource-demand annotation of guideline charts.
//!
//! Every state or transition that raises a procedure present in the demand
//! map receives one `//@RES: (p1, d1), (p2, d2), ...` annotation listing the
//! matched procedures in raise order. Annotations are comments: execution is
//! unaffected, and re-annotating replaces previous `//@RES:` lines instead of
//! duplicating them.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::demand::{format_demand, parse_demand, Demand, DemandMap};
use crate::model::{Action, Statechart};

/// Event names raised anywhere in the chart (state entries and transition
/// actions).
pub fn collect_procedures(chart: &Statechart) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut scan = |actions: &[Action]| {
        for action in actions {
            if let Action::Raise { event } = action {
                out.insert(event.clone());
            }
        }
    };
    for state in &chart.states {
        scan(&state.entry);
    }
    for t in &chart.transitions {
        scan(&t.actions);
    }
    out
}

fn raised_in_order(actions: &[Action]) -> Vec<&str> {
    let mut out = Vec::new();
    for action in actions {
        if let Action::Raise { event } = action {
            if !out.contains(&event.as_str()) {
                out.push(event.as_str());
            }
        }
    }
    out
}

fn payload_for(actions: &[Action], dmap: &DemandMap) -> Option<String> {
    let matched: Vec<(&str, &Demand)> = raised_in_order(actions)
        .into_iter()
        .filter_map(|event| dmap.get(event).map(|d| (event, d)))
        .collect();
    if matched.is_empty() {
        return None;
    }
    Some(
        matched
            .iter()
            .map(|(p, d)| format!("({p}, {})", format_demand(d)))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

/// Applies the annotation pass, returning a fresh chart. Elements raising no
/// mapped procedure are left untouched; existing `//@RES:` annotations are
/// replaced, so the pass is idempotent.
pub fn annotate(chart: &Statechart, dmap: &DemandMap) -> Statechart {
    let mut out = chart.clone();
    for state in &mut out.states {
        state.annotations = payload_for(&state.entry, dmap).into_iter().collect();
    }
    for t in &mut out.transitions {
        t.annotations = payload_for(&t.actions, dmap).into_iter().collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotationError {
    #[error("malformed annotation payload `{payload}`: {reason}")]
    Malformed { payload: String, reason: String },
}

/// Parses an annotation payload `(p1, d1), (p2, d2), ...` back into
/// procedure/demand pairs.
pub fn parse_annotation(payload: &str) -> Result<Vec<(String, Demand)>, AnnotationError> {
    let malformed = |reason: &str| AnnotationError::Malformed {
        payload: payload.to_string(),
        reason: reason.to_string(),
    };
    let mut entries = Vec::new();
    let mut rest = payload.trim();
    while !rest.is_empty() {
        if !rest.starts_with('(') {
            return Err(malformed("expected `(procedure, demand)`"));
        }
        // find the matching close paren; demands contain `SEQ(t)` parens
        let mut depth = 0usize;
        let mut close = None;
        for (i, c) in rest.char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let close = close.ok_or_else(|| malformed("unbalanced parentheses"))?;
        let inner = &rest[1..close];
        let (name, demand_text) = inner
            .split_once(',')
            .ok_or_else(|| malformed("expected `procedure, demand`"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(malformed("empty procedure name"));
        }
        let demand = parse_demand(demand_text)
            .map_err(|e| malformed(&format!("bad demand for `{name}`: {e}")))?;
        entries.push((name.to_string(), demand));
        rest = rest[close + 1..].trim_start();
        if let Some(tail) = rest.strip_prefix(',') {
            rest = tail.trim_start();
        } else if !rest.is_empty() {
            return Err(malformed("expected `,` between entries"));
        }
    }
    if entries.is_empty() {
        return Err(malformed("no entries"));
    }
    Ok(entries)
}
