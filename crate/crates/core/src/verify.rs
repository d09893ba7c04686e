//! Bounded explicit-state verification of invariant properties.
//!
//! A property `A[] Chart.State imply <cond>` is violated when some reachable
//! configuration has `State` active in `Chart` while `cond` is false. The
//! checker explores the step relation breadth-first from the initial
//! configurations, deduplicating on the full configuration (active states,
//! variable snapshot, minute), out to a minute horizon. Schedules are finite,
//! so a horizon bound is the natural verification window; verdicts report the
//! horizon they were established under.
//!
//! Exploration order is deterministic (rank order, declaration order, havoc
//! false before true), so counterexamples are minimal-length and output is
//! bit-identical across runs and worker counts.

use indexmap::IndexSet;
use rayon::prelude::*;
use thiserror::Error;

use crate::exec::{Engine, ExecError, Successor};
use crate::expr::{eval_bool, type_of, Expr, Scope, Ty, Value};
use crate::model::{Configuration, SystemModel};
use crate::sysfile::{parse_expr_tokens, Lexer, ParseError, Tok};
use crate::trace::Trace;

/// Safety invariant scoped to one state of one chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub chart: String,
    pub state: String,
    pub condition: Expr,
}

/// Parses `[name:] A[] Chart.State imply <expr>`.
pub fn parse_property(text: &str) -> Result<Property, ParseError> {
    let mut lexer = Lexer::new(text);
    let property = parse_property_tokens(&mut lexer, 1)?;
    match lexer.next()? {
        (_, Tok::Eof) | (_, Tok::Newline) => Ok(property),
        (line, tok) => Err(ParseError {
            line,
            message: format!("trailing input after property: {tok}"),
        }),
    }
}

fn parse_property_tokens(lexer: &mut Lexer, index: usize) -> Result<Property, ParseError> {
    let syntax = |line: usize, msg: String| ParseError { line, message: msg };

    let (line, tok) = lexer.next()?;
    let (name, tok) = match (tok, lexer.peek()?) {
        (Tok::Ident(name), Tok::Colon) if name != "A" => {
            lexer.next()?;
            let t = lexer.next()?.1;
            (name, t)
        }
        (tok, _) => (format!("P{index}"), tok),
    };
    match tok {
        Tok::Ident(a) if a == "A" => {}
        other => return Err(syntax(line, format!("expected `A[]`, found {other}"))),
    }
    let (line, tok) = lexer.next()?;
    if tok != Tok::LBracket {
        return Err(syntax(line, format!("expected `A[]`, found {tok}")));
    }
    let (line, tok) = lexer.next()?;
    if tok != Tok::RBracket {
        return Err(syntax(line, format!("expected `A[]`, found {tok}")));
    }
    let (line, tok) = lexer.next()?;
    let scope = match tok {
        Tok::Ident(s) => s,
        other => {
            return Err(syntax(
                line,
                format!("expected `Chart.State` scope, found {other}"),
            ))
        }
    };
    let (chart, state) = scope.split_once('.').ok_or_else(|| {
        syntax(line, format!("scope `{scope}` must be written `Chart.State`"))
    })?;
    let (line, tok) = lexer.next()?;
    if tok != Tok::Keyword("imply") {
        return Err(syntax(line, format!("expected `imply`, found {tok}")));
    }
    let condition = parse_expr_tokens(lexer)?;
    Ok(Property {
        name,
        chart: chart.to_string(),
        state: state.to_string(),
        condition,
    })
}

/// Parses a property file: one property per line, `#` comments, optional
/// `name:` prefixes (unnamed properties get `P<position>`).
pub fn parse_property_file(text: &str) -> Result<Vec<Property>, ParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut lexer = Lexer::new(line);
        let property =
            parse_property_tokens(&mut lexer, out.len() + 1).map_err(|e| ParseError {
                line: line_no,
                message: e.message,
            })?;
        match lexer.next()? {
            (_, Tok::Eof) | (_, Tok::Newline) => {}
            (_, tok) => {
                return Err(ParseError {
                    line: line_no,
                    message: format!("trailing input after property: {tok}"),
                })
            }
        }
        if out.iter().any(|p: &Property| p.name == property.name) {
            return Err(ParseError {
                line: line_no,
                message: format!("duplicate property name `{}`", property.name),
            });
        }
        out.push(property);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    /// Exploration stopped at the state budget before a verdict was reached.
    ResourceLimit,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Verdict::Holds => write!(f, "holds"),
            Verdict::Violated => write!(f, "violated"),
            Verdict::ResourceLimit => write!(f, "resource-limit"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerificationResult {
    pub property: String,
    pub verdict: Verdict,
    pub states_explored: usize,
    pub horizon: u32,
    /// Present iff `verdict == Violated`; a minimal-length replayable trace
    /// whose final entry activates the scope state with the condition false.
    pub counterexample: Option<Trace>,
}

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("property `{property}`: unknown chart `{chart}`")]
    UnknownChart { property: String, chart: String },
    #[error("property `{property}`: chart `{chart}` has no state `{state}`")]
    UnknownState {
        property: String,
        chart: String,
        state: String,
    },
    #[error("property `{property}`: condition: {message}")]
    Condition { property: String, message: String },
}

#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    /// Explore configurations up to this minute, inclusive.
    pub horizon: u32,
    /// Hard cap on distinct configurations; exceeding it yields
    /// [`Verdict::ResourceLimit`] for every unresolved property.
    pub max_states: usize,
    /// Worker threads for successor expansion. Results are identical for
    /// every worker count.
    pub jobs: usize,
}

impl VerifyOptions {
    pub const DEFAULT_MAX_STATES: usize = 1_000_000;
    /// Slack added past the schedule horizon by [`VerifyOptions::for_model`].
    pub const HORIZON_SLACK: u32 = 60;

    pub fn new(horizon: u32) -> VerifyOptions {
        VerifyOptions {
            horizon,
            max_states: Self::DEFAULT_MAX_STATES,
            jobs: 1,
        }
    }

    /// Default options for a model: horizon = schedule horizon + 60 minutes.
    pub fn for_model(model: &SystemModel) -> VerifyOptions {
        VerifyOptions::new(model.schedule.horizon() + Self::HORIZON_SLACK)
    }
}

struct PropRt<'m> {
    property: &'m Property,
    chart: usize,
    state: u32,
    violation: Option<usize>,
}

struct ConfigScope<'a, 'm> {
    engine: &'a Engine<'m>,
    vars: &'a [Value],
}

impl Scope for ConfigScope<'_, '_> {
    fn get(&self, name: &str) -> Option<Value> {
        self.engine.var_index(name).map(|i| self.vars[i])
    }
}

/// Checks each property against every configuration reachable within the
/// horizon. Returns one result per property, in input order.
pub fn verify(
    model: &SystemModel,
    properties: &[Property],
    options: VerifyOptions,
) -> Result<Vec<VerificationResult>, VerifyError> {
    let engine = Engine::new(model)?;
    let mut props = bind_properties(model, properties)?;

    let mut arena: IndexSet<Configuration> = IndexSet::new();
    // parent index and tick log per arena node; roots have parent usize::MAX
    let mut meta: Vec<(usize, Vec<crate::exec::Fired>, Vec<crate::exec::Choice>)> = Vec::new();

    let mut frontier: Vec<usize> = Vec::new();
    let mut truncated = false;

    let admit = |succ: Successor,
                     parent: usize,
                     arena: &mut IndexSet<Configuration>,
                     meta: &mut Vec<(usize, Vec<crate::exec::Fired>, Vec<crate::exec::Choice>)>,
                     frontier: &mut Vec<usize>,
                     truncated: &mut bool| {
        if arena.len() >= options.max_states {
            *truncated = true;
            return None;
        }
        let (index, inserted) = arena.insert_full(succ.config);
        if inserted {
            meta.push((parent, succ.fired, succ.choices));
            frontier.push(index);
            Some(index)
        } else {
            None
        }
    };

    for succ in engine.initial()? {
        if let Some(index) = admit(succ, usize::MAX, &mut arena, &mut meta, &mut frontier, &mut truncated) {
            check_node(&engine, &arena, index, &mut props);
        }
    }

    let pool = (options.jobs > 1)
        .then(|| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(options.jobs)
                .build()
                .expect("worker pool")
        });

    while !frontier.is_empty() && !truncated && props.iter().any(|p| p.violation.is_none()) {
        let expandable: Vec<usize> = frontier
            .drain(..)
            .filter(|&i| arena[i].minute < options.horizon)
            .collect();
        if expandable.is_empty() {
            break;
        }
        // expansion is pure; parallelism cannot affect the merged order
        let expanded: Result<Vec<Vec<Successor>>, ExecError> = match &pool {
            Some(pool) => pool.install(|| {
                expandable
                    .par_iter()
                    .map(|&i| engine.successors(&arena[i]))
                    .collect()
            }),
            None => expandable.iter().map(|&i| engine.successors(&arena[i])).collect(),
        };
        for (parent, succs) in expandable.iter().zip(expanded?) {
            for succ in succs {
                if let Some(index) =
                    admit(succ, *parent, &mut arena, &mut meta, &mut frontier, &mut truncated)
                {
                    check_node(&engine, &arena, index, &mut props);
                }
            }
        }
    }

    let states_explored = arena.len();
    let results = props
        .into_iter()
        .map(|p| {
            let (verdict, counterexample) = match p.violation {
                Some(node) => {
                    let trace = rebuild_trace(&engine, &arena, &meta, node);
                    (Verdict::Violated, Some(trace))
                }
                None if truncated => (Verdict::ResourceLimit, None),
                None => (Verdict::Holds, None),
            };
            VerificationResult {
                property: p.property.name.clone(),
                verdict,
                states_explored,
                horizon: options.horizon,
                counterexample,
            }
        })
        .collect();
    Ok(results)
}

fn bind_properties<'m>(
    model: &'m SystemModel,
    properties: &'m [Property],
) -> Result<Vec<PropRt<'m>>, VerifyError> {
    properties
        .iter()
        .map(|property| {
            let chart_idx = model
                .charts
                .iter()
                .position(|c| c.name == property.chart)
                .ok_or_else(|| VerifyError::UnknownChart {
                    property: property.name.clone(),
                    chart: property.chart.clone(),
                })?;
            let state_idx = model.charts[chart_idx]
                .state_index(&property.state)
                .ok_or_else(|| VerifyError::UnknownState {
                    property: property.name.clone(),
                    chart: property.chart.clone(),
                    state: property.state.clone(),
                })?;
            let lookup = |name: &str| model.variable(name).map(|d| d.ty);
            match type_of(&property.condition, &lookup) {
                Ok(Ty::Bool) => {}
                Ok(ty) => {
                    return Err(VerifyError::Condition {
                        property: property.name.clone(),
                        message: format!("must be bool, got {ty}"),
                    })
                }
                Err(e) => {
                    return Err(VerifyError::Condition {
                        property: property.name.clone(),
                        message: e.to_string(),
                    })
                }
            }
            Ok(PropRt {
                property,
                chart: chart_idx,
                state: state_idx as u32,
                violation: None,
            })
        })
        .collect()
}

fn check_node(
    engine: &Engine,
    arena: &IndexSet<Configuration>,
    index: usize,
    props: &mut [PropRt],
) {
    let config = &arena[index];
    for p in props.iter_mut() {
        if p.violation.is_some() || config.active[p.chart] != p.state {
            continue;
        }
        let scope = ConfigScope { engine, vars: &config.vars };
        // validated against the model: cannot fail on a reachable config
        let ok = eval_bool(&p.property.condition, &scope).unwrap_or(false);
        if !ok {
            p.violation = Some(index);
        }
    }
}

fn rebuild_trace(
    engine: &Engine,
    arena: &IndexSet<Configuration>,
    meta: &[(usize, Vec<crate::exec::Fired>, Vec<crate::exec::Choice>)],
    node: usize,
) -> Trace {
    let mut chain = Vec::new();
    let mut cursor = node;
    loop {
        let (parent, fired, choices) = &meta[cursor];
        chain.push(Successor {
            config: arena[cursor].clone(),
            fired: fired.clone(),
            choices: choices.clone(),
        });
        if *parent == usize::MAX {
            break;
        }
        cursor = *parent;
    }
    chain.reverse();
    Trace::from_path(engine, &chain)
}
