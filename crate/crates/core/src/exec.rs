//! Discrete-time execution of a system of statecharts.
//!
//! One tick is one minute. Within a tick the charts run in execution-rank
//! order, each firing at most one enabled transition (transition actions run
//! first, then the entry actions of the target state). Writes made by a chart
//! are visible to every later-ranked chart in the same tick; raised events are
//! tick-local and clear when the tick ends. After all charts have run the
//! minute advances by one and the `curT` clock variable, when declared, is
//! set to the new minute.
//!
//! `choose` actions and multiply-enabled transitions are the only sources of
//! nondeterminism: [`Engine::successors`] branches over all outcomes, while
//! [`Engine::resolve_step`] consults a [`ChoiceResolver`] to follow a single
//! path (used by the simulator).

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{eval_bool, eval_expr, Scope, Value};
use crate::model::{
    validate_model, Action, Configuration, Diagnostic, Statechart, SystemModel, CLOCK_VAR,
};

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("invalid model:\n{}", format_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("in chart `{chart}`: {source}")]
    Eval {
        chart: String,
        source: crate::expr::EvalError,
    },
    #[error("choice script exhausted at minute {minute}: no entry for {point}")]
    ScriptExhausted { minute: u32, point: String },
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| format!("  - {d}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// A transition fired during one tick, identified by model indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fired {
    pub chart: usize,
    pub transition: usize,
}

/// A nondeterministic decision taken during one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    /// `choose` havoc: variable `var` was set to `value`.
    Havoc { chart: usize, var: usize, value: bool },
    /// Among several simultaneously enabled transitions of `chart`, the one
    /// at position `index` of the enabled list (declaration order) fired.
    Pick { chart: usize, index: usize },
}

/// A successor configuration together with the decisions that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub config: Configuration,
    pub fired: Vec<Fired>,
    pub choices: Vec<Choice>,
}

/// Resolves nondeterminism for single-path execution.
pub trait ChoiceResolver {
    fn choose(&mut self, minute: u32, chart: &str, var: &str) -> Result<bool, ExecError>;
    /// Picks among `enabled` (>= 2) simultaneously enabled transitions;
    /// returns an index `< enabled`.
    fn pick(&mut self, minute: u32, chart: &str, enabled: usize) -> Result<usize, ExecError>;
}

enum Policy<'r> {
    /// Branch over every outcome.
    All,
    /// Follow the single path dictated by the resolver.
    Resolve(&'r mut dyn ChoiceResolver),
}

/// A validated, index-compiled model ready for stepping. The underlying
/// [`SystemModel`] is immutable and the engine is re-entrant: `successors`
/// may be called concurrently from many threads.
pub struct Engine<'m> {
    model: &'m SystemModel,
    var_index: HashMap<&'m str, usize>,
    rank_order: Vec<usize>,
    charts: Vec<ChartRt<'m>>,
    clock: Option<usize>,
}

struct ChartRt<'m> {
    chart: &'m Statechart,
    initial: u32,
    /// Outgoing transition indices per state, in declaration order.
    outgoing: Vec<Vec<usize>>,
    /// Target state index per transition.
    targets: Vec<u32>,
}

struct EnvScope<'a> {
    index: &'a HashMap<&'a str, usize>,
    vars: &'a [Value],
}

impl Scope for EnvScope<'_> {
    fn get(&self, name: &str) -> Option<Value> {
        self.index.get(name).map(|&i| self.vars[i])
    }
}

#[derive(Clone)]
struct Branch<'m> {
    active: Vec<u32>,
    vars: Vec<Value>,
    events: Vec<&'m str>,
    fired: Vec<Fired>,
    choices: Vec<Choice>,
}

impl<'m> Engine<'m> {
    /// Validates the model and compiles lookup tables. Fails with the full
    /// diagnostic list if validation finds anything.
    pub fn new(model: &'m SystemModel) -> Result<Engine<'m>, ExecError> {
        let diags = validate_model(model);
        if !diags.is_empty() {
            return Err(ExecError::Invalid(diags));
        }
        let var_index: HashMap<&str, usize> = model
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let charts = model
            .charts
            .iter()
            .map(|chart| {
                let state_index: HashMap<&str, u32> = chart
                    .states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.name.as_str(), i as u32))
                    .collect();
                let mut outgoing = vec![Vec::new(); chart.states.len()];
                let mut targets = Vec::with_capacity(chart.transitions.len());
                for (ti, t) in chart.transitions.iter().enumerate() {
                    outgoing[state_index[t.source.as_str()] as usize].push(ti);
                    targets.push(state_index[t.target.as_str()]);
                }
                ChartRt {
                    chart,
                    initial: state_index[chart.initial.as_str()],
                    outgoing,
                    targets,
                }
            })
            .collect();
        Ok(Engine {
            model,
            clock: var_index.get(CLOCK_VAR).copied(),
            var_index,
            rank_order: model.rank_order(),
            charts,
        })
    }

    pub fn model(&self) -> &'m SystemModel {
        self.model
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_index.get(name).copied()
    }

    pub fn chart_name(&self, chart: usize) -> &'m str {
        &self.model.charts[chart].name
    }

    pub fn state_name(&self, chart: usize, state: u32) -> &'m str {
        &self.model.charts[chart].states[state as usize].name
    }

    /// The initial configurations: initial states active, variables at their
    /// declared values (`curT` normalized to 0), then the entry actions of
    /// every initial state executed in rank order at minute 0. `choose`
    /// actions in initial entries branch the set.
    pub fn initial(&self) -> Result<Vec<Successor>, ExecError> {
        self.initial_with(&mut Policy::All)
    }

    /// Single-path variant of [`Engine::initial`].
    pub fn resolve_initial(&self, resolver: &mut dyn ChoiceResolver) -> Result<Successor, ExecError> {
        let mut succs = self.initial_with(&mut Policy::Resolve(resolver))?;
        Ok(succs.remove(0))
    }

    fn initial_with(&self, policy: &mut Policy) -> Result<Vec<Successor>, ExecError> {
        let mut vars: Vec<Value> = self.model.variables.iter().map(|v| v.init).collect();
        if let Some(clock) = self.clock {
            vars[clock] = Value::Int(0);
        }
        let branch = Branch {
            active: self.charts.iter().map(|c| c.initial).collect(),
            vars,
            events: Vec::new(),
            fired: Vec::new(),
            choices: Vec::new(),
        };
        let mut branches = vec![branch];
        for &ci in &self.rank_order {
            let rt = &self.charts[ci];
            let entry = &rt.chart.states[rt.initial as usize].entry;
            branches = self.exec_actions(branches, ci, entry, 0, policy)?;
        }
        Ok(dedup_successors(branches, 0))
    }

    /// All successor configurations of `config`, in deterministic order:
    /// charts in rank order, enabled transitions in declaration order, havoc
    /// values false before true. Duplicate configurations are collapsed,
    /// keeping the first occurrence.
    pub fn successors(&self, config: &Configuration) -> Result<Vec<Successor>, ExecError> {
        self.step_with(config, &mut Policy::All)
    }

    /// Steps one tick along the single path dictated by `resolver`.
    pub fn resolve_step(
        &self,
        config: &Configuration,
        resolver: &mut dyn ChoiceResolver,
    ) -> Result<Successor, ExecError> {
        let mut succs = self.step_with(config, &mut Policy::Resolve(resolver))?;
        Ok(succs.remove(0))
    }

    fn step_with(
        &self,
        config: &Configuration,
        policy: &mut Policy,
    ) -> Result<Vec<Successor>, ExecError> {
        debug_assert_eq!(config.active.len(), self.charts.len());
        debug_assert_eq!(config.vars.len(), self.model.variables.len());
        let minute = config.minute;
        let mut branches = vec![Branch {
            active: config.active.clone(),
            vars: config.vars.clone(),
            events: Vec::new(),
            fired: Vec::new(),
            choices: Vec::new(),
        }];
        for &ci in &self.rank_order {
            let mut next = Vec::with_capacity(branches.len());
            for branch in branches {
                let enabled = self.enabled_transitions(ci, &branch)?;
                if enabled.is_empty() {
                    next.push(branch);
                    continue;
                }
                match policy {
                    Policy::All => {
                        for (k, &ti) in enabled.iter().enumerate() {
                            let mut b = branch.clone();
                            if enabled.len() > 1 {
                                b.choices.push(Choice::Pick { chart: ci, index: k });
                            }
                            next.extend(self.fire(b, ci, ti, minute, policy)?);
                        }
                    }
                    Policy::Resolve(resolver) => {
                        let k = if enabled.len() > 1 {
                            let k = resolver.pick(minute, self.chart_name(ci), enabled.len())?;
                            debug_assert!(k < enabled.len());
                            k
                        } else {
                            0
                        };
                        let mut b = branch;
                        if enabled.len() > 1 {
                            b.choices.push(Choice::Pick { chart: ci, index: k });
                        }
                        next.extend(self.fire(b, ci, enabled[k], minute, policy)?);
                    }
                }
            }
            branches = next;
        }
        Ok(dedup_successors(self.finalize(branches, minute), minute + 1))
    }

    fn enabled_transitions(&self, ci: usize, branch: &Branch) -> Result<Vec<usize>, ExecError> {
        let rt = &self.charts[ci];
        let mut enabled = Vec::new();
        for &ti in &rt.outgoing[branch.active[ci] as usize] {
            let t = &rt.chart.transitions[ti];
            if let Some(trigger) = &t.trigger {
                if !branch.events.contains(&trigger.as_str()) {
                    continue;
                }
            }
            let scope = EnvScope { index: &self.var_index, vars: &branch.vars };
            let open = eval_bool(&t.guard, &scope).map_err(|source| ExecError::Eval {
                chart: rt.chart.name.clone(),
                source,
            })?;
            if open {
                enabled.push(ti);
            }
        }
        Ok(enabled)
    }

    fn fire<'b>(
        &'b self,
        mut branch: Branch<'b>,
        ci: usize,
        ti: usize,
        minute: u32,
        policy: &mut Policy,
    ) -> Result<Vec<Branch<'b>>, ExecError>
    where
        'm: 'b,
    {
        let rt = &self.charts[ci];
        let t = &rt.chart.transitions[ti];
        branch.fired.push(Fired { chart: ci, transition: ti });
        let mut branches = self.exec_actions(vec![branch], ci, &t.actions, minute, policy)?;
        let target = rt.targets[ti];
        for b in &mut branches {
            b.active[ci] = target;
        }
        let entry = &rt.chart.states[target as usize].entry;
        self.exec_actions(branches, ci, entry, minute, policy)
    }

    fn exec_actions<'b>(
        &'b self,
        mut branches: Vec<Branch<'b>>,
        ci: usize,
        actions: &'m [Action],
        minute: u32,
        policy: &mut Policy,
    ) -> Result<Vec<Branch<'b>>, ExecError>
    where
        'm: 'b,
    {
        for action in actions {
            match action {
                Action::Assign { var, value } => {
                    let vi = self.var_index[var.as_str()];
                    for b in &mut branches {
                        let scope = EnvScope { index: &self.var_index, vars: &b.vars };
                        let v = eval_expr(value, &scope).map_err(|source| ExecError::Eval {
                            chart: self.chart_name(ci).to_string(),
                            source,
                        })?;
                        b.vars[vi] = v;
                    }
                }
                Action::Raise { event } => {
                    for b in &mut branches {
                        if !b.events.contains(&event.as_str()) {
                            b.events.push(event.as_str());
                        }
                    }
                }
                Action::Choose { var } => {
                    let vi = self.var_index[var.as_str()];
                    match policy {
                        Policy::All => {
                            branches = branches
                                .into_iter()
                                .flat_map(|b| {
                                    [false, true].into_iter().map(move |value| {
                                        let mut b2 = b.clone();
                                        b2.vars[vi] = Value::Bool(value);
                                        b2.choices.push(Choice::Havoc { chart: ci, var: vi, value });
                                        b2
                                    })
                                })
                                .collect();
                        }
                        Policy::Resolve(resolver) => {
                            for b in &mut branches {
                                let value =
                                    resolver.choose(minute, self.chart_name(ci), var)?;
                                b.vars[vi] = Value::Bool(value);
                                b.choices.push(Choice::Havoc { chart: ci, var: vi, value });
                            }
                        }
                    }
                }
                Action::RecordTime { var } => {
                    let vi = self.var_index[var.as_str()];
                    for b in &mut branches {
                        b.vars[vi] = Value::Int(i64::from(minute));
                    }
                }
            }
        }
        Ok(branches)
    }

    fn finalize<'b>(&self, branches: Vec<Branch<'b>>, minute: u32) -> Vec<Branch<'b>> {
        let mut out = branches;
        if let Some(clock) = self.clock {
            for b in &mut out {
                b.vars[clock] = Value::Int(i64::from(minute) + 1);
            }
        }
        out
    }
}

fn dedup_successors(branches: Vec<Branch>, minute: u32) -> Vec<Successor> {
    let mut out: Vec<Successor> = Vec::with_capacity(branches.len());
    for b in branches {
        let config = Configuration { minute, active: b.active, vars: b.vars };
        if out.iter().any(|s| s.config == config) {
            continue;
        }
        out.push(Successor { config, fired: b.fired, choices: b.choices });
    }
    out
}

/// One-shot step: validates `model`, then returns the successor set of
/// `config`. Build an [`Engine`] instead when stepping repeatedly.
pub fn step(model: &SystemModel, config: &Configuration) -> Result<Vec<Configuration>, ExecError> {
    let engine = Engine::new(model)?;
    Ok(engine
        .successors(config)?
        .into_iter()
        .map(|s| s.config)
        .collect())
}

/// One-shot initial-configuration set; see [`Engine::initial`].
pub fn initial_configurations(model: &SystemModel) -> Result<Vec<Configuration>, ExecError> {
    let engine = Engine::new(model)?;
    Ok(engine.initial()?.into_iter().map(|s| s.config).collect())
}
