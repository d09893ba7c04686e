//! Statechart intermediate representation and model validation.
//!
//! A [`SystemModel`] is a set of flat statecharts executing over a shared
//! variable environment in discrete one-minute ticks. Charts are totally
//! ordered by execution rank; within a tick each chart fires at most one
//! enabled transition, and writes made by a chart are visible to every
//! higher-ranked chart in the same tick.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::expr::{type_of, Expr, Ty, Value};
use crate::schedule::AvailabilityMap;

/// One tick of the system clock, in minutes.
pub const TICK_MINUTES: u32 = 1;

/// Name of the implicit system clock variable.
pub const CLOCK_VAR: &str = "curT";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// `var = expr`
    Assign { var: String, value: Expr },
    /// `raise event`: marks the event pending for the rest of the tick.
    Raise { event: String },
    /// `choose var`: nondeterministic boolean havoc of a free variable.
    Choose { var: String },
    /// `var = curT`: records the current minute.
    RecordTime { var: String },
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Assign { var, value } => write!(f, "{var} = {value}"),
            Action::Raise { event } => write!(f, "raise {event}"),
            Action::Choose { var } => write!(f, "choose {var}"),
            Action::RecordTime { var } => write!(f, "{var} = {CLOCK_VAR}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct State {
    pub name: String,
    pub entry: Vec<Action>,
    /// `//@RES:` annotation payloads attached to this state.
    pub annotations: Vec<String>,
}

impl State {
    pub fn new(name: impl Into<String>) -> State {
        State {
            name: name.into(),
            ..State::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub source: String,
    pub target: String,
    /// Optional trigger: the transition is enabled only in ticks where the
    /// event was raised by an earlier-ranked chart (or earlier action).
    pub trigger: Option<String>,
    pub guard: Expr,
    pub actions: Vec<Action>,
    pub annotations: Vec<String>,
}

impl Transition {
    pub fn new(source: impl Into<String>, target: impl Into<String>, guard: Expr) -> Transition {
        Transition {
            source: source.into(),
            target: target.into(),
            trigger: None,
            guard,
            actions: Vec::new(),
            annotations: Vec::new(),
        }
    }

    /// `src -> dst` label used in diagnostics and traces.
    pub fn label(&self) -> String {
        format!("{} -> {}", self.source, self.target)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statechart {
    pub name: String,
    /// Execution order within a tick; lower ranks run first.
    pub rank: u32,
    pub initial: String,
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
}

impl Statechart {
    pub fn state(&self, name: &str) -> Option<&State> {
        self.states.iter().find(|s| s.name == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableDecl {
    /// Possibly interface-qualified, e.g. `RES.CT_machine`.
    pub name: String,
    pub ty: Ty,
    pub init: Value,
    /// Free variables are resolved by havoc (`choose`) rather than the model.
    pub free: bool,
}

impl VariableDecl {
    pub fn bool_var(name: impl Into<String>, init: bool) -> VariableDecl {
        VariableDecl {
            name: name.into(),
            ty: Ty::Bool,
            init: Value::Bool(init),
            free: false,
        }
    }

    pub fn int_var(name: impl Into<String>, init: i64) -> VariableDecl {
        VariableDecl {
            name: name.into(),
            ty: Ty::Int,
            init: Value::Int(init),
            free: false,
        }
    }

    pub fn free_bool(name: impl Into<String>) -> VariableDecl {
        VariableDecl {
            free: true,
            ..VariableDecl::bool_var(name, false)
        }
    }
}

/// A complete system: shared variable declarations, rank-ordered charts, and
/// the resource schedule the availability chart was synthesized from (kept so
/// tools can recover the scenario horizon; empty when no schedule applies).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SystemModel {
    pub name: String,
    pub variables: Vec<VariableDecl>,
    pub charts: Vec<Statechart>,
    pub schedule: AvailabilityMap,
}

impl SystemModel {
    pub fn new(name: impl Into<String>) -> SystemModel {
        SystemModel {
            name: name.into(),
            ..SystemModel::default()
        }
    }

    pub fn variable(&self, name: &str) -> Option<&VariableDecl> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn chart(&self, name: &str) -> Option<&Statechart> {
        self.charts.iter().find(|c| c.name == name)
    }

    /// Chart indices sorted by execution rank.
    pub fn rank_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.charts.len()).collect();
        order.sort_by_key(|&i| self.charts[i].rank);
        order
    }
}

/// A snapshot of the system between ticks: one active state per chart
/// (indexed as in [`SystemModel::charts`]), the variable environment
/// (indexed as in [`SystemModel::variables`]), and the current minute.
/// Pending events are tick-local and never survive into a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub minute: u32,
    pub active: Vec<u32>,
    pub vars: Vec<Value>,
}

/// A validation finding. `chart`/`element` locate the offending construct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub chart: Option<String>,
    pub element: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn model(message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            chart: None,
            element: None,
            message: message.into(),
        }
    }

    fn in_chart(chart: &str, element: Option<String>, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            chart: Some(chart.to_string()),
            element,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(chart) = &self.chart {
            write!(f, "chart `{chart}`")?;
            if let Some(el) = &self.element {
                write!(f, ", {el}")?;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.message)
    }
}

/// Checks every structural invariant of the model. Returns an empty list iff
/// the model is well-formed; execution assumes a validated model.
pub fn validate_model(model: &SystemModel) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut var_types: HashMap<&str, Ty> = HashMap::new();
    let mut seen_vars = HashSet::new();
    for decl in &model.variables {
        if !seen_vars.insert(decl.name.as_str()) {
            diags.push(Diagnostic::model(format!(
                "duplicate variable declaration `{}`",
                decl.name
            )));
        }
        if decl.init.ty() != decl.ty {
            diags.push(Diagnostic::model(format!(
                "variable `{}` declared {} but initialized with {}",
                decl.name,
                decl.ty,
                decl.init.ty()
            )));
        }
        var_types.insert(decl.name.as_str(), decl.ty);
    }
    if let Some(clock) = model.variable(CLOCK_VAR) {
        if clock.ty != Ty::Int {
            diags.push(Diagnostic::model(format!(
                "variable `{CLOCK_VAR}` is the system clock and must be int"
            )));
        }
    }

    let mut chart_names = HashSet::new();
    let mut ranks = HashSet::new();
    for chart in &model.charts {
        if !chart_names.insert(chart.name.as_str()) {
            diags.push(Diagnostic::model(format!(
                "duplicate chart name `{}`",
                chart.name
            )));
        }
        if !ranks.insert(chart.rank) {
            diags.push(Diagnostic::model(format!(
                "charts must have distinct execution ranks; rank {} repeats (chart `{}`)",
                chart.rank, chart.name
            )));
        }
        validate_chart(model, chart, &var_types, &mut diags);
    }

    diags
}

fn validate_chart(
    model: &SystemModel,
    chart: &Statechart,
    var_types: &HashMap<&str, Ty>,
    diags: &mut Vec<Diagnostic>,
) {
    let lookup = |name: &str| var_types.get(name).copied();

    let mut state_names = HashSet::new();
    for state in &chart.states {
        if !state_names.insert(state.name.as_str()) {
            diags.push(Diagnostic::in_chart(
                &chart.name,
                Some(format!("state `{}`", state.name)),
                "duplicate state name",
            ));
        }
        for action in &state.entry {
            validate_action(
                model,
                chart,
                format!("state `{}`", state.name),
                action,
                &lookup,
                diags,
            );
        }
    }

    if chart.state(&chart.initial).is_none() {
        diags.push(Diagnostic::in_chart(
            &chart.name,
            None,
            format!("initial state `{}` does not exist", chart.initial),
        ));
    }

    for t in &chart.transitions {
        let element = format!("transition `{}`", t.label());
        for endpoint in [&t.source, &t.target] {
            if chart.state(endpoint).is_none() {
                diags.push(Diagnostic::in_chart(
                    &chart.name,
                    Some(element.clone()),
                    format!("references unknown state `{endpoint}`"),
                ));
            }
        }
        match type_of(&t.guard, &lookup) {
            Ok(Ty::Bool) => {}
            Ok(got) => diags.push(Diagnostic::in_chart(
                &chart.name,
                Some(element.clone()),
                format!("guard must be bool, got {got}"),
            )),
            Err(err) => diags.push(Diagnostic::in_chart(
                &chart.name,
                Some(element.clone()),
                format!("guard: {err}"),
            )),
        }
        for action in &t.actions {
            validate_action(model, chart, element.clone(), action, &lookup, diags);
        }
    }
}

fn validate_action(
    model: &SystemModel,
    chart: &Statechart,
    element: String,
    action: &Action,
    lookup: &impl Fn(&str) -> Option<Ty>,
    diags: &mut Vec<Diagnostic>,
) {
    let mut push = |message: String| {
        diags.push(Diagnostic::in_chart(&chart.name, Some(element.clone()), message));
    };
    match action {
        Action::Assign { var, value } => match lookup(var) {
            None => push(format!("assignment to undeclared variable `{var}`")),
            Some(want) => match type_of(value, lookup) {
                Ok(got) if got == want => {}
                Ok(got) => push(format!(
                    "assignment to `{var}` expects {want}, expression is {got}"
                )),
                Err(err) => push(format!("in assignment to `{var}`: {err}")),
            },
        },
        Action::Raise { .. } => {}
        Action::Choose { var } => match model.variable(var) {
            None => push(format!("choose targets undeclared variable `{var}`")),
            Some(decl) => {
                if decl.ty != Ty::Bool {
                    push(format!("choose targets `{var}`, which is not bool"));
                }
                if !decl.free {
                    push(format!("choose targets `{var}`, which is not declared free"));
                }
            }
        },
        Action::RecordTime { var } => match lookup(var) {
            None => push(format!("time recorded into undeclared variable `{var}`")),
            Some(Ty::Int) => {}
            Some(_) => push(format!("time recorded into `{var}`, which is not int")),
        },
    }
}
