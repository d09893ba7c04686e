//! Guard rewriting and system assembly.
//!
//! Integration strengthens guideline guards with the procedure flags the
//! demand charts latch: an annotated transition's guard gains one
//! `RES.<procedure>` conjunct per annotated procedure, and an annotated
//! state applies the same rewrite to all of its incoming transitions
//! (self-loops included). Assembly stacks the availability chart, the demand
//! charts, and the integrated guideline charts into one ranked system.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::annotate::{parse_annotation, AnnotationError};
use crate::demand::DemandMap;
use crate::expr::Expr;
use crate::model::{validate_model, Diagnostic, Statechart, SystemModel, VariableDecl};
use crate::schedule::AvailabilityMap;
use crate::synth::{
    declare_vars, demand_chart_name, demand_chart_time_vars, distinct_resources, make_timer,
    procedure_var, synthesize_availability_chart, synthesize_demand_chart, SynthError,
};

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("chart `{chart}`, {element}: {source}")]
    Annotation {
        chart: String,
        element: String,
        #[source]
        source: AnnotationError,
    },
    #[error(
        "chart `{chart}`, {element}: annotation names procedure `{procedure}` \
         but no variable `RES.{procedure}` is declared"
    )]
    UnknownProcedure {
        chart: String,
        element: String,
        procedure: String,
    },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("assembled model failed validation:\n{}", .0.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("variable `{0}` is declared twice with different types or initial values")]
    ConflictingDecl(String),
}

/// An integrated chart plus any non-fatal findings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Integrated {
    pub chart: Statechart,
    pub warnings: Vec<String>,
}

fn strengthen(guard: Expr, procedures: &[String]) -> Expr {
    let existing: Vec<String> = guard.conjuncts().iter().map(|c| c.to_string()).collect();
    let mut out = guard;
    for p in procedures {
        let flag = Expr::Var(procedure_var(p));
        if existing.contains(&flag.to_string()) {
            continue; // already integrated
        }
        out = if out == Expr::Bool(true) {
            flag
        } else {
            Expr::and(out, flag)
        };
    }
    out
}

/// Applies the integration rules to one annotated chart. `procedures` is the
/// set of procedure names with a declared `RES.` variable; annotations naming
/// anything else are errors. Re-integration is a no-op: conjuncts already
/// present are not added again.
pub fn integrate(
    chart: &Statechart,
    procedures: &BTreeSet<String>,
) -> Result<Integrated, IntegrateError> {
    let mut out = chart.clone();
    let mut warnings = Vec::new();

    let parse = |element: String, payload: &str| -> Result<Vec<String>, IntegrateError> {
        let entries = parse_annotation(payload).map_err(|source| IntegrateError::Annotation {
            chart: chart.name.clone(),
            element: element.clone(),
            source,
        })?;
        let mut names = Vec::new();
        for (p, _) in entries {
            if !procedures.contains(&p) {
                return Err(IntegrateError::UnknownProcedure {
                    chart: chart.name.clone(),
                    element,
                    procedure: p,
                });
            }
            names.push(p);
        }
        Ok(names)
    };

    // rule for states: strengthen every incoming transition
    for state in &chart.states {
        if state.annotations.is_empty() {
            continue;
        }
        let mut procs = Vec::new();
        for payload in &state.annotations {
            procs.extend(parse(format!("state `{}`", state.name), payload)?);
        }
        let mut incoming = 0;
        for t in &mut out.transitions {
            if t.target == state.name {
                t.guard = strengthen(t.guard.clone(), &procs);
                incoming += 1;
            }
        }
        if incoming == 0 {
            warnings.push(format!(
                "state `{}` of chart `{}` is annotated but has no incoming transition; \
                 its resource demand cannot gate entry",
                state.name, chart.name
            ));
        }
    }

    // rule for transitions: strengthen the transition itself
    for (i, t) in chart.transitions.iter().enumerate() {
        if t.annotations.is_empty() {
            continue;
        }
        let mut procs = Vec::new();
        for payload in &t.annotations {
            procs.extend(parse(format!("transition `{}`", t.label()), payload)?);
        }
        out.transitions[i].guard = strengthen(out.transitions[i].guard.clone(), &procs);
    }

    Ok(Integrated { chart: out, warnings })
}

/// Assembly options. The explicit timer chart is off by default; the step
/// clock supplies `curT` either way.
#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    pub include_timer: bool,
}

/// The assembled system plus integration warnings.
#[derive(Debug)]
pub struct Assembly {
    pub model: SystemModel,
    pub warnings: Vec<String>,
}

/// Builds the complete verifiable system from an annotated guideline model,
/// its demand map, and a resource schedule: merged variable declarations, the
/// availability chart at rank 0, one demand chart per map entry at ranks
/// 1..=n, and the integrated guideline charts above those.
pub fn assemble(
    guideline: &SystemModel,
    dmap: &DemandMap,
    schedule: &AvailabilityMap,
) -> Result<Assembly, IntegrateError> {
    assemble_with(guideline, dmap, schedule, AssembleOptions::default())
}

pub fn assemble_with(
    guideline: &SystemModel,
    dmap: &DemandMap,
    schedule: &AvailabilityMap,
    options: AssembleOptions,
) -> Result<Assembly, IntegrateError> {
    let mut variables: Vec<VariableDecl> = guideline.variables.clone();
    for decl in declare_vars(dmap) {
        merge_decl(&mut variables, decl)?;
    }
    for (procedure, demand) in dmap {
        for decl in demand_chart_time_vars(procedure, demand)? {
            merge_decl(&mut variables, decl)?;
        }
    }

    let mut charts: Vec<Statechart> = Vec::new();
    let mut rank = 0u32;
    let resources = distinct_resources(dmap);
    if !resources.is_empty() {
        let mut availability = synthesize_availability_chart(&resources, schedule)?;
        availability.rank = rank;
        rank += 1;
        charts.push(availability);
    }
    for (procedure, demand) in dmap {
        let mut chart = synthesize_demand_chart(procedure, demand)?;
        chart.rank = rank;
        rank += 1;
        charts.push(chart);
    }

    let procedures: BTreeSet<String> = dmap.keys().cloned().collect();
    let mut warnings = Vec::new();
    // charts this pass synthesizes are regenerated, not copied through, so
    // assembling an already-assembled system reproduces it exactly
    let synthesized: BTreeSet<String> = dmap
        .keys()
        .map(|p| demand_chart_name(p))
        .chain(["Resource".to_string(), "Timer".to_string()])
        .collect();
    let guideline_order: Vec<usize> = guideline
        .rank_order()
        .into_iter()
        .filter(|&i| !synthesized.contains(&guideline.charts[i].name))
        .collect();
    for &i in &guideline_order {
        let integrated = integrate(&guideline.charts[i], &procedures)?;
        warnings.extend(integrated.warnings);
        let mut chart = integrated.chart;
        chart.rank = rank;
        rank += 1;
        charts.push(chart);
    }

    if options.include_timer {
        let mut timer = make_timer();
        timer.rank = rank;
        charts.push(timer);
    }

    let model = SystemModel {
        name: guideline.name.clone(),
        variables,
        charts,
        schedule: schedule.clone(),
    };
    let diags = validate_model(&model);
    if !diags.is_empty() {
        return Err(IntegrateError::Invalid(diags));
    }
    Ok(Assembly { model, warnings })
}

fn merge_decl(variables: &mut Vec<VariableDecl>, decl: VariableDecl) -> Result<(), IntegrateError> {
    match variables.iter().find(|v| v.name == decl.name) {
        None => {
            variables.push(decl);
            Ok(())
        }
        Some(existing) if existing.ty == decl.ty && existing.init == decl.init => Ok(()),
        Some(_) => Err(IntegrateError::ConflictingDecl(decl.name)),
    }
}
