//! Statechart synthesis from demand maps and availability schedules.
//!
//! For each procedure a demand chart walks the demand's stages and latches
//! `RES.<procedure>` true when the final stage is satisfied; the availability
//! chart refreshes one `RES.<resource>` flag per resource from the schedule
//! every tick. The `RES.` interface holds one boolean per resource and per
//! procedure, all false initially.

use thiserror::Error;

use crate::demand::{stages, Demand, DemandError, DemandMap};
use crate::expr::{BinOp, Expr};
use crate::model::{Action, State, Statechart, Transition, VariableDecl, CLOCK_VAR};
use crate::schedule::AvailabilityMap;

/// Prefix of the shared resource/procedure variable interface.
pub const RES_PREFIX: &str = "RES.";

pub fn resource_var(resource: &str) -> String {
    format!("{RES_PREFIX}{resource}")
}

pub fn procedure_var(procedure: &str) -> String {
    format!("{RES_PREFIX}{procedure}")
}

/// Name of the stage-time variable recording when stage `i` of a procedure's
/// demand was satisfied.
pub fn stage_time_var(procedure: &str, stage: usize) -> String {
    format!("{RES_PREFIX}{procedure}__t{stage}")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("demand for `{procedure}` has no staged form: {source}")]
    Unstageable {
        procedure: String,
        #[source]
        source: DemandError,
    },
    #[error("availability chart needs at least one resource")]
    NoResources,
}

/// Declares the `RES.` interface for a demand map: one boolean per procedure
/// (map order) and per distinct resource (first-occurrence order), all false,
/// plus the integer clock `curT`.
pub fn declare_vars(dmap: &DemandMap) -> Vec<VariableDecl> {
    let mut decls: Vec<VariableDecl> = dmap
        .keys()
        .map(|p| VariableDecl::bool_var(procedure_var(p), false))
        .collect();
    for resource in distinct_resources(dmap) {
        decls.push(VariableDecl::bool_var(resource_var(&resource), false));
    }
    decls.push(VariableDecl::int_var(CLOCK_VAR, 0));
    decls
}

/// Distinct resource names across all demands, in first-occurrence order.
pub fn distinct_resources(dmap: &DemandMap) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for demand in dmap.values() {
        for r in demand.resources() {
            if !out.iter().any(|x| x == r) {
                out.push(r.to_string());
            }
        }
    }
    out
}

/// The explicit one-state timer chart: a self-loop incrementing `curT` each
/// tick. The step clock already advances `curT`, so the chart is redundant
/// and assembly omits it unless asked; when present it must run at the last
/// rank so no other chart observes a mid-tick clock.
pub fn make_timer() -> Statechart {
    Statechart {
        name: "Timer".into(),
        rank: 0,
        initial: "run".into(),
        states: vec![State::new("run")],
        transitions: vec![Transition {
            actions: vec![Action::Assign {
                var: CLOCK_VAR.into(),
                value: Expr::Bin(
                    BinOp::Add,
                    Box::new(Expr::var(CLOCK_VAR)),
                    Box::new(Expr::Int(1)),
                ),
            }],
            ..Transition::new("run", "run", Expr::Bool(true))
        }],
    }
}

fn stage_expr(demand: &Demand) -> Expr {
    match demand {
        Demand::Resource(name) => Expr::Var(resource_var(name)),
        Demand::And(l, r) => Expr::and(stage_expr(l), stage_expr(r)),
        Demand::Or(l, r) => Expr::or(stage_expr(l), stage_expr(r)),
        Demand::Seq(..) => unreachable!("stage expressions never contain SEQ"),
    }
}

/// Name of the chart synthesized for a procedure's demand.
pub fn demand_chart_name(procedure: &str) -> String {
    format!("{procedure}_res")
}

/// Builds the demand chart for one procedure.
///
/// A demand of `k` stages yields states `ini`, the stage-boundary states
/// (`tem` for two stages, `tem1..tem(k-1)` beyond that), and `end`: exactly
/// `k+1` states and `k` transitions. The transition into boundary `i+1` is
/// guarded by the stage expression over `RES.` flags, conjoined with
/// `curT - t_i >= delay` when the stage delay is positive; each boundary
/// state records its satisfaction time, and `end` latches
/// `RES.<procedure> = true` with no way back out.
pub fn synthesize_demand_chart(
    procedure: &str,
    demand: &Demand,
) -> Result<Statechart, SynthError> {
    let stages = stages(demand).map_err(|source| SynthError::Unstageable {
        procedure: procedure.to_string(),
        source,
    })?;
    let k = stages.len();
    let boundary_name = |i: usize| {
        if k == 2 {
            "tem".to_string()
        } else {
            format!("tem{i}")
        }
    };

    let mut states = vec![State::new("ini")];
    for i in 1..k {
        let mut s = State::new(boundary_name(i));
        s.entry.push(Action::RecordTime { var: stage_time_var(procedure, i) });
        states.push(s);
    }
    let mut end = State::new("end");
    end.entry.push(Action::Assign {
        var: procedure_var(procedure),
        value: Expr::Bool(true),
    });
    states.push(end);

    let mut transitions = Vec::with_capacity(k);
    for (i, stage) in stages.iter().enumerate() {
        let source = if i == 0 { "ini".to_string() } else { boundary_name(i) };
        let target = if i + 1 == k { "end".to_string() } else { boundary_name(i + 1) };
        let expr = stage_expr(&stage.expr);
        let guard = if i > 0 && stage.delay > 0 {
            let elapsed = Expr::Bin(
                BinOp::Sub,
                Box::new(Expr::var(CLOCK_VAR)),
                Box::new(Expr::Var(stage_time_var(procedure, i))),
            );
            Expr::and(
                Expr::Bin(BinOp::Ge, Box::new(elapsed), Box::new(Expr::Int(i64::from(stage.delay)))),
                expr,
            )
        } else {
            expr
        };
        transitions.push(Transition::new(source, target, guard));
    }

    Ok(Statechart {
        name: demand_chart_name(procedure),
        rank: 0,
        initial: "ini".into(),
        states,
        transitions,
    })
}

/// Integer declarations for the stage-time variables a demand chart records.
pub fn demand_chart_time_vars(procedure: &str, demand: &Demand) -> Result<Vec<VariableDecl>, SynthError> {
    let stages = stages(demand).map_err(|source| SynthError::Unstageable {
        procedure: procedure.to_string(),
        source,
    })?;
    Ok((1..stages.len())
        .map(|i| VariableDecl::int_var(stage_time_var(procedure, i), 0))
        .collect())
}

fn availability_expr(schedule: &AvailabilityMap, resource: &str) -> Expr {
    let mut expr: Option<Expr> = None;
    for iv in schedule.intervals(resource) {
        let within = Expr::and(
            Expr::Bin(
                BinOp::Ge,
                Box::new(Expr::var(CLOCK_VAR)),
                Box::new(Expr::Int(i64::from(iv.start))),
            ),
            Expr::Bin(
                BinOp::Le,
                Box::new(Expr::var(CLOCK_VAR)),
                Box::new(Expr::Int(i64::from(iv.end))),
            ),
        );
        expr = Some(match expr {
            None => within,
            Some(prev) => Expr::or(prev, within),
        });
    }
    expr.unwrap_or(Expr::Bool(false))
}

/// Builds the availability chart: one state `Res` with a true-guarded
/// self-loop, whose entry actions recompute `RES.<r>` from the schedule for
/// each resource every tick. The schedule is compiled into the entry guards
/// once, here; queries past the schedule horizon come out false.
pub fn synthesize_availability_chart(
    resources: &[String],
    schedule: &AvailabilityMap,
) -> Result<Statechart, SynthError> {
    if resources.is_empty() {
        return Err(SynthError::NoResources);
    }
    let mut state = State::new("Res");
    for resource in resources {
        state.entry.push(Action::Assign {
            var: resource_var(resource),
            value: availability_expr(schedule, resource),
        });
    }
    Ok(Statechart {
        name: "Resource".into(),
        rank: 0,
        initial: "Res".into(),
        states: vec![state],
        transitions: vec![Transition::new("Res", "Res", Expr::Bool(true))],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{ct_demand, parse_demand, parse_demand_map};
    use crate::exec::Engine;
    use crate::expr::{Ty, Value};
    use crate::model::{Configuration, SystemModel};
    use crate::schedule::ct_schedule;

    fn stroke_map() -> DemandMap {
        parse_demand_map(
            "CTscan: CT_machine AND CT_technician SEQ(10) radiologist\n\
             givetPA: tPA AND nurse\n",
        )
        .unwrap()
    }

    #[test]
    fn declares_procedure_then_resource_variables() {
        let decls = declare_vars(&stroke_map());
        let names: Vec<&str> = decls.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "RES.CTscan",
                "RES.givetPA",
                "RES.CT_machine",
                "RES.CT_technician",
                "RES.radiologist",
                "RES.tPA",
                "RES.nurse",
                CLOCK_VAR,
            ]
        );
        for d in &decls[..7] {
            assert_eq!(d.ty, Ty::Bool);
            assert_eq!(d.init, Value::Bool(false));
        }
    }

    #[test]
    fn empty_map_declares_only_the_clock() {
        let decls = declare_vars(&DemandMap::new());
        assert_eq!(decls.len(), 1);
        assert_eq!(decls[0].name, CLOCK_VAR);
    }

    #[test]
    fn shared_resource_declared_once() {
        let map = parse_demand_map("a: nurse AND tPA\nb: nurse\n").unwrap();
        let decls = declare_vars(&map);
        let nurse_count = decls.iter().filter(|d| d.name == "RES.nurse").count();
        assert_eq!(nurse_count, 1);
    }

    #[test]
    fn timer_is_one_state_one_self_loop() {
        let timer = make_timer();
        assert_eq!(timer.states.len(), 1);
        assert_eq!(timer.transitions.len(), 1);
        assert_eq!(timer.transitions[0].source, timer.transitions[0].target);
    }

    #[test]
    fn timer_tracks_ticks() {
        let model = SystemModel {
            name: "t".into(),
            variables: vec![VariableDecl::int_var(CLOCK_VAR, 0)],
            charts: vec![make_timer()],
            schedule: AvailabilityMap::new(),
        };
        let engine = Engine::new(&model).unwrap();
        let mut config = engine.initial().unwrap()[0].config.clone();
        for _ in 0..5 {
            config = engine.successors(&config).unwrap().remove(0).config;
        }
        assert_eq!(config.vars[0], Value::Int(5));
        // without the chart, the step clock alone advances identically
        let bare = SystemModel {
            charts: vec![],
            ..model.clone()
        };
        let engine = Engine::new(&bare).unwrap();
        let mut config = engine.initial().unwrap()[0].config.clone();
        for _ in 0..5 {
            config = engine.successors(&config).unwrap().remove(0).config;
        }
        assert_eq!(config.vars[0], Value::Int(5));
    }

    #[test]
    fn ct_demand_chart_structure() {
        let chart = synthesize_demand_chart("CTscan", &ct_demand()).unwrap();
        let names: Vec<&str> = chart.states.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, vec!["ini", "tem", "end"]);
        assert_eq!(chart.transitions.len(), 2);
        assert_eq!(
            chart.transitions[0].guard.to_string(),
            "RES.CT_machine && RES.CT_technician"
        );
        assert_eq!(
            chart.transitions[1].guard.to_string(),
            "curT - RES.CTscan__t1 >= 10 && RES.radiologist"
        );
        assert_eq!(
            chart.state("tem").unwrap().entry,
            vec![Action::RecordTime { var: "RES.CTscan__t1".into() }]
        );
        assert_eq!(
            chart.state("end").unwrap().entry,
            vec![Action::Assign { var: "RES.CTscan".into(), value: Expr::Bool(true) }]
        );
        // end is a latch: no way out
        assert!(chart.transitions.iter().all(|t| t.source != "end"));
    }

    #[test]
    fn concurrent_demand_chart() {
        let chart =
            synthesize_demand_chart("givetPA", &parse_demand("tPA AND nurse").unwrap()).unwrap();
        assert_eq!(chart.states.len(), 2);
        assert_eq!(chart.transitions.len(), 1);
        assert_eq!(chart.transitions[0].guard.to_string(), "RES.tPA && RES.nurse");
        assert_eq!(
            chart.state("end").unwrap().entry,
            vec![Action::Assign { var: "RES.givetPA".into(), value: Expr::Bool(true) }]
        );
    }

    #[test]
    fn alternative_demand_chart() {
        let chart = synthesize_demand_chart("scan", &parse_demand("a OR b").unwrap()).unwrap();
        assert_eq!(chart.states.len(), 2);
        assert_eq!(chart.transitions[0].guard.to_string(), "RES.a || RES.b");
    }

    #[test]
    fn states_count_is_stages_plus_one() {
        for (text, stages) in [
            ("a", 1),
            ("a AND b OR c", 1),
            ("a SEQ(5) b", 2),
            ("a SEQ(0) b SEQ(7) c AND d", 3),
        ] {
            let demand = parse_demand(text).unwrap();
            let chart = synthesize_demand_chart("p", &demand).unwrap();
            assert_eq!(chart.states.len(), stages + 1, "demand `{text}`");
            assert_eq!(chart.transitions.len(), stages, "demand `{text}`");
        }
    }

    #[test]
    fn zero_delay_stage_omits_time_guard() {
        let chart = synthesize_demand_chart("p", &parse_demand("a SEQ(0) b").unwrap()).unwrap();
        assert_eq!(chart.transitions[1].guard.to_string(), "RES.b");
    }

    #[test]
    fn availability_chart_tracks_schedule() {
        let resources: Vec<String> =
            ["CT_machine", "CT_technician", "radiologist"].map(String::from).into();
        let chart = synthesize_availability_chart(&resources, &ct_schedule()).unwrap();
        assert_eq!(chart.states.len(), 1);
        assert_eq!(chart.states[0].entry.len(), 3);

        let mut variables = vec![VariableDecl::int_var(CLOCK_VAR, 0)];
        variables.extend(resources.iter().map(|r| VariableDecl::bool_var(resource_var(r), false)));
        let model = SystemModel {
            name: "avail".into(),
            variables,
            charts: vec![chart],
            schedule: ct_schedule(),
        };
        let engine = Engine::new(&model).unwrap();

        let probe = |minute: u32| {
            let config = Configuration {
                minute,
                active: vec![0],
                vars: vec![
                    Value::Int(i64::from(minute)),
                    Value::Bool(false),
                    Value::Bool(false),
                    Value::Bool(false),
                ],
            };
            let next = engine.successors(&config).unwrap().remove(0).config;
            (next.vars[1], next.vars[2], next.vars[3])
        };
        // flags recomputed during the tick at curT=12
        assert_eq!(
            probe(12),
            (Value::Bool(true), Value::Bool(false), Value::Bool(true))
        );
        // past the horizon everything is unavailable
        assert_eq!(
            probe(41),
            (Value::Bool(false), Value::Bool(false), Value::Bool(false))
        );
    }

    #[test]
    fn empty_resource_set_rejected() {
        assert_eq!(
            synthesize_availability_chart(&[], &ct_schedule()),
            Err(SynthError::NoResources)
        );
    }
}
