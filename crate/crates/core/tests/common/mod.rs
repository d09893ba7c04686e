//! Shared fixture loading and randomized-model helpers for integration tests.
#![allow(dead_code)] // each test target uses a different subset

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::Rng;

use careflow_core::demand::{parse_demand, Demand, DemandMap};
use careflow_core::exec::Engine;
use careflow_core::expr::Value;
use careflow_core::integrate::assemble;
use careflow_core::model::SystemModel;
use careflow_core::schedule::{AvailabilityMap, TimeInterval};
use careflow_core::synth::procedure_var;
use careflow_core::verify::Property;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures/stroke")
        .join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn stroke_system(schedule_file: &str) -> SystemModel {
    let guideline = careflow_core::parse_system(&fixture("stroke.sys")).unwrap();
    let dmap = careflow_core::parse_demand_map(&fixture("stroke.dmap")).unwrap();
    let schedule = careflow_core::parse_schedule(&fixture(schedule_file)).unwrap();
    let annotated = annotate_system(&guideline, &dmap);
    assemble(&annotated, &dmap, &schedule).unwrap().model
}

pub fn extended_system(schedule_file: &str) -> SystemModel {
    let guideline = careflow_core::parse_system(&fixture("stroke_extended.sys")).unwrap();
    let dmap = careflow_core::parse_demand_map(&fixture("stroke_extended.dmap")).unwrap();
    let schedule = careflow_core::parse_schedule(&fixture(schedule_file)).unwrap();
    let annotated = annotate_system(&guideline, &dmap);
    assemble(&annotated, &dmap, &schedule).unwrap().model
}

pub fn annotate_system(guideline: &SystemModel, dmap: &DemandMap) -> SystemModel {
    let mut out = guideline.clone();
    for chart in &mut out.charts {
        *chart = careflow_core::annotate(chart, dmap);
    }
    out
}

/// Minimal system exercising one demand: availability chart plus the demand
/// chart for `procedure`.
pub fn demand_only_system(
    procedure: &str,
    demand: &Demand,
    schedule: &AvailabilityMap,
) -> SystemModel {
    let mut dmap = DemandMap::new();
    dmap.insert(procedure.to_string(), demand.clone());
    let guideline = SystemModel::new("probe");
    assemble(&guideline, &dmap, schedule).unwrap().model
}

/// First minute during which the synthesized demand chart latches
/// `RES.<procedure>`, observed by stepping the assembled system; `None` if it
/// never latches within the schedule horizon.
pub fn chart_latch_minute(model: &SystemModel, procedure: &str) -> Option<u32> {
    let engine = Engine::new(model).unwrap();
    let flag = engine.var_index(&procedure_var(procedure)).unwrap();
    let horizon = model.schedule.horizon();
    let mut config = engine.initial().unwrap().remove(0).config;
    assert_eq!(config.vars[flag], Value::Bool(false), "flag latched before any tick");
    for minute in 0..=horizon {
        let succs = engine.successors(&config).unwrap();
        assert_eq!(succs.len(), 1, "demand systems are deterministic");
        config = succs.into_iter().next().unwrap().config;
        if config.vars[flag] == Value::Bool(true) {
            return Some(minute);
        }
    }
    None
}

/// Exhaustive tree search over every resolution of nondeterminism up to the
/// horizon, with no visited-set: the reference for verifier soundness.
/// Returns, per property, whether any reachable configuration violates it.
pub fn brute_force_violations(
    model: &SystemModel,
    properties: &[Property],
    horizon: u32,
) -> Vec<bool> {
    let engine = Engine::new(model).unwrap();
    let scoped: Vec<(usize, u32)> = properties
        .iter()
        .map(|p| {
            let chart = model.charts.iter().position(|c| c.name == p.chart).unwrap();
            let state = model.charts[chart].state_index(&p.state).unwrap() as u32;
            (chart, state)
        })
        .collect();
    let mut violated = vec![false; properties.len()];
    let mut stack: Vec<careflow_core::Configuration> = engine
        .initial()
        .unwrap()
        .into_iter()
        .map(|s| s.config)
        .collect();
    while let Some(config) = stack.pop() {
        for (i, property) in properties.iter().enumerate() {
            if violated[i] {
                continue;
            }
            let (chart, state) = scoped[i];
            if config.active[chart] != state {
                continue;
            }
            let scope: std::collections::BTreeMap<String, Value> = model
                .variables
                .iter()
                .zip(&config.vars)
                .map(|(d, v)| (d.name.clone(), *v))
                .collect();
            if !careflow_core::expr::eval_bool(&property.condition, &scope).unwrap() {
                violated[i] = true;
            }
        }
        if violated.iter().all(|&v| v) {
            break;
        }
        if config.minute < horizon {
            stack.extend(
                engine
                    .successors(&config)
                    .unwrap()
                    .into_iter()
                    .map(|s| s.config),
            );
        }
    }
    violated
}

/// Random demand drawn from the grammar image: up to `max_stages` stages of
/// 1..=3 resources chained with AND/OR, joined by SEQ with delays 0..=15.
pub fn random_demand(rng: &mut StdRng, resources: &[&str], max_stages: usize) -> Demand {
    let stages = rng.gen_range(1..=max_stages);
    let mut text = String::new();
    for stage in 0..stages {
        if stage > 0 {
            text.push_str(&format!(" SEQ({}) ", rng.gen_range(0u32..=15)));
        }
        let atoms = rng.gen_range(1..=3);
        for atom in 0..atoms {
            if atom > 0 {
                text.push_str(if rng.gen() { " AND " } else { " OR " });
            }
            text.push_str(resources[rng.gen_range(0..resources.len())]);
        }
    }
    parse_demand(&text).unwrap()
}

/// Random schedule over `resources` with 0..=3 intervals each inside
/// `[0, horizon]`.
pub fn random_schedule(rng: &mut StdRng, resources: &[&str], horizon: u32) -> AvailabilityMap {
    let entries = resources.iter().map(|r| {
        let count = rng.gen_range(0..=3);
        let intervals = (0..count)
            .map(|_| {
                let a = rng.gen_range(0..=horizon);
                let b = rng.gen_range(a..=horizon);
                TimeInterval::new(a, b).unwrap()
            })
            .collect();
        (r.to_string(), intervals)
    });
    AvailabilityMap::from_entries(entries).unwrap()
}
