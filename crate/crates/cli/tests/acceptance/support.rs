//! Helpers for the acceptance suite: fixture access, binary invocation,
//! randomized model generation, and the independent brute-force checker.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::rngs::StdRng;
use rand::Rng;

use careflow_core::demand::{parse_demand, Demand, DemandMap};
use careflow_core::exec::Engine;
use careflow_core::expr::{eval_bool, Value};
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

pub fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn careflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_careflow"))
        .args(args)
        .output()
        .expect("spawn careflow")
}

pub fn run_ok(args: &[&str]) -> String {
    let out = careflow(args);
    assert!(
        out.status.success(),
        "careflow {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Builds the system file for a fixture triple via the binary and returns its
/// path.
pub fn build_system_file(dir: &Path, model: &str, dmap: &str, sched: &str) -> PathBuf {
    let annotated = dir.join("annotated.sys");
    let system = dir.join("system.sys");
    run_ok(&[
        "annotate",
        &path_str(&fixture_path(model)),
        &path_str(&fixture_path(dmap)),
        "--out",
        &path_str(&annotated),
    ]);
    run_ok(&[
        "integrate",
        &path_str(&annotated),
        &path_str(&fixture_path(dmap)),
        &path_str(&fixture_path(sched)),
        "--out",
        &path_str(&system),
    ]);
    system
}

pub fn annotate_system(guideline: &SystemModel, dmap: &DemandMap) -> SystemModel {
    let mut out = guideline.clone();
    for chart in &mut out.charts {
        *chart = careflow_core::annotate(chart, dmap);
    }
    out
}

pub fn demand_only_system(
    procedure: &str,
    demand: &Demand,
    schedule: &AvailabilityMap,
) -> SystemModel {
    let mut dmap = DemandMap::new();
    dmap.insert(procedure.to_string(), demand.clone());
    assemble(&SystemModel::new("probe"), &dmap, schedule)
        .unwrap()
        .model
}

/// First minute during which `RES.<procedure>` latches true under stepping,
/// or `None` within the schedule horizon.
pub fn chart_latch_minute(model: &SystemModel, procedure: &str) -> Option<u32> {
    let engine = Engine::new(model).unwrap();
    let flag = engine.var_index(&procedure_var(procedure)).unwrap();
    let mut config = engine.initial().unwrap().remove(0).config;
    for minute in 0..=model.schedule.horizon() {
        config = engine.successors(&config).unwrap().remove(0).config;
        if config.vars[flag] == Value::Bool(true) {
            return Some(minute);
        }
    }
    None
}

/// Exhaustive choice-tree search (no visited set): the reference for
/// verifier soundness. Returns per-property violation flags.
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
            let (chart, state) = scoped[i];
            if violated[i] || config.active[chart] != state {
                continue;
            }
            let scope: BTreeMap<String, Value> = model
                .variables
                .iter()
                .zip(&config.vars)
                .map(|(d, v)| (d.name.clone(), *v))
                .collect();
            if !eval_bool(&property.condition, &scope).unwrap() {
                violated[i] = true;
            }
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

/// Random demand drawn from the grammar image.
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
