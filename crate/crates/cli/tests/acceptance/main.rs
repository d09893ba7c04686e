//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS line on success (run with `cargo test --test acceptance -- --nocapture`
//! to see them; a failing criterion fails its test).

mod support;

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use careflow_core::demand::{earliest_enable, format_demand, parse_demand, Demand};
use careflow_core::integrate::{assemble, integrate};
use careflow_core::schedule::{format_schedule, parse_schedule, TimeInterval};
use careflow_core::simulate::{simulate, Resolver};
use careflow_core::verify::{verify, Verdict, VerifyOptions};
use careflow_core::{
    format_system, parse_demand_map, parse_property, parse_property_file, parse_system,
    AvailabilityMap, Engine,
};

use support::*;

#[test]
fn criterion_1_stroke_case_study_p1_p3_hold_p2_fails() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let system = build_system_file(
        dir.path(),
        "stroke_extended.sys",
        "stroke_extended.dmap",
        "delayed.sched",
    );
    let out = careflow(&[
        "verify",
        &path_str(&system),
        &path_str(&fixture_path("stroke_extended.props")),
        "--out",
        &path_str(dir.path()),
        "--format",
        "records",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(report.contains("property=P1|verdict=holds"), "{report}");
    assert!(report.contains("property=P2|verdict=violated"), "{report}");
    assert!(report.contains("property=P3|verdict=holds"), "{report}");

    // the counterexample replays through the simulator to the same final record
    let trace = std::fs::read_to_string(dir.path().join("P2.trace")).unwrap();
    let ticks = trace.lines().count() - 1;
    let replay = run_ok(&[
        "simulate",
        &path_str(&system),
        "--script",
        &path_str(&dir.path().join("P2.script")),
        "--ticks",
        &ticks.to_string(),
        "--format",
        "records",
    ]);
    assert_eq!(replay.lines().last(), trace.lines().last());
    let final_record = trace.lines().last().unwrap();
    assert!(final_record.contains("Stroke:tPAcheck"), "{final_record}");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget 10s");
    println!("ACCEPTANCE 1 (stroke case study, P1/P3 hold, P2 fails, replayable): PASS ({elapsed:?})");
}

#[test]
fn criterion_2_baseline_holds_and_200_minute_delay_fails() {
    let dir = tempfile::tempdir().unwrap();
    let system = build_system_file(dir.path(), "stroke.sys", "stroke.dmap", "all_available.sched");
    let out = careflow(&[
        "verify",
        &path_str(&system),
        &path_str(&fixture_path("stroke.props")),
        "--out",
        &path_str(dir.path()),
        "--format",
        "records",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(report.contains("property=P1|verdict=holds"), "{report}");
    assert!(report.contains("property=P2|verdict=holds"), "{report}");

    let dir2 = tempfile::tempdir().unwrap();
    let system = build_system_file(dir2.path(), "stroke.sys", "stroke.dmap", "delayed200.sched");
    let out = careflow(&[
        "verify",
        &path_str(&system),
        &path_str(&fixture_path("stroke.props")),
        "--out",
        &path_str(dir2.path()),
        "--format",
        "records",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(report.contains("property=P2|verdict=violated"), "{report}");
    println!("ACCEPTANCE 2 (baseline holds; 200-minute delay violates P2): PASS");
}

#[test]
fn criterion_3_ct_demand_timing_exact() {
    let demand = parse_demand("CT_machine AND CT_technician SEQ(10) radiologist").unwrap();
    let schedule = parse_schedule(&fixture("ct.sched")).unwrap();
    // frozen minute-scan value
    assert_eq!(earliest_enable(&demand, &schedule, 0).unwrap(), Some(30));
    // the synthesized chart latches RES.CTscan first at the same minute
    let model = demand_only_system("CTscan", &demand, &schedule);
    assert_eq!(chart_latch_minute(&model, "CTscan"), Some(30));
    println!("ACCEPTANCE 3 (CT demand enables at minute 30, chart and oracle agree exactly): PASS");
}

#[test]
fn criterion_4_oracle_chart_equivalence_1000_randomized_pairs() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xCAFE);
    let resources = ["r1", "r2", "r3", "r4"];
    let cases = 1000;
    for case in 0..cases {
        let demand = random_demand(&mut rng, &resources, 3);
        let schedule = random_schedule(&mut rng, &resources, 120);
        let oracle = earliest_enable(&demand, &schedule, 0).unwrap();
        let model = demand_only_system("p", &demand, &schedule);
        let latch = chart_latch_minute(&model, "p");
        assert_eq!(
            latch,
            oracle,
            "case {case}: demand `{}` schedule `{}`",
            format_demand(&demand),
            format_schedule(&schedule).replace('\n', " ")
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget 60s");
    println!("ACCEPTANCE 4 (chart latch equals oracle on {cases}/{cases} randomized pairs): PASS ({elapsed:?})");
}

#[test]
fn criterion_5_parser_properties_1000_random_trees() {
    let mut rng = StdRng::seed_from_u64(0xBEEF);
    let pool = ["alpha", "beta", "gamma", "delta", "eps", "zeta"];
    let cases = 1000;

    // parse/format round-trip over random grammar trees
    for _ in 0..cases {
        let demand = random_demand(&mut rng, &pool, 4);
        let text = format_demand(&demand);
        let reparsed = parse_demand(&text).unwrap();
        assert_eq!(reparsed, demand, "round-trip of `{text}`");
    }

    // precedence identities
    for _ in 0..cases {
        let pick = |rng: &mut StdRng| pool[rng.gen_range(0..pool.len())];
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        assert_eq!(
            parse_demand(&format!("{a} AND {b} OR {c}")).unwrap(),
            Demand::or(
                Demand::and(Demand::resource(a), Demand::resource(b)),
                Demand::resource(c)
            )
        );
        assert_eq!(
            parse_demand(&format!("{a} OR {b} SEQ(1) {c}")).unwrap(),
            Demand::seq(
                Demand::or(Demand::resource(a), Demand::resource(b)),
                1,
                Demand::resource(c)
            )
        );
    }

    // schedule parse/print round-trip preserves availability at every minute
    for _ in 0..200 {
        let schedule = random_schedule(&mut rng, &pool, 120);
        let reparsed = parse_schedule(&format_schedule(&schedule)).unwrap();
        for resource in schedule.resources() {
            for minute in 0..=schedule.horizon() {
                assert_eq!(
                    reparsed.is_available(resource, minute),
                    schedule.is_available(resource, minute)
                );
            }
        }
    }
    println!("ACCEPTANCE 5 (demand round-trip + precedence over {cases} trees; schedule round-trip): PASS");
}

#[test]
fn criterion_6_transformations_behavior_preserving_and_idempotent() {
    let guideline = parse_system(&fixture("stroke.sys")).unwrap();
    let dmap = parse_demand_map(&fixture("stroke.dmap")).unwrap();
    let annotated = annotate_system(&guideline, &dmap);

    // annotation preserves behavior: identical traces for 100 seeds
    for seed in 0..100 {
        let before = simulate(&guideline, Resolver::Seed(seed), 40).unwrap();
        let after = simulate(&annotated, Resolver::Seed(seed), 40).unwrap();
        assert_eq!(before, after, "seed {seed}");
    }

    // annotation idempotent
    let twice = annotate_system(&annotated, &dmap);
    assert_eq!(format_system(&twice), format_system(&annotated));

    // integration strengthens guards: integrated implies original on sampled envs
    let procedures = dmap.keys().cloned().collect();
    let integrated = integrate(&annotated.charts[0], &procedures).unwrap().chart;
    let mut rng = StdRng::seed_from_u64(7);
    let var_names: Vec<String> = {
        let mut names: Vec<String> = annotated.variables.iter().map(|v| v.name.clone()).collect();
        names.extend(dmap.keys().map(|p| format!("RES.{p}")));
        names
    };
    for _ in 0..500 {
        let mut scope: BTreeMap<String, careflow_core::Value> = BTreeMap::new();
        for name in &var_names {
            let is_bool = name.starts_with("RES.")
                || annotated
                    .variables
                    .iter()
                    .any(|v| &v.name == name && v.ty == careflow_core::Ty::Bool);
            let value = if is_bool {
                careflow_core::Value::Bool(rng.gen())
            } else {
                careflow_core::Value::Int(rng.gen_range(-5..=400))
            };
            scope.insert(name.clone(), value);
        }
        for (orig, integ) in annotated.charts[0].transitions.iter().zip(&integrated.transitions) {
            let strong = careflow_core::expr::eval_bool(&integ.guard, &scope).unwrap();
            let weak = careflow_core::expr::eval_bool(&orig.guard, &scope).unwrap();
            assert!(!strong || weak, "guard `{}` vs `{}`", integ.guard, orig.guard);
        }
    }

    // integration idempotent, by golden-file diff of assembled output
    for sched in ["all_available.sched", "delayed.sched", "delayed200.sched"] {
        let schedule = parse_schedule(&fixture(sched)).unwrap();
        let system = assemble(&annotated, &dmap, &schedule).unwrap().model;
        let golden = format_system(&system);
        let again = assemble(&system, &dmap, &schedule).unwrap().model;
        assert_eq!(format_system(&again), golden, "schedule {sched}");
    }
    println!("ACCEPTANCE 6 (annotation behavior-preserving/idempotent; integration strengthening/idempotent): PASS");
}

#[test]
fn criterion_7_verifier_matches_brute_force_exactly() {
    // fixture A: simplified stroke (3 free booleans) with CT resources at
    // minute 40 and a tightened deadline, horizon 60
    let guideline = parse_system(&fixture("stroke.sys")).unwrap();
    let dmap = parse_demand_map(&fixture("stroke.dmap")).unwrap();
    let schedule = parse_schedule(
        "CT_machine:[40,100]\nCT_technician:[40,100]\nradiologist:[40,100]\n\
         tPA:[0,100]\nnurse:[0,100]\n",
    )
    .unwrap();
    let annotated = annotate_system(&guideline, &dmap);
    let model = assemble(&annotated, &dmap, &schedule).unwrap().model;
    let props = vec![
        parse_property("tight: A[] Stroke.tPAcheck imply tpaT - onsetT <= 30").unwrap(),
        parse_property("P2: A[] Stroke.tPAcheck imply tpaT - onsetT <= 180").unwrap(),
        parse_property(
            "P1: A[] Stroke.tPA imply systolicBP <= 185 && diastolicBP <= 110 && !hemorrhage",
        )
        .unwrap(),
        parse_property("reach: A[] Stroke.tPA imply false").unwrap(),
    ];
    check_against_brute_force(&model, &props, 60);

    // fixture B: multiply-enabled transitions and a two-chart write/read race
    let text = "system probe\n\
                var x : bool = false free\n\
                var y : bool = false free\n\
                var flag : bool = false\n\
                chart W rank 0 {\n  initial w0\n  state w0 {\n    entry choose y\n  }\n\
                  state w1 { }\n  w0 -> w1 [y] / flag = true\n}\n\
                chart T rank 1 {\n\
                  initial a\n\
                  state a {\n    entry choose x\n  }\n\
                  state b { }\n  state c { }\n  state d { }\n\
                  a -> b [x && flag]\n  a -> c [x]\n  a -> d [!x]\n\
                }\n";
    let model = parse_system(text).unwrap();
    let props = vec![
        parse_property("reach_b: A[] T.b imply false").unwrap(),
        parse_property("reach_c: A[] T.c imply false").unwrap(),
        parse_property("reach_d: A[] T.d imply false").unwrap(),
        parse_property("safe: A[] T.a imply true").unwrap(),
        parse_property("w_done: A[] W.w1 imply y").unwrap(),
    ];
    check_against_brute_force(&model, &props, 20);
    println!("ACCEPTANCE 7 (verifier verdicts equal brute-force enumeration): PASS");
}

fn check_against_brute_force(
    model: &careflow_core::SystemModel,
    props: &[careflow_core::Property],
    horizon: u32,
) {
    let opts = VerifyOptions { horizon, ..VerifyOptions::for_model(model) };
    let results = verify(model, props, opts).unwrap();
    let brute = brute_force_violations(model, props, horizon);
    for (result, &violated) in results.iter().zip(&brute) {
        let expected = if violated { Verdict::Violated } else { Verdict::Holds };
        assert_eq!(result.verdict, expected, "property {}", result.property);
    }
    // every counterexample replays to its violating configuration
    for result in &results {
        if let Some(cx) = &result.counterexample {
            let script = careflow_core::Script::parse(&cx.to_script()).unwrap();
            let replay =
                simulate(model, Resolver::Script(script), (cx.len() - 1) as u32).unwrap();
            assert_eq!(replay.steps.last(), cx.last());
        }
    }
}

// keep the availability-flag invariant honest on the case-study schedule too
#[test]
fn availability_flags_follow_every_schedule_minute() {
    let schedule = parse_schedule(&fixture("delayed.sched")).unwrap();
    let demand = parse_demand("CT_machine AND CT_technician SEQ(10) radiologist").unwrap();
    let model = demand_only_system("CTscan", &demand, &schedule);
    let engine = Engine::new(&model).unwrap();
    let mut config = engine.initial().unwrap().remove(0).config;
    let resources = ["CT_machine", "CT_technician", "radiologist"];
    for minute in 0..=schedule.horizon() {
        // during the tick at minute m the flags are recomputed from curT=m;
        // the successor snapshot therefore reflects minute m
        let next = engine.successors(&config).unwrap().remove(0).config;
        for resource in resources {
            let idx = engine.var_index(&format!("RES.{resource}")).unwrap();
            assert_eq!(
                next.vars[idx],
                careflow_core::Value::Bool(schedule.is_available(resource, minute)),
                "{resource} at minute {minute}"
            );
        }
        config = next;
    }
}
