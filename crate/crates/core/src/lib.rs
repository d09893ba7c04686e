//! Modeling and verification of clinical-guideline statecharts under
//! resource availability constraints.
//!
//! The pipeline has four stages:
//!
//! 1. **annotate**: attach resource-demand annotations to every state and
//!    transition of a guideline chart that raises a procedure listed in a
//!    demand map ([`annotate`]).
//! 2. **synthesize**: build the resource statecharts: per-procedure demand
//!    charts that latch a `RES.<procedure>` flag when the demand's stages are
//!    satisfied, and an availability chart refreshing `RES.<resource>` flags
//!    from an interval schedule every minute ([`synth`]).
//! 3. **integrate**: strengthen annotated guideline guards with the
//!    procedure flags and assemble everything into one ranked system
//!    ([`integrate`]).
//! 4. **verify / simulate**: explore the discrete-time step relation to
//!    check `A[] Chart.State imply <cond>` invariants with replayable
//!    counterexamples, or follow one scripted/seeded path ([`verify`],
//!    [`simulate`]).
//!
//! File formats (system files, demand maps, schedules, properties, traces,
//! and choice scripts) are documented in `docs/FORMATS.md`.

pub mod annotate;
pub mod demand;
pub mod exec;
pub mod expr;
pub mod integrate;
pub mod model;
pub mod schedule;
pub mod simulate;
pub mod synth;
pub mod sysfile;
pub mod trace;
pub mod verify;

pub use annotate::{annotate, collect_procedures};
pub use demand::{
    earliest_enable, format_demand, format_demand_map, parse_demand, parse_demand_map, Demand,
    DemandMap,
};
pub use exec::{initial_configurations, step, Engine};
pub use expr::{eval_expr, Expr, Ty, Value};
pub use integrate::{assemble, assemble_with, integrate, AssembleOptions, Assembly};
pub use model::{
    validate_model, Action, Configuration, Diagnostic, State, Statechart, SystemModel, Transition,
    VariableDecl,
};
pub use schedule::{format_schedule, parse_schedule, AvailabilityMap, TimeInterval};
pub use simulate::{simulate, Resolver, Script};
pub use synth::{
    declare_vars, make_timer, synthesize_availability_chart, synthesize_demand_chart,
};
pub use sysfile::{format_system, parse_system};
pub use trace::{Trace, TraceStep};
pub use verify::{
    parse_property, parse_property_file, verify, Property, VerificationResult, Verdict,
    VerifyOptions,
};
