//! Deterministic single-path simulation.
//!
//! Nondeterminism (havoc values, picks among simultaneously enabled
//! transitions) is resolved either by a choice script or by a seeded RNG.
//! The same resolver input always yields the same trace, and every choice
//! taken is recorded in the trace, so runs are reproducible and verifier
//! counterexamples replay exactly.

use std::collections::{HashMap, VecDeque};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exec::{ChoiceResolver, Engine, ExecError};
use crate::model::SystemModel;
use crate::sysfile::ParseError;
use crate::trace::Trace;

/// A choice script: per-variable queues of havoc values and per-chart queues
/// of transition picks, consumed first-in-first-out. The text form is one
/// `choose <var> = <bool>` or `pick <chart> = <index>` per line, with `#`
/// comments; [`Trace::to_script`] emits it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Script {
    chooses: HashMap<String, VecDeque<bool>>,
    picks: HashMap<String, VecDeque<usize>>,
}

impl Script {
    pub fn new() -> Script {
        Script::default()
    }

    pub fn push_choose(&mut self, var: impl Into<String>, value: bool) {
        self.chooses.entry(var.into()).or_default().push_back(value);
    }

    pub fn push_pick(&mut self, chart: impl Into<String>, index: usize) {
        self.picks.entry(chart.into()).or_default().push_back(index);
    }

    pub fn parse(text: &str) -> Result<Script, ParseError> {
        let mut script = Script::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| ParseError { line: line_no, message };
            let (kind, rest) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| err("expected `choose <var> = <bool>` or `pick <chart> = <index>`".into()))?;
            let (target, value) = rest
                .split_once('=')
                .ok_or_else(|| err(format!("missing `=` in `{line}`")))?;
            let (target, value) = (target.trim(), value.trim());
            match kind {
                "choose" => {
                    let value = match value {
                        "true" => true,
                        "false" => false,
                        other => return Err(err(format!("bad boolean `{other}`"))),
                    };
                    script.push_choose(target, value);
                }
                "pick" => {
                    let index: usize = value
                        .parse()
                        .map_err(|_| err(format!("bad pick index `{value}`")))?;
                    script.push_pick(target, index);
                }
                other => return Err(err(format!("unknown directive `{other}`"))),
            }
        }
        Ok(script)
    }
}

impl ChoiceResolver for Script {
    fn choose(&mut self, minute: u32, chart: &str, var: &str) -> Result<bool, ExecError> {
        self.chooses
            .get_mut(var)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| ExecError::ScriptExhausted {
                minute,
                point: format!("choose {var} (chart `{chart}`)"),
            })
    }

    fn pick(&mut self, minute: u32, chart: &str, enabled: usize) -> Result<usize, ExecError> {
        let index = self
            .picks
            .get_mut(chart)
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| ExecError::ScriptExhausted {
                minute,
                point: format!("pick among {enabled} transitions of chart `{chart}`"),
            })?;
        if index >= enabled {
            return Err(ExecError::ScriptExhausted {
                minute,
                point: format!(
                    "pick index {index} out of range for {enabled} enabled transitions of `{chart}`"
                ),
            });
        }
        Ok(index)
    }
}

/// Seeded pseudo-random resolver; the same seed always takes the same path.
#[derive(Debug, Clone)]
pub struct SeededResolver {
    rng: ChaCha8Rng,
}

impl SeededResolver {
    pub fn new(seed: u64) -> SeededResolver {
        SeededResolver { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl ChoiceResolver for SeededResolver {
    fn choose(&mut self, _minute: u32, _chart: &str, _var: &str) -> Result<bool, ExecError> {
        Ok(self.rng.gen())
    }

    fn pick(&mut self, _minute: u32, _chart: &str, enabled: usize) -> Result<usize, ExecError> {
        Ok(self.rng.gen_range(0..enabled))
    }
}

/// How to resolve choices during simulation.
pub enum Resolver {
    Seed(u64),
    Script(Script),
}

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Runs the model for `max_ticks` ticks (the trace has `max_ticks + 1`
/// entries; zero ticks yields just the initial configuration).
pub fn simulate(
    model: &SystemModel,
    resolver: Resolver,
    max_ticks: u32,
) -> Result<Trace, SimulateError> {
    let engine = Engine::new(model)?;
    let mut boxed: Box<dyn ChoiceResolver> = match resolver {
        Resolver::Seed(seed) => Box::new(SeededResolver::new(seed)),
        Resolver::Script(script) => Box::new(script),
    };
    let mut path = vec![engine.resolve_initial(boxed.as_mut())?];
    for _ in 0..max_ticks {
        let next = engine.resolve_step(&path.last().unwrap().config, boxed.as_mut())?;
        path.push(next);
    }
    Ok(Trace::from_path(&engine, &path))
}
