//! Resource-demand algebra: `AND` (concurrent), `OR` (alternative), and
//! `SEQ(t)` (sequence with a delay of at least `t` minutes), with operator
//! precedence `AND > OR > SEQ(t)` and left associativity throughout.
//!
//! The grammar has no parentheses, so a `SEQ` can never occur beneath an
//! `AND`/`OR`; a demand is a chain of boolean stages separated by delays.

use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::schedule::AvailabilityMap;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Demand {
    Resource(String),
    And(Box<Demand>, Box<Demand>),
    Or(Box<Demand>, Box<Demand>),
    /// `lhs SEQ(delay) rhs`: `rhs` is needed at least `delay` minutes after
    /// `lhs` was satisfied.
    Seq(Box<Demand>, u32, Box<Demand>),
}

impl Demand {
    pub fn resource(name: impl Into<String>) -> Demand {
        Demand::Resource(name.into())
    }

    pub fn and(lhs: Demand, rhs: Demand) -> Demand {
        Demand::And(Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Demand, rhs: Demand) -> Demand {
        Demand::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn seq(lhs: Demand, delay: u32, rhs: Demand) -> Demand {
        Demand::Seq(Box::new(lhs), delay, Box::new(rhs))
    }

    /// Resource names in first-occurrence order.
    pub fn resources(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_resources(&mut out);
        out
    }

    fn collect_resources<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Demand::Resource(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Demand::And(l, r) | Demand::Or(l, r) | Demand::Seq(l, _, r) => {
                l.collect_resources(out);
                r.collect_resources(out);
            }
        }
    }
}

impl fmt::Display for Demand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Demand::Resource(name) => write!(f, "{name}"),
            Demand::And(l, r) => write!(f, "{l} AND {r}"),
            Demand::Or(l, r) => write!(f, "{l} OR {r}"),
            Demand::Seq(l, t, r) => write!(f, "{l} SEQ({t}) {r}"),
        }
    }
}

/// Ordered map from procedure name (a guideline event) to its demand.
pub type DemandMap = IndexMap<String, Demand>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DemandError {
    #[error("syntax error at offset {offset}: {reason}")]
    Syntax { offset: usize, reason: String },
    #[error("negative delay at offset {offset}: SEQ delays must be >= 0")]
    NegativeDelay { offset: usize },
    #[error("line {line}: {source}")]
    InLine {
        line: usize,
        #[source]
        source: Box<DemandError>,
    },
    #[error("line {line}: duplicate procedure `{procedure}`")]
    DuplicateProcedure { line: usize, procedure: String },
    #[error("line {line}: expected `procedure : demand`")]
    MalformedMapLine { line: usize },
    #[error("`{0}` nests SEQ beneath AND/OR, which has no staged form")]
    SeqUnderBoolean(String),
}

struct DemandLexer<'a> {
    text: &'a str,
    pos: usize,
}

#[derive(Debug, PartialEq)]
enum DemandTok<'a> {
    Ident(&'a str),
    And,
    Or,
    /// `SEQ(<delay>)`
    Seq(u32),
    End,
}

impl<'a> DemandLexer<'a> {
    fn new(text: &'a str) -> DemandLexer<'a> {
        DemandLexer { text, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len()
            && self.text.as_bytes()[self.pos].is_ascii_whitespace()
        {
            self.pos += 1;
        }
    }

    fn next(&mut self) -> Result<(usize, DemandTok<'a>), DemandError> {
        self.skip_ws();
        let start = self.pos;
        let bytes = self.text.as_bytes();
        if start >= bytes.len() {
            return Ok((start, DemandTok::End));
        }
        let c = bytes[start];
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len()
                && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_')
            {
                end += 1;
            }
            self.pos = end;
            let word = &self.text[start..end];
            let tok = match word {
                "AND" => DemandTok::And,
                "OR" => DemandTok::Or,
                "SEQ" => DemandTok::Seq(self.seq_delay(start)?),
                _ => DemandTok::Ident(word),
            };
            return Ok((start, tok));
        }
        Err(DemandError::Syntax {
            offset: start,
            reason: format!("unexpected character `{}`", &self.text[start..start + 1]),
        })
    }

    fn seq_delay(&mut self, kw_offset: usize) -> Result<u32, DemandError> {
        self.skip_ws();
        let bytes = self.text.as_bytes();
        if self.pos >= bytes.len() || bytes[self.pos] != b'(' {
            return Err(DemandError::Syntax {
                offset: kw_offset,
                reason: "SEQ must be written `SEQ(<minutes>)`".into(),
            });
        }
        self.pos += 1;
        self.skip_ws();
        let num_start = self.pos;
        if self.pos < bytes.len() && bytes[self.pos] == b'-' {
            return Err(DemandError::NegativeDelay { offset: self.pos });
        }
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == num_start {
            return Err(DemandError::Syntax {
                offset: num_start,
                reason: "expected delay minutes inside SEQ(...)".into(),
            });
        }
        let delay: u32 = self.text[num_start..self.pos].parse().map_err(|_| {
            DemandError::Syntax {
                offset: num_start,
                reason: "delay out of range".into(),
            }
        })?;
        self.skip_ws();
        if self.pos >= bytes.len() || bytes[self.pos] != b')' {
            return Err(DemandError::Syntax {
                offset: self.pos,
                reason: "unterminated SEQ delay, expected `)`".into(),
            });
        }
        self.pos += 1;
        Ok(delay)
    }
}

/// Parses a demand expression. Precedence `AND > OR > SEQ(t)`, all operators
/// left-associative, whitespace-insensitive.
pub fn parse_demand(text: &str) -> Result<Demand, DemandError> {
    let mut lexer = DemandLexer::new(text);
    let (demand, (offset, tok)) = parse_seq(&mut lexer)?;
    match tok {
        DemandTok::End => Ok(demand),
        _ => Err(DemandError::Syntax {
            offset,
            reason: "trailing input after demand expression".into(),
        }),
    }
}

type Lookahead<'a> = (usize, DemandTok<'a>);

fn parse_seq<'a>(lexer: &mut DemandLexer<'a>) -> Result<(Demand, Lookahead<'a>), DemandError> {
    let (mut acc, mut la) = parse_or(lexer)?;
    while let DemandTok::Seq(delay) = la.1 {
        let (rhs, next) = parse_or(lexer)?;
        acc = Demand::seq(acc, delay, rhs);
        la = next;
    }
    Ok((acc, la))
}

fn parse_or<'a>(lexer: &mut DemandLexer<'a>) -> Result<(Demand, Lookahead<'a>), DemandError> {
    let (mut acc, mut la) = parse_and(lexer)?;
    while la.1 == DemandTok::Or {
        let (rhs, next) = parse_and(lexer)?;
        acc = Demand::or(acc, rhs);
        la = next;
    }
    Ok((acc, la))
}

fn parse_and<'a>(lexer: &mut DemandLexer<'a>) -> Result<(Demand, Lookahead<'a>), DemandError> {
    let (mut acc, mut la) = parse_atom(lexer)?;
    while la.1 == DemandTok::And {
        let (rhs, next) = parse_atom(lexer)?;
        acc = Demand::and(acc, rhs);
        la = next;
    }
    Ok((acc, la))
}

fn parse_atom<'a>(lexer: &mut DemandLexer<'a>) -> Result<(Demand, Lookahead<'a>), DemandError> {
    let (offset, tok) = lexer.next()?;
    match tok {
        DemandTok::Ident(name) => Ok((Demand::resource(name), lexer.next()?)),
        _ => Err(DemandError::Syntax {
            offset,
            reason: "expected a resource name".into(),
        }),
    }
}

/// Canonical text form; `parse_demand(format_demand(d))` is structurally `d`
/// for every tree expressible in the grammar.
pub fn format_demand(demand: &Demand) -> String {
    demand.to_string()
}

/// Parses a demand-map file: `procedure : demand` lines, `#` comments and
/// blank lines ignored. Entries keep file order.
pub fn parse_demand_map(text: &str) -> Result<DemandMap, DemandError> {
    let mut map = DemandMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, expr) = line
            .split_once(':')
            .ok_or(DemandError::MalformedMapLine { line: line_no })?;
        let name = name.trim();
        if name.is_empty() || !is_identifier(name) {
            return Err(DemandError::MalformedMapLine { line: line_no });
        }
        if map.contains_key(name) {
            return Err(DemandError::DuplicateProcedure {
                line: line_no,
                procedure: name.to_string(),
            });
        }
        let demand = parse_demand(expr).map_err(|source| DemandError::InLine {
            line: line_no,
            source: Box::new(source),
        })?;
        map.insert(name.to_string(), demand);
    }
    Ok(map)
}

pub(crate) fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Canonical demand-map file text.
pub fn format_demand_map(map: &DemandMap) -> String {
    let mut out = String::new();
    for (name, demand) in map {
        out.push_str(name);
        out.push_str(": ");
        out.push_str(&demand.to_string());
        out.push('\n');
    }
    out
}

/// One boolean stage of a demand: the `AND`/`OR` subtree between `SEQ`
/// operators, and the minimum delay since the previous stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub expr: Demand,
    pub delay: u32,
}

/// Splits a demand along its `SEQ` spine. Stage 1 always has delay 0; stage
/// `k`'s delay is the `SEQ` delay separating it from stage `k-1`. Fails on
/// trees with a `SEQ` nested beneath `AND`/`OR` (unreachable via the grammar,
/// possible for hand-built trees).
pub fn stages(demand: &Demand) -> Result<Vec<Stage>, DemandError> {
    fn check_boolean(d: &Demand) -> Result<(), DemandError> {
        match d {
            Demand::Resource(_) => Ok(()),
            Demand::And(l, r) | Demand::Or(l, r) => {
                check_boolean(l)?;
                check_boolean(r)
            }
            Demand::Seq(..) => Err(DemandError::SeqUnderBoolean(d.to_string())),
        }
    }
    fn walk(d: &Demand, out: &mut Vec<Stage>) -> Result<(), DemandError> {
        match d {
            Demand::Seq(l, delay, r) => {
                walk(l, out)?;
                check_boolean(r)?;
                out.push(Stage { expr: (**r).clone(), delay: *delay });
                Ok(())
            }
            other => {
                check_boolean(other)?;
                out.push(Stage { expr: other.clone(), delay: 0 });
                Ok(())
            }
        }
    }
    let mut out = Vec::new();
    walk(demand, &mut out)?;
    out[0].delay = 0;
    Ok(out)
}

fn stage_holds(expr: &Demand, schedule: &AvailabilityMap, minute: u32) -> bool {
    match expr {
        Demand::Resource(name) => schedule.is_available(name, minute),
        Demand::And(l, r) => {
            stage_holds(l, schedule, minute) && stage_holds(r, schedule, minute)
        }
        Demand::Or(l, r) => stage_holds(l, schedule, minute) || stage_holds(r, schedule, minute),
        Demand::Seq(..) => unreachable!("stages() rejects SEQ under AND/OR"),
    }
}

/// Minute-scan oracle for the earliest time a demand can be fully satisfied.
///
/// Stage 1 is satisfied at the earliest minute `>= start` where its expression
/// holds under the schedule; stage `k` at the earliest minute
/// `>= sat(k-1) + max(delay_k, 1)` where its expression holds. The extra
/// one-minute floor mirrors the one-transition-per-tick rule of the demand
/// statecharts this oracle is checked against. Returns the last stage's
/// satisfaction minute, or `None` when unsatisfiable within the schedule
/// horizon.
pub fn earliest_enable(
    demand: &Demand,
    schedule: &AvailabilityMap,
    start: u32,
) -> Result<Option<u32>, DemandError> {
    let stages = stages(demand)?;
    let horizon = schedule.horizon();
    let mut minute = start;
    for (i, stage) in stages.iter().enumerate() {
        if i > 0 {
            minute = minute.saturating_add(stage.delay.max(1));
        }
        loop {
            if minute > horizon {
                return Ok(None);
            }
            if stage_holds(&stage.expr, schedule, minute) {
                break;
            }
            minute += 1;
        }
    }
    Ok(Some(minute))
}

/// The CT-scan demand of the stroke scenario.
#[cfg(test)]
pub(crate) fn ct_demand() -> Demand {
    parse_demand("CT_machine AND CT_technician SEQ(10) radiologist").unwrap()
}
