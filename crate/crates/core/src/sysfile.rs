//! The statechart system file format.
//!
//! One document describes one [`SystemModel`]: variable declarations, an
//! optional embedded resource schedule, and charts with states, entry
//! actions, and transitions written `src -> dst on event [guard] / actions`.
//! `//@RES:` lines attach resource-demand annotations to the following
//! transition, or to the enclosing state when written inside its block.
//! `#` and plain `//` comments are ignored. The exact grammar is documented
//! in `docs/FORMATS.md`; [`parse_system`] and [`format_system`] round-trip.

use std::fmt;

use thiserror::Error;

use crate::expr::{BinOp, Expr, Ty, Value};
use crate::model::{Action, State, Statechart, SystemModel, Transition, VariableDecl, CLOCK_VAR};
use crate::schedule::{AvailabilityMap, TimeInterval};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line, message: message.into() })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Newline,
    Ident(String),
    Int(i64),
    Keyword(&'static str),
    Annotation(String),
    Arrow,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Slash,
    Semi,
    Colon,
    Comma,
    Assign,
    EqEq,
    NotEq,
    LessEq,
    GreaterEq,
    Less,
    Greater,
    AndAnd,
    OrOr,
    Bang,
    Plus,
    Minus,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Newline => write!(f, "end of line"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(n) => write!(f, "`{n}`"),
            Tok::Keyword(k) => write!(f, "`{k}`"),
            Tok::Annotation(_) => write!(f, "annotation"),
            Tok::Eof => write!(f, "end of file"),
            other => {
                let s = match other {
                    Tok::Arrow => "->",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::LBracket => "[",
                    Tok::RBracket => "]",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::Slash => "/",
                    Tok::Semi => ";",
                    Tok::Colon => ":",
                    Tok::Comma => ",",
                    Tok::Assign => "=",
                    Tok::EqEq => "==",
                    Tok::NotEq => "!=",
                    Tok::LessEq => "<=",
                    Tok::GreaterEq => ">=",
                    Tok::Less => "<",
                    Tok::Greater => ">",
                    Tok::AndAnd => "&&",
                    Tok::OrOr => "||",
                    Tok::Bang => "!",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    _ => unreachable!(),
                };
                write!(f, "`{s}`")
            }
        }
    }
}

const KEYWORDS: &[&str] = &[
    "system", "var", "chart", "state", "entry", "initial", "rank", "schedule", "on", "raise",
    "choose", "free", "bool", "int", "true", "false", "imply",
];

pub(crate) struct Lexer<'a> {
    text: &'a [u8],
    pos: usize,
    line: usize,
    peeked: Option<(usize, Tok)>,
}

impl<'a> Lexer<'a> {
    pub(crate) fn new(text: &'a str) -> Lexer<'a> {
        Lexer { text: text.as_bytes(), pos: 0, line: 1, peeked: None }
    }

    pub(crate) fn line(&self) -> usize {
        self.line
    }

    pub(crate) fn peek(&mut self) -> Result<&Tok, ParseError> {
        if self.peeked.is_none() {
            let line = self.line;
            let tok = self.lex()?;
            self.peeked = Some((line, tok));
        }
        Ok(&self.peeked.as_ref().unwrap().1)
    }

    pub(crate) fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        if let Some(t) = self.peeked.take() {
            return Ok(t);
        }
        let line = self.line;
        Ok((line, self.lex()?))
    }

    fn lex(&mut self) -> Result<Tok, ParseError> {
        loop {
            // skip horizontal whitespace and comments
            while self.pos < self.text.len() {
                match self.text[self.pos] {
                    b' ' | b'\t' | b'\r' => self.pos += 1,
                    b'#' => self.skip_line(),
                    b'/' if self.text.get(self.pos + 1) == Some(&b'/') => {
                        if self.text.get(self.pos + 2) == Some(&b'@') {
                            return self.lex_annotation();
                        }
                        self.skip_line();
                    }
                    _ => break,
                }
            }
            if self.pos >= self.text.len() {
                return Ok(Tok::Eof);
            }
            let c = self.text[self.pos];
            if c == b'\n' {
                self.pos += 1;
                self.line += 1;
                return Ok(Tok::Newline);
            }
            if c.is_ascii_digit() {
                let start = self.pos;
                while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
                return match text.parse::<i64>() {
                    Ok(n) => Ok(Tok::Int(n)),
                    Err(_) => err(self.line, format!("integer literal `{text}` out of range")),
                };
            }
            if c.is_ascii_alphabetic() || c == b'_' {
                return Ok(self.lex_ident());
            }
            return self.lex_symbol();
        }
    }

    fn skip_line(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos] != b'\n' {
            self.pos += 1;
        }
    }

    fn lex_annotation(&mut self) -> Result<Tok, ParseError> {
        self.pos += 3; // consume `//@`
        let tag_start = self.pos;
        while self.pos < self.text.len()
            && (self.text[self.pos].is_ascii_alphanumeric() || self.text[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let tag = std::str::from_utf8(&self.text[tag_start..self.pos]).unwrap().to_string();
        if self.text.get(self.pos) != Some(&b':') {
            return err(self.line, format!("annotation `//@{tag}` is missing `:`"));
        }
        self.pos += 1;
        if tag != "RES" {
            return err(self.line, format!("unknown annotation tag `//@{tag}:`"));
        }
        let start = self.pos;
        self.skip_line();
        let payload = std::str::from_utf8(&self.text[start..self.pos]).unwrap().trim().to_string();
        Ok(Tok::Annotation(payload))
    }

    fn lex_ident(&mut self) -> Tok {
        let start = self.pos;
        loop {
            while self.pos < self.text.len()
                && (self.text[self.pos].is_ascii_alphanumeric() || self.text[self.pos] == b'_')
            {
                self.pos += 1;
            }
            // dotted segment, e.g. RES.CT_machine
            if self.text.get(self.pos) == Some(&b'.')
                && self
                    .text
                    .get(self.pos + 1)
                    .is_some_and(|c| c.is_ascii_alphabetic() || *c == b'_')
            {
                self.pos += 1;
                continue;
            }
            break;
        }
        let word = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
        if let Some(kw) = KEYWORDS.iter().find(|&&k| k == word) {
            Tok::Keyword(kw)
        } else {
            Tok::Ident(word.to_string())
        }
    }

    fn lex_symbol(&mut self) -> Result<Tok, ParseError> {
        let two = |lexer: &Lexer| {
            lexer
                .text
                .get(lexer.pos + 1)
                .copied()
        };
        let (tok, width) = match self.text[self.pos] {
            b'-' if two(self) == Some(b'>') => (Tok::Arrow, 2),
            b'=' if two(self) == Some(b'=') => (Tok::EqEq, 2),
            b'!' if two(self) == Some(b'=') => (Tok::NotEq, 2),
            b'<' if two(self) == Some(b'=') => (Tok::LessEq, 2),
            b'>' if two(self) == Some(b'=') => (Tok::GreaterEq, 2),
            b'&' if two(self) == Some(b'&') => (Tok::AndAnd, 2),
            b'|' if two(self) == Some(b'|') => (Tok::OrOr, 2),
            b'{' => (Tok::LBrace, 1),
            b'}' => (Tok::RBrace, 1),
            b'[' => (Tok::LBracket, 1),
            b']' => (Tok::RBracket, 1),
            b'(' => (Tok::LParen, 1),
            b')' => (Tok::RParen, 1),
            b'/' => (Tok::Slash, 1),
            b';' => (Tok::Semi, 1),
            b':' => (Tok::Colon, 1),
            b',' => (Tok::Comma, 1),
            b'=' => (Tok::Assign, 1),
            b'<' => (Tok::Less, 1),
            b'>' => (Tok::Greater, 1),
            b'!' => (Tok::Bang, 1),
            b'+' => (Tok::Plus, 1),
            b'-' => (Tok::Minus, 1),
            other => {
                return err(
                    self.line,
                    format!("unexpected character `{}`", char::from(other)),
                )
            }
        };
        self.pos += width;
        Ok(tok)
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
}

impl<'a> Parser<'a> {
    fn expect(&mut self, want: &Tok) -> Result<usize, ParseError> {
        let (line, tok) = self.lexer.next()?;
        if &tok == want {
            Ok(line)
        } else {
            err(line, format!("expected {want}, found {tok}"))
        }
    }

    fn expect_keyword(&mut self, kw: &'static str) -> Result<usize, ParseError> {
        self.expect(&Tok::Keyword(kw))
    }

    fn ident(&mut self, what: &str) -> Result<(usize, String), ParseError> {
        let (line, tok) = self.lexer.next()?;
        match tok {
            Tok::Ident(name) => Ok((line, name)),
            other => err(line, format!("expected {what}, found {other}")),
        }
    }

    /// A dot-free identifier (chart, state, and resource names).
    fn plain_ident(&mut self, what: &str) -> Result<String, ParseError> {
        let (line, name) = self.ident(what)?;
        if name.contains('.') {
            return err(line, format!("{what} `{name}` must not contain `.`"));
        }
        Ok(name)
    }

    fn int(&mut self, what: &str) -> Result<(usize, i64), ParseError> {
        let (line, tok) = self.lexer.next()?;
        match tok {
            Tok::Int(n) => Ok((line, n)),
            other => err(line, format!("expected {what}, found {other}")),
        }
    }

    fn skip_newlines(&mut self) -> Result<(), ParseError> {
        while matches!(self.lexer.peek()?, Tok::Newline) {
            self.lexer.next()?;
        }
        Ok(())
    }

    /// Consumes the end of a line item: newline, or lookahead `}`/EOF.
    fn end_item(&mut self) -> Result<(), ParseError> {
        match self.lexer.peek()? {
            Tok::Newline => {
                self.lexer.next()?;
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            other => {
                let msg = format!("expected end of line, found {other}");
                let line = self.lexer.line();
                err(line, msg)
            }
        }
    }

    fn system(&mut self) -> Result<SystemModel, ParseError> {
        let mut model = SystemModel::new("system");
        self.skip_newlines()?;
        if matches!(self.lexer.peek()?, Tok::Keyword("system")) {
            self.lexer.next()?;
            let (_, name) = self.ident("system name")?;
            model.name = name;
            self.end_item()?;
        }
        loop {
            self.skip_newlines()?;
            match self.lexer.peek()? {
                Tok::Eof => break,
                Tok::Keyword("var") => {
                    let decl = self.var_decl()?;
                    model.variables.push(decl);
                }
                Tok::Keyword("schedule") => {
                    let (line, _) = self.lexer.next()?;
                    if !model.schedule.is_empty() {
                        return err(line, "duplicate schedule block");
                    }
                    model.schedule = self.schedule_block()?;
                }
                Tok::Keyword("chart") => {
                    let chart = self.chart()?;
                    model.charts.push(chart);
                }
                other => {
                    let msg = format!("expected `var`, `schedule`, or `chart`, found {other}");
                    let line = self.lexer.line();
                    return err(line, msg);
                }
            }
        }
        Ok(model)
    }

    fn var_decl(&mut self) -> Result<VariableDecl, ParseError> {
        self.expect_keyword("var")?;
        let (_, name) = self.ident("variable name")?;
        self.expect(&Tok::Colon)?;
        let (line, tok) = self.lexer.next()?;
        let ty = match tok {
            Tok::Keyword("bool") => Ty::Bool,
            Tok::Keyword("int") => Ty::Int,
            other => return err(line, format!("expected `bool` or `int`, found {other}")),
        };
        self.expect(&Tok::Assign)?;
        let (line, tok) = self.lexer.next()?;
        let init = match tok {
            Tok::Keyword("true") => Value::Bool(true),
            Tok::Keyword("false") => Value::Bool(false),
            Tok::Int(n) => Value::Int(n),
            Tok::Minus => Value::Int(-self.int("integer literal")?.1),
            other => return err(line, format!("expected initial value, found {other}")),
        };
        if init.ty() != ty {
            return err(
                line,
                format!("variable `{name}` is declared {ty} but initialized with {}", init.ty()),
            );
        }
        let free = if matches!(self.lexer.peek()?, Tok::Keyword("free")) {
            self.lexer.next()?;
            true
        } else {
            false
        };
        self.end_item()?;
        Ok(VariableDecl { name, ty, init, free })
    }

    fn schedule_block(&mut self) -> Result<AvailabilityMap, ParseError> {
        self.expect(&Tok::LBrace)?;
        let mut entries: Vec<(String, Vec<TimeInterval>)> = Vec::new();
        loop {
            self.skip_newlines()?;
            if matches!(self.lexer.peek()?, Tok::RBrace) {
                self.lexer.next()?;
                break;
            }
            let resource = self.plain_ident("resource name")?;
            let line = self.expect(&Tok::Colon)?;
            if entries.iter().any(|(r, _)| r == &resource) {
                return err(line, format!("duplicate resource `{resource}`"));
            }
            let mut intervals = Vec::new();
            loop {
                self.expect(&Tok::LBracket)?;
                let (_, start) = self.int("interval start")?;
                self.expect(&Tok::Comma)?;
                let (line, end) = self.int("interval end")?;
                self.expect(&Tok::RBracket)?;
                let (start, end) = (u32::try_from(start), u32::try_from(end));
                let interval = start
                    .ok()
                    .zip(end.ok())
                    .and_then(|(s, e)| TimeInterval::new(s, e));
                match interval {
                    Some(iv) => intervals.push(iv),
                    None => return err(line, "interval start must be <= end, both >= 0"),
                }
                if matches!(self.lexer.peek()?, Tok::Semi) {
                    self.lexer.next()?;
                } else {
                    break;
                }
            }
            entries.push((resource, intervals));
            self.end_item()?;
        }
        self.end_item()?;
        AvailabilityMap::from_entries(entries)
            .map_err(|resource| ParseError {
                line: self.lexer.line(),
                message: format!("duplicate resource `{resource}`"),
            })
    }

    fn chart(&mut self) -> Result<Statechart, ParseError> {
        self.expect_keyword("chart")?;
        let name = self.plain_ident("chart name")?;
        self.expect_keyword("rank")?;
        let (line, rank) = self.int("execution rank")?;
        let rank = u32::try_from(rank)
            .map_err(|_| ParseError { line, message: "rank must be >= 0".into() })?;
        self.expect(&Tok::LBrace)?;
        let mut chart = Statechart {
            name,
            rank,
            initial: String::new(),
            states: Vec::new(),
            transitions: Vec::new(),
        };
        let mut pending: Vec<String> = Vec::new();
        loop {
            self.skip_newlines()?;
            match self.lexer.peek()? {
                Tok::RBrace => {
                    self.lexer.next()?;
                    self.end_item()?;
                    break;
                }
                Tok::Annotation(_) => {
                    let (_, tok) = self.lexer.next()?;
                    if let Tok::Annotation(payload) = tok {
                        pending.push(payload);
                    }
                    self.end_item()?;
                }
                Tok::Keyword("initial") => {
                    let (line, _) = self.lexer.next()?;
                    if !chart.initial.is_empty() {
                        return err(line, "duplicate `initial` declaration");
                    }
                    chart.initial = self.plain_ident("initial state name")?;
                    self.end_item()?;
                }
                Tok::Keyword("state") => {
                    if !pending.is_empty() {
                        let line = self.lexer.line();
                        return err(
                            line,
                            "dangling annotation: state annotations go inside the state block",
                        );
                    }
                    let state = self.state()?;
                    chart.states.push(state);
                }
                Tok::Ident(_) => {
                    let mut t = self.transition()?;
                    t.annotations = std::mem::take(&mut pending);
                    chart.transitions.push(t);
                }
                other => {
                    let msg = format!(
                        "expected `initial`, `state`, a transition, or `}}`, found {other}"
                    );
                    let line = self.lexer.line();
                    return err(line, msg);
                }
            }
        }
        if chart.initial.is_empty() {
            return err(self.lexer.line(), format!("chart `{}` has no `initial` declaration", chart.name));
        }
        Ok(chart)
    }

    fn state(&mut self) -> Result<State, ParseError> {
        self.expect_keyword("state")?;
        let name = self.plain_ident("state name")?;
        self.expect(&Tok::LBrace)?;
        let mut state = State::new(name);
        loop {
            self.skip_newlines()?;
            match self.lexer.peek()? {
                Tok::RBrace => {
                    self.lexer.next()?;
                    self.end_item()?;
                    break;
                }
                Tok::Annotation(_) => {
                    let (_, tok) = self.lexer.next()?;
                    if let Tok::Annotation(payload) = tok {
                        state.annotations.push(payload);
                    }
                    self.end_item()?;
                }
                Tok::Keyword("entry") => {
                    self.lexer.next()?;
                    state.entry.push(self.action()?);
                    self.end_item()?;
                }
                other => {
                    let msg = format!("expected `entry`, annotation, or `}}`, found {other}");
                    let line = self.lexer.line();
                    return err(line, msg);
                }
            }
        }
        Ok(state)
    }

    fn transition(&mut self) -> Result<Transition, ParseError> {
        let source = self.plain_ident("source state")?;
        self.expect(&Tok::Arrow)?;
        let target = self.plain_ident("target state")?;
        let mut t = Transition::new(source, target, Expr::Bool(true));
        if matches!(self.lexer.peek()?, Tok::Keyword("on")) {
            self.lexer.next()?;
            t.trigger = Some(self.plain_ident("trigger event")?);
        }
        if matches!(self.lexer.peek()?, Tok::LBracket) {
            self.lexer.next()?;
            t.guard = self.expr()?;
            self.expect(&Tok::RBracket)?;
        }
        if matches!(self.lexer.peek()?, Tok::Slash) {
            self.lexer.next()?;
            loop {
                t.actions.push(self.action()?);
                if matches!(self.lexer.peek()?, Tok::Semi) {
                    self.lexer.next()?;
                } else {
                    break;
                }
            }
        }
        self.end_item()?;
        Ok(t)
    }

    fn action(&mut self) -> Result<Action, ParseError> {
        match self.lexer.peek()? {
            Tok::Keyword("raise") => {
                self.lexer.next()?;
                let event = self.plain_ident("event name")?;
                Ok(Action::Raise { event })
            }
            Tok::Keyword("choose") => {
                self.lexer.next()?;
                let (_, var) = self.ident("variable name")?;
                Ok(Action::Choose { var })
            }
            _ => {
                let (_, var) = self.ident("assignment target")?;
                self.expect(&Tok::Assign)?;
                let value = self.expr()?;
                if value == Expr::Var(CLOCK_VAR.to_string()) {
                    Ok(Action::RecordTime { var })
                } else {
                    Ok(Action::Assign { var, value })
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.and_expr()?;
        while matches!(self.lexer.peek()?, Tok::OrOr) {
            self.lexer.next()?;
            lhs = Expr::or(lhs, self.and_expr()?);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.cmp_expr()?;
        while matches!(self.lexer.peek()?, Tok::AndAnd) {
            self.lexer.next()?;
            lhs = Expr::and(lhs, self.cmp_expr()?);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.add_expr()?;
        loop {
            let op = match self.lexer.peek()? {
                Tok::LessEq => BinOp::Le,
                Tok::GreaterEq => BinOp::Ge,
                Tok::Less => BinOp::Lt,
                Tok::Greater => BinOp::Gt,
                Tok::EqEq => BinOp::Eq,
                Tok::NotEq => BinOp::Ne,
                _ => break,
            };
            self.lexer.next()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.add_expr()?));
        }
        Ok(lhs)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let op = match self.lexer.peek()? {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.lexer.next()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.unary_expr()?));
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.lexer.peek()?, Tok::Bang) {
            self.lexer.next()?;
            return Ok(Expr::Not(Box::new(self.unary_expr()?)));
        }
        self.atom_expr()
    }

    fn atom_expr(&mut self) -> Result<Expr, ParseError> {
        let (line, tok) = self.lexer.next()?;
        match tok {
            Tok::Int(n) => Ok(Expr::Int(n)),
            Tok::Keyword("true") => Ok(Expr::Bool(true)),
            Tok::Keyword("false") => Ok(Expr::Bool(false)),
            Tok::Ident(name) => Ok(Expr::Var(name)),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(inner)
            }
            other => err(line, format!("expected an expression, found {other}")),
        }
    }
}

/// Parses a system file.
pub fn parse_system(text: &str) -> Result<SystemModel, ParseError> {
    Parser { lexer: Lexer::new(text) }.system()
}

/// Parses a bare guard/condition expression.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { lexer: Lexer::new(text) };
    let e = p.expr()?;
    let (line, tok) = p.lexer.next()?;
    match tok {
        Tok::Eof | Tok::Newline => Ok(e),
        other => err(line, format!("trailing input after expression: {other}")),
    }
}

pub(crate) fn parse_expr_tokens(lexer: &mut Lexer) -> Result<Expr, ParseError> {
    let mut p = Parser { lexer: Lexer::new("") };
    std::mem::swap(&mut p.lexer, lexer);
    let result = p.expr();
    std::mem::swap(&mut p.lexer, lexer);
    result
}

/// Canonical text form; `parse_system(format_system(m))` equals `m`.
pub fn format_system(model: &SystemModel) -> String {
    let mut out = String::new();
    out.push_str(&format!("system {}\n", model.name));
    if !model.variables.is_empty() {
        out.push('\n');
        for v in &model.variables {
            out.push_str(&format!("var {} : {} = {}", v.name, v.ty, v.init));
            if v.free {
                out.push_str(" free");
            }
            out.push('\n');
        }
    }
    if !model.schedule.is_empty() {
        out.push_str("\nschedule {\n");
        for (resource, intervals) in model.schedule.iter() {
            out.push_str("  ");
            out.push_str(resource);
            out.push(':');
            for (i, iv) in intervals.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                out.push_str(&iv.to_string());
            }
            out.push('\n');
        }
        out.push_str("}\n");
    }
    for chart in &model.charts {
        out.push('\n');
        out.push_str(&format_chart(chart));
    }
    out
}

fn format_chart(chart: &Statechart) -> String {
    let mut out = String::new();
    out.push_str(&format!("chart {} rank {} {{\n", chart.name, chart.rank));
    out.push_str(&format!("  initial {}\n", chart.initial));
    for state in &chart.states {
        if state.entry.is_empty() && state.annotations.is_empty() {
            out.push_str(&format!("  state {} {{ }}\n", state.name));
            continue;
        }
        out.push_str(&format!("  state {} {{\n", state.name));
        for payload in &state.annotations {
            out.push_str(&format!("    //@RES: {payload}\n"));
        }
        for action in &state.entry {
            out.push_str(&format!("    entry {action}\n"));
        }
        out.push_str("  }\n");
    }
    for t in &chart.transitions {
        for payload in &t.annotations {
            out.push_str(&format!("  //@RES: {payload}\n"));
        }
        out.push_str(&format!("  {} -> {}", t.source, t.target));
        if let Some(trigger) = &t.trigger {
            out.push_str(&format!(" on {trigger}"));
        }
        if t.guard != Expr::Bool(true) {
            out.push_str(&format!(" [{}]", t.guard));
        }
        if !t.actions.is_empty() {
            let actions: Vec<String> = t.actions.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!(" / {}", actions.join("; ")));
        }
        out.push('\n');
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    const SAMPLE: &str = r#"
# a small system
system demo

var curT : int = 0
var tpaT : int = 0
var orderCT : bool = false free
var RES.CTscan : bool = false

schedule {
  CT_machine:[10,25];[35,40]
  radiologist:[0,15];[30,40]
}

chart Stroke rank 3 {
  initial Arrival
  state Arrival { }
  state CT {
    //@RES: (CTscan, CT_machine AND CT_technician SEQ(10) radiologist)
    entry raise CTscan
    entry choose orderCT
  }
  state tPAcheck {
    entry tpaT = curT
  }
  Arrival -> CT [orderCT && RES.CTscan]
  // a plain comment
  //@RES: (givetPA, tPA AND nurse)
  CT -> tPAcheck [tpaT - 0 <= 180] / raise givetPA; tpaT = tpaT + 1
}
"#;

    #[test]
    fn parses_sample_system() {
        let model = parse_system(SAMPLE).unwrap();
        assert_eq!(model.name, "demo");
        assert_eq!(model.variables.len(), 4);
        assert!(model.variables[2].free);
        assert_eq!(model.schedule.intervals("CT_machine").len(), 2);
        let chart = &model.charts[0];
        assert_eq!(chart.rank, 3);
        assert_eq!(chart.initial, "Arrival");
        assert_eq!(chart.states.len(), 3);
        assert_eq!(chart.states[1].annotations.len(), 1);
        assert_eq!(
            chart.states[1].entry[0],
            Action::Raise { event: "CTscan".into() }
        );
        assert_eq!(
            chart.states[2].entry[0],
            Action::RecordTime { var: "tpaT".into() }
        );
        let t = &chart.transitions[1];
        assert_eq!(t.annotations, vec!["(givetPA, tPA AND nurse)".to_string()]);
        assert_eq!(t.actions.len(), 2);
        assert!(matches!(t.actions[1], Action::Assign { .. }));
    }

    #[test]
    fn round_trips_structurally() {
        let model = parse_system(SAMPLE).unwrap();
        let printed = format_system(&model);
        let reparsed = parse_system(&printed).unwrap();
        assert_eq!(reparsed, model);
        // and printing is a fixpoint
        assert_eq!(format_system(&reparsed), printed);
    }

    #[test]
    fn guard_defaults_to_true() {
        let model = parse_system("chart C rank 0 {\n initial a\n state a { }\n state b { }\n a -> b\n}\n").unwrap();
        assert_eq!(model.charts[0].transitions[0].guard, Expr::Bool(true));
        assert!(validate_model(&model).is_empty());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_system("var x : bool = 7\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_system("\n\nchart C rank 0 {\n  initial a\n  state a { }\n  a => a\n}\n")
            .unwrap_err();
        assert_eq!(e.line, 6);
        let e = parse_system("//@NOTES: hello\n").unwrap_err();
        assert!(e.message.contains("unknown annotation tag"));
    }

    #[test]
    fn expression_precedence() {
        let e = parse_expr("a || b && c").unwrap();
        assert_eq!(e, Expr::or(Expr::var("a"), Expr::and(Expr::var("b"), Expr::var("c"))));
        let e = parse_expr("180 - (curT - onsetT) >= 0 && !hemorrhage").unwrap();
        assert_eq!(e.to_string(), "180 - (curT - onsetT) >= 0 && !hemorrhage");
        let e = parse_expr("(a || b) && c").unwrap();
        assert_eq!(e.to_string(), "(a || b) && c");
    }
}
