//! Typed integer/boolean expressions used in guards, actions, and properties.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

/// Runtime value of a model variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn ty(&self) -> Ty {
        match self {
            Value::Int(_) => Ty::Int,
            Value::Bool(_) => Ty::Bool,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Variable type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Int,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Bool => write!(f, "bool"),
            Ty::Int => write!(f, "int"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength for printing and parsing. Higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }
}

/// Expression tree over declared variables.
///
/// Comparisons and arithmetic are integer-only; `&&`, `||`, `!` are
/// boolean-only. Well-typedness is established by [`crate::model::validate_model`],
/// after which evaluation cannot fail.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Int(i64),
    Bool(bool),
    Var(String),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn and(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(BinOp::And, Box::new(lhs), Box::new(rhs))
    }

    pub fn or(lhs: Expr, rhs: Expr) -> Expr {
        Expr::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => 6,
            Expr::Not(_) => 5,
            Expr::Bin(op, _, _) => op.precedence(),
        }
    }

    /// Variables referenced anywhere in the expression, in first-use order.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Int(_) | Expr::Bool(_) => {}
            Expr::Var(name) => {
                if !out.contains(&name.as_str()) {
                    out.push(name);
                }
            }
            Expr::Not(inner) => inner.collect_vars(out),
            Expr::Bin(_, lhs, rhs) => {
                lhs.collect_vars(out);
                rhs.collect_vars(out);
            }
        }
    }

    /// Splits a `&&`-chain into its conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        fn walk<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
            match e {
                Expr::Bin(BinOp::And, lhs, rhs) => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Int(n) => write!(f, "{n}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Not(inner) => {
                write!(f, "!")?;
                child(f, inner, inner.precedence() < 5)
            }
            Expr::Bin(op, lhs, rhs) => {
                let p = op.precedence();
                child(f, lhs, lhs.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative: same-precedence right child keeps parens
                child(f, rhs, rhs.precedence() <= p)
            }
        }
    }
}

/// Name resolution for evaluation.
pub trait Scope {
    fn get(&self, name: &str) -> Option<Value>;
}

impl Scope for BTreeMap<String, Value> {
    fn get(&self, name: &str) -> Option<Value> {
        BTreeMap::get(self, name).copied()
    }
}

impl Scope for HashMap<String, Value> {
    fn get(&self, name: &str) -> Option<Value> {
        HashMap::get(self, name).copied()
    }
}

impl<S: Scope> Scope for &S {
    fn get(&self, name: &str) -> Option<Value> {
        (**self).get(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("type mismatch in `{context}`: expected {expected}, got {got}")]
    Type {
        context: String,
        expected: Ty,
        got: Ty,
    },
}

fn type_err(context: &Expr, expected: Ty, got: Ty) -> EvalError {
    EvalError::Type {
        context: context.to_string(),
        expected,
        got,
    }
}

/// Evaluates an expression. Strict: all operands are evaluated, so type and
/// binding errors surface regardless of short-circuit value.
pub fn eval_expr(expr: &Expr, scope: &impl Scope) -> Result<Value, EvalError> {
    match expr {
        Expr::Int(n) => Ok(Value::Int(*n)),
        Expr::Bool(b) => Ok(Value::Bool(*b)),
        Expr::Var(name) => scope
            .get(name)
            .ok_or_else(|| EvalError::Unbound(name.clone())),
        Expr::Not(inner) => match eval_expr(inner, scope)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            v => Err(type_err(inner, Ty::Bool, v.ty())),
        },
        Expr::Bin(op, lhs, rhs) => {
            let l = eval_expr(lhs, scope)?;
            let r = eval_expr(rhs, scope)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
                | BinOp::Eq | BinOp::Ne => {
                    let (a, b) = match (l, r) {
                        (Value::Int(a), Value::Int(b)) => (a, b),
                        (Value::Int(_), v) => return Err(type_err(rhs, Ty::Int, v.ty())),
                        (v, _) => return Err(type_err(lhs, Ty::Int, v.ty())),
                    };
                    Ok(match op {
                        BinOp::Add => Value::Int(a + b),
                        BinOp::Sub => Value::Int(a - b),
                        BinOp::Lt => Value::Bool(a < b),
                        BinOp::Le => Value::Bool(a <= b),
                        BinOp::Gt => Value::Bool(a > b),
                        BinOp::Ge => Value::Bool(a >= b),
                        BinOp::Eq => Value::Bool(a == b),
                        BinOp::Ne => Value::Bool(a != b),
                        _ => unreachable!(),
                    })
                }
                BinOp::And | BinOp::Or => {
                    let (a, b) = match (l, r) {
                        (Value::Bool(a), Value::Bool(b)) => (a, b),
                        (Value::Bool(_), v) => return Err(type_err(rhs, Ty::Bool, v.ty())),
                        (v, _) => return Err(type_err(lhs, Ty::Bool, v.ty())),
                    };
                    Ok(Value::Bool(if *op == BinOp::And { a && b } else { a || b }))
                }
            }
        }
    }
}

/// Evaluates a boolean expression, rejecting integer results.
pub fn eval_bool(expr: &Expr, scope: &impl Scope) -> Result<bool, EvalError> {
    match eval_expr(expr, scope)? {
        Value::Bool(b) => Ok(b),
        v => Err(type_err(expr, Ty::Bool, v.ty())),
    }
}

/// Static type of an expression under a declaration lookup.
/// Returns the same errors evaluation would.
pub fn type_of(expr: &Expr, lookup: &impl Fn(&str) -> Option<Ty>) -> Result<Ty, EvalError> {
    match expr {
        Expr::Int(_) => Ok(Ty::Int),
        Expr::Bool(_) => Ok(Ty::Bool),
        Expr::Var(name) => lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
        Expr::Not(inner) => match type_of(inner, lookup)? {
            Ty::Bool => Ok(Ty::Bool),
            got => Err(type_err(inner, Ty::Bool, got)),
        },
        Expr::Bin(op, lhs, rhs) => {
            let l = type_of(lhs, lookup)?;
            let r = type_of(rhs, lookup)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
                | BinOp::Eq | BinOp::Ne => {
                    if l != Ty::Int {
                        return Err(type_err(lhs, Ty::Int, l));
                    }
                    if r != Ty::Int {
                        return Err(type_err(rhs, Ty::Int, r));
                    }
                    Ok(if matches!(op, BinOp::Add | BinOp::Sub) {
                        Ty::Int
                    } else {
                        Ty::Bool
                    })
                }
                BinOp::And | BinOp::Or => {
                    if l != Ty::Bool {
                        return Err(type_err(lhs, Ty::Bool, l));
                    }
                    if r != Ty::Bool {
                        return Err(type_err(rhs, Ty::Bool, r));
                    }
                    Ok(Ty::Bool)
                }
            }
        }
    }
}
