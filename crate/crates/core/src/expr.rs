//! A small expression language for scalar quantities declared in
//! configuration files: forcing components, potentials, connection
//! entries and functional densities.
//!
//! Grammar (highest binding first): `^` (right associative), unary `-`,
//! `* /`, `+ -`. Functions `sin cos exp abs` take one parenthesized
//! argument. `pi` and `e` are predefined constants; angles are radians.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("unknown function `{name}` at column {column}")]
    UnknownFunction { name: String, column: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("zero raised to a negative power")]
    ZeroToNegativePower,
    #[error("variable `{name}` is not allowed here (allowed: {allowed})")]
    DisallowedVariable { name: String, allowed: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Abs => "abs",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
        }
    }
}

/// Syntax tree node.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(String),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its free variables (in order of
/// first appearance).
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    free: Vec<String>,
}

/// Variable lookup used by [`Expression::evaluate`].
pub trait Env {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Env for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Env for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Env for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Env for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

impl Expression {
    pub fn parse(source: &str) -> Result<Expression, ExprError> {
        let mut parser = Parser::new(source);
        let root = parser.expression()?;
        parser.skip_ws();
        if let Some(c) = parser.peek() {
            return Err(parser.error_here(format!("unexpected character `{c}`")));
        }
        let mut free = Vec::new();
        collect_vars(&root, &mut free);
        Ok(Expression { root, free })
    }

    pub fn from_node(root: Node) -> Expression {
        let mut free = Vec::new();
        collect_vars(&root, &mut free);
        Expression { root, free }
    }

    pub fn constant(value: f64) -> Expression {
        Expression::from_node(Node::Num(value))
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn free_variables(&self) -> &[String] {
        &self.free
    }

    /// Fails if the expression references a variable outside `allowed`.
    pub fn check_variables(&self, allowed: &[&str]) -> Result<(), ExprError> {
        for name in &self.free {
            if !allowed.contains(&name.as_str()) {
                return Err(ExprError::DisallowedVariable {
                    name: name.clone(),
                    allowed: allowed.join(", "),
                });
            }
        }
        Ok(())
    }

    pub fn evaluate<E: Env + ?Sized>(&self, env: &E) -> Result<f64, ExprError> {
        eval_node(&self.root, &|name| {
            env.lookup(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string()))
        })
    }

    /// Resolves variable names to slots so repeated evaluation avoids
    /// name lookups. Slot `i` corresponds to `names[i]`.
    pub fn bind(&self, names: &[&str]) -> Result<BoundExpr, ExprError> {
        self.check_variables(names)?;
        Ok(BoundExpr {
            root: bind_node(&self.root, names),
        })
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

// Fully parenthesized, so re-parsing the output rebuilds the same tree.
impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(name) => write!(f, "{name}"),
            Node::Neg(inner) => write!(f, "(-{inner})"),
            Node::Binary(op, lhs, rhs) => write!(f, "({lhs} {} {rhs})", op.symbol()),
            Node::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

fn collect_vars(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Num(_) => {}
        Node::Var(name) => {
            if !out.iter().any(|n| n == name) {
                out.push(name.clone());
            }
        }
        Node::Neg(inner) | Node::Call(_, inner) => collect_vars(inner, out),
        Node::Binary(_, lhs, rhs) => {
            collect_vars(lhs, out);
            collect_vars(rhs, out);
        }
    }
}

fn apply_binary(op: BinOp, a: f64, b: f64) -> Result<f64, ExprError> {
    match op {
        BinOp::Add => Ok(a + b),
        BinOp::Sub => Ok(a - b),
        BinOp::Mul => Ok(a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(ExprError::DivisionByZero)
            } else {
                Ok(a / b)
            }
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                Err(ExprError::ZeroToNegativePower)
            } else if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
                Ok(a.powi(b as i32))
            } else {
                Ok(a.powf(b))
            }
        }
    }
}

fn eval_node<F>(node: &Node, lookup: &F) -> Result<f64, ExprError>
where
    F: Fn(&str) -> Result<f64, ExprError>,
{
    match node {
        Node::Num(v) => Ok(*v),
        Node::Var(name) => lookup(name),
        Node::Neg(inner) => Ok(-eval_node(inner, lookup)?),
        Node::Call(func, arg) => Ok(func.apply(eval_node(arg, lookup)?)),
        Node::Binary(op, lhs, rhs) => {
            let a = eval_node(lhs, lookup)?;
            let b = eval_node(rhs, lookup)?;
            apply_binary(*op, a, b)
        }
    }
}

#[derive(Debug, Clone)]
enum Slotted {
    Num(f64),
    Slot(usize),
    Neg(Box<Slotted>),
    Binary(BinOp, Box<Slotted>, Box<Slotted>),
    Call(Func, Box<Slotted>),
}

/// An expression whose variables have been resolved to argument slots.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    root: Slotted,
}

impl BoundExpr {
    /// `args` must have at least as many entries as the names passed to
    /// [`Expression::bind`].
    pub fn eval(&self, args: &[f64]) -> Result<f64, ExprError> {
        eval_slotted(&self.root, args)
    }
}

fn bind_node(node: &Node, names: &[&str]) -> Slotted {
    match node {
        Node::Num(v) => Slotted::Num(*v),
        Node::Var(name) => Slotted::Slot(
            names
                .iter()
                .position(|n| n == name)
                .expect("variables checked before binding"),
        ),
        Node::Neg(inner) => Slotted::Neg(Box::new(bind_node(inner, names))),
        Node::Call(func, arg) => Slotted::Call(*func, Box::new(bind_node(arg, names))),
        Node::Binary(op, lhs, rhs) => Slotted::Binary(
            *op,
            Box::new(bind_node(lhs, names)),
            Box::new(bind_node(rhs, names)),
        ),
    }
}

fn eval_slotted(node: &Slotted, args: &[f64]) -> Result<f64, ExprError> {
    match node {
        Slotted::Num(v) => Ok(*v),
        Slotted::Slot(i) => Ok(args[*i]),
        Slotted::Neg(inner) => Ok(-eval_slotted(inner, args)?),
        Slotted::Call(func, arg) => Ok(func.apply(eval_slotted(arg, args)?)),
        Slotted::Binary(op, lhs, rhs) => {
            let a = eval_slotted(lhs, args)?;
            let b = eval_slotted(rhs, args)?;
            apply_binary(*op, a, b)
        }
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    // 1-based column of the current position.
    fn error_here(&self, message: String) -> ExprError {
        ExprError::Syntax {
            column: self.pos + 1,
            message,
        }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    // expression := term (('+' | '-') term)*
    fn expression(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat('+') {
                BinOp::Add
            } else if self.eat('-') {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinOp::Mul
            } else if self.eat('/') {
                BinOp::Div
            } else {
                return Ok(lhs);
            };
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat('-') {
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    // power := primary ('^' unary)?   -- right associative
    fn power(&mut self) -> Result<Node, ExprError> {
        let base = self.primary()?;
        if self.eat('^') {
            let exponent = self.unary()?;
            Ok(Node::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Node, ExprError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error_here("unexpected end of input".into())),
            Some('(') => {
                self.pos += 1;
                let inner = self.expression()?;
                if !self.eat(')') {
                    self.skip_ws();
                    return Err(self.error_here("expected `)`".into()));
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.identifier(),
            Some(c) => Err(self.error_here(format!("unexpected character `{c}`"))),
        }
    }

    fn number(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            self.pos += 1;
        }
        // exponent only when followed by digits, so `2*e` keeps meaning Euler's number
        if matches!(self.peek(), Some('e' | 'E')) {
            let mut look = self.pos + 1;
            if matches!(self.chars.get(look), Some('+' | '-')) {
                look += 1;
            }
            if matches!(self.chars.get(look), Some(c) if c.is_ascii_digit()) {
                self.pos = look;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse::<f64>().map(Node::Num).map_err(|_| ExprError::Syntax {
            column: start + 1,
            message: format!("malformed number `{text}`"),
        })
    }

    fn identifier(&mut self) -> Result<Node, ExprError> {
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        self.skip_ws();
        if self.peek() == Some('(') {
            let func = Func::from_name(&name).ok_or(ExprError::UnknownFunction {
                name: name.clone(),
                column: start + 1,
            })?;
            self.pos += 1;
            let arg = self.expression()?;
            if !self.eat(')') {
                self.skip_ws();
                return Err(self.error_here("expected `)`".into()));
            }
            return Ok(Node::Call(func, Box::new(arg)));
        }
        Ok(match name.as_str() {
            "pi" => Node::Num(std::f64::consts::PI),
            "e" => Node::Num(std::f64::consts::E),
            _ => Node::Var(name),
        })
    }
}
