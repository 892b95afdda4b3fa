//! Scalar expression language used for metric components.
//!
//! Expressions are parsed into a small AST, evaluated in IEEE double
//! precision and differentiated symbolically. Simplification is limited to
//! folding literal-only subtrees and dropping additive and multiplicative
//! identities; two expressions are "the same" when they evaluate the same.
//!
//! Grammar, from loosest to tightest binding:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := primary ('^' unary)?          (right associative)
//! primary := number | name | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `func` is one of `sin cos tan sinh cosh tanh exp log sqrt abs`; `pi` is
//! a built-in constant unless shadowed by a variable of the same name.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::error::{Error, Result};

/// Integer exponents up to this magnitude are evaluated as repeated products.
pub const MAX_EXPANDED_POWER: i32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 10] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Tanh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
}

/// Source of variable values during evaluation.
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

/// Coordinates bound positionally, with a fallback table for parameters.
pub struct ChartBindings<'a> {
    pub names: &'a [String],
    pub values: &'a [f64],
    pub parameters: &'a BTreeMap<String, f64>,
}

impl Bindings for ChartBindings<'_> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
            .or_else(|| self.parameters.get(name).copied())
    }
}

// ---------------------------------------------------------------------------
// Construction helpers. These fold literals and drop identities; they are the
// only simplification the crate performs.

pub fn num(v: f64) -> Expr {
    Expr::Num(v)
}

pub fn var(name: impl Into<String>) -> Expr {
    Expr::Var(name.into())
}

fn folded(v: f64) -> Option<Expr> {
    v.is_finite().then_some(Expr::Num(v))
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => folded(x + y).unwrap_or_else(|| raw_add(a, b)),
        (Expr::Num(x), _) if *x == 0.0 => b,
        (_, Expr::Num(y)) if *y == 0.0 => a,
        _ => raw_add(a, b),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => folded(x - y).unwrap_or_else(|| raw_sub(a, b)),
        (Expr::Num(x), _) if *x == 0.0 => neg(b),
        (_, Expr::Num(y)) if *y == 0.0 => a,
        _ => raw_sub(a, b),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => folded(x * y).unwrap_or_else(|| raw_mul(a, b)),
        (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => Expr::Num(0.0),
        (Expr::Num(x), _) if *x == 1.0 => b,
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(x), _) if *x == -1.0 => neg(b),
        (_, Expr::Num(y)) if *y == -1.0 => neg(a),
        _ => raw_mul(a, b),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => {
            folded(x / y).unwrap_or_else(|| raw_div(a, b))
        }
        (Expr::Num(x), _) if *x == 0.0 => Expr::Num(0.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        _ => raw_div(a, b),
    }
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (_, Expr::Num(y)) if *y == 0.0 => Expr::Num(1.0),
        (_, Expr::Num(y)) if *y == 1.0 => a,
        (Expr::Num(_), Expr::Num(_)) => match Expr::Pow(Box::new(a.clone()), Box::new(b.clone()))
            .eval(&[("", 0.0)])
        {
            Ok(v) if v.is_finite() => Expr::Num(v),
            _ => Expr::Pow(Box::new(a), Box::new(b)),
        },
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    if let Expr::Num(x) = a {
        if let Some(e) = folded(f.apply(x)) {
            return e;
        }
    }
    Expr::Call(f, Box::new(a))
}

fn raw_add(a: Expr, b: Expr) -> Expr {
    Expr::Add(Box::new(a), Box::new(b))
}
fn raw_sub(a: Expr, b: Expr) -> Expr {
    Expr::Sub(Box::new(a), Box::new(b))
}
fn raw_mul(a: Expr, b: Expr) -> Expr {
    Expr::Mul(Box::new(a), Box::new(b))
}
fn raw_div(a: Expr, b: Expr) -> Expr {
    Expr::Div(Box::new(a), Box::new(b))
}

struct Fault<'e> {
    at: &'e Expr,
    kind: FaultKind,
}

#[derive(Clone, Copy)]
enum FaultKind {
    Unbound,
    Log(f64),
    Sqrt(f64),
    DivisionByZero,
    ZeroToNegative,
    NonpositiveBase(f64),
    NonFinite,
}

impl Fault<'_> {
    #[cold]
    #[inline(never)]
    fn into_error(self) -> Error {
        let reason = match self.kind {
            FaultKind::Unbound => {
                let Expr::Var(name) = self.at else { unreachable!() };
                return Error::UnboundVariable(name.clone());
            }
            FaultKind::Log(x) => format!("log of nonpositive value {x}"),
            FaultKind::Sqrt(x) => format!("sqrt of negative value {x}"),
            FaultKind::DivisionByZero => "division by zero".into(),
            FaultKind::ZeroToNegative => "negative power of zero".into(),
            FaultKind::NonpositiveBase(b) => format!("non-integer power of nonpositive base {b}"),
            FaultKind::NonFinite => "non-finite result".into(),
        };
        domain(self.at, reason)
    }
}

fn domain(e: &Expr, reason: impl Into<String>) -> Error {
    Error::Domain {
        subexpr: e.to_string(),
        reason: reason.into(),
    }
}

impl Expr {
    /// Value of a subtree that contains no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.has_vars() {
            return None;
        }
        self.eval(&[("", 0.0)]).ok()
    }

    fn has_vars(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.has_vars(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => a.has_vars() || b.has_vars(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Evaluates the expression. Children are evaluated left to right.
    pub fn eval<B: Bindings + ?Sized>(&self, bindings: &B) -> Result<f64> {
        self.eval_raw(bindings).map_err(Fault::into_error)
    }

    // Kept lean: deep trees recurse through here once per level.
    fn eval_raw<'e, B: Bindings + ?Sized>(&'e self, bindings: &B) -> std::result::Result<f64, Fault<'e>> {
        let fault = |kind| Fault { at: self, kind };
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => match bindings.lookup(name) {
                Some(v) => v,
                None if name == "pi" => std::f64::consts::PI,
                None => return Err(fault(FaultKind::Unbound)),
            },
            Expr::Neg(a) => -a.eval_raw(bindings)?,
            Expr::Call(f, a) => {
                let x = a.eval_raw(bindings)?;
                match f {
                    Func::Log if x <= 0.0 => return Err(fault(FaultKind::Log(x))),
                    Func::Sqrt if x < 0.0 => return Err(fault(FaultKind::Sqrt(x))),
                    _ => f.apply(x),
                }
            }
            Expr::Add(a, b) => a.eval_raw(bindings)? + b.eval_raw(bindings)?,
            Expr::Sub(a, b) => a.eval_raw(bindings)? - b.eval_raw(bindings)?,
            Expr::Mul(a, b) => a.eval_raw(bindings)? * b.eval_raw(bindings)?,
            Expr::Div(a, b) => {
                let x = a.eval_raw(bindings)?;
                let y = b.eval_raw(bindings)?;
                if y == 0.0 {
                    return Err(fault(FaultKind::DivisionByZero));
                }
                x / y
            }
            Expr::Pow(a, b) => {
                let base = a.eval_raw(bindings)?;
                let exponent = b.eval_raw(bindings)?;
                let repeat = (!b.has_vars()
                    && exponent.fract() == 0.0
                    && exponent.abs() <= MAX_EXPANDED_POWER as f64)
                    .then_some(exponent as i32);
                match repeat {
                    Some(n) => {
                        let mut acc = 1.0;
                        for _ in 0..n.unsigned_abs() {
                            acc *= base;
                        }
                        if n < 0 {
                            if acc == 0.0 {
                                return Err(fault(FaultKind::ZeroToNegative));
                            }
                            1.0 / acc
                        } else {
                            acc
                        }
                    }
                    None if base <= 0.0 => return Err(fault(FaultKind::NonpositiveBase(base))),
                    None => (exponent * base.ln()).exp(),
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(fault(FaultKind::NonFinite))
        }
    }

    /// Exact symbolic derivative with respect to `var`.
    pub fn diff(&self, wrt: &str) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(v) => num(if v == wrt { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(wrt)),
            Expr::Call(f, a) => Self::diff_call(*f, a, wrt),
            Expr::Add(a, b) => add(a.diff(wrt), b.diff(wrt)),
            Expr::Sub(a, b) => sub(a.diff(wrt), b.diff(wrt)),
            Expr::Mul(a, b) => Self::diff_mul(a, b, wrt),
            Expr::Div(a, b) => Self::diff_div(a, b, wrt),
            Expr::Pow(a, b) => self.diff_pow(a, b, wrt),
        }
    }

    // The helpers below stay out of line so that `diff` itself, which
    // recurses once per tree level, keeps a small frame.

    #[inline(never)]
    fn diff_call(f: Func, a: &Expr, wrt: &str) -> Expr {
        let da = a.diff(wrt);
        if da == Expr::Num(0.0) {
            return num(0.0);
        }
        let u = a.clone();
        let outer = match f {
            Func::Sin => call(Func::Cos, u),
            Func::Cos => neg(call(Func::Sin, u)),
            Func::Tan => div(num(1.0), pow(call(Func::Cos, u), num(2.0))),
            Func::Sinh => call(Func::Cosh, u),
            Func::Cosh => call(Func::Sinh, u),
            Func::Tanh => div(num(1.0), pow(call(Func::Cosh, u), num(2.0))),
            Func::Exp => call(Func::Exp, u),
            Func::Log => div(num(1.0), u),
            Func::Sqrt => div(num(1.0), mul(num(2.0), call(Func::Sqrt, u))),
            Func::Abs => div(u.clone(), call(Func::Abs, u)),
        };
        mul(outer, da)
    }

    #[inline(never)]
    fn diff_mul(a: &Expr, b: &Expr, wrt: &str) -> Expr {
        add(mul(a.diff(wrt), b.clone()), mul(a.clone(), b.diff(wrt)))
    }

    #[inline(never)]
    fn diff_div(a: &Expr, b: &Expr, wrt: &str) -> Expr {
        let da = a.diff(wrt);
        let db = b.diff(wrt);
        let first = div(da, b.clone());
        if db == Expr::Num(0.0) {
            return first;
        }
        sub(first, div(mul(a.clone(), db), pow(b.clone(), num(2.0))))
    }

    #[inline(never)]
    fn diff_pow(&self, a: &Expr, b: &Expr, wrt: &str) -> Expr {
        let da = a.diff(wrt);
        match b.constant_value() {
            Some(c) => {
                if da == Expr::Num(0.0) || c == 0.0 {
                    return num(0.0);
                }
                mul(mul(num(c), pow(a.clone(), num(c - 1.0))), da)
            }
            None => {
                let db = b.diff(wrt);
                let inner = add(
                    mul(db, call(Func::Log, a.clone())),
                    div(mul(b.clone(), da), a.clone()),
                );
                mul(self.clone(), inner)
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Group {
    Sum,
    Product,
}

impl Expr {
    /// Operator group of a left-associative binary node.
    fn group(&self) -> Option<Group> {
        match self {
            Expr::Add(..) | Expr::Sub(..) => Some(Group::Sum),
            Expr::Mul(..) | Expr::Div(..) => Some(Group::Product),
            _ => None,
        }
    }

    /// Writes a left-associative chain without inner parentheses.
    fn write_chain(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, op, b) = match self {
            Expr::Add(a, b) => (a, "+", b),
            Expr::Sub(a, b) => (a, "-", b),
            Expr::Mul(a, b) => (a, "*", b),
            Expr::Div(a, b) => (a, "/", b),
            _ => return write!(f, "{self}"),
        };
        if a.group() == self.group() {
            a.write_chain(f)?;
        } else {
            write!(f, "{a}")?;
        }
        write!(f, " {op} {b}")
    }
}

impl fmt::Display for Expr {
    /// Parenthesized, re-parseable rendering. Only chains of `+`/`-` or
    /// `*`/`/` rely on left associativity.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{:?})", -v)
            }
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) | Expr::Div(..) => {
                f.write_str("(")?;
                self.write_chain(f)?;
                f.write_str(")")
            }
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
        }
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Num(v) => format!("number {v}"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::End => "end of input".into(),
        }
    }
}

fn syntax(offset: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        offset,
        message: message.into(),
    }
}

fn tokenize(source: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = source.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Token::Plus,
            b'-' => Token::Minus,
            b'*' => Token::Star,
            b'/' => Token::Slash,
            b'^' => Token::Caret,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &source[start..i];
                let v: f64 = text
                    .parse()
                    .map_err(|_| syntax(start, format!("malformed number `{text}`")))?;
                if !v.is_finite() {
                    return Err(syntax(start, format!("number `{text}` is out of range")));
                }
                out.push((Token::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Token::Ident(source[start..i].to_string()), start));
                continue;
            }
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(syntax(start, format!("unexpected character `{ch}`")));
            }
        };
        out.push((tok, start));
        i += 1;
    }
    out.push((Token::End, source.len()));
    Ok(out)
}

/// True when `name` is a legal variable name.
pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

// Keeps pathological inputs from overflowing the stack, both while parsing
// and in the recursive walks over the finished tree.
const MAX_RECURSION: usize = 256;
pub const MAX_TREE_DEPTH: usize = 256;

/// Parsed subtree with the bookkeeping for the depth limits.
struct Node {
    expr: Expr,
    depth: usize,
    /// Parser recursion needed to read back the printed subtree, starting
    /// from a unary operand.
    cost: usize,
    /// Largest operand cost in the flattened chain, for sums and products.
    chain: usize,
}

impl Node {
    fn leaf(expr: Expr) -> Self {
        let cost = match expr {
            Expr::Num(v) if v < 0.0 || (v == 0.0 && v.is_sign_negative()) => 4,
            _ => 1,
        };
        Node { expr, depth: 1, cost, chain: 0 }
    }
}

struct Parser<'a> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    allowed: &'a [&'a str],
    depth: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_RECURSION {
            return Err(syntax(self.offset(), "expression nested too deeply"));
        }
        Ok(())
    }

    fn node(&self, offset: usize, expr: Expr, depth: usize, cost: usize, chain: usize) -> Result<Node> {
        if depth > MAX_TREE_DEPTH || cost >= MAX_RECURSION {
            return Err(syntax(offset, "expression nested too deeply"));
        }
        Ok(Node { expr, depth, cost, chain })
    }

    fn binary(&self, offset: usize, op: fn(Expr, Expr) -> Expr, a: Node, b: Node) -> Result<Node> {
        let a_group = a.expr.group();
        let expr = op(a.expr, b.expr);
        let left = if a_group.is_some() && a_group == expr.group() { a.chain } else { a.cost };
        let chain = left.max(b.cost);
        self.node(offset, expr, a.depth.max(b.depth) + 1, chain + 2, chain)
    }

    fn expr(&mut self) -> Result<Node> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            let offset = self.offset();
            let op: fn(Expr, Expr) -> Expr = match self.peek() {
                Token::Plus => raw_add,
                Token::Minus => raw_sub,
                _ => break,
            };
            self.bump();
            let rhs = self.term()?;
            lhs = self.binary(offset, op, lhs, rhs)?;
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let offset = self.offset();
            let op: fn(Expr, Expr) -> Expr = match self.peek() {
                Token::Star => raw_mul,
                Token::Slash => raw_div,
                _ => break,
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = self.binary(offset, op, lhs, rhs)?;
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        self.enter()?;
        let offset = self.offset();
        let e = match self.peek() {
            Token::Minus => {
                self.bump();
                let a = self.unary()?;
                self.node(offset, Expr::Neg(Box::new(a.expr)), a.depth + 1, a.cost + 3, 0)?
            }
            Token::Plus => {
                self.bump();
                self.unary()?
            }
            _ => self.power()?,
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if *self.peek() == Token::Caret {
            let offset = self.offset();
            self.bump();
            let exponent = self.unary()?;
            let depth = base.depth.max(exponent.depth) + 1;
            let cost = base.cost.max(exponent.cost + 1) + 2;
            let expr = Expr::Pow(Box::new(base.expr), Box::new(exponent.expr));
            return self.node(offset, expr, depth, cost, 0);
        }
        Ok(base)
    }

    fn expect(&mut self, want: Token) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(
                self.offset(),
                format!("expected {}, found {}", want.describe(), self.peek().describe()),
            ))
        }
    }

    fn primary(&mut self) -> Result<Node> {
        let offset = self.offset();
        match self.bump() {
            Token::Num(v) => Ok(Node::leaf(Expr::Num(v))),
            Token::LParen => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Token::Ident(name) => {
                if *self.peek() == Token::LParen {
                    let Some(func) = Func::from_name(&name) else {
                        return Err(Error::UnknownIdentifier { name, offset });
                    };
                    self.bump();
                    let arg = self.expr()?;
                    self.expect(Token::RParen)?;
                    let (depth, cost) = (arg.depth + 1, arg.cost + 2);
                    return self.node(offset, Expr::Call(func, Box::new(arg.expr)), depth, cost, 0);
                }
                if self.allowed.contains(&name.as_str()) {
                    Ok(Node::leaf(Expr::Var(name)))
                } else if name == "pi" {
                    Ok(Node::leaf(Expr::Num(std::f64::consts::PI)))
                } else if Func::from_name(&name).is_some() {
                    Err(syntax(
                        self.offset(),
                        format!("expected `(` after function `{name}`"),
                    ))
                } else {
                    Err(Error::UnknownIdentifier { name, offset })
                }
            }
            other => Err(syntax(
                offset,
                format!("expected expression, found {}", other.describe()),
            )),
        }
    }
}

/// Parses `source`, accepting only the listed variable names.
pub fn parse_expr(source: &str, allowed_vars: &[&str]) -> Result<Expr> {
    if allowed_vars.is_empty() {
        return Err(Error::InvalidArgument("no variables allowed".into()));
    }
    if let Some(bad) = allowed_vars.iter().find(|v| !is_valid_name(v)) {
        return Err(Error::InvalidArgument(format!("invalid variable name `{bad}`")));
    }
    let tokens = tokenize(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        allowed: allowed_vars,
        depth: 0,
    };
    let e = parser.expr()?.expr;
    if *parser.peek() != Token::End {
        return Err(syntax(
            parser.offset(),
            format!("expected operator or end of input, found {}", parser.peek().describe()),
        ));
    }
    Ok(e)
}
