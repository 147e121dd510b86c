//! Symbolic expressions over the jet coordinates of `m = u - u_xx`.
//!
//! Expressions are immutable trees shared through `Arc`, so cloning is cheap
//! and they can be evaluated from several threads at once. The smart
//! constructors (`add`, `mul`, ...) perform light local simplification
//! (constant folding and the 0/1 identities); no global normal form is kept.
//! Zero testing is done numerically, see [`zero`].

mod compile;
mod jet;
mod parse;
pub mod poly;
pub mod zero;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::CompiledExpr;
pub use jet::{d_t, d_x, euler_u, euler_ut, partial, to_m_jet, to_u_jet};
pub use parse::{parse, ParseError, ParseErrorKind};
pub use zero::{is_zero, SamplingPolicy, ZeroTestError, ZeroVerdict};

/// Highest x-derivative of `m` accepted in user input.
pub const MAX_M_ORDER: u8 = 4;
/// Highest t-derivative accepted anywhere.
pub const MAX_T_ORDER: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("no value bound for `{0}`")]
    Unbound(String),
    #[error("derivative order of `{0}` exceeds the supported jet space")]
    OrderCap(String),
    #[error("expression already contains a t-derivative (`{0}`)")]
    TimeOrder(String),
}

/// Dependent variable family of a jet coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Base {
    U,
    M,
}

/// A jet coordinate: `x`, `t`, or a mixed derivative of `u` or `m`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JetVar {
    X,
    T,
    Deriv { base: Base, dx: u8, dt: u8 },
}

impl JetVar {
    pub const U: JetVar = JetVar::u(0, 0);
    pub const UX: JetVar = JetVar::u(1, 0);
    pub const UT: JetVar = JetVar::u(0, 1);
    pub const UTX: JetVar = JetVar::u(1, 1);
    pub const M: JetVar = JetVar::m(0, 0);
    pub const MX: JetVar = JetVar::m(1, 0);
    pub const MXX: JetVar = JetVar::m(2, 0);
    pub const MT: JetVar = JetVar::m(0, 1);
    pub const MTX: JetVar = JetVar::m(1, 1);
    pub const MTXX: JetVar = JetVar::m(2, 1);

    pub const fn u(dx: u8, dt: u8) -> Self {
        JetVar::Deriv { base: Base::U, dx, dt }
    }

    pub const fn m(dx: u8, dt: u8) -> Self {
        JetVar::Deriv { base: Base::M, dx, dt }
    }

    pub fn name(&self) -> String {
        match *self {
            JetVar::X => "x".into(),
            JetVar::T => "t".into(),
            JetVar::Deriv { base, dx, dt } => {
                let mut s = String::with_capacity(2 + dx as usize);
                s.push(match base {
                    Base::U => 'u',
                    Base::M => 'm',
                });
                for _ in 0..dt {
                    s.push('t');
                }
                for _ in 0..dx {
                    s.push('x');
                }
                s
            }
        }
    }

    /// Identifiers accepted by the parser.
    pub fn from_ident(s: &str) -> Option<Self> {
        Some(match s {
            "x" => JetVar::X,
            "t" => JetVar::T,
            "u" => JetVar::U,
            "ux" => JetVar::UX,
            "ut" => JetVar::UT,
            "utx" => JetVar::UTX,
            "m" => JetVar::M,
            "mx" => JetVar::MX,
            "mxx" => JetVar::MXX,
            "mt" => JetVar::MT,
            "mtx" => JetVar::MTX,
            "mtxx" => JetVar::MTXX,
            _ => return None,
        })
    }

    pub fn t_order(&self) -> u8 {
        match *self {
            JetVar::Deriv { dt, .. } => dt,
            _ => 0,
        }
    }

    /// True for coordinates of the canonical m-jet (no `u_xx` or higher).
    pub fn is_canonical(&self) -> bool {
        match *self {
            JetVar::Deriv { base: Base::U, dx, .. } => dx <= 1,
            _ => true,
        }
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Arctanh,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Arctanh => "arctanh",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "arctanh" => Func::Arctanh,
            _ => return None,
        })
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Func::Exp => x.exp(),
            Func::Ln => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Arctanh => x.atanh(),
        }
    }
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Param(Arc<str>),
    Var(JetVar),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, Rational64),
    Fn(Func, Expr),
}

/// Shared, immutable expression tree.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// Numeric values for every jet coordinate and parameter of an expression.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct JetPoint {
    pub vars: BTreeMap<JetVar, f64>,
    pub params: BTreeMap<String, f64>,
}

impl JetPoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, v: JetVar, value: f64) -> Self {
        self.vars.insert(v, value);
        self
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// Name-keyed view, used for reports.
    pub fn named(&self) -> BTreeMap<String, f64> {
        let mut out: BTreeMap<String, f64> =
            self.vars.iter().map(|(k, v)| (k.name(), *v)).collect();
        out.extend(self.params.iter().map(|(k, v)| (k.clone(), *v)));
        out
    }
}

impl Serialize for JetPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.named().serialize(s)
    }
}

impl<'de> Deserialize<'de> for JetPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(d)?;
        let mut pt = JetPoint::new();
        for (k, v) in raw {
            match JetVar::from_ident(&k) {
                Some(var) => {
                    pt.vars.insert(var, v);
                }
                None => {
                    pt.params.insert(k, v);
                }
            }
        }
        Ok(pt)
    }
}

pub(crate) fn rational_pow(x: f64, r: Rational64) -> f64 {
    let (p, q) = (*r.numer(), *r.denom());
    if q == 1 {
        if let Ok(p) = i32::try_from(p) {
            return x.powi(p);
        }
        return x.powf(p as f64);
    }
    if q == 2 {
        let s = x.sqrt();
        return match i32::try_from(p) {
            Ok(p) => s.powi(p),
            Err(_) => s.powf(p as f64),
        };
    }
    if x < 0.0 && q % 2 == 1 {
        // real odd root
        let mag = (-x).powf(p as f64 / q as f64);
        return if p % 2 == 0 { mag } else { -mag };
    }
    x.powf(p as f64 / q as f64)
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub(crate) fn raw(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub(crate) fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn constant(c: f64) -> Self {
        Expr::raw(Node::Const(c))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn var(v: JetVar) -> Self {
        Expr::raw(Node::Var(v))
    }

    pub fn param(name: &str) -> Self {
        Expr::raw(Node::Param(Arc::from(name)))
    }

    pub fn u() -> Self {
        Expr::var(JetVar::U)
    }

    pub fn ux() -> Self {
        Expr::var(JetVar::UX)
    }

    pub fn m() -> Self {
        Expr::var(JetVar::M)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_const_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn add(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x + y),
            (Some(x), _) if x == 0.0 => b.clone(),
            (_, Some(y)) if y == 0.0 => a.clone(),
            _ => Expr::raw(Node::Add(a.clone(), b.clone())),
        }
    }

    pub fn sub(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x - y),
            (Some(x), _) if x == 0.0 => Expr::neg(b),
            (_, Some(y)) if y == 0.0 => a.clone(),
            _ => Expr::raw(Node::Sub(a.clone(), b.clone())),
        }
    }

    pub fn mul(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => Expr::constant(x * y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 0.0 => Expr::zero(),
            (Some(x), _) if x == 1.0 => b.clone(),
            (_, Some(y)) if y == 1.0 => a.clone(),
            (Some(x), _) if x == -1.0 => Expr::neg(b),
            (_, Some(y)) if y == -1.0 => Expr::neg(a),
            _ => Expr::raw(Node::Mul(a.clone(), b.clone())),
        }
    }

    pub fn div(a: &Expr, b: &Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => Expr::constant(x / y),
            (Some(x), _) if x == 0.0 => Expr::zero(),
            (_, Some(y)) if y == 1.0 => a.clone(),
            _ => Expr::raw(Node::Div(a.clone(), b.clone())),
        }
    }

    pub fn neg(a: &Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::raw(Node::Neg(a.clone())),
        }
    }

    pub fn pow(base: &Expr, exp: Rational64) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base.clone();
        }
        if let Some(c) = base.as_const() {
            return Expr::constant(rational_pow(c, exp));
        }
        if let Node::Pow(inner, e0) = base.node() {
            // (a^p)^q = a^(pq) is only safe for integer outer exponents of
            // integer inner ones
            if e0.is_integer() && exp.is_integer() {
                return Expr::pow(inner, e0 * exp);
            }
        }
        Expr::raw(Node::Pow(base.clone(), exp))
    }

    pub fn powi(base: &Expr, n: i64) -> Expr {
        Expr::pow(base, Rational64::from_integer(n))
    }

    pub fn func(f: Func, arg: &Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            return Expr::constant(f.apply(c));
        }
        Expr::raw(Node::Fn(f, arg.clone()))
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::mul(&Expr::constant(c), self)
    }

    /// Sum of a list of expressions, folding zeros.
    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms
            .into_iter()
            .fold(Expr::zero(), |acc, t| Expr::add(&acc, t))
    }

    /// Evaluate at a jet point; every variable and parameter must be bound.
    pub fn eval(&self, pt: &JetPoint) -> Result<f64, ExprError> {
        Ok(match self.node() {
            Node::Const(c) => *c,
            Node::Param(p) => *pt
                .params
                .get(p.as_ref())
                .ok_or_else(|| ExprError::Unbound(p.to_string()))?,
            Node::Var(v) => *pt
                .vars
                .get(v)
                .ok_or_else(|| ExprError::Unbound(v.name()))?,
            Node::Add(a, b) => a.eval(pt)? + b.eval(pt)?,
            Node::Sub(a, b) => a.eval(pt)? - b.eval(pt)?,
            Node::Mul(a, b) => a.eval(pt)? * b.eval(pt)?,
            Node::Div(a, b) => a.eval(pt)? / b.eval(pt)?,
            Node::Neg(a) => -a.eval(pt)?,
            Node::Pow(a, r) => rational_pow(a.eval(pt)?, *r),
            Node::Fn(f, a) => f.apply(a.eval(pt)?),
        })
    }

    /// Top-level additive terms with their signs (through `+`, `-`, unary minus).
    pub fn additive_terms(&self) -> Vec<(f64, Expr)> {
        fn walk(e: &Expr, sign: f64, out: &mut Vec<(f64, Expr)>) {
            match e.node() {
                Node::Add(a, b) => {
                    walk(a, sign, out);
                    walk(b, sign, out);
                }
                Node::Sub(a, b) => {
                    walk(a, sign, out);
                    walk(b, -sign, out);
                }
                Node::Neg(a) => walk(a, -sign, out),
                _ => out.push((sign, e.clone())),
            }
        }
        let mut out = Vec::new();
        walk(self, 1.0, &mut out);
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self.node() {
            Node::Const(_) | Node::Param(_) | Node::Var(_) => {}
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Fn(_, a) => a.visit(f),
        }
    }

    pub fn vars(&self) -> BTreeSet<JetVar> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Var(v) = e.node() {
                out.insert(*v);
            }
        });
        out
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Param(p) = e.node() {
                out.insert(p.to_string());
            }
        });
        out
    }

    pub fn depends_on(&self, v: JetVar) -> bool {
        self.vars().contains(&v)
    }

    pub fn max_t_order(&self) -> u8 {
        self.vars().iter().map(|v| v.t_order()).max().unwrap_or(0)
    }

    /// Rebuild the tree bottom-up, letting `leaf` replace variables and
    /// parameters. Smart constructors re-simplify on the way up.
    pub fn map_leaves(&self, leaf: &mut impl FnMut(&Node) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(_) | Node::Param(_) => leaf(self.node()).unwrap_or_else(|| self.clone()),
            Node::Add(a, b) => Expr::add(&a.map_leaves(leaf), &b.map_leaves(leaf)),
            Node::Sub(a, b) => Expr::sub(&a.map_leaves(leaf), &b.map_leaves(leaf)),
            Node::Mul(a, b) => Expr::mul(&a.map_leaves(leaf), &b.map_leaves(leaf)),
            Node::Div(a, b) => Expr::div(&a.map_leaves(leaf), &b.map_leaves(leaf)),
            Node::Neg(a) => Expr::neg(&a.map_leaves(leaf)),
            Node::Pow(a, r) => Expr::pow(&a.map_leaves(leaf), *r),
            Node::Fn(f, a) => Expr::func(*f, &a.map_leaves(leaf)),
        }
    }

    pub fn subst(&self, v: JetVar, with: &Expr) -> Expr {
        self.map_leaves(&mut |n| match n {
            Node::Var(w) if *w == v => Some(with.clone()),
            _ => None,
        })
    }

    /// Replace bound parameters by constants; unknown parameters are kept.
    pub fn bind_params(&self, params: &BTreeMap<String, f64>) -> Expr {
        self.map_leaves(&mut |n| match n {
            Node::Param(p) => params.get(p.as_ref()).map(|v| Expr::constant(*v)),
            _ => None,
        })
    }

    /// Reject coordinates outside the supported jet space.
    pub fn check_order_cap(&self) -> Result<(), ExprError> {
        for v in self.vars() {
            if let JetVar::Deriv { base, dx, dt } = v {
                let too_high = dt > MAX_T_ORDER
                    || (base == Base::M && dx > MAX_M_ORDER)
                    || (base == Base::U && dx > 1);
                if too_high {
                    return Err(ExprError::OrderCap(v.name()));
                }
            }
        }
        Ok(())
    }

    pub fn tree_size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Self {
        Expr::constant(c)
    }
}

impl From<JetVar> for Expr {
    fn from(v: JetVar) -> Self {
        Expr::var(v)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $ctor:ident) => {
        impl std::ops::$tr<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(&self, &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(self, rhs)
            }
        }
        impl std::ops::$tr<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(&self, rhs)
            }
        }
        impl std::ops::$tr<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(self, &rhs)
            }
        }
        impl std::ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(&self, &Expr::constant(rhs))
            }
        }
        impl std::ops::$tr<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$ctor(self, &Expr::constant(rhs))
            }
        }
        impl std::ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$ctor(&Expr::constant(self), &rhs)
            }
        }
        impl std::ops::$tr<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::$ctor(&Expr::constant(self), rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(&self)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Printer. Precedence levels follow the grammar: sums < products < unary
// minus < powers < atoms.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Add(..) | Node::Sub(..) => PREC_SUM,
        Node::Mul(..) | Node::Div(..) => PREC_PRODUCT,
        Node::Neg(_) => PREC_UNARY,
        Node::Pow(..) => PREC_POW,
        Node::Const(c) if *c < 0.0 || c.is_sign_negative() => PREC_UNARY,
        _ => PREC_ATOM,
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    // `Display` for f64 is the shortest representation that round-trips
    // and never uses an exponent.
    write!(f, "{}", c.abs())
}

fn write_exponent(f: &mut fmt::Formatter<'_>, r: Rational64) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "({}/{})", r.numer(), r.denom())
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    let p = precedence(e);
    let paren = p < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match e.node() {
        Node::Const(c) => {
            if c.is_sign_negative() && *c != 0.0 {
                f.write_str("-")?;
            }
            write_number(f, *c)?;
        }
        Node::Param(name) => f.write_str(name)?,
        Node::Var(v) => f.write_str(&v.name())?,
        Node::Add(a, b) => {
            write_expr(f, a, PREC_SUM)?;
            f.write_str(" + ")?;
            write_expr(f, b, PREC_PRODUCT)?;
        }
        Node::Sub(a, b) => {
            write_expr(f, a, PREC_SUM)?;
            f.write_str(" - ")?;
            write_expr(f, b, PREC_PRODUCT)?;
        }
        Node::Mul(a, b) => {
            write_expr(f, a, PREC_PRODUCT)?;
            f.write_str("*")?;
            write_expr(f, b, PREC_UNARY)?;
        }
        Node::Div(a, b) => {
            write_expr(f, a, PREC_PRODUCT)?;
            f.write_str("/")?;
            write_expr(f, b, PREC_UNARY)?;
        }
        Node::Neg(a) => {
            f.write_str("-")?;
            write_expr(f, a, PREC_UNARY)?;
        }
        Node::Pow(a, r) => {
            write_expr(f, a, PREC_ATOM)?;
            f.write_str("^")?;
            write_exponent(f, *r)?;
        }
        Node::Fn(func, a) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, a, 0)?;
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

impl Serialize for Expr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
