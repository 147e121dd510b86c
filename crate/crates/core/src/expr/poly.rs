//! Multivariate polynomials over the rationals.
//!
//! Used as an exact zero test whenever an expression is polynomial in all of
//! its jet coordinates, and for term-wise antiderivatives in one variable.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::{Expr, JetVar, Node};

/// Sorted list of (variable, exponent) pairs with positive exponents.
pub type Monomial = Vec<(JetVar, u32)>;

/// Expansion is abandoned beyond this many terms.
pub const TERM_LIMIT: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<JetVar, u32> = a.iter().copied().collect();
    for &(v, e) in b {
        *out.entry(v).or_insert(0) += e;
    }
    out.into_iter().collect()
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn var(v: JetVar) -> Self {
        let mut p = Self::zero();
        p.terms.insert(vec![(v, 1)], BigRational::from_integer(BigInt::from(1)));
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(slot) => {
                if !c.is_zero() {
                    slot.insert(c);
                }
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn mul(&self, other: &Poly) -> Option<Poly> {
        if self.len().saturating_mul(other.len()) > TERM_LIMIT * 4 {
            return None;
        }
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        (out.len() <= TERM_LIMIT).then_some(out)
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    /// Constant value, if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    /// Exact expansion of an expression. Returns `None` when the expression
    /// is not polynomial (non-constant division, functions, fractional or
    /// negative powers, unbound parameters) or grows past [`TERM_LIMIT`].
    pub fn from_expr(e: &Expr) -> Option<Poly> {
        let mut memo = HashMap::new();
        expand(e, &mut memo)
    }

    /// Back to an expression with floating-point coefficients.
    pub fn to_expr(&self) -> Expr {
        let mut out = Expr::zero();
        for (m, c) in &self.terms {
            let mut term = Expr::constant(c.to_f64().unwrap_or(f64::NAN));
            for &(v, e) in m {
                term = term * Expr::powi(&Expr::var(v), e as i64);
            }
            out = out + term;
        }
        out
    }

    /// Highest exponent of `v`.
    pub fn degree_in(&self, v: JetVar) -> u32 {
        self.terms
            .keys()
            .flat_map(|m| m.iter().filter(|(w, _)| *w == v).map(|(_, e)| *e))
            .max()
            .unwrap_or(0)
    }

    /// Coefficients of a univariate polynomial in `v`, lowest degree first.
    /// `None` if another variable occurs.
    pub fn univariate(&self, v: JetVar) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.degree_in(v) as usize + 1];
        for (m, c) in &self.terms {
            let deg = match m.as_slice() {
                [] => 0,
                [(w, e)] if *w == v => *e as usize,
                _ => return None,
            };
            out[deg] = c.to_f64()?;
        }
        Some(out)
    }
}

fn expand(e: &Expr, memo: &mut HashMap<*const Node, Option<Poly>>) -> Option<Poly> {
    if let Some(hit) = memo.get(&e.ptr()) {
        return hit.clone();
    }
    let out = (|| {
        Some(match e.node() {
            Node::Const(c) => Poly::constant(BigRational::from_float(*c)?),
            Node::Param(_) => return None,
            Node::Var(v) => Poly::var(*v),
            Node::Add(a, b) => expand(a, memo)?.add(&expand(b, memo)?),
            Node::Sub(a, b) => expand(a, memo)?.add(&expand(b, memo)?.neg()),
            Node::Neg(a) => expand(a, memo)?.neg(),
            Node::Mul(a, b) => expand(a, memo)?.mul(&expand(b, memo)?)?,
            Node::Div(a, b) => {
                let den = expand(b, memo)?.as_constant()?;
                if den.is_zero() {
                    return None;
                }
                expand(a, memo)?.scale(&den.recip())
            }
            Node::Pow(a, r) => {
                if !r.is_integer() || *r.numer() < 0 || *r.numer() > 64 {
                    return None;
                }
                let base = expand(a, memo)?;
                let mut acc = Poly::constant(BigRational::from_integer(BigInt::from(1)));
                for _ in 0..*r.numer() {
                    acc = acc.mul(&base)?;
                }
                acc
            }
            Node::Fn(..) => return None,
        })
    })();
    memo.insert(e.ptr(), out.clone());
    out
}
