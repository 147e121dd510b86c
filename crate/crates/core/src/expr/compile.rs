//! Flat stack-machine form of an expression for repeated nodal evaluation.

use std::collections::HashMap;

use num_rational::Rational64;

use super::{rational_pow, Expr, ExprError, Func, JetVar, Node};

#[derive(Clone, Debug)]
enum Op {
    Const(f64),
    Slot(usize),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Powi(i32),
    Pow(Rational64),
    Fn(Func),
}

/// An expression compiled against a fixed list of jet variables. Slot `i`
/// of the input slice holds the value of `slots()[i]`.
#[derive(Clone, Debug)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    slots: Vec<JetVar>,
    depth: usize,
}

impl CompiledExpr {
    /// Compile against the given slot order. Variables outside `slots` and
    /// unbound parameters are errors.
    pub fn new(e: &Expr, slots: &[JetVar]) -> Result<Self, ExprError> {
        if let Some(p) = e.params().into_iter().next() {
            return Err(ExprError::Unbound(p));
        }
        let index: HashMap<JetVar, usize> = slots.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut ops = Vec::new();
        emit(e, &index, &mut ops)?;
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Slot(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        Ok(Self {
            ops,
            slots: slots.to_vec(),
            depth: max_depth,
        })
    }

    pub fn slots(&self) -> &[JetVar] {
        &self.slots
    }

    /// Evaluate with `values[i]` bound to `slots()[i]`.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        self.eval_with(values, &mut stack)
    }

    /// Evaluate reusing a caller-owned stack buffer.
    pub fn eval_with(&self, values: &[f64], stack: &mut Vec<f64>) -> f64 {
        stack.clear();
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Slot(i) => stack.push(values[*i]),
                Op::Neg => {
                    let a = stack.last_mut().unwrap();
                    *a = -*a;
                }
                Op::Powi(n) => {
                    let a = stack.last_mut().unwrap();
                    *a = a.powi(*n);
                }
                Op::Pow(r) => {
                    let a = stack.last_mut().unwrap();
                    *a = rational_pow(*a, *r);
                }
                Op::Fn(f) => {
                    let a = stack.last_mut().unwrap();
                    *a = f.apply(*a);
                }
                bin => {
                    let b = stack.pop().unwrap();
                    let a = stack.last_mut().unwrap();
                    match bin {
                        Op::Add => *a += b,
                        Op::Sub => *a -= b,
                        Op::Mul => *a *= b,
                        Op::Div => *a /= b,
                        _ => unreachable!(),
                    }
                }
            }
        }
        stack.pop().unwrap_or(f64::NAN)
    }
}

fn emit(e: &Expr, index: &HashMap<JetVar, usize>, ops: &mut Vec<Op>) -> Result<(), ExprError> {
    match e.node() {
        Node::Const(c) => ops.push(Op::Const(*c)),
        Node::Param(p) => return Err(ExprError::Unbound(p.to_string())),
        Node::Var(v) => ops.push(Op::Slot(
            *index.get(v).ok_or_else(|| ExprError::Unbound(v.name()))?,
        )),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
            emit(a, index, ops)?;
            emit(b, index, ops)?;
            ops.push(match e.node() {
                Node::Add(..) => Op::Add,
                Node::Sub(..) => Op::Sub,
                Node::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
        Node::Neg(a) => {
            emit(a, index, ops)?;
            ops.push(Op::Neg);
        }
        Node::Pow(a, r) => {
            emit(a, index, ops)?;
            if r.is_integer() && r.numer().abs() <= i32::MAX as i64 {
                ops.push(Op::Powi(*r.numer() as i32));
            } else {
                ops.push(Op::Pow(*r));
            }
        }
        Node::Fn(f, a) => {
            emit(a, index, ops)?;
            ops.push(Op::Fn(*f));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, JetPoint};

    #[test]
    fn matches_tree_evaluation() {
        let e = parse("exp(-u)*ux^3/(u^2 - ux^2) + sqrt(u^2)*m - u^(1/3)", &Default::default()).unwrap();
        let slots = [JetVar::U, JetVar::UX, JetVar::M];
        let c = CompiledExpr::new(&e, &slots).unwrap();
        for &(u, ux, m) in &[(0.7, -0.3, 1.1), (-1.2, 0.4, 0.2), (2.0, 1.5, -0.8)] {
            let pt = JetPoint::new().with(JetVar::U, u).with(JetVar::UX, ux).with(JetVar::M, m);
            let tree = e.eval(&pt).unwrap();
            let flat = c.eval(&[u, ux, m]);
            assert!((tree - flat).abs() <= 1e-14 * tree.abs().max(1.0), "{tree} vs {flat}");
        }
    }

    #[test]
    fn missing_slot_is_an_error() {
        let e = parse("u*m", &Default::default()).unwrap();
        assert!(CompiledExpr::new(&e, &[JetVar::U]).is_err());
    }
}
