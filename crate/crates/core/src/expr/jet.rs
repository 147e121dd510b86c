//! Total derivatives, the `m <-> u`-jet substitution and spatial Euler
//! operators.
//!
//! Two coordinate systems are in use. The canonical m-jet keeps only `u`,
//! `u_x` (and `u_t`, `u_tx`) from the u-family and expresses every higher
//! derivative through `m = u - u_xx`. The pure u-jet has no `m` at all;
//! Euler operators are applied there and mapped back.

use std::collections::HashMap;

use super::{Base, Expr, ExprError, Func, JetVar, Node};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Chart {
    Canonical,
    PureU,
}

fn dx_var(v: JetVar, chart: Chart) -> Expr {
    match v {
        JetVar::X => Expr::one(),
        JetVar::T => Expr::zero(),
        JetVar::Deriv { base: Base::M, dx, dt } => Expr::var(JetVar::m(dx + 1, dt)),
        JetVar::Deriv { base: Base::U, dx, dt } => {
            if chart == Chart::Canonical && dx == 1 {
                // u_xx = u - m, u_txx = u_t - m_t
                Expr::var(JetVar::u(0, dt)) - Expr::var(JetVar::m(0, dt))
            } else {
                Expr::var(JetVar::u(dx + 1, dt))
            }
        }
    }
}

fn dt_var(v: JetVar) -> Result<Expr, ExprError> {
    match v {
        JetVar::X => Ok(Expr::zero()),
        JetVar::T => Ok(Expr::one()),
        JetVar::Deriv { base, dx, dt } => {
            if dt >= super::MAX_T_ORDER {
                return Err(ExprError::TimeOrder(v.name()));
            }
            Ok(Expr::var(JetVar::Deriv { base, dx, dt: dt + 1 }))
        }
    }
}

/// Chain rule with a per-call memo so shared subtrees are differentiated once.
struct Differ<'a> {
    leaf: &'a dyn Fn(JetVar) -> Result<Expr, ExprError>,
    memo: HashMap<*const Node, Expr>,
}

impl Differ<'_> {
    fn run(&mut self, e: &Expr) -> Result<Expr, ExprError> {
        if let Some(hit) = self.memo.get(&e.ptr()) {
            return Ok(hit.clone());
        }
        let out = match e.node() {
            Node::Const(_) | Node::Param(_) => Expr::zero(),
            Node::Var(v) => (self.leaf)(*v)?,
            Node::Add(a, b) => self.run(a)? + self.run(b)?,
            Node::Sub(a, b) => self.run(a)? - self.run(b)?,
            Node::Neg(a) => -self.run(a)?,
            Node::Mul(a, b) => {
                let (da, db) = (self.run(a)?, self.run(b)?);
                &da * b + a * &db
            }
            Node::Div(a, b) => {
                let (da, db) = (self.run(a)?, self.run(b)?);
                if db.is_const_zero() {
                    &da / b
                } else {
                    &da / b - (a * &db) / Expr::powi(b, 2)
                }
            }
            Node::Pow(a, r) => {
                let da = self.run(a)?;
                if da.is_const_zero() {
                    Expr::zero()
                } else {
                    let coeff = *r.numer() as f64 / *r.denom() as f64;
                    Expr::pow(a, r - 1).scale(coeff) * da
                }
            }
            Node::Fn(f, a) => {
                let da = self.run(a)?;
                if da.is_const_zero() {
                    Expr::zero()
                } else {
                    let outer = match f {
                        Func::Exp => e.clone(),
                        Func::Ln => Expr::one() / a,
                        Func::Sqrt => Expr::constant(0.5) / e,
                        Func::Sin => Expr::func(Func::Cos, a),
                        Func::Cos => -Expr::func(Func::Sin, a),
                        Func::Arctanh => Expr::one() / (Expr::one() - Expr::powi(a, 2)),
                    };
                    outer * da
                }
            }
        };
        self.memo.insert(e.ptr(), out.clone());
        Ok(out)
    }
}

fn differentiate(
    e: &Expr,
    leaf: &dyn Fn(JetVar) -> Result<Expr, ExprError>,
) -> Result<Expr, ExprError> {
    Differ {
        leaf,
        memo: HashMap::new(),
    }
    .run(e)
}

/// Partial derivative with respect to one jet coordinate, all others held fixed.
pub fn partial(e: &Expr, v: JetVar) -> Expr {
    let leaf = move |w: JetVar| Ok(if w == v { Expr::one() } else { Expr::zero() });
    differentiate(e, &leaf).expect("partial derivatives never fail")
}

fn total_dx(e: &Expr, chart: Chart) -> Expr {
    let leaf = move |v: JetVar| Ok(dx_var(v, chart));
    differentiate(e, &leaf).expect("x-derivatives never fail")
}

/// Total x-derivative in canonical m-jet coordinates.
pub fn d_x(e: &Expr) -> Expr {
    total_dx(&to_m_jet(e), Chart::Canonical)
}

/// Off-shell total t-derivative. Fails if `e` already carries a t-derivative.
pub fn d_t(e: &Expr) -> Result<Expr, ExprError> {
    if let Some(v) = e.vars().into_iter().find(|v| v.t_order() >= super::MAX_T_ORDER) {
        return Err(ExprError::TimeOrder(v.name()));
    }
    differentiate(e, &dt_var)
}

/// Replace every derivative of `m` by `u^(k) - u^(k+2)`.
pub fn to_u_jet(e: &Expr) -> Expr {
    e.map_leaves(&mut |n| match n {
        Node::Var(JetVar::Deriv { base: Base::M, dx, dt }) => {
            Some(Expr::var(JetVar::u(*dx, *dt)) - Expr::var(JetVar::u(dx + 2, *dt)))
        }
        _ => None,
    })
}

fn canonical_u(dx: u8, dt: u8) -> Expr {
    if dx <= 1 {
        Expr::var(JetVar::u(dx, dt))
    } else {
        canonical_u(dx - 2, dt) - Expr::var(JetVar::m(dx - 2, dt))
    }
}

/// Eliminate `u^(k)`, `k >= 2`, in favour of derivatives of `m`.
pub fn to_m_jet(e: &Expr) -> Expr {
    if e.vars().iter().all(|v| v.is_canonical()) {
        return e.clone();
    }
    e.map_leaves(&mut |n| match n {
        Node::Var(JetVar::Deriv { base: Base::U, dx, dt }) if *dx >= 2 => {
            Some(canonical_u(*dx, *dt))
        }
        _ => None,
    })
}

fn euler(e: &Expr, dt: u8) -> Expr {
    let pure = to_u_jet(e);
    let top = pure
        .vars()
        .iter()
        .filter_map(|v| match *v {
            JetVar::Deriv { base: Base::U, dx, dt: d } if d == dt => Some(dx),
            _ => None,
        })
        .max();
    let Some(top) = top else {
        return Expr::zero();
    };
    // Horner form: E = d_0 - D(d_1 - D(d_2 - ...))
    let mut acc = partial(&pure, JetVar::u(top, dt));
    for k in (0..top).rev() {
        acc = partial(&pure, JetVar::u(k, dt)) - total_dx(&acc, Chart::PureU);
    }
    to_m_jet(&acc)
}

/// Spatial Euler operator with respect to `u`.
pub fn euler_u(e: &Expr) -> Expr {
    euler(e, 0)
}

/// Spatial Euler operator with respect to `u_t`.
pub fn euler_ut(e: &Expr) -> Expr {
    euler(e, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{is_zero, SamplingPolicy, ZeroVerdict};

    fn zero(e: &Expr) -> bool {
        matches!(
            is_zero(e, &SamplingPolicy::default()).unwrap(),
            ZeroVerdict::Zero { .. }
        )
    }

    fn u() -> Expr {
        Expr::u()
    }
    fn ux() -> Expr {
        Expr::ux()
    }
    fn m() -> Expr {
        Expr::m()
    }

    #[test]
    fn dx_of_square() {
        assert!(zero(&(d_x(&(u() * u())) - 2.0 * u() * ux())));
    }

    #[test]
    fn dx_of_ux_uses_m() {
        assert!(zero(&(d_x(&ux()) - (u() - m()))));
    }

    #[test]
    fn dx_product() {
        let lhs = d_x(&(u() * ux()));
        let rhs = ux() * ux() + u() * (u() - m());
        assert!(zero(&(lhs - rhs)));
    }

    #[test]
    fn dx_of_time_coordinates() {
        let utx = Expr::var(JetVar::UTX);
        let expected = Expr::var(JetVar::UT) - Expr::var(JetVar::MT);
        assert!(zero(&(d_x(&utx) - expected)));
        assert_eq!(d_x(&Expr::var(JetVar::X)), Expr::one());
        assert_eq!(d_x(&Expr::var(JetVar::T)), Expr::zero());
    }

    #[test]
    fn dt_of_h1_density() {
        let t = ux() * ux() + u() * u();
        let expected = 2.0 * ux() * Expr::var(JetVar::UTX) + 2.0 * u() * Expr::var(JetVar::UT);
        assert!(zero(&(d_t(&t).unwrap() - expected)));
    }

    #[test]
    fn dt_of_m() {
        assert_eq!(d_t(&m()).unwrap(), Expr::var(JetVar::MT));
        let e = d_t(&(m() * m())).unwrap() - 2.0 * m() * Expr::var(JetVar::MT);
        assert!(zero(&e));
    }

    #[test]
    fn dt_rejects_time_derivatives() {
        assert!(matches!(
            d_t(&Expr::var(JetVar::UT)),
            Err(ExprError::TimeOrder(_))
        ));
    }

    #[test]
    fn u_jet_of_m() {
        let e = to_u_jet(&m());
        assert_eq!(e, u() - Expr::var(JetVar::u(2, 0)));
    }

    #[test]
    fn m_jet_of_uxxx() {
        let e = to_m_jet(&Expr::var(JetVar::u(3, 0)));
        assert_eq!(e, ux() - Expr::var(JetVar::MX));
    }

    #[test]
    fn m_jet_round_trip() {
        let e = ux() * m();
        assert!(zero(&(to_m_jet(&to_u_jet(&e)) - &e)));
    }

    #[test]
    fn euler_of_polynomial() {
        assert!(zero(&(euler_u(&(u() * u())) - 2.0 * u())));
    }

    #[test]
    fn euler_kills_total_derivatives() {
        assert!(zero(&euler_u(&d_x(&(u() * ux())))));
    }

    #[test]
    fn euler_of_camassa_holm_momentum_term() {
        assert!(zero(&euler_u(&(ux() * m()))));
    }

    #[test]
    fn euler_ut_of_h1_time_derivative() {
        // E_ut(2 u_x u_tx + 2 u u_t) = 2m
        let dtt = d_t(&(ux() * ux() + u() * u())).unwrap();
        assert!(zero(&(euler_ut(&dtt) - 2.0 * m())));
        assert!(zero(&(euler_u(&dtt) - 2.0 * Expr::var(JetVar::MT))));
    }
}
