//! Closed-form currents and the off-shell characteristic equation.

use num_rational::Rational64;
use serde::Serialize;

use super::{ConsLawError, EquationSpec, NamedFlux};
use crate::expr::poly::Poly;
use crate::expr::{
    d_t, d_x, euler_u, euler_ut, is_zero, partial, Expr, Func, JetPoint, JetVar, Node,
    SamplingPolicy, ZeroVerdict,
};

/// A conservation law `D_t T + D_x Phi = Q * (equation)` in jet coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedCurrent {
    pub density: Expr,
    pub flux: Expr,
    pub multiplier: Expr,
}

impl ConservedCurrent {
    pub fn new(density: Expr, flux: Expr, multiplier: Expr) -> Self {
        Self {
            density,
            flux,
            multiplier,
        }
    }

    pub fn named(&self, name: &str) -> NamedFlux {
        NamedFlux {
            name: name.to_string(),
            density: self.density.to_string(),
            flux: self.flux.to_string(),
            multiplier: self.multiplier.to_string(),
        }
    }
}

/// `D_t T + D_x Phi - Q * (m_t + f m + D_x(g m))`, which vanishes
/// identically for a genuine current.
pub fn characteristic_residual(cur: &ConservedCurrent, eq: &EquationSpec) -> Result<Expr, ConsLawError> {
    Ok(d_t(&cur.density)? + d_x(&cur.flux) - &cur.multiplier * eq.upsilon())
}

pub fn characteristic_check(
    cur: &ConservedCurrent,
    eq: &EquationSpec,
    policy: &SamplingPolicy,
) -> Result<ZeroVerdict, ConsLawError> {
    Ok(is_zero(&characteristic_residual(cur, eq)?, policy)?)
}

/// The two conditions a density `T(u, u_x, m)` and multiplier `Q` must meet:
/// `Ê_u(D_t T - Q Υ)` and `Ê_{u_t}(D_t T - Q Υ)`.
pub fn multiplier_conditions(
    density: &Expr,
    multiplier: &Expr,
    eq: &EquationSpec,
) -> Result<(Expr, Expr), ConsLawError> {
    let e = d_t(density)? - multiplier * eq.upsilon();
    Ok((euler_u(&e), euler_ut(&e)))
}

/// A function of one variable in the supported antiderivative vocabulary.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum OneVarFn {
    /// Coefficients, lowest degree first.
    Poly { coeffs: Vec<f64> },
    /// `coeff * y^exponent`.
    Power { coeff: f64, exponent: (i64, i64) },
}

impl OneVarFn {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Self::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c),
            Self::Power { coeff, exponent } => {
                coeff * Expr::pow(&Expr::constant(y), Rational64::new(exponent.0, exponent.1))
                    .as_const()
                    .unwrap_or(f64::NAN)
            }
        }
    }

    pub fn to_expr(&self, y: &Expr) -> Expr {
        match self {
            Self::Poly { coeffs } => Expr::sum(
                &coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| Expr::powi(y, k as i64).scale(*c))
                    .collect::<Vec<_>>(),
            ),
            Self::Power { coeff, exponent } => {
                Expr::pow(y, Rational64::new(exponent.0, exponent.1)).scale(*coeff)
            }
        }
    }

    /// Antiderivative vanishing at zero where that makes sense.
    pub fn antiderivative(&self, y: &Expr) -> Expr {
        match self {
            Self::Poly { coeffs } => Expr::sum(
                &coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| Expr::powi(y, k as i64 + 1).scale(c / (k as f64 + 1.0)))
                    .collect::<Vec<_>>(),
            ),
            Self::Power { coeff, exponent } => {
                let r = Rational64::new(exponent.0, exponent.1);
                let r1 = r + 1;
                if r1 == Rational64::from_integer(0) {
                    // integral of 1/y is ln|y| = ln(y^2)/2
                    Expr::func(Func::Ln, &Expr::powi(y, 2)).scale(0.5 * coeff)
                } else {
                    let k = *r1.numer() as f64 / *r1.denom() as f64;
                    Expr::pow(y, r1).scale(coeff / k)
                }
            }
        }
    }
}

/// Decomposition `k(u, u_x) = u_x k1(u^2 - u_x^2) + k0 u / (u^2 - u_x^2)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyParts {
    pub k0: f64,
    pub k1: OneVarFn,
}

fn snap(x: f64, max_den: i64, tol: f64) -> f64 {
    for den in 1..=max_den {
        let r = (x * den as f64).round() / den as f64;
        if (r - x).abs() <= tol * x.abs().max(1.0) {
            return r;
        }
    }
    x
}

fn snap_rational(x: f64, max_den: i64, tol: f64) -> Option<Rational64> {
    (1..=max_den).find_map(|den| {
        let num = (x * den as f64).round();
        ((num / den as f64 - x).abs() <= tol).then(|| Rational64::new(num as i64, den))
    })
}

fn pair_point(u: f64, ux: f64) -> JetPoint {
    JetPoint::new().with(JetVar::U, u).with(JetVar::UX, ux)
}

/// Least-squares polynomial fit of degree `deg` by Gram-Schmidt on the
/// Vandermonde columns. Returns coefficients, lowest first.
fn poly_fit(ys: &[f64], vs: &[f64], deg: usize) -> Option<Vec<f64>> {
    let n = ys.len();
    let cols: Vec<Vec<f64>> = (0..=deg)
        .map(|k| ys.iter().map(|y| y.powi(k as i32)).collect())
        .collect();
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut r = vec![vec![0.0; deg + 1]; deg + 1];
    for (j, col) in cols.iter().enumerate() {
        let mut v = col.clone();
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let p: f64 = qi.iter().zip(&v).map(|(a, b)| a * b).sum();
                r[i][j] += p;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= p * qk;
                }
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv < 1e-12 * (n as f64).sqrt() {
            return None;
        }
        r[j][j] = nv;
        q.push(v.iter().map(|x| x / nv).collect());
    }
    let qtv: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(vs).map(|(a, b)| a * b).sum())
        .collect();
    let mut coeffs = vec![0.0; deg + 1];
    for j in (0..=deg).rev() {
        let s: f64 = (j + 1..=deg).map(|k| r[j][k] * coeffs[k]).sum();
        coeffs[j] = (qtv[j] - s) / r[j][j];
    }
    Some(coeffs)
}

fn fits(f: &OneVarFn, ys: &[f64], vs: &[f64]) -> bool {
    ys.iter().zip(vs).all(|(y, v)| {
        let p = f.eval(*y);
        p.is_finite() && (p - v).abs() <= 1e-7 * v.abs().max(1.0)
    })
}

fn fit_one_var(ys: &[f64], vs: &[f64]) -> Option<OneVarFn> {
    const MAX_DEGREE: usize = 6;
    for deg in 0..=MAX_DEGREE.min(ys.len().saturating_sub(2)) {
        let Some(raw) = poly_fit(ys, vs, deg) else { break };
        let coeffs: Vec<f64> = raw.iter().map(|c| snap(*c, 720, 1e-7)).collect();
        let candidate = OneVarFn::Poly { coeffs };
        if fits(&candidate, ys, vs) {
            return Some(candidate);
        }
    }
    // c * y^r from two positive abscissae
    let pos: Vec<(f64, f64)> = ys
        .iter()
        .zip(vs)
        .filter(|(y, v)| **y > 0.0 && v.abs() > 0.0)
        .map(|(y, v)| (*y, *v))
        .collect();
    let (&(y1, v1), &(y2, v2)) = (pos.first()?, pos.last()?);
    if y1 == y2 || v1.signum() != v2.signum() {
        return None;
    }
    let r = snap_rational((v2 / v1).ln() / (y2 / y1).ln(), 12, 1e-7)?;
    let rf = *r.numer() as f64 / *r.denom() as f64;
    let coeff = snap(v1 / y1.powf(rf), 720, 1e-7);
    let candidate = OneVarFn::Power {
        coeff,
        exponent: (*r.numer(), *r.denom()),
    };
    fits(&candidate, ys, vs).then_some(candidate)
}

/// `u^2 - u_x^2`.
fn y_expr() -> Expr {
    Expr::powi(&Expr::u(), 2) - Expr::powi(&Expr::ux(), 2)
}

/// `ln(((u - u_x)/(u + u_x))^2)`, twice the log-ratio and defined off the
/// excluded loci regardless of sign.
fn log_ratio_twice() -> Expr {
    let (u, ux) = (Expr::u(), Expr::ux());
    Expr::func(Func::Ln, &Expr::powi(&((&u - &ux) / (&u + &ux)), 2))
}

/// Recover `k0` and `k1` from samples of `k` and confirm the decomposition
/// with the zero test.
pub fn split_family(k: &Expr, policy: &SamplingPolicy) -> Result<FamilyParts, ConsLawError> {
    if k.vars().iter().any(|v| *v != JetVar::U && *v != JetVar::UX) {
        return Err(ConsLawError::NotConstructible(
            "coefficient depends on more than u and ux".into(),
        ));
    }
    // along a level set of y two points give two equations in (k1(y), k0)
    let mut ys = Vec::new();
    let mut k1s = Vec::new();
    let mut k0s = Vec::new();
    for i in 1..=10 {
        for sign in [1.0, -1.0] {
            let y = sign * 0.25 * i as f64;
            let pts: Vec<(f64, f64)> = if y > 0.0 {
                [0.3, 0.7].iter().map(|&ux: &f64| ((y + ux * ux).sqrt(), ux)).collect()
            } else {
                [0.3, 0.7].iter().map(|&u: &f64| (u, (u * u - y).sqrt())).collect()
            };
            let vals: Vec<f64> = pts
                .iter()
                .map(|&(u, ux)| k.eval(&pair_point(u, ux)).unwrap_or(f64::NAN))
                .collect();
            if vals.iter().any(|v| !v.is_finite()) {
                continue;
            }
            let (a11, a12) = (pts[0].1, pts[0].0 / y);
            let (a21, a22) = (pts[1].1, pts[1].0 / y);
            let det = a11 * a22 - a12 * a21;
            let k1 = (vals[0] * a22 - a12 * vals[1]) / det;
            let k0 = (a11 * vals[1] - a21 * vals[0]) / det;
            ys.push(y);
            k1s.push(k1);
            k0s.push(k0);
        }
    }
    if ys.len() < 4 {
        return Err(ConsLawError::NotConstructible(
            "coefficient is not finite on enough sample points".into(),
        ));
    }
    let mut sorted = k0s.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    if k0s.iter().any(|k| (k - median).abs() > 1e-7 * median.abs().max(1.0)) {
        return Err(ConsLawError::NotConstructible(
            "coefficient is not of the form u_x k1(y) + k0 u/y".into(),
        ));
    }
    let k0 = snap(median, 720, 1e-8);
    let k0 = if k0.abs() < 1e-10 { 0.0 } else { k0 };
    let k1 = fit_one_var(&ys, &k1s).ok_or_else(|| {
        ConsLawError::NotConstructible("k1 is neither a polynomial nor a power of y".into())
    })?;
    let rebuilt = Expr::ux() * k1.to_expr(&y_expr()) + (Expr::u() / y_expr()).scale(k0);
    match is_zero(&(k - rebuilt), policy)? {
        ZeroVerdict::Zero { .. } => Ok(FamilyParts { k0, k1 }),
        _ => Err(ConsLawError::NotConstructible(
            "fitted decomposition does not reproduce the coefficient".into(),
        )),
    }
}

/// `1/2 K1(y) + 1/4 k0 ln(((u - u_x)/(u + u_x))^2) + k0 x`, whose x-derivative
/// is `k m` for `k` in the family form.
fn family_potential(parts: &FamilyParts) -> Expr {
    let mut out = parts.k1.antiderivative(&y_expr()).scale(0.5);
    if parts.k0 != 0.0 {
        out = out + log_ratio_twice().scale(0.25 * parts.k0) + Expr::var(JetVar::X).scale(parts.k0);
    }
    out
}

fn verified(
    cur: ConservedCurrent,
    eq: &EquationSpec,
    policy: &SamplingPolicy,
) -> Result<ConservedCurrent, ConsLawError> {
    match characteristic_check(&cur, eq, policy)? {
        ZeroVerdict::Zero { .. } => Ok(cur),
        other => Err(ConsLawError::NotConstructible(format!(
            "constructed current fails the characteristic equation (residual {:.3e})",
            other.residual()
        ))),
    }
}

/// Momentum current with density `u`.
pub fn flux_momentum(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<ConservedCurrent, ConsLawError> {
    let parts = split_family(eq.f(), policy)?;
    let flux = eq.g() * Expr::m() - Expr::var(JetVar::UTX) + family_potential(&parts);
    verified(ConservedCurrent::new(Expr::u(), flux, Expr::one()), eq, policy)
}

/// H¹ current with density `u_x^2 + u^2`.
pub fn flux_h1(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<ConservedCurrent, ConsLawError> {
    let parts = split_family(&eq.h1_coefficient(), policy)?;
    let u = Expr::u();
    let flux = (&u * eq.g() * Expr::m()).scale(2.0) - (&u * Expr::var(JetVar::UTX)).scale(2.0)
        + family_potential(&parts).scale(2.0);
    let density = Expr::powi(&Expr::ux(), 2) + Expr::powi(&u, 2);
    verified(ConservedCurrent::new(density, flux, u.scale(2.0)), eq, policy)
}

/// Gradient-energy current for the given `(mu, nu)`. At `(2, 0)` the
/// equivalent `T = m^2` form is returned.
pub fn flux_grad_energy(
    eq: &EquationSpec,
    mu: f64,
    nu: f64,
    policy: &SamplingPolicy,
) -> Result<ConservedCurrent, ConsLawError> {
    let (u, ux, m) = (Expr::u(), Expr::ux(), Expr::m());
    let g = eq.g();
    if (mu - 2.0).abs() < 1e-12 && nu.abs() < 1e-12 {
        let m2 = Expr::powi(&m, 2);
        return verified(ConservedCurrent::new(m2.clone(), g * &m2, m.scale(2.0)), eq, policy);
    }
    let ut = Expr::var(JetVar::UT);
    let utx = Expr::var(JetVar::UTX);
    let uxx = &u - &m;
    let density = Expr::powi(&uxx, 2)
        + Expr::powi(&ux, 2).scale(mu)
        + Expr::powi(&u, 2).scale(mu - 1.0)
        + u.scale(2.0 * nu);
    // (mu - 2) u + nu
    let shift = u.scale(mu - 2.0) + Expr::constant(nu);
    let mut flux = (u.scale(1.0 - mu) - Expr::constant(nu)).scale(2.0) * &utx
        - (&ux * &ut).scale(2.0)
        + (shift.scale(2.0) + &m) * &m * g
        + (y_expr().scale(2.0 - mu) - u.scale(nu)) * g
        + (shift.scale(0.5) * Expr::powi(&ux, 2)) * partial(g, JetVar::U);
    if nu != 0.0 {
        let anti = integrate_u(g).ok_or_else(|| {
            ConsLawError::NotConstructible("no closed-form antiderivative of g in u".into())
        })?;
        flux = flux + anti.scale(nu);
    }
    let multiplier = (&m + &shift).scale(2.0);
    verified(ConservedCurrent::new(density, flux, multiplier), eq, policy)
}

fn is_constant(e: &Expr) -> bool {
    e.vars().is_empty() && e.params().is_empty()
}

fn const_value(e: &Expr) -> Option<f64> {
    is_constant(e).then(|| e.eval(&JetPoint::new()).ok()).flatten()
}

/// Slope of `e` in `u` when `e` is affine in `u` and free of everything else.
fn affine_slope(e: &Expr) -> Option<f64> {
    if e.vars().iter().any(|v| *v != JetVar::U) {
        return None;
    }
    const_value(&partial(e, JetVar::U)).filter(|a| *a != 0.0)
}

/// Antiderivative in `u` for expressions of `u` alone built from sums,
/// constant multiples, powers of affine functions, and `exp`, `sin`, `cos`
/// of affine functions. Falls back to term-wise polynomial integration.
pub(crate) fn integrate_u(e: &Expr) -> Option<Expr> {
    if e.vars().iter().any(|v| *v != JetVar::U) {
        return None;
    }
    if is_constant(e) {
        return Some(e * Expr::u());
    }
    let direct = match e.node() {
        Node::Add(a, b) => Some(integrate_u(a)? + integrate_u(b)?),
        Node::Sub(a, b) => Some(integrate_u(a)? - integrate_u(b)?),
        Node::Neg(a) => Some(-integrate_u(a)?),
        Node::Mul(a, b) if is_constant(a) => Some(a * integrate_u(b)?),
        Node::Mul(a, b) if is_constant(b) => Some(integrate_u(a)? * b),
        Node::Div(a, b) if is_constant(b) => Some(integrate_u(a)? / b),
        Node::Div(a, b) if is_constant(a) => {
            let (base, r) = match b.node() {
                Node::Pow(base, r) => (base.clone(), -*r),
                _ => (b.clone(), Rational64::from_integer(-1)),
            };
            Some(a * integrate_power(&base, r)?)
        }
        Node::Var(JetVar::U) => Some(Expr::powi(&Expr::u(), 2).scale(0.5)),
        Node::Pow(base, r) => integrate_power(base, *r),
        Node::Fn(f, arg) => {
            let a = affine_slope(arg)?;
            match f {
                Func::Exp => Some(e.scale(1.0 / a)),
                Func::Sin => Some(Expr::func(Func::Cos, arg).scale(-1.0 / a)),
                Func::Cos => Some(Expr::func(Func::Sin, arg).scale(1.0 / a)),
                _ => None,
            }
        }
        _ => None,
    };
    direct.or_else(|| {
        let coeffs = Poly::from_expr(e)?.univariate(JetVar::U)?;
        Some(OneVarFn::Poly { coeffs }.antiderivative(&Expr::u()))
    })
}

fn integrate_power(base: &Expr, r: Rational64) -> Option<Expr> {
    let a = affine_slope(base)?;
    let r1 = r + 1;
    if r1 == Rational64::from_integer(0) {
        return Some(Expr::func(Func::Ln, &Expr::powi(base, 2)).scale(0.5 / a));
    }
    let k = *r1.numer() as f64 / *r1.denom() as f64;
    Some(Expr::pow(base, r1).scale(1.0 / (a * k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::collections::BTreeMap;

    fn eq(f: &str, g: &str) -> EquationSpec {
        EquationSpec::parse(f, g, &BTreeMap::new()).unwrap()
    }

    fn p() -> SamplingPolicy {
        SamplingPolicy::default()
    }

    fn expr(s: &str) -> Expr {
        parse(s, &Default::default()).unwrap()
    }

    #[test]
    fn camassa_holm_momentum_flux() {
        let e = eq("ux", "u");
        let cur = flux_momentum(&e, &p()).unwrap();
        let expected = expr("u*m - utx + (u^2 - ux^2)/2");
        assert!(is_zero(&(&cur.flux - expected), &p()).unwrap().is_zero());
        assert_eq!(cur.multiplier, Expr::one());
    }

    #[test]
    fn corrupted_flux_is_detected() {
        let e = eq("ux", "u");
        let mut cur = flux_momentum(&e, &p()).unwrap();
        cur.flux = &cur.flux + Expr::u();
        let v = characteristic_check(&cur, &e, &p()).unwrap();
        assert!(v.is_nonzero(), "{v:?}");
    }

    #[test]
    fn purely_spatial_law_of_the_worked_example() {
        let e = eq("-2*u*ux", "u^2 - 3*ux^2");
        let phi = expr("(u^3 - u*ux^2 - (u^2 - 3*ux^2)*m + utx)^2 - (u^2*ux - ux^3 + ut)^2");
        let q = expr("2*u*(ux^2 - u^2) + 2*(u^2 - 3*ux^2)*m - 2*utx");
        let cur = ConservedCurrent::new(Expr::zero(), phi, q);
        let v = characteristic_check(&cur, &e, &p()).unwrap();
        assert!(v.is_zero(), "{v:?}");
        assert!(v.residual() < 1e-9);
    }

    #[test]
    fn modified_camassa_holm_h1_flux() {
        let e = eq("0", "u^2 - ux^2");
        let cur = flux_h1(&e, &p()).unwrap();
        let parts = split_family(&e.h1_coefficient(), &p()).unwrap();
        assert_eq!(parts.k0, 0.0);
        assert_eq!(parts.k1, OneVarFn::Poly { coeffs: vec![0.0, -1.0] });
        assert_eq!(cur.multiplier, Expr::u().scale(2.0));
    }

    #[test]
    fn l2_flux_for_quadratic_h() {
        let e = eq("-u*ux", "u^2");
        let cur = flux_grad_energy(&e, 2.0, 0.0, &p()).unwrap();
        assert_eq!(cur.density, Expr::powi(&Expr::m(), 2));
        assert!(is_zero(&(&cur.flux - expr("u^2*m^2")), &p()).unwrap().is_zero());
    }

    #[test]
    fn weighted_h2_and_shifted_fluxes() {
        let e = eq("ux/u^3", "1/u^2");
        for mu in [0.0, 3.0, -1.5] {
            flux_grad_energy(&e, mu, 0.0, &p()).unwrap();
        }
        // nu = (mu - 2) beta requires the antiderivative of g
        let e = eq("ux/(u + 3)^3", "1/(u + 3)^2");
        flux_grad_energy(&e, 4.0, 6.0, &p()).unwrap();
        let e = eq("3*ux", "-6*u + 1");
        flux_grad_energy(&e, 2.0, 5.0, &p()).unwrap();
    }

    #[test]
    fn logarithmic_family_member() {
        // k0 = 1, k1 = 2 y
        let e = eq("2*ux*(u^2 - ux^2) + u/(u^2 - ux^2)", "u");
        let parts = split_family(e.f(), &p()).unwrap();
        assert_eq!(parts.k0, 1.0);
        flux_momentum(&e, &p()).unwrap();
    }

    #[test]
    fn power_family_member() {
        let e = eq("ux*(u^2 - ux^2)^(1/2)", "u");
        let parts = split_family(e.f(), &p()).unwrap();
        assert_eq!(
            parts.k1,
            OneVarFn::Power {
                coeff: 1.0,
                exponent: (1, 2)
            }
        );
    }

    #[test]
    fn non_family_coefficient_is_rejected() {
        assert!(matches!(
            split_family(&expr("u*ux"), &p()),
            Err(ConsLawError::NotConstructible(_))
        ));
    }

    #[test]
    fn multiplier_conditions_examples() {
        let z = |e: &Expr| is_zero(e, &p()).unwrap().is_zero();
        let (a, b) = multiplier_conditions(&Expr::m(), &Expr::one(), &eq("ux", "u")).unwrap();
        assert!(z(&a) && z(&b));
        let t = expr("ux^2 + u^2");
        let (a, b) = multiplier_conditions(&t, &Expr::u().scale(2.0), &eq("0", "u^2 - ux^2")).unwrap();
        assert!(z(&a) && z(&b));
        let t = expr("(u - m)^2 + 2*ux^2 + u^2");
        let (a, b) = multiplier_conditions(&t, &Expr::m().scale(2.0), &eq("-u*ux", "u^2")).unwrap();
        assert!(z(&a) && z(&b));
    }

    #[test]
    fn antiderivatives() {
        for g in ["1/(u + 1/2)^2", "3*u^2 - 1", "exp(2*u)", "1/u", "u^(1/2)", "2*sin(3*u - 1)"] {
            let got = integrate_u(&expr(g)).unwrap();
            let diff = partial(&got, JetVar::U) - expr(g);
            assert!(is_zero(&diff, &p()).unwrap().is_zero(), "{g}");
        }
    }
}
