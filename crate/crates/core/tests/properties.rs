use peakon::conslaw::{classify, EquationSpec};
use peakon::expr::{d_t, d_x, euler_u, is_zero, to_m_jet, to_u_jet, Expr, Func, JetPoint, JetVar, SamplingPolicy};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn zero(e: &Expr) -> bool {
    is_zero(e, &SamplingPolicy::default()).unwrap().is_zero()
}

fn small_coeff() -> impl Strategy<Value = f64> {
    (-6i32..=6).prop_map(|k| k as f64 / 2.0)
}

/// Sum of monomials `x^a u^b u_x^c` with `a + b + c <= 4`.
fn polynomial_xuux() -> impl Strategy<Value = Expr> {
    prop::collection::vec(((0u32..=4, 0u32..=4, 0u32..=4), small_coeff()), 1..6).prop_map(|terms| {
        let mut acc = Expr::zero();
        for ((a, b, c), k) in terms {
            let (a, b, c) = (a.min(4), b.min(4 - a.min(4)), c.min(4 - a.min(4) - b.min(4 - a.min(4))));
            let mono = Expr::powi(&Expr::var(JetVar::X), a as i64)
                * Expr::powi(&Expr::u(), b as i64)
                * Expr::powi(&Expr::ux(), c as i64);
            acc = acc + k * mono;
        }
        acc
    })
}

/// Expressions of t-order zero in canonical m-jet variables.
fn m_jet_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::u()),
        Just(Expr::ux()),
        Just(Expr::m()),
        Just(Expr::var(JetVar::MX)),
        Just(Expr::var(JetVar::X)),
        small_coeff().prop_map(Expr::constant),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            inner.clone().prop_map(|a| Expr::func(Func::Sin, &a)),
            inner.prop_map(|a| Expr::func(Func::Exp, &a.scale(0.25))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn euler_operator_annihilates_total_derivatives(theta in polynomial_xuux()) {
        prop_assert!(zero(&euler_u(&d_x(&theta))));
    }

    #[test]
    fn total_derivatives_commute(e in m_jet_expr()) {
        let lhs = d_x(&d_t(&e).unwrap());
        let rhs = d_t(&d_x(&e)).unwrap();
        prop_assert!(zero(&(lhs - rhs)));
    }

    #[test]
    fn jet_round_trip(e in m_jet_expr()) {
        prop_assert!(zero(&(to_m_jet(&to_u_jet(&e)) - e)));
    }

    #[test]
    fn euler_operator_is_linear(e1 in m_jet_expr(), e2 in m_jet_expr(), a in small_coeff(), b in small_coeff()) {
        let lhs = euler_u(&(a * e1.clone() + b * e2.clone()));
        let rhs = a * euler_u(&e1) + b * euler_u(&e2);
        prop_assert!(zero(&(lhs - rhs)));
    }

    #[test]
    fn evaluation_is_deterministic(e in m_jet_expr(), seed in any::<u64>()) {
        let pt = JetPoint::new()
            .with(JetVar::X, 0.3)
            .with(JetVar::U, 1.1)
            .with(JetVar::UX, -0.4)
            .with(JetVar::M, 0.7)
            .with(JetVar::MX, 0.2);
        let v1 = e.eval(&pt).unwrap();
        let v2 = e.clone().eval(&pt).unwrap();
        prop_assert_eq!(v1.to_bits(), v2.to_bits());
        let policy = SamplingPolicy::default().with_seed(seed);
        let r1 = serde_json::to_string(&is_zero(&e, &policy).unwrap()).unwrap();
        let r2 = serde_json::to_string(&is_zero(&e, &policy).unwrap()).unwrap();
        prop_assert_eq!(r1, r2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn classification_is_scale_invariant(
        which in 0usize..5,
        lambda in 0.1f64..10.0,
    ) {
        let cases = [
            ("ux", "u"),
            ("2*ux", "u"),
            ("u*ux", "u^2"),
            ("0", "u^2-ux^2"),
            ("ux/u^3", "1/u^2"),
        ];
        let (f, g) = cases[which];
        let eq = EquationSpec::parse(f, g, &BTreeMap::new()).unwrap();
        let policy = SamplingPolicy::default();
        let base = classify(&eq, &policy).unwrap().summary();
        let scaled = classify(&eq.scaled(lambda), &policy).unwrap().summary();
        prop_assert_eq!(base, scaled);
    }
}
