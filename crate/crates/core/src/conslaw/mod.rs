//! Conservation-law verdicts for `m_t + f(u,u_x) m + (g(u,u_x) m)_x = 0`.
//!
//! Each law reduces to a condition "some spatial Euler operator image
//! vanishes", decided with the randomized zero test. Closed-form densities
//! and fluxes are attached when the coefficient functions fall inside the
//! supported vocabulary, and every current is re-checked against the
//! off-shell characteristic equation before it is reported.

mod flux;
mod gradient;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::expr::{
    d_x, euler_u, is_zero, parse, Expr, ExprError, JetVar, ParseError, SamplingPolicy, ZeroTestError,
    ZeroVerdict,
};

pub use flux::{
    characteristic_check, characteristic_residual, flux_grad_energy, flux_h1, flux_momentum,
    multiplier_conditions, split_family, ConservedCurrent, FamilyParts, OneVarFn,
};
pub use gradient::{check_grad_energy, GradEnergySet};

#[derive(Debug, Error)]
pub enum ConsLawError {
    #[error("{which}: {source}")]
    Parse {
        which: &'static str,
        source: ParseError,
    },
    #[error("invalid equation: {0}")]
    InvalidEquation(String),
    #[error(transparent)]
    ZeroTest(#[from] ZeroTestError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("not constructible: {0}")]
    NotConstructible(String),
}

/// One member of the equation family, with all parameters bound.
#[derive(Clone, Debug)]
pub struct EquationSpec {
    f: Expr,
    g: Expr,
    params: BTreeMap<String, f64>,
}

impl EquationSpec {
    /// Bind `params` into `f`, `g` and validate: both may depend on `u` and
    /// `u_x` only, and they may not both be constant.
    pub fn new(f: Expr, g: Expr, params: BTreeMap<String, f64>) -> Result<Self, ConsLawError> {
        let f = f.bind_params(&params);
        let g = g.bind_params(&params);
        for (name, e) in [("f", &f), ("g", &g)] {
            if let Some(p) = e.params().into_iter().next() {
                return Err(ConsLawError::InvalidEquation(format!(
                    "{name} uses unbound parameter '{p}'"
                )));
            }
            if let Some(v) = e.vars().into_iter().find(|v| *v != JetVar::U && *v != JetVar::UX) {
                return Err(ConsLawError::InvalidEquation(format!(
                    "{name} may depend on u and ux only, found '{v}'"
                )));
            }
        }
        if f.vars().is_empty() && g.vars().is_empty() {
            return Err(ConsLawError::InvalidEquation(
                "f and g are both constant, so the equation is linear".into(),
            ));
        }
        Ok(Self { f, g, params })
    }

    /// Parse `f` and `g` from the expression grammar. Every key of `params`
    /// is a declared parameter name.
    pub fn parse(f: &str, g: &str, params: &BTreeMap<String, f64>) -> Result<Self, ConsLawError> {
        let declared: BTreeSet<String> = params.keys().cloned().collect();
        let f = parse(f, &declared).map_err(|source| ConsLawError::Parse { which: "f", source })?;
        let g = parse(g, &declared).map_err(|source| ConsLawError::Parse { which: "g", source })?;
        Self::new(f, g, params.clone())
    }

    pub fn f(&self) -> &Expr {
        &self.f
    }

    pub fn g(&self) -> &Expr {
        &self.g
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// The same equation with `f` and `g` multiplied by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            f: self.f.scale(lambda),
            g: self.g.scale(lambda),
            params: self.params.clone(),
        }
    }

    /// `m_t + f m + D_x(g m)` as an off-shell expression.
    pub fn upsilon(&self) -> Expr {
        let m = Expr::m();
        Expr::var(JetVar::MT) + &self.f * &m + d_x(&(&self.g * &m))
    }

    /// `u f - u_x g`, the coefficient that governs the H¹ law.
    pub fn h1_coefficient(&self) -> Expr {
        Expr::u() * &self.f - Expr::ux() * &self.g
    }
}

/// Outcome of one scalar conservation test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawVerdict {
    /// `None` when the zero test was indeterminate.
    pub conserved: Option<bool>,
    pub residual_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<BTreeMap<String, f64>>,
}

impl From<&ZeroVerdict> for LawVerdict {
    fn from(v: &ZeroVerdict) -> Self {
        match v {
            ZeroVerdict::Zero { residual_max, .. } => Self {
                conserved: Some(true),
                residual_max: *residual_max,
                witness: None,
            },
            ZeroVerdict::NonZero {
                witness, residual, ..
            } => Self {
                conserved: Some(false),
                residual_max: *residual,
                witness: Some(witness.named()),
            },
            ZeroVerdict::Indeterminate {
                witness, residual, ..
            } => Self {
                conserved: None,
                residual_max: *residual,
                witness: Some(witness.named()),
            },
        }
    }
}

/// `Ê_u(f m)`; vanishes exactly when momentum is conserved.
pub fn momentum_condition(eq: &EquationSpec) -> Expr {
    euler_u(&(eq.f() * Expr::m()))
}

/// `Ê_u((u f - u_x g) m)`; vanishes exactly when the H¹ norm is conserved.
pub fn h1_condition(eq: &EquationSpec) -> Expr {
    euler_u(&(eq.h1_coefficient() * Expr::m()))
}

pub fn check_momentum(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<ZeroVerdict, ConsLawError> {
    Ok(is_zero(&momentum_condition(eq), policy)?)
}

pub fn check_h1(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<ZeroVerdict, ConsLawError> {
    Ok(is_zero(&h1_condition(eq), policy)?)
}

/// A constructed current, printed in the expression grammar.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NamedFlux {
    pub name: String,
    #[serde(rename = "T")]
    pub density: String,
    #[serde(rename = "Phi")]
    pub flux: String,
    #[serde(rename = "Q")]
    pub multiplier: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservationReport {
    pub f: String,
    pub g: String,
    pub momentum: LawVerdict,
    pub h1: LawVerdict,
    pub grad_energy: GradEnergySet,
    /// `None` when the gradient-energy solve was indeterminate.
    pub l2m: Option<bool>,
    pub weighted_h2: Option<bool>,
    pub fluxes: Vec<NamedFlux>,
    /// Laws that hold but whose current is outside the supported vocabulary.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub not_constructible: Vec<String>,
}

impl ConservationReport {
    /// True if any verdict is indeterminate.
    pub fn is_indeterminate(&self) -> bool {
        self.momentum.conserved.is_none()
            || self.h1.conserved.is_none()
            || matches!(self.grad_energy, GradEnergySet::Indeterminate { .. })
    }

    /// The four Y/N columns (momentum, H¹, L²(m), weighted H²).
    pub fn summary(&self) -> [Option<bool>; 4] {
        [self.momentum.conserved, self.h1.conserved, self.l2m, self.weighted_h2]
    }
}

/// Run all checks and attach every current that can be built and verified.
pub fn classify(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<ConservationReport, ConsLawError> {
    let momentum = check_momentum(eq, policy)?;
    let h1 = check_h1(eq, policy)?;
    let grad = check_grad_energy(eq, policy)?;

    let mut fluxes = Vec::new();
    let mut not_constructible = Vec::new();
    let mut attach = |name: String, built: Result<ConservedCurrent, ConsLawError>| match built {
        Ok(cur) => fluxes.push(cur.named(&name)),
        Err(ConsLawError::NotConstructible(why)) => not_constructible.push(format!("{name}: {why}")),
        Err(e) => not_constructible.push(format!("{name}: {e}")),
    };
    if momentum.is_zero() {
        attach("momentum".into(), flux_momentum(eq, policy));
    }
    if h1.is_zero() {
        attach("h1".into(), flux_h1(eq, policy));
    }
    for (mu, nu) in grad.representatives() {
        attach(
            format!("grad_energy(mu={mu}, nu={nu})"),
            flux_grad_energy(eq, mu, nu, policy),
        );
    }

    Ok(ConservationReport {
        f: eq.f().to_string(),
        g: eq.g().to_string(),
        momentum: LawVerdict::from(&momentum),
        h1: LawVerdict::from(&h1),
        l2m: grad.contains_l2m(),
        weighted_h2: grad.contains_weighted_h2(),
        grad_energy: grad,
        fluxes,
        not_constructible,
    })
}
