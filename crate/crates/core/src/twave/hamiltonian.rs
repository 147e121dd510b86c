//! Travelling waves of the Hamiltonian family `f = u_x f₁(y)`,
//! `g = u f₁(y) + g₁(y)` with `y = u² - u_x²`.

use serde::Serialize;

use super::TwaveError;
use crate::expr::poly::Poly;
use crate::expr::{Expr, JetVar};

/// Polynomial coefficients of `f₁` and `g₁` in `y`, lowest degree first.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonianFamily {
    pub f1: Vec<f64>,
    pub g1: Vec<f64>,
}

/// The momentum and `H¹` first integrals `Φ - cT` at one point, and the
/// left side of the first-order ODE obtained by eliminating `U''`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HamiltonianValues {
    /// `-c(U - U'') + F₁/2 + (U - U'')(U f₁ + g₁)`
    pub momentum: f64,
    /// `-c(U² + U'²) + 2cUU'' - G₁ + 2U(U - U'')(U f₁ + g₁)`
    pub h1: f64,
    /// `(U'² - U²)(U F̃₁ + G̃₁ - c)`
    pub ode_lhs: f64,
    /// `ode_lhs - (h1 - 2U momentum)`, zero up to rounding.
    pub ode_residual: f64,
}

/// What decay at infinity leaves of the first-order ODE.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DecayAnalysis {
    /// `g₁(0) = 0`: decay forces `U'² = U²` or `U ≡ 0`.
    NoSmoothSolitaryWave,
    /// A smooth decaying branch can exist only at this speed.
    FixedSpeedOnly { speed: f64 },
}

/// How supplied samples `(U, U')` sit against the decayed ODE
/// `(U'² - U²)(U F̃₁ + G̃₁ - c) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BranchReport {
    /// Samples where the speed factor is away from zero.
    pub speed_factor_nonzero: usize,
    /// Of those, samples with `U'² = U²` as the ODE then demands.
    pub unit_slope: usize,
    /// True if every sample with a nonzero speed factor has `U'² = U²`.
    pub forces_unit_slope: bool,
}

fn eval(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

/// `∫₀¹ p(λy) dλ`.
fn averaged(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, c)| acc * y + c / (k + 1) as f64)
}

fn coefficients(e: &Expr, which: &str) -> Result<Vec<f64>, TwaveError> {
    let not_poly = || TwaveError::NotPolynomial(format!("{which} must be a polynomial in u (standing for y)"));
    if e.vars().iter().any(|v| *v != JetVar::U) {
        return Err(not_poly());
    }
    let mut coeffs = Poly::from_expr(e).and_then(|p| p.univariate(JetVar::U)).ok_or_else(not_poly)?;
    if coeffs.is_empty() {
        coeffs.push(0.0);
    }
    Ok(coeffs)
}

impl HamiltonianFamily {
    pub fn from_coeffs(f1: Vec<f64>, g1: Vec<f64>) -> Self {
        Self { f1, g1 }
    }

    /// From expressions in the single variable `u`, read as `y`.
    pub fn from_exprs(f1: &Expr, g1: &Expr) -> Result<Self, TwaveError> {
        Ok(Self {
            f1: coefficients(f1, "f1")?,
            g1: coefficients(g1, "g1")?,
        })
    }

    pub fn first_integrals(&self, u: f64, up: f64, upp: f64, c: f64) -> HamiltonianValues {
        let y = u * u - up * up;
        let (f1, g1) = (eval(&self.f1, y), eval(&self.g1, y));
        let (ft, gt) = (averaged(&self.f1, y), averaged(&self.g1, y));
        let m = u - upp;
        let g = u * f1 + g1;
        let momentum = -c * m + 0.5 * y * ft + m * g;
        let h1 = -c * (u * u + up * up) + 2.0 * c * u * upp - y * gt + 2.0 * u * m * g;
        let ode_lhs = (up * up - u * u) * (u * ft + gt - c);
        HamiltonianValues {
            momentum,
            h1,
            ode_lhs,
            ode_residual: ode_lhs - (h1 - 2.0 * u * momentum),
        }
    }

    /// With `c₁ = c₂ = 0` the speed factor tends to `g₁(0) - c` at the tails.
    pub fn decay_analysis(&self) -> DecayAnalysis {
        let g0 = eval(&self.g1, 0.0);
        if g0 == 0.0 {
            DecayAnalysis::NoSmoothSolitaryWave
        } else {
            DecayAnalysis::FixedSpeedOnly { speed: g0 }
        }
    }

    pub fn branch_report(&self, c: f64, samples: &[(f64, f64)], tol: f64) -> BranchReport {
        let mut speed_factor_nonzero = 0;
        let mut unit_slope = 0;
        for &(u, up) in samples {
            let y = u * u - up * up;
            let factor = u * averaged(&self.f1, y) + averaged(&self.g1, y) - c;
            if factor.abs() > tol {
                speed_factor_nonzero += 1;
                if (up * up - u * u).abs() <= tol * (u * u).max(tol) {
                    unit_slope += 1;
                }
            }
        }
        BranchReport {
            speed_factor_nonzero,
            unit_slope,
            forces_unit_slope: unit_slope == speed_factor_nonzero,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{Grid, Spectral};
    use crate::twave::quad;

    /// Smooth periodic travelling wave of CH oscillating between the middle
    /// and upper roots of `U³ - cU² - 2c₁U + c₂`.
    fn ch_periodic_wave(n: usize) -> (f64, Vec<f64>, f64, f64, f64) {
        let (r3, r1, r2) = (0.5, 1.0, 1.5);
        let c = r1 + r2 + r3;
        let c1 = -0.5 * (r1 * r2 + r1 * r3 + r2 * r3);
        let c2 = -r1 * r2 * r3;
        let u_of = |th: f64| r1 + (r2 - r1) * th.sin().powi(2);
        let dxi = |th: f64| {
            let u = u_of(th);
            2.0 * ((c - u) / (u - r3)).sqrt()
        };
        let xi_of = |th: f64| quad::integrate(dxi, 0.0, th, 8);
        let period = xi_of(std::f64::consts::PI);
        let u: Vec<f64> = (0..n)
            .map(|j| {
                let target = period * j as f64 / n as f64;
                let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if xi_of(mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                u_of(0.5 * (lo + hi))
            })
            .collect();
        (period, u, c, c1, c2)
    }

    #[test]
    fn ch_periodic_wave_first_integrals() {
        let n = 128;
        let (period, u, c, c1, c2) = ch_periodic_wave(n);
        let sp = Spectral::new(Grid::new(period, n).unwrap());
        let up = sp.derivative(&u);
        let upp = sp.derivative(&up);
        let ch = HamiltonianFamily::from_coeffs(vec![1.0], vec![0.0]);
        for j in 0..n {
            let v = ch.first_integrals(u[j], up[j], upp[j], c);
            assert!((v.momentum - c1).abs() < 1e-6, "{j} {v:?}");
            assert!((v.h1 - c2).abs() < 1e-6, "{j} {v:?}");
            assert!((v.ode_lhs - (c2 - 2.0 * c1 * u[j])).abs() < 1e-6);
            assert!(v.ode_residual.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_wave_gives_zero_integrals() {
        let fam = HamiltonianFamily::from_coeffs(vec![1.0, 2.0], vec![0.5, -1.0]);
        let v = fam.first_integrals(0.0, 0.0, 0.0, 1.7);
        assert_eq!((v.momentum, v.h1, v.ode_lhs, v.ode_residual), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_holds_at_random_points() {
        let fam = HamiltonianFamily::from_coeffs(vec![0.3, -1.0, 0.25], vec![2.0, 0.5]);
        for (u, up, upp, c) in [(0.4, -0.2, 1.1, 0.7), (-1.3, 0.9, 0.2, 2.5), (2.0, 2.5, -3.0, 0.1)] {
            assert!(fam.first_integrals(u, up, upp, c).ode_residual.abs() < 1e-12);
        }
    }

    #[test]
    fn mch_has_no_smooth_solitary_wave() {
        let e = |s: &str| crate::expr::parse(s, &Default::default()).unwrap();
        let mch = HamiltonianFamily::from_exprs(&e("0"), &e("u")).unwrap();
        assert_eq!(mch.decay_analysis(), DecayAnalysis::NoSmoothSolitaryWave);
        let shifted = HamiltonianFamily::from_coeffs(vec![0.0], vec![2.0, 1.0]);
        assert_eq!(shifted.decay_analysis(), DecayAnalysis::FixedSpeedOnly { speed: 2.0 });
        assert!(HamiltonianFamily::from_exprs(&e("exp(u)"), &e("u")).is_err());
        assert!(HamiltonianFamily::from_exprs(&e("ux"), &e("u")).is_err());

        // samples on the decayed ODE: a peakon tail has U'² = U²
        let tail: Vec<(f64, f64)> = (1..20).map(|k| (-(k as f64) * 0.3).exp()).map(|u| (u, -u)).collect();
        assert!(mch.branch_report(1.0, &tail, 1e-9).forces_unit_slope);
        let smooth: Vec<(f64, f64)> = (1..20).map(|k| k as f64 * 0.05).map(|u| (u, 0.5 * u)).collect();
        assert!(!mch.branch_report(1.0, &smooth, 1e-9).forces_unit_slope);
    }
}
