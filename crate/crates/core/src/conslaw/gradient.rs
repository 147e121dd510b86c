//! Gradient-energy solve: find every `(mu, nu)` with
//! `(mu - 2) A + nu B + C = 0`.
//!
//! `A`, `B`, `C` are Euler-operator images evaluated at shared sample
//! points. Each sample gives one row of a K x 2 linear system in
//! `(mu - 2, nu)`. Rows are divided by the largest term magnitude at that
//! point so that every row is O(1). The rank and the consistency of the
//! system decide the shape of the solution set; marginal decisions are
//! reported as indeterminate.

use serde::Serialize;

use super::{ConsLawError, EquationSpec};
use crate::expr::zero::sample_all;
use crate::expr::{d_x, euler_u, is_zero, Expr, SamplingPolicy, ZeroVerdict};

/// Below this (per-row RMS) a singular value is numerically zero.
const RANK_ZERO: f64 = 1e-9;
/// Above this a singular value is certainly nonzero.
const RANK_SURE: f64 = 1e-6;
/// Largest scaled row residual accepted as a solution.
const RESIDUAL_ZERO: f64 = 1e-8;
/// Smallest scaled row residual that rules a solution out.
const RESIDUAL_SURE: f64 = 1e-5;
/// Containment tolerance for `(2, 0)` and the line `nu = 0`.
const MEMBER_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradEnergySet {
    Empty {
        residual: f64,
    },
    Point {
        mu: f64,
        nu: f64,
    },
    /// `(mu, nu) + s * direction` for all real `s`.
    Line {
        mu: f64,
        nu: f64,
        direction: [f64; 2],
    },
    Plane,
    Indeterminate {
        reason: String,
    },
}

impl GradEnergySet {
    /// Whether `(mu, nu) = (2, 0)` belongs to the set.
    pub fn contains_l2m(&self) -> Option<bool> {
        match self {
            Self::Empty { .. } => Some(false),
            Self::Point { mu, nu } => Some((mu - 2.0).abs() <= MEMBER_TOL && nu.abs() <= MEMBER_TOL),
            Self::Line { mu, nu, direction } => {
                // distance from (2, 0) to the line
                let (px, py) = (2.0 - mu, -nu);
                let cross = px * direction[1] - py * direction[0];
                let norm = direction[0].hypot(direction[1]);
                Some(cross.abs() / norm <= MEMBER_TOL)
            }
            Self::Plane => Some(true),
            Self::Indeterminate { .. } => None,
        }
    }

    /// Whether some `(mu, 0)` with `mu != 2` belongs to the set.
    pub fn contains_weighted_h2(&self) -> Option<bool> {
        match self {
            Self::Empty { .. } => Some(false),
            Self::Point { mu, nu } => Some(nu.abs() <= MEMBER_TOL && (mu - 2.0).abs() > MEMBER_TOL),
            Self::Line { mu, nu, direction } => {
                if direction[1].abs() <= MEMBER_TOL {
                    // parallel to the mu axis
                    Some(nu.abs() <= MEMBER_TOL)
                } else {
                    let s = -nu / direction[1];
                    Some((mu + s * direction[0] - 2.0).abs() > MEMBER_TOL)
                }
            }
            Self::Plane => Some(true),
            Self::Indeterminate { .. } => None,
        }
    }

    /// A few members for which currents are built: the base point and one
    /// more point along each free direction.
    pub fn representatives(&self) -> Vec<(f64, f64)> {
        match self {
            Self::Point { mu, nu } => vec![(*mu, *nu)],
            Self::Line { mu, nu, direction } => {
                vec![(*mu, *nu), (mu + direction[0], nu + direction[1])]
            }
            Self::Plane => vec![(2.0, 0.0), (3.0, 0.0)],
            _ => Vec::new(),
        }
    }
}

/// The three Euler images `A`, `B`, `C`.
pub(crate) fn grad_energy_parts(eq: &EquationSpec) -> [Expr; 3] {
    let m = Expr::m();
    let a = euler_u(&(eq.h1_coefficient() * &m));
    let b = euler_u(&(eq.f() * &m));
    let weight = eq.f() + d_x(eq.g()).scale(0.5);
    let c = euler_u(&(weight * Expr::powi(&m, 2)));
    [a, b, c]
}

/// `(mu - 2) A + nu B + C`.
pub(crate) fn grad_energy_condition(eq: &EquationSpec, mu: f64, nu: f64) -> Expr {
    let [a, b, c] = grad_energy_parts(eq);
    a.scale(mu - 2.0) + b.scale(nu) + c
}

/// Nearest small-denominator rational if within `1e-8`.
fn snap(x: f64) -> f64 {
    for den in 1..=64 {
        let num = (x * den as f64).round();
        let r = num / den as f64;
        if (r - x).abs() <= 1e-8 * x.abs().max(1.0) {
            // adding zero turns -0 into 0
            return r + 0.0;
        }
    }
    x
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thin QR of a K x 2 matrix given by columns, by Gram-Schmidt with one
/// reorthogonalization. Returns `R` (upper triangular, row-major).
fn qr2(c0: &[f64], c1: &[f64]) -> ([[f64; 2]; 2], Vec<f64>, Vec<f64>) {
    let r00 = norm(c0);
    let q0: Vec<f64> = if r00 > 0.0 {
        c0.iter().map(|x| x / r00).collect()
    } else {
        vec![0.0; c0.len()]
    };
    let mut v = c1.to_vec();
    let mut r01 = 0.0;
    for _ in 0..2 {
        let p = dot(&q0, &v);
        r01 += p;
        for (vi, qi) in v.iter_mut().zip(&q0) {
            *vi -= p * qi;
        }
    }
    let r11 = norm(&v);
    let q1: Vec<f64> = if r11 > 0.0 {
        v.iter().map(|x| x / r11).collect()
    } else {
        vec![0.0; c0.len()]
    };
    ([[r00, r01], [0.0, r11]], q0, q1)
}

/// Singular values of an upper-triangular 2 x 2 matrix, largest first.
fn singular_values(r: &[[f64; 2]; 2]) -> (f64, f64) {
    let (a, b, d) = (r[0][0], r[0][1], r[1][1]);
    let s = (a + d).hypot(b);
    let t = (a - d).hypot(b);
    let smax = 0.5 * (s + t);
    // product of singular values is |det|, which is accurate for the small one
    let smin = if smax > 0.0 { (a * d).abs() / smax } else { 0.0 };
    (smax, smin)
}

fn classify_rows(a: &[f64], b: &[f64], rhs: &[f64]) -> Result<GradEnergySet, String> {
    let k = a.len() as f64;
    let rms = |x: f64| x / k.sqrt();
    // pivot the larger column first
    let swap = norm(b) > norm(a);
    let (c0, c1) = if swap { (b, a) } else { (a, b) };
    let (r, q0, q1) = qr2(c0, c1);
    let (smax, smin) = singular_values(&r);
    let rhs_size = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let unswap = |x: [f64; 2]| if swap { [x[1], x[0]] } else { x };

    let residual_of = |x: [f64; 2]| -> f64 {
        a.iter()
            .zip(b)
            .zip(rhs)
            .map(|((ai, bi), ri)| (ai * x[0] + bi * x[1] - ri).abs())
            .fold(0.0, f64::max)
    };
    let decide = |res: f64, found: GradEnergySet| -> Result<GradEnergySet, String> {
        if res <= RESIDUAL_ZERO {
            Ok(found)
        } else if res >= RESIDUAL_SURE {
            Ok(GradEnergySet::Empty { residual: res })
        } else {
            Err(format!("least-squares residual {res:.3e} is in the ambiguous band"))
        }
    };

    if rms(smax) <= RANK_ZERO {
        // A = B = 0: either every (mu, nu) works or none does
        return decide(rhs_size, GradEnergySet::Plane);
    }
    if rms(smax) < RANK_SURE {
        return Err(format!("largest singular value {smax:.3e} is in the ambiguous band"));
    }
    let ratio = smin / smax;
    if ratio <= RANK_ZERO {
        // rank one: solutions form a line orthogonal to the dominant row of R
        let row = if r[0][0].hypot(r[0][1]) >= r[1][1].abs() {
            [r[0][0], r[0][1]]
        } else {
            [0.0, r[1][1]]
        };
        let len = row[0].hypot(row[1]);
        let w = [row[0] / len, row[1] / len];
        let mw: Vec<f64> = c0.iter().zip(c1).map(|(x, y)| x * w[0] + y * w[1]).collect();
        let t = dot(&mw, rhs) / dot(&mw, &mw);
        let base = unswap([t * w[0], t * w[1]]);
        let mut dir = unswap([-w[1], w[0]]);
        let lead = if dir[0].abs() >= dir[1].abs() { dir[0] } else { dir[1] };
        dir = [snap(dir[0] / lead), snap(dir[1] / lead)];
        let res = residual_of(base);
        return decide(
            res,
            GradEnergySet::Line {
                mu: snap(base[0] + 2.0),
                nu: snap(base[1]),
                direction: dir,
            },
        );
    }
    if ratio < RANK_SURE {
        return Err(format!("condition ratio {ratio:.3e} is in the ambiguous band"));
    }
    // full rank: back substitution on R x = Q^T rhs
    let y0 = dot(&q0, rhs);
    let y1 = dot(&q1, rhs);
    let x1 = y1 / r[1][1];
    let x0 = (y0 - r[0][1] * x1) / r[0][0];
    let x = unswap([x0, x1]);
    decide(
        residual_of(x),
        GradEnergySet::Point {
            mu: snap(x[0] + 2.0),
            nu: snap(x[1]),
        },
    )
}

/// Solve for the gradient-energy parameter set of `eq`.
pub fn check_grad_energy(eq: &EquationSpec, policy: &SamplingPolicy) -> Result<GradEnergySet, ConsLawError> {
    let parts = grad_energy_parts(eq);
    let samples = sample_all(&parts, policy)?;
    let mut a = Vec::with_capacity(samples.len());
    let mut b = Vec::with_capacity(samples.len());
    let mut rhs = Vec::with_capacity(samples.len());
    for s in &samples {
        let scale = s.values.iter().fold(1.0f64, |m, (_, sc)| m.max(*sc));
        a.push(s.values[0].0 / scale);
        b.push(s.values[1].0 / scale);
        rhs.push(-s.values[2].0 / scale);
    }
    let found = match classify_rows(&a, &b, &rhs) {
        Ok(set) => set,
        Err(reason) => return Ok(GradEnergySet::Indeterminate { reason }),
    };
    // independent confirmation at fresh sample points
    let fresh = policy.with_seed(policy.seed.wrapping_add(1));
    for (mu, nu) in found.representatives() {
        match is_zero(&grad_energy_condition(eq, mu, nu), &fresh)? {
            ZeroVerdict::Zero { .. } => {}
            other => {
                return Ok(GradEnergySet::Indeterminate {
                    reason: format!(
                        "solution (mu={mu}, nu={nu}) failed re-verification (residual {:.3e})",
                        other.residual()
                    ),
                })
            }
        }
    }
    Ok(found)
}
