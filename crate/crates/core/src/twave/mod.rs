//! Travelling waves in the co-moving frame `ξ = x - c t`.
//!
//! The singular family `f = u_x/u³`, `g = 1/u²` has smooth solitary waves
//! given implicitly in closed form; they are evaluated here by bisection and
//! cross-checked against direct integration of the first-order profile ODE.
//! The Hamiltonian family is handled in [`hamiltonian`].

pub mod hamiltonian;
mod jet;
pub mod quad;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use jet::Jet;

pub use hamiltonian::{DecayAnalysis, HamiltonianFamily, HamiltonianValues};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TwaveError {
    #[error("shape parameter b must lie in (0, 1), got {0}")]
    ShapeOutOfRange(f64),
    #[error("wave speed c must be positive and finite, got {0}")]
    SpeedOutOfRange(f64),
    #[error("peakon amplitude must be nonzero and finite")]
    BadAmplitude,
    #[error("profile relation failed to bracket xi = {0}")]
    NotBracketed(f64),
    #[error("finite-difference step {0} is too coarse for eighth-order differences")]
    CoarseStep(f64),
    #[error("{0}")]
    NotPolynomial(String),
    #[error("residual checks need a solitary-wave profile")]
    NotSolitary,
    #[error("profile integrator failed near xi = {0}")]
    Integrator(f64),
}

/// Solitary wave of the singular family with shape `b ∈ (0,1)` and speed
/// `c > 0`, peak at `ξ = 0`, positive orientation.
///
/// With `s = √(1 - cU²)`, `A = 1 + s`, `B = b² - 1 + s` the profile obeys
/// `U'² = U² B / A`. Writing `w = √B`, the quadrature is closed form:
/// `|ξ| = (√2/b) artanh(√2 w / (b √A)) - 2 asinh(w / √(2 - b²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitaryWave {
    b: f64,
    c: f64,
    peak: f64,
}

impl SolitaryWave {
    pub fn new(b: f64, c: f64) -> Result<Self, TwaveError> {
        if !(b > 0.0 && b < 1.0) {
            return Err(TwaveError::ShapeOutOfRange(b));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(TwaveError::SpeedOutOfRange(c));
        }
        Ok(Self {
            b,
            c,
            peak: b * (2.0 - b * b).sqrt() / c.sqrt(),
        })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn speed(&self) -> f64 {
        self.c
    }

    pub fn peak_height(&self) -> f64 {
        self.peak
    }

    /// `c₂ = 2 - b²`, the constant of the `H¹` first integral.
    pub fn c2(&self) -> f64 {
        2.0 - self.b * self.b
    }

    /// `c₁ = c₂²/4`, the constant of the `∫m²` first integral.
    pub fn c1(&self) -> f64 {
        0.25 * self.c2() * self.c2()
    }

    /// Exponential decay rate of the tails.
    pub fn decay_rate(&self) -> f64 {
        self.b / std::f64::consts::SQRT_2
    }

    /// `ξ(w)` and `U(w)` as jets in `w = b - d`. Taking `d` as the primary
    /// unknown keeps both the peak (`d = b`) and the tail (`d → 0`) well
    /// conditioned.
    fn jets(&self, d: f64) -> (Jet, Jet) {
        let b = self.b;
        let k = 2.0 - b * b;
        let dj = Jet([d, -1.0, 0.0, 0.0]);
        let w = Jet([b - d, 1.0, 0.0, 0.0]);
        let a = w * w + k;
        let b2_minus_w2 = dj * (w + b);
        let one_minus_z2 = b2_minus_w2.scale(k / (b * b)) / a;
        let z = w.scale(std::f64::consts::SQRT_2 / b) / a.sqrt();
        let artanh = (z + 1.0).ln() - one_minus_z2.ln().scale(0.5);
        let xi = artanh.scale(std::f64::consts::SQRT_2 / b) - w.scale(1.0 / k.sqrt()).asinh().scale(2.0);
        let u = (b2_minus_w2 * a).scale(1.0 / self.c).sqrt();
        (xi, u)
    }

    fn xi_at(&self, log_d: f64) -> f64 {
        self.jets(log_d.exp()).0.value()
    }

    /// `d = b - w` at `|ξ|`, or `None` when `U` underflows.
    fn locate(&self, xi: f64) -> Result<Option<f64>, TwaveError> {
        let xi = xi.abs();
        let mut hi = self.b.ln();
        if xi == 0.0 {
            return Ok(Some(self.b));
        }
        let floor = -700.0;
        let mut lo = (-std::f64::consts::SQRT_2 * self.b * xi - 40.0).max(floor);
        while self.xi_at(lo) < xi {
            if lo == floor {
                return Ok(None);
            }
            lo = (lo - 100.0).max(floor);
        }
        if !(self.xi_at(hi) <= xi) {
            return Err(TwaveError::NotBracketed(xi));
        }
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.xi_at(mid) >= xi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some((0.5 * (lo + hi)).exp()))
    }

    /// `U(ξ)`.
    pub fn value(&self, xi: f64) -> f64 {
        match self.locate(xi) {
            Ok(Some(d)) => self.jets(d).1.value(),
            Ok(None) => 0.0,
            Err(_) => f64::NAN,
        }
    }

    /// `[U, U', U'', U''']` at `ξ`, differentiated exactly through the
    /// closed form.
    pub fn derivatives(&self, xi: f64) -> Result<[f64; 4], TwaveError> {
        let Some(d) = self.locate(xi)? else {
            return Ok([0.0; 4]);
        };
        let (x, u) = self.jets(d);
        let (x1, x2, x3) = (x.derivative(1), x.derivative(2), x.derivative(3));
        let (u1, u2, u3) = (u.derivative(1), u.derivative(2), u.derivative(3));
        let d1 = u1 / x1;
        let d2 = (u2 * x1 - u1 * x2) / x1.powi(3);
        let d3 = ((u3 * x1 - u1 * x3) * x1 - 3.0 * x2 * (u2 * x1 - u1 * x2)) / x1.powi(5);
        let odd = if xi < 0.0 { -1.0 } else { 1.0 };
        Ok([u.value(), odd * d1, d2, odd * d3])
    }

    /// `B / A` from `U` without cancellation near the peak.
    pub fn slope_ratio(&self, u: f64) -> f64 {
        let cu2 = self.c * u * u;
        let s = (1.0 - cu2).max(0.0).sqrt();
        let b2 = self.b * self.b;
        let bb = (self.c * (self.peak - u.abs()) * (self.peak + u.abs()) / (s + 1.0 - b2)).max(0.0);
        bb / (1.0 + s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileShape {
    Solitary { b: f64 },
    Peakon { a: f64 },
}

/// A sampled travelling-wave profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveProfile {
    pub shape: ProfileShape,
    pub c: f64,
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub uprime: Vec<f64>,
    /// Second derivative; the peakon value excludes the delta at the crest.
    pub usecond: Vec<f64>,
    pub peak_height: f64,
    /// `+1` for the profile as constructed, `-1` once reflected.
    pub orientation: i8,
}

impl WaveProfile {
    /// The reflected solution `-U`.
    pub fn reflect(&self) -> Self {
        let neg = |v: &[f64]| v.iter().map(|x| -x).collect();
        Self {
            u: neg(&self.u),
            uprime: neg(&self.uprime),
            usecond: neg(&self.usecond),
            orientation: -self.orientation,
            ..self.clone()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("xi,U,Uprime\n");
        for j in 0..self.xi.len() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.xi[j], self.u[j], self.uprime[j]));
        }
        out
    }

    fn wave(&self) -> Result<SolitaryWave, TwaveError> {
        match self.shape {
            ProfileShape::Solitary { b } => SolitaryWave::new(b, self.c),
            ProfileShape::Peakon { .. } => Err(TwaveError::NotSolitary),
        }
    }
}

pub fn solitary_profile(b: f64, c: f64, xi: &[f64]) -> Result<WaveProfile, TwaveError> {
    let wave = SolitaryWave::new(b, c)?;
    let rows: Vec<[f64; 4]> = xi.par_iter().map(|x| wave.derivatives(*x)).collect::<Result<_, _>>()?;
    Ok(WaveProfile {
        shape: ProfileShape::Solitary { b },
        c,
        xi: xi.to_vec(),
        u: rows.iter().map(|r| r[0]).collect(),
        uprime: rows.iter().map(|r| r[1]).collect(),
        usecond: rows.iter().map(|r| r[2]).collect(),
        peak_height: wave.peak_height(),
        orientation: 1,
    })
}

/// `u = a e^{-|ξ|}` travelling at `c = 1/a²`.
pub fn peakon(a: f64, xi: &[f64]) -> Result<WaveProfile, TwaveError> {
    if a == 0.0 || !a.is_finite() {
        return Err(TwaveError::BadAmplitude);
    }
    let u: Vec<f64> = xi.iter().map(|x| a * (-x.abs()).exp()).collect();
    Ok(WaveProfile {
        shape: ProfileShape::Peakon { a },
        c: 1.0 / (a * a),
        xi: xi.to_vec(),
        uprime: xi.iter().zip(&u).map(|(x, v)| if *x == 0.0 { 0.0 } else { -x.signum() * v }).collect(),
        usecond: u.clone(),
        u,
        peak_height: a.abs(),
        orientation: if a > 0.0 { 1 } else { -1 },
    })
}

/// Uniform grid of `n` points on `[-half_width, half_width]`.
pub fn symmetric_grid(half_width: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|j| -half_width + 2.0 * half_width * j as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualStats {
    /// Largest `|U'² - U² B/A|`.
    pub max_ode1: f64,
    /// RMS of the third-order residual.
    pub rms_ode3: f64,
    pub max_ode3: f64,
    /// Points with `|ξ|` below this were left out of the third-order check.
    pub excluded_radius: f64,
    pub points_ode3: usize,
}

const FD1: [f64; 9] = [
    1.0 / 280.0,
    -4.0 / 105.0,
    1.0 / 5.0,
    -4.0 / 5.0,
    0.0,
    4.0 / 5.0,
    -1.0 / 5.0,
    4.0 / 105.0,
    -1.0 / 280.0,
];
const FD2: [f64; 9] = [
    -1.0 / 560.0,
    8.0 / 315.0,
    -1.0 / 5.0,
    8.0 / 5.0,
    -205.0 / 72.0,
    8.0 / 5.0,
    -1.0 / 5.0,
    8.0 / 315.0,
    -1.0 / 560.0,
];

/// Residuals of the first-order profile ODE and of the third-order
/// travelling-wave ODE along a solitary profile. The third-order check
/// takes `U''` and `U'''` from eighth-order differences of `U'` with step
/// `h`.
pub fn solitary_ode_residual(profile: &WaveProfile, h: f64) -> Result<ResidualStats, TwaveError> {
    let wave = profile.wave()?;
    if !(h > 0.0 && h <= 1e-2) {
        return Err(TwaveError::CoarseStep(h));
    }
    let sign = f64::from(profile.orientation);
    let max_ode1 = profile
        .u
        .iter()
        .zip(&profile.uprime)
        .map(|(u, up)| {
            let (u, up) = (sign * u, sign * up);
            (up * up - u * u * wave.slope_ratio(u)).abs()
        })
        .fold(0.0, f64::max);

    let c = wave.speed();
    let residual3 = |xi: f64| -> Result<Option<f64>, TwaveError> {
        let mut up = [0.0; 9];
        for (k, v) in up.iter_mut().enumerate() {
            *v = wave.derivatives(xi + (k as f64 - 4.0) * h)?[1];
        }
        let u = wave.value(xi);
        if u < 1e-8 * wave.peak_height() {
            return Ok(None);
        }
        let u1 = up[4];
        let u2: f64 = FD1.iter().zip(&up).map(|(w, v)| w * v).sum::<f64>() / h;
        let u3: f64 = FD2.iter().zip(&up).map(|(w, v)| w * v).sum::<f64>() / (h * h);
        let m = u - u2;
        let dm = u1 - u3;
        Ok(Some(-c * dm + u1 * m / u.powi(3) + dm / (u * u) - 2.0 * m * u1 / u.powi(3)))
    };
    let raw: Vec<(f64, Option<f64>)> = profile
        .xi
        .par_iter()
        .map(|x| residual3(*x).map(|r| (*x, r)))
        .collect::<Result<_, _>>()?;
    let stats = |radius: f64| {
        let vals: Vec<f64> = raw.iter().filter(|(x, _)| x.abs() >= radius).filter_map(|(_, r)| *r).collect();
        let n = vals.len().max(1) as f64;
        let rms = (vals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
        let max = vals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        (rms, max, vals.len())
    };
    let mut excluded_radius = 0.0;
    let (mut rms, mut max, mut count) = stats(0.0);
    if rms > 1e-6 {
        excluded_radius = 0.05;
        (rms, max, count) = stats(excluded_radius);
    }
    Ok(ResidualStats {
        max_ode1,
        rms_ode3: rms,
        max_ode3: max,
        excluded_radius,
        points_ode3: count,
    })
}

/// Values of the two first integrals in the co-moving frame, `Φ - cT`,
/// sampled along a profile.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FirstIntegralSet {
    /// Mean of `(U - U'')² (1/U² - c)` (from `∫ m²`).
    pub c1: f64,
    /// Mean of `-c(U² + U'²) + 2cUU'' + 2(U - U'')/U` (from `‖u‖²_{H¹}`).
    pub c2: f64,
    /// Largest relative deviation from the mean.
    pub c1_spread: f64,
    pub c2_spread: f64,
    pub expressions: [&'static str; 2],
}

pub fn solitary_first_integrals(profile: &WaveProfile) -> Result<FirstIntegralSet, TwaveError> {
    let wave = profile.wave()?;
    let c = wave.speed();
    let sign = f64::from(profile.orientation);
    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    for j in 0..profile.xi.len() {
        let (u, up, upp) = (sign * profile.u[j], sign * profile.uprime[j], sign * profile.usecond[j]);
        if u < 1e-6 * wave.peak_height() {
            continue;
        }
        let m = u - upp;
        v1.push(m * m * (1.0 / (u * u) - c));
        v2.push(-c * (u * u + up * up) + 2.0 * c * u * upp + 2.0 * m / u);
    }
    let summarize = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / v.len().max(1) as f64;
        let spread = v.iter().fold(0.0f64, |s, x| s.max((x - mean).abs())) / mean.abs().max(1e-300);
        (mean, spread)
    };
    let (c1, c1_spread) = summarize(&v1);
    let (c2, c2_spread) = summarize(&v2);
    Ok(FirstIntegralSet {
        c1,
        c2,
        c1_spread,
        c2_spread,
        expressions: [
            "(U - U'')^2 (1/U^2 - c)",
            "-c (U^2 + U'^2) + 2 c U U'' + 2 (U - U'')/U",
        ],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrossCheck {
    pub max_discrepancy: f64,
    /// Relative offset below the peak where integration started.
    pub start_offset: f64,
    pub warnings: Vec<String>,
}

/// Integrates `U' = -U √(B/A)` outward from just below the peak and compares
/// with the closed form at `samples` points on `[xi_min, xi_max]`. The
/// starting `ξ` is found by Gauss–Legendre quadrature in `w = √B`, where the
/// integrand is smooth.
pub fn quadrature_crosscheck_on(
    b: f64,
    c: f64,
    xi_min: f64,
    xi_max: f64,
    samples: usize,
) -> Result<CrossCheck, TwaveError> {
    let wave = SolitaryWave::new(b, c)?;
    let mut warnings = Vec::new();
    let mut offset = 1e-6;
    loop {
        match integrate_outward(&wave, offset, xi_min, xi_max, samples) {
            Ok(max_discrepancy) => {
                return Ok(CrossCheck {
                    max_discrepancy,
                    start_offset: offset,
                    warnings,
                })
            }
            Err(TwaveError::Integrator(x)) if offset < 1e-3 => {
                warnings.push(format!("integrator failed near xi = {x}; start offset raised from {offset:e}"));
                offset *= 10.0;
            }
            Err(e) => return Err(e),
        }
    }
}

/// [`quadrature_crosscheck_on`] over `ξ ∈ [0.1, 10]`.
pub fn quadrature_crosscheck(b: f64, c: f64) -> Result<CrossCheck, TwaveError> {
    quadrature_crosscheck_on(b, c, 0.1, 10.0, 200)
}

fn integrate_outward(
    wave: &SolitaryWave,
    offset: f64,
    xi_min: f64,
    xi_max: f64,
    samples: usize,
) -> Result<f64, TwaveError> {
    let b = wave.b();
    let u0 = wave.peak_height() * (1.0 - offset);
    let w0 = (wave.slope_ratio(u0) * (1.0 + (1.0 - wave.speed() * u0 * u0).sqrt())).sqrt();
    let k = 2.0 - b * b;
    let dxi_dw = |w: f64| 2.0 * (w * w + 1.0 - b * b) / ((b * b - w * w) * (w * w + k).sqrt());
    let xi0 = quad::integrate(dxi_dw, 0.0, w0, 4);
    if xi0 >= xi_min {
        return Err(TwaveError::Integrator(xi0));
    }
    let rhs = |_: f64, u: f64| -u * wave.slope_ratio(u).sqrt();
    let (mut x, mut u, mut h) = (xi0, u0, 0.0);
    let mut worst = 0.0f64;
    for j in 0..samples {
        let target = xi_min + (xi_max - xi_min) * j as f64 / (samples.max(2) - 1) as f64;
        quad::dopri5(&rhs, &mut x, &mut u, &mut h, target, 1e-13).map_err(|e| TwaveError::Integrator(e.x))?;
        worst = worst.max((u - wave.value(target)).abs());
    }
    Ok(worst)
}
