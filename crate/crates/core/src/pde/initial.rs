//! Initial-data descriptors.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridState, Model, PdeError};
use crate::twave::SolitaryWave;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum InitialData {
    Gaussian(Gaussian),
    CosineOffset(CosineOffset),
    MollifiedPeakon(MollifiedPeakon),
    SolitaryWave(SolitaryWaveData),
}

/// `u = offset + amplitude * exp(-((x - center)/width)^2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gaussian {
    pub amplitude: f64,
    /// Defaults to the middle of the domain.
    pub center: Option<f64>,
    pub width: f64,
    pub offset: f64,
}

impl Default for Gaussian {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            center: None,
            width: 1.0,
            offset: 0.0,
        }
    }
}

/// `u = offset + amplitude * cos(2 pi wavenumber x / L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosineOffset {
    pub offset: f64,
    pub amplitude: f64,
    pub wavenumber: u32,
}

impl Default for CosineOffset {
    fn default() -> Self {
        Self {
            offset: 2.0,
            amplitude: 0.5,
            wavenumber: 1,
        }
    }
}

/// Periodic peakon of height `amplitude` with its `m` (a point mass)
/// smoothed by a Gaussian of standard deviation `width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MollifiedPeakon {
    pub amplitude: f64,
    pub center: Option<f64>,
    /// Defaults to three grid spacings.
    pub width: Option<f64>,
}

impl Default for MollifiedPeakon {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            center: None,
            width: None,
        }
    }
}

/// Solitary wave of the singular equation, periodized by summing images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolitaryWaveData {
    pub b: f64,
    pub c: f64,
    pub center: Option<f64>,
}

impl Default for SolitaryWaveData {
    fn default() -> Self {
        Self {
            b: 0.5,
            c: 1.0,
            center: None,
        }
    }
}

impl InitialData {
    pub fn build(&self, model: &Model) -> Result<GridState, PdeError> {
        let grid = *model.grid();
        let xs = grid.nodes();
        let mid = 0.5 * grid.length;
        let state = match self {
            Self::Gaussian(p) => {
                if !(p.width > 0.0) {
                    return Err(PdeError::Initial("gaussian width must be positive".into()));
                }
                let c = p.center.unwrap_or(mid);
                let u: Vec<f64> = xs
                    .iter()
                    .map(|x| p.offset + p.amplitude * (-((x - c) / p.width).powi(2)).exp())
                    .collect();
                model.state_from_u(0.0, &u)
            }
            Self::CosineOffset(p) => {
                let k = 2.0 * std::f64::consts::PI * p.wavenumber as f64 / grid.length;
                let u: Vec<f64> = xs.iter().map(|x| p.offset + p.amplitude * (k * x).cos()).collect();
                model.state_from_u(0.0, &u)
            }
            Self::MollifiedPeakon(p) => {
                if p.amplitude == 0.0 {
                    return Err(PdeError::Initial("peakon amplitude must be nonzero".into()));
                }
                let sigma = p.width.unwrap_or(3.0 * grid.dx());
                let x0 = p.center.unwrap_or(mid);
                let l = grid.length;
                // m = 2 a tanh(L/2) * delta(x - x0), mollified
                let weight = 2.0 * p.amplitude * (0.5 * l).tanh() / l * grid.n as f64;
                let sp = model.spectral();
                let spec: Vec<Complex64> = (0..grid.n)
                    .map(|j| {
                        let k = sp.wavenumber(j);
                        let damp = (-0.5 * sigma * sigma * k * k).exp();
                        Complex64::from_polar(weight * damp, -k * x0)
                    })
                    .collect();
                let mut m = sp.inverse_real(spec);
                if model.dealias {
                    m = sp.project(&m);
                }
                model.state(0.0, m)
            }
            Self::SolitaryWave(p) => {
                let wave = SolitaryWave::new(p.b, p.c).map_err(|e| PdeError::Initial(e.to_string()))?;
                let x0 = p.center.unwrap_or(mid);
                let cutoff = 1e-12 * wave.peak_height();
                let u: Vec<f64> = xs
                    .iter()
                    .map(|x| {
                        let mut total = wave.value(x - x0);
                        for n in 1.. {
                            let image = wave.value(x - x0 + n as f64 * grid.length)
                                + wave.value(x - x0 - n as f64 * grid.length);
                            total += image;
                            if image.abs() < cutoff {
                                break;
                            }
                        }
                        total
                    })
                    .collect();
                model.state_from_u(0.0, &u)
            }
        };
        if state.m.iter().chain(&state.u).any(|v| !v.is_finite()) {
            return Err(PdeError::Initial("initial data is not finite".into()));
        }
        Ok(state)
    }
}
