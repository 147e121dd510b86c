//! Randomized numeric zero testing over the jet space.
//!
//! An expression is declared zero when it vanishes (relative to the size of
//! its largest additive term) at every one of `K` random jet points. Points
//! near the loci `u = 0`, `u_x = 0` and `u^2 = u_x^2` are never drawn, since
//! the classified families have poles there. Polynomial expressions are also
//! expanded exactly; a vanishing expansion certifies the verdict.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::poly::Poly;
use super::{Expr, JetPoint, JetVar};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingPolicy {
    /// Number of sample points K.
    pub samples: usize,
    /// Each coordinate is drawn with uniform magnitude in `[lo, hi]` and a
    /// random sign.
    pub magnitude: (f64, f64),
    /// Exclusion radius around the singular loci.
    pub delta: f64,
    /// Relative zero tolerance.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SamplingPolicy {
    fn default() -> Self {
        Self {
            samples: 20,
            magnitude: (0.2, 2.0),
            delta: 0.1,
            tolerance: 1e-9,
            seed: 42,
        }
    }
}

impl SamplingPolicy {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ZeroTestError> {
        let (lo, hi) = self.magnitude;
        if self.samples == 0
            || !(self.tolerance > 0.0)
            || !(self.delta >= 0.0)
            || !(lo > 0.0 && hi > lo)
        {
            return Err(ZeroTestError::BadPolicy);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ZeroVerdict {
    Zero {
        residual_max: f64,
        /// Exact polynomial expansion vanished.
        certified: bool,
    },
    NonZero {
        witness: JetPoint,
        residual: f64,
        scale: f64,
    },
    /// Some samples vanish and others do not.
    Indeterminate {
        passing: usize,
        failing: usize,
        witness: JetPoint,
        residual: f64,
    },
}

impl ZeroVerdict {
    pub fn is_zero(&self) -> bool {
        matches!(self, ZeroVerdict::Zero { .. })
    }

    pub fn is_nonzero(&self) -> bool {
        matches!(self, ZeroVerdict::NonZero { .. })
    }

    /// Largest relative residual seen.
    pub fn residual(&self) -> f64 {
        match self {
            ZeroVerdict::Zero { residual_max, .. } => *residual_max,
            ZeroVerdict::NonZero { residual, .. } | ZeroVerdict::Indeterminate { residual, .. } => {
                *residual
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZeroTestError {
    #[error("expression is non-finite at all {attempts} attempted sample points")]
    Singular { attempts: usize },
    #[error("unbound parameter(s): {0}")]
    UnboundParams(String),
    #[error("invalid sampling policy")]
    BadPolicy,
}

/// Deterministic stream of jet points honouring the exclusion predicates.
pub struct Sampler {
    rng: ChaCha8Rng,
    policy: SamplingPolicy,
}

impl Sampler {
    pub fn new(policy: &SamplingPolicy) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            policy: policy.clone(),
        }
    }

    fn coordinate(&mut self) -> f64 {
        let (lo, hi) = self.policy.magnitude;
        let mag = self.rng.gen_range(lo..=hi);
        if self.rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    }

    fn admissible(&self, pt: &JetPoint) -> bool {
        let d = self.policy.delta;
        let u = pt.vars.get(&JetVar::U).copied();
        let ux = pt.vars.get(&JetVar::UX).copied();
        if u.is_some_and(|u| u.abs() < d) || ux.is_some_and(|v| v.abs() < d) {
            return false;
        }
        if let (Some(u), Some(ux)) = (u, ux) {
            if (u * u - ux * ux).abs() < d {
                return false;
            }
        }
        true
    }

    /// Draw one point assigning every variable in `vars`. `u` and `u_x` are
    /// always assigned so the exclusion predicates are meaningful.
    pub fn point(&mut self, vars: &BTreeSet<JetVar>) -> JetPoint {
        loop {
            let mut pt = JetPoint::new();
            for v in [JetVar::U, JetVar::UX].iter().chain(vars.iter()) {
                if !pt.vars.contains_key(v) {
                    let c = self.coordinate();
                    pt.vars.insert(*v, c);
                }
            }
            if self.admissible(&pt) {
                return pt;
            }
        }
    }
}

/// Value and scale of a pre-split sum: scale is `max(1, |largest term|)`.
pub(crate) fn eval_terms(terms: &[(f64, Expr)], pt: &JetPoint) -> (f64, f64) {
    let mut value = 0.0;
    let mut scale: f64 = 1.0;
    for (sign, t) in terms {
        let v = t.eval(pt).unwrap_or(f64::NAN);
        value += sign * v;
        scale = scale.max(v.abs());
    }
    if !scale.is_finite() {
        return (f64::NAN, f64::NAN);
    }
    (value, scale)
}

/// One accepted sample: the point plus (value, scale) for each expression.
pub struct Sample {
    pub point: JetPoint,
    pub values: Vec<(f64, f64)>,
}

/// Draw `policy.samples` points at which every expression is finite.
pub fn sample_all(exprs: &[Expr], policy: &SamplingPolicy) -> Result<Vec<Sample>, ZeroTestError> {
    policy.validate()?;
    let unbound: BTreeSet<String> = exprs.iter().flat_map(|e| e.params()).collect();
    if !unbound.is_empty() {
        let names: Vec<String> = unbound.into_iter().collect();
        return Err(ZeroTestError::UnboundParams(names.join(", ")));
    }
    let vars: BTreeSet<JetVar> = exprs.iter().flat_map(|e| e.vars()).collect();
    let split: Vec<Vec<(f64, Expr)>> = exprs.iter().map(|e| e.additive_terms()).collect();
    let k = policy.samples;
    let max_attempts = 50 * k;
    let mut sampler = Sampler::new(policy);
    let mut out = Vec::with_capacity(k);
    let mut attempts = 0;
    while out.len() < k && attempts < max_attempts {
        let batch: Vec<JetPoint> = (0..k - out.len()).map(|_| sampler.point(&vars)).collect();
        attempts += batch.len();
        let evaluated: Vec<Sample> = batch
            .into_par_iter()
            .map(|point| {
                let values = split.iter().map(|terms| eval_terms(terms, &point)).collect();
                Sample { point, values }
            })
            .collect();
        out.extend(
            evaluated
                .into_iter()
                .filter(|s| s.values.iter().all(|(v, sc)| v.is_finite() && sc.is_finite())),
        );
    }
    if out.len() < k {
        return Err(ZeroTestError::Singular { attempts });
    }
    Ok(out)
}

/// Classify sampled (value, scale) pairs against the tolerance.
pub(crate) fn verdict_from_samples<'a>(
    samples: impl Iterator<Item = (&'a JetPoint, (f64, f64))>,
    tolerance: f64,
) -> ZeroVerdict {
    let mut passing = 0;
    let mut failing = 0;
    let mut worst: Option<(&JetPoint, f64, f64)> = None;
    for (pt, (value, scale)) in samples {
        let rel = value.abs() / scale;
        if rel <= tolerance {
            passing += 1;
        } else {
            failing += 1;
        }
        if worst.map_or(true, |(_, r, _)| rel > r) {
            worst = Some((pt, rel, scale));
        }
    }
    let (pt, rel, scale) = worst.expect("at least one sample");
    match (passing, failing) {
        (_, 0) => ZeroVerdict::Zero {
            residual_max: rel,
            certified: false,
        },
        (0, _) => ZeroVerdict::NonZero {
            witness: pt.clone(),
            residual: rel,
            scale,
        },
        _ => ZeroVerdict::Indeterminate {
            passing,
            failing,
            witness: pt.clone(),
            residual: rel,
        },
    }
}

/// Randomized zero test. See the module docs.
pub fn is_zero(e: &Expr, policy: &SamplingPolicy) -> Result<ZeroVerdict, ZeroTestError> {
    policy.validate()?;
    if let Some(c) = e.as_const() {
        return Ok(if c.abs() <= policy.tolerance * c.abs().max(1.0) {
            ZeroVerdict::Zero {
                residual_max: c.abs(),
                certified: c == 0.0,
            }
        } else {
            ZeroVerdict::NonZero {
                witness: JetPoint::new(),
                residual: c.abs() / c.abs().max(1.0),
                scale: c.abs().max(1.0),
            }
        });
    }
    let samples = sample_all(std::slice::from_ref(e), policy)?;
    let verdict = verdict_from_samples(
        samples.iter().map(|s| (&s.point, s.values[0])),
        policy.tolerance,
    );
    if let ZeroVerdict::Zero { residual_max, .. } = verdict {
        let certified = Poly::from_expr(e).is_some_and(|p| p.is_zero());
        return Ok(ZeroVerdict::Zero {
            residual_max,
            certified,
        });
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{euler_u, parse};

    #[test]
    fn trivial_zero_is_certified() {
        let u = Expr::u();
        let v = is_zero(&(Expr::raw(super::super::Node::Sub(u.clone(), u))), &SamplingPolicy::default())
            .unwrap();
        assert_eq!(
            v,
            ZeroVerdict::Zero {
                residual_max: 0.0,
                certified: true
            }
        );
    }

    #[test]
    fn degasperis_procesi_h1_combination_is_nonzero() {
        let e = euler_u(&(Expr::u() * Expr::ux() * Expr::m()));
        let v = is_zero(&e, &SamplingPolicy::default()).unwrap();
        let ZeroVerdict::NonZero { witness, residual, .. } = v else {
            panic!("expected a witness, got {v:?}");
        };
        assert!(residual > 1e-3);
        assert!((e.eval(&witness).unwrap()).abs() > 0.0);
    }

    #[test]
    fn sampling_avoids_singular_loci() {
        let policy = SamplingPolicy {
            samples: 500,
            ..Default::default()
        };
        let e = parse("1/(u^2 - ux^2)", &Default::default()).unwrap();
        let samples = sample_all(&[e], &policy).unwrap();
        for s in &samples {
            let u = s.point.vars[&JetVar::U];
            let ux = s.point.vars[&JetVar::UX];
            assert!(u.abs() >= 0.1 && ux.abs() >= 0.1 && (u * u - ux * ux).abs() >= 0.1);
        }
    }

    #[test]
    fn everywhere_singular_is_an_error() {
        let e = parse("sqrt(-u^2 - 1)", &Default::default()).unwrap();
        assert!(matches!(
            is_zero(&e, &SamplingPolicy::default()),
            Err(ZeroTestError::Singular { .. })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let e = parse("exp(u)*ux - m^3", &Default::default()).unwrap();
        let a = is_zero(&e, &SamplingPolicy::default()).unwrap();
        let b = is_zero(&e, &SamplingPolicy::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unbound_parameters_are_reported() {
        let params = ["a".to_string()].into();
        let e = parse("a*u", &params).unwrap();
        assert!(matches!(
            is_zero(&e, &SamplingPolicy::default()),
            Err(ZeroTestError::UnboundParams(_))
        ));
    }
}
