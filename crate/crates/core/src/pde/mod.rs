//! Periodic pseudospectral solver for `m_t = -f(u,u_x) m - (g(u,u_x) m)_x`.
//!
//! The state is the nodal field `m`; `u` and `u_x` are recovered from it by
//! inverting `1 - d_xx` in Fourier space. Time stepping is classical RK4
//! with a fixed step.

mod initial;
mod series;
mod spectral;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conslaw::{ConsLawError, EquationSpec};
use crate::expr::{CompiledExpr, JetVar};

pub use initial::{CosineOffset, Gaussian, InitialData, MollifiedPeakon, SolitaryWaveData};
pub use series::{check_apriori_bounds, AprioriReport, ConservedSeries, SeriesRow};
pub use spectral::{Grid, Spectral};

#[derive(Debug, Error)]
pub enum PdeError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Equation(#[from] ConsLawError),
    #[error("initial data: {0}")]
    Initial(String),
}

/// Why a right-hand-side evaluation was refused.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepError {
    /// `|u|` fell below the guard floor of a family singular at `u = 0`.
    SingularityGuard { x: f64, u: f64 },
    /// `f` or `g` produced a non-finite nodal value.
    NonFinite { x: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    WaveBreaking { t: f64, sup_ux: f64 },
    SingularityGuard { t: f64, x: f64, u: f64 },
    NonFinite { t: f64, x: f64 },
}

impl RunStatus {
    fn from_step(t: f64, e: StepError) -> Self {
        match e {
            StepError::SingularityGuard { x, u } => Self::SingularityGuard { t, x, u },
            StepError::NonFinite { x } => Self::NonFinite { t, x },
        }
    }
}

/// Nodal fields at one time. `u` and `u_x` are always consistent with `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub m: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
}

/// An equation discretized on one grid.
pub struct Model {
    spectral: Spectral,
    f: CompiledExpr,
    g: CompiledExpr,
    f_is_zero: bool,
    dealias: bool,
    guard: Option<f64>,
}

/// True if `f` or `g` blows up at `u = 0`.
pub fn is_singular_at_zero(eq: &EquationSpec) -> bool {
    [0.5, -0.7, 1.3].iter().any(|&ux| {
        let pt = crate::expr::JetPoint::new().with(JetVar::U, 0.0).with(JetVar::UX, ux);
        [eq.f(), eq.g()]
            .iter()
            .any(|e| !e.eval(&pt).map(f64::is_finite).unwrap_or(false))
    })
}

impl Model {
    /// `guard_floor` applies only when the family is singular at `u = 0`.
    pub fn new(grid: Grid, eq: &EquationSpec, dealias: bool, guard_floor: f64) -> Result<Self, PdeError> {
        let slots = [JetVar::U, JetVar::UX];
        let compile = |e| {
            CompiledExpr::new(e, &slots).map_err(|err| PdeError::Config(format!("cannot compile: {err}")))
        };
        Ok(Self {
            spectral: Spectral::new(grid),
            f: compile(eq.f())?,
            g: compile(eq.g())?,
            f_is_zero: eq.f().is_const_zero(),
            dealias,
            guard: is_singular_at_zero(eq).then_some(guard_floor),
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn grid(&self) -> &Grid {
        self.spectral.grid()
    }

    pub fn guard_floor(&self) -> Option<f64> {
        self.guard
    }

    pub fn state(&self, t: f64, m: Vec<f64>) -> GridState {
        let (u, ux) = self.spectral.helmholtz(&m);
        GridState { t, m, u, ux }
    }

    /// State from nodal `u`, with `m` projected onto the retained modes.
    pub fn state_from_u(&self, t: f64, u: &[f64]) -> GridState {
        let mut m = self.spectral.m_from_u(u);
        if self.dealias {
            m = self.spectral.project(&m);
        }
        self.state(t, m)
    }

    /// `-f m - D_x(g m)` at the nodes.
    pub fn rhs(&self, s: &GridState) -> Result<Vec<f64>, StepError> {
        let n = s.m.len();
        let grid = *self.grid();
        if let Some(floor) = self.guard {
            if let Some((j, u)) = s.u.iter().enumerate().find(|(_, u)| u.abs() < floor) {
                return Err(StepError::SingularityGuard { x: grid.x(j), u: *u });
            }
            // a sign change between neighbours means u passed through zero
            for j in 0..n {
                let (a, b) = (s.u[j], s.u[(j + 1) % n]);
                if a * b < 0.0 {
                    let k = if a.abs() <= b.abs() { j } else { (j + 1) % n };
                    return Err(StepError::SingularityGuard { x: grid.x(k), u: s.u[k] });
                }
            }
        }
        let mut fm = vec![0.0; n];
        let mut gm = vec![0.0; n];
        let mut stack = Vec::new();
        for j in 0..n {
            let slots = [s.u[j], s.ux[j]];
            let gv = self.g.eval_with(&slots, &mut stack);
            let fv = if self.f_is_zero {
                0.0
            } else {
                self.f.eval_with(&slots, &mut stack)
            };
            if !gv.is_finite() || !fv.is_finite() {
                return Err(StepError::NonFinite { x: grid.x(j) });
            }
            fm[j] = fv * s.m[j];
            gm[j] = gv * s.m[j];
        }
        Ok(self.spectral.minus_a_minus_dx_b(&fm, &gm, self.dealias))
    }

    /// One classical RK4 step; `dt` may be negative.
    pub fn step_rk4(&self, s: &GridState, dt: f64) -> Result<GridState, StepError> {
        let axpy = |a: f64, k: &[f64]| -> Vec<f64> { s.m.iter().zip(k).map(|(m, k)| m + a * k).collect() };
        let k1 = self.rhs(s)?;
        let k2 = self.rhs(&self.state(s.t + 0.5 * dt, axpy(0.5 * dt, &k1)))?;
        let k3 = self.rhs(&self.state(s.t + 0.5 * dt, axpy(0.5 * dt, &k2)))?;
        let k4 = self.rhs(&self.state(s.t + dt, axpy(dt, &k3)))?;
        let m: Vec<f64> = (0..s.m.len())
            .map(|j| s.m[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        Ok(self.state(s.t + dt, m))
    }

    /// Largest `|g|` over the nodes, for the CFL estimate.
    pub fn max_speed(&self, s: &GridState) -> f64 {
        let mut stack = Vec::new();
        s.u.iter()
            .zip(&s.ux)
            .map(|(u, ux)| self.g.eval_with(&[*u, *ux], &mut stack).abs())
            .fold(0.0, f64::max)
    }
}

/// Crest location of `u`: the largest node refined by a parabola through
/// its neighbours.
pub fn crest_position(grid: &Grid, u: &[f64]) -> f64 {
    let n = u.len();
    let (j, _) = u
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, v)| if *v > best.1 { (j, *v) } else { best });
    let (a, b, c) = (u[(j + n - 1) % n], u[j], u[(j + 1) % n]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    (grid.x(j) + shift * grid.dx()).rem_euclid(grid.length)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationConfig {
    pub f: String,
    pub g: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub series_path: Option<String>,
    /// Time between series rows; defaults to `t_final / 100`.
    #[serde(default)]
    pub series_interval: Option<f64>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub snapshot_path: Option<String>,
}

/// Weights of the monitored energy `∫ u_xx² + μ u_x² + (μ-1) u² + 2ν u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyWeights {
    pub mu: f64,
    pub nu: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self { mu: 2.0, nu: 0.0 }
    }
}

fn default_true() -> bool {
    true
}
fn default_blowup() -> f64 {
    1e3
}
fn default_floor() -> f64 {
    1e-3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    pub equation: EquationConfig,
    pub initial: InitialData,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub energy: EnergyWeights,
    /// Stop when `sup |u_x|` exceeds this.
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    /// Smallest `|u|` allowed for families singular at `u = 0`.
    #[serde(default = "default_floor")]
    pub min_u_floor: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<Grid, PdeError> {
        let grid = Grid::new(self.length, self.n)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(PdeError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(PdeError::Config(format!("t_final must be positive, got {}", self.t_final)));
        }
        if let Some(iv) = self.output.series_interval {
            if !(iv > 0.0) {
                return Err(PdeError::Config("series_interval must be positive".into()));
            }
        }
        if !(self.blowup_threshold > 0.0) || !(self.min_u_floor >= 0.0) {
            return Err(PdeError::Config("thresholds must be positive".into()));
        }
        Ok(grid)
    }

    pub fn equation_spec(&self) -> Result<EquationSpec, PdeError> {
        Ok(EquationSpec::parse(
            &self.equation.f,
            &self.equation.g,
            &self.equation.params,
        )?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub m: Vec<f64>,
}

impl Snapshot {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u,m\n");
        for j in 0..self.x.len() {
            out.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", self.x[j], self.u[j], self.m[j]));
        }
        out
    }
}

pub struct RunResult {
    pub series: ConservedSeries,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub final_state: GridState,
    pub warnings: Vec<String>,
}

/// Parse the equation from the config and run.
pub fn run_config(config: &SimConfig) -> Result<RunResult, PdeError> {
    run(config, &config.equation_spec()?)
}

/// Integrate to `t_final` or until a stop condition fires.
pub fn run(config: &SimConfig, eq: &EquationSpec) -> Result<RunResult, PdeError> {
    let grid = config.validate()?;
    let model = Model::new(grid, eq, config.dealias, config.min_u_floor)?;
    let mut state = config.initial.build(&model)?;
    let mut warnings = Vec::new();
    if let Some(floor) = model.guard_floor() {
        let min_u = state.u.iter().fold(f64::INFINITY, |m, u| m.min(u.abs()));
        if min_u < 10.0 * floor {
            warnings.push(format!(
                "initial min |u| = {min_u:.3e} is below ten times the guard floor {floor:.1e}"
            ));
        }
    }
    let cfl = config.dt * model.max_speed(&state) * grid.n as f64 / grid.length;
    if cfl > 1.0 {
        warnings.push(format!("CFL estimate dt*max|g|*N/L = {cfl:.3} exceeds 1"));
    }

    let full_steps = (config.t_final / config.dt * (1.0 + 1e-12)).floor() as usize;
    let remainder = config.t_final - full_steps as f64 * config.dt;
    let last_step = (remainder > 1e-12 * config.t_final).then_some(remainder);
    let interval = config.output.series_interval.unwrap_or(config.t_final / 100.0);
    let every = ((interval / config.dt).round() as usize).max(1);
    let snapshot_steps: Vec<(usize, f64)> = config
        .output
        .snapshot_times
        .iter()
        .map(|ts| (((ts / config.dt).round() as usize).min(full_steps), *ts))
        .collect();

    let mut series = ConservedSeries::new(config.energy);
    let mut snapshots = Vec::new();
    let take_snapshots = |step: usize, s: &GridState, out: &mut Vec<Snapshot>| {
        for _ in snapshot_steps.iter().filter(|(k, _)| *k == step) {
            out.push(Snapshot {
                t: s.t,
                x: grid.nodes(),
                u: s.u.clone(),
                m: s.m.clone(),
            });
        }
    };
    series.record(&grid, &state);
    take_snapshots(0, &state, &mut snapshots);

    let mut status = RunStatus::Completed;
    let total = full_steps + usize::from(last_step.is_some());
    for step in 1..=total {
        let dt = if step > full_steps { last_step.unwrap() } else { config.dt };
        let next = match model.step_rk4(&state, dt) {
            Ok(s) => s,
            Err(e) => {
                status = RunStatus::from_step(state.t, e);
                break;
            }
        };
        state = next;
        // time from the step count, so it does not accumulate rounding
        state.t = if step > full_steps { config.t_final } else { step as f64 * config.dt };
        let sup_ux = state.ux.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !sup_ux.is_finite() || state.m.iter().any(|v| !v.is_finite()) {
            series.record(&grid, &state);
            status = RunStatus::NonFinite { t: state.t, x: f64::NAN };
            break;
        }
        if step % every == 0 || step == total {
            series.record(&grid, &state);
        }
        take_snapshots(step, &state, &mut snapshots);
        if sup_ux > config.blowup_threshold {
            if step % every != 0 && step != total {
                series.record(&grid, &state);
            }
            status = RunStatus::WaveBreaking { t: state.t, sup_ux };
            break;
        }
    }
    Ok(RunResult {
        series,
        snapshots,
        status,
        final_state: state,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(f: &str, g: &str) -> EquationSpec {
        EquationSpec::parse(f, g, &BTreeMap::new()).unwrap()
    }

    fn max_rel(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
    }

    #[test]
    fn zero_state_is_a_fixed_point() {
        let model = Model::new(Grid::new(10.0, 32).unwrap(), &eq("ux", "u"), true, 1e-3).unwrap();
        let s = model.state(0.0, vec![0.0; 32]);
        assert!(model.rhs(&s).unwrap().iter().all(|v| *v == 0.0));
        let next = model.step_rk4(&s, 0.1).unwrap();
        assert!(next.m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_state_decays_at_the_f_rate() {
        // u = m = c0 gives rhs = -f(c0, 0) c0
        let model = Model::new(Grid::new(10.0, 32).unwrap(), &eq("u^2 + ux", "u"), true, 1e-3).unwrap();
        let s = model.state(0.0, vec![1.5; 32]);
        for v in model.rhs(&s).unwrap() {
            assert!((v + 1.5f64.powi(3)).abs() < 1e-12);
        }
    }

    #[test]
    fn camassa_holm_rhs_matches_finite_differences() {
        let length = 10.0;
        let k = 2.0 * std::f64::consts::PI / length;
        let model = Model::new(Grid::new(length, 64).unwrap(), &eq("ux", "u"), true, 1e-3).unwrap();
        let u: Vec<f64> = model.grid().nodes().iter().map(|x| (k * x).cos()).collect();
        let s = model.state_from_u(0.0, &u);
        let got = model.rhs(&s).unwrap();
        // fourth-order differences of g m on a fine grid
        let fine = 4096;
        let h = length / fine as f64;
        let gm = |x: f64| (k * x).cos() * (1.0 + k * k) * (k * x).cos();
        for (j, x) in model.grid().nodes().iter().enumerate() {
            let d = (-gm(x + 2.0 * h) + 8.0 * gm(x + h) - 8.0 * gm(x - h) + gm(x - 2.0 * h)) / (12.0 * h);
            let fm = -k * (k * x).sin() * (1.0 + k * k) * (k * x).cos();
            let expected = -fm - d;
            assert!((got[j] - expected).abs() <= 1e-6 * (1.0 + k * k), "{j}");
        }
    }

    #[test]
    fn forward_then_backward_step_returns() {
        let model = Model::new(Grid::new(20.0, 64).unwrap(), &eq("ux", "u"), true, 1e-3).unwrap();
        let u: Vec<f64> = model.grid().nodes().iter().map(|x| (-(x - 10.0).powi(2) / 4.0).exp()).collect();
        let s = model.state_from_u(0.0, &u);
        let back = model.step_rk4(&model.step_rk4(&s, 1e-3).unwrap(), -1e-3).unwrap();
        assert!(max_rel(&back.m, &s.m) < 1e-10);
    }

    #[test]
    fn singular_detection() {
        assert!(is_singular_at_zero(&eq("ux/u^3", "1/u^2")));
        assert!(!is_singular_at_zero(&eq("ux", "u")));
    }

    #[test]
    fn guard_stops_singular_family_crossing_zero() {
        let config: SimConfig = serde_json::from_str(
            r#"{"L": 20, "N": 64, "dt": 1e-3, "t_final": 0.1,
                "equation": {"f": "ux/u^3", "g": "1/u^2"},
                "initial": {"kind": "cosine_offset", "params": {"offset": 0.2, "amplitude": 0.5}}}"#,
        )
        .unwrap();
        let r = run_config(&config).unwrap();
        assert!(matches!(r.status, RunStatus::SingularityGuard { .. }), "{:?}", r.status);
    }

    #[test]
    fn config_defaults_and_validation() {
        let config: SimConfig = serde_json::from_str(
            r#"{"L": 40, "N": 512, "dt": 1e-3, "t_final": 10,
                "equation": {"f": "ux", "g": "u"},
                "initial": {"kind": "gaussian", "params": {}}}"#,
        )
        .unwrap();
        assert!(config.dealias);
        assert_eq!(config.blowup_threshold, 1e3);
        assert_eq!(config.min_u_floor, 1e-3);
        assert_eq!(config.energy, EnergyWeights { mu: 2.0, nu: 0.0 });
        let mut bad = config.clone();
        bad.n = 500;
        assert!(matches!(bad.validate(), Err(PdeError::Config(_))));
        let bad_json = r#"{"L": 40, "N": 512, "dt": 1e-3, "t_final": 10, "bogus": 1,
                "equation": {"f": "ux", "g": "u"}, "initial": {"kind": "gaussian", "params": {}}}"#;
        assert!(serde_json::from_str::<SimConfig>(bad_json).is_err());
    }

    #[test]
    fn short_camassa_holm_run_conserves_momentum_and_h1() {
        let config: SimConfig = serde_json::from_str(
            r#"{"L": 40, "N": 256, "dt": 2e-3, "t_final": 1,
                "equation": {"f": "ux", "g": "u"},
                "initial": {"kind": "gaussian", "params": {}}}"#,
        )
        .unwrap();
        let r = run_config(&config).unwrap();
        assert_eq!(r.status, RunStatus::Completed);
        assert!(r.series.relative_drift(|row| row.m_integral) < 1e-10);
        assert!(r.series.relative_drift(|row| row.h1sq) < 1e-8);
        assert_eq!(r.series.rows.len(), 101);
        assert!((r.final_state.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn crest_refinement_is_subgrid() {
        let grid = Grid::new(10.0, 64).unwrap();
        let u: Vec<f64> = grid.nodes().iter().map(|x| (-(x - 3.21f64).powi(2)).exp()).collect();
        assert!((crest_position(&grid, &u) - 3.21).abs() < 5e-3);
    }
}
