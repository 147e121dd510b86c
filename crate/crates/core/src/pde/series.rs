//! Conserved-integral monitoring and a priori amplitude bounds.

use serde::Serialize;

use super::{crest_position, EnergyWeights, Grid, GridState};

/// Integrals and extrema of one state. Integrals use the periodic
/// trapezoid rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub t: f64,
    /// `∫ m`
    pub m_integral: f64,
    /// `∫ u_x² + u²`
    pub h1sq: f64,
    /// `∫ m²`
    pub l2msq: f64,
    /// `∫ u_xx² + μ u_x² + (μ-1) u² + 2ν u`
    pub energy: f64,
    pub sup_u: f64,
    pub sup_ux: f64,
    pub min_u: f64,
    /// Location of the maximum of `u`; not part of the CSV output.
    #[serde(skip)]
    pub crest: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConservedSeries {
    pub weights: EnergyWeights,
    pub rows: Vec<SeriesRow>,
}

impl ConservedSeries {
    pub fn new(weights: EnergyWeights) -> Self {
        Self {
            weights,
            rows: Vec::new(),
        }
    }

    pub fn row(grid: &Grid, s: &GridState, w: EnergyWeights) -> SeriesRow {
        let n = s.m.len();
        let idx = 0..n;
        let energy = grid.integrate(idx.clone().map(|j| {
            let (u, ux, m) = (s.u[j], s.ux[j], s.m[j]);
            let uxx = u - m;
            uxx * uxx + w.mu * ux * ux + (w.mu - 1.0) * u * u + 2.0 * w.nu * u
        }));
        SeriesRow {
            t: s.t,
            m_integral: grid.integrate(s.m.iter().copied()),
            h1sq: grid.integrate(idx.map(|j| s.ux[j] * s.ux[j] + s.u[j] * s.u[j])),
            l2msq: grid.integrate(s.m.iter().map(|m| m * m)),
            energy,
            sup_u: s.u.iter().fold(0.0, |m, v| m.max(v.abs())),
            sup_ux: s.ux.iter().fold(0.0, |m, v| m.max(v.abs())),
            min_u: s.u.iter().fold(f64::INFINITY, |m, v| m.min(*v)),
            crest: crest_position(grid, &s.u),
        }
    }

    pub fn record(&mut self, grid: &Grid, s: &GridState) {
        self.rows.push(Self::row(grid, s, self.weights));
    }

    /// `max_t |q(t) - q(0)| / |q(0)|` (absolute if `q(0) = 0`).
    pub fn relative_drift(&self, q: impl Fn(&SeriesRow) -> f64) -> f64 {
        let Some(first) = self.rows.first() else {
            return 0.0;
        };
        let q0 = q(first);
        let worst = self.rows.iter().fold(0.0f64, |m, r| m.max((q(r) - q0).abs()));
        if q0 == 0.0 {
            worst
        } else {
            worst / q0.abs()
        }
    }

    /// Crest positions unwrapped across the periodic boundary.
    pub fn crest_track(&self, length: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.rows.len());
        let mut offset = 0.0;
        for r in &self.rows {
            if let Some(&(_, prev)) = out.last() {
                let raw_prev = prev - offset;
                let jump = r.crest - raw_prev;
                if jump > 0.5 * length {
                    offset -= length;
                } else if jump < -0.5 * length {
                    offset += length;
                }
            }
            out.push((r.t, r.crest + offset));
        }
        out
    }

    /// Least-squares slope of the unwrapped crest position in time.
    pub fn crest_speed(&self, length: f64) -> f64 {
        let track = self.crest_track(length);
        let n = track.len() as f64;
        let (st, sx) = track.iter().fold((0.0, 0.0), |(a, b), (t, x)| (a + t, b + x));
        let (mt, mx) = (st / n, sx / n);
        let (num, den) = track.iter().fold((0.0, 0.0), |(a, b), (t, x)| {
            (a + (t - mt) * (x - mx), b + (t - mt) * (t - mt))
        });
        num / den
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,M,H1sq,L2msq,E,sup_u,sup_ux,min_u\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                r.t, r.m_integral, r.h1sq, r.l2msq, r.energy, r.sup_u, r.sup_ux, r.min_u
            ));
        }
        out
    }
}

/// Outcome of the a priori amplitude bounds
/// `sup|u| < ‖u₀‖_{H¹}/√2 < ‖m₀‖_{L²}` and `sup|u_x| < ‖m₀‖_{L²}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AprioriReport {
    /// The family does not conserve `∫ m²`, so the bounds are not implied.
    NotApplicable,
    /// Zero initial data; every bound degenerates to `0 < 0`.
    Degenerate,
    Checked {
        holds: bool,
        violations: usize,
        /// Smallest `‖u₀‖_{H¹}/√2 - sup|u|` over the series.
        margin_sup_u: f64,
        /// `‖m₀‖_{L²} - ‖u₀‖_{H¹}/√2`.
        margin_norms: f64,
        /// Smallest `‖m₀‖_{L²} - sup|u_x|` over the series.
        margin_sup_ux: f64,
    },
}

pub fn check_apriori_bounds(series: &ConservedSeries, l2m_conserved: bool) -> AprioriReport {
    if !l2m_conserved {
        return AprioriReport::NotApplicable;
    }
    let Some(first) = series.rows.first() else {
        return AprioriReport::Degenerate;
    };
    if first.h1sq == 0.0 && first.l2msq == 0.0 {
        return AprioriReport::Degenerate;
    }
    let h1_bound = (first.h1sq / 2.0).sqrt();
    let l2 = first.l2msq.sqrt();
    let margin_norms = l2 - h1_bound;
    let mut margin_sup_u = f64::INFINITY;
    let mut margin_sup_ux = f64::INFINITY;
    let mut violations = usize::from(margin_norms <= 0.0);
    for r in &series.rows {
        let a = h1_bound - r.sup_u;
        let b = l2 - r.sup_ux;
        violations += usize::from(a <= 0.0) + usize::from(b <= 0.0);
        margin_sup_u = margin_sup_u.min(a);
        margin_sup_ux = margin_sup_ux.min(b);
    }
    AprioriReport::Checked {
        holds: violations == 0,
        violations,
        margin_sup_u,
        margin_norms,
        margin_sup_ux,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, h1sq: f64, l2msq: f64, sup_u: f64, sup_ux: f64) -> SeriesRow {
        SeriesRow {
            t,
            m_integral: 0.0,
            h1sq,
            l2msq,
            energy: l2msq,
            sup_u,
            sup_ux,
            min_u: 0.0,
            crest: 0.0,
        }
    }

    #[test]
    fn zero_data_is_degenerate() {
        let mut s = ConservedSeries::new(EnergyWeights::default());
        s.rows.push(row(0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(check_apriori_bounds(&s, true), AprioriReport::Degenerate);
        assert_eq!(check_apriori_bounds(&s, false), AprioriReport::NotApplicable);
    }

    #[test]
    fn violations_are_counted() {
        let mut s = ConservedSeries::new(EnergyWeights::default());
        s.rows.push(row(0.0, 8.0, 9.0, 1.0, 1.0));
        s.rows.push(row(1.0, 8.0, 9.0, 2.5, 3.5));
        let AprioriReport::Checked { holds, violations, .. } = check_apriori_bounds(&s, true) else {
            panic!()
        };
        assert!(!holds);
        assert_eq!(violations, 2);
    }

    #[test]
    fn crest_track_unwraps() {
        let mut s = ConservedSeries::new(EnergyWeights::default());
        for (t, x) in [(0.0, 9.0), (1.0, 9.8), (2.0, 0.6), (3.0, 1.4)] {
            let mut r = row(t, 1.0, 1.0, 0.0, 0.0);
            r.crest = x;
            s.rows.push(r);
        }
        assert!((s.crest_speed(10.0) - 0.8).abs() < 1e-12);
    }
}
