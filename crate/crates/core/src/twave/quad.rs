//! Gauss–Legendre quadrature and an adaptive Dormand–Prince integrator for
//! scalar ODEs.

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_a^b f` with composite Gauss–Legendre on `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = gauss_legendre(20);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            rule.iter().map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepFailure {
    pub x: f64,
}

/// Adaptive Dormand–Prince 5(4) for `y' = f(x, y)`, advancing `(x, y)` to
/// `x_end` in place. `h` carries the step size between calls.
pub fn dopri5(
    f: &impl Fn(f64, f64) -> f64,
    x: &mut f64,
    y: &mut f64,
    h: &mut f64,
    x_end: f64,
    tol: f64,
) -> Result<(), StepFailure> {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    // fifth-order weights minus fourth-order weights
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let dir = (x_end - *x).signum();
    if *h == 0.0 || h.signum() != dir {
        *h = 1e-3 * dir;
    }
    let mut steps = 0usize;
    while (x_end - *x) * dir > 0.0 {
        steps += 1;
        if steps > 1_000_000 || h.abs() < 1e-14 * x.abs().max(1.0) {
            return Err(StepFailure { x: *x });
        }
        let hh = if (*x + *h - x_end) * dir > 0.0 { x_end - *x } else { *h };
        let mut k = [0.0; 7];
        for s in 0..7 {
            let yi = *y + hh * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
            k[s] = f(*x + C[s] * hh, yi);
        }
        let y_new = *y + hh * (0..6).map(|j| A[6][j] * k[j]).sum::<f64>();
        let err = (hh * (0..7).map(|j| E[j] * k[j]).sum::<f64>()).abs();
        let scale = tol * (1.0 + y.abs().max(y_new.abs()));
        if !y_new.is_finite() {
            *h *= 0.25;
            continue;
        }
        let ratio = err / scale;
        if ratio <= 1.0 {
            *x += hh;
            *y = y_new;
        }
        let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
        if ratio <= 1.0 && hh != *h {
            // the clipped final step says nothing about the natural size
            continue;
        }
        *h = hh * factor;
    }
    Ok(())
}
