//! Adaptive Dormand-Prince 5(4) integration with dense output.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
    /// Clamp negative components to zero after every accepted step.
    pub clamp_negative: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            h_init: None,
            max_steps: 10_000_000,
            clamp_negative: true,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        OdeOptions { rel_tol, abs_tol, ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Reporting-grid times reached before the end or the stop predicate.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Time of the last accepted step.
    pub t_final: f64,
    pub y_final: Vec<f64>,
    /// True when the stop predicate ended the integration.
    pub stopped: bool,
    /// Largest magnitude of a negative component removed by clamping.
    pub max_clamp: f64,
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrates `y' = f(t, y)` from `t_grid[0]` and reports the solution at
/// every time of `t_grid` (which must be nondecreasing).
///
/// After each accepted step `stop(t, y, f(t, y))` is consulted; returning
/// true ends the integration there.
pub fn integrate<F, S>(f: F, t_grid: &[f64], y0: &[f64], opts: &OdeOptions, stop: S) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64], &[f64]) -> bool,
{
    let mut states = Vec::with_capacity(t_grid.len());
    let mut sol = integrate_observed(f, t_grid, y0, opts, stop, |_, y| states.push(y.to_vec()))?;
    sol.states = states;
    Ok(sol)
}

/// Like [`integrate`], but hands each reported state to `observe` instead of
/// storing it; `Solution::states` is left empty.
pub fn integrate_observed<F, S, O>(
    mut f: F,
    t_grid: &[f64],
    y0: &[f64],
    opts: &OdeOptions,
    mut stop: S,
    mut observe: O,
) -> Result<Solution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    S: FnMut(f64, &[f64], &[f64]) -> bool,
    O: FnMut(f64, &[f64]),
{
    if t_grid.is_empty() {
        return Err(Error::config("empty reporting grid"));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("reporting grid must be nondecreasing"));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::config("tolerances must be positive"));
    }
    let n = y0.len();
    let t0 = t_grid[0];
    let t_end = *t_grid.last().unwrap();

    let mut sol = Solution {
        times: Vec::with_capacity(t_grid.len()),
        states: Vec::new(),
        t_final: t0,
        y_final: y0.to_vec(),
        stopped: false,
        max_clamp: 0.0,
        steps: 0,
        rejected: 0,
        evaluations: 0,
    };

    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t0, &y, &mut k1);
    sol.evaluations += 1;

    let mut next_out = 0;
    while next_out < t_grid.len() && t_grid[next_out] <= t0 {
        sol.times.push(t_grid[next_out]);
        observe(t_grid[next_out], &y);
        next_out += 1;
    }
    if stop(t0, &y, &k1) {
        sol.stopped = true;
        return Ok(sol);
    }
    if t_end <= t0 {
        return Ok(sol);
    }

    let [mut k2, mut k3, mut k4, mut k5, mut k6, mut k7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut out = vec![0.0; n];
    let mut cont = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];

    let span = t_end - t0;
    let mut h = match opts.h_init {
        Some(h) => h.min(span),
        None => initial_step(&mut f, t0, &y, &k1, opts, span, &mut sol.evaluations),
    };
    let mut t = t0;
    let mut err_prev: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if sol.steps + sol.rejected >= opts.max_steps {
            return Err(Error::Integration { t, reason: "maximum number of steps exceeded".into() });
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration { t, reason: format!("step size {h:e} underflow") });
        }
        let mut last = false;
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
            last = true;
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        f(t + C2 * h, &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        f(t + C3 * h, &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        f(t + C4 * h, &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        f(t + C5 * h, &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        f(t + h, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        f(t + h, &ynew, &mut k7);
        sol.evaluations += 6;

        let mut err = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.abs_tol + opts.rel_tol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };
        if !err.is_finite() {
            h *= 0.1;
            sol.rejected += 1;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            // dense output coefficients, built from the unclamped step
            for i in 0..n {
                let dy = ynew[i] - y[i];
                let bspl = h * k1[i] - dy;
                cont[0][i] = y[i];
                cont[1][i] = dy;
                cont[2][i] = bspl;
                cont[3][i] = dy - h * k7[i] - bspl;
                cont[4][i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_new = if last { t_end } else { t + h };
            while next_out < t_grid.len() && t_grid[next_out] <= t_new {
                let theta = ((t_grid[next_out] - t) / h).clamp(0.0, 1.0);
                let th1 = 1.0 - theta;
                for (i, o) in out.iter_mut().enumerate() {
                    *o = cont[0][i]
                        + theta * (cont[1][i] + th1 * (cont[2][i] + theta * (cont[3][i] + th1 * cont[4][i])));
                }
                if theta == 1.0 {
                    out.copy_from_slice(&ynew);
                }
                if opts.clamp_negative {
                    for v in out.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
                sol.times.push(t_grid[next_out]);
                observe(t_grid[next_out], &out);
                next_out += 1;
            }

            let mut clamped = false;
            if opts.clamp_negative {
                for v in ynew.iter_mut() {
                    if *v < 0.0 {
                        sol.max_clamp = sol.max_clamp.max(-*v);
                        *v = 0.0;
                        clamped = true;
                    }
                }
            }
            std::mem::swap(&mut y, &mut ynew);
            if clamped {
                f(t_new, &y, &mut k1);
                sol.evaluations += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            t = t_new;
            sol.steps += 1;

            if stop(t, &y, &k1) {
                sol.stopped = true;
                break;
            }

            // PI step-size control
            let err_c = err.max(1e-10);
            let mut fac = 0.9 * err_c.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_prev = err_c;
            h *= fac;
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            sol.rejected += 1;
            last_rejected = true;
        }
    }
    sol.t_final = t;
    sol.y_final = y;
    Ok(sol)
}

/// A stop predicate that never fires.
pub fn never(_: f64, _: &[f64], _: &[f64]) -> bool {
    false
}

fn initial_step<F>(
    f: &mut F,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    opts: &OdeOptions,
    span: f64,
    evals: &mut usize,
) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len().max(1) as f64;
    let sc: Vec<f64> = y0.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).collect();
    let norm = |v: &[f64]| (v.iter().zip(&sc).map(|(x, s)| (x / s).powi(2)).sum::<f64>() / n).sqrt();
    let d0 = norm(y0);
    let d1 = norm(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, d)| y + h0 * d).collect();
    let mut f1 = vec![0.0; y0.len()];
    f(t0 + h0, &y1, &mut f1);
    *evals += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = norm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Evenly spaced grid `t0, t0 + dt, ...` ending exactly at `t_end`.
pub fn uniform_grid(t0: f64, t_end: f64, dt: f64) -> Vec<f64> {
    assert!(dt > 0.0 && t_end >= t0);
    let steps = ((t_end - t0) / dt).round() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|i| t0 + i as f64 * dt).filter(|&t| t <= t_end).collect();
    if grid.last().is_none_or(|&t| t < t_end - 1e-12 * dt) {
        grid.push(t_end);
    } else {
        *grid.last_mut().unwrap() = t_end;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_is_constant() {
        let sol = integrate(|_, _, dy: &mut [f64]| dy.fill(0.0), &[0.0, 1.0, 5.0], &[0.3, 0.7], &OdeOptions::default(), never)
            .unwrap();
        for s in &sol.states {
            assert_eq!(s, &vec![0.3, 0.7]);
        }
    }

    #[test]
    fn exponential_decay() {
        let grid = uniform_grid(0.0, 1.0, 0.05);
        let sol = integrate(|_, y, dy| dy[0] = -y[0], &grid, &[1.0], &OdeOptions::default(), never).unwrap();
        for (t, s) in sol.times.iter().zip(&sol.states) {
            let exact = (-t).exp();
            assert!((s[0] - exact).abs() <= 1e-8 * exact, "t={t}: {} vs {exact}", s[0]);
        }
        assert_eq!(*sol.times.last().unwrap(), 1.0);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let grid = uniform_grid(0.0, 10.0, 0.37);
        let sol = integrate(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &grid,
            &[1.0, 0.0],
            &OdeOptions { clamp_negative: false, ..OdeOptions::with_tolerances(1e-10, 1e-12) },
            never,
        )
        .unwrap();
        for (t, s) in sol.times.iter().zip(&sol.states) {
            assert!((s[0] - t.cos()).abs() < 1e-8);
        }
    }

    #[test]
    fn stop_predicate_ends_early() {
        let grid = uniform_grid(0.0, 100.0, 1.0);
        let sol = integrate(|_, y, dy| dy[0] = -y[0], &grid, &[1.0], &OdeOptions::default(), |_, y, _| y[0] < 1e-3)
            .unwrap();
        assert!(sol.stopped);
        assert!(sol.t_final < 100.0 && sol.y_final[0] < 1e-3);
        assert!(sol.times.last().unwrap() <= &sol.t_final);
    }

    #[test]
    fn blow_up_reports_failure_time() {
        // y' = y^2 from y = 1 explodes at t = 1
        let err = integrate(|_, y, dy| dy[0] = y[0] * y[0], &[0.0, 2.0], &[1.0], &OdeOptions::default(), never)
            .unwrap_err();
        match err {
            Error::Integration { t, .. } => assert!((t - 1.0).abs() < 1e-3, "t = {t}"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn grid_endpoints() {
        let g = uniform_grid(0.0, 1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert_eq!(g[10], 1.0);
        let g = uniform_grid(0.0, 1.05, 0.1);
        assert_eq!(*g.last().unwrap(), 1.05);
    }
}
