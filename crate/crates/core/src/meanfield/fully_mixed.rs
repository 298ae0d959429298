//! Fully-mixed population ODE with random recoupling of the two layers.

use crate::contagion::{InitialConditions, Params};
use crate::error::Result;
use crate::ode::{integrate, uniform_grid, OdeOptions};

use super::EXTINCTION_MASS;

/// Population fractions; the opinion block and the disease block each sum
/// to 1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FullyMixedState {
    pub u: f64,
    pub p: f64,
    pub a: f64,
    pub r_info: f64,
    pub s: f64,
    pub i: f64,
    pub r_phy: f64,
}

impl FullyMixedState {
    pub fn initial(init: &InitialConditions) -> Self {
        FullyMixedState {
            u: 1.0 - init.a0 - init.p0,
            p: init.p0,
            a: init.a0,
            r_info: 0.0,
            s: 1.0 - init.i0,
            i: init.i0,
            r_phy: 0.0,
        }
    }

    pub fn to_array(self) -> [f64; 7] {
        [self.u, self.p, self.a, self.r_info, self.s, self.i, self.r_phy]
    }

    pub fn from_slice(y: &[f64]) -> Self {
        FullyMixedState { u: y[0], p: y[1], a: y[2], r_info: y[3], s: y[4], i: y[5], r_phy: y[6] }
    }

    /// Effective transmission rate under random recoupling.
    pub fn beta_star(&self, params: &Params) -> f64 {
        (self.p * params.alpha_pro + self.a * params.alpha_anti + 1.0 - self.a - self.p) * params.beta_phy
    }
}

pub fn fully_mixed_rhs(x: &FullyMixedState, params: &Params) -> FullyMixedState {
    let to_p = params.beta_pro * x.u * x.p;
    let to_a = params.beta_anti * x.u * x.a;
    let back = params.tau * x.r_info;
    let infect = x.beta_star(params) * x.s * x.i;
    FullyMixedState {
        u: -to_p - to_a + back,
        p: to_p - params.gamma_pro * x.p,
        a: to_a - params.gamma_anti * x.a,
        r_info: params.gamma_pro * x.p + params.gamma_anti * x.a - back,
        s: -infect,
        i: infect - params.gamma_phy * x.i,
        r_phy: params.gamma_phy * x.i,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FullyMixedRun {
    pub times: Vec<f64>,
    pub states: Vec<FullyMixedState>,
    /// `[R_phy] + [I]` when the infectious mass vanished, or at the horizon.
    pub final_size: f64,
    pub t_final: f64,
    pub max_clamp: f64,
}

/// Integrates to `t_end`, reporting every `dt`, and stops early once `[I]`
/// is below the extinction mass and not increasing.
pub fn run_fully_mixed(
    params: &Params,
    init: &InitialConditions,
    t_end: f64,
    dt: f64,
    opts: &OdeOptions,
) -> Result<FullyMixedRun> {
    params.validate()?;
    init.validate()?;
    let y0 = FullyMixedState::initial(init).to_array();
    let grid = uniform_grid(0.0, t_end, dt);
    let sol = integrate(
        |_, y, dy| {
            let d = fully_mixed_rhs(&FullyMixedState::from_slice(y), params).to_array();
            dy.copy_from_slice(&d);
        },
        &grid,
        &y0,
        opts,
        |_, y, dy| y[5] < EXTINCTION_MASS && dy[5] <= 0.0,
    )?;
    let last = FullyMixedState::from_slice(&sol.y_final);
    Ok(FullyMixedRun {
        times: sol.times,
        states: sol.states.iter().map(|y| FullyMixedState::from_slice(y)).collect(),
        final_size: last.r_phy + last.i,
        t_final: sol.t_final,
        max_clamp: sol.max_clamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opinion_free_block_is_sir() {
        let p = Params { alpha_pro: 0.1, alpha_anti: 10.0, ..Params::default() };
        let x = FullyMixedState { u: 1.0, s: 0.9, i: 0.1, ..Default::default() };
        assert_eq!(x.beta_star(&p), p.beta_phy);
        let d = fully_mixed_rhs(&x, &p);
        assert!((d.i - (p.beta_phy * 0.09 - 0.1)).abs() < 1e-15);
    }

    #[test]
    fn blocks_conserve_mass() {
        let p = Params { tau: 0.7, ..Params::default() };
        let x = FullyMixedState { u: 0.5, p: 0.2, a: 0.2, r_info: 0.1, s: 0.6, i: 0.3, r_phy: 0.1 };
        let d = fully_mixed_rhs(&x, &p);
        assert!((d.u + d.p + d.a + d.r_info).abs() < 1e-15);
        assert!((d.s + d.i + d.r_phy).abs() < 1e-15);
    }
}
