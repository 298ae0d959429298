//! Degree-based pair approximation on two-layer networks.
//!
//! State layout (all entries are expected counts per node):
//! - singles `[Y_{k1} X_{k2}]` for all 12 compartments; the `RR` slot is
//!   evolved as the complement of the other eleven;
//! - physical-layer dyads `[Y_{k1} S_{k2} ∘ Z_l]` for `Y ∈ {U,P,A,R}`,
//!   `Z ∈ {S,I}` and `l` a physical degree;
//! - information-layer dyads `[U_{k1} X_{k2} ∘ W_l]` for `X ∈ {S,I,R}`,
//!   `W ∈ {U,P,A}` and `l` an information degree.
//!
//! Triples are closed at the pair level; the transmission rate of the
//! untracked susceptible end of a physical dyad comes from a
//! [`BetaHatScheme`].
//!
//! Opinion loss at rate `tau` moves every `R·` single and `R S ∘ Z` dyad to
//! its `U` counterpart. Information dyads gained this way (a returning center,
//! or an `R` neighbor of a `U` center returning) are estimated from the
//! center's degree, the layer's neighbor-degree law and the opinion
//! composition of the neighbor's degree class.

use std::io::{self, Write};

use serde::Serialize;

use crate::contagion::{InitialConditions, Params, COMPARTMENT_NAMES, N_COMPARTMENTS};
use crate::error::{Error, Result};
use crate::gillespie::{fmt_time, write_header};
use crate::multiplex_net::NetworkSpec;
use crate::ode::{integrate_observed, uniform_grid, OdeOptions};

use super::{close_triple_cross_layer, close_triple_same_layer, BetaHatScheme, EPS, EXTINCTION_MASS};

const U: usize = 0;
const P: usize = 1;
const A: usize = 2;
const R: usize = 3;
const S: usize = 0;
const I: usize = 1;
const RR: usize = 11;

/// Degree structure seen by the pair approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct PairNetwork {
    pub info_degrees: Vec<usize>,
    pub phy_degrees: Vec<usize>,
    pub p_info: Vec<f64>,
    pub p_phy: Vec<f64>,
    /// Joint degree-type distribution `C[k1][k2]`.
    pub joint: Vec<Vec<f64>>,
    /// Ordered dyad densities `<k> E[k][l]` per layer.
    pub d_info: Vec<Vec<f64>>,
    pub d_phy: Vec<Vec<f64>>,
}

impl PairNetwork {
    pub fn from_spec(spec: &NetworkSpec) -> Result<Self> {
        let info = spec.info.mixing()?;
        let phy = spec.phy.mixing()?;
        let coupling = spec.joint_degrees()?;
        let info_table = info.degree_table();
        let phy_table = phy.degree_table();
        let mut joint = vec![vec![0.0; phy_table.len()]; info_table.len()];
        for (a, &k1) in coupling.info_degrees().iter().enumerate() {
            for (b, &k2) in coupling.phy_degrees().iter().enumerate() {
                let v = coupling.entries()[a][b];
                if v == 0.0 {
                    continue;
                }
                match (info_table.index_of(k1), phy_table.index_of(k2)) {
                    (Some(i), Some(j)) => joint[i][j] += v,
                    _ => {
                        return Err(Error::config(format!(
                            "coupling places mass on degree type ({k1}, {k2}) outside the layer supports"
                        )))
                    }
                }
            }
        }
        Ok(PairNetwork {
            info_degrees: info_table.degrees.clone(),
            phy_degrees: phy_table.degrees.clone(),
            p_info: info_table.probs.clone(),
            p_phy: phy_table.probs.clone(),
            joint,
            d_info: info.dyad_density(),
            d_phy: phy.dyad_density(),
        })
    }
}

/// Range of `β̂ / β_phy` over all evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaHatStats {
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Evaluations where every neighborhood term vanished.
    pub fallbacks: u64,
    pub evaluations: u64,
}

impl Default for BetaHatStats {
    fn default() -> Self {
        BetaHatStats { min_ratio: f64::INFINITY, max_ratio: f64::NEG_INFINITY, fallbacks: 0, evaluations: 0 }
    }
}

impl BetaHatStats {
    fn record(&mut self, ratio: f64) {
        self.min_ratio = self.min_ratio.min(ratio);
        self.max_ratio = self.max_ratio.max(ratio);
        self.evaluations += 1;
    }

    /// Whether every recorded ratio lies in `[alpha_pro, alpha_anti]` up to
    /// a relative tolerance.
    pub fn within(&self, params: &Params, tol: f64) -> bool {
        self.evaluations == 0
            || (self.min_ratio >= params.alpha_pro.min(1.0) * (1.0 - tol)
                && self.max_ratio <= params.alpha_anti.max(1.0) * (1.0 + tol))
    }
}

/// Scratch buffers for one right-hand-side evaluation.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    phy_sum: Vec<f64>,
    info_sum: Vec<f64>,
    s_l: Vec<f64>,
    s_l_i: Vec<f64>,
    u_l: Vec<f64>,
    u_l_w: Vec<f64>,
    op_frac: Vec<f64>,
    beta_hat: Vec<f64>,
    pub stats: BetaHatStats,
}

#[derive(Clone, Debug)]
pub struct PairApproximation {
    net: PairNetwork,
    params: Params,
    scheme: BetaHatScheme,
    n1: usize,
    n2: usize,
    off_phy: usize,
    off_info: usize,
    len: usize,
    /// `q(l | k1)`: degree law of an information neighbor of a degree-k1 node.
    q_info: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairRun {
    pub times: Vec<f64>,
    /// Compartment fractions summed over degree types.
    pub totals: Vec<[f64; N_COMPARTMENTS]>,
    /// Every slot at each reporting time, when requested.
    pub full_states: Option<Vec<Vec<f64>>>,
    /// `[R_phy] + [I]` when the infectious mass vanished, or at the horizon.
    pub final_size: f64,
    pub t_final: f64,
    pub max_clamp: f64,
    /// Largest `|Σ singles - 1|` over accepted steps and reported states.
    pub max_mass_error: f64,
    pub beta_hat: BetaHatStats,
}

impl PairRun {
    pub fn infectious(&self) -> Vec<f64> {
        self.totals.iter().map(|t| (0..4).map(|o| t[o * 3 + I]).sum()).collect()
    }

    pub fn peak(&self) -> (f64, f64) {
        let inf = self.infectious();
        let mut best = (0.0, 0.0);
        for (t, v) in self.times.iter().zip(inf) {
            if v > best.0 {
                best = (v, *t);
            }
        }
        best
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w)?;
        for (t, f) in self.times.iter().zip(&self.totals) {
            write!(w, "{}", fmt_time(*t))?;
            for v in f {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

impl PairApproximation {
    pub fn new(net: PairNetwork, params: Params, scheme: BetaHatScheme) -> Result<Self> {
        params.validate()?;
        let n1 = net.info_degrees.len();
        let n2 = net.phy_degrees.len();
        if n1 == 0 || n2 == 0 {
            return Err(Error::config("empty degree support"));
        }
        let off_phy = N_COMPARTMENTS * n1 * n2;
        let off_info = off_phy + 4 * 2 * n1 * n2 * n2;
        let len = off_info + 3 * 3 * n1 * n2 * n1;
        let q_info = net
            .d_info
            .iter()
            .map(|row| {
                let total: f64 = row.iter().sum();
                row.iter().map(|v| if total > 0.0 { v / total } else { 0.0 }).collect()
            })
            .collect();
        Ok(PairApproximation { net, params, scheme, n1, n2, off_phy, off_info, len, q_info })
    }

    pub fn from_spec(spec: &NetworkSpec, params: Params, scheme: BetaHatScheme) -> Result<Self> {
        Self::new(PairNetwork::from_spec(spec)?, params, scheme)
    }

    pub fn network(&self) -> &PairNetwork {
        &self.net
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn scheme(&self) -> BetaHatScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            phy_sum: vec![0.0; 8 * self.n1 * self.n2],
            info_sum: vec![0.0; 9 * self.n1 * self.n2],
            s_l: vec![0.0; self.n2],
            s_l_i: vec![0.0; self.n2],
            u_l: vec![0.0; self.n1],
            u_l_w: vec![0.0; 3 * self.n1],
            op_frac: vec![0.0; 4 * self.n1],
            beta_hat: vec![0.0; self.n2 * self.n2],
            stats: BetaHatStats::default(),
        }
    }

    /// Slot of single `[Y_{k1} X_{k2}]` for compartment `c`.
    #[inline]
    pub fn single(&self, c: usize, i1: usize, i2: usize) -> usize {
        (c * self.n1 + i1) * self.n2 + i2
    }

    /// Slot of `[Y_{k1} S_{k2} ∘ Z_l]` with `y` an opinion index and `z` 0
    /// for S, 1 for I.
    #[inline]
    pub fn phy(&self, y: usize, z: usize, i1: usize, i2: usize, l: usize) -> usize {
        self.off_phy + ((((y * 2 + z) * self.n1 + i1) * self.n2 + i2) * self.n2) + l
    }

    /// Slot of `[U_{k1} X_{k2} ∘ W_l]` with `x` a disease index and `w` an
    /// opinion index in `{U, P, A}`.
    #[inline]
    pub fn info(&self, x: usize, w: usize, i1: usize, i2: usize, l: usize) -> usize {
        self.off_info + ((((x * 3 + w) * self.n1 + i1) * self.n2 + i2) * self.n1) + l
    }

    /// Human-readable name of every slot, e.g. `AS(5;3)`, `AS(5;3)~I(4)`,
    /// `UI(5;3)~P(2)`; degrees are `(k_info;k_phy)` and the neighbor degree
    /// is in its own layer.
    pub fn slot_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.len];
        let (k1s, k2s) = (&self.net.info_degrees, &self.net.phy_degrees);
        for c in 0..N_COMPARTMENTS {
            for (i1, k1) in k1s.iter().enumerate() {
                for (i2, k2) in k2s.iter().enumerate() {
                    names[self.single(c, i1, i2)] = format!("{}({k1};{k2})", COMPARTMENT_NAMES[c]);
                }
            }
        }
        for y in 0..4 {
            for z in 0..2 {
                for (i1, k1) in k1s.iter().enumerate() {
                    for (i2, k2) in k2s.iter().enumerate() {
                        for (l, kl) in k2s.iter().enumerate() {
                            names[self.phy(y, z, i1, i2, l)] =
                                format!("{}({k1};{k2})~{}({kl})", COMPARTMENT_NAMES[y * 3], ["S", "I"][z]);
                        }
                    }
                }
            }
        }
        for x in 0..3 {
            for w in 0..3 {
                for (i1, k1) in k1s.iter().enumerate() {
                    for (i2, k2) in k2s.iter().enumerate() {
                        for (l, kl) in k1s.iter().enumerate() {
                            names[self.info(x, w, i1, i2, l)] =
                                format!("{}({k1};{k2})~{}({kl})", COMPARTMENT_NAMES[x], ["U", "P", "A"][w]);
                        }
                    }
                }
            }
        }
        names
    }

    /// Initial state with independent seeding: singles are products of the
    /// degree-type probability and the compartment fractions, dyads use the
    /// layer's dyad density conditioned on the center's degree type.
    pub fn initial_state(&self, init: &InitialConditions) -> Result<Vec<f64>> {
        init.validate()?;
        let op = init.opinion_fractions();
        let dis = init.disease_fractions();
        let net = &self.net;
        let mut y = vec![0.0; self.len];
        for i1 in 0..self.n1 {
            for i2 in 0..self.n2 {
                let c = net.joint[i1][i2];
                for o in 0..4 {
                    for x in 0..3 {
                        y[self.single(o * 3 + x, i1, i2)] = c * op[o] * dis[x];
                    }
                }
                if net.p_phy[i2] > 0.0 {
                    let w = c / net.p_phy[i2];
                    for o in 0..4 {
                        for z in [S, I] {
                            for l in 0..self.n2 {
                                y[self.phy(o, z, i1, i2, l)] = op[o] * dis[S] * dis[z] * w * net.d_phy[i2][l];
                            }
                        }
                    }
                }
                if net.p_info[i1] > 0.0 {
                    let w = c / net.p_info[i1];
                    for x in 0..3 {
                        for nb in [U, P, A] {
                            for l in 0..self.n1 {
                                y[self.info(x, nb, i1, i2, l)] = op[U] * dis[x] * op[nb] * w * net.d_info[i1][l];
                            }
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    /// Compartment fractions summed over degree types.
    pub fn totals(&self, y: &[f64]) -> [f64; N_COMPARTMENTS] {
        let block = self.n1 * self.n2;
        std::array::from_fn(|c| y[c * block..(c + 1) * block].iter().sum())
    }

    fn mult(&self, o: usize) -> f64 {
        match o {
            P => self.params.alpha_pro,
            A => self.params.alpha_anti,
            _ => 1.0,
        }
    }

    fn aggregates(&self, y: &[f64], ws: &mut Workspace) {
        let (n1, n2) = (self.n1, self.n2);
        for yo in 0..4 {
            for z in 0..2 {
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let base = self.phy(yo, z, i1, i2, 0);
                        ws.phy_sum[((yo * 2 + z) * n1 + i1) * n2 + i2] = y[base..base + n2].iter().sum();
                    }
                }
            }
        }
        for x in 0..3 {
            for w in 0..3 {
                for i1 in 0..n1 {
                    for i2 in 0..n2 {
                        let base = self.info(x, w, i1, i2, 0);
                        ws.info_sum[((x * 3 + w) * n1 + i1) * n2 + i2] = y[base..base + n1].iter().sum();
                    }
                }
            }
        }
        ws.s_l.fill(0.0);
        ws.s_l_i.fill(0.0);
        ws.u_l.fill(0.0);
        ws.u_l_w.fill(0.0);
        ws.op_frac.fill(0.0);
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                for yo in 0..4 {
                    ws.s_l[i2] += y[self.single(yo * 3 + S, i1, i2)];
                    ws.s_l_i[i2] += ws.phy_sum[((yo * 2 + I) * n1 + i1) * n2 + i2];
                    for x in 0..3 {
                        ws.op_frac[yo * n1 + i1] += y[self.single(yo * 3 + x, i1, i2)];
                    }
                }
                for x in 0..3 {
                    ws.u_l[i1] += y[self.single(U * 3 + x, i1, i2)];
                    for w in 0..3 {
                        ws.u_l_w[w * n1 + i1] += ws.info_sum[((x * 3 + w) * n1 + i1) * n2 + i2];
                    }
                }
            }
        }
        for i1 in 0..n1 {
            let p = self.net.p_info[i1];
            for yo in 0..4 {
                let v = &mut ws.op_frac[yo * n1 + i1];
                *v = if p > 0.0 { *v / p } else { 0.0 };
            }
        }
    }

    fn compute_beta_hat(&self, y: &[f64], ws: &mut Workspace) {
        let (n1, n2) = (self.n1, self.n2);
        let beta = self.params.beta_phy;
        match self.scheme {
            BetaHatScheme::Mixed => {
                let t = self.totals(y);
                let op = |o: usize| (t[o * 3] + t[o * 3 + 1] + t[o * 3 + 2]).max(0.0);
                let weighted: f64 = (0..4).map(|o| self.mult(o) * op(o)).sum();
                let mass: f64 = (0..4).map(op).sum();
                let ratio = if mass > EPS {
                    weighted / mass
                } else {
                    ws.stats.fallbacks += 1;
                    1.0
                };
                ws.beta_hat.fill(ratio * beta);
                ws.stats.record(ratio);
            }
            BetaHatScheme::Density => {
                for l in 0..n2 {
                    let (mut num, mut den) = (0.0, 0.0);
                    for yo in 0..4 {
                        for i1 in 0..n1 {
                            let v = y[self.single(yo * 3 + S, i1, l)].max(0.0);
                            num += self.mult(yo) * v;
                            den += v;
                        }
                    }
                    let ratio = if den > EPS {
                        num / den
                    } else {
                        ws.stats.fallbacks += 1;
                        1.0
                    };
                    ws.stats.record(ratio);
                    for k2 in 0..n2 {
                        ws.beta_hat[l * n2 + k2] = ratio * beta;
                    }
                }
            }
            BetaHatScheme::Neighborhood => {
                for l in 0..n2 {
                    for k2 in 0..n2 {
                        let (mut num, mut den) = (0.0, 0.0);
                        for i1 in 0..n1 {
                            for yo in 0..4 {
                                let single = y[self.single(yo * 3 + S, i1, l)];
                                if single < EPS {
                                    continue;
                                }
                                // intermediate stages can carry small negative
                                // slots; clamping keeps the ratio a convex
                                // combination of the multipliers
                                let term = y[self.phy(yo, S, i1, l, k2)].max(0.0)
                                    * ws.phy_sum[((yo * 2 + I) * n1 + i1) * n2 + l].max(0.0)
                                    / single;
                                num += self.mult(yo) * term;
                                den += term;
                            }
                        }
                        let ratio = if den > 0.0 && num.is_finite() {
                            num / den
                        } else {
                            ws.stats.fallbacks += 1;
                            1.0
                        };
                        ws.stats.record(ratio);
                        ws.beta_hat[l * n2 + k2] = ratio * beta;
                    }
                }
            }
        }
    }

    /// Evaluates the right-hand side into `dy`.
    pub fn rhs(&self, y: &[f64], dy: &mut [f64], ws: &mut Workspace) {
        let (n1, n2) = (self.n1, self.n2);
        let p = &self.params;
        let (beta, gamma, tau) = (p.beta_phy, p.gamma_phy, p.tau);
        let (b_p, b_a, g_p, g_a) = (p.beta_pro, p.beta_anti, p.gamma_pro, p.gamma_anti);
        self.aggregates(y, ws);
        self.compute_beta_hat(y, ws);
        let phy_sum = |yo: usize, z: usize, i1: usize, i2: usize| ws.phy_sum[((yo * 2 + z) * n1 + i1) * n2 + i2];
        let info_sum = |x: usize, w: usize, i1: usize, i2: usize| ws.info_sum[((x * 3 + w) * n1 + i1) * n2 + i2];

        // singles
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let s = |c: usize| y[self.single(c, i1, i2)];
                let (us_i, as_i, ps_i, rs_i) =
                    (phy_sum(U, I, i1, i2), phy_sum(A, I, i1, i2), phy_sum(P, I, i1, i2), phy_sum(R, I, i1, i2));
                let (us_a, us_p) = (info_sum(S, A, i1, i2), info_sum(S, P, i1, i2));
                let (ui_a, ui_p) = (info_sum(I, A, i1, i2), info_sum(I, P, i1, i2));
                let (ur_a, ur_p) = (info_sum(2, A, i1, i2), info_sum(2, P, i1, i2));
                let mut d = [0.0; N_COMPARTMENTS];
                d[0] = -us_i * beta - us_a * b_a - us_p * b_p + tau * s(9);
                d[1] = us_i * beta - s(1) * gamma - ui_a * b_a - ui_p * b_p + tau * s(10);
                d[2] = s(1) * gamma - ur_a * b_a - ur_p * b_p + tau * s(11);
                d[3] = -ps_i * beta * p.alpha_pro + us_p * b_p - s(3) * g_p;
                d[4] = ps_i * beta * p.alpha_pro - s(4) * gamma + ui_p * b_p - s(4) * g_p;
                d[5] = s(4) * gamma + ur_p * b_p - s(5) * g_p;
                d[6] = -as_i * beta * p.alpha_anti + us_a * b_a - s(6) * g_a;
                d[7] = as_i * beta * p.alpha_anti - s(7) * gamma + ui_a * b_a - s(7) * g_a;
                d[8] = s(7) * gamma + ur_a * b_a - s(8) * g_a;
                d[9] = -rs_i * beta + s(6) * g_a + s(3) * g_p - tau * s(9);
                d[10] = rs_i * beta - s(10) * gamma + s(7) * g_a + s(4) * g_p - tau * s(10);
                d[RR] = -d[..RR].iter().sum::<f64>();
                for (c, v) in d.into_iter().enumerate() {
                    dy[self.single(c, i1, i2)] = v;
                }
            }
        }

        // physical-layer dyads
        for i1 in 0..n1 {
            for i2 in 0..n2 {
                let k2 = self.net.phy_degrees[i2];
                let us_single = y[self.single(U * 3 + S, i1, i2)];
                let (us_a, us_p) = (info_sum(S, A, i1, i2), info_sum(S, P, i1, i2));
                for yo in 0..4 {
                    let center = y[self.single(yo * 3 + S, i1, i2)];
                    let rate = beta * self.mult(yo);
                    let inf_nb = phy_sum(yo, I, i1, i2);
                    for l in 0..n2 {
                        let ldeg = self.net.phy_degrees[l];
                        let bh = ws.beta_hat[l * n2 + i2];
                        let s_side = close_triple_same_layer(y[self.phy(yo, S, i1, i2, l)], ws.s_l_i[l], ws.s_l[l], ldeg);
                        for z in [S, I] {
                            let pz = y[self.phy(yo, z, i1, i2, l)];
                            let other_inf = close_triple_same_layer(inf_nb, pz, center, k2);
                            let mut d = if z == I {
                                s_side * bh - pz * rate - other_inf * rate - pz * gamma
                            } else {
                                -s_side * bh - other_inf * rate
                            };
                            let pu = y[self.phy(U, z, i1, i2, l)];
                            match yo {
                                U => {
                                    d -= close_triple_cross_layer(us_p, pz, center) * b_p
                                        + close_triple_cross_layer(us_a, pz, center) * b_a;
                                    d += tau * y[self.phy(R, z, i1, i2, l)];
                                }
                                P => d += close_triple_cross_layer(us_p, pu, us_single) * b_p - pz * g_p,
                                A => d += close_triple_cross_layer(us_a, pu, us_single) * b_a - pz * g_a,
                                _ => {
                                    d += y[self.phy(A, z, i1, i2, l)] * g_a + y[self.phy(P, z, i1, i2, l)] * g_p
                                        - tau * pz;
                                }
                            }
                            dy[self.phy(yo, z, i1, i2, l)] = d;
                        }
                    }
                }
            }
        }

        // information-layer dyads
        for i1 in 0..n1 {
            let k1 = self.net.info_degrees[i1];
            for i2 in 0..n2 {
                let us_single = y[self.single(U * 3 + S, i1, i2)];
                let us_inf = phy_sum(U, I, i1, i2);
                for x in 0..3 {
                    let center = y[self.single(U * 3 + x, i1, i2)];
                    let (nb_a, nb_p) = (info_sum(x, A, i1, i2), info_sum(x, P, i1, i2));
                    let returning = tau * k1 as f64 * y[self.single(R * 3 + x, i1, i2)];
                    let u_center = tau * k1 as f64 * center;
                    for l in 0..n1 {
                        let ldeg = self.net.info_degrees[l];
                        let pu = y[self.info(x, U, i1, i2, l)];
                        let f_a = close_triple_same_layer(pu, ws.u_l_w[A * n1 + l], ws.u_l[l], ldeg);
                        let f_p = close_triple_same_layer(pu, ws.u_l_w[P * n1 + l], ws.u_l[l], ldeg);
                        let q = self.q_info[i1][l];
                        for w in [U, P, A] {
                            let pw = y[self.info(x, w, i1, i2, l)];
                            let mut d = -close_triple_same_layer(nb_a, pw, center, k1) * b_a
                                - close_triple_same_layer(nb_p, pw, center, k1) * b_p;
                            match w {
                                A => d += -pw * b_a + f_a * b_a - pw * g_a,
                                P => d += -pw * b_p + f_p * b_p - pw * g_p,
                                _ => d -= f_a * b_a + f_p * b_p,
                            }
                            let infected = close_triple_cross_layer(us_inf, y[self.info(S, w, i1, i2, l)], us_single) * beta;
                            match x {
                                S => d -= infected,
                                I => d += infected - pw * gamma,
                                _ => d += y[self.info(I, w, i1, i2, l)] * gamma,
                            }
                            if tau > 0.0 {
                                d += returning * q * ws.op_frac[w * n1 + l];
                                if w == U {
                                    d += u_center * q * ws.op_frac[R * n1 + l];
                                }
                            }
                            dy[self.info(x, w, i1, i2, l)] = d;
                        }
                    }
                }
            }
        }
    }

    /// Integrates from `init` to `t_end`, reporting every `dt`; stops early
    /// once the infectious mass is below the extinction threshold and not
    /// increasing.
    pub fn run(
        &self,
        init: &InitialConditions,
        t_end: f64,
        dt: f64,
        opts: &OdeOptions,
        keep_full_state: bool,
    ) -> Result<PairRun> {
        let y0 = self.initial_state(init)?;
        let grid = uniform_grid(0.0, t_end, dt);
        let mut ws = self.workspace();
        let mut mass_err: f64 = 0.0;
        let block = self.n1 * self.n2;
        let infectious = |v: &[f64]| -> f64 { (0..4).map(|o| v[(o * 3 + I) * block..(o * 3 + I + 1) * block].iter().sum::<f64>()).sum() };
        let mut totals: Vec<[f64; N_COMPARTMENTS]> = Vec::with_capacity(grid.len());
        let mut full_states = keep_full_state.then(Vec::new);
        let sol = integrate_observed(
            |_, y, dy| self.rhs(y, dy, &mut ws),
            &grid,
            &y0,
            opts,
            |_, y, dy| {
                let mass: f64 = y[..N_COMPARTMENTS * block].iter().sum();
                mass_err = mass_err.max((mass - 1.0).abs());
                infectious(y) < EXTINCTION_MASS && infectious(dy) <= 0.0
            },
            |_, y| {
                totals.push(self.totals(y));
                if let Some(f) = full_states.as_mut() {
                    f.push(y.to_vec());
                }
            },
        )?;
        for t in &totals {
            mass_err = mass_err.max((t.iter().sum::<f64>() - 1.0).abs());
        }
        let last = self.totals(&sol.y_final);
        let final_size = (0..4).map(|o| last[o * 3 + 1] + last[o * 3 + 2]).sum();
        Ok(PairRun {
            times: sol.times,
            totals,
            full_states,
            final_size,
            t_final: sol.t_final,
            max_clamp: sol.max_clamp,
            max_mass_error: mass_err,
            beta_hat: ws.stats,
        })
    }

    /// Writes every slot at each reporting time; requires a run made with
    /// `keep_full_state`.
    pub fn write_full_state_csv<W: Write>(&self, run: &PairRun, mut w: W) -> io::Result<()> {
        let states = run
            .full_states
            .as_ref()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "run kept no full state"))?;
        write!(w, "t")?;
        for name in self.slot_names() {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (t, s) in run.times.iter().zip(states) {
            write!(w, "{}", fmt_time(*t))?;
            for v in s {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
