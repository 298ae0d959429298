//! Compartments, parameters and per-node transition rates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiplex_net::MultiplexNetwork;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Opinion {
    /// Uninformed.
    U,
    /// Pro-physical-distancing.
    P,
    /// Anti-physical-distancing.
    A,
    /// Recovered from an opinion.
    R,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Disease {
    S,
    I,
    R,
}

impl Opinion {
    pub const ALL: [Opinion; 4] = [Opinion::U, Opinion::P, Opinion::A, Opinion::R];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl Disease {
    pub const ALL: [Disease; 3] = [Disease::S, Disease::I, Disease::R];

    pub fn index(self) -> usize {
        self as usize
    }
}

pub const N_COMPARTMENTS: usize = 12;

/// Compartment labels in column order: opinion-major, disease-minor.
pub const COMPARTMENT_NAMES: [&str; N_COMPARTMENTS] =
    ["US", "UI", "UR", "PS", "PI", "PR", "AS", "AI", "AR", "RS", "RI", "RR"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeState {
    pub opinion: Opinion,
    pub disease: Disease,
}

impl NodeState {
    pub const fn new(opinion: Opinion, disease: Disease) -> Self {
        NodeState { opinion, disease }
    }

    /// Index into [`COMPARTMENT_NAMES`].
    pub fn compartment(self) -> usize {
        self.opinion.index() * 3 + self.disease.index()
    }

    pub fn from_compartment(c: usize) -> Self {
        assert!(c < N_COMPARTMENTS, "compartment index {c} out of range");
        NodeState::new(Opinion::ALL[c / 3], Disease::ALL[c % 3])
    }
}

impl Default for NodeState {
    fn default() -> Self {
        NodeState::new(Opinion::U, Disease::S)
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(COMPARTMENT_NAMES[self.compartment()])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Info,
    Phy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransitionKind {
    U2P,
    U2A,
    P2R,
    A2R,
    R2U,
    S2I,
    I2R,
}

impl TransitionKind {
    pub const ALL: [TransitionKind; 7] = [
        TransitionKind::U2P,
        TransitionKind::U2A,
        TransitionKind::P2R,
        TransitionKind::A2R,
        TransitionKind::R2U,
        TransitionKind::S2I,
        TransitionKind::I2R,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransitionKind::U2P => "U2P",
            TransitionKind::U2A => "U2A",
            TransitionKind::P2R => "P2R",
            TransitionKind::A2R => "A2R",
            TransitionKind::R2U => "R2U",
            TransitionKind::S2I => "S2I",
            TransitionKind::I2R => "I2R",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        TransitionKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn layer(self) -> Layer {
        match self {
            TransitionKind::S2I | TransitionKind::I2R => Layer::Phy,
            _ => Layer::Info,
        }
    }

    /// The state reached by firing this transition, or `None` if it is not
    /// defined for `state`.
    pub fn apply(self, state: NodeState) -> Option<NodeState> {
        use Disease as D;
        use Opinion as O;
        let NodeState { opinion, disease } = state;
        let next = match (self, opinion, disease) {
            (TransitionKind::U2P, O::U, _) => NodeState::new(O::P, disease),
            (TransitionKind::U2A, O::U, _) => NodeState::new(O::A, disease),
            (TransitionKind::P2R, O::P, _) => NodeState::new(O::R, disease),
            (TransitionKind::A2R, O::A, _) => NodeState::new(O::R, disease),
            (TransitionKind::R2U, O::R, _) => NodeState::new(O::U, disease),
            (TransitionKind::S2I, _, D::S) => NodeState::new(opinion, D::I),
            (TransitionKind::I2R, _, D::I) => NodeState::new(opinion, D::R),
            _ => return None,
        };
        Some(next)
    }
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Rate constants and influence coefficients.
///
/// In scenario files every field is optional. `beta_info` and `gamma_info`
/// set the pro and anti values together and may not be combined with the
/// individual fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct Params {
    pub beta_pro: f64,
    pub beta_anti: f64,
    pub gamma_pro: f64,
    pub gamma_anti: f64,
    /// Rate at which opinion-recovered nodes become uninformed again.
    pub tau: f64,
    pub beta_phy: f64,
    pub gamma_phy: f64,
    pub alpha_pro: f64,
    pub alpha_anti: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            beta_pro: 0.6,
            beta_anti: 0.6,
            gamma_pro: 1.0,
            gamma_anti: 1.0,
            tau: 0.0,
            beta_phy: 0.6,
            gamma_phy: 1.0,
            alpha_pro: 0.1,
            alpha_anti: 10.0,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    beta_pro: Option<f64>,
    beta_anti: Option<f64>,
    gamma_pro: Option<f64>,
    gamma_anti: Option<f64>,
    beta_info: Option<f64>,
    gamma_info: Option<f64>,
    tau: Option<f64>,
    beta_phy: Option<f64>,
    gamma_phy: Option<f64>,
    alpha_pro: Option<f64>,
    alpha_anti: Option<f64>,
}

impl TryFrom<RawParams> for Params {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let d = Params::default();
        let pair = |shared: Option<f64>, pro: Option<f64>, anti: Option<f64>, name: &str, dv: f64| {
            match (shared, pro, anti) {
                (Some(_), Some(_), _) | (Some(_), _, Some(_)) => Err(Error::config(format!(
                    "{name}_info cannot be combined with {name}_pro or {name}_anti"
                ))),
                (Some(v), None, None) => Ok((v, v)),
                (None, p, a) => Ok((p.unwrap_or(dv), a.unwrap_or(dv))),
            }
        };
        let (beta_pro, beta_anti) = pair(raw.beta_info, raw.beta_pro, raw.beta_anti, "beta", d.beta_pro)?;
        let (gamma_pro, gamma_anti) = pair(raw.gamma_info, raw.gamma_pro, raw.gamma_anti, "gamma", d.gamma_pro)?;
        let p = Params {
            beta_pro,
            beta_anti,
            gamma_pro,
            gamma_anti,
            tau: raw.tau.unwrap_or(d.tau),
            beta_phy: raw.beta_phy.unwrap_or(d.beta_phy),
            gamma_phy: raw.gamma_phy.unwrap_or(d.gamma_phy),
            alpha_pro: raw.alpha_pro.unwrap_or(d.alpha_pro),
            alpha_anti: raw.alpha_anti.unwrap_or(d.alpha_anti),
        };
        p.validate()?;
        Ok(p)
    }
}

impl Params {
    /// Names accepted by [`Params::set`].
    pub const FIELD_NAMES: [&'static str; 11] = [
        "beta_pro",
        "beta_anti",
        "gamma_pro",
        "gamma_anti",
        "beta_info",
        "gamma_info",
        "tau",
        "beta_phy",
        "gamma_phy",
        "alpha_pro",
        "alpha_anti",
    ];

    /// Sets the same transmission and recovery rates for both opinions.
    pub fn with_info(mut self, beta: f64, gamma: f64) -> Self {
        self.beta_pro = beta;
        self.beta_anti = beta;
        self.gamma_pro = gamma;
        self.gamma_anti = gamma;
        self
    }

    /// Copy with both influence coefficients set to 1.
    pub fn neutralized(mut self) -> Self {
        self.alpha_pro = 1.0;
        self.alpha_anti = 1.0;
        self
    }

    /// Sets a field by name; `beta_info`/`gamma_info` set both opinions.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "beta_pro" => self.beta_pro = value,
            "beta_anti" => self.beta_anti = value,
            "gamma_pro" => self.gamma_pro = value,
            "gamma_anti" => self.gamma_anti = value,
            "beta_info" => {
                self.beta_pro = value;
                self.beta_anti = value;
            }
            "gamma_info" => {
                self.gamma_pro = value;
                self.gamma_anti = value;
            }
            "tau" => self.tau = value,
            "beta_phy" => self.beta_phy = value,
            "gamma_phy" => self.gamma_phy = value,
            "alpha_pro" => self.alpha_pro = value,
            "alpha_anti" => self.alpha_anti = value,
            _ => return Err(Error::config(format!("unknown parameter {name:?}"))),
        }
        Ok(())
    }

    /// Rejects negative or non-finite values. Influence coefficients outside
    /// `alpha_pro <= 1 <= alpha_anti` only produce a warning.
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("beta_pro", self.beta_pro),
            ("beta_anti", self.beta_anti),
            ("gamma_pro", self.gamma_pro),
            ("gamma_anti", self.gamma_anti),
            ("tau", self.tau),
            ("beta_phy", self.beta_phy),
            ("gamma_phy", self.gamma_phy),
            ("alpha_pro", self.alpha_pro),
            ("alpha_anti", self.alpha_anti),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        if self.alpha_pro > 1.0 {
            log::warn!("alpha_pro = {} exceeds 1: the pro opinion increases susceptibility", self.alpha_pro);
        }
        if self.alpha_anti < 1.0 {
            log::warn!("alpha_anti = {} is below 1: the anti opinion reduces susceptibility", self.alpha_anti);
        }
        Ok(())
    }

    /// Factor applied to `beta_phy` for a susceptible node holding `op`.
    pub fn susceptibility_multiplier(&self, op: Opinion) -> f64 {
        match op {
            Opinion::U | Opinion::R => 1.0,
            Opinion::P => self.alpha_pro,
            Opinion::A => self.alpha_anti,
        }
    }
}

/// Fractions of nodes seeded infectious, anti and pro.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditions {
    #[serde(default)]
    pub i0: f64,
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub p0: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        InitialConditions { i0: 0.01, a0: 0.005, p0: 0.005 }
    }
}

impl InitialConditions {
    pub fn new(i0: f64, a0: f64, p0: f64) -> Result<Self> {
        let ic = InitialConditions { i0, a0, p0 };
        ic.validate()?;
        Ok(ic)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("i0", self.i0), ("a0", self.a0), ("p0", self.p0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.a0 + self.p0 > 1.0 + 1e-12 {
            return Err(Error::config(format!(
                "a0 + p0 = {} exceeds 1",
                self.a0 + self.p0
            )));
        }
        Ok(())
    }

    /// Opinion fractions `[U, P, A, R]` at time 0.
    pub fn opinion_fractions(&self) -> [f64; 4] {
        [1.0 - self.a0 - self.p0, self.p0, self.a0, 0.0]
    }

    /// Disease fractions `[S, I, R]` at time 0.
    pub fn disease_fractions(&self) -> [f64; 3] {
        [1.0 - self.i0, self.i0, 0.0]
    }
}

/// Counts of a node's neighbors that drive its transitions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NeighborCounts {
    /// Information-layer neighbors holding P.
    pub info_p: u32,
    /// Information-layer neighbors holding A.
    pub info_a: u32,
    /// Physical-layer neighbors that are infectious.
    pub phy_i: u32,
}

impl NeighborCounts {
    pub fn of(node: usize, net: &MultiplexNetwork, states: &[NodeState]) -> Self {
        let mut c = NeighborCounts::default();
        for &j in net.info().neighbors(node) {
            match states[j].opinion {
                Opinion::P => c.info_p += 1,
                Opinion::A => c.info_a += 1,
                _ => {}
            }
        }
        c.phy_i = net
            .phy()
            .neighbors(node)
            .iter()
            .filter(|&&j| states[j].disease == Disease::I)
            .count() as u32;
        c
    }
}

/// Every transition that can be defined for `state`, with its rate (possibly
/// zero). At most one opinion transition family and one disease transition
/// apply; opinion events come first.
pub fn transition_rates(
    state: NodeState,
    counts: NeighborCounts,
    params: &Params,
) -> impl Iterator<Item = (TransitionKind, f64)> {
    let mut out = [(TransitionKind::U2P, 0.0); 3];
    let mut n = match state.opinion {
        Opinion::U => {
            out[0] = (TransitionKind::U2P, params.beta_pro * counts.info_p as f64);
            out[1] = (TransitionKind::U2A, params.beta_anti * counts.info_a as f64);
            2
        }
        Opinion::P => {
            out[0] = (TransitionKind::P2R, params.gamma_pro);
            1
        }
        Opinion::A => {
            out[0] = (TransitionKind::A2R, params.gamma_anti);
            1
        }
        Opinion::R => {
            out[0] = (TransitionKind::R2U, params.tau);
            1
        }
    };
    match state.disease {
        Disease::S => {
            let rate = params.susceptibility_multiplier(state.opinion)
                * params.beta_phy
                * counts.phy_i as f64;
            out[n] = (TransitionKind::S2I, rate);
            n += 1;
        }
        Disease::I => {
            out[n] = (TransitionKind::I2R, params.gamma_phy);
            n += 1;
        }
        Disease::R => {}
    }
    out.into_iter().take(n)
}

/// Total event rate of a node.
pub fn total_rate(state: NodeState, counts: NeighborCounts, params: &Params) -> f64 {
    transition_rates(state, counts, params).map(|(_, r)| r).sum()
}

/// The transitions of `node` with positive rate.
pub fn enabled_transitions(
    node: usize,
    net: &MultiplexNetwork,
    states: &[NodeState],
    params: &Params,
) -> Vec<(TransitionKind, f64)> {
    let counts = NeighborCounts::of(node, net, states);
    transition_rates(states[node], counts, params)
        .filter(|&(_, r)| r > 0.0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params() -> Params {
        Params::default()
    }

    #[test]
    fn compartment_round_trip() {
        for c in 0..N_COMPARTMENTS {
            let s = NodeState::from_compartment(c);
            assert_eq!(s.compartment(), c);
            assert_eq!(s.to_string(), COMPARTMENT_NAMES[c]);
        }
    }

    #[test]
    fn multipliers() {
        let p = reference_params();
        assert_eq!(p.susceptibility_multiplier(Opinion::U), 1.0);
        assert_eq!(p.susceptibility_multiplier(Opinion::R), 1.0);
        assert_eq!(p.susceptibility_multiplier(Opinion::P), 0.1);
        assert_eq!(p.susceptibility_multiplier(Opinion::A), 10.0);
    }

    #[test]
    fn isolated_infectious_node_only_recovers() {
        let net = MultiplexNetwork::from_edges(1, &[], &[]).unwrap();
        let states = [NodeState::new(Opinion::U, Disease::I)];
        let t = enabled_transitions(0, &net, &states, &reference_params());
        assert_eq!(t, vec![(TransitionKind::I2R, 1.0)]);
    }

    #[test]
    fn rates_add_over_neighbors() {
        // node 0 has info neighbors 1, 2 (both P) and phy neighbor 3 (I)
        let net = MultiplexNetwork::from_edges(4, &[(0, 1), (0, 2)], &[(0, 3)]).unwrap();
        let states = [
            NodeState::new(Opinion::U, Disease::S),
            NodeState::new(Opinion::P, Disease::S),
            NodeState::new(Opinion::P, Disease::S),
            NodeState::new(Opinion::U, Disease::I),
        ];
        let p = reference_params();
        let t = enabled_transitions(0, &net, &states, &p);
        assert_eq!(t, vec![(TransitionKind::U2P, 2.0 * p.beta_pro), (TransitionKind::S2I, p.beta_phy)]);
    }

    #[test]
    fn anti_node_with_three_infectious_neighbors() {
        let net = MultiplexNetwork::from_edges(4, &[], &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let mut states = [NodeState::new(Opinion::U, Disease::I); 4];
        states[0] = NodeState::new(Opinion::A, Disease::S);
        let p = reference_params();
        let t = enabled_transitions(0, &net, &states, &p);
        let s2i = t.iter().find(|(k, _)| *k == TransitionKind::S2I).unwrap().1;
        assert!((s2i - 18.0).abs() < 1e-12);
    }

    #[test]
    fn no_r2u_without_tau() {
        let s = NodeState::new(Opinion::R, Disease::R);
        let p = reference_params();
        assert!(transition_rates(s, NeighborCounts::default(), &p).all(|(_, r)| r == 0.0));
        let p = Params { tau: 0.5, ..p };
        let t: Vec<_> = transition_rates(s, NeighborCounts::default(), &p).collect();
        assert_eq!(t, vec![(TransitionKind::R2U, 0.5)]);
    }

    #[test]
    fn transitions_apply_only_where_defined() {
        let us = NodeState::new(Opinion::U, Disease::S);
        assert_eq!(TransitionKind::U2P.apply(us), Some(NodeState::new(Opinion::P, Disease::S)));
        assert_eq!(TransitionKind::P2R.apply(us), None);
        assert_eq!(TransitionKind::I2R.apply(us), None);
        for k in TransitionKind::ALL {
            assert_eq!(TransitionKind::from_name(k.name()), Some(k));
        }
    }

    #[test]
    fn params_shorthand() {
        let p: Params = toml::from_str("beta_info = 2.0\ngamma_info = 0.2\ntau = 1.0").unwrap();
        assert_eq!((p.beta_pro, p.beta_anti, p.gamma_pro, p.gamma_anti, p.tau), (2.0, 2.0, 0.2, 0.2, 1.0));
        assert!(toml::from_str::<Params>("beta_info = 2.0\nbeta_pro = 1.0").is_err());
        assert!(toml::from_str::<Params>("beta_phy = -1.0").is_err());
        assert!(toml::from_str::<Params>("betaphy = 1.0").is_err());
        let round: Params = toml::from_str(&toml::to_string(&p).unwrap()).unwrap();
        assert_eq!(round, p);
    }

    #[test]
    fn initial_conditions_validation() {
        assert!(InitialConditions::new(0.01, 0.6, 0.5).is_err());
        assert!(InitialConditions::new(1.5, 0.0, 0.0).is_err());
        assert!(InitialConditions::new(1.0, 0.5, 0.5).is_ok());
    }
}
