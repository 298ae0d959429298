//! Exact transient solution of the full Markov chain on tiny networks.
//!
//! A global state lists every node's compartment and is encoded in base 12
//! with node 0 as the least significant digit.

use crate::contagion::{enabled_transitions, NodeState, Params, N_COMPARTMENTS};
use crate::error::{Error, Result};
use crate::multiplex_net::MultiplexNetwork;
use crate::ode::{integrate, never, OdeOptions};

pub const MAX_NODES: usize = 6;

pub fn n_states(n_nodes: usize) -> usize {
    N_COMPARTMENTS.pow(n_nodes as u32)
}

pub fn encode(states: &[NodeState]) -> usize {
    states.iter().rev().fold(0, |acc, s| acc * N_COMPARTMENTS + s.compartment())
}

pub fn decode(mut code: usize, n_nodes: usize) -> Vec<NodeState> {
    (0..n_nodes)
        .map(|_| {
            let c = code % N_COMPARTMENTS;
            code /= N_COMPARTMENTS;
            NodeState::from_compartment(c)
        })
        .collect()
}

/// Sparse generator: off-diagonal rates stored by row, diagonal as minus the
/// exit rate.
#[derive(Clone, Debug)]
pub struct Generator {
    n_nodes: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
}

impl Generator {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_states(&self) -> usize {
        self.exit.len()
    }

    /// Off-diagonal transitions out of `from` as `(to, rate)`.
    pub fn row(&self, from: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[from]..self.row_ptr[from + 1];
        self.cols[r.clone()].iter().map(|&c| c as usize).zip(self.rates[r].iter().copied())
    }

    /// Entry `Q[from][to]`.
    pub fn rate(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return -self.exit[from];
        }
        self.row(from).filter(|&(c, _)| c == to).map(|(_, r)| r).sum()
    }

    pub fn row_sum(&self, from: usize) -> f64 {
        self.row(from).map(|(_, r)| r).sum::<f64>() - self.exit[from]
    }

    /// `dp = p Q`.
    pub fn left_multiply(&self, p: &[f64], dp: &mut [f64]) {
        for (i, d) in dp.iter_mut().enumerate() {
            *d = -p[i] * self.exit[i];
        }
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                dp[self.cols[k] as usize] += pi * self.rates[k];
            }
        }
    }
}

/// Builds the generator over all `12^n` global states from the per-node
/// rate laws.
pub fn build_generator(net: &MultiplexNetwork, params: &Params) -> Result<Generator> {
    let n = net.n_nodes();
    if n > MAX_NODES {
        return Err(Error::Capacity(format!("{n} nodes exceed the limit of {MAX_NODES}")));
    }
    let total = n_states(n);
    let mut row_ptr = Vec::with_capacity(total + 1);
    let mut cols = Vec::new();
    let mut rates = Vec::new();
    let mut exit = Vec::with_capacity(total);
    row_ptr.push(0);
    let mut states = vec![NodeState::default(); n];
    for code in 0..total {
        states.copy_from_slice(&decode(code, n));
        let mut out = 0.0;
        for node in 0..n {
            for (kind, rate) in enabled_transitions(node, net, &states, params) {
                let next = kind.apply(states[node]).expect("enabled transition applies");
                let weight = N_COMPARTMENTS.pow(node as u32);
                let to = code - states[node].compartment() * weight + next.compartment() * weight;
                cols.push(to as u32);
                rates.push(rate);
                out += rate;
            }
        }
        exit.push(out);
        row_ptr.push(cols.len());
    }
    Ok(Generator { n_nodes: n, row_ptr, cols, rates, exit })
}

pub fn point_mass(generator: &Generator, states: &[NodeState]) -> Vec<f64> {
    let mut p = vec![0.0; generator.n_states()];
    p[encode(states)] = 1.0;
    p
}

/// State distributions at each of `times` (nondecreasing, starting at or
/// after 0) from the initial distribution `p0`.
pub fn transient_distributions(generator: &Generator, p0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    if p0.len() != generator.n_states() {
        return Err(Error::config("initial distribution has the wrong length"));
    }
    if (p0.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("initial distribution does not sum to 1"));
    }
    if times.iter().any(|&t| t < 0.0) {
        return Err(Error::config("times must be nonnegative"));
    }
    let mut grid = Vec::with_capacity(times.len() + 1);
    grid.push(0.0);
    grid.extend_from_slice(times);
    let opts = OdeOptions::with_tolerances(1e-10, 1e-12);
    let sol = integrate(|_, p, dp| generator.left_multiply(p, dp), &grid, p0, &opts, never)?;
    Ok(sol.states.into_iter().skip(1).collect())
}

pub fn transient_distribution(generator: &Generator, p0: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(transient_distributions(generator, p0, &[t])?.pop().expect("one time requested"))
}

/// Probability of each compartment for each node.
pub fn node_marginals(n_nodes: usize, p: &[f64]) -> Vec<[f64; N_COMPARTMENTS]> {
    let mut m = vec![[0.0; N_COMPARTMENTS]; n_nodes];
    for (code, &pc) in p.iter().enumerate() {
        if pc == 0.0 {
            continue;
        }
        let mut c = code;
        for row in m.iter_mut() {
            row[c % N_COMPARTMENTS] += pc;
            c /= N_COMPARTMENTS;
        }
    }
    m
}

/// Expected number of nodes in each compartment.
pub fn expected_counts(n_nodes: usize, p: &[f64]) -> [f64; N_COMPARTMENTS] {
    let mut e = [0.0; N_COMPARTMENTS];
    for row in node_marginals(n_nodes, p) {
        for k in 0..N_COMPARTMENTS {
            e[k] += row[k];
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::{Disease, Opinion};

    fn params(tau: f64) -> Params {
        Params { tau, ..Params::default() }
    }

    #[test]
    fn encoding_round_trip() {
        let s = vec![
            NodeState::new(Opinion::A, Disease::R),
            NodeState::new(Opinion::U, Disease::I),
            NodeState::new(Opinion::R, Disease::S),
        ];
        assert_eq!(decode(encode(&s), 3), s);
        assert_eq!(encode(&[NodeState::new(Opinion::U, Disease::I)]), 1);
    }

    #[test]
    fn isolated_node_arcs() {
        let net = MultiplexNetwork::from_edges(1, &[], &[]).unwrap();
        let g = build_generator(&net, &params(0.5)).unwrap();
        assert_eq!(g.n_states(), 12);
        let mut arcs = Vec::new();
        for from in 0..12 {
            for (to, r) in g.row(from) {
                arcs.push((NodeState::from_compartment(from).to_string(), NodeState::from_compartment(to).to_string(), r));
            }
        }
        // P->R, A->R, R->U for each disease state, plus I->R for each opinion
        assert_eq!(arcs.len(), 9 + 4);
        assert!(arcs.iter().all(|(f, t, _)| f != t));
        assert!(arcs.contains(&("RS".into(), "US".into(), 0.5)));
        assert!(arcs.contains(&("AI".into(), "AR".into(), 1.0)));
    }

    #[test]
    fn two_node_rows_by_hand() {
        let net = MultiplexNetwork::from_edges(2, &[], &[(0, 1)]).unwrap();
        let p = Params { beta_phy: 0.6, gamma_phy: 1.0, ..params(0.0) };
        let g = build_generator(&net, &p).unwrap();
        let ui = NodeState::new(Opinion::U, Disease::I);
        let us = NodeState::new(Opinion::U, Disease::S);
        let ur = NodeState::new(Opinion::U, Disease::R);
        let from = encode(&[ui, us]);
        assert_eq!(g.rate(from, encode(&[ui, ui])), 0.6);
        assert_eq!(g.rate(from, encode(&[ur, us])), 1.0);
        assert!((g.rate(from, from) + 1.6).abs() < 1e-15);
        let from_a = encode(&[ui, NodeState::new(Opinion::A, Disease::S)]);
        assert!((g.rate(from_a, encode(&[ui, NodeState::new(Opinion::A, Disease::I)])) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_zero() {
        let net = MultiplexNetwork::from_edges(3, &[(1, 0), (0, 2)], &[(0, 1), (1, 2)]).unwrap();
        let g = build_generator(&net, &params(1.0)).unwrap();
        for i in 0..g.n_states() {
            assert!(g.row_sum(i).abs() < 1e-12);
        }
    }

    #[test]
    fn capacity_limit() {
        let net = MultiplexNetwork::from_edges(7, &[], &[]).unwrap();
        assert!(matches!(build_generator(&net, &params(0.0)), Err(Error::Capacity(_))));
    }

    #[test]
    fn two_state_decay() {
        let net = MultiplexNetwork::from_edges(1, &[], &[]).unwrap();
        let g = build_generator(&net, &params(0.0)).unwrap();
        let p0 = point_mass(&g, &[NodeState::new(Opinion::U, Disease::I)]);
        assert_eq!(transient_distribution(&g, &p0, 0.0).unwrap(), p0);
        let p = transient_distribution(&g, &p0, 1.0).unwrap();
        let ur = encode(&[NodeState::new(Opinion::U, Disease::R)]);
        assert!((p[ur] - (1.0 - (-1.0f64).exp())).abs() < 1e-9);
    }
}
