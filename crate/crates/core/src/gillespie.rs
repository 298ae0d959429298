//! Exact event-driven simulation of the coupled dynamics.
//!
//! Every node carries its aggregated event rate in a binary sum tree, so an
//! event is selected in `O(log N)` and only the firing node and its
//! neighbors in the affected layer are updated.

use std::io::{self, Write};

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::contagion::{
    transition_rates, Disease, InitialConditions, NeighborCounts, NodeState, Opinion, Params,
    TransitionKind, COMPARTMENT_NAMES, N_COMPARTMENTS,
};
use crate::error::{Error, Result};
use crate::multiplex_net::MultiplexNetwork;

/// The per-run generator for run `stream` of an ensemble seeded with `seed`.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// When a run ends before `t_max`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Stop as soon as no node is infectious.
    #[default]
    DiseaseExtinction,
    /// Run until `t_max` or until no event is possible.
    Horizon,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimOptions {
    pub t_max: f64,
    pub sample_dt: f64,
    pub stop: StopRule,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { t_max: 200.0, sample_dt: 0.1, stop: StopRule::DiseaseExtinction }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub t: f64,
    pub node: u32,
    pub kind: TransitionKind,
}

/// Initial states plus every transition in firing order.
#[derive(Clone, Debug, PartialEq)]
pub struct EventLog {
    pub initial: Vec<NodeState>,
    pub events: Vec<Event>,
}

/// First infection of a node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfectionRecord {
    pub t: f64,
    /// Opinion held when the node became infectious.
    pub opinion: Opinion,
    /// Opinions adopted (P or A) up to and including that moment; initial
    /// opinions count as adoptions.
    pub adoptions: u32,
}

impl EventLog {
    pub fn n_nodes(&self) -> usize {
        self.initial.len()
    }

    /// Infection record per node; nodes infectious at time 0 are recorded
    /// with `t = 0` and their initial opinion.
    pub fn infection_records(&self) -> Vec<Option<InfectionRecord>> {
        let mut opinion: Vec<Opinion> = self.initial.iter().map(|s| s.opinion).collect();
        let mut adoptions: Vec<u32> = opinion
            .iter()
            .map(|o| matches!(o, Opinion::P | Opinion::A) as u32)
            .collect();
        let mut rec: Vec<Option<InfectionRecord>> = self
            .initial
            .iter()
            .enumerate()
            .map(|(i, s)| {
                (s.disease != Disease::S).then_some(InfectionRecord {
                    t: 0.0,
                    opinion: s.opinion,
                    adoptions: adoptions[i],
                })
            })
            .collect();
        for e in &self.events {
            let i = e.node as usize;
            match e.kind {
                TransitionKind::U2P => {
                    opinion[i] = Opinion::P;
                    adoptions[i] += 1;
                }
                TransitionKind::U2A => {
                    opinion[i] = Opinion::A;
                    adoptions[i] += 1;
                }
                TransitionKind::P2R | TransitionKind::A2R => opinion[i] = Opinion::R,
                TransitionKind::R2U => opinion[i] = Opinion::U,
                TransitionKind::S2I => {
                    if rec[i].is_none() {
                        rec[i] = Some(InfectionRecord { t: e.t, opinion: opinion[i], adoptions: adoptions[i] });
                    }
                }
                TransitionKind::I2R => {}
            }
        }
        rec
    }

    /// Per node, the set of opinions ever held: bit 0 for P, bit 1 for A.
    pub fn opinions_held(&self) -> Vec<u8> {
        let bit = |o: Opinion| match o {
            Opinion::P => 1u8,
            Opinion::A => 2u8,
            _ => 0,
        };
        let mut held: Vec<u8> = self.initial.iter().map(|s| bit(s.opinion)).collect();
        for e in &self.events {
            match e.kind {
                TransitionKind::U2P => held[e.node as usize] |= 1,
                TransitionKind::U2A => held[e.node as usize] |= 2,
                _ => {}
            }
        }
        held
    }

    /// Replays the log and returns the final node states.
    pub fn final_states(&self) -> Result<Vec<NodeState>> {
        let mut states = self.initial.clone();
        for e in &self.events {
            let s = &mut states[e.node as usize];
            *s = e.kind.apply(*s).ok_or_else(|| {
                Error::Internal(format!("event {} not applicable to node {} in state {s}", e.kind, e.node))
            })?;
        }
        Ok(states)
    }

    /// `t,node,kind` rows; times in shortest round-trip form.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,node,kind")?;
        for e in &self.events {
            writeln!(w, "{},{},{}", e.t, e.node, e.kind)?;
        }
        Ok(())
    }
}

/// Compartment counts on a regular time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub n_nodes: usize,
    pub times: Vec<f64>,
    pub counts: Vec<[u32; N_COMPARTMENTS]>,
    /// Counts when the run ended.
    pub final_counts: [u32; N_COMPARTMENTS],
    /// Time of the last event before the run ended.
    pub t_end: f64,
}

pub fn count_compartments(states: &[NodeState]) -> [u32; N_COMPARTMENTS] {
    let mut c = [0u32; N_COMPARTMENTS];
    for s in states {
        c[s.compartment()] += 1;
    }
    c
}

/// Sum of counts over compartments with the given disease state.
pub fn disease_total(counts: &[u32; N_COMPARTMENTS], d: Disease) -> u32 {
    (0..4).map(|o| counts[o * 3 + d.index()]).sum()
}

pub fn opinion_total(counts: &[u32; N_COMPARTMENTS], o: Opinion) -> u32 {
    (0..3).map(|d| counts[o.index() * 3 + d]).sum()
}

impl Trajectory {
    /// Infectious count at each sample.
    pub fn infectious(&self) -> Vec<u32> {
        self.counts.iter().map(|c| disease_total(c, Disease::I)).collect()
    }

    /// `(peak infectious fraction, time of the first maximum)` over the grid.
    pub fn peak(&self) -> (f64, f64) {
        let inf = self.infectious();
        let (mut best, mut at) = (0u32, 0.0);
        for (i, &v) in inf.iter().enumerate() {
            if v > best {
                best = v;
                at = self.times[i];
            }
        }
        (best as f64 / self.n_nodes as f64, at)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w)?;
        for (t, c) in self.times.iter().zip(&self.counts) {
            write!(w, "{}", fmt_time(*t))?;
            for v in c {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub(crate) fn write_header<W: Write>(w: &mut W) -> io::Result<()> {
    write!(w, "t")?;
    for name in COMPARTMENT_NAMES {
        write!(w, ",{name}")?;
    }
    writeln!(w)
}

/// Grid times printed without accumulated rounding noise.
pub fn fmt_time(t: f64) -> String {
    let s = format!("{t:.9}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// Mean compartment fractions over an ensemble of trajectories on the same
/// grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanTrajectory {
    pub times: Vec<f64>,
    pub fractions: Vec<[f64; N_COMPARTMENTS]>,
}

impl MeanTrajectory {
    pub fn from_runs(runs: &[Trajectory]) -> Result<Self> {
        let first = runs.first().ok_or_else(|| Error::config("empty ensemble"))?;
        let len = first.times.len();
        let mut sums = vec![[0.0f64; N_COMPARTMENTS]; len];
        for r in runs {
            if r.times.len() != len {
                return Err(Error::Internal("trajectories have different grids".into()));
            }
            let n = r.n_nodes as f64;
            for (acc, c) in sums.iter_mut().zip(&r.counts) {
                for k in 0..N_COMPARTMENTS {
                    acc[k] += c[k] as f64 / n;
                }
            }
        }
        let m = runs.len() as f64;
        for acc in sums.iter_mut() {
            for v in acc.iter_mut() {
                *v /= m;
            }
        }
        Ok(MeanTrajectory { times: first.times.clone(), fractions: sums })
    }

    pub fn infectious(&self) -> Vec<f64> {
        self.fractions.iter().map(|f| (0..4).map(|o| f[o * 3 + 1]).sum()).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write_header(&mut w)?;
        for (t, f) in self.times.iter().zip(&self.fractions) {
            write!(w, "{}", fmt_time(*t))?;
            for v in f {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Seeds `round(n i0)` infectious nodes, then independently `round(n a0)`
/// anti and `round(n p0)` pro nodes, each set drawn uniformly without
/// replacement.
pub fn initialize_states<R: Rng + ?Sized>(
    n: usize,
    init: &InitialConditions,
    rng: &mut R,
) -> Result<Vec<NodeState>> {
    init.validate()?;
    let n_i = (n as f64 * init.i0).round() as usize;
    let n_a = (n as f64 * init.a0).round() as usize;
    let n_p = (n as f64 * init.p0).round() as usize;
    if n_i > n || n_a + n_p > n {
        return Err(Error::config(format!(
            "cannot seed {n_i} infectious and {n_a} + {n_p} opinionated nodes among {n}"
        )));
    }
    let mut states = vec![NodeState::default(); n];
    for i in index::sample(rng, n, n_i) {
        states[i].disease = Disease::I;
    }
    for (rank, i) in index::sample(rng, n, n_a + n_p).into_iter().enumerate() {
        states[i].opinion = if rank < n_a { Opinion::A } else { Opinion::P };
    }
    Ok(states)
}

/// Binary sum tree over nonnegative leaf weights.
struct SumTree {
    size: usize,
    tree: Vec<f64>,
}

impl SumTree {
    fn new(weights: &[f64]) -> Self {
        let size = weights.len().next_power_of_two().max(1);
        let mut tree = vec![0.0; 2 * size];
        tree[size..size + weights.len()].copy_from_slice(weights);
        for i in (1..size).rev() {
            tree[i] = tree[2 * i] + tree[2 * i + 1];
        }
        SumTree { size, tree }
    }

    fn total(&self) -> f64 {
        self.tree[1]
    }

    fn get(&self, i: usize) -> f64 {
        self.tree[self.size + i]
    }

    fn set(&mut self, i: usize, w: f64) {
        let mut p = self.size + i;
        self.tree[p] = w;
        while p > 1 {
            p /= 2;
            self.tree[p] = self.tree[2 * p] + self.tree[2 * p + 1];
        }
    }

    /// Leaf whose cumulative interval contains `u` (with `0 <= u < total`),
    /// plus the offset of `u` inside that leaf.
    fn find(&self, mut u: f64) -> (usize, f64) {
        let mut p = 1;
        while p < self.size {
            let left = self.tree[2 * p];
            if u < left || self.tree[2 * p + 1] <= 0.0 {
                p *= 2;
            } else {
                u -= left;
                p = 2 * p + 1;
            }
        }
        (p - self.size, u)
    }
}

struct Engine<'a> {
    net: &'a MultiplexNetwork,
    params: &'a Params,
    states: Vec<NodeState>,
    counts: Vec<NeighborCounts>,
    rates: SumTree,
    compartments: [u32; N_COMPARTMENTS],
}

impl<'a> Engine<'a> {
    fn new(net: &'a MultiplexNetwork, params: &'a Params, states: Vec<NodeState>) -> Self {
        let counts: Vec<NeighborCounts> =
            (0..states.len()).map(|i| NeighborCounts::of(i, net, &states)).collect();
        let weights: Vec<f64> = states
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| node_rate(s, c, params))
            .collect();
        let compartments = count_compartments(&states);
        Engine { net, params, states, counts, rates: SumTree::new(&weights), compartments }
    }

    fn refresh(&mut self, i: usize) {
        self.rates.set(i, node_rate(self.states[i], self.counts[i], self.params));
    }

    /// Picks the transition at offset `u` inside node `i`'s total rate.
    fn pick(&self, i: usize, u: f64) -> TransitionKind {
        let mut chosen = None;
        let mut acc = 0.0;
        for (kind, rate) in transition_rates(self.states[i], self.counts[i], self.params) {
            if rate <= 0.0 {
                continue;
            }
            chosen = Some(kind);
            acc += rate;
            if u < acc {
                break;
            }
        }
        chosen.expect("selected node has a positive rate")
    }

    fn fire(&mut self, i: usize, kind: TransitionKind) {
        let old = self.states[i];
        let new = kind.apply(old).expect("picked transition is defined");
        self.states[i] = new;
        self.compartments[old.compartment()] -= 1;
        self.compartments[new.compartment()] += 1;
        self.refresh(i);
        if old.opinion != new.opinion {
            let (dp, da) = (
                (new.opinion == Opinion::P) as i32 - (old.opinion == Opinion::P) as i32,
                (new.opinion == Opinion::A) as i32 - (old.opinion == Opinion::A) as i32,
            );
            if dp != 0 || da != 0 {
                for &j in self.net.info().neighbors(i) {
                    let c = &mut self.counts[j];
                    c.info_p = (c.info_p as i32 + dp) as u32;
                    c.info_a = (c.info_a as i32 + da) as u32;
                    if self.states[j].opinion == Opinion::U {
                        self.refresh(j);
                    }
                }
            }
        } else {
            let di = (new.disease == Disease::I) as i32 - (old.disease == Disease::I) as i32;
            for &j in self.net.phy().neighbors(i) {
                let c = &mut self.counts[j];
                c.phy_i = (c.phy_i as i32 + di) as u32;
                if self.states[j].disease == Disease::S {
                    self.refresh(j);
                }
            }
        }
    }

    fn infectious(&self) -> u32 {
        disease_total(&self.compartments, Disease::I)
    }
}

fn node_rate(s: NodeState, c: NeighborCounts, p: &Params) -> f64 {
    transition_rates(s, c, p).map(|(_, r)| r).sum()
}

/// Runs one realization from `states` until `opts.t_max`, disease extinction
/// (under [`StopRule::DiseaseExtinction`]) or absorption.
///
/// Each event consumes two uniforms from `rng`: one for the exponential
/// waiting time and one for the event choice.
pub fn simulate<R: Rng + ?Sized>(
    net: &MultiplexNetwork,
    params: &Params,
    states: Vec<NodeState>,
    rng: &mut R,
    opts: &SimOptions,
) -> Result<(Trajectory, EventLog)> {
    if !(opts.t_max > 0.0 && opts.sample_dt > 0.0) {
        return Err(Error::config("t_max and sample_dt must be positive"));
    }
    if states.len() != net.n_nodes() {
        return Err(Error::config(format!(
            "{} initial states for a network of {} nodes",
            states.len(),
            net.n_nodes()
        )));
    }
    let n_samples = (opts.t_max / opts.sample_dt + 1e-9).floor() as usize + 1;
    let grid = |k: usize| k as f64 * opts.sample_dt;

    let log_initial = states.clone();
    let mut eng = Engine::new(net, params, states);
    let mut events = Vec::new();
    let mut times = Vec::with_capacity(n_samples);
    let mut samples = Vec::with_capacity(n_samples);
    let mut t = 0.0;

    loop {
        if opts.stop == StopRule::DiseaseExtinction && eng.infectious() == 0 {
            break;
        }
        let total = eng.rates.total();
        if total <= 0.0 {
            break;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        let t_next = t + wait;
        if t_next > opts.t_max {
            break;
        }
        while times.len() < n_samples && grid(times.len()) < t_next {
            times.push(grid(times.len()));
            samples.push(eng.compartments);
        }
        let u = rng.random::<f64>() * total;
        let (node, offset) = eng.rates.find(u);
        let offset = offset.min(eng.rates.get(node) * (1.0 - f64::EPSILON));
        let kind = eng.pick(node, offset);
        eng.fire(node, kind);
        t = t_next;
        events.push(Event { t, node: node as u32, kind });
    }
    while times.len() < n_samples {
        times.push(grid(times.len()));
        samples.push(eng.compartments);
    }

    let traj = Trajectory {
        n_nodes: net.n_nodes(),
        times,
        counts: samples,
        final_counts: eng.compartments,
        t_end: t,
    };
    Ok((traj, EventLog { initial: log_initial, events }))
}

/// Runs `n_runs` independent tasks in parallel; task `i` receives
/// `run_rng(seed, i)`. Results are returned in run order.
pub fn run_ensemble<T, F>(n_runs: usize, seed: u64, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = run_rng(seed, i as u64);
            task(i, &mut rng)
        })
        .collect()
}
