//! Outbreak statistics derived from trajectories and event logs.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::contagion::{Disease, Opinion, N_COMPARTMENTS};
use crate::gillespie::{disease_total, EventLog, Trajectory};
use crate::meanfield::{FullyMixedRun, PairRun};
use crate::multiplex_net::MultiplexNetwork;

/// Fraction of nodes ever infected given final counts: `(|I| + |R_phy|) / N`.
pub fn final_size_from_counts(counts: &[u32; N_COMPARTMENTS], n_nodes: usize) -> f64 {
    if n_nodes == 0 {
        return 0.0;
    }
    (disease_total(counts, Disease::I) + disease_total(counts, Disease::R)) as f64 / n_nodes as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutbreakSummary {
    pub final_epidemic_size: f64,
    pub peak_prevalence: f64,
    pub peak_time: f64,
    pub basic_size_reference: Option<f64>,
}

impl OutbreakSummary {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let (peak_prevalence, peak_time) = traj.peak();
        OutbreakSummary {
            final_epidemic_size: final_size_from_counts(&traj.final_counts, traj.n_nodes),
            peak_prevalence,
            peak_time,
            basic_size_reference: None,
        }
    }

    pub fn from_pair_run(run: &PairRun) -> Self {
        let (peak_prevalence, peak_time) = run.peak();
        OutbreakSummary { final_epidemic_size: run.final_size, peak_prevalence, peak_time, basic_size_reference: None }
    }

    pub fn from_fully_mixed(run: &FullyMixedRun) -> Self {
        let (mut peak_prevalence, mut peak_time) = (0.0, 0.0);
        for (t, s) in run.times.iter().zip(&run.states) {
            if s.i > peak_prevalence {
                peak_prevalence = s.i;
                peak_time = *t;
            }
        }
        OutbreakSummary { final_epidemic_size: run.final_size, peak_prevalence, peak_time, basic_size_reference: None }
    }

    pub fn with_basic_size(mut self, basic: f64) -> Self {
        self.basic_size_reference = Some(basic);
        self
    }
}

/// Ever-infected nodes grouped by the opinion they held when they became
/// infectious, in the order U, P, A, R.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OpinionDecomposition {
    pub n_infected: usize,
    pub fractions: [f64; 4],
    /// Shares per `(k_info, k_phy)` degree type; each opinion column sums to
    /// the corresponding entry of `fractions`.
    pub by_degree: BTreeMap<(usize, usize), [f64; 4]>,
}

impl OpinionDecomposition {
    /// No node was ever infected; all fractions are zero.
    pub fn is_empty(&self) -> bool {
        self.n_infected == 0
    }
}

/// Classifies every ever-infected node by its opinion at the moment of its
/// first infection; nodes infectious at time 0 use their initial opinion.
/// The degree-type refinement is filled when `net` is given.
pub fn opinion_at_infection_decomposition(log: &EventLog, net: Option<&MultiplexNetwork>) -> OpinionDecomposition {
    let records = log.infection_records();
    let mut counts = [0usize; 4];
    let mut by_degree: BTreeMap<(usize, usize), [usize; 4]> = BTreeMap::new();
    for (node, rec) in records.iter().enumerate() {
        let Some(rec) = rec else { continue };
        let o = rec.opinion.index();
        counts[o] += 1;
        if let Some(net) = net {
            let key = (net.info().degree(node), net.phy().degree(node));
            by_degree.entry(key).or_default()[o] += 1;
        }
    }
    let n_infected: usize = counts.iter().sum();
    if n_infected == 0 {
        return OpinionDecomposition::default();
    }
    let norm = |c: [usize; 4]| c.map(|v| v as f64 / n_infected as f64);
    OpinionDecomposition {
        n_infected,
        fractions: norm(counts),
        by_degree: by_degree.into_iter().map(|(k, c)| (k, norm(c))).collect(),
    }
}

/// Population fractions describing opinion histories.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OpinionHistoryStats {
    pub frac_at_least_one_opinion: f64,
    pub frac_both_opinions: f64,
    /// Infected while holding P during their second or later adoption.
    pub frac_repeat_pro: f64,
    /// Infected while holding A during their second or later adoption.
    pub frac_repeat_anti: f64,
}

pub fn opinion_history_stats(log: &EventLog) -> OpinionHistoryStats {
    let n = log.n_nodes();
    if n == 0 {
        return OpinionHistoryStats::default();
    }
    let held = log.opinions_held();
    let at_least_one = held.iter().filter(|&&h| h != 0).count();
    let both = held.iter().filter(|&&h| h == 3).count();
    let (mut rep_p, mut rep_a) = (0usize, 0usize);
    for rec in log.infection_records().into_iter().flatten() {
        if rec.adoptions >= 2 {
            match rec.opinion {
                Opinion::P => rep_p += 1,
                Opinion::A => rep_a += 1,
                _ => {}
            }
        }
    }
    let f = |c: usize| c as f64 / n as f64;
    OpinionHistoryStats {
        frac_at_least_one_opinion: f(at_least_one),
        frac_both_opinions: f(both),
        frac_repeat_pro: f(rep_p),
        frac_repeat_anti: f(rep_a),
    }
}

/// Sample mean and standard error of the mean; the error is 0 for fewer
/// than two values.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contagion::{NodeState, TransitionKind};
    use crate::gillespie::Event;

    fn st(o: Opinion, d: Disease) -> NodeState {
        NodeState::new(o, d)
    }

    fn ev(t: f64, node: u32, kind: TransitionKind) -> Event {
        Event { t, node, kind }
    }

    #[test]
    fn decomposition_by_opinion_at_infection() {
        let log = EventLog {
            initial: vec![st(Opinion::A, Disease::I), st(Opinion::U, Disease::S), st(Opinion::U, Disease::S), st(Opinion::U, Disease::S)],
            events: vec![
                ev(0.1, 1, TransitionKind::U2P),
                ev(0.2, 1, TransitionKind::S2I),
                ev(0.3, 2, TransitionKind::U2A),
                ev(0.4, 2, TransitionKind::A2R),
                ev(0.5, 2, TransitionKind::S2I),
                ev(0.6, 1, TransitionKind::P2R),
            ],
        };
        let d = opinion_at_infection_decomposition(&log, None);
        assert_eq!(d.n_infected, 3);
        let third = 1.0 / 3.0;
        assert_eq!(d.fractions, [0.0, third, third, third]);
        assert!((d.fractions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degree_refinement_sums_to_total() {
        let net = MultiplexNetwork::from_edges(3, &[(0, 1)], &[(0, 1), (1, 2)]).unwrap();
        let log = EventLog {
            initial: vec![st(Opinion::U, Disease::I), st(Opinion::P, Disease::S), st(Opinion::U, Disease::S)],
            events: vec![ev(1.0, 1, TransitionKind::S2I), ev(2.0, 2, TransitionKind::S2I)],
        };
        let d = opinion_at_infection_decomposition(&log, Some(&net));
        for o in 0..4 {
            let s: f64 = d.by_degree.values().map(|v| v[o]).sum();
            assert!((s - d.fractions[o]).abs() < 1e-15);
        }
        assert_eq!(d.by_degree.len(), 3);
    }

    #[test]
    fn empty_outbreak() {
        let log = EventLog { initial: vec![st(Opinion::U, Disease::S); 3], events: vec![] };
        assert!(opinion_at_infection_decomposition(&log, None).is_empty());
        assert_eq!(opinion_history_stats(&log), OpinionHistoryStats::default());
    }

    #[test]
    fn history_counts_repeats() {
        let log = EventLog {
            initial: vec![st(Opinion::P, Disease::S), st(Opinion::U, Disease::I)],
            events: vec![
                ev(0.1, 0, TransitionKind::P2R),
                ev(0.2, 0, TransitionKind::R2U),
                ev(0.3, 0, TransitionKind::U2A),
                ev(0.4, 0, TransitionKind::S2I),
            ],
        };
        let h = opinion_history_stats(&log);
        assert_eq!(h.frac_at_least_one_opinion, 0.5);
        assert_eq!(h.frac_both_opinions, 0.5);
        assert_eq!(h.frac_repeat_anti, 0.5);
        assert_eq!(h.frac_repeat_pro, 0.0);
    }

    #[test]
    fn final_size_counts() {
        let mut c = [0u32; N_COMPARTMENTS];
        c[1] = 2;
        c[11] = 3;
        c[0] = 5;
        assert_eq!(final_size_from_counts(&c, 10), 0.5);
        assert_eq!(mean_and_se(&[1.0, 3.0]), (2.0, 1.0));
    }
}
