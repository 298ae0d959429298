use coupled_contagion::analysis::{final_size_from_counts, mean_and_se};
use coupled_contagion::contagion::{
    Disease, InitialConditions, NodeState, Opinion, Params, TransitionKind, N_COMPARTMENTS,
};
use coupled_contagion::ctmc::{build_generator, node_marginals, point_mass, transient_distributions};
use coupled_contagion::gillespie::{initialize_states, run_ensemble, run_rng, simulate, SimOptions, StopRule};
use coupled_contagion::multiplex_net::{CouplingSpec, DegreeDistribution, LayerSpec, MultiplexNetwork, NetworkSpec};

fn st(o: Opinion, d: Disease) -> NodeState {
    NodeState::new(o, d)
}

#[test]
fn isolated_recovery_time_is_exponential() {
    let net = MultiplexNetwork::from_edges(1, &[], &[]).unwrap();
    let params = Params { gamma_phy: 2.0, ..Params::default() };
    let opts = SimOptions { t_max: 100.0, sample_dt: 1.0, stop: StopRule::DiseaseExtinction };
    let runs = 40_000;
    let mut rng = run_rng(1, 0);
    let (mut sum, mut survived) = (0.0, 0usize);
    for _ in 0..runs {
        let (traj, log) = simulate(&net, &params, vec![st(Opinion::U, Disease::I)], &mut rng, &opts).unwrap();
        assert_eq!(log.events.len(), 1);
        sum += traj.t_end;
        if traj.t_end > 0.5 {
            survived += 1;
        }
    }
    let mean = sum / runs as f64;
    // exponential with rate 2: sd 0.5
    assert!((mean - 0.5).abs() < 4.0 * 0.5 / (runs as f64).sqrt(), "mean {mean}");
    let p = (-1.0f64).exp();
    let freq = survived as f64 / runs as f64;
    assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / runs as f64).sqrt(), "survival {freq}");
}

#[test]
fn infection_recovery_race() {
    let net = MultiplexNetwork::from_edges(2, &[], &[(0, 1)]).unwrap();
    let params = Params::default();
    let opts = SimOptions { t_max: 100.0, sample_dt: 1.0, stop: StopRule::DiseaseExtinction };
    let runs = 40_000;
    let mut rng = run_rng(2, 0);
    let mut infected = 0;
    for _ in 0..runs {
        let init = vec![st(Opinion::U, Disease::I), st(Opinion::U, Disease::S)];
        let (_, log) = simulate(&net, &params, init, &mut rng, &opts).unwrap();
        if log.events.iter().any(|e| e.node == 1 && e.kind == TransitionKind::S2I) {
            infected += 1;
        }
    }
    let p = 0.6 / 1.6;
    let freq = infected as f64 / runs as f64;
    assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / runs as f64).sqrt(), "freq {freq}");
}

#[test]
fn per_node_marginals_match_ctmc() {
    // star in the physical layer, path in the information layer
    let net = MultiplexNetwork::from_edges(4, &[(0, 1), (1, 2), (2, 3)], &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let params = Params { tau: 0.7, ..Params::default() };
    let init = vec![
        st(Opinion::U, Disease::I),
        st(Opinion::A, Disease::S),
        st(Opinion::P, Disease::S),
        st(Opinion::U, Disease::S),
    ];
    let generator = build_generator(&net, &params).unwrap();
    let times = [1.0, 3.0];
    let exact = transient_distributions(&generator, &point_mass(&generator, &init), &times).unwrap();

    let runs = 40_000;
    let opts = SimOptions { t_max: 3.0, sample_dt: 1.0, stop: StopRule::Horizon };
    let mut counts = vec![[[0usize; N_COMPARTMENTS]; 4]; times.len()];
    let mut rng = run_rng(3, 0);
    for _ in 0..runs {
        let (_, log) = simulate(&net, &params, init.clone(), &mut rng, &opts).unwrap();
        let mut states = log.initial.clone();
        let mut events = log.events.iter().peekable();
        for (ti, &t) in times.iter().enumerate() {
            while let Some(e) = events.next_if(|e| e.t <= t) {
                let node = e.node as usize;
                states[node] = e.kind.apply(states[node]).unwrap();
            }
            for (node, s) in states.iter().enumerate() {
                counts[ti][node][s.compartment()] += 1;
            }
        }
    }
    for (ti, p) in exact.iter().enumerate() {
        let marg = node_marginals(4, p);
        for node in 0..4 {
            for c in 0..N_COMPARTMENTS {
                let q = marg[node][c];
                let freq = counts[ti][node][c] as f64 / runs as f64;
                let sd = (q * (1.0 - q) / runs as f64).sqrt();
                assert!(
                    (freq - q).abs() <= 4.5 * sd + 1e-12,
                    "t={} node {node} compartment {c}: {freq} vs {q}",
                    times[ti]
                );
            }
        }
    }
}

#[test]
fn basic_size_ignores_opinion_parameters() {
    let layer = LayerSpec::Configuration(DegreeDistribution::Poisson { mean: 4.0 });
    let spec = NetworkSpec { info: layer.clone(), phy: layer, coupling: CouplingSpec::Uniform };
    let n = 1000;
    let init = InitialConditions::default();
    let opts = SimOptions { t_max: 200.0, sample_dt: 1.0, stop: StopRule::DiseaseExtinction };
    let sizes = |params: Params, seed: u64| {
        let v = run_ensemble(300, seed, |_, rng| {
            let net = spec.generate(n, rng)?;
            let states = initialize_states(n, &init, rng)?;
            let (traj, _) = simulate(&net, &params, states, rng, &opts)?;
            Ok(final_size_from_counts(&traj.final_counts, n))
        })
        .unwrap();
        mean_and_se(&v)
    };
    let neutral = Params::default().neutralized();
    let (m0, se0) = sizes(neutral, 21);
    for (k, p) in [neutral.with_info(2.0, 0.2), Params { tau: 1.5, ..neutral.with_info(0.3, 2.0) }].into_iter().enumerate() {
        let (m, se) = sizes(p, 22 + k as u64);
        assert!((m - m0).abs() < 4.0 * (se * se + se0 * se0).sqrt(), "{m} vs {m0}");
    }
}
