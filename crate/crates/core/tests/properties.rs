use coupled_contagion::contagion::{InitialConditions, Params, N_COMPARTMENTS};
use coupled_contagion::gillespie::{count_compartments, initialize_states, run_rng, simulate, SimOptions, StopRule};
use coupled_contagion::meanfield::{run_fully_mixed, BetaHatScheme, PairApproximation};
use coupled_contagion::multiplex_net::{CouplingSpec, DegreeDistribution, LayerSpec, NetworkSpec};
use coupled_contagion::ode::OdeOptions;
use proptest::prelude::*;

fn params() -> impl Strategy<Value = Params> {
    (0.1f64..3.0, 0.1f64..3.0, 0.1f64..2.0, 0.1f64..2.0, 0.0f64..2.0, 0.1f64..2.0, 0.2f64..2.0, 0.0f64..1.0, 1.0f64..10.0)
        .prop_map(|(bp, ba, gp, ga, tau, b, g, alpha_pro, alpha_anti)| Params {
            beta_pro: bp,
            beta_anti: ba,
            gamma_pro: gp,
            gamma_anti: ga,
            tau,
            beta_phy: b,
            gamma_phy: g,
            alpha_pro,
            alpha_anti,
        })
}

fn initial() -> impl Strategy<Value = InitialConditions> {
    (0.01f64..0.2, 0.0f64..0.2, 0.0f64..0.2).prop_map(|(i, a, p)| InitialConditions::new(i, a, p).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_samples_conserve_nodes(p in params(), init in initial(), seed in any::<u64>(), k in 2usize..6) {
        let spec = NetworkSpec {
            info: LayerSpec::Configuration(DegreeDistribution::Poisson { mean: k as f64 }),
            phy: LayerSpec::Configuration(DegreeDistribution::Regular { k: 4 }),
            coupling: CouplingSpec::Uniform,
        };
        let n = 300;
        let mut rng = run_rng(seed, 0);
        let net = spec.generate(n, &mut rng).unwrap();
        let states = initialize_states(n, &init, &mut rng).unwrap();
        let opts = SimOptions { t_max: 20.0, sample_dt: 0.5, stop: StopRule::DiseaseExtinction };
        let (traj, log) = simulate(&net, &p, states, &mut rng, &opts).unwrap();
        for c in &traj.counts {
            prop_assert_eq!(c.iter().sum::<u32>() as usize, n);
        }
        let replayed = count_compartments(&log.final_states().unwrap());
        prop_assert_eq!(replayed, traj.final_counts);
        for w in log.events.windows(2) {
            prop_assert!(w[0].t <= w[1].t);
        }
    }

    #[test]
    fn pair_approximation_respects_bounds(p in params(), init in initial(), k1 in 2usize..5, k2 in 2usize..5, scheme in 0usize..3) {
        let spec = NetworkSpec {
            info: LayerSpec::Configuration(DegreeDistribution::TwoPoint { k_lo: 1, k_hi: k1 + 1, p_lo: 0.4 }),
            phy: LayerSpec::Configuration(DegreeDistribution::Regular { k: k2 }),
            coupling: CouplingSpec::Uniform,
        };
        let pa = PairApproximation::from_spec(&spec, p, BetaHatScheme::ALL[scheme]).unwrap();
        let r = pa.run(&init, 30.0, 0.5, &OdeOptions::default(), false).unwrap();
        prop_assert!(r.max_mass_error < 1e-6, "mass error {}", r.max_mass_error);
        prop_assert!(r.beta_hat.within(&p, 1e-9), "{:?}", r.beta_hat);
        prop_assert!((0.0..=1.0 + 1e-9).contains(&r.final_size));
    }

    #[test]
    fn fully_mixed_neutrality(
        b in 0.2f64..3.0,
        g in 0.2f64..2.0,
        bi in 0.1f64..3.0,
        gi in 0.1f64..3.0,
        alpha_pro in 0.0f64..1.0,
        o in 0.0f64..0.2,
    ) {
        let p = Params {
            beta_pro: bi, beta_anti: bi, gamma_pro: gi, gamma_anti: gi,
            beta_phy: b, gamma_phy: g, alpha_pro, alpha_anti: 2.0 - alpha_pro, tau: 0.0,
        };
        let init = InitialConditions::new(0.01, o, o).unwrap();
        let opts = OdeOptions::default();
        let with = run_fully_mixed(&p, &init, 400.0, 0.5, &opts).unwrap();
        let without = run_fully_mixed(&p.neutralized(), &init, 400.0, 0.5, &opts).unwrap();
        prop_assert!((with.final_size - without.final_size).abs() < 1e-8);
        for s in &with.states {
            let a = s.to_array();
            prop_assert!((a[..4].iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((a[4..].iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn compartment_counts_cover_all_states(seed in any::<u64>(), init in initial()) {
        let n = 500;
        let states = initialize_states(n, &init, &mut run_rng(seed, 0)).unwrap();
        let c = count_compartments(&states);
        prop_assert_eq!(c.len(), N_COMPARTMENTS);
        prop_assert_eq!(c.iter().sum::<u32>() as usize, n);
    }
}
