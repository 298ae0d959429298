//! Scenario execution and output files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::{
    final_size_from_counts, mean_and_se, opinion_at_infection_decomposition, OpinionDecomposition, opinion_history_stats,
    OpinionHistoryStats, OutbreakSummary,
};
use crate::contagion::{InitialConditions, Params};
use crate::error::Result;
use crate::gillespie::{fmt_time, initialize_states, run_ensemble, simulate, MeanTrajectory, SimOptions, Trajectory};
use crate::meanfield::{run_fully_mixed, BetaHatScheme, BetaHatStats, PairApproximation};
use crate::multiplex_net::NetworkSpec;
use crate::ode::OdeOptions;

use super::config::{ModelKind, Scenario, SweepPoint, sweep_grid};

/// Aggregate result of one model at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: usize,
    pub network: String,
    pub assignments: Vec<(String, f64)>,
    pub model: ModelKind,
    pub scheme: Option<BetaHatScheme>,
    pub n_runs: usize,
    pub final_size: f64,
    pub final_size_se: f64,
    pub peak_prevalence: f64,
    pub peak_time: f64,
    pub basic_size: Option<f64>,
    /// Mean opinion-at-infection fractions `[U, P, A, R]` over runs with
    /// at least one infection.
    pub decomposition: Option<[f64; 4]>,
    pub history: Option<OpinionHistoryStats>,
}

#[derive(Clone, Debug)]
pub struct ScenarioReport {
    pub dir: PathBuf,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    name: &'a str,
    config_sha256: String,
    seed: u64,
    ensemble_size: usize,
    crate_version: &'static str,
    scenario: &'a Scenario,
    points: Vec<PointMetadata>,
}

#[derive(Serialize)]
struct PointMetadata {
    index: usize,
    dir: String,
    network: String,
    assignments: Vec<(String, f64)>,
    seed: u64,
    params: Params,
    initial: InitialConditions,
    info_degrees: Option<Vec<usize>>,
    phy_degrees: Option<Vec<usize>>,
    models: Vec<ModelMetadata>,
}

#[derive(Serialize, Default)]
struct ModelMetadata {
    model: &'static str,
    scheme: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    erased_edges: Option<ErasedSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_clamp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_mass_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_hat: Option<BetaHatStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_final: Option<f64>,
}

#[derive(Serialize, Default)]
struct ErasedSummary {
    info_total: usize,
    info_max: usize,
    phy_total: usize,
    phy_max: usize,
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct SimRun {
    traj: Trajectory,
    final_size: f64,
    summary: OutbreakSummary,
    decomposition: Option<OpinionDecomposition>,
    history: OpinionHistoryStats,
    erased: (usize, usize),
}

fn simulate_point(
    s: &Scenario,
    spec: &NetworkSpec,
    params: &Params,
    initial: &InitialConditions,
    seed: u64,
    run_dir: Option<&Path>,
    detail: bool,
) -> Result<Vec<SimRun>> {
    let opts = SimOptions { t_max: s.t_max, sample_dt: s.sample_dt, stop: s.stop };
    run_ensemble(s.ensemble_size, seed, |i, rng| {
        let net = spec.generate(s.n_nodes, rng)?;
        let states = initialize_states(s.n_nodes, initial, rng)?;
        let (traj, log) = simulate(&net, params, states, rng, &opts)?;
        if let Some(dir) = run_dir {
            let d = dir.join(format!("run-{i:03}"));
            traj.write_csv(create(&d.join("trajectory.csv"))?)?;
            log.write_csv(create(&d.join("events.csv"))?)?;
        }
        let meta = net.metadata();
        let decomposition = (detail && s.decomposition)
            .then(|| opinion_at_infection_decomposition(&log, s.degree_decomposition.then_some(&net)));
        Ok(SimRun {
            final_size: final_size_from_counts(&traj.final_counts, traj.n_nodes),
            summary: OutbreakSummary::from_trajectory(&traj),
            history: if detail { opinion_history_stats(&log) } else { OpinionHistoryStats::default() },
            decomposition,
            erased: (meta.info_erased.total(), meta.phy_erased.total()),
            traj,
        })
    })
}

fn run_gillespie(
    s: &Scenario,
    point: &SweepPoint,
    spec: &NetworkSpec,
    dir: &Path,
    rows: &mut Vec<SweepRow>,
    meta: &mut Vec<ModelMetadata>,
) -> Result<()> {
    let run_dir = s.per_run_outputs.then_some(dir);
    let runs = simulate_point(s, spec, &point.params, &point.initial, point.seed, run_dir, true)?;
    let trajs: Vec<Trajectory> = runs.iter().map(|r| r.traj.clone()).collect();
    let mean = MeanTrajectory::from_runs(&trajs)?;
    drop(trajs);
    mean.write_csv(create(&dir.join("mean_trajectory.csv"))?)?;

    let mut w = create(&dir.join("summary.csv"))?;
    writeln!(
        w,
        "run,final_size,peak_prevalence,peak_time,frac_at_least_one_opinion,frac_both_opinions,frac_repeat_pro,frac_repeat_anti,info_erased_edges,phy_erased_edges"
    )?;
    for (i, r) in runs.iter().enumerate() {
        let h = r.history;
        writeln!(
            w,
            "{i},{},{},{},{},{},{},{},{},{}",
            r.summary.final_epidemic_size,
            r.summary.peak_prevalence,
            fmt_time(r.summary.peak_time),
            h.frac_at_least_one_opinion,
            h.frac_both_opinions,
            h.frac_repeat_pro,
            h.frac_repeat_anti,
            r.erased.0,
            r.erased.1
        )?;
    }
    w.flush()?;

    let decomposition = if s.decomposition {
        let nonempty: Vec<_> = runs.iter().filter_map(|r| r.decomposition.as_ref()).filter(|d| !d.is_empty()).collect();
        let m = nonempty.len().max(1) as f64;
        let mut total = [0.0; 4];
        let mut by_degree: BTreeMap<(usize, usize), [f64; 4]> = BTreeMap::new();
        for d in &nonempty {
            for o in 0..4 {
                total[o] += d.fractions[o] / m;
            }
            for (k, v) in &d.by_degree {
                let e = by_degree.entry(*k).or_default();
                for o in 0..4 {
                    e[o] += v[o] / m;
                }
            }
        }
        let mut w = create(&dir.join("decomposition.csv"))?;
        writeln!(w, "k_info,k_phy,U,P,A,R")?;
        writeln!(w, "all,all,{},{},{},{}", total[0], total[1], total[2], total[3])?;
        for ((ki, kp), v) in &by_degree {
            writeln!(w, "{ki},{kp},{},{},{},{}", v[0], v[1], v[2], v[3])?;
        }
        w.flush()?;
        (!nonempty.is_empty()).then_some(total)
    } else {
        None
    };

    let sizes: Vec<f64> = runs.iter().map(|r| r.final_size).collect();
    let (final_size, final_size_se) = mean_and_se(&sizes);
    let basic_size = if s.basic_size {
        let neutral = point.params.neutralized();
        let base = simulate_point(s, spec, &neutral, &point.initial, point.seed, None, false)?;
        Some(base.iter().map(|r| r.final_size).sum::<f64>() / base.len() as f64)
    } else {
        None
    };
    let inf = mean.infectious();
    let (mut peak, mut peak_t) = (0.0, 0.0);
    for (t, v) in mean.times.iter().zip(inf) {
        if v > peak {
            peak = v;
            peak_t = *t;
        }
    }
    let n = runs.len() as f64;
    let mut history = OpinionHistoryStats::default();
    for r in &runs {
        history.frac_at_least_one_opinion += r.history.frac_at_least_one_opinion / n;
        history.frac_both_opinions += r.history.frac_both_opinions / n;
        history.frac_repeat_pro += r.history.frac_repeat_pro / n;
        history.frac_repeat_anti += r.history.frac_repeat_anti / n;
    }
    rows.push(SweepRow {
        point: point.index,
        network: point.network_label().to_string(),
        assignments: point.assignments.clone(),
        model: ModelKind::Gillespie,
        scheme: None,
        n_runs: runs.len(),
        final_size,
        final_size_se,
        peak_prevalence: peak,
        peak_time: peak_t,
        basic_size,
        decomposition,
        history: Some(history),
    });
    let erased = runs.iter().fold(ErasedSummary::default(), |mut e, r| {
        e.info_total += r.erased.0;
        e.info_max = e.info_max.max(r.erased.0);
        e.phy_total += r.erased.1;
        e.phy_max = e.phy_max.max(r.erased.1);
        e
    });
    meta.push(ModelMetadata { model: "gillespie", erased_edges: Some(erased), ..Default::default() });
    Ok(())
}

fn run_pair(
    s: &Scenario,
    point: &SweepPoint,
    spec: &NetworkSpec,
    scheme: BetaHatScheme,
    dir: &Path,
    rows: &mut Vec<SweepRow>,
    meta: &mut Vec<ModelMetadata>,
) -> Result<()> {
    let opts = OdeOptions::default();
    let pa = PairApproximation::from_spec(spec, point.params, scheme)?;
    let run = pa.run(&point.initial, s.t_max, s.sample_dt, &opts, s.pa_full_state)?;
    run.write_csv(create(&dir.join("pa_trajectory.csv"))?)?;
    if s.pa_full_state {
        pa.write_full_state_csv(&run, create(&dir.join("pa_full_state.csv"))?)?;
    }
    let basic_size = if s.basic_size {
        let neutral = PairApproximation::from_spec(spec, point.params.neutralized(), scheme)?;
        Some(neutral.run(&point.initial, s.t_max, s.sample_dt, &opts, false)?.final_size)
    } else {
        None
    };
    let (peak, peak_t) = run.peak();
    rows.push(SweepRow {
        point: point.index,
        network: point.network_label().to_string(),
        assignments: point.assignments.clone(),
        model: ModelKind::PairApprox,
        scheme: Some(scheme),
        n_runs: 1,
        final_size: run.final_size,
        final_size_se: 0.0,
        peak_prevalence: peak,
        peak_time: peak_t,
        basic_size,
        decomposition: None,
        history: None,
    });
    meta.push(ModelMetadata {
        model: "pair_approx",
        scheme: Some(scheme.name()),
        max_clamp: Some(run.max_clamp),
        max_mass_error: Some(run.max_mass_error),
        beta_hat: Some(run.beta_hat),
        t_final: Some(run.t_final),
        ..Default::default()
    });
    Ok(())
}

fn run_mixed(
    s: &Scenario,
    point: &SweepPoint,
    dir: &Path,
    rows: &mut Vec<SweepRow>,
    meta: &mut Vec<ModelMetadata>,
) -> Result<()> {
    let opts = OdeOptions::default();
    let run = run_fully_mixed(&point.params, &point.initial, s.t_max, s.sample_dt, &opts)?;
    let mut w = create(&dir.join("fm_trajectory.csv"))?;
    writeln!(w, "t,U,P,A,R_info,S,I,R_phy")?;
    for (t, x) in run.times.iter().zip(&run.states) {
        writeln!(w, "{},{},{},{},{},{},{},{}", fmt_time(*t), x.u, x.p, x.a, x.r_info, x.s, x.i, x.r_phy)?;
    }
    w.flush()?;
    let basic_size = if s.basic_size {
        Some(run_fully_mixed(&point.params.neutralized(), &point.initial, s.t_max, s.sample_dt, &opts)?.final_size)
    } else {
        None
    };
    let summary = OutbreakSummary::from_fully_mixed(&run);
    rows.push(SweepRow {
        point: point.index,
        network: point.network_label().to_string(),
        assignments: point.assignments.clone(),
        model: ModelKind::FullyMixed,
        scheme: None,
        n_runs: 1,
        final_size: run.final_size,
        final_size_se: 0.0,
        peak_prevalence: summary.peak_prevalence,
        peak_time: summary.peak_time,
        basic_size,
        decomposition: None,
        history: None,
    });
    meta.push(ModelMetadata {
        model: "fully_mixed",
        max_clamp: Some(run.max_clamp),
        t_final: Some(run.t_final),
        ..Default::default()
    });
    Ok(())
}

fn write_sweep_csv(s: &Scenario, rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    write!(w, "point,network")?;
    for axis in &s.sweep {
        write!(w, ",{}", axis.param)?;
    }
    writeln!(
        w,
        ",model,scheme,n_runs,final_size,final_size_se,peak_prevalence,peak_time,basic_size,size_minus_basic,U,P,A,R,frac_at_least_one_opinion,frac_both_opinions,frac_repeat_pro,frac_repeat_anti"
    )?;
    for r in rows {
        write!(w, "{},{}", r.point, r.network)?;
        for (_, v) in &r.assignments {
            write!(w, ",{v}")?;
        }
        write!(
            w,
            ",{},{},{},{},{},{},{},{},{}",
            r.model.name(),
            r.scheme.map(|x| x.name()).unwrap_or(""),
            r.n_runs,
            r.final_size,
            r.final_size_se,
            r.peak_prevalence,
            fmt_time(r.peak_time),
            opt(r.basic_size),
            opt(r.basic_size.map(|b| r.final_size - b)),
        )?;
        match r.decomposition {
            Some(d) => write!(w, ",{},{},{},{}", d[0], d[1], d[2], d[3])?,
            None => write!(w, ",,,,")?,
        }
        match r.history {
            Some(h) => write!(
                w,
                ",{},{},{},{}",
                h.frac_at_least_one_opinion, h.frac_both_opinions, h.frac_repeat_pro, h.frac_repeat_anti
            )?,
            None => write!(w, ",,,,")?,
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every sweep point of `s` and writes its outputs under
/// `out/<name>/`. `config_text` is hashed into the metadata.
pub fn run_scenario(s: &Scenario, config_text: &str, out: &Path) -> Result<ScenarioReport> {
    s.validate()?;
    let root = out.join(&s.name);
    fs::create_dir_all(&root)?;
    let points = sweep_grid(s)?;
    let mut rows = Vec::new();
    let mut points_meta = Vec::with_capacity(points.len());
    for point in &points {
        log::info!("{}: point {} of {} ({})", s.name, point.index + 1, points.len(), point.network_label());
        let pdir = root.join(point.label());
        let spec = point.network.as_ref().map(|n| n.spec()).transpose()?;
        let mut models_meta = Vec::new();
        for model in &s.models {
            match model {
                ModelKind::Gillespie => {
                    let spec = spec.as_ref().expect("validated: network present");
                    run_gillespie(s, point, spec, &pdir.join("gillespie"), &mut rows, &mut models_meta)?;
                }
                ModelKind::PairApprox => {
                    let spec = spec.as_ref().expect("validated: network present");
                    for &scheme in &s.beta_hat {
                        let dir = pdir.join(format!("pair_approx-{}", scheme.name()));
                        run_pair(s, point, spec, scheme, &dir, &mut rows, &mut models_meta)?;
                    }
                }
                ModelKind::FullyMixed => run_mixed(s, point, &pdir.join("fully_mixed"), &mut rows, &mut models_meta)?,
            }
        }
        let (info_degrees, phy_degrees) = match &spec {
            Some(sp) => (Some(sp.info.degree_table()?.degrees), Some(sp.phy.degree_table()?.degrees)),
            None => (None, None),
        };
        points_meta.push(PointMetadata {
            index: point.index,
            dir: point.label(),
            network: point.network_label().to_string(),
            assignments: point.assignments.clone(),
            seed: point.seed,
            params: point.params,
            initial: point.initial,
            info_degrees,
            phy_degrees,
            models: models_meta,
        });
    }
    write_sweep_csv(s, &rows, &root.join("sweep.csv"))?;
    let meta = Metadata {
        name: &s.name,
        config_sha256: config_hash(config_text),
        seed: s.seed,
        ensemble_size: s.ensemble_size,
        crate_version: env!("CARGO_PKG_VERSION"),
        scenario: s,
        points: points_meta,
    };
    let mut w = create(&root.join("metadata.json"))?;
    serde_json::to_writer_pretty(&mut w, &meta).map_err(std::io::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(ScenarioReport { dir: root, rows })
}

/// Basic size of a scenario point: the mean final size of the same point
/// with both influence coefficients set to 1.
pub fn basic_size(s: &Scenario, point: &SweepPoint, model: ModelKind, scheme: BetaHatScheme) -> Result<f64> {
    let neutral = point.params.neutralized();
    match model {
        ModelKind::Gillespie => {
            let spec = point.network.as_ref().map(|n| n.spec()).transpose()?.ok_or_else(|| {
                crate::error::Error::config("simulation needs a network")
            })?;
            let runs = simulate_point(s, &spec, &neutral, &point.initial, point.seed, None, false)?;
            Ok(runs.iter().map(|r| r.final_size).sum::<f64>() / runs.len() as f64)
        }
        ModelKind::PairApprox => {
            let spec = point.network.as_ref().map(|n| n.spec()).transpose()?.ok_or_else(|| {
                crate::error::Error::config("pair approximation needs a network")
            })?;
            let pa = PairApproximation::from_spec(&spec, neutral, scheme)?;
            Ok(pa.run(&point.initial, s.t_max, s.sample_dt, &OdeOptions::default(), false)?.final_size)
        }
        ModelKind::FullyMixed => {
            Ok(run_fully_mixed(&neutral, &point.initial, s.t_max, s.sample_dt, &OdeOptions::default())?.final_size)
        }
    }
}
