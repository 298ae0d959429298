use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use coupled_contagion::gillespie::run_rng;
use coupled_contagion::harness::{run_scenario, sweep_grid, Scenario};

/// Opinion and disease spreading on two-layer multiplex networks.
#[derive(Parser)]
#[command(name = "mpxsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV outputs.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; defaults to the available cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the scenario ensemble size.
        #[arg(long)]
        ensemble: Option<usize>,
    },
    /// Parse and check a scenario without running it.
    Validate { config: PathBuf },
    /// Write the network used by run 0 of the first sweep point that uses
    /// the chosen network, as an edge list.
    ExportNetwork {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Network label; defaults to the first network.
        #[arg(long)]
        network: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &PathBuf) -> Result<(Scenario, String)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scenario = Scenario::from_toml_str(&text, &path.display().to_string())?;
    Ok((scenario, text))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed, threads, ensemble } => {
            let (mut scenario, text) = load(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            if let Some(n) = ensemble {
                scenario.ensemble_size = n;
            }
            if let Some(t) = threads {
                if t == 0 {
                    bail!("--threads must be at least 1");
                }
                rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
            }
            let report = run_scenario(&scenario, &text, &out)?;
            println!("{}", report.dir.display());
        }
        Command::Validate { config } => {
            let (scenario, _) = load(&config)?;
            let points = sweep_grid(&scenario)?;
            let models: Vec<&str> = scenario.models.iter().map(|m| m.name()).collect();
            println!(
                "{}: ok ({} sweep points, models: {}, ensemble size {})",
                scenario.name,
                points.len(),
                models.join(", "),
                scenario.ensemble_size
            );
        }
        Command::ExportNetwork { config, out, network, seed } => {
            let (mut scenario, _) = load(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let points = sweep_grid(&scenario)?;
            let point = points
                .iter()
                .find(|p| match (&network, &p.network) {
                    (Some(label), Some(n)) => &n.label == label,
                    (None, Some(_)) => true,
                    _ => false,
                })
                .with_context(|| match &network {
                    Some(label) => format!("no network labelled {label:?}"),
                    None => "scenario defines no networks".to_string(),
                })?;
            let spec = point.network.as_ref().expect("filtered above").spec()?;
            let net = spec.generate(scenario.n_nodes, &mut run_rng(point.seed, 0))?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            let mut w = BufWriter::new(File::create(&out).with_context(|| format!("creating {}", out.display()))?);
            net.write_edge_list(&mut w)?;
            w.flush()?;
            let meta = net.metadata();
            log::info!(
                "{} nodes, {} info edges, {} phy edges written to {}",
                meta.n_nodes,
                meta.info_edges,
                meta.phy_edges,
                out.display()
            );
        }
    }
    Ok(())
}
