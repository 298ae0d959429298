//! Scenario files and sweep expansion.

use std::path::Path;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::contagion::{InitialConditions, Params};
use crate::error::{Error, Result};
use crate::gillespie::{run_rng, StopRule};
use crate::meanfield::BetaHatScheme;
use crate::multiplex_net::{
    two_point_a_for_assortativity, two_point_a_for_inter_correlation, two_point_inter_matrix,
    two_point_mixing_matrix, CouplingSpec, DegreeDistribution, InterLayerCoupling, LayerSpec, MixingMatrix,
    NetworkSpec,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gillespie,
    PairApprox,
    FullyMixed,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gillespie => "gillespie",
            ModelKind::PairApprox => "pair_approx",
            ModelKind::FullyMixed => "fully_mixed",
        }
    }

    fn needs_network(self) -> bool {
        self != ModelKind::FullyMixed
    }
}

/// One layer as written in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerConfig {
    Regular {
        k: usize,
    },
    Poisson {
        mean: f64,
    },
    TruncatedPowerLaw {
        exponent: f64,
        cutoff_scale: f64,
        max_degree: usize,
    },
    /// With `assortativity` set, the layer is built from the two-point
    /// mixing matrix with that degree-degree correlation.
    TwoPoint {
        k_lo: usize,
        k_hi: usize,
        p_lo: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        assortativity: Option<f64>,
    },
    Explicit {
        table: Vec<(usize, f64)>,
    },
    MixingMatrix {
        degrees: Vec<usize>,
        entries: Vec<Vec<f64>>,
    },
}

impl LayerConfig {
    pub fn spec(&self) -> Result<LayerSpec> {
        Ok(match self {
            LayerConfig::Regular { k } => LayerSpec::Configuration(DegreeDistribution::Regular { k: *k }),
            LayerConfig::Poisson { mean } => LayerSpec::Configuration(DegreeDistribution::Poisson { mean: *mean }),
            LayerConfig::TruncatedPowerLaw { exponent, cutoff_scale, max_degree } => {
                LayerSpec::Configuration(DegreeDistribution::TruncatedPowerLaw {
                    exponent: *exponent,
                    cutoff_scale: *cutoff_scale,
                    max_degree: *max_degree,
                })
            }
            LayerConfig::TwoPoint { k_lo, k_hi, p_lo, assortativity: None } => {
                LayerSpec::Configuration(DegreeDistribution::TwoPoint { k_lo: *k_lo, k_hi: *k_hi, p_lo: *p_lo })
            }
            LayerConfig::TwoPoint { k_lo, k_hi, p_lo, assortativity: Some(r) } => {
                let a = two_point_a_for_assortativity(*k_lo, *k_hi, *p_lo, *r)?;
                LayerSpec::Correlated(two_point_mixing_matrix(*k_lo, *k_hi, *p_lo, a)?)
            }
            LayerConfig::Explicit { table } => {
                LayerSpec::Configuration(DegreeDistribution::Explicit { table: table.clone() })
            }
            LayerConfig::MixingMatrix { degrees, entries } => {
                LayerSpec::Correlated(MixingMatrix::new(degrees.clone(), entries.clone())?)
            }
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingConfig {
    #[default]
    Uniform,
    /// Pearson correlation of the two degrees for layers with two-point
    /// degree supports.
    TwoPoint { correlation: f64 },
    /// `C[k1][k2]` over the two layers' degree supports.
    Explicit { entries: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default = "default_label")]
    pub label: String,
    pub info: LayerConfig,
    pub phy: LayerConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
}

impl NetworkConfig {
    pub fn spec(&self) -> Result<NetworkSpec> {
        let info = self.info.spec()?;
        let phy = self.phy.spec()?;
        let coupling = match &self.coupling {
            CouplingConfig::Uniform => CouplingSpec::Uniform,
            CouplingConfig::TwoPoint { correlation } => {
                let ti = info.degree_table()?;
                let tp = phy.degree_table()?;
                if ti.len() != 2 || tp.len() != 2 {
                    return Err(Error::config(format!(
                        "network {:?}: two-point coupling needs two-point degree supports",
                        self.label
                    )));
                }
                let di = (ti.degrees[0], ti.degrees[1]);
                let dp = (tp.degrees[0], tp.degrees[1]);
                let a = two_point_a_for_inter_correlation(di, dp, ti.probs[0], tp.probs[0], *correlation)?;
                CouplingSpec::Joint(two_point_inter_matrix(di, dp, ti.probs[0], tp.probs[0], a)?)
            }
            CouplingConfig::Explicit { entries } => {
                let ti = info.degree_table()?;
                let tp = phy.degree_table()?;
                CouplingSpec::Joint(InterLayerCoupling::new(ti.degrees, tp.degrees, entries.clone())?)
            }
        };
        let spec = NetworkSpec { info, phy, coupling };
        spec.joint_degrees()?;
        Ok(spec)
    }
}

fn default_label() -> String {
    "net".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<f64>,
}

/// Names a sweep axis may refer to; `ap0` sets `a0` and `p0` together.
pub fn sweepable_names() -> Vec<&'static str> {
    let mut v = Params::FIELD_NAMES.to_vec();
    v.extend(["i0", "a0", "p0", "ap0"]);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub models: Vec<ModelKind>,
    #[serde(default = "default_schemes")]
    pub beta_hat: Vec<BetaHatScheme>,
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Simulation horizon, also the integration horizon of ODE models.
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    #[serde(default)]
    pub stop: StopRule,
    /// Also run every point with both influence coefficients set to 1.
    #[serde(default)]
    pub basic_size: bool,
    /// Write opinion-at-infection decompositions for simulations.
    #[serde(default)]
    pub decomposition: bool,
    /// Refine decompositions by `(k_info, k_phy)` degree type.
    #[serde(default)]
    pub degree_decomposition: bool,
    /// Write `trajectory.csv` and `events.csv` for every simulation run.
    #[serde(default)]
    pub per_run_outputs: bool,
    /// Write every pair-approximation slot.
    #[serde(default)]
    pub pa_full_state: bool,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub networks: Vec<NetworkConfig>,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

fn default_schemes() -> Vec<BetaHatScheme> {
    vec![BetaHatScheme::Neighborhood]
}
fn default_n_nodes() -> usize {
    10_000
}
fn default_ensemble() -> usize {
    1
}
fn default_t_max() -> f64 {
    200.0
}
fn default_sample_dt() -> f64 {
    0.1
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario =
            toml::from_str(text).map_err(|e| Error::Parse { path: origin.to_string(), message: e.to_string() })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return Err(Error::config(format!("scenario name {:?} is not a valid directory name", self.name)));
        }
        if self.models.is_empty() {
            return Err(Error::config("models must list at least one model"));
        }
        if self.models.contains(&ModelKind::PairApprox) && self.beta_hat.is_empty() {
            return Err(Error::config("beta_hat must list at least one scheme"));
        }
        if self.ensemble_size == 0 {
            return Err(Error::config("ensemble_size must be at least 1"));
        }
        if self.n_nodes == 0 {
            return Err(Error::config("n_nodes must be at least 1"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) || !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(Error::config("t_max and sample_dt must be positive"));
        }
        if self.models.iter().any(|m| m.needs_network()) && self.networks.is_empty() {
            return Err(Error::config("gillespie and pair_approx need at least one [[networks]] entry"));
        }
        if let Some(net) = self.networks.iter().find(|n| n.label.is_empty() || n.label.contains([',', '/', '\\', '"', '\n'])) {
            return Err(Error::config(format!("network label {:?} must be nonempty without commas, quotes or slashes", net.label)));
        }
        let mut labels: Vec<&str> = self.networks.iter().map(|n| n.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("network labels must be unique"));
        }
        for net in &self.networks {
            net.spec().map_err(|e| Error::config(format!("network {:?}: {e}", net.label)))?;
        }
        if self.sweep.len() > 2 {
            return Err(Error::config(format!("at most 2 sweep axes are supported, got {}", self.sweep.len())));
        }
        let names = sweepable_names();
        for axis in &self.sweep {
            if !names.contains(&axis.param.as_str()) {
                return Err(Error::config(format!(
                    "sweep axis {:?} is not a parameter; expected one of {}",
                    axis.param,
                    names.join(", ")
                )));
            }
            if axis.values.is_empty() {
                return Err(Error::config(format!("sweep axis {:?} has no values", axis.param)));
            }
        }
        if self.sweep.len() == 2 && self.sweep[0].param == self.sweep[1].param {
            return Err(Error::config("sweep axes must differ"));
        }
        self.params.validate()?;
        self.initial.validate()?;
        for point in sweep_grid(self)? {
            point.params.validate()?;
            point.initial.validate()?;
        }
        Ok(())
    }
}

/// A fully resolved sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    /// `None` when the scenario defines no networks.
    pub network: Option<NetworkConfig>,
    pub assignments: Vec<(String, f64)>,
    pub params: Params,
    pub initial: InitialConditions,
    pub seed: u64,
}

impl SweepPoint {
    pub fn label(&self) -> String {
        format!("p{:03}", self.index)
    }

    pub fn network_label(&self) -> &str {
        self.network.as_ref().map_or("none", |n| n.label.as_str())
    }
}

/// Seed of sweep point `index` under master seed `seed`.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    run_rng(seed ^ 0x5eed_0f5e_ed0f_u64, index as u64).next_u64()
}

/// Networks in file order, each crossed with the Cartesian product of the
/// sweep axes (first axis outermost).
pub fn sweep_grid(s: &Scenario) -> Result<Vec<SweepPoint>> {
    if s.sweep.len() > 2 {
        return Err(Error::config("at most 2 sweep axes are supported"));
    }
    let networks: Vec<Option<NetworkConfig>> =
        if s.networks.is_empty() { vec![None] } else { s.networks.iter().cloned().map(Some).collect() };
    let mut combos: Vec<Vec<(String, f64)>> = vec![vec![]];
    for axis in &s.sweep {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                axis.values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.push((axis.param.clone(), v));
                    c
                })
            })
            .collect();
    }
    let mut points = Vec::with_capacity(networks.len() * combos.len());
    for net in &networks {
        for combo in &combos {
            let index = points.len();
            let mut params = s.params;
            let mut initial = s.initial;
            for (name, v) in combo {
                match name.as_str() {
                    "i0" => initial.i0 = *v,
                    "a0" => initial.a0 = *v,
                    "p0" => initial.p0 = *v,
                    "ap0" => {
                        initial.a0 = *v;
                        initial.p0 = *v;
                    }
                    _ => params.set(name, *v)?,
                }
            }
            points.push(SweepPoint {
                index,
                network: net.clone(),
                assignments: combo.clone(),
                params,
                initial,
                seed: point_seed(s.seed, index),
            });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
models = ["pair_approx"]

[[networks]]
info = { kind = "regular", k = 5 }
phy = { kind = "regular", k = 5 }
"#;

    #[test]
    fn parses_defaults() {
        let s = Scenario::from_toml_str(BASE, "t.toml").unwrap();
        assert_eq!(s.beta_hat, vec![BetaHatScheme::Neighborhood]);
        assert_eq!(s.params, Params::default());
        assert_eq!(s.networks[0].label, "net");
        assert_eq!(sweep_grid(&s).unwrap().len(), 1);
    }

    #[test]
    fn two_axes_make_four_points() {
        let text = format!(
            "{BASE}\n[[sweep]]\nparam = \"gamma_info\"\nvalues = [0.5, 1.0]\n[[sweep]]\nparam = \"beta_info\"\nvalues = [0.5, 1.0]\n"
        );
        let s = Scenario::from_toml_str(&text, "t.toml").unwrap();
        let pts = sweep_grid(&s).unwrap();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[1].params.beta_anti, 1.0);
        assert_eq!(pts[2].params.gamma_pro, 1.0);
        let mut seeds: Vec<u64> = pts.iter().map(|p| p.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn unknown_fields_are_reported() {
        let err = Scenario::from_toml_str(&format!("{BASE}\nensemble = 3\n"), "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml") && msg.contains("ensemble"), "{msg}");
        let err = Scenario::from_toml_str(&BASE.replace("k = 5 }\nphy", "k = 5, q = 1 }\nphy"), "bad.toml").unwrap_err();
        assert!(err.to_string().contains('q'), "{err}");
    }

    #[test]
    fn rejects_bad_axes() {
        let text = format!("{BASE}\n[[sweep]]\nparam = \"gamma\"\nvalues = [1.0]\n");
        assert!(Scenario::from_toml_str(&text, "t").is_err());
        let three = format!(
            "{BASE}\n[[sweep]]\nparam = \"tau\"\nvalues = [1.0]\n[[sweep]]\nparam = \"i0\"\nvalues = [0.1]\n[[sweep]]\nparam = \"a0\"\nvalues = [0.1]\n"
        );
        assert!(Scenario::from_toml_str(&three, "t").is_err());
    }

    #[test]
    fn network_free_models() {
        let s = Scenario::from_toml_str("name = \"fm\"\nmodels = [\"fully_mixed\"]\n", "t").unwrap();
        let pts = sweep_grid(&s).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].network.is_none());
        assert!(Scenario::from_toml_str("name = \"g\"\nmodels = [\"gillespie\"]\n", "t").is_err());
    }

    #[test]
    fn correlated_networks() {
        let text = r#"
name = "c"
models = ["pair_approx"]
[[networks]]
label = "r"
info = { kind = "two_point", k_lo = 2, k_hi = 8, p_lo = 0.5, assortativity = -0.25 }
phy = { kind = "two_point", k_lo = 2, k_hi = 8, p_lo = 0.5, assortativity = 1.0 }
coupling = { kind = "two_point", correlation = 0.5 }
"#;
        let s = Scenario::from_toml_str(text, "t").unwrap();
        let spec = s.networks[0].spec().unwrap();
        let r = spec.info.mixing().unwrap().assortativity().unwrap();
        assert!((r + 0.25).abs() < 1e-12);
        let c = spec.joint_degrees().unwrap();
        assert!((c.pearson().unwrap() - 0.5).abs() < 1e-12);
    }
}
