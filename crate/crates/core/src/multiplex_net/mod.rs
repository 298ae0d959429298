//! Two-layer multiplex networks: generation, coupling and measurement.
//!
//! Random draws for one network happen in a fixed order: the information
//! layer, then the physical layer, then the inter-layer pairing. A layer whose
//! degrees are drawn conditionally on the other layer is drawn second.

pub mod degree;
pub mod layer;
pub mod mixing;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

pub use degree::{sample_degree_sequence, DegreeDistribution, DegreeTable};
pub use layer::{
    apportion, build_configuration_layer, build_correlated_layer, ErasedEdges, Layer,
};
pub use mixing::{
    two_point_a_for_assortativity, two_point_a_for_inter_correlation, two_point_assortativity,
    two_point_inter_matrix, two_point_mixing_matrix, InterLayerCoupling, MixingMatrix,
};

use crate::error::{Error, Result};

/// Two layers over a shared node set: node `i` is the same individual in both.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplexNetwork {
    info: Layer,
    phy: Layer,
}

impl MultiplexNetwork {
    pub fn new(info: Layer, phy: Layer) -> Result<Self> {
        if info.n_nodes() != phy.n_nodes() {
            return Err(Error::config(format!(
                "layers have different sizes: {} vs {}",
                info.n_nodes(),
                phy.n_nodes()
            )));
        }
        Ok(MultiplexNetwork { info, phy })
    }

    /// Convenience constructor from explicit edge lists.
    pub fn from_edges(
        n: usize,
        info_edges: &[(usize, usize)],
        phy_edges: &[(usize, usize)],
    ) -> Result<Self> {
        Self::new(Layer::from_edges(n, info_edges)?, Layer::from_edges(n, phy_edges)?)
    }

    pub fn n_nodes(&self) -> usize {
        self.info.n_nodes()
    }

    pub fn info(&self) -> &Layer {
        &self.info
    }

    pub fn phy(&self) -> &Layer {
        &self.phy
    }

    pub fn metadata(&self) -> NetworkMetadata {
        NetworkMetadata {
            n_nodes: self.n_nodes(),
            info_edges: self.info.edge_count(),
            phy_edges: self.phy.edge_count(),
            info_erased: self.info.erased(),
            phy_erased: self.phy.erased(),
        }
    }

    /// Writes `nodes <N>` followed by one `<layer> <i> <j>` line per edge.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "nodes {}", self.n_nodes())?;
        for (i, j) in self.info.edges() {
            writeln!(out, "info {i} {j}")?;
        }
        for (i, j) in self.phy.edges() {
            writeln!(out, "phy {i} {j}")?;
        }
        Ok(())
    }

    pub fn read_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |line: &str| Error::config(format!("malformed edge-list line: {line:?}"));
        let header = lines.next().ok_or_else(|| Error::config("empty edge list"))?;
        let n: usize = header
            .strip_prefix("nodes ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad(header))?;
        let (mut info, mut phy) = (Vec::new(), Vec::new());
        for line in lines {
            let mut parts = line.split_whitespace();
            let layer = parts.next().ok_or_else(|| bad(line))?;
            let i: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
            let j: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))?;
            match layer {
                "info" => info.push((i, j)),
                "phy" => phy.push((i, j)),
                _ => return Err(bad(line)),
            }
        }
        Self::from_edges(n, &info, &phy)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkMetadata {
    pub n_nodes: usize,
    pub info_edges: usize,
    pub phy_edges: usize,
    pub info_erased: ErasedEdges,
    pub phy_erased: ErasedEdges,
}

/// How one layer is generated.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    /// Configuration model on an i.i.d. degree sequence.
    Configuration(DegreeDistribution),
    /// Degree-correlated layer from a mixing matrix.
    Correlated(MixingMatrix),
}

impl LayerSpec {
    pub fn degree_table(&self) -> Result<DegreeTable> {
        match self {
            LayerSpec::Configuration(d) => d.table(),
            LayerSpec::Correlated(e) => Ok(e.degree_table()),
        }
    }

    pub fn mixing(&self) -> Result<MixingMatrix> {
        match self {
            LayerSpec::Configuration(d) => Ok(MixingMatrix::uncorrelated(&d.table()?)),
            LayerSpec::Correlated(e) => Ok(e.clone()),
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Layer> {
        match self {
            LayerSpec::Configuration(d) => layer::build_configuration_layer_from(d, n, rng),
            LayerSpec::Correlated(e) => build_correlated_layer(e, n, rng),
        }
    }
}

/// How the two layers' node sets are paired.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingSpec {
    Uniform,
    Joint(InterLayerCoupling),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub info: LayerSpec,
    pub phy: LayerSpec,
    pub coupling: CouplingSpec,
}

impl NetworkSpec {
    /// Joint degree-type distribution implied by the spec, with marginals
    /// checked against the layer degree laws.
    pub fn joint_degrees(&self) -> Result<InterLayerCoupling> {
        let info = self.info.degree_table()?;
        let phy = self.phy.degree_table()?;
        match &self.coupling {
            CouplingSpec::Uniform => Ok(InterLayerCoupling::independent(&info, &phy)),
            CouplingSpec::Joint(c) => {
                c.check_marginals(&info, &phy, 1e-9)?;
                Ok(c.clone())
            }
        }
    }

    /// With a joint coupling, a configuration-model layer gets its degrees
    /// from the other layer's realized classes: each class is split over
    /// the partner degrees in proportion to its row (or column) of `C`. The
    /// physical layer is the dependent one when both are configuration
    /// models.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<MultiplexNetwork> {
        let c = match &self.coupling {
            CouplingSpec::Uniform => {
                let info = self.info.generate(n, rng)?;
                let phy = self.phy.generate(n, rng)?;
                return couple_layers(info, phy, None, rng);
            }
            CouplingSpec::Joint(c) => c,
        };
        match (&self.info, &self.phy) {
            (_, LayerSpec::Configuration(_)) => {
                let info = self.info.generate(n, rng)?;
                let rows = class_indices(info.target_degrees(), c.info_degrees(), "info")?;
                let seq = conditional_degrees(&rows, c.phy_degrees(), |i, j| c.entries()[i][j], rng)?;
                let phy = build_configuration_layer(&seq, rng)?;
                MultiplexNetwork::new(info, phy)
            }
            (LayerSpec::Configuration(_), _) => {
                let phy = self.phy.generate(n, rng)?;
                let cols = class_indices(phy.target_degrees(), c.phy_degrees(), "phy")?;
                let seq = conditional_degrees(&cols, c.info_degrees(), |j, i| c.entries()[i][j], rng)?;
                let info = build_configuration_layer(&seq, rng)?;
                MultiplexNetwork::new(info, phy)
            }
            _ => {
                let info = self.info.generate(n, rng)?;
                let phy = self.phy.generate(n, rng)?;
                couple_layers(info, phy, Some(c), rng)
            }
        }
    }
}

/// Pairs the nodes of the two layers. With `coupling = None` the pairing is a
/// uniformly random bijection; otherwise `N C[k1][k2]` (rounded so that the
/// layers' class sizes are matched exactly) degree-`k1` information nodes are
/// paired uniformly at random with degree-`k2` physical nodes. Degree classes
/// are the generator's target degrees. The result keeps information-layer
/// node ids.
pub fn couple_layers<R: Rng + ?Sized>(
    info: Layer,
    phy: Layer,
    coupling: Option<&InterLayerCoupling>,
    rng: &mut R,
) -> Result<MultiplexNetwork> {
    let n = info.n_nodes();
    if phy.n_nodes() != n {
        return Err(Error::config("layers have different sizes"));
    }
    let mut perm = vec![0usize; n];
    match coupling {
        None => {
            let mut ids: Vec<usize> = (0..n).collect();
            ids.shuffle(rng);
            for (phy_node, &info_node) in ids.iter().enumerate() {
                perm[phy_node] = info_node;
            }
        }
        Some(c) => {
            let info_classes = class_members(info.target_degrees(), c.info_degrees(), "info")?;
            let phy_classes = class_members(phy.target_degrees(), c.phy_degrees(), "phy")?;
            let row_sizes: Vec<usize> = info_classes.iter().map(Vec::len).collect();
            let col_sizes: Vec<usize> = phy_classes.iter().map(Vec::len).collect();
            let counts = joint_counts(c, &row_sizes, &col_sizes)?;
            let mut info_pool = info_classes;
            let mut phy_pool = phy_classes;
            for pool in info_pool.iter_mut().chain(phy_pool.iter_mut()) {
                pool.shuffle(rng);
            }
            for (i, row) in counts.iter().enumerate() {
                for (j, &count) in row.iter().enumerate() {
                    for _ in 0..count {
                        let a = info_pool[i].pop().expect("row sizes match");
                        let b = phy_pool[j].pop().expect("column sizes match");
                        perm[b] = a;
                    }
                }
            }
        }
    }
    let phy = phy.relabel(&perm);
    MultiplexNetwork::new(info, phy)
}

fn class_indices(target: &[usize], support: &[usize], layer: &str) -> Result<Vec<usize>> {
    target
        .iter()
        .map(|&k| {
            support.binary_search(&k).map_err(|_| {
                Error::config(format!(
                    "{layer} layer has a degree-{k} node but the coupling has no degree-{k} class"
                ))
            })
        })
        .collect()
}

/// Assigns degrees over `support` class by class: the members of class `c`
/// get degree `support[j]` in numbers apportioned from `weight(c, j)`, in
/// random order. An odd stub total is fixed by redrawing one node whose
/// class allows the other parity.
fn conditional_degrees<R: Rng + ?Sized>(
    classes: &[usize],
    support: &[usize],
    weight: impl Fn(usize, usize) -> f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let n_classes = classes.iter().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); n_classes];
    for (v, &c) in classes.iter().enumerate() {
        members[c].push(v);
    }
    let mut seq = vec![0usize; classes.len()];
    for (c, nodes) in members.iter().enumerate() {
        if nodes.is_empty() {
            continue;
        }
        let w: Vec<f64> = (0..support.len()).map(|j| weight(c, j)).collect();
        if !(w.iter().sum::<f64>() > 0.0) {
            return Err(Error::config("coupling gives zero mass to a realized degree class"));
        }
        let mut degrees: Vec<usize> = apportion(&w, nodes.len())
            .into_iter()
            .enumerate()
            .flat_map(|(j, count)| std::iter::repeat_n(support[j], count))
            .collect();
        degrees.shuffle(rng);
        for (&v, k) in nodes.iter().zip(degrees) {
            seq[v] = k;
        }
    }
    if seq.iter().sum::<usize>() % 2 == 1 {
        let flippable =
            |c: usize, k: usize| (0..support.len()).any(|j| weight(c, j) > 0.0 && (support[j] + k) % 2 == 1);
        let mut order: Vec<usize> = (0..seq.len()).collect();
        order.shuffle(rng);
        let v = order
            .into_iter()
            .find(|&v| flippable(classes[v], seq[v]))
            .ok_or_else(|| Error::config("cannot draw an even stub total under the coupling"))?;
        let c = classes[v];
        let options: Vec<usize> = (0..support.len())
            .filter(|&j| weight(c, j) > 0.0 && (support[j] + seq[v]) % 2 == 1)
            .collect();
        let w: Vec<f64> = options.iter().map(|&j| weight(c, j)).collect();
        let pick = WeightedIndex::new(&w).map_err(|e| Error::Internal(e.to_string()))?.sample(rng);
        seq[v] = support[options[pick]];
    }
    Ok(seq)
}

fn class_members(target: &[usize], support: &[usize], layer: &str) -> Result<Vec<Vec<usize>>> {
    let mut members = vec![Vec::new(); support.len()];
    for (v, &k) in target.iter().enumerate() {
        let idx = support.binary_search(&k).map_err(|_| {
            Error::config(format!(
                "{layer} layer has a degree-{k} node but the coupling has no degree-{k} class"
            ))
        })?;
        members[idx].push(v);
    }
    Ok(members)
}

/// Integer joint counts close to `N C` with row sums `rows` and column sums
/// `cols` exactly. Cells where `C` vanishes stay empty; if the class sizes
/// cannot be matched on the support of `C` the remaining deficits are
/// reported.
fn joint_counts(c: &InterLayerCoupling, rows: &[usize], cols: &[usize]) -> Result<Vec<Vec<usize>>> {
    let n: usize = rows.iter().sum();
    if cols.iter().sum::<usize>() != n {
        return Err(Error::Internal("layer class sizes have different totals".into()));
    }
    let (nr, nc) = (rows.len(), cols.len());
    let allowed = |i: usize, j: usize| c.entries()[i][j] > 0.0;
    let flat: Vec<f64> = c.entries().iter().flatten().map(|v| v * n as f64).collect();
    let rounded = apportion(&flat, n);
    let mut m: Vec<Vec<i64>> = rounded.chunks(nc).map(|r| r.iter().map(|&v| v as i64).collect()).collect();
    let mut dr: Vec<i64> = (0..nr).map(|i| rows[i] as i64 - m[i].iter().sum::<i64>()).collect();
    let mut dc: Vec<i64> = (0..nc)
        .map(|j| cols[j] as i64 - (0..nr).map(|i| m[i][j]).sum::<i64>())
        .collect();
    let cells = |nr: usize, nc: usize| (0..nr).flat_map(move |i| (0..nc).map(move |j| (i, j)));
    while dr.iter().chain(&dc).any(|&d| d != 0) {
        // add where both margins are short
        if let Some((i, j)) = cells(nr, nc).find(|&(i, j)| dr[i] > 0 && dc[j] > 0 && allowed(i, j)) {
            m[i][j] += 1;
            dr[i] -= 1;
            dc[j] -= 1;
            continue;
        }
        // remove where both margins are over
        if let Some((i, j)) = cells(nr, nc).find(|&(i, j)| dr[i] < 0 && dc[j] < 0 && m[i][j] > 0) {
            m[i][j] -= 1;
            dr[i] += 1;
            dc[j] += 1;
            continue;
        }
        // move a unit between rows within a column
        let row_move = cells(nr, nc).find_map(|(i, j)| {
            (dr[i] > 0 && allowed(i, j))
                .then(|| (0..nr).find(|&ip| dr[ip] < 0 && m[ip][j] > 0).map(|ip| (i, ip, j)))
                .flatten()
        });
        if let Some((i, ip, j)) = row_move {
            m[i][j] += 1;
            m[ip][j] -= 1;
            dr[i] -= 1;
            dr[ip] += 1;
            continue;
        }
        // move a unit between columns within a row
        let col_move = cells(nr, nc).find_map(|(i, j)| {
            (dc[j] > 0 && allowed(i, j))
                .then(|| (0..nc).find(|&jp| dc[jp] < 0 && m[i][jp] > 0).map(|jp| (i, j, jp)))
                .flatten()
        });
        if let Some((i, j, jp)) = col_move {
            m[i][j] += 1;
            m[i][jp] -= 1;
            dc[j] -= 1;
            dc[jp] += 1;
            continue;
        }
        return Err(infeasible(c, &dr, &dc));
    }
    Ok(m.into_iter().map(|r| r.into_iter().map(|v| v as usize).collect()).collect())
}

fn infeasible(c: &InterLayerCoupling, dr: &[i64], dc: &[i64]) -> Error {
    let rows: Vec<String> = c.info_degrees().iter().zip(dr).map(|(k, d)| format!("k_info={k}: {d}")).collect();
    let cols: Vec<String> = c.phy_degrees().iter().zip(dc).map(|(k, d)| format!("k_phy={k}: {d}")).collect();
    Error::config(format!(
        "coupling infeasible for the realized degree classes; deficits {} / {}",
        rows.join(", "),
        cols.join(", ")
    ))
}

fn pearson(pairs: impl Iterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut n, mut sx, mut sy) = (0.0, 0.0, 0.0);
    let pairs: Vec<(f64, f64)> = pairs.collect();
    for &(x, y) in &pairs {
        n += 1.0;
        sx += x;
        sy += y;
    }
    if n < 2.0 {
        return None;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut cxy, mut cxx, mut cyy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        cxy += (x - mx) * (y - my);
        cxx += (x - mx) * (x - mx);
        cyy += (y - my) * (y - my);
    }
    if cxx <= 0.0 || cyy <= 0.0 {
        return None;
    }
    Some(cxy / (cxx * cyy).sqrt())
}

/// Degree assortativity: Pearson correlation of the degrees at the two ends
/// of an edge, over both orientations of every edge. `None` when the degrees
/// at edge ends do not vary (e.g. regular graphs) or there are no edges.
pub fn measure_intra_assortativity(layer: &Layer) -> Option<f64> {
    let deg = layer.degrees();
    pearson(layer.edges().flat_map(|(i, j)| {
        let (a, b) = (deg[i] as f64, deg[j] as f64);
        [(a, b), (b, a)]
    }))
}

/// Pearson correlation over nodes of information-layer and physical-layer
/// degrees.
pub fn measure_inter_correlation(net: &MultiplexNetwork) -> Option<f64> {
    pearson((0..net.n_nodes()).map(|i| (net.info.degree(i) as f64, net.phy.degree(i) as f64)))
}
