//! Single-layer graphs and their generators.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::degree::{sample_degree_sequence, DegreeDistribution};
use super::mixing::MixingMatrix;
use crate::error::{Error, Result};

/// Edges removed while turning a stub matching into a simple graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ErasedEdges {
    pub self_loops: usize,
    pub multi_edges: usize,
}

impl ErasedEdges {
    pub fn total(&self) -> usize {
        self.self_loops + self.multi_edges
    }
}

/// An undirected simple graph over nodes `0..n`, with the degree each node
/// was generated for (realized degrees can be lower after erasures).
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    adj: Vec<Vec<usize>>,
    target_degrees: Vec<usize>,
    erased: ErasedEdges,
}

impl Layer {
    /// Builds a simple graph from a multigraph edge list: self-loops are
    /// dropped and parallel edges collapsed.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        let mut target = vec![0usize; n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::config(format!("edge ({i}, {j}) references a node >= {n}")));
            }
            target[i] += 1;
            target[j] += 1;
        }
        let mut erased = ErasedEdges::default();
        for &(i, j) in edges {
            if i == j {
                erased.self_loops += 1;
            } else {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut duplicate_ends = 0;
        for nb in &mut adj {
            nb.sort_unstable();
            let before = nb.len();
            nb.dedup();
            duplicate_ends += before - nb.len();
        }
        erased.multi_edges = duplicate_ends / 2;
        Ok(Layer {
            adj,
            target_degrees: target,
            erased,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    /// Degrees the generator aimed for; used as the node's degree class.
    pub fn target_degrees(&self) -> &[usize] {
        &self.target_degrees
    }

    pub fn erased(&self) -> ErasedEdges {
        self.erased
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Renames node `v` to `perm[v]`.
    pub(crate) fn relabel(&self, perm: &[usize]) -> Layer {
        let n = self.n_nodes();
        let mut adj = vec![Vec::new(); n];
        let mut target = vec![0; n];
        for v in 0..n {
            let mut nb: Vec<usize> = self.adj[v].iter().map(|&u| perm[u]).collect();
            nb.sort_unstable();
            adj[perm[v]] = nb;
            target[perm[v]] = self.target_degrees[v];
        }
        Layer {
            adj,
            target_degrees: target,
            erased: self.erased,
        }
    }
}

/// Uniform stub matching on the given degree sequence, followed by erasure
/// of self-loops and multi-edges.
pub fn build_configuration_layer<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R) -> Result<Layer> {
    let total: usize = degrees.iter().sum();
    if !total.is_multiple_of(2) {
        return Err(Error::config(format!("stub total {total} is odd")));
    }
    let mut stubs: Vec<usize> = Vec::with_capacity(total);
    for (i, &k) in degrees.iter().enumerate() {
        stubs.extend(std::iter::repeat_n(i, k));
    }
    stubs.shuffle(rng);
    let edges: Vec<(usize, usize)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let mut layer = Layer::from_edges(degrees.len(), &edges)?;
    layer.target_degrees = degrees.to_vec();
    Ok(layer)
}

pub fn build_configuration_layer_from<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Layer> {
    let degrees = sample_degree_sequence(dist, n, rng)?;
    build_configuration_layer(&degrees, rng)
}

/// Largest-remainder rounding of nonnegative `targets` to integers summing
/// to `total`. Ties go to the lower index.
pub fn apportion(targets: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = targets.iter().sum();
    if targets.is_empty() {
        return Vec::new();
    }
    let scale = if sum > 0.0 { total as f64 / sum } else { 0.0 };
    let scaled: Vec<f64> = targets.iter().map(|t| t * scale).collect();
    let mut out: Vec<usize> = scaled.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - scaled[a].floor();
        let rb = scaled[b] - scaled[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        out[i] += 1;
    }
    out
}

/// Degree-correlated layer from a mixing matrix: node counts per class are
/// apportioned from `n p_k`, edge counts per class pair from the matrix, and
/// the edge ends of each class are attached to that class's nodes uniformly
/// at random.
pub fn build_correlated_layer<R: Rng + ?Sized>(
    mixing: &MixingMatrix,
    n: usize,
    rng: &mut R,
) -> Result<Layer> {
    let table = mixing.degree_table();
    let degrees = mixing.degrees();
    let classes = degrees.len();
    let targets: Vec<f64> = table.probs.iter().map(|p| p * n as f64).collect();
    let mut counts = apportion(&targets, n);

    let stub_total = |c: &[usize]| -> usize { c.iter().zip(degrees).map(|(c, k)| c * k).sum() };
    if stub_total(&counts) % 2 == 1 {
        // move one node between classes of opposite degree parity
        let mut fixed = false;
        'outer: for i in (0..classes).filter(|&i| degrees[i] % 2 == 1) {
            for j in 0..classes {
                if degrees[j].is_multiple_of(2) && counts[j] > 0 {
                    counts[j] -= 1;
                    counts[i] += 1;
                    fixed = true;
                    break 'outer;
                }
            }
        }
        if !fixed {
            return Err(Error::config(format!(
                "odd stub total: every class has odd degree and n = {n} is odd"
            )));
        }
    }
    let stubs: Vec<usize> = counts.iter().zip(degrees).map(|(c, k)| c * k).collect();
    let half_ends = stub_total(&counts) as f64 / 2.0;
    let e = mixing.entries();

    // unordered edge counts between distinct classes, then diagonal by parity
    let mut m = vec![vec![0usize; classes]; classes];
    for i in 0..classes {
        for j in (i + 1)..classes {
            let t = 2.0 * half_ends * e[i][j];
            m[i][j] = t.round() as usize;
            m[j][i] = m[i][j];
        }
    }
    let residual = |m: &Vec<Vec<usize>>, i: usize| -> i64 {
        let off: usize = (0..classes).filter(|&j| j != i).map(|j| m[i][j]).sum();
        stubs[i] as i64 - off as i64
    };
    for i in 0..classes {
        if residual(&m, i).rem_euclid(2) == 1 {
            // flip parity of classes i and j together
            let Some(j) = ((i + 1)..classes).max_by(|&a, &b| e[i][a].total_cmp(&e[i][b])) else {
                return Err(Error::Internal(format!("unresolved stub parity in class {i}")));
            };
            let t = 2.0 * half_ends * e[i][j];
            if (m[i][j] as f64) > t && m[i][j] > 0 {
                m[i][j] -= 1;
            } else {
                m[i][j] += 1;
            }
            m[j][i] = m[i][j];
        }
    }
    for i in 0..classes {
        while residual(&m, i) < 0 {
            let Some(j) = (0..classes)
                .filter(|&j| j != i && m[i][j] >= 2)
                .max_by_key(|&j| m[i][j])
            else {
                return Err(Error::Internal(format!(
                    "edge counts exceed the {} stubs of degree-{} nodes",
                    stubs[i], degrees[i]
                )));
            };
            m[i][j] -= 2;
            m[j][i] = m[i][j];
        }
    }
    for i in 0..classes {
        let r = residual(&m, i);
        if r < 0 || r % 2 != 0 {
            return Err(Error::Internal(format!("class {i} left with residual {r}")));
        }
        m[i][i] = r as usize / 2;
    }

    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut target_degrees = vec![0usize; n];
    let mut class_stubs: Vec<Vec<usize>> = Vec::with_capacity(classes);
    let mut next = 0;
    for (c, &count) in counts.iter().enumerate() {
        let members = &ids[next..next + count];
        next += count;
        let mut s = Vec::with_capacity(count * degrees[c]);
        for &v in members {
            target_degrees[v] = degrees[c];
            s.extend(std::iter::repeat_n(v, degrees[c]));
        }
        s.shuffle(rng);
        class_stubs.push(s);
    }

    let mut edges = Vec::with_capacity(half_ends as usize);
    for i in 0..classes {
        for j in i..classes {
            for _ in 0..m[i][j] {
                let a = class_stubs[i]
                    .pop()
                    .ok_or_else(|| Error::Internal(format!("class {i} ran out of stubs")))?;
                let b = class_stubs[j]
                    .pop()
                    .ok_or_else(|| Error::Internal(format!("class {j} ran out of stubs")))?;
                edges.push((a, b));
            }
        }
    }
    if let Some(c) = class_stubs.iter().position(|s| !s.is_empty()) {
        return Err(Error::Internal(format!(
            "{} unmatched stubs left in degree class {}",
            class_stubs[c].len(),
            degrees[c]
        )));
    }
    let mut layer = Layer::from_edges(n, &edges)?;
    layer.target_degrees = target_degrees;
    Ok(layer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplex_net::mixing::{two_point_a_for_assortativity, two_point_mixing_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_stubs_make_one_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layer = build_configuration_layer(&[1, 1], &mut rng).unwrap();
        assert_eq!(layer.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn cleanup_counts_erasures() {
        let layer = Layer::from_edges(3, &[(0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 1)]).unwrap();
        assert_eq!(layer.erased().self_loops, 1);
        assert_eq!(layer.erased().multi_edges, 3);
        assert_eq!(layer.edge_count(), 2);
        assert_eq!(layer.neighbors(1), &[0, 2]);
    }

    #[test]
    fn handshake_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layer = build_configuration_layer_from(
            &DegreeDistribution::Poisson { mean: 5.0 },
            2000,
            &mut rng,
        )
        .unwrap();
        let deg_sum: usize = layer.degrees().iter().sum();
        assert_eq!(deg_sum, 2 * layer.edge_count());
        for i in 0..layer.n_nodes() {
            assert!(!layer.neighbors(i).contains(&i));
            for &j in layer.neighbors(i) {
                assert!(layer.neighbors(j).contains(&i));
            }
        }
    }

    #[test]
    fn regular_layer_rarely_erases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let layer = build_configuration_layer(&vec![5; 10_000], &mut rng).unwrap();
        // expected erasures ≈ (k-1)/2 + ((k-1)/2)^2 = 6 of 25000 edges
        let frac = layer.erased().total() as f64 / 25_000.0;
        assert!(frac < 1e-3, "erased fraction {frac}");
    }

    #[test]
    fn apportion_is_exact() {
        assert_eq!(apportion(&[0.5, 0.5], 3), vec![2, 1]);
        assert_eq!(apportion(&[4000.4, 5999.6], 10_000), vec![4000, 6000]);
        let v = apportion(&[1.0 / 3.0; 3], 10);
        assert_eq!(v.iter().sum::<usize>(), 10);
    }

    #[test]
    fn correlated_layer_matches_class_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for &r in &[-0.25, 0.0, 1.0] {
            let a = two_point_a_for_assortativity(2, 8, 0.5, r).unwrap();
            let e = two_point_mixing_matrix(2, 8, 0.5, a).unwrap();
            let layer = build_correlated_layer(&e, 1000, &mut rng).unwrap();
            let twos = layer.target_degrees().iter().filter(|&&k| k == 2).count();
            assert_eq!(twos, 500);
            let deg_sum: usize = layer.degrees().iter().sum();
            assert_eq!(deg_sum, 2 * layer.edge_count());
        }
    }
}
