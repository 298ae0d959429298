//! Degree distributions and i.i.d. degree-sequence sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tail mass discarded when truncating an unbounded support.
pub const POISSON_TAIL_MASS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegreeDistribution {
    Regular {
        k: usize,
    },
    /// Poisson restricted to positive degrees and truncated where the
    /// cumulative mass first reaches `1 - POISSON_TAIL_MASS`.
    Poisson {
        mean: f64,
    },
    /// `P(k) ∝ k^-exponent · exp(-k / cutoff_scale)` for `1 <= k <= max_degree`.
    TruncatedPowerLaw {
        exponent: f64,
        cutoff_scale: f64,
        max_degree: usize,
    },
    TwoPoint {
        k_lo: usize,
        k_hi: usize,
        p_lo: f64,
    },
    /// `(degree, weight)` pairs; weights are renormalized.
    Explicit {
        table: Vec<(usize, f64)>,
    },
}

/// A finite degree distribution with strictly increasing positive support.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeTable {
    pub degrees: Vec<usize>,
    pub probs: Vec<f64>,
}

impl DegreeTable {
    /// Builds a table from unnormalized weights, merging repeated degrees and
    /// dropping zero-weight entries.
    pub fn from_weights(entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut merged = std::collections::BTreeMap::<usize, f64>::new();
        for (k, w) in entries {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::config(format!("degree {k} has invalid weight {w}")));
            }
            if k == 0 {
                if w > 0.0 {
                    return Err(Error::config("degree 0 is not a supported degree"));
                }
                continue;
            }
            *merged.entry(k).or_default() += w;
        }
        merged.retain(|_, w| *w > 0.0);
        let total: f64 = merged.values().sum();
        if merged.is_empty() || total <= 0.0 {
            return Err(Error::config("degree distribution has empty support"));
        }
        let (degrees, probs) = merged.into_iter().map(|(k, w)| (k, w / total)).unzip();
        Ok(DegreeTable { degrees, probs })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn moment(&self, order: i32) -> f64 {
        self.degrees
            .iter()
            .zip(&self.probs)
            .map(|(&k, &p)| p * (k as f64).powi(order))
            .sum()
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.index_of(k).map_or(0.0, |i| self.probs[i])
    }

    pub fn index_of(&self, k: usize) -> Option<usize> {
        self.degrees.binary_search(&k).ok()
    }
}

impl DegreeDistribution {
    pub fn table(&self) -> Result<DegreeTable> {
        match *self {
            DegreeDistribution::Regular { k } => DegreeTable::from_weights([(k, 1.0)]),
            DegreeDistribution::Poisson { mean } => poisson_table(mean),
            DegreeDistribution::TruncatedPowerLaw {
                exponent,
                cutoff_scale,
                max_degree,
            } => {
                if !(cutoff_scale > 0.0) {
                    return Err(Error::config("power-law cutoff scale must be positive"));
                }
                DegreeTable::from_weights((1..=max_degree).map(|k| {
                    let x = k as f64;
                    (k, x.powf(-exponent) * (-x / cutoff_scale).exp())
                }))
            }
            DegreeDistribution::TwoPoint { k_lo, k_hi, p_lo } => {
                if !(0.0..=1.0).contains(&p_lo) {
                    return Err(Error::Domain {
                        name: "p_lo",
                        value: p_lo,
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                DegreeTable::from_weights([(k_lo, p_lo), (k_hi, 1.0 - p_lo)])
            }
            DegreeDistribution::Explicit { ref table } => {
                DegreeTable::from_weights(table.iter().copied())
            }
        }
    }
}

fn poisson_table(mean: f64) -> Result<DegreeTable> {
    if !(mean.is_finite() && mean > 0.0) {
        return Err(Error::config(format!("Poisson mean must be positive, got {mean}")));
    }
    // pmf(k) for k >= 1, normalized by 1 - pmf(0)
    let norm = 1.0 - (-mean).exp();
    let mut weights = Vec::new();
    let mut pmf = (-mean).exp();
    let mut cumulative = 0.0;
    let mut k = 0usize;
    while cumulative < 1.0 - POISSON_TAIL_MASS {
        k += 1;
        pmf *= mean / k as f64;
        cumulative += pmf / norm;
        weights.push((k, pmf));
        if k > 100_000 {
            return Err(Error::config("Poisson support did not converge"));
        }
    }
    DegreeTable::from_weights(weights)
}

/// Draws `n` i.i.d. degrees. If the total is odd, one uniformly chosen entry
/// is redrawn until the total becomes even.
pub fn sample_degree_sequence<R: Rng + ?Sized>(
    dist: &DegreeDistribution,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::config("degree sequence needs at least one node"));
    }
    let table = dist.table()?;
    let sampler = WeightedIndex::new(&table.probs)
        .map_err(|e| Error::config(format!("invalid degree distribution: {e}")))?;
    let mut seq: Vec<usize> = (0..n).map(|_| table.degrees[sampler.sample(rng)]).collect();
    let total: usize = seq.iter().sum();
    if total % 2 == 1 {
        let has_odd = table.degrees.iter().any(|k| k % 2 == 1);
        let has_even = table.degrees.iter().any(|k| k % 2 == 0);
        if !(has_odd && has_even) {
            return Err(Error::config(format!(
                "cannot draw an even stub total: every supported degree has the same parity and n = {n}"
            )));
        }
        let i = rng.random_range(0..n);
        let old = seq[i];
        loop {
            let k = table.degrees[sampler.sample(rng)];
            if (k + old) % 2 == 1 {
                seq[i] = k;
                break;
            }
        }
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tables_are_normalized_with_positive_support() {
        let dists = [
            DegreeDistribution::Regular { k: 5 },
            DegreeDistribution::Poisson { mean: 5.0 },
            DegreeDistribution::TruncatedPowerLaw {
                exponent: 1.32,
                cutoff_scale: 35.0,
                max_degree: 50,
            },
            DegreeDistribution::TwoPoint {
                k_lo: 2,
                k_hi: 8,
                p_lo: 0.4,
            },
            DegreeDistribution::Explicit {
                table: vec![(3, 2.0), (1, 1.0), (3, 1.0)],
            },
        ];
        for d in &dists {
            let t = d.table().unwrap();
            let total: f64 = t.probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{d:?}");
            assert!(t.degrees.iter().all(|&k| k >= 1));
            assert!(t.degrees.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn poisson_truncation_is_minimal() {
        let t = DegreeDistribution::Poisson { mean: 5.0 }.table().unwrap();
        let kmax = *t.degrees.last().unwrap();
        // mass of the zero-truncated law up to kmax - 1 must fall short
        let norm = 1.0 - (-5.0f64).exp();
        let mut pmf = (-5.0f64).exp();
        let mut below = 0.0;
        for k in 1..kmax {
            pmf *= 5.0 / k as f64;
            below += pmf / norm;
        }
        assert!(below < 1.0 - POISSON_TAIL_MASS);
        assert!(kmax > 10 && kmax < 25);
    }

    #[test]
    fn empty_support_is_rejected() {
        let d = DegreeDistribution::Explicit { table: vec![] };
        assert!(matches!(d.table(), Err(Error::Config(_))));
        let d = DegreeDistribution::Explicit {
            table: vec![(4, 0.0)],
        };
        assert!(d.table().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_degree_sequence(&d, 10, &mut rng).is_err());
    }

    #[test]
    fn regular_sequence_is_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let seq =
            sample_degree_sequence(&DegreeDistribution::Regular { k: 5 }, 10_000, &mut rng).unwrap();
        assert!(seq.iter().all(|&k| k == 5));
    }

    #[test]
    fn odd_regular_with_odd_n_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = sample_degree_sequence(&DegreeDistribution::Regular { k: 3 }, 5, &mut rng);
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn sampled_totals_are_even() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = DegreeDistribution::Poisson { mean: 3.0 };
        for n in 1..40 {
            let seq = sample_degree_sequence(&d, n, &mut rng).unwrap();
            assert_eq!(seq.len(), n);
            assert_eq!(seq.iter().sum::<usize>() % 2, 0);
        }
    }
}
