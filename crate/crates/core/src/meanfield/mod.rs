//! Mean-field descriptions: the fully-mixed ODE and the degree-based pair
//! approximation.

pub mod fully_mixed;
pub mod pair;

use serde::{Deserialize, Serialize};

pub use fully_mixed::{fully_mixed_rhs, run_fully_mixed, FullyMixedRun, FullyMixedState};
pub use pair::{BetaHatStats, PairApproximation, PairNetwork, PairRun};

/// Densities below this are treated as empty in closures and in the
/// effective transmission rate.
pub const EPS: f64 = 1e-12;

/// An ODE run ends once the infectious mass is below this and falling.
pub const EXTINCTION_MASS: f64 = 1e-7;

/// How the transmission rate of a susceptible node whose opinion is not
/// tracked is estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaHatScheme {
    /// Global opinion composition, as under random recoupling.
    Mixed,
    /// Opinion composition of susceptible nodes with the same physical degree.
    Density,
    /// Opinion composition of susceptible nodes that have both a susceptible
    /// and an infectious neighbor, closed at the pair level.
    Neighborhood,
}

impl BetaHatScheme {
    pub const ALL: [BetaHatScheme; 3] =
        [BetaHatScheme::Mixed, BetaHatScheme::Density, BetaHatScheme::Neighborhood];

    pub fn name(self) -> &'static str {
        match self {
            BetaHatScheme::Mixed => "mixed",
            BetaHatScheme::Density => "density",
            BetaHatScheme::Neighborhood => "neighborhood",
        }
    }
}

/// `[X∘Y_k∘Z] ≈ (k-1)/k [X∘Y_k][Y_k∘Z] / [Y_k]` for two edges in the same
/// layer around a degree-`k` center.
pub fn close_triple_same_layer(pair_xy: f64, pair_yz: f64, single_y: f64, k: usize) -> f64 {
    if k == 0 || single_y < EPS {
        return 0.0;
    }
    (k as f64 - 1.0) / k as f64 * pair_xy * pair_yz / single_y
}

/// `[X∘Y∘Z] ≈ [X∘Y][Y∘Z] / [Y]` for edges in different layers.
pub fn close_triple_cross_layer(pair_x_center: f64, pair_center_z: f64, single_center: f64) -> f64 {
    if single_center < EPS {
        return 0.0;
    }
    pair_x_center * pair_center_z / single_center
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_layer_closure() {
        assert_eq!(close_triple_same_layer(0.3, 0.2, 0.5, 1), 0.0);
        assert!((close_triple_same_layer(0.4, 0.4, 0.4, 2) - 0.2).abs() < 1e-15);
        assert_eq!(close_triple_same_layer(0.3, 0.2, 1e-13, 3), 0.0);
    }

    #[test]
    fn cross_layer_closure() {
        assert_eq!(close_triple_cross_layer(0.0, 0.3, 0.1), 0.0);
        assert!((close_triple_cross_layer(0.02, 0.03, 0.1) - 0.006).abs() < 1e-15);
    }
}
