//! Joint degree distributions: intra-layer mixing matrices and inter-layer
//! degree couplings.

use serde::{Deserialize, Serialize};

use super::degree::DegreeTable;
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Joint distribution of the degrees at the two ends of a uniformly random
/// edge (ordered ends, so the matrix is symmetric and sums to one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingMatrix {
    degrees: Vec<usize>,
    e: Vec<Vec<f64>>,
}

impl MixingMatrix {
    pub fn new(degrees: Vec<usize>, e: Vec<Vec<f64>>) -> Result<Self> {
        let n = degrees.len();
        if n == 0 {
            return Err(Error::config("mixing matrix has empty support"));
        }
        if degrees.contains(&0) || degrees.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "mixing matrix degrees must be positive and strictly increasing",
            ));
        }
        if e.len() != n || e.iter().any(|row| row.len() != n) {
            return Err(Error::config("mixing matrix must be square over its degree support"));
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = e[i][j];
                if !(v.is_finite() && v >= -SUM_TOL) {
                    return Err(Error::config(format!("mixing matrix entry ({i},{j}) = {v}")));
                }
                if (v - e[j][i]).abs() > SUM_TOL {
                    return Err(Error::config("mixing matrix must be symmetric"));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::config(format!("mixing matrix sums to {total}, not 1")));
        }
        let e = e
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        Ok(MixingMatrix { degrees, e })
    }

    /// Mixing matrix of a configuration model with the given degree law:
    /// `E[k][l] = (k p_k / <k>) (l p_l / <k>)`.
    pub fn uncorrelated(table: &DegreeTable) -> Self {
        let mean = table.mean();
        let q: Vec<f64> = table
            .degrees
            .iter()
            .zip(&table.probs)
            .map(|(&k, &p)| k as f64 * p / mean)
            .collect();
        let e = q.iter().map(|a| q.iter().map(|b| a * b).collect()).collect();
        MixingMatrix {
            degrees: table.degrees.clone(),
            e,
        }
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.e
    }

    /// Fraction of edge ends attached to each degree class (row sums).
    pub fn end_fractions(&self) -> Vec<f64> {
        self.e.iter().map(|row| row.iter().sum()).collect()
    }

    /// `p_k = (Σ_l E_kl / k) / (Σ_kl E_kl / k)`.
    pub fn degree_table(&self) -> DegreeTable {
        let w: Vec<f64> = self
            .end_fractions()
            .iter()
            .zip(&self.degrees)
            .map(|(q, &k)| q / k as f64)
            .collect();
        let total: f64 = w.iter().sum();
        DegreeTable {
            degrees: self.degrees.clone(),
            probs: w.iter().map(|x| x / total).collect(),
        }
    }

    pub fn mean_degree(&self) -> f64 {
        self.degree_table().mean()
    }

    /// Pearson correlation of the end degrees; `None` for a single class.
    pub fn assortativity(&self) -> Option<f64> {
        let q = self.end_fractions();
        let k: Vec<f64> = self.degrees.iter().map(|&d| d as f64).collect();
        let mu: f64 = q.iter().zip(&k).map(|(q, k)| q * k).sum();
        let var: f64 = q.iter().zip(&k).map(|(q, k)| q * k * k).sum::<f64>() - mu * mu;
        if var <= 1e-14 * mu * mu.max(1.0) {
            return None;
        }
        let mut joint = 0.0;
        for (i, row) in self.e.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                joint += v * k[i] * k[j];
            }
        }
        Some((joint - mu * mu) / var)
    }

    /// Normalized ordered-dyad densities `d[k][l] = <k> E[k][l]`: the expected
    /// number of (degree-k node, degree-l neighbor) pairs per node.
    pub fn dyad_density(&self) -> Vec<Vec<f64>> {
        let mean = self.mean_degree();
        self.e
            .iter()
            .map(|row| row.iter().map(|v| v * mean).collect())
            .collect()
    }
}

/// Valid interval for the free entry `a` of the two-point mixing matrix.
pub fn two_point_mixing_range(k1: usize, k2: usize, p1: f64) -> (f64, f64) {
    let p2 = 1.0 - p1;
    let mean = k1 as f64 * p1 + k2 as f64 * p2;
    let x1 = k1 as f64 * p1 / mean;
    let x2 = k2 as f64 * p2 / mean;
    ((x1 - x2).max(0.0), x1)
}

/// The two-point mixing matrix with `E[0][0] = a` for degrees `k1 < k2`
/// occurring with probabilities `p1` and `1 - p1`.
pub fn two_point_mixing_matrix(k1: usize, k2: usize, p1: f64, a: f64) -> Result<MixingMatrix> {
    if k1 == 0 || k1 >= k2 {
        return Err(Error::config(format!(
            "two-point degrees must satisfy 0 < k1 < k2, got ({k1}, {k2})"
        )));
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(Error::Domain {
            name: "p1",
            value: p1,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let (lo, hi) = two_point_mixing_range(k1, k2, p1);
    let slack = 1e-12;
    if !(a >= lo - slack && a <= hi + slack) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            lo,
            hi,
        });
    }
    let a = a.clamp(lo, hi);
    let mean = k1 as f64 * p1 + k2 as f64 * (1.0 - p1);
    let x1 = k1 as f64 * p1 / mean;
    let x2 = k2 as f64 * (1.0 - p1) / mean;
    let off = x1 - a;
    let e = vec![vec![a, off], vec![off, x2 - x1 + a]];
    Ok(MixingMatrix {
        degrees: vec![k1, k2],
        e,
    })
}

/// Closed-form assortativity of the two-point mixing matrix.
pub fn two_point_assortativity(k1: usize, k2: usize, p1: f64, a: f64) -> f64 {
    let p2 = 1.0 - p1;
    let mean = k1 as f64 * p1 + k2 as f64 * p2;
    let m2 = mean * mean;
    let (k1, k2) = (k1 as f64, k2 as f64);
    (a - k1 * k1 * p1 * p1 / m2) / (k1 * k2 * p1 * p2 / m2)
}

/// Inverts the linear relation between `a` and the assortativity.
pub fn two_point_a_for_assortativity(k1: usize, k2: usize, p1: f64, r: f64) -> Result<f64> {
    let p2 = 1.0 - p1;
    let mean = k1 as f64 * p1 + k2 as f64 * p2;
    let m2 = mean * mean;
    let (kf1, kf2) = (k1 as f64, k2 as f64);
    let a = r * kf1 * kf2 * p1 * p2 / m2 + kf1 * kf1 * p1 * p1 / m2;
    let (lo, hi) = two_point_mixing_range(k1, k2, p1);
    if a < lo - 1e-12 || a > hi + 1e-12 {
        return Err(Error::Domain {
            name: "r_intra",
            value: r,
            lo: two_point_assortativity(k1, k2, p1, lo),
            hi: two_point_assortativity(k1, k2, p1, hi),
        });
    }
    Ok(a.clamp(lo, hi))
}

/// Joint distribution `C[k1][k2]` of a node's information-layer degree and
/// physical-layer degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterLayerCoupling {
    info_degrees: Vec<usize>,
    phy_degrees: Vec<usize>,
    c: Vec<Vec<f64>>,
}

impl InterLayerCoupling {
    pub fn new(info_degrees: Vec<usize>, phy_degrees: Vec<usize>, c: Vec<Vec<f64>>) -> Result<Self> {
        if c.len() != info_degrees.len() || c.iter().any(|r| r.len() != phy_degrees.len()) {
            return Err(Error::config("coupling matrix shape does not match its degree supports"));
        }
        let mut total = 0.0;
        for row in &c {
            for &v in row {
                if !(v.is_finite() && v >= -SUM_TOL) {
                    return Err(Error::config(format!("coupling entry {v} is negative")));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::config(format!("coupling matrix sums to {total}, not 1")));
        }
        let c = c
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        Ok(InterLayerCoupling {
            info_degrees,
            phy_degrees,
            c,
        })
    }

    pub fn independent(info: &DegreeTable, phy: &DegreeTable) -> Self {
        let c = info
            .probs
            .iter()
            .map(|pi| phy.probs.iter().map(|pp| pi * pp).collect())
            .collect();
        InterLayerCoupling {
            info_degrees: info.degrees.clone(),
            phy_degrees: phy.degrees.clone(),
            c,
        }
    }

    pub fn info_degrees(&self) -> &[usize] {
        &self.info_degrees
    }

    pub fn phy_degrees(&self) -> &[usize] {
        &self.phy_degrees
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.c
    }

    pub fn info_marginal(&self) -> Vec<f64> {
        self.c.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn phy_marginal(&self) -> Vec<f64> {
        (0..self.phy_degrees.len())
            .map(|j| self.c.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// Checks that the marginals reproduce the two layer degree laws.
    pub fn check_marginals(&self, info: &DegreeTable, phy: &DegreeTable, tol: f64) -> Result<()> {
        let check = |name: &str, degrees: &[usize], marginal: Vec<f64>, table: &DegreeTable| {
            let mut seen = 0.0;
            for (k, m) in degrees.iter().zip(marginal) {
                let p = table.prob(*k);
                if (m - p).abs() > tol {
                    return Err(Error::config(format!(
                        "{name} marginal of the coupling at degree {k} is {m}, layer has {p}"
                    )));
                }
                seen += p;
            }
            if (seen - 1.0).abs() > tol {
                return Err(Error::config(format!(
                    "{name} layer has degrees missing from the coupling support"
                )));
            }
            Ok(())
        };
        check("info", &self.info_degrees, self.info_marginal(), info)?;
        check("phy", &self.phy_degrees, self.phy_marginal(), phy)
    }

    /// Pearson correlation over nodes of the two degrees; `None` when either
    /// marginal is degenerate.
    pub fn pearson(&self) -> Option<f64> {
        let ki: Vec<f64> = self.info_degrees.iter().map(|&k| k as f64).collect();
        let kp: Vec<f64> = self.phy_degrees.iter().map(|&k| k as f64).collect();
        let mi = self.info_marginal();
        let mp = self.phy_marginal();
        let mu_i: f64 = mi.iter().zip(&ki).map(|(p, k)| p * k).sum();
        let mu_p: f64 = mp.iter().zip(&kp).map(|(p, k)| p * k).sum();
        let var_i: f64 = mi.iter().zip(&ki).map(|(p, k)| p * (k - mu_i).powi(2)).sum();
        let var_p: f64 = mp.iter().zip(&kp).map(|(p, k)| p * (k - mu_p).powi(2)).sum();
        if var_i <= 1e-14 || var_p <= 1e-14 {
            return None;
        }
        let mut cov = 0.0;
        for (i, row) in self.c.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                cov += v * (ki[i] - mu_i) * (kp[j] - mu_p);
            }
        }
        Some(cov / (var_i * var_p).sqrt())
    }
}

/// Valid interval for `a = C[0][0]` of the two-point coupling. The lower end
/// is `max{0, q1 + q2 - 1}`, the smallest value keeping `C[1][1] >= 0`.
pub fn two_point_inter_range(q1: f64, q2: f64) -> (f64, f64) {
    ((q1 + q2 - 1.0).max(0.0), q1.min(q2))
}

/// Two-point coupling: `info = (k_info_1, k_info_2)` with `P(k_info_1) = q1`,
/// `phy = (k_phy_1, k_phy_2)` with `P(k_phy_1) = q2`, and `C[0][0] = a`.
/// The support is reordered ascending if a pair is given high-to-low.
pub fn two_point_inter_matrix(
    info: (usize, usize),
    phy: (usize, usize),
    q1: f64,
    q2: f64,
    a: f64,
) -> Result<InterLayerCoupling> {
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain {
                name,
                value: q,
                lo: 0.0,
                hi: 1.0,
            });
        }
    }
    if info.0 == info.1 || phy.0 == phy.1 {
        return Err(Error::config("two-point coupling needs two distinct degrees per layer"));
    }
    let (lo, hi) = two_point_inter_range(q1, q2);
    if !(a >= lo - 1e-12 && a <= hi + 1e-12) {
        return Err(Error::Domain {
            name: "a",
            value: a,
            lo,
            hi,
        });
    }
    let a = a.clamp(lo, hi);
    let mut c = vec![vec![a, q1 - a], vec![q2 - a, 1.0 - q1 - q2 + a]];
    let mut info_degrees = vec![info.0, info.1];
    let mut phy_degrees = vec![phy.0, phy.1];
    if info.0 > info.1 {
        c.swap(0, 1);
        info_degrees.swap(0, 1);
    }
    if phy.0 > phy.1 {
        for row in &mut c {
            row.swap(0, 1);
        }
        phy_degrees.swap(0, 1);
    }
    InterLayerCoupling::new(info_degrees, phy_degrees, c)
}

/// Inverts `r_inter = (k_i1 - k_i2)(k_p1 - k_p2)(a - q1 q2) / (σ_info σ_phy)`.
pub fn two_point_a_for_inter_correlation(
    info: (usize, usize),
    phy: (usize, usize),
    q1: f64,
    q2: f64,
    r: f64,
) -> Result<f64> {
    let di = info.0 as f64 - info.1 as f64;
    let dp = phy.0 as f64 - phy.1 as f64;
    let sigma_i = di.abs() * (q1 * (1.0 - q1)).sqrt();
    let sigma_p = dp.abs() * (q2 * (1.0 - q2)).sqrt();
    let a = q1 * q2 + r * sigma_i * sigma_p / (di * dp);
    let (lo, hi) = two_point_inter_range(q1, q2);
    if !(a >= lo - 1e-12 && a <= hi + 1e-12) {
        let r_at = |a: f64| di * dp * (a - q1 * q2) / (sigma_i * sigma_p);
        let (r1, r2) = (r_at(lo), r_at(hi));
        return Err(Error::Domain {
            name: "r_inter",
            value: r,
            lo: r1.min(r2),
            hi: r1.max(r2),
        });
    }
    Ok(a.clamp(lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mean(k1: usize, k2: usize, p1: f64) -> f64 {
        k1 as f64 * p1 + k2 as f64 * (1.0 - p1)
    }

    #[test]
    fn two_point_zero_assortativity_at_product_point() {
        let m = mean(2, 8, 0.5);
        let a = (2.0 * 0.5 / m).powi(2);
        assert!((a - 0.04).abs() < 1e-15);
        let e = two_point_mixing_matrix(2, 8, 0.5, a).unwrap();
        assert!(e.assortativity().unwrap().abs() < 1e-12);
        assert!(two_point_assortativity(2, 8, 0.5, a).abs() < 1e-12);
    }

    #[test]
    fn two_point_perfectly_assortative_at_upper_end() {
        let e = two_point_mixing_matrix(2, 8, 0.5, 0.2).unwrap();
        assert_eq!(e.entries()[0][1], 0.0);
        assert!((e.assortativity().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn implied_degree_law_is_recovered() {
        for &(p1, a) in &[(0.4, 0.1), (0.9, 0.6), (0.5, 0.0)] {
            let e = two_point_mixing_matrix(2, 8, p1, a).unwrap();
            let t = e.degree_table();
            assert!((t.probs[0] - p1).abs() < 1e-12);
            assert!((t.probs[1] - (1.0 - p1)).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_recovers_a() {
        for &r in &[0.0, 0.5, 1.0] {
            let a = two_point_a_for_assortativity(2, 8, 0.4, r).unwrap();
            let e = two_point_mixing_matrix(2, 8, 0.4, a).unwrap();
            assert!((e.assortativity().unwrap() - r).abs() < 1e-12);
        }
        // with P(k=2) = 0.4 the most disassortative matrix reaches only -1/6
        let err = two_point_a_for_assortativity(2, 8, 0.4, -0.5).unwrap_err();
        match err {
            Error::Domain { lo, .. } => assert!((lo + 1.0 / 6.0).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
        let a = two_point_a_for_assortativity(2, 8, 0.5, -0.25).unwrap();
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn out_of_range_a_names_interval() {
        let err = two_point_mixing_matrix(2, 8, 0.5, 0.3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[0, 0.2]"), "{msg}");
    }

    #[test]
    fn uncorrelated_matrix_has_zero_assortativity() {
        let t = DegreeTable::from_weights([(1, 0.2), (3, 0.5), (7, 0.3)]).unwrap();
        let e = MixingMatrix::uncorrelated(&t);
        assert!(e.assortativity().unwrap().abs() < 1e-12);
        let back = e.degree_table();
        for (a, b) in back.probs.iter().zip(&t.probs) {
            assert!((a - b).abs() < 1e-12);
        }
        let single = MixingMatrix::uncorrelated(&DegreeTable::from_weights([(5, 1.0)]).unwrap());
        assert_eq!(single.assortativity(), None);
    }

    #[test]
    fn inter_matrix_examples() {
        let c = two_point_inter_matrix((2, 8), (2, 8), 0.5, 0.5, 0.25).unwrap();
        assert!(c.pearson().unwrap().abs() < 1e-12);
        let c = two_point_inter_matrix((2, 8), (2, 8), 0.5, 0.5, 0.5).unwrap();
        assert!((c.pearson().unwrap() - 1.0).abs() < 1e-12);
        let c = two_point_inter_matrix((2, 8), (2, 8), 0.5, 0.5, 0.0).unwrap();
        assert!((c.pearson().unwrap() + 1.0).abs() < 1e-12);
        // opposite ordering of one layer flips the sign
        let c = two_point_inter_matrix((2, 8), (8, 2), 0.5, 0.5, 0.5).unwrap();
        assert!((c.pearson().unwrap() + 1.0).abs() < 1e-12);
        assert!(two_point_inter_matrix((2, 8), (2, 8), 0.7, 0.6, 0.2).is_err());
    }

    #[test]
    fn inter_inverse() {
        for &r in &[-1.0, 0.0, 0.5, 1.0] {
            let a = two_point_a_for_inter_correlation((2, 8), (2, 8), 0.5, 0.5, r).unwrap();
            let c = two_point_inter_matrix((2, 8), (2, 8), 0.5, 0.5, a).unwrap();
            assert!((c.pearson().unwrap() - r).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_direct_pearson(p1 in 0.05f64..0.95, t in 0.0f64..=1.0, k2 in 3usize..20) {
            let (lo, hi) = two_point_mixing_range(2, k2, p1);
            let a = lo + t * (hi - lo);
            let e = two_point_mixing_matrix(2, k2, p1, a).unwrap();
            let direct = e.assortativity().unwrap();
            prop_assert!((direct - two_point_assortativity(2, k2, p1, a)).abs() < 1e-12);
            let total: f64 = e.entries().iter().flatten().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn assortativity_increases_with_a(p1 in 0.05f64..0.95, t1 in 0.0f64..1.0, dt in 1e-3f64..0.5) {
            let (lo, hi) = two_point_mixing_range(2, 8, p1);
            let t2 = (t1 + dt).min(1.0);
            prop_assume!(t2 > t1);
            let r1 = two_point_assortativity(2, 8, p1, lo + t1 * (hi - lo));
            let r2 = two_point_assortativity(2, 8, p1, lo + t2 * (hi - lo));
            prop_assert!(r2 > r1);
        }

        #[test]
        fn inter_marginals_and_monotonicity(q1 in 0.05f64..0.95, q2 in 0.05f64..0.95, t1 in 0.0f64..1.0, dt in 1e-3f64..0.5) {
            let (lo, hi) = two_point_inter_range(q1, q2);
            let a1 = lo + t1 * (hi - lo);
            let a2 = lo + (t1 + dt).min(1.0) * (hi - lo);
            prop_assume!(a2 > a1);
            let c1 = two_point_inter_matrix((2, 8), (3, 9), q1, q2, a1).unwrap();
            let c2 = two_point_inter_matrix((2, 8), (3, 9), q1, q2, a2).unwrap();
            prop_assert!((c1.info_marginal()[0] - q1).abs() < 1e-12);
            prop_assert!((c1.phy_marginal()[0] - q2).abs() < 1e-12);
            prop_assert!(c2.pearson().unwrap() > c1.pearson().unwrap());
        }
    }
}
