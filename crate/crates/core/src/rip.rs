//! Empirical restricted-isometry estimates for `A Psi`.
//!
//! Both estimators report the extremes of `||A Psi v||^2 / ||v||^2` over
//! `s`-sparse `v` and center them: `c = (max + min) / 2`,
//! `delta = (max - min) / (max + min)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bases::SparsityBasis;
use crate::error::{Error, Result};
use crate::solver::{binomial, for_each_subset, sensing_matrix};

/// Enumeration limit for [`exact_rip`].
pub const EXACT_SUPPORT_LIMIT: u128 = 100_000;

pub const MIN_PROBE_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RipMethod {
    ExactEnumeration,
    /// Sampled supports; `delta_hat` is then a lower bound on the true constant.
    RandomProbe {
        samples: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipEstimate {
    pub sparsity_level: usize,
    pub c_hat: f64,
    pub delta_hat: f64,
    pub method: RipMethod,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl RipEstimate {
    fn from_extremes(
        sparsity_level: usize,
        method: RipMethod,
        min_ratio: f64,
        max_ratio: f64,
    ) -> Self {
        let sum = max_ratio + min_ratio;
        let (c_hat, delta_hat) = if sum > 0.0 {
            (0.5 * sum, (max_ratio - min_ratio) / sum)
        } else {
            (0.0, 0.0)
        };
        Self {
            sparsity_level,
            c_hat,
            delta_hat,
            method,
            min_ratio,
            max_ratio,
        }
    }

    pub fn is_lower_bound(&self) -> bool {
        matches!(self.method, RipMethod::RandomProbe { .. })
    }
}

fn check_sparsity(sparsity: usize, n: usize) -> Result<()> {
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidArgument(format!(
            "sparsity level must lie in 1..={n}, got {sparsity}"
        )));
    }
    Ok(())
}

/// Exact extremes over all supports of size `sparsity`.
pub fn exact_rip(
    operator: &DMatrix<f64>,
    basis: &SparsityBasis,
    sparsity: usize,
) -> Result<RipEstimate> {
    let b = sensing_matrix(operator, basis)?;
    exact_rip_sensing(&b, sparsity)
}

/// [`exact_rip`] on an already-formed `A Psi`.
pub fn exact_rip_sensing(b: &DMatrix<f64>, sparsity: usize) -> Result<RipEstimate> {
    let n = b.ncols();
    check_sparsity(sparsity, n)?;
    let count = binomial(n, sparsity);
    if count > EXACT_SUPPORT_LIMIT {
        return Err(Error::TooManySupports {
            count,
            limit: EXACT_SUPPORT_LIMIT,
        });
    }
    let gram = b.tr_mul(b);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut sub = DMatrix::zeros(sparsity, sparsity);
    for_each_subset(n, sparsity, |support| {
        for (r, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                sub[(r, c)] = gram[(i, j)];
            }
        }
        let eig = sub.clone().symmetric_eigenvalues();
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    });
    Ok(RipEstimate::from_extremes(
        sparsity,
        RipMethod::ExactEnumeration,
        lo.max(0.0),
        hi,
    ))
}

/// Ratio extremes over `samples` random unit vectors with Gaussian entries on
/// uniformly drawn supports of size `sparsity`.
pub fn probe_rip(
    operator: &DMatrix<f64>,
    basis: &SparsityBasis,
    sparsity: usize,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    let b = sensing_matrix(operator, basis)?;
    probe_rip_sensing(&b, sparsity, samples, seed)
}

/// [`probe_rip`] on an already-formed `A Psi`.
pub fn probe_rip_sensing(
    b: &DMatrix<f64>,
    sparsity: usize,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    let n = b.ncols();
    check_sparsity(sparsity, n)?;
    if samples < MIN_PROBE_SAMPLES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_PROBE_SAMPLES} probe samples are required, got {samples}"
        )));
    }
    let (lo, hi) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let support = index::sample(&mut rng, n, sparsity).into_vec();
            let coeffs: Vec<f64> = (0..sparsity).map(|_| rng.sample(StandardNormal)).collect();
            let norm = coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut image = DVector::zeros(b.nrows());
            for (&j, &v) in support.iter().zip(&coeffs) {
                image.axpy(v / norm, &b.column(j), 1.0);
            }
            let r = image.norm_squared();
            (r, r)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        );
    Ok(RipEstimate::from_extremes(
        sparsity,
        RipMethod::RandomProbe { samples },
        lo,
        hi,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::BasisKind;
    use crate::network::{EigenPhases, Network, NetworkSpec, Topology};

    fn random_operator(m: usize, l: usize, seed: u64) -> DMatrix<f64> {
        Network::build(&NetworkSpec::random_orthogonal(m, 1.0, seed))
            .unwrap()
            .assemble_operator(l)
            .unwrap()
            .matrix
    }

    #[test]
    fn identity_is_an_isometry() {
        let id = DMatrix::identity(8, 8);
        for s in 1..=4 {
            let e = exact_rip(&id, &SparsityBasis::canonical(8), s).unwrap();
            assert_eq!(e.delta_hat, 0.0);
            assert!((e.c_hat - 1.0).abs() < 1e-14);
            let p = probe_rip(&id, &SparsityBasis::canonical(8), s, 200, 1).unwrap();
            assert!(p.max_ratio - p.min_ratio < 1e-8);
            assert!(p.is_lower_bound());
        }
    }

    #[test]
    fn square_equispaced_network_is_an_isometry() {
        for seed in 0..5 {
            let spec =
                NetworkSpec::random_orthogonal(8, 1.0, seed).with_phases(EigenPhases::Equispaced);
            let a = Network::build(&spec)
                .unwrap()
                .assemble_operator(8)
                .unwrap()
                .matrix;
            for kind in BasisKind::ALL {
                let basis = SparsityBasis::with_levels(kind, 8, 2).unwrap();
                let e = exact_rip(&a, &basis, 4).unwrap();
                assert!(e.delta_hat < 1e-8, "{kind:?}: {}", e.delta_hat);
            }
        }
    }

    #[test]
    fn estimate_brackets_extremes() {
        let a = random_operator(8, 12, 3);
        let e = exact_rip(&a, &SparsityBasis::canonical(12), 2).unwrap();
        assert!(e.min_ratio <= e.max_ratio);
        assert!((0.0..1.0).contains(&e.delta_hat));
        assert!(e.c_hat * (1.0 - e.delta_hat) <= e.min_ratio + 1e-10);
        assert!(e.max_ratio <= e.c_hat * (1.0 + e.delta_hat) + 1e-10);
    }

    #[test]
    fn probe_never_exceeds_exact() {
        for seed in 0..10 {
            let a = random_operator(8, 12, seed);
            let basis = SparsityBasis::canonical(12);
            let e = exact_rip(&a, &basis, 2).unwrap();
            let p = probe_rip(&a, &basis, 2, 500, seed).unwrap();
            assert!(p.delta_hat <= e.delta_hat + 1e-10);
            assert!(p.min_ratio >= e.min_ratio - 1e-10);
            assert!(p.max_ratio <= e.max_ratio + 1e-10);
        }
    }

    #[test]
    fn scale_consistency() {
        let a = random_operator(8, 12, 4);
        let basis = SparsityBasis::canonical(12);
        let e = exact_rip(&a, &basis, 2).unwrap();
        let e3 = exact_rip(&(&a * 3.0), &basis, 2).unwrap();
        assert!((e3.c_hat - 9.0 * e.c_hat).abs() < 1e-10 * e3.c_hat);
        assert!((e3.delta_hat - e.delta_hat).abs() < 1e-10);
    }

    #[test]
    fn probe_is_deterministic() {
        let a = random_operator(16, 64, 5);
        let basis = SparsityBasis::canonical(64);
        let p1 = probe_rip(&a, &basis, 4, 300, 9).unwrap();
        let p2 = probe_rip(&a, &basis, 4, 300, 9).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn guards() {
        let a = random_operator(8, 12, 4);
        let basis = SparsityBasis::canonical(12);
        assert!(exact_rip(&a, &basis, 0).is_err());
        assert!(exact_rip(&a, &basis, 13).is_err());
        assert!(probe_rip(&a, &basis, 2, 99, 0).is_err());
        let wide = random_operator(8, 200, 4);
        assert!(matches!(
            exact_rip(&wide, &SparsityBasis::canonical(200), 4),
            Err(Error::TooManySupports { .. })
        ));
    }

    #[test]
    fn symmetric_topology_conditions_worse() {
        let basis = SparsityBasis::canonical(128);
        let mut worse = 0;
        for seed in 0..5 {
            let sym = Network::build(&NetworkSpec::new(32, Topology::Symmetric, 1.0, seed))
                .unwrap()
                .assemble_operator(128)
                .unwrap()
                .matrix;
            let orth = random_operator(32, 128, seed);
            let ds = probe_rip(&sym, &basis, 4, 400, seed).unwrap().delta_hat;
            let d0 = probe_rip(&orth, &basis, 4, 400, seed).unwrap().delta_hat;
            if ds > d0 {
                worse += 1;
            }
        }
        assert_eq!(worse, 5);
    }
}
