//! Frozen values from independent oracles. A change here means the random
//! streams or the numerics moved.

use nalgebra::{DMatrix, SymmetricEigen};
use stmcap::bases::SparsityBasis;
use stmcap::bounds::{calibrate_rip, crossing_length, k_star, BoundParams};
use stmcap::network::{Network, NetworkSpec};
use stmcap::rip::exact_rip;

/// Exact 2-sparse delta for N=12, M=8, q=1, seeds 0..20.
const PAIR_DELTAS: [f64; 20] = [
    0.809014732663,
    0.590960870610,
    0.773595812401,
    0.735875124891,
    0.670357324726,
    0.548787037451,
    0.516380643135,
    0.455598934202,
    0.747844241280,
    0.524192254257,
    0.544183361387,
    0.589260249413,
    0.579699891085,
    0.560282986407,
    0.580355790738,
    0.555812574678,
    0.875854489968,
    0.651974567880,
    0.611172321393,
    0.796989779950,
];

const FIG4_DELTA: f64 = 0.459808837427;
const FIG4_C: f64 = 0.683635515510;
const FIG4_CROSSING: f64 = 2.200126997602;

/// Gram eigenvalues over every column pair.
fn pair_oracle(a: &DMatrix<f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..a.ncols() {
        for j in i + 1..a.ncols() {
            let sub =
                DMatrix::from_columns(&[a.column(i).clone_owned(), a.column(j).clone_owned()]);
            let e = SymmetricEigen::new(sub.transpose() * sub).eigenvalues;
            lo = lo.min(e.min());
            hi = hi.max(e.max());
        }
    }
    (hi - lo) / (hi + lo)
}

#[test]
fn pair_delta_corpus() {
    for (seed, &frozen) in PAIR_DELTAS.iter().enumerate() {
        let net = Network::build(&NetworkSpec::random_orthogonal(8, 1.0, seed as u64)).unwrap();
        let a = net.assemble_operator(12).unwrap().matrix;
        let exact = exact_rip(&a, &SparsityBasis::canonical(12), 2)
            .unwrap()
            .delta_hat;
        assert!((exact - pair_oracle(&a)).abs() < 1e-10, "seed {seed}");
        assert!((exact - frozen).abs() < 1e-9, "seed {seed}: {exact}");
    }
}

#[test]
fn calibrated_crossing_length() {
    let net = Network::build(&NetworkSpec::random_orthogonal(500, 0.999, 0)).unwrap();
    let est = calibrate_rip(&net, 2, 1000, 0).unwrap();
    assert!((est.delta_hat - FIG4_DELTA).abs() < 1e-9);
    assert!((est.c_hat - FIG4_C).abs() < 1e-9);
    let p = BoundParams::new(500, 0.999, 400.0, 1.0, est.delta_hat, est.c_hat);
    let (mut lo, mut hi) = (2.0f64, 1e9f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if k_star(&p, mid).unwrap() >= p.k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let closed = crossing_length(&p).unwrap();
    assert!((closed - lo).abs() < 1e-9 * lo);
    assert!((closed - FIG4_CROSSING).abs() < 1e-8);
}
