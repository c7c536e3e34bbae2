//! Capacity and error bounds for leaky networks (`q < 1`).
//!
//! With a recovery window of length `L` the supportable sparsity is
//! `k* = M delta^2 / (c log^rho L)` and the proxy-recovery error is bounded by
//! an omission term, an approximation term that switches on once `k* < k`,
//! and an accumulated-noise term that does not depend on `L`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bases::SparsityBasis;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::rip::{probe_rip, RipEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub nodes: usize,
    pub q: f64,
    pub k: f64,
    pub s_max: f64,
    #[serde(default)]
    pub eps_max: f64,
    pub delta: f64,
    pub c: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_constant")]
    pub alpha: f64,
    #[serde(default = "default_constant")]
    pub beta: f64,
    #[serde(default = "default_u_norm")]
    pub u_norm: f64,
}

fn default_rho() -> f64 {
    4.0
}

fn default_constant() -> f64 {
    4.0
}

fn default_u_norm() -> f64 {
    1.0
}

impl BoundParams {
    /// Parameters with `rho = 4`, `alpha = beta = 4`, unitary eigenvectors and
    /// no noise.
    pub fn new(nodes: usize, q: f64, k: f64, s_max: f64, delta: f64, c: f64) -> Self {
        Self {
            nodes,
            q,
            k,
            s_max,
            eps_max: 0.0,
            delta,
            c,
            rho: default_rho(),
            alpha: default_constant(),
            beta: default_constant(),
            u_norm: default_u_norm(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} out of range: {v}")));
        if self.nodes == 0 {
            return bad("node count", 0.0);
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad("decay q (must lie in (0, 1))", self.q);
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta (must lie in (0, 1))", self.delta);
        }
        if !(self.c > 0.0) {
            return bad("c (must be positive)", self.c);
        }
        if !(self.rho >= 1.0) {
            return bad("rho (must be at least 1)", self.rho);
        }
        if !(self.s_max > 0.0) {
            return bad("s_max (must be positive)", self.s_max);
        }
        if !(self.k >= 0.0) {
            return bad("k", self.k);
        }
        if !(self.eps_max >= 0.0 && self.alpha >= 0.0 && self.beta >= 0.0 && self.u_norm > 0.0) {
            return Err(Error::InvalidArgument(
                "eps_max, alpha and beta must be nonnegative and u_norm positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_length(l: f64) -> Result<()> {
    if !(l >= 2.0) {
        return Err(Error::InvalidArgument(format!(
            "recovery length must be at least 2, got {l}"
        )));
    }
    Ok(())
}

/// `M delta^2 / (c log^rho L)`, real-valued.
pub fn k_star(params: &BoundParams, l: f64) -> Result<f64> {
    check_length(l)?;
    Ok(params.nodes as f64 * params.delta * params.delta / (params.c * l.ln().powf(params.rho)))
}

/// Length at which `k*` falls to `k`; `None` if `k = 0`.
pub fn crossing_length(params: &BoundParams) -> Option<f64> {
    if params.k <= 0.0 {
        return None;
    }
    let log_l = (params.nodes as f64 * params.delta * params.delta / (params.c * params.k))
        .powf(1.0 / params.rho);
    Some(log_l.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub l: f64,
    pub k_star: f64,
    /// Inputs older than the window.
    pub term_omission: f64,
    /// Sparsity beyond `k*`.
    pub term_approximation: f64,
    pub term_noise: f64,
    pub total: f64,
}

/// Evaluates the three-term bound at window length `l`.
pub fn recovery_bound(params: &BoundParams, l: f64) -> Result<BoundPoint> {
    params.validate()?;
    let ks = k_star(params, l)?;
    let q = params.q;
    let term_omission = params.beta * omission_noise_bound(params, l)?;
    let term_approximation = if ks >= params.k {
        0.0
    } else {
        params.beta * params.s_max / ks.sqrt() * (q.powf(ks) - q.powf(params.k)) / (1.0 - q)
    };
    let term_noise = accumulated_noise_bound(params)?;
    Ok(BoundPoint {
        l,
        k_star: ks,
        term_omission,
        term_approximation,
        term_noise,
        total: term_omission + term_approximation + term_noise,
    })
}

/// Norm bound on the contribution of inputs older than `l` steps,
/// `s_max ||U|| q^L / (1 - q)`.
pub fn omission_noise_bound(params: &BoundParams, l: f64) -> Result<f64> {
    params.validate()?;
    Ok(params.s_max * params.u_norm * params.q.powf(l) / (1.0 - params.q))
}

/// The same contribution when the input started `total_length` steps ago.
pub fn omission_noise_bound_finite(params: &BoundParams, l: f64, total_length: f64) -> Result<f64> {
    params.validate()?;
    if total_length < l {
        return Err(Error::InvalidArgument(format!(
            "total length {total_length} is shorter than the window {l}"
        )));
    }
    let q = params.q;
    Ok(params.s_max * params.u_norm * (q.powf(l) - q.powf(total_length)) / (1.0 - q))
}

/// `alpha eps_max ||U|| q / (1 - q)`.
pub fn accumulated_noise_bound(params: &BoundParams) -> Result<f64> {
    if !(params.q < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "accumulated noise is unbounded for q = {}",
            params.q
        )));
    }
    params.validate()?;
    let q = params.q;
    Ok(params.alpha * params.eps_max * params.u_norm * q / (1.0 - q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub params: BoundParams,
    pub points: Vec<BoundPoint>,
}

impl BoundCurve {
    pub fn lengths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.l).collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.total).collect()
    }

    /// Grid lengths where the first difference of the total turns from
    /// negative to nonnegative.
    pub fn local_minima(&self) -> Vec<f64> {
        local_minima(&self.totals())
            .into_iter()
            .map(|i| self.points[i].l)
            .collect()
    }

    /// CSV with columns `L,k_star,term1,term2,term3,total`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["L", "k_star", "term1", "term2", "term3", "total"])?;
        for p in &self.points {
            w.write_record(&[
                p.l.to_string(),
                p.k_star.to_string(),
                p.term_omission.to_string(),
                p.term_approximation.to_string(),
                p.term_noise.to_string(),
                p.total.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn local_minima(values: &[f64]) -> Vec<usize> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] < values[i - 1] && values[i] <= values[i + 1])
        .collect()
}

pub fn bound_curve(params: &BoundParams, lengths: &[f64]) -> Result<BoundCurve> {
    let points = lengths
        .iter()
        .map(|&l| recovery_bound(params, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve {
        params: *params,
        points,
    })
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// `points` log-spaced values from `lo` to `hi` inclusive (`lo > 0`).
pub fn geometric_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = linear_grid(a, b, points)
        .into_iter()
        .map(f64::exp)
        .collect();
    if let Some(last) = g.last_mut() {
        *last = if points == 1 { lo } else { hi };
    }
    if let Some(first) = g.first_mut() {
        *first = lo;
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalLength {
    pub l_opt: f64,
    pub total: f64,
    /// Whether the grid argmin is away from both endpoints.
    pub interior: bool,
    pub local_minima: Vec<f64>,
    pub curve: BoundCurve,
}

/// Grid search for the window length minimizing the bound.
pub fn optimal_recovery_length(
    params: &BoundParams,
    range: (f64, f64),
    grid: usize,
) -> Result<OptimalLength> {
    let (lo, hi) = range;
    if !(hi > lo) {
        return Err(Error::InvalidArgument(format!(
            "empty length range [{lo}, {hi}]"
        )));
    }
    if grid < 10 {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least 10 points, got {grid}"
        )));
    }
    let curve = bound_curve(params, &linear_grid(lo, hi, grid))?;
    let totals = curve.totals();
    let (idx, &total) = totals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    Ok(OptimalLength {
        l_opt: curve.points[idx].l,
        total,
        interior: idx != 0 && idx != totals.len() - 1,
        local_minima: curve.local_minima(),
        curve,
    })
}

/// Decayed window `D s`: entry `t` is `q^t * history[t]`, where `history` is
/// ordered most recent sample first.
pub fn proxy_signal(history: &[f64], q: f64, l: usize) -> Result<Vec<f64>> {
    if l > history.len() {
        return Err(Error::LengthMismatch {
            expected: l,
            found: history.len(),
        });
    }
    let mut w = 1.0;
    Ok(history[..l]
        .iter()
        .map(|s| {
            let v = w * s;
            w *= q;
            v
        })
        .collect())
}

/// Probes the network's square operator (`L = M`) in the canonical basis to
/// obtain `(delta, c)` for the bound.
pub fn calibrate_rip(
    network: &Network,
    sparsity: usize,
    samples: usize,
    seed: u64,
) -> Result<RipEstimate> {
    let m = network.nodes();
    let a = network.assemble_operator(m)?.matrix;
    probe_rip(
        &a,
        &SparsityBasis::canonical(m),
        sparsity.clamp(1, m),
        samples,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig4(delta: f64, c: f64) -> BoundParams {
        BoundParams::new(500, 0.999, 400.0, 1.0, delta, c)
    }

    #[test]
    fn grids() {
        let g = geometric_grid(2.0, 8000.0, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 2.0);
        assert_eq!(g[4], 8000.0);
        for w in g.windows(3) {
            assert!((w[1] / w[0] - w[2] / w[1]).abs() < 1e-12);
        }
        assert_eq!(linear_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn k_star_values() {
        let p = fig4(0.5, 1.0);
        assert!((k_star(&p, std::f64::consts::E).unwrap() - 125.0).abs() < 1e-12);
        let p2 = BoundParams { nodes: 1000, ..p };
        let l = 300.0;
        assert!((k_star(&p2, l).unwrap() - 2.0 * k_star(&p, l).unwrap()).abs() < 1e-12);
        assert!(k_star(&p, 1.5).is_err());
    }

    #[test]
    fn crossing_matches_bisection() {
        let p = BoundParams::new(500, 0.999, 10.0, 1.0, 0.5, 1.0);
        let closed = crossing_length(&p).unwrap();
        let (mut lo, mut hi) = (2.0f64, 1e6f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if k_star(&p, mid).unwrap() > p.k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((closed - lo).abs() < 1e-6 * closed);
        assert!((k_star(&p, closed).unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn approximation_term_vanishes_above_k() {
        let p = BoundParams::new(500, 0.9, 2.0, 1.0, 0.9, 1.0);
        let cross = crossing_length(&p).unwrap();
        let below = recovery_bound(&p, cross * 0.9).unwrap();
        assert!(below.k_star >= p.k);
        assert_eq!(below.term_approximation, 0.0);
        let above = recovery_bound(&p, cross * 1.001).unwrap();
        assert!(above.term_approximation > 0.0);
        assert!(above.term_approximation < 1e-2);
    }

    #[test]
    fn small_q_omission() {
        let p = BoundParams::new(100, 0.1, 1.0, 1.0, 0.5, 1.0);
        let b = recovery_bound(&p, 50.0).unwrap();
        let expected = p.beta * 0.1f64.powi(50) / 0.9;
        assert!((b.term_omission - expected).abs() < 1e-12 * expected);
        assert!(b.term_omission < 1e-40 * p.beta);
    }

    #[test]
    fn omission_forms() {
        let p = BoundParams::new(100, 0.5, 1.0, 1.0, 0.5, 1.0);
        assert!((omission_noise_bound(&p, 10.0).unwrap() - 1.0 / 512.0).abs() < 1e-15);
        assert_eq!(omission_noise_bound(&p, 1e5).unwrap(), 0.0);
        let p9 = BoundParams { q: 0.9, ..p };
        let l = 30.0;
        let lim = omission_noise_bound(&p9, l).unwrap();
        let fin = omission_noise_bound_finite(&p9, l, l + 200.0).unwrap();
        assert!((lim - fin).abs() <= 0.9f64.powf(l + 200.0) / 0.1 + 1e-15);
        assert!(omission_noise_bound_finite(&p9, l, l - 1.0).is_err());
    }

    #[test]
    fn accumulated_noise_values() {
        let mut p = BoundParams::new(100, 0.5, 1.0, 1.0, 0.5, 1.0);
        assert_eq!(accumulated_noise_bound(&p).unwrap(), 0.0);
        p.eps_max = 1.0;
        p.alpha = 1.0;
        assert_eq!(accumulated_noise_bound(&p).unwrap(), 1.0);
        p.q = 0.9;
        let direct: f64 = (1..=10_000).map(|t| 0.9f64.powi(t)).sum();
        assert!((accumulated_noise_bound(&p).unwrap() - direct).abs() < 1e-6);
        p.q = 1.0;
        assert!(accumulated_noise_bound(&p).is_err());
    }

    #[test]
    fn fig4_shape() {
        let p = fig4(0.9, 1.5);
        let opt = optimal_recovery_length(&p, (100.0, 8000.0), 400).unwrap();
        assert!(opt.interior);
        assert!(opt.l_opt > 500.0);
        assert!(!opt.local_minima.is_empty());
        let far = recovery_bound(&p, 1e9).unwrap().total;
        let farther = recovery_bound(&p, 1e12).unwrap().total;
        assert!(far > opt.total && farther > far);
    }

    #[test]
    fn monotone_regime_is_not_interior() {
        let p = BoundParams::new(10_000, 0.9, 1.0, 1.0, 0.99, 1.0);
        let opt = optimal_recovery_length(&p, (10.0, 50.0), 41).unwrap();
        assert!(opt.curve.points.iter().all(|pt| pt.k_star >= p.k));
        assert!(!opt.interior);
        assert_eq!(opt.l_opt, 50.0);
    }

    #[test]
    fn grid_refinement_is_stable() {
        let p = fig4(0.9, 1.5);
        let coarse = optimal_recovery_length(&p, (100.0, 8000.0), 80).unwrap();
        let fine = optimal_recovery_length(&p, (100.0, 8000.0), 791).unwrap();
        let step = 7900.0 / 79.0;
        assert!((coarse.l_opt - fine.l_opt).abs() < step);
    }

    #[test]
    fn range_errors() {
        let p = fig4(0.9, 1.5);
        assert!(optimal_recovery_length(&p, (100.0, 100.0), 20).is_err());
        assert!(optimal_recovery_length(&p, (100.0, 200.0), 9).is_err());
        assert!(recovery_bound(&BoundParams { q: 1.0, ..p }, 10.0).is_err());
        assert!(recovery_bound(&BoundParams { delta: 1.0, ..p }, 10.0).is_err());
    }

    #[test]
    fn proxy_window() {
        let s = [1.0, 2.0, 3.0, 4.0];
        let d = proxy_signal(&s, 0.5, 3).unwrap();
        assert_eq!(d, vec![1.0, 1.0, 0.75]);
        assert!(proxy_signal(&s, 0.5, 5).is_err());
    }

    #[test]
    fn csv_columns() {
        let curve = bound_curve(&fig4(0.9, 1.5), &[100.0, 200.0]).unwrap();
        let mut buf = Vec::new();
        curve.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("L,k_star,term1,term2,term3,total\n"));
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #[test]
        fn k_star_nonincreasing(l in 2.0f64..1e6, dl in 0.0f64..1e4, delta in 0.01f64..0.99, c in 0.1f64..10.0) {
            let p = BoundParams::new(500, 0.99, 10.0, 1.0, delta, c);
            prop_assert!(k_star(&p, l + dl).unwrap() <= k_star(&p, l).unwrap());
        }

        #[test]
        fn noise_term_constant_in_l(l1 in 2.0f64..1e5, l2 in 2.0f64..1e5, eps in 0.0f64..1.0) {
            let p = BoundParams { eps_max: eps, ..BoundParams::new(100, 0.95, 5.0, 1.0, 0.5, 1.0) };
            prop_assert_eq!(recovery_bound(&p, l1).unwrap().term_noise, recovery_bound(&p, l2).unwrap().term_noise);
        }

        #[test]
        fn approximation_term_continuous_at_crossing(delta in 0.3f64..0.95, k in 1.0f64..20.0) {
            let p = BoundParams::new(2000, 0.99, k, 1.0, delta, 1.0);
            let cross = crossing_length(&p).unwrap();
            prop_assume!(cross > 3.0);
            let just_after = recovery_bound(&p, cross * (1.0 + 1e-9)).unwrap();
            prop_assert!(just_after.term_approximation < 1e-6 * p.beta / (1.0 - p.q));
        }
    }
}
