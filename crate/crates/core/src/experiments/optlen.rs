use std::fs::File;
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::svg::{LinePlot, Series, PALETTE};
use super::{derive_seed, num, observe, write_csv, write_text, ExperimentConfig};
use crate::bases::{make_sparse_signal, SparsityBasis};
use crate::bounds::{
    bound_curve, calibrate_rip, geometric_grid, proxy_signal, recovery_bound, BoundCurve,
    BoundParams,
};
use crate::error::Result;
use crate::network::Network;
use crate::rip::RipEstimate;
use crate::solver::{solve_bpdn, RecoveryProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptLenRow {
    pub length: usize,
    /// Mean of `||D s_L - p_hat||` over trials.
    pub error_mean: f64,
    pub error_min: f64,
    pub error_max: f64,
    /// Mean of the error relative to `||D s_L||`.
    pub rel_mean: f64,
    pub trials: usize,
    pub converged: usize,
    /// Bound evaluated at this length, when `q < 1`.
    pub bound_total: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptLenResult {
    pub rows: Vec<OptLenRow>,
    /// Simulated length with the smallest mean error.
    pub l_opt: usize,
    /// Whether `l_opt` is away from both ends of the simulated lengths.
    pub interior: bool,
    pub calibration: Option<RipEstimate>,
    pub bound: Option<BoundCurve>,
}

/// Recovers the decayed proxy `D s_L` of a long input from the final state
/// for each window length `L`, with the residual of the truncated model as
/// the noise budget.
pub fn run_optimal_length(config: &ExperimentConfig) -> Result<OptLenResult> {
    config.validate()?;
    let n = config.signal_length;
    let q = config.network.decay;
    let lengths = &config.optlen.lengths;
    let history_basis = SparsityBasis::canonical(n);
    let trials = config.trials;

    let mut errors = vec![vec![0.0; trials]; lengths.len()];
    let mut rel = vec![vec![0.0; trials]; lengths.len()];
    let mut converged = vec![0usize; lengths.len()];
    let mut s_max = 0.0f64;
    let mut eps_max = 0.0f64;
    let mut first_network = None;

    for t in 0..trials {
        let mut spec = config.network.clone();
        spec.seed = derive_seed(config.seed, &[0, t as u64]);
        let network = Network::build(&spec)?;
        let signal = make_sparse_signal(
            &history_basis,
            config.sparsity,
            config.amplitude,
            derive_seed(config.seed, &[1, t as u64]),
        )?;
        s_max = signal.samples.iter().fold(s_max, |m, v| m.max(v.abs()));
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[2, t as u64]));
        let obs = observe(
            &network,
            &signal.samples,
            config.noise_target,
            config.pilot_draws,
            &mut rng,
        )?;
        eps_max = eps_max.max(obs.sigma * (network.nodes() as f64).sqrt());
        let full = network
            .assemble_operator(*lengths.iter().max().expect("validated"))?
            .matrix;

        let per_length: Vec<(f64, f64, bool)> = lengths
            .par_iter()
            .map(|&l| {
                let mut op = full.columns(0, l).clone_owned();
                let mut w = 1.0;
                for j in 0..l {
                    op.column_mut(j).scale_mut(1.0 / w);
                    w *= q;
                }
                let proxy = DVector::from_vec(proxy_signal(&signal.samples, q, l)?);
                let budget = (&obs.state - &op * &proxy).norm();
                let problem = RecoveryProblem::new(
                    &op,
                    SparsityBasis::canonical(l),
                    obs.state.as_slice(),
                    budget,
                )?
                .with_settings(config.solver);
                let report = solve_bpdn(&problem)?;
                let err = (DVector::from_column_slice(&report.signal) - &proxy).norm();
                let scale = proxy.norm();
                Ok((
                    err,
                    if scale > 0.0 { err / scale } else { err },
                    report.converged,
                ))
            })
            .collect::<Result<_>>()?;
        for (i, (e, r, c)) in per_length.into_iter().enumerate() {
            errors[i][t] = e;
            rel[i][t] = r;
            converged[i] += usize::from(c);
        }
        if t == 0 {
            first_network = Some(network);
        }
    }

    let network = first_network.expect("at least one trial");
    let (calibration, params) = if q < 1.0 {
        let est = calibrate_rip(
            &network,
            config.optlen.calibration_sparsity,
            config.optlen.calibration_samples,
            derive_seed(config.seed, &[3]),
        )?;
        let mut p = BoundParams::new(
            network.nodes(),
            q,
            config.sparsity as f64,
            s_max.max(f64::MIN_POSITIVE),
            est.delta_hat,
            est.c_hat,
        );
        p.eps_max = eps_max;
        p.alpha = config.optlen.alpha;
        p.beta = config.optlen.beta;
        p.rho = config.optlen.rho;
        p.u_norm = network.eigenvector_norm();
        (Some(est), Some(p))
    } else {
        (None, None)
    };
    let params = params.filter(|p| p.validate().is_ok());

    let rows: Vec<OptLenRow> = lengths
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let e = &errors[i];
            Ok(OptLenRow {
                length: l,
                error_mean: e.iter().sum::<f64>() / trials as f64,
                error_min: e.iter().copied().fold(f64::INFINITY, f64::min),
                error_max: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                rel_mean: rel[i].iter().sum::<f64>() / trials as f64,
                trials,
                converged: converged[i],
                bound_total: match &params {
                    Some(p) if l >= 2 => Some(recovery_bound(p, l as f64)?.total),
                    _ => None,
                },
            })
        })
        .collect::<Result<_>>()?;
    let best = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.error_mean.total_cmp(&b.1.error_mean))
        .map(|(i, _)| i)
        .expect("lengths validated nonempty");
    let bound = match &params {
        Some(p) => {
            let hi = (*lengths.iter().max().expect("nonempty") as f64).max(3.0);
            Some(bound_curve(
                p,
                &geometric_grid(2.0, hi, config.optlen.bound_grid.max(2)),
            )?)
        }
        None => None,
    };
    Ok(OptLenResult {
        l_opt: rows[best].length,
        interior: best != 0 && best != rows.len() - 1,
        rows,
        calibration,
        bound,
    })
}

impl OptLenResult {
    /// Writes the error table, the bound curve (if any) and a plot.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.length.to_string(),
                    num(r.error_mean),
                    num(r.error_min),
                    num(r.error_max),
                    num(r.rel_mean),
                    r.converged.to_string(),
                    r.trials.to_string(),
                    r.bound_total.map(num).unwrap_or_default(),
                ]
            })
            .collect();
        let mut outputs = vec![write_csv(
            dir,
            "optimal_length.csv",
            &[
                "L",
                "error_mean",
                "error_min",
                "error_max",
                "rel_mean",
                "converged",
                "trials",
                "bound_total",
            ],
            &rows,
        )?];

        let mut err = Series::new(
            "simulated error",
            self.rows
                .iter()
                .map(|r| (r.length as f64, r.error_mean))
                .collect(),
            PALETTE[0],
        );
        err.error_bars = Some(
            self.rows
                .iter()
                .map(|r| (r.error_min, r.error_max))
                .collect(),
        );
        let mut plot = LinePlot {
            title: format!(
                "Proxy recovery error vs window length (best L = {})",
                self.l_opt
            ),
            x_label: "L".into(),
            y_label: "||D s - p_hat||".into(),
            log_y: true,
            series: vec![err],
        };
        if let Some(curve) = &self.bound {
            let name = "bound_curve.csv";
            curve.write_csv(File::create(dir.join(name))?)?;
            outputs.push(name.to_string());
            let mut b = Series::new(
                "bound",
                self.rows
                    .iter()
                    .filter_map(|r| r.bound_total.map(|v| (r.length as f64, v)))
                    .collect(),
                PALETTE[1],
            );
            b.dashed = true;
            plot.series.push(b);
            let full = LinePlot {
                title: "Recovery bound".into(),
                x_label: "L".into(),
                y_label: "bound".into(),
                log_y: true,
                series: vec![{
                    let mut s = Series::new(
                        "total",
                        curve.points.iter().map(|p| (p.l, p.total)).collect(),
                        PALETTE[1],
                    );
                    s.markers = false;
                    s
                }],
            };
            outputs.push(write_text(dir, "bound_curve.svg", &full.render())?);
        }
        outputs.push(write_text(dir, "optimal_length.svg", &plot.render())?);
        Ok(outputs)
    }
}
