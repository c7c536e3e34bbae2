use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::svg::{LinePlot, Series, PALETTE};
use super::{derive_seed, num, observe, write_csv, write_text, ExperimentConfig};
use crate::bases::make_sparse_signal;
use crate::error::Result;
use crate::network::Network;
use crate::solver::{solve_bpdn, RecoveryProblem, RecoveryReport};

#[derive(Debug, Clone, Serialize)]
pub struct FiniteResult {
    pub report: RecoveryReport,
    /// Input window, most recent sample first.
    pub truth: Vec<f64>,
    pub support: Vec<usize>,
    pub noise_norm: f64,
}

/// Drives one network with a full-length sparse input and recovers the
/// whole history from the final state.
pub fn run_finite_recovery(config: &ExperimentConfig) -> Result<FiniteResult> {
    config.validate()?;
    let basis = config.basis()?;
    let mut spec = config.network.clone();
    spec.seed = derive_seed(config.seed, &[0]);
    let network = Network::build(&spec)?;
    let signal = make_sparse_signal(
        &basis,
        config.sparsity,
        config.amplitude,
        derive_seed(config.seed, &[1]),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[2]));
    let obs = observe(
        &network,
        &signal.samples,
        config.noise_target,
        config.pilot_draws,
        &mut rng,
    )?;
    let ensemble = network.assemble_operator(config.signal_length)?;
    let problem =
        RecoveryProblem::from_ensemble(&ensemble, basis, obs.state.as_slice(), obs.noise_norm)?
            .with_settings(config.solver);
    let report = solve_bpdn(&problem)?.with_truth(&signal.samples)?;
    Ok(FiniteResult {
        report,
        truth: signal.samples,
        support: signal.support,
        noise_norm: obs.noise_norm,
    })
}

impl FiniteResult {
    /// Writes the sequences (chronological order), an overlay plot and the
    /// solver report.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let n = self.truth.len();
        let rows: Vec<Vec<String>> = (0..n)
            .map(|i| {
                let lag = n - 1 - i;
                vec![
                    (i + 1).to_string(),
                    num(self.truth[lag]),
                    num(self.report.signal[lag]),
                ]
            })
            .collect();
        let csv = write_csv(
            dir,
            "finite_recovery.csv",
            &["t", "truth", "recovered"],
            &rows,
        )?;

        let chrono = |v: &[f64]| -> Vec<(f64, f64)> {
            (0..n).map(|i| ((i + 1) as f64, v[n - 1 - i])).collect()
        };
        let mut truth = Series::new("input", chrono(&self.truth), PALETTE[0]);
        truth.markers = false;
        let mut rec = Series::new("recovered", chrono(&self.report.signal), PALETTE[1]);
        rec.markers = false;
        rec.dashed = true;
        let plot = LinePlot {
            title: format!(
                "Recovered input (rMSE {:.2e})",
                self.report.rmse_vs_truth.unwrap_or(f64::NAN)
            ),
            x_label: "time step".into(),
            y_label: "input".into(),
            log_y: false,
            series: vec![truth, rec],
        };
        let svg = write_text(dir, "finite_recovery.svg", &plot.render())?;
        let json = write_text(
            dir,
            "finite_recovery_report.json",
            &serde_json::to_string_pretty(&self.report)?,
        )?;
        Ok(vec![csv, svg, json])
    }
}
