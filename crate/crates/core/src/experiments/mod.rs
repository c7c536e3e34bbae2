//! Seeded experiment runners writing CSV tables and SVG figures.
//!
//! Every random draw derives from the config's root seed through
//! [`derive_seed`], and parallel work is merged by index, so a config and
//! seed always reproduce the same bytes.

mod config;
mod finite;
mod optlen;
mod phase;
pub mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind, OptLenSettings, PhaseGrid, Scale};
pub use finite::{run_finite_recovery, FiniteResult};
pub use optlen::{run_optimal_length, OptLenResult, OptLenRow};
pub use phase::{run_phase_diagram, PhaseCell, PhaseResult};

use crate::error::Result;
use crate::network::Network;

/// Mixes `parts` into `base` (SplitMix64 finalizer per step).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    parts.iter().fold(mix(base), |acc, &p| mix(mix(acc) ^ p))
}

/// Final network state after driving it with a window (most recent sample
/// first), plus the accumulated noise it carries.
#[derive(Debug, Clone)]
pub struct Observation {
    pub state: DVector<f64>,
    pub noise_norm: f64,
    /// Per-step noise standard deviation.
    pub sigma: f64,
}

pub fn observe<R: Rng + ?Sized>(
    network: &Network,
    window: &[f64],
    noise_target: f64,
    pilot_draws: usize,
    rng: &mut R,
) -> Result<Observation> {
    let inputs: Vec<f64> = window.iter().rev().copied().collect();
    let clean = network.final_state(&inputs, None)?;
    if noise_target <= 0.0 {
        return Ok(Observation {
            state: clean,
            noise_norm: 0.0,
            sigma: 0.0,
        });
    }
    let sigma = network.calibrate_noise(inputs.len(), noise_target, pilot_draws, rng);
    let noise = network.draw_noise(inputs.len(), sigma, rng);
    let accumulated = network.accumulated_noise(&noise);
    Ok(Observation {
        noise_norm: accumulated.norm(),
        state: clean + accumulated,
        sigma,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub kind: ExperimentKind,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    /// Solves that hit the iteration limit without a certificate.
    pub solver_failures: usize,
    pub summary: serde_json::Value,
}

pub(crate) fn write_csv(
    dir: &Path,
    name: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<String> {
    let mut w = csv::Writer::from_path(dir.join(name))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(name.to_string())
}

pub(crate) fn write_text(dir: &Path, name: &str, text: &str) -> Result<String> {
    fs::write(dir.join(name), text)?;
    Ok(name.to_string())
}

pub(crate) fn num(v: f64) -> String {
    v.to_string()
}

/// Runs the experiment selected by `config.kind` and writes its artifacts.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    match config.kind {
        ExperimentKind::FiniteRecovery => {
            let r = run_finite_recovery(config)?;
            let outputs = r.write(out_dir)?;
            Ok(RunOutput {
                kind: config.kind,
                outputs,
                solver_failures: usize::from(!r.report.converged),
                summary: serde_json::json!({
                    "rmse": r.report.rmse_vs_truth,
                    "converged": r.report.converged,
                    "iterations": r.report.iterations,
                }),
            })
        }
        ExperimentKind::PhaseDiagram => {
            let r = run_phase_diagram(config)?;
            let outputs = r.write(out_dir)?;
            let failures = r.cells.iter().map(|c| c.trials - c.converged).sum();
            let passing: usize = r.cells.iter().filter(|c| c.pass).count();
            Ok(RunOutput {
                kind: config.kind,
                outputs,
                solver_failures: failures,
                summary: serde_json::json!({ "cells": r.cells.len(), "passing_cells": passing }),
            })
        }
        ExperimentKind::OptimalLength => {
            let r = run_optimal_length(config)?;
            let outputs = r.write(out_dir)?;
            let failures = r.rows.iter().map(|row| row.trials - row.converged).sum();
            Ok(RunOutput {
                kind: config.kind,
                outputs,
                solver_failures: failures,
                summary: serde_json::json!({
                    "l_opt": r.l_opt,
                    "interior": r.interior,
                    "bound_local_minima": r.bound.as_ref().map(|b| b.local_minima()),
                }),
            })
        }
    }
}

/// Where a config's artifacts go when no directory is given.
pub fn default_output_dir(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}", config.kind)))
}
