use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::svg::Heatmap;
use super::{derive_seed, num, observe, write_csv, write_text, ExperimentConfig};
use crate::bases::{make_sparse_signal, BasisKind, SparsityBasis};
use crate::error::Result;
use crate::network::Network;
use crate::solver::{solve_bpdn, RecoveryProblem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseCell {
    pub basis: BasisKind,
    pub ratio_mn: f64,
    pub ratio_km: f64,
    pub nodes: usize,
    pub sparsity: usize,
    pub trials: usize,
    pub converged: usize,
    pub mean_rmse: f64,
    pub median_rmse: f64,
    pub min_rmse: f64,
    pub max_rmse: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub signal_length: usize,
    pub pass_threshold: f64,
    pub ratios_mn: Vec<f64>,
    pub ratios_km: Vec<f64>,
    pub bases: Vec<BasisKind>,
    /// Ordered by basis, then `ratio_km`, then `ratio_mn`.
    pub cells: Vec<PhaseCell>,
}

/// Even node count closest to `ratio * n`, at least 2.
pub(crate) fn cell_nodes(ratio: f64, n: usize) -> usize {
    (((ratio * n as f64) / 2.0).round() as usize).max(1) * 2
}

pub(crate) fn cell_sparsity(ratio: f64, nodes: usize, n: usize) -> usize {
    ((ratio * nodes as f64).round() as usize).clamp(1, n)
}

struct TrialOutcome {
    rmse: f64,
    converged: bool,
}

/// Mean recovery error over a grid of measurement and sparsity ratios.
///
/// Within a grid point and trial every basis sees the same network, the
/// same coefficient draw and the same noise.
pub fn run_phase_diagram(config: &ExperimentConfig) -> Result<PhaseResult> {
    config.validate()?;
    let n = config.signal_length;
    let grid = &config.phase;
    let bases: Vec<SparsityBasis> = grid
        .bases
        .iter()
        .map(|&k| SparsityBasis::with_levels(k, n, config.levels))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = (0..grid.ratios_mn.len())
        .flat_map(|i| {
            (0..grid.ratios_km.len()).flat_map(move |j| (0..config.trials).map(move |t| (i, j, t)))
        })
        .collect();

    let outcomes: Vec<Vec<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(i, j, t)| {
            let tag = [i as u64, j as u64, t as u64];
            let m = cell_nodes(grid.ratios_mn[i], n);
            let k = cell_sparsity(grid.ratios_km[j], m, n);
            let mut spec = config.network.clone();
            spec.nodes = m;
            spec.seed = derive_seed(config.seed, &[0, tag[0], tag[1], tag[2]]);
            let network = Network::build(&spec)?;
            let ensemble = network.assemble_operator(n)?;
            bases
                .iter()
                .map(|basis| {
                    let signal = make_sparse_signal(
                        basis,
                        k,
                        config.amplitude,
                        derive_seed(config.seed, &[1, tag[0], tag[1], tag[2]]),
                    )?;
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        config.seed,
                        &[2, tag[0], tag[1], tag[2]],
                    ));
                    let obs = observe(
                        &network,
                        &signal.samples,
                        config.noise_target,
                        config.pilot_draws,
                        &mut rng,
                    )?;
                    let problem = RecoveryProblem::from_ensemble(
                        &ensemble,
                        *basis,
                        obs.state.as_slice(),
                        obs.noise_norm,
                    )?
                    .with_settings(config.solver);
                    let report = solve_bpdn(&problem)?.with_truth(&signal.samples)?;
                    Ok(TrialOutcome {
                        rmse: report.rmse_vs_truth.unwrap_or(f64::NAN),
                        converged: report.converged,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (b, &kind) in grid.bases.iter().enumerate() {
        for (j, &km) in grid.ratios_km.iter().enumerate() {
            for (i, &mn) in grid.ratios_mn.iter().enumerate() {
                let mut errs: Vec<f64> = Vec::with_capacity(config.trials);
                let mut converged = 0;
                for t in 0..config.trials {
                    let job = (i * grid.ratios_km.len() + j) * config.trials + t;
                    let o = &outcomes[job][b];
                    errs.push(o.rmse);
                    converged += usize::from(o.converged);
                }
                errs.sort_by(f64::total_cmp);
                let mean = errs.iter().sum::<f64>() / errs.len() as f64;
                let mid = errs.len() / 2;
                let median = if errs.len() % 2 == 1 {
                    errs[mid]
                } else {
                    0.5 * (errs[mid - 1] + errs[mid])
                };
                let nodes = cell_nodes(mn, n);
                cells.push(PhaseCell {
                    basis: kind,
                    ratio_mn: mn,
                    ratio_km: km,
                    nodes,
                    sparsity: cell_sparsity(km, nodes, n),
                    trials: config.trials,
                    converged,
                    mean_rmse: mean,
                    median_rmse: median,
                    min_rmse: errs[0],
                    max_rmse: errs[errs.len() - 1],
                    pass: mean <= grid.pass_threshold,
                });
            }
        }
    }
    Ok(PhaseResult {
        signal_length: n,
        pass_threshold: grid.pass_threshold,
        ratios_mn: grid.ratios_mn.clone(),
        ratios_km: grid.ratios_km.clone(),
        bases: grid.bases.clone(),
        cells,
    })
}

impl PhaseResult {
    pub fn cell(&self, basis: BasisKind, i_mn: usize, i_km: usize) -> Option<&PhaseCell> {
        let b = self.bases.iter().position(|&k| k == basis)?;
        let per_basis = self.ratios_mn.len() * self.ratios_km.len();
        self.cells
            .get(b * per_basis + i_km * self.ratios_mn.len() + i_mn)
    }

    pub fn cells_for(&self, basis: BasisKind) -> impl Iterator<Item = &PhaseCell> {
        self.cells.iter().filter(move |c| c.basis == basis)
    }

    /// Writes the cell table and one heatmap per basis.
    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        let rows: Vec<Vec<String>> = self
            .cells
            .iter()
            .map(|c| {
                vec![
                    c.basis.to_string(),
                    num(c.ratio_mn),
                    num(c.ratio_km),
                    c.nodes.to_string(),
                    c.sparsity.to_string(),
                    c.trials.to_string(),
                    c.converged.to_string(),
                    num(c.mean_rmse),
                    num(c.median_rmse),
                    num(c.min_rmse),
                    num(c.max_rmse),
                    c.pass.to_string(),
                ]
            })
            .collect();
        let mut outputs = vec![write_csv(
            dir,
            "phase_diagram.csv",
            &[
                "basis",
                "ratio_mn",
                "ratio_km",
                "nodes",
                "sparsity",
                "trials",
                "converged",
                "mean_rmse",
                "median_rmse",
                "min_rmse",
                "max_rmse",
                "pass",
            ],
            &rows,
        )?];
        for &kind in &self.bases {
            let grid = |f: &dyn Fn(&PhaseCell) -> f64| -> Vec<Vec<f64>> {
                (0..self.ratios_km.len())
                    .map(|j| {
                        (0..self.ratios_mn.len())
                            .map(|i| f(self.cell(kind, i, j).expect("cell exists")))
                            .collect()
                    })
                    .collect()
            };
            let values = grid(&|c| c.mean_rmse);
            let pass = grid(&|c| if c.pass { 1.0 } else { 0.0 })
                .into_iter()
                .map(|row| row.into_iter().map(|v| v > 0.5).collect())
                .collect();
            let map = Heatmap {
                title: format!("Mean rMSE, {kind} basis, N = {}", self.signal_length),
                x_label: "M/N".into(),
                y_label: "k/M".into(),
                xs: self.ratios_mn.clone(),
                ys: self.ratios_km.clone(),
                values,
                pass,
                log_range: (-4.0, 0.0),
            };
            outputs.push(write_text(
                dir,
                &format!("phase_diagram_{kind}.svg"),
                &map.render(),
            )?);
        }
        Ok(outputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_dimensions() {
        assert_eq!(cell_nodes(0.125, 256), 32);
        assert_eq!(cell_nodes(1.0, 256), 256);
        assert_eq!(cell_nodes(0.001, 256), 2);
        assert_eq!(cell_nodes(0.3, 100), 30);
        assert_eq!(cell_sparsity(0.05, 32, 256), 2);
        assert_eq!(cell_sparsity(0.001, 32, 256), 1);
    }
}
