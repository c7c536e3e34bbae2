use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bases::{AmplitudeLaw, BasisKind, SparsityBasis, DEFAULT_LEVELS};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Topology};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FiniteRecovery,
    PhaseDiagram,
    OptimalLength,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FiniteRecovery => "finite_recovery",
            ExperimentKind::PhaseDiagram => "phase_diagram",
            ExperimentKind::OptimalLength => "optimal_length",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::InvalidArgument(format!(
                "unknown scale `{other}` (expected desk or paper)"
            ))),
        }
    }
}

/// Grid for the phase diagram. Each cell uses `M = ratio_mn * N` nodes
/// (rounded to an even count) and `k = ratio_km * M` nonzeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseGrid {
    pub ratios_mn: Vec<f64>,
    pub ratios_km: Vec<f64>,
    pub bases: Vec<BasisKind>,
    /// A cell passes when its mean relative error is at most this.
    pub pass_threshold: f64,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self {
            ratios_mn: (1..=8).map(|i| i as f64 / 8.0).collect(),
            ratios_km: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9],
            bases: BasisKind::ALL.to_vec(),
            pass_threshold: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptLenSettings {
    /// Recovery window lengths to simulate.
    pub lengths: Vec<usize>,
    /// Number of points on the logarithmic grid of the bound curve, which
    /// spans `[2, max(lengths)]`.
    pub bound_grid: usize,
    /// Support size used when probing the network for `(delta, c)`.
    pub calibration_sparsity: usize,
    pub calibration_samples: usize,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
}

impl Default for OptLenSettings {
    fn default() -> Self {
        Self {
            lengths: (1..=16).map(|i| i * 100).collect(),
            bound_grid: 400,
            calibration_sparsity: 2,
            calibration_samples: 1000,
            alpha: 4.0,
            beta: 4.0,
            rho: 4.0,
        }
    }
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

fn default_trials() -> usize {
    1
}

fn default_pilot_draws() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Root of every random draw; `network.seed` is replaced by derived seeds.
    #[serde(default)]
    pub seed: u64,
    /// For the phase diagram `network.nodes` is overridden per cell.
    pub network: NetworkSpec,
    pub basis: BasisKind,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// `N` (total input length for the optimal-length experiment).
    pub signal_length: usize,
    /// `k`; unused by the phase diagram.
    #[serde(default)]
    pub sparsity: usize,
    #[serde(default)]
    pub amplitude: AmplitudeLaw,
    /// Target norm of the accumulated noise at the final state; 0 disables noise.
    #[serde(default)]
    pub noise_target: f64,
    #[serde(default = "default_pilot_draws")]
    pub pilot_draws: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub phase: PhaseGrid,
    #[serde(default)]
    pub optlen: OptLenSettings,
    /// Default output directory when none is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn preset(kind: ExperimentKind, scale: Scale) -> Self {
        let base = |network: NetworkSpec, basis, signal_length, sparsity| Self {
            kind,
            seed: 0,
            network,
            basis,
            levels: DEFAULT_LEVELS,
            signal_length,
            sparsity,
            amplitude: AmplitudeLaw::default(),
            noise_target: 0.0,
            pilot_draws: default_pilot_draws(),
            trials: 1,
            solver: SolverSettings::default(),
            phase: PhaseGrid::default(),
            optlen: OptLenSettings::default(),
            output_dir: None,
        };
        match (kind, scale) {
            (ExperimentKind::FiniteRecovery, _) => base(
                NetworkSpec::random_orthogonal(100, 1.0, 0),
                BasisKind::Daubechies10,
                480,
                24,
            ),
            (ExperimentKind::PhaseDiagram, scale) => {
                let mut c = base(
                    NetworkSpec::random_orthogonal(2, 1.0, 0),
                    BasisKind::Canonical,
                    256,
                    0,
                );
                c.noise_target = 0.01;
                c.trials = 5;
                if scale == Scale::Paper {
                    c.signal_length = 1000;
                    c.levels = 3;
                    c.trials = 10;
                    c.phase.ratios_mn = (1..=10).map(|i| i as f64 / 10.0).collect();
                    c.phase.ratios_km = (1..=10).map(|i| i as f64 / 10.0 - 0.05).collect();
                }
                c
            }
            (ExperimentKind::OptimalLength, Scale::Desk) => {
                let mut c = base(
                    NetworkSpec::random_orthogonal(100, 0.995, 0),
                    BasisKind::Canonical,
                    1600,
                    80,
                );
                c.amplitude = AmplitudeLaw::Gaussian;
                c.trials = 10;
                c
            }
            (ExperimentKind::OptimalLength, Scale::Paper) => {
                let mut c = base(
                    NetworkSpec::random_orthogonal(500, 0.999, 0),
                    BasisKind::Canonical,
                    8000,
                    400,
                );
                c.amplitude = AmplitudeLaw::Gaussian;
                c.trials = 10;
                c.optlen.lengths = (1..=16).map(|i| i * 500).collect();
                c
            }
        }
    }

    pub fn basis(&self) -> Result<SparsityBasis> {
        SparsityBasis::with_levels(self.basis, self.signal_length, self.levels)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.trials == 0 {
            return invalid("trials must be at least 1".into());
        }
        if !(self.noise_target >= 0.0) || !self.noise_target.is_finite() {
            return invalid(format!(
                "noise_target must be nonnegative, got {}",
                self.noise_target
            ));
        }
        if self.signal_length == 0 {
            return invalid("signal_length must be positive".into());
        }
        match self.kind {
            ExperimentKind::FiniteRecovery | ExperimentKind::OptimalLength => {
                self.network.validate()?;
                if self.sparsity > self.signal_length {
                    return invalid(format!(
                        "sparsity {} exceeds signal_length {}",
                        self.sparsity, self.signal_length
                    ));
                }
                self.basis()?;
            }
            ExperimentKind::PhaseDiagram => {
                let g = &self.phase;
                if g.ratios_mn.is_empty() || g.ratios_km.is_empty() || g.bases.is_empty() {
                    return invalid("phase grid needs ratios_mn, ratios_km and bases".into());
                }
                if let Some(r) = g
                    .ratios_mn
                    .iter()
                    .chain(&g.ratios_km)
                    .find(|r| !(**r > 0.0 && **r <= 1.0))
                {
                    return invalid(format!("grid ratios must lie in (0, 1], got {r}"));
                }
                if matches!(
                    self.network.topology,
                    Topology::BlockDiagonal { .. }
                        | Topology::SmallWorld { .. }
                        | Topology::RankDeficient { .. }
                ) {
                    return invalid(
                        "phase diagram varies the node count; use a topology without explicit sizes".into(),
                    );
                }
                for &kind in &g.bases {
                    SparsityBasis::with_levels(kind, self.signal_length, self.levels)?;
                }
            }
        }
        if self.kind == ExperimentKind::OptimalLength {
            let o = &self.optlen;
            if o.lengths.is_empty() {
                return invalid("optlen.lengths is empty".into());
            }
            if let Some(l) = o.lengths.iter().find(|&&l| l < 2 || l > self.signal_length) {
                return invalid(format!(
                    "window length {l} must lie in 2..={}",
                    self.signal_length
                ));
            }
            if self.basis != BasisKind::Canonical {
                return invalid(
                    "the optimal-length experiment recovers in the canonical basis".into(),
                );
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for kind in [
            ExperimentKind::FiniteRecovery,
            ExperimentKind::PhaseDiagram,
            ExperimentKind::OptimalLength,
        ] {
            for scale in [Scale::Desk, Scale::Paper] {
                let c = ExperimentConfig::preset(kind, scale);
                c.validate().unwrap();
                let text = serde_json::to_string(&c).unwrap();
                let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
                assert_eq!(back, c);
            }
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v = serde_json::to_value(ExperimentConfig::preset(
            ExperimentKind::FiniteRecovery,
            Scale::Desk,
        ))
        .unwrap();
        v["network"]["nodez"] = 5.into();
        let text = v.to_string();
        let de = &mut serde_json::Deserializer::from_str(&text);
        let err = serde_path_to_error::deserialize::<_, ExperimentConfig>(de).unwrap_err();
        assert_eq!(err.path().to_string(), "network.nodez");
        assert!(err.inner().to_string().contains("nodez"));
    }

    #[test]
    fn invalid_values() {
        let mut c = ExperimentConfig::preset(ExperimentKind::PhaseDiagram, Scale::Desk);
        c.phase.ratios_mn.push(1.5);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::FiniteRecovery, Scale::Desk);
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(ExperimentKind::OptimalLength, Scale::Desk);
        c.optlen.lengths.push(5000);
        assert!(c.validate().is_err());
    }
}
