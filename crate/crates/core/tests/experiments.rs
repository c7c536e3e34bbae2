use std::fs;

use stmcap::bases::BasisKind;
use stmcap::experiments::{
    run_experiment, run_finite_recovery, run_optimal_length, run_phase_diagram, ExperimentConfig,
    ExperimentKind, Scale,
};

fn finite() -> ExperimentConfig {
    ExperimentConfig::preset(ExperimentKind::FiniteRecovery, Scale::Desk)
}

#[test]
fn zero_input_recovers_zero() {
    let mut c = finite();
    c.sparsity = 0;
    let r = run_finite_recovery(&c).unwrap();
    assert!(r.report.signal.iter().all(|&v| v == 0.0));
    assert_eq!(r.report.rmse_vs_truth, Some(0.0));
}

#[test]
fn seeds_reproduce_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = finite();
    c.network.nodes = 40;
    c.signal_length = 96;
    c.sparsity = 4;
    c.noise_target = 0.01;
    let read = |sub: &str, c: &ExperimentConfig| {
        let dir = tmp.path().join(sub);
        run_experiment(c, &dir).unwrap();
        fs::read(dir.join("finite_recovery.csv")).unwrap()
    };
    let a = read("a", &c);
    assert_eq!(a, read("b", &c));
    c.seed = 1;
    assert_ne!(a, read("c", &c));
}

#[test]
fn phase_cells_and_row_monotonicity() {
    let mut c = ExperimentConfig::preset(ExperimentKind::PhaseDiagram, Scale::Desk);
    c.signal_length = 64;
    c.trials = 3;
    c.phase.ratios_mn = vec![0.125, 0.25, 0.5, 0.75, 1.0];
    c.phase.ratios_km = vec![0.1, 0.5, 1.0];
    c.phase.bases = vec![BasisKind::Canonical];
    let r = run_phase_diagram(&c).unwrap();
    assert_eq!(r.cells.len(), 15);
    let full = r.cell(BasisKind::Canonical, 4, 0).unwrap();
    assert!(full.pass, "{full:?}");
    let starved = r.cell(BasisKind::Canonical, 0, 2).unwrap();
    assert!(!starved.pass, "{starved:?}");
    for j in 0..3 {
        let medians: Vec<f64> = (0..5)
            .map(|i| r.cell(BasisKind::Canonical, i, j).unwrap().median_rmse)
            .collect();
        let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
        assert!(inversions <= 1, "row {j}: {medians:?}");
    }

    let tmp = tempfile::tempdir().unwrap();
    let files = r.write(tmp.path()).unwrap();
    assert_eq!(files, ["phase_diagram.csv", "phase_diagram_canonical.svg"]);
    let svg = fs::read_to_string(tmp.path().join(&files[1])).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<svg") && svg.contains("stroke-dasharray"));
}

#[test]
fn optlen_without_decay_reduces_to_finite_recovery() {
    let mut c = ExperimentConfig::preset(ExperimentKind::OptimalLength, Scale::Desk);
    c.network.nodes = 60;
    c.network.decay = 1.0;
    c.signal_length = 80;
    c.sparsity = 3;
    c.trials = 2;
    c.optlen.lengths = vec![80];
    let r = run_optimal_length(&c).unwrap();
    assert!(r.bound.is_none() && r.calibration.is_none());
    assert!(r.rows[0].rel_mean < 1e-4, "{:?}", r.rows[0]);
    assert_eq!(r.rows[0].converged, 2);
}

#[test]
fn optlen_small_run_overlays_bound() {
    let mut c = ExperimentConfig::preset(ExperimentKind::OptimalLength, Scale::Desk);
    c.network.nodes = 20;
    c.signal_length = 240;
    c.sparsity = 12;
    c.trials = 2;
    c.optlen.lengths = vec![20, 60, 120, 240];
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&c, tmp.path()).unwrap();
    for f in [
        "optimal_length.csv",
        "bound_curve.csv",
        "bound_curve.svg",
        "optimal_length.svg",
    ] {
        assert!(out.outputs.iter().any(|o| o == f), "{f}");
        assert!(tmp.path().join(f).is_file());
    }
    let text = fs::read_to_string(tmp.path().join("optimal_length.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "L,error_mean,error_min,error_max,rel_mean,converged,trials,bound_total"
    );
    assert_eq!(lines.count(), 4);
}
