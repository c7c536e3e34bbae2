//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. Run alone with `cargo test --test acceptance`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stmcap::bases::{make_sparse_signal, AmplitudeLaw, BasisKind, SparsityBasis};
use stmcap::bounds::{
    accumulated_noise_bound, bound_curve, calibrate_rip, geometric_grid, k_star, recovery_bound,
    BoundParams,
};
use stmcap::cli;
use stmcap::experiments::{
    run_finite_recovery, run_optimal_length, run_phase_diagram, ExperimentConfig, ExperimentKind,
    Scale,
};
use stmcap::network::{composite_rip_constants, EigenPhases, Network, NetworkSpec, Topology};
use stmcap::rip::{exact_rip, exact_rip_sensing, probe_rip};
use stmcap::solver::{brute_force_l0, sensing_matrix, solve_bpdn, RecoveryProblem};

const FIG2_RMSE_TOL: f64 = 1e-4;
const FIG2_TIME_LIMIT: Duration = Duration::from_secs(60);
const FIG2_EXTRA_SEEDS: u64 = 8;
const PHASE_TIME_LIMIT: Duration = Duration::from_secs(30 * 60);
const PHASE_SUBSET_FRACTION: f64 = 0.95;
const UNITARY_DELTA_TOL: f64 = 1e-8;
const PROBE_SLACK: f64 = 1e-12;
const SYMMETRIC_MIN_WINS: usize = 9;
const ORACLE_INSTANCES: usize = 100;
const SUPPORT_REL_TOL: f64 = 1e-6;
const GEOMETRIC_SUM_TOL: f64 = 1e-6;
const BOUND_GRID_POINTS: usize = 400;
const CALIBRATION_SPARSITY: usize = 2;
const CALIBRATION_SAMPLES: usize = 1000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fig2() -> Outcome {
    let config = ExperimentConfig::preset(ExperimentKind::FiniteRecovery, Scale::Desk);
    let start = Instant::now();
    let r = run_finite_recovery(&config).expect("finite recovery runs");
    let elapsed = start.elapsed();
    let rmse = r.report.rmse_vs_truth.expect("truth attached");
    // Informational: the instance sits near the l1 phase boundary, so other
    // seeds do not all recover.
    let recovered = (1..=FIG2_EXTRA_SEEDS)
        .filter(|&seed| {
            let mut c = config.clone();
            c.seed = seed;
            let r = run_finite_recovery(&c).expect("finite recovery runs");
            r.report.rmse_vs_truth.expect("truth attached") < FIG2_RMSE_TOL
        })
        .count();
    outcome(
        rmse < FIG2_RMSE_TOL && elapsed < FIG2_TIME_LIMIT,
        format!(
            "M=100 N=480 k=24 db10, seed {}: rmse {rmse:.3e} (< {FIG2_RMSE_TOL:e}), {:.2} s (< 60 s); seeds 1..={FIG2_EXTRA_SEEDS} recovered {recovered}/{FIG2_EXTRA_SEEDS} (not gated)",
            config.seed,
            elapsed.as_secs_f64()
        ),
    )
}

fn phase() -> Outcome {
    let config = ExperimentConfig::preset(ExperimentKind::PhaseDiagram, Scale::Desk);
    let start = Instant::now();
    let r = run_phase_diagram(&config).expect("phase diagram runs");
    let elapsed = start.elapsed();
    let below_full = |kind: BasisKind| {
        r.cells_for(kind)
            .filter(|c| c.ratio_mn < 1.0 && c.pass)
            .count()
    };
    let counts: Vec<(BasisKind, usize)> = [
        BasisKind::Canonical,
        BasisKind::Daubechies10,
        BasisKind::Symlet3,
    ]
    .into_iter()
    .map(|k| (k, below_full(k)))
    .collect();
    let nonempty = counts.iter().all(|&(_, n)| n > 0);
    let dct: Vec<_> = r.cells_for(BasisKind::Dct).collect();
    let canonical: Vec<_> = r.cells_for(BasisKind::Canonical).collect();
    let agree = dct
        .iter()
        .zip(&canonical)
        .filter(|(d, c)| !d.pass || c.pass)
        .count();
    let fraction = agree as f64 / dct.len() as f64;
    outcome(
        nonempty && fraction >= PHASE_SUBSET_FRACTION && elapsed < PHASE_TIME_LIMIT,
        format!(
            "passing cells with M<N {counts:?}; dct-pass implies canonical-pass in {agree}/{} cells ({:.1}% >= 95%); {:.0} s (< 1800 s)",
            dct.len(),
            100.0 * fraction,
            elapsed.as_secs_f64()
        ),
    )
}

fn optimal_length() -> Outcome {
    let config = ExperimentConfig::preset(ExperimentKind::OptimalLength, Scale::Desk);
    let r = run_optimal_length(&config).expect("optimal-length experiment runs");
    let m = config.network.nodes;
    let errors: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{}:{:.3}", row.length, row.error_mean))
        .collect();
    outcome(
        r.interior && r.l_opt > m,
        format!(
            "L_opt = {} (interior {}, M = {m}); mean error by L [{}]",
            r.l_opt,
            r.interior,
            errors.join(" ")
        ),
    )
}

fn bound_shape() -> Outcome {
    let network = Network::build(&NetworkSpec::random_orthogonal(500, 0.999, 0)).expect("network");
    let est =
        calibrate_rip(&network, CALIBRATION_SPARSITY, CALIBRATION_SAMPLES, 0).expect("calibration");
    let mut p = BoundParams::new(500, 0.999, 400.0, 1.0, est.delta_hat, est.c_hat);
    p.u_norm = network.eigenvector_norm();
    let curve = bound_curve(&p, &geometric_grid(2.0, 8000.0, BOUND_GRID_POINTS)).expect("curve");
    let minima = curve.local_minima();
    let far: Vec<f64> = [1e4, 1e8, 1e16, 1e32, 1e64]
        .iter()
        .map(|&l| recovery_bound(&p, l).expect("bound").total)
        .collect();
    let diverges = far.windows(2).all(|w| w[1] > w[0]) && far[far.len() - 1] > 10.0 * far[0];
    let mut switch_ok = true;
    let mut checked = 0;
    for l in geometric_grid(2.0, 1e12, 2000) {
        let pt = recovery_bound(&p, l).expect("bound");
        if k_star(&p, l).expect("k*") >= p.k {
            checked += 1;
            switch_ok &= pt.term_approximation == 0.0;
        } else {
            switch_ok &= pt.term_approximation > 0.0;
        }
    }
    outcome(
        !minima.is_empty() && diverges && switch_ok && checked > 0,
        format!(
            "calibrated delta {:.3} c {:.3}; interior local minima at L = {minima:?}; totals at L=1e4..1e64 {far:.3?}; term2 == 0 exactly on {checked} lengths with k* >= k",
            est.delta_hat, est.c_hat
        ),
    )
}

fn rip_suite() -> Outcome {
    // (a) square operators of equispaced-phase orthogonal networks
    let mut worst_unitary = 0.0f64;
    for (m, seed) in [(8, 0), (12, 1), (16, 2)] {
        let net = Network::build(
            &NetworkSpec::random_orthogonal(m, 1.0, seed).with_phases(EigenPhases::Equispaced),
        )
        .expect("network");
        let op = net.assemble_operator(m).expect("operator").matrix;
        for s in 1..=3 {
            let e = exact_rip(&op, &SparsityBasis::canonical(m), s).expect("exact rip");
            worst_unitary = worst_unitary.max(e.delta_hat);
        }
    }
    let a = worst_unitary <= UNITARY_DELTA_TOL;

    // (b) probe never exceeds exact enumeration
    let mut shared = 0;
    let mut b = true;
    for (m, l, s) in [(6, 12, 2), (8, 12, 3), (8, 16, 2), (10, 16, 3), (12, 14, 4)] {
        for seed in 0..4u64 {
            let net =
                Network::build(&NetworkSpec::random_orthogonal(m, 0.98, seed)).expect("network");
            let op = net.assemble_operator(l).expect("operator").matrix;
            for kind in [BasisKind::Canonical, BasisKind::Dct] {
                let basis = SparsityBasis::new(kind, l).expect("basis");
                let exact = exact_rip(&op, &basis, s).expect("exact");
                let probe = probe_rip(&op, &basis, s, 200, seed).expect("probe");
                b &= probe.delta_hat <= exact.delta_hat + PROBE_SLACK;
                shared += 1;
            }
        }
    }

    // (c) median probe delta over seeds is nonincreasing in M
    let canonical = SparsityBasis::canonical(256);
    let medians: Vec<f64> = [32usize, 64, 128, 256]
        .iter()
        .map(|&m| {
            median(
                (0..10u64)
                    .map(|seed| {
                        let net = Network::build(&NetworkSpec::random_orthogonal(m, 1.0, seed))
                            .expect("network");
                        let op = net.assemble_operator(256).expect("operator").matrix;
                        probe_rip(&op, &canonical, 4, 1000, seed)
                            .expect("probe")
                            .delta_hat
                    })
                    .collect(),
            )
        })
        .collect();
    let c = medians.windows(2).all(|w| w[1] <= w[0]);

    // (d) symmetric networks are worse conditioned than random orthogonal ones
    let mut wins = 0;
    for seed in 0..10u64 {
        let delta = |topology: Topology| {
            let net = Network::build(&NetworkSpec::new(64, topology, 1.0, seed)).expect("network");
            let op = net.assemble_operator(256).expect("operator").matrix;
            probe_rip(&op, &canonical, 4, 1000, seed)
                .expect("probe")
                .delta_hat
        };
        if delta(Topology::Symmetric) > delta(Topology::RandomOrthogonal) {
            wins += 1;
        }
    }
    let d = wins >= SYMMETRIC_MIN_WINS;
    outcome(
        a && b && c && d,
        format!(
            "(a) max exact delta {worst_unitary:.2e} (<= 1e-8): {a}; (b) probe <= exact on {shared} instances: {b}; (c) medians for M=32,64,128,256 {medians:.4?}: {c}; (d) symmetric > orthogonal on {wins}/10 seeds: {d}"
        ),
    )
}

fn oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let threshold = 2f64.sqrt() - 1.0;
    let (mut qualifying, mut mismatches) = (0, 0);
    for i in 0..ORACLE_INSTANCES {
        let n: usize = rng.random_range(6..=14);
        let k: usize = rng.random_range(1..=2);
        // Even M from 2k+2 up to 96; most instances are tall, where small
        // 2k-RIP constants are attainable.
        let m = 2 * rng.random_range((k + 1)..=48);
        let q = rng.random_range(0.9..=1.0);
        let kind = if i % 2 == 0 {
            BasisKind::Canonical
        } else {
            BasisKind::Dct
        };
        let basis = SparsityBasis::new(kind, n).expect("basis");
        let net =
            Network::build(&NetworkSpec::random_orthogonal(m, q, rng.random())).expect("network");
        let op: DMatrix<f64> = net.assemble_operator(n).expect("operator").matrix;
        let signal =
            make_sparse_signal(&basis, k, AmplitudeLaw::default(), rng.random()).expect("signal");
        let x = op.clone() * nalgebra::DVector::from_column_slice(&signal.samples);
        let b = sensing_matrix(&op, &basis).expect("sensing");
        let delta = exact_rip_sensing(&b, 2 * k).expect("rip").delta_hat;
        if delta >= threshold {
            continue;
        }
        qualifying += 1;
        let l1 = solve_bpdn(&RecoveryProblem::new(&op, basis, x.as_slice(), 0.0).expect("problem"))
            .expect("solve");
        let l0 = brute_force_l0(&op, &basis, x.as_slice(), k).expect("l0");
        if l1.support(SUPPORT_REL_TOL) != l0.support {
            mismatches += 1;
        }
    }
    outcome(
        qualifying > 0 && mismatches == 0,
        format!(
            "{qualifying}/{ORACLE_INSTANCES} instances with exact 2k delta < sqrt(2)-1; {mismatches} support mismatches (0 allowed)"
        ),
    )
}

fn closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    for (q, eps, alpha, u) in [
        (0.9, 0.01, 4.0, 1.0),
        (0.99, 0.05, 2.0, 1.3),
        (0.5, 1.0, 4.0, 2.0),
    ] {
        let mut p = BoundParams::new(100, q, 10.0, 1.0, 0.5, 1.0);
        p.eps_max = eps;
        p.alpha = alpha;
        p.u_norm = u;
        let closed = accumulated_noise_bound(&p).expect("bound");
        let mut direct = 0.0;
        let mut term = q;
        while term > 1e-18 {
            direct += alpha * eps * u * term;
            term *= q;
        }
        worst = worst.max((closed - direct).abs());
    }
    let geometric = worst <= GEOMETRIC_SUM_TOL;
    let composite = [0.0, 0.1, 0.37, 0.9].iter().all(|&d| {
        composite_rip_constants(d, 1.0, 1.0, 1.0, 1.0)
            .expect("constants")
            .0
            == d
    });
    let mu = SparsityBasis::canonical(64)
        .default_coherence()
        .expect("coherence");
    outcome(
        geometric && composite && mu == 1.0,
        format!(
            "noise bound vs summation max diff {worst:.2e} (<= 1e-6); delta' == delta at gamma = 1: {composite}; coherence(canonical) = {mu}"
        ),
    )
}

fn csv_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .expect("run dir")
        .filter_map(|e| {
            let p = e.expect("entry").path();
            (p.extension().is_some_and(|x| x == "csv")).then(|| {
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    fs::read(&p).unwrap(),
                )
            })
        })
        .collect()
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let runs: [(&str, &[&str]); 6] = [
        ("recover", &[]),
        (
            "phase",
            &[
                "signal_length=64",
                "trials=2",
                "phase.ratios_mn=[0.25,0.5,1.0]",
                "phase.ratios_km=[0.1,0.5]",
            ],
        ),
        (
            "optlen",
            &[
                "signal_length=240",
                "sparsity=12",
                "network.nodes=20",
                "trials=2",
                "optlen.lengths=[20,60,120,240]",
            ],
        ),
        ("build-net", &["network.nodes=16"]),
        (
            "rip-probe",
            &["network.nodes=16", "signal_length=32", "sparsity=3"],
        ),
        (
            "bound-curve",
            &["network.nodes=50", "signal_length=2000", "sparsity=40"],
        ),
    ];
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .expect("pool");
    let mut failures = Vec::new();
    let mut files = 0;
    for (cmd, overrides) in runs {
        let first = tmp.path().join(format!("{cmd}-a"));
        let second = tmp.path().join(format!("{cmd}-b"));
        let mut argv = vec![
            "stmcap".to_string(),
            cmd.to_string(),
            "--seed".into(),
            "11".into(),
            "--out".into(),
            first.display().to_string(),
        ];
        argv.extend(overrides.iter().map(|s| s.to_string()));
        let code = cli::main_with(&argv);
        let manifest = first.join(cli::MANIFEST_NAME);
        let rerun = vec![
            "stmcap".to_string(),
            cmd.to_string(),
            "--config".into(),
            manifest.display().to_string(),
            "--out".into(),
            second.display().to_string(),
        ];
        let code2 = pool.install(|| cli::main_with(&rerun));
        let (a, b) = (csv_bytes(&first), csv_bytes(&second));
        files += a.len();
        if code != 0 || code2 != 0 || a.is_empty() || a != b {
            failures.push(cmd);
        }
    }
    outcome(
        failures.is_empty(),
        format!("6 subcommands, {files} CSV files byte-identical after manifest re-run on 3 threads; failures {failures:?}"),
    )
}

fn main() {
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "finite recovery", fig2),
        (2, "phase diagram", phase),
        (3, "optimal length", optimal_length),
        (4, "bound-curve shape", bound_shape),
        (5, "RIP properties", rip_suite),
        (6, "l1/l0 oracle equivalence", oracle),
        (7, "closed forms", closed_forms),
        (8, "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "acceptance {id} ({name}): {verdict} [{:.1} s] {}",
            start.elapsed().as_secs_f64(),
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
