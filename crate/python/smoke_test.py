"""Smoke test for the pystmcap extension.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/pystmcap-*.whl
"""

import json
import math
import sys
import tempfile

import pystmcap as sc


def main() -> int:
    assert sc.Basis("canonical", 64).coherence() == 1.0

    basis = sc.Basis("daubechies10", 480)
    samples, support, coeffs = sc.sparse_signal(basis, 10, seed=1)
    assert len(support) == 10
    back = basis.analyze(samples)
    assert max(abs(a - b) for a, b in zip(back, coeffs)) < 1e-10

    net = sc.Network(100, decay=1.0, seed=0)
    op = net.operator(480)
    state = net.final_state(list(reversed(samples)))
    direct = [sum(r * s for r, s in zip(row, samples)) for row in op]
    assert max(abs(a - b) for a, b in zip(state, direct)) < 1e-8

    report = json.loads(sc.recover(op, state, 0.0, basis=basis))
    err = math.sqrt(sum((a - b) ** 2 for a, b in zip(report["signal"], samples)) / len(samples))
    print(f"recover: converged={report['converged']} iterations={report['iterations']} rmse={err:.2e}")
    assert report["converged"] and err < 1e-4

    square = sc.Network(8, seed=3, equispaced=True).operator(8)
    delta, c, _, _ = sc.exact_rip(square, 2)
    assert delta < 1e-8
    probe = sc.probe_rip(net.operator(256), 4, samples=200, seed=0)
    assert 0.0 < probe[0] < 1.0

    curve = sc.bound_curve(500, 0.999, 400.0, 1.0, 0.9, 1.5, [100.0, 1000.0, 8000.0])
    assert len(curve) == 3 and all(row[-1] > 0 for row in curve)

    config = json.loads(sc.preset_config("finite_recovery"))
    config["network"]["nodes"] = 40
    config["signal_length"] = 96
    config["sparsity"] = 4
    with tempfile.TemporaryDirectory() as out:
        run = json.loads(sc.run_experiment(json.dumps(config), out))
    print(f"run_experiment: {run['outputs']} {run['summary']}")
    assert run["solver_failures"] == 0

    try:
        sc.Basis("haar", 8)
    except ValueError as e:
        print(f"expected error: {e}")
    else:
        raise AssertionError("unknown basis accepted")

    print("pystmcap smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
