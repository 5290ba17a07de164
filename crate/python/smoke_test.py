"""Smoke test for the septest Python extension.

Build and install first:
    pip install --no-build-isolation -e crates/py
then run:
    python python/smoke_test.py
"""

import json
import math

import septest

S = 1 / math.sqrt(2)


def close(a, b, tol=1e-9):
    assert abs(a - b) <= tol, (a, b)


def main():
    singlet = septest.PureState([0, S, -S, 0], [2, 2])
    zz = septest.PureState.basis([2, 2], 0)
    close(singlet.overlap(septest.PureState.bell_pairs(1)), 1.0)

    # swap and product tests
    close(septest.swap_test(singlet, zz), 0.5)
    cut = septest.Cut([[0], [1]], 2)
    close(septest.product_test(singlet, cut), 0.75)
    close(septest.product_test(singlet, cut, method="circuit"), 0.75)
    close(septest.product_test(zz), 1.0)

    rho = singlet.to_density()
    close(rho.purity(), 1.0)
    close(rho.partial_trace([0]).purity(), 0.5)
    close(septest.permutation_test(rho), 0.0)

    # singlet test: 1 on the singlet, (2/3)^n on the separable boundary
    close(septest.singlet_test(rho), 1.0)
    close(septest.singlet_test(septest.DensityMatrix.werner(0.5)), 2 / 3)
    freq, _ = septest.singlet_test_sampled(zz.to_density(), 500, 7)
    assert abs(freq - 1 / 3) < 0.1, freq
    close(septest.locc_bound(2), 2 * (1 - 4 / 9))

    # separability tools
    is_ppt, min_eig = septest.ppt(rho, cut)
    assert not is_ppt and min_eig < -0.49
    dist, sigma, weights = septest.nearest_separable_state(rho, cut, seed=1, restarts=2, iters=100)
    close(dist, 1.0, 1e-3)
    close(sum(weights), 1.0)
    close(rho.trace_distance(sigma), dist, 1e-9)
    overlap, product = septest.nearest_product_state(singlet, cut, seed=1)
    close(overlap, 0.5, 1e-9)
    feasible, _, ext = septest.k_extendible(zz.to_density(), cut, 2)
    assert feasible and ext.dims == [2, 2, 2, 2]
    feasible, residual, _ = septest.k_extendible(rho, cut, 2, party=1)
    assert not feasible and residual > 0.1

    # circuits
    bell = septest.QCircuit.from_json(json.dumps({
        "inputs": [],
        "ancillas": [{"label": "A", "dim": 2}, {"label": "B", "dim": 2}],
        "gates": [{"kind": "h", "targets": ["A"]}, {"kind": "cnot", "targets": ["A", "B"]}],
    }))
    out = bell.prepare()
    close(out.fidelity(septest.PureState.bell_pairs(1, "phi_plus").to_density()), 1.0)

    # JSON round trip and errors
    again = septest.DensityMatrix.from_json(rho.to_json())
    close(again.trace_distance(rho), 0.0)
    try:
        septest.PureState([1, 0, 0], [2, 2])
    except septest.SeptestError as e:
        assert str(e).startswith("InvalidLayout") or "dimension" in str(e), e
    else:
        raise AssertionError("mismatched layout accepted")

    print("septest python smoke test: ok")


if __name__ == "__main__":
    main()
