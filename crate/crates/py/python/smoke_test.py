"""Smoke test for the greedy_ldp_py extension module."""

import math
from fractions import Fraction

import greedy_ldp_py as g


def main():
    assert abs(g.jamming_constant(3) - 0.375) < 1e-12

    fluid = g.fluid_limit([0, 0, 0, 1], 1e-3)
    assert fluid["reached"]
    assert abs(fluid["t_star"] - 0.375) < 1e-6
    assert len(fluid["t"]) == len(fluid["e"])

    path = g.hamilton_path_regular(3, 0.0, 1e-3)
    assert abs(path["action"]) < 1e-8
    assert abs(path["t_alpha0"] - 0.375) < 1e-6

    alpha0, t, f = g.rate_curve_regular(3, -0.5, 0.3, 5, 1e-3)
    assert len(alpha0) == len(t) == len(f) == 5
    assert all(a < b for a, b in zip(t, t[1:]))

    x = [0.1, 0.5, 0.0, 0.0, 0.0, 0.1]
    assert abs(g.hamiltonian_value(x, [0.0] * 6)) < 1e-12
    assert g.grad_alpha(x, [0.0] * 6)[0] == 1.0
    assert math.isinf(g.cost_regular(3, [0.1, 0.8, 0.2], [1, -6, -9]))

    law = {k: Fraction(int(p), int(q)) for k, p, q in g.exact_law([2, 2, 2])}
    assert law == {1: Fraction(8, 15), 2: Fraction(6, 15), 3: Fraction(1, 15)}

    samples = g.sample_regular(3, 1000, 50, 11)
    assert samples == g.sample_regular(3, 1000, 50, 11)
    mean = sum(samples) / len(samples) / 1000
    assert abs(mean - 0.375) < 0.01, mean
    assert g.simulate([2, 2, 2], 5) in (1, 2, 3)

    try:
        g.fluid_limit([0.5, 0.2])
    except ValueError:
        pass
    else:
        raise AssertionError("bad probabilities accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
