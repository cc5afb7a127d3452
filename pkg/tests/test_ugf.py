from __future__ import annotations

import math
from collections import defaultdict

import numpy as np
import pytest

from ugfrel.ugf import (
    MIN,
    PLUS,
    TIMES,
    EmptyInput,
    MassNotNormalized,
    ModelInputError,
    NegativeProbability,
    StepNotPositive,
    StructureFunction,
    UFunction,
    collect_like_terms,
    compose,
    compose_all,
    degenerate,
    gridded_compose_plus,
    loss_pairs,
    make_ufunction,
    psi_availability,
    quantize,
    redundant_states,
    shortfall,
)

N_INSTANCES = 1000


def _random_u(rng: np.random.Generator, max_terms: int = 8, spread: int = 20) -> UFunction:
    """Half-integer values so sums and products are exact in binary floating point."""
    n = int(rng.integers(1, max_terms + 1))
    values = rng.choice(np.arange(-2 * spread, 2 * spread + 1), size=n, replace=False) / 2.0
    probs = rng.dirichlet(np.ones(n))
    return make_ufunction(zip(values.tolist(), probs.tolist()))


def _brute_force(u1: UFunction, u2: UFunction, op) -> dict[float, float]:
    groups: dict[float, list[float]] = defaultdict(list)
    for v1, p1 in u1:
        for v2, p2 in u2:
            groups[float(op(v1, v2))].append(p1 * p2)
    return {v: math.fsum(ps) for v, ps in groups.items()}


def _as_dict(u: UFunction) -> dict[float, float]:
    return dict(zip(u.values.tolist(), u.probabilities.tolist()))


def test_make_ufunction_sorts_and_keeps_terms():
    u = make_ufunction([(5000, 0.97), (0, 0.03)])
    assert u.values.tolist() == [0.0, 5000.0]
    assert u.probabilities.tolist() == pytest.approx([0.03, 0.97])
    assert u.total_mass == pytest.approx(1.0, abs=1e-15)


def test_make_ufunction_merges_identical_values():
    u = make_ufunction([(1, 0.5), (1, 0.5)])
    assert u.to_pairs() == [[1.0, 1.0]]


def test_make_ufunction_renormalizes_within_tolerance():
    u = make_ufunction([(2, 0.333), (3, 0.333), (4, 0.333)], mass_tolerance=1e-2)
    assert u.values.tolist() == [2.0, 3.0, 4.0]
    assert u.probabilities.tolist() == pytest.approx([0.333 / 0.999] * 3, rel=1e-12)


def test_make_ufunction_rejects_bad_mass_and_probabilities():
    with pytest.raises(MassNotNormalized):
        make_ufunction([(2, 0.333), (3, 0.333), (4, 0.333)])
    with pytest.raises(NegativeProbability):
        make_ufunction([(0, -0.1), (1, 1.1)])
    with pytest.raises(EmptyInput):
        make_ufunction([])


def test_ufunction_rejects_unsorted_values():
    with pytest.raises(ModelInputError):
        UFunction(np.array([2.0, 1.0]), np.array([0.5, 0.5]))


def test_ufunction_is_read_only():
    u = make_ufunction([(0, 0.5), (1, 0.5)])
    with pytest.raises(ValueError):
        u.values[0] = 3.0


def test_compose_times_ev_aggregation():
    op = make_ufunction([(-5, 0.13), (0, 0.83), (5, 0.04)])
    mech = make_ufunction([(0, 0.01), (25, 0.99)])
    u = compose(op, mech, TIMES)
    assert u.values.tolist() == [-125.0, 0.0, 125.0]
    assert u.probabilities.tolist() == pytest.approx([0.1287, 0.8317, 0.0396], abs=1e-12)


def test_compose_plus_binomial_fold():
    unit = make_ufunction([(0, 0.04), (1000, 0.96)])
    u = compose_all([unit] * 5, PLUS)
    assert u.values.tolist() == [0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0]
    assert u.probabilities[-1] == pytest.approx(0.96**5, rel=1e-12)
    assert u.probabilities[0] == pytest.approx(0.04**5, rel=1e-12)
    assert redundant_states([2] * 5, u) == 32 - 6


def test_compose_times_identity():
    u = make_ufunction([(-3, 0.2), (1.5, 0.3), (7, 0.5)])
    out = compose(u, degenerate(1.0), TIMES)
    assert out.isclose(u, value_tol=0.0, prob_tol=0.0)


def test_compose_custom_and_min_structure_functions():
    u1 = make_ufunction([(1, 0.5), (3, 0.5)])
    u2 = make_ufunction([(2, 1.0)])
    assert compose(u1, u2, MIN).to_pairs() == [[1.0, 0.5], [2.0, 0.5]]
    maximum = StructureFunction("max", np.maximum)
    assert compose(u1, u2, maximum).to_pairs() == [[2.0, 0.5], [3.0, 0.5]]


def test_compose_all_rejects_empty():
    with pytest.raises(EmptyInput):
        compose_all([])


def test_collect_like_terms_examples():
    exact = UFunction(np.array([100.0]), np.array([1.0]))
    assert collect_like_terms(exact, 0.0).to_pairs() == [[100.0, 1.0]]

    near = UFunction(np.array([100.0, 100.0000001]), np.array([0.5, 0.5]))
    merged = collect_like_terms(near, 1e-6)
    assert len(merged) == 1
    assert merged.values[0] == pytest.approx(100.00000005, abs=1e-9)
    assert merged.probabilities[0] == 1.0

    apart = make_ufunction([(1, 0.3), (2, 0.7)])
    assert collect_like_terms(apart, 0.5).isclose(apart, value_tol=0.0, prob_tol=0.0)

    with pytest.raises(ModelInputError):
        collect_like_terms(apart, -1.0)


def test_collect_preserves_expectation():
    u = UFunction(np.array([1.0, 1.0 + 1e-10, 5.0]), np.array([0.25, 0.25, 0.5]))
    merged = collect_like_terms(u, 1e-9)
    assert len(merged) == 2
    assert merged.mean() == pytest.approx(u.mean(), rel=1e-15)


def test_psi_availability_examples():
    t = make_ufunction([(0, 0.03), (5000, 0.97)])
    assert psi_availability(t, 1000) == pytest.approx(0.97)
    zero = degenerate(0.0)
    assert psi_availability(zero, 0.0) == 1.0
    assert psi_availability(zero, 0.0, strict=True) == 0.0
    ev = make_ufunction([(-5, 0.3), (5, 0.7)])
    assert psi_availability(ev, 0.0) == pytest.approx(0.7)


def test_shortfall_examples():
    assert shortfall(degenerate(100), degenerate(200)) == (1.0, 100.0)
    assert shortfall(degenerate(200), degenerate(100)) == (0.0, 0.0)
    g = make_ufunction([(0, 0.5), (300, 0.5)])
    loss, unserved = shortfall(g, degenerate(100), strict=True)
    assert loss == pytest.approx(0.5)
    assert unserved == pytest.approx(50.0)


def test_shortfall_tie_follows_strict_flag():
    assert shortfall(degenerate(100), degenerate(100), strict=True).loss_probability == 0.0
    assert shortfall(degenerate(100), degenerate(100), strict=False).loss_probability == 1.0


def test_shortfall_ties_survive_float_summation():
    # 0.1 + 0.2 + 0.3 sums to 0.6000000000000001
    g = compose_all([degenerate(0.1), degenerate(0.2), degenerate(0.3)])
    assert g.values[0] != 0.6
    assert shortfall(g, degenerate(0.6), strict=False).loss_probability == 1.0
    assert shortfall(g, degenerate(0.6), strict=True) == (0.0, 0.0)
    tie = shortfall(degenerate(0.6), g, strict=False)
    assert tie.loss_probability == 1.0
    assert tie.expected_unserved == 0.0


def test_loss_pairs_tolerance_scales_with_magnitude():
    deficit, mask = loss_pairs(np.array([5000.0, 5000.0]), np.array([5000.0 - 1e-7, 5000.0 - 1e-3]))
    assert deficit[0] == 0.0
    assert mask.tolist() == [False, True]


def test_quantize_rounds_half_to_even():
    assert quantize(degenerate(0.4), 1.0).to_pairs() == [[0.0, 1.0]]
    assert quantize(degenerate(2.5), 1.0).to_pairs() == [[2.0, 1.0]]
    assert quantize(degenerate(3.5), 1.0).to_pairs() == [[4.0, 1.0]]
    with pytest.raises(StepNotPositive):
        quantize(degenerate(1.0), 0.0)


def test_gridded_on_grid_inputs_match_compose():
    u1 = make_ufunction([(0, 0.2), (1, 0.3), (4, 0.5)])
    u2 = make_ufunction([(-2, 0.6), (3, 0.4)])
    fast = gridded_compose_plus(u1, u2, 1.0)
    assert fast.isclose(compose(u1, u2, PLUS), value_tol=0.0, prob_tol=1e-15)
    with pytest.raises(StepNotPositive):
        gridded_compose_plus(u1, u2, -1.0)


def test_gridded_rejects_oversized_grid():
    u = make_ufunction([(0, 0.5), (1e6, 0.5)])
    with pytest.raises(ModelInputError):
        gridded_compose_plus(u, u, 1.0, max_grid_points=1000)


def test_gridded_rejects_values_beyond_integer_grid():
    with pytest.raises(ModelInputError):
        gridded_compose_plus(degenerate(1e19), degenerate(0.0), 1.0)
    with pytest.raises(ModelInputError):
        gridded_compose_plus(degenerate(-1e19), degenerate(0.0), 1.0)


def test_compose_matches_brute_force_enumeration():
    rng = np.random.default_rng(101)
    for _ in range(N_INSTANCES):
        u1, u2 = _random_u(rng), _random_u(rng)
        for phi, op in ((PLUS, lambda a, b: a + b), (TIMES, lambda a, b: a * b)):
            got = _as_dict(compose(u1, u2, phi))
            want = _brute_force(u1, u2, op)
            assert set(got) == {v for v, p in want.items() if p > 0}
            for v, p in got.items():
                assert p == pytest.approx(want[v], abs=1e-12)


def test_compose_conserves_mass():
    rng = np.random.default_rng(202)
    for _ in range(N_INSTANCES):
        u1, u2 = _random_u(rng), _random_u(rng)
        for phi in (PLUS, TIMES, MIN):
            assert abs(compose(u1, u2, phi).total_mass - 1.0) <= 1e-12


def test_compose_is_commutative_and_associative():
    rng = np.random.default_rng(303)
    for _ in range(N_INSTANCES):
        u1, u2, u3 = _random_u(rng, 5), _random_u(rng, 5), _random_u(rng, 5)
        for phi in (PLUS, TIMES):
            assert compose(u1, u2, phi).isclose(compose(u2, u1, phi), value_tol=0.0, prob_tol=1e-12)
        left = compose(compose(u1, u2, PLUS), u3, PLUS)
        right = compose(u1, compose(u2, u3, PLUS), PLUS)
        assert left.isclose(right, value_tol=0.0, prob_tol=1e-12)


def test_expectation_is_linear_and_multiplicative():
    rng = np.random.default_rng(404)
    for _ in range(N_INSTANCES):
        u1, u2 = _random_u(rng), _random_u(rng)
        assert compose(u1, u2, PLUS).mean() == pytest.approx(u1.mean() + u2.mean(), abs=1e-12)
        assert compose(u1, u2, TIMES).mean() == pytest.approx(u1.mean() * u2.mean(), abs=1e-11)


def test_psi_is_monotone_with_bounds():
    rng = np.random.default_rng(505)
    for _ in range(N_INSTANCES):
        u = _random_u(rng)
        demands = np.sort(rng.uniform(-15, 15, size=8))
        avail = [psi_availability(u, w) for w in demands]
        assert all(a >= b for a, b in zip(avail, avail[1:]))
        assert psi_availability(u, u.min_value) == pytest.approx(1.0, abs=1e-12)
        assert psi_availability(u, u.max_value + 0.25) == 0.0


def test_shortfall_consistency_with_margin_distribution():
    rng = np.random.default_rng(606)
    for _ in range(N_INSTANCES):
        g, load = _random_u(rng), _random_u(rng)
        loss, unserved = shortfall(g, load, strict=True)
        margin = compose(g, load.scaled(-1.0), PLUS)
        assert loss == pytest.approx(1.0 - psi_availability(margin, 0.0), abs=1e-12)
        assert unserved >= 0.0
        assert (unserved == 0.0) == (loss == 0.0)


def test_gridded_matches_naive_plus():
    rng = np.random.default_rng(707)
    step = 0.5
    for _ in range(N_INSTANCES):
        u1, u2 = _random_u(rng, 50, 40), _random_u(rng, 50, 40)
        fast = _as_dict(gridded_compose_plus(u1, u2, step))
        naive = _as_dict(compose(u1, u2, PLUS))
        assert set(fast) == set(naive)
        for v, p in naive.items():
            assert fast[v] == pytest.approx(p, abs=1e-9)


def test_gridded_quantizes_off_grid_inputs():
    rng = np.random.default_rng(808)
    step = 0.25
    for _ in range(N_INSTANCES // 10):
        n1, n2 = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        u1 = make_ufunction(zip(rng.uniform(-10, 10, n1).tolist(), rng.dirichlet(np.ones(n1)).tolist()))
        u2 = make_ufunction(zip(rng.uniform(-10, 10, n2).tolist(), rng.dirichlet(np.ones(n2)).tolist()))
        fast = gridded_compose_plus(u1, u2, step)
        naive = compose(quantize(u1, step), quantize(u2, step), PLUS)
        assert fast.isclose(naive, value_tol=1e-9, prob_tol=1e-9)


def test_gridded_fft_agrees_with_direct():
    rng = np.random.default_rng(909)
    for _ in range(50):
        u1, u2 = _random_u(rng, 30, 40), _random_u(rng, 30, 40)
        direct = _as_dict(gridded_compose_plus(u1, u2, 0.5))
        fft = _as_dict(gridded_compose_plus(u1, u2, 0.5, method="fft"))
        for v in set(direct) | set(fft):
            assert fft.get(v, 0.0) == pytest.approx(direct.get(v, 0.0), abs=1e-9)
