import math

import numpy as np
import pytest

from bellbound.bell import (
    COUNTEREXAMPLE_SCENARIO,
    DeterministicStrategy,
    deterministic_behavior,
    evaluate,
)
from bellbound.hierarchy import (
    assemble_moment_matrix,
    build_structure,
    feasible_moments,
    guessing_probability,
    reduce_word,
    slot_expansion,
    tsirelson_check,
    upper_bound_ppt,
)

ANALYTIC_VIOLATION = 2.6314377170319307e-4


def test_reduce_word_idempotence_and_orthogonality():
    assert reduce_word([(0, 0), (0, 0)]) == ((0, 0),)
    assert reduce_word([(0, 0), (0, 1)]) is None
    assert reduce_word([(0, 0), (1, 0), (1, 0), (0, 0)]) == ((0, 0), (1, 0), (0, 0))
    assert reduce_word([]) == ()


def test_moment_matrix_sizes_by_level():
    sizes = {}
    for level in (1, 2, 3):
        st = build_structure(COUNTEREXAMPLE_SCENARIO, level)
        sizes[level] = st.matrix_size
    assert sizes == {1: 16, 2: 80, 3: 308}


def test_structure_rejects_level_zero():
    with pytest.raises(ValueError):
        build_structure(COUNTEREXAMPLE_SCENARIO, 0)


@pytest.mark.parametrize("level", [1, 2])
def test_realized_moment_matrix_is_psd_and_ppt(level, state, measurements):
    # moments of an explicit PPT state must satisfy both matrix constraints
    st = build_structure(COUNTEREXAMPLE_SCENARIO, level)
    vec = feasible_moments(st, state, *measurements)
    for pt in (False, True):
        gamma = assemble_moment_matrix(st, vec, pt=pt)
        assert np.max(np.abs(gamma - gamma.conj().T)) < 1e-12
        assert np.linalg.eigvalsh(gamma)[0] > -1e-10
    assert abs(vec[0] - 1.0) < 1e-12  # normalization moment


def test_slot_expansion_reproduces_the_behavior(state, measurements, realized_behavior):
    st = build_structure(COUNTEREXAMPLE_SCENARIO, 1)
    vec = feasible_moments(st, state, *measurements)
    for x, ka in enumerate(COUNTEREXAMPLE_SCENARIO.alice_outcomes):
        for y, kb in enumerate(COUNTEREXAMPLE_SCENARIO.bob_outcomes):
            for a in range(ka):
                for b in range(kb):
                    val = sum(c * vec[v].real for v, c in slot_expansion(st, a, b, x, y).items())
                    assert abs(val - realized_behavior.p[(a, b, x, y)]) < 1e-12


def test_upper_bounds_are_valid_and_monotone(functional):
    # every level upper-bounds the realizable violation; levels tighten
    l1 = upper_bound_ppt(functional, 1)
    l2 = upper_bound_ppt(functional, 2)
    assert l1 >= ANALYTIC_VIOLATION - 1e-9
    assert l2 >= ANALYTIC_VIOLATION - 1e-9
    assert l2 <= l1 + 1e-9
    assert l1 == pytest.approx(0.074871945587768, abs=1e-9)
    assert l2 == pytest.approx(1.2423071e-3, abs=1e-8)


def test_tsirelson_bound():
    assert abs(tsirelson_check() - 2.0 * math.sqrt(2.0)) < 1e-7


def test_guessing_is_one_on_deterministic_behaviors():
    beh = deterministic_behavior(DeterministicStrategy((0, 1, 0), (2, 0)), COUNTEREXAMPLE_SCENARIO)
    for y_star in (0, 1):
        pg, hmin = guessing_probability(beh, y_star, level=1, party="B")
        assert abs(pg - 1.0) < 1e-8
        assert abs(hmin) < 1e-7


def test_guessing_validity_against_the_marginal(realized_behavior):
    # the adversary can always guess the mode of the marginal
    for y_star, kb in enumerate(COUNTEREXAMPLE_SCENARIO.bob_outcomes):
        mode = max(
            sum(realized_behavior.p[(a, b, 0, y_star)] for a in range(2))
            for b in range(kb)
        )
        pg, hmin = guessing_probability(realized_behavior, y_star, level=1, party="B")
        assert pg >= mode - 1e-9
        assert pg <= 1.0 + 1e-9
        assert hmin >= -1e-9


def test_bob_level_one_guessing_values(realized_behavior):
    pg0, _ = guessing_probability(realized_behavior, 0, level=1, party="B")
    pg1, _ = guessing_probability(realized_behavior, 1, level=1, party="B")
    assert pg0 == pytest.approx(0.998749920805, abs=1e-7)
    assert pg1 == pytest.approx(0.999761117262, abs=1e-7)


def test_bob_level_one_entropy_is_a_valid_lower_bound(realized_behavior):
    # low levels under-estimate the extractable randomness, so the certified
    # min-entropy must stay below the converged reference value
    _, h1 = guessing_probability(realized_behavior, 1, level=1, party="B")
    assert 0.0 < h1 <= 3.6191e-4 + 5e-6


def test_alice_guessing_is_near_one(realized_behavior):
    # the state's violating realization leaves Alice's outcomes essentially
    # deterministic from the adversary's perspective
    for x_star in range(3):
        pg, _ = guessing_probability(realized_behavior, x_star, level=1, party="A")
        assert pg >= 1.0 - 1e-4


def test_min_entropy_is_monotone_in_level(realized_behavior):
    _, h1 = guessing_probability(realized_behavior, 0, level=1, party="A")
    _, h2 = guessing_probability(realized_behavior, 0, level=2, party="A")
    assert h2 >= h1 - 1e-9


def test_guessing_rejects_bad_party(realized_behavior):
    with pytest.raises(ValueError):
        guessing_probability(realized_behavior, 0, level=1, party="C")


def test_inconsistent_behavior_is_rejected():
    from bellbound.bell import Behavior

    beh = deterministic_behavior(DeterministicStrategy((0, 0, 0), (0, 0)), COUNTEREXAMPLE_SCENARIO)
    p = dict(beh.p)
    p[(0, 0, 0, 0)] = 0.7  # breaks no-signaling/normalization consistency
    p[(1, 0, 0, 0)] = 0.3
    with pytest.raises(ValueError):
        guessing_probability(Behavior(COUNTEREXAMPLE_SCENARIO, p), 0, level=1, party="B")
