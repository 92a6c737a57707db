import numpy as np
import pytest

from bellbound.robustness import (
    noise_threshold,
    noise_threshold_bisect,
    violation_at,
)
from bellbound.states import mix_with_white_noise, verify_state

NOISELESS_VALUE = 2.6314377170319307e-4
MIXED_VALUE = -2.0 / 3.0


def test_violation_endpoints(state, functional, measurements):
    ma, mb = measurements
    assert abs(violation_at(state, functional, ma, mb, 0.0) - NOISELESS_VALUE) < 1e-12
    assert abs(violation_at(state, functional, ma, mb, 1.0) - MIXED_VALUE) < 1e-12


def test_violation_is_affine_in_noise(state, functional, measurements):
    ma, mb = measurements
    for eps in (0.1, 0.25, 0.5, 0.9):
        expected = (1 - eps) * NOISELESS_VALUE + eps * MIXED_VALUE
        assert abs(violation_at(state, functional, ma, mb, eps) - expected) < 1e-12


def test_threshold_closed_form(state, functional, measurements):
    ma, mb = measurements
    report = noise_threshold(state, functional, ma, mb)
    assert abs(report.value_state - NOISELESS_VALUE) < 1e-12
    assert abs(report.value_noise - MIXED_VALUE) < 1e-12
    expected = NOISELESS_VALUE / (NOISELESS_VALUE - MIXED_VALUE)
    assert abs(report.threshold - expected) < 1e-15
    assert report.threshold > 0
    assert abs(report.threshold - 3.9456e-4) < 1e-8


def test_threshold_agrees_with_bisection(state, functional, measurements):
    ma, mb = measurements
    closed = noise_threshold(state, functional, ma, mb).threshold
    bisected = noise_threshold_bisect(state, functional, ma, mb, tol=1e-13)
    assert abs(closed - bisected) < 1e-10


def test_violation_vanishes_at_threshold(state, functional, measurements):
    ma, mb = measurements
    eps = noise_threshold(state, functional, ma, mb).threshold
    assert abs(violation_at(state, functional, ma, mb, eps)) < 1e-15
    assert violation_at(state, functional, ma, mb, eps * (1 - 1e-6)) > 0
    assert violation_at(state, functional, ma, mb, eps * (1 + 1e-6)) < 0


def test_noisy_state_stays_certified(state, functional, measurements):
    eps = noise_threshold(state, functional, *measurements).threshold
    noisy = mix_with_white_noise(state, eps)
    assert verify_state(noisy).ok(tol=1e-12)


def test_threshold_requires_a_violation(state, functional, measurements):
    ma, mb = measurements
    from bellbound.bell import BellFunctional

    flipped = BellFunctional(
        scenario=functional.scenario,
        joint={k: -v for k, v in functional.joint.items()},
        alice_marginal={k: -v for k, v in functional.alice_marginal.items()},
        bob_marginal={k: -v for k, v in functional.bob_marginal.items()},
        local_bound=0.0,
    )
    with pytest.raises(ValueError):
        noise_threshold(state, flipped, ma, mb)
