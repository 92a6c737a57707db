"""Bell scenario machinery: functional, measurements, behaviors, bounds.

Scenario of the counterexample: Alice has three binary settings, Bob a
ternary and a binary setting. Marginals are completed deterministically:
p_A(a|x) is read from Bob's setting y=0 and p_B(b|y) from Alice's setting
x=0 (immaterial for no-signaling behaviors).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import jsonio
from .linalg import BipartiteDims, kron
from .states import DensityMatrix


@dataclass(frozen=True)
class Scenario:
    alice_outcomes: tuple[int, ...]
    bob_outcomes: tuple[int, ...]

    def __post_init__(self):
        if any(k < 2 for k in self.alice_outcomes + self.bob_outcomes):
            raise ValueError("every setting needs at least 2 outcomes")


COUNTEREXAMPLE_SCENARIO = Scenario((2, 2, 2), (3, 2))
CHSH_SCENARIO = Scenario((2, 2), (2, 2))


@dataclass(frozen=True)
class BellFunctional:
    scenario: Scenario
    joint: dict[tuple[int, int, int, int], float]  # (a, b, x, y) -> c
    alice_marginal: dict[tuple[int, int], float]  # (a, x) -> c
    bob_marginal: dict[tuple[int, int], float]  # (b, y) -> c
    local_bound: float

    def __post_init__(self):
        na, nb = self.scenario.alice_outcomes, self.scenario.bob_outcomes
        for (a, b, x, y) in self.joint:
            if not (0 <= x < len(na) and 0 <= y < len(nb) and 0 <= a < na[x] and 0 <= b < nb[y]):
                raise ValueError(f"joint index {(a, b, x, y)} outside scenario")
        for (a, x) in self.alice_marginal:
            if not (0 <= x < len(na) and 0 <= a < na[x]):
                raise ValueError(f"alice marginal index {(a, x)} outside scenario")
        for (b, y) in self.bob_marginal:
            if not (0 <= y < len(nb) and 0 <= b < nb[y]):
                raise ValueError(f"bob marginal index {(b, y)} outside scenario")


@dataclass(frozen=True)
class Behavior:
    scenario: Scenario
    p: dict[tuple[int, int, int, int], float]

    def alice_marginal(self, a: int, x: int, y: int = 0) -> float:
        return sum(self.p[(a, b, x, y)] for b in range(self.scenario.bob_outcomes[y]))

    def bob_marginal(self, b: int, y: int, x: int = 0) -> float:
        return sum(self.p[(a, b, x, y)] for a in range(self.scenario.alice_outcomes[x]))


@dataclass(frozen=True)
class MeasurementSet:
    dim: int
    povms: tuple[tuple[np.ndarray, ...], ...]  # povms[setting][outcome]

    def validity_deviation(self) -> float:
        """Max of PSD and completeness deviations over all settings."""
        dev = 0.0
        for setting in self.povms:
            total = np.zeros((self.dim, self.dim), dtype=complex)
            for m in setting:
                h = 0.5 * (m + m.conj().T)
                dev = max(dev, float(np.max(np.abs(m - h))))
                dev = max(dev, max(0.0, -float(np.linalg.eigvalsh(h)[0])))
                total += m
            dev = max(dev, float(np.max(np.abs(total - np.eye(self.dim)))))
        return dev


@dataclass(frozen=True)
class DeterministicStrategy:
    alice_assign: tuple[int, ...]  # outcome per Alice setting
    bob_assign: tuple[int, ...]


def build_functional_I() -> BellFunctional:
    """The nine-term functional whose local bound is exactly 0."""
    joint = {
        (0, 1, 0, 0): -1.0,
        (0, 0, 1, 0): -1.0,
        (0, 0, 2, 0): 1.0,
        (0, 1, 2, 0): 1.0,
        (0, 0, 0, 1): 1.0,
        (0, 0, 1, 1): 1.0,
        (0, 0, 2, 1): 1.0,
    }
    return BellFunctional(
        scenario=COUNTEREXAMPLE_SCENARIO,
        joint=joint,
        alice_marginal={(0, 2): -1.0},
        bob_marginal={(0, 1): -2.0},
        local_bound=0.0,
    )


def build_chsh_functional() -> BellFunctional:
    """CHSH in probability form: E00 + E01 + E10 - E11 <= 2."""
    joint: dict[tuple[int, int, int, int], float] = {}
    for x, y in itertools.product(range(2), range(2)):
        sign = -1.0 if (x, y) == (1, 1) else 1.0
        for a, b in itertools.product(range(2), range(2)):
            joint[(a, b, x, y)] = sign * (1.0 if a == b else -1.0)
    return BellFunctional(CHSH_SCENARIO, joint, {}, {}, local_bound=2.0)


def build_analytic_measurements() -> tuple[MeasurementSet, MeasurementSet]:
    """The rank-1 real projective measurements achieving the violation."""
    p = 1 / 5
    q = math.sqrt(1 - 4 * p * p)
    s3p = math.sqrt(3) * p
    a_vecs = [
        np.array([-p, s3p, q], dtype=complex),
        np.array([2 * p, 0.0, q], dtype=complex),
        np.array([-p, -s3p, q], dtype=complex),
    ]
    eye = np.eye(3, dtype=complex)
    alice = []
    for v in a_vecs:
        proj = np.outer(v, v.conj())
        alice.append((proj, eye - proj))

    b00 = np.array([0.0, math.sqrt(2 / 3), 1 / math.sqrt(3)], dtype=complex)
    b01 = np.array([-1 / math.sqrt(2), -1 / math.sqrt(6), 1 / math.sqrt(3)], dtype=complex)
    p000 = np.outer(b00, b00.conj())
    p100 = np.outer(b01, b01.conj())
    bob_set0 = (p000, p100, eye - p000 - p100)
    p001 = np.zeros((3, 3), dtype=complex)
    p001[2, 2] = 1.0
    bob_set1 = (p001, eye - p001)

    return (
        MeasurementSet(3, tuple(tuple(s) for s in alice)),
        MeasurementSet(3, (bob_set0, bob_set1)),
    )


def behavior(
    state: DensityMatrix, ma: MeasurementSet, mb: MeasurementSet, scenario: Scenario | None = None
) -> Behavior:
    """p(ab|xy) = Tr(rho M_{a|x} (x) M_{b|y})."""
    if state.dims.dA != ma.dim or state.dims.dB != mb.dim:
        raise ValueError(
            f"dimension mismatch: state {state.dims.dA}x{state.dims.dB}, "
            f"measurements {ma.dim}/{mb.dim}"
        )
    if scenario is None:
        scenario = Scenario(
            tuple(len(s) for s in ma.povms), tuple(len(s) for s in mb.povms)
        )
    p = {}
    for x, sa in enumerate(ma.povms):
        for y, sb in enumerate(mb.povms):
            for a, eff_a in enumerate(sa):
                for b, eff_b in enumerate(sb):
                    p[(a, b, x, y)] = float(np.trace(state.mat @ kron(eff_a, eff_b)).real)
    return Behavior(scenario, p)


def evaluate(f: BellFunctional, beh: Behavior) -> float:
    """Affine combination of behavior entries defined by the functional."""
    if f.scenario != beh.scenario:
        raise ValueError("functional and behavior scenarios differ")
    val = sum(c * beh.p[k] for k, c in f.joint.items())
    val += sum(c * beh.alice_marginal(a, x) for (a, x), c in f.alice_marginal.items())
    val += sum(c * beh.bob_marginal(b, y) for (b, y), c in f.bob_marginal.items())
    return float(val)


def deterministic_behavior(strategy: DeterministicStrategy, scenario: Scenario) -> Behavior:
    p = {}
    for x, ka in enumerate(scenario.alice_outcomes):
        for y, kb in enumerate(scenario.bob_outcomes):
            for a in range(ka):
                for b in range(kb):
                    hit = strategy.alice_assign[x] == a and strategy.bob_assign[y] == b
                    p[(a, b, x, y)] = 1.0 if hit else 0.0
    return Behavior(scenario, p)


def _evaluate_deterministic_exact(f: BellFunctional, s: DeterministicStrategy) -> Fraction:
    val = Fraction(0)
    for (a, b, x, y), c in f.joint.items():
        if s.alice_assign[x] == a and s.bob_assign[y] == b:
            val += Fraction(c)
    for (a, x), c in f.alice_marginal.items():
        if s.alice_assign[x] == a:
            val += Fraction(c)
    for (b, y), c in f.bob_marginal.items():
        if s.bob_assign[y] == b:
            val += Fraction(c)
    return val


ENUMERATION_BUDGET = 10**7


def local_bound(f: BellFunctional):
    """Exact maximum over deterministic strategies, with all maximizers.

    Deterministic points are the extreme points of the local set, so by
    convexity the enumeration gives the exact local bound. Arithmetic is
    exact (Fractions over the binary float coefficients); for integer
    coefficients the result is an exact integer.
    """
    na, nb = f.scenario.alice_outcomes, f.scenario.bob_outcomes
    n_alice = math.prod(na)
    n_bob = math.prod(nb)
    if n_alice > ENUMERATION_BUDGET or n_bob > ENUMERATION_BUDGET:
        raise ValueError(
            f"strategy space {n_alice}x{n_bob} exceeds enumeration budget {ENUMERATION_BUDGET}"
        )
    best: Fraction | None = None
    maximizers: list[DeterministicStrategy] = []
    for aa in itertools.product(*(range(k) for k in na)):
        for bb in itertools.product(*(range(k) for k in nb)):
            strat = DeterministicStrategy(aa, bb)
            val = _evaluate_deterministic_exact(f, strat)
            if best is None or val > best:
                best = val
                maximizers = [strat]
            elif val == best:
                maximizers.append(strat)
    assert best is not None
    value = int(best) if best.denominator == 1 else float(best)
    return value, maximizers


def bell_operator(f: BellFunctional, ma: MeasurementSet, mb: MeasurementSet) -> np.ndarray:
    """B = sum c_{ab|xy} M_{a|x} (x) M_{b|y} plus identity-padded marginals."""
    dA, dB = ma.dim, mb.dim
    eyeA, eyeB = np.eye(dA, dtype=complex), np.eye(dB, dtype=complex)
    op = np.zeros((dA * dB, dA * dB), dtype=complex)
    for (a, b, x, y), c in f.joint.items():
        op += c * kron(ma.povms[x][a], mb.povms[y][b])
    for (a, x), c in f.alice_marginal.items():
        op += c * kron(ma.povms[x][a], eyeB)
    for (b, y), c in f.bob_marginal.items():
        op += c * kron(eyeA, mb.povms[y][b])
    return op


# Closed form of the analytic violation of build_functional_I on the
# counterexample state with the analytic measurements.
def analytic_violation_closed_form() -> float:
    return (
        -3386 + 18 * math.sqrt(42) - 5 * math.sqrt(131) + 45 * math.sqrt(5502)
    ) / 43025


def functional_to_json(f: BellFunctional) -> str:
    payload = {
        "scenario": {
            "alice": list(f.scenario.alice_outcomes),
            "bob": list(f.scenario.bob_outcomes),
        },
        "joint": [
            {"a": a, "b": b, "x": x, "y": y, "c": c} for (a, b, x, y), c in sorted(f.joint.items())
        ],
        "alice_marginal": [{"a": a, "x": x, "c": c} for (a, x), c in sorted(f.alice_marginal.items())],
        "bob_marginal": [{"b": b, "y": y, "c": c} for (b, y), c in sorted(f.bob_marginal.items())],
        "local_bound": float(f.local_bound),
    }
    return jsonio.dumps(payload)


def functional_from_json(text: str) -> BellFunctional:
    d = jsonio.loads(text)
    scenario = Scenario(tuple(d["scenario"]["alice"]), tuple(d["scenario"]["bob"]))
    return BellFunctional(
        scenario=scenario,
        joint={(t["a"], t["b"], t["x"], t["y"]): float(t["c"]) for t in d["joint"]},
        alice_marginal={(t["a"], t["x"]): float(t["c"]) for t in d["alice_marginal"]},
        bob_marginal={(t["b"], t["y"]): float(t["c"]) for t in d["bob_marginal"]},
        local_bound=float(d["local_bound"]),
    )
