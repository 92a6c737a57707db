"""Moment-matrix relaxations bounding Bell violations over PPT states.

Words are products of independent projectors per party (the last outcome of
every setting is eliminated by completeness).  The moment matrix is indexed
by pairs (alice_word, bob_word); its entries are expectation values of
word products, identified up to projector algebra and Hermitian adjoints so
that each independent moment is a single variable.  A partial transpose
over the Bob word index gives a second PSD block, the moment-level image of
the PPT constraint on the state.

The resulting linear matrix inequality is solved through the sdp-solver
dual: the program  max g.m  s.t.  E0 + sum_a m_a E_a >= 0  is the dual of
the standard-form problem with objective -E0, constraint matrices -E_a and
right-hand sides g_a.  Equality constraints on the moments (the guessing
program's linkage to an observed behavior) enter as free scalar variables
of the standard form, whose dual feasibility conditions are exactly those
equalities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .bell import Behavior, BellFunctional, Scenario, build_chsh_functional
from .linalg import kron
from .sdp import SdpOptions, SdpProblem, SdpSolution, SdpStatus, solve
from .states import DensityMatrix

log = logging.getLogger(__name__)

# a letter is (setting, outcome); a word is a tuple of letters of one party
Letter = tuple[int, int]
Word = tuple[Letter, ...]

_EPS = ()  # the empty word


def reduce_word(letters) -> Word | None:
    """Canonical form of a projector product; None if it is the zero word.

    Adjacent equal letters merge (idempotence); adjacent letters of the
    same setting with different outcomes annihilate (orthogonality).
    """
    out: list[Letter] = []
    for let in letters:
        if out and out[-1] == let:
            continue
        if out and out[-1][0] == let[0]:
            return None
        out.append(let)
    return tuple(out)


def _party_words(outcome_counts: tuple[int, ...], level: int) -> list[Word]:
    letters = [
        (x, a) for x, k in enumerate(outcome_counts) for a in range(k - 1)
    ]
    words: list[Word] = [_EPS]
    frontier: list[Word] = [_EPS]
    for _ in range(level):
        nxt = []
        for w in frontier:
            for let in letters:
                if w and w[-1][0] == let[0]:
                    continue  # equal -> reduces, orthogonal -> zero
                nxt.append(w + (let,))
        words.extend(nxt)
        frontier = nxt
    return words


@dataclass
class MomentStructure:
    """Index data of the moment matrix at one level."""

    scenario: Scenario
    level: int
    alice_words: list[Word]
    bob_words: list[Word]
    variable_map: dict[tuple[Word, Word], int]
    self_adjoint: list[bool]
    behavior_slots: dict[tuple[int, int, int, int], int]
    matrix_size: int
    # (row, col, variable, conjugated) with row <= col, zero entries omitted
    positions: list[tuple[int, int, int, bool]] = field(repr=False)
    pt_positions: list[tuple[int, int, int, bool]] = field(repr=False)

    @property
    def num_variables(self) -> int:
        return len(self.variable_map)


def build_structure(scenario: Scenario, level: int) -> MomentStructure:
    if level < 1:
        raise ValueError("level must be >= 1")
    aw = _party_words(scenario.alice_outcomes, level)
    bw = _party_words(scenario.bob_outcomes, level)
    na, nb = len(aw), len(bw)
    n = na * nb

    # reduced products of (row word)^dagger (col word), one table per party
    aprod = [[reduce_word(aw[i][::-1] + aw[j]) for j in range(na)] for i in range(na)]
    bprod = [[reduce_word(bw[k][::-1] + bw[l]) for l in range(nb)] for k in range(nb)]

    variable_map: dict[tuple[Word, Word], int] = {}
    self_adjoint: list[bool] = []

    def classify(u: Word, w: Word) -> tuple[int, bool]:
        key = (u, w)
        adj = (u[::-1], w[::-1])
        rep = min(key, adj)
        var = variable_map.get(rep)
        if var is None:
            var = len(variable_map)
            variable_map[rep] = var
            self_adjoint.append(key == adj)
        return var, rep != key

    # normalization moment first so it always has id 0
    classify(_EPS, _EPS)

    def collect(bob_entry) -> list[tuple[int, int, int, bool]]:
        pos = []
        for r in range(n):
            ia, kb = divmod(r, nb)
            for c in range(r, n):
                ja, lb = divmod(c, nb)
                u = aprod[ia][ja]
                if u is None:
                    continue
                w = bob_entry(kb, lb)
                if w is None:
                    continue
                var, conj = classify(u, w)
                pos.append((r, c, var, conj))
        return pos

    positions = collect(lambda k, l: bprod[k][l])
    pt_positions = collect(lambda k, l: bprod[l][k])

    slots: dict[tuple[int, int, int, int], int] = {}
    for x, ka in enumerate(scenario.alice_outcomes):
        for a in range(ka - 1):
            for y, kb_ in enumerate(scenario.bob_outcomes):
                for b in range(kb_ - 1):
                    var, _ = classify(((x, a),), ((y, b),))
                    slots[(a, b, x, y)] = var

    return MomentStructure(
        scenario=scenario,
        level=level,
        alice_words=aw,
        bob_words=bw,
        variable_map=variable_map,
        self_adjoint=self_adjoint,
        behavior_slots=slots,
        matrix_size=n,
        positions=positions,
        pt_positions=pt_positions,
    )


def _outcome_terms(counts: tuple[int, ...], x: int, a: int) -> list[tuple[Word, float]]:
    """Outcome operator as word combination; the last one is 1 - sum(rest)."""
    if a < counts[x] - 1:
        return [(((x, a),), 1.0)]
    terms: list[tuple[Word, float]] = [(_EPS, 1.0)]
    terms += [(((x, a2),), -1.0) for a2 in range(counts[x] - 1)]
    return terms


def _lookup(st: MomentStructure, u: Word, w: Word) -> int:
    rep = min((u, w), (u[::-1], w[::-1]))
    return st.variable_map[rep]


def slot_expansion(st: MomentStructure, a: int, b: int, x: int, y: int) -> dict[int, float]:
    """p(ab|xy) as a linear combination of moment variables."""
    out: dict[int, float] = {}
    for ua, ca in _outcome_terms(st.scenario.alice_outcomes, x, a):
        for wb, cb in _outcome_terms(st.scenario.bob_outcomes, y, b):
            var = _lookup(st, ua, wb)
            out[var] = out.get(var, 0.0) + ca * cb
    return out


def _marginal_expansion(st: MomentStructure, party: str, setting: int, outcome: int) -> dict[int, float]:
    counts = st.scenario.alice_outcomes if party == "A" else st.scenario.bob_outcomes
    out: dict[int, float] = {}
    for w, c in _outcome_terms(counts, setting, outcome):
        var = _lookup(st, w, _EPS) if party == "A" else _lookup(st, _EPS, w)
        out[var] = out.get(var, 0.0) + c
    return out


def feasible_moments(
    st: MomentStructure, state: DensityMatrix, ma, mb
) -> np.ndarray:
    """The moment vector realized by an explicit state and measurements."""
    dims = state.dims

    def word_op(words, povms, d):
        ops = {}
        for w in words:
            op = np.eye(d, dtype=complex)
            for (x, a) in w:
                op = op @ povms[x][a]
            ops[w] = op
        return ops

    needed_a = {u for (u, _w) in st.variable_map}
    needed_b = {w for (_u, w) in st.variable_map}
    ops_a = word_op(needed_a, ma.povms, dims.dA)
    ops_b = word_op(needed_b, mb.povms, dims.dB)
    vec = np.zeros(st.num_variables, dtype=complex)
    for (u, w), var in st.variable_map.items():
        vec[var] = np.trace(state.mat @ kron(ops_a[u], ops_b[w]))
    return vec


def assemble_moment_matrix(st: MomentStructure, moments: np.ndarray, pt: bool = False) -> np.ndarray:
    """Moment matrix (or its Bob-index partial transpose) from a variable vector."""
    n = st.matrix_size
    out = np.zeros((n, n), dtype=complex)
    for r, c, var, conj in (st.pt_positions if pt else st.positions):
        val = np.conj(moments[var]) if conj else moments[var]
        out[r, c] = val
        out[c, r] = np.conj(val)
    return out


# ---------------------------------------------------------------------------
# LMI assembly
# ---------------------------------------------------------------------------


def _pattern_entries(positions, nvars, self_adjoint):
    """Per-variable sparse Hermitian patterns (real and imaginary parts).

    Returns {(var, part): (rows, cols, vals)} with part 0 for the real part
    and part 1 for the imaginary part of the moment.
    """
    buckets: dict[tuple[int, int], tuple[list, list, list]] = {}

    def add(var, part, r, c, v):
        rows, cols, vals = buckets.setdefault((var, part), ([], [], []))
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for r, c, var, conj in positions:
        if r == c:
            add(var, 0, r, r, 1.0)
            continue
        add(var, 0, r, c, 1.0)
        add(var, 0, c, r, 1.0)
        if not self_adjoint[var]:
            s = -1.0 if conj else 1.0
            add(var, 1, r, c, 1j * s)
            add(var, 1, c, r, -1j * s)
    return buckets


def _pattern_matrix(bucket, n) -> sp.coo_matrix:
    rows, cols, vals = bucket
    return sp.coo_matrix((np.asarray(vals, dtype=complex), (rows, cols)), shape=(n, n))


def _functional_coefficients(f: BellFunctional, st: MomentStructure) -> np.ndarray:
    g = np.zeros(st.num_variables)
    for (a, b, x, y), c in f.joint.items():
        for var, co in slot_expansion(st, a, b, x, y).items():
            g[var] += c * co
    for (a, x), c in f.alice_marginal.items():
        for var, co in _marginal_expansion(st, "A", x, a).items():
            g[var] += c * co
    for (b, y), c in f.bob_marginal.items():
        for var, co in _marginal_expansion(st, "B", y, b).items():
            g[var] += c * co
    return g


def moment_problem(f: BellFunctional, level: int, ppt: bool = True) -> tuple[SdpProblem, MomentStructure, float]:
    """Standard-form problem whose dual is the level-`level` moment LMI.

    Returns (problem, structure, offset); the bound is offset minus the
    problem's dual value.
    """
    st = build_structure(f.scenario, level)
    n = st.matrix_size
    block_positions = [st.positions, st.pt_positions] if ppt else [st.positions]
    nblocks = len(block_positions)
    patterns = [
        _pattern_entries(pos, st.num_variables, st.self_adjoint)
        for pos in block_positions
    ]

    g = _functional_coefficients(f, st)
    offset = float(g[0])  # coefficient of the pinned normalization moment

    objective = []
    for pat in patterns:
        e0 = _pattern_matrix(pat[(0, 0)], n)
        objective.append((-e0).tocoo())

    constraints = []
    for var in range(1, st.num_variables):
        parts = (0,) if st.self_adjoint[var] else (0, 1)
        for part in parts:
            mats = {}
            for k, pat in enumerate(patterns):
                if (var, part) in pat:
                    mats[k] = -_pattern_matrix(pat[(var, part)], n)
            rhs = float(g[var]) if part == 0 else 0.0
            constraints.append((mats, rhs))

    problem = SdpProblem(blocks=[n] * nblocks, objective=objective, constraints=constraints)
    return problem, st, offset


def upper_bound_ppt(
    f: BellFunctional, level: int, ppt: bool = True, opts: SdpOptions | None = None
) -> float:
    """SDP upper bound on the functional over (PPT, if enabled) quantum behaviors."""
    problem, _st, offset = moment_problem(f, level, ppt)
    sol = solve(problem, opts or SdpOptions(max_iter=200))
    _require_usable(sol, f"moment bound (level {level})")
    return offset - sol.dual_value


def _require_usable(sol: SdpSolution, what: str) -> None:
    if sol.status is SdpStatus.OPTIMAL:
        return
    if (
        sol.status in (SdpStatus.MAX_ITER, SdpStatus.NUMERICAL_FAILURE)
        and sol.gap <= 1e-7
        and sol.primal_residual <= 1e-6
        and sol.dual_residual <= 1e-7
    ):
        log.warning("%s: accepting reduced-accuracy solve (gap %.2e)", what, sol.gap)
        return
    raise RuntimeError(f"{what}: solver returned {sol.status.value}")


def tsirelson_check() -> float:
    """Level-1 bound for the two-setting/two-outcome correlation functional.

    Returns the bound without the partial-transpose block (the known
    quantum maximum is 2*sqrt(2)); the PPT-constrained value is computed
    as a consistency probe and logged, since PPT-representable behaviors
    are expected not to beat the local bound here.
    """
    f = build_chsh_functional()
    bound = upper_bound_ppt(f, 1, ppt=False)
    probe = upper_bound_ppt(f, 1, ppt=True)
    if probe > f.local_bound + 1e-7:
        log.warning(
            "PPT probe exceeded the local bound: %.9f > %.1f", probe, f.local_bound
        )
    else:
        log.info("PPT probe consistent: %.9f <= %.1f + 1e-7", probe, f.local_bound)
    return bound


# ---------------------------------------------------------------------------
# guessing probability
# ---------------------------------------------------------------------------


def _filter_rows(L: np.ndarray, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop linearly dependent linkage rows; raise if inconsistent."""
    if L.shape[0] == 0:
        return L, t
    _q, r, piv = sla.qr(L.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    ref = diag[0] if diag.size and diag[0] > 0 else 1.0
    rank = int(np.sum(diag > 1e-12 * ref))
    if rank >= L.shape[0]:
        return L, t
    kept = np.sort(piv[:rank])
    for i in np.sort(piv[rank:]):
        coef = np.linalg.lstsq(L[kept].T, L[i], rcond=None)[0]
        if abs(t[i] - coef @ t[kept]) > 1e-8:
            raise ValueError(
                "behavior is inconsistent with the linkage constraints "
                f"(row {i} deviates by {abs(t[i] - coef @ t[kept]):.2e})"
            )
    return L[kept], t[kept]


def guessing_probability(
    beh: Behavior,
    y_star: int,
    level: int,
    party: str = "B",
    opts: SdpOptions | None = None,
) -> tuple[float, float]:
    """Certified upper bound on the guessing probability and the implied H_min.

    Maximizes the adversary's average success over subnormalized moment
    blocks, one per outcome of the targeted setting, whose behaviors sum to
    the observed one and whose averaged moments satisfy the partial-transpose
    constraint.  The bound is valid at every level; it tightens as the level
    grows.
    """
    if party not in ("A", "B"):
        raise ValueError("party must be 'A' or 'B'")
    sc = beh.scenario
    counts = sc.bob_outcomes if party == "B" else sc.alice_outcomes
    n_out = counts[y_star]
    st = build_structure(sc, level)
    n = st.matrix_size
    nv = st.num_variables

    pat0 = _pattern_entries(st.positions, nv, st.self_adjoint)
    pat1 = _pattern_entries(st.pt_positions, nv, st.self_adjoint)

    # per-branch constraint rows: (branch, var, part) -> row index
    row_of: dict[tuple[int, int, int], int] = {}
    constraints_meta: list[tuple[int, int, int]] = []
    for e in range(n_out):
        for var in range(nv):
            parts = (0,) if st.self_adjoint[var] else (0, 1)
            for part in parts:
                row_of[(e, var, part)] = len(constraints_meta)
                constraints_meta.append((e, var, part))
    m = len(constraints_meta)

    # objective: branch e maximizes its own outcome-e marginal at y_star
    g = np.zeros(m)
    for e in range(n_out):
        for var, co in _marginal_expansion(st, party, y_star, e).items():
            g[row_of[(e, var, 0)]] += co

    # linkage: branch behaviors sum to the observed behavior; branch
    # normalizations sum to one
    link_rows: list[np.ndarray] = []
    link_rhs: list[float] = []
    for x, ka in enumerate(sc.alice_outcomes):
        for y, kb in enumerate(sc.bob_outcomes):
            for a in range(ka):
                for b in range(kb):
                    row = np.zeros(m)
                    for var, co in slot_expansion(st, a, b, x, y).items():
                        for e in range(n_out):
                            row[row_of[(e, var, 0)]] += co
                    link_rows.append(row)
                    link_rhs.append(float(beh.p[(a, b, x, y)]))
    norm_row = np.zeros(m)
    for e in range(n_out):
        norm_row[row_of[(e, 0, 0)]] = 1.0
    link_rows.append(norm_row)
    link_rhs.append(1.0)

    L, t = _filter_rows(np.asarray(link_rows), np.asarray(link_rhs))

    # one moment block per adversary branch, plus a single shared block for
    # the partial transpose of the branch-averaged moments: the adversary's
    # conditional states need not be PPT individually, only their mixture
    # (the device state) is.
    blocks = [n] * (n_out + 1)
    objective = [sp.coo_matrix((n, n), dtype=complex) for _ in blocks]
    constraints = []
    for e, var, part in constraints_meta:
        mats = {}
        if (var, part) in pat0:
            mats[e] = -_pattern_matrix(pat0[(var, part)], n)
        if (var, part) in pat1:
            mats[n_out] = -_pattern_matrix(pat1[(var, part)], n)
        constraints.append((mats, float(g[len(constraints)])))

    problem = SdpProblem(
        blocks=blocks,
        objective=objective,
        constraints=constraints,
        free_coeffs=L.T.copy(),
        free_objective=-t,
    )
    sol = solve(problem, opts or SdpOptions(max_iter=200))
    _require_usable(sol, f"guessing program (level {level}, {party}, setting {y_star})")
    p_g = -sol.dual_value
    p_g = min(max(p_g, 1e-300), 1.0)
    return p_g, -math.log2(p_g)
