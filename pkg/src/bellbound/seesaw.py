"""Alternating SDP search for PPT states violating a Bell functional.

One round: maximize Tr(B rho) over PPT states for the current Bell
operator, then re-optimize Alice's POVMs, then Bob's. Every step keeps the
incumbent feasible, so the Bell value ascends monotonically. Restarts draw
independent Haar-random measurements from a counter-based RNG stream, so
results are reproducible and independent of execution order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .bell import BellFunctional, MeasurementSet, Scenario, behavior, bell_operator, evaluate
from .linalg import BipartiteDims, kron, partial_trace, partial_transpose
from .sdp import SdpOptions, SdpProblem, SdpSolution, SdpStatus, solve
from .states import DensityMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeesawConfig:
    dim: int = 3
    restarts: int = 1
    seed: int = 20140401
    convergence_tol: float = 1e-11
    max_rounds: int = 500
    # when polish_rounds > 0, the top polish_candidates restarts are rerun
    # from their final measurements with that round budget: cheap capped
    # restarts locate basins, the polish passes converge inside them.  The
    # capped value is a noisy ranking signal (basins converge at different
    # rates), so polishing several leaders is markedly more reliable than
    # polishing only the incumbent.
    polish_rounds: int = 0
    polish_candidates: int = 8

    def __post_init__(self):
        if self.dim < 2 or self.restarts < 1:
            raise ValueError("need dim >= 2 and restarts >= 1")
        if self.polish_candidates < 1:
            raise ValueError("need polish_candidates >= 1")


@dataclass
class SeesawRecord:
    best_value: float
    best_state: DensityMatrix
    best_measurements: tuple[MeasurementSet, MeasurementSet]
    rounds_used: int
    value_trace: list[float]
    restart_index: int
    failed_restarts: list[int] = field(default_factory=list)


class SolverStepError(RuntimeError):
    def __init__(self, sol: SdpSolution, what: str):
        super().__init__(f"{what}: solver returned {sol.status.value}")
        self.solution = sol


_SDP_OPTS = SdpOptions(gap_tol=1e-10, feas_tol=1e-10, max_iter=100)

# Cold-start state steps can be dual-degenerate (optimum near zero, strict
# complementarity failing), where double precision cannot certify the full
# tolerance.  Iterates whose gap and residuals pass these looser bounds are
# still accepted after an exact feasibility repair; anything worse raises.
_BEST_EFFORT_GAP = 1e-7
_BEST_EFFORT_RES = 1e-6


def _accept(sol: SdpSolution, what: str, res_tol: float = _BEST_EFFORT_RES) -> SdpSolution:
    if sol.status is SdpStatus.OPTIMAL:
        return sol
    if (
        sol.status in (SdpStatus.NUMERICAL_FAILURE, SdpStatus.MAX_ITER)
        and sol.gap <= _BEST_EFFORT_GAP
        and sol.primal_residual <= res_tol
        and sol.dual_residual <= res_tol
    ):
        return sol
    raise SolverStepError(sol, what)


def random_measurements(
    scenario: Scenario, dim: int, rng: np.random.Generator | int
) -> tuple[MeasurementSet, MeasurementSet]:
    """Haar-random projective measurements (POVM tail completes identity)."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.Generator(np.random.Philox(key=int(rng)))

    def draw_party(outcome_counts):
        settings = []
        for k in outcome_counts:
            u = _haar_unitary(dim, rng)
            effs = []
            used = np.zeros((dim, dim), dtype=complex)
            n_proj = min(k - 1, dim)
            for col in range(n_proj):
                proj = np.outer(u[:, col], u[:, col].conj())
                effs.append(proj)
                used += proj
            effs.append(np.eye(dim, dtype=complex) - used)
            while len(effs) < k:  # more outcomes than dimension: pad with zeros
                effs.append(np.zeros((dim, dim), dtype=complex))
            settings.append(tuple(effs))
        return MeasurementSet(dim, tuple(settings))

    return draw_party(scenario.alice_outcomes), draw_party(scenario.bob_outcomes)


def _haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _hermitian_basis(n: int) -> list[np.ndarray]:
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = -1.0j
            e[j, i] = 1.0j
            basis.append(e)
    return basis


def state_step(bell_op: np.ndarray, dims: BipartiteDims) -> tuple[DensityMatrix, float]:
    """Maximize Tr(B rho) over rho >= 0, PT(rho) >= 0, Tr(rho) = 1.

    The PT block is tied to the state block entrywise: <E, PT(rho)> =
    <PT(E), rho> for every Hermitian basis element E.
    """
    n = dims.total
    real_case = bool(np.max(np.abs(bell_op.imag)) < 1e-14) if np.iscomplexobj(bell_op) else True
    constraints = [({0: np.eye(n)}, 1.0)]
    for e in _hermitian_basis(n):
        if real_case and np.max(np.abs(e.imag)) > 0:
            continue
        constraints.append(({0: partial_transpose(e, dims, "B"), 1: -e}, 0.0))
    problem = SdpProblem(
        blocks=[n, n],
        objective=[np.asarray(bell_op, dtype=complex), np.zeros((n, n))],
        constraints=constraints,
    )
    sol = _accept(solve(problem, _SDP_OPTS), "state step")
    rho = sol.primal_blocks[0]
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / float(np.trace(rho).real)
    lam = min(
        float(np.linalg.eigvalsh(rho)[0]),
        float(np.linalg.eigvalsh(partial_transpose(rho, dims, "B"))[0]),
    )
    if lam < 0.0:
        if lam < -1e-6:
            raise SolverStepError(sol, "state step (infeasible iterate)")
        # tiny white-noise admixture restores exact PPT membership
        t = (-lam + 1e-12) / (-lam + 1.0 / n)
        rho = (1.0 - t) * rho + (t / n) * np.eye(n)
    value = float(np.trace(np.asarray(bell_op) @ rho).real)
    return DensityMatrix(rho, dims), value


def state_step_problem(bell_op: np.ndarray, dims: BipartiteDims) -> SdpProblem:
    """The state-step SDP as data, for export and cross-checking."""
    n = dims.total
    constraints = [({0: np.eye(n)}, 1.0)]
    for e in _hermitian_basis(n):
        constraints.append(({0: partial_transpose(e, dims, "B"), 1: -e}, 0.0))
    return SdpProblem(
        blocks=[n, n],
        objective=[np.asarray(bell_op, dtype=complex), np.zeros((n, n))],
        constraints=constraints,
    )


def _marginal_operators(f: BellFunctional, rho: np.ndarray, dims: BipartiteDims):
    red_a = partial_trace(rho, dims, "B")
    red_b = partial_trace(rho, dims, "A")
    return red_a, red_b


def _alice_objective_mats(
    f: BellFunctional, state: DensityMatrix, mb: MeasurementSet
) -> tuple[list[list[np.ndarray]], float]:
    """F_{a|x} matrices plus the constant Bob-marginal offset."""
    dims = state.dims
    dA = dims.dA
    eyeA = np.eye(dA, dtype=complex)
    red_a, _ = _marginal_operators(f, state.mat, dims)
    n_settings = len(f.scenario.alice_outcomes)
    fmats = [
        [np.zeros((dA, dA), dtype=complex) for _ in range(k)]
        for k in f.scenario.alice_outcomes
    ]
    for (a, b, x, y), c in f.joint.items():
        t = partial_trace(state.mat @ kron(eyeA, mb.povms[y][b]), dims, "B")
        fmats[x][a] += c * t.conj().T  # <M, F> = Tr(M F); Tr_B(rho 1xN) need not be Hermitian
    for (a, x), c in f.alice_marginal.items():
        fmats[x][a] += c * red_a.conj().T
    const = sum(
        c * float(np.trace(state.mat @ kron(eyeA, mb.povms[y][b])).real)
        for (b, y), c in f.bob_marginal.items()
    )
    del n_settings
    return fmats, const


def _bob_objective_mats(
    f: BellFunctional, state: DensityMatrix, ma: MeasurementSet
) -> tuple[list[list[np.ndarray]], float]:
    dims = state.dims
    dB = dims.dB
    eyeB = np.eye(dB, dtype=complex)
    _, red_b = _marginal_operators(f, state.mat, dims)
    fmats = [
        [np.zeros((dB, dB), dtype=complex) for _ in range(k)]
        for k in f.scenario.bob_outcomes
    ]
    for (a, b, x, y), c in f.joint.items():
        t = partial_trace(state.mat @ kron(ma.povms[x][a], eyeB), dims, "A")
        fmats[y][b] += c * t.conj().T
    for (b, y), c in f.bob_marginal.items():
        fmats[y][b] += c * red_b.conj().T
    const = sum(
        c * float(np.trace(state.mat @ kron(ma.povms[x][a], eyeB)).real)
        for (a, x), c in f.alice_marginal.items()
    )
    return fmats, const


def _povm_step(fmats: list[list[np.ndarray]], dim: int) -> list[list[np.ndarray]]:
    """Maximize sum <M_{a|x}, F_{a|x}> over valid POVM elements."""
    block_index: dict[tuple[int, int], int] = {}
    blocks, objective = [], []
    for x, setting in enumerate(fmats):
        for a, fmat in enumerate(setting):
            block_index[(x, a)] = len(blocks)
            blocks.append(dim)
            objective.append(0.5 * (fmat + fmat.conj().T))
    constraints = []
    for x, setting in enumerate(fmats):
        for e in _hermitian_basis(dim):
            mats = {block_index[(x, a)]: e for a in range(len(setting))}
            constraints.append((mats, float(np.trace(e).real)))
    sol = _accept(
        solve(SdpProblem(blocks, objective, constraints), _SDP_OPTS),
        "measurement step",
        res_tol=1e-10,
    )
    out = []
    for x, setting in enumerate(fmats):
        effs = [sol.primal_blocks[block_index[(x, a)]] for a in range(len(setting))]
        effs = [0.5 * (m + m.conj().T) for m in effs]
        # spread the completeness residual so the POVM sums to identity exactly
        dev = sum(effs) - np.eye(dim)
        effs = [m - dev / len(effs) for m in effs]
        out.append(effs)
    return out


def alice_step(state: DensityMatrix, mb: MeasurementSet, f: BellFunctional) -> MeasurementSet:
    fmats, _ = _alice_objective_mats(f, state, mb)
    out = _povm_step(fmats, state.dims.dA)
    return MeasurementSet(state.dims.dA, tuple(tuple(s) for s in out))


def bob_step(state: DensityMatrix, ma: MeasurementSet, f: BellFunctional) -> MeasurementSet:
    fmats, _ = _bob_objective_mats(f, state, ma)
    out = _povm_step(fmats, state.dims.dB)
    return MeasurementSet(state.dims.dB, tuple(tuple(s) for s in out))


def measurement_objective(
    f: BellFunctional, state: DensityMatrix, ma: MeasurementSet, mb: MeasurementSet
) -> float:
    """sum <M_{a|x}, F_{a|x}> + Bob-marginal offset; equals evaluate()."""
    fmats, const = _alice_objective_mats(f, state, mb)
    val = const
    for x, setting in enumerate(fmats):
        for a, fmat in enumerate(setting):
            val += float(np.trace(ma.povms[x][a].conj().T @ fmat).real)
    return val


def _run_single(
    f: BellFunctional,
    cfg: SeesawConfig,
    restart: int,
    init: tuple[MeasurementSet, MeasurementSet] | None = None,
    progress=None,
) -> tuple[float, DensityMatrix, tuple[MeasurementSet, MeasurementSet], list[float]]:
    dims = BipartiteDims(cfg.dim, cfg.dim)
    if init is None:
        rng = np.random.Generator(np.random.Philox(key=cfg.seed, counter=np.array([restart, 0, 0, 0], dtype=np.uint64)))
        ma, mb = random_measurements(f.scenario, cfg.dim, rng)
    else:
        ma, mb = init
    trace: list[float] = []
    state = None
    value = -np.inf
    for rnd in range(cfg.max_rounds):
        # each step keeps the incumbent when the candidate does not improve,
        # so the trace is exactly monotone even under inexact solves; a step
        # failure after the first completed round ends the restart gracefully
        try:
            op = bell_operator(f, ma, mb)
            cand_state, cand_value = state_step(op, dims)
            if state is None or cand_value > value:
                state, value = cand_state, cand_value
            cand_ma = alice_step(state, mb, f)
            v = evaluate(f, behavior(state, cand_ma, mb, f.scenario))
            if v > value:
                ma, value = cand_ma, v
            cand_mb = bob_step(state, ma, f)
            v = evaluate(f, behavior(state, ma, cand_mb, f.scenario))
            if v > value:
                mb, value = cand_mb, v
        except SolverStepError:
            if state is None:
                raise
            log.warning("restart %d: step failed in round %d, stopping", restart, rnd)
            break
        trace.append(value)
        if progress is not None:
            progress(restart, rnd, value)
        if rnd > 0 and value - trace[-2] < cfg.convergence_tol:
            break
    assert state is not None
    return value, state, (ma, mb), trace


def run(
    f: BellFunctional,
    cfg: SeesawConfig,
    warm_start: tuple[MeasurementSet, MeasurementSet] | None = None,
    progress=None,
) -> SeesawRecord:
    """Best see-saw record over restarts (warm_start replaces restart 0)."""
    runs: list[tuple[float, int, DensityMatrix, tuple, list[float]]] = []
    failed: list[int] = []
    for restart in range(cfg.restarts):
        init = warm_start if (warm_start is not None and restart == 0) else None
        try:
            value, state, meas, trace = _run_single(f, cfg, restart, init, progress)
        except SolverStepError as exc:
            log.warning("restart %d failed: %s", restart, exc)
            failed.append(restart)
            continue
        runs.append((value, restart, state, meas, trace))
    if not runs:
        raise RuntimeError("every see-saw restart failed")
    runs.sort(key=lambda t: (-t[0], t[1]))
    value, restart, state, meas, trace = runs[0]
    best = SeesawRecord(
        best_value=value,
        best_state=state,
        best_measurements=meas,
        rounds_used=len(trace),
        value_trace=trace,
        restart_index=restart,
    )
    if cfg.polish_rounds > 0:
        polish_cfg = replace(cfg, max_rounds=cfg.polish_rounds)
        for value, restart, _state, meas, _trace in runs[: cfg.polish_candidates]:
            try:
                pv, pstate, pmeas, ptrace = _run_single(
                    f, polish_cfg, restart, meas, progress
                )
            except SolverStepError as exc:
                log.warning("polish of restart %d failed: %s", restart, exc)
                continue
            log.info("polished restart %d: %.6e -> %.6e", restart, value, pv)
            if pv > best.best_value:
                best = SeesawRecord(
                    best_value=pv,
                    best_state=pstate,
                    best_measurements=pmeas,
                    rounds_used=len(ptrace),
                    value_trace=ptrace,
                    restart_index=restart,
                )
    best.failed_restarts = failed
    return best
