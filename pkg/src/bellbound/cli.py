"""Command-line interface emitting machine-readable JSON reports.

Reports go to stdout; logging goes to stderr. Exit codes: 0 success or
claim verified, 1 check failed, 2 input error, 3 solver failure. The env
var BELLBOUND_THREADS caps the threads used by the underlying BLAS.
"""

from __future__ import annotations

import logging
import os
import sys
import time

import click
import numpy as np

from . import __version__, jsonio
from .bell import (
    COUNTEREXAMPLE_SCENARIO,
    analytic_violation_closed_form,
    behavior,
    build_analytic_measurements,
    build_functional_I,
    evaluate,
    functional_from_json,
    local_bound,
)
from .hierarchy import guessing_probability, upper_bound_ppt
from .robustness import noise_threshold
from .seesaw import SeesawConfig, SolverStepError, run as seesaw_run
from .states import (
    EIGENVALUES,
    build_counterexample_state,
    state_to_json,
    verify_state,
)

log = logging.getLogger("bellbound")

EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAILURE = 3


def _cap_threads() -> None:
    cap = os.environ.get("BELLBOUND_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def _report(command: str, inputs: dict, results: dict, timings: dict) -> None:
    payload = {
        "command": command,
        "inputs": inputs,
        "results": results,
        "timings": timings,
        "tool_version": __version__,
    }
    click.echo(jsonio.dumps(payload))


def _load_functional(path: str | None):
    if path is None:
        return build_functional_I()
    try:
        with open(path, encoding="utf-8") as fh:
            return functional_from_json(fh.read())
    except (OSError, ValueError, KeyError, TypeError) as exc:
        click.echo(f"cannot parse functional file {path!r}: {exc}", err=True)
        sys.exit(EXIT_INPUT_ERROR)


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging to stderr")
def main(verbose: bool) -> None:
    """Bell violation toolkit for the PPT bound entangled two-qutrit state."""
    _cap_threads()
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("verify-state")
@click.option("--tol", type=float, default=1e-10, show_default=True)
def cmd_verify_state(tol: float) -> None:
    """Certify trace, Hermiticity, PSD, PT invariance, and the spectrum."""
    t0 = time.perf_counter()
    state = build_counterexample_state()
    rep = verify_state(state)
    eigs = np.linalg.eigvalsh(0.5 * (state.mat + state.mat.conj().T))
    nonzero = sorted(float(v) for v in eigs if v > 1e-8)
    spectrum_dev = float(
        max(abs(v - w) for v, w in zip(nonzero, sorted(EIGENVALUES)))
    ) if len(nonzero) == len(EIGENVALUES) else float("inf")
    ok = rep.ok(tol) and spectrum_dev <= tol
    _report(
        "verify-state",
        {"tol": tol},
        {
            "trace_dev": rep.trace_dev,
            "hermiticity_dev": rep.hermiticity_dev,
            "min_eig": rep.min_eig,
            "pt_invariance_dev": rep.pt_invariance_dev,
            "pt_min_eig": rep.pt_min_eig,
            "nonzero_eigenvalues": nonzero,
            "spectrum_dev": spectrum_dev,
            "ok": ok,
        },
        {"total": time.perf_counter() - t0},
    )
    if not ok:
        sys.exit(EXIT_CHECK_FAILED)


@main.command("violation")
def cmd_violation() -> None:
    """Value of the functional on the state with the closed-form measurements."""
    t0 = time.perf_counter()
    f = build_functional_I()
    state = build_counterexample_state()
    ma, mb = build_analytic_measurements()
    value = evaluate(f, behavior(state, ma, mb, COUNTEREXAMPLE_SCENARIO))
    ref = analytic_violation_closed_form()
    bound, _ = local_bound(f)
    _report(
        "violation",
        {},
        {
            "value": value,
            "closed_form": ref,
            "difference": abs(value - ref),
            "local_bound": float(bound),
        },
        {"total": time.perf_counter() - t0},
    )


@main.command("local-bound")
@click.option("--functional", "functional_path", type=click.Path(), default=None,
              help="JSON functional file (defaults to the built-in one)")
def cmd_local_bound(functional_path: str | None) -> None:
    """Exact local bound by deterministic-strategy enumeration."""
    t0 = time.perf_counter()
    f = _load_functional(functional_path)
    bound, maximizers = local_bound(f)
    _report(
        "local-bound",
        {"functional": functional_path or "built-in"},
        {
            "local_bound": float(bound),
            "n_maximizers": len(maximizers),
            "maximizers": [
                {"alice": list(s.alice_assign), "bob": list(s.bob_assign)}
                for s in maximizers
            ],
        },
        {"total": time.perf_counter() - t0},
    )


@main.command("seesaw")
@click.option("--restarts", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=20140401, show_default=True)
@click.option("--dim", type=int, default=3, show_default=True)
@click.option("--tol", type=float, default=1e-11, show_default=True)
@click.option("--functional", "functional_path", type=click.Path(), default=None)
@click.option("--polish-rounds", type=int, default=0, show_default=True,
              help="extra convergence rounds for the best restart")
@click.option("--warm-start/--no-warm-start", default=False,
              help="start restart 0 from the closed-form measurements")
@click.option("--state-out", type=click.Path(), default=None,
              help="write the best state as JSON to this path")
def cmd_seesaw(restarts, seed, dim, tol, functional_path, polish_rounds, warm_start, state_out):
    """Lower-bound the violation by alternating state/measurement SDPs."""
    t0 = time.perf_counter()
    f = _load_functional(functional_path)
    cfg = SeesawConfig(dim=dim, restarts=restarts, seed=seed, convergence_tol=tol,
                       polish_rounds=polish_rounds)
    init = build_analytic_measurements() if warm_start else None
    try:
        rec = seesaw_run(f, cfg, warm_start=init)
    except SolverStepError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER_FAILURE)
    if state_out:
        with open(state_out, "w", encoding="utf-8") as fh:
            fh.write(state_to_json(rec.best_state))
    _report(
        "seesaw",
        {
            "restarts": restarts,
            "seed": seed,
            "dim": dim,
            "tol": tol,
            "polish_rounds": polish_rounds,
            "warm_start": warm_start,
            "functional": functional_path or "built-in",
        },
        {
            "best_value": rec.best_value,
            "rounds_used": rec.rounds_used,
            "best_restart": rec.restart_index,
            "failed_restarts": rec.failed_restarts,
            "value_trace": rec.value_trace,
        },
        {"total": time.perf_counter() - t0},
    )


@main.command("upper-bound")
@click.option("--level", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--no-ppt", is_flag=True, help="drop the partial-transpose blocks")
@click.option("--functional", "functional_path", type=click.Path(), default=None)
def cmd_upper_bound(level: int, no_ppt: bool, functional_path: str | None) -> None:
    """Moment-hierarchy upper bound on the violation over PPT states."""
    t0 = time.perf_counter()
    f = _load_functional(functional_path)
    try:
        bound = upper_bound_ppt(f, level, ppt=not no_ppt)
    except RuntimeError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER_FAILURE)
    _report(
        "upper-bound",
        {"level": level, "ppt": not no_ppt, "functional": functional_path or "built-in"},
        {"upper_bound": bound},
        {"total": time.perf_counter() - t0},
    )


@main.command("randomness")
@click.option("--setting", type=int, default=0, show_default=True,
              help="measurement setting whose outcome the adversary guesses")
@click.option("--level", type=click.IntRange(1, 3), default=1, show_default=True)
@click.option("--party", type=click.Choice(["A", "B"]), default="B", show_default=True)
def cmd_randomness(setting: int, level: int, party: str) -> None:
    """Certified guessing probability and min-entropy of one setting's outcome."""
    t0 = time.perf_counter()
    counts = COUNTEREXAMPLE_SCENARIO.alice_outcomes if party == "A" else COUNTEREXAMPLE_SCENARIO.bob_outcomes
    if not 0 <= setting < len(counts):
        click.echo(
            f"setting {setting} out of range for party {party} "
            f"(expected 0..{len(counts) - 1})",
            err=True,
        )
        sys.exit(EXIT_INPUT_ERROR)
    state = build_counterexample_state()
    ma, mb = build_analytic_measurements()
    beh = behavior(state, ma, mb, COUNTEREXAMPLE_SCENARIO)
    try:
        p_g, h_min = guessing_probability(beh, setting, level, party=party)
    except RuntimeError as exc:
        click.echo(f"solver failure: {exc}", err=True)
        sys.exit(EXIT_SOLVER_FAILURE)
    _report(
        "randomness",
        {"setting": setting, "level": level, "party": party},
        {"guessing_probability": p_g, "h_min": h_min},
        {"total": time.perf_counter() - t0},
    )


@main.command("robustness")
def cmd_robustness() -> None:
    """White-noise threshold below which the violation persists."""
    t0 = time.perf_counter()
    f = build_functional_I()
    state = build_counterexample_state()
    ma, mb = build_analytic_measurements()
    rep = noise_threshold(state, f, ma, mb)
    _report(
        "robustness",
        {},
        {
            "value_state": rep.value_state,
            "value_noise": rep.value_noise,
            "threshold": rep.threshold,
        },
        {"total": time.perf_counter() - t0},
    )


if __name__ == "__main__":
    main()
