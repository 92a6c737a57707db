"""Dense-block semidefinite programming solver.

Solves   maximize   sum_k <C_k, X_k>  (+ optional free-variable term)
         subject to sum_k <A_{m,k}, X_k> (+ free terms) = b_m,   X_k >= 0

with a primal-dual interior-point method using Nesterov-Todd scaling and a
Mehrotra predictor-corrector. Complex Hermitian blocks are handled through
an isometric real embedding, so the iteration itself only ever sees real
symmetric blocks. Constraint matrices may be dense arrays or scipy sparse
matrices; the Schur complement is assembled from sparse svec rows, which
keeps moment-matrix programs with thousands of constraints tractable.

Free scalar variables (unconstrained in sign) extend the standard form;
they are eliminated from the KKT system by block elimination. Equality
constraints are the only constraint type; inequalities are expected to be
modeled with 1x1 slack blocks.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import jsonio

log = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SdpOptions:
    gap_tol: float = 1e-10
    feas_tol: float = 1e-10
    max_iter: int = 200
    trace: bool = False


@dataclass
class SdpProblem:
    """Block-diagonal SDP in primal standard form (maximization).

    constraints entries are (mats, rhs) where mats maps block index -> a
    Hermitian coefficient matrix (dense or scipy sparse); a plain list with
    None placeholders is accepted as well. ``free_coeffs``/``free_objective``
    optionally add unconstrained scalar variables entering the constraints
    and objective linearly.
    """

    blocks: list[int]
    objective: list
    constraints: list
    free_coeffs: np.ndarray | None = None  # shape (m, n_free)
    free_objective: np.ndarray | None = None  # shape (n_free,)

    def constraint_as_dict(self, idx: int) -> tuple[dict, float]:
        mats, rhs = self.constraints[idx]
        if isinstance(mats, dict):
            return {k: v for k, v in mats.items() if v is not None}, float(rhs)
        return {k: v for k, v in enumerate(mats) if v is not None}, float(rhs)

    @property
    def n_free(self) -> int:
        if self.free_coeffs is None:
            return 0
        return int(np.asarray(self.free_coeffs).shape[1])


@dataclass
class SdpSolution:
    status: SdpStatus
    primal_blocks: list[np.ndarray]
    objective_value: float
    dual_value: float
    gap: float
    iterations: int
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    free_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    primal_residual: float = float("inf")
    dual_residual: float = float("inf")


# ---------------------------------------------------------------------------
# svec helpers (real symmetric matrices <-> packed upper triangle)
# ---------------------------------------------------------------------------


def _svec_len(n: int) -> int:
    return n * (n + 1) // 2


_TRIU_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _triu(n: int):
    cached = _TRIU_CACHE.get(n)
    if cached is None:
        iu, ju = np.triu_indices(n)
        w = np.where(iu == ju, 1.0, _SQRT2)
        cached = (iu, ju, w)
        _TRIU_CACHE[n] = cached
    return cached


def _svec(mat: np.ndarray) -> np.ndarray:
    iu, ju, w = _triu(mat.shape[0])
    return mat[iu, ju] * w


def _smat(v: np.ndarray, n: int) -> np.ndarray:
    iu, ju, w = _triu(n)
    vals = v / w
    out = np.zeros((n, n))
    out[iu, ju] = vals
    out[ju, iu] = vals
    return out


def _hermiticity_dev(mat) -> float:
    if sp.issparse(mat):
        d = (mat - mat.conj().T)
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0
    return float(np.max(np.abs(mat - np.conj(mat).T))) if mat.size else 0.0


def _embed_half(mat) -> np.ndarray:
    """Half-weight real embedding of a Hermitian matrix: [[R,-I],[I,R]]/2."""
    m = np.asarray(mat.toarray() if sp.issparse(mat) else mat, dtype=complex)
    n = m.shape[0]
    out = np.empty((2 * n, 2 * n))
    out[:n, :n] = out[n:, n:] = 0.5 * m.real
    out[:n, n:] = -0.5 * m.imag
    out[n:, :n] = 0.5 * m.imag
    return out


def _unembed(mat: np.ndarray, n: int) -> np.ndarray:
    """Recover a complex Hermitian matrix from a 2n x 2n embedded block."""
    r11, r12 = mat[:n, :n], mat[:n, n:]
    r21, r22 = mat[n:, :n], mat[n:, n:]
    return 0.5 * (r11 + r22) + 0.5j * (r21 - r12)


# ---------------------------------------------------------------------------
# preprocessing: embedding, sparse svec rows, rank filtering
# ---------------------------------------------------------------------------


class _Prepared:
    def __init__(self, problem: SdpProblem, feas_tol: float):
        self.block_complex: list[bool] = []
        self.orig_sizes = list(problem.blocks)

        m = len(problem.constraints)
        con_dicts = []
        rhs = np.zeros(m)
        for i in range(m):
            mats, b_i = problem.constraint_as_dict(i)
            con_dicts.append(mats)
            rhs[i] = b_i

        for k, n in enumerate(problem.blocks):
            is_c = _is_complex(problem.objective[k])
            for mats in con_dicts:
                if k in mats and _is_complex(mats[k]):
                    is_c = True
            self.block_complex.append(is_c)

        self.sizes = [2 * n if c else n for n, c in zip(problem.blocks, self.block_complex)]
        self.svec_lens = [_svec_len(n) for n in self.sizes]
        self.offsets = np.concatenate([[0], np.cumsum(self.svec_lens)])
        self.total_svec = int(self.offsets[-1])

        self.c_mats = [
            self._real_block(problem.objective[k], k) for k in range(len(problem.blocks))
        ]

        rows, cols, vals = [], [], []
        for i, mats in enumerate(con_dicts):
            for k, mat in mats.items():
                dev = _hermiticity_dev(mat)
                if dev > 1e-10:
                    raise ValueError(
                        f"constraint {i}, block {k}: coefficient not Hermitian (dev {dev:.2e})"
                    )
                r, c, v = self._svec_triplets(mat, k)
                rows.append(np.full(r.shape, i))
                cols.append(r + self.offsets[k])
                vals.append(v)
                del c
        if rows:
            self.A = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(m, self.total_svec),
            )
        else:
            self.A = sp.csr_matrix((m, self.total_svec))
        self.b = rhs

        if problem.free_coeffs is not None:
            self.F = np.asarray(problem.free_coeffs, dtype=float)
            self.f_obj = np.asarray(problem.free_objective, dtype=float)
            if self.F.shape != (m, self.f_obj.shape[0]):
                raise ValueError("free_coeffs shape does not match constraints/objective")
        else:
            self.F = np.zeros((m, 0))
            self.f_obj = np.zeros(0)

        self.keep = self._filter_dependent_rows(feas_tol)
        self.A = self.A[self.keep]
        self.b = self.b[self.keep]
        self.F = self.F[self.keep]
        self.AT = self.A.T.tocsr()
        self.m = self.A.shape[0]

        # COO triplets per block for Schur assembly, sorted by constraint row.
        self._block_triplets = []
        for k in range(len(self.sizes)):
            lo, hi = self.offsets[k], self.offsets[k + 1]
            sub = self.A[:, lo:hi].tocoo()
            order = np.argsort(sub.row, kind="stable")
            self._block_triplets.append(
                (sub.row[order], sub.col[order], sub.data[order])
            )

    def _real_block(self, mat, k: int) -> np.ndarray:
        dev = _hermiticity_dev(mat)
        if dev > 1e-10:
            raise ValueError(f"objective block {k} not Hermitian (dev {dev:.2e})")
        if self.block_complex[k]:
            return _embed_half(mat)
        if sp.issparse(mat):
            return np.asarray(mat.real.toarray(), dtype=float)
        return np.asarray(np.real(mat), dtype=float)

    def _svec_triplets(self, mat, k: int):
        """Sparse svec coordinates of one constraint coefficient matrix."""
        if self.block_complex[k]:
            dense = _embed_half(mat)
        elif sp.issparse(mat):
            dense = np.asarray(mat.real.toarray(), dtype=float)
        else:
            dense = np.asarray(np.real(mat), dtype=float)
        out = _svec(dense)
        nz = np.nonzero(out)[0]
        return nz, None, out[nz]

    # Rank-revealing QR costs O(N m^2); it runs only when the cheap Gram
    # Cholesky test signals a deficiency and the size permits.
    _QR_FLOP_LIMIT = 2e9

    def _filter_dependent_rows(self, feas_tol: float) -> np.ndarray:
        m = self.A.shape[0]
        keep = np.arange(m)
        if m == 0:
            return keep
        gram = (self.A @ self.A.T).toarray() + self.F @ self.F.T
        scale = float(np.max(gram.diagonal(), initial=0.0))
        if scale > 0:
            try:
                sla.cho_factor(gram, lower=True)
                return keep
            except sla.LinAlgError:
                pass
        ncols = self.A.shape[1] + self.F.shape[1]
        if float(ncols) * m * m > self._QR_FLOP_LIMIT:
            log.warning(
                "constraint rows look dependent but the rank check is too "
                "large to run (%d x %d); relying on the ridge fallback",
                m, ncols,
            )
            return keep
        dense = np.hstack([self.A.toarray(), self.F])
        _, r, piv = sla.qr(dense.T, pivoting=True, mode="economic")
        diag = np.abs(np.diag(r))
        ref = diag[0] if diag.size and diag[0] > 0 else 1.0
        rank = int(np.sum(diag > 1e-12 * ref))
        if rank >= m:
            return keep
        kept = np.sort(piv[:rank])
        for i in np.sort(piv[rank:]):
            coef = np.linalg.lstsq(dense[kept].T, dense[i], rcond=None)[0]
            if abs(self.b[i] - coef @ self.b[kept]) > max(1e-8, 100 * feas_tol):
                raise _InconsistentRows(int(i))
            log.warning("dropping linearly dependent constraint row %d", i)
        return kept

    # -- linear maps ------------------------------------------------------

    def split(self, v: np.ndarray) -> list[np.ndarray]:
        return [v[self.offsets[k]: self.offsets[k + 1]] for k in range(len(self.sizes))]

    def mats_from_svec(self, v: np.ndarray) -> list[np.ndarray]:
        return [_smat(part, n) for part, n in zip(self.split(v), self.sizes)]

    def svec_from_mats(self, mats: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([_svec(m) for m in mats]) if mats else np.zeros(0)

    def schur_matrix(self, W: list[np.ndarray]) -> np.ndarray:
        """H with H_ij = <W M_i W, M_j>, assembled per block in bounded memory.

        Each constraint matrix is a short list of symmetrised entries
        f_t (e_r e_c^T + e_c e_r^T), so the inner product reduces to the
        pairwise sum 2 f_t f_u (W[r,r']W[c,c'] + W[r,c']W[c,r']), which is
        far cheaper than forming any dense W M W when the rows are sparse.
        """
        H = np.zeros((self.m, self.m))
        for k, n in enumerate(self.sizes):
            rows, pos, vals = self._block_triplets[k]
            if rows.size == 0:
                continue
            iu, ju, _ = _triu(n)
            r, c = iu[pos], ju[pos]
            # f is the matrix-entry weight: svec stores sqrt(2) x entry off
            # the diagonal, and diagonal entries must not be double counted
            # by the symmetrised pair above.
            f = np.where(r == c, 0.5 * vals, vals / _SQRT2)
            Wk = W[k]
            starts = np.concatenate([[0], np.nonzero(np.diff(rows))[0] + 1])
            ends = np.concatenate([starts[1:], [rows.size]])
            urows = rows[starts]
            p = urows.size
            if p * n * n <= 4_000_000:
                # small blocks: batched dense congruences beat the
                # per-constraint loop on Python overhead
                ridx = np.searchsorted(urows, rows)
                M = np.zeros((p, n, n))
                np.add.at(M, (ridx, r, c), f)
                np.add.at(M, (ridx, c, r), f)
                w_sv = _triu(n)[2]
                T = Wk @ (M @ Wk)
                sv = T[:, iu, ju] * w_sv
                B = np.zeros((p, iu.size))
                B[ridx, pos] = vals
                H[np.ix_(urows, urows)] += sv @ B.T
                continue
            flat = r * n + c
            for idx in range(p):
                s0, s1 = starts[idx], ends[idx]
                rj, cj, fj = r[s0:s1], c[s0:s1], f[s0:s1]
                Z = (Wk[:, rj] * fj) @ Wk[cj, :]
                Z += (Wk[:, cj] * fj) @ Wk[rj, :]
                g = Z.ravel()[flat] * f
                H[urows, urows[idx]] += 2.0 * np.add.reduceat(g, starts)
        return H

    def apply_scaling(self, W: list[np.ndarray], v: np.ndarray) -> np.ndarray:
        """svec of W_k mat(v_k) W_k per block."""
        mats = self.mats_from_svec(v)
        return self.svec_from_mats([Wk @ Mk @ Wk for Wk, Mk in zip(W, mats)])


class _InconsistentRows(Exception):
    def __init__(self, row: int):
        super().__init__(f"dependent constraint row {row} has inconsistent right-hand side")
        self.row = row


def _is_complex(mat) -> bool:
    if mat is None:
        return False
    if sp.issparse(mat):
        return np.iscomplexobj(mat.data) and bool(np.any(np.abs(mat.imag.data) > 0))
    arr = np.asarray(mat)
    return np.iscomplexobj(arr) and bool(np.any(np.abs(arr.imag) > 0))


# ---------------------------------------------------------------------------
# interior-point core
# ---------------------------------------------------------------------------


def _nt_scaling(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """W with W Z W = X, via the Cholesky/SVD construction."""
    Lx = sla.cholesky(X, lower=True)
    Lz = sla.cholesky(Z, lower=True)
    U, d, Vt = sla.svd(Lz.T @ Lx)
    del U
    tmp = Lx @ (Vt.T / d)
    return tmp @ (Vt @ Lx.T)


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha <= 1 with X + alpha dX >= 0 (X assumed PD)."""
    L = sla.cholesky(X, lower=True)
    Y = sla.solve_triangular(L, dX, lower=True)
    Y = sla.solve_triangular(L, Y.T, lower=True)
    lam = float(np.linalg.eigvalsh(0.5 * (Y + Y.T))[0])
    if lam >= -1e-14:
        return 1.0
    return min(1.0, -1.0 / lam)


def _sym(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def solve(problem: SdpProblem, opts: SdpOptions | None = None) -> SdpSolution:
    """Interior-point solve of a block SDP; see module docstring."""
    opts = opts or SdpOptions()
    try:
        prep = _Prepared(problem, opts.feas_tol)
    except _InconsistentRows:
        return SdpSolution(
            SdpStatus.INFEASIBLE, [], float("nan"), float("nan"), float("inf"), 0
        )

    sizes = prep.sizes
    nblk = len(sizes)
    total_dim = sum(sizes)
    A, AT, b, F, f_obj = prep.A, prep.AT, prep.b, prep.F, prep.f_obj
    m, nf = prep.m, F.shape[1]

    # internal minimization: min chat.x + fhat.u, dual max b.y
    c_svec = prep.svec_from_mats(prep.c_mats)
    chat = -c_svec
    fhat = -f_obj

    data_scale = max(1.0, float(np.max(np.abs(b))) if m else 0.0)
    obj_scale = max(1.0, float(np.max(np.abs(c_svec))) if c_svec.size else 0.0)
    X = [data_scale * np.eye(n) for n in sizes]
    Z = [obj_scale * np.eye(n) for n in sizes]
    y = np.zeros(m)
    u = np.zeros(nf)

    status = SdpStatus.MAX_ITER
    iters = 0
    stall = 0
    pobj = dobj = float("nan")
    p_res = d_res = gap = float("inf")

    bnorm = 1.0 + (float(np.max(np.abs(b))) if m else 0.0)
    cnorm = 1.0 + (float(np.max(np.abs(chat))) if chat.size else 0.0)
    last_ap = last_ad = 0.0

    for it in range(opts.max_iter):
        iters = it
        x_svec = prep.svec_from_mats(X)
        z_svec = prep.svec_from_mats(Z)

        rp = b - A @ x_svec - F @ u
        if m and it > 0:
            # Reconstructing the primal step through the NT scaling loses
            # accuracy once mu is tiny, so the iterate is projected back
            # onto the affine constraints in the X-weighted metric
            # (dX = X smat(A^T c) X): the correction then shrinks along
            # X's small eigendirections and preserves positivity.
            res = float(np.max(np.abs(rp)))
            if 1e-15 * bnorm < res <= 1e-6 * bnorm:
                try:
                    Hx = prep.schur_matrix(X)
                    if nf:
                        Hx = Hx + F @ F.T
                    cf = sla.cho_factor(0.5 * (Hx + Hx.T), lower=True)
                    corr = sla.cho_solve(cf, rp)
                    d_mats = prep.mats_from_svec(
                        prep.apply_scaling(X, AT @ corr)
                    )
                    cand = [_sym(Xk + dk) for Xk, dk in zip(X, d_mats)]
                    if all(float(np.linalg.eigvalsh(Ck)[0]) > 0.0 for Ck in cand):
                        X = cand
                        if nf:
                            u = u + F.T @ corr
                        x_svec = prep.svec_from_mats(X)
                        rp = b - A @ x_svec - F @ u
                except sla.LinAlgError:
                    pass
        rd = chat - AT @ y - z_svec
        rf = fhat - F.T @ y if nf else np.zeros(0)

        pobj = float(chat @ x_svec + fhat @ u)
        dobj = float(b @ y)
        mu = sum(float(np.tensordot(Xk, Zk)) for Xk, Zk in zip(X, Z)) / max(total_dim, 1)

        p_res = float(np.max(np.abs(rp))) / bnorm if m else 0.0
        d_res = max(
            float(np.max(np.abs(rd))) / cnorm if rd.size else 0.0,
            float(np.max(np.abs(rf))) / cnorm if nf else 0.0,
        )
        gap = abs(pobj - dobj)

        if opts.trace:
            log.info(
                "it=%3d mu=%9.2e pres=%9.2e dres=%9.2e gap=%9.2e pobj=%+.10e ap=%6.0e ad=%6.0e",
                it, mu, p_res, d_res, gap, -pobj, last_ap, last_ad,
            )
        if p_res <= opts.feas_tol and d_res <= opts.feas_tol and (
            gap <= opts.gap_tol * max(1.0, abs(pobj), abs(dobj)) or mu * total_dim <= opts.gap_tol
        ):
            status = SdpStatus.OPTIMAL
            break

        # crude dual-ray infeasibility test
        ynorm = float(np.max(np.abs(y))) if m else 0.0
        if ynorm > 1e10 and dobj > 1e8 * max(1.0, abs(pobj)) and d_res < 1e-6:
            status = SdpStatus.INFEASIBLE
            break

        try:
            W = [_nt_scaling(Xk, Zk) for Xk, Zk in zip(X, Z)]
            # scaled-space data: G = W^{1/2}; V = G^-1 X G^-1 = G Z G
            G, Ginv, Vq, Vd = [], [], [], []
            for Wk, Xk in zip(W, X):
                w_eval, w_evec = np.linalg.eigh(Wk)
                if w_eval[0] <= 0.0 or not np.isfinite(w_eval[-1]):
                    raise sla.LinAlgError("scaling matrix lost positive definiteness")
                g = (w_evec * np.sqrt(w_eval)) @ w_evec.T
                gi = (w_evec / np.sqrt(w_eval)) @ w_evec.T
                v = _sym(gi @ Xk @ gi)
                d, q = np.linalg.eigh(v)
                G.append(g)
                Ginv.append(gi)
                Vq.append(q)
                Vd.append(d)
            H = prep.schur_matrix(W)
            H = 0.5 * (H + H.T)
            ridge = 0.0
            for attempt in range(4):
                try:
                    Hf = sla.cho_factor(
                        H + ridge * np.eye(m) if ridge else H, lower=True
                    )
                    break
                except sla.LinAlgError:
                    ridge = max(ridge * 100.0, 1e-13 * max(1.0, float(np.max(np.abs(H)))))
            else:
                status = SdpStatus.NUMERICAL_FAILURE
                break

            def lyapunov_rc(k: int, rhs: np.ndarray) -> np.ndarray:
                """G (L_V^{-1} rhs) G for block k, L_V(M) = (MV + VM)/2."""
                q, d = Vq[k], Vd[k]
                rq = q.T @ rhs @ q
                m = q @ (2.0 * rq / np.add.outer(d, d)) @ q.T
                return _sym(G[k] @ m @ G[k])

            HinvF = sla.cho_solve(Hf, F) if nf else None
            S = F.T @ HinvF if nf else None

            def kkt_solve(r1, r2):
                if nf:
                    du = np.linalg.solve(S, F.T @ sla.cho_solve(Hf, r1) - r2)
                    dy = sla.cho_solve(Hf, r1 - F @ du)
                else:
                    du = np.zeros(0)
                    dy = sla.cho_solve(Hf, r1)
                return dy, du

            def newton(rc_mats):
                rc = prep.svec_from_mats(rc_mats)
                g_rd = prep.apply_scaling(W, rd)
                rhs1 = rp - A @ rc + A @ g_rd
                dy, du = kkt_solve(rhs1, rf)
                # iterative refinement against the unregularized KKT matrix;
                # the Schur system turns ill-conditioned as mu -> 0
                scale = 1.0 + float(np.max(np.abs(rhs1))) if m else 1.0
                for _ in range(3):
                    res1 = rhs1 - (H @ dy + F @ du)
                    res2 = rf - F.T @ dy if nf else np.zeros(0)
                    err = max(
                        float(np.max(np.abs(res1))) if m else 0.0,
                        float(np.max(np.abs(res2))) if nf else 0.0,
                    )
                    if err <= 1e-14 * scale:
                        break
                    cy, cu = kkt_solve(res1, res2)
                    dy = dy + cy
                    du = du + cu
                dz = rd - AT @ dy
                dx = rc - prep.apply_scaling(W, dz)
                return (
                    prep.mats_from_svec(dx),
                    dy,
                    prep.mats_from_svec(dz),
                    du,
                )

            # predictor
            dX_a, dy_a, dZ_a, du_a = newton([-Xk for Xk in X])
            ap = min(_max_step(Xk, dXk) for Xk, dXk in zip(X, dX_a))
            ad = min(_max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ_a))
            mu_aff = sum(
                float(np.tensordot(Xk + ap * dXk, Zk + ad * dZk))
                for Xk, dXk, Zk, dZk in zip(X, dX_a, Z, dZ_a)
            ) / max(total_dim, 1)
            sigma = min(1.0, max((max(mu_aff, 0.0) / mu) ** 3, 1e-8))

            # corrector: scaled-space residual sigma*mu*I - V^2 - sym(dXt dZt)
            rc_mats = []
            for k, (Xk, dXk, dZk) in enumerate(zip(X, dX_a, dZ_a)):
                dxt = Ginv[k] @ dXk @ Ginv[k]
                dzt = G[k] @ dZk @ G[k]
                v2 = (Vq[k] * Vd[k] ** 2) @ Vq[k].T
                rhs = sigma * mu * np.eye(Xk.shape[0]) - v2 - 0.5 * (dxt @ dzt + dzt @ dxt)
                rc_mats.append(lyapunov_rc(k, rhs))
            dX, dy, dZ, du = newton(rc_mats)
            ap = 0.98 * min(_max_step(Xk, dXk) for Xk, dXk in zip(X, dX))
            ad = 0.98 * min(_max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ))
            # while infeasible, keep mu and the residuals shrinking together;
            # otherwise mu bottoms out first and the scaling W explodes,
            # flooring the attainable feasibility
            if p_res > 10 * opts.feas_tol or d_res > 10 * opts.feas_tol:
                ap = ad = min(ap, ad)
        except (sla.LinAlgError, ValueError):
            # ValueError covers NaN/inf iterates reaching a factorization
            status = SdpStatus.NUMERICAL_FAILURE
            break

        if min(ap, ad) < 1e-13:
            stall += 1
            if stall >= 3:
                status = SdpStatus.NUMERICAL_FAILURE
                break
        else:
            stall = 0

        last_ap, last_ad = ap, ad
        X = [_sym(Xk + ap * dXk) for Xk, dXk in zip(X, dX)]
        Z = [_sym(Zk + ad * dZk) for Zk, dZk in zip(Z, dZ)]
        y = y + ad * dy
        u = u + ap * du
        iters = it + 1

    # map embedded blocks back to the caller's complex form
    primal = []
    for k, n0 in enumerate(prep.orig_sizes):
        if prep.block_complex[k]:
            primal.append(_unembed(X[k], n0))
        else:
            primal.append(X[k].copy())

    return SdpSolution(
        status=status,
        primal_blocks=primal,
        objective_value=-pobj,
        dual_value=-dobj,
        gap=gap,
        iterations=iters,
        y=y.copy(),
        free_values=u.copy(),
        primal_residual=p_res,
        dual_residual=d_res,
    )


# ---------------------------------------------------------------------------
# JSON debug format
# ---------------------------------------------------------------------------


def problem_to_json(problem: SdpProblem) -> str:
    cons = []
    for i in range(len(problem.constraints)):
        mats, rhs = problem.constraint_as_dict(i)
        cons.append(
            {
                "matrices": {
                    str(k): jsonio.matrix_to_json(
                        v.toarray() if sp.issparse(v) else np.asarray(v, dtype=complex)
                    )
                    for k, v in mats.items()
                },
                "rhs": rhs,
            }
        )
    payload = {
        "blocks": list(problem.blocks),
        "objective": [
            jsonio.matrix_to_json(
                c.toarray() if sp.issparse(c) else np.asarray(c, dtype=complex)
            )
            for c in problem.objective
        ],
        "constraints": cons,
        "free_coeffs": None if problem.free_coeffs is None else np.asarray(problem.free_coeffs).tolist(),
        "free_objective": None
        if problem.free_objective is None
        else np.asarray(problem.free_objective).tolist(),
    }
    return jsonio.dumps(payload)


def problem_from_json(text: str) -> SdpProblem:
    d = jsonio.loads(text)
    cons = [
        (
            {int(k): jsonio.matrix_from_json(v) for k, v in entry["matrices"].items()},
            float(entry["rhs"]),
        )
        for entry in d["constraints"]
    ]
    return SdpProblem(
        blocks=list(d["blocks"]),
        objective=[jsonio.matrix_from_json(c) for c in d["objective"]],
        constraints=cons,
        free_coeffs=None if d.get("free_coeffs") is None else np.asarray(d["free_coeffs"]),
        free_objective=None
        if d.get("free_objective") is None
        else np.asarray(d["free_objective"]),
    )


def solution_to_json(sol: SdpSolution) -> str:
    payload = {
        "status": sol.status.value,
        "objective_value": sol.objective_value,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "iterations": sol.iterations,
        "primal_blocks": [jsonio.matrix_to_json(x) for x in sol.primal_blocks],
        "y": sol.y.tolist(),
        "free_values": sol.free_values.tolist(),
    }
    return jsonio.dumps(payload)
